//! Closed-form synthesis: the class-E load network, harmonic traps and
//! L-section matching networks.

mod matching;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matching::{l_section_match, l_section_solutions, LSection, LSectionTopology, Reactive};

/// `R = K·Vcc²/P` for the optimum class-E load at 50 % duty.
pub const LOAD_RESISTANCE_FACTOR: f64 = 0.5768;
/// `C_shunt = K/(ω·R)`.
pub const SHUNT_SUSCEPTANCE_FACTOR: f64 = 0.1836;
/// Excess inductive reactance of the series branch, in units of `R`.
pub const EXCESS_REACTANCE_FACTOR: f64 = 1.1525;
/// Peak switch voltage in units of `Vcc`.
pub const PEAK_VOLTAGE_FACTOR: f64 = 3.562;
/// RF choke inductance in units of the series inductance.
pub const CHOKE_RATIO: f64 = 20.0;
/// Trap inductance used when none is specified, henries.
pub const DEFAULT_TRAP_INDUCTANCE: f64 = 1.0e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("loaded Q must be at least 3, got {0}")]
    LowQ(f64),
    #[error("target harmonic must be 2 or 3, got {0}")]
    Harmonic(u32),
    #[error("infeasible trap window: {0}")]
    InfeasibleWindow(String),
    #[error("no L-section exists: {0}")]
    NoMatch(String),
}

fn positive(name: &'static str, value: f64) -> Result<f64, DesignError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(DesignError::NonPositive { name, value })
    }
}

/// Series combination `c1·c2/(c1 + c2)`.
pub fn parallel_cap(c1: f64, c2: f64) -> Result<f64, DesignError> {
    let (c1, c2) = (positive("c1", c1)?, positive("c2", c2)?);
    Ok(c1 * c2 / (c1 + c2))
}

/// Resonances bounding a trap's operating window: `r1` of `l_s` with `c1`
/// alone and `r2` of `l_s` with the series combination of `c1` and `c2`.
pub fn trap_window(c1: f64, c2: f64, l_s: f64) -> Result<(f64, f64), DesignError> {
    let l_s = positive("l_s", l_s)?;
    let cap = parallel_cap(c1, c2)?;
    let r1 = 1.0 / (2.0 * PI * (l_s * c1).sqrt());
    let r2 = 1.0 / (2.0 * PI * (l_s * cap).sqrt());
    Ok((r1, r2))
}

/// A harmonic-suppression trap: the branch `l_s` + `c1` in series, shunted
/// by `c2`, inserted in series with the signal path.
///
/// The branch is a short at `r1` and the whole trap an open circuit at
/// `r2`, which sits on the suppressed harmonic. Between the two the trap is
/// a modest inductance, so the fundamental passes when `r1 < f0 < r2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTrap {
    pub l_s: f64,
    pub c1: f64,
    pub c2: f64,
    pub r1: f64,
    pub r2: f64,
    pub target_harmonic: u32,
    /// Fundamental the trap was designed for, Hz.
    pub f0: f64,
}

impl HarmonicTrap {
    /// Builds a trap from raw component values, recomputing its window.
    pub fn from_components(
        l_s: f64,
        c1: f64,
        c2: f64,
        target_harmonic: u32,
        f0: f64,
    ) -> Result<Self, DesignError> {
        let (r1, r2) = trap_window(c1, c2, l_s)?;
        Ok(Self { l_s, c1, c2, r1, r2, target_harmonic, f0 })
    }

    /// Impedance of the trap at `f`.
    pub fn impedance(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        let branch = Complex64::new(0.0, w * self.l_s - 1.0 / (w * self.c1));
        let y = Complex64::new(0.0, w * self.c2) + branch.inv();
        y.inv()
    }

    /// `r1 < f0 < r2`.
    pub fn window_holds(&self) -> bool {
        self.r1 < self.f0 && self.f0 < self.r2
    }
}

/// Designs a trap that blocks `target_harmonic·f0`.
///
/// The blocking resonance `r2` is placed on the harmonic; `r1` is placed at
/// `f0²/r2` so the fundamental sits at the geometric centre of the window.
pub fn design_harmonic_trap(
    f0: f64,
    target_harmonic: u32,
    l_s: f64,
) -> Result<HarmonicTrap, DesignError> {
    let f0 = positive("f0", f0)?;
    let l_s = positive("l_s", l_s)?;
    if !(2..=3).contains(&target_harmonic) {
        return Err(DesignError::Harmonic(target_harmonic));
    }
    let r2 = f0 * f64::from(target_harmonic);
    let r1 = f0 * f0 / r2;
    let resonant_c = |f: f64| 1.0 / ((2.0 * PI * f).powi(2) * l_s);
    let c_ap = resonant_c(r2);
    let c1 = resonant_c(r1);
    let c2 = c1 * c_ap / (c1 - c_ap);
    let trap = HarmonicTrap::from_components(l_s, c1, c2, target_harmonic, f0)?;
    if !(trap.r1 < trap.r2) {
        return Err(DesignError::InfeasibleWindow(format!("r1 = {} Hz is not below r2 = {} Hz", trap.r1, trap.r2)));
    }
    if !(trap.r1 < f0) {
        return Err(DesignError::InfeasibleWindow(format!("r1 = {} Hz is not below f0 = {f0} Hz", trap.r1)));
    }
    if !(f0 < trap.r2) {
        return Err(DesignError::InfeasibleWindow(format!("f0 = {f0} Hz is not below r2 = {} Hz", trap.r2)));
    }
    Ok(trap)
}

/// Traps at the second and third harmonic with the default inductance.
pub fn default_traps(f0: f64) -> Result<Vec<HarmonicTrap>, DesignError> {
    [2, 3].iter().map(|&h| design_harmonic_trap(f0, h, DEFAULT_TRAP_INDUCTANCE)).collect()
}

/// Component values of an ideal class-E stage at 50 % duty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassEDesign {
    pub r_load: f64,
    pub c_shunt: f64,
    pub l_series: f64,
    pub c_series: f64,
    pub l_choke: f64,
    pub q_loaded: f64,
    pub f0: f64,
    pub vcc: f64,
    pub p_out_target: f64,
}

impl ClassEDesign {
    /// Reactance of the series branch at `f0`; equals the excess reactance
    /// `1.1525·r_load` by construction.
    pub fn series_reactance(&self) -> f64 {
        let w = 2.0 * PI * self.f0;
        w * self.l_series - 1.0 / (w * self.c_series)
    }

    /// Peak switch voltage predicted by the idealised analysis.
    pub fn predicted_peak_voltage(&self) -> f64 {
        PEAK_VOLTAGE_FACTOR * self.vcc
    }
}

/// Synthesises the class-E load network for supply `vcc`, frequency `f0`,
/// output power `p_out_target` and loaded Q `q_loaded`.
pub fn design_load_network(
    vcc: f64,
    f0: f64,
    p_out_target: f64,
    q_loaded: f64,
) -> Result<ClassEDesign, DesignError> {
    let vcc = positive("vcc", vcc)?;
    let f0 = positive("f0", f0)?;
    let p_out_target = positive("p_out_target", p_out_target)?;
    if !(q_loaded.is_finite() && q_loaded >= 3.0) {
        return Err(DesignError::LowQ(q_loaded));
    }
    let w = 2.0 * PI * f0;
    let r_load = LOAD_RESISTANCE_FACTOR * vcc * vcc / p_out_target;
    let c_shunt = SHUNT_SUSCEPTANCE_FACTOR / (w * r_load);
    let l_series = q_loaded * r_load / w;
    // ωL − 1/(ωC) = 1.1525·R
    let c_series = 1.0 / (w * (q_loaded - EXCESS_REACTANCE_FACTOR) * r_load);
    let l_choke = CHOKE_RATIO * l_series;
    Ok(ClassEDesign { r_load, c_shunt, l_series, c_series, l_choke, q_loaded, f0, vcc, p_out_target })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn parallel_cap_examples() {
        assert!(rel(parallel_cap(2e-12, 2e-12).unwrap(), 1e-12) < 1e-15);
        assert!(rel(parallel_cap(1e-12, 2e-12).unwrap(), 0.666_666_666_7e-12) < 1e-9);
        assert!(rel(parallel_cap(1e-12, 1.0).unwrap(), 1e-12) < 1e-6);
        assert!(parallel_cap(0.0, 1e-12).is_err());
        assert!(parallel_cap(1e-12, -1e-12).is_err());
    }

    #[test]
    fn worked_window() {
        let (r1, r2) = trap_window(2.2e-12, 2.2e-12, 2.2e-9).unwrap();
        assert!(rel(r1, 2.2876e9) < 1e-4, "{r1}");
        assert!(rel(r2, 3.2354e9) < 1e-4, "{r2}");
        assert!(r1 < 2.4e9 && 2.4e9 < r2);
        assert!((r2 / r1 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trap_blocks_its_harmonic() {
        let t = design_harmonic_trap(2.4e9, 2, 1e-9).unwrap();
        assert!(t.window_holds());
        assert!(rel(t.r2, 4.8e9) < 1e-12);
        // series combination resonates with 1 nH at 4.8 GHz
        let cap = parallel_cap(t.c1, t.c2).unwrap();
        assert!(rel(cap, 1.09941e-12) < 1e-5, "{cap}");
        assert!(t.impedance(4.8e9 * (1.0 + 1e-9)).norm() > 1e6);
        assert!(t.impedance(2.4e9).im > 0.0);
        assert_eq!(design_harmonic_trap(2.4e9, 5, 1e-9), Err(DesignError::Harmonic(5)));
    }

    #[test]
    fn load_network_numbers() {
        let d = design_load_network(4.2, 2.4e9, 1.0, 7.0).unwrap();
        assert!(rel(d.r_load, 10.175) < 1e-4, "{}", d.r_load);
        assert!(rel(d.c_shunt, 1.197e-12) < 1e-3, "{}", d.c_shunt);
        assert!(rel(d.series_reactance(), 1.1525 * d.r_load) < 1e-12);
        assert!(d.l_choke >= 20.0 * d.l_series * (1.0 - 1e-15));
        let d2 = design_load_network(4.2, 2.4e9, 2.0, 7.0).unwrap();
        assert_eq!(d2.r_load * 2.0, d.r_load);
        assert!(design_load_network(4.2, 2.4e9, 0.0, 7.0).is_err());
        assert_eq!(design_load_network(4.2, 2.4e9, 1.0, 2.0), Err(DesignError::LowQ(2.0)));
    }
}
