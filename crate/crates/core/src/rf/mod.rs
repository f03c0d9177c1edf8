//! Frequency-domain engine: nodal analysis, S-parameters, ABCD algebra,
//! microstrip lines and Touchstone output.

mod abcd;
pub(crate) mod dc;
pub(crate) mod elaborate;
mod microstrip;
pub(crate) mod mna;
mod touchstone;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use abcd::{
    abcd_of, abcd_to_s, cascade, ladder_netlist, s_to_abcd, Branch, LadderElement, TwoPortAbcd,
};
pub use dc::{dc_operating_point, OperatingPoint};
pub use microstrip::{microstrip_analyze, microstrip_synthesize, MicrostripGeometry, VALID_WIDTH_RATIO};
pub use mna::{input_impedance, mna_solve, node_impedance, s_params, s_params_at, NodeVoltages};
pub use touchstone::{read_touchstone, write_touchstone};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RfError {
    #[error("singular system: node `{node}` has no path to ground")]
    Unreachable { node: String },
    #[error("singular nodal matrix at {freq} Hz")]
    Singular { freq: f64 },
    #[error("netlist has {found} ports, {expected} required")]
    PortCount { expected: usize, found: usize },
    #[error("microstrip geometry: {0}")]
    Geometry(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("frequency grid: {0}")]
    Grid(String),
    #[error("degenerate two-port: {0}")]
    Degenerate(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("DC operating point did not converge: {0}")]
    DcConvergence(String),
    #[error("touchstone: {0}")]
    Touchstone(String),
}

/// Linearly spaced frequency axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self, RfError> {
        if !(start.is_finite() && stop.is_finite() && start > 0.0 && start <= stop) {
            return Err(RfError::Grid(format!("need 0 < start <= stop, got {start}..{stop}")));
        }
        if points == 0 {
            return Err(RfError::Grid("at least one point required".into()));
        }
        if points == 1 && start != stop {
            return Err(RfError::Grid("a single-point grid needs start == stop".into()));
        }
        Ok(Self { start, stop, points })
    }

    pub fn single(f: f64) -> Result<Self, RfError> {
        Self::new(f, f, 1)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let span = self.stop - self.start;
        let last = (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + span * i as f64 / last).collect()
    }
}

/// Two-port scattering parameters at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SPoint {
    pub freq: f64,
    pub s11: Complex64,
    pub s12: Complex64,
    pub s21: Complex64,
    pub s22: Complex64,
}

impl SPoint {
    /// Largest singular value of the 2×2 matrix.
    pub fn max_singular_value(&self) -> f64 {
        // eigenvalues of S^H S
        let (a, b, c, d) = (self.s11, self.s12, self.s21, self.s22);
        let p = a.norm_sqr() + c.norm_sqr();
        let q = b.norm_sqr() + d.norm_sqr();
        let r = a.conj() * b + c.conj() * d;
        let mean = 0.5 * (p + q);
        let diff = 0.5 * (p - q);
        (mean + (diff * diff + r.norm_sqr()).sqrt()).sqrt()
    }
}

/// S-parameters over a frequency axis. `z_ref` holds the reference
/// impedance of port 1 and port 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SMatrix {
    pub z_ref: [f64; 2],
    pub points: Vec<SPoint>,
}

impl SMatrix {
    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.freq).collect()
    }
}

/// `20·log10|x|`.
pub fn db(x: Complex64) -> f64 {
    20.0 * x.norm().log10()
}

/// Reflection at port 1 with port 2 terminated in `gamma_load`.
pub fn gamma_in(point: &SPoint, gamma_load: Complex64) -> Result<Complex64, RfError> {
    if !(gamma_load.norm() <= 1.0 + 1e-12) {
        return Err(RfError::Range(format!("|load reflection| = {} exceeds 1", gamma_load.norm())));
    }
    let den = Complex64::new(1.0, 0.0) - point.s22 * gamma_load;
    if den.norm() < 1e-12 {
        return Err(RfError::Degenerate("1 - s22·ΓL vanishes".into()));
    }
    Ok(point.s11 + point.s12 * point.s21 * gamma_load / den)
}

/// Reflection coefficient of `z` against `z0`.
pub fn reflection(z: Complex64, z0: f64) -> Complex64 {
    (z - z0) / (z + z0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_and_validation() {
        let g = FrequencyGrid::new(1e9, 4e9, 301).unwrap();
        let f = g.frequencies();
        assert_eq!(f.len(), 301);
        assert_eq!(f[0], 1e9);
        assert_eq!(f[300], 4e9);
        assert!((f[1] - 1.01e9).abs() < 1e-3);
        assert!(FrequencyGrid::new(0.0, 1e9, 3).is_err());
        assert!(FrequencyGrid::new(2e9, 1e9, 3).is_err());
        assert!(FrequencyGrid::new(1e9, 2e9, 0).is_err());
        assert_eq!(FrequencyGrid::single(2.4e9).unwrap().frequencies(), vec![2.4e9]);
    }

    #[test]
    fn gamma_in_cases() {
        let p = SPoint {
            freq: 1.0,
            s11: Complex64::new(0.1, 0.2),
            s12: Complex64::new(0.3, 0.0),
            s21: Complex64::new(2.0, 0.0),
            s22: Complex64::new(1.0, 0.0),
        };
        assert_eq!(gamma_in(&p, Complex64::new(0.0, 0.0)).unwrap(), p.s11);
        assert!(matches!(gamma_in(&p, Complex64::new(1.0, 0.0)), Err(RfError::Degenerate(_))));
        assert!(matches!(gamma_in(&p, Complex64::new(1.5, 0.0)), Err(RfError::Range(_))));
    }

    #[test]
    fn singular_value_of_unitary_is_one() {
        let p = SPoint {
            freq: 1.0,
            s11: Complex64::new(0.0, 0.0),
            s12: Complex64::new(0.0, 1.0),
            s21: Complex64::new(0.0, 1.0),
            s22: Complex64::new(0.0, 0.0),
        };
        assert!((p.max_singular_value() - 1.0).abs() < 1e-15);
    }
}
