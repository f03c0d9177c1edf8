//! Quasi-static microstrip model (Hammerstad and Jensen, 1980), no
//! dispersion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::RfError;
use crate::SPEED_OF_LIGHT;

/// Range of `width/h` over which the closed forms are used.
pub const VALID_WIDTH_RATIO: (f64, f64) = (0.05, 20.0);

/// Free-space wave impedance `μ0·c`.
const ETA0: f64 = 4.0e-7 * PI * SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrostripGeometry {
    pub width: f64,
    pub length: f64,
    pub eps_r: f64,
    pub h: f64,
}

impl MicrostripGeometry {
    /// Propagation delay of the line, seconds.
    pub fn delay(&self) -> Result<f64, RfError> {
        let (_, eps_eff) = microstrip_analyze(self)?;
        Ok(self.length * eps_eff.sqrt() / SPEED_OF_LIGHT)
    }
}

fn z0_air(u: f64) -> f64 {
    let f = 6.0 + (2.0 * PI - 6.0) * (-(30.666 / u).powf(0.7528)).exp();
    ETA0 / (2.0 * PI) * (f / u + (1.0 + (2.0 / u).powi(2)).sqrt()).ln()
}

fn eps_effective(u: f64, eps_r: f64) -> f64 {
    let a = 1.0
        + ((u.powi(4) + (u / 52.0).powi(2)) / (u.powi(4) + 0.432)).ln() / 49.0
        + (1.0 + (u / 18.1).powi(3)).ln() / 18.7;
    let b = 0.564 * ((eps_r - 0.9) / (eps_r + 3.0)).powf(0.053);
    (eps_r + 1.0) / 2.0 + (eps_r - 1.0) / 2.0 * (1.0 + 10.0 / u).powf(-a * b)
}

fn z0_at_ratio(u: f64, eps_r: f64) -> f64 {
    z0_air(u) / eps_effective(u, eps_r).sqrt()
}

/// Characteristic impedance and effective permittivity of a line.
pub fn microstrip_analyze(geom: &MicrostripGeometry) -> Result<(f64, f64), RfError> {
    let MicrostripGeometry { width, length, eps_r, h } = *geom;
    for (name, v) in [("width", width), ("length", length), ("h", h)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(RfError::Geometry(format!("{name} must be positive, got {v}")));
        }
    }
    if !(eps_r.is_finite() && eps_r >= 1.0) {
        return Err(RfError::Geometry(format!("eps_r must be at least 1, got {eps_r}")));
    }
    let u = width / h;
    let (lo, hi) = VALID_WIDTH_RATIO;
    if !(lo..=hi).contains(&u) {
        return Err(RfError::Geometry(format!("width/h = {u} outside [{lo}, {hi}]")));
    }
    let eps_eff = eps_effective(u, eps_r);
    Ok((z0_air(u) / eps_eff.sqrt(), eps_eff))
}

/// Width giving `z0_target` on a substrate of `eps_r` and thickness `h`.
pub fn microstrip_synthesize(z0_target: f64, eps_r: f64, h: f64) -> Result<f64, RfError> {
    if !(15.0..=150.0).contains(&z0_target) {
        return Err(RfError::Range(format!("target {z0_target} ohm outside [15, 150] ohm")));
    }
    if !(h.is_finite() && h > 0.0 && eps_r.is_finite() && eps_r >= 1.0) {
        return Err(RfError::Geometry(format!("bad substrate eps_r = {eps_r}, h = {h}")));
    }
    let (lo, hi) = VALID_WIDTH_RATIO;
    let (z_hi, z_lo) = (z0_at_ratio(lo, eps_r), z0_at_ratio(hi, eps_r));
    if !(z_lo..=z_hi).contains(&z0_target) {
        return Err(RfError::Range(format!(
            "target {z0_target} ohm not reachable, window gives [{z_lo:.3}, {z_hi:.3}] ohm"
        )));
    }
    // z0 falls monotonically with width; bisect in log(width/h)
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if z0_at_ratio(m.exp(), eps_r) > z0_target {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp() * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(width: f64, eps_r: f64) -> MicrostripGeometry {
        MicrostripGeometry { width, length: 0.01, eps_r, h: 0.79e-3 }
    }

    /// Wheeler/Hammerstad 1975 synthesis, used as an independent check.
    fn width_1975(z0: f64, eps_r: f64, h: f64) -> f64 {
        let a = z0 / 60.0 * ((eps_r + 1.0) / 2.0).sqrt()
            + (eps_r - 1.0) / (eps_r + 1.0) * (0.23 + 0.11 / eps_r);
        let ratio = 8.0 * a.exp() / ((2.0 * a).exp() - 2.0);
        if ratio <= 2.0 {
            return ratio * h;
        }
        let b = 377.0 * PI / (2.0 * z0 * eps_r.sqrt());
        let r = 2.0 / PI
            * (b - 1.0 - (2.0 * b - 1.0).ln()
                + (eps_r - 1.0) / (2.0 * eps_r) * ((b - 1.0).ln() + 0.39 - 0.61 / eps_r));
        r * h
    }

    #[test]
    fn air_line_has_unit_permittivity() {
        let (_, e) = microstrip_analyze(&geom(2e-3, 1.0)).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn fifty_ohm_round_trip_and_independent_width() {
        let w = microstrip_synthesize(50.0, 3.2, 0.79e-3).unwrap();
        let (z, e) = microstrip_analyze(&geom(w, 3.2)).unwrap();
        assert!((z - 50.0).abs() < 0.1, "{z}");
        assert!(e > 1.0 && e < 3.2);
        let w75 = width_1975(50.0, 3.2, 0.79e-3);
        assert!(((w - w75) / w75).abs() < 0.02, "{w} vs {w75}");
        // about 1.9 mm on this substrate
        assert!((1.8e-3..2.0e-3).contains(&w), "{w}");
    }

    #[test]
    fn monotone_and_window() {
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let u = 0.05 * (400.0f64).powf(i as f64 / 49.0);
            let (z, _) = microstrip_analyze(&geom(u * 0.79e-3, 3.2)).unwrap();
            assert!(z < last);
            last = z;
        }
        assert!(microstrip_analyze(&geom(0.01 * 0.79e-3, 3.2)).is_err());
        assert!(microstrip_analyze(&geom(30.0 * 0.79e-3, 3.2)).is_err());
        assert!(microstrip_synthesize(5.0, 3.2, 0.79e-3).is_err());
        let w30 = microstrip_synthesize(30.0, 3.2, 0.79e-3).unwrap();
        let w90 = microstrip_synthesize(90.0, 3.2, 0.79e-3).unwrap();
        assert!(w90 < w30);
    }
}
