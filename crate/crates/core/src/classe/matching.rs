use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DesignError;

/// A lossless reactive element, SI value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Reactive {
    Inductor(f64),
    Capacitor(f64),
}

impl Reactive {
    pub fn impedance(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        match *self {
            Reactive::Inductor(l) => Complex64::new(0.0, w * l),
            Reactive::Capacitor(c) => Complex64::new(0.0, -1.0 / (w * c)),
        }
    }

    fn from_reactance(x: f64, w: f64) -> Option<Self> {
        if x == 0.0 {
            None
        } else if x > 0.0 {
            Some(Reactive::Inductor(x / w))
        } else {
            Some(Reactive::Capacitor(-1.0 / (w * x)))
        }
    }

    fn from_susceptance(b: f64, w: f64) -> Option<Self> {
        if b == 0.0 {
            None
        } else if b > 0.0 {
            Some(Reactive::Capacitor(b / w))
        } else {
            Some(Reactive::Inductor(-1.0 / (w * b)))
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Reactive::Inductor(v) | Reactive::Capacitor(v) => v,
        }
    }
}

/// Which element of the L-section touches the load (`z_from`) side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LSectionTopology {
    /// Shunt element across the load, series element toward the source.
    ShuntAtLoad,
    /// Series element next to the load, shunt element across the source side.
    SeriesAtLoad,
}

/// Two-element matching network. `None` elements are a short (series) or
/// an open (shunt).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LSection {
    pub topology: LSectionTopology,
    pub series: Option<Reactive>,
    pub shunt: Option<Reactive>,
}

impl LSection {
    pub fn empty() -> Self {
        Self { topology: LSectionTopology::ShuntAtLoad, series: None, shunt: None }
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_none() && self.shunt.is_none()
    }

    fn zs(&self, f: f64) -> Complex64 {
        self.series.map_or(Complex64::new(0.0, 0.0), |e| e.impedance(f))
    }

    fn ysh(&self, f: f64) -> Complex64 {
        self.shunt.map_or(Complex64::new(0.0, 0.0), |e| e.impedance(f).inv())
    }

    /// Impedance seen from the source side with the load side terminated in
    /// `z_load`.
    pub fn input_impedance(&self, z_load: Complex64, f: f64) -> Complex64 {
        let (zs, ysh) = (self.zs(f), self.ysh(f));
        match self.topology {
            LSectionTopology::ShuntAtLoad => zs + (z_load.inv() + ysh).inv(),
            LSectionTopology::SeriesAtLoad => (ysh + (z_load + zs).inv()).inv(),
        }
    }

    /// Impedance seen from the load side with the source side terminated in
    /// `z_source`.
    pub fn output_impedance(&self, z_source: Complex64, f: f64) -> Complex64 {
        let (zs, ysh) = (self.zs(f), self.ysh(f));
        match self.topology {
            LSectionTopology::ShuntAtLoad => (ysh + (zs + z_source).inv()).inv(),
            LSectionTopology::SeriesAtLoad => zs + (ysh + z_source.inv()).inv(),
        }
    }
}

/// Every L-section that presents `conj(z_to)` at its source side when the
/// load side is terminated in `z_from`, at `f0`.
pub fn l_section_solutions(
    z_from: Complex64,
    z_to: Complex64,
    f0: f64,
) -> Result<Vec<LSection>, DesignError> {
    if !(z_from.re > 0.0 && z_to.re > 0.0) || !z_from.is_finite() || !z_to.is_finite() {
        return Err(DesignError::NoMatch(format!(
            "real parts must be positive (from {z_from}, to {z_to})"
        )));
    }
    if !(f0.is_finite() && f0 > 0.0) {
        return Err(DesignError::NonPositive { name: "f0", value: f0 });
    }
    let target = z_to.conj();
    let scale = z_from.norm().max(target.norm());
    if (z_from - target).norm() <= 1e-12 * scale {
        return Ok(vec![LSection::empty()]);
    }
    let w = 2.0 * PI * f0;
    let mut out = Vec::new();

    // shunt across the load, then series: Zin = jX + 1/(Y_L + jB)
    let y_l = z_from.inv();
    let (g_l, b_l) = (y_l.re, y_l.im);
    let disc = g_l / target.re - g_l * g_l;
    if disc >= 0.0 {
        for s in [1.0, -1.0] {
            let bt = s * disc.sqrt(); // B_L + B
            let b = bt - b_l;
            let x = target.im + bt / (g_l * g_l + bt * bt);
            out.push(LSection {
                topology: LSectionTopology::ShuntAtLoad,
                series: Reactive::from_reactance(clean(x, scale), w),
                shunt: Reactive::from_susceptance(clean(b, 1.0 / scale), w),
            });
        }
    }

    // series next to the load, then shunt: Yin = jB + 1/(Z_L + jX)
    let y_t = target.inv();
    let (r_l, x_l) = (z_from.re, z_from.im);
    let disc = r_l / y_t.re - r_l * r_l;
    if disc >= 0.0 {
        for s in [1.0, -1.0] {
            let xt = s * disc.sqrt(); // X_L + X
            let x = xt - x_l;
            let b = y_t.im + xt / (r_l * r_l + xt * xt);
            out.push(LSection {
                topology: LSectionTopology::SeriesAtLoad,
                series: Reactive::from_reactance(clean(x, scale), w),
                shunt: Reactive::from_susceptance(clean(b, 1.0 / scale), w),
            });
        }
    }
    if out.is_empty() {
        return Err(DesignError::NoMatch(format!("no real solution from {z_from} to {z_to}")));
    }
    Ok(out)
}

fn clean(v: f64, scale: f64) -> f64 {
    if v.abs() <= 1e-12 * scale {
        0.0
    } else {
        v
    }
}

/// Preferred L-section from `z_from` to the conjugate of `z_to`: shunt
/// capacitors before shunt inductors (no DC path to ground), then series
/// inductors (low-pass), ties broken by solution order.
///
/// Returns an empty network when no transformation is needed.
pub fn l_section_match(z_from: Complex64, z_to: Complex64, f0: f64) -> Result<LSection, DesignError> {
    let solutions = l_section_solutions(z_from, z_to, f0)?;
    let score = |s: &LSection| {
        let shunt_ok = !matches!(s.shunt, Some(Reactive::Inductor(_)));
        let series_lp = !matches!(s.series, Some(Reactive::Capacitor(_)));
        2 * usize::from(shunt_ok) + usize::from(series_lp)
    };
    let best = solutions.iter().enumerate().max_by_key(|(i, s)| (score(s), usize::MAX - i));
    Ok(*best.expect("non-empty").1)
}
