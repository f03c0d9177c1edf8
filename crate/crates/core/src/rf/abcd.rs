//! Transmission (ABCD) parameters of ladder elements and their cascade.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::microstrip::{microstrip_analyze, MicrostripGeometry};
use super::{RfError, SPoint};
use crate::netlist::{Component, DesignConstants, Element, Netlist};
use crate::SPEED_OF_LIGHT;

/// ABCD matrix at one frequency. `b` in ohms, `c` in siemens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPortAbcd {
    pub freq: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl TwoPortAbcd {
    pub fn identity(freq: f64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { freq, a: one, b: zero, c: zero, d: one }
    }

    pub fn series(freq: f64, z: Complex64) -> Self {
        Self { b: z, ..Self::identity(freq) }
    }

    pub fn shunt(freq: f64, y: Complex64) -> Self {
        Self { c: y, ..Self::identity(freq) }
    }

    /// Lossless line of impedance `z0` and electrical length `theta`.
    pub fn line(freq: f64, z0: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            freq,
            a: Complex64::new(c, 0.0),
            b: Complex64::new(0.0, z0 * s),
            c: Complex64::new(0.0, s / z0),
            d: Complex64::new(c, 0.0),
        }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Self) -> Self {
        Self {
            freq: self.freq,
            a: self.a * next.a + self.b * next.c,
            b: self.a * next.b + self.b * next.d,
            c: self.c * next.a + self.d * next.c,
            d: self.c * next.b + self.d * next.d,
        }
    }

    /// Input impedance with the output terminated in `z_load`.
    pub fn input_impedance(&self, z_load: Complex64) -> Complex64 {
        (self.a * z_load + self.b) / (self.c * z_load + self.d)
    }
}

/// Two-terminal impedance used as a ladder rung.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Branch {
    R(f64),
    L(f64),
    C(f64),
    /// Inductor and capacitor in series.
    SeriesLc(f64, f64),
}

impl Branch {
    pub fn impedance(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        match *self {
            Branch::R(r) => Complex64::new(r, 0.0),
            Branch::L(l) => Complex64::new(0.0, w * l),
            Branch::C(c) => Complex64::new(0.0, -1.0 / (w * c)),
            Branch::SeriesLc(l, c) => Complex64::new(0.0, w * l - 1.0 / (w * c)),
        }
    }
}

/// Element of a two-port ladder, listed from port 1 toward port 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LadderElement {
    Series(Branch),
    Shunt(Branch),
    Microstrip(MicrostripGeometry),
    /// Line given directly by impedance and effective permittivity.
    Line { z0: f64, eps_eff: f64, length: f64 },
}

impl LadderElement {
    /// Ladder view of a two-terminal component wired in series or shunt.
    pub fn from_component(
        component: &Component,
        shunt: bool,
        constants: &DesignConstants,
    ) -> Result<Self, RfError> {
        let branch = match component.element {
            Element::Resistor { resistance } => Branch::R(resistance),
            Element::Inductor { inductance, series_resistance: 0.0 } => {
                Branch::L(inductance)
            }
            Element::Capacitor { capacitance, series_resistance: 0.0 } => {
                Branch::C(capacitance)
            }
            Element::MicrostripLine { width, length } => {
                return Ok(LadderElement::Microstrip(MicrostripGeometry {
                    width,
                    length,
                    eps_r: constants.substrate_eps_r,
                    h: constants.substrate_h,
                }))
            }
            _ => {
                return Err(RfError::Unsupported(format!(
                    "component `{}` ({}) has no ladder form",
                    component.id,
                    component.element.kind()
                )))
            }
        };
        Ok(if shunt { LadderElement::Shunt(branch) } else { LadderElement::Series(branch) })
    }
}

/// ABCD matrix of a ladder element at `f`.
pub fn abcd_of(element: &LadderElement, f: f64) -> Result<TwoPortAbcd, RfError> {
    if !(f.is_finite() && f > 0.0) {
        return Err(RfError::Grid(format!("frequency {f} must be positive")));
    }
    Ok(match *element {
        LadderElement::Series(b) => TwoPortAbcd::series(f, b.impedance(f)),
        LadderElement::Shunt(b) => TwoPortAbcd::shunt(f, b.impedance(f).inv()),
        LadderElement::Microstrip(g) => {
            let (z0, eps_eff) = microstrip_analyze(&g)?;
            TwoPortAbcd::line(f, z0, 2.0 * PI * f * eps_eff.sqrt() * g.length / SPEED_OF_LIGHT)
        }
        LadderElement::Line { z0, eps_eff, length } => {
            TwoPortAbcd::line(f, z0, 2.0 * PI * f * eps_eff.sqrt() * length / SPEED_OF_LIGHT)
        }
    })
}

/// Ordered product of the chain.
pub fn cascade(chain: &[TwoPortAbcd]) -> Result<TwoPortAbcd, RfError> {
    let first = chain.first().ok_or_else(|| RfError::Grid("empty cascade".into()))?;
    let mut acc = *first;
    for m in &chain[1..] {
        if (m.freq - first.freq).abs() > 1e-9 * first.freq.abs() {
            return Err(RfError::Grid(format!("frequency {} differs from {}", m.freq, first.freq)));
        }
        acc = acc.then(m);
    }
    Ok(acc)
}

/// Converts to S-parameters with both ports referenced to `z0`.
pub fn abcd_to_s(m: &TwoPortAbcd, z0: f64) -> Result<SPoint, RfError> {
    if !(z0.is_finite() && z0 > 0.0) {
        return Err(RfError::Range(format!("reference impedance {z0} must be positive")));
    }
    let (a, b, c, d) = (m.a, m.b / z0, m.c * z0, m.d);
    let den = a + b + c + d;
    if den.norm() < 1e-300 || !den.is_finite() {
        return Err(RfError::Degenerate("A + B/Z0 + C·Z0 + D vanishes".into()));
    }
    Ok(SPoint {
        freq: m.freq,
        s11: (a + b - c - d) / den,
        s12: 2.0 * m.det() / den,
        s21: 2.0 / den,
        s22: (-a + b - c + d) / den,
    })
}

/// Inverse of [`abcd_to_s`].
pub fn s_to_abcd(s: &SPoint, z0: f64) -> Result<TwoPortAbcd, RfError> {
    if !(z0.is_finite() && z0 > 0.0) {
        return Err(RfError::Range(format!("reference impedance {z0} must be positive")));
    }
    if s.s21.norm() < 1e-300 {
        return Err(RfError::Degenerate("s21 vanishes".into()));
    }
    let one = Complex64::new(1.0, 0.0);
    let x = s.s12 * s.s21;
    let den = 2.0 * s.s21;
    Ok(TwoPortAbcd {
        freq: s.freq,
        a: ((one + s.s11) * (one - s.s22) + x) / den,
        b: z0 * ((one + s.s11) * (one + s.s22) - x) / den,
        c: ((one - s.s11) * (one - s.s22) - x) / (den * z0),
        d: ((one - s.s11) * (one + s.s22) + x) / den,
    })
}

/// Builds the netlist equivalent of a ladder between two `z0` ports.
///
/// Microstrip elements must use the substrate in `constants`; raw
/// [`LadderElement::Line`] elements have no netlist form.
pub fn ladder_netlist(chain: &[LadderElement], constants: DesignConstants) -> Result<Netlist, RfError> {
    let mut n = Netlist::new(constants);
    let z0 = constants.z0;
    n.push(Component::new("P1", Element::AcPort { index: 1, impedance: z0 }, &["n0", "0"]));
    let mut node = 0usize;
    let mut extra = 0usize;
    for (i, e) in chain.iter().enumerate() {
        let here = format!("n{node}");
        let mut add_branch = |id: String, b: &Branch, from: &str, to: &str, n: &mut Netlist| match *b {
            Branch::R(r) => n.push(Component::new(id, Element::resistor(r), &[from, to])),
            Branch::L(l) => n.push(Component::new(id, Element::inductor(l), &[from, to])),
            Branch::C(c) => n.push(Component::new(id, Element::capacitor(c), &[from, to])),
            Branch::SeriesLc(l, c) => {
                extra += 1;
                let mid = format!("m{extra}");
                n.push(Component::new(format!("{id}L"), Element::inductor(l), &[from, &mid]));
                n.push(Component::new(format!("{id}C"), Element::capacitor(c), &[&mid, to]));
            }
        };
        match e {
            LadderElement::Series(b) => {
                node += 1;
                let next = format!("n{node}");
                add_branch(format!("E{i}"), b, &here, &next, &mut n);
            }
            LadderElement::Shunt(b) => add_branch(format!("E{i}"), b, &here, "0", &mut n),
            LadderElement::Microstrip(g) => {
                if g.eps_r != constants.substrate_eps_r || g.h != constants.substrate_h {
                    return Err(RfError::Unsupported("microstrip substrate differs from constants".into()));
                }
                node += 1;
                let next = format!("n{node}");
                n.push(Component::new(
                    format!("E{i}"),
                    Element::MicrostripLine { width: g.width, length: g.length },
                    &[&here, &next],
                ));
            }
            LadderElement::Line { .. } => {
                return Err(RfError::Unsupported("raw line has no netlist form".into()))
            }
        }
    }
    n.push(Component::new("P2", Element::AcPort { index: 2, impedance: z0 }, &[&format!("n{node}"), "0"]));
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn definitions() {
        let z = c(3.0, 4.0);
        let m = abcd_of(&LadderElement::Series(Branch::R(3.0)), 1e9).unwrap();
        assert_eq!((m.a, m.b, m.c, m.d), (c(1.0, 0.0), c(3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)));
        let sh = TwoPortAbcd::shunt(1e9, z);
        assert_eq!((sh.b, sh.c), (c(0.0, 0.0), z));
        let two = cascade(&[TwoPortAbcd::series(1e9, z), TwoPortAbcd::series(1e9, c(1.0, -2.0))]).unwrap();
        assert_eq!(two.b, c(4.0, 2.0));
        assert_eq!(cascade(&[sh]).unwrap(), sh);
        assert!(cascade(&[sh, TwoPortAbcd::identity(2e9)]).is_err());
    }

    #[test]
    fn quarter_wave_inverter() {
        let f = 2.4e9;
        let length = SPEED_OF_LIGHT / f / 4.0 / 2.5f64.sqrt();
        let m = abcd_of(&LadderElement::Line { z0: 50.0, eps_eff: 2.5, length }, f).unwrap();
        let zin = m.input_impedance(c(100.0, 0.0));
        assert!((zin - c(25.0, 0.0)).norm() < 1e-9, "{zin}");
        assert!((m.det() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn series_fifty_ohm_s_params_and_round_trip() {
        let s = abcd_to_s(&TwoPortAbcd::series(1e9, c(50.0, 0.0)), 50.0).unwrap();
        assert!((s.s11 - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((s.s21 - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
        let id = abcd_to_s(&TwoPortAbcd::identity(1e9), 50.0).unwrap();
        assert_eq!((id.s11, id.s21), (c(0.0, 0.0), c(1.0, 0.0)));
        let back = s_to_abcd(&s, 50.0).unwrap();
        assert!((back.b - c(50.0, 0.0)).norm() < 1e-12);
    }
}
