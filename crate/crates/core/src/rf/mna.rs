//! Small-signal modified nodal analysis and S-parameter extraction.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use super::dc::{smooth_channel, solve_dc};
use super::elaborate::{elaborate, volt, Circuit, Mna, Node, Prim};
use super::{FrequencyGrid, RfError, SMatrix, SPoint};
use crate::netlist::Netlist;

/// Complex node voltages keyed by node name, ground included.
pub type NodeVoltages = BTreeMap<String, Complex64>;

/// A netlist prepared for AC analysis: FETs linearised at the DC bias.
pub(crate) struct AcSystem {
    circuit: Circuit,
    /// `(gm, gds)` per FET primitive, in primitive order.
    fet_small_signal: Vec<(f64, f64)>,
    branches: usize,
}

impl AcSystem {
    pub fn new(netlist: &Netlist) -> Result<Self, RfError> {
        let circuit = elaborate(netlist)?;
        let has_fet = circuit.prims.iter().any(|p| matches!(p, Prim::Fet { .. }));
        let dc = if has_fet { Some(solve_dc(&circuit, &smooth_channel)?) } else { None };
        let mut fet_small_signal = Vec::new();
        for p in &circuit.prims {
            if let Prim::Fet { g, d, s, model } = *p {
                let v = &dc.as_ref().expect("solved").v;
                let vgs = volt(v, g) - volt(v, s);
                let vds = volt(v, d) - volt(v, s);
                let e = model.drain_current(vgs, vds);
                fet_small_signal.push((e.d_vgs, e.d_vds));
            }
        }
        let branches = circuit.prims.iter().filter(|p| matches!(p, Prim::V { .. })).count();
        Ok(Self { circuit, fet_small_signal, branches })
    }

    pub fn ports(&self) -> Vec<(u32, Node, Node, f64)> {
        self.circuit.ports()
    }

    fn matrix(&self, f: f64) -> Mna<Complex64> {
        let w = 2.0 * PI * f;
        let j = Complex64::new(0.0, 1.0);
        let n = self.circuit.node_count();
        let mut sys = Mna::<Complex64>::new(n, self.branches);
        let mut k = 0;
        let mut fets = self.fet_small_signal.iter();
        for p in &self.circuit.prims {
            match *p {
                Prim::R { a, b, r } => sys.admittance(a, b, Complex64::new(1.0 / r, 0.0)),
                Prim::C { a, b, c } => sys.admittance(a, b, j * w * c),
                Prim::L { a, b, l } => sys.admittance(a, b, (j * w * l).inv()),
                Prim::V { p, n, .. } => {
                    // DC sources are AC shorts
                    sys.branch(k, p, n, Complex64::new(0.0, 0.0));
                    k += 1;
                }
                Prim::Port { p, n, z, .. } => sys.admittance(p, n, Complex64::new(1.0 / z, 0.0)),
                Prim::Line { a, b, z0, delay } => {
                    let theta = w * delay;
                    let y11 = Complex64::new(0.0, -1.0 / (z0 * theta.tan()));
                    let y12 = Complex64::new(0.0, 1.0 / (z0 * theta.sin()));
                    sys.add(a, a, y11);
                    sys.add(b, b, y11);
                    sys.add(a, b, y12);
                    sys.add(b, a, y12);
                }
                Prim::Fet { g, d, s, model } => {
                    let &(gm, gds) = fets.next().expect("one entry per fet");
                    sys.admittance(g, s, j * w * model.cgs);
                    sys.admittance(g, d, j * w * model.cgd);
                    sys.admittance(d, s, j * w * model.cds + gds);
                    sys.vccs(d, s, g, s, Complex64::new(gm, 0.0));
                }
            }
        }
        sys
    }

    /// Solutions for a 1 V source behind the reference impedance of each
    /// listed port, the other ports terminated.
    pub fn solve(&self, f: f64, drive: &[(Node, Node, f64)]) -> Result<Vec<DVector<Complex64>>, RfError> {
        let sys = self.matrix(f);
        let lu = sys.m.lu();
        let size = sys.rhs.len();
        let mut out = Vec::with_capacity(drive.len());
        for &(p, n, z) in drive {
            let mut rhs = DVector::<Complex64>::zeros(size);
            let i = Complex64::new(1.0 / z, 0.0);
            if let Some(p) = p {
                rhs[p] += i;
            }
            if let Some(n) = n {
                rhs[n] -= i;
            }
            let x = lu.solve(&rhs).ok_or(RfError::Singular { freq: f })?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(RfError::Singular { freq: f });
            }
            out.push(x);
        }
        Ok(out)
    }

    /// Response to a unit current injected into `node`.
    pub fn solve_injection(&self, f: f64, node: usize) -> Result<DVector<Complex64>, RfError> {
        let sys = self.matrix(f);
        let mut rhs = DVector::<Complex64>::zeros(sys.rhs.len());
        rhs[node] = Complex64::new(1.0, 0.0);
        let x = sys.m.lu().solve(&rhs).ok_or(RfError::Singular { freq: f })?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(RfError::Singular { freq: f });
        }
        Ok(x)
    }

    pub fn node_names(&self) -> &[String] {
        &self.circuit.names
    }

    pub fn s_point(&self, f: f64) -> Result<SPoint, RfError> {
        let ports = self.ports();
        if ports.len() != 2 {
            return Err(RfError::PortCount { expected: 2, found: ports.len() });
        }
        let drive: Vec<_> = ports.iter().map(|&(_, p, n, z)| (p, n, z)).collect();
        let sols = self.solve(f, &drive)?;
        let vport = |x: &DVector<Complex64>, k: usize| {
            let (_, p, n, _) = ports[k];
            volt(x.as_slice(), p) - volt(x.as_slice(), n)
        };
        let z = [ports[0].3, ports[1].3];
        let s = |i: usize, jx: usize| {
            let v = vport(&sols[jx], i);
            let delta = if i == jx { 1.0 } else { 0.0 };
            v * 2.0 * (z[jx] / z[i]).sqrt() - delta
        };
        Ok(SPoint { freq: f, s11: s(0, 0), s12: s(0, 1), s21: s(1, 0), s22: s(1, 1) })
    }
}

/// Node voltages at `f` with port 1 driven by a 1 V source behind its
/// reference impedance and every other port terminated.
pub fn mna_solve(netlist: &Netlist, f: f64) -> Result<NodeVoltages, RfError> {
    let sys = AcSystem::new(netlist)?;
    let ports = sys.ports();
    let &(_, p, n, z) = ports.first().ok_or(RfError::PortCount { expected: 1, found: 0 })?;
    let x = sys.solve(f, &[(p, n, z)])?.remove(0);
    let mut out: NodeVoltages =
        sys.node_names().iter().cloned().zip(x.iter().copied()).collect();
    out.insert(netlist.ground.clone(), Complex64::new(0.0, 0.0));
    Ok(out)
}

/// Impedance looking into port `index` (1-based) with the other ports
/// terminated in their reference impedances.
pub fn input_impedance(netlist: &Netlist, index: u32, f: f64) -> Result<Complex64, RfError> {
    let sys = AcSystem::new(netlist)?;
    let ports = sys.ports();
    let &(_, p, n, z) = ports
        .iter()
        .find(|t| t.0 == index)
        .ok_or(RfError::PortCount { expected: index as usize, found: ports.len() })?;
    let x = sys.solve(f, &[(p, n, z)])?.remove(0);
    let v = volt(x.as_slice(), p) - volt(x.as_slice(), n);
    let i = (Complex64::new(1.0, 0.0) - v) / z;
    if i.norm() < 1e-300 {
        return Err(RfError::Degenerate("port current vanishes (open input)".into()));
    }
    Ok(v / i)
}

/// Impedance between `node` and ground with every port terminated, bias
/// computed for the netlist as given.
pub fn node_impedance(netlist: &Netlist, node: &str, f: f64) -> Result<Complex64, RfError> {
    let sys = AcSystem::new(netlist)?;
    let idx = sys
        .node_names()
        .iter()
        .position(|n| n == node)
        .ok_or_else(|| RfError::Unreachable { node: node.to_string() })?;
    Ok(sys.solve_injection(f, idx)?[idx])
}

/// S-parameters at arbitrary frequencies, in the order given.
pub fn s_params_at(netlist: &Netlist, freqs: &[f64]) -> Result<SMatrix, RfError> {
    let sys = AcSystem::new(netlist)?;
    let ports = sys.ports();
    if ports.len() != 2 {
        return Err(RfError::PortCount { expected: 2, found: ports.len() });
    }
    for &f in freqs {
        if !(f.is_finite() && f > 0.0) {
            return Err(RfError::Grid(format!("frequency {f} must be positive")));
        }
    }
    let points = freqs.par_iter().map(|&f| sys.s_point(f)).collect::<Result<Vec<_>, _>>()?;
    Ok(SMatrix { z_ref: [ports[0].3, ports[1].3], points })
}

/// S-parameters over `grid`, referenced to the port impedances.
pub fn s_params(netlist: &Netlist, grid: &FrequencyGrid) -> Result<SMatrix, RfError> {
    s_params_at(netlist, &grid.frequencies())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{Component, DesignConstants, Element};

    fn one_port() -> Netlist {
        let mut n = Netlist::new(DesignConstants::default());
        n.push(Component::new("P1", Element::AcPort { index: 1, impedance: 50.0 }, &["in", "0"]));
        n
    }

    fn two_port() -> Netlist {
        let mut n = one_port();
        n.push(Component::new("P2", Element::AcPort { index: 2, impedance: 50.0 }, &["out", "0"]));
        n
    }

    #[test]
    fn resistor_divider() {
        let mut n = one_port();
        n.push(Component::new("R1", Element::resistor(50.0), &["in", "0"]));
        let v = mna_solve(&n, 2.4e9).unwrap();
        assert!((v["in"] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn inductor_divider() {
        let mut n = one_port();
        n.push(Component::new("L1", Element::inductor(1e-9), &["in", "0"]));
        let v = mna_solve(&n, 2.4e9).unwrap();
        let zl = Complex64::new(0.0, 2.0 * PI * 2.4e9 * 1e-9);
        assert!((zl.norm() - 15.08).abs() < 0.01);
        assert!((v["in"].norm() - zl.norm() / (zl + 50.0).norm()).abs() < 1e-12);
    }

    #[test]
    fn island_names_a_node() {
        let mut n = one_port();
        n.push(Component::new("R1", Element::resistor(50.0), &["in", "0"]));
        n.push(Component::new("R2", Element::resistor(50.0), &["a", "b"]));
        n.push(Component::new("R3", Element::resistor(50.0), &["a", "b"]));
        match mna_solve(&n, 1e9) {
            Err(RfError::Unreachable { node }) => assert!(node == "a" || node == "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn series_resistor_and_through() {
        let mut n = two_port();
        n.push(Component::new("R1", Element::resistor(50.0), &["in", "out"]));
        let s = s_params(&n, &FrequencyGrid::new(1e9, 3e9, 3).unwrap()).unwrap();
        for p in &s.points {
            assert!((p.s11 - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-12);
            assert!((p.s21 - Complex64::new(2.0 / 3.0, 0.0)).norm() < 1e-12);
        }
        let mut t = Netlist::new(DesignConstants::default());
        t.push(Component::new("P1", Element::AcPort { index: 1, impedance: 50.0 }, &["x", "0"]));
        t.push(Component::new("P2", Element::AcPort { index: 2, impedance: 50.0 }, &["x", "0"]));
        let s = s_params(&t, &FrequencyGrid::new(1e9, 3e9, 5).unwrap()).unwrap();
        for p in &s.points {
            assert!(p.s11.norm() < 1e-12);
            assert!((p.s21 - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn one_port_is_rejected_for_s_params() {
        let mut n = one_port();
        n.push(Component::new("R1", Element::resistor(50.0), &["in", "0"]));
        assert!(matches!(
            s_params(&n, &FrequencyGrid::single(1e9).unwrap()),
            Err(RfError::PortCount { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn input_impedance_of_rc() {
        let mut n = one_port();
        n.push(Component::new("R1", Element::resistor(10.0), &["in", "x"]));
        n.push(Component::new("C1", Element::capacitor(1e-12), &["x", "0"]));
        let f = 2.4e9;
        let z = input_impedance(&n, 1, f).unwrap();
        let want = Complex64::new(10.0, -1.0 / (2.0 * PI * f * 1e-12));
        assert!((z - want).norm() < 1e-9 * want.norm());
    }
}
