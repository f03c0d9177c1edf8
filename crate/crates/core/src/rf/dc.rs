//! DC operating point by Newton iteration on the real MNA system.

use nalgebra::DVector;

use super::elaborate::{elaborate, volt, Circuit, Mna, Prim};
use super::RfError;
use crate::netlist::{BehavioralFet, ChannelEval, Netlist};

/// Conductance from every node to ground so capacitor-isolated nodes stay
/// defined.
pub(crate) const GMIN: f64 = 1e-12;

/// Node voltages at the DC bias point.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub names: Vec<String>,
    pub voltages: Vec<f64>,
}

impl OperatingPoint {
    pub fn voltage(&self, node: &str) -> Option<f64> {
        self.names.iter().position(|n| n == node).map(|i| self.voltages[i])
    }
}

/// Solved DC state: node voltages plus the current of every branch-type
/// primitive (sources, inductors and lines, positive from first to second
/// terminal), zero elsewhere.
pub(crate) struct DcState {
    pub v: Vec<f64>,
    pub prim_current: Vec<f64>,
}

fn branch_slots(circuit: &Circuit) -> (Vec<Option<usize>>, usize) {
    let mut k = 0;
    let slots = circuit
        .prims
        .iter()
        .map(|p| match p {
            Prim::V { .. } | Prim::L { .. } | Prim::Line { .. } => {
                k += 1;
                Some(k - 1)
            }
            _ => None,
        })
        .collect();
    (slots, k)
}

/// Solves the DC state with FET channels given by `channel(model, vgs, vds)`.
pub(crate) fn solve_dc(
    circuit: &Circuit,
    channel: &dyn Fn(&BehavioralFet, f64, f64) -> ChannelEval,
) -> Result<DcState, RfError> {
    let n = circuit.node_count();
    let (slots, nb) = branch_slots(circuit);
    let has_fet = circuit.prims.iter().any(|p| matches!(p, Prim::Fet { .. }));
    let mut x = DVector::<f64>::zeros(n + nb);
    let max_iter = if has_fet { 300 } else { 1 };
    for iter in 0..max_iter {
        let mut sys = Mna::<f64>::new(n, nb);
        for i in 0..n {
            sys.m[(i, i)] += GMIN;
        }
        for (p, slot) in circuit.prims.iter().zip(&slots) {
            match *p {
                Prim::R { a, b, r } => sys.admittance(a, b, 1.0 / r),
                Prim::C { .. } => {}
                Prim::L { a, b, .. } | Prim::Line { a, b, .. } => sys.branch(slot.unwrap(), a, b, 0.0),
                Prim::V { p, n, v } => sys.branch(slot.unwrap(), p, n, v),
                Prim::Port { p, n, z, .. } => sys.admittance(p, n, 1.0 / z),
                Prim::Fet { g, d, s, model } => {
                    let xs = x.as_slice();
                    let vgs = volt(xs, g) - volt(xs, s);
                    let vds = volt(xs, d) - volt(xs, s);
                    let e = channel(&model, vgs, vds);
                    sys.admittance(d, s, e.d_vds);
                    sys.vccs(d, s, g, s, e.d_vgs);
                    let i_eq = e.current - e.d_vgs * vgs - e.d_vds * vds;
                    sys.inject(d, -i_eq);
                    sys.inject(s, i_eq);
                }
            }
        }
        let next = sys
            .m
            .lu()
            .solve(&sys.rhs)
            .ok_or(RfError::Singular { freq: 0.0 })?;
        if !has_fet {
            x = next;
            break;
        }
        let mut step = &next - &x;
        let largest = step.iter().take(n).fold(0.0f64, |m, v| m.max(v.abs()));
        if largest > 1.0 {
            step /= largest;
        }
        x += &step;
        let scale = x.iter().take(n).fold(1.0f64, |m, v| m.max(v.abs()));
        if largest <= 1e-12 * scale {
            break;
        }
        if iter + 1 == max_iter {
            return Err(RfError::DcConvergence(format!("last update {largest:e} V")));
        }
    }
    let v: Vec<f64> = x.iter().take(n).copied().collect();
    let prim_current = slots.iter().map(|s| s.map_or(0.0, |k| x[n + k])).collect();
    Ok(DcState { v, prim_current })
}

pub(crate) fn smooth_channel(model: &BehavioralFet, vgs: f64, vds: f64) -> ChannelEval {
    model.drain_current(vgs, vds)
}

/// DC bias point of a netlist using the smooth large-signal FET model.
pub fn dc_operating_point(netlist: &Netlist) -> Result<OperatingPoint, RfError> {
    let circuit = elaborate(netlist)?;
    let state = solve_dc(&circuit, &smooth_channel)?;
    Ok(OperatingPoint { names: circuit.names, voltages: state.v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{Component, DesignConstants, Element};

    #[test]
    fn divider_and_choke_current() {
        let mut n = Netlist::new(DesignConstants::default());
        n.push(Component::new("V1", Element::DcSource { voltage: 4.0 }, &["vcc", "0"]));
        n.push(Component::new("R1", Element::resistor(300.0), &["vcc", "g"]));
        n.push(Component::new("R2", Element::resistor(100.0), &["g", "0"]));
        n.push(Component::new("L1", Element::inductor(1e-6), &["vcc", "d"]));
        n.push(Component::new("R3", Element::resistor(8.0), &["d", "0"]));
        n.push(Component::new("C1", Element::capacitor(1e-12), &["d", "x"]));
        n.push(Component::new("R4", Element::resistor(8.0), &["x", "0"]));
        let c = elaborate(&n).unwrap();
        let s = solve_dc(&c, &smooth_channel).unwrap();
        let op = OperatingPoint { names: c.names.clone(), voltages: s.v.clone() };
        assert!((op.voltage("g").unwrap() - 1.0).abs() < 1e-9);
        assert!((op.voltage("d").unwrap() - 4.0).abs() < 1e-9);
        assert!(op.voltage("x").unwrap().abs() < 1e-9);
        assert!((s.prim_current[3] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn biased_fet_settles() {
        let mut n = Netlist::new(DesignConstants::default());
        n.push(Component::new("V1", Element::DcSource { voltage: 4.2 }, &["vcc", "0"]));
        n.push(Component::new("RT", Element::resistor(3800.0), &["vcc", "g"]));
        n.push(Component::new("RB", Element::resistor(400.0), &["g", "0"]));
        n.push(Component::new("L1", Element::inductor(1e-8), &["vcc", "d"]));
        n.push(Component::new("Q1", Element::Fet(BehavioralFet::default()), &["g", "d", "0"]));
        let op = dc_operating_point(&n).unwrap();
        assert!((op.voltage("g").unwrap() - 0.4).abs() < 1e-9);
        assert!((op.voltage("d").unwrap() - 4.2).abs() < 1e-9);
    }
}
