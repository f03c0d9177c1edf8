//! Builders for the single-stage and two-stage amplifiers.
//!
//! Component ids follow a fixed scheme so tools can find parts by name:
//! `VCC`, `P1`, `P2` are shared; every per-stage id ends in the stage
//! number. `C_BIN` input DC block, `MIN_SER`/`MIN_SH` input L-section,
//! `RB_TOP`/`RB_BOT` gate divider, `RD` drain feed, `Q` transistor,
//! `L_CHOKE` RF choke, `C_SH` shunt capacitor, `L_SER`/`C_SER` series
//! resonator, `MOUT_SER`/`MOUT_SH` output L-section, `L_HS<s><h>` with
//! `C_HS<s><h>A`/`C_HS<s><h>B` the trap for harmonic `h`, `C_BOUT` output
//! DC block. The two-stage amplifier adds `C_IS` and `TL_IS` between the
//! stages.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use super::{BehavioralFet, Component, DesignConstants, Element, Netlist, GROUND};
use crate::classe::{design_load_network, l_section_match, ClassEDesign, DesignError, HarmonicTrap, LSection, LSectionTopology, Reactive};
use crate::rf::{self, microstrip_synthesize, RfError};

/// Reactance of every DC-blocking capacitor at `f0`, ohms.
pub const DC_BLOCK_REACTANCE: f64 = 2.0;
/// Series gate resistor damping the feedback through `cgd`.
pub const GATE_STABILITY_RESISTANCE: f64 = 10.0;
/// Resistance of the drain feed in series with the choke, ohms.
pub const DRAIN_FEED_RESISTANCE: f64 = 0.05;
/// Sum of the two gate-divider resistors, ohms.
pub const BIAS_DIVIDER_TOTAL: f64 = 4200.0;
/// Quiescent gate voltage above threshold, volts.
pub const GATE_OVERDRIVE: f64 = 0.1;
/// Nominal length of the interstage line, meters.
pub const INTERSTAGE_LINE_LENGTH: f64 = 5.0e-3;
/// Device width of a driver stage relative to the stage it drives.
pub const DRIVER_DEVICE_SCALE: f64 = 0.3;
/// Output power target of a driver stage relative to the stage it drives.
pub const DRIVER_POWER_FRACTION: f64 = 0.1;
/// Tuning range of matching, trap, block and line elements, relative to
/// nominal.
pub const TUNE_RANGE: (f64, f64) = (0.25, 4.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("f0 mismatch: {what} is designed for {found} Hz, constants say {expected} Hz")]
    F0Mismatch { what: String, found: f64, expected: f64 },
    #[error("two traps target harmonic {0} in one stage")]
    DuplicateTrap(u32),
    #[error("shunt capacitance {c_shunt} F does not exceed the FET output capacitance {cds} F")]
    ShuntBelowParasitic { c_shunt: f64, cds: f64 },
    #[error("gate bias {vg} V is not reachable from the {vcc} V supply")]
    Bias { vg: f64, vcc: f64 },
    #[error("matching network: {0}")]
    Match(#[from] DesignError),
    #[error("analysis while building: {0}")]
    Analysis(#[from] RfError),
}

impl TemplateError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            TemplateError::F0Mismatch { .. } => "f0_mismatch",
            TemplateError::DuplicateTrap(_) => "duplicate_trap",
            TemplateError::ShuntBelowParasitic { .. } => "shunt_below_parasitic",
            TemplateError::Bias { .. } => "bias_unreachable",
            TemplateError::Match(_) => "match_infeasible",
            TemplateError::Analysis(_) => "analysis_failed",
        }
    }
}

/// Everything needed to build one amplifier stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTemplate {
    pub design: ClassEDesign,
    pub traps: Vec<HarmonicTrap>,
    pub fet: BehavioralFet,
}

impl StageTemplate {
    pub fn new(design: ClassEDesign, traps: Vec<HarmonicTrap>) -> Self {
        Self { design, traps, fet: BehavioralFet::default() }
    }
}

/// Driver for `output`: a smaller device on a class-E network designed
/// for a fraction of the output stage power, with the same traps.
pub fn driver_stage(output: &StageTemplate) -> Result<StageTemplate, TemplateError> {
    let d = &output.design;
    let design = design_load_network(d.vcc, d.f0, d.p_out_target * DRIVER_POWER_FRACTION, d.q_loaded)?;
    Ok(StageTemplate { design, traps: output.traps.clone(), fet: output.fet.scaled(DRIVER_DEVICE_SCALE) })
}

fn same_freq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs()
}

fn check_stage(constants: &DesignConstants, s: usize, st: &StageTemplate) -> Result<(), TemplateError> {
    if !same_freq(st.design.f0, constants.f0) {
        return Err(TemplateError::F0Mismatch {
            what: format!("stage {s} load network"),
            found: st.design.f0,
            expected: constants.f0,
        });
    }
    let mut seen = Vec::new();
    for t in &st.traps {
        if !same_freq(t.f0, constants.f0) {
            return Err(TemplateError::F0Mismatch {
                what: format!("stage {s} trap for harmonic {}", t.target_harmonic),
                found: t.f0,
                expected: constants.f0,
            });
        }
        if seen.contains(&t.target_harmonic) {
            return Err(TemplateError::DuplicateTrap(t.target_harmonic));
        }
        seen.push(t.target_harmonic);
    }
    if st.design.c_shunt <= st.fet.cds {
        return Err(TemplateError::ShuntBelowParasitic { c_shunt: st.design.c_shunt, cds: st.fet.cds });
    }
    Ok(())
}

/// Gate-divider resistors `(top, bottom)` placing the gate at
/// `vth + GATE_OVERDRIVE`.
pub fn gate_bias(vcc: f64, vth: f64) -> Result<(f64, f64), TemplateError> {
    let vg = vth + GATE_OVERDRIVE;
    if !(vg > 0.0 && vg < vcc) {
        return Err(TemplateError::Bias { vg, vcc });
    }
    let bottom = BIAS_DIVIDER_TOTAL * vg / vcc;
    Ok((BIAS_DIVIDER_TOTAL - bottom, bottom))
}

fn dc_block(f0: f64) -> f64 {
    1.0 / (2.0 * PI * f0 * DC_BLOCK_REACTANCE)
}

fn reactive_element(r: Reactive) -> Element {
    match r {
        Reactive::Inductor(l) => Element::inductor(l),
        Reactive::Capacitor(c) => Element::capacitor(c),
    }
}

fn tunable(id: String, element: Element, nodes: &[&str]) -> Component {
    Component::new(id, element, nodes).tunable(TUNE_RANGE.0, TUNE_RANGE.1)
}

/// Renames node `from` to `into` everywhere.
fn merge_node(components: &mut [Component], from: &str, into: &str) {
    for c in components {
        for n in &mut c.nodes {
            if n == from {
                *n = into.to_string();
            }
        }
    }
}

/// Realises `net` between `src` (source side) and `load`. A missing series
/// element merges the two nodes.
fn push_match(out: &mut Vec<Component>, net: &LSection, prefix: &str, s: usize, src: &str, load: &str) {
    let shunt_node = match net.topology {
        LSectionTopology::ShuntAtLoad => load,
        LSectionTopology::SeriesAtLoad => src,
    };
    if let Some(sh) = net.shunt {
        out.push(tunable(format!("{prefix}_SH{s}"), reactive_element(sh), &[shunt_node, GROUND]));
    }
    match net.series {
        Some(se) => out.push(tunable(format!("{prefix}_SER{s}"), reactive_element(se), &[src, load])),
        None => merge_node(out, load, src),
    }
}

/// Bias network, transistor and class-E load network of stage `s`;
/// returns the load-network output node.
fn push_core(out: &mut Vec<Component>, constants: &DesignConstants, s: usize, st: &StageTemplate) -> Result<String, TemplateError> {
    let (g, d, f, r, o) = (format!("g{s}"), format!("d{s}"), format!("f{s}"), format!("r{s}"), format!("o{s}"));
    let (top, bottom) = gate_bias(constants.vcc, st.fet.vth)?;
    let ds = &st.design;
    out.push(Component::new(format!("RB_TOP{s}"), Element::resistor(top), &["vcc", &g]));
    out.push(Component::new(format!("RB_BOT{s}"), Element::resistor(bottom), &[&g, GROUND]));
    out.push(Component::new(format!("RD{s}"), Element::resistor(DRAIN_FEED_RESISTANCE), &["vcc", &f]));
    out.push(Component::new(format!("L_CHOKE{s}"), Element::inductor(ds.l_choke), &[&f, &d]));
    let gi = format!("gi{s}");
    out.push(Component::new(format!("R_STAB{s}"), Element::resistor(GATE_STABILITY_RESISTANCE), &[&g, &gi]));
    out.push(Component::new(format!("Q{s}"), Element::Fet(st.fet), &[&gi, &d, GROUND]));
    out.push(Component::new(format!("C_SH{s}"), Element::capacitor(ds.c_shunt - st.fet.cds), &[&d, GROUND]));
    out.push(Component::new(format!("L_SER{s}"), Element::inductor(ds.l_series), &[&d, &r]));
    out.push(Component::new(format!("C_SER{s}"), Element::capacitor(ds.c_series), &[&r, &o]));
    Ok(o)
}

/// Traps of stage `s` in series from `from`; returns the far node.
fn push_traps(out: &mut Vec<Component>, s: usize, traps: &[HarmonicTrap], from: &str) -> String {
    let mut x = from.to_string();
    for t in traps {
        let h = t.target_harmonic;
        let (m, y) = (format!("m{s}_{h}"), format!("h{s}_{h}"));
        out.push(tunable(format!("L_HS{s}{h}"), Element::inductor(t.l_s), &[&x, &m]));
        out.push(tunable(format!("C_HS{s}{h}A"), Element::capacitor(t.c1), &[&m, &y]));
        out.push(tunable(format!("C_HS{s}{h}B"), Element::capacitor(t.c2), &[&x, &y]));
        x = y;
    }
    x
}

/// Output L-section of stage `s` presenting `r_load` at `o{s}` when the
/// far side of the traps sees `beyond`.
fn output_match(
    constants: &DesignConstants,
    st: &StageTemplate,
    beyond: Complex64,
) -> Result<LSection, TemplateError> {
    let z_after: Complex64 = st.traps.iter().map(|t| t.impedance(constants.f0)).sum::<Complex64>() + beyond;
    Ok(l_section_match(z_after, Complex64::new(st.design.r_load, 0.0), constants.f0)?)
}

/// Impedance looking into `node` of the partial circuit `parts`.
fn node_impedance(constants: &DesignConstants, parts: &[Component], node: &str) -> Result<Complex64, TemplateError> {
    let n = assemble(*constants, parts.to_vec());
    Ok(rf::node_impedance(&n, node, constants.f0)?)
}

fn block_impedance(f0: f64) -> Complex64 {
    Complex64::new(0.0, -1.0 / (2.0 * PI * f0 * dc_block(f0)))
}

/// Single-stage amplifier with the default behavioural FET.
pub fn single_stage_template(
    constants: DesignConstants,
    design: &ClassEDesign,
    traps: &[HarmonicTrap],
) -> Result<Netlist, TemplateError> {
    single_stage_template_with_fet(constants, &StageTemplate::new(*design, traps.to_vec()))
}

pub fn single_stage_template_with_fet(
    constants: DesignConstants,
    stage: &StageTemplate,
) -> Result<Netlist, TemplateError> {
    check_stage(&constants, 1, stage)?;
    let z0 = Complex64::new(constants.z0, 0.0);
    let block = block_impedance(constants.f0);

    let mut tail = Vec::new();
    let o = push_core(&mut tail, &constants, 1, stage)?;
    let mout = output_match(&constants, stage, block + z0)?;
    push_match(&mut tail, &mout, "MOUT", 1, &o, "t1");
    let t = if mout.series.is_some() { "t1".to_string() } else { o.clone() };
    let last = push_traps(&mut tail, 1, &stage.traps, &t);
    tail.push(tunable("C_BOUT1".into(), Element::capacitor(dc_block(constants.f0)), &[&last, "out"]));
    tail.push(Component::new("P2", Element::AcPort { index: 2, impedance: constants.z0 }, &["out", GROUND]));

    let mut with_supply = vec![vcc_source(&constants)];
    with_supply.extend(tail.iter().cloned());
    let z_gate = node_impedance(&constants, &with_supply, "g1")?;
    let min = l_section_match(z_gate, (z0 - block).conj(), constants.f0)?;

    let mut head = vec![
        vcc_source(&constants),
        Component::new("P1", Element::AcPort { index: 1, impedance: constants.z0 }, &["in", GROUND]),
        tunable("C_BIN1".into(), Element::capacitor(dc_block(constants.f0)), &["in", "a1"]),
    ];
    head.extend(tail);
    push_match(&mut head, &min, "MIN", 1, "a1", "g1");
    Ok(assemble(constants, head))
}

fn vcc_source(constants: &DesignConstants) -> Component {
    Component::new("VCC", Element::DcSource { voltage: constants.vcc }, &["vcc", GROUND])
}

fn assemble(constants: DesignConstants, components: Vec<Component>) -> Netlist {
    let mut n = Netlist::new(constants);
    for c in components {
        n.push(c);
    }
    n
}

/// Two identical-topology stages in cascade with the default FET.
pub fn two_stage_template(
    constants: DesignConstants,
    design1: &ClassEDesign,
    design2: &ClassEDesign,
    traps1: &[HarmonicTrap],
    traps2: &[HarmonicTrap],
) -> Result<Netlist, TemplateError> {
    two_stage_template_with_fets(
        constants,
        &StageTemplate::new(*design1, traps1.to_vec()),
        &StageTemplate::new(*design2, traps2.to_vec()),
    )
}

pub fn two_stage_template_with_fets(
    constants: DesignConstants,
    stage1: &StageTemplate,
    stage2: &StageTemplate,
) -> Result<Netlist, TemplateError> {
    check_stage(&constants, 1, stage1)?;
    check_stage(&constants, 2, stage2)?;
    let f0 = constants.f0;
    let z0 = Complex64::new(constants.z0, 0.0);
    let block = block_impedance(f0);

    // output stage
    let mut stage2_tail = Vec::new();
    let o2 = push_core(&mut stage2_tail, &constants, 2, stage2)?;
    let mout2 = output_match(&constants, stage2, block + z0)?;
    push_match(&mut stage2_tail, &mout2, "MOUT", 2, &o2, "t2");
    let t2 = if mout2.series.is_some() { "t2".to_string() } else { o2.clone() };
    let last2 = push_traps(&mut stage2_tail, 2, &stage2.traps, &t2);
    stage2_tail.push(tunable("C_BOUT2".into(), Element::capacitor(dc_block(f0)), &[&last2, "out"]));
    stage2_tail.push(Component::new("P2", Element::AcPort { index: 2, impedance: constants.z0 }, &["out", GROUND]));

    let mut probe = vec![vcc_source(&constants)];
    probe.extend(stage2_tail.iter().cloned());
    let z_gate2 = node_impedance(&constants, &probe, "g2")?;
    let min2 = l_section_match(z_gate2, z0, f0)?;
    let mut stage2_all = Vec::new();
    stage2_all.extend(stage2_tail);
    push_match(&mut stage2_all, &min2, "MIN", 2, "is_b", "g2");

    // interstage: block and 50 ohm line
    let width = microstrip_synthesize(constants.z0, constants.substrate_eps_r, constants.substrate_h)?;
    let mut inter = Vec::new();
    let mut stage1_tail = Vec::new();
    let o1 = push_core(&mut stage1_tail, &constants, 1, stage1)?;
    let mout1 = output_match(&constants, stage1, block + z0)?;
    push_match(&mut stage1_tail, &mout1, "MOUT", 1, &o1, "t1");
    let t1 = if mout1.series.is_some() { "t1".to_string() } else { o1.clone() };
    let last1 = push_traps(&mut stage1_tail, 1, &stage1.traps, &t1);
    inter.push(tunable("C_IS".into(), Element::capacitor(dc_block(f0)), &[&last1, "is_a"]));
    inter.push(tunable(
        "TL_IS".into(),
        Element::MicrostripLine { width, length: INTERSTAGE_LINE_LENGTH },
        &["is_a", "is_b"],
    ));

    let mut downstream = stage1_tail.clone();
    downstream.extend(inter.iter().cloned());
    downstream.extend(stage2_all.iter().cloned());
    // if MIN2 had no series element is_b was merged into g2
    let mut probe = vec![vcc_source(&constants)];
    probe.extend(downstream.iter().cloned());
    let z_gate1 = node_impedance(&constants, &probe, "g1")?;
    let min1 = l_section_match(z_gate1, (z0 - block).conj(), f0)?;

    let mut all = vec![
        vcc_source(&constants),
        Component::new("P1", Element::AcPort { index: 1, impedance: constants.z0 }, &["in", GROUND]),
        tunable("C_BIN1".into(), Element::capacitor(dc_block(f0)), &["in", "a1"]),
    ];
    all.extend(stage1_tail);
    push_match(&mut all, &min1, "MIN", 1, "a1", "g1");
    all.extend(inter);
    if min2.series.is_none() {
        merge_node(&mut all, "is_b", "g2");
    }
    all.extend(stage2_all);
    Ok(assemble(constants, all))
}

/// Idealised class-E core for switching verification: supply, choke,
/// ideal switch, shunt capacitor and series resonator, with port 2 as the
/// `r_load` termination and port 1 on the switch control node.
pub fn classe_core_netlist(constants: DesignConstants, design: &ClassEDesign) -> Netlist {
    let mut n = Netlist::new(constants);
    n.push(vcc_source(&constants));
    n.push(Component::new("P1", Element::AcPort { index: 1, impedance: constants.z0 }, &["g1", GROUND]));
    n.push(Component::new("L_CHOKE1", Element::inductor(design.l_choke), &["vcc", "d1"]));
    n.push(Component::new("Q1", Element::Fet(BehavioralFet::ideal_switch()), &["g1", "d1", GROUND]));
    n.push(Component::new("C_SH1", Element::capacitor(design.c_shunt), &["d1", GROUND]));
    n.push(Component::new("L_SER1", Element::inductor(design.l_series), &["d1", "r1"]));
    n.push(Component::new("C_SER1", Element::capacitor(design.c_series), &["r1", "o1"]));
    n.push(Component::new("P2", Element::AcPort { index: 2, impedance: design.r_load }, &["o1", GROUND]));
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classe::{default_traps, design_load_network};
    use crate::netlist::validate;

    fn nominal() -> (DesignConstants, ClassEDesign, Vec<HarmonicTrap>) {
        let c = DesignConstants::default();
        let d = design_load_network(c.vcc, c.f0, 1.0, 7.0).unwrap();
        (c, d, default_traps(c.f0).unwrap())
    }

    #[test]
    fn single_stage_is_valid_and_has_two_traps() {
        let (c, d, t) = nominal();
        let n = single_stage_template(c, &d, &t).unwrap();
        assert!(validate(&n).is_ok(), "{}", validate(&n));
        assert_eq!(n.ports, vec!["P1".to_string(), "P2".to_string()]);
        let traps: Vec<_> = n.components.iter().filter(|c| c.id.starts_with("L_HS")).collect();
        assert_eq!(traps.len(), 2);
        let bare = single_stage_template(c, &d, &[]).unwrap();
        assert!(validate(&bare).is_ok());
        assert!(!bare.components.iter().any(|c| c.id.contains("_HS")));
        assert_eq!(single_stage_template(c, &d, &t).unwrap(), n);
    }

    #[test]
    fn two_stage_contract() {
        let (c, d, t) = nominal();
        let n = two_stage_template(c, &d, &d, &t, &t).unwrap();
        assert!(validate(&n).is_ok(), "{}", validate(&n));
        assert_eq!(n.fets().count(), 2);
        let sources = n.components.iter().filter(|c| matches!(c.element, Element::DcSource { .. })).count();
        assert_eq!(sources, 1);
        assert_eq!(n.ports.len(), 2);
        assert_eq!(n.components.iter().filter(|c| c.id == "C_IS").count(), 1);
        for id in ["RB_TOP1", "RB_BOT1", "RD1", "RB_TOP2", "RB_BOT2", "RD2"] {
            assert!(n.component(id).is_some(), "{id}");
        }
    }

    #[test]
    fn mismatched_trap_frequency_rejected() {
        let (c, d, _) = nominal();
        let wrong = default_traps(2.0e9).unwrap();
        let err = single_stage_template(c, &d, &wrong).unwrap_err();
        assert_eq!(err.code(), "f0_mismatch");
    }

    #[test]
    fn bias_divider_sets_gate() {
        let (top, bottom) = gate_bias(4.2, 0.3).unwrap();
        assert!((4.2 * bottom / (top + bottom) - 0.4).abs() < 1e-12);
        assert!(gate_bias(4.2, 5.0).is_err());
    }
}
