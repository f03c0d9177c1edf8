//! Design figures read back from a netlist built by the templates.

use std::fmt::Write;

use classe_core::classe::trap_window;
use classe_core::netlist::{Element, Netlist};
use classe_core::rf::{db, s_params_at};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapSummary {
    pub harmonic: u32,
    pub l_s: f64,
    pub c1: f64,
    pub c2: f64,
    pub r1: f64,
    pub r2: f64,
    /// `r1 < f0 < r2`.
    pub window_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub index: usize,
    pub gm: f64,
    /// Total drain shunt capacitance including the device's own.
    pub c_shunt: f64,
    pub l_series: f64,
    pub c_series: f64,
    pub l_choke: f64,
    pub traps: Vec<TrapSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSummary {
    pub netlist_hash: String,
    pub f0: f64,
    pub vcc: f64,
    pub z0: f64,
    pub components: usize,
    pub s21_db: Option<f64>,
    pub s11_db: Option<f64>,
    pub stages: Vec<StageSummary>,
}

pub fn hash_hex(n: &Netlist) -> String {
    format!("{:016x}", n.content_hash())
}

fn value(n: &Netlist, id: &str) -> Option<f64> {
    n.component(id)?.element.primary_value()
}

fn stage(n: &Netlist, s: usize) -> Option<StageSummary> {
    let Element::Fet(fet) = &n.component(&format!("Q{s}"))?.element else {
        return None;
    };
    let f0 = n.constants.f0;
    let mut traps = Vec::new();
    for h in 2..10u32 {
        let (Some(l_s), Some(c1), Some(c2)) =
            (value(n, &format!("L_HS{s}{h}")), value(n, &format!("C_HS{s}{h}A")), value(n, &format!("C_HS{s}{h}B")))
        else {
            continue;
        };
        if let Ok((r1, r2)) = trap_window(c1, c2, l_s) {
            traps.push(TrapSummary { harmonic: h, l_s, c1, c2, r1, r2, window_holds: r1 < f0 && f0 < r2 });
        }
    }
    Some(StageSummary {
        index: s,
        gm: fet.gm,
        c_shunt: value(n, &format!("C_SH{s}")).unwrap_or(0.0) + fet.cds,
        l_series: value(n, &format!("L_SER{s}")).unwrap_or(f64::NAN),
        c_series: value(n, &format!("C_SER{s}")).unwrap_or(f64::NAN),
        l_choke: value(n, &format!("L_CHOKE{s}")).unwrap_or(f64::NAN),
        traps,
    })
}

pub fn summarize(n: &Netlist) -> DesignSummary {
    let c = n.constants;
    let p = s_params_at(n, &[c.f0]).ok().map(|s| s.points[0]);
    DesignSummary {
        netlist_hash: hash_hex(n),
        f0: c.f0,
        vcc: c.vcc,
        z0: c.z0,
        components: n.components.len(),
        s21_db: p.map(|p| db(p.s21)),
        s11_db: p.map(|p| db(p.s11)),
        stages: (1..).map_while(|s| stage(n, s)).collect(),
    }
}

impl DesignSummary {
    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "f0        {:.4} GHz", self.f0 / 1e9);
        let _ = writeln!(o, "vcc       {:.3} V", self.vcc);
        if let (Some(s21), Some(s11)) = (self.s21_db, self.s11_db) {
            let _ = writeln!(o, "s21(f0)   {s21:.3} dB");
            let _ = writeln!(o, "s11(f0)   {s11:.3} dB");
        }
        for s in &self.stages {
            let _ = writeln!(o, "stage {}", s.index);
            let _ = writeln!(o, "  gm        {:.5} S", s.gm);
            let _ = writeln!(o, "  c_shunt   {:.4} pF", s.c_shunt * 1e12);
            let _ = writeln!(o, "  l_series  {:.4} nH", s.l_series * 1e9);
            let _ = writeln!(o, "  c_series  {:.4} pF", s.c_series * 1e12);
            let _ = writeln!(o, "  l_choke   {:.3} nH", s.l_choke * 1e9);
            for t in &s.traps {
                let _ = writeln!(
                    o,
                    "  trap H{}   R1 {:.4} GHz  R2 {:.4} GHz  {}",
                    t.harmonic,
                    t.r1 / 1e9,
                    t.r2 / 1e9,
                    if t.window_holds { "R1 < f0 < R2" } else { "f0 outside window" }
                );
            }
        }
        o
    }
}
