//! Derivative-free tuning: coordinate descent passes, then Nelder–Mead,
//! both in log space of the component values and clamped to their
//! bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dbm_to_watts, drive_for, invalid, TuneError};
use crate::netlist::Netlist;
use crate::rf;
use crate::transient::{simulate, steady_state_report, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    MaximizeS21AtF0,
    MaximizePaeAtPin,
    WeightedCombo,
}

/// What [`tune`] maximises.
///
/// `weighted_combo` is `weights[0]·|s21(f0)| in dB + weights[1]·PAE in
/// percent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub f0: f64,
    pub pin_dbm: f64,
    pub weights: [f64; 2],
}

impl Objective {
    pub fn s21(f0: f64) -> Self {
        Self { kind: ObjectiveKind::MaximizeS21AtF0, f0, pin_dbm: 0.0, weights: [1.0, 0.0] }
    }

    pub fn pae(f0: f64, pin_dbm: f64) -> Self {
        Self { kind: ObjectiveKind::MaximizePaeAtPin, f0, pin_dbm, weights: [0.0, 1.0] }
    }

    pub fn validate(&self) -> Result<(), TuneError> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(invalid("f0", "frequency must be positive"));
        }
        if !self.pin_dbm.is_finite() {
            return Err(invalid("pin_dbm", "input power must be finite"));
        }
        if self.kind == ObjectiveKind::WeightedCombo
            && !(self.weights.iter().all(|w| *w >= 0.0 && w.is_finite()) && self.weights.iter().sum::<f64>() > 0.0)
        {
            return Err(invalid("weights", "weights must be non-negative with a positive sum"));
        }
        Ok(())
    }

    fn needs_s21(&self) -> bool {
        self.kind == ObjectiveKind::MaximizeS21AtF0 || (self.kind == ObjectiveKind::WeightedCombo && self.weights[0] > 0.0)
    }

    fn needs_pae(&self) -> bool {
        self.kind == ObjectiveKind::MaximizePaeAtPin || (self.kind == ObjectiveKind::WeightedCombo && self.weights[1] > 0.0)
    }

    /// Objective value of `netlist`; failed analyses score `-inf`.
    pub fn evaluate(&self, netlist: &Netlist, sim: &SimConfig) -> f64 {
        let s21 = if self.needs_s21() {
            match rf::s_params_at(netlist, &[self.f0]) {
                Ok(s) => rf::db(s.points[0].s21),
                Err(_) => return f64::NEG_INFINITY,
            }
        } else {
            0.0
        };
        let pae = if self.needs_pae() {
            let cfg = SimConfig { drive: drive_for(self.pin_dbm), ..*sim };
            match simulate(netlist, &cfg) {
                Ok(w) => {
                    let r = steady_state_report(&w, netlist.constants.vcc);
                    match super::pae(dbm_to_watts(self.pin_dbm), r.p_out, r.p_dc) {
                        Ok(v) => v,
                        Err(_) => return f64::NEG_INFINITY,
                    }
                }
                Err(_) => return f64::NEG_INFINITY,
            }
        } else {
            0.0
        };
        let v = match self.kind {
            ObjectiveKind::MaximizeS21AtF0 => s21,
            ObjectiveKind::MaximizePaeAtPin => pae,
            ObjectiveKind::WeightedCombo => self.weights[0] * s21 + self.weights[1] * 100.0 * pae,
        };
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedValue {
    pub id: String,
    pub initial: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub objective: Objective,
    pub initial: f64,
    pub best: f64,
    pub evaluations: usize,
    /// Best objective so far after each evaluation.
    pub trajectory: Vec<f64>,
    pub values: Vec<TunedValue>,
    #[serde(skip)]
    pub netlist: Option<Netlist>,
}

/// Starting step of the coordinate passes, in `ln(value)`.
const INITIAL_STEP: f64 = 0.5;
/// Coordinate descent hands over to the simplex below this step.
const HANDOVER_STEP: f64 = 0.02;
/// Simplex is considered collapsed below this spread in `ln(value)`.
const SIMPLEX_TOL: f64 = 1e-5;

struct Search<'a> {
    base: &'a Netlist,
    ids: &'a [String],
    lo: Vec<f64>,
    hi: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    objective: &'a Objective,
    sim: &'a SimConfig,
    budget: usize,
    used: usize,
    best: f64,
    best_u: Vec<f64>,
    trajectory: Vec<f64>,
}

impl Search<'_> {
    fn clamp(&self, mut u: Vec<f64>) -> Vec<f64> {
        for (i, x) in u.iter_mut().enumerate() {
            *x = x.clamp(self.lo[i], self.hi[i]);
        }
        u
    }

    fn netlist(&self, u: &[f64]) -> Option<Netlist> {
        let mut n = self.base.clone();
        for ((id, x), (min, max)) in self.ids.iter().zip(u).zip(&self.bounds) {
            // exp(ln v) may land an ulp outside the bounds
            n = n.set_component_value(id, x.exp().clamp(*min, *max)).ok()?;
        }
        Some(n)
    }

    fn remaining(&self) -> usize {
        self.budget - self.used
    }

    /// Scores the candidates concurrently and books them in order.
    fn evaluate(&mut self, candidates: Vec<Vec<f64>>) -> Vec<f64> {
        let candidates: Vec<Vec<f64>> = candidates.into_iter().take(self.remaining()).collect();
        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|u| match self.netlist(u) {
                Some(n) => self.objective.evaluate(&n, self.sim),
                None => f64::NEG_INFINITY,
            })
            .collect();
        for (u, &f) in candidates.iter().zip(&scores) {
            self.used += 1;
            if f > self.best {
                self.best = f;
                self.best_u = u.clone();
            }
            self.trajectory.push(self.best);
        }
        scores
    }

    fn coordinate_descent(&mut self) {
        let mut step = INITIAL_STEP;
        let mut u = self.best_u.clone();
        while step >= HANDOVER_STEP && self.remaining() > 0 {
            let mut improved = false;
            for i in 0..u.len() {
                if self.remaining() == 0 {
                    return;
                }
                let mut cands = Vec::new();
                for dir in [1.0, -1.0] {
                    let mut c = u.clone();
                    c[i] += dir * step;
                    let c = self.clamp(c);
                    if c[i] != u[i] {
                        cands.push(c);
                    }
                }
                let before = self.best;
                self.evaluate(cands);
                if self.best > before {
                    u = self.best_u.clone();
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }

    fn simplex(&mut self) {
        let n = self.best_u.len();
        if self.remaining() < n + 1 {
            return;
        }
        let x0 = self.best_u.clone();
        let mut pts = vec![(x0.clone(), self.best)];
        for i in 0..n {
            let mut x = x0.clone();
            x[i] += if x[i] + 0.05 <= self.hi[i] { 0.05 } else { -0.05 };
            let x = self.clamp(x);
            let f = self.evaluate(vec![x.clone()])[0];
            pts.push((x, f));
        }
        // maximisation: keep the best first
        let order = |p: &mut Vec<(Vec<f64>, f64)>| p.sort_by(|a, b| b.1.total_cmp(&a.1));
        while self.remaining() > 0 {
            order(&mut pts);
            let spread = pts
                .iter()
                .map(|(x, _)| x.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread < SIMPLEX_TOL {
                break;
            }
            let worst = pts[n].clone();
            let centroid: Vec<f64> =
                (0..n).map(|j| pts[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = self.clamp(along(1.0));
            let fr = self.evaluate(vec![xr.clone()])[0];
            if fr > pts[0].1 {
                if self.remaining() == 0 {
                    pts[n] = (xr, fr);
                    break;
                }
                let xe = self.clamp(along(2.0));
                let fe = self.evaluate(vec![xe.clone()])[0];
                pts[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
            } else if fr > pts[n - 1].1 {
                pts[n] = (xr, fr);
            } else {
                if self.remaining() == 0 {
                    break;
                }
                let xc = self.clamp(along(if fr > worst.1 { 0.5 } else { -0.5 }));
                let fc = self.evaluate(vec![xc.clone()])[0];
                if fc > worst.1.max(fr) {
                    pts[n] = (xc, fc);
                } else {
                    // shrink towards the best vertex
                    let best = pts[0].0.clone();
                    let shrunk: Vec<Vec<f64>> = pts[1..]
                        .iter()
                        .map(|(x, _)| x.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect())
                        .collect();
                    let k = shrunk.len().min(self.remaining());
                    let scores = self.evaluate(shrunk[..k].to_vec());
                    for (j, f) in scores.into_iter().enumerate() {
                        pts[j + 1] = (shrunk[j].clone(), f);
                    }
                }
            }
        }
    }
}

/// Maximises `objective` over the values of the tunable components
/// `ids` with at most `budget` evaluations, the first of which is the
/// starting point.
///
/// `sim` configures the transient runs of PAE objectives (its drive is
/// replaced by the objective's input power).
pub fn tune(
    netlist: &Netlist,
    objective: &Objective,
    ids: &[String],
    budget: usize,
    sim: &SimConfig,
) -> Result<TuneReport, TuneError> {
    objective.validate()?;
    if budget == 0 {
        return Err(invalid("budget", "at least one evaluation is required"));
    }
    if ids.is_empty() {
        return Err(TuneError::NoTunable);
    }
    let mut u0 = Vec::new();
    let mut originals = Vec::new();
    let mut bounds = Vec::new();
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for id in ids {
        let c = netlist.component(id).ok_or_else(|| crate::netlist::EditError::UnknownId(id.clone()))?;
        let (Some(b), Some(v)) = (c.tunable, c.element.primary_value()) else {
            return Err(TuneError::NotTunable(id.clone()));
        };
        if !(b.min > 0.0 && v > 0.0) {
            return Err(TuneError::NotTunable(id.clone()));
        }
        originals.push(v);
        bounds.push((b.min, b.max));
        lo.push(b.min.ln());
        hi.push(b.max.ln());
        u0.push(v.ln());
    }
    let mut s = Search {
        base: netlist,
        ids,
        lo,
        hi,
        bounds,
        objective,
        sim,
        budget,
        used: 0,
        best: f64::NEG_INFINITY,
        best_u: u0.clone(),
        trajectory: Vec::new(),
    };
    // the starting point is scored on the unmodified netlist
    let initial = objective.evaluate(netlist, sim);
    s.used = 1;
    s.best = initial;
    s.trajectory.push(initial);
    s.coordinate_descent();
    s.simplex();

    let unchanged = s.best_u == u0;
    let tuned = if unchanged { Some(netlist.clone()) } else { s.netlist(&s.best_u) };
    let values = ids
        .iter()
        .enumerate()
        .map(|(i, id)| TunedValue {
            id: id.clone(),
            initial: originals[i],
            value: if unchanged { originals[i] } else { s.best_u[i].exp().clamp(s.bounds[i].0, s.bounds[i].1) },
        })
        .collect();
    Ok(TuneReport {
        objective: *objective,
        initial,
        best: s.best,
        evaluations: s.used,
        trajectory: s.trajectory,
        values,
        netlist: tuned,
    })
}
