//! Gain and PAE sweeps, FET calibration, stage comparison and the
//! derivative-free tuning loop.

mod optimize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::csv_row;
use crate::netlist::{single_stage_template_with_fet, DesignConstants, EditError, Netlist, StageTemplate, TemplateError};
use crate::rf::{self, FrequencyGrid, RfError};
use crate::transient::{simulate_amplitudes, steady_state_report, Drive, DriveShape, SimConfig, SimError};

pub use optimize::{tune, Objective, ObjectiveKind, TuneReport};

/// Reference impedance the drive power is defined against, ohms.
pub const DRIVE_IMPEDANCE: f64 = 50.0;
/// Allowed input power range of a sweep, dBm.
pub const PIN_RANGE_DBM: (f64, f64) = (-30.0, 30.0);
/// Allowed calibration targets, dB.
pub const CALIBRATION_RANGE_DB: (f64, f64) = (5.0, 25.0);
/// Transconductance range searched by [`calibrate_fet`], siemens.
pub const GM_BOUNDS: (f64, f64) = (1.0e-3, 20.0);
/// Intervals of the log-spaced scan that brackets the calibration root.
const CALIBRATION_SCAN: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuneError {
    #[error("invalid argument `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("target {target} dB is unreachable: gain spans {low:.3}..{high:.3} dB over the gm bounds")]
    Unreachable { target: f64, low: f64, high: f64 },
    #[error("sweep grids differ")]
    GridMismatch,
    #[error("no tunable component ids given")]
    NoTunable,
    #[error("component `{0}` is not tunable")]
    NotTunable(String),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Analysis(#[from] RfError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

fn invalid(field: &'static str, message: impl Into<String>) -> TuneError {
    TuneError::Invalid { field, message: message.into() }
}

/// Power-added efficiency `(p_out − p_in)/p_dc`.
pub fn pae(p_in: f64, p_out: f64, p_dc: f64) -> Result<f64, TuneError> {
    if !(p_dc > 0.0) {
        return Err(invalid("p_dc", "supply power must be positive"));
    }
    if !(p_in >= 0.0 && p_out >= 0.0) {
        return Err(invalid("p_in", "powers must be non-negative"));
    }
    Ok((p_out - p_in) / p_dc)
}

/// `10·log10(p_out/p_in)`.
pub fn gain_db(p_in: f64, p_out: f64) -> Result<f64, TuneError> {
    if !(p_in > 0.0 && p_out > 0.0) {
        return Err(invalid("p_in", "gain needs positive powers"));
    }
    Ok(10.0 * (p_out / p_in).log10())
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Sine drive for `p_in_dbm` available from the 50 Ω source.
pub fn drive_for(p_in_dbm: f64) -> Drive {
    let p = dbm_to_watts(p_in_dbm);
    Drive { amplitude: (2.0 * p * DRIVE_IMPEDANCE).sqrt(), bias: 0.0, shape: DriveShape::Sine }
}

/// −10 … 20 dBm in 1 dB steps.
pub fn default_pin_grid() -> Vec<f64> {
    (-10..=20).map(f64::from).collect()
}

/// Largest input-power grid accepted by [`pin_grid`].
pub const MAX_GRID_POINTS: usize = 10_000;

/// `from`, `from + step`, … up to `to` inclusive.
pub fn pin_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, TuneError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step", "step must be positive"));
    }
    if !(from.is_finite() && to.is_finite() && from <= to) {
        return Err(invalid("from", "need from <= to"));
    }
    let n = ((to - from) / step + 1e-9).floor();
    if n >= MAX_GRID_POINTS as f64 {
        return Err(invalid("step", format!("grid would exceed {MAX_GRID_POINTS} points")));
    }
    let n = n as usize;
    Ok((0..=n).map(|i| from + step * i as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    InputPowerDbm,
    FrequencyHz,
}

/// One sweep, column-wise. Entries are `None` where a point failed or
/// the quantity does not apply to the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub x: Vec<f64>,
    /// Transducer gain for power sweeps, |s21| for frequency sweeps.
    pub gain_db: Vec<Option<f64>>,
    pub p_out_dbm: Vec<Option<f64>>,
    pub pae: Vec<Option<f64>>,
    pub p_dc: Vec<Option<f64>>,
    pub s11_db: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
}

impl SweepResult {
    fn empty(axis: SweepAxis, x: &[f64]) -> Self {
        let n = x.len();
        Self {
            axis,
            x: x.to_vec(),
            gain_db: vec![None; n],
            p_out_dbm: vec![None; n],
            pae: vec![None; n],
            p_dc: vec![None; n],
            s11_db: vec![None; n],
            errors: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Index and value of the largest PAE.
    pub fn peak_pae(&self) -> Option<(usize, f64)> {
        peak(&self.pae)
    }

    /// Index and value of the largest gain.
    pub fn peak_gain(&self) -> Option<(usize, f64)> {
        peak(&self.gain_db)
    }

    pub fn failures(&self) -> usize {
        self.errors.iter().filter(|e| e.is_some()).count()
    }
}

fn peak(v: &[Option<f64>]) -> Option<(usize, f64)> {
    v.iter()
        .enumerate()
        .filter_map(|(i, x)| x.map(|x| (i, x)))
        .fold(None, |best: Option<(usize, f64)>, (i, x)| match best {
            Some((_, b)) if b >= x => best,
            _ => Some((i, x)),
        })
}

/// Large-signal gain, output power and PAE at each input power.
///
/// Points run in the given order, each starting from the previous
/// steady state. `config.drive` is replaced by the sine drive of each
/// point. A point that fails is recorded and the sweep carries on.
pub fn sweep_pin(netlist: &Netlist, pins_dbm: &[f64], config: &SimConfig) -> Result<SweepResult, TuneError> {
    if pins_dbm.is_empty() {
        return Err(invalid("range", "empty input power grid"));
    }
    if let Some(p) = pins_dbm.iter().find(|p| !(**p >= PIN_RANGE_DBM.0 && **p <= PIN_RANGE_DBM.1)) {
        return Err(invalid("range", format!("{p} dBm is outside [{}, {}] dBm", PIN_RANGE_DBM.0, PIN_RANGE_DBM.1)));
    }
    let mut cfg = *config;
    cfg.drive = drive_for(pins_dbm[0]);
    let amplitudes: Vec<f64> = pins_dbm.iter().map(|&p| drive_for(p).amplitude).collect();
    let runs = simulate_amplitudes(netlist, &cfg, &amplitudes)?;
    let vcc = netlist.constants.vcc;
    let mut out = SweepResult::empty(SweepAxis::InputPowerDbm, pins_dbm);
    for (i, run) in runs.into_iter().enumerate() {
        let w = match run {
            Ok(w) => w,
            Err(e) => {
                out.errors[i] = Some(e.to_string());
                continue;
            }
        };
        let r = steady_state_report(&w, vcc);
        let p_in = dbm_to_watts(pins_dbm[i]);
        out.p_dc[i] = Some(r.p_dc);
        if r.p_out > 0.0 {
            out.gain_db[i] = gain_db(p_in, r.p_out).ok();
            out.p_out_dbm[i] = Some(watts_to_dbm(r.p_out));
        }
        match pae(p_in, r.p_out, r.p_dc) {
            Ok(v) => out.pae[i] = Some(v),
            Err(e) => out.errors[i] = Some(e.to_string()),
        }
    }
    Ok(out)
}

/// Small-signal |s21| and |s11| over `grid`.
pub fn sweep_freq(netlist: &Netlist, grid: &FrequencyGrid) -> Result<SweepResult, TuneError> {
    let s = rf::s_params(netlist, grid)?;
    let x = s.frequencies();
    let mut out = SweepResult::empty(SweepAxis::FrequencyHz, &x);
    for (i, p) in s.points.iter().enumerate() {
        out.gain_db[i] = Some(rf::db(p.s21));
        out.s11_db[i] = Some(rf::db(p.s11));
    }
    Ok(out)
}

pub const PIN_SWEEP_CSV_HEADER: &str = "pin_dbm,gain_db,pout_dbm,pae";
pub const FREQ_SWEEP_CSV_HEADER: &str = "freq_hz,s21_db,s11_db";

/// CSV in the layout of the sweep axis. Missing values print as `nan`.
pub fn sweep_csv(s: &SweepResult) -> String {
    let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
    let mut out = String::new();
    match s.axis {
        SweepAxis::InputPowerDbm => {
            out.push_str(PIN_SWEEP_CSV_HEADER);
            out.push('\n');
            for i in 0..s.len() {
                out.push_str(&csv_row(&[s.x[i], v(s.gain_db[i]), v(s.p_out_dbm[i]), v(s.pae[i])]));
            }
        }
        SweepAxis::FrequencyHz => {
            out.push_str(FREQ_SWEEP_CSV_HEADER);
            out.push('\n');
            for i in 0..s.len() {
                out.push_str(&csv_row(&[s.x[i], v(s.gain_db[i]), v(s.s11_db[i])]));
            }
        }
    }
    out
}

/// Stage FET with transconductance `gm`; `rds` scales inversely so the
/// intrinsic gain `gm·rds` is kept.
fn scaled_fet(stage: &StageTemplate, gm: f64) -> StageTemplate {
    let mut st = stage.clone();
    let k = gm / stage.fet.gm;
    st.fet.gm = gm;
    st.fet.rds = stage.fet.rds / k;
    st
}

fn stage_gain(constants: DesignConstants, stage: &StageTemplate, f0: f64) -> Result<f64, TuneError> {
    let n = single_stage_template_with_fet(constants, stage)?;
    let s = rf::s_params_at(&n, &[f0])?;
    Ok(rf::db(s.points[0].s21))
}

/// Scales the stage FET until the single-stage amplifier built from
/// `stage` has small-signal |s21(f0)| equal to `target_db`.
///
/// Bisection on `ln gm` inside the first interval of [`GM_BOUNDS`] where
/// the gain crosses the target; the returned model meets the target
/// within 1e-4 dB.
pub fn calibrate_fet(
    target_db: f64,
    f0: f64,
    constants: DesignConstants,
    stage: &StageTemplate,
) -> Result<crate::netlist::BehavioralFet, TuneError> {
    if !(target_db >= CALIBRATION_RANGE_DB.0 && target_db <= CALIBRATION_RANGE_DB.1) {
        return Err(invalid(
            "target_gain_db",
            format!("{target_db} dB is outside [{}, {}] dB", CALIBRATION_RANGE_DB.0, CALIBRATION_RANGE_DB.1),
        ));
    }
    if !(f0 > 0.0 && f0.is_finite()) {
        return Err(invalid("f0", "frequency must be positive"));
    }
    let gain = |ln_gm: f64| stage_gain(constants, &scaled_fet(stage, ln_gm.exp()), f0);
    // gain is not monotone in gm over the whole range, so take the first
    // crossing on a log grid
    let (a, b) = (GM_BOUNDS.0.ln(), GM_BOUNDS.1.ln());
    let xs: Vec<f64> = (0..=CALIBRATION_SCAN).map(|i| a + (b - a) * i as f64 / CALIBRATION_SCAN as f64).collect();
    // points where the template cannot be built (no passive input match)
    // are skipped
    let gs: Vec<Option<f64>> = xs.iter().map(|&x| gain(x).ok()).collect();
    let crossing = (0..CALIBRATION_SCAN).find(|&i| match (gs[i], gs[i + 1]) {
        (Some(a), Some(b)) => (a - target_db) * (b - target_db) <= 0.0,
        _ => false,
    });
    let Some(i) = crossing else {
        let ok: Vec<f64> = gs.iter().flatten().copied().collect();
        if ok.is_empty() {
            // surface the build error of the nominal model
            gain(stage.fet.gm.ln())?;
        }
        let low = ok.iter().copied().fold(f64::INFINITY, f64::min);
        let high = ok.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(TuneError::Unreachable { target: target_db, low, high });
    };
    let (ga, gb) = (gs[i].unwrap_or_default(), gs[i + 1].unwrap_or_default());
    let (mut lo, mut hi) = (xs[i], xs[i + 1]);
    let rising = gb > ga;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..100 {
        mid = 0.5 * (lo + hi);
        let g = gain(mid)?;
        if (g - target_db).abs() < 1e-4 {
            break;
        }
        if (g < target_db) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(scaled_fet(stage, mid.exp()).fet)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub peak_gain_db: Option<f64>,
    pub peak_pae: Option<f64>,
    /// Axis value of the PAE peak.
    pub peak_pae_at: Option<f64>,
    /// Spread (max − min) of the gain over the lower half of the sweep, dB.
    pub flatness_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageComparison {
    pub x: Vec<f64>,
    /// Two-stage minus single-stage, per point.
    pub gain_delta_db: Vec<Option<f64>>,
    pub pae_delta: Vec<Option<f64>>,
    pub single: SweepSummary,
    pub double: SweepSummary,
}

fn summarize(s: &SweepResult) -> SweepSummary {
    let lower: Vec<f64> = s.gain_db[..s.len().div_ceil(2)].iter().flatten().copied().collect();
    let flatness_db = (!lower.is_empty()).then(|| {
        let max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = lower.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    });
    SweepSummary {
        peak_gain_db: s.peak_gain().map(|p| p.1),
        peak_pae: s.peak_pae().map(|p| p.1),
        peak_pae_at: s.peak_pae().map(|p| s.x[p.0]),
        flatness_db,
    }
}

/// Per-point deltas and summary figures of two sweeps on the same grid.
pub fn compare_stages(single: &SweepResult, double: &SweepResult) -> Result<StageComparison, TuneError> {
    if single.axis != double.axis || single.x != double.x {
        return Err(TuneError::GridMismatch);
    }
    let delta = |a: &[Option<f64>], b: &[Option<f64>]| -> Vec<Option<f64>> {
        a.iter().zip(b).map(|(a, b)| Some((*b)? - (*a)?)).collect()
    };
    Ok(StageComparison {
        x: single.x.clone(),
        gain_delta_db: delta(&single.gain_db, &double.gain_db),
        pae_delta: delta(&single.pae, &double.pae),
        single: summarize(single),
        double: summarize(double),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pae_cases() {
        assert_eq!(pae(0.0, 0.5, 1.0).unwrap(), 0.5);
        assert_eq!(pae(0.3, 0.3, 1.0).unwrap(), 0.0);
        assert!(pae(0.1, 0.5, 0.0).is_err());
        assert!(pae(0.1, 0.5, -1.0).is_err());
        let p_in = dbm_to_watts(15.0);
        let p_out = p_in * 10f64.powf(1.67);
        assert!((p_out - 1.479).abs() < 2e-3, "{p_out}");
        let p_dc = (p_out - p_in) / 0.495;
        assert!((p_dc - 2.925).abs() < 5e-3, "{p_dc}");
        assert!((p_dc / 4.2 - 0.696).abs() < 1e-3);
    }

    #[test]
    fn gain_cases() {
        assert_eq!(gain_db(1.0, 1.0).unwrap(), 0.0);
        assert!((gain_db(1e-3, 0.1).unwrap() - 20.0).abs() < 1e-12);
        assert!(gain_db(0.0, 1.0).is_err());
        assert!(gain_db(1.0, -1.0).is_err());
    }

    #[test]
    fn grids() {
        let g = default_pin_grid();
        assert_eq!(g.len(), 31);
        assert_eq!((g[0], g[30]), (-10.0, 20.0));
        assert_eq!(pin_grid(-10.0, 20.0, 1.0).unwrap(), g);
        assert_eq!(pin_grid(0.0, 1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(pin_grid(0.0, 1.0, 0.0).is_err());
        assert!(pin_grid(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn drive_amplitude_into_fifty_ohms() {
        let d = drive_for(10.0);
        assert!((d.amplitude - (2.0f64 * 0.01 * 50.0).sqrt()).abs() < 1e-12);
        assert_eq!(d.shape, DriveShape::Sine);
    }

    #[test]
    fn identical_sweeps_compare_to_zero() {
        let mut s = SweepResult::empty(SweepAxis::InputPowerDbm, &[0.0, 1.0, 2.0, 3.0]);
        s.gain_db = vec![Some(10.0), Some(9.5), Some(9.0), None];
        s.pae = vec![Some(0.1), Some(0.2), Some(0.15), None];
        let c = compare_stages(&s, &s).unwrap();
        assert_eq!(c.gain_delta_db, vec![Some(0.0), Some(0.0), Some(0.0), None]);
        assert_eq!(c.pae_delta, vec![Some(0.0), Some(0.0), Some(0.0), None]);
        assert_eq!(c.single.peak_pae, Some(0.2));
        assert_eq!(c.single.peak_pae_at, Some(1.0));
        assert_eq!(c.single.flatness_db, Some(0.5));
        let other = SweepResult::empty(SweepAxis::InputPowerDbm, &[0.0, 1.0]);
        assert_eq!(compare_stages(&s, &other), Err(TuneError::GridMismatch));
    }

    #[test]
    fn csv_layouts() {
        let mut s = SweepResult::empty(SweepAxis::InputPowerDbm, &[-10.0, 0.0]);
        s.gain_db = vec![Some(17.5), None];
        s.p_out_dbm = vec![Some(7.5), None];
        s.pae = vec![Some(0.05), None];
        assert_eq!(
            sweep_csv(&s),
            "pin_dbm,gain_db,pout_dbm,pae\n\
             -1.00000000e+01,1.75000000e+01,7.50000000e+00,5.00000000e-02\n\
             0.00000000e+00,nan,nan,nan\n"
        );
        let mut f = SweepResult::empty(SweepAxis::FrequencyHz, &[2.4e9]);
        f.gain_db = vec![Some(17.5)];
        f.s11_db = vec![Some(-20.0)];
        assert_eq!(sweep_csv(&f), "freq_hz,s21_db,s11_db\n2.40000000e+09,1.75000000e+01,-2.00000000e+01\n");
    }

    #[test]
    fn sweep_range_checked() {
        let n = Netlist::new(DesignConstants::default());
        let cfg = SimConfig::default();
        assert!(matches!(sweep_pin(&n, &[31.0], &cfg), Err(TuneError::Invalid { field: "range", .. })));
        assert!(matches!(sweep_pin(&n, &[], &cfg), Err(TuneError::Invalid { .. })));
    }
}
