//! Large-signal periodic steady state of the switching stage.
//!
//! Fixed-step trapezoidal integration of the full netlist. Inductors and
//! sources are branch unknowns, capacitors use companion models, lines
//! are modelled by their characteristics (Branin) and FET channels are
//! solved by Newton iteration on the Thevenin equivalent seen by the
//! channel terminals.

mod engine;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::csv_row;
use crate::netlist::Netlist;
use crate::rf::RfError;

pub use engine::{simulate, simulate_amplitudes};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported topology: {0}")]
    Unsupported(String),
    #[error("no periodic steady state after {periods} periods (last delta {delta:e})")]
    NotConverged { periods: usize, delta: f64 },
    #[error("channel iteration failed at t = {time:e} s")]
    Newton { time: f64 },
    #[error("singular transient system")]
    Singular,
    #[error("fundamental is zero, harmonic levels undefined")]
    ZeroFundamental,
    #[error(transparent)]
    Analysis(#[from] RfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveShape {
    Sine,
    Square,
}

/// Gate drive applied through port 1.
///
/// `amplitude` is the voltage a matched input would see; the port EMF is
/// `bias + 2·amplitude·shape(ω t)`. In square mode the switch is on while
/// `bias + amplitude·shape > vth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drive {
    pub amplitude: f64,
    pub bias: f64,
    pub shape: DriveShape,
}

impl Default for Drive {
    fn default() -> Self {
        Self { amplitude: 0.0, bias: 0.0, shape: DriveShape::Sine }
    }
}

impl Drive {
    /// Sine drive delivering `p_in` watts into a matched 50 Ω input.
    pub fn from_available_power(p_in: f64) -> Self {
        Self { amplitude: (2.0 * p_in * 50.0).sqrt(), bias: 0.0, shape: DriveShape::Sine }
    }

    /// Ideal 50 % duty square drive for a switch with threshold `vth`.
    pub fn square(vth: f64) -> Self {
        Self { amplitude: 1.0, bias: vth, shape: DriveShape::Square }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub steps_per_period: usize,
    pub max_periods: usize,
    /// Largest relative change between successive periods accepted as
    /// steady state.
    pub convergence_tol: f64,
    pub drive: Drive,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { steps_per_period: 2048, max_periods: 400, convergence_tol: 1e-6, drive: Drive::default() }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.steps_per_period < 256 {
            return Err(SimError::Config("steps_per_period must be at least 256".into()));
        }
        if self.max_periods < 2 {
            return Err(SimError::Config("max_periods must be at least 2".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(SimError::Config("convergence_tol must be positive".into()));
        }
        let d = self.drive;
        if !(d.amplitude.is_finite() && d.amplitude >= 0.0 && d.bias.is_finite()) {
            return Err(SimError::Config("drive amplitude must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// One steady-state period sampled at `t = k·T/steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    pub f0: f64,
    pub time: Vec<f64>,
    /// Drain-source voltage of the output device.
    pub v_drain: Vec<f64>,
    /// Channel current of the output device, drain to source.
    pub i_drain: Vec<f64>,
    /// Voltage across the port-2 load.
    pub v_load: Vec<f64>,
    /// Total current drawn from the supply.
    pub i_choke: Vec<f64>,
    /// Whether the output device conducts during the step ending at each
    /// sample.
    pub switch_on: Vec<bool>,
    pub load_resistance: f64,
    /// `[v_drain, i_drain, v_load, i_choke]` one full period after the
    /// first sample.
    pub closing: [f64; 4],
    pub periods: usize,
    /// Relative change between the last two periods.
    pub delta: f64,
}

impl WaveformRecord {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    /// Fundamental power into the load, W.
    pub p_out: f64,
    /// Supply power, W.
    pub p_dc: f64,
    pub drain_efficiency: f64,
    pub zvs_residual: f64,
    pub peak_drain_voltage: f64,
    /// Mean of `|v_drain · i_drain|`, W.
    pub overlap_power: f64,
    /// Load-voltage harmonics at 2f0 and 3f0, dBc. `None` without a
    /// fundamental.
    pub harmonic_levels: Option<[f64; 2]>,
}

/// Complex amplitude of harmonic `k` of one period of samples.
pub fn fourier_coefficient(x: &[f64], k: usize) -> Complex64 {
    let n = x.len() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let ph = -2.0 * std::f64::consts::PI * (k * i) as f64 / n;
        acc += Complex64::from_polar(v, ph);
    }
    acc * (2.0 / n)
}

/// Floor applied to harmonic ratios so exact zeros stay finite.
const HARMONIC_FLOOR_DB: f64 = -400.0;

/// Levels of the 2nd and 3rd harmonics relative to the fundamental, dB.
pub fn harmonic_content(waveform: &[f64]) -> Result<[f64; 2], SimError> {
    let fund = fourier_coefficient(waveform, 1).norm();
    let peak = waveform.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if fund == 0.0 || fund <= 1e-14 * peak {
        return Err(SimError::ZeroFundamental);
    }
    let level = |k| (20.0 * (fourier_coefficient(waveform, k).norm() / fund).log10()).max(HARMONIC_FLOOR_DB);
    Ok([level(2), level(3)])
}

pub fn steady_state_report(w: &WaveformRecord, vcc: f64) -> SteadyStateReport {
    let n = w.len();
    let v1 = fourier_coefficient(&w.v_load, 1);
    let p_out = v1.norm_sqr() / (2.0 * w.load_resistance);
    let p_dc = vcc * w.i_choke.iter().sum::<f64>() / n as f64;
    let drain_efficiency = if p_dc > 0.0 { p_out / p_dc } else { 0.0 };
    let peak = w.v_drain.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut zvs = 0.0f64;
    if peak > 0.0 {
        for k in 0..n {
            let prev = (k + n - 1) % n;
            if w.switch_on[k] && !w.switch_on[prev] {
                zvs = zvs.max(w.v_drain[prev].abs() / peak);
            }
        }
    }
    let overlap_power =
        w.v_drain.iter().zip(&w.i_drain).map(|(v, i)| (v * i).abs()).sum::<f64>() / n as f64;
    SteadyStateReport {
        p_out,
        p_dc,
        drain_efficiency,
        zvs_residual: zvs,
        peak_drain_voltage: peak,
        overlap_power,
        harmonic_levels: harmonic_content(&w.v_load).ok(),
    }
}

pub const WAVEFORM_CSV_HEADER: &str = "t_s,v_drain_V,i_drain_A,v_load_V,i_choke_A";

pub fn waveform_csv(w: &WaveformRecord) -> String {
    let mut out = String::from(WAVEFORM_CSV_HEADER);
    out.push('\n');
    for k in 0..w.len() {
        out.push_str(&csv_row(&[w.time[k], w.v_drain[k], w.i_drain[k], w.v_load[k], w.i_choke[k]]));
    }
    out
}

/// Convenience: simulate and summarise with the netlist supply voltage.
pub fn simulate_report(netlist: &Netlist, config: &SimConfig) -> Result<(WaveformRecord, SteadyStateReport), SimError> {
    let w = simulate(netlist, config)?;
    let r = steady_state_report(&w, netlist.constants.vcc);
    Ok((w, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_has_no_harmonics() {
        let x: Vec<f64> = (0..2048).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 2048.0).sin()).collect();
        let h = harmonic_content(&x).unwrap();
        assert!(h[0] < -100.0 && h[1] < -100.0, "{h:?}");
    }

    #[test]
    fn square_wave_third_harmonic() {
        let x: Vec<f64> = (0..2048).map(|i| if i < 1024 { 1.0 } else { -1.0 }).collect();
        let h = harmonic_content(&x).unwrap();
        assert!(h[0] < -100.0);
        assert!((h[1] - (-9.5424)).abs() < 1e-3, "{}", h[1]);
    }

    #[test]
    fn flat_waveform_has_no_fundamental() {
        assert_eq!(harmonic_content(&[1.0; 512]), Err(SimError::ZeroFundamental));
    }

    #[test]
    fn config_rules() {
        assert!(SimConfig::default().validate().is_ok());
        let c = SimConfig { steps_per_period: 100, ..SimConfig::default() };
        assert!(c.validate().is_err());
        let c = SimConfig { convergence_tol: 0.0, ..SimConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let w = WaveformRecord {
            f0: 1.0,
            time: vec![0.0, 0.5],
            v_drain: vec![1.0, 2.0],
            i_drain: vec![0.0, 0.0],
            v_load: vec![0.0, -1.0],
            i_choke: vec![0.25, 0.25],
            switch_on: vec![true, false],
            load_resistance: 1.0,
            closing: [1.0, 0.0, 0.0, 0.25],
            periods: 2,
            delta: 0.0,
        };
        assert_eq!(
            waveform_csv(&w),
            "t_s,v_drain_V,i_drain_A,v_load_V,i_choke_A\n\
             0.00000000e+00,1.00000000e+00,0.00000000e+00,0.00000000e+00,2.50000000e-01\n\
             5.00000000e-01,2.00000000e+00,0.00000000e+00,-1.00000000e+00,2.50000000e-01\n"
        );
    }
}
