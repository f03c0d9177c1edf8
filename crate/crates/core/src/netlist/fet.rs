use serde::{Deserialize, Serialize};

/// Width of the smooth gate-threshold transition used by the large-signal
/// channel model, volts.
pub const GATE_TRANSITION_WIDTH: f64 = 0.05;

/// Smallest on-resistance used when the channel is evaluated with a smooth
/// (sine-drive) model. An ideal short is only meaningful for the two-state
/// square-drive switch.
const MIN_SMOOTH_RON: f64 = 1e-3;

/// Behavioural stand-in for the enhancement-mode pHEMT used in the
/// amplifier.
///
/// The same parameter set drives both engines. Small-signal analysis
/// linearises [`BehavioralFet::drain_current`] at the DC bias point and adds
/// the three junction capacitances; the transient engine evaluates the full
/// nonlinear channel, or a two-state `ron`/`roff` switch for square drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehavioralFet {
    /// Transconductance of the channel above threshold, siemens.
    pub gm: f64,
    pub cgs: f64,
    pub cgd: f64,
    pub cds: f64,
    /// Output resistance, ohms.
    pub rds: f64,
    /// Threshold voltage, volts.
    pub vth: f64,
    /// On-resistance of the fully enhanced channel, ohms. Zero is an ideal
    /// short (square drive only).
    pub ron: f64,
    /// Off-state resistance of the two-state switch, ohms.
    pub roff: f64,
    /// Saturation current of the channel, amperes. `None` leaves the
    /// channel current unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imax: Option<f64>,
}

impl Default for BehavioralFet {
    fn default() -> Self {
        Self {
            gm: 0.25,
            cgs: 0.8e-12,
            cgd: 0.04e-12,
            cds: 0.2e-12,
            rds: 2000.0,
            vth: 0.3,
            ron: 0.5,
            roff: 1.0e4,
            imax: Some(0.38),
        }
    }
}

/// Drain current and its partial derivatives at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEval {
    pub current: f64,
    pub d_vgs: f64,
    pub d_vds: f64,
}

impl BehavioralFet {
    /// Switch used to idealise the class-E stage: lossless when on, open
    /// when off, no parasitic capacitance.
    pub fn ideal_switch() -> Self {
        Self {
            gm: 1.0,
            cgs: 0.0,
            cgd: 0.0,
            cds: 0.0,
            rds: 1.0e9,
            vth: 0.5,
            ron: 0.0,
            roff: 1.0e6,
            imax: None,
        }
    }

    /// The same device with its width multiplied by `s`: currents and
    /// capacitances scale by `s`, resistances by `1/s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            gm: self.gm * s,
            cgs: self.cgs * s,
            cgd: self.cgd * s,
            cds: self.cds * s,
            rds: self.rds / s,
            vth: self.vth,
            ron: self.ron / s,
            roff: self.roff / s,
            imax: self.imax.map(|m| m * s),
        }
    }

    /// Saturated channel current available at `vgs`, with its slope.
    ///
    /// A softplus ramp: negligible below threshold, `gm·(vgs − vth)` well
    /// above it, compressed by `imax·tanh(i/imax)` when `imax` is set.
    pub fn channel_limit(&self, vgs: f64) -> (f64, f64) {
        let w = GATE_TRANSITION_WIDTH;
        let z = (vgs - self.vth) / w;
        let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
        let sigmoid = if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        };
        let (i, d) = (self.gm * w * softplus, self.gm * sigmoid);
        match self.imax {
            Some(m) => {
                let t = (i / m).tanh();
                (m * t, d * (1.0 - t * t))
            }
            None => (i, d),
        }
    }

    /// Large-signal drain-to-source current for smooth drive.
    ///
    /// `i = I(vgs)·tanh(vds / (ron·I(vgs))) + vds/rds`: a resistor of
    /// `ron` at low drain voltage that saturates at the channel limit.
    pub fn drain_current(&self, vgs: f64, vds: f64) -> ChannelEval {
        let ron = self.ron.max(MIN_SMOOTH_RON);
        let (limit, d_limit) = self.channel_limit(vgs);
        let gds = 1.0 / self.rds;
        if limit < 1e-18 {
            let sign = if vds > 0.0 {
                1.0
            } else if vds < 0.0 {
                -1.0
            } else {
                0.0
            };
            return ChannelEval {
                current: limit * sign + vds * gds,
                d_vgs: d_limit * sign,
                d_vds: gds,
            };
        }
        let x = vds / (ron * limit);
        let t = x.tanh();
        let sech2 = 1.0 - t * t;
        ChannelEval {
            current: limit * t + vds * gds,
            d_vgs: d_limit * (t - x * sech2),
            d_vds: sech2 / ron + gds,
        }
    }

    /// Conductance of the two-state switch; `None` is an ideal short.
    pub fn switch_conductance(&self, on: bool) -> Option<f64> {
        if on {
            (self.ron > 0.0).then(|| 1.0 / self.ron)
        } else {
            Some(1.0 / self.roff)
        }
    }

    /// Names of violated parameter rules, empty when the model is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fields = [
            ("gm", self.gm),
            ("cgs", self.cgs),
            ("cgd", self.cgd),
            ("cds", self.cds),
            ("rds", self.rds),
            ("vth", self.vth),
            ("ron", self.ron),
            ("roff", self.roff),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                out.push(format!("{name} is not finite"));
            }
        }
        if self.gm <= 0.0 {
            out.push("gm must be positive".into());
        }
        if self.rds <= 0.0 {
            out.push("rds must be positive".into());
        }
        for (name, v) in [("cgs", self.cgs), ("cgd", self.cgd), ("cds", self.cds)] {
            if v < 0.0 {
                out.push(format!("{name} must be non-negative"));
            }
        }
        if self.ron < 0.0 {
            out.push("ron must be non-negative".into());
        }
        if let Some(m) = self.imax {
            if !(m.is_finite() && m > 0.0) {
                out.push("imax must be positive".into());
            }
        }
        if self.ron >= self.roff {
            out.push("ron must be smaller than roff".into());
        }
        out
    }
}
