//! Circuit data model, validation, JSON persistence and amplifier
//! templates.

mod fet;
mod json;
pub mod templates;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fet::{BehavioralFet, ChannelEval, GATE_TRANSITION_WIDTH};
pub use json::{load_json, save_json, JsonError, SCHEMA_VERSION};
pub use templates::{
    classe_core_netlist, driver_stage, single_stage_template, single_stage_template_with_fet,
    two_stage_template, two_stage_template_with_fets, StageTemplate, TemplateError, DRIVER_DEVICE_SCALE,
    DRIVER_POWER_FRACTION,
};
pub use validate::{validate, Finding, Rule, ValidationReport};

/// The distinguished ground node.
pub const GROUND: &str = "0";

/// Fabrication and operating constants shared by a whole design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConstants {
    /// Operating frequency, Hz.
    pub f0: f64,
    /// Supply voltage, V.
    pub vcc: f64,
    /// Port reference impedance, ohms.
    pub z0: f64,
    pub substrate_eps_r: f64,
    /// Substrate thickness, m.
    pub substrate_h: f64,
}

impl Default for DesignConstants {
    fn default() -> Self {
        Self {
            f0: 2.4e9,
            vcc: 4.2,
            z0: 50.0,
            substrate_eps_r: 3.2,
            substrate_h: 0.79e-3,
        }
    }
}

impl DesignConstants {
    /// Human-readable descriptions of violated invariants.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("f0", self.f0),
            ("vcc", self.vcc),
            ("z0", self.z0),
            ("substrate_eps_r", self.substrate_eps_r),
            ("substrate_h", self.substrate_h),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be finite and positive"));
            }
        }
        if !(1e8..=1e11).contains(&self.f0) {
            out.push("f0 must lie within [1e8, 1e11] Hz".into());
        }
        out
    }
}

/// Tuning range of a component's primary value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    /// `[factor_lo·nominal, factor_hi·nominal]`.
    pub fn around(nominal: f64, factor_lo: f64, factor_hi: f64) -> Self {
        Self { min: nominal * factor_lo, max: nominal * factor_hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Kind-specific values of a component, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Resistor { resistance: f64 },
    Capacitor { capacitance: f64, series_resistance: f64 },
    Inductor { inductance: f64, series_resistance: f64 },
    MicrostripLine { width: f64, length: f64 },
    DcSource { voltage: f64 },
    AcPort { index: u32, impedance: f64 },
    Fet(BehavioralFet),
}

impl Element {
    pub fn resistor(resistance: f64) -> Self {
        Self::Resistor { resistance }
    }

    pub fn capacitor(capacitance: f64) -> Self {
        Self::Capacitor { capacitance, series_resistance: 0.0 }
    }

    pub fn inductor(inductance: f64) -> Self {
        Self::Inductor { inductance, series_resistance: 0.0 }
    }

    /// Schema name of the kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Resistor { .. } => "resistor",
            Self::Capacitor { .. } => "capacitor",
            Self::Inductor { .. } => "inductor",
            Self::MicrostripLine { .. } => "microstrip_line",
            Self::DcSource { .. } => "dc_source",
            Self::AcPort { .. } => "ac_port",
            Self::Fet(_) => "fet",
        }
    }

    /// Number of terminals the kind connects.
    pub fn terminal_count(&self) -> usize {
        match self {
            Self::Fet(_) => 3,
            _ => 2,
        }
    }

    /// The value tuned by [`Netlist::set_component_value`]: resistance,
    /// capacitance, inductance, line length, source voltage or port
    /// impedance. FETs have none.
    pub fn primary_value(&self) -> Option<f64> {
        match *self {
            Self::Resistor { resistance } => Some(resistance),
            Self::Capacitor { capacitance, .. } => Some(capacitance),
            Self::Inductor { inductance, .. } => Some(inductance),
            Self::MicrostripLine { length, .. } => Some(length),
            Self::DcSource { voltage } => Some(voltage),
            Self::AcPort { impedance, .. } => Some(impedance),
            Self::Fet(_) => None,
        }
    }

    fn with_primary_value(&self, v: f64) -> Option<Self> {
        let mut out = *self;
        match &mut out {
            Self::Resistor { resistance } => *resistance = v,
            Self::Capacitor { capacitance, .. } => *capacitance = v,
            Self::Inductor { inductance, .. } => *inductance = v,
            Self::MicrostripLine { length, .. } => *length = v,
            Self::DcSource { voltage } => *voltage = v,
            Self::AcPort { impedance, .. } => *impedance = v,
            Self::Fet(_) => return None,
        }
        Some(out)
    }
}

/// One circuit element with its terminal nodes.
///
/// Node order: passives, lines and sources `[positive, negative]` (lines
/// `[input, output]`, both referenced to ground); FETs `[gate, drain,
/// source]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: String,
    pub element: Element,
    pub nodes: Vec<String>,
    pub tunable: Option<Bounds>,
}

impl Component {
    pub fn new(id: impl Into<String>, element: Element, nodes: &[&str]) -> Self {
        Self {
            id: id.into(),
            element,
            nodes: nodes.iter().map(|n| n.to_string()).collect(),
            tunable: None,
        }
    }

    /// Marks the primary value tunable over `[lo·value, hi·value]`.
    pub fn tunable(mut self, lo: f64, hi: f64) -> Self {
        if let Some(v) = self.element.primary_value() {
            self.tunable = Some(Bounds::around(v, lo, hi));
        }
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EditError {
    #[error("unknown component id `{0}`")]
    UnknownId(String),
    #[error("component `{id}` has no scalar value to set")]
    NoScalarValue { id: String },
    #[error("value {value} for `{id}` is outside bounds [{min}, {max}]")]
    OutOfBounds { id: String, value: f64, min: f64, max: f64 },
    #[error("value {value} for `{id}` is not finite")]
    NotFinite { id: String, value: f64 },
    #[error("component `{id}` is not a fet")]
    NotAFet { id: String },
}

/// A complete circuit: components wired by string node ids, with ground
/// `"0"`, an ordered port list and the design constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub constants: DesignConstants,
    pub ground: String,
    /// Ids of the `ac_port` components, port 1 first.
    pub ports: Vec<String>,
    pub components: Vec<Component>,
}

impl Netlist {
    pub fn new(constants: DesignConstants) -> Self {
        Self { constants, ground: GROUND.to_string(), ports: Vec::new(), components: Vec::new() }
    }

    /// Appends a component; `ac_port` components are registered in the port
    /// list in index order.
    pub fn push(&mut self, component: Component) {
        if let Element::AcPort { index, .. } = component.element {
            let slot = (index as usize).saturating_sub(1).min(self.ports.len());
            self.ports.insert(slot, component.id.clone());
        }
        self.components.push(component);
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    /// Returns a copy with one component's primary value replaced.
    pub fn set_component_value(&self, id: &str, value: f64) -> Result<Netlist, EditError> {
        let idx = self
            .components
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| EditError::UnknownId(id.to_string()))?;
        let comp = &self.components[idx];
        if !value.is_finite() {
            return Err(EditError::NotFinite { id: id.to_string(), value });
        }
        if let Some(b) = comp.tunable {
            if !b.contains(value) {
                return Err(EditError::OutOfBounds { id: id.to_string(), value, min: b.min, max: b.max });
            }
        }
        let element = comp
            .element
            .with_primary_value(value)
            .ok_or_else(|| EditError::NoScalarValue { id: id.to_string() })?;
        let mut out = self.clone();
        out.components[idx].element = element;
        Ok(out)
    }

    /// Returns a copy with the FET `id` replaced by `fet`.
    pub fn with_fet(&self, id: &str, fet: BehavioralFet) -> Result<Netlist, EditError> {
        let idx = self
            .components
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| EditError::UnknownId(id.to_string()))?;
        if !matches!(self.components[idx].element, Element::Fet(_)) {
            return Err(EditError::NotAFet { id: id.to_string() });
        }
        let mut out = self.clone();
        out.components[idx].element = Element::Fet(fet);
        Ok(out)
    }

    /// Ids of components carrying tuning bounds, in netlist order.
    pub fn tunable_ids(&self) -> Vec<String> {
        self.components.iter().filter(|c| c.tunable.is_some()).map(|c| c.id.clone()).collect()
    }

    /// FET components in netlist order.
    pub fn fets(&self) -> impl Iterator<Item = (&Component, &BehavioralFet)> {
        self.components.iter().filter_map(|c| match &c.element {
            Element::Fet(f) => Some((c, f)),
            _ => None,
        })
    }

    /// The port component with 1-based `index`.
    pub fn port(&self, index: usize) -> Option<&Component> {
        let id = self.ports.get(index.checked_sub(1)?)?;
        self.component(id)
    }

    /// Stable 64-bit FNV-1a digest of the canonical JSON form.
    pub fn content_hash(&self) -> u64 {
        let bytes = save_json(self);
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
