//! Versioned JSON document form of a [`Netlist`].
//!
//! ```json
//! {"version":1,"constants":{...},"ground":"0","ports":["P1","P2"],
//!  "components":[{"id":"C1","kind":"capacitor","nodes":["a","b"],
//!                 "params":{"capacitance":1e-12},"tunable":null}]}
//! ```

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::validate::{validate, ValidationReport};
use super::{BehavioralFet, Bounds, Component, DesignConstants, Element, Netlist};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed netlist document: {0}")]
    Parse(String),
    #[error("unsupported schema version {found}, expected {expected}")]
    Version { found: u64, expected: u32 },
    #[error("unknown component kind `{kind}` (component `{id}`)")]
    UnknownKind { id: String, kind: String },
    #[error("bad params for component `{id}` ({kind}): {message}")]
    Params { id: String, kind: String, message: String },
    #[error("netlist violates invariants: {0}")]
    Invalid(ValidationReport),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetlistDoc {
    version: u32,
    constants: DesignConstants,
    ground: String,
    ports: Vec<String>,
    components: Vec<ComponentDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    id: String,
    kind: String,
    nodes: Vec<String>,
    params: Map<String, Value>,
    #[serde(default)]
    tunable: Option<Bounds>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResistorParams {
    resistance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacitorParams {
    capacitance: f64,
    #[serde(default)]
    series_resistance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InductorParams {
    inductance: f64,
    #[serde(default)]
    series_resistance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineParams {
    width: f64,
    length: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DcSourceParams {
    voltage: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortParams {
    index: u32,
    impedance: f64,
}

fn to_map<T: Serialize>(p: &T) -> Map<String, Value> {
    match serde_json::to_value(p).expect("params serialise") {
        Value::Object(m) => m,
        _ => unreachable!("params are structs"),
    }
}

fn element_params(e: &Element) -> Map<String, Value> {
    match *e {
        Element::Resistor { resistance } => to_map(&ResistorParams { resistance }),
        Element::Capacitor { capacitance, series_resistance } => {
            to_map(&CapacitorParams { capacitance, series_resistance })
        }
        Element::Inductor { inductance, series_resistance } => {
            to_map(&InductorParams { inductance, series_resistance })
        }
        Element::MicrostripLine { width, length } => to_map(&LineParams { width, length }),
        Element::DcSource { voltage } => to_map(&DcSourceParams { voltage }),
        Element::AcPort { index, impedance } => to_map(&PortParams { index, impedance }),
        Element::Fet(f) => to_map(&f),
    }
}

fn parse_element(doc: &ComponentDoc) -> Result<Element, JsonError> {
    fn params<T: DeserializeOwned>(doc: &ComponentDoc) -> Result<T, JsonError> {
        serde_json::from_value(Value::Object(doc.params.clone())).map_err(|e| JsonError::Params {
            id: doc.id.clone(),
            kind: doc.kind.clone(),
            message: e.to_string(),
        })
    }
    Ok(match doc.kind.as_str() {
        "resistor" => {
            let p: ResistorParams = params(doc)?;
            Element::Resistor { resistance: p.resistance }
        }
        "capacitor" => {
            let p: CapacitorParams = params(doc)?;
            Element::Capacitor { capacitance: p.capacitance, series_resistance: p.series_resistance }
        }
        "inductor" => {
            let p: InductorParams = params(doc)?;
            Element::Inductor { inductance: p.inductance, series_resistance: p.series_resistance }
        }
        "microstrip_line" => {
            let p: LineParams = params(doc)?;
            Element::MicrostripLine { width: p.width, length: p.length }
        }
        "dc_source" => {
            let p: DcSourceParams = params(doc)?;
            Element::DcSource { voltage: p.voltage }
        }
        "ac_port" => {
            let p: PortParams = params(doc)?;
            Element::AcPort { index: p.index, impedance: p.impedance }
        }
        "fet" => Element::Fet(params::<BehavioralFet>(doc)?),
        other => {
            return Err(JsonError::UnknownKind { id: doc.id.clone(), kind: other.to_string() })
        }
    })
}

/// Serialises to pretty-printed UTF-8 JSON. Deterministic for equal inputs.
pub fn save_json(netlist: &Netlist) -> Vec<u8> {
    let doc = NetlistDoc {
        version: SCHEMA_VERSION,
        constants: netlist.constants,
        ground: netlist.ground.clone(),
        ports: netlist.ports.clone(),
        components: netlist
            .components
            .iter()
            .map(|c| ComponentDoc {
                id: c.id.clone(),
                kind: c.element.kind().to_string(),
                nodes: c.nodes.clone(),
                params: element_params(&c.element),
                tunable: c.tunable,
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("netlist serialises");
    out.push(b'\n');
    out
}

/// Parses and validates a netlist document.
pub fn load_json(bytes: &[u8]) -> Result<Netlist, JsonError> {
    let raw: Value = serde_json::from_slice(bytes).map_err(|e| JsonError::Parse(e.to_string()))?;
    match raw.get("version").and_then(Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => return Err(JsonError::Version { found: v, expected: SCHEMA_VERSION }),
        None => return Err(JsonError::Parse("missing integer field `version`".into())),
    }
    let doc: NetlistDoc = serde_json::from_value(raw).map_err(|e| JsonError::Parse(e.to_string()))?;
    let components = doc
        .components
        .iter()
        .map(|c| {
            Ok(Component {
                id: c.id.clone(),
                element: parse_element(c)?,
                nodes: c.nodes.clone(),
                tunable: c.tunable,
            })
        })
        .collect::<Result<Vec<_>, JsonError>>()?;
    let netlist = Netlist { constants: doc.constants, ground: doc.ground, ports: doc.ports, components };
    let report = validate(&netlist);
    if !report.is_ok() {
        return Err(JsonError::Invalid(report));
    }
    Ok(netlist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> String {
        r#"{"version":1,
            "constants":{"f0":2.4e9,"vcc":4.2,"z0":50.0,"substrate_eps_r":3.2,"substrate_h":0.00079},
            "ground":"0","ports":["P1"],
            "components":[
              {"id":"P1","kind":"ac_port","nodes":["in","0"],"params":{"index":1,"impedance":50.0},"tunable":null},
              {"id":"R1","kind":"resistor","nodes":["in","0"],"params":{"resistance":50.0},"tunable":null}
            ]}"#
        .to_string()
    }

    #[test]
    fn loads_hand_written_document() {
        let n = load_json(doc().as_bytes()).unwrap();
        assert_eq!(n.components.len(), 2);
        assert_eq!(load_json(&save_json(&n)).unwrap(), n);
    }

    #[test]
    fn truncated_document_is_a_parse_error() {
        let d = doc();
        let err = load_json(&d.as_bytes()[..d.len() / 2]).unwrap_err();
        assert!(matches!(err, JsonError::Parse(_)), "{err}");
    }

    #[test]
    fn unknown_kind_is_named() {
        let d = doc().replace("\"resistor\"", "\"memristor\"");
        let err = load_json(d.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("memristor"), "{err}");
        assert!(matches!(err, JsonError::UnknownKind { .. }));
    }

    #[test]
    fn version_and_unknown_keys_rejected() {
        let d = doc().replace("\"version\":1", "\"version\":2");
        assert!(matches!(load_json(d.as_bytes()), Err(JsonError::Version { found: 2, .. })));
        let d = doc().replace("\"ground\":\"0\"", "\"ground\":\"0\",\"extra\":true");
        assert!(matches!(load_json(d.as_bytes()), Err(JsonError::Parse(_))));
    }

    #[test]
    fn invariant_violation_on_load() {
        let d = doc().replace("\"resistance\":50.0", "\"resistance\":-5.0");
        assert!(matches!(load_json(d.as_bytes()), Err(JsonError::Invalid(_))));
    }
}
