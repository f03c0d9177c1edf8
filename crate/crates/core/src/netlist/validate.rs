use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{Element, Netlist};

/// Validation rules; [`Rule::name`] is the stable string reported to users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(into = "&'static str")]
pub enum Rule {
    Constants,
    DuplicateId,
    NodeCount,
    NonFinite,
    NonPositiveValue,
    FetParameters,
    TunableBounds,
    PortCount,
    PortIndex,
    SingleNode,
    DanglingNode,
    UnreachableNode,
    GroundMissing,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Constants => "invalid constants",
            Rule::DuplicateId => "duplicate id",
            Rule::NodeCount => "node count",
            Rule::NonFinite => "nonfinite value",
            Rule::NonPositiveValue => "nonpositive value",
            Rule::FetParameters => "fet parameters",
            Rule::TunableBounds => "tunable bounds",
            Rule::PortCount => "port count",
            Rule::PortIndex => "port index",
            Rule::SingleNode => "single-node component",
            Rule::DanglingNode => "dangling node",
            Rule::UnreachableNode => "unreachable node",
            Rule::GroundMissing => "ground missing",
        }
    }
}

impl From<Rule> for &'static str {
    fn from(r: Rule) -> Self {
        r.name()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub component: Option<String>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.component {
            Some(id) => write!(f, "{id}: {}: {}", self.rule, self.message),
            None => write!(f, "{}: {}", self.rule, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.findings.iter().any(|f| f.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.findings.iter().map(ToString::to_string).collect();
        f.write_str(&lines.join("; "))
    }
}

/// Checks every netlist invariant and reports each violation as a finding.
pub fn validate(netlist: &Netlist) -> ValidationReport {
    let mut findings = Vec::new();
    let mut add = |component: Option<&str>, rule: Rule, message: String| {
        findings.push(Finding { component: component.map(str::to_string), rule, message });
    };

    for v in netlist.constants.violations() {
        add(None, Rule::Constants, v);
    }

    let mut seen = HashSet::new();
    for c in &netlist.components {
        if !seen.insert(c.id.as_str()) {
            add(Some(&c.id), Rule::DuplicateId, format!("id `{}` appears more than once", c.id));
        }
    }

    for c in &netlist.components {
        let id = Some(c.id.as_str());
        if c.nodes.len() != c.element.terminal_count() {
            add(
                id,
                Rule::NodeCount,
                format!(
                    "{} needs {} nodes, has {}",
                    c.element.kind(),
                    c.element.terminal_count(),
                    c.nodes.len()
                ),
            );
        }
        let distinct: HashSet<&String> = c.nodes.iter().collect();
        if c.nodes.len() >= 2 && distinct.len() == 1 {
            add(id, Rule::SingleNode, format!("all terminals on node `{}`", c.nodes[0]));
        }

        let positive: Vec<(&str, f64)> = match c.element {
            Element::Resistor { resistance } => vec![("resistance", resistance)],
            Element::Capacitor { capacitance, .. } => vec![("capacitance", capacitance)],
            Element::Inductor { inductance, .. } => vec![("inductance", inductance)],
            Element::MicrostripLine { width, length } => vec![("width", width), ("length", length)],
            Element::AcPort { impedance, .. } => vec![("impedance", impedance)],
            Element::DcSource { voltage } => {
                if !voltage.is_finite() {
                    add(id, Rule::NonFinite, "voltage is not finite".into());
                }
                vec![]
            }
            Element::Fet(fet) => {
                for v in fet.violations() {
                    add(id, Rule::FetParameters, v);
                }
                vec![]
            }
        };
        for (name, v) in positive {
            if !v.is_finite() {
                add(id, Rule::NonFinite, format!("{name} is not finite"));
            } else if v <= 0.0 {
                add(id, Rule::NonPositiveValue, format!("{name} = {v} must be positive"));
            }
        }
        if let Element::Capacitor { series_resistance, .. } | Element::Inductor { series_resistance, .. } =
            c.element
        {
            if !(series_resistance.is_finite() && series_resistance >= 0.0) {
                add(id, Rule::NonPositiveValue, "series_resistance must be non-negative".into());
            }
        }

        if let Some(b) = c.tunable {
            match c.element.primary_value() {
                None => add(id, Rule::TunableBounds, "component has no tunable value".into()),
                Some(v) => {
                    if !(b.min.is_finite() && b.max.is_finite() && b.min < b.max) {
                        add(id, Rule::TunableBounds, format!("min {} must be below max {}", b.min, b.max));
                    } else if !b.contains(v) {
                        add(
                            id,
                            Rule::TunableBounds,
                            format!("value {v} outside [{}, {}]", b.min, b.max),
                        );
                    }
                }
            }
        }
    }

    check_ports(netlist, &mut add);
    check_topology(netlist, &mut add);

    ValidationReport { findings }
}

fn check_ports(netlist: &Netlist, add: &mut impl FnMut(Option<&str>, Rule, String)) {
    let ports: Vec<(&str, u32)> = netlist
        .components
        .iter()
        .filter_map(|c| match c.element {
            Element::AcPort { index, .. } => Some((c.id.as_str(), index)),
            _ => None,
        })
        .collect();
    if ports.len() > 2 {
        add(None, Rule::PortCount, format!("{} ports, at most 2 allowed", ports.len()));
    }
    let mut by_index: BTreeMap<u32, &str> = BTreeMap::new();
    for &(id, index) in &ports {
        if index == 0 || index as usize > ports.len() {
            add(Some(id), Rule::PortIndex, format!("index {index} outside 1..={}", ports.len()));
        }
        if by_index.insert(index, id).is_some() {
            add(Some(id), Rule::PortIndex, format!("index {index} used twice"));
        }
    }
    let expected: Vec<&str> = by_index.values().copied().collect();
    let listed: Vec<&str> = netlist.ports.iter().map(String::as_str).collect();
    if expected != listed {
        add(
            None,
            Rule::PortIndex,
            format!("port list {listed:?} does not match ac_port components {expected:?}"),
        );
    }
}

fn check_topology(netlist: &Netlist, add: &mut impl FnMut(Option<&str>, Rule, String)) {
    let ground = netlist.ground.as_str();
    let mut incidence: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for c in &netlist.components {
        for n in &c.nodes {
            incidence.entry(n.as_str()).or_default().push(c.id.as_str());
        }
    }
    if !netlist.components.is_empty() && !incidence.contains_key(ground) {
        add(None, Rule::GroundMissing, format!("no component touches ground `{ground}`"));
    }

    for (node, comps) in &incidence {
        if *node != ground && comps.len() == 1 {
            add(Some(comps[0]), Rule::DanglingNode, format!("node `{node}` has a single connection"));
        }
    }

    // union-find over nodes, each component joins all of its terminals
    let names: Vec<&str> = incidence.keys().copied().collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut parent: Vec<usize> = (0..names.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in &netlist.components {
        let mut it = c.nodes.iter().map(|n| index[n.as_str()]);
        if let Some(first) = it.next() {
            for other in it {
                let (a, b) = (find(&mut parent, first), find(&mut parent, other));
                parent[a] = b;
            }
        }
    }
    if let Some(&g) = index.get(ground) {
        let root = find(&mut parent, g);
        for (i, name) in names.iter().enumerate() {
            if find(&mut parent, i) != root {
                let comp = incidence[name][0];
                add(Some(comp), Rule::UnreachableNode, format!("node `{name}` has no path to ground"));
            }
        }
    }
}
