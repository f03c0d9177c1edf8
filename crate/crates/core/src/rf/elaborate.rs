//! Flattening of a [`Netlist`] into indexed primitives shared by the AC,
//! DC and transient engines.

use std::collections::HashMap;

use super::microstrip::{microstrip_analyze, MicrostripGeometry};
use super::RfError;
use crate::netlist::{BehavioralFet, Element, Netlist};
use crate::SPEED_OF_LIGHT;

/// Node index; `None` is ground.
pub(crate) type Node = Option<usize>;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Prim {
    R { a: Node, b: Node, r: f64 },
    C { a: Node, b: Node, c: f64 },
    L { a: Node, b: Node, l: f64 },
    V { p: Node, n: Node, v: f64 },
    Port { p: Node, n: Node, z: f64, index: u32 },
    /// Two-conductor line between `a` and ground and `b` and ground.
    Line { a: Node, b: Node, z0: f64, delay: f64 },
    Fet { g: Node, d: Node, s: Node, model: BehavioralFet },
}

#[derive(Debug, Clone)]
pub(crate) struct Circuit {
    pub names: Vec<String>,
    pub prims: Vec<Prim>,
}

impl Circuit {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn ports(&self) -> Vec<(u32, Node, Node, f64)> {
        let mut out: Vec<_> = self
            .prims
            .iter()
            .filter_map(|p| match *p {
                Prim::Port { p, n, z, index } => Some((index, p, n, z)),
                _ => None,
            })
            .collect();
        out.sort_by_key(|t| t.0);
        out
    }
}

pub(crate) fn elaborate(netlist: &Netlist) -> Result<Circuit, RfError> {
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let ground = netlist.ground.as_str();
    let mut node = |name: &str, names: &mut Vec<String>| -> Node {
        if name == ground {
            return None;
        }
        if let Some(&i) = index.get(name) {
            return Some(i);
        }
        names.push(name.to_string());
        index.insert(name.to_string(), names.len() - 1);
        Some(names.len() - 1)
    };

    let mut prims = Vec::new();
    for c in &netlist.components {
        if c.nodes.len() != c.element.terminal_count() {
            return Err(RfError::Unsupported(format!("component `{}` has the wrong node count", c.id)));
        }
        let a = node(&c.nodes[0], &mut names);
        let b = node(&c.nodes[1], &mut names);
        let mut push = |p: Prim| prims.push(p);
        match c.element {
            Element::Resistor { resistance } => push(Prim::R { a, b, r: resistance }),
            Element::Capacitor { capacitance, series_resistance } => {
                if series_resistance > 0.0 {
                    let mid = node(&format!("{}#esr", c.id), &mut names);
                    push(Prim::R { a, b: mid, r: series_resistance });
                    push(Prim::C { a: mid, b, c: capacitance });
                } else {
                    push(Prim::C { a, b, c: capacitance });
                }
            }
            Element::Inductor { inductance, series_resistance } => {
                if series_resistance > 0.0 {
                    let mid = node(&format!("{}#esr", c.id), &mut names);
                    push(Prim::R { a, b: mid, r: series_resistance });
                    push(Prim::L { a: mid, b, l: inductance });
                } else {
                    push(Prim::L { a, b, l: inductance });
                }
            }
            Element::MicrostripLine { width, length } => {
                let geom = MicrostripGeometry {
                    width,
                    length,
                    eps_r: netlist.constants.substrate_eps_r,
                    h: netlist.constants.substrate_h,
                };
                let (z0, eps_eff) = microstrip_analyze(&geom)
                    .map_err(|e| RfError::Geometry(format!("component `{}`: {e}", c.id)))?;
                push(Prim::Line { a, b, z0, delay: length * eps_eff.sqrt() / SPEED_OF_LIGHT });
            }
            Element::DcSource { voltage } => push(Prim::V { p: a, n: b, v: voltage }),
            Element::AcPort { index, impedance } => push(Prim::Port { p: a, n: b, z: impedance, index }),
            Element::Fet(model) => {
                let s = node(&c.nodes[2], &mut names);
                push(Prim::Fet { g: a, d: b, s, model });
            }
        }
    }

    check_reachability(&names, &prims)?;
    Ok(Circuit { names, prims })
}

fn check_reachability(names: &[String], prims: &[Prim]) -> Result<(), RfError> {
    // slot 0 is ground
    let n = names.len() + 1;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let slot = |n: Node| n.map_or(0, |i| i + 1);
    let mut join = |a: Node, b: Node| {
        let (ra, rb) = (find(&mut parent, slot(a)), find(&mut parent, slot(b)));
        parent[ra] = rb;
    };
    for p in prims {
        match *p {
            Prim::R { a, b, .. } | Prim::C { a, b, .. } | Prim::L { a, b, .. } => join(a, b),
            Prim::V { p, n, .. } | Prim::Port { p, n, .. } => join(p, n),
            Prim::Line { a, b, .. } => {
                join(a, None);
                join(b, None);
            }
            Prim::Fet { g, d, s, .. } => {
                join(g, s);
                join(d, s);
            }
        }
    }
    let root = find(&mut parent, 0);
    for (i, name) in names.iter().enumerate() {
        if find(&mut parent, i + 1) != root {
            return Err(RfError::Unreachable { node: name.clone() });
        }
    }
    Ok(())
}

/// Dense MNA system: node rows first, then one row per branch unknown.
pub(crate) struct Mna<T: nalgebra::ComplexField<RealField = f64> + Copy> {
    pub m: nalgebra::DMatrix<T>,
    pub rhs: nalgebra::DVector<T>,
    pub nodes: usize,
}

impl<T: nalgebra::ComplexField<RealField = f64> + Copy> Mna<T> {
    pub fn new(nodes: usize, branches: usize) -> Self {
        let n = nodes + branches;
        Self { m: nalgebra::DMatrix::zeros(n, n), rhs: nalgebra::DVector::zeros(n), nodes }
    }

    pub fn add(&mut self, r: Node, c: Node, v: T) {
        if let (Some(r), Some(c)) = (r, c) {
            self.m[(r, c)] += v;
        }
    }

    /// Admittance `y` between `a` and `b`.
    pub fn admittance(&mut self, a: Node, b: Node, y: T) {
        self.add(a, a, y);
        self.add(b, b, y);
        self.add(a, b, -y);
        self.add(b, a, -y);
    }

    /// Current `g·(v(cp) − v(cn))` leaving `op` and entering `on`.
    pub fn vccs(&mut self, op: Node, on: Node, cp: Node, cn: Node, g: T) {
        self.add(op, cp, g);
        self.add(op, cn, -g);
        self.add(on, cp, -g);
        self.add(on, cn, g);
    }

    /// Independent current `i` injected into `node`.
    pub fn inject(&mut self, node: Node, i: T) {
        if let Some(n) = node {
            self.rhs[n] += i;
        }
    }

    /// Branch `k` enforcing `v(p) − v(n) = v`; its unknown is the current
    /// flowing from `p` through the branch to `n`.
    pub fn branch(&mut self, k: usize, p: Node, n: Node, v: T) {
        let row = self.nodes + k;
        let one = T::one();
        if let Some(p) = p {
            self.m[(p, row)] += one;
            self.m[(row, p)] += one;
        }
        if let Some(n) = n {
            self.m[(n, row)] -= one;
            self.m[(row, n)] -= one;
        }
        self.rhs[row] += v;
    }
}

/// Voltage of `node` in a solution vector.
pub(crate) fn volt<T: Copy + Default>(x: &[T], node: Node) -> T {
    node.map_or(T::default(), |i| x[i])
}
