use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::linalg::LU;
use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64;

use super::{DriveShape, SimConfig, SimError, WaveformRecord};
use crate::netlist::{BehavioralFet, ChannelEval, Netlist};
use crate::rf::dc::{smooth_channel, solve_dc, GMIN};
use crate::rf::mna::AcSystem;
use crate::rf::elaborate::{elaborate, volt, Mna, Node, Prim};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Trapezoidal,
    Euler,
}

/// Integration method and switch state a factorised matrix belongs to.
type Factorisation = (Method, bool);

/// Samples of one period, switch states, and the closing sample.
type Period = (Vec<[f64; 4]>, Vec<bool>, [f64; 4]);

struct Cap {
    a: Node,
    b: Node,
    c: f64,
    v: f64,
    i: f64,
}

struct Ind {
    a: Node,
    b: Node,
    l: f64,
    row: usize,
}

struct Port {
    p: Node,
    n: Node,
    z: f64,
    driven: bool,
}

/// Terminal samples `[v_a, i_a, v_b, i_b]` of a line, one per step.
struct History {
    samples: VecDeque<[f64; 4]>,
    newest: i64,
    keep: usize,
}

impl History {
    fn new(init: [f64; 4], keep: usize) -> Self {
        Self { samples: std::iter::repeat_n(init, keep).collect(), newest: 0, keep }
    }

    /// Adds `f(age)` to every stored sample, `age` in steps before the
    /// newest (zero for the newest, negative further back).
    fn add(&mut self, f: impl Fn(i64) -> [f64; 4]) {
        let len = self.samples.len() as i64;
        for (slot, age) in self.samples.iter_mut().zip(-(len - 1)..=0) {
            let d = f(age);
            for k in 0..4 {
                slot[k] += d[k];
            }
        }
    }

    fn push(&mut self, s: [f64; 4]) {
        self.newest += 1;
        self.samples.push_back(s);
        if self.samples.len() > self.keep {
            self.samples.pop_front();
        }
    }

    /// Linear interpolation at fractional step index `pos <= newest`.
    fn at(&self, pos: f64) -> [f64; 4] {
        let lo = pos.floor();
        let frac = pos - lo;
        let idx = self.samples.len() as i64 - 1 - (self.newest - lo as i64);
        let a = self.samples[idx as usize];
        if frac == 0.0 {
            return a;
        }
        let b = self.samples[idx as usize + 1];
        std::array::from_fn(|k| a[k] + frac * (b[k] - a[k]))
    }
}

struct Line {
    a: Node,
    b: Node,
    z0: f64,
    /// Delay in steps.
    lag: f64,
    hist: History,
    e: [f64; 2],
}

struct Fet {
    g: Node,
    d: Node,
    s: Node,
    model: BehavioralFet,
    /// Branch row of the two-state switch (square drive).
    row: Option<usize>,
    current: f64,
}

struct Engine {
    nodes: usize,
    size: usize,
    h: f64,
    steps: usize,
    shape: DriveShape,
    amplitude: f64,
    bias: f64,
    resistors: Vec<(Node, Node, f64)>,
    caps: Vec<Cap>,
    inds: Vec<Ind>,
    sources: Vec<(Node, Node, f64, usize)>,
    ports: Vec<Port>,
    lines: Vec<Line>,
    fets: Vec<Fet>,
    load: (Node, Node, f64),
    x: DVector<f64>,
    rhs: DVector<f64>,
    next: DVector<f64>,
    inverses: Vec<(Factorisation, LU<f64, Dyn, Dyn>)>,
    /// Smooth-channel compensation data: columns of the inverse that map
    /// channel currents to node voltages, and the controlling-voltage
    /// sensitivities.
    comp: Option<Compensation>,
    step_index: u64,
    euler_left: u32,
    switch_state: bool,
}

struct Compensation {
    z: Vec<DVector<f64>>,
    m_gs: DMatrix<f64>,
    m_ds: DMatrix<f64>,
}

fn switch_channel(model: &BehavioralFet, _vgs: f64, vds: f64) -> ChannelEval {
    let g = 1.0 / model.roff;
    ChannelEval { current: g * vds, d_vgs: 0.0, d_vds: g }
}

impl Engine {
    fn new(netlist: &Netlist, config: &SimConfig) -> Result<Self, SimError> {
        let circuit = elaborate(netlist)?;
        let shape = config.drive.shape;
        let fet_count = circuit.prims.iter().filter(|p| matches!(p, Prim::Fet { .. })).count();
        if fet_count == 0 {
            return Err(SimError::Unsupported("netlist has no transistor".into()));
        }
        if shape == DriveShape::Square && fet_count != 1 {
            return Err(SimError::Unsupported("square drive needs exactly one transistor".into()));
        }
        let dc = match shape {
            DriveShape::Square => solve_dc(&circuit, &switch_channel)?,
            DriveShape::Sine => solve_dc(&circuit, &smooth_channel)?,
        };
        let nodes = circuit.node_count();
        let steps = config.steps_per_period;
        let h = 1.0 / (netlist.constants.f0 * steps as f64);

        let mut rows = nodes;
        let mut next_row = || {
            rows += 1;
            rows - 1
        };
        let mut e = Engine {
            nodes,
            size: 0,
            h,
            steps,
            shape,
            amplitude: config.drive.amplitude,
            bias: config.drive.bias,
            resistors: Vec::new(),
            caps: Vec::new(),
            inds: Vec::new(),
            sources: Vec::new(),
            ports: Vec::new(),
            lines: Vec::new(),
            fets: Vec::new(),
            load: (None, None, 0.0),
            x: DVector::zeros(0),
            rhs: DVector::zeros(0),
            next: DVector::zeros(0),
            inverses: Vec::new(),
            comp: None,
            step_index: 0,
            euler_left: 2,
            switch_state: false,
        };
        let v = &dc.v;
        let mut init_branch = Vec::new();
        let mut load = None;
        for (k, p) in circuit.prims.iter().enumerate() {
            match *p {
                Prim::R { a, b, r } => e.resistors.push((a, b, 1.0 / r)),
                Prim::C { a, b, c } => {
                    e.caps.push(Cap { a, b, c, v: volt(v, a) - volt(v, b), i: 0.0 });
                }
                Prim::L { a, b, l } => {
                    let row = next_row();
                    init_branch.push((row, dc.prim_current[k]));
                    e.inds.push(Ind { a, b, l, row });
                }
                Prim::V { p, n, v: value } => {
                    let row = next_row();
                    init_branch.push((row, dc.prim_current[k]));
                    e.sources.push((p, n, value, row));
                }
                Prim::Port { p, n, z, index } => {
                    if index == 2 {
                        load = Some((p, n, z));
                    }
                    e.ports.push(Port { p, n, z, driven: index == 1 });
                }
                Prim::Line { a, b, z0, delay } => {
                    let lag = delay / h;
                    if lag < 1.0 {
                        return Err(SimError::Unsupported(format!(
                            "line delay {delay:e} s is shorter than the time step {h:e} s"
                        )));
                    }
                    let i = dc.prim_current[k];
                    let init = [volt(v, a), i, volt(v, b), -i];
                    let keep = lag.ceil() as usize + 2;
                    e.lines.push(Line { a, b, z0, lag, hist: History::new(init, keep), e: [0.0; 2] });
                }
                Prim::Fet { g, d, s, model } => {
                    for (p, q, c) in [(g, s, model.cgs), (g, d, model.cgd), (d, s, model.cds)] {
                        if c > 0.0 {
                            e.caps.push(Cap { a: p, b: q, c, v: volt(v, p) - volt(v, q), i: 0.0 });
                        }
                    }
                    let vgs = volt(v, g) - volt(v, s);
                    let vds = volt(v, d) - volt(v, s);
                    let (row, current) = match shape {
                        DriveShape::Square => (Some(next_row()), switch_channel(&model, vgs, vds).current),
                        DriveShape::Sine => (None, model.drain_current(vgs, vds).current),
                    };
                    if let Some(r) = row {
                        init_branch.push((r, current));
                    }
                    e.fets.push(Fet { g, d, s, model, row, current });
                }
            }
        }
        e.load = load.ok_or_else(|| SimError::Unsupported("no port 2 load".into()))?;
        if e.sources.is_empty() {
            return Err(SimError::Unsupported("no DC supply".into()));
        }
        e.size = rows;
        e.x = DVector::zeros(rows);
        e.x.rows_mut(0, nodes).copy_from_slice(&v[..nodes]);
        for (r, i) in init_branch {
            e.x[r] = i;
        }
        e.rhs = DVector::zeros(rows);
        e.next = DVector::zeros(rows);
        if shape == DriveShape::Sine {
            // the channel compensation is built for the trapezoidal matrix
            e.euler_left = 0;
            e.comp = Some(e.compensation()?);
            if config.drive.amplitude > 0.0 {
                e.superpose_phasor(netlist, config.drive.amplitude)?;
            }
        }
        Ok(e)
    }

    /// Adds the small-signal response to the sine drive onto the bias
    /// point so the run starts close to its periodic state.
    fn superpose_phasor(&mut self, netlist: &Netlist, amplitude: f64) -> Result<(), SimError> {
        let ac = AcSystem::new(netlist)?;
        let Some(&(_, p, n, z)) = ac.ports().first() else {
            return Ok(());
        };
        let w = 2.0 * PI * netlist.constants.f0;
        let j = Complex64::new(0.0, 1.0);
        // 2A·sin(ωt) = Re(−j·2A·e^{jωt})
        let scale = -j * 2.0 * amplitude;
        let x: Vec<Complex64> = ac.solve(netlist.constants.f0, &[(p, n, z)])?[0]
            .iter()
            .take(self.nodes)
            .map(|v| v * scale)
            .collect();
        for (xi, v) in self.x.iter_mut().zip(&x).take(self.nodes) {
            *xi += v.re;
        }
        for l in &self.inds {
            let vl = volt(&x, l.a) - volt(&x, l.b);
            self.x[l.row] += (vl / (j * w * l.l)).re;
        }
        for c in &mut self.caps {
            let vc = volt(&x, c.a) - volt(&x, c.b);
            c.v += vc.re;
            c.i += (j * w * c.c * vc).re;
        }
        let h = self.h;
        for l in &mut self.lines {
            let theta = w * l.lag * h;
            let y11 = Complex64::new(0.0, -1.0 / (l.z0 * theta.tan()));
            let y12 = Complex64::new(0.0, 1.0 / (l.z0 * theta.sin()));
            let (va, vb) = (volt(&x, l.a), volt(&x, l.b));
            let ia = y11 * va + y12 * vb;
            let ib = y12 * va + y11 * vb;
            l.hist.add(|age| {
                let rot = Complex64::from_polar(1.0, w * age as f64 * h);
                [(va * rot).re, (ia * rot).re, (vb * rot).re, (ib * rot).re]
            });
        }
        let xs = self.x.as_slice();
        for f in &mut self.fets {
            let vgs = volt(xs, f.g) - volt(xs, f.s);
            let vds = volt(xs, f.d) - volt(xs, f.s);
            f.current = f.model.drain_current(vgs, vds).current;
        }
        Ok(())
    }

    fn matrix(&self, method: Method, on: bool) -> DMatrix<f64> {
        let mut sys = Mna::<f64>::new(self.nodes, self.size - self.nodes);
        for i in 0..self.nodes {
            sys.m[(i, i)] += GMIN;
        }
        for &(a, b, g) in &self.resistors {
            sys.admittance(a, b, g);
        }
        let k = if method == Method::Trapezoidal { 2.0 } else { 1.0 };
        for c in &self.caps {
            sys.admittance(c.a, c.b, k * c.c / self.h);
        }
        for l in &self.inds {
            sys.branch(l.row - self.nodes, l.a, l.b, 0.0);
            sys.m[(l.row, l.row)] -= k * l.l / self.h;
        }
        for &(p, n, _, row) in &self.sources {
            sys.branch(row - self.nodes, p, n, 0.0);
        }
        for p in &self.ports {
            sys.admittance(p.p, p.n, 1.0 / p.z);
        }
        for l in &self.lines {
            sys.add(l.a, l.a, 1.0 / l.z0);
            sys.add(l.b, l.b, 1.0 / l.z0);
        }
        for f in &self.fets {
            if let Some(row) = f.row {
                sys.branch(row - self.nodes, f.d, f.s, 0.0);
                let r = if on { f.model.ron } else { f.model.roff };
                sys.m[(row, row)] -= r;
            }
        }
        sys.m
    }

    fn inverse(&mut self, method: Method, on: bool) -> Result<usize, SimError> {
        if let Some(i) = self.inverses.iter().position(|(k, _)| *k == (method, on)) {
            return Ok(i);
        }
        let lu = self.matrix(method, on).lu();
        if !lu.is_invertible() {
            return Err(SimError::Singular);
        }
        self.inverses.push(((method, on), lu));
        Ok(self.inverses.len() - 1)
    }

    fn compensation(&mut self) -> Result<Compensation, SimError> {
        let idx = self.inverse(Method::Trapezoidal, false)?;
        let lu = &self.inverses[idx].1;
        // channel current leaves the drain and enters the source
        let mut z = Vec::with_capacity(self.fets.len());
        for f in &self.fets {
            let mut u = DVector::zeros(self.size);
            if let Some(s) = f.s {
                u[s] += 1.0;
            }
            if let Some(d) = f.d {
                u[d] -= 1.0;
            }
            z.push(lu.solve(&u).ok_or(SimError::Singular)?);
        }
        let k = self.fets.len();
        let mut m_gs = DMatrix::zeros(k, k);
        let mut m_ds = DMatrix::zeros(k, k);
        for (j, f) in self.fets.iter().enumerate() {
            for (m, zm) in z.iter().enumerate() {
                let zs = zm.as_slice();
                m_gs[(j, m)] = volt(zs, f.g) - volt(zs, f.s);
                m_ds[(j, m)] = volt(zs, f.d) - volt(zs, f.s);
            }
        }
        Ok(Compensation { z, m_gs, m_ds })
    }

    /// Sign of the drive waveform at the middle of the step ending at
    /// sample `k`.
    fn square_at(&self, k: u64) -> f64 {
        let phase = ((k % self.steps as u64) as f64 - 0.5) / self.steps as f64;
        let s = (2.0 * PI * phase).sin();
        if s > 0.0 {
            1.0
        } else if s < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    fn emf(&self, k: u64) -> f64 {
        match self.shape {
            DriveShape::Sine => {
                let phase = (k % self.steps as u64) as f64 / self.steps as f64;
                self.bias + 2.0 * self.amplitude * (2.0 * PI * phase).sin()
            }
            DriveShape::Square => self.bias + 2.0 * self.amplitude * self.square_at(k),
        }
    }

    fn switch_on_at(&self, k: u64) -> bool {
        let f = &self.fets[0];
        self.bias + self.amplitude * self.square_at(k) > f.model.vth
    }

    fn step(&mut self) -> Result<(), SimError> {
        let k = self.step_index + 1;
        let on = self.shape == DriveShape::Square && self.switch_on_at(k);
        if self.shape == DriveShape::Square && on != self.switch_state {
            self.switch_state = on;
            self.euler_left = 2;
        }
        let method = if self.euler_left > 0 {
            self.euler_left -= 1;
            Method::Euler
        } else {
            Method::Trapezoidal
        };
        let inv_idx = self.inverse(method, on)?;
        let kf = if method == Method::Trapezoidal { 2.0 } else { 1.0 };

        let e_drive = self.emf(k);
        self.rhs.fill(0.0);
        let xs = self.x.as_slice();
        let rhs = self.rhs.as_mut_slice();
        let inject = |rhs: &mut [f64], n: Node, i: f64| {
            if let Some(n) = n {
                rhs[n] += i;
            }
        };
        for c in &self.caps {
            let g = kf * c.c / self.h;
            let ieq = g * c.v + if method == Method::Trapezoidal { c.i } else { 0.0 };
            inject(rhs, c.a, ieq);
            inject(rhs, c.b, -ieq);
        }
        for l in &self.inds {
            let req = kf * l.l / self.h;
            let i_old = xs[l.row];
            rhs[l.row] = match method {
                Method::Trapezoidal => -(volt(xs, l.a) - volt(xs, l.b)) - req * i_old,
                Method::Euler => -req * i_old,
            };
        }
        for &(_, _, v, row) in &self.sources {
            rhs[row] = v;
        }
        for p in &self.ports {
            if p.driven {
                inject(rhs, p.p, e_drive / p.z);
                inject(rhs, p.n, -e_drive / p.z);
            }
        }
        let pos = k as f64;
        for l in &mut self.lines {
            let past = l.hist.at(pos - l.lag);
            l.e = [past[2] + l.z0 * past[3], past[0] + l.z0 * past[1]];
            inject(rhs, l.a, l.e[0] / l.z0);
            inject(rhs, l.b, l.e[1] / l.z0);
        }

        self.next.copy_from(&self.rhs);
        if !self.inverses[inv_idx].1.solve_mut(&mut self.next) {
            return Err(SimError::Singular);
        }
        if let Some(comp) = &self.comp {
            let currents = solve_channels(&self.fets, comp, self.next.as_slice())
                .ok_or(SimError::Newton { time: k as f64 * self.h })?;
            for (j, i) in currents.iter().enumerate() {
                self.next.axpy(*i, &comp.z[j], 1.0);
                self.fets[j].current = *i;
            }
        }

        let xn = self.next.as_slice();
        for c in &mut self.caps {
            let v = volt(xn, c.a) - volt(xn, c.b);
            let g = kf * c.c / self.h;
            c.i = match method {
                Method::Trapezoidal => g * (v - c.v) - c.i,
                Method::Euler => g * (v - c.v),
            };
            c.v = v;
        }
        for l in &mut self.lines {
            let va = volt(xn, l.a);
            let vb = volt(xn, l.b);
            l.hist.push([va, (va - l.e[0]) / l.z0, vb, (vb - l.e[1]) / l.z0]);
        }
        for f in &mut self.fets {
            if let Some(row) = f.row {
                f.current = xn[row];
            }
        }
        std::mem::swap(&mut self.x, &mut self.next);
        self.step_index = k;
        Ok(())
    }

    /// Everything the next period depends on, flattened.
    fn state(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.x.iter().copied().collect();
        for c in &self.caps {
            s.push(c.v);
            s.push(c.i);
        }
        for l in &self.lines {
            for h in &l.hist.samples {
                s.extend_from_slice(h);
            }
        }
        s
    }

    fn set_state(&mut self, s: &[f64]) {
        let mut it = s.iter().copied();
        for v in self.x.iter_mut() {
            *v = it.next().expect("state length");
        }
        for c in &mut self.caps {
            c.v = it.next().expect("state length");
            c.i = it.next().expect("state length");
        }
        for l in &mut self.lines {
            for h in l.hist.samples.iter_mut() {
                for v in h.iter_mut() {
                    *v = it.next().expect("state length");
                }
            }
        }
        for f in &mut self.fets {
            if let Some(row) = f.row {
                f.current = self.x[row];
            }
        }
    }

    fn sample(&self) -> [f64; 4] {
        let xs = self.x.as_slice();
        let f = self.fets.last().expect("at least one transistor");
        let v_drain = volt(xs, f.d) - volt(xs, f.s);
        let v_load = volt(xs, self.load.0) - volt(xs, self.load.1);
        let i_choke: f64 = self.sources.iter().map(|&(_, _, _, row)| -xs[row]).sum();
        [v_drain, f.current, v_load, i_choke]
    }

    fn conducting(&self) -> bool {
        match self.shape {
            DriveShape::Square => self.switch_state,
            DriveShape::Sine => {
                let xs = self.x.as_slice();
                let f = self.fets.last().expect("at least one transistor");
                volt(xs, f.g) - volt(xs, f.s) > f.model.vth
            }
        }
    }

    /// Integrates one period, returning its samples and the sample one
    /// period after the first.
    fn period(&mut self) -> Result<Period, SimError> {
        let mut samples = Vec::with_capacity(self.steps);
        let mut on = Vec::with_capacity(self.steps);
        for _ in 0..self.steps {
            samples.push(self.sample());
            on.push(self.conducting());
            self.step()?;
        }
        Ok((samples, on, self.sample()))
    }
}

/// Newton iteration for the channel currents given the linear response
/// `y` with all channels open.
fn solve_channels(fets: &[Fet], comp: &Compensation, y: &[f64]) -> Option<Vec<f64>> {
    let k = fets.len();
    let y_gs: Vec<f64> = fets.iter().map(|f| volt(y, f.g) - volt(y, f.s)).collect();
    let y_ds: Vec<f64> = fets.iter().map(|f| volt(y, f.d) - volt(y, f.s)).collect();
    let mut i: Vec<f64> = fets.iter().map(|f| f.current).collect();
    for _ in 0..100 {
        let mut jac = DMatrix::<f64>::identity(k, k);
        let mut res = DVector::<f64>::zeros(k);
        for j in 0..k {
            let mut vgs = y_gs[j];
            let mut vds = y_ds[j];
            for (m, im) in i.iter().enumerate() {
                vgs += comp.m_gs[(j, m)] * im;
                vds += comp.m_ds[(j, m)] * im;
            }
            let ev = fets[j].model.drain_current(vgs, vds);
            res[j] = i[j] - ev.current;
            for m in 0..k {
                jac[(j, m)] -= ev.d_vgs * comp.m_gs[(j, m)] + ev.d_vds * comp.m_ds[(j, m)];
            }
        }
        let delta = jac.lu().solve(&res)?;
        let mut largest = 0.0f64;
        let mut scale = 1e-3f64;
        for j in 0..k {
            i[j] -= delta[j];
            largest = largest.max(delta[j].abs());
            scale = scale.max(i[j].abs());
        }
        if !largest.is_finite() {
            return None;
        }
        if largest <= 1e-13 * scale {
            return Some(i);
        }
    }
    None
}

/// Largest change between two periods relative to the peak of the same
/// quantity; voltages and currents share one scale each so a signal that
/// sits at zero is judged against its partner.
fn relative_delta(a: &[[f64; 4]], b: &[[f64; 4]]) -> f64 {
    let peak = |s: usize| a.iter().fold(0.0f64, |m, v| m.max(v[s].abs()));
    let volts = peak(0).max(peak(2));
    let amps = peak(1).max(peak(3));
    let mut worst = 0.0f64;
    for (s, scale) in [(0, volts), (1, amps), (2, volts), (3, amps)] {
        if scale < 1e-15 {
            continue;
        }
        let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x[s] - y[s]).abs()));
        worst = worst.max(diff / scale);
    }
    worst
}

/// Runs the circuit from its DC bias point until successive periods agree
/// within `config.convergence_tol` and returns the final period.
///
/// Square drive replaces the single transistor by a two-state `ron`/`roff`
/// switch; sine drive uses the smooth channel of every transistor. The
/// waveforms refer to the last transistor in netlist order.
pub fn simulate(netlist: &Netlist, config: &SimConfig) -> Result<WaveformRecord, SimError> {
    config.validate()?;
    let mut eng = Engine::new(netlist, config)?;
    run_to_steady(&mut eng, netlist, config)
}

/// Sine-drive runs at several amplitudes, each started from the final
/// state of the previous one. Per-run failures are reported in place.
pub fn simulate_amplitudes(
    netlist: &Netlist,
    config: &SimConfig,
    amplitudes: &[f64],
) -> Result<Vec<Result<WaveformRecord, SimError>>, SimError> {
    let Some(&first) = amplitudes.first() else {
        return Ok(Vec::new());
    };
    let mut cfg = *config;
    cfg.drive.amplitude = first;
    cfg.validate()?;
    let mut eng = Engine::new(netlist, &cfg)?;
    let mut out = Vec::with_capacity(amplitudes.len());
    let mut restart = false;
    for (i, &a) in amplitudes.iter().enumerate() {
        cfg.drive.amplitude = a;
        if let Err(e) = cfg.validate() {
            out.push(Err(e));
            continue;
        }
        if i > 0 {
            if restart {
                // a failed point leaves no usable state behind
                eng = Engine::new(netlist, &cfg)?;
            } else {
                if cfg.drive.shape == DriveShape::Sine {
                    eng.superpose_phasor(netlist, a - eng.amplitude)?;
                }
                eng.amplitude = a;
            }
        }
        let r = run_to_steady(&mut eng, netlist, &cfg);
        restart = r.is_err();
        out.push(r);
    }
    Ok(out)
}

/// Period-boundary states kept for one extrapolation.
const EXTRAPOLATION_WINDOW: usize = 8;
/// Extrapolation starts once successive periods differ by less than this.
const EXTRAPOLATION_START: f64 = 1e-2;

/// Reduced-rank extrapolation of the period map from the consecutive
/// states `s`.
fn extrapolate(s: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = s.len() - 1;
    let dim = s[0].len();
    let u = DMatrix::from_fn(dim, m, |r, c| s[c + 1][r] - s[c][r]);
    let mut gram = u.transpose() * &u;
    let scale = gram.trace() / m as f64;
    if !(scale > 0.0) {
        return None;
    }
    for i in 0..m {
        gram[(i, i)] += 1e-13 * scale;
    }
    let y = gram.lu().solve(&DVector::from_element(m, 1.0))?;
    let total: f64 = y.iter().sum();
    if !(total.is_finite() && total != 0.0) {
        return None;
    }
    let mut out = vec![0.0; dim];
    for (c, w) in y.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(&s[c + 1]) {
            *o += w / total * v;
        }
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn run_to_steady(eng: &mut Engine, netlist: &Netlist, config: &SimConfig) -> Result<WaveformRecord, SimError> {
    let mut prev: Option<Vec<[f64; 4]>> = None;
    let mut delta = f64::INFINITY;
    let mut states = vec![eng.state()];
    for period in 1..=config.max_periods {
        let (samples, on, closing) = eng.period()?;
        if let Some(p) = &prev {
            delta = relative_delta(&samples, p);
            if delta < config.convergence_tol {
                let n = samples.len();
                let col = |s: usize| samples.iter().map(|v| v[s]).collect::<Vec<_>>();
                return Ok(WaveformRecord {
                    f0: netlist.constants.f0,
                    time: (0..n).map(|k| k as f64 * eng.h).collect(),
                    v_drain: col(0),
                    i_drain: col(1),
                    v_load: col(2),
                    i_choke: col(3),
                    switch_on: on,
                    load_resistance: eng.load.2,
                    closing,
                    periods: period,
                    delta,
                });
            }
        }
        prev = Some(samples);
        states.push(eng.state());
        if states.len() == EXTRAPOLATION_WINDOW + 1 {
            if delta < EXTRAPOLATION_START {
                if let Some(next) = extrapolate(&states) {
                    eng.set_state(&next);
                    prev = None;
                }
            }
            states.clear();
            states.push(eng.state());
        }
    }
    Err(SimError::NotConverged { periods: config.max_periods, delta })
}
