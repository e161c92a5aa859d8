//! Grid data model: buses, branches, generators and their per-unit limits.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Generator,
    Load,
}

/// A bus with its voltage bounds and nominal demand, all per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// Dense index, equal to the bus position in [`Network::buses`].
    pub id: usize,
    /// Bus number as it appeared in the source case.
    pub label: u64,
    pub kind: BusKind,
    pub v_min: f64,
    pub v_max: f64,
    pub p_load: f64,
    pub q_load: f64,
}

/// A π-model line. The series admittance is written `g - j b`, so `b > 0`
/// for an inductive line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub g: f64,
    pub b: f64,
    /// Total line charging susceptance.
    pub b_charge: f64,
    /// Apparent power limit; `None` means unbounded.
    pub s_max: Option<f64>,
    pub in_service: bool,
}

impl Branch {
    /// Self susceptance term appearing in the reactive flow, `b - b_charge / 2`.
    pub fn b_hat(&self) -> f64 {
        self.b - 0.5 * self.b_charge
    }
}

/// `c(P) = c2 P^2 + c1 P + c0` with `P` in per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostPolynomial {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl CostPolynomial {
    pub fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Self { c0, c1, c2 }
    }

    pub fn linear(c1: f64) -> Self {
        Self::new(0.0, c1, 0.0)
    }

    pub fn eval(&self, p: f64) -> f64 {
        (self.c2 * p + self.c1) * p + self.c0
    }

    pub fn derivative(&self, p: f64) -> f64 {
        2.0 * self.c2 * p + self.c1
    }

    /// Coefficient-wise sum; the cost of two units sharing one dispatch.
    pub fn add(&self, other: &CostPolynomial) -> CostPolynomial {
        CostPolynomial::new(self.c0 + other.c0, self.c1 + other.c1, self.c2 + other.c2)
    }

    /// Minimizer of `c(P) - price * P` over `[lo, hi]`.
    pub fn best_response(&self, price: f64, lo: f64, hi: f64) -> f64 {
        if self.c2 > 0.0 {
            ((price - self.c1) / (2.0 * self.c2)).clamp(lo, hi)
        } else if price > self.c1 {
            hi
        } else {
            lo
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub cost: CostPolynomial,
}

/// Per-bus active and reactive demand in per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl LoadProfile {
    pub fn zeros(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `[p..., q...]`, the layout fed to the learned models.
    pub fn to_features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.p.len());
        out.extend_from_slice(&self.p);
        out.extend_from_slice(&self.q);
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("network has no slack bus")]
    NoSlack,
    #[error("network has more than one slack bus ({0} and {1})")]
    MultipleSlack(usize, usize),
    #[error("bus at position {position} carries id {id}; ids must be dense")]
    NonDenseIds { position: usize, id: usize },
    #[error("{0} references bus {1}, which does not exist")]
    DanglingBus(&'static str, usize),
    #[error("more than one generator at bus {0}")]
    DuplicateGenerator(usize),
}

/// An immutable grid description in per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    slack: usize,
    gen_of_bus: Vec<Option<usize>>,
}

impl Network {
    /// Builds the network and its bus-to-generator index. Only structural
    /// problems that would break indexing are rejected here; everything else
    /// is reported by [`validate`].
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
    ) -> Result<Self, NetworkError> {
        let n = buses.len();
        let mut slack = None;
        for (position, bus) in buses.iter().enumerate() {
            if bus.id != position {
                return Err(NetworkError::NonDenseIds { position, id: bus.id });
            }
            if bus.kind == BusKind::Slack {
                if let Some(first) = slack {
                    return Err(NetworkError::MultipleSlack(first, position));
                }
                slack = Some(position);
            }
        }
        let slack = slack.ok_or(NetworkError::NoSlack)?;
        for br in &branches {
            for end in [br.from, br.to] {
                if end >= n {
                    return Err(NetworkError::DanglingBus("branch", end));
                }
            }
        }
        let mut gen_of_bus = vec![None; n];
        for (k, gen) in generators.iter().enumerate() {
            if gen.bus >= n {
                return Err(NetworkError::DanglingBus("generator", gen.bus));
            }
            if gen_of_bus[gen.bus].replace(k).is_some() {
                return Err(NetworkError::DuplicateGenerator(gen.bus));
            }
        }
        Ok(Self {
            base_mva,
            buses,
            branches,
            generators,
            slack,
            gen_of_bus,
        })
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn generator_at(&self, bus: usize) -> Option<&Generator> {
        self.gen_of_bus[bus].map(|k| &self.generators[k])
    }

    pub fn has_generator(&self, bus: usize) -> bool {
        self.gen_of_bus[bus].is_some()
    }

    /// Bus indices carrying a generator, ascending.
    pub fn generator_buses(&self) -> Vec<usize> {
        (0..self.n_bus()).filter(|&i| self.has_generator(i)).collect()
    }

    pub fn in_service_branches(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|br| br.in_service)
    }

    /// Hex digest identifying this exact network (topology, parameters, limits).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |x: f64| h.update(x.to_bits().to_le_bytes());
        put(self.base_mva);
        put(self.slack as f64);
        for bus in &self.buses {
            put(bus.label as f64);
            put(bus.kind as u8 as f64);
            for x in [bus.v_min, bus.v_max, bus.p_load, bus.q_load] {
                put(x);
            }
        }
        for br in &self.branches {
            put(br.from as f64);
            put(br.to as f64);
            for x in [br.g, br.b, br.b_charge, br.s_max.unwrap_or(-1.0)] {
                put(x);
            }
            put(if br.in_service { 1.0 } else { 0.0 });
        }
        for gen in &self.generators {
            put(gen.bus as f64);
            for x in [
                gen.p_min,
                gen.p_max,
                gen.q_min,
                gen.q_max,
                gen.cost.c0,
                gen.cost.c1,
                gen.cost.c2,
            ] {
                put(x);
            }
        }
        hex::encode(&h.finalize()[..16])
    }

    /// A copy of this network with every bus demand replaced by `load`.
    pub fn with_nominal_load(&self, load: &LoadProfile) -> Network {
        let mut out = self.clone();
        for (bus, (&p, &q)) in out.buses.iter_mut().zip(load.p.iter().zip(&load.q)) {
            bus.p_load = p;
            bus.q_load = q;
        }
        out
    }
}

/// Nominal demand of every bus.
pub fn nominal_load(net: &Network) -> LoadProfile {
    LoadProfile {
        p: net.buses().iter().map(|b| b.p_load).collect(),
        q: net.buses().iter().map(|b| b.q_load).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationCode {
    VoltageBounds,
    Disconnected,
    SelfLoop,
    FlowLimit,
    GenBounds,
    CostShape,
    NonFinite,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::VoltageBounds => "VOLTAGE_BOUNDS",
            ViolationCode::Disconnected => "DISCONNECTED",
            ViolationCode::SelfLoop => "SELF_LOOP",
            ViolationCode::FlowLimit => "FLOW_LIMIT",
            ViolationCode::GenBounds => "GEN_BOUNDS",
            ViolationCode::CostShape => "COST_SHAPE",
            ViolationCode::NonFinite => "NON_FINITE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Bus(usize),
    Branch(usize),
    Generator(usize),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Bus(i) => write!(f, "bus/{i}"),
            Element::Branch(i) => write!(f, "branch/{i}"),
            Element::Generator(i) => write!(f, "gen/{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub code: ViolationCode,
    pub element: Element,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.code.as_str(), self.element, self.message)
    }
}

/// Every invariant violation of `net`. Never mutates; an empty list means valid.
pub fn validate(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, element, message: String| out.push(Violation { code, element, message });

    for bus in net.buses() {
        let el = Element::Bus(bus.id);
        if [bus.v_min, bus.v_max, bus.p_load, bus.q_load]
            .iter()
            .any(|x| !x.is_finite())
        {
            push(ViolationCode::NonFinite, el, "non-finite bus data".into());
        }
        if !(bus.v_min > 0.0 && bus.v_min <= bus.v_max) {
            push(
                ViolationCode::VoltageBounds,
                el,
                format!("need 0 < v_min <= v_max, got [{}, {}]", bus.v_min, bus.v_max),
            );
        }
    }

    for (k, br) in net.branches().iter().enumerate() {
        let el = Element::Branch(k);
        if br.from == br.to {
            push(ViolationCode::SelfLoop, el, format!("both ends at bus {}", br.from));
        }
        if ![br.g, br.b, br.b_charge].iter().all(|x| x.is_finite()) {
            push(ViolationCode::NonFinite, el, "non-finite admittance".into());
        }
        if let Some(s) = br.s_max {
            if !(s > 0.0) {
                push(ViolationCode::FlowLimit, el, format!("s_max must be positive, got {s}"));
            }
        }
    }

    for (k, gen) in net.generators().iter().enumerate() {
        let el = Element::Generator(k);
        if gen.p_min > gen.p_max || gen.q_min > gen.q_max {
            push(
                ViolationCode::GenBounds,
                el,
                format!(
                    "bounds p [{}, {}] q [{}, {}]",
                    gen.p_min, gen.p_max, gen.q_min, gen.q_max
                ),
            );
        }
        let c = gen.cost;
        if ![c.c0, c.c1, c.c2].iter().all(|x| x.is_finite()) {
            push(ViolationCode::NonFinite, el, "non-finite cost".into());
        } else if c.c2 < 0.0 {
            push(ViolationCode::CostShape, el, format!("c2 = {} is negative", c.c2));
        } else if c.derivative(gen.p_min) < 0.0 {
            push(
                ViolationCode::CostShape,
                el,
                format!("cost decreasing at p_min = {}", gen.p_min),
            );
        }
    }

    let reached = reachable_from(net, net.slack());
    for (i, seen) in reached.iter().enumerate() {
        if !seen {
            push(
                ViolationCode::Disconnected,
                Element::Bus(i),
                format!("no in-service path to slack bus {}", net.slack()),
            );
        }
    }
    out
}

fn reachable_from(net: &Network, start: usize) -> Vec<bool> {
    let n = net.n_bus();
    let mut adj = vec![Vec::new(); n];
    for br in net.in_service_branches() {
        adj[br.from].push(br.to);
        adj[br.to].push(br.from);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}
