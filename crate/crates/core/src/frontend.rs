//! Benchmark circuit generators and circuit-to-pattern translation.
//!
//! Every circuit is lowered to the `{J(α), CZ}` basis before translation:
//!
//! | gate        | rewrite                                              |
//! |-------------|------------------------------------------------------|
//! | `H`         | `J(0)`                                               |
//! | `RZ(θ)`     | `J(θ)` then `J(0)`                                   |
//! | `CNOT(c,t)` | `J(0)` on t, `CZ(c,t)`, `J(0)` on t                  |
//! | `CP(θ)`     | `RZ(θ/2)` on both, `CNOT`, `RZ(−θ/2)` on t, `CNOT`   |
//!
//! Translation keeps one chain per wire. `J(α)` grows the chain by one node,
//! records angle `−α` on the node it leaves behind and adds an X-dependency
//! from that node to the new head. `CZ` fuses the two current heads. Z
//! dependencies never enter the real-time DAG.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BundleMeta, ComputationGraph, DependencyGraph, Measurement, ModelError, ProgramBundle};

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("{family} cannot be built on {qubits} qubits: {reason}")]
    UnsupportedSize { family: Family, qubits: usize, reason: String },
    #[error("CZ on wires ({0}, {1}) would repeat a fusion between the same chain heads")]
    RepeatedFusion(usize, usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("circuit json: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    J { q: usize, angle: f64 },
    Cz { a: usize, b: usize },
    Cnot { control: usize, target: usize },
    H { q: usize },
    Rz { q: usize, angle: f64 },
    Cp { a: usize, b: usize, angle: f64 },
}

impl Gate {
    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cz { .. } | Gate::Cnot { .. } | Gate::Cp { .. })
    }

    pub fn operands(&self) -> Vec<usize> {
        match *self {
            Gate::J { q, .. } | Gate::H { q } | Gate::Rz { q, .. } => vec![q],
            Gate::Cz { a, b } | Gate::Cp { a, b, .. } => vec![a, b],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Gate::J { .. } => "J",
            Gate::Cz { .. } => "CZ",
            Gate::Cnot { .. } => "CNOT",
            Gate::H { .. } => "H",
            Gate::Rz { .. } => "RZ",
            Gate::Cp { .. } => "CP",
        }
    }

    fn angle(&self) -> Option<f64> {
        match *self {
            Gate::J { angle, .. } | Gate::Rz { angle, .. } | Gate::Cp { angle, .. } => Some(angle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub qubits: usize,
    pub gates: Vec<Gate>,
}

#[derive(Serialize, Deserialize)]
struct GateRecord {
    kind: String,
    q: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    qubits: usize,
    gates: Vec<GateRecord>,
}

impl Circuit {
    pub fn new(qubits: usize, gates: Vec<Gate>) -> Result<Self, FrontendError> {
        let c = Circuit { qubits, gates };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), FrontendError> {
        for (i, g) in self.gates.iter().enumerate() {
            let ops = g.operands();
            if let Some(&q) = ops.iter().find(|&&q| q >= self.qubits) {
                return Err(FrontendError::InvalidCircuit(format!(
                    "gate {i} ({}) uses qubit {q} but the circuit has {} qubits",
                    g.kind(),
                    self.qubits
                )));
            }
            if ops.len() == 2 && ops[0] == ops[1] {
                return Err(FrontendError::InvalidCircuit(format!("gate {i} ({}) repeats operand {}", g.kind(), ops[0])));
            }
            if g.angle().is_some_and(|a| !a.is_finite()) {
                return Err(FrontendError::InvalidCircuit(format!("gate {i} has a non-finite angle")));
            }
        }
        Ok(())
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    pub fn to_json(&self) -> String {
        let file = CircuitFile {
            qubits: self.qubits,
            gates: self
                .gates
                .iter()
                .map(|g| GateRecord { kind: g.kind().to_string(), q: g.operands(), angle: g.angle() })
                .collect(),
        };
        let mut s = serde_json::to_string(&file).expect("circuit serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FrontendError> {
        let file: CircuitFile = serde_json::from_str(text).map_err(|e| FrontendError::Parse(e.to_string()))?;
        let mut gates = Vec::with_capacity(file.gates.len());
        for (i, r) in file.gates.into_iter().enumerate() {
            let bad = |msg: &str| FrontendError::InvalidCircuit(format!("gate {i} ({}): {msg}", r.kind));
            let angle = || r.angle.ok_or_else(|| bad("missing angle"));
            let one = || if r.q.len() == 1 { Ok(r.q[0]) } else { Err(bad("expects one operand")) };
            let two = || if r.q.len() == 2 { Ok((r.q[0], r.q[1])) } else { Err(bad("expects two operands")) };
            let g = match r.kind.as_str() {
                "J" => Gate::J { q: one()?, angle: angle()? },
                "H" => Gate::H { q: one()? },
                "RZ" => Gate::Rz { q: one()?, angle: angle()? },
                "CZ" => {
                    let (a, b) = two()?;
                    Gate::Cz { a, b }
                }
                "CNOT" => {
                    let (control, target) = two()?;
                    Gate::Cnot { control, target }
                }
                "CP" => {
                    let (a, b) = two()?;
                    Gate::Cp { a, b, angle: angle()? }
                }
                other => return Err(FrontendError::InvalidCircuit(format!("gate {i}: unknown kind {other:?}"))),
            };
            gates.push(g);
        }
        Circuit::new(file.qubits, gates)
    }

    /// Lowers to `J` and `CZ` only.
    pub fn rewrite(&self) -> Vec<Gate> {
        let mut out = Vec::with_capacity(self.gates.len() * 4);
        for g in &self.gates {
            lower(*g, &mut out);
        }
        out
    }
}

fn lower(g: Gate, out: &mut Vec<Gate>) {
    match g {
        Gate::J { .. } | Gate::Cz { .. } => out.push(g),
        Gate::H { q } => out.push(Gate::J { q, angle: 0.0 }),
        Gate::Rz { q, angle } => {
            out.push(Gate::J { q, angle });
            out.push(Gate::J { q, angle: 0.0 });
        }
        Gate::Cnot { control, target } => {
            out.push(Gate::J { q: target, angle: 0.0 });
            out.push(Gate::Cz { a: control, b: target });
            out.push(Gate::J { q: target, angle: 0.0 });
        }
        Gate::Cp { a, b, angle } => {
            lower(Gate::Rz { q: a, angle: angle / 2.0 }, out);
            lower(Gate::Rz { q: b, angle: angle / 2.0 }, out);
            lower(Gate::Cnot { control: a, target: b }, out);
            lower(Gate::Rz { q: b, angle: -angle / 2.0 }, out);
            lower(Gate::Cnot { control: a, target: b }, out);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Qft,
    Qaoa,
    Vqe,
    Rca,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Qft => "qft",
            Family::Qaoa => "qaoa",
            Family::Vqe => "vqe",
            Family::Rca => "rca",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qft" => Ok(Family::Qft),
            "qaoa" => Ok(Family::Qaoa),
            "vqe" => Ok(Family::Vqe),
            "rca" => Ok(Family::Rca),
            _ => Err(format!("unknown benchmark family {s:?} (expected qft, qaoa, vqe or rca)")),
        }
    }
}

fn random_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-PI..PI)
}

/// Builds one benchmark circuit. Output is a pure function of the arguments.
pub fn gen_benchmark(family: Family, qubits: usize, seed: u64) -> Result<Circuit, FrontendError> {
    if qubits < 2 {
        return Err(FrontendError::UnsupportedSize { family, qubits, reason: "need at least 2 qubits".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = match family {
        Family::Qft => qft(qubits),
        Family::Vqe => vqe(qubits, &mut rng),
        Family::Qaoa => qaoa(qubits, &mut rng),
        Family::Rca => rca(qubits)?,
    };
    Circuit::new(qubits, gates)
}

fn qft(n: usize) -> Vec<Gate> {
    let mut g = Vec::new();
    for i in 0..n {
        g.push(Gate::H { q: i });
        for j in i + 1..n {
            g.push(Gate::Cp { a: j, b: i, angle: PI / (1u64 << (j - i).min(62)) as f64 });
        }
    }
    g
}

fn rotation_layer(n: usize, rng: &mut ChaCha8Rng, g: &mut Vec<Gate>) {
    for q in 0..n {
        g.push(Gate::Rz { q, angle: random_angle(rng) });
        g.push(Gate::H { q });
        g.push(Gate::Rz { q, angle: random_angle(rng) });
    }
}

/// Hardware-efficient ansatz with one fully entangling CNOT layer.
fn vqe(n: usize, rng: &mut ChaCha8Rng) -> Vec<Gate> {
    let mut g = Vec::new();
    rotation_layer(n, rng, &mut g);
    for i in 0..n {
        for j in i + 1..n {
            g.push(Gate::Cnot { control: i, target: j });
        }
    }
    rotation_layer(n, rng, &mut g);
    g
}

/// Edges of the seeded random Max-Cut instance: exactly half (rounded down)
/// of all pairs, drawn by shuffling, returned sorted.
pub fn qaoa_edges(n: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    maxcut_edges(n, &mut rng)
}

fn maxcut_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let keep = pairs.len() / 2;
    pairs.shuffle(rng);
    pairs.truncate(keep);
    pairs.sort_unstable();
    pairs
}

/// Single-round QAOA: cost layer of one controlled-phase per graph edge, then
/// an X mixer.
fn qaoa(n: usize, rng: &mut ChaCha8Rng) -> Vec<Gate> {
    let edges = maxcut_edges(n, rng);
    let gamma = random_angle(rng);
    let beta = random_angle(rng);
    let mut g: Vec<Gate> = (0..n).map(|q| Gate::H { q }).collect();
    for (u, v) in edges {
        // exp(-iγ Z⊗Z) up to global phase
        g.push(Gate::Cp { a: u, b: v, angle: -4.0 * gamma });
        g.push(Gate::Rz { q: u, angle: 2.0 * gamma });
        g.push(Gate::Rz { q: v, angle: 2.0 * gamma });
    }
    for q in 0..n {
        g.push(Gate::H { q });
        g.push(Gate::Rz { q, angle: 2.0 * beta });
        g.push(Gate::H { q });
    }
    g
}

fn toffoli(a: usize, b: usize, t: usize, g: &mut Vec<Gate>) {
    let tg = PI / 4.0;
    g.extend([
        Gate::H { q: t },
        Gate::Cnot { control: b, target: t },
        Gate::Rz { q: t, angle: -tg },
        Gate::Cnot { control: a, target: t },
        Gate::Rz { q: t, angle: tg },
        Gate::Cnot { control: b, target: t },
        Gate::Rz { q: t, angle: -tg },
        Gate::Cnot { control: a, target: t },
        Gate::Rz { q: b, angle: tg },
        Gate::Rz { q: t, angle: tg },
        Gate::H { q: t },
        Gate::Cnot { control: a, target: b },
        Gate::Rz { q: a, angle: tg },
        Gate::Rz { q: b, angle: -tg },
        Gate::Cnot { control: a, target: b },
    ]);
}

fn maj(x: usize, y: usize, z: usize, g: &mut Vec<Gate>) {
    g.push(Gate::Cnot { control: z, target: y });
    g.push(Gate::Cnot { control: z, target: x });
    toffoli(x, y, z, g);
}

fn uma(x: usize, y: usize, z: usize, g: &mut Vec<Gate>) {
    toffoli(x, y, z, g);
    g.push(Gate::Cnot { control: z, target: x });
    g.push(Gate::Cnot { control: x, target: y });
}

/// Cuccaro ripple-carry adder on `2m + 2` qubits: carry-in at 0, operand
/// bits interleaved as `b_i = 1 + 2i`, `a_i = 2 + 2i`, carry-out last.
/// Uses `16m + 1` two-qubit gates.
fn rca(n: usize) -> Result<Vec<Gate>, FrontendError> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(FrontendError::UnsupportedSize {
            family: Family::Rca,
            qubits: n,
            reason: "ripple-carry layout needs 2m + 2 qubits with m >= 1".into(),
        });
    }
    let m = (n - 2) / 2;
    let b = |i: usize| 1 + 2 * i;
    let a = |i: usize| 2 + 2 * i;
    let carry_in = 0;
    let carry_out = n - 1;
    let mut g = Vec::new();
    maj(carry_in, b(0), a(0), &mut g);
    for i in 1..m {
        maj(a(i - 1), b(i), a(i), &mut g);
    }
    g.push(Gate::Cnot { control: a(m - 1), target: carry_out });
    for i in (1..m).rev() {
        uma(a(i - 1), b(i), a(i), &mut g);
    }
    uma(carry_in, b(0), a(0), &mut g);
    Ok(g)
}

/// Closed-form two-qubit gate count of [`gen_benchmark`], when the family has
/// one.
pub fn expected_two_qubit_count(family: Family, qubits: usize) -> Option<usize> {
    match family {
        Family::Qft | Family::Vqe => Some(qubits * (qubits - 1) / 2),
        Family::Qaoa => Some(qubits * (qubits - 1) / 4),
        Family::Rca if qubits >= 4 && qubits.is_multiple_of(2) => Some(16 * ((qubits - 2) / 2) + 1),
        Family::Rca => None,
    }
}

/// Translates a circuit into a graph state and its post-shifting X-dependency
/// DAG. Every produced node is a measuree.
pub fn translate(circuit: &Circuit) -> Result<ProgramBundle, FrontendError> {
    translate_named(circuit, BundleMeta { name: "circuit".into(), qubits: circuit.qubits, seed: 0, generator: "manual".into() })
}

pub fn translate_named(circuit: &Circuit, meta: BundleMeta) -> Result<ProgramBundle, FrontendError> {
    circuit.validate()?;
    let lowered = circuit.rewrite();
    let j_count = lowered.iter().filter(|g| matches!(g, Gate::J { .. })).count();
    let n = circuit.qubits + j_count;

    let mut heads: Vec<usize> = (0..circuit.qubits).collect();
    let mut angles = vec![0.0; n];
    let mut wires: Vec<Option<u32>> = (0..circuit.qubits).map(|q| Some(q as u32)).collect();
    wires.resize(n, None);
    let mut edges = Vec::with_capacity(lowered.len());
    let mut deps = Vec::with_capacity(j_count);
    let mut seen = std::collections::HashSet::new();
    let mut next = circuit.qubits;

    for g in lowered {
        match g {
            Gate::J { q, angle } => {
                let old = heads[q];
                angles[old] = -angle;
                wires[next] = Some(q as u32);
                edges.push((old, next));
                deps.push((old, next));
                heads[q] = next;
                next += 1;
            }
            Gate::Cz { a, b } => {
                let e = (heads[a].min(heads[b]), heads[a].max(heads[b]));
                if !seen.insert(e) {
                    return Err(FrontendError::RepeatedFusion(a, b));
                }
                edges.push(e);
            }
            _ => unreachable!("rewrite emits J and CZ only"),
        }
    }

    let graph = ComputationGraph::new(n, edges)?.with_wires(wires);
    let deps = DependencyGraph::new(angles.into_iter().map(Measurement::measuree).collect(), deps)?;
    Ok(ProgramBundle::new(meta, graph, deps)?)
}

/// Generates and translates a benchmark in one step.
pub fn benchmark_bundle(family: Family, qubits: usize, seed: u64) -> Result<ProgramBundle, FrontendError> {
    let circuit = gen_benchmark(family, qubits, seed)?;
    translate_named(
        &circuit,
        BundleMeta { name: format!("{family}-{qubits}"), qubits, seed, generator: family.to_string() },
    )
}

/// Folds Pauli byproducts into a measurement angle:
/// `M^α X^s Z^t = M^{(−1)^s α + tπ}`, normalized to `(−π, π]`.
pub fn absorb_correction(angle: f64, s: bool, t: bool) -> f64 {
    let mut a = if s { -angle } else { angle };
    if t {
        a += PI;
    }
    normalize_angle(a)
}

pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    // rem_euclid maps -π to π already; guard the rounding edge
    if r <= -PI {
        r += two_pi;
    }
    r
}
