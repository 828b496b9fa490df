//! Device-independent layer: (n,m,d) Bell scenarios, conditional-probability
//! behaviors, no-signaling verification, local deterministic vertices, Bell
//! functionals with classical bounds, quantum behaviors via the trace
//! formula, and finite-statistics estimation.
//!
//! Outputs are encoded as integers `0..d`; where a ±1 correlator convention
//! is needed (CHSH), output `a` maps to the value `1 - 2a`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::quantum::{born_probabilities, kron, trace, DensityState, PovmElementSet, QuantumError};
use crate::rng::{counter_rng, stream};

/// Hard cap on behavior table cells, (m·d)^n.
const MAX_TABLE_CELLS: u128 = 100_000_000;
/// Hard cap on enumerable local vertices, (d^m)^n.
const MAX_VERTICES: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario table would need {cells} cells (limit {MAX_TABLE_CELLS})")]
    ScenarioTooLarge { cells: u128 },
    #[error("scenario has {vertices} local vertices (enumeration limit {MAX_VERTICES})")]
    TooManyVertices { vertices: u128 },
    #[error("behavior table has {got} entries, scenario needs {want}")]
    TableSizeMismatch { got: usize, want: usize },
    #[error("probability {value:.3e} out of range at flat index {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("conditional block for input {input} sums to {sum:.12}, expected 1")]
    NotNormalized { input: usize, sum: f64 },
    #[error("scenario mismatch between functional and behavior")]
    ScenarioMismatch,
    #[error("quantum layer: {0}")]
    Quantum(#[from] QuantumError),
    #[error("measurement layout invalid: {0}")]
    InvalidMeasurements(String),
    #[error("constructed behavior signals (worst marginal deviation {worst:.3e})")]
    SignalingDetected { worst: f64 },
    #[error("deterministic strategy invalid: {0}")]
    InvalidStrategy(String),
    #[error("local model weights invalid: {0}")]
    InvalidWeights(String),
    #[error("settings distribution invalid: {0}")]
    InvalidSettings(String),
    #[error("simulation needs at least one round")]
    ZeroRounds,
    #[error("no rounds recorded")]
    EmptyRecords,
    #[error("no rounds observed for input tuple {input:?} which carries nonzero coefficients")]
    MissingSettings { input: Vec<usize> },
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    InvalidConfidence(f64),
    #[error("behavior file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// An (n,m,d) scenario: n parties, m inputs per party, d outputs per input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Scenario {
    parties: usize,
    inputs: usize,
    outputs: usize,
}

impl Scenario {
    pub fn new(parties: usize, inputs: usize, outputs: usize) -> Result<Self, BehaviorError> {
        if parties < 1 {
            return Err(BehaviorError::InvalidScenario("need at least one party".into()));
        }
        if inputs < 1 {
            return Err(BehaviorError::InvalidScenario("need at least one input".into()));
        }
        if outputs < 2 {
            return Err(BehaviorError::InvalidScenario("need at least two outputs".into()));
        }
        let cells = (inputs as u128 * outputs as u128)
            .checked_pow(parties as u32)
            .ok_or(BehaviorError::ScenarioTooLarge { cells: u128::MAX })?;
        if cells > MAX_TABLE_CELLS {
            return Err(BehaviorError::ScenarioTooLarge { cells });
        }
        Ok(Self { parties, inputs, outputs })
    }

    /// The standard two-party CHSH scenario (2,2,2).
    pub fn chsh() -> Self {
        Self { parties: 2, inputs: 2, outputs: 2 }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    /// Number of input tuples m^n.
    pub fn input_tuples(&self) -> usize {
        self.inputs.pow(self.parties as u32)
    }

    /// Number of output tuples d^n.
    pub fn output_tuples(&self) -> usize {
        self.outputs.pow(self.parties as u32)
    }

    pub fn table_len(&self) -> usize {
        self.input_tuples() * self.output_tuples()
    }

    /// Flat index of an input tuple, party 0 most significant.
    pub fn input_index(&self, xs: &[usize]) -> usize {
        debug_assert_eq!(xs.len(), self.parties);
        xs.iter().fold(0, |acc, &x| {
            debug_assert!(x < self.inputs);
            acc * self.inputs + x
        })
    }

    /// Flat index of an output tuple, party 0 most significant.
    pub fn output_index(&self, outs: &[usize]) -> usize {
        debug_assert_eq!(outs.len(), self.parties);
        outs.iter().fold(0, |acc, &a| {
            debug_assert!(a < self.outputs);
            acc * self.outputs + a
        })
    }

    pub fn input_tuple(&self, mut index: usize) -> Vec<usize> {
        let mut xs = vec![0; self.parties];
        for k in (0..self.parties).rev() {
            xs[k] = index % self.inputs;
            index /= self.inputs;
        }
        xs
    }

    pub fn output_tuple(&self, mut index: usize) -> Vec<usize> {
        let mut outs = vec![0; self.parties];
        for k in (0..self.parties).rev() {
            outs[k] = index % self.outputs;
            index /= self.outputs;
        }
        outs
    }

    /// Number of local deterministic vertices (d^m)^n.
    pub fn vertex_count(&self) -> u128 {
        (self.outputs as u128)
            .pow(self.inputs as u32)
            .pow(self.parties as u32)
    }
}

/// A behavior: the table of conditional probabilities p(a⃗|x⃗).
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    /// Layout: `table[x_index * d^n + a_index]`.
    table: Vec<f64>,
}

impl Behavior {
    pub fn new(scenario: Scenario, table: Vec<f64>) -> Result<Self, BehaviorError> {
        if table.len() != scenario.table_len() {
            return Err(BehaviorError::TableSizeMismatch {
                got: table.len(),
                want: scenario.table_len(),
            });
        }
        for (i, &p) in table.iter().enumerate() {
            if !p.is_finite() || p < -1e-9 {
                return Err(BehaviorError::NegativeProbability { index: i, value: p });
            }
        }
        let out = scenario.output_tuples();
        for x in 0..scenario.input_tuples() {
            let sum: f64 = table[x * out..(x + 1) * out].iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(BehaviorError::NotNormalized { input: x, sum });
            }
        }
        Ok(Self { scenario, table })
    }

    pub fn from_fn(
        scenario: Scenario,
        f: impl Fn(&[usize], &[usize]) -> f64,
    ) -> Result<Self, BehaviorError> {
        let mut table = vec![0.0; scenario.table_len()];
        let out = scenario.output_tuples();
        for x in 0..scenario.input_tuples() {
            let xs = scenario.input_tuple(x);
            for a in 0..out {
                let outs = scenario.output_tuple(a);
                table[x * out + a] = f(&xs, &outs);
            }
        }
        Self::new(scenario, table)
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn prob(&self, xs: &[usize], outs: &[usize]) -> f64 {
        self.table[self.scenario.input_index(xs) * self.scenario.output_tuples()
            + self.scenario.output_index(outs)]
    }

    pub fn prob_flat(&self, x_index: usize, a_index: usize) -> f64 {
        self.table[x_index * self.scenario.output_tuples() + a_index]
    }

    /// Conditional block p(·|x⃗) for a flat input index.
    pub fn conditional(&self, x_index: usize) -> &[f64] {
        let out = self.scenario.output_tuples();
        &self.table[x_index * out..(x_index + 1) * out]
    }

    /// ±1 correlator ⟨∏ₖ(1-2aₖ)⟩ for one input tuple.
    pub fn correlator(&self, xs: &[usize]) -> f64 {
        let x = self.scenario.input_index(xs);
        let out = self.scenario.output_tuples();
        (0..out)
            .map(|a| {
                let outs = self.scenario.output_tuple(a);
                let sign = if outs.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.table[x * out + a]
            })
            .sum()
    }

    /// Convex mixture λ·b₁ + (1-λ)·b₂.
    pub fn mix(lambda: f64, a: &Behavior, b: &Behavior) -> Result<Behavior, BehaviorError> {
        if a.scenario != b.scenario {
            return Err(BehaviorError::ScenarioMismatch);
        }
        let table = a
            .table
            .iter()
            .zip(&b.table)
            .map(|(&p, &q)| lambda * p + (1.0 - lambda) * q)
            .collect();
        Behavior::new(a.scenario, table)
    }

    /// The Popescu-Rohrlich box: p(a,b|x,y) = 1/2 when a⊕b = x·y, else 0.
    pub fn pr_box() -> Behavior {
        Behavior::from_fn(Scenario::chsh(), |xs, outs| {
            if (outs[0] + outs[1]) % 2 == xs[0] * xs[1] {
                0.5
            } else {
                0.0
            }
        })
        .expect("PR box is normalized")
    }

    /// Serialize in the text table format: a `scenario n m d` header, then one
    /// line per (x⃗, a⃗, p) with 17 significant digits.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), BehaviorError> {
        writeln!(
            w,
            "scenario {} {} {}",
            self.scenario.parties, self.scenario.inputs, self.scenario.outputs
        )?;
        let out = self.scenario.output_tuples();
        for x in 0..self.scenario.input_tuples() {
            let xs = self.scenario.input_tuple(x);
            for a in 0..out {
                let outs = self.scenario.output_tuple(a);
                let mut line = String::new();
                for v in &xs {
                    write!(line, "{v} ").unwrap();
                }
                for v in &outs {
                    write!(line, "{v} ").unwrap();
                }
                write!(line, "{:.16e}", self.table[x * out + a]).unwrap();
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Behavior, BehaviorError> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| BehaviorError::Parse { line: 1, message: "empty file".into() })?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "scenario" {
            return Err(BehaviorError::Parse {
                line: 1,
                message: "expected header `scenario n m d`".into(),
            });
        }
        let parse = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|e| BehaviorError::Parse {
                line,
                message: format!("bad integer `{s}`: {e}"),
            })
        };
        let scenario = Scenario::new(parse(fields[1], 1)?, parse(fields[2], 1)?, parse(fields[3], 1)?)?;
        let mut table = vec![f64::NAN; scenario.table_len()];
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 * scenario.parties + 1 {
                return Err(BehaviorError::Parse {
                    line: line_no,
                    message: format!(
                        "expected {} fields, got {}",
                        2 * scenario.parties + 1,
                        fields.len()
                    ),
                });
            }
            let mut xs = Vec::with_capacity(scenario.parties);
            let mut outs = Vec::with_capacity(scenario.parties);
            for f in &fields[..scenario.parties] {
                let v = parse(f, line_no)?;
                if v >= scenario.inputs {
                    return Err(BehaviorError::Parse {
                        line: line_no,
                        message: format!("input {v} out of range"),
                    });
                }
                xs.push(v);
            }
            for f in &fields[scenario.parties..2 * scenario.parties] {
                let v = parse(f, line_no)?;
                if v >= scenario.outputs {
                    return Err(BehaviorError::Parse {
                        line: line_no,
                        message: format!("output {v} out of range"),
                    });
                }
                outs.push(v);
            }
            let p: f64 = fields[2 * scenario.parties].parse().map_err(|e| BehaviorError::Parse {
                line: line_no,
                message: format!("bad probability: {e}"),
            })?;
            table[scenario.input_index(&xs) * scenario.output_tuples()
                + scenario.output_index(&outs)] = p;
        }
        if table.iter().any(|p| p.is_nan()) {
            return Err(BehaviorError::Parse { line: 0, message: "missing table entries".into() });
        }
        Behavior::new(scenario, table)
    }
}

/// One party's deterministic assignment of outputs to inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicStrategy {
    outputs: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn new(outputs: Vec<usize>, scenario: Scenario) -> Result<Self, BehaviorError> {
        if outputs.len() != scenario.inputs() {
            return Err(BehaviorError::InvalidStrategy(format!(
                "strategy covers {} inputs, scenario has {}",
                outputs.len(),
                scenario.inputs()
            )));
        }
        if let Some(&bad) = outputs.iter().find(|&&a| a >= scenario.outputs()) {
            return Err(BehaviorError::InvalidStrategy(format!("output {bad} out of range")));
        }
        Ok(Self { outputs })
    }

    /// Strategy number `index` in lexicographic order (input 0 most
    /// significant digit, base d).
    pub fn from_index(mut index: usize, scenario: Scenario) -> Self {
        let m = scenario.inputs();
        let d = scenario.outputs();
        let mut outputs = vec![0; m];
        for x in (0..m).rev() {
            outputs[x] = index % d;
            index /= d;
        }
        Self { outputs }
    }

    pub fn respond(&self, input: usize) -> usize {
        self.outputs[input]
    }
}

/// A convex mixture of deterministic strategy tuples: the local polytope.
#[derive(Debug, Clone)]
pub struct LocalModel {
    scenario: Scenario,
    weights: Vec<f64>,
    lambdas: Vec<Vec<DeterministicStrategy>>,
}

impl LocalModel {
    pub fn new(
        scenario: Scenario,
        weights: Vec<f64>,
        lambdas: Vec<Vec<DeterministicStrategy>>,
    ) -> Result<Self, BehaviorError> {
        if weights.len() != lambdas.len() || weights.is_empty() {
            return Err(BehaviorError::InvalidWeights(
                "need one weight per strategy tuple".into(),
            ));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(BehaviorError::InvalidWeights("weights must be nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(BehaviorError::InvalidWeights(format!("weights sum to {sum}")));
        }
        for tuple in &lambdas {
            if tuple.len() != scenario.parties() {
                return Err(BehaviorError::InvalidStrategy(
                    "strategy tuple size must equal party count".into(),
                ));
            }
        }
        Ok(Self { scenario, weights, lambdas })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn to_behavior(&self) -> Behavior {
        let scenario = self.scenario;
        let mut table = vec![0.0; scenario.table_len()];
        let out = scenario.output_tuples();
        for (w, tuple) in self.weights.iter().zip(&self.lambdas) {
            for x in 0..scenario.input_tuples() {
                let xs = scenario.input_tuple(x);
                let outs: Vec<usize> =
                    tuple.iter().zip(&xs).map(|(s, &xi)| s.respond(xi)).collect();
                table[x * out + scenario.output_index(&outs)] += w;
            }
        }
        Behavior::new(scenario, table).expect("mixture of vertices is normalized")
    }
}

/// A linear functional Σ α(x⃗,a⃗)·p(a⃗|x⃗) with an optional classical bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    scenario: Scenario,
    /// Same layout as a behavior table.
    coefficients: Vec<f64>,
    classical_bound: Option<f64>,
}

impl BellFunctional {
    pub fn new(scenario: Scenario, coefficients: Vec<f64>) -> Result<Self, BehaviorError> {
        if coefficients.len() != scenario.table_len() {
            return Err(BehaviorError::TableSizeMismatch {
                got: coefficients.len(),
                want: scenario.table_len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(BehaviorError::InvalidScenario("coefficients must be finite".into()));
        }
        Ok(Self { scenario, coefficients, classical_bound: None })
    }

    /// The CHSH functional ⟨a₀b₀⟩+⟨a₀b₁⟩+⟨a₁b₀⟩−⟨a₁b₁⟩ with its classical
    /// bound 2 attached.
    pub fn chsh() -> Self {
        let scenario = Scenario::chsh();
        let mut coefficients = vec![0.0; scenario.table_len()];
        let out = scenario.output_tuples();
        for x in 0..scenario.input_tuples() {
            let xs = scenario.input_tuple(x);
            let sign = if xs[0] == 1 && xs[1] == 1 { -1.0 } else { 1.0 };
            for a in 0..out {
                let outs = scenario.output_tuple(a);
                let parity = if (outs[0] + outs[1]) % 2 == 0 { 1.0 } else { -1.0 };
                coefficients[x * out + a] = sign * parity;
            }
        }
        Self { scenario, coefficients, classical_bound: Some(2.0) }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn classical_bound(&self) -> Option<f64> {
        self.classical_bound
    }

    pub fn coefficient(&self, x_index: usize, a_index: usize) -> f64 {
        self.coefficients[x_index * self.scenario.output_tuples() + a_index]
    }

    /// True when some output coefficient for this input tuple is nonzero.
    pub fn input_is_relevant(&self, x_index: usize) -> bool {
        let out = self.scenario.output_tuples();
        self.coefficients[x_index * out..(x_index + 1) * out]
            .iter()
            .any(|&c| c != 0.0)
    }

    /// Fill in the classical bound by vertex enumeration.
    pub fn with_computed_bound(mut self) -> Result<Self, BehaviorError> {
        self.classical_bound = Some(local_bound(&self)?);
        Ok(self)
    }
}

/// Exact value of a functional on a behavior.
pub fn evaluate_functional(f: &BellFunctional, b: &Behavior) -> Result<f64, BehaviorError> {
    if f.scenario != b.scenario {
        return Err(BehaviorError::ScenarioMismatch);
    }
    Ok(f.coefficients.iter().zip(&b.table).map(|(c, p)| c * p).sum())
}

/// The quantum behavior p(a⃗|x⃗) = Tr(ρ ⊗ₖ M^{xₖ}_{aₖ}).
///
/// `measurements[k][x]` is party k's POVM for input x; every POVM must have
/// the scenario's output count, and the product of party dimensions must
/// equal the state dimension.
pub fn quantum_behavior(
    state: &DensityState,
    measurements: &[Vec<PovmElementSet>],
) -> Result<Behavior, BehaviorError> {
    let parties = measurements.len();
    if parties == 0 {
        return Err(BehaviorError::InvalidMeasurements("need at least one party".into()));
    }
    let inputs = measurements[0].len();
    if inputs == 0 || measurements.iter().any(|m| m.len() != inputs) {
        return Err(BehaviorError::InvalidMeasurements(
            "every party needs the same nonzero number of inputs".into(),
        ));
    }
    let outputs = measurements[0][0].len();
    let mut hilbert_dim = 1usize;
    for per_party in measurements {
        let dim = per_party[0].dim();
        for povm in per_party {
            if povm.len() != outputs {
                return Err(BehaviorError::InvalidMeasurements(
                    "every POVM needs the same number of outcomes".into(),
                ));
            }
            if povm.dim() != dim {
                return Err(BehaviorError::InvalidMeasurements(
                    "one party's POVMs act on inconsistent dimensions".into(),
                ));
            }
        }
        hilbert_dim = hilbert_dim.checked_mul(dim).ok_or_else(|| {
            BehaviorError::InvalidMeasurements("party dimensions overflow".into())
        })?;
    }
    if hilbert_dim != state.dim() {
        return Err(BehaviorError::Quantum(QuantumError::DimensionMismatch {
            left: state.dim(),
            right: hilbert_dim,
        }));
    }

    let scenario = Scenario::new(parties, inputs, outputs)?;
    let out = scenario.output_tuples();
    let mut table = vec![0.0; scenario.table_len()];
    for x in 0..scenario.input_tuples() {
        let xs = scenario.input_tuple(x);
        if parties == 1 {
            let povm = &measurements[0][xs[0]];
            let probs = born_probabilities(state, povm)?;
            table[x * out..(x + 1) * out].copy_from_slice(&probs);
            continue;
        }
        for a in 0..out {
            let outs = scenario.output_tuple(a);
            let mut op = measurements[0][xs[0]].element(outs[0]).clone();
            for k in 1..parties {
                op = kron(&op, measurements[k][xs[k]].element(outs[k]));
            }
            table[x * out + a] = trace(&(state.matrix() * op)).re.clamp(0.0, 1.0);
        }
    }
    let behavior = Behavior::new(scenario, table)?;
    let report = check_no_signaling(&behavior, 1e-8);
    if !report.pass {
        return Err(BehaviorError::SignalingDetected { worst: report.worst_violation });
    }
    Ok(behavior)
}

/// The |Ψ⁺⟩ state with the measurement settings that reach the Tsirelson
/// point: A₀=σz, A₁=σx, B₀=(σz+σx)/√2, B₁=(σz−σx)/√2.
pub fn chsh_quantum_behavior() -> Behavior {
    use crate::quantum::{c, projectors_of_involution, sigma_x, sigma_z, ComplexVector};
    let s = 1.0 / 2.0f64.sqrt();
    let mut ket = ComplexVector::zeros(4);
    ket[0] = c(s, 0.0);
    ket[3] = c(s, 0.0);
    let state = DensityState::pure(&ket).expect("|Ψ+⟩ is normalized");
    let b0 = (sigma_z() + sigma_x()) * c(s, 0.0);
    let b1 = (sigma_z() - sigma_x()) * c(s, 0.0);
    let alice = vec![projectors_of_involution(&sigma_z()), projectors_of_involution(&sigma_x())];
    let bob = vec![projectors_of_involution(&b0), projectors_of_involution(&b1)];
    quantum_behavior(&state, &[alice, bob]).expect("CHSH construction is valid")
}

/// No-signaling report: whether each party's marginals are independent of
/// that party's own input, and the worst deviation found.
#[derive(Debug, Clone)]
pub struct NoSignalingReport {
    pub pass: bool,
    pub worst_violation: f64,
    /// (party, other-inputs tuple, other-outputs tuple, input pair compared)
    pub offending_marginal: Option<(usize, Vec<usize>, Vec<usize>, (usize, usize))>,
}

/// Verify the no-signaling condition: summing party k's output out of
/// p(a⃗|x⃗) must leave a marginal independent of x_k.
pub fn check_no_signaling(b: &Behavior, tol: f64) -> NoSignalingReport {
    let s = b.scenario();
    let n = s.parties();
    let mut worst = 0.0f64;
    let mut offender = None;

    let mut xs = vec![0usize; n];
    let mut outs = vec![0usize; n];
    for k in 0..n {
        // Iterate over other parties' inputs and outputs.
        let others_inputs = s.inputs().pow((n - 1) as u32);
        let others_outputs = s.outputs().pow((n - 1) as u32);
        for oi in 0..others_inputs {
            // Decode the other-party input tuple around position k.
            let mut rest = oi;
            for j in (0..n).rev() {
                if j == k {
                    continue;
                }
                xs[j] = rest % s.inputs();
                rest /= s.inputs();
            }
            for oa in 0..others_outputs {
                let mut rest = oa;
                for j in (0..n).rev() {
                    if j == k {
                        continue;
                    }
                    outs[j] = rest % s.outputs();
                    rest /= s.outputs();
                }
                // Marginal Σ_{a_k} p for x_k = 0 is the reference.
                let mut reference = 0.0;
                for ak in 0..s.outputs() {
                    xs[k] = 0;
                    outs[k] = ak;
                    reference += b.prob(&xs, &outs);
                }
                for xk in 1..s.inputs() {
                    let mut marginal = 0.0;
                    for ak in 0..s.outputs() {
                        xs[k] = xk;
                        outs[k] = ak;
                        marginal += b.prob(&xs, &outs);
                    }
                    let dev = (marginal - reference).abs();
                    if dev > worst {
                        worst = dev;
                        let mut other_x = xs.clone();
                        other_x.remove(k);
                        let mut other_a = outs.clone();
                        other_a.remove(k);
                        offender = Some((k, other_x, other_a, (0, xk)));
                    }
                }
            }
        }
    }
    NoSignalingReport {
        pass: worst <= tol,
        worst_violation: worst,
        offending_marginal: if worst <= tol { None } else { offender },
    }
}

/// The deterministic behavior for vertex number `index`.
///
/// Vertices are ordered lexicographically by the per-party strategy tables,
/// party 0 most significant.
pub fn local_vertex(scenario: Scenario, index: u128) -> Result<Behavior, BehaviorError> {
    let per_party = (scenario.outputs() as u128).pow(scenario.inputs() as u32);
    let mut rest = index;
    let mut strategies = vec![];
    for _ in 0..scenario.parties() {
        strategies.push(rest % per_party);
        rest /= per_party;
    }
    strategies.reverse();
    let tuple: Vec<DeterministicStrategy> = strategies
        .into_iter()
        .map(|si| DeterministicStrategy::from_index(si as usize, scenario))
        .collect();
    let out = scenario.output_tuples();
    let mut table = vec![0.0; scenario.table_len()];
    for x in 0..scenario.input_tuples() {
        let xs = scenario.input_tuple(x);
        let outs: Vec<usize> = tuple.iter().zip(&xs).map(|(s, &xi)| s.respond(xi)).collect();
        table[x * out + scenario.output_index(&outs)] = 1.0;
    }
    Behavior::new(scenario, table)
}

/// Enumerate every local deterministic vertex of the scenario's polytope.
///
/// Yields exactly (d^m)^n behaviors with 0/1 entries and no duplicates.
pub fn enumerate_local_vertices(
    scenario: Scenario,
) -> Result<impl Iterator<Item = Behavior>, BehaviorError> {
    let count = scenario.vertex_count();
    if count > MAX_VERTICES {
        return Err(BehaviorError::TooManyVertices { vertices: count });
    }
    Ok((0..count as u64).map(move |i| {
        local_vertex(scenario, i as u128).expect("vertex index in range")
    }))
}

/// The classical bound S_L: the maximum of the functional over all local
/// vertices (the local maximum is attained at a vertex by convexity).
pub fn local_bound(f: &BellFunctional) -> Result<f64, BehaviorError> {
    let mut best = f64::NEG_INFINITY;
    for vertex in enumerate_local_vertices(f.scenario())? {
        let v = evaluate_functional(f, &vertex)?;
        if v > best {
            best = v;
        }
    }
    Ok(best)
}

/// Distribution over input tuples used to drive a simulated Bell test.
#[derive(Debug, Clone)]
pub enum SettingsDistribution {
    Uniform,
    /// One weight per flat input index; must be normalized.
    Weighted(Vec<f64>),
}

impl SettingsDistribution {
    fn validate(&self, scenario: Scenario) -> Result<(), BehaviorError> {
        if let SettingsDistribution::Weighted(w) = self {
            if w.len() != scenario.input_tuples() {
                return Err(BehaviorError::InvalidSettings(format!(
                    "{} weights for {} input tuples",
                    w.len(),
                    scenario.input_tuples()
                )));
            }
            if w.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(BehaviorError::InvalidSettings("weights must be nonnegative".into()));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(BehaviorError::InvalidSettings(format!("weights sum to {sum}")));
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, scenario: Scenario, rng: &mut R) -> usize {
        match self {
            SettingsDistribution::Uniform => {
                rng.random_range(0..scenario.input_tuples())
            }
            SettingsDistribution::Weighted(w) => sample_index(w, rng),
        }
    }
}

/// Draw an index from an explicit probability vector.
pub(crate) fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Per-round settings and outcomes from a simulated Bell experiment, stored
/// as flat indices.
#[derive(Debug, Clone)]
pub struct RoundRecords {
    scenario: Scenario,
    inputs: Vec<u32>,
    outputs: Vec<u32>,
}

impl RoundRecords {
    pub fn new(scenario: Scenario) -> Self {
        Self { scenario, inputs: vec![], outputs: vec![] }
    }

    pub fn push(&mut self, x_index: usize, a_index: usize) {
        self.inputs.push(x_index as u32);
        self.outputs.push(a_index as u32);
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_index(&self, round: usize) -> usize {
        self.inputs[round] as usize
    }

    pub fn output_index(&self, round: usize) -> usize {
        self.outputs[round] as usize
    }

    pub fn input_tuple(&self, round: usize) -> Vec<usize> {
        self.scenario.input_tuple(self.inputs[round] as usize)
    }

    pub fn output_tuple(&self, round: usize) -> Vec<usize> {
        self.scenario.output_tuple(self.outputs[round] as usize)
    }
}

/// Simulate `rounds` i.i.d. rounds: settings from `settings`, outcomes from
/// the behavior's conditional table.
///
/// Round i draws only from the counter generator at `(seed, i)`, so the
/// record stream is bitwise identical for any thread count.
pub fn simulate_rounds(
    behavior: &Behavior,
    settings: &SettingsDistribution,
    rounds: u64,
    seed: u64,
) -> Result<RoundRecords, BehaviorError> {
    if rounds == 0 {
        return Err(BehaviorError::ZeroRounds);
    }
    settings.validate(behavior.scenario())?;
    let scenario = behavior.scenario();
    let n = rounds as usize;
    let mut inputs = vec![0u32; n];
    let mut outputs = vec![0u32; n];
    inputs
        .par_iter_mut()
        .zip(outputs.par_iter_mut())
        .enumerate()
        .for_each(|(i, (x_slot, a_slot))| {
            let mut rng = counter_rng(seed, stream::ROUNDS, i as u64);
            let x = settings.sample(scenario, &mut rng);
            let a = sample_index(behavior.conditional(x), &mut rng);
            *x_slot = x as u32;
            *a_slot = a as u32;
        });
    Ok(RoundRecords { scenario, inputs, outputs })
}

/// Plug-in estimate of a functional with a one-sided Hoeffding lower bound.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FunctionalEstimate {
    pub s_hat: f64,
    pub s_lo: f64,
    pub deviation: f64,
    pub rounds: u64,
}

/// Hoeffding deviation for the per-round CHSH-style estimator rescaled to
/// its [-4, 4] range: 4·√(ln(1/(1-confidence)) / (2N)).
pub fn hoeffding_deviation(confidence: f64, rounds: u64) -> f64 {
    4.0 * ((1.0 / (1.0 - confidence)).ln() / (2.0 * rounds as f64)).sqrt()
}

/// Estimate a functional from recorded rounds.
///
/// `s_hat` is the plug-in value on empirical conditionals; `s_lo` subtracts
/// the Hoeffding deviation at the requested one-sided confidence. Every
/// input tuple carrying a nonzero coefficient must appear at least once.
pub fn estimate_functional(
    records: &RoundRecords,
    f: &BellFunctional,
    confidence: f64,
) -> Result<FunctionalEstimate, BehaviorError> {
    if records.is_empty() {
        return Err(BehaviorError::EmptyRecords);
    }
    if f.scenario() != records.scenario() {
        return Err(BehaviorError::ScenarioMismatch);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(BehaviorError::InvalidConfidence(confidence));
    }
    let s = records.scenario();
    let out = s.output_tuples();
    let mut counts_x = vec![0u64; s.input_tuples()];
    let mut counts_xa = vec![0u64; s.table_len()];
    for i in 0..records.len() {
        let x = records.input_index(i);
        counts_x[x] += 1;
        counts_xa[x * out + records.output_index(i)] += 1;
    }
    let mut s_hat = 0.0;
    for x in 0..s.input_tuples() {
        if !f.input_is_relevant(x) {
            continue;
        }
        if counts_x[x] == 0 {
            return Err(BehaviorError::MissingSettings { input: s.input_tuple(x) });
        }
        for a in 0..out {
            let c = f.coefficient(x, a);
            if c != 0.0 {
                s_hat += c * counts_xa[x * out + a] as f64 / counts_x[x] as f64;
            }
        }
    }
    let deviation = hoeffding_deviation(confidence, records.len() as u64);
    Ok(FunctionalEstimate {
        s_hat,
        s_lo: s_hat - deviation,
        deviation,
        rounds: records.len() as u64,
    })
}
