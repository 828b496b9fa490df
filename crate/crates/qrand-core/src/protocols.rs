//! Randomness expansion and amplification protocols over black-box device
//! abstractions, with exact seed accounting and abort logic.
//!
//! Devices are memoryless in v1: each round samples the device's behavior
//! table independently. Every bit taken from the user's seed (or from the
//! weak source in amplification) is debited, and a protocol report balances
//! N_s + N_e against the debit exactly.

use rand::Rng;
use thiserror::Error;

use crate::behaviors::{
    quantum_behavior, sample_index, Behavior, BehaviorError, BellFunctional, LocalModel,
    RoundRecords, Scenario,
};
use crate::bits::BitString;
use crate::certify::{certify, CertificationReport, CertifyError};
use crate::extractors::{
    extractable_output_len, inner_product_extract, plan_blocks, toeplitz_extract_blocks,
    BlockSeedMode, ExtractError,
};
use crate::quantum::{DensityState, PovmElementSet};
use crate::report::Kv;
use crate::rng::{counter_rng, stream};
use crate::sources::{SourceError, SvSampler, SvSourceModel};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("seed exhausted after {consumed} bits")]
    SeedExhausted { consumed: u64 },
    #[error("protocol requires the (2,2,2) scenario, got ({n},{m},{d})")]
    WrongScenario { n: usize, m: usize, d: usize },
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error("behavior layer: {0}")]
    Behavior(#[from] BehaviorError),
    #[error("certification: {0}")]
    Certify(#[from] CertifyError),
    #[error("weak source: {0}")]
    Source(#[from] SourceError),
    #[error("extraction: {0}")]
    Extract(#[from] ExtractError),
}

/// A black-box device group: scripted, local, or honest-quantum, all
/// normalized to a behavior table that answers every input tuple.
pub struct DeviceBox {
    behavior: Behavior,
}

/// What backs a device when it is built.
pub enum DeviceKind {
    /// A state plus per-party, per-input POVMs, measured by the trace rule.
    Honest { state: DensityState, measurements: Vec<Vec<PovmElementSet>> },
    /// A convex mixture of deterministic strategies.
    Local(LocalModel),
    /// An explicit behavior table (e.g. loaded from a file, or the PR box).
    Scripted(Behavior),
}

/// Build a device; the behavior is validated so the box responds to every
/// input in its scenario.
pub fn make_device(kind: DeviceKind) -> Result<DeviceBox, ProtocolError> {
    let behavior = match kind {
        DeviceKind::Honest { state, measurements } => quantum_behavior(&state, &measurements)?,
        DeviceKind::Local(model) => model.to_behavior(),
        DeviceKind::Scripted(behavior) => behavior,
    };
    Ok(DeviceBox { behavior })
}

impl DeviceBox {
    /// The honest CHSH pair: |Ψ⁺⟩ with the Tsirelson-point settings.
    pub fn honest_chsh() -> Self {
        Self { behavior: crate::behaviors::chsh_quantum_behavior() }
    }

    /// Deterministic local vertex by index.
    pub fn local_vertex(index: u128) -> Result<Self, ProtocolError> {
        Ok(Self { behavior: crate::behaviors::local_vertex(Scenario::chsh(), index)? })
    }

    pub fn pr_box() -> Self {
        Self { behavior: Behavior::pr_box() }
    }

    pub fn scenario(&self) -> Scenario {
        self.behavior.scenario()
    }

    pub fn behavior(&self) -> &Behavior {
        &self.behavior
    }

    /// One use of the box: sample the joint outcome for an input tuple.
    pub fn respond<R: Rng>(&self, x_index: usize, rng: &mut R) -> usize {
        sample_index(self.behavior.conditional(x_index), rng)
    }
}

/// Where protocol seed bits come from. The counting PRNG variant never
/// exhausts and is used to audit that consumption equals the report.
pub struct SeedSource {
    material: SeedMaterial,
    debited: u64,
}

enum SeedMaterial {
    Fixed(BitString),
    Prng { seed: u64 },
}

impl SeedSource {
    pub fn from_bits(bits: BitString) -> Self {
        Self { material: SeedMaterial::Fixed(bits), debited: 0 }
    }

    /// Inexhaustible deterministic source; every debit is still counted.
    pub fn from_prng(seed: u64) -> Self {
        Self { material: SeedMaterial::Prng { seed }, debited: 0 }
    }

    pub fn debited(&self) -> u64 {
        self.debited
    }

    pub fn take_bit(&mut self) -> Result<bool, ProtocolError> {
        let pos = self.debited;
        let bit = match &self.material {
            SeedMaterial::Fixed(bits) => {
                if pos as usize >= bits.len() {
                    return Err(ProtocolError::SeedExhausted { consumed: pos });
                }
                bits.get(pos as usize)
            }
            SeedMaterial::Prng { seed } => {
                let word: u64 = counter_rng(*seed, stream::SEED_SOURCE, pos / 64).random();
                word >> (63 - pos % 64) & 1 == 1
            }
        };
        self.debited += 1;
        Ok(bit)
    }

    pub fn take_bits(&mut self, n: usize) -> Result<BitString, ProtocolError> {
        let mut out = BitString::zeros(n);
        for i in 0..n {
            out.set(i, self.take_bit()?);
        }
        Ok(out)
    }

    /// Big-endian integer from `bits` seed bits.
    pub fn take_index(&mut self, bits: u32) -> Result<usize, ProtocolError> {
        let mut v = 0usize;
        for _ in 0..bits {
            v = v << 1 | self.take_bit()? as usize;
        }
        Ok(v)
    }
}

/// Test-round selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SpotChecking {
    /// Every round is a test round (q = 1); two seed bits per round.
    EveryRound,
    /// One uniformly placed test round per block of 2^exponent rounds
    /// (marginal test probability q = 2^-exponent); generation rounds use
    /// the fixed settings (0,0). Exact dyadic accounting.
    OneInBlock { exponent: u32 },
}

/// Expansion protocol parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExpansionConfig {
    pub rounds: u64,
    pub spot_checking: SpotChecking,
    pub confidence: f64,
    /// Extraction error target ε = 2^-epsilon_log2.
    pub extractor_epsilon_log2: u32,
    /// Block length for the streaming Toeplitz extraction.
    pub extractor_block_len: usize,
}

impl ExpansionConfig {
    fn validate(&self) -> Result<(), ProtocolError> {
        if self.rounds == 0 {
            return Err(ProtocolError::InvalidConfig("rounds must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ProtocolError::InvalidConfig(format!(
                "confidence {} outside (0,1)",
                self.confidence
            )));
        }
        if self.extractor_block_len < 2 {
            return Err(ProtocolError::InvalidConfig("extractor block too small".into()));
        }
        if let SpotChecking::OneInBlock { exponent } = self.spot_checking {
            if exponent == 0 || exponent > 30 {
                return Err(ProtocolError::InvalidConfig(format!(
                    "spot-check exponent {exponent} outside 1..=30"
                )));
            }
            if self.rounds % (1u64 << exponent) != 0 {
                return Err(ProtocolError::InvalidConfig(format!(
                    "rounds {} not divisible by the block length {}",
                    self.rounds,
                    1u64 << exponent
                )));
            }
        }
        Ok(())
    }
}

/// One Bell-test estimate inside a protocol report.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BellTestSummary {
    pub s_hat: f64,
    pub s_lo: f64,
}

/// Accounting and outcome of a protocol run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProtocolReport {
    /// Seed (or weak-source) bits consumed for settings and test choices.
    pub seed_bits_settings: u64,
    /// Seed (or weak-source) bits consumed by the extractor.
    pub seed_bits_extractor: u64,
    /// Raw bits generated by the devices.
    pub generated_bits: u64,
    /// Entropy certified in the generated bits: R = ⌊pairs·f(S_lo)⌋.
    pub certified_entropy: u64,
    pub output_len: u64,
    /// R / (N_s + N_e).
    pub expansion_ratio: f64,
    pub confidence: f64,
    pub bell_tests: Vec<BellTestSummary>,
    pub abort: bool,
    pub abort_reason: Option<String>,
}

impl ProtocolReport {
    pub fn to_kv(&self) -> Kv {
        let mut kv = Kv::new();
        kv.push("seed_bits_settings", self.seed_bits_settings)
            .push("seed_bits_extractor", self.seed_bits_extractor)
            .push("generated_bits", self.generated_bits)
            .push("certified_entropy", self.certified_entropy)
            .push("output_len", self.output_len)
            .push("expansion_ratio", self.expansion_ratio)
            .push("confidence", self.confidence);
        for (i, t) in self.bell_tests.iter().enumerate() {
            kv.push(&format!("s_hat_{i}"), t.s_hat);
            kv.push(&format!("s_lo_{i}"), t.s_lo);
        }
        kv.push("abort", self.abort);
        if let Some(reason) = &self.abort_reason {
            kv.push("abort_reason", reason);
        }
        kv
    }
}

/// A finished protocol run: the report plus the output bits (empty on
/// abort).
#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub report: ProtocolReport,
    pub output: BitString,
}

fn abort_report(
    n_s: u64,
    confidence: f64,
    generated_bits: u64,
    bell_tests: Vec<BellTestSummary>,
    reason: String,
) -> ProtocolOutcome {
    ProtocolOutcome {
        report: ProtocolReport {
            seed_bits_settings: n_s,
            seed_bits_extractor: 0,
            generated_bits,
            certified_entropy: 0,
            output_len: 0,
            expansion_ratio: 0.0,
            confidence,
            bell_tests,
            abort: true,
            abort_reason: Some(reason),
        },
        output: BitString::zeros(0),
    }
}

/// Run randomness expansion on one two-party device pair.
///
/// Settings come from the seed (two bits per test round, plus the position
/// bits in spot-checking mode); generation rounds use the fixed settings
/// (0,0). The Bell estimate from test rounds feeds the CHSH bound; if
/// S_lo ≤ 2 the protocol aborts, otherwise the generation outcomes are
/// Toeplitz-extracted with a reused block seed drawn from the same seed
/// source. Deterministic given (seed source, config, device_seed).
pub fn run_expansion(
    device: &DeviceBox,
    cfg: &ExpansionConfig,
    seed: &mut SeedSource,
    device_seed: u64,
) -> Result<ProtocolOutcome, ProtocolError> {
    cfg.validate()?;
    let s = device.scenario();
    if (s.parties(), s.inputs(), s.outputs()) != (2, 2, 2) {
        return Err(ProtocolError::WrongScenario {
            n: s.parties(),
            m: s.inputs(),
            d: s.outputs(),
        });
    }
    let debit_start = seed.debited();
    let mut records = RoundRecords::new(s);
    let mut generated = BitString::zeros(0);

    match cfg.spot_checking {
        SpotChecking::EveryRound => {
            for round in 0..cfg.rounds {
                let x = seed.take_bit()? as usize;
                let y = seed.take_bit()? as usize;
                let x_index = s.input_index(&[x, y]);
                let mut rng = counter_rng(device_seed, stream::DEVICE, round);
                let a_index = device.respond(x_index, &mut rng);
                records.push(x_index, a_index);
                let outs = s.output_tuple(a_index);
                generated.push(outs[0] == 1);
                generated.push(outs[1] == 1);
            }
        }
        SpotChecking::OneInBlock { exponent } => {
            let block = 1u64 << exponent;
            let mut test_pos = 0u64;
            let mut test_settings = 0usize;
            for round in 0..cfg.rounds {
                if round % block == 0 {
                    test_pos = seed.take_index(exponent)? as u64;
                    test_settings = seed.take_index(2)?;
                }
                let is_test = round % block == test_pos;
                let x_index = if is_test { test_settings } else { s.input_index(&[0, 0]) };
                let mut rng = counter_rng(device_seed, stream::DEVICE, round);
                let a_index = device.respond(x_index, &mut rng);
                if is_test {
                    records.push(x_index, a_index);
                } else {
                    let outs = s.output_tuple(a_index);
                    generated.push(outs[0] == 1);
                    generated.push(outs[1] == 1);
                }
            }
        }
    }
    let n_s = seed.debited() - debit_start;

    let report: CertificationReport = certify(&records, &BellFunctional::chsh(), cfg.confidence)?;
    let bell_tests = vec![BellTestSummary { s_hat: report.s_hat, s_lo: report.s_lo }];
    if report.s_lo <= 2.0 {
        return Ok(abort_report(
            n_s,
            cfg.confidence,
            generated.len() as u64,
            bell_tests,
            format!("Bell test failed: S_lo = {:.6} ≤ 2", report.s_lo),
        ));
    }

    let gen_pairs = generated.len() as u64 / 2;
    let certified = (gen_pairs as f64 * report.bits_per_round).floor() as u64;
    let (output, n_e) = match extractable_output_len(certified as f64, cfg.extractor_epsilon_log2)
    {
        Ok(m) => {
            let plan = plan_blocks(generated.len(), cfg.extractor_block_len, m)?;
            let n_max = plan.iter().map(|&(n, _)| n).max().unwrap_or(0);
            let m_max = plan.iter().map(|&(_, m)| m).max().unwrap_or(0);
            let master = seed.take_bits(n_max + m_max - 1)?;
            let (out, _) =
                toeplitz_extract_blocks(&generated, &plan, BlockSeedMode::Expander, |_, _| {
                    master.clone()
                })?;
            (out, (n_max + m_max - 1) as u64)
        }
        // Too few certified bits to clear the extraction margin: succeed
        // with an empty output rather than abort.
        Err(ExtractError::BudgetExhausted { .. }) => (BitString::zeros(0), 0),
        Err(e) => return Err(e.into()),
    };

    let ratio = certified as f64 / (n_s + n_e) as f64;
    Ok(ProtocolOutcome {
        report: ProtocolReport {
            seed_bits_settings: n_s,
            seed_bits_extractor: n_e,
            generated_bits: generated.len() as u64,
            certified_entropy: certified,
            output_len: output.len() as u64,
            expansion_ratio: ratio,
            confidence: cfg.confidence,
            bell_tests,
            abort: false,
            abort_reason: None,
        },
        output,
    })
}

/// Amplification protocol parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AmplificationConfig {
    pub rounds: u64,
    pub confidence: f64,
    /// Block length for the final inner-product extraction; the residual
    /// weak-source string t supplies the same number of bits per block.
    pub block_len: usize,
}

impl AmplificationConfig {
    fn validate(&self) -> Result<(), ProtocolError> {
        if self.rounds == 0 {
            return Err(ProtocolError::InvalidConfig("rounds must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ProtocolError::InvalidConfig(format!(
                "confidence {} outside (0,1)",
                self.confidence
            )));
        }
        if self.block_len == 0 {
            return Err(ProtocolError::InvalidConfig("block length must be positive".into()));
        }
        Ok(())
    }
}

/// Run randomness amplification on four devices (two disjoint CHSH pairs).
///
/// No perfect seed enters anywhere: the SV source drives all measurement
/// settings (four bits per round) and supplies the residual string t for the
/// final two-source extraction. Both pairs must violate CHSH at the
/// configured confidence or the protocol aborts. The output is the blockwise
/// inner product of the device outcomes with t.
pub fn run_amplification(
    sv: &SvSourceModel,
    pair_a: &DeviceBox,
    pair_b: &DeviceBox,
    cfg: &AmplificationConfig,
    sv_seed: u64,
    device_seed: u64,
) -> Result<ProtocolOutcome, ProtocolError> {
    cfg.validate()?;
    for pair in [pair_a, pair_b] {
        let s = pair.scenario();
        if (s.parties(), s.inputs(), s.outputs()) != (2, 2, 2) {
            return Err(ProtocolError::WrongScenario {
                n: s.parties(),
                m: s.inputs(),
                d: s.outputs(),
            });
        }
    }
    let scenario = Scenario::chsh();
    let mut sampler = SvSampler::new(sv, sv_seed);
    let mut records_a = RoundRecords::new(scenario);
    let mut records_b = RoundRecords::new(scenario);
    let mut outputs = BitString::zeros(0);

    for round in 0..cfg.rounds {
        let xa = sampler.next_bit()? as usize;
        let ya = sampler.next_bit()? as usize;
        let xb = sampler.next_bit()? as usize;
        let yb = sampler.next_bit()? as usize;
        let xa_index = scenario.input_index(&[xa, ya]);
        let xb_index = scenario.input_index(&[xb, yb]);
        let mut rng_a = counter_rng(device_seed, stream::DEVICE, 2 * round);
        let mut rng_b = counter_rng(device_seed, stream::DEVICE, 2 * round + 1);
        let a_index = pair_a.respond(xa_index, &mut rng_a);
        let b_index = pair_b.respond(xb_index, &mut rng_b);
        records_a.push(xa_index, a_index);
        records_b.push(xb_index, b_index);
        for idx in [a_index, b_index] {
            let outs = scenario.output_tuple(idx);
            outputs.push(outs[0] == 1);
            outputs.push(outs[1] == 1);
        }
    }
    let n_s = sampler.drawn();

    let chsh = BellFunctional::chsh();
    let cert_a = certify(&records_a, &chsh, cfg.confidence)?;
    let cert_b = certify(&records_b, &chsh, cfg.confidence)?;
    let bell_tests = vec![
        BellTestSummary { s_hat: cert_a.s_hat, s_lo: cert_a.s_lo },
        BellTestSummary { s_hat: cert_b.s_hat, s_lo: cert_b.s_lo },
    ];
    if cert_a.s_lo <= 2.0 || cert_b.s_lo <= 2.0 {
        return Ok(abort_report(
            n_s,
            cfg.confidence,
            outputs.len() as u64,
            bell_tests,
            format!(
                "Bell test failed: S_lo = ({:.6}, {:.6}), both must exceed 2",
                cert_a.s_lo, cert_b.s_lo
            ),
        ));
    }

    // Blockwise two-source extraction against fresh SV bits t.
    let n_blocks = outputs.len() / cfg.block_len;
    let mut final_bits = BitString::zeros(0);
    let t_start = sampler.drawn();
    for b in 0..n_blocks {
        let block = outputs.slice(b * cfg.block_len, cfg.block_len);
        let t = sampler.take_bits(cfg.block_len)?;
        final_bits.push(inner_product_extract(&block, &t).expect("equal lengths"));
    }
    let n_e = sampler.drawn() - t_start;

    let r = final_bits.len() as u64;
    Ok(ProtocolOutcome {
        report: ProtocolReport {
            seed_bits_settings: n_s,
            seed_bits_extractor: n_e,
            generated_bits: outputs.len() as u64,
            certified_entropy: r,
            output_len: r,
            expansion_ratio: r as f64 / (n_s + n_e) as f64,
            confidence: cfg.confidence,
            bell_tests,
            abort: false,
            abort_reason: None,
        },
        output: final_bits,
    })
}
