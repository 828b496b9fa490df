//! Weak randomness source models — Santha-Vazirani, block, and min-entropy
//! sources — together with the information measures (min-entropy,
//! statistical distance) used throughout the crate.
//!
//! Bitstring-to-index convention: the first generated bit is the most
//! significant bit of the index, matching the prefix-tree recursion and the
//! distribution file format.

use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

use crate::bits::BitString;
use crate::rng::{counter_rng, stream};

/// Exact-mode cap: distributions over more than 2^24 strings are refused.
pub const MAX_EXACT_BITS: usize = 24;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("distribution must cover at least one bit")]
    Empty,
    #[error("exact mode supports at most {MAX_EXACT_BITS} bits, got {0}")]
    TooManyBits(usize),
    #[error("probability {value:.3e} at index {index} is invalid")]
    InvalidProbability { index: usize, value: f64 },
    #[error("distribution sums to {0}, expected 1 within 1e-12")]
    NotNormalized(f64),
    #[error("distributions live on different domains: {left} vs {right} bits")]
    DomainMismatch { left: usize, right: usize },
    #[error("epsilon must lie in [0, 1/2], got {0}")]
    InvalidEpsilon(f64),
    #[error("SV strategy returned p(1)={p} outside [{lo}, {hi}] at prefix length {len}")]
    StrategyOutOfBand { p: f64, lo: f64, hi: f64, len: usize },
    #[error("need at least one bit")]
    ZeroLength,
    #[error("block source: conditional block {index} has H∞ {actual:.6} < floor {floor:.6}")]
    BlockEntropyTooLow { index: usize, actual: f64, floor: f64 },
    #[error("min-entropy source: H∞ {actual:.6} < k = {k:.6}")]
    EntropyBelowFloor { actual: f64, k: f64 },
    #[error("distribution file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// An explicit probability distribution over n-bit strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    n_bits: usize,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(n_bits: usize, probs: Vec<f64>) -> Result<Self, SourceError> {
        if n_bits == 0 {
            return Err(SourceError::Empty);
        }
        if n_bits > MAX_EXACT_BITS {
            return Err(SourceError::TooManyBits(n_bits));
        }
        if probs.len() != 1 << n_bits {
            return Err(SourceError::InvalidProbability {
                index: probs.len(),
                value: f64::NAN,
            });
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(SourceError::InvalidProbability { index: i, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SourceError::NotNormalized(sum));
        }
        Ok(Self { n_bits, probs })
    }

    pub fn uniform(n_bits: usize) -> Result<Self, SourceError> {
        if n_bits == 0 {
            return Err(SourceError::Empty);
        }
        if n_bits > MAX_EXACT_BITS {
            return Err(SourceError::TooManyBits(n_bits));
        }
        let len = 1usize << n_bits;
        Ok(Self { n_bits, probs: vec![1.0 / len as f64; len] })
    }

    /// Point mass on one string.
    pub fn point_mass(n_bits: usize, index: usize) -> Result<Self, SourceError> {
        let mut probs = vec![0.0; 1usize << n_bits];
        probs[index] = 1.0;
        Self::new(n_bits, probs)
    }

    /// Uniform distribution over an explicit support (a "flat" source).
    pub fn flat(n_bits: usize, support: &[usize]) -> Result<Self, SourceError> {
        if support.is_empty() {
            return Err(SourceError::Empty);
        }
        let mut probs = vec![0.0; 1usize << n_bits];
        let w = 1.0 / support.len() as f64;
        for &i in support {
            probs[i] += w;
        }
        Self::new(n_bits, probs)
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    /// Draw one n-bit string (as an index) from the distribution.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        crate::behaviors::sample_index(&self.probs, rng)
    }

    /// Write `bitstring probability` lines, one per string.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), SourceError> {
        for (i, p) in self.probs.iter().enumerate() {
            writeln!(w, "{:0width$b} {:.16e}", i, p, width = self.n_bits)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, SourceError> {
        let mut entries: Vec<(usize, f64)> = vec![];
        let mut n_bits = None;
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let bits = fields.next().ok_or_else(|| SourceError::Parse {
                line: line_no,
                message: "missing bitstring".into(),
            })?;
            let prob: f64 = fields
                .next()
                .ok_or_else(|| SourceError::Parse {
                    line: line_no,
                    message: "missing probability".into(),
                })?
                .parse()
                .map_err(|e| SourceError::Parse {
                    line: line_no,
                    message: format!("bad probability: {e}"),
                })?;
            if fields.next().is_some() {
                return Err(SourceError::Parse {
                    line: line_no,
                    message: "trailing fields".into(),
                });
            }
            match n_bits {
                None => n_bits = Some(bits.len()),
                Some(n) if n != bits.len() => {
                    return Err(SourceError::Parse {
                        line: line_no,
                        message: "inconsistent bitstring lengths".into(),
                    })
                }
                _ => {}
            }
            let index = usize::from_str_radix(bits, 2).map_err(|e| SourceError::Parse {
                line: line_no,
                message: format!("bad bitstring: {e}"),
            })?;
            entries.push((index, prob));
        }
        let n_bits = n_bits.ok_or(SourceError::Empty)?;
        let mut probs = vec![0.0; 1usize << n_bits];
        for (i, p) in entries {
            probs[i] = p;
        }
        Self::new(n_bits, probs)
    }
}

/// H∞(X) = −log₂ max_x p(x).
pub fn min_entropy(d: &Distribution) -> f64 {
    let max = d.probs.iter().copied().fold(0.0f64, f64::max);
    -max.log2()
}

/// Total variation distance ½ Σ |p−q|.
pub fn statistical_distance(p: &Distribution, q: &Distribution) -> Result<f64, SourceError> {
    if p.n_bits != q.n_bits {
        return Err(SourceError::DomainMismatch { left: p.n_bits, right: q.n_bits });
    }
    Ok(0.5 * p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Prefix of generated bits handed to an SV adversary strategy.
///
/// Tracks parity incrementally so the shipped strategies answer in O(1).
#[derive(Debug, Clone, Default)]
pub struct SvPrefix {
    bits: Vec<bool>,
    parity: bool,
}

impl SvPrefix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
        self.parity ^= bit;
    }

    pub fn pop(&mut self) {
        if let Some(bit) = self.bits.pop() {
            self.parity ^= bit;
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// XOR of all bits generated so far.
    pub fn parity(&self) -> bool {
        self.parity
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// An adversary strategy: the conditional probability of the next bit being
/// one, as a function of the prefix generated so far.
pub trait SvStrategy: Send + Sync {
    fn p_one(&self, prefix: &SvPrefix) -> f64;
}

/// Constant bias: p(1) = p at every position.
#[derive(Debug, Clone, Copy)]
pub struct ConstantBias(pub f64);

impl SvStrategy for ConstantBias {
    fn p_one(&self, _prefix: &SvPrefix) -> f64 {
        self.0
    }
}

/// Prefix parity: p(1) = 1/2 + δ on even prefix parity, 1/2 − δ on odd.
#[derive(Debug, Clone, Copy)]
pub struct PrefixParity(pub f64);

impl SvStrategy for PrefixParity {
    fn p_one(&self, prefix: &SvPrefix) -> f64 {
        if prefix.parity() {
            0.5 - self.0
        } else {
            0.5 + self.0
        }
    }
}

/// Periodic: p(1) cycles through an explicit list by position.
#[derive(Debug, Clone)]
pub struct Periodic(pub Vec<f64>);

impl SvStrategy for Periodic {
    fn p_one(&self, prefix: &SvPrefix) -> f64 {
        self.0[prefix.len() % self.0.len()]
    }
}

/// A Santha-Vazirani source: every conditional bit probability lies within
/// ε of 1/2, with the bias free to depend on the whole prefix.
pub struct SvSourceModel {
    epsilon: f64,
    strategy: Box<dyn SvStrategy>,
}

impl SvSourceModel {
    pub fn new(epsilon: f64, strategy: Box<dyn SvStrategy>) -> Result<Self, SourceError> {
        if !(0.0..=0.5).contains(&epsilon) {
            return Err(SourceError::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon, strategy })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Conditional p(1|prefix), checked against the ε band.
    pub fn p_one(&self, prefix: &SvPrefix) -> Result<f64, SourceError> {
        let p = self.strategy.p_one(prefix);
        let lo = 0.5 - self.epsilon - 1e-12;
        let hi = 0.5 + self.epsilon + 1e-12;
        if !(lo..=hi).contains(&p) {
            return Err(SourceError::StrategyOutOfBand {
                p,
                lo: 0.5 - self.epsilon,
                hi: 0.5 + self.epsilon,
                len: prefix.len(),
            });
        }
        Ok(p)
    }
}

/// Draw `n` bits from an SV source; bit i uses the counter generator at
/// `(seed, i)` so the stream is reproducible.
pub fn sample_sv(model: &SvSourceModel, n: usize, seed: u64) -> Result<BitString, SourceError> {
    if n == 0 {
        return Err(SourceError::ZeroLength);
    }
    let mut prefix = SvPrefix::new();
    let mut out = BitString::zeros(n);
    for i in 0..n {
        let p1 = model.p_one(&prefix)?;
        let u: f64 = counter_rng(seed, stream::SV_BITS, i as u64).random();
        let bit = u < p1;
        out.set(i, bit);
        prefix.push(bit);
    }
    Ok(out)
}

/// Streaming SV sampler for callers that interleave consumption with other
/// work (protocols). Maintains the prefix and a bit counter.
pub struct SvSampler<'a> {
    model: &'a SvSourceModel,
    prefix: SvPrefix,
    seed: u64,
    drawn: u64,
}

impl<'a> SvSampler<'a> {
    pub fn new(model: &'a SvSourceModel, seed: u64) -> Self {
        Self { model, prefix: SvPrefix::new(), seed, drawn: 0 }
    }

    pub fn next_bit(&mut self) -> Result<bool, SourceError> {
        let p1 = self.model.p_one(&self.prefix)?;
        let u: f64 = counter_rng(self.seed, stream::SV_BITS, self.drawn).random();
        self.drawn += 1;
        let bit = u < p1;
        self.prefix.push(bit);
        Ok(bit)
    }

    pub fn take_bits(&mut self, n: usize) -> Result<BitString, SourceError> {
        let mut out = BitString::zeros(n);
        for i in 0..n {
            out.set(i, self.next_bit()?);
        }
        Ok(out)
    }

    /// Bits drawn so far.
    pub fn drawn(&self) -> u64 {
        self.drawn
    }
}

/// The exact n-bit output distribution of an SV model, by chain-rule product
/// over the prefix tree. Exact-mode n only.
pub fn exact_sv_distribution(model: &SvSourceModel, n: usize) -> Result<Distribution, SourceError> {
    if n == 0 {
        return Err(SourceError::ZeroLength);
    }
    if n > 20 {
        return Err(SourceError::TooManyBits(n));
    }
    let mut probs = vec![0.0; 1usize << n];
    let mut prefix = SvPrefix::new();
    fn recurse(
        model: &SvSourceModel,
        prefix: &mut SvPrefix,
        n: usize,
        index: usize,
        weight: f64,
        probs: &mut [f64],
    ) -> Result<(), SourceError> {
        if prefix.len() == n {
            probs[index] = weight;
            return Ok(());
        }
        let p1 = model.p_one(prefix)?;
        prefix.push(false);
        recurse(model, prefix, n, index << 1, weight * (1.0 - p1), probs)?;
        prefix.pop();
        prefix.push(true);
        recurse(model, prefix, n, index << 1 | 1, weight * p1, probs)?;
        prefix.pop();
        Ok(())
    }
    recurse(model, &mut prefix, n, 0, 1.0, &mut probs)?;
    Distribution::new(n, probs)
}

/// Check whether a distribution satisfies the SV band: every conditional
/// p(next = 1 | prefix) within [1/2 − ε, 1/2 + ε] up to 1e-12. Branches of
/// probability zero are vacuous and skipped.
pub fn verify_sv_bound(d: &Distribution, epsilon: f64) -> bool {
    let n = d.n_bits;
    // P(prefix) for a prefix of length l with value v is the sum of the
    // contiguous block [v << (n-l), (v+1) << (n-l)).
    for l in 0..n {
        let shift = n - l;
        for v in 0..1usize << l {
            let start = v << shift;
            let half = 1usize << (shift - 1);
            let p0: f64 = d.probs[start..start + half].iter().sum();
            let p1: f64 = d.probs[start + half..start + (1 << shift)].iter().sum();
            let total = p0 + p1;
            if total <= 0.0 {
                continue;
            }
            let conditional = p1 / total;
            if conditional < 0.5 - epsilon - 1e-12 || conditional > 0.5 + epsilon + 1e-12 {
                return false;
            }
        }
    }
    true
}

/// A block (n,k) source: every conditional block distribution carries at
/// least k bits of min-entropy.
pub struct BlockSourceModel {
    block_bits: usize,
    k: f64,
    generator: Box<dyn Fn(&[usize]) -> Distribution + Send + Sync>,
}

impl BlockSourceModel {
    pub fn new(
        block_bits: usize,
        k: f64,
        generator: Box<dyn Fn(&[usize]) -> Distribution + Send + Sync>,
    ) -> Result<Self, SourceError> {
        if block_bits == 0 {
            return Err(SourceError::ZeroLength);
        }
        if k < 0.0 || k > block_bits as f64 {
            return Err(SourceError::EntropyBelowFloor { actual: k, k: block_bits as f64 });
        }
        Ok(Self { block_bits, k, generator })
    }

    pub fn block_bits(&self) -> usize {
        self.block_bits
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Sample `count` blocks, validating the entropy floor of each
    /// conditional distribution as it is produced.
    pub fn sample_blocks(&self, count: usize, seed: u64) -> Result<Vec<usize>, SourceError> {
        let mut history = Vec::with_capacity(count);
        for i in 0..count {
            let dist = (self.generator)(&history);
            let h = min_entropy(&dist);
            if h < self.k - 1e-9 {
                return Err(SourceError::BlockEntropyTooLow {
                    index: i,
                    actual: h,
                    floor: self.k,
                });
            }
            let mut rng = counter_rng(seed, stream::SV_BITS, i as u64);
            history.push(dist.sample(&mut rng));
        }
        Ok(history)
    }
}

/// A min-entropy source: an explicit distribution with H∞ ≥ k.
pub struct MinEntropySourceModel {
    k: f64,
    dist: Distribution,
}

impl MinEntropySourceModel {
    pub fn new(k: f64, dist: Distribution) -> Result<Self, SourceError> {
        let actual = min_entropy(&dist);
        if actual < k - 1e-9 {
            return Err(SourceError::EntropyBelowFloor { actual, k });
        }
        Ok(Self { k, dist })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn sample(&self, seed: u64, index: u64) -> usize {
        let mut rng = counter_rng(seed, stream::SV_BITS, index);
        self.dist.sample(&mut rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(eps: f64, strategy: impl SvStrategy + 'static) -> SvSourceModel {
        SvSourceModel::new(eps, Box::new(strategy)).unwrap()
    }

    #[test]
    fn min_entropy_basics() {
        assert!((min_entropy(&Distribution::uniform(3).unwrap()) - 3.0).abs() < 1e-12);
        assert_eq!(min_entropy(&Distribution::point_mass(3, 5).unwrap()), 0.0);
        let d = Distribution::new(1, vec![0.25, 0.75]).unwrap();
        assert!((min_entropy(&d) - 0.4150374992788437).abs() < 1e-12);
    }

    #[test]
    fn statistical_distance_basics() {
        let u = Distribution::uniform(2).unwrap();
        assert_eq!(statistical_distance(&u, &u).unwrap(), 0.0);
        let a = Distribution::point_mass(1, 0).unwrap();
        let b = Distribution::point_mass(1, 1).unwrap();
        assert_eq!(statistical_distance(&a, &b).unwrap(), 1.0);
        let p = Distribution::new(1, vec![0.6, 0.4]).unwrap();
        let q = Distribution::new(1, vec![0.5, 0.5]).unwrap();
        assert!((statistical_distance(&p, &q).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn statistical_distance_triangle_inequality() {
        let mut rng = counter_rng(41, stream::GENERIC, 0);
        for _ in 0..10_000 {
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut probs: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
                let sum: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= sum);
                // Renormalize exactly enough for the 1e-12 gate.
                let sum: f64 = probs.iter().sum();
                probs[7] += 1.0 - sum;
                Distribution::new(3, probs).unwrap()
            };
            let (p, q, r) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let pq = statistical_distance(&p, &q).unwrap();
            let qr = statistical_distance(&q, &r).unwrap();
            let pr = statistical_distance(&p, &r).unwrap();
            assert!(pr <= pq + qr + 1e-12);
            assert!((pq - statistical_distance(&q, &p).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn domain_mismatch_is_an_error() {
        let p = Distribution::uniform(2).unwrap();
        let q = Distribution::uniform(3).unwrap();
        assert!(matches!(
            statistical_distance(&p, &q),
            Err(SourceError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn unbiased_source_is_balanced() {
        let model = sv(0.0, ConstantBias(0.5));
        let n = 1_000_000;
        let bits = sample_sv(&model, n, 7).unwrap();
        let ones = bits.count_ones() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 5.0 * sigma);
    }

    #[test]
    fn constant_bias_converges() {
        let model = sv(0.1, ConstantBias(0.6));
        let n = 1_000_000;
        let bits = sample_sv(&model, n, 8).unwrap();
        let ones = bits.count_ones() as f64;
        let sigma = (n as f64 * 0.6 * 0.4).sqrt();
        assert!((ones - 0.6 * n as f64).abs() < 5.0 * sigma);
    }

    #[test]
    fn prefix_parity_conditionals_converge() {
        let model = sv(0.1, PrefixParity(0.1));
        let n = 1_000_000;
        let bits = sample_sv(&model, n, 9).unwrap();
        let mut count = [[0u64; 2]; 2]; // [parity][bit]
        let mut parity = 0usize;
        for i in 0..n {
            let bit = bits.get(i);
            count[parity][bit as usize] += 1;
            parity ^= bit as usize;
        }
        for (parity, expect) in [(0usize, 0.6), (1usize, 0.4)] {
            let total = (count[parity][0] + count[parity][1]) as f64;
            let ones = count[parity][1] as f64;
            let sigma = (total * expect * (1.0 - expect)).sqrt();
            assert!(
                (ones - expect * total).abs() < 5.0 * sigma,
                "parity {parity}: {ones} of {total}"
            );
        }
    }

    #[test]
    fn out_of_band_strategy_is_rejected() {
        let model = sv(0.05, ConstantBias(0.7));
        assert!(matches!(
            sample_sv(&model, 10, 0),
            Err(SourceError::StrategyOutOfBand { .. })
        ));
    }

    #[test]
    fn exact_distribution_of_unbiased_source_is_uniform() {
        let model = sv(0.0, ConstantBias(0.5));
        let d = exact_sv_distribution(&model, 3).unwrap();
        let u = Distribution::uniform(3).unwrap();
        assert!(statistical_distance(&d, &u).unwrap() < 1e-12);
    }

    #[test]
    fn exact_distribution_constant_bias() {
        let model = sv(0.1, ConstantBias(0.6));
        let d = exact_sv_distribution(&model, 2).unwrap();
        // First generated bit is the most significant index bit.
        let expect = [0.16, 0.24, 0.24, 0.36];
        for (i, e) in expect.iter().enumerate() {
            assert!((d.prob(i) - e).abs() < 1e-12, "index {i}");
        }
    }

    #[test]
    fn exact_distribution_respects_entropy_floor() {
        for (eps, n) in [(0.0, 4), (0.1, 6), (0.3, 5), (0.5, 4)] {
            let model = sv(eps, ConstantBias(0.5 + eps));
            let d = exact_sv_distribution(&model, n).unwrap();
            let h = min_entropy(&d);
            let floor = -(n as f64) * (0.5 + eps).log2();
            assert!(h >= floor - 1e-9, "eps={eps} n={n}: {h} < {floor}");
            assert!(h <= n as f64 + 1e-12);
        }
    }

    #[test]
    fn verify_sv_bound_cases() {
        assert!(verify_sv_bound(&Distribution::uniform(3).unwrap(), 0.0));
        assert!(!verify_sv_bound(&Distribution::point_mass(3, 0).unwrap(), 0.4));
        // Deterministic strings are allowed at ε = 1/2.
        assert!(verify_sv_bound(&Distribution::point_mass(3, 5).unwrap(), 0.5));
        let model = sv(0.12, PrefixParity(0.12));
        let d = exact_sv_distribution(&model, 6).unwrap();
        assert!(verify_sv_bound(&d, 0.12));
        assert!(!verify_sv_bound(&d, 0.05));
    }

    #[test]
    fn deterministic_strategy_is_valid_at_half() {
        // ε = 1/2 admits even a deterministic adversary.
        let model = sv(0.5, ConstantBias(1.0));
        let bits = sample_sv(&model, 64, 3).unwrap();
        assert_eq!(bits.count_ones(), 64);
        let d = exact_sv_distribution(&model, 8).unwrap();
        assert!(verify_sv_bound(&d, 0.5));
    }

    #[test]
    fn sampler_matches_batch() {
        let model = sv(0.1, PrefixParity(0.08));
        let batch = sample_sv(&model, 256, 42).unwrap();
        let mut sampler = SvSampler::new(&model, 42);
        let streamed = sampler.take_bits(256).unwrap();
        assert_eq!(batch, streamed);
        assert_eq!(sampler.drawn(), 256);
    }

    #[test]
    fn distribution_file_round_trip() {
        let model = sv(0.2, PrefixParity(0.15));
        let d = exact_sv_distribution(&model, 4).unwrap();
        let mut buf = Vec::new();
        d.write_text(&mut buf).unwrap();
        let back = Distribution::read_text(&buf[..]).unwrap();
        assert_eq!(d.n_bits(), back.n_bits());
        for i in 0..d.probs().len() {
            assert_eq!(d.prob(i).to_bits(), back.prob(i).to_bits());
        }
    }

    #[test]
    fn block_source_enforces_floor() {
        let good = BlockSourceModel::new(
            3,
            1.0,
            Box::new(|_| Distribution::new(3, vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap()),
        )
        .unwrap();
        assert_eq!(good.sample_blocks(10, 1).unwrap().len(), 10);

        let bad = BlockSourceModel::new(
            3,
            2.0,
            Box::new(|h| {
                if h.len() < 2 {
                    Distribution::uniform(3).unwrap()
                } else {
                    Distribution::point_mass(3, 0).unwrap()
                }
            }),
        )
        .unwrap();
        assert!(matches!(
            bad.sample_blocks(5, 1),
            Err(SourceError::BlockEntropyTooLow { index: 2, .. })
        ));
    }

    #[test]
    fn min_entropy_source_enforces_floor() {
        let flat = Distribution::flat(4, &[1, 2, 3, 4]).unwrap();
        assert!(MinEntropySourceModel::new(2.0, flat.clone()).is_ok());
        assert!(matches!(
            MinEntropySourceModel::new(3.0, flat),
            Err(SourceError::EntropyBelowFloor { .. })
        ));
    }
}
