//! Randomness post-processing: the two-source inner-product extractor,
//! seeded Toeplitz hashing over GF(2), and leftover-hash parameter
//! accounting.
//!
//! The Toeplitz matrix convention is frozen for cross-implementation
//! compatibility: `T[j][i] = seed[j - i + n - 1]` for an n-bit input and an
//! m-bit output, so the seed holds the first row right-to-left followed by
//! the first column top-to-bottom.

use thiserror::Error;

use crate::bits::BitString;

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error("inputs must have equal nonzero length, got {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("seed must have n+m-1 = {want} bits, got {got}")]
    SeedLengthMismatch { want: usize, got: usize },
    #[error("output length {m} exceeds input length {n}")]
    OutputTooLong { m: usize, n: usize },
    #[error("output length must be at least one bit")]
    EmptyOutput,
    #[error("input has {got} bits, extractor expects {want}")]
    InputLengthMismatch { want: usize, got: usize },
    #[error("min-entropy must be positive, got {0}")]
    NonPositiveEntropy(f64),
    #[error("m = {m} exceeds k + 60 = {limit:.1}; the error bound is vacuous")]
    EpsilonOverflow { m: usize, limit: f64 },
    #[error("entropy budget too small: {available:.3} bits available, margin is {margin}")]
    BudgetExhausted { available: f64, margin: usize },
    #[error("block length must be positive")]
    ZeroBlock,
    #[error("requested {m} output bits from {n} input bits at block length {block}")]
    BlockPlanInfeasible { m: usize, n: usize, block: usize },
}

/// Ex(X,Y) = ⊕ᵢ xᵢ·yᵢ, the GF(2) inner product of two equal-length strings.
pub fn inner_product_extract(x: &BitString, y: &BitString) -> Result<bool, ExtractError> {
    if x.len() != y.len() || x.is_empty() {
        return Err(ExtractError::LengthMismatch { left: x.len(), right: y.len() });
    }
    Ok(x.and_parity(y))
}

/// Seed for a Toeplitz hash from n bits down to m ≤ n bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    input_len: usize,
    output_len: usize,
    bits: BitString,
    /// Seed bits reversed, so row j of T is the window starting at m-1-j.
    reversed: BitString,
}

impl ToeplitzSeed {
    pub fn new(input_len: usize, output_len: usize, bits: BitString) -> Result<Self, ExtractError> {
        if output_len == 0 {
            return Err(ExtractError::EmptyOutput);
        }
        if output_len > input_len {
            return Err(ExtractError::OutputTooLong { m: output_len, n: input_len });
        }
        let want = input_len + output_len - 1;
        if bits.len() != want {
            return Err(ExtractError::SeedLengthMismatch { want, got: bits.len() });
        }
        let mut reversed = BitString::zeros(want);
        for i in 0..want {
            reversed.set(i, bits.get(want - 1 - i));
        }
        Ok(Self { input_len, output_len, bits, reversed })
    }

    /// Seed whose matrix is the m×m identity block (left-padded with zeros):
    /// all zeros except position n-1.
    pub fn identity(input_len: usize, output_len: usize) -> Result<Self, ExtractError> {
        let mut bits = BitString::zeros(input_len + output_len - 1);
        bits.set(input_len - 1, true);
        Self::new(input_len, output_len, bits)
    }

    pub fn random<R: rand::Rng>(
        rng: &mut R,
        input_len: usize,
        output_len: usize,
    ) -> Result<Self, ExtractError> {
        let bits = BitString::random(rng, input_len + output_len - 1);
        Self::new(input_len, output_len, bits)
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    /// Matrix entry T[j][i] = seed[j - i + n - 1].
    pub fn entry(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.output_len && col < self.input_len);
        self.bits.get(row + self.input_len - 1 - col)
    }

    /// Reuse this seed's leading bits for a smaller block shape: the frozen
    /// indexing makes any (n', m') with n'+m'-1 ≤ n+m-1 a valid prefix seed.
    pub fn prefix(&self, input_len: usize, output_len: usize) -> Result<ToeplitzSeed, ExtractError> {
        if output_len == 0 {
            return Err(ExtractError::EmptyOutput);
        }
        let want = input_len + output_len - 1;
        if want > self.bits.len() {
            return Err(ExtractError::SeedLengthMismatch { want, got: self.bits.len() });
        }
        ToeplitzSeed::new(input_len, output_len, self.bits.slice(0, want))
    }
}

/// y[j] = ⊕ᵢ T[j][i]·x[i] over GF(2).
///
/// Linear by construction: extract(x ⊕ x') = extract(x) ⊕ extract(x').
pub fn toeplitz_extract(x: &BitString, seed: &ToeplitzSeed) -> Result<BitString, ExtractError> {
    if x.len() != seed.input_len {
        return Err(ExtractError::InputLengthMismatch { want: seed.input_len, got: x.len() });
    }
    let n = seed.input_len;
    let m = seed.output_len;
    let mut out = BitString::zeros(m);
    for j in 0..m {
        // Row j of T is the reversed-seed window starting at m-1-j.
        let base = m - 1 - j;
        let mut acc = 0u64;
        let mut i = 0;
        while i < n {
            let row_word = seed.reversed.word_at(base + i);
            let x_word = x.word_at(i);
            let take = (n - i).min(64);
            let mask = if take == 64 { u64::MAX } else { u64::MAX << (64 - take) };
            acc ^= row_word & x_word & mask;
            i += take;
        }
        if acc.count_ones() % 2 == 1 {
            out.set(j, true);
        }
    }
    Ok(out)
}

/// Leftover-hash error for extracting m bits from k bits of min-entropy:
/// ε = ½·√(2^(m−k)).
///
/// Monotone increasing in m and decreasing in k. Rejected once m exceeds
/// k + 60, where the bound is astronomically vacuous.
pub fn required_seed_and_epsilon(k: f64, m: usize) -> Result<f64, ExtractError> {
    if m == 0 {
        return Err(ExtractError::EmptyOutput);
    }
    if k <= 0.0 {
        return Err(ExtractError::NonPositiveEntropy(k));
    }
    let limit = k + 60.0;
    if m as f64 > limit {
        return Err(ExtractError::EpsilonOverflow { m, limit });
    }
    Ok(0.5 * 2f64.powf((m as f64 - k) / 2.0))
}

/// Output length floor(k) − ⌈2·log₂(1/ε)⌉ for a total entropy budget of k
/// bits at extraction error ε = 2^(−eps_log2).
pub fn extractable_output_len(k: f64, eps_log2: u32) -> Result<usize, ExtractError> {
    if k <= 0.0 {
        return Err(ExtractError::NonPositiveEntropy(k));
    }
    let margin = 2 * eps_log2 as usize;
    let floor_k = k.floor() as usize;
    if floor_k <= margin {
        return Err(ExtractError::BudgetExhausted { available: k, margin });
    }
    Ok(floor_k - margin)
}

/// How seeds are assigned to blocks in streaming extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSeedMode {
    /// A fresh seed per block; the default.
    FreshPerBlock,
    /// One seed reused across blocks ("expander mode"). Sound for block
    /// sources because Toeplitz hashing is a strong extractor, but the
    /// per-block errors add up; callers surface a warning in reports.
    Expander,
}

/// Per-block (input_len, output_len) layout for streaming extraction.
///
/// The input is cut into `block_len`-bit blocks (last one ragged) and the
/// total output is spread across blocks as evenly as integer arithmetic
/// allows, preserving Σ mᵢ = total_m exactly.
pub fn plan_blocks(
    input_len: usize,
    block_len: usize,
    total_m: usize,
) -> Result<Vec<(usize, usize)>, ExtractError> {
    if block_len == 0 {
        return Err(ExtractError::ZeroBlock);
    }
    if total_m == 0 {
        return Err(ExtractError::EmptyOutput);
    }
    if total_m > input_len {
        return Err(ExtractError::BlockPlanInfeasible { m: total_m, n: input_len, block: block_len });
    }
    let n_blocks = input_len.div_ceil(block_len);
    let mut plan = Vec::with_capacity(n_blocks);
    let mut assigned = 0usize;
    let mut consumed = 0usize;
    for b in 0..n_blocks {
        let n_i = if b + 1 == n_blocks { input_len - b * block_len } else { block_len };
        consumed += n_i;
        // Spread output in proportion to input bits so a ragged final block
        // is never asked for more than it holds.
        let target = (total_m as u128 * consumed as u128 / input_len as u128) as usize;
        let m_i = target - assigned;
        if m_i > n_i {
            return Err(ExtractError::BlockPlanInfeasible {
                m: total_m,
                n: input_len,
                block: block_len,
            });
        }
        assigned = target;
        plan.push((n_i, m_i));
    }
    debug_assert_eq!(assigned, total_m);
    Ok(plan)
}

/// Streaming Toeplitz extraction over planned blocks.
///
/// `seed_for` supplies the seed for each block shape; in `Expander` mode it
/// is invoked once for the widest shape and reused via prefixing.
pub fn toeplitz_extract_blocks(
    input: &BitString,
    plan: &[(usize, usize)],
    mode: BlockSeedMode,
    mut seed_for: impl FnMut(usize, usize) -> BitString,
) -> Result<(BitString, usize), ExtractError> {
    let expander_seed = if mode == BlockSeedMode::Expander {
        let n_max = plan.iter().map(|&(n, _)| n).max().unwrap_or(0);
        let m_max = plan.iter().map(|&(_, m)| m).max().unwrap_or(0);
        if m_max == 0 {
            return Err(ExtractError::EmptyOutput);
        }
        Some(ToeplitzSeed::new(n_max, m_max, seed_for(n_max, m_max))?)
    } else {
        None
    };
    let mut out = BitString::zeros(0);
    let mut offset = 0usize;
    let mut seed_bits_used = 0usize;
    for &(n_i, m_i) in plan {
        let block = input.slice(offset, n_i);
        offset += n_i;
        if m_i == 0 {
            continue;
        }
        let seed = match &expander_seed {
            Some(master) => master.prefix(n_i, m_i)?,
            None => {
                let bits = seed_for(n_i, m_i);
                seed_bits_used += bits.len();
                ToeplitzSeed::new(n_i, m_i, bits)?
            }
        };
        let extracted = toeplitz_extract(&block, &seed)?;
        out.extend(&extracted);
    }
    if let Some(master) = expander_seed {
        seed_bits_used = master.bits().len();
    }
    Ok((out, seed_bits_used))
}
