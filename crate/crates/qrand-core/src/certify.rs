//! Device-independent randomness certification: guessing probabilities of
//! behaviors, the CHSH min-entropy bound H∞(A,B|x,y) ≥ f(S), and
//! certified-rate accounting from finite statistics.

use thiserror::Error;

use crate::behaviors::{
    estimate_functional, evaluate_functional, Behavior, BehaviorError, BellFunctional,
    FunctionalEstimate, RoundRecords,
};
use crate::report::Kv;

/// The Tsirelson point 2√2, the quantum maximum of CHSH.
pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("input tuple {input:?} not part of the behavior's scenario")]
    UnknownSettings { input: Vec<usize> },
    #[error("CHSH value {0} outside the algebraic range [-4, 4]")]
    ValueOutOfRange(f64),
    #[error("behavior layer: {0}")]
    Behavior(#[from] BehaviorError),
}

/// Largest joint outcome probability for a settings tuple, with its
/// min-entropy: c = max_{a⃗} p(a⃗|x⃗), H∞ = −log₂ c.
pub fn guessing_probability(
    behavior: &Behavior,
    inputs: &[usize],
) -> Result<(f64, f64), CertifyError> {
    let s = behavior.scenario();
    if inputs.len() != s.parties() || inputs.iter().any(|&x| x >= s.inputs()) {
        return Err(CertifyError::UnknownSettings { input: inputs.to_vec() });
    }
    let x = s.input_index(inputs);
    let c = behavior
        .conditional(x)
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    Ok((c, -c.log2()))
}

/// Min-entropy certified per outcome pair at CHSH value S:
///
/// f(S) = 0 for S ≤ 2, and 1 − log₂(1 + √(2 − S²/4)) on (2, 2√2].
///
/// Values above 2√2 — possible from finite-sample fluctuation or
/// no-signaling boxes — clamp to the Tsirelson point with a warning. The
/// function is nondecreasing and convex on [2, 2√2].
pub fn min_entropy_bound_chsh(s: f64) -> Result<f64, CertifyError> {
    if !s.is_finite() || s.abs() > 4.0 {
        return Err(CertifyError::ValueOutOfRange(s));
    }
    if s <= 2.0 {
        return Ok(0.0);
    }
    let s = if s > TSIRELSON {
        log::warn!("CHSH value {s} above the Tsirelson point; clamping to 2√2");
        TSIRELSON
    } else {
        s
    };
    Ok(1.0 - (1.0 + (2.0 - s * s / 4.0).max(0.0).sqrt()).log2())
}

/// Certification result: observed and confidence-adjusted CHSH values and
/// the certified randomness they imply.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CertificationReport {
    pub s_hat: f64,
    pub s_lo: f64,
    pub confidence: f64,
    pub bits_per_round: f64,
    pub rounds: u64,
    pub certified_bits: u64,
    /// Whether s_lo had to be clamped from above the Tsirelson point.
    pub clamped: bool,
}

impl CertificationReport {
    fn from_estimate(est: FunctionalEstimate, confidence: f64) -> Result<Self, CertifyError> {
        let bits_per_round = min_entropy_bound_chsh(est.s_lo.clamp(-4.0, 4.0))?;
        Ok(Self {
            s_hat: est.s_hat,
            s_lo: est.s_lo,
            confidence,
            bits_per_round,
            rounds: est.rounds,
            certified_bits: (est.rounds as f64 * bits_per_round).floor() as u64,
            clamped: est.s_lo > TSIRELSON,
        })
    }

    pub fn to_kv(&self) -> Kv {
        let mut kv = Kv::new();
        kv.push("s_hat", self.s_hat)
            .push("s_lo", self.s_lo)
            .push("confidence", self.confidence)
            .push("bits_per_round", self.bits_per_round)
            .push("rounds", self.rounds)
            .push("certified_bits", self.certified_bits)
            .push("clamped", self.clamped);
        kv
    }
}

/// Certify randomness from recorded rounds: the plug-in estimate with its
/// Hoeffding lower bound feeds f, and R = ⌊N·f(S_lo)⌋.
///
/// S_lo at or below the classical bound yields a report with zero certified
/// bits; that outcome is data, not an error.
pub fn certify(
    records: &RoundRecords,
    functional: &BellFunctional,
    confidence: f64,
) -> Result<CertificationReport, CertifyError> {
    let est = estimate_functional(records, functional, confidence)?;
    CertificationReport::from_estimate(est, confidence)
}

/// Infinite-sample certification of an exact behavior table: S_lo = S_hat =
/// the exact functional value; no rounds, so no total.
pub fn certify_behavior(
    behavior: &Behavior,
    functional: &BellFunctional,
) -> Result<CertificationReport, CertifyError> {
    let s = evaluate_functional(functional, behavior)?;
    Ok(CertificationReport {
        s_hat: s,
        s_lo: s,
        confidence: 1.0,
        bits_per_round: min_entropy_bound_chsh(s.clamp(-4.0, 4.0))?,
        rounds: 0,
        certified_bits: 0,
        clamped: s > TSIRELSON,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::{
        chsh_quantum_behavior, enumerate_local_vertices, local_vertex, simulate_rounds, Scenario,
        SettingsDistribution,
    };

    #[test]
    fn guessing_probability_uniform_and_deterministic() {
        let uniform = Behavior::from_fn(Scenario::chsh(), |_, _| 0.25).unwrap();
        let (c, h) = guessing_probability(&uniform, &[0, 0]).unwrap();
        assert!((c - 0.25).abs() < 1e-12);
        assert!((h - 2.0).abs() < 1e-12);

        let vertex = local_vertex(Scenario::chsh(), 3).unwrap();
        let (c, h) = guessing_probability(&vertex, &[1, 0]).unwrap();
        assert_eq!(c, 1.0);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn guessing_probability_at_tsirelson() {
        let b = chsh_quantum_behavior();
        let (c, h) = guessing_probability(&b, &[0, 0]).unwrap();
        let expect_c = (1.0 + std::f64::consts::FRAC_1_SQRT_2) / 4.0;
        assert!((c - expect_c).abs() < 1e-9);
        assert!((h - 1.228446696836388).abs() < 1e-9);
    }

    #[test]
    fn unknown_settings_are_rejected() {
        let b = chsh_quantum_behavior();
        assert!(matches!(
            guessing_probability(&b, &[0, 2]),
            Err(CertifyError::UnknownSettings { .. })
        ));
        assert!(matches!(
            guessing_probability(&b, &[0]),
            Err(CertifyError::UnknownSettings { .. })
        ));
    }

    #[test]
    fn bound_endpoints() {
        assert_eq!(min_entropy_bound_chsh(2.0).unwrap(), 0.0);
        assert_eq!(min_entropy_bound_chsh(1.0).unwrap(), 0.0);
        assert_eq!(min_entropy_bound_chsh(-3.0).unwrap(), 0.0);
        assert!((min_entropy_bound_chsh(TSIRELSON).unwrap() - 1.0).abs() < 1e-9);
        // Above-Tsirelson values clamp instead of erroring.
        assert!((min_entropy_bound_chsh(3.5).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(
            min_entropy_bound_chsh(4.5),
            Err(CertifyError::ValueOutOfRange(_))
        ));
    }

    #[test]
    fn bound_is_monotone_and_convex() {
        let grid = 10_000;
        let xs: Vec<f64> =
            (0..=grid).map(|i| 2.0 + (TSIRELSON - 2.0) * i as f64 / grid as f64).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| min_entropy_bound_chsh(x).unwrap()).collect();
        for w in fs.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "f must be nondecreasing");
        }
        for i in 0..xs.len() - 2 {
            let mid = min_entropy_bound_chsh((xs[i] + xs[i + 2]) / 2.0).unwrap();
            assert!(
                mid <= (fs[i] + fs[i + 2]) / 2.0 + 1e-9,
                "midpoint convexity failed near S = {}",
                xs[i + 1]
            );
        }
    }

    #[test]
    fn local_vertices_certify_nothing() {
        for vertex in enumerate_local_vertices(Scenario::chsh()).unwrap() {
            let report = certify_behavior(&vertex, &BellFunctional::chsh()).unwrap();
            assert_eq!(report.bits_per_round, 0.0);
        }
    }

    #[test]
    fn exact_tsirelson_behavior_certifies_one_bit_per_round() {
        // f has a square-root singularity at 2√2, so one ulp of rounding in
        // the evaluated S widens to ~1e-8 in f.
        let report =
            certify_behavior(&chsh_quantum_behavior(), &BellFunctional::chsh()).unwrap();
        assert!((report.bits_per_round - 1.0).abs() < 1e-7);
    }

    #[test]
    fn vertex_records_certify_zero() {
        // Deterministic vertices estimate S exactly; S_lo then sits strictly
        // below the classical bound, so R = 0 with certainty.
        for index in [0u128, 5, 9, 15] {
            let vertex = local_vertex(Scenario::chsh(), index).unwrap();
            let records =
                simulate_rounds(&vertex, &SettingsDistribution::Uniform, 2_000, 77).unwrap();
            let report = certify(&records, &BellFunctional::chsh(), 0.99).unwrap();
            assert_eq!(report.certified_bits, 0, "vertex {index}");
            assert!(report.s_lo < 2.0);
        }
    }

    #[test]
    fn honest_million_rounds_certify_positive_rate() {
        let b = chsh_quantum_behavior();
        let records = simulate_rounds(&b, &SettingsDistribution::Uniform, 1_000_000, 11).unwrap();
        let report = certify(&records, &BellFunctional::chsh(), 0.99).unwrap();
        assert!(report.s_lo > 2.0, "one million honest rounds must stay above 2");
        assert!(report.certified_bits > 0);
        assert!(report.s_lo <= report.s_hat);
        assert!(report.bits_per_round > 0.0 && report.bits_per_round <= 2.0);
    }

    #[test]
    fn certify_is_monotone_in_rounds() {
        // Median S_lo never decreases when more honest rounds are collected.
        let b = chsh_quantum_behavior();
        let mut medians = vec![];
        for &n in &[2_000u64, 8_000, 32_000] {
            let mut values: Vec<f64> = (0..31)
                .map(|trial| {
                    let records =
                        simulate_rounds(&b, &SettingsDistribution::Uniform, n, 1000 + trial)
                            .unwrap();
                    certify(&records, &BellFunctional::chsh(), 0.99).unwrap().s_lo
                })
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(values[values.len() / 2]);
        }
        assert!(medians[1] >= medians[0]);
        assert!(medians[2] >= medians[1]);
    }

    #[test]
    fn report_kv_has_all_fields() {
        let report =
            certify_behavior(&chsh_quantum_behavior(), &BellFunctional::chsh()).unwrap();
        let text = report.to_kv().to_text();
        for key in ["s_hat", "s_lo", "bits_per_round", "certified_bits", "clamped"] {
            assert!(text.contains(key), "missing {key} in {text}");
        }
    }
}
