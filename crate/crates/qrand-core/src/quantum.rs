//! Minimal finite-dimensional quantum mechanics: density states, POVMs,
//! Kraus maps, Born-rule probabilities, post-measurement states, and the
//! Robertson-Schrödinger uncertainty product.
//!
//! All operators are dense complex matrices at dimensions small enough
//! (≤ 16 in practice) that double precision with a 1e-9 validation
//! tolerance is ample.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Validation tolerance for Hermiticity, normalization, and positivity.
pub const TOL: f64 = 1e-9;

/// Dense complex square matrix; the carrier for every operator here.
pub type SquareMatrix = DMatrix<Complex64>;
/// Dense complex vector; used for kets.
pub type ComplexVector = DVector<Complex64>;

#[derive(Debug, Error, PartialEq)]
pub enum QuantumError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("operator is not Hermitian within tolerance (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("density matrix trace is {trace:.12} instead of 1")]
    TraceNotOne { trace: f64 },
    #[error("operator has negative eigenvalue {eigenvalue:.3e}")]
    NotPositive { eigenvalue: f64 },
    #[error("POVM elements do not sum to identity (deviation {deviation:.3e})")]
    PovmSumNotIdentity { deviation: f64 },
    #[error("Kraus operators do not satisfy the completeness relation (deviation {deviation:.3e})")]
    KrausIncomplete { deviation: f64 },
    #[error("outcome index {index} out of range for {count} operators")]
    OutcomeOutOfRange { index: usize, count: usize },
    #[error("impossible outcome: probability {probability:.3e} is numerically zero")]
    ImpossibleOutcome { probability: f64 },
    #[error("state vector has norm {norm:.12}, expected 1")]
    KetNotNormalized { norm: f64 },
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> SquareMatrix {
    SquareMatrix::identity(dim, dim)
}

pub fn sigma_x() -> SquareMatrix {
    SquareMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sigma_y() -> SquareMatrix {
    SquareMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sigma_z() -> SquareMatrix {
    SquareMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Computational basis ket |i⟩ in the given dimension.
pub fn basis_ket(dim: usize, i: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(dim);
    v[i] = c(1.0, 0.0);
    v
}

pub fn dagger(m: &SquareMatrix) -> SquareMatrix {
    m.adjoint()
}

pub fn trace(m: &SquareMatrix) -> Complex64 {
    m.trace()
}

pub fn commutator(a: &SquareMatrix, b: &SquareMatrix) -> SquareMatrix {
    a * b - b * a
}

/// Kronecker product of two square matrices.
pub fn kron(a: &SquareMatrix, b: &SquareMatrix) -> SquareMatrix {
    a.kronecker(b)
}

fn check_square_finite(m: &SquareMatrix) -> Result<usize, QuantumError> {
    if m.nrows() != m.ncols() {
        return Err(QuantumError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QuantumError::NonFinite);
    }
    Ok(m.nrows())
}

fn hermiticity_deviation(m: &SquareMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

fn check_hermitian(m: &SquareMatrix, tol: f64) -> Result<(), QuantumError> {
    let deviation = hermiticity_deviation(m);
    if deviation > tol {
        return Err(QuantumError::NotHermitian { deviation });
    }
    Ok(())
}

/// Smallest eigenvalue of a Hermitian matrix.
///
/// Works on the real symmetric embedding [[Re H, -Im H], [Im H, Re H]],
/// whose spectrum is that of H with every eigenvalue doubled. This keeps the
/// positivity check on a full eigendecomposition (graceful for rank-deficient
/// states) without needing a complex eigensolver.
pub fn hermitian_min_eigenvalue(m: &SquareMatrix) -> f64 {
    let n = m.nrows();
    let mut real = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            real[(i, j)] = z.re;
            real[(i + n, j + n)] = z.re;
            real[(i + n, j)] = z.im;
            real[(i, j + n)] = -z.im;
        }
    }
    let eigen = real.symmetric_eigen();
    eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn check_psd(m: &SquareMatrix, tol: f64) -> Result<(), QuantumError> {
    let min = hermitian_min_eigenvalue(m);
    if min < -tol {
        return Err(QuantumError::NotPositive { eigenvalue: min });
    }
    Ok(())
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    matrix: SquareMatrix,
}

impl DensityState {
    pub fn new(matrix: SquareMatrix) -> Result<Self, QuantumError> {
        check_square_finite(&matrix)?;
        check_hermitian(&matrix, TOL)?;
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > TOL || tr.im.abs() > TOL {
            return Err(QuantumError::TraceNotOne { trace: tr.re });
        }
        check_psd(&matrix, TOL)?;
        Ok(Self { matrix })
    }

    /// Projector |ψ⟩⟨ψ| onto a normalized ket.
    pub fn pure(ket: &ComplexVector) -> Result<Self, QuantumError> {
        let norm = ket.norm();
        if (norm - 1.0).abs() > TOL {
            return Err(QuantumError::KetNotNormalized { norm });
        }
        Self::new(ket * ket.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: identity(dim) * c(1.0 / dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    /// Tr ρ², equals 1 exactly for pure states.
    pub fn purity(&self) -> f64 {
        trace(&(&self.matrix * &self.matrix)).re
    }

    /// Convex mixture λρ₁ + (1-λ)ρ₂.
    pub fn mix(lambda: f64, a: &DensityState, b: &DensityState) -> Result<Self, QuantumError> {
        if a.dim() != b.dim() {
            return Err(QuantumError::DimensionMismatch { left: a.dim(), right: b.dim() });
        }
        Self::new(&a.matrix * c(lambda, 0.0) + &b.matrix * c(1.0 - lambda, 0.0))
    }
}

/// A POVM: Hermitian PSD elements summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmElementSet {
    elements: Vec<SquareMatrix>,
}

impl PovmElementSet {
    pub fn new(elements: Vec<SquareMatrix>) -> Result<Self, QuantumError> {
        assert!(!elements.is_empty(), "POVM needs at least one element");
        let dim = check_square_finite(&elements[0])?;
        let mut sum = SquareMatrix::zeros(dim, dim);
        for e in &elements {
            let d = check_square_finite(e)?;
            if d != dim {
                return Err(QuantumError::DimensionMismatch { left: dim, right: d });
            }
            check_hermitian(e, TOL)?;
            check_psd(e, TOL)?;
            sum += e;
        }
        let deviation = (&sum - identity(dim)).norm();
        if deviation > TOL {
            return Err(QuantumError::PovmSumNotIdentity { deviation });
        }
        Ok(Self { elements })
    }

    /// Projective two-outcome POVM {(I+O)/2, (I-O)/2} for an involution
    /// (O² = I), e.g. any ±1-valued observable such as a Pauli combination.
    /// Outcome 0 is the +1 eigenspace.
    pub fn projective_pair(observable: &SquareMatrix) -> Result<Self, QuantumError> {
        let dim = check_square_finite(observable)?;
        check_hermitian(observable, TOL)?;
        let half = c(0.5, 0.0);
        let plus = (identity(dim) + observable) * half;
        let minus = (identity(dim) - observable) * half;
        Self::new(vec![plus, minus])
    }

    /// Computational-basis projectors {|i⟩⟨i|}.
    pub fn computational(dim: usize) -> Self {
        let elements = (0..dim)
            .map(|i| {
                let ket = basis_ket(dim, i);
                &ket * ket.adjoint()
            })
            .collect();
        Self { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn element(&self, i: usize) -> &SquareMatrix {
        &self.elements[i]
    }

    pub fn elements(&self) -> &[SquareMatrix] {
        &self.elements
    }
}

/// A set of Kraus operators satisfying Σ Mᵢ†Mᵢ = I.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    operators: Vec<SquareMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<SquareMatrix>) -> Result<Self, QuantumError> {
        assert!(!operators.is_empty(), "Kraus set needs at least one operator");
        let dim = check_square_finite(&operators[0])?;
        let mut sum = SquareMatrix::zeros(dim, dim);
        for m in &operators {
            let d = check_square_finite(m)?;
            if d != dim {
                return Err(QuantumError::DimensionMismatch { left: dim, right: d });
            }
            sum += dagger(m) * m;
        }
        let deviation = (&sum - identity(dim)).norm();
        if deviation > TOL {
            return Err(QuantumError::KrausIncomplete { deviation });
        }
        Ok(Self { operators })
    }

    /// The induced POVM elements Fᵢ = Mᵢ†Mᵢ.
    pub fn to_povm(&self) -> Result<PovmElementSet, QuantumError> {
        PovmElementSet::new(self.operators.iter().map(|m| dagger(m) * m).collect())
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operator(&self, i: usize) -> &SquareMatrix {
        &self.operators[i]
    }
}

/// Outcome probabilities pᵢ = Tr(ρ Fᵢ), clamped to [0, 1].
pub fn born_probabilities(
    state: &DensityState,
    povm: &PovmElementSet,
) -> Result<Vec<f64>, QuantumError> {
    if state.dim() != povm.dim() {
        return Err(QuantumError::DimensionMismatch { left: state.dim(), right: povm.dim() });
    }
    Ok(povm
        .elements()
        .iter()
        .map(|f| trace(&(state.matrix() * f)).re.clamp(0.0, 1.0))
        .collect())
}

/// State after observing `outcome`: Mᵢ ρ Mᵢ† / Tr(Mᵢ ρ Mᵢ†).
pub fn post_measurement_state(
    state: &DensityState,
    kraus: &KrausSet,
    outcome: usize,
) -> Result<DensityState, QuantumError> {
    if outcome >= kraus.len() {
        return Err(QuantumError::OutcomeOutOfRange { index: outcome, count: kraus.len() });
    }
    let m = kraus.operator(outcome);
    if m.nrows() != state.dim() {
        return Err(QuantumError::DimensionMismatch { left: state.dim(), right: m.nrows() });
    }
    let unnormalized = m * state.matrix() * dagger(m);
    let p = trace(&unnormalized).re;
    if p <= 1e-12 {
        return Err(QuantumError::ImpossibleOutcome { probability: p });
    }
    DensityState::new(unnormalized * c(1.0 / p, 0.0))
}

/// Robertson-Schrödinger check: returns (δX²·δY², ¼|Tr ρ[X,Y]|²).
///
/// The first component is always at least the second for valid inputs.
pub fn uncertainty_check(
    state: &DensityState,
    x: &SquareMatrix,
    y: &SquareMatrix,
) -> Result<(f64, f64), QuantumError> {
    for op in [x, y] {
        let d = check_square_finite(op)?;
        if d != state.dim() {
            return Err(QuantumError::DimensionMismatch { left: state.dim(), right: d });
        }
        check_hermitian(op, TOL)?;
    }
    let rho = state.matrix();
    let var = |op: &SquareMatrix| -> f64 {
        let mean = trace(&(rho * op)).re;
        let second = trace(&(rho * (op * op))).re;
        (second - mean * mean).max(0.0)
    };
    let lhs = var(x) * var(y);
    let comm = commutator(x, y);
    let rhs = 0.25 * trace(&(rho * comm)).norm_sqr();
    Ok((lhs, rhs))
}

/// Kronecker product of two density states.
pub fn tensor_states(a: &DensityState, b: &DensityState) -> DensityState {
    DensityState {
        matrix: kron(a.matrix(), b.matrix()),
    }
}

/// Random density matrix from a Ginibre draw G: ρ = GG†/Tr(GG†).
pub fn random_state<R: rand::Rng>(rng: &mut R, dim: usize) -> DensityState {
    let g = SquareMatrix::from_fn(dim, dim, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let m = &g * dagger(&g);
    let tr = trace(&m).re;
    DensityState::new(m * c(1.0 / tr, 0.0)).expect("Ginibre construction is a valid state")
}

/// Random rank-one projective POVM from the QR factor of a Ginibre matrix.
pub fn random_projective_povm<R: rand::Rng>(rng: &mut R, dim: usize) -> PovmElementSet {
    let g = SquareMatrix::from_fn(dim, dim, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let q = g.qr().q();
    let elements: Vec<SquareMatrix> = (0..dim)
        .map(|i| {
            let col = q.column(i).into_owned();
            &col * col.adjoint()
        })
        .collect();
    PovmElementSet::new(elements).expect("unitary columns give a projective POVM")
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian<R: rand::Rng>(rng: &mut R, dim: usize) -> SquareMatrix {
    let g = SquareMatrix::from_fn(dim, dim, |_, _| {
        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    (&g + dagger(&g)) * c(0.5, 0.0)
}

/// Shorthand for the ±1 projective measurement of an involution observable.
pub fn projectors_of_involution(observable: &SquareMatrix) -> PovmElementSet {
    PovmElementSet::projective_pair(observable).expect("involution observables are Hermitian")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{counter_rng, stream};
    use rand::Rng;

    fn ket0() -> ComplexVector {
        basis_ket(2, 0)
    }

    fn ket_plus() -> ComplexVector {
        let s = 1.0 / 2.0f64.sqrt();
        ComplexVector::from_vec(vec![c(s, 0.0), c(s, 0.0)])
    }

    fn random_projective<R: Rng>(rng: &mut R, dim: usize) -> PovmElementSet {
        random_projective_povm(rng, dim)
    }

    #[test]
    fn born_eigenstate_is_deterministic() {
        let state = DensityState::pure(&ket0()).unwrap();
        let povm = PovmElementSet::computational(2);
        let p = born_probabilities(&state, &povm).unwrap();
        assert!((p[0] - 1.0).abs() < TOL);
        assert!(p[1].abs() < TOL);
    }

    #[test]
    fn born_plus_state_is_balanced() {
        let state = DensityState::pure(&ket_plus()).unwrap();
        let povm = PovmElementSet::computational(2);
        let p = born_probabilities(&state, &povm).unwrap();
        assert!((p[0] - 0.5).abs() < TOL);
        assert!((p[1] - 0.5).abs() < TOL);
    }

    #[test]
    fn born_qudit_amplitudes() {
        // Σ αⱼ|j⟩ measured in the computational basis gives |αᵢ|².
        let dim = 4;
        let amps = [c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)];
        let ket = ComplexVector::from_vec(amps.to_vec());
        let state = DensityState::pure(&ket).unwrap();
        let p = born_probabilities(&state, &PovmElementSet::computational(dim)).unwrap();
        for (pi, a) in p.iter().zip(amps) {
            assert!((pi - a.norm_sqr()).abs() < TOL);
        }
    }

    #[test]
    fn born_rejects_dimension_mismatch() {
        let state = DensityState::pure(&ket0()).unwrap();
        let povm = PovmElementSet::computational(3);
        assert!(matches!(
            born_probabilities(&state, &povm),
            Err(QuantumError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn povm_must_sum_to_identity() {
        let half = identity(2) * c(0.4, 0.0);
        let err = PovmElementSet::new(vec![half.clone(), half]).unwrap_err();
        assert!(matches!(err, QuantumError::PovmSumNotIdentity { .. }));
    }

    #[test]
    fn post_measurement_collapses_plus_to_zero() {
        let state = DensityState::pure(&ket_plus()).unwrap();
        let p0 = &basis_ket(2, 0) * basis_ket(2, 0).adjoint();
        let p1 = &basis_ket(2, 1) * basis_ket(2, 1).adjoint();
        let kraus = KrausSet::new(vec![p0, p1]).unwrap();
        let collapsed = post_measurement_state(&state, &kraus, 0).unwrap();
        let expect = DensityState::pure(&ket0()).unwrap();
        assert!((collapsed.matrix() - expect.matrix()).norm() < TOL);
    }

    #[test]
    fn identity_kraus_is_noop() {
        let mut rng = counter_rng(21, stream::GENERIC, 0);
        let state = random_state(&mut rng, 3);
        let kraus = KrausSet::new(vec![identity(3)]).unwrap();
        let out = post_measurement_state(&state, &kraus, 0).unwrap();
        assert!((out.matrix() - state.matrix()).norm() < TOL);
    }

    #[test]
    fn rank_two_projector_update_matches_direct_arithmetic() {
        let mut rng = counter_rng(22, stream::GENERIC, 0);
        let state = random_state(&mut rng, 3);
        // E projects onto span{|0⟩, |1⟩}; complement completes the set.
        let mut e = SquareMatrix::zeros(3, 3);
        e[(0, 0)] = c(1.0, 0.0);
        e[(1, 1)] = c(1.0, 0.0);
        let comp = identity(3) - &e;
        let kraus = KrausSet::new(vec![e.clone(), comp]).unwrap();
        let out = post_measurement_state(&state, &kraus, 0).unwrap();
        // Independent dense evaluation of EρE / Tr(EρE).
        let direct = &e * state.matrix() * &e;
        let norm = trace(&direct).re;
        assert!(norm > 1e-12);
        assert!((out.matrix() - direct * c(1.0 / norm, 0.0)).norm() < TOL);
    }

    #[test]
    fn impossible_outcome_is_an_error() {
        let state = DensityState::pure(&ket0()).unwrap();
        let p0 = &basis_ket(2, 0) * basis_ket(2, 0).adjoint();
        let p1 = &basis_ket(2, 1) * basis_ket(2, 1).adjoint();
        let kraus = KrausSet::new(vec![p0, p1]).unwrap();
        let err = post_measurement_state(&state, &kraus, 1).unwrap_err();
        assert!(matches!(err, QuantumError::ImpossibleOutcome { .. }));
    }

    #[test]
    fn projective_repeat_gives_same_outcome() {
        // Fifth-postulate idempotence: repeating a projective measurement on
        // the post-measurement state reproduces the outcome with certainty.
        let mut rng = counter_rng(23, stream::GENERIC, 1);
        for _ in 0..50 {
            let dim = 2 + (rng.random::<u32>() % 3) as usize;
            let state = random_state(&mut rng, dim);
            let povm = random_projective(&mut rng, dim);
            let kraus = KrausSet::new(povm.elements().to_vec()).unwrap();
            let probs = born_probabilities(&state, &povm).unwrap();
            for (i, &p) in probs.iter().enumerate() {
                if p > 1e-6 {
                    let post = post_measurement_state(&state, &kraus, i).unwrap();
                    let again = born_probabilities(&post, &povm).unwrap();
                    assert!((again[i] - 1.0).abs() < 1e-9, "idempotence failed: {}", again[i]);
                }
            }
        }
    }

    #[test]
    fn uncertainty_equal_observables_zero_rhs() {
        let state = DensityState::pure(&ket_plus()).unwrap();
        let (_, rhs) = uncertainty_check(&state, &sigma_z(), &sigma_z()).unwrap();
        assert!(rhs.abs() < TOL);
    }

    #[test]
    fn uncertainty_ground_state_saturates() {
        let state = DensityState::pure(&ket0()).unwrap();
        let (lhs, rhs) = uncertainty_check(&state, &sigma_x(), &sigma_y()).unwrap();
        assert!((lhs - 1.0).abs() < TOL);
        assert!((rhs - 1.0).abs() < TOL);
    }

    #[test]
    fn uncertainty_maximally_mixed() {
        let state = DensityState::maximally_mixed(2);
        let (lhs, rhs) = uncertainty_check(&state, &sigma_x(), &sigma_y()).unwrap();
        assert!((lhs - 1.0).abs() < TOL);
        assert!(rhs.abs() < TOL);
    }

    #[test]
    fn uncertainty_rejects_non_hermitian() {
        let state = DensityState::pure(&ket0()).unwrap();
        let mut bad = sigma_x();
        bad[(0, 1)] = c(2.0, 0.5);
        assert!(matches!(
            uncertainty_check(&state, &bad, &sigma_y()),
            Err(QuantumError::NotHermitian { .. })
        ));
    }

    #[test]
    fn uncertainty_holds_on_random_triples() {
        let mut rng = counter_rng(24, stream::GENERIC, 2);
        for trial in 0..10_000 {
            let dim = 2 + (trial % 3);
            let state = random_state(&mut rng, dim);
            let x = random_hermitian(&mut rng, dim);
            let y = random_hermitian(&mut rng, dim);
            let (lhs, rhs) = uncertainty_check(&state, &x, &y).unwrap();
            assert!(lhs >= rhs - 1e-9, "violated at trial {trial}: {lhs} < {rhs}");
        }
    }

    #[test]
    fn tensor_identities() {
        let i4 = kron(&identity(2), &identity(2));
        assert!((i4 - identity(4)).norm() < TOL);

        let zero = DensityState::pure(&ket0()).unwrap();
        let one = DensityState::pure(&basis_ket(2, 1)).unwrap();
        let prod = tensor_states(&zero, &one);
        // |01⟩⟨01| has a single unit entry at row/col 1.
        assert!((prod.matrix()[(1, 1)] - c(1.0, 0.0)).norm() < TOL);
        assert!((trace(prod.matrix()).re - 1.0).abs() < TOL);
    }

    #[test]
    fn bell_state_from_basis_tensors_is_pure() {
        let s = 1.0 / 2.0f64.sqrt();
        let mut ket = ComplexVector::zeros(4);
        ket[0] = c(s, 0.0);
        ket[3] = c(s, 0.0);
        let rho = DensityState::pure(&ket).unwrap();
        assert!((trace(rho.matrix()).re - 1.0).abs() < TOL);
        assert!((rho.purity() - 1.0).abs() < TOL);
    }

    #[test]
    fn born_is_affine_in_the_state() {
        let mut rng = counter_rng(25, stream::GENERIC, 3);
        for _ in 0..200 {
            let a = random_state(&mut rng, 3);
            let b = random_state(&mut rng, 3);
            let povm = random_projective(&mut rng, 3);
            let lambda: f64 = rng.random();
            let mixed = DensityState::mix(lambda, &a, &b).unwrap();
            let pm = born_probabilities(&mixed, &povm).unwrap();
            let pa = born_probabilities(&a, &povm).unwrap();
            let pb = born_probabilities(&b, &povm).unwrap();
            for i in 0..pm.len() {
                let expect = lambda * pa[i] + (1.0 - lambda) * pb[i];
                assert!((pm[i] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn born_probabilities_sum_to_one() {
        let mut rng = counter_rng(26, stream::GENERIC, 4);
        for trial in 0..500 {
            let dim = 2 + (trial % 3);
            let state = random_state(&mut rng, dim);
            let povm = random_projective(&mut rng, dim);
            let p = born_probabilities(&state, &povm).unwrap();
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
