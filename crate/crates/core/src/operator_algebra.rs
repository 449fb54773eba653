//! Superoperators of continuous-measurement filtering.
//!
//! For a system with Hamiltonian H and coupling operator L, the conditional
//! density operator under homodyne detection obeys the Itô equation
//!
//! ```text
//! dρ = 𝓛†(ρ) dt + (Lρ + ρL† − ρ·Tr(ρ(L+L†))) (dY − Tr(ρ(L+L†)) dt)
//! 𝓛†(ρ) = −i[H,ρ] + LρL† − ½(L†Lρ + ρL†L)
//! ```
//!
//! and the equivalent unnormalized linear Stratonovich form is
//!
//! ```text
//! dρ̄ = (−i[H,ρ̄] − 𝒮_L(ρ̄)) dt + (Lρ̄ + ρ̄L†) ∘dY
//! 𝒮_L(ρ̄) = ((L+L†)Lρ̄ + ρ̄L†(L+L†)) / 2,     ρ = ρ̄ / Tr(ρ̄).
//! ```
//!
//! This module owns the dense realizations of those maps plus the state
//! types they act on. The Heisenberg-picture generator [`lindblad`] is the
//! exact trace dual of [`adjoint_lindblad`]: Tr(𝓛†(ρ)X) = Tr(ρ𝓛(X)) holds
//! for arbitrary ρ, X, which fixes its Hamiltonian term to +i[H,X] and its
//! sandwich term to L†XL.

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, hermiticity_defect, min_eigenvalue, CMat, C64, I,
};
use crate::tol;

/// Immutable system data: dimension, Hamiltonian, coupling operator, and
/// the operator products the filtering equations reuse every step.
#[derive(Debug, Clone)]
pub struct SystemModel {
    dim: usize,
    hamiltonian: CMat,
    coupling: CMat,
    coupling_adjoint: CMat,
    /// L + L†, the measured quadrature.
    coupling_sum: CMat,
    /// L†L, the dissipator quadratic form.
    dagger_product: CMat,
    /// (L + L†)L, the left factor of 𝒮_L.
    strat_left: CMat,
}

impl SystemModel {
    /// Validates shapes and self-adjointness of H, then freezes the
    /// derived products.
    pub fn new(hamiltonian: CMat, coupling: CMat) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if hamiltonian.ncols() != dim || !coupling.is_square() {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: coupling.nrows(),
            });
        }
        if coupling.nrows() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: coupling.nrows(),
            });
        }
        if dim == 0 || dim > tol::MAX_DIM {
            return Err(Error::UnsupportedDimension {
                dim,
                max: tol::MAX_DIM,
            });
        }
        let h_defect = hermiticity_defect(&hamiltonian);
        if h_defect > tol::OPERATOR_SELF_ADJOINT_REL {
            return Err(Error::NotSelfAdjoint { defect: h_defect });
        }
        let coupling_adjoint = coupling.adjoint();
        let coupling_sum = &coupling + &coupling_adjoint;
        let dagger_product = &coupling_adjoint * &coupling;
        let strat_left = &coupling_sum * &coupling;
        Ok(Self {
            dim,
            hamiltonian,
            coupling,
            coupling_adjoint,
            coupling_sum,
            dagger_product,
            strat_left,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.hamiltonian
    }

    pub fn coupling(&self) -> &CMat {
        &self.coupling
    }

    pub fn coupling_adjoint(&self) -> &CMat {
        &self.coupling_adjoint
    }

    /// L + L†.
    pub fn coupling_sum(&self) -> &CMat {
        &self.coupling_sum
    }

    /// L†L.
    pub fn dagger_product(&self) -> &CMat {
        &self.dagger_product
    }

    /// (L + L†)L, the left factor of the Stratonovich drift correction.
    pub fn strat_left(&self) -> &CMat {
        &self.strat_left
    }

    pub(crate) fn check_dim(&self, x: &CMat) -> Result<()> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: x.nrows(),
            });
        }
        Ok(())
    }
}

/// The unnormalized state ρ̄ of the linear filtering equation. Self-adjoint,
/// strictly positive trace, positive semidefinite up to integration noise
/// (eigenvalue floor scales with the trace, which is free to grow or decay).
#[derive(Debug, Clone)]
pub struct UnnormalizedState {
    matrix: CMat,
}

impl UnnormalizedState {
    pub fn new(matrix: CMat) -> Result<Self> {
        let defect = hermiticity_defect(&matrix);
        if defect > tol::HERMITICITY_REL {
            return Err(Error::NotSelfAdjoint { defect });
        }
        let trace = matrix.trace().re;
        if !trace.is_finite() || trace <= tol::TRACE_FLOOR {
            return Err(Error::NonPositiveTrace { trace });
        }
        let floor = tol::POSITIVITY_FLOOR * trace.max(1.0);
        let min_eig = min_eigenvalue(&matrix);
        if min_eig < floor {
            return Err(Error::PositivityViolation {
                eigenvalue: min_eig,
                floor,
            });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }
}

/// A density operator: self-adjoint, unit trace, positive semidefinite up
/// to the integration-noise floor.
#[derive(Debug, Clone)]
pub struct DensityState {
    matrix: CMat,
}

impl DensityState {
    pub fn new(matrix: CMat) -> Result<Self> {
        let defect = hermiticity_defect(&matrix);
        if defect > tol::HERMITICITY_REL {
            return Err(Error::NotSelfAdjoint { defect });
        }
        let trace = matrix.trace().re;
        let trace_defect = (trace - 1.0).abs();
        if !trace_defect.is_finite() || trace_defect > tol::TRACE_ONE_ABS {
            return Err(Error::TraceNotOne {
                defect: trace_defect,
            });
        }
        let min_eig = min_eigenvalue(&matrix);
        if min_eig < tol::POSITIVITY_FLOOR {
            return Err(Error::PositivityViolation {
                eigenvalue: min_eig,
                floor: tol::POSITIVITY_FLOOR,
            });
        }
        Ok(Self { matrix })
    }

    /// Constructs a density state from a self-adjoint matrix by renormalizing
    /// its trace to one exactly. The eigenvalue floor is not checked here;
    /// trajectory integrators record the spectrum floor of every step in a
    /// positivity monitor instead of failing on it.
    pub(crate) fn renormalized(matrix: CMat) -> Result<Self> {
        let defect = hermiticity_defect(&matrix);
        if defect > tol::HERMITICITY_REL {
            return Err(Error::NotSelfAdjoint { defect });
        }
        let trace = matrix.trace().re;
        if !trace.is_finite() || trace <= tol::TRACE_FLOOR {
            return Err(Error::NonPositiveTrace { trace });
        }
        Ok(Self {
            matrix: matrix.scale(1.0 / trace),
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Smallest eigenvalue, for positivity monitoring along trajectories.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// Independent real degrees of freedom of an n-dimensional density
    /// operator: n² real parameters of a Hermitian matrix minus the trace
    /// constraint.
    pub fn independent_real_dof(&self) -> usize {
        let n = self.matrix.nrows();
        n * n - 1
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }
}

/// Commutator [A, B] = AB − BA.
pub fn commutator(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(a * b - b * a)
}

/// Anticommutator {A, B} = AB + BA.
pub fn anticommutator(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(a * b + b * a)
}

/// Heisenberg-picture generator 𝓛(X) = i[H,X] + L†XL − ½(L†LX + XL†L).
///
/// This is the trace dual of [`adjoint_lindblad`], so that
/// Tr(𝓛†(ρ)X) = Tr(ρ𝓛(X)) identically.
pub fn lindblad(model: &SystemModel, x: &CMat) -> Result<CMat> {
    model.check_dim(x)?;
    let commut = &model.hamiltonian * x - x * &model.hamiltonian;
    let sandwich = &model.coupling_adjoint * x * &model.coupling;
    let quad = (&model.dagger_product * x + x * &model.dagger_product).scale(0.5);
    let out = commut * I + sandwich - quad;
    debug_assert!(
        hermiticity_defect(x) > tol::OPERATOR_SELF_ADJOINT_REL
            || hermiticity_defect(&out) <= 1e-12,
        "generator broke self-adjointness"
    );
    Ok(out)
}

/// Schrödinger-picture drift 𝓛†(ρ) = −i[H,ρ] + LρL† − ½(L†Lρ + ρL†L).
pub fn adjoint_lindblad(model: &SystemModel, rho: &CMat) -> Result<CMat> {
    model.check_dim(rho)?;
    let commut = &model.hamiltonian * rho - rho * &model.hamiltonian;
    let sandwich = &model.coupling * rho * &model.coupling_adjoint;
    let quad = (&model.dagger_product * rho + rho * &model.dagger_product).scale(0.5);
    let out = commut * (-I) + sandwich - quad;
    debug_assert!(
        hermiticity_defect(rho) > tol::OPERATOR_SELF_ADJOINT_REL
            || hermiticity_defect(&out) <= 1e-12,
        "drift broke self-adjointness"
    );
    Ok(out)
}

/// Stratonovich drift correction 𝒮_L(ρ̄) = ((L+L†)Lρ̄ + ρ̄L†(L+L†))/2.
///
/// With S = (L+L†)L this is ½(Sρ̄ + ρ̄S†), manifestly linear in ρ̄ and
/// self-adjoint on self-adjoint input.
pub fn stratonovich_drift_correction(model: &SystemModel, rho_bar: &CMat) -> Result<CMat> {
    model.check_dim(rho_bar)?;
    Ok((&model.strat_left * rho_bar + rho_bar * model.strat_left.adjoint()).scale(0.5))
}

/// Hilbert–Schmidt distance ‖A − B‖_F = √Tr((A−B)†(A−B)).
pub fn hs_distance(a: &CMat, b: &CMat) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok((a - b).norm())
}

/// ρ = ρ̄ / Tr(ρ̄). Refuses traces at or below the blow-down floor.
pub fn normalize(rho_bar: &UnnormalizedState) -> Result<DensityState> {
    let trace = rho_bar.trace();
    if trace <= tol::TRACE_FLOOR {
        return Err(Error::NonPositiveTrace { trace });
    }
    DensityState::new(rho_bar.matrix().scale(1.0 / trace))
}

/// e^{½Σ w_i A_i} for a commuting family of self-adjoint generators.
///
/// The weighted sum is Hermitian, so a single eigendecomposition of the sum
/// evaluates the exponential exactly for any commuting family; for diagonal
/// generators the result is the entrywise exponential. Commutativity is
/// validated here because every downstream identity (chart derivatives,
/// Fisher pairing) relies on it.
pub fn commuting_exponential(generators: &[CMat], weights: &[f64]) -> Result<CMat> {
    if generators.is_empty() || generators.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            left: generators.len(),
            right: weights.len(),
        });
    }
    let n = generators[0].nrows();
    for g in generators {
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: g.nrows(),
            });
        }
        let defect = hermiticity_defect(g);
        if defect > tol::OPERATOR_SELF_ADJOINT_REL {
            return Err(Error::NotSelfAdjoint { defect });
        }
    }
    for i in 0..generators.len() {
        for j in (i + 1)..generators.len() {
            let defect = (&generators[i] * &generators[j] - &generators[j] * &generators[i]).norm();
            if defect > tol::COMMUTATION_ABS {
                return Err(Error::NonCommutingGenerators { i, j, defect });
            }
        }
    }
    exp_weighted_sum(generators, weights, n)
}

/// Exponential of ½Σ w_i A_i without re-validating the family. Shared by
/// [`commuting_exponential`] and the chart evaluation hot path.
pub(crate) fn exp_weighted_sum(generators: &[CMat], weights: &[f64], n: usize) -> Result<CMat> {
    let mut exponent = CMat::zeros(n, n);
    for (g, &w) in generators.iter().zip(weights) {
        if w != 0.0 {
            exponent += g.scale(0.5 * w);
        }
    }
    let (values, u) = hermitian_eigen(&exponent);
    let extreme = values
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if !extreme.is_finite() || extreme > tol::THETA_SUP_LIMIT {
        return Err(Error::OverflowGuard {
            value: extreme,
            limit: tol::THETA_SUP_LIMIT,
        });
    }
    let d = CMat::from_diagonal(&values.map(|w| C64::new(w.exp(), 0.0)));
    Ok(&u * d * u.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, trace_product_re, zeros};
    use rand_chacha::rand_core::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    const TOL: f64 = 1e-12;

    /// Four-level measurement model: H = 0, L = diag(1,−1,1,−1) + 0.3|3⟩⟨0|,
    /// base state ρ0 = diag(1/8, 1/8, 3/8, 3/8).
    fn four_level() -> (SystemModel, CMat) {
        let mut l = zeros(4);
        for (i, v) in [1.0, -1.0, 1.0, -1.0].into_iter().enumerate() {
            l[(i, i)] = C64::new(v, 0.0);
        }
        l[(3, 0)] = C64::new(0.3, 0.0);
        let model = SystemModel::new(zeros(4), l).unwrap();
        let mut rho0 = zeros(4);
        for (i, v) in [0.125, 0.125, 0.375, 0.375].into_iter().enumerate() {
            rho0[(i, i)] = C64::new(v, 0.0);
        }
        (model, rho0)
    }

    fn rand_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut u = || (rng.next_u64() >> 11) as f64 * 2f64.powi(-53) - 0.5;
        let raw = CMat::from_fn(n, n, |_, _| C64::new(u(), u()));
        (&raw + raw.adjoint()).scale(0.5)
    }

    #[test]
    fn commutator_basics() {
        let a = rand_hermitian(4, 1);
        assert!(commutator(&a, &a).unwrap().norm() < TOL);
        assert!(commutator(&a, &identity(4)).unwrap().norm() < TOL);
        let d = CMat::from_fn(2, 2, |r, c| {
            C64::new(if r == c { if r == 0 { 1.0 } else { -1.0 } } else { 0.0 }, 0.0)
        });
        let mut e01 = zeros(2);
        e01[(0, 1)] = C64::new(1.0, 0.0);
        let c = commutator(&d, &e01).unwrap();
        assert!((c[(0, 1)] - C64::new(2.0, 0.0)).norm() < TOL);
        assert!((c.norm() - 2.0).abs() < TOL);
        assert!(commutator(&a, &identity(3)).is_err());
    }

    /// Oracle for the Heisenberg generator on the four-level model:
    /// 𝓛(A_1) with A_1 = |0⟩⟨0| evaluates, term by term, to
    /// −0.09|0⟩⟨0| + 0.15(|3⟩⟨0| + |0⟩⟨3|); in particular the (3,3)
    /// entry is zero, which distinguishes 𝓛 from 𝓛† at this input.
    #[test]
    fn lindblad_four_level_oracle() {
        let (model, _) = four_level();
        let mut a1 = zeros(4);
        a1[(0, 0)] = C64::new(1.0, 0.0);
        let out = lindblad(&model, &a1).unwrap();
        let mut expected = zeros(4);
        expected[(0, 0)] = C64::new(-0.09, 0.0);
        expected[(3, 0)] = C64::new(0.15, 0.0);
        expected[(0, 3)] = C64::new(0.15, 0.0);
        assert!((out - expected).norm() < TOL);
    }

    /// Oracle for the drift on the four-level model:
    /// 𝓛†(ρ0) = 0.1125(|3⟩⟨0| + |0⟩⟨3|) + 0.01125(|3⟩⟨3| − |0⟩⟨0|).
    #[test]
    fn adjoint_lindblad_four_level_oracle() {
        let (model, rho0) = four_level();
        let out = adjoint_lindblad(&model, &rho0).unwrap();
        let mut expected = zeros(4);
        expected[(3, 0)] = C64::new(0.1125, 0.0);
        expected[(0, 3)] = C64::new(0.1125, 0.0);
        expected[(3, 3)] = C64::new(0.01125, 0.0);
        expected[(0, 0)] = C64::new(-0.01125, 0.0);
        assert!((out - expected).norm() < TOL);
    }

    #[test]
    fn lindblad_commuting_diagonal_case_vanishes() {
        // H = 0 and L diagonal real: every term commutes and cancels.
        let mut l = zeros(3);
        for (i, v) in [0.7, -0.2, 1.1].into_iter().enumerate() {
            l[(i, i)] = C64::new(v, 0.0);
        }
        let model = SystemModel::new(zeros(3), l).unwrap();
        let mut x = zeros(3);
        for (i, v) in [0.5, 0.25, 0.25].into_iter().enumerate() {
            x[(i, i)] = C64::new(v, 0.0);
        }
        assert!(lindblad(&model, &x).unwrap().norm() < TOL);
        assert!(adjoint_lindblad(&model, &x).unwrap().norm() < TOL);
    }

    #[test]
    fn trace_duality_on_random_pairs() {
        let h = rand_hermitian(4, 7);
        let raw = rand_hermitian(4, 8) + rand_hermitian(4, 9).scale(0.3);
        let mut l = raw;
        l[(2, 0)] += C64::new(0.4, -0.2);
        let model = SystemModel::new(h, l).unwrap();
        for seed in 0..100 {
            let rho = rand_hermitian(4, 100 + seed);
            let x = rand_hermitian(4, 300 + seed);
            let lhs = trace_product_re(&adjoint_lindblad(&model, &rho).unwrap(), &x);
            let rhs = trace_product_re(&rho, &lindblad(&model, &x).unwrap());
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "duality broke at seed {seed}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn drift_is_traceless_on_self_adjoint_input() {
        let (model, _) = four_level();
        for seed in 0..20 {
            let rho = rand_hermitian(4, 40 + seed);
            let drift = adjoint_lindblad(&model, &rho).unwrap();
            assert!(drift.trace().norm() < TOL);
        }
    }

    /// With L = diag(1,−1,1,−1) (no off-diagonal term) L² = I, so
    /// 𝒮_L(ρ̄) = L²ρ̄ + ρ̄L² ... /2·2 = 2ρ̄ on diagonal ρ̄.
    #[test]
    fn drift_correction_diagonal_oracle() {
        let mut l = zeros(4);
        for (i, v) in [1.0, -1.0, 1.0, -1.0].into_iter().enumerate() {
            l[(i, i)] = C64::new(v, 0.0);
        }
        let model = SystemModel::new(zeros(4), l).unwrap();
        let mut rho = zeros(4);
        for (i, v) in [0.125, 0.125, 0.375, 0.375].into_iter().enumerate() {
            rho[(i, i)] = C64::new(v, 0.0);
        }
        let out = stratonovich_drift_correction(&model, &rho).unwrap();
        assert!((out - rho.scale(2.0)).norm() < TOL);

        let zero_model = SystemModel::new(zeros(4), zeros(4)).unwrap();
        assert!(stratonovich_drift_correction(&zero_model, &rho)
            .unwrap()
            .norm()
            < TOL);
    }

    #[test]
    fn superoperators_preserve_self_adjointness() {
        let (model, _) = four_level();
        for seed in 0..20 {
            let rho = rand_hermitian(4, 60 + seed);
            for out in [
                lindblad(&model, &rho).unwrap(),
                adjoint_lindblad(&model, &rho).unwrap(),
                stratonovich_drift_correction(&model, &rho).unwrap(),
            ] {
                assert!((&out - out.adjoint()).norm() <= 1e-12 * (1.0 + out.norm()));
            }
        }
    }

    #[test]
    fn hs_distance_examples() {
        let a = rand_hermitian(4, 3);
        assert!(hs_distance(&a, &a).unwrap() < TOL);
        let mut p = zeros(2);
        p[(0, 0)] = C64::new(1.0, 0.0);
        let mut q = zeros(2);
        q[(1, 1)] = C64::new(1.0, 0.0);
        assert!((hs_distance(&p, &q).unwrap() - 2f64.sqrt()).abs() < TOL);
        // Element-wise oracle.
        let b = rand_hermitian(4, 4);
        let mut acc = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                acc += (a[(r, c)] - b[(r, c)]).norm_sqr();
            }
        }
        assert!((hs_distance(&a, &b).unwrap() - acc.sqrt()).abs() < TOL);
        assert!(hs_distance(&a, &identity(3)).is_err());
    }

    #[test]
    fn normalize_examples() {
        let rho_bar = UnnormalizedState::new(identity(2).scale(2.0)).unwrap();
        let rho = normalize(&rho_bar).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < TOL);

        let (_, rho0) = four_level();
        let already = UnnormalizedState::new(rho0.clone()).unwrap();
        assert!((normalize(&already).unwrap().matrix() - rho0).norm() < TOL);
    }

    #[test]
    fn state_validation_rejects_broken_inputs() {
        let mut skew = zeros(2);
        skew[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            UnnormalizedState::new(skew),
            Err(Error::NotSelfAdjoint { .. })
        ));
        assert!(matches!(
            UnnormalizedState::new(zeros(2)),
            Err(Error::NonPositiveTrace { .. })
        ));
        let mut indefinite = identity(2);
        indefinite[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(matches!(
            UnnormalizedState::new(indefinite),
            Err(Error::PositivityViolation { .. })
        ));
        assert!(matches!(
            DensityState::new(identity(2)),
            Err(Error::TraceNotOne { .. })
        ));
    }

    #[test]
    fn commuting_exponential_diagonal_oracle() {
        let mut gens = Vec::new();
        for i in 0..4 {
            let mut p = zeros(4);
            p[(i, i)] = C64::new(1.0, 0.0);
            gens.push(p);
        }
        let id = commuting_exponential(&gens, &[0.0; 4]).unwrap();
        assert!((id - identity(4)).norm() < TOL);

        let theta = [0.4, -1.2, 0.0, 2.5];
        let e = commuting_exponential(&gens, &theta).unwrap();
        for (i, &t) in theta.iter().enumerate() {
            assert!((e[(i, i)].re - (0.5 * t).exp()).abs() < 1e-13);
        }
    }

    /// Scaling-and-squaring oracle for a single non-diagonal generator:
    /// e^{½θA} from six squarings of a converged power series. Rounding error
    /// doubles per squaring, so the squaring count is kept small and the
    /// series is carried far past machine precision instead.
    #[test]
    fn commuting_exponential_matches_scaling_and_squaring() {
        let a = rand_hermitian(4, 11);
        let theta = 1.7;
        let out = commuting_exponential(std::slice::from_ref(&a), &[theta]).unwrap();

        let scaled = a.scale(0.5 * theta / 2f64.powi(6));
        let mut series = identity(4);
        let mut term = identity(4);
        for k in 1..24 {
            term = (&term * &scaled).scale(1.0 / k as f64);
            series += &term;
        }
        let mut oracle = series;
        for _ in 0..6 {
            oracle = &oracle * &oracle;
        }
        let gap = (out - oracle).norm();
        assert!(gap < 1e-12, "scaling-and-squaring gap {gap:.3e}");
    }

    #[test]
    fn commuting_exponential_is_additive_in_weights() {
        let mut gens = Vec::new();
        for i in 0..3 {
            let mut p = zeros(3);
            p[(i, i)] = C64::new(1.0, 0.0);
            p[((i + 1) % 3, (i + 1) % 3)] = C64::new(0.5, 0.0);
            gens.push(p);
        }
        let theta = [0.3, -0.8, 1.1];
        let phi = [-0.2, 0.4, 0.9];
        let sum: Vec<f64> = theta.iter().zip(&phi).map(|(a, b)| a + b).collect();
        let lhs = commuting_exponential(&gens, &theta).unwrap()
            * commuting_exponential(&gens, &phi).unwrap();
        let rhs = commuting_exponential(&gens, &sum).unwrap();
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn commuting_exponential_rejects_non_commuting_family() {
        let mut sx = zeros(2);
        sx[(0, 1)] = C64::new(1.0, 0.0);
        sx[(1, 0)] = C64::new(1.0, 0.0);
        let mut sz = zeros(2);
        sz[(0, 0)] = C64::new(1.0, 0.0);
        sz[(1, 1)] = C64::new(-1.0, 0.0);
        assert!(matches!(
            commuting_exponential(&[sx, sz], &[1.0, 1.0]),
            Err(Error::NonCommutingGenerators { .. })
        ));
    }
}
