//! Centralized numeric tolerances.
//!
//! Every invariant check in the crate reads its threshold from here, so the
//! accepted noise levels are visible in one place and tests exercise the same
//! constants the library enforces.

/// Relative Hermiticity defect allowed for evolving states,
/// ‖X − X†‖_F ≤ HERMITICITY_REL · max(1, ‖X‖_F).
///
/// Integrators re-symmetrize every step, so any residual is accumulated
/// rounding error, far below this bound in practice.
pub const HERMITICITY_REL: f64 = 1e-10;

/// Relative Hermiticity defect allowed for model operators (Hamiltonian)
/// and chart generators. These are constructed once from exact input data,
/// so the tolerance is near machine precision.
pub const OPERATOR_SELF_ADJOINT_REL: f64 = 1e-12;

/// Eigenvalue floor for positive semidefiniteness of density-scale states.
/// Explicit integration steps can produce tiny negative eigenvalues; values
/// below this floor indicate a genuinely broken state, not rounding.
pub const POSITIVITY_FLOOR: f64 = -1e-8;

/// Allowed deviation of a density operator trace from one.
pub const TRACE_ONE_ABS: f64 = 1e-8;

/// Absolute trace threshold below which normalizing an unnormalized state
/// is refused (filter blow-down rather than numerical noise).
pub const TRACE_FLOOR: f64 = 1e-300;

/// Frobenius norm of [A_i, A_j] allowed for a commuting generator family.
pub const COMMUTATION_ABS: f64 = 1e-10;

/// The information matrix is declared singular when a Cholesky pivot fails
/// to stay strictly positive, or its square falls below this fraction of
/// the corresponding diagonal entry. The test compares each direction with
/// its own scale, so it flags generators that overlap while accepting
/// well-separated directions of any magnitude.
pub const SINGULAR_METRIC_REL: f64 = 1e-8;

/// Box bound ‖θ‖_∞ for chart coordinates, and the magnitude bound on the
/// Hermitian exponent of the chart map. e^{50} ≈ 5.2e21 still leaves
/// headroom in f64; beyond it the exponential chart is numerically void.
pub const THETA_SUP_LIMIT: f64 = 50.0;

/// Relative slack when locating a time on a uniform grid:
/// |t − t0 − j·dt| ≤ GRID_REL · dt.
pub const GRID_REL: f64 = 1e-9;

/// Absolute gap under which eigenvalues are grouped into one spectral
/// projector, and under which an eigenvalue counts as zero.
pub const EIGEN_GROUP_ABS: f64 = 1e-9;

/// Allowed defect for spectral projector identities (idempotency,
/// mutual orthogonality, reconstruction of the operator).
pub const SPECTRAL_DEFECT_ABS: f64 = 1e-10;

/// Largest supported truncation order for Λ_k / remainder-set enumeration.
/// Enumeration is brute force over {0,1}^≤(k+1); 16 keeps it under 3e5
/// candidate sequences.
pub const MAX_SET_ORDER: usize = 16;

/// Largest multi-index length accepted by the iterated-integral evaluator.
pub const MAX_INTEGRAL_LENGTH: usize = 6;

/// Largest expansion order accepted by the Taylor expansion driver.
pub const MAX_EXPANSION_ORDER: usize = 4;

/// Largest matrix dimension served by the dense kernels.
pub const MAX_DIM: usize = 32;
