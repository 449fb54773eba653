//! Exponential submanifold of unnormalized states and its metric geometry.
//!
//! A chart is a commuting self-adjoint family {A_i} and a base density ρ_0:
//!
//! ```text
//! ρ̄_θ = e^{½Σθ_iA_i} ρ_0 e^{½Σθ_iA_i},    ∂̄_i = ½(A_iρ̄_θ + ρ̄_θA_i)
//! ```
//!
//! Tangent vectors pair through the symmetrized inner product
//! ½Tr(ρ̄(AB+BA)); identifying ∂̄_i with its e-representation A_i gives the
//! information matrix r_ij = Tr(∂̄_iA_j) and the orthogonal projection of an
//! ambient self-adjoint ν in coordinates c = R(θ)^{−1}[Tr(νA_j)]_j, which
//! satisfies the normal equations Tr((ν − Σc_i∂̄_i)A_j) = 0.

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, hermiticity_defect, trace_product_re, CMat, RMat, RVec};
use crate::operator_algebra::{exp_weighted_sum, DensityState};
use crate::tol;

/// A coordinate point θ with the box bound that keeps the exponential
/// chart inside floating-point range.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPoint {
    coords: Vec<f64>,
}

impl ThetaPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        check_theta(&coords)?;
        Ok(Self { coords })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            coords: vec![0.0; m],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }
}

fn check_theta(theta: &[f64]) -> Result<()> {
    for &t in theta {
        if !t.is_finite() {
            return Err(Error::NonFinite {
                what: "chart coordinate",
            });
        }
        if t.abs() > tol::THETA_SUP_LIMIT {
            return Err(Error::OverflowGuard {
                value: t.abs(),
                limit: tol::THETA_SUP_LIMIT,
            });
        }
    }
    Ok(())
}

/// Commuting self-adjoint generators with a base density operator.
/// Immutable after construction; all pairwise products are cached because
/// the metric and its derivative contract against them every filter step.
#[derive(Debug, Clone)]
pub struct Chart {
    dim_n: usize,
    generators: Vec<CMat>,
    base_state: CMat,
    /// sym[j*m + k] = ½(A_jA_k + A_kA_j).
    sym_products: Vec<CMat>,
}

impl Chart {
    pub fn new(generators: Vec<CMat>, base_state: CMat) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::DimensionMismatch { left: 0, right: 0 });
        }
        let n = base_state.nrows();
        if n == 0 || n > tol::MAX_DIM {
            return Err(Error::UnsupportedDimension {
                dim: n,
                max: tol::MAX_DIM,
            });
        }
        let m = generators.len();
        if m > n * n {
            return Err(Error::UnsupportedDimension {
                dim: m,
                max: n * n,
            });
        }
        for g in &generators {
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
        for i in 0..m {
            for j in (i + 1)..m {
                let defect =
                    (&generators[i] * &generators[j] - &generators[j] * &generators[i]).norm();
                if defect > tol::COMMUTATION_ABS {
                    return Err(Error::NonCommutingGenerators { i, j, defect });
                }
            }
        }
        // The base state must be a genuine density operator.
        let base = DensityState::new(base_state)?.into_matrix();
        let mut sym_products = Vec::with_capacity(m * m);
        for j in 0..m {
            for k in 0..m {
                sym_products
                    .push((&generators[j] * &generators[k] + &generators[k] * &generators[j]).scale(0.5));
            }
        }
        Ok(Self {
            dim_n: n,
            generators,
            base_state: base,
            sym_products,
        })
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    /// Number of chart coordinates m.
    pub fn dim_m(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[CMat] {
        &self.generators
    }

    pub fn base_state(&self) -> &CMat {
        &self.base_state
    }

    pub(crate) fn sym_product(&self, j: usize, k: usize) -> &CMat {
        &self.sym_products[j * self.dim_m() + k]
    }

    /// ρ̄_θ = E ρ_0 E with E = e^{½Σθ_iA_i}.
    pub fn state(&self, theta: &[f64]) -> Result<CMat> {
        if theta.len() != self.dim_m() {
            return Err(Error::DimensionMismatch {
                left: self.dim_m(),
                right: theta.len(),
            });
        }
        check_theta(theta)?;
        let e = exp_weighted_sum(&self.generators, theta, self.dim_n)?;
        // E is Hermitian, so EρE is Hermitian up to rounding.
        Ok(hermitian_part(&(&e * &self.base_state * &e)))
    }

    /// Tangent basis ∂̄_i at a precomputed state.
    pub fn tangent_at(&self, rho_bar: &CMat) -> Vec<CMat> {
        self.generators
            .iter()
            .map(|a| (a * rho_bar + rho_bar * a).scale(0.5))
            .collect()
    }

    /// Full frame (state, tangent basis, information matrix) at θ.
    pub fn frame(&self, theta: &[f64]) -> Result<ChartFrame<'_>> {
        let state = self.state(theta)?;
        let tangent = self.tangent_at(&state);
        let fisher = fisher_from_state(self, &state)?;
        Ok(ChartFrame {
            chart: self,
            theta: theta.to_vec(),
            state,
            tangent,
            fisher,
        })
    }
}

/// The information matrix R(θ) with its factorization, kept together so a
/// solve is a back-substitution, not a fresh decomposition.
///
/// Singularity is decided by the factorization itself, not by the spread of
/// the spectrum: a pivot that fails to stay strictly positive, or whose
/// square drops below `SINGULAR_METRIC_REL` of its own diagonal entry,
/// flags a degenerate direction. The per-coordinate test is scale free, so
/// a well-separated direction with a very small metric weight (routine late
/// in a collapse) is not confused with a chart whose generators overlap.
#[derive(Debug, Clone)]
pub struct FisherMatrix {
    entries: RMat,
    chol: Cholesky<f64, Dyn>,
    min_pivot_sq: f64,
    max_pivot_sq: f64,
}

impl FisherMatrix {
    fn new(entries: RMat) -> Result<Self> {
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(singular_diagnostics(&entries));
        }
        let chol =
            Cholesky::new(entries.clone()).ok_or_else(|| singular_diagnostics(&entries))?;
        let mut min_pivot_sq = f64::INFINITY;
        let mut max_pivot_sq = 0.0f64;
        let lower = chol.l_dirty();
        for j in 0..entries.nrows() {
            let pivot_sq = lower[(j, j)] * lower[(j, j)];
            if pivot_sq < tol::SINGULAR_METRIC_REL * entries[(j, j)] {
                return Err(singular_diagnostics(&entries));
            }
            min_pivot_sq = min_pivot_sq.min(pivot_sq);
            max_pivot_sq = max_pivot_sq.max(pivot_sq);
        }
        Ok(Self {
            entries,
            chol,
            min_pivot_sq,
            max_pivot_sq,
        })
    }

    pub fn entries(&self) -> &RMat {
        &self.entries
    }

    /// Conditioning estimate from the factorization pivots, ≥ 1 by
    /// construction; exact for a diagonal metric.
    pub fn condition_estimate(&self) -> f64 {
        self.max_pivot_sq / self.min_pivot_sq
    }

    /// Solves R x = rhs through the cached factorization.
    pub fn solve(&self, rhs: &RVec) -> RVec {
        self.chol.solve(rhs)
    }
}

/// Spectral diagnostics for a metric the factorization rejected; only built
/// on the failure path.
fn singular_diagnostics(entries: &RMat) -> Error {
    let eig = entries.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Error::SingularMetric { min_eig, max_eig }
}

/// Everything the filter coefficient formulas need at one θ.
#[derive(Debug, Clone)]
pub struct ChartFrame<'c> {
    chart: &'c Chart,
    theta: Vec<f64>,
    state: CMat,
    tangent: Vec<CMat>,
    fisher: FisherMatrix,
}

impl<'c> ChartFrame<'c> {
    pub fn chart(&self) -> &Chart {
        self.chart
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn state(&self) -> &CMat {
        &self.state
    }

    pub fn tangent(&self) -> &[CMat] {
        &self.tangent
    }

    pub fn fisher(&self) -> &FisherMatrix {
        &self.fisher
    }

    /// Projection coordinates c = R^{−1}[Tr(νA_j)]_j.
    pub fn project(&self, nu: &CMat) -> Result<Vec<f64>> {
        if nu.nrows() != self.chart.dim_n() || nu.ncols() != self.chart.dim_n() {
            return Err(Error::DimensionMismatch {
                left: self.chart.dim_n(),
                right: nu.nrows(),
            });
        }
        let rhs = RVec::from_fn(self.chart.dim_m(), |j, _| {
            trace_product_re(nu, &self.chart.generators()[j])
        });
        Ok(self.fisher.solve(&rhs).as_slice().to_vec())
    }

    /// ∂R/∂θ_i, using ∂r_jk/∂θ_i = Tr(∂̄_i · ½{A_j,A_k}).
    pub fn fisher_derivative(&self, i: usize) -> RMat {
        let m = self.chart.dim_m();
        RMat::from_fn(m, m, |j, k| {
            trace_product_re(&self.tangent[i], self.chart.sym_product(j, k))
        })
    }

    /// ∂²ρ̄/∂θ_p∂θ_q = ¼(A_pA_qρ̄ + A_pρ̄A_q + A_qρ̄A_p + ρ̄A_qA_p).
    pub fn second_derivative(&self, p: usize, q: usize) -> CMat {
        let a_p = &self.chart.generators()[p];
        let a_q = &self.chart.generators()[q];
        let rho = &self.state;
        (a_p * a_q * rho + a_p * rho * a_q + a_q * rho * a_p + rho * a_q * a_p).scale(0.25)
    }
}

fn fisher_from_state(chart: &Chart, rho_bar: &CMat) -> Result<FisherMatrix> {
    let m = chart.dim_m();
    // r_jk = Tr(ρ̄ · ½{A_j,A_k}) equals Tr(∂̄_jA_k) by cyclicity; the
    // symmetrized form keeps the matrix exactly symmetric.
    let entries = RMat::from_fn(m, m, |j, k| trace_product_re(rho_bar, chart.sym_product(j, k)));
    FisherMatrix::new((&entries + entries.transpose()).scale(0.5))
}

/// Chart evaluation as a standalone operation.
pub fn chart_state(chart: &Chart, theta: &[f64]) -> Result<CMat> {
    chart.state(theta)
}

/// Tangent basis ∂̄_i = ½(A_iρ̄_θ + ρ̄_θA_i) at θ.
pub fn tangent_basis(chart: &Chart, theta: &[f64]) -> Result<Vec<CMat>> {
    Ok(chart.tangent_at(&chart.state(theta)?))
}

/// Symmetrized inner product ½Tr(ρ̄(AB + BA)).
pub fn symmetrized_inner(rho_bar: &CMat, a: &CMat, b: &CMat) -> Result<f64> {
    let n = rho_bar.nrows();
    if a.nrows() != n || b.nrows() != n || a.ncols() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: a.nrows(),
        });
    }
    let sym = (a * b + b * a).scale(0.5);
    Ok(trace_product_re(rho_bar, &sym))
}

/// Information matrix R(θ) with factorization and conditioning estimate.
pub fn fisher_matrix(chart: &Chart, theta: &[f64]) -> Result<FisherMatrix> {
    fisher_from_state(chart, &chart.state(theta)?)
}

/// Coordinates of the orthogonal projection of ν onto the tangent space.
pub fn project_coordinates(chart: &Chart, theta: &[f64], nu: &CMat) -> Result<Vec<f64>> {
    chart.frame(theta)?.project(nu)
}

/// ∂R/∂θ_i as a standalone operation.
pub fn fisher_derivative(chart: &Chart, theta: &[f64], i: usize) -> Result<RMat> {
    if i >= chart.dim_m() {
        return Err(Error::DimensionMismatch {
            left: chart.dim_m(),
            right: i,
        });
    }
    Ok(chart.frame(theta)?.fisher_derivative(i))
}

/// ∂²ρ̄/∂θ_p∂θ_q as a standalone operation.
pub fn chart_second_derivative(chart: &Chart, theta: &[f64], p: usize, q: usize) -> Result<CMat> {
    let m = chart.dim_m();
    if p >= m || q >= m {
        return Err(Error::DimensionMismatch {
            left: m,
            right: p.max(q),
        });
    }
    Ok(chart.frame(theta)?.second_derivative(p, q))
}
