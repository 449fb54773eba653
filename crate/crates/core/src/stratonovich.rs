//! Iterated Stratonovich integrals, the multi-index differential operators of
//! the linear filter equation, and its truncated stochastic Taylor expansion.
//!
//! The linear (unnormalized) filter equation in Stratonovich form is
//!
//! ```text
//! dρ̄ = D⁰(ρ̄) dt + D¹(ρ̄) ∘ dY,
//! D⁰(X) = −i[H,X] − ½((L+L†)LX + X L†(L+L†)),    D¹(X) = LX + XL†.
//! ```
//!
//! For a multi-index α = (α_1,…,α_l) over {0,1} the composed operator is
//! D_α = D^{α_1} ∘ D_{(α_2,…,α_l)} and the iterated integral J_α nests with
//! α_1 innermost and α_l outermost. The solution expands as
//!
//! ```text
//! ρ̄(t0+Δ) = Σ_{α∈Λ_k} J_α(t0, t0+Δ) · D_α(ρ̄(t0)) + remainder,
//! ```
//!
//! with Λ_k the multi-indices of weight l(α)+n(α) ≤ k and a remainder carried
//! by the remainder set ℛ(Λ_k); its mean square is O(Δ^{k+1}).
//!
//! Integrals are evaluated on a uniform grid with the midpoint (trapezoidal)
//! rule, which is exact for J_{(0)}, J_{(1)}, J_{(0,0)}, J_{(1,1)} and
//! consistent with the Stratonovich calculus for the rest.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Chart, ChartFrame};
use crate::linalg::{hermitian_part, CMat, RMat, I};
use crate::multi_index::{lambda_set, remainder_set, MultiIndex};
use crate::noise;
use crate::operator_algebra::SystemModel;
use crate::tol;

/// Stratonovich drift D⁰(x) = −i[H,x] − ½(Sx + xS†), S = (L+L†)L.
pub(crate) fn strat_drift(model: &SystemModel, x: &CMat) -> CMat {
    let h = model.hamiltonian();
    let s = model.strat_left();
    (h * x - x * h) * (-I) - (s * x + x * s.adjoint()).scale(0.5)
}

/// Stratonovich gain D¹(x) = Lx + xL†.
pub(crate) fn strat_gain(model: &SystemModel, x: &CMat) -> CMat {
    model.coupling() * x + x * model.coupling_adjoint()
}

/// A scalar path sampled on a uniform grid: increments ΔY_j over
/// [t_j, t_{j+1}] and cumulative values Y(t_j) − Y(t_0).
#[derive(Debug, Clone)]
pub struct WienerPath {
    t0: f64,
    dt: f64,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
}

impl WienerPath {
    pub fn new(t0: f64, dt: f64, increments: Vec<f64>) -> Result<Self> {
        if !(t0.is_finite() && dt.is_finite()) || dt <= 0.0 {
            return Err(Error::NonFinite { what: "path grid" });
        }
        if increments.is_empty() {
            return Err(Error::ProcessGridMismatch {
                expected: 1,
                got: 0,
            });
        }
        let mut cumulative = Vec::with_capacity(increments.len() + 1);
        let mut sum = 0.0;
        cumulative.push(0.0);
        for &w in &increments {
            if !w.is_finite() {
                return Err(Error::NonFinite {
                    what: "path increment",
                });
            }
            sum += w;
            cumulative.push(sum);
        }
        Ok(Self {
            t0,
            dt,
            increments,
            cumulative,
        })
    }

    /// Samples a standard Wiener path from the counter-based noise source.
    pub fn sample(seed: u64, path_id: u64, t0: f64, dt: f64, steps: usize) -> Result<Self> {
        Self::new(
            t0,
            dt,
            noise::NoiseStream::wiener_increments(seed, path_id, steps, dt),
        )
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn num_steps(&self) -> usize {
        self.increments.len()
    }

    /// Final grid time t_0 + N·dt.
    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * self.increments.len() as f64
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Y(t_j) − Y(t_0) for j = 0..=N.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn grid_time(&self, j: usize) -> f64 {
        self.t0 + self.dt * j as f64
    }

    /// Grid index of t, requiring t to sit on a node up to relative slack.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let raw = (t - self.t0) / self.dt;
        let j = raw.round();
        if (raw - j).abs() > tol::GRID_REL || j < 0.0 || j > self.increments.len() as f64 {
            return Err(Error::TimeOffGrid {
                t,
                t0: self.t0,
                dt: self.dt,
            });
        }
        Ok(j as usize)
    }

    /// The restriction to the first `steps` increments, same origin.
    pub fn prefix(&self, steps: usize) -> Result<Self> {
        if steps == 0 || steps > self.increments.len() {
            return Err(Error::ProcessGridMismatch {
                expected: self.increments.len(),
                got: steps,
            });
        }
        Self::new(self.t0, self.dt, self.increments[..steps].to_vec())
    }
}

/// Values that can be accumulated by the midpoint rule. Implemented for
/// scalars and dense operator samples.
trait GridValue: Clone {
    fn zero_like(&self) -> Self;
    /// self += (a + b) · half_weight.
    fn midpoint_accumulate(&mut self, a: &Self, b: &Self, half_weight: f64);
    fn is_finite_value(&self) -> bool;
}

impl GridValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }

    fn midpoint_accumulate(&mut self, a: &Self, b: &Self, half_weight: f64) {
        *self += (a + b) * half_weight;
    }

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl GridValue for CMat {
    fn zero_like(&self) -> Self {
        CMat::zeros(self.nrows(), self.ncols())
    }

    fn midpoint_accumulate(&mut self, a: &Self, b: &Self, half_weight: f64) {
        *self += (a + b).scale(half_weight);
    }

    fn is_finite_value(&self) -> bool {
        self.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn iterated_on_grid<T: GridValue>(
    alpha: &MultiIndex,
    path: &WienerPath,
    samples: &[T],
) -> Result<T> {
    if alpha.len() > tol::MAX_INTEGRAL_LENGTH {
        return Err(Error::OrderTooLarge {
            order: alpha.len(),
            max: tol::MAX_INTEGRAL_LENGTH,
        });
    }
    let nodes = path.num_steps() + 1;
    if samples.len() != nodes {
        return Err(Error::ProcessGridMismatch {
            expected: nodes,
            got: samples.len(),
        });
    }
    if !samples.iter().all(GridValue::is_finite_value) {
        return Err(Error::NonFinite {
            what: "integrand sample",
        });
    }
    let mut level: Vec<T> = samples.to_vec();
    // Level i integrates against ξ^{α_i}; the first entry is innermost.
    for &entry in alpha.entries() {
        let mut next = Vec::with_capacity(nodes);
        let mut acc = level[0].zero_like();
        next.push(acc.clone());
        for j in 0..path.num_steps() {
            let weight = if entry == 0 {
                path.dt
            } else {
                path.increments()[j]
            };
            acc.midpoint_accumulate(&level[j], &level[j + 1], 0.5 * weight);
            next.push(acc.clone());
        }
        level = next;
    }
    Ok(level.last().cloned().expect("grid is nonempty"))
}

/// Iterated Stratonovich integral J_α[F](t_0, t_N) of an operator-valued
/// integrand sampled on the path grid (`samples[j]` = F(t_j)).
pub fn iterated_integral(
    alpha: &MultiIndex,
    path: &WienerPath,
    samples: &[CMat],
) -> Result<CMat> {
    iterated_on_grid(alpha, path, samples)
}

/// J_α(t_0, t_N) for the constant integrand F ≡ 1.
pub fn iterated_integral_unit(alpha: &MultiIndex, path: &WienerPath) -> Result<f64> {
    let samples = vec![1.0; path.num_steps() + 1];
    iterated_on_grid(alpha, path, &samples)
}

fn d_single(model: &SystemModel, entry: u8, x: &CMat) -> CMat {
    match entry {
        0 => strat_drift(model, x),
        _ => strat_gain(model, x),
    }
}

/// Composed differential operator D_α(X) = D^{α_1}(D^{α_2}(… D^{α_l}(X)…)).
///
/// D_∅ is the identity.
pub fn d_operator(model: &SystemModel, alpha: &MultiIndex, x: &CMat) -> Result<CMat> {
    model.check_dim(x)?;
    let mut value = x.clone();
    for &entry in alpha.entries().iter().rev() {
        value = d_single(model, entry, &value);
    }
    Ok(value)
}

/// Coordinate vector fields of a projected filter dθ = f dt + g ∘ dY,
/// provided as closures over a chart frame so the operator calculus stays
/// independent of any particular coefficient construction.
pub struct CoordinateFields<'a> {
    pub drift: &'a dyn Fn(&ChartFrame) -> Result<Vec<f64>>,
    pub gain: &'a dyn Fn(&ChartFrame) -> Result<Vec<f64>>,
    /// Jacobian ∂g_p/∂θ_q as an m×m matrix (row p, column q).
    pub gain_jacobian: &'a dyn Fn(&ChartFrame) -> Result<RMat>,
}

fn contract_tangent(frame: &ChartFrame, coeff: &[f64]) -> CMat {
    let n = frame.chart().dim_n();
    let mut out = CMat::zeros(n, n);
    for (c, t) in coeff.iter().zip(frame.tangent()) {
        out += t.scale(*c);
    }
    out
}

/// The operators L_α applied to the chart map, L⁰ = Σf_p ∂/∂θ_p and
/// L¹ = Σg_p ∂/∂θ_p, for α ∈ {∅, (0), (1), (1,1)}:
///
/// ```text
/// L_∅ ρ̄_θ = ρ̄_θ,   L⁰ρ̄_θ = Σf_p ∂̄_p,   L¹ρ̄_θ = Σg_p ∂̄_p,
/// L¹L¹ρ̄_θ = Σ_p (Jg·g)_p ∂̄_p + ¼(G²ρ̄ + 2Gρ̄G + ρ̄G²),   G = Σg_pA_p.
/// ```
///
/// Other multi-indices are rejected with `UnsupportedOrder`.
pub fn l_operator(
    chart: &Chart,
    theta: &[f64],
    alpha: &MultiIndex,
    fields: &CoordinateFields,
) -> Result<CMat> {
    let frame = chart.frame(theta)?;
    l_operator_at(&frame, alpha, fields)
}

/// `l_operator` at an already-built frame.
pub fn l_operator_at(
    frame: &ChartFrame,
    alpha: &MultiIndex,
    fields: &CoordinateFields,
) -> Result<CMat> {
    match alpha.entries() {
        [] => Ok(frame.state().clone()),
        [0] => Ok(contract_tangent(frame, &(fields.drift)(frame)?)),
        [1] => Ok(contract_tangent(frame, &(fields.gain)(frame)?)),
        [1, 1] => {
            let g = (fields.gain)(frame)?;
            let jac = (fields.gain_jacobian)(frame)?;
            let m = frame.chart().dim_m();
            if g.len() != m || jac.nrows() != m || jac.ncols() != m {
                return Err(Error::DimensionMismatch {
                    left: m,
                    right: g.len().max(jac.nrows()),
                });
            }
            let transport: Vec<f64> = (0..m)
                .map(|p| (0..m).map(|q| jac[(p, q)] * g[q]).sum())
                .collect();
            let mut out = contract_tangent(frame, &transport);
            let n = frame.chart().dim_n();
            let mut big_g = CMat::zeros(n, n);
            for (gp, a) in g.iter().zip(frame.chart().generators()) {
                big_g += a.scale(*gp);
            }
            let rho = frame.state();
            let gg = &big_g * &big_g;
            out += (&gg * rho + rho * &gg + (&big_g * rho * &big_g).scale(2.0)).scale(0.25);
            Ok(out)
        }
        _ => Err(Error::UnsupportedOrder {
            alpha: alpha.to_string(),
        }),
    }
}

/// One term of a truncated expansion: the scalar integral J_α over the
/// horizon and the constant operator D_α(ρ̄(t_0)).
#[derive(Debug, Clone)]
pub struct ExpansionTerm {
    pub integral: f64,
    pub coefficient: CMat,
}

/// Truncated Stratonovich-Taylor expansion of the linear filter solution.
#[derive(Debug, Clone)]
pub struct TaylorExpansion {
    pub order: usize,
    pub terms: BTreeMap<MultiIndex, ExpansionTerm>,
    /// Σ_{α∈Λ_k} J_α · D_α(ρ̄(t_0)).
    pub value: CMat,
}

/// Expands the linear filter solution to order k over the full span of
/// `path`, starting from ρ̄(t_0) = `rho_bar0`.
pub fn taylor_expand_true(
    model: &SystemModel,
    rho_bar0: &CMat,
    path: &WienerPath,
    order: usize,
) -> Result<TaylorExpansion> {
    if order > tol::MAX_EXPANSION_ORDER {
        return Err(Error::OrderTooLarge {
            order,
            max: tol::MAX_EXPANSION_ORDER,
        });
    }
    model.check_dim(rho_bar0)?;
    let n = model.dim();
    // Λ_k is suffix-closed, so D_α(ρ̄0) builds up from shorter indices in
    // canonical (length-then-lexicographic) order.
    let mut coefficients: BTreeMap<MultiIndex, CMat> = BTreeMap::new();
    let mut terms = BTreeMap::new();
    let mut value = CMat::zeros(n, n);
    for alpha in lambda_set(order)?.iter() {
        let coefficient = if alpha.is_empty() {
            rho_bar0.clone()
        } else {
            let suffix = alpha.remove_first()?;
            let inner = coefficients
                .get(&suffix)
                .expect("canonical order visits suffixes first");
            d_single(model, alpha.first().expect("nonempty index"), inner)
        };
        coefficients.insert(alpha.clone(), coefficient.clone());
        let integral = iterated_integral_unit(alpha, path)?;
        value += coefficient.scale(integral);
        terms.insert(
            alpha.clone(),
            ExpansionTerm {
                integral,
                coefficient,
            },
        );
    }
    Ok(TaylorExpansion {
        order,
        terms,
        value,
    })
}

/// One Heun (predictor-corrector) step of the linear Stratonovich equation.
///
/// ```text
/// k_1 = D⁰(ρ̄)Δt + D¹(ρ̄)ΔY,   k_2 = D⁰(ρ̄+k_1)Δt + D¹(ρ̄+k_1)ΔY,
/// ρ̄' = ρ̄ + ½(k_1 + k_2),
/// ```
///
/// re-symmetrized after the update.
pub fn heun_linear_step(model: &SystemModel, rho_bar: &CMat, dt: f64, dy: f64) -> Result<CMat> {
    model.check_dim(rho_bar)?;
    if !(dt.is_finite() && dt > 0.0) || !dy.is_finite() {
        return Err(Error::NonFinite { what: "step input" });
    }
    let rate = |x: &CMat| strat_drift(model, x).scale(dt) + strat_gain(model, x).scale(dy);
    let k1 = rate(rho_bar);
    let predictor = rho_bar + &k1;
    let k2 = rate(&predictor);
    let next = hermitian_part(&(rho_bar + (k1 + k2).scale(0.5)));
    if !next.is_finite_value() {
        return Err(Error::NonFinite { what: "state" });
    }
    Ok(next)
}

/// Configuration of a strong-error study for the order-k expansion.
#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    /// Truncation order k.
    pub order: usize,
    /// Horizons Δ; each must be an integer multiple of the fine step.
    pub deltas: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    /// Reference integrator step; defaults to min(Δ)/16 so the reference
    /// discretization error stays far below the smallest truncation signal.
    pub fine_step: Option<f64>,
}

/// Mean squared Hilbert-Schmidt error at one horizon, with the a priori
/// remainder envelope R̄·(2Δ)^{k+1}.
#[derive(Debug, Clone)]
pub struct ConvergencePoint {
    pub delta: f64,
    pub mse: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub order: usize,
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of ln(mse) against ln(Δ); `None` with fewer than
    /// two horizons.
    pub slope: Option<f64>,
    pub paths: usize,
    pub seed: u64,
}

/// Estimates E‖ρ̄(Δ) − expansion_k(Δ)‖² across Monte Carlo paths.
///
/// Per path, one fine-grid Heun pass over the largest horizon supplies the
/// reference solution at every requested Δ (smaller horizons are prefixes of
/// the same Brownian path), the empirical remainder envelope scans
/// max ‖D_β(ρ̄(t))‖² over β ∈ ℛ(Λ_k) along that trajectory, and the order-k
/// expansion is evaluated on each prefix.
pub fn convergence_study(
    model: &SystemModel,
    rho_bar0: &CMat,
    config: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    if config.order > tol::MAX_EXPANSION_ORDER {
        return Err(Error::OrderTooLarge {
            order: config.order,
            max: tol::MAX_EXPANSION_ORDER,
        });
    }
    if config.deltas.is_empty() || config.paths == 0 {
        return Err(Error::ProcessGridMismatch {
            expected: 1,
            got: 0,
        });
    }
    model.check_dim(rho_bar0)?;
    let min_delta = config.deltas.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_delta.is_finite() && min_delta > 0.0) {
        return Err(Error::HorizonOutOfRange { delta: min_delta });
    }
    let fine_step = config.fine_step.unwrap_or(min_delta / 16.0);
    if !(fine_step.is_finite() && fine_step > 0.0) || fine_step > min_delta {
        return Err(Error::HorizonOutOfRange { delta: fine_step });
    }
    // Every horizon must land on the fine grid.
    let mut target_steps = Vec::with_capacity(config.deltas.len());
    for &delta in &config.deltas {
        let raw = delta / fine_step;
        let steps = raw.round();
        if (raw - steps).abs() > tol::GRID_REL * raw.max(1.0) || steps < 1.0 {
            return Err(Error::TimeOffGrid {
                t: delta,
                t0: 0.0,
                dt: fine_step,
            });
        }
        target_steps.push(steps as usize);
    }
    let max_steps = *target_steps.iter().max().expect("nonempty deltas");
    let remainder_indices: Vec<MultiIndex> =
        remainder_set(config.order)?.iter().cloned().collect();

    struct PathOutcome {
        squared_errors: Vec<f64>,
        remainder_peak: f64,
    }

    let outcomes: Vec<Result<PathOutcome>> = (0..config.paths as u64)
        .into_par_iter()
        .map(|path_id| {
            let path = WienerPath::sample(config.seed, path_id, 0.0, fine_step, max_steps)?;
            // One fine pass; states at prefix horizons are the references.
            let mut rho = rho_bar0.clone();
            let mut references: Vec<Option<CMat>> = vec![None; target_steps.len()];
            let mut remainder_peak = remainder_scan(model, &remainder_indices, &rho)?;
            for j in 0..max_steps {
                rho = heun_linear_step(model, &rho, fine_step, path.increments()[j])
                    .map_err(|e| e.at_time(path.grid_time(j)))?;
                remainder_peak = remainder_peak.max(remainder_scan(model, &remainder_indices, &rho)?);
                for (slot, &target) in references.iter_mut().zip(&target_steps) {
                    if target == j + 1 {
                        *slot = Some(rho.clone());
                    }
                }
            }
            let mut squared_errors = Vec::with_capacity(target_steps.len());
            for (slot, &target) in references.iter().zip(&target_steps) {
                let reference = slot.as_ref().expect("every horizon is on the fine grid");
                let prefix = path.prefix(target)?;
                let expansion = taylor_expand_true(model, rho_bar0, &prefix, config.order)?;
                squared_errors.push((reference - &expansion.value).norm().powi(2));
            }
            Ok(PathOutcome {
                squared_errors,
                remainder_peak,
            })
        })
        .collect();

    let mut mse = vec![0.0; config.deltas.len()];
    let mut remainder_sup = 0.0f64;
    for outcome in outcomes {
        let outcome = outcome?;
        for (acc, err2) in mse.iter_mut().zip(&outcome.squared_errors) {
            *acc += err2;
        }
        remainder_sup = remainder_sup.max(outcome.remainder_peak);
    }
    for acc in &mut mse {
        *acc /= config.paths as f64;
    }

    let points: Vec<ConvergencePoint> = config
        .deltas
        .iter()
        .zip(&mse)
        .map(|(&delta, &mse)| ConvergencePoint {
            delta,
            mse,
            bound: remainder_sup * (2.0 * delta).powi(config.order as i32 + 1),
        })
        .collect();
    let slope = fit_log_slope(&points);
    Ok(ConvergenceReport {
        order: config.order,
        points,
        slope,
        paths: config.paths,
        seed: config.seed,
    })
}

fn remainder_scan(model: &SystemModel, indices: &[MultiIndex], rho: &CMat) -> Result<f64> {
    let mut peak = 0.0f64;
    for beta in indices {
        let norm = d_operator(model, beta, rho)?.norm();
        peak = peak.max(norm * norm);
    }
    Ok(peak)
}

fn fit_log_slope(points: &[ConvergencePoint]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.mse > 0.0 && p.delta > 0.0)
        .map(|p| (p.delta.ln(), p.mse.ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &usable {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}
