//! Filter integrators and projection-filter coefficients.
//!
//! The normalized conditional state follows the Itô equation
//!
//! ```text
//! dρ = 𝓛†(ρ) dt + (Lρ + ρL† − Tr(ρ(L+L†))ρ)(dY − Tr(ρ(L+L†)) dt),
//! ```
//!
//! driven by the observation dY = Tr(ρ(L+L†)) dt + dW. Its unnormalized
//! Stratonovich form is linear (see [`crate::stratonovich`]), and projecting
//! that flow onto an exponential chart gives a finite-dimensional filter
//! dθ = f(θ) dt + g(θ) ∘ dY with
//!
//! ```text
//! g = R⁻¹ [Tr(ρ̄_θ(A_jL + L†A_j))]_j
//! ```
//!
//! shared by every variant, and a drift that distinguishes them:
//!
//! * `NewStratonovich`: f from projecting 𝓛†(ρ̄_θ) − ½L¹L¹(ρ̄_θ). Can be
//!   computed in ambient space (abstract route) or through coordinate traces;
//!   the two must agree.
//! * `NewIto`: the same filter in Itô form, f̄ = f + ½(∂g/∂θ)g, integrated
//!   by Euler-Maruyama.
//! * `Baseline`: f from projecting the Stratonovich drift D⁰(ρ̄_θ) alone.
//! * `SelfAdjoint`: closed form for self-adjoint L on the chart of its
//!   spectral projectors, g_j = 2λ_j and f = R⁻¹Φ − 2λ², which must
//!   reproduce `NewStratonovich` exactly in that regime.

use crate::error::{Error, Result};
use crate::geometry::{Chart, ChartFrame, ThetaPoint};
use crate::linalg::{
    hermitian_eigen, hermiticity_defect, trace_product_im, trace_product_re, CMat, RMat, RVec,
};
use crate::multi_index::MultiIndex;
use crate::operator_algebra::{
    adjoint_lindblad, hs_distance, lindblad, normalize, DensityState, SystemModel,
    UnnormalizedState,
};
use crate::stratonovich::{
    heun_linear_step, l_operator_at, strat_drift, strat_gain, CoordinateFields, WienerPath,
};
use crate::tol;

/// Drift/gain pair of a coordinate filter at one point of the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    pub drift: Vec<f64>,
    pub gain: Vec<f64>,
}

/// The implemented coordinate filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterVariant {
    /// Corrected projection filter, Stratonovich form, Heun integration.
    NewStratonovich,
    /// Corrected projection filter, Itô form, Euler-Maruyama integration.
    NewIto,
    /// Uncorrected projection of the Stratonovich drift.
    Baseline,
    /// Self-adjoint-coupling closed form on the spectral-projector chart.
    SelfAdjoint,
}

impl FilterVariant {
    pub fn label(&self) -> &'static str {
        match self {
            FilterVariant::NewStratonovich => "new-stratonovich",
            FilterVariant::NewIto => "new-ito",
            FilterVariant::Baseline => "baseline",
            FilterVariant::SelfAdjoint => "self-adjoint",
        }
    }
}

fn check_chart_model(model: &SystemModel, chart: &Chart) -> Result<()> {
    if model.dim() != chart.dim_n() {
        return Err(Error::DimensionMismatch {
            left: model.dim(),
            right: chart.dim_n(),
        });
    }
    Ok(())
}

/// A_jL + L†A_j for every chart generator; the pairing whose ρ̄-trace is the
/// gain numerator.
fn observation_pairings(model: &SystemModel, chart: &Chart) -> Vec<CMat> {
    chart
        .generators()
        .iter()
        .map(|a| a * model.coupling() + model.coupling_adjoint() * a)
        .collect()
}

/// Gain g = R⁻¹[Tr(νA_j)]_j from the ambient gain field ν = Lρ̄ + ρ̄L†.
pub fn gain_coefficients(model: &SystemModel, frame: &ChartFrame) -> Result<Vec<f64>> {
    check_chart_model(model, frame.chart())?;
    frame.project(&strat_gain(model, frame.state()))
}

/// Gain through the coordinate formula g = R⁻¹[Tr(ρ̄_θ(A_jL + L†A_j))]_j.
/// Algebraically identical to [`gain_coefficients`]; kept as an independent
/// code path so the identity is testable.
pub fn coordinate_gain(model: &SystemModel, frame: &ChartFrame) -> Result<Vec<f64>> {
    check_chart_model(model, frame.chart())?;
    let pairings = observation_pairings(model, frame.chart());
    let b = RVec::from_fn(frame.chart().dim_m(), |j, _| {
        trace_product_re(frame.state(), &pairings[j])
    });
    Ok(frame.fisher().solve(&b).as_slice().to_vec())
}

/// Jacobian ∂g_p/∂θ_q of the gain, column q from
///
/// ```text
/// ∂g/∂θ_q = R⁻¹(∂b/∂θ_q − (∂R/∂θ_q)g),   ∂b_j/∂θ_q = Tr(∂̄_q(A_jL + L†A_j)).
/// ```
pub fn gain_jacobian(model: &SystemModel, frame: &ChartFrame) -> Result<RMat> {
    check_chart_model(model, frame.chart())?;
    let m = frame.chart().dim_m();
    let pairings = observation_pairings(model, frame.chart());
    let b = RVec::from_fn(m, |j, _| trace_product_re(frame.state(), &pairings[j]));
    let g = frame.fisher().solve(&b);
    let mut jac = RMat::zeros(m, m);
    for q in 0..m {
        let db = RVec::from_fn(m, |j, _| {
            trace_product_re(&frame.tangent()[q], &pairings[j])
        });
        let column = frame.fisher().solve(&(db - frame.fisher_derivative(q) * &g));
        jac.set_column(q, &column);
    }
    Ok(jac)
}

/// Corrected Stratonovich drift and gain through the ambient route:
/// f = R⁻¹[Tr((𝓛†(ρ̄_θ) − ½L¹L¹ρ̄_θ)A_j)]_j.
pub fn new_coefficients_abstract(
    model: &SystemModel,
    frame: &ChartFrame,
) -> Result<FilterCoefficients> {
    check_chart_model(model, frame.chart())?;
    let zero_drift = |fr: &ChartFrame| -> Result<Vec<f64>> { Ok(vec![0.0; fr.chart().dim_m()]) };
    let gain_fn = |fr: &ChartFrame| gain_coefficients(model, fr);
    let jac_fn = |fr: &ChartFrame| gain_jacobian(model, fr);
    let fields = CoordinateFields {
        drift: &zero_drift,
        gain: &gain_fn,
        gain_jacobian: &jac_fn,
    };
    let l11 = l_operator_at(frame, &MultiIndex::from_slice(&[1, 1])?, &fields)?;
    let ambient = adjoint_lindblad(model, frame.state())? - l11.scale(0.5);
    Ok(FilterCoefficients {
        drift: frame.project(&ambient)?,
        gain: gain_coefficients(model, frame)?,
    })
}

/// Shared coordinate traces: b_j = Tr(ρ̄𝓛(A_j)) and the quadratic
/// q_j = gᵀΔ_jg = Tr(ρ̄G²A_j) with G = Σg_pA_p.
fn coordinate_traces(
    model: &SystemModel,
    frame: &ChartFrame,
    gain: &[f64],
) -> Result<(RVec, RVec)> {
    let chart = frame.chart();
    let m = chart.dim_m();
    let mut b_lind = RVec::zeros(m);
    for j in 0..m {
        b_lind[j] = trace_product_re(frame.state(), &lindblad(model, &chart.generators()[j])?);
    }
    let n = chart.dim_n();
    let mut big_g = CMat::zeros(n, n);
    for (gp, a) in gain.iter().zip(chart.generators()) {
        big_g += a.scale(*gp);
    }
    let weighted = frame.state() * &big_g * &big_g;
    let quad = RVec::from_fn(m, |j, _| {
        trace_product_re(&weighted, &chart.generators()[j])
    });
    Ok((b_lind, quad))
}

/// Itô-form coefficients: f̄ = R⁻¹[Tr(ρ̄𝓛(A_j)) − ½gᵀΔ_jg]_j with the
/// common gain.
pub fn ito_coefficients(model: &SystemModel, frame: &ChartFrame) -> Result<FilterCoefficients> {
    check_chart_model(model, frame.chart())?;
    let gain = coordinate_gain(model, frame)?;
    let (b_lind, quad) = coordinate_traces(model, frame, &gain)?;
    let drift = frame.fisher().solve(&(b_lind - quad.scale(0.5)));
    Ok(FilterCoefficients {
        drift: drift.as_slice().to_vec(),
        gain,
    })
}

/// Corrected Stratonovich drift through coordinate traces:
/// f = f̄ − ½(∂g/∂θ)g. Must agree with [`new_coefficients_abstract`].
pub fn new_coefficients_coordinates(
    model: &SystemModel,
    frame: &ChartFrame,
) -> Result<FilterCoefficients> {
    let ito = ito_coefficients(model, frame)?;
    let jac = gain_jacobian(model, frame)?;
    let m = ito.gain.len();
    let drift: Vec<f64> = (0..m)
        .map(|p| {
            let transport: f64 = (0..m).map(|q| jac[(p, q)] * ito.gain[q]).sum();
            ito.drift[p] - 0.5 * transport
        })
        .collect();
    Ok(FilterCoefficients {
        drift,
        gain: ito.gain,
    })
}

/// Uncorrected coefficients: the Stratonovich drift D⁰(ρ̄_θ) projected as-is.
pub fn baseline_coefficients(
    model: &SystemModel,
    frame: &ChartFrame,
) -> Result<FilterCoefficients> {
    check_chart_model(model, frame.chart())?;
    Ok(FilterCoefficients {
        drift: frame.project(&strat_drift(model, frame.state()))?,
        gain: gain_coefficients(model, frame)?,
    })
}

/// The printed coordinate drift formula kept verbatim as a diagnostic:
/// R⁻¹[Tr(ρ̄𝓛(A_j)) + ((∂g/∂θ)g)_j − ½gᵀΔ_jg]_j. It differs from the
/// Itô drift f̄ whenever (∂g/∂θ)g is not an R-eigenvector; the comparison
/// against f̄ is reported, not asserted.
pub fn transport_drift_diagnostic(model: &SystemModel, frame: &ChartFrame) -> Result<Vec<f64>> {
    check_chart_model(model, frame.chart())?;
    let gain = coordinate_gain(model, frame)?;
    let (b_lind, quad) = coordinate_traces(model, frame, &gain)?;
    let jac = gain_jacobian(model, frame)?;
    let m = gain.len();
    let psi = RVec::from_fn(m, |j, _| {
        let transport: f64 = (0..m).map(|q| jac[(j, q)] * gain[q]).sum();
        b_lind[j] + transport - 0.5 * quad[j]
    });
    Ok(frame.fisher().solve(&psi).as_slice().to_vec())
}

/// Spectral resolution A = Σ λ_i P_i of a self-adjoint operator with
/// eigenvalues grouped up to a gap tolerance and the kernel omitted.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Distinct nonzero eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal projectors onto the matching eigenspaces.
    pub projectors: Vec<CMat>,
}

pub fn spectral_decompose(op: &CMat) -> Result<SpectralDecomposition> {
    if !op.is_square() || op.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            left: op.nrows(),
            right: op.ncols(),
        });
    }
    let defect = hermiticity_defect(op);
    if defect > tol::OPERATOR_SELF_ADJOINT_REL {
        return Err(Error::NotSelfAdjoint { defect });
    }
    let n = op.nrows();
    let (values, vectors) = hermitian_eigen(op);
    let mut eigenvalues = Vec::new();
    let mut projectors: Vec<CMat> = Vec::new();
    let mut members: Vec<usize> = Vec::new();
    let flush = |members: &mut Vec<usize>,
                     eigenvalues: &mut Vec<f64>,
                     projectors: &mut Vec<CMat>| {
        if members.is_empty() {
            return;
        }
        let mean = members.iter().map(|&i| values[i]).sum::<f64>() / members.len() as f64;
        if mean.abs() > tol::EIGEN_GROUP_ABS {
            let mut p = CMat::zeros(n, n);
            for &i in members.iter() {
                let v = vectors.column(i);
                p += &v * v.adjoint();
            }
            eigenvalues.push(mean);
            projectors.push(p);
        }
        members.clear();
    };
    for i in 0..n {
        if let Some(&last) = members.last() {
            if (values[i] - values[last]).abs() > tol::EIGEN_GROUP_ABS {
                flush(&mut members, &mut eigenvalues, &mut projectors);
            }
        }
        members.push(i);
    }
    flush(&mut members, &mut eigenvalues, &mut projectors);

    // Grouping by mean adds at most the gap tolerance to the residual.
    let check_tol = tol::SPECTRAL_DEFECT_ABS + tol::EIGEN_GROUP_ABS;
    let mut reconstruction = CMat::zeros(n, n);
    for (i, p) in projectors.iter().enumerate() {
        let idem = (p * p - p).norm();
        if idem > check_tol {
            return Err(Error::SpectralDefect { defect: idem });
        }
        for q in projectors.iter().skip(i + 1) {
            let cross = (p * q).norm();
            if cross > check_tol {
                return Err(Error::SpectralDefect { defect: cross });
            }
        }
        reconstruction += p.scale(eigenvalues[i]);
    }
    let residual = (reconstruction - op).norm();
    if residual > check_tol {
        return Err(Error::SpectralDefect { defect: residual });
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        projectors,
    })
}

/// Constant part of the self-adjoint closed form: gains 2λ_j and the
/// quadratic offsets λ_j², aligned with the chart generator order.
struct SpectralPlan {
    gain: Vec<f64>,
    xi: Vec<f64>,
}

fn spectral_plan(model: &SystemModel, chart: &Chart) -> Result<SpectralPlan> {
    check_chart_model(model, chart)?;
    let defect = hermiticity_defect(model.coupling());
    if defect > tol::OPERATOR_SELF_ADJOINT_REL {
        return Err(Error::NotSelfAdjoint { defect });
    }
    let decomposition = spectral_decompose(model.coupling())?;
    let m = chart.dim_m();
    if decomposition.projectors.len() != m {
        return Err(Error::DimensionMismatch {
            left: m,
            right: decomposition.projectors.len(),
        });
    }
    let mut lambda = vec![0.0; m];
    let mut used = vec![false; m];
    for (index, a) in chart.generators().iter().enumerate() {
        let mut best = usize::MAX;
        let mut best_defect = f64::INFINITY;
        for (p, projector) in decomposition.projectors.iter().enumerate() {
            if used[p] {
                continue;
            }
            let d = (a - projector).norm();
            if d < best_defect {
                best_defect = d;
                best = p;
            }
        }
        if best == usize::MAX || best_defect > tol::SPECTRAL_DEFECT_ABS {
            return Err(Error::GeneratorProjectorMismatch {
                index,
                defect: best_defect,
            });
        }
        used[best] = true;
        lambda[index] = decomposition.eigenvalues[best];
    }
    Ok(SpectralPlan {
        gain: lambda.iter().map(|l| 2.0 * l).collect(),
        xi: lambda.iter().map(|l| l * l).collect(),
    })
}

fn spectral_drift(
    model: &SystemModel,
    plan: &SpectralPlan,
    frame: &ChartFrame,
) -> Result<Vec<f64>> {
    let chart = frame.chart();
    let m = chart.dim_m();
    let h = model.hamiltonian();
    // Φ_j = Tr(iρ̄[H,A_j]); real by self-adjointness, so the real part of
    // i·Tr(ρ̄[H,A_j]) is −Im Tr(ρ̄[H,A_j]).
    let phi = RVec::from_fn(m, |j, _| {
        let a = &chart.generators()[j];
        let comm = h * a - a * h;
        -trace_product_im(frame.state(), &comm)
    });
    let solved = frame.fisher().solve(&phi);
    Ok((0..m).map(|j| solved[j] - 2.0 * plan.xi[j]).collect())
}

/// Closed-form coefficients for self-adjoint L on its spectral-projector
/// chart: g_j = 2λ_j, f = R⁻¹Φ − 2λ² with Φ_j = Tr(iρ̄_θ[H,A_j]).
pub fn self_adjoint_coefficients(
    model: &SystemModel,
    frame: &ChartFrame,
) -> Result<FilterCoefficients> {
    let plan = spectral_plan(model, frame.chart())?;
    let drift = spectral_drift(model, &plan, frame)?;
    Ok(FilterCoefficients {
        drift,
        gain: plan.gain,
    })
}

/// Coefficients of `variant` at one frame.
pub fn filter_coefficients(
    model: &SystemModel,
    frame: &ChartFrame,
    variant: FilterVariant,
) -> Result<FilterCoefficients> {
    match variant {
        FilterVariant::NewStratonovich => new_coefficients_abstract(model, frame),
        FilterVariant::NewIto => ito_coefficients(model, frame),
        FilterVariant::Baseline => baseline_coefficients(model, frame),
        FilterVariant::SelfAdjoint => self_adjoint_coefficients(model, frame),
    }
}

/// Observation increment dY = Tr(ρ(L+L†)) dt + dW generated by the
/// normalized state ρ.
pub fn observation_increment(
    model: &SystemModel,
    rho: &DensityState,
    dt: f64,
    dw: f64,
) -> Result<f64> {
    model.check_dim(rho.matrix())?;
    if !(dt.is_finite() && dt > 0.0) || !dw.is_finite() {
        return Err(Error::NonFinite { what: "step input" });
    }
    Ok(trace_product_re(rho.matrix(), model.coupling_sum()) * dt + dw)
}

/// One Euler-Maruyama step of the normalized Itô filter equation, followed
/// by re-symmetrization and exact trace renormalization. Positivity is not
/// enforced: the only step failures are non-finite inputs and a collapsed
/// trace. Callers track the eigenvalue floor through the trajectory's
/// positivity monitor or [`DensityState::min_eigenvalue`].
pub fn sme_ito_step(
    model: &SystemModel,
    rho: &DensityState,
    dt: f64,
    dy: f64,
) -> Result<DensityState> {
    model.check_dim(rho.matrix())?;
    if !(dt.is_finite() && dt > 0.0) || !dy.is_finite() {
        return Err(Error::NonFinite { what: "step input" });
    }
    let matrix = rho.matrix();
    let pointer_mean = trace_product_re(matrix, model.coupling_sum());
    let innovation = dy - pointer_mean * dt;
    let drift = adjoint_lindblad(model, matrix)?;
    let gain = strat_gain(model, matrix) - matrix.scale(pointer_mean);
    let raw = matrix + drift.scale(dt) + gain.scale(innovation);
    DensityState::renormalized(crate::linalg::hermitian_part(&raw))
}

/// Reference trajectory of the normalized filter along one noise path,
/// together with the observation increments it generates.
#[derive(Debug, Clone)]
pub struct SmeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityState>,
    /// dY over each grid step, on the same grid as the driving noise.
    pub observation_increments: Vec<f64>,
    /// Positivity monitor: smallest eigenvalue of every recorded state,
    /// aligned with `states`. Excursions below the floor are recorded, not
    /// clamped and not treated as step failures.
    pub min_eigenvalues: Vec<f64>,
}

impl SmeTrajectory {
    /// Smallest eigenvalue recorded anywhere along the trajectory.
    pub fn worst_eigenvalue(&self) -> f64 {
        self.min_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of recorded states whose smallest eigenvalue lies below the
    /// positivity floor.
    pub fn floor_violations(&self) -> usize {
        self.min_eigenvalues
            .iter()
            .filter(|&&eig| eig < tol::POSITIVITY_FLOOR)
            .count()
    }
}

/// Integrates the normalized filter over a driving noise path dW,
/// synthesizing the observations dY = Tr(ρ(L+L†)) dt + dW as it goes.
pub fn integrate_sme(
    model: &SystemModel,
    rho0: &DensityState,
    noise_path: &WienerPath,
) -> Result<SmeTrajectory> {
    model.check_dim(rho0.matrix())?;
    let steps = noise_path.num_steps();
    let dt = noise_path.dt();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut observation_increments = Vec::with_capacity(steps);
    let mut min_eigenvalues = Vec::with_capacity(steps + 1);
    times.push(noise_path.t0());
    min_eigenvalues.push(rho0.min_eigenvalue());
    states.push(rho0.clone());
    for j in 0..steps {
        let t = noise_path.grid_time(j);
        let current = states.last().expect("states never empty");
        let dy = observation_increment(model, current, dt, noise_path.increments()[j])
            .map_err(|e| e.at_time(t))?;
        let next = sme_ito_step(model, current, dt, dy).map_err(|e| e.at_time(t))?;
        observation_increments.push(dy);
        min_eigenvalues.push(next.min_eigenvalue());
        states.push(next);
        times.push(noise_path.grid_time(j + 1));
    }
    Ok(SmeTrajectory {
        times,
        states,
        observation_increments,
        min_eigenvalues,
    })
}

/// Coordinate trajectory of one projection filter variant.
#[derive(Debug, Clone)]
pub struct FilterTrajectory {
    pub variant: FilterVariant,
    pub times: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
}

impl FilterTrajectory {
    /// Normalized chart states along the trajectory.
    pub fn normalized_states(&self, chart: &Chart) -> Result<Vec<DensityState>> {
        self.thetas
            .iter()
            .zip(&self.times)
            .map(|(theta, &t)| normalized_chart_state(chart, theta).map_err(|e| e.at_time(t)))
            .collect()
    }
}

/// ρ_θ = ρ̄_θ / Tr(ρ̄_θ).
pub fn normalized_chart_state(chart: &Chart, theta: &[f64]) -> Result<DensityState> {
    normalize(&UnnormalizedState::new(chart.state(theta)?)?)
}

fn axpy(theta: &[f64], scale: f64, delta: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .zip(delta)
        .map(|(t, d)| t + scale * d)
        .collect()
}

fn increment(coefficients: &FilterCoefficients, dt: f64, dy: f64) -> Vec<f64> {
    coefficients
        .drift
        .iter()
        .zip(&coefficients.gain)
        .map(|(f, g)| f * dt + g * dy)
        .collect()
}

/// Integrates dθ = f dt + g ∘ dY (Heun) or its Itô form (Euler-Maruyama,
/// for `NewIto`) along a given observation-increment path.
pub fn integrate_projection_filter(
    model: &SystemModel,
    chart: &Chart,
    variant: FilterVariant,
    observations: &WienerPath,
    theta0: &ThetaPoint,
) -> Result<FilterTrajectory> {
    check_chart_model(model, chart)?;
    if theta0.coords().len() != chart.dim_m() {
        return Err(Error::DimensionMismatch {
            left: chart.dim_m(),
            right: theta0.coords().len(),
        });
    }
    let steps = observations.num_steps();
    let dt = observations.dt();
    let mut times = Vec::with_capacity(steps + 1);
    let mut thetas = Vec::with_capacity(steps + 1);
    times.push(observations.t0());
    thetas.push(theta0.coords().to_vec());
    for j in 0..steps {
        let t = observations.grid_time(j);
        let dy = observations.increments()[j];
        let theta = thetas.last().expect("thetas never empty").clone();
        let frame = chart.frame(&theta).map_err(|e| e.at_time(t))?;
        let c1 = filter_coefficients(model, &frame, variant).map_err(|e| e.at_time(t))?;
        let next = match variant {
            FilterVariant::NewIto => axpy(&theta, 1.0, &increment(&c1, dt, dy)),
            _ => {
                let k1 = increment(&c1, dt, dy);
                let predictor = axpy(&theta, 1.0, &k1);
                let frame2 = chart.frame(&predictor).map_err(|e| e.at_time(t))?;
                let c2 =
                    filter_coefficients(model, &frame2, variant).map_err(|e| e.at_time(t))?;
                let k2 = increment(&c2, dt, dy);
                let half: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| 0.5 * (a + b)).collect();
                axpy(&theta, 1.0, &half)
            }
        };
        for &v in &next {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "filter coordinate",
                }
                .at_time(t));
            }
        }
        thetas.push(next);
        times.push(observations.grid_time(j + 1));
    }
    Ok(FilterTrajectory {
        variant,
        times,
        thetas,
    })
}

/// One Heun step of the linear Stratonovich equation; re-exported next to
/// the coordinate integrators since comparisons drive both from the same
/// observation path.
pub fn linear_stratonovich_step(
    model: &SystemModel,
    rho_bar: &UnnormalizedState,
    dt: f64,
    dy: f64,
) -> Result<UnnormalizedState> {
    UnnormalizedState::new(heun_linear_step(model, rho_bar.matrix(), dt, dy)?)
}

/// Hilbert-Schmidt distance between normalized states, the comparison
/// metric used throughout.
pub fn state_distance(a: &DensityState, b: &DensityState) -> Result<f64> {
    hs_distance(a.matrix(), b.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{zeros, C64};
    use approx::assert_relative_eq;

    const TOL: f64 = 1e-12;

    fn diag(entries: &[f64]) -> CMat {
        let mut a = zeros(entries.len());
        for (i, w) in entries.iter().enumerate() {
            a[(i, i)] = C64::new(*w, 0.0);
        }
        a
    }

    /// Four-level model with a non-normal coupling: L = diag(1,−1,1,−1)
    /// plus 0.3 in the (3,0) corner.
    fn four_level_model() -> SystemModel {
        let mut coupling = diag(&[1.0, -1.0, 1.0, -1.0]);
        coupling[(3, 0)] = C64::new(0.3, 0.0);
        SystemModel::new(zeros(4), coupling).unwrap()
    }

    fn base_density() -> CMat {
        diag(&[0.125, 0.125, 0.375, 0.375])
    }

    /// Chart of the four diagonal unit projectors.
    fn four_level_chart() -> Chart {
        let mut generators = Vec::new();
        for i in 0..4 {
            let mut a = zeros(4);
            a[(i, i)] = C64::new(1.0, 0.0);
            generators.push(a);
        }
        Chart::new(generators, base_density()).unwrap()
    }

    /// Two diagonal generators with non-constant action on their supports,
    /// so the gain genuinely depends on θ.
    fn varied_chart() -> Chart {
        let generators = vec![diag(&[2.0, 1.0, 0.0, 0.0]), diag(&[0.0, 0.0, 1.0, 3.0])];
        Chart::new(generators, base_density()).unwrap()
    }

    fn selfadjoint_model() -> SystemModel {
        SystemModel::new(zeros(4), diag(&[1.0, -1.0, 1.0, -1.0])).unwrap()
    }

    /// Spectral-projector chart of the self-adjoint coupling.
    fn projector_chart() -> Chart {
        let generators = vec![diag(&[1.0, 0.0, 1.0, 0.0]), diag(&[0.0, 1.0, 0.0, 1.0])];
        Chart::new(generators, base_density()).unwrap()
    }

    #[test]
    fn gain_matches_four_level_oracle() {
        let model = four_level_model();
        let chart = four_level_chart();
        let frame = chart.frame(&[0.0; 4]).unwrap();
        let gain = gain_coefficients(&model, &frame).unwrap();
        for (got, want) in gain.iter().zip([2.0, -2.0, 2.0, -2.0]) {
            assert_relative_eq!(got, &want, epsilon = TOL);
        }
    }

    #[test]
    fn gain_is_constant_on_the_projector_family() {
        // On a chart of disjoint diagonal projectors the weighted least
        // squares is exactly solvable, so g does not depend on θ and the
        // Jacobian vanishes identically.
        let model = four_level_model();
        let chart = four_level_chart();
        for theta in [
            [0.0, 0.0, 0.0, 0.0],
            [0.7, -0.4, 0.2, 1.1],
            [-1.5, 0.9, -0.3, 0.5],
        ] {
            let frame = chart.frame(&theta).unwrap();
            let gain = gain_coefficients(&model, &frame).unwrap();
            for (got, want) in gain.iter().zip([2.0, -2.0, 2.0, -2.0]) {
                assert_relative_eq!(got, &want, epsilon = 1e-10);
            }
            let jac = gain_jacobian(&model, &frame).unwrap();
            assert!(jac.norm() < 1e-9, "gain Jacobian should vanish");
        }
    }

    #[test]
    fn coordinate_and_ambient_gain_agree() {
        let model = four_level_model();
        for chart in [four_level_chart(), varied_chart()] {
            let sweep: Vec<Vec<f64>> = match chart.dim_m() {
                2 => vec![vec![0.0, 0.0], vec![0.6, -0.8], vec![-1.2, 0.4]],
                _ => vec![vec![0.0; 4], vec![0.5, -0.5, 0.25, -0.25]],
            };
            for theta in sweep {
                let frame = chart.frame(&theta).unwrap();
                let ambient = gain_coefficients(&model, &frame).unwrap();
                let coordinate = coordinate_gain(&model, &frame).unwrap();
                for (a, c) in ambient.iter().zip(&coordinate) {
                    assert_relative_eq!(a, c, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn gain_depends_on_theta_on_the_varied_chart() {
        let model = four_level_model();
        let chart = varied_chart();
        let g0 = gain_coefficients(&model, &chart.frame(&[0.0, 0.0]).unwrap()).unwrap();
        let g1 = gain_coefficients(&model, &chart.frame(&[0.5, -0.5]).unwrap()).unwrap();
        assert!(
            (g0[0] - g1[0]).abs() + (g0[1] - g1[1]).abs() > 1e-3,
            "varied chart should produce a theta-dependent gain"
        );
    }

    #[test]
    fn gain_jacobian_matches_finite_difference() {
        let model = four_level_model();
        let chart = varied_chart();
        let theta = [0.3, -0.45];
        let frame = chart.frame(&theta).unwrap();
        let analytic = gain_jacobian(&model, &frame).unwrap();
        let eps = 1e-5;
        for q in 0..2 {
            let mut plus = theta;
            let mut minus = theta;
            plus[q] += eps;
            minus[q] -= eps;
            let gp = gain_coefficients(&model, &chart.frame(&plus).unwrap()).unwrap();
            let gm = gain_coefficients(&model, &chart.frame(&minus).unwrap()).unwrap();
            for p in 0..2 {
                let fd = (gp[p] - gm[p]) / (2.0 * eps);
                assert!(
                    (analytic[(p, q)] - fd).abs() < 1e-6,
                    "gain Jacobian ({p},{q}) disagrees with finite difference"
                );
            }
        }
    }

    #[test]
    fn abstract_and_coordinate_drifts_agree() {
        let model = four_level_model();
        for chart in [four_level_chart(), varied_chart()] {
            let sweep: Vec<Vec<f64>> = match chart.dim_m() {
                2 => vec![vec![0.0, 0.0], vec![0.8, -0.3], vec![-0.6, 0.9]],
                _ => vec![vec![0.0; 4], vec![0.4, -0.7, 0.1, 0.3]],
            };
            for theta in sweep {
                let frame = chart.frame(&theta).unwrap();
                let abstract_route = new_coefficients_abstract(&model, &frame).unwrap();
                let coordinate_route = new_coefficients_coordinates(&model, &frame).unwrap();
                for (a, c) in abstract_route.drift.iter().zip(&coordinate_route.drift) {
                    assert_relative_eq!(a, c, epsilon = 1e-9);
                }
                for (a, c) in abstract_route.gain.iter().zip(&coordinate_route.gain) {
                    assert_relative_eq!(a, c, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn ito_drift_is_stratonovich_plus_half_transport() {
        let model = four_level_model();
        let chart = varied_chart();
        for theta in [[0.0, 0.0], [0.5, -0.2], [-0.9, 0.7]] {
            let frame = chart.frame(&theta).unwrap();
            let strat = new_coefficients_abstract(&model, &frame).unwrap();
            let ito = ito_coefficients(&model, &frame).unwrap();
            let jac = gain_jacobian(&model, &frame).unwrap();
            for p in 0..2 {
                let transport: f64 = (0..2).map(|q| jac[(p, q)] * strat.gain[q]).sum();
                assert_relative_eq!(
                    ito.drift[p],
                    strat.drift[p] + 0.5 * transport,
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn printed_drift_formula_matches_ito_when_transport_vanishes() {
        // On the projector family the gain is constant, so the transport term
        // drops and the printed formula coincides with the Itô drift.
        let model = four_level_model();
        let chart = four_level_chart();
        let frame = chart.frame(&[0.2, -0.1, 0.4, 0.0]).unwrap();
        let printed = transport_drift_diagnostic(&model, &frame).unwrap();
        let ito = ito_coefficients(&model, &frame).unwrap();
        for (a, b) in printed.iter().zip(&ito.drift) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn printed_drift_formula_deviates_under_transport() {
        let model = four_level_model();
        let chart = varied_chart();
        let frame = chart.frame(&[0.6, -0.4]).unwrap();
        let printed = transport_drift_diagnostic(&model, &frame).unwrap();
        let ito = ito_coefficients(&model, &frame).unwrap();
        let deviation: f64 = printed
            .iter()
            .zip(&ito.drift)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(
            deviation > 1e-6,
            "diagnostic should expose the transport discrepancy, got {deviation}"
        );
    }

    #[test]
    fn spectral_decomposition_of_the_selfadjoint_coupling() {
        let decomposition = spectral_decompose(&diag(&[1.0, -1.0, 1.0, -1.0])).unwrap();
        assert_eq!(decomposition.eigenvalues.len(), 2);
        assert_relative_eq!(decomposition.eigenvalues[0], -1.0, epsilon = TOL);
        assert_relative_eq!(decomposition.eigenvalues[1], 1.0, epsilon = TOL);
        assert!((decomposition.projectors[0].clone() - diag(&[0.0, 1.0, 0.0, 1.0])).norm() < 1e-10);
        assert!((decomposition.projectors[1].clone() - diag(&[1.0, 0.0, 1.0, 0.0])).norm() < 1e-10);
    }

    #[test]
    fn spectral_decomposition_drops_the_kernel_and_validates() {
        let decomposition = spectral_decompose(&diag(&[0.0, 0.0, 2.0])).unwrap();
        assert_eq!(decomposition.eigenvalues.len(), 1);
        assert_relative_eq!(decomposition.eigenvalues[0], 2.0, epsilon = TOL);
        assert!((decomposition.projectors[0].clone() - diag(&[0.0, 0.0, 1.0])).norm() < 1e-10);
        // Non-self-adjoint input is refused.
        let mut bad = zeros(2);
        bad[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            spectral_decompose(&bad),
            Err(Error::NotSelfAdjoint { .. })
        ));
    }

    #[test]
    fn spectral_decomposition_reconstructs_random_hermitian() {
        let mut op = zeros(3);
        op[(0, 0)] = C64::new(0.4, 0.0);
        op[(1, 1)] = C64::new(-1.2, 0.0);
        op[(2, 2)] = C64::new(0.9, 0.0);
        op[(0, 1)] = C64::new(0.3, 0.2);
        op[(1, 0)] = C64::new(0.3, -0.2);
        op[(1, 2)] = C64::new(-0.1, 0.5);
        op[(2, 1)] = C64::new(-0.1, -0.5);
        let decomposition = spectral_decompose(&op).unwrap();
        let mut rebuilt = zeros(3);
        for (l, p) in decomposition
            .eigenvalues
            .iter()
            .zip(&decomposition.projectors)
        {
            rebuilt += p.scale(*l);
        }
        assert!((rebuilt - op).norm() < 1e-10);
    }

    #[test]
    fn closed_form_matches_selfadjoint_oracle() {
        let model = selfadjoint_model();
        let chart = projector_chart();
        let frame = chart.frame(&[0.0, 0.0]).unwrap();
        let c = self_adjoint_coefficients(&model, &frame).unwrap();
        assert_relative_eq!(c.gain[0], 2.0, epsilon = TOL);
        assert_relative_eq!(c.gain[1], -2.0, epsilon = TOL);
        assert_relative_eq!(c.drift[0], -2.0, epsilon = TOL);
        assert_relative_eq!(c.drift[1], -2.0, epsilon = TOL);
    }

    #[test]
    fn closed_form_agrees_with_corrected_coefficients() {
        let model = selfadjoint_model();
        let chart = projector_chart();
        for theta in [[0.0, 0.0], [0.5, -0.3], [-1.0, 0.8], [2.0, 1.5]] {
            let frame = chart.frame(&theta).unwrap();
            let closed = self_adjoint_coefficients(&model, &frame).unwrap();
            let general = new_coefficients_abstract(&model, &frame).unwrap();
            for (a, b) in closed.gain.iter().zip(&general.gain) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
            for (a, b) in closed.drift.iter().zip(&general.drift) {
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn closed_form_rejects_wrong_regimes() {
        // Non-self-adjoint coupling.
        let model = four_level_model();
        let chart = projector_chart();
        let frame = chart.frame(&[0.0, 0.0]).unwrap();
        assert!(matches!(
            self_adjoint_coefficients(&model, &frame),
            Err(Error::NotSelfAdjoint { .. })
        ));
        // Self-adjoint coupling but generators that are not its projectors.
        let model = selfadjoint_model();
        let chart = varied_chart();
        let frame = chart.frame(&[0.0, 0.0]).unwrap();
        let err = self_adjoint_coefficients(&model, &frame).unwrap_err();
        assert!(matches!(err, Error::GeneratorProjectorMismatch { .. }));
    }

    #[test]
    fn sme_step_with_zero_innovation_is_pure_drift() {
        let model = four_level_model();
        let rho0 = DensityState::new(base_density()).unwrap();
        let dt = 1e-3;
        // dY equal to the pointer mean leaves only the deterministic part,
        // and the drift is trace-free so no renormalization occurs.
        let pointer = trace_product_re(rho0.matrix(), model.coupling_sum());
        let next = sme_ito_step(&model, &rho0, dt, pointer * dt).unwrap();
        let drift = adjoint_lindblad(&model, rho0.matrix()).unwrap();
        assert!(drift.trace().norm() < TOL);
        let expected = rho0.matrix() + drift.scale(dt);
        assert!((next.matrix() - expected).norm() < TOL);

        // Frozen values of the drift at the base state.
        let mut expected_drift = zeros(4);
        expected_drift[(3, 0)] = C64::new(0.1125, 0.0);
        expected_drift[(0, 3)] = C64::new(0.1125, 0.0);
        expected_drift[(3, 3)] = C64::new(0.01125, 0.0);
        expected_drift[(0, 0)] = C64::new(-0.01125, 0.0);
        assert!((drift - expected_drift).norm() < TOL);
    }

    #[test]
    fn sme_step_reports_negative_excursions_instead_of_failing() {
        let model = four_level_model();
        let rho = DensityState::new(diag(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        // A violent innovation drives the Euler update indefinite. The step
        // still returns a unit-trace state and the excursion shows up in the
        // spectrum, where the positivity monitor picks it up.
        let next = sme_ito_step(&model, &rho, 1e-6, -1.0).unwrap();
        assert!((next.matrix().trace().re - 1.0).abs() < 1e-12);
        assert!(next.min_eigenvalue() < tol::POSITIVITY_FLOOR);
        // Strict construction still rejects the same matrix.
        assert!(matches!(
            DensityState::new(next.matrix().clone()),
            Err(Error::PositivityViolation { .. })
        ));
    }

    #[test]
    fn sme_trajectory_stays_on_the_density_manifold() {
        let model = four_level_model();
        let rho0 = DensityState::new(base_density()).unwrap();
        let dt = 5.0 / 4096.0;
        let noise = WienerPath::sample(42, 0, 0.0, dt, 256).unwrap();
        let trajectory = integrate_sme(&model, &rho0, &noise).unwrap();
        assert_eq!(trajectory.states.len(), 257);
        assert_eq!(trajectory.observation_increments.len(), 256);
        assert_eq!(trajectory.min_eigenvalues.len(), 257);
        for (state, &monitored) in trajectory.states.iter().zip(&trajectory.min_eigenvalues) {
            assert!((state.matrix().trace().re - 1.0).abs() < 1e-12);
            assert!(state.min_eigenvalue() >= tol::POSITIVITY_FLOOR);
            assert_relative_eq!(monitored, state.min_eigenvalue(), epsilon = TOL);
        }
        assert_eq!(trajectory.floor_violations(), 0);
        assert!(trajectory.worst_eigenvalue() >= tol::POSITIVITY_FLOOR);
        // The base state has zero pointer mean, so the first observation is
        // the raw noise increment.
        assert_relative_eq!(
            trajectory.observation_increments[0],
            noise.increments()[0],
            epsilon = TOL
        );
    }

    #[test]
    fn euler_maruyama_filter_step_is_explicit() {
        let model = four_level_model();
        let chart = four_level_chart();
        let theta0 = ThetaPoint::zeros(4);
        let observations = WienerPath::new(0.0, 0.01, vec![0.05]).unwrap();
        let trajectory = integrate_projection_filter(
            &model,
            &chart,
            FilterVariant::NewIto,
            &observations,
            &theta0,
        )
        .unwrap();
        let frame = chart.frame(&[0.0; 4]).unwrap();
        let c = ito_coefficients(&model, &frame).unwrap();
        for p in 0..4 {
            let expected = c.drift[p] * 0.01 + c.gain[p] * 0.05;
            assert_relative_eq!(trajectory.thetas[1][p], expected, epsilon = TOL);
        }
    }

    #[test]
    fn heun_filter_step_uses_predictor_corrector() {
        let model = four_level_model();
        let chart = varied_chart();
        let theta0 = ThetaPoint::new(vec![0.1, -0.2]).unwrap();
        let (dt, dy) = (0.01, -0.03);
        let observations = WienerPath::new(0.0, dt, vec![dy]).unwrap();
        let trajectory = integrate_projection_filter(
            &model,
            &chart,
            FilterVariant::NewStratonovich,
            &observations,
            &theta0,
        )
        .unwrap();
        let frame = chart.frame(theta0.coords()).unwrap();
        let c1 = new_coefficients_abstract(&model, &frame).unwrap();
        let k1: Vec<f64> = (0..2).map(|p| c1.drift[p] * dt + c1.gain[p] * dy).collect();
        let predictor: Vec<f64> = (0..2).map(|p| theta0.coords()[p] + k1[p]).collect();
        let frame2 = chart.frame(&predictor).unwrap();
        let c2 = new_coefficients_abstract(&model, &frame2).unwrap();
        for p in 0..2 {
            let k2 = c2.drift[p] * dt + c2.gain[p] * dy;
            let expected = theta0.coords()[p] + 0.5 * (k1[p] + k2);
            assert_relative_eq!(trajectory.thetas[1][p], expected, epsilon = TOL);
        }
    }

    #[test]
    fn closed_form_and_general_filter_trajectories_coincide() {
        let model = selfadjoint_model();
        let chart = projector_chart();
        let theta0 = ThetaPoint::zeros(2);
        let observations = WienerPath::sample(5, 0, 0.0, 1.0 / 512.0, 64).unwrap();
        let general = integrate_projection_filter(
            &model,
            &chart,
            FilterVariant::NewStratonovich,
            &observations,
            &theta0,
        )
        .unwrap();
        let closed = integrate_projection_filter(
            &model,
            &chart,
            FilterVariant::SelfAdjoint,
            &observations,
            &theta0,
        )
        .unwrap();
        for (a, b) in general.thetas.iter().zip(&closed.thetas) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        // And the trajectories produce valid normalized states.
        let states = general.normalized_states(&chart).unwrap();
        assert_eq!(states.len(), 65);
    }

    #[test]
    fn linear_step_preserves_the_unnormalized_contract() {
        let model = four_level_model();
        let rho_bar = UnnormalizedState::new(base_density().scale(2.5)).unwrap();
        let next = linear_stratonovich_step(&model, &rho_bar, 0.001, 0.02).unwrap();
        assert!(next.trace() > 0.0);
        let direct = heun_linear_step(&model, rho_bar.matrix(), 0.001, 0.02).unwrap();
        assert!((next.matrix() - direct).norm() < TOL);
    }

    #[test]
    fn variant_labels_are_stable() {
        assert_eq!(FilterVariant::NewStratonovich.label(), "new-stratonovich");
        assert_eq!(FilterVariant::NewIto.label(), "new-ito");
        assert_eq!(FilterVariant::Baseline.label(), "baseline");
        assert_eq!(FilterVariant::SelfAdjoint.label(), "self-adjoint");
    }
}
