//! Monte Carlo comparison of projection filters against the reference
//! filter.
//!
//! Per path: the reference (normalized stochastic master equation) is
//! integrated on the fine grid from the path's Wiener increments, the
//! observation increments it generates are aggregated onto the twice
//! coarser filter grid, and every requested variant integrates its
//! coordinate equation from those same observations. The comparison
//! statistic is the Hilbert-Schmidt distance to the reference at the
//! shared grid points.
//!
//! Determinism contract: path p of a run is a pure function of
//! (scenario, seed, p). Paths are simulated in parallel but collected in
//! path order, and all statistics are sequential folds over that order,
//! so results are identical for any worker count.
//!
//! A path whose integration fails (positivity loss in the reference,
//! chart overflow in a filter) is excluded and counted; a run keeping
//! less than 99% of its paths fails as a whole.

use rayon::prelude::*;

use qpf_core::filters::{
    integrate_projection_filter, integrate_sme, state_distance, FilterVariant,
};
use qpf_core::geometry::ThetaPoint;
use qpf_core::stratonovich::WienerPath;

use crate::error::{HarnessError, Result};
use crate::report::digest_f64s;
use crate::scenario::Scenario;

/// Everything retained from one accepted path.
#[derive(Debug, Clone)]
pub struct PathResult {
    pub path_id: u64,
    /// Digest of the observation increments every variant consumed.
    pub dy_checksum: String,
    /// `distances[v][j]`: distance of variant v to the reference at
    /// filter grid point j.
    pub distances: Vec<Vec<f64>>,
    /// Per-variant mean of the distance over the grid points.
    pub time_averages: Vec<f64>,
    /// Smallest eigenvalue the reference trajectory's positivity monitor
    /// recorded along this path.
    pub sme_floor: f64,
    /// Reference states on this path whose spectrum dipped below the floor.
    pub sme_floor_violations: usize,
}

#[derive(Debug, Clone)]
pub struct PathFailure {
    pub path_id: u64,
    pub message: String,
}

/// Aggregated result of a comparison run.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub variants: Vec<FilterVariant>,
    /// Filter grid times, 0 to the horizon inclusive.
    pub times: Vec<f64>,
    pub accepted: Vec<PathResult>,
    pub failures: Vec<PathFailure>,
    /// `mean[v][j]` over accepted paths.
    pub mean: Vec<Vec<f64>>,
    /// Sample standard deviation (n−1 normalization), zero when fewer
    /// than two paths were kept.
    pub std_dev: Vec<Vec<f64>>,
    /// Mean over accepted paths of the per-path time-averaged distance.
    pub time_averaged_mean: Vec<f64>,
    /// Fraction of accepted paths on which the corrected Stratonovich
    /// filter beats the baseline in time-averaged distance; present only
    /// when the run includes both.
    pub win_rate: Option<f64>,
    /// Smallest reference-state eigenvalue across all accepted paths.
    pub worst_eigenvalue: f64,
    /// Total reference states across accepted paths whose spectrum dipped
    /// below the positivity floor (logged, never fatal).
    pub floor_violations: usize,
}

pub fn run_comparison(scenario: &Scenario) -> Result<ComparisonReport> {
    let total = scenario.paths;
    let outcomes: Vec<std::result::Result<PathResult, PathFailure>> = (0..total as u64)
        .into_par_iter()
        .map(|path_id| simulate_path(scenario, path_id))
        .collect();

    let mut accepted = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(result) => accepted.push(result),
            Err(failure) => failures.push(failure),
        }
    }
    if failures.len() * 100 > total {
        return Err(HarnessError::TooManyFailedPaths {
            failed: failures.len(),
            total,
        });
    }

    let grid = scenario.coarse_steps() + 1;
    let dt = scenario.integrator_step();
    let times: Vec<f64> = (0..grid).map(|j| j as f64 * dt).collect();
    let v_count = scenario.filters.len();
    let n = accepted.len() as f64;

    let mut mean = vec![vec![0.0; grid]; v_count];
    for result in &accepted {
        for (v, row) in result.distances.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                mean[v][j] += d;
            }
        }
    }
    for row in &mut mean {
        for entry in row.iter_mut() {
            *entry /= n;
        }
    }

    let mut std_dev = vec![vec![0.0; grid]; v_count];
    if accepted.len() > 1 {
        for result in &accepted {
            for (v, row) in result.distances.iter().enumerate() {
                for (j, d) in row.iter().enumerate() {
                    std_dev[v][j] += (d - mean[v][j]).powi(2);
                }
            }
        }
        for row in &mut std_dev {
            for entry in row.iter_mut() {
                *entry = (*entry / (n - 1.0)).sqrt();
            }
        }
    }

    let time_averaged_mean: Vec<f64> = (0..v_count)
        .map(|v| accepted.iter().map(|r| r.time_averages[v]).sum::<f64>() / n)
        .collect();

    let new_idx = scenario
        .filters
        .iter()
        .position(|&v| v == FilterVariant::NewStratonovich);
    let old_idx = scenario
        .filters
        .iter()
        .position(|&v| v == FilterVariant::Baseline);
    let win_rate = match (new_idx, old_idx) {
        (Some(new), Some(old)) => {
            // A tie counts as a win: identical trajectories (the reduction
            // case) perform at least as well as the baseline.
            let wins = accepted
                .iter()
                .filter(|r| r.time_averages[new] <= r.time_averages[old])
                .count();
            Some(wins as f64 / n)
        }
        _ => None,
    };

    let worst_eigenvalue = accepted
        .iter()
        .map(|r| r.sme_floor)
        .fold(f64::INFINITY, f64::min);
    let floor_violations = accepted.iter().map(|r| r.sme_floor_violations).sum();

    Ok(ComparisonReport {
        variants: scenario.filters.clone(),
        times,
        accepted,
        failures,
        mean,
        std_dev,
        time_averaged_mean,
        win_rate,
        worst_eigenvalue,
        floor_violations,
    })
}

fn simulate_path(
    scenario: &Scenario,
    path_id: u64,
) -> std::result::Result<PathResult, PathFailure> {
    simulate_path_inner(scenario, path_id).map_err(|source| PathFailure {
        path_id,
        message: source.to_string(),
    })
}

fn simulate_path_inner(scenario: &Scenario, path_id: u64) -> qpf_core::Result<PathResult> {
    let fine = WienerPath::sample(
        scenario.seed,
        path_id,
        0.0,
        scenario.fine_step(),
        scenario.fine_steps(),
    )?;
    let truth = integrate_sme(&scenario.model, &scenario.rho0, &fine)?;
    // The filter grid is exactly every second fine point, so observation
    // increments aggregate pairwise without remainder.
    let coarse: Vec<f64> = truth
        .observation_increments
        .chunks_exact(2)
        .map(|pair| pair[0] + pair[1])
        .collect();
    let observations = WienerPath::new(0.0, scenario.integrator_step(), coarse)?;
    let dy_checksum = digest_f64s(observations.increments());

    let theta0 = ThetaPoint::zeros(scenario.chart.dim_m());
    let mut distances = Vec::with_capacity(scenario.filters.len());
    let mut time_averages = Vec::with_capacity(scenario.filters.len());
    for &variant in &scenario.filters {
        let trajectory = integrate_projection_filter(
            &scenario.model,
            &scenario.chart,
            variant,
            &observations,
            &theta0,
        )?;
        let states = trajectory.normalized_states(&scenario.chart)?;
        let mut row = Vec::with_capacity(states.len());
        for (j, state) in states.iter().enumerate() {
            row.push(state_distance(state, &truth.states[2 * j])?);
        }
        let average = row.iter().sum::<f64>() / row.len() as f64;
        distances.push(row);
        time_averages.push(average);
    }

    Ok(PathResult {
        path_id,
        dy_checksum,
        distances,
        time_averages,
        sme_floor: truth.worst_eigenvalue(),
        sme_floor_violations: truth.floor_violations(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    /// Two-level dephasing model with self-adjoint coupling; the chart of
    /// the two diagonal unit projectors is also the coupling's
    /// spectral-projector chart.
    fn two_level_json(coupling_scale: f64, paths: usize) -> String {
        format!(
            r#"{{
                "dim": 2,
                "coupling": [[[{s}, 0.0], [0.0, 0.0]], [[0.0, 0.0], [{ms}, 0.0]]],
                "rho0": [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]],
                "chart": {{
                    "generators": [
                        [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]],
                        [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
                    ]
                }},
                "T": 0.5,
                "log2_steps": 8,
                "paths": {paths},
                "seed": 11,
                "filters": ["new", "old"]
            }}"#,
            s = coupling_scale,
            ms = -coupling_scale
        )
    }

    fn two_level_scenario(coupling_scale: f64, paths: usize) -> Scenario {
        Scenario::from_json("two_level", &two_level_json(coupling_scale, paths)).unwrap()
    }

    #[test]
    fn selfadjoint_coupling_makes_corrected_and_baseline_coincide() {
        let scenario = two_level_scenario(1.0, 3);
        let report = run_comparison(&scenario).unwrap();
        assert_eq!(report.failures.len(), 0);
        assert_eq!(report.accepted.len(), 3);
        for result in &report.accepted {
            // Both filters start on the manifold at the reference state.
            assert_eq!(result.distances[0][0], 0.0);
            assert_eq!(result.distances[1][0], 0.0);
            for (a, b) in result.distances[0].iter().zip(&result.distances[1]) {
                assert!((a - b).abs() < 1e-9, "corrected vs baseline gap {}", a - b);
            }
        }
        assert!(report.win_rate.is_some());
    }

    #[test]
    fn runs_are_reproducible() {
        let scenario = two_level_scenario(1.0, 2);
        let a = run_comparison(&scenario).unwrap();
        let b = run_comparison(&scenario).unwrap();
        for (ra, rb) in a.accepted.iter().zip(&b.accepted) {
            assert_eq!(ra.dy_checksum, rb.dy_checksum);
            assert_eq!(ra.distances, rb.distances);
        }
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std_dev, b.std_dev);
    }

    #[test]
    fn win_rate_needs_both_competitors() {
        let json = two_level_json(1.0, 2).replace(r#"["new", "old"]"#, r#"["new"]"#);
        let scenario = Scenario::from_json("two_level", &json).unwrap();
        let report = run_comparison(&scenario).unwrap();
        assert!(report.win_rate.is_none());
        assert_eq!(report.time_averaged_mean.len(), 1);
    }

    #[test]
    fn exploding_paths_exhaust_the_exclusion_budget() {
        // Coupling of norm 200 throws the Euler step far outside the
        // state space on the first increment of nearly every path.
        let scenario = two_level_scenario(200.0, 4);
        let err = run_comparison(&scenario).unwrap_err();
        match err {
            HarnessError::TooManyFailedPaths { failed, total } => {
                assert!(failed > 0);
                assert_eq!(total, 4);
            }
            other => panic!("expected TooManyFailedPaths, got {other:?}"),
        }
    }

    #[test]
    fn distance_grid_matches_filter_grid() {
        let scenario = two_level_scenario(1.0, 1);
        let report = run_comparison(&scenario).unwrap();
        assert_eq!(report.times.len(), scenario.coarse_steps() + 1);
        assert_eq!(report.times[0], 0.0);
        let last = *report.times.last().unwrap();
        assert!((last - scenario.horizon).abs() < 1e-12);
        assert_eq!(report.accepted[0].distances[0].len(), report.times.len());
    }
}
