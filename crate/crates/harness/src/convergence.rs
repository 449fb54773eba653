//! Convergence experiments over the standard horizon ladder.
//!
//! The harness always sweeps the same five dyadic horizons, 2⁻⁵ down to
//! 2⁻⁹, so reported slopes are comparable across scenarios; the Monte
//! Carlo budget and seed come from the scenario.

use qpf_core::stratonovich::{convergence_study, ConvergenceConfig, ConvergenceReport};
use qpf_core::tol;

use crate::error::{invalid, Result};
use crate::scenario::Scenario;

/// Dyadic horizons 2⁻⁵..2⁻⁹, largest first.
pub const DEFAULT_DELTAS: [f64; 5] = [
    0.031_25,
    0.015_625,
    0.007_812_5,
    0.003_906_25,
    0.001_953_125,
];

/// One study per requested truncation order, in the given order.
pub fn run_convergence(scenario: &Scenario, orders: &[usize]) -> Result<Vec<ConvergenceReport>> {
    let mut reports = Vec::with_capacity(orders.len());
    for &order in orders {
        let config = ConvergenceConfig {
            order,
            deltas: DEFAULT_DELTAS.to_vec(),
            paths: scenario.paths,
            seed: scenario.seed,
            fine_step: None,
        };
        reports.push(convergence_study(
            &scenario.model,
            scenario.rho0.matrix(),
            &config,
        )?);
    }
    Ok(reports)
}

/// Parse the `--order` argument, a comma-separated list like "1,2".
pub fn parse_orders(text: &str) -> Result<Vec<usize>> {
    let mut orders = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let order: usize = part
            .parse()
            .map_err(|_| invalid("order", format!("{part:?} is not a truncation order")))?;
        if order > tol::MAX_EXPANSION_ORDER {
            return Err(invalid(
                "order",
                format!(
                    "order {order} exceeds the supported maximum {}",
                    tol::MAX_EXPANSION_ORDER
                ),
            ));
        }
        if orders.contains(&order) {
            return Err(invalid("order", format!("order {order} listed twice")));
        }
        orders.push(order);
    }
    Ok(orders)
}
