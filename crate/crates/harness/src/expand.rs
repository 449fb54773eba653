//! One-shot expansion inspection for the `expand` subcommand.
//!
//! Renders a single stochastic Taylor expansion as text: every retained
//! index with its iterated integral and differential norms, the
//! remainder-set indices with the differential norms entering the error
//! envelope, and the defect against a reference integration of the same
//! path. Purely a rendering layer; all numbers come from the core crate.

use qpf_core::filters::linear_stratonovich_step;
use qpf_core::multi_index::{remainder_set, MultiIndex};
use qpf_core::operator_algebra::UnnormalizedState;
use qpf_core::stratonovich::{d_operator, taylor_expand_true, WienerPath};

use crate::error::{invalid, Result};
use crate::scenario::Scenario;

/// Steps of the sampled grid carrying the iterated integrals and the
/// reference pass.
const GRID_STEPS: usize = 64;

pub fn render_expansion(
    scenario: &Scenario,
    order: usize,
    delta: f64,
    path_id: u64,
) -> Result<String> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(
            "delta",
            format!("must be a positive finite horizon, got {delta}"),
        ));
    }
    let path = WienerPath::sample(
        scenario.seed,
        path_id,
        0.0,
        delta / GRID_STEPS as f64,
        GRID_STEPS,
    )?;
    let expansion = taylor_expand_true(&scenario.model, scenario.rho0.matrix(), &path, order)?;

    let mut reference = UnnormalizedState::new(scenario.rho0.matrix().clone())?;
    for j in 0..GRID_STEPS {
        reference = linear_stratonovich_step(
            &scenario.model,
            &reference,
            path.dt(),
            path.increments()[j],
        )?;
    }
    let defect = (reference.matrix() - &expansion.value).norm();

    let mut out = String::new();
    out.push_str(&format!(
        "scenario {}, order {order}, horizon {delta:.6}, path {path_id}, seed {}\n\n",
        scenario.name, scenario.seed
    ));
    out.push_str(&format!(
        "{:<12} {:>6} {:>14} {:>14} {:>14}\n",
        "index", "weight", "integral", "coeff_norm", "term_norm"
    ));
    for (alpha, term) in &expansion.terms {
        out.push_str(&format!(
            "{:<12} {:>6} {:>14.6e} {:>14.6e} {:>14.6e}\n",
            format_index(alpha),
            alpha.weight(),
            term.integral,
            term.coefficient.norm(),
            term.coefficient.norm() * term.integral.abs()
        ));
    }

    out.push_str("\nremainder set, differential norms at the initial state:\n");
    out.push_str(&format!("{:<12} {:>6} {:>14}\n", "index", "weight", "coeff_norm"));
    for beta in &remainder_set(order)? {
        let coefficient = d_operator(&scenario.model, beta, scenario.rho0.matrix())?;
        out.push_str(&format!(
            "{:<12} {:>6} {:>14.6e}\n",
            format_index(beta),
            beta.weight(),
            coefficient.norm()
        ));
    }

    out.push_str(&format!(
        "\nexpansion value: norm {:.6e}, trace {:.6e}\n",
        expansion.value.norm(),
        expansion.value.trace().re
    ));
    out.push_str(&format!(
        "defect against a {GRID_STEPS}-step reference on the same path: {defect:.6e}\n"
    ));
    Ok(out)
}

fn format_index(alpha: &MultiIndex) -> String {
    let parts: Vec<String> = alpha.entries().iter().map(|e| e.to_string()).collect();
    format!("({})", parts.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn two_level_scenario() -> Scenario {
        let text = r#"{
            "dim": 2,
            "coupling": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]],
            "rho0": [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]],
            "chart": {
                "generators": [
                    [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
                ]
            },
            "seed": 9
        }"#;
        Scenario::from_json("two_level", text).unwrap()
    }

    #[test]
    fn table_lists_every_retained_and_remainder_index() {
        let scenario = two_level_scenario();
        let table = render_expansion(&scenario, 1, 0.25, 0).unwrap();
        // Order 1 retains (), (1); the remainder holds (0), (0,1), (1,1).
        for needle in ["()", "(1)", "(0)", "(0,1)", "(1,1)", "remainder set", "defect"] {
            assert!(table.contains(needle), "missing {needle:?} in table");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let scenario = two_level_scenario();
        let a = render_expansion(&scenario, 2, 0.125, 3).unwrap();
        let b = render_expansion(&scenario, 2, 0.125, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_horizon_is_rejected() {
        let scenario = two_level_scenario();
        assert!(render_expansion(&scenario, 1, 0.0, 0).is_err());
        assert!(render_expansion(&scenario, 1, f64::NAN, 0).is_err());
    }
}
