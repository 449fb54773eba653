//! Scenario configuration.
//!
//! A scenario is a JSON document pinning everything a run depends on:
//! the model matrices, the chart, the grids, the Monte Carlo budget, and
//! the filter variants to integrate. Matrices are row-major arrays of
//! `[re, im]` pairs. Omitted knobs fall back to the documented defaults
//! (horizon 5, 2^12 fine steps, 200 paths, seed 2024, filters new+old);
//! the model matrices and the chart have no defaults except for the
//! Hamiltonian, which defaults to zero.
//!
//! Two scenarios ship inside the binary and can be named instead of a
//! file path: `four_level` (non-self-adjoint coupling) and
//! `four_level_selfadjoint` (same model with the off-diagonal coupling
//! entry removed).

use std::fs;
use std::path::Path;

use serde::Deserialize;

use qpf_core::filters::FilterVariant;
use qpf_core::geometry::Chart;
use qpf_core::linalg::{C64, CMat};
use qpf_core::operator_algebra::{DensityState, SystemModel};
use qpf_core::tol;

use crate::error::{invalid, HarnessError, Result};
use crate::report::sha256_hex;

const FOUR_LEVEL: &str = include_str!("../scenarios/four_level.json");
const FOUR_LEVEL_SELFADJOINT: &str = include_str!("../scenarios/four_level_selfadjoint.json");

/// Names resolvable without a file on disk.
pub const BUNDLED: [&str; 2] = ["four_level", "four_level_selfadjoint"];

const DEFAULT_HORIZON: f64 = 5.0;
const DEFAULT_LOG2_STEPS: u32 = 12;
const DEFAULT_PATHS: usize = 200;
const DEFAULT_SEED: u64 = 2024;

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    dim: usize,
    hamiltonian: Option<RawMatrix>,
    coupling: RawMatrix,
    rho0: RawMatrix,
    chart: Option<RawChart>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    log2_steps: Option<u32>,
    paths: Option<usize>,
    seed: Option<u64>,
    filters: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    generators: Vec<RawMatrix>,
}

/// A fully validated run configuration. Construction guarantees the
/// matrices are Hermitian where required, the chart generators commute,
/// and the grid parameters are in range; downstream code never
/// re-validates.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: SystemModel,
    pub chart: Chart,
    pub rho0: DensityState,
    /// Final time of every trajectory; integration starts at 0.
    pub horizon: f64,
    /// The truth grid has 2^log2_steps steps, the filter grid half as many.
    pub log2_steps: u32,
    pub paths: usize,
    pub seed: u64,
    pub filters: Vec<FilterVariant>,
    /// SHA-256 of the exact configuration text, for the run manifest.
    pub config_digest: String,
}

impl Scenario {
    /// Parse and validate a scenario from JSON text. `name` labels error
    /// messages and output files; it is not part of the document.
    pub fn from_json(name: &str, text: &str) -> Result<Self> {
        let raw: RawScenario =
            serde_json::from_str(text).map_err(|source| HarnessError::Parse {
                path: name.to_string(),
                source,
            })?;
        let dim = raw.dim;
        if !(2..=tol::MAX_DIM).contains(&dim) {
            return Err(invalid(
                "dim",
                format!("must be between 2 and {}, got {dim}", tol::MAX_DIM),
            ));
        }

        let hamiltonian = match &raw.hamiltonian {
            Some(rows) => parse_matrix("hamiltonian", rows, dim)?,
            None => CMat::zeros(dim, dim),
        };
        let coupling = parse_matrix("coupling", &raw.coupling, dim)?;
        let model = SystemModel::new(hamiltonian, coupling)?;
        let rho0 = DensityState::new(parse_matrix("rho0", &raw.rho0, dim)?)?;

        let raw_chart = raw
            .chart
            .as_ref()
            .ok_or_else(|| invalid("chart", "scenario must supply chart generators"))?;
        if raw_chart.generators.is_empty() {
            return Err(invalid("chart", "generator list is empty"));
        }
        let mut generators = Vec::with_capacity(raw_chart.generators.len());
        for (i, rows) in raw_chart.generators.iter().enumerate() {
            generators.push(parse_matrix(&format!("chart.generators[{i}]"), rows, dim)?);
        }
        let chart = Chart::new(generators, rho0.matrix().clone())?;

        let horizon = raw.horizon.unwrap_or(DEFAULT_HORIZON);
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(invalid("T", format!("must be a positive finite time, got {horizon}")));
        }
        let log2_steps = raw.log2_steps.unwrap_or(DEFAULT_LOG2_STEPS);
        if !(1..=30).contains(&log2_steps) {
            return Err(invalid(
                "log2_steps",
                format!("must be between 1 and 30, got {log2_steps}"),
            ));
        }
        let paths = raw.paths.unwrap_or(DEFAULT_PATHS);
        if paths == 0 {
            return Err(invalid("paths", "must be at least 1"));
        }
        let filter_names = raw
            .filters
            .clone()
            .unwrap_or_else(|| vec!["new".to_string(), "old".to_string()]);
        let filters = parse_filter_names(&filter_names)?;

        Ok(Scenario {
            name: name.to_string(),
            model,
            chart,
            rho0,
            horizon,
            log2_steps,
            paths,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            filters,
            config_digest: sha256_hex(text.as_bytes()),
        })
    }

    /// Steps of the truth (stochastic master equation) grid.
    pub fn fine_steps(&self) -> usize {
        1usize << self.log2_steps
    }

    /// Steps of the filter grid; always half the truth grid.
    pub fn coarse_steps(&self) -> usize {
        self.fine_steps() / 2
    }

    pub fn fine_step(&self) -> f64 {
        self.horizon / self.fine_steps() as f64
    }

    pub fn integrator_step(&self) -> f64 {
        2.0 * self.fine_step()
    }
}

/// Load a scenario from a file path, or from the bundled set when the
/// argument names one of [`BUNDLED`] (with or without a `.json` suffix)
/// and no such file exists.
pub fn load_scenario(spec: &str) -> Result<Scenario> {
    match fs::read_to_string(spec) {
        Ok(text) => {
            let name = Path::new(spec)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            Scenario::from_json(&name, &text)
        }
        Err(source) if source.kind() == std::io::ErrorKind::NotFound => {
            match spec.trim_end_matches(".json") {
                "four_level" => Scenario::from_json("four_level", FOUR_LEVEL),
                "four_level_selfadjoint" => {
                    Scenario::from_json("four_level_selfadjoint", FOUR_LEVEL_SELFADJOINT)
                }
                _ => Err(HarnessError::ConfigIo {
                    path: spec.to_string(),
                    source,
                }),
            }
        }
        Err(source) => Err(HarnessError::ConfigIo {
            path: spec.to_string(),
            source,
        }),
    }
}

/// Map the names accepted in configuration files and on the command
/// line to filter variants. Duplicates are rejected so that output
/// columns stay unambiguous.
pub fn parse_filter_names(names: &[String]) -> Result<Vec<FilterVariant>> {
    let mut variants = Vec::with_capacity(names.len());
    for name in names {
        let variant = parse_filter_name(name)
            .ok_or_else(|| invalid("filters", format!("unknown filter name {name:?}")))?;
        if variants.contains(&variant) {
            return Err(invalid(
                "filters",
                format!("filter {:?} listed twice", variant.label()),
            ));
        }
        variants.push(variant);
    }
    Ok(variants)
}

fn parse_filter_name(name: &str) -> Option<FilterVariant> {
    match name {
        "new" | "new-stratonovich" => Some(FilterVariant::NewStratonovich),
        "old" | "baseline" => Some(FilterVariant::Baseline),
        "ito" | "new-ito" => Some(FilterVariant::NewIto),
        "selfadjoint" | "self-adjoint" => Some(FilterVariant::SelfAdjoint),
        _ => None,
    }
}

fn parse_matrix(field: &str, rows: &RawMatrix, dim: usize) -> Result<CMat> {
    if rows.len() != dim {
        return Err(invalid(
            field,
            format!("expected {dim} rows, found {}", rows.len()),
        ));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(invalid(
                field,
                format!("row {r} has {} entries, expected {dim}", row.len()),
            ));
        }
        for (c, entry) in row.iter().enumerate() {
            if !(entry[0].is_finite() && entry[1].is_finite()) {
                return Err(invalid(field, format!("entry ({r}, {c}) is not finite")));
            }
        }
    }
    Ok(CMat::from_fn(dim, dim, |r, c| {
        C64::new(rows[r][c][0], rows[r][c][1])
    }))
}
