//! Run outputs: CSV tables, SVG figures, digests, and the run manifest.
//!
//! Every floating-point value is written with 17 significant digits, so
//! the text round-trips to the exact binary value and byte-identical
//! files certify identical runs. The manifest records what is needed to
//! regenerate a run from scratch: the configuration digest, the seed,
//! the code version, and the noise stream id of every requested path.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use qpf_core::filters::FilterVariant;
use qpf_core::stratonovich::ConvergenceReport;

use crate::comparison::ComparisonReport;
use crate::error::{HarnessError, Result};
use crate::scenario::Scenario;
use crate::svg::{Figure, Series};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of a float sequence through its little-endian bytes; order and
/// signed zeros are significant.
pub fn digest_f64s(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// 17 significant digits; parses back to the exact value.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// Column tag of a variant in CSV headers.
pub fn variant_tag(variant: FilterVariant) -> &'static str {
    match variant {
        FilterVariant::NewStratonovich => "new",
        FilterVariant::Baseline => "old",
        FilterVariant::NewIto => "ito",
        FilterVariant::SelfAdjoint => "selfadjoint",
    }
}

/// Comparison table: one row per filter grid time, mean and standard
/// deviation columns per variant in run order. An empty variant list
/// yields the header line alone.
pub fn comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("time");
    for &variant in &report.variants {
        let tag = variant_tag(variant);
        out.push_str(&format!(",mean_{tag},std_{tag}"));
    }
    out.push('\n');
    if report.variants.is_empty() {
        return out;
    }
    for (j, &t) in report.times.iter().enumerate() {
        out.push_str(&format_float(t));
        for v in 0..report.variants.len() {
            out.push(',');
            out.push_str(&format_float(report.mean[v][j]));
            out.push(',');
            out.push_str(&format_float(report.std_dev[v][j]));
        }
        out.push('\n');
    }
    out
}

/// Convergence table: one row per (order, horizon) pair.
pub fn convergence_csv(reports: &[ConvergenceReport]) -> String {
    let mut out = String::from("order,delta,mse,bound,paths,seed\n");
    for report in reports {
        for point in &report.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                report.order,
                format_float(point.delta),
                format_float(point.mse),
                format_float(point.bound),
                report.paths,
                report.seed
            ));
        }
    }
    out
}

/// What a finished run leaves behind besides its data files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub seed: u64,
    pub code_version: &'static str,
    /// Noise stream id of every requested path, accepted or not.
    pub stream_ids: Vec<u64>,
    pub outputs: Vec<String>,
}

fn new_manifest(scenario: &Scenario, outputs: &[&str]) -> RunManifest {
    RunManifest {
        config_digest: scenario.config_digest.clone(),
        seed: scenario.seed,
        code_version: env!("CARGO_PKG_VERSION"),
        stream_ids: (0..scenario.paths as u64).collect(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| HarnessError::OutputIo {
        path: path.display().to_string(),
        source,
    })
}

fn write_outputs(
    scenario: &Scenario,
    out_dir: &Path,
    files: &[(&str, String)],
) -> Result<RunManifest> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::OutputIo {
        path: out_dir.display().to_string(),
        source,
    })?;
    for (name, text) in files {
        write_text(&out_dir.join(name), text)?;
    }
    let names: Vec<&str> = files.iter().map(|(name, _)| *name).collect();
    let manifest = new_manifest(scenario, &names);
    let mut manifest_json = serde_json::to_string_pretty(&manifest)
        .expect("manifest serialization cannot fail");
    manifest_json.push('\n');
    write_text(&out_dir.join("manifest.json"), &manifest_json)?;
    Ok(manifest)
}

/// Write comparison.csv, comparison.svg, and manifest.json into `out_dir`.
pub fn emit_comparison(
    scenario: &Scenario,
    report: &ComparisonReport,
    out_dir: &Path,
) -> Result<RunManifest> {
    let files = [
        ("comparison.csv", comparison_csv(report)),
        ("comparison.svg", comparison_figure(report).render()),
    ];
    write_outputs(scenario, out_dir, &files)
}

/// Write convergence.csv, convergence.svg, and manifest.json into `out_dir`.
pub fn emit_convergence(
    scenario: &Scenario,
    reports: &[ConvergenceReport],
    out_dir: &Path,
) -> Result<RunManifest> {
    let files = [
        ("convergence.csv", convergence_csv(reports)),
        ("convergence.svg", convergence_figure(reports).render()),
    ];
    write_outputs(scenario, out_dir, &files)
}

/// Mean distance per variant, solid, with a dashed ±1σ band sharing the
/// variant's color.
pub fn comparison_figure(report: &ComparisonReport) -> Figure {
    let mut figure = Figure::new(
        "distance to the reference filter",
        "time",
        "Hilbert-Schmidt distance",
    );
    for (k, &variant) in report.variants.iter().enumerate() {
        let color = Figure::auto_color(k);
        let mean: Vec<(f64, f64)> = report
            .times
            .iter()
            .zip(&report.mean[k])
            .map(|(&t, &m)| (t, m))
            .collect();
        let band = |sign: f64| -> Vec<(f64, f64)> {
            report
                .times
                .iter()
                .zip(report.mean[k].iter().zip(&report.std_dev[k]))
                .map(|(&t, (&m, &s))| (t, m + sign * s))
                .collect()
        };
        figure.series.push(Series {
            label: variant_tag(variant).to_string(),
            color: color.clone(),
            dashed: false,
            points: mean,
        });
        figure.series.push(Series {
            label: format!("{} ±σ", variant_tag(variant)),
            color: color.clone(),
            dashed: true,
            points: band(1.0),
        });
        figure.series.push(Series {
            label: String::new(),
            color,
            dashed: true,
            points: band(-1.0),
        });
    }
    figure
}

/// Log-log mean squared error per order, with its remainder envelope
/// dashed.
pub fn convergence_figure(reports: &[ConvergenceReport]) -> Figure {
    let mut figure = Figure::new(
        "expansion error against horizon",
        "horizon",
        "mean squared error",
    );
    figure.log_x = true;
    figure.log_y = true;
    for (k, report) in reports.iter().enumerate() {
        let color = Figure::auto_color(k);
        figure.series.push(Series {
            label: format!("order {}", report.order),
            color: color.clone(),
            dashed: false,
            points: report.points.iter().map(|p| (p.delta, p.mse)).collect(),
        });
        figure.series.push(Series {
            label: format!("order {} envelope", report.order),
            color,
            dashed: true,
            points: report.points.iter().map(|p| (p.delta, p.bound)).collect(),
        });
    }
    figure
}
