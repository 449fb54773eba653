//! Line plots as standalone SVG text.
//!
//! The writer covers exactly what the run reports need: several series
//! over a shared pair of axes, optional log scaling, a legend, and
//! nothing interactive. Output is deterministic: coordinates are
//! formatted to fixed precision and every element is emitted in input
//! order. Points that a log scale cannot represent (zero or negative)
//! are dropped from the drawn polyline but never panic.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 168.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 52.0;
const TICKS: usize = 5;

/// Stroke colors cycled by [`Figure::auto_color`].
pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// One polyline with its legend entry.
pub struct Series {
    pub label: String,
    pub color: String,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

/// A complete plot. Rendering never fails; an empty figure draws axes
/// and title only.
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl Figure {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Figure {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    /// Color for the k-th series of a figure, cycling the palette.
    pub fn auto_color(k: usize) -> String {
        PALETTE[k % PALETTE.len()].to_string()
    }

    pub fn render(&self) -> String {
        let transformed: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter_map(|&(x, y)| {
                        let tx = scale_value(x, self.log_x)?;
                        let ty = scale_value(y, self.log_y)?;
                        Some((tx, ty))
                    })
                    .collect()
            })
            .collect();

        let (x_min, x_max) = padded_range(transformed.iter().flatten().map(|p| p.0));
        let (y_min, y_max) = padded_range(transformed.iter().flatten().map(|p| p.1));
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let to_px = |x: f64, y: f64| -> (f64, f64) {
            let px = MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
            let py = MARGIN_TOP + (y_max - y) / (y_max - y_min) * plot_h;
            (px, py)
        };

        let mut out = String::with_capacity(8192);
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            escape(&self.title)
        ));

        for i in 0..TICKS {
            let frac = i as f64 / (TICKS - 1) as f64;
            let xv = x_min + frac * (x_max - x_min);
            let yv = y_min + frac * (y_max - y_min);
            let (px, _) = to_px(xv, y_min);
            let (_, py) = to_px(x_min, yv);
            out.push_str(&format!(
                "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#999\"/>\n",
                HEIGHT - MARGIN_BOTTOM,
                HEIGHT - MARGIN_BOTTOM + 5.0
            ));
            out.push_str(&format!(
                "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
                HEIGHT - MARGIN_BOTTOM + 18.0,
                tick_label(xv, self.log_x)
            ));
            out.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#999\"/>\n",
                MARGIN_LEFT - 5.0,
                MARGIN_LEFT
            ));
            out.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
                MARGIN_LEFT - 8.0,
                py + 4.0,
                tick_label(yv, self.log_y)
            ));
        }

        out.push_str(&format!(
            "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
             fill=\"none\" stroke=\"#333\"/>\n"
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" \
             transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        ));

        for (series, points) in self.series.iter().zip(&transformed) {
            if points.len() < 2 {
                continue;
            }
            let coords: Vec<String> = points
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = to_px(x, y);
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            let dash = if series.dashed {
                " stroke-dasharray=\"6 4\""
            } else {
                ""
            };
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{dash}/>\n",
                coords.join(" "),
                series.color
            ));
        }

        // Series with empty labels (auxiliary band edges) draw but take
        // no legend row.
        let legend_x = WIDTH - MARGIN_RIGHT + 12.0;
        let mut legend_row = 0usize;
        for series in self.series.iter().filter(|s| !s.label.is_empty()) {
            let y = MARGIN_TOP + 14.0 + 18.0 * legend_row as f64;
            legend_row += 1;
            let dash = if series.dashed {
                " stroke-dasharray=\"6 4\""
            } else {
                ""
            };
            out.push_str(&format!(
                "<line x1=\"{legend_x:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
                 stroke=\"{}\" stroke-width=\"1.5\"{dash}/>\n",
                legend_x + 24.0,
                series.color
            ));
            out.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
                legend_x + 30.0,
                y + 4.0,
                escape(&series.label)
            ));
        }

        out.push_str("</svg>\n");
        out
    }
}

/// Axis transform; None marks a point a log axis cannot show.
fn scale_value(v: f64, log: bool) -> Option<f64> {
    if !v.is_finite() {
        return None;
    }
    if log {
        if v <= 0.0 {
            return None;
        }
        Some(v.log10())
    } else {
        Some(v)
    }
}

/// Data range padded by 5%, widened when degenerate so the pixel map
/// never divides by zero.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    if min == max {
        return (min - 0.5, max + 0.5);
    }
    let pad = 0.05 * (max - min);
    (min - pad, max + pad)
}

fn tick_label(v: f64, log: bool) -> String {
    let value = if log { 10f64.powf(v) } else { v };
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs();
    if (1e-3..1e4).contains(&magnitude) && !log {
        format!("{value:.3}")
    } else {
        format!("{value:.2e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_figure() -> Figure {
        let mut figure = Figure::new("sample", "t", "distance");
        figure.series.push(Series {
            label: "mean".to_string(),
            color: Figure::auto_color(0),
            dashed: false,
            points: (0..10).map(|j| (j as f64, (j as f64).sin() + 2.0)).collect(),
        });
        figure.series.push(Series {
            label: "band".to_string(),
            color: Figure::auto_color(1),
            dashed: true,
            points: (0..10).map(|j| (j as f64, 1.0 + 0.1 * j as f64)).collect(),
        });
        figure
    }

    #[test]
    fn render_emits_one_polyline_per_drawable_series() {
        let svg = sample_figure().render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2); // polyline + legend
        assert!(svg.contains("sample"));
    }

    #[test]
    fn log_axes_drop_nonrepresentable_points_without_nan() {
        let mut figure = sample_figure();
        figure.log_y = true;
        figure.series[0].points.push((10.0, 0.0));
        figure.series[0].points.push((11.0, -1.0));
        let svg = figure.render();
        assert!(!svg.contains("NaN"));
        assert!(!svg.contains("inf"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn single_point_series_is_skipped_but_keeps_its_legend_row() {
        let mut figure = Figure::new("one", "x", "y");
        figure.series.push(Series {
            label: "lonely".to_string(),
            color: Figure::auto_color(0),
            dashed: false,
            points: vec![(1.0, 1.0)],
        });
        let svg = figure.render();
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert!(svg.contains("lonely"));
    }

    #[test]
    fn render_is_deterministic() {
        assert_eq!(sample_figure().render(), sample_figure().render());
    }

    #[test]
    fn labels_are_escaped() {
        let figure = Figure::new("a < b & c", "x", "y");
        let svg = figure.render();
        assert!(svg.contains("a &lt; b &amp; c"));
    }
}
