use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{GridResult, GridRow};
use crate::error::{Error, Result};

pub const METRICS: [&str; 6] = ["phi_mean", "phi_stderr", "regret_ours_mean", "regret_mpc_mean", "bound", "margin_min"];

const CELL_W: f64 = 36.0;
const CELL_H: f64 = 22.0;
const LEFT: f64 = 64.0;
const TOP: f64 = 40.0;
const LEGEND_GAP: f64 = 28.0;
const LEGEND_W: f64 = 16.0;
const LEGEND_STEPS: usize = 20;
const NEG: (f64, f64, f64) = (33.0, 102.0, 172.0);
const POS: (f64, f64, f64) = (178.0, 24.0, 43.0);

fn metric_value(row: &GridRow, metric: &str) -> Option<f64> {
    Some(match metric {
        "phi_mean" => row.phi_mean,
        "phi_stderr" => row.phi_stderr,
        "regret_ours_mean" => row.regret_ours_mean,
        "regret_mpc_mean" => row.regret_mpc_mean,
        "bound" => row.bound,
        "margin_min" => row.margin_min,
        _ => return None,
    })
}

/// Symmetric log scale onto `[−1, 1]`, linear below `linthresh`.
struct SymLog {
    linthresh: f64,
    norm: f64,
}

impl SymLog {
    fn new(max_abs: f64) -> Self {
        let linthresh = if max_abs > 0.0 { max_abs * 1e-3 } else { 1.0 };
        Self { linthresh, norm: (max_abs / linthresh).ln_1p().max(f64::MIN_POSITIVE) }
    }

    fn unit(&self, v: f64) -> f64 {
        (v.signum() * (v.abs() / self.linthresh).ln_1p() / self.norm).clamp(-1.0, 1.0)
    }

    fn inverse(&self, s: f64) -> f64 {
        s.signum() * self.linthresh * (s.abs() * self.norm).exp_m1()
    }
}

fn color(s: f64) -> String {
    if !s.is_finite() {
        return "#cccccc".to_string();
    }
    let (r, g, b) = if s >= 0.0 { POS } else { NEG };
    let t = s.abs();
    let mix = |c: f64| (255.0 + (c - 255.0) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r), mix(g), mix(b))
}

/// Renders a `T × W` heat map of one metric with a diverging symlog color
/// scale centered at zero. Missing cells and non-finite values are gray.
pub fn render_heatmap_svg(result: &GridResult, metric: &str, title: &str) -> Result<String> {
    if !METRICS.contains(&metric) {
        return Err(Error::Argument(format!("unknown metric {metric:?}; expected one of {}", METRICS.join(", "))));
    }
    let horizons: Vec<usize> = result
        .rows
        .iter()
        .map(|r| r.horizon)
        .chain(result.skipped.iter().map(|s| s.0))
        .chain(result.failures.iter().map(|f| f.horizon))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let previews: Vec<usize> = result
        .rows
        .iter()
        .map(|r| r.preview)
        .chain(result.skipped.iter().map(|s| s.1))
        .chain(result.failures.iter().map(|f| f.preview))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let max_abs = result
        .rows
        .iter()
        .filter_map(|r| metric_value(r, metric))
        .filter(|v| v.is_finite())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = SymLog::new(max_abs);

    let grid_w = CELL_W * previews.len() as f64;
    let grid_h = CELL_H * horizons.len() as f64;
    let legend_x = LEFT + grid_w + LEGEND_GAP;
    let width = legend_x + LEGEND_W + 110.0;
    let height = TOP + grid_h.max(160.0) + 50.0;

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(w, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");
    let _ = writeln!(w, "<text x=\"{LEFT:.1}\" y=\"20\" font-size=\"14\">{}</text>", escape(title));
    let col = |p: usize| previews.binary_search(&p).map(|i| LEFT + CELL_W * i as f64);
    let row_y = |t: usize| horizons.binary_search(&t).map(|i| TOP + CELL_H * i as f64);
    for r in &result.rows {
        let (Ok(x), Ok(y)) = (col(r.preview), row_y(r.horizon)) else { continue };
        let v = metric_value(r, metric).unwrap_or(f64::NAN);
        let fill = if v.is_finite() { color(scale.unit(v)) } else { color(f64::NAN) };
        let _ = writeln!(
            w,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL_W:.1}\" height=\"{CELL_H:.1}\" fill=\"{fill}\" stroke=\"#ffffff\"><title>T={} W={} {metric}={v:.6e}</title></rect>",
            r.horizon, r.preview
        );
    }
    for (t, p) in result.skipped.iter().copied().chain(result.failures.iter().map(|f| (f.horizon, f.preview))) {
        let (Ok(x), Ok(y)) = (col(p), row_y(t)) else { continue };
        let _ = writeln!(
            w,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL_W:.1}\" height=\"{CELL_H:.1}\" fill=\"#eeeeee\" stroke=\"#ffffff\"/>"
        );
    }
    for (i, p) in previews.iter().enumerate() {
        let x = LEFT + CELL_W * (i as f64 + 0.5);
        let _ = writeln!(w, "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{p}</text>", TOP + grid_h + 14.0);
    }
    for (i, t) in horizons.iter().enumerate() {
        let y = TOP + CELL_H * (i as f64 + 0.5) + 4.0;
        let _ = writeln!(w, "<text x=\"{:.1}\" y=\"{y:.1}\" text-anchor=\"end\">{t}</text>", LEFT - 6.0);
    }
    let _ = writeln!(
        w,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">preview W</text>",
        LEFT + grid_w / 2.0,
        TOP + grid_h + 32.0
    );
    let _ = writeln!(
        w,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">horizon T</text>",
        TOP + grid_h / 2.0,
        TOP + grid_h / 2.0
    );

    let bar_h = 160.0;
    let step_h = bar_h / LEGEND_STEPS as f64;
    for k in 0..LEGEND_STEPS {
        let u = 1.0 - 2.0 * (k as f64 + 0.5) / LEGEND_STEPS as f64;
        let y = TOP + step_h * k as f64;
        let _ = writeln!(
            w,
            "<rect x=\"{legend_x:.1}\" y=\"{y:.1}\" width=\"{LEGEND_W:.1}\" height=\"{step_h:.1}\" fill=\"{}\"/>",
            color(u)
        );
    }
    for u in [1.0, 0.5, 0.0, -0.5, -1.0] {
        let y = TOP + bar_h * (1.0 - u) / 2.0 + 4.0;
        let _ =
            writeln!(w, "<text x=\"{:.1}\" y=\"{y:.1}\">{:.2e}</text>", legend_x + LEGEND_W + 4.0, scale.inverse(u));
    }
    let _ = writeln!(w, "<text x=\"{legend_x:.1}\" y=\"{:.1}\">{metric} (symlog)</text>", TOP + bar_h + 18.0);
    let _ = writeln!(w, "</svg>");
    Ok(s)
}

pub fn emit_heatmap_svg(result: &GridResult, metric: &str, title: &str, path: &Path) -> Result<()> {
    let svg = render_heatmap_svg(result, metric, title)?;
    std::fs::write(path, svg).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
