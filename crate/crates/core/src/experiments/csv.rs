use std::fmt::Write as _;
use std::path::Path;

use super::{GridResult, GridRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "T,W,phi_mean,phi_stderr,regret_ours_mean,regret_mpc_mean,bound,margin_min,sufficient_condition,excluded_trials";

pub fn render_csv(rows: &[GridRow]) -> String {
    let mut rows: Vec<&GridRow> = rows.iter().collect();
    rows.sort_by_key(|r| (r.horizon, r.preview));
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.horizon,
            r.preview,
            r.phi_mean,
            r.phi_stderr,
            r.regret_ours_mean,
            r.regret_mpc_mean,
            r.bound,
            r.margin_min,
            r.sufficient_condition,
            r.excluded_trials
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Writes the grid as CSV, rows sorted by `(T, W)`.
pub fn emit_csv(result: &GridResult, path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(&result.rows)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn field<T: std::str::FromStr>(line: usize, name: &str, raw: Option<&str>) -> Result<T> {
    let raw = raw.ok_or_else(|| Error::Argument(format!("line {line}: missing column {name}")))?;
    raw.parse().map_err(|_| Error::Argument(format!("line {line}: bad {name} value {raw:?}")))
}

/// Parses CSV text produced by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<GridRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Argument(format!("unexpected CSV header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let n = i + 2;
        let mut it = line.split(',');
        let row = GridRow {
            horizon: field(n, "T", it.next())?,
            preview: field(n, "W", it.next())?,
            phi_mean: field(n, "phi_mean", it.next())?,
            phi_stderr: field(n, "phi_stderr", it.next())?,
            regret_ours_mean: field(n, "regret_ours_mean", it.next())?,
            regret_mpc_mean: field(n, "regret_mpc_mean", it.next())?,
            bound: field(n, "bound", it.next())?,
            margin_min: field(n, "margin_min", it.next())?,
            sufficient_condition: field(n, "sufficient_condition", it.next())?,
            excluded_trials: field(n, "excluded_trials", it.next())?,
        };
        if it.next().is_some() {
            return Err(Error::Argument(format!("line {n}: too many columns")));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: usize, w: usize, v: f64) -> GridRow {
        GridRow {
            horizon: t,
            preview: w,
            phi_mean: v,
            phi_stderr: v.abs() / 3.0,
            regret_ours_mean: 1.0 / 7.0,
            regret_mpc_mean: -v,
            bound: f64::NAN,
            margin_min: f64::INFINITY,
            sufficient_condition: t.is_multiple_of(2),
            excluded_trials: w,
        }
    }

    #[test]
    fn header_and_sorting() {
        let text = render_csv(&[row(20, 1, 1.0), row(10, 3, 2.0), row(10, 0, 3.0)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("10,0,3.0000000000000000e0,"));
        assert!(lines[2].starts_with("10,3,"));
        assert!(lines[3].starts_with("20,1,"));
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![row(10, 0, std::f64::consts::PI), row(10, 1, -1e-300), row(12, 0, 0.1 + 0.2)];
        let back = parse_csv(&render_csv(&rows)).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.phi_mean.to_bits(), b.phi_mean.to_bits());
            assert_eq!(a.regret_ours_mean.to_bits(), b.regret_ours_mean.to_bits());
            assert!(b.bound.is_nan());
            assert_eq!(b.margin_min, f64::INFINITY);
            assert_eq!(a.sufficient_condition, b.sufficient_condition);
        }
        assert!(parse_csv("T,W\n").is_err());
    }
}
