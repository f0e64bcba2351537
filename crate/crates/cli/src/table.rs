//! Columnar figure tables (CSV) and minimal SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

/// Named columns of equal length; the first column is the x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub name: String,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
}

impl FigureTable {
    pub fn new(name: &str, x_name: &str, x: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            columns: vec![(x_name.to_string(), x.into_iter().map(Some).collect())],
        }
    }

    pub fn rows(&self) -> usize {
        self.columns[0].1.len()
    }

    pub fn push(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.rows() {
            return Err(CliError::Consistency(format!(
                "table {}: column {name} has {} rows, expected {}",
                self.name,
                values.len(),
                self.rows()
            )));
        }
        self.columns.push((name.to_string(), values));
        Ok(())
    }

    /// Mean column plus, from two series on, a sample standard deviation
    /// column named `{name}_std`.
    pub fn push_mean_std(&mut self, name: &str, series: &[Vec<f64>]) -> Result<()> {
        let (mean, std) = mean_std(series);
        self.push(
            &format!("{name}_mean"),
            mean.into_iter().map(Some).collect(),
        )?;
        if let Some(std) = std {
            self.push(&format!("{name}_std"), std.into_iter().map(Some).collect())?;
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns
            .iter()
            .find(|c| c.0 == name)
            .map(|c| c.1.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.0.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for r in 0..self.rows() {
            let cells: Vec<String> = self
                .columns
                .iter()
                .map(|c| c.1[r].map(|v| v.to_string()).unwrap_or_default())
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| CliError::io(path, e))
    }
}

/// Elementwise mean and (for two or more series) sample standard deviation.
pub fn mean_std(series: &[Vec<f64>]) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = series.len();
    let len = series.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..len)
        .map(|i| series.iter().map(|s| s[i]).sum::<f64>() / n as f64)
        .collect();
    if n < 2 {
        return (mean, None);
    }
    let std = (0..len)
        .map(|i| {
            let ss: f64 = series.iter().map(|s| (s[i] - mean[i]).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        })
        .collect();
    (mean, Some(std))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Line chart of named series over a shared x axis. Output depends only on
/// the inputs.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    series: &[(String, Vec<f64>)],
) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (64.0, 150.0, 36.0, 52.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let finite = |v: &&f64| v.is_finite();
    let (x0, x1) = bounds(x.iter().filter(finite).copied());
    let (y0, y1) = bounds(
        series
            .iter()
            .flat_map(|s| s.1.iter())
            .filter(finite)
            .copied(),
    );
    let sx = |v: f64| left + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| top + ph - (v - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            top + ph,
            top + ph + 5.0,
            top + ph + 19.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{left}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (k, (name, ys)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = x
            .iter()
            .zip(ys)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.1},{:.1}", sx(a), sy(b)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 18.0 * k as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick(v: f64) -> String {
    let t = format!("{v:.2}");
    let t = t.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Plot every `{name}_mean` column of a table against its first column.
pub fn chart_means(table: &FigureTable, title: &str, y_label: &str) -> String {
    let x: Vec<f64> = table.columns[0]
        .1
        .iter()
        .map(|v| v.unwrap_or(f64::NAN))
        .collect();
    let series: Vec<(String, Vec<f64>)> = table.columns[1..]
        .iter()
        .filter_map(|(name, vals)| {
            let base = name.strip_suffix("_mean")?;
            Some((
                base.to_string(),
                vals.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            ))
        })
        .collect();
    line_chart(title, &table.columns[0].0, y_label, &x, &series)
}
