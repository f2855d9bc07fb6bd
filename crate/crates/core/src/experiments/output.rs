//! CSV and SVG writers for sweep rows.

use std::fmt::Write as _;
use std::path::Path;

use super::{ExperimentConfig, MetricKind, Scheme, SweepRow};
use crate::error::Result;

pub const CSV_HEADER: &str = "scheme,sample_size,snr,metric,value,ci_low,ci_high,instance";

const COLORS: [&str; 4] = ["#1f77b4", "#2ca02c", "#ff7f0e", "#d62728"];

/// Metadata as `# key: value` lines, then the header row, then one line per row.
///
/// Floats use Rust's shortest round-trip formatting, so identical inputs give
/// identical bytes.
pub fn csv_string(cfg: &ExperimentConfig, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for (key, value) in cfg.metadata() {
        let _ = writeln!(out, "# {key}: {value}");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let snr = r.snr.map(|s| s.to_string()).unwrap_or_default();
        let instance = r
            .instance
            .map_or_else(|| "all".to_string(), |i| i.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scheme.name(),
            r.sample_size,
            snr,
            r.metric.name(),
            r.value,
            r.ci_low,
            r.ci_high,
            instance
        );
    }
    out
}

pub fn write_csv(path: &Path, cfg: &ExperimentConfig, rows: &[SweepRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, csv_string(cfg, rows))?;
    Ok(())
}

type Series = (Scheme, Vec<(f64, f64, f64, f64)>);

fn collect_series(rows: &[SweepRow], metric: MetricKind, snr: Option<f64>) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for r in rows
        .iter()
        .filter(|r| r.instance.is_none() && r.metric == metric && r.snr == snr)
    {
        let point = (r.sample_size as f64, r.value, r.ci_low, r.ci_high);
        match series.iter_mut().find(|(s, _)| *s == r.scheme) {
            Some((_, pts)) => pts.push(point),
            None => series.push((r.scheme, vec![point])),
        }
    }
    series
}

/// One polyline per scheme over its 90% band, for the aggregate rows of one
/// metric (and one SNR, when the metric has one).
pub fn svg_string(
    cfg: &ExperimentConfig,
    rows: &[SweepRow],
    metric: MetricKind,
    snr: Option<f64>,
    title: &str,
) -> String {
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let series = collect_series(rows, metric, snr);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, _, lo, hi) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(lo);
        y1 = y1.max(hi);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    out.push_str("<desc>");
    for (key, value) in cfg.metadata() {
        let _ = write!(out, "{key}={value}; ");
    }
    out.push_str("</desc>\n");
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        title
    );
    let _ = writeln!(
        out,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            out,
            r#"<line x1="{pad}" y1="{y}" x2="{}" y2="{y}" stroke="gray" stroke-dasharray="4"/>"#,
            w - pad,
            y = sy(0.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{pad}" y="{}" font-size="10">{x0}</text><text x="{}" y="{}" font-size="10" text-anchor="end">{x1}</text>"#,
        h - pad + 14.0,
        w - pad,
        h - pad + 14.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y0:.3e}</text><text x="{}" y="{}" font-size="10" text-anchor="end">{y1:.3e}</text>"#,
        pad - 4.0,
        h - pad,
        pad - 4.0,
        pad + 8.0
    );
    for (idx, (scheme, points)) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let upper: Vec<String> = points
            .iter()
            .map(|&(x, _, _, hi)| format!("{:.2},{:.2}", sx(x), sy(hi)))
            .collect();
        let lower: Vec<String> = points
            .iter()
            .rev()
            .map(|&(x, _, lo, _)| format!("{:.2},{:.2}", sx(x), sy(lo)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = points
            .iter()
            .map(|&(x, y, _, _)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - pad - 100.0,
            pad + 14.0 * (idx as f64 + 1.0),
            scheme.name()
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(
    path: &Path,
    cfg: &ExperimentConfig,
    rows: &[SweepRow],
    metric: MetricKind,
    snr: Option<f64>,
    title: &str,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, svg_string(cfg, rows, metric, snr, title))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: Scheme, m: usize, instance: Option<usize>, value: f64) -> SweepRow {
        SweepRow {
            scheme,
            sample_size: m,
            snr: Some(0.1),
            instance,
            metric: MetricKind::AnalyticEmse,
            value,
            ci_low: value - 1.0,
            ci_high: value + 1.0,
            std_error: None,
        }
    }

    #[test]
    fn csv_layout() {
        let cfg = ExperimentConfig::preset("small").unwrap();
        let rows = vec![
            row(Scheme::AOpt, 0, None, 3.0),
            row(Scheme::DOpt, 2, Some(1), 0.5),
        ];
        let text = csv_string(&cfg, &rows);
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], CSV_HEADER);
        assert_eq!(body[1], "A-opt,0,0.1,analytic_emse,3,2,4,all");
        assert_eq!(body[2], "D-opt,2,0.1,analytic_emse,0.5,-0.5,1.5,1");
        assert!(text.starts_with("# config_hash: "));
        assert!(text.contains("# shift_kind: combinatorial"));
    }

    #[test]
    fn svg_has_one_line_per_scheme() {
        let cfg = ExperimentConfig::preset("small").unwrap();
        let rows = vec![
            row(Scheme::AOpt, 0, None, 3.0),
            row(Scheme::AOpt, 1, None, 4.0),
            row(Scheme::WeightedRandom, 0, None, 3.0),
            row(Scheme::WeightedRandom, 1, None, 2.0),
            row(Scheme::WeightedRandom, 1, Some(0), 2.0),
        ];
        let svg = svg_string(&cfg, &rows, MetricKind::AnalyticEmse, Some(0.1), "test");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("weighted-random"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
