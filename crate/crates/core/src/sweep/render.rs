use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{FitEntry, RunReport, SweepError};

#[derive(Debug, Clone, Default)]
pub struct RenderOutput {
    pub series_csv: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
    pub traces: Vec<PathBuf>,
}

/// Writes `fit_<name>.csv` and `fit_<name>.svg` per fit and
/// `trace_<name>.csv` per time trace next to the report (or into `out_dir`).
pub fn render(report_path: &Path, out_dir: Option<&Path>) -> Result<RenderOutput, SweepError> {
    let text = std::fs::read_to_string(report_path).map_err(SweepError::io(report_path))?;
    let report: RunReport = serde_json::from_str(&text)
        .map_err(|e| SweepError::Config(format!("{}: {e}", report_path.display())))?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| report_path.parent().map(Path::to_path_buf).unwrap_or_default());
    std::fs::create_dir_all(&dir).map_err(SweepError::io(&dir))?;

    let mut out = RenderOutput::default();
    if report.fits.is_empty() {
        log::warn!("report {} has no fits; nothing to plot", report_path.display());
    }
    for (name, entry) in &report.fits {
        let csv = dir.join(format!("fit_{name}.csv"));
        std::fs::write(&csv, series_csv(entry)).map_err(SweepError::io(&csv))?;
        let svg = dir.join(format!("fit_{name}.svg"));
        std::fs::write(&svg, render_svg(name, entry)).map_err(SweepError::io(&svg))?;
        out.series_csv.push(csv);
        out.plots.push(svg);
    }
    for (name, tr) in &report.traces {
        let mut body = String::from("t,E,E_sqrt_over_datanorm\n");
        for i in 0..tr.t.len() {
            writeln!(body, "{},{},{}", tr.t[i], tr.energy[i], tr.sqrt_energy_over_data_norm[i]).expect("string write");
        }
        let p = dir.join(format!("trace_{name}.csv"));
        std::fs::write(&p, body).map_err(SweepError::io(&p))?;
        out.traces.push(p);
    }
    Ok(out)
}

fn series_csv(e: &FitEntry) -> String {
    let mut s = String::from("x,y,fitted\n");
    for (x, y) in e.series.x.iter().zip(&e.series.y) {
        writeln!(s, "{x},{y},{}", e.fit.predict(*x)).expect("string write");
    }
    s
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Log-log line plot with data markers, fitted line and slope label.
pub fn render_svg(name: &str, e: &FitEntry) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const L: f64 = 70.0;
    const R: f64 = 20.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;
    let lx: Vec<f64> = e.series.x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = e.series.y.iter().map(|v| v.log10()).collect();
    let fitted: Vec<f64> = e.series.x.iter().map(|x| e.fit.predict(*x).log10()).collect();
    let (x0, x1) = bounds(lx.iter().copied());
    let (y0, y1) = bounds(ly.iter().chain(&fitted).copied());
    let px = |v: f64| L + (v - x0) / (x1 - x0) * (W - L - R);
    let py = |v: f64| H - B - (v - y0) / (y1 - y0) * (H - T - B);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(name)).unwrap();
    writeln!(
        s,
        r#"<path d="M{L},{T} V{} H{}" fill="none" stroke="black"/>"#,
        H - B,
        W - R
    )
    .unwrap();
    for d in (x0.floor() as i64)..=(x1.ceil() as i64) {
        let v = d as f64;
        if v >= x0 - 1e-9 && v <= x1 + 1e-9 {
            let x = px(v);
            writeln!(s, r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="black"/>"#, H - B, H - B + 5.0).unwrap();
            writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{d}</text>"#, H - B + 18.0).unwrap();
        }
    }
    for d in (y0.floor() as i64)..=(y1.ceil() as i64) {
        let v = d as f64;
        if v >= y0 - 1e-9 && v <= y1 + 1e-9 {
            let y = py(v);
            writeln!(s, r#"<line x1="{}" y1="{y:.1}" x2="{L}" y2="{y:.1}" stroke="black"/>"#, L - 5.0).unwrap();
            writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{d}</text>"#, L - 8.0, y + 4.0).unwrap();
        }
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (L + W - R) / 2.0, H - 12.0, escape(&e.series.x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (T + H - B) / 2.0,
        escape(&e.series.y_label)
    )
    .unwrap();
    if lx.len() >= 2 {
        let pts: Vec<String> = lx.iter().zip(&fitted).map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="crimson" stroke-width="1.5"/>"#, pts.join(" ")).unwrap();
    }
    for (x, y) in lx.iter().zip(&ly) {
        writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#, px(*x), py(*y)).unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" fill="crimson">slope = {:.4} (r² = {:.4})</text>"#,
        L + 12.0,
        T + 16.0,
        e.fit.slope,
        e.fit.r_squared
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
