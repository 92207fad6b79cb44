//! Static SVG line charts of a run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::harness::telemetry::Telemetry;

const W: f64 = 800.0;
const H: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;
const MAX_POINTS: usize = 4000;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Affine map from data to pixel coordinates; `log_y` maps `log10(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub log_y: bool,
}

impl Frame {
    fn fit(series: &[Series], log_y: bool) -> Frame {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for s in series {
            for &(px, py) in &s.points {
                let Some(py) = transform_y(py, log_y) else { continue };
                x = (x.0.min(px), x.1.max(px));
                y = (y.0.min(py), y.1.max(py));
            }
        }
        if !x.0.is_finite() {
            x = (0.0, 1.0);
            y = (0.0, 1.0);
        }
        if x.1 <= x.0 {
            x.1 = x.0 + 1.0;
        }
        if y.1 <= y.0 {
            y = (y.0 - 0.5, y.0 + 0.5);
        }
        Frame { x, y, log_y }
    }

    /// Pixel position, `None` for points a log axis cannot show.
    pub fn to_px(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let ty = transform_y(y, self.log_y)?;
        let px = LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT);
        let py = TOP + (self.y.1 - ty) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM);
        Some((px, py))
    }
}

fn transform_y(y: f64, log: bool) -> Option<f64> {
    if !y.is_finite() {
        return None;
    }
    if log {
        (y > 0.0).then(|| y.log10())
    } else {
        Some(y)
    }
}

/// Renders the series and optional vertical markers as one chart.
pub fn render(title: &str, series: &[Series], markers: &[f64], log_y: bool) -> String {
    let frame = Frame::fit(series, log_y);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(s, r#"<path d="M{x0} {y0} V{y1} H{x1}" fill="none" stroke="black" stroke-width="1"/>"#);
    for i in 0..=4 {
        let fx = i as f64 / 4.0;
        let xv = frame.x.0 + fx * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + fx * (frame.y.1 - frame.y.0);
        let px = x0 + fx * (x1 - x0);
        let py = y1 - fx * (y1 - y0);
        let ylab = if log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{xv:.2}</text>"#, y1 + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{py:.2}" text-anchor="end">{ylab}</text>"#, x0 - 4.0);
    }
    for &m in markers {
        if let Some((px, _)) = frame.to_px(m, if log_y { 10f64.powf(frame.y.0) } else { frame.y.0 }) {
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{y1}" stroke="gray" stroke-dasharray="4 3"/>"#
            );
        }
    }
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let stride = ser.points.len().div_ceil(MAX_POINTS).max(1);
        let pts: Vec<String> = ser
            .points
            .iter()
            .step_by(stride)
            .filter_map(|&(x, y)| frame.to_px(x, y))
            .map(|(px, py)| format!("{px:.2},{py:.2}"))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            x0 + 10.0,
            y0 + 14.0 * (i + 1) as f64,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn series<'a>(tel: &Telemetry, label: &'a str, f: impl Fn(&crate::harness::telemetry::Record) -> f64) -> Series<'a> {
    Series { label, points: tel.records.iter().map(|r| (r.t, f(r))).collect() }
}

/// Writes `tracking.svg`, `errors.svg` and `excitation.svg` into `outdir`.
pub fn emit_plots(tel: &Telemetry, outdir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(outdir)?;
    let charts = [
        (
            "tracking.svg",
            render(
                "reference c(t), r(t) and output y(t)",
                &[series(tel, "c", |r| r.c), series(tel, "r", |r| r.r), series(tel, "y", |r| r.y)],
                &tel.resets,
                false,
            ),
        ),
        (
            "errors.svg",
            render(
                "estimation errors (log scale)",
                &[
                    series(tel, "|eta err|/|eta|", |r| r.eta_err),
                    series(tel, "|T_I err|/|T_I|", |r| r.ti_err),
                    series(tel, "|kappa err|/|kappa|", |r| r.kappa_err),
                    series(tel, "|x_delta0 err|", |r| r.xdelta0_err),
                    series(tel, "|x_p err|", |r| r.xp_err),
                ],
                &tel.resets,
                true,
            ),
        ),
        (
            "excitation.svg",
            render(
                "Delta (before normalisation) and resets",
                &[series(tel, "Delta", |r| r.delta_m.abs())],
                &tel.resets,
                true,
            ),
        ),
    ];
    let mut out = Vec::new();
    for (name, body) in charts {
        let path = outdir.join(name);
        std::fs::write(&path, body)?;
        out.push(path);
    }
    Ok(out)
}
