//! Minimal static SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

use super::AuditHeader;
use crate::error::Result;
use crate::sim::TrajectoryRecord;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Line,
    /// Vertical stems from zero, for event indicators.
    Stems,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    /// `None` breaks the line.
    pub points: Vec<(f64, Option<f64>)>,
    pub style: Style,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_bounds(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl LineChart {
    pub fn render(&self, audit: &AuditHeader) -> String {
        let finite = self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter_map(|&(x, y)| y.filter(|v| v.is_finite()).map(|y| (x, y)));
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
        for (x, y) in finite {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let (x0, x1) = nice_bounds(x0, x1);
        let (y0, y1) = nice_bounds(y0, y1);
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, "<metadata><![CDATA[{}]]></metadata>", audit.to_json());
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        // axes
        let _ = writeln!(
            svg,
            r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
            m = MARGIN,
            t = MARGIN,
            b = HEIGHT - MARGIN,
            r = WIDTH - MARGIN
        );
        for i in 0..=4 {
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
                MARGIN - 4.0,
                sy(fy) + 4.0,
                fy
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle">{:.0}</text>"#,
                sx(fx),
                HEIGHT - MARGIN + 16.0,
                fx
            );
        }
        if y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                svg,
                r##"<line x1="{}" x2="{}" y1="{z}" y2="{z}" stroke="#999" stroke-dasharray="4 3"/>"##,
                MARGIN,
                WIDTH - MARGIN,
                z = sy(0.0)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            match s.style {
                Style::Line => {
                    let mut d = String::new();
                    let mut pen_down = false;
                    for &(x, y) in &s.points {
                        match y.filter(|v| v.is_finite()) {
                            Some(y) => {
                                let _ = write!(d, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                                pen_down = true;
                            }
                            None => pen_down = false,
                        }
                    }
                    let _ = writeln!(
                        svg,
                        r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                        d.trim_end()
                    );
                }
                Style::Stems => {
                    for &(x, y) in &s.points {
                        if let Some(y) = y.filter(|v| v.is_finite()) {
                            let _ = writeln!(
                                svg,
                                r#"<line x1="{x:.2}" x2="{x:.2}" y1="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
                                sy(0.0_f64.clamp(y0, y1)),
                                sy(y),
                                x = sx(x)
                            );
                        }
                    }
                }
            }
            let ly = MARGIN + 16.0 * i as f64;
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
                WIDTH - MARGIN - 150.0,
                ly - 4.0,
                WIDTH - MARGIN - 134.0,
                ly,
                escape(&s.name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, path: &Path, audit: &AuditHeader) -> Result<()> {
        std::fs::write(path, self.render(audit))?;
        Ok(())
    }
}

/// Error norms, ages, and VoI with transmission events for one trajectory.
pub fn trajectory_charts(rec: &TrajectoryRecord) -> [(&'static str, LineChart); 3] {
    let k = |s: &crate::sim::StepRecord| s.k as f64;
    let errors = LineChart {
        title: format!("Estimation error and mismatch ({})", rec.policy),
        x_label: "k".into(),
        series: vec![
            Series {
                name: "|e_k|".into(),
                points: rec.steps.iter().map(|s| (k(s), Some(s.e.norm()))).collect(),
                style: Style::Line,
            },
            Series {
                name: "|mismatch_k|".into(),
                points: rec.steps.iter().map(|s| (k(s), Some(s.e_tilde.norm()))).collect(),
                style: Style::Line,
            },
        ],
    };
    let ages = LineChart {
        title: format!("Age of information ({})", rec.policy),
        x_label: "k".into(),
        series: vec![
            Series {
                name: "zeta_k (trigger)".into(),
                points: rec.steps.iter().map(|s| (k(s), Some(s.zeta as f64))).collect(),
                style: Style::Line,
            },
            Series {
                name: "eta_k (controller)".into(),
                points: rec
                    .steps
                    .iter()
                    .map(|s| (k(s), s.eta.finite().map(|e| e as f64)))
                    .collect(),
                style: Style::Line,
            },
        ],
    };
    let voi = LineChart {
        title: format!("Value of information and transmissions ({})", rec.policy),
        x_label: "k".into(),
        series: vec![
            Series {
                name: "VoI_k".into(),
                points: rec.steps.iter().map(|s| (k(s), Some(s.voi))).collect(),
                style: Style::Line,
            },
            Series {
                name: "delta_k".into(),
                points: rec
                    .steps
                    .iter()
                    .map(|s| (k(s), if s.delta { Some(1.0) } else { None }))
                    .collect(),
                style: Style::Stems,
            },
        ],
    };
    [("errors.svg", errors), ("ages.svg", ages), ("voi.svg", voi)]
}
