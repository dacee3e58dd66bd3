use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::metrics::{ErrorReport, ErrorSeries};
use crate::error::{Error, Result};

/// Files written by [`write_plots`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotFiles {
    pub csv: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}

/// Writes one CSV error series and one SVG chart per agent. The series are
/// raw per-frame errors with no smoothing.
pub fn write_plots(report: &ErrorReport, out_dir: &Path) -> Result<PlotFiles> {
    if report.agents.iter().any(|a| a.series.is_none()) {
        return Err(Error::InvalidInput("report carries no per-frame series; use an evaluate report".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut files = PlotFiles::default();
    for agent in &report.agents {
        let series = agent.series.as_ref().expect("checked above");
        let stem = format!("agent_{}_{}", agent.agent_id, agent.class);

        let csv_path = out_dir.join(format!("{stem}.csv"));
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record(["frame", "t", "track_id", "position_m", "psi_deg", "v_mps", "omega_degps"])?;
        for k in 0..series.frame.len() {
            w.write_record(&[
                series.frame[k].to_string(),
                series.t[k].to_string(),
                series.track_id[k].to_string(),
                series.position_m[k].to_string(),
                series.psi_deg[k].to_string(),
                series.v_mps[k].to_string(),
                series.omega_degps[k].to_string(),
            ])?;
        }
        w.flush()?;
        files.csv.push(csv_path);

        let svg_path = out_dir.join(format!("{stem}.svg"));
        fs::write(&svg_path, render_svg(&format!("Agent {} ({})", agent.agent_id, agent.class), series))?;
        files.svg.push(svg_path);
    }
    Ok(files)
}

const WIDTH: f64 = 800.0;
const PANEL_H: f64 = 150.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const TOP: f64 = 40.0;
const GAP: f64 = 30.0;

/// Four stacked line charts of error against time.
fn render_svg(title: &str, s: &ErrorSeries) -> String {
    let panels: [(&str, &[f64]); 4] = [
        ("position error [m]", &s.position_m),
        ("yaw error [deg]", &s.psi_deg),
        ("speed error [m/s]", &s.v_mps),
        ("yaw rate error [deg/s]", &s.omega_degps),
    ];
    let height = TOP + 4.0 * (PANEL_H + GAP) + 20.0;
    let (t0, t1) = bounds(&s.t);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"##
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="white"/>"##);
    let _ = writeln!(out, r##"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"##, WIDTH / 2.0, escape(title));
    for (i, (label, ys)) in panels.iter().enumerate() {
        let top = TOP + i as f64 * (PANEL_H + GAP);
        let (y0, y1) = bounds(ys);
        let (y0, y1) = (y0.min(0.0), y1.max(0.0));
        let px = |t: f64| MARGIN_L + (t - t0) / span(t0, t1) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |v: f64| top + PANEL_H - (v - y0) / span(y0, y1) * PANEL_H;
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN_L}" y="{top}" width="{}" height="{PANEL_H}" fill="none" stroke="#888"/>"##,
            WIDTH - MARGIN_L - MARGIN_R
        );
        let _ = writeln!(out, r##"<text x="{MARGIN_L}" y="{}">{}</text>"##, top - 5.0, escape(label));
        let _ = writeln!(out, r##"<text x="{}" y="{}" text-anchor="end">{}</text>"##, MARGIN_L - 5.0, top + 10.0, fmt_tick(y1));
        let _ = writeln!(out, r##"<text x="{}" y="{}" text-anchor="end">{}</text>"##, MARGIN_L - 5.0, top + PANEL_H, fmt_tick(y0));
        if y0 < 0.0 && y1 > 0.0 {
            let z = py(0.0);
            let _ = writeln!(
                out,
                r##"<line x1="{MARGIN_L}" y1="{z:.2}" x2="{}" y2="{z:.2}" stroke="#ccc"/>"##,
                WIDTH - MARGIN_R
            );
        }
        if !ys.is_empty() {
            let mut d = String::new();
            for (k, (&t, &v)) in s.t.iter().zip(ys.iter()).enumerate() {
                // Break the line where the agent went unmatched.
                let cmd = if k == 0 || s.frame[k] != s.frame[k - 1] + 1 { 'M' } else { 'L' };
                let _ = write!(d, "{cmd}{:.2},{:.2} ", px(t), py(v));
            }
            let _ = writeln!(out, r##"<path d="{}" fill="none" stroke="#1f77b4" stroke-width="1"/>"##, d.trim_end());
        }
    }
    let bottom = TOP + 4.0 * (PANEL_H + GAP) - GAP + 15.0;
    let _ = writeln!(out, r##"<text x="{MARGIN_L}" y="{bottom}">{}</text>"##, fmt_tick(t0));
    let _ = writeln!(out, r##"<text x="{}" y="{bottom}" text-anchor="end">{} s</text>"##, WIDTH - MARGIN_R, fmt_tick(t1));
    out.push_str("</svg>\n");
    out
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn span(lo: f64, hi: f64) -> f64 {
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

fn fmt_tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
