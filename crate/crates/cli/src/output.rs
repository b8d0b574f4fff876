//! Artifact writers: CSV tables, the text summary, and a hand-rolled
//! log-log SVG plot. Every file starts with a comment line carrying the
//! config hash and the artifact version, and every number is printed with
//! 17 significant digits so a reproduced run is byte-identical.

use crate::config::ARTIFACT_VERSION;
use crate::CliError;
use hemicontrol_core::{Mesh2D, SweepRecord};
use std::path::Path;

/// 17 significant digits; round-trips any f64 exactly.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.16e}")
}

/// The provenance stamp written as the first line of every artifact.
pub fn stamp(hash: &str) -> String {
    format!("config_sha256={hash} artifact_version={ARTIFACT_VERSION}")
}

pub fn write_text_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

/// Nodal table `node,x,y,u,g,p` over the whole mesh.
pub fn render_result_csv(hash: &str, mesh: &Mesh2D, u: &[f64], g: &[f64], p: &[f64]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", stamp(hash)));
    out.push_str("node,x,y,u,g,p\n");
    for (i, v) in mesh.vertices.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            fmt_sig(v[0]),
            fmt_sig(v[1]),
            fmt_sig(u[i]),
            fmt_sig(g[i]),
            fmt_sig(p[i]),
        ));
    }
    out
}

/// Sweep table with the fixed header; `wall` has already been zeroed or
/// kept by the caller's wall-time policy.
pub fn render_sweep_csv(hash: &str, records: &[SweepRecord]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", stamp(hash)));
    out.push_str("alpha,state_err_V,control_err_H,cost_gap,certified,wall_time_s\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_sig(r.alpha),
            fmt_sig(r.state_err_v),
            fmt_sig(r.control_err_h),
            fmt_sig(r.cost_gap),
            r.certified,
            fmt_sig(r.wall_time_s),
        ));
    }
    out
}

pub fn render_summary(hash: &str, lines: &[String]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", stamp(hash)));
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    /// (alpha, error) pairs; nonpositive or nonfinite errors are skipped.
    pub points: &'a [(f64, f64)],
}

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 540.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 58.0;

/// Log-log error curves. Returns None when fewer than two points are
/// plottable, in which case no plot file should be written.
pub fn render_loglog_svg(hash: &str, title: &str, series: &[Series]) -> Option<String> {
    let mut logged: Vec<Vec<(f64, f64)>> = Vec::new();
    for s in series {
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|(a, e)| *a > 0.0 && *e > 0.0 && e.is_finite())
            .map(|(a, e)| (a.log10(), e.log10()))
            .collect();
        logged.push(pts);
    }
    let total: usize = logged.iter().map(|p| p.len()).sum();
    if total < 2 {
        return None;
    }

    let all = logged.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    // degenerate ranges still get a visible frame
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad_x = 0.05 * (x1 - x0);
    let pad_y = 0.08 * (y1 - y0);
    x0 -= pad_x;
    x1 += pad_x;
    y0 -= pad_y;
    y1 += pad_y;

    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (PLOT_W - MARGIN_L - MARGIN_R);
    let sy = |y: f64| PLOT_H - MARGIN_B - (y - y0) / (y1 - y0) * (PLOT_H - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    svg.push_str(&format!("<!-- {} -->\n", stamp(hash)));
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        (MARGIN_L + PLOT_W - MARGIN_R) / 2.0
    ));

    // decade grid lines and tick labels
    for k in (x0.ceil() as i64)..=(x1.floor() as i64) {
        let px = sx(k as f64);
        svg.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" \
             stroke=\"#dddddd\"/>\n",
            MARGIN_T,
            PLOT_H - MARGIN_B
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">1e{k}</text>\n",
            PLOT_H - MARGIN_B + 18.0
        ));
    }
    for k in (y0.ceil() as i64)..=(y1.floor() as i64) {
        let py = sy(k as f64);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" \
             stroke=\"#dddddd\"/>\n",
            MARGIN_L,
            PLOT_W - MARGIN_R
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"end\">1e{k}</text>\n",
            MARGIN_L - 8.0,
            py + 4.0
        ));
    }

    // axes frame
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        PLOT_W - MARGIN_L - MARGIN_R,
        PLOT_H - MARGIN_T - MARGIN_B
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">alpha</text>\n",
        (MARGIN_L + PLOT_W - MARGIN_R) / 2.0,
        PLOT_H - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">error</text>\n",
        (MARGIN_T + PLOT_H - MARGIN_B) / 2.0,
        (MARGIN_T + PLOT_H - MARGIN_B) / 2.0
    ));

    for (s, pts) in series.iter().zip(&logged) {
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if pts.len() > 1 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                path.join(" "),
                s.color
            ));
        }
        for &(x, y) in pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                sx(x),
                sy(y),
                s.color
            ));
        }
    }

    // legend, top right corner of the frame
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN_T + 18.0 + 18.0 * k as f64;
        let x = PLOT_W - MARGIN_R - 160.0;
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" \
             stroke-width=\"1.5\"/>\n",
            y - 4.0,
            x + 22.0,
            y - 4.0,
            s.color
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            x + 28.0,
            s.label
        ));
    }

    svg.push_str("</svg>\n");
    Some(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_17_significant_digits() {
        assert_eq!(fmt_sig(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_sig(0.1), "1.0000000000000001e-1");
        let x = std::f64::consts::PI * 1e-7;
        let parsed: f64 = fmt_sig(x).parse().unwrap();
        assert_eq!(parsed, x, "formatting must round-trip");
    }

    #[test]
    fn svg_needs_two_plottable_points() {
        let pts = [(10.0, 0.0)];
        let s = Series { label: "e", color: "#000", points: &pts };
        assert!(render_loglog_svg("h", "t", &[s]).is_none());

        let pts = [(1.0, 1.0), (10.0, 0.1), (100.0, 0.01)];
        let s = Series { label: "e", color: "#000", points: &pts };
        let svg = render_loglog_svg("h", "t", &[s]).unwrap();
        assert!(svg.starts_with("<!-- config_sha256=h"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("1e-2"));
    }

    #[test]
    fn renders_are_deterministic() {
        let recs = vec![hemicontrol_core::SweepRecord {
            alpha: 1.0,
            state_err_v: 0.5,
            control_err_h: 0.25,
            cost_gap: 0.125,
            certified: true,
            wall_time_s: 0.0,
        }];
        let a = render_sweep_csv("abc", &recs);
        let b = render_sweep_csv("abc", &recs);
        assert_eq!(a, b);
        assert!(a.starts_with("# config_sha256=abc"));
        assert!(a.contains("alpha,state_err_V,control_err_H,cost_gap,certified,wall_time_s"));
    }
}
