//! Minimal hand-written SVG for the Pareto curve.

use std::fmt::Write;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

/// Plots `(γ, err)` points in γ order. Points with missing values are skipped.
pub fn pareto_svg(points: &[(f64, f64)]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 2.0);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">gamma</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">error</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(g, e)| g.is_finite() && e.is_finite())
        .collect();
    if !finite.is_empty() {
        let span = |vals: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (gl, gh) = span(&mut finite.iter().map(|p| p.0));
        let (el, eh) = span(&mut finite.iter().map(|p| p.1));
        let px = |g: f64| x0 + (g - gl) / (gh - gl) * (x1 - x0);
        let py = |e: f64| y0 - (e - el) / (eh - el) * (y0 - y1);
        let path: Vec<String> = finite
            .iter()
            .map(|&(g, e)| format!("{:.2},{:.2}", px(g), py(e)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for &(g, e) in &finite {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
                px(g),
                py(e)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">γ ∈ [{gl}, {gh}]</text>"#,
            x1,
            y1 + 12.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
