//! Self-contained SVG log-log convergence plots.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x.log10() - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y.log10() - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a, a + 1.0)
    } else {
        (a, b)
    }
}

/// Log-log plot of the series with one reference triangle per slope.
/// Points with non-positive coordinates are skipped.
pub fn loglog_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series], slopes: &[(f64, &str)]) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let (x0, x1) = decades(xmin, xmax);
    let (y0, y1) = decades(ymin, ymax);
    let ax = Axes { x0, x1, y0, y1 };

    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    for d in x0 as i32..=x1 as i32 {
        let x = ax.px(10f64.powi(d));
        let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{bottom}" stroke="#ddd"/>"##);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#, bottom + 16.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = ax.py(10f64.powi(d));
        let _ = writeln!(svg, r##"<line x1="{left}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#, left - 6.0, y + 4.0);
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 20.0, escape(xlabel));
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|&&(x, y)| x > 0.0 && y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y)))
            .collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, coords.join(" "));
        for c in &coords {
            let (cx, cy) = c.split_once(',').unwrap();
            let _ = writeln!(svg, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
        }
        let ly = top + 16.0 + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>"#, right - 150.0, right - 126.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, right - 120.0, ly + 4.0, escape(&s.label));
    }

    // Reference triangles anchored below the last point of the first series.
    let anchor = series.first().and_then(|s| s.points.iter().rev().find(|p| p.0 > 0.0 && p.1 > 0.0).copied());
    if let Some((xa, ya)) = anchor {
        let span = ((x1 - x0) / 4.0).clamp(0.25, 1.0);
        for (j, &(slope, label)) in slopes.iter().enumerate() {
            let xb = xa / 10f64.powf(span);
            let ya = ya / 10f64.powf(0.3 * (j as f64 + 1.0));
            let yb = ya * (xb / xa).powf(slope);
            let (p, q) = ((ax.px(xb), ax.py(yb)), (ax.px(xa), ax.py(ya)));
            let corner = if slope < 0.0 { (q.0, p.1) } else { (p.0, q.1) };
            let _ = writeln!(
                svg,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#,
                p.0, p.1, q.0, q.1, corner.0, corner.1
            );
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" fill="gray">{}</text>"#, corner.0 + 4.0, corner.1 + 4.0, escape(label));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_series_and_slopes() {
        let s = Series { label: "k = 1".into(), points: vec![(18.0, 0.5), (72.0, 0.3), (288.0, 0.2)] };
        let svg = loglog_svg("odp", "ndof", "eta", &[s], &[(-1.0 / 3.0, "-1/3"), (-1.0, "-1")]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn empty_plot_is_valid() {
        let svg = loglog_svg("a < b", "x", "y", &[], &[]);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
