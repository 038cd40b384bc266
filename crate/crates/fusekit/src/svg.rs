use std::fmt::Write as _;

pub struct Series<'a> {
    pub name: &'a str,
    pub values: Vec<f64>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Minimal line chart: shared x axis, y fixed to `[0, 1]`, a legend in the top-right corner.
pub fn line_chart(x_label: &str, x: &[f64], series: &[Series<'_>]) -> String {
    let (x_min, x_max) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let px = |v: f64| MARGIN + (v - x_min) / span * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - v.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let (x0, x1, y0, y1) = (px(x_min), px(x_max.max(x_min + span)), py(0.0), py(1.0));
    writeln!(out, r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" stroke="black" fill="none"/>"#).unwrap();
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = py(v);
        writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v}</text>"#, x0 - 6.0, y + 4.0).unwrap();
        writeln!(out, r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#ddd"/>"##).unwrap();
    }
    writeln!(out, r#"<text x="{x0:.1}" y="{:.1}">{x_min}</text>"#, y0 + 16.0).unwrap();
    writeln!(out, r#"<text x="{x1:.1}" y="{:.1}" text-anchor="end">{x_max}</text>"#, y0 + 16.0).unwrap();
    writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#, (x0 + x1) / 2.0, HEIGHT - 8.0).unwrap();
    for (j, s) in series.iter().enumerate() {
        let color = COLORS[j % COLORS.len()];
        let points: Vec<String> =
            x.iter().zip(&s.values).map(|(&xv, &yv)| format!("{:.1},{:.1}", px(xv), py(yv))).collect();
        writeln!(out, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, points.join(" ")).unwrap();
        let ly = MARGIN + 16.0 * j as f64;
        writeln!(out, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#, WIDTH - MARGIN, s.name).unwrap();
    }
    out.push_str("</svg>\n");
    out
}
