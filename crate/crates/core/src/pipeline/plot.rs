//! Minimal static SVG plots: loss curves and grouped metric bars. No
//! interactive UI, just files next to the report.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

/// Line chart of one or more named series over a shared x axis.
pub fn line_chart(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut svg = header(title);
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if points.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let _ = write!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{m}\" y=\"{lb}\" text-anchor=\"middle\">{xl}</text>\n\
         <text x=\"{r}\" y=\"{lb}\" text-anchor=\"middle\">{xr}</text>\n\
         <text x=\"{ly}\" y=\"{b}\" text-anchor=\"end\">{yl}</text>\n\
         <text x=\"{ly}\" y=\"{t}\" text-anchor=\"end\">{yh}</text>\n",
        m = MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        lb = HEIGHT - MARGIN + 16.0,
        ly = MARGIN - 6.0,
        xl = fmt(x0),
        xr = fmt(x1),
        yl = fmt(y0),
        yh = fmt(y1),
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n\
             <text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            path.join(" "),
            WIDTH - MARGIN - 140.0,
            MARGIN + 16.0 * (i + 1) as f64,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Grouped bar chart: one group per label, one bar per series.
pub fn bar_chart(title: &str, labels: &[String], series: &[(String, Vec<f64>)]) -> String {
    let mut svg = header(title);
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(1e-12);
    let groups = labels.len().max(1) as f64;
    let group_w = (WIDTH - 2.0 * MARGIN) / groups;
    let bar_w = group_w / (series.len() as f64 + 1.0);
    let base = HEIGHT - MARGIN;
    let scale = (HEIGHT - 2.0 * MARGIN) / max;

    let _ = write!(
        svg,
        "<line x1=\"{m}\" y1=\"{base}\" x2=\"{r}\" y2=\"{base}\" stroke=\"black\"/>\n",
        m = MARGIN,
        r = WIDTH - MARGIN,
    );
    for (g, label) in labels.iter().enumerate() {
        let gx = MARGIN + g as f64 * group_w;
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            gx + group_w / 2.0,
            base + 16.0,
            escape(label)
        );
        for (si, (name, values)) in series.iter().enumerate() {
            let v = values.get(g).copied().unwrap_or(0.0);
            let h = v * scale;
            let color = COLORS[si % COLORS.len()];
            let _ = write!(
                svg,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\"/>\n\
                 <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
                gx + bar_w * (si as f64 + 0.5),
                base - h,
                bar_w * 0.9,
                h,
                gx + bar_w * (si as f64 + 1.0),
                (base - h - 4.0).max(12.0),
                fmt(v)
            );
            if g == 0 {
                let _ = write!(
                    svg,
                    "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
                    WIDTH - MARGIN - 140.0,
                    MARGIN + 16.0 * (si + 1) as f64,
                    escape(name)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}
