//! Minimal SVG charts for sweep curves and log-likelihood histograms.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<text x="{x0}" y="{}" text-anchor="start">{:.3}</text>"#, y0 + 16.0, x.0);
    let _ = writeln!(out, r#"<text x="{x1}" y="{}" text-anchor="end">{:.3}</text>"#, y0 + 16.0, x.1);
    let _ = writeln!(out, r#"<text x="{}" y="{y0}" text-anchor="end">{:.3}</text>"#, x0 - 4.0, y.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, x0 - 4.0, y1 + 4.0, y.1);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, WIDTH - MARGIN - 130.0, y - 9.0);
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, WIDTH - MARGIN - 115.0, escape(name));
    }
}

/// Line chart; with `log_x` the x axis is log10-scaled.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool) -> String {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let x = extent(series.iter().flat_map(|s| s.points.iter().map(|p| tx(p.0))));
    let y = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut out = String::new();
    let shown_x = if log_x { (10f64.powf(x.0), 10f64.powf(x.1)) } else { x };
    frame(&mut out, title, x_label, y_label, shown_x, y);
    let px = |v: f64| MARGIN + (tx(v) - x.0) / (x.1 - x.0) * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (v - y.0) / (y.1 - y.0) * (HEIGHT - 2.0 * MARGIN);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        for p in &pts {
            let (cx, cy) = p.split_once(',').unwrap();
            let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
    }
    legend(&mut out, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Overlaid histograms of several samples on shared bins, as densities.
pub fn histogram(title: &str, x_label: &str, samples: &[(&str, &[f64])], bins: usize) -> String {
    let bins = bins.max(1);
    let x = extent(samples.iter().flat_map(|s| s.1.iter().copied()));
    let width = (x.1 - x.0) / bins as f64;
    let densities: Vec<Vec<f64>> = samples
        .iter()
        .map(|(_, values)| {
            let mut counts = vec![0.0; bins];
            for &v in values.iter().filter(|v| v.is_finite()) {
                let k = (((v - x.0) / width) as usize).min(bins - 1);
                counts[k] += 1.0;
            }
            let n = values.len().max(1) as f64;
            counts.into_iter().map(|c| c / n / width).collect()
        })
        .collect();
    let y = (0.0, extent(densities.iter().flatten().copied()).1);
    let mut out = String::new();
    frame(&mut out, title, x_label, "density", x, y);
    let bar = (WIDTH - 2.0 * MARGIN) / bins as f64;
    for (i, d) in densities.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for (k, &v) in d.iter().enumerate() {
            let h = v / y.1 * (HEIGHT - 2.0 * MARGIN);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.45"/>"#,
                MARGIN + bar * k as f64,
                HEIGHT - MARGIN - h,
                bar,
                h
            );
        }
    }
    legend(&mut out, &samples.iter().map(|s| s.0).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let s = line_chart(
            "sweep",
            "weight",
            "mse",
            &[Series { name: "a<b".into(), points: vec![(1.0, 2.0), (10.0, 1.0), (100.0, 3.0)] }],
            true,
        );
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a&lt;b"));
        let h = histogram("ll", "log-likelihood", &[("x", &[1.0, 2.0, 2.5]), ("y", &[])], 4);
        assert_eq!(h.matches("<rect x=").count(), 4 * 2 + 2);
    }
}
