//! Self-contained SVG figures.

use std::fmt::Write;

use poisperc_core::{DensityField, ExponentFit, Site};

const PANEL: f64 = 480.0;
const MARGIN: f64 = 50.0;

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Cluster raster: one unit square per site inside the frame `[-R, R]²`.
pub fn cluster_svg(sites: &[Site], frame_radius: f64) -> String {
    let r = frame_radius.max(1.0);
    let side = 2.0 * r + 1.0;
    let scale = PANEL / side;
    let size = PANEL + 2.0 * MARGIN;
    let mut out = header(size, size);
    // Site (x, y) covers [x - ½, x + ½] × [y - ½, y + ½]; y grows upward.
    let px = |x: f64| MARGIN + (x + r + 0.5) * scale;
    let py = |y: f64| MARGIN + (r + 0.5 - y) * scale;
    let _ = writeln!(out, "<g fill=\"black\" shape-rendering=\"crispEdges\">");
    for s in sites {
        let (x, y) = (f64::from(s.x), f64::from(s.y));
        if x.abs() > r || y.abs() > r {
            continue;
        }
        let _ = writeln!(
            out,
            "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\"/>",
            px(x - 0.5),
            py(y + 0.5),
            scale,
            scale
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        "<rect class=\"frame\" x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{PANEL}\" height=\"{PANEL}\" \
         fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">radius {}</text>",
        MARGIN + PANEL / 2.0,
        MARGIN - 15.0,
        r
    );
    out.push_str("</svg>\n");
    out
}

/// Piecewise-linear colour ramp on `[0, 1]`.
fn color(v: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.25, [59.0, 82.0, 139.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (0.75, [94.0, 201.0, 98.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let k = STOPS.iter().position(|s| s.0 >= v).unwrap_or(4).max(1);
    let (a, b) = (STOPS[k - 1], STOPS[k]);
    let f = (v - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|i| (a.1[i] + f * (b.1[i] - a.1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heat maps of `D_{i,j}` and `θ(ρ(x_{i,j}, t))` on one colour scale over `[0, 1]`.
pub fn density_svg(field: &DensityField) -> String {
    let grid = field.grid;
    let span = grid.span().max(1) as f64;
    let cell = PANEL / span;
    let legend = 60.0;
    let width = 2.0 * PANEL + 3.0 * MARGIN + legend;
    let height = PANEL + 2.0 * MARGIN;
    let mut out = header(width, height);
    type Value = fn(&poisperc_core::density::BoxDensity) -> f64;
    let panels: [(&str, Value); 2] =
        [("D (cluster density)", |b| b.density), ("theta(rho(x, t))", |b| b.theta_target)];
    for (k, (title, value)) in panels.iter().enumerate() {
        let x0 = MARGIN + k as f64 * (PANEL + MARGIN);
        let _ = writeln!(out, "<g class=\"heatmap\" data-scale=\"0 1\">");
        for b in &field.boxes {
            let col = (b.i - grid.index_min) as f64;
            let row = (grid.index_max - b.j) as f64;
            let _ = writeln!(
                out,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{}\"/>",
                x0 + col * cell,
                MARGIN + row * cell,
                cell,
                cell,
                color(value(b))
            );
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            x0 + PANEL / 2.0,
            MARGIN - 15.0,
            escape(title)
        );
    }
    let lx = 2.0 * PANEL + 2.5 * MARGIN;
    let steps = 50;
    for s in 0..steps {
        let v = (s as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{lx}\" y=\"{:.3}\" width=\"15\" height=\"{:.3}\" fill=\"{}\"/>",
            MARGIN + PANEL * (1.0 - (s + 1) as f64 / steps as f64),
            PANEL / steps as f64 + 0.5,
            color(v)
        );
    }
    for (v, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.3}\" font-size=\"12\">{label}</text>",
            lx + 20.0,
            MARGIN + PANEL * (1.0 - v) + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One scatter-plus-line panel.
#[derive(Clone, Debug)]
pub struct FitPanel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

impl FitPanel {
    /// `ln mean` against `ln N`, with the fitted intercept recomputed from the means.
    pub fn log_log(title: &str, y_label: &str, fit: &ExponentFit) -> Self {
        let xs: Vec<f64> = fit.n_values.iter().map(|n| n.ln()).collect();
        let ys: Vec<f64> = fit.means.iter().map(|m| m.ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        let my = ys.iter().sum::<f64>() / ys.len().max(1) as f64;
        FitPanel {
            title: title.to_string(),
            x_label: "ln N".to_string(),
            y_label: y_label.to_string(),
            xs,
            ys,
            slope: fit.slope,
            intercept: my - fit.slope * mx,
        }
    }
}

/// Text of the slope annotation; exact, so it can be read back.
pub fn slope_label(slope: f64) -> String {
    format!("slope = {slope}")
}

pub fn fit_svg(panels: &[FitPanel]) -> String {
    let width = panels.len().max(1) as f64 * (PANEL + MARGIN) + MARGIN;
    let height = PANEL + 2.0 * MARGIN;
    let mut out = header(width, height);
    for (k, p) in panels.iter().enumerate() {
        let x0 = MARGIN + k as f64 * (PANEL + MARGIN);
        let finite = |v: &&f64| v.is_finite();
        let (xmin, xmax) = bounds(p.xs.iter().filter(finite).copied());
        let line_ys = [p.intercept + p.slope * xmin, p.intercept + p.slope * xmax];
        let (ymin, ymax) = bounds(p.ys.iter().filter(finite).copied().chain(line_ys));
        let sx = |x: f64| x0 + (x - xmin) / (xmax - xmin) * PANEL;
        let sy = |y: f64| MARGIN + (1.0 - (y - ymin) / (ymax - ymin)) * PANEL;
        let _ = writeln!(
            out,
            "<rect x=\"{x0}\" y=\"{MARGIN}\" width=\"{PANEL}\" height=\"{PANEL}\" fill=\"none\" stroke=\"black\"/>"
        );
        for (&x, &y) in p.xs.iter().zip(&p.ys) {
            if x.is_finite() && y.is_finite() {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"steelblue\"/>",
                    sx(x),
                    sy(y)
                );
            }
        }
        let _ = writeln!(
            out,
            "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"firebrick\" stroke-width=\"1.5\"/>",
            sx(xmin),
            sy(line_ys[0]),
            sx(xmax),
            sy(line_ys[1])
        );
        let _ = writeln!(
            out,
            "<text class=\"slope\" x=\"{}\" y=\"{}\" font-size=\"14\">{}</text>",
            x0 + 10.0,
            MARGIN + 20.0,
            escape(&slope_label(p.slope))
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            x0 + PANEL / 2.0,
            MARGIN - 15.0,
            escape(&p.title)
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{} [{:.3}, {:.3}]</text>",
            x0 + PANEL / 2.0,
            MARGIN + PANEL + 20.0,
            escape(&p.x_label),
            xmin,
            xmax
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 {} {})\">{} [{:.3}, {:.3}]</text>",
            x0 - 12.0,
            MARGIN + PANEL / 2.0,
            x0 - 12.0,
            MARGIN + PANEL / 2.0,
            escape(&p.y_label),
            ymin,
            ymax
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Padded range of the values, never degenerate.
fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

/// Strip raster: bottom-cluster cells in grey, front sites joined column by column.
pub fn strip_svg(width: usize, height: usize, cluster: &[bool], front: &[Site]) -> String {
    let scale = (1200.0 / width as f64).min(600.0 / height as f64);
    let (w, h) = (width as f64 * scale, height as f64 * scale);
    let mut out = header(w + 2.0 * 20.0, h + 2.0 * 20.0);
    let py = |y: f64| 20.0 + h - (y + 1.0) * scale;
    let _ = writeln!(out, "<g fill=\"#bbbbbb\" shape-rendering=\"crispEdges\">");
    for y in 0..height {
        let row = &cluster[y * width..(y + 1) * width];
        let mut x = 0;
        while x < width {
            if !row[x] {
                x += 1;
                continue;
            }
            let start = x;
            while x < width && row[x] {
                x += 1;
            }
            let _ = writeln!(
                out,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\"/>",
                20.0 + start as f64 * scale,
                py(y as f64),
                (x - start) as f64 * scale,
                scale
            );
        }
    }
    let _ = writeln!(out, "</g>");
    // Highest front site per column.
    let mut top: Vec<Option<i32>> = vec![None; width];
    for s in front {
        if let Some(slot) = top.get_mut(s.x as usize) {
            *slot = Some(slot.map_or(s.y, |v| v.max(s.y)));
        }
    }
    let points: Vec<String> = top
        .iter()
        .enumerate()
        .filter_map(|(x, y)| {
            y.map(|y| format!("{:.3},{:.3}", 20.0 + (x as f64 + 0.5) * scale, py(f64::from(y)) + scale / 2.0))
        })
        .collect();
    let _ = writeln!(
        out,
        "<polyline class=\"front\" fill=\"none\" stroke=\"firebrick\" stroke-width=\"1\" points=\"{}\"/>",
        points.join(" ")
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cluster_draws_frame_only() {
        let svg = cluster_svg(&[], 150.0);
        assert!(svg.contains("class=\"frame\""));
        assert!(!svg.contains("<rect x="));
    }

    #[test]
    fn one_square_per_site() {
        let sites = [Site::new(0, 0), Site::new(1, 0), Site::new(400, 0)];
        let svg = cluster_svg(&sites, 10.0);
        assert_eq!(svg.matches("<rect x=").count(), 2, "site outside the frame is dropped");
    }

    #[test]
    fn slope_annotation_reads_back() {
        let panel = FitPanel {
            title: "w".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            xs: vec![0.0, 1.0, 2.0],
            ys: vec![1.0, 1.5714285714285714, 2.142857142857143],
            slope: 0.5714285714285714,
            intercept: 1.0,
        };
        let svg = fit_svg(&[panel]);
        let label = svg.split("class=\"slope\"").nth(1).unwrap();
        let text = label.split('>').nth(1).unwrap().split('<').next().unwrap();
        let value: f64 = text.trim_start_matches("slope = ").parse().unwrap();
        assert_eq!(value, 0.5714285714285714);
    }

    #[test]
    fn color_ramp_endpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(f64::NAN), "#440154");
    }
}
