//! Minimal SVG plotting: scatters and line overlays onto a fixed
//! 800x600 canvas. No external renderer; the output is plain markup
//! with labeled axes and a legend.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 775.0;
const TOP: f64 = 45.0;
const BOTTOM: f64 = 545.0;

pub struct ScatterGroup {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LineSeries {
    pub label: String,
    pub color: String,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

/// Distinguishable fill colors, cycled when runs outnumber them.
pub const PALETTE: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-3 && v.abs() < 1e6 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

struct Bounds {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Bounds {
    fn of(points: impl Iterator<Item = (f64, f64)>) -> Bounds {
        let mut b = Bounds {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in points {
            if x.is_finite() && y.is_finite() {
                b.x0 = b.x0.min(x);
                b.x1 = b.x1.max(x);
                b.y0 = b.y0.min(y);
                b.y1 = b.y1.max(y);
            }
        }
        // Degenerate or empty inputs still need a drawable frame.
        if !b.x0.is_finite() {
            b = Bounds { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        }
        let pad = |lo: &mut f64, hi: &mut f64| {
            let span = *hi - *lo;
            let margin = if span > 0.0 { 0.05 * span } else { lo.abs().max(0.5) * 0.1 };
            *lo -= margin;
            *hi += margin;
        };
        pad(&mut b.x0, &mut b.x1);
        pad(&mut b.y0, &mut b.y1);
        b
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (RIGHT - LEFT)
    }

    fn py(&self, y: f64) -> f64 {
        BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (BOTTOM - TOP)
    }
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, b: &Bounds) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#bbbbbb\"/>\n",
        RIGHT - LEFT,
        BOTTOM - TOP
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"585\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"13\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0,
        escape(y_label)
    ));
    for (v, x, y, anchor) in [
        (b.x0, LEFT, BOTTOM + 18.0, "middle"),
        (b.x1, RIGHT, BOTTOM + 18.0, "middle"),
        (b.y0, LEFT - 6.0, BOTTOM, "end"),
        (b.y1, LEFT - 6.0, TOP + 4.0, "end"),
    ] {
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\" font-family=\"monospace\" font-size=\"11\">{}</text>\n",
            fmt_num(v)
        ));
    }
}

fn legend(out: &mut String, items: &[(String, String, bool)]) {
    for (i, (label, color, dashed)) in items.iter().enumerate() {
        let y = TOP + 16.0 + i as f64 * 18.0;
        let dash = if *dashed { " stroke-dasharray=\"6,3\"" } else { "" };
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2.5\"{dash}/>\n",
            RIGHT - 170.0,
            RIGHT - 140.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">{}</text>\n",
            RIGHT - 132.0,
            y + 4.0,
            escape(label)
        ));
    }
}

pub fn scatter(title: &str, x_label: &str, y_label: &str, groups: &[ScatterGroup]) -> String {
    let b = Bounds::of(groups.iter().flat_map(|g| g.points.iter().copied()));
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, &b);
    for g in groups {
        for &(x, y) in &g.points {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.65\"/>\n",
                b.px(x),
                b.py(y),
                g.color
            ));
        }
    }
    legend(
        &mut out,
        &groups
            .iter()
            .map(|g| (g.label.clone(), g.color.clone(), false))
            .collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    out
}

pub fn lines(title: &str, x_label: &str, y_label: &str, series: &[LineSeries]) -> String {
    let b = Bounds::of(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, &b);
    for s in series {
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", b.px(x), b.py(y)))
            .collect();
        let dash = if s.dashed { " stroke-dasharray=\"6,3\"" } else { "" };
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{dash}/>\n",
            path.join(" "),
            s.color
        ));
    }
    legend(
        &mut out,
        &series
            .iter()
            .map(|s| (s.label.clone(), s.color.clone(), s.dashed))
            .collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    out
}
