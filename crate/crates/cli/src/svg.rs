//! Static SVG renderings of the emitted curve data.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub label: String,
    pub ticks: Vec<(f64, String)>,
}

impl Axis {
    pub fn linear(min: f64, max: f64, label: &str) -> Self {
        let (min, max) = if max > min { (min, max) } else { (min - 0.5, min + 0.5) };
        Self {
            min,
            max,
            label: label.to_string(),
            ticks: linear_ticks(min, max),
        }
    }
}

fn linear_ticks(min: f64, max: f64) -> Vec<(f64, String)> {
    let raw = (max - min) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut out = Vec::new();
    let mut v = (min / step).ceil() * step;
    while v <= max + 1e-9 * step {
        out.push((v, trim_number(v)));
        v += step;
    }
    out
}

fn trim_number(v: f64) -> String {
    let v = if v.abs() < 1e-12 { 0.0 } else { v };
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub struct Figure {
    x: Axis,
    y: Axis,
    title: String,
    body: String,
    strips: String,
    legend: Vec<(String, &'static str, bool)>,
}

impl Figure {
    pub fn new(title: &str, x: Axis, y: Axis) -> Self {
        Self {
            x,
            y,
            title: title.to_string(),
            body: String::new(),
            strips: String::new(),
            legend: Vec::new(),
        }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.min) / (self.x.max - self.x.min) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.min) / (self.y.max - self.y.min) * (HEIGHT - TOP - BOTTOM)
    }

    fn points(&self, pts: &[(f64, f64)]) -> String {
        pts.iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        let dash = if dashed { " stroke-dasharray=\"4 3\"" } else { "" };
        let p = self.points(pts);
        let _ = writeln!(
            self.body,
            "<polyline points=\"{p}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>"
        );
    }

    pub fn polygon(&mut self, pts: &[(f64, f64)], fill: &str) {
        let p = self.points(pts);
        let _ = writeln!(
            self.body,
            "<polygon points=\"{p}\" fill=\"{fill}\" fill-opacity=\"0.3\" stroke=\"none\"/>"
        );
    }

    pub fn marker(&mut self, x: f64, y: f64, color: &str, label: &str) {
        let (cx, cy) = (self.px(x), self.py(y));
        let _ = writeln!(
            self.body,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"{color}\"/>"
        );
        let _ = writeln!(
            self.body,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>",
            cx + 6.0,
            cy - 6.0,
            escape(label)
        );
    }

    /// Colored strip below the plot area; `runs` are `(from, to, color)` in data units.
    pub fn strip(&mut self, runs: &[(f64, f64, &str)]) {
        let y = HEIGHT - BOTTOM + 34.0;
        for &(a, b, c) in runs {
            let (xa, xb) = (self.px(a), self.px(b));
            let _ = writeln!(
                self.strips,
                "<rect x=\"{xa:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"8\" fill=\"{c}\"/>",
                (xb - xa).max(0.5)
            );
        }
    }

    pub fn legend(&mut self, label: &str, color: &'static str, dashed: bool) {
        self.legend.push((label.to_string(), color, dashed));
    }

    pub fn finish(self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">"
        );
        let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            (LEFT + WIDTH - RIGHT) / 2.0,
            escape(&self.title)
        );
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            s,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            x1 - x0,
            y1 - y0
        );
        for (v, label) in &self.x.ticks {
            let x = self.px(*v);
            let _ = writeln!(
                s,
                "<line x1=\"{x:.2}\" y1=\"{y1}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
                y1 + 5.0
            );
            let _ = writeln!(
                s,
                "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
                y1 + 18.0,
                escape(label)
            );
        }
        for (v, label) in &self.y.ticks {
            let y = self.py(*v);
            let _ = writeln!(
                s,
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x0}\" y2=\"{y:.2}\" stroke=\"black\"/>",
                x0 - 5.0
            );
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
                x0 - 8.0,
                y + 4.0,
                escape(label)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            (x0 + x1) / 2.0,
            y1 + 32.0 + if self.strips.is_empty() { 0.0 } else { 20.0 },
            escape(&self.x.label)
        );
        let _ = writeln!(
            s,
            "<text x=\"18\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>",
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y.label)
        );
        let _ = writeln!(
            s,
            "<clipPath id=\"plot\"><rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\"/></clipPath>",
            x1 - x0,
            y1 - y0
        );
        let _ = write!(s, "<g clip-path=\"url(#plot)\">\n{}</g>\n{}", self.body, self.strips);
        for (i, (label, c, dashed)) in self.legend.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let dash = if *dashed { " stroke-dasharray=\"4 3\"" } else { "" };
            let _ = writeln!(
                s,
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{c}\" stroke-width=\"2\"{dash}/>",
                x1 + 10.0,
                x1 + 30.0
            );
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>",
                x1 + 36.0,
                y + 4.0,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub struct MurphySeries<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Curves against `log10(theta)` with a dominance strip underneath.
pub fn murphy(series: &[MurphySeries], dominance: &[(f64, f64, Option<usize>)]) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let ymax = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let (xmin, xmax) = if xmin.is_finite() { (xmin, xmax) } else { (-1.0, 0.0) };
    let mut x = Axis::linear(xmin, xmax, "log10 threshold");
    x.ticks = x
        .ticks
        .into_iter()
        .map(|(v, _)| (v, format!("1e{}", trim_number(v))))
        .collect();
    let mut fig = Figure::new(
        "Murphy diagram",
        x,
        Axis::linear(0.0, ymax * 1.05, "mean elementary score"),
    );
    for (i, s) in series.iter().enumerate() {
        fig.polyline(&s.points, color(i), false);
        fig.legend(s.label, color(i), false);
    }
    let runs: Vec<(f64, f64, &str)> = dominance
        .iter()
        .map(|&(a, b, m)| (a, b, m.map_or("#cccccc", color)))
        .collect();
    fig.strip(&runs);
    fig.finish()
}

/// Reliability curve with its band on empirical-CDF axes. `ticks` are
/// `(position, label)` pairs at original forecast values.
pub fn reliability(label: &str, curve: &[(f64, f64)], band: &[(f64, f64, f64)], ticks: Vec<(f64, String)>) -> String {
    let mut x = Axis::linear(0.0, 1.0, "forecast (empirical CDF scale)");
    x.ticks = ticks.clone();
    let mut y = Axis::linear(0.0, 1.0, "recalibrated forecast (empirical CDF scale)");
    y.ticks = ticks;
    let mut fig = Figure::new(&format!("Reliability: {label}"), x, y);
    let mut poly: Vec<(f64, f64)> = band.iter().map(|&(x, lo, _)| (x, lo)).collect();
    poly.extend(band.iter().rev().map(|&(x, _, hi)| (x, hi)));
    fig.polygon(&poly, color(0));
    fig.polyline(&[(0.0, 0.0), (1.0, 1.0)], "#999999", true);
    fig.polyline(curve, "#d62728", false);
    fig.legend("reliability curve", "#d62728", false);
    fig.legend("consistency band", color(0), false);
    fig.finish()
}

pub struct McbDscPoint<'a> {
    pub label: &'a str,
    pub mcb: f64,
    pub dsc: f64,
}

/// MCB-DSC plane with score isopleths `DSC - MCB = UNC - score` and dotted
/// connectors between pairs that a DM test does not separate.
pub fn mcb_dsc(points: &[McbDscPoint], unc: f64, pairs: &[(usize, usize)]) -> String {
    let mmax = points
        .iter()
        .map(|p| p.mcb)
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        * 1.15;
    let dmax = points
        .iter()
        .map(|p| p.dsc)
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
        * 1.15;
    let (mmax, dmax) = (if mmax > 0.0 { mmax } else { 1.0 }, if dmax > 0.0 { dmax } else { 1.0 });
    let mut fig = Figure::new(
        "MCB-DSC diagram",
        Axis::linear(0.0, mmax, "MCB"),
        Axis::linear(0.0, dmax, "DSC"),
    );
    for (v, _) in linear_ticks(0.0, dmax.max(mmax)) {
        // isopleth for score = unc - v
        fig.polyline(&[(0.0, v), (mmax, v + mmax)], "#dddddd", false);
    }
    for &(a, b) in pairs {
        fig.polyline(
            &[(points[a].mcb, points[a].dsc), (points[b].mcb, points[b].dsc)],
            "#444444",
            true,
        );
    }
    for (i, p) in points.iter().enumerate() {
        fig.marker(p.mcb, p.dsc, color(i), p.label);
    }
    fig.legend(&format!("UNC = {}", trim_number(unc)), "#dddddd", false);
    fig.finish()
}
