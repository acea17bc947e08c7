//! Minimal SVG charts: grouped bars, polylines and a 2×2 count grid.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Short tick label without float noise.
fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

struct Frame {
    out: String,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(
        title: &str,
        x_label: &str,
        y_label: &str,
        (x0, x1): (f64, f64),
        (y0, y1): (f64, f64),
    ) -> Self {
        let mut out = String::new();
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = write!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            esc(title)
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + (W - LEFT - RIGHT) / 2.0,
            H - 15.0,
            esc(x_label)
        );
        let _ = write!(
            out,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            TOP + (H - TOP - BOTTOM) / 2.0,
            TOP + (H - TOP - BOTTOM) / 2.0,
            esc(y_label)
        );
        let (y0, y1) = if y1 > y0 {
            (y0, y1)
        } else {
            (y0 - 1.0, y0 + 1.0)
        };
        let (x0, x1) = if x1 > x0 {
            (x0, x1)
        } else {
            (x0 - 1.0, x0 + 1.0)
        };
        let mut f = Self {
            out,
            x0,
            x1,
            y0,
            y1,
        };
        f.axes();
        f
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }

    fn axes(&mut self) {
        let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = write!(
            self.out,
            r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let v = self.y0 + (self.y1 - self.y0) * i as f64 / 4.0;
            let y = self.py(v);
            let _ = write!(
                self.out,
                r##"<line x1="{}" y1="{y}" x2="{l}" y2="{y}" stroke="black"/><line x1="{l}" y1="{y}" x2="{r}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                l - 4.0,
                l - 6.0,
                y + 4.0,
                tick(v)
            );
        }
    }

    fn x_ticks(&mut self) {
        for i in 0..=4 {
            let v = self.x0 + (self.x1 - self.x0) * i as f64 / 4.0;
            let x = self.px(v);
            let b = H - BOTTOM;
            let _ = write!(
                self.out,
                r#"<line x1="{x}" y1="{b}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
                b + 4.0,
                b + 16.0,
                tick(v)
            );
        }
    }

    fn legend(&mut self, names: &[&str]) {
        for (i, n) in names.iter().enumerate() {
            let y = TOP + 10.0 + i as f64 * 18.0;
            let x = W - RIGHT + 12.0;
            let _ = write!(
                self.out,
                r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                y - 10.0,
                color(i),
                x + 16.0,
                y,
                esc(n)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Grouped bars: one group per category, one bar per series. The value axis
/// always includes zero.
pub fn bar_chart(
    title: &str,
    y_label: &str,
    categories: &[String],
    series: &[(&str, Vec<f64>)],
) -> String {
    let (lo, hi) = bounds(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let mut f = Frame::new(
        title,
        "",
        y_label,
        (0.0, categories.len().max(1) as f64),
        (lo.min(0.0), hi.max(0.0)),
    );
    let group = 1.0 / (series.len().max(1) as f64 + 1.0);
    let base = f.py(0.0);
    for (c, cat) in categories.iter().enumerate() {
        for (s, (_, values)) in series.iter().enumerate() {
            let Some(&v) = values.get(c).filter(|v| v.is_finite()) else {
                continue;
            };
            let x = f.px(c as f64 + group * (s as f64 + 0.5));
            let w = f.px(group) - f.px(0.0);
            let y = f.py(v);
            let _ = write!(
                f.out,
                r#"<rect x="{x}" y="{}" width="{w}" height="{}" fill="{}"><title>{}</title></rect>"#,
                y.min(base),
                (y - base).abs(),
                color(s),
                tick(v)
            );
        }
        let _ = write!(
            f.out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            f.px(c as f64 + 0.5),
            H - BOTTOM + 16.0,
            esc(cat)
        );
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    if names.len() > 1 {
        f.legend(&names);
    }
    f.finish()
}

/// Polylines over shared axes. `None` ranges are fitted to the data.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(&str, Vec<(f64, f64)>)],
    x_range: Option<(f64, f64)>,
    y_range: Option<(f64, f64)>,
) -> String {
    let x_range =
        x_range.unwrap_or_else(|| bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0))));
    let y_range =
        y_range.unwrap_or_else(|| bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1))));
    let mut f = Frame::new(title, x_label, y_label, x_range, y_range);
    f.x_ticks();
    for (s, (_, points)) in series.iter().enumerate() {
        let pts: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let _ = write!(
            f.out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            color(s)
        );
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    f.legend(&names);
    f.finish()
}

/// 2×2 grid of counts with row and column labels.
pub fn count_grid(
    title: &str,
    rows: [&str; 2],
    cols: [&str; 2],
    counts: [[usize; 2]; 2],
) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="13">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        esc(title)
    );
    let max = counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let (cx, cy, cell) = (200.0, 80.0, 130.0);
    for (j, c) in cols.iter().enumerate() {
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            cx + cell * (j as f64 + 0.5),
            cy - 10.0,
            esc(c)
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let y = cy + cell * i as f64;
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            cx - 10.0,
            y + cell / 2.0,
            esc(r)
        );
        for (j, &n) in counts[i].iter().enumerate() {
            let x = cx + cell * j as f64;
            let shade = 0.15 + 0.75 * n as f64 / max;
            let _ = write!(
                out,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" fill-opacity="{shade:.3}" stroke="black"/><text x="{}" y="{}" text-anchor="middle" font-size="18">{n}</text>"#,
                color(i),
                x + cell / 2.0,
                y + cell / 2.0 + 6.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parses(svg: &str) {
        roxmltree::Document::parse(svg).unwrap_or_else(|e| panic!("{e}\n{svg}"));
    }

    #[test]
    fn charts_are_well_formed() {
        parses(&bar_chart(
            "a <b> & c",
            "y",
            &["x\"1".into(), "x2".into()],
            &[("s1", vec![1.0, -2.0]), ("s2", vec![f64::NAN, 0.5])],
        ));
        parses(&bar_chart("empty", "y", &[], &[]));
        parses(&line_chart(
            "roc",
            "fpr",
            "tpr",
            &[
                ("c", vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)]),
                ("flat", vec![(0.2, 0.2)]),
            ],
            Some((0.0, 1.0)),
            Some((0.0, 1.0)),
        ));
        parses(&line_chart(
            "one point",
            "x",
            "y",
            &[("p", vec![(3.0, 3.0)])],
            None,
            None,
        ));
        parses(&count_grid(
            "cm",
            ["wrong", "correct"],
            ["flagged", "passed"],
            [[3, 1], [0, 9]],
        ));
    }

    #[test]
    fn ticks_are_short() {
        assert_eq!(tick(0.30000000000000004), "0.3");
        assert_eq!(tick(-0.0), "0");
        assert_eq!(tick(12.0), "12");
    }
}
