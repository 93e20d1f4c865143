//! Minimal SVG line and raster writer. CSV is the canonical output; these
//! plots are a convenience.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// A named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Data range padded so that a constant series still has a nonzero extent.
fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn open(&self, title: &str, x_label: &str, y_label: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let (x0, x1) = (MARGIN, WIDTH - MARGIN);
        let (y0, y1) = (HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(
            s,
            r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{x0}" y="{}" text-anchor="middle">{:.4}</text><text x="{x1}" y="{}" text-anchor="middle">{:.4}</text>"#,
            y0 + 15.0,
            self.x.0,
            y0 + 15.0,
            self.x.1
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y0}" text-anchor="end">{:.4}</text><text x="{}" y="{y1}" text-anchor="end">{:.4}</text>"#,
            x0 - 4.0,
            self.y.0,
            x0 - 4.0,
            self.y.1
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 10.0,
            escape(x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(y_label)
        );
        s
    }
}

/// Line plot of several series on shared axes.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame {
        x: extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.0))),
        y: extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
    };
    let mut s = frame.open(title, x_label, y_label);
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        for (i, &(x, y)) in ser.points.iter().filter(|p| p.1.is_finite()).enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if i == 0 { 'M' } else { 'L' },
                frame.px(x),
                frame.py(y)
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            d.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 14.0 * k as f64,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Spike raster: one tick per `(time, row)` event.
pub fn raster_plot(title: &str, events: &[(f64, usize)], rows: usize, t_max: f64) -> String {
    let frame = Frame {
        x: (0.0, t_max.max(1e-9)),
        y: (0.0, rows.max(1) as f64),
    };
    let mut s = frame.open(title, "time (ms)", "neuron");
    let _ = writeln!(s, r#"<g fill="black">"#);
    for &(t, row) in events {
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="1" height="1"/>"#,
            frame.px(t),
            frame.py(row as f64 + 0.5)
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_well_formed() {
        let svg = line_plot(
            "a < b",
            "t",
            "v",
            &[Series {
                label: "s".into(),
                points: vec![(0.0, 1.0), (1.0, 1.0)],
            }],
        );
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<path").count(), 2);
    }

    #[test]
    fn raster_has_one_tick_per_event() {
        let svg = raster_plot("r", &[(1.0, 0), (2.0, 3)], 4, 10.0);
        assert_eq!(svg.matches("<rect x").count(), 2);
    }
}
