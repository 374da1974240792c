//! Minimal log-log SVG figures for convergence studies.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

/// One data polyline.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    /// `(x, y)` pairs; non-positive values are skipped.
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

/// A reference-slope triangle whose right-angle corner sits at `anchor`.
#[derive(Clone, Debug)]
pub struct SlopeGuide {
    pub slope: f64,
    pub anchor: (f64, f64),
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x.log10() - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y.log10() - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn decade_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v.log10()), b.max(v.log10()))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

/// Renders the figure as a standalone SVG document.
pub fn loglog_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    guides: &[SlopeGuide],
) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let guide_ys = guides.iter().flat_map(|g| {
        let x1 = g.anchor.0 * 10f64.powf(-0.3);
        [g.anchor.1, g.anchor.1 * (x1 / g.anchor.0).powf(g.slope)]
    });
    let axes = Axes {
        x: decade_range(xs),
        y: decade_range(ys.chain(guide_ys)),
    };
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    for k in axes.x.0 as i32..=axes.x.1 as i32 {
        let px = axes.px(10f64.powi(k));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{y1}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">1e{k}</text>"#,
            y1 + 20.0
        );
    }
    for k in axes.y.0 as i32..=axes.y.1 as i32 {
        let py = axes.py(10f64.powi(k));
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{k}</text>"#,
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="25" y="{0}" text-anchor="middle" transform="rotate(-90 25 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );

    for ser in series {
        let pts: Vec<(f64, f64)> = ser
            .points
            .iter()
            .filter(|p| p.0 > 0.0 && p.1 > 0.0)
            .map(|&(x, y)| (axes.px(x), axes.py(y)))
            .collect();
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let dash = if ser.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            path.join(" "),
            ser.color
        );
        for (x, y) in &pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{}"/>"#,
                ser.color
            );
        }
    }

    for g in guides {
        let (ax, ay) = g.anchor;
        let bx = ax * 10f64.powf(-0.3);
        let by = ay * (bx / ax).powf(g.slope);
        let (pax, pay, pbx, pby) = (axes.px(ax), axes.py(ay), axes.px(bx), axes.py(by));
        let _ = writeln!(
            s,
            r#"<polygon points="{pbx:.2},{pby:.2} {pbx:.2},{pay:.2} {pax:.2},{pay:.2}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#,
            pbx - 4.0,
            (pay + pby) / 2.0 + 4.0,
            g.slope
        );
    }

    for (i, ser) in series.iter().enumerate() {
        let y = y0 + 20.0 + 20.0 * i as f64;
        let dash = if ser.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"{dash}/>"#,
            x1 - 200.0,
            x1 - 170.0,
            ser.color
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            x1 - 162.0,
            y + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure() -> String {
        let series = vec![Series {
            label: "L2 <p=0>".into(),
            points: vec![(100.0, 0.5), (800.0, 0.25), (6400.0, 0.0)],
            color: "black",
            dashed: true,
        }];
        loglog_svg(
            "t",
            "N",
            "error",
            &series,
            &[SlopeGuide {
                slope: -1.0 / 3.0,
                anchor: (800.0, 0.1),
            }],
        )
    }

    #[test]
    fn canvas_and_elements() {
        let svg = figure();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(r#"width="800" height="600""#));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon").count(), 1);
        // The zero error is skipped.
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("-0.33"));
        assert!(svg.contains("L2 &lt;p=0&gt;"));
    }

    #[test]
    fn log_axes_map_decades_linearly() {
        let axes = Axes {
            x: (0.0, 2.0),
            y: (-2.0, 0.0),
        };
        let mid = (axes.px(1.0) + axes.px(100.0)) / 2.0;
        assert!((axes.px(10.0) - mid).abs() < 1e-9);
        assert!(axes.py(1.0) < axes.py(0.01));
    }

    #[test]
    fn decade_range_pads_to_whole_decades() {
        assert_eq!(decade_range([150.0, 900.0].into_iter()), (2.0, 3.0));
        assert_eq!(decade_range([100.0].into_iter()), (2.0, 3.0));
        assert_eq!(decade_range(std::iter::empty()), (0.0, 1.0));
    }
}
