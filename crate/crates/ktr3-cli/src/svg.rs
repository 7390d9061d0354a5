//! Native SVG rendering of log-log rate plots. No graphics dependency:
//! the plot is a handful of lines, circles, and text elements.

use std::fmt::Write;

use ktr3::evaluation::RateFit;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 50.0;

struct LogAxis {
    lo: f64,
    hi: f64,
    offset: f64,
    span: f64,
    flip: bool,
}

impl LogAxis {
    fn new(values: impl Iterator<Item = f64>, offset: f64, span: f64, flip: bool) -> LogAxis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let l = v.log10();
            lo = lo.min(l);
            hi = hi.max(l);
        }
        if !lo.is_finite() || !hi.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-9 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.04 * (hi - lo);
        LogAxis {
            lo: lo - pad,
            hi: hi + pad,
            offset,
            span,
            flip,
        }
    }

    fn place(&self, value: f64) -> f64 {
        let t = (value.log10() - self.lo) / (self.hi - self.lo);
        let t = if self.flip { 1.0 - t } else { t };
        self.offset + t * self.span
    }

    /// Decade tick positions within range, thinned to at most eight.
    fn ticks(&self) -> Vec<f64> {
        let (first, last) = (self.lo.ceil() as i64, self.hi.floor() as i64);
        let all: Vec<f64> = (first..=last).map(|e| 10f64.powi(e as i32)).collect();
        let stride = (all.len() + 7) / 8;
        all.into_iter().step_by(stride.max(1)).collect()
    }
}

fn tick_label(v: f64) -> String {
    let exp = v.log10().round() as i32;
    if (-3..=3).contains(&exp) {
        format!("{v}")
    } else {
        format!("1e{exp}")
    }
}

/// Renders excess risk against sample size on log-log axes, with the
/// fitted power law and a reference line of the given slope anchored at
/// the first point.
pub fn render_rate_plot(
    points: &[(f64, f64)],
    fit: &RateFit,
    reference_slope: f64,
    title: &str,
) -> String {
    let x_axis = LogAxis::new(
        points.iter().map(|p| p.0),
        MARGIN_LEFT,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        false,
    );
    let y_axis = LogAxis::new(
        points
            .iter()
            .map(|p| p.1)
            .chain(points.iter().map(|&(n, _)| {
                // Keep both overlay lines inside the frame.
                (fit.intercept + fit.slope * n.ln()).exp()
            })),
        HEIGHT - MARGIN_BOTTOM,
        -(HEIGHT - MARGIN_TOP - MARGIN_BOTTOM),
        false,
    );

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        title
    );

    // Frame and gridlines.
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    for v in x_axis.ticks() {
        let x = x_axis.place(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            tick_label(v)
        );
    }
    for v in y_axis.ticks() {
        let y = y_axis.place(v);
        let _ = writeln!(
            out,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );

    // Reference slope anchored at the first point, then the fitted line.
    if let Some(&(nx, ny)) = points.first() {
        let ref_at = |n: f64| ny * (n / nx).powf(reference_slope);
        let (na, nb) = (points[0].0, points[points.len() - 1].0);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="6 4" stroke-width="1.5"/>"##,
            x_axis.place(na),
            y_axis.place(ref_at(na)),
            x_axis.place(nb),
            y_axis.place(ref_at(nb)),
        );
        let fit_at = |n: f64| (fit.intercept + fit.slope * n.ln()).exp();
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c33" stroke-width="1.5"/>"##,
            x_axis.place(na),
            y_axis.place(fit_at(na)),
            x_axis.place(nb),
            y_axis.place(fit_at(nb)),
        );
    }

    for &(n, risk) in points {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="#1f5fa8"/>"##,
            x_axis.place(n),
            y_axis.place(risk)
        );
    }

    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">sample size n</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">excess risk</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="end">fit slope {:.3} (r2 {:.3}), reference {:.3}</text>"#,
        x1 - 6.0,
        y1 + 16.0,
        fit.slope,
        fit.r_squared,
        reference_slope
    );
    out.push_str("</svg>\n");
    out
}
