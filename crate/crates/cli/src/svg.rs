//! Minimal SVG line plots so spectra and correlograms are inspectable
//! without a plotting runtime.

use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Write a single-series line chart. Non-finite y values are skipped.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
) -> std::io::Result<()> {
    let finite: Vec<(f64, f64)> =
        points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (x_lo, x_hi) = bounds(finite.iter().map(|p| p.0));
    let (y_lo, y_hi) = bounds(finite.iter().map(|p| p.1));
    let x_span = (x_hi - x_lo).max(1e-300);
    let y_span = (y_hi - y_lo).max(1e-300);
    let to_px = |x: f64, y: f64| {
        (
            MARGIN + (x - x_lo) / x_span * (WIDTH - 2.0 * MARGIN),
            HEIGHT - MARGIN - (y - y_lo) / y_span * (HEIGHT - 2.0 * MARGIN),
        )
    };

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
        WIDTH / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="11">{x_lo:.4}</text>"#,
        HEIGHT - MARGIN + 16.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{x_hi:.4}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{y_lo:.3}</text>"#,
        MARGIN - 6.0,
        HEIGHT - MARGIN
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{y_hi:.3}</text>"#,
        MARGIN - 6.0,
        MARGIN + 6.0
    )
    .unwrap();

    if finite.len() > 1 {
        let mut d = String::new();
        for (i, &(x, y)) in finite.iter().enumerate() {
            let (px, py) = to_px(x, y);
            let cmd = if i == 0 { 'M' } else { 'L' };
            write!(d, "{cmd}{px:.1} {py:.1} ").unwrap();
        }
        writeln!(s, r##"<path d="{d}" fill="none" stroke="#1f4e9c" stroke-width="1"/>"##).unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    std::fs::write(path, s)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}
