//! Minimal SVG figures: line plots, scatter plots, rasters and tables.
//!
//! Output contains no timestamps or random ids, so identical inputs give
//! identical files.

use std::fmt::Write;

use base64::Engine;

const W: f64 = 720.0;
const H: f64 = 460.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions at a 1/2/5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 7.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let d = 0.5 * (1.0 + lo.abs());
        return (lo - d, hi + d);
    }
    let d = 0.04 * (hi - lo);
    (lo - d, hi + d)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * self.w
    }
    fn py(&self, y: f64) -> f64 {
        TOP + (1.0 - (y - self.y.0) / (self.y.1 - self.y.0)) * self.h
    }
}

fn open(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        width / 2.0,
        esc(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        f.w, f.h
    );
    for t in ticks(f.x.0, f.x.1) {
        let x = f.px(t);
        let yb = TOP + f.h;
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{yb:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            yb + 5.0,
            yb + 19.0,
            fmt_tick(t)
        );
    }
    for t in ticks(f.y.0, f.y.1) {
        let y = f.py(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + f.w / 2.0,
        TOP + f.h + 42.0,
        esc(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + f.h / 2.0,
        esc(ylabel)
    );
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a polyline.
    pub scatter: bool,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Series {
        Series {
            label: label.into(),
            points,
            scatter: false,
        }
    }

    pub fn scatter(label: impl Into<String>, points: Vec<(f64, f64)>) -> Series {
        Series {
            label: label.into(),
            points,
            scatter: true,
        }
    }
}

fn bounds<'a>(vals: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    vals.filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

/// Polyline/scatter plot. `equal` forces one unit per pixel on both axes.
pub fn plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], equal: bool) -> String {
    let mut x = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| &p.0)));
    let mut y = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| &p.1)));
    x = padded(x.0, x.1);
    y = padded(y.0, y.1);
    let (w, h) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    if equal {
        let scale = ((x.1 - x.0) / w).max((y.1 - y.0) / h);
        let (cx, cy) = (0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1));
        x = (cx - 0.5 * scale * w, cx + 0.5 * scale * w);
        y = (cy - 0.5 * scale * h, cy + 0.5 * scale * h);
    }
    let f = Frame { x, y, w, h };
    let mut out = String::new();
    open(&mut out, W, H, title);
    axes(&mut out, &f, xlabel, ylabel);
    let _ = writeln!(
        out,
        r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{w:.2}" height="{h:.2}"/></clipPath><g clip-path="url(#plot)">"#
    );
    for (i, s) in series.iter().enumerate() {
        let c = color(i);
        if s.scatter {
            for &(a, b) in s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#,
                    f.px(a),
                    f.py(b)
                );
            }
        } else {
            // split the polyline at non-finite values
            let mut runs: Vec<Vec<String>> = vec![Vec::new()];
            for &(a, b) in &s.points {
                if a.is_finite() && b.is_finite() {
                    runs.last_mut().unwrap().push(format!("{:.2},{:.2}", f.px(a), f.py(b)));
                } else if !runs.last().unwrap().is_empty() {
                    runs.push(Vec::new());
                }
            }
            for run in runs.iter().filter(|r| !r.is_empty()) {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{c}" stroke-width="1.3" points="{}"/>"#,
                    run.join(" ")
                );
            }
        }
    }
    out.push_str("</g>\n");
    let labelled: Vec<_> = series.iter().enumerate().filter(|(_, s)| !s.label.is_empty()).collect();
    if labelled.len() <= 12 {
        for (row, (i, s)) in labelled.into_iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * row as f64;
            let x = LEFT + w - 150.0;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="12" height="4" fill="{}"/><text x="{:.2}" y="{y:.2}">{}</text>"#,
                y - 5.0,
                color(i),
                x + 18.0,
                esc(&s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Piecewise-linear approximation of the viridis colormap.
fn viridis(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        c[k] = (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8;
    }
    c
}

fn png_data_uri(rgb: &[u8], cols: usize, rows: usize) -> String {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, cols as u32, rows as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("png header");
        w.write_image_data(rgb).expect("png data");
    }
    format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(buf)
    )
}

/// Heatmap of `values[row][col]`, row 0 at the top of `y_range`.
///
/// Non-finite values are drawn in grey. Large inputs are reduced by block
/// maximum to at most 512 pixels per side.
pub fn raster(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    x_range: (f64, f64),
    y_range: (f64, f64),
    values: &[Vec<f64>],
    value_label: &str,
) -> String {
    let rows_in = values.len().max(1);
    let cols_in = values.first().map_or(1, |r| r.len()).max(1);
    let (br, bc) = (rows_in.div_ceil(512), cols_in.div_ceil(512));
    let (rows, cols) = (rows_in.div_ceil(br), cols_in.div_ceil(bc));
    let mut grid = vec![f64::NAN; rows * cols];
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let cell = &mut grid[(i / br) * cols + j / bc];
            if v.is_finite() && !(*cell >= v) {
                *cell = v;
            }
        }
    }
    let (lo, hi) = bounds(grid.iter());
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut rgb = Vec::with_capacity(3 * rows * cols);
    for &v in &grid {
        if v.is_finite() {
            rgb.extend_from_slice(&viridis((v - lo) / span));
        } else {
            rgb.extend_from_slice(&[160, 160, 160]);
        }
    }
    let bar = 70.0;
    let f = Frame {
        x: x_range,
        y: y_range,
        w: W - LEFT - RIGHT - bar,
        h: H - TOP - BOTTOM,
    };
    let mut out = String::new();
    open(&mut out, W, H, title);
    let _ = writeln!(
        out,
        r#"<image x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" preserveAspectRatio="none" style="image-rendering:pixelated" href="{}"/>"#,
        f.w,
        f.h,
        png_data_uri(&rgb, cols, rows)
    );
    axes(&mut out, &f, xlabel, ylabel);
    // colour bar
    let bx = LEFT + f.w + 18.0;
    let steps = 32;
    for k in 0..steps {
        let t = 1.0 - k as f64 / (steps - 1) as f64;
        let [r, g, b] = viridis(t);
        let _ = writeln!(
            out,
            r#"<rect x="{bx:.2}" y="{:.2}" width="14" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
            TOP + k as f64 * f.h / steps as f64,
            f.h / steps as f64 + 0.5
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">{}</text><text x="{:.2}" y="{:.2}">{}</text><text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
        bx + 18.0,
        TOP + 10.0,
        fmt_tick(hi),
        bx + 18.0,
        TOP + f.h,
        fmt_tick(lo),
        bx - 4.0,
        TOP + f.h + 20.0,
        esc(value_label)
    );
    out.push_str("</svg>\n");
    out
}

/// Plain table; long tables are cut after `max_rows` with a note.
pub fn table(title: &str, header: &[&str], rows: &[Vec<String>], max_rows: usize) -> String {
    let cw = 96.0;
    let rh = 18.0;
    let shown = rows.len().min(max_rows);
    let width = (header.len() as f64 * cw + 20.0).max(320.0);
    let height = TOP + rh * (shown as f64 + 2.5) + 10.0;
    let mut out = String::new();
    open(&mut out, width, height, title);
    let row = |out: &mut String, y: f64, cells: &mut dyn Iterator<Item = String>, weight: &str| {
        for (k, c) in cells.enumerate() {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{y:.2}" text-anchor="end" font-family="monospace" font-size="11"{weight}>{}</text>"#,
                10.0 + (k + 1) as f64 * cw - 6.0,
                esc(&c)
            );
        }
    };
    row(&mut out, TOP + rh, &mut header.iter().map(|s| s.to_string()), r#" font-weight="bold""#);
    let _ = writeln!(
        out,
        r##"<line x1="10" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"/>"##,
        TOP + rh + 5.0,
        width - 10.0,
        TOP + rh + 5.0
    );
    for (i, r) in rows.iter().take(shown).enumerate() {
        row(&mut out, TOP + rh * (i as f64 + 2.0), &mut r.iter().cloned(), "");
    }
    if rows.len() > shown {
        let _ = writeln!(
            out,
            r#"<text x="10" y="{:.2}" font-size="11">… {} more rows in the CSV table</text>"#,
            TOP + rh * (shown as f64 + 2.0),
            rows.len() - shown
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let t = ticks(-0.3, 2.2);
        assert_eq!(t.first().copied(), Some(0.0));
        assert!(t.len() >= 3 && t.len() <= 8);
        assert!(t.iter().all(|&v| (-0.3..=2.2).contains(&v)));
        assert_eq!(fmt_tick(0.5), "0.5");
        assert_eq!(fmt_tick(2.0), "2");
    }

    #[test]
    fn figures_are_deterministic_and_well_formed() {
        let s = vec![Series::line("a<b", vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)])];
        let a = plot("t", "x", "y", &s, false);
        assert_eq!(a, plot("t", "x", "y", &s, false));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a&lt;b"));
        let r = raster("r", "x", "y", (0.0, 1.0), (0.0, 1.0), &[vec![0.0, 1.0], vec![f64::NAN, 2.0]], "v");
        assert!(r.contains("data:image/png;base64,"));
        let tb = table("t", &["a", "b"], &vec![vec!["1".to_string(), "2".to_string()]; 5], 3);
        assert!(tb.contains("2 more rows"));
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(viridis(0.0), [68, 1, 84]);
        assert_eq!(viridis(1.0), [253, 231, 37]);
        assert_eq!(viridis(f64::NAN), [68, 1, 84]);
    }
}
