//! Eigenvalue scatter plots as self-contained SVG.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;

/// Index against eigenvalue, a dashed guide at 1.0 and, when given, the
/// detected cluster count. Output depends only on the arguments.
pub fn eigen_plot_svg(eigenvalues: &[f64], k: Option<usize>, title: &str) -> Result<String> {
    if eigenvalues.is_empty() {
        return Err(CliError::Usage("cannot plot an empty spectrum".into()));
    }
    let n = eigenvalues.len();
    let lo = eigenvalues.iter().copied().fold(0.0f64, f64::min).floor();
    let hi = 1.1f64.max(eigenvalues.iter().copied().fold(f64::MIN, f64::max));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |i: usize| LEFT + plot_w * (i as f64 - 0.5) / n as f64;
    let y = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, yb) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2} {TOP:.2} V{yb:.2} H{x1:.2}" fill="none" stroke="black"/>"#
    );
    for tick in [lo, 0.0, 0.5, 1.0] {
        if tick < lo || tick > hi {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{tick:.1}</text>"#,
            LEFT - 6.0,
            y(tick) + 4.0
        );
    }
    let step = (n / 10).max(1);
    for i in (1..=n).filter(|i| *i == 1 || i % step == 0) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{i}</text>"#,
            x(i),
            yb + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">index</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 6.0
    );
    let _ = writeln!(
        s,
        r##"<line class="guide" x1="{x0:.2}" y1="{g:.2}" x2="{x1:.2}" y2="{g:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        g = y(1.0)
    );
    for (i, v) in eigenvalues.iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<circle class="eig" cx="{:.2}" cy="{:.2}" r="3" fill="#1f4e9c"><title>{} {:.6}</title></circle>"##,
            x(i + 1),
            y(*v),
            i + 1,
            v
        );
    }
    if let Some(k) = k {
        let _ = writeln!(
            s,
            r#"<text class="k" x="{:.2}" y="{:.2}" text-anchor="end">k = {k}</text>"#,
            WIDTH - RIGHT,
            TOP - 8.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn emit_eigen_plot(
    eigenvalues: &[f64],
    k: Option<usize>,
    title: &str,
    path: &Path,
) -> Result<()> {
    let svg = eigen_plot_svg(eigenvalues, k, title)?;
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_counts() {
        let svg = eigen_plot_svg(&[1.0, 0.99, 0.97, 0.2, 0.1], Some(3), "t").unwrap();
        assert_eq!(svg.matches("<circle").count(), 5);
        assert_eq!(svg.matches("<line").count(), 1);
        assert!(svg.contains("k = 3"));
    }

    #[test]
    fn empty_is_error() {
        assert!(eigen_plot_svg(&[], None, "t").is_err());
    }

    #[test]
    fn deterministic() {
        let e = [1.0, 0.5, -0.25];
        assert_eq!(
            eigen_plot_svg(&e, None, "a<b").unwrap(),
            eigen_plot_svg(&e, None, "a<b").unwrap()
        );
        assert!(eigen_plot_svg(&e, None, "a<b").unwrap().contains("a&lt;b"));
    }
}
