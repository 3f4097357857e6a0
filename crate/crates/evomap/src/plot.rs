//! Minimal SVG scatter rendering for embeddings.
//!
//! Output is deliberately plain: one fixed-size canvas, one circle per row,
//! colors keyed by label. Low-complexity expressions often collapse many rows
//! onto a line or a handful of points, so those plots get a small seeded
//! jitter to make the point mass visible; the seed is a constant, so renders
//! stay byte-identical across runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WIDTH: u32 = 640;
pub const HEIGHT: u32 = 640;
const MARGIN: f64 = 40.0;
const POINT_RADIUS: f64 = 4.0;
const UNLABELED_COLOR: &str = "#808080";

/// Jitter is only cosmetic, so it is quarantined behind a fixed seed rather
/// than the run seed: the same front entry always renders the same pixels.
const JITTER_SEED: u64 = 0x706c_6f74;
const JITTER_FRACTION: f64 = 0.01;
pub const JITTER_COMPLEXITY_LIMIT: usize = 20;

/// Whether a front entry of this complexity should be rendered with jitter.
pub fn jitter_for_complexity(complexity: usize) -> bool {
    complexity < JITTER_COMPLEXITY_LIMIT
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Evenly spaced hues for `k` sorted distinct labels.
fn palette(k: usize) -> Vec<String> {
    (0..k)
        .map(|i| format!("hsl({}, 70%, 45%)", 360 * i / k.max(1)))
        .collect()
}

fn axis_bounds(points: &[[f64; 2]], axis: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        lo = lo.min(p[axis]);
        hi = hi.max(p[axis]);
    }
    if points.is_empty() {
        return (0.0, 1.0);
    }
    if lo == hi {
        // degenerate axis: widen around the single value so the divide below
        // stays finite and the points land mid-canvas
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Renders a labelled 2-D scatter as a standalone SVG document.
///
/// `labels`, when present, must be one string per point; colors are assigned
/// by sorted distinct label so the same label set always maps to the same
/// hues. Without labels every point is grey.
pub fn render_scatter(
    points: &[[f64; 2]],
    labels: Option<&[String]>,
    title: &str,
    jitter: bool,
) -> String {
    let (x_lo, x_hi) = axis_bounds(points, 0);
    let (y_lo, y_hi) = axis_bounds(points, 1);
    let x_range = x_hi - x_lo;
    let y_range = y_hi - y_lo;

    let jittered: Vec<[f64; 2]> = if jitter {
        let mut rng = ChaCha8Rng::seed_from_u64(JITTER_SEED);
        points
            .iter()
            .map(|p| {
                let dx = rng.gen_range(-JITTER_FRACTION..=JITTER_FRACTION) * x_range;
                let dy = rng.gen_range(-JITTER_FRACTION..=JITTER_FRACTION) * y_range;
                [p[0] + dx, p[1] + dy]
            })
            .collect()
    } else {
        points.to_vec()
    };

    let color_of: Vec<String> = match labels {
        Some(ls) => {
            let mut distinct: Vec<&String> = ls.iter().collect();
            distinct.sort();
            distinct.dedup();
            let colors = palette(distinct.len());
            ls.iter()
                .map(|l| {
                    let k = distinct.binary_search(&l).expect("label in distinct set");
                    colors[k].clone()
                })
                .collect()
        }
        None => vec![UNLABELED_COLOR.to_string(); points.len()],
    };

    let span_x = f64::from(WIDTH) - 2.0 * MARGIN;
    let span_y = f64::from(HEIGHT) - 2.0 * MARGIN;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2,
        escape_xml(title)
    ));
    for (p, color) in jittered.iter().zip(&color_of) {
        // SVG y grows downward, so the vertical axis is flipped
        let cx = MARGIN + (p[0] - x_lo) / x_range.max(f64::MIN_POSITIVE) * span_x;
        let cy =
            f64::from(HEIGHT) - MARGIN - (p[1] - y_lo) / y_range.max(f64::MIN_POSITIVE) * span_y;
        svg.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{POINT_RADIUS}\" fill=\"{color}\" \
             fill-opacity=\"0.85\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points(n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| [i as f64 * 0.3, (i * i % 7) as f64])
            .collect()
    }

    #[test]
    fn one_circle_per_point() {
        let pts = grid_points(23);
        let svg = render_scatter(&pts, None, "t", false);
        assert_eq!(svg.matches("<circle").count(), 23);
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn unlabeled_points_are_grey() {
        let svg = render_scatter(&grid_points(5), None, "t", false);
        assert_eq!(svg.matches(UNLABELED_COLOR).count(), 5);
    }

    #[test]
    fn labels_map_to_stable_distinct_colors() {
        let pts = grid_points(6);
        let labels: Vec<String> = ["b", "a", "c", "a", "b", "c"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let svg = render_scatter(&pts, Some(&labels), "t", false);
        // three distinct hues, two circles each
        assert_eq!(svg.matches("hsl(0, 70%, 45%)").count(), 2);
        assert_eq!(svg.matches("hsl(120, 70%, 45%)").count(), 2);
        assert_eq!(svg.matches("hsl(240, 70%, 45%)").count(), 2);
        // label order in the input must not change the hue assignment
        let swapped: Vec<String> = ["c", "a", "b", "a", "c", "b"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let svg2 = render_scatter(&pts, Some(&swapped), "t", false);
        assert_eq!(svg2.matches("hsl(0, 70%, 45%)").count(), 2);
    }

    #[test]
    fn jitter_is_deterministic_and_off_by_default_path() {
        let pts = grid_points(40);
        let plain_a = render_scatter(&pts, None, "t", false);
        let plain_b = render_scatter(&pts, None, "t", false);
        assert_eq!(plain_a, plain_b);
        let jit_a = render_scatter(&pts, None, "t", true);
        let jit_b = render_scatter(&pts, None, "t", true);
        assert_eq!(jit_a, jit_b);
        assert_ne!(plain_a, jit_a);
    }

    #[test]
    fn degenerate_axes_render_finite_coordinates() {
        let pts = vec![[2.5, -1.0]; 9];
        let svg = render_scatter(&pts, None, "t", false);
        assert_eq!(svg.matches("<circle").count(), 9);
        assert!(!svg.contains("NaN"));
        assert!(!svg.contains("inf"));
    }

    #[test]
    fn empty_input_is_a_valid_document() {
        let svg = render_scatter(&[], None, "empty", true);
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn title_is_escaped() {
        let svg = render_scatter(&grid_points(2), None, "cost<1 & \"x\"", false);
        assert!(svg.contains("cost&lt;1 &amp; &quot;x&quot;"));
        assert!(!svg.contains("cost<1"));
    }

    #[test]
    fn complexity_threshold_drives_jitter() {
        assert!(jitter_for_complexity(2));
        assert!(jitter_for_complexity(19));
        assert!(!jitter_for_complexity(20));
        assert!(!jitter_for_complexity(500));
    }
}
