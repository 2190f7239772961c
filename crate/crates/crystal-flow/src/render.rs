//! Deterministic SVG snapshots of evolving shapes: fixed-precision
//! coordinates, no timestamps, so identical input yields identical bytes.

use std::fmt::Write as _;

use crate::geometry::Point;

/// Renders closed polylines into a standalone SVG document. The viewport is
/// the given world box with a small margin; the y axis points up.
pub fn render_svg(polylines: &[Vec<Point>], world: (Point, Point)) -> String {
    let (lo, hi) = world;
    let w = (hi.x - lo.x).max(1e-9);
    let h = (hi.y - lo.y).max(1e-9);
    let margin = 0.05 * w.max(h);
    let vx = lo.x - margin;
    let vy = -(hi.y + margin);
    let vw = w + 2.0 * margin;
    let vh = h + 2.0 * margin;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{vx:.6} {vy:.6} {vw:.6} {vh:.6}\" width=\"640\" height=\"640\">"
    );
    let _ = writeln!(
        out,
        "<rect x=\"{vx:.6}\" y=\"{vy:.6}\" width=\"{vw:.6}\" height=\"{vh:.6}\" fill=\"white\"/>"
    );
    for poly in polylines {
        if poly.is_empty() {
            continue;
        }
        out.push_str("<polygon points=\"");
        for (i, p) in poly.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.6},{:.6}", p.x, -p.y);
        }
        let _ = writeln!(
            out,
            "\" fill=\"none\" stroke=\"black\" stroke-width=\"{:.6}\"/>",
            0.004 * vw
        );
    }
    out.push_str("</svg>\n");
    out
}
