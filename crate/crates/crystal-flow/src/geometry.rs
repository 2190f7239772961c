//! Axis-aligned polygons (polyrectangles): normalization, edge extraction with
//! convexity factors, vertex fields on the Wulff square, and set distances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for merging collinear edges and dropping zero-length ones.
pub const MERGE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point { x: v[0], y: v[1] }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// One maximal axis-aligned boundary segment.
///
/// `p` is the lexicographically smaller endpoint. `normal_sign` is the sign of
/// the nonzero component of the outward normal: for a horizontal edge the
/// normal is `normal_sign * e2`, for a vertical edge `normal_sign * e1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub axis: Axis,
    pub p: Point,
    pub q: Point,
    pub normal_sign: i8,
    /// Convexity factor: +1 both adjacent corners convex, -1 both concave, 0 mixed.
    pub chi: i8,
    /// Shared first component of the vertex field at both endpoints; only
    /// meaningful for horizontal edges with chi == 0.
    pub n0: i8,
}

impl Edge {
    pub fn length(&self) -> f64 {
        match self.axis {
            Axis::Horizontal => self.q.x - self.p.x,
            Axis::Vertical => self.q.y - self.p.y,
        }
    }

    /// The fixed coordinate: y for horizontal edges, x for vertical ones.
    pub fn offset(&self) -> f64 {
        match self.axis {
            Axis::Horizontal => self.p.y,
            Axis::Vertical => self.p.x,
        }
    }

    pub fn outward_normal(&self) -> (f64, f64) {
        match self.axis {
            Axis::Horizontal => (0.0, self.normal_sign as f64),
            Axis::Vertical => (self.normal_sign as f64, 0.0),
        }
    }
}

/// Corner value of the Wulff square at a vertex: (s1, s2) with s1, s2 in {-1, +1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexFieldValue {
    pub s1: i8,
    pub s2: i8,
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("polyrectangle needs at least 4 vertices after normalization, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive vertices must differ in exactly one coordinate: {0:?} -> {1:?}")]
    NotAxisAligned(Point, Point),
    #[error("boundary is self-intersecting")]
    SelfIntersecting,
    #[error("degenerate polyrectangle: {0}")]
    Degenerate(String),
}

/// Closed, simple, axis-aligned polygon stored as a clockwise vertex cycle.
/// The first vertex is not repeated at the end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polyrectangle {
    vertices: Vec<Point>,
}

impl Polyrectangle {
    /// Builds a polyrectangle from a raw vertex cycle, normalizing it.
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        normalize_vertices(vertices).map(|vertices| Polyrectangle { vertices })
    }

    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Polyrectangle::new(vec![
            Point::new(x0, y1),
            Point::new(x1, y1),
            Point::new(x1, y0),
            Point::new(x0, y0),
        ])
        .expect("valid rectangle")
    }

    /// Centered rectangle R(l1, l2) = [-l1/2, l1/2] x [-l2/2, l2/2].
    pub fn centered(l1: f64, l2: f64) -> Self {
        Self::rectangle(-l1 / 2.0, l1 / 2.0, -l2 / 2.0, l2 / 2.0)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> Vec<Edge> {
        edges_of_cycle(&self.vertices)
    }

    pub fn vertex_field(&self) -> Vec<VertexFieldValue> {
        let n = self.vertices.len();
        let edges = self.edges();
        // edge i runs from vertex i to vertex i+1; vertex i adjoins edges i-1 and i.
        (0..n)
            .map(|i| {
                let prev = &edges[(i + n - 1) % n];
                let next = &edges[i];
                let (v_edge, h_edge) = match prev.axis {
                    Axis::Vertical => (prev, next),
                    Axis::Horizontal => (next, prev),
                };
                VertexFieldValue {
                    s1: v_edge.normal_sign,
                    s2: h_edge.normal_sign,
                }
            })
            .collect()
    }

    pub fn area(&self) -> f64 {
        shoelace(&self.vertices).abs()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Polyrectangle {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    /// Mirror through the line x = 0.
    pub fn reflect_x(&self) -> Self {
        let mut v: Vec<Point> = self
            .vertices
            .iter()
            .map(|p| Point::new(-p.x, p.y))
            .collect();
        v.reverse();
        Polyrectangle::new(v).expect("reflection preserves validity")
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Closed-region membership.
    pub fn contains_point(&self, p: Point) -> bool {
        if self.distance_to_boundary(p) <= MERGE_TOL {
            return true;
        }
        point_strictly_inside(&self.vertices, p)
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let n = self.vertices.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            best = best.min(point_segment_distance(p, a, b));
        }
        best
    }

    /// Distance from a point to the closed region (zero inside).
    pub fn distance_to_region(&self, p: Point) -> f64 {
        if point_strictly_inside(&self.vertices, p) {
            0.0
        } else {
            self.distance_to_boundary(p)
        }
    }
}

fn shoelace(v: &[Point]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    s / 2.0
}

fn point_strictly_inside(v: &[Point], p: Point) -> bool {
    // Ray casting along +x with crossing counts on vertical edges.
    let n = v.len();
    let mut inside = false;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * abx + (p.y - a.y) * aby) / len2).clamp(0.0, 1.0)
    };
    let cx = a.x + t * abx;
    let cy = a.y + t * aby;
    ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()
}

fn segment_segment_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> f64 {
    if segments_properly_cross(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

fn segments_properly_cross(a0: Point, a1: Point, b0: Point, b1: Point) -> bool {
    let d1 = cross(b1 - b0, a0 - b0);
    let d2 = cross(b1 - b0, a1 - b0);
    let d3 = cross(a1 - a0, b0 - a0);
    let d4 = cross(a1 - a0, b1 - a0);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

fn normalize_vertices(mut v: Vec<Point>) -> Result<Vec<Point>, GeometryError> {
    if v.len() < 3 {
        return Err(GeometryError::TooFewVertices(v.len()));
    }
    // Drop a repeated closing vertex if present.
    if v.len() > 1 {
        let first = v[0];
        let last = *v.last().unwrap();
        if (first.x - last.x).abs() <= MERGE_TOL && (first.y - last.y).abs() <= MERGE_TOL {
            v.pop();
        }
    }
    // Repeatedly drop duplicate neighbors and merge collinear runs.
    loop {
        let n = v.len();
        if n < 4 {
            return Err(GeometryError::TooFewVertices(n));
        }
        let mut changed = false;
        let mut out: Vec<Point> = Vec::with_capacity(n);
        for i in 0..n {
            let prev = v[(i + n - 1) % n];
            let cur = v[i];
            let next = v[(i + 1) % n];
            if (cur.x - next.x).abs() <= MERGE_TOL && (cur.y - next.y).abs() <= MERGE_TOL {
                changed = true;
                continue; // zero-length edge: drop this vertex
            }
            let a_horiz = (prev.y - cur.y).abs() <= MERGE_TOL;
            let b_horiz = (cur.y - next.y).abs() <= MERGE_TOL;
            let a_vert = (prev.x - cur.x).abs() <= MERGE_TOL;
            let b_vert = (cur.x - next.x).abs() <= MERGE_TOL;
            if (a_horiz && b_horiz) || (a_vert && b_vert) {
                // Collinear (or backtracking; backtracking is caught by the
                // simplicity check below once merged).
                let forward = if a_horiz {
                    (cur.x - prev.x) * (next.x - cur.x) > 0.0
                } else {
                    (cur.y - prev.y) * (next.y - cur.y) > 0.0
                };
                if forward {
                    changed = true;
                    continue; // interior point of a straight run
                }
            }
            out.push(cur);
        }
        v = out;
        if !changed {
            break;
        }
    }
    if v.len() < 4 {
        return Err(GeometryError::TooFewVertices(v.len()));
    }
    // Axis alignment of every remaining move.
    let n = v.len();
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        let dx = (a.x - b.x).abs() > MERGE_TOL;
        let dy = (a.y - b.y).abs() > MERGE_TOL;
        if dx == dy {
            return Err(GeometryError::NotAxisAligned(a, b));
        }
    }
    if !n.is_multiple_of(2) {
        return Err(GeometryError::Degenerate(format!(
            "odd vertex count {n} cannot alternate horizontal/vertical moves"
        )));
    }
    // Enforce clockwise orientation (negative shoelace).
    if shoelace(&v) > 0.0 {
        v.reverse();
    }
    // Simplicity: no two non-adjacent edges may intersect or touch.
    for i in 0..n {
        let a0 = v[i];
        let a1 = v[(i + 1) % n];
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let b0 = v[j];
            let b1 = v[(j + 1) % n];
            if segment_segment_distance(a0, a1, b0, b1) <= MERGE_TOL {
                return Err(GeometryError::SelfIntersecting);
            }
        }
    }
    // Canonical start: lexicographically smallest vertex.
    let start = (0..n)
        .min_by(|&i, &j| {
            (v[i].x, v[i].y)
                .partial_cmp(&(v[j].x, v[j].y))
                .unwrap()
        })
        .unwrap();
    v.rotate_left(start);
    Ok(v)
}

fn edges_of_cycle(v: &[Point]) -> Vec<Edge> {
    let n = v.len();
    // Convexity of each vertex: right turn (negative cross) is convex for a
    // clockwise cycle.
    let convex: Vec<bool> = (0..n)
        .map(|i| {
            let prev = v[(i + n - 1) % n];
            let cur = v[i];
            let next = v[(i + 1) % n];
            cross(cur - prev, next - cur) < 0.0
        })
        .collect();
    let mut edges: Vec<Edge> = (0..n)
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            let horizontal = (a.y - b.y).abs() <= MERGE_TOL;
            let (axis, normal_sign) = if horizontal {
                // outward normal = ccw rotation of the travel direction
                let s = if b.x > a.x { 1 } else { -1 };
                (Axis::Horizontal, s)
            } else {
                let s = if b.y > a.y { -1 } else { 1 };
                (Axis::Vertical, s)
            };
            let (p, q) = if (a.x, a.y) <= (b.x, b.y) { (a, b) } else { (b, a) };
            let chi = match (convex[i], convex[(i + 1) % n]) {
                (true, true) => 1,
                (false, false) => -1,
                _ => 0,
            };
            Edge {
                axis,
                p,
                q,
                normal_sign,
                chi,
                n0: 0,
            }
        })
        .collect();
    // n0 for chi = 0 horizontal edges: the shared first component of the vertex
    // field, i.e. the normal sign of either adjacent vertical edge.
    for i in 0..n {
        if edges[i].axis == Axis::Horizontal && edges[i].chi == 0 {
            let prev = (i + n - 1) % n;
            edges[i].n0 = edges[prev].normal_sign;
        }
    }
    edges
}

/// Hausdorff distance between the closed regions bounded by two polyrectangles.
///
/// The sup over each boundary is taken on a candidate set (vertices, the other
/// polygon's coordinate breakpoints, and a Lipschitz-dense sampling), which is
/// exact for rectangle-against-rectangle configurations and accurate to half
/// the sampling step in general.
pub fn hausdorff_distance(a: &Polyrectangle, b: &Polyrectangle) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

fn directed_hausdorff(a: &Polyrectangle, b: &Polyrectangle) -> f64 {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for p in b.vertices() {
        xs.push(p.x);
        ys.push(p.y);
    }
    let mut best: f64 = 0.0;
    for e in a.edges() {
        let samples = sample_edge(&e, &xs, &ys);
        for s in samples {
            best = best.max(b.distance_to_region(s));
        }
    }
    best
}

fn sample_edge(e: &Edge, xs: &[f64], ys: &[f64]) -> Vec<Point> {
    let mut ts: Vec<f64> = vec![];
    let (lo, hi, fixed) = match e.axis {
        Axis::Horizontal => (e.p.x, e.q.x, e.p.y),
        Axis::Vertical => (e.p.y, e.q.y, e.p.x),
    };
    ts.push(lo);
    ts.push(hi);
    let breaks = match e.axis {
        Axis::Horizontal => xs,
        Axis::Vertical => ys,
    };
    for &c in breaks {
        if c > lo && c < hi {
            ts.push(c);
        }
    }
    let n_uniform = (((hi - lo) / 0.01).ceil() as usize).clamp(8, 512);
    for k in 1..n_uniform {
        ts.push(lo + (hi - lo) * k as f64 / n_uniform as f64);
    }
    ts.iter()
        .map(|&t| match e.axis {
            Axis::Horizontal => Point::new(t, fixed),
            Axis::Vertical => Point::new(fixed, t),
        })
        .collect()
}

/// True iff region(b) is contained in region(a) (closed regions; touching
/// boundaries count as contained).
pub fn contains(a: &Polyrectangle, b: &Polyrectangle) -> bool {
    for &p in b.vertices() {
        if !a.contains_point(p) {
            return false;
        }
    }
    let av = a.vertices();
    let bv = b.vertices();
    for i in 0..bv.len() {
        let b0 = bv[i];
        let b1 = bv[(i + 1) % bv.len()];
        for j in 0..av.len() {
            let a0 = av[j];
            let a1 = av[(j + 1) % av.len()];
            if segments_properly_cross(a0, a1, b0, b1) {
                return false;
            }
        }
    }
    true
}

/// Minimum distance between the two boundaries.
pub fn boundary_gap(a: &Polyrectangle, b: &Polyrectangle) -> f64 {
    let av = a.vertices();
    let bv = b.vertices();
    let mut best = f64::INFINITY;
    for i in 0..av.len() {
        let a0 = av[i];
        let a1 = av[(i + 1) % av.len()];
        for j in 0..bv.len() {
            let b0 = bv[j];
            let b1 = bv[(j + 1) % bv.len()];
            best = best.min(segment_segment_distance(a0, a1, b0, b1));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn redundant_midpoint_merged() {
        let p = Polyrectangle::new(pts(&[
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (2.0, 1.0),
            (0.0, 1.0),
        ]))
        .unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert_eq!(p, Polyrectangle::rectangle(0.0, 2.0, 0.0, 1.0));
    }

    #[test]
    fn counterclockwise_fixed_to_clockwise() {
        let ccw = Polyrectangle::new(pts(&[
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
        ]))
        .unwrap();
        let cw = Polyrectangle::rectangle(0.0, 1.0, 0.0, 1.0);
        assert_eq!(ccw, cw);
        assert!(shoelace(ccw.vertices()) < 0.0);
    }

    #[test]
    fn bowtie_rejected() {
        let r = Polyrectangle::new(pts(&[
            (0.0, 0.0),
            (1.0, 1.0),
            (1.0, 0.0),
            (0.0, 1.0),
        ]));
        assert!(r.is_err());
    }

    #[test]
    fn square_edges_all_convex() {
        let p = Polyrectangle::rectangle(0.0, 2.0, 0.0, 2.0);
        let edges = p.edges();
        assert_eq!(edges.len(), 4);
        for e in &edges {
            assert_eq!(e.chi, 1);
            assert_relative_eq!(e.length(), 2.0);
        }
    }

    #[test]
    fn rectangle_4x2_edges() {
        let p = Polyrectangle::rectangle(0.0, 4.0, 0.0, 2.0);
        for e in p.edges() {
            assert_eq!(e.chi, 1);
            match e.axis {
                Axis::Horizontal => assert_relative_eq!(e.length(), 4.0),
                Axis::Vertical => assert_relative_eq!(e.length(), 2.0),
            }
        }
    }

    // L-shape used in several tests:
    //   (0,2)----(1,2)
    //     |        |
    //     |      (1,1)----(2,1)
    //     |                 |
    //   (0,0)-------------(2,0)
    fn l_shape() -> Polyrectangle {
        Polyrectangle::new(pts(&[
            (0.0, 2.0),
            (1.0, 2.0),
            (1.0, 1.0),
            (2.0, 1.0),
            (2.0, 0.0),
            (0.0, 0.0),
        ]))
        .unwrap()
    }

    #[test]
    fn l_shape_chi_enumeration() {
        // Corner enumeration by cross-product sign: the vertex (1,1) is the
        // unique concave corner, so exactly the two edges adjacent to it get
        // chi = 0 and every other edge keeps chi = +1.
        let p = l_shape();
        let edges = p.edges();
        assert_eq!(edges.len(), 6);
        let zeros = edges.iter().filter(|e| e.chi == 0).count();
        let ones = edges.iter().filter(|e| e.chi == 1).count();
        assert_eq!(zeros, 2);
        assert_eq!(ones, 4);
        assert_eq!(edges.iter().filter(|e| e.chi == -1).count(), 0);
        // The chi = 0 horizontal edge is the notch bottom at y = 1.
        let h0 = edges
            .iter()
            .find(|e| e.axis == Axis::Horizontal && e.chi == 0)
            .unwrap();
        assert_relative_eq!(h0.offset(), 1.0);
    }

    #[test]
    fn rectangle_vertex_field_corners() {
        // Clockwise from the upper-left corner P1: (-1,1), (1,1), (1,-1), (-1,-1).
        let p = Polyrectangle::rectangle(0.0, 4.0, 0.0, 2.0);
        let verts = p.vertices();
        let vf = p.vertex_field();
        for (v, f) in verts.iter().zip(vf.iter()) {
            let want_s1 = if v.x > 2.0 { 1 } else { -1 };
            let want_s2 = if v.y > 1.0 { 1 } else { -1 };
            assert_eq!((f.s1, f.s2), (want_s1, want_s2), "vertex {v:?}");
        }
    }

    #[test]
    fn l_shape_concave_vertex_field() {
        // In the mirrored L the concave corner sits at (-1,1) with adjacent
        // vertical-edge normal -e1 and horizontal-edge normal +e2, giving (-1, 1).
        let p = l_shape().reflect_x();
        let idx = p
            .vertices()
            .iter()
            .position(|v| (v.x + 1.0).abs() < 1e-12 && (v.y - 1.0).abs() < 1e-12)
            .unwrap();
        let vf = p.vertex_field();
        assert_eq!(vf[idx], VertexFieldValue { s1: -1, s2: 1 });
    }

    #[test]
    fn hausdorff_examples() {
        let a = Polyrectangle::rectangle(0.0, 1.0, 0.0, 1.0);
        assert_relative_eq!(hausdorff_distance(&a, &a), 0.0);
        let shifted = a.translate(0.3, 0.0);
        assert_relative_eq!(hausdorff_distance(&a, &shifted), 0.3, epsilon = 1e-12);
        let big = Polyrectangle::centered(2.0, 2.0);
        let small = Polyrectangle::centered(1.0, 1.0);
        assert_relative_eq!(hausdorff_distance(&big, &small), 0.5 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn contains_and_gap_examples() {
        let big = Polyrectangle::centered(2.0, 2.0);
        let small = Polyrectangle::centered(1.0, 1.0);
        assert!(contains(&big, &small));
        assert!(!contains(&small, &big));
        assert_relative_eq!(boundary_gap(&big, &small), 0.5, epsilon = 1e-12);

        let a = Polyrectangle::rectangle(0.0, 1.0, 0.0, 1.0);
        let b = Polyrectangle::rectangle(3.0, 4.0, 0.0, 1.0);
        assert!(!contains(&a, &b));

        let outer = Polyrectangle::centered(6.0, 6.0);
        let inner = Polyrectangle::centered(4.0, 2.0);
        assert!(contains(&outer, &inner));
        assert_relative_eq!(boundary_gap(&outer, &inner), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn serialization_round_trip() {
        let p = l_shape();
        let json = serde_json::to_string(&p).unwrap();
        // JSON array of [x, y] pairs, first vertex not repeated.
        assert!(json.starts_with("[["));
        let q: Vec<Point> = serde_json::from_str(&json).unwrap();
        assert_eq!(q.len(), 6);
        let back = Polyrectangle::new(q).unwrap();
        assert_eq!(p, back);
    }
}
