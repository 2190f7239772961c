//! Offset representation of a polyrectangle: each edge carries a fixed
//! coordinate (its offset) that translates under the flow, while the
//! combinatorics (axes, normal signs, convexity factors) stay constant
//! between events.

use crate::calibrate::HorizontalEdge;
use crate::geometry::{Axis, GeometryError, Point, Polyrectangle};

#[derive(Clone, Debug)]
pub struct FacetChain {
    pub axes: Vec<Axis>,
    pub normal_signs: Vec<i8>,
    pub offsets: Vec<f64>,
    pub chis: Vec<i8>,
    /// Orientation of `offsets[next] - offsets[prev]` at construction time;
    /// a signed length crossing zero marks an edge collapse even when a step
    /// overshoots the collapse time.
    pub length_signs: Vec<f64>,
}

impl FacetChain {
    pub fn from_poly(p: &Polyrectangle) -> Self {
        let edges = p.edges();
        let offsets: Vec<f64> = edges.iter().map(|e| e.offset()).collect();
        let n = offsets.len();
        let length_signs = (0..n)
            .map(|i| {
                let d = offsets[(i + 1) % n] - offsets[(i + n - 1) % n];
                if d >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        FacetChain {
            axes: edges.iter().map(|e| e.axis).collect(),
            normal_signs: edges.iter().map(|e| e.normal_sign).collect(),
            offsets,
            chis: edges.iter().map(|e| e.chi).collect(),
            length_signs,
        }
    }

    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }

    fn prev(&self, i: usize) -> usize {
        (i + self.len() - 1) % self.len()
    }

    fn next(&self, i: usize) -> usize {
        (i + 1) % self.len()
    }

    /// Endpoint abscissas (along the edge's axis), sorted.
    pub fn endpoints(&self, i: usize) -> (f64, f64) {
        let a = self.offsets[self.prev(i)];
        let b = self.offsets[self.next(i)];
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn length(&self, i: usize) -> f64 {
        let (a, b) = self.endpoints(i);
        b - a
    }

    /// Shared vertex-field first component for flat horizontal edges: the
    /// normal sign of either adjacent vertical edge (they agree when chi = 0).
    pub fn n0(&self, i: usize) -> i8 {
        self.normal_signs[self.prev(i)]
    }

    pub fn horizontal_edge(&self, i: usize) -> HorizontalEdge {
        debug_assert_eq!(self.axes[i], Axis::Horizontal);
        let (p, q) = self.endpoints(i);
        HorizontalEdge {
            p,
            q,
            chi: self.chis[i],
            n0: self.n0(i),
        }
    }

    /// Rebuilds the polygon; normalization merges any zero-length edges, so a
    /// round trip performs edge vanishing and recomposition.
    pub fn to_poly(&self) -> Result<Polyrectangle, GeometryError> {
        let n = self.len();
        let mut vertices = Vec::with_capacity(n);
        for i in 0..n {
            let j = self.next(i);
            let (x, y) = match self.axes[i] {
                Axis::Horizontal => (self.offsets[j], self.offsets[i]),
                Axis::Vertical => (self.offsets[i], self.offsets[j]),
            };
            vertices.push(Point::new(x, y));
        }
        Polyrectangle::new(vertices)
    }

    /// Edge length with the construction-time orientation: goes negative if
    /// the edge has collapsed and inverted since the chain was built.
    pub fn signed_length(&self, i: usize) -> f64 {
        self.length_signs[i] * (self.offsets[self.next(i)] - self.offsets[self.prev(i)])
    }

    /// Smallest edge length in the chain.
    pub fn min_length(&self) -> f64 {
        (0..self.len())
            .map(|i| self.length(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest signed edge length; negative once any edge has inverted.
    pub fn signed_min(&self) -> f64 {
        (0..self.len())
            .map(|i| self.signed_length(i))
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn round_trip_rectangle() {
        let p = Polyrectangle::rectangle(-1.0, 2.0, 0.5, 1.5);
        let fc = FacetChain::from_poly(&p);
        assert_eq!(fc.len(), 4);
        let back = fc.to_poly().unwrap();
        assert_eq!(p, back);
        for i in 0..4 {
            match fc.axes[i] {
                Axis::Horizontal => assert_relative_eq!(fc.length(i), 3.0),
                Axis::Vertical => assert_relative_eq!(fc.length(i), 1.0),
            }
        }
    }

    #[test]
    fn offsets_translate_consistently() {
        let p = Polyrectangle::rectangle(0.0, 2.0, 0.0, 1.0);
        let mut fc = FacetChain::from_poly(&p);
        // Move every edge outward by 0.5: offsets shift by normal sign * 0.5.
        for i in 0..fc.len() {
            fc.offsets[i] += fc.normal_signs[i] as f64 * 0.5;
        }
        let grown = fc.to_poly().unwrap();
        assert_eq!(grown, Polyrectangle::rectangle(-0.5, 2.5, -0.5, 1.5));
    }

    #[test]
    fn zero_length_edge_merged_on_round_trip() {
        let p = Polyrectangle::new(
            [
                (0.0, 2.0),
                (1.0, 2.0),
                (1.0, 1.0),
                (2.0, 1.0),
                (2.0, 0.0),
                (0.0, 0.0),
            ]
            .iter()
            .map(|&(x, y)| Point::new(x, y))
            .collect(),
        )
        .unwrap();
        let mut fc = FacetChain::from_poly(&p);
        // Collapse the notch: raise the lower horizontal run to y = 2.
        for i in 0..fc.len() {
            if fc.axes[i] == Axis::Horizontal && (fc.offsets[i] - 1.0).abs() < 1e-12 {
                fc.offsets[i] = 2.0;
            }
        }
        let merged = fc.to_poly().unwrap();
        assert_eq!(merged, Polyrectangle::rectangle(0.0, 2.0, 0.0, 2.0));
    }
}
