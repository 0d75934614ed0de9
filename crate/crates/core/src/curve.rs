//! Closed piecewise-affine curves and the fields living on them.
//!
//! A [`PolyCurve`] with `n` nodes is the P1 interpolant of its node list on the
//! parameter circle `[0, 1)`, node `j` sitting at `s = j / n`. Indexing is
//! cyclic everywhere: node `n` is node `0`. On segment `i` the derivative is the
//! constant `n * (node[i+1] - node[i])`.

use crate::error::{Error, Result};
use crate::Vec2;

/// `sqrt(|x|^2 + eps^2)`, the smoothed Euclidean norm.
#[inline]
pub fn smoothed_norm(x: Vec2, eps: f64) -> f64 {
    (x.norm_squared() + eps * eps).sqrt()
}

/// `(x, y) -> (-y, x)`.
#[inline]
pub fn perp(x: Vec2) -> Vec2 {
    Vec2::new(-x.y, x.x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyCurve {
    nodes: Vec<Vec2>,
}

/// Outcome of [`PolyCurve::validate_immersion`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImmersionCheck {
    pub valid: bool,
    /// First segment whose discrete speed is at or below the threshold.
    pub first_violation: Option<usize>,
}

/// Unit tangent and unit normal of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub tangent: Vec2,
    pub normal: Vec2,
}

impl PolyCurve {
    /// Builds a curve from at least three finite nodes. Chord positivity is
    /// not enforced here; see [`PolyCurve::validate_immersion`].
    pub fn new(nodes: Vec<Vec2>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::TooFewNodes(nodes.len()));
        }
        if let Some(i) = nodes.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { nodes })
    }

    /// Like [`PolyCurve::new`] but also rejects curves failing the immersion
    /// check at the default threshold.
    pub fn new_immersed(nodes: Vec<Vec2>) -> Result<Self> {
        let curve = Self::new(nodes)?;
        curve.ensure_immersed()?;
        Ok(curve)
    }

    pub fn from_xy(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vec2::new(p[0], p[1])).collect())
    }

    /// Regular polygon with `n` vertices on a circle, counterclockwise from angle 0.
    pub fn regular_polygon(n: usize, center: Vec2, radius: f64) -> Result<Self> {
        let nodes = (0..n)
            .map(|j| {
                let a = std::f64::consts::TAU * j as f64 / n as f64;
                center + radius * Vec2::new(a.cos(), a.sin())
            })
            .collect();
        Self::new(nodes)
    }

    /// The unit square `[0,1]^2` with its four corners, counterclockwise.
    pub fn unit_square() -> Self {
        Self {
            nodes: vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Vec2> {
        self.nodes
    }

    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i % self.nodes.len()]
    }

    /// Forward difference `node[i+1] - node[i]`.
    pub fn chord(&self, i: usize) -> Vec2 {
        let n = self.nodes.len();
        self.nodes[(i + 1) % n] - self.nodes[i % n]
    }

    pub fn chords(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.chord(i)).collect()
    }

    pub fn chord_lengths(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.chord(i).norm()).collect()
    }

    /// Per-segment speed `|gamma'| = n * |chord_i|`.
    pub fn speeds(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.len()).map(|i| n * self.chord(i).norm()).collect()
    }

    pub fn length(&self) -> f64 {
        (0..self.len()).map(|i| self.chord(i).norm()).sum()
    }

    /// Shoelace area; positive for counterclockwise curves.
    pub fn signed_area(&self) -> f64 {
        let n = self.len();
        0.5 * (0..n)
            .map(|i| {
                let a = self.nodes[i];
                let b = self.nodes[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }

    pub fn default_min_speed(&self) -> f64 {
        1e-8 * self.length()
    }

    /// Passes iff every segment speed `n * |chord_i|` is strictly above `min_speed`.
    pub fn validate_immersion(&self, min_speed: f64) -> ImmersionCheck {
        let n = self.len() as f64;
        let first_violation = (0..self.len()).find(|&i| !(n * self.chord(i).norm() > min_speed));
        ImmersionCheck { valid: first_violation.is_none(), first_violation }
    }

    pub(crate) fn ensure_immersed(&self) -> Result<()> {
        match self.validate_immersion(self.default_min_speed()).first_violation {
            None => Ok(()),
            Some(i) => Err(Error::DegenerateSegment(i)),
        }
    }

    pub fn frenet_frames(&self) -> Result<Vec<Frame>> {
        (0..self.len())
            .map(|i| {
                let d = self.chord(i);
                let l = d.norm();
                if l == 0.0 {
                    return Err(Error::DegenerateSegment(i));
                }
                let tangent = d / l;
                Ok(Frame { tangent, normal: perp(tangent) })
            })
            .collect()
    }

    /// Retraces the curve with `m` nodes equally spaced in arclength, starting
    /// at node 0. The cumulative arclength is piecewise linear, so its inverse
    /// is evaluated exactly segment by segment.
    ///
    /// Chords of the output are all equal when no original corner falls strictly
    /// between two consecutive samples; otherwise the chords spanning a corner
    /// are shorter than the arclength spacing.
    pub fn constant_speed_resample(&self, m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::TooFewNodes(m));
        }
        let n = self.len();
        let lengths = self.chord_lengths();
        let total: f64 = lengths.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateSegment(0));
        }
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        for l in &lengths {
            cumulative.push(cumulative.last().unwrap() + l);
        }

        let mut out = Vec::with_capacity(m);
        let mut seg = 0;
        for j in 0..m {
            let s = total * j as f64 / m as f64;
            while seg + 1 < n && cumulative[seg + 1] <= s {
                seg += 1;
            }
            // Zero-length segments cannot contain a sample strictly inside.
            let t = if lengths[seg] > 0.0 { (s - cumulative[seg]) / lengths[seg] } else { 0.0 };
            out.push(self.nodes[seg] + t * self.chord(seg));
        }
        Self::new(out)
    }

    /// Rotates the node list so that node `k` becomes node 0.
    pub fn cyclic_shift(&self, k: usize) -> Self {
        let n = self.len();
        Self { nodes: (0..n).map(|j| self.nodes[(j + k) % n]).collect() }
    }

    /// The same trace traversed in the opposite direction, starting at node 0.
    pub fn reversed(&self) -> Self {
        let n = self.len();
        Self { nodes: (0..n).map(|j| self.nodes[(n - j) % n]).collect() }
    }

    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> Self {
        Self { nodes: self.nodes.iter().map(|&p| f(p)).collect() }
    }

    pub fn translated(&self, u: Vec2) -> Self {
        self.map(|p| p + u)
    }

    /// Rotation by `angle` about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        self.map(|p| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y))
    }

    /// `(min corner, max corner)` of the node set.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        bounding_box(std::slice::from_ref(self))
    }

    pub fn centroid(&self) -> Vec2 {
        self.nodes.iter().sum::<Vec2>() / self.len() as f64
    }
}

/// Joint bounding box of several curves.
pub fn bounding_box(curves: &[PolyCurve]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in curves.iter().flat_map(|c| c.nodes.iter()) {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Maps all curves by one uniform scale and translation so that their joint
/// bounding box fits in `[0,1]^2` touching the origin corner. Aspect ratio and
/// relative placement are preserved.
pub fn normalize_to_unit_square(curves: &[PolyCurve]) -> Vec<PolyCurve> {
    let (lo, hi) = bounding_box(curves);
    let extent = (hi - lo).max();
    let scale = if extent > 0.0 { 1.0 / extent } else { 1.0 };
    curves.iter().map(|c| c.map(|p| (p - lo) * scale)).collect()
}

/// Cyclic shift of `target` minimising the summed node distance to `source`.
/// Both curves must have the same node count.
pub fn align_start(source: &PolyCurve, target: &PolyCurve) -> Result<PolyCurve> {
    if source.len() != target.len() {
        return Err(Error::SizeMismatch { expected: source.len(), got: target.len() });
    }
    let n = source.len();
    let cost = |k: usize| -> f64 {
        (0..n).map(|j| (source.nodes[j] - target.nodes[(j + k) % n]).norm()).sum()
    };
    let best = (0..n)
        .map(|k| (k, cost(k)))
        .fold((0, f64::INFINITY), |acc, (k, c)| if c < acc.1 { (k, c) } else { acc });
    Ok(target.cyclic_shift(best.0))
}

/// Piecewise-affine vector field on a curve's node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    coeffs: Vec<Vec2>,
}

impl TangentField {
    pub fn new(coeffs: Vec<Vec2>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![Vec2::zeros(); n] }
    }

    pub fn constant(n: usize, c: Vec2) -> Self {
        Self { coeffs: vec![c; n] }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Vec2] {
        &self.coeffs
    }

    /// Forward difference `v[i+1] - v[i]`, cyclic.
    pub fn diff(&self, i: usize) -> Vec2 {
        let n = self.coeffs.len();
        self.coeffs[(i + 1) % n] - self.coeffs[i % n]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|v| v * s).collect() }
    }

    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { coeffs: self.coeffs.iter().map(|p| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)).collect() }
    }

    pub(crate) fn check_host(&self, curve: &PolyCurve) -> Result<()> {
        if self.len() != curve.len() {
            return Err(Error::SizeMismatch { expected: curve.len(), got: self.len() });
        }
        Ok(())
    }
}

impl From<&PolyCurve> for TangentField {
    fn from(c: &PolyCurve) -> Self {
        Self { coeffs: c.nodes.clone() }
    }
}
