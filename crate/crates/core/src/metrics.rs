//! Discrete tangent-space norms at a piecewise-affine curve.
//!
//! For a curve with nodes `g` and a P1 field with coefficients `v`, write
//! `d_i = g[i+1] - g[i]` for the chords and `|x|_e` for [`smoothed_norm`].
//! With `c = eps / n` the three BV2 terms are
//!
//! ```text
//! J0 = 1/2 sum_i |d_i|_c (|v_i|_eps + |v_{i+1}|_eps)
//! J1 = sum_i |v_{i+1} - v_i|_c
//! J2 = sum_i |u_{i+1} - u_i|_eps,   u_i = (v_{i+1} - v_i) / |d_i|_c
//! ```
//!
//! `u_i` is the arclength derivative of the field on segment `i`, so `J2` sums
//! the jumps of that derivative over the nodes.

use serde::{Deserialize, Serialize};

use crate::curve::{smoothed_norm, PolyCurve, TangentField};
use crate::error::{Error, Result};
use crate::path::VelocityConvention;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricFamily {
    Bv2,
    H2,
}

/// Power applied to the per-step tangent norm in the path energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Exponent {
    One,
    Two,
}

impl TryFrom<u8> for Exponent {
    type Error = String;
    fn try_from(p: u8) -> std::result::Result<Self, String> {
        match p {
            1 => Ok(Exponent::One),
            2 => Ok(Exponent::Two),
            _ => Err(format!("exponent must be 1 or 2, got {p}")),
        }
    }
}

impl From<Exponent> for u8 {
    fn from(p: Exponent) -> u8 {
        match p {
            Exponent::One => 1,
            Exponent::Two => 2,
        }
    }
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::One => 1.0,
            Exponent::Two => 2.0,
        }
    }
}

/// Metric family, weights `(w0, w1, w2)` on the zeroth, first and second order
/// terms, smoothing `eps` and path-energy exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSpec {
    pub family: MetricFamily,
    pub weights: [f64; 3],
    pub eps: f64,
    pub exponent: Exponent,
    pub velocity: VelocityConvention,
}

impl MetricSpec {
    pub fn new(family: MetricFamily, weights: [f64; 3], eps: f64, exponent: Exponent) -> Result<Self> {
        let spec = Self { family, weights, eps, exponent, velocity: VelocityConvention::DifferenceQuotient };
        spec.validate()?;
        Ok(spec)
    }

    pub fn bv2(weights: [f64; 3], eps: f64) -> Result<Self> {
        Self::new(MetricFamily::Bv2, weights, eps, Exponent::Two)
    }

    pub fn h2(weights: [f64; 3], eps: f64) -> Result<Self> {
        Self::new(MetricFamily::H2, weights, eps, Exponent::Two)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMetric(format!("weights must be finite and >= 0: {:?}", self.weights)));
        }
        if !self.weights.iter().any(|&w| w > 0.0) {
            return Err(Error::InvalidMetric("at least one weight must be positive".into()));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::InvalidMetric(format!("eps must be finite and >= 0, got {}", self.eps)));
        }
        Ok(())
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_exponent(mut self, exponent: Exponent) -> Self {
        self.exponent = exponent;
        self
    }

    pub fn with_weights(mut self, weights: [f64; 3]) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_velocity(mut self, velocity: VelocityConvention) -> Self {
        self.velocity = velocity;
        self
    }
}

/// Constants `m <= M` sandwiching the curve-weighted BV2 norm between multiples
/// of the flat BV2 norm on the parameter circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceConstants {
    pub m: f64,
    pub big_m: f64,
}

fn chord_norms(curve: &PolyCurve, c: f64) -> Result<Vec<f64>> {
    (0..curve.len())
        .map(|i| {
            let a = smoothed_norm(curve.chord(i), c);
            if a > 0.0 {
                Ok(a)
            } else {
                Err(Error::DegenerateSegment(i))
            }
        })
        .collect()
}

pub fn j0(curve: &PolyCurve, field: &TangentField, eps: f64) -> Result<f64> {
    field.check_host(curve)?;
    let n = curve.len();
    let c = eps / n as f64;
    let v = field.coeffs();
    Ok(0.5
        * (0..n)
            .map(|i| smoothed_norm(curve.chord(i), c) * (smoothed_norm(v[i], eps) + smoothed_norm(v[(i + 1) % n], eps)))
            .sum::<f64>())
}

pub fn j1(curve: &PolyCurve, field: &TangentField, eps: f64) -> Result<f64> {
    field.check_host(curve)?;
    let c = eps / curve.len() as f64;
    Ok((0..field.len()).map(|i| smoothed_norm(field.diff(i), c)).sum())
}

pub fn j2(curve: &PolyCurve, field: &TangentField, eps: f64) -> Result<f64> {
    field.check_host(curve)?;
    let n = curve.len();
    let a = chord_norms(curve, eps / n as f64)?;
    let u: Vec<Vec2> = (0..n).map(|i| field.diff(i) / a[i]).collect();
    Ok((0..n).map(|i| smoothed_norm(u[(i + 1) % n] - u[i], eps)).sum())
}

pub fn bv2_tangent_norm(curve: &PolyCurve, field: &TangentField, spec: &MetricSpec) -> Result<f64> {
    if spec.family != MetricFamily::Bv2 {
        return Err(Error::FamilyMismatch("bv2"));
    }
    let [w0, w1, w2] = spec.weights;
    let mut total = 0.0;
    if w0 != 0.0 {
        total += w0 * j0(curve, field, spec.eps)?;
    }
    if w1 != 0.0 {
        total += w1 * j1(curve, field, spec.eps)?;
    }
    if w2 != 0.0 {
        total += w2 * j2(curve, field, spec.eps)?;
    }
    Ok(total)
}

/// Squared discrete H2 norm. Chord lengths `l_i` are the segment measures and
/// node masses are `m_i = (l_{i-1} + l_i) / 2`; the arclength derivative uses
/// the smoothed chord norm `|d_i|_{eps/n}` in its denominator, which reduces to
/// `l_i` at `eps = 0`:
///
/// ```text
/// Q = w0 sum_i l_i (|v_i|^2 + |v_{i+1}|^2) / 2
///   + w1 sum_i |u_i|^2 l_i
///   + w2 sum_i |u_i - u_{i-1}|^2 / m_i
/// ```
pub fn h2_tangent_norm_sq(curve: &PolyCurve, field: &TangentField, spec: &MetricSpec) -> Result<f64> {
    if spec.family != MetricFamily::H2 {
        return Err(Error::FamilyMismatch("h2"));
    }
    field.check_host(curve)?;
    let n = curve.len();
    let l = chord_norms(curve, 0.0)?;
    let a = chord_norms(curve, spec.eps / n as f64)?;
    let v = field.coeffs();
    let u: Vec<Vec2> = (0..n).map(|i| field.diff(i) / a[i]).collect();
    let [w0, w1, w2] = spec.weights;
    let mut zeroth = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..n {
        let prev = (i + n - 1) % n;
        zeroth += l[i] * 0.5 * (v[i].norm_squared() + v[(i + 1) % n].norm_squared());
        first += u[i].norm_squared() * l[i];
        second += (u[i] - u[prev]).norm_squared() / (0.5 * (l[prev] + l[i]));
    }
    Ok(w0 * zeroth + w1 * first + w2 * second)
}

/// Tangent norm of the family selected by `spec` (the square root of the H2
/// quadratic form for the Sobolev family).
pub fn tangent_norm(curve: &PolyCurve, field: &TangentField, spec: &MetricSpec) -> Result<f64> {
    match spec.family {
        MetricFamily::Bv2 => bv2_tangent_norm(curve, field, spec),
        MetricFamily::H2 => Ok(h2_tangent_norm_sq(curve, field, spec)?.sqrt()),
    }
}

/// BV2 norm on the parameter circle, uniform grid of spacing `1/n`: trapezoid
/// L1 norm of `v`, plus `sum |v_{i+1} - v_i|`, plus the second variation
/// `sum |n (v_{i+2} - v_{i+1}) - n (v_{i+1} - v_i)|_eps`.
pub fn flat_bv2_norm(field: &TangentField, eps: f64) -> f64 {
    let n = field.len();
    let nf = n as f64;
    let l1 = field.coeffs().iter().map(|v| v.norm()).sum::<f64>() / nf;
    let tv = (0..n).map(|i| field.diff(i).norm()).sum::<f64>();
    let tv2 = (0..n).map(|i| smoothed_norm(nf * (field.diff(i + 1) - field.diff(i)), eps)).sum::<f64>();
    l1 + tv + tv2
}

pub fn equivalence_constants(curve: &PolyCurve) -> Result<EquivalenceConstants> {
    let n = curve.len();
    let nf = n as f64;
    let speeds = curve.speeds();
    if let Some(i) = speeds.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateSegment(i));
    }
    let sup = speeds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let inf = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
    // BV norm of gamma': L1 of the speed plus the jump variation of gamma'.
    let jumps: f64 = (0..n).map(|i| (nf * (curve.chord(i + 1) - curve.chord(i))).norm()).sum();
    let bv = speeds.iter().sum::<f64>() / nf + jumps;
    Ok(EquivalenceConstants { m: inf.min(1.0 / bv), big_m: sup.max(bv / (inf * inf)) })
}

/// Value of a tangent-norm building block together with its partial
/// derivatives with respect to the curve nodes and the field coefficients.
#[derive(Debug, Clone)]
pub(crate) struct NormGrad {
    pub value: f64,
    pub d_curve: Vec<Vec2>,
    pub d_field: Vec<Vec2>,
}

#[inline]
fn unit_or_zero(x: Vec2, norm: f64) -> Vec2 {
    if norm > 0.0 {
        x / norm
    } else {
        Vec2::zeros()
    }
}

/// Moves per-chord and per-difference gradients onto the nodes they depend on.
fn scatter(d_chord: &[Vec2], d_diff: &[Vec2], d_curve: &mut [Vec2], d_field: &mut [Vec2]) {
    let n = d_curve.len();
    for i in 0..n {
        let next = (i + 1) % n;
        d_curve[next] += d_chord[i];
        d_curve[i] -= d_chord[i];
        d_field[next] += d_diff[i];
        d_field[i] -= d_diff[i];
    }
}

/// `w0 J0 + w1 J1 + w2 J2` and its gradient. Requires `eps > 0` wherever a
/// smoothed norm of a vanishing argument is differentiated.
pub(crate) fn bv2_with_grad(curve: &PolyCurve, field: &TangentField, weights: [f64; 3], eps: f64) -> Result<NormGrad> {
    field.check_host(curve)?;
    let n = curve.len();
    let c = eps / n as f64;
    let v = field.coeffs();
    let [w0, w1, w2] = weights;

    let chords = curve.chords();
    let a = chord_norms(curve, c)?;
    let diffs: Vec<Vec2> = (0..n).map(|i| field.diff(i)).collect();

    let mut d_chord = vec![Vec2::zeros(); n];
    let mut d_diff = vec![Vec2::zeros(); n];
    let mut d_curve = vec![Vec2::zeros(); n];
    let mut d_field = vec![Vec2::zeros(); n];
    let mut value = 0.0;

    if w0 != 0.0 {
        let b: Vec<f64> = v.iter().map(|&x| smoothed_norm(x, eps)).collect();
        for i in 0..n {
            let next = (i + 1) % n;
            let prev = (i + n - 1) % n;
            let bsum = b[i] + b[next];
            value += w0 * 0.5 * a[i] * bsum;
            d_chord[i] += (w0 * 0.5 * bsum / a[i]) * chords[i];
            d_field[i] += (w0 * 0.5 * (a[i] + a[prev])) * unit_or_zero(v[i], b[i]);
        }
    }
    if w1 != 0.0 {
        for i in 0..n {
            let e = smoothed_norm(diffs[i], c);
            value += w1 * e;
            d_diff[i] += w1 * unit_or_zero(diffs[i], e);
        }
    }
    if w2 != 0.0 {
        let u: Vec<Vec2> = (0..n).map(|i| diffs[i] / a[i]).collect();
        let r: Vec<Vec2> = (0..n)
            .map(|i| {
                let z = u[(i + 1) % n] - u[i];
                let zn = smoothed_norm(z, eps);
                value += w2 * zn;
                unit_or_zero(z, zn)
            })
            .collect();
        for i in 0..n {
            let q = w2 * (r[(i + n - 1) % n] - r[i]);
            d_diff[i] += q / a[i];
            d_chord[i] -= (q.dot(&diffs[i]) / (a[i] * a[i] * a[i])) * chords[i];
        }
    }
    scatter(&d_chord, &d_diff, &mut d_curve, &mut d_field);
    Ok(NormGrad { value, d_curve, d_field })
}

/// Squared H2 norm (see [`h2_tangent_norm_sq`]) and its gradient.
pub(crate) fn h2_sq_with_grad(curve: &PolyCurve, field: &TangentField, weights: [f64; 3], eps: f64) -> Result<NormGrad> {
    field.check_host(curve)?;
    let n = curve.len();
    let v = field.coeffs();
    let [w0, w1, w2] = weights;

    let chords = curve.chords();
    let l = chord_norms(curve, 0.0)?;
    let a = chord_norms(curve, eps / n as f64)?;
    let diffs: Vec<Vec2> = (0..n).map(|i| field.diff(i)).collect();
    let u: Vec<Vec2> = (0..n).map(|i| diffs[i] / a[i]).collect();

    let mut d_chord = vec![Vec2::zeros(); n];
    let mut d_diff = vec![Vec2::zeros(); n];
    let mut d_curve = vec![Vec2::zeros(); n];
    let mut d_field = vec![Vec2::zeros(); n];
    let mut value = 0.0;

    for i in 0..n {
        let next = (i + 1) % n;
        let prev = (i + n - 1) % n;
        let unit_chord = chords[i] / l[i];

        // Zeroth order, trapezoid of |v|^2 against the chord measure.
        let wsum = 0.5 * (v[i].norm_squared() + v[next].norm_squared());
        value += w0 * l[i] * wsum;
        d_chord[i] += (w0 * wsum) * unit_chord;
        d_field[i] += (w0 * (l[i] + l[prev])) * v[i];

        // First order, |u_i|^2 l_i = |dv_i|^2 l_i / a_i^2.
        let dv2 = diffs[i].norm_squared();
        let a2 = a[i] * a[i];
        value += w1 * dv2 * l[i] / a2;
        d_diff[i] += (2.0 * w1 * l[i] / a2) * diffs[i];
        d_chord[i] += (w1 * dv2 / a2) * unit_chord - (2.0 * w1 * dv2 * l[i] / (a2 * a2)) * chords[i];
    }

    if w2 != 0.0 {
        let mass: Vec<f64> = (0..n).map(|i| 0.5 * (l[(i + n - 1) % n] + l[i])).collect();
        // Jump at node i sits between segments i-1 and i.
        let z: Vec<Vec2> = (0..n).map(|i| u[i] - u[(i + n - 1) % n]).collect();
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            value += w2 * z[i].norm_squared() / mass[i];

            let q = 2.0 * w2 * (z[i] / mass[i] - z[next] / mass[next]);
            d_diff[i] += q / a[i];
            d_chord[i] -= (q.dot(&diffs[i]) / (a[i] * a[i] * a[i])) * chords[i];

            let k = -w2 * z[i].norm_squared() / (2.0 * mass[i] * mass[i]);
            d_chord[prev] += (k / l[prev]) * chords[prev];
            d_chord[i] += (k / l[i]) * chords[i];
        }
    }
    scatter(&d_chord, &d_diff, &mut d_curve, &mut d_field);
    Ok(NormGrad { value, d_curve, d_field })
}
