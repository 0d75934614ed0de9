//! Discrete homotopies and the regularized path energy.
//!
//! A [`Homotopy`] holds `N` slices of `n` nodes each; slice 0 is the source
//! curve and the `N - 1` steps between consecutive slices carry the velocity
//! fields. The energy is
//!
//! ```text
//! E = 1/(N-1) sum_k T_k^p,   T_k = ||v_k|| at slice k
//! ```
//!
//! where the tangent norm is the BV2 norm, or the square root of the H2 form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{PolyCurve, TangentField};
use crate::error::{Error, Result};
use crate::metrics::{self, Exponent, MetricFamily, MetricSpec, NormGrad};
use crate::Vec2;

/// How the discrete time derivative is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityConvention {
    /// `(slice[k+1] - slice[k]) * (N - 1)`, the difference quotient over the
    /// time step `1 / (N - 1)`.
    #[default]
    DifferenceQuotient,
    /// `(slice[k+1] - slice[k]) / (N - 1)`, kept for comparison runs.
    PaperLiteral,
}

impl VelocityConvention {
    pub fn scale(self, slices: usize) -> f64 {
        let steps = (slices - 1) as f64;
        match self {
            VelocityConvention::DifferenceQuotient => steps,
            VelocityConvention::PaperLiteral => 1.0 / steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Homotopy {
    slices: Vec<PolyCurve>,
}

impl Homotopy {
    /// Requires `N >= 2` slices of a common node count, each passing the
    /// immersion check at its default threshold.
    pub fn new(slices: Vec<PolyCurve>) -> Result<Self> {
        let h = Self::from_slices_unchecked(slices)?;
        for (i, s) in h.slices.iter().enumerate() {
            if let Some(seg) = s.validate_immersion(s.default_min_speed()).first_violation {
                return Err(Error::InvalidHomotopy(format!("slice {i}: degenerate segment {seg}")));
            }
        }
        Ok(h)
    }

    /// Shape checks only; immersion is left to the caller.
    pub(crate) fn from_slices_unchecked(slices: Vec<PolyCurve>) -> Result<Self> {
        if slices.len() < 2 {
            return Err(Error::InvalidHomotopy(format!("need >= 2 slices, got {}", slices.len())));
        }
        let n = slices[0].len();
        if let Some(bad) = slices.iter().find(|s| s.len() != n) {
            return Err(Error::SizeMismatch { expected: n, got: bad.len() });
        }
        Ok(Self { slices })
    }

    /// Number of time slices `N`.
    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn num_steps(&self) -> usize {
        self.slices.len() - 1
    }

    /// Node count `n` of every slice.
    pub fn num_nodes(&self) -> usize {
        self.slices[0].len()
    }

    pub fn slices(&self) -> &[PolyCurve] {
        &self.slices
    }

    pub fn slice(&self, i: usize) -> &PolyCurve {
        &self.slices[i]
    }

    pub fn first(&self) -> &PolyCurve {
        &self.slices[0]
    }

    pub fn last(&self) -> &PolyCurve {
        self.slices.last().unwrap()
    }

    pub fn into_slices(self) -> Vec<PolyCurve> {
        self.slices
    }

    pub fn reversed(&self) -> Self {
        Self { slices: self.slices.iter().rev().cloned().collect() }
    }

    pub fn map(&self, f: impl Fn(&PolyCurve) -> PolyCurve) -> Self {
        Self { slices: self.slices.iter().map(f).collect() }
    }

    /// Velocity field of step `step` (0-based, `step < N - 1`).
    pub fn velocity(&self, step: usize, convention: VelocityConvention) -> Result<TangentField> {
        if step >= self.num_steps() {
            return Err(Error::StepOutOfRange { index: step, steps: self.num_steps() });
        }
        let s = convention.scale(self.num_slices());
        let a = self.slices[step].nodes();
        let b = self.slices[step + 1].nodes();
        Ok(TangentField::new(a.iter().zip(b).map(|(p, q)| (q - p) * s).collect()))
    }
}

/// `slice i = curve + (i / (N-1)) c`.
pub fn make_translation_path(curve: &PolyCurve, c: Vec2, slices: usize) -> Result<Homotopy> {
    if slices < 2 {
        return Err(Error::InvalidHomotopy(format!("need >= 2 slices, got {slices}")));
    }
    let steps = (slices - 1) as f64;
    Homotopy::new((0..slices).map(|i| curve.translated(c * (i as f64 / steps))).collect())
}

/// Tangent norm of each step's velocity at the step's start slice.
pub fn step_norms(h: &Homotopy, spec: &MetricSpec) -> Result<Vec<f64>> {
    (0..h.num_steps())
        .into_par_iter()
        .map(|k| metrics::tangent_norm(h.slice(k), &h.velocity(k, spec.velocity)?, spec))
        .collect()
}

pub fn path_energy(h: &Homotopy, spec: &MetricSpec) -> Result<f64> {
    let p = spec.exponent.value();
    let norms = step_norms(h, spec)?;
    Ok(norms.iter().map(|t| t.powf(p)).sum::<f64>() / h.num_steps() as f64)
}

/// Path energy and its gradient with respect to every slice (slice 0 included).
pub(crate) fn path_energy_with_grad(h: &Homotopy, spec: &MetricSpec) -> Result<(f64, Vec<Vec<Vec2>>)> {
    if spec.family == MetricFamily::Bv2 && spec.eps == 0.0 {
        return Err(Error::NonSmooth("the BV2 energy needs eps > 0 to be differentiated"));
    }
    let steps = h.num_steps();
    let scale = spec.velocity.scale(h.num_slices());
    let inv_steps = 1.0 / steps as f64;

    let per_step: Vec<(f64, NormGrad)> = (0..steps)
        .into_par_iter()
        .map(|k| -> Result<(f64, NormGrad)> {
            let v = h.velocity(k, spec.velocity)?;
            let curve = h.slice(k);
            match spec.family {
                MetricFamily::Bv2 => {
                    let g = metrics::bv2_with_grad(curve, &v, spec.weights, spec.eps)?;
                    let (value, factor) = match spec.exponent {
                        Exponent::One => (g.value, 1.0),
                        Exponent::Two => (g.value * g.value, 2.0 * g.value),
                    };
                    Ok((value, scale_grad(g, factor)))
                }
                MetricFamily::H2 => {
                    let g = metrics::h2_sq_with_grad(curve, &v, spec.weights, spec.eps)?;
                    let (value, factor) = match spec.exponent {
                        // Zero is a subgradient of the norm at the origin.
                        Exponent::One if g.value > 0.0 => (g.value.sqrt(), 0.5 / g.value.sqrt()),
                        Exponent::One => (0.0, 0.0),
                        Exponent::Two => (g.value, 1.0),
                    };
                    Ok((value, scale_grad(g, factor)))
                }
            }
        })
        .collect::<Result<_>>()?;

    let n = h.num_nodes();
    let mut grad = vec![vec![Vec2::zeros(); n]; h.num_slices()];
    let mut total = 0.0;
    for (k, (value, g)) in per_step.into_iter().enumerate() {
        total += value;
        for j in 0..n {
            let df = g.d_field[j] * scale;
            grad[k][j] += (g.d_curve[j] - df) * inv_steps;
            grad[k + 1][j] += df * inv_steps;
        }
    }
    Ok((total * inv_steps, grad))
}

fn scale_grad(mut g: NormGrad, factor: f64) -> NormGrad {
    g.d_curve.iter_mut().for_each(|x| *x *= factor);
    g.d_field.iter_mut().for_each(|x| *x *= factor);
    g
}

/// Linear blend `(1 - t) a + t b` of two slices.
fn blend(a: &PolyCurve, b: &PolyCurve, t: f64) -> Result<PolyCurve> {
    PolyCurve::new(a.nodes().iter().zip(b.nodes()).map(|(p, q)| p * (1.0 - t) + q * t).collect())
}

/// Relative spread tolerated between step norms after time reparameterization.
pub const TIME_REPARAM_TOL: f64 = 1e-3;
const TIME_REPARAM_MAX_PASSES: usize = 100;

/// Resamples the path in time so that every step has the same tangent norm.
///
/// Each pass places the new slices at equal levels of the cumulative
/// step-norm profile, blending the two bracketing slices linearly. Because
/// tangent norms are evaluated at the step's start slice, one pass is exact
/// only for paths whose norm does not depend on the base curve (translations);
/// passes repeat until the spread is within [`TIME_REPARAM_TOL`]. The first and
/// last slices are carried over unchanged.
pub fn time_constant_speed_reparam(h: &Homotopy, spec: &MetricSpec) -> Result<Homotopy> {
    let mut current = h.clone();
    for _ in 0..TIME_REPARAM_MAX_PASSES {
        let norms = step_norms(&current, spec)?;
        let total: f64 = norms.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroEnergy);
        }
        let max = norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        if max <= min * (1.0 + TIME_REPARAM_TOL) {
            break;
        }
        current = reparam_pass(&current, &norms, total)?;
    }
    Ok(current)
}

fn reparam_pass(h: &Homotopy, norms: &[f64], total: f64) -> Result<Homotopy> {
    let big_n = h.num_slices();
    let mut cumulative = Vec::with_capacity(big_n);
    cumulative.push(0.0);
    for t in norms {
        cumulative.push(cumulative.last().unwrap() + t);
    }
    let mut slices = Vec::with_capacity(big_n);
    slices.push(h.first().clone());
    for i in 1..big_n - 1 {
        let level = total * i as f64 / (big_n - 1) as f64;
        // Largest k with cumulative[k] <= level; level < total keeps k <= N-2.
        let k = (cumulative.partition_point(|&c| c <= level) - 1).min(big_n - 2);
        let width = cumulative[k + 1] - cumulative[k];
        let t = if width > 0.0 { ((level - cumulative[k]) / width).clamp(0.0, 1.0) } else { 0.0 };
        slices.push(blend(h.slice(k), h.slice(k + 1), t)?);
    }
    slices.push(h.last().clone());
    Homotopy::from_slices_unchecked(slices)
}

/// Per-slice lengths checked against `len(source) e^{-E} <= len <= len(source) e^{E}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDiagnostics {
    pub lengths: Vec<f64>,
    pub step_norms: Vec<f64>,
    /// Path energy with exponent 2.
    pub energy: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Slices whose length falls outside the bounds.
    pub violations: Vec<usize>,
    /// `1/(N-1) sum_k T_k`, the exponent-1 energy. The length of a continuous
    /// path stays within `len(source) e^{±E_1}`, and `E_1 <= sqrt(E)`, so for
    /// `E < 1` this is the bound that follows from the time-constant-speed
    /// argument.
    pub energy_p1: f64,
    pub violations_p1: Vec<usize>,
}

impl PathDiagnostics {
    pub fn bounds_hold(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Diagnostic only: the bound holds for continuous paths, and a coarse time
/// grid may break it slightly.
pub fn length_bound_check(h: &Homotopy, spec: &MetricSpec) -> Result<PathDiagnostics> {
    let spec2 = spec.with_exponent(Exponent::Two);
    let norms = step_norms(h, &spec2)?;
    let energy = norms.iter().map(|t| t * t).sum::<f64>() / h.num_steps() as f64;
    let lengths: Vec<f64> = h.slices().iter().map(PolyCurve::length).collect();
    let lower_bound = lengths[0] * (-energy).exp();
    let upper_bound = lengths[0] * energy.exp();
    let outside = |lo: f64, hi: f64| -> Vec<usize> {
        lengths.iter().enumerate().filter(|(_, &l)| l < lo || l > hi).map(|(i, _)| i).collect()
    };
    let violations = outside(lower_bound, upper_bound);
    let energy_p1 = norms.iter().sum::<f64>() / h.num_steps() as f64;
    let violations_p1 = outside(lengths[0] * (-energy_p1).exp(), lengths[0] * energy_p1.exp());
    Ok(PathDiagnostics { lengths, step_norms: norms, energy, lower_bound, upper_bound, violations, energy_p1, violations_p1 })
}
