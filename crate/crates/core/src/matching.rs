//! Kernel dissimilarities between curves, used as the relaxed endpoint
//! constraint.
//!
//! [`match_distance`] discretizes
//!
//! ```text
//! H(a, b) = ∫∫ |n_a(s) - n_b(t)|^2 k(a(s), b(t)) da(s) db(t)
//! ```
//!
//! with one midpoint sample per pair of segments. Normals are constant on a
//! segment, so only the kernel factor is approximated. Note that `H(a, a) > 0`
//! for any closed curve: pairs of segments with different normals contribute.
//!
//! [`currents_distance_sq`] is the squared currents norm of `a - b` under the
//! same kernel, `<a,a> - 2<a,b> + <b,b>` with
//! `<a,b> = ∫∫ <n_a, n_b> k(a, b) da db`, which vanishes at `a = b`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{perp, PolyCurve};
use crate::error::{Error, Result};
use crate::Vec2;

/// Widths of the two Gaussians in [`kernel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma: f64,
    pub delta: f64,
}

impl Default for KernelParams {
    /// Shape scale and feature scale for curves normalized to the unit square.
    fn default() -> Self {
        Self { sigma: 0.5, delta: 0.05 }
    }
}

impl KernelParams {
    pub fn new(sigma: f64, delta: f64) -> Result<Self> {
        let p = Self { sigma, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.delta > 0.0 && self.sigma.is_finite() && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel widths must be positive, got sigma={} delta={}",
                self.sigma, self.delta
            )));
        }
        Ok(())
    }

    /// Kernel value and its gradient with respect to `v` at offset `r = v - w`.
    #[inline]
    fn eval_with_grad(&self, r: Vec2) -> (f64, Vec2) {
        let r2 = r.norm_squared();
        let s2 = self.sigma * self.sigma;
        let d2 = self.delta * self.delta;
        let e1 = (-r2 / (2.0 * s2)).exp();
        let e2 = (-r2 / (2.0 * d2)).exp();
        (e1 + e2, -r * (e1 / s2 + e2 / d2))
    }

    #[inline]
    fn eval(&self, r: Vec2) -> f64 {
        let r2 = r.norm_squared();
        (-r2 / (2.0 * self.sigma * self.sigma)).exp() + (-r2 / (2.0 * self.delta * self.delta)).exp()
    }
}

/// `exp(-|v-w|^2 / 2 sigma^2) + exp(-|v-w|^2 / 2 delta^2)`.
pub fn kernel(v: Vec2, w: Vec2, params: &KernelParams) -> f64 {
    params.eval(v - w)
}

/// Per-segment midpoint, chord, unit normal and length.
struct Segments {
    mid: Vec<Vec2>,
    chord: Vec<Vec2>,
    normal: Vec<Vec2>,
    len: Vec<f64>,
}

impl Segments {
    fn of(curve: &PolyCurve) -> Result<Self> {
        let frames = curve.frenet_frames()?;
        let n = curve.len();
        Ok(Self {
            mid: (0..n).map(|i| 0.5 * (curve.node(i) + curve.node(i + 1))).collect(),
            chord: curve.chords(),
            normal: frames.iter().map(|f| f.normal).collect(),
            len: curve.chord_lengths(),
        })
    }
}

pub fn match_distance(a: &PolyCurve, b: &PolyCurve, params: &KernelParams) -> Result<f64> {
    let sa = Segments::of(a)?;
    let sb = Segments::of(b)?;
    let rows: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..b.len() {
                acc += (sa.normal[i] - sb.normal[j]).norm_squared() * params.eval(sa.mid[i] - sb.mid[j]) * sb.len[j];
            }
            acc * sa.len[i]
        })
        .collect();
    Ok(rows.iter().sum())
}

/// Value of [`match_distance`] and its exact gradient with respect to the
/// nodes of `a`.
pub fn match_gradient(a: &PolyCurve, b: &PolyCurve, params: &KernelParams) -> Result<(f64, Vec<Vec2>)> {
    let sa = Segments::of(a)?;
    let sb = Segments::of(b)?;
    // Per segment of `a`: value, d/d normal, d/d midpoint, d/d length.
    let rows: Vec<(f64, Vec2, Vec2, f64)> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let (mut val, mut g_normal, mut g_mid) = (0.0, Vec2::zeros(), Vec2::zeros());
            for j in 0..b.len() {
                let dn = sa.normal[i] - sb.normal[j];
                let dn2 = dn.norm_squared();
                let (k, dk) = params.eval_with_grad(sa.mid[i] - sb.mid[j]);
                let lj = sb.len[j];
                val += dn2 * k * lj;
                g_normal += dn * (2.0 * k * lj);
                g_mid += dk * (dn2 * lj);
            }
            let li = sa.len[i];
            (val * li, g_normal * li, g_mid * li, val)
        })
        .collect();

    let n = a.len();
    let mut grad = vec![Vec2::zeros(); n];
    let mut value = 0.0;
    for (i, &(val, g_normal, g_mid, g_len)) in rows.iter().enumerate() {
        value += val;
        let li = sa.len[i];
        let t = sa.chord[i] / li;
        // normal = perp(t), dt = (I - t t^T) dd / l
        let w = -perp(g_normal);
        let g_chord = (w - t * w.dot(&t)) / li + t * g_len;
        let next = (i + 1) % n;
        grad[next] += g_chord + 0.5 * g_mid;
        grad[i] += 0.5 * g_mid - g_chord;
    }
    Ok((value, grad))
}

/// `<a, b> = sum_ij <n_i, m_j> k(c_i, e_j) l_i l_j`, computed as
/// `sum_ij <d_i, f_j> k(c_i, e_j)` since `n_i l_i = perp(d_i)`.
pub fn currents_inner(a: &PolyCurve, b: &PolyCurve, params: &KernelParams) -> Result<f64> {
    let sa = Segments::of(a)?;
    let sb = Segments::of(b)?;
    Ok(currents_inner_segments(&sa, &sb, params))
}

fn currents_inner_segments(sa: &Segments, sb: &Segments, params: &KernelParams) -> f64 {
    let rows: Vec<f64> = (0..sa.mid.len())
        .into_par_iter()
        .map(|i| {
            (0..sb.mid.len())
                .map(|j| sa.chord[i].dot(&sb.chord[j]) * params.eval(sa.mid[i] - sb.mid[j]))
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum()
}

pub fn currents_distance_sq(a: &PolyCurve, b: &PolyCurve, params: &KernelParams) -> Result<f64> {
    let sa = Segments::of(a)?;
    let sb = Segments::of(b)?;
    Ok(currents_inner_segments(&sa, &sa, params) - 2.0 * currents_inner_segments(&sa, &sb, params)
        + currents_inner_segments(&sb, &sb, params))
}

/// Value of [`currents_distance_sq`] and its gradient with respect to `a`.
pub fn currents_gradient(a: &PolyCurve, b: &PolyCurve, params: &KernelParams) -> Result<(f64, Vec<Vec2>)> {
    let sa = Segments::of(a)?;
    let sb = Segments::of(b)?;
    let bb = currents_inner_segments(&sb, &sb, params);
    let (aa, ab, grad) = currents_parts_with_grad(&sa, &sb, params);
    Ok((aa - 2.0 * ab + bb, grad))
}

/// `(<a,a>, <a,b>, d/da (<a,a> - 2<a,b>))`.
fn currents_parts_with_grad(sa: &Segments, sb: &Segments, params: &KernelParams) -> (f64, f64, Vec<Vec2>) {
    let n = sa.mid.len();
    let rows: Vec<(f64, f64, Vec2, Vec2)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut aa, mut ab, mut g_chord, mut g_mid) = (0.0, 0.0, Vec2::zeros(), Vec2::zeros());
            for j in 0..n {
                let (k, dk) = params.eval_with_grad(sa.mid[i] - sa.mid[j]);
                let dot = sa.chord[i].dot(&sa.chord[j]);
                aa += dot * k;
                g_chord += sa.chord[j] * (2.0 * k);
                g_mid += dk * (2.0 * dot);
            }
            for j in 0..sb.mid.len() {
                let (k, dk) = params.eval_with_grad(sa.mid[i] - sb.mid[j]);
                let dot = sa.chord[i].dot(&sb.chord[j]);
                ab += dot * k;
                g_chord -= sb.chord[j] * (2.0 * k);
                g_mid -= dk * (2.0 * dot);
            }
            (aa, ab, g_chord, g_mid)
        })
        .collect();
    let mut grad = vec![Vec2::zeros(); n];
    let (mut aa, mut ab) = (0.0, 0.0);
    for (i, &(raa, rab, g_chord, g_mid)) in rows.iter().enumerate() {
        aa += raa;
        ab += rab;
        let next = (i + 1) % n;
        grad[next] += g_chord + 0.5 * g_mid;
        grad[i] += 0.5 * g_mid - g_chord;
    }
    (aa, ab, grad)
}

/// Which dissimilarity the optimizer uses for the endpoint term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    /// The squared-normal-difference double integral of [`match_distance`].
    #[default]
    Kernel,
    /// Squared currents norm of the difference, zero at the target.
    Currents,
}

/// Endpoint dissimilarity to a fixed target curve.
pub trait MatchTerm: Sync {
    fn value(&self, curve: &PolyCurve) -> Result<f64>;
    fn value_and_gradient(&self, curve: &PolyCurve) -> Result<(f64, Vec<Vec2>)>;
}

pub struct KernelMatch {
    target: PolyCurve,
    params: KernelParams,
}

impl KernelMatch {
    pub fn new(target: PolyCurve, params: KernelParams) -> Self {
        Self { target, params }
    }
}

impl MatchTerm for KernelMatch {
    fn value(&self, curve: &PolyCurve) -> Result<f64> {
        match_distance(curve, &self.target, &self.params)
    }

    fn value_and_gradient(&self, curve: &PolyCurve) -> Result<(f64, Vec<Vec2>)> {
        match_gradient(curve, &self.target, &self.params)
    }
}

pub struct CurrentsMatch {
    target: Segments,
    params: KernelParams,
    target_sq: f64,
}

impl CurrentsMatch {
    pub fn new(target: &PolyCurve, params: KernelParams) -> Result<Self> {
        let target = Segments::of(target)?;
        let target_sq = currents_inner_segments(&target, &target, &params);
        Ok(Self { target, params, target_sq })
    }
}

impl MatchTerm for CurrentsMatch {
    fn value(&self, curve: &PolyCurve) -> Result<f64> {
        let sa = Segments::of(curve)?;
        Ok(currents_inner_segments(&sa, &sa, &self.params) - 2.0 * currents_inner_segments(&sa, &self.target, &self.params)
            + self.target_sq)
    }

    fn value_and_gradient(&self, curve: &PolyCurve) -> Result<(f64, Vec<Vec2>)> {
        let sa = Segments::of(curve)?;
        let (aa, ab, grad) = currents_parts_with_grad(&sa, &self.target, &self.params);
        Ok((aa - 2.0 * ab + self.target_sq, grad))
    }
}

pub fn make_matcher(kind: MatchKind, target: &PolyCurve, params: KernelParams) -> Result<Box<dyn MatchTerm>> {
    params.validate()?;
    Ok(match kind {
        MatchKind::Kernel => {
            target.frenet_frames()?;
            Box::new(KernelMatch::new(target.clone(), params))
        }
        MatchKind::Currents => Box::new(CurrentsMatch::new(target, params)?),
    })
}
