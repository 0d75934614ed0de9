//! Gradient descent on `F_eps = H(last slice, target) + E_eps(path)` with the
//! first slice pinned.
//!
//! Steps are accepted by Armijo backtracking; a trial step that would break
//! the immersion condition of any slice counts as a rejection. Continuation
//! runs one descent per smoothing level, warm-starting each from the last.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::PolyCurve;
use crate::error::{Error, Result};
use crate::matching::MatchTerm;
use crate::metrics::MetricSpec;
use crate::path::{self, Homotopy};
use crate::Vec2;

const MAX_BACKTRACKS: usize = 60;
const STEP_GROWTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    /// Iteration cap per smoothing stage.
    pub max_iters: usize,
    /// Initial step, divided by `1 + |grad|_inf` at the first iterate.
    pub tau0: f64,
    pub shrink: f64,
    pub armijo: f64,
    /// Stop once `|grad|_inf <= grad_tol * |grad_0|_inf`.
    pub grad_tol: f64,
    pub eps_schedule: Vec<f64>,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tau0: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            grad_tol: 1e-6,
            eps_schedule: vec![1e-1, 1e-2, 1e-3],
            seed: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return bad(format!("tau0 must be positive, got {}", self.tau0));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad(format!("shrink must lie in (0,1), got {}", self.shrink));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad(format!("armijo must lie in (0,1), got {}", self.armijo));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return bad(format!("grad_tol must be positive, got {}", self.grad_tol));
        }
        if self.eps_schedule.is_empty() {
            return bad("eps_schedule is empty".into());
        }
        if self.eps_schedule.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return bad(format!("eps_schedule entries must be finite and >= 0: {:?}", self.eps_schedule));
        }
        if self.eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("eps_schedule must be strictly decreasing: {:?}", self.eps_schedule));
        }
        Ok(())
    }
}

/// Objective value split into its two parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    pub total: f64,
    pub energy: f64,
    pub matching: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Gradient sup-norm fell below the relative tolerance.
    GradientTolerance,
    MaxIters,
    /// No trial step satisfied the Armijo condition after the first iteration.
    LineSearchStalled,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::GradientTolerance => "grad_tol",
            Termination::MaxIters => "max_iters",
            Termination::LineSearchStalled => "line_search_stalled",
        }
    }
}

/// One row per accepted iterate (row 0 is the starting point, `step = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub eps: f64,
    pub objective: f64,
    pub energy_part: f64,
    pub match_part: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub eps: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Final objective at this stage's own smoothing.
    pub objective: ObjectiveParts,
    /// Final objective re-evaluated at the smallest smoothing in the schedule.
    pub objective_at_min_eps: ObjectiveParts,
}

#[derive(Debug, Clone)]
pub struct OptimReport {
    pub homotopy: Homotopy,
    pub trace: Vec<TraceRow>,
    pub stages: Vec<StageReport>,
    pub termination: Termination,
}

pub fn objective(h: &Homotopy, spec: &MetricSpec, matcher: &dyn MatchTerm) -> Result<ObjectiveParts> {
    let energy = path::path_energy(h, spec)?;
    let matching = matcher.value(h.last())?;
    Ok(ObjectiveParts { total: energy + matching, energy, matching })
}

/// Exact gradient of [`objective`] with respect to every slice. The block of
/// the pinned first slice is identically zero.
pub fn gradient(h: &Homotopy, spec: &MetricSpec, matcher: &dyn MatchTerm) -> Result<(ObjectiveParts, Vec<Vec<Vec2>>)> {
    let (energy, mut grad) = path::path_energy_with_grad(h, spec)?;
    let (matching, match_grad) = matcher.value_and_gradient(h.last())?;
    for (g, m) in grad.last_mut().unwrap().iter_mut().zip(&match_grad) {
        *g += m;
    }
    grad[0].iter_mut().for_each(|g| *g = Vec2::zeros());
    Ok((ObjectiveParts { total: energy + matching, energy, matching }, grad))
}

fn sup_norm(grad: &[Vec<Vec2>]) -> f64 {
    grad.iter().flatten().map(|g| g.amax()).fold(0.0, f64::max)
}

fn sum_sq(grad: &[Vec<Vec2>]) -> f64 {
    grad.iter().flatten().map(|g| g.norm_squared()).sum()
}

/// `h - tau * grad` on slices 1.., or `None` if a slice loses immersion.
fn trial_point(h: &Homotopy, grad: &[Vec<Vec2>], tau: f64) -> Option<Homotopy> {
    let mut slices = Vec::with_capacity(h.num_slices());
    slices.push(h.first().clone());
    for (s, g) in h.slices().iter().zip(grad).skip(1) {
        let curve = PolyCurve::new(s.nodes().iter().zip(g).map(|(p, d)| p - d * tau).collect()).ok()?;
        if !curve.validate_immersion(curve.default_min_speed()).valid {
            return None;
        }
        slices.push(curve);
    }
    Homotopy::from_slices_unchecked(slices).ok()
}

struct Stage {
    homotopy: Homotopy,
    trace: Vec<TraceRow>,
    iterations: usize,
    termination: Termination,
    parts: ObjectiveParts,
}

fn run_stage(h0: &Homotopy, spec: &MetricSpec, matcher: &dyn MatchTerm, cfg: &OptimConfig) -> Result<Stage> {
    let mut x = h0.clone();
    let (mut parts, mut grad) = gradient(&x, spec, matcher)?;
    let g0 = sup_norm(&grad);
    let row = |iter, parts: &ObjectiveParts, grad_norm, step| TraceRow {
        iter,
        eps: spec.eps,
        objective: parts.total,
        energy_part: parts.energy,
        match_part: parts.matching,
        grad_norm,
        step,
    };
    let mut trace = vec![row(0, &parts, g0, 0.0)];
    let tol = cfg.grad_tol * g0;
    let mut tau = cfg.tau0 / (1.0 + g0);
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    for it in 1..=cfg.max_iters {
        let gsup = sup_norm(&grad);
        if gsup <= tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let gsq = sum_sq(&grad);
        let mut trial = if it == 1 { tau } else { tau * STEP_GROWTH };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            if let Some(cand) = trial_point(&x, &grad, trial) {
                if let Ok(p) = objective(&cand, spec, matcher) {
                    if p.total <= parts.total - cfg.armijo * trial * gsq {
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            trial *= cfg.shrink;
        }
        let Some(next) = accepted else {
            if it == 1 {
                return Err(Error::LineSearchFailed);
            }
            termination = Termination::LineSearchStalled;
            break;
        };
        x = next;
        (parts, grad) = gradient(&x, spec, matcher)?;
        tau = trial;
        iterations = it;
        trace.push(row(it, &parts, sup_norm(&grad), trial));
    }
    Ok(Stage { homotopy: x, trace, iterations, termination, parts })
}

/// Plain gradient descent at the smoothing level of `spec`.
pub fn descend(h0: &Homotopy, spec: &MetricSpec, matcher: &dyn MatchTerm, cfg: &OptimConfig) -> Result<OptimReport> {
    cfg.validate()?;
    let stage = run_stage(h0, spec, matcher, cfg)?;
    Ok(OptimReport {
        stages: vec![StageReport {
            eps: spec.eps,
            iterations: stage.iterations,
            termination: stage.termination,
            objective: stage.parts,
            objective_at_min_eps: stage.parts,
        }],
        termination: stage.termination,
        trace: stage.trace,
        homotopy: stage.homotopy,
    })
}

/// One descent per entry of `cfg.eps_schedule`, each warm-started from the
/// previous result. A first-iteration line-search failure aborts the run only
/// in the first stage; later stages record it as a stall and keep the
/// previous iterate.
pub fn continuation(h0: &Homotopy, spec: &MetricSpec, matcher: &dyn MatchTerm, cfg: &OptimConfig) -> Result<OptimReport> {
    cfg.validate()?;
    let min_eps = *cfg.eps_schedule.last().unwrap();
    let mut current = h0.clone();
    let mut trace = Vec::new();
    let mut stages = Vec::new();
    let mut termination = Termination::MaxIters;
    for (k, &eps) in cfg.eps_schedule.iter().enumerate() {
        let stage_spec = spec.with_eps(eps);
        let stage = match run_stage(&current, &stage_spec, matcher, cfg) {
            Ok(s) => s,
            Err(Error::LineSearchFailed) if k > 0 => Stage {
                parts: objective(&current, &stage_spec, matcher)?,
                homotopy: current.clone(),
                trace: Vec::new(),
                iterations: 0,
                termination: Termination::LineSearchStalled,
            },
            Err(e) => return Err(e),
        };
        let at_min = objective(&stage.homotopy, &spec.with_eps(min_eps), matcher)?;
        stages.push(StageReport {
            eps,
            iterations: stage.iterations,
            termination: stage.termination,
            objective: stage.parts,
            objective_at_min_eps: at_min,
        });
        trace.extend(stage.trace);
        termination = stage.termination;
        current = stage.homotopy;
    }
    Ok(OptimReport { homotopy: current, trace, stages, termination })
}

/// Every slice equal to the source.
pub fn init_constant(source: &PolyCurve, slices: usize) -> Result<Homotopy> {
    Homotopy::new(vec![source.clone(); slices])
}

/// `slice i = (1 - t_i) source + t_i target`, `t_i = i / (N-1)`.
pub fn init_linear(source: &PolyCurve, target: &PolyCurve, slices: usize) -> Result<Homotopy> {
    if source.len() != target.len() {
        return Err(Error::SizeMismatch { expected: source.len(), got: target.len() });
    }
    if slices < 2 {
        return Err(Error::InvalidHomotopy(format!("need >= 2 slices, got {slices}")));
    }
    let steps = (slices - 1) as f64;
    let out = (0..slices)
        .map(|i| {
            if i == 0 {
                return Ok(source.clone());
            }
            if i == slices - 1 {
                return Ok(target.clone());
            }
            let t = i as f64 / steps;
            PolyCurve::new(source.nodes().iter().zip(target.nodes()).map(|(p, q)| p * (1.0 - t) + q * t).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Homotopy::new(out)
}

/// Result of comparing the analytic gradient with finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub samples: usize,
}

/// Relative error floor, as a fraction of the gradient sup-norm, for
/// coordinates whose partial derivative is close to zero.
const FD_FLOOR: f64 = 1e-6;

/// Compares `coords` randomly chosen free coordinates of the analytic
/// gradient with fourth-order central differences of the objective. The
/// relative error of each sample is `|analytic - fd| / max(|analytic|, |fd|,
/// 1e-6 |grad|_inf)`.
pub fn check_gradient(
    h: &Homotopy,
    spec: &MetricSpec,
    matcher: &dyn MatchTerm,
    coords: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let (_, grad) = gradient(h, spec, matcher)?;
    let floor = FD_FLOOR * sup_norm(&grad);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_error: f64 = 0.0;
    let f = |slice: usize, node: usize, comp: usize, delta: f64| -> Result<f64> {
        let mut slices = h.slices().to_vec();
        let mut nodes = slices[slice].nodes().to_vec();
        nodes[node][comp] += delta;
        slices[slice] = PolyCurve::new(nodes)?;
        Ok(objective(&Homotopy::from_slices_unchecked(slices)?, spec, matcher)?.total)
    };
    for _ in 0..coords {
        let slice = rng.gen_range(1..h.num_slices());
        let node = rng.gen_range(0..h.num_nodes());
        let comp = rng.gen_range(0..2);
        let x = h.slice(slice).nodes()[node][comp];
        let step = 1e-6 * x.abs().max(1e-2);
        let fd = (-f(slice, node, comp, 2.0 * step)? + 8.0 * f(slice, node, comp, step)?
            - 8.0 * f(slice, node, comp, -step)?
            + f(slice, node, comp, -2.0 * step)?)
            / (12.0 * step);
        let analytic = grad[slice][node][comp];
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(floor);
        max_rel_error = max_rel_error.max(rel);
    }
    Ok(GradientCheck { max_rel_error, samples: coords })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ellipse, random_curve, random_homotopy};
    use crate::matching::{CurrentsMatch, KernelMatch, KernelParams};
    use crate::metrics::{Exponent, MetricFamily};
    use crate::path::make_translation_path;

    /// `|curve - target|^2` summed over nodes.
    struct NodeL2 {
        target: PolyCurve,
    }

    impl MatchTerm for NodeL2 {
        fn value(&self, curve: &PolyCurve) -> Result<f64> {
            Ok(curve.nodes().iter().zip(self.target.nodes()).map(|(p, q)| (p - q).norm_squared()).sum())
        }

        fn value_and_gradient(&self, curve: &PolyCurve) -> Result<(f64, Vec<Vec2>)> {
            let grad = curve.nodes().iter().zip(self.target.nodes()).map(|(p, q)| 2.0 * (p - q)).collect();
            Ok((self.value(curve)?, grad))
        }
    }

    fn kp() -> KernelParams {
        KernelParams::default()
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::default().validate().is_ok());
        let c = OptimConfig { eps_schedule: vec![1e-2, 1e-1], ..OptimConfig::default() };
        assert!(c.validate().is_err());
        let c = OptimConfig { eps_schedule: vec![], ..OptimConfig::default() };
        assert!(c.validate().is_err());
        let c = OptimConfig { shrink: 1.0, ..OptimConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn objective_examples() {
        let sq = PolyCurve::unit_square().constant_speed_resample(64).unwrap();
        let spec = MetricSpec::bv2([1., 0., 1.], 0.0).unwrap();
        let m = KernelMatch::new(sq.clone(), kp());
        let stat = init_constant(&sq, 5).unwrap();
        let p = objective(&stat, &spec, &m).unwrap();
        assert_eq!(p.energy, 0.0);
        assert!(p.matching > 0.0);
        assert_eq!(p.total, p.energy + p.matching);

        let c = Vec2::new(1.0, 0.0);
        let tr = make_translation_path(&sq, c, 10).unwrap();
        let m = KernelMatch::new(sq.translated(c), kp());
        let p = objective(&tr, &spec, &m).unwrap();
        let h_self = crate::matching::match_distance(&sq.translated(c), &sq.translated(c), &kp()).unwrap();
        assert!((p.total - (h_self + 16.0)).abs() < 1e-9);
    }

    #[test]
    fn bv2_gradient_refuses_zero_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = random_homotopy(&mut rng, 3, 12);
        let m = KernelMatch::new(h.last().clone(), kp());
        let spec = MetricSpec::bv2([1., 0., 1.], 0.0).unwrap();
        assert!(matches!(gradient(&h, &spec, &m), Err(Error::NonSmooth(_))));
        assert!(gradient(&h, &MetricSpec::h2([1., 0., 1.], 0.0).unwrap(), &m).is_ok());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for family in [MetricFamily::Bv2, MetricFamily::H2] {
            for exponent in [Exponent::One, Exponent::Two] {
                let h = random_homotopy(&mut rng, 5, 24);
                let target = random_curve(&mut rng, 24);
                let spec = MetricSpec::new(family, [1., 1., 1.], 1e-2, exponent).unwrap();
                let kernel = KernelMatch::new(target.clone(), kp());
                let currents = CurrentsMatch::new(&target, kp()).unwrap();
                for m in [&kernel as &dyn MatchTerm, &currents] {
                    let (_, g) = gradient(&h, &spec, m).unwrap();
                    assert!(g[0].iter().all(|x| *x == Vec2::zeros()));
                    let check = check_gradient(&h, &spec, m, 50, 7).unwrap();
                    assert!(check.max_rel_error <= 1e-5, "{family:?} {exponent:?}: {}", check.max_rel_error);
                }
            }
        }
    }

    #[test]
    fn gradient_rotates_with_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let h = random_homotopy(&mut rng, 4, 16);
        let target = random_curve(&mut rng, 16);
        let spec = MetricSpec::bv2([1., 1., 1.], 1e-2).unwrap();
        let angle = 0.4;
        let (_, g) = gradient(&h, &spec, &KernelMatch::new(target.clone(), kp())).unwrap();
        let hr = h.map(|s| s.rotated(angle));
        let (_, gr) = gradient(&hr, &spec, &KernelMatch::new(target.rotated(angle), kp())).unwrap();
        let scale = sup_norm(&g);
        let (s, c) = angle.sin_cos();
        for (a, b) in g.iter().flatten().zip(gr.iter().flatten()) {
            let ra = Vec2::new(c * a.x - s * a.y, s * a.x + c * a.y);
            assert!((ra - b).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn zero_iterations_return_input() {
        let src = ellipse(32, Vec2::new(0.5, 0.5), Vec2::new(0.2, 0.15));
        let h0 = init_constant(&src, 4).unwrap();
        let cfg = OptimConfig { max_iters: 0, ..OptimConfig::default() };
        let spec = MetricSpec::bv2([1., 0., 1.], 1e-2).unwrap();
        let m = CurrentsMatch::new(&src.translated(Vec2::new(0.1, 0.0)), kp()).unwrap();
        let r = descend(&h0, &spec, &m, &cfg).unwrap();
        assert_eq!(r.homotopy, h0);
        assert_eq!(r.termination, Termination::MaxIters);
        assert_eq!(r.termination.as_str(), "max_iters");
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn quadratic_surrogate_converges() {
        let src = ellipse(24, Vec2::new(0.4, 0.5), Vec2::new(0.2, 0.15));
        let target = ellipse(24, Vec2::new(0.6, 0.5), Vec2::new(0.15, 0.2));
        let m = NodeL2 { target: target.clone() };
        let spec = MetricSpec::bv2([1e-6, 0., 1e-6], 1e-3).unwrap();
        let cfg = OptimConfig { max_iters: 5000, grad_tol: 1e-9, ..OptimConfig::default() };
        let r = descend(&init_constant(&src, 5).unwrap(), &spec, &m, &cfg).unwrap();
        let last = r.trace.last().unwrap();
        assert!(last.objective < 1e-8, "{last:?}");
        assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
        assert_eq!(r.homotopy.first(), &src);
        for (p, q) in r.homotopy.last().nodes().iter().zip(target.nodes()) {
            assert!((p - q).norm() < 1e-4);
        }
    }

    #[test]
    fn single_stage_continuation_equals_descend() {
        let src = ellipse(32, Vec2::new(0.45, 0.5), Vec2::new(0.2, 0.15));
        let m = CurrentsMatch::new(&src.translated(Vec2::new(0.08, 0.0)), kp()).unwrap();
        let spec = MetricSpec::bv2([1., 0., 1.], 1e-2).unwrap();
        let cfg = OptimConfig { max_iters: 30, eps_schedule: vec![1e-2], ..OptimConfig::default() };
        let h0 = init_constant(&src, 4).unwrap();
        let a = descend(&h0, &spec, &m, &cfg).unwrap();
        let b = continuation(&h0, &spec.with_eps(0.5), &m, &cfg).unwrap();
        assert_eq!(a.homotopy, b.homotopy);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn init_linear_examples() {
        let a = ellipse(16, Vec2::new(0.4, 0.5), Vec2::new(0.2, 0.15));
        let b = ellipse(16, Vec2::new(0.6, 0.5), Vec2::new(0.15, 0.2));
        let h = init_linear(&a, &b, 5).unwrap();
        assert_eq!(h.first(), &a);
        assert_eq!(h.last(), &b);
        for (m, (p, q)) in h.slice(2).nodes().iter().zip(a.nodes().iter().zip(b.nodes())) {
            assert!((m - (p + q) / 2.0).norm() < 1e-15);
        }
        let conv = crate::path::VelocityConvention::DifferenceQuotient;
        for k in 0..4 {
            let v = h.velocity(k, conv).unwrap();
            for (x, (p, q)) in v.coeffs().iter().zip(a.nodes().iter().zip(b.nodes())) {
                assert!((x - (q - p)).norm() < 1e-12);
            }
        }
        let tri = ellipse(3, Vec2::zeros(), Vec2::new(1., 1.));
        assert!(matches!(init_linear(&a, &tri, 5), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn init_constant_examples() {
        let a = ellipse(16, Vec2::new(0.4, 0.5), Vec2::new(0.2, 0.15));
        let h = init_constant(&a, 6).unwrap();
        assert!(h.slices().iter().all(|s| s == &a));
        let spec = MetricSpec::bv2([1., 1., 1.], 0.0).unwrap();
        assert_eq!(path::path_energy(&h, &spec).unwrap(), 0.0);
    }
}
