//! Seeded synthetic inputs: smooth star-shaped curves, smooth fields and
//! random homotopies. Used by the test suites and by `check-grad`.

use rand::{Rng, SeedableRng};

use crate::curve::{PolyCurve, TangentField};
use crate::path::Homotopy;
use crate::Vec2;

const TAU: f64 = std::f64::consts::TAU;

/// Star-shaped curve around `(0.5, 0.5)` with a few random low harmonics and
/// jittered (but strictly increasing) node angles.
pub fn random_curve<R: Rng>(rng: &mut R, n: usize) -> PolyCurve {
    let r0 = rng.gen_range(0.2..0.35);
    let harmonics: Vec<(f64, f64)> = (1..=3).map(|_| (rng.gen_range(-0.12..0.12), rng.gen_range(0.0..TAU))).collect();
    let nodes = (0..n)
        .map(|j| {
            let theta = TAU * (j as f64 + rng.gen_range(-0.3..0.3)) / n as f64;
            let r = r0
                * (1.0
                    + harmonics
                        .iter()
                        .enumerate()
                        .map(|(k, (amp, phase))| amp * ((k as f64 + 1.0) * theta + phase).cos())
                        .sum::<f64>());
            Vec2::new(0.5 + r * theta.cos(), 0.5 + r * theta.sin())
        })
        .collect();
    PolyCurve::new(nodes).expect("generated curve is valid")
}

/// Smooth field made of a random constant plus three random harmonics in the
/// node index, with small per-node noise.
pub fn random_field<R: Rng>(rng: &mut R, n: usize, scale: f64) -> TangentField {
    let mut rv = |s: f64| Vec2::new(rng.gen_range(-s..s), rng.gen_range(-s..s));
    let offset = rv(1.0);
    let modes: Vec<(Vec2, Vec2)> = (0..3).map(|_| (rv(0.5), rv(0.5))).collect();
    let noise: Vec<Vec2> = (0..n).map(|_| rv(0.05)).collect();
    let coeffs = (0..n)
        .map(|j| {
            let theta = TAU * j as f64 / n as f64;
            let mut v = offset + noise[j];
            for (k, (a, b)) in modes.iter().enumerate() {
                let kf = (k + 1) as f64;
                v += a * (kf * theta).cos() + b * (kf * theta).sin();
            }
            v * scale
        })
        .collect();
    TangentField::new(coeffs)
}

/// Homotopy whose slice `i` is a random curve's nodes displaced by `i / (N-1)`
/// times a smooth random field, plus small per-slice wobble.
pub fn random_homotopy<R: Rng>(rng: &mut R, big_n: usize, n: usize) -> Homotopy {
    let base = random_curve(rng, n);
    let drift = random_field(rng, n, 0.1);
    let slices = (0..big_n)
        .map(|i| {
            let t = i as f64 / (big_n - 1) as f64;
            let wobble = random_field(rng, n, 0.01);
            let nodes = (0..n)
                .map(|j| base.nodes()[j] + t * drift.coeffs()[j] + if i == 0 { Vec2::zeros() } else { wobble.coeffs()[j] })
                .collect();
            PolyCurve::new(nodes).expect("generated slice is valid")
        })
        .collect();
    Homotopy::new(slices).expect("generated homotopy is valid")
}

/// Axis-aligned ellipse sampled uniformly in angle, counterclockwise.
pub fn ellipse(n: usize, center: Vec2, radii: Vec2) -> PolyCurve {
    let nodes = (0..n)
        .map(|j| {
            let a = TAU * j as f64 / n as f64;
            center + Vec2::new(radii.x * a.cos(), radii.y * a.sin())
        })
        .collect();
    PolyCurve::new(nodes).expect("ellipse with n >= 3 is valid")
}

/// Random homotopy with `big_n` slices of `n` nodes and an independent random
/// target curve, both drawn from one seeded generator.
pub fn random_problem(seed: u64, big_n: usize, n: usize) -> (Homotopy, PolyCurve) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = random_homotopy(&mut rng, big_n, n);
    let target = random_curve(&mut rng, n);
    (h, target)
}
