//! Seeded Gaussian point clouds and their distance matrices.
//!
//! The generator is SplitMix64: each draw adds `0x9E3779B97F4A7C15` to the
//! 64-bit state and returns the state mixed by
//! `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//! `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`
//! (wrapping arithmetic), starting from `state = seed`. A draw `x` maps to the
//! open unit interval as `u = ((x >> 11) + 0.5) / 2^53`. Normals come in
//! pairs from two consecutive uniforms by Box–Muller:
//! `r = sqrt(-2 ln u1)`, `z1 = r cos(2π u2)`, `z2 = r sin(2π u2)`, used in
//! that order.
//!
//! A cloud pair of size `n` consumes `6n` normals: the source cloud's points
//! first, coordinates `x, y, z` per point, then the target cloud's, whose
//! points are shifted by [`TARGET_MEAN`]. Trial `t` of an experiment with
//! seed `s` uses the `(t+1)`-th SplitMix64 output of state `s` as its own seed.

use qap_exact::Matrix;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

pub const TARGET_MEAN: [f64; 3] = [4.0, 4.0, 4.0];

/// Standard normal variates by Box–Muller over SplitMix64.
pub struct GaussianStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            rng: SplitMix64::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (u1, u2) = (self.uniform(), self.uniform());
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn next_point(&mut self, mean: [f64; 3]) -> [f64; 3] {
        mean.map(|m| m + self.next_normal())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloudPair {
    pub seed: u64,
    pub source: Vec<[f64; 3]>,
    pub target: Vec<[f64; 3]>,
    /// Distances within `source`.
    pub c: Matrix,
    /// Distances within `target`.
    pub d: Matrix,
}

pub fn distance_matrix(points: &[[f64; 3]]) -> Matrix {
    let n = points.len();
    Matrix::from_fn(n, n, |i, j| {
        let (p, q) = (points[i], points[j]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    })
}

pub fn sample_point_clouds(n: usize, seed: u64) -> PointCloudPair {
    let mut g = GaussianStream::new(seed);
    let source: Vec<_> = (0..n).map(|_| g.next_point([0.0; 3])).collect();
    let target: Vec<_> = (0..n).map(|_| g.next_point(TARGET_MEAN)).collect();
    PointCloudPair {
        seed,
        c: distance_matrix(&source),
        d: distance_matrix(&target),
        source,
        target,
    }
}

/// Per-trial seeds derived from one experiment seed.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..trials).map(|_| rng.next_u64()).collect()
}
