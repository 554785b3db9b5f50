//! Monte Carlo for the Brownian covariance functional
//! `int_0^1 Cov(|W(1)|, |W(1+t) - W(t)|) dt`, whose value is
//! `(3 pi - 8) / (4 pi)` for standard Brownian motion.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assocgen::SeedSpec;
use crate::error::{Error, Result};

pub const MIN_PATHS: usize = 10_000;
pub const MAX_GRID_STEP: f64 = 1e-3;
pub const DEFAULT_GRID_STEP: f64 = 5e-4;
const PATHS_PER_TASK: usize = 250;

/// `(3 pi - 8) / (4 pi)`.
pub fn wiener_constant_exact() -> f64 {
    (3.0 * PI - 8.0) / (4.0 * PI)
}

/// Standard Brownian path sampled on a uniform grid of `[0, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerPath {
    pub grid_step: f64,
    pub values: Vec<f64>,
}

fn steps_per_unit(grid_step: f64) -> Result<usize> {
    let m = (1.0 / grid_step).round();
    if !(grid_step > 0.0) || (m * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "grid step {grid_step} must divide 1"
        )));
    }
    Ok(m as usize)
}

impl WienerPath {
    /// Exact Gaussian increments, `W(0) = 0`.
    pub fn simulate<R: Rng + ?Sized>(grid_step: f64, rng: &mut R) -> Result<Self> {
        let m = steps_per_unit(grid_step)?;
        let mut values = vec![0.0; 2 * m + 1];
        fill_path(&mut values, grid_step.sqrt(), rng);
        Ok(Self { grid_step, values })
    }

    pub fn at_step(&self, i: usize) -> f64 {
        self.values[i]
    }
}

fn fill_path<R: Rng + ?Sized>(values: &mut [f64], scale: f64, rng: &mut R) {
    values[0] = 0.0;
    for i in 1..values.len() {
        let z: f64 = StandardNormal.sample(rng);
        values[i] = values[i - 1] + scale * z;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerEstimate {
    pub value: f64,
    pub std_error: f64,
    pub paths: usize,
    pub grid_step: f64,
    /// `(t, Cov(|W(1)|, |W(1+t) - W(t)|))` on the quadrature grid.
    pub cov_curve: Vec<(f64, f64)>,
}

#[derive(Clone)]
struct Accumulator {
    count: f64,
    // Moments of (a, b) = (|W(1)| - c, int_0^1 |W(1+t) - W(t)| dt - c).
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
    aab: f64,
    abb: f64,
    aabb: f64,
    curve_b: Vec<f64>,
    curve_ab: Vec<f64>,
}

impl Accumulator {
    fn new(points: usize) -> Self {
        Self {
            count: 0.0,
            a: 0.0,
            b: 0.0,
            aa: 0.0,
            bb: 0.0,
            ab: 0.0,
            aab: 0.0,
            abb: 0.0,
            aabb: 0.0,
            curve_b: vec![0.0; points],
            curve_ab: vec![0.0; points],
        }
    }

    fn merge(mut self, other: &Accumulator) -> Self {
        self.count += other.count;
        self.a += other.a;
        self.b += other.b;
        self.aa += other.aa;
        self.bb += other.bb;
        self.ab += other.ab;
        self.aab += other.aab;
        self.abb += other.abb;
        self.aabb += other.aabb;
        for (x, y) in self.curve_b.iter_mut().zip(&other.curve_b) {
            *x += y;
        }
        for (x, y) in self.curve_ab.iter_mut().zip(&other.curve_ab) {
            *x += y;
        }
        self
    }
}

/// Estimates `int_0^1 Cov(|W(1)|, |W(1+t) - W(t)|) dt` from `paths` Brownian
/// paths on `[0, 2]`, with trapezoidal quadrature over `t` on the path grid.
/// Paths are simulated in fixed batches, each on its own stream, and
/// reduced in batch order.
pub fn wiener_constant_mc(paths: usize, grid_step: f64, seed: SeedSpec) -> Result<WienerEstimate> {
    if paths < MIN_PATHS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_PATHS} paths, got {paths}"
        )));
    }
    if grid_step > MAX_GRID_STEP {
        return Err(Error::InvalidParameter(format!(
            "grid step {grid_step} exceeds {MAX_GRID_STEP}"
        )));
    }
    let m = steps_per_unit(grid_step)?;
    let scale = grid_step.sqrt();
    // Pre-centering constant E|N(0,1)| keeps the raw moments well conditioned.
    let center = (2.0 / PI).sqrt();
    let tasks = paths.div_ceil(PATHS_PER_TASK);
    let partials: Vec<Accumulator> = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut rng = seed.offset(task as u64).rng();
            let mut acc = Accumulator::new(m + 1);
            let mut w = vec![0.0; 2 * m + 1];
            let mut gaps = vec![0.0; m + 1];
            let count = PATHS_PER_TASK.min(paths - task * PATHS_PER_TASK);
            for _ in 0..count {
                fill_path(&mut w, scale, &mut rng);
                let a_raw = w[m].abs();
                for (s, g) in gaps.iter_mut().enumerate() {
                    *g = (w[m + s] - w[s]).abs();
                }
                let interior: f64 = gaps[1..m].iter().sum();
                let integral = grid_step * (0.5 * (gaps[0] + gaps[m]) + interior);
                let (a, b) = (a_raw - center, integral - center);
                acc.count += 1.0;
                acc.a += a;
                acc.b += b;
                acc.aa += a * a;
                acc.bb += b * b;
                acc.ab += a * b;
                acc.aab += a * a * b;
                acc.abb += a * b * b;
                acc.aabb += a * a * b * b;
                for (s, &g) in gaps.iter().enumerate() {
                    acc.curve_b[s] += g;
                    acc.curve_ab[s] += a_raw * g;
                }
            }
            acc
        })
        .collect();
    let total = partials
        .iter()
        .fold(Accumulator::new(m + 1), |acc, p| acc.merge(p));

    let n = total.count;
    let (ma, mb) = (total.a / n, total.b / n);
    let cov = (total.ab / n - ma * mb) * n / (n - 1.0);
    // Fourth central co-moment E[(a - ma)^2 (b - mb)^2] from raw sums.
    let m22 = total.aabb / n - 2.0 * mb * total.aab / n - 2.0 * ma * total.abb / n
        + mb * mb * total.aa / n
        + ma * ma * total.bb / n
        + 4.0 * ma * mb * total.ab / n
        - 3.0 * ma * ma * mb * mb;
    let std_error = ((m22 - cov * cov).max(0.0) / n).sqrt();

    let mean_a = ma + center;
    let cov_curve = (0..=m)
        .map(|s| {
            let t = s as f64 * grid_step;
            let mb_s = total.curve_b[s] / n;
            (t, total.curve_ab[s] / n - mean_a * mb_s)
        })
        .collect();
    Ok(WienerEstimate {
        value: cov,
        std_error,
        paths,
        grid_step,
        cov_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_constant() {
        assert!((wiener_constant_exact() - 0.113_380_23).abs() < 1e-8);
        // Closed form of the integrand: (2/pi)(sqrt(1-r^2) + r asin r - 1), r = 1 - t.
        let steps = 200_000;
        let h = 1.0 / steps as f64;
        let integrand = |r: f64| 2.0 / PI * ((1.0 - r * r).max(0.0).sqrt() + r * r.asin() - 1.0);
        let mid: f64 = (0..steps)
            .map(|i| integrand((i as f64 + 0.5) * h))
            .sum::<f64>()
            * h;
        assert!((mid - wiener_constant_exact()).abs() < 1e-8);
    }

    #[test]
    fn path_starts_at_zero_with_independent_increments() {
        let mut rng = SeedSpec::new(4, 0).rng();
        let reps = 4000;
        let (mut s1, mut s2, mut s12) = (0.0, 0.0, 0.0);
        for _ in 0..reps {
            let p = WienerPath::simulate(1e-2, &mut rng).unwrap();
            assert_eq!(p.values[0], 0.0);
            assert_eq!(p.values.len(), 201);
            let d1 = p.at_step(100) - p.at_step(0);
            let d2 = p.at_step(200) - p.at_step(100);
            s1 += d1;
            s2 += d2;
            s12 += d1 * d2;
        }
        let r = reps as f64;
        let cov = s12 / r - (s1 / r) * (s2 / r);
        assert!(cov.abs() < 4.0 / r.sqrt(), "{cov}");
    }

    #[test]
    fn curve_endpoints() {
        let est = wiener_constant_mc(20_000, 1e-3, SeedSpec::new(8, 0)).unwrap();
        let (t0, c0) = est.cov_curve[0];
        let (t1, c1) = *est.cov_curve.last().unwrap();
        assert_eq!((t0, t1), (0.0, 1.0));
        // Var|W(1)| = 1 - 2/pi at t = 0; independent increments at t = 1.
        let se = (2.0f64 / 20_000.0).sqrt();
        assert!((c0 - (1.0 - 2.0 / PI)).abs() < 4.0 * se, "{c0}");
        assert!(c1.abs() < 4.0 * 0.6 / 20_000f64.sqrt(), "{c1}");
        assert!((est.value - wiener_constant_exact()).abs() < 4.0 * est.std_error + 1e-3);
    }

    #[test]
    fn preconditions() {
        assert!(wiener_constant_mc(100, 1e-3, SeedSpec::default()).is_err());
        assert!(wiener_constant_mc(20_000, 1e-2, SeedSpec::default()).is_err());
        assert!(wiener_constant_mc(20_000, 3e-4, SeedSpec::default()).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let a = wiener_constant_mc(10_000, 1e-3, SeedSpec::new(1, 2)).unwrap();
        let b = wiener_constant_mc(10_000, 1e-3, SeedSpec::new(1, 2)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
