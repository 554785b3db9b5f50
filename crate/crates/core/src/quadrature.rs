//! Gauss-Hermite rules for expectations under Gaussian laws.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss-Hermite rule normalized for the standard normal density:
/// `E f(Z) ≈ Σ w_i f(z_i)` with `Σ w_i = 1`, exact for polynomials of degree
/// below `2 * nodes.len()`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub const DEFAULT_POINTS: usize = 64;

impl GaussHermite {
    /// Roots of the physicists' Hermite polynomial by Newton iteration on the
    /// orthonormal recurrence, then rescaled to the probabilists' convention.
    pub fn new(points: usize) -> Self {
        assert!(points >= 1, "at least one quadrature node");
        let n = points;
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let half = n.div_ceil(2);
        let mut z = 0.0_f64;
        for i in 0..half {
            z = match i {
                0 => {
                    let m = (2 * n + 1) as f64;
                    m.sqrt() - 1.85575 * m.powf(-0.16667)
                }
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let previous = z;
                z = previous - p1 / pp;
                if (z - previous).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let sqrt_pi = PI.sqrt();
        let nodes = x.iter().rev().map(|v| v * 2f64.sqrt()).collect();
        let weights = w.iter().rev().map(|v| v / sqrt_pi).collect();
        Self { nodes, weights }
    }

    pub fn standard() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(DEFAULT_POINTS))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E f(X)` for `X ~ N(mean, var)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, mean: f64, var: f64, f: F) -> f64 {
        let sd = var.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(mean + sd * z))
            .sum()
    }

    /// `Cov(f(X), g(Y))` for a bivariate normal pair with common `mean`,
    /// `var` and correlation `corr`. Centering happens inside the sum.
    pub fn bivariate_cov<F, G>(&self, mean: f64, var: f64, corr: f64, f: F, g: G) -> f64
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let sd = var.sqrt();
        let ef = self.expect(mean, var, &f);
        let eg = self.expect(mean, var, &g);
        let resid = (1.0 - corr * corr).max(0.0).sqrt();
        let mut total = 0.0;
        for (za, wa) in self.nodes.iter().zip(&self.weights) {
            let fa = f(mean + sd * za) - ef;
            if fa == 0.0 {
                continue;
            }
            let inner: f64 = self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(zb, wb)| wb * (g(mean + sd * (corr * za + resid * zb)) - eg))
                .sum();
            total += wa * fa * inner;
        }
        total
    }
}

/// Composite Simpson rule for `E f(X)`, `X ~ Uniform(low, high)`.
pub fn uniform_expect<F: Fn(f64) -> f64>(low: f64, high: f64, intervals: usize, f: F) -> f64 {
    let m = intervals + intervals % 2;
    let h = (high - low) / m as f64;
    let mut total = f(low) + f(high);
    for i in 1..m {
        let coef = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += coef * f(low + i as f64 * h);
    }
    total * h / 3.0 / (high - low)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_normal_moments() {
        let rule = GaussHermite::standard();
        let sum: f64 = rule.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-13);
        for (power, moment) in [
            (1, 0.0),
            (2, 1.0),
            (3, 0.0),
            (4, 3.0),
            (6, 15.0),
            (8, 105.0),
        ] {
            let got = rule.expect(0.0, 1.0, |z| z.powi(power));
            assert!((got - moment).abs() < 1e-9, "E Z^{power} = {got}");
        }
    }

    #[test]
    fn small_rules_are_exact_to_their_degree() {
        let rule = GaussHermite::new(3);
        assert!((rule.expect(0.0, 1.0, |z| z.powi(4)) - 3.0).abs() < 1e-12);
        let rule = GaussHermite::new(5);
        assert!((rule.expect(2.0, 4.0, |x| x * x) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn isserlis_identity_for_squares() {
        // Cov(X^2, Y^2) = 2 Cov(X, Y)^2 for centered Gaussians.
        let rule = GaussHermite::standard();
        for corr in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let cov = rule.bivariate_cov(0.0, 1.0, corr, |x| x * x, |y| y * y);
            assert!(
                (cov - 2.0 * corr * corr).abs() < 1e-10,
                "corr {corr}: {cov}"
            );
        }
    }

    #[test]
    fn folded_normal_covariance() {
        // E|X||Y| = (2/pi)(sqrt(1 - r^2) + r asin r) for standard normals. The
        // kink at zero limits polynomial quadrature to about 1e-3.
        let rule = GaussHermite::new(128);
        let r: f64 = 0.6;
        let expected = 2.0 / PI * ((1.0 - r * r).sqrt() + r * r.asin()) - 2.0 / PI;
        let got = rule.bivariate_cov(0.0, 1.0, r, f64::abs, f64::abs);
        assert!((got - expected).abs() < 1e-3, "{got} vs {expected}");
    }

    #[test]
    fn simpson_uniform_moments() {
        let got = uniform_expect(-1.0, 3.0, 200, |x| x * x);
        assert!((got - 7.0 / 3.0).abs() < 1e-12);
    }
}
