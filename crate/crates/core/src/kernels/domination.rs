use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Marginal, ScalarFn};
use crate::error::{Error, Result};

/// Slack allowed for rounding when checking monotonicity on a grid.
pub const DOMINATION_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const DEFAULT_GRID_TAIL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    UserSupplied,
    BoundedVariationConstruction,
    Identity,
}

/// `f` dominated by `f_tilde`: both `f_tilde + f` and `f_tilde - f` are
/// nondecreasing.
#[derive(Clone)]
pub struct DominationPair {
    pub f: ScalarFn,
    pub f_tilde: ScalarFn,
    pub provenance: Provenance,
}

impl fmt::Debug for DominationPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DominationPair")
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl DominationPair {
    pub fn new(f: ScalarFn, f_tilde: ScalarFn, provenance: Provenance) -> Self {
        Self {
            f,
            f_tilde,
            provenance,
        }
    }

    /// A nondecreasing `f` dominates itself.
    pub fn identity(f: ScalarFn) -> Self {
        Self {
            f_tilde: Arc::clone(&f),
            f,
            provenance: Provenance::Identity,
        }
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidParameter(
            "domination grid needs at least 2 points".into(),
        ));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(
            "domination grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn nondecreasing_on<F: Fn(f64) -> f64>(f: F, grid: &[f64]) -> bool {
    grid.windows(2)
        .all(|w| f(w[1]) - f(w[0]) >= -DOMINATION_TOLERANCE)
}

/// Builds `f = U1 - U2` and `f_tilde = U1 + U2` from nondecreasing parts,
/// rejecting either part if it decreases somewhere on `grid`.
pub fn bv_domination(
    increasing: ScalarFn,
    decreasing_neg: ScalarFn,
    grid: &[f64],
) -> Result<DominationPair> {
    validate_grid(grid)?;
    if !nondecreasing_on(|x| increasing(x), grid) {
        return Err(Error::NotMonotone("increasing part U1".into()));
    }
    if !nondecreasing_on(|x| decreasing_neg(x), grid) {
        return Err(Error::NotMonotone("negative part U2".into()));
    }
    let (u1, u2) = (Arc::clone(&increasing), Arc::clone(&decreasing_neg));
    let f: ScalarFn = Arc::new(move |x| u1(x) - u2(x));
    let f_tilde: ScalarFn = Arc::new(move |x| increasing(x) + decreasing_neg(x));
    Ok(DominationPair::new(
        f,
        f_tilde,
        Provenance::BoundedVariationConstruction,
    ))
}

/// True iff `f_tilde + f` and `f_tilde - f` are nondecreasing along `grid`.
pub fn check_domination(pair: &DominationPair, grid: &[f64]) -> Result<bool> {
    validate_grid(grid)?;
    let (f, ft) = (&pair.f, &pair.f_tilde);
    Ok(nondecreasing_on(|x| ft(x) + f(x), grid) && nondecreasing_on(|x| ft(x) - f(x), grid))
}

/// Evenly spaced grid between the 0.0001 and 0.9999 quantiles of `marginal`.
pub fn default_grid(marginal: &Marginal) -> Result<Vec<f64>> {
    let lo = marginal.quantile(DEFAULT_GRID_TAIL);
    let hi = marginal.quantile(1.0 - DEFAULT_GRID_TAIL);
    if !(lo < hi) {
        return Err(Error::InvalidParameter(
            "marginal has no spread for a domination grid".into(),
        ));
    }
    let steps = (DEFAULT_GRID_POINTS - 1) as f64;
    Ok((0..DEFAULT_GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / steps)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{BuiltinKernel, SymmetricKernel};
    use proptest::prelude::*;

    fn linspace(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    fn pair(f: fn(f64) -> f64, ft: fn(f64) -> f64) -> DominationPair {
        DominationPair::new(Arc::new(f), Arc::new(ft), Provenance::UserSupplied)
    }

    #[test]
    fn sine_is_dominated_by_identity() {
        let grid = linspace(-10.0, 10.0, 0.01);
        assert!(check_domination(&pair(f64::sin, |x| x), &grid).unwrap());
    }

    #[test]
    fn square_is_not_dominated_by_identity() {
        let grid = linspace(0.0, 10.0, 0.01);
        assert!(!check_domination(&pair(|x| x * x, |x| x), &grid).unwrap());
    }

    #[test]
    fn identity_dominates_itself() {
        let grid = linspace(-3.0, 3.0, 0.5);
        assert!(check_domination(&DominationPair::identity(Arc::new(|x| x)), &grid).unwrap());
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        let p = pair(|x| x, |x| x);
        assert!(check_domination(&p, &[1.0]).is_err());
        assert!(check_domination(&p, &[1.0, 1.0]).is_err());
        assert!(check_domination(&p, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn bv_construction_examples() {
        let grid = linspace(-5.0, 5.0, 0.01);
        let monotone = bv_domination(Arc::new(|x| x), Arc::new(|_| 0.0), &grid).unwrap();
        assert_eq!((monotone.f)(1.5), 1.5);
        assert_eq!((monotone.f_tilde)(1.5), 1.5);

        let flipped = bv_domination(Arc::new(|_| 0.0), Arc::new(|x| x), &grid).unwrap();
        assert_eq!((flipped.f)(2.0), -2.0);
        assert_eq!((flipped.f_tilde)(2.0), 2.0);
        assert!(check_domination(&flipped, &grid).unwrap());

        assert!(bv_domination(Arc::new(|x| -x), Arc::new(|_| 0.0), &grid).is_err());
        assert!(bv_domination(Arc::new(|x| x), Arc::new(|x| x * x), &grid).is_err());
    }

    #[test]
    fn variance_rho1_construction_matches_closed_form_dominator() {
        // Standard normal: U1 = (x^2 1{x>=0} + 1)/2, U2 = -x^2 1{x<0}/2.
        let grid = linspace(-4.0, 4.0, 0.01);
        let u1: ScalarFn = Arc::new(|x| (if x >= 0.0 { x * x } else { 0.0 } + 1.0) / 2.0);
        let u2: ScalarFn = Arc::new(|x| if x < 0.0 { -x * x / 2.0 } else { 0.0 });
        let built = bv_domination(u1, u2, &grid).unwrap();
        let closed = |x: f64| {
            let pos = if x >= 0.0 { x * x } else { 0.0 };
            let neg = if x <= 0.0 { x * x } else { 0.0 };
            (pos + 1.0 - neg) / 2.0
        };
        let rho1 = SymmetricKernel::variance()
            .analytic_rho1(&Marginal::standard_normal())
            .unwrap();
        for &x in &grid {
            assert!(((built.f_tilde)(x) - closed(x)).abs() < 1e-14);
            assert!(((built.f)(x) - rho1(x)).abs() < 1e-14);
        }
        assert!(check_domination(&built, &grid).unwrap());
    }

    #[test]
    fn builtin_rho1_dominators_pass_on_default_grid() {
        for law in [
            Marginal::standard_normal(),
            Marginal::gaussian(-2.0, 0.5).unwrap(),
            Marginal::uniform(-1.0, 3.0).unwrap(),
        ] {
            let grid = default_grid(&law).unwrap();
            assert_eq!(grid.len(), DEFAULT_GRID_POINTS);
            for kind in BuiltinKernel::ALL {
                let pair = SymmetricKernel::builtin(kind)
                    .rho1_domination(&law)
                    .unwrap();
                assert!(
                    check_domination(&pair, &grid).unwrap(),
                    "{kind} under {law:?}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn accepted_pairs_bound_increments(a in -2.0f64..2.0, b in 0.0f64..3.0, slope in 0.0f64..4.0) {
            // f = a sin(b x) is dominated by c x once c >= |a b|.
            let c = (a * b).abs() + slope;
            let pair = DominationPair::new(
                Arc::new(move |x: f64| a * (b * x).sin()),
                Arc::new(move |x: f64| c * x),
                Provenance::UserSupplied,
            );
            let grid = linspace(-3.0, 3.0, 0.05);
            prop_assert!(check_domination(&pair, &grid).unwrap());
            for i in 0..grid.len() {
                for j in (i + 1)..grid.len() {
                    let (x, y) = (grid[i], grid[j]);
                    let df = ((pair.f)(y) - (pair.f)(x)).abs();
                    let dft = (pair.f_tilde)(y) - (pair.f_tilde)(x);
                    prop_assert!(df <= dft + 1e-9);
                }
            }
        }
    }
}
