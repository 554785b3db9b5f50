//! Complete U-statistics.
//!
//! [`u_statistic`] is the reference: it averages the kernel over every
//! `k`-subset of the sample. Subsets are grouped into slabs by their first
//! index; each slab is summed pairwise in lexicographic order and the slab
//! totals are summed pairwise in index order, so the value is bit-stable
//! regardless of how many threads run the slabs. Samples are sorted first,
//! which makes both methods exactly invariant under reordering the input.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{BuiltinKernel, SymmetricKernel};
use crate::summation::{pairwise_sum, PairwiseSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UStatMethod {
    Enumeration,
    FastPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UStatResult {
    pub value: f64,
    pub n: usize,
    pub kernel_id: String,
    pub method: UStatMethod,
}

/// Subsets below this count are enumerated on the calling thread.
const PARALLEL_THRESHOLD: f64 = 200_000.0;

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn slab_sum<F>(sample: &[f64], degree: usize, first: usize, f: &F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let n = sample.len();
    let mut acc = PairwiseSum::new();
    let mut push = |args: &[f64]| -> Result<()> {
        let v = f(args);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                index: first,
                value: v,
            });
        }
        acc.add(v);
        Ok(())
    };
    let x = sample[first];
    match degree {
        1 => push(&[x])?,
        2 => {
            for &y in &sample[first + 1..] {
                push(&[x, y])?;
            }
        }
        3 => {
            for j in first + 1..n {
                let y = sample[j];
                for &z in &sample[j + 1..] {
                    push(&[x, y, z])?;
                }
            }
        }
        d => return Err(Error::UnsupportedDegree(d)),
    }
    Ok(acc.total())
}

/// Average of `f` over all `degree`-subsets of `sample`, in index order.
pub fn subset_mean<F>(sample: &[f64], degree: usize, f: &F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let n = sample.len();
    if degree == 0 || degree > crate::kernels::MAX_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    if n < degree {
        return Err(Error::SampleTooSmall { n, degree });
    }
    let count = binomial(n, degree);
    let slabs = 0..=(n - degree);
    let slab_totals: Vec<f64> = if count > PARALLEL_THRESHOLD {
        slabs
            .into_par_iter()
            .map(|i| slab_sum(sample, degree, i, f))
            .collect::<Result<_>>()?
    } else {
        slabs
            .map(|i| slab_sum(sample, degree, i, f))
            .collect::<Result<_>>()?
    };
    Ok(pairwise_sum(&slab_totals) / count)
}

/// `U_n` by exact enumeration of all `k`-subsets.
pub fn u_statistic(sample: &[f64], kernel: &SymmetricKernel) -> Result<UStatResult> {
    ensure_finite(sample)?;
    let eval = kernel.eval_fn();
    let value = subset_mean(&sorted(sample), kernel.degree(), &*eval)?;
    Ok(UStatResult {
        value,
        n: sample.len(),
        kernel_id: kernel.id().to_string(),
        method: UStatMethod::Enumeration,
    })
}

/// `U_n` for a builtin kernel in O(n) from centered power sums.
pub fn u_statistic_fast(sample: &[f64], kernel_id: &str) -> Result<UStatResult> {
    let kind: BuiltinKernel = kernel_id.parse()?;
    let value = fast_value(sample, kind)?;
    Ok(UStatResult {
        value,
        n: sample.len(),
        kernel_id: kind.id().to_string(),
        method: UStatMethod::FastPath,
    })
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub(crate) fn fast_value(sample: &[f64], kind: BuiltinKernel) -> Result<f64> {
    ensure_finite(sample)?;
    let sample = &sorted(sample)[..];
    let n = sample.len();
    let degree = kind.degree();
    if n < degree {
        return Err(Error::SampleTooSmall { n, degree });
    }
    let nf = n as f64;
    let mean = pairwise_sum(sample) / nf;
    let centered_power = |p: i32| {
        let mut acc = PairwiseSum::new();
        acc.extend(sample.iter().map(|x| (x - mean).powi(p)));
        acc.total()
    };
    Ok(match kind {
        BuiltinKernel::Mean => mean,
        BuiltinKernel::Variance => centered_power(2) / (nf - 1.0),
        // ((sum x)^2 - sum x^2) / (n(n-1)) rewritten around the mean.
        BuiltinKernel::SquaredMean => mean * mean - centered_power(2) / (nf * (nf - 1.0)),
        BuiltinKernel::ThirdMoment => nf / ((nf - 1.0) * (nf - 2.0)) * centered_power(3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn enumeration_examples() {
        let s = [1.0, 2.0, 3.0];
        assert_eq!(
            u_statistic(&s, &SymmetricKernel::variance()).unwrap().value,
            1.0
        );
        let sm = u_statistic(&s, &SymmetricKernel::squared_mean())
            .unwrap()
            .value;
        assert!((sm - 11.0 / 3.0).abs() < 1e-15);
        for kind in [BuiltinKernel::Variance, BuiltinKernel::ThirdMoment] {
            let k = SymmetricKernel::builtin(kind);
            assert_eq!(u_statistic(&[4.2; 7], &k).unwrap().value, 0.0);
        }
    }

    #[test]
    fn fast_path_examples() {
        assert_eq!(
            u_statistic_fast(&[1.0, 2.0, 3.0], "variance")
                .unwrap()
                .value,
            1.0
        );
        assert_eq!(
            u_statistic_fast(&[1.0, 2.0, 3.0], "third_moment")
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            u_statistic_fast(&[2.0, 2.0], "squared_mean").unwrap().value,
            4.0
        );
        let r = u_statistic_fast(&[1.0, 2.0], "mean").unwrap();
        assert_eq!((r.value, r.method), (1.5, UStatMethod::FastPath));
    }

    #[test]
    fn errors() {
        let k = SymmetricKernel::third_moment();
        assert!(matches!(
            u_statistic(&[1.0, 2.0], &k),
            Err(Error::SampleTooSmall { n: 2, degree: 3 })
        ));
        assert!(matches!(
            u_statistic_fast(&[1.0], "variance"),
            Err(Error::SampleTooSmall { .. })
        ));
        assert!(matches!(
            u_statistic_fast(&[1.0, 2.0], "median"),
            Err(Error::UnknownKernel(_))
        ));
        assert!(matches!(
            u_statistic(&[1.0, f64::NAN], &SymmetricKernel::variance()),
            Err(Error::NonFinite { index: 1, .. })
        ));
        let blowup = SymmetricKernel::custom("ratio", 2, |a| 1.0 / (a[0] - a[1])).unwrap();
        assert!(matches!(
            u_statistic(&[1.0, 1.0, 2.0], &blowup),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn parallel_and_sequential_slabs_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sample: Vec<f64> = (0..120).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = SymmetricKernel::third_moment();
        let eval = k.eval_fn();
        // 120 choose 3 exceeds the threshold, so this runs in parallel.
        let par = subset_mean(&sample, 3, &*eval).unwrap();
        let seq: Vec<f64> = (0..=117)
            .map(|i| slab_sum(&sample, 3, i, &*eval).unwrap())
            .collect();
        assert_eq!(
            par.to_bits(),
            (pairwise_sum(&seq) / binomial(120, 3)).to_bits()
        );
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(200, 3), 1_313_400.0);
        assert_eq!(binomial(2, 3), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn permutation_leaves_value_unchanged(seed in any::<u64>(), n in 3usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sample: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut shuffled = sample.clone();
            rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut rng);
            for kind in [BuiltinKernel::Variance, BuiltinKernel::SquaredMean, BuiltinKernel::ThirdMoment] {
                let k = SymmetricKernel::builtin(kind);
                let a = u_statistic(&sample, &k).unwrap().value;
                let b = u_statistic(&shuffled, &k).unwrap().value;
                prop_assert_eq!(a.to_bits(), b.to_bits());
                let fa = fast_value(&sample, kind).unwrap();
                let fb = fast_value(&shuffled, kind).unwrap();
                prop_assert_eq!(fa.to_bits(), fb.to_bits());
            }
        }

        #[test]
        fn variance_is_shift_invariant(seed in any::<u64>(), n in 2usize..60, c in -50.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sample: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let shifted: Vec<f64> = sample.iter().map(|x| x + c).collect();
            let k = SymmetricKernel::variance();
            let a = u_statistic(&sample, &k).unwrap().value;
            let b = u_statistic(&shifted, &k).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-3));
        }
    }
}
