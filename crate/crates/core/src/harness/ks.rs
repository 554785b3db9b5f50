use statrs::function::erf::erfc;

use crate::error::{ensure_finite, Error, Result};

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Sup-distance between the empirical CDF of `sample` and the standard
/// normal CDF, evaluated on both sides of every jump.
pub fn ks_distance(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidParameter(
            "KS distance of an empty sample".into(),
        ));
    }
    ensure_finite(sample)?;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = standard_normal_cdf(x);
            let above = (i + 1) as f64 / r - cdf;
            let below = cdf - i as f64 / r;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assocgen::{generate, ProcessSpec, SeedSpec};
    use crate::kernels::Marginal;

    #[test]
    fn quantile_sample_is_half_a_step_away() {
        let r = 1000;
        let law = Marginal::standard_normal();
        let sample: Vec<f64> = (1..=r)
            .map(|i| law.quantile((i as f64 - 0.5) / r as f64))
            .collect();
        let d = ks_distance(&sample).unwrap();
        assert!((d - 0.5 / r as f64).abs() < 1e-9, "{d}");
    }

    #[test]
    fn all_zero_sample() {
        assert!((ks_distance(&[0.0; 100]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn seeded_normal_draws() {
        let x = generate(
            &ProcessSpec::iid_standard_normal(),
            100_000,
            SeedSpec::new(31, 0),
        )
        .unwrap();
        let d = ks_distance(&x).unwrap();
        assert!(d < 0.006, "{d}");
        assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn rejects_empty_or_non_finite() {
        assert!(ks_distance(&[]).is_err());
        assert!(ks_distance(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn cdf_values() {
        assert_eq!(standard_normal_cdf(0.0), 0.5);
        assert!((standard_normal_cdf(1.959_963_985) - 0.975).abs() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn distance_is_a_probability_and_order_free(
            mut values in proptest::collection::vec(-50.0f64..50.0, 1..200),
        ) {
            let d = ks_distance(&values).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&d));
            proptest::prop_assert!(d >= 0.5 / values.len() as f64 - 1e-12);
            values.reverse();
            proptest::prop_assert_eq!(ks_distance(&values).unwrap().to_bits(), d.to_bits());
        }
    }
}
