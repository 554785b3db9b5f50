//! Order-fixed pairwise summation.
//!
//! Terms are combined as a balanced binary tree in arrival order, so the
//! result depends only on the sequence of terms and not on how the caller
//! batches them. Error grows as O(log n) rather than O(n).

/// Streaming pairwise accumulator. `levels[i]` holds the sum of a complete
/// block of `2^i` terms awaiting its sibling.
#[derive(Debug, Default, Clone)]
pub struct PairwiseSum {
    levels: Vec<Option<f64>>,
    count: u64,
}

impl PairwiseSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut value: f64) {
        self.count += 1;
        let mut level = 0;
        loop {
            if level == self.levels.len() {
                self.levels.push(Some(value));
                return;
            }
            match self.levels[level].take() {
                Some(left) => {
                    value += left;
                    level += 1;
                }
                None => {
                    self.levels[level] = Some(value);
                    return;
                }
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Folds the pending partial sums from the smallest block upwards.
    pub fn total(&self) -> f64 {
        self.levels.iter().flatten().fold(0.0, |acc, &v| v + acc)
    }
}

impl Extend<f64> for PairwiseSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    let mut acc = PairwiseSum::new();
    acc.extend(values.iter().copied());
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_exact_integer_sums() {
        let values: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&values), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.5]), 3.5);
    }

    #[test]
    fn beats_naive_summation_on_small_increments() {
        let values = vec![0.1; 1_000_000];
        let naive: f64 = values.iter().sum();
        let pairwise = pairwise_sum(&values);
        assert!((pairwise - 100_000.0).abs() < (naive - 100_000.0).abs());
        assert!((pairwise - 100_000.0).abs() < 1e-8);
    }
}
