//! Compensated summation for long, skewed binomial-weighted sums.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Computes `Σ weights[k] * f(k)`, visiting terms from the heaviest weight
/// down so the dominant mass is accumulated first.
///
/// Zero weights are skipped without evaluating `f`, which keeps degenerate
/// terms (e.g. `0 * log 0`) out of the sum. Ties are broken by index so the
/// visiting order, and hence the result, is fully deterministic.
pub fn weighted_sum<F>(weights: &[f64], mut f: F) -> f64
where
    F: FnMut(usize) -> f64,
{
    let mut order: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut acc = CompensatedSum::new();
    for k in order {
        acc.add(weights[k] * f(k));
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        let acc: CompensatedSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn weighted_sum_skips_zero_weights() {
        let w = [0.0, 0.5, 0.5];
        let s = weighted_sum(&w, |k| if k == 0 { f64::NAN } else { k as f64 });
        assert_eq!(s, 1.5);
    }
}
