//! Batch-means summaries for simulation output series.

/// 97.5% quantile of Student's t with 19 degrees of freedom, for a 95%
/// confidence interval over 20 batch means.
const T_975_DF19: f64 = 2.093;
const BATCHES: usize = 20;

/// Mean and 95% batch-means confidence half-width of an observation series
/// (completion order). With fewer observations than batches the half-width
/// is reported as infinite.
pub(crate) fn mean_and_ci(values: &[f64]) -> (u64, f64, f64) {
    let count = values.len() as u64;
    if values.is_empty() {
        return (0, 0.0, f64::INFINITY);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < BATCHES {
        return (count, mean, f64::INFINITY);
    }
    let batch_size = values.len() / BATCHES;
    let used = batch_size * BATCHES;
    let batch_means: Vec<f64> = (0..BATCHES)
        .map(|b| {
            let slice = &values[b * batch_size..(b + 1) * batch_size];
            slice.iter().sum::<f64>() / batch_size as f64
        })
        .collect();
    let grand = batch_means.iter().sum::<f64>() / BATCHES as f64;
    let var = batch_means
        .iter()
        .map(|m| (m - grand) * (m - grand))
        .sum::<f64>()
        / (BATCHES as f64 - 1.0);
    let half = T_975_DF19 * (var / BATCHES as f64).sqrt();
    let _ = used; // trailing remainder contributes to the mean, not the CI
    (count, mean, half)
}

/// Running min/mean/max summary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RangeStat {
    pub count: u64,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
}

impl RangeStat {
    pub fn new() -> Self {
        Self {
            count: 0,
            sum: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_width() {
        let values = vec![2.5; 200];
        let (count, mean, half) = mean_and_ci(&values);
        assert_eq!(count, 200);
        assert_eq!(mean, 2.5);
        assert_eq!(half, 0.0);
    }

    #[test]
    fn short_series_reports_infinite_width() {
        let (_, mean, half) = mean_and_ci(&[1.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert!(half.is_infinite());
    }
}
