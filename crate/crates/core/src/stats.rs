//! Small sample-statistics helpers shared by the Monte-Carlo estimators.

/// Number of batches used for every batch-means standard error.
pub const BATCHES: usize = 20;

/// Sample mean and its standard error `sd / sqrt(len)`.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Splits `total` into `parts` sizes that differ by at most one.
pub fn split_counts(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// A Monte-Carlo estimate with its batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_batches(batch_values: &[f64]) -> Self {
        let (value, se) = mean_se(batch_values);
        Estimate { value, se }
    }

    /// True if `value <= bound + slack * se`.
    pub fn at_most(&self, bound: f64, slack: f64) -> bool {
        self.value <= bound + slack * self.se
    }

    /// True if `|value - target| <= slack * se`.
    pub fn near(&self, target: f64, slack: f64) -> bool {
        (self.value - target).abs() <= slack * self.se
    }
}

/// Runs `work` once per batch, in parallel, on child stream `b` of `stream`
/// with batch size from [`split_counts`]. Results come back in batch order,
/// so the reduction is deterministic.
pub fn run_batches<T, F>(stream: &crate::rng::RandomStream, total: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut crate::rng::RandomStream, usize) -> T + Sync,
{
    use rayon::prelude::*;
    split_counts(total, BATCHES)
        .into_par_iter()
        .enumerate()
        .map(|(b, count)| {
            let mut s = stream.child(b as u64);
            work(&mut s, count)
        })
        .collect()
}
