//! Small internal estimators shared by the annealing and counterexample
//! drivers. Batch means absorb autocorrelation that a naive iid standard
//! error would understate.

/// Sample mean; 0 for an empty slice.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and a batch-means standard error of the mean. The series is split
/// into `batches` contiguous blocks (clamped so each block holds at least two
/// points); the spread of block means estimates the error including serial
/// correlation up to the block length. Below four points the error is the
/// plain iid estimate.
pub(crate) fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 4 {
        if n < 2 {
            return (m, 0.0);
        }
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        return (m, (var / n as f64).sqrt());
    }
    let b = batches.clamp(2, n / 2);
    let size = n / b;
    let block_means: Vec<f64> = (0..b)
        .map(|i| mean(&xs[i * size..(i + 1) * size]))
        .collect();
    let bm = mean(&block_means);
    let var = block_means
        .iter()
        .map(|x| (x - bm) * (x - bm))
        .sum::<f64>()
        / (b - 1) as f64;
    (m, (var / b as f64).sqrt())
}

/// Standard deviation across a set of values (e.g. per-chain means).
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
