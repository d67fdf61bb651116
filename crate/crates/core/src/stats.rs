//! Summation and moment accumulation for large Monte Carlo samples.

/// Two-sided 90% normal quantile used for confidence intervals.
pub const Z_90: f64 = 1.6449;

const PAIRWISE_BASE: usize = 32;

/// Pairwise (cascade) summation; rounding error grows like `O(log n)`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BASE {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Count, mean and sum of squared deviations of a sample, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub sum_sq_dev: f64,
}

impl Moments {
    /// Two-pass moments of one block, both passes pairwise summed.
    pub fn from_block(values: &[f64], scratch: &mut Vec<f64>) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        scratch.clear();
        scratch.extend(values.iter().map(|v| (v - mean) * (v - mean)));
        Self {
            count: n as u64,
            mean,
            sum_sq_dev: pairwise_sum(scratch),
        }
    }

    /// Chan's update for the union of two disjoint samples.
    pub fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = self.count + other.count;
        let (na, nb, nf) = (self.count as f64, other.count as f64, n as f64);
        let delta = other.mean - self.mean;
        Self {
            count: n,
            mean: self.mean + delta * nb / nf,
            sum_sq_dev: self.sum_sq_dev + other.sum_sq_dev + delta * delta * na * nb / nf,
        }
    }

    /// Unbiased sample variance; NaN with fewer than two values.
    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.sum_sq_dev / (self.count - 1) as f64
        }
    }
}

/// Least-squares slope of `y` against `x`; `None` with fewer than two distinct `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
