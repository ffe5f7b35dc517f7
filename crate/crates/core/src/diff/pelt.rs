//! Exact penalized segmentation with pruning, least-squares segment cost.

/// Minimum penalty per change point, in units of ln(n). MDR series of two deterministic
/// runs have no noise floor, so the variance-based penalty alone can be zero.
pub const PENALTY_FLOOR: f64 = 0.02;

/// Share of the series treated as the baseline window.
pub const BASELINE_FRACTION: f64 = 0.2;

/// Segment cost from prefix sums: sum of squared deviations from the segment mean.
pub struct SseCost {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl SseCost {
    pub fn new(x: &[f64]) -> Self {
        let mut s1 = Vec::with_capacity(x.len() + 1);
        let mut s2 = Vec::with_capacity(x.len() + 1);
        s1.push(0.0);
        s2.push(0.0);
        for v in x {
            s1.push(s1.last().unwrap() + v);
            s2.push(s2.last().unwrap() + v * v);
        }
        Self { s1, s2 }
    }

    /// Cost of samples `a..b`.
    pub fn cost(&self, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let sum = self.s1[b] - self.s1[a];
        let sq = self.s2[b] - self.s2[a];
        (sq - sum * sum / n).max(0.0)
    }
}

/// Indices where a new segment starts, ascending. Among equal-cost segmentations the one
/// with the earliest last change wins, recursively.
pub fn pelt(x: &[f64], penalty: f64) -> Vec<usize> {
    let n = x.len();
    if n < 2 {
        return Vec::new();
    }
    let cost = SseCost::new(x);
    let mut f = vec![0.0; n + 1];
    let mut last = vec![0usize; n + 1];
    f[0] = -penalty;
    let mut candidates: Vec<usize> = vec![0];
    for t in 1..=n {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for &tau in &candidates {
            let v = f[tau] + cost.cost(tau, t) + penalty;
            if v < best {
                best = v;
                arg = tau;
            }
        }
        f[t] = best;
        last[t] = arg;
        // A candidate that already loses by more than the penalty can never win later.
        // The slack keeps candidates that only lose to rounding.
        let slack = 1e-9 * (1.0 + best.abs());
        candidates.retain(|&tau| f[tau] + cost.cost(tau, t) <= best + slack);
        candidates.push(t);
    }
    backtrack(&last, n)
}

fn backtrack(last: &[usize], n: usize) -> Vec<usize> {
    let mut cps = Vec::new();
    let mut t = n;
    while last[t] > 0 {
        t = last[t];
        cps.push(t);
    }
    cps.reverse();
    cps
}

/// 2·var(baseline)·ln n, floored at `PENALTY_FLOOR`·ln n.
pub fn default_penalty(x: &[f64]) -> f64 {
    let n = x.len().max(2) as f64;
    let m = ((x.len() as f64 * BASELINE_FRACTION).ceil() as usize).clamp(2.min(x.len()), x.len());
    let base = &x[..m];
    let var = if base.is_empty() {
        0.0
    } else {
        let mean = base.iter().sum::<f64>() / base.len() as f64;
        base.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / base.len() as f64
    };
    (2.0 * var * n.ln()).max(PENALTY_FLOOR * n.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Unpruned optimal partitioning over all previous split points.
    fn optimal_partition(x: &[f64], penalty: f64) -> Vec<usize> {
        let n = x.len();
        if n < 2 {
            return Vec::new();
        }
        let cost = SseCost::new(x);
        let mut f = vec![0.0; n + 1];
        let mut last = vec![0usize; n + 1];
        f[0] = -penalty;
        for t in 1..=n {
            let (mut best, mut arg) = (f64::INFINITY, 0);
            for (tau, &ft) in f.iter().enumerate().take(t) {
                let v = ft + cost.cost(tau, t) + penalty;
                if v < best {
                    best = v;
                    arg = tau;
                }
            }
            f[t] = best;
            last[t] = arg;
        }
        backtrack(&last, n)
    }

    #[test]
    fn constant_series_has_no_change() {
        let x = vec![0.3; 120];
        assert!(pelt(&x, default_penalty(&x)).is_empty());
    }

    #[test]
    fn single_step() {
        let mut x = vec![0.0; 50];
        x.extend(vec![0.5; 50]);
        let cps = pelt(&x, default_penalty(&x));
        assert_eq!(cps.len(), 1);
        assert!((cps[0] as i64 - 50).abs() <= 1);
        assert_eq!(cps, optimal_partition(&x, default_penalty(&x)));
    }

    #[test]
    fn sse_cost_by_hand() {
        let c = SseCost::new(&[1.0, 2.0, 3.0, 10.0]);
        assert!((c.cost(0, 3) - 2.0).abs() < 1e-12);
        assert_eq!(c.cost(3, 4), 0.0);
    }

    proptest! {
        #[test]
        fn equals_exact_partition(
            x in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..1.0f64], 2..200),
            penalty in 0.01..5.0f64,
        ) {
            prop_assert_eq!(pelt(&x, penalty), optimal_partition(&x, penalty));
        }

        #[test]
        fn steps_with_noise(at in 40usize..160, h in 0.5..1.0f64, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..200)
                .map(|i| if i < at { 0.0 } else { h } + rng.gen_range(-0.02..0.02))
                .collect();
            let pen = default_penalty(&x);
            let cps = pelt(&x, pen);
            prop_assert_eq!(&cps, &optimal_partition(&x, pen));
            prop_assert!(cps.iter().any(|&c| (c as i64 - at as i64).abs() <= 1));
        }
    }
}
