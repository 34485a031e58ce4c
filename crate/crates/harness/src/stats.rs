use serde::{Deserialize, Serialize};

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let center = (phat + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Mean with a normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSummary {
    pub count: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MeanSummary {
    pub fn of(values: &[f64], z: f64) -> Self {
        let count = values.len();
        if count == 0 {
            return MeanSummary {
                count,
                mean: 0.0,
                ci_low: 0.0,
                ci_high: 0.0,
            };
        }
        let n = count as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if count > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let half = z * (var / n).sqrt();
        MeanSummary {
            count,
            mean,
            ci_low: mean - half,
            ci_high: mean + half,
        }
    }
}

/// Total-variation distance between the empirical distributions of two
/// samples of small integers.
pub fn total_variation(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let top = a.iter().chain(b).copied().max().unwrap_or(0);
    let hist = |xs: &[usize]| {
        let mut h = vec![0.0; top + 1];
        for &x in xs {
            h[x] += 1.0 / xs.len() as f64;
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}
