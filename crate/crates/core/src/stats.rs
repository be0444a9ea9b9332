//! Small statistics toolkit: reference laws, total variation on a truncated
//! support, batch standard errors and correlations.

use crate::measures::ln_poisson;

/// Law of a single-site marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SiteLaw {
    Poisson(f64),
    Bernoulli(f64),
}

impl SiteLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            SiteLaw::Poisson(m) | SiteLaw::Bernoulli(m) => m,
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match *self {
            SiteLaw::Poisson(m) => ln_poisson(k, m).exp(),
            SiteLaw::Bernoulli(p) => match k {
                0 => 1.0 - p,
                1 => p,
                _ => 0.0,
            },
        }
    }

    /// Cells used for the total-variation comparison: `(width, last_start)`.
    ///
    /// The support is capped at mean+10√mean with the tail folded into the last
    /// cell. Poisson laws with mean above 16 are also grouped into cells of
    /// width ⌈√mean/4⌉, which keeps the empirical bias of the distance well
    /// below the thresholds at the replica counts used here.
    fn cells(&self) -> (u64, u64) {
        match *self {
            SiteLaw::Bernoulli(_) => (1, 1),
            SiteLaw::Poisson(m) => {
                let cap = (m + 10.0 * m.sqrt()).ceil().max(1.0) as u64;
                let width = if m > 16.0 { (m.sqrt() / 4.0).ceil() as u64 } else { 1 };
                (width, cap / width * width)
            }
        }
    }
}

/// Total-variation distance between the empirical law of `samples` and `law`.
pub fn tv_distance(samples: &[u64], law: SiteLaw) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let (width, last) = law.cells();
    let ncells = (last / width + 1) as usize;
    let mut counts = vec![0u64; ncells];
    for &s in samples {
        let c = (s.min(last) / width) as usize;
        counts[c] += 1;
    }
    let mut probs = vec![0.0; ncells];
    let mut acc = 0.0;
    for (c, p) in probs.iter_mut().enumerate().take(ncells - 1) {
        let lo = c as u64 * width;
        *p = (lo..lo + width).map(|k| law.pmf(k)).sum();
        acc += *p;
    }
    probs[ncells - 1] = (1.0 - acc).max(0.0);
    let n = samples.len() as f64;
    0.5 * counts.iter().zip(&probs).map(|(&c, &p)| (c as f64 / n - p).abs()).sum::<f64>()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Number of batches used for standard errors.
pub const BATCHES: usize = 10;

/// Splits `len` items into [`BATCHES`] contiguous ranges of near-equal size.
pub fn batch_ranges(len: usize) -> Vec<std::ops::Range<usize>> {
    (0..BATCHES).map(|b| b * len / BATCHES..(b + 1) * len / BATCHES).collect()
}

/// Overall value of `stat` and its batch standard error sd(batch values)/√B.
pub fn batch_estimate(v: &[f64], stat: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let per: Vec<f64> = batch_ranges(v.len()).into_iter().map(|r| stat(&v[r])).collect();
    (stat(v), (variance(&per) / BATCHES as f64).sqrt())
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}
