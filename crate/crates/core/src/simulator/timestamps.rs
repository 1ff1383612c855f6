//! Observation timestamps: even grids and resampled realistic days.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Pareto};

use crate::error::{Error, Result};

/// `m` evenly spaced timestamps `j / (m + 1)`, `j = 1..=m`.
pub fn even_timestamps(m: usize) -> Vec<f64> {
    (1..=m).map(|j| j as f64 / (m + 1) as f64).collect()
}

/// Gaussian kernel bandwidth by Silverman's rule of thumb,
/// `0.9 · min(sd, IQR / 1.34) · n^(-1/5)`.
pub fn silverman_bandwidth(sample: &[f64]) -> f64 {
    let n = sample.len();
    if n < 2 {
        return 0.05;
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return 1e-3,
    };
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Sorts, then nudges ties and clamps so the result is strictly increasing
/// inside `[0, 1]`.
pub fn make_strictly_increasing(t: &mut [f64]) {
    const NUDGE: f64 = 1e-9;
    t.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    t.sort_by(f64::total_cmp);
    for j in 1..t.len() {
        if t[j] <= t[j - 1] {
            t[j] = t[j - 1] + NUDGE;
        }
    }
    let m = t.len();
    for j in (0..m).rev() {
        let cap = 1.0 - (m - 1 - j) as f64 * NUDGE;
        if t[j] > cap {
            t[j] = cap;
        }
    }
}

/// Realistic timestamps: a reference day thinned uniformly to `m` points
/// when it is long enough, otherwise kept whole and topped up with draws
/// from its Gaussian kernel density estimate (draws outside `[0, 1]` are
/// redrawn).
pub fn realistic_timestamps<R: Rng + ?Sized>(reference: &[f64], m: usize, rng: &mut R) -> Result<Vec<f64>> {
    if reference.is_empty() {
        return Err(Error::Data("reference day has no timestamps".into()));
    }
    if m == 0 {
        return Err(Error::param("m", "must be positive"));
    }
    let mut out: Vec<f64> = if reference.len() >= m {
        index::sample(rng, reference.len(), m)
            .into_iter()
            .map(|i| reference[i])
            .collect()
    } else {
        let h = silverman_bandwidth(reference);
        let kernel = Normal::new(0.0, h).map_err(|e| Error::param("bandwidth", e.to_string()))?;
        let mut v = reference.to_vec();
        while v.len() < m {
            let centre = reference[rng.random_range(0..reference.len())];
            let x = centre + kernel.sample(rng);
            if (0.0..=1.0).contains(&x) {
                v.push(x);
            }
        }
        v
    };
    make_strictly_increasing(&mut out);
    Ok(out)
}

/// A pool of reference days to draw realistic timestamp patterns from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLibrary {
    pub days: Vec<Vec<f64>>,
    /// True for the built-in synthetic library.
    pub synthetic: bool,
}

impl ReferenceLibrary {
    pub fn from_days(days: Vec<Vec<f64>>) -> Result<Self> {
        let days: Vec<Vec<f64>> = days.into_iter().filter(|d| !d.is_empty()).collect();
        if days.is_empty() {
            return Err(Error::Data("reference library has no usable days".into()));
        }
        Ok(Self {
            days,
            synthetic: false,
        })
    }

    /// Synthetic phone-like sampling: most fixes fall in a daytime bulk, a
    /// few are spread through the night, and each day loses a handful of
    /// heavy-tailed stretches to signal gaps. Day sizes range over
    /// `[m/2, 3m/2]` so both thinning and augmentation occur.
    pub fn synthetic<R: Rng + ?Sized>(count: usize, m: usize, rng: &mut R) -> Self {
        let bulk = Normal::new(0.55, 0.15).expect("valid normal");
        let gap_len: Pareto<f64> = Pareto::new(0.01, 1.5).expect("valid pareto");
        let gap_count: Exp<f64> = Exp::new(0.5).expect("valid exponential");
        let lo = (m / 2).max(2);
        let hi = (3 * m / 2).max(lo + 1);
        let mut days = Vec::with_capacity(count);
        while days.len() < count {
            let size = rng.random_range(lo..=hi);
            let gaps: Vec<(f64, f64)> = (0..gap_count.sample(rng).round() as usize)
                .map(|_| {
                    let start = rng.random::<f64>();
                    (start, start + gap_len.sample(rng).min(0.2))
                })
                .collect();
            let mut t = Vec::with_capacity(size);
            let mut attempts = 0;
            while t.len() < size && attempts < size * 50 {
                attempts += 1;
                let x = if rng.random::<f64>() < 0.85 {
                    bulk.sample(rng)
                } else {
                    rng.random::<f64>()
                };
                if (0.0..=1.0).contains(&x) && !gaps.iter().any(|&(a, b)| x >= a && x < b) {
                    t.push(x);
                }
            }
            if t.len() >= 2 {
                make_strictly_increasing(&mut t);
                days.push(t);
            }
        }
        Self {
            days,
            synthetic: true,
        }
    }

    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &[f64] {
        &self.days[rng.random_range(0..self.days.len())]
    }
}
