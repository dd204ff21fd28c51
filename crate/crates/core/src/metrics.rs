//! Agreement statistics between measured and predicted power.
//!
//! All standard deviations are population (1/N) deviations, which makes
//! `rmse² = sigma² + me²` an identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default limits-of-agreement multiplier.
pub const DEFAULT_K: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    /// Mean of `meas - pred`.
    pub me: T,
    pub mse: T,
    pub rmse: T,
    /// `None` when the measured series has zero variance.
    pub r2: Option<T>,
    /// Population standard deviation of `meas - pred`.
    pub sigma: T,
    pub mae: T,
    pub percent_within_eps: T,
    pub n: usize,
    pub eps_used: T,
    /// Mean of `pred - meas`, i.e. `-me`.
    pub mu: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanReport<T> {
    /// Mean of `pred - meas`.
    pub mean_diff: T,
    pub sd_diff: T,
    pub loa_low: T,
    pub loa_high: T,
    pub k: T,
    pub percent_within: T,
    /// (average of the pair, pred - meas) for each sample.
    pub pairs: Vec<(T, T)>,
}

fn check_pair<T: Real>(meas: &[T], pred: &[T], min_len: usize) -> Result<()> {
    if meas.len() != pred.len() {
        return Err(Error::validation(format!(
            "series lengths differ: {} measured vs {} predicted",
            meas.len(),
            pred.len()
        )));
    }
    if meas.len() < min_len {
        return Err(Error::validation(format!("need at least {min_len} samples, got {}", meas.len())));
    }
    if meas.iter().chain(pred).any(|x| !x.is_finite()) {
        return Err(Error::validation("series contain non-finite values"));
    }
    Ok(())
}

fn mean<T: Real>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_usize(xs.len()).expect("length representable")
}

/// Population mean and standard deviation.
fn mean_sd<T: Real>(xs: &[T]) -> (T, T) {
    let m = mean(xs);
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_usize(xs.len()).expect("length");
    (m, var.sqrt())
}

pub fn compute_metrics<T: Real>(meas: &[T], pred: &[T], eps: T) -> Result<MetricsReport<T>> {
    check_pair(meas, pred, 1)?;
    let n = meas.len();
    let nt = T::from_usize(n).expect("length representable");
    let resid: Vec<T> = meas.iter().zip(pred).map(|(&m, &p)| m - p).collect();

    let (me, sigma) = mean_sd(&resid);
    let sse = resid.iter().map(|&r| r * r).sum::<T>();
    let mse = sse / nt;
    let mae = resid.iter().map(|r| r.abs()).sum::<T>() / nt;
    let within = resid.iter().filter(|r| r.abs() <= eps).count();
    let percent_within_eps = T::lit(100.0) * T::from_usize(within).expect("count") / nt;

    let meas_mean = mean(meas);
    let sst = meas.iter().map(|&m| (m - meas_mean) * (m - meas_mean)).sum::<T>();
    let r2 = (sst > T::zero()).then(|| T::one() - sse / sst);

    Ok(MetricsReport { me, mse, rmse: mse.sqrt(), r2, sigma, mae, percent_within_eps, n, eps_used: eps, mu: T::zero() - me })
}

pub fn bland_altman<T: Real>(meas: &[T], pred: &[T], k: T) -> Result<BlandAltmanReport<T>> {
    check_pair(meas, pred, 2)?;
    if !(k > T::zero()) {
        return Err(Error::validation(format!("limits multiplier k = {k} must be positive")));
    }
    let diffs: Vec<T> = meas.iter().zip(pred).map(|(&m, &p)| p - m).collect();
    let (mean_diff, sd_diff) = mean_sd(&diffs);
    let half_width = k * sd_diff;
    let within = diffs.iter().filter(|&&d| (d - mean_diff).abs() <= half_width).count();
    let percent_within = T::lit(100.0) * T::from_usize(within).expect("count") / T::from_usize(diffs.len()).expect("len");
    let two = T::lit(2.0);
    let pairs = meas.iter().zip(pred).zip(&diffs).map(|((&m, &p), &d)| ((m + p) / two, d)).collect();
    Ok(BlandAltmanReport {
        mean_diff,
        sd_diff,
        loa_low: mean_diff - half_width,
        loa_high: mean_diff + half_width,
        k,
        percent_within,
        pairs,
    })
}
