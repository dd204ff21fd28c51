//! ε-insensitive support vector regression.
//!
//! The dual is solved with sequential minimal optimization over the 2n
//! variables (α, α*), using the maximal-violating-pair working set and the
//! analytic two-variable update with box clipping. Inputs are z-scored with
//! the training statistics; ε and the intercept are in target units (kW).

use serde::{Deserialize, Serialize};

use super::{Dataset, NormStats};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf,
    Polynomial,
}

impl std::str::FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "rbf" => Ok(Self::Rbf),
            "polynomial" | "poly" => Ok(Self::Polynomial),
            other => Err(Error::validation(format!("unknown kernel {other:?} (linear|rbf|polynomial)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    pub kernel: Kernel,
    pub c: f64,
    pub eps: f64,
    pub gamma: f64,
    pub degree: u32,
    /// Additive constant of the polynomial kernel.
    pub coef0: f64,
    /// Stopping threshold on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
    /// Recorded for provenance; the solver itself is deterministic.
    pub seed: u64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Rbf,
            c: 1.0,
            eps: 0.1,
            gamma: 0.5,
            degree: 3,
            coef0: 1.0,
            tol: 1e-6,
            max_iter: 1_000_000,
            seed: 0,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::validation(format!("C = {} must be positive", self.c)));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::validation(format!("eps = {} must be >= 0", self.eps)));
        }
        if self.kernel != Kernel::Linear && (!(self.gamma > 0.0) || !self.gamma.is_finite()) {
            return Err(Error::validation(format!("gamma = {} must be positive", self.gamma)));
        }
        if self.kernel == Kernel::Polynomial && self.degree == 0 {
            return Err(Error::validation("polynomial degree must be >= 1"));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::validation("solver tolerance and iteration cap must be positive"));
        }
        Ok(())
    }

    pub fn kernel_value(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let dot = a[0] * b[0] + a[1] * b[1];
        match self.kernel {
            Kernel::Linear => dot,
            Kernel::Rbf => {
                let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                (-self.gamma * d2).exp()
            }
            Kernel::Polynomial => (self.gamma * dot + self.coef0).powi(self.degree as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    /// Support vectors in normalized input space.
    pub support_vectors: Vec<[f64; 2]>,
    /// `α_i - α*_i`, each within `[-c, c]`.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub input_stats: NormStats,
    pub config: SvrConfig,
    pub iterations: usize,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
}

impl SvrModel {
    /// Decision value for an already-normalized input.
    pub fn decision(&self, z: [f64; 2]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, &b)| b * self.config.kernel_value(*sv, z))
            .sum::<f64>()
            + self.intercept
    }

    /// Linear kernel only: weights and intercept in raw input units.
    pub fn primal_coefficients(&self) -> Option<([f64; 2], f64)> {
        if self.config.kernel != Kernel::Linear {
            return None;
        }
        let mut w = [0.0; 2];
        for (sv, &b) in self.support_vectors.iter().zip(&self.coefficients) {
            w[0] += b * sv[0];
            w[1] += b * sv[1];
        }
        let s = &self.input_stats;
        let raw = [w[0] / s.feature_std[0], w[1] / s.feature_std[1]];
        let b = self.intercept - raw[0] * s.feature_mean[0] - raw[1] * s.feature_mean[1];
        Some((raw, b))
    }

    /// Primal objective `½‖w‖² + C Σ max(0, |y - f(x)| - ε)` on the given rows.
    pub fn training_objective(&self, xs: &[[f64; 2]], ys: &[f64]) -> f64 {
        let mut norm = 0.0;
        for (a, &ba) in self.support_vectors.iter().zip(&self.coefficients) {
            for (b, &bb) in self.support_vectors.iter().zip(&self.coefficients) {
                norm += ba * bb * self.config.kernel_value(*a, *b);
            }
        }
        let loss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| ((y - predict_svr(self, x)).abs() - self.config.eps).max(0.0))
            .sum();
        0.5 * norm + self.config.c * loss
    }
}

struct Smo<'a> {
    kernel: &'a [f64],
    n: usize,
    c: f64,
}

impl Smo<'_> {
    #[inline]
    fn sign(&self, s: usize) -> f64 {
        if s < self.n { 1.0 } else { -1.0 }
    }

    #[inline]
    fn q(&self, s: usize, t: usize) -> f64 {
        self.sign(s) * self.sign(t) * self.kernel[(s % self.n) * self.n + t % self.n]
    }
}

pub fn train_svr(data: &Dataset, cfg: &SvrConfig) -> Result<SvrModel> {
    cfg.validate()?;
    let stats = *data.stats();
    let xs: Vec<[f64; 2]> = data.train_rows().map(|r| stats.normalize(r.features())).collect();
    let ys: Vec<f64> = data.train_rows().map(|r| r.p).collect();
    let n = xs.len();
    if n < 2 {
        return Err(Error::validation(format!("SVR training needs at least 2 rows, got {n}")));
    }

    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = cfg.kernel_value(xs[i], xs[j]);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }
    let smo = Smo { kernel: &kernel, n, c: cfg.c };
    let m = 2 * n;
    let mut alpha = vec![0.0; m];
    // gradient of ½aᵀQa + pᵀa at a = 0
    let mut grad: Vec<f64> = (0..m).map(|s| if s < n { cfg.eps - ys[s] } else { cfg.eps + ys[s - n] }).collect();
    let at_upper = |a: f64| a >= smo.c;
    let at_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let (mut g_max, mut g_max2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..m {
            let (y, a) = (smo.sign(t), alpha[t]);
            let up = if y > 0.0 { !at_upper(a) } else { !at_lower(a) };
            if up && -y * grad[t] > g_max {
                g_max = -y * grad[t];
                i = t;
            }
            let low = if y > 0.0 { !at_lower(a) } else { !at_upper(a) };
            if low && y * grad[t] > g_max2 {
                g_max2 = y * grad[t];
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max + g_max2 < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let c = smo.c;
        if smo.sign(i) != smo.sign(j) {
            let mut quad = smo.q(i, i) + smo.q(j, j) + 2.0 * smo.q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = smo.q(i, i) + smo.q(j, j) - 2.0 * smo.q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        alpha[i] = alpha[i].clamp(0.0, c);
        alpha[j] = alpha[j].clamp(0.0, c);
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += smo.q(i, t) * di + smo.q(j, t) * dj;
        }
    }
    if !converged {
        log::warn!("SVR solver hit the iteration cap ({}) before tolerance {}", cfg.max_iter, cfg.tol);
    }

    // offset from free variables, midpoint of the feasible interval otherwise
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..m {
        let (y, a) = (smo.sign(t), alpha[t]);
        let yg = y * grad[t];
        if at_upper(a) {
            if y < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if at_lower(a) {
            if y > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free_sum += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 { free_sum / n_free as f64 } else { (ub + lb) / 2.0 };

    let beta: Vec<f64> = (0..n).map(|k| alpha[k] - alpha[k + n]).collect();
    let mut intercept = -rho;

    // With w fixed, any offset keeping every residual inside the tube is optimal;
    // move the solver's offset into that interval when it exists.
    let f0: Vec<f64> = (0..n).map(|k| (0..n).map(|j| beta[j] * kernel[j * n + k]).sum()).collect();
    let lo = (0..n).map(|k| ys[k] - f0[k] - cfg.eps).fold(f64::NEG_INFINITY, f64::max);
    let hi = (0..n).map(|k| ys[k] - f0[k] + cfg.eps).fold(f64::INFINITY, f64::min);
    if lo <= hi {
        intercept = intercept.clamp(lo, hi);
    }

    let (support_vectors, coefficients): (Vec<[f64; 2]>, Vec<f64>) =
        xs.iter().zip(&beta).filter(|(_, &b)| b != 0.0).map(|(x, &b)| (*x, b)).unzip();
    Ok(SvrModel {
        support_vectors,
        coefficients,
        intercept,
        input_stats: stats,
        config: cfg.clone(),
        iterations,
        converged,
    })
}

pub fn predict_svr(m: &SvrModel, x: [f64; 2]) -> f64 {
    m.decision(m.input_stats.normalize(x))
}
