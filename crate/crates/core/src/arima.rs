//! ARIMA(p, d, q) by conditional sum of squares.
//!
//! The series is differenced `d` times, an intercept is removed, and the
//! innovations are recovered with the recursion
//!
//! ```text
//! u_t = w_t - Σ φ_i w_{t-i} - Σ θ_j u_{t-j},   w_t = y_t - μ
//! ```
//!
//! with pre-sample `w` and `u` set to zero. Coefficients are found by
//! Nelder–Mead on the residual sum of squares; parameter sets whose AR or MA
//! polynomial has a root within modulus 1.001 are rejected.
//!
//! AIC values of fits with different `d` are compared directly although each
//! is computed on its own differenced sample; this matches common library
//! behaviour but is not a like-for-like likelihood comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optim::{nelder_mead, NelderMeadOptions};

/// Roots of the AR and MA polynomials must lie outside this modulus.
pub const ROOT_MARGIN: f64 = 1.001;
pub const MAX_ITER: usize = 500;
/// Innovation variance never drops below this, so a perfectly fitted
/// constant window still has a finite likelihood.
pub const SIGMA2_FLOOR: f64 = 1e-12;

pub const MAX_P: usize = 3;
pub const MAX_D: usize = 2;
pub const MAX_Q: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArimaError {
    #[error("series of length {len} too short for ARIMA{order}; need {needed}")]
    TooShort { len: usize, needed: usize, order: ArimaOrder },
    #[error("order ({p},{d},{q}) outside supported bounds")]
    Order { p: usize, d: usize, q: usize },
    #[error("no order in the search grid could be fitted")]
    NoFeasibleOrder,
    #[error("series contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

impl ArimaOrder {
    /// Any order with `p, q <= 3` and `d <= 2`, including the degenerate
    /// `p = 0` / `q = 0` forms used for baselines.
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self, ArimaError> {
        if p > MAX_P || d > MAX_D || q > MAX_Q {
            return Err(ArimaError::Order { p, d, q });
        }
        Ok(Self { p, d, q })
    }

    /// The 27-order search grid `p, q ∈ {1,2,3}`, `d ∈ {0,1,2}`.
    pub fn search_grid() -> Vec<ArimaOrder> {
        let mut grid = Vec::with_capacity(27);
        for p in 1..=3 {
            for d in 0..=2 {
                for q in 1..=3 {
                    grid.push(ArimaOrder { p, d, q });
                }
            }
        }
        grid
    }

    /// Shortest input accepted by [`fit`].
    pub fn min_len(&self) -> usize {
        (3 * (self.p + self.q) + self.d).max(self.d + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub intercept: bool,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            intercept: true,
            max_iter: MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    /// Mean of the differenced series.
    pub intercept: f64,
    pub has_intercept: bool,
    pub log_likelihood: f64,
    pub aic: f64,
    /// Length of the differenced sample.
    pub n_obs: usize,
    /// False when the optimiser hit its iteration cap.
    pub converged: bool,
    pub iterations: usize,
}

impl ArimaFit {
    /// Number of estimated parameters: AR and MA terms, intercept, variance.
    pub fn n_params(&self) -> usize {
        self.order.p + self.order.q + usize::from(self.has_intercept) + 1
    }
}

/// Applies `(1 - B)` `d` times.
pub fn difference(x: &[f64], d: usize) -> Result<Vec<f64>, ArimaError> {
    if x.len() <= d {
        return Err(ArimaError::TooShort {
            len: x.len(),
            needed: d + 1,
            order: ArimaOrder { p: 0, d, q: 0 },
        });
    }
    let mut out = x.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// First value of each differencing level `0..d`, needed to undo
/// [`difference`].
pub fn difference_heads(x: &[f64], d: usize) -> Vec<f64> {
    let mut heads = Vec::with_capacity(d);
    let mut level = x.to_vec();
    for _ in 0..d {
        heads.push(level[0]);
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    heads
}

/// Inverse of [`difference`] given the heads from [`difference_heads`].
pub fn integrate(y: &[f64], heads: &[f64]) -> Vec<f64> {
    let mut level = y.to_vec();
    for &head in heads.iter().rev() {
        let mut up = Vec::with_capacity(level.len() + 1);
        up.push(head);
        for dv in &level {
            let last = *up.last().unwrap();
            up.push(last + dv);
        }
        level = up;
    }
    level
}

/// True when `1 - Σ a_k z^k` has every root outside modulus `margin`.
///
/// Uses the step-down (reverse Levinson) recursion on the scaled
/// coefficients `a_k * margin^k`: the polynomial is stable exactly when every
/// reflection coefficient has magnitude below one.
pub fn roots_outside(a: &[f64], margin: f64) -> bool {
    let mut cur: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(k, c)| c * margin.powi(k as i32 + 1))
        .collect();
    while let Some(&kappa) = cur.last() {
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return false;
        }
        let m = cur.len();
        let denom = 1.0 - kappa * kappa;
        let next: Vec<f64> = (0..m - 1).map(|k| (cur[k] + kappa * cur[m - 2 - k]) / denom).collect();
        cur = next;
    }
    true
}

fn admissible(phi: &[f64], theta: &[f64]) -> bool {
    let ma_as_ar: Vec<f64> = theta.iter().map(|t| -t).collect();
    roots_outside(phi, ROOT_MARGIN) && roots_outside(&ma_as_ar, ROOT_MARGIN)
}

/// Innovations of the differenced series `y` under the given parameters.
pub fn css_residuals(y: &[f64], phi: &[f64], theta: &[f64], mu: f64) -> Vec<f64> {
    let mut u = vec![0.0; y.len()];
    for t in 0..y.len() {
        let mut e = y[t] - mu;
        for (i, p) in phi.iter().enumerate() {
            if t > i {
                e -= p * (y[t - i - 1] - mu);
            }
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                e -= th * u[t - j - 1];
            }
        }
        u[t] = e;
    }
    u
}

fn css(y: &[f64], phi: &[f64], theta: &[f64], mu: f64) -> f64 {
    css_residuals(y, phi, theta, mu).iter().map(|e| e * e).sum()
}

/// Gaussian log-likelihood concentrated on `σ² = SSE / n`.
pub fn concentrated_log_likelihood(sse: f64, n: usize) -> (f64, f64) {
    let sigma2 = (sse / n as f64).max(SIGMA2_FLOOR);
    let ll = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    (ll, sigma2)
}

pub fn fit(x: &[f64], order: ArimaOrder) -> Result<ArimaFit, ArimaError> {
    fit_with(x, order, FitOptions::default())
}

pub fn fit_with(x: &[f64], order: ArimaOrder, opts: FitOptions) -> Result<ArimaFit, ArimaError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::NonFinite);
    }
    if x.len() < order.min_len() {
        return Err(ArimaError::TooShort {
            len: x.len(),
            needed: order.min_len(),
            order,
        });
    }
    let y = difference(x, order.d)?;
    let n = y.len();
    let (p, q) = (order.p, order.q);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let y_sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();

    let unpack = |v: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let mu = if opts.intercept { v[p + q] } else { 0.0 };
        (v[..p].to_vec(), v[p..p + q].to_vec(), mu)
    };
    let objective = |v: &[f64]| {
        let (phi, theta, mu) = unpack(v);
        if !admissible(&phi, &theta) {
            return f64::INFINITY;
        }
        css(&y, &phi, &theta, mu)
    };

    let mut x0 = vec![0.0; p + q];
    let mut steps = vec![0.1; p + q];
    if opts.intercept {
        x0.push(y_mean);
        steps.push(0.1 * y_sd.max(1e-3));
    }
    let min = nelder_mead(
        objective,
        &x0,
        &steps,
        NelderMeadOptions {
            max_iter: opts.max_iter,
            ..Default::default()
        },
    );
    if !min.converged {
        log::debug!("ARIMA{order} stopped at the iteration cap");
    }
    let (phi, theta, mu) = unpack(&[min.x.as_slice(), &[0.0]].concat());
    let (log_likelihood, sigma2) = concentrated_log_likelihood(min.f, n);
    let mut out = ArimaFit {
        order,
        phi,
        theta,
        sigma2,
        intercept: mu,
        has_intercept: opts.intercept,
        log_likelihood,
        aic: 0.0,
        n_obs: n,
        converged: min.converged,
        iterations: min.iterations,
    };
    out.aic = 2.0 * out.n_params() as f64 - 2.0 * log_likelihood;
    Ok(out)
}

/// Ordering used to pick among candidate fits: lower AIC, then smaller
/// `p + d + q`, then lexicographic order.
pub fn selection_cmp(a: &ArimaFit, b: &ArimaFit) -> std::cmp::Ordering {
    let size = |o: &ArimaOrder| o.p + o.d + o.q;
    a.aic
        .total_cmp(&b.aic)
        .then_with(|| size(&a.order).cmp(&size(&b.order)))
        .then_with(|| a.order.cmp(&b.order))
}

/// Fits every order of `grid` (in parallel) and returns the preferred fit.
/// Orders too long for `x` are skipped.
pub fn select_order_from(x: &[f64], grid: &[ArimaOrder], opts: FitOptions) -> Result<ArimaFit, ArimaError> {
    grid.par_iter()
        .filter_map(|o| fit_with(x, *o, opts).ok())
        .filter(|f| f.aic.is_finite())
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(selection_cmp)
        .ok_or(ArimaError::NoFeasibleOrder)
}

/// Minimum-AIC fit over the 27-order search grid.
pub fn select_order(x: &[f64]) -> Result<ArimaFit, ArimaError> {
    select_order_from(x, &ArimaOrder::search_grid(), FitOptions::default())
}

/// `horizon`-step forecast continuing `x` with future innovations set to zero.
pub fn forecast(fit: &ArimaFit, x: &[f64], horizon: usize) -> Result<Vec<f64>, ArimaError> {
    let d = fit.order.d;
    let y = difference(x, d)?;
    let mu = fit.intercept;
    let u = css_residuals(&y, &fit.phi, &fit.theta, mu);
    let n = y.len();
    let mut w: Vec<f64> = y.iter().map(|v| v - mu).collect();
    let mut uu = u;
    for t in n..n + horizon {
        let mut next = 0.0;
        for (i, p) in fit.phi.iter().enumerate() {
            if t > i {
                next += p * w[t - i - 1];
            }
        }
        for (j, th) in fit.theta.iter().enumerate() {
            if t > j {
                next += th * uu[t - j - 1];
            }
        }
        w.push(next);
        uu.push(0.0);
    }
    let future_y: Vec<f64> = w[n..].iter().map(|v| v + mu).collect();
    if d == 0 {
        return Ok(future_y);
    }
    // last value of each differencing level 0..d
    let mut tails = Vec::with_capacity(d);
    let mut level = x.to_vec();
    for _ in 0..d {
        tails.push(*level.last().unwrap());
        level = level.windows(2).map(|s| s[1] - s[0]).collect();
    }
    let mut out = future_y;
    for &tail in tails.iter().rev() {
        let mut acc = tail;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    Ok(out)
}
