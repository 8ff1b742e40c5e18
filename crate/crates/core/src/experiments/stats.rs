//! Small statistics toolkit: moments, least squares with confidence
//! intervals, normality and two-sample tests, and the between-bin variance
//! estimator used for the single-site conditional mean.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn std_error(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(x: &[f64]) -> Summary {
    Summary {
        count: x.len(),
        mean: mean(x),
        variance: variance(x),
        std_error: std_error(x),
        median: median(x),
        min: x.iter().copied().fold(f64::INFINITY, f64::min),
        max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Two-sided Student-t quantile for confidence `level` and `dof` degrees of freedom.
pub fn t_quantile(level: f64, dof: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    t.inverse_cdf(0.5 + level / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Coefficients in the order of the regressor columns (intercept first).
    pub coef: Vec<f64>,
    pub std_err: Vec<f64>,
    pub rss: f64,
    pub r2: f64,
    pub dof: usize,
}

impl LinearFit {
    /// Confidence interval for coefficient `k`.
    pub fn ci(&self, k: usize, level: f64) -> (f64, f64) {
        let q = t_quantile(level, self.dof as f64);
        (self.coef[k] - q * self.std_err[k], self.coef[k] + q * self.std_err[k])
    }
}

/// Ordinary least squares of `y` on the columns of `x` (an intercept is added).
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let n = y.len();
    let p = x.len() + 1;
    if n <= p || x.iter().any(|c| c.len() != n) {
        return Err(Error::InsufficientData(format!("{n} points for {p} coefficients")));
    }
    let col = |k: usize, i: usize| if k == 0 { 1.0 } else { x[k - 1][i] };
    let design = DMatrix::from_fn(n, p, |i, k| col(k, i));
    let xtx = design.transpose() * &design;
    let scale = xtx.amax();
    let inv = xtx
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()) && m.amax() * scale < 1e12)
        .ok_or_else(|| Error::InsufficientData("regressors are collinear".into()))?;
    let coef: Vec<f64> = (&inv * design.transpose() * DVector::from_column_slice(y)).iter().copied().collect();
    let fitted = |i: usize| (0..p).map(|a| coef[a] * col(a, i)).sum::<f64>();
    let rss: f64 = (0..n).map(|i| (y[i] - fitted(i)).powi(2)).sum();
    let ym = mean(y);
    let tss: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let dof = n - p;
    let sigma2 = rss / dof as f64;
    let std_err = (0..p).map(|a| (sigma2 * inv[(a, a)]).sqrt()).collect();
    Ok(LinearFit {
        coef,
        std_err,
        rss,
        r2: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
        dof,
    })
}

/// Slope fit of `log y` on `log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points, need at least 3", x.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InsufficientData("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols(&[lx], &ly)
}

/// Anderson–Darling statistic `A*²` for normality with estimated mean and
/// variance, including the small-sample correction.
pub fn anderson_darling(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!("{n} samples, need at least 8")));
    }
    let m = mean(x);
    let sd = variance(x).sqrt();
    if !(sd > 0.0) {
        return Err(Error::InsufficientData("zero sample variance".into()));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let mut z: Vec<f64> = x.iter().map(|v| (v - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let lo = std.cdf(z[i]).clamp(1e-300, 1.0 - 1e-16);
        let hi = std.cdf(z[n - 1 - i]).clamp(1e-300, 1.0 - 1e-16);
        s += (2.0 * i as f64 + 1.0) * (lo.ln() + (1.0 - hi).ln());
    }
    let a2 = -nf - s / nf;
    Ok(a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf)))
}

/// 5% critical value of the corrected statistic.
pub const AD_CRITICAL_5: f64 = 0.752;

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinVariance {
    pub bins: usize,
    /// Variance of the bin means around the grand mean (no correction).
    pub raw: f64,
    /// Between-bin variance component with the within-bin noise removed.
    pub estimate: f64,
    /// Leave-one-out jackknife standard error of `estimate`.
    pub std_error: f64,
}

fn between_bin_component(key: &[f64], y: &[f64], bins: usize) -> (f64, f64) {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    let r = y.len();
    let groups: Vec<Vec<f64>> = (0..bins)
        .map(|b| order[b * r / bins..(b + 1) * r / bins].iter().map(|&i| y[i]).collect())
        .collect();
    let grand = mean(y);
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let raw = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum::<f64>()
        / r as f64;
    let msb = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum::<f64>()
        / (bins - 1) as f64;
    let msw = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (r - bins) as f64;
    let n0 = (r as f64 - groups.iter().map(|g| (g.len() * g.len()) as f64).sum::<f64>() / r as f64)
        / (bins - 1) as f64;
    (raw, (msb - msw) / n0)
}

/// `Var(E[y | key])` estimated from `bins` quantile bins of `key`.
pub fn binned_conditional_variance(key: &[f64], y: &[f64], bins: usize) -> Result<BinVariance> {
    let r = y.len();
    if key.len() != r {
        return Err(Error::Mismatch("key and response lengths differ".into()));
    }
    if bins < 2 || r < 2 * bins + 1 {
        return Err(Error::InsufficientData(format!("{r} samples for {bins} bins")));
    }
    let (raw, estimate) = between_bin_component(key, y, bins);
    let mut loo = Vec::with_capacity(r);
    for k in 0..r {
        let kk: Vec<f64> = key.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| *v).collect();
        let yy: Vec<f64> = y.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| *v).collect();
        loo.push(between_bin_component(&kk, &yy, bins).1);
    }
    let lm = mean(&loo);
    let jk = (r - 1) as f64 / r as f64 * loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>();
    Ok(BinVariance {
        bins,
        raw,
        estimate,
        std_error: jk.sqrt(),
    })
}
