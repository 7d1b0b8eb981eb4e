//! Small statistical toolkit: summaries, least-squares slopes, and the
//! Kolmogorov-Smirnov and chi-square goodness-of-fit tests used by the
//! experiments.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Summary {
    pub fn ci99(&self) -> (f64, f64) {
        (self.mean - Z99 * self.stderr, self.mean + Z99 * self.stderr)
    }
}

/// Mean and standard error of the mean, accumulated in slice order.
pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { mean: f64::NAN, stderr: f64::NAN, count: 0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Summary { mean, stderr: (var / n as f64).sqrt(), count: n }
}

/// Binomial proportion estimate with its standard error `sqrt(p(1-p)/n)`.
pub fn proportion(hits: u64, trials: u64) -> Summary {
    let p = hits as f64 / trials as f64;
    Summary { mean: p, stderr: (p * (1.0 - p) / trials as f64).sqrt(), count: trials as usize }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("least squares needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("degenerate abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Survival function of the limiting Kolmogorov distribution,
/// `P(K > lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // the alternating series converges too slowly here; use the theta-dual form
        let mut cdf = 0.0;
        for k in 1..=50 {
            let t = (2 * k - 1) as f64 * std::f64::consts::PI / lambda;
            cdf += (-t * t / 8.0).exp();
        }
        return 1.0 - cdf * (2.0 * std::f64::consts::PI).sqrt() / lambda;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Effective sample size (`n` or `nm/(n+m)`).
    pub effective_n: f64,
    pub p_value: f64,
}

impl KsResult {
    fn new(statistic: f64, effective_n: f64) -> Self {
        let root = effective_n.sqrt();
        // Stephens' small-sample correction
        let lambda = (root + 0.12 + 0.11 / root) * statistic;
        Self { statistic, effective_n, p_value: kolmogorov_sf(lambda) }
    }

    /// Critical value of the statistic at the given level (asymptotic form).
    pub fn critical_value(&self, level: f64) -> f64 {
        ks_critical_value(self.effective_n, level)
    }

    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Critical value `c(level)/sqrt(n)` of the KS statistic, with the Kolmogorov
/// quantile found by bisection.
pub fn ks_critical_value(effective_n: f64, level: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = effective_n.sqrt();
    0.5 * (lo + hi) / (root + 0.12 + 0.11 / root)
}

/// One-sample KS test of `data` against a continuous CDF. Sorts `data`.
pub fn ks_one_sample(data: &mut [f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if data.is_empty() {
        return Err(Error::invalid("KS test on empty sample"));
    }
    if data.iter().any(|v| v.is_nan()) {
        return Err(Error::NumericDomain("NaN in KS sample".into()));
    }
    data.sort_by(f64::total_cmp);
    let n = data.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in data.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult::new(d, n))
}

/// Two-sample KS test. Sorts both inputs.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS test on empty sample"));
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult::new(d, ne))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit. Cells with expected count below
/// `min_expected` are pooled into their right neighbour (the last cell pools
/// leftwards). `fitted_params` reduces the degrees of freedom.
pub fn chi_square_gof(
    observed: &[f64],
    expected: &[f64],
    fitted_params: usize,
    min_expected: f64,
) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::invalid("observed/expected length mismatch"));
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= min_expected {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => cells.push((o_acc, e_acc)),
        }
    }
    let dof = cells.len().saturating_sub(1 + fitted_params);
    if dof == 0 {
        return Err(Error::invalid("chi-square test has no degrees of freedom left"));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::NumericDomain(e.to_string()))?;
    Ok(ChiSquareResult { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}
