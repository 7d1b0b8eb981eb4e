//! Exact samplers for the stationary Ornstein-Uhlenbeck process and for the
//! limit field `U(u, t) = beta(u, e^{2t}) e^{-t}` built from a Brownian sheet.

use serde::Serialize;

use crate::dynwalk::FieldSample;
use crate::error::{Error, Result};
use crate::randvar::{bivariate_upper, normal_quantile, phi_bar};
use crate::replicate::{replicate, ReplicationPlan};
use crate::rng::RngStream;
use crate::set_geometry::{kolmogorov_entropy, CompactSet1D};
use crate::stats::{ks_one_sample, proportion, KsResult, Z99};

#[inline]
fn normal(rng: &mut RngStream) -> f64 {
    normal_quantile(rng.uniform())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceRule {
    /// `e^{-|t_i - t_j|}`
    Ou,
    /// `e^{-|t_i - t_j|} min(u_i, u_j)`
    Field,
}

/// Index points of a centered Gaussian vector and its covariance rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianVectorSpec {
    /// `(u, t)` pairs; `u = 1` throughout for the OU rule.
    points: Vec<(f64, f64)>,
    rule: CovarianceRule,
}

impl GaussianVectorSpec {
    /// OU marginals at strictly increasing times in `[0, 1]`.
    pub fn ou(times: &[f64]) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("need at least one time point"));
        }
        if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("time points must lie in [0, 1]"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("time points must be sorted and distinct"));
        }
        Ok(Self { points: times.iter().map(|&t| (1.0, t)).collect(), rule: CovarianceRule::Ou })
    }

    /// Values of the limit field at arbitrary `(u, t)` pairs in `[0, 1]^2`.
    pub fn field(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("need at least one grid point"));
        }
        if points.iter().any(|(u, t)| !(0.0..=1.0).contains(u) || !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("field points must lie in [0, 1]^2"));
        }
        Ok(Self { points: points.to_vec(), rule: CovarianceRule::Field })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn rule(&self) -> CovarianceRule {
        self.rule
    }

    pub fn covariance_matrix(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|&(u, t)| {
                self.points
                    .iter()
                    .map(|&(v, s)| {
                        let c = (-(t - s).abs()).exp();
                        match self.rule {
                            CovarianceRule::Ou => c,
                            CovarianceRule::Field => c * u.min(v),
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// One exact draw of `(Z(t_1), ..., Z(t_m))` by the Markov recursion
/// `Z(t_{k+1}) = e^{-d} Z(t_k) + sqrt(1 - e^{-2d}) N`.
pub fn sample_ou(spec: &GaussianVectorSpec, rng: &mut RngStream) -> Result<Vec<f64>> {
    if spec.rule != CovarianceRule::Ou {
        return Err(Error::invalid("sample_ou needs an OU covariance spec"));
    }
    let mut out = Vec::with_capacity(spec.points.len());
    sample_ou_into(&spec.times(), rng, &mut out);
    Ok(out)
}

fn sample_ou_into(times: &[f64], rng: &mut RngStream, out: &mut Vec<f64>) {
    out.clear();
    let mut z = normal(rng);
    out.push(z);
    for w in times.windows(2) {
        let decay = (w[0] - w[1]).exp();
        z = decay * z + (-(decay * decay)).ln_1p().exp().sqrt() * normal(rng);
        out.push(z);
    }
}

/// Covariance matrix implied by the recursion's coefficients, computed
/// without sampling.
pub fn recursion_covariance(times: &[f64]) -> Vec<Vec<f64>> {
    let m = times.len();
    // Z_k = sum_j a[k][j] N_j
    let mut a = vec![vec![0.0; m]; m];
    if m > 0 {
        a[0][0] = 1.0;
    }
    for k in 1..m {
        let decay = (times[k - 1] - times[k]).exp();
        for j in 0..k {
            a[k][j] = decay * a[k - 1][j];
        }
        a[k][k] = (1.0 - decay * decay).sqrt();
    }
    (0..m).map(|i| (0..m).map(|j| (0..m).map(|l| a[i][l] * a[j][l]).sum()).collect()).collect()
}

/// Points used to stand in for `E`: its points, plus each interval at a
/// mesh of at most `mesh`.
pub fn discretize(set: &CompactSet1D, mesh: f64) -> Result<Vec<f64>> {
    if !(mesh > 0.0) {
        return Err(Error::invalid("mesh must be positive"));
    }
    let mut pts = Vec::new();
    for &(a, b) in set.intervals() {
        if a == b {
            pts.push(a);
            continue;
        }
        let k = ((b - a) / mesh).ceil().max(1.0) as usize;
        for i in 0..=k {
            pts.push(if i == k { b } else { a + (b - a) * i as f64 / k as f64 });
        }
    }
    pts.dedup();
    if pts.is_empty() {
        return Err(Error::invalid("empty discretization"));
    }
    Ok(pts)
}

/// `P{max_{t in E} Z_t >= z}` by Monte Carlo, with the entropy bracket and,
/// for two-point sets, the exact value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuSupReport {
    pub z: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub theory_value: f64,
    pub ratio: f64,
    /// `2 phi_bar(z) - P{Z_s >= z, Z_t >= z}` when `E` has two points.
    pub exact: Option<f64>,
    pub points_used: usize,
    /// Interval mesh, or `None` when `E` is a finite point set.
    pub mesh: Option<f64>,
    pub reps: u64,
    pub seed: u64,
}

pub fn ou_sup_probability(set: &CompactSet1D, z: f64, plan: &ReplicationPlan) -> Result<OuSupReport> {
    Ok(ou_sup_sweep(set, &[z], plan)?.remove(0))
}

/// [`ou_sup_probability`] for several levels on shared draws; intervals are
/// discretized at the mesh required by the largest level.
pub fn ou_sup_sweep(set: &CompactSet1D, levels: &[f64], plan: &ReplicationPlan) -> Result<Vec<OuSupReport>> {
    if levels.is_empty() || levels.iter().any(|z| !(*z >= 1.0) || !z.is_finite()) {
        return Err(Error::invalid("levels must be finite and >= 1"));
    }
    let z_max = levels.iter().cloned().fold(1.0, f64::max);
    let mesh = (!set.is_point_set()).then(|| 1.0 / (20.0 * z_max * z_max));
    let times = discretize(set, mesh.unwrap_or(1.0))?;
    let maxima = replicate(plan, |rng, _| {
        let mut buf = Vec::with_capacity(times.len());
        sample_ou_into(&times, rng, &mut buf);
        buf.into_iter().fold(f64::NEG_INFINITY, f64::max)
    })?;
    levels
        .iter()
        .map(|&z| {
            let hits = maxima.iter().filter(|&&m| m >= z).count() as u64;
            let s = proportion(hits, plan.reps);
            let tail = phi_bar(z)?;
            let theory_value = kolmogorov_entropy(set, 1.0 / (z * z))?.value() as f64 * tail;
            let exact = match set.point_list() {
                Some(p) if p.len() == 2 => Some(2.0 * tail - bivariate_upper(z, z, (-(p[0] - p[1]).abs()).exp())?),
                Some(p) if p.len() == 1 => Some(tail),
                _ => None,
            };
            Ok(OuSupReport {
                z,
                estimate: s.mean,
                stderr: s.stderr,
                ci_low: (s.mean - Z99 * s.stderr).max(0.0),
                ci_high: (s.mean + Z99 * s.stderr).min(1.0),
                hits,
                theory_value,
                ratio: s.mean / theory_value,
                exact,
                points_used: times.len(),
                mesh,
                reps: plan.reps,
                seed: plan.seed,
            })
        })
        .collect()
}

fn check_sorted_unit(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::invalid(format!("{name} grid must be non-empty and inside [0, 1]")));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid(format!("{name} grid must be sorted")));
    }
    Ok(())
}

/// One exact draw of `U` on `u_grid x t_grid`: Brownian-sheet rectangle sums
/// on `(u, e^{2t})`, scaled by `e^{-t}`. `values[i][j]` is at `(u_i, t_j)`.
pub fn sheet_field_sample(u_grid: &[f64], t_grid: &[f64], rng: &mut RngStream) -> Result<FieldSample> {
    check_sorted_unit("u", u_grid)?;
    check_sorted_unit("t", t_grid)?;
    let tau: Vec<f64> = t_grid.iter().map(|t| (2.0 * t).exp()).collect();
    let (m, k) = (u_grid.len(), t_grid.len());
    let mut values = vec![vec![0.0; k]; m];
    let mut prev_u = 0.0;
    for i in 0..m {
        let du = u_grid[i] - prev_u;
        prev_u = u_grid[i];
        let mut prev_tau = 0.0;
        let mut column = 0.0;
        for j in 0..k {
            let area = du * (tau[j] - prev_tau);
            prev_tau = tau[j];
            column += area.sqrt() * normal(rng);
            let below = if i == 0 { 0.0 } else { values[i - 1][j] };
            values[i][j] = below + column;
        }
    }
    for row in values.iter_mut() {
        for (v, t) in row.iter_mut().zip(t_grid) {
            *v *= (-t).exp();
        }
    }
    Ok(FieldSample { u_grid: u_grid.to_vec(), t_grid: t_grid.to_vec(), values })
}

/// Empirical covariance of the sheet-built field against `e^{-|t-s|} min(u, v)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SheetCovarianceReport {
    pub points: Vec<(f64, f64)>,
    pub covariance: Vec<Vec<f64>>,
    pub target_covariance: Vec<Vec<f64>>,
    pub max_covariance_error: f64,
    /// KS of each marginal scaled by `1/sqrt(u)`; `None` at `u = 0`.
    pub ks: Vec<Option<KsResult>>,
    pub reps: u64,
    pub seed: u64,
}

pub fn sheet_covariance_experiment(
    u_grid: &[f64],
    t_grid: &[f64],
    plan: &ReplicationPlan,
) -> Result<SheetCovarianceReport> {
    check_sorted_unit("u", u_grid)?;
    check_sorted_unit("t", t_grid)?;
    let draws = replicate(plan, |rng, _| {
        let f = sheet_field_sample(u_grid, t_grid, rng).expect("grids validated");
        f.values.into_iter().flatten().collect::<Vec<f64>>()
    })?;
    let points: Vec<(f64, f64)> = u_grid.iter().flat_map(|&u| t_grid.iter().map(move |&t| (u, t))).collect();
    let p = points.len();
    let reps = draws.len() as f64;
    // centered at the known mean 0
    let mut covariance = vec![vec![0.0; p]; p];
    for d in &draws {
        for a in 0..p {
            for b in a..p {
                covariance[a][b] += d[a] * d[b];
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            covariance[a][b] /= reps;
            covariance[b][a] = covariance[a][b];
        }
    }
    let target_covariance = GaussianVectorSpec::field(&points)?.covariance_matrix();
    let max_covariance_error = covariance
        .iter()
        .flatten()
        .zip(target_covariance.iter().flatten())
        .map(|(c, t)| (c - t).abs())
        .fold(0.0, f64::max);
    let mut ks = Vec::with_capacity(p);
    for (idx, &(u, _)) in points.iter().enumerate() {
        if u == 0.0 {
            ks.push(None);
            continue;
        }
        let mut col: Vec<f64> = draws.iter().map(|d| d[idx] / u.sqrt()).collect();
        ks.push(Some(ks_one_sample(&mut col, |x| 1.0 - phi_bar(x).unwrap_or(f64::NAN))?));
    }
    Ok(SheetCovarianceReport {
        points,
        covariance,
        target_covariance,
        max_covariance_error,
        ks,
        reps: plan.reps,
        seed: plan.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_two_sample;

    fn plan(seed: u64, reps: u64) -> ReplicationPlan {
        ReplicationPlan::new(seed, reps, 1).unwrap()
    }

    #[test]
    fn recursion_covariance_is_exact() {
        let times = [0.0, 0.1, 0.35, 0.7, 1.0];
        let implied = recursion_covariance(&times);
        let target = GaussianVectorSpec::ou(&times).unwrap().covariance_matrix();
        for (r, t) in implied.iter().flatten().zip(target.iter().flatten()) {
            assert!((r - t).abs() < 1e-12);
        }
    }

    #[test]
    fn ou_moments() {
        let spec = GaussianVectorSpec::ou(&[0.0, 0.7]).unwrap();
        let draws = replicate(&plan(3, 100_000), |rng, _| sample_ou(&spec, rng).unwrap()).unwrap();
        let n = draws.len() as f64;
        let v0 = draws.iter().map(|d| d[0] * d[0]).sum::<f64>() / n;
        let v1 = draws.iter().map(|d| d[1] * d[1]).sum::<f64>() / n;
        let c = draws.iter().map(|d| d[0] * d[1]).sum::<f64>() / n;
        assert!((v0 - 1.0).abs() < 0.02 && (v1 - 1.0).abs() < 0.02);
        assert!((c - (-0.7f64).exp()).abs() < 0.02, "corr {c}");
    }

    #[test]
    fn single_point_is_standard_normal() {
        let spec = GaussianVectorSpec::ou(&[0.4]).unwrap();
        let mut xs = replicate(&plan(5, 100_000), |rng, _| sample_ou(&spec, rng).unwrap()[0]).unwrap();
        assert!(ks_one_sample(&mut xs, |x| 1.0 - phi_bar(x).unwrap()).unwrap().passes(0.01));
    }

    #[test]
    fn rejects_unsorted_times() {
        assert!(GaussianVectorSpec::ou(&[0.5, 0.2]).is_err());
        assert!(GaussianVectorSpec::ou(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn two_point_estimate_matches_exact() {
        let e = CompactSet1D::points(&[0.0, 0.7]).unwrap();
        let r = ou_sup_probability(&e, 1.0, &plan(7, 200_000)).unwrap();
        let exact = r.exact.unwrap();
        assert!((r.estimate - exact).abs() <= 3.0 * r.stderr, "{} vs {exact}", r.estimate);
        let single = ou_sup_probability(&CompactSet1D::singleton(0.2).unwrap(), 2.0, &plan(1, 10)).unwrap();
        assert_eq!(single.exact, Some(phi_bar(2.0).unwrap()));
    }

    #[test]
    fn sweep_is_monotone_and_discretizes_intervals() {
        let r = ou_sup_sweep(&CompactSet1D::unit_interval(), &[1.5, 2.0, 2.5], &plan(2, 5000)).unwrap();
        assert!(r[0].hits >= r[1].hits && r[1].hits >= r[2].hits);
        let mesh = r[0].mesh.unwrap();
        assert!(mesh <= 1.0 / (20.0 * 2.5 * 2.5));
        assert!(r[0].points_used as f64 >= 1.0 / mesh);
    }

    #[test]
    fn sheet_field_covariance() {
        let r = sheet_covariance_experiment(&[0.0, 0.5, 1.0], &[0.0, 0.4, 1.0], &plan(11, 100_000)).unwrap();
        assert!(r.max_covariance_error < 0.02, "{}", r.max_covariance_error);
        assert!(r.ks.iter().flatten().all(|k| k.passes(0.001)));
        let f = sheet_field_sample(&[0.0, 1.0], &[0.3], &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(f.values[0][0], 0.0);
    }

    #[test]
    fn sheet_and_ou_sup_agree_in_law() {
        let times: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let spec = GaussianVectorSpec::ou(&times).unwrap();
        let mut a = replicate(&plan(1, 10_000), |rng, _| {
            sample_ou(&spec, rng).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max)
        })
        .unwrap();
        let mut b = replicate(&plan(2, 10_000), |rng, _| {
            let f = sheet_field_sample(&[1.0], &times, rng).unwrap();
            f.values[0].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        })
        .unwrap();
        assert!(ks_two_sample(&mut a, &mut b).unwrap().passes(0.01));
    }
}
