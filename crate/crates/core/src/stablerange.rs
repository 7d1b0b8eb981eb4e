//! Entropy scaling of the range of a symmetric stable process on `[1, 2]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::randvar::symmetric_stable;
use crate::replicate::{replicate, ReplicationPlan};
use crate::rng::RngStream;
use crate::set_geometry::separated;
use crate::stats::{ls_slope, summarize};

pub const MIN_STEPS: usize = 10_000;
pub const DEFAULT_WINDOW: f64 = 2.0;
/// Half-width of the interval `I` on which the range is counted.
pub const COUNT_HALF_WIDTH: f64 = 1.0;
/// Smallest allowed `eps` in units of the per-step scale `h^{1/alpha}`.
pub const RESOLUTION_FACTOR: f64 = 10.0;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("stable index {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Visited grid positions of one path, clipped to `[-window, window]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableRange {
    pub alpha: f64,
    pub steps: usize,
    pub window: f64,
    /// Sorted and deduplicated.
    pub points: Vec<f64>,
}

impl StableRange {
    /// `h^{1/alpha}` with `h = 1/steps`.
    pub fn step_scale(&self) -> f64 {
        step_scale(self.alpha, self.steps)
    }

    /// Greedy packing count of the points inside `[-half_width, half_width]`.
    pub fn packing_count(&self, half_width: f64, eps: f64) -> u64 {
        let lo = self.points.partition_point(|&x| x < -half_width);
        let hi = self.points.partition_point(|&x| x <= half_width);
        greedy_count(&self.points[lo..hi], eps)
    }
}

fn step_scale(alpha: f64, steps: usize) -> f64 {
    (1.0 / steps as f64).powf(1.0 / alpha)
}

fn greedy_count(sorted: &[f64], eps: f64) -> u64 {
    let Some(&first) = sorted.first() else { return 0 };
    let mut last = first;
    let mut k = 1;
    for &x in &sorted[1..] {
        if separated(last, x, eps) {
            last = x;
            k += 1;
        }
    }
    k
}

/// `Y(1)` from the time-one law, then `steps` increments `h^{1/alpha} xi` up
/// to time 2. Positions outside the window are dropped; the path continues.
pub fn simulate_range(alpha: f64, steps: usize, window: f64, rng: &mut RngStream) -> Result<StableRange> {
    check_alpha(alpha)?;
    if steps < MIN_STEPS {
        return Err(Error::invalid(format!("need at least {MIN_STEPS} steps, got {steps}")));
    }
    if !(window > 0.0) || !window.is_finite() {
        return Err(Error::invalid("window must be positive and finite"));
    }
    Ok(simulate_unchecked(alpha, steps, window, rng))
}

fn simulate_unchecked(alpha: f64, steps: usize, window: f64, rng: &mut RngStream) -> StableRange {
    let scale = step_scale(alpha, steps);
    let mut y = symmetric_stable(alpha, rng);
    let mut points = Vec::new();
    for j in 0..=steps {
        if j > 0 {
            y += scale * symmetric_stable(alpha, rng);
        }
        if y.abs() <= window {
            points.push(y);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    StableRange { alpha, steps, window, points }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeScalingReport {
    pub alpha: f64,
    pub p: u32,
    pub steps: usize,
    pub window: f64,
    pub eps: Vec<f64>,
    /// Monte Carlo `E[K^p]` at each `eps`.
    pub moment: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Fraction of paths with no point in the counting interval.
    pub empty_fraction: f64,
    pub slope: f64,
    pub target: f64,
    pub reps: u64,
    pub seed: u64,
}

/// Least-squares slope of `ln E[K^p]` against `ln(1/eps)`.
pub fn range_entropy_scaling(
    alpha: f64,
    eps: &[f64],
    p: u32,
    steps: usize,
    plan: &ReplicationPlan,
) -> Result<RangeScalingReport> {
    Ok(range_entropy_sweep(alpha, eps, &[p], steps, plan)?.remove(0))
}

/// One report per moment order, all computed from the same paths.
pub fn range_entropy_sweep(
    alpha: f64,
    eps: &[f64],
    powers: &[u32],
    steps: usize,
    plan: &ReplicationPlan,
) -> Result<Vec<RangeScalingReport>> {
    check_alpha(alpha)?;
    if steps < MIN_STEPS {
        return Err(Error::invalid(format!("need at least {MIN_STEPS} steps, got {steps}")));
    }
    if eps.len() < 2 || eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::invalid("need at least two positive eps values"));
    }
    if powers.is_empty() || powers.contains(&0) {
        return Err(Error::invalid("moment orders must be positive integers"));
    }
    let min_eps = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let resolution = RESOLUTION_FACTOR * step_scale(alpha, steps);
    if min_eps < resolution {
        return Err(Error::Resolution { resolution, scale: min_eps });
    }
    let counts = replicate(plan, |rng, _| {
        let r = simulate_unchecked(alpha, steps, DEFAULT_WINDOW, rng);
        eps.iter().map(|&e| r.packing_count(COUNT_HALF_WIDTH, e)).collect::<Vec<u64>>()
    })?;
    let empty = counts.iter().filter(|c| c.iter().all(|&k| k == 0)).count();
    let x: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
    powers
        .iter()
        .map(|&p| {
            let mut moment = Vec::with_capacity(eps.len());
            let mut stderr = Vec::with_capacity(eps.len());
            for i in 0..eps.len() {
                let vals: Vec<f64> = counts.iter().map(|c| (c[i] as f64).powi(p as i32)).collect();
                let s = summarize(&vals);
                moment.push(s.mean);
                stderr.push(s.stderr);
            }
            if moment.iter().any(|&m| m <= 0.0) {
                return Err(Error::Inconclusive("no path visited the counting interval".into()));
            }
            let y: Vec<f64> = moment.iter().map(|m| m.ln()).collect();
            Ok(RangeScalingReport {
                alpha,
                p,
                steps,
                window: DEFAULT_WINDOW,
                eps: eps.to_vec(),
                moment,
                stderr,
                empty_fraction: empty as f64 / plan.reps as f64,
                slope: ls_slope(&x, &y)?,
                target: alpha * p as f64,
                reps: plan.reps,
                seed: plan.seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set_geometry::{kolmogorov_entropy, CompactSet1D};
    use crate::stats::ks_two_sample;

    fn plan(seed: u64, reps: u64) -> ReplicationPlan {
        ReplicationPlan::new(seed, reps, 1).unwrap()
    }

    #[test]
    fn greedy_matches_set_packing() {
        let r = (0..)
            .map(|i| simulate_range(0.5, MIN_STEPS, 2.0, &mut RngStream::new(4, i)).unwrap())
            .find(|r| r.points.iter().filter(|x| (0.0..=1.0).contains(*x)).count() > 100)
            .unwrap();
        assert!(r.points.len() <= MIN_STEPS + 1);
        let unit: Vec<f64> = r.points.iter().copied().filter(|x| (0.0..=1.0).contains(x)).collect();
        let set = CompactSet1D::points(&unit).unwrap();
        for &eps in &[0.5, 0.1, 0.01, 1e-3] {
            assert_eq!(greedy_count(&unit, eps), kolmogorov_entropy(&set, eps).unwrap().value());
        }
    }

    #[test]
    fn count_non_increasing_in_eps() {
        for i in 0..20 {
            let r = simulate_range(0.4, MIN_STEPS, 2.0, &mut RngStream::new(9, i)).unwrap();
            let ks: Vec<u64> = (1..12).map(|j| r.packing_count(1.0, 0.5f64.powi(j))).collect();
            assert!(ks.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn sign_flip_symmetry() {
        let extremes = |seed| {
            replicate(&plan(seed, 2000), |rng, _| {
                let r = simulate_range(0.5, MIN_STEPS, 2.0, rng).unwrap();
                r.points.last().copied().unwrap_or(-3.0)
            })
            .unwrap()
        };
        let mut maxima = extremes(1);
        let mut flipped: Vec<f64> = replicate(&plan(2, 2000), |rng, _| {
            let r = simulate_range(0.5, MIN_STEPS, 2.0, rng).unwrap();
            r.points.first().map(|x| -x).unwrap_or(-3.0)
        })
        .unwrap();
        assert!(ks_two_sample(&mut maxima, &mut flipped).unwrap().passes(0.01));
    }

    #[test]
    fn denser_for_larger_alpha() {
        let median = |alpha: f64| {
            let mut k = replicate(&plan(3, 201), |rng, _| {
                simulate_range(alpha, MIN_STEPS, 2.0, rng).unwrap().packing_count(1.0, 1.0 / 64.0)
            })
            .unwrap();
            k.sort_unstable();
            k[100]
        };
        assert!(median(0.3) < median(0.6));
    }

    #[test]
    fn resolution_guard() {
        let e = range_entropy_scaling(0.9, &[1e-4, 1e-3], 1, MIN_STEPS, &plan(1, 2)).unwrap_err();
        assert!(matches!(e, Error::Resolution { .. }));
        assert!(range_entropy_scaling(0.5, &[0.1, 0.2], 0, MIN_STEPS, &plan(1, 2)).is_err());
        assert!(simulate_range(0.5, 100, 2.0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn moments_increase_with_order() {
        let eps: Vec<f64> = (4..=8).map(|k| 0.5f64.powi(k)).collect();
        let r = range_entropy_sweep(0.5, &eps, &[1, 2], MIN_STEPS, &plan(5, 100)).unwrap();
        for i in 0..eps.len() {
            assert!(r[1].moment[i] >= r[0].moment[i]);
        }
        assert!(r[0].moment.windows(2).all(|w| w[0] <= w[1]));
    }
}
