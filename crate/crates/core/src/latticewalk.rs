//! Classical integer random walks: Green function, gambler's ruin,
//! survival, local time at 0 and first-passage scales.
//!
//! A walk whose increments generate `gZ` is studied on `Z` after dividing
//! every step (and every target level) by `g`.

use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::randvar::{IncrementDistribution, LatticePmf};
use crate::replicate::{replicate, ReplicationPlan};
use crate::rng::RngStream;
use crate::stats::{chi_square_gof, proportion, summarize, ChiSquareResult, Z99};

/// Default per-episode step cap for episodes that may not terminate quickly.
pub const DEFAULT_EPISODE_CAP: u64 = 1_000_000;

/// Censoring fraction at or above which a report is flagged.
pub const CENSOR_FLAG_FRACTION: f64 = 1e-3;

/// Largest DP state count accepted by [`green_function`].
const GREEN_STATE_BUDGET: u64 = 50_000_000;

/// A mean-zero lattice walk, normalized onto `Z` by its group gcd.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWalkSpec {
    pmf: LatticePmf,
    reduced: LatticePmf,
    gcd: i64,
}

impl FromStr for LatticeWalkSpec {
    type Err = Error;

    /// `simple` | `lazy` | `pmf:v1:p1;v2:p2;...`
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Self::simple()),
            "lazy" => Ok(Self::lazy()),
            _ => match s.parse::<IncrementDistribution>()? {
                IncrementDistribution::Lattice(pmf) => Self::new(pmf),
                _ => Err(Error::invalid(format!("walk spec `{s}` is not a lattice law"))),
            },
        }
    }
}

impl LatticeWalkSpec {
    pub fn new(pmf: LatticePmf) -> Result<Self> {
        if pmf.mean().abs() > 1e-12 {
            return Err(Error::invalid(format!("walk must have mean 0, got {}", pmf.mean())));
        }
        if pmf.support().len() < 2 {
            return Err(Error::invalid("a degenerate walk never leaves 0"));
        }
        let gcd = pmf.group_gcd();
        let reduced = LatticePmf::new(pmf.support().iter().map(|&(v, p)| (v / gcd, p)).collect())?;
        Ok(Self { pmf, reduced, gcd })
    }

    pub fn simple() -> Self {
        Self::new(LatticePmf::simple()).expect("valid walk")
    }

    pub fn lazy() -> Self {
        Self::new(LatticePmf::lazy()).expect("valid walk")
    }

    /// Is the walk the simple symmetric walk (up to its group gcd)?
    pub fn is_simple(&self) -> bool {
        self.gcd == 1 && self.pmf == LatticePmf::simple()
    }

    pub fn pmf(&self) -> &LatticePmf {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.mean()
    }

    pub fn variance(&self) -> f64 {
        self.pmf.variance()
    }

    /// Generator of the additive group spanned by the support.
    pub fn gcd(&self) -> i64 {
        self.gcd
    }

    /// `z / g`, or an error when `z` is outside `gZ`.
    fn reduce_level(&self, z: i64) -> Result<i64> {
        if z % self.gcd != 0 {
            return Err(Error::invalid(format!("level {z} is not in the group {}Z", self.gcd)));
        }
        Ok(z / self.gcd)
    }

    fn nonzero_level(&self, z: i64) -> Result<i64> {
        if z == 0 {
            return Err(Error::invalid("target level must be non-zero"));
        }
        self.reduce_level(z)
    }

    #[inline]
    fn step(&self, rng: &mut RngStream) -> i64 {
        self.reduced.sample(rng)
    }

    fn max_step(&self) -> i64 {
        self.reduced.max_step()
    }

    fn min_step(&self) -> i64 {
        self.reduced.min_step()
    }
}

/// `G(n) = sum_{i=1..n} P_0{s_i = 0}` by exact convolution of the pmf.
pub fn green_function(spec: &LatticeWalkSpec, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("green function needs n >= 1"));
    }
    let (lo, hi) = (spec.min_step(), spec.max_step());
    let width = (hi - lo) as u64;
    let states = n.saturating_mul(width).saturating_add(1);
    if states > GREEN_STATE_BUDGET {
        return Err(Error::Resource(format!("green function needs {states} DP states")));
    }
    let support = spec.reduced.support();
    // dist[j] is the mass at position i*lo + j after i steps
    let mut dist = vec![1.0f64];
    let mut next = Vec::new();
    let mut total = 0.0;
    for i in 1..=n as i64 {
        next.clear();
        next.resize(dist.len() + width as usize, 0.0);
        for (j, &m) in dist.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(v, p) in support {
                next[j + (v - lo) as usize] += m * p;
            }
        }
        std::mem::swap(&mut dist, &mut next);
        let zero_index = -(i * lo);
        if zero_index >= 0 && (zero_index as usize) < dist.len() {
            total += dist[zero_index as usize];
        }
    }
    Ok(total)
}

/// `sum_{k=1..n/2} C(2k, k) 4^-k`, the simple walk's Green function.
pub fn simple_walk_green(n: u64) -> f64 {
    let mut c = 1.0;
    let mut total = 0.0;
    for k in 1..=n / 2 {
        c *= (2 * k - 1) as f64 / (2 * k) as f64;
        total += c;
    }
    total
}

/// `P_0{T(z) <= T(0)} = 1/(2|z|)` for the simple walk.
pub fn simple_walk_ruin(z: i64) -> f64 {
    1.0 / (2.0 * z.unsigned_abs() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Episode {
    Target,
    Origin,
    Censored,
}

/// Runs from 0 until hitting `z` (reduced, non-zero) or returning to 0.
/// Jumps that cannot skip a level end the episode early.
fn ruin_episode(spec: &LatticeWalkSpec, z: i64, cap: u64, rng: &mut RngStream) -> Episode {
    let (up_free, down_free) = (spec.max_step() <= 1, spec.min_step() >= -1);
    let mut s = 0i64;
    for _ in 0..cap {
        s += spec.step(rng);
        if s == z {
            return Episode::Target;
        }
        if s == 0 {
            return Episode::Origin;
        }
        if z > 0 {
            if s < 0 && up_free {
                return Episode::Origin;
            }
            if s > z && down_free {
                return Episode::Target;
            }
        } else {
            if s > 0 && down_free {
                return Episode::Origin;
            }
            if s < z && up_free {
                return Episode::Target;
            }
        }
    }
    Episode::Censored
}

/// Gambler's ruin estimate `P_0{T(z) <= T(0)}` next to the `1/(1+|z|)` scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuinReport {
    pub z: i64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub censored: u64,
    pub censored_fraction: f64,
    /// `1/(1+|z|)`; the ratio `estimate/theory_value` stays bounded in `z`.
    pub theory_value: f64,
    pub ratio: f64,
    pub reps: u64,
    pub seed: u64,
    pub flagged: bool,
}

/// Monte Carlo estimate of `P_0{T(z) <= T(0)}`. For `z != 0` the two
/// first-passage times never coincide, so this is also `P_0{T(z) < T(0)}`.
/// Censored episodes count as misses and are reported.
pub fn ruin_probability(spec: &LatticeWalkSpec, z: i64, cap: u64, plan: &ReplicationPlan) -> Result<RuinReport> {
    let zr = spec.nonzero_level(z)?;
    if cap == 0 {
        return Err(Error::invalid("episode cap must be positive"));
    }
    let outcomes = replicate(plan, |rng, _| ruin_episode(spec, zr, cap, rng))?;
    let hits = outcomes.iter().filter(|e| **e == Episode::Target).count() as u64;
    let censored = outcomes.iter().filter(|e| **e == Episode::Censored).count() as u64;
    let s = proportion(hits, plan.reps);
    let censored_fraction = censored as f64 / plan.reps as f64;
    let theory_value = 1.0 / (1.0 + z.unsigned_abs() as f64);
    Ok(RuinReport {
        z,
        estimate: s.mean,
        stderr: s.stderr,
        ci_low: (s.mean - Z99 * s.stderr).max(0.0),
        ci_high: (s.mean + Z99 * s.stderr).min(1.0),
        hits,
        censored,
        censored_fraction,
        theory_value,
        ratio: s.mean / theory_value,
        reps: plan.reps,
        seed: plan.seed,
        flagged: censored_fraction >= CENSOR_FLAG_FRACTION,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalReport {
    pub z: i64,
    pub n: u64,
    pub estimate: f64,
    pub stderr: f64,
    /// `estimate * sqrt(n) / (1 + |z|)`.
    pub scaled_upper: f64,
    /// `estimate * sqrt(n) / |z|`, undefined at `z = 0`.
    pub scaled_lower: Option<f64>,
    pub reps: u64,
    pub seed: u64,
}

/// Monte Carlo estimate of `P_z{T(0) > n}` with `T(0) = inf{m >= 1 : s_m = 0}`.
pub fn survival_probability(spec: &LatticeWalkSpec, z: i64, n: u64, plan: &ReplicationPlan) -> Result<SurvivalReport> {
    let zr = spec.reduce_level(z)?;
    if n == 0 {
        return Err(Error::invalid("survival horizon must be at least 1"));
    }
    let outcomes = replicate(plan, |rng, _| {
        let mut s = zr;
        for _ in 0..n {
            s += spec.step(rng);
            if s == 0 {
                return false;
            }
        }
        true
    })?;
    let hits = outcomes.iter().filter(|b| **b).count() as u64;
    let s = proportion(hits, plan.reps);
    let root = (n as f64).sqrt();
    let az = z.unsigned_abs() as f64;
    Ok(SurvivalReport {
        z,
        n,
        estimate: s.mean,
        stderr: s.stderr,
        scaled_upper: s.mean * root / (1.0 + az),
        scaled_lower: (z != 0).then(|| s.mean * root / az),
        reps: plan.reps,
        seed: plan.seed,
    })
}

/// Empirical law of `L = #{m <= T(z) : s_m = 0}` (the start counts as a visit).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalTimeReport {
    pub z: i64,
    /// `counts[k]` is the number of episodes with `L = k + 1`.
    pub counts: Vec<u64>,
    pub mean: f64,
    pub stderr: f64,
    pub censored: u64,
    pub censored_fraction: f64,
    pub flagged: bool,
    /// Chi-square fit of the counts to a geometric law with mean `mean`.
    pub geometric_fit: Option<ChiSquareResult>,
    pub reps: u64,
    pub seed: u64,
}

fn local_time_episode(spec: &LatticeWalkSpec, z: i64, cap: u64, rng: &mut RngStream) -> Option<u64> {
    let (up_free, down_free) = (spec.max_step() <= 1, spec.min_step() >= -1);
    let mut visits = 1u64;
    let mut s = 0i64;
    for _ in 0..cap {
        s += spec.step(rng);
        if s == z {
            return Some(visits);
        }
        if s == 0 {
            visits += 1;
            continue;
        }
        // an excursion that must come back to 0 before reaching z, or reach z
        // before 0, is settled without simulating it
        let (away, past) =
            if z > 0 { (s < 0 && up_free, s > z && down_free) } else { (s > 0 && down_free, s < z && up_free) };
        if away {
            visits += 1;
            s = 0;
        } else if past {
            return Some(visits);
        }
    }
    None
}

pub fn local_time_distribution(
    spec: &LatticeWalkSpec,
    z: i64,
    cap: u64,
    plan: &ReplicationPlan,
) -> Result<LocalTimeReport> {
    let zr = spec.nonzero_level(z)?;
    if cap == 0 {
        return Err(Error::invalid("episode cap must be positive"));
    }
    let outcomes = replicate(plan, |rng, _| local_time_episode(spec, zr, cap, rng))?;
    let values: Vec<f64> = outcomes.iter().flatten().map(|&v| v as f64).collect();
    let censored = plan.reps - values.len() as u64;
    let top = outcomes.iter().flatten().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; top];
    for &v in outcomes.iter().flatten() {
        counts[v as usize - 1] += 1;
    }
    let summary = summarize(&values);
    let geometric_fit = if values.len() > 1 && summary.mean > 1.0 {
        let q = 1.0 / summary.mean;
        let m = values.len() as f64;
        // cells L = 1..top, with the upper tail folded into the last cell
        let mut expected: Vec<f64> = (0..top).map(|k| m * q * (1.0 - q).powi(k as i32)).collect();
        if let Some(last) = expected.last_mut() {
            *last += m * (1.0 - q).powi(top as i32);
        }
        let observed: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        chi_square_gof(&observed, &expected, 1, 5.0).ok()
    } else {
        None
    };
    let censored_fraction = censored as f64 / plan.reps as f64;
    Ok(LocalTimeReport {
        z,
        counts,
        mean: summary.mean,
        stderr: summary.stderr,
        censored,
        censored_fraction,
        flagged: censored_fraction >= CENSOR_FLAG_FRACTION,
        geometric_fit,
        reps: plan.reps,
        seed: plan.seed,
    })
}

/// `theta(z)`: first `n` on the grid `1, 2, 4, ...` with `P_0{T(z) > n} <= 1/8`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaReport {
    pub z: i64,
    pub theta: u64,
    /// `(n, estimate of P_0{T(z) > n}, stderr)` along the grid up to `theta`.
    pub curve: Vec<(u64, f64, f64)>,
    pub reps: u64,
    pub seed: u64,
}

/// Reps needed so that the 99% half-width at `p = 1/8` is below 0.01.
pub const THETA_MIN_REPS: u64 = 7_300;

pub fn theta_of_z(spec: &LatticeWalkSpec, z: i64, max_n: u64, plan: &ReplicationPlan) -> Result<ThetaReport> {
    let zr = spec.nonzero_level(z)?;
    if plan.reps < THETA_MIN_REPS {
        return Err(Error::invalid(format!("theta needs at least {THETA_MIN_REPS} reps for a 0.01 half-width")));
    }
    let mut cap = 1u64;
    loop {
        // episodes replay the same streams, so each round extends the last
        let times = replicate(plan, |rng, _| {
            let mut s = 0i64;
            for m in 1..=cap {
                s += spec.step(rng);
                if s == zr {
                    return m;
                }
            }
            u64::MAX
        })?;
        let mut curve = Vec::new();
        let mut n = 1u64;
        while n <= cap {
            let above = times.iter().filter(|&&t| t > n).count() as u64;
            let s = proportion(above, plan.reps);
            curve.push((n, s.mean, s.stderr));
            if s.mean <= 0.125 {
                return Ok(ThetaReport { z, theta: n, curve, reps: plan.reps, seed: plan.seed });
            }
            n *= 2;
        }
        if cap >= max_n {
            return Err(Error::Resource(format!("P_0(T({z}) > n) still above 1/8 at n = {cap}")));
        }
        cap = (cap * 8).min(max_n.next_power_of_two());
    }
}

/// Both sides of `P_z{T(0) > n} <= 1 / (G(n) P_0{T(z) <= T(0)})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PgpReport {
    pub z: i64,
    pub n: u64,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub green: f64,
    pub ruin: f64,
    pub ruin_stderr: f64,
    pub rhs: f64,
    /// 99% half-width of the ruin estimate relative to the estimate.
    pub relative_ci: f64,
    pub holds: bool,
}

pub fn pgp_inequality_check(spec: &LatticeWalkSpec, z: i64, n: u64, plan: &ReplicationPlan) -> Result<PgpReport> {
    spec.nonzero_level(z)?;
    let surv = survival_probability(spec, z, n, &plan.derived(1))?;
    let ruin = ruin_probability(spec, z, DEFAULT_EPISODE_CAP, &plan.derived(2))?;
    let green = green_function(spec, n)?;
    if ruin.hits == 0 {
        return Err(Error::Inconclusive(format!("no ruin events for z = {z} in {} reps", plan.reps)));
    }
    let rhs = 1.0 / (green * ruin.estimate);
    let relative_ci = Z99 * ruin.stderr / ruin.estimate;
    Ok(PgpReport {
        z,
        n,
        lhs: surv.estimate,
        lhs_stderr: surv.stderr,
        green,
        ruin: ruin.estimate,
        ruin_stderr: ruin.stderr,
        rhs,
        relative_ci,
        holds: surv.estimate <= rhs * (1.0 + 6.0 * relative_ci),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(seed: u64, reps: u64) -> ReplicationPlan {
        ReplicationPlan::new(seed, reps, 1).unwrap()
    }

    #[test]
    fn green_small_cases() {
        assert_eq!(green_function(&LatticeWalkSpec::simple(), 2).unwrap(), 0.5);
        assert_eq!(green_function(&LatticeWalkSpec::lazy(), 1).unwrap(), 0.5);
        assert_eq!(green_function(&LatticeWalkSpec::simple(), 1).unwrap(), 0.0);
    }

    #[test]
    fn green_dp_matches_binomial_sum() {
        for n in [1, 2, 3, 10, 101, 1000] {
            let dp = green_function(&LatticeWalkSpec::simple(), n).unwrap();
            let exact = simple_walk_green(n);
            assert!((dp - exact).abs() < 1e-12, "n={n}: {dp} vs {exact}");
        }
    }

    #[test]
    fn green_of_scaled_walk_ignores_the_gcd() {
        let scaled = LatticeWalkSpec::new(LatticePmf::new(vec![(-3, 0.5), (3, 0.5)]).unwrap()).unwrap();
        assert_eq!(scaled.gcd(), 3);
        assert_eq!(green_function(&scaled, 50).unwrap(), green_function(&LatticeWalkSpec::simple(), 50).unwrap());
        assert!(ruin_probability(&scaled, 4, 100, &plan(1, 10)).is_err());
    }

    #[test]
    fn green_matches_monte_carlo_visits() {
        let spec = LatticeWalkSpec::new(LatticePmf::new(vec![(-2, 0.25), (1, 0.5), (0, 0.25)]).unwrap()).unwrap();
        let n = 60;
        let visits = replicate(&plan(3, 20_000), |rng, _| {
            let mut s = 0;
            let mut v = 0.0;
            for _ in 0..n {
                s += spec.step(rng);
                v += (s == 0) as u8 as f64;
            }
            v
        })
        .unwrap();
        let m = summarize(&visits);
        let g = green_function(&spec, n).unwrap();
        assert!((m.mean - g).abs() <= 3.0 * m.stderr, "{} vs {g}", m.mean);
    }

    #[test]
    fn simple_walk_ruin_matches_classical_value() {
        for z in [1, 5, -3] {
            let r = ruin_probability(&LatticeWalkSpec::simple(), z, 10_000, &plan(7, 40_000)).unwrap();
            let want = simple_walk_ruin(z);
            assert!((r.estimate - want).abs() <= 3.0 * r.stderr, "z={z}: {} vs {want}", r.estimate);
            assert_eq!(r.censored, 0);
        }
    }

    #[test]
    fn ruin_is_symmetric_for_symmetric_walks() {
        let spec =
            LatticeWalkSpec::new(LatticePmf::new(vec![(-2, 0.25), (2, 0.25), (-1, 0.25), (1, 0.25)]).unwrap()).unwrap();
        let a = ruin_probability(&spec, 3, DEFAULT_EPISODE_CAP, &plan(1, 20_000)).unwrap();
        let b = ruin_probability(&spec, -3, DEFAULT_EPISODE_CAP, &plan(2, 20_000)).unwrap();
        assert!((a.estimate - b.estimate).abs() <= 3.0 * (a.stderr.hypot(b.stderr)));
    }

    #[test]
    fn shortcut_agrees_with_plain_simulation() {
        // the skip-free shortcut must not change the law of the outcome
        let spec = LatticeWalkSpec::lazy();
        let fast = ruin_probability(&spec, 4, DEFAULT_EPISODE_CAP, &plan(5, 40_000)).unwrap();
        let slow = replicate(&plan(6, 40_000), |rng, _| {
            let mut s = 0i64;
            for _ in 0..10_000_000 {
                s += spec.step(rng);
                if s == 4 {
                    return 1.0;
                }
                if s == 0 {
                    return 0.0;
                }
            }
            0.0
        })
        .unwrap();
        let m = summarize(&slow);
        assert!((fast.estimate - m.mean).abs() <= 3.0 * fast.stderr.hypot(m.stderr));
    }

    #[test]
    fn survival_from_origin_at_one_step() {
        let r = survival_probability(&LatticeWalkSpec::simple(), 0, 1, &plan(1, 100)).unwrap();
        assert_eq!(r.estimate, 1.0);
    }

    #[test]
    fn local_time_is_geometric() {
        let r = local_time_distribution(&LatticeWalkSpec::simple(), 1, DEFAULT_EPISODE_CAP, &plan(4, 20_000)).unwrap();
        let p1 = r.counts[0] as f64 / r.reps as f64;
        let se = (0.25 / r.reps as f64).sqrt();
        assert!((p1 - 0.5).abs() <= 3.0 * se, "P(L=1) = {p1}");
        assert!(r.geometric_fit.as_ref().unwrap().p_value > 0.01);
        assert!((r.mean - 2.0).abs() <= 3.0 * r.stderr);
    }

    #[test]
    fn theta_scales_like_z_squared() {
        let spec = LatticeWalkSpec::simple();
        let mut prev = 0;
        for z in [2, 4, 8] {
            let t = theta_of_z(&spec, z, 1 << 24, &plan(z as u64, 8000)).unwrap();
            assert!(t.theta as f64 / (z * z) as f64 <= 100.0);
            assert!(t.theta >= prev);
            prev = t.theta;
        }
        assert!(theta_of_z(&spec, 2, 1 << 20, &plan(1, 100)).is_err());
    }

    #[test]
    fn pgp_holds_for_simple_walk() {
        let r = pgp_inequality_check(&LatticeWalkSpec::simple(), 2, 100, &plan(8, 20_000)).unwrap();
        assert!(r.holds && r.lhs < r.rhs, "{r:?}");
    }

    #[test]
    fn rejects_drifting_walks() {
        assert!(LatticeWalkSpec::new(LatticePmf::new(vec![(1, 0.6), (-1, 0.4)]).unwrap()).is_err());
    }
}
