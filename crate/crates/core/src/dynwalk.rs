//! The dynamical random walk: `n` increments, each refreshed by its own
//! rate-one Poisson clock over `t in [0, 1]`, simulated event by event.
//!
//! The `n` clocks are generated as one superposed rate-`n` stream whose
//! events carry a uniform coordinate mark.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::randvar::{phi_bar, IncrementDistribution};
use crate::replicate::{replicate, replicate_fold, ReplicationPlan};
use crate::rng::RngStream;
use crate::set_geometry::{kolmogorov_entropy, CompactSet1D};
use crate::stats::{ks_one_sample, ls_slope, proportion, summarize, KsResult, Z99};

/// One clock ring: at `time`, increment `coordinate` (1-based) becomes `value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefreshEvent {
    pub time: f64,
    pub coordinate: u32,
    pub value: f64,
}

/// Initial increments plus the time-ordered refresh events on `(0, 1]`.
/// Paths are right-continuous: an event at `t_e` is in force on `[t_e, t_{e+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalTrajectory {
    initial: Vec<f64>,
    events: Vec<RefreshEvent>,
}

impl DynamicalTrajectory {
    /// Builds a trajectory from explicit data; event times must be
    /// non-decreasing in `(0, 1]` and coordinates in `1..=n`.
    pub fn from_parts(initial: Vec<f64>, events: Vec<RefreshEvent>) -> Result<Self> {
        if initial.is_empty() {
            return Err(Error::invalid("a trajectory needs n >= 1 increments"));
        }
        let n = initial.len() as u32;
        let mut prev = 0.0;
        for e in &events {
            if !(e.time > 0.0 && e.time <= 1.0 && e.time >= prev) {
                return Err(Error::invalid(format!("event time {} out of order or outside (0, 1]", e.time)));
            }
            if e.coordinate == 0 || e.coordinate > n {
                return Err(Error::invalid(format!("event coordinate {} outside 1..={n}", e.coordinate)));
            }
            prev = e.time;
        }
        Ok(Self { initial, events })
    }

    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn events(&self) -> &[RefreshEvent] {
        &self.events
    }

    /// Number of constant pieces, `events + 1`.
    pub fn piece_count(&self) -> usize {
        self.events.len() + 1
    }

    /// Time span of piece `j`: `[t_j, t_{j+1})`, the last one closed at 1.
    pub fn piece(&self, j: usize) -> (f64, f64, bool) {
        let lo = if j == 0 { 0.0 } else { self.events[j - 1].time };
        if j == self.events.len() {
            (lo, 1.0, true)
        } else {
            (lo, self.events[j].time, false)
        }
    }

    /// `(X_1(t), ..., X_n(t))`.
    pub fn increments_at(&self, t: f64) -> Vec<f64> {
        let mut x = self.initial.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            x[e.coordinate as usize - 1] = e.value;
        }
        x
    }

    /// `S_k(t) = X_1(t) + ... + X_k(t)`.
    pub fn partial_sum(&self, k: usize, t: f64) -> f64 {
        self.increments_at(t)[..k.min(self.n())].iter().sum()
    }

    /// Calls `visit(piece_index, increments)` for every piece in time order,
    /// with the increments in force on that piece.
    pub fn for_each_piece(&self, mut visit: impl FnMut(usize, &[f64])) {
        let mut x = self.initial.clone();
        visit(0, &x);
        for (j, e) in self.events.iter().enumerate() {
            x[e.coordinate as usize - 1] = e.value;
            visit(j + 1, &x);
        }
    }
}

/// Draws `n` initial increments, then a rate-`n` event stream on `(0, 1]`
/// with uniform coordinates and fresh increments.
pub fn simulate_trajectory(n: usize, dist: &IncrementDistribution, rng: &mut RngStream) -> Result<DynamicalTrajectory> {
    let mut traj = DynamicalTrajectory { initial: Vec::new(), events: Vec::new() };
    simulate_into(&mut traj, n, dist, rng)?;
    Ok(traj)
}

/// [`simulate_trajectory`] reusing the buffers of `traj`.
pub fn simulate_into(
    traj: &mut DynamicalTrajectory,
    n: usize,
    dist: &IncrementDistribution,
    rng: &mut RngStream,
) -> Result<()> {
    if n == 0 || n > u32::MAX as usize {
        return Err(Error::invalid(format!("walk length {n} outside 1..=2^32-1")));
    }
    traj.initial.clear();
    traj.initial.extend((0..n).map(|_| dist.sample(rng)));
    traj.events.clear();
    let rate = n as f64;
    let mut time = rng.exponential() / rate;
    while time <= 1.0 {
        let coordinate = rng.below(n as u64) as u32 + 1;
        let value = dist.sample(rng);
        traj.events.push(RefreshEvent { time, coordinate, value });
        time += rng.exponential() / rate;
    }
    Ok(())
}

/// Walks the sorted intervals of a set alongside increasing time pieces.
struct SetCursor<'a> {
    intervals: &'a [(f64, f64)],
    idx: usize,
}

impl<'a> SetCursor<'a> {
    fn new(set: &'a CompactSet1D) -> Self {
        Self { intervals: set.intervals(), idx: 0 }
    }

    /// Whether `[lo, hi)` (or `[lo, hi]` when `closed`) meets the set; `lo`
    /// must not decrease between calls.
    #[inline]
    fn hits(&mut self, lo: f64, hi: f64, closed: bool) -> bool {
        while self.idx < self.intervals.len() && self.intervals[self.idx].1 < lo {
            self.idx += 1;
        }
        if self.idx == self.intervals.len() {
            return false;
        }
        let a = self.intervals[self.idx].0;
        if closed {
            a <= hi
        } else {
            lo < hi && a < hi
        }
    }
}

/// `sup_{t in E} S_n(t)`.
pub fn sup_over_set(traj: &DynamicalTrajectory, set: &CompactSet1D) -> f64 {
    sup_over_sets(traj, &[set])[0]
}

/// `sup_{t in E} S_n(t)` for several sets in one pass over the pieces.
pub fn sup_over_sets(traj: &DynamicalTrajectory, sets: &[&CompactSet1D]) -> Vec<f64> {
    let mut cursors: Vec<SetCursor> = sets.iter().map(|s| SetCursor::new(s)).collect();
    let mut best = vec![f64::NEG_INFINITY; sets.len()];
    let mut x = traj.initial.clone();
    let mut s: f64 = x.iter().sum();
    for j in 0..traj.piece_count() {
        if j > 0 {
            let e = traj.events[j - 1];
            let slot = &mut x[e.coordinate as usize - 1];
            s += e.value - *slot;
            *slot = e.value;
        }
        let (lo, hi, closed) = traj.piece(j);
        for (c, b) in cursors.iter_mut().zip(best.iter_mut()) {
            if c.hits(lo, hi, closed) && s > *b {
                *b = s;
            }
        }
    }
    best
}

/// `S_{floor(u n)}(t) / sqrt(n)` on a grid; `values[i][j]` is at `(u_grid[i], t_grid[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub u_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

fn check_unit_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::invalid(format!("{name} grid must be non-empty and inside [0, 1]")));
    }
    Ok(())
}

/// Unnormalized `S_{floor(u n)}(t)` on the grid, `[u][t]`.
fn raw_field(traj: &DynamicalTrajectory, u_grid: &[f64], t_grid: &[f64]) -> Vec<Vec<f64>> {
    let n = traj.n();
    let ks: Vec<usize> = u_grid.iter().map(|u| ((u * n as f64).floor() as usize).min(n)).collect();
    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&a, &b| t_grid[a].total_cmp(&t_grid[b]));
    let mut out = vec![vec![0.0; t_grid.len()]; u_grid.len()];
    let mut x = traj.initial.clone();
    let mut next = 0;
    for &j in &order {
        while next < traj.events.len() && traj.events[next].time <= t_grid[j] {
            let e = traj.events[next];
            x[e.coordinate as usize - 1] = e.value;
            next += 1;
        }
        let mut prefix = 0.0;
        let mut done = 0;
        let mut by_k: Vec<usize> = (0..ks.len()).collect();
        by_k.sort_by_key(|&i| ks[i]);
        for i in by_k {
            prefix += x[done..ks[i]].iter().sum::<f64>();
            done = ks[i];
            out[i][j] = prefix;
        }
    }
    out
}

pub fn field_sample(traj: &DynamicalTrajectory, u_grid: &[f64], t_grid: &[f64]) -> Result<FieldSample> {
    check_unit_grid("u", u_grid)?;
    check_unit_grid("t", t_grid)?;
    let root = (traj.n() as f64).sqrt();
    let values =
        raw_field(traj, u_grid, t_grid).into_iter().map(|row| row.into_iter().map(|v| v / root).collect()).collect();
    Ok(FieldSample { u_grid: u_grid.to_vec(), t_grid: t_grid.to_vec(), values })
}

/// Monte Carlo tail estimate next to the entropy bracket `K_E(1/z^2) phi_bar(z)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketReport {
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub theory_value: f64,
    pub ratio: f64,
    pub hits: u64,
    pub reps: u64,
    pub seed: u64,
    /// Set when `z > n^(1/4)`, outside the regime where the bracket is proved.
    pub outside_regime: bool,
}

impl BracketReport {
    fn new(hits: u64, plan: &ReplicationPlan, theory_value: f64, outside_regime: bool) -> Self {
        let s = proportion(hits, plan.reps);
        Self {
            estimate: s.mean,
            stderr: s.stderr,
            ci_low: (s.mean - Z99 * s.stderr).max(0.0),
            ci_high: (s.mean + Z99 * s.stderr).min(1.0),
            theory_value,
            ratio: s.mean / theory_value,
            hits,
            reps: plan.reps,
            seed: plan.seed,
            outside_regime,
        }
    }
}

/// `P{sup_{t in E} S_n(t) >= z sqrt(n)}` for one set.
pub fn genest_experiment(
    n: usize,
    z: f64,
    set: &CompactSet1D,
    dist: &IncrementDistribution,
    plan: &ReplicationPlan,
) -> Result<BracketReport> {
    Ok(genest_sweep(n, z, std::slice::from_ref(set), dist, plan)?.remove(0))
}

/// [`genest_experiment`] for several sets on shared trajectories, so the
/// estimates are ordered whenever the sets are nested.
pub fn genest_sweep(
    n: usize,
    z: f64,
    sets: &[CompactSet1D],
    dist: &IncrementDistribution,
    plan: &ReplicationPlan,
) -> Result<Vec<BracketReport>> {
    if !(z >= 1.0) || !z.is_finite() {
        return Err(Error::invalid(format!("z must be finite and >= 1, got {z}")));
    }
    if sets.is_empty() || sets.len() > 64 {
        return Err(Error::invalid("genest needs between 1 and 64 sets"));
    }
    if n == 0 {
        return Err(Error::invalid("walk length must be at least 1"));
    }
    let level = z * (n as f64).sqrt();
    let refs: Vec<&CompactSet1D> = sets.iter().collect();
    let masks = replicate_fold(
        plan,
        vec![0u64; sets.len()],
        |rng, _| {
            let traj = simulate_trajectory(n, dist, rng).expect("n validated");
            sup_over_sets(&traj, &refs)
                .iter()
                .enumerate()
                .fold(0u64, |m, (i, s)| if *s >= level { m | 1 << i } else { m })
        },
        |mut acc, mask| {
            for (i, c) in acc.iter_mut().enumerate() {
                *c += (mask >> i) & 1;
            }
            acc
        },
    )?;
    let tail = phi_bar(z)?;
    let outside = z > (n as f64).powf(0.25);
    sets.iter()
        .zip(masks)
        .map(|(set, hits)| {
            let k = kolmogorov_entropy(set, 1.0 / (z * z))?.value() as f64;
            Ok(BracketReport::new(hits, plan, k * tail, outside))
        })
        .collect()
}

/// Moments of the field `S_n(u, t)` on a grid against its limiting covariance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// Grid points `(u, t)` in row-major order over `u` then `t`.
    pub points: Vec<(f64, f64)>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub target_covariance: Vec<Vec<f64>>,
    pub max_covariance_error: f64,
    /// One-sample KS of each marginal against the standard normal; `None` at `u = 0`.
    pub ks: Vec<Option<KsResult>>,
    pub reps: u64,
    pub seed: u64,
}

/// Empirical mean and covariance of `S_n(u, t)/sqrt(n)` plus marginal KS
/// tests of `S_n(u, t)/sqrt(u)`.
///
/// Integer-valued laws are smoothed for the KS test: with lattice span `g`,
/// `S_k + g U` for `U` uniform on `(-1/2, 1/2)` is compared, after scaling by
/// `sqrt(k + g^2/12)`, with the normal law.
pub fn invariance_experiment(
    n: usize,
    u_grid: &[f64],
    t_grid: &[f64],
    dist: &IncrementDistribution,
    plan: &ReplicationPlan,
) -> Result<InvarianceReport> {
    dist.require_normalized()?;
    check_unit_grid("u", u_grid)?;
    check_unit_grid("t", t_grid)?;
    if n == 0 {
        return Err(Error::invalid("walk length must be at least 1"));
    }
    let points: Vec<(f64, f64)> = u_grid.iter().flat_map(|&u| t_grid.iter().map(move |&t| (u, t))).collect();
    let span = dist.lattice_span().map(|g| g as f64);
    let ks_index: Vec<usize> = u_grid.iter().map(|u| (u * n as f64).floor() as usize).collect();
    let samples = replicate(plan, |rng, _| {
        let traj = simulate_trajectory(n, dist, rng).expect("n validated");
        let raw = raw_field(&traj, u_grid, t_grid);
        let values: Vec<f64> = raw.iter().flatten().copied().collect();
        let smoothed: Vec<f64> = match span {
            Some(g) => values.iter().map(|v| v + g * (rng.uniform() - 0.5)).collect(),
            None => values.clone(),
        };
        (values, smoothed)
    })?;
    let root = (n as f64).sqrt();
    let p = points.len();
    let reps = samples.len() as f64;
    let mut mean = vec![0.0; p];
    for (vals, _) in &samples {
        for (m, v) in mean.iter_mut().zip(vals) {
            *m += v / root;
        }
    }
    mean.iter_mut().for_each(|m| *m /= reps);
    let mut covariance = vec![vec![0.0; p]; p];
    for (vals, _) in &samples {
        for a in 0..p {
            let da = vals[a] / root - mean[a];
            for b in a..p {
                covariance[a][b] += da * (vals[b] / root - mean[b]);
            }
        }
    }
    let denom = (reps - 1.0).max(1.0);
    for a in 0..p {
        for b in a..p {
            covariance[a][b] /= denom;
            covariance[b][a] = covariance[a][b];
        }
    }
    let target_covariance: Vec<Vec<f64>> =
        points.iter().map(|&(u, t)| points.iter().map(|&(v, s)| (-(t - s).abs()).exp() * u.min(v)).collect()).collect();
    let max_covariance_error = covariance
        .iter()
        .flatten()
        .zip(target_covariance.iter().flatten())
        .map(|(c, t)| (c - t).abs())
        .fold(0.0, f64::max);
    let mut ks = Vec::with_capacity(p);
    for (idx, _) in points.iter().enumerate() {
        let k = ks_index[idx / t_grid.len()];
        if k == 0 {
            ks.push(None);
            continue;
        }
        let scale = match span {
            Some(g) => (k as f64 + g * g / 12.0).sqrt(),
            None => (k as f64).sqrt(),
        };
        let mut column: Vec<f64> = samples.iter().map(|(_, sm)| sm[idx] / scale).collect();
        ks.push(Some(ks_one_sample(&mut column, |x| 1.0 - phi_bar(x).unwrap_or(f64::NAN))?));
    }
    Ok(InvarianceReport {
        points,
        mean,
        covariance,
        target_covariance,
        max_covariance_error,
        ks,
        reps: plan.reps,
        seed: plan.seed,
    })
}

/// Per-trajectory minimum over time pieces of the return counts
/// `#{k <= m : S_k(t) = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceReport {
    pub n_max: usize,
    pub checkpoints: Vec<usize>,
    /// `min_returns[r][c]`: trajectory `r`, checkpoint `c`.
    pub min_returns: Vec<Vec<u64>>,
    pub pieces: Vec<usize>,
    /// Trajectories whose minimum at `n_max` is at least one.
    pub recurrent: u64,
    pub reps: u64,
    pub seed: u64,
}

/// Minimum return counts over every constant piece of one trajectory per
/// replication. Each piece recomputes its walk from scratch.
pub fn recurrence_experiment(
    n_max: usize,
    dist: &IncrementDistribution,
    plan: &ReplicationPlan,
) -> Result<RecurrenceReport> {
    let pmf = dist.as_lattice().ok_or_else(|| Error::invalid("recurrence needs an integer-valued increment law"))?;
    if pmf.mean().abs() > 1e-12 {
        return Err(Error::invalid("recurrence needs a mean-zero increment law"));
    }
    if n_max < 4 {
        return Err(Error::invalid("n_max must be at least 4"));
    }
    if pmf.support().iter().any(|&(v, _)| v.unsigned_abs() > 1 << 16) {
        return Err(Error::Range("increments too large for 32-bit partial sums".into()));
    }
    let checkpoints = vec![n_max / 4, n_max / 2, n_max];
    let rows = replicate(plan, |rng, _| {
        let traj = simulate_trajectory(n_max, dist, rng).expect("n validated");
        let mut mins = [u64::MAX; 3];
        let mut x: Vec<i32> = traj.initial().iter().map(|v| *v as i32).collect();
        let mut count_piece = |x: &[i32]| {
            let mut s = 0i32;
            let mut counts = [0u64; 3];
            let mut zeros = 0u64;
            let mut c = 0;
            for (k, &step) in x.iter().enumerate() {
                s += step;
                zeros += (s == 0) as u64;
                while c < 3 && k + 1 == checkpoints[c] {
                    counts[c] = zeros;
                    c += 1;
                }
            }
            for (m, v) in mins.iter_mut().zip(counts) {
                *m = (*m).min(v);
            }
        };
        count_piece(&x);
        for e in traj.events() {
            x[e.coordinate as usize - 1] = e.value as i32;
            count_piece(&x);
        }
        (mins.to_vec(), traj.piece_count())
    })?;
    let recurrent = rows.iter().filter(|(m, _)| m[2] >= 1).count() as u64;
    let (min_returns, pieces) = rows.into_iter().unzip();
    Ok(RecurrenceReport { n_max, checkpoints, min_returns, pieces, recurrent, reps: plan.reps, seed: plan.seed })
}

/// Small-ball estimate `P{inf_t max_{j<=n} |S_j(t)| <= eps sqrt(n)}` with
/// the exponent-only bracket `e^{-pi^2/(8 eps^2)} / eps^2` to `... / eps^6`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChungReport {
    pub eps: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    /// The same event at `t = 0` only.
    pub static_estimate: f64,
    pub theory_low: f64,
    pub theory_high: f64,
    pub reps: u64,
    pub seed: u64,
    /// Set when `n eps^8 <= pi/sqrt(2)`.
    pub outside_regime: bool,
}

/// Runs the small-ball experiment for every `eps` on shared trajectories
/// with standard normal increments.
pub fn chung_sweep(n: usize, eps_grid: &[f64], plan: &ReplicationPlan) -> Result<Vec<ChungReport>> {
    if n == 0 {
        return Err(Error::invalid("walk length must be at least 1"));
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::invalid("eps values must lie in (0, 1)"));
    }
    let root = (n as f64).sqrt();
    let cap = eps_grid.iter().fold(0.0f64, |m, e| m.max(*e)) * root;
    let dist = IncrementDistribution::StandardNormal;
    // (dynamical min of the piece maxima, static maximum), both capped
    let pairs = replicate(plan, |rng, _| {
        let traj = simulate_trajectory(n, &dist, rng).expect("n validated");
        let mut best = f64::INFINITY;
        let mut first = f64::INFINITY;
        traj.for_each_piece(|j, x| {
            let limit = best.min(cap);
            let mut s = 0.0f64;
            let mut m = 0.0f64;
            for &step in x {
                s += step;
                m = m.max(s.abs());
                if m > limit {
                    return;
                }
            }
            if j == 0 {
                first = m;
            }
            best = m;
        });
        (best, first)
    })?;
    let flagged_for = |eps: f64| n as f64 * eps.powi(8) <= std::f64::consts::PI / std::f64::consts::SQRT_2;
    Ok(eps_grid
        .iter()
        .map(|&eps| {
            let level = eps * root;
            let hits = pairs.iter().filter(|(b, _)| *b <= level).count() as u64;
            let static_hits = pairs.iter().filter(|(_, f)| *f <= level).count() as u64;
            let s = proportion(hits, plan.reps);
            let core = (-std::f64::consts::PI.powi(2) / (8.0 * eps * eps)).exp();
            ChungReport {
                eps,
                estimate: s.mean,
                stderr: s.stderr,
                ci_low: (s.mean - Z99 * s.stderr).max(0.0),
                ci_high: (s.mean + Z99 * s.stderr).min(1.0),
                hits,
                static_estimate: static_hits as f64 / plan.reps as f64,
                theory_low: core / (eps * eps),
                theory_high: core / eps.powi(6),
                reps: plan.reps,
                seed: plan.seed,
                outside_regime: flagged_for(eps),
            }
        })
        .collect())
}

pub fn chung_experiment(n: usize, eps: f64, plan: &ReplicationPlan) -> Result<ChungReport> {
    Ok(chung_sweep(n, &[eps], plan)?.remove(0))
}

/// Least-squares slope of `ln p` against `1/eps^2`.
pub fn chung_exponent_fit(reports: &[ChungReport]) -> Result<f64> {
    if reports.iter().any(|r| r.hits == 0) {
        return Err(Error::Inconclusive("some eps produced no small-ball events".into()));
    }
    let x: Vec<f64> = reports.iter().map(|r| 1.0 / (r.eps * r.eps)).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.estimate.ln()).collect();
    ls_slope(&x, &y)
}

/// Monte Carlo estimate of `E[max_{k<=n} sup_t |S_k(t)|^2]` against `64 n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub ratio_to_n: f64,
    /// Mean of `S_n(0)^2`, a lower bound for the estimate.
    pub endpoint_second_moment: f64,
    pub reps: u64,
    pub seed: u64,
}

pub fn tightness_moment_experiment(
    n: usize,
    dist: &IncrementDistribution,
    plan: &ReplicationPlan,
) -> Result<TightnessReport> {
    dist.require_normalized()?;
    if n == 0 {
        return Err(Error::invalid("walk length must be at least 1"));
    }
    let pairs = replicate(plan, |rng, _| {
        let traj = simulate_trajectory(n, dist, rng).expect("n validated");
        let mut top = 0.0f64;
        traj.for_each_piece(|_, x| {
            let mut s = 0.0f64;
            for &step in x {
                s += step;
                top = top.max(s.abs());
            }
        });
        let end: f64 = traj.initial().iter().sum();
        (top * top, end * end)
    })?;
    let maxima: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ends: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let s = summarize(&maxima);
    Ok(TightnessReport {
        n,
        estimate: s.mean,
        stderr: s.stderr,
        bound: 64.0 * n as f64,
        ratio_to_n: s.mean / n as f64,
        endpoint_second_moment: summarize(&ends).mean,
        reps: plan.reps,
        seed: plan.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randvar::LatticePmf;
    use crate::set_geometry::make_cantor;
    use crate::stats::ks_two_sample;

    fn plan(seed: u64, reps: u64) -> ReplicationPlan {
        ReplicationPlan::new(seed, reps, 1).unwrap()
    }

    #[test]
    fn event_count_has_mean_n() {
        let n = 200;
        let counts: Vec<f64> = (0..1000)
            .map(|i| {
                let mut rng = RngStream::new(3, i);
                simulate_trajectory(n, &IncrementDistribution::Rademacher, &mut rng).unwrap().events().len() as f64
            })
            .collect();
        let m = summarize(&counts).mean;
        assert!((m - n as f64).abs() < 3.0 * (n as f64 / 1000.0).sqrt(), "mean {m}");
    }

    #[test]
    fn marginal_increments_follow_nu() {
        let mut pooled = Vec::new();
        for i in 0..10_000 {
            let mut rng = RngStream::new(8, i);
            let traj = simulate_trajectory(4, &IncrementDistribution::StandardNormal, &mut rng).unwrap();
            pooled.push(traj.increments_at(0.5)[i as usize % 4]);
        }
        let r = ks_one_sample(&mut pooled, |x| 1.0 - phi_bar(x).unwrap()).unwrap();
        assert!(r.passes(0.01), "{r:?}");
    }

    #[test]
    fn walk_is_stationary_in_t() {
        let n = 64;
        let (mut at0, mut at_late) = (Vec::new(), Vec::new());
        for i in 0..10_000 {
            let mut rng = RngStream::new(21, i);
            let traj = simulate_trajectory(n, &IncrementDistribution::StandardNormal, &mut rng).unwrap();
            at0.push(traj.partial_sum(n, 0.0) / (n as f64).sqrt());
            // an independent copy at a later time
            let mut rng = RngStream::new(22, i);
            let other = simulate_trajectory(n, &IncrementDistribution::StandardNormal, &mut rng).unwrap();
            at_late.push(other.partial_sum(n, 0.73) / (n as f64).sqrt());
        }
        assert!(ks_two_sample(&mut at0.clone(), &mut at_late.clone()).unwrap().passes(0.01));
        assert!(ks_one_sample(&mut at_late, |x| 1.0 - phi_bar(x).unwrap()).unwrap().passes(0.01));
    }

    fn brute_sup(traj: &DynamicalTrajectory, set: &CompactSet1D) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for j in 0..traj.piece_count() {
            let (lo, hi, closed) = traj.piece(j);
            let hit = if closed {
                set.intervals().iter().any(|&(a, b)| a <= hi && b >= lo)
            } else {
                lo < hi && set.intervals().iter().any(|&(a, b)| a < hi && b >= lo)
            };
            if hit {
                best = best.max(traj.partial_sum(traj.n(), lo));
            }
        }
        best
    }

    #[test]
    fn sup_matches_brute_force_on_small_trajectories() {
        let sets = [
            CompactSet1D::unit_interval(),
            make_cantor(2).unwrap(),
            CompactSet1D::points(&[0.0, 0.31, 1.0]).unwrap(),
            CompactSet1D::interval(0.4, 0.45).unwrap(),
        ];
        for i in 0..300 {
            let mut rng = RngStream::new(77, i);
            let traj = simulate_trajectory(10, &IncrementDistribution::StandardNormal, &mut rng).unwrap();
            assert!(traj.events().len() <= 30);
            for set in &sets {
                // the scan updates S_n incrementally, the brute force re-sums
                assert!((sup_over_set(&traj, set) - brute_sup(&traj, set)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn singleton_sup_is_point_value() {
        let mut rng = RngStream::new(4, 4);
        let traj = simulate_trajectory(50, &IncrementDistribution::StandardNormal, &mut rng).unwrap();
        for t in [0.0, 0.25, 0.5, 1.0] {
            let s = sup_over_set(&traj, &CompactSet1D::singleton(t).unwrap());
            assert!((s - traj.partial_sum(50, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn no_events_means_static_walk() {
        let traj = DynamicalTrajectory::from_parts(vec![1.0, -2.0, 0.5], vec![]).unwrap();
        assert_eq!(sup_over_set(&traj, &CompactSet1D::unit_interval()), -0.5);
        assert_eq!(traj.partial_sum(2, 0.9), -1.0);
    }

    #[test]
    fn final_piece_is_closed_at_one() {
        let ev = vec![RefreshEvent { time: 0.5, coordinate: 1, value: 10.0 }];
        let traj = DynamicalTrajectory::from_parts(vec![0.0], ev).unwrap();
        assert_eq!(sup_over_set(&traj, &CompactSet1D::singleton(1.0).unwrap()), 10.0);
        assert_eq!(sup_over_set(&traj, &CompactSet1D::singleton(0.49).unwrap()), 0.0);
    }

    #[test]
    fn field_sample_shape_and_zero_row() {
        let mut rng = RngStream::new(1, 2);
        let traj = simulate_trajectory(100, &IncrementDistribution::Rademacher, &mut rng).unwrap();
        let f = field_sample(&traj, &[0.0, 0.5, 1.0], &[0.9, 0.1]).unwrap();
        assert!(f.values[0].iter().all(|v| *v == 0.0));
        assert_eq!(f.values[2][0], traj.partial_sum(100, 0.9) / 10.0);
        assert_eq!(f.values[1][1], traj.partial_sum(50, 0.1) / 10.0);
    }

    #[test]
    fn genest_singleton_matches_gaussian_tail() {
        let z = 1.5;
        let r = genest_experiment(
            64,
            z,
            &CompactSet1D::singleton(0.3).unwrap(),
            &IncrementDistribution::StandardNormal,
            &plan(5, 20_000),
        )
        .unwrap();
        let p = phi_bar(z).unwrap();
        assert!((r.estimate - p).abs() <= 3.0 * r.stderr, "{} vs {p}", r.estimate);
        assert!(!r.outside_regime);
    }

    #[test]
    fn genest_sweep_orders_nested_sets() {
        let sets = [CompactSet1D::unit_interval(), make_cantor(4).unwrap(), CompactSet1D::singleton(0.0).unwrap()];
        let r = genest_sweep(256, 2.0, &sets, &IncrementDistribution::StandardNormal, &plan(9, 3000)).unwrap();
        assert!(r[0].hits >= r[1].hits && r[1].hits >= r[2].hits);
        let flagged = genest_sweep(16, 2.5, &sets[..1], &IncrementDistribution::StandardNormal, &plan(9, 10)).unwrap();
        assert!(flagged[0].outside_regime);
    }

    #[test]
    fn invariance_covariances_at_small_scale() {
        let r =
            invariance_experiment(256, &[0.5, 1.0], &[0.0, 0.5], &IncrementDistribution::Rademacher, &plan(13, 4000))
                .unwrap();
        assert!(r.max_covariance_error < 0.08, "{}", r.max_covariance_error);
        assert!(r.ks.iter().flatten().all(|k| k.passes(0.001)));
        let bad = IncrementDistribution::Lattice(LatticePmf::lazy());
        assert!(invariance_experiment(16, &[1.0], &[0.0], &bad, &plan(1, 10)).is_err());
    }

    #[test]
    fn recurrence_counts_are_monotone_in_m() {
        let lazy = IncrementDistribution::Lattice(LatticePmf::lazy());
        let r = recurrence_experiment(400, &lazy, &plan(2, 5)).unwrap();
        for row in &r.min_returns {
            assert!(row[0] <= row[1] && row[1] <= row[2]);
        }
        assert!(recurrence_experiment(400, &IncrementDistribution::StandardNormal, &plan(2, 1)).is_err());
    }

    #[test]
    fn recurrence_without_events_equals_static_count() {
        // the static walk +1 -1 +1 -1 returns twice in 4 steps
        let traj = DynamicalTrajectory::from_parts(vec![1.0, -1.0, 1.0, -1.0], vec![]).unwrap();
        let mut zeros = 0;
        traj.for_each_piece(|_, x| {
            let mut s = 0.0;
            for v in x {
                s += v;
                zeros += (s == 0.0) as u32;
            }
        });
        assert_eq!(zeros, 2);
    }

    #[test]
    fn chung_is_monotone_and_dominates_static() {
        let r = chung_sweep(128, &[0.5, 0.6, 0.8], &plan(4, 2000)).unwrap();
        assert!(r[0].hits <= r[1].hits && r[1].hits <= r[2].hits);
        for rep in &r {
            assert!(rep.estimate >= rep.static_estimate);
        }
    }

    #[test]
    fn tightness_respects_bound() {
        let r = tightness_moment_experiment(64, &IncrementDistribution::StandardNormal, &plan(6, 200)).unwrap();
        assert!(r.estimate + 3.0 * r.stderr <= r.bound);
        assert!(r.estimate >= r.endpoint_second_moment);
    }
}
