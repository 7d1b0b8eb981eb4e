//! Finitely represented compact subsets of [0, 1] and their packing
//! (Kolmogorov epsilon-entropy) and grid-cell (Minkowski content) counts.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stats::ls_slope;

/// Where a set came from. Generated fixtures approximate an ideal set down to
/// a known resolution.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Explicit,
    Interval,
    Points,
    Cantor { level: u32 },
    Sequence { eps: f64, k_max: usize },
    Union(Vec<Provenance>),
}

impl Provenance {
    fn resolution(&self, set: &CompactSet1D) -> f64 {
        match self {
            Provenance::Explicit | Provenance::Interval | Provenance::Points => 0.0,
            Provenance::Cantor { level } => 3f64.powi(-(*level as i32)),
            // the unrepresented tail of the sequence clusters in (0, r_kmax)
            Provenance::Sequence { .. } => set.intervals.get(1).map_or(0.0, |iv| iv.0),
            Provenance::Union(parts) => parts.iter().map(|p| p.resolution(set)).fold(0.0, f64::max),
        }
    }
}

/// A non-empty finite union of disjoint closed intervals in [0, 1]. Points are
/// degenerate intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSet1D {
    intervals: Vec<(f64, f64)>,
    provenance: Provenance,
    resolution: f64,
}

/// Number of points in a maximal packing, or of occupied grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntropyCount(pub u64);

impl EntropyCount {
    pub fn value(self) -> u64 {
        self.0
    }
}

impl CompactSet1D {
    /// Builds a set from intervals that are already sorted and pairwise
    /// disjoint (`b_i < a_{i+1}`).
    pub fn new(intervals: Vec<(f64, f64)>, provenance: Provenance) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::invalid("a compact set needs at least one interval"));
        }
        for &(a, b) in &intervals {
            if !(0.0 <= a && a <= b && b <= 1.0) {
                return Err(Error::invalid(format!("interval [{a}, {b}] not inside [0, 1]")));
            }
        }
        if let Some(w) = intervals.windows(2).find(|w| w[0].1 >= w[1].0) {
            return Err(Error::invalid(format!(
                "intervals [{}, {}] and [{}, {}] are not sorted and disjoint",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
        let mut set = Self { intervals, provenance, resolution: 0.0 };
        set.resolution = set.provenance.resolution(&set);
        Ok(set)
    }

    /// Sorts arbitrary closed intervals and merges any that overlap or touch.
    pub fn from_unsorted(mut intervals: Vec<(f64, f64)>, provenance: Provenance) -> Result<Self> {
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Self::new(merged, provenance)
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)], Provenance::Interval)
    }

    pub fn unit_interval() -> Self {
        Self::interval(0.0, 1.0).expect("valid interval")
    }

    pub fn singleton(t: f64) -> Result<Self> {
        Self::new(vec![(t, t)], Provenance::Points)
    }

    pub fn points(points: &[f64]) -> Result<Self> {
        Self::from_unsorted(points.iter().map(|&p| (p, p)).collect(), Provenance::Points)
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self::from_unsorted(all, Provenance::Union(vec![self.provenance.clone(), other.provenance.clone()]))
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Finest scale at which this representation is faithful to the set it
    /// stands for; 0 for exactly represented sets.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn min(&self) -> f64 {
        self.intervals[0].0
    }

    pub fn max(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].1
    }

    /// Total Lebesgue measure.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// True when every interval is degenerate.
    pub fn is_point_set(&self) -> bool {
        self.intervals.iter().all(|(a, b)| a == b)
    }

    /// All points of a point set, or `None` for sets containing intervals.
    pub fn point_list(&self) -> Option<Vec<f64>> {
        self.is_point_set().then(|| self.intervals.iter().map(|iv| iv.0).collect())
    }

    pub fn contains(&self, x: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv.1 < x);
        i < self.intervals.len() && self.intervals[i].0 <= x
    }

    /// Index of the first interval whose right end is at least `x`.
    #[inline]
    pub(crate) fn first_reaching(&self, x: f64, from: usize) -> usize {
        from + self.intervals[from..].partition_point(|iv| iv.1 < x)
    }

    /// Maximal packing size as a float, exact below 2^53 and usable for tiny
    /// `eps` where the count itself is astronomically large.
    pub(crate) fn packing_count(&self, eps: f64) -> f64 {
        let iv = &self.intervals;
        let mut count = 1.0;
        let mut last = iv[0].0;
        let mut idx = 0;
        loop {
            let need = smallest_separated(last, eps);
            if need.is_infinite() {
                return count;
            }
            idx = self.first_reaching(need, idx);
            if idx == iv.len() {
                return count;
            }
            let (a, b) = iv[idx];
            last = a.max(need);
            count += 1.0;
            // long runs inside one interval are counted arithmetically
            let span = (b - last) / eps;
            if span > 64.0 {
                let m = (span.floor() - 2.0).max(0.0);
                count += m;
                last += m * eps;
            }
        }
    }
}

/// Relative slack on the separation test. Ternary fixtures have endpoints that
/// are not representable, so exact ties like `2/27 - 1/27 >= 1/27` must survive
/// rounding.
pub const SEPARATION_RTOL: f64 = 1e-12;

/// The separation predicate `|y - x| >= eps` shared by every packing routine.
#[inline]
pub fn separated(x: f64, y: f64, eps: f64) -> bool {
    (y - x).abs() >= eps * (1.0 - SEPARATION_RTOL)
}

/// Smallest double `x` with `separated(last, x, eps)`.
#[inline]
fn smallest_separated(last: f64, eps: f64) -> f64 {
    let eps = eps * (1.0 - SEPARATION_RTOL);
    let mut x = last + eps;
    if x - last < eps {
        while x - last < eps {
            x = x.next_up();
        }
    } else {
        while x.next_down() - last >= eps {
            x = x.next_down();
        }
    }
    x
}

/// Maximal number of points of `set` that are pairwise at distance `>= eps`.
///
/// Left-to-right greedy: take the leftmost point, then repeatedly the leftmost
/// point at distance at least `eps` from the last one taken. On the line this
/// packing is maximal.
pub fn kolmogorov_entropy(set: &CompactSet1D, eps: f64) -> Result<EntropyCount> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("eps must be positive and finite, got {eps}")));
    }
    let k = set.packing_count(eps);
    if k > (1u64 << 53) as f64 {
        return Err(Error::Range(format!("packing count {k:e} exceeds exact integer range")));
    }
    Ok(EntropyCount(k as u64))
}

/// `floor(x * n)` computed exactly for a double `x` and integer `n < 2^53`.
#[inline]
fn exact_floor_mul(x: f64, n: f64) -> i64 {
    let mut k = (x * n).floor();
    if x.mul_add(n, -k) < 0.0 {
        k -= 1.0;
    } else if x.mul_add(n, -(k + 1.0)) >= 0.0 {
        k += 1.0;
    }
    k as i64
}

/// Number of integers `i` with `[i/n, (i+1)/n)` meeting the set.
pub fn minkowski_content(set: &CompactSet1D, n: u64) -> Result<EntropyCount> {
    if n == 0 {
        return Err(Error::invalid("grid size n must be at least 1"));
    }
    if n > 1u64 << 52 {
        return Err(Error::Range(format!("grid size {n} too large for exact cell arithmetic")));
    }
    let nf = n as f64;
    let mut total: u64 = 0;
    let mut last_cell: Option<i64> = None;
    for &(a, b) in set.intervals() {
        let (lo, hi) = (exact_floor_mul(a, nf), exact_floor_mul(b, nf));
        let start = match last_cell {
            Some(c) if c >= lo => c + 1,
            _ => lo,
        };
        if hi >= start {
            total += (hi - start + 1) as u64;
        }
        last_cell = Some(last_cell.map_or(hi, |c| c.max(hi)));
    }
    Ok(EntropyCount(total))
}

/// True iff the half-open window `[lo, hi)` meets the set. An empty window
/// (`lo == hi`) meets nothing.
pub fn interval_hit(set: &CompactSet1D, lo: f64, hi: f64) -> Result<bool> {
    if !(lo <= hi) {
        return Err(Error::invalid(format!("query window [{lo}, {hi}) is reversed")));
    }
    let i = set.intervals.partition_point(|iv| iv.1 < lo);
    Ok(i < set.intervals.len() && set.intervals[i].0 < hi)
}

/// Level-`level` approximation of the ternary Cantor set: `2^level` closed
/// intervals of length `3^-level`. Endpoints are correctly rounded `N / 3^level`.
pub fn make_cantor(level: u32) -> Result<CompactSet1D> {
    if !(1..=20).contains(&level) {
        return Err(Error::invalid(format!("cantor level {level} outside 1..=20")));
    }
    let denom = 3u64.pow(level) as f64;
    let count = 1usize << level;
    let mut intervals = Vec::with_capacity(count);
    for k in 0..count as u64 {
        // binary digits of k become ternary digits 0/2
        let mut numer = 0u64;
        for j in 0..level {
            if (k >> (level - 1 - j)) & 1 == 1 {
                numer += 2 * 3u64.pow(level - 1 - j);
            }
        }
        intervals.push((numer as f64 / denom, (numer + 1) as f64 / denom));
    }
    CompactSet1D::new(intervals, Provenance::Cantor { level })
}

/// `sum_{j >= from} j^-s` for `s > 1`: direct summation up to a cutoff, then
/// the Euler-Maclaurin tail.
fn zeta_tail(s: f64, from: u64) -> f64 {
    let cutoff = from.max(64);
    let n = cutoff as f64;
    let mut tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * n.powf(-s - 5.0) / 30240.0;
    for j in (from..cutoff).rev() {
        tail += (j as f64).powf(-s);
    }
    tail
}

/// Countable set `{0} ∪ {r_k}` with consecutive gaps proportional to
/// `k^(-1/eps)`, normalized so that `r_0 = 1` and `r_k -> 0`:
/// `r_k = sum_{j>k} j^(-1/eps) / zeta(1/eps)`. Its packing number grows like
/// `delta^(-eps)`. Points `r_0..=r_kmax` are emitted; generation stops early if
/// consecutive points stop being distinct in double precision.
pub fn make_sequence_set(eps: f64, k_max: usize) -> Result<CompactSet1D> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("sequence exponent {eps} outside (0, 1)")));
    }
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let s = 1.0 / eps;
    let zeta = zeta_tail(s, 1);
    // backward accumulation from the far tail keeps small values accurate
    let mut tails = vec![0.0; k_max + 1];
    let mut acc = zeta_tail(s, k_max as u64 + 1);
    tails[k_max] = acc;
    for k in (0..k_max).rev() {
        acc += ((k + 1) as f64).powf(-s);
        tails[k] = acc;
    }
    let mut points = Vec::with_capacity(k_max + 2);
    points.push(0.0);
    let mut kept = 0;
    for k in (0..=k_max).rev() {
        let r = if k == 0 { 1.0 } else { tails[k] / zeta };
        if r <= *points.last().expect("non-empty") {
            // collided with its neighbour: keep only the resolvable head
            points.truncate(1);
            kept = 0;
            continue;
        }
        points.push(r);
        kept += 1;
    }
    let intervals = points.iter().map(|&p| (p, p)).collect();
    CompactSet1D::new(intervals, Provenance::Sequence { eps, k_max: kept.max(1) - 1 })
}

/// A set that can be materialized at any requested resolution.
pub trait SetFamily {
    /// A representation faithful down to `scale`.
    fn resolve(&self, scale: f64) -> Result<CompactSet1D>;
}

impl SetFamily for CompactSet1D {
    fn resolve(&self, scale: f64) -> Result<CompactSet1D> {
        if self.resolution > scale {
            return Err(Error::Resolution { resolution: self.resolution, scale });
        }
        Ok(self.clone())
    }
}

/// The ternary Cantor set, resolved by choosing the approximation level.
#[derive(Debug, Clone, Copy)]
pub struct CantorFamily;

impl SetFamily for CantorFamily {
    fn resolve(&self, scale: f64) -> Result<CompactSet1D> {
        let level = ((1.0 / scale).ln() / 3f64.ln()).ceil().max(1.0);
        if level > 20.0 {
            return Err(Error::Resolution { resolution: 3f64.powi(-20), scale });
        }
        make_cantor(level as u32)
    }
}

/// The countable sequence set with exponent `eps`, resolved by choosing `k_max`.
#[derive(Debug, Clone, Copy)]
pub struct SequenceFamily {
    pub eps: f64,
}

impl SetFamily for SequenceFamily {
    fn resolve(&self, scale: f64) -> Result<CompactSet1D> {
        const MAX_POINTS: f64 = 5e7;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!("sequence exponent {} outside (0, 1)", self.eps)));
        }
        let s = 1.0 / self.eps;
        let zeta = zeta_tail(s, 1);
        // r_k ~ k^(1-s) / ((s-1) zeta)
        let mut k = ((s - 1.0) * zeta * scale).powf(-1.0 / (s - 1.0)).ceil().max(1.0);
        while zeta_tail(s, k as u64 + 1) / zeta > scale {
            k *= 1.25;
        }
        if k > MAX_POINTS {
            return Err(Error::Resource(format!("sequence set needs {k:e} points to resolve {scale:e}")));
        }
        let set = make_sequence_set(self.eps, k as usize)?;
        if set.resolution() > scale {
            return Err(Error::Resolution { resolution: set.resolution(), scale });
        }
        Ok(set)
    }
}

/// Least-squares slope of `ln K_E(eps)` against `ln(1/eps)` over `eps_grid`,
/// with the set resolved ten times finer than the smallest `eps`.
pub fn fit_entropy_exponent(family: &dyn SetFamily, eps_grid: &[f64]) -> Result<f64> {
    if eps_grid.len() < 4 {
        return Err(Error::invalid("entropy fit needs at least 4 scales"));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::invalid("entropy fit scales must be positive"));
    }
    let lo = eps_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps_grid.iter().cloned().fold(0.0, f64::max);
    if lo == hi {
        return Err(Error::invalid("degenerate entropy grid: all scales equal"));
    }
    if hi / lo < 100.0 {
        return Err(Error::invalid("entropy grid must span at least two decades"));
    }
    let set = family.resolve(lo / 10.0)?;
    let x: Vec<f64> = eps_grid.iter().map(|e| -e.ln()).collect();
    let y: Vec<f64> = eps_grid.iter().map(|&e| set.packing_count(e).ln()).collect();
    ls_slope(&x, &y)
}

impl FromStr for CompactSet1D {
    type Err = Error;

    /// `interval:a,b` | `points:p1;p2;...` | `cantor:LEVEL` |
    /// `sequence:EPS,KMAX` | `union:SPEC|SPEC|...`
    fn from_str(s: &str) -> Result<Self> {
        if s.chars().any(char::is_whitespace) {
            return Err(Error::invalid("whitespace is not allowed in set specs"));
        }
        let (kind, body) =
            s.split_once(':').ok_or_else(|| Error::invalid(format!("set spec `{s}` lacks a kind prefix")))?;
        let real = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::invalid(format!("bad number `{v}` in set spec")))
        };
        match kind {
            "interval" => {
                let (a, b) = body.split_once(',').ok_or_else(|| Error::invalid("interval spec needs `a,b`"))?;
                Self::interval(real(a)?, real(b)?)
            }
            "points" => {
                let pts = body.split(';').map(real).collect::<Result<Vec<_>>>()?;
                Self::points(&pts)
            }
            "cantor" => {
                let level = body.parse().map_err(|_| Error::invalid(format!("bad cantor level `{body}`")))?;
                make_cantor(level)
            }
            "sequence" => {
                let (e, k) = body.split_once(',').ok_or_else(|| Error::invalid("sequence spec needs `EPS,KMAX`"))?;
                let k = k.parse().map_err(|_| Error::invalid(format!("bad k_max `{k}`")))?;
                make_sequence_set(real(e)?, k)
            }
            "union" => {
                let mut parts = body.split('|').map(str::parse::<CompactSet1D>);
                let first = parts.next().ok_or_else(|| Error::invalid("empty union"))??;
                parts.try_fold(first, |acc, p| acc.union(&p?))
            }
            other => Err(Error::invalid(format!("unknown set kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive maximum separated subset of a small point list.
    fn brute_packing(points: &[f64], eps: f64) -> u64 {
        let n = points.len();
        let mut best = 0;
        for mask in 1u32..(1 << n) {
            let chosen: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| points[i]).collect();
            let ok = chosen.iter().enumerate().all(|(i, &x)| chosen[i + 1..].iter().all(|&y| separated(x, y, eps)));
            if ok {
                best = best.max(chosen.len() as u64);
            }
        }
        best
    }

    #[test]
    fn unit_interval_quarter() {
        let e = CompactSet1D::unit_interval();
        assert_eq!(kolmogorov_entropy(&e, 0.25).unwrap().value(), 5);
    }

    #[test]
    fn small_point_set_against_brute_force() {
        let pts = [0.0, 0.1, 0.25, 0.6];
        let e = CompactSet1D::points(&pts).unwrap();
        assert_eq!(brute_packing(&pts, 0.2), 3);
        assert_eq!(kolmogorov_entropy(&e, 0.2).unwrap().value(), 3);
    }

    #[test]
    fn cantor_level3_endpoints() {
        let c = make_cantor(3).unwrap();
        let ends: Vec<f64> = c.intervals().iter().flat_map(|&(a, b)| [a, b]).collect();
        let eps = 1.0 / 27.0;
        assert_eq!(brute_packing(&ends[..12], eps), 12);
        assert_eq!(kolmogorov_entropy(&c, eps).unwrap().value(), 16);
    }

    #[test]
    fn rejects_bad_eps() {
        let e = CompactSet1D::unit_interval();
        assert!(kolmogorov_entropy(&e, 0.0).is_err());
        assert!(kolmogorov_entropy(&e, -1.0).is_err());
        assert!(kolmogorov_entropy(&e, f64::NAN).is_err());
    }

    #[test]
    fn huge_counts_are_range_errors_but_float_counts_work() {
        let e = CompactSet1D::unit_interval();
        assert!(kolmogorov_entropy(&e, 1e-30).is_err());
        let k = e.packing_count(1e-30);
        assert!((k / 1e30 - 1.0).abs() < 1e-9);
        assert_eq!(e.packing_count(1e-6), 1_000_001.0);
    }

    #[test]
    fn minkowski_examples() {
        let unit = CompactSet1D::unit_interval();
        assert_eq!(minkowski_content(&unit, 4).unwrap().value(), 5);
        assert_eq!(minkowski_content(&CompactSet1D::singleton(0.5).unwrap(), 4).unwrap().value(), 1);
        let pts = CompactSet1D::points(&[0.0, 0.1, 0.25, 0.6]).unwrap();
        assert_eq!(minkowski_content(&pts, 10).unwrap().value(), 4);
        assert!(minkowski_content(&unit, 0).is_err());
    }

    #[test]
    fn exact_cells_respect_double_values() {
        // the double nearest 0.3 lies below 3/10
        assert_eq!(exact_floor_mul(0.3, 10.0), 2);
        assert_eq!(exact_floor_mul(0.5, 4.0), 2);
        assert_eq!(exact_floor_mul(1.0, 3.0), 3);
    }

    #[test]
    fn interval_hit_examples() {
        let a = CompactSet1D::interval(0.2, 0.4).unwrap();
        assert!(!interval_hit(&a, 0.0, 0.1).unwrap());
        assert!(interval_hit(&a, 0.4, 0.5).unwrap());
        assert!(!interval_hit(&a, 0.1, 0.2).unwrap());
        let p = CompactSet1D::singleton(0.5).unwrap();
        assert!(interval_hit(&p, 0.5, 0.6).unwrap());
        let c1 = make_cantor(1).unwrap();
        assert!(!interval_hit(&c1, 0.4, 0.6).unwrap());
        assert!(interval_hit(&a, 0.5, 0.1).is_err());
    }

    #[test]
    fn cantor_structure() {
        let c1 = make_cantor(1).unwrap();
        assert_eq!(c1.intervals(), &[(0.0, 1.0 / 3.0), (2.0 / 3.0, 1.0)]);
        let c2 = make_cantor(2).unwrap();
        assert_eq!(c2.intervals().len(), 4);
        for &(a, b) in c2.intervals() {
            assert!((b - a - 1.0 / 9.0).abs() < 1e-15);
        }
        for k in 1..=12 {
            let c = make_cantor(k).unwrap();
            assert!((c.length() - (2.0f64 / 3.0).powi(k as i32)).abs() < 1e-12);
        }
        assert!(make_cantor(0).is_err());
        assert!(make_cantor(21).is_err());
    }

    #[test]
    fn sequence_set_gaps_follow_power_law() {
        let eps = 0.5;
        let set = make_sequence_set(eps, 50).unwrap();
        let pts = set.point_list().unwrap();
        assert_eq!(pts.len(), 52);
        assert_eq!(pts[0], 0.0);
        assert_eq!(*pts.last().unwrap(), 1.0);
        let zeta = std::f64::consts::PI.powi(2) / 6.0;
        // descending from r_0 = 1: gap between r_{k-1} and r_k is k^-2 / zeta(2)
        for k in 1..=50usize {
            let gap = pts[52 - k] - pts[51 - k];
            let want = (k as f64).powi(-2) / zeta;
            assert!((gap - want).abs() < 1e-14, "k={k}: {gap} vs {want}");
        }
        assert!(make_sequence_set(1.0, 3).is_err());
        assert!(make_sequence_set(0.0, 3).is_err());
    }

    #[test]
    fn zeta_tail_matches_closed_form() {
        let z2 = zeta_tail(2.0, 1);
        assert!((z2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        let z4 = zeta_tail(4.0, 1);
        assert!((z4 - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-14);
    }

    #[test]
    fn entropy_fits() {
        let grid: Vec<f64> = (3..=8).map(|k| 3f64.powi(-k)).collect();
        let slope = fit_entropy_exponent(&CantorFamily, &grid).unwrap();
        assert!((slope - 2f64.ln() / 3f64.ln()).abs() < 0.05, "{slope}");

        let grid: Vec<f64> = (0..8).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect();
        let slope = fit_entropy_exponent(&CompactSet1D::unit_interval(), &grid).unwrap();
        assert!((slope - 1.0).abs() < 0.02, "{slope}");

        let grid: Vec<f64> = (0..9).map(|k| 10f64.powf(-2.0 - 0.5 * k as f64)).collect();
        let slope = fit_entropy_exponent(&SequenceFamily { eps: 0.5 }, &grid).unwrap();
        assert!((slope - 0.5).abs() < 0.07, "{slope}");

        assert!(fit_entropy_exponent(&CantorFamily, &[0.1; 5]).is_err());
        assert!(fit_entropy_exponent(&CantorFamily, &[0.1, 0.05]).is_err());
    }

    #[test]
    fn grammar_round_trips_shapes() {
        let s: CompactSet1D = "interval:0,1".parse().unwrap();
        assert_eq!(s.intervals(), &[(0.0, 1.0)]);
        let p: CompactSet1D = "points:0.6;0;0.25".parse().unwrap();
        assert_eq!(p.point_list().unwrap(), vec![0.0, 0.25, 0.6]);
        let u: CompactSet1D = "union:interval:0,0.2|interval:0.1,0.3|points:0.9".parse().unwrap();
        assert_eq!(u.intervals(), &[(0.0, 0.3), (0.9, 0.9)]);
        let c: CompactSet1D = "cantor:4".parse().unwrap();
        assert_eq!(c.intervals().len(), 16);
        assert!("interval:0, 1".parse::<CompactSet1D>().is_err());
        assert!("interval:0.5,0.2".parse::<CompactSet1D>().is_err());
        assert!("disk:1".parse::<CompactSet1D>().is_err());
        assert!("points:".parse::<CompactSet1D>().is_err());
    }

    #[test]
    fn constructor_enforces_invariants() {
        assert!(CompactSet1D::new(vec![], Provenance::Explicit).is_err());
        assert!(CompactSet1D::new(vec![(0.0, 0.5), (0.5, 1.0)], Provenance::Explicit).is_err());
        assert!(CompactSet1D::new(vec![(0.5, 0.6), (0.1, 0.2)], Provenance::Explicit).is_err());
        assert!(CompactSet1D::new(vec![(-0.1, 0.2)], Provenance::Explicit).is_err());
    }

    #[test]
    fn resolution_tracks_provenance() {
        assert_eq!(CompactSet1D::unit_interval().resolution(), 0.0);
        assert!((make_cantor(5).unwrap().resolution() - 3f64.powi(-5)).abs() < 1e-18);
        let seq = make_sequence_set(0.5, 10).unwrap();
        assert_eq!(seq.resolution(), seq.intervals()[1].0);
        assert!(CantorFamily.resolve(1e-12).is_err());
        let resolved = SequenceFamily { eps: 0.5 }.resolve(1e-4).unwrap();
        assert!(resolved.resolution() <= 1e-4);
    }
}
