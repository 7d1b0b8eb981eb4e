//! Envelope functions `H`, the integral tests `J_zeta(H)` and `psi_H(E)`, the
//! exponent `delta(H)` and the dimension formula built on it.
//!
//! Every integral is taken against `dt/t` over `[1, T]` and evaluated in the
//! variable `v = lnln t`, so horizons like `lnln T = 1e9` are reachable. Partial
//! integrals are accumulated in log space.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::randvar::ln_phi_bar;
use crate::set_geometry::CompactSet1D;
use crate::stats::ls_slope;

/// `lnln t0` where `H_rho` switches from its constant continuation to the
/// closed form; `t0 = e^(e^e)` is the first point where `lnlnln t >= 0`.
pub const HRHO_LOGLOG_SWITCH: f64 = std::f64::consts::E;

/// Default horizon, expressed as `lnln T`.
pub const DEFAULT_LOGLOG_HORIZON: f64 = 1e9;

/// Default number of log-spaced panels in the tail segment.
pub const DEFAULT_PANELS: usize = 256;

/// Log-slope below which a partial integral is declared converging.
pub const CONVERGING_SLOPE: f64 = 0.05;
/// Log-slope above which a partial integral is declared diverging.
pub const DIVERGING_SLOPE: f64 = 0.2;

const PANEL_ORDER: usize = 8;
const HEAD_PANELS: usize = 4;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeKind {
    /// `sqrt(2 lnln t + 2 rho lnlnln t)` above `t0`, constant below.
    HRho { rho: f64 },
    /// `sqrt(2c lnln t)` for `t > e`, zero below.
    SqrtLogLog { c: f64 },
    /// Piecewise-linear through `(t, H)` breakpoints, constant outside them.
    Tabulated { breakpoints: Vec<(f64, f64)> },
}

/// A non-negative, non-decreasing function on `(0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    kind: EnvelopeKind,
}

impl Envelope {
    pub fn h_rho(rho: f64) -> Result<Self> {
        // rho > -e keeps the closed form increasing and real at t0
        if !rho.is_finite() || rho <= -HRHO_LOGLOG_SWITCH {
            return Err(Error::invalid(format!("h_rho needs finite rho > -e, got {rho}")));
        }
        Ok(Self { kind: EnvelopeKind::HRho { rho } })
    }

    pub fn sqrt_2c_loglog(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("loglog envelope needs finite c > 0, got {c}")));
        }
        Ok(Self { kind: EnvelopeKind::SqrtLogLog { c } })
    }

    pub fn tabulated(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::invalid("tabulated envelope needs at least one breakpoint"));
        }
        for &(t, h) in &breakpoints {
            if !(t > 0.0 && t.is_finite() && h >= 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!("bad envelope breakpoint ({t}, {h})")));
            }
        }
        for w in breakpoints.windows(2) {
            if !(w[0].0 < w[1].0) || w[0].1 > w[1].1 {
                return Err(Error::invalid("tabulated envelope must be increasing in t and non-decreasing in H"));
            }
        }
        Ok(Self { kind: EnvelopeKind::Tabulated { breakpoints } })
    }

    /// The zero envelope.
    pub fn zero() -> Self {
        Self { kind: EnvelopeKind::Tabulated { breakpoints: vec![(1.0, 0.0)] } }
    }

    pub fn kind(&self) -> &EnvelopeKind {
        &self.kind
    }

    /// `H(t)` for `t > 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("envelope evaluated at non-positive t = {t}")));
        }
        let h2 = match &self.kind {
            EnvelopeKind::Tabulated { breakpoints } => return Ok(interpolate(breakpoints, t)),
            _ if t <= 1.0 => self.h_squared_at_loglog(f64::NEG_INFINITY),
            _ => self.h_squared_at_loglog(t.ln().ln()),
        };
        Ok(h2.sqrt())
    }

    /// `H^2(t)` at `t = exp(exp(v))`.
    pub fn h_squared_at_loglog(&self, v: f64) -> f64 {
        match &self.kind {
            EnvelopeKind::HRho { rho } => {
                if v > HRHO_LOGLOG_SWITCH {
                    2.0 * v + 2.0 * rho * v.ln()
                } else {
                    2.0 * HRHO_LOGLOG_SWITCH + 2.0 * rho
                }
            }
            EnvelopeKind::SqrtLogLog { c } => {
                if v > 0.0 {
                    2.0 * c * v
                } else {
                    0.0
                }
            }
            EnvelopeKind::Tabulated { breakpoints } => {
                let h = interpolate(breakpoints, v.exp().exp());
                h * h
            }
        }
    }

    /// Checks `H >= 0` and monotonicity on a grid of 400 points in `lnln t`.
    pub fn verify_monotone(&self) -> Result<()> {
        let mut prev = 0.0;
        for i in 0..400 {
            let v = -5.0 + i as f64 * 0.25;
            let h2 = self.h_squared_at_loglog(v);
            if !(h2 >= prev) {
                return Err(Error::AssertionFailed(format!("envelope decreases or goes negative near lnln t = {v}")));
            }
            prev = h2;
        }
        Ok(())
    }
}

fn interpolate(breakpoints: &[(f64, f64)], t: f64) -> f64 {
    let i = breakpoints.partition_point(|p| p.0 <= t);
    if i == 0 {
        return breakpoints[0].1;
    }
    if i == breakpoints.len() {
        return breakpoints[i - 1].1;
    }
    let (t0, h0) = breakpoints[i - 1];
    let (t1, h1) = breakpoints[i];
    h0 + (h1 - h0) * ((t - t0) / (t1 - t0))
}

impl FromStr for Envelope {
    type Err = Error;

    /// `hrho:RHO`, `loglog:C`, or `table:T1=H1,T2=H2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = s.split_once(':').ok_or_else(|| Error::invalid(format!("envelope spec '{s}' lacks ':'")))?;
        let number = |x: &str| {
            x.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{x}' in envelope spec '{s}'")))
        };
        match head.trim() {
            "hrho" => Self::h_rho(number(arg)?),
            "loglog" => Self::sqrt_2c_loglog(number(arg)?),
            "table" => {
                let points = arg
                    .split(',')
                    .map(|p| {
                        let (t, h) =
                            p.split_once('=').ok_or_else(|| Error::invalid(format!("breakpoint '{p}' lacks '='")))?;
                        Ok((number(t)?, number(h)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::tabulated(points)
            }
            other => Err(Error::invalid(format!("unknown envelope kind '{other}'"))),
        }
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            EnvelopeKind::HRho { rho } => write!(f, "hrho:{rho}"),
            EnvelopeKind::SqrtLogLog { c } => write!(f, "loglog:{c}"),
            EnvelopeKind::Tabulated { breakpoints } => {
                write!(f, "table:")?;
                for (i, (t, h)) in breakpoints.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}={h}")?;
                }
                Ok(())
            }
        }
    }
}

/// Upper integration limit, stored as `lnln T` so that astronomically large
/// horizons stay representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    loglog: f64,
}

impl Horizon {
    pub fn from_t(t: f64) -> Result<Self> {
        if !(t > 1.0) || !t.is_finite() {
            return Err(Error::invalid(format!("horizon T must be finite and > 1, got {t}")));
        }
        Ok(Self { loglog: t.ln().ln() })
    }

    pub fn from_loglog(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::invalid(format!("lnln T must be finite, got {v}")));
        }
        Ok(Self { loglog: v })
    }

    pub fn loglog(&self) -> f64 {
        self.loglog
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Self { loglog: DEFAULT_LOGLOG_HORIZON }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converging,
    Diverging,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converging => "converging",
            Verdict::Diverging => "diverging",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Partial integrals on a grid of horizons plus a convergence verdict.
///
/// `horizon` holds `lnln T` for the `dt/t` integrals and `S` for the reduced
/// `ds` integral; `slope` is the least-squares slope of `ln P` against the log
/// of that abscissa over its last decade.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralDiagnostic {
    #[serde(rename = "T")]
    pub horizon: Vec<f64>,
    pub partial: Vec<f64>,
    pub log_partial: Vec<f64>,
    pub slope: f64,
    pub verdict: Verdict,
}

impl IntegralDiagnostic {
    fn from_log_partials(horizon: Vec<f64>, log_partial: Vec<f64>) -> Self {
        let slope = tail_log_slope(&horizon, &log_partial);
        let verdict = if slope.is_nan() {
            Verdict::Inconclusive
        } else if slope < CONVERGING_SLOPE {
            Verdict::Converging
        } else if slope > DIVERGING_SLOPE {
            Verdict::Diverging
        } else {
            Verdict::Inconclusive
        };
        let partial = log_partial.iter().map(|l| l.exp()).collect();
        Self { horizon, partial, log_partial, slope, verdict }
    }

    /// Final partial integral (may be `inf` when only its log is finite).
    pub fn last_partial(&self) -> f64 {
        *self.partial.last().expect("diagnostic has at least one point")
    }

    pub fn last_log_partial(&self) -> f64 {
        *self.log_partial.last().expect("diagnostic has at least one point")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("diagnostic serializes")
    }
}

fn tail_log_slope(abscissa: &[f64], log_partial: &[f64]) -> f64 {
    let top = match abscissa.last() {
        Some(&a) if a > 0.0 => a,
        _ => return f64::NAN,
    };
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&a, &l) in abscissa.iter().zip(log_partial) {
        if a >= top / 10.0 && a > 0.0 {
            xs.push(a.ln());
            ys.push(l);
        }
    }
    if xs.len() < 3 {
        return f64::NAN;
    }
    let zeros = ys.iter().filter(|l| **l == f64::NEG_INFINITY).count();
    if zeros == ys.len() {
        return 0.0;
    }
    if zeros > 0 {
        // the partial leaves zero inside the window
        return f64::INFINITY;
    }
    ls_slope(&xs, &ys).unwrap_or(f64::NAN)
}

#[inline]
fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Log of one Gauss-Legendre panel of `exp(ln_g)` over `[a, b]`.
fn ln_panel(a: f64, b: f64, ln_g: &mut impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let gl = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = f64::NEG_INFINITY;
    for (x, w) in gl.nodes.iter().zip(&gl.weights) {
        let val = ln_g(mid + half * x)?;
        if val.is_nan() || val == f64::INFINITY {
            return Err(Error::NumericDomain(format!("integrand is {val} at node {}", mid + half * x)));
        }
        acc = ln_add(acc, (w * half).ln() + val);
    }
    Ok(acc)
}

/// Integral of `f(t) dt/t` over `[1, T]`, where `ln_f` maps `v = lnln t` to
/// `ln f`. Segments: `u = ln t` on `[0, 1]`, `v` on `[0, 1]`, then `ln v` on
/// `[0, ln lnln T]` with `panels` equal panels.
fn loglog_integral(
    horizon: Horizon,
    panels: usize,
    mut ln_f: impl FnMut(f64) -> Result<f64>,
) -> Result<IntegralDiagnostic> {
    if panels == 0 {
        return Err(Error::invalid("quadrature needs at least one panel"));
    }
    let v_max = horizon.loglog();
    let mut xs = Vec::new();
    let mut lps = Vec::new();
    let mut lp = f64::NEG_INFINITY;

    let u_end = v_max.exp().min(1.0);
    for k in 0..HEAD_PANELS {
        let (a, b) = (u_end * k as f64 / HEAD_PANELS as f64, u_end * (k + 1) as f64 / HEAD_PANELS as f64);
        lp = ln_add(lp, ln_panel(a, b, &mut |u: f64| ln_f(u.ln()))?);
        xs.push(b.ln());
        lps.push(lp);
    }
    if v_max > 0.0 {
        let v_end = v_max.min(1.0);
        for k in 0..HEAD_PANELS {
            let (a, b) = (v_end * k as f64 / HEAD_PANELS as f64, v_end * (k + 1) as f64 / HEAD_PANELS as f64);
            lp = ln_add(lp, ln_panel(a, b, &mut |v: f64| Ok(ln_f(v)? + v))?);
            xs.push(b);
            lps.push(lp);
        }
    }
    if v_max > 1.0 {
        let w_end = v_max.ln();
        let h = w_end / panels as f64;
        for k in 0..panels {
            let a = k as f64 * h;
            let b = if k + 1 == panels { w_end } else { a + h };
            lp = ln_add(
                lp,
                ln_panel(a, b, &mut |w: f64| {
                    let v = w.exp();
                    Ok(ln_f(v)? + v + w)
                })?,
            );
            xs.push(b.exp());
            lps.push(lp);
        }
    }
    Ok(IntegralDiagnostic::from_log_partials(xs, lps))
}

fn checked_h2(h: &Envelope, v: f64) -> Result<f64> {
    let h2 = h.h_squared_at_loglog(v);
    if !h2.is_finite() || h2 < 0.0 {
        return Err(Error::NumericDomain(format!("H^2 = {h2} at lnln t = {v}")));
    }
    Ok(h2)
}

/// Partial integrals of `H^zeta(t) phi_bar(H(t)) dt/t` on `[1, T]`.
/// `quadrature_points` is the number of log-spaced panels in the tail.
pub fn j_zeta_partial(
    h: &Envelope,
    zeta: f64,
    horizon: Horizon,
    quadrature_points: usize,
) -> Result<IntegralDiagnostic> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(Error::invalid(format!("zeta must be positive and finite, got {zeta}")));
    }
    loglog_integral(horizon, quadrature_points, |v| {
        let h2 = checked_h2(h, v)?;
        if h2 == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(0.5 * zeta * h2.ln() + ln_phi_bar(h2.sqrt()))
    })
}

/// Natural log of the packing number, valid far beyond `u64` counts.
fn ln_entropy(set: &CompactSet1D, eps: f64) -> f64 {
    set.packing_count(eps).ln()
}

/// Partial integrals of `H^2(t) K_E(1/H^2(t)) phi_bar(H(t)) dt/t` on `[1, T]`.
pub fn psi_partial(h: &Envelope, set: &CompactSet1D, horizon: Horizon) -> Result<IntegralDiagnostic> {
    psi_partial_with(h, set, horizon, DEFAULT_PANELS)
}

pub fn psi_partial_with(
    h: &Envelope,
    set: &CompactSet1D,
    horizon: Horizon,
    panels: usize,
) -> Result<IntegralDiagnostic> {
    let finest = checked_h2(h, horizon.loglog())?;
    let scale = 1.0 / finest;
    if set.resolution() > scale {
        return Err(Error::Resolution { resolution: set.resolution(), scale });
    }
    loglog_integral(horizon, panels, |v| {
        let h2 = checked_h2(h, v)?;
        if h2 == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(h2.ln() + ln_entropy(set, 1.0 / h2) + ln_phi_bar(h2.sqrt()))
    })
}

/// Partial integrals of `K_E(1/s) s^(1/2 - rho) ds` on `[1, S]`, the
/// reduced form of `psi` for `H = H_rho`. The diagnostic's abscissa is `S`.
pub fn reduced_entropy_integral(set: &CompactSet1D, rho: f64, s_max: f64, panels: usize) -> Result<IntegralDiagnostic> {
    if !(s_max > 1.0) || !s_max.is_finite() || !rho.is_finite() {
        return Err(Error::invalid(format!("reduced integral needs finite rho and S > 1, got rho={rho}, S={s_max}")));
    }
    if panels == 0 {
        return Err(Error::invalid("quadrature needs at least one panel"));
    }
    if set.resolution() > 1.0 / s_max {
        return Err(Error::Resolution { resolution: set.resolution(), scale: 1.0 / s_max });
    }
    let x_end = s_max.ln();
    let h = x_end / panels as f64;
    let mut xs = Vec::with_capacity(panels);
    let mut lps = Vec::with_capacity(panels);
    let mut lp = f64::NEG_INFINITY;
    for k in 0..panels {
        let a = k as f64 * h;
        let b = if k + 1 == panels { x_end } else { a + h };
        // s = e^x, ds = s dx
        lp = ln_add(lp, ln_panel(a, b, &mut |x: f64| Ok(ln_entropy(set, (-x).exp()) + (1.5 - rho) * x))?);
        xs.push(b.exp());
        lps.push(lp);
    }
    Ok(IntegralDiagnostic::from_log_partials(xs, lps))
}

/// A critical exponent located by bisection, or the explicit sentinel for
/// "beyond the bracket".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    Finite(f64),
    Infinite,
}

impl Threshold {
    pub fn finite(self) -> Option<f64> {
        match self {
            Threshold::Finite(x) => Some(x),
            Threshold::Infinite => None,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(x) => write!(f, "{x}"),
            Threshold::Infinite => f.write_str("inf"),
        }
    }
}

/// Integration settings shared by the threshold searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralOptions {
    pub horizon: Horizon,
    pub panels: usize,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        Self { horizon: Horizon::default(), panels: DEFAULT_PANELS }
    }
}

/// Bisects for the point where `converges(x)` switches. `rising` means
/// convergence holds above the threshold rather than below it. Inconclusive
/// verdicts count as non-converging inside the bracket.
fn bisect_switch(
    lo: f64,
    hi: f64,
    tol: f64,
    rising: bool,
    mut verdict: impl FnMut(f64) -> Result<Verdict>,
) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let conv = verdict(mid)? == Verdict::Converging;
        if conv != rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_bracket(lo: f64, hi: f64, tol: f64) -> Result<()> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("bracket [{lo}, {hi}] is not an increasing finite pair")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// `delta(H) = sup{zeta : J_zeta(H) < inf}` located by bisection on the
/// verdict of `j_zeta_partial`, at the default horizon.
pub fn delta_of_h(h: &Envelope, zeta_lo: f64, zeta_hi: f64, tol: f64) -> Result<Threshold> {
    delta_of_h_with(h, zeta_lo, zeta_hi, tol, IntegralOptions::default())
}

pub fn delta_of_h_with(h: &Envelope, zeta_lo: f64, zeta_hi: f64, tol: f64, opts: IntegralOptions) -> Result<Threshold> {
    check_bracket(zeta_lo, zeta_hi, tol)?;
    if !(zeta_lo > 0.0) {
        return Err(Error::invalid("zeta bracket must be positive"));
    }
    let verdict = |z: f64| j_zeta_partial(h, z, opts.horizon, opts.panels).map(|d| d.verdict);
    let at_lo = verdict(zeta_lo)?;
    let at_hi = verdict(zeta_hi)?;
    match (at_lo, at_hi) {
        (_, Verdict::Converging) => Ok(Threshold::Infinite),
        (Verdict::Inconclusive, Verdict::Inconclusive) => Err(Error::Inconclusive(format!(
            "J_zeta verdicts for {h} are inconclusive at both zeta = {zeta_lo} and zeta = {zeta_hi}"
        ))),
        (Verdict::Converging, _) => Ok(Threshold::Finite(bisect_switch(zeta_lo, zeta_hi, tol, false, verdict)?)),
        // nothing in the bracket converges, and sup of the empty set is 0
        _ => Ok(Threshold::Finite(0.0)),
    }
}

/// `inf{rho : psi_{H_rho}(E) < inf}` by bisection over `rho`. Returns the
/// lower bracket end when that already converges and `Infinite` when the upper
/// one does not.
pub fn psi_rho_threshold(
    set: &CompactSet1D,
    rho_lo: f64,
    rho_hi: f64,
    tol: f64,
    opts: IntegralOptions,
) -> Result<Threshold> {
    check_bracket(rho_lo, rho_hi, tol)?;
    let verdict =
        |rho: f64| psi_partial_with(&Envelope::h_rho(rho)?, set, opts.horizon, opts.panels).map(|d| d.verdict);
    rising_threshold(rho_lo, rho_hi, tol, verdict)
}

/// Same search as [`psi_rho_threshold`] on the reduced integral up to `s_max`.
pub fn reduced_rho_threshold(
    set: &CompactSet1D,
    rho_lo: f64,
    rho_hi: f64,
    tol: f64,
    s_max: f64,
    panels: usize,
) -> Result<Threshold> {
    check_bracket(rho_lo, rho_hi, tol)?;
    let verdict = |rho: f64| reduced_entropy_integral(set, rho, s_max, panels).map(|d| d.verdict);
    rising_threshold(rho_lo, rho_hi, tol, verdict)
}

fn rising_threshold(lo: f64, hi: f64, tol: f64, mut verdict: impl FnMut(f64) -> Result<Verdict>) -> Result<Threshold> {
    if verdict(lo)? == Verdict::Converging {
        return Ok(Threshold::Finite(lo));
    }
    if verdict(hi)? != Verdict::Converging {
        return Ok(Threshold::Infinite);
    }
    Ok(Threshold::Finite(bisect_switch(lo, hi, tol, true, verdict)?))
}

/// `min(1, (4 - delta)/2)`; negative values mean the exceptional set is empty
/// and the infinite sentinel maps to `-inf`.
pub fn hdim_formula(delta: Threshold) -> f64 {
    match delta {
        Threshold::Finite(d) => (0.5 * (4.0 - d)).min(1.0),
        Threshold::Infinite => f64::NEG_INFINITY,
    }
}

/// `floor(exp(n / max(1, ln n)))`. Values past `2^53` are rejected because
/// the floor is no longer determined by a double evaluation.
pub fn erdos_sequence(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::invalid("Erdos sequence is indexed from n = 1"));
    }
    let nf = n as f64;
    let value = (nf / nf.ln().max(1.0)).exp().floor();
    if value > (1u64 << 53) as f64 {
        return Err(Error::Range(format!("Erdos sequence term {n} exceeds 2^53")));
    }
    Ok(value as u64)
}
