//! Increment laws, Gaussian special functions, and samplers.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use libm::erfc;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rng::RngStream;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Mills ratio `phi_bar(z)/phi(z)` for large positive `z`, by backward
/// evaluation of the Laplace continued fraction.
fn mills_cf(z: f64) -> f64 {
    let mut t = z;
    for k in (1..=120).rev() {
        t = z + k as f64 / t;
    }
    1.0 / t
}

/// Upper tail of the standard normal law, `1 - Phi(z)`.
pub fn phi_bar(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::NumericDomain("phi_bar of NaN".into()));
    }
    Ok(phi_bar_unchecked(z))
}

#[inline]
pub(crate) fn phi_bar_unchecked(z: f64) -> f64 {
    if z > 8.0 {
        if z > 40.0 {
            return 0.0f64.max(phi(z) * mills_cf(z));
        }
        phi(z) * mills_cf(z)
    } else if z < -8.0 {
        1.0 - phi(-z) * mills_cf(-z)
    } else {
        0.5 * erfc(z * std::f64::consts::FRAC_1_SQRT_2)
    }
}

/// `ln phi_bar(z)`, finite for every finite `z`.
pub fn ln_phi_bar(z: f64) -> f64 {
    if z > 8.0 {
        -0.5 * z * z - LN_SQRT_2PI + mills_cf(z).ln()
    } else {
        phi_bar_unchecked(z).ln()
    }
}

/// Inverse of the standard normal CDF (Wichura's AS 241, PPND16), accurate
/// to about 1e-16 relative.
pub fn normal_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5.226_495_278_852_854_5e3 * r + 2.872_908_573_572_194_3e4) * r + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den =
            ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r + 1.519_866_656_361_645_7e-2) * r
                + 1.481_039_764_274_800_8e-1)
                * r
                + 6.897_673_349_851e-1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den =
            ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5) * r
                + 7.868_691_311_456_133e-4)
                * r
                + 1.487_536_129_085_061_5e-2)
                * r
                + 1.369_298_809_227_358e-1)
                * r
                + 5.998_322_065_558_88e-1)
                * r
                + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// `P{Z1 >= z1, Z2 >= z2}` for a standard bivariate normal pair with
/// correlation `rho`, from the Plackett single-integral representation
/// integrated in the angle `theta = asin(r)`.
pub fn bivariate_upper(z1: f64, z2: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) || rho.is_nan() {
        return Err(Error::invalid(format!("correlation {rho} outside [-1, 1]")));
    }
    if z1.is_nan() || z2.is_nan() {
        return Err(Error::NumericDomain("bivariate_upper of NaN".into()));
    }
    let base = phi_bar_unchecked(z1) * phi_bar_unchecked(z2);
    if rho == 0.0 {
        return Ok(base);
    }
    let top = rho.asin();
    let gl = GaussLegendre::new(20);
    let integrand = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let num = z1 * z1 - 2.0 * z1 * z2 * s + z2 * z2;
        (-num / (2.0 * c * c)).exp()
    };
    let extra = gl.integrate_composite(0.0, top, 32, integrand) / (2.0 * PI);
    Ok((base + extra).clamp(0.0, 1.0))
}

/// Finite-support law on the integers.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePmf {
    support: Vec<(i64, f64)>,
    cdf: Vec<f64>,
    /// Table of `2^table_bits` outcomes when every probability is a multiple
    /// of `2^-table_bits`.
    table: Option<(u32, Vec<i64>)>,
}

impl LatticePmf {
    pub fn new(mut support: Vec<(i64, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("empty pmf support"));
        }
        if support.iter().any(|&(_, p)| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("pmf probabilities must be finite and non-negative"));
        }
        support.retain(|&(_, p)| p > 0.0);
        support.sort_by_key(|&(v, _)| v);
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("repeated support point in pmf"));
        }
        let total: f64 = support.iter().map(|s| s.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("pmf sums to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cdf = support
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        let table = dyadic_table(&support);
        Ok(Self { support, cdf, table })
    }

    pub fn simple() -> Self {
        Self::new(vec![(-1, 0.5), (1, 0.5)]).expect("valid pmf")
    }

    pub fn lazy() -> Self {
        Self::new(vec![(-1, 0.25), (0, 0.5), (1, 0.25)]).expect("valid pmf")
    }

    pub fn support(&self) -> &[(i64, f64)] {
        &self.support
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|&(v, p)| v as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support.iter().map(|&(v, p)| (v as f64 - m).powi(2) * p).sum()
    }

    pub fn min_step(&self) -> i64 {
        self.support[0].0
    }

    pub fn max_step(&self) -> i64 {
        self.support[self.support.len() - 1].0
    }

    /// gcd of the differences of support points: the span of the lattice
    /// carrying the walk's increments.
    pub fn span(&self) -> i64 {
        let base = self.support[0].0;
        self.support.iter().fold(0, |g, &(v, _)| gcd(g, v - base))
    }

    /// gcd of the support points themselves: the walk started at 0 lives on
    /// (and, for mean-zero laws, generates) `g Z`.
    pub fn group_gcd(&self) -> i64 {
        self.support.iter().fold(0, |g, &(v, _)| gcd(g, v)).max(1)
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> i64 {
        if let Some((bits, table)) = &self.table {
            if *bits == 0 {
                return table[0];
            }
            return table[rng.bits(*bits) as usize];
        }
        let u = rng.uniform();
        let idx = self.cdf.partition_point(|&c| c < u).min(self.support.len() - 1);
        self.support[idx].0
    }
}

fn dyadic_table(support: &[(i64, f64)]) -> Option<(u32, Vec<i64>)> {
    for bits in 0..=10u32 {
        let scale = (1u64 << bits) as f64;
        let counts: Vec<f64> = support.iter().map(|&(_, p)| p * scale).collect();
        if counts.iter().all(|c| c.fract() == 0.0) {
            let mut table = Vec::with_capacity(1 << bits);
            for (&(v, _), c) in support.iter().zip(counts) {
                table.extend(std::iter::repeat_n(v, c as usize));
            }
            if table.len() == 1 << bits {
                return Some((bits, table));
            }
        }
    }
    None
}

pub(crate) fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

/// The increment law of the walks.
#[derive(Debug, Clone, PartialEq)]
pub enum IncrementDistribution {
    StandardNormal,
    Rademacher,
    Lattice(LatticePmf),
}

impl IncrementDistribution {
    pub fn mean(&self) -> f64 {
        match self {
            Self::StandardNormal | Self::Rademacher => 0.0,
            Self::Lattice(p) => p.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::StandardNormal | Self::Rademacher => 1.0,
            Self::Lattice(p) => p.variance(),
        }
    }

    /// Mean 0 within 1e-12 and variance 1 within 1e-9.
    pub fn is_normalized(&self) -> bool {
        self.mean().abs() <= 1e-12 && (self.variance() - 1.0).abs() <= 1e-9
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "increment law must have mean 0 and variance 1 (got {} and {})",
                self.mean(),
                self.variance()
            )))
        }
    }

    /// Integer-valued view of the law, if it is supported on the integers.
    pub fn as_lattice(&self) -> Option<LatticePmf> {
        match self {
            Self::StandardNormal => None,
            Self::Rademacher => Some(LatticePmf::simple()),
            Self::Lattice(p) => Some(p.clone()),
        }
    }

    /// Lattice span of the partial sums, if integer-valued.
    pub fn lattice_span(&self) -> Option<i64> {
        self.as_lattice().map(|p| p.span())
    }

    /// CDF of the law (used for goodness-of-fit checks).
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::StandardNormal => 1.0 - phi_bar_unchecked(x),
            Self::Rademacher => {
                if x < -1.0 {
                    0.0
                } else if x < 1.0 {
                    0.5
                } else {
                    1.0
                }
            }
            Self::Lattice(p) => p.support.iter().filter(|&&(v, _)| v as f64 <= x).map(|s| s.1).sum(),
        }
    }

    /// One draw. The normal draw consumes exactly one uniform.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self {
            Self::StandardNormal => normal_quantile(rng.uniform()),
            Self::Rademacher => {
                if rng.bits(1) == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Lattice(p) => p.sample(rng) as f64,
        }
    }
}

/// One draw from `dist` using `rng`.
pub fn sample_increment(dist: &IncrementDistribution, rng: &mut RngStream) -> f64 {
    dist.sample(rng)
}

impl FromStr for IncrementDistribution {
    type Err = Error;

    /// `normal` | `rademacher` | `pmf:v1:p1;v2:p2;...`
    fn from_str(s: &str) -> Result<Self> {
        if s.chars().any(char::is_whitespace) {
            return Err(Error::invalid("whitespace is not allowed in distribution specs"));
        }
        match s {
            "normal" => return Ok(Self::StandardNormal),
            "rademacher" => return Ok(Self::Rademacher),
            _ => {}
        }
        let body = s.strip_prefix("pmf:").ok_or_else(|| Error::invalid(format!("unknown distribution spec `{s}`")))?;
        let mut support = Vec::new();
        for item in body.split(';') {
            let (v, p) = item.split_once(':').ok_or_else(|| Error::invalid(format!("malformed pmf entry `{item}`")))?;
            let v: i64 = v.parse().map_err(|_| Error::invalid(format!("bad pmf value `{v}`")))?;
            let p: f64 = p.parse().map_err(|_| Error::invalid(format!("bad pmf probability `{p}`")))?;
            support.push((v, p));
        }
        Ok(Self::Lattice(LatticePmf::new(support)?))
    }
}

impl fmt::Display for IncrementDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StandardNormal => write!(f, "normal"),
            Self::Rademacher => write!(f, "rademacher"),
            Self::Lattice(p) => {
                write!(f, "pmf:")?;
                for (i, (v, q)) in p.support.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{v}:{q}")?;
                }
                Ok(())
            }
        }
    }
}

/// Standard symmetric alpha-stable draw with characteristic function
/// `exp(-|theta|^alpha)` (Chambers-Mallows-Stuck).
pub fn sample_symmetric_stable(alpha: f64, rng: &mut RngStream) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("stable index {alpha} outside (0, 1)")));
    }
    Ok(symmetric_stable(alpha, rng))
}

#[inline]
pub(crate) fn symmetric_stable(alpha: f64, rng: &mut RngStream) -> f64 {
    let v = PI * (rng.uniform() - 0.5);
    let w = rng.exponential();
    let (sin_av, cos_v) = ((alpha * v).sin(), v.cos());
    let first = sin_av / cos_v.powf(1.0 / alpha);
    let second = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    debug_assert!(v.abs() < FRAC_PI_2);
    first * second
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_tail_oracle(z: f64) -> f64 {
        // independent route: composite Gauss-Legendre of the density on [z, z + 40]
        let gl = GaussLegendre::new(30);
        gl.integrate_composite(z, z + 40.0, 400, phi)
    }

    #[test]
    fn phi_bar_fixed_values() {
        assert_eq!(phi_bar(0.0).unwrap(), 0.5);
        let oracle = gauss_tail_oracle(1.0);
        assert!((oracle - 0.158_655_253_931_457_07).abs() < 1e-15);
        assert!((phi_bar(1.0).unwrap() - 0.158_655_253_931_457_07).abs() < 1e-14);
        assert!(phi_bar(f64::NAN).is_err());
    }

    #[test]
    fn phi_bar_symmetry() {
        for i in 1..=50 {
            let z = i as f64 * 0.1;
            let s = phi_bar(z).unwrap() + phi_bar(-z).unwrap();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_bar_agrees_with_quadrature_across_regimes() {
        for &z in &[-3.0, -0.5, 0.3, 2.5, 5.0, 7.9, 8.1, 10.0, 20.0] {
            let a = phi_bar(z).unwrap();
            let b = gauss_tail_oracle(z);
            assert!((a - b).abs() <= 1e-14 + 1e-12 * b, "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn continued_fraction_matches_erfc_at_switch() {
        let a = phi(8.0) * mills_cf(8.0);
        let b = 0.5 * erfc(8.0 / 2f64.sqrt());
        assert!(((a - b) / b).abs() < 1e-13);
        assert!((ln_phi_bar(8.0000001) - ln_phi_bar(7.9999999)).abs() < 1e-5);
    }

    #[test]
    fn mills_bounds() {
        for i in 1..200 {
            let z = i as f64 * 0.1;
            let p = phi_bar(z).unwrap();
            assert!(p <= (-z * z / 2.0).exp());
            assert!(p >= z / (1.0 + z * z) * phi(z));
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let x = normal_quantile(p);
            assert!((1.0 - phi_bar(x).unwrap() - p).abs() < 1e-14, "p={p}");
        }
        for &p in &[1e-300, 1e-20, 1e-8] {
            let x = normal_quantile(p);
            assert!(((phi_bar(-x).unwrap() - p) / p).abs() < 1e-12);
        }
    }

    #[test]
    fn bivariate_known_values() {
        let v = bivariate_upper(0.0, 0.0, 0.5).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        for &z in &[-1.0, 0.0, 0.7, 2.0] {
            let full = bivariate_upper(z, z, 1.0).unwrap();
            assert!((full - phi_bar(z).unwrap()).abs() < 1e-10, "z={z}");
            let ind = bivariate_upper(z, 1.3, 0.0).unwrap();
            assert!((ind - phi_bar(z).unwrap() * phi_bar(1.3).unwrap()).abs() < 1e-15);
        }
        assert!(bivariate_upper(0.0, 0.0, 1.01).is_err());
    }

    #[test]
    fn bivariate_frozen_oracle() {
        // mpmath 2-d quadrature of the bivariate density over [1,inf)^2, 30 digits
        let v = bivariate_upper(1.0, 1.0, (-0.7f64).exp()).unwrap();
        assert!((v - 0.062_192_514_239_334_32).abs() < 1e-10, "{v}");
    }

    #[test]
    fn bivariate_monotone_in_rho() {
        for &z in &[0.0, 1.0, 2.0] {
            let mut last = 0.0;
            for i in -10..=10 {
                let v = bivariate_upper(z, z, i as f64 / 10.0).unwrap();
                assert!(v >= last - 1e-15);
                last = v;
            }
        }
    }

    #[test]
    fn lattice_pmf_validation_and_moments() {
        let lazy = LatticePmf::lazy();
        assert_eq!(lazy.mean(), 0.0);
        assert_eq!(lazy.variance(), 0.5);
        assert_eq!(lazy.span(), 1);
        assert!(LatticePmf::new(vec![(1, 0.4), (2, 0.4)]).is_err());
        assert!(LatticePmf::new(vec![(1, -0.5), (2, 1.5)]).is_err());
        let even = LatticePmf::new(vec![(-2, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(even.group_gcd(), 2);
        assert_eq!(even.span(), 4);
    }

    #[test]
    fn distribution_grammar() {
        assert_eq!("normal".parse::<IncrementDistribution>().unwrap(), IncrementDistribution::StandardNormal);
        let d: IncrementDistribution = "pmf:-1:0.25;0:0.5;1:0.25".parse().unwrap();
        assert_eq!(d.to_string(), "pmf:-1:0.25;0:0.5;1:0.25");
        assert!("pmf:-1:0.25; 1:0.75".parse::<IncrementDistribution>().is_err());
        assert!("cauchy".parse::<IncrementDistribution>().is_err());
        assert!(!d.is_normalized());
        assert!(IncrementDistribution::Rademacher.is_normalized());
    }

    #[test]
    fn rademacher_support() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..1000 {
            let x = sample_increment(&IncrementDistribution::Rademacher, &mut rng);
            assert!(x == 1.0 || x == -1.0);
        }
    }

    #[test]
    fn lazy_lattice_mean_is_zero() {
        let d = IncrementDistribution::Lattice(LatticePmf::lazy());
        let mut rng = RngStream::new(11, 0);
        let n = 1_000_000;
        let s: f64 = (0..n).map(|_| d.sample(&mut rng)).sum();
        // 3 sigma/sqrt(N) with sigma = 1/sqrt(2)
        assert!((s / n as f64).abs() < 4e-3);
    }

    #[test]
    fn non_dyadic_pmf_uses_cdf_search() {
        let p = LatticePmf::new(vec![(-1, 1.0 / 3.0), (0, 1.0 / 3.0), (1, 1.0 / 3.0)]).unwrap();
        assert!(p.table.is_none());
        let mut rng = RngStream::new(2, 0);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[(p.sample(&mut rng) + 1) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0);
        }
    }

    #[test]
    fn normal_tail_frequency() {
        let mut rng = RngStream::new(17, 0);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| IncrementDistribution::StandardNormal.sample(&mut rng) >= 1.0).count();
        let p = 0.158_655;
        let tol = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < tol);
    }

    #[test]
    fn stable_rejects_bad_index() {
        let mut rng = RngStream::new(1, 0);
        assert!(sample_symmetric_stable(1.0, &mut rng).is_err());
        assert!(sample_symmetric_stable(0.0, &mut rng).is_err());
    }

    #[test]
    fn stable_median_is_zero() {
        let mut rng = RngStream::new(23, 0);
        let n = 100_000;
        let pos = (0..n).filter(|_| sample_symmetric_stable(0.5, &mut rng).unwrap() > 0.0).count();
        // binomial 99% band around n/2
        assert!((pos as f64 - 50_000.0).abs() < 2.576 * (n as f64 * 0.25).sqrt());
    }

    #[test]
    fn stable_tail_index() {
        let alpha = 0.5;
        let mut rng = RngStream::new(29, 0);
        let n = 400_000;
        let xs: Vec<f64> = (0..n).map(|_| symmetric_stable(alpha, &mut rng).abs()).collect();
        let grid: Vec<f64> = (0..=8).map(|k| 10f64.powf(1.0 + k as f64 * 0.25)).collect();
        let lx: Vec<f64> = grid.iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> =
            grid.iter().map(|&x| (xs.iter().filter(|&&v| v > x).count() as f64 / n as f64).ln()).collect();
        let slope = crate::stats::ls_slope(&lx, &ly).unwrap();
        assert!((slope + alpha).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn stable_self_similarity() {
        let alpha = 0.5;
        let n = 16;
        let mut rng = RngStream::new(31, 0);
        let reps = 100_000;
        let mut single: Vec<f64> = (0..reps).map(|_| symmetric_stable(alpha, &mut rng)).collect();
        let scale = (n as f64).powf(1.0 / alpha);
        let mut sums: Vec<f64> =
            (0..reps).map(|_| (0..n).map(|_| symmetric_stable(alpha, &mut rng)).sum::<f64>() / scale).collect();
        let ks = crate::stats::ks_two_sample(&mut single, &mut sums).unwrap();
        assert!(ks.passes(0.01), "{ks:?}");
    }
}
