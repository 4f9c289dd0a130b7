//! Reference laws for the test statistics.
//!
//! - [`NormalLimit`]: `N{0, 2(1-2/π)²}`, the large-`n` law of the centred
//!   modularity.
//! - [`Tw1Law`]: Tracy–Widom (β = 1), tabulated from a seeded Monte Carlo
//!   run and interpolated.
//! - [`ConvolutionF`]: the finite-`n` law `N{0, 2(1-2/π)²} + (2/π)n^{-1/6}·TW1`,
//!   held as sorted Monte Carlo draws.
//! - [`GumbelCoherence`]: the limit of the normalized largest off-diagonal
//!   sample correlation.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize, Serializer};
use statrs::function::erf;

use crate::error::{Error, Result};
use crate::seed::Seed;

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn std_normal_quantile(p: f64) -> f64 {
    // `+ 0.0` turns the -0 at p = 1/2 into 0.
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p) + 0.0
}

/// An upper-tail probability, either exact or known only to lie below a
/// resolution bound. Bounds serialize as strings such as `"<1e-4"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PValue {
    Exact(f64),
    Below(f64),
}

impl PValue {
    /// The value used for comparisons; a bound is treated as its upper end.
    pub fn value(self) -> f64 {
        match self {
            PValue::Exact(p) | PValue::Below(p) => p,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, PValue::Exact(_))
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::Exact(p) => write!(f, "{p}"),
            PValue::Below(b) => write!(f, "<{b:e}"),
        }
    }
}

impl Serialize for PValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PValue::Exact(p) => s.serialize_f64(*p),
            PValue::Below(_) => s.serialize_str(&self.to_string()),
        }
    }
}

/// Common surface of the reference laws.
pub trait LimitLaw {
    fn cdf(&self, x: f64) -> f64;

    fn quantile(&self, p: f64) -> f64;

    fn sample(&self, rng: &mut dyn rand::RngCore) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// `P(X > x)` for a test that rejects in the upper tail.
    fn upper_p_value(&self, x: f64) -> PValue {
        PValue::Exact((1.0 - self.cdf(x)).max(0.0))
    }
}

/// Standard deviation of the normal limit, `√2(1 - 2/π)`.
pub fn normal_limit_sd() -> f64 {
    std::f64::consts::SQRT_2 * (1.0 - 2.0 / PI)
}

/// `Φ(x / (√2(1 - 2/π)))`.
pub fn normal_limit_cdf(x: f64) -> f64 {
    std_normal_cdf(x / normal_limit_sd())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormalLimit;

impl LimitLaw for NormalLimit {
    fn cdf(&self, x: f64) -> f64 {
        normal_limit_cdf(x)
    }

    fn quantile(&self, p: f64) -> f64 {
        normal_limit_sd() * std_normal_quantile(p)
    }

    fn sample(&self, rng: &mut dyn rand::RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        normal_limit_sd() * z
    }

    fn upper_p_value(&self, x: f64) -> PValue {
        PValue::Exact(std_normal_cdf(-x / normal_limit_sd()))
    }
}

/// Empirical law of a sorted sample: right-continuous CDF and the
/// order-statistic quantile `x_(⌈p·m⌉)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    samples: Vec<f64>,
}

impl EmpiricalLaw {
    /// `samples` must be non-empty and sorted ascending.
    pub fn from_sorted(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput(
                "empirical law needs at least one sample".into(),
            ));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidInput(
                "empirical law sample contains NaN".into(),
            ));
        }
        if samples.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput(
                "empirical law samples must be sorted".into(),
            ));
        }
        Ok(EmpiricalLaw { samples })
    }

    pub fn from_unsorted(mut samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidInput(
                "empirical law sample contains NaN".into(),
            ));
        }
        samples.sort_by(f64::total_cmp);
        Self::from_sorted(samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (self.len() as f64 - 1.0)
    }
}

impl LimitLaw for EmpiricalLaw {
    fn cdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.len() as f64
    }

    fn quantile(&self, p: f64) -> f64 {
        let m = self.len();
        let k = (p * m as f64).ceil() as usize;
        self.samples[k.clamp(1, m) - 1]
    }

    fn upper_p_value(&self, x: f64) -> PValue {
        let above = self.len() - self.samples.partition_point(|&s| s <= x);
        if above == 0 {
            PValue::Below(1.0 / self.len() as f64)
        } else {
            PValue::Exact(above as f64 / self.len() as f64)
        }
    }
}

/// Probability levels covered by the Tracy–Widom grid.
pub const TW1_GRID_LOW: f64 = 1e-4;
pub const TW1_GRID_HIGH: f64 = 1.0 - 1e-4;
/// CDF values produced by tail extrapolation are clamped to this margin.
pub const TW1_TAIL_CLAMP: f64 = 1e-6;
const TW1_GRID_POINTS: usize = 2000;

/// Minimum replicate count and generating dimension for a table.
pub const TW1_MIN_REPLICATES: usize = 10_000;
pub const TW1_MIN_DIMENSION: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tw1Provenance {
    pub m: usize,
    pub n_gen: usize,
    pub seed: u64,
    pub mean: f64,
    pub sd: f64,
}

/// Tracy–Widom (β = 1) law as a monotone piecewise-linear CDF on a grid
/// spanning `[1e-4, 1 - 1e-4]`, with exponential tails beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tw1Law {
    xs: Vec<f64>,
    cdfs: Vec<f64>,
    provenance: Tw1Provenance,
    left_scale: f64,
    right_scale: f64,
}

const BUNDLED_TW1: &str = include_str!("../data/tw1_table.txt");

impl Tw1Law {
    /// The table shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TW1.as_bytes()).expect("bundled Tracy-Widom table is valid")
    }

    pub fn from_grid(grid: Vec<(f64, f64)>, provenance: Tw1Provenance) -> Result<Self> {
        if grid.len() < 4 {
            return Err(Error::InvalidInput(
                "Tracy-Widom grid needs at least 4 points".into(),
            ));
        }
        for w in grid.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::InvalidInput(format!(
                    "Tracy-Widom grid is not strictly increasing near x = {}",
                    w[0].0
                )));
            }
        }
        let (xs, cdfs): (Vec<f64>, Vec<f64>) = grid.into_iter().unzip();
        if cdfs[0] <= 0.0 || *cdfs.last().unwrap() >= 1.0 {
            return Err(Error::InvalidInput(
                "Tracy-Widom grid CDF must lie in (0, 1)".into(),
            ));
        }
        let left_scale = tail_scale(&xs, &cdfs, false);
        let right_scale = tail_scale(&xs, &cdfs, true);
        Ok(Tw1Law {
            xs,
            cdfs,
            provenance,
            left_scale,
            right_scale,
        })
    }

    /// Tabulates the empirical law of `samples` at evenly spaced levels.
    pub fn from_samples(mut samples: Vec<f64>, provenance: Tw1Provenance) -> Result<Self> {
        samples.sort_by(f64::total_cmp);
        let ecdf = EmpiricalLaw::from_sorted(samples)?;
        let step = (TW1_GRID_HIGH - TW1_GRID_LOW) / (TW1_GRID_POINTS - 1) as f64;
        let mut grid: Vec<(f64, f64)> = Vec::with_capacity(TW1_GRID_POINTS);
        for k in 0..TW1_GRID_POINTS {
            let p = if k + 1 == TW1_GRID_POINTS {
                TW1_GRID_HIGH
            } else {
                TW1_GRID_LOW + k as f64 * step
            };
            let x = ecdf.quantile(p);
            match grid.last() {
                Some(&(last, _)) if x <= last => continue,
                _ => grid.push((x, p)),
            }
        }
        Self::from_grid(grid, provenance)
    }

    pub fn provenance(&self) -> &Tw1Provenance {
        &self.provenance
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.cdfs.iter().copied())
    }

    /// Reads the two-column `x cdf` text format.
    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut provenance = None;
        let mut grid = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                provenance = Some(parse_provenance(meta)?);
                continue;
            }
            let mut cols = line.split_whitespace();
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Format(format!(
                        "Tracy-Widom table line {}: expected two columns",
                        lineno + 1
                    )))
                }
            };
            if a == "x" && b == "cdf" {
                continue;
            }
            let parse = |s: &str, col| {
                f64::from_str(s).map_err(|_| Error::Parse {
                    row: lineno + 1,
                    col,
                    value: s.to_string(),
                })
            };
            grid.push((parse(a, 1)?, parse(b, 2)?));
        }
        let provenance = provenance
            .ok_or_else(|| Error::Format("Tracy-Widom table has no metadata header".into()))?;
        Self::from_grid(grid, provenance)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(f))
    }

    pub fn write(&self, mut out: impl Write) -> Result<()> {
        let p = &self.provenance;
        writeln!(
            out,
            "# tracy-widom beta=1 m={} n_gen={} seed={} mean={:.17e} sd={:.17e}",
            p.m, p.n_gen, p.seed, p.mean, p.sd
        )?;
        writeln!(out, "x cdf")?;
        for (x, c) in self.grid() {
            writeln!(out, "{x:.17e} {c:.17e}")?;
        }
        Ok(())
    }

    fn x_low(&self) -> f64 {
        self.xs[0]
    }

    fn x_high(&self) -> f64 {
        *self.xs.last().unwrap()
    }
}

fn parse_provenance(meta: &str) -> Result<Tw1Provenance> {
    let mut m = None;
    let mut n_gen = None;
    let mut seed = None;
    let mut mean = f64::NAN;
    let mut sd = f64::NAN;
    for tok in meta.split_whitespace() {
        let Some((k, v)) = tok.split_once('=') else {
            continue;
        };
        let bad = || Error::Format(format!("bad Tracy-Widom metadata field {tok:?}"));
        match k {
            "m" => m = Some(v.parse().map_err(|_| bad())?),
            "n_gen" => n_gen = Some(v.parse().map_err(|_| bad())?),
            "seed" => seed = Some(v.parse().map_err(|_| bad())?),
            "mean" => mean = v.parse().map_err(|_| bad())?,
            "sd" => sd = v.parse().map_err(|_| bad())?,
            _ => {}
        }
    }
    match (m, n_gen, seed) {
        (Some(m), Some(n_gen), Some(seed)) => Ok(Tw1Provenance {
            m,
            n_gen,
            seed,
            mean,
            sd,
        }),
        _ => Err(Error::Format(
            "Tracy-Widom metadata must name m, n_gen and seed".into(),
        )),
    }
}

// Exponential tail scale fitted between the outermost grid point and the
// first point one decade further in.
fn tail_scale(xs: &[f64], cdfs: &[f64], right: bool) -> f64 {
    let k = xs.len() - 1;
    let (x0, t0) = if right {
        (xs[k], 1.0 - cdfs[k])
    } else {
        (xs[0], cdfs[0])
    };
    let target = 10.0 * t0;
    let idx: Vec<usize> = if right {
        (0..k).rev().collect()
    } else {
        (1..=k).collect()
    };
    for i in idx {
        let t = if right { 1.0 - cdfs[i] } else { cdfs[i] };
        if t >= target {
            return (xs[i] - x0).abs() / (t / t0).ln();
        }
    }
    // Unreachable for grids spanning [1e-4, 1 - 1e-4]; fall back to the span.
    (xs[k] - xs[0]).abs()
}

impl LimitLaw for Tw1Law {
    fn cdf(&self, x: f64) -> f64 {
        let lo = TW1_TAIL_CLAMP;
        let hi = 1.0 - TW1_TAIL_CLAMP;
        if x < self.x_low() {
            let c = self.cdfs[0] * ((x - self.x_low()) / self.left_scale).exp();
            return c.max(lo);
        }
        if x > self.x_high() {
            let tail =
                (1.0 - self.cdfs.last().unwrap()) * (-(x - self.x_high()) / self.right_scale).exp();
            return (1.0 - tail).min(hi);
        }
        let i = self.xs.partition_point(|&g| g <= x);
        if i >= self.xs.len() {
            return *self.cdfs.last().unwrap();
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (c0, c1) = (self.cdfs[i - 1], self.cdfs[i]);
        c0 + (c1 - c0) * (x - x0) / (x1 - x0)
    }

    fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(TW1_TAIL_CLAMP, 1.0 - TW1_TAIL_CLAMP);
        let c_lo = self.cdfs[0];
        let c_hi = *self.cdfs.last().unwrap();
        if p < c_lo {
            return self.x_low() + self.left_scale * (p / c_lo).ln();
        }
        if p > c_hi {
            return self.x_high() - self.right_scale * ((1.0 - p) / (1.0 - c_hi)).ln();
        }
        let i = self.cdfs.partition_point(|&c| c < p);
        if i == 0 {
            return self.xs[0];
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (c0, c1) = (self.cdfs[i - 1], self.cdfs[i]);
        x0 + (x1 - x0) * (p - c0) / (c1 - c0)
    }

    /// Beyond the grid the extrapolated tail is not trusted for reporting,
    /// so the p-value is the bound `< 1e-4`.
    fn upper_p_value(&self, x: f64) -> PValue {
        if x > self.x_high() {
            PValue::Below(TW1_GRID_LOW)
        } else {
            PValue::Exact((1.0 - self.cdf(x)).max(0.0))
        }
    }
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm-count
/// bisection. `diag` has length `n`, `offdiag_sq` holds the `n - 1` squared
/// off-diagonal entries.
pub(crate) fn tridiagonal_top_eigenvalue(diag: &[f64], offdiag_sq: &[f64]) -> f64 {
    let n = diag.len();
    // Number of eigenvalues strictly below x.
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = diag[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let prev = if d == 0.0 { f64::MIN_POSITIVE } else { d };
            d = diag[i] - x - offdiag_sq[i - 1] / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { offdiag_sq[i - 1].sqrt() } else { 0.0 };
        let right = if i + 1 < n { offdiag_sq[i].sqrt() } else { 0.0 };
        hi = hi.max(diag[i] + left + right);
        lo = lo.max(diag[i]);
    }
    // λ_max ≥ max diag, so count_below(lo) < n; λ_max ≤ hi.
    let tol = 1e-13 * hi.abs().max(lo.abs()).max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Leading block size used for the top eigenvalue of an `n`-dimensional
/// tridiagonal GOE model. The top eigenvector decays like an Airy function
/// over the first `O(n^{1/3})` coordinates, so the remaining rows change
/// `λ_1` by far less than double precision.
pub fn tridiagonal_block_size(n: usize) -> usize {
    let k = (10.0 * (n as f64).cbrt()).ceil() as usize + 100;
    k.min(n)
}

/// Draws `m` values of `n^{1/6}(λ_1 - 2√n)` for GOE matrices of dimension
/// `n_gen`.
///
/// Householder reduction of a GOE matrix gives, in law, the tridiagonal
/// matrix with `N(0, 2)` diagonal and `χ_{n-1}, …, χ_1` off-diagonal, which
/// has the same eigenvalues. Only its leading
/// [`tridiagonal_block_size`] rows are drawn and `λ_1` is found by Sturm
/// bisection. Replicate `r` uses stream `seed.replicate(r)`.
pub fn sample_scaled_goe_top_eigenvalues(m: usize, n_gen: usize, seed: Seed) -> Result<Vec<f64>> {
    sample_scaled_top_eigenvalues_with_block(m, n_gen, tridiagonal_block_size(n_gen), seed)
}

pub(crate) fn sample_scaled_top_eigenvalues_with_block(
    m: usize,
    n_gen: usize,
    block: usize,
    seed: Seed,
) -> Result<Vec<f64>> {
    if n_gen < 2 {
        return Err(Error::InvalidDimension(
            n_gen,
            "generating dimension must be >= 2",
        ));
    }
    let k = block.clamp(2, n_gen);
    let chis = (0..k - 1)
        .map(|i| {
            ChiSquared::new((n_gen - 1 - i) as f64)
                .map_err(|e| Error::InvalidParameter(format!("chi-squared: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = n_gen as f64;
    let centre = 2.0 * n.sqrt();
    let scale = n.powf(1.0 / 6.0);
    use rayon::prelude::*;
    let out = (0..m as u64)
        .into_par_iter()
        .map_init(
            || (vec![0.0; k], vec![0.0; k - 1]),
            |(diag, off), r| {
                let mut rng = seed.replicate(r).rng();
                for (i, d) in diag.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *d = std::f64::consts::SQRT_2 * z;
                    if i + 1 < k {
                        off[i] = chis[i].sample(&mut rng);
                    }
                }
                scale * (tridiagonal_top_eigenvalue(diag, off) - centre)
            },
        )
        .collect();
    Ok(out)
}

/// Generates a Tracy–Widom table from `m` GOE replicates at `n_gen`.
pub fn build_tw1_table(m: usize, n_gen: usize, seed: Seed) -> Result<Tw1Law> {
    if m < TW1_MIN_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "a Tracy-Widom table needs at least {TW1_MIN_REPLICATES} replicates, got {m}"
        )));
    }
    if n_gen < TW1_MIN_DIMENSION {
        return Err(Error::InvalidParameter(format!(
            "a Tracy-Widom table needs n_gen >= {TW1_MIN_DIMENSION}, got {n_gen}"
        )));
    }
    let samples = sample_scaled_goe_top_eigenvalues(m, n_gen, seed)?;
    let ecdf = EmpiricalLaw::from_unsorted(samples)?;
    let provenance = Tw1Provenance {
        m,
        n_gen,
        seed: seed.root,
        mean: ecdf.mean(),
        sd: ecdf.variance().sqrt(),
    };
    Tw1Law::from_samples(ecdf.samples().to_vec(), provenance)
}

/// Default Monte Carlo size for [`ConvolutionF`].
pub const CONVOLUTION_SAMPLES: usize = 100_000;

/// `N{0, 2(1-2/π)²} + (2/π)·n^{-1/6}·TW1`, stored as sorted draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionF {
    n: usize,
    law: EmpiricalLaw,
}

impl ConvolutionF {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> &[f64] {
        self.law.samples()
    }

    pub fn empirical(&self) -> &EmpiricalLaw {
        &self.law
    }
}

/// Builds the convolution law for dimension `n` from `m` draws, sampling
/// the Tracy–Widom term by inverse CDF.
pub fn convolution_f(n: usize, m: usize, tw1: &Tw1Law, seed: Seed) -> Result<ConvolutionF> {
    if n == 0 {
        return Err(Error::InvalidDimension(0, "dimension must be at least 1"));
    }
    if m == 0 {
        return Err(Error::InvalidParameter(
            "convolution law needs m >= 1".into(),
        ));
    }
    let mut rng = seed.rng();
    let sd = normal_limit_sd();
    let tw_scale = 2.0 / PI * (n as f64).powf(-1.0 / 6.0);
    let draws = (0..m)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            sd * z + tw_scale * tw1.quantile(u)
        })
        .collect();
    Ok(ConvolutionF {
        n,
        law: EmpiricalLaw::from_unsorted(draws)?,
    })
}

impl LimitLaw for ConvolutionF {
    fn cdf(&self, x: f64) -> f64 {
        self.law.cdf(x)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.law.quantile(p)
    }

    fn upper_p_value(&self, x: f64) -> PValue {
        self.law.upper_p_value(x)
    }
}

/// Gumbel-type law `exp(-K·e^{-y/2})` of the normalized coherence
/// `n·T_n² - 4 log n + log log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelCoherence {
    pub k: f64,
}

impl GumbelCoherence {
    /// `K = 1/√(8π)`, the constant of the coherence limit for `n`
    /// observations of `n` independent Gaussian coordinates.
    pub fn coherence() -> Self {
        GumbelCoherence {
            k: 1.0 / (8.0 * PI).sqrt(),
        }
    }

    /// `K = √(8π)`.
    pub fn reciprocal_constant() -> Self {
        GumbelCoherence {
            k: (8.0 * PI).sqrt(),
        }
    }
}

impl Default for GumbelCoherence {
    fn default() -> Self {
        Self::coherence()
    }
}

pub fn gumbel_coherence_cdf(law: GumbelCoherence, y: f64) -> f64 {
    (-law.k * (-y / 2.0).exp()).exp()
}

pub fn gumbel_coherence_quantile(law: GumbelCoherence, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    Ok(-2.0 * (-p.ln() / law.k).ln())
}

impl LimitLaw for GumbelCoherence {
    fn cdf(&self, x: f64) -> f64 {
        gumbel_coherence_cdf(*self, x)
    }

    fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        gumbel_coherence_quantile(*self, p).expect("probability clamped into (0, 1)")
    }

    fn upper_p_value(&self, x: f64) -> PValue {
        // 1 - exp(-t) without cancellation.
        let t = self.k * (-x / 2.0).exp();
        PValue::Exact(-(-t).exp_m1())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_normal_reference_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        // Φ(1.959963984540054) = 0.975 to double precision.
        let d = std_normal_cdf(1.959_963_984_540_054) - 0.975;
        assert!(d.abs() < 1e-14, "{d:e}");
        assert!((std_normal_quantile(0.95) - 1.644_853_626_951_472_2).abs() < 1e-12);
        assert!((std_normal_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-27);
    }

    #[test]
    fn normal_limit_examples() {
        assert_eq!(normal_limit_cdf(0.0), 0.5);
        let x = normal_limit_sd() * std_normal_quantile(0.95);
        let d = normal_limit_cdf(x) - 0.95;
        assert!(d.abs() < 1e-12, "{d:e}");
        // √2(1 - 2/π)·1.644854 = 0.84529.
        assert!((x - 0.8455).abs() < 5e-4);
        assert_eq!(normal_limit_cdf(f64::INFINITY), 1.0);
        assert_eq!(normal_limit_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn empirical_law_examples() {
        let e = EmpiricalLaw::from_sorted(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.quantile(0.5), 2.0);
        assert_eq!(e.quantile(0.0), 1.0);
        assert_eq!(e.quantile(1.0), 3.0);
        assert_eq!(e.cdf(0.0), 0.0);
        assert_eq!(e.cdf(3.0), 1.0);
        assert_eq!(e.cdf(2.0), 2.0 / 3.0);
        assert_eq!(e.upper_p_value(3.0), PValue::Below(1.0 / 3.0));
        assert!(EmpiricalLaw::from_sorted(vec![]).is_err());
        assert!(EmpiricalLaw::from_sorted(vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn empirical_uniform_glivenko_cantelli() {
        let mut rng = Seed::new(8).rng();
        let e = EmpiricalLaw::from_unsorted((0..100_000).map(|_| rng.random::<f64>()).collect())
            .unwrap();
        let sup = (0..=1000)
            .map(|k| {
                let x = k as f64 / 1000.0;
                (e.cdf(x) - x).abs()
            })
            .fold(0.0_f64, f64::max);
        assert!(sup <= 0.01, "{sup}");
    }

    #[test]
    fn gumbel_closed_form() {
        let law = GumbelCoherence::default();
        for p in [0.01, 0.5, 0.95, 0.999] {
            let y = gumbel_coherence_quantile(law, p).unwrap();
            assert!((gumbel_coherence_cdf(law, y) - p).abs() < 1e-12);
        }
        assert!(gumbel_coherence_quantile(law, 0.0).is_err());
        assert!(gumbel_coherence_quantile(law, 1.0).is_err());
        assert!((gumbel_coherence_cdf(law, 1e6) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gumbel_quantile_reference_values() {
        // -2 log(-log(0.95)·√(8π)) and -2 log(-log(0.95)/√(8π)).
        let q = gumbel_coherence_quantile(GumbelCoherence::coherence(), 0.95).unwrap();
        assert!((q - 2.716_219_070_555_09).abs() < 1e-12, "{q}");
        let q = gumbel_coherence_quantile(GumbelCoherence::reciprocal_constant(), 0.95).unwrap();
        assert!((q - 9.164_561_925_613_56).abs() < 1e-12, "{q}");
    }

    #[test]
    fn tridiagonal_top_matches_dense() {
        // [[2,1,0],[1,2,1],[0,1,2]] has eigenvalues 2 ± √2 and 2.
        let top = tridiagonal_top_eigenvalue(&[2.0, 2.0, 2.0], &[1.0, 1.0]);
        assert!((top - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        assert_eq!(tridiagonal_top_eigenvalue(&[-3.0], &[]), -3.0);
    }

    #[test]
    fn truncated_block_matches_full_tridiagonal() {
        let n = 3000;
        let seed = Seed::new(31);
        let full = sample_scaled_top_eigenvalues_with_block(40, n, n, seed).unwrap();
        let block = sample_scaled_goe_top_eigenvalues(40, n, seed).unwrap();
        assert!(tridiagonal_block_size(n) < n);
        for (a, b) in full.iter().zip(&block) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn bundled_table_is_consistent() {
        let tw = Tw1Law::bundled();
        let p = tw.provenance();
        assert!(p.m >= 100_000 && p.n_gen >= 2000);
        for k in 1..100 {
            let q = k as f64 / 100.0;
            assert!((tw.cdf(tw.quantile(q)) - q).abs() < 1e-9);
        }
        // Monotone with clamped tails.
        let mut prev = 0.0;
        for i in 0..10_000 {
            let x = -10.0 + 15.0 * i as f64 / 9999.0;
            let c = tw.cdf(x);
            assert!(c >= prev && (TW1_TAIL_CLAMP..=1.0 - TW1_TAIL_CLAMP).contains(&c));
            prev = c;
        }
        assert_eq!(tw.upper_p_value(50.0), PValue::Below(1e-4));
    }

    #[test]
    fn table_round_trips_through_text() {
        let tw = Tw1Law::bundled();
        let mut buf = Vec::new();
        tw.write(&mut buf).unwrap();
        let back = Tw1Law::parse(&buf[..]).unwrap();
        assert_eq!(back, tw);
    }

    #[test]
    fn table_generation_refuses_small_runs() {
        assert!(build_tw1_table(9_999, 2000, Seed::new(1)).is_err());
        assert!(build_tw1_table(10_000, 100, Seed::new(1)).is_err());
    }

    #[test]
    fn convolution_is_deterministic() {
        let tw = Tw1Law::bundled();
        let a = convolution_f(500, 1000, &tw, Seed::new(3)).unwrap();
        let b = convolution_f(500, 1000, &tw, Seed::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn convolution_collapses_to_normal_for_huge_n() {
        let tw = Tw1Law::bundled();
        // The Tracy–Widom term is scaled by (2/π)·1e-3 here.
        let f = convolution_f(1_000_000_000_000_000_000, 100_000, &tw, Seed::new(4)).unwrap();
        for p in [0.05, 0.5, 0.95] {
            assert!(
                (f.quantile(p) - NormalLimit.quantile(p)).abs() < 0.01,
                "{p}"
            );
        }
    }

    #[test]
    fn pvalue_serialization() {
        assert_eq!(
            serde_json::to_string(&PValue::Below(1e-4)).unwrap(),
            "\"<1e-4\""
        );
        assert_eq!(serde_json::to_string(&PValue::Exact(0.25)).unwrap(), "0.25");
    }
}
