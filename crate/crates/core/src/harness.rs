//! Seeded Monte Carlo studies: calibration of the null laws, power of the
//! four tests, decorrelation of `Q` and `λ_1`, and the comparison of the
//! normalized modularities.
//!
//! Replicate `r` of dimension `n` always draws from
//! `seed.derive(n).replicate(r)` (with a per-study salt), and replicates
//! are reduced in index order, so reports do not depend on the number of
//! worker threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{EmpiricalLaw, LimitLaw, NormalLimit};
use crate::ensembles::{
    correlation_sample_count, make_balanced_spike, sample_spiked, sparse_er_probability, Ensemble,
    EnsembleSpec, ErDiagonal, SpikedSpec,
};
use crate::error::{Error, Result};
use crate::hypothesis::{ReferenceLaws, TestKind};
use crate::seed::Seed;
use crate::spectral::{modularity, NormalizedVariant};

/// Version tag written into every JSON report.
pub const REPORT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest number of scatter points kept per dimension.
pub const SCATTER_CAP: usize = 5000;

const SALT_CALIBRATION: u64 = 0xCA11;
const SALT_POWER: u64 = 0x90E5;
const SALT_CORRELATION: u64 = 0xC055;
const SALT_COMPARISON: u64 = 0xC04A;

/// A null ensemble whose parameters may depend on `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullFamily {
    Goe,
    WignerExp,
    /// `(X + Xᵀ)/√2` with centred Exp(1) entries in `X`.
    WignerExpSymmetrized,
    /// Edge probability `p`, or `n^{-1/4}` when absent.
    ErdosRenyi {
        p: Option<f64>,
        #[serde(default)]
        diagonal: ErDiagonal,
    },
    /// `samples` observations, or `round(n^{5/2})` when absent.
    Correlation {
        samples: Option<usize>,
    },
}

impl NullFamily {
    pub fn spec_for(&self, n: usize) -> Result<EnsembleSpec> {
        let ensemble = match *self {
            NullFamily::Goe => Ensemble::Goe,
            NullFamily::WignerExp => Ensemble::WignerExp,
            NullFamily::WignerExpSymmetrized => Ensemble::WignerExpSymmetrized,
            NullFamily::ErdosRenyi { p, diagonal } => Ensemble::ErdosRenyi {
                p: p.unwrap_or_else(|| sparse_er_probability(n)),
                diagonal,
            },
            NullFamily::Correlation { samples } => Ensemble::CorrelationNull {
                samples: samples.unwrap_or_else(|| correlation_sample_count(n)),
            },
        };
        EnsembleSpec::new(ensemble, n)
    }

    pub fn name(&self) -> &'static str {
        match self {
            NullFamily::Goe => "goe",
            NullFamily::WignerExp => "wigner_exp",
            NullFamily::WignerExpSymmetrized => "wigner_exp_symmetrized",
            NullFamily::ErdosRenyi {
                diagonal: ErDiagonal::Scaled,
                ..
            } => "erdos_renyi",
            NullFamily::ErdosRenyi {
                diagonal: ErDiagonal::Zero,
                ..
            } => "erdos_renyi_zero_diagonal",
            NullFamily::Correlation { .. } => "correlation",
        }
    }
}

impl FromStr for NullFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "goe" => Ok(NullFamily::Goe),
            "exp" | "wigner-exp" | "wigner_exp" => Ok(NullFamily::WignerExp),
            "exp-sym" | "wigner-exp-symmetrized" | "wigner_exp_symmetrized" => {
                Ok(NullFamily::WignerExpSymmetrized)
            }
            "er" | "erdos-renyi" | "erdos_renyi" => Ok(NullFamily::ErdosRenyi {
                p: None,
                diagonal: ErDiagonal::Scaled,
            }),
            "er-zero-diagonal" | "erdos_renyi_zero_diagonal" => Ok(NullFamily::ErdosRenyi {
                p: None,
                diagonal: ErDiagonal::Zero,
            }),
            "corr" | "correlation" => Ok(NullFamily::Correlation { samples: None }),
            other => Err(Error::InvalidParameter(format!(
                "unknown ensemble {other:?}; expected goe, exp, exp-sym, er, er-zero-diagonal or corr"
            ))),
        }
    }
}

/// Reference law whose quantiles a calibration run checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationLaw {
    NormalLimit,
    ConvolutionF,
}

impl fmt::Display for CalibrationLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibrationLaw::NormalLimit => "normal",
            CalibrationLaw::ConvolutionF => "f",
        })
    }
}

impl FromStr for CalibrationLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "n" | "normal-limit" => Ok(CalibrationLaw::NormalLimit),
            "f" | "convolution" | "convolution-f" => Ok(CalibrationLaw::ConvolutionF),
            other => Err(Error::InvalidParameter(format!(
                "unknown law {other:?}; expected normal or f"
            ))),
        }
    }
}

/// Which tail probability a calibration cell reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailOrientation {
    /// `pr(stat > q_{1-α})`: the rejection rate of a level-α test.
    #[default]
    Upper,
    /// `pr(stat ≤ q_α)`.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationCell {
    pub n: usize,
    pub alpha: f64,
    pub quantile: f64,
    pub probability: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub ensemble: NullFamily,
    pub law: CalibrationLaw,
    pub orientation: TailOrientation,
    pub n_values: Vec<usize>,
    pub alphas: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub cells: Vec<CalibrationCell>,
}

impl CalibrationReport {
    pub fn cell(&self, n: usize, alpha: f64) -> Option<&CalibrationCell> {
        self.cells.iter().find(|c| c.n == n && c.alpha == alpha)
    }
}

/// Monte Carlo standard error of a proportion.
pub fn proportion_se(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

/// `|p̂ - target| ≤ max(tol, 3·SE)`.
pub fn within_band(p_hat: f64, target: f64, tol: f64, se: f64) -> bool {
    (p_hat - target).abs() <= tol.max(3.0 * se)
}

fn require_reps(reps: usize, min: usize) -> Result<()> {
    if reps < min {
        return Err(Error::InvalidParameter(format!(
            "reps must be at least {min}, got {reps}"
        )));
    }
    Ok(())
}

fn require_dims(n_values: &[usize], min: usize) -> Result<()> {
    if n_values.is_empty() {
        return Err(Error::InvalidParameter("no dimensions given".into()));
    }
    if let Some(&n) = n_values.iter().find(|&&n| n < min) {
        return Err(Error::InvalidDimension(
            n,
            "dimension too small for this study",
        ));
    }
    Ok(())
}

fn replicates<T: Send>(
    reps: usize,
    seed: Seed,
    f: impl Fn(Seed) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| f(seed.replicate(r)))
        .collect()
}

/// Variant-1 normalized modularity of `reps` draws from `family` at `n`.
pub fn null_statistics(family: NullFamily, n: usize, reps: usize, seed: Seed) -> Result<Vec<f64>> {
    let spec = family.spec_for(n)?;
    replicates(reps, seed.derive(SALT_CALIBRATION).derive(n as u64), |s| {
        let w = spec.sample(s)?;
        Ok(modularity(&w)?
            .normalized(NormalizedVariant::CenteredL1)
            .value)
    })
}

/// Calibration cells of the null statistics `stats` against `law`.
pub fn calibrate_statistics(
    n: usize,
    stats: &[f64],
    alphas: &[f64],
    law: CalibrationLaw,
    orientation: TailOrientation,
    laws: &ReferenceLaws,
) -> Result<Vec<CalibrationCell>> {
    let conv = match law {
        CalibrationLaw::ConvolutionF => Some(laws.convolution(n)?),
        CalibrationLaw::NormalLimit => None,
    };
    let quantile = |p: f64| match &conv {
        Some(f) => f.quantile(p),
        None => NormalLimit.quantile(p),
    };
    alphas
        .iter()
        .map(|&alpha| {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "alpha must lie in (0, 1), got {alpha}"
                )));
            }
            let (q, hits) = match orientation {
                TailOrientation::Upper => {
                    let q = quantile(1.0 - alpha);
                    (q, stats.iter().filter(|&&s| s > q).count())
                }
                TailOrientation::Lower => {
                    let q = quantile(alpha);
                    (q, stats.iter().filter(|&&s| s <= q).count())
                }
            };
            let p = hits as f64 / stats.len() as f64;
            Ok(CalibrationCell {
                n,
                alpha,
                quantile: q,
                probability: p,
                se: proportion_se(p, stats.len()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub ensemble: NullFamily,
    pub n_values: Vec<usize>,
    pub alphas: Vec<f64>,
    pub reps: usize,
    pub orientation: TailOrientation,
}

/// One calibration report per law, all computed from the same replicates.
pub fn run_calibration_multi(
    config: &CalibrationConfig,
    law_kinds: &[CalibrationLaw],
    laws: &ReferenceLaws,
    seed: Seed,
) -> Result<Vec<CalibrationReport>> {
    require_reps(config.reps, 100)?;
    require_dims(&config.n_values, 2)?;
    let mut reports: Vec<CalibrationReport> = law_kinds
        .iter()
        .map(|&law| CalibrationReport {
            ensemble: config.ensemble,
            law,
            orientation: config.orientation,
            n_values: config.n_values.clone(),
            alphas: config.alphas.clone(),
            reps: config.reps,
            seed: seed.root,
            cells: Vec::new(),
        })
        .collect();
    for &n in &config.n_values {
        let stats = null_statistics(config.ensemble, n, config.reps, seed)?;
        for report in &mut reports {
            report.cells.extend(calibrate_statistics(
                n,
                &stats,
                &config.alphas,
                report.law,
                config.orientation,
                laws,
            )?);
        }
    }
    Ok(reports)
}

pub fn run_calibration(
    config: &CalibrationConfig,
    law: CalibrationLaw,
    laws: &ReferenceLaws,
    seed: Seed,
) -> Result<CalibrationReport> {
    Ok(run_calibration_multi(config, &[law], laws, seed)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCell {
    pub n: usize,
    pub test: TestKind,
    pub power: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerReport {
    pub n_values: Vec<usize>,
    pub methods: Vec<TestKind>,
    pub alpha: f64,
    pub reps: usize,
    /// Spike strength in units of `√n`.
    pub beta_scale: f64,
    /// Half-width of the diagonal heterogeneity in units of `√n`.
    pub diag_scale: f64,
    pub seed: u64,
    pub cells: Vec<PowerCell>,
}

impl PowerReport {
    pub fn power(&self, n: usize, test: TestKind) -> Option<&PowerCell> {
        self.cells.iter().find(|c| c.n == n && c.test == test)
    }
}

/// The spiked alternative: two equal clusters, `β = beta_scale·√n` and
/// diagonal entries uniform on `diag_scale·[-√n, √n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub n_values: Vec<usize>,
    pub alpha: f64,
    pub reps: usize,
    pub beta_scale: f64,
    pub diag_scale: f64,
    pub methods: Vec<TestKind>,
}

impl PowerConfig {
    /// `β = √n`, full diagonal heterogeneity, all four tests.
    pub fn standard(n_values: Vec<usize>, alpha: f64, reps: usize) -> Self {
        PowerConfig {
            n_values,
            alpha,
            reps,
            beta_scale: 1.0,
            diag_scale: 1.0,
            methods: TestKind::ALL.to_vec(),
        }
    }
}

/// Parameters of one draw from the spiked alternative.
pub fn power_alternative(
    n: usize,
    beta_scale: f64,
    diag_scale: f64,
    seed: Seed,
) -> Result<SpikedSpec> {
    let base = make_balanced_spike(n, seed)?;
    let d = base.d.iter().map(|x| diag_scale * x).collect();
    SpikedSpec::new(beta_scale * (n as f64).sqrt(), base.u, d)
}

/// Rejection rates under the spiked alternative. With both scales at 0 the
/// model is the GOE and the rates estimate the type I error.
pub fn run_power_study(
    config: &PowerConfig,
    laws: &ReferenceLaws,
    seed: Seed,
) -> Result<PowerReport> {
    require_reps(config.reps, 100)?;
    require_dims(&config.n_values, 4)?;
    for (name, v) in [("beta", config.beta_scale), ("diagonal", config.diag_scale)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} scale must be finite and non-negative, got {v}"
            )));
        }
    }
    let methods = &config.methods;
    let mut cells = Vec::new();
    for &n in &config.n_values {
        if methods.contains(&TestKind::ModularityII) {
            laws.convolution(n)?;
        }
        let base = seed.derive(SALT_POWER).derive(n as u64);
        let decisions = replicates(config.reps, base, |s| {
            let spec = power_alternative(n, config.beta_scale, config.diag_scale, s.derive(1))?;
            let w = sample_spiked(&spec, s.derive(2))?;
            let md = modularity(&w)?;
            methods
                .iter()
                .map(|&kind| Ok(laws.run(kind, &w, &md, config.alpha)?.reject))
                .collect::<Result<Vec<bool>>>()
        })?;
        for (k, &test) in methods.iter().enumerate() {
            let hits = decisions.iter().filter(|d| d[k]).count();
            let power = hits as f64 / config.reps as f64;
            cells.push(PowerCell {
                n,
                test,
                power,
                se: proportion_se(power, config.reps),
            });
        }
    }
    Ok(PowerReport {
        n_values: config.n_values.clone(),
        methods: methods.clone(),
        alpha: config.alpha,
        reps: config.reps,
        beta_scale: config.beta_scale,
        diag_scale: config.diag_scale,
        seed: seed.root,
        cells,
    })
}

/// Rejection rates of `methods` under a null family (type I error).
pub fn run_type_one_study(
    family: NullFamily,
    n_values: &[usize],
    alpha: f64,
    reps: usize,
    methods: &[TestKind],
    laws: &ReferenceLaws,
    seed: Seed,
) -> Result<PowerReport> {
    require_reps(reps, 100)?;
    require_dims(n_values, 4)?;
    let mut cells = Vec::new();
    for &n in n_values {
        let spec = family.spec_for(n)?;
        let base = seed.derive(SALT_POWER ^ 1).derive(n as u64);
        let decisions = replicates(reps, base, |s| {
            let w = spec.sample(s)?;
            let md = modularity(&w)?;
            methods
                .iter()
                .map(|&kind| Ok(laws.run(kind, &w, &md, alpha)?.reject))
                .collect::<Result<Vec<bool>>>()
        })?;
        for (k, &test) in methods.iter().enumerate() {
            let rate = decisions.iter().filter(|d| d[k]).count() as f64 / reps as f64;
            cells.push(PowerCell {
                n,
                test,
                power: rate,
                se: proportion_se(rate, reps),
            });
        }
    }
    Ok(PowerReport {
        n_values: n_values.to_vec(),
        methods: methods.to_vec(),
        alpha,
        reps,
        beta_scale: 0.0,
        diag_scale: 0.0,
        seed: seed.root,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub n: usize,
    pub cor_ab: f64,
    pub cor_q_lambda: f64,
    /// Approximate standard error `(1 - r²)/√reps` of each correlation.
    pub se_ab: f64,
    pub se_q_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub n: usize,
    pub q_over_n: f64,
    pub scaled_lambda1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<CorrelationRow>,
    pub scatter: Vec<ScatterPoint>,
}

impl CorrelationReport {
    pub fn row(&self, n: usize) -> Option<&CorrelationRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// Pearson correlation of two equally long samples.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Correlations of `A_n` with `B_n` and of `Q/n` with `n^{1/6}λ_1` under
/// the GOE. `scatter` keeps up to [`SCATTER_CAP`] points per `n`.
pub fn run_correlation_study(
    n_values: &[usize],
    reps: usize,
    scatter: bool,
    seed: Seed,
) -> Result<CorrelationReport> {
    require_reps(reps, 1000)?;
    require_dims(n_values, 2)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &n in n_values {
        let spec = EnsembleSpec::new(Ensemble::Goe, n)?;
        let draws = replicates(reps, seed.derive(SALT_CORRELATION).derive(n as u64), |s| {
            let md = modularity(&spec.sample(s)?)?;
            Ok([md.a_n, md.b_n, md.q / n as f64, md.scaled_lambda1()])
        })?;
        let col = |k: usize| draws.iter().map(|d| d[k]).collect::<Vec<_>>();
        let (a, b, q, l) = (col(0), col(1), col(2), col(3));
        let cor_ab = pearson(&a, &b);
        let cor_q_lambda = pearson(&q, &l);
        let se = |r: f64| (1.0 - r * r) / (reps as f64).sqrt();
        if !(cor_ab.is_finite() && cor_q_lambda.is_finite()) {
            return Err(Error::Numerical(format!(
                "correlation undefined at n = {n}"
            )));
        }
        rows.push(CorrelationRow {
            n,
            cor_ab,
            cor_q_lambda,
            se_ab: se(cor_ab),
            se_q_lambda: se(cor_q_lambda),
        });
        if scatter {
            points.extend(q.iter().zip(&l).take(SCATTER_CAP).map(
                |(&q_over_n, &scaled_lambda1)| ScatterPoint {
                    n,
                    q_over_n,
                    scaled_lambda1,
                },
            ));
        }
    }
    Ok(CorrelationReport {
        n_values: n_values.to_vec(),
        reps,
        seed: seed.root,
        rows,
        scatter: points,
    })
}

/// Probabilities of the summary quantiles in a [`ComparisonReport`].
pub const SUMMARY_PROBS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Null,
    Spiked,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub model: Model,
    pub statistic: NormalizedVariant,
    /// Quantiles at [`SUMMARY_PROBS`].
    pub quantiles: [f64; 5],
}

impl ComparisonRow {
    pub fn median(&self) -> f64 {
        self.quantiles[2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub beta_scale: f64,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(
        &self,
        n: usize,
        model: Model,
        statistic: NormalizedVariant,
    ) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.model == model && r.statistic == statistic)
    }
}

const VARIANTS: [NormalizedVariant; 3] = [
    NormalizedVariant::RawOverN,
    NormalizedVariant::CenteredL1,
    NormalizedVariant::CenteredFourOverPi,
];

/// Distributions of `Q/n` and the two centred modularities under the GOE
/// and under the spiked alternative with `β = beta_scale·√n`.
pub fn run_comparison_study(
    n_values: &[usize],
    reps: usize,
    beta_scale: f64,
    seed: Seed,
) -> Result<ComparisonReport> {
    require_reps(reps, 500)?;
    require_dims(n_values, 4)?;
    let mut rows = Vec::new();
    for &n in n_values {
        let goe = EnsembleSpec::new(Ensemble::Goe, n)?;
        let base = seed.derive(SALT_COMPARISON).derive(n as u64);
        for model in [Model::Null, Model::Spiked] {
            let draws = replicates(reps, base.derive(model as u64), |s| {
                let w = match model {
                    Model::Null => goe.sample(s)?,
                    Model::Spiked => sample_spiked(
                        &power_alternative(n, beta_scale, 1.0, s.derive(1))?,
                        s.derive(2),
                    )?,
                };
                let md = modularity(&w)?;
                Ok(VARIANTS.map(|v| md.normalized(v).value))
            })?;
            for (k, &statistic) in VARIANTS.iter().enumerate() {
                let law = EmpiricalLaw::from_unsorted(draws.iter().map(|d| d[k]).collect())?;
                rows.push(ComparisonRow {
                    n,
                    model,
                    statistic,
                    quantiles: SUMMARY_PROBS.map(|p| law.quantile(p)),
                });
            }
        }
    }
    Ok(ComparisonReport {
        n_values: n_values.to_vec(),
        reps,
        beta_scale,
        seed: seed.root,
        rows,
    })
}

/// The JSON envelope shared by every command.
#[derive(Debug, Clone, Serialize)]
pub struct ReportEnvelope<T: Serialize> {
    pub version: String,
    pub seed: u64,
    pub inputs: serde_json::Value,
    pub results: T,
    pub warnings: Vec<String>,
}

impl<T: Serialize> ReportEnvelope<T> {
    pub fn new(seed: u64, inputs: serde_json::Value, results: T, warnings: Vec<String>) -> Self {
        ReportEnvelope {
            version: REPORT_VERSION.to_string(),
            seed,
            inputs,
            results,
            warnings,
        }
    }

    pub fn write_json(&self, mut out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        Ok(())
    }
}

/// Reports that flatten to one CSV row per cell.
pub trait CsvReport {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()>;
}

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().from_writer(out)
}

impl CsvReport for CalibrationReport {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "ensemble",
            "law",
            "orientation",
            "n",
            "alpha",
            "quantile",
            "probability",
            "se",
            "reps",
        ])?;
        let orientation = match self.orientation {
            TailOrientation::Upper => "upper",
            TailOrientation::Lower => "lower",
        };
        for c in &self.cells {
            w.write_record([
                self.ensemble.name().to_string(),
                self.law.to_string(),
                orientation.to_string(),
                c.n.to_string(),
                c.alpha.to_string(),
                c.quantile.to_string(),
                c.probability.to_string(),
                c.se.to_string(),
                self.reps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl CsvReport for Vec<CalibrationReport> {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut buf = Vec::new();
        for (k, r) in self.iter().enumerate() {
            let mut one = Vec::new();
            r.write_csv(&mut one)?;
            let text = String::from_utf8(one).expect("csv output is utf-8");
            let body = if k == 0 {
                text.as_str()
            } else {
                text.split_once('\n').map_or("", |x| x.1)
            };
            buf.extend_from_slice(body.as_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }
}

impl CsvReport for PowerReport {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "n",
            "method",
            "alpha",
            "beta_scale",
            "diag_scale",
            "power",
            "se",
            "reps",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.n.to_string(),
                c.test.to_string(),
                self.alpha.to_string(),
                self.beta_scale.to_string(),
                self.diag_scale.to_string(),
                c.power.to_string(),
                c.se.to_string(),
                self.reps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl CsvReport for CorrelationReport {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "n",
            "cor_ab",
            "se_ab",
            "cor_q_lambda",
            "se_q_lambda",
            "reps",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.cor_ab.to_string(),
                r.se_ab.to_string(),
                r.cor_q_lambda.to_string(),
                r.se_q_lambda.to_string(),
                self.reps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl CorrelationReport {
    /// Figure-style scatter of `(Q/n, n^{1/6}λ_1)`.
    pub fn write_scatter_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["n", "q_over_n", "scaled_lambda1"])?;
        for p in &self.scatter {
            w.write_record([
                p.n.to_string(),
                p.q_over_n.to_string(),
                p.scaled_lambda1.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl CsvReport for ComparisonReport {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "n",
            "model",
            "statistic",
            "q05",
            "q25",
            "q50",
            "q75",
            "q95",
            "reps",
        ])?;
        for r in &self.rows {
            let model = match r.model {
                Model::Null => "null",
                Model::Spiked => "spiked",
            };
            let stat = match r.statistic {
                NormalizedVariant::RawOverN => "q_over_n",
                NormalizedVariant::CenteredL1 => "normalized_1",
                NormalizedVariant::CenteredFourOverPi => "normalized_2",
            };
            let mut rec = vec![r.n.to_string(), model.to_string(), stat.to_string()];
            rec.extend(r.quantiles.iter().map(f64::to_string));
            rec.push(self.reps.to_string());
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
