use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use modnet::distributions::{
    build_tw1_table, GumbelCoherence, LimitLaw, NormalLimit, Tw1Law, CONVOLUTION_SAMPLES,
};
use modnet::ensembles::ErDiagonal;
use modnet::harness::{
    run_calibration_multi, run_comparison_study, run_correlation_study, run_power_study,
    run_type_one_study, CalibrationConfig, CalibrationLaw, NullFamily, PowerConfig,
    TailOrientation,
};
use modnet::hypothesis::{
    recursive_split, CoherenceMatrix, CriticalRule, ReferenceLaws, SplitConfig, TestKind,
    TestOptions,
};
use modnet::netio::{
    build_correlation_network, load_matrix_csv, load_observations_csv, standardize_off_diagonal,
    ObservationFormat,
};
use modnet::spectral::modularity;
use modnet::Seed;

use crate::output::{self, AnalyzeOutput, QuantileRow, QuantilesOutput};
use crate::{CliResult, Failure, Format, GlobalArgs};

/// Environment variable naming a Tracy–Widom table to use instead of the
/// bundled one.
pub const TW1_TABLE_ENV: &str = "MODNET_TW1_TABLE";

/// Salt separating the convolution-law seed from the study seeds.
const LAW_SALT: u64 = 0x1A55;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleArg {
    Goe,
    /// Centred Exp(1) entries, `√2`-scaled on the diagonal.
    Exp,
    /// `(X + Xᵀ)/√2` with centred Exp(1) entries in `X`.
    ExpSym,
    /// Standardized Erdős–Rényi adjacency, `√2`-scaled diagonal.
    Er,
    /// Standardized Erdős–Rényi adjacency without self-loops.
    ErZeroDiagonal,
    Corr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawArg {
    Normal,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationArg {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Modularity1,
    Modularity2,
    Lambda1,
    Entrywise,
}

impl From<MethodArg> for TestKind {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Modularity1 => TestKind::ModularityI,
            MethodArg::Modularity2 => TestKind::ModularityII,
            MethodArg::Lambda1 => TestKind::LargestEigenvalue,
            MethodArg::Entrywise => TestKind::EntrywiseMaximum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalArg {
    /// Quantile of N(0, 2(1-2/π)²).
    Limiting,
    /// Standard normal quantile.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceArg {
    Correlation,
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GumbelArg {
    /// K = 1/√(8π).
    Coherence,
    /// K = √(8π).
    Reciprocal,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LawOptions {
    /// Draws used for each convolution law.
    #[arg(long, default_value_t = CONVOLUTION_SAMPLES)]
    conv_samples: usize,

    /// Critical value of the first modularity test.
    #[arg(long, value_enum, default_value_t = CriticalArg::Limiting)]
    critical_rule: CriticalArg,

    /// Matrix used by the entrywise maximum test.
    #[arg(long, value_enum, default_value_t = CoherenceArg::Covariance)]
    coherence: CoherenceArg,

    /// Constant of the Gumbel coherence law.
    #[arg(long, value_enum, default_value_t = GumbelArg::Coherence)]
    gumbel_k: GumbelArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = EnsembleArg::Goe)]
    ensemble: EnsembleArg,

    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,

    /// Levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.5,0.95")]
    alpha: Vec<f64>,

    /// Reference laws, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "f")]
    law: Vec<LawArg>,

    #[arg(long, value_enum, default_value_t = OrientationArg::Upper)]
    orientation: OrientationArg,

    /// Edge probability of the Erdős–Rényi ensemble (default n^{-1/4}).
    #[arg(long)]
    p: Option<f64>,

    /// Observations behind the correlation ensemble (default round(n^{5/2})).
    #[arg(long)]
    samples: Option<usize>,

    #[command(flatten)]
    laws: LawOptions,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PowerArgs {
    #[arg(long, value_delimiter = ',', default_value = "200,400")]
    n: Vec<usize>,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Spike strength in units of √n.
    #[arg(long, default_value_t = 1.0)]
    beta_scale: f64,

    /// Half-width of the uniform diagonal in units of √n.
    #[arg(long, default_value_t = 1.0)]
    diag_scale: f64,

    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "modularity1,modularity2,lambda1,entrywise"
    )]
    methods: Vec<MethodArg>,

    /// Sample from this null ensemble instead (type I error).
    #[arg(long, value_enum)]
    null: Option<EnsembleArg>,

    #[command(flatten)]
    laws: LawOptions,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorrelateArgs {
    #[arg(long, value_delimiter = ',', default_value = "50,500")]
    n: Vec<usize>,

    /// Also write the (Q/n, n^{1/6}λ1) scatter to this CSV file.
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long, value_delimiter = ',', default_value = "50,100,150,200")]
    n: Vec<usize>,

    #[arg(long, default_value_t = 2.0)]
    beta_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileLaw {
    Normal,
    Tw1,
    F,
    Gumbel,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuantilesArgs {
    #[arg(long, value_enum)]
    law: QuantileLaw,

    /// Dimension of the convolution law.
    #[arg(long)]
    n: Option<usize>,

    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.01,0.05,0.1,0.5,0.9,0.95,0.99"
    )]
    probs: Vec<f64>,

    #[command(flatten)]
    laws: LawOptions,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    /// Square CSV weight matrix.
    #[arg(long)]
    input: PathBuf,

    #[arg(long, value_enum, default_value_t = MethodArg::Modularity2)]
    method: MethodArg,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Standardize the off-diagonal entries before testing.
    #[arg(long)]
    standardize: bool,

    #[command(flatten)]
    laws: LawOptions,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Observation table (members by observations).
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    obs: Option<PathBuf>,

    /// Square weight matrix, standardized before the split.
    #[arg(long)]
    matrix: Option<PathBuf>,

    #[arg(long, default_value_t = 0.01)]
    alpha: f64,

    #[arg(long, default_value_t = 3)]
    max_depth: usize,

    #[arg(long, value_enum, default_value_t = MethodArg::Modularity1)]
    method: MethodArg,

    /// Cell text marking a missing observation.
    #[arg(long, default_value = "NA")]
    missing_token: String,

    /// Rows are members and columns are observations.
    #[arg(long)]
    members_as_rows: bool,

    /// The observation file has no header row.
    #[arg(long)]
    no_header: bool,

    /// Zero-based column holding member labels (with --members-as-rows).
    #[arg(long)]
    label_column: Option<usize>,

    #[command(flatten)]
    laws: LawOptions,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Tw1TableArgs {
    /// Number of sampled top eigenvalues.
    #[arg(long, default_value_t = 1_000_000)]
    m: usize,

    /// Dimension of the sampled GOE matrices.
    #[arg(long, default_value_t = 1_000_000)]
    n_gen: usize,
}

fn tw1_law() -> CliResult<(Tw1Law, Vec<String>)> {
    match std::env::var_os(TW1_TABLE_ENV) {
        Some(path) if !path.is_empty() => {
            let law = Tw1Law::load(&path)?;
            let note = format!(
                "Tracy–Widom table loaded from {}",
                PathBuf::from(path).display()
            );
            Ok((law, vec![note]))
        }
        _ => Ok((Tw1Law::bundled(), Vec::new())),
    }
}

fn reference_laws(g: &GlobalArgs, opts: &LawOptions) -> CliResult<(ReferenceLaws, Vec<String>)> {
    if opts.conv_samples == 0 {
        return Err(Failure::Usage("--conv-samples must be positive".into()));
    }
    let (tw1, notes) = tw1_law()?;
    let options = TestOptions {
        critical_rule: match opts.critical_rule {
            CriticalArg::Limiting => CriticalRule::LimitingLaw,
            CriticalArg::Standard => CriticalRule::StandardNormal,
        },
        coherence_matrix: match opts.coherence {
            CoherenceArg::Correlation => CoherenceMatrix::Correlation,
            CoherenceArg::Covariance => CoherenceMatrix::Covariance,
        },
        gumbel: gumbel(opts.gumbel_k),
    };
    let laws = ReferenceLaws::new(tw1, opts.conv_samples, Seed::new(g.seed).derive(LAW_SALT))
        .with_options(options);
    Ok((laws, notes))
}

fn gumbel(k: GumbelArg) -> GumbelCoherence {
    match k {
        GumbelArg::Coherence => GumbelCoherence::coherence(),
        GumbelArg::Reciprocal => GumbelCoherence::reciprocal_constant(),
    }
}

fn family(e: EnsembleArg, p: Option<f64>, samples: Option<usize>) -> NullFamily {
    match e {
        EnsembleArg::Goe => NullFamily::Goe,
        EnsembleArg::Exp => NullFamily::WignerExp,
        EnsembleArg::ExpSym => NullFamily::WignerExpSymmetrized,
        EnsembleArg::Er => NullFamily::ErdosRenyi {
            p,
            diagonal: ErDiagonal::Scaled,
        },
        EnsembleArg::ErZeroDiagonal => NullFamily::ErdosRenyi {
            p,
            diagonal: ErDiagonal::Zero,
        },
        EnsembleArg::Corr => NullFamily::Correlation { samples },
    }
}

fn inputs<T: Serialize>(g: &GlobalArgs, command: &str, args: &T) -> serde_json::Value {
    serde_json::json!({
        "command": command,
        "reps": g.reps,
        "args": args,
    })
}

pub fn dispatch(g: &GlobalArgs, command: &crate::Command) -> CliResult<()> {
    use crate::Command as C;
    let seed = Seed::new(g.seed);
    match command {
        C::Simulate(a) => {
            let (laws, warnings) = reference_laws(g, &a.laws)?;
            let config = CalibrationConfig {
                ensemble: family(a.ensemble, a.p, a.samples),
                n_values: a.n.clone(),
                alphas: a.alpha.clone(),
                reps: g.reps,
                orientation: match a.orientation {
                    OrientationArg::Upper => TailOrientation::Upper,
                    OrientationArg::Lower => TailOrientation::Lower,
                },
            };
            let kinds: Vec<CalibrationLaw> = a
                .law
                .iter()
                .map(|l| match l {
                    LawArg::Normal => CalibrationLaw::NormalLimit,
                    LawArg::F => CalibrationLaw::ConvolutionF,
                })
                .collect();
            let reports = run_calibration_multi(&config, &kinds, &laws, seed)?;
            output::emit(g, Format::Csv, inputs(g, "simulate", a), &reports, warnings)
        }
        C::Power(a) => {
            let (laws, warnings) = reference_laws(g, &a.laws)?;
            let methods: Vec<TestKind> = a.methods.iter().map(|&m| m.into()).collect();
            let report = match a.null {
                Some(e) => run_type_one_study(
                    family(e, None, None),
                    &a.n,
                    a.alpha,
                    g.reps,
                    &methods,
                    &laws,
                    seed,
                )?,
                None => {
                    let config = PowerConfig {
                        n_values: a.n.clone(),
                        alpha: a.alpha,
                        reps: g.reps,
                        beta_scale: a.beta_scale,
                        diag_scale: a.diag_scale,
                        methods,
                    };
                    run_power_study(&config, &laws, seed)?
                }
            };
            output::emit(g, Format::Csv, inputs(g, "power", a), &report, warnings)
        }
        C::Correlate(a) => {
            let report = run_correlation_study(&a.n, g.reps, a.scatter.is_some(), seed)?;
            if let Some(path) = &a.scatter {
                let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                report.write_scatter_csv(&mut f)?;
            }
            output::emit(
                g,
                Format::Csv,
                inputs(g, "correlate", a),
                &report,
                Vec::new(),
            )
        }
        C::Compare(a) => {
            let report = run_comparison_study(&a.n, g.reps, a.beta_scale, seed)?;
            output::emit(g, Format::Csv, inputs(g, "compare", a), &report, Vec::new())
        }
        C::Quantiles(a) => {
            let (laws, warnings) = reference_laws(g, &a.laws)?;
            if let Some(&p) = a.probs.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
                return Err(Failure::Usage(format!(
                    "probabilities must lie in (0, 1), got {p}"
                )));
            }
            let conv = match (a.law, a.n) {
                (QuantileLaw::F, Some(n)) => Some(laws.convolution(n)?),
                (QuantileLaw::F, None) => {
                    return Err(Failure::Usage("--law f needs --n".into()));
                }
                _ => None,
            };
            let gumbel_law = gumbel(a.laws.gumbel_k);
            let rows = a
                .probs
                .iter()
                .map(|&p| {
                    let q = match a.law {
                        QuantileLaw::Normal => NormalLimit.quantile(p),
                        QuantileLaw::Tw1 => laws.tw1.quantile(p),
                        QuantileLaw::F => conv.as_ref().expect("built above").quantile(p),
                        QuantileLaw::Gumbel => gumbel_law.quantile(p),
                    };
                    QuantileRow { p, quantile: q }
                })
                .collect();
            let out = QuantilesOutput {
                law: a.law,
                n: a.n,
                rows,
            };
            output::emit(g, Format::Csv, inputs(g, "quantiles", a), &out, warnings)
        }
        C::Test(a) => {
            let (laws, mut warnings) = reference_laws(g, &a.laws)?;
            let loaded = load_matrix_csv(&a.input)?;
            warnings.extend(loaded.warnings);
            let w = if a.standardize {
                standardize_off_diagonal(&loaded.matrix)?
            } else {
                loaded.matrix
            };
            let md = modularity(&w)?;
            let result = laws.run(a.method.into(), &w, &md, a.alpha)?;
            output::emit(g, Format::Json, inputs(g, "test", a), &result, warnings)
        }
        C::Analyze(a) => analyze(g, a),
        C::Tw1Table(a) => {
            let law = build_tw1_table(a.m, a.n_gen, seed)?;
            let mut buf = Vec::new();
            law.write(&mut buf)?;
            output::write_bytes(g, &buf)
        }
    }
}

fn analyze(g: &GlobalArgs, a: &AnalyzeArgs) -> CliResult<()> {
    let (laws, mut warnings) = reference_laws(g, &a.laws)?;
    let mut provenance = Vec::new();
    let mut dropped = Vec::new();
    let mut excluded = Vec::new();
    let (matrix, labels) = match (&a.obs, &a.matrix) {
        (Some(path), _) => {
            let format = ObservationFormat {
                missing_token: a.missing_token.clone(),
                members_as_rows: a.members_as_rows,
                has_header: !a.no_header,
                label_column: a.label_column,
            };
            let obs = load_observations_csv(path, &format)?;
            dropped = obs.dropped.clone();
            let net = build_correlation_network(&obs)?;
            provenance = net.provenance;
            excluded = net.excluded;
            (net.matrix, net.labels)
        }
        (None, Some(path)) => {
            let loaded = load_matrix_csv(path)?;
            warnings.extend(loaded.warnings);
            let labels = loaded
                .labels
                .unwrap_or_else(|| (1..=loaded.matrix.n()).map(|i| i.to_string()).collect());
            provenance.push(format!(
                "loaded {}×{} matrix",
                loaded.matrix.n(),
                loaded.matrix.n()
            ));
            provenance
                .push("off-diagonal standardized to mean 0, variance 1; diagonal set to 0".into());
            (standardize_off_diagonal(&loaded.matrix)?, labels)
        }
        (None, None) => {
            return Err(Failure::Usage(
                "one of --obs or --matrix is required".into(),
            ))
        }
    };
    let config = SplitConfig {
        alpha: a.alpha,
        max_depth: a.max_depth,
        test: a.method.into(),
        ..SplitConfig::default()
    };
    let tree = recursive_split(&matrix, &config, &laws)?;
    let out = AnalyzeOutput::new(&tree, &labels, matrix.n(), provenance, dropped, excluded);
    output::emit(g, Format::Json, inputs(g, "analyze", a), &out, warnings)
}
