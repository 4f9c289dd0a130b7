//! Tests for community structure and the recursive split built on them.
//!
//! Every test rejects in the upper tail: `reject == statistic > critical`.
//! The tests that need the spectrum also accept a precomputed
//! [`ModularityDecomposition`] so simulation code can decompose once and
//! run all of them.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    convolution_f, gumbel_coherence_quantile, std_normal_cdf, std_normal_quantile, ConvolutionF,
    GumbelCoherence, LimitLaw, NormalLimit, PValue, Tw1Law, CONVOLUTION_SAMPLES,
};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::netio::standardize_off_diagonal;
use crate::seed::Seed;
use crate::spectral::{modularity, ModularityDecomposition, NormalizedVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    ModularityI,
    ModularityII,
    LargestEigenvalue,
    EntrywiseMaximum,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [
        TestKind::ModularityI,
        TestKind::ModularityII,
        TestKind::LargestEigenvalue,
        TestKind::EntrywiseMaximum,
    ];

    /// Short name used on the command line and in CSV output.
    pub fn slug(self) -> &'static str {
        match self {
            TestKind::ModularityI => "modularity1",
            TestKind::ModularityII => "modularity2",
            TestKind::LargestEigenvalue => "lambda1",
            TestKind::EntrywiseMaximum => "entrywise",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "modularity1" | "modularity-i" | "i" | "1" => Ok(TestKind::ModularityI),
            "modularity2" | "modularity-ii" | "ii" | "2" => Ok(TestKind::ModularityII),
            "lambda1" | "largest-eigenvalue" | "tw" => Ok(TestKind::LargestEigenvalue),
            "entrywise" | "entrywise-max" | "coherence" => Ok(TestKind::EntrywiseMaximum),
            other => Err(Error::InvalidParameter(format!(
                "unknown test {other:?}; expected modularity1, modularity2, lambda1 or entrywise"
            ))),
        }
    }
}

/// Smallest p-value reported exactly; smaller ones are reported as a bound.
pub const P_VALUE_FLOOR: f64 = 1e-4;

/// Outcome of one test on one network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: PValue,
    pub alpha: f64,
    pub reject: bool,
    pub n: usize,
    pub notes: Vec<String>,
}

impl TestResult {
    fn decide(
        test: TestKind,
        statistic: f64,
        critical_value: f64,
        p_value: PValue,
        alpha: f64,
        n: usize,
        notes: Vec<String>,
    ) -> Self {
        let p_value = match p_value {
            PValue::Exact(p) if p < P_VALUE_FLOOR => PValue::Below(P_VALUE_FLOOR),
            PValue::Below(b) if b < P_VALUE_FLOOR => PValue::Below(P_VALUE_FLOOR),
            other => other,
        };
        TestResult {
            test,
            statistic,
            critical_value,
            p_value,
            alpha,
            reject: statistic > critical_value,
            n,
            notes,
        }
    }
}

/// Which quantile Test I compares against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalRule {
    /// Quantile of the limit `N{0, 2(1-2/π)²}`.
    #[default]
    LimitingLaw,
    /// The standard normal quantile `Φ⁻¹(1-α)`, unscaled.
    StandardNormal,
}

/// Matrix whose largest off-diagonal entry the entrywise test uses.
///
/// The covariance is the default: under the GOE its columns have unit
/// variance up to `O(1/n)`, and its finite-`n` size is the anti-conservative
/// one usually reported for this test (about 0.07 at `n = 400`, α = 0.05). The correlation version is the one the
/// Gumbel limit is proved for and is markedly conservative at small `n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceMatrix {
    Correlation,
    #[default]
    Covariance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub critical_rule: CriticalRule,
    pub coherence_matrix: CoherenceMatrix,
    pub gumbel: GumbelCoherence,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

pub fn modularity_test_i(w: &SymmetricMatrix, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    modularity_test_i_from(&modularity(w)?, alpha, CriticalRule::default())
}

pub fn modularity_test_i_from(
    md: &ModularityDecomposition,
    alpha: f64,
    rule: CriticalRule,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let stat = md.normalized(NormalizedVariant::CenteredL1).value;
    let (crit, p) = match rule {
        CriticalRule::LimitingLaw => (
            NormalLimit.quantile(1.0 - alpha),
            NormalLimit.upper_p_value(stat),
        ),
        CriticalRule::StandardNormal => (
            std_normal_quantile(1.0 - alpha),
            PValue::Exact(std_normal_cdf(-stat)),
        ),
    };
    let mut notes = md.warnings.clone();
    if rule == CriticalRule::StandardNormal {
        notes.push("critical value from the standard normal, not the limiting law".into());
    }
    Ok(TestResult::decide(
        TestKind::ModularityI,
        stat,
        crit,
        p,
        alpha,
        md.n,
        notes,
    ))
}

pub fn modularity_test_ii(w: &SymmetricMatrix, alpha: f64, f: &ConvolutionF) -> Result<TestResult> {
    check_alpha(alpha)?;
    if f.n() != w.n() {
        return Err(Error::DimensionMismatch {
            law: f.n(),
            network: w.n(),
        });
    }
    modularity_test_ii_from(&modularity(w)?, alpha, f)
}

pub fn modularity_test_ii_from(
    md: &ModularityDecomposition,
    alpha: f64,
    f: &ConvolutionF,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    if f.n() != md.n {
        return Err(Error::DimensionMismatch {
            law: f.n(),
            network: md.n,
        });
    }
    let stat = md.normalized(NormalizedVariant::CenteredL1).value;
    Ok(TestResult::decide(
        TestKind::ModularityII,
        stat,
        f.quantile(1.0 - alpha),
        f.upper_p_value(stat),
        alpha,
        md.n,
        md.warnings.clone(),
    ))
}

pub fn largest_eigenvalue_test(
    w: &SymmetricMatrix,
    alpha: f64,
    tw1: &Tw1Law,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    largest_eigenvalue_test_from(&modularity(w)?, alpha, tw1)
}

pub fn largest_eigenvalue_test_from(
    md: &ModularityDecomposition,
    alpha: f64,
    tw1: &Tw1Law,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let stat = md.scaled_lambda1();
    Ok(TestResult::decide(
        TestKind::LargestEigenvalue,
        stat,
        tw1.quantile(1.0 - alpha),
        tw1.upper_p_value(stat),
        alpha,
        md.n,
        Vec::new(),
    ))
}

pub fn entrywise_max_test(w: &SymmetricMatrix, alpha: f64) -> Result<TestResult> {
    entrywise_max_test_with(
        w,
        alpha,
        GumbelCoherence::default(),
        CoherenceMatrix::default(),
    )
}

/// The coherence test on the columns of `w`, viewed as `n` observations
/// of an `n`-vector.
pub fn entrywise_max_test_with(
    w: &SymmetricMatrix,
    alpha: f64,
    gumbel: GumbelCoherence,
    matrix: CoherenceMatrix,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let n = w.n();
    if n < 3 {
        return Err(Error::InvalidDimension(
            n,
            "entrywise maximum test needs n >= 3",
        ));
    }
    let t = max_off_diagonal_coherence(w, matrix)?;
    let nf = n as f64;
    let stat = nf * t * t - 4.0 * nf.ln() + nf.ln().ln();
    let notes = match matrix {
        CoherenceMatrix::Covariance => Vec::new(),
        CoherenceMatrix::Correlation => vec!["coherence of the column correlations".into()],
    };
    Ok(TestResult::decide(
        TestKind::EntrywiseMaximum,
        stat,
        gumbel_coherence_quantile(gumbel, 1.0 - alpha)?,
        gumbel.upper_p_value(stat),
        alpha,
        n,
        notes,
    ))
}

/// `max_{i≠j} |r_ij|` over the sample correlation (or covariance) of the
/// columns of `w`.
pub fn max_off_diagonal_coherence(w: &SymmetricMatrix, matrix: CoherenceMatrix) -> Result<f64> {
    let n = w.n();
    let mut x = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        // Column j equals row j by symmetry.
        let col = w.row(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        // A constant column has no defined correlation, and the coherence
        // law does not apply to its covariances either.
        if ss.is_nan() || ss <= 0.0 {
            return Err(Error::UndefinedCorrelation { column: j });
        }
        let scale = match matrix {
            CoherenceMatrix::Correlation => ss.sqrt().recip(),
            CoherenceMatrix::Covariance => ((n - 1) as f64).sqrt().recip(),
        };
        for i in 0..n {
            x[(i, j)] = (col[i] - mean) * scale;
        }
    }
    let gram = x.transpose() * &x;
    let mut t = 0.0_f64;
    for j in 0..n {
        for i in j + 1..n {
            t = t.max(gram[(i, j)].abs());
        }
    }
    if !t.is_finite() {
        return Err(Error::Numerical("coherence is not finite".into()));
    }
    Ok(match matrix {
        CoherenceMatrix::Correlation => t.min(1.0),
        CoherenceMatrix::Covariance => t,
    })
}

/// Reference laws shared by many test calls. Convolution laws are built on
/// first use for each dimension, each from its own derived seed, so the
/// law for a given `n` does not depend on call order.
#[derive(Debug)]
pub struct ReferenceLaws {
    pub tw1: Tw1Law,
    pub options: TestOptions,
    conv_samples: usize,
    conv_seed: Seed,
    cache: Mutex<HashMap<usize, Arc<ConvolutionF>>>,
}

impl ReferenceLaws {
    pub fn new(tw1: Tw1Law, conv_samples: usize, conv_seed: Seed) -> Self {
        ReferenceLaws {
            tw1,
            options: TestOptions::default(),
            conv_samples,
            conv_seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Bundled Tracy–Widom table and the default convolution size.
    pub fn with_defaults(conv_seed: Seed) -> Self {
        Self::new(Tw1Law::bundled(), CONVOLUTION_SAMPLES, conv_seed)
    }

    pub fn with_options(mut self, options: TestOptions) -> Self {
        self.options = options;
        self
    }

    pub fn convolution_samples(&self) -> usize {
        self.conv_samples
    }

    pub fn convolution(&self, n: usize) -> Result<Arc<ConvolutionF>> {
        if let Some(f) = self.cache.lock().expect("law cache poisoned").get(&n) {
            return Ok(Arc::clone(f));
        }
        let f = Arc::new(convolution_f(
            n,
            self.conv_samples,
            &self.tw1,
            self.conv_seed.derive(n as u64),
        )?);
        let mut cache = self.cache.lock().expect("law cache poisoned");
        Ok(Arc::clone(cache.entry(n).or_insert(f)))
    }

    /// Runs `kind` on `w`, whose decomposition is `md`.
    pub fn run(
        &self,
        kind: TestKind,
        w: &SymmetricMatrix,
        md: &ModularityDecomposition,
        alpha: f64,
    ) -> Result<TestResult> {
        match kind {
            TestKind::ModularityI => modularity_test_i_from(md, alpha, self.options.critical_rule),
            TestKind::ModularityII => modularity_test_ii_from(md, alpha, &*self.convolution(md.n)?),
            TestKind::LargestEigenvalue => largest_eigenvalue_test_from(md, alpha, &self.tw1),
            TestKind::EntrywiseMaximum => entrywise_max_test_with(
                w,
                alpha,
                self.options.gumbel,
                self.options.coherence_matrix,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub alpha: f64,
    pub max_depth: usize,
    /// Nodes smaller than this are never tested or split.
    pub min_size: usize,
    pub test: TestKind,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            alpha: 0.05,
            max_depth: 3,
            min_size: 4,
            test: TestKind::ModularityI,
        }
    }
}

/// One node of a recursive split. `members` index the root network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityTree {
    pub members: Vec<usize>,
    pub depth: usize,
    /// Sign of the parent's top eigenvector that put members here.
    pub side: Option<i8>,
    pub test: Option<TestResult>,
    /// Members whose eigenvector entry was exactly zero; they stay here.
    pub unassigned: Vec<usize>,
    pub children: Vec<CommunityTree>,
    pub notes: Vec<String>,
}

impl CommunityTree {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.height())
            .max()
            .unwrap_or(0)
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> Vec<&CommunityTree> {
        if self.is_leaf() {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.leaves()).collect()
    }
}

/// Tests `w`; when the test rejects, splits the members by the sign of the
/// top eigenvector and repeats on each side. Child networks are the
/// corresponding principal submatrices of `w`, re-standardized.
pub fn recursive_split(
    w: &SymmetricMatrix,
    config: &SplitConfig,
    laws: &ReferenceLaws,
) -> Result<CommunityTree> {
    check_alpha(config.alpha)?;
    if config.min_size < 4 {
        return Err(Error::InvalidParameter(format!(
            "min_size must be at least 4, got {}",
            config.min_size
        )));
    }
    if w.n() < config.min_size {
        return Err(Error::InvalidDimension(
            w.n(),
            "recursive split needs n >= 4",
        ));
    }
    let members: Vec<usize> = (0..w.n()).collect();
    split_node(w, w.clone(), members, 0, None, config, laws)
}

fn split_node(
    root: &SymmetricMatrix,
    local: SymmetricMatrix,
    members: Vec<usize>,
    depth: usize,
    side: Option<i8>,
    config: &SplitConfig,
    laws: &ReferenceLaws,
) -> Result<CommunityTree> {
    let md = modularity(&local)?;
    let test = laws.run(config.test, &local, &md, config.alpha)?;
    let mut node = CommunityTree {
        members,
        depth,
        side,
        test: None,
        unassigned: Vec::new(),
        children: Vec::new(),
        notes: Vec::new(),
    };
    let reject = test.reject;
    node.test = Some(test);
    if !reject {
        return Ok(node);
    }
    if depth >= config.max_depth {
        node.notes
            .push(format!("maximum depth {} reached", config.max_depth));
        return Ok(node);
    }

    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (k, &s) in md.sign_vector.iter().enumerate() {
        match s {
            1 => plus.push(node.members[k]),
            -1 => minus.push(node.members[k]),
            _ => node.unassigned.push(node.members[k]),
        }
    }
    for (sign, part) in [(1_i8, plus), (-1_i8, minus)] {
        let child = if part.len() < config.min_size {
            small_leaf(part, depth + 1, sign, config.min_size)
        } else {
            let sub = root.submatrix(&part)?;
            match standardize_off_diagonal(&sub) {
                Ok(std) => split_node(root, std, part, depth + 1, Some(sign), config, laws)?,
                Err(e) => {
                    let mut leaf = small_leaf(part, depth + 1, sign, config.min_size);
                    leaf.notes = vec![format!("not tested: {e}")];
                    leaf
                }
            }
        };
        node.children.push(child);
    }
    Ok(node)
}

fn small_leaf(members: Vec<usize>, depth: usize, side: i8, min_size: usize) -> CommunityTree {
    let notes = vec![format!(
        "{} members, fewer than {min_size}; not tested",
        members.len()
    )];
    CommunityTree {
        members,
        depth,
        side: Some(side),
        test: None,
        unassigned: Vec::new(),
        children: Vec::new(),
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{make_balanced_spike, sample_goe, sample_spiked, SpikedSpec};

    fn laws() -> ReferenceLaws {
        ReferenceLaws::new(Tw1Law::bundled(), 20_000, Seed::new(1))
    }

    #[test]
    fn test_i_critical_value() {
        let md = modularity(&sample_goe(10, Seed::new(3)).unwrap()).unwrap();
        let r = modularity_test_i_from(&md, 0.05, CriticalRule::LimitingLaw).unwrap();
        assert!((r.critical_value - 0.8455).abs() < 5e-4);
        let r = modularity_test_i_from(&md, 0.05, CriticalRule::StandardNormal).unwrap();
        assert!((r.critical_value - 1.644854).abs() < 1e-6);
    }

    #[test]
    fn alpha_is_validated() {
        let w = sample_goe(6, Seed::new(1)).unwrap();
        assert!(modularity_test_i(&w, 0.0).is_err());
        assert!(modularity_test_i(&w, 1.0).is_err());
        assert!(entrywise_max_test(&w, f64::NAN).is_err());
    }

    #[test]
    fn test_ii_rejects_wrong_dimension() {
        let l = laws();
        let f = l.convolution(50).unwrap();
        let w = sample_goe(40, Seed::new(2)).unwrap();
        assert!(matches!(
            modularity_test_ii(&w, 0.05, &f),
            Err(Error::DimensionMismatch {
                law: 50,
                network: 40
            })
        ));
    }

    #[test]
    fn huge_diagonal_forces_lambda1_rejection() {
        let w = SymmetricMatrix::from_lower_fn(
            20,
            |i, j| if i == j { 1e6 * (1 + i) as f64 } else { 0.0 },
        )
        .unwrap();
        let r = largest_eigenvalue_test(&w, 0.05, &Tw1Law::bundled()).unwrap();
        assert!(r.reject);
        assert!(!r.p_value.is_exact());
    }

    #[test]
    fn constant_column_is_undefined() {
        let w = SymmetricMatrix::from_lower_fn(5, |i, j| {
            if i == 2 || j == 2 {
                0.0
            } else {
                (i * j) as f64 + 1.0
            }
        })
        .unwrap();
        for m in [CoherenceMatrix::Correlation, CoherenceMatrix::Covariance] {
            let r = entrywise_max_test_with(&w, 0.05, GumbelCoherence::default(), m);
            assert!(matches!(r, Err(Error::UndefinedCorrelation { column: 2 })));
        }
    }

    #[test]
    fn decisions_match_critical_values() {
        let l = laws();
        for rep in 0..20 {
            let w = sample_goe(30, Seed::new(9).replicate(rep)).unwrap();
            let md = modularity(&w).unwrap();
            for kind in TestKind::ALL {
                let r = l.run(kind, &w, &md, 0.3).unwrap();
                assert_eq!(r.reject, r.statistic > r.critical_value, "{kind}");
                if let PValue::Exact(p) = r.p_value {
                    if r.reject {
                        assert!(p <= 0.3 + 1e-12, "{kind}: p = {p}");
                    } else {
                        assert!(p >= 0.3 - 1e-12, "{kind}: p = {p}");
                    }
                }
            }
        }
    }

    #[test]
    fn scale_equivariance() {
        let w = sample_goe(25, Seed::new(4)).unwrap();
        let c = 3.7;
        let a = modularity(&w).unwrap();
        let b = modularity(&w.scaled(c).unwrap()).unwrap();
        assert!((b.q - c * a.q).abs() < 1e-9 * a.q.abs().max(1.0));
        assert!((b.lambda1 - c * a.lambda1).abs() < 1e-9 * a.lambda1.abs());
    }

    #[test]
    fn planted_halves_recovered() {
        let n = 200;
        let base = make_balanced_spike(n, Seed::new(21)).unwrap();
        let spec =
            SpikedSpec::new(4.0 * (n as f64).sqrt(), base.u.clone(), base.d.clone()).unwrap();
        let w = sample_spiked(&spec, Seed::new(22)).unwrap();
        let config = SplitConfig {
            max_depth: 1,
            ..SplitConfig::default()
        };
        let tree = recursive_split(&w, &config, &laws()).unwrap();
        assert!(tree.test.as_ref().unwrap().reject);
        assert_eq!(tree.children.len(), 2);
        let truth = |i: usize| base.u[i] > 0.0;
        let agree: usize = tree
            .children
            .iter()
            .map(|c| {
                let pos = c.members.iter().filter(|&&i| truth(i)).count();
                pos.max(c.members.len() - pos)
            })
            .sum();
        assert!(agree as f64 >= 0.95 * n as f64, "agreement {agree}/{n}");
        assert!(tree.height() <= 1);
    }

    #[test]
    fn small_children_become_leaves() {
        // Two blocks of 3: each side is too small to test further.
        let w = SymmetricMatrix::from_lower_fn(6, |i, j| {
            if i == j {
                0.0
            } else if (i < 3) == (j < 3) {
                5.0 + 0.01 * (i + j) as f64
            } else {
                -5.0
            }
        })
        .unwrap();
        let tree = recursive_split(&w, &SplitConfig::default(), &laws()).unwrap();
        assert!(tree.test.as_ref().unwrap().reject);
        assert_eq!(tree.children.len(), 2);
        for c in &tree.children {
            assert!(c.is_leaf() && c.test.is_none());
            assert_eq!(c.members.len(), 3);
        }
    }
}
