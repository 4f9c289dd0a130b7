//! Seeded samplers for the null and alternative random-matrix models.
//!
//! All samplers are pure functions of their parameters and a [`Seed`]; the
//! same inputs give bit-identical matrices on any thread. Wigner-type
//! samplers fill the lower triangle row by row (`i >= j`) and mirror it.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::seed::Seed;

/// Parameters of the rank-one spiked model `β·u uᵀ + diag(d) + Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedSpec {
    pub beta: f64,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
}

impl SpikedSpec {
    pub fn new(beta: f64, u: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let spec = SpikedSpec { beta, u, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    fn validate(&self) -> Result<()> {
        if self.u.is_empty() {
            return Err(Error::InvalidParameter("spike direction is empty".into()));
        }
        if self.d.len() != self.u.len() {
            return Err(Error::InvalidParameter(format!(
                "diagonal has length {} but u has length {}",
                self.d.len(),
                self.u.len()
            )));
        }
        let norm = self.u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "spike direction must have unit norm, got {norm}"
            )));
        }
        if !self.beta.is_finite() || self.d.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite spike parameter".into()));
        }
        Ok(())
    }

    /// The deterministic part `β·u uᵀ + diag(d)`.
    pub fn signal(&self) -> Result<SymmetricMatrix> {
        self.validate()?;
        SymmetricMatrix::from_lower_fn(self.n(), |i, j| {
            let s = self.beta * self.u[i] * self.u[j];
            if i == j {
                s + self.d[i]
            } else {
                s
            }
        })
    }
}

/// A concrete random-matrix model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ensemble {
    Goe,
    WignerExp,
    WignerExpSymmetrized,
    ErdosRenyi {
        p: f64,
        #[serde(default)]
        diagonal: ErDiagonal,
    },
    CorrelationNull {
        samples: usize,
    },
    Spiked(SpikedSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub ensemble: Ensemble,
    pub n: usize,
}

impl EnsembleSpec {
    pub fn new(ensemble: Ensemble, n: usize) -> Result<Self> {
        let spec = EnsembleSpec { ensemble, n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidDimension(0, "dimension must be at least 1"));
        }
        match &self.ensemble {
            Ensemble::Goe | Ensemble::WignerExp | Ensemble::WignerExpSymmetrized => Ok(()),
            Ensemble::ErdosRenyi { p, .. } => check_probability(*p),
            Ensemble::CorrelationNull { samples } => check_correlation_params(self.n, *samples),
            Ensemble::Spiked(s) if s.n() != self.n => Err(Error::InvalidParameter(format!(
                "spike has dimension {} but n = {}",
                s.n(),
                self.n
            ))),
            Ensemble::Spiked(s) => s.validate(),
        }
    }

    pub fn sample(&self, seed: Seed) -> Result<SymmetricMatrix> {
        match &self.ensemble {
            Ensemble::Goe => sample_goe(self.n, seed),
            Ensemble::WignerExp => sample_wigner_exp(self.n, seed),
            Ensemble::WignerExpSymmetrized => sample_wigner_exp_symmetrized(self.n, seed),
            Ensemble::ErdosRenyi { p, diagonal } => {
                sample_er_adjacency_with(self.n, *p, *diagonal, seed)
            }
            Ensemble::CorrelationNull { samples } => {
                sample_correlation_null(self.n, *samples, seed)
            }
            Ensemble::Spiked(s) => {
                if s.n() != self.n {
                    return Err(Error::InvalidParameter(format!(
                        "spike has dimension {} but n = {}",
                        s.n(),
                        self.n
                    )));
                }
                sample_spiked(s, seed)
            }
        }
    }
}

/// Gaussian Orthogonal Ensemble: `N(0,1)` off the diagonal, `N(0,2)` on it.
pub fn sample_goe(n: usize, seed: Seed) -> Result<SymmetricMatrix> {
    check_dim(n)?;
    let mut rng = seed.rng();
    let sqrt2 = std::f64::consts::SQRT_2;
    SymmetricMatrix::from_lower_fn(n, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        if i == j {
            sqrt2 * z
        } else {
            z
        }
    })
}

/// Wigner matrix with centred Exp(1) entries, `E - 1` off the diagonal and
/// `√2·(E - 1)` on it, so the first two moments match the GOE.
pub fn sample_wigner_exp(n: usize, seed: Seed) -> Result<SymmetricMatrix> {
    check_dim(n)?;
    let mut rng = seed.rng();
    let sqrt2 = std::f64::consts::SQRT_2;
    SymmetricMatrix::from_lower_fn(n, |i, j| {
        let e: f64 = rng.sample(Exp1);
        if i == j {
            sqrt2 * (e - 1.0)
        } else {
            e - 1.0
        }
    })
}

/// `(X + Xᵀ)/√2` for a square `X` of independent `E - 1`, `E ~ Exp(1)`.
/// Same first two moments as [`sample_wigner_exp`], but each off-diagonal
/// entry is a sum of two draws and so has skewness `√2` instead of 2.
/// `X` is drawn row by row.
pub fn sample_wigner_exp_symmetrized(n: usize, seed: Seed) -> Result<SymmetricMatrix> {
    check_dim(n)?;
    let mut rng = seed.rng();
    let x: Vec<f64> = (0..n * n)
        .map(|_| rng.sample::<f64, _>(Exp1) - 1.0)
        .collect();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    SymmetricMatrix::from_lower_fn(n, |i, j| scale * (x[i * n + j] + x[j * n + i]))
}

/// Diagonal of the standardized Erdős–Rényi matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErDiagonal {
    /// A standardized Bernoulli draw scaled by `√2`, matching the GOE
    /// diagonal variance.
    #[default]
    Scaled,
    /// No self-loops.
    Zero,
}

/// Standardized Erdős–Rényi adjacency: `(B - p)/√(p(1-p))` off the
/// diagonal with `B ~ Bernoulli(p)`; the diagonal uses the same draw scaled
/// by `√2`.
pub fn sample_er_adjacency(n: usize, p: f64, seed: Seed) -> Result<SymmetricMatrix> {
    sample_er_adjacency_with(n, p, ErDiagonal::Scaled, seed)
}

/// [`sample_er_adjacency`] with a choice of diagonal. Diagonal draws are
/// made either way, so both variants share their off-diagonal entries.
pub fn sample_er_adjacency_with(
    n: usize,
    p: f64,
    diagonal: ErDiagonal,
    seed: Seed,
) -> Result<SymmetricMatrix> {
    check_dim(n)?;
    check_probability(p)?;
    let mut rng = seed.rng();
    let scale = (p * (1.0 - p)).sqrt();
    let (hi, lo) = ((1.0 - p) / scale, -p / scale);
    let diag_scale = match diagonal {
        ErDiagonal::Scaled => std::f64::consts::SQRT_2,
        ErDiagonal::Zero => 0.0,
    };
    SymmetricMatrix::from_lower_fn(n, |i, j| {
        let x = if rng.random::<f64>() < p { hi } else { lo };
        if i == j {
            diag_scale * x
        } else {
            x
        }
    })
}

/// The sparse edge probability `p = n^{-1/4}`.
pub fn sparse_er_probability(n: usize) -> f64 {
    (n as f64).powf(-0.25)
}

/// `N = round(n^{5/2})`, halves to even.
pub fn correlation_sample_count(n: usize) -> usize {
    (n as f64).powf(2.5).round_ties_even() as usize
}

/// `√N·(R - I)` where `R` is the sample correlation matrix of `N` iid
/// `N(0, I_n)` observations.
///
/// The centred scatter matrix of `N` Gaussian observations is
/// `Wishart_n(N - 1, I)`; it is drawn directly through the Bartlett
/// factorisation, so the cost is `O(n³)` whatever `N` is. See
/// [`sample_correlation_null_direct`] for the observation-level route.
pub fn sample_correlation_null(n: usize, samples: usize, seed: Seed) -> Result<SymmetricMatrix> {
    check_correlation_params(n, samples)?;
    if samples <= n {
        // Bartlett needs df - i > 0 for every i < n.
        return sample_correlation_null_direct(n, samples, seed);
    }
    let mut rng = seed.rng();
    let df = (samples - 1) as f64;
    // Bartlett: S = L Lᵀ, L lower triangular, L_ii² ~ χ²(df - i), L_ij ~ N(0,1).
    let mut l = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            l[(i, j)] = rng.sample(StandardNormal);
        }
        let chi = ChiSquared::new(df - i as f64)
            .map_err(|e| Error::InvalidParameter(format!("chi-squared: {e}")))?;
        l[(i, i)] = chi.sample(&mut rng).sqrt();
    }
    let mut scatter = Mat::<f64>::zeros(n, n);
    matmul(
        scatter.as_mut(),
        Accum::Replace,
        l.as_ref(),
        l.transpose(),
        1.0,
        Par::Seq,
    );
    scatter_to_null(&scatter, samples)
}

/// Same law as [`sample_correlation_null`], computed from `N` explicit
/// observations. Cost grows with `N·n²`; used for small `N` and to check the
/// Wishart route.
pub fn sample_correlation_null_direct(
    n: usize,
    samples: usize,
    seed: Seed,
) -> Result<SymmetricMatrix> {
    check_correlation_params(n, samples)?;
    let mut rng = seed.rng();
    let mut x = Mat::<f64>::from_fn(samples, n, |_, _| rng.sample(StandardNormal));
    for j in 0..n {
        let mean = (0..samples).map(|i| x[(i, j)]).sum::<f64>() / samples as f64;
        for i in 0..samples {
            x[(i, j)] -= mean;
        }
    }
    let mut scatter = Mat::<f64>::zeros(n, n);
    matmul(
        scatter.as_mut(),
        Accum::Replace,
        x.transpose(),
        x.as_ref(),
        1.0,
        Par::Seq,
    );
    scatter_to_null(&scatter, samples)
}

fn scatter_to_null(scatter: &Mat<f64>, samples: usize) -> Result<SymmetricMatrix> {
    let n = scatter.nrows();
    let root_n = (samples as f64).sqrt();
    let inv_sd: Vec<f64> = (0..n).map(|i| 1.0 / scatter[(i, i)].sqrt()).collect();
    SymmetricMatrix::from_lower_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            root_n * scatter[(i, j)] * inv_sd[i] * inv_sd[j]
        }
    })
}

/// `β·u uᵀ + diag(d) + Z` with `Z = sample_goe(n, seed)`.
pub fn sample_spiked(spec: &SpikedSpec, seed: Seed) -> Result<SymmetricMatrix> {
    let signal = spec.signal()?;
    let noise = sample_goe(spec.n(), seed)?;
    signal.add(&noise)
}

/// Two equal communities: `u` is `+n^{-1/2}` on the first half and
/// `-n^{-1/2}` on the second, `β = √n`, and `d_i ~ Uniform[-√n, √n]`.
pub fn make_balanced_spike(n: usize, seed: Seed) -> Result<SpikedSpec> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "balanced spike needs an even positive dimension, got {n}"
        )));
    }
    let root_n = (n as f64).sqrt();
    let c = 1.0 / root_n;
    let u = (0..n).map(|i| if i < n / 2 { c } else { -c }).collect();
    let mut rng = seed.rng();
    let unif = Uniform::new_inclusive(-root_n, root_n)
        .map_err(|e| Error::InvalidParameter(format!("uniform: {e}")))?;
    let d = (0..n).map(|_| unif.sample(&mut rng)).collect();
    Ok(SpikedSpec { beta: root_n, u, d })
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidDimension(0, "dimension must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "edge probability must lie in (0, 1), got {p}"
        )))
    }
}

fn check_correlation_params(n: usize, samples: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidDimension(n, "correlation null needs n >= 2"));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "correlation null needs at least 2 observations, got {samples}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: impl Iterator<Item = f64>) -> (f64, f64) {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var)
    }

    fn off_diagonal(w: &SymmetricMatrix) -> Vec<f64> {
        let n = w.n();
        (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| w.get(i, j))
            .collect()
    }

    #[test]
    fn goe_1x1_has_variance_two() {
        let seed = Seed::new(11);
        let xs = (0..100_000).map(|r| sample_goe(1, seed.replicate(r)).unwrap().get(0, 0));
        let (m, var) = moments(xs);
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((var - 2.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn goe_is_deterministic() {
        let a = sample_goe(2, Seed::new(5)).unwrap();
        let b = sample_goe(2, Seed::new(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_goe(2, Seed::new(5).replicate(1)).unwrap());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            sample_goe(0, Seed::new(1)),
            Err(Error::InvalidDimension(..))
        ));
        assert!(sample_wigner_exp(0, Seed::new(1)).is_err());
    }

    #[test]
    fn er_zero_diagonal_shares_off_diagonal() {
        let a = sample_er_adjacency(40, 0.2, Seed::new(5)).unwrap();
        let b = sample_er_adjacency_with(40, 0.2, ErDiagonal::Zero, Seed::new(5)).unwrap();
        for i in 0..40 {
            assert_eq!(b.get(i, i), 0.0);
            for j in 0..i {
                assert_eq!(a.get(i, j), b.get(i, j));
            }
        }
    }

    #[test]
    fn symmetrized_exp_moments() {
        let w = sample_wigner_exp_symmetrized(450, Seed::new(3)).unwrap();
        let (m, var) = moments(off_diagonal(&w).into_iter());
        assert!(m.abs() < 0.01, "mean {m}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
        let diag = (0..40u64).flat_map(|r| {
            let w = sample_wigner_exp_symmetrized(300, Seed::new(4).replicate(r)).unwrap();
            (0..w.n()).map(move |i| w.get(i, i))
        });
        let (_, dvar) = moments(diag);
        assert!((dvar - 2.0).abs() < 0.1, "diag var {dvar}");
    }

    #[test]
    fn wigner_exp_moments() {
        let w = sample_wigner_exp(450, Seed::new(3)).unwrap();
        let (m, var) = moments(off_diagonal(&w).into_iter());
        assert!(m.abs() < 0.01, "mean {m}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
        let diag = (0..40u64).flat_map(|r| {
            let w = sample_wigner_exp(2500, Seed::new(4).replicate(r)).unwrap();
            (0..w.n()).map(move |i| w.get(i, i))
        });
        let (_, dvar) = moments(diag);
        assert!((dvar - 2.0).abs() < 0.05, "diag var {dvar}");
    }

    #[test]
    fn er_half_is_two_point() {
        let w = sample_er_adjacency(30, 0.5, Seed::new(9)).unwrap();
        for x in off_diagonal(&w) {
            assert!(x == 1.0 || x == -1.0, "{x}");
        }
    }

    #[test]
    fn er_moments_at_p_tenth() {
        let w = sample_er_adjacency(450, 0.1, Seed::new(2)).unwrap();
        let (m, var) = moments(off_diagonal(&w).into_iter());
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn er_rejects_bad_probability() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                sample_er_adjacency(5, p, Seed::new(1)),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn sparse_probability_and_sample_count() {
        assert!((sparse_er_probability(5000) - 0.118_920_7).abs() < 1e-6);
        assert_eq!(correlation_sample_count(20), 1789);
        assert_eq!(correlation_sample_count(100), 100_000);
    }

    #[test]
    fn correlation_null_zero_diagonal() {
        let w = sample_correlation_null(12, 200, Seed::new(1)).unwrap();
        for i in 0..12 {
            assert_eq!(w.get(i, i), 0.0);
        }
        let w = sample_correlation_null_direct(5, 40, Seed::new(1)).unwrap();
        for i in 0..5 {
            assert_eq!(w.get(i, i), 0.0);
        }
        assert!(sample_correlation_null(3, 1, Seed::new(1)).is_err());
        assert!(sample_correlation_null(1, 10, Seed::new(1)).is_err());
    }

    #[test]
    fn correlation_null_entry_is_standard_normal() {
        // √N·ρ̂ → N(0,1) under independence.
        let seed = Seed::new(21);
        let xs = (0..10_000).map(|r| {
            sample_correlation_null(2, 1_000_000, seed.replicate(r))
                .unwrap()
                .get(0, 1)
        });
        let (m, var) = moments(xs);
        assert!(m.abs() < 0.03, "mean {m}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn spiked_reduces_to_goe() {
        let n = 6;
        let u = vec![1.0 / (n as f64).sqrt(); n];
        let spec = SpikedSpec::new(0.0, u, vec![0.0; n]).unwrap();
        let seed = Seed::new(77).replicate(4);
        assert_eq!(
            sample_spiked(&spec, seed).unwrap(),
            sample_goe(n, seed).unwrap()
        );
    }

    #[test]
    fn spiked_signal_is_rank_one() {
        let spec = SpikedSpec::new(2.0, vec![0.5; 4], vec![0.0; 4]).unwrap();
        let s = spec.signal().unwrap();
        assert!(s.as_slice().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn spiked_rejects_bad_parameters() {
        assert!(SpikedSpec::new(1.0, vec![0.5; 4], vec![0.0; 3]).is_err());
        assert!(SpikedSpec::new(1.0, vec![0.6; 4], vec![0.0; 4]).is_err());
        let spec = SpikedSpec::new(1.0, vec![0.5; 4], vec![0.0; 4]).unwrap();
        let es = EnsembleSpec {
            ensemble: Ensemble::Spiked(spec),
            n: 5,
        };
        assert!(es.sample(Seed::new(1)).is_err());
    }

    #[test]
    fn balanced_spike_shape() {
        let s = make_balanced_spike(4, Seed::new(1)).unwrap();
        assert_eq!(s.u, vec![0.5, 0.5, -0.5, -0.5]);
        assert_eq!(s.beta, 2.0);
        let s = make_balanced_spike(100, Seed::new(1)).unwrap();
        assert_eq!(s.beta, 10.0);
        assert!((s.u.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(s.d.iter().all(|d| d.abs() <= 10.0));
        assert!(make_balanced_spike(5, Seed::new(1)).is_err());
    }
}
