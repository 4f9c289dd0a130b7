//! Eigendecomposition, sign-vector modularity and its spectral split.
//!
//! For a symmetric `W` with eigenpairs `(λ_i, u_i)` sorted so that
//! `λ_1 ≥ … ≥ λ_n`, the modularity is the quadratic form `Q = sᵀ W s` with
//! `s = sgn(u_1)`. Expanding `s` in the eigenbasis gives
//! `Q = λ_1‖u_1‖_1² + Σ_{i≥2} λ_i (sᵀu_i)² = B_n + A_n`.

use std::f64::consts::PI;

use faer::Side;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Relative gap below which `λ_1` is treated as repeated.
pub const DEGENERATE_GAP: f64 = 1e-9;

/// Eigenvalues in non-increasing order with orthonormal eigenvectors.
///
/// Each eigenvector is oriented so its largest-magnitude entry is positive
/// (the first such entry on ties).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    n: usize,
    eigenvalues: Vec<f64>,
    // Column-major: eigenvector i occupies [i*n, (i+1)*n).
    vectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn top_eigenvector(&self) -> &[f64] {
        self.eigenvector(0)
    }
}

/// Full symmetric eigendecomposition.
pub fn eigendecompose_symmetric(w: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    if let Some(k) = w.as_slice().iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite entry at ({}, {})",
            k / w.n(),
            k % w.n()
        )));
    }
    let n = w.n();
    let evd = w.to_mat().self_adjoint_eigen(Side::Lower).map_err(|e| {
        Error::Numerical(format!(
            "symmetric eigensolver did not converge ({e:?}); n = {n}, ‖W‖_F = {}",
            w.frobenius_norm()
        ))
    })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    // faer sorts ascending.
    for k in (0..n).rev() {
        eigenvalues.push(s[k]);
        let start = vectors.len();
        vectors.extend((0..n).map(|i| u[(i, k)]));
        orient(&mut vectors[start..]);
    }
    Ok(SpectralDecomposition {
        n,
        eigenvalues,
        vectors,
    })
}

fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Coordinate-wise sign with exact zeros mapped to 0.
pub fn sign_vector(u: &[f64]) -> Vec<i8> {
    u.iter()
        .map(|&x| {
            if x > 0.0 {
                1
            } else if x < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// `Q` together with its spectral split `Q = A_n + B_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularityDecomposition {
    pub n: usize,
    pub q: f64,
    pub a_n: f64,
    pub b_n: f64,
    pub lambda1: f64,
    /// `‖u_1‖_1²`.
    pub l1norm_sq: f64,
    pub sign_vector: Vec<i8>,
    pub warnings: Vec<String>,
}

impl ModularityDecomposition {
    /// Builds the decomposition from an already computed spectrum of `w`.
    pub fn from_spectrum(w: &SymmetricMatrix, spec: &SpectralDecomposition) -> Result<Self> {
        let n = w.n();
        if n < 2 {
            return Err(Error::InvalidDimension(n, "modularity needs n >= 2"));
        }
        if spec.n() != n {
            return Err(Error::InvalidInput(format!(
                "spectrum has dimension {} but matrix has {n}",
                spec.n()
            )));
        }
        let u1 = spec.top_eigenvector();
        let signs = sign_vector(u1);
        let s: Vec<f64> = signs.iter().map(|&x| f64::from(x)).collect();

        let q = w.quadratic_form(&s);
        let lambda1 = spec.lambda1();
        let l1 = u1.iter().map(|x| x.abs()).sum::<f64>();
        let l1norm_sq = l1 * l1;
        let b_n = lambda1 * l1norm_sq;
        let a_n = (1..n)
            .map(|i| {
                let proj: f64 = spec.eigenvector(i).iter().zip(&s).map(|(a, b)| a * b).sum();
                spec.eigenvalues()[i] * proj * proj
            })
            .sum();

        let mut warnings = Vec::new();
        let gap = lambda1 - spec.eigenvalues()[1];
        if gap <= DEGENERATE_GAP * w.frobenius_norm() {
            warnings.push(format!(
                "top eigenvalue is (numerically) repeated: λ1 - λ2 = {gap:e}; \
                 sgn(u1) depends on the solver's choice of eigenvector"
            ));
        }
        Ok(ModularityDecomposition {
            n,
            q,
            a_n,
            b_n,
            lambda1,
            l1norm_sq,
            sign_vector: signs,
            warnings,
        })
    }

    pub fn normalized(&self, variant: NormalizedVariant) -> NormalizedStatistic {
        normalized_modularity(self, variant)
    }

    /// `n^{1/6}(λ_1 - 2√n)`.
    pub fn scaled_lambda1(&self) -> f64 {
        let n = self.n as f64;
        n.powf(1.0 / 6.0) * (self.lambda1 - 2.0 * n.sqrt())
    }

    pub fn is_degenerate(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Sign-vector modularity of `w` with its `A_n + B_n` split.
pub fn modularity(w: &SymmetricMatrix) -> Result<ModularityDecomposition> {
    if w.n() < 2 {
        return Err(Error::InvalidDimension(w.n(), "modularity needs n >= 2"));
    }
    let spec = eigendecompose_symmetric(w)?;
    ModularityDecomposition::from_spectrum(w, &spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizedVariant {
    /// `(Q - 2√n‖u_1‖_1²)/n`, the statistic with a known null limit.
    CenteredL1,
    /// `(Q - n^{3/2}·4/π)/n`.
    CenteredFourOverPi,
    /// `Q/n`.
    RawOverN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedStatistic {
    pub variant: NormalizedVariant,
    pub value: f64,
}

pub fn normalized_modularity(
    md: &ModularityDecomposition,
    variant: NormalizedVariant,
) -> NormalizedStatistic {
    let n = md.n as f64;
    let value = match variant {
        NormalizedVariant::CenteredL1 => (md.q - 2.0 * n.sqrt() * md.l1norm_sq) / n,
        NormalizedVariant::CenteredFourOverPi => (md.q - n.powf(1.5) * 4.0 / PI) / n,
        NormalizedVariant::RawOverN => md.q / n,
    };
    NormalizedStatistic { variant, value }
}

/// Semicircle CDF on `[-2, 2]`.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
}

/// Classical eigenvalue locations `γ_1 < … < γ_n` of the semicircle law,
/// `F_sc(γ_j) = j/n`.
pub fn classical_locations(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|j| {
            if j == n {
                return 2.0;
            }
            if 2 * j == n {
                return 0.0;
            }
            let target = j as f64 / n as f64;
            let (mut lo, mut hi) = (-2.0_f64, 2.0_f64);
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break mid;
                }
                if semicircle_cdf(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_goe;
    use crate::seed::Seed;

    fn mat(n: usize, v: &[f64]) -> SymmetricMatrix {
        SymmetricMatrix::from_row_major(n, v.to_vec()).unwrap()
    }

    #[test]
    fn diagonal_matrix() {
        let d = eigendecompose_symmetric(&mat(2, &[1.0, 0.0, 0.0, 3.0])).unwrap();
        assert_eq!(d.eigenvalues(), &[3.0, 1.0]);
        assert_eq!(d.eigenvector(0), &[0.0, 1.0]);
        assert_eq!(d.eigenvector(1), &[1.0, 0.0]);
    }

    #[test]
    fn swap_matrix() {
        let d = eigendecompose_symmetric(&mat(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((d.eigenvalues()[0] - 1.0).abs() < 1e-14);
        assert!((d.eigenvalues()[1] + 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for x in d.eigenvector(0) {
            assert!((x - h).abs() < 1e-14);
        }
    }

    #[test]
    fn sign_vector_examples() {
        assert_eq!(sign_vector(&[0.3, -0.2, 0.0]), vec![1, -1, 0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(sign_vector(&[h, h]), vec![1, 1]);
        assert_eq!(sign_vector(&[-0.0]), vec![0]);
    }

    #[test]
    fn modularity_hand_examples() {
        let md = modularity(&mat(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(md.sign_vector, vec![1, 1]);
        assert!((md.q - 2.0).abs() < 1e-14);
        assert!((md.b_n - 2.0).abs() < 1e-12);
        assert!(md.a_n.abs() < 1e-12);

        let md = modularity(&mat(2, &[3.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(md.sign_vector, vec![1, 0]);
        assert_eq!(md.q, 3.0);
        assert_eq!(md.b_n, 3.0);
        assert_eq!(md.a_n, 0.0);
        assert!(md.warnings.is_empty());
    }

    #[test]
    fn degenerate_top_eigenvalue_warns() {
        let md = modularity(&mat(2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(md.is_degenerate());
    }

    #[test]
    fn modularity_needs_two_nodes() {
        let w = SymmetricMatrix::zeros(1).unwrap();
        assert!(matches!(modularity(&w), Err(Error::InvalidDimension(1, _))));
    }

    #[test]
    fn normalized_examples() {
        let md = modularity(&mat(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let v1 = md.normalized(NormalizedVariant::CenteredL1).value;
        assert!((v1 - (1.0 - 2.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!((md.normalized(NormalizedVariant::RawOverN).value - 1.0).abs() < 1e-14);

        let fake = ModularityDecomposition {
            n: 100,
            q: 100.0 * (4.0 / PI) * 10.0,
            a_n: 0.0,
            b_n: 0.0,
            lambda1: 0.0,
            l1norm_sq: 1.0,
            sign_vector: vec![],
            warnings: vec![],
        };
        let v2 = fake.normalized(NormalizedVariant::CenteredFourOverPi).value;
        assert!(v2.abs() < 1e-12, "{v2}");
    }

    #[test]
    fn identity_on_seeded_goe() {
        let w = sample_goe(8, Seed::new(42)).unwrap();
        let spec = eigendecompose_symmetric(&w).unwrap();
        let md = ModularityDecomposition::from_spectrum(&w, &spec).unwrap();
        let s: Vec<f64> = md.sign_vector.iter().map(|&x| f64::from(x)).collect();
        let spectral_q: f64 = (0..8)
            .map(|i| {
                let p: f64 = spec.eigenvector(i).iter().zip(&s).map(|(a, b)| a * b).sum();
                spec.eigenvalues()[i] * p * p
            })
            .sum();
        assert!((md.q - spectral_q).abs() < 1e-8);
        assert!((md.q - md.a_n - md.b_n).abs() < 1e-8 * 8.0);
    }

    #[test]
    fn semicircle_cdf_endpoints() {
        assert_eq!(semicircle_cdf(-2.0), 0.0);
        assert_eq!(semicircle_cdf(2.0), 1.0);
        assert!((semicircle_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn classical_location_examples() {
        let g = classical_locations(4);
        assert_eq!(g[1], 0.0);
        assert_eq!(g[3], 2.0);
        assert!((semicircle_cdf(g[0]) - 0.25).abs() <= 1e-12);
        let g = classical_locations(7);
        for (j, x) in g.iter().enumerate() {
            assert!((semicircle_cdf(*x) - (j + 1) as f64 / 7.0).abs() <= 1e-12);
        }
    }
}
