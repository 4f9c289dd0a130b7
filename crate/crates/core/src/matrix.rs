use faer::Mat;

use crate::error::{Error, Result};

/// Dense real symmetric `n × n` matrix of edge weights.
///
/// Storage is row-major. Every constructor mirrors or checks the upper
/// triangle so `get(i, j) == get(j, i)` holds bit-for-bit, and all entries
/// are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(
                n,
                "matrix dimension must be at least 1",
            ));
        }
        Ok(SymmetricMatrix {
            n,
            data: vec![0.0; n * n],
        })
    }

    /// Builds the matrix from its lower triangle: `f(i, j)` is called once
    /// for every `i >= j`, in row-major order, and mirrored.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m.check_finite()?;
        Ok(m)
    }

    /// Takes a row-major square buffer that must already be exactly
    /// symmetric.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "expected {n}×{n} = {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j].to_bits() != data[j * n + i].to_bits() {
                    return Err(Error::InvalidInput(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        let m = SymmetricMatrix { n, data };
        m.check_finite()?;
        Ok(m)
    }

    /// Symmetrizes an arbitrary square matrix as `(A + Aᵀ)/2` and returns
    /// the largest absolute asymmetry `|a_ij - a_ji|` that was removed.
    pub fn symmetrize(n: usize, data: &[f64]) -> Result<(Self, f64)> {
        if n == 0 || data.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "expected {n}×{n} = {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let mut asym = 0.0_f64;
        let m = Self::from_lower_fn(n, |i, j| {
            let (a, b) = (data[i * n + j], data[j * n + i]);
            asym = asym.max((a - b).abs());
            if i == j {
                a
            } else {
                0.5 * (a + b)
            }
        })?;
        Ok((m, asym))
    }

    pub fn from_mat(mat: &Mat<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}×{}, not square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Self::from_lower_fn(mat.nrows(), |i, j| mat[(i, j)])
    }

    pub fn to_mat(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.data[i * self.n + j])
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `xᵀ W x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let r: f64 = self.row(i).iter().zip(x).map(|(w, xj)| w * xj).sum();
                x[i] * r
            })
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let m = SymmetricMatrix {
            n: self.n,
            data: self.data.iter().map(|x| x * c).collect(),
        };
        m.check_finite()?;
        Ok(m)
    }

    /// Principal submatrix on `members` (in the given order).
    pub fn submatrix(&self, members: &[usize]) -> Result<Self> {
        Self::from_lower_fn(members.len(), |i, j| self.get(members[i], members[j]))
    }

    /// Adds `other` entrywise.
    pub fn add(&self, other: &SymmetricMatrix) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::InvalidInput(format!(
                "cannot add {}×{} and {}×{} matrices",
                self.n, self.n, other.n, other.n
            )));
        }
        let m = SymmetricMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        };
        m.check_finite()?;
        Ok(m)
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(k) = self.data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at ({}, {})",
                k / self.n,
                k % self.n
            )));
        }
        Ok(())
    }
}
