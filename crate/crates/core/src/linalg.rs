//! Dense symmetric linear algebra helpers on top of `faer`.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Dense real symmetric matrix.
///
/// Entries are mirrored at construction time, so `get(i, j) == get(j, i)`
/// holds exactly (bitwise), not merely up to roundoff.
#[derive(Debug, Clone)]
pub struct SymmetricMatrix {
    mat: Mat<f64>,
}

impl SymmetricMatrix {
    /// Build from a generator called once per `i <= j`; the lower triangle
    /// is mirrored from the upper one.
    pub fn from_fn_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut mat = Mat::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        Self { mat }
    }

    /// Wrap an existing matrix, mirroring the upper triangle.
    pub fn from_mat_upper(mat: &Mat<f64>) -> Self {
        assert_eq!(mat.nrows(), mat.ncols());
        Self::from_fn_upper(mat.nrows(), |i, j| mat[(i, j)])
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.mat
    }

    /// Largest absolute entry (used in error diagnostics).
    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.mat[(i, j)].abs());
            }
        }
        m
    }

    /// Full eigendecomposition with eigenvalues in ascending order.
    pub fn eigen(&self, context: &'static str) -> Result<SymmetricEigen> {
        let n = self.dim();
        let evd = self
            .mat
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::Eigensolver {
                context,
                dim: n,
                max_abs: self.max_abs(),
            })?;
        let s = evd.S();
        let mut values: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let mut vectors = evd.U().to_owned();
        if !values.windows(2).all(|w| w[0] <= w[1]) {
            // faer returns ascending order; re-sort defensively if it ever does not
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let sorted_vals: Vec<f64> = idx.iter().map(|&k| values[k]).collect();
            let mut sorted_vecs = Mat::<f64>::zeros(n, n);
            for (col, &k) in idx.iter().enumerate() {
                for row in 0..n {
                    sorted_vecs[(row, col)] = vectors[(row, k)];
                }
            }
            values = sorted_vals;
            vectors = sorted_vecs;
        }
        Ok(SymmetricEigen { values, vectors })
    }
}

/// Eigendecomposition `M = U diag(values) U^T` of a symmetric matrix,
/// eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl SymmetricEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Apply a scalar function to the spectrum: `U diag(f(values)) U^T`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Mat<f64> {
        let n = self.dim();
        let weights: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let mut scaled = Mat::<f64>::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                scaled[(i, k)] = self.vectors[(i, k)] * weights[k];
            }
        }
        &scaled * self.vectors.transpose()
    }

    /// Smallest eigenvalue.
    pub fn min_value(&self) -> f64 {
        self.values[0]
    }
}

/// coth(x) for x > 0, saturating to 1 for large arguments.
pub fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// 2x2 determinant from entries (a b; c d).
pub fn det2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    a * d - b * c
}

/// 4x4 determinant by Laplace expansion over 2x2 complementary minors.
pub fn det4(m: &Mat<f64>) -> f64 {
    assert_eq!((m.nrows(), m.ncols()), (4, 4));
    let minor = |r0: usize, r1: usize, c0: usize, c1: usize| {
        m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)]
    };
    minor(0, 1, 0, 1) * minor(2, 3, 2, 3) - minor(0, 1, 0, 2) * minor(2, 3, 1, 3)
        + minor(0, 1, 0, 3) * minor(2, 3, 1, 2)
        + minor(0, 1, 1, 2) * minor(2, 3, 0, 3)
        - minor(0, 1, 1, 3) * minor(2, 3, 0, 2)
        + minor(0, 1, 2, 3) * minor(2, 3, 0, 1)
}

/// Largest absolute entry of a dense matrix.
pub fn max_abs(m: &Mat<f64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc = acc.max(m[(i, j)].abs());
        }
    }
    acc
}

/// Largest absolute entrywise difference between two matrices.
pub fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc = acc.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    acc
}
