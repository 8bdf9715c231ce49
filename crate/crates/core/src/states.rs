//! Initial Gaussian states: squeezed defects, the thermal chain, and the
//! squeezing-parameter maps between the bare-frequency and shifted-frequency
//! descriptions.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};
use crate::linalg::{coth, SymmetricMatrix};
use crate::model;

const PI: f64 = std::f64::consts::PI;

/// Single-mode squeezing magnitude and angle relative to the shifted trap
/// frequency.
///
/// Negative magnitudes are accepted and normalized through the identity
/// (-r, phi) == (r, phi + pi); the stored magnitude is always >= 0 and the
/// angle lies in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParams {
    r: f64,
    phi: f64,
}

impl SqueezeParams {
    pub fn new(r: f64, phi: f64) -> Self {
        let (r, phi) = if r < 0.0 { (-r, phi + PI) } else { (r, phi) };
        Self {
            r,
            phi: normalize_angle(phi),
        }
    }

    /// The vacuum (no squeezing).
    pub fn vacuum() -> Self {
        Self { r: 0.0, phi: 0.0 }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// Wrap an angle into (-pi, pi].
fn normalize_angle(phi: f64) -> f64 {
    let mut a = phi % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    // map a bitwise -0.0 onto +0.0 so branch tests on phi == 0.0 are exact
    if a == 0.0 {
        a = 0.0;
    }
    a
}

/// Real symmetric matrix of symmetrized second moments of an even number of
/// phase-space quadratures.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    mat: Mat<f64>,
}

impl CovarianceMatrix {
    /// Wrap a matrix, mirroring the upper triangle so the symmetry invariant
    /// holds exactly. The dimension must be even.
    pub fn from_mat(mat: Mat<f64>) -> Result<Self> {
        let n = mat.nrows();
        if n != mat.ncols() || !n.is_multiple_of(2) || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "covariance matrix must be square with even dimension, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let sym = SymmetricMatrix::from_mat_upper(&mat);
        Ok(Self {
            mat: sym.as_mat().clone(),
        })
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

    /// Smallest eigenvalue of the Hermitian matrix Sigma + (i/2) J. The state
    /// satisfies the uncertainty relation iff this is >= 0 up to roundoff.
    pub fn physicality_margin(&self, j_matrix: &Mat<f64>) -> Result<f64> {
        let n = self.dim();
        if j_matrix.nrows() != n || j_matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "symplectic form is {}x{}, covariance is {n}x{n}",
                j_matrix.nrows(),
                j_matrix.ncols()
            )));
        }
        let h = Mat::<c64>::from_fn(n, n, |i, k| {
            c64::new(self.mat[(i, k)], 0.5 * j_matrix[(i, k)])
        });
        let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigensolver {
            context: "physicality check",
            dim: n,
            max_abs: crate::linalg::max_abs(&self.mat),
        })?;
        let s = evd.S();
        let mut min = f64::INFINITY;
        for i in 0..n {
            min = min.min(s[i].re);
        }
        Ok(min)
    }

    /// Convenience check of the uncertainty-relation invariant at the
    /// standard tolerance.
    pub fn is_physical(&self, j_matrix: &Mat<f64>) -> Result<bool> {
        Ok(self.physicality_margin(j_matrix)? >= -1e-10)
    }

    /// Symplectic spectrum: the positive eigenvalues of i S J S with
    /// S = Sigma^(1/2), in descending order. Invariant under symplectic
    /// congruence of the state.
    pub fn symplectic_eigenvalues(&self, j_matrix: &Mat<f64>) -> Result<Vec<f64>> {
        let n = self.dim();
        let sym = SymmetricMatrix::from_mat_upper(&self.mat);
        let eig = sym.eigen("covariance square root")?;
        if eig.min_value() < -1e-10 {
            return Err(Error::NotPositiveDefinite {
                context: "covariance matrix",
                min_eigenvalue: eig.min_value(),
            });
        }
        let sqrt = eig.apply(|l| l.max(0.0).sqrt());
        let k = &sqrt * &(j_matrix * &sqrt);
        let herm = Mat::<c64>::from_fn(n, n, |i, j| c64::new(0.0, k[(i, j)]));
        let evd = herm.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigensolver {
            context: "symplectic spectrum",
            dim: n,
            max_abs: crate::linalg::max_abs(&k),
        })?;
        let s = evd.S();
        let mut pos: Vec<f64> = (0..n).map(|i| s[i].re).filter(|&v| v > 0.0).collect();
        pos.sort_by(|a, b| b.total_cmp(a));
        pos.truncate(n / 2);
        Ok(pos)
    }
}

/// Thermal covariance blocks of the decoupled chain at temperature `t_bar`:
///
///   sigma_xx = 1/2 (m V)^(-1/2) coth(beta/2 (V/m)^(1/2))
///   sigma_pp = 1/2 (m V)^(+1/2) coth(beta/2 (V/m)^(1/2))
///
/// evaluated through the eigendecomposition of V. The zero-temperature limit
/// takes coth -> 1 analytically. The position-momentum block vanishes.
pub fn thermal_chain_covariance(
    v: &SymmetricMatrix,
    mass_ratio: f64,
    t_bar: f64,
) -> Result<(Mat<f64>, Mat<f64>)> {
    if t_bar < 0.0 || !t_bar.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_bar",
            reason: format!("temperature must be nonnegative, got {t_bar}"),
        });
    }
    let eig = v.eigen("chain potential")?;
    if eig.min_value() <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            context: "chain potential",
            min_eigenvalue: eig.min_value(),
        });
    }
    let occupation = move |lambda: f64| {
        let omega = (lambda / mass_ratio).sqrt();
        if t_bar == 0.0 {
            1.0
        } else {
            coth(0.5 * omega / t_bar)
        }
    };
    let sigma_xx = eig.apply(|l| {
        let omega = (l / mass_ratio).sqrt();
        0.5 * occupation(l) / (mass_ratio * omega)
    });
    let sigma_pp = eig.apply(|l| {
        let omega = (l / mass_ratio).sqrt();
        0.5 * occupation(l) * mass_ratio * omega
    });
    Ok((sigma_xx, sigma_pp))
}

/// 2x2 covariance of a pure squeezed state, 1/2 O^T(phi) S(e^(2r)) O(phi):
///
///   sigma_11 = 1/2 (e^(-2r) cos^2(phi/2) + e^(2r) sin^2(phi/2))
///   sigma_22 = 1/2 (e^(-2r) sin^2(phi/2) + e^(2r) cos^2(phi/2))
///   sigma_12 = -1/2 sinh(2r) sin(phi)
///
/// with determinant exactly 1/4.
pub fn squeezed_defect_covariance(s: &SqueezeParams) -> CovarianceMatrix {
    let (r, phi) = (s.r(), s.phi());
    let c2 = (0.5 * phi).cos().powi(2);
    let s2 = (0.5 * phi).sin().powi(2);
    let em = (-2.0 * r).exp();
    let ep = (2.0 * r).exp();
    let mut m = Mat::<f64>::zeros(2, 2);
    m[(0, 0)] = 0.5 * (em * c2 + ep * s2);
    m[(1, 1)] = 0.5 * (em * s2 + ep * c2);
    let off = -0.5 * (2.0 * r).sinh() * phi.sin();
    m[(0, 1)] = off;
    m[(1, 0)] = off;
    CovarianceMatrix::from_mat(m).expect("2x2 is valid")
}

fn check_omega_ratio(omega_ratio: f64) -> Result<()> {
    if omega_ratio <= 0.0 || !omega_ratio.is_finite() {
        return Err(Error::InvalidParameter {
            name: "omega_ratio",
            reason: format!("frequency ratio must be positive, got {omega_ratio}"),
        });
    }
    Ok(())
}

/// Squeezing parameters relative to the shifted frequency for a state given
/// by bare-frequency parameters. `omega_ratio` is Omega/Omega_gamma.
///
/// The map splits into the axis branches phi = 0 and phi = pi and an open
/// domain handled by the arcosh/arctan closed form; all three agree with the
/// similarity transform of the covariance matrix itself, which is what the
/// tests check against.
pub fn shifted_from_bare(s: &SqueezeParams, omega_ratio: f64) -> Result<SqueezeParams> {
    check_omega_ratio(omega_ratio)?;
    let half_log = 0.5 * omega_ratio.ln();
    let (r, phi) = (s.r(), s.phi());
    if phi == 0.0 {
        let val = r + half_log;
        return Ok(axis_params(val, false));
    }
    if phi == PI {
        let val = r - half_log;
        return Ok(axis_params(val, true));
    }
    let (rp, rm) = aux_r(r, phi, omega_ratio);
    let root = (rp * rp - 1.0).max(0.0).sqrt();
    let shift = (2.0 * r).sinh() * phi.sin();
    let num = root - rm - shift;
    let den = root + rm - shift;
    let r_out = 0.5 * acosh_clamped(rp);
    let phi_out = -2.0 * (num / den).atan();
    Ok(SqueezeParams::new(r_out, phi_out))
}

/// Inverse of [`shifted_from_bare`]: bare-frequency squeezing parameters of a
/// state given in the shifted-frequency description.
pub fn bare_from_shifted(s: &SqueezeParams, omega_ratio: f64) -> Result<SqueezeParams> {
    check_omega_ratio(omega_ratio)?;
    let half_log = 0.5 * omega_ratio.ln();
    let (r, phi) = (s.r(), s.phi());
    if phi == 0.0 {
        let val = r - half_log;
        return Ok(axis_params(val, false));
    }
    if phi == PI {
        let val = r + half_log;
        return Ok(axis_params(val, true));
    }
    let (rp, rm) = aux_r(r, phi, 1.0 / omega_ratio);
    let root = (rp * rp - 1.0).max(0.0).sqrt();
    let shift = (2.0 * r).sinh() * phi.sin();
    let num = root - rm + shift;
    let den = root + rm + shift;
    let r_out = 0.5 * acosh_clamped(rp);
    let phi_out = 2.0 * (num / den).atan();
    Ok(SqueezeParams::new(r_out, phi_out))
}

/// Axis-branch result: a signed magnitude folds onto the opposite axis.
/// `pi_axis` selects whether positive magnitudes sit at phi = pi or phi = 0.
fn axis_params(val: f64, pi_axis: bool) -> SqueezeParams {
    let keep = val >= 0.0;
    let on_pi = keep == pi_axis;
    SqueezeParams::new(val.abs(), if on_pi { PI } else { 0.0 })
}

/// Auxiliary quantities R+- of the open-domain branch; `w` is 1/Omega-ratio
/// for the bare->shifted direction and the ratio itself for the inverse.
fn aux_r(r: f64, phi: f64, w: f64) -> (f64, f64) {
    let ch = (2.0 * r).cosh();
    let sh = (2.0 * r).sinh();
    let rp = 0.5 * (w + 1.0 / w) * ch + 0.5 * (w - 1.0 / w) * sh * phi.cos();
    let rm = 0.5 * (w - 1.0 / w) * ch + 0.5 * (w + 1.0 / w) * sh * phi.cos();
    (rp, rm)
}

fn acosh_clamped(x: f64) -> f64 {
    x.max(1.0).acosh()
}

/// The four blocks of the product initial state: two defect covariances and
/// the thermal chain blocks.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub sigma1: CovarianceMatrix,
    pub sigma2: CovarianceMatrix,
    pub chain_xx: Mat<f64>,
    pub chain_pp: Mat<f64>,
}

impl InitialState {
    /// Build the standard product state: defects in squeezed states given in
    /// the shifted-frequency description, chain thermal at `t_bar`.
    pub fn product(
        params: &model::ModelParams,
        t_bar: f64,
        squeeze1: &SqueezeParams,
        squeeze2: &SqueezeParams,
    ) -> Result<Self> {
        let v = model::build_chain_potential(params);
        let (chain_xx, chain_pp) = thermal_chain_covariance(&v, params.mass_ratio(), t_bar)?;
        Ok(Self {
            sigma1: squeezed_defect_covariance(squeeze1),
            sigma2: squeezed_defect_covariance(squeeze2),
            chain_xx,
            chain_pp,
        })
    }

    pub fn n_ions(&self) -> usize {
        self.chain_xx.nrows()
    }

    /// Assemble the full block-diagonal covariance in the canonical ordering.
    pub fn full_covariance(&self) -> Result<CovarianceMatrix> {
        assemble_initial_covariance(&self.sigma1, &self.sigma2, &self.chain_xx, &self.chain_pp)
    }
}

/// Place the defect and chain blocks into the (2N+4)-dimensional covariance
/// matrix of the canonical ordering. Cross blocks are exactly zero: the
/// initial state carries no defect-defect or defect-chain correlations.
pub fn assemble_initial_covariance(
    sigma1: &CovarianceMatrix,
    sigma2: &CovarianceMatrix,
    chain_xx: &Mat<f64>,
    chain_pp: &Mat<f64>,
) -> Result<CovarianceMatrix> {
    if sigma1.dim() != 2 || sigma2.dim() != 2 {
        return Err(Error::DimensionMismatch(
            "defect covariance blocks must be 2x2".into(),
        ));
    }
    let n = chain_xx.nrows();
    if chain_xx.ncols() != n || chain_pp.nrows() != n || chain_pp.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "chain blocks must be square and equal-sized, got {}x{} and {}x{}",
            chain_xx.nrows(),
            chain_xx.ncols(),
            chain_pp.nrows(),
            chain_pp.ncols()
        )));
    }
    let dim = 2 * n + 4;
    let mut m = Mat::<f64>::zeros(dim, dim);
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = sigma1.get(i, j);
            m[(2 + i, 2 + j)] = sigma2.get(i, j);
        }
    }
    for i in 0..n {
        for j in 0..n {
            m[(4 + i, 4 + j)] = chain_xx[(i, j)];
            m[(4 + n + i, 4 + n + j)] = chain_pp[(i, j)];
        }
    }
    CovarianceMatrix::from_mat(m)
}
