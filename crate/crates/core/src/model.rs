//! Dimensionless model construction: chain potential, coupling-shifted
//! potential, center-of-mass sector and the full-system Hamiltonian matrix.
//!
//! Units: the defect mass M is the unit mass, the shifted trap frequency
//! Omega_gamma = sqrt(Omega^2 + gamma/M) the unit frequency and
//! M Omega_gamma^2 the unit energy. Phase-space vectors are ordered
//! canonically as (X1, P1, X2, P2, x_1..x_N, p_1..p_N).

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Dimensionless parameters of two defects coupled to a pinned harmonic chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    n_ions: usize,
    mass_ratio: f64,
    kappa: f64,
    gamma: f64,
    omega_b: f64,
}

impl ModelParams {
    /// Validate and build; the edge pinning frequency defaults to
    /// sqrt(kappa / mass_ratio), which makes the decoupled chain spectrum
    /// exactly sinusoidal.
    pub fn new(n_ions: usize, mass_ratio: f64, kappa: f64, gamma: f64) -> Result<Self> {
        let omega_b = (kappa / mass_ratio).sqrt();
        Self::with_omega_b(n_ions, mass_ratio, kappa, gamma, omega_b)
    }

    /// Same as [`ModelParams::new`] with an explicit edge pinning frequency.
    pub fn with_omega_b(
        n_ions: usize,
        mass_ratio: f64,
        kappa: f64,
        gamma: f64,
        omega_b: f64,
    ) -> Result<Self> {
        let positive = |name: &'static str, v: f64| -> Result<()> {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be strictly positive and finite, got {v}"),
                });
            }
            Ok(())
        };
        if n_ions < 2 {
            return Err(Error::InvalidParameter {
                name: "n_ions",
                reason: format!("chain needs at least 2 ions, got {n_ions}"),
            });
        }
        positive("mass_ratio", mass_ratio)?;
        positive("kappa", kappa)?;
        positive("omega_b", omega_b)?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("rescaled coupling must lie in [0, 1), got {gamma}"),
            });
        }
        Ok(Self {
            n_ions,
            mass_ratio,
            kappa,
            gamma,
            omega_b,
        })
    }

    pub fn n_ions(&self) -> usize {
        self.n_ions
    }

    pub fn mass_ratio(&self) -> f64 {
        self.mass_ratio
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn omega_b(&self) -> f64 {
        self.omega_b
    }

    /// Copy with a different chain length (used for finite-size studies).
    pub fn with_n_ions(&self, n_ions: usize) -> Result<Self> {
        Self::with_omega_b(n_ions, self.mass_ratio, self.kappa, self.gamma, self.omega_b)
    }

    /// High-frequency cutoff of the phonon band, sqrt(4 kappa / m).
    pub fn omega_cut(&self) -> f64 {
        (4.0 * self.kappa / self.mass_ratio).sqrt()
    }

    /// Bare trap frequency in shifted units, Omega / Omega_gamma = sqrt(1 - gamma).
    pub fn omega_bare(&self) -> f64 {
        (1.0 - self.gamma).sqrt()
    }

    /// Phase-space dimension of the full system, 2 N + 4.
    pub fn full_dim(&self) -> usize {
        2 * self.n_ions + 4
    }
}

/// Dimensionful inputs for [`rescale_parameters`]. Units are arbitrary but
/// must be mutually consistent.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalParams {
    /// Defect mass M.
    pub defect_mass: f64,
    /// Chain ion mass m.
    pub ion_mass: f64,
    /// Bare defect trap frequency Omega.
    pub trap_freq: f64,
    /// Nearest-neighbour coupling kappa.
    pub kappa: f64,
    /// Defect-chain coupling gamma >= 0.
    pub gamma: f64,
    /// Edge pinning frequency omega_B.
    pub omega_b: f64,
}

/// Convert dimensionful parameters to the dimensionless set, returning the
/// shifted trap frequency Omega_gamma = sqrt(Omega^2 + gamma/M) that defines
/// the unit of frequency. The rescaled coupling gamma/(gamma + M Omega^2)
/// always lands in [0, 1).
pub fn rescale_parameters(n_ions: usize, physical: &PhysicalParams) -> Result<(ModelParams, f64)> {
    for (name, v) in [
        ("defect_mass", physical.defect_mass),
        ("ion_mass", physical.ion_mass),
        ("trap_freq", physical.trap_freq),
        ("kappa", physical.kappa),
        ("omega_b", physical.omega_b),
    ] {
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be strictly positive and finite, got {v}"),
            });
        }
    }
    if physical.gamma < 0.0 || !physical.gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be nonnegative, got {}", physical.gamma),
        });
    }
    let m_big = physical.defect_mass;
    let omega_gamma = (physical.trap_freq.powi(2) + physical.gamma / m_big).sqrt();
    let energy_scale = m_big * omega_gamma * omega_gamma;
    let params = ModelParams::with_omega_b(
        n_ions,
        physical.ion_mass / m_big,
        physical.kappa / energy_scale,
        physical.gamma / energy_scale,
        physical.omega_b / omega_gamma,
    )?;
    Ok((params, omega_gamma))
}

/// Potential matrix of the decoupled pinned chain: tridiagonal with
/// m omega_B^2 + kappa at the pinned corners, 2 kappa on the interior
/// diagonal and -kappa off the diagonal.
pub fn build_chain_potential(params: &ModelParams) -> SymmetricMatrix {
    let n = params.n_ions;
    let corner = params.mass_ratio * params.omega_b * params.omega_b + params.kappa;
    let kappa = params.kappa;
    SymmetricMatrix::from_fn_upper(n, |i, j| {
        if i == j {
            if i == 0 || i == n - 1 {
                corner
            } else {
                2.0 * kappa
            }
        } else if j == i + 1 {
            -kappa
        } else {
            0.0
        }
    })
}

/// Chain potential including the coupling-induced shift: the rank-one
/// update 2 gamma at entry (0, 0).
pub fn build_shifted_potential(params: &ModelParams) -> SymmetricMatrix {
    let base = build_chain_potential(params);
    let shift = 2.0 * params.gamma;
    SymmetricMatrix::from_fn_upper(params.n_ions, |i, j| {
        let v = base.get(i, j);
        if i == 0 && j == 0 {
            v + shift
        } else {
            v
        }
    })
}

/// Center-of-mass sector matrices: the COM defect coordinate plus the chain,
/// dimension N + 1 each.
#[derive(Debug, Clone)]
pub struct ComSector {
    /// Kinetic matrix diag(1, 1/m, ..., 1/m).
    pub t_plus: SymmetricMatrix,
    /// Potential matrix with the sqrt(2) gamma coupling in the first chain slot.
    pub v_plus: SymmetricMatrix,
    /// Stiffness T^(1/2) V T^(1/2) whose eigenfrequencies govern COM dynamics.
    pub w_plus: SymmetricMatrix,
}

/// Build the COM-sector kinetic, potential and stiffness matrices.
pub fn build_com_sector(params: &ModelParams) -> ComSector {
    let n = params.n_ions;
    let v_gamma = build_shifted_potential(params);
    let coupling = std::f64::consts::SQRT_2 * params.gamma;
    let inv_m = 1.0 / params.mass_ratio;

    let t_plus =
        SymmetricMatrix::from_fn_upper(n + 1, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (i, j) if i == j => inv_m,
            _ => 0.0,
        });
    let v_plus = SymmetricMatrix::from_fn_upper(n + 1, |i, j| match (i, j) {
        (0, 0) => 1.0,
        (0, 1) => -coupling,
        (0, _) => 0.0,
        (i, j) => v_gamma.get(i - 1, j - 1),
    });
    // T is diagonal, so the congruence is a row/column scaling
    let sqrt_m = params.mass_ratio.sqrt();
    let scale = move |i: usize| if i == 0 { 1.0 } else { 1.0 / sqrt_m };
    let w_plus =
        SymmetricMatrix::from_fn_upper(n + 1, |i, j| scale(i) * v_plus.get(i, j) * scale(j));

    ComSector {
        t_plus,
        v_plus,
        w_plus,
    }
}

/// The full system as a quadratic Hamiltonian: H = 1/2 zeta^T h zeta with
/// phase-space ordering (X1, P1, X2, P2, x_1..x_N, p_1..p_N), together with
/// the symplectic form of the same ordering.
#[derive(Debug, Clone)]
pub struct FullSystem {
    pub params: ModelParams,
    pub h_matrix: SymmetricMatrix,
    pub j_matrix: Mat<f64>,
}

impl FullSystem {
    pub fn dim(&self) -> usize {
        self.h_matrix.dim()
    }
}

/// Symplectic form for the canonical ordering: a 4x4 interleaved block for
/// the defect pair followed by the stacked (x, p) chain block.
pub fn symplectic_form(n_ions: usize) -> Mat<f64> {
    let dim = 2 * n_ions + 4;
    let mut j = Mat::<f64>::zeros(dim, dim);
    j[(0, 1)] = 1.0;
    j[(1, 0)] = -1.0;
    j[(2, 3)] = 1.0;
    j[(3, 2)] = -1.0;
    for i in 0..n_ions {
        j[(4 + i, 4 + n_ions + i)] = 1.0;
        j[(4 + n_ions + i, 4 + i)] = -1.0;
    }
    j
}

/// 4x4 symplectic form of the defect pair, ordering (X1, P1, X2, P2).
pub fn symplectic_form_pair() -> Mat<f64> {
    let mut j = Mat::<f64>::zeros(4, 4);
    j[(0, 1)] = 1.0;
    j[(1, 0)] = -1.0;
    j[(2, 3)] = 1.0;
    j[(3, 2)] = -1.0;
    j
}

/// Assemble the Hamiltonian matrix of defects plus chain.
pub fn build_full_system(params: &ModelParams) -> FullSystem {
    let n = params.n_ions;
    let dim = 2 * n + 4;
    let v_gamma = build_shifted_potential(params);
    let gamma = params.gamma;
    let inv_m = 1.0 / params.mass_ratio;

    let h_matrix = SymmetricMatrix::from_fn_upper(dim, |i, j| {
        if i == j {
            if i < 4 {
                1.0 // defect quadratures at unit frequency
            } else if i < 4 + n {
                v_gamma.get(i - 4, i - 4)
            } else {
                inv_m
            }
        } else if i < 4 && j == 4 {
            // X1 and X2 couple to the first chain position
            if i == 0 || i == 2 {
                -gamma
            } else {
                0.0
            }
        } else if i >= 4 && j < 4 + n {
            v_gamma.get(i - 4, j - 4)
        } else {
            0.0
        }
    });

    FullSystem {
        params: *params,
        h_matrix,
        j_matrix: symplectic_form(n),
    }
}
