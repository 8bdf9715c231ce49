//! Normal-mode characterization of the bath seen by the COM defect:
//! eigenfrequencies and couplings, the analytic dispersion of the decoupled
//! chain, the spectral density, the memory-friction kernel, the isolated
//! frequency search and the finite-size revival time.

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::model::{build_com_sector, build_shifted_potential, ModelParams};

/// Eigenfrequencies and per-mode couplings of the shifted chain potential.
#[derive(Debug, Clone)]
pub struct ModeSpectrum {
    /// Frequencies in strictly ascending order.
    pub frequencies: Vec<f64>,
    /// Couplings of the COM coordinate to each normal mode.
    pub couplings: Vec<f64>,
    pub mass_ratio: f64,
    /// Band edge sqrt(4 kappa / m) of the decoupled chain.
    pub cutoff: f64,
}

/// Diagonalize the shifted chain potential and transform the coupling vector
/// into the normal-mode basis: O^T V O = m diag(omega_j^2), couplings = O^T g.
/// `cutoff` is the nominal band edge carried along for downstream consumers.
///
/// Eigenvector signs are fixed by making the first component of significant
/// size positive, so the couplings are reproducible; they enter all physical
/// formulas squared.
pub fn normal_modes(
    v_gamma: &SymmetricMatrix,
    mass_ratio: f64,
    coupling: &[f64],
    cutoff: f64,
) -> Result<ModeSpectrum> {
    let n = v_gamma.dim();
    if coupling.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "coupling vector has length {}, potential is {n}x{n}",
            coupling.len()
        )));
    }
    let eig = v_gamma.eigen("shifted chain potential")?;
    if eig.min_value() < 0.0 && eig.min_value() < -1e-12 * eig.values[n - 1].abs() {
        return Err(Error::NotPositiveDefinite {
            context: "shifted chain potential",
            min_eigenvalue: eig.min_value(),
        });
    }
    let mut frequencies = Vec::with_capacity(n);
    let mut couplings = Vec::with_capacity(n);
    for k in 0..n {
        frequencies.push((eig.values[k].max(0.0) / mass_ratio).sqrt());
        let mut sign = 1.0;
        for i in 0..n {
            let c = eig.vectors[(i, k)];
            if c.abs() > 1e-12 {
                sign = c.signum();
                break;
            }
        }
        let mut proj = 0.0;
        for (i, &g) in coupling.iter().enumerate() {
            proj += eig.vectors[(i, k)] * g;
        }
        couplings.push(sign * proj);
    }
    Ok(ModeSpectrum {
        frequencies,
        couplings,
        mass_ratio,
        cutoff,
    })
}

/// Spectrum of the bath for a given parameter set, with the coupling vector
/// (sqrt(2) gamma, 0, ..., 0) of the COM coordinate.
pub fn bath_spectrum(params: &ModelParams) -> Result<ModeSpectrum> {
    let v_gamma = build_shifted_potential(params);
    let mut coupling = vec![0.0; params.n_ions()];
    coupling[0] = std::f64::consts::SQRT_2 * params.gamma();
    normal_modes(
        &v_gamma,
        params.mass_ratio(),
        &coupling,
        params.omega_cut(),
    )
}

/// Analytic dispersion of the decoupled chain at the default edge pinning:
/// omega_j = omega_cut sin(j pi / (2 (N + 1))), j = 1..N.
pub fn analytic_dispersion(j: usize, n: usize, kappa: f64, mass_ratio: f64) -> Result<f64> {
    if j < 1 || j > n {
        return Err(Error::InvalidParameter {
            name: "j",
            reason: format!("mode index must satisfy 1 <= j <= {n}, got {j}"),
        });
    }
    let omega_cut = (4.0 * kappa / mass_ratio).sqrt();
    Ok(omega_cut * (0.5 * std::f64::consts::PI * j as f64 / (n as f64 + 1.0)).sin())
}

/// How the delta comb of the finite-chain spectral density is smoothed into
/// a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Broadening {
    /// Divide each mode weight by the local mode spacing; converges to the
    /// thermodynamic-limit density.
    ModeSpacing,
    /// Replace each delta peak by a normalized Gaussian of the given width.
    Gaussian { width: f64 },
}

/// Spectral density J(omega) = (pi/2) sum_j g_j^2 / (m omega_j)
/// delta(omega - omega_j), sampled on a grid with the delta comb smoothed
/// according to `broadening`. The integral over omega of the sampled curve
/// reproduces the total weight.
pub fn spectral_density(
    spectrum: &ModeSpectrum,
    omega_grid: &[f64],
    broadening: Broadening,
) -> Result<Vec<f64>> {
    if omega_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "omega_grid",
            reason: "grid must not be empty".into(),
        });
    }
    let weights = mode_weights(spectrum);
    let freqs = &spectrum.frequencies;
    let n = freqs.len();
    match broadening {
        Broadening::ModeSpacing => {
            // piecewise-constant histogram on bins centered at the modes
            let mut edges = Vec::with_capacity(n + 1);
            edges.push(freqs[0] - 0.5 * (freqs[1] - freqs[0]).max(0.0));
            for j in 0..n - 1 {
                edges.push(0.5 * (freqs[j] + freqs[j + 1]));
            }
            edges.push(freqs[n - 1] + 0.5 * (freqs[n - 1] - freqs[n - 2]).max(0.0));
            Ok(omega_grid
                .iter()
                .map(|&w| {
                    if w < edges[0] || w >= edges[n] {
                        return 0.0;
                    }
                    let j = match edges.binary_search_by(|e| e.total_cmp(&w)) {
                        Ok(k) => k,
                        Err(k) => k - 1,
                    };
                    let j = j.min(n - 1);
                    weights[j] / (edges[j + 1] - edges[j])
                })
                .collect())
        }
        Broadening::Gaussian { width } => {
            if width <= 0.0 || width.is_nan() {
                return Err(Error::InvalidParameter {
                    name: "broadening",
                    reason: format!("gaussian width must be positive, got {width}"),
                });
            }
            let norm = 1.0 / (width * (2.0 * std::f64::consts::PI).sqrt());
            Ok(omega_grid
                .iter()
                .map(|&w| {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let z = (w - freqs[j]) / width;
                        if z.abs() < 40.0 {
                            acc += weights[j] * norm * (-0.5 * z * z).exp();
                        }
                    }
                    acc
                })
                .collect())
        }
    }
}

/// Delta-comb weights (pi/2) g_j^2 / (m omega_j) of the spectral density.
pub fn mode_weights(spectrum: &ModeSpectrum) -> Vec<f64> {
    spectrum
        .frequencies
        .iter()
        .zip(&spectrum.couplings)
        .map(|(&w, &g)| 0.5 * std::f64::consts::PI * g * g / (spectrum.mass_ratio * w))
        .collect()
}

/// Memory-friction kernel of the generalized Langevin equation,
/// Gamma(t) = sum_j g_j^2 / (m omega_j^2) cos(omega_j t) for t >= 0.
///
/// Negative times are rejected: the kernel is defined on t >= 0 and the
/// caller owns the convention of what happens before the quench.
pub fn memory_friction_kernel(spectrum: &ModeSpectrum, t: f64) -> Result<f64> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("kernel is defined for t >= 0, got {t}"),
        });
    }
    let mut acc = 0.0;
    for (w, g) in spectrum.frequencies.iter().zip(&spectrum.couplings) {
        acc += g * g / (spectrum.mass_ratio * w * w) * (w * t).cos();
    }
    Ok(acc)
}

/// Frequencies of the COM-sector stiffness that sit above the phonon band.
#[derive(Debug, Clone)]
pub struct IsolatedFrequencyReport {
    /// Frequencies exceeding the detection threshold, ascending.
    pub isolated: Vec<f64>,
    /// Band edge omega_cut used as reference.
    pub band_edge: f64,
    /// Relative detection threshold above the band edge.
    pub gap_tolerance: f64,
}

impl IsolatedFrequencyReport {
    /// Largest isolated frequency, or 0 when none exists.
    pub fn largest(&self) -> f64 {
        self.isolated.last().copied().unwrap_or(0.0)
    }
}

/// Default relative gap for isolated-frequency detection.
pub const DEFAULT_GAP_TOLERANCE: f64 = 1e-6;

/// Search the COM-sector stiffness spectrum for frequencies above the band
/// edge. An empty report means the chain thermalizes the COM motion in the
/// thermodynamic limit; persistence under doubling of N separates true
/// isolated modes from finite-size band-edge artifacts.
pub fn find_isolated_frequencies(
    params: &ModelParams,
    gap_tolerance: f64,
) -> Result<IsolatedFrequencyReport> {
    if gap_tolerance < 0.0 {
        return Err(Error::InvalidParameter {
            name: "gap_tolerance",
            reason: format!("must be nonnegative, got {gap_tolerance}"),
        });
    }
    let sector = build_com_sector(params);
    let eig = sector.w_plus.eigen("COM stiffness")?;
    let band_edge = params.omega_cut();
    let threshold = band_edge * (1.0 + gap_tolerance);
    let isolated = eig
        .values
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .filter(|&w| w > threshold)
        .collect();
    Ok(IsolatedFrequencyReport {
        isolated,
        band_edge,
        gap_tolerance,
    })
}

/// Which traversal of the chain defines the finite-size revival time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RevivalConvention {
    /// One traversal of the chain at the maximal group velocity, 2N/omega_cut.
    SinglePass,
    /// Out and back, 4N/omega_cut; matches the onset of revivals when the
    /// defects couple at one edge.
    RoundTrip,
}

/// Finite-size revival time after which the quasi-stationary state breaks
/// down. Grows linearly with the particle number.
pub fn revival_time(params: &ModelParams, convention: RevivalConvention) -> f64 {
    let base = 2.0 * params.n_ions() as f64 / params.omega_cut();
    match convention {
        RevivalConvention::SinglePass => base,
        RevivalConvention::RoundTrip => 2.0 * base,
    }
}
