//! Exact time evolution of the closed system.
//!
//! The dynamics is linear, so the propagator T(t) = exp(J H t) is built by
//! spectral synthesis from one eigendecomposition of the mass-weighted
//! stiffness of the position sector instead of by time stepping: with
//! W = T^(1/2) V T^(1/2) = E diag(omega^2) E^T the position/momentum blocks
//! are assembled from cos(omega t) and sin(omega t)/omega. The result is
//! exact at any t up to solver precision and one decomposition is amortized
//! over all sample times.

use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{coth, max_abs, max_abs_diff, SymmetricMatrix};
use crate::model::{build_com_sector, FullSystem, ModelParams};
use crate::states::{CovarianceMatrix, InitialState};

/// Linear phase-space map in the canonical ordering, with the time it
/// propagates over.
#[derive(Debug, Clone)]
pub struct SymplecticPropagator {
    pub mat: Mat<f64>,
    pub time: f64,
}

impl SymplecticPropagator {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Largest entry of T J T^T - J; zero for an exactly symplectic map.
    pub fn symplecticity_defect(&self, j_matrix: &Mat<f64>) -> f64 {
        let tjt = &self.mat * &(j_matrix * self.mat.transpose());
        max_abs_diff(&tjt, j_matrix)
    }
}

/// Mass diagonal and position-sector potential of the full system in the
/// stacked (q, p) ordering q = (X1, X2, x_1..x_N).
fn mass_and_potential(params: &ModelParams) -> (Vec<f64>, SymmetricMatrix) {
    let n = params.n_ions();
    let v_gamma = crate::model::build_shifted_potential(params);
    let gamma = params.gamma();
    let mut t_diag = vec![1.0 / params.mass_ratio(); n + 2];
    t_diag[0] = 1.0;
    t_diag[1] = 1.0;
    let v = SymmetricMatrix::from_fn_upper(n + 2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => 1.0,
        (0, 1) => 0.0,
        (0, 2) | (1, 2) => -gamma,
        (0, _) | (1, _) => 0.0,
        (i, j) => v_gamma.get(i - 2, j - 2),
    });
    (t_diag, v)
}

/// Map a canonical phase-space index to (is_momentum, position-sector index).
fn canonical_split(c: usize, n_ions: usize) -> (bool, usize) {
    if c < 4 {
        (c % 2 == 1, c / 2)
    } else if c < 4 + n_ions {
        (false, 2 + c - 4)
    } else {
        (true, 2 + c - 4 - n_ions)
    }
}

/// Build T(t) = exp(J H t) by spectral synthesis. Satisfies the
/// symplecticity and group-property invariants to solver precision.
pub fn propagator(system: &FullSystem, t: f64) -> Result<SymplecticPropagator> {
    let params = &system.params;
    let n = params.n_ions();
    let (t_diag, v) = mass_and_potential(params);
    let w = SymmetricMatrix::from_fn_upper(n + 2, |i, j| {
        (t_diag[i] * t_diag[j]).sqrt() * v.get(i, j)
    });
    let eig = w.eigen("full-system stiffness")?;
    if eig.min_value() < 0.0 {
        return Err(Error::NotPositiveDefinite {
            context: "full-system stiffness",
            min_eigenvalue: eig.min_value(),
        });
    }

    let omegas: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let cos_block = eig.apply(|l| (l.max(0.0).sqrt() * t).cos());
    let sinc_block = eig.apply(|l| {
        let w = l.max(0.0).sqrt();
        if w < 1e-12 {
            t
        } else {
            (w * t).sin() / w
        }
    });
    let wsin_block = eig.apply(|l| {
        let w = l.max(0.0).sqrt();
        w * (w * t).sin()
    });
    let _ = omegas;

    let ts: Vec<f64> = t_diag.iter().map(|&m| m.sqrt()).collect();
    let dim = 2 * n + 4;
    let mut mat = Mat::<f64>::zeros(dim, dim);
    for c2 in 0..dim {
        let (p2, k2) = canonical_split(c2, n);
        for c1 in 0..dim {
            let (p1, k1) = canonical_split(c1, n);
            mat[(c1, c2)] = match (p1, p2) {
                (false, false) => ts[k1] * cos_block[(k1, k2)] / ts[k2],
                (false, true) => ts[k1] * sinc_block[(k1, k2)] * ts[k2],
                (true, false) => -wsin_block[(k1, k2)] / (ts[k1] * ts[k2]),
                (true, true) => cos_block[(k1, k2)] * ts[k2] / ts[k1],
            };
        }
    }
    Ok(SymplecticPropagator { mat, time: t })
}

/// Matrix-exponential propagator by scaling and squaring with a Taylor
/// series, for cross-checking the spectral synthesis on small systems.
pub fn dense_exponential_oracle(system: &FullSystem, t: f64) -> Result<SymplecticPropagator> {
    let dim = system.dim();
    if dim > 128 {
        return Err(Error::InvalidParameter {
            name: "system",
            reason: format!("oracle is restricted to dimension <= 128, got {dim}"),
        });
    }
    let a = &system.j_matrix * system.h_matrix.as_mat();
    let mut a = Mat::<f64>::from_fn(dim, dim, |i, j| a[(i, j)] * t);

    // scale so the series converges fast, then undo by repeated squaring
    let norm = max_abs(&a) * dim as f64;
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    for j in 0..dim {
        for i in 0..dim {
            a[(i, j)] *= scale;
        }
    }

    let mut sum = Mat::<f64>::identity(dim, dim);
    let mut term = Mat::<f64>::identity(dim, dim);
    for k in 1..60 {
        term = &term * &a;
        let inv_k = 1.0 / k as f64;
        for j in 0..dim {
            for i in 0..dim {
                term[(i, j)] *= inv_k;
                sum[(i, j)] += term[(i, j)];
            }
        }
        if max_abs(&term) < 1e-18 * max_abs(&sum).max(1.0) {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(SymplecticPropagator {
        mat: result,
        time: t,
    })
}

/// Congruence V -> T V T^T. The symplectic spectrum of V is preserved.
pub fn evolve_covariance(
    v0: &CovarianceMatrix,
    prop: &SymplecticPropagator,
) -> Result<CovarianceMatrix> {
    if v0.dim() != prop.dim() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}-dimensional, propagator {}-dimensional",
            v0.dim(),
            prop.dim()
        )));
    }
    let tv = &prop.mat * v0.as_mat();
    let out = &tv * prop.mat.transpose();
    CovarianceMatrix::from_mat(out)
}

/// Leading 4x4 block: the reduced state of the defect pair.
pub fn defect_covariance(v: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    if v.dim() < 4 {
        return Err(Error::DimensionMismatch(format!(
            "need at least 4 quadratures, got {}",
            v.dim()
        )));
    }
    let m = Mat::<f64>::from_fn(4, 4, |i, j| v.get(i, j));
    CovarianceMatrix::from_mat(m)
}

/// Involutive change of basis between (X1, P1, X2, P2) and COM/relative
/// quadratures (X+, P+, X-, P-); preserves the determinant.
pub fn com_relative_transform(sigma: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    if sigma.dim() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "COM/relative transform needs a 4x4 covariance, got {}x{0}",
            sigma.dim()
        )));
    }
    let h = 0.5; // entries of R sigma R with R = (1/sqrt2) [[I, I], [I, -I]]
    let s = |i: usize, j: usize| sigma.get(i, j);
    let mut m = Mat::<f64>::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            m[(a, b)] = h * (s(a, b) + s(a, b + 2) + s(a + 2, b) + s(a + 2, b + 2));
            m[(a, b + 2)] = h * (s(a, b) - s(a, b + 2) + s(a + 2, b) - s(a + 2, b + 2));
            m[(a + 2, b)] = h * (s(a, b) + s(a, b + 2) - s(a + 2, b) - s(a + 2, b + 2));
            m[(a + 2, b + 2)] = h * (s(a, b) - s(a, b + 2) - s(a + 2, b) + s(a + 2, b + 2));
        }
    }
    CovarianceMatrix::from_mat(m)
}

/// Free rotation of the decoupled relative motion over time t.
pub fn relative_rotation(t: f64) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(2, 2);
    m[(0, 0)] = t.cos();
    m[(0, 1)] = t.sin();
    m[(1, 0)] = -t.sin();
    m[(1, 1)] = t.cos();
    m
}

/// Total energy functional tr(H V); constant in time under the exact map.
pub fn energy_functional(system: &FullSystem, v: &CovarianceMatrix) -> Result<f64> {
    let dim = system.dim();
    if v.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}-dimensional, system {dim}-dimensional",
            v.dim()
        )));
    }
    let mut acc = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            acc += system.h_matrix.get(i, j) * v.get(j, i);
        }
    }
    Ok(acc)
}

/// Thermal steady-state variances of the COM coordinate assuming the whole
/// system equilibrates at temperature `t_bar`: the (1,1) elements of
/// 1/2 W^(-+1/2) coth(beta/2 W^(1/2)) over the COM-sector stiffness W.
pub fn thermal_steady_estimate(params: &ModelParams, t_bar: f64) -> Result<(f64, f64)> {
    Ok(ThermalEstimator::new(params)?.estimate(t_bar))
}

/// Reusable version of [`thermal_steady_estimate`]: one eigendecomposition
/// serves any number of temperatures (used by contour scans).
#[derive(Debug, Clone)]
pub struct ThermalEstimator {
    omegas: Vec<f64>,
    weights: Vec<f64>, // squared COM components of the eigenvectors
}

impl ThermalEstimator {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let sector = build_com_sector(params);
        let eig = sector.w_plus.eigen("COM stiffness")?;
        if eig.min_value() <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                context: "COM stiffness",
                min_eigenvalue: eig.min_value(),
            });
        }
        let n = eig.dim();
        let omegas: Vec<f64> = eig.values.iter().map(|&l| l.sqrt()).collect();
        let weights: Vec<f64> = (0..n).map(|k| eig.vectors[(0, k)].powi(2)).collect();
        Ok(Self { omegas, weights })
    }

    pub fn estimate(&self, t_bar: f64) -> (f64, f64) {
        let mut dx2 = 0.0;
        let mut dp2 = 0.0;
        for (&w, &c) in self.omegas.iter().zip(&self.weights) {
            let occ = if t_bar == 0.0 {
                1.0
            } else {
                coth(0.5 * w / t_bar)
            };
            dx2 += 0.5 * c * occ / w;
            dp2 += 0.5 * c * occ * w;
        }
        (dx2, dp2)
    }
}

// ---------------------------------------------------------------------------
// Mode-space evolution engine
// ---------------------------------------------------------------------------

/// Column-major dense storage for the hot matvec loops.
#[derive(Debug, Clone)]
struct ColMajor {
    n: usize,
    data: Vec<f64>,
}

impl ColMajor {
    fn from_mat(m: &Mat<f64>) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols());
        let mut data = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                data[j * n + i] = m[(i, j)];
            }
        }
        Self { n, data }
    }

    /// y = M x
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        let n = self.n;
        for (&xj, col) in x.iter().zip(self.data.chunks_exact(n)) {
            if xj == 0.0 {
                continue;
            }
            for i in 0..n {
                y[i] += col[i] * xj;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Time-independent spectral data of the full system: eigenfrequencies of
/// the mass-weighted stiffness and the defect rows of the eigenvector matrix,
/// plus the maps that carry the chain blocks into mode coordinates.
#[derive(Debug, Clone)]
pub struct SystemModes {
    params: ModelParams,
    freqs: Vec<f64>,
    row_x1: Vec<f64>,
    row_x2: Vec<f64>,
    /// (N+2) x N map of chain positions into mode coordinates, E^T Ts^(-1).
    chain_map_x: Mat<f64>,
    /// (N+2) x N map of chain momenta into mode coordinates, E^T Ts.
    chain_map_p: Mat<f64>,
}

impl SystemModes {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let n = params.n_ions();
        let (t_diag, v) = mass_and_potential(params);
        let w = SymmetricMatrix::from_fn_upper(n + 2, |i, j| {
            (t_diag[i] * t_diag[j]).sqrt() * v.get(i, j)
        });
        let eig = w.eigen("full-system stiffness")?;
        if eig.min_value() <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                context: "full-system stiffness",
                min_eigenvalue: eig.min_value(),
            });
        }
        let dim = n + 2;
        let freqs: Vec<f64> = eig.values.iter().map(|&l| l.sqrt()).collect();
        let row_x1: Vec<f64> = (0..dim).map(|k| eig.vectors[(0, k)]).collect();
        let row_x2: Vec<f64> = (0..dim).map(|k| eig.vectors[(1, k)]).collect();
        let sqrt_m = params.mass_ratio().sqrt();
        // chain entries of Ts are 1/sqrt(m), so Ts^(-1) multiplies by sqrt(m)
        let chain_map_x =
            Mat::<f64>::from_fn(dim, n, |k, i| eig.vectors[(2 + i, k)] * sqrt_m);
        let chain_map_p =
            Mat::<f64>::from_fn(dim, n, |k, i| eig.vectors[(2 + i, k)] / sqrt_m);
        Ok(Self {
            params: *params,
            freqs,
            row_x1,
            row_x2,
            chain_map_x,
            chain_map_p,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Bind an initial state to the mode basis, producing an evolution engine.
    pub fn evolve(&self, initial: &InitialState) -> Result<DefectBlockDynamics> {
        DefectBlockDynamics::new(self, initial)
    }
}

/// Exact evolution of the reduced 4x4 defect covariance.
///
/// Mathematically identical to extracting the leading block of
/// T(t) V(0) T(t)^T, but organized so each sample time costs a handful of
/// matrix-vector products instead of dense matrix products: the initial
/// covariance is transformed into mode coordinates once, and the defect rows
/// of the propagator are synthesized per time from cos/sin weights.
pub struct DefectBlockDynamics {
    freqs: Vec<f64>,
    row_x1: Vec<f64>,
    row_x2: Vec<f64>,
    cuu: ColMajor,
    cvv: ColMajor,
    /// Rank-two position-momentum cross covariance: (weight, mode vector).
    cuv: Vec<(f64, Vec<f64>)>,
}

impl DefectBlockDynamics {
    pub fn new(modes: &SystemModes, initial: &InitialState) -> Result<Self> {
        let n = modes.params.n_ions();
        if initial.n_ions() != n {
            return Err(Error::DimensionMismatch(format!(
                "initial state has {} ions, model has {n}",
                initial.n_ions()
            )));
        }
        let dim = n + 2;

        // chain contribution: (E^T Ts^(-1)) sigma_xx (Ts^(-1) E) and the
        // momentum counterpart
        let cuu_chain = &modes.chain_map_x * &(&initial.chain_xx * modes.chain_map_x.transpose());
        let cvv_chain = &modes.chain_map_p * &(&initial.chain_pp * modes.chain_map_p.transpose());

        // defect contribution is rank one per defect per block
        let add_rank_one = |m: &mut Mat<f64>, w: f64, v: &[f64]| {
            if w == 0.0 {
                return;
            }
            for j in 0..dim {
                let wj = w * v[j];
                for i in 0..dim {
                    m[(i, j)] += v[i] * wj;
                }
            }
        };
        let mut cuu = cuu_chain;
        let mut cvv = cvv_chain;
        add_rank_one(&mut cuu, initial.sigma1.get(0, 0), &modes.row_x1);
        add_rank_one(&mut cuu, initial.sigma2.get(0, 0), &modes.row_x2);
        add_rank_one(&mut cvv, initial.sigma1.get(1, 1), &modes.row_x1);
        add_rank_one(&mut cvv, initial.sigma2.get(1, 1), &modes.row_x2);

        let cuv = vec![
            (initial.sigma1.get(0, 1), modes.row_x1.clone()),
            (initial.sigma2.get(0, 1), modes.row_x2.clone()),
        ];

        Ok(Self {
            freqs: modes.freqs.clone(),
            row_x1: modes.row_x1.clone(),
            row_x2: modes.row_x2.clone(),
            cuu: ColMajor::from_mat(&cuu),
            cvv: ColMajor::from_mat(&cvv),
            cuv,
        })
    }

    /// Reduced defect covariance at time t in the ordering (X1, P1, X2, P2).
    pub fn defect_covariance_at(&self, t: f64) -> CovarianceMatrix {
        let n = self.freqs.len();
        let mut cos_w = vec![0.0; n];
        let mut sin_w = vec![0.0; n];
        for k in 0..n {
            let (s, c) = (self.freqs[k] * t).sin_cos();
            cos_w[k] = c;
            sin_w[k] = s;
        }

        // coefficient vectors of the four defect quadratures on the initial
        // mode coordinates (u side and v side)
        let rows = [&self.row_x1, &self.row_x2];
        let mut gu: Vec<Vec<f64>> = Vec::with_capacity(4);
        let mut gv: Vec<Vec<f64>> = Vec::with_capacity(4);
        for row in rows {
            let mut xu = vec![0.0; n];
            let mut xv = vec![0.0; n];
            let mut pu = vec![0.0; n];
            let mut pv = vec![0.0; n];
            for k in 0..n {
                let w = self.freqs[k];
                xu[k] = row[k] * cos_w[k];
                xv[k] = row[k] * sin_w[k] / w;
                pu[k] = -row[k] * w * sin_w[k];
                pv[k] = row[k] * cos_w[k];
            }
            gu.push(xu);
            gu.push(pu);
            gv.push(xv);
            gv.push(pv);
        }
        // reorder to canonical (X1, P1, X2, P2): already pushed in that order

        let mut yu = vec![vec![0.0; n]; 4];
        let mut yv = vec![vec![0.0; n]; 4];
        for a in 0..4 {
            self.cuu.matvec(&gu[a], &mut yu[a]);
            self.cvv.matvec(&gv[a], &mut yv[a]);
        }
        // rank-two cross terms
        let mut pu_dots = [[0.0; 4]; 2];
        let mut pv_dots = [[0.0; 4]; 2];
        for (d, (_, vec_d)) in self.cuv.iter().enumerate() {
            for a in 0..4 {
                pu_dots[d][a] = dot(&gu[a], vec_d);
                pv_dots[d][a] = dot(&gv[a], vec_d);
            }
        }

        let mut m = Mat::<f64>::zeros(4, 4);
        for a in 0..4 {
            for b in a..4 {
                let mut val = dot(&gu[a], &yu[b]) + dot(&gv[a], &yv[b]);
                for (d, (wd, _)) in self.cuv.iter().enumerate() {
                    val += wd * (pu_dots[d][a] * pv_dots[d][b] + pv_dots[d][a] * pu_dots[d][b]);
                }
                m[(a, b)] = val;
                m[(b, a)] = val;
            }
        }
        CovarianceMatrix::from_mat(m).expect("4x4 block is valid")
    }

    /// COM variances at time t.
    pub fn com_variances_at(&self, t: f64) -> (f64, f64) {
        let s = self.defect_covariance_at(t);
        let dx2 = 0.5 * (s.get(0, 0) + s.get(2, 2) + 2.0 * s.get(0, 2));
        let dp2 = 0.5 * (s.get(1, 1) + s.get(3, 3) + 2.0 * s.get(1, 3));
        (dx2, dp2)
    }

    /// Evaluate the COM variance series over the given times in parallel.
    pub fn variance_series(&self, times: &[f64]) -> Result<VarianceSeries> {
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "sample times must be strictly ascending".into(),
            });
        }
        let pairs: Vec<(f64, f64)> = times
            .par_iter()
            .map(|&t| self.com_variances_at(t))
            .collect();
        Ok(VarianceSeries {
            times: times.to_vec(),
            dx_plus_sq: pairs.iter().map(|p| p.0).collect(),
            dp_plus_sq: pairs.iter().map(|p| p.1).collect(),
        })
    }
}

/// Sampled time series of the COM variances.
#[derive(Debug, Clone)]
pub struct VarianceSeries {
    pub times: Vec<f64>,
    pub dx_plus_sq: Vec<f64>,
    pub dp_plus_sq: Vec<f64>,
}

/// Default number of samples for a run; Nyquist-safe for the frequency-one
/// and frequency-two oscillations of interest at the time spans we sample.
pub const DEFAULT_SAMPLES: usize = 2048;

/// Evolve the covariance and extract the COM variances on a time grid.
pub fn com_variance_series(
    params: &ModelParams,
    initial: &InitialState,
    times: &[f64],
) -> Result<VarianceSeries> {
    SystemModes::new(params)?.evolve(initial)?.variance_series(times)
}

/// Plateau statistics of a variance series over a time window.
#[derive(Debug, Clone, Copy)]
pub struct PlateauEstimate {
    pub dx2: f64,
    pub dp2: f64,
    /// Window actually used.
    pub window: (f64, f64),
    /// max - min over the window; a convergence diagnostic.
    pub dx2_spread: f64,
    pub dp2_spread: f64,
}

/// Default plateau readout window as fractions of the revival time.
pub const PLATEAU_WINDOW: (f64, f64) = (0.4, 0.9);

/// Median and spread of the variances over the samples falling inside
/// `window`. The median is insensitive to the residual frequency-two
/// oscillations around the stationary value.
pub fn measure_plateau(series: &VarianceSeries, window: (f64, f64)) -> Result<PlateauEstimate> {
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    for (i, &t) in series.times.iter().enumerate() {
        if t >= window.0 && t <= window.1 {
            xs.push(series.dx_plus_sq[i]);
            ps.push(series.dp_plus_sq[i]);
        }
    }
    if xs.len() < 8 {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!(
                "plateau window [{}, {}] contains only {} samples",
                window.0,
                window.1,
                xs.len()
            ),
        });
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    let spread = |v: &[f64]| v[v.len() - 1] - v[0];
    let dx2 = median(&mut xs);
    let dp2 = median(&mut ps);
    Ok(PlateauEstimate {
        dx2,
        dp2,
        window,
        dx2_spread: spread(&xs),
        dp2_spread: spread(&ps),
    })
}

/// First time from which the windowed deviation of dX+^2 from the plateau
/// stays above `rel_threshold` for at least three oscillation periods.
/// Returns None when no sustained breakdown occurs within the series.
///
/// The deviation oscillates through zero twice per period, so the detector
/// works on sliding-window maxima with windows of one period (pi) of the
/// frequency-two oscillation.
pub fn first_sustained_deviation(
    series: &VarianceSeries,
    plateau: f64,
    rel_threshold: f64,
) -> Option<f64> {
    let period = std::f64::consts::PI;
    let times = &series.times;
    let n = times.len();
    if n == 0 {
        return None;
    }
    // windowed max of |x - plateau| / plateau starting at each sample
    let mut win_max = vec![0.0f64; n];
    let mut hi = 0usize;
    for i in 0..n {
        if hi < i {
            hi = i;
        }
        while hi < n && times[hi] < times[i] + period {
            hi += 1;
        }
        let mut m = 0.0f64;
        for k in i..hi {
            m = m.max((series.dx_plus_sq[k] - plateau).abs() / plateau);
        }
        win_max[i] = m;
    }
    let sustain = 3.0 * period;
    for i in 0..n {
        if win_max[i] > rel_threshold {
            let end = times[i] + sustain;
            let ok = (i..n)
                .take_while(|&k| times[k] <= end)
                .all(|k| win_max[k] > rel_threshold);
            // require the sustain window to actually fit in the series
            if ok && times[n - 1] >= end {
                return Some(times[i]);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_full_system, symplectic_form};
    use crate::states::SqueezeParams;

    fn standard(n: usize) -> ModelParams {
        ModelParams::new(n, 0.5, 1.0, 0.1).unwrap()
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let sys = build_full_system(&standard(5));
        let p = propagator(&sys, 0.0).unwrap();
        let id = Mat::<f64>::identity(14, 14);
        assert!(max_abs_diff(&p.mat, &id) < 1e-14);
    }

    #[test]
    fn decoupled_defect_block_rotates_at_unit_frequency() {
        let p = ModelParams::new(5, 0.5, 1.0, 0.0).unwrap();
        let sys = build_full_system(&p);
        let t = 0.83;
        let prop = propagator(&sys, t).unwrap();
        for base in [0usize, 2] {
            assert!((prop.mat[(base, base)] - t.cos()).abs() < 1e-12);
            assert!((prop.mat[(base, base + 1)] - t.sin()).abs() < 1e-12);
            assert!((prop.mat[(base + 1, base)] + t.sin()).abs() < 1e-12);
            assert!((prop.mat[(base + 1, base + 1)] - t.cos()).abs() < 1e-12);
        }
        // defect-chain blocks vanish
        for i in 0..4 {
            for j in 4..14 {
                assert!(prop.mat[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn propagator_matches_exponential_oracle() {
        let p = ModelParams::with_omega_b(5, 0.7, 1.3, 0.25, 1.1).unwrap();
        let sys = build_full_system(&p);
        for t in [0.1, 1.0, 10.0] {
            let a = propagator(&sys, t).unwrap();
            let b = dense_exponential_oracle(&sys, t).unwrap();
            let err = max_abs_diff(&a.mat, &b.mat);
            assert!(err < 1e-8, "t={t}: {err}");
        }
    }

    #[test]
    fn oracle_rejects_large_systems() {
        let sys = build_full_system(&standard(100));
        assert!(dense_exponential_oracle(&sys, 1.0).is_err());
    }

    #[test]
    fn propagator_group_property_and_symplecticity() {
        let p = standard(8);
        let sys = build_full_system(&p);
        let j = symplectic_form(8);
        let a = propagator(&sys, 1.3).unwrap();
        let b = propagator(&sys, 2.4).unwrap();
        let c = propagator(&sys, 3.7).unwrap();
        let ab = &a.mat * &b.mat;
        assert!(max_abs_diff(&ab, &c.mat) < 1e-9);
        assert!(a.symplecticity_defect(&j) < 1e-10);
    }

    #[test]
    fn evolution_preserves_ground_state_and_energy() {
        let p = standard(6);
        let sys = build_full_system(&p);
        let state = InitialState::product(
            &p,
            0.15,
            &SqueezeParams::new(0.4, 0.9),
            &SqueezeParams::new(0.2, -0.3),
        )
        .unwrap();
        let v0 = state.full_covariance().unwrap();
        let prop0 = propagator(&sys, 0.0).unwrap();
        let same = evolve_covariance(&v0, &prop0).unwrap();
        assert!(max_abs_diff(same.as_mat(), v0.as_mat()) < 1e-14);

        let e0 = energy_functional(&sys, &v0).unwrap();
        for t in [0.7, 3.1, 12.9] {
            let prop = propagator(&sys, t).unwrap();
            let vt = evolve_covariance(&v0, &prop).unwrap();
            let et = energy_functional(&sys, &vt).unwrap();
            assert!((et - e0).abs() / e0.abs() < 1e-9, "t={t}");
        }

        let small = defect_covariance(&v0).unwrap();
        assert_eq!(small.dim(), 4);
        assert!(evolve_covariance(&small, &prop0).is_err());
    }

    #[test]
    fn engine_matches_dense_route() {
        let p = standard(20);
        let sys = build_full_system(&p);
        let state = InitialState::product(
            &p,
            0.3,
            &SqueezeParams::new(0.5, 1.2),
            &SqueezeParams::new(0.3, -2.1),
        )
        .unwrap();
        let v0 = state.full_covariance().unwrap();
        let engine = SystemModes::new(&p).unwrap().evolve(&state).unwrap();
        for t in [0.0, 0.9, 7.7, 31.4] {
            let prop = propagator(&sys, t).unwrap();
            let dense = defect_covariance(&evolve_covariance(&v0, &prop).unwrap()).unwrap();
            let fast = engine.defect_covariance_at(t);
            assert!(
                max_abs_diff(dense.as_mat(), fast.as_mat()) < 1e-11,
                "t={t}"
            );
        }
    }

    #[test]
    fn decoupled_vacuum_defects_are_stationary() {
        let p = ModelParams::new(12, 0.5, 1.0, 0.0).unwrap();
        let state = InitialState::product(
            &p,
            0.0,
            &SqueezeParams::vacuum(),
            &SqueezeParams::vacuum(),
        )
        .unwrap();
        let engine = SystemModes::new(&p).unwrap().evolve(&state).unwrap();
        for t in [0.0, 1.3, 8.8] {
            let s = engine.defect_covariance_at(t);
            for i in 0..4 {
                for j in 0..4 {
                    let expect = if i == j { 0.5 } else { 0.0 };
                    assert!((s.get(i, j) - expect).abs() < 1e-12, "t={t} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn com_relative_transform_properties() {
        let p = standard(10);
        let state = InitialState::product(
            &p,
            0.1,
            &SqueezeParams::new(0.5, 0.4),
            &SqueezeParams::new(0.5, 0.4),
        )
        .unwrap();
        let sigma = defect_covariance(&state.full_covariance().unwrap()).unwrap();
        let pm = com_relative_transform(&sigma).unwrap();
        // equal blocks, zero cross: COM and relative blocks both equal sigma1
        for i in 0..2 {
            for j in 0..2 {
                assert!((pm.get(i, j) - state.sigma1.get(i, j)).abs() < 1e-14);
                assert!((pm.get(2 + i, 2 + j) - state.sigma1.get(i, j)).abs() < 1e-14);
                assert!(pm.get(i, 2 + j).abs() < 1e-14);
            }
        }
        // involution
        let back = com_relative_transform(&pm).unwrap();
        assert!(max_abs_diff(back.as_mat(), sigma.as_mat()) < 1e-14);

        // unequal squeezing: cross block is (sigma1 - sigma2)/2
        let state2 = InitialState::product(
            &p,
            0.1,
            &SqueezeParams::new(0.7, 0.0),
            &SqueezeParams::new(0.2, 1.0),
        )
        .unwrap();
        let sigma2 = defect_covariance(&state2.full_covariance().unwrap()).unwrap();
        let pm2 = com_relative_transform(&sigma2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = 0.5 * (state2.sigma1.get(i, j) - state2.sigma2.get(i, j));
                assert!((pm2.get(i, 2 + j) - expect).abs() < 1e-14);
            }
        }
        // determinant preserved
        let det4 = |m: &CovarianceMatrix| crate::linalg::det4(m.as_mat());
        assert!((det4(&sigma2) - det4(&pm2)).abs() < 1e-12);
    }

    #[test]
    fn thermal_estimate_limits() {
        // gamma -> 0, T = 0: decoupled ground state
        let p = ModelParams::new(50, 0.5, 1.0, 0.0).unwrap();
        let (dx2, dp2) = thermal_steady_estimate(&p, 0.0).unwrap();
        assert!((dx2 - 0.5).abs() < 1e-10);
        assert!((dp2 - 0.5).abs() < 1e-10);

        // high temperature: linear growth, dx2 > dp2 at finite coupling
        let p = standard(50);
        let (x1, p1) = thermal_steady_estimate(&p, 3.0).unwrap();
        let (x2, p2) = thermal_steady_estimate(&p, 6.0).unwrap();
        assert!(x1 > p1);
        assert!((x2 / x1 - 2.0).abs() < 0.02);
        assert!((p2 / p1 - 2.0).abs() < 0.02);
    }

    #[test]
    fn plateau_and_breakdown_detection() {
        // synthetic series: flat plateau then a growing revival
        let times: Vec<f64> = (0..2000).map(|i| i as f64 * 0.5).collect();
        let plateau = 0.5;
        let series = VarianceSeries {
            dx_plus_sq: times
                .iter()
                .map(|&t| {
                    let osc = 0.0005 * (2.0 * t).cos();
                    if t < 700.0 {
                        plateau + osc
                    } else {
                        plateau + osc + 0.1 * ((t - 700.0) / 100.0).tanh() * (2.0 * t).sin()
                    }
                })
                .collect(),
            dp_plus_sq: vec![plateau; times.len()],
            times,
        };
        let est = measure_plateau(&series, (100.0, 600.0)).unwrap();
        assert!((est.dx2 - plateau).abs() < 1e-3);
        assert!(est.dx2_spread < 2e-3);

        let hit = first_sustained_deviation(&series, est.dx2, 0.05).unwrap();
        assert!(hit > 690.0 && hit < 780.0, "breakdown at {hit}");
        assert!(first_sustained_deviation(&series, est.dx2, 0.5).is_none());

        assert!(measure_plateau(&series, (0.0, 1.0)).is_err());
    }
}
