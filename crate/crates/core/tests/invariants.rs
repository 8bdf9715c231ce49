//! Cross-module invariants: conservation laws of the exact evolution,
//! mutual consistency of the squeeze-frame maps, and the determinant
//! identity behind the closed-form negativity.

use chainbath::dynamics::{
    com_relative_transform, defect_covariance, evolve_covariance, propagator, relative_rotation,
    SystemModes,
};
use chainbath::entanglement::{delta_tilde, delta_tilde_via_com};
use chainbath::linalg::{det2, max_abs_diff};
use chainbath::model::{build_full_system, symplectic_form, ModelParams};
use chainbath::spectral::{bath_spectrum, memory_friction_kernel, mode_weights, spectral_density, Broadening};
use chainbath::states::{bare_from_shifted, shifted_from_bare, InitialState, SqueezeParams};
use proptest::prelude::*;

fn test_params() -> ModelParams {
    ModelParams::new(24, 0.5, 1.0, 0.1).unwrap()
}

fn test_state(params: &ModelParams) -> InitialState {
    InitialState::product(
        params,
        0.25,
        &SqueezeParams::new(0.6, 0.8),
        &SqueezeParams::new(0.2, -1.7),
    )
    .unwrap()
}

#[test]
fn symplectic_spectrum_is_conserved() {
    let params = test_params();
    let sys = build_full_system(&params);
    let j = symplectic_form(params.n_ions());
    let v0 = test_state(&params).full_covariance().unwrap();
    let nus0 = v0.symplectic_eigenvalues(&j).unwrap();
    for t in [0.4, 3.9, 27.2] {
        let vt = evolve_covariance(&v0, &propagator(&sys, t).unwrap()).unwrap();
        let nus = vt.symplectic_eigenvalues(&j).unwrap();
        let drift = nus0
            .iter()
            .zip(&nus)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(drift < 1e-9, "t={t}: drift {drift}");
        assert!(vt.is_physical(&j).unwrap());
    }
}

#[test]
fn relative_motion_evolves_freely() {
    let params = test_params();
    let sys = build_full_system(&params);
    let state = test_state(&params);
    let v0 = state.full_covariance().unwrap();
    let sigma0_pm = com_relative_transform(&defect_covariance(&v0).unwrap()).unwrap();
    for t in [0.9, 6.3, 18.0] {
        let vt = evolve_covariance(&v0, &propagator(&sys, t).unwrap()).unwrap();
        let pm = com_relative_transform(&defect_covariance(&vt).unwrap()).unwrap();
        let rot = relative_rotation(t);
        // lower-right block is the relative motion
        let minus0 =
            faer::Mat::<f64>::from_fn(2, 2, |i, j| sigma0_pm.get(2 + i, 2 + j));
        let expected = &rot * &(&minus0 * rot.transpose());
        let got = faer::Mat::<f64>::from_fn(2, 2, |i, j| pm.get(2 + i, 2 + j));
        assert!(
            max_abs_diff(&expected, &got) < 1e-9,
            "t={t}: {}",
            max_abs_diff(&expected, &got)
        );
    }
}

#[test]
fn engine_relative_block_matches_free_rotation_large_chain() {
    let params = ModelParams::new(300, 0.5, 1.0, 0.1).unwrap();
    let s1 = SqueezeParams::new(0.4, 0.0);
    let s2 = SqueezeParams::new(0.4, 0.0);
    let state = InitialState::product(&params, 1e-3, &s1, &s2).unwrap();
    let engine = SystemModes::new(&params).unwrap().evolve(&state).unwrap();
    let minus0 = faer::Mat::<f64>::from_fn(2, 2, |i, j| state.sigma1.get(i, j));
    for t in [10.0, 55.5, 140.0] {
        let pm = com_relative_transform(&engine.defect_covariance_at(t)).unwrap();
        let rot = relative_rotation(t);
        let expected = &rot * &(&minus0 * rot.transpose());
        let got = faer::Mat::<f64>::from_fn(2, 2, |i, j| pm.get(2 + i, 2 + j));
        assert!(max_abs_diff(&expected, &got) < 1e-9, "t={t}");
    }
}

/// Reference-scale machinery shared by the plateau-level invariants.
struct BigRun {
    engine: chainbath::dynamics::DefectBlockDynamics,
    alt_engine: chainbath::dynamics::DefectBlockDynamics,
    window: (f64, f64),
}

fn big_run() -> &'static BigRun {
    use std::sync::OnceLock;
    static CELL: OnceLock<BigRun> = OnceLock::new();
    CELL.get_or_init(|| {
        let params = ModelParams::new(1000, 0.5, 1.0, 0.1).unwrap();
        let squeeze = SqueezeParams::new(0.25 * 0.9f64.ln(), 0.0);
        let state = InitialState::product(&params, 1e-5, &squeeze, &squeeze).unwrap();
        // same chain, much stronger defect squeezing
        let strong = chainbath::states::squeezed_defect_covariance(&SqueezeParams::new(0.3, 0.0));
        let alt_state = InitialState {
            sigma1: strong.clone(),
            sigma2: strong,
            chain_xx: state.chain_xx.clone(),
            chain_pp: state.chain_pp.clone(),
        };
        let modes = SystemModes::new(&params).unwrap();
        let t_rev =
            chainbath::spectral::revival_time(&params, chainbath::spectral::RevivalConvention::RoundTrip);
        BigRun {
            engine: modes.evolve(&state).unwrap(),
            alt_engine: modes.evolve(&alt_state).unwrap(),
            window: (0.4 * t_rev, 0.9 * t_rev),
        }
    })
}

#[test]
fn plateau_is_insensitive_to_initial_squeezing() {
    use chainbath::dynamics::measure_plateau;
    let run = big_run();
    let times: Vec<f64> = (0..161)
        .map(|i| run.window.0 + (run.window.1 - run.window.0) * i as f64 / 160.0)
        .collect();
    let a = measure_plateau(&run.engine.variance_series(&times).unwrap(), run.window).unwrap();
    let b = measure_plateau(&run.alt_engine.variance_series(&times).unwrap(), run.window).unwrap();
    let dx = (a.dx2 - b.dx2).abs();
    let dp = (a.dp2 - b.dp2).abs();
    assert!(dx < 1e-3 && dp < 1e-3, "plateau shifted by ({dx:.2e}, {dp:.2e})");
}

#[test]
fn determinant_is_stationary_and_delta_oscillates_at_frequency_two() {
    // det Sigma(t) of the defect block settles to a constant at the plateau,
    // while the partial-transpose invariant oscillates at exactly twice the
    // trap frequency
    let run = big_run();
    let times: Vec<f64> = (0..300).map(|i| 900.0 + 350.0 * i as f64 / 299.0).collect();
    let mut dets = Vec::new();
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    let mut rows = Vec::new();
    for &t in &times {
        let sigma = run.engine.defect_covariance_at(t);
        dets.push(chainbath::linalg::det4(sigma.as_mat()));
        let delta = delta_tilde(&sigma).unwrap();
        let row = [1.0, (2.0 * t).cos(), (2.0 * t).sin()];
        for a in 0..3 {
            for b in 0..3 {
                ata[a][b] += row[a] * row[b];
            }
            atb[a] += row[a] * delta;
        }
        rows.push((row, delta));
    }
    let mean = dets.iter().sum::<f64>() / dets.len() as f64;
    let det_variation = dets
        .iter()
        .map(|d| (d - mean).abs())
        .fold(0.0f64, f64::max)
        / mean;
    assert!(
        det_variation < 1e-6,
        "det Sigma varies by {det_variation:.2e} relative across the plateau"
    );

    // solve the 3x3 normal equations by elimination
    let coeff = {
        let mut m = ata;
        let mut b = atb;
        for k in 0..3 {
            let piv = m[k][k];
            for j in 0..3 {
                m[k][j] /= piv;
            }
            b[k] /= piv;
            for i in 0..3 {
                if i != k {
                    let f = m[i][k];
                    for j in 0..3 {
                        m[i][j] -= f * m[k][j];
                    }
                    b[i] -= f * b[k];
                }
            }
        }
        b
    };
    let residual = rows
        .iter()
        .map(|(row, delta)| {
            (row[0] * coeff[0] + row[1] * coeff[1] + row[2] * coeff[2] - delta).abs()
        })
        .fold(0.0f64, f64::max);
    assert!(
        residual < 1e-6,
        "frequency-2 fit of the partial-transpose invariant has residual {residual:.2e}"
    );
}

#[test]
fn kernel_is_inverse_cosine_transform_of_spectral_density() {
    let params = ModelParams::new(300, 0.5, 1.0, 0.1).unwrap();
    let spectrum = bath_spectrum(&params).unwrap();
    // (2/pi) int J(w)/w dw over the broadened density recovers Gamma(0)
    let n_grid = 120_000usize;
    let w_max = spectrum.cutoff * 1.05;
    let dw = w_max / n_grid as f64;
    let grid: Vec<f64> = (0..n_grid).map(|i| (i as f64 + 0.5) * dw).collect();
    let j = spectral_density(&spectrum, &grid, Broadening::ModeSpacing).unwrap();
    let integral: f64 = j
        .iter()
        .zip(&grid)
        .map(|(&jv, &w)| jv / w * dw)
        .sum::<f64>()
        * (2.0 / std::f64::consts::PI);
    let gamma0 = memory_friction_kernel(&spectrum, 0.0).unwrap();
    assert!(
        (integral - gamma0).abs() / gamma0 < 1e-3,
        "quadrature {integral} vs kernel {gamma0}"
    );
    // total weight consistency
    let total: f64 = mode_weights(&spectrum).iter().sum();
    assert!(total > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn squeeze_roundtrip_and_similarity(
        r in 0.01f64..2.0,
        phi in -3.1f64..3.1,
        omega_ratio in 0.2f64..1.8,
    ) {
        let s = SqueezeParams::new(r, phi);
        let shifted = shifted_from_bare(&s, omega_ratio).unwrap();
        let back = bare_from_shifted(&shifted, omega_ratio).unwrap();
        prop_assert!((back.r() - s.r()).abs() < 1e-10);
        if s.r() > 1e-9 {
            let mut d = (back.phi() - s.phi()).abs();
            if d > std::f64::consts::PI {
                d = (d - 2.0 * std::f64::consts::PI).abs();
            }
            prop_assert!(d < 1e-9, "phi {} vs {}", back.phi(), s.phi());
        }

        // the mapped parameters reproduce the rescaled covariance
        let bare_cov = chainbath::states::squeezed_defect_covariance(&s);
        let sq = omega_ratio.sqrt();
        let expected = faer::Mat::<f64>::from_fn(2, 2, |i, j| {
            let si = if i == 0 { 1.0 / sq } else { sq };
            let sj = if j == 0 { 1.0 / sq } else { sq };
            si * bare_cov.get(i, j) * sj
        });
        let got = chainbath::states::squeezed_defect_covariance(&shifted);
        prop_assert!(max_abs_diff(&expected, got.as_mat()) < 1e-11);
    }

    #[test]
    fn determinant_identity_on_2x2_pairs(
        a in proptest::array::uniform4(-2.0f64..2.0),
        b in proptest::array::uniform4(-2.0f64..2.0),
    ) {
        // det(A +- B) = det A + det B +- det(a1; b2) +- det(b1; a2)
        let det_sum = |sign: f64| {
            det2(
                a[0] + sign * b[0],
                a[1] + sign * b[1],
                a[2] + sign * b[2],
                a[3] + sign * b[3],
            )
        };
        let mixed = det2(a[0], a[1], b[2], b[3]) + det2(b[0], b[1], a[2], a[3]);
        let det_a = det2(a[0], a[1], a[2], a[3]);
        let det_b = det2(b[0], b[1], b[2], b[3]);
        prop_assert!((det_sum(1.0) - (det_a + det_b + mixed)).abs() < 1e-12);
        prop_assert!((det_sum(-1.0) - (det_a + det_b - mixed)).abs() < 1e-12);
    }

    #[test]
    fn com_route_delta_equals_direct_delta(
        r1 in 0.0f64..1.2,
        r2 in 0.0f64..1.2,
        phi1 in -3.0f64..3.0,
        phi2 in -3.0f64..3.0,
        t in 0.0f64..20.0,
    ) {
        // physical correlated 4x4 from a rotated product state
        let params = ModelParams::new(8, 0.5, 1.0, 0.1).unwrap();
        let sys = build_full_system(&params);
        let state = InitialState::product(
            &params,
            0.1,
            &SqueezeParams::new(r1, phi1),
            &SqueezeParams::new(r2, phi2),
        )
        .unwrap();
        let v0 = state.full_covariance().unwrap();
        let vt = evolve_covariance(&v0, &propagator(&sys, t).unwrap()).unwrap();
        let sigma = defect_covariance(&vt).unwrap();
        let direct = delta_tilde(&sigma).unwrap();
        let pm = com_relative_transform(&sigma).unwrap();
        let via = delta_tilde_via_com(&pm).unwrap();
        prop_assert!((direct - via).abs() < 1e-11, "{direct} vs {via}");
    }

    #[test]
    fn pure_squeezed_states_have_quarter_determinant(
        r in -2.0f64..2.0,
        phi in -6.0f64..6.0,
    ) {
        let cov = chainbath::states::squeezed_defect_covariance(&SqueezeParams::new(r, phi));
        let det = det2(cov.get(0, 0), cov.get(0, 1), cov.get(1, 0), cov.get(1, 1));
        // cancellation in the determinant grows like e^(4|r|)
        let tol = 1e-15 * (4.0 * r.abs()).exp().max(10.0);
        prop_assert!((det - 0.25).abs() < tol);
    }
}
