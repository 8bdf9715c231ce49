//! The four run modes behind the CLI subcommands.

use std::fs;
use std::path::Path;

use chainbath::dynamics::{
    measure_plateau, SystemModes, ThermalEstimator, PLATEAU_WINDOW,
};
use chainbath::entanglement::{classify_phase, logarithmic_negativity};
use chainbath::spectral::{
    analytic_dispersion, bath_spectrum, find_isolated_frequencies, memory_friction_kernel,
    revival_time, spectral_density, DEFAULT_GAP_TOLERANCE,
};
use chainbath::states::InitialState;
use chainbath::ModelParams;
use rayon::prelude::*;

use crate::config::{Broadening, RunConfig};
use crate::CliError;

/// Serialize with 12 significant digits; deterministic across runs.
fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create `{}`: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::Io(format!("cannot write `{}`: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_sidecar(config: &RunConfig, command: &str, fast_steady: bool) -> Result<(), CliError> {
    write_file(
        &config.output,
        "resolved_config.txt",
        &config.resolved_text(command, fast_steady),
    )
}

/// One simulation: variance and negativity time series of the defect pair.
pub fn run_single(config: &RunConfig) -> Result<(), CliError> {
    let params = &config.model;
    let s1 = config.squeeze1.shifted(params)?;
    let s2 = config.squeeze2.shifted(params)?;
    let state = InitialState::product(params, config.temperature, &s1, &s2)
        .map_err(CliError::numerical)?;
    let engine = SystemModes::new(params)
        .map_err(CliError::numerical)?
        .evolve(&state)
        .map_err(CliError::numerical)?;

    let n = config.n_samples;
    let times: Vec<f64> = (0..n)
        .map(|i| config.t_max * i as f64 / (n as f64 - 1.0))
        .collect();
    let rows: Result<Vec<String>, CliError> = times
        .par_iter()
        .map(|&t| {
            let sigma = engine.defect_covariance_at(t);
            let dx2 = 0.5 * (sigma.get(0, 0) + sigma.get(2, 2) + 2.0 * sigma.get(0, 2));
            let dp2 = 0.5 * (sigma.get(1, 1) + sigma.get(3, 3) + 2.0 * sigma.get(1, 3));
            let neg = logarithmic_negativity(&sigma).map_err(CliError::numerical)?;
            Ok(format!(
                "{},{},{},{},{}",
                num(t),
                num(dx2),
                num(dp2),
                num(neg.script_e),
                num(neg.e_n)
            ))
        })
        .collect();

    let mut table = String::from("t,dx_plus_var,dp_plus_var,script_e,e_n\n");
    for row in rows? {
        table.push_str(&row);
        table.push('\n');
    }
    write_file(&config.output, "series.csv", &table)?;
    write_sidecar(config, "single", false)
}

/// Steady-state COM variances per temperature, either estimated from the
/// equilibrium assumption (fast) or measured from the simulated plateau.
fn plateau_per_temperature(
    config: &RunConfig,
    temperatures: &[f64],
    fast: bool,
) -> Result<Vec<(f64, f64)>, CliError> {
    let params = &config.model;
    if fast {
        let estimator = ThermalEstimator::new(params).map_err(CliError::numerical)?;
        return Ok(temperatures.iter().map(|&t| estimator.estimate(t)).collect());
    }
    let modes = SystemModes::new(params).map_err(CliError::numerical)?;
    let t_rev = revival_time(params, config.revival_convention);
    let window = (PLATEAU_WINDOW.0 * t_rev, PLATEAU_WINDOW.1 * t_rev);
    let sample_times: Vec<f64> = (0..256)
        .map(|i| window.0 + (window.1 - window.0) * i as f64 / 255.0)
        .collect();
    let vacuum = chainbath::SqueezeParams::vacuum();
    temperatures
        .par_iter()
        .map(|&t_bar| {
            // the plateau does not depend on the defect squeezing
            let state = InitialState::product(params, t_bar, &vacuum, &vacuum)
                .map_err(CliError::numerical)?;
            let engine = modes.evolve(&state).map_err(CliError::numerical)?;
            let series = engine
                .variance_series(&sample_times)
                .map_err(CliError::numerical)?;
            let est = measure_plateau(&series, window).map_err(CliError::numerical)?;
            Ok((est.dx2, est.dp2))
        })
        .collect()
}

/// Contour scan of the steady-state entanglement over (r, T).
pub fn run_contour(config: &RunConfig, fast_steady: bool) -> Result<(), CliError> {
    let r_values = config
        .scan_r
        .as_ref()
        .ok_or_else(|| CliError::Config("key `scan.r_values`: required for contour".into()))?;
    let t_values = config.scan_temperature.as_ref().ok_or_else(|| {
        CliError::Config("key `scan.temperature_values`: required for contour".into())
    })?;
    for (i, &t) in t_values.iter().enumerate() {
        if t < 0.0 {
            return Err(CliError::Config(format!(
                "key `scan.temperature_values`: entry {i} is negative ({t})"
            )));
        }
    }

    let plateaus = plateau_per_temperature(config, t_values, fast_steady)?;

    let mut table = String::from("r,temperature,e_min,e_max,e_n_envelope_mid,phase\n");
    for &r in r_values {
        for (&t_bar, &(dx2, dp2)) in t_values.iter().zip(&plateaus) {
            let label = classify_phase(r, r, 0.0, dx2, dp2).map_err(CliError::numerical)?;
            let mid = 0.5 * (label.e_min + label.e_max);
            table.push_str(&format!(
                "{},{},{},{},{},{}\n",
                num(r),
                num(t_bar),
                num(label.e_min),
                num(label.e_max),
                num(mid.max(0.0)),
                label.label
            ));
        }
    }
    write_file(&config.output, "contour.csv", &table)?;
    write_sidecar(config, "contour", fast_steady)
}

/// Spectral characterization: dispersion, spectral density, friction kernel
/// and the isolated-frequency report.
pub fn run_spectral(config: &RunConfig) -> Result<(), CliError> {
    let params = &config.model;
    let spectrum = bath_spectrum(params).map_err(CliError::numerical)?;
    let n = params.n_ions();

    let mut dispersion = String::from("j,omega_analytic,omega_numeric\n");
    for j in 1..=n {
        let analytic = analytic_dispersion(j, n, params.kappa(), params.mass_ratio())
            .map_err(CliError::numerical)?;
        dispersion.push_str(&format!(
            "{j},{},{}\n",
            num(analytic),
            num(spectrum.frequencies[j - 1])
        ));
    }
    write_file(&config.output, "dispersion.csv", &dispersion)?;

    let grid: Vec<f64> = (0..config.spectral_n_omega)
        .map(|i| config.spectral_omega_max * i as f64 / (config.spectral_n_omega as f64 - 1.0))
        .map(|w| w.max(1e-12))
        .collect();
    let broadening = match config.spectral_broadening {
        Broadening::ModeSpacing => chainbath::spectral::Broadening::ModeSpacing,
        Broadening::Gaussian(width) => chainbath::spectral::Broadening::Gaussian { width },
    };
    let density = spectral_density(&spectrum, &grid, broadening).map_err(CliError::numerical)?;
    let mut density_table = String::from("omega,j_plus\n");
    for (w, j) in grid.iter().zip(&density) {
        density_table.push_str(&format!("{},{}\n", num(*w), num(*j)));
    }
    write_file(&config.output, "spectral_density.csv", &density_table)?;

    let mut kernel = String::from("t,gamma_plus\n");
    for i in 0..config.spectral_n_t {
        let t = config.spectral_t_max * i as f64 / (config.spectral_n_t as f64 - 1.0);
        let g = memory_friction_kernel(&spectrum, t).map_err(CliError::numerical)?;
        kernel.push_str(&format!("{},{}\n", num(t), num(g)));
    }
    write_file(&config.output, "kernel.csv", &kernel)?;

    let report =
        find_isolated_frequencies(params, DEFAULT_GAP_TOLERANCE).map_err(CliError::numerical)?;
    let mut isolated = String::from("index,frequency,band_edge,gap_tolerance\n");
    for (i, f) in report.isolated.iter().enumerate() {
        isolated.push_str(&format!(
            "{i},{},{},{}\n",
            num(*f),
            num(report.band_edge),
            num(report.gap_tolerance)
        ));
    }
    write_file(&config.output, "isolated.csv", &isolated)?;
    write_sidecar(config, "spectral", false)
}

/// Scan the (gamma, kappa) plane for isolated frequencies of the COM sector.
pub fn run_boundary(config: &RunConfig) -> Result<(), CliError> {
    let gammas = config
        .scan_gamma
        .as_ref()
        .ok_or_else(|| CliError::Config("key `scan.gamma_values`: required for boundary".into()))?;
    let kappas = config
        .scan_kappa
        .as_ref()
        .ok_or_else(|| CliError::Config("key `scan.kappa_values`: required for boundary".into()))?;

    let base = &config.model;
    let points: Vec<(usize, f64, f64)> = gammas
        .iter()
        .enumerate()
        .flat_map(|(i, &g)| {
            kappas
                .iter()
                .enumerate()
                .map(move |(j, &k)| (i * kappas.len() + j, g, k))
        })
        .collect();

    let mut results: Vec<(usize, f64, f64, f64)> = points
        .par_iter()
        .map(|&(idx, gamma, kappa)| {
            let p = ModelParams::new(base.n_ions(), base.mass_ratio(), kappa, gamma)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let report =
                find_isolated_frequencies(&p, DEFAULT_GAP_TOLERANCE).map_err(CliError::numerical)?;
            Ok((idx, gamma, kappa, report.largest()))
        })
        .collect::<Result<_, CliError>>()?;
    results.sort_by_key(|r| r.0);

    let mut table = String::from("gamma,kappa,largest_isolated\n");
    for (_, gamma, kappa, largest) in results {
        table.push_str(&format!("{},{},{}\n", num(gamma), num(kappa), num(largest)));
    }
    write_file(&config.output, "boundary.csv", &table)?;
    write_sidecar(config, "boundary", false)
}
