//! Flat key=value run configuration with dotted sections.
//!
//! The format is deliberately primitive so configs stay diffable and
//! parseable from any language: one `key = value` per line, `#` comments,
//! list values either comma-separated or `linspace:lo:hi:count`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use chainbath::spectral::RevivalConvention;
use chainbath::{ModelParams, SqueezeParams};

use crate::CliError;

/// Which frequency a squeeze parameter pair refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezeFrame {
    Bare,
    Shifted,
}

#[derive(Debug, Clone)]
pub struct SqueezeConfig {
    pub r: f64,
    pub phi: f64,
    pub frame: SqueezeFrame,
}

impl SqueezeConfig {
    /// Squeeze parameters in the internal (shifted-frequency) description.
    pub fn shifted(&self, params: &ModelParams) -> Result<SqueezeParams, CliError> {
        let raw = SqueezeParams::new(self.r, self.phi);
        match self.frame {
            SqueezeFrame::Shifted => Ok(raw),
            SqueezeFrame::Bare => {
                chainbath::states::shifted_from_bare(&raw, params.omega_bare())
                    .map_err(CliError::numerical)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Broadening {
    ModeSpacing,
    Gaussian(f64),
}

/// Fully resolved run configuration (defaults filled in).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelParams,
    pub temperature: f64,
    pub squeeze1: SqueezeConfig,
    pub squeeze2: SqueezeConfig,
    pub t_max: f64,
    pub n_samples: usize,
    pub revival_convention: RevivalConvention,
    pub scan_r: Option<Vec<f64>>,
    pub scan_temperature: Option<Vec<f64>>,
    pub scan_gamma: Option<Vec<f64>>,
    pub scan_kappa: Option<Vec<f64>>,
    pub spectral_omega_max: f64,
    pub spectral_n_omega: usize,
    pub spectral_t_max: f64,
    pub spectral_n_t: usize,
    pub spectral_broadening: Broadening,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, output_override: Option<PathBuf>) -> Result<Self, CliError> {
        let mut map = RawConfig::parse(text)?;

        let n_ions: usize = map.required("model.n_ions")?;
        let mass_ratio: f64 = map.required("model.mass_ratio")?;
        let kappa: f64 = map.required("model.kappa")?;
        let gamma: f64 = map.required("model.gamma")?;
        let omega_b: Option<f64> = map.optional("model.omega_b")?;
        let model = match omega_b {
            Some(w) => ModelParams::with_omega_b(n_ions, mass_ratio, kappa, gamma, w),
            None => ModelParams::new(n_ions, mass_ratio, kappa, gamma),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;

        let temperature: f64 = map.optional("temperature")?.unwrap_or(0.0);
        if temperature < 0.0 {
            return Err(CliError::Config(
                "key `temperature`: must be nonnegative".into(),
            ));
        }

        let squeeze = |map: &mut RawConfig, which: &str| -> Result<SqueezeConfig, CliError> {
            let r: f64 = map.optional(&format!("{which}.r"))?.unwrap_or(0.0);
            let phi: f64 = map.optional(&format!("{which}.phi"))?.unwrap_or(0.0);
            let frame = match map
                .optional_str(&format!("{which}.frame"))?
                .unwrap_or_else(|| "shifted".into())
                .as_str()
            {
                "shifted" => SqueezeFrame::Shifted,
                "bare" => SqueezeFrame::Bare,
                other => {
                    return Err(CliError::Config(format!(
                        "key `{which}.frame`: expected `bare` or `shifted`, got `{other}`"
                    )))
                }
            };
            Ok(SqueezeConfig { r, phi, frame })
        };
        let squeeze1 = squeeze(&mut map, "squeeze1")?;
        let squeeze2 = squeeze(&mut map, "squeeze2")?;

        let revival_convention = match map
            .optional_str("revival_convention")?
            .unwrap_or_else(|| "round_trip".into())
            .as_str()
        {
            "round_trip" => RevivalConvention::RoundTrip,
            "single_pass" => RevivalConvention::SinglePass,
            other => {
                return Err(CliError::Config(format!(
                    "key `revival_convention`: expected `round_trip` or `single_pass`, got `{other}`"
                )))
            }
        };

        let t_rev = chainbath::spectral::revival_time(&model, revival_convention);
        let t_max: f64 = map.optional("time_grid.t_max")?.unwrap_or(1.2 * t_rev);
        if t_max <= 0.0 || t_max.is_nan() {
            return Err(CliError::Config(format!(
                "key `time_grid.t_max`: must be positive, got {t_max}"
            )));
        }
        let n_samples: usize = map.optional("time_grid.n_samples")?.unwrap_or(2048);
        if n_samples < 2 {
            return Err(CliError::Config(format!(
                "key `time_grid.n_samples`: need at least 2 samples, got {n_samples}"
            )));
        }

        let scan_r = map.optional_list("scan.r_values")?;
        let scan_temperature = map.optional_list("scan.temperature_values")?;
        let scan_gamma = map.optional_list("scan.gamma_values")?;
        let scan_kappa = map.optional_list("scan.kappa_values")?;
        for (name, list) in [
            ("scan.r_values", &scan_r),
            ("scan.temperature_values", &scan_temperature),
            ("scan.gamma_values", &scan_gamma),
            ("scan.kappa_values", &scan_kappa),
        ] {
            if let Some(v) = list {
                if v.is_empty() {
                    return Err(CliError::Config(format!("key `{name}`: list is empty")));
                }
            }
        }

        let spectral_omega_max: f64 = map
            .optional("spectral.omega_max")?
            .unwrap_or(1.1 * model.omega_cut());
        let spectral_n_omega: usize = map.optional("spectral.n_omega")?.unwrap_or(2000);
        let spectral_t_max: f64 = map.optional("spectral.t_max")?.unwrap_or(50.0);
        let spectral_n_t: usize = map.optional("spectral.n_t")?.unwrap_or(1000);
        let spectral_broadening = match map.optional_str("spectral.broadening")? {
            None => Broadening::ModeSpacing,
            Some(s) if s == "mode_spacing" => Broadening::ModeSpacing,
            Some(s) => match s.strip_prefix("gaussian:").and_then(|w| w.parse().ok()) {
                Some(w) => Broadening::Gaussian(w),
                None => {
                    return Err(CliError::Config(format!(
                        "key `spectral.broadening`: expected `mode_spacing` or `gaussian:<width>`, got `{s}`"
                    )))
                }
            },
        };

        let output = match output_override {
            Some(p) => p,
            None => PathBuf::from(map.optional_str("output")?.unwrap_or_else(|| "out".into())),
        };
        // consume the key even when the flag overrides it
        let _ = map.optional_str("output")?;

        map.finish()?;

        Ok(Self {
            model,
            temperature,
            squeeze1,
            squeeze2,
            t_max,
            n_samples,
            revival_convention,
            scan_r,
            scan_temperature,
            scan_gamma,
            scan_kappa,
            spectral_omega_max,
            spectral_n_omega,
            spectral_t_max,
            spectral_n_t,
            spectral_broadening,
            output,
        })
    }

    /// Echo of the fully resolved configuration, for the reproducibility
    /// sidecar file.
    pub fn resolved_text(&self, command: &str, fast_steady: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# resolved configuration ({command})");
        let _ = writeln!(s, "model.n_ions = {}", self.model.n_ions());
        let _ = writeln!(s, "model.mass_ratio = {}", self.model.mass_ratio());
        let _ = writeln!(s, "model.kappa = {}", self.model.kappa());
        let _ = writeln!(s, "model.gamma = {}", self.model.gamma());
        let _ = writeln!(s, "model.omega_b = {}", self.model.omega_b());
        let _ = writeln!(s, "temperature = {}", self.temperature);
        for (name, sq) in [("squeeze1", &self.squeeze1), ("squeeze2", &self.squeeze2)] {
            let _ = writeln!(s, "{name}.r = {}", sq.r);
            let _ = writeln!(s, "{name}.phi = {}", sq.phi);
            let _ = writeln!(
                s,
                "{name}.frame = {}",
                match sq.frame {
                    SqueezeFrame::Bare => "bare",
                    SqueezeFrame::Shifted => "shifted",
                }
            );
        }
        let _ = writeln!(s, "time_grid.t_max = {}", self.t_max);
        let _ = writeln!(s, "time_grid.n_samples = {}", self.n_samples);
        let _ = writeln!(
            s,
            "revival_convention = {}",
            match self.revival_convention {
                RevivalConvention::RoundTrip => "round_trip",
                RevivalConvention::SinglePass => "single_pass",
            }
        );
        let list = |v: &Option<Vec<f64>>| -> String {
            v.as_ref()
                .map(|xs| {
                    xs.iter()
                        .map(|x| format!("{x}"))
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .unwrap_or_else(|| "<unset>".into())
        };
        let _ = writeln!(s, "scan.r_values = {}", list(&self.scan_r));
        let _ = writeln!(s, "scan.temperature_values = {}", list(&self.scan_temperature));
        let _ = writeln!(s, "scan.gamma_values = {}", list(&self.scan_gamma));
        let _ = writeln!(s, "scan.kappa_values = {}", list(&self.scan_kappa));
        let _ = writeln!(s, "spectral.omega_max = {}", self.spectral_omega_max);
        let _ = writeln!(s, "spectral.n_omega = {}", self.spectral_n_omega);
        let _ = writeln!(s, "spectral.t_max = {}", self.spectral_t_max);
        let _ = writeln!(s, "spectral.n_t = {}", self.spectral_n_t);
        let _ = writeln!(
            s,
            "spectral.broadening = {}",
            match self.spectral_broadening {
                Broadening::ModeSpacing => "mode_spacing".to_string(),
                Broadening::Gaussian(w) => format!("gaussian:{w}"),
            }
        );
        let _ = writeln!(s, "fast_steady = {fast_steady}");
        let _ = writeln!(s, "output = {}", self.output.display());
        s
    }
}

/// Raw key-value store with strict unknown-key detection.
struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`, got `{raw_line}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(CliError::Config(format!("key `{key}`: duplicated")));
            }
        }
        Ok(Self { values })
    }

    fn required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, CliError> {
        match self.optional(key)? {
            Some(v) => Ok(v),
            None => Err(CliError::Config(format!("key `{key}`: missing"))),
        }
    }

    fn optional<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::Config(format!("key `{key}`: cannot parse value `{raw}`"))
            }),
        }
    }

    fn optional_str(&mut self, key: &str) -> Result<Option<String>, CliError> {
        Ok(self.values.remove(key))
    }

    fn optional_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(raw) = self.values.remove(key) else {
            return Ok(None);
        };
        parse_list(&raw)
            .map(Some)
            .map_err(|why| CliError::Config(format!("key `{key}`: {why}")))
    }

    /// Reject leftover keys so typos surface instead of silently using
    /// defaults.
    fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.values.keys().next() {
            return Err(CliError::Config(format!("key `{key}`: unknown")));
        }
        Ok(())
    }
}

/// `1,2,3` or `linspace:lo:hi:count`.
fn parse_list(raw: &str) -> Result<Vec<f64>, String> {
    if let Some(rest) = raw.strip_prefix("linspace:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err("linspace needs `linspace:lo:hi:count`".into());
        }
        let lo: f64 = parts[0].parse().map_err(|_| "bad linspace lower bound")?;
        let hi: f64 = parts[1].parse().map_err(|_| "bad linspace upper bound")?;
        let count: usize = parts[2].parse().map_err(|_| "bad linspace count")?;
        if count < 2 {
            return Err("linspace count must be >= 2".into());
        }
        Ok((0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count as f64 - 1.0))
            .collect())
    } else {
        raw.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("cannot parse `{}` as a number", p.trim()))
            })
            .collect()
    }
}
