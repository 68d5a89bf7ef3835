//! Problem configuration: a flat `key = value` text format.
//!
//! Lines are `dotted.key = value`; blank lines and lines starting with `#`
//! are ignored. Values are numbers, booleans, enum words, or
//! space-separated number lists. Unknown and duplicate keys are errors, and
//! every numeric field is validated so a bad file fails loudly before any
//! expensive solve starts. Only four keys are required (`prior.s`,
//! `observation.kind`, `likelihood.data`, `likelihood.sigma`, plus whatever
//! the observation kind needs); everything else defaults to the desk-scale
//! setup meant for quick runs on a laptop.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::advdiff::SourceSpec;
use crate::boundary::ClampParams;
use crate::inference::{ChainInit, GaussianLikelihood, InferenceError, PcnOptions, PriorSpec};
use crate::observe::{ForwardSpec, ObservationKind, SectorSpec, SensorArray};
use crate::stokes::StokesConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("duplicate key '{key}' on line {line}")]
    DuplicateKey { key: String, line: usize },
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("key '{key}': {message}")]
    InvalidValue { key: String, message: String },
    #[error("{0}")]
    Validation(String),
}

/// Sampler-facing settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainSettings {
    pub n_samples: u64,
    pub n_chains: usize,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub adapt: bool,
    pub burn_in: f64,
    pub rho_init: f64,
    pub init: ChainInit,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            n_samples: 2000,
            n_chains: 2,
            seed: 1,
            checkpoint_every: 500,
            adapt: true,
            burn_in: 0.2,
            rho_init: 0.9,
            // Zero keeps desk-resolution runs robust: raw prior draws are
            // rough enough that a coarse mesh can fail on them, which is a
            // clean rejection mid-chain but a hard error at the start.
            init: ChainInit::Zero,
        }
    }
}

/// A fully resolved problem description.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    /// Mean inner radius; the Fourier perturbation rides on top of it.
    pub b0: f64,
    /// Number of Fourier coefficients (even; pairs of cos/sin modes).
    pub dim: usize,
    pub n_splines: usize,
    pub spline_points: usize,
    pub clamp: ClampParams,
    pub prior_s: f64,
    pub outer_radius: f64,
    pub h_target: f64,
    pub stokes: StokesConfig,
    pub kappa: f64,
    pub source: SourceSpec,
    pub kind: ObservationKind,
    pub sensors: Option<SensorArray>,
    pub sectors: Option<SectorSpec>,
    pub data: Vec<f64>,
    pub sigma: f64,
    pub chain: ChainSettings,
}

/// Raw key-value store with consumption tracking.
struct KeyBag {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyBag {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: "expected 'key = value'".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            if entries
                .insert(key.to_string(), (value.to_string(), line_no))
                .is_some()
            {
                return Err(ConfigError::DuplicateKey {
                    key: key.to_string(),
                    line: line_no,
                });
            }
        }
        Ok(KeyBag { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(key) = self.entries.keys().next() {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        Ok(())
    }
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|_| bad(key, format!("expected a number, got '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.is_empty() {
        return Err(bad(key, "expected a space-separated number list"));
    }
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| bad(key, format!("expected numbers, got '{tok}'")))
        })
        .collect()
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut bag = KeyBag::parse(text)?;

        let mut f64_or = |key: &str, default: f64| -> Result<f64, ConfigError> {
            match bag.take(key) {
                Some(v) => parse_f64(key, &v),
                None => Ok(default),
            }
        };

        let b0 = f64_or("boundary.b0", 1.0)?;
        let clamp_r_min = f64_or("clamp.r_min", 0.5)?;
        let clamp_r_max = f64_or("clamp.r_max", 1.5)?;
        let clamp_eps = f64_or("clamp.epsilon", 0.1)?;
        let outer_radius = f64_or("domain.outer_radius", 2.0)?;
        let h_target = f64_or("domain.h_target", 0.1)?;
        let nu = f64_or("stokes.nu", 0.001)?;
        let omega_bar = f64_or("stokes.omega_bar", 10.0)?;
        let penalty = f64_or("stokes.penalty", 1e-3)?;
        let kappa = f64_or("advdiff.kappa", 1.0)?;
        let source_amplitude = f64_or("advdiff.source_amplitude", 4.0)?;
        let source_x = f64_or("advdiff.source_x", 1.5)?;
        let source_y = f64_or("advdiff.source_y", 1.0)?;
        let source_lsq = f64_or("advdiff.source_length_scale_sq", 100.0)?;
        let burn_in = f64_or("chain.burn_in", 0.2)?;
        let rho_init = f64_or("chain.rho_init", 0.9)?;

        let usize_or = |bag: &mut KeyBag, key: &str, default: usize| -> Result<usize, ConfigError> {
            match bag.take(key) {
                Some(v) => v
                    .parse::<usize>()
                    .map_err(|_| bad(key, format!("expected a non-negative integer, got '{v}'"))),
                None => Ok(default),
            }
        };
        let u64_or = |bag: &mut KeyBag, key: &str, default: u64| -> Result<u64, ConfigError> {
            match bag.take(key) {
                Some(v) => v
                    .parse::<u64>()
                    .map_err(|_| bad(key, format!("expected a non-negative integer, got '{v}'"))),
                None => Ok(default),
            }
        };

        let dim = usize_or(&mut bag, "boundary.dim", 20)?;
        let n_splines = usize_or(&mut bag, "boundary.n_splines", 40)?;
        let spline_points = usize_or(&mut bag, "boundary.spline_points", 8)?;
        let n_samples = u64_or(&mut bag, "chain.n_samples", 2000)?;
        let n_chains = usize_or(&mut bag, "chain.n_chains", 2)?;
        let seed = u64_or(&mut bag, "chain.seed", 1)?;
        let checkpoint_every = u64_or(&mut bag, "chain.checkpoint_every", 500)?;

        let adapt = match bag.take("chain.adapt") {
            None => true,
            Some(v) => match v.as_str() {
                "true" => true,
                "false" => false,
                other => return Err(bad("chain.adapt", format!("expected true or false, got '{other}'"))),
            },
        };
        let init = match bag.take("chain.init") {
            None => ChainSettings::default().init,
            Some(v) => match v.as_str() {
                "prior" => ChainInit::Prior,
                "zero" => ChainInit::Zero,
                other => return Err(bad("chain.init", format!("expected prior or zero, got '{other}'"))),
            },
        };

        let prior_s = match bag.take("prior.s") {
            Some(v) => parse_f64("prior.s", &v)?,
            None => return Err(ConfigError::MissingKey("prior.s")),
        };
        let kind = match bag.take("observation.kind") {
            None => return Err(ConfigError::MissingKey("observation.kind")),
            Some(v) => match v.as_str() {
                "vorticity" => ObservationKind::Vorticity,
                "scalar_variance" => ObservationKind::ScalarVarianceGlobal,
                "sector_variance" => ObservationKind::ScalarVarianceSectoral,
                other => {
                    return Err(bad(
                        "observation.kind",
                        format!(
                            "expected vorticity, scalar_variance, or sector_variance, got '{other}'"
                        ),
                    ))
                }
            },
        };
        let data = match bag.take("likelihood.data") {
            Some(v) => parse_list("likelihood.data", &v)?,
            None => return Err(ConfigError::MissingKey("likelihood.data")),
        };
        let sigma = match bag.take("likelihood.sigma") {
            Some(v) => parse_f64("likelihood.sigma", &v)?,
            None => return Err(ConfigError::MissingKey("likelihood.sigma")),
        };

        // Sensors come either as cartesian lists or as a ring description.
        let sx = bag.take("sensors.x");
        let sy = bag.take("sensors.y");
        let sr = bag.take("sensors.radius");
        let ring_r = bag.take("sensors.ring_radius");
        let ring_angles = bag.take("sensors.angles_deg");
        let ring_ball = bag.take("sensors.ball_radius");
        let cartesian = sx.is_some() || sy.is_some() || sr.is_some();
        let polar = ring_r.is_some() || ring_angles.is_some() || ring_ball.is_some();
        let sensors = if cartesian && polar {
            return Err(ConfigError::Validation(
                "give sensors either as sensors.x/y/radius or as \
                 sensors.ring_radius/angles_deg/ball_radius, not both"
                    .into(),
            ));
        } else if cartesian {
            let xs = parse_list("sensors.x", &sx.ok_or(ConfigError::MissingKey("sensors.x"))?)?;
            let ys = parse_list("sensors.y", &sy.ok_or(ConfigError::MissingKey("sensors.y"))?)?;
            let rs = parse_list(
                "sensors.radius",
                &sr.ok_or(ConfigError::MissingKey("sensors.radius"))?,
            )?;
            if xs.len() != ys.len() || xs.len() != rs.len() {
                return Err(ConfigError::Validation(format!(
                    "sensors.x, sensors.y, and sensors.radius must have equal \
                     lengths (got {}, {}, {})",
                    xs.len(),
                    ys.len(),
                    rs.len()
                )));
            }
            let centers = xs.iter().zip(&ys).map(|(&x, &y)| [x, y]).collect();
            Some(
                SensorArray::new(centers, rs)
                    .map_err(|e| ConfigError::Validation(e.to_string()))?,
            )
        } else if polar {
            let r = parse_f64(
                "sensors.ring_radius",
                &ring_r.ok_or(ConfigError::MissingKey("sensors.ring_radius"))?,
            )?;
            let angles = parse_list(
                "sensors.angles_deg",
                &ring_angles.ok_or(ConfigError::MissingKey("sensors.angles_deg"))?,
            )?;
            let ball = parse_f64(
                "sensors.ball_radius",
                &ring_ball.ok_or(ConfigError::MissingKey("sensors.ball_radius"))?,
            )?;
            Some(
                SensorArray::ring(r, &angles, ball)
                    .map_err(|e| ConfigError::Validation(e.to_string()))?,
            )
        } else {
            None
        };

        let sectors = match bag.take("sectors.angles_deg") {
            None => None,
            Some(v) => {
                let degs = parse_list("sectors.angles_deg", &v)?;
                Some(
                    SectorSpec::from_degrees(&degs)
                        .map_err(|e| ConfigError::Validation(e.to_string()))?,
                )
            }
        };

        bag.finish()?;

        let clamp = ClampParams::new(clamp_r_min, clamp_r_max, clamp_eps)
            .map_err(|e| ConfigError::Validation(e.to_string()))?;

        let config = ProblemConfig {
            b0,
            dim,
            n_splines,
            spline_points,
            clamp,
            prior_s,
            outer_radius,
            h_target,
            stokes: StokesConfig {
                nu,
                omega_bar,
                eps_pen: penalty,
            },
            kappa,
            source: SourceSpec {
                amplitude: source_amplitude,
                center: [source_x, source_y],
                length_scale_sq: source_lsq,
            },
            kind,
            sensors,
            sectors,
            data,
            sigma,
            chain: ChainSettings {
                n_samples,
                n_chains,
                seed,
                checkpoint_every,
                adapt,
                burn_in,
                rho_init,
                init,
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Cross-field validation; [`parse`](Self::parse) calls this, so a parsed
    /// config is always valid.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Validation(m));
        if self.dim < 2 || self.dim % 2 != 0 {
            return fail(format!(
                "boundary.dim must be a positive even number, got {}",
                self.dim
            ));
        }
        if self.n_splines < self.dim / 2 {
            return fail(format!(
                "boundary.n_splines ({}) must be at least half of boundary.dim \
                 ({}) so the spline space resolves every prior mode",
                self.n_splines, self.dim
            ));
        }
        if !(8..=1024).contains(&self.n_splines) {
            return fail(format!(
                "boundary.n_splines must lie in [8, 1024], got {}",
                self.n_splines
            ));
        }
        if self.spline_points < 4 {
            return fail(format!(
                "boundary.spline_points must be at least 4, got {}",
                self.spline_points
            ));
        }
        if !(self.b0.is_finite() && self.b0 > 0.0) {
            return fail(format!("boundary.b0 must be positive, got {}", self.b0));
        }
        if !(self.prior_s.is_finite() && self.prior_s > 0.5) {
            return fail(format!("prior.s must exceed 1/2, got {}", self.prior_s));
        }
        if !(self.outer_radius.is_finite() && self.outer_radius > 0.0) {
            return fail(format!(
                "domain.outer_radius must be positive, got {}",
                self.outer_radius
            ));
        }
        if self.clamp.r_max() >= self.outer_radius {
            return fail(format!(
                "clamp.r_max ({}) must stay below domain.outer_radius ({})",
                self.clamp.r_max(),
                self.outer_radius
            ));
        }
        if !(self.h_target > 0.0 && self.h_target < self.outer_radius) {
            return fail(format!(
                "domain.h_target must lie in (0, outer_radius), got {}",
                self.h_target
            ));
        }
        if !(self.stokes.nu.is_finite() && self.stokes.nu > 0.0) {
            return fail(format!("stokes.nu must be positive, got {}", self.stokes.nu));
        }
        if !(self.stokes.eps_pen.is_finite() && self.stokes.eps_pen > 0.0) {
            return fail(format!(
                "stokes.penalty must be positive, got {}",
                self.stokes.eps_pen
            ));
        }
        if !self.stokes.omega_bar.is_finite() {
            return fail("stokes.omega_bar must be finite".into());
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return fail(format!("advdiff.kappa must be positive, got {}", self.kappa));
        }
        if !(self.source.length_scale_sq.is_finite() && self.source.length_scale_sq > 0.0) {
            return fail(format!(
                "advdiff.source_length_scale_sq must be positive, got {}",
                self.source.length_scale_sq
            ));
        }

        let expected_len = match self.kind {
            ObservationKind::Vorticity => {
                let sensors = match &self.sensors {
                    Some(s) => s,
                    None => return fail("observation.kind = vorticity needs sensors".into()),
                };
                if self.sectors.is_some() {
                    return fail("sectors are only used with sector_variance".into());
                }
                sensors
                    .check_within(self.clamp.r_max(), self.outer_radius)
                    .map_err(|e| ConfigError::Validation(e.to_string()))?;
                sensors.len()
            }
            ObservationKind::ScalarVarianceGlobal => {
                if self.sensors.is_some() || self.sectors.is_some() {
                    return fail(
                        "scalar_variance takes neither sensors nor sectors".into(),
                    );
                }
                1
            }
            ObservationKind::ScalarVarianceSectoral => {
                let sectors = match &self.sectors {
                    Some(s) => s,
                    None => {
                        return fail(
                            "observation.kind = sector_variance needs sectors.angles_deg".into(),
                        )
                    }
                };
                if self.sensors.is_some() {
                    return fail("sensors are only used with vorticity".into());
                }
                sectors.len()
            }
        };
        if self.data.len() != expected_len {
            return fail(format!(
                "likelihood.data has {} entries but the observation produces {}",
                self.data.len(),
                expected_len
            ));
        }
        if self.data.iter().any(|y| !y.is_finite()) {
            return fail("likelihood.data must be finite".into());
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return fail(format!("likelihood.sigma must be positive, got {}", self.sigma));
        }

        if self.chain.n_samples == 0 {
            return fail("chain.n_samples must be at least 1".into());
        }
        if self.chain.n_chains == 0 {
            return fail("chain.n_chains must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.chain.burn_in) {
            return fail(format!(
                "chain.burn_in must lie in [0, 1), got {}",
                self.chain.burn_in
            ));
        }
        if !(0.1..=0.99999).contains(&self.chain.rho_init) {
            return fail(format!(
                "chain.rho_init must lie in [0.1, 0.99999], got {}",
                self.chain.rho_init
            ));
        }
        Ok(())
    }

    /// Canonical text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        let list = |vals: &[f64]| -> String {
            vals.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };

        kv("boundary.b0", self.b0.to_string());
        kv("boundary.dim", self.dim.to_string());
        kv("boundary.n_splines", self.n_splines.to_string());
        kv("boundary.spline_points", self.spline_points.to_string());
        kv("clamp.r_min", self.clamp.r_min().to_string());
        kv("clamp.r_max", self.clamp.r_max().to_string());
        kv("clamp.epsilon", self.clamp.epsilon().to_string());
        kv("prior.s", self.prior_s.to_string());
        kv("domain.outer_radius", self.outer_radius.to_string());
        kv("domain.h_target", self.h_target.to_string());
        kv("stokes.nu", self.stokes.nu.to_string());
        kv("stokes.omega_bar", self.stokes.omega_bar.to_string());
        kv("stokes.penalty", self.stokes.eps_pen.to_string());
        kv("advdiff.kappa", self.kappa.to_string());
        kv("advdiff.source_amplitude", self.source.amplitude.to_string());
        kv("advdiff.source_x", self.source.center[0].to_string());
        kv("advdiff.source_y", self.source.center[1].to_string());
        kv(
            "advdiff.source_length_scale_sq",
            self.source.length_scale_sq.to_string(),
        );
        kv(
            "observation.kind",
            match self.kind {
                ObservationKind::Vorticity => "vorticity",
                ObservationKind::ScalarVarianceGlobal => "scalar_variance",
                ObservationKind::ScalarVarianceSectoral => "sector_variance",
            }
            .to_string(),
        );
        if let Some(sensors) = &self.sensors {
            let xs: Vec<f64> = sensors.centers().iter().map(|c| c[0]).collect();
            let ys: Vec<f64> = sensors.centers().iter().map(|c| c[1]).collect();
            kv("sensors.x", list(&xs));
            kv("sensors.y", list(&ys));
            kv("sensors.radius", list(sensors.radii()));
        }
        if let Some(sectors) = &self.sectors {
            let degs: Vec<f64> = sectors.bounds().iter().map(|b| b.to_degrees()).collect();
            kv("sectors.angles_deg", list(&degs));
        }
        kv("likelihood.data", list(&self.data));
        kv("likelihood.sigma", self.sigma.to_string());
        kv("chain.n_samples", self.chain.n_samples.to_string());
        kv("chain.n_chains", self.chain.n_chains.to_string());
        kv("chain.seed", self.chain.seed.to_string());
        kv(
            "chain.checkpoint_every",
            self.chain.checkpoint_every.to_string(),
        );
        kv("chain.adapt", self.chain.adapt.to_string());
        kv("chain.burn_in", self.chain.burn_in.to_string());
        kv("chain.rho_init", self.chain.rho_init.to_string());
        kv(
            "chain.init",
            match self.chain.init {
                ChainInit::Prior => "prior",
                ChainInit::Zero => "zero",
            }
            .to_string(),
        );
        out
    }

    /// The forward-pipeline slice of this configuration.
    pub fn forward_spec(&self) -> ForwardSpec {
        ForwardSpec {
            clamp: self.clamp,
            outer_radius: self.outer_radius,
            h_target: self.h_target,
            n_splines: self.n_splines,
            spline_points: self.spline_points,
            stokes: self.stokes,
            kappa: self.kappa,
            source: self.source,
            kind: self.kind,
            sensors: self.sensors.clone(),
            sectors: self.sectors.clone(),
        }
    }

    pub fn prior_spec(&self) -> Result<PriorSpec, InferenceError> {
        PriorSpec::new(self.dim, self.prior_s)
    }

    pub fn likelihood(&self) -> Result<GaussianLikelihood, InferenceError> {
        GaussianLikelihood::new(self.data.clone(), self.sigma)
    }

    pub fn pcn_options(&self) -> PcnOptions {
        PcnOptions {
            rho_init: self.chain.rho_init,
            adapt: self.chain.adapt,
            ..PcnOptions::default()
        }
    }
}
