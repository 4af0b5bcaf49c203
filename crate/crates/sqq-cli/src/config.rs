//! Run configuration: the JSON schema accepted via `--config`, the CLI flag
//! overlay, and the translation into core problem setups and run settings.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sqq_core::driver::{RunSettings, VariantName};
use sqq_core::problems::{
    kepler_problem, outer_solar_problem, three_body_problem, ProblemSpec, TimeScale,
};
use sqq_core::sigma::SigmaKind;

use crate::solar;

/// A fully-specified run. Serializes losslessly: parsing a config and
/// re-serializing it reproduces the same document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// `kepler`, `three-body`, or `outer-solar`.
    pub problem: String,
    /// Kepler eccentricity.
    pub eccentricity: f64,
    pub variant: String,
    /// Coordinate interpolation degree.
    pub m: usize,
    /// Momentum interpolation degree.
    pub n: usize,
    /// Step size: physical time for fixed-step variants, transformed time
    /// for the adaptive ones (in the problem's time unit).
    pub step: f64,
    /// Either a plain number (problem time units) or `<N>periods`.
    pub duration: String,
    pub out: Option<PathBuf>,
    pub sample_every: usize,
    /// `energy`, `radial`, or `unit`.
    pub sigma_kind: String,
    /// Radial control exponent.
    pub alpha: f64,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    /// `auto`, `on`, or `off`: rescale the energy control to one at the
    /// initial state. `auto` turns it on for the outer Solar System, whose
    /// natural energy scale is far from one, and off elsewhere.
    pub sigma_normalize: String,
    pub solver_epsilon: f64,
    pub solver_k_max: usize,
    /// Re-solve the basis system every step instead of projecting.
    pub no_projection: bool,
    /// Time unit of the outer-solar model: `days` or `years`.
    pub time_unit: String,
    /// Path to an alternative solar-system data file.
    pub solar_data: Option<PathBuf>,
    /// Gauss points per step (default m + n + 1).
    pub gauss_points: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "kepler".into(),
            eccentricity: 0.5,
            variant: "SQQ-P".into(),
            m: 9,
            n: 9,
            step: 0.4,
            duration: "1periods".into(),
            out: None,
            sample_every: 10,
            sigma_kind: "energy".into(),
            alpha: 2.0,
            sigma_lower: 1e-6,
            sigma_upper: 1e2,
            sigma_normalize: "auto".into(),
            solver_epsilon: 1e-12,
            solver_k_max: 50,
            no_projection: false,
            time_unit: "days".into(),
            solar_data: None,
            gauss_points: None,
        }
    }
}

/// A usage-level error: wrong flag values or inconsistent combinations.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

impl RunConfig {
    pub fn variant_name(&self) -> Result<VariantName, UsageError> {
        VariantName::parse(&self.variant)
            .map_err(|_| UsageError(format!("unknown variant `{}`", self.variant)))
    }

    pub fn sigma_kind(&self) -> Result<SigmaKind, UsageError> {
        match self.sigma_kind.as_str() {
            "energy" => Ok(SigmaKind::Energy),
            "radial" => Ok(SigmaKind::Radial { alpha: self.alpha }),
            "unit" => Ok(SigmaKind::Unit),
            other => usage(format!(
                "unknown sigma kind `{other}` (expected energy, radial, or unit)"
            )),
        }
    }

    pub fn time_scale(&self) -> Result<TimeScale, UsageError> {
        TimeScale::parse(&self.time_unit)
            .map_err(|_| UsageError(format!("unknown time unit `{}`", self.time_unit)))
    }

    /// Resolve the `auto` normalization choice against the problem.
    pub fn resolved_normalize(&self) -> Result<bool, UsageError> {
        match self.sigma_normalize.as_str() {
            "on" => Ok(true),
            "off" => Ok(false),
            "auto" => Ok(self.problem == "outer-solar"),
            other => usage(format!(
                "unknown sigma-normalize value `{other}` (expected auto, on, or off)"
            )),
        }
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, UsageError> {
        match self.problem.as_str() {
            "kepler" => {
                if !(0.0..1.0).contains(&self.eccentricity) {
                    return usage(format!(
                        "eccentricity must lie in [0, 1), got {}",
                        self.eccentricity
                    ));
                }
                kepler_problem(self.eccentricity).map_err(|e| UsageError(e.to_string()))
            }
            "three-body" => three_body_problem().map_err(|e| UsageError(e.to_string())),
            "outer-solar" => {
                let file = match &self.solar_data {
                    Some(path) => solar::load_solar_file(path),
                    None => solar::embedded_solar_file(),
                }
                .map_err(|e| UsageError(e.to_string()))?;
                let data = solar::to_core_data(&file);
                outer_solar_problem(&data, self.time_scale()?)
                    .map_err(|e| UsageError(e.to_string()))
            }
            other => usage(format!(
                "unknown problem `{other}` (expected kepler, three-body, or outer-solar)"
            )),
        }
    }

    pub fn build_settings(&self) -> Result<RunSettings, UsageError> {
        let variant = self.variant_name()?;
        let mut settings = RunSettings::new(variant, self.m, self.n, self.step);
        settings.sigma.kind = self.sigma_kind()?;
        settings.sigma.lower = self.sigma_lower;
        settings.sigma.upper = self.sigma_upper;
        settings.sigma.normalize = self.resolved_normalize()?;
        settings.solver_epsilon = self.solver_epsilon;
        settings.solver_k_max = self.solver_k_max;
        settings.sample_every = self.sample_every;
        if self.no_projection {
            settings.use_projection = Some(false);
        }
        settings.gauss_points = self.gauss_points;
        Ok(settings)
    }

    /// Duration in problem time units, resolving the `<N>periods` form.
    pub fn resolve_duration(&self, period: f64) -> Result<f64, UsageError> {
        parse_duration(&self.duration, period)
    }
}

pub fn parse_duration(text: &str, period: f64) -> Result<f64, UsageError> {
    let trimmed = text.trim();
    let value = if let Some(n) = trimmed
        .strip_suffix("periods")
        .or_else(|| trimmed.strip_suffix("period"))
    {
        let n: f64 = n
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("cannot parse duration `{text}`")))?;
        n * period
    } else {
        trimmed
            .parse()
            .map_err(|_| UsageError(format!("cannot parse duration `{text}`")))?
    };
    if !(value > 0.0) {
        return usage(format!("duration must be positive, got `{text}`"));
    }
    Ok(value)
}
