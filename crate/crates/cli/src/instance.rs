//! Instance files: a TOML document with `[model]`, `[targets]`, optional
//! `[options]` and optional `[sweep]` tables. See `docs/instance-format.md`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use vceo::{DistortionTriple, SourceModel};

use crate::range::{parse_range, SweepRange};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Syntax(String),
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> InstanceError {
    InstanceError::Invalid { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sigma_s2: f64,
    pub sigma_n1_2: f64,
    pub sigma_n2_2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsSection {
    pub d1: f64,
    pub d2: f64,
    pub d0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Nats,
    Bits,
}

impl Unit {
    pub fn scale(self, nats: f64) -> f64 {
        match self {
            Unit::Nats => nats,
            Unit::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Unit::Nats => "nats",
            Unit::Bits => "bits",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    /// Optimizer convergence tolerance.
    pub tol: f64,
    pub starts: usize,
    pub grid: usize,
    pub refinements: usize,
    pub seed: u64,
    pub unit: Unit,
    /// `verify` passes the identity check when the difference is below this.
    pub verify_tol: f64,
    /// `verify` passes the optimizer check when the relative gap is at most this.
    pub optimizer_rel_tol: f64,
    /// Monte-Carlo sample count.
    pub samples: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol: 1e-7,
            starts: 16,
            grid: 64,
            refinements: 2,
            seed: 0,
            unit: Unit::Nats,
            verify_tol: 1e-9,
            optimizer_rel_tol: 1e-3,
            samples: 1_000_000,
        }
    }
}

/// Which instance field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "D0")]
    D0,
    #[serde(rename = "D1")]
    D1,
    #[serde(rename = "D2")]
    D2,
    #[serde(rename = "sigma_s2")]
    SigmaS2,
    #[serde(rename = "sigma_n1_2")]
    SigmaN1,
    #[serde(rename = "sigma_n2_2")]
    SigmaN2,
}

impl SweepVar {
    pub const ALL: [SweepVar; 6] =
        [SweepVar::D0, SweepVar::D1, SweepVar::D2, SweepVar::SigmaS2, SweepVar::SigmaN1, SweepVar::SigmaN2];

    pub fn name(self) -> &'static str {
        match self {
            SweepVar::D0 => "D0",
            SweepVar::D1 => "D1",
            SweepVar::D2 => "D2",
            SweepVar::SigmaS2 => "sigma_s2",
            SweepVar::SigmaN1 => "sigma_n1_2",
            SweepVar::SigmaN2 => "sigma_n2_2",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepVar::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = SweepVar::ALL.iter().map(|v| v.name()).collect();
                format!("unknown sweep variable `{s}`; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub var: SweepVar,
    /// `start:end`.
    pub range: String,
    pub steps: usize,
}

impl SweepSection {
    pub fn parsed_range(&self) -> Result<SweepRange, InstanceError> {
        parse_range(&self.range).map_err(|e| invalid("sweep.range", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub model: ModelSection,
    pub targets: TargetsSection,
    #[serde(default)]
    pub options: Options,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl InstanceSpec {
    pub fn new(model: SourceModel, targets: DistortionTriple) -> Self {
        InstanceSpec {
            model: ModelSection {
                sigma_s2: model.sigma_s2,
                sigma_n1_2: model.sigma_n1_2,
                sigma_n2_2: model.sigma_n2_2,
            },
            targets: TargetsSection { d1: targets.d1, d2: targets.d2, d0: targets.d0 },
            options: Options::default(),
            sweep: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        let spec: InstanceSpec = toml::from_str(text).map_err(|e| InstanceError::Syntax(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, InstanceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InstanceError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// The canonical text form: every table and option written out.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("instance fields are plain numbers and strings")
    }

    pub fn source_model(&self) -> SourceModel {
        SourceModel { sigma_s2: self.model.sigma_s2, sigma_n1_2: self.model.sigma_n1_2, sigma_n2_2: self.model.sigma_n2_2 }
    }

    pub fn distortion_targets(&self) -> DistortionTriple {
        DistortionTriple { d1: self.targets.d1, d2: self.targets.d2, d0: self.targets.d0 }
    }

    pub fn get(&self, var: SweepVar) -> f64 {
        match var {
            SweepVar::D0 => self.targets.d0,
            SweepVar::D1 => self.targets.d1,
            SweepVar::D2 => self.targets.d2,
            SweepVar::SigmaS2 => self.model.sigma_s2,
            SweepVar::SigmaN1 => self.model.sigma_n1_2,
            SweepVar::SigmaN2 => self.model.sigma_n2_2,
        }
    }

    pub fn with(&self, var: SweepVar, value: f64) -> Self {
        let mut out = self.clone();
        match var {
            SweepVar::D0 => out.targets.d0 = value,
            SweepVar::D1 => out.targets.d1 = value,
            SweepVar::D2 => out.targets.d2 = value,
            SweepVar::SigmaS2 => out.model.sigma_s2 = value,
            SweepVar::SigmaN1 => out.model.sigma_n1_2 = value,
            SweepVar::SigmaN2 => out.model.sigma_n2_2 = value,
        }
        out
    }

    /// Field-level checks that do not depend on the problem being feasible.
    pub fn check(&self) -> Result<(), InstanceError> {
        let positive = [
            ("model.sigma_s2", self.model.sigma_s2),
            ("model.sigma_n1_2", self.model.sigma_n1_2),
            ("model.sigma_n2_2", self.model.sigma_n2_2),
            ("targets.d1", self.targets.d1),
            ("targets.d2", self.targets.d2),
            ("targets.d0", self.targets.d0),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        let o = &self.options;
        if !(o.tol.is_finite() && o.tol > 0.0) {
            return Err(invalid("options.tol", format!("must be finite and > 0, got {}", o.tol)));
        }
        if !(o.verify_tol.is_finite() && o.verify_tol >= 0.0) {
            return Err(invalid("options.verify_tol", format!("must be finite and >= 0, got {}", o.verify_tol)));
        }
        if !(o.optimizer_rel_tol.is_finite() && o.optimizer_rel_tol >= 0.0) {
            return Err(invalid(
                "options.optimizer_rel_tol",
                format!("must be finite and >= 0, got {}", o.optimizer_rel_tol),
            ));
        }
        if o.starts == 0 {
            return Err(invalid("options.starts", "must be at least 1"));
        }
        if o.grid < 2 {
            return Err(invalid("options.grid", format!("must be at least 2, got {}", o.grid)));
        }
        if o.samples < 2 {
            return Err(invalid("options.samples", format!("must be at least 2, got {}", o.samples)));
        }
        if let Some(sweep) = &self.sweep {
            sweep.parsed_range()?;
            if sweep.steps == 0 {
                return Err(invalid("sweep.steps", "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Ordering checks on the targets: `D0 < min(D1, D2)`, `max(D1, D2) < sigma_S^2`.
    pub fn check_targets(&self) -> Result<(), InstanceError> {
        self.distortion_targets()
            .validate_for(&self.source_model())
            .map_err(|e| invalid("targets", e.to_string()))
    }
}
