//! Run configuration: TOML file sections `[physics]`, `[numerics]`,
//! `[guess]`, `[sweep]`, `[output]`, overridable from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bfstar_core::canm::{InitialGuess, MuTreatment, SolveOptions};
use bfstar_core::prelude::{Grading, PhysicalParams, StarModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub guess: Guess,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub sigma_c: f64,
    pub mu_c: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub b: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            sigma_c: 0.8,
            mu_c: 1.0,
            lambda: 0.01,
            gamma: 1.0,
            b: 1.0,
        }
    }
}

impl Physics {
    pub fn params(&self) -> PhysicalParams {
        PhysicalParams {
            sigma_c: self.sigma_c,
            mu_c: self.mu_c,
            lambda: self.lambda,
            gamma: self.gamma,
            b: self.b,
        }
    }

    pub fn model(&self) -> StarModel {
        StarModel::new(self.params())
    }

    pub fn get(&self, p: SweepParameter) -> f64 {
        match p {
            SweepParameter::SigmaC => self.sigma_c,
            SweepParameter::MuC => self.mu_c,
            SweepParameter::Lambda => self.lambda,
            SweepParameter::Gamma => self.gamma,
            SweepParameter::B => self.b,
        }
    }

    pub fn with(mut self, p: SweepParameter, value: f64) -> Self {
        match p {
            SweepParameter::SigmaC => self.sigma_c = value,
            SweepParameter::MuC => self.mu_c = value,
            SweepParameter::Lambda => self.lambda = value,
            SweepParameter::Gamma => self.gamma = value,
            SweepParameter::B => self.b = value,
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.sigma_c == 0.0 {
            return Err(CliError::Config(
                "sigma_c = 0 (pure fermion star) is not supported: the boson frequency \
                 is then undetermined and the eigenvalue system is singular"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n: usize,
    pub x_inf: f64,
    pub grading: GradingSpec,
    pub eps: f64,
    pub max_iter: usize,
    pub tau_min: f64,
    pub mu: MuSpec,
}

impl Default for Numerics {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            n: 2048,
            x_inf: 128.0,
            grading: GradingSpec(Grading::Uniform),
            eps: o.eps,
            max_iter: o.max_iter,
            tau_min: o.tau_min,
            mu: MuSpec(o.mu),
        }
    }
}

impl Numerics {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            eps: self.eps,
            max_iter: self.max_iter,
            tau_min: self.tau_min,
            mu: self.mu.0,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.eps > 0.0) {
            return Err(CliError::Config(format!("numerics.eps must be positive, got {}", self.eps)));
        }
        if !(self.tau_min > 0.0 && self.tau_min <= 1.0) {
            return Err(CliError::Config(format!("numerics.tau_min must lie in (0, 1], got {}", self.tau_min)));
        }
        if self.max_iter == 0 {
            return Err(CliError::Config("numerics.max_iter must be at least 1".into()));
        }
        bfstar_core::prelude::build_grid(self.n, self.x_inf, self.grading.0)
            .map(|_| ())
            .map_err(|e| CliError::Config(format!("numerics: {e}")))
    }
}

/// Textual grading: `uniform`, `surface` or `condensed:<strength>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradingSpec(pub Grading);

impl FromStr for GradingSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "uniform" => Ok(Self(Grading::Uniform)),
            "surface" => Ok(Self(Grading::Surface)),
            other => match other.strip_prefix("condensed:") {
                Some(v) => v
                    .parse::<f64>()
                    .map(|s| Self(Grading::Condensed(s)))
                    .map_err(|e| format!("bad condensation strength {v:?}: {e}")),
                None => Err(format!("unknown grading {other:?} (expected uniform, surface or condensed:<s>)")),
            },
        }
    }
}

impl fmt::Display for GradingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Grading::Uniform => write!(f, "uniform"),
            Grading::Surface => write!(f, "surface"),
            Grading::Condensed(s) => write!(f, "condensed:{s}"),
        }
    }
}

/// Textual Fermi momentum treatment: `frozen`, `linearized`, `hybrid` or
/// `hybrid:<switch>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSpec(pub MuTreatment);

impl FromStr for MuSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "frozen" => Ok(Self(MuTreatment::Frozen)),
            "linearized" => Ok(Self(MuTreatment::Linearized)),
            "hybrid" => Ok(Self(MuTreatment::default())),
            other => match other.strip_prefix("hybrid:") {
                Some(v) => v
                    .parse::<f64>()
                    .map(|switch_below| Self(MuTreatment::Hybrid { switch_below }))
                    .map_err(|e| format!("bad hybrid switch {v:?}: {e}")),
                None => Err(format!(
                    "unknown mu treatment {other:?} (expected frozen, linearized, hybrid or hybrid:<delta>)"
                )),
            },
        }
    }
}

impl fmt::Display for MuSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            MuTreatment::Frozen => write!(f, "frozen"),
            MuTreatment::Linearized => write!(f, "linearized"),
            MuTreatment::Hybrid { switch_below } => write!(f, "hybrid:{switch_below}"),
        }
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(GradingSpec);
string_serde!(MuSpec);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Guess {
    pub nu_c: f64,
    pub phi_c: f64,
    pub width: f64,
    pub r_s: f64,
    pub omega: f64,
}

impl Default for Guess {
    fn default() -> Self {
        let g = InitialGuess::default();
        Self {
            nu_c: g.nu_c,
            phi_c: g.phi_c,
            width: g.width,
            r_s: g.r_s,
            omega: g.omega,
        }
    }
}

impl From<Guess> for InitialGuess {
    fn from(g: Guess) -> Self {
        Self {
            nu_c: g.nu_c,
            phi_c: g.phi_c,
            width: g.width,
            r_s: g.r_s,
            omega: g.omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    SigmaC,
    MuC,
    Lambda,
    Gamma,
    B,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::SigmaC => "sigma_c",
            Self::MuC => "mu_c",
            Self::Lambda => "lambda",
            Self::Gamma => "gamma",
            Self::B => "b",
        }
    }
}

impl FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::SigmaC, Self::MuC, Self::Lambda, Self::Gamma, Self::B]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown sweep parameter {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    /// Magnitude; the direction follows `start -> stop`.
    pub step: f64,
    /// Independent cold starts in parallel instead of continuation.
    #[serde(default)]
    pub parallel: bool,
    /// Halvings of the continuation step tried before a point is given up.
    #[serde(default = "default_bisections")]
    pub max_bisections: u32,
    /// Consecutive failed points after which the sweep stops.
    #[serde(default = "default_failures")]
    pub max_failures: u32,
}

fn default_bisections() -> u32 {
    4
}

fn default_failures() -> u32 {
    3
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, start: f64, stop: f64, step: f64) -> Self {
        Self {
            parameter,
            start,
            stop,
            step,
            parallel: false,
            max_bisections: default_bisections(),
            max_failures: default_failures(),
        }
    }

    /// Target values from `start` to `stop` inclusive.
    pub fn values(&self) -> Vec<f64> {
        let span = self.stop - self.start;
        let count = (span.abs() / self.step + 1e-9).floor() as usize;
        let dir = span.signum();
        let mut v: Vec<f64> = (0..=count).map(|k| self.start + dir * self.step * k as f64).collect();
        if (v[count] - self.stop).abs() > 1e-9 * self.step {
            v.push(self.stop);
        } else {
            v[count] = self.stop;
        }
        v
    }

    pub fn validate(&self, base: &Physics) -> Result<(), CliError> {
        if ![self.start, self.stop, self.step].iter().all(|v| v.is_finite()) {
            return Err(CliError::Config("sweep bounds and step must be finite".into()));
        }
        if !(self.step > 0.0) {
            return Err(CliError::Config(format!("sweep.step must be positive, got {}", self.step)));
        }
        for v in self.values() {
            base.with(self.parameter, v).validate().map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("sweep point {} = {v}: {m}", self.parameter.name())),
                other => other,
            })?;
        }
        Ok(())
    }
}

impl FromStr for SweepSpec {
    type Err = String;

    /// `parameter:start:stop:step`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [name, start, stop, step] = parts[..] else {
            return Err(format!("expected parameter:start:stop:step, got {s:?}"));
        };
        let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Self::new(name.parse()?, num(start)?, num(stop)?, num(step)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub directory: PathBuf,
    pub emit_plots: bool,
    /// Write a profile per sweep point.
    pub sweep_profiles: bool,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("bfstar-out"),
            emit_plots: false,
            sweep_profiles: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The sections that determine a single solution.
    pub fn problem_toml(&self) -> String {
        #[derive(Serialize)]
        struct Problem<'a> {
            physics: &'a Physics,
            numerics: &'a Numerics,
            guess: &'a Guess,
        }
        toml::to_string(&Problem {
            physics: &self.physics,
            numerics: &self.numerics,
            guess: &self.guess,
        })
        .expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.physics.validate()?;
        self.numerics.validate()?;
        if let Some(s) = &self.sweep {
            s.validate(&self.physics)?;
        }
        Ok(())
    }
}
