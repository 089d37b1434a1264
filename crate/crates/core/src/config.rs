//! Experiment configuration files.
//!
//! A config is a JSON object naming the experiment and, optionally, its
//! parameters, output directory and table format. Unknown keys anywhere are
//! rejected. Every parameter has a default, so `{"experiment": "growth"}` is
//! a complete config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counterexample::{AssemblySchedule, SampleOptions};
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Figure2,
    Growth,
    Sample,
    Assemble,
    Weaktype,
    Verify,
    Sumrule,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Figure2 => "figure2",
            Experiment::Growth => "growth",
            Experiment::Sample => "sample",
            Experiment::Assemble => "assemble",
            Experiment::Weaktype => "weaktype",
            Experiment::Verify => "verify",
            Experiment::Sumrule => "sumrule",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Figure2Params {
    pub x_end: f64,
    pub xi: f64,
    pub eta_top: f64,
}

impl Default for Figure2Params {
    fn default() -> Self {
        Figure2Params { x_end: 7.0, xi: 2.0, eta_top: 100.0 }
    }
}

/// Well-separated bumps `Q_{ν,R}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparatedParams {
    pub nu: usize,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub base: PotentialSpec,
    pub nu_list: Vec<usize>,
    pub separated: Option<SeparatedParams>,
    pub nu: usize,
    pub delta: f64,
    /// Extra `δ` values for the scaling fit of `sample`.
    pub deltas: Vec<f64>,
    pub xi_window: [f64; 2],
    pub n_xi: usize,
    pub tol: f64,
    pub sample: SampleOptions,
    pub schedule: AssemblySchedule,
    /// Oscillation threshold constant for `assemble`; fitted from a single
    /// sample when absent.
    pub assembly_c: Option<f64>,
    pub weak_nu_list: Vec<usize>,
    pub weak_c: f64,
    pub figure2: Figure2Params,
    pub seed: u64,
    pub trials: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            base: PotentialSpec::standard_bump(),
            nu_list: vec![8, 16, 32, 64, 128],
            separated: None,
            nu: 64,
            delta: 0.5,
            deltas: Vec::new(),
            xi_window: [0.5, 1.0],
            n_xi: 16,
            tol: 1e-10,
            sample: SampleOptions::default(),
            schedule: AssemblySchedule::default(),
            assembly_c: None,
            weak_nu_list: vec![8, 16, 32, 64],
            weak_c: 0.1,
            figure2: Figure2Params::default(),
            seed: 20_190_615,
            trials: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig { experiment, params: Params::default(), out_dir: None, format: Format::default() }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        positive(p.tol, "tol")?;
        positive(p.sample.tol, "sample.tol")?;
        positive(p.sample.template_scale, "sample.template_scale")?;
        positive(p.sample.direct_limit, "sample.direct_limit")?;
        if !(p.sample.spacing_factor >= 1.0) {
            return Err(Error::Config(format!("sample.spacing_factor must be at least 1, got {}", p.sample.spacing_factor)));
        }
        positive(p.weak_c, "weak_c")?;
        if let Some(c) = p.assembly_c {
            positive(c, "assembly_c")?;
        }
        let [lo, hi] = p.xi_window;
        if !(0.5 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!("xi_window [{lo}, {hi}] must lie in [0.5, 1]")));
        }
        if !(0.0..1.0).contains(&p.delta) || p.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(Error::Config("δ values must lie in [0, 1)".into()));
        }
        if p.n_xi == 0 || p.trials == 0 || p.nu < 2 {
            return Err(Error::Config("n_xi and trials must be positive and nu at least 2".into()));
        }
        if let Some(s) = &p.separated {
            if s.nu == 0 || !(s.r >= 0.0) {
                return Err(Error::Config("separated.nu must be positive and separated.r nonnegative".into()));
            }
        }
        positive(p.figure2.x_end, "figure2.x_end")?;
        positive(p.figure2.eta_top, "figure2.eta_top")?;
        p.base.validate().map_err(|e| Error::Config(format!("base: {e}")))?;
        Ok(())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.params.xi_window[0], self.params.xi_window[1])
    }
}
