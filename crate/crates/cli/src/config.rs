//! Experiment configuration: a sectioned key-value (TOML) file with defaults
//! for everything except the chain length and the total duration.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ttgrape_core::{
    ControlAxis, ControlSpec, GrapeOptions, ProductStateSpec, SolverOptions, Spin, SpinChainSpec, TruncationPolicy,
};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Propagate,
    #[default]
    Optimize,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Propagate => "propagate",
            Mode::Optimize => "optimize",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseInit {
    #[default]
    Zero,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlEntry {
    /// 1-based spin index.
    pub site: usize,
    #[serde(default = "default_axis")]
    pub axis: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub sites: usize,
    #[serde(default = "default_coupling")]
    pub jx: f64,
    #[serde(default = "default_coupling")]
    pub jy: f64,
    #[serde(default = "default_coupling")]
    pub jz: f64,
    #[serde(default = "default_controls")]
    pub controls: Vec<ControlEntry>,
    /// Initial product state as a string of `u`/`d`, one per spin; defaults
    /// to the up spin on site 1.
    #[serde(default)]
    pub initial: Option<String>,
    /// Target product state; defaults to the up spin on the last site.
    #[serde(default)]
    pub target: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub duration: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub init: PulseInit,
    #[serde(default)]
    pub seed: u64,
    /// Half-width of the uniform random initial amplitudes.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Pulse file (as written by `optimize`) to start from instead.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_order")]
    pub order: usize,
    /// Rounding tolerance of TT states.
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    /// Stopping tolerance of the space-time solves.
    #[serde(default = "default_truncation")]
    pub tolerance: f64,
    #[serde(default = "default_enrichment")]
    pub enrichment_rank: usize,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    #[serde(default)]
    pub max_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrapeConfig {
    #[serde(default = "default_step")]
    pub initial_step: f64,
    #[serde(default = "default_growth")]
    pub growth: f64,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_target")]
    pub target_infidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub model: ModelConfig,
    pub pulse: PulseConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub grape: GrapeConfig,
}

fn default_axis() -> String {
    "z".into()
}
fn default_coupling() -> f64 {
    TAU
}
fn default_controls() -> Vec<ControlEntry> {
    vec![ControlEntry { site: 1, axis: default_axis() }]
}
fn default_tau() -> f64 {
    0.01
}
fn default_scale() -> f64 {
    0.1
}
fn default_order() -> usize {
    8
}
fn default_truncation() -> f64 {
    1e-6
}
fn default_enrichment() -> usize {
    4
}
fn default_sweeps() -> usize {
    20
}
fn default_step() -> f64 {
    1e-2
}
fn default_growth() -> f64 {
    1.5
}
fn default_shrink() -> f64 {
    0.5
}
fn default_iterations() -> usize {
    100
}
fn default_target() -> f64 {
    1e-3
}
fn default_output() -> PathBuf {
    PathBuf::from("ttgrape-out")
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            order: default_order(),
            truncation: default_truncation(),
            tolerance: default_truncation(),
            enrichment_rank: default_enrichment(),
            max_sweeps: default_sweeps(),
            max_rank: None,
        }
    }
}

impl Default for GrapeConfig {
    fn default() -> Self {
        Self {
            initial_step: default_step(),
            growth: default_growth(),
            shrink: default_shrink(),
            max_iterations: default_iterations(),
            target_infidelity: default_target(),
        }
    }
}

fn invalid(key: &str, msg: impl fmt::Display) -> CliError {
    CliError::Invalid { key: key.to_string(), message: msg.to_string() }
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn parse_state(key: &str, s: &str, sites: usize) -> Result<ProductStateSpec, CliError> {
    let spins = s
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            'u' | 'U' | '1' => Ok(Spin::Up),
            'd' | 'D' | '0' => Ok(Spin::Down),
            other => Err(invalid(key, format!("unexpected spin {other:?}; use u or d"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if spins.len() != sites {
        return Err(invalid(key, format!("{} spins given for a chain of {sites}", spins.len())));
    }
    Ok(ProductStateSpec { spins })
}

impl ExperimentConfig {
    /// Parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_owned(), source: e })?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1));
            CliError::Parse { path: None, line, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Normalised config text; parses back to an identical value.
    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        if m.sites < 2 {
            return Err(invalid("model.sites", format!("a chain needs at least 2 sites, got {}", m.sites)));
        }
        for (key, j) in [("model.jx", m.jx), ("model.jy", m.jy), ("model.jz", m.jz)] {
            if !j.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        if m.controls.is_empty() {
            return Err(invalid("model.controls", "at least one control is required"));
        }
        for c in &m.controls {
            if c.site == 0 || c.site > m.sites {
                return Err(invalid("model.controls.site", format!("{} outside 1..={}", c.site, m.sites)));
            }
            c.axis.parse::<ControlAxis>().map_err(|e| invalid("model.controls.axis", e))?;
        }
        if let Some(s) = &m.initial {
            parse_state("model.initial", s, m.sites)?;
        }
        if let Some(s) = &m.target {
            parse_state("model.target", s, m.sites)?;
        }

        let p = &self.pulse;
        positive("pulse.duration", p.duration)?;
        positive("pulse.tau", p.tau)?;
        positive("pulse.scale", p.scale)?;
        self.intervals()?;

        let s = &self.solver;
        if !(1..=16).contains(&s.order) {
            return Err(invalid("solver.order", format!("must lie in 1..=16, got {}", s.order)));
        }
        positive("solver.truncation", s.truncation)?;
        positive("solver.tolerance", s.tolerance)?;
        if s.max_sweeps == 0 {
            return Err(invalid("solver.max_sweeps", "must be at least 1"));
        }
        if s.max_rank == Some(0) {
            return Err(invalid("solver.max_rank", "must be at least 1"));
        }

        let g = &self.grape;
        positive("grape.initial_step", g.initial_step)?;
        positive("grape.target_infidelity", g.target_infidelity)?;
        if !(g.growth > 1.0 && g.growth.is_finite()) {
            return Err(invalid("grape.growth", format!("must exceed 1, got {}", g.growth)));
        }
        if !(g.shrink > 0.0 && g.shrink < 1.0) {
            return Err(invalid("grape.shrink", format!("must lie in (0, 1), got {}", g.shrink)));
        }
        Ok(())
    }

    /// `N = T/τ`, which must be a positive integer.
    pub fn intervals(&self) -> Result<usize, CliError> {
        let ratio = self.pulse.duration / self.pulse.tau;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid(
                "pulse.tau",
                format!("duration {} is not a whole number of intervals of {}", self.pulse.duration, self.pulse.tau),
            ));
        }
        Ok(n as usize)
    }

    pub fn chain(&self) -> SpinChainSpec {
        let m = &self.model;
        SpinChainSpec {
            sites: m.sites,
            jx: m.jx,
            jy: m.jy,
            jz: m.jz,
            controls: m
                .controls
                .iter()
                .map(|c| ControlSpec { site: c.site, axis: c.axis.parse().expect("validated axis") })
                .collect(),
        }
    }

    pub fn initial_state(&self) -> ProductStateSpec {
        match &self.model.initial {
            Some(s) => parse_state("model.initial", s, self.model.sites).expect("validated state"),
            None => ProductStateSpec::single_up(self.model.sites, 1),
        }
    }

    pub fn target_state(&self) -> ProductStateSpec {
        match &self.model.target {
            Some(s) => parse_state("model.target", s, self.model.sites).expect("validated state"),
            None => ProductStateSpec::single_up(self.model.sites, self.model.sites),
        }
    }

    pub fn solver_options(&self) -> Result<SolverOptions, CliError> {
        let s = &self.solver;
        let mut o = SolverOptions::with_tolerance(s.tolerance).map_err(|e| invalid("solver.tolerance", e))?;
        o.truncation =
            TruncationPolicy::with_cap(s.truncation, s.max_rank).map_err(|e| invalid("solver.truncation", e))?;
        o.enrichment_rank = s.enrichment_rank;
        o.max_sweeps = s.max_sweeps;
        Ok(o)
    }

    pub fn grape_options(&self) -> Result<GrapeOptions, CliError> {
        let g = &self.grape;
        Ok(GrapeOptions {
            initial_step: g.initial_step,
            growth: g.growth,
            shrink: g.shrink,
            max_iterations: g.max_iterations,
            target_infidelity: g.target_infidelity,
            order: self.solver.order,
            solver: self.solver_options()?,
            ..GrapeOptions::default()
        })
    }
}
