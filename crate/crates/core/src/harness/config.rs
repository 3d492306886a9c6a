//! Experiment configuration documents (JSON).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::zoo::{ManifoldSpec, MapSpec, ProxSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Probe,
    Solve,
    Identify,
    Transversal,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Probe => "probe",
            Kind::Solve => "solve",
            Kind::Identify => "identify",
            Kind::Transversal => "transversal",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "probe" => Ok(Kind::Probe),
            "solve" => Ok(Kind::Solve),
            "identify" => Ok(Kind::Identify),
            "transversal" => Ok(Kind::Transversal),
            other => Err(format!("unknown experiment kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Probe(ProbeConfig),
    Solve(SolveConfig),
    Identify(SolveConfig),
    Transversal(TransversalConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> Kind {
        match self {
            ExperimentConfig::Probe(_) => Kind::Probe,
            ExperimentConfig::Solve(_) => Kind::Solve,
            ExperimentConfig::Identify(_) => Kind::Identify,
            ExperimentConfig::Transversal(_) => Kind::Transversal,
        }
    }

    pub fn output_dir(&self) -> Option<&str> {
        match self {
            ExperimentConfig::Probe(c) => c.output_dir.as_deref(),
            ExperimentConfig::Solve(c) | ExperimentConfig::Identify(c) => c.output_dir.as_deref(),
            ExperimentConfig::Transversal(c) => c.output_dir.as_deref(),
        }
    }

    /// Replaces the sampling seed, for experiments that have one.
    pub fn override_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Probe(c) => c.seed = seed,
            ExperimentConfig::Transversal(c) => c.seed = seed,
            ExperimentConfig::Solve(_) | ExperimentConfig::Identify(_) => {}
        }
    }

    /// Range checks that the type system does not capture. Dimension checks
    /// happen when the problem objects are built.
    pub fn validate(&self) -> Result<(), String> {
        fn positive(name: &str, x: f64) -> Result<(), String> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive and finite, got {x}"))
            }
        }
        fn at_least_one(name: &str, n: usize) -> Result<(), String> {
            if n >= 1 {
                Ok(())
            } else {
                Err(format!("{name} must be at least 1"))
            }
        }
        match self {
            ExperimentConfig::Probe(c) => {
                positive("radius", c.radius)?;
                at_least_one("n_samples", c.n_samples)
            }
            ExperimentConfig::Solve(c) | ExperimentConfig::Identify(c) => {
                positive("gamma", c.problem.gamma)?;
                positive("mu", c.problem.mu)?;
                positive("tol", c.tol)?;
                at_least_one("max_iter", c.max_iter)?;
                at_least_one("record_every", c.record_every)?;
                if let Some([lp, lq]) = c.problem.lipschitz {
                    if !(lp >= 0.0 && lq >= 0.0) {
                        return Err("lipschitz constants must be non-negative".into());
                    }
                }
                Ok(())
            }
            ExperimentConfig::Transversal(c) => {
                if c.points.is_empty() {
                    return Err("points must list at least one critical point".into());
                }
                positive("growth_radius", c.growth_radius)?;
                positive("isolation_radius", c.isolation_radius)?;
                at_least_one("growth_samples", c.growth_samples)?;
                at_least_one("isolation_samples", c.isolation_samples)
            }
        }
    }
}

/// Graph representations that can be probed for constant rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RepresentationSpec {
    /// `(w, z) ↦ (H(w), G(w, z))`.
    Coordinate { h: MapSpec, g: MapSpec },
    /// Normal bundle of a built-in manifold around `(ū, ∇P(ū)ᵀ x̄)`.
    NormalBundle { manifold: ManifoldSpec, x_bar: Vec<f64> },
    /// Subdifferential of `f + smooth` around `(ū, v̄)`.
    Subdifferential {
        f: ProxSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smooth: Option<MapSpec>,
        u_bar: Vec<f64>,
        v_bar: Vec<f64>,
    },
    /// Subdifferential of a smooth objective restricted to a manifold.
    ExtendedSubdifferential {
        manifold: ManifoldSpec,
        objective: MapSpec,
        u_bar: Vec<f64>,
        v_bar: Vec<f64>,
    },
    /// `{P(u) = 0, Q(u, v) = 0}` around `(ū, v̄)`.
    Dual {
        p: MapSpec,
        q: MapSpec,
        u_bar: Vec<f64>,
        v_bar: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub representation: RepresentationSpec,
    /// Smooth `F: U -> V` added to the mapping before probing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<MapSpec>,
    pub radius: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub f: ProxSpec,
    pub g: ProxSpec,
    pub p: MapSpec,
    pub q: MapSpec,
    /// `m × n` rows; an empty list is the zero matrix.
    pub a: Vec<Vec<f64>>,
    pub gamma: f64,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<[f64; 2]>,
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub problem: ProblemSpec,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub max_iter: usize,
    pub tol: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Extra iterations run past the final iterate to check that the
    /// identified patterns persist.
    #[serde(default)]
    pub continuation_steps: usize,
    #[serde(default)]
    pub svg: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_growth_radius() -> f64 {
    0.1
}

fn default_growth_samples() -> usize {
    1000
}

fn default_isolation_radius() -> f64 {
    0.05
}

fn default_isolation_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransversalConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub manifold: ManifoldSpec,
    pub objective: MapSpec,
    /// Critical points of the objective on the manifold.
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_growth_radius")]
    pub growth_radius: f64,
    #[serde(default = "default_growth_samples")]
    pub growth_samples: usize,
    #[serde(default = "default_isolation_radius")]
    pub isolation_radius: f64,
    #[serde(default = "default_isolation_samples")]
    pub isolation_samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}
