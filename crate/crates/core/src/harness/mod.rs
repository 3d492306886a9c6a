//! Reproducible experiment runner.
//!
//! A run reads one JSON config, builds every problem object (any failure
//! there is a schema error and nothing is written), executes the experiment
//! and writes its artifacts into `<out>/<config stem>/`.
//!
//! | exit code | meaning |
//! |-----------|---------|
//! | 0 | success |
//! | 2 | schema or parameter error |
//! | 3 | numerical failure (divergence, degenerate data, Newton failure) |
//! | 4 | I/O error |

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::graph::{
    constant_rank_probe, dual_rep_check, sum_rule_transform, CoordGraphRep, DualGraphRep,
    PartialSmoothCertificate,
};
use crate::linalg::Vector;
use crate::manifold_opt::{
    covariant_gradient, covariant_hessian, isolation_check, normal_intersection_dim, quadratic_growth,
    second_order_check, transversality_check, extended_subdiff_rep, ManifoldObjective,
};
use crate::prox::subdiff_graph_rep;
use crate::saddle::{monitor_patterns, nondegeneracy_report, solve, SaddleProblem, Trace};
use crate::zoo::matrix_from_rows;

pub use config::{ExperimentConfig, Kind};
use output::{emit_rank_profile, emit_trace_csv, json_bytes, json_float, json_vector, residual_svg, write_atomic};

/// Environment variable that replaces the seed of seeded experiments.
pub const SEED_ENV: &str = "PSM_SEED";

#[derive(Debug, Clone, PartialEq)]
pub enum HarnessError {
    Schema(String),
    Numerical(String),
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Schema(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Schema(_) => "schema",
            HarnessError::Numerical(_) => "numerical",
            HarnessError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            HarnessError::Schema(m) | HarnessError::Numerical(m) | HarnessError::Io(m) => m,
        }
    }
}

impl fmt::Display for HarnessError {
    /// Single line: `error kind=<kind> msg=<message>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error kind={} msg={}", self.kind(), self.message().replace('\n', " "))
    }
}

impl std::error::Error for HarnessError {}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

fn schema(e: Error) -> HarnessError {
    HarnessError::Schema(e.to_string())
}

fn numerical(e: Error) -> HarnessError {
    HarnessError::Numerical(e.to_string())
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Root for artifacts; defaults to the config's `output_dir`, else `out`
    /// next to the config file.
    pub out_dir: Option<PathBuf>,
    pub seed_override: Option<u64>,
    /// Reject configs of any other kind.
    pub expected_kind: Option<Kind>,
}

impl RunOptions {
    /// Reads [`SEED_ENV`] into `seed_override`.
    pub fn with_env_seed(mut self) -> Result<Self, HarnessError> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            let seed = raw
                .trim()
                .parse()
                .map_err(|_| HarnessError::Schema(format!("{SEED_ENV}=`{raw}` is not an unsigned integer")))?;
            self.seed_override = Some(seed);
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: String,
    pub kind: Kind,
    /// SHA-256 of the canonical serialization of the effective config.
    pub digest: String,
    pub wall_time_ms: f64,
    pub verdicts: BTreeMap<String, Value>,
    pub output_dir: String,
    pub artifacts: Vec<String>,
}

/// Parses and validates a config document, applying the seed override.
pub fn parse_config(text: &str, seed_override: Option<u64>) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| HarnessError::Schema(e.to_string()))?;
    if let Some(seed) = seed_override {
        cfg.override_seed(seed);
    }
    cfg.validate().map_err(HarnessError::Schema)?;
    Ok(cfg)
}

/// Hex SHA-256 of the config re-serialized with sorted keys and defaults
/// filled in, so formatting and key order do not matter.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_value(cfg).expect("configs always serialize");
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

/// Peeks at the `kind` field without validating the rest of the document.
pub fn peek_kind(path: &Path) -> Result<Kind, HarnessError> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| HarnessError::Schema(e.to_string()))?;
    value
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| HarnessError::Schema("missing `kind`".into()))?
        .parse()
        .map_err(HarnessError::Schema)
}

/// Runs one experiment config end to end.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunReport, HarnessError> {
    let start = Instant::now();
    let text = fs::read_to_string(config_path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", config_path.display())))?;
    let cfg = parse_config(&text, opts.seed_override)?;
    if let Some(kind) = opts.expected_kind {
        if kind != cfg.kind() {
            return Err(HarnessError::Schema(format!(
                "config is a `{}` experiment, not `{kind}`",
                cfg.kind()
            )));
        }
    }
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let root = match (&opts.out_dir, cfg.output_dir()) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => config_dir.join(dir),
        (None, None) => config_dir.join("out"),
    };
    let stem = config_path
        .file_stem()
        .map_or_else(|| "experiment".to_string(), |s| s.to_string_lossy().into_owned());
    let out = root.join(stem);

    let outcome = match &cfg {
        ExperimentConfig::Probe(c) => run_probe(c, &out)?,
        ExperimentConfig::Solve(c) => run_solve(c, &out, false)?,
        ExperimentConfig::Identify(c) => run_solve(c, &out, true)?,
        ExperimentConfig::Transversal(c) => run_transversal(c, &out)?,
    };
    Ok(RunReport {
        config: config_path.display().to_string(),
        kind: cfg.kind(),
        digest: config_digest(&cfg),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        verdicts: outcome.verdicts,
        output_dir: out.display().to_string(),
        artifacts: outcome.artifacts,
    })
}

/// JSON configs in `dir`, sorted by file name.
pub fn list_configs(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    Ok(paths)
}

/// Runs several configs on a pool of `jobs` threads; results keep the input order.
pub fn run_many(
    paths: &[PathBuf],
    opts: &RunOptions,
    jobs: usize,
) -> Result<Vec<Result<RunReport, HarnessError>>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    Ok(pool.install(|| paths.par_iter().map(|p| run(p, opts)).collect()))
}

struct Outcome {
    verdicts: BTreeMap<String, Value>,
    artifacts: Vec<String>,
}

fn vector(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

fn build_representation(spec: &config::RepresentationSpec) -> Result<ProbeTarget, Error> {
    use config::RepresentationSpec as R;
    Ok(match spec {
        R::Coordinate { h, g } => ProbeTarget::Coord(CoordGraphRep::new(h.build()?, g.build()?)?),
        R::NormalBundle { manifold, x_bar } => {
            let (chart, dual) = manifold.build()?;
            ProbeTarget::Coord(crate::graph::normal_bundle_rep(&dual, &chart, &vector(x_bar))?)
        }
        R::Subdifferential { f, smooth, u_bar, v_bar } => {
            let f = f.build()?;
            let smooth = match smooth {
                Some(s) => s.build_scalar(f.dim())?,
                None => crate::manifold::SmoothMap::zero(f.dim(), 1),
            };
            ProbeTarget::Coord(subdiff_graph_rep(f, &smooth, &vector(u_bar), &vector(v_bar))?.rep)
        }
        R::ExtendedSubdifferential {
            manifold,
            objective,
            u_bar,
            v_bar,
        } => {
            let (chart, dual) = manifold.build()?;
            let f = objective.build_scalar(chart.ambient_dim())?;
            let mo = ManifoldObjective::new(chart, dual, f)?;
            ProbeTarget::Coord(extended_subdiff_rep(&mo, &vector(u_bar), &vector(v_bar))?)
        }
        R::Dual { p, q, u_bar, v_bar } => {
            ProbeTarget::Dual(DualGraphRep::new(p.build()?, q.build()?, vector(u_bar), vector(v_bar))?)
        }
    })
}

enum ProbeTarget {
    Coord(CoordGraphRep),
    Dual(DualGraphRep),
}

fn run_probe(c: &config::ProbeConfig, out: &Path) -> Result<Outcome, HarnessError> {
    let mut target = build_representation(&c.representation).map_err(schema)?;
    if let Some(pert) = &c.perturbation {
        let f = pert.build().map_err(schema)?;
        target = match target {
            ProbeTarget::Coord(rep) => ProbeTarget::Coord(sum_rule_transform(&rep, &f).map_err(schema)?),
            ProbeTarget::Dual(_) => {
                return Err(HarnessError::Schema(
                    "perturbations apply to coordinate representations only".into(),
                ))
            }
        };
    }
    let cert: PartialSmoothCertificate = match &target {
        ProbeTarget::Coord(rep) => constant_rank_probe(rep, c.radius, c.n_samples, c.seed),
        ProbeTarget::Dual(rep) => dual_rep_check(rep, c.radius, c.n_samples, c.seed),
    }
    .map_err(numerical)?;
    let artifacts = emit_rank_profile(&cert, out)?;
    let mut verdicts = BTreeMap::new();
    verdicts.insert("verdict".into(), json!(cert.verdict.to_string()));
    verdicts.insert("graph_dim".into(), json!(cert.graph_dim));
    verdicts.insert("manifold_dim".into(), json!(cert.manifold_dim));
    Ok(Outcome { verdicts, artifacts })
}

fn build_problem(spec: &config::ProblemSpec) -> Result<SaddleProblem, Error> {
    let f = spec.f.build()?;
    let g = spec.g.build()?;
    let (n, m) = (f.dim(), g.dim());
    let p = spec.p.build_scalar(n)?;
    let q = spec.q.build_scalar(m)?;
    let a = if spec.a.is_empty() {
        crate::linalg::Matrix::zeros(m, n)
    } else {
        matrix_from_rows(&spec.a, n)?
    };
    let (f, g): (Arc<_>, Arc<_>) = (f, g);
    match spec.lipschitz {
        Some([lp, lq]) => SaddleProblem::with_lipschitz(f, g, p, q, a, spec.gamma, spec.mu, (lp, lq)),
        None => SaddleProblem::new(f, g, p, q, a, spec.gamma, spec.mu),
    }
}

fn trace_summary(trace: &Trace, pr: &SaddleProblem) -> Value {
    let last = trace.last().expect("traces always hold the initial iterate");
    json!({
        "converged": trace.converged,
        "iterations": last.k,
        "final_residual": json_float(last.residual),
        "identification_index": trace.identification_index,
        "records": trace.records.len(),
        "final_x": json_vector(&last.x),
        "final_y": json_vector(&last.y),
        "final_pattern_x": last.pattern_x.to_string(),
        "final_pattern_y": last.pattern_y.to_string(),
        "step_warnings": pr.warnings(),
    })
}

fn run_solve(c: &config::SolveConfig, out: &Path, identify: bool) -> Result<Outcome, HarnessError> {
    let pr = build_problem(&c.problem).map_err(schema)?;
    let (x0, y0) = (vector(&c.x0), vector(&c.y0));
    if x0.len() != pr.primal_dim() || y0.len() != pr.dual_dim() {
        return Err(HarnessError::Schema(format!(
            "initial point has dimensions ({}, {}), problem has ({}, {})",
            x0.len(),
            y0.len(),
            pr.primal_dim(),
            pr.dual_dim()
        )));
    }
    let trace = solve(&pr, &x0, &y0, c.max_iter, c.tol, c.record_every).map_err(numerical)?;
    let last = trace.last().expect("nonempty trace").clone();

    let mut summary = trace_summary(&trace, &pr);
    if identify {
        let margins = if trace.converged {
            let (mf, mg) = nondegeneracy_report(&pr, &last.x, &last.y, c.tol).map_err(numerical)?;
            json!({"f": json_float(mf), "g": json_float(mg)})
        } else {
            Value::Null
        };
        summary["nondegeneracy_margins"] = margins;
        if c.continuation_steps > 0 {
            let stab = monitor_patterns(&pr, &last.x, &last.y, c.continuation_steps).map_err(numerical)?;
            summary["continuation"] = json!({
                "steps": stab.steps,
                "stable": stab.is_stable(),
                "first_change": stab.first_change,
                "final_residual": json_float(stab.final_residual),
            });
        }
    }

    emit_trace_csv(&trace, &out.join("trace.csv"))?;
    let sidecar = if identify { "identification.json" } else { "summary.json" };
    write_atomic(&out.join(sidecar), &json_bytes(&summary))?;
    let mut artifacts = vec!["trace.csv".to_string(), sidecar.to_string()];
    if c.svg {
        write_atomic(&out.join("residual.svg"), residual_svg(&trace).as_bytes())?;
        artifacts.push("residual.svg".into());
    }

    let mut verdicts = BTreeMap::new();
    verdicts.insert("converged".into(), json!(trace.converged));
    verdicts.insert("final_residual".into(), json_float(last.residual));
    verdicts.insert("identification_index".into(), json!(trace.identification_index));
    if let Some(stable) = summary.get("continuation").and_then(|c| c.get("stable")) {
        verdicts.insert("patterns_stable".into(), stable.clone());
    }
    Ok(Outcome { verdicts, artifacts })
}

fn run_transversal(c: &config::TransversalConfig, out: &Path) -> Result<Outcome, HarnessError> {
    let (chart, dual) = c.manifold.build().map_err(schema)?;
    let f = c.objective.build_scalar(chart.ambient_dim()).map_err(schema)?;
    let mo = ManifoldObjective::new(chart, dual, f).map_err(schema)?;
    let points: Vec<Vector> = c.points.iter().map(|p| vector(p)).collect();
    if let Some(bad) = points.iter().find(|p| p.len() != mo.ambient_dim()) {
        return Err(HarnessError::Schema(format!(
            "critical point has dimension {}, manifold lives in R^{}",
            bad.len(),
            mo.ambient_dim()
        )));
    }

    let mut results = Vec::new();
    let mut all_agree = true;
    for (i, u) in points.iter().enumerate() {
        let grad = covariant_gradient(&mo, u).map_err(numerical)?;
        let hess = covariant_hessian(&mo, u).map_err(numerical)?;
        let second_order = second_order_check(&mo, u).map_err(numerical)?;
        let transversal = transversality_check(&mo, u).map_err(numerical)?;
        all_agree &= second_order == transversal;
        let seed = c.seed.wrapping_add(i as u64);
        let growth = if second_order {
            let g = quadratic_growth(&mo, u, c.growth_radius, c.growth_samples, seed).map_err(numerical)?;
            json!({
                "radius": json_float(g.radius),
                "n_samples": g.n_samples,
                "delta_bound": json_float(g.delta_bound),
                "empirical_delta": json_float(g.empirical_delta),
            })
        } else {
            Value::Null
        };
        let isolation = if transversal {
            let r = isolation_check(&mo, u, c.isolation_radius, c.isolation_samples, seed).map_err(numerical)?;
            json!({
                "radius": json_float(r.radius),
                "n_samples": r.n_samples,
                "other_zeros": r.other_zeros,
                "isolated": r.is_isolated(),
                "min_ratio": json_float(r.min_ratio),
            })
        } else {
            Value::Null
        };
        results.push(json!({
            "point": json_vector(u),
            "covariant_gradient_norm": json_float(grad.norm()),
            "hessian_eigenvalues": hess.eigenvalues().into_iter().map(json_float).collect::<Vec<_>>(),
            "second_order": second_order,
            "transversal": transversal,
            "normal_intersection_dim": normal_intersection_dim(&mo, u).map_err(numerical)?,
            "agree": second_order == transversal,
            "quadratic_growth": growth,
            "isolation": isolation,
        }));
    }
    let doc = json!({ "points": results, "all_agree": all_agree });
    write_atomic(&out.join("transversal.json"), &json_bytes(&doc))?;
    let mut verdicts = BTreeMap::new();
    verdicts.insert("all_agree".into(), json!(all_agree));
    verdicts.insert(
        "second_order".into(),
        Value::Array(results.iter().map(|r| r["second_order"].clone()).collect()),
    );
    verdicts.insert(
        "transversal".into(),
        Value::Array(results.iter().map(|r| r["transversal"].clone()).collect()),
    );
    Ok(Outcome {
        verdicts,
        artifacts: vec!["transversal.json".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_formatting() {
        let a = parse_config(
            r#"{"kind":"probe","representation":{"type":"normal_bundle","manifold":{"name":"circle"},"x_bar":[1]},"radius":0.1,"n_samples":5,"seed":1}"#,
            None,
        )
        .unwrap();
        let b = parse_config(
            r#"{
                "seed": 1, "n_samples": 5, "radius": 0.1, "kind": "probe",
                "representation": {"x_bar": [1.0], "manifold": {"name": "circle", "base_angle": 0.0}, "type": "normal_bundle"}
            }"#,
            None,
        )
        .unwrap();
        assert_eq!(config_digest(&a), config_digest(&b));
        let c = parse_config(
            r#"{"kind":"probe","representation":{"type":"normal_bundle","manifold":{"name":"circle"},"x_bar":[1]},"radius":0.1,"n_samples":5,"seed":2}"#,
            None,
        )
        .unwrap();
        assert_ne!(config_digest(&a), config_digest(&c));
    }

    #[test]
    fn error_lines() {
        let e = HarnessError::Schema("bad\nthing".into());
        assert_eq!(e.to_string(), "error kind=schema msg=bad thing");
        assert_eq!(e.exit_code(), 2);
        assert_eq!(HarnessError::Numerical(String::new()).exit_code(), 3);
        assert_eq!(HarnessError::Io(String::new()).exit_code(), 4);
    }
}
