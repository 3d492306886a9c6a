//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so that every criterion is
//! evaluated and reported even when an earlier one fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use partsmooth::graph::{constant_rank_probe, normal_bundle_rep, sum_rule_transform, CoordGraphRep, Verdict};
use partsmooth::harness::{list_configs, run, RunOptions};
use partsmooth::linalg::{Matrix, Vector};
use partsmooth::manifold::{fd_jacobian, SmoothMap};
use partsmooth::manifold_opt::{quadratic_growth, second_order_check, transversality_check, ManifoldObjective};
use partsmooth::prox::{subdiff_graph_rep, BoxIndicator, DirectSum, ProxFn, Zero, L1};
use partsmooth::saddle::{pd_step, solve, SaddleProblem};
use partsmooth::sampling::rng;
use partsmooth::zoo::{jacobian_catalog, ManifoldSpec};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn sqrt_counterexample() -> Outcome {
    let start = Instant::now();
    let h = SmoothMap::new(1, 1, |w| v(&[w[0] * w[0]])).with_jacobian(|w| Matrix::from_element(1, 1, 2.0 * w[0]));
    let rep = CoordGraphRep::new(h, SmoothMap::identity(1)).map_err(|e| e.to_string())?;
    let cert = constant_rank_probe(&rep, 0.1, 200, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let samples = &cert.profile.samples;
    let center_zero = samples[0].index == 0 && samples[0].rank == 0;
    let others_one = samples[1..].iter().all(|s| s.rank == 1);
    check(
        cert.verdict == Verdict::RankVaries
            && center_zero
            && others_one
            && samples.len() == 201
            && elapsed < Duration::from_secs(1),
        format!(
            "verdict {}, center rank {}, {} of 200 others rank 1, {:.1} ms",
            cert.verdict,
            samples[0].rank,
            samples[1..].iter().filter(|s| s.rank == 1).count(),
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn intro_problem() -> partsmooth::error::Result<SaddleProblem> {
    let f = DirectSum::new(vec![Arc::new(L1::new(1, 1.0)?) as Arc<dyn ProxFn>, Arc::new(Zero::new(1))])?;
    let p = SmoothMap::new(2, 1, |x| v(&[x[1] * x[1]])).with_jacobian(|x| Matrix::from_row_slice(1, 2, &[0.0, 2.0 * x[1]]));
    let q = SmoothMap::new(1, 1, |y| v(&[0.5 * y[0] * y[0]])).with_jacobian(|y| Matrix::from_element(1, 1, y[0]));
    SaddleProblem::new(
        Arc::new(f),
        Arc::new(Zero::new(1)),
        p,
        q,
        Matrix::from_row_slice(1, 2, &[0.5, 0.5]),
        0.4,
        0.8,
    )
}

fn intro_identification() -> Outcome {
    let start = Instant::now();
    let pr = intro_problem().map_err(|e| e.to_string())?;
    let trace = solve(&pr, &v(&[5.0, 5.0]), &v(&[0.0]), 10_000, 1e-8, 1).map_err(|e| e.to_string())?;
    let last = trace.last().expect("nonempty trace");
    let Some(idx) = trace.identification_index else {
        return Err("no identification index".into());
    };
    let mut checked = 0;
    let mut all_zero = true;
    for r in trace.records.iter().filter(|r| r.k >= idx) {
        all_zero &= r.x[0] == 0.0;
        checked += 1;
    }
    let (mut x, mut y) = (last.x.clone(), last.y.clone());
    for _ in 0..1000 {
        (x, y) = pd_step(&pr, &x, &y).map_err(|e| e.to_string())?;
        all_zero &= x[0] == 0.0;
        checked += 1;
    }
    let elapsed = start.elapsed();
    check(
        trace.converged && last.residual <= 1e-8 && all_zero && checked >= 1000 && elapsed < Duration::from_secs(5),
        format!(
            "residual {:.2e} at k = {}, identified at k = {idx}, x1 == 0 on {checked} iterates: {all_zero}, {:.1} ms",
            last.residual,
            last.k,
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn l1_dimension_theorem() -> Outcome {
    let mut r = rng(2024);
    let f: Arc<dyn ProxFn> = Arc::new(L1::new(5, 1.0).map_err(|e| e.to_string())?);
    let mut results = Vec::new();
    for trial in 0..10 {
        let mut u = Vector::zeros(5);
        let mut w = Vector::zeros(5);
        for i in 0..5 {
            if r.random_bool(0.5) {
                let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                u[i] = sign * r.random_range(0.5..2.0);
                w[i] = sign;
            } else {
                w[i] = r.random_range(-0.9..0.9);
            }
        }
        let support = u.iter().filter(|x| **x != 0.0).count();
        let rep = subdiff_graph_rep(f.clone(), &SmoothMap::zero(5, 1), &u, &w).map_err(|e| format!("trial {trial}: {e}"))?;
        let cert = constant_rank_probe(&rep.rep, 0.1, 50, trial).map_err(|e| e.to_string())?;
        results.push((cert.graph_dim == Some(5) && cert.manifold_dim == Some(support), support));
    }
    check(
        results.iter().all(|r| r.0),
        format!(
            "{} of 10 pairs with graph_dim 5 and manifold_dim = |support| (supports {:?})",
            results.iter().filter(|r| r.0).count(),
            results.iter().map(|r| r.1).collect::<Vec<_>>()
        ),
    )
}

fn normal_bundles() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (name, spec, ambient, dim) in [
        ("circle", ManifoldSpec::Circle { base_angle: 0.0 }, 2, 1),
        ("sphere", ManifoldSpec::Sphere2, 3, 2),
    ] {
        let (chart, dual) = spec.build().map_err(|e| e.to_string())?;
        let rep = normal_bundle_rep(&dual, &chart, &v(&[0.5])).map_err(|e| e.to_string())?;
        let cert = constant_rank_probe(&rep, 0.1, 100, 2).map_err(|e| e.to_string())?;
        ok &= cert.graph_dim == Some(ambient) && cert.manifold_dim == Some(dim);
        details.push(format!("{name}: graph_dim {:?} manifold_dim {:?}", cert.graph_dim, cert.manifold_dim));
    }
    check(ok, details.join(", "))
}

fn random_quadratic_map(r: &mut impl Rng) -> SmoothMap {
    let c = Vector::from_fn(2, |_, _| r.random_range(-1.0..1.0));
    let b = Matrix::from_fn(2, 2, |_, _| r.random_range(-2.0..2.0));
    let qs: Vec<Matrix> = (0..2).map(|_| Matrix::from_fn(2, 2, |_, _| r.random_range(-2.0..2.0))).collect();
    let qs: Vec<Matrix> = qs.into_iter().map(|q| (&q + q.transpose()) * 0.5).collect();
    let (bj, qj) = (b.clone(), qs.clone());
    SmoothMap::new(2, 2, move |u| {
        Vector::from_fn(2, |i, _| c[i] + (b.row(i) * u)[0] + u.dot(&(&qs[i] * u)))
    })
    .with_jacobian(move |u| {
        let mut jac = Matrix::zeros(2, 2);
        for (i, q) in qj.iter().enumerate() {
            let row = (q * u * 2.0 + bj.row(i).transpose()).transpose();
            jac.set_row(i, &row);
        }
        jac
    })
}

fn sum_rule() -> Outcome {
    let h = SmoothMap::linear(Matrix::from_column_slice(2, 1, &[0.0, 1.0]));
    let g = SmoothMap::linear(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]));
    let rep = CoordGraphRep::new(h, g).map_err(|e| e.to_string())?;
    let base = constant_rank_probe(&rep, 0.1, 50, 5).map_err(|e| e.to_string())?;
    let mut r = rng(77);
    let mut preserved = 0;
    for _ in 0..20 {
        let f = random_quadratic_map(&mut r);
        let shifted = sum_rule_transform(&rep, &f).map_err(|e| e.to_string())?;
        let cert = constant_rank_probe(&shifted, 0.1, 50, 5).map_err(|e| e.to_string())?;
        if cert.verdict == base.verdict && cert.graph_dim == base.graph_dim && cert.manifold_dim == base.manifold_dim {
            preserved += 1;
        }
    }
    check(
        preserved == 20,
        format!(
            "{preserved} of 20 perturbations keep ({}, {:?}, {:?})",
            base.verdict, base.graph_dim, base.manifold_dim
        ),
    )
}

/// Minimizer of a convex function on `[lo, hi]`: grid with step 1e-2,
/// then golden-section search on the bracketing cells.
fn grid_refine_min(phi: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let step = 1e-2;
    let n = ((hi - lo) / step).ceil() as usize;
    let best = (0..=n)
        .map(|i| (lo + i as f64 * step).min(hi))
        .min_by(|a, b| phi(*a).total_cmp(&phi(*b)))
        .expect("nonempty grid");
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-10 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if phi(c) <= phi(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn prox_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let gamma = r.random_range(0.05..3.0);
        let x = r.random_range(-5.0..5.0);
        let (closed, brute) = if i % 2 == 0 {
            let lambda = r.random_range(0.1..2.0);
            let f = L1::new(1, lambda).map_err(|e| e.to_string())?;
            let closed = f.prox(gamma, &v(&[x])).map_err(|e| e.to_string())?[0];
            let phi = |t: f64| lambda * t.abs() + (t - x).powi(2) / (2.0 * gamma);
            (closed, grid_refine_min(phi, -6.0, 6.0))
        } else {
            let lo = r.random_range(-3.0..1.0);
            let hi = lo + r.random_range(0.1..3.0);
            let f = BoxIndicator::uniform(1, lo, hi).map_err(|e| e.to_string())?;
            let closed = f.prox(gamma, &v(&[x])).map_err(|e| e.to_string())?[0];
            (closed, grid_refine_min(|t| (t - x).powi(2) / (2.0 * gamma), lo, hi))
        };
        worst = worst.max((closed - brute).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-6 && elapsed < Duration::from_secs(10),
        format!("max |closed form - brute force| = {worst:.2e} over 1000 inputs, {:.1} ms", elapsed.as_secs_f64() * 1e3),
    )
}

fn circle_equivalence() -> Outcome {
    let (chart, dual) = ManifoldSpec::Circle { base_angle: 0.0 }.build().map_err(|e| e.to_string())?;
    let f = SmoothMap::linear(Matrix::from_row_slice(1, 2, &[1.0, 0.0]));
    let mo = ManifoldObjective::new(chart, dual, f).map_err(|e| e.to_string())?;
    let (min, max) = (v(&[-1.0, 0.0]), v(&[1.0, 0.0]));
    let so_min = second_order_check(&mo, &min).map_err(|e| e.to_string())?;
    let tr_min = transversality_check(&mo, &min).map_err(|e| e.to_string())?;
    let so_max = second_order_check(&mo, &max).map_err(|e| e.to_string())?;
    let tr_max = transversality_check(&mo, &max).map_err(|e| e.to_string())?;
    let growth = quadratic_growth(&mo, &min, 0.1, 1000, 1).map_err(|e| e.to_string())?;
    check(
        so_min && tr_min && so_max == tr_max && growth.holds_with(0.2),
        format!(
            "minimizer: second-order {so_min}, transversal {tr_min}, sampled delta {:.4}; \
             maximizer: second-order {so_max}, transversal {tr_max}",
            growth.empirical_delta
        ),
    )
}

fn jacobian_checks() -> Outcome {
    let mut worst = (0.0, String::new());
    let catalog = jacobian_catalog();
    for (name, map, x) in &catalog {
        let exact = map.jacobian(x).map_err(|e| e.to_string())?;
        let fd = fd_jacobian(map, x).map_err(|e| e.to_string())?;
        let rel = (&exact - &fd).norm() / exact.norm().max(1.0);
        if rel >= worst.0 {
            worst = (rel, name.clone());
        }
    }
    check(
        worst.0 <= 1e-5,
        format!("{} maps, worst relative error {:.2e} ({})", catalog.len(), worst.0, worst.1),
    )
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("readable output dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_path_buf();
                files.insert(rel, fs::read(&path).expect("readable artifact"));
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let configs = list_configs(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")).map_err(|e| e.to_string())?;
    let runs: Vec<_> = (0..2)
        .map(|_| -> Result<_, String> {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let opts = RunOptions {
                out_dir: Some(dir.path().to_path_buf()),
                ..RunOptions::default()
            };
            for c in &configs {
                run(c, &opts).map_err(|e| format!("{}: {e}", c.display()))?;
            }
            Ok(read_tree(dir.path()))
        })
        .collect::<Result<_, _>>()?;
    let differing: Vec<_> = runs[0]
        .iter()
        .filter(|(path, bytes)| runs[1].get(*path) != Some(bytes))
        .map(|(path, _)| path.display().to_string())
        .collect();
    check(
        differing.is_empty() && runs[0].len() == runs[1].len() && !runs[0].is_empty(),
        format!(
            "{} configs, {} files per run, {} differing {:?}",
            configs.len(),
            runs[0].len(),
            differing.len(),
            differing
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("sqrt counterexample rank profile", sqrt_counterexample),
        ("intro example identification", intro_identification),
        ("l1 subdifferential dimensions", l1_dimension_theorem),
        ("normal bundle dimensions", normal_bundles),
        ("sum rule invariance", sum_rule),
        ("prox closed forms vs brute force", prox_oracle),
        ("second-order / transversality equivalence", circle_equivalence),
        ("analytic vs finite-difference Jacobians", jacobian_checks),
        ("byte-identical config outputs", determinism),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        match criterion() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
