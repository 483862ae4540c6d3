//! Deterministic, Monte Carlo, multilevel and multi-fidelity experiments.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use kinuq_core::uq::{
    draw_samples, draw_samples_at, err_mean_l2, fidelity_coeffs, mc_estimate, mlmc_estimate, multifidelity_eval,
    scaled_uniform_sum_rule, select_points, variance_field, Fidelity, FieldSet, LevelSpec, MlmcEstimate, MlmcOptions,
    Quantity, RandomSample, SnapshotBasis, HELD_OUT_STREAM,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::cases::{build_case, random_dim, random_factors};
use crate::config::{ExperimentConfig, Solver};
use crate::model::{run_case, RunOutput};
use crate::output::{fmt_f64, parse_csv, sha256_hex, write_file};

/// Mean fields with optional spread and error columns.
#[derive(Debug, Clone)]
pub struct FieldReport {
    pub x: Vec<f64>,
    pub mean: FieldSet,
    pub std: Option<FieldSet>,
    pub err: Option<FieldSet>,
}

fn centres(cfg: &ExperimentConfig, n_cells: usize) -> Result<Vec<f64>> {
    Ok(build_case(cfg, n_cells, None)?.spatial.centers())
}

fn thresholds(cfg: &ExperimentConfig) -> kinuq_core::hybrid::CriterionThresholds {
    kinuq_core::hybrid::CriterionThresholds { eta0: cfg.thresholds.eta0, delta0: cfg.thresholds.delta0 }
}

/// One realization at `n_cells` with the given solver.
pub fn run_sample(cfg: &ExperimentConfig, solver: Solver, n_cells: usize, z: Option<&[f64]>) -> Result<RunOutput> {
    let case = build_case(cfg, n_cells, z)?;
    run_case(&case, solver, &thresholds(cfg), cfg.history)
}

fn pointwise_abs(mean: &FieldSet, reference: Option<&FieldSet>) -> Result<Option<FieldSet>> {
    let Some(r) = reference else { return Ok(None) };
    let r = r.restrict_to(mean.n_cells()).context("reference grid does not nest with the estimate")?;
    let v = mean.values().iter().zip(r.values()).map(|(a, b)| (a - b).abs()).collect();
    Ok(Some(mean.with_values(v)?))
}

fn std_from(mean: &FieldSet, mean_sq: &[f64]) -> Result<(FieldSet, usize)> {
    let var = variance_field(mean.values(), mean_sq)?;
    let sd = var.values.iter().map(|v| v.sqrt()).collect();
    Ok((mean.with_values(sd)?, var.clipped))
}

pub fn deterministic(cfg: &ExperimentConfig) -> Result<(FieldReport, RunOutput)> {
    let run = run_sample(cfg, cfg.solver, cfg.nx(), None)?;
    let report = FieldReport { x: centres(cfg, cfg.nx())?, mean: run.fields.clone(), std: None, err: None };
    Ok((report, run))
}

#[derive(Debug, Clone)]
pub struct McOutcome {
    pub report: FieldReport,
    pub samples: Vec<FieldSet>,
    pub clipped: usize,
    pub cost_seconds: f64,
}

/// Plain Monte Carlo over `sampling.samples` draws at the configured mesh.
pub fn monte_carlo(cfg: &ExperimentConfig, reference: Option<&FieldSet>) -> Result<McOutcome> {
    let zs = draw_samples(cfg.sampling.samples, random_dim(cfg.case), cfg.seed);
    let runs: Vec<RunOutput> = zs
        .par_iter()
        .map(|z| run_sample(cfg, cfg.solver, cfg.nx(), Some(&z.z)))
        .collect::<Result<_>>()?;
    let samples: Vec<FieldSet> = runs.iter().map(|r| r.fields.clone()).collect();
    let vals: Vec<&[f64]> = samples.iter().map(|s| s.values()).collect();
    let mean = samples[0].with_values(mc_estimate(&vals)?)?;
    let sq: Vec<Vec<f64>> = vals.iter().map(|v| v.iter().map(|x| x * x).collect()).collect();
    let (std, clipped) = std_from(&mean, &mc_estimate(&sq)?)?;
    let err = pointwise_abs(&mean, reference)?;
    Ok(McOutcome {
        report: FieldReport { x: centres(cfg, cfg.nx())?, mean, std: Some(std), err },
        samples,
        clipped,
        cost_seconds: runs.iter().map(|r| r.wall_seconds).sum(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub n_cells: usize,
    pub dt: f64,
    pub samples: usize,
    pub runs: usize,
    pub cost_seconds: f64,
    pub lambda_min: f64,
    pub lambda_mean: f64,
    pub lambda_max: f64,
    pub degenerate: usize,
}

#[derive(Debug, Clone)]
pub struct MlmcOutcome {
    pub report: FieldReport,
    pub estimate: MlmcEstimate,
    pub levels: Vec<LevelSummary>,
    pub clipped: usize,
}

pub fn level_specs(cfg: &ExperimentConfig) -> Vec<LevelSpec> {
    cfg.sampling
        .levels
        .iter()
        .map(|l| LevelSpec { n_cells: l.nx, dt: cfg.dt_for(l.nx), samples: l.samples })
        .collect()
}

/// Control-variate MLMC on the configured hierarchy. The estimate lives on
/// the coarsest mesh.
pub fn mlmc(cfg: &ExperimentConfig, reference: Option<&FieldSet>) -> Result<MlmcOutcome> {
    let specs = level_specs(cfg);
    if specs.is_empty() {
        bail!("MLMC needs sampling.levels");
    }
    let mut opts = MlmcOptions::new(random_dim(cfg.case));
    opts.lambda = cfg.lambda_mode();
    opts.shared_streams = cfg.sampling.shared_streams;
    let runner = |spec: &LevelSpec, z: &RandomSample| -> kinuq_core::Result<FieldSet> {
        let mut case = build_case(cfg, spec.n_cells, Some(&z.z))
            .map_err(|e| kinuq_core::Error::Config(format!("{e:#}")))?;
        case.dt = spec.dt;
        let out = run_case(&case, cfg.solver, &thresholds(cfg), false)
            .map_err(|e| kinuq_core::Error::Config(format!("{e:#}")))?;
        Ok(out.fields)
    };
    let (est, var, samples) = mlmc_estimate(&specs, &runner, cfg.seed, &opts)?;
    let n0 = specs[0].n_cells;
    let proto = build_case(cfg, n0, None)?;
    let length = proto.spatial.x_max() - proto.spatial.x_min();
    let mean = FieldSet::new(n0, length, est.estimate.clone())?;
    let std = mean.with_values(var.values.iter().map(|v| v.sqrt()).collect())?;
    let err = pointwise_abs(&mean, reference)?;
    let levels = specs
        .iter()
        .zip(&samples)
        .enumerate()
        .map(|(l, (s, ls))| {
            let lam = &est.lambdas[l];
            LevelSummary {
                n_cells: s.n_cells,
                dt: s.dt,
                samples: s.samples,
                runs: ls.runs,
                cost_seconds: ls.cost_seconds,
                lambda_min: lam.iter().cloned().fold(f64::INFINITY, f64::min),
                lambda_mean: lam.iter().sum::<f64>() / lam.len() as f64,
                lambda_max: lam.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                degenerate: est.degenerate[l],
            }
        })
        .collect();
    Ok(MlmcOutcome {
        report: FieldReport { x: proto.spatial.centers(), mean, std: Some(std), err },
        estimate: est,
        levels,
        clipped: var.clipped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisError {
    pub k: usize,
    /// Mean L2 error per quantity (rho, ux, uy, T).
    pub error: [f64; 4],
    pub condition: f64,
}

#[derive(Debug, Clone)]
pub struct MultiFidelityOutcome {
    pub fidelity: Fidelity,
    pub report: FieldReport,
    pub errors: Vec<BasisError>,
    /// Mean L2 distance between the coefficient-source model and the high
    /// fidelity model on the held-out set.
    pub low_vs_high: [f64; 4],
    /// Largest deviation from the stored high-fidelity snapshots when the
    /// surrogate is evaluated at the selected points without a ridge.
    pub node_error: f64,
    pub selected: Vec<usize>,
    pub rank_deficient: bool,
    pub high_runs: usize,
    pub low_runs: usize,
}

fn run_many(cfg: &ExperimentConfig, solver: Solver, zs: &[RandomSample]) -> Result<Vec<FieldSet>> {
    zs.par_iter()
        .map(|z| Ok(run_sample(cfg, solver, cfg.nx(), Some(&z.z))?.fields))
        .collect()
}

/// Bi-fidelity (Euler selects, hybrid is high) or tri-fidelity (hybrid
/// selects, full kinetic is high) surrogate with held-out scoring.
pub fn multifidelity(cfg: &ExperimentConfig, fidelity: Fidelity) -> Result<MultiFidelityOutcome> {
    let (low_solver, high_solver) = match fidelity {
        Fidelity::Bi => (Solver::FullFluid, Solver::Hybrid),
        Fidelity::Tri => (Solver::Hybrid, Solver::FullKinetic),
    };
    let dim = random_dim(cfg.case);
    let s = &cfg.sampling;
    let cands = draw_samples(s.candidates, dim, cfg.seed);
    let held = draw_samples_at(HELD_OUT_STREAM, s.held_out, dim, cfg.seed);
    let low = run_many(cfg, low_solver, &cands)?;
    let dx = low[0].dx();
    let low_vals: Vec<Vec<f64>> = low.iter().map(|f| f.values().to_vec()).collect();
    let k_max = s.k.iter().copied().max().context("sampling.k is empty")?;
    let sel = select_points(&low_vals, dx, k_max)?;
    let chosen: Vec<RandomSample> = sel.indices.iter().map(|&i| cands[i].clone()).collect();
    let high = run_many(cfg, high_solver, &chosen)?;
    let held_low = run_many(cfg, low_solver, &held)?;
    let held_high = run_many(cfg, high_solver, &held)?;

    let basis_for = |k: usize, ridge: Option<f64>| -> Result<SnapshotBasis> {
        Ok(SnapshotBasis::new(
            fidelity,
            sel.indices[..k].to_vec(),
            sel.indices[..k].iter().map(|&i| low_vals[i].clone()).collect(),
            high[..k].iter().map(|f| f.values().to_vec()).collect(),
            dx,
            ridge,
        )?)
    };
    let surrogate = |b: &SnapshotBasis, lowf: &FieldSet| -> Result<FieldSet> {
        let c = fidelity_coeffs(b, lowf.values())?;
        Ok(lowf.with_values(multifidelity_eval(b, &c)?)?)
    };

    let mut errors = Vec::new();
    for &k in &s.k {
        let k = k.min(sel.indices.len());
        let b = basis_for(k, s.ridge)?;
        let approx = held_low.iter().map(|l| surrogate(&b, l)).collect::<Result<Vec<_>>>()?;
        errors.push(BasisError { k, error: err_mean_l2(&held_high, &approx)?, condition: b.condition() });
    }
    let low_vs_high = err_mean_l2(&held_high, &held_low)?;

    let k_eff = sel.indices.len();
    let exact = basis_for(k_eff, Some(0.0))?;
    let mut node_error = 0.0f64;
    for (j, &i) in sel.indices.iter().enumerate() {
        let u = surrogate(&exact, &low[i])?;
        for (a, b) in u.values().iter().zip(high[j].values()) {
            node_error = node_error.max((a - b).abs());
        }
    }

    let full = basis_for(k_eff, s.ridge)?;
    let approx_all = low.iter().map(|l| surrogate(&full, l)).collect::<Result<Vec<_>>>()?;
    let vals: Vec<&[f64]> = approx_all.iter().map(|a| a.values()).collect();
    let mean = low[0].with_values(mc_estimate(&vals)?)?;
    let sq: Vec<Vec<f64>> = vals.iter().map(|v| v.iter().map(|x| x * x).collect()).collect();
    let (std, _) = std_from(&mean, &mc_estimate(&sq)?)?;

    Ok(MultiFidelityOutcome {
        fidelity,
        report: FieldReport { x: centres(cfg, cfg.nx())?, mean, std: Some(std), err: None },
        errors,
        low_vs_high,
        node_error,
        selected: sel.indices.clone(),
        rank_deficient: sel.rank_deficient,
        high_runs: k_eff + held.len(),
        low_runs: cands.len() + held.len(),
    })
}

#[derive(Debug, Clone)]
pub struct ReferenceOutcome {
    pub mean: FieldSet,
    pub key: String,
    pub runs: usize,
    pub cached: bool,
    pub path: Option<PathBuf>,
}

/// Content address of a reference solution.
pub fn reference_key(cfg: &ExperimentConfig) -> String {
    let n = cfg.reference.nx;
    let desc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "case": cfg.case,
        "custom": cfg.custom,
        "nv": cfg.nv(),
        "l_max": cfg.grid.l_max,
        "t_final": cfg.time.t_final,
        "dt": cfg.dt_for(n),
        "knudsen": cfg.knudsen,
        "collision": cfg.collision,
        "nx": n,
        "nodes": cfg.reference.nodes,
    });
    sha256_hex(desc.to_string().as_bytes())
}

/// Full-kinetic reference mean on `reference.nx` cells. Random inputs are
/// integrated by Gauss quadrature in the weighted sums through which they
/// enter, one rule per sum.
pub fn reference(cfg: &ExperimentConfig) -> Result<ReferenceOutcome> {
    let key = reference_key(cfg);
    let n = cfg.reference.nx;
    let cache = std::env::var_os("KINUQ_CACHE").map(PathBuf::from);
    let path = cache.as_ref().map(|d| d.join(format!("ref-{key}.csv")));
    let length = {
        let c = build_case(cfg, n, None)?;
        c.spatial.x_max() - c.spatial.x_min()
    };
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            match parse_csv(&text) {
                Ok(t) if t.hash.as_deref() == Some(key.as_str()) && t.rows.len() == n => {
                    return Ok(ReferenceOutcome { mean: t.fields(length)?, key, runs: 0, cached: true, path });
                }
                _ => log::warn!("ignoring stale reference cache {}", p.display()),
            }
        }
    }

    let factors = random_factors(cfg.case);
    let rules = factors
        .groups
        .iter()
        .map(|(_, c)| scaled_uniform_sum_rule(c, cfg.reference.nodes))
        .collect::<kinuq_core::Result<Vec<_>>>()?;
    let mut points: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for r in &rules {
        points = points
            .into_iter()
            .flat_map(|(s, w)| {
                r.nodes.iter().zip(&r.weights).map(move |(x, v)| {
                    let mut s = s.clone();
                    s.push(*x);
                    (s, w * v)
                })
            })
            .collect();
    }
    let runs: Vec<FieldSet> = points
        .par_iter()
        .map(|(sums, _)| {
            let z = factors.point_with_sums(sums);
            Ok(run_sample(cfg, Solver::FullKinetic, n, Some(&z))?.fields)
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0; 4 * n];
    for ((_, w), f) in points.iter().zip(&runs) {
        for (a, v) in acc.iter_mut().zip(f.values()) {
            *a += w * v;
        }
    }
    let mean = runs[0].with_values(acc)?;
    if let Some(p) = &path {
        let x = centres(cfg, n)?;
        let text = crate::output::fields_csv(&x, &mean, &Default::default(), &key)?;
        write_file(p, &text)?;
    }
    Ok(ReferenceOutcome { mean, key, runs: runs.len(), cached: false, path })
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingOutcome {
    pub kinetic_seconds: Vec<f64>,
    pub hybrid_seconds: Vec<f64>,
    pub speedup: f64,
    /// Relative L2 distance of hybrid from full-kinetic fields, see
    /// [`rel_l2`].
    pub rel_l2: [f64; 4],
    pub mean_kinetic_fraction: f64,
}

/// Relative L2 distance of `a` from `b` per quantity. Both velocity
/// components are scaled by the norm of the speed of `b`, so a component
/// that vanishes in `b` does not blow the ratio up.
pub fn rel_l2(a: &FieldSet, b: &FieldSet) -> [f64; 4] {
    let sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let diff = |q: Quantity| -> f64 { a.quantity(q).iter().zip(b.quantity(q)).map(|(p, r)| (p - r).powi(2)).sum() };
    let speed = sq(b.quantity(Quantity::Ux)) + sq(b.quantity(Quantity::Uy));
    let ratio = |num: f64, den: f64| if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    [
        ratio(diff(Quantity::Rho), sq(b.quantity(Quantity::Rho))),
        ratio(diff(Quantity::Ux), speed),
        ratio(diff(Quantity::Uy), speed),
        ratio(diff(Quantity::Temp), sq(b.quantity(Quantity::Temp))),
    ]
}

/// Alternating full-kinetic and hybrid runs of the deterministic case.
pub fn timing(cfg: &ExperimentConfig, reps: usize) -> Result<(TimingOutcome, RunOutput, RunOutput)> {
    if reps == 0 {
        bail!("timing needs at least one repetition");
    }
    let (mut tk, mut th) = (Vec::new(), Vec::new());
    let mut last = None;
    for _ in 0..reps {
        let k = run_sample(cfg, Solver::FullKinetic, cfg.nx(), None)?;
        let h = run_sample(cfg, Solver::Hybrid, cfg.nx(), None)?;
        tk.push(k.wall_seconds);
        th.push(h.wall_seconds);
        last = Some((k, h));
    }
    let (k, h) = last.expect("reps > 0");
    let speedup = crate::output::median(&tk) / crate::output::median(&th);
    let rel = rel_l2(&h.fields, &k.fields);
    let frac = if h.kinetic_fraction.is_empty() {
        0.0
    } else {
        h.kinetic_fraction.iter().sum::<f64>() / h.kinetic_fraction.len() as f64
    };
    Ok((
        TimingOutcome { kinetic_seconds: tk, hybrid_seconds: th, speedup, rel_l2: rel, mean_kinetic_fraction: frac },
        k,
        h,
    ))
}

/// Wall-clock of a closure, in seconds.
pub fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t0 = Instant::now();
    let v = f()?;
    Ok((v, t0.elapsed().as_secs_f64()))
}

/// Manifest summary of a multi-fidelity outcome.
pub fn multifidelity_summary(o: &MultiFidelityOutcome) -> serde_json::Value {
    json!({
        "fidelity": format!("{:?}", o.fidelity),
        "errors": o.errors,
        "low_vs_high": o.low_vs_high,
        "node_error": fmt_f64(o.node_error),
        "selected": o.selected,
        "rank_deficient": o.rank_deficient,
        "high_runs": o.high_runs,
        "low_runs": o.low_runs,
        "ill_conditioned": o.errors.iter().any(|e| e.condition > 1e12),
    })
}
