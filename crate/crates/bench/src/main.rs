use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kinuq_bench::config::{preset, ExperimentConfig, Solver};
use kinuq_bench::experiments::{self, timed, FieldReport};
use kinuq_bench::model::partition_checks;
use kinuq_bench::output::{config_hash, fields_csv, write_file, ExtraColumns, RunManifest};
use kinuq_core::uq::{Fidelity, FieldSet};
use serde_json::json;

#[derive(Parser)]
#[command(name = "kinuq", version, about = "Hybrid kinetic/fluid solver with uncertainty quantification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One deterministic run with the configured solver.
    RunDeterministic(Common),
    /// Plain Monte Carlo.
    RunMc(Common),
    /// Control-variate multilevel Monte Carlo.
    RunMlmc(Common),
    /// Bi-fidelity surrogate (Euler selects, hybrid is high fidelity).
    RunBifi(Common),
    /// Tri-fidelity surrogate (hybrid selects, full kinetic is high fidelity).
    RunTrifi(Common),
    /// Quadrature reference mean with the full kinetic solver.
    MakeReference(Common),
    /// Median wall-clock of full kinetic against hybrid.
    Timing {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
}

#[derive(Args)]
struct Common {
    /// TOML file, or the name of a shipped preset.
    #[arg(long)]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    paper_scale: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let p = Path::new(&self.config);
        let mut cfg = if p.exists() { ExperimentConfig::load(p)? } else { preset(&self.config)? };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        cfg.paper_scale |= self.paper_scale;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_report(cfg: &ExperimentConfig, name: &str, r: &FieldReport) -> Result<()> {
    let extra = ExtraColumns { std: r.std.as_ref(), err: r.err.as_ref() };
    let text = fields_csv(&r.x, &r.mean, &extra, &config_hash(cfg))?;
    write_file(&cfg.output.join(format!("{name}.csv")), &text)
}

fn reference_if_wanted(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<Option<FieldSet>> {
    if !cfg.reference.compare {
        return Ok(None);
    }
    let (r, secs) = timed(|| experiments::reference(cfg))?;
    m.phases.insert("reference".into(), secs);
    m.warnings.extend(r.cached.then(|| format!("reference {} read from cache", r.key)));
    Ok(Some(r.mean))
}

fn execute(name: &str, cfg: &ExperimentConfig, cmd: &Command, m: &mut RunManifest) -> Result<()> {
    match cmd {
        Command::RunDeterministic(_) => {
            let (r, run) = experiments::deterministic(cfg)?;
            m.wall_seconds.push(run.wall_seconds);
            m.kinetic_fraction = run.kinetic_fraction.clone();
            m.estimator = Some(json!({ "steps": run.steps, "totals": run.totals }));
            write_report(cfg, name, &r)
        }
        Command::RunMc(_) => {
            let reference = reference_if_wanted(cfg, m)?;
            let (o, secs) = timed(|| experiments::monte_carlo(cfg, reference.as_ref()))?;
            m.wall_seconds.push(secs);
            m.estimator = Some(json!({
                "samples": o.samples.len(),
                "cost_seconds": o.cost_seconds,
                "clipped_variance": o.clipped,
            }));
            write_report(cfg, name, &o.report)
        }
        Command::RunMlmc(_) => {
            let reference = reference_if_wanted(cfg, m)?;
            let (o, secs) = timed(|| experiments::mlmc(cfg, reference.as_ref()))?;
            m.wall_seconds.push(secs);
            if o.clipped > 0 {
                m.warnings.push(format!("{} negative variance entries clipped to zero", o.clipped));
            }
            m.estimator = Some(json!({ "levels": o.levels, "clipped_variance": o.clipped }));
            write_report(cfg, name, &o.report)
        }
        Command::RunBifi(_) | Command::RunTrifi(_) => {
            let fid = if matches!(cmd, Command::RunBifi(_)) { Fidelity::Bi } else { Fidelity::Tri };
            let (o, secs) = timed(|| experiments::multifidelity(cfg, fid))?;
            m.wall_seconds.push(secs);
            if o.rank_deficient {
                m.warnings.push(format!("only {} points selected: snapshot set is rank deficient", o.selected.len()));
            }
            if o.errors.iter().any(|e| e.condition > 1e12) {
                m.warnings.push("ill-conditioned Gram matrix".into());
            }
            m.estimator = Some(experiments::multifidelity_summary(&o));
            write_report(cfg, name, &o.report)
        }
        Command::MakeReference(_) => {
            let (r, secs) = timed(|| experiments::reference(cfg))?;
            m.wall_seconds.push(secs);
            m.estimator = Some(json!({
                "key": r.key,
                "runs": r.runs,
                "cached": r.cached,
                "cache_file": r.path.as_ref().map(|p| p.display().to_string()),
            }));
            let proto = kinuq_bench::cases::build_case(cfg, cfg.reference.nx, None)?;
            let report = FieldReport { x: proto.spatial.centers(), mean: r.mean, std: None, err: None };
            write_report(cfg, name, &report)
        }
        Command::Timing { reps, .. } => {
            let (o, k, h) = experiments::timing(cfg, *reps)?;
            for (solver, secs) in [("full_kinetic", &o.kinetic_seconds), ("hybrid", &o.hybrid_seconds)] {
                let mut c = cfg.clone();
                c.solver = if solver == "hybrid" { Solver::Hybrid } else { Solver::FullKinetic };
                let mut sub = RunManifest::new(&format!("timing-{solver}"), &c);
                sub.wall_seconds = secs.clone();
                if solver == "hybrid" {
                    sub.kinetic_fraction = h.kinetic_fraction.clone();
                }
                sub.write(&cfg.output.join(format!("timing-{solver}.manifest.json")))?;
            }
            m.wall_seconds = o.hybrid_seconds.clone();
            m.kinetic_fraction = h.kinetic_fraction.clone();
            m.estimator = Some(serde_json::to_value(&o)?);
            let x = proto_centres(cfg)?;
            write_report(cfg, "timing-full_kinetic", &FieldReport { x: x.clone(), mean: k.fields, std: None, err: None })?;
            write_report(cfg, "timing-hybrid", &FieldReport { x, mean: h.fields, std: None, err: None })?;
            println!("speedup {:.3}", o.speedup);
            Ok(())
        }
    }
}

fn proto_centres(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    Ok(kinuq_bench::cases::build_case(cfg, cfg.nx(), None)?.spatial.centers())
}

fn run(cli: Cli) -> Result<()> {
    let (name, common) = match &cli.command {
        Command::RunDeterministic(c) => ("run-deterministic", c),
        Command::RunMc(c) => ("run-mc", c),
        Command::RunMlmc(c) => ("run-mlmc", c),
        Command::RunBifi(c) => ("run-bifi", c),
        Command::RunTrifi(c) => ("run-trifi", c),
        Command::MakeReference(c) => ("make-reference", c),
        Command::Timing { common, .. } => ("timing", common),
    };
    let cfg = common.load()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().context("starting workers")?;
    let mut manifest = RunManifest::new(name, &cfg);
    let result = pool.install(|| execute(name, &cfg, &cli.command, &mut manifest));
    manifest.partition_checks = partition_checks();
    if let Err(e) = &result {
        manifest.error = Some(format!("{e:#}"));
    }
    for w in &manifest.warnings {
        log::warn!("{w}");
    }
    manifest.write(&cfg.output.join(format!("{name}.manifest.json")))?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
