//! Runs one realization of a case with one of the three solvers.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use kinuq_core::collision::SpectralKernel;
use kinuq_core::fluid::{euler_step, ConservedState};
use kinuq_core::hybrid::{hybrid_step_report, CriterionThresholds, HybridConfig, HybridState, RegimeLabels};
use kinuq_core::kinetic::{ap_step, KineticStepConfig};
use kinuq_core::phase_space::{moments, slice_conserved, DistributionField, MacroState};
use kinuq_core::uq::FieldSet;

use crate::cases::{Case, Initial};
use crate::config::Solver;

static PARTITION_CHECKS: AtomicU64 = AtomicU64::new(0);

/// Hybrid steps whose partition and single-update invariants were checked
/// in this process.
pub fn partition_checks() -> u64 {
    PARTITION_CHECKS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub fields: FieldSet,
    pub wall_seconds: f64,
    pub steps: usize,
    /// Kinetic cell fraction after each hybrid step.
    pub kinetic_fraction: Vec<f64>,
    /// Initial and per-step labels when history was requested.
    pub labels: Option<RegimeLabels>,
    /// Totals of mass, momentum and energy at the start and the end.
    pub totals: [[f64; 4]; 2],
}

/// Step sizes reaching `t_final` exactly: full steps then one short one.
pub fn step_sizes(t_final: f64, dt: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 0.0;
    while t_final - t > 1e-12 * t_final.max(1.0) {
        let h = dt.min(t_final - t);
        out.push(h);
        t += h;
    }
    out
}

fn initial_distribution(case: &Case) -> Result<DistributionField> {
    Ok(match &case.initial {
        Initial::Equilibrium(m) => {
            HybridState::from_macro(m.clone(), &case.spatial, &case.velocity, case.kn.clone())?.f
        }
        Initial::Distribution(f) => f.clone(),
    })
}

fn totals_of(f: &DistributionField) -> [f64; 4] {
    let dx = f.spatial().dx();
    let mut t = [0.0; 4];
    for i in 0..f.n_cells() {
        for (a, b) in t.iter_mut().zip(slice_conserved(f.cell(i), f.velocity())) {
            *a += b * dx;
        }
    }
    t
}

pub fn run_case(case: &Case, solver: Solver, thresholds: &CriterionThresholds, history: bool) -> Result<RunOutput> {
    let t0 = Instant::now();
    let sizes = step_sizes(case.t_final, case.dt);
    let sg = &case.spatial;
    let dx = sg.dx();
    let mut kinetic_fraction = Vec::new();
    let mut labels = None;
    let (m, totals): (MacroState, [[f64; 4]; 2]) = match solver {
        Solver::FullFluid => {
            let mut s = match &case.initial {
                Initial::Equilibrium(m) => ConservedState::from_macro(m),
                Initial::Distribution(f) => {
                    let mut s = ConservedState::from_macro(&moments(f)?);
                    for i in 0..f.n_cells() {
                        s.set(i, slice_conserved(f.cell(i), f.velocity()));
                    }
                    s
                }
            };
            let start = s.totals(dx);
            for h in &sizes {
                s = euler_step(&s, sg, *h)?;
            }
            (s.to_macro()?, [start, s.totals(dx)])
        }
        Solver::FullKinetic => {
            let kernel = SpectralKernel::shared(case.collision, &case.velocity)?;
            let mut f = initial_distribution(case)?;
            let start = totals_of(&f);
            for h in &sizes {
                f = ap_step(&f, &case.kn, &kernel, &KineticStepConfig::new(*h))?;
            }
            (moments(&f)?, [start, totals_of(&f)])
        }
        Solver::Hybrid => {
            let kernel = SpectralKernel::shared(case.collision, &case.velocity)?;
            let mut state = match &case.initial {
                Initial::Equilibrium(m) => HybridState::from_macro(m.clone(), sg, &case.velocity, case.kn.clone())?,
                Initial::Distribution(f) => HybridState::from_distribution(f.clone(), case.kn.clone(), thresholds)?,
            };
            if history {
                state.labels.enable_history();
            }
            let start = state.u.totals(dx);
            for (k, h) in sizes.iter().enumerate() {
                let mut cfg = HybridConfig::new(*h);
                cfg.thresholds = *thresholds;
                let (next, report) = hybrid_step_report(&state, &kernel, &cfg)?;
                PARTITION_CHECKS.fetch_add(1, Ordering::Relaxed);
                if !report.partition_ok() {
                    bail!("hybrid step {k}: a cell was updated {:?} times", report.updates);
                }
                kinetic_fraction.push(report.kinetic_fraction);
                state = next;
            }
            let end = state.u.totals(dx);
            labels = history.then(|| state.labels.clone());
            (state.m, [start, end])
        }
    };
    let fields = FieldSet::from_macro(&m, sg).context("collecting fields")?;
    Ok(RunOutput {
        fields,
        wall_seconds: t0.elapsed().as_secs_f64(),
        steps: sizes.len(),
        kinetic_fraction,
        labels,
        totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::build_case;
    use crate::config::preset;

    #[test]
    fn step_sizes_reach_the_final_time() {
        let s = step_sizes(0.15, 8e-4);
        assert_eq!(s.len(), 188);
        assert!((s.iter().sum::<f64>() - 0.15).abs() < 1e-13);
        assert_eq!(step_sizes(0.1, 0.05).len(), 2);
    }

    #[test]
    fn solvers_agree_on_a_uniform_state() {
        let mut cfg = preset("sod").unwrap();
        cfg.time.t_final = 0.01;
        let mut case = build_case(&cfg, 16, None).unwrap();
        if let Initial::Equilibrium(m) = &mut case.initial {
            for i in 0..16 {
                m.rho[i] = 1.0;
                m.temp[i] = 1.0;
            }
        }
        let th = CriterionThresholds::default();
        let fl = run_case(&case, Solver::FullFluid, &th, false).unwrap();
        let hy = run_case(&case, Solver::Hybrid, &th, false).unwrap();
        let ki = run_case(&case, Solver::FullKinetic, &th, false).unwrap();
        for v in [&fl, &hy, &ki] {
            for (a, b) in v.fields.values().iter().zip(fl.fields.values()) {
                assert!((a - b).abs() < 1e-6, "{a} {b}");
            }
        }
        assert!(hy.kinetic_fraction.iter().all(|k| *k == 0.0));
    }
}
