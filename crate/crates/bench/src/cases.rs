//! Initial data, Knudsen fields and kernels of the benchmark problems.

use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use kinuq_core::collision::CollisionParams;
use kinuq_core::phase_space::{
    Boundary, DistributionField, KnudsenField, MacroState, Primitive, SpatialGrid, VelocityGrid,
};

use crate::config::{BoundaryChoice, CaseId, ExperimentConfig, KnudsenSpec};

/// Initial condition of a run.
#[derive(Debug, Clone)]
pub enum Initial {
    /// Local Maxwellians of the given fields.
    Equilibrium(MacroState),
    /// A general distribution.
    Distribution(DistributionField),
}

/// Everything a solver needs to run one realization.
#[derive(Debug, Clone)]
pub struct Case {
    pub spatial: SpatialGrid,
    pub velocity: VelocityGrid,
    pub kn: KnudsenField,
    pub collision: CollisionParams,
    pub initial: Initial,
    pub t_final: f64,
    pub dt: f64,
}

/// How the random inputs of a case enter: each group of components feeds
/// one weighted sum `sum_k c_k z_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFactors {
    pub groups: Vec<(std::ops::Range<usize>, Vec<f64>)>,
}

impl RandomFactors {
    pub fn dim(&self) -> usize {
        self.groups.iter().map(|(r, _)| r.end).max().unwrap_or(0)
    }

    /// A point of the random space whose weighted sums equal `sums`.
    pub fn point_with_sums(&self, sums: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        for ((range, c), s) in self.groups.iter().zip(sums) {
            let total: f64 = c.iter().sum();
            for k in range.clone() {
                z[k] = s / total;
            }
        }
        z
    }
}

fn decay(d: usize) -> Vec<f64> {
    (1..=d).map(|k| 1.0 / (2 * k) as f64).collect()
}

/// `1 + 0.4 sum_k z_k / (2k)` over the given components.
fn perturbation(z: &[f64]) -> f64 {
    1.0 + 0.4 * z.iter().zip(decay(z.len())).map(|(z, c)| z * c).sum::<f64>()
}

pub fn random_factors(case: CaseId) -> RandomFactors {
    let groups = match case {
        CaseId::SodUncertain => vec![(0..5, decay(5))],
        CaseId::MixedRegimeA | CaseId::MixedRegimeC => vec![(0..7, decay(7)), (7..14, decay(7))],
        CaseId::MixedRegimeB => vec![(0..1, vec![1.0])],
        _ => vec![],
    };
    RandomFactors { groups }
}

pub fn random_dim(case: CaseId) -> usize {
    random_factors(case).dim()
}

/// Builds the case at `n_cells` resolution for the random point `z`
/// (ignored by deterministic cases; missing components read as zero).
pub fn build_case(cfg: &ExperimentConfig, n_cells: usize, z: Option<&[f64]>) -> Result<Case> {
    let dim = random_dim(cfg.case);
    let zero = vec![0.0; dim];
    let z = z.unwrap_or(&zero);
    if z.len() < dim {
        bail!("case {:?} needs {dim} random inputs, got {}", cfg.case, z.len());
    }
    let velocity = VelocityGrid::new(cfg.nv(), cfg.grid.l_max)?;
    let mut collision = cfg.collision.params();
    let (x_min, x_max, boundary) = match cfg.case {
        CaseId::SodDeterministic | CaseId::SodUncertain => (0.0, 1.0, Boundary::Specular),
        CaseId::BlastWave | CaseId::MixedRegimeA | CaseId::MixedRegimeB | CaseId::MixedRegimeC => {
            (-0.5, 0.5, Boundary::Periodic)
        }
        CaseId::Custom => {
            let c = cfg.custom.as_ref().context("custom case missing")?;
            let b = match c.boundary {
                BoundaryChoice::Periodic => Boundary::Periodic,
                BoundaryChoice::Specular => Boundary::Specular,
            };
            (c.x_min, c.x_max, b)
        }
    };
    let spatial = SpatialGrid::new(n_cells, x_min, x_max, boundary)?;

    let default_kn = match cfg.case {
        CaseId::MixedRegimeA | CaseId::MixedRegimeB | CaseId::MixedRegimeC => KnudsenSpec::Mixed { eps0: 1e-3 },
        _ => KnudsenSpec::Constant { eps: 1e-4 },
    };
    let kn = match cfg.knudsen.unwrap_or(default_kn) {
        KnudsenSpec::Constant { eps } => KnudsenField::uniform(n_cells, eps)?,
        KnudsenSpec::Mixed { eps0 } => KnudsenField::mixed_regime(&spatial, eps0)?,
    };

    let initial = match cfg.case {
        CaseId::SodDeterministic => Initial::Equilibrium(sod(&spatial, 1.0)),
        CaseId::SodUncertain => Initial::Equilibrium(sod(&spatial, perturbation(&z[0..5]))),
        CaseId::BlastWave => Initial::Equilibrium(MacroState::from_fn(n_cells, |i| {
            let x = spatial.center(i);
            if x < -0.3 {
                Primitive::new(1.0, 1.0, 0.0, 2.0)
            } else if x <= 0.3 {
                Primitive::new(1.0, 0.0, 0.0, 0.25)
            } else {
                Primitive::new(1.0, -1.0, 0.0, 2.0)
            }
        })),
        CaseId::MixedRegimeA | CaseId::MixedRegimeC => {
            Initial::Distribution(double_peak(&spatial, &velocity, perturbation(&z[0..7]), perturbation(&z[7..14]))?)
        }
        CaseId::MixedRegimeB => {
            collision.b *= 1.0 + 0.5 * z[0];
            Initial::Distribution(double_peak(&spatial, &velocity, 1.0, 1.0)?)
        }
        CaseId::Custom => {
            let c = cfg.custom.as_ref().context("custom case missing")?;
            Initial::Equilibrium(MacroState::from_fn(n_cells, |i| {
                let x = spatial.center(i);
                let p = c.pieces.iter().find(|p| x <= p.x_end).unwrap_or(c.pieces.last().expect("validated"));
                Primitive::new(p.rho, p.ux, p.uy, p.temp)
            }))
        }
    };
    Ok(Case {
        spatial,
        velocity,
        kn,
        collision,
        initial,
        t_final: cfg.time.t_final,
        dt: cfg.dt_for(n_cells),
    })
}

/// Sod states with both temperatures multiplied by `t_factor`.
fn sod(sg: &SpatialGrid, t_factor: f64) -> MacroState {
    MacroState::from_fn(sg.n_cells(), |i| {
        if sg.center(i) <= 0.5 {
            Primitive::new(1.0, 0.0, 0.0, t_factor)
        } else {
            Primitive::new(0.125, 0.0, 0.0, 0.25 * t_factor)
        }
    })
}

/// Two shifted Gaussians `rho0/2 [exp(-|v-u0|^2/T0) + exp(-|v+u0|^2/T0)]`
/// with `u0 = (3/4, -3/4)`.
fn double_peak(sg: &SpatialGrid, vg: &VelocityGrid, rho_factor: f64, t_factor: f64) -> Result<DistributionField> {
    let u0 = (0.75, -0.75);
    Ok(DistributionField::from_fn(sg, vg, |x, v1, v2| {
        let rho0 = (2.0 + (2.0 * PI * x).sin()) / 2.0 * rho_factor;
        let t0 = (5.0 + 2.0 * (2.0 * PI * x).cos()) / 20.0 * t_factor;
        let a = (v1 - u0.0).powi(2) + (v2 - u0.1).powi(2);
        let b = (v1 + u0.0).powi(2) + (v2 + u0.1).powi(2);
        rho0 / 2.0 * ((-a / t0).exp() + (-b / t0).exp())
    })?)
}
