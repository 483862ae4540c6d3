//! Asymptotic-preserving kinetic stepper: flux-limited upwind transport in
//! `x` followed by an IMEX update with a BGK penalization of the collision
//! operator.

use rayon::prelude::*;

use crate::collision::{penalty_beta_cell, q_spectral, SpectralKernel};
use crate::error::{Error, Result};
use crate::phase_space::{
    maxwellian_matched_slice, slice_moments, Boundary, DistributionField, KnudsenField,
    SpatialGrid, VelocityGrid, DEFAULT_TOL_NEG,
};

/// Ghost layers on each side of the transport stencil.
pub const GHOSTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Limiter {
    #[default]
    Minmod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticStepConfig {
    pub dt: f64,
    pub cfl_check: bool,
    pub limiter: Limiter,
    pub tol_neg: f64,
}

impl KineticStepConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            cfl_check: true,
            limiter: Limiter::Minmod,
            tol_neg: DEFAULT_TOL_NEG,
        }
    }
}

/// Advective bound `dx / l_max`; the collision part is implicit.
pub fn max_stable_dt(vg: &VelocityGrid, sg: &SpatialGrid) -> f64 {
    sg.dx() / vg.l_max()
}

pub(crate) fn check_cfl(dt: f64, dt_max: f64) -> Result<()> {
    if !(dt > 0.0) || dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, dt_max });
    }
    Ok(())
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Copy `values` (cell-major, `n_cells` slices) into a buffer with
/// [`GHOSTS`] layers per side filled according to `boundary`.
pub(crate) fn pad_with_ghosts(
    values: &[f64],
    n_cells: usize,
    vg: &VelocityGrid,
    boundary: Boundary,
) -> Vec<f64> {
    let s = vg.slice_len();
    let mut padded = vec![0.0; (n_cells + 2 * GHOSTS) * s];
    padded[GHOSTS * s..(GHOSTS + n_cells) * s].copy_from_slice(values);
    fill_ghosts(&mut padded, n_cells, vg, boundary);
    padded
}

/// Fill the ghost layers of a padded buffer from its interior.
pub(crate) fn fill_ghosts(padded: &mut [f64], n_cells: usize, vg: &VelocityGrid, boundary: Boundary) {
    let s = vg.slice_len();
    let n = vg.n_per_dim();
    for g in 0..GHOSTS {
        // ghost -1-g and ghost n_cells+g
        let left = GHOSTS - 1 - g;
        let right = GHOSTS + n_cells + g;
        let (src_l, src_r) = match boundary {
            Boundary::Periodic => (GHOSTS + n_cells - 1 - g, GHOSTS + g),
            Boundary::Specular => (GHOSTS + g, GHOSTS + n_cells - 1 - g),
        };
        for (dst, src) in [(left, src_l), (right, src_r)] {
            for k in 0..s {
                let from = match boundary {
                    Boundary::Periodic => k,
                    Boundary::Specular => vg.mirror_v1(k / n) * n + k % n,
                };
                padded[dst * s + k] = padded[src * s + from];
            }
        }
    }
}

/// Flux-limited upwind transport on a padded buffer.
///
/// Writes updated interior slices into `out` and, when requested, the face
/// fluxes `F_{i-1/2}` for faces `0..=n_cells` into `face_flux`.
pub(crate) fn transport_padded(
    padded: &[f64],
    n_cells: usize,
    vg: &VelocityGrid,
    sg: &SpatialGrid,
    dt: f64,
    out: &mut [f64],
    mut face_flux: Option<&mut [f64]>,
) {
    let s = vg.slice_len();
    let n = vg.n_per_dim();
    let lam = dt / sg.dx();
    let specular = sg.boundary() == Boundary::Specular;
    let mut flux = vec![0.0; n_cells + 1];
    for k in 0..s {
        let i1 = k / n;
        let v = vg.nodes()[i1];
        if v == 0.0 {
            for i in 0..n_cells {
                out[i * s + k] = padded[(i + GHOSTS) * s + k];
            }
            if let Some(ff) = face_flux.as_deref_mut() {
                for face in 0..=n_cells {
                    ff[face * s + k] = 0.0;
                }
            }
            continue;
        }
        let nu = v.abs() * lam;
        let at = |j: usize| padded[j * s + k];
        let slope = |j: usize| minmod(at(j + 1) - at(j), at(j) - at(j - 1));
        for (face, fl) in flux.iter_mut().enumerate() {
            // face between padded cells j = face + 1 and j + 1
            let j = face + GHOSTS - 1;
            *fl = if v > 0.0 {
                v * (at(j) + 0.5 * (1.0 - nu) * slope(j))
            } else {
                v * (at(j + 1) - 0.5 * (1.0 - nu) * slope(j + 1))
            };
        }
        if specular && vg.mirror_v1(i1) == i1 {
            // the corner node has no mirror partner on the grid
            flux[0] = 0.0;
            flux[n_cells] = 0.0;
        }
        for i in 0..n_cells {
            out[i * s + k] = at(i + GHOSTS) - lam * (flux[i + 1] - flux[i]);
        }
        if let Some(ff) = face_flux.as_deref_mut() {
            for (face, fl) in flux.iter().enumerate() {
                ff[face * s + k] = *fl;
            }
        }
    }
}

/// One transport step for every velocity node.
pub fn transport_muscl(f: &DistributionField, dt: f64) -> Result<DistributionField> {
    let (sg, vg) = (f.spatial(), f.velocity());
    check_cfl(dt, max_stable_dt(vg, sg))?;
    Ok(transport_unchecked(f, dt))
}

fn transport_unchecked(f: &DistributionField, dt: f64) -> DistributionField {
    let (sg, vg) = (f.spatial(), f.velocity());
    let padded = pad_with_ghosts(f.values(), sg.n_cells(), vg, sg.boundary());
    let mut out = DistributionField::zeros(sg, vg);
    transport_padded(&padded, sg.n_cells(), vg, sg, dt, out.values_mut(), None);
    out
}

/// Scratch buffers for [`collide_cell`].
pub(crate) struct CellScratch {
    pub ws: crate::collision::CollisionWorkspace,
    q: Vec<f64>,
    q_eq: Vec<f64>,
    m_old: Vec<f64>,
    m_new: Vec<f64>,
}

impl CellScratch {
    pub fn new(kernel: &SpectralKernel) -> Self {
        let s = kernel.n_per_dim() * kernel.n_per_dim();
        Self {
            ws: kernel.workspace(),
            q: vec![0.0; s],
            q_eq: vec![0.0; s],
            m_old: vec![0.0; s],
            m_new: vec![0.0; s],
        }
    }
}

/// Penalized IMEX collision update of a single cell.
///
/// `f_old` is the pre-transport slice, `f_star` the transported one.
pub(crate) fn collide_cell(
    f_old: &[f64],
    f_star: &[f64],
    inv_eps: f64,
    dt: f64,
    kernel: &SpectralKernel,
    vg: &VelocityGrid,
    scratch: &mut CellScratch,
    out: &mut [f64],
    cell: usize,
) -> Result<()> {
    if inv_eps == 0.0 {
        out.copy_from_slice(f_star);
        return Ok(());
    }
    let u_old = slice_moments(f_old, vg, cell)?;
    let u_new = slice_moments(f_star, vg, cell)?;
    let beta = penalty_beta_cell(u_old.rho, u_old.temp, kernel.params());
    q_spectral(f_old, kernel, &mut scratch.ws, &mut scratch.q, cell)?;
    maxwellian_matched_slice(u_old, vg, &mut scratch.m_old);
    if kernel.params().corrected {
        q_spectral(&scratch.m_old, kernel, &mut scratch.ws, &mut scratch.q_eq, cell)?;
        for (q, e) in scratch.q.iter_mut().zip(&scratch.q_eq) {
            *q -= e;
        }
        kernel.project_conservative(&mut scratch.q, &scratch.m_old);
    }
    maxwellian_matched_slice(u_new, vg, &mut scratch.m_new);
    let h = dt * inv_eps;
    let a = h * beta;
    let denom = 1.0 / (1.0 + a);
    for k in 0..out.len() {
        let expl = scratch.q[k] - beta * scratch.m_old[k] + beta * f_old[k];
        out[k] = (f_star[k] + h * expl + a * scratch.m_new[k]) * denom;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericBreakdown { cell });
    }
    Ok(())
}

/// One asymptotic-preserving step of the full kinetic model.
pub fn ap_step(
    f: &DistributionField,
    kn: &KnudsenField,
    kernel: &SpectralKernel,
    cfg: &KineticStepConfig,
) -> Result<DistributionField> {
    let (sg, vg) = (f.spatial(), f.velocity());
    if kn.eps.len() != sg.n_cells() {
        return Err(Error::Shape(format!(
            "Knudsen field has {} cells, grid has {}",
            kn.eps.len(),
            sg.n_cells()
        )));
    }
    if kernel.n_per_dim() != vg.n_per_dim() {
        return Err(Error::Shape("kernel and velocity grid disagree".into()));
    }
    if cfg.cfl_check {
        check_cfl(cfg.dt, max_stable_dt(vg, sg))?;
    }
    let fstar = transport_unchecked(f, cfg.dt);
    let mut out = DistributionField::zeros(sg, vg);
    let s = vg.slice_len();
    out.values_mut()
        .par_chunks_mut(s)
        .enumerate()
        .map_init(
            || CellScratch::new(kernel),
            |scratch, (i, o)| {
                collide_cell(f.cell(i), fstar.cell(i), kn.inv(i), cfg.dt, kernel, vg, scratch, o, i)
            },
        )
        .collect::<Result<Vec<()>>>()?;
    out.check_negative(cfg.tol_neg);
    Ok(out)
}
