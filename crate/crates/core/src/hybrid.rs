//! Hybrid kinetic/fluid stepping with per-cell regime labels.
//!
//! Each step runs four phases in a fixed order:
//!
//! 1. fluid cells whose breakdown indicator exceeds `eta0` become kinetic and
//!    are lifted to Maxwellians;
//! 2. the remaining fluid cells take an Euler step, with kinetic cells frozen
//!    as ghost states and interface faces carrying the velocity moments of the
//!    kinetic transport flux;
//! 3. kinetic cells take an AP step, with fluid neighbours lifted as ghosts;
//! 4. kinetic cells within `delta0` of their Maxwellian (in `L1_v`) become
//!    fluid and are projected to moments.
//!
//! Because the interface flux is shared by both sides the scheme is
//! conservative across regime boundaries.

use std::io::Write;

use rayon::prelude::*;

use crate::collision::SpectralKernel;
use crate::error::{Error, Result};
use crate::fluid::{apply_fluxes, derivative, heun_fluxes, to_primitive, ConservedState, TransportCoeffs};
use crate::kinetic::{check_cfl, collide_cell, fill_ghosts, max_stable_dt, transport_padded, CellScratch, GHOSTS};
use crate::phase_space::{
    maxwellian_matched_slice, slice_conserved, slice_l1, slice_moments, Boundary,
    DistributionField, KnudsenField, MacroState, Primitive, SpatialGrid, VelocityGrid, DEFAULT_TOL_NEG,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Fluid,
    Kinetic,
}

impl Regime {
    pub fn code(self) -> u8 {
        match self {
            Regime::Fluid => 0,
            Regime::Kinetic => 1,
        }
    }
}

/// One label per cell, plus an optional record of past labelings.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeLabels {
    labels: Vec<Regime>,
    history: Option<Vec<Vec<Regime>>>,
}

impl RegimeLabels {
    pub fn uniform(n: usize, r: Regime) -> Self {
        Self {
            labels: vec![r; n],
            history: None,
        }
    }

    pub fn from_vec(labels: Vec<Regime>) -> Self {
        Self { labels, history: None }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> Regime {
        self.labels[i]
    }

    pub fn set(&mut self, i: usize, r: Regime) {
        self.labels[i] = r;
    }

    pub fn as_slice(&self) -> &[Regime] {
        &self.labels
    }

    pub fn count(&self, r: Regime) -> usize {
        self.labels.iter().filter(|l| **l == r).count()
    }

    pub fn kinetic_fraction(&self) -> f64 {
        self.count(Regime::Kinetic) as f64 / self.len() as f64
    }

    /// Start recording; the current labeling becomes entry 0.
    pub fn enable_history(&mut self) {
        if self.history.is_none() {
            self.history = Some(vec![self.labels.clone()]);
        }
    }

    pub fn history(&self) -> Option<&[Vec<Regime>]> {
        self.history.as_deref()
    }

    fn record(&mut self) {
        if let Some(h) = self.history.as_mut() {
            h.push(self.labels.clone());
        }
    }

    /// `step,cell,label` rows, label 0 = fluid, 1 = kinetic.
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,cell,label")?;
        for (step, labels) in self.history.iter().flatten().enumerate() {
            for (cell, l) in labels.iter().enumerate() {
                writeln!(w, "{step},{cell},{}", l.code())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionThresholds {
    pub eta0: f64,
    pub delta0: f64,
}

impl Default for CriterionThresholds {
    fn default() -> Self {
        Self {
            eta0: 1e-2,
            delta0: 1e-4,
        }
    }
}

impl CriterionThresholds {
    /// Zero and infinite thresholds are accepted; they pin every cell to one
    /// regime and are useful for limit checks.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 >= 0.0) || !(self.delta0 >= 0.0) {
            return Err(Error::Config(format!("thresholds must be non-negative, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridConfig {
    pub dt: f64,
    pub thresholds: CriterionThresholds,
    pub coeffs: TransportCoeffs,
    pub cfl_check: bool,
    pub tol_neg: f64,
}

impl HybridConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            thresholds: CriterionThresholds::default(),
            coeffs: TransportCoeffs::default(),
            cfl_check: true,
            tol_neg: DEFAULT_TOL_NEG,
        }
    }
}

/// Coupled state. `f` is authoritative on kinetic cells, `u` (and the
/// derived `m`) on fluid cells; `m = moments(f)` on kinetic cells.
#[derive(Debug, Clone)]
pub struct HybridState {
    pub f: DistributionField,
    pub m: MacroState,
    pub u: ConservedState,
    pub labels: RegimeLabels,
    pub kn: KnudsenField,
}

impl HybridState {
    /// All cells fluid; `f` holds the lifted Maxwellians.
    pub fn from_macro(m: MacroState, sg: &SpatialGrid, vg: &VelocityGrid, kn: KnudsenField) -> Result<Self> {
        check_shapes(m.len(), sg, &kn)?;
        m.validate()?;
        let mut f = DistributionField::zeros(sg, vg);
        for i in 0..m.len() {
            maxwellian_matched_slice(m.get(i), vg, f.cell_mut(i));
        }
        Ok(Self {
            u: ConservedState::from_macro(&m),
            labels: RegimeLabels::uniform(m.len(), Regime::Fluid),
            f,
            m,
            kn,
        })
    }

    /// Labels from the equilibrium test: cells within `delta0` of their
    /// Maxwellian start fluid, the rest kinetic.
    pub fn from_distribution(f: DistributionField, kn: KnudsenField, th: &CriterionThresholds) -> Result<Self> {
        check_shapes(f.n_cells(), f.spatial(), &kn)?;
        let n = f.n_cells();
        let vg = f.velocity().clone();
        let mut m = MacroState::uniform(n, Primitive::new(1.0, 0.0, 0.0, 1.0));
        let mut u = ConservedState::from_macro(&m);
        let near = crit_kinetic_to_fluid(&f, th)?;
        let mut labels = RegimeLabels::uniform(n, Regime::Kinetic);
        for i in 0..n {
            m.set(i, slice_moments(f.cell(i), &vg, i)?);
            u.set(i, slice_conserved(f.cell(i), &vg));
            if near[i] {
                labels.set(i, Regime::Fluid);
            }
        }
        Ok(Self { f, m, u, labels, kn })
    }

    pub fn n_cells(&self) -> usize {
        self.m.len()
    }
}

fn check_shapes(n: usize, sg: &SpatialGrid, kn: &KnudsenField) -> Result<()> {
    if n != sg.n_cells() || kn.eps.len() != n {
        return Err(Error::Shape(format!(
            "state has {n} cells, grid {}, Knudsen field {}",
            sg.n_cells(),
            kn.eps.len()
        )));
    }
    Ok(())
}

/// Breakdown indicator of the Euler closure, evaluated on every cell.
pub fn crit_fluid_to_kinetic(
    m: &MacroState,
    sg: &SpatialGrid,
    kn: &KnudsenField,
    coeffs: &TransportCoeffs,
    th: &CriterionThresholds,
) -> Vec<bool> {
    let du = derivative(&m.ux, sg);
    let dtemp = derivative(&m.temp, sg);
    (0..m.len())
        .map(|i| {
            breakdown(
                kn.eps[i], m.rho[i], m.temp[i], du[i], dtemp[i], coeffs, th.eta0,
            )
        })
        .collect()
}

/// `|a + b| > eta0 || |a| > eta0` with `a = eps mu/(rho T) du`,
/// `b = eps^2 kappa^2/(rho^2 T^3) dT^2`.
pub fn breakdown(eps: f64, rho: f64, temp: f64, du: f64, dtemp: f64, c: &TransportCoeffs, eta0: f64) -> bool {
    let a = eps * c.mu / (rho * temp) * du;
    let b = eps * eps * c.kappa * c.kappa / (rho * rho * temp.powi(3)) * dtemp * dtemp;
    (a + b).abs() > eta0 || a.abs() > eta0
}

/// Equilibrium test `||f - M[f]||_{L1_v} <= delta0` on every cell.
pub fn crit_kinetic_to_fluid(f: &DistributionField, th: &CriterionThresholds) -> Result<Vec<bool>> {
    let vg = f.velocity();
    let mut eq = vec![0.0; vg.slice_len()];
    (0..f.n_cells())
        .map(|i| {
            let p = slice_moments(f.cell(i), vg, i)?;
            maxwellian_matched_slice(p, vg, &mut eq);
            Ok(slice_l1(f.cell(i), &eq, vg) <= th.delta0)
        })
        .collect()
}

/// Discrete Maxwellian carrying exactly the moments of `m`.
pub fn lift(m: Primitive, vg: &VelocityGrid) -> Vec<f64> {
    let mut out = vec![0.0; vg.slice_len()];
    maxwellian_matched_slice(m, vg, &mut out);
    out
}

pub fn project(slice: &[f64], vg: &VelocityGrid, cell: usize) -> Result<Primitive> {
    slice_moments(slice, vg, cell)
}

/// Interface ghost data: fluid cells lifted for the kinetic solver and kinetic
/// cells projected for the fluid solver, both sorted by cell index.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostSync {
    pub lifted: Vec<(usize, Vec<f64>)>,
    pub projected: Vec<(usize, Primitive)>,
}

/// Cells of regime `r` lying within [`GHOSTS`] cells of the other regime.
fn interface_cells(labels: &[Regime], r: Regime, boundary: Boundary) -> Vec<usize> {
    let n = labels.len();
    (0..n)
        .filter(|&i| labels[i] == r)
        .filter(|&i| {
            (1..=GHOSTS).any(|d| {
                let near = |j: Option<usize>| j.is_some_and(|j| labels[j] != r);
                match boundary {
                    Boundary::Periodic => near(Some((i + d) % n)) || near(Some((i + n - d % n) % n)),
                    Boundary::Specular => near((i + d < n).then_some(i + d)) || near(i.checked_sub(d)),
                }
            })
        })
        .collect()
}

pub fn ghost_sync(state: &HybridState) -> Result<GhostSync> {
    let (sg, vg) = (state.f.spatial(), state.f.velocity());
    let labels = state.labels.as_slice();
    let lifted = interface_cells(labels, Regime::Fluid, sg.boundary())
        .into_iter()
        .map(|i| (i, lift(state.m.get(i), vg)))
        .collect();
    let projected = interface_cells(labels, Regime::Kinetic, sg.boundary())
        .into_iter()
        .map(|i| Ok((i, project(state.f.cell(i), vg, i)?)))
        .collect::<Result<_>>()?;
    Ok(GhostSync { lifted, projected })
}

/// Per-step bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub fluid_to_kinetic: Vec<usize>,
    pub kinetic_to_fluid: Vec<usize>,
    /// Solver updates received by each cell during the step.
    pub updates: Vec<u8>,
    pub kinetic_fraction: f64,
}

impl StepReport {
    pub fn partition_ok(&self) -> bool {
        self.updates.iter().all(|u| *u == 1)
    }
}

fn cell_of(e: &Error) -> usize {
    match e {
        Error::InvalidState { cell, .. }
        | Error::DegenerateDensity { cell, .. }
        | Error::NumericBreakdown { cell }
        | Error::FluidVacuum { cell }
        | Error::Regime { cell, .. } => *cell,
        _ => 0,
    }
}

fn annotate(regime: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Stability { .. } | Error::Shape(_) | Error::Config(_) => e,
        other => Error::Regime {
            regime,
            cell: cell_of(&other),
            source: Box::new(other),
        },
    }
}

pub fn hybrid_step(state: &HybridState, kernel: &SpectralKernel, cfg: &HybridConfig) -> Result<HybridState> {
    hybrid_step_report(state, kernel, cfg).map(|(s, _)| s)
}

/// One hybrid step together with its transition report.
pub fn hybrid_step_report(
    state: &HybridState,
    kernel: &SpectralKernel,
    cfg: &HybridConfig,
) -> Result<(HybridState, StepReport)> {
    cfg.thresholds.validate()?;
    let (sg, vg) = (state.f.spatial().clone(), state.f.velocity().clone());
    let n = sg.n_cells();
    let s = vg.slice_len();
    let dt = cfg.dt;
    if cfg.cfl_check {
        check_cfl(dt, max_stable_dt(&vg, &sg))?;
    }
    let mut next = state.clone();
    let mut updates = vec![0u8; n];

    // (a) breakdown of the fluid closure
    let crit = crit_fluid_to_kinetic(&state.m, &sg, &state.kn, &cfg.coeffs, &cfg.thresholds);
    let mut fluid_to_kinetic = Vec::new();
    for i in 0..n {
        if state.labels.get(i) == Regime::Fluid && crit[i] {
            next.labels.set(i, Regime::Kinetic);
            let p = to_primitive(state.u.get(i), i).map_err(annotate("fluid"))?;
            maxwellian_matched_slice(p, &vg, next.f.cell_mut(i));
            fluid_to_kinetic.push(i);
        }
    }
    let labels: Vec<Regime> = next.labels.as_slice().to_vec();
    let kinetic: Vec<bool> = labels.iter().map(|l| *l == Regime::Kinetic).collect();
    let any_kinetic = kinetic.iter().any(|k| *k);
    let any_fluid = kinetic.iter().any(|k| !*k);

    // kinetic transport over the padded domain, fluid neighbours lifted
    let mut fstar = vec![0.0; n * s];
    let mut face_flux = vec![0.0; (n + 1) * s];
    if any_kinetic {
        let mut padded = vec![0.0; (n + 2 * GHOSTS) * s];
        for i in 0..n {
            let dst = &mut padded[(i + GHOSTS) * s..(i + GHOSTS + 1) * s];
            if kinetic[i] {
                dst.copy_from_slice(next.f.cell(i));
            }
        }
        for i in interface_cells(&labels, Regime::Fluid, sg.boundary()) {
            let p = to_primitive(state.u.get(i), i).map_err(annotate("fluid"))?;
            let dst = &mut padded[(i + GHOSTS) * s..(i + GHOSTS + 1) * s];
            maxwellian_matched_slice(p, &vg, dst);
        }
        fill_ghosts(&mut padded, n, &vg, sg.boundary());
        transport_padded(&padded, n, &vg, &sg, dt, &mut fstar, Some(&mut face_flux));
    }

    // (b) fluid update with flux matching at regime interfaces
    if any_fluid {
        let mut flux = heun_fluxes(&state_for_fluid(&next, &kinetic, &vg), &sg, dt, Some(&kinetic))
            .map_err(annotate("fluid"))?;
        for (face, fl) in flux.iter_mut().enumerate() {
            let (left, right) = face_cells(face, n, sg.boundary());
            let mixed = match (left, right) {
                (Some(l), Some(r)) => kinetic[l] != kinetic[r],
                _ => false,
            };
            if mixed {
                *fl = flux_moments(&face_flux[face * s..(face + 1) * s], &vg);
            }
        }
        let lam = dt / sg.dx();
        for i in (0..n).filter(|&i| !kinetic[i]) {
            let u = apply_fluxes(state.u.get(i), flux[i], flux[i + 1], lam);
            let p = to_primitive(u, i).map_err(annotate("fluid"))?;
            next.u.set(i, u);
            next.m.set(i, p);
            updates[i] += 1;
        }
    }

    // (c) kinetic collision step on kinetic cells
    if any_kinetic {
        let idx: Vec<usize> = (0..n).filter(|&i| kinetic[i]).collect();
        let f_old = &next.f;
        let results: Vec<Vec<f64>> = idx
            .par_iter()
            .map_init(
                || CellScratch::new(kernel),
                |scratch, &i| {
                    let mut out = vec![0.0; s];
                    collide_cell(
                        f_old.cell(i),
                        &fstar[i * s..(i + 1) * s],
                        state.kn.inv(i),
                        dt,
                        kernel,
                        &vg,
                        scratch,
                        &mut out,
                        i,
                    )
                    .map(|_| out)
                },
            )
            .collect::<Result<_>>()
            .map_err(annotate("kinetic"))?;
        for (&i, out) in idx.iter().zip(results) {
            next.f.cell_mut(i).copy_from_slice(&out);
            let p = slice_moments(&out, &vg, i).map_err(annotate("kinetic"))?;
            next.m.set(i, p);
            next.u.set(i, slice_conserved(&out, &vg));
            updates[i] += 1;
        }
        next.f.check_negative(cfg.tol_neg);
    }

    // (d) return equilibrated kinetic cells to the fluid solver
    let mut kinetic_to_fluid = Vec::new();
    let mut eq = vec![0.0; s];
    for i in (0..n).filter(|&i| kinetic[i]) {
        maxwellian_matched_slice(next.m.get(i), &vg, &mut eq);
        if slice_l1(next.f.cell(i), &eq, &vg) <= cfg.thresholds.delta0 {
            next.labels.set(i, Regime::Fluid);
            kinetic_to_fluid.push(i);
        }
    }
    next.labels.record();
    let report = StepReport {
        fluid_to_kinetic,
        kinetic_to_fluid,
        updates,
        kinetic_fraction: next.labels.kinetic_fraction(),
    };
    Ok((next, report))
}

/// Conserved field seen by the fluid solver: kinetic cells contribute their
/// projected moments as frozen interior ghosts.
fn state_for_fluid(next: &HybridState, kinetic: &[bool], vg: &VelocityGrid) -> ConservedState {
    let mut u = next.u.clone();
    for (i, k) in kinetic.iter().enumerate() {
        if *k {
            u.set(i, slice_conserved(next.f.cell(i), vg));
        }
    }
    u
}

fn face_cells(face: usize, n: usize, b: Boundary) -> (Option<usize>, Option<usize>) {
    match b {
        Boundary::Periodic => (Some((face + n - 1) % n), Some(face % n)),
        Boundary::Specular => (face.checked_sub(1), (face < n).then_some(face)),
    }
}

/// Velocity moments `(1, v1, v2, |v|^2/2)` of a kinetic face flux.
fn flux_moments(flux: &[f64], vg: &VelocityGrid) -> [f64; 4] {
    slice_conserved(flux, vg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::CollisionParams;
    use crate::fluid::euler_step;
    use crate::kinetic::{ap_step, KineticStepConfig};
    use crate::phase_space::maxwellian_slice;
    use crate::phase_space::moments;
    use std::f64::consts::PI;

    fn th() -> CriterionThresholds {
        CriterionThresholds::default()
    }

    #[test]
    fn breakdown_examples() {
        let c = TransportCoeffs::default();
        assert!(breakdown(1.0, 1.0, 1.0, 0.02, 0.0, &c, 1e-2));
        assert!(!breakdown(1e-4, 1.0, 1.0, 0.02, 0.0, &c, 1e-2));
        // independent evaluation of the temperature term
        let (eps, rho, t, dtemp): (f64, f64, f64, f64) = (0.5, 2.0, 0.5, 0.3);
        let b = eps * eps / (rho * rho * t * t * t) * dtemp * dtemp;
        assert!((b - 0.045).abs() < 1e-15);
        assert!(breakdown(eps, rho, t, 0.0, dtemp, &c, 0.04));
        assert!(!breakdown(eps, rho, t, 0.0, dtemp, &c, 0.05));
    }

    #[test]
    fn uniform_state_never_breaks_down() {
        let sg = SpatialGrid::new(10, 0.0, 1.0, Boundary::Periodic).unwrap();
        let m = MacroState::uniform(10, Primitive::new(1.0, 0.3, 0.0, 1.0));
        let kn = KnudsenField::uniform(10, 1.0).unwrap();
        assert!(crit_fluid_to_kinetic(&m, &sg, &kn, &TransportCoeffs::default(), &th())
            .iter()
            .all(|c| !c));
    }

    #[test]
    fn equilibrium_test_examples() {
        let sg = SpatialGrid::new(4, -0.5, 0.5, Boundary::Periodic).unwrap();
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let m = MacroState::uniform(4, Primitive::new(1.0, 0.2, 0.0, 0.8));
        let mut f = DistributionField::zeros(&sg, &vg);
        for i in 0..4 {
            maxwellian_slice(m.get(i), &vg, f.cell_mut(i));
        }
        assert!(crit_kinetic_to_fluid(&f, &th()).unwrap().iter().all(|c| *c));
        let dp = DistributionField::from_fn(&sg, &vg, |_, v1, v2| {
            let (a, b, t) = (0.75, -0.75, 0.25);
            0.5 * ((-((v1 - a).powi(2) + (v2 - b).powi(2)) / t).exp()
                + (-((v1 + a).powi(2) + (v2 + b).powi(2)) / t).exp())
        })
        .unwrap();
        assert!(crit_kinetic_to_fluid(&dp, &th()).unwrap().iter().all(|c| !c));
    }

    #[test]
    fn equilibrium_threshold_is_inclusive() {
        let sg = SpatialGrid::new(4, 0.0, 1.0, Boundary::Periodic).unwrap();
        let vg = VelocityGrid::new(8, 8.0).unwrap();
        let f = DistributionField::from_fn(&sg, &vg, |_, v1, v2| {
            (-(v1 * v1 + v2 * v2) / 2.0).exp() * (1.0 + 0.1 * (v1 * v1 - 1.0) * (v2 * v2 - 1.0))
        })
        .unwrap();
        let p = slice_moments(f.cell(0), &vg, 0).unwrap();
        let mut eq = vec![0.0; 64];
        maxwellian_matched_slice(p, &vg, &mut eq);
        let d = slice_l1(f.cell(0), &eq, &vg);
        let exact = CriterionThresholds { eta0: 1e-2, delta0: d };
        assert!(crit_kinetic_to_fluid(&f, &exact).unwrap()[0]);
        let below = CriterionThresholds { eta0: 1e-2, delta0: d * (1.0 - 1e-12) };
        assert!(!crit_kinetic_to_fluid(&f, &below).unwrap()[0]);
    }

    fn four_cell_state(labels: [Regime; 6]) -> HybridState {
        let sg = SpatialGrid::new(6, 0.0, 1.0, Boundary::Specular).unwrap();
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let m = MacroState::uniform(6, Primitive::new(1.0, 0.1, 0.0, 1.0));
        let kn = KnudsenField::uniform(6, 1e-2).unwrap();
        let mut s = HybridState::from_macro(m, &sg, &vg, kn).unwrap();
        s.labels = RegimeLabels::from_vec(labels.to_vec());
        s
    }

    #[test]
    fn ghost_sync_on_the_four_cell_configuration() {
        use Regime::*;
        // fluid i-1, i; kinetic i+1, i+2 with i = 2
        let s = four_cell_state([Fluid, Fluid, Fluid, Kinetic, Kinetic, Kinetic]);
        let g = ghost_sync(&s).unwrap();
        assert_eq!(g.lifted.iter().map(|x| x.0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(g.projected.iter().map(|x| x.0).collect::<Vec<_>>(), vec![3, 4]);
        let vg = s.f.velocity();
        for (i, slice) in &g.lifted {
            assert_eq!(slice.as_slice(), s.f.cell(*i));
            let back = project(slice, vg, *i).unwrap();
            assert!((back.rho - 1.0).abs() < 1e-12 && (back.ux - 0.1).abs() < 1e-6 && (back.temp - 1.0).abs() < 1e-6);
        }
        for (_, p) in &g.projected {
            assert!((p.rho - 1.0).abs() < 1e-12 && (p.ux - 0.1).abs() < 1e-6);
        }
        let all = four_cell_state([Kinetic; 6]);
        let g = ghost_sync(&all).unwrap();
        assert!(g.lifted.is_empty() && g.projected.is_empty());
    }

    fn smooth_macro(sg: &SpatialGrid) -> MacroState {
        MacroState::from_fn(sg.n_cells(), |i| {
            let x = sg.center(i);
            Primitive::new(1.0 + 0.2 * (2.0 * PI * x).sin(), 0.3, 0.1, 1.0 + 0.1 * (2.0 * PI * x).cos())
        })
    }

    #[test]
    fn all_fluid_run_is_bitwise_euler() {
        let sg = SpatialGrid::new(20, 0.0, 1.0, Boundary::Periodic).unwrap();
        let vg = VelocityGrid::new(8, 8.0).unwrap();
        let kernel = SpectralKernel::build(CollisionParams::default(), &vg).unwrap();
        let kn = KnudsenField::uniform(20, 1e-4).unwrap();
        let m = smooth_macro(&sg);
        let mut h = HybridState::from_macro(m.clone(), &sg, &vg, kn).unwrap();
        let mut e = ConservedState::from_macro(&m);
        let cfg = HybridConfig::new(0.005);
        for _ in 0..10 {
            let (next, rep) = hybrid_step_report(&h, &kernel, &cfg).unwrap();
            assert!(rep.partition_ok());
            assert_eq!(next.labels.count(Regime::Kinetic), 0);
            h = next;
            e = euler_step(&e, &sg, 0.005).unwrap();
            assert_eq!(h.u, e);
        }
    }

    #[test]
    fn all_kinetic_run_matches_ap_step() {
        let sg = SpatialGrid::new(8, 0.0, 1.0, Boundary::Periodic).unwrap();
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let kernel = SpectralKernel::build(CollisionParams::default(), &vg).unwrap();
        let kn = KnudsenField::uniform(8, 0.1).unwrap();
        let f = DistributionField::from_fn(&sg, &vg, |x, v1, v2| {
            let r = 1.0 + 0.3 * (2.0 * PI * x).sin();
            r * 0.5 * ((-((v1 - 1.0).powi(2) + v2 * v2)).exp() + (-((v1 + 1.0).powi(2) + v2 * v2)).exp())
        })
        .unwrap();
        let h = HybridState::from_distribution(f.clone(), kn.clone(), &th()).unwrap();
        assert_eq!(h.labels.count(Regime::Kinetic), 8);
        let mut cfg = HybridConfig::new(0.01);
        cfg.thresholds.eta0 = 0.0;
        let (next, rep) = hybrid_step_report(&h, &kernel, &cfg).unwrap();
        assert!(rep.partition_ok());
        assert!(rep.kinetic_to_fluid.is_empty());
        let g = ap_step(&f, &kn, &kernel, &KineticStepConfig::new(0.01)).unwrap();
        assert_eq!(next.f.values(), g.values());
        assert_eq!(next.m, moments(&g).unwrap());
    }

    #[test]
    fn mixed_run_conserves_mass_and_keeps_invariants() {
        let sg = SpatialGrid::new(24, 0.0, 1.0, Boundary::Periodic).unwrap();
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let kernel = SpectralKernel::build(CollisionParams::default(), &vg).unwrap();
        let kn = KnudsenField::new(
            sg.centers().iter().map(|x| if (0.3..0.6).contains(x) { 0.05 } else { 1e-4 }).collect(),
        )
        .unwrap();
        let m = MacroState::from_fn(24, |i| {
            let x = sg.center(i);
            Primitive::new(1.0 + 0.3 * (2.0 * PI * x).sin(), 0.5 * (2.0 * PI * x).cos(), 0.0, 1.0)
        });
        let mut h = HybridState::from_macro(m, &sg, &vg, kn).unwrap();
        h.labels.enable_history();
        let mass = |h: &HybridState| h.u.totals(sg.dx())[0];
        let m0 = mass(&h);
        let cfg = HybridConfig::new(0.004);
        let mut saw_kinetic = false;
        for _ in 0..15 {
            let (next, rep) = hybrid_step_report(&h, &kernel, &cfg).unwrap();
            assert!(rep.partition_ok());
            saw_kinetic |= rep.kinetic_fraction > 0.0;
            for i in 0..24 {
                if next.labels.get(i) == Regime::Kinetic {
                    let p = slice_moments(next.f.cell(i), &vg, i).unwrap();
                    assert_eq!(p, next.m.get(i));
                }
            }
            h = next;
            assert!((mass(&h) - m0).abs() <= 1e-12 * m0);
        }
        assert!(saw_kinetic);
        let mut csv = Vec::new();
        h.labels.write_history_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 16 * 24);
        assert!(text.starts_with("step,cell,label\n0,0,"));
    }
}
