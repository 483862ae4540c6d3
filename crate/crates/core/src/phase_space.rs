//! Phase-space grids, distribution storage and velocity moments.
//!
//! The spatial variable is one-dimensional and the velocity variable is
//! two-dimensional. A [`DistributionField`] stores one `n_v x n_v` velocity
//! slice per spatial cell, row-major in `(v1, v2)`, cells contiguous.

use std::f64::consts::PI;

use log::warn;

use crate::error::{Error, Result};

/// Default tolerance for negative overshoots, relative to the field maximum.
pub const DEFAULT_TOL_NEG: f64 = 1e-8;
/// Densities at or below this value are treated as vacuum.
pub const DEFAULT_RHO_FLOOR: f64 = 1e-12;
/// Floor applied inside the logarithm of the entropy diagnostic.
pub const ENTROPY_FLOOR: f64 = 1e-30;

/// Uniform tensor velocity grid on `[-l_max, l_max)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    n_per_dim: usize,
    l_max: f64,
    nodes: Vec<f64>,
    cell_weight: f64,
}

impl VelocityGrid {
    pub fn new(n_per_dim: usize, l_max: f64) -> Result<Self> {
        if n_per_dim < 4 || n_per_dim % 2 != 0 {
            return Err(Error::Config(format!(
                "velocity points per dimension must be even and >= 4, got {n_per_dim}"
            )));
        }
        if !(l_max > 0.0 && l_max.is_finite()) {
            return Err(Error::Config(format!("l_max must be positive, got {l_max}")));
        }
        let h = 2.0 * l_max / n_per_dim as f64;
        let nodes = (0..n_per_dim).map(|j| -l_max + j as f64 * h).collect();
        Ok(Self {
            n_per_dim,
            l_max,
            nodes,
            cell_weight: h * h,
        })
    }

    pub fn n_per_dim(&self) -> usize {
        self.n_per_dim
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    /// 1D node list, shared by both velocity dimensions.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l_max / self.n_per_dim as f64
    }

    /// Rectangle-rule quadrature weight `h^2`.
    pub fn cell_weight(&self) -> f64 {
        self.cell_weight
    }

    /// Number of nodes in one velocity slice.
    pub fn slice_len(&self) -> usize {
        self.n_per_dim * self.n_per_dim
    }

    /// Velocity `(v1, v2)` of flat slice index `k`.
    #[inline]
    pub fn node(&self, k: usize) -> (f64, f64) {
        (self.nodes[k / self.n_per_dim], self.nodes[k % self.n_per_dim])
    }

    /// Index of the node mirrored in `v1` (`v1 -> -v1`). The node at `-l_max`
    /// has no mirror on the grid and maps to itself.
    #[inline]
    pub fn mirror_v1(&self, i1: usize) -> usize {
        (self.n_per_dim - i1) % self.n_per_dim
    }
}

/// Spatial boundary treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Specular,
}

/// Uniform 1D mesh of cell averages.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    n_cells: usize,
    x_min: f64,
    x_max: f64,
    boundary: Boundary,
    dx: f64,
}

impl SpatialGrid {
    pub fn new(n_cells: usize, x_min: f64, x_max: f64, boundary: Boundary) -> Result<Self> {
        if n_cells < 4 {
            return Err(Error::Config(format!("need at least 4 cells, got {n_cells}")));
        }
        if !(x_max > x_min) {
            return Err(Error::Config(format!("empty domain [{x_min}, {x_max}]")));
        }
        Ok(Self {
            n_cells,
            x_min,
            x_max,
            boundary,
            dx: (x_max - x_min) / n_cells as f64,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Same domain and boundary with `n_cells` cells.
    pub fn with_cells(&self, n_cells: usize) -> Result<Self> {
        Self::new(n_cells, self.x_min, self.x_max, self.boundary)
    }
}

/// Macroscopic state of a single cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub ux: f64,
    pub uy: f64,
    pub temp: f64,
}

impl Primitive {
    pub fn new(rho: f64, ux: f64, uy: f64, temp: f64) -> Self {
        Self { rho, ux, uy, temp }
    }

    /// Total energy `1/2 rho |u|^2 + rho T` (two velocity dimensions).
    pub fn energy(&self) -> f64 {
        0.5 * self.rho * (self.ux * self.ux + self.uy * self.uy) + self.rho * self.temp
    }

    pub fn is_valid(&self) -> bool {
        self.rho > 0.0
            && self.temp > 0.0
            && self.rho.is_finite()
            && self.temp.is_finite()
            && self.ux.is_finite()
            && self.uy.is_finite()
    }
}

/// Per-cell density, bulk velocity and temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub rho: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub temp: Vec<f64>,
}

impl MacroState {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> Primitive) -> Self {
        let mut m = Self::with_len(n);
        for i in 0..n {
            m.set(i, f(i));
        }
        m
    }

    pub fn uniform(n: usize, p: Primitive) -> Self {
        Self::from_fn(n, |_| p)
    }

    fn with_len(n: usize) -> Self {
        Self {
            rho: vec![0.0; n],
            ux: vec![0.0; n],
            uy: vec![0.0; n],
            temp: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Primitive {
        Primitive::new(self.rho[i], self.ux[i], self.uy[i], self.temp[i])
    }

    #[inline]
    pub fn set(&mut self, i: usize, p: Primitive) {
        self.rho[i] = p.rho;
        self.ux[i] = p.ux;
        self.uy[i] = p.uy;
        self.temp[i] = p.temp;
    }

    pub fn energy(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.get(i).energy()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.len() {
            if !self.get(i).is_valid() {
                return Err(Error::InvalidState {
                    cell: i,
                    reason: format!("{:?}", self.get(i)),
                });
            }
        }
        Ok(())
    }
}

/// Per-cell Knudsen number. `f64::INFINITY` switches collisions off.
#[derive(Debug, Clone, PartialEq)]
pub struct KnudsenField {
    pub eps: Vec<f64>,
}

impl KnudsenField {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if let Some(i) = eps.iter().position(|e| !(*e > 0.0)) {
            return Err(Error::InvalidState {
                cell: i,
                reason: format!("Knudsen number must be positive, got {}", eps[i]),
            });
        }
        Ok(Self { eps })
    }

    pub fn uniform(n: usize, eps: f64) -> Result<Self> {
        Self::new(vec![eps; n])
    }

    /// `eps0 + 1/2 [tanh(1 - 11x) + tanh(1 + 11x)]` at the cell centers.
    pub fn mixed_regime(sg: &SpatialGrid, eps0: f64) -> Result<Self> {
        Self::new(sg.centers().into_iter().map(|x| mixed_regime_eps(x, eps0)).collect())
    }

    #[inline]
    pub fn inv(&self, i: usize) -> f64 {
        1.0 / self.eps[i]
    }
}

/// Smooth Knudsen profile going from `eps0` near `|x| = 1/2` to O(1) at the origin.
pub fn mixed_regime_eps(x: f64, eps0: f64) -> f64 {
    eps0 + 0.5 * ((1.0 - 11.0 * x).tanh() + (1.0 + 11.0 * x).tanh())
}

/// Discrete distribution `f(x_i, v_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    values: Vec<f64>,
    sg: SpatialGrid,
    vg: VelocityGrid,
}

impl DistributionField {
    pub fn zeros(sg: &SpatialGrid, vg: &VelocityGrid) -> Self {
        Self {
            values: vec![0.0; sg.n_cells() * vg.slice_len()],
            sg: sg.clone(),
            vg: vg.clone(),
        }
    }

    pub fn from_values(sg: &SpatialGrid, vg: &VelocityGrid, values: Vec<f64>) -> Result<Self> {
        let expected = sg.n_cells() * vg.slice_len();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState {
                cell: k / vg.slice_len(),
                reason: "non-finite distribution value".into(),
            });
        }
        Ok(Self {
            values,
            sg: sg.clone(),
            vg: vg.clone(),
        })
    }

    /// Fill every cell from `f(x, v1, v2)`.
    pub fn from_fn(sg: &SpatialGrid, vg: &VelocityGrid, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let mut out = Self::zeros(sg, vg);
        for i in 0..sg.n_cells() {
            let x = sg.center(i);
            for (k, v) in out.cell_mut(i).iter_mut().enumerate() {
                let (v1, v2) = vg.node(k);
                *v = f(x, v1, v2);
            }
        }
        Self::from_values(sg, vg, out.values)
    }

    pub fn spatial(&self) -> &SpatialGrid {
        &self.sg
    }

    pub fn velocity(&self) -> &VelocityGrid {
        &self.vg
    }

    pub fn n_cells(&self) -> usize {
        self.sg.n_cells()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn cell(&self, i: usize) -> &[f64] {
        let n = self.vg.slice_len();
        &self.values[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.vg.slice_len();
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn same_grids(&self, other: &Self) -> bool {
        self.sg == other.sg && self.vg == other.vg
    }

    /// Count of values below `-tol_neg * max|f|`; logs a warning when nonzero.
    pub fn check_negative(&self, tol_neg: f64) -> usize {
        let max = self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let bound = -tol_neg * max;
        let count = self.values.iter().filter(|v| **v < bound).count();
        if count > 0 {
            warn!("{count} distribution values below -{tol_neg:e} * max");
        }
        count
    }

    /// `sum_i sum_v f w dx`.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.vg.cell_weight() * self.sg.dx()
    }
}

/// Evaluate the Maxwellian of `p` on the velocity grid into `out`.
pub fn maxwellian_slice(p: Primitive, vg: &VelocityGrid, out: &mut [f64]) {
    let n = vg.n_per_dim();
    let inv2t = 0.5 / p.temp;
    let scale = p.rho / (2.0 * PI * p.temp);
    let gx: Vec<f64> = vg.nodes().iter().map(|v| (-(v - p.ux).powi(2) * inv2t).exp()).collect();
    let gy: Vec<f64> = vg.nodes().iter().map(|v| (-(v - p.uy).powi(2) * inv2t).exp()).collect();
    for i1 in 0..n {
        let a = scale * gx[i1];
        let row = &mut out[i1 * n..(i1 + 1) * n];
        for (o, g) in row.iter_mut().zip(&gy) {
            *o = a * g;
        }
    }
}

/// Discrete Maxwellian `exp(a + b.v - |v|^2 / (2 theta))` whose discrete
/// mass, momentum and energy equal those of `p` to round-off.
///
/// The pointwise Gaussian loses temperature on coarse velocity grids, so
/// relaxing towards it cools the gas step after step. The exponent is fitted
/// by damped Newton iteration on the four conserved moments; the tensor
/// structure keeps each iteration linear in `n_per_dim`. Falls back to the
/// mass-rescaled Gaussian when the fit fails (moments outside what the grid
/// can represent).
pub fn maxwellian_matched_slice(p: Primitive, vg: &VelocityGrid, out: &mut [f64]) {
    match fit_discrete_maxwellian(p, vg) {
        Some((a, b1, b2, t4)) => {
            let g = |b: f64| -> Vec<f64> { vg.nodes().iter().map(|v| (b * v + 0.5 * t4 * v * v).exp()).collect() };
            let (g1, g2) = (g(b1), g(b2));
            let n = vg.n_per_dim();
            let ea = a.exp();
            for i1 in 0..n {
                let c = ea * g1[i1];
                for (o, y) in out[i1 * n..(i1 + 1) * n].iter_mut().zip(&g2) {
                    *o = c * y;
                }
            }
        }
        None => {
            maxwellian_slice(p, vg, out);
            let mass: f64 = out.iter().sum::<f64>() * vg.cell_weight();
            if mass > 0.0 {
                let s = p.rho / mass;
                out.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
}

/// 1D weighted sums `sum_j v_j^k exp(b v_j + t4 v_j^2 / 2)`, `k = 0..=4`.
fn line_moments(nodes: &[f64], b: f64, t4: f64) -> [f64; 5] {
    let mut m = [0.0; 5];
    for &v in nodes {
        let g = (b * v + 0.5 * t4 * v * v).exp();
        let mut p = g;
        for mk in m.iter_mut() {
            *mk += p;
            p *= v;
        }
    }
    m
}

/// Parameters `(a, b1, b2, t4)` of `exp(a + b1 v1 + b2 v2 + t4 |v|^2 / 2)`.
fn fit_discrete_maxwellian(p: Primitive, vg: &VelocityGrid) -> Option<(f64, f64, f64, f64)> {
    use nalgebra::{Matrix4, Vector4};
    if !p.is_valid() {
        return None;
    }
    let target = Vector4::new(p.rho, p.rho * p.ux, p.rho * p.uy, p.energy());
    let scale = p.rho * (1.0 + p.ux.abs() + p.uy.abs() + p.energy() / p.rho);
    let w = vg.cell_weight();
    let nodes = vg.nodes();
    // moments and Jacobian (second moments of (1, v1, v2, |v|^2/2)) at theta
    let eval = |th: &Vector4<f64>| -> Option<(Vector4<f64>, Matrix4<f64>)> {
        let m = line_moments(nodes, th[1], th[3]);
        let n = line_moments(nodes, th[2], th[3]);
        let c = th[0].exp() * w;
        let mom = Vector4::new(m[0] * n[0], m[1] * n[0], m[0] * n[1], 0.5 * (m[2] * n[0] + m[0] * n[2])) * c;
        let e1 = 0.5 * (m[3] * n[0] + m[1] * n[2]);
        let e2 = 0.5 * (m[2] * n[1] + m[0] * n[3]);
        let ee = 0.25 * (m[4] * n[0] + 2.0 * m[2] * n[2] + m[0] * n[4]);
        #[rustfmt::skip]
        let jac = Matrix4::new(
            mom[0], mom[1], mom[2], mom[3],
            mom[1], m[2] * n[0] * c, m[1] * n[1] * c, e1 * c,
            mom[2], m[1] * n[1] * c, m[0] * n[2] * c, e2 * c,
            mom[3], e1 * c, e2 * c, ee * c,
        );
        (mom.iter().chain(jac.iter()).all(|v| v.is_finite())).then_some((mom, jac))
    };
    let mut th = Vector4::new(
        (p.rho / (2.0 * PI * p.temp)).ln() - (p.ux * p.ux + p.uy * p.uy) / (2.0 * p.temp),
        p.ux / p.temp,
        p.uy / p.temp,
        -1.0 / p.temp,
    );
    let (mut mom, mut jac) = eval(&th)?;
    let mut res = (mom - target).norm();
    for _ in 0..60 {
        if res <= 1e-14 * scale {
            return Some((th[0], th[1], th[2], th[3]));
        }
        let step = jac.cholesky()?.solve(&(target - mom));
        let mut h = 1.0;
        loop {
            let trial = th + step * h;
            if trial[3] < 0.0 {
                if let Some((m2, j2)) = eval(&trial) {
                    let r2 = (m2 - target).norm();
                    if r2 < res {
                        (th, mom, jac, res) = (trial, m2, j2, r2);
                        break;
                    }
                }
            }
            h *= 0.5;
            if h < 1e-10 {
                return None;
            }
        }
    }
    (res <= 1e-11 * scale).then_some((th[0], th[1], th[2], th[3]))
}

/// Local Maxwellian of every cell of `m`.
pub fn maxwellian(m: &MacroState, sg: &SpatialGrid, vg: &VelocityGrid) -> Result<DistributionField> {
    if m.len() != sg.n_cells() {
        return Err(Error::Shape(format!(
            "macro state has {} cells, grid has {}",
            m.len(),
            sg.n_cells()
        )));
    }
    let mut f = DistributionField::zeros(sg, vg);
    for i in 0..m.len() {
        let p = m.get(i);
        if !p.is_valid() {
            return Err(Error::InvalidState {
                cell: i,
                reason: format!("cannot build Maxwellian from {p:?}"),
            });
        }
        let slice = f.cell_mut(i);
        maxwellian_slice(p, vg, slice);
        if slice.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState {
                cell: i,
                reason: "non-finite Maxwellian value".into(),
            });
        }
    }
    Ok(f)
}

/// Density, bulk velocity and temperature of one velocity slice.
///
/// `cell` is only used to label errors.
pub fn slice_moments(slice: &[f64], vg: &VelocityGrid, cell: usize) -> Result<Primitive> {
    let n = vg.n_per_dim();
    let nodes = vg.nodes();
    let w = vg.cell_weight();
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i1 in 0..n {
        let row = &slice[i1 * n..(i1 + 1) * n];
        let mut r0 = 0.0;
        let mut r2 = 0.0;
        for (f, v2) in row.iter().zip(nodes) {
            r0 += f;
            r2 += f * v2;
        }
        m0 += r0;
        m1 += r0 * nodes[i1];
        m2 += r2;
    }
    let rho = m0 * w;
    if !(rho > DEFAULT_RHO_FLOOR) {
        warn!("degenerate density {rho:e} in cell {cell}");
        return Err(Error::DegenerateDensity {
            cell,
            rho,
            floor: DEFAULT_RHO_FLOOR,
        });
    }
    let ux = m1 * w / rho;
    let uy = m2 * w / rho;
    let mut e = 0.0;
    for i1 in 0..n {
        let d1 = (nodes[i1] - ux).powi(2);
        let row = &slice[i1 * n..(i1 + 1) * n];
        for (f, v2) in row.iter().zip(nodes) {
            e += f * (d1 + (v2 - uy).powi(2));
        }
    }
    let temp = e * w / (2.0 * rho);
    Ok(Primitive::new(rho, ux, uy, temp))
}

/// Macroscopic moments of every cell.
pub fn moments(f: &DistributionField) -> Result<MacroState> {
    let mut m = MacroState::with_len(f.n_cells());
    for i in 0..f.n_cells() {
        m.set(i, slice_moments(f.cell(i), f.velocity(), i)?);
    }
    Ok(m)
}

/// Conserved moments `(rho, rho ux, rho uy, E)` of a slice.
pub fn slice_conserved(slice: &[f64], vg: &VelocityGrid) -> [f64; 4] {
    let mut acc = [0.0; 4];
    for (k, f) in slice.iter().enumerate() {
        let (v1, v2) = vg.node(k);
        acc[0] += f;
        acc[1] += f * v1;
        acc[2] += f * v2;
        acc[3] += f * 0.5 * (v1 * v1 + v2 * v2);
    }
    acc.map(|a| a * vg.cell_weight())
}

/// Pressure tensor and heat flux per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxMoments {
    pub pressure: Vec<[[f64; 2]; 2]>,
    pub heat_flux: Vec<[f64; 2]>,
}

pub fn aux_moments(f: &DistributionField) -> Result<AuxMoments> {
    let vg = f.velocity();
    let w = vg.cell_weight();
    let mut pressure = Vec::with_capacity(f.n_cells());
    let mut heat_flux = Vec::with_capacity(f.n_cells());
    for i in 0..f.n_cells() {
        let p = slice_moments(f.cell(i), vg, i)?;
        let mut pt = [[0.0; 2]; 2];
        let mut q = [0.0; 2];
        for (k, fv) in f.cell(i).iter().enumerate() {
            let (v1, v2) = vg.node(k);
            let c = [v1 - p.ux, v2 - p.uy];
            let c2 = c[0] * c[0] + c[1] * c[1];
            for a in 0..2 {
                for b in 0..2 {
                    pt[a][b] += c[a] * c[b] * fv;
                }
                q[a] += 0.5 * c[a] * c2 * fv;
            }
        }
        pressure.push(pt.map(|row| row.map(|x| x * w)));
        heat_flux.push(q.map(|x| x * w));
    }
    Ok(AuxMoments { pressure, heat_flux })
}

/// Discrete `L^1_v` distance of two slices.
pub fn slice_l1(a: &[f64], b: &[f64], vg: &VelocityGrid) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * vg.cell_weight()
}

/// Per-cell discrete `L^1_v` distance.
pub fn l1_distance(f: &DistributionField, g: &DistributionField) -> Result<Vec<f64>> {
    if !f.same_grids(g) {
        return Err(Error::Shape("distribution fields live on different grids".into()));
    }
    Ok((0..f.n_cells())
        .map(|i| slice_l1(f.cell(i), g.cell(i), f.velocity()))
        .collect())
}

/// `sum f log(max(f, floor)) w` for one slice.
pub fn slice_entropy(slice: &[f64], vg: &VelocityGrid) -> f64 {
    slice
        .iter()
        .map(|f| f * f.max(ENTROPY_FLOOR).ln())
        .sum::<f64>()
        * vg.cell_weight()
}

/// Per-cell entropy diagnostic.
pub fn entropy(f: &DistributionField) -> Vec<f64> {
    (0..f.n_cells())
        .map(|i| slice_entropy(f.cell(i), f.velocity()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grids(nv: usize) -> (SpatialGrid, VelocityGrid) {
        (
            SpatialGrid::new(4, 0.0, 1.0, Boundary::Periodic).unwrap(),
            VelocityGrid::new(nv, 8.0).unwrap(),
        )
    }

    fn double_peak(vg: &VelocityGrid, rho0: f64, u0: (f64, f64), t0: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let (v1, v2) = vg.node(k);
            let a = ((v1 - u0.0).powi(2) + (v2 - u0.1).powi(2)) / t0;
            let b = ((v1 + u0.0).powi(2) + (v2 + u0.1).powi(2)) / t0;
            *o = 0.5 * rho0 * ((-a).exp() + (-b).exp());
        }
    }

    #[test]
    fn grid_invariants() {
        let vg = VelocityGrid::new(32, 8.0).unwrap();
        assert_eq!(vg.nodes()[0], -8.0);
        assert!((vg.nodes()[31] - 7.5).abs() < 1e-15);
        assert!((vg.cell_weight() - 0.25).abs() < 1e-15);
        assert!(VelocityGrid::new(7, 8.0).is_err());
        assert!(VelocityGrid::new(2, 8.0).is_err());
        let sg = SpatialGrid::new(10, 0.0, 1.0, Boundary::Specular).unwrap();
        assert!((sg.center(0) - 0.05).abs() < 1e-15);
        assert!(SpatialGrid::new(3, 0.0, 1.0, Boundary::Periodic).is_err());
        assert_eq!(vg.mirror_v1(0), 0);
        assert_eq!(vg.nodes()[vg.mirror_v1(5)], -vg.nodes()[5]);
    }

    #[test]
    fn maxwellian_peak_values() {
        let vg = VelocityGrid::new(32, 8.0).unwrap();
        let mut s = vec![0.0; vg.slice_len()];
        // node (0, 0) is index (16, 16)
        let k0 = 16 * 32 + 16;
        maxwellian_slice(Primitive::new(1.0, 0.0, 0.0, 1.0), &vg, &mut s);
        assert!((s[k0] - 1.0 / (2.0 * PI)).abs() < 1e-15);
        maxwellian_slice(Primitive::new(0.125, 0.0, 0.0, 0.25), &vg, &mut s);
        assert!((s[k0] - 0.0795775).abs() < 1e-7);
        // v = (1, -1) is index (18, 14)
        maxwellian_slice(Primitive::new(2.0, 1.0, -1.0, 0.5), &vg, &mut s);
        assert!((s[18 * 32 + 14] - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn maxwellian_rejects_invalid_state() {
        let (sg, vg) = grids(8);
        let m = MacroState::uniform(4, Primitive::new(1.0, 0.0, 0.0, -1.0));
        assert!(matches!(maxwellian(&m, &sg, &vg), Err(Error::InvalidState { cell: 0, .. })));
    }

    #[test]
    fn moments_of_maxwellian_recover_state() {
        let (sg, vg) = grids(32);
        for &(rho, ux, uy, t) in &[(1.0, 0.0, 0.0, 1.0), (0.125, 0.3, -0.2, 0.25), (2.0, 0.0, 0.0, 2.0), (2.0, 1.0, -1.0, 0.5)] {
            let m = MacroState::uniform(4, Primitive::new(rho, ux, uy, t));
            let back = moments(&maxwellian(&m, &sg, &vg).unwrap()).unwrap();
            for i in 0..4 {
                let p = back.get(i);
                assert!((p.rho - rho).abs() <= 1e-6, "{rho} {ux} {uy} {t}: {p:?}");
                assert!((p.ux - ux).abs() <= 1e-6);
                assert!((p.uy - uy).abs() <= 1e-6);
                // truncation at |v| = 8 costs about 1.3e-6 absolute at T = 2
                assert!((p.temp - t).abs() <= 1e-6 * t.max(1.0), "{t}: {}", p.temp - t);
            }
        }
    }

    #[test]
    fn quadrature_error_shrinks_with_resolution() {
        let p = Primitive::new(1.0, 0.2, 0.1, 0.3);
        let err = |n| {
            let vg = VelocityGrid::new(n, 8.0).unwrap();
            let mut s = vec![0.0; vg.slice_len()];
            maxwellian_slice(p, &vg, &mut s);
            let q = slice_moments(&s, &vg, 0).unwrap();
            (q.rho - p.rho).abs() + (q.temp - p.temp).abs()
        };
        assert!(err(32) < err(16));
    }

    #[test]
    fn zero_field_is_degenerate() {
        let (sg, vg) = grids(8);
        let f = DistributionField::zeros(&sg, &vg);
        assert!(matches!(moments(&f), Err(Error::DegenerateDensity { cell: 0, .. })));
    }

    #[test]
    fn double_peak_has_zero_bulk_velocity() {
        let vg = VelocityGrid::new(32, 8.0).unwrap();
        let mut s = vec![0.0; vg.slice_len()];
        double_peak(&vg, 1.0, (0.75, -0.75), 0.25, &mut s);
        let p = slice_moments(&s, &vg, 0).unwrap();
        assert!(p.ux.abs() < 1e-12 && p.uy.abs() < 1e-12);
    }

    #[test]
    fn maxwellian_aux_moments_are_isotropic() {
        let (sg, vg) = grids(32);
        let m = MacroState::uniform(4, Primitive::new(0.7, 0.4, -0.3, 0.8));
        let aux = aux_moments(&maxwellian(&m, &sg, &vg).unwrap()).unwrap();
        let p = 0.7 * 0.8;
        for i in 0..4 {
            let pt = aux.pressure[i];
            assert!((pt[0][0] - p).abs() < 1e-5);
            assert!((pt[1][1] - p).abs() < 1e-5);
            assert!(pt[0][1].abs() < 1e-5 && pt[1][0].abs() < 1e-5);
            assert!(aux.heat_flux[i][0].abs() < 1e-5 && aux.heat_flux[i][1].abs() < 1e-5);
        }
    }

    #[test]
    fn double_peak_pressure_is_anisotropic() {
        let (sg, vg) = grids(32);
        let mut f = DistributionField::zeros(&sg, &vg);
        for i in 0..4 {
            double_peak(&vg, 1.0, (0.75, -0.75), 0.25, f.cell_mut(i));
        }
        let aux = aux_moments(&f).unwrap();
        // Oracle: direct quadrature of -2 * (3/4)^2 * rho0/2 * (pi T0) for the cross term.
        let mut oracle = 0.0;
        let w = vg.cell_weight();
        for k in 0..vg.slice_len() {
            let (v1, v2) = vg.node(k);
            oracle += v1 * v2 * f.cell(0)[k] * w;
        }
        assert!((aux.pressure[0][0][1] - oracle).abs() < 1e-12);
        assert!(aux.pressure[0][0][1] < -0.1);
    }

    #[test]
    fn l1_distance_cases() {
        let (sg, vg) = grids(32);
        let m = MacroState::uniform(4, Primitive::new(1.0, 0.1, 0.0, 0.9));
        let f = maxwellian(&m, &sg, &vg).unwrap();
        assert!(l1_distance(&f, &f).unwrap().iter().all(|d| *d == 0.0));
        let g = maxwellian(&moments(&f).unwrap(), &sg, &vg).unwrap();
        assert!(l1_distance(&f, &g).unwrap().iter().all(|d| *d <= 1e-6));

        let mut dp = DistributionField::zeros(&sg, &vg);
        for i in 0..4 {
            double_peak(&vg, 1.0, (0.75, -0.75), 0.25, dp.cell_mut(i));
        }
        let eq = maxwellian(&moments(&dp).unwrap(), &sg, &vg).unwrap();
        assert!(l1_distance(&dp, &eq).unwrap().iter().all(|d| *d > 0.1));

        let other = DistributionField::zeros(&SpatialGrid::new(5, 0.0, 1.0, Boundary::Periodic).unwrap(), &vg);
        assert!(matches!(l1_distance(&f, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn entropy_of_scaled_maxwellian() {
        // H(a M) = a H(M) + a rho ln a, and for a Maxwellian
        // H = rho (ln(rho / (2 pi T)) - 1) in two velocity dimensions.
        let (sg, vg) = grids(32);
        let m = MacroState::uniform(4, Primitive::new(1.0, 0.0, 0.0, 1.0));
        let f = maxwellian(&m, &sg, &vg).unwrap();
        let h1 = entropy(&f)[0];
        let analytic = (1.0 / (2.0 * PI)).ln() - 1.0;
        assert!((h1 - analytic).abs() < 1e-6);
        let mut f2 = f.clone();
        f2.values_mut().iter_mut().for_each(|v| *v *= 2.0);
        let h2 = entropy(&f2)[0];
        assert!((h2 - (2.0 * h1 + 2.0 * 2f64.ln())).abs() < 1e-6);
        assert!((f2.total_mass() - 2.0 * f.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn matched_maxwellian_reproduces_all_moments() {
        for (n, p) in [
            (16, Primitive::new(0.3, 0.2, 0.0, 0.2)),
            (16, Primitive::new(0.125, 0.0, 0.0, 0.25)),
            (8, Primitive::new(1.0, -0.7, 0.4, 1.5)),
            (32, Primitive::new(2.0, 1.0, -1.0, 0.05)),
        ] {
            let vg = VelocityGrid::new(n, 8.0).unwrap();
            let mut s = vec![0.0; vg.slice_len()];
            maxwellian_matched_slice(p, &vg, &mut s);
            let q = slice_moments(&s, &vg, 0).unwrap();
            for (a, b) in [(q.rho, p.rho), (q.ux, p.ux), (q.uy, p.uy), (q.temp, p.temp)] {
                assert!((a - b).abs() < 1e-12, "{n} {p:?} -> {q:?}");
            }
            assert!(s.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn pointwise_maxwellian_is_cooler_on_a_coarse_grid() {
        // the reason the solvers use the moment-fitted form
        let vg = VelocityGrid::new(16, 8.0).unwrap();
        let p = Primitive::new(0.125, 0.0, 0.0, 0.25);
        let mut s = vec![0.0; vg.slice_len()];
        maxwellian_slice(p, &vg, &mut s);
        let q = slice_moments(&s, &vg, 0).unwrap();
        assert!(q.temp < 0.22, "{q:?}");
    }

    #[test]
    fn matched_maxwellian_agrees_with_the_gaussian_when_resolved() {
        let vg = VelocityGrid::new(32, 8.0).unwrap();
        let p = Primitive::new(1.0, 0.3, -0.2, 1.0);
        let (mut a, mut b) = (vec![0.0; vg.slice_len()], vec![0.0; vg.slice_len()]);
        maxwellian_matched_slice(p, &vg, &mut a);
        maxwellian_slice(p, &vg, &mut b);
        assert!(slice_l1(&a, &b, &vg) < 1e-8);
    }

    #[test]
    fn mixed_regime_profile_at_origin() {
        assert!((mixed_regime_eps(0.0, 1e-3) - (1e-3 + 1f64.tanh())).abs() < 1e-15);
        assert!((mixed_regime_eps(0.0, 1e-3) - 0.7626).abs() < 1e-4);
    }
}
