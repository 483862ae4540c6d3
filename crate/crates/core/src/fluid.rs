//! Second-order finite-volume solver for the compressible Euler system of a
//! two-dimensional monatomic gas (`p = rho T`, adiabatic index 2).
//!
//! Primitive variables are reconstructed with minmod-limited slopes, faces use
//! the Rusanov flux and time stepping is Heun's method in flux form.

use crate::error::{Error, Result};
use crate::phase_space::{Boundary, MacroState, Primitive, SpatialGrid};

/// Conserved variables `(rho, rho ux, rho uy, E)` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedState {
    pub rho: Vec<f64>,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Viscosity and conductivity surrogates used by the breakdown criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportCoeffs {
    pub mu: f64,
    pub kappa: f64,
}

impl Default for TransportCoeffs {
    fn default() -> Self {
        Self { mu: 1.0, kappa: 1.0 }
    }
}

impl ConservedState {
    pub fn from_macro(m: &MacroState) -> Self {
        let n = m.len();
        let mut s = Self {
            rho: vec![0.0; n],
            mx: vec![0.0; n],
            my: vec![0.0; n],
            energy: vec![0.0; n],
        };
        for i in 0..n {
            s.set(i, to_conserved(m.get(i)));
        }
        s
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn get(&self, i: usize) -> [f64; 4] {
        [self.rho[i], self.mx[i], self.my[i], self.energy[i]]
    }

    pub fn set(&mut self, i: usize, u: [f64; 4]) {
        self.rho[i] = u[0];
        self.mx[i] = u[1];
        self.my[i] = u[2];
        self.energy[i] = u[3];
    }

    pub fn primitive(&self, i: usize) -> Result<Primitive> {
        to_primitive(self.get(i), i)
    }

    pub fn to_macro(&self) -> Result<MacroState> {
        let mut m = MacroState::uniform(self.len(), Primitive::new(1.0, 0.0, 0.0, 1.0));
        for i in 0..self.len() {
            m.set(i, self.primitive(i)?);
        }
        Ok(m)
    }

    pub fn totals(&self, dx: f64) -> [f64; 4] {
        let mut t = [0.0; 4];
        for i in 0..self.len() {
            for (a, u) in t.iter_mut().zip(self.get(i)) {
                *a += u * dx;
            }
        }
        t
    }
}

pub(crate) fn to_conserved(p: Primitive) -> [f64; 4] {
    [p.rho, p.rho * p.ux, p.rho * p.uy, p.energy()]
}

pub(crate) fn to_primitive(u: [f64; 4], cell: usize) -> Result<Primitive> {
    let rho = u[0];
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::FluidVacuum { cell });
    }
    let (ux, uy) = (u[1] / rho, u[2] / rho);
    let p = u[3] - 0.5 * rho * (ux * ux + uy * uy);
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::FluidVacuum { cell });
    }
    Ok(Primitive::new(rho, ux, uy, p / rho))
}

/// `max |ux| + sqrt(2T)` over cells.
pub fn max_wave_speed(m: &MacroState) -> f64 {
    (0..m.len())
        .map(|i| m.ux[i].abs() + (2.0 * m.temp[i]).sqrt())
        .fold(0.0, f64::max)
}

/// Velocity and temperature derivatives for the breakdown criterion:
/// central differences inside, second-order one-sided at walls.
pub fn gradients(m: &MacroState, sg: &SpatialGrid) -> (Vec<f64>, Vec<f64>) {
    (derivative(&m.ux, sg), derivative(&m.temp, sg))
}

pub(crate) fn derivative(q: &[f64], sg: &SpatialGrid) -> Vec<f64> {
    let n = q.len();
    let h = sg.dx();
    (0..n)
        .map(|i| match sg.boundary() {
            Boundary::Periodic => (q[(i + 1) % n] - q[(i + n - 1) % n]) / (2.0 * h),
            Boundary::Specular if i == 0 => (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h),
            Boundary::Specular if i == n - 1 => {
                (3.0 * q[n - 1] - 4.0 * q[n - 2] + q[n - 3]) / (2.0 * h)
            }
            Boundary::Specular => (q[i + 1] - q[i - 1]) / (2.0 * h),
        })
        .collect()
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

fn physical_flux(w: [f64; 4]) -> [f64; 4] {
    let [rho, ux, uy, p] = w;
    let e = 0.5 * rho * (ux * ux + uy * uy) + p;
    [rho * ux, rho * ux * ux + p, rho * ux * uy, ux * (e + p)]
}

fn prim_to_cons(w: [f64; 4]) -> [f64; 4] {
    let [rho, ux, uy, p] = w;
    [rho, rho * ux, rho * uy, 0.5 * rho * (ux * ux + uy * uy) + p]
}

fn rusanov(l: [f64; 4], r: [f64; 4]) -> [f64; 4] {
    let speed = |w: [f64; 4]| w[1].abs() + (2.0 * w[3] / w[0]).sqrt();
    let a = speed(l).max(speed(r));
    let (fl, fr) = (physical_flux(l), physical_flux(r));
    let (ul, ur) = (prim_to_cons(l), prim_to_cons(r));
    std::array::from_fn(|q| 0.5 * (fl[q] + fr[q]) - 0.5 * a * (ur[q] - ul[q]))
}

/// Face fluxes `F_{i-1/2}`, `i = 0..=n`, of a conserved state padded by two
/// ghost cells per side.
fn face_fluxes(padded: &[[f64; 4]], n: usize) -> Result<Vec<[f64; 4]>> {
    let mut w = Vec::with_capacity(padded.len());
    for (j, u) in padded.iter().enumerate() {
        let cell = j.saturating_sub(2).min(n - 1);
        let p = to_primitive(*u, cell)?;
        w.push([p.rho, p.ux, p.uy, p.rho * p.temp]);
    }
    let slope = |j: usize| -> [f64; 4] {
        std::array::from_fn(|q| minmod(w[j + 1][q] - w[j][q], w[j][q] - w[j - 1][q]))
    };
    let mut out = Vec::with_capacity(n + 1);
    for face in 0..=n {
        let jl = face + 1;
        let jr = face + 2;
        let (sl, sr) = (slope(jl), slope(jr));
        let left: [f64; 4] = std::array::from_fn(|q| w[jl][q] + 0.5 * sl[q]);
        let right: [f64; 4] = std::array::from_fn(|q| w[jr][q] - 0.5 * sr[q]);
        out.push(rusanov(left, right));
    }
    Ok(out)
}

fn pad(s: &ConservedState, boundary: Boundary) -> Vec<[f64; 4]> {
    let n = s.len();
    let mut p = Vec::with_capacity(n + 4);
    let ghost = |i: usize| -> [f64; 4] {
        let u = s.get(i);
        match boundary {
            Boundary::Periodic => u,
            Boundary::Specular => [u[0], -u[1], u[2], u[3]],
        }
    };
    let (l2, l1, r1, r2) = match boundary {
        Boundary::Periodic => (n - 2, n - 1, 0, 1),
        Boundary::Specular => (1, 0, n - 1, n - 2),
    };
    p.push(ghost(l2));
    p.push(ghost(l1));
    p.extend((0..n).map(|i| s.get(i)));
    p.push(ghost(r1));
    p.push(ghost(r2));
    p
}

/// Stability bound `dx / max wave speed` of a conserved state.
pub fn euler_max_dt(s: &ConservedState, sg: &SpatialGrid) -> Result<f64> {
    Ok(sg.dx() / max_wave_speed(&s.to_macro()?))
}

/// Time-averaged Heun face fluxes. Cells flagged in `frozen` keep their
/// values in the predictor stage (they act as interior ghost states).
pub(crate) fn heun_fluxes(
    s: &ConservedState,
    sg: &SpatialGrid,
    dt: f64,
    frozen: Option<&[bool]>,
) -> Result<Vec<[f64; 4]>> {
    let n = s.len();
    let dt_max = euler_max_dt(s, sg)?;
    if !(dt > 0.0) || dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, dt_max });
    }
    let lam = dt / sg.dx();
    let f1 = face_fluxes(&pad(s, sg.boundary()), n)?;
    let mut stage = s.clone();
    for i in 0..n {
        if frozen.is_some_and(|fz| fz[i]) {
            continue;
        }
        let u = s.get(i);
        stage.set(i, std::array::from_fn(|q| u[q] - lam * (f1[i + 1][q] - f1[i][q])));
    }
    let f2 = face_fluxes(&pad(&stage, sg.boundary()), n)?;
    Ok(f1
        .iter()
        .zip(&f2)
        .map(|(a, b)| std::array::from_fn(|q| 0.5 * (a[q] + b[q])))
        .collect())
}

/// Conservative update of cell `i` from face fluxes.
#[inline]
pub(crate) fn apply_fluxes(u: [f64; 4], left: [f64; 4], right: [f64; 4], lam: f64) -> [f64; 4] {
    std::array::from_fn(|q| u[q] - lam * (right[q] - left[q]))
}

/// One step of the Euler solver.
pub fn euler_step(s: &ConservedState, sg: &SpatialGrid, dt: f64) -> Result<ConservedState> {
    if s.len() != sg.n_cells() {
        return Err(Error::Shape(format!(
            "state has {} cells, grid has {}",
            s.len(),
            sg.n_cells()
        )));
    }
    let flux = heun_fluxes(s, sg, dt, None)?;
    let lam = dt / sg.dx();
    let mut out = s.clone();
    for i in 0..s.len() {
        out.set(i, apply_fluxes(s.get(i), flux[i], flux[i + 1], lam));
        to_primitive(out.get(i), i)?;
    }
    Ok(out)
}
