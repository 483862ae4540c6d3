//! Fourier spectral evaluation of the two-dimensional Boltzmann collision
//! operator, and the BGK penalization pieces used by the AP stepper.
//!
//! The operator is written in Carleman form on the periodized velocity box
//! with both relative-velocity components truncated to `[-R, R]`. For every
//! angle `theta_p` of a uniform angular rule on `[0, pi)` the gain term is a
//! product of two filtered copies of `f`, so the mode sum
//!
//! ```text
//! Q_k = sum_{l + m = k} f_l f_m [ G(l, m) - G(m, m) ],
//! G(l, m) = sum_p gx_p(m) gy_p(l)
//! ```
//!
//! is evaluated with zero-padded FFTs in `O(M n^2 log n)` per cell.
//! [`q_naive`] evaluates the same sum with explicit mode-pair loops.
//!
//! The angular measure is normalized to one, so the loss frequency of a
//! Maxwell-molecule kernel is close to `b * rho`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::phase_space::{MacroState, VelocityGrid};

/// Largest velocity resolution the kernel precomputation accepts.
pub const MAX_KERNEL_POINTS: usize = 128;
/// Largest velocity resolution accepted by [`q_naive`].
pub const MAX_NAIVE_POINTS: usize = 16;

/// Collision kernel `b |v - v*|^gamma` and its discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionParams {
    pub b: f64,
    pub gamma: f64,
    pub n_angular: usize,
    /// Gauss-Legendre points per panel for the radial integral (`gamma != 0`).
    pub n_radial: usize,
    /// Truncation radius; `None` selects `2 l_max / (3 + sqrt 2)`.
    pub r_support: Option<f64>,
    /// Penalty multiplier in `beta = beta0 b rho T^{gamma/2}`.
    pub beta0: f64,
    /// Inside the AP step, replace `Q(f)` by the projection of
    /// `Q(f) - Q(M[f])` onto zero mass, momentum and energy. Discrete Maxwellians
    /// are then exact equilibria and collisions conserve all moments.
    pub corrected: bool,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self {
            b: 1.0,
            gamma: 0.0,
            n_angular: 8,
            n_radial: 8,
            r_support: None,
            beta0: 2.0,
            corrected: true,
        }
    }
}

impl CollisionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) {
            return Err(Error::Config(format!("kernel magnitude b must be positive, got {}", self.b)));
        }
        if !(self.gamma > -2.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (-2, 1], got {}", self.gamma)));
        }
        if self.n_angular < 2 || self.n_radial < 2 {
            return Err(Error::Config("quadrature counts must be >= 2".into()));
        }
        if let Some(r) = self.r_support {
            if !(r > 0.0) {
                return Err(Error::Config(format!("support radius must be positive, got {r}")));
            }
        }
        if !(self.beta0 > 0.0) {
            return Err(Error::Config(format!("beta0 must be positive, got {}", self.beta0)));
        }
        Ok(())
    }

    pub fn support_radius(&self, vg: &VelocityGrid) -> f64 {
        self.r_support
            .unwrap_or(2.0 * vg.l_max() / (3.0 + std::f64::consts::SQRT_2))
    }

    fn content_key(&self, vg: &VelocityGrid) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        vg.n_per_dim().hash(&mut h);
        vg.l_max().to_bits().hash(&mut h);
        self.b.to_bits().hash(&mut h);
        self.gamma.to_bits().hash(&mut h);
        self.n_angular.hash(&mut h);
        self.n_radial.hash(&mut h);
        self.corrected.hash(&mut h);
        self.support_radius(vg).to_bits().hash(&mut h);
        h.finish()
    }
}

/// Precomputed mode weights and FFT plans for one `(params, grid)` pair.
pub struct SpectralKernel {
    params: CollisionParams,
    n: usize,
    pad: usize,
    radius: f64,
    /// `n_angular` blocks of `n^2` weights in FFT index order.
    gain_x: Vec<f64>,
    gain_y: Vec<f64>,
    loss: Vec<f64>,
    /// Collision invariants `(1, v1, v2, |v|^2)` per node.
    invariants: Vec<[f64; 4]>,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
    fwd_p: Arc<dyn Fft<f64>>,
    inv_p: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralKernel")
            .field("params", &self.params)
            .field("n", &self.n)
            .field("pad", &self.pad)
            .field("radius", &self.radius)
            .finish_non_exhaustive()
    }
}

static KERNEL_CACHE: Lazy<Mutex<HashMap<u64, Arc<SpectralKernel>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Signed frequency of FFT index `a` on an `n`-point axis.
#[inline]
fn freq(a: usize, n: usize) -> i64 {
    if a < n / 2 {
        a as i64
    } else {
        a as i64 - n as i64
    }
}

/// The Nyquist row/column is dropped so that the filtered copies stay real.
#[inline]
fn is_nyquist(a: usize, n: usize) -> bool {
    a == n / 2
}

/// Position of signed frequency `k` on a `p`-point axis.
#[inline]
fn wrap(k: i64, p: usize) -> usize {
    k.rem_euclid(p as i64) as usize
}

/// Radial transform `int_{-R}^{R} |r|^{gamma/2} e^{i r s} dr`.
pub(crate) fn radial_transform(s: f64, radius: f64, gamma: f64, n_radial: usize) -> f64 {
    if gamma == 0.0 {
        if (radius * s).abs() < 1e-8 {
            // 2 sin(Rs)/s with its Taylor remainder below round-off
            return 2.0 * radius * (1.0 - (radius * s).powi(2) / 6.0);
        }
        return 2.0 * (radius * s).sin() / s;
    }
    // r = R u^{1/(a+1)} removes the algebraic endpoint weight.
    let a = 0.5 * gamma;
    let e = 1.0 / (a + 1.0);
    let panels = 4 + (radius * s.abs() / PI).ceil() as usize * 2;
    let (xs, ws) = gauss_legendre(n_radial);
    let mut acc = 0.0;
    let hp = 1.0 / panels as f64;
    for p in 0..panels {
        let lo = p as f64 * hp;
        for (x, w) in xs.iter().zip(&ws) {
            let u = lo + 0.5 * hp * (x + 1.0);
            acc += 0.5 * hp * w * (s * radius * u.powf(e)).cos();
        }
    }
    2.0 * radius.powf(a + 1.0) / (a + 1.0) * acc
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

impl SpectralKernel {
    /// Precompute the kernel weights. Identical inputs give bit-identical weights.
    pub fn build(params: CollisionParams, vg: &VelocityGrid) -> Result<Self> {
        params.validate()?;
        let n = vg.n_per_dim();
        if n > MAX_KERNEL_POINTS {
            return Err(Error::Capacity {
                n_per_dim: n,
                max: MAX_KERNEL_POINTS,
            });
        }
        let pad = 3 * n / 2;
        let radius = params.support_radius(vg);
        let m = params.n_angular;
        let nn = n * n;
        let scale = params.b / m as f64;
        let mut gain_x = vec![0.0; m * nn];
        let mut gain_y = vec![0.0; m * nn];
        let mut loss = vec![0.0; nn];
        let dxi = PI / vg.l_max();
        for p in 0..m {
            let theta = PI * p as f64 / m as f64;
            let (s, c) = theta.sin_cos();
            for a1 in 0..n {
                for a2 in 0..n {
                    if is_nyquist(a1, n) || is_nyquist(a2, n) {
                        continue;
                    }
                    let xi1 = dxi * freq(a1, n) as f64;
                    let xi2 = dxi * freq(a2, n) as f64;
                    let along = xi1 * c + xi2 * s;
                    let across = -xi1 * s + xi2 * c;
                    let k = a1 * n + a2;
                    let gx = scale * radial_transform(along, radius, params.gamma, params.n_radial);
                    let gy = radial_transform(across, radius, params.gamma, params.n_radial);
                    gain_x[p * nn + k] = gx;
                    gain_y[p * nn + k] = gy;
                    loss[k] += gx * gy;
                }
            }
        }
        let invariants: Vec<[f64; 4]> = (0..nn)
            .map(|k| {
                let (v1, v2) = vg.node(k);
                [1.0, v1, v2, v1 * v1 + v2 * v2]
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            params,
            n,
            pad,
            radius,
            gain_x,
            gain_y,
            loss,
            invariants,
            fwd_n: planner.plan_fft_forward(n),
            inv_n: planner.plan_fft_inverse(n),
            fwd_p: planner.plan_fft_forward(pad),
            inv_p: planner.plan_fft_inverse(pad),
        })
    }

    /// Process-wide cached kernel keyed by a content hash of its inputs.
    pub fn shared(params: CollisionParams, vg: &VelocityGrid) -> Result<Arc<Self>> {
        params.validate()?;
        let key = params.content_key(vg);
        if let Some(k) = KERNEL_CACHE.lock().unwrap().get(&key) {
            return Ok(k.clone());
        }
        let kernel = Arc::new(Self::build(params, vg)?);
        KERNEL_CACHE.lock().unwrap().insert(key, kernel.clone());
        Ok(kernel)
    }

    pub fn params(&self) -> &CollisionParams {
        &self.params
    }

    pub fn n_per_dim(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Gain factors of angle `p` in FFT index order.
    pub fn gain(&self, p: usize) -> (&[f64], &[f64]) {
        let nn = self.n * self.n;
        (
            &self.gain_x[p * nn..(p + 1) * nn],
            &self.gain_y[p * nn..(p + 1) * nn],
        )
    }

    pub fn loss(&self) -> &[f64] {
        &self.loss
    }

    /// Weighted least-squares correction `q - w (lambda . phi)` that zeroes
    /// all four collision-invariant moments of `q`. With `w` a Maxwellian the
    /// correction stays where the distribution lives.
    pub fn project_conservative(&self, q: &mut [f64], w: &[f64]) {
        let mut gram = nalgebra::Matrix4::<f64>::zeros();
        let mut c = nalgebra::Vector4::<f64>::zeros();
        for ((phi, v), wk) in self.invariants.iter().zip(q.iter()).zip(w) {
            for a in 0..4 {
                c[a] += phi[a] * v;
                for b in 0..4 {
                    gram[(a, b)] += wk * phi[a] * phi[b];
                }
            }
        }
        let Some(lam) = gram.lu().solve(&c) else {
            return;
        };
        for ((phi, v), wk) in self.invariants.iter().zip(q.iter_mut()).zip(w) {
            *v -= wk * (0..4).map(|a| phi[a] * lam[a]).sum::<f64>();
        }
    }

    pub fn workspace(&self) -> CollisionWorkspace {
        let pp = self.pad * self.pad;
        let scratch = [
            self.fwd_n.get_inplace_scratch_len(),
            self.inv_n.get_inplace_scratch_len(),
            self.fwd_p.get_inplace_scratch_len(),
            self.inv_p.get_inplace_scratch_len(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        CollisionWorkspace {
            fhat: vec![Complex64::default(); self.n * self.n],
            buf: vec![Complex64::default(); pp],
            tmp: vec![Complex64::default(); pp],
            acc: vec![Complex64::default(); pp],
            scratch: vec![Complex64::default(); scratch.max(self.pad)],
        }
    }

    /// Convenience wrapper allocating a workspace and output.
    pub fn apply(&self, fslice: &[f64]) -> Result<Vec<f64>> {
        let mut ws = self.workspace();
        let mut out = vec![0.0; fslice.len()];
        q_spectral(fslice, self, &mut ws, &mut out, 0)?;
        Ok(out)
    }
}

/// Per-thread scratch space for [`q_spectral`].
#[derive(Clone)]
pub struct CollisionWorkspace {
    fhat: Vec<Complex64>,
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
    acc: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in 0..n {
            dst[c * n + r] = src[r * n + c];
        }
    }
}

/// Rows of a padded spectrum that carry retained modes.
fn active_rows(n: usize, pad: usize) -> impl Iterator<Item = usize> {
    (0..n / 2).chain(pad - (n / 2 - 1)..pad)
}

/// Discrete collision operator evaluated with zero-padded FFTs.
///
/// `cell` only labels the error on numeric breakdown.
pub fn q_spectral(
    fslice: &[f64],
    kernel: &SpectralKernel,
    ws: &mut CollisionWorkspace,
    out: &mut [f64],
    cell: usize,
) -> Result<()> {
    let n = kernel.n;
    let nn = n * n;
    let pad = kernel.pad;
    let pp = pad * pad;
    if fslice.len() != nn || out.len() != nn {
        return Err(Error::Shape(format!(
            "velocity slice of length {} does not match kernel with {nn} nodes",
            fslice.len()
        )));
    }

    // Forward transform of f with the Nyquist modes removed.
    for (c, f) in ws.fhat.iter_mut().zip(fslice) {
        *c = Complex64::new(*f, 0.0);
    }
    kernel.fwd_n.process_with_scratch(&mut ws.fhat, &mut ws.scratch);
    transpose(&ws.fhat, &mut ws.tmp[..nn], n);
    kernel.fwd_n.process_with_scratch(&mut ws.tmp[..nn], &mut ws.scratch);
    transpose(&ws.tmp[..nn], &mut ws.fhat, n);
    let norm = 1.0 / nn as f64;
    for a1 in 0..n {
        for a2 in 0..n {
            let k = a1 * n + a2;
            ws.fhat[k] = if is_nyquist(a1, n) || is_nyquist(a2, n) {
                Complex64::default()
            } else {
                ws.fhat[k] * norm
            };
        }
    }

    ws.acc.iter_mut().for_each(|c| *c = Complex64::default());

    // Each filtered pair (re, im) is transformed together; both are real.
    let m = kernel.params.n_angular;
    for p in 0..=m {
        let (wx, wy): (&[f64], Option<&[f64]>) = if p < m {
            let (gx, gy) = kernel.gain(p);
            (gx, Some(gy))
        } else {
            (&kernel.loss, None)
        };
        ws.buf.iter_mut().for_each(|c| *c = Complex64::default());
        for a1 in 0..n {
            if is_nyquist(a1, n) {
                continue;
            }
            let r = wrap(freq(a1, n), pad);
            for a2 in 0..n {
                if is_nyquist(a2, n) {
                    continue;
                }
                let k = a1 * n + a2;
                let c = wrap(freq(a2, n), pad);
                let second = wy.map_or(1.0, |w| w[k]);
                ws.buf[r * pad + c] = ws.fhat[k] * Complex64::new(wx[k], second);
            }
        }
        for r in active_rows(n, pad) {
            kernel
                .inv_p
                .process_with_scratch(&mut ws.buf[r * pad..(r + 1) * pad], &mut ws.scratch);
        }
        transpose(&ws.buf, &mut ws.tmp, pad);
        kernel.inv_p.process_with_scratch(&mut ws.tmp, &mut ws.scratch);
        let sign = if p < m { 1.0 } else { -1.0 };
        for (a, z) in ws.acc.iter_mut().zip(&ws.tmp) {
            a.re += sign * z.re * z.im;
        }
    }

    // Back to spectral space, keep the retained modes, then to nodes.
    kernel.fwd_p.process_with_scratch(&mut ws.acc, &mut ws.scratch);
    transpose(&ws.acc, &mut ws.buf, pad);
    for r in active_rows(n, pad) {
        kernel
            .fwd_p
            .process_with_scratch(&mut ws.buf[r * pad..(r + 1) * pad], &mut ws.scratch);
    }
    let pnorm = 1.0 / pp as f64;
    let qhat = &mut ws.fhat;
    for a1 in 0..n {
        for a2 in 0..n {
            let k = a1 * n + a2;
            qhat[k] = if is_nyquist(a1, n) || is_nyquist(a2, n) {
                Complex64::default()
            } else {
                let r = wrap(freq(a1, n), pad);
                let c = wrap(freq(a2, n), pad);
                ws.buf[r * pad + c] * pnorm
            };
        }
    }
    kernel.inv_n.process_with_scratch(qhat, &mut ws.scratch);
    transpose(qhat, &mut ws.tmp[..nn], n);
    kernel.inv_n.process_with_scratch(&mut ws.tmp[..nn], &mut ws.scratch);
    for a1 in 0..n {
        for a2 in 0..n {
            out[a1 * n + a2] = ws.tmp[a2 * n + a1].re;
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericBreakdown { cell });
    }
    Ok(())
}

/// The same truncated mode sum as [`q_spectral`] by direct mode-pair loops.
/// Intended as a test oracle; refuses grids above [`MAX_NAIVE_POINTS`].
pub fn q_naive(fslice: &[f64], kernel: &SpectralKernel) -> Result<Vec<f64>> {
    let n = kernel.n;
    if n > MAX_NAIVE_POINTS {
        return Err(Error::OracleSize {
            n_per_dim: n,
            max: MAX_NAIVE_POINTS,
        });
    }
    let nn = n * n;
    if fslice.len() != nn {
        return Err(Error::Shape("slice length does not match kernel".into()));
    }
    let retained: Vec<usize> = (0..nn)
        .filter(|k| !is_nyquist(k / n, n) && !is_nyquist(k % n, n))
        .collect();
    let tw = |k: i64, j: i64, sign: f64| {
        let ang = sign * 2.0 * PI * (k.rem_euclid(n as i64) * j) as f64 / n as f64;
        Complex64::new(ang.cos(), ang.sin())
    };
    let mut fhat = vec![Complex64::default(); nn];
    for &k in &retained {
        let (k1, k2) = (freq(k / n, n), freq(k % n, n));
        let mut acc = Complex64::default();
        for (j, f) in fslice.iter().enumerate() {
            let (j1, j2) = ((j / n) as i64, (j % n) as i64);
            acc += *f * tw(k1, j1, -1.0) * tw(k2, j2, -1.0);
        }
        fhat[k] = acc / nn as f64;
    }
    let m = kernel.params.n_angular;
    let mut qhat = vec![Complex64::default(); nn];
    for &l in &retained {
        for &mm in &retained {
            let k1 = freq(l / n, n) + freq(mm / n, n);
            let k2 = freq(l % n, n) + freq(mm % n, n);
            let half = (n / 2) as i64;
            if k1 <= -half || k1 >= half || k2 <= -half || k2 >= half {
                continue;
            }
            let mut weight = -kernel.loss[mm];
            for p in 0..m {
                let (gx, gy) = kernel.gain(p);
                weight += gx[mm] * gy[l];
            }
            let k = wrap(k1, n) * n + wrap(k2, n);
            qhat[k] += fhat[l] * fhat[mm] * weight;
        }
    }
    let mut out = vec![0.0; nn];
    for (j, o) in out.iter_mut().enumerate() {
        let (j1, j2) = ((j / n) as i64, (j % n) as i64);
        let mut acc = Complex64::default();
        for &k in &retained {
            acc += qhat[k] * tw(freq(k / n, n), j1, 1.0) * tw(freq(k % n, n), j2, 1.0);
        }
        *o = acc.re;
    }
    Ok(out)
}

/// BGK relaxation `beta (M - f)`.
pub fn bgk_relax(fslice: &[f64], maxwellian: &[f64], beta: f64, out: &mut [f64]) {
    for ((o, f), m) in out.iter_mut().zip(fslice).zip(maxwellian) {
        *o = beta * (m - f);
    }
}

/// Penalty coefficient `beta0 b rho T^{gamma/2}` per cell.
pub fn penalty_beta(m: &MacroState, p: &CollisionParams) -> Vec<f64> {
    (0..m.len())
        .map(|i| penalty_beta_cell(m.rho[i], m.temp[i], p))
        .collect()
}

#[inline]
pub(crate) fn penalty_beta_cell(rho: f64, temp: f64, p: &CollisionParams) -> f64 {
    p.beta0 * p.b * rho * temp.powf(0.5 * p.gamma)
}
