use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Which solver hierarchy a multi-fidelity surrogate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fidelity {
    /// Points and coefficients from Euler snapshots, hybrid high fidelity.
    Bi,
    /// Points and coefficients from hybrid snapshots, full-kinetic high
    /// fidelity.
    Tri,
}

/// Result of greedy point selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    /// Squared residual norm of each selected snapshot at selection time.
    pub pivots: Vec<f64>,
    pub requested: usize,
    /// Set when the numerical rank stopped the selection before `requested`.
    pub rank_deficient: bool,
}

/// Relative pivot size below which a candidate counts as already spanned.
const PIVOT_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64], w: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * w
}

/// Greedy selection by pivoted Cholesky on the weighted Gram matrix: each
/// step picks the snapshot farthest from the span of those already chosen,
/// ties going to the lowest index.
pub fn select_points(snaps: &[Vec<f64>], weight: f64, k: usize) -> Result<Selection> {
    let n = snaps.len();
    if n == 0 || k == 0 {
        return Err(Error::Config("point selection needs candidates and K >= 1".into()));
    }
    if k > n {
        return Err(Error::Config(format!("cannot select {k} points from {n} candidates")));
    }
    let len = snaps[0].len();
    if snaps.iter().any(|s| s.len() != len) {
        return Err(Error::Shape("snapshots differ in length".into()));
    }
    let mut resid: Vec<f64> = snaps.iter().map(|s| dot(s, s, weight)).collect();
    let scale = resid.iter().cloned().fold(0.0, f64::max);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let mut sel = Selection { indices: Vec::new(), pivots: Vec::new(), requested: k, rank_deficient: false };
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !chosen[i]) {
            if best.is_none_or(|b| resid[i] > resid[b]) {
                best = Some(i);
            }
        }
        let p = best.expect("k <= n leaves a candidate");
        let d = resid[p];
        if !(d > PIVOT_TOL * scale) {
            sel.rank_deficient = true;
            log::warn!("point selection stopped at rank {} of {k} requested", sel.indices.len());
            break;
        }
        let sd = d.sqrt();
        let col: Vec<f64> = (0..n)
            .map(|i| {
                let g = dot(&snaps[i], &snaps[p], weight);
                let c: f64 = cols.iter().map(|c| c[i] * c[p]).sum();
                (g - c) / sd
            })
            .collect();
        for i in 0..n {
            resid[i] -= col[i] * col[i];
        }
        chosen[p] = true;
        sel.indices.push(p);
        sel.pivots.push(d);
        cols.push(col);
    }
    Ok(sel)
}

/// Selected low-fidelity snapshots, their high-fidelity partners and the
/// regularized Gram system used to transfer coefficients.
#[derive(Debug, Clone)]
pub struct SnapshotBasis {
    pub fidelity: Fidelity,
    pub selected: Vec<usize>,
    low: Vec<Vec<f64>>,
    high: Vec<Vec<f64>>,
    weight: f64,
    ridge: f64,
    system: DMatrix<f64>,
    condition: f64,
}

impl SnapshotBasis {
    /// `ridge = None` picks `1e-10 * trace(G) / K`.
    pub fn new(
        fidelity: Fidelity,
        selected: Vec<usize>,
        low: Vec<Vec<f64>>,
        high: Vec<Vec<f64>>,
        weight: f64,
        ridge: Option<f64>,
    ) -> Result<Self> {
        let k = selected.len();
        if k == 0 || low.len() != k || high.len() != k {
            return Err(Error::Shape("basis needs K low and K high snapshots".into()));
        }
        let (ll, hl) = (low[0].len(), high[0].len());
        if low.iter().any(|s| s.len() != ll) || high.iter().any(|s| s.len() != hl) {
            return Err(Error::Shape("snapshots differ in length".into()));
        }
        let gram = DMatrix::from_fn(k, k, |i, j| dot(&low[i], &low[j], weight));
        let ridge = ridge.unwrap_or(1e-10 * gram.trace() / k as f64);
        if !(ridge >= 0.0) {
            return Err(Error::Config(format!("ridge {ridge} must be non-negative")));
        }
        let system = &gram + DMatrix::identity(k, k) * ridge;
        let eig = system.clone().symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::MAX, 0.0f64), |(a, b), v| (a.min(v.abs()), b.max(v.abs())));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > 1e12 {
            log::warn!("multi-fidelity Gram matrix is ill-conditioned (cond {condition:.3e})");
        }
        Ok(Self { fidelity, selected, low, high, weight, ridge, system, condition })
    }

    pub fn k(&self) -> usize {
        self.selected.len()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn ill_conditioned(&self) -> bool {
        self.condition > 1e12
    }

    pub fn high(&self) -> &[Vec<f64>] {
        &self.high
    }
}

/// Projection coefficients of a low-fidelity solution onto the basis.
pub fn fidelity_coeffs(basis: &SnapshotBasis, low_at_z: &[f64]) -> Result<Vec<f64>> {
    if low_at_z.len() != basis.low[0].len() {
        return Err(Error::Shape(format!(
            "low-fidelity field has {} entries, basis expects {}",
            low_at_z.len(),
            basis.low[0].len()
        )));
    }
    let g = DVector::from_iterator(basis.k(), basis.low.iter().map(|s| dot(s, low_at_z, basis.weight)));
    let c = match basis.system.clone().cholesky() {
        Some(ch) => ch.solve(&g),
        None => basis
            .system
            .clone()
            .lu()
            .solve(&g)
            .ok_or_else(|| Error::Config("multi-fidelity Gram matrix is singular".into()))?,
    };
    Ok(c.iter().copied().collect())
}

/// Applies the low-fidelity coefficients to the high-fidelity snapshots.
pub fn multifidelity_eval(basis: &SnapshotBasis, coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != basis.k() {
        return Err(Error::Shape(format!("{} coefficients for a basis of {}", coeffs.len(), basis.k())));
    }
    let mut out = vec![0.0; basis.high[0].len()];
    for (c, h) in coeffs.iter().zip(&basis.high) {
        for (o, v) in out.iter_mut().zip(h) {
            *o += c * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_set_stops_after_one_point() {
        let v = vec![1.0, -2.0, 0.5];
        let snaps: Vec<Vec<f64>> = [1.0, 3.0, -0.5].iter().map(|a| v.iter().map(|x| a * x).collect()).collect();
        let s = select_points(&snaps, 1.0, 2).unwrap();
        assert_eq!(s.indices, vec![1]);
        assert!(s.rank_deficient);
        let one = select_points(&snaps, 1.0, 1).unwrap();
        assert!(!one.rank_deficient);
    }

    #[test]
    fn orthogonal_set_is_taken_by_decreasing_norm() {
        let snaps = vec![vec![2.0, 0.0, 0.0], vec![0.0, 5.0, 0.0], vec![0.0, 0.0, -3.0]];
        let s = select_points(&snaps, 0.1, 3).unwrap();
        assert_eq!(s.indices, vec![1, 2, 0]);
        assert!((s.pivots[0] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let snaps = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        assert_eq!(select_points(&snaps, 1.0, 2).unwrap().indices, vec![0, 1]);
    }

    #[test]
    fn selection_is_scale_invariant() {
        let snaps: Vec<Vec<f64>> = (0..12)
            .map(|i| (0..20).map(|k| ((i * 7 + k * 3) as f64 * 0.37).sin() + 0.1 * i as f64).collect())
            .collect();
        let twice: Vec<Vec<f64>> = snaps.iter().map(|s| s.iter().map(|x| 2.0 * x).collect()).collect();
        assert_eq!(
            select_points(&snaps, 1.0, 6).unwrap().indices,
            select_points(&twice, 1.0, 6).unwrap().indices
        );
    }

    fn basis3(ridge: Option<f64>) -> SnapshotBasis {
        let low = vec![vec![1.0, 0.2, 0.0, 0.3], vec![0.0, 1.0, 0.5, 0.0], vec![0.3, 0.0, 1.0, 1.0]];
        let high = vec![vec![10.0, 0.0], vec![0.0, 20.0], vec![1.0, 1.0]];
        SnapshotBasis::new(Fidelity::Bi, vec![4, 7, 9], low, high, 0.25, ridge).unwrap()
    }

    #[test]
    fn nodes_are_reproduced() {
        let b = basis3(Some(0.0));
        for k in 0..3 {
            let c = fidelity_coeffs(&b, &b.low[k].clone()).unwrap();
            for (j, cj) in c.iter().enumerate() {
                assert!((cj - if j == k { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
            let u = multifidelity_eval(&b, &c).unwrap();
            for (a, h) in u.iter().zip(&b.high[k]) {
                assert!((a - h).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn orthogonal_input_gives_zero_coefficients() {
        let low = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let b = SnapshotBasis::new(Fidelity::Bi, vec![0, 1], low, vec![vec![1.0], vec![2.0]], 1.0, None).unwrap();
        let c = fidelity_coeffs(&b, &[0.0, 0.0, 3.0]).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn coefficients_match_least_squares() {
        // oracle: normal equations of min |sum c_k low_k - u| solved by
        // Cramer's rule on the 3x3 system
        let b = basis3(Some(0.0));
        let u = vec![0.7, -1.1, 2.0, 0.4];
        let g: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| dot(&b.low[i], &b.low[j], 1.0)).collect()).collect();
        let r: Vec<f64> = (0..3).map(|i| dot(&b.low[i], &u, 1.0)).collect();
        let det3 = |m: &Vec<Vec<f64>>| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det3(&g);
        let c = fidelity_coeffs(&b, &u).unwrap();
        for k in 0..3 {
            let mut m = g.clone();
            for i in 0..3 {
                m[i][k] = r[i];
            }
            assert!((c[k] - det3(&m) / d).abs() < 1e-10);
        }
    }

    #[test]
    fn single_snapshot_scales_its_partner() {
        let b = SnapshotBasis::new(Fidelity::Tri, vec![3], vec![vec![1.0, 1.0]], vec![vec![4.0, -2.0]], 1.0, Some(0.0)).unwrap();
        let c = fidelity_coeffs(&b, &[2.0, 1.0]).unwrap();
        assert!((c[0] - 1.5).abs() < 1e-14);
        let u = multifidelity_eval(&b, &c).unwrap();
        assert!((u[0] - 6.0).abs() < 1e-13 && (u[1] + 3.0).abs() < 1e-13);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let b = basis3(None);
        assert!(matches!(fidelity_coeffs(&b, &[1.0]), Err(Error::Shape(_))));
        assert!(matches!(multifidelity_eval(&b, &[1.0]), Err(Error::Shape(_))));
        assert!(b.ridge() > 0.0);
    }
}
