use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Gauss rule for a probability measure on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// n-point Gauss rule from the moments `m_0..m_{2n}` (Golub-Welsch via a
/// Cholesky factor of the Hankel moment matrix). Fine for the small n used
/// by reference computations; the Hankel matrix degrades quickly beyond
/// n of about 10 unless the measure is scaled to unit size.
pub fn gauss_rule_from_moments(moments: &[f64], n: usize) -> Result<QuadratureRule> {
    if n == 0 || moments.len() < 2 * n + 1 {
        return Err(Error::Config(format!("{n}-point rule needs {} moments", 2 * n + 1)));
    }
    let h = DMatrix::from_fn(n + 1, n + 1, |i, j| moments[i + j]);
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Config("moment matrix is not positive definite".into()))?;
    let r = chol.l().transpose();
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    for k in 0..n {
        alpha[k] = r[(k, k + 1)] / r[(k, k)] - if k > 0 { r[(k - 1, k)] / r[(k - 1, k - 1)] } else { 0.0 };
        beta[k] = r[(k + 1, k + 1)] / r[(k, k)];
    }
    let jac = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], moments[0] * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Gauss rule for `S = sum_k a_k z_k` with independent `z_k` uniform on
/// [-1, 1]. Uncertain inputs that enter only through such a sum reduce a
/// high-dimensional expectation to one dimension per sum.
pub fn scaled_uniform_sum_rule(coeffs: &[f64], n: usize) -> Result<QuadratureRule> {
    let scale: f64 = coeffs.iter().map(|a| a.abs()).sum();
    if coeffs.is_empty() || !(scale > 0.0) {
        return Ok(QuadratureRule { nodes: vec![0.0], weights: vec![1.0] });
    }
    let deg = 2 * n;
    let mut binom = vec![vec![1.0f64; deg + 1]; deg + 1];
    for j in 1..=deg {
        for i in 1..j {
            binom[j][i] = binom[j - 1][i - 1] + binom[j - 1][i];
        }
    }
    // moments of S / scale, built by binomial convolution
    let mut m = vec![0.0; deg + 1];
    m[0] = 1.0;
    for a in coeffs {
        let a = a / scale;
        let u: Vec<f64> = (0..=deg)
            .map(|j| if j % 2 == 0 { a.powi(j as i32) / (j + 1) as f64 } else { 0.0 })
            .collect();
        m = (0..=deg)
            .map(|j| (0..=j).map(|i| binom[j][i] * m[i] * u[j - i]).sum())
            .collect();
    }
    let rule = gauss_rule_from_moments(&m, n)?;
    Ok(QuadratureRule { nodes: rule.nodes.iter().map(|x| x * scale).collect(), weights: rule.weights })
}
