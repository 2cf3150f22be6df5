//! Gauss-Hermite rules for expectations over a standard normal variable.
//!
//! Nodes are computed by Newton iteration on the orthonormal Hermite
//! recurrence started from the Golub-Welsch eigenvalues, then rescaled
//! from the weight `e^{-x²}` to the standard normal density so that
//! `E f(η) ≈ Σ_k w_k f(z_k)` with `Σ_k w_k = 1`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("a Gauss-Hermite rule needs at least one node"));
        }
        let (x, w) = physicists_rule(n)?;
        let scale = std::f64::consts::SQRT_2;
        let total: f64 = w.iter().sum();
        let mut nodes: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let mut weights: Vec<f64> = w.iter().map(|v| v / total).collect();
        // ascending order, symmetric pairs
        nodes.reverse();
        weights.reverse();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E f(η)` for `η ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}

/// Nodes (descending) and weights for `∫ f(x) e^{-x²} dx`.
///
/// Starting points come from the eigenvalues of the Jacobi matrix
/// (Golub-Welsch); each is then polished by Newton steps on the recurrence,
/// which also yields the weights.
fn physicists_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for &k in &order {
        let start = eig.eigenvalues[k];
        let fallback = sqrt_pi * eig.eigenvectors[(0, k)].powi(2);
        match newton_polish(n, start) {
            Some((z, weight)) if (z - start).abs() < 1e-6 * (1.0 + start.abs()) => {
                x.push(z);
                w.push(weight);
            }
            _ => {
                x.push(start);
                w.push(fallback);
            }
        }
    }
    // enforce exact symmetry
    for i in 0..n / 2 {
        let z = 0.5 * (x[i] - x[n - 1 - i]);
        let v = 0.5 * (w[i] + w[n - 1 - i]);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = v;
        w[n - 1 - i] = v;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(format!("Gauss-Hermite weights are not finite for n = {n}")));
    }
    Ok((x, w))
}

/// Newton iteration on the orthonormal Hermite recurrence.
fn newton_polish(n: usize, mut z: f64) -> Option<(f64, f64)> {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    for _ in 0..8 {
        let mut p1 = pim4;
        let mut p2 = 0.0;
        for j in 1..=n {
            let jf = j as f64;
            let p3 = p2;
            p2 = p1;
            p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        }
        let pp = (2.0 * nf).sqrt() * p2;
        if !(pp.is_finite() && p1.is_finite()) || pp == 0.0 {
            return None;
        }
        let step = p1 / pp;
        z -= step;
        if step.abs() <= 1e-15 * z.abs().max(1.0) {
            return Some((z, 2.0 / (pp * pp)));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_moments() {
        let g = GaussHermite::new(20).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let mut double_fact = 1.0;
        for k in 1..=15 {
            let even = g.expect(|z| z.powi(2 * k as i32));
            double_fact *= (2 * k - 1) as f64;
            assert!((even / double_fact - 1.0).abs() < 1e-12, "k={k}");
            assert!(g.expect(|z| z.powi(2 * k as i32 - 1)).abs() < 1e-12 * double_fact);
        }
    }

    #[test]
    fn small_rules_are_exact() {
        let g = GaussHermite::new(1).unwrap();
        assert_eq!(g.nodes(), &[0.0]);
        let g = GaussHermite::new(2).unwrap();
        assert!((g.nodes()[1] - 1.0).abs() < 1e-14);
        assert!((g.weights()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn moment_generating_function() {
        let g = GaussHermite::new(40).unwrap();
        for a in [0.5, 1.0, 2.0] {
            assert!((g.expect(|z| (a * z).cosh()) - (a * a / 2.0f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn large_rules_converge() {
        for n in [100, 200, 400] {
            let g = GaussHermite::new(n).unwrap();
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!((g.expect(|z| z * z) - 1.0).abs() < 1e-10);
        }
    }
}
