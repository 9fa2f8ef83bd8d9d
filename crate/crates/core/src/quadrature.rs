//! Expectation rules over a standard normal (or, in test mode, a symmetric
//! two-point) variable.

use nalgebra::DMatrix;

use crate::error::{Result, VoiError};

/// Nodes and weights for `E[f(Z)] ~ sum_i w_i f(z_i)`. Nodes are stored in
/// increasing order and are exactly symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl StandardRule {
    /// Gauss-Hermite rule for `Z ~ N(0, 1)`, exact for polynomials up to
    /// degree `2 order - 1`.
    ///
    /// Golub-Welsch: the nodes of the physicists' rule are the eigenvalues of
    /// the symmetric tridiagonal Jacobi matrix with off-diagonal `sqrt(i/2)`;
    /// the weights are `sqrt(pi)` times the squared first eigenvector
    /// components. Rescaling to the standard normal cancels the `sqrt(pi)`.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(VoiError::InvalidConfig("quadrature order must be positive".into()));
        }
        let mut jacobi = DMatrix::zeros(order, order);
        for i in 1..order {
            let off = (i as f64 / 2.0).sqrt();
            jacobi[(i - 1, i)] = off;
            jacobi[(i, i - 1)] = off;
        }
        let eig = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i] * std::f64::consts::SQRT_2, v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        // mirror exactly so symmetric integrands stay symmetric
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let z = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-z, w);
            pairs[j] = (z, w);
        }
        if order % 2 == 1 {
            pairs[order / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(StandardRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    /// Equiprobable `+-1`.
    pub fn two_point() -> Self {
        StandardRule {
            nodes: vec![-1.0, 1.0],
            weights: vec![0.5, 0.5],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `E[f(sigma Z)]`.
    pub fn expect(&self, sigma: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.iter().map(|(z, w)| w * f(sigma * z)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments_are_exact() {
        let rule = StandardRule::gauss_hermite(21).unwrap();
        assert_eq!(rule.len(), 21);
        let m0: f64 = rule.expect(1.0, |_| 1.0);
        let m2 = rule.expect(1.0, |z| z * z);
        let m4 = rule.expect(1.0, |z| z.powi(4));
        let m6 = rule.expect(2.0, |z| z.powi(6));
        assert!((m0 - 1.0).abs() < 1e-13);
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
        assert!((m6 - 15.0 * 64.0).abs() < 1e-8);
        assert!(rule.expect(1.0, |z| z.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn smooth_integrand() {
        // E[cos Z] = exp(-1/2)
        let rule = StandardRule::gauss_hermite(21).unwrap();
        let v = rule.expect(1.0, f64::cos);
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn nodes_are_mirrored() {
        for order in [1, 2, 5, 20, 21] {
            let rule = StandardRule::gauss_hermite(order).unwrap();
            let pts: Vec<_> = rule.iter().collect();
            for i in 0..order {
                let j = order - 1 - i;
                assert_eq!(pts[i].0, -pts[j].0);
                assert_eq!(pts[i].1, pts[j].1);
            }
        }
        assert!(StandardRule::gauss_hermite(0).is_err());
    }

    #[test]
    fn two_point_rule() {
        let rule = StandardRule::two_point();
        assert_eq!(rule.expect(3.0, |z| z * z), 9.0);
        assert_eq!(rule.expect(3.0, |z| z), 0.0);
    }
}
