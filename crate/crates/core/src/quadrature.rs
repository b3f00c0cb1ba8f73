//! Thin wrappers around Gauss rules, rescaled to the intervals and weights
//! used throughout the crate.

use std::num::NonZeroUsize;

use gauss_quad::{GaussHermite, GaussLegendre};

use crate::error::{invalid, Result};

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct UnitLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UnitLegendre {
    pub fn new(n: usize) -> Result<Self> {
        let Some(deg) = NonZeroUsize::new(n) else {
            return invalid("Gauss-Legendre order must be >= 1");
        };
        let rule = GaussLegendre::new(deg);
        let (nodes, weights) =
            rule.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).unzip();
        Ok(UnitLegendre { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.pairs().map(|(s, w)| w * f(s)).sum()
    }
}

/// Gauss–Hermite rule for `E[f(Z)]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct StdNormalHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl StdNormalHermite {
    pub fn new(n: usize) -> Result<Self> {
        let Some(deg) = NonZeroUsize::new(n) else {
            return invalid("Gauss-Hermite order must be >= 1");
        };
        let rule = GaussHermite::new(deg);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::SQRT_2 * x, w / sqrt_pi))
            .unzip();
        Ok(StdNormalHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.pairs().map(|(z, w)| w * f(z)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let q = UnitLegendre::new(4).unwrap();
        assert!((q.integrate(|s| s) - 0.5).abs() < 1e-15);
        assert!((q.integrate(|s| s.powi(7)) - 0.125).abs() < 1e-15);
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hermite_normal_moments() {
        let q = StdNormalHermite::new(6).unwrap();
        assert!((q.expect(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(q.expect(|z| z).abs() < 1e-14);
        assert!((q.expect(|z| z * z) - 1.0).abs() < 1e-13);
        assert!((q.expect(|z| z.powi(4)) - 3.0).abs() < 1e-12);
        assert!((q.expect(|z| z.powi(6)) - 15.0).abs() < 1e-11);
    }

    #[test]
    fn zero_order_rejected() {
        assert!(UnitLegendre::new(0).is_err());
        assert!(StdNormalHermite::new(0).is_err());
    }
}
