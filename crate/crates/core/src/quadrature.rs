//! Gauss-Hermite quadrature for expectations over diagonal Gaussians.

use crate::{Error, Result};

/// Nodes and weights for `integral exp(-x^2) f(x) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("quadrature needs at least one node".into()));
        }
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numeric(format!(
                    "Hermite root {i} of {n} did not converge"
                )));
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Ok(GaussHermite { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `integral exp(-x^2) f(x) dx`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    /// Standard-normal nodes `eps_k` and probability weights summing to 1.
    pub fn standard_normal_rule(&self) -> Vec<(f64, f64)> {
        let s = std::f64::consts::SQRT_2;
        let norm = std::f64::consts::PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| (s * x, w / norm))
            .collect()
    }

    /// `E[f(eps)]` for `eps ~ N(0, I_d)` on the tensor-product grid.
    /// `max_points` bounds the grid size; larger grids are unsupported.
    pub fn expect_standard_normal<F>(&self, d: usize, max_points: usize, mut f: F) -> Result<f64>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut total = 0.0;
        self.for_each_node(d, max_points, |eps, w| total += w * f(eps))?;
        Ok(total)
    }

    /// Visits every tensor-product node `(eps, weight)` in `d` dimensions.
    pub fn for_each_node<F>(&self, d: usize, max_points: usize, mut f: F) -> Result<()>
    where
        F: FnMut(&[f64], f64),
    {
        let rule = self.standard_normal_rule();
        let n = rule.len();
        let points = (n as f64).powi(d as i32);
        if points > max_points as f64 {
            return Err(Error::Unsupported(format!(
                "{n}^{d} quadrature points exceed the limit of {max_points}"
            )));
        }
        let mut idx = vec![0usize; d];
        let mut eps = vec![0.0; d];
        loop {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                eps[k] = rule[i].0;
                w *= rule[i].1;
            }
            f(&eps, w);
            let mut k = 0;
            loop {
                if k == d {
                    return Ok(());
                }
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}
