//! Gauss–Hermite rules for averages over Gaussian-distributed offsets.

use crate::error::{Error, Result};

/// Nodes and weights of the n-point rule for ∫ e^(−x²) f(x) dx.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence, started from
    /// the usual asymptotic guesses for the largest roots.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::param("Gauss-Hermite order must be at least 1"));
        }
        const PI_M4: f64 = 0.751_125_544_464_942_5; // π^(−1/4)
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (PI_M4, 0.0);
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                derivative = (2.0 * nf).sqrt() * p2;
                let step = p1 / derivative;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (derivative * derivative);
            weights[n - 1 - i] = weights[i];
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(GaussHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// E[f(δ)] for δ ~ N(0, σ²): (1/√π) Σ w_i f(√2 σ x_i).
    pub fn gaussian_expectation(&self, sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sigma;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(scale * x))
            .sum::<f64>()
            / std::f64::consts::PI.sqrt()
    }

    /// Offsets and normalized weights (Σ = 1) for δ ~ N(0, σ²).
    pub fn gaussian_points(&self, sigma: f64) -> Vec<(f64, f64)> {
        let scale = std::f64::consts::SQRT_2 * sigma;
        let norm = std::f64::consts::PI.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| (scale * x, w / norm))
            .collect()
    }
}
