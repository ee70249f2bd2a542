//! Integration grids on S^d.

use crate::error::{NngfError, Result};
use crate::spectral::omega_d;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Golden-spiral points, equal weights (d = 2 only).
    FibonacciS2,
    /// Gauss–Legendre latitudes × uniform longitudes (d = 2 only).
    GaussProductS2,
    /// I.i.d. uniform points, any d.
    RandomUniform,
}

#[derive(Debug, Clone, Serialize)]
pub struct SphereGrid {
    pub d: usize,
    /// Unit vectors in R^{d+1}, flattened row-major.
    pub points: Vec<f64>,
    /// Quadrature weights summing to ω_d.
    pub weights: Vec<f64>,
    pub kind: GridKind,
    /// Gauss-product grids: latitude count (points are grouped by
    /// latitude, `n_lon` per row), enabling latitude-blocked synthesis.
    pub n_lat: usize,
}

impl SphereGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let m = self.d + 1;
        &self.points[i * m..(i + 1) * m]
    }

    /// ⟨xᵢ, xⱼ⟩.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Σ wᵢ f(xᵢ) ≈ ∫_{S^d} f dx.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.point(i))).sum()
    }
}

/// Build an n-point integration grid; `seed` feeds the random kind only.
pub fn sphere_grid(d: usize, n: usize, kind: GridKind, seed: u64) -> Result<SphereGrid> {
    if n < 10 {
        return Err(NngfError::Precondition(format!(
            "grid needs at least 10 points, got {n}"
        )));
    }
    match kind {
        GridKind::FibonacciS2 => {
            if d != 2 {
                return Err(NngfError::UnsupportedGrid(format!(
                    "fibonacci-s2 is S² only, got d = {d}"
                )));
            }
            let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
            let w = omega_d(2) / n as f64;
            let mut points = Vec::with_capacity(3 * n);
            for i in 0..n {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
                points.extend_from_slice(&[r * phi.cos(), r * phi.sin(), z]);
            }
            Ok(SphereGrid {
                d,
                points,
                weights: vec![w; n],
                kind,
                n_lat: 0,
            })
        }
        GridKind::GaussProductS2 => {
            if d != 2 {
                return Err(NngfError::UnsupportedGrid(format!(
                    "gauss-product-s2 is S² only, got d = {d}"
                )));
            }
            // surface measure on S² splits as dz·dφ: Gauss–Legendre in z,
            // trapezoid (exact for trig polynomials) in φ
            let n_lat = (((n as f64) / 2.0).sqrt().ceil() as usize).max(4);
            let n_lon = 2 * n_lat;
            let lat = crate::quad::gauss_legendre(n_lat);
            let wphi = 2.0 * std::f64::consts::PI / n_lon as f64;
            let mut points = Vec::with_capacity(3 * n_lat * n_lon);
            let mut weights = Vec::with_capacity(n_lat * n_lon);
            for (&z, &wz) in lat.nodes.iter().zip(&lat.weights) {
                let r = (1.0 - z * z).sqrt();
                for k in 0..n_lon {
                    let phi = wphi * k as f64;
                    points.extend_from_slice(&[r * phi.cos(), r * phi.sin(), z]);
                    weights.push(wz * wphi);
                }
            }
            Ok(SphereGrid {
                d,
                points,
                weights,
                kind,
                n_lat,
            })
        }
        GridKind::RandomUniform => {
            let mut rng = crate::rng::stream(seed, &[0x4752_4944]);
            let m = d + 1;
            let w = omega_d(d) / n as f64;
            let mut points = Vec::with_capacity(m * n);
            for _ in 0..n {
                loop {
                    let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-8 {
                        points.extend(v.iter().map(|x| x / norm));
                        break;
                    }
                }
            }
            Ok(SphereGrid {
                d,
                points,
                weights: vec![w; n],
                kind,
                n_lat: 0,
            })
        }
    }
}
