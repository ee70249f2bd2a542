//! Field samplers: spectral synthesis on S², exact Cholesky sampling in
//! any dimension, and finite-width network draws as an end-to-end oracle.

use super::grid::SphereGrid;
use super::harmonics::{harmonic_count, real_harmonics_row};
use crate::error::{NngfError, Result};
use crate::kernel::ActivationSpec;
use crate::spectral::{eigenspace_dim, NormalizedSpectrum};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SampleMethod {
    SpectralS2 { l_max: usize },
    Cholesky { jitter: f64 },
}

/// One realization of the normalized field on a grid.
#[derive(Debug, Clone)]
pub struct FieldSample<'g> {
    pub grid: &'g SphereGrid,
    pub values: Vec<f64>,
    pub seed: u64,
    pub method: SampleMethod,
}

/// Precomputed harmonics matrix for repeated synthesis on one grid.
pub struct SynthesisPlan {
    pub l_max: usize,
    /// Y_{ℓm}(xᵢ), point-major (n × (l_max+1)²).
    y: Vec<f64>,
}

impl SynthesisPlan {
    pub fn new(grid: &SphereGrid, l_max: usize) -> Result<Self> {
        if grid.d != 2 {
            return Err(NngfError::UnsupportedGrid(
                "spectral synthesis is S² only".into(),
            ));
        }
        let k = harmonic_count(l_max);
        let mut y = Vec::with_capacity(grid.len() * k);
        for i in 0..grid.len() {
            y.extend(real_harmonics_row(l_max, grid.point(i)));
        }
        Ok(SynthesisPlan { l_max, y })
    }
}

const SYNTH_TAIL_TOL: f64 = 1e-6;

/// Truncation level that keeps the unseen spectral mass below tolerance.
pub fn required_l_max(spectrum: &NormalizedSpectrum) -> Result<usize> {
    let mut remaining = 1.0;
    for l in 1..spectrum.g.len() {
        remaining -= spectrum.g[l] * eigenspace_dim(l, spectrum.d) / spectrum.omega;
        if remaining < SYNTH_TAIL_TOL {
            return Ok(l);
        }
    }
    Err(NngfError::LmaxTooSmall {
        l_max: spectrum.g.len() - 1,
        mass: 1.0 - remaining,
    })
}

/// Draw T̂_L = Σ_{ℓ≥1,m} √g_ℓ·ζ_{ℓm}·Y_{ℓm} with i.i.d. standard ζ.
pub fn synthesize_with_plan<'g>(
    spectrum: &NormalizedSpectrum,
    grid: &'g SphereGrid,
    plan: &SynthesisPlan,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<FieldSample<'g>> {
    let l_max = plan.l_max;
    let mut tail = 1.0;
    for l in 1..=l_max.min(spectrum.g.len() - 1) {
        tail -= spectrum.g[l] * eigenspace_dim(l, spectrum.d) / spectrum.omega;
    }
    if tail > SYNTH_TAIL_TOL {
        return Err(NngfError::LmaxTooSmall { l_max, mass: 1.0 - tail });
    }
    synthesize_band_limited(spectrum, grid, plan, seed, rng)
}

/// Synthesis of the ℓ ≤ plan.l_max band only, however much spectral mass
/// lies outside it. The caller owns the truncation bias: legitimate when
/// the target is a chaos functional whose mode weights decay much faster
/// than the field's spectrum (deep fields keep most of their *pointwise*
/// variance at enormous ℓ while low modes carry the functionals).
pub fn synthesize_band_limited<'g>(
    spectrum: &NormalizedSpectrum,
    grid: &'g SphereGrid,
    plan: &SynthesisPlan,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<FieldSample<'g>> {
    let l_max = plan.l_max;
    let k = harmonic_count(l_max);
    // mode draws scaled by √g_ℓ up front (ℓ = 0 stays zero: the field is
    // centered by construction)
    let mut zeta = vec![0.0; k];
    for l in 1..=l_max {
        let g = spectrum.g.get(l).copied().unwrap_or(0.0).max(0.0);
        let s = g.sqrt();
        for idx in l * l..(l + 1) * (l + 1) {
            let z: f64 = rng.sample(StandardNormal);
            zeta[idx] = s * z;
        }
    }
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            plan.y[i * k..(i + 1) * k]
                .iter()
                .zip(&zeta)
                .map(|(y, z)| y * z)
                .sum()
        })
        .collect();
    Ok(FieldSample {
        grid,
        values,
        seed,
        method: SampleMethod::SpectralS2 { l_max },
    })
}

/// One-shot spectral synthesis (builds the harmonics matrix internally).
pub fn synthesize_field_s2<'g>(
    spectrum: &NormalizedSpectrum,
    grid: &'g SphereGrid,
    l_max: usize,
    seed: u64,
) -> Result<FieldSample<'g>> {
    let plan = SynthesisPlan::new(grid, l_max)?;
    let mut rng = crate::rng::stream(seed, &[0x53_594e]);
    synthesize_with_plan(spectrum, grid, &plan, seed, &mut rng)
}

/// In-place lower Cholesky of a row-major n×n matrix; false if a pivot
/// fails.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return false;
        }
        let d = diag.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in (j + 1)..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

/// Largest grid the dense factorization accepts.
pub const CHOLESKY_POINT_CAP: usize = 4096;

/// Reusable Cholesky factor of the Gram matrix κ̂(⟨xᵢ,xⱼ⟩) over the grid,
/// with escalating diagonal jitter (0, 1e-12, 1e-10, 1e-8).
pub struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
    pub jitter: f64,
}

impl CholeskyFactor {
    pub fn new<F: Fn(f64) -> f64>(cov: F, grid: &SphereGrid) -> Result<Self> {
        let n = grid.len();
        if n > CHOLESKY_POINT_CAP {
            return Err(NngfError::Precondition(format!(
                "Cholesky sampling capped at {CHOLESKY_POINT_CAP} points, got {n}"
            )));
        }
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let u = grid.inner(i, j).clamp(-1.0, 1.0);
                let c = cov(u);
                gram[i * n + j] = c;
                gram[j * n + i] = c;
            }
        }
        let mut last_jitter = 0.0;
        for &jitter in &[0.0, 1e-12, 1e-10, 1e-8] {
            let mut a = gram.clone();
            for i in 0..n {
                a[i * n + i] += jitter;
            }
            if cholesky_in_place(&mut a, n) {
                return Ok(CholeskyFactor { n, l: a, jitter });
            }
            last_jitter = jitter;
        }
        Err(NngfError::NotPsd { jitter: last_jitter })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        (0..self.n)
            .map(|i| {
                self.l[i * self.n..i * self.n + i + 1]
                    .iter()
                    .zip(&z)
                    .map(|(l, z)| l * z)
                    .sum()
            })
            .collect()
    }
}

/// Exact Gaussian sample with covariance κ̂(⟨xᵢ,xⱼ⟩) at the grid points.
pub fn sample_field_cholesky<'g, F: Fn(f64) -> f64>(
    cov: F,
    grid: &'g SphereGrid,
    seed: u64,
) -> Result<FieldSample<'g>> {
    let factor = CholeskyFactor::new(cov, grid)?;
    let mut rng = crate::rng::stream(seed, &[0x43_484f4c]);
    let values = factor.sample(&mut rng);
    Ok(FieldSample {
        grid,
        values,
        seed,
        method: SampleMethod::Cholesky { jitter: factor.jitter },
    })
}

/// E[σ(Z)²] for the variance normalization of the weight draws.
fn activation_second_moment(act: &ActivationSpec) -> Result<f64> {
    let rule = crate::kernel::gaussian_line_rule(act.kinks(), 0.5);
    let m2 = rule.integrate(|z| {
        let s = act.eval(z);
        s * s
    });
    if !(m2.is_finite() && m2 > 1e-12) {
        return Err(NngfError::DegenerateActivation);
    }
    Ok(m2)
}

/// One draw of a finite-width network evaluated at unit points in
/// R^{d+1}. `widths[s]` is the width of layer T_s; the returned value is
/// the first coordinate of the last layer, whose covariance approaches
/// κ_{widths.len()-1}(⟨x,y⟩) as the intermediate widths grow. Weights
/// are N(0,1) at the input layer and N(0, 1/(n·E[σ(Z)²])) deeper, keeping
/// the pre-activation variance at 1 across layers.
pub fn finite_width_network_sample(
    act: &ActivationSpec,
    widths: &[usize],
    points: &[Vec<f64>],
    seed: u64,
) -> Result<Vec<f64>> {
    if widths.is_empty() || widths.contains(&0) {
        return Err(NngfError::Precondition("widths must be positive".into()));
    }
    let m2 = activation_second_moment(act)?;
    let mut rng = crate::rng::stream(seed, &[0x4e_4554]);
    let p = points.len();
    let dim_in = points.first().map_or(0, |v| v.len());
    // layer values, width-major: layer[j*p + t] = T_s,j(x_t)
    let mut layer = vec![0.0; widths[0] * p];
    for j in 0..widths[0] {
        let row: Vec<f64> = (0..dim_in).map(|_| rng.sample(StandardNormal)).collect();
        for (t, x) in points.iter().enumerate() {
            layer[j * p + t] = row.iter().zip(x).map(|(w, x)| w * x).sum();
        }
    }
    for s in 1..widths.len() {
        let (n_in, n_out) = (widths[s - 1], widths[s]);
        let scale = (1.0 / (n_in as f64 * m2)).sqrt();
        let mut next = vec![0.0; n_out * p];
        let mut sigma = vec![0.0; n_in * p];
        for (o, &v) in sigma.iter_mut().zip(&layer) {
            *o = act.eval(v);
        }
        for j in 0..n_out {
            let row: Vec<f64> = (0..n_in)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                .collect();
            for t in 0..p {
                let mut acc = 0.0;
                for (k, &w) in row.iter().enumerate() {
                    acc += w * sigma[k * p + t];
                }
                next[j * p + t] = acc;
            }
        }
        layer = next;
    }
    Ok(layer[..p].to_vec())
}
