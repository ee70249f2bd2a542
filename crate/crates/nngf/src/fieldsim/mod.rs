//! Monte Carlo layer: sphere grids, field samplers, functional estimates
//! and reproducible replicate experiments.

pub mod grid;
pub mod harmonics;
pub mod sample;

pub use grid::{sphere_grid, GridKind, SphereGrid};
pub use sample::{
    finite_width_network_sample, sample_field_cholesky, synthesize_band_limited,
    synthesize_field_s2, synthesize_with_plan,
    CholeskyFactor, FieldSample, SampleMethod, SynthesisPlan,
};

use crate::error::{NngfError, Result};
use crate::functionals::{hermite_value, Observable};
use crate::kernel::Kernel;
use crate::spectral::{normalized_spectrum, power_spectrum_auto, KappaHat};
use serde::{Deserialize, Serialize};

/// F_L replicate: Σᵢ wᵢ·φ(T̂_L(xᵢ)) ≈ ∫φ(T̂_L) dx.
pub fn estimate_functional(field: &FieldSample<'_>, observable: Observable) -> f64 {
    field
        .values
        .iter()
        .zip(&field.grid.weights)
        .map(|(&v, &w)| w * observable.eval(v))
        .sum()
}

/// Chaos-q component replicate: φ_q·Σᵢ wᵢ·H_q(T̂_L(xᵢ)).
pub fn estimate_chaos_component(field: &FieldSample<'_>, q: usize, phi_q: f64) -> f64 {
    assert!(q >= 2, "chaos components start at q = 2");
    phi_q
        * field
            .values
            .iter()
            .zip(&field.grid.weights)
            .map(|(&v, &w)| w * hermite_value(q, v))
            .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Standardize replicates by the chaos-variance table.
    Theoretical,
    /// Standardize by the sample mean and variance.
    Empirical,
}

/// Replicate schedule of a Monte Carlo run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub d: usize,
    pub depths: Vec<usize>,
    pub replicates: usize,
    pub observable: Observable,
    pub grid_kind: GridKind,
    pub grid_n: usize,
    pub master_seed: u64,
    pub normalization: Normalization,
}

/// Replicates of F_L at one depth, with the normalization record.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalSamples {
    pub depth: usize,
    pub observable: Observable,
    pub values: Vec<f64>,
    pub master_seed: u64,
    pub method: SampleMethod,
    pub normalization: Normalization,
    pub sample_mean: f64,
    pub sample_variance: f64,
}

impl FunctionalSamples {
    /// F̃ replicates standardized by the recorded (empirical) moments.
    pub fn standardized(&self) -> Vec<f64> {
        let sd = self.sample_variance.sqrt();
        self.values
            .iter()
            .map(|v| (v - self.sample_mean) / sd)
            .collect()
    }
}

fn sample_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Run the replicate schedule: for each depth, R field draws and their
/// functional values. Replicate r at depth L draws from the stream keyed
/// by (master seed, L, r), so results are bit-identical for any worker
/// count or partition. Spectral synthesis on S², Cholesky elsewhere.
pub fn monte_carlo_experiment(
    kernel: &Kernel,
    spec: &ExperimentSpec,
) -> Result<Vec<FunctionalSamples>> {
    if spec.replicates < 2 {
        return Err(NngfError::Precondition(
            "at least 2 replicates required".into(),
        ));
    }
    let grid = sphere_grid(spec.d, spec.grid_n, spec.grid_kind, spec.master_seed)?;
    let mut out = Vec::with_capacity(spec.depths.len());
    for &depth in &spec.depths {
        // Cholesky sampling is exact and costs n² per replicate, so it is
        // the default whenever the grid fits under its point cap; grids
        // beyond the cap go through spectral synthesis on S² (cost
        // n·(l_max+1)² per replicate, truncation error below
        // SYNTH_TAIL_TOL).
        let spectral = if spec.d == 2 && grid.len() > sample::CHOLESKY_POINT_CAP {
            let spectrum = normalized_spectrum(&power_spectrum_auto(kernel, depth, 2)?)?;
            let l_max = sample::required_l_max(&spectrum)?;
            Some((spectrum, l_max))
        } else {
            None
        };
        let (values, method) = if let Some((spectrum, l_max)) = spectral {
            let plan = SynthesisPlan::new(&grid, l_max)?;
            let values = try_map_range(spec.replicates, |r| {
                let mut rng = crate::rng::replicate_stream(spec.master_seed, depth, r);
                let field =
                    synthesize_with_plan(&spectrum, &grid, &plan, spec.master_seed, &mut rng)?;
                Ok(estimate_functional(&field, spec.observable))
            })?;
            (values, SampleMethod::SpectralS2 { l_max })
        } else {
            let hat = KappaHat::new(kernel, depth, spec.d)?;
            let factor = CholeskyFactor::new(|u| hat.eval(u), &grid)?;
            let jitter = factor.jitter;
            let values = try_map_range(spec.replicates, |r| {
                let mut rng = crate::rng::replicate_stream(spec.master_seed, depth, r);
                let field = FieldSample {
                    grid: &grid,
                    values: factor.sample(&mut rng),
                    seed: spec.master_seed,
                    method: SampleMethod::Cholesky { jitter },
                };
                Ok(estimate_functional(&field, spec.observable))
            })?;
            (values, SampleMethod::Cholesky { jitter })
        };
        let (sample_mean, sample_variance) = sample_moments(&values);
        out.push(FunctionalSamples {
            depth,
            observable: spec.observable,
            values,
            master_seed: spec.master_seed,
            method,
            normalization: spec.normalization,
            sample_mean,
            sample_variance,
        });
    }
    Ok(out)
}

fn try_map_range<F: Fn(usize) -> Result<f64> + Sync + Send>(
    n: usize,
    f: F,
) -> Result<Vec<f64>> {
    crate::par::map_range(n, f).into_iter().collect()
}
