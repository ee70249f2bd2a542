//! Statistical verification: distance to Gaussianity, cross-depth
//! stability, cumulant summaries, and variance-rate regression.

use crate::error::{NngfError, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// One-sample comparison against the standard Gaussian.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceReport {
    /// 1-D Wasserstein distance via quantile coupling.
    pub w1: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub n: usize,
    /// Percentile bootstrap interval for W1 (500 resamples).
    pub w1_ci: (f64, f64),
}

const BOOTSTRAP_RESAMPLES: usize = 500;

fn check_finite(samples: &[f64]) -> Result<()> {
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(NngfError::Data("non-finite sample value".into()));
    }
    Ok(())
}

/// W1 of sorted samples against standard normal quantiles at plotting
/// positions (i - 1/2)/n. Exact for the 1-D optimal coupling in the
/// large-n limit.
fn w1_sorted(sorted: &[f64], quantiles: &[f64]) -> f64 {
    sorted
        .iter()
        .zip(quantiles)
        .map(|(s, q)| (s - q).abs())
        .sum::<f64>()
        / sorted.len() as f64
}

/// One-sample KS statistic against the standard normal CDF.
fn ks_one_sample(sorted: &[f64]) -> f64 {
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = gauss.cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail probability Q(t) = 2 Σ (-1)^{k-1} e^{-2k²t²}.
fn kolmogorov_tail(t: f64) -> f64 {
    if t < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * t).powi(2)).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(statistic: f64, n_eff: f64) -> f64 {
    let sqrt_n = n_eff.sqrt();
    kolmogorov_tail((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic)
}

/// Distance of a sample to N(0,1): quantile-coupled W1 with a bootstrap
/// interval, plus the KS statistic and its asymptotic p-value.
pub fn w1_to_gaussian(samples: &[f64], seed: u64) -> Result<DistanceReport> {
    let n = samples.len();
    if n < 100 {
        return Err(NngfError::Precondition(format!(
            "w1_to_gaussian needs at least 100 samples, got {n}"
        )));
    }
    check_finite(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let quantiles: Vec<f64> = (0..n)
        .map(|i| gauss.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect();
    let w1 = w1_sorted(&sorted, &quantiles);
    let ks = ks_one_sample(&sorted);
    let mut rng = crate::rng::stream(seed, &[0x424f_4f54]);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut resample = vec![0.0; n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for slot in resample.iter_mut() {
            *slot = sorted[rng.gen_range(0..n)];
        }
        resample.sort_by(|a, b| a.total_cmp(b));
        boot.push(w1_sorted(&resample, &quantiles));
    }
    boot.sort_by(|a, b| a.total_cmp(b));
    let lo = boot[(0.025 * BOOTSTRAP_RESAMPLES as f64) as usize];
    let hi = boot[((0.975 * BOOTSTRAP_RESAMPLES as f64) as usize).min(boot.len() - 1)];
    Ok(DistanceReport {
        w1,
        ks_statistic: ks,
        ks_p_value: ks_p_value(ks, n as f64),
        n,
        w1_ci: (lo, hi),
    })
}

/// Two-sample KS statistic and asymptotic p-value with effective sample
/// size nm/(n+m). Used to test that standardized functionals at different
/// depths share a law.
pub fn two_sample_stability(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 200 || b.len() < 200 {
        return Err(NngfError::Precondition(format!(
            "two_sample_stability needs 200 samples per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_finite(a)?;
    check_finite(b)?;
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.total_cmp(y));
    sb.sort_by(|x, y| x.total_cmp(y));
    let (n, m) = (sa.len(), sb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0_f64;
    while i < n && j < m {
        let x = sa[i].min(sb[j]);
        while i < n && sa[i] <= x {
            i += 1;
        }
        while j < m && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok((d, ks_p_value(d, n_eff)))
}

/// Standard moment estimators with delete-1 jackknife standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct MomentsSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_skewness: f64,
    pub se_kurtosis: f64,
}

fn moments_from_power_sums(n: f64, s: &[f64; 5]) -> (f64, f64, f64, f64) {
    let mean = s[1] / n;
    let m2 = s[2] / n - mean * mean;
    let m3 = s[3] / n - 3.0 * mean * s[2] / n + 2.0 * mean.powi(3);
    let m4 = s[4] / n - 4.0 * mean * s[3] / n + 6.0 * mean * mean * s[2] / n
        - 3.0 * mean.powi(4);
    let var = m2 * n / (n - 1.0);
    (mean, var, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Mean, variance, skewness and excess kurtosis, each with a delete-1
/// jackknife standard error. Power sums make the n leave-one-out
/// recomputations O(n) total.
pub fn moments_summary(samples: &[f64]) -> Result<MomentsSummary> {
    let n = samples.len();
    if n < 100 {
        return Err(NngfError::Precondition(format!(
            "moments_summary needs at least 100 samples, got {n}"
        )));
    }
    check_finite(samples)?;
    let mut s = [0.0_f64; 5];
    for &x in samples {
        let mut p = 1.0;
        for sk in s.iter_mut() {
            *sk += p;
            p *= x;
        }
    }
    let (mean, variance, skewness, excess_kurtosis) = moments_from_power_sums(n as f64, &s);
    if !(variance.is_finite() && variance > 0.0) {
        return Err(NngfError::Data("degenerate sample: zero variance".into()));
    }
    // jackknife replicates of all four statistics
    let mut reps = vec![[0.0_f64; 4]; n];
    for (i, &x) in samples.iter().enumerate() {
        let mut loo = s;
        let mut p = 1.0;
        for sk in loo.iter_mut() {
            *sk -= p;
            p *= x;
        }
        let (a, b, c, d) = moments_from_power_sums((n - 1) as f64, &loo);
        reps[i] = [a, b, c, d];
    }
    let mut se = [0.0_f64; 4];
    for k in 0..4 {
        let bar = reps.iter().map(|r| r[k]).sum::<f64>() / n as f64;
        let ss = reps.iter().map(|r| (r[k] - bar).powi(2)).sum::<f64>();
        se[k] = ((n - 1) as f64 / n as f64 * ss).sqrt();
    }
    Ok(MomentsSummary {
        n,
        mean,
        variance,
        skewness,
        excess_kurtosis,
        se_mean: se[0],
        se_variance: se[1],
        se_skewness: se[2],
        se_kurtosis: se[3],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Abscissa {
    /// Regress log Var against L (geometric rates λ^{cL}).
    Depth,
    /// Regress log Var against log L (polynomial rates L^{-c}).
    LogDepth,
}

/// OLS fit of log variance against depth or log depth.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub abscissa: Abscissa,
    pub slope: f64,
    pub intercept: f64,
    /// 95% half-width for the slope from the OLS residuals.
    pub slope_half_width: f64,
    pub r_squared: f64,
}

/// Fit log Var(F_L) ~ slope·x + intercept, x the chosen abscissa.
pub fn fit_variance_rate(depths: &[usize], variances: &[f64], abscissa: Abscissa) -> Result<RateFit> {
    if depths.len() < 4 || depths.len() != variances.len() {
        return Err(NngfError::Precondition(format!(
            "rate fit needs at least 4 matched depths, got {} / {}",
            depths.len(),
            variances.len()
        )));
    }
    if variances.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(NngfError::Data("non-positive variance in rate fit".into()));
    }
    let xs: Vec<f64> = depths
        .iter()
        .map(|&l| match abscissa {
            Abscissa::Depth => l as f64,
            Abscissa::LogDepth => (l as f64).ln(),
        })
        .collect();
    let ys: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    let (slope, intercept, r_squared) = crate::kernel::ols(&xs, &ys);
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let se_slope = (sse / (n - 2.0) / sxx).sqrt();
    Ok(RateFit {
        abscissa,
        slope,
        intercept,
        slope_half_width: 1.96 * se_slope,
        r_squared,
    })
}
