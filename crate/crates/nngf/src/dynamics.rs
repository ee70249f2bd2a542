//! Fixed-point structure of the kernel map and renormalized iterates.
//!
//! The derivative κ'(1) splits kernels into three regimes: low-disorder
//! (κ'(1) < 1, the gap at u=1 contracts), sparse (κ'(1) = 1, polynomial
//! contraction driven by the boundary expansion), and high-disorder
//! (κ'(1) > 1, an interior fixed point b with multiplier λ = κ'(b) takes
//! over). Each regime gets its own renormalization of κ_L whose limit β
//! carries the constants of the deep-limit theorems.

use crate::error::{NngfError, Result};
use crate::kernel::{verify_boundary_expansion, Kernel};
use serde::Serialize;

const REGIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    LowDisorder,
    Sparse,
    HighDisorder,
}

/// Parameters of the interior fixed point in high disorder.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HighDisorderParams {
    /// Unique fixed point of κ in [0, 1).
    pub b: f64,
    /// Multiplier λ = κ'(b) ∈ (0, 1).
    pub lambda: f64,
    /// Singularity exponent ν = -log λ / log κ'(1).
    pub nu: f64,
    pub rho: f64,
    /// Normalization constant β₀ = 1 - b of the limit profile.
    pub beta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SparseCase {
    /// γ₂ > 2γ₁ - 1: the second boundary term does not feed A₁.
    A,
    /// γ₂ = 2γ₁ - 1: A₁ picks up the extra c₂/c₁ contribution.
    B,
}

/// Boundary-expansion constants of a sparse kernel:
/// 1-κ(u) = (1-u) - c₁(1-u)^{γ₁} - c₂(1-u)^{γ₂} + …
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SparseParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub c1: f64,
    pub c2: f64,
    pub a0: f64,
    pub a1: f64,
    pub nu: f64,
    pub rho: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub case: SparseCase,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub kprime1: f64,
    pub high: Option<HighDisorderParams>,
    pub sparse: Option<SparseParams>,
}

/// Classify by κ'(1) (tolerance 1e-9) and populate the regime's
/// parameter block.
pub fn classify_regime(kernel: &Kernel) -> Result<RegimeReport> {
    let kp1 = kernel.kprime1();
    if !kp1.is_finite() {
        return Err(NngfError::Precondition("kappa'(1) is not finite".into()));
    }
    if kp1 < 1.0 - REGIME_TOL {
        Ok(RegimeReport {
            regime: Regime::LowDisorder,
            kprime1: kp1,
            high: None,
            sparse: None,
        })
    } else if kp1 > 1.0 + REGIME_TOL {
        Ok(RegimeReport {
            regime: Regime::HighDisorder,
            kprime1: kp1,
            high: Some(high_disorder_params(kernel)?),
            sparse: None,
        })
    } else {
        let sp = sparse_params(kernel).map_err(|e| match e {
            NngfError::AssumptionViolation { r2 } => NngfError::UnclassifiableSparse(format!(
                "boundary-expansion fit R^2 = {r2:.4}"
            )),
            other => other,
        })?;
        Ok(RegimeReport {
            regime: Regime::Sparse,
            kprime1: kp1,
            high: None,
            sparse: Some(sp),
        })
    }
}

/// Fixed point b, multiplier λ and exponent ν for κ'(1) > 1. The root of
/// κ(u) = u in [0,1) is unique; bisection on [0, 1-1e-8] suffices.
pub fn high_disorder_params(kernel: &Kernel) -> Result<HighDisorderParams> {
    let kp1 = kernel.kprime1();
    if kp1 <= 1.0 + REGIME_TOL {
        return Err(NngfError::Precondition(format!(
            "high-disorder parameters need kappa'(1) > 1, got {kp1}"
        )));
    }
    let b = if kernel.at_zero() == 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0_f64, 1.0 - 1e-8);
        // f(0) = κ(0) > 0 and f(1-ε) ≈ (1-κ'(1))ε < 0
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if kernel.eval(mid) - mid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    debug_assert!((kernel.eval(b) - b).abs() < 1e-12);
    let lambda = kernel.deriv(b);
    if lambda < 1e-10 {
        return Err(NngfError::ExcludedSuperattractive);
    }
    if lambda >= 1.0 {
        return Err(NngfError::Precondition(format!(
            "fixed-point multiplier {lambda} is not contracting"
        )));
    }
    let nu = -lambda.ln() / kp1.ln();
    Ok(HighDisorderParams {
        b,
        lambda,
        nu,
        rho: 1.0 / nu,
        beta0: 1.0 - b,
    })
}

/// Boundary-expansion constants for κ'(1) = 1.
///
/// Series kernels are C⁴ at u=1, so the constants are exact Taylor data
/// (γ₁=2, γ₂=3, c₁=κ''(1)/2, c₂=-κ'''(1)/6, case B). The arccosine kernel
/// (κ'' blowing up at 1) is fitted in two stages: γ₁, c₁ by log-log
/// regression of κ'(1)(1-u)-(1-κ(u)) deep in the boundary layer
/// (g ∈ [1e-8, 1e-5], where the subleading term is ≤ 1e-5 relative), then
/// γ₂, c₂ from the relative residual on g ∈ [3e-3, 3e-1].
pub fn sparse_params(kernel: &Kernel) -> Result<SparseParams> {
    let kp1 = kernel.kprime1();
    if (kp1 - 1.0).abs() > REGIME_TOL {
        return Err(NngfError::Precondition(format!(
            "sparse parameters need kappa'(1) = 1, got {kp1}"
        )));
    }
    let (gamma1, gamma2, c1, c2, case) = if kernel.series().is_some() {
        let k2 = kernel.deriv2(1.0);
        if k2 <= 1e-12 {
            return Err(NngfError::UnclassifiableSparse(
                "no boundary correction: kappa''(1) = 0".into(),
            ));
        }
        (2.0, 3.0, k2 / 2.0, -kernel.deriv3(1.0) / 6.0, SparseCase::B)
    } else {
        let fit = verify_boundary_expansion(kernel)?;
        if fit.degenerate {
            return Err(NngfError::UnclassifiableSparse(
                "no boundary correction term detected".into(),
            ));
        }
        // stage 1: leading exponent from deep in the layer
        let (g1, c1) = fit_residual_window(kernel, 1e-8, 1e-5)?;
        // stage 2: relative residual r/(c₁ g^γ₁) - 1 ≈ (c₂/c₁)·g^{γ₂-γ₁}
        let n = 30;
        let (lo, hi) = (3e-3_f64, 3e-1_f64);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut sign = 0.0_f64;
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            let g = lo * (hi / lo).powf(t);
            let resid = kp1 * g - kernel.gap_map(g);
            let rel = resid / (c1 * g.powf(g1)) - 1.0;
            if rel != 0.0 {
                if sign == 0.0 {
                    sign = rel.signum();
                }
                xs.push(g.ln());
                ys.push(rel.abs().ln());
            }
        }
        if xs.len() < n / 2 {
            return Err(NngfError::UnclassifiableSparse(
                "second boundary term below resolution".into(),
            ));
        }
        let (slope, intercept, r2) = crate::kernel::ols(&xs, &ys);
        if r2 < 0.99 {
            return Err(NngfError::AssumptionViolation { r2 });
        }
        let g2 = g1 + slope;
        let c2 = sign * intercept.exp() * c1;
        let case = if (g2 - (2.0 * g1 - 1.0)).abs() < 0.05 {
            SparseCase::B
        } else {
            SparseCase::A
        };
        (g1, g2, c1, c2, case)
    };
    let a0 = c1 * (gamma1 - 1.0);
    if a0 <= 0.0 {
        return Err(NngfError::UnclassifiableSparse(format!(
            "A0 = {a0} must be positive"
        )));
    }
    let a1 = gamma1 * c1 / 2.0
        + if case == SparseCase::B { c2 / c1 } else { 0.0 };
    let nu = gamma1 - 1.0;
    let rho = 1.0 / nu;
    let beta0 = a0.powf(-rho);
    let beta1 = beta0 * a1 * rho / a0;
    Ok(SparseParams {
        gamma1,
        gamma2,
        c1,
        c2,
        a0,
        a1,
        nu,
        rho,
        beta0,
        beta1,
        case,
    })
}

/// Log-log fit of κ'(1)·g - gap(g) on [lo, hi]; returns (exponent, constant).
fn fit_residual_window(kernel: &Kernel, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let kp1 = kernel.kprime1();
    let n = 30;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let g = lo * (hi / lo).powf(t);
        let resid = kp1 * g - kernel.gap_map(g);
        if resid > 0.0 {
            xs.push(g.ln());
            ys.push(resid.ln());
        }
    }
    if xs.len() < n / 2 {
        return Err(NngfError::UnclassifiableSparse(
            "boundary residual not positive on the fit window".into(),
        ));
    }
    let (slope, intercept, r2) = crate::kernel::ols(&xs, &ys);
    if r2 < 0.99 {
        return Err(NngfError::AssumptionViolation { r2 });
    }
    Ok((slope, intercept.exp()))
}

/// β_L on a node grid, with the sup-norm change from depth L-1.
#[derive(Debug, Clone, Serialize)]
pub struct RenormalizedIterate {
    pub depth: usize,
    pub values: Vec<f64>,
    pub cauchy_gap: f64,
}

fn check_nodes(kernel: &Kernel, nodes: &[f64]) -> Result<()> {
    let minus_one_ok = kernel.eval(-1.0).abs() < 1.0 - 1e-12;
    for &x in nodes {
        if x >= 1.0 {
            return Err(NngfError::Precondition(format!(
                "node {x} at the singular endpoint"
            )));
        }
        if x < -1.0 || (x == -1.0 && !minus_one_ok) {
            return Err(NngfError::Precondition(format!(
                "node {x} outside the kernel's domain of contraction"
            )));
        }
    }
    Ok(())
}

/// Largest depth before the regime's renormalization factor leaves the
/// floating-point range.
fn max_safe_depth(log_rate: f64) -> usize {
    (690.0 / -log_rate) as usize
}

fn beta_values(kernel: &Kernel, report: &RegimeReport, depth: usize, nodes: &[f64]) -> Result<Vec<f64>> {
    match report.regime {
        Regime::LowDisorder => {
            let log_kp1 = report.kprime1.ln();
            if (depth as f64) * (-log_kp1) > 690.0 {
                return Err(NngfError::DepthLimit {
                    max_safe: max_safe_depth(log_kp1),
                });
            }
            Ok(crate::par::map_slice(nodes, |&x| {
                let g = kernel.iterate_gap(depth, 1.0 - x);
                if g == 0.0 {
                    0.0
                } else {
                    -(g.ln() - depth as f64 * log_kp1).exp()
                }
            }))
        }
        Regime::HighDisorder => {
            let p = report.high.as_ref().expect("high params populated");
            let log_lambda = p.lambda.ln();
            if (depth as f64) * (-log_lambda) > 690.0 {
                return Err(NngfError::DepthLimit {
                    max_safe: max_safe_depth(log_lambda),
                });
            }
            let vals = crate::par::map_slice(nodes, |&x| {
                let mut d = x - p.b;
                for _ in 0..depth {
                    d = diff_map(kernel, p.b, d);
                }
                if d == 0.0 {
                    0.0
                } else {
                    d.signum() * (d.abs().ln() - depth as f64 * log_lambda).exp()
                }
            });
            Ok(vals)
        }
        Regime::Sparse => {
            let p = report.sparse.as_ref().expect("sparse params populated");
            let lf = depth as f64;
            Ok(crate::par::map_slice(nodes, |&x| {
                let g = kernel.iterate_gap(depth, 1.0 - x);
                lf.powf(p.rho + 1.0) * (p.beta0 * lf.powf(-p.rho) - g) - p.beta1 * lf.ln()
            }))
        }
    }
}

/// One step of the difference coordinate d = κ_k(x) - b. Built to vanish
/// exactly at d = 0, so the bisection residual in b never re-enters the
/// iteration and β_L = d_L/λ^L stays clean at depths where λ^L ~ 1e-300.
fn diff_map(kernel: &Kernel, b: f64, d: f64) -> f64 {
    if b == 0.0 {
        return kernel.eval(d);
    }
    match kernel.eval_coeffs() {
        Some(coeffs) => {
            // κ(b+d) - κ(b) = Σ c_q b^q ((1+d/b)^q - 1)
            let lr = (d / b).ln_1p();
            let mut bq = 1.0;
            let mut acc = 0.0;
            for (q, &c) in coeffs.iter().enumerate() {
                if q > 0 {
                    bq *= b;
                }
                if c != 0.0 && q > 0 {
                    acc += c * bq * (q as f64 * lr).exp_m1();
                }
            }
            acc
        }
        None => kernel.eval(b + d) - kernel.eval(b),
    }
}

/// Exact regime renormalization of κ_L at the given depth.
pub fn beta_iterate(
    kernel: &Kernel,
    report: &RegimeReport,
    depth: usize,
    nodes: &[f64],
) -> Result<RenormalizedIterate> {
    if depth == 0 {
        return Err(NngfError::Precondition("depth must be at least 1".into()));
    }
    check_nodes(kernel, nodes)?;
    let values = beta_values(kernel, report, depth, nodes)?;
    let cauchy_gap = if depth >= 2 {
        let prev = beta_values(kernel, report, depth - 1, nodes)?;
        values
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(RenormalizedIterate {
        depth,
        values,
        cauchy_gap,
    })
}

/// Sparse shape function S_L(x) = (1-κ_L(x))^{1-γ₁} - A₀·L - A₁·log L.
pub fn s_iterate_sparse(
    kernel: &Kernel,
    params: &SparseParams,
    depth: usize,
    nodes: &[f64],
) -> Result<Vec<f64>> {
    for &x in nodes {
        if x >= 1.0 - 1e-15 {
            return Err(NngfError::Singularity);
        }
    }
    let lf = depth as f64;
    Ok(crate::par::map_slice(nodes, |&x| {
        let g = kernel.iterate_gap(depth, 1.0 - x);
        g.powf(1.0 - params.gamma1) - params.a0 * lf - params.a1 * lf.ln()
    }))
}

/// Converged limit profile β with per-node diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct BetaLimit {
    /// Depth at which the Cauchy criterion was met.
    pub depth: usize,
    pub values: Vec<f64>,
    /// Final sup-norm step size.
    pub achieved_gap: f64,
    /// ∫β dμ_d (high disorder with ν < d/2, where β ∈ L¹(μ)).
    pub mean: Option<f64>,
    /// β̂ = β - ∫β dμ at the caller's nodes.
    pub beta_hat: Option<Vec<f64>>,
}

const DEPTH_BUDGET: usize = 100_000;

/// Iterate β_L to its limit (Cauchy stopping on the node grid), and in
/// high disorder with ν < d/2 also produce the centered profile β̂.
pub fn beta_limit(
    kernel: &Kernel,
    report: &RegimeReport,
    nodes: &[f64],
    d: usize,
    tol: f64,
) -> Result<BetaLimit> {
    check_nodes(kernel, nodes)?;
    let centered = matches!(report.regime, Regime::HighDisorder)
        && report.high.as_ref().unwrap().nu < d as f64 / 2.0;
    let (depth, values, achieved_gap) = if centered {
        // converge on the union with the quadrature grid so that the mean
        // is taken at the same depth; k_max = 14 keeps the panel nodes
        // representable below u = 1 while the β ~ h^{-ν}, ν < d/2 tail
        // beyond gap 1e-14 contributes less than 1e-14^{d/2-ν}
        let rule = crate::spectral::mu_quadrature_refined(d, 14);
        let mut all: Vec<f64> = nodes.to_vec();
        all.extend(&rule.nodes);
        let (depth, vals, gap) = converge(kernel, report, &all, tol)?;
        let quad_vals = &vals[nodes.len()..];
        let mean = rule.integrate_values(quad_vals);
        let head: Vec<f64> = vals[..nodes.len()].to_vec();
        let hat: Vec<f64> = head.iter().map(|v| v - mean).collect();
        return Ok(BetaLimit {
            depth,
            values: head,
            achieved_gap: gap,
            mean: Some(mean),
            beta_hat: Some(hat),
        });
    } else {
        converge(kernel, report, nodes, tol)?
    };
    Ok(BetaLimit {
        depth,
        values,
        achieved_gap,
        mean: None,
        beta_hat: None,
    })
}

fn converge(
    kernel: &Kernel,
    report: &RegimeReport,
    nodes: &[f64],
    tol: f64,
) -> Result<(usize, Vec<f64>, f64)> {
    // incremental per-node state so the whole run is O(depth), not O(depth²)
    enum State {
        /// Gap coordinate g_L = 1 - κ_L(x) (low-disorder and sparse).
        Gap(Vec<f64>),
        /// Difference coordinate d_L = κ_L(x) - b (high disorder).
        Diff(Vec<f64>),
    }
    let mut depth: usize = 0;
    let mut state = match report.regime {
        Regime::LowDisorder | Regime::Sparse => {
            State::Gap(nodes.iter().map(|&x| 1.0 - x).collect())
        }
        Regime::HighDisorder => {
            let b = report.high.as_ref().unwrap().b;
            State::Diff(nodes.iter().map(|&x| x - b).collect())
        }
    };
    let betas = |state: &State, depth: usize| -> Vec<f64> {
        let lf = depth as f64;
        match (report.regime, state) {
            (Regime::LowDisorder, State::Gap(g)) => {
                let log_kp1 = report.kprime1.ln();
                g.iter()
                    .map(|&g| if g == 0.0 { 0.0 } else { -(g.ln() - lf * log_kp1).exp() })
                    .collect()
            }
            (Regime::Sparse, State::Gap(g)) => {
                let p = report.sparse.as_ref().unwrap();
                g.iter()
                    .map(|&g| {
                        lf.powf(p.rho + 1.0) * (p.beta0 * lf.powf(-p.rho) - g)
                            - p.beta1 * lf.ln()
                    })
                    .collect()
            }
            (Regime::HighDisorder, State::Diff(d)) => {
                let log_lambda = report.high.as_ref().unwrap().lambda.ln();
                d.iter()
                    .map(|&d| {
                        if d == 0.0 {
                            0.0
                        } else {
                            d.signum() * (d.abs().ln() - lf * log_lambda).exp()
                        }
                    })
                    .collect()
            }
            _ => unreachable!(),
        }
    };
    let step = |state: &mut State| match state {
        State::Gap(g) => {
            for g in g.iter_mut() {
                *g = kernel.gap_map(*g);
            }
        }
        State::Diff(d) => {
            let b = report.high.as_ref().unwrap().b;
            for d in d.iter_mut() {
                *d = diff_map(kernel, b, *d);
            }
        }
    };
    let log_rate = match report.regime {
        Regime::LowDisorder => report.kprime1.ln(),
        Regime::HighDisorder => report.high.as_ref().unwrap().lambda.ln(),
        Regime::Sparse => 0.0,
    };
    step(&mut state);
    depth += 1;
    let mut prev = betas(&state, depth);
    loop {
        if log_rate < 0.0 && (depth + 1) as f64 * (-log_rate) > 690.0 {
            // renormalization factor exhausted before the tolerance
            return Err(NngfError::Budget {
                budget: depth,
                gap: f64::NAN,
            });
        }
        step(&mut state);
        depth += 1;
        let cur = betas(&state, depth);
        // relative criterion: nodes near u = 1 carry β ~ (1-x)^{-ν}, which
        // can dwarf any absolute tolerance
        let gap = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
            .fold(0.0, f64::max);
        if gap < tol {
            return Ok((depth, cur, gap));
        }
        if depth >= DEPTH_BUDGET {
            return Err(NngfError::Budget { budget: depth, gap });
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kernel_from_series, KernelSeries};
    use approx::assert_abs_diff_eq;

    fn series_kernel(pairs: &[(usize, f64)]) -> Kernel {
        let order = pairs.iter().map(|&(q, _)| q).max().unwrap();
        let mut c = vec![0.0; order + 1];
        for &(q, v) in pairs {
            c[q] = v;
        }
        kernel_from_series(KernelSeries::new(c).unwrap())
    }

    fn high_kernel() -> Kernel {
        series_kernel(&[(1, 0.9), (10, 0.1)])
    }

    #[test]
    fn classification_examples() {
        let low = classify_regime(&series_kernel(&[(0, 0.3), (1, 0.5), (2, 0.2)])).unwrap();
        assert_eq!(low.regime, Regime::LowDisorder);
        assert_abs_diff_eq!(low.kprime1, 0.9, epsilon = 1e-15);

        let sparse = classify_regime(&Kernel::relu()).unwrap();
        assert_eq!(sparse.regime, Regime::Sparse);
        assert_abs_diff_eq!(sparse.kprime1, 1.0, epsilon = 1e-15);

        let high = classify_regime(&high_kernel()).unwrap();
        assert_eq!(high.regime, Regime::HighDisorder);
        assert_abs_diff_eq!(high.kprime1, 1.9, epsilon = 1e-15);
    }

    #[test]
    fn classification_survives_retruncation() {
        let mut c = vec![0.0; 11];
        c[1] = 0.9;
        c[10] = 0.1 - 5e-13;
        let k = kernel_from_series(KernelSeries::new(c).unwrap());
        assert_eq!(classify_regime(&k).unwrap().regime, Regime::HighDisorder);
    }

    #[test]
    fn high_disorder_parameter_oracles() {
        let p = high_disorder_params(&high_kernel()).unwrap();
        assert!(p.b.abs() < 1e-10);
        assert_abs_diff_eq!(p.lambda, 0.9, epsilon = 1e-10);
        let nu = -(0.9_f64.ln()) / 1.9_f64.ln();
        assert_abs_diff_eq!(p.nu, nu, epsilon = 1e-15);
        assert_abs_diff_eq!(p.nu, 0.1641513, epsilon = 1e-6);

        let p2 = high_disorder_params(&series_kernel(&[(1, 0.6), (2, 0.4)])).unwrap();
        assert!(p2.b.abs() < 1e-10);
        assert_abs_diff_eq!(p2.lambda, 0.6, epsilon = 1e-10);
        assert_abs_diff_eq!(p2.nu, 1.5181806, epsilon = 1e-6);
    }

    #[test]
    fn interior_fixed_point_is_located() {
        // κ(u) = 0.05 + 0.2u + 0.75u³: κ'(1) = 2.45, root of κ(u)=u inside
        let k = series_kernel(&[(0, 0.05), (1, 0.2), (3, 0.75)]);
        let p = high_disorder_params(&k).unwrap();
        assert!(p.b > 0.0 && p.b < 1.0);
        assert_abs_diff_eq!(k.eval(p.b), p.b, epsilon = 1e-13);
        assert!(p.lambda > 0.0 && p.lambda < 1.0);
    }

    #[test]
    fn square_kernel_is_superattractive() {
        let err = high_disorder_params(&series_kernel(&[(2, 1.0)])).unwrap_err();
        assert!(matches!(err, NngfError::ExcludedSuperattractive));
    }

    #[test]
    fn sparse_precondition_rejects_other_slopes() {
        let err = sparse_params(&series_kernel(&[(1, 0.75), (3, 0.25)])).unwrap_err();
        assert!(matches!(err, NngfError::Precondition(_)));
    }

    #[test]
    fn relu_sparse_constants() {
        let p = sparse_params(&Kernel::relu()).unwrap();
        let pi = std::f64::consts::PI;
        let c1 = 2.0 * 2.0_f64.sqrt() / (3.0 * pi);
        assert_abs_diff_eq!(p.gamma1, 1.5, epsilon = 5e-3);
        assert!((p.c1 - c1).abs() / c1 < 0.02);
        assert_abs_diff_eq!(p.gamma2, 2.5, epsilon = 0.1);
        // next boundary term: √2/(30π)
        let c2 = 2.0_f64.sqrt() / (30.0 * pi);
        assert!((p.c2 - c2).abs() / c2 < 0.15, "c2 = {}", p.c2);
        assert_eq!(p.case, SparseCase::A);
        assert!((p.a0 - 0.1500528).abs() / 0.1500528 < 0.02);
        assert!((p.a1 - 0.2250791).abs() / 0.2250791 < 0.02);
        assert!((p.beta0 - 44.4132).abs() / 44.4132 < 0.05);
        assert!((p.beta1 - 3.0 * 44.4132).abs() / (3.0 * 44.4132) < 0.07);
        assert_abs_diff_eq!(p.nu, 0.5, epsilon = 5e-3);
    }

    #[test]
    fn smooth_sparse_kernel_uses_taylor_data() {
        // κ = 0.3 + 0.5u + 0.1u² + 0.1u³: κ'(1) = 1, κ''(1) = 0.8, κ'''(1) = 0.6
        let k = series_kernel(&[(0, 0.3), (1, 0.5), (2, 0.1), (3, 0.1)]);
        let p = sparse_params(&k).unwrap();
        assert_eq!(p.case, SparseCase::B);
        assert_eq!((p.gamma1, p.gamma2), (2.0, 3.0));
        assert_abs_diff_eq!(p.c1, 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(p.c2, -0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(p.a0, 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(p.a1, 0.4 - 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(p.beta0, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.nu, 1.0, epsilon = 0.0);
    }

    #[test]
    fn affine_kernel_beta_is_exact() {
        // κ(u) = 0.5+0.5u: κ_L(x) = 1-0.5^L(1-x), so β_L(x) = -(1-x) exactly
        let k = series_kernel(&[(0, 0.5), (1, 0.5)]);
        let report = classify_regime(&k).unwrap();
        let nodes = [-0.8, -0.2, 0.0, 0.4, 0.9];
        for depth in [1, 5, 30] {
            let it = beta_iterate(&k, &report, depth, &nodes).unwrap();
            for (&x, &b) in nodes.iter().zip(&it.values) {
                assert_abs_diff_eq!(b, x - 1.0, epsilon = 1e-12);
            }
        }
        let lim = beta_limit(&k, &report, &nodes, 2, 1e-10).unwrap();
        for (&x, &b) in nodes.iter().zip(&lim.values) {
            assert_abs_diff_eq!(b, x - 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn high_disorder_beta_monotone_and_converged() {
        let k = high_kernel();
        let report = classify_regime(&k).unwrap();
        let nodes = [0.0, 0.25, 0.5, 0.75, 0.9];
        // β_L(b) = 0 at the fixed point (b = 0 here)
        let mut prev: Option<Vec<f64>> = None;
        for depth in [1, 3, 10, 30, 100, 300] {
            let it = beta_iterate(&k, &report, depth, &nodes).unwrap();
            assert_eq!(it.values[0], 0.0);
            assert!(it.values.iter().all(|&v| v >= 0.0));
            if let Some(p) = prev {
                for (a, b) in it.values.iter().zip(&p) {
                    assert!(a >= b, "beta_L not nondecreasing: {a} < {b}");
                }
            }
            prev = Some(it.values);
        }
        let lim = beta_limit(&k, &report, &nodes, 2, 1e-10).unwrap();
        assert!(lim.depth <= 350, "needed depth {}", lim.depth);
        assert!(lim.achieved_gap < 1e-10);
    }

    #[test]
    fn low_disorder_beta_negative_with_shrinking_magnitude() {
        // convexity of κ gives gap_map(g) ≤ κ'(1)·g, so |β_L| is
        // nonincreasing in L (β_L itself rises toward the negative limit)
        let k = series_kernel(&[(0, 0.3), (1, 0.5), (2, 0.2)]);
        let report = classify_regime(&k).unwrap();
        let nodes = [-0.9, -0.3, 0.2, 0.7, 0.95];
        let mut prev: Option<Vec<f64>> = None;
        for depth in [1, 4, 16, 64] {
            let it = beta_iterate(&k, &report, depth, &nodes).unwrap();
            assert!(it.values.iter().all(|&v| v <= 0.0));
            if let Some(p) = prev {
                for (a, b) in it.values.iter().zip(&p) {
                    assert!(a.abs() <= b.abs() + 1e-14);
                }
            }
            prev = Some(it.values);
        }
        let lim = beta_limit(&k, &report, &nodes, 2, 1e-10).unwrap();
        assert!(lim.values.iter().all(|&v| v < 0.0));
    }

    #[test]
    fn koenigs_normalization_at_the_fixed_point() {
        let k = high_kernel();
        let report = classify_regime(&k).unwrap();
        let lim = beta_limit(&k, &report, &[1e-3], 2, 1e-12).unwrap();
        assert!((lim.values[0] / 1e-3 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn beta_singularity_exponent_at_one() {
        // β(1-h) ~ h^{-ν}: log-log slope within 5% of -ν on h ∈ [1e-4, 1e-2]
        let k = high_kernel();
        let report = classify_regime(&k).unwrap();
        let p = report.high.unwrap();
        let hs: Vec<f64> = (0..21)
            .map(|i| 1e-4 * 100.0_f64.powf(i as f64 / 20.0))
            .collect();
        let nodes: Vec<f64> = hs.iter().map(|h| 1.0 - h).collect();
        let lim = beta_limit(&k, &report, &nodes, 2, 1e-9).unwrap();
        let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = lim.values.iter().map(|v| v.ln()).collect();
        let (slope, _, _) = crate::kernel::ols(&xs, &ys);
        assert!((slope + p.nu).abs() / p.nu < 0.05, "slope {slope} vs {}", -p.nu);
    }

    #[test]
    fn beta_semigroup_identity() {
        // β(x) = λ^{-n} β(κ_n(x))
        let k = high_kernel();
        let report = classify_regime(&k).unwrap();
        let p = report.high.unwrap();
        let x = 0.6;
        for n in 1..=5usize {
            let kn = k.iterate(n, x).unwrap();
            let lim = beta_limit(&k, &report, &[x, kn], 2, 1e-12).unwrap();
            let lhs = lim.values[0];
            let rhs = lim.values[1] / p.lambda.powi(n as i32);
            assert!((lhs - rhs).abs() < 1e-8, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn beta_domination_bound() {
        // |β_L(x)|·(1-x²)^ν stays bounded uniformly in L and x
        let k = high_kernel();
        let report = classify_regime(&k).unwrap();
        let p = report.high.unwrap();
        let nodes: Vec<f64> = (0..40).map(|i| -0.999 + 1.998 * i as f64 / 39.0).collect();
        let bound_at = |depth: usize| -> f64 {
            beta_iterate(&k, &report, depth, &nodes)
                .unwrap()
                .values
                .iter()
                .zip(&nodes)
                .map(|(&v, &x)| v.abs() * (1.0 - x * x).powf(p.nu))
                .fold(0.0, f64::max)
        };
        let m50 = bound_at(50);
        for depth in [100, 200, 400] {
            assert!(bound_at(depth) <= 1.05 * m50 + 1e-9);
        }
    }

    #[test]
    fn depth_limit_is_reported() {
        let k = series_kernel(&[(0, 0.5), (1, 0.25), (2, 0.25)]);
        let report = classify_regime(&k).unwrap();
        let err = beta_iterate(&k, &report, 5000, &[0.3]).unwrap_err();
        assert!(matches!(err, NngfError::DepthLimit { max_safe } if max_safe > 100));
    }

    #[test]
    fn nodes_at_singular_endpoints_rejected() {
        let k = high_kernel();
        let report = classify_regime(&k).unwrap();
        assert!(beta_iterate(&k, &report, 5, &[1.0]).is_err());
        // κ(-1) = -0.8, so -1 is allowed here
        assert!(beta_iterate(&k, &report, 5, &[-1.0]).is_ok());
        // odd kernel: κ(-1) = -1, endpoint excluded
        let odd = series_kernel(&[(1, 0.5), (3, 0.5)]);
        let rodd = classify_regime(&odd).unwrap();
        assert!(beta_iterate(&odd, &rodd, 5, &[-1.0]).is_err());
    }

    #[test]
    fn high_disorder_mean_and_centering() {
        let k = high_kernel();
        let report = classify_regime(&k).unwrap();
        // ν ≈ 0.164 < d/2 = 1: β ∈ L¹(μ) and β̂ is centered
        let nodes = [0.2, 0.5];
        let lim = beta_limit(&k, &report, &nodes, 2, 1e-10).unwrap();
        let mean = lim.mean.unwrap();
        assert!(mean.is_finite() && mean > 0.0);
        let hat = lim.beta_hat.unwrap();
        assert_abs_diff_eq!(hat[0], lim.values[0] - mean, epsilon = 1e-14);
    }

    #[test]
    fn sparse_shape_function_growth() {
        // (1-κ_L(0))^{-1/2}/L → A₀ within 2% at L = 5000
        let k = Kernel::relu();
        let p = sparse_params(&k).unwrap();
        let g = k.iterate_gap(5000, 1.0);
        let ratio = g.powf(-0.5) / 5000.0;
        assert!(
            (ratio - p.a0).abs() / p.a0 < 0.02,
            "ratio {ratio} vs A0 {}",
            p.a0
        );
        // S_L stays o(L): bounded by a constant at x = 0 for large L
        let report = classify_regime(&k).unwrap();
        let sp = report.sparse.unwrap();
        let s = s_iterate_sparse(&k, &sp, 5000, &[0.0]).unwrap();
        assert!(s[0].abs() < 0.05 * sp.a0 * 5000.0, "S_L(0) = {}", s[0]);
        assert!(s_iterate_sparse(&k, &sp, 10, &[1.0 - 1e-16]).is_err());
    }

    #[test]
    fn sparse_beta_iterate_is_finite_and_stabilizing() {
        let k = Kernel::relu();
        let report = classify_regime(&k).unwrap();
        let nodes = [0.0, 0.5];
        let b200 = beta_iterate(&k, &report, 200, &nodes).unwrap();
        let b400 = beta_iterate(&k, &report, 400, &nodes).unwrap();
        assert!(b200.values.iter().all(|v| v.is_finite()));
        // slow (log-corrected) drift, but clearly not diverging
        for (a, b) in b200.values.iter().zip(&b400.values) {
            assert!((a - b).abs() < 0.2 * a.abs().max(1.0));
        }
    }

    #[test]
    fn regime_report_serializes() {
        let report = classify_regime(&high_kernel()).unwrap();
        let js = serde_json::to_string(&report).unwrap();
        assert!(js.contains("high-disorder"));
        assert!(js.contains("lambda"));
    }
}
