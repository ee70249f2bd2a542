//! Hermite chaos expansions of nonlinear observables of the field, their
//! variances across depth, limit-law prediction, and the Malliavin–Stein
//! bound for the Gaussian regimes.

use crate::error::{NngfError, Result};
use crate::kernel::Kernel;
use crate::spectral::{
    self, eigenspace_dim, gaunt_hat, gegenbauer_row, mu_quadrature, mu_quadrature_refined,
    omega_d, KappaHat, RateClass,
};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Probabilists' Hermite polynomial H_q(x) (H_0 = 1, H_1 = x,
/// H_{q+1} = x·H_q - q·H_{q-1}).
pub fn hermite_value(q: usize, x: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            let mut hm = 1.0;
            let mut h = x;
            for k in 1..q {
                let next = x * h - k as f64 * hm;
                hm = h;
                h = next;
            }
            h
        }
    }
}

fn factorial(q: usize) -> f64 {
    (1..=q).map(|k| k as f64).product()
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Observables with closed-form chaos coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    /// 1{T(x) ≥ level}.
    ExcursionIndicator { level: f64 },
    /// H_q(T(x)).
    HermiteMonomial { q: usize },
}

impl Observable {
    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            Observable::ExcursionIndicator { level } => {
                if v >= level {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::HermiteMonomial { q } => hermite_value(q, v),
        }
    }
}

/// φ(x) = Σ_q φ_q H_q(x); `l2_norm_sq` stores E[φ(Z)²] = Σ_q q!·φ_q² over
/// all q, which prices the truncation tail.
#[derive(Debug, Clone, Serialize)]
pub struct HermiteExpansion {
    pub coeffs: Vec<f64>,
    pub l2_norm_sq: f64,
}

/// Coefficients below this magnitude are structural zeros; rank decisions
/// must not flip on rounding noise.
pub const COEFF_ZERO_TOL: f64 = 1e-13;

impl HermiteExpansion {
    pub fn q_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Σ_{q>q_max} q!·φ_q², the L² mass beyond the stored range.
    pub fn tail_mass(&self) -> f64 {
        let stored: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(q, &c)| factorial(q) * c * c)
            .sum();
        (self.l2_norm_sq - stored).max(0.0)
    }

    pub fn odd_part_only(&self) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(q, &c)| q % 2 == 1 || c.abs() <= COEFF_ZERO_TOL)
    }

    pub fn even_part_only(&self) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(q, &c)| q % 2 == 0 || c.abs() <= COEFF_ZERO_TOL)
    }
}

/// Chaos coefficients of the named observable in closed form. The
/// excursion indicator at level u has φ_0 = 1-Φ(u) and
/// φ_q = H_{q-1}(u)·ϕ(u)/q! (Gaussian integration by parts).
pub fn hermite_expand(observable: Observable, q_max: usize) -> HermiteExpansion {
    match observable {
        Observable::ExcursionIndicator { level } => {
            let normal = Normal::new(0.0, 1.0).unwrap();
            let pdf = std_normal_pdf(level);
            let mut coeffs = vec![1.0 - normal.cdf(level)];
            for q in 1..=q_max {
                coeffs.push(hermite_value(q - 1, level) * pdf / factorial(q));
            }
            // E[1{Z≥u}²] = 1-Φ(u)
            HermiteExpansion {
                l2_norm_sq: coeffs[0],
                coeffs,
            }
        }
        Observable::HermiteMonomial { q } => {
            let mut coeffs = vec![0.0; q.max(q_max) + 1];
            coeffs[q] = 1.0;
            HermiteExpansion {
                coeffs,
                l2_norm_sq: factorial(q),
            }
        }
    }
}

/// Chaos coefficients of an arbitrary observable by Gaussian quadrature,
/// with kink locations split onto panel boundaries. Convergence is
/// verified by halving the panels.
pub fn hermite_expand_quadrature<F: Fn(f64) -> f64>(
    f: F,
    kinks: &[f64],
    q_max: usize,
) -> Result<HermiteExpansion> {
    let project = |panel_len: f64| -> (Vec<f64>, f64) {
        let rule = crate::kernel::gaussian_line_rule(kinks, panel_len);
        let vals: Vec<f64> = rule.nodes.iter().map(|&z| f(z)).collect();
        let coeffs = (0..=q_max)
            .map(|q| {
                let s: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .zip(&vals)
                    .map(|((&z, &w), &v)| w * v * hermite_value(q, z))
                    .sum();
                s / factorial(q)
            })
            .collect();
        let l2: f64 = rule.weights.iter().zip(&vals).map(|(&w, &v)| w * v * v).sum();
        (coeffs, l2)
    };
    let (coarse, _) = project(0.5);
    let (fine, l2) = project(0.25);
    let delta = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if delta > 1e-10 {
        return Err(NngfError::QuadratureUnresolved { delta });
    }
    Ok(HermiteExpansion {
        coeffs: fine,
        l2_norm_sq: l2,
    })
}

/// Hermite rank: smallest q ≥ 2 with φ_q ≠ 0 and a nonvanishing depth-1
/// chaos variance. q = 1 is excluded structurally (the zero mode is
/// removed, so ∫κ̂ dμ = 0); for odd kernels, odd q with ∫κ̂^q dμ = 0 are
/// skipped.
pub fn hermite_rank(expansion: &HermiteExpansion, kernel: &Kernel, d: usize) -> Result<usize> {
    if kernel.is_odd() && expansion.odd_part_only() {
        return Err(NngfError::Precondition(
            "odd observable of an odd kernel: the functional degenerates".into(),
        ));
    }
    let q_max = expansion.q_max();
    for q in 2..=q_max {
        if expansion.coeffs[q].abs() <= COEFF_ZERO_TOL {
            continue;
        }
        let (signed, _) = spectral::kappa_hat_moment(kernel, 1, d, q)?;
        if signed.abs() > COEFF_ZERO_TOL {
            return Ok(q);
        }
    }
    Err(NngfError::RankUndetermined { q_max })
}

/// Var(F_L[q]) = q!·φ_q²·ω_d²·∫κ̂_L^q dμ.
pub fn chaos_variance(
    expansion: &HermiteExpansion,
    kernel: &Kernel,
    depth: usize,
    d: usize,
    q: usize,
) -> Result<f64> {
    if q < 2 {
        return Err(NngfError::Precondition(
            "chaos variances start at q = 2".into(),
        ));
    }
    let phi = expansion.coeffs.get(q).copied().unwrap_or(0.0);
    if phi.abs() <= COEFF_ZERO_TOL {
        return Ok(0.0);
    }
    let (signed, _) = spectral::kappa_hat_moment(kernel, depth, d, q)?;
    let omega = omega_d(d);
    // the signed moment is a variance factor, nonnegative up to quadrature
    // noise even for odd q
    Ok((factorial(q) * phi * phi * omega * omega * signed).max(0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosRow {
    pub q: usize,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosVarianceTable {
    pub depth: usize,
    pub d: usize,
    /// Per-chaos variances for q = 2..=q_max.
    pub rows: Vec<ChaosRow>,
    pub total: f64,
    /// Bound on Σ_{q>q_max} Var(F_L[q]) via |κ̂_L| ≤ 1.
    pub tail_bound: f64,
}

/// All chaos variances up to q_max plus an explicit truncation bound
/// (Σ_{q>q_max} q!·φ_q² · ω_d²·∫|κ̂_L|^{q_max+1} dμ, since |κ̂_L| ≤ 1).
pub fn total_variance(
    expansion: &HermiteExpansion,
    kernel: &Kernel,
    depth: usize,
    d: usize,
) -> Result<ChaosVarianceTable> {
    let q_max = expansion.q_max();
    let rule = mu_quadrature_refined(d, 60);
    let hat = KappaHat::new(kernel, depth, d)?;
    let values = crate::par::map_slice(&rule.nodes, |&x| hat.eval(x));
    let omega = omega_d(d);
    let rows: Vec<ChaosRow> = crate::par::map_range(q_max - 1, |i| {
        let q = i + 2;
        let phi = expansion.coeffs[q];
        let variance = if phi.abs() <= COEFF_ZERO_TOL {
            0.0
        } else {
            let (signed, _) = spectral::kernel_moment(&values, q, &rule);
            (factorial(q) * phi * phi * omega * omega * signed).max(0.0)
        };
        ChaosRow { q, variance }
    });
    let total: f64 = rows.iter().map(|r| r.variance).sum();
    let (_, abs_top) = spectral::kernel_moment(&values, q_max + 1, &rule);
    let tail_bound = expansion.tail_mass() * omega * omega * abs_top;
    if tail_bound > 0.1 * total {
        return Err(NngfError::WidenQmax {
            tail: tail_bound,
            partial: total,
        });
    }
    Ok(ChaosVarianceTable {
        depth,
        d,
        rows,
        total,
        tail_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum LimitCase {
    /// Q > d/(2ν): central limit with the regime's polynomial/log rate.
    Gaussian,
    /// Q = d/(2ν): central limit with an extra log factor in the variance.
    Critical,
    /// Q < d/(2ν): sgn(φ_Q)·Z̃_Q(β̂) limit.
    NonCentral {
        sign: f64,
        beth: Option<f64>,
        /// Var(Z_Q) = Q!·ω_d²·ℶ_Q when ℶ_Q is computable.
        variance: Option<f64>,
        /// Spectral third cumulant (Q = 2 only).
        third_cumulant: Option<f64>,
    },
    /// κ'(1) < 1: the field itself converges, no depth scaling.
    LowDisorder,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitPrediction {
    pub q: usize,
    pub nu: Option<f64>,
    pub threshold: Option<f64>,
    pub case: LimitCase,
    /// Human-readable depth asymptotics of Var(F_L).
    pub var_rate: String,
    /// One-sided Wasserstein rate (exponents only; the theorems' constants
    /// are unspecified).
    pub dw_rate: String,
}

/// Predict the limit law of F_L from the regime data and the observable's
/// Hermite rank.
pub fn predict_limit(
    kernel: &Kernel,
    report: &crate::dynamics::RegimeReport,
    expansion: &HermiteExpansion,
    d: usize,
) -> Result<LimitPrediction> {
    let q = hermite_rank(expansion, kernel, d)?;
    let high = matches!(report.regime, crate::dynamics::Regime::HighDisorder);
    if matches!(report.regime, crate::dynamics::Regime::LowDisorder) {
        return Ok(LimitPrediction {
            q,
            nu: None,
            threshold: None,
            case: LimitCase::LowDisorder,
            var_rate: "Var ≍ 1".into(),
            dw_rate: "n/a".into(),
        });
    }
    let rate = spectral::moment_rate_prediction(kernel, report, q, d)?;
    let (threshold, nu) = (rate.threshold, rate.nu);
    let (case, var_rate, dw_rate) = match rate.class {
        RateClass::Critical => (
            LimitCase::Critical,
            if high {
                format!("Var ≍ λ^{{{threshold:.3}·L}}·L")
            } else {
                format!("Var ≍ L^{{-{threshold:.3}}}·log L")
            },
            if high { "dW ≲ L^{-1/2}" } else { "dW ≲ (log L)^{-1/2}" }.into(),
        ),
        RateClass::Supercritical => (
            LimitCase::Gaussian,
            if high {
                format!("Var ≍ λ^{{{threshold:.3}·L}}")
            } else {
                format!("Var ≍ L^{{-{threshold:.3}}}")
            },
            if high {
                format!("dW ≲ L^{{-{:.3}}}", d as f64 / 4.0)
            } else {
                format!("dW ≲ (log L)^{{-{:.3}}}", d as f64 / 4.0)
            },
        ),
        RateClass::IdenticallyZero => {
            // the rank chaos never charges (odd kernel, odd rank)
            return Err(NngfError::Precondition(
                "rank chaos has identically zero moments (odd kernel, odd rank)".into(),
            ));
        }
        RateClass::BetaLimit { beth } => {
            let sign = expansion.coeffs[q].signum();
            let variance = beth.map(|b| factorial(q) * omega_d(d).powi(2) * b);
            let third_cumulant = if q == 2 && high {
                let g = beta_hat_modes(kernel, report, d)?;
                Some(zq_spectral_stats(&g, 2, d)?.third_cumulant.unwrap())
            } else {
                None
            };
            (
                LimitCase::NonCentral {
                    sign,
                    beth,
                    variance,
                    third_cumulant,
                },
                if high {
                    format!("Var ≍ λ^{{{q}L}}")
                } else {
                    format!("Var ≍ L^{{-{q}}}")
                },
                format!("→ sgn(φ_{q})·Z̃_{q}"),
            )
        }
    };
    Ok(LimitPrediction {
        q,
        nu: Some(nu),
        threshold: Some(threshold),
        case,
        var_rate,
        dw_rate,
    })
}

/// Limit mode weights g_∞(ℓ) = β₀^{-1}·∫β̂ G_ℓ dμ of the centered profile
/// (high disorder, ν < d/2), truncated when the dimension-weighted mass of
/// a mode falls below 1e-12.
pub fn beta_hat_modes(
    kernel: &Kernel,
    report: &crate::dynamics::RegimeReport,
    d: usize,
) -> Result<Vec<f64>> {
    let p = report
        .high
        .as_ref()
        .ok_or_else(|| NngfError::Precondition("limit modes need the high-disorder profile".into()))?;
    const L_CAP: usize = 200;
    let rule = spectral::mu_quadrature_oscillatory(d, L_CAP, 14);
    let lim = crate::dynamics::beta_limit(kernel, report, &rule.nodes, d, 1e-10)?;
    let hat = lim
        .beta_hat
        .ok_or_else(|| NngfError::Precondition("profile is not integrable: nu ≥ d/2".into()))?;
    let mut integrals = vec![0.0; L_CAP + 1];
    for ((&x, &w), &b) in rule.nodes.iter().zip(&rule.weights).zip(&hat) {
        let row = gegenbauer_row(L_CAP, d, x);
        for (acc, &gl) in integrals.iter_mut().zip(&row) {
            *acc += w * b * gl;
        }
    }
    // operator eigenvalue of β̂/β₀ on each degree-ℓ harmonic: ω·a_ℓ/(β₀·n_ℓ)
    // with a_ℓ/n_ℓ = ∫β̂ G_ℓ dμ
    let omega = omega_d(d);
    let mut g = vec![0.0];
    for l in 1..=L_CAP {
        let gl = omega * integrals[l] / p.beta0;
        g.push(gl);
        if l >= 4 && gl.abs() * eigenspace_dim(l, d) < 1e-12 {
            break;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Serialize)]
pub struct ZqStats {
    pub variance: f64,
    /// 8·Σ_ℓ g_ℓ³·n_ℓ, the third cumulant of the quadratic (Q = 2) limit.
    pub third_cumulant: Option<f64>,
    /// Partial admissibility sum Σ Π|g(ℓᵢ)|·n_{ℓᵢ}·|Ĝ_Q(ℓ₁..ℓ_Q)|.
    pub admissibility: f64,
}

/// Variance and (for Q = 2) third cumulant of the limit chaos Z_Q built
/// from mode weights g_ℓ (index = ℓ; the ℓ = 0 entry is ignored).
pub fn zq_spectral_stats(g: &[f64], q: usize, d: usize) -> Result<ZqStats> {
    assert!(q >= 2);
    let omega = omega_d(d);
    let l_max = g.len().saturating_sub(1);
    // admissibility partial sum over all Q-tuples of modes
    let mut admissibility = 0.0;
    let mut tuple = vec![1usize; q];
    if l_max >= 1 {
        'odometer: loop {
            let prod: f64 = tuple
                .iter()
                .map(|&l| g[l].abs() * eigenspace_dim(l, d))
                .product();
            if prod > 1e-16 {
                admissibility += prod * gaunt_hat(&tuple, d).abs();
            }
            if admissibility > 1e6 {
                return Err(NngfError::NotAdmissible(admissibility));
            }
            for i in 0..q {
                tuple[i] += 1;
                if tuple[i] <= l_max {
                    continue 'odometer;
                }
                tuple[i] = 1;
            }
            break;
        }
    }
    // Var = Q!·ω_d²·∫f^Q dμ with f = Σ g_ℓ (n_ℓ/ω_d) G_ℓ; for Q = 2 this
    // telescopes to 2·Σ g_ℓ²·n_ℓ by orthogonality
    let rule = mu_quadrature(d, (q * l_max) / 2 + 4);
    let f_vals: Vec<f64> = rule
        .nodes
        .iter()
        .map(|&x| {
            let row = gegenbauer_row(l_max, d, x);
            (1..=l_max)
                .map(|l| g[l] * eigenspace_dim(l, d) / omega * row[l])
                .sum()
        })
        .collect();
    let integral: f64 = f_vals
        .iter()
        .zip(&rule.weights)
        .map(|(&f, &w)| w * f.powi(q as i32))
        .sum();
    let variance = factorial(q) * omega * omega * integral;
    let third_cumulant = (q == 2).then(|| {
        8.0 * (1..=l_max)
            .map(|l| g[l].powi(3) * eigenspace_dim(l, d))
            .sum::<f64>()
    });
    Ok(ZqStats {
        variance,
        third_cumulant,
        admissibility,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MsTerm {
    pub q: usize,
    pub m_q: f64,
    /// Contraction split maximizing the bound.
    pub max_r: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MsBound {
    pub bound: f64,
    pub terms: Vec<MsTerm>,
}

/// Malliavin–Stein Wasserstein bound 4N·Σ_{q≤N} 3^{2q}·q!·M_q for the
/// variance-normalized functional truncated at chaos N, with
/// M_q² = c_q⁴·ω_d⁴·max_r ∫|κ̂|^q·∫|κ̂|^r·∫|κ̂|^{q-r} dμ.
pub fn malliavin_stein_bound(
    expansion: &HermiteExpansion,
    kernel: &Kernel,
    depth: usize,
    d: usize,
    n_chaos: usize,
) -> Result<MsBound> {
    let rank = hermite_rank(expansion, kernel, d)?;
    if n_chaos < rank {
        return Err(NngfError::EmptySum {
            n: n_chaos,
            rank,
        });
    }
    let rule = mu_quadrature_refined(d, 60);
    let hat = KappaHat::new(kernel, depth, d)?;
    let values = crate::par::map_slice(&rule.nodes, |&x| hat.eval(x));
    let abs_moments: Vec<f64> = (0..=n_chaos)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                spectral::kernel_moment(&values, k, &rule).1
            }
        })
        .collect();
    let variance: f64 = (2..=n_chaos)
        .map(|q| {
            let phi = expansion.coeffs.get(q).copied().unwrap_or(0.0);
            let (signed, _) = spectral::kernel_moment(&values, q, &rule);
            (factorial(q) * phi * phi * omega_d(d).powi(2) * signed).max(0.0)
        })
        .sum();
    if variance <= 0.0 {
        return Err(NngfError::Precondition(
            "truncated functional has zero variance".into(),
        ));
    }
    let omega4 = omega_d(d).powi(4);
    let mut bound = 0.0;
    let mut terms = Vec::new();
    for q in 2..=n_chaos {
        let phi = expansion.coeffs.get(q).copied().unwrap_or(0.0);
        if phi.abs() <= COEFF_ZERO_TOL {
            continue;
        }
        let cq = phi / variance.sqrt();
        let (max_r, prod) = (1..q)
            .map(|r| (r, abs_moments[q] * abs_moments[r] * abs_moments[q - r]))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let m_q = (cq.powi(4) * omega4 * prod).sqrt();
        bound += 9.0_f64.powi(q as i32) * factorial(q) * m_q;
        terms.push(MsTerm { q, m_q, max_r });
    }
    Ok(MsBound {
        bound: 4.0 * n_chaos as f64 * bound,
        terms,
    })
}
