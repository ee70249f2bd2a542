//! Covariance kernels of infinite-width networks on the sphere.
//!
//! A kernel is a function κ on [-1,1] with κ(1) = 1 that is either the
//! arccosine closed form (ReLU activation) or a nonnegative power series
//! κ(u) = Σ c_q u^q with Σ c_q = 1. Depth-L covariances are L-fold
//! compositions κ_L = κ∘…∘κ; near the fixed point u = 1 they are iterated
//! in the gap coordinate g = 1-u to keep precision at large L.

use crate::error::{NngfError, Result};
use crate::functionals::hermite_value;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Activation of a single network unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ActivationSpec {
    Relu,
    Identity,
    /// σ(x) = Σ_q a_q H_q(x) with probabilists' Hermite polynomials.
    HermiteSeries { coeffs: Vec<f64> },
}

impl ActivationSpec {
    /// Evaluate σ(x).
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ActivationSpec::Relu => x.max(0.0),
            ActivationSpec::Identity => x,
            ActivationSpec::HermiteSeries { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(q, &a)| a * hermite_value(q, x))
                .sum(),
        }
    }

    /// Points where σ is not smooth (quadrature panels must break there).
    pub(crate) fn kinks(&self) -> &'static [f64] {
        match self {
            ActivationSpec::Relu => &[0.0],
            _ => &[],
        }
    }
}

/// Hermite coefficients a_q of a normalized activation: the induced
/// kernel series is c_q = q!·a_q² and Σ q!·a_q² = 1.
///
/// ReLU and identity use closed forms; an explicit Hermite series is just
/// rescaled so its Gaussian second moment is 1. Entries whose factorial
/// overflows come back as 0; callers that need deep tails should build the
/// series with [`activation_series`], which tracks c_q directly.
pub fn hermite_coefficients(activation: &ActivationSpec, q_max: usize) -> Result<Vec<f64>> {
    let mut a = vec![0.0; q_max + 1];
    match activation {
        ActivationSpec::Identity => {
            a[1] = 1.0;
        }
        ActivationSpec::Relu => {
            // a_q = J_q(σ)·√C with C = 1/E[relu(Z)²] = 2:
            // a_0 = 1/√π, a_1 = 1/√2, a_{2k} = (-1)^{k+1}·(2k-3)!!·√2/√(2π·(2k)!·... )
            let c = relu_series_coeffs(q_max);
            let mut fact = 1.0_f64;
            for q in 0..=q_max {
                if q > 0 {
                    fact *= q as f64;
                }
                let mag = (c[q] / fact).sqrt();
                let sign = if q >= 4 && q % 2 == 0 && (q / 2) % 2 == 0 {
                    -1.0
                } else {
                    1.0
                };
                a[q] = sign * mag;
            }
        }
        ActivationSpec::HermiteSeries { coeffs } => {
            if coeffs.iter().skip(1).all(|&x| x == 0.0) {
                return Err(NngfError::DegenerateActivation);
            }
            let mut fact = 1.0_f64;
            let mut norm2 = 0.0;
            for (q, &aq) in coeffs.iter().enumerate() {
                if q > 0 {
                    fact *= q as f64;
                }
                norm2 += fact * aq * aq;
            }
            if !(norm2 > 0.0) || !norm2.is_finite() {
                return Err(NngfError::DegenerateActivation);
            }
            let scale = norm2.sqrt().recip();
            for (q, &aq) in coeffs.iter().enumerate().take(q_max + 1) {
                a[q] = aq * scale;
            }
        }
    }
    Ok(a)
}

/// Gauss–Legendre panel rule for ∫ f(z)·φ(z) dz on the line, with the
/// activation's kink points on panel boundaries so that piecewise-smooth
/// integrands converge spectrally. (A plain Gauss–Hermite rule stalls near
/// n^{-0.7} across the relu kink and can never reach the 1e-6 oracle
/// tolerance; panel splitting restores machine precision.)
pub(crate) fn gaussian_line_rule(kinks: &[f64], panel_len: f64) -> crate::quad::Rule1D {
    const HALF_RANGE: f64 = 15.0; // φ(15) ≈ 5e-50: truncation is immaterial
    let mut cuts = vec![-HALF_RANGE];
    let mut z = -HALF_RANGE;
    while z < HALF_RANGE - 1e-12 {
        z += panel_len;
        cuts.push(z.min(HALF_RANGE));
    }
    for &k in kinks {
        if k.abs() < HALF_RANGE {
            cuts.push(k);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let base = crate::quad::gauss_legendre(12);
    let norm = (2.0 * PI).sqrt().recip();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (&t, &w) in base.nodes.iter().zip(&base.weights) {
            let zi = mid + half * t;
            nodes.push(zi);
            weights.push(w * half * norm * (-0.5 * zi * zi).exp());
        }
    }
    crate::quad::Rule1D { nodes, weights }
}

/// Quadrature oracle for [`hermite_coefficients`]: a_q = √C·E[σ(Z)H_q(Z)]/q!
/// on a kink-split Gaussian line rule, refined until stable to 1e-10.
pub fn hermite_coefficients_quadrature(
    activation: &ActivationSpec,
    q_max: usize,
) -> Result<Vec<f64>> {
    let project = |panel_len: f64| -> (Vec<f64>, f64) {
        let rule = gaussian_line_rule(activation.kinks(), panel_len);
        let mut raw = vec![0.0; q_max + 1];
        let mut second = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let s = activation.eval(x);
            second += w * s * s;
            for (q, r) in raw.iter_mut().enumerate() {
                *r += w * s * hermite_value(q, x);
            }
        }
        (raw, second)
    };
    let mut panel = 1.0;
    let (mut raw, mut second) = project(panel);
    loop {
        panel *= 0.5;
        let (raw2, second2) = project(panel);
        let delta = raw
            .iter()
            .zip(&raw2)
            .map(|(a, b)| (a - b).abs())
            .fold((second - second2).abs(), f64::max);
        raw = raw2;
        second = second2;
        if delta < 1e-10 {
            break;
        }
        if panel < 0.1 {
            return Err(NngfError::QuadratureUnresolved { delta });
        }
    }
    if second <= 1e-300 {
        return Err(NngfError::DegenerateActivation);
    }
    let sqrt_c = second.sqrt().recip();
    let mut fact = 1.0_f64;
    let a = raw
        .iter()
        .enumerate()
        .map(|(q, &jq)| {
            if q > 0 {
                fact *= q as f64;
            }
            sqrt_c * jq / fact
        })
        .collect::<Vec<_>>();
    if a.iter().skip(1).all(|&x| x.abs() < 1e-9) {
        return Err(NngfError::DegenerateActivation);
    }
    Ok(a)
}

/// Power-series coefficients c_q = q!·a_q² of the arccosine kernel:
/// c_0 = 1/π, c_1 = 1/2, c_2 = 1/(2π) and
/// c_{2k+2} = c_{2k}·(2k-1)²/((2k+1)(2k+2)); odd coefficients above 1 vanish.
fn relu_series_coeffs(q_max: usize) -> Vec<f64> {
    let mut c = vec![0.0; q_max + 1];
    c[0] = 1.0 / PI;
    if q_max >= 1 {
        c[1] = 0.5;
    }
    if q_max >= 2 {
        c[2] = 0.5 / PI;
    }
    let mut k = 1;
    while 2 * k + 2 <= q_max {
        let kk = 2.0 * k as f64;
        c[2 * k + 2] = c[2 * k] * (kk - 1.0) * (kk - 1.0) / ((kk + 1.0) * (kk + 2.0));
        k += 1;
    }
    c
}

/// Nonnegative power-series coefficients of a kernel, with the mass beyond
/// the truncation order tracked explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSeries {
    /// c_q indexed by power q.
    pub coeffs: Vec<f64>,
    /// Truncation degree (last stored power).
    pub order: usize,
    /// 1 - Σ c_q ≥ 0.
    pub tail_mass: f64,
}

impl KernelSeries {
    /// Validate coefficients; the series must carry all but `tail_tol` of
    /// the unit mass.
    pub fn with_tail_tol(coeffs: Vec<f64>, tail_tol: f64) -> Result<Self> {
        for (q, &c) in coeffs.iter().enumerate() {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(NngfError::InvalidSeries(format!(
                    "coefficient c_{q} = {c} is negative or non-finite"
                )));
            }
        }
        let sum: f64 = coeffs.iter().sum();
        if sum > 1.0 + 1e-12 || sum < 1.0 - tail_tol {
            return Err(NngfError::InvalidSeries(format!(
                "coefficient sum {sum:.17} outside [1 - {tail_tol:.3e}, 1]"
            )));
        }
        let order = coeffs.len().saturating_sub(1);
        let tail_mass = (1.0 - sum).max(0.0);
        Ok(KernelSeries {
            coeffs,
            order,
            tail_mass,
        })
    }

    /// Validate with the default mass tolerance 1e-12.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        Self::with_tail_tol(coeffs, 1e-12)
    }
}

/// Series induced by an activation, truncated at `q_max` (c_q tracked
/// directly, so deep relu tails survive where q!·a_q² would overflow).
pub fn activation_series(activation: &ActivationSpec, q_max: usize) -> Result<KernelSeries> {
    let coeffs = match activation {
        ActivationSpec::Relu => relu_series_coeffs(q_max),
        ActivationSpec::Identity => {
            let mut c = vec![0.0; q_max.max(1) + 1];
            c[1] = 1.0;
            c
        }
        ActivationSpec::HermiteSeries { .. } => {
            let a = hermite_coefficients(activation, q_max)?;
            let mut fact = 1.0_f64;
            a.iter()
                .enumerate()
                .map(|(q, &aq)| {
                    if q > 0 {
                        fact *= q as f64;
                    }
                    fact * aq * aq
                })
                .collect()
        }
    };
    KernelSeries::with_tail_tol(coeffs, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    ReluArccos,
    /// `eval_coeffs` are the stored coefficients with `tail_mass` folded
    /// into the top one (when folding is on), so Σ = 1 exactly.
    Series {
        series: KernelSeries,
        eval_coeffs: Vec<f64>,
    },
}

/// An immutable covariance kernel with evaluators for κ, κ', κ''.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    repr: Repr,
}

/// JSON wire form of a [`Kernel`].
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
enum KernelRecord {
    #[serde(rename = "relu-arccosine")]
    ReluArccos,
    #[serde(rename = "series")]
    Series {
        coeffs: Vec<f64>,
        order: usize,
        tail_mass: f64,
    },
}

impl Kernel {
    /// The arccosine kernel κ(u) = ((π - arccos u)·u + √(1-u²))/π.
    pub fn relu() -> Kernel {
        Kernel {
            repr: Repr::ReluArccos,
        }
    }

    /// Build from a validated series. With `fold_tail` (the default entry
    /// point [`kernel_from_series`]) the tail mass is added to the top
    /// coefficient so that κ(1) = 1 exactly; with it off the evaluated
    /// series simply stops at the truncation order.
    pub fn from_series(series: KernelSeries, fold_tail: bool) -> Kernel {
        let mut eval_coeffs = series.coeffs.clone();
        if fold_tail && series.tail_mass > 0.0 {
            if let Some(top) = eval_coeffs.last_mut() {
                *top += series.tail_mass;
            }
        }
        Kernel {
            repr: Repr::Series {
                series,
                eval_coeffs,
            },
        }
    }

    /// κ(u).
    pub fn eval(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::ReluArccos => relu_kernel(u).0,
            Repr::Series { eval_coeffs, .. } => {
                if u == 1.0 {
                    return 1.0;
                }
                horner(eval_coeffs, u)
            }
        }
    }

    /// κ'(u).
    pub fn deriv(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::ReluArccos => relu_kernel(u).1,
            Repr::Series { eval_coeffs, .. } => {
                let mut acc = 0.0;
                for q in (1..eval_coeffs.len()).rev() {
                    acc = acc * u + q as f64 * eval_coeffs[q];
                }
                acc
            }
        }
    }

    /// κ''(u); infinite at u = ±1 for the arccosine kernel.
    pub fn deriv2(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::ReluArccos => 1.0 / (PI * (1.0 - u * u).sqrt()),
            Repr::Series { eval_coeffs, .. } => {
                let mut acc = 0.0;
                for q in (2..eval_coeffs.len()).rev() {
                    acc = acc * u + (q * (q - 1)) as f64 * eval_coeffs[q];
                }
                acc
            }
        }
    }

    /// κ'''(u) for series kernels (used by the C⁴ boundary expansion).
    pub fn deriv3(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::ReluArccos => u / (PI * (1.0 - u * u).powf(1.5)),
            Repr::Series { eval_coeffs, .. } => {
                let mut acc = 0.0;
                for q in (3..eval_coeffs.len()).rev() {
                    acc = acc * u + (q * (q - 1) * (q - 2)) as f64 * eval_coeffs[q];
                }
                acc
            }
        }
    }

    /// κ'(1) = Σ q·c_q, the regime discriminant.
    pub fn kprime1(&self) -> f64 {
        self.deriv(1.0)
    }

    /// κ(0), the fixed-point seed (b = 0 iff κ(0) = 0).
    pub fn at_zero(&self) -> f64 {
        match &self.repr {
            Repr::ReluArccos => 1.0 / PI,
            Repr::Series { eval_coeffs, .. } => eval_coeffs.first().copied().unwrap_or(0.0),
        }
    }

    /// The gap map g ↦ 1 - κ(1-g), evaluated without cancellation for
    /// small g. Defined for g ∈ [0,2].
    pub fn gap_map(&self, g: f64) -> f64 {
        if g <= 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::ReluArccos => relu_gap_map(g),
            Repr::Series { eval_coeffs, .. } => {
                if g > 0.5 {
                    return 1.0 - self.eval(1.0 - g);
                }
                // 1 - Σ c_q(1-g)^q = Σ c_q·(1-(1-g)^q) since Σ c_q = 1
                let lg = (-g).ln_1p();
                eval_coeffs
                    .iter()
                    .enumerate()
                    .map(|(q, &c)| {
                        if c == 0.0 {
                            0.0
                        } else {
                            -c * (q as f64 * lg).exp_m1()
                        }
                    })
                    .sum()
            }
        }
    }

    /// κ_L(u) by L-fold composition, with a range guard on intermediates.
    pub fn iterate(&self, depth: usize, u: f64) -> Result<f64> {
        let mut v = u;
        for step in 0..depth {
            let excess = v.abs() - 1.0;
            if excess > 1e-12 {
                return Err(NngfError::IterateOutOfRange {
                    depth: step,
                    excess,
                });
            }
            v = self.eval(v.clamp(-1.0, 1.0));
        }
        Ok(v)
    }

    /// Gap of the L-th iterate, 1 - κ_L(1-g), by iterating the gap map.
    /// Exact to relative rounding even when κ_L(u) is within 1e-300 of 1.
    pub fn iterate_gap(&self, depth: usize, g: f64) -> f64 {
        let mut g = g;
        for _ in 0..depth {
            g = self.gap_map(g);
        }
        g
    }

    /// Batched composition over a node vector; output is independent of how
    /// nodes are partitioned across workers.
    pub fn iterate_batch(&self, depth: usize, nodes: &[f64]) -> Result<Vec<f64>> {
        let out = crate::par::map_slice(nodes, |&u| self.iterate(depth, u));
        out.into_iter().collect()
    }

    /// True when all even-power coefficients vanish (κ odd); the arccosine
    /// kernel has both parities present.
    pub fn is_odd(&self) -> bool {
        match &self.repr {
            Repr::ReluArccos => false,
            Repr::Series { eval_coeffs, .. } => eval_coeffs
                .iter()
                .step_by(2)
                .all(|&c| c == 0.0),
        }
    }

    /// Series coefficients when this kernel carries them.
    pub fn series(&self) -> Option<&KernelSeries> {
        match &self.repr {
            Repr::ReluArccos => None,
            Repr::Series { series, .. } => Some(series),
        }
    }

    /// Coefficients actually used for evaluation (tail folded in).
    pub fn eval_coeffs(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::ReluArccos => None,
            Repr::Series { eval_coeffs, .. } => Some(eval_coeffs),
        }
    }

    pub fn to_json(&self) -> String {
        let rec = match &self.repr {
            Repr::ReluArccos => KernelRecord::ReluArccos,
            Repr::Series { series, .. } => KernelRecord::Series {
                coeffs: series.coeffs.clone(),
                order: series.order,
                tail_mass: series.tail_mass,
            },
        };
        serde_json::to_string(&rec).expect("kernel record serializes")
    }

    pub fn from_json(s: &str) -> Result<Kernel> {
        let rec: KernelRecord = serde_json::from_str(s)?;
        Ok(match rec {
            KernelRecord::ReluArccos => Kernel::relu(),
            KernelRecord::Series { coeffs, .. } => {
                Kernel::from_series(KernelSeries::with_tail_tol(coeffs, 1.0)?, true)
            }
        })
    }
}

fn horner(coeffs: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * u + c;
    }
    acc
}

/// Build a kernel from a validated series, folding the tail mass into the
/// top coefficient.
pub fn kernel_from_series(series: KernelSeries) -> Kernel {
    Kernel::from_series(series, true)
}

/// The arccosine kernel and its derivative:
/// κ(u) = ((π - arccos u)·u + √(1-u²))/π, κ'(u) = (π - arccos u)/π.
pub fn relu_kernel(u: f64) -> (f64, f64) {
    let u = u.clamp(-1.0, 1.0);
    if u == 1.0 {
        return (1.0, 1.0);
    }
    let theta = u.acos();
    let k = ((PI - theta) * u + (1.0 - u * u).sqrt()) / PI;
    (k, (PI - theta) / PI)
}

/// Gap map of the arccosine kernel: with θ = arccos(1-g),
/// 1 - κ(1-g) = (g·(π-θ) + (θ - sin θ))/π. Both θ and θ - sin θ switch to
/// series for small g, which keeps full relative precision as g → 0.
fn relu_gap_map(g: f64) -> f64 {
    let theta = if g < 1e-4 {
        let s = (2.0 * g).sqrt();
        s * (1.0 + g / 12.0 + 3.0 * g * g / 160.0 + 5.0 * g * g * g / 896.0)
    } else {
        (1.0 - g).acos()
    };
    let t2 = theta * theta;
    let theta_minus_sin = if theta < 1e-2 {
        theta * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)))
    } else {
        theta - theta.sin()
    };
    (g * (PI - theta) + theta_minus_sin) / PI
}

/// L-fold composition with range checks (free-function form of
/// [`Kernel::iterate`]).
pub fn iterate_kernel(kernel: &Kernel, depth: usize, u: f64) -> Result<f64> {
    kernel.iterate(depth, u)
}

/// Oracle for the kernel value: C·E[σ(Z₁)·σ(u·Z₁ + √(1-u²)·Z₂)] on a
/// tensor grid of kink-split Gaussian line rules (the inner axis gets the
/// activation kinks mapped through z₂ = (x - u·z₁)/√(1-u²)), refined until
/// the value is stable to 1e-10 and flagged if it cannot get below 1e-8.
pub fn kernel_via_double_integral(activation: &ActivationSpec, u: f64) -> Result<f64> {
    let root = (1.0 - u * u).max(0.0).sqrt();
    let eval = |panel_len: f64| -> f64 {
        let outer = gaussian_line_rule(activation.kinks(), panel_len);
        let mut num = 0.0;
        let mut den = 0.0;
        for (&z1, &w1) in outer.nodes.iter().zip(&outer.weights) {
            let s1 = activation.eval(z1);
            den += w1 * s1 * s1;
            if s1 == 0.0 {
                continue;
            }
            if root == 0.0 {
                num += w1 * s1 * activation.eval(u * z1);
                continue;
            }
            let inner_kinks: Vec<f64> = activation
                .kinks()
                .iter()
                .map(|&x| (x - u * z1) / root)
                .collect();
            let inner = gaussian_line_rule(&inner_kinks, panel_len);
            let mut acc = 0.0;
            for (&z2, &w2) in inner.nodes.iter().zip(&inner.weights) {
                acc += w2 * activation.eval(u * z1 + root * z2);
            }
            num += w1 * s1 * acc;
        }
        num / den
    };
    let mut panel = 1.0;
    let mut v = eval(panel);
    loop {
        panel *= 0.5;
        let v2 = eval(panel);
        let delta = (v - v2).abs();
        v = v2;
        if delta < 1e-10 {
            return Ok(v);
        }
        if panel < 0.2 {
            if delta > 1e-8 {
                return Err(NngfError::QuadratureUnresolved { delta });
            }
            return Ok(v);
        }
    }
}

/// Fit of the boundary correction κ'(1)·(1-u) - (1-κ(u)) ≈ c·(1-u)^γ.
#[derive(Debug, Clone)]
pub struct BoundaryFit {
    pub gamma: f64,
    pub c: f64,
    pub r_squared: f64,
    /// Set when the correction is below rounding noise (e.g. κ(u) = u).
    pub degenerate: bool,
}

/// Fit the leading boundary-correction exponent by log–log regression of
/// κ'(1)·g - gap(g) over 40 log-spaced gaps g ∈ [1e-6, 1e-1]. Below 1e-6
/// the subtraction runs out of double precision.
pub fn verify_boundary_expansion(kernel: &Kernel) -> Result<BoundaryFit> {
    let kp1 = kernel.kprime1();
    if !kp1.is_finite() {
        return Err(NngfError::UnsupportedKernel(
            "kappa'(1) is not finite".into(),
        ));
    }
    let n = 40;
    let (lo, hi) = (1e-6_f64, 1e-1_f64);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut max_rel = 0.0_f64;
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let g = lo * (hi / lo).powf(t);
        let resid = kp1 * g - kernel.gap_map(g);
        max_rel = max_rel.max(resid.abs() / (kp1 * g));
        if resid > 0.0 {
            xs.push(g.ln());
            ys.push(resid.ln());
        }
    }
    if max_rel < 1e-9 || xs.len() < n / 2 {
        return Ok(BoundaryFit {
            gamma: f64::NAN,
            c: 0.0,
            r_squared: f64::NAN,
            degenerate: true,
        });
    }
    let (slope, intercept, r2) = ols(&xs, &ys);
    Ok(BoundaryFit {
        gamma: slope,
        c: intercept.exp(),
        r_squared: r2,
        degenerate: false,
    })
}

/// Simple least squares y = a + b·x, returning (b, a, R²).
pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (b, a, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn series_kernel(pairs: &[(usize, f64)]) -> Kernel {
        let order = pairs.iter().map(|&(q, _)| q).max().unwrap();
        let mut c = vec![0.0; order + 1];
        for &(q, v) in pairs {
            c[q] = v;
        }
        kernel_from_series(KernelSeries::new(c).unwrap())
    }

    #[test]
    fn identity_coefficients() {
        let a = hermite_coefficients(&ActivationSpec::Identity, 4).unwrap();
        assert_eq!(a, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn relu_first_coefficient_matches_derivative_at_zero() {
        // 1!·a_1² must equal κ'(0) = (π - arccos 0)/π = 1/2
        let a = hermite_coefficients(&ActivationSpec::Relu, 4).unwrap();
        assert_abs_diff_eq!(a[1] * a[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(relu_kernel(0.0).1, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn pure_h2_activation_gives_square_kernel() {
        let act = ActivationSpec::HermiteSeries {
            coeffs: vec![0.0, 0.0, 1.0 / 2.0_f64.sqrt()],
        };
        let a = hermite_coefficients(&act, 4).unwrap();
        // c_2 = 2!·a_2² = 1
        assert_abs_diff_eq!(2.0 * a[2] * a[2], 1.0, epsilon = 1e-14);
        assert_eq!(a[1], 0.0);
    }

    #[test]
    fn relu_coefficients_match_quadrature_oracle() {
        let exact = hermite_coefficients(&ActivationSpec::Relu, 12).unwrap();
        let quad = hermite_coefficients_quadrature(&ActivationSpec::Relu, 12).unwrap();
        for q in 0..=12 {
            assert_abs_diff_eq!(exact[q], quad[q], epsilon = 2e-6);
        }
    }

    #[test]
    fn series_evaluates_by_direct_arithmetic() {
        let k = series_kernel(&[(1, 0.9), (10, 0.1)]);
        assert_abs_diff_eq!(k.eval(0.5), 0.45009765625, epsilon = 1e-16);
        assert_eq!(k.eval(1.0), 1.0);
    }

    #[test]
    fn linear_series_has_unit_derivative() {
        let k = series_kernel(&[(1, 1.0)]);
        for u in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert_eq!(k.deriv(u), 1.0);
        }
    }

    #[test]
    fn negative_coefficient_rejected() {
        let err = KernelSeries::new(vec![0.5, -0.1, 0.6]).unwrap_err();
        assert!(matches!(err, NngfError::InvalidSeries(_)));
    }

    #[test]
    fn relu_closed_form_endpoints() {
        assert_eq!(relu_kernel(1.0).0, 1.0);
        assert_abs_diff_eq!(relu_kernel(0.0).0, 1.0 / PI, epsilon = 1e-16);
        assert_abs_diff_eq!(relu_kernel(-1.0).0, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn iterate_square_kernel_is_power_tower() {
        let k = series_kernel(&[(2, 1.0)]);
        assert_abs_diff_eq!(
            k.iterate(3, 0.9).unwrap(),
            0.9_f64.powi(8),
            epsilon = 1e-15
        );
    }

    #[test]
    fn one_is_fixed_for_any_depth() {
        for k in [Kernel::relu(), series_kernel(&[(1, 0.9), (10, 0.1)])] {
            assert_eq!(k.iterate(57, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn relu_second_iterate_at_zero() {
        let k = Kernel::relu();
        let expect = relu_kernel(1.0 / PI).0;
        assert_abs_diff_eq!(k.iterate(2, 0.0).unwrap(), expect, epsilon = 1e-15);
        // ((π-θ)u + sin θ)/π at u = 1/π, θ = arccos(1/π) ≈ 1.24685
        assert_abs_diff_eq!(expect, 0.49373, epsilon = 5e-6);
    }

    #[test]
    fn double_integral_identity_is_linear() {
        let v = kernel_via_double_integral(&ActivationSpec::Identity, 0.3).unwrap();
        assert_abs_diff_eq!(v, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn double_integral_matches_relu_closed_form() {
        let v0 = kernel_via_double_integral(&ActivationSpec::Relu, 0.0).unwrap();
        assert_abs_diff_eq!(v0, 1.0 / PI, epsilon = 1e-6);
        let v7 = kernel_via_double_integral(&ActivationSpec::Relu, 0.7).unwrap();
        assert_abs_diff_eq!(v7, relu_kernel(0.7).0, epsilon = 1e-6);
    }

    #[test]
    fn relu_boundary_expansion() {
        let fit = verify_boundary_expansion(&Kernel::relu()).unwrap();
        assert!(!fit.degenerate);
        assert_abs_diff_eq!(fit.gamma, 1.5, epsilon = 0.01);
        let c1 = 2.0 * 2.0_f64.sqrt() / (3.0 * PI);
        assert!((fit.c - c1).abs() / c1 < 0.02, "c = {}", fit.c);
        assert!(fit.r_squared > 0.999);
    }

    #[test]
    fn quadratic_series_boundary_expansion() {
        // κ(u) = (u + u²)/2: 1-κ = (3/2)(1-u) - (1/2)(1-u)²
        let k = series_kernel(&[(1, 0.5), (2, 0.5)]);
        let fit = verify_boundary_expansion(&k).unwrap();
        assert_abs_diff_eq!(fit.gamma, 2.0, epsilon = 1e-3);
        assert_abs_diff_eq!(fit.c, 0.5, epsilon = 1e-3);
        assert!(fit.r_squared > 0.999);
    }

    #[test]
    fn linear_kernel_boundary_fit_is_degenerate() {
        let fit = verify_boundary_expansion(&series_kernel(&[(1, 1.0)])).unwrap();
        assert!(fit.degenerate);
    }

    #[test]
    fn gap_map_matches_direct_eval_at_moderate_gap() {
        for k in [Kernel::relu(), series_kernel(&[(1, 0.9), (10, 0.1)])] {
            for g in [1e-3, 1e-2, 0.1, 0.4, 0.9, 1.5] {
                let direct = 1.0 - k.eval(1.0 - g);
                assert_abs_diff_eq!(k.gap_map(g), direct, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gap_iteration_matches_plain_iteration() {
        let k = Kernel::relu();
        for depth in [1, 5, 20] {
            let g0 = 0.25;
            let plain = 1.0 - k.iterate(depth, 1.0 - g0).unwrap();
            assert_abs_diff_eq!(k.iterate_gap(depth, g0), plain, epsilon = 1e-12);
        }
    }

    #[test]
    fn relu_series_tail_decays_like_q_to_three_halves() {
        let s = activation_series(&ActivationSpec::Relu, 4096).unwrap();
        // tail(Q) ≈ 0.085·Q^{-3/2}
        let predicted = 0.085 * 4096.0_f64.powf(-1.5);
        assert!((s.tail_mass - predicted).abs() / predicted < 0.05);
    }

    #[test]
    fn relu_series_tracks_closed_form() {
        let k = kernel_from_series(activation_series(&ActivationSpec::Relu, 4096).unwrap());
        for i in 0..=50 {
            let u = -1.0 + 2.0 * i as f64 / 50.0;
            assert_abs_diff_eq!(k.eval(u), relu_kernel(u).0, epsilon = 1e-6);
        }
    }

    #[test]
    fn kernel_json_round_trip() {
        let k = series_kernel(&[(1, 0.9), (10, 0.0999999999998)]);
        let k2 = Kernel::from_json(&k.to_json()).unwrap();
        assert_eq!(k.series(), k2.series());
        let r = Kernel::relu();
        assert_eq!(Kernel::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn batch_iteration_matches_scalar() {
        let k = Kernel::relu();
        let nodes: Vec<f64> = (0..64).map(|i| -1.0 + 2.0 * i as f64 / 63.0).collect();
        let batch = k.iterate_batch(7, &nodes).unwrap();
        for (&u, &b) in nodes.iter().zip(&batch) {
            assert_eq!(b, k.iterate(7, u).unwrap());
        }
    }

    fn arb_series() -> impl Strategy<Value = Kernel> {
        proptest::collection::vec(0.0..1.0f64, 2..9).prop_map(|mut raw| {
            raw[1] += 0.05; // keep some linear mass so the kernel is non-trivial
            let sum: f64 = raw.iter().sum();
            let coeffs: Vec<f64> = raw.iter().map(|c| c / sum).collect();
            kernel_from_series(KernelSeries::with_tail_tol(coeffs, 1e-9).unwrap())
        })
    }

    proptest! {
        #[test]
        fn series_values_stay_inside_unit_band(k in arb_series(), u in -0.999..0.999f64) {
            let v = k.eval(u);
            prop_assert!(v.abs() <= k.eval(u.abs()) + 1e-14);
            prop_assert!(k.eval(u.abs()) < 1.0);
        }

        #[test]
        fn derivative_monotone_and_dominated(k in arb_series(), u in -1.0..1.0f64) {
            let kp1 = k.kprime1();
            prop_assert!(k.deriv(u) <= kp1 + 1e-12);
            if u >= 0.0 {
                prop_assert!(k.deriv(u * 0.5) <= k.deriv(u) + 1e-12);
            }
        }

        #[test]
        fn composition_is_a_semigroup(k in arb_series(), u in -1.0..1.0f64,
                                      l1 in 1usize..6, l2 in 1usize..6) {
            let whole = k.iterate(l1 + l2, u).unwrap();
            let split = k.iterate(l1, k.iterate(l2, u).unwrap()).unwrap();
            prop_assert!((whole - split).abs() < 1e-12);
        }
    }
}
