//! Gaussian quadrature rules (Golub–Welsch on the Jacobi matrix).
//!
//! Nodes come from a QL-with-implicit-shifts eigensolver on the symmetric
//! tridiagonal recurrence matrix; weights from the Christoffel function,
//! with rescaling so that large Hermite rules do not overflow.

/// A one-dimensional rule; weights sum to the total mass of the weight
/// function (`mu0`).
#[derive(Debug, Clone)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix, ascending.
/// `diag` has length n, `off` length n (off[n-1] ignored).
fn tridiag_eigenvalues(diag: &mut [f64], off: &mut [f64]) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            // find a small off-diagonal element
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 50, "tridiagonal QL did not converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0_f64;
            for i in (l..m).rev() {
                let mut f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                f = 0.0;
                let _ = f;
            }
            if p == 0.0 && m > l {
                // the inner break fired; retry
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    diag.sort_by(|a, b| a.partial_cmp(b).unwrap());
}

/// Gauss rule for an even weight with monic recurrence
/// p_{k+1} = x p_k - b_k p_{k-1}; `mu0` is the weight's total mass.
fn gauss_from_recurrence(n: usize, b: &[f64], mu0: f64) -> Rule1D {
    assert!(n >= 1 && b.len() >= n);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for k in 1..n {
        off[k - 1] = b[k].sqrt();
    }
    tridiag_eigenvalues(&mut diag, &mut off);
    let nodes = diag;
    let sq: Vec<f64> = b.iter().map(|&x| x.sqrt()).collect();
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            // Christoffel: w = mu0 / sum_k p~_k(x)^2 with orthonormal p~,
            // rescaling to dodge overflow on wide Hermite rules.
            let mut pm = 1.0_f64; // p~_0 (unnormalized; mu0 folded in at the end)
            let mut p = x / sq[1];
            let mut sum = pm * pm + p * p;
            let mut log_scale = 0.0_f64;
            for k in 1..n - 1 {
                let next = (x * p - sq[k] * pm) / sq[k + 1];
                pm = p;
                p = next;
                sum += p * p;
                if p.abs() > 1e150 {
                    pm /= 1e150;
                    p /= 1e150;
                    sum /= 1e300;
                    log_scale += 300.0 * std::f64::consts::LN_10;
                }
            }
            let lw = -(sum.ln() + log_scale);
            mu0 * lw.exp()
        })
        .collect();
    Rule1D { nodes, weights }
}

/// Gauss rule for the weight (1-x^2)^alpha on [-1,1], alpha > -1.
/// Exact for polynomials of degree <= 2n-1. Weights sum to
/// mu0 = sqrt(pi) Gamma(alpha+1) / Gamma(alpha+3/2).
pub fn gauss_jacobi_sym(n: usize, alpha: f64) -> Rule1D {
    let lam = alpha + 0.5; // Gegenbauer parameter
    let b: Vec<f64> = (0..n.max(2))
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                let k = k as f64;
                k * (k + 2.0 * lam - 1.0) / (4.0 * (k + lam) * (k + lam - 1.0))
            }
        })
        .collect();
    let mu0 = std::f64::consts::PI.sqrt() * statrs::function::gamma::gamma(alpha + 1.0)
        / statrs::function::gamma::gamma(alpha + 1.5);
    gauss_from_recurrence(n, &b, mu0)
}

/// Gauss–Legendre on [-1,1] (weights sum to 2).
pub fn gauss_legendre(n: usize) -> Rule1D {
    gauss_jacobi_sym(n, 0.0)
}

/// Gauss–Hermite for the standard Gaussian weight phi(x) dx (weights sum to 1).
pub fn gauss_hermite_prob(n: usize) -> Rule1D {
    let b: Vec<f64> = (0..n.max(2)).map(|k| k as f64).collect();
    gauss_from_recurrence(n, &b, 1.0)
}
