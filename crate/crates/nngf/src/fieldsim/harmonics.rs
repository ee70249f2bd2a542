//! Real spherical harmonics on S² via normalized associated Legendre
//! recurrences, in the orthonormality convention ∫Y_{ℓm}² dx = 1.

/// Normalized associated Legendre values P̄_ℓ^m(cos θ) for all ℓ ≤ l_max
/// at fixed order m, with √((2ℓ+1)(ℓ-m)!/(4π(ℓ+m)!)) folded in so the
/// resulting harmonics are orthonormal. Returns values for ℓ = m..=l_max.
fn normalized_assoc_legendre(l_max: usize, m: usize, cos_t: f64, sin_t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(l_max + 1 - m);
    // P̄_m^m by the product formula (Condon–Shortley phase included; it
    // cancels in every quadratic quantity we form)
    let mut pmm = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();
    for k in 1..=m {
        pmm *= -(((2 * k + 1) as f64) / ((2 * k) as f64)).sqrt() * sin_t;
    }
    out.push(pmm);
    if l_max == m {
        return out;
    }
    let mut p_prev = pmm;
    let mut p = ((2 * m + 3) as f64).sqrt() * cos_t * pmm;
    out.push(p);
    for l in (m + 2)..=l_max {
        let lf = l as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
            .sqrt();
        let next = a * (cos_t * p - b * p_prev);
        p_prev = p;
        p = next;
        out.push(p);
    }
    out
}

/// All real harmonics Y_{ℓm}(x) for ℓ ≤ l_max at a unit vector x,
/// flattened with layout index = ℓ² + (m + ℓ), m = -ℓ..=ℓ.
pub fn real_harmonics_row(l_max: usize, point: &[f64]) -> Vec<f64> {
    let cos_t = point[2].clamp(-1.0, 1.0);
    let sin_t = (point[0] * point[0] + point[1] * point[1]).sqrt();
    let phi = point[1].atan2(point[0]);
    let mut out = vec![0.0; (l_max + 1) * (l_max + 1)];
    let sqrt2 = std::f64::consts::SQRT_2;
    for m in 0..=l_max {
        let col = normalized_assoc_legendre(l_max, m, cos_t, sin_t);
        let (cm, sm) = ((m as f64 * phi).cos(), (m as f64 * phi).sin());
        for (k, &p) in col.iter().enumerate() {
            let l = m + k;
            if m == 0 {
                out[l * l + l] = p;
            } else {
                out[l * l + l + m] = sqrt2 * p * cm;
                out[l * l + l - m] = sqrt2 * p * sm;
            }
        }
    }
    out
}

pub fn harmonic_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}
