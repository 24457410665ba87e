//! Legendre polynomials and (unnormalized) associated Legendre functions for
//! the perturbed initial-data families.

/// P_ℓ(x) by the three-term recurrence.
pub fn legendre_p(l: usize, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        _ => {
            let mut pm = 1.0;
            let mut p = x;
            for k in 1..l {
                let next = ((2 * k + 1) as f64 * x * p - k as f64 * pm) / (k + 1) as f64;
                pm = p;
                p = next;
            }
            p
        }
    }
}

/// Unnormalized associated Legendre P_ℓ^m(x), m ≥ 0, without the
/// Condon–Shortley phase.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    debug_assert!(m <= l);
    if m == 0 {
        return legendre_p(l, x);
    }
    // P_m^m = (2m-1)!! (1-x²)^{m/2}
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    if l == m {
        return pmm;
    }
    // P_{m+1}^m = (2m+1) x P_m^m
    let mut p_lo = pmm;
    let mut p_hi = (2 * m + 1) as f64 * x * pmm;
    if l == m + 1 {
        return p_hi;
    }
    for k in (m + 1)..l {
        let next =
            ((2 * k + 1) as f64 * x * p_hi - (k + m) as f64 * p_lo) / (k - m + 1) as f64;
        p_lo = p_hi;
        p_hi = next;
    }
    p_hi
}

/// Real surface harmonic on S²: cos(mλ) branch for m ≥ 0, sin(|m|λ) for m < 0.
pub fn real_harmonic(l: usize, m: i32, theta: f64, lambda: f64) -> f64 {
    let mm = m.unsigned_abs() as usize;
    let p = assoc_legendre(l, mm, theta.cos());
    if m >= 0 {
        p * (mm as f64 * lambda).cos()
    } else {
        p * (mm as f64 * lambda).sin()
    }
}
