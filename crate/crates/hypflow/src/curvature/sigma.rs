//! Elementary symmetric polynomials σ_k and binomials.
//!
//! σ_k is evaluated through Newton's identities on power sums rather than the
//! naive sum over k-subsets, which cancels catastrophically near the cone
//! boundary for moderate dimensions.

pub const MAX_DIM: usize = 8;

/// All elementary symmetric polynomials e_0..e_m of `kappa`, m = kappa.len().
pub fn elementary_all(kappa: &[f64]) -> [f64; MAX_DIM + 1] {
    let m = kappa.len();
    debug_assert!(m <= MAX_DIM);
    // power sums p[i] = Σ κ_j^i
    let mut p = [0.0_f64; MAX_DIM + 1];
    for &k in kappa {
        let mut kp = k;
        for pi in p.iter_mut().take(m + 1).skip(1) {
            *pi += kp;
            kp *= k;
        }
    }
    // k e_k = Σ_{i=1..k} (-1)^{i-1} e_{k-i} p_i
    let mut e = [0.0_f64; MAX_DIM + 1];
    e[0] = 1.0;
    for k in 1..=m {
        let mut acc = 0.0;
        let mut sign = 1.0;
        for i in 1..=k {
            acc += sign * e[k - i] * p[i];
            sign = -sign;
        }
        e[k] = acc / k as f64;
    }
    e
}

/// σ_k of `kappa` with entry `skip` removed.
pub fn sigma_k_without(kappa: &[f64], k: usize, skip: usize) -> f64 {
    let mut reduced = [0.0_f64; MAX_DIM];
    let mut m = 0;
    for (i, &v) in kappa.iter().enumerate() {
        if i != skip {
            reduced[m] = v;
            m += 1;
        }
    }
    elementary_all(&reduced[..m])[k]
}

/// Binomial coefficient as f64 (small arguments only).
pub fn binomial(n: usize, k: usize) -> f64 {
    let mut num = 1.0_f64;
    let mut den = 1.0_f64;
    for i in 0..k.min(n - k) {
        num *= (n - i) as f64;
        den *= (i + 1) as f64;
    }
    num / den
}
