//! Cyclic Jacobi eigenvalue iteration for small symmetric matrices.
//!
//! Used only by the concavity sampler, which perturbs a diagonal matrix by a
//! full symmetric direction; dimensions never exceed [`MAX_DIM`](super::sigma::MAX_DIM).

use super::sigma::MAX_DIM;

/// Eigenvalues of the symmetric n×n matrix `a` (content beyond n ignored).
pub fn sym_eigenvalues(a: &[[f64; MAX_DIM]; MAX_DIM], n: usize) -> [f64; MAX_DIM] {
    let mut m = *a;
    // symmetrize defensively; callers pass symmetric data
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = avg;
            m[j][i] = avg;
        }
    }
    let scale: f64 = (0..n).map(|i| (0..n).map(|j| m[i][j].abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    if scale == 0.0 {
        return [0.0; MAX_DIM];
    }
    let tol = 1e-15 * scale;
    for _sweep in 0..64 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[i][j].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() <= tol * 1e-2 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig = [0.0; MAX_DIM];
    for i in 0..n {
        eig[i] = m[i][i];
    }
    eig[..n].sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}
