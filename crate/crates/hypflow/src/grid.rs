//! Discrete differential calculus on the round sphere S^n.
//!
//! Two layouts are supported:
//!
//! * `Axisym` — a 1D profile in the polar angle θ ∈ [0, π] for axisymmetric
//!   fields on S^n, any 2 ≤ n ≤ 8. The S^{n-1} factor enters downstream only
//!   through the multiplicity n−1 of the angular direction.
//! * `LatLong` — a full 2D latitude/longitude grid for n = 2, with θ rows
//!   staggered off the poles and cross-pole ghost copies (row reflection plus
//!   a λ shift of half a period).
//!
//! All operators use 4th-order centered stencils. Axisym endpoints close the
//! stencil with pole-parity reflection ghosts (a smooth axisymmetric field on
//! the sphere is even in θ at both poles); lat-long grids reflect across the
//! poles with a half-period λ shift. One-sided endpoint stencils were tried
//! first and make the semi-discrete flow unstable at the poles, where they
//! couple to the cot θ angular term. Stencils are applied in the form
//! Σ c_j (f_j − f_0) so constant fields differentiate to exactly zero.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Grid layout tag plus sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLayout {
    /// Axisymmetric profile on S^n with `nodes` points in θ, endpoints at the poles.
    Axisym { n: usize, nodes: usize },
    /// Full lat-long grid on S^2, θ staggered: θ_j = (j + 1/2) π / n_theta.
    LatLong { n_theta: usize, n_lambda: usize },
}

/// A discretization of S^n carrying the round metric σ.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub layout: GridLayout,
    /// θ of each row (axisym: each node).
    theta: Vec<f64>,
    sin_t: Vec<f64>,
    cos_t: Vec<f64>,
    /// cot θ per row; poles hold 0 (never read there).
    cot_t: Vec<f64>,
    h_theta: f64,
    h_lambda: f64,
}

/// σ-gradient of a scalar field: covariant components, and |Df|²_σ.
///
/// Raised components are σ^{θθ} f_θ = f_θ and σ^{λλ} f_λ = f_λ / sin²θ.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub d_theta: Vec<f64>,
    /// Empty for axisym grids (axisymmetric fields have no λ-dependence).
    pub d_lambda: Vec<f64>,
    pub norm_sq: Vec<f64>,
}

/// σ-covariant Hessian f_{;ij} = ∂_i ∂_j f − Γ^k_{ij} ∂_k f.
///
/// For axisym grids the two distinct eigen-direction values are stored:
/// `tt` = f″(θ) and `angular` = cot θ · f′(θ), with the pole limit
/// cot θ f′ → f″ substituted at the pole nodes themselves.
#[derive(Debug, Clone)]
pub struct Hessian {
    pub tt: Vec<f64>,
    /// Axisym only.
    pub angular: Vec<f64>,
    /// LatLong only: covariant θλ component.
    pub tl: Vec<f64>,
    /// LatLong only: covariant λλ component.
    pub ll: Vec<f64>,
}

// 4th-order centered stencils, tabulated as (offset, coefficient) with the
// implicit center coefficient folded away by the Σ c (f_j - f_0) form.
const D1_CENTER: [(isize, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
const D2_CENTER: [(isize, f64); 4] = [(-2, -1.0), (-1, 16.0), (1, 16.0), (2, -1.0)];

impl SphereGrid {
    /// Axisymmetric grid: θ_j = j π/(nodes−1), j = 0..nodes−1.
    pub fn axisym(n: usize, nodes: usize) -> Result<Self> {
        let mut violations = Vec::new();
        if !(2..=8).contains(&n) {
            violations.push(format!("dimension n must be in 2..=8, got {n}"));
        }
        if nodes < 16 {
            violations.push(format!("axisym grid needs at least 16 nodes, got {nodes}"));
        }
        if !violations.is_empty() {
            return Err(Error::Config(violations));
        }
        let h = PI / (nodes - 1) as f64;
        let theta: Vec<f64> = (0..nodes).map(|j| j as f64 * h).collect();
        Ok(Self::from_rows(GridLayout::Axisym { n, nodes }, theta, h, 0.0))
    }

    /// Staggered lat-long grid on S^2: θ_j = (j+1/2) π/n_theta, λ_k = 2πk/n_lambda.
    pub fn lat_long(n_theta: usize, n_lambda: usize) -> Result<Self> {
        let mut violations = Vec::new();
        if n_theta < 8 {
            violations.push(format!("lat-long grid needs n_theta >= 8, got {n_theta}"));
        }
        if n_lambda < 8 {
            violations.push(format!("lat-long grid needs n_lambda >= 8, got {n_lambda}"));
        }
        if n_lambda % 2 != 0 {
            violations.push(format!(
                "n_lambda must be even for cross-pole ghost copies, got {n_lambda}"
            ));
        }
        if !violations.is_empty() {
            return Err(Error::Config(violations));
        }
        let h_t = PI / n_theta as f64;
        let h_l = 2.0 * PI / n_lambda as f64;
        let theta: Vec<f64> = (0..n_theta).map(|j| (j as f64 + 0.5) * h_t).collect();
        Ok(Self::from_rows(GridLayout::LatLong { n_theta, n_lambda }, theta, h_t, h_l))
    }

    fn from_rows(layout: GridLayout, theta: Vec<f64>, h_theta: f64, h_lambda: f64) -> Self {
        let sin_t: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let cos_t: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let cot_t: Vec<f64> = theta
            .iter()
            .zip(sin_t.iter())
            .map(|(t, s)| if s.abs() < 1e-14 { 0.0 } else { t.cos() / s })
            .collect();
        Self { layout, theta, sin_t, cos_t, cot_t, h_theta, h_lambda }
    }

    /// Number of principal curvature directions n of the sphere S^n.
    pub fn dim(&self) -> usize {
        match self.layout {
            GridLayout::Axisym { n, .. } => n,
            GridLayout::LatLong { .. } => 2,
        }
    }

    pub fn node_count(&self) -> usize {
        match self.layout {
            GridLayout::Axisym { nodes, .. } => nodes,
            GridLayout::LatLong { n_theta, n_lambda } => n_theta * n_lambda,
        }
    }

    /// θ-spacing h.
    pub fn spacing(&self) -> f64 {
        self.h_theta
    }

    pub fn lambda_spacing(&self) -> f64 {
        self.h_lambda
    }

    pub fn theta_rows(&self) -> &[f64] {
        &self.theta
    }

    /// (θ, λ) of a node; λ = 0 on axisym grids.
    pub fn node_coords(&self, idx: usize) -> (f64, f64) {
        match self.layout {
            GridLayout::Axisym { .. } => (self.theta[idx], 0.0),
            GridLayout::LatLong { n_lambda, .. } => {
                (self.theta[idx / n_lambda], (idx % n_lambda) as f64 * self.h_lambda)
            }
        }
    }

    /// Index of the axisym node sitting exactly at θ (if any).
    pub fn axisym_node_at(&self, theta: f64) -> Option<usize> {
        if let GridLayout::Axisym { nodes, .. } = self.layout {
            let j = (theta / self.h_theta).round() as usize;
            if j < nodes && (self.theta[j] - theta).abs() < 1e-9 {
                return Some(j);
            }
        }
        None
    }

    /// Evaluate a function of (θ, λ) on every node.
    pub fn fill(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.node_count())
            .map(|i| {
                let (t, l) = self.node_coords(i);
                f(t, l)
            })
            .collect()
    }

    fn check_field(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.node_count() {
            return Err(Error::config(format!(
                "field has {} values, grid has {} nodes",
                f.len(),
                self.node_count()
            )));
        }
        Ok(())
    }

    /// Covariant σ-gradient and |Df|²_σ.
    pub fn sigma_gradient(&self, f: &[f64]) -> Result<Gradient> {
        self.check_field(f)?;
        match self.layout {
            GridLayout::Axisym { nodes, .. } => {
                let mut d_theta = vec![0.0; nodes];
                for (j, d) in d_theta.iter_mut().enumerate() {
                    *d = self.axi_d1(f, j);
                }
                let norm_sq = d_theta.iter().map(|d| d * d).collect();
                Ok(Gradient { d_theta, d_lambda: Vec::new(), norm_sq })
            }
            GridLayout::LatLong { n_theta, n_lambda } => {
                let count = n_theta * n_lambda;
                let mut d_theta = vec![0.0; count];
                let mut d_lambda = vec![0.0; count];
                let mut norm_sq = vec![0.0; count];
                for j in 0..n_theta {
                    let s2 = self.sin_t[j] * self.sin_t[j];
                    for k in 0..n_lambda {
                        let idx = j * n_lambda + k;
                        let dt = self.ll_d1_theta(f, j, k);
                        let dl = self.ll_d1_lambda(f, j, k);
                        d_theta[idx] = dt;
                        d_lambda[idx] = dl;
                        norm_sq[idx] = dt * dt + dl * dl / s2;
                    }
                }
                Ok(Gradient { d_theta, d_lambda, norm_sq })
            }
        }
    }

    /// Covariant σ-Hessian.
    pub fn sigma_hessian(&self, f: &[f64]) -> Result<Hessian> {
        self.check_field(f)?;
        match self.layout {
            GridLayout::Axisym { nodes, .. } => {
                let mut tt = vec![0.0; nodes];
                let mut angular = vec![0.0; nodes];
                for j in 0..nodes {
                    tt[j] = self.axi_d2(f, j);
                    // cot θ f′ with the L'Hôpital limit f″ at the poles
                    angular[j] = if j == 0 || j == nodes - 1 {
                        tt[j]
                    } else {
                        self.cot_t[j] * self.axi_d1(f, j)
                    };
                }
                Ok(Hessian { tt, angular, tl: Vec::new(), ll: Vec::new() })
            }
            GridLayout::LatLong { n_theta, n_lambda } => {
                let count = n_theta * n_lambda;
                let mut tt = vec![0.0; count];
                let mut tl = vec![0.0; count];
                let mut ll = vec![0.0; count];
                // λ-derivative field first; its cross-pole ghosts obey the same
                // scalar rule because ∂_λ commutes with the half-period shift.
                let mut flam = vec![0.0; count];
                for j in 0..n_theta {
                    for k in 0..n_lambda {
                        flam[j * n_lambda + k] = self.ll_d1_lambda(f, j, k);
                    }
                }
                for j in 0..n_theta {
                    let cot = self.cot_t[j];
                    let sc = self.sin_t[j] * self.cos_t[j];
                    for k in 0..n_lambda {
                        let idx = j * n_lambda + k;
                        tt[idx] = self.ll_d2_theta(f, j, k);
                        // f_{;θλ} = ∂θ∂λ f − cot θ ∂λ f
                        tl[idx] = self.ll_d1_theta(&flam, j, k) - cot * flam[idx];
                        // f_{;λλ} = ∂λ² f + sin θ cos θ ∂θ f
                        ll[idx] = self.ll_d2_lambda(f, j, k) + sc * self.ll_d1_theta(f, j, k);
                    }
                }
                Ok(Hessian { tt, angular: Vec::new(), tl, ll })
            }
        }
    }

    /// Laplace–Beltrami σ^{ij} f_{;ij}.
    pub fn laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        let hess = self.sigma_hessian(f)?;
        match self.layout {
            GridLayout::Axisym { n, nodes } => {
                let mult = (n - 1) as f64;
                Ok((0..nodes).map(|j| hess.tt[j] + mult * hess.angular[j]).collect())
            }
            GridLayout::LatLong { n_theta, n_lambda } => {
                let mut out = vec![0.0; n_theta * n_lambda];
                for j in 0..n_theta {
                    let inv_s2 = 1.0 / (self.sin_t[j] * self.sin_t[j]);
                    for k in 0..n_lambda {
                        let idx = j * n_lambda + k;
                        out[idx] = hess.tt[idx] + inv_s2 * hess.ll[idx];
                    }
                }
                Ok(out)
            }
        }
    }

    // ----- axisym stencils (centered; pole-parity reflection at endpoints) -----

    /// Reflect an out-of-range index across the nearest pole: node -k maps to
    /// k, node (N-1)+k maps to (N-1)-k.
    fn axi_reflect(idx: isize, nn: usize) -> usize {
        if idx < 0 {
            (-idx) as usize
        } else if idx as usize > nn - 1 {
            2 * (nn - 1) - idx as usize
        } else {
            idx as usize
        }
    }

    fn axi_apply(&self, f: &[f64], j: usize, stencil: &[(isize, f64)], scale: f64) -> f64 {
        let nn = f.len();
        let f0 = f[j];
        let mut acc = 0.0;
        for &(off, c) in stencil {
            let idx = Self::axi_reflect(j as isize + off, nn);
            acc += c * (f[idx] - f0);
        }
        acc / scale
    }

    fn axi_d1(&self, f: &[f64], j: usize) -> f64 {
        self.axi_apply(f, j, &D1_CENTER, 12.0 * self.h_theta)
    }

    fn axi_d2(&self, f: &[f64], j: usize) -> f64 {
        self.axi_apply(f, j, &D2_CENTER, 12.0 * self.h_theta * self.h_theta)
    }

    // ----- lat-long stencils (centered everywhere; ghosts across poles) -----

    /// Field value at possibly-ghost (row, col). Rows reflect across the poles
    /// with a half-period λ shift; columns wrap periodically.
    fn ll_value(&self, f: &[f64], row: isize, col: isize) -> f64 {
        let (n_theta, n_lambda) = match self.layout {
            GridLayout::LatLong { n_theta, n_lambda } => (n_theta as isize, n_lambda as isize),
            _ => unreachable!(),
        };
        let mut r = row;
        let mut c = col.rem_euclid(n_lambda);
        if r < 0 {
            r = -r - 1;
            c = (c + n_lambda / 2).rem_euclid(n_lambda);
        } else if r >= n_theta {
            r = 2 * n_theta - 1 - r;
            c = (c + n_lambda / 2).rem_euclid(n_lambda);
        }
        f[(r * n_lambda + c) as usize]
    }

    fn ll_d1_theta(&self, f: &[f64], j: usize, k: usize) -> f64 {
        let f0 = self.ll_value(f, j as isize, k as isize);
        let mut acc = 0.0;
        for &(off, c) in &D1_CENTER {
            acc += c * (self.ll_value(f, j as isize + off, k as isize) - f0);
        }
        acc / (12.0 * self.h_theta)
    }

    fn ll_d2_theta(&self, f: &[f64], j: usize, k: usize) -> f64 {
        let f0 = self.ll_value(f, j as isize, k as isize);
        let mut acc = 0.0;
        for &(off, c) in &D2_CENTER {
            acc += c * (self.ll_value(f, j as isize + off, k as isize) - f0);
        }
        acc / (12.0 * self.h_theta * self.h_theta)
    }

    fn ll_d1_lambda(&self, f: &[f64], j: usize, k: usize) -> f64 {
        let f0 = self.ll_value(f, j as isize, k as isize);
        let mut acc = 0.0;
        for &(off, c) in &D1_CENTER {
            acc += c * (self.ll_value(f, j as isize, k as isize + off) - f0);
        }
        acc / (12.0 * self.h_lambda)
    }

    fn ll_d2_lambda(&self, f: &[f64], j: usize, k: usize) -> f64 {
        let f0 = self.ll_value(f, j as isize, k as isize);
        let mut acc = 0.0;
        for &(off, c) in &D2_CENTER {
            acc += c * (self.ll_value(f, j as isize, k as isize + off) - f0);
        }
        acc / (12.0 * self.h_lambda * self.h_lambda)
    }

    /// Snapshot dump: one header line, then one CSV row per node with the
    /// node coordinates followed by the requested field values.
    pub fn snapshot(&self, fields: &[(&str, &[f64])]) -> Result<String> {
        for (_, f) in fields {
            self.check_field(f)?;
        }
        let mut out = String::new();
        match self.layout {
            GridLayout::Axisym { n, nodes } => {
                out.push_str(&format!("HYPFLOW-GRID v1, axisym, {n}, {nodes}\n"));
                for idx in 0..nodes {
                    out.push_str(&format!("{:.17e}", self.theta[idx]));
                    for (_, f) in fields {
                        out.push_str(&format!(",{:.17e}", f[idx]));
                    }
                    out.push('\n');
                }
            }
            GridLayout::LatLong { n_theta, n_lambda } => {
                out.push_str(&format!("HYPFLOW-GRID v1, latlong, 2, {n_theta}, {n_lambda}\n"));
                for idx in 0..self.node_count() {
                    let (t, l) = self.node_coords(idx);
                    out.push_str(&format!("{t:.17e},{l:.17e}"));
                    for (_, f) in fields {
                        out.push_str(&format!(",{:.17e}", f[idx]));
                    }
                    out.push('\n');
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn sin_theta_row(&self, row: usize) -> f64 {
        self.sin_t[row]
    }
}
