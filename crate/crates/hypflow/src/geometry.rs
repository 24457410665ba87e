//! Graph geometry: turns a radial graph over S^n into curvature data.
//!
//! The graph is stored as φ rather than the radius u, with φ the
//! antiderivative of 1/ϑ evaluated in closed form:
//!
//! * polar model, ϑ(r) = sinh r:  φ = log tanh(u/2) < 0,
//! * ball model, ϑ(r) = r:        φ = log u < log 2.
//!
//! All hyperbolic functions of u are evaluated through e^φ and expm1, so
//! nothing overflows as the flow expands (u ~ t/n means φ → 0 like e^{-u}).
//!
//! The operator whose eigenvalues feed F is
//!
//! h̃^i_j = v^{-2} { −(σ^{ik} − v^{-2} φ^i φ^k) φ_{jk} + ϑ̇ δ^i_j },
//!
//! with ϑ̇ = cosh u in the polar model and ϑ̇ = 1 in the ball model. Model
//! principal curvatures are κ_i = (v/ϑ) λ_i(h̃). The hyperbolic curvatures
//! are κ̌ = κ in the polar model and κ̌ = (1 − u²/4)(κ + ϑ̃/v) in the ball
//! model, ϑ̃(r) = (r/2)/(1 − r²/4).

use crate::curvature::{CurvatureFunction, KVec};
use crate::error::{Error, Result};
use crate::grid::{GridLayout, SphereGrid};

const LN_2: f64 = std::f64::consts::LN_2;

/// Ambient parametrization of hyperbolic space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Geodesic polar coordinates, metric dr² + sinh²r σ; radii in (0, ∞).
    Polar,
    /// Conformally flat ball of radius 2; radii in (0, 2).
    Ball,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Polar => "polar",
            Model::Ball => "ball",
        }
    }

    /// Upper bound of the φ-range (φ stays strictly below this during a run).
    pub fn phi_sup(&self) -> f64 {
        match self {
            Model::Polar => 0.0,
            Model::Ball => LN_2,
        }
    }

    /// Pointwise φ(u). Errors when u is outside the model's radius range.
    pub fn phi_of_u(&self, u: f64) -> Result<f64> {
        match self {
            Model::Polar => {
                if !(u > 0.0) || !u.is_finite() {
                    return Err(Error::Domain(format!("polar radius must be positive, got {u}")));
                }
                // log tanh(u/2) = log1p(-e^{-u}) - log1p(e^{-u})
                let em = (-u).exp();
                Ok((-em).ln_1p() - em.ln_1p())
            }
            Model::Ball => {
                if !(u > 0.0 && u < 2.0) {
                    return Err(Error::Domain(format!("ball radius must be in (0, 2), got {u}")));
                }
                Ok(u.ln())
            }
        }
    }

    /// Pointwise u(φ), inverse of [`phi_of_u`](Self::phi_of_u).
    pub fn u_of_phi(&self, phi: f64) -> f64 {
        match self {
            Model::Polar => {
                // u = 2 artanh(e^φ) = log(1 + e^φ) - log(1 - e^φ)
                let e = phi.exp();
                e.ln_1p() - (-phi.exp_m1()).ln()
            }
            Model::Ball => phi.exp(),
        }
    }

    /// Hyperbolic radial distance of the node (polar radius); converts in the
    /// ball model via τ = log(2+u) − log(2−u).
    pub fn polar_radius_of_phi(&self, phi: f64) -> f64 {
        match self {
            Model::Polar => self.u_of_phi(phi),
            Model::Ball => {
                let u = phi.exp();
                (2.0 + u).ln() - (2.0 - u).ln()
            }
        }
    }

    /// sinh of the hyperbolic radial distance, stably from φ.
    pub fn sinh_polar_radius_of_phi(&self, phi: f64) -> f64 {
        match self {
            // sinh u = 2 e^φ / (1 - e^{2φ})
            Model::Polar => 2.0 * phi.exp() / -(2.0 * phi).exp_m1(),
            // sinh τ = u / (1 - u²/4)
            Model::Ball => phi.exp() / -(2.0 * phi - 2.0 * LN_2).exp_m1(),
        }
    }

    /// (u_ball − 2) evaluated stably from φ: 2 expm1(φ − φ_sup) in both models.
    pub fn ball_radius_minus_two(&self, phi: f64) -> f64 {
        2.0 * (phi - self.phi_sup()).exp_m1()
    }
}

/// Direction of a radius conversion between the two models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convert {
    BallToPolar,
    PolarToBall,
}

/// Radius conversion: τ = log(2+r) − log(2−r), r = 2 tanh(τ/2).
/// Unlike the graph maps, r = 0 is allowed here (τ = 0).
pub fn convert_radius(direction: Convert, r: f64) -> Result<f64> {
    match direction {
        Convert::BallToPolar => {
            if !(r >= 0.0 && r < 2.0) {
                return Err(Error::Domain(format!("ball radius must be in [0, 2), got {r}")));
            }
            Ok((2.0 + r).ln() - (2.0 - r).ln())
        }
        Convert::PolarToBall => {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Domain(format!("polar radius must be nonnegative, got {r}")));
            }
            Ok(2.0 * (0.5 * r).tanh())
        }
    }
}

/// Fieldwise φ = φ(u). Errors carry the first offending node.
pub fn phi_from_u(model: Model, u: &[f64]) -> Result<Vec<f64>> {
    u.iter()
        .enumerate()
        .map(|(i, &ui)| {
            model.phi_of_u(ui).map_err(|e| Error::Numerics { node: i, detail: e.to_string() })
        })
        .collect()
}

/// Fieldwise u = u(φ).
pub fn u_from_phi(model: Model, phi: &[f64]) -> Vec<f64> {
    phi.iter().map(|&p| model.u_of_phi(p)).collect()
}

/// Per-node geometry of a graph: v, h̃-eigenvalues, model and hyperbolic
/// principal curvatures.
///
/// Eigen pairs are stored as `[a, b]`: on axisym grids `a` is the radial
/// direction and `b` the angular one with multiplicity n−1; on lat-long grids
/// the pair is sorted ascending (n = 2, both multiplicity 1).
#[derive(Debug, Clone)]
pub struct GeometryFields {
    pub model: Model,
    /// Graph gradient factor v = sqrt(1 + |Dφ|²) ≥ 1.
    pub v: Vec<f64>,
    /// |Dφ|²_σ, which equals |Du|² in both models.
    pub grad_sq: Vec<f64>,
    /// Model radius u per node.
    pub u: Vec<f64>,
    /// Eigenvalues of h̃ (the ϑ̇-bearing operator of the model).
    pub lam: Vec<[f64; 2]>,
    /// Arguments handed to F for the flow speed. Polar: λ(h̃). Ball:
    /// λ(h̃) + u ϑ̃ v^{-2}, i.e. (u/v)·(eigenvalues of the operator of the
    /// hyperbolic flow seen in the ball).
    pub flow_args: Vec<[f64; 2]>,
    /// Model principal curvatures κ = (v/ϑ) λ.
    pub kappa: Vec<[f64; 2]>,
    /// Hyperbolic principal curvatures κ̌.
    pub kappa_check: Vec<[f64; 2]>,
    /// Number of principal curvatures.
    n: usize,
}

impl GeometryFields {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Model principal curvatures at a node, ascending, all n of them.
    pub fn principal_curvatures(&self, node: usize) -> KVec {
        expand_sorted(self.kappa[node], self.n)
    }

    /// Hyperbolic principal curvatures at a node, ascending.
    pub fn hyperbolic_curvatures(&self, node: usize) -> KVec {
        expand_sorted(self.kappa_check[node], self.n)
    }

    /// max over nodes and directions of |κ̌_i − c|.
    pub fn max_kappa_check_deviation(&self, c: f64) -> f64 {
        let mut m = 0.0_f64;
        for kc in &self.kappa_check {
            m = m.max((kc[0] - c).abs()).max((kc[1] - c).abs());
        }
        m
    }
}

fn expand_sorted(pair: [f64; 2], n: usize) -> KVec {
    let mut buf = [0.0; crate::curvature::MAX_DIM];
    buf[0] = pair[0];
    for slot in buf.iter_mut().take(n).skip(1) {
        *slot = pair[1];
    }
    buf[..n].sort_by(|a, b| a.partial_cmp(b).unwrap());
    KVec::from_slice(&buf[..n])
}

/// Generalized symmetric 2×2 eigenproblem det(A − λB) = 0, B positive
/// definite, returned ascending. Proportional pencils (disc ≤ 0 after
/// rounding) yield exactly equal values.
pub fn generalized_eigen_2x2(
    a11: f64,
    a12: f64,
    a22: f64,
    b11: f64,
    b12: f64,
    b22: f64,
) -> Result<(f64, f64)> {
    let det_b = b11 * b22 - b12 * b12;
    if !(det_b > 0.0) {
        return Err(Error::Numerics { node: usize::MAX, detail: "metric not positive definite".into() });
    }
    let mid = a11 * b22 + a22 * b11 - 2.0 * a12 * b12;
    let det_a = a11 * a22 - a12 * a12;
    let disc = mid * mid - 4.0 * det_b * det_a;
    if disc <= 0.0 {
        let lam = mid / (2.0 * det_b);
        return Ok((lam, lam));
    }
    let s = disc.sqrt();
    let q = 0.5 * (mid + mid.signum() * s);
    let (l1, l2) = if q == 0.0 { (0.0, 0.0) } else { (q / det_b, det_a / q) };
    if !(l1.is_finite() && l2.is_finite()) {
        return Err(Error::Numerics { node: usize::MAX, detail: "non-finite eigenvalue".into() });
    }
    Ok(if l1 <= l2 { (l1, l2) } else { (l2, l1) })
}

/// Builds the full geometry of the graph φ: v, h̃ eigenvalues, model and
/// hyperbolic principal curvatures.
pub fn shape_operator(grid: &SphereGrid, phi: &[f64], model: Model) -> Result<GeometryFields> {
    let n = grid.dim();
    let count = grid.node_count();
    if phi.len() != count {
        return Err(Error::config(format!("phi has {} values, grid has {count} nodes", phi.len())));
    }
    let grad = grid.sigma_gradient(phi)?;
    let hess = grid.sigma_hessian(phi)?;

    let mut v = vec![0.0; count];
    let mut u = vec![0.0; count];
    let mut lam = vec![[0.0; 2]; count];
    let mut flow_args = vec![[0.0; 2]; count];
    let mut kappa = vec![[0.0; 2]; count];
    let mut kappa_check = vec![[0.0; 2]; count];

    // ϑ̇ in the h̃ formula: polar cosh u = (1+e^{2φ})/(1−e^{2φ}), ball 1.
    // 1−e^{2φ} comes from expm1 so the quotient stays accurate as φ → 0⁻.
    let theta_slot = |phi_v: f64| -> f64 {
        match model {
            Model::Polar => {
                let e2 = (2.0 * phi_v).exp();
                (1.0 + e2) / -(2.0 * phi_v).exp_m1()
            }
            Model::Ball => 1.0,
        }
    };

    match grid.layout {
        GridLayout::Axisym { .. } => {
            for i in 0..count {
                let p = phi[i];
                let gsq = grad.norm_sq[i];
                let vv = (1.0 + gsq).sqrt();
                let td = theta_slot(p);
                let iv2 = 1.0 / (vv * vv);
                let l_rad = iv2 * (-iv2 * hess.tt[i] + td);
                let l_ang = iv2 * (-hess.angular[i] + td);
                v[i] = vv;
                u[i] = model.u_of_phi(p);
                lam[i] = [l_rad, l_ang];
                finish_node(model, i, vv, u[i], lam[i], &mut flow_args, &mut kappa, &mut kappa_check)?;
            }
        }
        GridLayout::LatLong { n_theta, n_lambda } => {
            for row in 0..n_theta {
                let s = grid.sin_theta_row(row);
                let s2 = s * s;
                for col in 0..n_lambda {
                    let i = row * n_lambda + col;
                    let p = phi[i];
                    let gsq = grad.norm_sq[i];
                    let vv = (1.0 + gsq).sqrt();
                    let iv2 = 1.0 / (vv * vv);
                    let td = theta_slot(p);

                    let pt = grad.d_theta[i];
                    let pl = grad.d_lambda[i];
                    let (p_up_t, p_up_l) = (pt, pl / s2);
                    let (htt, htl, hll) = (hess.tt[i], hess.tl[i], hess.ll[i]);

                    // R^i_j = (σ^{ik} − v^{-2} φ^i φ^k) φ_{kj}, with
                    // W^{ik} = σ^{ik} − v^{-2} φ^i φ^k
                    let w_tt = 1.0 - iv2 * p_up_t * p_up_t;
                    let w_tl = -iv2 * p_up_t * p_up_l;
                    let w_ll = 1.0 / s2 - iv2 * p_up_l * p_up_l;
                    let r_tt = w_tt * htt + w_tl * htl;
                    let r_tl = w_tt * htl + w_tl * hll;
                    let r_lt = w_tl * htt + w_ll * htl;
                    let r_ll = w_tl * htl + w_ll * hll;

                    let h_up_tt = iv2 * (-r_tt + td);
                    let h_up_tl = iv2 * (-r_tl);
                    let h_up_lt = iv2 * (-r_lt);
                    let h_up_ll = iv2 * (-r_ll + td);

                    // lower with g̃ and symmetrize
                    let g_tt = pt * pt + 1.0;
                    let g_tl = pt * pl;
                    let g_ll = pl * pl + s2;
                    let a11 = g_tt * h_up_tt + g_tl * h_up_lt;
                    let a12_a = g_tt * h_up_tl + g_tl * h_up_ll;
                    let a12_b = g_tl * h_up_tt + g_ll * h_up_lt;
                    let a22 = g_tl * h_up_tl + g_ll * h_up_ll;
                    let a12 = 0.5 * (a12_a + a12_b);

                    let (l1, l2) = generalized_eigen_2x2(a11, a12, a22, g_tt, g_tl, g_ll)
                        .map_err(|_| Error::Numerics {
                            node: i,
                            detail: "eigenvalue solve failed".into(),
                        })?;
                    v[i] = vv;
                    u[i] = model.u_of_phi(p);
                    lam[i] = [l1, l2];
                    finish_node(model, i, vv, u[i], lam[i], &mut flow_args, &mut kappa, &mut kappa_check)?;
                }
            }
        }
    }

    Ok(GeometryFields { model, v, grad_sq: grad.norm_sq, u, lam, flow_args, kappa, kappa_check, n })
}

/// Fills flow arguments, model κ and hyperbolic κ̌ for one node.
fn finish_node(
    model: Model,
    i: usize,
    v: f64,
    u: f64,
    lam: [f64; 2],
    flow_args: &mut [[f64; 2]],
    kappa: &mut [[f64; 2]],
    kappa_check: &mut [[f64; 2]],
) -> Result<()> {
    match model {
        Model::Polar => {
            let theta = u.sinh();
            let scale = v / theta;
            let k = [scale * lam[0], scale * lam[1]];
            kappa[i] = k;
            kappa_check[i] = k;
            flow_args[i] = lam;
        }
        Model::Ball => {
            let one_m_q = 1.0 - 0.25 * u * u;
            let vartheta = 0.5 * u / one_m_q;
            let scale = v / u;
            let k = [scale * lam[0], scale * lam[1]];
            // ǩ^i_j = h^i_j + v^{-1} ϑ̃ δ^i_j, then κ̌ = (1 − u²/4) · eig(ǩ)
            let khat = [k[0] + vartheta / v, k[1] + vartheta / v];
            kappa[i] = k;
            kappa_check[i] = [one_m_q * khat[0], one_m_q * khat[1]];
            // F arguments: (u/v)·ǩ = λ + u ϑ̃ v^{-2}
            let shift = u * vartheta / (v * v);
            flow_args[i] = [lam[0] + shift, lam[1] + shift];
        }
    }
    for x in flow_args[i] {
        if !x.is_finite() {
            return Err(Error::Numerics { node: i, detail: "non-finite curvature".into() });
        }
    }
    Ok(())
}

/// φ̇ = 1/F per node (polar: F(λ(h̃)); ball: u̇ = v/F(ǩ) then φ̇ = u̇/u,
/// identical to 1/F evaluated on the flow arguments by homogeneity).
///
/// Errors with the full list of nodes whose curvatures left the cone.
pub fn flow_speed(fields: &GeometryFields, f: &dyn CurvatureFunction) -> Result<Vec<f64>> {
    let n = fields.dim();
    let count = fields.v.len();
    let mut speed = vec![0.0; count];
    let mut bad_nodes = Vec::new();
    for i in 0..count {
        let args = KVec::radial_angular(fields.flow_args[i][0], fields.flow_args[i][1], n);
        if !f.in_cone(&args) {
            bad_nodes.push(i);
            continue;
        }
        if bad_nodes.is_empty() {
            let fv = f.evaluate(&args)?;
            speed[i] = 1.0 / fv;
        }
    }
    if !bad_nodes.is_empty() {
        let detail = format!(
            "{} node(s) outside the cone of {} (first: node {}, args {:?})",
            bad_nodes.len(),
            f.name(),
            bad_nodes[0],
            fields.flow_args[bad_nodes[0]]
        );
        bad_nodes.truncate(16);
        return Err(Error::Admissibility { t: f64::NAN, nodes: bad_nodes, detail });
    }
    Ok(speed)
}

/// Per-node linearized diffusivity F^{-2} v^{-2} Σ_i ∂F/∂κ_i on the flow
/// arguments.
pub fn diffusivity_field(fields: &GeometryFields, f: &dyn CurvatureFunction) -> Result<Vec<f64>> {
    let n = fields.dim();
    (0..fields.v.len())
        .map(|i| {
            let args = KVec::radial_angular(fields.flow_args[i][0], fields.flow_args[i][1], n);
            let fv = f.evaluate(&args).map_err(|e| attach_node(e, i))?;
            let grad = f.gradient(&args).map_err(|e| attach_node(e, i))?;
            let gsum: f64 = grad.iter().sum();
            Ok(gsum / (fv * fv * fields.v[i] * fields.v[i]))
        })
        .collect()
}

/// Spectral bound of the linearized diffusivity: max over nodes of
/// F^{-2} v^{-2} Σ_i ∂F/∂κ_i on the flow arguments. Drives the CFL step.
pub fn diffusivity_bound(fields: &GeometryFields, f: &dyn CurvatureFunction) -> Result<f64> {
    Ok(diffusivity_field(fields, f)?.into_iter().fold(0.0, f64::max))
}

fn attach_node(e: Error, node: usize) -> Error {
    match e {
        Error::Admissibility { t, mut nodes, detail } => {
            nodes.push(node);
            Error::Admissibility { t, nodes, detail }
        }
        other => other,
    }
}

/// F evaluated on the hyperbolic curvatures κ̌ at every node.
pub fn f_on_hyperbolic(fields: &GeometryFields, f: &dyn CurvatureFunction) -> Result<Vec<f64>> {
    let n = fields.dim();
    (0..fields.v.len())
        .map(|i| {
            let args = KVec::radial_angular(fields.kappa_check[i][0], fields.kappa_check[i][1], n);
            f.evaluate(&args).map_err(|e| attach_node(e, i))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{make_function, FunctionKind};

    fn coth(x: f64) -> f64 {
        x.cosh() / x.sinh()
    }

    #[test]
    fn phi_maps_examples() {
        // ball: u ≡ 1 → φ ≡ 0
        assert_eq!(Model::Ball.phi_of_u(1.0).unwrap(), 0.0);
        // polar: u = 2 artanh(e^{-1}) → φ = -1
        let u = 2.0 * (1.0_f64 / std::f64::consts::E).atanh();
        assert!((Model::Polar.phi_of_u(u).unwrap() + 1.0).abs() < 1e-14);
        assert!(Model::Polar.phi_of_u(-0.5).is_err());
        assert!(Model::Ball.phi_of_u(2.5).is_err());
    }

    #[test]
    fn phi_u_round_trip() {
        let mut rng = crate::rng::SplitMix64::new(3);
        for _ in 0..200 {
            let u = rng.range(0.05, 30.0);
            let phi = Model::Polar.phi_of_u(u).unwrap();
            assert!(phi < 0.0);
            assert!((Model::Polar.u_of_phi(phi) - u).abs() <= 1e-14 * u.max(1.0), "u = {u}");

            let ub = rng.range(0.05, 1.95);
            let phib = Model::Ball.phi_of_u(ub).unwrap();
            assert!((Model::Ball.u_of_phi(phib) - ub).abs() <= 1e-14);
        }
        // stability far out: u = 200 keeps a meaningful φ
        let phi = Model::Polar.phi_of_u(200.0).unwrap();
        assert!(phi < 0.0 && phi > -1e-80);
        assert!((Model::Polar.u_of_phi(phi) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn radius_conversion() {
        assert_eq!(convert_radius(Convert::BallToPolar, 0.0).unwrap(), 0.0);
        assert_eq!(convert_radius(Convert::BallToPolar, 1.0).unwrap(), 3.0_f64.ln());
        let tau = convert_radius(Convert::BallToPolar, 1.5).unwrap();
        // identity sinh²τ = r²/(1 − r²/4)²
        let rhs: f64 = 1.5 / (1.0 - 0.25 * 1.5 * 1.5);
        assert!((tau.sinh().powi(2) - rhs * rhs).abs() <= 1e-13 * (1.0 + rhs * rhs));
        // round trip
        let back = convert_radius(Convert::PolarToBall, tau).unwrap();
        assert!((back - 1.5).abs() < 1e-14);
        assert!((convert_radius(Convert::PolarToBall, 1e-12).unwrap() - 1e-12).abs() < 1e-24);
        assert!(convert_radius(Convert::BallToPolar, 2.0).is_err());
        assert!(convert_radius(Convert::PolarToBall, -0.1).is_err());
    }

    #[test]
    fn round_sphere_polar() {
        let grid = SphereGrid::axisym(2, 65).unwrap();
        let r0 = 1.0;
        let phi = phi_from_u(Model::Polar, &grid.fill(|_, _| r0)).unwrap();
        let geo = shape_operator(&grid, &phi, Model::Polar).unwrap();
        for i in 0..grid.node_count() {
            assert!((geo.v[i] - 1.0).abs() < 1e-15);
            assert!((geo.lam[i][0] - r0.cosh()).abs() < 1e-13);
            assert!((geo.lam[i][1] - r0.cosh()).abs() < 1e-13);
            let k = geo.principal_curvatures(i);
            assert!((k[0] - coth(r0)).abs() < 1e-13);
            assert!((k[1] - coth(r0)).abs() < 1e-13);
            let kc = geo.hyperbolic_curvatures(i);
            assert!((kc[0] - coth(r0)).abs() < 1e-13);
        }
        assert!((coth(1.0) - 1.3130).abs() < 1e-4);
    }

    #[test]
    fn round_sphere_ball() {
        let grid = SphereGrid::axisym(2, 65).unwrap();
        let r0 = 1.0;
        let phi = phi_from_u(Model::Ball, &grid.fill(|_, _| r0)).unwrap();
        let geo = shape_operator(&grid, &phi, Model::Ball).unwrap();
        for i in 0..grid.node_count() {
            // euclidean curvature of a round sphere of radius 1
            assert!((geo.kappa[i][0] - 1.0).abs() < 1e-13);
            // κ̌ = (1 − 1/4)(1 + (1/2)/(3/4)) = 5/4 = coth(log 3)
            assert!((geo.kappa_check[i][0] - 1.25).abs() < 1e-13);
            assert!((geo.kappa_check[i][1] - 1.25).abs() < 1e-13);
        }
        assert!((coth(3.0_f64.ln()) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn linearized_curvature_of_small_perturbation() {
        // u = r0 + w, w = a P2(cos θ):
        // κ̌_rad ≈ coth r0 − (w″ + w)/sinh²r0
        // κ̌_ang ≈ coth r0 − (cot θ w′ + w)/sinh²r0
        let grid = SphereGrid::axisym(2, 201).unwrap();
        let r0 = 1.0;
        let a = 1e-4;
        let p2 = |x: f64| 0.5 * (3.0 * x * x - 1.0);
        let u0 = grid.fill(|t, _| r0 + a * p2(t.cos()));
        let phi = phi_from_u(Model::Polar, &u0).unwrap();
        let geo = shape_operator(&grid, &phi, Model::Polar).unwrap();
        let s2 = r0.sinh() * r0.sinh();
        let mut worst = 0.0_f64;
        for (j, &t) in grid.theta_rows().iter().enumerate() {
            let w = a * p2(t.cos());
            // w(θ) = a(1/4 + 3/4 cos 2θ): w′ = -3a/2 sin 2θ, w″ = -3a cos 2θ
            let wp = -1.5 * a * (2.0 * t).sin();
            let wpp = -3.0 * a * (2.0 * t).cos();
            let lin_rad = coth(r0) - (wpp + w) / s2;
            let ang = if j == 0 || j == grid.node_count() - 1 {
                wpp
            } else {
                t.cos() / t.sin() * wp
            };
            let lin_ang = coth(r0) - (ang + w) / s2;
            worst = worst.max((geo.kappa_check[j][0] - lin_rad).abs());
            worst = worst.max((geo.kappa_check[j][1] - lin_ang).abs());
        }
        // quadratic remainder O(a²) plus stencil error O(h⁴)
        assert!(worst < 5e-7, "worst deviation from linearization {worst:e}");

        // translation mode ε cos θ is umbilic to first order
        let eps = 1e-6;
        let u1 = grid.fill(|t, _| r0 + eps * t.cos());
        let phi = phi_from_u(Model::Polar, &u1).unwrap();
        let geo = shape_operator(&grid, &phi, Model::Polar).unwrap();
        assert!(geo.max_kappa_check_deviation(coth(r0)) < 1e-9);
    }

    #[test]
    fn offset_sphere_is_exactly_umbilic() {
        // graph over the origin of a geodesic sphere of radius ρ centered at
        // distance d along the axis: cosh u cosh d − sinh u sinh d cos θ = cosh ρ,
        // u(θ) = artanh(tanh d cos θ·) + arccosh(cosh ρ / sqrt(cosh²d − sinh²d cos²θ))
        let rho = 1.0_f64;
        let d = 0.3_f64;
        let grid = SphereGrid::axisym(2, 201).unwrap();
        let u = grid.fill(|t, _| {
            let b = d.sinh() * t.cos();
            let a = d.cosh();
            let s = (a * a - b * b).sqrt();
            (b / a).atanh() + (rho.cosh() / s).acosh()
        });
        assert!((u[0] - (rho + d)).abs() < 1e-12);
        assert!((u[200] - (rho - d)).abs() < 1e-12);
        let phi = phi_from_u(Model::Polar, &u).unwrap();
        let geo = shape_operator(&grid, &phi, Model::Polar).unwrap();
        let dev = geo.max_kappa_check_deviation(coth(rho));
        assert!(dev < 2e-7, "offset sphere deviation {dev:e}");
    }

    #[test]
    fn dual_pipeline_agreement() {
        // the same hypersurface handed to both parametrizations gives the
        // same hyperbolic curvatures to round-off
        let grid = SphereGrid::axisym(3, 201).unwrap();
        let p2 = |x: f64| 0.5 * (3.0 * x * x - 1.0);
        let u_polar = grid.fill(|t, _| 1.0 + 0.05 * p2(t.cos()));
        let phi_p = phi_from_u(Model::Polar, &u_polar).unwrap();
        let geo_p = shape_operator(&grid, &phi_p, Model::Polar).unwrap();

        let u_ball: Vec<f64> =
            u_polar.iter().map(|&r| convert_radius(Convert::PolarToBall, r).unwrap()).collect();
        let phi_b = phi_from_u(Model::Ball, &u_ball).unwrap();
        let geo_b = shape_operator(&grid, &phi_b, Model::Ball).unwrap();

        let mut worst = 0.0_f64;
        for i in 0..grid.node_count() {
            for k in 0..2 {
                worst = worst.max((geo_p.kappa_check[i][k] - geo_b.kappa_check[i][k]).abs());
            }
        }
        assert!(worst < 1e-10, "cross-model difference {worst:e}");
    }

    #[test]
    fn axisym_matches_latlong_lift() {
        // same profile on an axisym grid and lifted to a lat-long grid;
        // 2·n_theta + 1 axisym nodes put the staggered rows on shared angles
        let n_theta = 64;
        let ax = SphereGrid::axisym(2, 2 * n_theta + 1).unwrap();
        let ll = SphereGrid::lat_long(n_theta, 2 * n_theta).unwrap();
        let profile = |t: f64| 1.0 + 0.05 * (0.5 * (3.0 * t.cos() * t.cos() - 1.0));
        let phi_ax = phi_from_u(Model::Polar, &ax.fill(|t, _| profile(t))).unwrap();
        let phi_ll = phi_from_u(Model::Polar, &ll.fill(|t, _| profile(t))).unwrap();
        let geo_ax = shape_operator(&ax, &phi_ax, Model::Polar).unwrap();
        let geo_ll = shape_operator(&ll, &phi_ll, Model::Polar).unwrap();

        let nl = 2 * n_theta;
        let mut worst = 0.0_f64;
        let mut lambda_variation = 0.0_f64;
        for row in 0..n_theta {
            let ax_node = 2 * row + 1; // θ_ax = (2row+1)π/(2 n_theta) = θ_ll row
            let mut ax_pair = geo_ax.kappa_check[ax_node];
            ax_pair.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for col in 0..nl {
                let i = row * nl + col;
                let ll_pair = geo_ll.kappa_check[i]; // already ascending
                worst = worst.max((ax_pair[0] - ll_pair[0]).abs());
                worst = worst.max((ax_pair[1] - ll_pair[1]).abs());
                let first = geo_ll.kappa_check[row * nl];
                lambda_variation = lambda_variation
                    .max((ll_pair[0] - first[0]).abs())
                    .max((ll_pair[1] - first[1]).abs());
            }
        }
        assert!(lambda_variation < 1e-11, "axisymmetric field broke λ-independence: {lambda_variation:e}");
        assert!(worst < 1e-5, "axisym vs lat-long disagreement {worst:e}");
    }

    #[test]
    fn umbilic_pencil_gives_exactly_equal_eigenvalues() {
        let (l1, l2) = generalized_eigen_2x2(2.0, 0.0, 2.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(l1, 2.0);
        // non-degenerate case against direct solve
        let (l1, l2) = generalized_eigen_2x2(2.0, 0.5, 1.0, 1.0, 0.1, 2.0).unwrap();
        assert!(l1 < l2);
        for lam in [l1, l2] {
            let det = (2.0 - lam * 1.0) * (1.0 - lam * 2.0) - (0.5 - lam * 0.1).powi(2);
            assert!(det.abs() < 1e-12);
        }
    }

    #[test]
    fn flow_speed_on_round_sphere() {
        let grid = SphereGrid::axisym(2, 33).unwrap();
        let r0 = 0.8;
        let phi = phi_from_u(Model::Polar, &grid.fill(|_, _| r0)).unwrap();
        let geo = shape_operator(&grid, &phi, Model::Polar).unwrap();
        let mean = make_function(FunctionKind::MeanCurvature, 2).unwrap();
        let speed = flow_speed(&geo, &*mean).unwrap();
        // φ̇ = 1/(n cosh r0); u̇ = ϑ φ̇ = 1/(n coth r0)
        let expect_phi_dot = 1.0 / (2.0 * r0.cosh());
        let expect_u_dot = 1.0 / (2.0 * coth(r0));
        for (i, &s) in speed.iter().enumerate() {
            assert!((s - expect_phi_dot).abs() < 1e-14);
            let u_dot = s * geo.u[i].sinh();
            assert!((u_dot - expect_u_dot).abs() < 1e-14);
        }
        // all normalized F agree on umbilic data
        let geom = make_function(FunctionKind::GeometricMean, 2).unwrap();
        let speed2 = flow_speed(&geo, &*geom).unwrap();
        for (a, b) in speed.iter().zip(speed2.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn flow_speed_rejects_inadmissible_nodes() {
        let grid = SphereGrid::axisym(2, 65).unwrap();
        let p2 = |x: f64| 0.5 * (3.0 * x * x - 1.0);
        let u = grid.fill(|t, _| 1.0 + 0.9 * p2(t.cos()));
        let phi = phi_from_u(Model::Polar, &u).unwrap();
        let geo = shape_operator(&grid, &phi, Model::Polar).unwrap();
        let geom = make_function(FunctionKind::GeometricMean, 2).unwrap();
        let err = flow_speed(&geo, &*geom).unwrap_err();
        match err {
            Error::Admissibility { nodes, .. } => assert!(!nodes.is_empty()),
            other => panic!("expected admissibility error, got {other}"),
        }

        // a milder dent leaves the positive cone but not the half space
        let u = grid.fill(|t, _| 1.0 + 0.5 * p2(t.cos()));
        let phi = phi_from_u(Model::Polar, &u).unwrap();
        let geo = shape_operator(&grid, &phi, Model::Polar).unwrap();
        assert!(flow_speed(&geo, &*geom).is_err());
        let mean = make_function(FunctionKind::MeanCurvature, 2).unwrap();
        assert!(flow_speed(&geo, &*mean).is_ok());
    }

    #[test]
    fn gradient_norm_identities() {
        // |Du|² computed from the u field and ϑ(u) matches |Dφ|² to stencil order
        let grid = SphereGrid::axisym(2, 201).unwrap();
        let u = grid.fill(|t, _| 1.0 + 0.1 * t.cos() + 0.05 * (2.0 * t).cos());
        let phi = phi_from_u(Model::Polar, &u).unwrap();
        let geo = shape_operator(&grid, &phi, Model::Polar).unwrap();
        let gu = grid.sigma_gradient(&u).unwrap();
        for i in 0..grid.node_count() {
            let du_sq = gu.norm_sq[i] / (u[i].sinh() * u[i].sinh());
            assert!((du_sq - geo.grad_sq[i]).abs() < 1e-8);
            // v identity holds by construction
            assert!((geo.v[i] * geo.v[i] - 1.0 - geo.grad_sq[i]).abs() < 1e-15);
        }
    }
}
