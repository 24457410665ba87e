//! Time integration of the scalar inverse-curvature flow φ̇ = 1/F(h̃).
//!
//! Classical four-stage Runge–Kutta in time with an adaptive step from the
//! spectral bound of the linearized diffusivity. The diffusivity decays like
//! e^{-2t/n} as the surface expands, so the step grows until it hits dt_max;
//! no implicit machinery is needed at this scale.

use crate::curvature::CurvatureFunction;
use crate::error::{Error, Result};
use crate::geometry::{self, GeometryFields, Model};
use crate::grid::{GridLayout, SphereGrid};
use crate::harmonics;
use std::sync::Arc;

/// Step-size control and run horizon.
#[derive(Debug, Clone)]
pub struct StepControl {
    /// CFL safety factor in (0, 1].
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Observer cadence in flow time.
    pub output_every: f64,
}

impl StepControl {
    /// Defaults for dimension n: dt_max = 0.05 n keeps the temporal error
    /// below rate-fitting noise once the CFL bound stops binding.
    pub fn defaults(n: usize, t_end: f64) -> Self {
        Self { cfl: 0.2, dt_min: 1e-9, dt_max: 0.05 * n as f64, t_end, output_every: 0.1 }
    }

    fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            v.push(format!("cfl must be in (0, 1], got {}", self.cfl));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            v.push(format!("need 0 < dt_min <= dt_max, got {} and {}", self.dt_min, self.dt_max));
        }
        if !(self.t_end > 0.0) {
            v.push(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.output_every > 0.0) {
            v.push(format!("output_every must be positive, got {}", self.output_every));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

/// Families of star-shaped initial hypersurfaces.
#[derive(Debug, Clone)]
pub enum InitialData {
    Sphere { r0: f64 },
    /// u₀(θ) = r₀ + Σ a_ℓ P_ℓ(cos θ).
    AxisymPerturbed { r0: f64, coeffs: Vec<(usize, f64)> },
    /// u₀(θ, λ) = r₀ + Σ a Y_{ℓm}(θ, λ), real harmonics up to ℓ = 4.
    LatLongPerturbed { r0: f64, harmonics: Vec<(usize, i32, f64)> },
}

impl InitialData {
    pub fn profile(&self, theta: f64, lambda: f64) -> f64 {
        match self {
            InitialData::Sphere { r0 } => *r0,
            InitialData::AxisymPerturbed { r0, coeffs } => {
                let x = theta.cos();
                r0 + coeffs.iter().map(|&(l, a)| a * harmonics::legendre_p(l, x)).sum::<f64>()
            }
            InitialData::LatLongPerturbed { r0, harmonics: hs } => {
                r0 + hs
                    .iter()
                    .map(|&(l, m, a)| a * harmonics::real_harmonic(l, m, theta, lambda))
                    .sum::<f64>()
            }
        }
    }

    pub fn validate(&self, grid: &SphereGrid) -> Result<()> {
        let mut v = Vec::new();
        match self {
            InitialData::Sphere { r0 } => {
                if !(r0 > &0.0) {
                    v.push(format!("sphere radius must be positive, got {r0}"));
                }
            }
            InitialData::AxisymPerturbed { r0, coeffs } => {
                if !(r0 > &0.0) {
                    v.push(format!("base radius must be positive, got {r0}"));
                }
                for &(l, _) in coeffs {
                    if l == 0 || l > 12 {
                        v.push(format!("Legendre mode must have 1 <= l <= 12, got {l}"));
                    }
                }
            }
            InitialData::LatLongPerturbed { r0, harmonics: hs } => {
                if !(r0 > &0.0) {
                    v.push(format!("base radius must be positive, got {r0}"));
                }
                if !matches!(grid.layout, GridLayout::LatLong { .. }) {
                    v.push("lat-long perturbed data needs a lat-long grid".into());
                }
                for &(l, m, _) in hs {
                    if l == 0 || l > 4 || m.unsigned_abs() as usize > l {
                        v.push(format!("harmonic (l, m) = ({l}, {m}) out of range (1 <= l <= 4, |m| <= l)"));
                    }
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

/// State of one flow: time, graph values φ, and the run's fixed ingredients.
#[derive(Clone)]
pub struct FlowState {
    pub t: f64,
    pub steps: u64,
    pub phi: Vec<f64>,
    pub model: Model,
    pub grid: Arc<SphereGrid>,
    pub f: Arc<dyn CurvatureFunction>,
}

impl std::fmt::Debug for FlowState {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("FlowState")
            .field("t", &self.t)
            .field("steps", &self.steps)
            .field("model", &self.model)
            .field("f", &self.f.name())
            .finish()
    }
}

impl FlowState {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn geometry(&self) -> Result<GeometryFields> {
        geometry::shape_operator(&self.grid, &self.phi, self.model)
    }

    /// Model radius per node.
    pub fn u_field(&self) -> Vec<f64> {
        geometry::u_from_phi(self.model, &self.phi)
    }

    /// Hyperbolic radial distance per node (converts in the ball model).
    pub fn polar_radius_field(&self) -> Vec<f64> {
        self.phi.iter().map(|&p| self.model.polar_radius_of_phi(p)).collect()
    }
}

/// Builds the initial state at t = 0 and rejects inadmissible data.
pub fn init(
    grid: Arc<SphereGrid>,
    model: Model,
    f: Arc<dyn CurvatureFunction>,
    data: &InitialData,
) -> Result<FlowState> {
    data.validate(&grid)?;
    if f.dim() != grid.dim() {
        return Err(Error::config(format!(
            "curvature function has n = {}, grid has n = {}",
            f.dim(),
            grid.dim()
        )));
    }
    let u0 = grid.fill(|t, l| data.profile(t, l));
    if let Model::Ball = model {
        if let Some(bad) = u0.iter().find(|&&u| !(u > 0.0 && u < 2.0)) {
            return Err(Error::Domain(format!("initial ball radius {bad} outside (0, 2)")));
        }
    }
    let phi = geometry::phi_from_u(model, &u0)?;
    let state = FlowState { t: 0.0, steps: 0, phi, model, grid, f };
    // reject data whose curvatures start outside (or within the margin of) Γ
    let geo = state.geometry()?;
    geometry::flow_speed(&geo, &*state.f).map_err(|e| at_time(e, 0.0))?;
    Ok(state)
}

fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::Admissibility { nodes, detail, .. } => Error::Admissibility { t, nodes, detail },
        other => other,
    }
}

/// CFL-limited step proposal: clamp(cfl · h² / D_max, dt_min, dt_max) with
/// D_max the diffusivity bound; lat-long grids weight D per row by the
/// metric factor 1/h_θ² + 1/(sin θ h_λ)².
pub fn adaptive_dt(state: &FlowState, control: &StepControl) -> Result<f64> {
    let geo = state.geometry()?;
    let raw = unclamped_dt(state, &geo, control)?;
    Ok(raw.clamp(control.dt_min, control.dt_max))
}

fn unclamped_dt(state: &FlowState, geo: &GeometryFields, control: &StepControl) -> Result<f64> {
    match state.grid.layout {
        GridLayout::Axisym { .. } => {
            let d = geometry::diffusivity_bound(geo, &*state.f).map_err(|e| at_time(e, state.t))?;
            let h = state.grid.spacing();
            Ok(control.cfl * h * h / d)
        }
        GridLayout::LatLong { n_theta, n_lambda } => {
            let dfield =
                geometry::diffusivity_field(geo, &*state.f).map_err(|e| at_time(e, state.t))?;
            let ht = state.grid.spacing();
            let hl = state.grid.lambda_spacing();
            let mut rate = 0.0_f64;
            for row in 0..n_theta {
                let s = state.grid.sin_theta_row(row);
                let metric = 1.0 / (ht * ht) + 1.0 / (s * s * hl * hl);
                for col in 0..n_lambda {
                    rate = rate.max(dfield[row * n_lambda + col] * metric);
                }
            }
            Ok(control.cfl / rate)
        }
    }
}

/// One classical RK4 step of size dt. The state is untouched on error; the
/// error carries the failing time and stage.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config(format!("step size must be positive, got {dt}")));
    }
    let stage_speed = |phi: &[f64], stage: usize| -> Result<Vec<f64>> {
        let geo = geometry::shape_operator(&state.grid, phi, state.model)?;
        geometry::flow_speed(&geo, &*state.f).map_err(|e| {
            let e = at_time(e, state.t);
            if let Error::Admissibility { t, nodes, detail } = e {
                Error::Admissibility { t, nodes, detail: format!("RK4 stage {stage}: {detail}") }
            } else {
                e
            }
        })
    };

    let n = state.phi.len();
    let k1 = stage_speed(&state.phi, 1)?;
    let mut work = vec![0.0; n];

    for i in 0..n {
        work[i] = state.phi[i] + 0.5 * dt * k1[i];
    }
    let k2 = stage_speed(&work, 2)?;

    for i in 0..n {
        work[i] = state.phi[i] + 0.5 * dt * k2[i];
    }
    let k3 = stage_speed(&work, 3)?;

    for i in 0..n {
        work[i] = state.phi[i] + dt * k3[i];
    }
    let k4 = stage_speed(&work, 4)?;

    let mut phi_new = vec![0.0; n];
    let sixth = dt / 6.0;
    for i in 0..n {
        phi_new[i] = state.phi[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if !(phi_new[i] < state.model.phi_sup()) {
            return Err(Error::Numerics {
                node: i,
                detail: format!("phi = {} left the model range", phi_new[i]),
            });
        }
    }

    Ok(FlowState {
        t: state.t + dt,
        steps: state.steps + 1,
        phi: phi_new,
        model: state.model,
        grid: Arc::clone(&state.grid),
        f: Arc::clone(&state.f),
    })
}

/// Observer callback: read-only state plus the step size that produced it.
pub trait Observer {
    fn observe(&mut self, state: &FlowState, last_dt: f64) -> Result<()>;
}

impl<F: FnMut(&FlowState, f64) -> Result<()>> Observer for F {
    fn observe(&mut self, state: &FlowState, last_dt: f64) -> Result<()> {
        self(state, last_dt)
    }
}

/// Integrates to t_end, landing exactly on the output cadence and invoking
/// every observer there (including t = 0 and t_end). Recorded times are
/// strictly increasing by construction.
pub fn run(
    state: FlowState,
    control: &StepControl,
    observers: &mut [&mut dyn Observer],
) -> Result<FlowState> {
    control.validate()?;
    let mut st = state;
    for obs in observers.iter_mut() {
        obs.observe(&st, 0.0)?;
    }
    let cadence = control.output_every;
    let snap_tol = 1e-12 * control.t_end.max(1.0);
    while st.t < control.t_end - snap_tol {
        let proposal = adaptive_dt(&st, control)?;
        // next output time strictly ahead of t
        let k = (st.t / cadence + 1e-9).floor() + 1.0;
        let t_next = (k * cadence).min(control.t_end);
        let dt = proposal.min(t_next - st.t).max(0.0);
        if dt <= 0.0 {
            return Err(Error::Numerics {
                node: 0,
                detail: format!("step collapsed to {dt} at t = {}", st.t),
            });
        }
        let mut new_state = step(&st, dt)?;
        let landed = (new_state.t - t_next).abs() <= snap_tol;
        if landed {
            new_state.t = t_next;
            for obs in observers.iter_mut() {
                obs.observe(&new_state, dt)?;
            }
        }
        st = new_state;
    }
    Ok(st)
}

/// Fixed-step integration (no CFL control), landing exactly on t_end.
/// Used by the sphere validation command and the temporal-order study.
pub fn run_fixed_dt(state: FlowState, dt: f64, t_end: f64) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::config(format!("step size must be positive, got {dt}")));
    }
    if t_end == 0.0 {
        return Ok(state);
    }
    let steps = (t_end / dt).round().max(1.0);
    let dt_eff = t_end / steps;
    let mut st = state;
    for _ in 0..steps as u64 {
        st = step(&st, dt_eff)?;
    }
    st.t = t_end;
    Ok(st)
}

/// Exact sphere solution r(t) = arcsinh(sinh r₀ e^{t/n}), evaluated in log
/// space so large t never overflows: for large arguments
/// r = t/n + log(2 sinh r₀).
pub fn sphere_exact(r0: f64, n: usize, t: f64) -> f64 {
    if t == 0.0 {
        return r0;
    }
    let log_x = r0.sinh().ln() + t / n as f64;
    if log_x > 1e8_f64.ln() {
        log_x + std::f64::consts::LN_2
    } else {
        log_x.exp().asinh()
    }
}
