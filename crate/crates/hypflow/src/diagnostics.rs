//! Monitored quantities, exponential-rate fits, and comparison/refinement
//! studies.
//!
//! Per record the series carries sup/inf of the hyperbolic radius u and of
//! ũ = u − t/n, the gradient norm and its e^{t/n} rescaling, the umbilicity
//! deficit sup|κ̌_i − 1|, the bounded combination χ̃ = v e^{t/n}/sinh u, the
//! range of F(κ̌), and the rescaled ball radius (u_ball − 2) e^{t/n}. All
//! reductions run in fixed node order so reruns are bit-identical.

use crate::error::{Error, Result};
use crate::flow::{FlowState, Observer};
use crate::geometry;

/// Exact column order of the series CSV.
pub const CSV_COLUMNS: [&str; 16] = [
    "t",
    "dt",
    "u_sup",
    "u_inf",
    "utilde_sup",
    "utilde_inf",
    "grad_sup",
    "grad_scaled_sup",
    "umbil_deficit",
    "chi_tilde_sup",
    "chi_tilde_inf",
    "F_sup",
    "F_inf",
    "resc_sup",
    "resc_inf",
    "resc_osc",
];

#[derive(Debug, Clone, Copy)]
pub struct Record {
    pub t: f64,
    pub dt: f64,
    pub u_sup: f64,
    pub u_inf: f64,
    pub utilde_sup: f64,
    pub utilde_inf: f64,
    pub grad_sup: f64,
    pub grad_scaled_sup: f64,
    pub umbil_deficit: f64,
    pub chi_tilde_sup: f64,
    pub chi_tilde_inf: f64,
    pub f_sup: f64,
    pub f_inf: f64,
    pub resc_sup: f64,
    pub resc_inf: f64,
    pub resc_osc: f64,
}

impl Record {
    pub fn get(&self, column: &str) -> Option<f64> {
        let v = match column {
            "t" => self.t,
            "dt" => self.dt,
            "u_sup" => self.u_sup,
            "u_inf" => self.u_inf,
            "utilde_sup" => self.utilde_sup,
            "utilde_inf" => self.utilde_inf,
            "grad_sup" => self.grad_sup,
            "grad_scaled_sup" => self.grad_scaled_sup,
            "umbil_deficit" => self.umbil_deficit,
            "chi_tilde_sup" => self.chi_tilde_sup,
            "chi_tilde_inf" => self.chi_tilde_inf,
            "F_sup" => self.f_sup,
            "F_inf" => self.f_inf,
            "resc_sup" => self.resc_sup,
            "resc_inf" => self.resc_inf,
            "resc_osc" => self.resc_osc,
            _ => return None,
        };
        Some(v)
    }

    fn to_row(self) -> [f64; 16] {
        [
            self.t,
            self.dt,
            self.u_sup,
            self.u_inf,
            self.utilde_sup,
            self.utilde_inf,
            self.grad_sup,
            self.grad_scaled_sup,
            self.umbil_deficit,
            self.chi_tilde_sup,
            self.chi_tilde_inf,
            self.f_sup,
            self.f_inf,
            self.resc_sup,
            self.resc_inf,
            self.resc_osc,
        ]
    }

    fn from_row(r: [f64; 16]) -> Self {
        Record {
            t: r[0],
            dt: r[1],
            u_sup: r[2],
            u_inf: r[3],
            utilde_sup: r[4],
            utilde_inf: r[5],
            grad_sup: r[6],
            grad_scaled_sup: r[7],
            umbil_deficit: r[8],
            chi_tilde_sup: r[9],
            chi_tilde_inf: r[10],
            f_sup: r[11],
            f_inf: r[12],
            resc_sup: r[13],
            resc_inf: r[14],
            resc_osc: r[15],
        }
    }
}

fn fold_min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn fold_max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// sup over nodes and directions of |κ̌_i − 1|.
pub fn umbilicity_deficit(state: &FlowState) -> Result<f64> {
    Ok(state.geometry()?.max_kappa_check_deviation(1.0))
}

/// (sup, inf) of χ̃ = v e^{t/n}/sinh u, u the hyperbolic radius. Ball-model
/// states convert radii first; the rescaling is evaluated through
/// exp(t/n − log sinh u) so late times cannot overflow.
pub fn chi_tilde(state: &FlowState) -> Result<(f64, f64)> {
    let geo = state.geometry()?;
    Ok(chi_tilde_of(state, &geo))
}

fn chi_tilde_of(state: &FlowState, geo: &geometry::GeometryFields) -> (f64, f64) {
    let n = state.dim() as f64;
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for (i, &p) in state.phi.iter().enumerate() {
        let ln_sinh = state.model.sinh_polar_radius_of_phi(p).ln();
        let chi = geo.v[i] * (state.t / n - ln_sinh).exp();
        sup = sup.max(chi);
        inf = inf.min(chi);
    }
    (sup, inf)
}

/// sup |Du| · e^{t/n} (|Du| = |Dφ|_σ in both models).
pub fn gradient_decay(state: &FlowState) -> Result<f64> {
    let geo = state.geometry()?;
    let g = fold_max(&geo.grad_sq).sqrt();
    Ok(g * (state.t / state.dim() as f64).exp())
}

/// (sup, inf, oscillation) of the rescaled ball radius (u_ball − 2) e^{t/n},
/// evaluated as 2 expm1(φ − φ_sup) e^{t/n} which is stable in both models.
pub fn rescaled_radius(state: &FlowState) -> (f64, f64, f64) {
    let n = state.dim() as f64;
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for &p in &state.phi {
        let delta = p - state.model.phi_sup(); // < 0
        // −2 exp(log(−expm1(δ)) + t/n), grouped in log space
        let val = -2.0 * ((-delta.exp_m1()).ln() + state.t / n).exp();
        sup = sup.max(val);
        inf = inf.min(val);
    }
    (sup, inf, sup - inf)
}

/// (sup, inf) over nodes of F evaluated on the hyperbolic curvatures.
pub fn f_bounds(state: &FlowState) -> Result<(f64, f64)> {
    let geo = state.geometry()?;
    let vals = geometry::f_on_hyperbolic(&geo, &*state.f)?;
    Ok((fold_max(&vals), fold_min(&vals)))
}

/// All monitored quantities of one state, sharing a single geometry build.
pub fn compute_record(state: &FlowState, dt: f64) -> Result<Record> {
    let geo = state.geometry()?;
    let n = state.dim() as f64;
    let u = state.polar_radius_field();
    let u_sup = fold_max(&u);
    let u_inf = fold_min(&u);
    let grad_sup = fold_max(&geo.grad_sq).sqrt();
    let (chi_sup, chi_inf) = chi_tilde_of(state, &geo);
    let fvals = geometry::f_on_hyperbolic(&geo, &*state.f)?;
    let (resc_sup, resc_inf, resc_osc) = rescaled_radius(state);
    let rec = Record {
        t: state.t,
        dt,
        u_sup,
        u_inf,
        utilde_sup: u_sup - state.t / n,
        utilde_inf: u_inf - state.t / n,
        grad_sup,
        grad_scaled_sup: grad_sup * (state.t / n).exp(),
        umbil_deficit: geo.max_kappa_check_deviation(1.0),
        chi_tilde_sup: chi_sup,
        chi_tilde_inf: chi_inf,
        f_sup: fvals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        f_inf: fvals.iter().copied().fold(f64::INFINITY, f64::min),
        resc_sup,
        resc_inf,
        resc_osc,
    };
    for (name, v) in CSV_COLUMNS.iter().zip(rec.to_row()) {
        if !v.is_finite() {
            return Err(Error::Numerics { node: 0, detail: format!("non-finite {name} at t = {}", state.t) });
        }
    }
    Ok(rec)
}

/// Time-indexed monitored quantities; t strictly increasing.
#[derive(Debug, Clone, Default)]
pub struct DiagnosticsSeries {
    pub records: Vec<Record>,
}

impl DiagnosticsSeries {
    pub fn push(&mut self, rec: Record) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(rec.t > last.t) {
                return Err(Error::config(format!(
                    "series times must increase strictly: {} after {}",
                    rec.t, last.t
                )));
            }
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        if !CSV_COLUMNS.contains(&name) {
            return Err(Error::Schema(format!("unknown series column '{name}'")));
        }
        Ok(self.records.iter().map(|r| r.get(name).unwrap()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for rec in &self.records {
            let row = rec.to_row();
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&format!("{v:.17e}"));
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Schema("empty series file".into()))?;
        let expected = CSV_COLUMNS.join(",");
        if header != expected {
            return Err(Error::Schema(format!(
                "series header mismatch:\n  found    {header}\n  expected {expected}"
            )));
        }
        let mut series = DiagnosticsSeries::default();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut row = [0.0_f64; 16];
            let mut parts = line.split(',');
            for (slot, cell) in row.iter_mut().zip(parts.by_ref()) {
                *slot = cell.trim().parse::<f64>().map_err(|e| {
                    Error::Schema(format!("line {}: bad number '{cell}': {e}", lineno + 2))
                })?;
            }
            if parts.next().is_some() {
                return Err(Error::Schema(format!("line {}: too many columns", lineno + 2)));
            }
            series.push(Record::from_row(row))?;
        }
        Ok(series)
    }

    /// ũ bounds frozen from the records in the leading `fraction` of the run.
    ///
    /// The upper bound is the observed max of ũ (the continuum upper envelope
    /// decreases from it). The lower bound uses log(2 sinh u_inf) − t/n, which
    /// is nondecreasing along the flow and sits below inf ũ for all later
    /// times. Both are padded by a small slack for discretization error.
    pub fn freeze_utilde_bounds(&self, fraction: f64, n: usize) -> Result<(f64, f64)> {
        if self.records.is_empty() {
            return Err(Error::config("cannot freeze bounds of an empty series"));
        }
        let t0 = self.records[0].t;
        let t_end = self.records.last().unwrap().t;
        let cutoff = t0 + fraction * (t_end - t0);
        let mut c1 = f64::INFINITY;
        let mut c2 = f64::NEG_INFINITY;
        for rec in &self.records {
            if rec.t > cutoff && c1.is_finite() {
                break;
            }
            let lower = (2.0 * rec.u_inf.sinh()).ln() - rec.t / n as f64;
            c1 = c1.min(lower);
            c2 = c2.max(rec.utilde_sup);
        }
        Ok((c1 - 1e-9, c2 + 1e-9))
    }
}

/// Least-squares exponential rate of a positive series over a time window.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub quantity: String,
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the residuals of log q around the fitted line.
    pub rms: f64,
    pub samples: usize,
}

/// Fits log q(t) = intercept + slope · t over records with t in the window.
///
/// Preconditions: window length ≥ n (the flow's dimension sets the e^{t/n}
/// time scale) and at least 20 samples; all selected samples must be
/// strictly positive.
pub fn fit_rate(
    series: &DiagnosticsSeries,
    quantity: &str,
    window: (f64, f64),
    n: usize,
) -> Result<RateFit> {
    let (ta, tb) = window;
    if !(tb - ta >= n as f64) {
        return Err(Error::config(format!(
            "fit window [{ta}, {tb}] shorter than n = {n}"
        )));
    }
    let q = series.column(quantity)?;
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let mut bad = Vec::new();
    for (rec, &v) in series.records.iter().zip(q.iter()) {
        if rec.t < ta - 1e-12 || rec.t > tb + 1e-12 {
            continue;
        }
        if v <= 0.0 {
            bad.push(rec.t);
        } else {
            ts.push(rec.t);
            logs.push(v.ln());
        }
    }
    if !bad.is_empty() {
        return Err(Error::Fit {
            bad_times: bad,
            detail: format!("non-positive samples of {quantity} in the window"),
        });
    }
    if ts.len() < 20 {
        return Err(Error::config(format!(
            "fit needs at least 20 samples in the window, got {}",
            ts.len()
        )));
    }
    let m = ts.len() as f64;
    let mean_t = ts.iter().sum::<f64>() / m;
    let mean_y = logs.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, y) in ts.iter().zip(logs.iter()) {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let mut ss = 0.0;
    for (t, y) in ts.iter().zip(logs.iter()) {
        let r = y - (intercept + slope * t);
        ss += r * r;
    }
    Ok(RateFit {
        quantity: quantity.to_string(),
        window,
        slope,
        intercept,
        rms: (ss / m).sqrt(),
        samples: ts.len(),
    })
}

/// Report of a three-run nesting check.
#[derive(Debug, Clone)]
pub struct NestingReport {
    pub ok: bool,
    /// (t, node) of the first violation when not nested.
    pub first_violation: Option<(f64, usize)>,
}

/// Strict pointwise nesting lo < mid < hi at every recorded time.
/// Inputs are (t, u-field) samples from runs on identical grids and times.
pub fn nesting_check(
    lo: &[(f64, Vec<f64>)],
    mid: &[(f64, Vec<f64>)],
    hi: &[(f64, Vec<f64>)],
) -> Result<NestingReport> {
    if lo.len() != mid.len() || mid.len() != hi.len() {
        return Err(Error::config("nesting check needs runs recorded at identical times"));
    }
    for ((tl, ul), ((tm, um), (th, uh))) in lo.iter().zip(mid.iter().zip(hi.iter())) {
        if (tl - tm).abs() > 1e-9 || (tm - th).abs() > 1e-9 {
            return Err(Error::config(format!(
                "nesting check time mismatch: {tl} vs {tm} vs {th}"
            )));
        }
        if ul.len() != um.len() || um.len() != uh.len() {
            return Err(Error::config("nesting check needs identical grids"));
        }
        for i in 0..ul.len() {
            if !(ul[i] < um[i] && um[i] < uh[i]) {
                return Ok(NestingReport { ok: false, first_violation: Some((*tl, i)) });
            }
        }
    }
    Ok(NestingReport { ok: true, first_violation: None })
}

/// Outcome of a Richardson refinement estimate over grids h, h/2, h/4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefinementOutcome {
    Order(f64),
    /// Differences vanished (constant data resolves exactly).
    Exact,
    /// Differences non-monotone; no order can be claimed.
    Inconclusive,
}

/// log₂(|q_h − q_{h/2}| / |q_{h/2} − q_{h/4}|).
pub fn refinement_order(q_h: f64, q_h2: f64, q_h4: f64) -> RefinementOutcome {
    let d1 = q_h - q_h2;
    let d2 = q_h2 - q_h4;
    if d1 == 0.0 && d2 == 0.0 {
        return RefinementOutcome::Exact;
    }
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() || d2.abs() >= d1.abs() {
        return RefinementOutcome::Inconclusive;
    }
    RefinementOutcome::Order((d1.abs() / d2.abs()).log2())
}

/// Observer that assembles a [`DiagnosticsSeries`], optionally keeping the
/// full radius field per record for nesting checks.
pub struct Recorder {
    pub series: DiagnosticsSeries,
    pub store_fields: bool,
    pub fields: Vec<(f64, Vec<f64>)>,
}

impl Recorder {
    pub fn new(store_fields: bool) -> Self {
        Self { series: DiagnosticsSeries::default(), store_fields, fields: Vec::new() }
    }
}

impl Observer for Recorder {
    fn observe(&mut self, state: &FlowState, last_dt: f64) -> Result<()> {
        self.series.push(compute_record(state, last_dt)?)?;
        if self.store_fields {
            self.fields.push((state.t, state.polar_radius_field()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{make_function, CurvatureFunction, FunctionKind};
    use crate::flow::{self, sphere_exact, InitialData, StepControl};
    use crate::geometry::Model;
    use crate::grid::SphereGrid;
    use std::sync::Arc;

    fn coth(x: f64) -> f64 {
        x.cosh() / x.sinh()
    }

    fn sphere_state(n: usize, r0: f64) -> FlowState {
        let grid = Arc::new(SphereGrid::axisym(n, 33).unwrap());
        let f: Arc<dyn CurvatureFunction> =
            Arc::from(make_function(FunctionKind::MeanCurvature, n).unwrap());
        flow::init(grid, Model::Polar, f, &InitialData::Sphere { r0 }).unwrap()
    }

    #[test]
    fn deficit_on_spheres() {
        for r0 in [0.6, 1.0, 2.5] {
            let st = sphere_state(2, r0);
            let d = umbilicity_deficit(&st).unwrap();
            assert!((d - (coth(r0) - 1.0)).abs() < 1e-12, "r0 = {r0}");
        }
    }

    #[test]
    fn deficit_of_exactly_umbilic_unit_data_is_zero() {
        // horosphere-like limit: all κ̌ exactly 1
        let st = sphere_state(2, 1.0);
        let mut geo = st.geometry().unwrap();
        for kc in geo.kappa_check.iter_mut() {
            *kc = [1.0, 1.0];
        }
        assert_eq!(geo.max_kappa_check_deviation(1.0), 0.0);
    }

    #[test]
    fn chi_tilde_on_sphere_is_constant() {
        let r0 = 0.8;
        let st = sphere_state(2, r0);
        // t = 0: χ̃ = v / sinh u exactly
        let (sup, inf) = chi_tilde(&st).unwrap();
        assert!((sup - 1.0 / r0.sinh()).abs() < 1e-13);
        assert!((inf - 1.0 / r0.sinh()).abs() < 1e-13);

        let control = StepControl { cfl: 0.2, dt_min: 1e-9, dt_max: 0.02, t_end: 4.0, output_every: 0.5 };
        let mut rec = Recorder::new(false);
        let mut obs: [&mut dyn flow::Observer; 1] = [&mut rec];
        flow::run(st, &control, &mut obs).unwrap();
        for r in &rec.series.records {
            assert!((r.chi_tilde_sup - 1.0 / r0.sinh()).abs() < 1e-9, "t = {}", r.t);
            assert!((r.chi_tilde_inf - 1.0 / r0.sinh()).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_decay_examples() {
        // sphere: exactly zero
        let st = sphere_state(2, 1.0);
        assert_eq!(gradient_decay(&st).unwrap(), 0.0);

        // ℓ = 1 perturbation at t = 0: sup|Du| ≈ a / sinh r0
        let grid = Arc::new(SphereGrid::axisym(2, 201).unwrap());
        let f: Arc<dyn CurvatureFunction> =
            Arc::from(make_function(FunctionKind::MeanCurvature, 2).unwrap());
        let a = 0.01;
        let st = flow::init(
            grid,
            Model::Polar,
            f,
            &InitialData::AxisymPerturbed { r0: 1.0, coeffs: vec![(1, a)] },
        )
        .unwrap();
        let g = gradient_decay(&st).unwrap();
        assert!((g - a / 1.0_f64.sinh()).abs() < 3.0 * a * a, "sup|Du| = {g}");
    }

    #[test]
    fn rescaled_radius_on_sphere() {
        let r0 = 1.0;
        let st = sphere_state(2, r0);
        let (sup, inf, osc) = rescaled_radius(&st);
        assert_eq!(osc, 0.0);
        // t = 0: u_ball − 2 = 2 tanh(r0/2) − 2
        let expect = 2.0 * (0.5 * r0).tanh() - 2.0;
        assert!((sup - expect).abs() < 1e-14);
        assert!((inf - expect).abs() < 1e-14);
    }

    #[test]
    fn f_bounds_on_sphere_decrease_to_n() {
        let r0 = 0.8;
        let st = sphere_state(2, r0);
        let (sup, inf) = f_bounds(&st).unwrap();
        assert!((sup - 2.0 * coth(r0)).abs() < 1e-12);
        assert!((inf - 2.0 * coth(r0)).abs() < 1e-12);

        let control = StepControl { cfl: 0.2, dt_min: 1e-9, dt_max: 0.05, t_end: 10.0, output_every: 0.5 };
        let mut rec = Recorder::new(false);
        let mut obs: [&mut dyn flow::Observer; 1] = [&mut rec];
        flow::run(st, &control, &mut obs).unwrap();
        let mut prev = f64::INFINITY;
        for r in &rec.series.records {
            let expect = 2.0 * coth(sphere_exact(r0, 2, r.t));
            assert!((r.f_sup - expect).abs() <= 1e-8 * expect, "t = {}", r.t);
            assert!(r.f_inf > 0.0);
            assert!(r.f_sup <= prev + 1e-12);
            prev = r.f_sup;
        }
        // t → ∞ limit is n
        let last = rec.series.records.last().unwrap();
        assert!((last.f_sup - 2.0).abs() < 10.0 * (-10.0_f64).exp() * 2.0 + 2e-4);
    }

    #[test]
    fn fit_rate_recovers_exact_exponential() {
        let mut series = DiagnosticsSeries::default();
        for i in 0..60 {
            let t = 0.25 * i as f64;
            let mut rec = Record::from_row([0.0; 16]);
            rec.t = t;
            rec.umbil_deficit = 3.0 * (-0.5 * t).exp();
            series.push(rec).unwrap();
        }
        let fit = fit_rate(&series, "umbil_deficit", (2.0, 14.0), 2).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0_f64.ln()).abs() < 1e-12);
        assert!(fit.rms < 1e-13);
        assert!(fit.samples >= 20);
    }

    #[test]
    fn fit_rate_preconditions() {
        let mut series = DiagnosticsSeries::default();
        for i in 0..40 {
            let t = 0.5 * i as f64;
            let mut rec = Record::from_row([0.0; 16]);
            rec.t = t;
            rec.umbil_deficit = if i == 10 { -1.0 } else { 1.0 };
            series.push(rec).unwrap();
        }
        // window shorter than n
        assert!(fit_rate(&series, "umbil_deficit", (2.0, 3.0), 2).is_err());
        // non-positive sample inside the window
        let err = fit_rate(&series, "umbil_deficit", (2.0, 18.0), 2).unwrap_err();
        match err {
            Error::Fit { bad_times, .. } => assert!((bad_times[0] - 5.0).abs() < 1e-12),
            other => panic!("expected fit error, got {other}"),
        }
        // unknown quantity
        assert!(matches!(
            fit_rate(&series, "nope", (2.0, 18.0), 2),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn sphere_deficit_rate_is_two_over_n() {
        // coth r − 1 ~ 2 e^{-2r}: on the exact sphere the deficit decays at
        // rate 2/n, twice the generic rate
        let st = sphere_state(2, 0.5);
        let control = StepControl { cfl: 0.2, dt_min: 1e-9, dt_max: 0.02, t_end: 10.0, output_every: 0.1 };
        let mut rec = Recorder::new(false);
        let mut obs: [&mut dyn flow::Observer; 1] = [&mut rec];
        flow::run(st, &control, &mut obs).unwrap();
        let fit = fit_rate(&rec.series, "umbil_deficit", (4.0, 10.0), 2).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.01, "slope {}", fit.slope);
        assert!(fit.rms < 0.01);
    }

    #[test]
    fn utilde_bounds_hold_for_whole_run() {
        let grid = Arc::new(SphereGrid::axisym(2, 101).unwrap());
        let f: Arc<dyn CurvatureFunction> =
            Arc::from(make_function(FunctionKind::MeanCurvature, 2).unwrap());
        let st = flow::init(
            grid,
            Model::Polar,
            f,
            &InitialData::AxisymPerturbed { r0: 1.0, coeffs: vec![(2, 0.05)] },
        )
        .unwrap();
        let control = StepControl { cfl: 0.2, dt_min: 1e-9, dt_max: 0.1, t_end: 8.0, output_every: 0.1 };
        let mut rec = Recorder::new(false);
        let mut obs: [&mut dyn flow::Observer; 1] = [&mut rec];
        flow::run(st, &control, &mut obs).unwrap();
        let (c1, c2) = rec.series.freeze_utilde_bounds(0.05, 2).unwrap();
        for r in &rec.series.records {
            assert!(r.utilde_inf >= c1, "t = {}: {} < {c1}", r.t, r.utilde_inf);
            assert!(r.utilde_sup <= c2, "t = {}: {} > {c2}", r.t, r.utilde_sup);
        }
    }

    #[test]
    fn nesting_examples() {
        let control = StepControl { cfl: 0.2, dt_min: 1e-9, dt_max: 0.05, t_end: 2.0, output_every: 0.25 };
        let mut runs = Vec::new();
        for r0 in [0.5, 1.0, 1.5] {
            let st = sphere_state(2, r0);
            let mut rec = Recorder::new(true);
            let mut obs: [&mut dyn flow::Observer; 1] = [&mut rec];
            flow::run(st, &control, &mut obs).unwrap();
            runs.push(rec.fields);
        }
        let rep = nesting_check(&runs[0], &runs[1], &runs[2]).unwrap();
        assert!(rep.ok);
        // identical runs fail the strict check immediately
        let rep = nesting_check(&runs[0], &runs[0], &runs[2]).unwrap();
        assert!(!rep.ok);
        assert_eq!(rep.first_violation.unwrap().0, 0.0);
    }

    #[test]
    fn refinement_order_arithmetic() {
        // synthetic exact h⁴ sequence
        let q = |h: f64| 1.0 + 3.0 * h.powi(4);
        match refinement_order(q(0.1), q(0.05), q(0.025)) {
            RefinementOutcome::Order(p) => assert!((p - 4.0).abs() < 0.1),
            other => panic!("{other:?}"),
        }
        assert_eq!(refinement_order(1.0, 1.0, 1.0), RefinementOutcome::Exact);
        assert_eq!(refinement_order(1.0, 1.1, 1.05), RefinementOutcome::Inconclusive);
    }

    #[test]
    fn csv_round_trip() {
        let st = sphere_state(2, 1.0);
        let control = StepControl { cfl: 0.2, dt_min: 1e-9, dt_max: 0.05, t_end: 1.0, output_every: 0.25 };
        let mut rec = Recorder::new(false);
        let mut obs: [&mut dyn flow::Observer; 1] = [&mut rec];
        flow::run(st, &control, &mut obs).unwrap();
        let csv = rec.series.to_csv();
        let parsed = DiagnosticsSeries::from_csv(&csv).unwrap();
        assert_eq!(parsed.records.len(), rec.series.records.len());
        for (a, b) in parsed.records.iter().zip(rec.series.records.iter()) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.chi_tilde_sup, b.chi_tilde_sup);
        }
        // header tampering is a schema error
        let broken = csv.replacen("u_sup", "usup", 1);
        assert!(matches!(DiagnosticsSeries::from_csv(&broken), Err(Error::Schema(_))));
    }
}
