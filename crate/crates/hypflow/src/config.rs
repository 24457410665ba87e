//! Run configuration: a strict, versioned key = value text format.
//!
//! The schema key `hypflow-config v1` must be present. Parsing validates
//! every field and reports the complete list of violations, not just the
//! first. `serialize` emits keys in a fixed canonical order so that
//! parse → serialize → parse is the identity.

use crate::curvature::{self, CurvatureFunction, FunctionKind};
use crate::error::{Error, Result};
use crate::flow::{FlowState, InitialData, StepControl};
use crate::geometry::Model;
use crate::grid::SphereGrid;
use std::collections::BTreeMap;
use std::sync::Arc;

pub const SCHEMA: &str = "hypflow-config v1";

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Axisym { nodes: usize },
    LatLong { n_theta: usize, n_lambda: usize },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub model: Model,
    pub kind: FunctionKind,
    pub grid: GridSpec,
    pub initial: InitialData,
    pub t_end: f64,
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub output_every: f64,
    /// 0 disables snapshots; otherwise a multiple of `output_every`.
    pub snapshot_every: f64,
    /// Seed for randomized property suites only; the solver is deterministic.
    pub seed: u64,
    pub rate_window: Option<(f64, f64)>,
    pub rate_quantities: Vec<String>,
}

impl RunConfig {
    pub fn sphere(n: usize, r0: f64, t_end: f64) -> Self {
        RunConfig {
            n,
            model: Model::Polar,
            kind: FunctionKind::MeanCurvature,
            grid: GridSpec::Axisym { nodes: 201 },
            initial: InitialData::Sphere { r0 },
            t_end,
            cfl: 0.2,
            dt_min: 1e-9,
            dt_max: 0.05 * n as f64,
            output_every: 0.1,
            snapshot_every: 0.0,
            seed: 42,
            rate_window: None,
            rate_quantities: default_rate_quantities(),
        }
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            cfl: self.cfl,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            t_end: self.t_end,
            output_every: self.output_every,
        }
    }

    pub fn build_grid(&self) -> Result<SphereGrid> {
        match self.grid {
            GridSpec::Axisym { nodes } => SphereGrid::axisym(self.n, nodes),
            GridSpec::LatLong { n_theta, n_lambda } => {
                if self.n != 2 {
                    return Err(Error::config("lat-long grids require n = 2"));
                }
                SphereGrid::lat_long(n_theta, n_lambda)
            }
        }
    }

    pub fn build_function(&self) -> Result<Box<dyn CurvatureFunction>> {
        curvature::make_function(self.kind, self.n)
    }

    pub fn build_state(&self) -> Result<FlowState> {
        let grid = Arc::new(self.build_grid()?);
        let f: Arc<dyn CurvatureFunction> = Arc::from(self.build_function()?);
        crate::flow::init(grid, self.model, f, &self.initial)
    }

    /// Default fit window [2n, min(5n, t_end)].
    pub fn effective_rate_window(&self) -> (f64, f64) {
        self.rate_window
            .unwrap_or((2.0 * self.n as f64, (5.0 * self.n as f64).min(self.t_end)))
    }

    /// Canonical serialization; stable key order, full float precision.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("schema = {SCHEMA}\n"));
        out.push_str(&format!("n = {}\n", self.n));
        out.push_str(&format!("model = {}\n", self.model.name()));
        match self.kind {
            FunctionKind::MeanCurvature => out.push_str("curvature = mean\n"),
            FunctionKind::GeometricMean => out.push_str("curvature = geometric\n"),
            FunctionKind::PowerMeanSigmaK(k) => {
                out.push_str("curvature = sigma-k\n");
                out.push_str(&format!("sigma_k = {k}\n"));
            }
        }
        match self.grid {
            GridSpec::Axisym { nodes } => {
                out.push_str("grid = axisym\n");
                out.push_str(&format!("grid_nodes = {nodes}\n"));
            }
            GridSpec::LatLong { n_theta, n_lambda } => {
                out.push_str("grid = latlong\n");
                out.push_str(&format!("grid_ntheta = {n_theta}\n"));
                out.push_str(&format!("grid_nlambda = {n_lambda}\n"));
            }
        }
        match &self.initial {
            InitialData::Sphere { r0 } => {
                out.push_str("initial = sphere\n");
                out.push_str(&format!("radius = {r0}\n"));
            }
            InitialData::AxisymPerturbed { r0, coeffs } => {
                out.push_str("initial = axisym-perturbed\n");
                out.push_str(&format!("radius = {r0}\n"));
                let mut sorted = coeffs.clone();
                sorted.sort_by_key(|&(l, _)| l);
                for (l, a) in sorted {
                    out.push_str(&format!("perturb_l{l} = {a}\n"));
                }
            }
            InitialData::LatLongPerturbed { r0, harmonics } => {
                out.push_str("initial = latlong-perturbed\n");
                out.push_str(&format!("radius = {r0}\n"));
                let mut sorted = harmonics.clone();
                sorted.sort_by_key(|&(l, m, _)| (l, m));
                for (l, m, a) in sorted {
                    if m >= 0 {
                        out.push_str(&format!("perturb_y{l}_{m} = {a}\n"));
                    } else {
                        out.push_str(&format!("perturb_y{l}_m{} = {a}\n", -m));
                    }
                }
            }
        }
        out.push_str(&format!("t_end = {}\n", self.t_end));
        out.push_str(&format!("cfl = {}\n", self.cfl));
        out.push_str(&format!("dt_min = {}\n", self.dt_min));
        out.push_str(&format!("dt_max = {}\n", self.dt_max));
        out.push_str(&format!("output_every = {}\n", self.output_every));
        out.push_str(&format!("snapshot_every = {}\n", self.snapshot_every));
        out.push_str(&format!("seed = {}\n", self.seed));
        if let Some((a, b)) = self.rate_window {
            out.push_str(&format!("rate_window = {a}:{b}\n"));
        }
        out.push_str(&format!("rate_quantities = {}\n", self.rate_quantities.join(",")));
        out
    }
}

pub fn default_rate_quantities() -> Vec<String> {
    vec!["umbil_deficit".into(), "grad_sup".into(), "resc_osc".into()]
}

/// Parses and validates configuration text. In strict mode unknown keys are
/// violations; otherwise they are ignored.
pub fn parse_config(text: &str, strict: bool) -> Result<RunConfig> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut violations: Vec<String> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                let key = k.trim().to_string();
                if map.insert(key.clone(), v.trim().to_string()).is_some() {
                    violations.push(format!("line {}: duplicate key '{key}'", lineno + 1));
                }
            }
            None => violations.push(format!("line {}: expected key = value", lineno + 1)),
        }
    }

    match map.get("schema") {
        Some(s) if s == SCHEMA => {}
        Some(s) => violations.push(format!("unsupported schema '{s}', expected '{SCHEMA}'")),
        None => violations.push(format!("missing schema key (expected 'schema = {SCHEMA}')")),
    }

    let mut used: Vec<&str> = vec!["schema"];

    let mut get = |key: &'static str| -> Option<String> {
        used.push(key);
        map.get(key).cloned()
    };

    let parse_f64 = |violations: &mut Vec<String>, key: &'static str, v: Option<String>, default: Option<f64>| -> f64 {
        match v {
            Some(s) => s.parse::<f64>().unwrap_or_else(|_| {
                violations.push(format!("{key}: not a number: '{s}'"));
                f64::NAN
            }),
            None => match default {
                Some(d) => d,
                None => {
                    violations.push(format!("missing required key '{key}'"));
                    f64::NAN
                }
            },
        }
    };

    // n
    let n = match get("n") {
        Some(s) => s.parse::<usize>().unwrap_or_else(|_| {
            violations.push(format!("n: not an integer: '{s}'"));
            0
        }),
        None => {
            violations.push("missing required key 'n'".into());
            0
        }
    };
    if n != 0 && !(2..=8).contains(&n) {
        violations.push(format!("n must be in 2..=8, got {n}"));
    }

    // model
    let model = match get("model").as_deref() {
        None | Some("polar") => Model::Polar,
        Some("ball") => Model::Ball,
        Some(other) => {
            violations.push(format!("model must be polar|ball, got '{other}'"));
            Model::Polar
        }
    };

    // curvature function
    let sigma_k = get("sigma_k");
    let kind = match get("curvature").as_deref() {
        None | Some("mean") => {
            if sigma_k.is_some() {
                violations.push("sigma_k given but curvature is not sigma-k".into());
            }
            FunctionKind::MeanCurvature
        }
        Some("geometric") => {
            if sigma_k.is_some() {
                violations.push("sigma_k given but curvature is not sigma-k".into());
            }
            FunctionKind::GeometricMean
        }
        Some("sigma-k") => match sigma_k.as_deref().map(|s| s.parse::<usize>()) {
            Some(Ok(k)) => {
                if n != 0 && !(1..=n).contains(&k) {
                    violations.push(format!("sigma_k must be in 1..={n}, got {k}"));
                }
                FunctionKind::PowerMeanSigmaK(k.max(1))
            }
            Some(Err(_)) => {
                violations.push("sigma_k: not an integer".into());
                FunctionKind::PowerMeanSigmaK(1)
            }
            None => {
                violations.push("curvature = sigma-k requires the sigma_k key".into());
                FunctionKind::PowerMeanSigmaK(1)
            }
        },
        Some(other) => {
            let known: Vec<&str> = curvature::REGISTRY.iter().map(|e| e.name).collect();
            violations.push(format!("unknown curvature '{other}', expected one of {known:?}"));
            FunctionKind::MeanCurvature
        }
    };

    // grid
    let parse_usize = |violations: &mut Vec<String>, key: &str, v: Option<String>, default: usize| -> usize {
        match v {
            Some(s) => s.parse::<usize>().unwrap_or_else(|_| {
                violations.push(format!("{key}: not an integer: '{s}'"));
                default
            }),
            None => default,
        }
    };
    let grid_kind = get("grid");
    let g_nodes = get("grid_nodes");
    let g_nt = get("grid_ntheta");
    let g_nl = get("grid_nlambda");
    let grid = match grid_kind.as_deref() {
        None | Some("axisym") => {
            for (k, v) in [("grid_ntheta", &g_nt), ("grid_nlambda", &g_nl)] {
                if v.is_some() {
                    violations.push(format!("{k} given but grid is axisym"));
                }
            }
            let nodes = parse_usize(&mut violations, "grid_nodes", g_nodes, 201);
            if nodes < 16 {
                violations.push(format!("grid_nodes must be at least 16, got {nodes}"));
            }
            GridSpec::Axisym { nodes }
        }
        Some("latlong") => {
            if g_nodes.is_some() {
                violations.push("grid_nodes given but grid is latlong".into());
            }
            if n != 0 && n != 2 {
                violations.push(format!("latlong grids require n = 2, got n = {n}"));
            }
            let nt = parse_usize(&mut violations, "grid_ntheta", g_nt, 32);
            let nl = parse_usize(&mut violations, "grid_nlambda", g_nl, 64);
            if nt < 8 {
                violations.push(format!("grid_ntheta must be at least 8, got {nt}"));
            }
            if nl < 8 || nl % 2 != 0 {
                violations.push(format!("grid_nlambda must be even and at least 8, got {nl}"));
            }
            GridSpec::LatLong { n_theta: nt, n_lambda: nl }
        }
        Some(other) => {
            violations.push(format!("grid must be axisym|latlong, got '{other}'"));
            GridSpec::Axisym { nodes: 201 }
        }
    };

    // initial data
    let radius = parse_f64(&mut violations, "radius", get("radius"), None);
    let initial_kind = get("initial");
    let mut perturb_l: Vec<(usize, f64)> = Vec::new();
    let mut perturb_y: Vec<(usize, i32, f64)> = Vec::new();
    let mut perturb_keys: Vec<String> = Vec::new();
    for (k, v) in map.iter() {
        if let Some(rest) = k.strip_prefix("perturb_l") {
            perturb_keys.push(k.clone());
            match (rest.parse::<usize>(), v.parse::<f64>()) {
                (Ok(l), Ok(a)) => perturb_l.push((l, a)),
                _ => violations.push(format!("bad perturbation entry '{k} = {v}'")),
            }
        } else if let Some(rest) = k.strip_prefix("perturb_y") {
            perturb_keys.push(k.clone());
            let parts: Vec<&str> = rest.split('_').collect();
            let parsed = if parts.len() == 2 {
                let l = parts[0].parse::<usize>().ok();
                let m = if let Some(neg) = parts[1].strip_prefix('m') {
                    neg.parse::<i32>().ok().map(|x| -x)
                } else {
                    parts[1].parse::<i32>().ok()
                };
                l.zip(m).zip(v.parse::<f64>().ok())
            } else {
                None
            };
            match parsed {
                Some(((l, m), a)) => perturb_y.push((l, m, a)),
                None => violations.push(format!("bad harmonic entry '{k} = {v}'")),
            }
        }
    }
    perturb_l.sort_by_key(|&(l, _)| l);
    perturb_y.sort_by_key(|&(l, m, _)| (l, m));

    let initial = match initial_kind.as_deref() {
        None | Some("sphere") => {
            if !perturb_keys.is_empty() {
                violations.push("perturb_* keys given but initial is sphere".into());
            }
            InitialData::Sphere { r0: radius }
        }
        Some("axisym-perturbed") => {
            if !perturb_y.is_empty() {
                violations.push("perturb_y* keys belong to latlong-perturbed data".into());
            }
            if perturb_l.is_empty() {
                violations.push("axisym-perturbed data needs at least one perturb_l<l> key".into());
            }
            for &(l, _) in &perturb_l {
                if l == 0 || l > 12 {
                    violations.push(format!("perturb_l{l}: mode must satisfy 1 <= l <= 12"));
                }
            }
            InitialData::AxisymPerturbed { r0: radius, coeffs: perturb_l.clone() }
        }
        Some("latlong-perturbed") => {
            if !perturb_l.is_empty() {
                violations.push("perturb_l* keys belong to axisym-perturbed data".into());
            }
            if perturb_y.is_empty() {
                violations.push("latlong-perturbed data needs at least one perturb_y<l>_<m> key".into());
            }
            for &(l, m, _) in &perturb_y {
                if l == 0 || l > 4 || m.unsigned_abs() as usize > l {
                    violations.push(format!("perturb_y{l}_{m}: need 1 <= l <= 4 and |m| <= l"));
                }
            }
            InitialData::LatLongPerturbed { r0: radius, harmonics: perturb_y.clone() }
        }
        Some(other) => {
            violations.push(format!(
                "initial must be sphere|axisym-perturbed|latlong-perturbed, got '{other}'"
            ));
            InitialData::Sphere { r0: radius }
        }
    };

    if radius.is_finite() {
        if !(radius > 0.0) {
            violations.push(format!("radius must be positive, got {radius}"));
        }
        if model == Model::Ball && radius >= 2.0 {
            violations.push(format!("ball-model radius must be in (0, 2), got {radius}"));
        }
    }

    // stepping
    let t_end = parse_f64(&mut violations, "t_end", get("t_end"), None);
    let cfl = parse_f64(&mut violations, "cfl", get("cfl"), Some(0.2));
    let dt_min = parse_f64(&mut violations, "dt_min", get("dt_min"), Some(1e-9));
    let dt_max_default = if n != 0 { 0.05 * n as f64 } else { 0.1 };
    let dt_max = parse_f64(&mut violations, "dt_max", get("dt_max"), Some(dt_max_default));
    let output_every = parse_f64(&mut violations, "output_every", get("output_every"), Some(0.1));
    let snapshot_every = parse_f64(&mut violations, "snapshot_every", get("snapshot_every"), Some(0.0));

    if t_end.is_finite() && !(t_end > 0.0) {
        violations.push(format!("t_end must be positive, got {t_end}"));
    }
    if cfl.is_finite() && !(cfl > 0.0 && cfl <= 1.0) {
        violations.push(format!("cfl must be in (0, 1], got {cfl}"));
    }
    if dt_min.is_finite() && dt_max.is_finite() && !(dt_min > 0.0 && dt_min <= dt_max) {
        violations.push(format!("need 0 < dt_min <= dt_max, got {dt_min} and {dt_max}"));
    }
    if output_every.is_finite() && !(output_every > 0.0) {
        violations.push(format!("output_every must be positive, got {output_every}"));
    }
    if snapshot_every.is_finite() && snapshot_every != 0.0 {
        if snapshot_every < 0.0 {
            violations.push(format!("snapshot_every must be >= 0, got {snapshot_every}"));
        } else if output_every.is_finite() && output_every > 0.0 {
            let ratio = snapshot_every / output_every;
            if (ratio - ratio.round()).abs() > 1e-9 {
                violations
                    .push("snapshot_every must be a multiple of output_every".into());
            }
        }
    }

    // seed
    let seed = match get("seed") {
        Some(s) => s.parse::<u64>().unwrap_or_else(|_| {
            violations.push(format!("seed: not an integer: '{s}'"));
            42
        }),
        None => 42,
    };

    // rate fits
    let rate_window = match get("rate_window") {
        Some(s) => match s.split_once(':') {
            Some((a, b)) => match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                (Ok(a), Ok(b)) if a < b => Some((a, b)),
                (Ok(a), Ok(b)) => {
                    violations.push(format!("rate_window must satisfy a < b, got {a}:{b}"));
                    None
                }
                _ => {
                    violations.push(format!("rate_window: expected a:b, got '{s}'"));
                    None
                }
            },
            None => {
                violations.push(format!("rate_window: expected a:b, got '{s}'"));
                None
            }
        },
        None => None,
    };
    let rate_quantities = match get("rate_quantities") {
        Some(s) => {
            let qs: Vec<String> =
                s.split(',').map(|q| q.trim().to_string()).filter(|q| !q.is_empty()).collect();
            for q in &qs {
                if !crate::diagnostics::CSV_COLUMNS.contains(&q.as_str()) {
                    violations.push(format!("rate_quantities: unknown column '{q}'"));
                }
            }
            qs
        }
        None => default_rate_quantities(),
    };

    // strict mode: reject unknown keys
    if strict {
        for key in map.keys() {
            let known = used.contains(&key.as_str()) || perturb_keys.contains(key);
            if !known {
                violations.push(format!("unknown key '{key}' (strict mode)"));
            }
        }
    }

    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }

    Ok(RunConfig {
        n,
        model,
        kind,
        grid,
        initial,
        t_end,
        cfl,
        dt_min,
        dt_max,
        output_every,
        snapshot_every,
        seed,
        rate_window,
        rate_quantities,
    })
}
