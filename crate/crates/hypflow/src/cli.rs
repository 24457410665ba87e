//! Command-line interface: configuration parsing, run orchestration, and
//! file emission.
//!
//! Subcommands: run, sphere-test, compare, rates, refine, plotdata.
//! A run's output directory contains exactly the config copy, the series
//! CSV, the rate-report JSON, and (when enabled) snapshots.

use crate::config::{parse_config, RunConfig};
use crate::diagnostics::{
    self, fit_rate, nesting_check, refinement_order, DiagnosticsSeries, RateFit, Recorder,
    RefinementOutcome,
};
use crate::error::{Error, Result};
use crate::flow::{self, FlowState, Observer, StepControl};
use crate::config::GridSpec;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

const USAGE: &str = "\
hypflow - inverse curvature flow runner

USAGE:
  hypflow run --config PATH --out DIR [--workers K] [--strict]
  hypflow sphere-test --n N --r0 R --t-end T --dt DT [--tol TOL] [--order-study]
  hypflow compare LO.cfg MID.cfg HI.cfg [--workers K] [--strict]
  hypflow rates SERIES.csv --quantity COL --window A:B --n N [--out PATH]
  hypflow refine --config PATH --probe NAME [--out PATH] [--strict]
  hypflow plotdata SERIES.csv --out DIR [--columns a,b,c] [--log]

SUBCOMMANDS:
  run          integrate a configured flow; writes config copy, series CSV,
               rate JSON, and optional snapshots into --out
  sphere-test  fixed-step sphere run against the closed-form solution;
               exits nonzero if the max relative error exceeds --tol (1e-8)
  compare      run three nested configurations and verify strict nesting
               at every recorded time
  rates        least-squares exponential rate of a series column over a window
  refine       run a config at grid sizes N, 2N-1, 4N-3 and report the
               observed convergence order of --probe
  plotdata     emit whitespace-delimited (t, value[, log value]) files
               per series column

PROBES (refine):
  u-final-quarter      radius at theta = pi/4 at t_end
  kappa-final-quarter  radial hyperbolic curvature at theta = pi/4 at t_end
  grad-scaled-final    sup|Du| e^{t/n} at t_end
  deficit-final        sup|kappa_check - 1| at t_end
";

/// Entry point; returns the process exit code.
/// 0 = success / all checks passed; 1 = usage or configuration problem;
/// 2 = runtime failure (inadmissible data, numerics) or failed check.
pub fn run_cli(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Schema(_) => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(args: &[String]) -> Result<bool> {
    if args.is_empty() {
        println!("{USAGE}");
        return Err(Error::config("missing subcommand"));
    }
    let (positional, flags, switches) = split_args(&args[1..])?;
    match args[0].as_str() {
        "run" => {
            expect_no_positional(&positional)?;
            let cfg = load_config(&flags, &switches)?;
            let out = required_flag(&flags, "out")?;
            cmd_run(&cfg, Path::new(&out))?;
            Ok(true)
        }
        "sphere-test" => {
            expect_no_positional(&positional)?;
            let n = parse_flag::<usize>(&flags, "n")?;
            let r0 = parse_flag::<f64>(&flags, "r0")?;
            let t_end = parse_flag::<f64>(&flags, "t-end")?;
            let dt = parse_flag::<f64>(&flags, "dt")?;
            let tol = parse_flag_or(&flags, "tol", 1e-8)?;
            cmd_sphere_test(n, r0, t_end, dt, tol, switches.contains("order-study"))
        }
        "compare" => {
            if positional.len() != 3 {
                return Err(Error::config("compare needs exactly three config paths"));
            }
            let workers = parse_flag_or(&flags, "workers", 1usize)?;
            let strict = switches.contains("strict");
            let cfgs: Vec<RunConfig> = positional
                .iter()
                .map(|p| read_config_file(Path::new(p), strict))
                .collect::<Result<_>>()?;
            cmd_compare(&cfgs[0], &cfgs[1], &cfgs[2], workers)
        }
        "rates" => {
            if positional.len() != 1 {
                return Err(Error::config("rates needs exactly one series path"));
            }
            let quantity = required_flag(&flags, "quantity")?;
            let window = parse_window(&required_flag(&flags, "window")?)?;
            let n = parse_flag::<usize>(&flags, "n")?;
            let fit = cmd_rates(Path::new(&positional[0]), &quantity, window, n)?;
            let json = rate_fit_json(&fit);
            println!("{json}");
            if let Some(out) = flags.get("out") {
                fs::write(out, json + "\n").map_err(|e| Error::io(out.clone(), e))?;
            }
            Ok(true)
        }
        "refine" => {
            expect_no_positional(&positional)?;
            let cfg = load_config(&flags, &switches)?;
            let probe = required_flag(&flags, "probe")?;
            let report = cmd_refine(&cfg, &probe)?;
            println!("{report}");
            if let Some(out) = flags.get("out") {
                fs::write(out, report + "\n").map_err(|e| Error::io(out.clone(), e))?;
            }
            Ok(true)
        }
        "plotdata" => {
            if positional.len() != 1 {
                return Err(Error::config("plotdata needs exactly one series path"));
            }
            let out = required_flag(&flags, "out")?;
            let columns = flags
                .get("columns")
                .map(|s| s.split(',').map(|c| c.trim().to_string()).collect::<Vec<_>>());
            cmd_plotdata(
                Path::new(&positional[0]),
                Path::new(&out),
                columns.as_deref(),
                switches.contains("log"),
            )?;
            Ok(true)
        }
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(true)
        }
        other => Err(Error::config(format!("unknown subcommand '{other}'\n\n{USAGE}"))),
    }
}

fn split_args(
    args: &[String],
) -> Result<(Vec<String>, BTreeMap<String, String>, BTreeSet<String>)> {
    const SWITCHES: [&str; 3] = ["strict", "order-study", "log"];
    let mut positional = Vec::new();
    let mut flags = BTreeMap::new();
    let mut switches = BTreeSet::new();
    let mut it = args.iter().peekable();
    while let Some(arg) = it.next() {
        if let Some(name) = arg.strip_prefix("--") {
            if SWITCHES.contains(&name) {
                switches.insert(name.to_string());
            } else {
                let value = it
                    .next()
                    .ok_or_else(|| Error::config(format!("flag --{name} needs a value")))?;
                flags.insert(name.to_string(), value.clone());
            }
        } else {
            positional.push(arg.clone());
        }
    }
    Ok((positional, flags, switches))
}

fn expect_no_positional(positional: &[String]) -> Result<()> {
    if positional.is_empty() {
        Ok(())
    } else {
        Err(Error::config(format!("unexpected argument '{}'", positional[0])))
    }
}

fn required_flag(flags: &BTreeMap<String, String>, name: &str) -> Result<String> {
    flags.get(name).cloned().ok_or_else(|| Error::config(format!("missing flag --{name}")))
}

fn parse_flag<T: std::str::FromStr>(flags: &BTreeMap<String, String>, name: &str) -> Result<T> {
    let raw = required_flag(flags, name)?;
    raw.parse::<T>().map_err(|_| Error::config(format!("--{name}: cannot parse '{raw}'")))
}

fn parse_flag_or<T: std::str::FromStr>(
    flags: &BTreeMap<String, String>,
    name: &str,
    default: T,
) -> Result<T> {
    match flags.get(name) {
        Some(raw) => {
            raw.parse::<T>().map_err(|_| Error::config(format!("--{name}: cannot parse '{raw}'")))
        }
        None => Ok(default),
    }
}

fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::config(format!("--window expects A:B, got '{s}'")))?;
    let a = a.trim().parse::<f64>().map_err(|_| Error::config("--window: bad number"))?;
    let b = b.trim().parse::<f64>().map_err(|_| Error::config("--window: bad number"))?;
    if !(a < b) {
        return Err(Error::config(format!("--window needs A < B, got {a}:{b}")));
    }
    Ok((a, b))
}

fn load_config(flags: &BTreeMap<String, String>, switches: &BTreeSet<String>) -> Result<RunConfig> {
    let path = required_flag(flags, "config")?;
    read_config_file(Path::new(&path), switches.contains("strict"))
}

pub fn read_config_file(path: &Path, strict: bool) -> Result<RunConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config(&text, strict)
}

/// Observer writing grid snapshots at multiples of the snapshot cadence.
struct SnapshotWriter {
    every: f64,
    out_dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Observer for SnapshotWriter {
    fn observe(&mut self, state: &FlowState, _dt: f64) -> Result<()> {
        if self.every <= 0.0 {
            return Ok(());
        }
        let k = state.t / self.every;
        if (k - k.round()).abs() > 1e-9 {
            return Ok(());
        }
        let u = state.u_field();
        let text = state.grid.snapshot(&[("u", &u), ("phi", &state.phi)])?;
        let path = self.out_dir.join(format!("snapshot_t{:.4}.csv", state.t));
        fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.written.push(path);
        Ok(())
    }
}

/// Executes a configured run and writes its artifacts into `out_dir`.
pub fn cmd_run(cfg: &RunConfig, out_dir: &Path) -> Result<DiagnosticsSeries> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let config_path = out_dir.join("config.txt");
    fs::write(&config_path, cfg.serialize())
        .map_err(|e| Error::io(config_path.display().to_string(), e))?;
    let series_path = out_dir.join("series.csv");

    let state = match cfg.build_state() {
        Ok(s) => s,
        Err(e) => {
            // failed before any stepping: leave a header-only series behind
            let header = diagnostics::CSV_COLUMNS.join(",") + "\n";
            fs::write(&series_path, header)
                .map_err(|io| Error::io(series_path.display().to_string(), io))?;
            return Err(e);
        }
    };

    let control = cfg.step_control();
    let mut recorder = Recorder::new(false);
    let mut snapshots = SnapshotWriter {
        every: cfg.snapshot_every,
        out_dir: out_dir.to_path_buf(),
        written: Vec::new(),
    };
    {
        let mut observers: [&mut dyn Observer; 2] = [&mut recorder, &mut snapshots];
        flow::run(state, &control, &mut observers)?;
    }

    fs::write(&series_path, recorder.series.to_csv())
        .map_err(|e| Error::io(series_path.display().to_string(), e))?;

    let rates_path = out_dir.join("rates.json");
    let json = rates_json(&recorder.series, cfg);
    fs::write(&rates_path, json).map_err(|e| Error::io(rates_path.display().to_string(), e))?;

    Ok(recorder.series)
}

fn json_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ")
}

fn rate_fit_json(fit: &RateFit) -> String {
    format!(
        "{{\"quantity\": \"{}\", \"window\": [{:.17e}, {:.17e}], \"slope\": {:.17e}, \"intercept\": {:.17e}, \"rms\": {:.17e}, \"samples\": {}}}",
        fit.quantity, fit.window.0, fit.window.1, fit.slope, fit.intercept, fit.rms, fit.samples
    )
}

fn rates_json(series: &DiagnosticsSeries, cfg: &RunConfig) -> String {
    let window = cfg.effective_rate_window();
    let mut entries = Vec::new();
    for q in &cfg.rate_quantities {
        match fit_rate(series, q, window, cfg.n) {
            Ok(fit) => entries.push(rate_fit_json(&fit)),
            Err(e) => entries.push(format!(
                "{{\"quantity\": \"{q}\", \"skipped\": \"{}\"}}",
                json_escape(&e.to_string())
            )),
        }
    }
    format!("[\n  {}\n]\n", entries.join(",\n  "))
}

/// Fixed-step sphere run against arcsinh(sinh r₀ e^{t/n}); prints the max
/// relative error and (optionally) the temporal convergence order.
pub fn cmd_sphere_test(
    n: usize,
    r0: f64,
    t_end: f64,
    dt: f64,
    tol: f64,
    order_study: bool,
) -> Result<bool> {
    if t_end < 0.0 {
        return Err(Error::config(format!("t_end must be >= 0, got {t_end}")));
    }
    let err = sphere_error(n, r0, t_end, dt)?;
    println!("sphere-test: n={n} r0={r0} t_end={t_end} dt={dt} max_rel_err={err:.3e}");
    if order_study && t_end > 0.0 {
        let e2 = sphere_error(n, r0, t_end, dt / 2.0)?;
        let e4 = sphere_error(n, r0, t_end, dt / 4.0)?;
        let o1 = (err / e2).log2();
        let o2 = (e2 / e4).log2();
        println!("order-study: dt halvings give observed orders {o1:.2}, {o2:.2}");
    }
    let pass = err <= tol;
    println!("sphere-test: {} (tol {tol:.1e})", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn sphere_error(n: usize, r0: f64, t_end: f64, dt: f64) -> Result<f64> {
    use crate::curvature::{make_function, FunctionKind};
    use crate::geometry::Model;
    use crate::grid::SphereGrid;
    use std::sync::Arc;

    if t_end == 0.0 {
        return Ok(0.0);
    }
    if !(dt > 0.0) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    let grid = Arc::new(SphereGrid::axisym(n, 33)?);
    let f: Arc<dyn crate::curvature::CurvatureFunction> =
        Arc::from(make_function(FunctionKind::MeanCurvature, n)?);
    let mut st = flow::init(grid, Model::Polar, f, &flow::InitialData::Sphere { r0 })?;
    let steps = (t_end / dt).ceil().max(1.0) as u64;
    let dt_eff = t_end / steps as f64;
    let mut worst = 0.0_f64;
    for _ in 0..steps {
        st = flow::step(&st, dt_eff)?;
        let exact = flow::sphere_exact(r0, n, st.t);
        let u = st.u_field()[0];
        worst = worst.max((u - exact).abs() / exact);
    }
    Ok(worst)
}

/// Runs three nested configurations and checks strict pointwise nesting at
/// every recorded time. Non-nested initial data is rejected before running.
pub fn cmd_compare(
    lo: &RunConfig,
    mid: &RunConfig,
    hi: &RunConfig,
    workers: usize,
) -> Result<bool> {
    for (a, b) in [(lo, mid), (lo, hi), (mid, hi)] {
        if a.grid != b.grid || a.n != b.n || a.model != b.model {
            return Err(Error::config("compare needs identical grids, n, and model"));
        }
        if (a.t_end - b.t_end).abs() > 1e-12 || (a.output_every - b.output_every).abs() > 1e-12 {
            return Err(Error::config("compare needs identical t_end and output_every"));
        }
    }
    let states =
        [lo.build_state()?, mid.build_state()?, hi.build_state()?];
    // reject non-nested initial data before any stepping
    let u0: Vec<Vec<f64>> = states.iter().map(|s| s.polar_radius_field()).collect();
    for i in 0..u0[0].len() {
        if !(u0[0][i] < u0[1][i] && u0[1][i] < u0[2][i]) {
            return Err(Error::config(format!(
                "initial data not strictly nested at node {i}: {} / {} / {}",
                u0[0][i], u0[1][i], u0[2][i]
            )));
        }
    }

    let controls: Vec<StepControl> = [lo, mid, hi].iter().map(|c| c.step_control()).collect();
    let mut results: Vec<Option<Result<Vec<(f64, Vec<f64>)>>>> = vec![None, None, None];

    let run_one = |state: FlowState, control: &StepControl| -> Result<Vec<(f64, Vec<f64>)>> {
        let mut rec = Recorder::new(true);
        {
            let mut obs: [&mut dyn Observer; 1] = [&mut rec];
            flow::run(state, control, &mut obs)?;
        }
        Ok(rec.fields)
    };

    if workers >= 2 {
        let mut slots = results.iter_mut();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (state, control) in states.into_iter().zip(controls.iter()) {
                handles.push(scope.spawn(move || run_one(state, control)));
            }
            for h in handles {
                *slots.next().unwrap() = Some(h.join().expect("worker panicked"));
            }
        });
    } else {
        for (slot, (state, control)) in
            results.iter_mut().zip(states.into_iter().zip(controls.iter()))
        {
            *slot = Some(run_one(state, control));
        }
    }

    let mut fields = Vec::new();
    for r in results {
        fields.push(r.unwrap()?);
    }
    let report = nesting_check(&fields[0], &fields[1], &fields[2])?;
    match report.first_violation {
        None => println!("compare: nesting PASS at {} recorded times", fields[0].len()),
        Some((t, node)) => println!("compare: nesting FAIL at t = {t}, node {node}"),
    }
    Ok(report.ok)
}

/// Rate fit of one series column from disk.
pub fn cmd_rates(series_path: &Path, quantity: &str, window: (f64, f64), n: usize) -> Result<RateFit> {
    let text = fs::read_to_string(series_path)
        .map_err(|e| Error::io(series_path.display().to_string(), e))?;
    let series = DiagnosticsSeries::from_csv(&text)?;
    fit_rate(&series, quantity, window, n)
}

/// Runs the configured flow at grid sizes N, 2N−1, 4N−3 and reports the
/// Richardson order of the probe quantity at t_end.
pub fn cmd_refine(cfg: &RunConfig, probe: &str) -> Result<String> {
    let base = match cfg.grid {
        GridSpec::Axisym { nodes } => nodes,
        GridSpec::LatLong { .. } => {
            return Err(Error::config("refine requires an axisym grid"));
        }
    };
    if (base - 1) % 4 != 0 {
        return Err(Error::config(format!(
            "refine probes at theta = pi/4 need (grid_nodes - 1) divisible by 4, got {base}"
        )));
    }
    let sizes = [base, 2 * base - 1, 4 * base - 3];
    let mut values = Vec::new();
    for nodes in sizes {
        let mut c = cfg.clone();
        c.grid = GridSpec::Axisym { nodes };
        let state = c.build_state()?;
        let end = flow::run(state, &c.step_control(), &mut [])?;
        values.push(probe_value(&end, probe)?);
    }
    let outcome = refinement_order(values[0], values[1], values[2]);
    let order_txt = match outcome {
        RefinementOutcome::Order(p) => format!("{p:.3}"),
        RefinementOutcome::Exact => "\"exact\"".into(),
        RefinementOutcome::Inconclusive => "\"inconclusive\"".into(),
    };
    Ok(format!(
        "{{\"probe\": \"{probe}\", \"grids\": [{}, {}, {}], \"values\": [{:.17e}, {:.17e}, {:.17e}], \"order\": {order_txt}}}",
        sizes[0], sizes[1], sizes[2], values[0], values[1], values[2]
    ))
}

fn probe_value(state: &FlowState, probe: &str) -> Result<f64> {
    let quarter = state
        .grid
        .axisym_node_at(std::f64::consts::FRAC_PI_4)
        .ok_or_else(|| Error::config("probe node theta = pi/4 not on this grid"))?;
    match probe {
        "u-final-quarter" => Ok(state.polar_radius_field()[quarter]),
        "kappa-final-quarter" => {
            let geo = state.geometry()?;
            Ok(geo.kappa_check[quarter][0])
        }
        "grad-scaled-final" => diagnostics::gradient_decay(state),
        "deficit-final" => diagnostics::umbilicity_deficit(state),
        other => Err(Error::config(format!(
            "unknown probe '{other}' (see `hypflow help` for the list)"
        ))),
    }
}

/// Emits per-column whitespace-delimited plot files: t, value, and — with
/// `--log`, which requires strictly positive data — log value.
pub fn cmd_plotdata(
    series_path: &Path,
    out_dir: &Path,
    columns: Option<&[String]>,
    log: bool,
) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(series_path)
        .map_err(|e| Error::io(series_path.display().to_string(), e))?;
    let series = DiagnosticsSeries::from_csv(&text)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let default_cols: Vec<String> = diagnostics::CSV_COLUMNS[2..]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let cols: &[String] = columns.unwrap_or(&default_cols);

    let ts = series.column("t")?;
    let mut written = Vec::new();
    for col in cols {
        let vals = series.column(col)?;
        if log {
            if let Some(pos) = vals.iter().position(|&v| v <= 0.0) {
                return Err(Error::config(format!(
                    "column '{col}' is not strictly positive (t = {}); cannot emit log values",
                    ts[pos]
                )));
            }
        }
        let mut out = String::new();
        for (t, v) in ts.iter().zip(vals.iter()) {
            if log {
                out.push_str(&format!("{t:.17e} {v:.17e} {:.17e}\n", v.ln()));
            } else {
                out.push_str(&format!("{t:.17e} {v:.17e}\n"));
            }
        }
        let path = out_dir.join(format!("{col}.dat"));
        fs::write(&path, out).map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(path);
    }
    Ok(written)
}
