//! The subcommands. Each one validates every section it needs before doing
//! any work, so a bad configuration leaves no artifacts behind.

use std::path::PathBuf;

use gsqg_core::contour::{
    diagnostics, init_shape, reparametrize_system, step_adaptive, ContourSystem, Diagnostics, StepOptions,
};
use gsqg_core::error::Error;
use gsqg_core::kernel::{build_table, verify_asymptotics, ClosedForm, KernelTable, RadialKernel};
use gsqg_core::multiplier::{check_hypotheses, classify_osgood, eval_derivatives, log_grid, Multiplier};
use gsqg_core::scenario::{
    audit_region, build_initial_data, collision_time, fit_constants, pi_indices, run_scenario, verify_velocity_bounds,
    wedge_probes, ScenarioConfig, Verdict, Wedge,
};
use gsqg_core::velocity::split_velocities;
use serde::Serialize;

use crate::config::{GeometrySpec, IntegratorSpec, KernelSource, KernelSpec, Loaded, Preset, RunConfig};
use crate::output::{num, Artifacts, Csv};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(String),
    /// a well-defined negative answer, e.g. no finite collision time
    Negative(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) | Failure::Io(_) => 3,
            Failure::Negative(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Numeric(_) => "numeric",
            Failure::Negative(_) => "negative_outcome",
            Failure::Io(_) => "io",
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            Failure::Config(s) | Failure::Numeric(s) | Failure::Negative(s) | Failure::Io(s) => s,
        }
    }

    pub fn explanation(&self) -> &'static str {
        match self {
            Failure::Config(_) => "the configuration is invalid; nothing was computed or written",
            Failure::Numeric(_) => "the computation failed numerically",
            Failure::Negative(_) => "the run completed with a negative answer; see the artifacts for details",
            Failure::Io(_) => "an artifact could not be written",
        }
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn work_err(e: Error) -> Failure {
    match e {
        Error::NoFiniteCollision(m) => Failure::Negative(format!("no finite collision time: {m}")),
        Error::Param(_) | Error::Invariant(_) => Failure::Config(e.to_string()),
        e => Failure::Numeric(e.to_string()),
    }
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Io(e.to_string())
}

/// What a command hands back to `main`: the status recorded in the
/// manifest and the failure, if any, that decides the exit code.
pub struct Finished {
    pub status: &'static str,
    pub failure: Option<Failure>,
}

impl Finished {
    fn ok() -> Self {
        Finished { status: "ok", failure: None }
    }

    fn with(f: Failure) -> Self {
        let status = match f {
            Failure::Negative(_) => "negative_outcome",
            Failure::Config(_) => "config_error",
            _ => "numeric_failure",
        };
        Finished { status, failure: Some(f) }
    }
}

pub struct Context<'a> {
    pub loaded: &'a Loaded,
    pub out_override: Option<PathBuf>,
}

impl Context<'_> {
    fn cfg(&self) -> &RunConfig {
        &self.loaded.config
    }

    fn artifacts(&self) -> Artifacts {
        let dir = self.out_override.clone().or_else(|| self.cfg().output_dir.clone()).unwrap_or_else(|| PathBuf::from("gsqg-out"));
        Artifacts::new(dir)
    }
}

// ------------------------------------------------------------ sections

fn multiplier(cfg: &RunConfig) -> Result<Multiplier, Failure> {
    let kind = cfg.multiplier.clone().ok_or_else(|| Failure::Config("missing section [multiplier]".into()))?;
    Multiplier::new(kind).map_err(config_err)
}

fn kernel_spec(cfg: &RunConfig) -> Result<KernelSpec, Failure> {
    let k = cfg.kernel.clone().unwrap_or_default();
    if !(k.rho_min > 0.0 && k.rho_max > k.rho_min) {
        return Err(Failure::Config(format!("kernel: need 0 < rho_min < rho_max, got {} and {}", k.rho_min, k.rho_max)));
    }
    if k.points < 4 {
        return Err(Failure::Config(format!("kernel.points = {} must be at least 4", k.points)));
    }
    if !(k.tol > 1e-14 && k.tol < 1e-3) {
        return Err(Failure::Config(format!("kernel.tol = {} outside (1e-14, 1e-3)", k.tol)));
    }
    Ok(k)
}

fn closed_form(mult: &Multiplier, spec: &KernelSpec) -> Result<Option<ClosedForm>, Failure> {
    let cf = ClosedForm::for_multiplier(mult);
    match spec.source {
        KernelSource::Auto => Ok(cf),
        KernelSource::Quadrature => Ok(None),
        KernelSource::ClosedForm => cf
            .map(Some)
            .ok_or_else(|| Failure::Config(format!("kernel.source = closed_form but {} has no closed form", mult.name()))),
    }
}

/// Tabulated kernel: sampled from the closed form when one is selected,
/// by quadrature otherwise.
fn kernel_table(mult: &Multiplier, spec: &KernelSpec) -> Result<KernelTable, Failure> {
    match closed_form(mult, spec)? {
        Some(cf) => KernelTable::from_closed_form(cf, mult.clone(), spec.rho_min, spec.rho_max, spec.points).map_err(work_err),
        None => build_table(mult, spec.rho_min, spec.rho_max, spec.points, spec.tol).map_err(work_err),
    }
}

/// Kernel for the velocity computations: the exact closed form when one is
/// selected, the quadrature table otherwise.
fn kernel(mult: &Multiplier, spec: &KernelSpec) -> Result<Box<dyn RadialKernel>, Failure> {
    Ok(match closed_form(mult, spec)? {
        Some(cf) => Box::new(cf),
        None => Box::new(build_table(mult, spec.rho_min, spec.rho_max, spec.points, spec.tol).map_err(work_err)?),
    })
}

fn scenario(cfg: &RunConfig) -> Result<ScenarioConfig, Failure> {
    cfg.scenario.clone().ok_or_else(|| Failure::Config("missing section [scenario]".into()))
}

fn integrator(cfg: &RunConfig) -> Result<IntegratorSpec, Failure> {
    let s = cfg.integrator.clone().unwrap_or_default();
    if !(s.dt > 0.0 && s.cfl_factor > 0.0 && s.t_end > 0.0) {
        return Err(Failure::Config("integrator: dt, cfl_factor and t_end must be positive".into()));
    }
    if s.output_every == 0 || s.reparam_every == 0 {
        return Err(Failure::Config("integrator: output_every and reparam_every must be at least 1".into()));
    }
    Ok(s)
}

fn geometry(cfg: &RunConfig) -> Result<ContourSystem, Failure> {
    let g: &GeometrySpec = cfg.geometry.as_ref().ok_or_else(|| Failure::Config("missing section [geometry]".into()))?;
    if let Some(Preset::ScenarioOmega0) = g.preset {
        if !g.patches.is_empty() {
            return Err(Failure::Config("geometry: give either preset or patches, not both".into()));
        }
        let mut sc = scenario(cfg)?;
        sc.m = g.m;
        return build_initial_data(&sc).map_err(config_err);
    }
    if g.patches.is_empty() {
        return Err(Failure::Config("geometry: no patches".into()));
    }
    let patches = g
        .patches
        .iter()
        .map(|p| init_shape(&p.shape, g.m, p.strength))
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_err)?;
    let sys = if g.mirror { ContourSystem::with_mirror(patches, g.domain) } else { ContourSystem::new(patches, g.domain) };
    sys.map_err(config_err)
}

// ------------------------------------------------------------ commands

pub fn check_multiplier(ctx: &Context) -> Result<(Artifacts, Finished), Failure> {
    let mult = multiplier(ctx.cfg())?;
    let c = ctx.cfg().check.clone().unwrap_or_default();
    if !(c.grid_min > 0.0 && c.grid_max > c.grid_min && c.grid_points >= 2) {
        return Err(Failure::Config("check: need 0 < grid_min < grid_max and grid_points >= 2".into()));
    }
    if !(c.osgood_lower >= 2.0 && c.osgood_cap > c.osgood_lower) {
        return Err(Failure::Config("check: need 2 <= osgood_lower < osgood_cap".into()));
    }
    let mut art = ctx.artifacts();
    let grid = log_grid(c.grid_min, c.grid_max, c.grid_points);
    let hyp = check_hypotheses(&mult, &grid).map_err(work_err)?;
    let osgood = classify_osgood(&mult, c.osgood_lower, c.osgood_cap).map_err(work_err)?;

    let mut csv = Csv::new(&["r", "m", "m1", "m2", "m3", "m4"]);
    for &r in &grid {
        let mut row = vec![r];
        for order in 0..=4 {
            row.push(if order == 0 || mult.has_derivatives() {
                eval_derivatives(&mult, r, order).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            });
        }
        csv.nums(&row);
    }
    art.write("derivatives.csv", &csv.into_bytes()).map_err(io_err)?;

    #[derive(Serialize)]
    struct Report<'a> {
        multiplier: &'a Multiplier,
        hypotheses: gsqg_core::multiplier::HypothesisReport,
        osgood: gsqg_core::multiplier::OsgoodReport,
    }
    println!(
        "{}: H1 {} H2a {} H2b {}; Osgood integral {:?}",
        mult.name(),
        hyp.pass_h1,
        hyp.pass_h2a,
        hyp.pass_h2b,
        osgood.classification
    );
    art.json("check.json", &Report { multiplier: &mult, hypotheses: hyp, osgood }).map_err(io_err)?;
    Ok((art, Finished::ok()))
}

pub fn kernel_table_cmd(ctx: &Context) -> Result<(Artifacts, Finished), Failure> {
    let mult = multiplier(ctx.cfg())?;
    let spec = kernel_spec(ctx.cfg())?;
    closed_form(&mult, &spec)?;
    let mut art = ctx.artifacts();
    let table = kernel_table(&mult, &spec)?;
    let mut csv = Csv::new(&["rho", "G", "Gprime", "R"]);
    for i in 0..table.len() {
        csv.nums(&[table.rho_grid[i], table.g_vals[i], table.gp_vals[i], table.r_vals[i]]);
    }
    art.write("kernel_table.csv", &csv.into_bytes()).map_err(io_err)?;

    #[derive(Serialize)]
    struct Meta<'a> {
        multiplier: &'a Multiplier,
        normalization: &'a str,
        m0_plus: f64,
        quadrature: &'a gsqg_core::kernel::QuadMeta,
        asymptotics: Option<gsqg_core::kernel::AsymptoticsReport>,
        asymptotics_error: Option<String>,
    }
    let (asymptotics, asymptotics_error) = match verify_asymptotics(&table, &mult, 10.0) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let meta = Meta {
        multiplier: &mult,
        normalization: table.normalization,
        m0_plus: table.m0_plus,
        quadrature: &table.quad_meta,
        asymptotics,
        asymptotics_error,
    };
    art.json("kernel_meta.json", &meta).map_err(io_err)?;
    println!("{} points on [{:e}, {:e}]", table.len(), table.rho_min(), table.rho_max());
    Ok((art, Finished::ok()))
}

fn snapshot(sys: &ContourSystem) -> Vec<u8> {
    let mut csv = Csv::new(&["patch_id", "zeta_index", "x1", "x2"]);
    for (k, p) in sys.patches.iter().enumerate() {
        for (i, q) in p.nodes.iter().enumerate() {
            csv.row(&[k.to_string(), i.to_string(), num(q[0]), num(q[1])]);
        }
    }
    csv.into_bytes()
}

fn diagnostics_header(n: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    h.extend((0..n).map(|k| format!("area_{k}")));
    h.push("h2".into());
    h.extend((0..n).map(|k| format!("arc_chord_{k}")));
    h.extend(["delta", "w_norm", "param_residual"].map(String::from));
    h
}

fn diagnostics_row(t: f64, d: &Diagnostics) -> Vec<f64> {
    let mut r = vec![t];
    r.extend(&d.area);
    r.push(d.h2_norm);
    r.extend(&d.arc_chord_sup);
    r.extend([d.delta, d.w_norm, d.param_residual]);
    r
}

pub fn simulate(ctx: &Context) -> Result<(Artifacts, Finished), Failure> {
    let mult = multiplier(ctx.cfg())?;
    let spec = kernel_spec(ctx.cfg())?;
    closed_form(&mult, &spec)?;
    let integ = integrator(ctx.cfg())?;
    let mut sys = geometry(ctx.cfg())?;
    let mut art = ctx.artifacts();
    let kernel = kernel(&mult, &spec)?;
    let opts = StepOptions { cfl_factor: integ.cfl_factor };

    let mut diag = Csv::new(&diagnostics_header(sys.patches.len()));
    let mut steps = 0usize;
    let mut outputs = 0usize;
    let emit = |sys: &ContourSystem, steps: usize, diag: &mut Csv, art: &mut Artifacts| -> Result<(), Failure> {
        diag.nums(&diagnostics_row(sys.time, &diagnostics(sys)));
        art.write(&format!("snapshots/step_{steps:07}.csv"), &snapshot(sys)).map_err(io_err)
    };
    emit(&sys, 0, &mut diag, &mut art)?;
    let mut failure = None;
    while sys.time < integ.t_end * (1.0 - 1e-12) {
        let dt_max = integ.dt.min(integ.t_end - sys.time);
        let next = step_adaptive(&sys, kernel.as_ref(), dt_max, opts).and_then(|(s, _)| {
            let residual = s.patches.iter().map(|p| p.param_residual()).fold(0.0, f64::max);
            if (steps + 1) % integ.reparam_every == 0 || residual > integ.reparam_residual {
                reparametrize_system(&s)
            } else {
                Ok(s)
            }
        });
        match next {
            Ok(s) => sys = s,
            Err(e) => {
                failure = Some(work_err(e));
                break;
            }
        }
        steps += 1;
        let last = sys.time >= integ.t_end * (1.0 - 1e-12);
        if steps % integ.output_every == 0 || last {
            emit(&sys, steps, &mut diag, &mut art)?;
            outputs += 1;
        }
    }
    art.write("diagnostics.csv", &diag.into_bytes()).map_err(io_err)?;
    println!("{steps} steps to t = {:.6e}, {outputs} outputs", sys.time);
    Ok((art, failure.map_or_else(Finished::ok, Finished::with)))
}

pub fn velocity_probe(ctx: &Context) -> Result<(Artifacts, Finished), Failure> {
    let mult = multiplier(ctx.cfg())?;
    let spec = kernel_spec(ctx.cfg())?;
    closed_form(&mult, &spec)?;
    let probe = ctx.cfg().probe.clone().ok_or_else(|| Failure::Config("missing section [probe]".into()))?;
    probe.region.validate().map_err(config_err)?;
    if probe.points.is_empty() {
        return Err(Failure::Config("probe.points is empty".into()));
    }
    if !(probe.tol > 0.0) {
        return Err(Failure::Config("probe.tol must be positive".into()));
    }
    let mut art = ctx.artifacts();
    let kernel = kernel(&mult, &spec)?;
    let mut csv = Csv::new(&["x1", "x2", "u1", "u2", "u1_bad", "u1_good", "u2_bad", "u2_good", "err_estimate"]);
    for &x in &probe.points {
        let s = split_velocities(x, &probe.region, kernel.as_ref(), probe.domain, probe.tol).map_err(work_err)?;
        csv.nums(&[x[0], x[1], s.u[0], s.u[1], s.u1_bad, s.u1_good, s.u2_bad, s.u2_good, s.err]);
    }
    art.write("velocity_probe.csv", &csv.into_bytes()).map_err(io_err)?;
    println!("{} probes", probe.points.len());
    Ok((art, Finished::ok()))
}

#[derive(Serialize)]
struct VerdictOut<'a> {
    #[serde(flatten)]
    verdict: &'a Verdict,
    constants_fitted: bool,
}

pub fn blowup(ctx: &Context) -> Result<(Artifacts, Finished), Failure> {
    let mult = multiplier(ctx.cfg())?;
    let spec = kernel_spec(ctx.cfg())?;
    closed_form(&mult, &spec)?;
    let mut cfg = scenario(ctx.cfg())?;
    cfg.check(None).map_err(config_err)?;
    let kernel = kernel(&mult, &spec)?;
    // finiteness of T* does not depend on the driving constant
    let trial = ScenarioConfig { driving_c: Some(cfg.driving_c.unwrap_or(1.0)), ..cfg.clone() };
    let mut art = ctx.artifacts();
    if cfg.t_end.is_none() {
        if let Err(e) = collision_time(&trial, kernel.as_ref(), Some(&mult)) {
            let f = work_err(e);
            if let Failure::Negative(detail) = &f {
                #[derive(Serialize)]
                struct NoCollision<'a> {
                    outcome: &'a str,
                    multiplier: &'a Multiplier,
                    detail: &'a str,
                }
                let v = NoCollision { outcome: "no_finite_collision", multiplier: &mult, detail };
                art.json("verdict.json", &v).map_err(io_err)?;
                return Ok((art, Finished::with(f)));
            }
            return Err(f);
        }
    }
    let fitted = cfg.driving_c.is_none();
    if fitted {
        let f = fit_constants(&cfg, kernel.as_ref(), 50).map_err(work_err)?;
        cfg.driving_c = Some(f.driving_c);
        cfg.delta_g = cfg.delta_g.or(Some(f.delta_g));
        cfg.c_bar = cfg.c_bar.or(Some(f.c_bar));
    }
    let run = run_scenario(&cfg, kernel.as_ref(), Some(&mult), |_| ()).map_err(work_err)?;
    let n_areas = run.series.first().map_or(0, |r| r.areas.len());
    let mut header: Vec<String> = ["time", "X", "T_star", "gap", "margin", "front_min_x1", "w_norm"].map(String::from).to_vec();
    header.extend((0..n_areas).map(|k| format!("area_{k}")));
    let mut csv = Csv::new(&header);
    for r in &run.series {
        let mut row = vec![r.time, r.x_env, r.t_star, r.gap, r.margin, r.front_min_x1, r.w_norm];
        row.extend(&r.areas);
        csv.nums(&row);
    }
    art.write("series.csv", &csv.into_bytes()).map_err(io_err)?;
    art.json("verdict.json", &VerdictOut { verdict: &run.verdict, constants_fitted: fitted }).map_err(io_err)?;
    art.write("final_state.csv", &snapshot(&run.final_state)).map_err(io_err)?;
    let v = &run.verdict;
    println!(
        "outcome {} at t = {:.6e} after {} steps; gap {:.6e} -> {:.6e}; T* = {}",
        serde_json::to_value(v.outcome).unwrap().as_str().unwrap_or("?"),
        v.time,
        v.steps,
        v.initial_gap,
        v.final_gap,
        v.t_star.map_or("none".to_string(), |t| format!("{t:.6e}"))
    );
    for w in &v.warnings {
        eprintln!("warning: {w}");
    }
    Ok((art, Finished::ok()))
}

pub fn verify_bounds(ctx: &Context) -> Result<(Artifacts, Finished), Failure> {
    let mult = multiplier(ctx.cfg())?;
    let spec = kernel_spec(ctx.cfg())?;
    closed_form(&mult, &spec)?;
    let cfg = scenario(ctx.cfg())?;
    let b = ctx.cfg().bounds.clone().unwrap_or_default();
    if b.probes == 0 {
        return Err(Failure::Config("bounds.probes must be at least 1".into()));
    }
    let theta = b.theta.clone().unwrap_or_else(|| audit_region(&cfg));
    theta.validate().map_err(config_err)?;
    if !(cfg.c0 > 0.0) || cfg.k() < 1.0 {
        return Err(Failure::Config("scenario: need c0 > 0 and k >= 1".into()));
    }
    let mut art = ctx.artifacts();
    let kernel = kernel(&mult, &spec)?;

    // fit on the leading probes, then audit a disjoint stretch of the sequence
    let (delta_g, driving_c, c_bar, fitted) = match (cfg.delta_g, cfg.driving_c) {
        (Some(d), Some(c)) => (d, c, cfg.c_bar, false),
        _ => {
            let f = fit_constants(&cfg, kernel.as_ref(), b.probes).map_err(work_err)?;
            (cfg.delta_g.unwrap_or(f.delta_g), cfg.driving_c.unwrap_or(f.driving_c), Some(f.c_bar), true)
        }
    };
    let (a, c) = wedge_probes(&cfg, delta_g, b.probes, b.offset);
    let probes: Vec<[f64; 2]> = a.into_iter().chain(c).collect();
    let rep = verify_velocity_bounds(&cfg, kernel.as_ref(), &probes, delta_g, &theta).map_err(work_err)?;

    const SLACK: f64 = 0.05;
    let opt = |x: Option<f64>| x.unwrap_or(f64::NAN);
    let mut csv = Csv::new(&[
        "wedge",
        "x1",
        "x2",
        "u",
        "F",
        "bound_slack",
        "bad",
        "good",
        "bad_bound",
        "good_bound",
        "good_regions",
        "bad_slack",
        "good_slack",
        "good_region_slack",
        "err_estimate",
    ]);
    let mut violations = 0;
    for p in &rep.probes {
        // u₁ ≤ −𝐅 in U1 and u₂ ≥ 𝐅 in U2, with 5% tolerance
        let f = driving_c * p.f_unit;
        let slack = p.ratio / driving_c - (1.0 - SLACK);
        if !(slack >= 0.0) {
            violations += 1;
        }
        let wedge = match p.wedge {
            Wedge::U1 => "u1",
            Wedge::U2 => "u2",
        };
        let mut row = vec![wedge.to_string()];
        row.extend(
            [
                p.x[0],
                p.x[1],
                p.u,
                f,
                slack,
                p.bad,
                p.good,
                p.bad_bound,
                opt(p.good_bound),
                opt(p.good_regions),
                p.bad_slack,
                opt(p.good_slack),
                opt(p.good_region_slack),
                p.err,
            ]
            .map(num),
        );
        csv.row(&row);
    }
    art.write("bounds.csv", &csv.into_bytes()).map_err(io_err)?;

    #[derive(Serialize)]
    struct Summary {
        delta_g: f64,
        driving_c: f64,
        c_bar: Option<f64>,
        constants_fitted: bool,
        probe_offset: usize,
        probes: usize,
        skipped: Vec<([f64; 2], String)>,
        min_ratio: f64,
        tolerance: f64,
        violations: usize,
    }
    let s = Summary {
        delta_g,
        driving_c,
        c_bar,
        constants_fitted: fitted,
        probe_offset: b.offset,
        probes: rep.probes.len(),
        skipped: rep.skipped.clone(),
        min_ratio: rep.fitted_c,
        tolerance: SLACK,
        violations,
    };
    art.json("bounds.json", &s).map_err(io_err)?;
    println!("delta_G = {delta_g:.6e}, c = {driving_c:.6e}: {violations} violations over {} probes", rep.probes.len());
    let fin = if driving_c > 0.0 && violations == 0 {
        Finished::ok()
    } else {
        Finished::with(Failure::Negative(format!("{violations} probes violate the velocity bounds at c = {driving_c:e}")))
    };
    Ok((art, fin))
}

pub fn pi_scan(ctx: &Context) -> Result<(Artifacts, Finished), Failure> {
    let cfg = ctx.cfg().scenario.clone().unwrap_or_default();
    let n = ctx.cfg().pi_scan.clone().unwrap_or_default().points;
    if n == 0 {
        return Err(Failure::Config("pi_scan.points must be at least 1".into()));
    }
    let (k, n_k) = (cfg.k(), cfg.n_k());
    if !(k >= 1.0 && n_k > k) {
        return Err(Failure::Config(format!("need k >= 1 and N_k > k, got k = {k}, N_k = {n_k}")));
    }
    let mut art = ctx.artifacts();
    let mut csv = Csv::new(&["beta", "Pi1", "Pi2", "margin"]);
    let mut bad = 0;
    for i in 0..n {
        let beta = (i + 1) as f64 / (n + 1) as f64 / 3.0;
        let p = pi_indices(beta, k, n_k).map_err(work_err)?;
        if !(p.pi1 < 0.0 && p.pi2 > 0.0) {
            bad += 1;
        }
        csv.nums(&[p.beta, p.pi1, p.pi2, p.margin]);
    }
    art.write("pi_scan.csv", &csv.into_bytes()).map_err(io_err)?;
    println!("k = {k}: Pi1 < 0 and Pi2 > 0 at {} of {n} points", n - bad);
    let fin = if bad == 0 {
        Finished::ok()
    } else {
        Finished::with(Failure::Negative(format!("sign condition fails at {bad} of {n} beta values for k = {k}")))
    };
    Ok((art, fin))
}
