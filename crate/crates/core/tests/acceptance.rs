//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any fails. Pass criterion numbers as arguments to run
//! a subset, e.g. `cargo test --test acceptance -- 4 9`.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gsqg_core::contour::{
    diagnostics, init_shape, step, velocity_contour, ContourSystem, Domain, ShapeSpec, StepOptions,
};
use gsqg_core::kernel::{build_table, compute_g, ClosedForm, RadialKernel};
use gsqg_core::multiplier::{classify_osgood, Multiplier, MultiplierKind, Osgood};
use gsqg_core::scenario::{
    audit_region, collision_time, fit_constants, pi_indices, run_scenario, verify_velocity_bounds, wedge_probes,
    Outcome, ScenarioConfig,
};
use gsqg_core::velocity::{kernel_split, velocity_area, Piece, RegionSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

// independent of the library's own c_α
fn c_alpha(alpha: f64) -> f64 {
    libm::tgamma(alpha / 2.0) / (PI * 2f64.powf(2.0 - alpha) * libm::tgamma(1.0 - alpha / 2.0))
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() <= limit_s {
        Ok(())
    } else {
        Err(format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
    }
}

fn log_points(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
}

fn kernel_oracle() -> Check {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for alpha in [0.05, 0.15, 0.25, 0.30] {
        let m = Multiplier::alpha_sqg(alpha).map_err(|e| e.to_string())?;
        for rho in log_points(1e-3, 1.0, 30) {
            let g = compute_g(&m, rho, 1e-9).map_err(|e| e.to_string())?;
            let exact = alpha * c_alpha(alpha) * rho.powf(-alpha);
            worst = worst.max((g / exact - 1.0).abs());
        }
    }
    within(t.elapsed(), 30.0)?;
    if worst <= 1e-3 {
        Ok(format!("max rel err {worst:.2e} in {:.1} s", t.elapsed().as_secs_f64()))
    } else {
        Err(format!("max rel err {worst:.2e}"))
    }
}

fn sandwich() -> Check {
    let m = Multiplier::new(MultiplierKind::LoglogPower { beta: 2.0 }).map_err(|e| e.to_string())?;
    let rhos: Vec<f64> = log_points(1e-6, 1e-2, 25).collect();
    let mut g = Vec::new();
    for &rho in &rhos {
        g.push(compute_g(&m, rho, 1e-9).map_err(|e| e.to_string())?);
    }
    let ratios: Vec<f64> = rhos.iter().zip(&g).map(|(&r, &gv)| gv / m.value(1.0 / r)).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let monotone = rhos.windows(2).zip(g.windows(2)).all(|(r, gv)| gv[1] / r[1] <= gv[0] / r[0]);
    if lo > 0.0 && hi / lo <= 10.0 && monotone {
        Ok(format!("G/m(1/rho) in [{lo:.4}, {hi:.4}], G/rho non-increasing"))
    } else {
        Err(format!("band [{lo:.4}, {hi:.4}], G/rho monotone {monotone}"))
    }
}

fn osgood_table() -> Check {
    let t = Instant::now();
    let cases = [
        (MultiplierKind::LogPower { beta: 0.0 }, Osgood::Divergent),
        (MultiplierKind::LogPower { beta: 1.0 }, Osgood::Convergent),
        (MultiplierKind::LoglogPower { beta: 1.0 }, Osgood::Divergent),
        (MultiplierKind::LoglogPower { beta: 2.0 }, Osgood::Convergent),
    ];
    for (kind, want) in cases {
        let m = Multiplier::new(kind.clone()).map_err(|e| e.to_string())?;
        let r = classify_osgood(&m, 2.0, 1e12).map_err(|e| e.to_string())?;
        if r.classification != want {
            return Err(format!("{kind:?}: got {:?}", r.classification));
        }
    }
    within(t.elapsed(), 5.0)?;
    Ok(format!("4 cases in {:.2} s", t.elapsed().as_secs_f64()))
}

fn euler_disk() -> Check {
    let disk = init_shape(&ShapeSpec::Circle { center: [0.0, 0.0], radius: 1.0 }, 256, 1.0).map_err(|e| e.to_string())?;
    let mut sys = ContourSystem::new(vec![disk], Domain::WholePlane).map_err(|e| e.to_string())?;
    let a0 = diagnostics(&sys).area[0];
    let opts = StepOptions { cfl_factor: 0.5 };
    for _ in 0..1000 {
        sys = step(&sys, &ClosedForm::Euler, 1e-3, opts).map_err(|e| e.to_string())?;
    }
    let radial = sys.patches[0].nodes.iter().map(|q| (q[0].hypot(q[1]) - 1.0).abs()).fold(0.0, f64::max);
    let drift = (diagnostics(&sys).area[0] / a0 - 1.0).abs();
    if radial <= 1e-6 && drift <= 1e-6 {
        Ok(format!("radial dev {radial:.2e}, area drift {drift:.2e} at t = {:.3}", sys.time))
    } else {
        Err(format!("radial dev {radial:.2e}, area drift {drift:.2e}"))
    }
}

fn contour_vs_area() -> Check {
    let t = Instant::now();
    let probes: Vec<[f64; 2]> = (0..12)
        .map(|i| {
            let r = [0.3, 0.7, 1.3, 2.0][i % 4];
            let a = 0.4 + 2.0 * PI * i as f64 / 12.0;
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    let disk = init_shape(&ShapeSpec::Circle { center: [0.0, 0.0], radius: 1.0 }, 256, 1.0).map_err(|e| e.to_string())?;
    let sys = ContourSystem::new(vec![disk], Domain::WholePlane).map_err(|e| e.to_string())?;
    let region = RegionSet::new(vec![Piece::Disk { center: [0.0, 0.0], radius: 1.0, weight: 1.0 }], false)
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let kernels: [&dyn RadialKernel; 2] = [&ClosedForm::Euler, &ClosedForm::AlphaSqg { alpha: 0.25 }];
    for k in kernels {
        for &x in &probes {
            let uc = velocity_contour(x, &sys, k).map_err(|e| e.to_string())?;
            let ua = velocity_area(x, &region, k, Domain::WholePlane, 1e-10).map_err(|e| e.to_string())?.u;
            let err = (uc[0] - ua[0]).hypot(uc[1] - ua[1]) / ua[0].hypot(ua[1]);
            worst = worst.max(err);
        }
    }
    within(t.elapsed(), 60.0)?;
    if worst <= 1e-3 {
        Ok(format!("max rel diff {worst:.2e} over 24 evaluations"))
    } else {
        Err(format!("max rel diff {worst:.2e}"))
    }
}

fn wall_condition() -> Check {
    let sets = [
        vec![Piece::Rectangle { x0: 0.1, x1: 0.6, y0: 0.0, y1: 0.4, weight: 1.0 }],
        vec![
            Piece::Disk { center: [0.5, 0.5], radius: 0.3, weight: 1.0 },
            Piece::Triangle { vertices: [[-0.8, 0.0], [-0.2, 0.0], [-0.5, 0.7]], weight: -2.0 },
        ],
        vec![Piece::Polygon { vertices: vec![[0.0, 0.1], [0.9, 0.0], [1.2, 0.5], [0.3, 0.8]], weight: 0.5 }],
    ];
    let k = ClosedForm::AlphaSqg { alpha: 0.25 };
    let mut worst = 0.0f64;
    for pieces in sets {
        let region = RegionSet::new(pieces, false).map_err(|e| e.to_string())?;
        let mut u2max = 0.0f64;
        let mut umax = 0.0f64;
        for x1 in log_points(0.05, 1.5, 12).chain(log_points(0.05, 1.5, 12).map(|x| -x)) {
            let u = velocity_area([x1, 0.0], &region, &k, Domain::HalfPlane, 1e-10).map_err(|e| e.to_string())?.u;
            u2max = u2max.max(u[1].abs());
            umax = umax.max(u[0].hypot(u[1]));
        }
        worst = worst.max(u2max / umax);
    }
    if worst <= 1e-4 {
        Ok(format!("max |u2|/max|u| on the wall {worst:.2e}"))
    } else {
        Err(format!("max |u2|/max|u| on the wall {worst:.2e}"))
    }
}

fn sign_predicates() -> Check {
    let c0 = 1.0;
    let catalog = [
        MultiplierKind::Euler,
        MultiplierKind::AlphaSqg { alpha: 0.25 },
        MultiplierKind::AlphaSqg { alpha: 0.9 },
        MultiplierKind::Qgsw { epsilon: 1.0 },
        MultiplierKind::LogPower { beta: 0.5 },
        MultiplierKind::LoglogPower { beta: 2.0 },
        MultiplierKind::Logloglog { beta: 2.0, c3: 4.0e6 },
        MultiplierKind::AlphaLog { alpha: 0.2, beta: 1.0, c: 2.0 },
        MultiplierKind::RationalAlpha { alpha: 0.3, eps1: 0.5, eps2: 0.1 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut tested, mut excluded) = (Vec::new(), Vec::new());
    for kind in catalog {
        let m = Multiplier::new(kind).map_err(|e| e.to_string())?;
        let table = build_table(&m, 1e-8, 10.0, 121, 1e-8).map_err(|e| e.to_string())?;
        // G > 0 and G/ρ non-increasing on (0, c0)
        let grid: Vec<f64> = log_points(1e-8, c0, 400).collect();
        let gadd = grid.iter().all(|&r| table.g(r) > 0.0)
            && grid.windows(2).all(|w| table.g(w[1]) / w[1] <= table.g(w[0]) / w[0] * (1.0 + 1e-12));
        if !gadd {
            excluded.push(m.name());
            continue;
        }
        let mut n = 0;
        while n < 10_000 {
            let x = [rng.gen::<f64>() * c0, rng.gen::<f64>() * c0];
            let y = [rng.gen::<f64>() * c0, rng.gen::<f64>() * c0];
            if (x[0] + y[0]).hypot(x[1] + y[1]) > c0 || x == y {
                continue;
            }
            n += 1;
            let s = kernel_split(x, y, &table).map_err(|e| e.to_string())?;
            if let Some(i) = s.predicates(x, y, 1e-12).iter().position(|&ok| !ok) {
                return Err(format!("{}: predicate {} fails at x = {x:?}, y = {y:?}", m.name(), i + 1));
            }
        }
        tested.push(m.name());
    }
    if tested.is_empty() {
        return Err("no kernel passed the monotonicity condition".into());
    }
    Ok(format!("0 violations; tested {tested:?}; excluded {excluded:?}"))
}

fn pi_table() -> Check {
    let t = Instant::now();
    let cfg = ScenarioConfig { slope_k: Some(5), ..Default::default() };
    for i in 0..64 {
        let beta = (i + 1) as f64 / 65.0 / 3.0;
        let p = pi_indices(beta, cfg.k(), cfg.n_k()).map_err(|e| e.to_string())?;
        if !(p.pi1 < 0.0 && p.pi2 > 0.0) {
            return Err(format!("beta = {beta}: Pi1 = {}, Pi2 = {}", p.pi1, p.pi2));
        }
    }
    within(t.elapsed(), 1.0)?;
    Ok(format!("64 points in {:.1} ms", t.elapsed().as_secs_f64() * 1e3))
}

fn t_star_closed_form() -> Check {
    let mut worst = 0.0f64;
    for (alpha, eps, c) in [(0.25, 0.03, 1.0), (0.25, 1e-3, 4.0), (0.1, 0.02, 0.5), (0.3, 0.05, 2.0)] {
        let cfg = ScenarioConfig { epsilon: Some(eps), driving_c: Some(c), strict: false, ..Default::default() };
        let m = Multiplier::alpha_sqg(alpha).map_err(|e| e.to_string())?;
        let env = collision_time(&cfg, &ClosedForm::AlphaSqg { alpha }, Some(&m)).map_err(|e| e.to_string())?;
        let exact = 2.0 * (3.0 * eps).powf(alpha) / (alpha * alpha * c_alpha(alpha) * c);
        worst = worst.max((env.t_star / exact - 1.0).abs());
    }
    if worst <= 1e-8 {
        Ok(format!("max rel err {worst:.2e}"))
    } else {
        Err(format!("max rel err {worst:.2e}"))
    }
}

fn desk_scenario() -> ScenarioConfig {
    ScenarioConfig { epsilon: Some(0.03), slope_k: Some(5), strict: false, ..Default::default() }
}

fn velocity_bounds() -> Check {
    let t = Instant::now();
    let cfg = desk_scenario();
    let k = ClosedForm::AlphaSqg { alpha: 0.25 };
    let fit = fit_constants(&cfg, &k, 50).map_err(|e| e.to_string())?;
    if !(fit.driving_c > 0.0 && fit.delta_g > 0.0) {
        return Err(format!("no positive fit: c = {}, delta_G = {}", fit.driving_c, fit.delta_g));
    }
    // audit the fitted constants on probes not used for the fit
    let (a, b) = wedge_probes(&cfg, fit.delta_g, 50, 1000);
    let probes: Vec<[f64; 2]> = a.into_iter().chain(b).collect();
    let rep = verify_velocity_bounds(&cfg, &k, &probes, fit.delta_g, &audit_region(&cfg)).map_err(|e| e.to_string())?;
    let bad = rep.probes.iter().filter(|p| !(p.ratio >= 0.95 * fit.driving_c)).count();
    within(t.elapsed(), 600.0)?;
    if bad == 0 && rep.skipped.is_empty() && rep.probes.len() == 100 {
        Ok(format!(
            "c = {:.4}, delta_G = {}, fresh probes min ratio {:.4}",
            fit.driving_c, fit.delta_g, rep.fitted_c
        ))
    } else {
        Err(format!("{bad} violations, {} skipped, c = {:.4}", rep.skipped.len(), fit.driving_c))
    }
}

fn scenario_contrast() -> Check {
    let t = Instant::now();
    let mut cfg = desk_scenario();
    let k = ClosedForm::AlphaSqg { alpha: 0.25 };
    let m = Multiplier::alpha_sqg(0.25).map_err(|e| e.to_string())?;
    let fit = fit_constants(&cfg, &k, 50).map_err(|e| e.to_string())?;
    cfg.driving_c = Some(fit.driving_c);
    cfg.delta_g = Some(fit.delta_g);
    cfg.c_bar = Some(fit.c_bar);
    let run = run_scenario(&cfg, &k, Some(&m), |_| ()).map_err(|e| e.to_string())?;
    let v = &run.verdict;
    let monotone = run.series.windows(2).all(|w| w[1].gap < w[0].gap && w[1].front_min_x1 < w[0].front_min_x1);
    let t_star = v.t_star.ok_or("no T*")?;
    let alpha_ok = v.outcome == Outcome::Collision && monotone;
    let alpha_msg = format!("alpha-SQG {:?} at t = {:.3}, monotone {monotone}", v.outcome, v.time);

    let mut e = cfg.clone();
    e.t_end = Some(5.0 * t_star);
    let run = run_scenario(&e, &ClosedForm::Euler, None, |_| ()).map_err(|e| e.to_string())?;
    let v = &run.verdict;
    let euler_ok = v.min_gap >= 0.5 * v.initial_gap && v.time >= 5.0 * t_star * (1.0 - 1e-9);
    let euler_msg = format!(
        "Euler min gap {:.4} vs initial {:.4} ({:?} at t = {:.3} of {:.3})",
        v.min_gap,
        v.initial_gap,
        v.outcome,
        v.time,
        5.0 * t_star
    );
    within(t.elapsed(), 1800.0)?;
    let msg = format!("{alpha_msg}; {euler_msg}");
    if alpha_ok && euler_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn convergence() -> Check {
    let k = ClosedForm::AlphaSqg { alpha: 0.25 };
    let shape = ShapeSpec::Ellipse { center: [0.0, 0.0], a: 1.0, b: 0.5 };
    let (dt, steps) = (2.5e-3, 40);
    let run = |m: usize| -> Result<Vec<[f64; 2]>, String> {
        let p = init_shape(&shape, m, 1.0).map_err(|e| e.to_string())?;
        let mut sys = ContourSystem::new(vec![p], Domain::WholePlane).map_err(|e| e.to_string())?;
        for _ in 0..steps {
            sys = step(&sys, &k, dt, StepOptions { cfl_factor: 0.5 }).map_err(|e| e.to_string())?;
        }
        Ok(sys.patches[0].nodes.clone())
    };
    let reference = run(1024)?;
    let mut errs = Vec::new();
    for m in [128, 256, 512] {
        let nodes = run(m)?;
        let stride = 1024 / m;
        let e = nodes
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let r = reference[i * stride];
                (q[0] - r[0]).hypot(q[1] - r[1])
            })
            .fold(0.0, f64::max);
        errs.push(e);
    }
    let rates = [errs[0] / errs[1], errs[1] / errs[2]];
    let msg = format!("errors {:.2e} {:.2e} {:.2e}, ratios {:.2} {:.2}", errs[0], errs[1], errs[2], rates[0], rates[1]);
    if rates.iter().all(|&r| r >= 3.5) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("kernel matches the alpha-SQG closed form", kernel_oracle),
        ("log-log kernel sandwich and monotonicity", sandwich),
        ("Osgood classification table", osgood_table),
        ("Euler steady disk", euler_disk),
        ("contour velocity matches area velocity", contour_vs_area),
        ("half-plane wall condition", wall_condition),
        ("kernel sign predicates", sign_predicates),
        ("Pi index signs for k = 5", pi_table),
        ("collision time closed form", t_star_closed_form),
        ("wedge velocity bounds", velocity_bounds),
        ("alpha-SQG vs Euler scenario contrast", scenario_contrast),
        ("spatial convergence on an ellipse", convergence),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("criterion {n:2} PASS  {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:2} FAIL  {name}: {d} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
