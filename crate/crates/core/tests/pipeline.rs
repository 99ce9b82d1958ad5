use gsqg_core::contour::{
    diagnostics, init_shape, reparametrize_system, step_adaptive, velocity_contour, ContourSystem, Domain, ShapeSpec,
    StepOptions,
};
use gsqg_core::kernel::{build_table, ClosedForm};
use gsqg_core::multiplier::Multiplier;
use gsqg_core::scenario::{build_initial_data, ScenarioConfig};

fn ellipse(m: usize) -> ContourSystem {
    let p = init_shape(&ShapeSpec::Ellipse { center: [0.2, 0.1], a: 0.8, b: 0.4 }, m, 1.0).unwrap();
    ContourSystem::new(vec![p], Domain::WholePlane).unwrap()
}

#[test]
fn quadrature_table_drives_contour_like_closed_form() {
    let alpha = 0.25;
    let table = build_table(&Multiplier::alpha_sqg(alpha).unwrap(), 1e-8, 10.0, 121, 1e-9).unwrap();
    let exact = ClosedForm::AlphaSqg { alpha };
    let sys = ellipse(128);
    for x in [[0.0, 0.0], [1.5, 0.3], [0.4, -0.9]] {
        let a = velocity_contour(x, &sys, &table).unwrap();
        let b = velocity_contour(x, &sys, &exact).unwrap();
        let rel = (a[0] - b[0]).hypot(a[1] - b[1]) / b[0].hypot(b[1]);
        assert!(rel < 1e-5, "{x:?}: {a:?} vs {b:?}");
    }
}

#[test]
fn evolution_with_reparametrization_keeps_area() {
    let k = ClosedForm::AlphaSqg { alpha: 0.3 };
    let mut sys = ellipse(128);
    let a0 = diagnostics(&sys).area[0];
    let opts = StepOptions { cfl_factor: 0.5 };
    for i in 1..=40 {
        sys = step_adaptive(&sys, &k, 5e-3, opts).unwrap().0;
        if i % 8 == 0 {
            sys = reparametrize_system(&sys).unwrap();
        }
    }
    let d = diagnostics(&sys);
    assert!(d.finite);
    assert!((d.area[0] / a0 - 1.0).abs() < 1e-8, "{} vs {a0}", d.area[0]);
    assert!(d.param_residual < 1e-3);
    assert!(sys.time > 0.19);
}

#[test]
fn scenario_data_is_mirror_symmetric() {
    let cfg = ScenarioConfig { epsilon: Some(0.03), driving_c: Some(1.0), m: 256, strict: false, ..Default::default() };
    let sys = build_initial_data(&cfg).unwrap();
    assert_eq!(sys.patches.len(), 2);
    let k = ClosedForm::AlphaSqg { alpha: 0.25 };
    for x in [[1.2, 0.4], [0.6, 1.3], [0.02, 2.0]] {
        let u = velocity_contour(x, &sys, &k).unwrap();
        let v = velocity_contour([-x[0], x[1]], &sys, &k).unwrap();
        // θ odd in x₁: u₁ odd and u₂ even
        assert!((u[0] + v[0]).abs() < 1e-10 * u[0].abs().max(1.0), "{u:?} {v:?}");
        assert!((u[1] - v[1]).abs() < 1e-10 * u[1].abs().max(1.0), "{u:?} {v:?}");
    }
    assert!((sys.gap() - 3.0 * cfg.eps()).abs() < 1e-9, "{}", sys.gap());
}
