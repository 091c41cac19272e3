use kpp_cascade::cascade::*;
use kpp_cascade::heat::halfline_heat;
use kpp_cascade::kpp::*;
use kpp_cascade::selfsim::*;
use kpp_cascade::Error;
use proptest::prelude::*;

fn lab(k: usize, alpha: f64, grid: Grid1D, t_end: f64) -> EvolveConfig {
    EvolveConfig::new(k, alpha, KppNonlinearity::quadratic(), grid, 0.01, t_end)
}

#[test]
fn decoupled_components_match_scalar_runs() {
    let grid = Grid1D::span(-20.0, 60.0, 0.1).unwrap();
    let init = FieldStack::from_fn(grid, 2, |i, x| if x <= i as f64 * 3.0 { 1.0 } else { 0.0 });
    let cfg = lab(2, 0.0, grid, 10.0).with_snapshots(&[10.0]);
    let pair = evolve_lab(&cfg, &init).unwrap();
    for i in 0..2 {
        let single = FieldStack::new(grid, 0.0, vec![init.values[i].clone()]).unwrap();
        let one = evolve_lab(&lab(1, 0.0, grid, 10.0).with_snapshots(&[10.0]), &single).unwrap();
        assert_eq!(pair.snapshots[0].values[i], one.snapshots[0].values[0]);
    }
}

#[test]
fn cascade_is_triangular() {
    // component i never feeds back into i+1
    let grid = Grid1D::span(-10.0, 30.0, 0.1).unwrap();
    let cfg = lab(3, 1.0, grid, 1.0);
    let base = FieldStack::heaviside(grid, 3, 0.0);
    let mut bumped = base.clone();
    bumped.values[0].iter_mut().for_each(|v| *v *= 0.5);
    let mut a = base.clone();
    let mut b = bumped;
    let mut sa = Stepper::nonlinear(&cfg).unwrap();
    let mut sb = Stepper::nonlinear(&cfg).unwrap();
    for step in 1..=20 {
        sa.step(&mut a, step).unwrap();
        sb.step(&mut b, step).unwrap();
    }
    assert_eq!(a.values[1], b.values[1]);
    assert_eq!(a.values[2], b.values[2]);
    assert_ne!(a.values[0], b.values[0]);
}

#[test]
fn heaviside_run_stays_in_range_and_monotone() {
    let grid = Grid1D::span(-20.0, 80.0, 0.05).unwrap();
    let cfg = EvolveConfig::new(3, 1.0, KppNonlinearity::quadratic(), grid, 5e-3, 20.0)
        .with_snapshots(&[5.0, 20.0]);
    let tr = evolve_lab(&cfg, &FieldStack::heaviside(grid, 3, 0.0)).unwrap();
    assert_eq!(tr.diagnostics.clamp_count, 0);
    for s in &tr.snapshots {
        assert!(s.in_unit_range());
        for v in &s.values {
            assert!(v.windows(2).all(|p| p[1] <= p[0] + 1e-12));
        }
        // the forced component leads
        let lead: Vec<f64> = s.values.iter().map(|v| kpp_cascade::front::max_crossing(&grid, v, 0.5).unwrap()).collect();
        assert!(lead[0] > lead[1] && lead[1] > lead[2]);
    }
}

#[test]
fn step_size_checks() {
    let grid = Grid1D::span(0.0, 10.0, 0.1).unwrap();
    let mut cfg = lab(1, 1.0, grid, 1.0);
    cfg.dt = 0.2;
    assert!(matches!(evolve_lab(&cfg, &FieldStack::heaviside(grid, 1, 5.0)), Err(Error::Config(_))));
    let cfg = lab(2, 1.0, grid, 1.0);
    assert!(matches!(evolve_lab(&cfg, &FieldStack::heaviside(grid, 1, 5.0)), Err(Error::InvalidInput(_))));
    let bad = FieldStack::from_fn(grid, 2, |_, _| 1.5);
    assert!(evolve_lab(&cfg, &bad).is_err());
}

#[test]
fn linear_dirichlet_preconditions() {
    let grid = Grid1D::span(0.0, 10.0, 0.1).unwrap();
    let cfg = lab(1, 1.0, grid, 1.0).with_boundary(Boundary::DirichletZero);
    let neg = FieldStack::from_fn(grid, 1, |_, x| -x * (10.0 - x));
    assert!(matches!(evolve_linear_dirichlet(&cfg, &neg), Err(Error::InvalidInput(_))));
    let shifted = Grid1D::span(1.0, 10.0, 0.1).unwrap();
    let cfg2 = lab(1, 1.0, shifted, 1.0).with_boundary(Boundary::DirichletZero);
    assert!(evolve_linear_dirichlet(&cfg2, &FieldStack::from_fn(shifted, 1, |_, _| 0.0)).is_err());
}

#[test]
fn frame_shift_beyond_grid_is_reported() {
    let grid = Grid1D::span(-5.0, 5.0, 0.05).unwrap();
    let cfg = EvolveConfig::new(2, 1.0, KppNonlinearity::quadratic(), grid, 5e-3, 1e6)
        .with_cascade_frames(1.0)
        .unwrap();
    let init = FieldStack::heaviside(grid, 2, 0.0);
    assert!(matches!(evolve_moving_frame(&cfg, &init), Err(Error::DomainExhausted { .. })));
}

#[test]
fn linear_lab_run_matches_heat_kernel() {
    // without coupling, V = e^{f'(0) t} omega where omega is the half-line heat flow
    let grid = Grid1D::span(0.0, 40.0, 0.02).unwrap();
    let bump = |x: f64| if (1.0..3.0).contains(&x) { (1.0 - (x - 2.0).abs()).max(0.0) } else { 0.0 };
    let init = FieldStack::from_fn(grid, 1, |_, x| bump(x));
    let cfg = EvolveConfig::new(1, 0.0, KppNonlinearity::quadratic(), grid, 1e-3, 4.0)
        .with_boundary(Boundary::DirichletZero)
        .with_snapshots(&[4.0]);
    let tr = evolve_linear_dirichlet(&cfg, &init).unwrap();
    let xs = [0.5, 2.0, 4.0, 8.0];
    let omega = halfline_heat(&grid, &init.values[0], 4.0, &xs).unwrap();
    for (x, w) in xs.iter().zip(omega) {
        let v = interpolate(&grid, &tr.snapshots[0].values[0], *x, 0.0, 0.0);
        let oracle = 4.0f64.exp() * w;
        assert!((v / oracle - 1.0).abs() < 5e-3, "x = {x}: {v} vs {oracle}");
    }
}

#[test]
fn moving_frame_matches_resampled_lab_run() {
    let t_end = 20.0;
    let k = 2;
    let lab_grid = Grid1D::span(-30.0, 70.0, 0.05).unwrap();
    let f = KppNonlinearity::quadratic();
    let lab_cfg = EvolveConfig::new(k, 1.0, f.clone(), lab_grid, 5e-3, t_end).with_snapshots(&[t_end]);
    let lab_run = evolve_lab(&lab_cfg, &FieldStack::heaviside(lab_grid, k, 0.0)).unwrap();

    let t0 = 1.0;
    let frames_cfg = EvolveConfig::new(k, 1.0, f, lab_grid, 5e-3, t_end)
        .with_cascade_frames(t0)
        .unwrap()
        .with_snapshots(&[t_end]);
    let frames = frames_cfg.frames.clone().unwrap();
    // lab Heaviside at 0 seen from the frames at t = 0
    let init = FieldStack::from_fn(lab_grid, k, |i, y| if y + frames[i].position(0.0) <= 0.0 { 1.0 } else { 0.0 });
    let moving = evolve_moving_frame(&frames_cfg, &init).unwrap();

    let window = Grid1D::span(-15.0, 15.0, 0.05).unwrap();
    let from_lab = resample_to_frame(&lab_run.snapshots[0], &frames, window);
    let direct = resample_to_frame(
        &moving.snapshots[0],
        &[FrameSpec::new(0.0, 0.0, 1.0).unwrap(); 2],
        window,
    );
    for i in 0..k {
        let worst = from_lab.values[i]
            .iter()
            .zip(&direct.values[i])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst < 2e-2, "component {i}: {worst}");
    }
}

#[test]
fn ordering_report_on_identical_runs() {
    let grid = Grid1D::span(-10.0, 30.0, 0.1).unwrap();
    let cfg = lab(2, 1.0, grid, 2.0).with_snapshots(&[1.0, 2.0]);
    let a = evolve_lab(&cfg, &FieldStack::heaviside(grid, 2, 0.0)).unwrap();
    let rep = check_ordering(&a, &a, 1.0).unwrap();
    assert!(rep.all_hold());
    assert!(rep.snapshots.iter().all(|s| s.worst_margin == 0.0));
    let b = evolve_lab(&cfg, &FieldStack::heaviside(grid, 2, 1.0)).unwrap();
    assert!(!check_ordering(&a, &b, 1.0).unwrap().all_hold());
    assert!(check_ordering(&b, &a, 1.0).unwrap().all_hold());
}

#[test]
fn self_similar_projection_agrees_with_w_system() {
    // same linear problem integrated in (t, x) and in (tau, eta); the gap closes at second order
    let (k, alpha, t0) = (2usize, 1.0, 25.0f64);
    let tau_end = 0.5f64;
    let w0 = |i: usize, e: f64| if e < 4.0 { e * (4.0 - e).powi(2) * (1.0 + 0.3 * i as f64 * e) } else { 0.0 };
    let eta = Grid1D::span(0.0, ETA_MAX, 0.01).unwrap();
    let rows: Vec<Vec<f64>> = (0..k).map(|i| eta.points().iter().map(|&e| w0(i, e)).collect()).collect();
    let mut wc = WSystemConfig::new(k, alpha, 1.0 / t0.sqrt(), tau_end);
    wc.dtau = 5e-4;
    wc.output_every = tau_end;
    let target = evolve_w_system(&wc, &eta, &rows).unwrap().last().unwrap().clone();
    let e0 = principal_eigenfunction(&eta).unwrap();

    let t_end = t0 * (tau_end.exp() - 1.0);
    let mut errors = Vec::new();
    for (dx, dt) in [(0.05, 2e-3), (0.025, 5e-4)] {
        let dt = t_end / (t_end / dt).round();
        let grid = Grid1D::span(0.0, ETA_MAX * (t_end + t0).sqrt(), dx).unwrap();
        let init = FieldStack::from_fn(grid, k, |i, x| {
            let e = x / t0.sqrt();
            w0(i, e) * (-e * e / 8.0 - x).exp()
        });
        let cfg = EvolveConfig::new(k, alpha, KppNonlinearity::quadratic(), grid, dt, t_end)
            .with_cascade_frames(t0)
            .unwrap()
            .with_boundary(Boundary::DirichletZero)
            .with_snapshots(&[t_end]);
        let run = evolve_linear_dirichlet(&cfg, &init).unwrap();
        let state = to_self_similar(&run.snapshots[0], t0, 1.0, eta).unwrap();
        assert!((state.tau - tau_end).abs() < 1e-9);
        let d = decompose(&eta, &e0, &state.w, state.tau);
        let err = (0..k).map(|i| (d.q[i] / target.q[i] - 1.0).abs()).fold(0.0, f64::max);
        errors.push(err);
    }
    assert!(errors[1] < 1e-2, "{errors:?}");
    assert!(errors[0] / errors[1] > 3.0, "{errors:?}");
}

fn random_profile(seed: &[f64], grid: &Grid1D, k: usize) -> FieldStack {
    // nonincreasing steps built from the seed values
    FieldStack::from_fn(*grid, k, |i, x| {
        let edge = seed[i % seed.len()] * 10.0;
        let level = 0.5 + 0.5 * seed[(i + 1) % seed.len()];
        if x <= edge {
            1.0
        } else if x <= edge + 5.0 {
            level
        } else {
            0.0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn comparison_principle_holds(
        seed in prop::collection::vec(0.0f64..1.0, 3),
        lift in 0.0f64..0.3,
    ) {
        let grid = Grid1D::span(-10.0, 40.0, 0.1).unwrap();
        let low = random_profile(&seed, &grid, 3);
        let mut high = low.clone();
        for v in high.values.iter_mut() {
            v.iter_mut().for_each(|u| *u = (*u + lift).min(1.0));
            let n = v.len();
            v[n - 1] = 0.0;
        }
        let cfg = lab(3, 1.0, grid, 3.0).with_snapshots(&[1.0, 3.0]);
        let a = evolve_lab(&cfg, &high).unwrap();
        let b = evolve_lab(&cfg, &low).unwrap();
        let rep = check_ordering(&a, &b, 1.0).unwrap();
        prop_assert!(rep.all_hold(), "{:?}", rep);
        prop_assert_eq!(a.diagnostics.clamp_count, 0);
    }
}
