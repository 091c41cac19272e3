use kpp_cascade::heat::{dipole_moment, far_field, far_field_constant, forced_halfline_heat, halfline_heat};
use kpp_cascade::kpp::Grid1D;

/// `y e^{-y^2/(4s)}` evolves to `x (s/(s+t))^{3/2} e^{-x^2/(4(s+t))}` under the half-line flow.
fn odd_gaussian(s: f64, t: f64, x: f64) -> f64 {
    x * (s / (s + t)).powf(1.5) * (-x * x / (4.0 * (s + t))).exp()
}

#[test]
fn exact_odd_gaussian_evolution() {
    let g = Grid1D::span(0.0, 14.0, 0.005).unwrap();
    let w0: Vec<f64> = g.points().iter().map(|&y| odd_gaussian(1.0, 0.0, y)).collect();
    let xs: Vec<f64> = (1..40).map(|j| 0.25 * j as f64).collect();
    for t in [0.1, 1.0, 5.0] {
        let got = halfline_heat(&g, &w0, t, &xs).unwrap();
        for (&x, &w) in xs.iter().zip(&got) {
            assert!((w - odd_gaussian(1.0, t, x)).abs() < 1e-5, "t {t} x {x}");
        }
    }
}

#[test]
fn far_field_and_forced_response() {
    let g = Grid1D::span(0.0, 14.0, 0.01).unwrap();
    let w0: Vec<f64> = g.points().iter().map(|&y| odd_gaussian(1.0, 0.0, y)).collect();
    // int y^2 e^{-y^2/4} dy = 2 sqrt(pi)
    let c = far_field_constant(&g, &w0);
    assert!((c - 1.0).abs() < 1e-6, "{c}");
    assert!((dipole_moment(&g, &w0) - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-5);
    let t: f64 = 400.0;
    for m in [2.0, 3.0, 4.0] {
        let x = m * t.sqrt();
        let w = halfline_heat(&g, &w0, t, &[x]).unwrap()[0];
        assert!((w / far_field(c, t, x) - 1.0).abs() < 0.01);
    }
    // zeta = alpha t omega for forcing by the free flow
    let xs = [5.0, 10.0];
    let z = forced_halfline_heat(&g, &w0, 2.0, 10.0, &xs, 1e-5).unwrap();
    for (&x, &zz) in xs.iter().zip(&z) {
        let oracle = 2.0 * 10.0 * odd_gaussian(1.0, 10.0, x);
        assert!((zz / oracle - 1.0).abs() < 1e-3, "{zz} {oracle}");
    }
}
