//! Heat flow on the half line `x > 0` with zero Dirichlet data, and its forced counterpart
//! `zeta_t = zeta_xx + alpha omega`.
//!
//! Initial data are piecewise linear on a [`Grid1D`] inside `[0, inf)` and vanish beyond it;
//! the image-method kernel is integrated against them exactly.

use std::f64::consts::PI;

use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::kpp::Grid1D;

/// `erf(b) - erf(a)` without cancellation when both arguments share a sign.
fn erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        erfc(a) - erfc(b)
    } else if b <= 0.0 {
        erfc(-b) - erfc(-a)
    } else {
        erf(b) - erf(a)
    }
}

/// `int_a^b (c0 + c1 y) e^{-(y - x)^2 / s^2} dy`.
fn gauss_linear(c0: f64, c1: f64, a: f64, b: f64, x: f64, s: f64) -> f64 {
    let (ua, ub) = ((a - x) / s, (b - x) / s);
    let sqrt_pi = PI.sqrt();
    s * (c0 + c1 * x) * 0.5 * sqrt_pi * erf_diff(ua, ub)
        + c1 * s * s * 0.5 * ((-ua * ua).exp() - (-ub * ub).exp())
}

/// Half-line heat semigroup at time `t` applied to piecewise-linear data, evaluated at `x`.
fn apply_kernel(grid: &Grid1D, values: &[f64], t: f64, x: f64) -> f64 {
    let s = (4.0 * t).sqrt();
    let mut acc = 0.0;
    for j in 0..grid.n - 1 {
        let (a, b) = (grid.x(j), grid.x(j + 1));
        let (va, vb) = (values[j], values[j + 1]);
        if va == 0.0 && vb == 0.0 {
            continue;
        }
        let c1 = (vb - va) / (b - a);
        let c0 = va - c1 * a;
        // direct term, then the image term via y -> -y
        acc += gauss_linear(c0, c1, a, b, x, s) - gauss_linear(c0, -c1, -b, -a, x, s);
    }
    acc / (PI * 4.0 * t).sqrt()
}

fn check_data(grid: &Grid1D, values: &[f64]) -> Result<()> {
    if grid.x0 < 0.0 {
        return Err(Error::InvalidInput(format!("data must live on x >= 0, grid starts at {}", grid.x0)));
    }
    if values.len() != grid.n || grid.n < 2 {
        return Err(Error::InvalidInput("data length differs from grid".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite data".into()));
    }
    Ok(())
}

/// `omega(t, x)` for the half-line heat equation started from `omega0`.
pub fn halfline_heat(grid: &Grid1D, omega0: &[f64], t: f64, x_eval: &[f64]) -> Result<Vec<f64>> {
    check_data(grid, omega0)?;
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t = {t} must be positive")));
    }
    Ok(x_eval
        .iter()
        .map(|&x| if x <= 0.0 { 0.0 } else { apply_kernel(grid, omega0, t, x) })
        .collect())
}

/// Dipole moment `int x omega dx`, conserved by the Dirichlet half-line heat flow.
pub fn dipole_moment(grid: &Grid1D, values: &[f64]) -> f64 {
    // exact for piecewise-linear data
    (0..grid.n - 1)
        .map(|j| {
            let (a, b) = (grid.x(j), grid.x(j + 1));
            let (va, vb) = (values[j], values[j + 1]);
            (b - a) * (va * (2.0 * a + b) + vb * (a + 2.0 * b)) / 6.0
        })
        .sum()
}

/// Far-field constant `C = int y omega0 dy / (2 sqrt(pi))` in
/// `omega(t, x) ~ C x e^{-x^2/4t} / t^{3/2}`.
pub fn far_field_constant(grid: &Grid1D, omega0: &[f64]) -> f64 {
    dipole_moment(grid, omega0) / (2.0 * PI.sqrt())
}

pub fn far_field(c: f64, t: f64, x: f64) -> f64 {
    c * x * (-x * x / (4.0 * t)).exp() / t.powf(1.5)
}

/// `omega(s, .)` sampled on a grid fine enough for linear interpolation at scale `sqrt(s)`.
fn sample_flow(grid: &Grid1D, omega0: &[f64], s: f64) -> Result<(Grid1D, Vec<f64>)> {
    if s == 0.0 {
        return Ok((*grid, omega0.to_vec()));
    }
    let reach = grid.x_end() + 12.0 * s.sqrt();
    let h = (s.sqrt() / 20.0).max(grid.dx.min(s.sqrt() / 4.0)).min(0.5);
    let g = Grid1D::span(0.0, reach, h)?;
    let vals = halfline_heat(grid, omega0, s, &g.points())?;
    Ok((g, vals))
}

/// `zeta(t, x) = alpha int_0^t [G(t - s) omega(s, .)](x) ds` by a two-level quadrature: the
/// inner kernel integral is exact for the piecewise-linear samples of `omega(s, .)`, the outer
/// integral is a trapezoid rule in `u` with `s = t (1 - cos(pi u)) / 2` (clustering nodes near
/// both ends), doubled until successive estimates agree to `tol` (relative).
pub fn forced_halfline_heat(
    grid: &Grid1D,
    omega0: &[f64],
    alpha: f64,
    t: f64,
    x_eval: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    check_data(grid, omega0)?;
    if !(t > 1.0) {
        return Err(Error::InvalidInput(format!("t = {t} must exceed 1")));
    }
    if alpha == 0.0 {
        return Ok(vec![0.0; x_eval.len()]);
    }
    let integrand = |u: f64| -> Result<Vec<f64>> {
        let s = 0.5 * t * (1.0 - (PI * u).cos());
        let jac = 0.5 * t * PI * (PI * u).sin();
        if jac == 0.0 {
            return Ok(vec![0.0; x_eval.len()]);
        }
        let (g, w) = sample_flow(grid, omega0, s)?;
        let lag = t - s;
        Ok(x_eval
            .iter()
            .map(|&x| {
                if x <= 0.0 {
                    0.0
                } else if lag <= 0.0 {
                    jac * crate::kpp::interpolate(&g, &w, x, 0.0, 0.0)
                } else {
                    jac * apply_kernel(&g, &w, lag, x)
                }
            })
            .collect())
    };

    const MIN_LEVEL: u32 = 4;
    const MAX_LEVEL: u32 = 12;
    let m = x_eval.len();
    // interior sum at level 1: endpoints carry zero Jacobian
    let mut sum = integrand(0.5)?;
    let mut panels = 2usize;
    let mut previous = sum.iter().map(|v| v * 0.5).collect::<Vec<_>>();
    for level in 2..=MAX_LEVEL {
        let h = 1.0 / (2 * panels) as f64;
        for j in 0..panels {
            let add = integrand((2 * j + 1) as f64 * h)?;
            sum.iter_mut().zip(&add).for_each(|(a, b)| *a += b);
        }
        panels *= 2;
        let estimate: Vec<f64> = sum.iter().map(|v| v * h).collect();
        let scale = estimate.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let change = (0..m).fold(0.0f64, |a, i| a.max((estimate[i] - previous[i]).abs()));
        previous = estimate;
        if level >= MIN_LEVEL && change <= tol * scale.max(f64::MIN_POSITIVE) {
            return Ok(previous.into_iter().map(|v| alpha * v).collect());
        }
    }
    let scale = previous.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Err(Error::ToleranceNotMet {
        estimate: scale,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(center: f64, width: f64) -> (Grid1D, Vec<f64>) {
        // unit-mass tent on [center - width, center + width]
        let g = Grid1D::new(center - width, width / 50.0, 101).unwrap();
        let v = g
            .points()
            .iter()
            .map(|&y| ((width - (y - center).abs()) / (width * width)).max(0.0))
            .collect();
        (g, v)
    }

    #[test]
    fn point_mass_matches_kernel() {
        let (g, v) = bump(1.0, 0.01);
        let got = halfline_heat(&g, &v, 1.0, &[2.0, 0.0]).unwrap();
        let oracle = ((-0.25f64).exp() - (-2.25f64).exp()) / (4.0 * PI).sqrt();
        assert!((got[0] - oracle).abs() < 1e-4, "{} vs {oracle}", got[0]);
        assert!((oracle - 0.190).abs() < 1e-3);
        assert_eq!(got[1], 0.0);
        assert!(halfline_heat(&g, &v, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn linear_segment_integral_is_exact() {
        // compare one segment against a fine midpoint rule
        let (c0, c1, a, b, x, s) = (0.3, -0.7, 0.2, 1.1, 0.9, 0.8);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mid: f64 = (0..n)
            .map(|j| {
                let y = a + (j as f64 + 0.5) * h;
                (c0 + c1 * y) * (-(y - x) * (y - x) / (s * s)).exp()
            })
            .sum::<f64>()
            * h;
        assert!((gauss_linear(c0, c1, a, b, x, s) - mid).abs() < 1e-10);
    }

    #[test]
    fn far_field_profile() {
        let (g, v) = bump(0.5, 0.5);
        let c = far_field_constant(&g, &v);
        assert!((c - 0.5 / (2.0 * PI.sqrt())).abs() < 1e-12);
        let t: f64 = 100.0;
        let x = 6.0 * t.sqrt();
        let got = halfline_heat(&g, &v, t, &[x]).unwrap()[0];
        assert!((got / far_field(c, t, x) - 1.0).abs() < 0.05);
    }

    #[test]
    fn dipole_is_conserved() {
        let (g, v) = bump(1.5, 1.0);
        let m0 = dipole_moment(&g, &v);
        for t in [0.5, 2.0, 10.0] {
            let xs = Grid1D::span(0.0, 3.0 + 14.0 * f64::sqrt(t), 0.01).unwrap();
            let w = halfline_heat(&g, &v, t, &xs.points()).unwrap();
            assert!((dipole_moment(&xs, &w) / m0 - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn duhamel_equals_alpha_t_omega() {
        // zeta = alpha t omega because omega solves the homogeneous equation
        let (g, v) = bump(1.0, 0.5);
        let t: f64 = 20.0;
        let xs = [0.0, 1.0, t.sqrt(), 3.0 * t.sqrt()];
        let zeta = forced_halfline_heat(&g, &v, 0.7, t, &xs, 1e-4).unwrap();
        let omega = halfline_heat(&g, &v, t, &xs).unwrap();
        assert_eq!(zeta[0], 0.0);
        for i in 1..xs.len() {
            assert!((zeta[i] / (0.7 * t * omega[i]) - 1.0).abs() < 2e-3, "{i}");
        }
        assert!(forced_halfline_heat(&g, &v, 0.0, t, &xs, 1e-4).unwrap().iter().all(|z| *z == 0.0));
        assert!(forced_halfline_heat(&g, &v, 1.0, 0.5, &xs, 1e-4).is_err());
    }
}
