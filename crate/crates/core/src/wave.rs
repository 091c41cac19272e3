//! Traveling-wave profiles `U'' + c U' + f(U) = 0`, `U(-inf) = 1`, `U(+inf) = 0`.
//!
//! Profiles are computed by integrating the first-order system forward from the unstable
//! manifold of the saddle `(U, U') = (1, 0)`. The start amplitude is corrected by Newton
//! iterations on the translation until `U(0) = 1/2` exactly, so every profile shares the same
//! anchor and shifts measured against it are comparable.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kpp::{dispersion, interpolate, Grid1D, KppNonlinearity};

/// Speeds closer than this to `c*` are treated as the minimal speed.
pub const CRITICAL_SPEED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub lambda_est: f64,
    /// Standard error of `lambda_est` from the linear regression at the optimum.
    pub lambda_stderr: f64,
    /// `k_c` in `k_c e^{-lambda x}` for `c > c*`; `k*` in `(x + k*) e^{-lambda x}` at `c = c*`,
    /// after translating so that the tail amplitude is one.
    pub k_const: f64,
    /// Amplitude `A` of the tail in the anchored coordinates, `U ~ A (x + k) e^{-lambda x}`.
    pub amplitude: f64,
    pub linear_factor: bool,
    /// Root-mean-square residual of `ln U` over the window.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveProfile {
    pub speed: f64,
    /// Minimal speed of the nonlinearity the profile was computed for.
    pub cstar: f64,
    pub grid: Grid1D,
    pub values: Vec<f64>,
    /// Position where `U = 1/2` before translation; always 0 after normalization.
    pub anchor: f64,
    pub tail: TailFit,
    /// Maximum centered-difference ODE residual on the grid.
    pub ode_residual: f64,
}

impl WaveProfile {
    /// Linear interpolation, clamped to the end values outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        interpolate(
            &self.grid,
            &self.values,
            x,
            self.values[0],
            self.values[self.grid.n - 1],
        )
    }

    /// Interval `[a, b]` where `lo <= U <= hi` (U is decreasing).
    pub fn level_window(&self, lo: f64, hi: f64) -> (f64, f64) {
        let a = crossing(&self.grid, &self.values, hi).unwrap_or(self.grid.x0);
        let b = crossing(&self.grid, &self.values, lo).unwrap_or(self.grid.x_end());
        (a, b)
    }
}

/// First downward crossing of `level` by linear interpolation.
fn crossing(grid: &Grid1D, values: &[f64], level: f64) -> Option<f64> {
    values.windows(2).enumerate().find_map(|(j, w)| {
        if w[0] >= level && w[1] < level {
            Some(grid.x(j) + grid.dx * (w[0] - level) / (w[0] - w[1]))
        } else {
            None
        }
    })
}

#[inline]
fn rhs(f: &KppNonlinearity, c: f64, u: f64, p: f64) -> (f64, f64) {
    (p, -c * p - f.value(u.clamp(0.0, 1.0)))
}

fn rk4_step(f: &KppNonlinearity, c: f64, u: f64, p: f64, h: f64) -> (f64, f64) {
    let (k1u, k1p) = rhs(f, c, u, p);
    let (k2u, k2p) = rhs(f, c, u + 0.5 * h * k1u, p + 0.5 * h * k1p);
    let (k3u, k3p) = rhs(f, c, u + 0.5 * h * k2u, p + 0.5 * h * k2p);
    let (k4u, k4p) = rhs(f, c, u + h * k3u, p + h * k3p);
    (
        u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

struct Shot {
    u: Vec<f64>,
    p: Vec<f64>,
}

/// Integrates from grid point `start` with `1 - U = s0`, sampling every grid point. Points left
/// of `start` are filled from the linearization at the saddle.
fn shoot(
    f: &KppNonlinearity,
    c: f64,
    mu: f64,
    grid: &Grid1D,
    start: usize,
    s0: f64,
    substeps: usize,
) -> Result<Shot> {
    let h = grid.dx / substeps as f64;
    let mut us = Vec::with_capacity(grid.n);
    let mut ps = Vec::with_capacity(grid.n);
    for j in 0..=start {
        let s = s0 * (mu * (j as f64 - start as f64) * grid.dx).exp();
        us.push(1.0 - s);
        ps.push(-mu * s);
    }
    let (mut u, mut p) = (us[start], ps[start]);
    for j in start + 1..grid.n {
        for _ in 0..substeps {
            (u, p) = rk4_step(f, c, u, p, h);
        }
        if !(u > 0.0) || !(p < 0.0) || u >= 1.0 || !u.is_finite() {
            return Err(Error::NoConvergence(format!(
                "monotonicity lost at x = {:.6} (U = {u:e}, U' = {p:e})",
                grid.x(j)
            )));
        }
        us.push(u);
        ps.push(p);
    }
    Ok(Shot { u: us, p: ps })
}

/// Half-crossing via Newton iteration on the cubic Hermite interpolant of a cell.
fn half_crossing(grid: &Grid1D, shot: &Shot) -> Option<f64> {
    let j = shot.u.windows(2).position(|w| w[0] >= 0.5 && w[1] < 0.5)?;
    let h = grid.dx;
    let (u0, u1, p0, p1) = (shot.u[j], shot.u[j + 1], shot.p[j], shot.p[j + 1]);
    let herm = |t: f64| -> (f64, f64) {
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * u0
            + (t3 - 2.0 * t2 + t) * h * p0
            + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * h * p1;
        let dv = (6.0 * t2 - 6.0 * t) * u0
            + (3.0 * t2 - 4.0 * t + 1.0) * h * p0
            + (-6.0 * t2 + 6.0 * t) * u1
            + (3.0 * t2 - 2.0 * t) * h * p1;
        (v - 0.5, dv)
    };
    let mut t = (u0 - 0.5) / (u0 - u1);
    for _ in 0..50 {
        let (g, dg) = herm(t);
        let step = g / dg;
        t = (t - step).clamp(0.0, 1.0);
        if step.abs() < 1e-15 {
            break;
        }
    }
    Some(grid.x(j) + t * h)
}

/// Maximum of `|U'' + c U' + f(U)|` under centered differences at interior points.
pub fn ode_residual(f: &KppNonlinearity, c: f64, grid: &Grid1D, values: &[f64]) -> f64 {
    let dx = grid.dx;
    values
        .windows(3)
        .map(|w| {
            let d2 = (w[2] - 2.0 * w[1] + w[0]) / (dx * dx);
            let d1 = (w[2] - w[0]) / (2.0 * dx);
            (d2 + c * d1 + f.value(w[1])).abs()
        })
        .fold(0.0, f64::max)
}

/// Solves for the traveling wave of speed `c` on `[-half_width, half_width]`, anchored so that
/// `U(0) = 1/2`. The grid is refined until the centered-difference residual is below `100 tol`.
pub fn solve_profile(f: &KppNonlinearity, c: f64, half_width: f64, tol: f64) -> Result<WaveProfile> {
    if !(tol > 1e-14 && tol < 1e-4) {
        return Err(Error::InvalidInput(format!("tol {tol} outside (1e-14, 1e-4)")));
    }
    if !(half_width > 1.0) || !half_width.is_finite() {
        return Err(Error::InvalidInput(format!("half_width {half_width}")));
    }
    let disp = dispersion(f, Some(c))?;
    let fp1 = f.fprime1();
    if !(fp1 < 0.0) {
        return Err(Error::InvalidInput("f'(1) must be negative".into()));
    }
    // unstable eigenvalue of the saddle at U = 1
    let mu = (-c + (c * c - 4.0 * fp1).sqrt()) / 2.0;

    let mut dx = 0.02f64;
    let mut last_residual = f64::INFINITY;
    for _refine in 0..8 {
        let cells = (half_width / dx).ceil() as usize;
        let dx_exact = half_width / cells as f64;
        // The integration starts where 1 - U is about 1e-7: the quadratic error of the
        // linearization is then ~1e-14, while 1 - U keeps ~9 significant digits next to 1.
        let depth = 16.1 / mu;
        let lead = ((depth - half_width).max(0.0) / dx_exact).ceil() as usize;
        let grid_ext = Grid1D::new(
            -half_width - lead as f64 * dx_exact,
            dx_exact,
            2 * cells + 1 + lead,
        )?;
        let start = ((half_width - depth).max(0.0) / dx_exact).floor() as usize;
        let substeps = (dx_exact / 2e-3).ceil().max(1.0) as usize;

        // Newton on the translation through ln s0: d(x_half)/d(ln s0) = -1/mu.
        let mut s0 = 1e-7f64;
        let mut shot = None;
        for _ in 0..60 {
            let sh = shoot(f, c, mu, &grid_ext, start, s0, substeps)?;
            let xh = half_crossing(&grid_ext, &sh).ok_or_else(|| {
                Error::NoConvergence("profile never crosses 1/2 inside the domain".into())
            })?;
            if xh.abs() < 1e-8 {
                shot = Some(sh);
                break;
            }
            s0 *= (mu * xh).exp();
            if s0 > 1e-3 || s0 < 1e-300 {
                return Err(Error::NoConvergence(format!(
                    "start amplitude {s0:e} left the linear regime"
                )));
            }
        }
        let shot = shot.ok_or_else(|| Error::NoConvergence("translation Newton stalled".into()))?;
        let values = shot.u[lead..].to_vec();
        let grid = Grid1D::new(-half_width, dx_exact, 2 * cells + 1)?;
        let residual = ode_residual(f, c, &grid, &values);
        last_residual = residual;
        if residual < 100.0 * tol {
            if values[0] <= 1.0 - 1e-4 || values[grid.n - 1] >= 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "half_width {half_width} too small: U(-L) = {}, U(L) = {:e}",
                    values[0],
                    values[grid.n - 1]
                )));
            }
            let mut profile = WaveProfile {
                speed: c,
                cstar: disp.cstar,
                grid,
                values,
                anchor: 0.0,
                tail: TailFit {
                    lambda_est: f64::NAN,
                    lambda_stderr: f64::NAN,
                    k_const: f64::NAN,
                    amplitude: f64::NAN,
                    linear_factor: (c - disp.cstar).abs() < CRITICAL_SPEED_TOL,
                    residual: f64::NAN,
                },
                ode_residual: residual,
            };
            if let Ok(window) = default_tail_window(&profile) {
                if let Ok(fit) = tail_fit(&profile, window) {
                    profile.tail = fit;
                }
            }
            return Ok(profile);
        }
        dx /= 2.0;
    }
    Err(Error::NoConvergence(format!(
        "ODE residual {last_residual:e} above {:e} after refinement",
        100.0 * tol
    )))
}

/// Window where `1e-8 <= U <= 1e-2`.
pub fn default_tail_window(profile: &WaveProfile) -> Result<(f64, f64)> {
    let (a, b) = profile.level_window(1e-8, 1e-2);
    if !(b > a) {
        return Err(Error::InsufficientData { needed: 10, got: 0 });
    }
    Ok((a, b))
}

/// Ordinary least squares of `y` on `(1, x)`; returns (intercept, slope, slope stderr, rms).
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let dof = (n - 2.0).max(1.0);
    let stderr = (ssr / dof / sxx).sqrt();
    (intercept, slope, stderr, (ssr / n).sqrt())
}

/// Fits the tail of a profile over `window = (a, b)` in x.
///
/// For `c > c*` the model is `ln U = ln k_c - lambda x`. At the minimal speed the model is
/// `ln U = ln A + ln(x + k) - lambda x`; `k` is found by a one-dimensional search with the
/// remaining parameters solved by least squares, and reported as `k* = k + ln(A)/lambda`,
/// the constant of the translate with unit amplitude.
pub fn tail_fit(profile: &WaveProfile, window: (f64, f64)) -> Result<TailFit> {
    let (a, b) = window;
    let grid = &profile.grid;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..grid.n)
        .filter(|&j| {
            let x = grid.x(j);
            x >= a && x <= b
        })
        .map(|j| (grid.x(j), profile.values[j]))
        .unzip();
    if xs.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: xs.len(),
        });
    }
    if ys.iter().any(|&u| !(u > 0.0) || u > 1e-2 * (1.0 + 1e-9)) {
        return Err(Error::InvalidInput(
            "tail window must lie where 0 < U < 1e-2".into(),
        ));
    }
    let lny: Vec<f64> = ys.iter().map(|u| u.ln()).collect();
    let critical = (profile.speed - profile.cstar).abs() < CRITICAL_SPEED_TOL;
    fit_tail_samples(&xs, &lny, critical)
}

/// Tail fit on raw samples `(x, ln U)`; `critical` selects the `(x + k) e^{-lambda x}` model.
pub fn fit_tail_samples(xs: &[f64], lny: &[f64], critical: bool) -> Result<TailFit> {
    if xs.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: xs.len(),
        });
    }
    if !critical {
        let (icpt, slope, se, rms) = linear_fit(xs, lny);
        return Ok(TailFit {
            lambda_est: -slope,
            lambda_stderr: se,
            k_const: icpt.exp(),
            amplitude: icpt.exp(),
            linear_factor: false,
            residual: rms,
        });
    }
    let xmin = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ssr_at = |k: f64| -> (f64, (f64, f64, f64, f64)) {
        let z: Vec<f64> = lny
            .iter()
            .zip(xs)
            .map(|(l, x)| l - (x + k).ln())
            .collect();
        let fit = linear_fit(xs, &z);
        (fit.3, fit)
    };
    // coarse scan in k over (-xmin, xmin + 10 (xmax - xmin) + 100], then golden refinement
    let lo = -xmin + 1e-9 * (1.0 + xmin.abs());
    let hi = xmin.abs() + 10.0 * (xmax - xmin) + 100.0;
    let scan = 400;
    let ks: Vec<f64> = (0..=scan)
        .map(|i| lo + (hi - lo) * ((i as f64 / scan as f64).powi(3)))
        .collect();
    let (ibest, _) = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| (i, ssr_at(k).0))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let mut left = ks[ibest.saturating_sub(1)];
    let mut right = ks[(ibest + 1).min(scan)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c1 = right - phi * (right - left);
    let mut c2 = left + phi * (right - left);
    let mut f1 = ssr_at(c1).0;
    let mut f2 = ssr_at(c2).0;
    for _ in 0..200 {
        if (right - left).abs() < 1e-13 * (1.0 + left.abs()) {
            break;
        }
        if f1 < f2 {
            right = c2;
            c2 = c1;
            f2 = f1;
            c1 = right - phi * (right - left);
            f1 = ssr_at(c1).0;
        } else {
            left = c1;
            c1 = c2;
            f1 = f2;
            c2 = left + phi * (right - left);
            f2 = ssr_at(c2).0;
        }
    }
    let k = 0.5 * (left + right);
    let (rms, (icpt, slope, se, _)) = ssr_at(k);
    let lambda = -slope;
    Ok(TailFit {
        lambda_est: lambda,
        lambda_stderr: se,
        k_const: k + icpt / lambda,
        amplitude: icpt.exp(),
        linear_factor: true,
        residual: rms,
    })
}

/// Aligns a front-like field with a profile.
///
/// Returns `(shift, sup_distance)` where `shift` minimizes
/// `max_y |field(y + shift) - U(y)|` over the window `0.01 <= U(y) <= 0.99`, found by
/// golden-section search. A field equal to the profile moved right by `s` gives `shift = s`.
pub fn shift_align(grid: &Grid1D, field: &[f64], profile: &WaveProfile) -> Result<(f64, f64)> {
    if field.len() != grid.n {
        return Err(Error::InvalidInput("field length differs from grid".into()));
    }
    let fmax = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fmin = field.iter().copied().fold(f64::INFINITY, f64::min);
    let half = field
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - 0.5) * (w[1] - 0.5) <= 0.0 && w[0] != w[1])
        .map(|(j, w)| grid.x(j) + grid.dx * (w[0] - 0.5) / (w[0] - w[1]))
        .last();
    let Some(s0) = half else {
        return Err(Error::NoFront { level: 0.5 });
    };
    if fmax < 0.95 || fmin > 0.05 {
        return Err(Error::InvalidInput(format!(
            "field range [{fmin}, {fmax}] does not span [0.05, 0.95]"
        )));
    }
    let (wa, wb) = profile.level_window(0.01, 0.99);
    let pg = &profile.grid;
    let in_window: Vec<usize> = (0..pg.n)
        .filter(|&j| pg.x(j) >= wa && pg.x(j) <= wb)
        .collect();
    let stride = (in_window.len() / 20_000).max(1);
    let ys: Vec<(f64, f64)> = in_window
        .iter()
        .step_by(stride)
        .map(|&j| (pg.x(j), profile.values[j]))
        .collect();
    let first = field[0];
    let last = field[grid.n - 1];
    let distance = |s: f64| -> f64 {
        ys.iter()
            .map(|&(y, u)| (interpolate(grid, field, y + s, first, last) - u).abs())
            .fold(0.0, f64::max)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut left = s0 - 1.5;
    let mut right = s0 + 1.5;
    let mut c1 = right - phi * (right - left);
    let mut c2 = left + phi * (right - left);
    let mut f1 = distance(c1);
    let mut f2 = distance(c2);
    while right - left > 1e-12 * (1.0 + s0.abs()) {
        if f1 < f2 {
            right = c2;
            c2 = c1;
            f2 = f1;
            c1 = right - phi * (right - left);
            f1 = distance(c1);
        } else {
            left = c1;
            c1 = c2;
            f1 = f2;
            c2 = left + phi * (right - left);
            f2 = distance(c2);
        }
    }
    let s = 0.5 * (left + right);
    Ok((s, distance(s)))
}
