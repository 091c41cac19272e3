//! Self-similar variables for the linearized cascade.
//!
//! With `tau = ln(t + t0) - ln t0` and `eta = x / sqrt(t + t0)`, the linearized Dirichlet system
//! in the moving frames becomes, after the symmetrizing substitution
//! `w = V e^{lambda* x} e^{eta^2/8} e^{-tau/2}`,
//!
//! ```text
//! w^i_tau + M w^i + (k-i) w^i = -(3/2+i-k) eps e^{-tau/2} (w^i_eta - eta w^i / 4)
//!                               + alpha w^{i+1}(eta + delta) e^{-delta^2/8} e^{-eta delta/4}
//! M = -d^2/deta^2 + eta^2/16 - 3/4
//! ```
//!
//! on `eta > 0` with `w(0) = 0`. `M` has the Dirichlet ground state
//! `e0 = eta e^{-eta^2/8} / (2 sqrt(pi))^{1/2}` with eigenvalue 0 and a unit spectral gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kpp::{interpolate, FieldStack, Grid1D};
use crate::tridiag::Tridiagonal;
use crate::wave::linear_fit;

/// Default truncation radius of the `eta` domain.
pub const ETA_MAX: f64 = 12.0;

fn check_eta_grid(grid: &Grid1D, min_len: f64) -> Result<()> {
    if grid.x0.abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("eta grid must start at 0, got {}", grid.x0)));
    }
    if grid.x_end() < min_len - 1e-9 {
        return Err(Error::InvalidInput(format!(
            "eta grid ends at {}, needs at least {min_len}",
            grid.x_end()
        )));
    }
    Ok(())
}

/// `e0` sampled on `grid` (which must start at 0 and reach at least 10).
pub fn principal_eigenfunction(grid: &Grid1D) -> Result<Vec<f64>> {
    check_eta_grid(grid, 10.0)?;
    let norm = (2.0 * std::f64::consts::PI.sqrt()).sqrt();
    Ok(grid.points().iter().map(|&e| e * (-e * e / 8.0).exp() / norm).collect())
}

/// Trapezoid `<a, b>` on `grid`.
pub fn inner(grid: &Grid1D, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let s: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    grid.dx * (s - 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

pub fn norm(grid: &Grid1D, a: &[f64]) -> f64 {
    inner(grid, a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MApplied {
    pub values: Vec<f64>,
    /// Set when `d eta > 0.2`, where the second difference is too coarse to trust.
    pub warning: Option<String>,
}

fn potential(eta: f64) -> f64 {
    eta * eta / 16.0 - 0.75
}

/// `M w` by centered second differences, with `w = 0` just beyond the last grid point.
pub fn apply_m(w: &[f64], grid: &Grid1D) -> Result<MApplied> {
    check_eta_grid(grid, 0.0)?;
    if w.len() != grid.n {
        return Err(Error::InvalidInput("w length differs from grid".into()));
    }
    if w[0].abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("w(0) = {} violates the Dirichlet condition", w[0])));
    }
    let n = grid.n;
    let h2 = grid.dx * grid.dx;
    let mut values = vec![0.0; n];
    for j in 1..n {
        let right = if j + 1 < n { w[j + 1] } else { 0.0 };
        values[j] = -(w[j - 1] - 2.0 * w[j] + right) / h2 + potential(grid.x(j)) * w[j];
    }
    let warning = (grid.dx > 0.2).then(|| format!("d eta = {} > 0.2: coarse second difference", grid.dx));
    Ok(MApplied { values, warning })
}

/// `Q(w) = int (w'^2 + (eta^2/16 - 3/4) w^2)` with forward differences for `w'` and the
/// trapezoid rule for the potential term.
pub fn quadratic_form_q(w: &[f64], grid: &Grid1D) -> Result<f64> {
    check_eta_grid(grid, 0.0)?;
    if w.len() != grid.n {
        return Err(Error::InvalidInput("w length differs from grid".into()));
    }
    if w[grid.n - 1].abs() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "w does not decay before the truncation radius (|w(L)| = {:e})",
            w[grid.n - 1].abs()
        )));
    }
    let grad: f64 = w.windows(2).map(|p| (p[1] - p[0]) * (p[1] - p[0])).sum::<f64>() / grid.dx;
    let pot: Vec<f64> = grid.points().iter().zip(w).map(|(&e, &u)| potential(e) * u).collect();
    Ok(grad + inner(grid, &pot, w))
}

/// Interior (`j = 1..n-1`) matrix of `M + shift`, zero Dirichlet at both ends.
fn m_matrix(grid: &Grid1D, shift: f64) -> Tridiagonal {
    let m = grid.n - 1;
    let h2 = grid.dx * grid.dx;
    let diag = (1..grid.n).map(|j| 2.0 / h2 + potential(grid.x(j)) + shift).collect();
    Tridiagonal::new(vec![-1.0 / h2; m], diag, vec![-1.0 / h2; m])
}

/// Inverse iteration for the eigenpair of the discretized `M` nearest `sigma`, keeping the
/// iterate orthogonal to `deflate`. Returns the Rayleigh quotient and a unit-norm vector.
fn inverse_iteration(grid: &Grid1D, sigma: f64, deflate: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
    let lu = m_matrix(grid, -sigma).factor();
    let n = grid.n;
    let mut v: Vec<f64> = grid
        .points()
        .iter()
        .map(|&e| e * (1.0 + e) * (-e * e / 10.0).exp())
        .collect();
    let project = |v: &mut Vec<f64>| {
        for d in deflate {
            let c = inner(grid, d, v) / inner(grid, d, d);
            v.iter_mut().zip(d.iter()).for_each(|(x, y)| *x -= c * y);
        }
        let s = norm(grid, v);
        v.iter_mut().for_each(|x| *x /= s);
    };
    project(&mut v);
    let mut lambda = f64::NAN;
    for _ in 0..200 {
        let mut rhs = v[1..].to_vec();
        lu.solve_in_place(&mut rhs);
        let mut next = vec![0.0; n];
        next[1..].copy_from_slice(&rhs);
        project(&mut next);
        let mv = apply_m(&next, grid)?.values;
        let rq = inner(grid, &mv, &next);
        let change = (rq - lambda).abs();
        lambda = rq;
        v = next;
        if change < 1e-13 {
            return Ok((lambda, v));
        }
    }
    Err(Error::NoConvergence("inverse iteration did not settle".into()))
}

/// First excited eigenpair of the discretized `M`, by inverse iteration deflated against the
/// discrete ground state.
pub fn excited_eigenpair(grid: &Grid1D) -> Result<(f64, Vec<f64>)> {
    check_eta_grid(grid, 10.0)?;
    let (_, ground) = inverse_iteration(grid, -0.5, &[])?;
    inverse_iteration(grid, 0.8, &[&ground])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub tau: f64,
    /// `q^i = <e0, w^i>`.
    pub q: Vec<f64>,
    /// `||w^i - q^i e0||`.
    pub remainder_norm: Vec<f64>,
}

/// Projects each row onto `e0`. `e0` must be the sampled ground state on `grid`.
pub fn decompose(grid: &Grid1D, e0: &[f64], rows: &[Vec<f64>], tau: f64) -> SpectralDecomposition {
    let e0n = inner(grid, e0, e0);
    let mut q = Vec::with_capacity(rows.len());
    let mut remainder_norm = Vec::with_capacity(rows.len());
    for w in rows {
        // exact projection under the discrete inner product
        let c = inner(grid, e0, w) / e0n;
        let hat: Vec<f64> = w.iter().zip(e0).map(|(a, b)| a - c * b).collect();
        q.push(c);
        remainder_norm.push(norm(grid, &hat));
    }
    SpectralDecomposition {
        tau,
        q,
        remainder_norm,
    }
}

/// `delta(tau) = (tau + ln t0) / (lambda* sqrt(t0 e^tau))`.
pub fn delta_shift(tau: f64, t0: f64, lambdastar: f64) -> f64 {
    (tau + t0.ln()) / (lambdastar * (t0 * tau.exp()).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarState {
    pub tau: f64,
    pub eta_grid: Grid1D,
    pub p: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub delta_tau: f64,
}

/// Maps a linear Dirichlet snapshot `V(t, x)` (taken in the cascade frames with offset `t0`)
/// to self-similar variables on `eta_grid`.
pub fn to_self_similar(
    snapshot: &FieldStack,
    t0: f64,
    lambdastar: f64,
    eta_grid: Grid1D,
) -> Result<SelfSimilarState> {
    check_eta_grid(&eta_grid, 0.0)?;
    if !(t0 > 0.0) {
        return Err(Error::InvalidInput(format!("t0 = {t0} must be positive")));
    }
    let t = snapshot.time;
    let tau = (t + t0).ln() - t0.ln();
    let scale = (t + t0).sqrt();
    let mut p = Vec::with_capacity(snapshot.k());
    let mut w = Vec::with_capacity(snapshot.k());
    for v in &snapshot.values {
        let (pi, wi): (Vec<f64>, Vec<f64>) = eta_grid
            .points()
            .iter()
            .map(|&e| {
                let x = e * scale;
                let vv = interpolate(&snapshot.grid, v, x, 0.0, 0.0);
                let pv = if vv == 0.0 { 0.0 } else { vv * (lambdastar * x).exp() };
                (pv, pv * (e * e / 8.0 - tau / 2.0).exp())
            })
            .unzip();
        p.push(pi);
        w.push(wi);
    }
    Ok(SelfSimilarState {
        tau,
        eta_grid,
        p,
        w,
        epsilon: 1.0 / (lambdastar * t0.sqrt()),
        delta_tau: delta_shift(tau, t0, lambdastar),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WSystemConfig {
    pub k: usize,
    pub alpha: f64,
    /// `eps = 1 / (lambda* sqrt(t0))`; fixes `t0`.
    pub epsilon: f64,
    #[serde(default = "one")]
    pub lambdastar: f64,
    pub tau_end: f64,
    #[serde(default = "default_dtau")]
    pub dtau: f64,
    #[serde(default = "default_output")]
    pub output_every: f64,
}

fn one() -> f64 {
    1.0
}
fn default_dtau() -> f64 {
    2e-3
}
fn default_output() -> f64 {
    0.1
}

impl WSystemConfig {
    pub fn new(k: usize, alpha: f64, epsilon: f64, tau_end: f64) -> Self {
        Self {
            k,
            alpha,
            epsilon,
            lambdastar: 1.0,
            tau_end,
            dtau: default_dtau(),
            output_every: default_output(),
        }
    }

    pub fn t0(&self) -> f64 {
        1.0 / (self.lambdastar * self.epsilon).powi(2)
    }
}

/// `T[w](eta) = w(eta + delta) e^{-delta^2/8} e^{-eta delta/4}`, zero beyond the grid.
fn shifted_coupling(grid: &Grid1D, w: &[f64], delta: f64, out: &mut [f64]) {
    let damp = (-delta * delta / 8.0).exp();
    for (j, o) in out.iter_mut().enumerate() {
        let e = grid.x(j);
        *o = interpolate(grid, w, e + delta, 0.0, 0.0) * damp * (-e * delta / 4.0).exp();
    }
}

/// Interior matrix of `M + (k-i) + gamma (D1 - eta/4)` scaled: `I + s A`.
fn theta_matrix(grid: &Grid1D, decay: f64, gamma: f64, s: f64) -> Tridiagonal {
    let m = grid.n - 1;
    let h = grid.dx;
    let off = -1.0 / (h * h);
    let adv = gamma / (2.0 * h);
    let diag = (1..grid.n)
        .map(|j| {
            let e = grid.x(j);
            1.0 + s * (2.0 / (h * h) + potential(e) + decay - gamma * e / 4.0)
        })
        .collect();
    Tridiagonal::new(vec![s * (off - adv); m], diag, vec![s * (off + adv); m])
}

/// Integrates the `w`-system by Crank-Nicolson in `tau` on `[0, eta_max]` (Dirichlet at both
/// ends), components solved from `k` down to 1 so each sees its partner at both time levels.
/// Returns the projections every `output_every`, starting at `tau = 0`.
pub fn evolve_w_system(
    config: &WSystemConfig,
    grid: &Grid1D,
    init: &[Vec<f64>],
) -> Result<Vec<SpectralDecomposition>> {
    let k = config.k;
    check_eta_grid(grid, 10.0)?;
    if k < 1 || init.len() != k || init.iter().any(|r| r.len() != grid.n) {
        return Err(Error::InvalidInput(format!(
            "need {k} initial rows of length {}",
            grid.n
        )));
    }
    if !(config.epsilon >= 0.0) || !(config.dtau > 0.0) || !(config.tau_end > 0.0) {
        return Err(Error::InvalidInput("epsilon >= 0, dtau > 0 and tau_end > 0 required".into()));
    }
    if init.iter().any(|r| r[0].abs() > 1e-12) {
        return Err(Error::InvalidInput("initial rows must vanish at eta = 0".into()));
    }
    let e0 = principal_eigenfunction(grid)?;
    let t0 = config.t0();
    let lam = config.lambdastar;
    let dt = config.dtau;
    let n = grid.n;
    let steps = (config.tau_end / dt - 1e-9).ceil() as usize;
    let every = ((config.output_every / dt).round() as usize).max(1);

    let mut w: Vec<Vec<f64>> = init.to_vec();
    for row in w.iter_mut() {
        row[n - 1] = 0.0;
    }
    let mut out = vec![decompose(grid, &e0, &w, 0.0)];
    let mut old_cpl = vec![0.0; n];
    let mut new_cpl = vec![0.0; n];

    for step in 1..=steps {
        let tau_old = (step - 1) as f64 * dt;
        let tau_new = step as f64 * dt;
        let previous = w.clone();
        for i in (0..k).rev() {
            let beta = 1.5 + (i + 1) as f64 - k as f64;
            let decay = (k - 1 - i) as f64;
            let g_old = beta * config.epsilon * (-tau_old / 2.0).exp();
            let g_new = beta * config.epsilon * (-tau_new / 2.0).exp();
            // explicit half: (I - dt/2 A_old) w_old
            let a_old = theta_matrix(grid, decay, g_old, -0.5 * dt);
            let mut rhs = a_old.apply(&previous[i][1..]);
            // Dirichlet zero beyond the last point: apply() already treats it as zero
            if i + 1 < k && config.alpha != 0.0 {
                shifted_coupling(grid, &previous[i + 1], delta_shift(tau_old, t0, lam), &mut old_cpl);
                shifted_coupling(grid, &w[i + 1], delta_shift(tau_new, t0, lam), &mut new_cpl);
                for (j, r) in rhs.iter_mut().enumerate() {
                    *r += 0.5 * dt * config.alpha * (old_cpl[j + 1] + new_cpl[j + 1]);
                }
            }
            theta_matrix(grid, decay, g_new, 0.5 * dt).solve_in_place(&mut rhs);
            w[i][0] = 0.0;
            w[i][1..].copy_from_slice(&rhs);
        }
        if step % every == 0 || step == steps {
            let d = decompose(grid, &e0, &w, tau_new);
            let worst = w.iter().map(|r| norm(grid, r)).fold(0.0, f64::max);
            if !(worst <= 1e6) {
                return Err(Error::Instability {
                    norm: worst,
                    tau: tau_new,
                });
            }
            out.push(d);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderFit {
    pub component: usize,
    /// Slope of `ln(||w_hat|| / (1 + tau))` against `tau`; NaN when degenerate.
    pub slope: f64,
    /// The remainder fell below `1e-13`, so there is nothing to fit.
    pub degenerate: bool,
}

/// Fits the remainder decay rate of every component over `window`.
pub fn remainder_decay(series: &[SpectralDecomposition], window: (f64, f64)) -> Result<Vec<RemainderFit>> {
    let (a, b) = window;
    if !(b - a >= 6.0) {
        return Err(Error::InvalidInput(format!("fit window ({a}, {b}) must span at least 6")));
    }
    let pts: Vec<&SpectralDecomposition> =
        series.iter().filter(|d| d.tau >= a - 1e-9 && d.tau <= b + 1e-9).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: pts.len(),
        });
    }
    let span = pts.last().unwrap().tau - pts[0].tau;
    if span < 6.0 - 1e-9 {
        return Err(Error::InvalidInput(format!("series covers only {span} of the window")));
    }
    let k = pts[0].q.len();
    Ok((0..k)
        .map(|i| {
            if pts.iter().any(|d| d.remainder_norm[i] < 1e-13) {
                return RemainderFit {
                    component: i + 1,
                    slope: f64::NAN,
                    degenerate: true,
                };
            }
            let (x, y): (Vec<f64>, Vec<f64>) = pts
                .iter()
                .map(|d| (d.tau, (d.remainder_norm[i] / (1.0 + d.tau)).ln()))
                .unzip();
            RemainderFit {
                component: i + 1,
                slope: linear_fit(&x, &y).1,
                degenerate: false,
            }
        })
        .collect())
}
