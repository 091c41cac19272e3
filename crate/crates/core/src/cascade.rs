//! Time stepping of the cascading system
//!
//! ```text
//! v^i_t = v^i_xx + f(v^i) + alpha v^{i+1} (1 - v^i),   i < k
//! v^k_t = v^k_xx + f(v^k)
//! ```
//!
//! in the lab frame, in logarithmically shifted moving frames, and in its linearized form with
//! zero Dirichlet data at `x = 0`.
//!
//! The stepper is first-order IMEX: diffusion (and, in moving frames, the drift term) is
//! implicit with centered differences, reaction and coupling are explicit and use the partner's
//! values from the start of the step. Under the step-size checks in [`EvolveConfig::validate`]
//! the scheme is monotone, so ordering of initial data and the range `[0, 1]` are preserved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::{max_crossing, FrontTrace, LevelSetKind};
use crate::kpp::{dispersion, interpolate, FieldStack, Grid1D, KppNonlinearity};

/// Logarithmically shifted frame `xi(t) = cstar t - a_coeff ln(t + t0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub cstar: f64,
    pub a_coeff: f64,
    pub t0: f64,
}

impl FrameSpec {
    pub fn new(cstar: f64, a_coeff: f64, t0: f64) -> Result<Self> {
        if !(t0 > 0.0) || !cstar.is_finite() || !a_coeff.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "frame (cstar {cstar}, a {a_coeff}, t0 {t0}) needs finite values and t0 > 0"
            )));
        }
        Ok(Self { cstar, a_coeff, t0 })
    }

    /// Frame of component `i` (1-based) of a `k`-component cascade:
    /// `a = (3/2 + i - k) / lambda*`.
    pub fn cascade(f: &KppNonlinearity, k: usize, i: usize, t0: f64) -> Result<Self> {
        let d = dispersion(f, None)?;
        Self::new(d.cstar, (1.5 + i as f64 - k as f64) / d.lambdastar, t0)
    }

    pub fn position(&self, t: f64) -> f64 {
        self.cstar * t - self.a_coeff * (t + self.t0).ln()
    }

    /// Frame velocity `xi'(t)`; in frame coordinates it appears as the drift `+xi'(t) v_x`.
    pub fn velocity(&self, t: f64) -> f64 {
        self.cstar - self.a_coeff / (t + self.t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPolicy {
    Fixed,
    FollowFront,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Left end held at 1, right end at 0.
    HeavisideClamp,
    /// Both ends held at 0.
    DirichletZero,
}

/// Records the rightmost crossing of `level` for every component every `every` time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub level: f64,
    pub every: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub k: usize,
    pub alpha: f64,
    pub f: KppNonlinearity,
    pub grid: Grid1D,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub frames: Option<Vec<FrameSpec>>,
    pub window_policy: WindowPolicy,
    pub boundary: Boundary,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub trace: Option<TraceSpec>,
    /// `dt <= cfl_safety dx^2`.
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    /// Follow-front recentres when the leading 1/2-level is within this fraction of the grid
    /// length from the right edge.
    #[serde(default = "default_recentre")]
    pub recentre_fraction: f64,
}

fn default_safety() -> f64 {
    10.0
}

fn default_recentre() -> f64 {
    0.2
}

impl EvolveConfig {
    /// Lab-frame configuration with Heaviside boundary clamping and a fixed window.
    pub fn new(k: usize, alpha: f64, f: KppNonlinearity, grid: Grid1D, dt: f64, t_end: f64) -> Self {
        Self {
            k,
            alpha,
            f,
            grid,
            dt,
            t_end,
            frames: None,
            window_policy: WindowPolicy::Fixed,
            boundary: Boundary::HeavisideClamp,
            snapshots: Vec::new(),
            trace: None,
            cfl_safety: default_safety(),
            recentre_fraction: default_recentre(),
        }
    }

    /// Moving frames `xi_i` with the cascade coefficients `(3/2 + i - k)/lambda*`.
    pub fn with_cascade_frames(mut self, t0: f64) -> Result<Self> {
        let frames = (1..=self.k)
            .map(|i| FrameSpec::cascade(&self.f, self.k, i, t0))
            .collect::<Result<Vec<_>>>()?;
        self.frames = Some(frames);
        Ok(self)
    }

    pub fn with_snapshots(mut self, times: &[f64]) -> Self {
        self.snapshots = times.to_vec();
        self
    }

    pub fn with_trace(mut self, level: f64, every: f64) -> Self {
        self.trace = Some(TraceSpec { level, every });
        self
    }

    pub fn with_window(mut self, policy: WindowPolicy) -> Self {
        self.window_policy = policy;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Checks the step-size and geometry constraints before any stepping.
    pub fn validate(&self, linear: bool) -> Result<()> {
        let g = &self.grid;
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha {} must be >= 0", self.alpha)));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Config(format!(
                "dt {} and t_end {} must be positive",
                self.dt, self.t_end
            )));
        }
        if self.dt > self.cfl_safety * g.dx * g.dx {
            return Err(Error::Config(format!(
                "CFL violation: dt {} > {} dx^2 = {}",
                self.dt,
                self.cfl_safety,
                self.cfl_safety * g.dx * g.dx
            )));
        }
        if !linear && self.dt * (self.f.lipschitz_bound() + self.alpha) >= 1.0 {
            return Err(Error::Config(format!(
                "explicit reaction step not monotone: dt (|f'| + alpha) = {} >= 1",
                self.dt * (self.f.lipschitz_bound() + self.alpha)
            )));
        }
        if let Some(frames) = &self.frames {
            if frames.len() != self.k {
                return Err(Error::Config(format!(
                    "{} frames supplied for {} components",
                    frames.len(),
                    self.k
                )));
            }
            for fr in frames {
                let vmax = fr.cstar.abs() + fr.a_coeff.abs() / fr.t0;
                if vmax * g.dx / 2.0 > 1.0 {
                    return Err(Error::Config(format!(
                        "cell Peclet number {} > 1; refine dx",
                        vmax * g.dx / 2.0
                    )));
                }
            }
            if self.window_policy == WindowPolicy::FollowFront {
                return Err(Error::Config(
                    "follow_front applies to lab-frame runs only".into(),
                ));
            }
        }
        if !(self.recentre_fraction > 0.0 && self.recentre_fraction < 1.0) {
            return Err(Error::Config(format!(
                "recentre_fraction {} outside (0, 1)",
                self.recentre_fraction
            )));
        }
        if let Some(tr) = &self.trace {
            if !(tr.every > 0.0) || !(tr.level > 0.0 && tr.level < 1.0) {
                return Err(Error::Config("trace needs every > 0 and level in (0, 1)".into()));
            }
        }
        Ok(())
    }

    /// Shift `xi_i(t) - xi_{i+1}(t)` at which component `i` (0-based) reads its partner.
    pub fn partner_shift(&self, i: usize, t: f64) -> f64 {
        match &self.frames {
            Some(fr) if i + 1 < fr.len() => fr[i].position(t) - fr[i + 1].position(t),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    /// Values that left `[0, 1]` by more than round-off and were clamped back.
    pub clamp_count: usize,
    pub min_per_component: Vec<f64>,
    pub max_per_component: Vec<f64>,
    pub recentre_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<FieldStack>,
    /// One trace per component when [`EvolveConfig::trace`] is set.
    pub traces: Vec<FrontTrace>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Model {
    Nonlinear,
    Linear,
}

/// Factorization of the constant-coefficient tridiagonal matrix
/// `I - dt (D2 + b D1)` restricted to interior points.
#[derive(Debug, Clone)]
struct ImplicitOperator {
    drift: f64,
    lower: f64,
    upper: f64,
    inv_pivot: Vec<f64>,
    // lower * inv_pivot, so the forward sweep is one multiply-subtract deep
    mult: Vec<f64>,
    cprime: Vec<f64>,
}

impl ImplicitOperator {
    fn new(m: usize, dt: f64, dx: f64, drift: f64) -> Self {
        let r = dt / (dx * dx);
        let adv = dt * drift / (2.0 * dx);
        let lower = -r + adv;
        let upper = -r - adv;
        let diag = 1.0 + 2.0 * r;
        let mut cprime = vec![0.0; m];
        let mut inv_pivot = vec![0.0; m];
        let mut mult = vec![0.0; m];
        let mut prev = 0.0;
        for j in 0..m {
            let inv = 1.0 / (diag - lower * prev);
            inv_pivot[j] = inv;
            mult[j] = if j > 0 { lower * inv } else { 0.0 };
            prev = upper * inv;
            cprime[j] = prev;
        }
        Self {
            drift,
            lower,
            upper,
            inv_pivot,
            mult,
            cprime,
        }
    }
}

/// Advances a [`FieldStack`] one step at a time. Exposed so that single steps can be
/// inspected; [`evolve_lab`] and friends drive it to completion.
pub struct Stepper<'a> {
    cfg: &'a EvolveConfig,
    model: Model,
    ops: Vec<Option<ImplicitOperator>>,
    rhs: Vec<f64>,
    pub clamp_count: usize,
    pub min_seen: Vec<f64>,
    pub max_seen: Vec<f64>,
}

const CLAMP_SLACK: f64 = 1e-12;
const TINY: f64 = 1e-200;

impl<'a> Stepper<'a> {
    pub fn nonlinear(cfg: &'a EvolveConfig) -> Result<Self> {
        cfg.validate(false)?;
        Ok(Self::build(cfg, Model::Nonlinear))
    }

    pub fn linear(cfg: &'a EvolveConfig) -> Result<Self> {
        cfg.validate(true)?;
        Ok(Self::build(cfg, Model::Linear))
    }

    fn build(cfg: &'a EvolveConfig, model: Model) -> Self {
        Self {
            cfg,
            model,
            ops: vec![None; cfg.k],
            rhs: Vec::new(),
            clamp_count: 0,
            min_seen: vec![f64::INFINITY; cfg.k],
            max_seen: vec![f64::NEG_INFINITY; cfg.k],
        }
    }

    fn boundary_values(&self) -> (f64, f64) {
        match self.cfg.boundary {
            Boundary::HeavisideClamp => (1.0, 0.0),
            Boundary::DirichletZero => (0.0, 0.0),
        }
    }

    /// One step from `state.time` to `state.time + dt`. `step_index` is reported in errors.
    pub fn step(&mut self, state: &mut FieldStack, step_index: usize) -> Result<()> {
        let cfg = self.cfg;
        let k = cfg.k;
        let grid = state.grid;
        let n = grid.n;
        let dt = cfg.dt;
        let t = state.time;
        let t_new = t + dt;
        let (bl, br) = self.boundary_values();
        let fprime0 = cfg.f.fprime0();
        self.rhs.resize(n - 2, 0.0);

        // Components are updated in increasing order so that component i still sees the
        // partner i+1 at the start of the step.
        for i in 0..k {
            let drift = cfg.frames.as_ref().map_or(0.0, |fr| fr[i].velocity(t_new));
            let stale = self.ops[i]
                .as_ref()
                .map_or(true, |op| op.drift != drift || op.cprime.len() != n - 2);
            if stale {
                self.ops[i] = Some(ImplicitOperator::new(n - 2, dt, grid.dx, drift));
            }

            let (head, tail) = state.values.split_at_mut(i + 1);
            let v = &mut head[i];
            let partner = if i + 1 < k && cfg.alpha != 0.0 {
                Some(&tail[0])
            } else {
                None
            };
            let shift = cfg.partner_shift(i, t);
            let cells = shift / grid.dx;
            let m = cells.floor();
            let w = cells - m;
            let m = m as isize;
            let p_left = partner.map_or(0.0, |p| p[0]);
            let pget = |p: &[f64], idx: isize| -> f64 {
                if idx < 0 {
                    p_left
                } else if idx as usize >= n {
                    // beyond the right edge the partner is taken to vanish
                    0.0
                } else {
                    p[idx as usize]
                }
            };

            let op = self.ops[i].as_ref().unwrap();
            let nonlinear = self.model == Model::Nonlinear;
            let mm = n - 2;

            // Right-hand sides vanish beyond `last` (f(0) = 0); past it the forward sweep only
            // decays and is cut once below 1e-290, which keeps the far field out of the slow
            // subnormal range.
            let last_v = v[1..n - 1].iter().rposition(|&u| u != 0.0).unwrap_or(0);
            let last_p = partner
                .and_then(|p| p.iter().rposition(|&x| x != 0.0))
                .map_or(0, |jp| (jp as isize - m).max(0) as usize);
            let last = last_v.max(last_p);

            // forward elimination, assembling the explicit right-hand side on the fly
            let mut d = 0.0;
            let mut end = mm;
            for jj in 0..mm {
                let u = v[jj + 1];
                let mut r = if nonlinear { cfg.f.value(u) } else { fprime0 * u };
                if let Some(p) = partner {
                    let idx = (jj + 1) as isize + m;
                    let pv = (1.0 - w) * pget(p, idx) + w * pget(p, idx + 1);
                    r += if nonlinear { pv * (1.0 - u) } else { pv } * cfg.alpha;
                }
                let mut rhs = u + dt * r;
                if jj == 0 {
                    rhs -= op.lower * bl;
                }
                if jj == mm - 1 {
                    rhs -= op.upper * br;
                }
                d = rhs * op.inv_pivot[jj] - op.mult[jj] * d;
                self.rhs[jj] = d;
                if jj > last && d.abs() < 1e-290 {
                    end = jj;
                    break;
                }
            }

            v[0] = bl;
            v[n - 1] = br;
            v[end + 1..n - 1].iter_mut().for_each(|u| *u = 0.0);
            let mut lo = bl.min(br);
            let mut hi = bl.max(br);
            let mut clamps = 0usize;
            let mut nan = false;
            // back substitution; clamping is branch-free because saturated regions carry
            // round-off noise around 1
            let mut x = 0.0;
            for jj in (0..end).rev() {
                x = self.rhs[jj] - op.cprime[jj] * x;
                let u = x;
                nan |= u.is_nan();
                lo = lo.min(u);
                hi = hi.max(u);
                let mut out = u;
                if nonlinear {
                    clamps += ((u > 1.0 + CLAMP_SLACK) | (u < -CLAMP_SLACK)) as usize;
                    out = out.max(0.0).min(1.0);
                }
                // keep far-field tails out of the subnormal range
                v[jj + 1] = if out.abs() < TINY { 0.0 } else { out };
            }
            if nan || !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::NumericalBlowup {
                    step: step_index,
                    time: t_new,
                });
            }
            self.clamp_count += clamps;
            self.min_seen[i] = self.min_seen[i].min(lo);
            self.max_seen[i] = self.max_seen[i].max(hi);
        }
        state.time = t_new;
        Ok(())
    }
}

/// Moves the window right when the leading front nears the right edge, discarding left cells
/// that equal 1 (within 1e-12) in every component. Returns the number of cells shifted.
fn recentre(state: &mut FieldStack, fraction: f64) -> Result<usize> {
    let grid = state.grid;
    let width = grid.x_end() - grid.x0;
    let lead = state
        .values
        .iter()
        .filter_map(|v| max_crossing(&grid, v, 0.5))
        .fold(f64::NEG_INFINITY, f64::max);
    if !lead.is_finite() || grid.x_end() - lead >= fraction * width {
        return Ok(0);
    }
    let flat = (0..grid.n)
        .take_while(|&j| state.values.iter().all(|v| (1.0 - v[j]).abs() <= 1e-12))
        .count();
    let m = flat.saturating_sub(1);
    if m == 0 {
        if grid.x_end() - lead < 0.02 * width {
            return Err(Error::DomainExhausted {
                time: state.time,
                reason: "front reached the right edge and no saturated cells can be dropped"
                    .into(),
            });
        }
        return Ok(0);
    }
    for v in state.values.iter_mut() {
        v.copy_within(m.., 0);
        let n = v.len();
        v[n - m..].iter_mut().for_each(|u| *u = 0.0);
        v[0] = 1.0;
    }
    state.grid.x0 += m as f64 * grid.dx;
    Ok(m)
}

fn check_init(cfg: &EvolveConfig, init: &FieldStack) -> Result<()> {
    if init.k() != cfg.k {
        return Err(Error::InvalidInput(format!(
            "initial data has {} components, config has {}",
            init.k(),
            cfg.k
        )));
    }
    if !init.grid.same_as(&cfg.grid) {
        return Err(Error::InvalidInput("initial data grid differs from config grid".into()));
    }
    if init.values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite initial data".into()));
    }
    Ok(())
}

fn run(cfg: &EvolveConfig, init: &FieldStack, model: Model) -> Result<Trajectory> {
    check_init(cfg, init)?;
    let mut stepper = match model {
        Model::Nonlinear => Stepper::nonlinear(cfg)?,
        Model::Linear => Stepper::linear(cfg)?,
    };
    if model == Model::Nonlinear && !init.in_unit_range() {
        return Err(Error::InvalidInput("initial data outside [0, 1]".into()));
    }
    let follow = model == Model::Nonlinear
        && cfg.frames.is_none()
        && cfg.window_policy == WindowPolicy::FollowFront;

    let steps = (cfg.t_end / cfg.dt - 1e-9).ceil() as usize;
    let mut snaps: Vec<f64> = cfg.snapshots.clone();
    if snaps.iter().any(|t| !(*t >= 0.0) || *t > cfg.t_end + cfg.dt) {
        return Err(Error::Config("snapshot times must lie in [0, t_end]".into()));
    }
    snaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    snaps.dedup();

    let mut state = init.clone();
    state.time = 0.0;
    let mut snapshots = Vec::with_capacity(snaps.len());
    let mut next_snap = 0;
    let mut traces: Vec<FrontTrace> = match &cfg.trace {
        Some(tr) => (0..cfg.k)
            .map(|_| FrontTrace::new(tr.level, LevelSetKind::MaxLevelSet))
            .collect(),
        None => Vec::new(),
    };
    let mut next_trace = 0usize;
    let mut recentre_count = 0;

    let record = |state: &FieldStack,
                      snapshots: &mut Vec<FieldStack>,
                      traces: &mut Vec<FrontTrace>,
                      next_snap: &mut usize,
                      next_trace: &mut usize|
     -> Result<()> {
        let t = state.time;
        while *next_snap < snaps.len() && snaps[*next_snap] <= t + 0.5 * cfg.dt {
            snapshots.push(state.clone());
            *next_snap += 1;
        }
        if let Some(tr) = &cfg.trace {
            let due = *next_trace as f64 * tr.every;
            if due <= t + 0.5 * cfg.dt {
                for (i, trace) in traces.iter_mut().enumerate() {
                    if let Some(x) = max_crossing(&state.grid, &state.values[i], tr.level) {
                        trace.push(t, x)?;
                    }
                }
                *next_trace = (t / tr.every + 0.5).floor() as usize + 1;
            }
        }
        Ok(())
    };

    record(&state, &mut snapshots, &mut traces, &mut next_snap, &mut next_trace)?;
    for step in 1..=steps {
        stepper.step(&mut state, step)?;
        // time from the step counter, not accumulated
        state.time = step as f64 * cfg.dt;
        if follow && step % 10 == 0 && recentre(&mut state, cfg.recentre_fraction)? > 0 {
            recentre_count += 1;
        }
        record(&state, &mut snapshots, &mut traces, &mut next_snap, &mut next_trace)?;
    }

    Ok(Trajectory {
        snapshots,
        traces,
        diagnostics: Diagnostics {
            steps,
            clamp_count: stepper.clamp_count,
            min_per_component: stepper.min_seen,
            max_per_component: stepper.max_seen,
            recentre_count,
        },
    })
}

/// Nonlinear cascade in the lab frame.
pub fn evolve_lab(config: &EvolveConfig, init: &FieldStack) -> Result<Trajectory> {
    if config.frames.is_some() {
        return Err(Error::Config("evolve_lab takes no frames".into()));
    }
    run(config, init, Model::Nonlinear)
}

/// First time in `[0, t_end]` at which an inter-frame shift exceeds the grid length.
fn frame_exhaustion(config: &EvolveConfig) -> Option<f64> {
    let length = config.grid.x_end() - config.grid.x0;
    let samples = 2000;
    (0..=samples)
        .map(|s| config.t_end * s as f64 / samples as f64)
        .find(|&t| (0..config.k.saturating_sub(1)).any(|i| config.partner_shift(i, t).abs() > length))
}

/// Nonlinear cascade in the moving frames `xi_i`, with the partner read at
/// `x + xi_i(t) - xi_{i+1}(t)` by linear interpolation.
pub fn evolve_moving_frame(config: &EvolveConfig, init: &FieldStack) -> Result<Trajectory> {
    if config.frames.is_none() {
        return Err(Error::Config("moving-frame evolution needs a frame per component".into()));
    }
    if let Some(time) = frame_exhaustion(config) {
        return Err(Error::DomainExhausted {
            time,
            reason: "inter-frame shift exceeds the grid length".into(),
        });
    }
    run(config, init, Model::Nonlinear)
}

/// Linearized system with reaction `f'(0) V`, coupling `alpha V^{i+1}` and zero Dirichlet
/// data at both ends of a grid starting at `x = 0`. Frames are optional.
pub fn evolve_linear_dirichlet(config: &EvolveConfig, init: &FieldStack) -> Result<Trajectory> {
    if config.grid.x0.abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "Dirichlet grid must start at x = 0, got {}",
            config.grid.x0
        )));
    }
    if init.values.iter().flatten().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("negative initial data".into()));
    }
    if config.boundary != Boundary::DirichletZero {
        return Err(Error::Config("linear problem uses dirichlet_zero boundaries".into()));
    }
    if config.frames.is_some() {
        if let Some(time) = frame_exhaustion(config) {
            return Err(Error::DomainExhausted {
                time,
                reason: "inter-frame shift exceeds the grid length".into(),
            });
        }
    }
    run(config, init, Model::Linear)
}

/// A lab-frame snapshot resampled into frame coordinates `y = x - xi(t)` on `grid`.
pub fn resample_to_frame(snapshot: &FieldStack, frames: &[FrameSpec], grid: Grid1D) -> FieldStack {
    let values = snapshot
        .values
        .iter()
        .zip(frames)
        .map(|(v, fr)| {
            let xi = fr.position(snapshot.time);
            let left = v[0];
            let right = v[snapshot.grid.n - 1];
            grid.points()
                .iter()
                .map(|&y| interpolate(&snapshot.grid, v, y + xi, left, right))
                .collect()
        })
        .collect();
    FieldStack {
        grid,
        time: snapshot.time,
        values,
    }
}

/// Barrier `1` for `x <= plateau`, `min(1, scale V(x))` beyond, sampled on `grid`; `V` is
/// a linear Dirichlet snapshot on `[0, L]` and vanishes outside it.
pub fn supersolution_barrier(linear: &FieldStack, grid: Grid1D, scale: f64, plateau: f64) -> FieldStack {
    let values = linear
        .values
        .iter()
        .map(|v| {
            grid.points()
                .iter()
                .map(|&x| {
                    if x <= plateau {
                        1.0
                    } else {
                        (scale * interpolate(&linear.grid, v, x, 0.0, 0.0)).min(1.0)
                    }
                })
                .collect()
        })
        .collect();
    FieldStack {
        grid,
        time: linear.time,
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotOrdering {
    pub time: f64,
    pub holds: bool,
    /// Minimum of `scale a - b` over components and grid points with `x > 0`.
    pub worst_margin: f64,
    pub worst_x: f64,
    pub worst_component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub snapshots: Vec<SnapshotOrdering>,
}

impl OrderingReport {
    pub fn all_hold(&self) -> bool {
        self.snapshots.iter().all(|s| s.holds)
    }
}

/// Checks `scale a >= b` pointwise on `x > 0` for every pair of snapshots.
pub fn check_ordering(a: &Trajectory, b: &Trajectory, scale: f64) -> Result<OrderingReport> {
    if a.snapshots.len() != b.snapshots.len() {
        return Err(Error::InvalidInput("trajectories have different snapshot counts".into()));
    }
    let mut out = Vec::with_capacity(a.snapshots.len());
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        if !sa.grid.same_as(&sb.grid) || sa.k() != sb.k() {
            return Err(Error::InvalidInput(format!(
                "mismatched grids or component counts at t = {}",
                sa.time
            )));
        }
        if (sa.time - sb.time).abs() > 1e-9 * sa.time.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "snapshot times differ: {} vs {}",
                sa.time, sb.time
            )));
        }
        let mut worst = (f64::INFINITY, f64::NAN, 0usize);
        for (i, (va, vb)) in sa.values.iter().zip(&sb.values).enumerate() {
            for j in 0..sa.grid.n {
                let x = sa.grid.x(j);
                if x <= 0.0 {
                    continue;
                }
                let margin = scale * va[j] - vb[j];
                if margin < worst.0 {
                    worst = (margin, x, i);
                }
            }
        }
        out.push(SnapshotOrdering {
            time: sa.time,
            holds: worst.0 >= 0.0,
            worst_margin: worst.0,
            worst_x: worst.1,
            worst_component: worst.2,
        });
    }
    Ok(OrderingReport { snapshots: out })
}
