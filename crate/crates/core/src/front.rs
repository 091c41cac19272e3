//! Level sets, logarithmic front corrections, front separation and wave-shift estimates.

use serde::{Deserialize, Serialize};

use crate::cascade::FrameSpec;
use crate::error::{Error, Result};
use crate::kpp::Grid1D;
use crate::wave::{linear_fit, shift_align, WaveProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSetKind {
    MaxLevelSet,
    MinLevelSet,
}

/// Positions of one level set of one component over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub level: f64,
    pub which: LevelSetKind,
    pub samples: Vec<(f64, f64)>,
}

impl FrontTrace {
    pub fn new(level: f64, which: LevelSetKind) -> Self {
        Self {
            level,
            which,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, position: f64) -> Result<()> {
        if !position.is_finite() || !t.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite sample ({t}, {position})")));
        }
        if let Some(&(last, _)) = self.samples.last() {
            if !(t > last) {
                return Err(Error::InvalidInput(format!(
                    "trace times must increase: {t} after {last}"
                )));
            }
        }
        self.samples.push((t, position));
        Ok(())
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontFit {
    pub c_hat: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub rms_residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

impl FrontFit {
    /// Fitted front position `c t - a ln t + b`.
    pub fn position(&self, t: f64) -> f64 {
        self.c_hat * t - self.a_hat * t.ln() + self.b_hat
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSet {
    pub crossings: Vec<f64>,
    pub max: f64,
    pub min: f64,
}

/// All crossings of `level`, by linear interpolation between neighbouring grid points.
pub fn extract_level_set(grid: &Grid1D, values: &[f64], level: f64) -> Result<LevelSet> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level {level} outside (0, 1)")));
    }
    if values.len() != grid.n {
        return Err(Error::InvalidInput("field length differs from grid".into()));
    }
    let mut crossings: Vec<f64> = Vec::new();
    for (j, w) in values.windows(2).enumerate() {
        let (a, b) = (w[0] - level, w[1] - level);
        if a == 0.0 {
            if crossings.last() != Some(&grid.x(j)) {
                crossings.push(grid.x(j));
            }
        } else if a * b < 0.0 {
            crossings.push(grid.x(j) + grid.dx * a / (a - b));
        }
    }
    if values[grid.n - 1] == level {
        crossings.push(grid.x_end());
    }
    if crossings.is_empty() {
        return Err(Error::NoFront { level });
    }
    let max = *crossings.last().unwrap();
    let min = crossings[0];
    Ok(LevelSet { crossings, max, min })
}

/// Rightmost crossing of `level`, scanning from the right edge.
pub fn max_crossing(grid: &Grid1D, values: &[f64], level: f64) -> Option<f64> {
    let n = values.len();
    (0..n - 1).rev().find_map(|j| {
        let (a, b) = (values[j] - level, values[j + 1] - level);
        if a == 0.0 {
            Some(grid.x(j))
        } else if a * b < 0.0 {
            Some(grid.x(j) + grid.dx * a / (a - b))
        } else {
            None
        }
    })
}

/// Least squares of `position - cstar t` against `(-ln t, 1)` over the samples with
/// `t` in `window`. The linear coefficient is fixed to `cstar`.
pub fn fit_log_correction(trace: &FrontTrace, cstar: f64, window: (f64, f64)) -> Result<FrontFit> {
    let (t0, t1) = window;
    if !(t0 > 0.0 && t1 >= 10.0 * t0) {
        return Err(Error::InvalidInput(format!(
            "fit window ({t0}, {t1}) must be positive and span at least one decade"
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = trace
        .samples
        .iter()
        .filter(|(t, _)| *t >= t0 && *t <= t1)
        .map(|&(t, p)| (-t.ln(), p - cstar * t))
        .unzip();
    if x.len() < 20 {
        return Err(Error::InsufficientData {
            needed: 20,
            got: x.len(),
        });
    }
    let (b, a, _, rms) = linear_fit(&x, &y);
    Ok(FrontFit {
        c_hat: cstar,
        a_hat: a,
        b_hat: b,
        rms_residual: rms,
        window,
        samples: x.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Separation {
    /// `(t, position_a - position_b)`.
    pub series: Vec<(f64, f64)>,
    /// Least-squares slope of the difference against `ln t`.
    pub slope_vs_ln_t: f64,
}

pub fn front_separation(trace_a: &FrontTrace, trace_b: &FrontTrace) -> Result<Separation> {
    if trace_a.samples.len() != trace_b.samples.len() {
        return Err(Error::InvalidInput("traces have different lengths".into()));
    }
    let mut series = Vec::with_capacity(trace_a.samples.len());
    for (&(ta, pa), &(tb, pb)) in trace_a.samples.iter().zip(&trace_b.samples) {
        if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) {
            return Err(Error::InvalidInput(format!("trace times differ: {ta} vs {tb}")));
        }
        series.push((ta, pa - pb));
    }
    let usable: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t > 0.0).collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: usable.len(),
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = usable.iter().map(|&(t, d)| (t.ln(), d)).unzip();
    let (_, slope, _, _) = linear_fit(&x, &y);
    Ok(Separation {
        series,
        slope_vs_ln_t: slope,
    })
}

/// Finite-time estimate of the wave shift of a component.
///
/// `values` is a lab-frame component at time `time`. With the frame position `xi(T)`, the
/// component is aligned against the minimal-speed profile (anchored at `U(0) = 1/2`) and the
/// returned value is `-(front offset relative to xi(T))`, so that the front sits at
/// `xi(T) - x_infty`.
pub fn estimate_x_infty(
    grid: &Grid1D,
    values: &[f64],
    time: f64,
    frame: &FrameSpec,
    profile: &WaveProfile,
) -> Result<f64> {
    let (shift, distance) = shift_align(grid, values, profile)?;
    if distance > 0.2 {
        return Err(Error::NotConverged {
            distance,
            limit: 0.2,
        });
    }
    Ok(-(shift - frame.position(time)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::new(0.0, 0.05, 401).unwrap()
    }

    #[test]
    fn logistic_crossing_at_center() {
        let g = grid();
        let v: Vec<f64> = g.points().iter().map(|x| 1.0 / (1.0 + (x - 10.0).exp())).collect();
        let ls = extract_level_set(&g, &v, 0.5).unwrap();
        assert!((ls.max - 10.0).abs() < g.dx * g.dx);
        assert_eq!(ls.max, ls.min);
        assert_eq!(ls.crossings.len(), 1);
        // off-grid centre
        let v: Vec<f64> = g.points().iter().map(|x| 1.0 / (1.0 + (x - 10.01).exp())).collect();
        let ls = extract_level_set(&g, &v, 0.5).unwrap();
        assert!((ls.max - 10.01).abs() < g.dx * g.dx);
    }

    #[test]
    fn bump_has_three_crossings() {
        let g = grid();
        // decreasing front with a bump rising back above 1/2 near x = 15
        let v: Vec<f64> = g
            .points()
            .iter()
            .map(|&x| 1.0 / (1.0 + (x - 5.0).exp()) + 0.8 * (-(x - 15.0) * (x - 15.0)).exp())
            .collect();
        // scan oracle: count sign changes of v - 1/2
        let oracle = v
            .windows(2)
            .filter(|w| (w[0] - 0.5).signum() != (w[1] - 0.5).signum())
            .count();
        let ls = extract_level_set(&g, &v, 0.5).unwrap();
        assert_eq!(oracle, 3);
        assert_eq!(ls.crossings.len(), 3);
        assert!(ls.max > ls.min);
        assert!(ls.crossings.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(max_crossing(&g, &v, 0.5), Some(ls.max));
    }

    #[test]
    fn no_crossing_is_an_error() {
        let g = grid();
        let v = vec![0.2; g.n];
        assert!(matches!(extract_level_set(&g, &v, 0.5), Err(Error::NoFront { .. })));
        assert!(extract_level_set(&g, &v, 1.5).is_err());
    }

    fn synthetic(f: impl Fn(f64) -> f64, t0: f64, t1: f64, n: usize) -> FrontTrace {
        let mut tr = FrontTrace::new(0.5, LevelSetKind::MaxLevelSet);
        for j in 0..n {
            let t = t0 + (t1 - t0) * j as f64 / (n - 1) as f64;
            tr.push(t, f(t)).unwrap();
        }
        tr
    }

    #[test]
    fn fit_recovers_in_model_coefficients() {
        let tr = synthetic(|t| 2.0 * t - 1.5 * t.ln() + 3.0, 10.0, 1000.0, 500);
        let fit = fit_log_correction(&tr, 2.0, (100.0, 1000.0)).unwrap();
        assert!((fit.a_hat - 1.5).abs() < 1e-10);
        assert!((fit.b_hat - 3.0).abs() < 1e-9);
        assert!(fit.rms_residual < 1e-9);
    }

    #[test]
    fn fit_needs_samples_and_a_decade() {
        let tr = synthetic(|t| 2.0 * t, 100.0, 1000.0, 10);
        assert!(matches!(
            fit_log_correction(&tr, 2.0, (100.0, 1000.0)),
            Err(Error::InsufficientData { .. })
        ));
        let tr = synthetic(|t| 2.0 * t, 100.0, 1000.0, 100);
        assert!(fit_log_correction(&tr, 2.0, (100.0, 500.0)).is_err());
    }

    #[test]
    fn separation_slopes() {
        let a = synthetic(|t| 2.0 * t - 0.5 * t.ln(), 10.0, 100.0, 50);
        let b = synthetic(|t| 2.0 * t - 1.5 * t.ln(), 10.0, 100.0, 50);
        let sep = front_separation(&a, &b).unwrap();
        assert!((sep.slope_vs_ln_t - 1.0).abs() < 1e-10);
        let same = front_separation(&a, &a).unwrap();
        assert_eq!(same.slope_vs_ln_t, 0.0);
        let c = synthetic(|t| t, 11.0, 100.0, 50);
        assert!(front_separation(&a, &c).is_err());
    }

    #[test]
    fn trace_rejects_unordered_times() {
        let mut tr = FrontTrace::new(0.5, LevelSetKind::MaxLevelSet);
        tr.push(1.0, 0.0).unwrap();
        assert!(tr.push(1.0, 0.0).is_err());
        assert!(tr.push(2.0, f64::NAN).is_err());
    }
}
