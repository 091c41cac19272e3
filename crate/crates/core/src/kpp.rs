//! Reaction terms, dispersion data and the grid/field containers shared by the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `f(u) = u - u^2`.
    Quadratic,
    /// `f(u) = beta (1-u) - beta sum_j p_j (1-u)^j`, coefficients `[beta, p_1, p_2, ...]`.
    Mckean,
    /// `f(u) = sum_j a_j u^j`, coefficients `[a_0, a_1, ...]`.
    Polynomial,
}

/// Config-file form of a nonlinearity: `{"kind": ..., "coefficients": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

/// A monostable reaction term together with its exact linearization at 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NonlinearitySpec", into = "NonlinearitySpec")]
pub struct KppNonlinearity {
    kind: NonlinearityKind,
    coefficients: Vec<f64>,
    fprime0: f64,
    fprime1: f64,
}

/// Result of [`eval_nonlinearity`]: the value and whether the argument had to be clamped into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub clamped: bool,
}

impl KppNonlinearity {
    pub fn quadratic() -> Self {
        Self {
            kind: NonlinearityKind::Quadratic,
            coefficients: Vec::new(),
            fprime0: 1.0,
            fprime1: -1.0,
        }
    }

    /// McKean nonlinearity for branching rate `beta` and offspring law `offspring[j-1] = p_j`.
    pub fn mckean(beta: f64, offspring: &[f64]) -> Result<Self> {
        let mut coefficients = Vec::with_capacity(offspring.len() + 1);
        coefficients.push(beta);
        coefficients.extend_from_slice(offspring);
        Self::from_spec(NonlinearitySpec {
            kind: NonlinearityKind::Mckean,
            coefficients,
        })
    }

    /// Polynomial `sum_j coefficients[j] u^j`.
    pub fn polynomial(coefficients: &[f64]) -> Result<Self> {
        Self::from_spec(NonlinearitySpec {
            kind: NonlinearityKind::Polynomial,
            coefficients: coefficients.to_vec(),
        })
    }

    pub fn from_spec(spec: NonlinearitySpec) -> Result<Self> {
        if spec.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite nonlinearity coefficient".into()));
        }
        match spec.kind {
            NonlinearityKind::Quadratic => {
                if !spec.coefficients.is_empty() {
                    return Err(Error::InvalidInput(
                        "quadratic nonlinearity takes no coefficients".into(),
                    ));
                }
                Ok(Self::quadratic())
            }
            NonlinearityKind::Mckean => {
                let c = &spec.coefficients;
                if c.len() < 2 {
                    return Err(Error::InvalidInput(
                        "mckean needs [beta, p_1, p_2, ...]".into(),
                    ));
                }
                let beta = c[0];
                let probs = &c[1..];
                if beta <= 0.0 {
                    return Err(Error::InvalidInput("mckean branching rate must be positive".into()));
                }
                if probs.iter().any(|&p| p < 0.0) {
                    return Err(Error::InvalidInput("negative offspring probability".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "offspring probabilities sum to {total}, expected 1"
                    )));
                }
                let mean: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (j + 1) as f64 * p)
                    .sum();
                Ok(Self {
                    kind: NonlinearityKind::Mckean,
                    fprime0: beta * (mean - 1.0),
                    fprime1: beta * (probs[0] - 1.0),
                    coefficients: spec.coefficients,
                })
            }
            NonlinearityKind::Polynomial => {
                let c = &spec.coefficients;
                if c.len() < 2 {
                    return Err(Error::InvalidInput("polynomial needs degree >= 1".into()));
                }
                let fprime1 = c.iter().enumerate().skip(1).map(|(j, a)| j as f64 * a).sum();
                Ok(Self {
                    kind: NonlinearityKind::Polynomial,
                    fprime0: c[1],
                    fprime1,
                    coefficients: spec.coefficients,
                })
            }
        }
    }

    pub fn kind(&self) -> NonlinearityKind {
        self.kind
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn fprime0(&self) -> f64 {
        self.fprime0
    }

    pub fn fprime1(&self) -> f64 {
        self.fprime1
    }

    /// f(u) for u already inside [0, 1]; no clamping or finiteness checks.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Quadratic => u - u * u,
            NonlinearityKind::Mckean => {
                let beta = self.coefficients[0];
                let s = 1.0 - u;
                // sum_j p_j s^j by Horner
                let poly = self.coefficients[1..]
                    .iter()
                    .rev()
                    .fold(0.0, |acc, &p| (acc + p) * s);
                beta * (s - poly)
            }
            NonlinearityKind::Polynomial => self
                .coefficients
                .iter()
                .rev()
                .fold(0.0, |acc, &a| acc * u + a),
        }
    }

    /// f'(u), exact from the coefficients.
    pub fn derivative(&self, u: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Quadratic => 1.0 - 2.0 * u,
            NonlinearityKind::Mckean => {
                let beta = self.coefficients[0];
                let s = 1.0 - u;
                let dpoly: f64 = self.coefficients[1..]
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (j + 1) as f64 * p * s.powi(j as i32))
                    .sum();
                beta * (dpoly - 1.0)
            }
            NonlinearityKind::Polynomial => self
                .coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, a)| j as f64 * a * u.powi(j as i32 - 1))
                .sum(),
        }
    }

    /// Upper bound for |f'| on [0, 1], sampled; used for explicit step-size checks.
    pub fn lipschitz_bound(&self) -> f64 {
        (0..=200)
            .map(|j| self.derivative(j as f64 / 200.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn spec(&self) -> NonlinearitySpec {
        NonlinearitySpec {
            kind: self.kind,
            coefficients: self.coefficients.clone(),
        }
    }
}

impl TryFrom<NonlinearitySpec> for KppNonlinearity {
    type Error = Error;

    fn try_from(spec: NonlinearitySpec) -> Result<Self> {
        Self::from_spec(spec)
    }
}

impl From<KppNonlinearity> for NonlinearitySpec {
    fn from(f: KppNonlinearity) -> Self {
        f.spec()
    }
}

impl std::str::FromStr for KppNonlinearity {
    type Err = Error;

    /// Accepts `quadratic`, `mckean:beta,p1,p2,...`, `poly:a0,a1,...`, or a JSON spec.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let spec: NonlinearitySpec =
                serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
            return Self::from_spec(spec);
        }
        let (head, tail) = s.split_once(':').unwrap_or((s, ""));
        let coefficients = if tail.is_empty() {
            Vec::new()
        } else {
            tail.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("coefficient {t:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let kind = match head {
            "quadratic" => NonlinearityKind::Quadratic,
            "mckean" => NonlinearityKind::Mckean,
            "poly" | "polynomial" => NonlinearityKind::Polynomial,
            other => return Err(Error::Parse(format!("unknown nonlinearity {other:?}"))),
        };
        Self::from_spec(NonlinearitySpec { kind, coefficients })
    }
}

/// Evaluates f(u). Arguments outside [0, 1] are clamped and flagged.
pub fn eval_nonlinearity(f: &KppNonlinearity, u: f64) -> Result<Evaluation> {
    if !u.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite argument {u}")));
    }
    let clamped = !(0.0..=1.0).contains(&u);
    Ok(Evaluation {
        value: f.value(u.clamp(0.0, 1.0)),
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub condition: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, condition: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// Checks the monostable (KPP) conditions. Failures are reported, never returned as errors.
///
/// The pointwise conditions `0 < f(u) <= f'(0) u` are sampled on a uniform interior grid of
/// `n_samples` points (at least 10).
pub fn validate_kpp(f: &KppNonlinearity, n_samples: usize) -> ValidationReport {
    const TOL: f64 = 1e-12;
    let n = n_samples.max(10);
    let f0 = f.value(0.0);
    let f1 = f.value(1.0);
    let samples: Vec<f64> = (1..=n).map(|j| j as f64 / (n + 1) as f64).collect();

    let first_nonpositive = samples.iter().copied().find(|&u| f.value(u) <= 0.0);
    // Relative slack so exact equality (e.g. f'(0)u at the linear part) is not flagged.
    let first_above_linear = samples
        .iter()
        .copied()
        .find(|&u| f.value(u) > f.fprime0() * u * (1.0 + 1e-12) + TOL);

    let checks = vec![
        ConditionCheck {
            condition: "f(0) = 0",
            passed: f0.abs() <= TOL,
            detail: format!("f(0) = {f0:e}"),
        },
        ConditionCheck {
            condition: "f(1) = 0",
            passed: f1.abs() <= TOL,
            detail: format!("f(1) = {f1:e}"),
        },
        ConditionCheck {
            condition: "f'(0) > 0",
            passed: f.fprime0() > 0.0,
            detail: format!("f'(0) = {}", f.fprime0()),
        },
        ConditionCheck {
            condition: "f'(1) < 0",
            passed: f.fprime1() < 0.0,
            detail: format!("f'(1) = {}", f.fprime1()),
        },
        ConditionCheck {
            condition: "0 < f(u) <= f'(0) u",
            passed: first_nonpositive.is_none() && first_above_linear.is_none(),
            detail: match (first_nonpositive, first_above_linear) {
                (None, None) => format!("holds on {n} samples"),
                (Some(u), _) => format!("f({u}) = {} <= 0", f.value(u)),
                (None, Some(u)) => format!(
                    "f({u}) = {} > f'(0) u = {}",
                    f.value(u),
                    f.fprime0() * u
                ),
            },
        },
    ];
    ValidationReport { checks }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionData {
    pub fprime0: f64,
    pub cstar: f64,
    pub lambdastar: f64,
    pub lambda_c: Option<f64>,
}

/// Minimal speed `2 sqrt(f'(0))`, its decay rate, and the slow decay rate for a supplied `c`.
pub fn dispersion(f: &KppNonlinearity, c: Option<f64>) -> Result<DispersionData> {
    let fprime0 = f.fprime0();
    let lambdastar = fprime0.sqrt();
    let cstar = 2.0 * lambdastar;
    let lambda_c = match c {
        None => None,
        Some(c) => {
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("speed {c}")));
            }
            if c < cstar * (1.0 - 1e-12) {
                return Err(Error::SubcriticalSpeed { c, cstar });
            }
            let disc = (c * c - 4.0 * fprime0).max(0.0);
            // Stable form of (c - sqrt(c^2 - 4 f'(0)))/2.
            Some(2.0 * fprime0 / (c + disc.sqrt()))
        }
    };
    Ok(DispersionData {
        fprime0,
        cstar,
        lambdastar,
        lambda_c,
    })
}

/// Uniform 1-D grid `x_j = x0 + j dx`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1D {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x0: f64, dx: f64, n: usize) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() || !x0.is_finite() {
            return Err(Error::InvalidInput(format!("grid spacing {dx}, origin {x0}")));
        }
        if n < 3 {
            return Err(Error::InvalidInput(format!("grid needs n >= 3, got {n}")));
        }
        Ok(Self { x0, dx, n })
    }

    /// Grid covering `[a, b]` with spacing as close to `dx` as possible from below.
    pub fn span(a: f64, b: f64, dx: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidInput(format!("empty interval [{a}, {b}]")));
        }
        let cells = ((b - a) / dx).ceil().max(2.0) as usize;
        Self::new(a, (b - a) / cells as f64, cells + 1)
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.n == other.n
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
            && (self.x0 - other.x0).abs() <= 1e-9 * self.dx.max(1.0)
    }
}

/// Linear interpolation of grid samples at `x`; `left`/`right` are returned outside the grid.
pub fn interpolate(grid: &Grid1D, values: &[f64], x: f64, left: f64, right: f64) -> f64 {
    let s = (x - grid.x0) / grid.dx;
    if s < 0.0 {
        return left;
    }
    let last = (grid.n - 1) as f64;
    if s > last {
        return right;
    }
    let j = (s.floor() as usize).min(grid.n - 2);
    let w = s - j as f64;
    values[j] * (1.0 - w) + values[j + 1] * w
}

/// Values of `k` components on a shared grid at one time. `values[i][j]` is component `i`
/// (0-based) at grid point `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStack {
    pub grid: Grid1D,
    pub time: f64,
    pub values: Vec<Vec<f64>>,
}

impl FieldStack {
    pub fn new(grid: Grid1D, time: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("field stack needs k >= 1".into()));
        }
        if values.iter().any(|row| row.len() != grid.n) {
            return Err(Error::InvalidInput("row length differs from grid size".into()));
        }
        if !(time >= 0.0) {
            return Err(Error::InvalidInput(format!("time {time}")));
        }
        Ok(Self { grid, time, values })
    }

    /// Every component equal to the indicator of `x <= edge`.
    pub fn heaviside(grid: Grid1D, k: usize, edge: f64) -> Self {
        let row: Vec<f64> = grid
            .points()
            .iter()
            .map(|&x| if x <= edge { 1.0 } else { 0.0 })
            .collect();
        Self {
            grid,
            time: 0.0,
            values: vec![row; k],
        }
    }

    pub fn from_fn(grid: Grid1D, k: usize, f: impl Fn(usize, f64) -> f64) -> Self {
        let values = (0..k)
            .map(|i| grid.points().iter().map(|&x| f(i, x)).collect())
            .collect();
        Self {
            grid,
            time: 0.0,
            values,
        }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// True when every value lies in [0, 1].
    pub fn in_unit_range(&self) -> bool {
        self.values
            .iter()
            .flatten()
            .all(|v| (0.0..=1.0).contains(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn quadratic_values() {
        let f = KppNonlinearity::quadratic();
        assert_eq!(eval_nonlinearity(&f, 0.5).unwrap().value, 0.25);
        assert_eq!(eval_nonlinearity(&f, 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn mckean_binary_matches_quadratic_at_half() {
        // beta (1-u) - beta (1-u)^2 at u = 1/2: 0.5 - 0.25
        let f = KppNonlinearity::mckean(1.0, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(eval_nonlinearity(&f, 0.5).unwrap().value, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(f.fprime0(), 1.0);
        assert_abs_diff_eq!(f.fprime1(), -1.0);
    }

    #[test]
    fn clamping_is_flagged() {
        let f = KppNonlinearity::quadratic();
        let e = eval_nonlinearity(&f, 1.0 + 1e-9).unwrap();
        assert!(e.clamped);
        assert_eq!(e.value, 0.0);
        assert!(!eval_nonlinearity(&f, 0.3).unwrap().clamped);
        assert!(eval_nonlinearity(&f, f64::NAN).is_err());
        assert!(eval_nonlinearity(&f, f64::INFINITY).is_err());
    }

    #[test]
    fn validate_catalogue() {
        assert!(validate_kpp(&KppNonlinearity::quadratic(), 100).all_pass());
        let cubic = KppNonlinearity::polynomial(&[0.0, 1.0, 0.0, -1.0]).unwrap();
        let report = validate_kpp(&cubic, 100);
        assert!(report.all_pass(), "{report:?}");
        assert_eq!(cubic.fprime1(), -2.0);
        let ternary = KppNonlinearity::mckean(1.0, &[0.0, 0.5, 0.5]).unwrap();
        assert!(validate_kpp(&ternary, 100).all_pass());
    }

    #[test]
    fn validate_reports_kpp_violation() {
        // 2u(1-u)(u+0.1) = 0.2u + 1.8u^2 - 2u^3; f(0.5) = 0.3 > f'(0) 0.5 = 0.1
        let f = KppNonlinearity::polynomial(&[0.0, 0.2, 1.8, -2.0]).unwrap();
        assert_abs_diff_eq!(f.value(0.5), 0.3, epsilon = 1e-15);
        let report = validate_kpp(&f, 99);
        assert!(!report.all_pass());
        assert!(!report.check("0 < f(u) <= f'(0) u").unwrap().passed);
        assert!(report.check("f(0) = 0").unwrap().passed);
        assert!(report.check("f(1) = 0").unwrap().passed);
    }

    #[test]
    fn dispersion_examples() {
        let f = KppNonlinearity::quadratic();
        let d = dispersion(&f, None).unwrap();
        assert_eq!(d.cstar, 2.0);
        assert_eq!(d.lambdastar, 1.0);
        assert_eq!(d.lambda_c, None);
        assert_abs_diff_eq!(dispersion(&f, Some(2.0)).unwrap().lambda_c.unwrap(), 1.0);
        assert_abs_diff_eq!(
            dispersion(&f, Some(2.5)).unwrap().lambda_c.unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert!(matches!(
            dispersion(&f, Some(1.9)),
            Err(Error::SubcriticalSpeed { .. })
        ));
    }

    #[test]
    fn parse_nonlinearity() {
        let f: KppNonlinearity = "quadratic".parse().unwrap();
        assert_eq!(f, KppNonlinearity::quadratic());
        let g: KppNonlinearity = "poly:0,1,0,-1".parse().unwrap();
        assert_eq!(g.fprime1(), -2.0);
        let h: KppNonlinearity = r#"{"kind":"mckean","coefficients":[2.0,0.0,1.0]}"#
            .parse()
            .unwrap();
        assert_eq!(h.fprime0(), 2.0);
        assert!(r#"{"kind":"mckean","coefs":[1]}"#.parse::<KppNonlinearity>().is_err());
        assert!("mckean:1,0.5,0.6".parse::<KppNonlinearity>().is_err());
    }

    #[test]
    fn interpolation_edges() {
        let g = Grid1D::new(0.0, 1.0, 4).unwrap();
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(interpolate(&g, &v, 1.5, -1.0, 9.0), 1.5);
        assert_eq!(interpolate(&g, &v, 3.0, -1.0, 9.0), 3.0);
        assert_eq!(interpolate(&g, &v, -0.1, -1.0, 9.0), -1.0);
        assert_eq!(interpolate(&g, &v, 3.1, -1.0, 9.0), 9.0);
        assert!(Grid1D::new(0.0, 0.0, 5).is_err());
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
    }

    proptest! {
        #[test]
        fn dispersion_relation_holds(c in 2.0f64..20.0, fp in 0.1f64..4.0) {
            let f = KppNonlinearity::polynomial(&[0.0, fp, -fp]).unwrap();
            let d = dispersion(&f, Some(c * fp.sqrt())).unwrap();
            let lc = d.lambda_c.unwrap();
            let c = c * fp.sqrt();
            prop_assert!((c * lc - (lc * lc + fp)).abs() < 1e-12 * c * c);
            prop_assert!(lc > 0.0 && lc <= d.lambdastar * (1.0 + 1e-12));
            prop_assert!((d.cstar - 2.0 * d.lambdastar).abs() < 1e-15);
        }

        #[test]
        fn quadratic_symmetry(u in 0.0f64..1.0) {
            let f = KppNonlinearity::quadratic();
            prop_assert!((f.value(u) - f.value(1.0 - u)).abs() < 1e-15);
        }

        #[test]
        fn analytic_derivative_matches_difference(u in 0.01f64..0.99) {
            let f = KppNonlinearity::mckean(1.5, &[0.2, 0.5, 0.3]).unwrap();
            let h = 1e-6;
            let fd = (f.value(u + h) - f.value(u - h)) / (2.0 * h);
            prop_assert!((fd - f.derivative(u)).abs() < 1e-7);
        }
    }
}
