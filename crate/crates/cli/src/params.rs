//! Parameter documents of the subcommands. Every document is plain JSON; unknown keys are
//! rejected and every field has a default, so `{}` is a valid configuration.

use std::path::PathBuf;

use kpp_cascade::cascade::WindowPolicy;
use kpp_cascade::kpp::{NonlinearityKind, NonlinearitySpec};
use serde::{Deserialize, Deserializer, Serialize};

fn quadratic() -> NonlinearitySpec {
    NonlinearitySpec {
        kind: NonlinearityKind::Quadratic,
        coefficients: vec![],
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveParams {
    pub nonlinearity: NonlinearitySpec,
    pub speed: f64,
    pub half_width: f64,
    pub tol: f64,
}

impl Default for WaveParams {
    fn default() -> Self {
        WaveParams {
            nonlinearity: quadratic(),
            speed: 2.5,
            half_width: 40.0,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveParams {
    pub k: usize,
    pub alpha: f64,
    pub nonlinearity: NonlinearitySpec,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Heaviside data `1{x <= edge}` in every component.
    pub heaviside_edge: f64,
    pub window: WindowPolicy,
    /// Integrate in the cascade frames with this `t0` instead of the lab frame.
    pub frame_t0: Option<f64>,
    /// Snapshot times; empty means `[t_end]`.
    pub snapshots: Vec<f64>,
    /// Write every `stride`-th grid point of each snapshot.
    pub stride: usize,
    pub trace_level: Option<f64>,
    pub trace_every: f64,
}

impl Default for EvolveParams {
    fn default() -> Self {
        EvolveParams {
            k: 2,
            alpha: 1.0,
            nonlinearity: quadratic(),
            x_min: -60.0,
            x_max: 140.0,
            dx: 0.05,
            dt: 5e-3,
            t_end: 50.0,
            heaviside_edge: 0.0,
            window: WindowPolicy::FollowFront,
            frame_t0: None,
            snapshots: vec![],
            stride: 1,
            trace_level: Some(0.5),
            trace_every: 1.0,
        }
    }
}

fn window<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Form {
        Pair(f64, f64),
        Text(String),
    }
    match Form::deserialize(d)? {
        Form::Pair(a, b) => Ok((a, b)),
        Form::Text(s) => {
            let parsed = s
                .split_once(':')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            parsed.ok_or_else(|| serde::de::Error::custom(format!("window '{s}' is not 'a:b'")))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontParams {
    /// `trace.csv` (`t,component,position`) or `trajectory.csv` (`t,component,x,value`).
    #[serde(alias = "in")]
    pub input: PathBuf,
    pub level: f64,
    /// `[a, b]` or `"a:b"`.
    #[serde(deserialize_with = "window")]
    pub window: (f64, f64),
    pub cstar: f64,
}

impl Default for FrontParams {
    fn default() -> Self {
        FrontParams {
            input: PathBuf::from("trace.csv"),
            level: 0.5,
            window: (100.0, 1000.0),
            cstar: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfsimParams {
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub tau_end: f64,
    pub dtau: f64,
    pub output_every: f64,
    pub eta_max: f64,
    pub deta: f64,
    pub fit_window: (f64, f64),
}

impl Default for SelfsimParams {
    fn default() -> Self {
        SelfsimParams {
            k: 2,
            alpha: 1.0,
            epsilon: 0.01,
            tau_end: 12.0,
            dtau: 2e-3,
            output_every: 0.1,
            eta_max: 12.0,
            deta: 0.01,
            fit_window: (2.0, 12.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BbmParams {
    pub k: usize,
    pub alpha: f64,
    pub t: f64,
    pub replicas: u64,
    pub max_particles: usize,
}

impl Default for BbmParams {
    fn default() -> Self {
        BbmParams {
            k: 2,
            alpha: 1.0,
            t: 7.0,
            replicas: 20_000,
            max_particles: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareParams {
    /// `maxima.csv` written by `bbm`.
    pub bbm: PathBuf,
    /// `trajectory.csv` written by `evolve` holding component 1 at time `t`; when absent the
    /// reference PDE is solved here.
    pub pde: Option<PathBuf>,
    pub k: usize,
    pub alpha: f64,
    pub t: f64,
}

impl Default for CompareParams {
    fn default() -> Self {
        CompareParams {
            bbm: PathBuf::from("maxima.csv"),
            pde: None,
            k: 2,
            alpha: 1.0,
            t: 7.0,
        }
    }
}
