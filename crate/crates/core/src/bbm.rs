//! Cascading multitype branching Brownian motion.
//!
//! Type `i < k` particles branch at rate `binary_rate` into two type-`i` particles and at rate
//! `alpha` into a type-`i` and a type-`(i+1)` particle; type `k` only branches binarily. Motion
//! is Brownian with variance `diffusion_variance` per unit time. Starting from one type-1
//! particle at the origin, `P(M_t >= x)` solves the first component of the cascade with
//! `f(u) = u - u^2` and Heaviside data.
//!
//! Replicas are simulated exactly (exponential event times, Gaussian increments between
//! events) in a fixed depth-first order from a ChaCha stream keyed by `(seed, replica)`, so
//! results do not depend on thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kpp::FieldStack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbmConfig {
    pub k: usize,
    pub alpha: f64,
    #[serde(default = "one")]
    pub binary_rate: f64,
    #[serde(default = "two")]
    pub diffusion_variance: f64,
    pub t_max: f64,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub max_particles: usize,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_cap() -> usize {
    5_000_000
}

impl BbmConfig {
    pub fn new(k: usize, alpha: f64, t_max: f64, seed: u64) -> Self {
        Self {
            k,
            alpha,
            binary_rate: 1.0,
            diffusion_variance: 2.0,
            t_max,
            seed,
            max_particles: default_cap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.binary_rate >= 0.0 && self.diffusion_variance >= 0.0) {
            return Err(Error::Config("rates and variance must be non-negative".into()));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::Config(format!("t_max = {} must be positive", self.t_max)));
        }
        if self.max_particles == 0 {
            return Err(Error::Config("max_particles must be positive".into()));
        }
        Ok(())
    }

    /// Total event rate of a type-`i` particle (1-based).
    pub fn event_rate(&self, i: usize) -> f64 {
        if i < self.k {
            self.binary_rate + self.alpha
        } else {
            self.binary_rate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbmReplica {
    pub index: u64,
    /// `M_t`; `-inf` never occurs since the population cannot die out.
    pub max_position: f64,
    pub particle_counts: Vec<u64>,
    /// `Z_t = sum (2t - X) e^{X - 2t}` over all particles alive at `t_max`.
    pub derivative_martingale: f64,
    pub truncated: bool,
}

fn replica_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// First event of a type-`i` particle: the waiting time and whether it spawns type `i+1`.
pub fn first_event<R: Rng + ?Sized>(config: &BbmConfig, i: usize, rng: &mut R) -> (f64, bool) {
    let rate = config.event_rate(i);
    if rate == 0.0 {
        return (f64::INFINITY, false);
    }
    let wait = rng.sample::<f64, _>(Exp1) / rate;
    let mutates = i < config.k && rng.gen::<f64>() * rate < config.alpha;
    (wait, mutates)
}

pub fn simulate_replica(config: &BbmConfig, index: u64) -> Result<BbmReplica> {
    config.validate()?;
    let mut rng = replica_rng(config.seed, index);
    let t_max = config.t_max;
    let sd = config.diffusion_variance.sqrt();
    let mut counts = vec![0u64; config.k];
    let mut max_position = f64::NEG_INFINITY;
    let mut z = 0.0;
    let mut created = 1usize;
    let mut truncated = false;
    // (type, birth time, birth position), processed depth first
    let mut stack: Vec<(usize, f64, f64)> = vec![(1, 0.0, 0.0)];
    while let Some((i, born, x)) = stack.pop() {
        let (wait, mutates) = first_event(config, i, &mut rng);
        let end = born + wait;
        let normal: f64 = rng.sample(StandardNormal);
        if end >= t_max {
            let pos = x + sd * (t_max - born).sqrt() * normal;
            counts[i - 1] += 1;
            max_position = max_position.max(pos);
            z += (2.0 * t_max - pos) * (pos - 2.0 * t_max).exp();
            continue;
        }
        let pos = x + sd * wait.sqrt() * normal;
        created += 1;
        if created > config.max_particles {
            truncated = true;
            break;
        }
        let child = if mutates { i + 1 } else { i };
        stack.push((child, end, pos));
        stack.push((i, end, pos));
    }
    Ok(BbmReplica {
        index,
        max_position,
        particle_counts: counts,
        derivative_martingale: z,
        truncated,
    })
}

/// Replicas `0..n` in index order, simulated in parallel on the current rayon pool.
pub fn simulate_replicas(config: &BbmConfig, n: u64) -> Result<Vec<BbmReplica>> {
    config.validate()?;
    (0..n).into_par_iter().map(|i| simulate_replica(config, i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    /// Sorted ascending.
    pub samples: Vec<f64>,
    pub n: usize,
    /// Truncated replicas left out of the estimate.
    pub excluded: usize,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self {
            n: samples.len(),
            samples,
            excluded: 0,
        })
    }

    /// `P(M >= x)` under the empirical law.
    pub fn survival(&self, x: f64) -> f64 {
        let below = self.samples.partition_point(|&s| s < x);
        (self.n - below) as f64 / self.n as f64
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let idx = ((p * self.n as f64).ceil() as usize).clamp(1, self.n) - 1;
        self.samples[idx]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

pub fn empirical_max_cdf(replicas: &[BbmReplica]) -> Result<EmpiricalCdf> {
    let kept: Vec<f64> = replicas
        .iter()
        .filter(|r| !r.truncated)
        .map(|r| r.max_position)
        .collect();
    let excluded = replicas.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::NoData(format!("all {excluded} replicas were truncated")));
    }
    if kept.len() < 100 {
        return Err(Error::InsufficientData {
            needed: 100,
            got: kept.len(),
        });
    }
    let mut cdf = EmpiricalCdf::from_samples(kept)?;
    cdf.excluded = excluded;
    Ok(cdf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub ks_distance: f64,
    /// Grid point where the distance is attained.
    pub worst_x: f64,
    pub points: usize,
    pub samples: usize,
    pub excluded: usize,
}

/// Sup distance between the empirical `P(M_t >= x)` and `v^1(t, x)` over grid points where
/// `v^1` lies in `[1e-3, 1 - 1e-3]`.
pub fn compare_bbm_pde(cdf: &EmpiricalCdf, pde: &FieldStack, t: f64) -> Result<ComparisonReport> {
    if (pde.time - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "PDE snapshot at t = {} but the sample is at t = {t}",
            pde.time
        )));
    }
    let v = pde.component(0);
    let mut worst = (0.0f64, f64::NAN);
    let mut points = 0;
    for (j, &u) in v.iter().enumerate() {
        if !(1e-3..=1.0 - 1e-3).contains(&u) {
            continue;
        }
        points += 1;
        let x = pde.grid.x(j);
        let d = (cdf.survival(x) - u).abs();
        if d > worst.0 {
            worst = (d, x);
        }
    }
    if points == 0 {
        return Err(Error::InvalidInput("PDE field never enters [1e-3, 1 - 1e-3]".into()));
    }
    Ok(ComparisonReport {
        ks_distance: worst.0,
        worst_x: worst.1,
        points,
        samples: cdf.n,
        excluded: cdf.excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleStat {
    pub time: f64,
    pub mean: f64,
    pub std_dev: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    pub replicas: usize,
}

/// Mean and spread of `Z_t` for the single-type process at each of `times`.
pub fn derivative_martingale_series(config: &BbmConfig, times: &[f64], n_replicas: u64) -> Result<Vec<MartingaleStat>> {
    config.validate()?;
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|&t| t < 0.0 || t > config.t_max) {
        return Err(Error::InvalidInput("times must increase within [0, t_max]".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t == 0.0 {
            // one particle at the origin
            out.push(MartingaleStat {
                time: 0.0,
                mean: 0.0,
                std_dev: 0.0,
                std_error: 0.0,
                replicas: n_replicas as usize,
            });
            continue;
        }
        let cfg = BbmConfig {
            k: 1,
            t_max: t,
            ..config.clone()
        };
        let reps = simulate_replicas(&cfg, n_replicas)?;
        let z: Vec<f64> = reps.iter().filter(|r| !r.truncated).map(|r| r.derivative_martingale).collect();
        if z.is_empty() {
            return Err(Error::NoData("all replicas truncated".into()));
        }
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        out.push(MartingaleStat {
            time: t,
            mean,
            std_dev: var.sqrt(),
            std_error: (var / n).sqrt(),
            replicas: z.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_index_same_replica() {
        let cfg = BbmConfig::new(2, 1.0, 4.0, 17);
        let a = simulate_replica(&cfg, 5).unwrap();
        let b = simulate_replica(&cfg, 5).unwrap();
        assert_eq!(a.max_position.to_bits(), b.max_position.to_bits());
        assert_eq!(a.derivative_martingale.to_bits(), b.derivative_martingale.to_bits());
        assert_ne!(a, simulate_replica(&cfg, 6).unwrap());
    }

    #[test]
    fn no_mutation_without_alpha() {
        let cfg = BbmConfig::new(2, 0.0, 4.0, 3);
        for i in 0..200 {
            assert_eq!(simulate_replica(&cfg, i).unwrap().particle_counts[1], 0);
        }
    }

    #[test]
    fn cap_marks_truncation() {
        let mut cfg = BbmConfig::new(1, 0.0, 8.0, 1);
        cfg.max_particles = 10;
        let reps: Vec<_> = (0..50).map(|i| simulate_replica(&cfg, i).unwrap()).collect();
        assert!(reps.iter().any(|r| r.truncated));
        let mut all = cfg.clone();
        all.max_particles = 1;
        let reps: Vec<_> = (0..200).map(|i| simulate_replica(&all, i).unwrap()).collect();
        let trunc = reps.iter().filter(|r| r.truncated).count();
        // survive without any event with probability e^{-8}
        assert!(trunc >= 190);
        if trunc == reps.len() {
            assert!(matches!(empirical_max_cdf(&reps), Err(Error::NoData(_))));
        }
    }

    #[test]
    fn empirical_survival_edges() {
        let cdf = EmpiricalCdf::from_samples((0..101).map(|i| i as f64).collect()).unwrap();
        assert_eq!(cdf.survival(-1.0), 1.0);
        assert_eq!(cdf.survival(101.0), 0.0);
        assert_eq!(cdf.median(), 50.0);
        assert!((cdf.survival(cdf.median()) - 0.5).abs() <= 1.0 / (cdf.n as f64).sqrt());
    }

    #[test]
    fn martingale_starts_at_zero() {
        let cfg = BbmConfig::new(1, 0.0, 2.0, 9);
        let s = derivative_martingale_series(&cfg, &[0.0, 1.0], 50).unwrap();
        assert_eq!(s[0].mean, 0.0);
        assert!(derivative_martingale_series(&cfg, &[1.0, 0.5], 10).is_err());
    }
}
