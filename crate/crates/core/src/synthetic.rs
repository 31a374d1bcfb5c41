//! Known-answer data: Langevin trajectories from analytic potentials,
//! low-rank matrices with missing cells, and labelled stance cohorts.
//!
//! Potentials follow the landscape module's sign convention, where the
//! drift is `+∇φ`. A bowl with its attractor at `c` therefore has
//! `φ = -k/2 |x - c|²`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::TimeDelta;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Label, StanceObservation, TimeBinning};
use crate::landscape::DriftField;
use crate::latent::{LatentTrajectory, StanceMatrix};
use crate::seed;
use crate::special::{dot, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticPotential {
    QuadraticBowl {
        center: Vec<f64>,
        stiffness: f64,
    },
    /// Quartic double well along the first axis with minima at
    /// `±spacing / 2`, and a harmonic bowl of `transverse_stiffness` along
    /// the other axes.
    DoubleWell {
        barrier: f64,
        spacing: f64,
        transverse_stiffness: f64,
        dimension: usize,
    },
    /// `base + t · tilt_rate · x₀`: a force along the first axis that grows
    /// linearly with normalized time.
    Tilted {
        base: Box<AnalyticPotential>,
        tilt_rate: f64,
    },
}

impl AnalyticPotential {
    pub fn dimension(&self) -> usize {
        match self {
            AnalyticPotential::QuadraticBowl { center, .. } => center.len(),
            AnalyticPotential::DoubleWell { dimension, .. } => *dimension,
            AnalyticPotential::Tilted { base, .. } => base.dimension(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnalyticPotential::QuadraticBowl { center, stiffness } => {
                if center.is_empty() {
                    return Err(Error::InvalidInput("bowl needs at least one dimension".into()));
                }
                if !(*stiffness > 0.0) {
                    return Err(Error::InvalidInput("stiffness must be positive".into()));
                }
            }
            AnalyticPotential::DoubleWell {
                barrier,
                spacing,
                transverse_stiffness,
                dimension,
            } => {
                if *dimension == 0 || !(*spacing > 0.0) || !(*barrier >= 0.0) || !(*transverse_stiffness >= 0.0) {
                    return Err(Error::InvalidInput(
                        "double well needs dimension > 0, spacing > 0 and non-negative stiffnesses".into(),
                    ));
                }
            }
            AnalyticPotential::Tilted { base, tilt_rate } => {
                if !tilt_rate.is_finite() {
                    return Err(Error::NonFinite("tilt rate"));
                }
                base.validate()?;
            }
        }
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Height `φ(x, t)`.
    pub fn potential(&self, x: &[f64], t: f64) -> Result<f64> {
        self.check_dim(x)?;
        Ok(match self {
            AnalyticPotential::QuadraticBowl { center, stiffness } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                -0.5 * stiffness * r2
            }
            AnalyticPotential::DoubleWell {
                barrier,
                spacing,
                transverse_stiffness,
                ..
            } => {
                let q = 2.0 * x[0] / spacing;
                let rest: f64 = x[1..].iter().map(|v| v * v).sum();
                -(barrier * (q * q - 1.0) * (q * q - 1.0)) - 0.5 * transverse_stiffness * rest
            }
            AnalyticPotential::Tilted { base, tilt_rate } => base.potential(x, t)? + t * tilt_rate * x[0],
        })
    }

    /// Closed-form `∇φ` with respect to position.
    pub fn drift(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            AnalyticPotential::QuadraticBowl { center, stiffness } => {
                x.iter().zip(center).map(|(a, c)| -stiffness * (a - c)).collect()
            }
            AnalyticPotential::DoubleWell {
                barrier,
                spacing,
                transverse_stiffness,
                ..
            } => {
                let a = 2.0 / spacing;
                let q = a * x[0];
                let mut out = vec![-4.0 * barrier * a * q * (q * q - 1.0)];
                out.extend(x[1..].iter().map(|v| -transverse_stiffness * v));
                out
            }
            AnalyticPotential::Tilted { base, tilt_rate } => {
                let mut out = base.drift(x, t)?;
                out[0] += t * tilt_rate;
                out
            }
        })
    }
}

pub fn true_drift(p: &AnalyticPotential, x: &[f64], t_norm: f64) -> Result<Vec<f64>> {
    p.drift(x, t_norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPositions {
    /// Uniform on `[-half_width, half_width]^d`.
    UniformBox { half_width: f64 },
    /// One start per trajectory, reused cyclically.
    Fixed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_traj: usize,
    pub n_steps: usize,
    pub sigma: f64,
    pub seed: u64,
    /// Normalized time of the first point.
    pub t0: f64,
    /// Normalized time advanced per step.
    pub dt: f64,
    pub initial: InitialPositions,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_traj: 200,
            n_steps: 100,
            sigma: 0.05,
            seed: 0,
            t0: 1.0,
            dt: TimeBinning::default().step_increment().expect("default anchors are valid"),
            initial: InitialPositions::UniformBox { half_width: 2.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedTrajectory {
    pub trajectory: LatentTrajectory,
    /// The path left `|x| <= 1e6` and was cut short.
    pub diverged: bool,
}

const ESCAPE_NORM: f64 = 1e6;

/// `x_{t+1} = x_t + ∇φ(x_t, t) + N(0, σ² I)`, one independent stream per
/// trajectory. Each trajectory has `n_steps + 1` points.
pub fn simulate(p: &AnalyticPotential, cfg: &SimulationConfig) -> Result<Vec<SimulatedTrajectory>> {
    p.validate()?;
    if cfg.n_traj == 0 || cfg.n_steps == 0 {
        return Err(Error::InvalidInput("need at least one trajectory and one step".into()));
    }
    if !(cfg.sigma >= 0.0) || !(cfg.dt > 0.0) {
        return Err(Error::InvalidInput("sigma must be >= 0 and dt > 0".into()));
    }
    let d = p.dimension();
    if let InitialPositions::Fixed(starts) = &cfg.initial {
        if starts.is_empty() || starts.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidInput(format!("fixed starts must be non-empty {d}-vectors")));
        }
    }
    let noise = Normal::new(0.0, cfg.sigma).map_err(|_| Error::InvalidInput("bad sigma".into()))?;
    let mut out = Vec::with_capacity(cfg.n_traj);
    for i in 0..cfg.n_traj {
        let mut rng = seed::rng(seed::derive(cfg.seed, i as u64));
        let mut x: Vec<f64> = match &cfg.initial {
            InitialPositions::UniformBox { half_width } => {
                (0..d).map(|_| rng.random_range(-*half_width..=*half_width)).collect()
            }
            InitialPositions::Fixed(starts) => starts[i % starts.len()].clone(),
        };
        let mut times = vec![cfg.t0];
        let mut coords = vec![x.clone()];
        let mut diverged = false;
        for step in 0..cfg.n_steps {
            let t = cfg.t0 + step as f64 * cfg.dt;
            let drift = p.drift(&x, t)?;
            for (xi, di) in x.iter_mut().zip(&drift) {
                *xi += di;
                if cfg.sigma > 0.0 {
                    *xi += noise.sample(&mut rng);
                }
            }
            if !(norm(&x) <= ESCAPE_NORM) {
                diverged = true;
                break;
            }
            times.push(cfg.t0 + (step + 1) as f64 * cfg.dt);
            coords.push(x.clone());
        }
        out.push(SimulatedTrajectory {
            trajectory: LatentTrajectory {
                person_id: format!("sim-{i:04}"),
                times,
                coords,
            },
            diverged,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    /// Mean cosine similarity over supported nodes where both fields are
    /// non-zero.
    pub cosine: f64,
    pub rmse: f64,
    pub nodes: usize,
}

/// Compares a learned drift field with the analytic drift on `support`.
pub fn recovery_score(learned: &DriftField, p: &AnalyticPotential, support: &[bool]) -> Result<RecoveryScore> {
    if support.len() != learned.nodes.len() {
        return Err(Error::DimensionMismatch {
            expected: learned.nodes.len(),
            got: support.len(),
        });
    }
    let selected = support.iter().filter(|s| **s).count();
    if selected == 0 {
        return Err(Error::InvalidInput("support mask selects no nodes".into()));
    }
    if selected < 10 {
        return Err(Error::InvalidInput(format!("support mask selects {selected} nodes, need 10")));
    }
    let mut cos_sum = 0.0;
    let mut cos_count = 0usize;
    let mut sq = 0.0;
    for (i, node) in learned.nodes.iter().enumerate() {
        if !support[i] {
            continue;
        }
        let truth = p.drift(node, learned.time)?;
        let est = &learned.drift[i];
        let (nt, ne) = (norm(&truth), norm(est));
        if nt > 1e-12 && ne > 1e-12 {
            cos_sum += dot(&truth, est) / (nt * ne);
            cos_count += 1;
        }
        sq += truth.iter().zip(est).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(RecoveryScore {
        cosine: if cos_count == 0 { 0.0 } else { cos_sum / cos_count as f64 },
        rmse: libm::sqrt(sq / selected as f64),
        nodes: selected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowRankSpec {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// Standard deviation of the loading entries.
    pub loading_scale: f64,
    /// Column means are uniform on `[-offset_scale, offset_scale]`.
    pub offset_scale: f64,
    pub noise: f64,
    pub missing_fraction: f64,
}

/// `X = μ + Z Wᵀ + ε` with standard normal factors and a random mask.
/// Returns the masked matrix and the complete noisy matrix. Every column
/// keeps at least one observed cell.
pub fn low_rank_matrix(spec: &LowRankSpec, seed: u64) -> (StanceMatrix, Vec<f64>) {
    let mut rng = seed::rng(seed);
    let (n, p, k) = (spec.rows, spec.cols, spec.rank);
    let w: Vec<f64> = (0..p * k)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            spec.loading_scale * z
        })
        .collect();
    let mu: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0) * spec.offset_scale).collect();
    let mut values = vec![0.0; n * p];
    for i in 0..n {
        let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        for j in 0..p {
            let e: f64 = StandardNormal.sample(&mut rng);
            values[i * p + j] = mu[j] + (0..k).map(|c| w[j * k + c] * z[c]).sum::<f64>() + spec.noise * e;
        }
    }
    let truth = values.clone();
    let mut m = StanceMatrix::from_dense(n, p, values);
    for i in 0..n {
        for j in 0..p {
            if rng.random::<f64>() < spec.missing_fraction {
                m.mask(i, j);
            }
        }
    }
    for j in 0..p {
        if (0..n).all(|i| m.get(i, j).is_none()) {
            let i = rng.random_range(0..n);
            m.set(i, j, truth[i * p + j]);
        }
    }
    (m, truth)
}

/// A labelled synthetic population for end-to-end runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub persons: usize,
    pub targets: usize,
    /// Bins covered by every person.
    pub bins: usize,
    /// Probability of a post in a bin.
    pub post_rate: f64,
    pub sigma: f64,
    /// Standard deviation of label noise added to `w · x`.
    pub label_noise: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            persons: 20,
            targets: 10,
            bins: 120,
            post_rate: 0.8,
            sigma: 0.05,
            label_noise: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub trajectories: Vec<LatentTrajectory>,
    /// `targets × d`, row-major.
    pub loadings: Vec<f64>,
    pub target_ids: Vec<String>,
    pub observations: Vec<StanceObservation>,
}

/// Simulates one latent path per person on consecutive bins from the
/// binning epoch and emits labelled posts: `favor` when `w_t · x + noise`
/// exceeds 1/3, `against` below -1/3, `neutral` otherwise.
pub fn stance_cohort(
    p: &AnalyticPotential,
    spec: &CohortSpec,
    binning: &TimeBinning,
    seed: u64,
) -> Result<Cohort> {
    p.validate()?;
    if spec.persons == 0 || spec.targets == 0 || spec.bins < 2 {
        return Err(Error::InvalidInput("cohort needs persons, targets and two bins".into()));
    }
    let d = p.dimension();
    let mut rng = seed::rng(seed);
    let loadings: Vec<f64> = (0..spec.targets * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target_ids: Vec<String> = (0..spec.targets).map(|j| format!("target-{j:02}")).collect();
    let sim = simulate(
        p,
        &SimulationConfig {
            n_traj: spec.persons,
            n_steps: spec.bins - 1,
            sigma: spec.sigma,
            seed: seed::derive(seed, 1),
            t0: binning.normalize_bin_center(0)?,
            dt: binning.step_increment()?,
            initial: InitialPositions::UniformBox { half_width: 1.0 },
        },
    )?;
    let label_noise = Normal::new(0.0, spec.label_noise.max(0.0))
        .map_err(|_| Error::InvalidInput("bad label noise".into()))?;
    let mut observations = Vec::new();
    let mut trajectories = Vec::with_capacity(spec.persons);
    for (i, s) in sim.into_iter().enumerate() {
        let mut traj = s.trajectory;
        traj.person_id = format!("person-{i:03}");
        let mut prng = seed::rng(seed::derive(seed, 1000 + i as u64));
        for (bin, x) in traj.coords.iter().enumerate() {
            if prng.random::<f64>() >= spec.post_rate {
                continue;
            }
            let j = prng.random_range(0..spec.targets);
            let score = dot(&loadings[j * d..(j + 1) * d], x) + label_noise.sample(&mut prng);
            let label = if score > 1.0 / 3.0 {
                Label::Favor
            } else if score < -1.0 / 3.0 {
                Label::Against
            } else {
                Label::Neutral
            };
            let offset = prng.random_range(0..i64::from(binning.bin_width_days) * 86_400);
            observations.push(StanceObservation {
                person_id: traj.person_id.clone(),
                target_id: target_ids[j].clone(),
                timestamp: binning.bin_start(bin as i64) + TimeDelta::seconds(offset),
                label,
                platform: None,
                account_id: None,
            });
        }
        trajectories.push(traj);
    }
    Ok(Cohort {
        trajectories,
        loadings,
        target_ids,
        observations,
    })
}
