//! The time-dependent potential network `φ(x, t)`.
//!
//! A softplus MLP maps `[t, x]` to a scalar height. Movement follows
//! `x' = x + ∇ₓφ(x, t) + η`, with a plus sign: drift climbs the learned
//! potential, so attractors sit at local maxima of `φ`. Figures and the
//! Boltzmann marginal read `φ` with this convention in mind.
//!
//! Training needs the parameter gradient of the input gradient. It is
//! derived by hand below (reverse mode through the backward pass) rather
//! than by an autodiff framework.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, fabs, log, log1p, pow, sqrt};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeBinning;
use crate::latent::LatentTrajectory;
use crate::seed;
use crate::special::{median, norm};

fn softplus(a: f64) -> f64 {
    a.max(0.0) + log1p(exp(-fabs(a)))
}

fn logistic(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + exp(-a))
    } else {
        let e = exp(a);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialNet {
    /// `[1 + d, hidden..., 1]`.
    pub layer_sizes: Vec<usize>,
    /// Per layer: weights (`out × in`, row-major) followed by biases.
    pub params: Vec<f64>,
    pub dropout_rate: f64,
    /// Diffusion scale, fixed; used only when simulating.
    pub sigma: f64,
    pub confinement_c0: f64,
    pub radius_r: f64,
    pub binning: TimeBinning,
}

impl PotentialNet {
    /// All-zero network: `φ ≡ 0`.
    pub fn zeros(dim: usize, hidden: &[usize], binning: TimeBinning) -> PotentialNet {
        let layer_sizes = layer_sizes(dim, hidden);
        let n = param_count(&layer_sizes);
        PotentialNet {
            layer_sizes,
            params: vec![0.0; n],
            dropout_rate: 0.0,
            sigma: 0.0,
            confinement_c0: 0.0,
            radius_r: 1.0,
            binning,
        }
    }

    /// Uniform `±1/√fan_in` initialization of weights and biases.
    pub fn init(dim: usize, hidden: &[usize], binning: TimeBinning, seed: u64) -> PotentialNet {
        let mut net = PotentialNet::zeros(dim, hidden, binning);
        let mut rng = seed::rng(seed);
        let mut off = 0;
        for w in net.layer_sizes.windows(2) {
            let bound = 1.0 / sqrt(w[0] as f64);
            let n = w[0] * w[1] + w[1];
            for p in &mut net.params[off..off + n] {
                *p = rng.random_range(-bound..bound);
            }
            off += n;
        }
        net
    }

    pub fn dim(&self) -> usize {
        self.layer_sizes[0] - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.layer_sizes;
        if s.len() < 2 || s[0] < 2 || *s.last().unwrap() != 1 || s.contains(&0) {
            return Err(Error::InvalidInput(
                "layer sizes must be [1 + d, hidden..., 1] with d >= 1".into(),
            ));
        }
        if self.params.len() != param_count(s) {
            return Err(Error::DimensionMismatch {
                expected: param_count(s),
                got: self.params.len(),
            });
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidInput("dropout rate must be in [0, 1)".into()));
        }
        if !(self.radius_r > 0.0) || !(self.sigma >= 0.0) || !(self.confinement_c0 >= 0.0) {
            return Err(Error::InvalidInput("r must be positive, sigma and C0 non-negative".into()));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        self.binning.validate()
    }

    /// Normalized-time advance of one update.
    pub fn time_step(&self) -> Result<f64> {
        self.binning.step_increment()
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    fn check_input(&self, x: &[f64], t: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }
}

fn layer_sizes(dim: usize, hidden: &[usize]) -> Vec<usize> {
    let mut s = vec![dim + 1];
    s.extend_from_slice(hidden);
    s.push(1);
    s
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Scratch space for one sample's passes. Index `l` runs over hidden
/// layers; `g[l]` is `∂φ/∂h_l` with `h_0` the input.
struct Work {
    offsets: Vec<usize>,
    h: Vec<Vec<f64>>,
    sig: Vec<Vec<f64>>,
    dsig: Vec<Vec<f64>>,
    mask: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    gbar: Vec<Vec<f64>>,
    abar: Vec<Vec<f64>>,
    hbar: Vec<f64>,
}

impl Work {
    fn new(sizes: &[usize]) -> Work {
        let nh = sizes.len() - 2;
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut off = 0;
        for w in sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let hidden = |l: usize| vec![0.0; sizes[l + 1]];
        Work {
            offsets,
            h: (0..=nh).map(|l| vec![0.0; sizes[l]]).collect(),
            sig: (0..nh).map(hidden).collect(),
            dsig: (0..nh).map(hidden).collect(),
            mask: (0..nh).map(|l| vec![1.0; sizes[l + 1]]).collect(),
            delta: (0..nh).map(hidden).collect(),
            g: (0..=nh).map(|l| vec![0.0; sizes[l]]).collect(),
            gbar: (0..=nh).map(|l| vec![0.0; sizes[l]]).collect(),
            abar: (0..nh).map(hidden).collect(),
            hbar: vec![0.0; sizes[nh]],
        }
    }

    fn no_dropout(&mut self) {
        for m in &mut self.mask {
            m.iter_mut().for_each(|v| *v = 1.0);
        }
    }

    fn draw_dropout<R: Rng>(&mut self, rate: f64, rng: &mut R) {
        if rate == 0.0 {
            self.no_dropout();
            return;
        }
        let keep = 1.0 / (1.0 - rate);
        for m in &mut self.mask {
            for v in m.iter_mut() {
                *v = if rng.random::<f64>() < rate { 0.0 } else { keep };
            }
        }
    }

    /// Forward pass; returns `φ`.
    fn forward(&mut self, sizes: &[usize], params: &[f64], t: f64, x: &[f64]) -> f64 {
        let nh = sizes.len() - 2;
        self.h[0][0] = t;
        self.h[0][1..].copy_from_slice(x);
        for l in 0..nh {
            let (nin, nout) = (sizes[l], sizes[l + 1]);
            let w = &params[self.offsets[l]..self.offsets[l] + nin * nout];
            let b = &params[self.offsets[l] + nin * nout..self.offsets[l] + nin * nout + nout];
            let (lo, hi) = self.h.split_at_mut(l + 1);
            let input = &lo[l];
            let out = &mut hi[0];
            for j in 0..nout {
                let row = &w[j * nin..(j + 1) * nin];
                let a = b[j] + row.iter().zip(input).map(|(p, q)| p * q).sum::<f64>();
                let s = logistic(a);
                self.sig[l][j] = s;
                self.dsig[l][j] = s * (1.0 - s);
                out[j] = self.mask[l][j] * softplus(a);
            }
        }
        let nin = sizes[nh];
        let off = self.offsets[nh];
        params[off + nin] + params[off..off + nin].iter().zip(&self.h[nh]).map(|(p, q)| p * q).sum::<f64>()
    }

    /// Backward pass after `forward`; leaves `∂φ/∂[t, x]` in `g[0]`.
    fn input_gradient(&mut self, sizes: &[usize], params: &[f64]) {
        let nh = sizes.len() - 2;
        let off = self.offsets[nh];
        self.g[nh].copy_from_slice(&params[off..off + sizes[nh]]);
        for l in (0..nh).rev() {
            let (nin, nout) = (sizes[l], sizes[l + 1]);
            let w = &params[self.offsets[l]..self.offsets[l] + nin * nout];
            for j in 0..nout {
                self.delta[l][j] = self.g[l + 1][j] * self.mask[l][j] * self.sig[l][j];
            }
            let (lo, hi) = self.g.split_at_mut(l + 1);
            let _ = hi;
            let gin = &mut lo[l];
            gin.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..nout {
                let d = self.delta[l][j];
                if d != 0.0 {
                    for (gi, wi) in gin.iter_mut().zip(&w[j * nin..(j + 1) * nin]) {
                        *gi += wi * d;
                    }
                }
            }
        }
    }

    /// Accumulates `∂(u · ∂φ/∂[t, x])/∂θ` into `grad`. Requires `forward`
    /// and `input_gradient` for the same sample.
    fn adjoint(&mut self, sizes: &[usize], params: &[f64], u: &[f64], grad: &mut [f64]) {
        let nh = sizes.len() - 2;
        self.gbar[0].copy_from_slice(u);
        // Reverse of the backward pass, walking up the layers.
        for l in 0..nh {
            let (nin, nout) = (sizes[l], sizes[l + 1]);
            let off = self.offsets[l];
            let w = &params[off..off + nin * nout];
            let (lo, hi) = self.gbar.split_at_mut(l + 1);
            let gb_in = &lo[l];
            let gb_out = &mut hi[0];
            for j in 0..nout {
                let row = &w[j * nin..(j + 1) * nin];
                let dbar = row.iter().zip(gb_in).map(|(p, q)| p * q).sum::<f64>();
                let d = self.delta[l][j];
                if d != 0.0 {
                    for (gw, gi) in grad[off + j * nin..off + (j + 1) * nin].iter_mut().zip(gb_in) {
                        *gw += d * gi;
                    }
                }
                let ms = self.mask[l][j];
                gb_out[j] = dbar * ms * self.sig[l][j];
                self.abar[l][j] = dbar * self.g[l + 1][j] * ms * self.dsig[l][j];
            }
        }
        let off = self.offsets[nh];
        for (gw, gb) in grad[off..off + sizes[nh]].iter_mut().zip(&self.gbar[nh]) {
            *gw += gb;
        }
        // Reverse of the forward pass, walking down.
        self.hbar.iter_mut().for_each(|v| *v = 0.0);
        for l in (0..nh).rev() {
            let (nin, nout) = (sizes[l], sizes[l + 1]);
            let off = self.offsets[l];
            for j in 0..nout {
                self.abar[l][j] += self.hbar[j] * self.mask[l][j] * self.sig[l][j];
            }
            let w = &params[off..off + nin * nout];
            let input = &self.h[l];
            for j in 0..nout {
                let ab = self.abar[l][j];
                if ab != 0.0 {
                    for (gw, hi) in grad[off + j * nin..off + (j + 1) * nin].iter_mut().zip(input) {
                        *gw += ab * hi;
                    }
                    grad[off + nin * nout + j] += ab;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; nin];
                for j in 0..nout {
                    let ab = self.abar[l][j];
                    if ab != 0.0 {
                        for (ni, wi) in next.iter_mut().zip(&w[j * nin..(j + 1) * nin]) {
                            *ni += wi * ab;
                        }
                    }
                }
                self.hbar = next;
            }
        }
    }

    /// Accumulates `∂φ/∂θ` into `grad` after `forward`.
    fn potential_param_grad(&mut self, sizes: &[usize], params: &[f64], grad: &mut [f64]) {
        let nh = sizes.len() - 2;
        let off = self.offsets[nh];
        let nin = sizes[nh];
        for i in 0..nin {
            grad[off + i] += self.h[nh][i];
        }
        grad[off + nin] += 1.0;
        let mut hbar: Vec<f64> = params[off..off + nin].to_vec();
        for l in (0..nh).rev() {
            let (nin, nout) = (sizes[l], sizes[l + 1]);
            let off = self.offsets[l];
            let abar: Vec<f64> = (0..nout).map(|j| hbar[j] * self.mask[l][j] * self.sig[l][j]).collect();
            for j in 0..nout {
                for i in 0..nin {
                    grad[off + j * nin + i] += abar[j] * self.h[l][i];
                }
                grad[off + nin * nout + j] += abar[j];
            }
            let w = &params[off..off + nin * nout];
            hbar = (0..nin).map(|i| (0..nout).map(|j| w[j * nin + i] * abar[j]).sum()).collect();
        }
    }
}

/// `φ(x, t)`. Dropout is active only when `dropout_seed` is given.
pub fn potential_eval(net: &PotentialNet, x: &[f64], t_norm: f64, dropout_seed: Option<u64>) -> Result<f64> {
    net.check_input(x, t_norm)?;
    let mut w = Work::new(&net.layer_sizes);
    if let Some(s) = dropout_seed {
        w.draw_dropout(net.dropout_rate, &mut seed::rng(s));
    }
    Ok(w.forward(&net.layer_sizes, &net.params, t_norm, x))
}

/// `∂φ/∂θ` at one input without dropout, in the layout of `net.params`.
pub fn potential_param_gradient(net: &PotentialNet, x: &[f64], t_norm: f64) -> Result<Vec<f64>> {
    net.check_input(x, t_norm)?;
    let mut w = Work::new(&net.layer_sizes);
    w.forward(&net.layer_sizes, &net.params, t_norm, x);
    let mut grad = vec![0.0; net.n_params()];
    w.potential_param_grad(&net.layer_sizes, &net.params, &mut grad);
    Ok(grad)
}

/// `∇ₓφ(x, t)`, exact, without dropout.
pub fn drift_eval(net: &PotentialNet, x: &[f64], t_norm: f64) -> Result<Vec<f64>> {
    net.check_input(x, t_norm)?;
    let mut w = Work::new(&net.layer_sizes);
    w.forward(&net.layer_sizes, &net.params, t_norm, x);
    w.input_gradient(&net.layer_sizes, &net.params);
    Ok(w.g[0][1..].to_vec())
}

/// `x + ∇ₓφ(x, t) + noise`.
pub fn step(net: &PotentialNet, x: &[f64], t_norm: f64, noise: Option<&[f64]>) -> Result<Vec<f64>> {
    let drift = drift_eval(net, x, t_norm)?;
    let mut out: Vec<f64> = x.iter().zip(&drift).map(|(a, b)| a + b).collect();
    if let Some(eta) = noise {
        if eta.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: eta.len(),
            });
        }
        for (o, e) in out.iter_mut().zip(eta) {
            *o += e;
        }
    }
    Ok(out)
}

/// One observed transition `x → y` starting at normalized time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Consecutive points of each trajectory.
pub fn training_pairs(trajs: &[LatentTrajectory]) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for tr in trajs {
        for i in 1..tr.len() {
            out.push(TrainingPair {
                t: tr.times[i - 1],
                x: tr.coords[i - 1].clone(),
                y: tr.coords[i].clone(),
            });
        }
    }
    out
}

/// Per-sample loss `‖x' - y‖ + C₀ max(0, ‖x'‖ - r)⁴` and its gradient with
/// respect to `x'`. The norm's subgradient at zero is taken as zero.
fn sample_loss(xp: &[f64], y: &[f64], c0: f64, r: f64, dl: &mut [f64]) -> f64 {
    let mut e2 = 0.0;
    for (a, b) in xp.iter().zip(y) {
        e2 += (a - b) * (a - b);
    }
    let e = sqrt(e2);
    for ((d, a), b) in dl.iter_mut().zip(xp).zip(y) {
        *d = if e > 0.0 { (a - b) / e } else { 0.0 };
    }
    if c0 == 0.0 {
        return e;
    }
    let n = norm(xp);
    let excess = n - r;
    if excess > 0.0 {
        let scale = 4.0 * c0 * excess * excess * excess / n;
        for (d, a) in dl.iter_mut().zip(xp) {
            *d += scale * a;
        }
        e + c0 * pow(excess, 4.0)
    } else {
        e
    }
}

/// Mean loss over `batch` without dropout.
pub fn loss(net: &PotentialNet, batch: &[TrainingPair]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("loss of an empty batch".into()));
    }
    let mut w = Work::new(&net.layer_sizes);
    let mut dl = vec![0.0; net.dim()];
    let mut total = 0.0;
    for p in batch {
        net.check_input(&p.x, p.t)?;
        if p.y.len() != net.dim() {
            return Err(Error::DimensionMismatch {
                expected: net.dim(),
                got: p.y.len(),
            });
        }
        w.forward(&net.layer_sizes, &net.params, p.t, &p.x);
        w.input_gradient(&net.layer_sizes, &net.params);
        let xp: Vec<f64> = p.x.iter().zip(&w.g[0][1..]).map(|(a, b)| a + b).collect();
        total += sample_loss(&xp, &p.y, net.confinement_c0, net.radius_r, &mut dl);
    }
    Ok(total / batch.len() as f64)
}

fn batch_loss_grad<R: Rng>(
    net: &PotentialNet,
    batch: &[&TrainingPair],
    work: &mut Work,
    grad: &mut [f64],
    mut dropout: Option<&mut R>,
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let d = net.dim();
    let mut u = vec![0.0; d + 1];
    let mut xp = vec![0.0; d];
    let mut total = 0.0;
    for p in batch {
        match dropout.as_deref_mut() {
            Some(rng) => work.draw_dropout(net.dropout_rate, rng),
            None => work.no_dropout(),
        }
        work.forward(&net.layer_sizes, &net.params, p.t, &p.x);
        work.input_gradient(&net.layer_sizes, &net.params);
        for i in 0..d {
            xp[i] = p.x[i] + work.g[0][i + 1];
        }
        total += sample_loss(&xp, &p.y, net.confinement_c0, net.radius_r, &mut u[1..]);
        work.adjoint(&net.layer_sizes, &net.params, &u, grad);
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    total * scale
}

/// Mean loss over `batch` and its exact gradient with respect to
/// `net.params`, without dropout.
pub fn loss_and_gradient(net: &PotentialNet, batch: &[TrainingPair]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("loss of an empty batch".into()));
    }
    for p in batch {
        net.check_input(&p.x, p.t)?;
    }
    let refs: Vec<&TrainingPair> = batch.iter().collect();
    let mut work = Work::new(&net.layer_sizes);
    let mut grad = vec![0.0; net.n_params()];
    let l = batch_loss_grad::<rand_chacha::ChaCha8Rng>(net, &refs, &mut work, &mut grad, None);
    Ok((l, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub num_epochs: usize,
    pub patience: usize,
    pub train_fraction: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub confinement_factor: f64,
    pub sigma_initial: f64,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            num_epochs: 400,
            patience: 20,
            train_fraction: 0.8,
            learning_rate: 0.009,
            weight_decay: 0.026,
            dropout: 0.035,
            confinement_factor: 0.004,
            sigma_initial: 0.34,
            hidden_dims: vec![128, 128, 128, 128],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.num_epochs == 0 {
            return Err(Error::InvalidInput("batch size and epochs must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidInput("train fraction must be in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidInput("dropout must be in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) || !(self.confinement_factor >= 0.0) {
            return Err(Error::InvalidInput("learning rate must be positive, decay and C0 non-negative".into()));
        }
        if !(self.sigma_initial >= 0.0) {
            return Err(Error::InvalidInput("sigma must be non-negative".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::InvalidInput("hidden layers need at least one unit".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub train: f64,
    pub validation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub best_validation: f64,
    pub stopped_early: bool,
    pub train_persons: Vec<alloc::string::String>,
    pub validation_persons: Vec<alloc::string::String>,
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, wd: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::B1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::B2, self.t as f64);
        for i in 0..params.len() {
            params[i] *= 1.0 - lr * wd;
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / (sqrt(self.v[i] / c2) + Self::EPS);
        }
    }
}

/// Splits trajectories 80/20 (or per `train_fraction`) by seed, sets
/// `r` from the training points, then runs AdamW on mini-batches of
/// consecutive-point pairs with early stopping on the validation loss.
/// Returns the weights of the best validation epoch.
pub fn train(
    trajs: &[LatentTrajectory],
    cfg: &TrainConfig,
    binning: &TimeBinning,
) -> Result<(PotentialNet, TrainHistory)> {
    cfg.validate()?;
    binning.validate()?;
    let usable: Vec<&LatentTrajectory> = trajs.iter().filter(|t| t.len() >= 2).collect();
    if usable.len() < 2 {
        return Err(Error::InvalidInput("training needs two trajectories with two points each".into()));
    }
    for t in &usable {
        t.validate()?;
    }
    let dim = usable[0].dim();
    if dim == 0 || usable.iter().any(|t| t.dim() != dim || t.coords.iter().any(|c| c.len() != dim)) {
        return Err(Error::InvalidInput("trajectories must share a positive dimension".into()));
    }

    let mut order: Vec<usize> = (0..usable.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(cfg.seed, 0)));
    let n_train = (libm::round(cfg.train_fraction * usable.len() as f64) as usize).clamp(1, usable.len() - 1);
    let (train_idx, val_idx) = order.split_at(n_train);
    let train_trajs: Vec<LatentTrajectory> = train_idx.iter().map(|&i| usable[i].clone()).collect();
    let val_trajs: Vec<LatentTrajectory> = val_idx.iter().map(|&i| usable[i].clone()).collect();
    let train_set = training_pairs(&train_trajs);
    let val_set = training_pairs(&val_trajs);

    let max_norm = train_trajs
        .iter()
        .flat_map(|t| t.coords.iter())
        .map(|c| norm(c))
        .fold(0.0, f64::max);
    let mut net = PotentialNet::init(dim, &cfg.hidden_dims, binning.clone(), seed::derive(cfg.seed, 1));
    net.dropout_rate = cfg.dropout;
    net.sigma = cfg.sigma_initial;
    net.confinement_c0 = cfg.confinement_factor;
    net.radius_r = if max_norm > 0.0 { 1.1 * max_norm } else { 1.0 };

    let mut opt = AdamW {
        m: vec![0.0; net.n_params()],
        v: vec![0.0; net.n_params()],
        t: 0,
    };
    let mut work = Work::new(&net.layer_sizes);
    let mut grad = vec![0.0; net.n_params()];
    let mut best = net.clone();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        best_validation: f64::INFINITY,
        stopped_early: false,
        train_persons: train_trajs.iter().map(|t| t.person_id.clone()).collect(),
        validation_persons: val_trajs.iter().map(|t| t.person_id.clone()).collect(),
    };
    let mut since_best = 0;
    let mut refs: Vec<&TrainingPair> = train_set.iter().collect();
    for epoch in 0..cfg.num_epochs {
        let mut rng = seed::rng(seed::derive(cfg.seed, 2 + epoch as u64));
        refs.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in refs.chunks(cfg.batch_size) {
            let l = batch_loss_grad(&net, chunk, &mut work, &mut grad, Some(&mut rng));
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    checkpoint: Box::new(best),
                });
            }
            opt.step(&mut net.params, &grad, cfg.learning_rate, cfg.weight_decay);
            sum += l * chunk.len() as f64;
        }
        let train_loss = sum / refs.len() as f64;
        let val_loss = loss(&net, &val_set)?;
        if !val_loss.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                checkpoint: Box::new(best),
            });
        }
        history.epochs.push(EpochLoss {
            train: train_loss,
            validation: val_loss,
        });
        if val_loss < history.best_validation {
            history.best_validation = val_loss;
            history.best_epoch = epoch;
            best = net.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Positions after each step; shorter than the horizon on escape.
    pub path: Vec<Vec<f64>>,
    pub escaped: bool,
    /// Normalized time after the last step taken.
    pub end_time: f64,
}

/// Iterates noise-free `step`s from `(x0, t0)`. Leaving the ball of
/// radius `10 r` ends the path early with `escaped` set.
pub fn predict(net: &PotentialNet, x0: &[f64], t0_norm: f64, horizon_bins: usize) -> Result<Prediction> {
    if horizon_bins == 0 {
        return Err(Error::InvalidInput("horizon must be at least one bin".into()));
    }
    let dt = net.time_step()?;
    let limit = 10.0 * net.radius_r;
    let mut x = x0.to_vec();
    let mut t = t0_norm;
    let mut path = Vec::with_capacity(horizon_bins);
    let mut escaped = false;
    let mut w = Work::new(&net.layer_sizes);
    net.check_input(x0, t0_norm)?;
    for _ in 0..horizon_bins {
        w.forward(&net.layer_sizes, &net.params, t, &x);
        w.input_gradient(&net.layer_sizes, &net.params);
        for (xi, g) in x.iter_mut().zip(&w.g[0][1..]) {
            *xi += g;
        }
        if !(norm(&x) <= limit) {
            escaped = true;
            break;
        }
        t += dt;
        path.push(x.clone());
    }
    Ok(Prediction {
        path,
        escaped,
        end_time: t,
    })
}

/// Sample mean and unbiased variance of `φ` over `n_samples` dropout
/// passes. Pass `i` uses sub-seed `seed::derive(seed, i)`.
pub fn mc_uncertainty(net: &PotentialNet, x: &[f64], t_norm: f64, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(Error::InvalidInput("MC dropout needs at least two samples".into()));
    }
    net.check_input(x, t_norm)?;
    if net.dropout_rate == 0.0 {
        return Ok((potential_eval(net, x, t_norm, None)?, 0.0));
    }
    let mut w = Work::new(&net.layer_sizes);
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        w.draw_dropout(net.dropout_rate, &mut seed::rng(seed::derive(seed, i as u64)));
        samples.push(w.forward(&net.layer_sizes, &net.params, t_norm, x));
    }
    let mean = samples.iter().sum::<f64>() / n_samples as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n_samples - 1) as f64;
    Ok((mean, var))
}

pub const DEFAULT_MC_SAMPLES: usize = 10;

/// Evenly spaced nodes on `[min, max]`; a single step means the fixed
/// value `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Axis {
        Axis { min, max, steps }
    }

    pub fn fixed(value: f64) -> Axis {
        Axis {
            min: value,
            max: value,
            steps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidInput("axis needs finite bounds and at least one node".into()));
        }
        if self.steps > 1 && !(self.max > self.min) {
            return Err(Error::InvalidInput("axis max must exceed min".into()));
        }
        Ok(())
    }

    /// Node spacing; 1 for a fixed axis.
    pub fn spacing(&self) -> f64 {
        if self.steps > 1 {
            (self.max - self.min) / (self.steps - 1) as f64
        } else {
            1.0
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.steps > 1 {
            self.min + i as f64 * self.spacing()
        } else {
            self.min
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }
}

/// Nodes of a lattice in row-major order, last axis fastest.
pub fn lattice_nodes(axes: &[Axis]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(|a| a.steps).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        out.push(axes.iter().zip(&idx).map(|(a, &i)| a.value(i)).collect());
        for k in (0..axes.len()).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].steps {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// `-kT log Σ_rest exp(-φ/kT) Δrest` over the axes not in `keep`, on the
/// lattice `axes` (one per dimension). The kept axes form the output grid,
/// row-major with `keep[0]` slow. With two dimensions this is `φ` itself.
pub fn marginalize_boltzmann_fn<F>(mut phi: F, keep: [usize; 2], axes: &[Axis], kt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = axes.len();
    if keep[0] >= d || keep[1] >= d || keep[0] == keep[1] {
        return Err(Error::InvalidInput("kept axes must be two distinct dimensions".into()));
    }
    if !(kt > 0.0) {
        return Err(Error::InvalidInput("kT must be positive".into()));
    }
    for a in axes {
        a.validate()?;
    }
    let rest: Vec<usize> = (0..d).filter(|i| !keep.contains(i)).collect();
    let rest_axes: Vec<Axis> = rest.iter().map(|&i| axes[i]).collect();
    let rest_nodes = lattice_nodes(&rest_axes);
    let log_cell: f64 = rest_axes.iter().map(|a| log(a.spacing())).sum();
    let (ka, kb) = (axes[keep[0]], axes[keep[1]]);
    let mut out = Vec::with_capacity(ka.steps * kb.steps);
    let mut x = vec![0.0; d];
    let mut terms = vec![0.0; rest_nodes.len()];
    for i in 0..ka.steps {
        for j in 0..kb.steps {
            x[keep[0]] = ka.value(i);
            x[keep[1]] = kb.value(j);
            if rest.is_empty() {
                let v = phi(&x)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite("potential on marginalization grid"));
                }
                out.push(v);
                continue;
            }
            for (term, node) in terms.iter_mut().zip(&rest_nodes) {
                for (&axis, &v) in rest.iter().zip(node) {
                    x[axis] = v;
                }
                let v = phi(&x)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite("potential on marginalization grid"));
                }
                *term = -v / kt;
            }
            let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + log(terms.iter().map(|v| exp(v - m)).sum::<f64>());
            out.push(-kt * (lse + log_cell));
        }
    }
    Ok(out)
}

/// Boltzmann marginal of the network potential at `t_norm`.
pub fn marginalize_boltzmann(
    net: &PotentialNet,
    keep: [usize; 2],
    axes: &[Axis],
    t_norm: f64,
    kt: f64,
) -> Result<Vec<f64>> {
    if axes.len() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            got: axes.len(),
        });
    }
    let mut w = Work::new(&net.layer_sizes);
    marginalize_boltzmann_fn(
        |x| {
            net.check_input(x, t_norm)?;
            Ok(w.forward(&net.layer_sizes, &net.params, t_norm, x))
        },
        keep,
        axes,
        kt,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Dropout passes per node; 0 skips the variance.
    pub n_mc: usize,
    pub seed: u64,
    /// A node is low-support when no data point lies within this multiple
    /// of the lattice's median nearest-neighbor spacing.
    pub support_factor: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            n_mc: DEFAULT_MC_SAMPLES,
            seed: 0,
            support_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftField {
    pub axes: Vec<Axis>,
    pub time: f64,
    pub nodes: Vec<Vec<f64>>,
    pub drift: Vec<Vec<f64>>,
    pub potential: Vec<f64>,
    pub mc_variance: Vec<f64>,
    pub low_support: Vec<bool>,
}

impl DriftField {
    /// Axes with more than one node.
    pub fn varying_axes(&self) -> Vec<usize> {
        (0..self.axes.len()).filter(|&i| self.axes[i].steps > 1).collect()
    }

    pub fn support_mask(&self) -> Vec<bool> {
        self.low_support.iter().map(|l| !l).collect()
    }
}

fn project(points: &[Vec<f64>], dims: &[usize]) -> Vec<Vec<f64>> {
    points.iter().map(|p| dims.iter().map(|&k| p[k]).collect()).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median distance from each point to its nearest distinct point. Points
/// are swept in order of the first coordinate so most pairs are pruned.
pub fn median_nn_spacing(points: &[Vec<f64>]) -> f64 {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let n = sorted.len();
    let mut nn = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = f64::INFINITY;
        for j in (i + 1)..n {
            let dx = sorted[j][0] - sorted[i][0];
            if dx * dx >= best {
                break;
            }
            let d = dist2(sorted[i], sorted[j]);
            if d > 0.0 && d < best {
                best = d;
            }
        }
        for j in (0..i).rev() {
            let dx = sorted[i][0] - sorted[j][0];
            if dx * dx >= best {
                break;
            }
            let d = dist2(sorted[i], sorted[j]);
            if d > 0.0 && d < best {
                best = d;
            }
        }
        if best.is_finite() {
            nn.push(sqrt(best));
        }
    }
    median(&nn)
}

/// Low-support flags for the lattice `nodes`: no point of `points` lies
/// within `factor` times the median nearest-neighbor spacing of the nodes.
/// Distances use the lattice's varying axes only, so a slice through a
/// higher-dimensional space is judged by its projection.
pub fn low_support_flags(axes: &[Axis], nodes: &[Vec<f64>], points: &[Vec<f64>], factor: f64) -> Vec<bool> {
    let dims: Vec<usize> = (0..axes.len()).filter(|&i| axes[i].steps > 1).collect();
    let pts = project(points, &dims);
    let projected = project(nodes, &dims);
    let spacing = median_nn_spacing(&projected);
    if pts.is_empty() || !spacing.is_finite() {
        return vec![true; nodes.len()];
    }
    let t2 = (factor * spacing) * (factor * spacing);
    projected.iter().map(|n| !pts.iter().any(|p| dist2(n, p) <= t2)).collect()
}

/// Drift, potential and MC variance at every lattice node.
pub fn drift_field(
    net: &PotentialNet,
    axes: &[Axis],
    t_norm: f64,
    support_points: &[Vec<f64>],
    cfg: &FieldConfig,
) -> Result<DriftField> {
    if axes.len() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            got: axes.len(),
        });
    }
    for a in axes {
        a.validate()?;
    }
    if cfg.n_mc == 1 {
        return Err(Error::InvalidInput("MC dropout needs at least two samples".into()));
    }
    let nodes = lattice_nodes(axes);
    let mut w = Work::new(&net.layer_sizes);
    let mut drift = Vec::with_capacity(nodes.len());
    let mut potential = Vec::with_capacity(nodes.len());
    let mut mc_variance = Vec::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        net.check_input(node, t_norm)?;
        w.no_dropout();
        potential.push(w.forward(&net.layer_sizes, &net.params, t_norm, node));
        w.input_gradient(&net.layer_sizes, &net.params);
        drift.push(w.g[0][1..].to_vec());
        mc_variance.push(if cfg.n_mc == 0 {
            0.0
        } else {
            mc_uncertainty(net, node, t_norm, cfg.n_mc, seed::derive(cfg.seed, i as u64))?.1
        });
    }
    let low_support = low_support_flags(axes, &nodes, support_points, cfg.support_factor);
    Ok(DriftField {
        axes: axes.to_vec(),
        time: t_norm,
        nodes,
        drift,
        potential,
        mc_variance,
        low_support,
    })
}
