//! Horizon evaluation of trajectory forecasters.
//!
//! Every forecaster sees a trajectory up to an anchor point and predicts the
//! latent position a number of bins ahead. Squared errors are pooled over
//! all anchors of all trajectories and summarized by their median, which is
//! then divided by the median of the no-movement baseline at the same
//! horizon.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::round;
use serde::{Deserialize, Serialize};

use crate::analytics::{bh_correct, mann_whitney_u};
use crate::error::{Error, Result};
use crate::ingest::{PersonMeta, Platform, StanceObservation};
use crate::landscape::{predict, PotentialNet};
use crate::latent::LatentTrajectory;
use crate::special::median;

/// Points a forecaster may see before its first forecast. The Holt
/// recursion needs three.
pub const MIN_HISTORY: usize = 3;

pub const DEFAULT_HORIZON_DAYS: [u32; 6] = [7, 30, 60, 120, 360, 720];
pub const DEFAULT_ANCHOR_STRIDE: usize = 5;

pub fn baseline_stationary(x0: &[f64], horizon_bins: usize) -> Vec<Vec<f64>> {
    vec![x0.to_vec(); horizon_bins]
}

fn grid(start: f64, step: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |k| start + step * k as f64)
}

/// `0.05, 0.15, …, 0.95`
pub fn smoothing_grid() -> impl Iterator<Item = f64> + Clone {
    grid(0.05, 0.1, 10)
}

/// `0.80, 0.81, …, 0.99`
pub fn damping_grid() -> impl Iterator<Item = f64> + Clone {
    grid(0.80, 0.01, 20)
}

/// `φ + φ² + … + φʰ`
pub fn damped_sum(phi: f64, h: usize) -> f64 {
    let mut acc = 0.0;
    let mut p = 1.0;
    for _ in 0..h {
        p *= phi;
        acc += p;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoltParams {
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
}

/// Fixed parameters, or a grid search minimizing the in-sample one-step
/// squared error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fit<P> {
    Auto,
    Fixed(P),
}

/// Final level, final trend and in-sample one-step SSE. The recursion
/// starts from `ℓ₀ = y₀`, `b₀ = y₁ − y₀`.
fn holt_run(y: &[f64], p: &HoltParams) -> (f64, f64, f64) {
    let mut level = y[0];
    let mut trend = y[1] - y[0];
    let mut sse = 0.0;
    for &v in &y[1..] {
        let fc = level + p.phi * trend;
        sse += (v - fc) * (v - fc);
        let prev = level;
        level = p.alpha * v + (1.0 - p.alpha) * fc;
        trend = p.beta * (level - prev) + (1.0 - p.beta) * p.phi * trend;
    }
    (level, trend, sse)
}

fn check_series(series: &[f64]) -> Result<()> {
    if series.len() < MIN_HISTORY {
        return Err(Error::InvalidInput("forecasting needs at least three points".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forecast input"));
    }
    Ok(())
}

pub fn holt_fit(series: &[f64]) -> Result<HoltParams> {
    check_series(series)?;
    let mut best = (f64::INFINITY, None);
    for alpha in smoothing_grid() {
        for beta in smoothing_grid() {
            for phi in damping_grid() {
                let p = HoltParams { alpha, beta, phi };
                let sse = holt_run(series, &p).2;
                if sse < best.0 {
                    best = (sse, Some(p));
                }
            }
        }
    }
    best.1.ok_or(Error::NonFinite("Holt in-sample error"))
}

/// Damped-trend Holt forecasts for steps `1..=horizon`.
pub fn holt_damped(series: &[f64], params: Fit<HoltParams>, horizon: usize) -> Result<Vec<f64>> {
    let p = match params {
        Fit::Auto => holt_fit(series)?,
        Fit::Fixed(p) => {
            check_series(series)?;
            p
        }
    };
    let (level, trend, _) = holt_run(series, &p);
    Ok((1..=horizon).map(|h| level + damped_sum(p.phi, h) * trend).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub alpha: f64,
    pub phi: f64,
}

struct ThetaParts {
    intercept: f64,
    slope: f64,
    theta_line: Vec<f64>,
}

/// OLS line over `t = 0..n` and the θ = 2 line `2y − trend`.
fn theta_parts(y: &[f64]) -> ThetaParts {
    let n = y.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in y.iter().enumerate() {
        let dt = t as f64 - tm;
        sxy += dt * (v - ym);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let theta_line = y
        .iter()
        .enumerate()
        .map(|(t, v)| 2.0 * v - (intercept + slope * t as f64))
        .collect();
    ThetaParts {
        intercept,
        slope,
        theta_line,
    }
}

/// Final SES level of the theta line and the in-sample one-step SSE of
/// the combined forecast.
fn theta_run(y: &[f64], parts: &ThetaParts, p: &ThetaParams) -> (f64, f64) {
    let z = &parts.theta_line;
    let mut level = z[0];
    let mut sse = 0.0;
    for t in 1..y.len() {
        let trend_last = parts.intercept + parts.slope * (t - 1) as f64;
        let fc = 0.5 * (level + trend_last) + 0.5 * parts.slope * p.phi;
        sse += (y[t] - fc) * (y[t] - fc);
        level = p.alpha * z[t] + (1.0 - p.alpha) * level;
    }
    (level, sse)
}

pub fn theta_fit(series: &[f64]) -> Result<ThetaParams> {
    check_series(series)?;
    let parts = theta_parts(series);
    let mut best = (f64::INFINITY, None);
    for alpha in smoothing_grid() {
        for phi in damping_grid() {
            let p = ThetaParams { alpha, phi };
            let sse = theta_run(series, &parts, &p).1;
            if sse < best.0 {
                best = (sse, Some(p));
            }
        }
    }
    best.1.ok_or(Error::NonFinite("Theta in-sample error"))
}

/// Theta(2) forecasts: the mean of the SES-smoothed theta line and the
/// fitted trend line, with the trend's advance past the last point damped
/// as in [`holt_damped`].
pub fn theta_damped(series: &[f64], params: Fit<ThetaParams>, horizon: usize) -> Result<Vec<f64>> {
    let p = match params {
        Fit::Auto => theta_fit(series)?,
        Fit::Fixed(p) => {
            check_series(series)?;
            p
        }
    };
    let parts = theta_parts(series);
    let (level, _) = theta_run(series, &parts, &p);
    let trend_last = parts.intercept + parts.slope * (series.len() - 1) as f64;
    Ok((1..=horizon)
        .map(|h| 0.5 * (level + trend_last) + 0.5 * parts.slope * damped_sum(p.phi, h))
        .collect())
}

/// A model that predicts a trajectory's future from its history.
pub trait Forecaster {
    fn name(&self) -> String;

    /// Positions `1..=max_horizon` bins after `traj.coords[anchor]`, using
    /// only points up to and including the anchor.
    fn forecast(&self, traj: &LatentTrajectory, anchor: usize, max_horizon: usize) -> Result<Vec<Vec<f64>>>;
}

pub struct Stationary;

impl Forecaster for Stationary {
    fn name(&self) -> String {
        "stationary".into()
    }

    fn forecast(&self, traj: &LatentTrajectory, anchor: usize, max_horizon: usize) -> Result<Vec<Vec<f64>>> {
        Ok(baseline_stationary(&traj.coords[anchor], max_horizon))
    }
}

/// Noise-free landscape steps. A path that escapes keeps its last
/// in-bounds position for the remaining horizons.
pub struct Landscape<'a>(pub &'a PotentialNet);

impl Forecaster for Landscape<'_> {
    fn name(&self) -> String {
        "landscape".into()
    }

    fn forecast(&self, traj: &LatentTrajectory, anchor: usize, max_horizon: usize) -> Result<Vec<Vec<f64>>> {
        let x0 = &traj.coords[anchor];
        let mut path = predict(self.0, x0, traj.times[anchor], max_horizon)?.path;
        let last = path.last().cloned().unwrap_or_else(|| x0.clone());
        path.resize(max_horizon, last);
        Ok(path)
    }
}

fn per_dimension(
    traj: &LatentTrajectory,
    anchor: usize,
    max_horizon: usize,
    f: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    let d = traj.dim();
    let mut out = vec![vec![0.0; d]; max_horizon];
    for k in 0..d {
        let series: Vec<f64> = traj.coords[..=anchor].iter().map(|c| c[k]).collect();
        for (h, v) in f(&series)?.into_iter().enumerate() {
            out[h][k] = v;
        }
    }
    Ok(out)
}

pub struct HoltDamped(pub Fit<HoltParams>);

impl Forecaster for HoltDamped {
    fn name(&self) -> String {
        "holt_damped".into()
    }

    fn forecast(&self, traj: &LatentTrajectory, anchor: usize, max_horizon: usize) -> Result<Vec<Vec<f64>>> {
        per_dimension(traj, anchor, max_horizon, |s| holt_damped(s, self.0, max_horizon))
    }
}

pub struct ThetaDamped(pub Fit<ThetaParams>);

impl Forecaster for ThetaDamped {
    fn name(&self) -> String {
        "theta_damped".into()
    }

    fn forecast(&self, traj: &LatentTrajectory, anchor: usize, max_horizon: usize) -> Result<Vec<Vec<f64>>> {
        per_dimension(traj, anchor, max_horizon, |s| theta_damped(s, self.0, max_horizon))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonConfig {
    pub horizon_days: Vec<u32>,
    pub anchor_stride: usize,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        HorizonConfig {
            horizon_days: DEFAULT_HORIZON_DAYS.to_vec(),
            anchor_stride: DEFAULT_ANCHOR_STRIDE,
        }
    }
}

/// Nearest whole number of bins, at least one.
pub fn days_to_bins(days: u32, bin_width_days: u32) -> usize {
    (round(f64::from(days) / f64::from(bin_width_days)) as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub horizon_days: Vec<u32>,
    pub horizon_bins: Vec<usize>,
    /// Model names; the first is always the stationary baseline.
    pub models: Vec<String>,
    /// `median_mse[model][horizon]`
    pub median_mse: Vec<Vec<f64>>,
    /// `ratio[model][horizon]`: median over the baseline's median.
    pub ratio: Vec<Vec<f64>>,
    pub n_anchors: Vec<usize>,
}

impl HorizonReport {
    pub fn ratio_of(&self, model: &str) -> Option<&[f64]> {
        let i = self.models.iter().position(|m| m == model)?;
        Some(&self.ratio[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Anchor {
    pub person_id: String,
    pub index: usize,
}

/// The report plus the raw errors behind it, for group breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonEvaluation {
    pub report: HorizonReport,
    /// `anchors[horizon]`
    pub anchors: Vec<Vec<Anchor>>,
    /// `errors[model][horizon][k]` belongs to `anchors[horizon][k]`.
    pub errors: Vec<Vec<Vec<f64>>>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Evaluates the stationary baseline followed by `models` on every
/// trajectory, at anchors `MIN_HISTORY - 1, +stride, …` that leave room
/// for the horizon. Trajectories are visited in person order so the result
/// does not depend on input order.
pub fn horizon_eval(
    models: &[&dyn Forecaster],
    trajs: &[LatentTrajectory],
    bin_width_days: u32,
    cfg: &HorizonConfig,
) -> Result<HorizonEvaluation> {
    if cfg.anchor_stride == 0 || bin_width_days == 0 {
        return Err(Error::InvalidInput("anchor stride and bin width must be positive".into()));
    }
    if cfg.horizon_days.is_empty() {
        return Err(Error::InvalidInput("no horizons requested".into()));
    }
    let bins: Vec<usize> = cfg.horizon_days.iter().map(|d| days_to_bins(*d, bin_width_days)).collect();
    let max_bins = *bins.iter().max().expect("non-empty");
    let mut all: Vec<&dyn Forecaster> = vec![&Stationary];
    all.extend_from_slice(models);

    let mut order: Vec<&LatentTrajectory> = trajs.iter().collect();
    order.sort_by(|a, b| a.person_id.cmp(&b.person_id));

    let mut anchors = vec![Vec::new(); bins.len()];
    let mut errors = vec![vec![Vec::new(); bins.len()]; all.len()];
    for traj in order {
        let n = traj.len();
        let mut a = MIN_HISTORY - 1;
        while a + 1 < n {
            let reach = (n - 1 - a).min(max_bins);
            let admitted: Vec<usize> = (0..bins.len()).filter(|&h| bins[h] <= reach).collect();
            if admitted.is_empty() {
                break;
            }
            let horizon = admitted.iter().map(|&h| bins[h]).max().expect("non-empty");
            for (m, model) in all.iter().enumerate() {
                let path = model.forecast(traj, a, horizon)?;
                for &h in &admitted {
                    errors[m][h].push(squared_distance(&path[bins[h] - 1], &traj.coords[a + bins[h]]));
                }
            }
            for &h in &admitted {
                anchors[h].push(Anchor {
                    person_id: traj.person_id.clone(),
                    index: a,
                });
            }
            a += cfg.anchor_stride;
        }
    }
    if let Some(h) = (0..bins.len()).find(|&h| anchors[h].is_empty()) {
        return Err(Error::HorizonTooLong(bins[h]));
    }

    let median_mse: Vec<Vec<f64>> = errors
        .iter()
        .map(|per_h| per_h.iter().map(|e| median(e)).collect())
        .collect();
    if median_mse[0].iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Degenerate("baseline median error is zero"));
    }
    let ratio = median_mse
        .iter()
        .map(|row| row.iter().zip(&median_mse[0]).map(|(m, base)| m / base).collect())
        .collect();
    Ok(HorizonEvaluation {
        report: HorizonReport {
            horizon_days: cfg.horizon_days.clone(),
            horizon_bins: bins,
            models: all.iter().map(|m| m.name()).collect(),
            median_mse,
            ratio,
            n_anchors: anchors.iter().map(Vec::len).collect(),
        },
        anchors,
        errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    FigureType,
    Party,
    Platform,
}

/// Group of every person (or account stream) under `grouping`. Party
/// groups leave out people without a party; a stream's platform is the one
/// it posts on most, ties going to the earlier platform.
pub fn group_keys(
    meta: &BTreeMap<String, PersonMeta>,
    obs: &[StanceObservation],
    grouping: Grouping,
    by_account: bool,
) -> BTreeMap<String, String> {
    match grouping {
        Grouping::FigureType => meta
            .iter()
            .map(|(p, m)| (p.clone(), String::from(m.figure_type.as_str())))
            .collect(),
        Grouping::Party => meta
            .iter()
            .filter_map(|(p, m)| Some((p.clone(), m.party.clone()?)))
            .collect(),
        Grouping::Platform => {
            let mut counts: BTreeMap<&str, BTreeMap<Platform, usize>> = BTreeMap::new();
            for o in obs {
                if let Some(pl) = o.platform {
                    *counts.entry(o.stream_id(by_account)).or_default().entry(pl).or_default() += 1;
                }
            }
            counts
                .into_iter()
                .map(|(s, c)| {
                    let best = c
                        .iter()
                        .fold((None, 0), |acc, (p, n)| if *n > acc.1 { (Some(*p), *n) } else { acc })
                        .0
                        .expect("at least one platform");
                    (String::from(s), String::from(best.as_str()))
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub model: String,
    pub horizon_days: u32,
    pub n_people: usize,
    pub n_anchors: usize,
    /// Group median error of the model over the group median of the
    /// baseline.
    pub ratio: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBreakdown {
    pub rows: Vec<GroupRow>,
    /// Groups left out for having fewer than two people.
    pub skipped: Vec<String>,
}

/// Per group, model and horizon: the model's errors against the baseline's
/// on the same anchors by Mann-Whitney U, BH-adjusted across groups within
/// each model and horizon.
pub fn group_breakdown(
    eval: &HorizonEvaluation,
    group_of: &BTreeMap<String, String>,
    alpha: f64,
) -> Result<GroupBreakdown> {
    let mut people: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for a in eval.anchors.iter().flatten() {
        if let Some(g) = group_of.get(&a.person_id) {
            let members = people.entry(g.as_str()).or_default();
            if !members.contains(&a.person_id.as_str()) {
                members.push(a.person_id.as_str());
            }
        }
    }
    let skipped: Vec<String> = people
        .iter()
        .filter(|(_, m)| m.len() < 2)
        .map(|(g, _)| String::from(*g))
        .collect();
    let groups: Vec<&str> = people.iter().filter(|(_, m)| m.len() >= 2).map(|(g, _)| *g).collect();

    let mut rows = Vec::new();
    for m in 1..eval.report.models.len() {
        for h in 0..eval.report.horizon_bins.len() {
            let mut block: Vec<GroupRow> = Vec::new();
            for g in &groups {
                let ks: Vec<usize> = (0..eval.anchors[h].len())
                    .filter(|&k| group_of.get(&eval.anchors[h][k].person_id).map(String::as_str) == Some(*g))
                    .collect();
                if ks.is_empty() {
                    continue;
                }
                let model_err: Vec<f64> = ks.iter().map(|&k| eval.errors[m][h][k]).collect();
                let base_err: Vec<f64> = ks.iter().map(|&k| eval.errors[0][h][k]).collect();
                let base = median(&base_err);
                block.push(GroupRow {
                    group: String::from(*g),
                    model: eval.report.models[m].clone(),
                    horizon_days: eval.report.horizon_days[h],
                    n_people: people[g].len(),
                    n_anchors: ks.len(),
                    ratio: if base > 0.0 { median(&model_err) / base } else { f64::NAN },
                    p_value: mann_whitney_u(&model_err, &base_err)?.p_value,
                    p_adjusted: 1.0,
                    reject: false,
                });
            }
            let adjusted = bh_correct(&block.iter().map(|r| r.p_value).collect::<Vec<_>>(), alpha)?;
            for (r, a) in block.iter_mut().zip(adjusted) {
                r.p_adjusted = a.p_adjusted;
                r.reject = a.reject;
            }
            rows.extend(block);
        }
    }
    Ok(GroupBreakdown { rows, skipped })
}

/// Boxed forecasters for the standard comparison: landscape (when given),
/// Holt-damped and Theta with auto-fitted parameters.
pub fn standard_models(net: Option<&PotentialNet>) -> Vec<Box<dyn Forecaster + '_>> {
    let mut v: Vec<Box<dyn Forecaster + '_>> = Vec::new();
    if let Some(n) = net {
        v.push(Box::new(Landscape(n)));
    }
    v.push(Box::new(HoltDamped(Fit::Auto)));
    v.push(Box::new(ThetaDamped(Fit::Auto)));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_hit_their_endpoints() {
        let s: Vec<f64> = smoothing_grid().collect();
        assert_eq!(s.len(), 10);
        assert!((s[9] - 0.95).abs() < 1e-12);
        let d: Vec<f64> = damping_grid().collect();
        assert_eq!(d.len(), 20);
        assert!((d[19] - 0.99).abs() < 1e-12);
    }

    #[test]
    fn days_round_to_bins() {
        assert_eq!(days_to_bins(7, 2), 4);
        assert_eq!(days_to_bins(30, 2), 15);
        assert_eq!(days_to_bins(1, 2), 1);
        assert_eq!(days_to_bins(720, 2), 360);
    }

    #[test]
    fn damped_sum_matches_closed_form() {
        let phi: f64 = 0.9;
        let closed = phi * (1.0 - phi.powi(5)) / (1.0 - phi);
        assert!((damped_sum(phi, 5) - closed).abs() < 1e-14);
        assert_eq!(damped_sum(1.0, 7), 7.0);
    }
}
