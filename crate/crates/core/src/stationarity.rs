//! Is the latent system stationary? Rolling-window drift, the augmented
//! Dickey-Fuller and KPSS tests per trajectory and dimension, and Fisher's
//! method to pool the per-trajectory p-values.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{floor, log, pow, sqrt};
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytics::cohens_d;
use crate::error::{Error, Result};
use crate::latent::LatentTrajectory;
use crate::special::{chi2_sf_even, mean, normal_cdf, sample_variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub n_windows: usize,
    pub window_counts: Vec<usize>,
    /// Cohen's d of the last window against the first, per dimension.
    pub mean_drift: Vec<f64>,
    /// `(var_last - var_first) / var_first`, per dimension.
    pub variance_drift: Vec<f64>,
}

impl DriftReport {
    /// The per-dimension mean drift with the largest magnitude.
    pub fn max_mean_drift(&self) -> f64 {
        self.mean_drift
            .iter()
            .cloned()
            .fold(0.0, |acc, d| if d.abs() > acc.abs() { d } else { acc })
    }
}

pub const DEFAULT_WINDOWS: usize = 6;

/// Pools every trajectory point into `n_windows` equal spans of the
/// observed time range and compares the last window with the first.
pub fn rolling_drift(trajs: &[LatentTrajectory], n_windows: usize) -> Result<DriftReport> {
    if n_windows < 2 {
        return Err(Error::InvalidInput("rolling drift needs at least two windows".into()));
    }
    let dim = trajs.iter().find(|t| !t.is_empty()).map(|t| t.dim()).unwrap_or(0);
    if dim == 0 {
        return Err(Error::InvalidInput("no trajectory points".into()));
    }
    let times = trajs.iter().flat_map(|t| t.times.iter().cloned());
    let (lo, hi) = times.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)));
    let width = (hi - lo) / n_windows as f64;
    let mut windows: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); dim]; n_windows];
    for tr in trajs {
        if tr.dim() != dim && !tr.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: tr.dim(),
            });
        }
        for (t, x) in tr.times.iter().zip(&tr.coords) {
            let w = if width > 0.0 {
                (floor((t - lo) / width) as usize).min(n_windows - 1)
            } else {
                0
            };
            for (k, v) in x.iter().enumerate() {
                windows[w][k].push(*v);
            }
        }
    }
    let window_counts: Vec<usize> = windows.iter().map(|w| w[0].len()).collect();
    for (i, c) in window_counts.iter().enumerate() {
        if *c < 2 {
            return Err(Error::EmptyWindow(i));
        }
    }
    let (first, last) = (&windows[0], &windows[n_windows - 1]);
    let mut mean_drift = Vec::with_capacity(dim);
    let mut variance_drift = Vec::with_capacity(dim);
    for k in 0..dim {
        mean_drift.push(match cohens_d(&last[k], &first[k]) {
            Ok(d) => d,
            Err(_) if mean(&last[k]) == mean(&first[k]) => 0.0,
            Err(e) => return Err(e),
        });
        let (v0, v1) = (sample_variance(&first[k]), sample_variance(&last[k]));
        variance_drift.push(if v0 > 0.0 {
            (v1 - v0) / v0
        } else if v1 == 0.0 {
            0.0
        } else {
            return Err(Error::Degenerate("first window has zero variance"));
        });
    }
    Ok(DriftReport {
        n_windows,
        window_counts,
        mean_drift,
        variance_drift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfRegression {
    Constant,
    ConstantTrend,
}

impl AdfRegression {
    fn n_trend(self) -> usize {
        match self {
            AdfRegression::Constant => 1,
            AdfRegression::ConstantTrend => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lag_used: usize,
    pub n_obs: usize,
}

/// Schwert's rule, `⌊12 (n/100)^¼⌋`.
pub fn default_adf_max_lag(n: usize) -> usize {
    floor(12.0 * pow(n as f64 / 100.0, 0.25)) as usize
}

// MacKinnon (1994) approximate asymptotic p-value surfaces for one
// variable, as distributed with statsmodels (`adfvalues.py`). The large-p
// coefficients carry statsmodels' scaling [1, 1e-1, 1e-1, 1e-2].
struct Tau {
    max: f64,
    min: f64,
    star: f64,
    small: [f64; 3],
    large: [f64; 4],
}

const TAU_C: Tau = Tau {
    max: 2.74,
    min: -18.83,
    star: -1.61,
    small: [2.1659, 1.4412, 0.038269],
    large: [1.7339, 0.93202, -0.12745, -0.010368],
};

const TAU_CT: Tau = Tau {
    max: 0.7,
    min: -16.18,
    star: -2.89,
    small: [3.2512, 1.6047, 0.049588],
    large: [2.5261, 0.61654, -0.37956, -0.060285],
};

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Approximate p-value of a Dickey-Fuller statistic.
pub fn mackinnon_p(statistic: f64, regression: AdfRegression) -> f64 {
    let tau = match regression {
        AdfRegression::Constant => &TAU_C,
        AdfRegression::ConstantTrend => &TAU_CT,
    };
    if statistic > tau.max {
        1.0
    } else if statistic < tau.min {
        0.0
    } else if statistic <= tau.star {
        normal_cdf(poly(&tau.small, statistic))
    } else {
        normal_cdf(poly(&tau.large, statistic))
    }
}

/// Rows of the Dickey-Fuller regression with `lags` lagged differences:
/// `Δy_t` against `y_{t-1}` and `Δy_{t-1}, ..., Δy_{t-lags}`, for `t` from
/// `skip` on. Returns `(target, [level, lagged diffs...])`.
fn df_rows(x: &[f64], lags: usize, skip: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let diff: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mut target = Vec::new();
    let mut rows = Vec::new();
    for t in skip..diff.len() {
        target.push(diff[t]);
        let mut row = Vec::with_capacity(lags + 1);
        row.push(x[t]);
        for j in 1..=lags {
            row.push(diff[t - j]);
        }
        rows.push(row);
    }
    (target, rows)
}

/// Augmented Dickey-Fuller test. With `max_lag = None` the lag is chosen
/// by AIC over `0..=⌊12 (n/100)^¼⌋` on a common sample, then the
/// regression is refitted on all rows the chosen lag allows.
pub fn adf_test(series: &[f64], regression: AdfRegression, max_lag: Option<usize>) -> Result<AdfResult> {
    let n = series.len();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ADF series"));
    }
    let ntrend = regression.n_trend();
    let limit = (n / 2).saturating_sub(ntrend + 1);
    let max_lag = match max_lag {
        Some(m) => m,
        None => default_adf_max_lag(n).min(limit),
    };
    if n < 10 + max_lag || max_lag > limit {
        return Err(Error::InvalidInput(alloc::format!(
            "ADF needs at least 10 + max_lag points and max_lag <= n/2 - {}",
            ntrend + 1
        )));
    }
    if series.iter().all(|v| *v == series[0]) {
        return Err(Error::Degenerate("constant series"));
    }

    let lag = select_lag(series, regression, max_lag)?;
    let (target, rows) = df_rows(series, lag, lag);
    let nobs = target.len();
    let k = lag + 1 + ntrend;
    if nobs <= k {
        return Err(Error::InvalidInput("too few observations for the ADF regression".into()));
    }
    let design = DMatrix::from_fn(nobs, k, |r, c| {
        if c <= lag {
            rows[r][c]
        } else if c == lag + 1 {
            1.0
        } else {
            (r + 1) as f64
        }
    });
    let y = DVector::from_vec(target);
    let qr = design.clone().qr();
    let rmat = qr.r();
    let qty = qr.q().transpose() * &y;
    let beta = rmat
        .solve_upper_triangular(&qty)
        .ok_or(Error::Degenerate("ADF regression is rank deficient"))?;
    let resid = &y - &design * &beta;
    let ssr = resid.dot(&resid);
    let s2 = ssr / (nobs - k) as f64;
    let rinv = rmat
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::Degenerate("ADF regression is rank deficient"))?;
    let var0: f64 = (0..k).map(|j| rinv[(0, j)] * rinv[(0, j)]).sum::<f64>() * s2;
    let statistic = beta[0] / sqrt(var0);
    if !statistic.is_finite() {
        return Err(Error::Degenerate("ADF statistic is not finite"));
    }
    Ok(AdfResult {
        statistic,
        p_value: mackinnon_p(statistic, regression),
        lag_used: lag,
        n_obs: nobs,
    })
}

/// AIC search on the rows usable at `max_lag`. Columns are ordered
/// deterministic terms, level, lagged differences, so each candidate uses a
/// leading block of one cross-product matrix.
fn select_lag(x: &[f64], regression: AdfRegression, max_lag: usize) -> Result<usize> {
    if max_lag == 0 {
        return Ok(0);
    }
    let ntrend = regression.n_trend();
    let (target, rows) = df_rows(x, max_lag, max_lag);
    let nobs = target.len();
    let k = ntrend + 1 + max_lag;
    let mut g = DMatrix::<f64>::zeros(k, k);
    let mut b = DVector::<f64>::zeros(k);
    let mut yy = 0.0;
    let mut col = vec![0.0; k];
    for (r, (y, row)) in target.iter().zip(&rows).enumerate() {
        col[0] = 1.0;
        if ntrend == 2 {
            // Rescaled trend: the fitted SSR is unchanged.
            col[1] = (r + 1) as f64 / nobs as f64;
        }
        col[ntrend..].copy_from_slice(row);
        for i in 0..k {
            b[i] += col[i] * y;
            for j in 0..=i {
                g[(i, j)] += col[i] * col[j];
            }
        }
        yy += y * y;
    }
    for i in 0..k {
        for j in 0..i {
            g[(j, i)] = g[(i, j)];
        }
    }
    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=max_lag {
        let m = ntrend + 1 + lag;
        let chol = Cholesky::new(g.view((0, 0), (m, m)).into_owned())
            .ok_or(Error::Degenerate("ADF regression is rank deficient"))?;
        let bm = b.rows(0, m).into_owned();
        let beta = chol.solve(&bm);
        let ssr = (yy - beta.dot(&bm)).max(f64::MIN_POSITIVE);
        let aic = nobs as f64 * log(ssr / nobs as f64) + 2.0 * m as f64;
        if best.is_none_or(|(a, _)| aic < a) {
            best = Some((aic, lag));
        }
    }
    Ok(best.expect("at least one candidate lag").1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpssRegression {
    Level,
    Trend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpssResult {
    pub statistic: f64,
    /// Interpolated from the critical-value table, clamped to [0.01, 0.10].
    pub p_value: f64,
    pub lags: usize,
}

/// `⌊4 (n/100)^¼⌋`.
pub fn default_kpss_lags(n: usize) -> usize {
    floor(4.0 * pow(n as f64 / 100.0, 0.25)) as usize
}

// Kwiatkowski et al. (1992), Table 1, at p = 0.10, 0.05, 0.025, 0.01.
const KPSS_P: [f64; 4] = [0.10, 0.05, 0.025, 0.01];
const KPSS_LEVEL: [f64; 4] = [0.347, 0.463, 0.574, 0.739];
const KPSS_TREND: [f64; 4] = [0.119, 0.146, 0.176, 0.216];

fn interp(x: f64, xs: &[f64; 4], ys: &[f64; 4]) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[3] {
        return ys[3];
    }
    let i = (0..3).find(|&i| x < xs[i + 1]).unwrap_or(2);
    ys[i] + (x - xs[i]) * (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
}

/// KPSS test with a Bartlett-kernel long-run variance.
pub fn kpss_test(series: &[f64], regression: KpssRegression, lags: Option<usize>) -> Result<KpssResult> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InvalidInput("KPSS needs at least 10 points".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KPSS series"));
    }
    let lags = lags.unwrap_or_else(|| default_kpss_lags(n));
    if lags >= n {
        return Err(Error::InvalidInput("KPSS lag must be below the series length".into()));
    }
    let resid: Vec<f64> = match regression {
        KpssRegression::Level => {
            let m = mean(series);
            series.iter().map(|v| v - m).collect()
        }
        KpssRegression::Trend => {
            let ts: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let (tm, ym) = (mean(&ts), mean(series));
            let sxy: f64 = ts.iter().zip(series).map(|(t, y)| (t - tm) * (y - ym)).sum();
            let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
            let slope = sxy / sxx;
            let icept = ym - slope * tm;
            ts.iter().zip(series).map(|(t, y)| y - icept - slope * t).collect()
        }
    };
    let mut cum = 0.0;
    let mut eta = 0.0;
    for e in &resid {
        cum += e;
        eta += cum * cum;
    }
    eta /= (n * n) as f64;
    let mut s = resid.iter().map(|e| e * e).sum::<f64>();
    for i in 1..=lags {
        let prod: f64 = resid[i..].iter().zip(&resid[..n - i]).map(|(a, b)| a * b).sum();
        s += 2.0 * prod * (1.0 - i as f64 / (lags + 1) as f64);
    }
    s /= n as f64;
    if !(s > 0.0) {
        return Err(Error::Degenerate("zero long-run variance"));
    }
    let statistic = eta / s;
    let crit = match regression {
        KpssRegression::Level => &KPSS_LEVEL,
        KpssRegression::Trend => &KPSS_TREND,
    };
    Ok(KpssResult {
        statistic,
        p_value: interp(statistic, crit, &KPSS_P),
        lags,
    })
}

/// Fisher's method: `X² = -2 Σ ln pᵢ` against chi-square with `2k`
/// degrees of freedom.
pub fn fisher_combine(p_values: &[f64]) -> Result<(f64, f64)> {
    if p_values.is_empty() {
        return Err(Error::InvalidInput("no p-values to combine".into()));
    }
    if p_values.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::InvalidInput("p-values must lie in (0, 1]".into()));
    }
    let stat = -2.0 * p_values.iter().map(|p| log(*p)).sum::<f64>();
    Ok((stat, chi2_sf_even(stat, p_values.len())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityConfig {
    pub adf_regression: AdfRegression,
    pub kpss_regression: KpssRegression,
    pub n_windows: usize,
    pub alpha: f64,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        StationarityConfig {
            adf_regression: AdfRegression::ConstantTrend,
            kpss_regression: KpssRegression::Trend,
            n_windows: DEFAULT_WINDOWS,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedTest {
    pub statistic: f64,
    pub p_value: f64,
    /// Trajectories that contributed a p-value.
    pub n_series: usize,
    /// Trajectories too short or constant for the test.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionVerdict {
    pub dimension: usize,
    pub adf: CombinedTest,
    pub kpss: CombinedTest,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub config: StationarityConfig,
    pub dimensions: Vec<DimensionVerdict>,
    pub drift: DriftReport,
    /// One of `stationary`, `trend-stationary`, `unit-root`, `inconclusive`.
    pub verdict: String,
}

/// Reads the pair of combined tests at level `alpha`. ADF rejecting a unit
/// root while KPSS keeps stationarity is `stationary`; both rejecting is
/// read as `trend-stationary`; only KPSS rejecting is `unit-root`.
pub fn verdict(adf_p: f64, kpss_p: f64, alpha: f64) -> &'static str {
    match (adf_p < alpha, kpss_p < alpha) {
        (true, false) => "stationary",
        (true, true) => "trend-stationary",
        (false, true) => "unit-root",
        (false, false) => "inconclusive",
    }
}

fn combine(ps: &[f64], skipped: usize) -> Result<CombinedTest> {
    if ps.is_empty() {
        return Ok(CombinedTest {
            statistic: 0.0,
            p_value: 1.0,
            n_series: 0,
            skipped,
        });
    }
    // A p of exactly 0 (statistic beyond the table) is floored so the
    // logarithm stays finite.
    let clamped: Vec<f64> = ps.iter().map(|p| p.max(1e-300)).collect();
    let (statistic, p_value) = fisher_combine(&clamped)?;
    Ok(CombinedTest {
        statistic,
        p_value,
        n_series: ps.len(),
        skipped,
    })
}

/// Per-trajectory ADF and KPSS on every dimension, pooled with Fisher's
/// method, plus the rolling drift. Run this on trajectories before any
/// smoothing.
pub fn stationarity_report(trajs: &[LatentTrajectory], cfg: &StationarityConfig) -> Result<StationarityReport> {
    let drift = rolling_drift(trajs, cfg.n_windows)?;
    let dim = drift.mean_drift.len();
    let mut dimensions = Vec::with_capacity(dim);
    for k in 0..dim {
        let (mut adf_p, mut kpss_p) = (Vec::new(), Vec::new());
        let (mut adf_skip, mut kpss_skip) = (0, 0);
        for tr in trajs {
            let series: Vec<f64> = tr.coords.iter().map(|c| c[k]).collect();
            match adf_test(&series, cfg.adf_regression, None) {
                Ok(r) => adf_p.push(r.p_value),
                Err(Error::InvalidInput(_)) | Err(Error::Degenerate(_)) => adf_skip += 1,
                Err(e) => return Err(e),
            }
            match kpss_test(&series, cfg.kpss_regression, None) {
                Ok(r) => kpss_p.push(r.p_value),
                Err(Error::InvalidInput(_)) | Err(Error::Degenerate(_)) => kpss_skip += 1,
                Err(e) => return Err(e),
            }
        }
        let adf = combine(&adf_p, adf_skip)?;
        let kpss = combine(&kpss_p, kpss_skip)?;
        let v = if adf.n_series == 0 || kpss.n_series == 0 {
            "inconclusive"
        } else {
            verdict(adf.p_value, kpss.p_value, cfg.alpha)
        };
        dimensions.push(DimensionVerdict {
            dimension: k,
            adf,
            kpss,
            verdict: v.into(),
        });
    }
    let overall = match dimensions.first() {
        Some(first) if dimensions.iter().all(|d| d.verdict == first.verdict) => first.verdict.clone(),
        _ => "inconclusive".into(),
    };
    Ok(StationarityReport {
        config: cfg.clone(),
        dimensions,
        drift,
        verdict: overall,
    })
}
