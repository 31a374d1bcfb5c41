//! Bayesian kernel ridge regression of discrete labels over time with a
//! Gaussian RBF kernel. The ridge strength is chosen per series by
//! closed-form leave-one-out cross-validation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, fabs, pow};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{StanceObservation, TimeBinning};
use crate::latent::RegressedSeries;

/// 7.5 months at 30.44 days per month.
pub const DEFAULT_LENGTHSCALE_DAYS: f64 = 228.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfKernelParams {
    pub lengthscale_days: f64,
    pub signal_scale: f64,
}

impl Default for RbfKernelParams {
    fn default() -> Self {
        RbfKernelParams {
            lengthscale_days: DEFAULT_LENGTHSCALE_DAYS,
            signal_scale: 1.0,
        }
    }
}

impl RbfKernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale_days > 0.0) || !self.lengthscale_days.is_finite() {
            return Err(Error::InvalidInput("RBF lengthscale must be positive".into()));
        }
        if !self.signal_scale.is_finite() {
            return Err(Error::InvalidInput("RBF signal scale must be finite".into()));
        }
        Ok(())
    }
}

/// `s² exp(-(t1 - t2)² / (2 ℓ²))`.
pub fn rbf_kernel(t1: f64, t2: f64, params: &RbfKernelParams) -> f64 {
    let d = (t1 - t2) / params.lengthscale_days;
    params.signal_scale * params.signal_scale * exp(-0.5 * d * d)
}

/// 13 log-spaced ridge strengths from 1e-3 to 1e3.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..13).map(|i| pow(10.0, -3.0 + 0.5 * i as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub train_times: Vec<f64>,
    pub train_labels: Vec<f64>,
    pub alpha: f64,
    pub dual_coefficients: Vec<f64>,
    pub prior_mean: f64,
    pub params: RbfKernelParams,
    /// Leave-one-out residual sum of squares at the chosen `alpha`.
    pub loo_rss: f64,
}

fn gram(times: &[f64], params: &RbfKernelParams) -> DMatrix<f64> {
    let n = times.len();
    DMatrix::from_fn(n, n, |i, j| rbf_kernel(times[i], times[j], params))
}

/// Relative slack under which two LOO scores count as tied; ties go to the
/// smaller alpha so the choice does not depend on the order of the points.
const LOO_TIE: f64 = 1e-9;

/// Fits `(K + αI) c = y - prior_mean` with `α` minimizing the closed-form
/// leave-one-out residual sum of squares over `alpha_grid`.
pub fn bkrr_fit(
    times: &[f64],
    labels: &[f64],
    params: &RbfKernelParams,
    alpha_grid: &[f64],
) -> Result<RegressionFit> {
    params.validate()?;
    if times.is_empty() {
        return Err(Error::InvalidInput("regression needs at least one point".into()));
    }
    if times.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: labels.len(),
        });
    }
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidInput("alpha grid must be non-empty and positive".into()));
    }
    if times.iter().chain(labels).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input"));
    }
    let prior_mean = 0.0;
    let n = times.len();
    let y = DVector::from_iterator(n, labels.iter().map(|l| l - prior_mean));
    let k = gram(times, params);

    // One eigendecomposition serves every alpha:
    // (K + aI)^-1 = Q diag(1 / (lambda + a)) Q^T.
    let eig = SymmetricEigen::new(k.clone());
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let q = &eig.eigenvectors;
    let qty = q.transpose() * &y;

    let mut best: Option<(f64, f64)> = None;
    for &alpha in alpha_grid {
        let mut rss = 0.0;
        for i in 0..n {
            let mut c_i = 0.0;
            let mut ginv_ii = 0.0;
            for (m, lambda) in lambdas.iter().enumerate() {
                let w = 1.0 / (lambda + alpha);
                c_i += q[(i, m)] * w * qty[m];
                ginv_ii += q[(i, m)] * q[(i, m)] * w;
            }
            let r = c_i / ginv_ii;
            rss += r * r;
        }
        best = match best {
            None => Some((alpha, rss)),
            Some((a, s)) => {
                let tied = fabs(rss - s) <= LOO_TIE * s.max(f64::MIN_POSITIVE);
                if (rss < s && !tied) || (tied && alpha < a) {
                    Some((alpha, rss))
                } else {
                    Some((a, s))
                }
            }
        };
    }
    let (alpha, loo_rss) = best.expect("alpha grid is non-empty");

    let mut system = k;
    for i in 0..n {
        system[(i, i)] += alpha;
    }
    let chol = Cholesky::new(system).ok_or_else(|| {
        let hi = lambdas.iter().cloned().fold(0.0, f64::max);
        let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
        Error::Singular {
            condition: (hi + alpha) / (lo + alpha),
        }
    })?;
    let c = chol.solve(&y);
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }

    Ok(RegressionFit {
        train_times: times.to_vec(),
        train_labels: labels.to_vec(),
        alpha,
        dual_coefficients: c.iter().copied().collect(),
        prior_mean,
        params: *params,
        loo_rss,
    })
}

/// Posterior mean and variance at each query time.
pub fn bkrr_predict(fit: &RegressionFit, query_times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = fit.train_times.len();
    let mut system = gram(&fit.train_times, &fit.params);
    for i in 0..n {
        system[(i, i)] += fit.alpha;
    }
    let chol = Cholesky::new(system).ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let kss = fit.params.signal_scale * fit.params.signal_scale;
    let mut out = Vec::with_capacity(query_times.len());
    for &t in query_times {
        let ks = DVector::from_iterator(n, fit.train_times.iter().map(|&s| rbf_kernel(t, s, &fit.params)));
        let mean = fit.prior_mean
            + ks.iter()
                .zip(&fit.dual_coefficients)
                .map(|(k, c)| k * c)
                .sum::<f64>();
        let v = chol.l().solve_lower_triangular(&ks).ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
        let var = (kss - v.dot(&v)).max(0.0);
        out.push((mean, var));
    }
    Ok(out)
}

/// Fits every (stream, target) pair on days since the epoch and evaluates
/// it at the bin centers from the pair's first to its last observed bin.
/// Output is sorted by stream, then target.
pub fn regress_observations(
    obs: &[StanceObservation],
    binning: &TimeBinning,
    params: &RbfKernelParams,
    alpha_grid: &[f64],
    by_account: bool,
) -> Result<Vec<RegressedSeries>> {
    binning.validate()?;
    let mut pairs: BTreeMap<(&str, &str), (Vec<f64>, Vec<f64>, i64, i64)> = BTreeMap::new();
    for o in obs {
        let bin = binning.bin_index(o.timestamp)?;
        let e = pairs
            .entry((o.stream_id(by_account), o.target_id.as_str()))
            .or_insert_with(|| (Vec::new(), Vec::new(), bin, bin));
        e.0.push(binning.days_since_epoch(o.timestamp));
        e.1.push(o.label.as_f64());
        e.2 = e.2.min(bin);
        e.3 = e.3.max(bin);
    }
    let mut out = Vec::with_capacity(pairs.len());
    for ((person, target), (times, labels, first, last)) in pairs {
        let fit = bkrr_fit(&times, &labels, params, alpha_grid)?;
        let bins: Vec<i64> = (first..=last).collect();
        let query: Vec<f64> = bins.iter().map(|&b| binning.bin_center_days(b)).collect();
        let (means, variances) = bkrr_predict(&fit, &query)?.into_iter().unzip();
        out.push(RegressedSeries {
            person_id: String::from(person),
            target_id: String::from(target),
            bins,
            means,
            variances,
        });
    }
    Ok(out)
}
