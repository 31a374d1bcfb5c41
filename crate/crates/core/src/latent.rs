//! From regressed series to latent trajectories: pivot into a sparse wide
//! matrix, fill series edges, then impute and reduce in one step with
//! probabilistic PCA fitted by EM under missing data.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, log, sqrt};
use nalgebra::{Cholesky, DMatrix, DVector, SVD};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeBinning;
use crate::seed;

/// A regressed stance series for one (person, target) on whole bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressedSeries {
    pub person_id: String,
    pub target_id: String,
    pub bins: Vec<i64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub person_id: String,
    pub bin: i64,
}

/// Rows are (person, bin) sorted by person then bin; columns are targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceMatrix {
    pub row_keys: Vec<RowKey>,
    pub col_keys: Vec<String>,
    /// Row-major; missing cells hold 0.
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl StanceMatrix {
    /// A fully observed matrix with generated keys, mostly for tests and
    /// synthetic studies.
    pub fn from_dense(n_rows: usize, n_cols: usize, values: Vec<f64>) -> StanceMatrix {
        assert_eq!(values.len(), n_rows * n_cols);
        StanceMatrix {
            row_keys: (0..n_rows)
                .map(|i| RowKey {
                    person_id: String::from("row"),
                    bin: i as i64,
                })
                .collect(),
            col_keys: (0..n_cols).map(|j| alloc::format!("c{j}")).collect(),
            values,
            missing: vec![false; n_rows * n_cols],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.row_keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_keys.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.n_cols() + col;
        (!self.missing[i]).then(|| self.values[i])
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = row * self.n_cols() + col;
        self.values[i] = value;
        self.missing[i] = false;
    }

    pub fn mask(&mut self, row: usize, col: usize) {
        let i = row * self.n_cols() + col;
        self.values[i] = 0.0;
        self.missing[i] = true;
    }

    pub fn observed_count(&self) -> usize {
        self.missing.iter().filter(|m| !**m).count()
    }

    /// `1 - observed / total`.
    pub fn missing_fraction(&self) -> f64 {
        if self.missing.is_empty() {
            return 0.0;
        }
        1.0 - self.observed_count() as f64 / self.missing.len() as f64
    }

    fn validate(&self) -> Result<()> {
        let total = self.n_rows() * self.n_cols();
        if self.values.len() != total || self.missing.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: self.values.len().min(self.missing.len()),
            });
        }
        Ok(())
    }

    /// Contiguous row ranges belonging to each person, in row order.
    pub fn person_blocks(&self) -> Vec<(String, core::ops::Range<usize>)> {
        let mut out: Vec<(String, core::ops::Range<usize>)> = Vec::new();
        for (i, key) in self.row_keys.iter().enumerate() {
            match out.last_mut() {
                Some((p, r)) if *p == key.person_id => r.end = i + 1,
                _ => out.push((key.person_id.clone(), i..i + 1)),
            }
        }
        out
    }

    fn observed_by_row(&self) -> Vec<Vec<usize>> {
        let p = self.n_cols();
        (0..self.n_rows())
            .map(|i| (0..p).filter(|&j| !self.missing[i * p + j]).collect())
            .collect()
    }
}

/// One row per (person, bin) over each person's full bin range, one column
/// per target (sorted). Cells without a regressed value are missing.
pub fn pivot(series: &[RegressedSeries]) -> Result<StanceMatrix> {
    let mut targets: Vec<String> = series.iter().map(|s| s.target_id.clone()).collect();
    targets.sort();
    targets.dedup();
    let col_of: BTreeMap<&str, usize> = targets.iter().enumerate().map(|(j, t)| (t.as_str(), j)).collect();

    let mut ranges: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
    for s in series {
        if s.bins.len() != s.means.len() {
            return Err(Error::DimensionMismatch {
                expected: s.bins.len(),
                got: s.means.len(),
            });
        }
        for &b in &s.bins {
            let r = ranges.entry(s.person_id.as_str()).or_insert((b, b));
            r.0 = r.0.min(b);
            r.1 = r.1.max(b);
        }
    }
    let mut row_keys = Vec::new();
    let mut row_start: BTreeMap<&str, (usize, i64)> = BTreeMap::new();
    for (person, (lo, hi)) in &ranges {
        row_start.insert(person, (row_keys.len(), *lo));
        for bin in *lo..=*hi {
            row_keys.push(RowKey {
                person_id: String::from(*person),
                bin,
            });
        }
    }
    let p = targets.len();
    let n = row_keys.len();
    let mut m = StanceMatrix {
        row_keys,
        col_keys: targets.clone(),
        values: vec![0.0; n * p],
        missing: vec![true; n * p],
    };
    for s in series {
        let j = col_of[s.target_id.as_str()];
        let (start, lo) = row_start[s.person_id.as_str()];
        for (&bin, &value) in s.bins.iter().zip(&s.means) {
            let i = start + (bin - lo) as usize;
            if !m.missing[i * p + j] {
                return Err(Error::DuplicateCell {
                    person: s.person_id.clone(),
                    bin,
                    target: s.target_id.clone(),
                });
            }
            m.set(i, j, value);
        }
    }
    Ok(m)
}

/// Extends every (person, target) series to the person's first and last
/// rows with its first and last observed value. Interior gaps stay missing.
pub fn edge_fill(m: &StanceMatrix) -> StanceMatrix {
    let mut out = m.clone();
    let p = m.n_cols();
    for (_, rows) in m.person_blocks() {
        for j in 0..p {
            let observed: Vec<usize> = rows.clone().filter(|&i| !m.missing[i * p + j]).collect();
            let (Some(&first), Some(&last)) = (observed.first(), observed.last()) else {
                continue;
            };
            let first_value = m.values[first * p + j];
            let last_value = m.values[last * p + j];
            for i in rows.start..first {
                out.set(i, j, first_value);
            }
            for i in last + 1..rows.end {
                out.set(i, j, last_value);
            }
        }
    }
    out
}

/// MAP priors of the PPCA fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpcaPriors {
    /// Variance of the zero-mean Gaussian prior on each column mean.
    pub mean_prior_variance: f64,
    /// Precision of the zero-mean Gaussian prior on each loading entry.
    pub transform_precision: f64,
    /// Inverse-gamma shape on the noise variance.
    pub noise_alpha: f64,
    /// Inverse-gamma scale on the noise variance.
    pub noise_beta: f64,
}

impl Default for PpcaPriors {
    fn default() -> Self {
        PpcaPriors {
            mean_prior_variance: 3.0,
            transform_precision: 500.0,
            noise_alpha: 4.0,
            noise_beta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcaConfig {
    pub n_components: usize,
    /// `None` fits by maximum likelihood.
    pub priors: Option<PpcaPriors>,
    /// Relative change of the penalized log-likelihood that ends EM.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for PpcaConfig {
    fn default() -> Self {
        PpcaConfig {
            n_components: 3,
            priors: Some(PpcaPriors::default()),
            tolerance: 1e-5,
            max_iters: 500,
        }
    }
}

/// Lower bound on the noise variance. Exactly low-rank data drives EM
/// towards zero noise; the fit then continues with the variance held here.
pub const NOISE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcaModel {
    pub columns: Vec<String>,
    pub n_components: usize,
    /// `columns × n_components`, row-major.
    pub loadings: Vec<f64>,
    pub means: Vec<f64>,
    pub noise_variance: f64,
    pub priors: Option<PpcaPriors>,
    pub converged: bool,
    /// The noise variance reached [`NOISE_FLOOR`] and was held there.
    pub noise_floor_hit: bool,
    pub iterations: usize,
    /// Penalized log-likelihood at the start of every EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

impl PpcaModel {
    pub fn loading(&self, col: usize, comp: usize) -> f64 {
        self.loadings[col * self.n_components + comp]
    }

    /// Loadings of one component across columns.
    pub fn component(&self, comp: usize) -> Vec<f64> {
        (0..self.columns.len()).map(|j| self.loading(j, comp)).collect()
    }

    /// Posterior mean of the latent given the observed cells of one row.
    /// Rows without observations get the prior mean 0.
    pub fn posterior_mean(&self, row: &[f64], observed: &[usize]) -> Vec<f64> {
        let k = self.n_components;
        if observed.is_empty() {
            return vec![0.0; k];
        }
        let post = row_posterior(self, row, observed);
        post.mean
    }
}

struct RowPosterior {
    mean: Vec<f64>,
    /// Posterior covariance `M^-1`, k × k row-major.
    cov: Vec<f64>,
    /// `ln det M`.
    log_det_m: f64,
    /// `b^T E[z]` with `b = W_O^T r / σ²`.
    quad: f64,
    /// `r^T r` of the centered observed cells.
    rr: f64,
}

fn row_posterior(model: &PpcaModel, row: &[f64], observed: &[usize]) -> RowPosterior {
    let k = model.n_components;
    let s2 = model.noise_variance;
    let mut m = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::<f64>::zeros(k);
    let mut rr = 0.0;
    for &j in observed {
        let r = row[j] - model.means[j];
        rr += r * r;
        let w = &model.loadings[j * k..(j + 1) * k];
        for a in 0..k {
            b[a] += w[a] * r / s2;
            for c in 0..k {
                m[(a, c)] += w[a] * w[c] / s2;
            }
        }
    }
    let chol = Cholesky::new(m).expect("I + W^T W / s2 is positive definite");
    let log_det_m = 2.0 * chol.l().diagonal().iter().map(|d| log(*d)).sum::<f64>();
    let mean = chol.solve(&b);
    let cov = chol.inverse();
    RowPosterior {
        quad: b.dot(&mean),
        mean: mean.iter().copied().collect(),
        cov: cov.iter().copied().collect::<Vec<_>>(),
        log_det_m,
        rr,
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn log_prior(priors: &Option<PpcaPriors>, loadings: &[f64], means: &[f64], s2: f64) -> f64 {
    match priors {
        None => 0.0,
        Some(p) => {
            -0.5 * p.transform_precision * loadings.iter().map(|w| w * w).sum::<f64>()
                - means.iter().map(|m| m * m).sum::<f64>() / (2.0 * p.mean_prior_variance)
                - (p.noise_alpha + 1.0) * log(s2)
                - p.noise_beta / s2
        }
    }
}

fn orthonormalize(g: &mut [Vec<f64>]) {
    let p = g.first().map_or(0, Vec::len);
    for c in 0..g.len() {
        for prev in 0..c {
            let proj: f64 = (0..p).map(|j| g[c][j] * g[prev][j]).sum();
            for j in 0..p {
                g[c][j] -= proj * g[prev][j];
            }
        }
        let n = sqrt(g[c].iter().map(|v| v * v).sum());
        if n > 1e-12 {
            g[c].iter_mut().for_each(|v| *v /= n);
        } else {
            g[c].iter_mut().for_each(|v| *v = 0.0);
            g[c][c % p] = 1.0;
        }
    }
}

/// Starting point: observed column means and a subspace iteration on the
/// mean-filled centered matrix from a seeded random basis.
fn initialize(m: &StanceMatrix, k: usize, seed: u64) -> (Vec<f64>, Vec<f64>, f64) {
    let (n, p) = (m.n_rows(), m.n_cols());
    let mut means = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for i in 0..n {
        for j in 0..p {
            if let Some(v) = m.get(i, j) {
                means[j] += v;
                counts[j] += 1;
            }
        }
    }
    for j in 0..p {
        means[j] /= counts[j].max(1) as f64;
    }
    let centered: Vec<f64> = (0..n * p)
        .map(|idx| if m.missing[idx] { 0.0 } else { m.values[idx] - means[idx % p] })
        .collect();

    let mut rng = seed::rng(seed);
    let mut basis: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    orthonormalize(&mut basis);
    let mut scores = vec![vec![0.0; n]; k];
    for _ in 0..20 {
        for c in 0..k {
            for i in 0..n {
                scores[c][i] = (0..p).map(|j| centered[i * p + j] * basis[c][j]).sum();
            }
            for j in 0..p {
                basis[c][j] = (0..n).map(|i| centered[i * p + j] * scores[c][i]).sum();
            }
        }
        orthonormalize(&mut basis);
    }
    let observed_fraction = (m.observed_count() as f64 / (n * p).max(1) as f64).max(1e-12);
    let mut loadings = vec![0.0; p * k];
    for c in 0..k {
        for i in 0..n {
            scores[c][i] = (0..p).map(|j| centered[i * p + j] * basis[c][j]).sum();
        }
        let var = scores[c].iter().map(|s| s * s).sum::<f64>() / (n as f64 * observed_fraction);
        let scale = sqrt(var.max(1e-12));
        for j in 0..p {
            loadings[j * k + c] = basis[c][j] * scale;
        }
    }
    // Residual of the rank-k reconstruction on observed cells.
    let mut ss = 0.0;
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..p {
            if m.missing[i * p + j] {
                continue;
            }
            let x = centered[i * p + j];
            let recon: f64 = (0..k).map(|c| scores[c][i] * basis[c][j]).sum();
            ss += (x - recon) * (x - recon);
            total += x * x;
            count += 1;
        }
    }
    let count = count.max(1) as f64;
    let s2 = (ss / count).max(1e-4 * total / count).max(1e-9);
    (means, loadings, s2)
}

/// EM for PPCA with missing values under the configured MAP priors.
///
/// The E-step computes the posterior of each row's latent from its observed
/// cells; the M-step updates loadings and means jointly per column, then the
/// noise variance. Both M-step updates are conditional maximizations, so the
/// penalized log-likelihood never decreases.
pub fn ppca_fit(m: &StanceMatrix, cfg: &PpcaConfig, seed: u64) -> Result<PpcaModel> {
    m.validate()?;
    let (n, p, k) = (m.n_rows(), m.n_cols(), cfg.n_components);
    if k == 0 || k > p {
        return Err(Error::InvalidInput(alloc::format!(
            "n_components must be in 1..={p}, got {k}"
        )));
    }
    let observed = m.observed_by_row();
    let mut col_counts = vec![0usize; p];
    for row in &observed {
        for &j in row {
            col_counts[j] += 1;
        }
    }
    if let Some(j) = col_counts.iter().position(|c| *c == 0) {
        return Err(Error::InvalidInput(alloc::format!(
            "column {} has no observed entries",
            m.col_keys[j]
        )));
    }
    let n_obs: usize = col_counts.iter().sum();

    let (means, loadings, s2) = initialize(m, k, seed);
    let mut model = PpcaModel {
        columns: m.col_keys.clone(),
        n_components: k,
        loadings,
        means,
        noise_variance: s2,
        priors: cfg.priors,
        converged: false,
        noise_floor_hit: false,
        iterations: 0,
        log_likelihood_trace: Vec::new(),
    };

    let kk = k + 1;
    let mut ez = vec![0.0; n * k];
    let mut ezz = vec![0.0; n * k * k];
    for iter in 0..cfg.max_iters {
        // E-step, and the observed-data log-likelihood of the current model.
        let s2 = model.noise_variance;
        let mut loglik = 0.0;
        let mut acc_a = vec![0.0; p * kk * kk];
        let mut acc_b = vec![0.0; p * kk];
        for i in 0..n {
            let obs = &observed[i];
            if obs.is_empty() {
                ez[i * k..(i + 1) * k].fill(0.0);
                let zz = &mut ezz[i * k * k..(i + 1) * k * k];
                zz.fill(0.0);
                for a in 0..k {
                    zz[a * k + a] = 1.0;
                }
                continue;
            }
            let row = &m.values[i * p..(i + 1) * p];
            let post = row_posterior(&model, row, obs);
            let n_o = obs.len() as f64;
            loglik -= 0.5 * (n_o * LN_2PI + post.log_det_m + n_o * log(s2) + post.rr / s2 - post.quad);
            ez[i * k..(i + 1) * k].copy_from_slice(&post.mean);
            let zz = &mut ezz[i * k * k..(i + 1) * k * k];
            for a in 0..k {
                for c in 0..k {
                    zz[a * k + c] = post.cov[a * k + c] + post.mean[a] * post.mean[c];
                }
            }
            for &j in obs {
                let a_j = &mut acc_a[j * kk * kk..(j + 1) * kk * kk];
                for a in 0..k {
                    for c in 0..k {
                        a_j[a * kk + c] += zz[a * k + c];
                    }
                    a_j[a * kk + k] += post.mean[a];
                    a_j[k * kk + a] += post.mean[a];
                }
                a_j[k * kk + k] += 1.0;
                let b_j = &mut acc_b[j * kk..(j + 1) * kk];
                for a in 0..k {
                    b_j[a] += row[j] * post.mean[a];
                }
                b_j[k] += row[j];
            }
        }
        let penalized = loglik + log_prior(&model.priors, &model.loadings, &model.means, s2);
        if !penalized.is_finite() {
            return Err(Error::NonFinite("PPCA log-likelihood"));
        }
        let previous = model.log_likelihood_trace.last().copied();
        model.log_likelihood_trace.push(penalized);
        model.iterations = iter;
        if let Some(prev) = previous {
            if fabs(penalized - prev) <= cfg.tolerance * fabs(prev) {
                model.converged = true;
                return Ok(model);
            }
        }

        // M-step for (w_j, mu_j) at fixed noise variance.
        for j in 0..p {
            let mut a = DMatrix::from_row_slice(kk, kk, &acc_a[j * kk * kk..(j + 1) * kk * kk]);
            let b = DVector::from_column_slice(&acc_b[j * kk..(j + 1) * kk]);
            match &model.priors {
                Some(pr) => {
                    for c in 0..k {
                        a[(c, c)] += s2 * pr.transform_precision;
                    }
                    a[(k, k)] += s2 / pr.mean_prior_variance;
                }
                None => {
                    let jitter = 1e-12 * (a.trace() / kk as f64).max(1e-300);
                    for c in 0..kk {
                        a[(c, c)] += jitter;
                    }
                }
            }
            if let Some(chol) = Cholesky::new(a) {
                let sol = chol.solve(&b);
                for c in 0..k {
                    model.loadings[j * k + c] = sol[c];
                }
                model.means[j] = sol[k];
            }
        }

        // Noise variance at the new loadings and means.
        let mut ss = 0.0;
        for i in 0..n {
            let z = &ez[i * k..(i + 1) * k];
            let zz = &ezz[i * k * k..(i + 1) * k * k];
            for &j in &observed[i] {
                let w = &model.loadings[j * k..(j + 1) * k];
                let r = m.values[i * p + j] - model.means[j];
                let wz: f64 = (0..k).map(|a| w[a] * z[a]).sum();
                let mut wzzw = 0.0;
                for a in 0..k {
                    for c in 0..k {
                        wzzw += w[a] * zz[a * k + c] * w[c];
                    }
                }
                ss += r * r - 2.0 * r * wz + wzzw;
            }
        }
        let ss = ss.max(0.0);
        model.noise_variance = match &model.priors {
            Some(pr) => (0.5 * ss + pr.noise_beta) / (0.5 * n_obs as f64 + pr.noise_alpha + 1.0),
            None => ss / n_obs as f64,
        };
        if !model.noise_variance.is_finite() {
            return Err(Error::NonFinite("PPCA noise variance"));
        }
        if model.noise_variance < NOISE_FLOOR {
            model.noise_variance = NOISE_FLOOR;
            model.noise_floor_hit = true;
        }
        model.iterations = iter + 1;
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpcaTransform {
    /// Posterior mean latent per row.
    pub latents: Vec<Vec<f64>>,
    /// Input with every missing cell replaced by `mu + W z`.
    pub imputed: StanceMatrix,
    /// Rows without any observed cell; their latent is the prior mean.
    pub empty_rows: usize,
}

pub fn ppca_transform(model: &PpcaModel, m: &StanceMatrix) -> Result<PpcaTransform> {
    m.validate()?;
    if m.col_keys != model.columns {
        return Err(Error::InvalidInput("matrix columns differ from the model's".into()));
    }
    let (p, k) = (m.n_cols(), model.n_components);
    let observed = m.observed_by_row();
    let mut imputed = m.clone();
    let mut latents = Vec::with_capacity(m.n_rows());
    let mut empty_rows = 0;
    for (i, obs) in observed.iter().enumerate() {
        if obs.is_empty() {
            empty_rows += 1;
        }
        let z = model.posterior_mean(&m.values[i * p..(i + 1) * p], obs);
        for j in 0..p {
            if m.missing[i * p + j] {
                let w = &model.loadings[j * k..(j + 1) * k];
                let v = model.means[j] + (0..k).map(|a| w[a] * z[a]).sum::<f64>();
                imputed.set(i, j, v);
            }
        }
        latents.push(z);
    }
    Ok(PpcaTransform {
        latents,
        imputed,
        empty_rows,
    })
}

/// Iterative soft-thresholded SVD completion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvdImputeConfig {
    pub rank: usize,
    /// Soft threshold as a fraction of the largest singular value of the
    /// initial zero-filled centered matrix.
    pub shrinkage: f64,
    pub iterations: usize,
}

impl Default for SvdImputeConfig {
    fn default() -> Self {
        SvdImputeConfig {
            rank: 3,
            shrinkage: 0.1,
            iterations: 100,
        }
    }
}

fn column_means(m: &StanceMatrix) -> Vec<f64> {
    let (n, p) = (m.n_rows(), m.n_cols());
    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for i in 0..n {
        for j in 0..p {
            if let Some(v) = m.get(i, j) {
                sums[j] += v;
                counts[j] += 1;
            }
        }
    }
    sums.iter().zip(&counts).map(|(s, c)| if *c == 0 { 0.0 } else { s / *c as f64 }).collect()
}

/// Completed matrix (row-major) from soft-impute.
pub fn svd_impute(m: &StanceMatrix, cfg: &SvdImputeConfig) -> Result<Vec<f64>> {
    m.validate()?;
    let (n, p) = (m.n_rows(), m.n_cols());
    let rank = cfg.rank.min(n).min(p);
    let means = column_means(m);
    let centered = DMatrix::from_fn(n, p, |i, j| m.get(i, j).map_or(0.0, |v| v - means[j]));
    let mut estimate = DMatrix::<f64>::zeros(n, p);
    let mut threshold = None;
    for _ in 0..cfg.iterations {
        let filled = DMatrix::from_fn(n, p, |i, j| {
            if m.missing[i * p + j] {
                estimate[(i, j)]
            } else {
                centered[(i, j)]
            }
        });
        let svd = SVD::new(filled, true, true);
        let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let lambda = *threshold.get_or_insert(cfg.shrinkage * svd.singular_values[order[0]]);
        estimate.fill(0.0);
        for &c in order.iter().take(rank) {
            let s = (svd.singular_values[c] - lambda).max(0.0);
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                let us = u[(i, c)] * s;
                for j in 0..p {
                    estimate[(i, j)] += us * vt[(c, j)];
                }
            }
        }
    }
    Ok((0..n * p)
        .map(|idx| {
            let (i, j) = (idx / p, idx % p);
            match m.get(i, j) {
                Some(v) => v,
                None => estimate[(i, j)] + means[j],
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMethod {
    Ppca,
    SvdImpute,
    ColumnMean,
    Zero,
}

impl ImputationMethod {
    pub const ALL: [ImputationMethod; 4] = [
        ImputationMethod::Ppca,
        ImputationMethod::SvdImpute,
        ImputationMethod::ColumnMean,
        ImputationMethod::Zero,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ImputationMethod::Ppca => "ppca",
            ImputationMethod::SvdImpute => "svd_impute",
            ImputationMethod::ColumnMean => "column_mean",
            ImputationMethod::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutConfig {
    pub fraction: f64,
    pub splits: usize,
    pub methods: Vec<ImputationMethod>,
    pub ppca: PpcaConfig,
    pub svd: SvdImputeConfig,
}

impl Default for HoldoutConfig {
    fn default() -> Self {
        HoldoutConfig {
            fraction: 0.01,
            splits: 2,
            methods: ImputationMethod::ALL.to_vec(),
            ppca: PpcaConfig::default(),
            svd: SvdImputeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationScore {
    pub method: ImputationMethod,
    /// Mean over splits of the hold-out mean absolute error.
    pub mae: f64,
    /// Mean over splits of the standard deviation of absolute errors.
    pub stddev: f64,
}

/// Imputes `m` (missing cells only) with `method`, returning the completed
/// matrix.
pub fn impute(m: &StanceMatrix, method: ImputationMethod, cfg: &HoldoutConfig, seed: u64) -> Result<Vec<f64>> {
    let (n, p) = (m.n_rows(), m.n_cols());
    Ok(match method {
        ImputationMethod::Ppca => {
            let model = ppca_fit(m, &cfg.ppca, seed)?;
            ppca_transform(&model, m)?.imputed.values
        }
        ImputationMethod::SvdImpute => svd_impute(m, &cfg.svd)?,
        ImputationMethod::ColumnMean => {
            let means = column_means(m);
            (0..n * p).map(|idx| m.get(idx / p, idx % p).unwrap_or(means[idx % p])).collect()
        }
        ImputationMethod::Zero => (0..n * p).map(|idx| m.get(idx / p, idx % p).unwrap_or(0.0)).collect(),
    })
}

/// Picks the cells to hold out, or the first column the draw would empty.
fn draw_mask(m: &StanceMatrix, fraction: f64, rng: &mut impl Rng) -> core::result::Result<Vec<usize>, usize> {
    let mut cells: Vec<usize> = (0..m.missing.len()).filter(|&i| !m.missing[i]).collect();
    let count = (libm::round(fraction * cells.len() as f64) as usize).max(1).min(cells.len());
    cells.shuffle(rng);
    cells.truncate(count);
    cells.sort_unstable();
    let p = m.n_cols();
    let mut remaining = vec![0usize; p];
    for (idx, miss) in m.missing.iter().enumerate() {
        if !miss {
            remaining[idx % p] += 1;
        }
    }
    for &c in &cells {
        remaining[c % p] -= 1;
    }
    match remaining.iter().position(|r| *r == 0) {
        Some(col) => Err(col),
        None => Ok(cells),
    }
}

/// Row-major indices of the observed cells held out by one split. A draw
/// that would leave a column empty is repeated once before giving up.
pub fn holdout_cells(m: &StanceMatrix, fraction: f64, split_seed: u64) -> Result<Vec<usize>> {
    let mut rng = seed::rng(split_seed);
    match draw_mask(m, fraction, &mut rng) {
        Ok(c) => Ok(c),
        Err(_) => draw_mask(m, fraction, &mut rng).map_err(Error::ColumnMasked),
    }
}

/// Masks a random `fraction` of observed cells, imputes them with each
/// method and scores the mean absolute error against the held-out truth.
pub fn holdout_mae(m: &StanceMatrix, cfg: &HoldoutConfig, seed: u64) -> Result<Vec<ImputationScore>> {
    m.validate()?;
    if !(cfg.fraction > 0.0 && cfg.fraction < 1.0) {
        return Err(Error::InvalidInput("hold-out fraction must be in (0, 1)".into()));
    }
    if cfg.splits == 0 {
        return Err(Error::InvalidInput("need at least one hold-out split".into()));
    }
    let mut sums: Vec<(f64, f64)> = vec![(0.0, 0.0); cfg.methods.len()];
    for split in 0..cfg.splits {
        let split_seed = seed::derive(seed, split as u64);
        let cells = holdout_cells(m, cfg.fraction, split_seed)?;
        let mut train = m.clone();
        let p = m.n_cols();
        for &c in &cells {
            train.mask(c / p, c % p);
        }
        for (slot, &method) in cfg.methods.iter().enumerate() {
            let completed = impute(&train, method, cfg, seed::derive(split_seed, 1 + slot as u64))?;
            let errors: Vec<f64> = cells.iter().map(|&c| fabs(completed[c] - m.values[c])).collect();
            let mae = crate::special::mean(&errors);
            let sd = crate::special::sample_sd(&errors);
            sums[slot].0 += mae;
            sums[slot].1 += sd;
        }
    }
    Ok(cfg
        .methods
        .iter()
        .zip(sums)
        .map(|(&method, (mae, sd))| ImputationScore {
            method,
            mae: mae / cfg.splits as f64,
            stddev: sd / cfg.splits as f64,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTrajectory {
    pub person_id: String,
    /// Normalized times, strictly increasing.
    pub times: Vec<f64>,
    pub coords: Vec<Vec<f64>>,
}

impl LatentTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                got: self.coords.len(),
            });
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(alloc::format!(
                "trajectory {} times are not strictly increasing",
                self.person_id
            )));
        }
        if self.coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory coordinates"));
        }
        Ok(())
    }
}

/// Splits per-row latents into per-person trajectories, keeping the first
/// `n_dims` coordinates. Times are the normalized bin centers.
pub fn trajectories_from_latents(
    m: &StanceMatrix,
    latents: &[Vec<f64>],
    binning: &TimeBinning,
    n_dims: usize,
) -> Result<Vec<LatentTrajectory>> {
    if latents.len() != m.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: m.n_rows(),
            got: latents.len(),
        });
    }
    m.person_blocks()
        .into_iter()
        .map(|(person_id, rows)| {
            let mut times = Vec::with_capacity(rows.len());
            let mut coords = Vec::with_capacity(rows.len());
            for i in rows {
                times.push(binning.normalize_bin_center(m.row_keys[i].bin)?);
                coords.push(latents[i].iter().take(n_dims).copied().collect());
            }
            Ok(LatentTrajectory {
                person_id,
                times,
                coords,
            })
        })
        .collect()
}

/// Trailing mean over the last `min(window, points so far)` samples.
pub fn moving_average(traj: &LatentTrajectory, window: usize) -> Result<LatentTrajectory> {
    if window == 0 {
        return Err(Error::InvalidInput("moving-average window must be at least 1".into()));
    }
    let d = traj.dim();
    let coords = (0..traj.len())
        .map(|i| {
            let from = (i + 1).saturating_sub(window);
            let count = (i + 1 - from) as f64;
            (0..d)
                .map(|k| traj.coords[from..=i].iter().map(|c| c[k]).sum::<f64>() / count)
                .collect()
        })
        .collect();
    Ok(LatentTrajectory {
        person_id: traj.person_id.clone(),
        times: traj.times.clone(),
        coords,
    })
}
