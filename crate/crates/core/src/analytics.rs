//! Significance tests, effect sizes and the descriptive statistics used to
//! characterize latent dimensions and the people who move along them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::{DateTime, Utc};
use libm::{fabs, log, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Label, StanceObservation, TimeBinning};
use crate::latent::LatentTrajectory;
use crate::special::{binomial, chi2_sf, ln_binomial, mean, normal_two_sided, sample_variance};

/// Counts with one row per period and one column per label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<ContingencyTable> {
        let t = ContingencyTable { counts };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let cols = self.counts.first().map_or(0, Vec::len);
        if self.counts.is_empty() || cols == 0 || self.counts.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("contingency table must be a non-empty rectangle".into()));
        }
        if self.counts.iter().any(|r| r.iter().all(|c| *c == 0)) {
            return Err(Error::InvalidInput("every contingency row needs a positive count".into()));
        }
        Ok(())
    }

    fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        let cols = self.counts[0].len();
        (0..cols).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson's chi-square test of independence, without continuity
/// correction.
pub fn chi_square_test(t: &ContingencyTable) -> Result<ChiSquare> {
    t.validate()?;
    let rows = t.row_sums();
    let cols = t.col_sums();
    if cols.contains(&0) {
        return Err(Error::ZeroExpected);
    }
    let total: u64 = rows.iter().sum();
    let mut stat = 0.0;
    for (i, r) in t.counts.iter().enumerate() {
        for (j, &obs) in r.iter().enumerate() {
            let expected = rows[i] as f64 * cols[j] as f64 / total as f64;
            let d = obs as f64 - expected;
            stat += d * d / expected;
        }
    }
    let dof = (rows.len() - 1) * (cols.len() - 1);
    let p_value = if dof == 0 { 1.0 } else { chi2_sf(stat, dof as f64) };
    Ok(ChiSquare {
        statistic: stat,
        dof,
        p_value,
    })
}

/// Two-sided Fisher exact test on a 2×2 table: the total probability of
/// all tables with the observed margins that are no more likely than the
/// observed one.
pub fn fisher_exact(t: [[u64; 2]; 2]) -> Result<f64> {
    let r1 = t[0][0] + t[0][1];
    let r2 = t[1][0] + t[1][1];
    let c1 = t[0][0] + t[1][0];
    let n = r1 + r2;
    if n == 0 {
        return Err(Error::InvalidInput("Fisher test of an all-zero table".into()));
    }
    let lo = c1.saturating_sub(r2);
    let hi = c1.min(r1);
    // Exact integer weights C(r1, a) C(r2, c1 - a) when they and their
    // total C(n, c1) fit in u128.
    let exact: Option<Vec<u128>> = (lo..=hi)
        .map(|a| binomial(r1, a)?.checked_mul(binomial(r2, c1 - a)?))
        .collect();
    if let Some(w) = exact {
        if let Some(total) = w.iter().try_fold(0u128, |acc, v| acc.checked_add(*v)) {
            let observed = w[(t[0][0] - lo) as usize];
            // Never above the total, so this sum cannot overflow.
            let tail: u128 = w.iter().filter(|&&v| v <= observed).sum();
            return Ok((tail as f64 / total as f64).min(1.0));
        }
    }
    let lw: Vec<f64> = (lo..=hi)
        .map(|a| ln_binomial(r1, a) + ln_binomial(r2, c1 - a) - ln_binomial(n, c1))
        .collect();
    let observed = lw[(t[0][0] - lo) as usize];
    let tail: f64 = lw
        .iter()
        .filter(|&&v| v <= observed + 1e-7 * fabs(observed).max(1.0))
        .map(|v| libm::exp(*v))
        .sum();
    Ok(tail.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample: pairs with `a > b`, ties counting one half.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Largest pooled size tested by full enumeration.
pub const MANN_WHITNEY_EXACT_MAX: usize = 12;

fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided Mann-Whitney U test. Exact permutation p-value when the
/// pooled size is at most 12, otherwise the normal approximation with tie
/// and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("Mann-Whitney needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Mann-Whitney sample"));
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).cloned().collect();
    let (ranks, ties) = midranks(&pooled);
    let offset = (na * (na + 1)) as f64 / 2.0;
    let u = ranks[..na].iter().sum::<f64>() - offset;
    let centre = (na * nb) as f64 / 2.0;
    let observed = fabs(u - centre);

    if n <= MANN_WHITNEY_EXACT_MAX {
        // Every way of choosing which pooled ranks belong to the first
        // sample, as bitmasks.
        let mut extreme = 0u64;
        let mut total = 0u64;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != na {
                continue;
            }
            let r: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            total += 1;
            if fabs(r - offset - centre) >= observed {
                extreme += 1;
            }
        }
        return Ok(MannWhitney {
            u,
            p_value: extreme as f64 / total as f64,
            exact: true,
        });
    }

    let nf = n as f64;
    let var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - ties / (nf * (nf - 1.0)));
    let p_value = if var <= 0.0 {
        1.0
    } else {
        normal_two_sided(((observed - 0.5).max(0.0)) / sqrt(var))
    };
    Ok(MannWhitney {
        u,
        p_value,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adjusted {
    pub p_adjusted: f64,
    pub reject: bool,
}

/// Benjamini-Hochberg step-up adjustment, in input order.
pub fn bh_correct(p_values: &[f64], alpha: f64) -> Result<Vec<Adjusted>> {
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidInput("p-values must lie in [0, 1]".into()));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p_values[i] * m as f64 / (rank + 1) as f64);
        // The max only absorbs rounding: p·m/rank is never below p.
        adjusted[i] = running.max(p_values[i]).min(1.0);
    }
    Ok(adjusted
        .into_iter()
        .map(|p| Adjusted {
            p_adjusted: p,
            reject: p <= alpha,
        })
        .collect())
}

/// `(mean_a - mean_b) / s_pooled` with `n - 1` pooling.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("Cohen's d needs two points per sample".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
    if !(pooled > 0.0) {
        return Err(Error::Degenerate("zero pooled standard deviation"));
    }
    Ok((mean(a) - mean(b)) / sqrt(pooled))
}

/// Between-group sum of squares over total sum of squares.
pub fn eta_squared<K: Ord>(values: &[f64], groups: &[K]) -> Result<f64> {
    if values.len() != groups.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            got: groups.len(),
        });
    }
    let mut by: BTreeMap<&K, Vec<f64>> = BTreeMap::new();
    for (v, g) in values.iter().zip(groups) {
        by.entry(g).or_default().push(*v);
    }
    if by.len() < 2 {
        return Err(Error::InvalidInput("eta squared needs at least two groups".into()));
    }
    let grand = mean(values);
    let total: f64 = values.iter().map(|v| (v - grand) * (v - grand)).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("zero total variance"));
    }
    let between: f64 = by
        .values()
        .map(|vs| {
            let m = mean(vs);
            vs.len() as f64 * (m - grand) * (m - grand)
        })
        .sum();
    Ok((between / total).clamp(0.0, 1.0))
}

/// Mean position of each trajectory.
pub fn person_means(trajs: &[LatentTrajectory]) -> BTreeMap<String, Vec<f64>> {
    trajs
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| {
            let d = t.dim();
            let m: Vec<f64> = (0..d)
                .map(|k| t.coords.iter().map(|c| c[k]).sum::<f64>() / t.len() as f64)
                .collect();
            (t.person_id.clone(), m)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidTable {
    pub groups: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
    /// `distances[dim][i][j]`: `|centroid_i - centroid_j|` along `dim`.
    pub distances: Vec<Vec<Vec<f64>>>,
}

/// Per-dimension distances between group centroids, where each group's
/// centroid is the mean of its members' mean positions. People without a
/// group are ignored.
pub fn centroid_distances(means: &BTreeMap<String, Vec<f64>>, group_of: &BTreeMap<String, String>) -> Result<CentroidTable> {
    let mut members: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
    for (person, m) in means {
        if let Some(g) = group_of.get(person) {
            members.entry(g.as_str()).or_default().push(m);
        }
    }
    if members.is_empty() {
        return Err(Error::InvalidInput("no person belongs to a group".into()));
    }
    let dim = means.values().next().map_or(0, Vec::len);
    let groups: Vec<String> = members.keys().map(|g| String::from(*g)).collect();
    let centroids: Vec<Vec<f64>> = members
        .values()
        .map(|ms| (0..dim).map(|k| ms.iter().map(|m| m[k]).sum::<f64>() / ms.len() as f64).collect())
        .collect();
    let distances = (0..dim)
        .map(|k| {
            centroids
                .iter()
                .map(|a| centroids.iter().map(|b| fabs(a[k] - b[k])).collect())
                .collect()
        })
        .collect();
    Ok(CentroidTable {
        groups,
        centroids,
        distances,
    })
}

/// Shannon entropy (nats) of the per-dimension variances of `means`,
/// normalized to sum to one.
pub fn variance_entropy(means: &[Vec<f64>]) -> Result<f64> {
    let dim = means.first().map_or(0, Vec::len);
    if dim < 2 {
        return Err(Error::InvalidInput("variance entropy needs at least two dimensions".into()));
    }
    let vars: Vec<f64> = (0..dim)
        .map(|k| sample_variance(&means.iter().map(|m| m[k]).collect::<Vec<_>>()))
        .collect();
    let total: f64 = vars.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("all dimensions have zero variance"));
    }
    Ok(-vars
        .iter()
        .map(|v| v / total)
        .filter(|p| *p > 0.0)
        .map(|p| p * log(p))
        .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveDirection {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoverQuery {
    pub dim: usize,
    /// Fraction of people kept, e.g. 0.1 for the top ten percent.
    pub percentile: f64,
    pub direction: MoveDirection,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    /// Targets ranked by absolute loading on `dim` that are examined.
    pub top_loadings: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoverRow {
    pub target: String,
    pub loading: f64,
    /// Percentages before and after the window midpoint, in the order
    /// favor, neutral, against.
    pub before: [f64; 3],
    pub after: [f64; 3],
    pub n_before: u64,
    pub n_after: u64,
    /// `chi2`, `fisher` or `none` when only one label occurs.
    pub test: String,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

impl MoverRow {
    /// `"20.0→91.7"` for label `i` (0 favor, 1 neutral, 2 against).
    pub fn shift(&self, i: usize) -> String {
        shift_string(self.before[i], self.after[i])
    }
}

pub fn shift_string(before: f64, after: f64) -> String {
    format!("{before:.1}→{after:.1}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoverReport {
    pub movers: Vec<String>,
    pub rows: Vec<MoverRow>,
}

impl MoverReport {
    pub fn significant(&self) -> impl Iterator<Item = &MoverRow> {
        self.rows.iter().filter(|r| r.significant)
    }
}

/// Ranks people by `last - first` along `q.dim` inside the window, keeps
/// the top (or bottom) `percentile`, and for each of the most heavily
/// loaded targets compares the movers' label mix before and after the
/// window midpoint. `loadings` pairs each target with its loading on
/// `q.dim`.
pub fn significant_movers(
    trajs: &[LatentTrajectory],
    loadings: &[(String, f64)],
    obs: &[StanceObservation],
    binning: &TimeBinning,
    q: &MoverQuery,
) -> Result<MoverReport> {
    if q.end <= q.start {
        return Err(Error::InvalidInput("mover window is empty".into()));
    }
    if !(q.percentile > 0.0 && q.percentile <= 1.0) {
        return Err(Error::InvalidInput("percentile must be in (0, 1]".into()));
    }
    let (t0, t1) = (binning.normalize_time(q.start)?, binning.normalize_time(q.end)?);
    let mut moves: Vec<(f64, &str)> = Vec::new();
    for tr in trajs {
        let inside: Vec<usize> = (0..tr.len()).filter(|&i| tr.times[i] >= t0 && tr.times[i] < t1).collect();
        if inside.len() < 2 {
            continue;
        }
        if q.dim >= tr.dim() {
            return Err(Error::DimensionMismatch {
                expected: q.dim + 1,
                got: tr.dim(),
            });
        }
        let first = tr.coords[inside[0]][q.dim];
        let last = tr.coords[*inside.last().unwrap()][q.dim];
        moves.push((last - first, tr.person_id.as_str()));
    }
    if moves.is_empty() {
        return Err(Error::InvalidInput("no trajectory has two points in the window".into()));
    }
    match q.direction {
        MoveDirection::Positive => moves.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1))),
        MoveDirection::Negative => moves.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1))),
    }
    let keep = (libm::ceil(q.percentile * moves.len() as f64) as usize).clamp(1, moves.len());
    let movers: Vec<String> = moves[..keep].iter().map(|m| String::from(m.1)).collect();

    let mut ranked: Vec<&(String, f64)> = loadings.iter().collect();
    ranked.sort_by(|a, b| fabs(b.1).total_cmp(&fabs(a.1)).then(a.0.cmp(&b.0)));
    ranked.truncate(q.top_loadings);

    let mid = q.start + (q.end - q.start) / 2;
    let mut rows = Vec::new();
    for (target, loading) in ranked {
        let mut counts = [[0u64; 3]; 2];
        for o in obs {
            if &o.target_id != target || o.timestamp < q.start || o.timestamp >= q.end {
                continue;
            }
            if !movers.contains(&o.person_id) {
                continue;
            }
            let period = usize::from(o.timestamp >= mid);
            let col = Label::ALL.iter().position(|l| *l == o.label).expect("label in ALL");
            counts[period][col] += 1;
        }
        let (nb, na) = (counts[0].iter().sum::<u64>(), counts[1].iter().sum::<u64>());
        if nb == 0 || na == 0 {
            continue;
        }
        let present: Vec<usize> = (0..3).filter(|&j| counts[0][j] + counts[1][j] > 0).collect();
        let (test, p) = match present.len() {
            3 => (
                "chi2",
                chi_square_test(&ContingencyTable::new(counts.iter().map(|r| r.to_vec()).collect())?)?.p_value,
            ),
            2 => {
                let (a, b) = (present[0], present[1]);
                ("fisher", fisher_exact([[counts[0][a], counts[0][b]], [counts[1][a], counts[1][b]]])?)
            }
            _ => ("none", 1.0),
        };
        let pct = |row: &[u64; 3], n: u64| -> [f64; 3] { [0, 1, 2].map(|j| 100.0 * row[j] as f64 / n as f64) };
        rows.push(MoverRow {
            target: target.clone(),
            loading: *loading,
            before: pct(&counts[0], nb),
            after: pct(&counts[1], na),
            n_before: nb,
            n_after: na,
            test: test.into(),
            p_value: p,
            p_adjusted: p,
            significant: false,
        });
    }
    let adjusted = bh_correct(&rows.iter().map(|r| r.p_value).collect::<Vec<_>>(), q.alpha)?;
    for (r, a) in rows.iter_mut().zip(adjusted) {
        r.p_adjusted = a.p_adjusted;
        r.significant = r.p_value < q.alpha;
    }
    Ok(MoverReport { movers, rows })
}
