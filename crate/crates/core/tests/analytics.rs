use std::collections::BTreeMap;

use chrono::{DateTime, TimeDelta, Utc};
use proptest::prelude::*;
use stancefield_core::analytics::*;
use stancefield_core::ingest::{new_year, Label, StanceObservation, TimeBinning};
use stancefield_core::latent::LatentTrajectory;

/// Hypergeometric two-sided p by direct enumeration in exact rationals
/// (numerator and denominator as integers).
fn fisher_oracle(t: [[u64; 2]; 2]) -> f64 {
    fn c(n: u64, k: u64) -> u128 {
        (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
    }
    let (r1, r2, c1) = (t[0][0] + t[0][1], t[1][0] + t[1][1], t[0][0] + t[1][0]);
    let w = |a: u64| c(r1, a) * c(r2, c1 - a);
    let obs = w(t[0][0]);
    let range = c1.saturating_sub(r2)..=c1.min(r1);
    let total: u128 = range.clone().map(w).sum();
    let tail: u128 = range.map(w).filter(|v| *v <= obs).sum();
    tail as f64 / total as f64
}

#[test]
fn fisher_exact_cases() {
    assert_eq!(fisher_exact([[3, 1], [1, 3]]).unwrap(), 34.0 / 70.0);
    assert_eq!(fisher_exact([[0, 5], [5, 0]]).unwrap(), 2.0 / 252.0);
    assert_eq!(fisher_exact([[2, 2], [2, 2]]).unwrap(), 1.0);
    assert!(fisher_exact([[0, 0], [0, 0]]).is_err());
}

#[test]
fn fisher_weights_whose_total_overflows_u128() {
    // Every weight fits in u128 but C(136, 81) does not. Reference value
    // from scipy.stats.fisher_exact.
    let p = fisher_exact([[70, 11], [11, 44]]).unwrap();
    assert!((p / 3.289484486794463e-15 - 1.0).abs() < 1e-6, "{p}");
}

#[test]
fn fisher_large_tables_use_log_weights() {
    // Margins too large for exact u128 weights.
    let t = [[900, 600], [700, 800]];
    let p = fisher_exact(t).unwrap();
    let chi = chi_square_test(&ContingencyTable::new(vec![vec![900, 600], vec![700, 800]]).unwrap()).unwrap();
    assert!(p > 0.0 && p < 1e-8);
    assert!((p.ln() - chi.p_value.ln()).abs() < 0.5, "{p} vs {}", chi.p_value);
}

#[test]
fn mann_whitney_exact_cases() {
    let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert_eq!(r.u, 0.0);
    assert!(r.exact);
    assert_eq!(r.p_value, 1.0 / 3.0);
    let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!(r.p_value >= 0.99);
    assert!(mann_whitney_u(&[], &[1.0]).is_err());
}

#[test]
fn mann_whitney_approximation_tracks_enumeration() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let a: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.random::<f64>() + 0.3).collect();
        let exact = mann_whitney_u(&a, &b).unwrap();
        let approx = normal_approx(&a, &b);
        assert!(exact.exact);
        assert!((exact.p_value - approx).abs() < 0.02, "{} vs {approx}", exact.p_value);
    }
}

/// Normal approximation with continuity correction, no ties.
fn normal_approx(a: &[f64], b: &[f64]) -> f64 {
    let u: f64 = a
        .iter()
        .map(|x| b.iter().filter(|y| x > *y).count() as f64)
        .sum();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mu = na * nb / 2.0;
    let sd = (na * nb * (na + nb + 1.0) / 12.0).sqrt();
    let z = ((u - mu).abs() - 0.5).max(0.0) / sd;
    // erfc via the complementary normal tail.
    libm::erfc(z / std::f64::consts::SQRT_2)
}

#[test]
fn mann_whitney_large_samples_use_normal_approximation() {
    let a: Vec<f64> = (0..20).map(f64::from).collect();
    let b: Vec<f64> = (0..20).map(|i| f64::from(i) + 0.5).collect();
    let r = mann_whitney_u(&a, &b).unwrap();
    assert!(!r.exact);
    assert!((r.p_value - normal_approx(&a, &b)).abs() < 1e-12);
}

#[test]
fn bh_hand_cases() {
    let r = bh_correct(&[0.005, 0.01, 0.03, 0.04], 0.05).unwrap();
    assert!(r.iter().all(|a| a.reject));
    let adj: Vec<f64> = r.iter().map(|a| a.p_adjusted).collect();
    assert_eq!(adj, vec![0.02, 0.02, 0.04, 0.04]);
    let r = bh_correct(&[0.04, 0.5], 0.05).unwrap();
    assert!(r.iter().all(|a| !a.reject));
    assert_eq!(r[0].p_adjusted, 0.08);
    assert_eq!(r[1].p_adjusted, 0.5);
    assert_eq!(bh_correct(&[0.37], 0.05).unwrap()[0].p_adjusted, 0.37);
    assert!(bh_correct(&[1.2], 0.05).is_err());
    assert!(bh_correct(&[], 0.05).unwrap().is_empty());
}

#[test]
fn chi_square_cases() {
    let t = ContingencyTable::new(vec![vec![10, 0], vec![0, 10]]).unwrap();
    let r = chi_square_test(&t).unwrap();
    assert!((r.statistic - 20.0).abs() < 1e-12);
    assert_eq!(r.dof, 1);
    // P(χ²₁ > 20) = erfc(√10)
    assert!((r.p_value - libm::erfc(10f64.sqrt())).abs() < 1e-15);
    assert!((r.p_value - 7.7e-6).abs() < 0.05e-6);

    let t = ContingencyTable::new(vec![vec![2, 4, 6], vec![1, 2, 3]]).unwrap();
    let r = chi_square_test(&t).unwrap();
    assert!(r.statistic.abs() < 1e-12);
    assert_eq!(r.p_value, 1.0);

    let t = ContingencyTable::new(vec![vec![3, 0], vec![5, 0]]).unwrap();
    assert!(matches!(chi_square_test(&t), Err(stancefield_core::Error::ZeroExpected)));
    assert!(ContingencyTable::new(vec![vec![0, 0], vec![1, 1]]).is_err());
    assert!(ContingencyTable::new(vec![vec![1, 2], vec![1]]).is_err());
}

#[test]
fn cohens_d_and_eta_squared_cases() {
    let a = [1.0, 2.0, 3.0];
    assert_eq!(cohens_d(&a, &a).unwrap(), 0.0);
    // Means 1 and 0, each sample with variance 4.
    let a = [-1.0, 1.0, 3.0];
    let b = [-2.0, 0.0, 2.0];
    assert!((cohens_d(&a, &b).unwrap() - 0.5).abs() < 1e-10);
    assert!((cohens_d(&b, &a).unwrap() + 0.5).abs() < 1e-10);
    assert!(cohens_d(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    assert!(cohens_d(&[1.0], &[2.0, 3.0]).is_err());

    assert!((eta_squared(&[0.0, 0.0, 1.0, 1.0], &["A", "A", "B", "B"]).unwrap() - 1.0).abs() < 1e-10);
    assert!(eta_squared(&[0.0, 1.0, 0.0, 1.0], &["A", "A", "B", "B"]).unwrap().abs() < 1e-10);
    assert!(eta_squared(&[1.0, 1.0], &["A", "B"]).is_err());
    assert!(eta_squared(&[1.0, 2.0], &["A", "A"]).is_err());
}

#[test]
fn entropy_cases() {
    let equal = vec![vec![1.0, 1.0, 1.0], vec![-1.0, -1.0, -1.0]];
    assert!((variance_entropy(&equal).unwrap() - 3f64.ln()).abs() < 1e-12);
    let one = vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]];
    assert_eq!(variance_entropy(&one).unwrap(), 0.0);
    assert!(variance_entropy(&[vec![1.0, 2.0], vec![1.0, 2.0]]).is_err());
    assert!(variance_entropy(&[vec![1.0], vec![2.0]]).is_err());
}

#[test]
fn centroid_cases() {
    let mut means = BTreeMap::new();
    means.insert("a".to_string(), vec![-2.0, 0.0]);
    means.insert("b".to_string(), vec![0.0, 0.0]);
    means.insert("c".to_string(), vec![2.0, 1.0]);
    means.insert("d".to_string(), vec![9.0, 9.0]);
    let groups: BTreeMap<String, String> = [("a", "left"), ("b", "left"), ("c", "right")]
        .into_iter()
        .map(|(p, g)| (p.to_string(), g.to_string()))
        .collect();
    let t = centroid_distances(&means, &groups).unwrap();
    assert_eq!(t.groups, vec!["left", "right"]);
    assert_eq!(t.centroids, vec![vec![-1.0, 0.0], vec![2.0, 1.0]]);
    assert_eq!(t.distances[0], vec![vec![0.0, 3.0], vec![3.0, 0.0]]);
    assert_eq!(t.distances[1][0][1], 1.0);
    assert!(centroid_distances(&means, &BTreeMap::new()).is_err());
}

#[test]
fn person_means_average_each_trajectory() {
    let t = LatentTrajectory {
        person_id: "p".into(),
        times: vec![0.0, 1.0],
        coords: vec![vec![1.0, 4.0], vec![3.0, 0.0]],
    };
    assert_eq!(person_means(&[t])["p"], vec![2.0, 2.0]);
}

// Mover fixture: twenty people over the first half of 2022. The first ten
// climb along dimension 0 and the rest sink. Target "t-shift" is posted on
// only by the climbers: 30 posts before the window midpoint with 20% favor,
// 30 after with 90% favor. Target "t-flat" has the same mix in both halves.

fn window() -> (DateTime<Utc>, DateTime<Utc>) {
    (new_year(2022), new_year(2022) + TimeDelta::days(180))
}

fn mover_trajectories(scale: f64) -> Vec<LatentTrajectory> {
    let binning = TimeBinning::default();
    let (start, _) = window();
    (0..20)
        .map(|i| {
            let slope = if i < 10 { 1.0 + i as f64 * 0.1 } else { -1.0 - i as f64 * 0.1 };
            let days: Vec<i64> = (0..90).map(|k| 2 * k).collect();
            LatentTrajectory {
                person_id: format!("p{i:02}"),
                times: days
                    .iter()
                    .map(|d| binning.normalize_time(start + TimeDelta::days(*d)).unwrap())
                    .collect(),
                coords: days.iter().map(|d| vec![scale * slope * *d as f64 / 180.0, 0.3]).collect(),
            }
        })
        .collect()
}

fn post(person: usize, target: &str, day: i64, label: Label) -> StanceObservation {
    StanceObservation {
        person_id: format!("p{person:02}"),
        target_id: target.into(),
        timestamp: window().0 + TimeDelta::days(day) + TimeDelta::hours(3),
        label,
        platform: None,
        account_id: None,
    }
}

fn labels(favor: usize, neutral: usize, against: usize) -> Vec<Label> {
    let mut v = vec![Label::Favor; favor];
    v.extend(vec![Label::Neutral; neutral]);
    v.extend(vec![Label::Against; against]);
    v
}

fn mover_observations() -> Vec<StanceObservation> {
    let mut obs = Vec::new();
    for (k, l) in labels(6, 14, 10).into_iter().enumerate() {
        obs.push(post(k % 10, "t-shift", 2 + k as i64 * 2, l));
    }
    for (k, l) in labels(27, 0, 3).into_iter().enumerate() {
        obs.push(post(k % 10, "t-shift", 95 + k as i64 * 2, l));
    }
    for half in [0, 92] {
        for (k, l) in labels(5, 5, 5).into_iter().enumerate() {
            obs.push(post(k % 10, "t-flat", half + 1 + k as i64 * 3, l));
        }
    }
    // Sinkers' posts never enter the tables.
    for k in 0..40 {
        obs.push(post(10 + k % 10, "t-shift", 2 + k as i64 * 4, Label::Against));
    }
    obs
}

fn mover_query() -> MoverQuery {
    let (start, end) = window();
    MoverQuery {
        dim: 0,
        percentile: 0.5,
        direction: MoveDirection::Positive,
        start,
        end,
        top_loadings: 30,
        alpha: 0.05,
    }
}

fn loadings() -> Vec<(String, f64)> {
    vec![("t-shift".into(), 0.8), ("t-flat".into(), -0.5), ("t-silent".into(), 0.1)]
}

#[test]
fn movers_recover_planted_shift() {
    let r = significant_movers(
        &mover_trajectories(1.0),
        &loadings(),
        &mover_observations(),
        &TimeBinning::default(),
        &mover_query(),
    )
    .unwrap();
    let expected: Vec<String> = (0..10).rev().map(|i| format!("p{i:02}")).collect();
    assert_eq!(r.movers, expected);
    assert_eq!(r.rows.len(), 2, "silent target is skipped");

    let shift = &r.rows[0];
    assert_eq!(shift.target, "t-shift");
    assert_eq!((shift.n_before, shift.n_after), (30, 30));
    assert_eq!(shift.shift(0), "20.0→90.0");
    assert_eq!(shift.shift(1), "46.7→0.0");
    assert_eq!(shift.shift(2), "33.3→10.0");
    assert_eq!(shift.test, "chi2");
    assert!(shift.p_value < 0.05 && shift.significant);

    let flat = &r.rows[1];
    assert_eq!(flat.target, "t-flat");
    assert_eq!(flat.p_value, 1.0);
    assert!(!flat.significant);
    assert_eq!(r.significant().count(), 1);
}

#[test]
fn movers_fall_back_to_fisher_with_two_labels() {
    let mut obs = Vec::new();
    for (k, l) in labels(2, 0, 8).into_iter().enumerate() {
        obs.push(post(k, "t-shift", 2 + k as i64, l));
    }
    for (k, l) in labels(9, 0, 1).into_iter().enumerate() {
        obs.push(post(k, "t-shift", 100 + k as i64, l));
    }
    let r = significant_movers(
        &mover_trajectories(1.0),
        &loadings(),
        &obs,
        &TimeBinning::default(),
        &mover_query(),
    )
    .unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.rows[0].test, "fisher");
    assert_eq!(r.rows[0].p_value, fisher_exact([[2, 8], [9, 1]]).unwrap());
}

#[test]
fn movers_reject_bad_queries() {
    let trajs = mover_trajectories(1.0);
    let obs = mover_observations();
    let b = TimeBinning::default();
    let mut q = mover_query();
    q.end = q.start;
    assert!(significant_movers(&trajs, &loadings(), &obs, &b, &q).is_err());
    let mut q = mover_query();
    q.percentile = 0.0;
    assert!(significant_movers(&trajs, &loadings(), &obs, &b, &q).is_err());
    let mut q = mover_query();
    q.dim = 3;
    assert!(significant_movers(&trajs, &loadings(), &obs, &b, &q).is_err());
}

// Uncorrected Pearson and Fisher disagree by more than 0.05 near the
// middle of the p range even with every expected count at 10.
#[test]
fn chi_square_and_fisher_diverge_at_moderate_p() {
    let chi = chi_square_test(&ContingencyTable::new(vec![vec![12, 8], vec![8, 12]]).unwrap()).unwrap();
    let fisher = fisher_exact([[12, 8], [8, 12]]).unwrap();
    assert!((chi.p_value - 0.2059).abs() < 1e-4);
    assert!((fisher - 0.3431).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chi_square_and_fisher_agree_on_strong_effects(a in 10u64..80, b in 10u64..80, c in 10u64..80, d in 10u64..80) {
        let t = [[a, b], [c, d]];
        let n = (a + b + c + d) as f64;
        let rows = [a + b, c + d];
        let cols = [a + c, b + d];
        prop_assume!(rows.iter().all(|r| cols.iter().all(|k| (*r * *k) as f64 / n >= 10.0)));
        let chi = chi_square_test(&ContingencyTable::new(vec![vec![a, b], vec![c, d]]).unwrap()).unwrap();
        prop_assume!(chi.p_value < 0.05);
        prop_assert!((chi.p_value - fisher_exact(t).unwrap()).abs() < 0.05);
    }

    #[test]
    fn fisher_matches_enumeration(a in 0u64..15, b in 0u64..15, c in 0u64..15, d in 0u64..15) {
        prop_assume!(a + b + c + d > 0);
        let p = fisher_exact([[a, b], [c, d]]).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - fisher_oracle([[a, b], [c, d]])).abs() < 1e-12);
    }

    #[test]
    fn chi_square_is_permutation_invariant(cells in proptest::collection::vec(1u64..40, 6)) {
        let rows = vec![cells[0..3].to_vec(), cells[3..6].to_vec()];
        let swapped = vec![rows[1].clone(), rows[0].clone()];
        let cols: Vec<Vec<u64>> = rows.iter().map(|r| vec![r[2], r[0], r[1]]).collect();
        let s = chi_square_test(&ContingencyTable::new(rows).unwrap()).unwrap();
        for t in [swapped, cols] {
            let o = chi_square_test(&ContingencyTable::new(t).unwrap()).unwrap();
            prop_assert!((o.statistic - s.statistic).abs() < 1e-10);
        }
        prop_assert!((0.0..=1.0).contains(&s.p_value));
        prop_assert_eq!(s.dof, 2);
    }

    #[test]
    fn bh_is_monotone_and_bounded(ps in proptest::collection::vec(0.0..=1.0f64, 1..20)) {
        let adj = bh_correct(&ps, 0.05).unwrap();
        let mut pairs: Vec<(f64, f64)> = ps.iter().zip(&adj).map(|(p, a)| (*p, a.p_adjusted)).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in pairs.windows(2) {
            prop_assert!(w[0].1 <= w[1].1);
        }
        for (p, a) in &pairs {
            prop_assert!(*a >= *p && *a <= 1.0);
        }
    }

    #[test]
    fn mann_whitney_p_in_unit_interval(
        a in proptest::collection::vec(-5i32..5, 1..10),
        b in proptest::collection::vec(-5i32..5, 1..10),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        let s = mann_whitney_u(&b, &a).unwrap();
        prop_assert!((r.p_value - s.p_value).abs() < 1e-12);
        prop_assert!((r.u + s.u - (a.len() * b.len()) as f64).abs() < 1e-12);
    }

    #[test]
    fn eta_squared_matches_anova_decomposition(
        values in proptest::collection::vec(-10.0..10.0f64, 6..30),
        k in 2usize..5,
    ) {
        let groups: Vec<usize> = (0..values.len()).map(|i| i % k).collect();
        let grand = values.iter().sum::<f64>() / values.len() as f64;
        let total: f64 = values.iter().map(|v| (v - grand).powi(2)).sum();
        let mut within = 0.0;
        for g in 0..k {
            let vs: Vec<f64> = values.iter().zip(&groups).filter(|(_, h)| **h == g).map(|(v, _)| *v).collect();
            let m = vs.iter().sum::<f64>() / vs.len() as f64;
            within += vs.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        }
        let eta = eta_squared(&values, &groups).unwrap();
        prop_assert!((eta - (1.0 - within / total)).abs() < 1e-10);
    }

    #[test]
    fn variance_entropy_matches_formula(means in proptest::collection::vec(proptest::collection::vec(-3.0..3.0f64, 3), 3..10)) {
        let vars: Vec<f64> = (0..3).map(|k| {
            let col: Vec<f64> = means.iter().map(|m| m[k]).collect();
            let mu = col.iter().sum::<f64>() / col.len() as f64;
            col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (col.len() - 1) as f64
        }).collect();
        let s: f64 = vars.iter().sum();
        let h: f64 = -vars.iter().map(|v| v / s).filter(|p| *p > 0.0).map(|p| p * p.ln()).sum::<f64>();
        prop_assert!((variance_entropy(&means).unwrap() - h).abs() < 1e-10);
    }

    #[test]
    fn movers_ignore_dimension_scale(scale in 0.01..100.0f64) {
        let base = significant_movers(
            &mover_trajectories(1.0), &loadings(), &mover_observations(),
            &TimeBinning::default(), &mover_query(),
        ).unwrap();
        let scaled = significant_movers(
            &mover_trajectories(scale), &loadings(), &mover_observations(),
            &TimeBinning::default(), &mover_query(),
        ).unwrap();
        prop_assert_eq!(base, scaled);
    }
}
