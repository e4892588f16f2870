//! Summary statistics and the two-sided Wilcoxon rank-sum test used to
//! compare batches of runs.
//!
//! The test uses the normal approximation with midranks for ties, the tie
//! correction in the variance, and a continuity correction. For tiny samples
//! an exact permutation oracle lives in the test suite; the approximation
//! tracks it closely from around eight observations per side.

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 divisor), the reporting convention.
pub fn sample_std(xs: &[f64]) -> f64 {
    assert!(xs.len() >= 2, "sample std needs at least two observations");
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Population standard deviation (n divisor).
pub fn population_std(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Midranks of the pooled sample.
fn ranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).expect("NaN in sample"));
    let mut out = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = midrank;
        }
        i = j + 1;
    }
    out
}

/// Two-sided Wilcoxon rank-sum p-value for independent samples `a` and `b`.
///
/// Identical samples give exactly 1.0: the continuity correction clamps a
/// zero deviation to a zero z-score.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> f64 {
    let n1 = a.len() as f64;
    let n2 = b.len() as f64;
    assert!(n1 >= 1.0 && n2 >= 1.0, "both samples must be non-empty");
    let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let ranks = ranks(&pooled);
    let w: f64 = ranks[..a.len()].iter().sum();

    let n = n1 + n2;
    let mean_w = n1 * (n + 1.0) / 2.0;

    // tie correction over groups of equal values
    let mut sorted = pooled.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t.powi(3) - t;
        i = j + 1;
    }
    let var_w = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var_w <= 0.0 {
        return 1.0; // every pooled value identical
    }

    let deviation = (w - mean_w).abs() - 0.5;
    if deviation <= 0.0 {
        return 1.0;
    }
    let z = deviation / var_w.sqrt();
    2.0 * normal_sf(z)
}

/// Upper tail of the standard normal via the Abramowitz-Stegun 7.1.26
/// erf polynomial (absolute error below 1.5e-7).
fn normal_sf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erfc = poly * (-x * x).exp();
    (erfc / 2.0).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_mean_and_std() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&xs), 5.0);
        assert_eq!(population_std(&xs), 2.0);
        let expected = (32.0f64 / 7.0).sqrt();
        assert!((sample_std(&xs) - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let xs: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        assert_eq!(wilcoxon_rank_sum(&xs, &xs), 1.0);
    }

    #[test]
    fn disjoint_samples_give_tiny_p() {
        let a: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let b: Vec<f64> = (101..=130).map(|i| i as f64).collect();
        assert!(wilcoxon_rank_sum(&a, &b) < 1e-6);
    }

    #[test]
    fn symmetric_in_the_arguments() {
        let a = [1.0, 5.0, 9.0, 12.0, 20.0];
        let b = [2.0, 62.0, 8.0, 30.0, 21.0, 40.0];
        let p1 = wilcoxon_rank_sum(&a, &b);
        let p2 = wilcoxon_rank_sum(&b, &a);
        assert!((p1 - p2).abs() < 1e-12);
    }

    #[test]
    fn midranks_handle_ties() {
        assert_eq!(ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    /// Exact two-sided p by enumerating every assignment of ranks to the
    /// first sample; the reference the approximation is judged against.
    fn exact_rank_sum_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let ranks = ranks(&pooled);
        let observed: f64 = ranks[..a.len()].iter().sum();
        let n = pooled.len();
        let n1 = a.len();
        let mean_w = n1 as f64 * (n as f64 + 1.0) / 2.0;
        let threshold = (observed - mean_w).abs();
        let mut total = 0u64;
        let mut extreme = 0u64;
        let mut chosen = vec![false; n];
        fn walk(
            ranks: &[f64],
            chosen: &mut Vec<bool>,
            start: usize,
            left: usize,
            sum: f64,
            mean_w: f64,
            thresh: f64,
            total: &mut u64,
            extreme: &mut u64,
        ) {
            if left == 0 {
                *total += 1;
                if (sum - mean_w).abs() >= thresh - 1e-9 {
                    *extreme += 1;
                }
                return;
            }
            for i in start..ranks.len() {
                if !chosen[i] {
                    chosen[i] = true;
                    walk(ranks, chosen, i + 1, left - 1, sum + ranks[i], mean_w, thresh, total, extreme);
                    chosen[i] = false;
                }
            }
        }
        walk(&ranks, &mut chosen, 0, n1, 0.0, mean_w, threshold, &mut total, &mut extreme);
        extreme as f64 / total as f64
    }

    #[test]
    fn approximation_tracks_exact_oracle_for_small_samples() {
        // tie-free draws: with heavy ties the midrank lattice shifts and the
        // 0.5 continuity correction can overshoot the 0.01 band
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = crate::rng::stream(77);
        for trial in 0..12 {
            let n1 = rng.gen_range(9..=12usize);
            let n2 = rng.gen_range(9..=12usize);
            let mut pool: Vec<f64> = (0..(n1 + n2)).map(|k| k as f64).collect();
            pool.shuffle(&mut rng);
            let a = pool[..n1].to_vec();
            let b = pool[n1..].to_vec();
            let exact = exact_rank_sum_p(&a, &b);
            let approx = wilcoxon_rank_sum(&a, &b);
            assert!(
                (exact - approx).abs() <= 0.01,
                "trial {trial}: exact {exact} vs approx {approx}"
            );
        }
    }

    #[test]
    fn tied_samples_still_close_to_exact() {
        let a = [3.0, 5.0, 5.0, 7.0, 9.0, 11.0, 2.0, 5.0];
        let b = [4.0, 5.0, 6.0, 8.0, 9.0, 12.0, 3.0, 7.0];
        let exact = exact_rank_sum_p(&a, &b);
        let approx = wilcoxon_rank_sum(&a, &b);
        assert!((exact - approx).abs() <= 0.05, "exact {exact} vs approx {approx}");
    }
}
