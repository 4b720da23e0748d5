//! Rank-based comparison of paired experiment results: the Friedman
//! two-way analysis of variance by ranks with midrank tie handling, a
//! step-up adjusted-p post-hoc against a control column, and pairwise
//! contrast estimates based on medians. The needed normal and chi-square
//! tail areas are computed from scratch via the regularized incomplete
//! gamma function.

use serde::{Deserialize, Serialize};

/// Natural log of the gamma function (Lanczos approximation, reflected
/// for small arguments). Accurate to well under 1e-10 over the range the
/// tests exercise.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection keeps the approximation on its accurate side.
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEFFS[0];
        for (i, &c) in COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Regularized lower incomplete gamma P(s, x): series expansion below
/// the diagonal, complement of the continued fraction above it.
pub fn regularized_gamma_p(s: f64, x: f64) -> f64 {
    assert!(s > 0.0 && x >= 0.0, "arguments out of domain");
    if x == 0.0 {
        return 0.0;
    }
    if x < s + 1.0 {
        lower_series(s, x)
    } else {
        1.0 - upper_continued_fraction(s, x)
    }
}

/// Regularized upper incomplete gamma Q(s, x) = 1 − P(s, x).
pub fn regularized_gamma_q(s: f64, x: f64) -> f64 {
    assert!(s > 0.0 && x >= 0.0, "arguments out of domain");
    if x == 0.0 {
        return 1.0;
    }
    if x < s + 1.0 {
        1.0 - lower_series(s, x)
    } else {
        upper_continued_fraction(s, x)
    }
}

fn gamma_prefactor(s: f64, x: f64) -> f64 {
    (s * x.ln() - x - ln_gamma(s)).exp()
}

fn lower_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut denom = s;
    for _ in 0..500 {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * gamma_prefactor(s, x)
}

fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    // Modified Lentz evaluation of the standard continued fraction.
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let a = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = a * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 3e-16 {
            break;
        }
    }
    gamma_prefactor(s, x) * h
}

/// Upper tail of the chi-square distribution with `df` degrees of
/// freedom.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    assert!(df >= 1);
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(df as f64 / 2.0, x / 2.0)
}

/// Standard normal cumulative distribution function.
pub fn standard_normal_cdf(z: f64) -> f64 {
    // erf in terms of the incomplete gamma keeps one implementation
    // responsible for all tail areas.
    let erf = |t: f64| -> f64 {
        if t == 0.0 {
            0.0
        } else {
            t.signum() * regularized_gamma_p(0.5, t * t)
        }
    };
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Two-sided normal p-value for an observed statistic `z`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    // 2(1 − Φ(|z|)) = Q(1/2, z²/2), evaluated directly for precision in
    // the far tail.
    regularized_gamma_q(0.5, z * z / 2.0)
}

/// Within-row ranks, 1 = smallest value, ties sharing the average of
/// their positions.
pub fn midranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).expect("values must be orderable"));
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && row[order[end]] == row[order[start]] {
            end += 1;
        }
        // Positions start..end (0-based) share the mean 1-based rank.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

/// Outcome of the rank-based analysis of variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    /// Mean rank per algorithm column (1 = best).
    pub average_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
}

/// Rank-based analysis of variance over a runs × algorithms matrix of
/// results where smaller is better. Ties take midranks and the statistic
/// carries the standard tie correction; fully tied data yields a zero
/// statistic with p-value one.
pub fn friedman(results: &[Vec<f64>]) -> FriedmanResult {
    let n = results.len();
    assert!(n >= 2, "need at least two paired rows");
    let k = results[0].len();
    assert!(k >= 2, "need at least two algorithms");
    assert!(
        results.iter().all(|row| row.len() == k),
        "rows must have equal width"
    );

    let mut rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in results {
        let ranks = midranks(row);
        for (sum, rank) in rank_sums.iter_mut().zip(&ranks) {
            *sum += rank;
        }
        // Tie groups contribute t³ − t each.
        let mut sorted = row.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut start = 0;
        while start < sorted.len() {
            let mut end = start + 1;
            while end < sorted.len() && sorted[end] == sorted[start] {
                end += 1;
            }
            let t = (end - start) as f64;
            tie_term += t * t * t - t;
            start = end;
        }
    }
    let average_ranks: Vec<f64> = rank_sums.iter().map(|s| s / n as f64).collect();

    let kf = k as f64;
    let nf = n as f64;
    let sum_sq: f64 = average_ranks.iter().map(|r| r * r).sum();
    let base = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    let correction = 1.0 - tie_term / (nf * kf * (kf * kf - 1.0));
    let (statistic, p_value) = if correction <= 0.0 {
        (0.0, 1.0)
    } else {
        let statistic = base / correction;
        (statistic, chi_square_sf(statistic, k - 1))
    };
    FriedmanResult {
        average_ranks,
        statistic,
        p_value,
    }
}

/// Step-up adjusted p-values (Hommel's procedure; the two-hypothesis
/// case uses the equivalent Hochberg pair rule).
pub fn hommel_adjust(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    if n <= 1 {
        return p.to_vec();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).expect("p-values must be orderable"));
    let sorted: Vec<f64> = order.iter().map(|&i| p[i]).collect();

    let adjusted_sorted: Vec<f64> = if n == 2 {
        vec![(2.0 * sorted[0]).min(sorted[1]), sorted[1]]
    } else {
        let init = (0..n)
            .map(|i| n as f64 * sorted[i] / (i + 1) as f64)
            .fold(f64::INFINITY, f64::min);
        let mut pa = vec![init; n];
        let mut q = vec![0.0; n];
        for m in (2..n).rev() {
            // Tail block of the m largest p-values, paired with
            // denominators 2..=m.
            let q1 = (0..m - 1)
                .map(|j| m as f64 * sorted[n - m + 1 + j] / (j + 2) as f64)
                .fold(f64::INFINITY, f64::min);
            for s in 0..=(n - m) {
                q[s] = (m as f64 * sorted[s]).min(q1);
            }
            let fill = q[n - m];
            for slot in q.iter_mut().take(n).skip(n - m + 1) {
                *slot = fill;
            }
            for (acc, &value) in pa.iter_mut().zip(&q) {
                *acc = acc.max(value);
            }
        }
        pa.iter().zip(&sorted).map(|(&a, &p)| a.max(p)).collect()
    };

    let mut out = vec![0.0; n];
    for (position, &original) in order.iter().enumerate() {
        out[original] = adjusted_sorted[position];
    }
    out
}

/// One control-versus-other comparison of the post-hoc table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocComparison {
    /// Column index of the compared algorithm.
    pub index: usize,
    pub z: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub rejected: bool,
}

/// Post-hoc comparisons of every column against the control column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocTable {
    pub control: usize,
    pub alpha: f64,
    pub comparisons: Vec<PosthocComparison>,
}

/// Compares each algorithm's average rank against the control's using
/// the normal approximation for rank differences over `n_rows` paired
/// trials, then applies the step-up adjustment across the comparisons.
pub fn hommel_posthoc(
    average_ranks: &[f64],
    n_rows: usize,
    control: usize,
    alpha: f64,
) -> PosthocTable {
    let k = average_ranks.len();
    assert!(control < k, "control column out of range");
    assert!(n_rows >= 1);
    let se = (k as f64 * (k as f64 + 1.0) / (6.0 * n_rows as f64)).sqrt();
    let others: Vec<usize> = (0..k).filter(|&i| i != control).collect();
    let zs: Vec<f64> = others
        .iter()
        .map(|&i| (average_ranks[i] - average_ranks[control]) / se)
        .collect();
    let raw: Vec<f64> = zs.iter().map(|&z| normal_two_sided_p(z)).collect();
    let adjusted = hommel_adjust(&raw);
    let comparisons = others
        .iter()
        .zip(zs.iter().zip(raw.iter().zip(&adjusted)))
        .map(|(&index, (&z, (&p_raw, &p_adjusted)))| PosthocComparison {
            index,
            z,
            p_raw,
            p_adjusted,
            rejected: p_adjusted <= alpha,
        })
        .collect();
    PosthocTable {
        control,
        alpha,
        comparisons,
    }
}

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Pairwise performance contrasts over a datasets × algorithms matrix:
/// each pair's difference is summarized by its median over datasets,
/// averaged per algorithm, and differenced into an antisymmetric k × k
/// table. Entry `[i][j] > 0` means algorithm `i` scored higher than `j`.
pub fn contrast_estimation(performance: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = performance.len();
    assert!(rows >= 2, "need at least two datasets");
    let k = performance[0].len();
    assert!(
        performance.iter().all(|row| row.len() == k),
        "rows must have equal width"
    );
    let mut pair_medians = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut diffs: Vec<f64> =
                performance.iter().map(|row| row[i] - row[j]).collect();
            pair_medians[i][j] = median(&mut diffs);
        }
    }
    let means: Vec<f64> = (0..k)
        .map(|i| pair_medians[i].iter().sum::<f64>() / k as f64)
        .collect();
    (0..k)
        .map(|i| (0..k).map(|j| means[i] - means[j]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn log_gamma_matches_known_values() {
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(1.0)).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
        // Recurrence Γ(x+1) = xΓ(x) across the reflection boundary.
        for x in [0.1, 0.3, 0.7, 1.5, 3.25, 10.0] {
            let lhs = ln_gamma(x + 1.0);
            let rhs = x.ln() + ln_gamma(x);
            assert!((lhs - rhs).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn incomplete_gamma_halves_sum_to_one() {
        for s in [0.5, 1.0, 2.5, 7.0] {
            for x in [0.1, 0.5, 2.0, 5.0, 20.0] {
                let total = regularized_gamma_p(s, x) + regularized_gamma_q(s, x);
                assert!((total - 1.0).abs() < 1e-12, "s = {s}, x = {x}");
            }
        }
    }

    #[test]
    fn chi_square_tail_matches_closed_forms() {
        // Two degrees of freedom: survival is exactly exp(−x/2).
        for x in [0.5, 1.0, 3.0, 6.5333, 12.0] {
            assert!((chi_square_sf(x, 2) - (-x / 2.0).exp()).abs() < 1e-12);
        }
        // Six degrees of freedom: the Poisson partial sum.
        let x = 5.0f64;
        let h = x / 2.0;
        let expect = (-h).exp() * (1.0 + h + h * h / 2.0);
        assert!((chi_square_sf(x, 6) - expect).abs() < 1e-12);
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
        assert!(chi_square_sf(100.0, 3) < 1e-18);
    }

    #[test]
    fn normal_tail_areas_are_consistent_and_calibrated() {
        assert_eq!(normal_two_sided_p(0.0), 1.0);
        // The 97.5th percentile by definition gives a 5% two-sided area.
        let z = 1.959_963_984_540_054;
        assert!((normal_two_sided_p(z) - 0.05).abs() < 1e-10);
        assert!((standard_normal_cdf(1.644_853_626_951_472_2) - 0.95).abs() < 1e-10);
        for z in [-2.3, -0.4, 0.0, 0.7, 3.1] {
            let direct = normal_two_sided_p(z);
            let via_cdf = 2.0 * (1.0 - standard_normal_cdf(z.abs()));
            assert!((direct - via_cdf).abs() < 1e-12, "z = {z}");
            let sym = standard_normal_cdf(z) + standard_normal_cdf(-z);
            assert!((sym - 1.0).abs() < 1e-12);
        }
        assert!(normal_two_sided_p(5.0) < 1e-6);
        assert!(normal_two_sided_p(5.0) > 1e-7);
    }

    #[test]
    fn midranks_average_tied_positions() {
        assert_eq!(midranks(&[3.0, 1.0, 4.0, 1.0, 5.0]), vec![3.0, 1.5, 4.0, 1.5, 5.0]);
        assert_eq!(midranks(&[2.0, 2.0, 2.0]), vec![2.0, 2.0, 2.0]);
        let mut rng = stream(17, &[0x4A4B]);
        for _ in 0..200 {
            let k = rng.random_range(2..8);
            // Coarse rounding forces frequent ties.
            let row: Vec<f64> = (0..k)
                .map(|_| (rng.random::<f64>() * 4.0).round())
                .collect();
            let ranks = midranks(&row);
            let sum: f64 = ranks.iter().sum();
            let expect = (k * (k + 1)) as f64 / 2.0;
            assert!((sum - expect).abs() < 1e-9, "row {row:?}");
        }
    }

    #[test]
    fn friedman_matches_the_hand_worked_table() {
        // Ranks per row: [1,2,3], [2,1,3], [1.5,1.5,3], [1,2,3].
        // Average ranks: 1.375, 1.625, 3. Base statistic:
        // 12·4/(3·4)·(13.53125 − 12) = 6.125; one tie pair gives
        // correction 1 − 6/96 = 0.9375, so 6.125/0.9375 = 6.53333…
        let results = vec![
            vec![0.10, 0.20, 0.30],
            vec![0.25, 0.15, 0.40],
            vec![0.20, 0.20, 0.50],
            vec![0.05, 0.35, 0.60],
        ];
        let out = friedman(&results);
        assert_eq!(out.average_ranks, vec![1.375, 1.625, 3.0]);
        assert!((out.statistic - 6.125 / 0.9375).abs() < 1e-9);
        assert!((out.p_value - (-out.statistic / 2.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn fully_tied_results_give_zero_statistic() {
        let identical_rows = vec![vec![0.5, 0.5, 0.5]; 4];
        let out = friedman(&identical_rows);
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, 1.0);
        // Identical columns with distinct rows: ranks all equal too.
        let identical_cols = vec![
            vec![0.1, 0.1, 0.1],
            vec![0.7, 0.7, 0.7],
            vec![0.3, 0.3, 0.3],
        ];
        let out = friedman(&identical_cols);
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, 1.0);
        assert!(out.average_ranks.iter().all(|&r| r == 2.0));
    }

    #[test]
    fn friedman_flags_a_clearly_dominant_column() {
        let mut rng = stream(23, &[0xF12D]);
        let results: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                vec![
                    0.01 + 0.01 * rng.random::<f64>(),
                    0.30 + 0.05 * rng.random::<f64>(),
                    0.35 + 0.05 * rng.random::<f64>(),
                ]
            })
            .collect();
        let out = friedman(&results);
        assert!(out.p_value < 0.001, "p = {}", out.p_value);
        assert!(out.average_ranks[0] < out.average_ranks[1]);
    }

    #[test]
    fn equal_p_values_adjust_to_themselves() {
        let adjusted = hommel_adjust(&[0.02; 5]);
        for a in adjusted {
            assert!((a - 0.02).abs() < 1e-15);
        }
        assert_eq!(hommel_adjust(&[0.3]), vec![0.3]);
    }

    #[test]
    fn pair_adjustment_uses_the_stepup_rule() {
        let adjusted = hommel_adjust(&[0.01, 0.4]);
        assert!((adjusted[0] - 0.02).abs() < 1e-15);
        assert!((adjusted[1] - 0.4).abs() < 1e-15);
        let adjusted = hommel_adjust(&[0.4, 0.3]);
        assert!((adjusted[0] - 0.4).abs() < 1e-15);
        assert!((adjusted[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn adjusted_ps_sit_between_raw_and_bonferroni() {
        let mut rng = stream(29, &[0xB0F]);
        for _ in 0..200 {
            let n = rng.random_range(2..9);
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let adjusted = hommel_adjust(&raw);
            for (r, a) in raw.iter().zip(&adjusted) {
                assert!(*a >= *r - 1e-15, "adjusted below raw");
                let bonferroni = (n as f64 * r).min(1.0);
                assert!(*a <= bonferroni + 1e-12, "adjusted above Bonferroni");
            }
            // Monotone along the raw ordering.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap());
            for pair in order.windows(2) {
                assert!(adjusted[pair[0]] <= adjusted[pair[1]] + 1e-12);
            }
        }
    }

    #[test]
    fn posthoc_never_rejects_an_equal_rank() {
        let ranks = [1.5, 1.5, 4.0, 5.0];
        let table = hommel_posthoc(&ranks, 12, 0, 0.05);
        assert_eq!(table.comparisons.len(), 3);
        let equal = &table.comparisons[0];
        assert_eq!(equal.index, 1);
        assert_eq!(equal.z, 0.0);
        assert_eq!(equal.p_raw, 1.0);
        assert!(!equal.rejected);
    }

    #[test]
    fn posthoc_rejects_a_dominated_algorithm() {
        // Control clearly best over ten paired trials.
        let ranks = [1.3, 5.9, 5.2, 2.3, 2.4, 4.0];
        let table = hommel_posthoc(&ranks, 10, 0, 0.05);
        let worst = table.comparisons.iter().find(|c| c.index == 1).unwrap();
        let se: f64 = (6.0f64 * 7.0 / (6.0 * 10.0)).sqrt();
        assert!((worst.z - (5.9 - 1.3) / se).abs() < 1e-12);
        assert!(worst.p_adjusted <= 5.0 * worst.p_raw + 1e-15);
        assert!(worst.rejected);
        for c in &table.comparisons {
            assert!(c.p_adjusted >= c.p_raw - 1e-15);
        }
    }

    #[test]
    fn contrast_matches_hand_computed_medians() {
        let performance = vec![
            vec![1.0, 2.0, 4.0],
            vec![2.0, 3.0, 3.5],
            vec![0.5, 2.5, 5.0],
        ];
        let table = contrast_estimation(&performance);
        // Pair medians: D01 = −1, D02 = −3, D12 = −2, so the row means
        // are −4/3, −1/3, 5/3.
        assert!((table[0][1] - (-1.0)).abs() < 1e-12);
        assert!((table[0][2] - (-3.0)).abs() < 1e-12);
        assert!((table[1][2] - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn contrast_is_antisymmetric_with_zero_diagonal() {
        let mut rng = stream(31, &[0xC0]);
        let performance: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.random::<f64>() * 100.0).collect())
            .collect();
        let table = contrast_estimation(&performance);
        for i in 0..4 {
            assert_eq!(table[i][i], 0.0);
            for j in 0..4 {
                assert!((table[i][j] + table[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_algorithms_contrast_to_zero() {
        let performance = vec![vec![3.0, 3.0], vec![5.0, 5.0], vec![4.0, 4.0]];
        let table = contrast_estimation(&performance);
        assert_eq!(table, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }
}
