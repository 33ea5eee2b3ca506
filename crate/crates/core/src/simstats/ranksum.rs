use statrs::function::erf::erfc;

/// Largest smaller-sample size that still uses the exact distribution.
pub const EXACT_MAX_SMALL: usize = 8;
/// Largest combined size for the exact distribution.
pub const EXACT_MAX_TOTAL: usize = 200;

/// Midranks of `values` (1-based), ties sharing the mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Mann-Whitney U of `a` against `b`: pairs with a > b, ties counted half.
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = midranks(&all);
    let ra: f64 = r[..a.len()].iter().sum();
    ra - (a.len() * (a.len() + 1)) as f64 / 2.0
}

/// One-sided p-value for the alternative "`a` tends to be larger than `b`",
/// i.e. P(U >= u_obs) under random relabelling.
///
/// The exact permutation distribution (with ties) is used when the smaller
/// sample has at most 8 members and the total is at most 200; otherwise the
/// normal approximation with tie-corrected variance and a 0.5 continuity
/// correction. Panics on an empty sample.
pub fn rank_sum_one_tailed(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "rank-sum needs two nonempty samples");
    if a.len().min(b.len()) <= EXACT_MAX_SMALL && a.len() + b.len() <= EXACT_MAX_TOTAL {
        exact_upper(a, b)
    } else {
        normal_upper(a, b)
    }
}

fn exact_upper(a: &[f64], b: &[f64]) -> f64 {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let doubled: Vec<usize> = midranks(&all).iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let obs_a: usize = doubled[..a.len()].iter().sum();
    // count subsets of the smaller size by doubled rank sum
    let (m, target_small, small_is_a) =
        if a.len() <= b.len() { (a.len(), obs_a, true) } else { (b.len(), total - obs_a, false) };
    let max_sum: usize = {
        let mut d = doubled.clone();
        d.sort_unstable_by(|x, y| y.cmp(x));
        d[..m].iter().sum()
    };
    let mut ways = vec![vec![0f64; max_sum + 1]; m + 1];
    ways[0][0] = 1.0;
    for &d in &doubled {
        for k in (1..=m).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (d..=max_sum).rev() {
                if prev[s - d] != 0.0 {
                    cur[s] += prev[s - d];
                }
            }
        }
    }
    let dist = &ways[m];
    let all_ways: f64 = dist.iter().sum();
    // R_a >= obs  <=>  R_small >= obs (small is a)  or  R_small <= total - obs (small is b)
    let tail: f64 = if small_is_a {
        dist.iter().enumerate().filter(|(s, _)| *s >= target_small).map(|(_, w)| w).sum()
    } else {
        dist.iter().enumerate().filter(|(s, _)| *s <= target_small).map(|(_, w)| w).sum()
    };
    (tail / all_ways).min(1.0)
}

fn normal_upper(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let u = u_statistic(a, b);
    let mut sorted: Vec<f64> = a.iter().chain(b).copied().collect();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = (u - n1 * n2 / 2.0 - 0.5) / var.sqrt();
    (0.5 * erfc(z / std::f64::consts::SQRT_2)).clamp(0.0, 1.0)
}
