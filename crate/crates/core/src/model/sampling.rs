use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SequenceSet, SetLabel};
use crate::par;
use crate::seed::SeedStream;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingOverrides {
    /// Replaces the median rule for the per-dataset targeting size.
    pub desired_dataset_size: Option<usize>,
    pub targeting_total: Option<usize>,
    pub reference_total: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub desired_dataset_size: usize,
    pub k: usize,
    pub seed: u64,
    pub override_targeting_total: Option<usize>,
    pub override_reference_total: Option<usize>,
    /// `(dataset index, quota)` in dataset order.
    pub targeting_quotas: Vec<(usize, usize)>,
    pub reference_quotas: Vec<(usize, usize)>,
}

impl SamplingPlan {
    pub fn targeting_total(&self) -> usize {
        self.targeting_quotas.iter().map(|q| q.1).sum()
    }

    pub fn reference_total(&self) -> usize {
        self.reference_quotas.iter().map(|q| q.1).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledIteration {
    pub iteration_index: usize,
    /// Sorted record indices into the sampled set; repeats mark duplication.
    pub targeting_indices: Vec<usize>,
    pub reference_indices: Vec<usize>,
}

impl SampledIteration {
    /// Targeting then reference indices.
    pub fn all_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.targeting_indices.iter().chain(&self.reference_indices).copied()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("the targeting set is empty")]
    EmptyTargeting,
    #[error("the reference set is empty")]
    EmptyReference,
    #[error("k must be at least 1")]
    ZeroIterations,
    #[error("sampling sizes must be positive")]
    ZeroSize,
}

/// Median with the even case resolved as the half-up mean of the middle two.
pub fn median_half_up(sizes: &[usize]) -> Option<usize> {
    if sizes.is_empty() {
        return None;
    }
    let mut s = sizes.to_vec();
    s.sort_unstable();
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]).div_ceil(2) })
}

/// Splits `total` over `datasets` as ceil(total / n) each, trimming the tail
/// so the quotas sum to `total` exactly.
fn ceil_then_trim(datasets: &[usize], total: usize) -> Vec<(usize, usize)> {
    let each = total.div_ceil(datasets.len());
    let mut left = total;
    datasets
        .iter()
        .map(|&d| {
            let q = each.min(left);
            left -= q;
            (d, q)
        })
        .collect()
}

pub fn plan_sampling(
    set: &SequenceSet,
    k: usize,
    seed: u64,
    overrides: SamplingOverrides,
) -> Result<SamplingPlan, SamplingError> {
    if k == 0 {
        return Err(SamplingError::ZeroIterations);
    }
    let indexed = |label: SetLabel| -> Vec<usize> {
        set.datasets().iter().enumerate().filter(|(_, d)| d.label == label).map(|(i, _)| i).collect()
    };
    let tds = indexed(SetLabel::Targeting);
    let rds = indexed(SetLabel::Reference);
    if tds.is_empty() {
        return Err(SamplingError::EmptyTargeting);
    }
    if rds.is_empty() {
        return Err(SamplingError::EmptyReference);
    }
    let sizes: Vec<usize> = tds.iter().map(|&d| set.datasets()[d].members.len()).collect();
    let desired = overrides.desired_dataset_size.unwrap_or_else(|| median_half_up(&sizes).expect("nonempty"));
    let t_total = overrides.targeting_total.unwrap_or(desired * tds.len());
    let r_total = overrides.reference_total.unwrap_or(t_total);
    if desired == 0 || t_total == 0 || r_total == 0 {
        return Err(SamplingError::ZeroSize);
    }
    let targeting_quotas = match overrides.targeting_total {
        Some(t) => ceil_then_trim(&tds, t),
        None => tds.iter().map(|&d| (d, desired)).collect(),
    };
    Ok(SamplingPlan {
        desired_dataset_size: desired,
        k,
        seed,
        override_targeting_total: overrides.targeting_total,
        override_reference_total: overrides.reference_total,
        targeting_quotas,
        reference_quotas: ceil_then_trim(&rds, r_total),
    })
}

fn draw<R: rand::Rng>(members: &[usize], quota: usize, rng: &mut R, out: &mut Vec<usize>) {
    let n = members.len();
    if quota == 0 || n == 0 {
        return;
    }
    if n < quota {
        for _ in 0..quota / n {
            out.extend_from_slice(members);
        }
    }
    let rest = if n >= quota { quota } else { quota % n };
    for i in index::sample(rng, n, rest) {
        out.push(members[i]);
    }
}

/// Draws all `k` iterations. Iteration `i` depends only on the plan seed and
/// `i`.
pub fn sample_iterations(plan: &SamplingPlan, set: &SequenceSet) -> Vec<SampledIteration> {
    let seeds = SeedStream::new(plan.seed);
    par::map_range(plan.k, |i| {
        let mut rng = seeds.rng("sampling", i as u64);
        let mut pick = |quotas: &[(usize, usize)]| {
            let mut out = Vec::new();
            for &(d, q) in quotas {
                draw(&set.datasets()[d].members, q, &mut rng, &mut out);
            }
            out.sort_unstable();
            out
        };
        let targeting_indices = pick(&plan.targeting_quotas);
        let reference_indices = pick(&plan.reference_quotas);
        SampledIteration { iteration_index: i, targeting_indices, reference_indices }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SequenceRecord;
    use proptest::prelude::*;

    fn set_with(targeting: &[usize], reference: &[usize]) -> SequenceSet {
        let mut recs = Vec::new();
        for (label, sizes) in [(SetLabel::Targeting, targeting), (SetLabel::Reference, reference)] {
            for (d, &n) in sizes.iter().enumerate() {
                for j in 0..n {
                    recs.push(SequenceRecord {
                        id: format!("{label}-{d}-{j}"),
                        dataset_id: format!("{label}-{d}"),
                        set_label: label,
                        heavy: Some("EVQL".into()),
                        light: None,
                        species_hint: None,
                    });
                }
            }
        }
        SequenceSet::new(recs).unwrap()
    }

    #[test]
    fn median_rule() {
        assert_eq!(median_half_up(&[16, 64, 43, 12, 12, 11, 1, 1]), Some(12));
        assert_eq!(median_half_up(&[7]), Some(7));
        assert_eq!(median_half_up(&[1, 2]), Some(2));
        assert_eq!(median_half_up(&[3, 1, 2]), Some(2));
    }

    #[test]
    fn plan_defaults_and_overrides() {
        let s = set_with(&[16, 64, 43, 12, 12, 11, 1, 1], &[200, 180]);
        let p = plan_sampling(&s, 100, 1, SamplingOverrides::default()).unwrap();
        assert_eq!(p.desired_dataset_size, 12);
        assert_eq!(p.targeting_total(), 96);
        assert_eq!(p.reference_quotas.iter().map(|q| q.1).collect::<Vec<_>>(), [48, 48]);

        let s1 = set_with(&[7], &[3]);
        let p = plan_sampling(&s1, 1, 1, SamplingOverrides::default()).unwrap();
        assert_eq!((p.desired_dataset_size, p.targeting_total()), (7, 7));

        let o = SamplingOverrides { targeting_total: Some(160), ..Default::default() };
        let p = plan_sampling(&s, 100, 1, o).unwrap();
        assert_eq!((p.targeting_total(), p.reference_total()), (160, 160));
    }

    #[test]
    fn reference_quota_is_ceil_then_trim() {
        let s = set_with(&[10], &[5, 5, 5]);
        let p = plan_sampling(&s, 1, 1, SamplingOverrides::default()).unwrap();
        assert_eq!(p.reference_quotas.iter().map(|q| q.1).collect::<Vec<_>>(), [4, 4, 2]);
    }

    #[test]
    fn errors() {
        let s = set_with(&[], &[3]);
        assert_eq!(plan_sampling(&s, 1, 1, Default::default()), Err(SamplingError::EmptyTargeting));
        let s = set_with(&[3], &[]);
        assert_eq!(plan_sampling(&s, 1, 1, Default::default()), Err(SamplingError::EmptyReference));
        let s = set_with(&[3], &[3]);
        assert_eq!(plan_sampling(&s, 0, 1, Default::default()), Err(SamplingError::ZeroIterations));
    }

    #[test]
    fn exact_quota_takes_everything() {
        let s = set_with(&[3], &[3]);
        let p = plan_sampling(&s, 4, 9, Default::default()).unwrap();
        for it in sample_iterations(&p, &s) {
            assert_eq!(it.targeting_indices, [0, 1, 2]);
            assert_eq!(it.reference_indices, [3, 4, 5]);
        }
    }

    #[test]
    fn small_dataset_is_cycled() {
        let s = set_with(&[5], &[2]);
        let p = plan_sampling(&s, 10, 3, Default::default()).unwrap();
        for it in sample_iterations(&p, &s) {
            assert_eq!(it.reference_indices.len(), 5);
            for r in [5, 6] {
                let c = it.reference_indices.iter().filter(|&&x| x == r).count();
                assert!(c == 2 || c == 3, "{c}");
            }
        }
    }

    proptest! {
        #[test]
        fn deterministic_and_conserving(
            t in proptest::collection::vec(1usize..20, 1..5),
            r in proptest::collection::vec(1usize..20, 1..5),
            seed in any::<u64>(),
            k in 1usize..4,
        ) {
            let s = set_with(&t, &r);
            let p = plan_sampling(&s, k, seed, Default::default()).unwrap();
            let a = sample_iterations(&p, &s);
            let b = sample_iterations(&p, &s);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.len(), k);
            for it in &a {
                prop_assert_eq!(it.targeting_indices.len(), p.desired_dataset_size * t.len());
                prop_assert_eq!(it.reference_indices.len(), it.targeting_indices.len());
                for &i in &it.targeting_indices {
                    prop_assert_eq!(s.records()[i].set_label, SetLabel::Targeting);
                }
                for &i in &it.reference_indices {
                    prop_assert_eq!(s.records()[i].set_label, SetLabel::Reference);
                }
            }
        }
    }
}
