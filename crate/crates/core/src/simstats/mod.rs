//! Similarity matrices and the two rank-sum tests run per sampled iteration.

mod heatmap;
mod ranksum;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use heatmap::{dataset_grouped_order, render_heatmap, write_heatmap_png, write_matrix_csv};
pub use ranksum::{midranks, rank_sum_one_tailed, u_statistic};

use crate::fingerprint::{FeatureFingerprint, FeatureVocabulary, Segment};
use crate::model::SetLabel;
use crate::numbering::{ChainType, NumberedChain};
use crate::par;
use crate::residue::SubstitutionTable;

/// Score for a position occupied in only one chain.
pub const DEFAULT_GAP_SCORE: i32 = -4;
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    HeavySeq,
    LightSeq,
    Fingerprint,
}

impl MatrixKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MatrixKind::HeavySeq => "heavy",
            MatrixKind::LightSeq => "light",
            MatrixKind::Fingerprint => "fingerprint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixLabel {
    pub id: String,
    pub dataset_id: String,
    pub set_label: SetLabel,
}

/// Square matrix of scores in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub kind: MatrixKind,
    pub labels: Vec<MatrixLabel>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(kind: MatrixKind, labels: Vec<MatrixLabel>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), labels.len() * labels.len(), "matrix must be square");
        SimilarityMatrix { kind, labels, values }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows and columns `idx`, in that order, without renormalising.
    pub fn select(&self, idx: &[usize]) -> SimilarityMatrix {
        let mut values = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            values.extend(idx.iter().map(|&j| self.get(i, j)));
        }
        SimilarityMatrix { kind: self.kind, labels: idx.iter().map(|&i| self.labels[i].clone()).collect(), values }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("cannot score a {0} chain against a {1} chain")]
    ChainTypeMismatch(ChainType, ChainType),
    /// Every raw score is equal. Carries a matrix of 1.0 for callers that
    /// choose to continue.
    #[error("all raw scores equal {raw}; min-max rescaling is undefined")]
    Degenerate { raw: i64, fallback: Box<SimilarityMatrix> },
    #[error("need at least 2 {0} members, found {1}")]
    Insufficient(SetLabel, usize),
    #[error("matrices disagree on labels")]
    LabelMismatch,
    #[error("need at least 2 records, found {0}")]
    TooFew(usize),
}

/// Position-wise score over the union of occupied Chothia positions.
pub fn raw_pair_score(
    a: &NumberedChain,
    b: &NumberedChain,
    table: &SubstitutionTable,
    gap_score: i32,
) -> Result<i64, SimError> {
    if a.chain_type != b.chain_type {
        return Err(SimError::ChainTypeMismatch(a.chain_type, b.chain_type));
    }
    Ok(merge_score(a.residues(), b.residues(), table, gap_score))
}

fn merge_score(
    a: &[(crate::ChothiaPosition, u8)],
    b: &[(crate::ChothiaPosition, u8)],
    table: &SubstitutionTable,
    gap: i32,
) -> i64 {
    let (mut i, mut j, mut s) = (0, 0, 0i64);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Equal => {
                s += i64::from(table.score(a[i].1, b[j].1));
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                s += i64::from(gap);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                s += i64::from(gap);
                j += 1;
            }
        }
    }
    s + i64::from(gap) * (a.len() - i + b.len() - j) as i64
}

/// Raw pair scores for every ordered pair of chains, computed once and
/// rescaled per subset. A missing chain scores as an empty one.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScoreMatrix {
    n: usize,
    values: Vec<i64>,
}

impl RawScoreMatrix {
    pub fn compute(
        chains: &[Option<&NumberedChain>],
        table: &SubstitutionTable,
        gap_score: i32,
    ) -> Result<Self, SimError> {
        let mut kind: Option<ChainType> = None;
        for c in chains.iter().flatten() {
            match kind {
                Some(k) if k != c.chain_type => return Err(SimError::ChainTypeMismatch(k, c.chain_type)),
                _ => kind = Some(c.chain_type),
            }
        }
        let n = chains.len();
        let rows = par::map_range(n, |i| {
            let a = chains[i].map_or(&[][..], |c| c.residues());
            (0..n)
                .map(|j| {
                    let b = chains[j].map_or(&[][..], |c| c.residues());
                    merge_score(a, b, table, gap_score)
                })
                .collect::<Vec<_>>()
        });
        Ok(RawScoreMatrix { n, values: rows.concat() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.values[i * self.n + j]
    }
}

/// Min-max rescaled sequence similarity over the records `idx` (duplicates
/// allowed). The min and max run over all ordered pairs, self-pairs included.
pub fn sequence_similarity_matrix(
    raw: &RawScoreMatrix,
    idx: &[usize],
    labels: Vec<MatrixLabel>,
    kind: MatrixKind,
) -> Result<SimilarityMatrix, SimError> {
    assert_eq!(idx.len(), labels.len());
    if idx.len() < 2 {
        return Err(SimError::TooFew(idx.len()));
    }
    let (mut lo, mut hi) = (i64::MAX, i64::MIN);
    for &i in idx {
        for &j in idx {
            let v = raw.get(i, j);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let m = idx.len();
    if lo == hi {
        return Err(SimError::Degenerate {
            raw: lo,
            fallback: Box::new(SimilarityMatrix::new(kind, labels, vec![1.0; m * m])),
        });
    }
    let span = (hi - lo) as f64;
    let mut values = Vec::with_capacity(m * m);
    for &i in idx {
        values.extend(idx.iter().map(|&j| (raw.get(i, j) - lo) as f64 / span));
    }
    Ok(SimilarityMatrix::new(kind, labels, values))
}

/// How segments empty in both fingerprints enter the average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmptySegments {
    #[default]
    Exclude,
    CountAsOne,
}

fn segment_ranges(vocab: &FeatureVocabulary) -> Vec<Range<usize>> {
    Segment::ALL.iter().map(|&s| vocab.segment_range(s)).collect()
}

fn jaccard_mean(
    a: &FeatureFingerprint,
    b: &FeatureFingerprint,
    ranges: &[Range<usize>],
    empty: EmptySegments,
) -> Option<f64> {
    let (mut sum, mut used, mut nonempty) = (0.0, 0usize, false);
    for r in ranges {
        let (both, any) = a.overlap_in(b, r.clone());
        if any > 0 {
            sum += both as f64 / any as f64;
            used += 1;
            nonempty = true;
        } else if empty == EmptySegments::CountAsOne {
            sum += 1.0;
            used += 1;
        }
    }
    nonempty.then(|| sum / used as f64)
}

/// Mean per-segment Jaccard index, all segments weighted 1. `None` when
/// both fingerprints are empty in every segment.
pub fn fingerprint_similarity(
    a: &FeatureFingerprint,
    b: &FeatureFingerprint,
    vocab: &FeatureVocabulary,
    empty: EmptySegments,
) -> Option<f64> {
    jaccard_mean(a, b, &segment_ranges(vocab), empty)
}

/// Fingerprint similarity for every pair. Undefined pairs score 0 and are
/// counted in the second return value.
pub fn fingerprint_similarity_matrix(
    fps: &[&FeatureFingerprint],
    labels: Vec<MatrixLabel>,
    vocab: &FeatureVocabulary,
    empty: EmptySegments,
) -> (SimilarityMatrix, usize) {
    assert_eq!(fps.len(), labels.len());
    let ranges = segment_ranges(vocab);
    let n = fps.len();
    let rows = par::map_range(n, |i| (0..n).map(|j| jaccard_mean(fps[i], fps[j], &ranges, empty)).collect::<Vec<_>>());
    let mut undefined = 0;
    let mut values = Vec::with_capacity(n * n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            if v.is_none() && i < j {
                undefined += 1;
            }
            values.push(v.unwrap_or(0.0));
        }
    }
    if undefined > 0 {
        log::warn!("{undefined} fingerprint pairs have no features in any segment; scored 0");
    }
    (SimilarityMatrix::new(MatrixKind::Fingerprint, labels, values), undefined)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub test: String,
    pub alternative: String,
    pub p_values: Vec<f64>,
    pub significant: bool,
}

impl TestSummary {
    pub fn from_p_values(test: &str, alternative: &str, p_values: Vec<f64>) -> Self {
        let significant = !p_values.is_empty() && p_values.iter().all(|&p| p < SIGNIFICANCE);
        TestSummary { test: test.into(), alternative: alternative.into(), p_values, significant }
    }

    pub fn mean_p(&self) -> f64 {
        self.p_values.iter().sum::<f64>() / self.p_values.len().max(1) as f64
    }

    pub fn max_p(&self) -> f64 {
        self.p_values.iter().copied().fold(0.0, f64::max)
    }
}

pub const WITHIN_SET: &str = "within_set";
pub const WITHIN_SET_ALT: &str = "within-targeting similarity greater than within-reference";
pub const CHAIN_FEATURE: &str = "chain_feature_correlation";
pub const CHAIN_FEATURE_ALT: &str = "|light - fingerprint| greater than |heavy - fingerprint|";

/// Off-diagonal within-set scores (i < j) for one label.
pub fn within_scores(m: &SimilarityMatrix, label: SetLabel) -> Vec<f64> {
    let members: Vec<usize> = (0..m.n()).filter(|&i| m.labels[i].set_label == label).collect();
    let mut out = Vec::with_capacity(members.len() * members.len().saturating_sub(1) / 2);
    for (x, &i) in members.iter().enumerate() {
        for &j in &members[x + 1..] {
            out.push(m.get(i, j));
        }
    }
    out
}

/// One iteration of the within-set test.
pub fn within_set_p(m: &SimilarityMatrix) -> Result<f64, SimError> {
    for label in [SetLabel::Targeting, SetLabel::Reference] {
        let c = m.labels.iter().filter(|l| l.set_label == label).count();
        if c < 2 {
            return Err(SimError::Insufficient(label, c));
        }
    }
    Ok(rank_sum_one_tailed(&within_scores(m, SetLabel::Targeting), &within_scores(m, SetLabel::Reference)))
}

pub fn within_set_test(matrices: &[SimilarityMatrix]) -> Result<TestSummary, SimError> {
    let p = matrices.iter().map(within_set_p).collect::<Result<Vec<_>, _>>()?;
    Ok(TestSummary::from_p_values(WITHIN_SET, WITHIN_SET_ALT, p))
}

fn same_ids(a: &SimilarityMatrix, b: &SimilarityMatrix) -> bool {
    a.n() == b.n() && a.labels.iter().zip(&b.labels).all(|(x, y)| x.id == y.id)
}

/// One iteration of the chain/feature correlation test.
pub fn chain_feature_p(
    heavy: &SimilarityMatrix,
    light: &SimilarityMatrix,
    fp: &SimilarityMatrix,
) -> Result<f64, SimError> {
    if !same_ids(heavy, fp) || !same_ids(light, fp) {
        return Err(SimError::LabelMismatch);
    }
    let n = fp.n();
    if n < 2 {
        return Err(SimError::TooFew(n));
    }
    let pairs = n * (n - 1) / 2;
    let (mut dh, mut dl) = (Vec::with_capacity(pairs), Vec::with_capacity(pairs));
    for i in 0..n {
        for j in i + 1..n {
            let f = fp.get(i, j);
            dh.push((heavy.get(i, j) - f).abs());
            dl.push((light.get(i, j) - f).abs());
        }
    }
    Ok(rank_sum_one_tailed(&dl, &dh))
}

pub fn chain_feature_correlation_test(
    iterations: &[(SimilarityMatrix, SimilarityMatrix, SimilarityMatrix)],
) -> Result<TestSummary, SimError> {
    let p = iterations.iter().map(|(h, l, f)| chain_feature_p(h, l, f)).collect::<Result<Vec<_>, _>>()?;
    Ok(TestSummary::from_p_values(CHAIN_FEATURE, CHAIN_FEATURE_ALT, p))
}
