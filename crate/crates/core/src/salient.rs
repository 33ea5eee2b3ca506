//! Feature values that separate the targeting set from the reference set.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fingerprint::{Feature, FeatureFingerprint, FeatureVocabulary};
use crate::forest::{ForestConfig, RandomForest};
use crate::par;
use crate::seed::SeedStream;
use crate::simstats::midranks;

pub const SIGNIFICANCE: f64 = 0.05;
pub const BIASING_THRESHOLD: f64 = 0.5;
/// Relative slack when comparing table probabilities in the two-sided test.
const FET_SLACK: f64 = 1e-7;

/// Counts of records with and without a feature, per set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// Targeting with the feature.
    pub a: u64,
    /// Targeting without.
    pub b: u64,
    /// Reference with.
    pub c: u64,
    /// Reference without.
    pub d: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sided {
    #[default]
    TwoSided,
    /// Targeting enriched.
    Greater,
}

impl FromStr for Sided {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "two-sided" | "two_sided" => Ok(Sided::TwoSided),
            "greater" => Ok(Sided::Greater),
            o => Err(format!("unknown FET alternative {o:?}")),
        }
    }
}

/// Hypergeometric tail sums with a cached log-factorial table.
#[derive(Debug, Clone)]
pub struct Fisher {
    ln_fact: Vec<f64>,
}

impl Fisher {
    pub fn new(max_total: usize) -> Self {
        let mut ln_fact = Vec::with_capacity(max_total + 1);
        ln_fact.push(0.0);
        for i in 1..=max_total {
            ln_fact.push(ln_fact[i - 1] + (i as f64).ln());
        }
        Fisher { ln_fact }
    }

    fn ln_fact(&mut self, n: usize) -> f64 {
        while self.ln_fact.len() <= n {
            let i = self.ln_fact.len();
            self.ln_fact.push(self.ln_fact[i - 1] + (i as f64).ln());
        }
        self.ln_fact[n]
    }

    pub fn p_value(&mut self, t: ContingencyTable, sided: Sided) -> f64 {
        let (r1, r2) = ((t.a + t.b) as usize, (t.c + t.d) as usize);
        let c1 = (t.a + t.c) as usize;
        let n = r1 + r2;
        let base = self.ln_fact(r1) + self.ln_fact(r2) + self.ln_fact(c1) + self.ln_fact(n - c1) - self.ln_fact(n);
        let lo = c1.saturating_sub(r2);
        let hi = r1.min(c1);
        let mut ln_p = |x: usize| -> f64 {
            base - self.ln_fact(x) - self.ln_fact(r1 - x) - self.ln_fact(c1 - x) - self.ln_fact(r2 + x - c1)
        };
        let obs = t.a as usize;
        let p_obs = ln_p(obs).exp();
        let (mut sum, mut all) = (0.0, true);
        for x in lo..=hi {
            let p = ln_p(x).exp();
            let keep = match sided {
                Sided::TwoSided => p <= p_obs * (1.0 + FET_SLACK),
                Sided::Greater => x >= obs,
            };
            if keep {
                sum += p;
            } else {
                all = false;
            }
        }
        if all {
            1.0
        } else {
            sum.min(1.0)
        }
    }
}

pub fn fisher_exact(t: ContingencyTable, sided: Sided) -> f64 {
    Fisher::new((t.a + t.b + t.c + t.d) as usize).p_value(t, sided)
}

/// Rows of one sampled iteration; `y` is true for targeting.
#[derive(Debug, Clone)]
pub struct LabelledRows<'a> {
    pub x: Vec<&'a FeatureFingerprint>,
    pub y: Vec<bool>,
}

impl LabelledRows<'_> {
    pub fn width(&self) -> usize {
        self.x.first().map_or(0, |f| f.width())
    }

    pub fn has_both_classes(&self) -> bool {
        self.y.iter().any(|&v| v) && self.y.iter().any(|&v| !v)
    }

    pub fn table(&self, column: usize) -> ContingencyTable {
        let mut t = ContingencyTable { a: 0, b: 0, c: 0, d: 0 };
        for (x, &y) in self.x.iter().zip(&self.y) {
            match (y, x.get(column)) {
                (true, true) => t.a += 1,
                (true, false) => t.b += 1,
                (false, true) => t.c += 1,
                (false, false) => t.d += 1,
            }
        }
        t
    }
}

/// FET p-value per column for one iteration.
pub fn fet_iteration(rows: &LabelledRows<'_>, sided: Sided) -> Vec<f64> {
    let mut fisher = Fisher::new(rows.x.len());
    (0..rows.width()).map(|c| fisher.p_value(rows.table(c), sided)).collect()
}

/// FET p-values averaged over iterations, per column.
pub fn fet_screen(iterations: &[LabelledRows<'_>], sided: Sided) -> Vec<f64> {
    let per = par::map_slice(iterations, |r| fet_iteration(r, sided));
    average_columns(&per)
}

fn average_columns(rows: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut acc = vec![0.0; first.len()];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= rows.len() as f64);
    acc
}

/// Importance ranks, 1 for the most important, ties sharing midranks.
pub fn importance_ranks(importance: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = importance.iter().map(|v| -v).collect();
    midranks(&neg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    pub avg_importance: Vec<f64>,
    pub avg_rank: Vec<f64>,
    /// Iterations that had both classes and so trained a forest.
    pub iterations_used: usize,
}

/// Forest importance per iteration, averaged. Iteration `i` seeds its forest
/// from `seeds.child("forest", i)`; single-class iterations are skipped.
pub fn rf_importance(iterations: &[LabelledRows<'_>], config: &ForestConfig, seeds: &SeedStream) -> ImportanceSummary {
    let width = iterations.iter().map(|r| r.width()).max().unwrap_or(0);
    let active: Vec<usize> = (0..width).collect();
    let per = par::map_range(iterations.len(), |i| {
        let r = &iterations[i];
        if !r.has_both_classes() {
            log::warn!("iteration {i} has a single class; skipped for forest importance");
            return None;
        }
        let f = RandomForest::fit(&r.x, &r.y, &active, config, &seeds.child("forest", i as u64));
        let imp = f.importance().to_vec();
        let rank = importance_ranks(&imp);
        Some((imp, rank))
    });
    let used: Vec<(Vec<f64>, Vec<f64>)> = per.into_iter().flatten().collect();
    let imps: Vec<Vec<f64>> = used.iter().map(|(i, _)| i.clone()).collect();
    let ranks: Vec<Vec<f64>> = used.iter().map(|(_, r)| r.clone()).collect();
    ImportanceSummary {
        avg_importance: if imps.is_empty() { vec![0.0; width] } else { average_columns(&imps) },
        avg_rank: if ranks.is_empty() { vec![0.0; width] } else { average_columns(&ranks) },
        iterations_used: used.len(),
    }
}

/// Rule deciding which averaged importances count as important.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum ImportanceCutoff {
    /// Above the mean importance across features.
    #[default]
    Mean,
    Above(f64),
}

impl FromStr for ImportanceCutoff {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mean" => Ok(ImportanceCutoff::Mean),
            v => v
                .parse()
                .map(ImportanceCutoff::Above)
                .map_err(|_| format!("importance cutoff must be 'mean' or a number, got {v:?}")),
        }
    }
}

impl ImportanceCutoff {
    pub fn threshold(&self, importance: &[f64]) -> f64 {
        match *self {
            ImportanceCutoff::Mean => importance.iter().sum::<f64>() / importance.len().max(1) as f64,
            ImportanceCutoff::Above(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrequency {
    pub targeting: f64,
    pub reference: f64,
}

impl FeatureFrequency {
    pub fn difference(&self) -> f64 {
        (self.targeting - self.reference).abs()
    }
}

/// Fraction of records in each set carrying each feature. A set with no
/// records reports 0.
pub fn feature_frequencies(x: &[&FeatureFingerprint], y: &[bool]) -> Vec<FeatureFrequency> {
    let width = x.first().map_or(0, |f| f.width());
    let nt = y.iter().filter(|&&v| v).count().max(1) as f64;
    let nr = y.iter().filter(|&&v| !v).count().max(1) as f64;
    let mut out = vec![FeatureFrequency { targeting: 0.0, reference: 0.0 }; width];
    for (fp, &is_t) in x.iter().zip(y) {
        for c in fp.ones() {
            if is_t {
                out[c].targeting += 1.0;
            } else {
                out[c].reference += 1.0;
            }
        }
    }
    for f in &mut out {
        f.targeting /= nt;
        f.reference /= nr;
    }
    out
}

/// Columns whose frequency difference exceeds `threshold` strictly.
pub fn detect_biasing(freqs: &[FeatureFrequency], threshold: f64) -> Vec<usize> {
    (0..freqs.len()).filter(|&i| freqs[i].difference() > threshold).collect()
}

/// Pairwise feature co-occurrence (Jaccard over records) within one set.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    width: usize,
    values: Vec<f64>,
    /// Pairs (f < g) where neither feature occurs; scored 0.
    pub empty_pairs: usize,
}

impl AssociationMatrix {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, f: usize, g: usize) -> f64 {
        self.values[f * self.width + g]
    }

    /// Pairs `(f, g)`, f < g, with coefficient strictly above `threshold`.
    pub fn strong_pairs(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for f in 0..self.width {
            for g in f + 1..self.width {
                if self.get(f, g) > threshold {
                    out.push((f, g, self.get(f, g)));
                }
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, vocab: &FeatureVocabulary, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["feature".to_string()];
        header.extend(vocab.features().iter().map(|f| f.to_string()));
        w.write_record(&header)?;
        for (f, feat) in vocab.features().iter().enumerate() {
            let mut row = vec![feat.to_string()];
            row.extend((0..self.width).map(|g| format!("{:.6}", self.get(f, g))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn feature_association(x: &[&FeatureFingerprint]) -> AssociationMatrix {
    let width = x.first().map_or(0, |f| f.width());
    let words = x.len().div_ceil(64);
    // transpose: one record bitset per feature
    let mut cols = vec![vec![0u64; words]; width];
    for (r, fp) in x.iter().enumerate() {
        for c in fp.ones() {
            cols[c][r / 64] |= 1 << (r % 64);
        }
    }
    let rows = par::map_range(width, |f| {
        (0..width)
            .map(|g| {
                let (mut both, mut any) = (0u32, 0u32);
                for (p, q) in cols[f].iter().zip(&cols[g]) {
                    both += (p & q).count_ones();
                    any += (p | q).count_ones();
                }
                (any > 0).then(|| f64::from(both) / f64::from(any))
            })
            .collect::<Vec<_>>()
    });
    let mut empty_pairs = 0;
    let mut values = Vec::with_capacity(width * width);
    for (f, row) in rows.into_iter().enumerate() {
        for (g, v) in row.into_iter().enumerate() {
            if v.is_none() && f < g {
                empty_pairs += 1;
            }
            values.push(v.unwrap_or(0.0));
        }
    }
    AssociationMatrix { width, values, empty_pairs }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientRow {
    pub feature: Feature,
    pub avg_p: f64,
    pub fet_significant: bool,
    pub avg_importance: f64,
    pub avg_rank: f64,
    pub rf_important: bool,
    pub freq_targeting: f64,
    pub freq_reference: f64,
    pub biasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalientParams {
    pub sided: Sided,
    pub cutoff: ImportanceCutoff,
    pub biasing_threshold: f64,
}

impl Default for SalientParams {
    fn default() -> Self {
        SalientParams { sided: Sided::TwoSided, cutoff: ImportanceCutoff::Mean, biasing_threshold: BIASING_THRESHOLD }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SalientIoError {
    #[error("salient report line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub const SALIENT_HEADER: [&str; 10] = [
    "segment",
    "label",
    "avg_p",
    "fet_significant",
    "avg_importance",
    "avg_rank",
    "rf_important",
    "freq_targeting",
    "freq_reference",
    "biasing",
];

/// One row per vocabulary feature, in vocabulary order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientReport {
    pub rows: Vec<SalientRow>,
}

impl SalientReport {
    pub fn build(
        vocab: &FeatureVocabulary,
        avg_p: &[f64],
        importance: &ImportanceSummary,
        freqs: &[FeatureFrequency],
        params: &SalientParams,
    ) -> SalientReport {
        let cut = params.cutoff.threshold(&importance.avg_importance);
        let rows = vocab
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| SalientRow {
                feature: f.clone(),
                avg_p: avg_p[i],
                fet_significant: avg_p[i] < SIGNIFICANCE,
                avg_importance: importance.avg_importance[i],
                avg_rank: importance.avg_rank[i],
                rf_important: importance.avg_importance[i] > cut,
                freq_targeting: freqs[i].targeting,
                freq_reference: freqs[i].reference,
                biasing: freqs[i].difference() > params.biasing_threshold,
            })
            .collect();
        SalientReport { rows }
    }

    pub fn find(&self, feature: &Feature) -> Option<&SalientRow> {
        self.rows.iter().find(|r| &r.feature == feature)
    }

    pub fn fet_significant(&self) -> impl Iterator<Item = &SalientRow> {
        self.rows.iter().filter(|r| r.fet_significant)
    }

    pub fn rf_important(&self) -> impl Iterator<Item = &SalientRow> {
        self.rows.iter().filter(|r| r.rf_important)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SALIENT_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.feature.segment.as_str().to_string(),
                r.feature.label.clone(),
                format!("{:e}", r.avg_p),
                r.fet_significant.to_string(),
                format!("{:.6}", r.avg_importance),
                format!("{:.3}", r.avg_rank),
                r.rf_important.to_string(),
                format!("{:.6}", r.freq_targeting),
                format!("{:.6}", r.freq_reference),
                r.biasing.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<SalientReport, SalientIoError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        if rdr.headers()?.iter().ne(SALIENT_HEADER) {
            return Err(SalientIoError::Format { line: 1, message: "unexpected header".into() });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |message: String| SalientIoError::Format { line, message };
            let num = |k: usize| rec[k].parse::<f64>().map_err(|e| bad(format!("{}: {e}", SALIENT_HEADER[k])));
            let flag = |k: usize| rec[k].parse::<bool>().map_err(|e| bad(format!("{}: {e}", SALIENT_HEADER[k])));
            rows.push(SalientRow {
                feature: Feature::new(rec[0].parse().map_err(bad)?, &rec[1]),
                avg_p: num(2)?,
                fet_significant: flag(3)?,
                avg_importance: num(4)?,
                avg_rank: num(5)?,
                rf_important: flag(6)?,
                freq_targeting: num(7)?,
                freq_reference: num(8)?,
                biasing: flag(9)?,
            });
        }
        Ok(SalientReport { rows })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub common: Vec<Feature>,
    pub a_only: Vec<Feature>,
    pub b_only: Vec<Feature>,
}

fn overlap(a: &[&Feature], b: &[&Feature]) -> Overlap {
    let sa: HashSet<&Feature> = a.iter().copied().collect();
    let sb: HashSet<&Feature> = b.iter().copied().collect();
    Overlap {
        common: a.iter().filter(|f| sb.contains(*f)).map(|f| (*f).clone()).collect(),
        a_only: a.iter().filter(|f| !sb.contains(*f)).map(|f| (*f).clone()).collect(),
        b_only: b.iter().filter(|f| !sa.contains(*f)).map(|f| (*f).clone()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientComparison {
    pub fet: Overlap,
    pub importance: Overlap,
    /// Features salient under both methods.
    pub both_methods: Overlap,
}

/// Matches features on (segment, label); vocabularies may differ.
pub fn compare_salient(a: &SalientReport, b: &SalientReport) -> SalientComparison {
    let pick = |r: &SalientReport, p: fn(&SalientRow) -> bool| -> Vec<Feature> {
        r.rows.iter().filter(|x| p(x)).map(|x| x.feature.clone()).collect()
    };
    let run = |p: fn(&SalientRow) -> bool| {
        let (fa, fb) = (pick(a, p), pick(b, p));
        overlap(&fa.iter().collect::<Vec<_>>(), &fb.iter().collect::<Vec<_>>())
    };
    SalientComparison {
        fet: run(|r| r.fet_significant),
        importance: run(|r| r.rf_important),
        both_methods: run(|r| r.fet_significant && r.rf_important),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::Segment;
    use proptest::prelude::*;

    fn t(a: u64, b: u64, c: u64, d: u64) -> ContingencyTable {
        ContingencyTable { a, b, c, d }
    }

    fn binom(n: u64, k: u64) -> u128 {
        (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
    }

    /// Exact rational enumeration of every table with the same margins.
    fn enumerate(tb: ContingencyTable, sided: Sided) -> f64 {
        let (r1, r2, c1) = (tb.a + tb.b, tb.c + tb.d, tb.a + tb.c);
        let w = |x: u64| binom(r1, x) * binom(r2, c1 - x);
        let lo = c1.saturating_sub(r2);
        let hi = r1.min(c1);
        let total: u128 = (lo..=hi).map(w).sum();
        let obs = w(tb.a);
        let hit: u128 = (lo..=hi)
            .filter(|&x| match sided {
                Sided::TwoSided => w(x) <= obs,
                Sided::Greater => x >= tb.a,
            })
            .map(w)
            .sum();
        hit as f64 / total as f64
    }

    #[test]
    fn fisher_examples() {
        assert!((fisher_exact(t(5, 5, 5, 5), Sided::TwoSided) - 1.0).abs() < 1e-12);
        let want = 2.0 / binom(20, 10) as f64;
        assert!((fisher_exact(t(10, 0, 0, 10), Sided::TwoSided) - want).abs() < 1e-15);
        assert!((fisher_exact(t(10, 0, 0, 10), Sided::TwoSided) - 1.0825e-5).abs() < 1e-9);
        assert_eq!(fisher_exact(t(0, 7, 0, 9), Sided::TwoSided), 1.0);
        assert!((fisher_exact(t(10, 0, 0, 10), Sided::Greater) - want / 2.0).abs() < 1e-15);
    }

    #[test]
    fn all_targeting_none_reference_hits_the_corner() {
        let (nt, nr) = (8u64, 12u64);
        let rows_fp: Vec<FeatureFingerprint> =
            (0..nt + nr).map(|i| FeatureFingerprint::from_bits(&[i < nt, true])).collect();
        let rows = LabelledRows { x: rows_fp.iter().collect(), y: (0..nt + nr).map(|i| i < nt).collect() };
        let p = fet_screen(&[rows], Sided::Greater);
        assert!((p[0] - 1.0 / binom(nt + nr, nt) as f64).abs() < 1e-15);
        assert_eq!(p[1], 1.0);
    }

    #[test]
    fn biasing_is_strict() {
        let f = |a, b| FeatureFrequency { targeting: a, reference: b };
        let freqs = [f(0.925, 0.0526), f(0.75, 0.25), f(0.3, 0.3), f(0.1, 0.9)];
        assert_eq!(detect_biasing(&freqs, 0.5), [0, 3]);
    }

    #[test]
    fn frequencies_and_association() {
        let x: Vec<FeatureFingerprint> =
            [[true, true, false], [true, true, false], [false, false, false], [true, false, false]]
                .iter()
                .map(|b| FeatureFingerprint::from_bits(b))
                .collect();
        let refs: Vec<_> = x.iter().collect();
        let fr = feature_frequencies(&refs, &[true, true, false, false]);
        assert_eq!(fr[0], FeatureFrequency { targeting: 1.0, reference: 0.5 });
        let m = feature_association(&refs);
        assert_eq!(m.get(0, 0), 1.0);
        assert!((m.get(0, 1) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.get(1, 0), m.get(0, 1));
        assert_eq!(m.get(2, 2), 0.0);
        assert_eq!(m.empty_pairs, 0);
        let dup = feature_association(&[&FeatureFingerprint::from_bits(&[true, true])]);
        assert_eq!(dup.get(0, 1), 1.0);
    }

    #[test]
    fn report_round_trip_and_compare() {
        let vocab = FeatureVocabulary::new(vec![
            Feature::new(Segment::GermHV, "IGHV3-23"),
            Feature::new(Segment::Motif, "2_YG"),
            Feature::new(Segment::PiBin, "3.5-7"),
        ]);
        let imp = ImportanceSummary {
            avg_importance: vec![0.6, 0.3, 0.1],
            avg_rank: vec![1.0, 2.0, 3.0],
            iterations_used: 1,
        };
        let f = |a, b| FeatureFrequency { targeting: a, reference: b };
        let report = SalientReport::build(
            &vocab,
            &[4.51e-60, 0.01, 0.4],
            &imp,
            &[f(0.925, 0.0526), f(0.3, 0.1), f(0.5, 0.5)],
            &SalientParams::default(),
        );
        assert!(report.rows[0].fet_significant && report.rows[0].rf_important && report.rows[0].biasing);
        assert!(!report.rows[2].fet_significant && !report.rows[2].rf_important);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let back = SalientReport::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows.len(), 3);
        assert_eq!(back.rows[0].avg_p, 4.51e-60);
        assert_eq!(back.rows[1].feature, report.rows[1].feature);
        let same = compare_salient(&report, &back);
        assert!(same.fet.a_only.is_empty() && same.fet.b_only.is_empty());
        assert_eq!(same.both_methods.common.len(), 1);
        let empty = SalientReport { rows: vec![] };
        assert!(compare_salient(&report, &empty).fet.common.is_empty());
    }

    proptest! {
        #[test]
        fn fisher_matches_enumeration(a in 0u64..12, b in 0u64..12, c in 0u64..10, d in 0u64..10) {
            let tb = t(a, b, c, d);
            for sided in [Sided::TwoSided, Sided::Greater] {
                prop_assert!((fisher_exact(tb, sided) - enumerate(tb, sided)).abs() < 1e-9);
            }
        }

        #[test]
        fn two_sided_is_label_symmetric(a in 0u64..15, b in 0u64..15, c in 0u64..15, d in 0u64..15) {
            let p = fisher_exact(t(a, b, c, d), Sided::TwoSided);
            let q = fisher_exact(t(c, d, a, b), Sided::TwoSided);
            prop_assert!((p - q).abs() < 1e-9);
        }

        #[test]
        fn biasing_monotone(fs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..20), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let freqs: Vec<_> = fs.iter().map(|&(a, b)| FeatureFrequency { targeting: a, reference: b }).collect();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(detect_biasing(&freqs, hi).len() <= detect_biasing(&freqs, lo).len());
        }

        #[test]
        fn association_symmetric(rows in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 5), 1..70)) {
            let x: Vec<_> = rows.iter().map(|b| FeatureFingerprint::from_bits(b)).collect();
            let m = feature_association(&x.iter().collect::<Vec<_>>());
            for f in 0..5 {
                let present = x.iter().any(|r| r.get(f));
                prop_assert_eq!(m.get(f, f), if present { 1.0 } else { 0.0 });
                for g in 0..5 {
                    prop_assert_eq!(m.get(f, g), m.get(g, f));
                    prop_assert!((0.0..=1.0).contains(&m.get(f, g)));
                }
            }
        }
    }
}
