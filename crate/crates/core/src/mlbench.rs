//! Cross-validated ROC/AUC for three classifiers over feature subsets.

use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::fingerprint::{FeatureFingerprint, FeatureVocabulary, Segment};
use crate::forest::{ForestConfig, RandomForest};
use crate::par;
use crate::salient::LabelledRows;
use crate::seed::SeedStream;

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum MlError {
    #[error("feature mask {0:?} selects no columns")]
    EmptyMask(String),
    #[error("training data holds a single class")]
    SingleClass,
    #[error("ROC needs both classes among the labels")]
    RocSingleClass,
    #[error("iteration {0}: a class has fewer than 2 members, cannot cross-validate")]
    TooFewForFolds(usize),
    #[error("unknown feature mask {0:?}")]
    UnknownMask(String),
}

/// Named subset of fingerprint columns a model may see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub name: String,
    pub columns: Vec<usize>,
}

impl FeatureMask {
    pub fn new(name: &str, columns: Vec<usize>) -> Result<Self, MlError> {
        if columns.is_empty() {
            return Err(MlError::EmptyMask(name.into()));
        }
        Ok(FeatureMask { name: name.into(), columns })
    }

    pub fn segments(name: &str, vocab: &FeatureVocabulary, keep: impl Fn(Segment) -> bool) -> Result<Self, MlError> {
        let cols = (0..vocab.len()).filter(|&c| keep(vocab.segment_of(c))).collect();
        Self::new(name, cols)
    }

    /// Every column except `excluded`.
    pub fn excluding(name: &str, vocab: &FeatureVocabulary, excluded: &[usize]) -> Result<Self, MlError> {
        let cols = (0..vocab.len()).filter(|c| !excluded.contains(c)).collect();
        Self::new(name, cols)
    }

    /// The segment-based masks: `all`, `germline`, `canonical`, `pi`, `motif`.
    pub fn named(name: &str, vocab: &FeatureVocabulary) -> Result<Self, MlError> {
        match name {
            "all" => Self::segments(name, vocab, |_| true),
            "germline" => Self::segments(name, vocab, |s| s.is_germline()),
            "canonical" => Self::segments(name, vocab, |s| s.is_canonical()),
            "pi" => Self::segments(name, vocab, |s| s == Segment::PiBin),
            "motif" => Self::segments(name, vocab, |s| s == Segment::Motif),
            o => Err(MlError::UnknownMask(o.into())),
        }
    }
}

pub const SEGMENT_MASKS: [&str; 5] = ["all", "germline", "canonical", "pi", "motif"];
pub const NO_BIASING_MASK: &str = "no-biasing";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    LinearSvm,
    RandomForest,
    AdaBoost,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::LinearSvm, Model::RandomForest, Model::AdaBoost];

    pub fn as_str(&self) -> &'static str {
        match self {
            Model::LinearSvm => "svm",
            Model::RandomForest => "random_forest",
            Model::AdaBoost => "adaboost",
        }
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Model::ALL.into_iter().find(|m| m.as_str() == s.trim()).ok_or_else(|| format!("unknown model {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 1.0, tol: 1e-6, max_epochs: 2000 }
    }
}

/// Linear hinge-loss SVM with a bias column, solved in the dual by cyclic
/// coordinate descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    /// Weights per masked column, then the bias.
    pub w: Vec<f64>,
}

fn dense(x: &FeatureFingerprint, cols: &[usize]) -> Vec<f64> {
    let mut v: Vec<f64> = cols.iter().map(|&c| if x.get(c) { 1.0 } else { 0.0 }).collect();
    v.push(1.0);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSvm {
    pub fn fit(x: &[&FeatureFingerprint], y: &[bool], cols: &[usize], cfg: &SvmConfig) -> LinearSvm {
        let xs: Vec<Vec<f64>> = x.iter().map(|r| dense(r, cols)).collect();
        let ys: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
        let q: Vec<f64> = xs.iter().map(|v| dot(v, v)).collect();
        let mut alpha = vec![0.0; xs.len()];
        let mut w = vec![0.0; cols.len() + 1];
        for _ in 0..cfg.max_epochs {
            let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..xs.len() {
                let g = ys[i] * dot(&w, &xs[i]) - 1.0;
                let pg = if alpha[i] == 0.0 {
                    g.min(0.0)
                } else if alpha[i] == cfg.c {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg != 0.0 {
                    let old = alpha[i];
                    alpha[i] = (old - g / q[i]).clamp(0.0, cfg.c);
                    let d = (alpha[i] - old) * ys[i];
                    for (wk, xk) in w.iter_mut().zip(&xs[i]) {
                        *wk += d * xk;
                    }
                }
            }
            if pg_max - pg_min < cfg.tol {
                break;
            }
        }
        LinearSvm { w }
    }

    pub fn margin(&self, x: &FeatureFingerprint, cols: &[usize]) -> f64 {
        dot(&self.w, &dense(x, cols))
    }
}

pub const ADABOOST_ROUNDS: usize = 50;

/// `polarity` when the bit is set, `-polarity` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub column: usize,
    pub polarity: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoost {
    pub stumps: Vec<Stump>,
}

impl AdaBoost {
    pub fn fit(x: &[&FeatureFingerprint], y: &[bool], cols: &[usize], rounds: usize) -> AdaBoost {
        let n = x.len();
        let ys: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
        let mut w = vec![1.0 / n as f64; n];
        let mut stumps = Vec::new();
        for _ in 0..rounds {
            // weighted error of polarity +1 for each column; -1 has 1 - err
            let mut best: Option<(f64, usize, f64)> = None;
            for &c in cols {
                let err: f64 = (0..n).filter(|&i| (if x[i].get(c) { 1.0 } else { -1.0 }) != ys[i]).map(|i| w[i]).sum();
                for (e, pol) in [(err, 1.0), (1.0 - err, -1.0)] {
                    if best.is_none_or(|(b, _, _)| e < b - 1e-15) {
                        best = Some((e, c, pol));
                    }
                }
            }
            let Some((err, column, polarity)) = best else { break };
            if err >= 0.5 - 1e-12 {
                break;
            }
            let eps = err.max(1e-10);
            let alpha = 0.5 * ((1.0 - eps) / eps).ln();
            stumps.push(Stump { column, polarity, alpha });
            if err <= 0.0 {
                break;
            }
            let mut total = 0.0;
            for i in 0..n {
                let h = if x[i].get(column) { polarity } else { -polarity };
                w[i] *= (-alpha * ys[i] * h).exp();
                total += w[i];
            }
            w.iter_mut().for_each(|v| *v /= total);
        }
        AdaBoost { stumps }
    }

    pub fn score(&self, x: &FeatureFingerprint) -> f64 {
        self.stumps.iter().map(|s| s.alpha * if x.get(s.column) { s.polarity } else { -s.polarity }).sum()
    }
}

/// Trains `model` on the masked columns and scores `test`; larger means
/// more likely targeting.
pub fn train_score(
    model: Model,
    train_x: &[&FeatureFingerprint],
    train_y: &[bool],
    test_x: &[&FeatureFingerprint],
    mask: &FeatureMask,
    forest: &ForestConfig,
    seeds: &SeedStream,
) -> Result<Vec<f64>, MlError> {
    if !(train_y.iter().any(|&v| v) && train_y.iter().any(|&v| !v)) {
        return Err(MlError::SingleClass);
    }
    let cols = &mask.columns;
    Ok(match model {
        Model::LinearSvm => {
            let svm = LinearSvm::fit(train_x, train_y, cols, &SvmConfig::default());
            test_x.iter().map(|x| svm.margin(x, cols)).collect()
        }
        Model::RandomForest => {
            let f = RandomForest::fit(train_x, train_y, cols, forest, seeds);
            test_x.iter().map(|x| f.predict_proba(x)).collect()
        }
        Model::AdaBoost => {
            let a = AdaBoost::fit(train_x, train_y, cols, ADABOOST_ROUNDS);
            test_x.iter().map(|x| a.score(x)).collect()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false positive rate, true positive rate) from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Threshold sweep over distinct scores; tied scores move diagonally.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve, MlError> {
    assert_eq!(scores.len(), labels.len());
    let np = labels.iter().filter(|&&v| v).count() as f64;
    let nn = labels.len() as f64 - np;
    if np == 0.0 || nn == 0.0 {
        return Err(MlError::RocSingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut auc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            k += 1;
        }
        let (x0, y0) = *points.last().unwrap();
        let (x1, y1) = (fp / nn, tp / np);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve { points, auc })
}

/// Fold index per row: each class shuffled, then dealt round-robin.
pub fn stratified_folds(y: &[bool], folds: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut out = vec![0; y.len()];
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        for (k, i) in idx.into_iter().enumerate() {
            out[i] = k % folds;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub model: Model,
    pub mask: String,
    pub folds: usize,
    pub per_iteration_auc: Vec<f64>,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// Pooled held-out ROC of the first iteration.
    pub roc: RocCurve,
}

/// Pooled held-out AUC per iteration, averaged. Iteration `i` draws its folds
/// and models from `seeds.child("cv", i)`.
pub fn cross_validated_auc(
    iterations: &[LabelledRows<'_>],
    model: Model,
    mask: &FeatureMask,
    folds: usize,
    forest: &ForestConfig,
    seeds: &SeedStream,
) -> Result<CvResult, MlError> {
    let per = par::map_range(iterations.len(), |it| -> Result<(RocCurve, usize), MlError> {
        let rows = &iterations[it];
        let minority = rows.y.iter().filter(|&&v| v).count().min(rows.y.iter().filter(|&&v| !v).count());
        if minority < 2 {
            return Err(MlError::TooFewForFolds(it));
        }
        let k = if minority < folds {
            log::warn!("iteration {it}: smallest class has {minority} rows; using {minority} folds");
            minority
        } else {
            folds
        };
        let s = seeds.child("cv", it as u64);
        let assign = stratified_folds(&rows.y, k, &mut s.rng("folds", 0));
        let mut scores = vec![0.0; rows.x.len()];
        for f in 0..k {
            let (mut tx, mut ty, mut vx, mut vi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (i, &fold) in assign.iter().enumerate() {
                if fold == f {
                    vx.push(rows.x[i]);
                    vi.push(i);
                } else {
                    tx.push(rows.x[i]);
                    ty.push(rows.y[i]);
                }
            }
            let sc = train_score(model, &tx, &ty, &vx, mask, forest, &s.child("fold", f as u64))?;
            for (i, v) in vi.into_iter().zip(sc) {
                scores[i] = v;
            }
        }
        Ok((roc_curve(&scores, &rows.y)?, k))
    });
    let per = per.into_iter().collect::<Result<Vec<_>, _>>()?;
    let aucs: Vec<f64> = per.iter().map(|(r, _)| r.auc).collect();
    let n = aucs.len().max(1) as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let var = aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let (roc, used_folds) =
        per.into_iter().next().unwrap_or((RocCurve { points: vec![(0.0, 0.0), (1.0, 1.0)], auc: 0.5 }, folds));
    Ok(CvResult {
        model,
        mask: mask.name.clone(),
        folds: used_folds,
        per_iteration_auc: aucs,
        mean_auc: mean,
        std_auc: var.sqrt(),
        roc,
    })
}

pub const BENCH_HEADER: [&str; 5] = ["model", "mask", "mean_auc", "std_auc", "iterations"];

pub fn write_bench_csv<W: Write>(results: &[CvResult], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_HEADER)?;
    for r in results {
        w.write_record([
            r.model.as_str().to_string(),
            r.mask.clone(),
            format!("{:.6}", r.mean_auc),
            format!("{:.6}", r.std_auc),
            r.per_iteration_auc.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::Feature;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut s, mut n) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    n += 1.0;
                    s += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        s / n
    }

    fn random_rows(n: usize, width: usize, seed: u64, signal: Option<usize>) -> (Vec<FeatureFingerprint>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = i % 2 == 0;
            let mut bits: Vec<bool> = (0..width).map(|_| rng.random_bool(0.5)).collect();
            if let Some(c) = signal {
                bits[c] = y;
            }
            xs.push(FeatureFingerprint::from_bits(&bits));
            ys.push(if signal.is_some() { y } else { rng.random_bool(0.5) });
        }
        (xs, ys)
    }

    #[test]
    fn roc_edge_cases() {
        let l = [true, true, false, false];
        assert_eq!(roc_curve(&[4.0, 3.0, 2.0, 1.0], &l).unwrap().auc, 1.0);
        assert_eq!(roc_curve(&[1.0, 2.0, 3.0, 4.0], &l).unwrap().auc, 0.0);
        let flat = roc_curve(&[1.0; 4], &l).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points, [(0.0, 0.0), (1.0, 1.0)]);
        assert!(matches!(roc_curve(&[1.0, 2.0], &[true, true]), Err(MlError::RocSingleClass)));
    }

    #[test]
    fn stratified_fold_sizes() {
        let y: Vec<bool> = (0..53).map(|i| i % 3 == 0).collect();
        let f = stratified_folds(&y, 10, &mut ChaCha8Rng::seed_from_u64(1));
        for class in [true, false] {
            let mut sizes = [0usize; 10];
            for i in (0..y.len()).filter(|&i| y[i] == class) {
                sizes[f[i]] += 1;
            }
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn svm_separates_held_out_points() {
        let (xs, ys) = random_rows(80, 10, 3, Some(4));
        let refs: Vec<_> = xs.iter().collect();
        let cols: Vec<usize> = (0..10).collect();
        let svm = LinearSvm::fit(&refs[..60], &ys[..60], &cols, &SvmConfig::default());
        for i in 60..80 {
            assert_eq!(svm.margin(&xs[i], &cols) > 0.0, ys[i], "row {i}");
        }
    }

    #[test]
    fn adaboost_stops_on_perfect_stump() {
        let (xs, ys) = random_rows(40, 6, 4, Some(2));
        let refs: Vec<_> = xs.iter().collect();
        let a = AdaBoost::fit(&refs, &ys, &(0..6).collect::<Vec<_>>(), ADABOOST_ROUNDS);
        assert_eq!(a.stumps.len(), 1);
        assert_eq!(a.stumps[0].column, 2);
        assert!(refs.iter().zip(&ys).all(|(x, &y)| (a.score(x) > 0.0) == y));
    }

    #[test]
    fn forest_votes_follow_a_pure_rule() {
        let (xs, ys) = random_rows(40, 1, 5, Some(0));
        let refs: Vec<_> = xs.iter().collect();
        let mask = FeatureMask::new("m", vec![0]).unwrap();
        let probe = [FeatureFingerprint::from_bits(&[true]), FeatureFingerprint::from_bits(&[false])];
        let s = train_score(
            Model::RandomForest,
            &refs,
            &ys,
            &probe.iter().collect::<Vec<_>>(),
            &mask,
            &ForestConfig::default(),
            &SeedStream::new(1),
        )
        .unwrap();
        assert_eq!(s, [1.0, 0.0]);
    }

    #[test]
    fn cross_validation_bounds() {
        let (xs, ys) = random_rows(100, 8, 6, Some(1));
        let rows = LabelledRows { x: xs.iter().collect(), y: ys.clone() };
        let vocab =
            FeatureVocabulary::new((0..8).map(|i| Feature::new(Segment::Motif, format!("{}_AA", i + 1))).collect());
        let all = FeatureMask::named("all", &vocab).unwrap();
        for model in Model::ALL {
            let r = cross_validated_auc(
                std::slice::from_ref(&rows),
                model,
                &all,
                10,
                &ForestConfig::default(),
                &SeedStream::new(2),
            )
            .unwrap();
            assert!(r.mean_auc > 0.99, "{model:?} {}", r.mean_auc);
        }
        assert!(matches!(FeatureMask::named("germline", &vocab), Err(MlError::EmptyMask(_))));
    }

    #[test]
    fn random_labels_give_chance_auc() {
        let (xs, ys) = random_rows(400, 12, 7, None);
        let rows = LabelledRows { x: xs.iter().collect(), y: ys };
        let mask = FeatureMask::new("all", (0..12).collect()).unwrap();
        let r =
            cross_validated_auc(&[rows], Model::LinearSvm, &mask, 10, &ForestConfig::default(), &SeedStream::new(3))
                .unwrap();
        assert!((0.42..=0.58).contains(&r.mean_auc), "{}", r.mean_auc);
    }

    #[test]
    fn small_class_reduces_folds() {
        let (xs, _) = random_rows(12, 4, 8, None);
        let y: Vec<bool> = (0..12).map(|i| i < 3).collect();
        let rows = LabelledRows { x: xs.iter().collect(), y };
        let mask = FeatureMask::new("all", (0..4).collect()).unwrap();
        let r = cross_validated_auc(&[rows], Model::AdaBoost, &mask, 10, &ForestConfig::default(), &SeedStream::new(3))
            .unwrap();
        assert_eq!(r.folds, 3);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_count(pairs in proptest::collection::vec((0u8..20, any::<bool>()), 2..200)) {
            let scores: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            if labels.iter().any(|&v| v) && labels.iter().any(|&v| !v) {
                let roc = roc_curve(&scores, &labels).unwrap();
                prop_assert!((roc.auc - brute_auc(&scores, &labels)).abs() < 1e-9);
                for w in roc.points.windows(2) {
                    prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
                }
                prop_assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
                // strictly monotone transform
                let t: Vec<f64> = scores.iter().map(|s| (s * 0.3).exp() - 7.0).collect();
                prop_assert!((roc_curve(&t, &labels).unwrap().auc - roc.auc).abs() < 1e-12);
            }
        }

        #[test]
        fn masked_columns_do_not_matter(
            rows in proptest::collection::vec((proptest::collection::vec(any::<bool>(), 6), any::<bool>()), 4..30),
            model in proptest::sample::select(Model::ALL.to_vec()),
        ) {
            let ys: Vec<bool> = rows.iter().map(|r| r.1).collect();
            prop_assume!(ys.iter().any(|&v| v) && ys.iter().any(|&v| !v));
            let full: Vec<_> = rows.iter().map(|r| FeatureFingerprint::from_bits(&r.0)).collect();
            let zeroed: Vec<_> = rows
                .iter()
                .map(|r| FeatureFingerprint::from_bits(&[r.0[0], false, r.0[2], false, r.0[4], false]))
                .collect();
            let removed: Vec<_> = rows.iter().map(|r| FeatureFingerprint::from_bits(&[r.0[0], r.0[2], r.0[4]])).collect();
            let cfg = ForestConfig { n_trees: 5, ..ForestConfig::default() };
            let seeds = SeedStream::new(4);
            let run = |x: &[FeatureFingerprint], m: &FeatureMask| {
                let r: Vec<_> = x.iter().collect();
                train_score(model, &r, &ys, &r, m, &cfg, &seeds).unwrap()
            };
            let a = run(&full, &FeatureMask::new("m", vec![0, 2, 4]).unwrap());
            let b = run(&zeroed, &FeatureMask::new("m", vec![0, 2, 4]).unwrap());
            let c = run(&removed, &FeatureMask::new("m", vec![0, 1, 2]).unwrap());
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(&a, &c);
        }
    }
}
