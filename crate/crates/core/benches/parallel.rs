//! Default rayon pool against a single-thread pool on the hot loops.
//!
//! Build with `--no-default-features` to time the plain-iterator fallback.

use std::path::Path;

use abprofile_core::fingerprint::{Feature, FeatureVocabulary, Segment};
use abprofile_core::forest::ForestConfig;
use abprofile_core::model::{parse_sequences, InputFormat};
use abprofile_core::numbering::{BoundaryTable, Numberer, ProfileSet};
use abprofile_core::par;
use abprofile_core::residue::{ResiduePolicy, SubstitutionTable};
use abprofile_core::salient::{fet_screen, rf_importance, LabelledRows, Sided};
use abprofile_core::seed::SeedStream;
use abprofile_core::simstats::{fingerprint_similarity_matrix, EmptySegments, MatrixLabel, RawScoreMatrix};
use abprofile_core::{ChainType, FeatureFingerprint, NumberedChain, SetLabel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

const POOLS: [(&str, Option<usize>); 2] = [("sequential", Some(1)), ("parallel", None)];

struct Rows {
    x: Vec<FeatureFingerprint>,
    y: Vec<bool>,
    vocab: FeatureVocabulary,
}

/// Fingerprints with a handful of informative columns, spread over segments.
fn rows(n: usize, width: usize) -> Rows {
    let mut rng = SeedStream::new(1).rng("bench", 0);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let t = i % 2 == 0;
        let bits: Vec<bool> = (0..width).map(|c| rng.random_bool(if c < 5 && t { 0.8 } else { 0.2 })).collect();
        x.push(FeatureFingerprint::from_bits(&bits));
        y.push(t);
    }
    let features = (0..width).map(|c| Feature::new(Segment::ALL[c % Segment::ALL.len()], format!("f{c}"))).collect();
    Rows { x, y, vocab: FeatureVocabulary::from_ordered(features) }
}

fn iterations(r: &Rows, k: usize) -> Vec<LabelledRows<'_>> {
    (0..k)
        .map(|i| {
            let idx: Vec<usize> = (0..r.x.len()).filter(|j| (j + i) % 3 != 0).collect();
            LabelledRows { x: idx.iter().map(|&j| &r.x[j]).collect(), y: idx.iter().map(|&j| r.y[j]).collect() }
        })
        .collect()
}

fn heavy_chains(copies: usize) -> Vec<NumberedChain> {
    let numberer = Numberer::new(ProfileSet::bundled(), BoundaryTable::bundled());
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut out = Vec::new();
    for name in ["toy_targeting.csv", "toy_reference.csv"] {
        let f = std::fs::File::open(dir.join(name)).expect("fixture");
        let set = parse_sequences(f, InputFormat::Csv, ResiduePolicy::default()).expect("fixture parses");
        for r in set.records() {
            if let Some(h) = &r.heavy {
                out.push(numberer.number(h, ChainType::Heavy).expect("fixture numbers").chain);
            }
        }
    }
    out.iter().cycle().take(out.len() * copies).cloned().collect()
}

fn salient(c: &mut Criterion) {
    let r = rows(200, 120);
    let its = iterations(&r, 20);
    let mut g = c.benchmark_group("fet_screen");
    for (name, threads) in POOLS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || fet_screen(&its, Sided::TwoSided)))
        });
    }
    g.finish();

    let cfg = ForestConfig { n_trees: 20, ..ForestConfig::default() };
    let seeds = SeedStream::new(2);
    let its = iterations(&r, 4);
    let mut g = c.benchmark_group("rf_importance");
    g.sample_size(10);
    for (name, threads) in POOLS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || rf_importance(&its, &cfg, &seeds)))
        });
    }
    g.finish();
}

fn similarity(c: &mut Criterion) {
    let chains = heavy_chains(5);
    let refs: Vec<Option<&NumberedChain>> = chains.iter().map(Some).collect();
    let table = SubstitutionTable::blosum62();
    let mut g = c.benchmark_group("raw_score_matrix");
    g.sample_size(10);
    for (name, threads) in POOLS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_threads(threads, || RawScoreMatrix::compute(&refs, &table, -4).expect("scores")))
        });
    }
    g.finish();

    let r = rows(400, 120);
    let fps: Vec<&FeatureFingerprint> = r.x.iter().collect();
    let labels: Vec<MatrixLabel> = (0..r.x.len())
        .map(|i| MatrixLabel {
            id: format!("s{i}"),
            dataset_id: format!("d{}", i % 4),
            set_label: if r.y[i] { SetLabel::Targeting } else { SetLabel::Reference },
        })
        .collect();
    let mut g = c.benchmark_group("fingerprint_similarity");
    for (name, threads) in POOLS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                par::with_threads(threads, || {
                    fingerprint_similarity_matrix(&fps, labels.clone(), &r.vocab, EmptySegments::Exclude)
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, salient, similarity);
criterion_main!(benches);
