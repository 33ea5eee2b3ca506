//! The seven stages, their persisted artifacts and manifest bookkeeping.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use abprofile_core::annotate::{
    build_fingerprint, build_vocabulary, read_fingerprints, write_fingerprints, Annotator, CanonicalRuleTable,
    GermlineReference, PkaTable, RecordAnnotation,
};
use abprofile_core::designtree::{fit_tree, recommend, to_dot, to_json, write_recommendations_csv};
use abprofile_core::fingerprint::FeatureVocabulary;
use abprofile_core::mlbench::{cross_validated_auc, write_bench_csv, CvResult, FeatureMask, NO_BIASING_MASK};
use abprofile_core::model::{
    cluster_representatives, filter_by_species, parse_sequences, plan_sampling, sample_iterations, write_csv,
    InputFormat, SampledIteration, SamplingPlan,
};
use abprofile_core::numbering::{export_numbered, import_numbered, BoundaryTable, NumberedEntry, Numberer, ProfileSet};
use abprofile_core::par;
use abprofile_core::residue::{ResiduePolicy, SubstitutionTable};
use abprofile_core::salient::{
    feature_association, feature_frequencies, fet_screen, rf_importance, LabelledRows, SalientReport,
};
use abprofile_core::seed::SeedStream;
use abprofile_core::simstats::{
    chain_feature_p, dataset_grouped_order, fingerprint_similarity_matrix, sequence_similarity_matrix, within_set_p,
    write_heatmap_png, write_matrix_csv, MatrixKind, MatrixLabel, RawScoreMatrix, SimError, SimilarityMatrix,
    TestSummary, CHAIN_FEATURE, CHAIN_FEATURE_ALT, WITHIN_SET, WITHIN_SET_ALT,
};
use abprofile_core::{ChainType, FeatureFingerprint, NumberedChain, SequenceSet, SetLabel};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, TreeFit};
use crate::error::CliError;
use crate::manifest::{hash_path, sha256_hex, Manifest, StageRecord};

type ChainPair = (Option<NumberedChain>, Option<NumberedChain>);

/// Artifact paths relative to the output directory.
pub mod artifacts {
    pub const RECORDS: &str = "prepared/records.csv";
    pub const CLUSTERS: &str = "prepared/clusters.json";
    pub const NUMBERED: &str = "numbered/numbered.csv";
    pub const NUMBER_FAILURES: &str = "numbered/failures.csv";
    pub const ANNOTATIONS: &str = "annotations.json";
    pub const SPECIES_REMOVED: &str = "species_removed.csv";
    pub const KEPT: &str = "kept.csv";
    pub const FEATURES: &str = "features.json";
    pub const FINGERPRINTS: &str = "fingerprints.csv";
    pub const SAMPLING: &str = "sampling.json";
    pub const SIM_HEAVY: &str = "similarity/heavy.csv";
    pub const SIM_LIGHT: &str = "similarity/light.csv";
    pub const SIM_FINGERPRINT: &str = "similarity/fingerprint.csv";
    pub const TESTS: &str = "tests.json";
    pub const SALIENT: &str = "salient.csv";
    pub const ASSOC_TARGETING: &str = "association_targeting.csv";
    pub const ASSOC_REFERENCE: &str = "association_reference.csv";
    pub const ASSOCIATIONS: &str = "associations.json";
    pub const BENCH: &str = "bench.csv";
    pub const ROC: &str = "roc.json";
    pub const TREE_DOT: &str = "tree.dot";
    pub const TREE_JSON: &str = "tree.json";
    pub const RECOMMENDATIONS: &str = "recommendations.csv";
}

use artifacts as a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Prepare,
    Number,
    Annotate,
    Similarity,
    Salient,
    Classify,
    Recommend,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Prepare,
        Stage::Number,
        Stage::Annotate,
        Stage::Similarity,
        Stage::Salient,
        Stage::Classify,
        Stage::Recommend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Number => "number",
            Stage::Annotate => "annotate",
            Stage::Similarity => "similarity",
            Stage::Salient => "salient",
            Stage::Classify => "classify",
            Stage::Recommend => "recommend",
        }
    }

    /// Config keys whose values change this stage's output.
    fn params(self) -> &'static [&'static str] {
        match self {
            Stage::Prepare => &["targeting", "reference", "cluster_identity", "allow_x", "matrix"],
            Stage::Number => &["profiles_dir", "boundaries", "numbered"],
            Stage::Annotate => &[
                "germline_dir",
                "canonical_rules",
                "pka",
                "boundaries",
                "matrix",
                "species",
                "k",
                "seed",
                "desired_dataset_size",
                "targeting_total",
                "reference_total",
                "pi_min_fraction",
                "pi_min_width",
                "pi_scope",
                "motif_count",
            ],
            Stage::Similarity => &["matrix", "gap_score", "empty_segments", "png", "cell_px"],
            Stage::Salient => {
                &["fet", "importance_cutoff", "biasing_threshold", "association_threshold", "trees", "seed"]
            }
            Stage::Classify => &["folds", "masks", "models", "trees", "seed"],
            Stage::Recommend => &["min_leaf_fraction", "stop", "min_se", "tree_fit"],
        }
    }

    /// Upstream artifacts this stage reads.
    fn reads(self) -> &'static [&'static str] {
        match self {
            Stage::Prepare => &[],
            Stage::Number => &[a::RECORDS],
            Stage::Annotate => &[a::RECORDS, a::NUMBERED],
            Stage::Similarity => &[a::KEPT, a::NUMBERED, a::FINGERPRINTS, a::SAMPLING],
            Stage::Salient => &[a::KEPT, a::FINGERPRINTS, a::SAMPLING],
            Stage::Classify => &[a::KEPT, a::FINGERPRINTS, a::SAMPLING, a::SALIENT, a::ASSOCIATIONS],
            Stage::Recommend => &[a::KEPT, a::FINGERPRINTS, a::SAMPLING],
        }
    }

    fn external(self, cfg: &RunConfig) -> Vec<PathBuf> {
        let opt = |p: &Option<PathBuf>| p.iter().cloned().collect::<Vec<_>>();
        match self {
            Stage::Prepare => cfg.targeting.iter().chain(&cfg.reference).cloned().chain(opt(&cfg.matrix)).collect(),
            Stage::Number => [opt(&cfg.profiles_dir), opt(&cfg.boundaries), opt(&cfg.numbered)].concat(),
            Stage::Annotate => [
                opt(&cfg.germline_dir),
                opt(&cfg.canonical_rules),
                opt(&cfg.pka),
                opt(&cfg.boundaries),
                opt(&cfg.matrix),
            ]
            .concat(),
            Stage::Similarity => opt(&cfg.matrix),
            _ => Vec::new(),
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Skip stages whose recorded inputs, params and outputs still match.
    pub resume: bool,
    /// Run even when upstream artifacts changed since they were produced.
    pub force: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterEntry {
    dataset_id: String,
    representative: String,
    members: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureSpaceFile {
    pi_edges: Vec<f64>,
    motifs: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SamplingFile {
    pub plan: SamplingPlan,
    /// Indices refer to rows of the kept records and fingerprints.
    pub iterations: Vec<SampledIteration>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TestsFile {
    pub within_set: BTreeMap<String, TestSummary>,
    pub chain_feature: TestSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociatedPair {
    pub a: String,
    pub b: String,
    pub jaccard: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociationsFile {
    pub threshold: f64,
    pub biasing: Vec<String>,
    pub targeting: Vec<AssociatedPair>,
    pub reference: Vec<AssociatedPair>,
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| data_err(path, e))
}

/// Kept records, fingerprints in the same order and the sampled iterations.
pub struct AnalysisInputs {
    pub set: SequenceSet,
    pub vocab: FeatureVocabulary,
    pub fingerprints: Vec<FeatureFingerprint>,
    pub sampling: SamplingFile,
}

impl AnalysisInputs {
    pub fn labels(&self) -> Vec<bool> {
        self.set.records().iter().map(|r| r.set_label == SetLabel::Targeting).collect()
    }

    pub fn iteration_rows(&self) -> Vec<LabelledRows<'_>> {
        let y = self.labels();
        self.sampling
            .iterations
            .iter()
            .map(|it| LabelledRows {
                x: it.all_indices().map(|i| &self.fingerprints[i]).collect(),
                y: it.all_indices().map(|i| y[i]).collect(),
            })
            .collect()
    }
}

pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    opts: RunOptions,
    manifest: Manifest,
}

impl Pipeline {
    /// Validates inputs and opens (or starts) the output directory's manifest.
    pub fn new(cfg: RunConfig, opts: RunOptions) -> Result<Pipeline, CliError> {
        cfg.check_inputs()?;
        let out = cfg.output.clone();
        std::fs::create_dir_all(&out).map_err(|e| data_err(&out, e))?;
        let mut manifest = Manifest::load(&out)?;
        manifest.config_hash = sha256_hex(cfg.canonical_all().as_bytes());
        manifest.seed = cfg.seed;
        manifest.versions = [
            ("abprofile".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("abprofile-core".to_string(), abprofile_core::VERSION.to_string()),
        ]
        .into();
        Ok(Pipeline { cfg, out, opts, manifest })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    pub fn run_all(&mut self) -> Result<(), CliError> {
        for s in Stage::ALL {
            self.run(s)?;
        }
        Ok(())
    }

    /// Runs one stage from persisted upstream artifacts and records it.
    pub fn run(&mut self, stage: Stage) -> Result<(), CliError> {
        let name = stage.name();
        let params_hash = sha256_hex(self.cfg.canonical(stage.params()).as_bytes());
        let mut inputs = BTreeMap::new();
        for art in stage.reads() {
            let p = self.out.join(art);
            if !p.exists() {
                let producer = Stage::ALL.iter().find(|s| self.writes(**s).iter().any(|w| w == art));
                return Err(CliError::stage(
                    name,
                    format!("missing {art}; run {} first", producer.map_or("the upstream stage", |s| s.name())),
                ));
            }
            let h = hash_path(&p).map_err(|e| data_err(&p, e))?;
            match self.manifest.producer_of(art) {
                Some((_, recorded)) if recorded == h => {}
                _ if self.opts.force => log::warn!("{name}: using changed upstream artifact {art} (--force)"),
                _ => return Err(CliError::Stale { stage: name, artifact: art.to_string() }),
            }
            inputs.insert(art.to_string(), h);
        }
        for p in stage.external(&self.cfg) {
            let h = hash_path(&p).map_err(|e| data_err(&p, e))?;
            inputs.insert(p.display().to_string(), h);
        }
        if self.opts.resume && self.up_to_date(name, &params_hash, &inputs) {
            log::info!("{name}: up to date, skipped");
            return Ok(());
        }
        log::info!("{name}: running");
        let written = match stage {
            Stage::Prepare => self.prepare(),
            Stage::Number => self.number(),
            Stage::Annotate => self.annotate(),
            Stage::Similarity => self.similarity(),
            Stage::Salient => self.salient(),
            Stage::Classify => self.classify(),
            Stage::Recommend => self.recommend(),
        }?;
        let mut outputs = BTreeMap::new();
        for w in written {
            let p = self.out.join(&w);
            outputs.insert(w, hash_path(&p).map_err(|e| data_err(&p, e))?);
        }
        self.manifest.stages.insert(name.to_string(), StageRecord { params_hash, inputs, outputs });
        self.manifest.save(&self.out).map_err(|e| CliError::stage(name, e))
    }

    fn up_to_date(&self, name: &str, params_hash: &str, inputs: &BTreeMap<String, String>) -> bool {
        let Some(rec) = self.manifest.stages.get(name) else {
            return false;
        };
        rec.params_hash == params_hash
            && &rec.inputs == inputs
            && rec.outputs.iter().all(|(o, h)| hash_path(&self.out.join(o)).ok().as_deref() == Some(h.as_str()))
    }

    /// Artifacts a stage produces under the current config.
    pub fn writes(&self, stage: Stage) -> Vec<String> {
        let v: Vec<&str> = match stage {
            Stage::Prepare => vec![a::RECORDS, a::CLUSTERS],
            Stage::Number => vec![a::NUMBERED, a::NUMBER_FAILURES],
            Stage::Annotate => {
                vec![a::ANNOTATIONS, a::SPECIES_REMOVED, a::KEPT, a::FEATURES, a::FINGERPRINTS, a::SAMPLING]
            }
            Stage::Similarity => {
                let mut v = vec![a::SIM_HEAVY, a::SIM_LIGHT, a::SIM_FINGERPRINT, a::TESTS];
                if self.cfg.png {
                    v.extend(["similarity/heavy.png", "similarity/light.png", "similarity/fingerprint.png"]);
                }
                v
            }
            Stage::Salient => vec![a::SALIENT, a::ASSOC_TARGETING, a::ASSOC_REFERENCE, a::ASSOCIATIONS],
            Stage::Classify => vec![a::BENCH, a::ROC],
            Stage::Recommend => vec![a::TREE_DOT, a::TREE_JSON, a::RECOMMENDATIONS],
        };
        v.into_iter().map(String::from).collect()
    }

    fn create(&self, rel: &str) -> Result<BufWriter<File>, CliError> {
        let p = self.out.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| data_err(dir, e))?;
        }
        File::create(&p).map(BufWriter::new).map_err(|e| data_err(&p, e))
    }

    fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| data_err(Path::new(rel), e))?;
        text.push('\n');
        let mut w = self.create(rel)?;
        w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| data_err(Path::new(rel), e))
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, rel: &str) -> Result<T, CliError> {
        let p = self.out.join(rel);
        serde_json::from_str(&read_text(&p)?).map_err(|e| data_err(&p, e))
    }

    fn substitution_table(&self) -> Result<SubstitutionTable, CliError> {
        match &self.cfg.matrix {
            Some(p) => SubstitutionTable::parse(&read_text(p)?).map_err(|e| data_err(p, e)),
            None => Ok(SubstitutionTable::blosum62()),
        }
    }

    fn boundaries(&self) -> Result<BoundaryTable, CliError> {
        match &self.cfg.boundaries {
            Some(p) => BoundaryTable::parse(&read_text(p)?).map_err(|e| data_err(p, e)),
            None => Ok(BoundaryTable::bundled()),
        }
    }

    fn load_set(&self, rel: &str) -> Result<SequenceSet, CliError> {
        let p = self.out.join(rel);
        let f = File::open(&p).map_err(|e| data_err(&p, e))?;
        parse_sequences(f, InputFormat::Csv, ResiduePolicy { allow_x: true }).map_err(|e| data_err(&p, e))
    }

    fn load_numbered(&self) -> Result<HashMap<String, ChainPair>, CliError> {
        let p = self.out.join(a::NUMBERED);
        let f = File::open(&p).map_err(|e| data_err(&p, e))?;
        let mut map: HashMap<String, ChainPair> = HashMap::new();
        for e in import_numbered(f).map_err(|e| data_err(&p, e))? {
            let slot = map.entry(e.id).or_default();
            match e.chain.chain_type {
                ChainType::Heavy => slot.0 = Some(e.chain),
                ChainType::Light => slot.1 = Some(e.chain),
            }
        }
        Ok(map)
    }

    /// Everything the analysis stages share, checked for consistency.
    pub fn load_analysis(&self) -> Result<AnalysisInputs, CliError> {
        let set = self.load_set(a::KEPT)?;
        let p = self.out.join(a::FINGERPRINTS);
        let f = File::open(&p).map_err(|e| data_err(&p, e))?;
        let (vocab, rows) = read_fingerprints(f).map_err(|e| data_err(&p, e))?;
        if rows.len() != set.len() || rows.iter().zip(set.records()).any(|((id, _), r)| *id != r.id) {
            return Err(data_err(&p, format!("rows do not match {}", a::KEPT)));
        }
        let sampling: SamplingFile = self.read_json(a::SAMPLING)?;
        if sampling.iterations.iter().flat_map(|it| it.all_indices()).any(|i| i >= set.len()) {
            return Err(data_err(&self.out.join(a::SAMPLING), "index outside the kept records"));
        }
        Ok(AnalysisInputs { set, vocab, fingerprints: rows.into_iter().map(|(_, fp)| fp).collect(), sampling })
    }

    fn prepare(&self) -> Result<Vec<String>, CliError> {
        let policy = ResiduePolicy { allow_x: self.cfg.allow_x };
        let mut records = Vec::new();
        for (paths, label) in [(&self.cfg.targeting, SetLabel::Targeting), (&self.cfg.reference, SetLabel::Reference)] {
            for p in paths {
                let f = File::open(p).map_err(|e| data_err(p, e))?;
                let set = parse_sequences(f, InputFormat::from_path(p), policy).map_err(|e| data_err(p, e))?;
                if let Some(r) = set.records().iter().find(|r| r.set_label != label) {
                    return Err(data_err(
                        p,
                        format!("record {:?} is labelled {} in a {label} input", r.id, r.set_label),
                    ));
                }
                records.extend(set.into_records());
            }
        }
        let set = SequenceSet::new(records).map_err(|e| CliError::Data(e.to_string()))?;
        for label in [SetLabel::Targeting, SetLabel::Reference] {
            if set.count(label) == 0 {
                return Err(CliError::Data(format!("no {label} records")));
            }
        }
        let (reps, clusters) = match self.cfg.cluster_identity {
            Some(thr) => {
                let table = self.substitution_table()?;
                let o = cluster_representatives(&set, thr, &table, Default::default());
                log::info!("prepare: {} records in {} clusters", set.len(), o.clusters.len());
                let ids = |i: usize| set.records()[i].id.clone();
                let entries: Vec<ClusterEntry> = o
                    .clusters
                    .iter()
                    .map(|c| ClusterEntry {
                        dataset_id: c.dataset_id.clone(),
                        representative: ids(c.representative),
                        members: c.members.iter().map(|&m| ids(m)).collect(),
                    })
                    .collect();
                (o.representatives, entries)
            }
            None => {
                let entries = set
                    .records()
                    .iter()
                    .map(|r| ClusterEntry {
                        dataset_id: r.dataset_id.clone(),
                        representative: r.id.clone(),
                        members: vec![r.id.clone()],
                    })
                    .collect();
                (set, entries)
            }
        };
        let mut w = self.create(a::RECORDS)?;
        write_csv(reps.records(), &mut w).and_then(|_| w.flush()).map_err(|e| CliError::stage("prepare", e))?;
        self.write_json(a::CLUSTERS, &clusters)?;
        Ok(self.writes(Stage::Prepare))
    }

    fn number(&self) -> Result<Vec<String>, CliError> {
        let set = self.load_set(a::RECORDS)?;
        let imported: Option<HashMap<(String, ChainType), NumberedChain>> = match &self.cfg.numbered {
            Some(p) => {
                let f = File::open(p).map_err(|e| data_err(p, e))?;
                let entries = import_numbered(f).map_err(|e| data_err(p, e))?;
                Some(entries.into_iter().map(|e| ((e.id, e.chain.chain_type), e.chain)).collect())
            }
            None => None,
        };
        let numberer = match &self.cfg.profiles_dir {
            Some(d) => Numberer::new(ProfileSet::load_dir(d).map_err(|e| data_err(d, e))?, self.boundaries()?),
            None => Numberer::new(ProfileSet::bundled(), self.boundaries()?),
        };
        let results = par::map_slice(set.records(), |r| {
            let mut chains = Vec::new();
            let mut failures = Vec::new();
            for (seq, ct) in [(&r.heavy, ChainType::Heavy), (&r.light, ChainType::Light)] {
                let Some(seq) = seq else { continue };
                let res = match &imported {
                    Some(m) => m
                        .get(&(r.id.clone(), ct))
                        .cloned()
                        .ok_or_else(|| "absent from the imported numbering".to_string()),
                    None => numberer.number(seq, ct).map(|n| n.chain).map_err(|e| e.to_string()),
                };
                match res {
                    Ok(c) => chains.push(NumberedEntry { id: r.id.clone(), chain: c }),
                    Err(e) => failures.push((r.id.clone(), ct, e)),
                }
            }
            (chains, failures)
        });
        let mut entries = Vec::new();
        let mut fw = csv::Writer::from_writer(self.create(a::NUMBER_FAILURES)?);
        fw.write_record(["id", "chain", "error"]).map_err(|e| CliError::stage("number", e))?;
        let mut dropped = 0;
        for (chains, failures) in results {
            if failures.is_empty() {
                entries.extend(chains);
                continue;
            }
            dropped += 1;
            for (id, ct, e) in failures {
                fw.write_record([id.as_str(), ct.as_str(), e.as_str()]).map_err(|e| CliError::stage("number", e))?;
            }
        }
        fw.flush().map_err(|e| CliError::stage("number", e))?;
        if dropped > 0 {
            log::warn!("number: {dropped} records had a chain that failed numbering and were dropped");
        }
        let mut w = self.create(a::NUMBERED)?;
        export_numbered(&entries, &mut w).map_err(|e| CliError::stage("number", e))?;
        w.flush().map_err(|e| CliError::stage("number", e))?;
        Ok(self.writes(Stage::Number))
    }

    fn annotator(&self) -> Result<Annotator, CliError> {
        let mut an = Annotator::default();
        if let Some(d) = &self.cfg.germline_dir {
            an.germlines = GermlineReference::load_dir(d).map_err(|e| data_err(d, e))?;
        }
        if let Some(p) = &self.cfg.canonical_rules {
            an.rules = CanonicalRuleTable::parse(&read_text(p)?).map_err(|e| data_err(p, e))?;
        }
        if let Some(p) = &self.cfg.pka {
            an.pka = PkaTable::parse(&read_text(p)?).map_err(|e| data_err(p, e))?;
        }
        an.boundaries = self.boundaries()?;
        an.table = self.substitution_table()?;
        Ok(an)
    }

    fn annotate(&self) -> Result<Vec<String>, CliError> {
        let set = self.load_set(a::RECORDS)?;
        let numbered = self.load_numbered()?;
        let annotator = self.annotator()?;
        let set = set.retain(|r| numbered.contains_key(&r.id));
        let anns: Vec<RecordAnnotation> = par::map_slice(set.records(), |r| {
            let (h, l) = &numbered[&r.id];
            annotator.annotate(&r.id, r.set_label, h.as_ref(), l.as_ref())
        });
        let calls: HashMap<String, _> = anns.iter().map(|x| (x.id.clone(), x.germline.clone())).collect();

        let mut removed: Vec<(String, String)> = Vec::new();
        let kept = if self.cfg.species.is_empty() {
            set
        } else {
            for r in set.records() {
                if calls[&r.id].species.is_none() {
                    removed.push((r.id.clone(), "none".into()));
                }
            }
            let called = set.retain(|r| calls[&r.id].species.is_some());
            let o = filter_by_species(&called, &calls, &self.cfg.species).map_err(|e| CliError::Data(e.to_string()))?;
            removed.extend(o.removed.into_iter().map(|(id, sp)| (id, sp.to_string())));
            o.kept
        };
        if !removed.is_empty() {
            log::warn!("annotate: {} records removed by the species filter", removed.len());
        }
        let by_id: HashMap<&str, &RecordAnnotation> = anns.iter().map(|x| (x.id.as_str(), x)).collect();
        let kept_anns: Vec<RecordAnnotation> = kept.records().iter().map(|r| by_id[r.id.as_str()].clone()).collect();
        let space = build_vocabulary(&kept_anns, self.cfg.vocabulary);
        let rows = kept_anns
            .iter()
            .map(|x| build_fingerprint(x, &space).map(|fp| (x.id.clone(), fp)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::stage("annotate", e))?;
        let plan = plan_sampling(&kept, self.cfg.k, self.cfg.seed, self.cfg.sampling)
            .map_err(|e| CliError::Data(e.to_string()))?;
        let iterations = sample_iterations(&plan, &kept);

        self.write_json(a::ANNOTATIONS, &anns)?;
        let mut sw = csv::Writer::from_writer(self.create(a::SPECIES_REMOVED)?);
        sw.write_record(["id", "species"]).map_err(|e| CliError::stage("annotate", e))?;
        for (id, sp) in &removed {
            sw.write_record([id, sp]).map_err(|e| CliError::stage("annotate", e))?;
        }
        sw.flush().map_err(|e| CliError::stage("annotate", e))?;
        let mut w = self.create(a::KEPT)?;
        write_csv(kept.records(), &mut w).and_then(|_| w.flush()).map_err(|e| CliError::stage("annotate", e))?;
        self.write_json(
            a::FEATURES,
            &FeatureSpaceFile {
                pi_edges: space.binning.edges.clone(),
                motifs: space.motifs.iter().map(|m| m.to_string()).collect(),
            },
        )?;
        let mut w = self.create(a::FINGERPRINTS)?;
        write_fingerprints(&rows, &space.vocab, &mut w).map_err(|e| CliError::stage("annotate", e))?;
        w.flush().map_err(|e| CliError::stage("annotate", e))?;
        self.write_json(a::SAMPLING, &SamplingFile { plan, iterations })?;
        Ok(self.writes(Stage::Annotate))
    }

    fn similarity(&self) -> Result<Vec<String>, CliError> {
        const S: &str = "similarity";
        let inp = self.load_analysis()?;
        let numbered = self.load_numbered()?;
        let table = self.substitution_table()?;
        let recs = inp.set.records();
        let chain = |ct: ChainType| -> Vec<Option<&NumberedChain>> {
            recs.iter()
                .map(|r| {
                    let (h, l) = numbered.get(&r.id)?;
                    match ct {
                        ChainType::Heavy => h.as_ref(),
                        ChainType::Light => l.as_ref(),
                    }
                })
                .collect()
        };
        let raw_h = RawScoreMatrix::compute(&chain(ChainType::Heavy), &table, self.cfg.gap_score)
            .map_err(|e| CliError::stage(S, e))?;
        let raw_l = RawScoreMatrix::compute(&chain(ChainType::Light), &table, self.cfg.gap_score)
            .map_err(|e| CliError::stage(S, e))?;
        let labels: Vec<MatrixLabel> = recs
            .iter()
            .map(|r| MatrixLabel { id: r.id.clone(), dataset_id: r.dataset_id.clone(), set_label: r.set_label })
            .collect();
        let fp_refs: Vec<&FeatureFingerprint> = inp.fingerprints.iter().collect();
        let (fp_full, _) = fingerprint_similarity_matrix(&fp_refs, labels.clone(), &inp.vocab, self.cfg.empty_segments);

        // (matrix, fell back to all-ones)
        let seq =
            |raw: &RawScoreMatrix, idx: &[usize], kind: MatrixKind| -> Result<(SimilarityMatrix, bool), CliError> {
                let l = idx.iter().map(|&i| labels[i].clone()).collect();
                match sequence_similarity_matrix(raw, idx, l, kind) {
                    Ok(m) => Ok((m, false)),
                    Err(SimError::Degenerate { fallback, .. }) => Ok((*fallback, true)),
                    Err(e) => Err(CliError::stage(S, e)),
                }
            };
        let iters = &inp.sampling.iterations;
        let per = par::map_range(iters.len(), |it| -> Result<([f64; 4], usize), CliError> {
            let idx: Vec<usize> = iters[it].all_indices().collect();
            let (h, dh) = seq(&raw_h, &idx, MatrixKind::HeavySeq)?;
            let (l, dl) = seq(&raw_l, &idx, MatrixKind::LightSeq)?;
            let f = fp_full.select(&idx);
            let p = |r: Result<f64, SimError>| r.map_err(|e| CliError::stage(S, e));
            Ok((
                [p(within_set_p(&h))?, p(within_set_p(&l))?, p(within_set_p(&f))?, p(chain_feature_p(&h, &l, &f))?],
                dh as usize + dl as usize,
            ))
        });
        let per = per.into_iter().collect::<Result<Vec<_>, _>>()?;
        let degenerate: usize = per.iter().map(|x| x.1).sum();
        if degenerate > 0 {
            log::warn!("similarity: {degenerate} sequence matrices had all-equal raw scores; used all-ones fallbacks");
        }
        let col = |c: usize| per.iter().map(|x| x.0[c]).collect::<Vec<_>>();
        let mut within_set = BTreeMap::new();
        for (c, kind) in [MatrixKind::HeavySeq, MatrixKind::LightSeq, MatrixKind::Fingerprint].into_iter().enumerate() {
            within_set
                .insert(kind.as_str().to_string(), TestSummary::from_p_values(WITHIN_SET, WITHIN_SET_ALT, col(c)));
        }
        let tests = TestsFile {
            within_set,
            chain_feature: TestSummary::from_p_values(CHAIN_FEATURE, CHAIN_FEATURE_ALT, col(3)),
        };
        self.write_json(a::TESTS, &tests)?;

        if let Some(first) = iters.first() {
            let idx: Vec<usize> = first.all_indices().collect();
            let mats = [
                (seq(&raw_h, &idx, MatrixKind::HeavySeq)?.0, a::SIM_HEAVY),
                (seq(&raw_l, &idx, MatrixKind::LightSeq)?.0, a::SIM_LIGHT),
                (fp_full.select(&idx), a::SIM_FINGERPRINT),
            ];
            for (m, rel) in &mats {
                let order = dataset_grouped_order(m);
                let mut w = self.create(rel)?;
                write_matrix_csv(m, &order, &mut w).map_err(|e| CliError::stage(S, e))?;
                w.flush().map_err(|e| CliError::stage(S, e))?;
                if self.cfg.png {
                    let png = self.out.join(rel.replace(".csv", ".png"));
                    write_heatmap_png(m, &order, self.cfg.cell_px.max(1), &png).map_err(|e| CliError::stage(S, e))?;
                }
            }
        }
        Ok(self.writes(Stage::Similarity))
    }

    fn salient(&self) -> Result<Vec<String>, CliError> {
        const S: &str = "salient";
        let inp = self.load_analysis()?;
        let rows = inp.iteration_rows();
        let avg_p = fet_screen(&rows, self.cfg.salient.sided);
        let importance = rf_importance(&rows, &self.cfg.forest, &SeedStream::new(self.cfg.seed).child("salient", 0));
        let y = inp.labels();
        let all: Vec<&FeatureFingerprint> = inp.fingerprints.iter().collect();
        let freqs = feature_frequencies(&all, &y);
        let report = SalientReport::build(&inp.vocab, &avg_p, &importance, &freqs, &self.cfg.salient);
        let mut w = self.create(a::SALIENT)?;
        report.write_csv(&mut w).map_err(|e| CliError::stage(S, e))?;
        w.flush().map_err(|e| CliError::stage(S, e))?;

        let feats = inp.vocab.features();
        let thr = self.cfg.association_threshold;
        let mut pairs = Vec::new();
        for (label, rel) in [(true, a::ASSOC_TARGETING), (false, a::ASSOC_REFERENCE)] {
            let x: Vec<&FeatureFingerprint> =
                all.iter().zip(&y).filter(|(_, &t)| t == label).map(|(f, _)| *f).collect();
            let m = feature_association(&x);
            let mut w = self.create(rel)?;
            m.write_csv(&inp.vocab, &mut w).map_err(|e| CliError::stage(S, e))?;
            w.flush().map_err(|e| CliError::stage(S, e))?;
            pairs.push(
                m.strong_pairs(thr)
                    .into_iter()
                    .map(|(f, g, j)| AssociatedPair { a: feats[f].to_string(), b: feats[g].to_string(), jaccard: j })
                    .collect::<Vec<_>>(),
            );
        }
        let reference = pairs.pop().unwrap_or_default();
        let targeting = pairs.pop().unwrap_or_default();
        let biasing = report.rows.iter().filter(|r| r.biasing).map(|r| r.feature.to_string()).collect();
        self.write_json(a::ASSOCIATIONS, &AssociationsFile { threshold: thr, biasing, targeting, reference })?;
        Ok(self.writes(Stage::Salient))
    }

    /// Columns of biasing features plus anything strongly associated with one.
    fn biasing_columns(&self, vocab: &FeatureVocabulary) -> Result<Vec<usize>, CliError> {
        let assoc: AssociationsFile = self.read_json(a::ASSOCIATIONS)?;
        let mut names: Vec<&str> = assoc.biasing.iter().map(String::as_str).collect();
        for p in assoc.targeting.iter().chain(&assoc.reference) {
            if assoc.biasing.contains(&p.a) {
                names.push(&p.b);
            }
            if assoc.biasing.contains(&p.b) {
                names.push(&p.a);
            }
        }
        let mut cols: Vec<usize> = vocab
            .features()
            .iter()
            .enumerate()
            .filter(|(_, f)| names.contains(&f.to_string().as_str()))
            .map(|(i, _)| i)
            .collect();
        cols.sort_unstable();
        cols.dedup();
        Ok(cols)
    }

    fn classify(&self) -> Result<Vec<String>, CliError> {
        const S: &str = "classify";
        let inp = self.load_analysis()?;
        let rows = inp.iteration_rows();
        let mut masks = Vec::new();
        for name in &self.cfg.masks {
            let m = if name == NO_BIASING_MASK {
                FeatureMask::excluding(name, &inp.vocab, &self.biasing_columns(&inp.vocab)?)
            } else {
                FeatureMask::named(name, &inp.vocab)
            };
            match m {
                Ok(m) => masks.push(m),
                Err(e) => log::warn!("classify: skipping mask {name}: {e}"),
            }
        }
        let seeds = SeedStream::new(self.cfg.seed).child("classify", 0);
        let mut results: Vec<CvResult> = Vec::new();
        for &model in &self.cfg.models {
            for mask in &masks {
                let r = cross_validated_auc(&rows, model, mask, self.cfg.folds, &self.cfg.forest, &seeds)
                    .map_err(|e| CliError::stage(S, format!("{} on {}: {e}", model.as_str(), mask.name)))?;
                log::info!("classify: {} {} AUC {:.4}", model.as_str(), mask.name, r.mean_auc);
                results.push(r);
            }
        }
        let mut w = self.create(a::BENCH)?;
        write_bench_csv(&results, &mut w).map_err(|e| CliError::stage(S, e))?;
        w.flush().map_err(|e| CliError::stage(S, e))?;
        self.write_json(a::ROC, &results)?;
        Ok(self.writes(Stage::Classify))
    }

    fn recommend(&self) -> Result<Vec<String>, CliError> {
        const S: &str = "recommend";
        let inp = self.load_analysis()?;
        let mut weights = vec![0u64; inp.set.len()];
        let iters = match self.cfg.tree_fit {
            TreeFit::Pooled => &inp.sampling.iterations[..],
            TreeFit::First => &inp.sampling.iterations[..1.min(inp.sampling.iterations.len())],
        };
        for it in iters {
            for i in it.all_indices() {
                weights[i] += 1;
            }
        }
        let x: Vec<&FeatureFingerprint> = inp.fingerprints.iter().collect();
        let active: Vec<usize> = (0..inp.vocab.len()).collect();
        let root = fit_tree(&x, &inp.labels(), &weights, &active, &inp.vocab, &self.cfg.tree);
        let recs = recommend(&root, self.cfg.min_se);
        let mut w = self.create(a::TREE_DOT)?;
        w.write_all(to_dot(&root).as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::stage(S, e))?;
        let mut json = to_json(&root).map_err(|e| CliError::stage(S, e))?;
        json.push('\n');
        let mut w = self.create(a::TREE_JSON)?;
        w.write_all(json.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::stage(S, e))?;
        let mut w = self.create(a::RECOMMENDATIONS)?;
        write_recommendations_csv(&recs, &mut w).map_err(|e| CliError::stage(S, e))?;
        w.flush().map_err(|e| CliError::stage(S, e))?;
        Ok(self.writes(Stage::Recommend))
    }
}

/// Compares two salient reports and writes the overlap as JSON.
pub fn compare_salient_files(a_path: &Path, b_path: &Path, out: &Path) -> Result<(), CliError> {
    let load = |p: &Path| -> Result<SalientReport, CliError> {
        let f = File::open(p).map_err(|e| data_err(p, e))?;
        SalientReport::read_csv(f).map_err(|e| data_err(p, e))
    };
    let cmp = abprofile_core::salient::compare_salient(&load(a_path)?, &load(b_path)?);
    let mut text = serde_json::to_string_pretty(&cmp).map_err(|e| data_err(out, e))?;
    text.push('\n');
    std::fs::write(out, text).map_err(|e| data_err(out, e))
}
