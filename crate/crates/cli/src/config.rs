//! `key = value` run configuration with command-line overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use abprofile_core::annotate::{MotifCount, PiScope, VocabularyParams};
use abprofile_core::designtree::{StopRule, TreeParams};
use abprofile_core::forest::ForestConfig;
use abprofile_core::mlbench::{Model, NO_BIASING_MASK, SEGMENT_MASKS};
use abprofile_core::model::SamplingOverrides;
use abprofile_core::salient::{ImportanceCutoff, SalientParams, Sided};
use abprofile_core::simstats::EmptySegments;
use abprofile_core::Species;

use crate::error::CliError;

/// Every accepted key with its default; `""` means unset.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("targeting", ""),
    ("reference", ""),
    ("output", "abprofile-out"),
    ("k", "100"),
    ("seed", "20200101"),
    ("desired_dataset_size", ""),
    ("targeting_total", ""),
    ("reference_total", ""),
    ("cluster_identity", "0.95"),
    ("allow_x", "false"),
    ("species", "human"),
    ("numbered", ""),
    ("germline_dir", ""),
    ("profiles_dir", ""),
    ("boundaries", ""),
    ("canonical_rules", ""),
    ("pka", ""),
    ("matrix", ""),
    ("gap_score", "-4"),
    ("pi_min_fraction", "0.1"),
    ("pi_min_width", "0.3"),
    ("pi_scope", "pooled"),
    ("motif_count", "presence"),
    ("empty_segments", "exclude"),
    ("png", "false"),
    ("cell_px", "4"),
    ("fet", "two-sided"),
    ("importance_cutoff", "mean"),
    ("biasing_threshold", "0.5"),
    ("association_threshold", "0.8"),
    ("trees", "100"),
    ("folds", "10"),
    ("masks", "all,germline,canonical,pi,motif,no-biasing"),
    ("models", "svm,random_forest,adaboost"),
    ("min_leaf_fraction", "0.05"),
    ("stop", "guard"),
    ("min_se", "0.05"),
    ("tree_fit", "pooled"),
    ("threads", ""),
];

/// Keys that name files, resolved against the config file's directory.
const PATH_KEYS: &[&str] = &[
    "targeting",
    "reference",
    "output",
    "numbered",
    "germline_dir",
    "profiles_dir",
    "boundaries",
    "canonical_rules",
    "pka",
    "matrix",
];

/// Which sampled rows the design tree is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeFit {
    /// Every iteration's rows together, duplicates weighted.
    Pooled,
    /// Iteration 0 only.
    First,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Resolved key/value pairs; the canonical record hashed into the manifest.
    pub raw: BTreeMap<String, String>,
    pub targeting: Vec<PathBuf>,
    pub reference: Vec<PathBuf>,
    pub output: PathBuf,
    pub k: usize,
    pub seed: u64,
    pub sampling: SamplingOverrides,
    pub cluster_identity: Option<f64>,
    pub allow_x: bool,
    pub species: BTreeSet<Species>,
    pub numbered: Option<PathBuf>,
    pub germline_dir: Option<PathBuf>,
    pub profiles_dir: Option<PathBuf>,
    pub boundaries: Option<PathBuf>,
    pub canonical_rules: Option<PathBuf>,
    pub pka: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub gap_score: i32,
    pub vocabulary: VocabularyParams,
    pub empty_segments: EmptySegments,
    pub png: bool,
    pub cell_px: u32,
    pub salient: SalientParams,
    pub association_threshold: f64,
    pub forest: ForestConfig,
    pub folds: usize,
    pub masks: Vec<String>,
    pub models: Vec<Model>,
    pub tree: TreeParams,
    pub min_se: f64,
    pub tree_fit: TreeFit,
    pub threads: Option<usize>,
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn known(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key)
}

fn resolve(base: &Path, key: &str, value: &str) -> String {
    if !PATH_KEYS.contains(&key) || value.is_empty() {
        return value.to_string();
    }
    value
        .split(',')
        .map(|p| {
            let p = Path::new(p.trim());
            if p.is_absolute() { p.to_path_buf() } else { base.join(p) }.to_string_lossy().into_owned()
        })
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Layers defaults, then the config file, then `overrides` (flags win).
    /// Relative paths in the file resolve against its directory; relative
    /// paths in overrides against the working directory.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
        let mut raw: BTreeMap<String, String> = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new("."));
            for (k, v) in parse_pairs(&text)? {
                if !known(&k) {
                    return Err(CliError::Config(format!("unknown config key {k:?}")));
                }
                raw.insert(k.clone(), resolve(base, &k, &v));
            }
        }
        for (k, v) in overrides {
            if !known(k) {
                return Err(CliError::Config(format!("unknown config key {k:?}")));
            }
            raw.insert(k.clone(), v.clone());
        }
        Self::from_raw(raw)
    }

    fn from_raw(raw: BTreeMap<String, String>) -> Result<RunConfig, CliError> {
        let get = |k: &str| raw.get(k).map(String::as_str).unwrap_or("");
        let bad = |k: &str, e: String| CliError::Config(format!("{k}: {e}"));
        fn parse<T: FromStr>(raw: &BTreeMap<String, String>, k: &str) -> Result<T, CliError>
        where
            T::Err: std::fmt::Display,
        {
            let v = raw.get(k).map(String::as_str).unwrap_or("");
            v.parse::<T>().map_err(|e| CliError::Config(format!("{k} = {v:?}: {e}")))
        }
        fn opt<T: FromStr>(raw: &BTreeMap<String, String>, k: &str) -> Result<Option<T>, CliError>
        where
            T::Err: std::fmt::Display,
        {
            match raw.get(k).map(String::as_str).unwrap_or("") {
                "" => Ok(None),
                _ => parse(raw, k).map(Some),
            }
        }
        let paths = |k: &str| -> Vec<PathBuf> {
            get(k).split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect()
        };
        let path = |k: &str| -> Option<PathBuf> { Some(get(k)).filter(|s| !s.is_empty()).map(PathBuf::from) };
        let fraction = |k: &str, v: f64| -> Result<f64, CliError> {
            if v > 0.0 && v < 1.0 {
                Ok(v)
            } else {
                Err(bad(k, format!("{v} is outside (0, 1)")))
            }
        };

        let k: usize = parse(&raw, "k")?;
        if k == 0 {
            return Err(bad("k", "must be at least 1".into()));
        }
        let cluster_identity = match get("cluster_identity") {
            "none" | "off" => None,
            _ => {
                let v: f64 = parse(&raw, "cluster_identity")?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(bad("cluster_identity", format!("{v} is outside (0, 1]")));
                }
                Some(v)
            }
        };
        let species = get("species")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty() && *s != "any")
            .map(|s| s.parse::<Species>().map_err(|e| bad("species", e)))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let masks: Vec<String> =
            get("masks").split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        for m in &masks {
            if !SEGMENT_MASKS.contains(&m.as_str()) && m != NO_BIASING_MASK {
                return Err(bad("masks", format!("unknown mask {m:?}")));
            }
        }
        let models = get("models")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<Model>().map_err(|e| bad("models", e)))
            .collect::<Result<Vec<_>, _>>()?;
        let folds: usize = parse(&raw, "folds")?;
        if folds < 2 {
            return Err(bad("folds", "need at least 2".into()));
        }
        let trees: usize = parse(&raw, "trees")?;
        if trees == 0 {
            return Err(bad("trees", "need at least 1".into()));
        }
        let cutoff: ImportanceCutoff = parse(&raw, "importance_cutoff")?;
        let tree_fit = match get("tree_fit") {
            "pooled" => TreeFit::Pooled,
            "first" => TreeFit::First,
            o => return Err(bad("tree_fit", format!("expected pooled or first, got {o:?}"))),
        };
        let threads: Option<usize> = opt(&raw, "threads")?;

        let cfg = RunConfig {
            targeting: paths("targeting"),
            reference: paths("reference"),
            output: PathBuf::from(get("output")),
            k,
            seed: parse(&raw, "seed")?,
            sampling: SamplingOverrides {
                desired_dataset_size: opt(&raw, "desired_dataset_size")?,
                targeting_total: opt(&raw, "targeting_total")?,
                reference_total: opt(&raw, "reference_total")?,
            },
            cluster_identity,
            allow_x: parse(&raw, "allow_x")?,
            species,
            numbered: path("numbered"),
            germline_dir: path("germline_dir"),
            profiles_dir: path("profiles_dir"),
            boundaries: path("boundaries"),
            canonical_rules: path("canonical_rules"),
            pka: path("pka"),
            matrix: path("matrix"),
            gap_score: parse(&raw, "gap_score")?,
            vocabulary: VocabularyParams {
                pi_min_fraction: fraction("pi_min_fraction", parse(&raw, "pi_min_fraction")?)?,
                pi_min_width: parse(&raw, "pi_min_width")?,
                pi_scope: parse::<PiScope>(&raw, "pi_scope")?,
                motif_count: parse::<MotifCount>(&raw, "motif_count")?,
            },
            empty_segments: match get("empty_segments") {
                "exclude" => EmptySegments::Exclude,
                "one" | "count_as_one" => EmptySegments::CountAsOne,
                o => return Err(bad("empty_segments", format!("expected exclude or one, got {o:?}"))),
            },
            png: parse(&raw, "png")?,
            cell_px: parse(&raw, "cell_px")?,
            salient: SalientParams {
                sided: parse::<Sided>(&raw, "fet")?,
                cutoff,
                biasing_threshold: fraction("biasing_threshold", parse(&raw, "biasing_threshold")?)?,
            },
            association_threshold: fraction("association_threshold", parse(&raw, "association_threshold")?)?,
            forest: ForestConfig { n_trees: trees, ..ForestConfig::default() },
            folds,
            masks,
            models,
            tree: TreeParams {
                min_leaf_fraction: fraction("min_leaf_fraction", parse(&raw, "min_leaf_fraction")?)?,
                stop: parse::<StopRule>(&raw, "stop")?,
            },
            min_se: {
                let v: f64 = parse(&raw, "min_se")?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad("min_se", format!("{v} is outside [0, 1]")));
                }
                v
            },
            tree_fit,
            threads,
            raw,
        };
        if cfg.pi_width_ok() {
            Ok(cfg)
        } else {
            Err(bad("pi_min_width", "must be positive".into()))
        }
    }

    fn pi_width_ok(&self) -> bool {
        self.vocabulary.pi_min_width > 0.0
    }

    /// Checks that every referenced input exists. Called before any compute.
    pub fn check_inputs(&self) -> Result<(), CliError> {
        if self.targeting.is_empty() {
            return Err(CliError::Config("targeting input not set".into()));
        }
        if self.reference.is_empty() {
            return Err(CliError::Config("reference input not set".into()));
        }
        let files = self
            .targeting
            .iter()
            .chain(&self.reference)
            .map(|p| ("input", p))
            .chain(self.numbered.iter().map(|p| ("numbered", p)))
            .chain(self.boundaries.iter().map(|p| ("boundaries", p)))
            .chain(self.canonical_rules.iter().map(|p| ("canonical_rules", p)))
            .chain(self.pka.iter().map(|p| ("pka", p)))
            .chain(self.matrix.iter().map(|p| ("matrix", p)));
        for (k, p) in files {
            if !p.is_file() {
                return Err(CliError::Config(format!("{k}: file {} does not exist", p.display())));
            }
        }
        for (k, p) in [("germline_dir", &self.germline_dir), ("profiles_dir", &self.profiles_dir)] {
            if let Some(p) = p {
                if !p.is_dir() {
                    return Err(CliError::Config(format!("{k}: directory {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// `key=value` lines for `keys`, in order; input to stage hashes.
    pub fn canonical(&self, keys: &[&str]) -> String {
        keys.iter().map(|k| format!("{k}={}\n", self.raw.get(*k).map(String::as_str).unwrap_or(""))).collect()
    }

    /// Every resolved key except thread count and output location, which
    /// do not change results.
    pub fn canonical_all(&self) -> String {
        self.raw
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "threads" | "output"))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

/// Splits `key=value` as given to `--set`.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}
