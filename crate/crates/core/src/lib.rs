//! Contrast a targeting antibody set against a reference set.
//!
//! The crate is organised along the analysis pipeline:
//!
//! * [`model`]: records, ingestion, species filtering, representative
//!   clustering and the k-iteration sampling engine.
//! * [`numbering`]: Chothia numbering by profile alignment, region slicing,
//!   and import/export of externally numbered chains.
//! * [`annotate`]: germline, canonical structure, CDR-H3 pI and positional
//!   motif features, assembled into binary fingerprints.
//! * [`simstats`]: sequence and fingerprint similarity matrices plus the
//!   rank-sum hypothesis tests run over sampled iterations.
//! * [`salient`]: Fisher screening, forest importance, frequency, biasing and
//!   co-occurrence analysis.
//! * [`mlbench`]: cross-validated ROC/AUC for SVM, random forest and AdaBoost.
//! * [`designtree`]: Gini trees annotated with split efficiency and error rate.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iterators otherwise. Results are
//! identical either way.

pub mod align;
pub mod annotate;
pub mod data;
pub mod designtree;
pub mod fingerprint;
pub mod forest;
pub mod mlbench;
pub mod model;
pub mod numbering;
pub mod par;
pub mod residue;
pub mod salient;
pub mod seed;
pub mod simstats;

pub use fingerprint::FeatureFingerprint;
pub use model::{SequenceRecord, SequenceSet, SetLabel, Species};
pub use numbering::{ChainType, ChothiaPosition, NumberedChain};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
