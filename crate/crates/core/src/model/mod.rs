//! Records, sets, and everything that happens before numbering: ingestion,
//! species filtering, representative clustering and k-iteration sampling.

mod cluster;
mod parse;
mod sampling;
mod species;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{cluster_representatives, Cluster, ClusterOutcome};
pub use parse::{parse_sequences, write_csv, InputFormat, ParseError};
pub use sampling::{
    plan_sampling, sample_iterations, SampledIteration, SamplingError, SamplingOverrides, SamplingPlan,
};
pub use species::{filter_by_species, SpeciesFilterError, SpeciesFilterOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetLabel {
    Targeting,
    Reference,
}

impl SetLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SetLabel::Targeting => "targeting",
            SetLabel::Reference => "reference",
        }
    }
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SetLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "targeting" | "target" | "t" => Ok(SetLabel::Targeting),
            "reference" | "ref" | "r" => Ok(SetLabel::Reference),
            other => Err(format!("unknown set label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Species {
    Human,
    Mouse,
    Rat,
    Rabbit,
    Pig,
    RhesusMonkey,
}

impl Species {
    pub const ALL: [Species; 6] =
        [Species::Human, Species::Mouse, Species::Rat, Species::Rabbit, Species::Pig, Species::RhesusMonkey];

    pub fn as_str(&self) -> &'static str {
        match self {
            Species::Human => "human",
            Species::Mouse => "mouse",
            Species::Rat => "rat",
            Species::Rabbit => "rabbit",
            Species::Pig => "pig",
            Species::RhesusMonkey => "rhesus",
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Species {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "human" | "homo_sapiens" => Ok(Species::Human),
            "mouse" | "murine" | "mus_musculus" => Ok(Species::Mouse),
            "rat" => Ok(Species::Rat),
            "rabbit" => Ok(Species::Rabbit),
            "pig" => Ok(Species::Pig),
            "rhesus" | "rhesus_monkey" | "rhesusmonkey" => Ok(Species::RhesusMonkey),
            other => Err(format!("unknown species {other:?}")),
        }
    }
}

/// One antibody entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    pub dataset_id: String,
    pub set_label: SetLabel,
    pub heavy: Option<String>,
    pub light: Option<String>,
    #[serde(default)]
    pub species_hint: Option<Species>,
}

impl SequenceRecord {
    pub fn total_length(&self) -> usize {
        self.heavy.as_ref().map_or(0, String::len) + self.light.as_ref().map_or(0, String::len)
    }

    /// Heavy then light, whichever are present.
    pub fn concatenated(&self) -> String {
        let mut s = String::with_capacity(self.total_length());
        if let Some(h) = &self.heavy {
            s.push_str(h);
        }
        if let Some(l) = &self.light {
            s.push_str(l);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    pub label: SetLabel,
    pub members: Vec<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SetError {
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("dataset {0:?} mixes targeting and reference records")]
    MixedDataset(String),
    #[error("record {0:?} has no chains")]
    NoChains(String),
}

/// Ordered records plus their dataset partition. Datasets appear in order of
/// first occurrence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSet {
    records: Vec<SequenceRecord>,
    datasets: Vec<Dataset>,
}

impl SequenceSet {
    pub fn new(records: Vec<SequenceRecord>) -> Result<Self, SetError> {
        let mut ids = HashMap::with_capacity(records.len());
        let mut datasets: Vec<Dataset> = Vec::new();
        let mut by_id: HashMap<String, usize> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if r.heavy.is_none() && r.light.is_none() {
                return Err(SetError::NoChains(r.id.clone()));
            }
            if ids.insert(r.id.clone(), i).is_some() {
                return Err(SetError::DuplicateId(r.id.clone()));
            }
            match by_id.get(&r.dataset_id) {
                Some(&d) => {
                    if datasets[d].label != r.set_label {
                        return Err(SetError::MixedDataset(r.dataset_id.clone()));
                    }
                    datasets[d].members.push(i);
                }
                None => {
                    by_id.insert(r.dataset_id.clone(), datasets.len());
                    datasets.push(Dataset { id: r.dataset_id.clone(), label: r.set_label, members: vec![i] });
                }
            }
        }
        Ok(Self { records, datasets })
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.datasets
    }

    pub fn datasets_with(&self, label: SetLabel) -> impl Iterator<Item = &Dataset> {
        self.datasets.iter().filter(move |d| d.label == label)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SequenceRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn labels(&self) -> Vec<SetLabel> {
        self.records.iter().map(|r| r.set_label).collect()
    }

    pub fn count(&self, label: SetLabel) -> usize {
        self.records.iter().filter(|r| r.set_label == label).count()
    }

    /// Keeps records for which `keep` holds, preserving order.
    pub fn retain<F: FnMut(&SequenceRecord) -> bool>(&self, mut keep: F) -> Self {
        let kept: Vec<_> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        Self::new(kept).expect("subset of a valid set is valid")
    }

    pub fn subset(&self, label: SetLabel) -> Self {
        self.retain(|r| r.set_label == label)
    }

    /// Appends `other` after `self`.
    pub fn merge(&self, other: &SequenceSet) -> Result<Self, SetError> {
        let mut all = self.records.clone();
        all.extend(other.records.iter().cloned());
        Self::new(all)
    }

    pub fn into_records(self) -> Vec<SequenceRecord> {
        self.records
    }
}
