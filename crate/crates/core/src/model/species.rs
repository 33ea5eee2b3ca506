use std::collections::{BTreeSet, HashMap};

use super::{SequenceSet, SetError, Species};
use crate::annotate::GermlineCall;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesFilterOutcome {
    pub kept: SequenceSet,
    /// `(record id, called species)` for every removed record, in input order.
    pub removed: Vec<(String, Species)>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SpeciesFilterError {
    #[error("record {0:?} has no germline call")]
    MissingAnnotation(String),
    #[error("{0}")]
    Set(#[from] SetError),
}

/// Keeps records whose best germline call comes from an allowed species.
pub fn filter_by_species(
    set: &SequenceSet,
    calls: &HashMap<String, GermlineCall>,
    allowed: &BTreeSet<Species>,
) -> Result<SpeciesFilterOutcome, SpeciesFilterError> {
    let mut keep = Vec::with_capacity(set.len());
    let mut removed = Vec::new();
    for r in set.records() {
        let call = calls.get(&r.id).ok_or_else(|| SpeciesFilterError::MissingAnnotation(r.id.clone()))?;
        match call.species {
            Some(sp) if allowed.contains(&sp) => keep.push(r.clone()),
            Some(sp) => removed.push((r.id.clone(), sp)),
            None => return Err(SpeciesFilterError::MissingAnnotation(r.id.clone())),
        }
    }
    Ok(SpeciesFilterOutcome { kept: SequenceSet::new(keep)?, removed })
}
