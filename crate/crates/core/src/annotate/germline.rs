use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{local_score, GapPenalty};
use crate::model::Species;
use crate::numbering::ChainType;
use crate::residue::SubstitutionTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GeneSegment {
    HV,
    HJ,
    LV,
    LJ,
}

impl GeneSegment {
    pub const ALL: [GeneSegment; 4] = [GeneSegment::HV, GeneSegment::HJ, GeneSegment::LV, GeneSegment::LJ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GeneSegment::HV => "hv",
            GeneSegment::HJ => "hj",
            GeneSegment::LV => "lv",
            GeneSegment::LJ => "lj",
        }
    }

    pub fn chain(&self) -> ChainType {
        match self {
            GeneSegment::HV | GeneSegment::HJ => ChainType::Heavy,
            GeneSegment::LV | GeneSegment::LJ => ChainType::Light,
        }
    }

    fn of(chain: ChainType) -> [GeneSegment; 2] {
        match chain {
            ChainType::Heavy => [GeneSegment::HV, GeneSegment::HJ],
            ChainType::Light => [GeneSegment::LV, GeneSegment::LJ],
        }
    }
}

/// Removes an allele suffix: `IGKV1-39*02` becomes `IGKV1-39`.
pub fn strip_allele(name: &str) -> &str {
    name.split('*').next().unwrap_or(name).trim()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gene {
    /// Name as stored, allele included.
    pub full_name: String,
    pub species: Species,
    pub segment: GeneSegment,
    pub sequence: Vec<u8>,
}

impl Gene {
    pub fn name(&self) -> &str {
        strip_allele(&self.full_name)
    }
}

#[derive(Debug, Error)]
pub enum GermlineError {
    #[error("germline file {file}: {message}")]
    Malformed { file: String, message: String },
    #[error("germline directory {0} holds no gene files")]
    Empty(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Germline genes keyed by species and segment.
#[derive(Debug, Clone, Default)]
pub struct GermlineReference {
    genes: Vec<Gene>,
}

fn parse_stem(stem: &str) -> Option<(Species, GeneSegment)> {
    let (sp, seg) = stem.rsplit_once('_')?;
    let segment = GeneSegment::ALL.into_iter().find(|g| g.as_str() == seg)?;
    Some((sp.parse().ok()?, segment))
}

impl GermlineReference {
    pub fn new(genes: Vec<Gene>) -> Self {
        Self { genes }
    }

    /// Adds the genes of one FASTA file named `{species}_{segment}`.
    pub fn add_fasta(&mut self, stem: &str, text: &str) -> Result<(), GermlineError> {
        let bad = |message: String| GermlineError::Malformed { file: stem.into(), message };
        let (species, segment) = parse_stem(stem).ok_or_else(|| bad("name must be {species}_{hv|hj|lv|lj}".into()))?;
        let mut current: Option<Gene> = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(h) = line.strip_prefix('>') {
                if let Some(g) = current.take() {
                    self.push_checked(g, stem)?;
                }
                let name = h.split_whitespace().next().unwrap_or_default();
                current = Some(Gene { full_name: name.to_string(), species, segment, sequence: Vec::new() });
            } else {
                let g = current.as_mut().ok_or_else(|| bad("sequence before header".into()))?;
                g.sequence.extend(line.bytes().map(|b| b.to_ascii_uppercase()));
            }
        }
        if let Some(g) = current.take() {
            self.push_checked(g, stem)?;
        }
        Ok(())
    }

    fn push_checked(&mut self, g: Gene, stem: &str) -> Result<(), GermlineError> {
        if g.full_name.is_empty() || g.sequence.is_empty() {
            return Err(GermlineError::Malformed {
                file: stem.into(),
                message: format!("empty name or sequence near {:?}", g.full_name),
            });
        }
        self.genes.push(g);
        Ok(())
    }

    pub fn bundled() -> Self {
        let mut r = Self::default();
        for (stem, text) in crate::data::GERMLINES {
            r.add_fasta(stem, text).expect("bundled germline parses");
        }
        r
    }

    /// Loads every `{species}_{segment}.fasta` (or `.fa`) file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, GermlineError> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "fasta" || e == "fa"))
            .collect();
        paths.sort();
        let mut r = Self::default();
        for p in paths {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            r.add_fasta(&stem, &std::fs::read_to_string(&p)?)?;
        }
        if r.genes.is_empty() {
            return Err(GermlineError::Empty(dir.display().to_string()));
        }
        Ok(r)
    }

    pub fn genes(&self) -> &[Gene] {
        &self.genes
    }

    pub fn species(&self) -> Vec<Species> {
        let mut s: Vec<_> = self.genes.iter().map(|g| g.species).collect();
        s.sort();
        s.dedup();
        s
    }
}

/// One best hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneHit {
    pub gene: String,
    pub species: Species,
    pub score: i32,
}

/// Germline calls for one record, allele suffixes stripped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GermlineCall {
    pub hv: Option<GeneHit>,
    pub hj: Option<GeneHit>,
    pub lv: Option<GeneHit>,
    pub lj: Option<GeneHit>,
    /// Species of the heavy V hit, else of the light V hit.
    pub species: Option<Species>,
}

impl GermlineCall {
    pub fn get(&self, seg: GeneSegment) -> Option<&GeneHit> {
        match seg {
            GeneSegment::HV => self.hv.as_ref(),
            GeneSegment::HJ => self.hj.as_ref(),
            GeneSegment::LV => self.lv.as_ref(),
            GeneSegment::LJ => self.lj.as_ref(),
        }
    }

    fn slot(&mut self, seg: GeneSegment) -> &mut Option<GeneHit> {
        match seg {
            GeneSegment::HV => &mut self.hv,
            GeneSegment::HJ => &mut self.hj,
            GeneSegment::LV => &mut self.lv,
            GeneSegment::LJ => &mut self.lj,
        }
    }

    /// Combines a heavy-chain and a light-chain partial call.
    pub fn merge(mut self, other: GermlineCall) -> GermlineCall {
        for seg in GeneSegment::ALL {
            if self.get(seg).is_none() {
                *self.slot(seg) = other.get(seg).cloned();
            }
        }
        self.species = self.hv.as_ref().or(self.lv.as_ref()).map(|h| h.species);
        self
    }
}

/// Best-scoring V and J genes for one chain by local alignment score. Ties go
/// to the lexicographically smallest gene name.
pub fn assign_germline(
    chain: &str,
    chain_type: ChainType,
    refdb: &GermlineReference,
    table: &SubstitutionTable,
    gaps: GapPenalty,
) -> GermlineCall {
    let q = chain.as_bytes();
    let mut call = GermlineCall::default();
    for seg in GeneSegment::of(chain_type) {
        let mut best: Option<(&Gene, i32)> = None;
        for g in refdb.genes.iter().filter(|g| g.segment == seg) {
            let s = local_score(&g.sequence, q, table, gaps);
            let better = match best {
                None => true,
                Some((bg, bs)) => s > bs || (s == bs && (g.name(), &g.full_name) < (bg.name(), &bg.full_name)),
            };
            if better {
                best = Some((g, s));
            }
        }
        *call.slot(seg) = best.map(|(g, s)| GeneHit { gene: g.name().to_string(), species: g.species, score: s });
    }
    call.species = call.hv.as_ref().or(call.lv.as_ref()).map(|h| h.species);
    call
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(seq: &str, ct: ChainType, db: &GermlineReference) -> GermlineCall {
        assign_germline(seq, ct, db, &SubstitutionTable::blosum62(), GapPenalty::default())
    }

    #[test]
    fn self_match_wins() {
        let db = GermlineReference::bundled();
        let g = db.genes().iter().find(|g| g.name() == "IGHV3-23").unwrap();
        let c = call(std::str::from_utf8(&g.sequence).unwrap(), ChainType::Heavy, &db);
        assert_eq!(c.hv.unwrap().gene, "IGHV3-23");
        assert_eq!(c.species, Some(Species::Human));
        assert!(c.lv.is_none());
    }

    #[test]
    fn allele_is_stripped() {
        assert_eq!(strip_allele("IGKV1-39*02"), "IGKV1-39");
        assert_eq!(strip_allele("IGHJ4"), "IGHJ4");
        let mut db = GermlineReference::default();
        db.add_fasta("human_lv", ">IGKV1-39*02\nDIQMTQSPSSLSASVGDRVTITCRASQSISSYLNWYQQKPGKAPKLLIYAASSLQSGVPSRFSGSGSGTDFTLTISSLQPEDFATYYCQQSYSTP\n")
            .unwrap();
        db.add_fasta("human_lj", ">IGKJ1*01\nWTFGQGTKVEIK\n").unwrap();
        let c = call("DIQMTQSPSSLSASVGDRVTITCRASQSISSYLNWYQQKPGKAPKLLIYAASSLQSGVPSRFSGSGSGTDFTLTISSLQPEDFATYYCQQSYSTPWTFGQGTKVEIK", ChainType::Light, &db);
        assert_eq!(c.lv.unwrap().gene, "IGKV1-39");
        assert_eq!(c.lj.unwrap().gene, "IGKJ1");
    }

    #[test]
    fn tie_goes_to_smaller_name() {
        // the query differs from each gene at one symmetric position
        let base = "EVQLVSSGGGLVQPGGSLRLSCAASGFTFS";
        assert_eq!(base.as_bytes()[5], base.as_bytes()[20]);
        let mut a = base.as_bytes().to_vec();
        let mut b = a.clone();
        a[5] = b'K';
        b[20] = b'K';
        let mut q = base.as_bytes().to_vec();
        q[5] = b'R';
        q[20] = b'R';
        let fasta =
            format!(">IGHV9-2*01\n{}\n>IGHV9-1*01\n{}\n", String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap());
        let mut db = GermlineReference::default();
        db.add_fasta("mouse_hv", &fasta).unwrap();
        let c = call(std::str::from_utf8(&q).unwrap(), ChainType::Heavy, &db);
        let t = SubstitutionTable::blosum62();
        let g = GapPenalty::default();
        let scores: Vec<i32> = db.genes().iter().map(|x| local_score(&x.sequence, &q, &t, g)).collect();
        assert_eq!(scores[0], scores[1]);
        let hit = c.hv.unwrap();
        assert_eq!(hit.gene, "IGHV9-1");
        assert_eq!(hit.species, Species::Mouse);
    }

    #[test]
    fn merge_takes_species_from_heavy() {
        let h = GermlineCall {
            hv: Some(GeneHit { gene: "IGHV1".into(), species: Species::Mouse, score: 1 }),
            ..Default::default()
        };
        let l = GermlineCall {
            lv: Some(GeneHit { gene: "IGKV1".into(), species: Species::Human, score: 1 }),
            ..Default::default()
        };
        assert_eq!(h.clone().merge(l.clone()).species, Some(Species::Mouse));
        assert_eq!(GermlineCall::default().merge(l).species, Some(Species::Human));
    }
}
