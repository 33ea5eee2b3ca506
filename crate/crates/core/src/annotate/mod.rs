//! Feature extraction: germline calls, canonical classes, CDR-H3 pI bins and
//! positional motifs, assembled into fingerprints over a shared vocabulary.

mod binning;
mod canonical;
mod germline;
mod motif;
mod pi;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binning::{bin_label, bin_pi, PiBinning, PH_MAX, PH_MIN};
pub use canonical::{assign_canonical, CanonicalCalls, CanonicalRule, CanonicalRuleTable, LoopLength, RuleError};
pub use germline::{
    assign_germline, strip_allele, Gene, GeneHit, GeneSegment, GermlineCall, GermlineError, GermlineReference,
};
pub use motif::{mine_motifs, Motif, MotifCount, MAX_MOTIF, MIN_MOTIF};
pub use pi::{compute_pi, net_charge, PkaError, PkaTable};

use crate::align::GapPenalty;
use crate::fingerprint::{Feature, FeatureFingerprint, FeatureVocabulary, Segment};
use crate::model::SetLabel;
use crate::numbering::{extract_regions, BoundaryTable, ChainType, NumberedChain, Region};
use crate::residue::SubstitutionTable;

/// Which values drive the pI bin splits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PiScope {
    /// Targeting and reference values together.
    #[default]
    Pooled,
    Targeting,
}

impl std::str::FromStr for PiScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "pooled" => Ok(PiScope::Pooled),
            "targeting" => Ok(PiScope::Targeting),
            o => Err(format!("unknown pI scope {o:?}")),
        }
    }
}

/// Everything needed to annotate one record.
#[derive(Debug, Clone)]
pub struct Annotator {
    pub germlines: GermlineReference,
    pub rules: CanonicalRuleTable,
    pub pka: PkaTable,
    pub boundaries: BoundaryTable,
    pub table: SubstitutionTable,
    pub gaps: GapPenalty,
}

impl Default for Annotator {
    fn default() -> Self {
        Self {
            germlines: GermlineReference::bundled(),
            rules: CanonicalRuleTable::bundled(),
            pka: PkaTable::bundled(),
            boundaries: BoundaryTable::bundled(),
            table: SubstitutionTable::blosum62(),
            gaps: GapPenalty::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordAnnotation {
    pub id: String,
    pub set_label: SetLabel,
    pub germline: GermlineCall,
    pub canonical: CanonicalCalls,
    pub cdrh3: Option<String>,
    pub pi: Option<f64>,
}

impl Annotator {
    pub fn annotate(
        &self,
        id: &str,
        set_label: SetLabel,
        heavy: Option<&NumberedChain>,
        light: Option<&NumberedChain>,
    ) -> RecordAnnotation {
        let hmap = heavy.map(|c| extract_regions(c, &self.boundaries));
        let lmap = light.map(|c| extract_regions(c, &self.boundaries));
        let germ = |c: Option<&NumberedChain>, ct: ChainType| {
            c.map(|c| assign_germline(&c.sequence(), ct, &self.germlines, &self.table, self.gaps)).unwrap_or_default()
        };
        let germline = germ(heavy, ChainType::Heavy).merge(germ(light, ChainType::Light));
        let canonical = assign_canonical(hmap.as_ref(), lmap.as_ref(), &self.rules);
        let cdrh3 = hmap.as_ref().map(|m| m.residues(Region::CdrH3).to_string()).filter(|s| !s.is_empty());
        let pi = cdrh3.as_deref().map(|s| compute_pi(s, &self.pka));
        RecordAnnotation { id: id.to_string(), set_label, germline, canonical, cdrh3, pi }
    }
}

const GERM_SEGMENTS: [(GeneSegment, Segment); 4] = [
    (GeneSegment::HV, Segment::GermHV),
    (GeneSegment::HJ, Segment::GermHJ),
    (GeneSegment::LV, Segment::GermLV),
    (GeneSegment::LJ, Segment::GermLJ),
];

const CAN_SEGMENTS: [(Region, Segment); 6] = [
    (Region::CdrH1, Segment::CanH1),
    (Region::CdrH2, Segment::CanH2),
    (Region::CdrH3, Segment::CanH3),
    (Region::CdrL1, Segment::CanL1),
    (Region::CdrL2, Segment::CanL2),
    (Region::CdrL3, Segment::CanL3),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocabularyParams {
    pub pi_min_fraction: f64,
    pub pi_min_width: f64,
    pub pi_scope: PiScope,
    pub motif_count: MotifCount,
}

impl Default for VocabularyParams {
    fn default() -> Self {
        Self { pi_min_fraction: 0.10, pi_min_width: 0.3, pi_scope: PiScope::Pooled, motif_count: MotifCount::Presence }
    }
}

/// Vocabulary plus the data-driven pieces it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace {
    pub vocab: FeatureVocabulary,
    pub binning: PiBinning,
    pub motifs: Vec<Motif>,
}

/// Features a single annotation exhibits, before vocabulary lookup.
fn exhibited(a: &RecordAnnotation, binning: &PiBinning, motifs: &[Motif]) -> Vec<Feature> {
    let mut out = Vec::new();
    for (g, s) in GERM_SEGMENTS {
        if let Some(hit) = a.germline.get(g) {
            out.push(Feature::new(s, hit.gene.clone()));
        }
    }
    for (r, s) in CAN_SEGMENTS {
        if let Some(c) = a.canonical.get(r) {
            out.push(Feature::new(s, c.to_string()));
        }
    }
    if let Some(pi) = a.pi {
        out.push(Feature::new(Segment::PiBin, binning.label(binning.bin_of(pi))));
    }
    if let Some(h3) = &a.cdrh3 {
        for m in motifs.iter().filter(|m| m.occurs_in(h3)) {
            out.push(Feature::new(Segment::Motif, m.to_string()));
        }
    }
    out
}

/// Builds the vocabulary from annotations of both sets. Motifs are mined
/// per set and merged; pI bins come from the values selected by `pi_scope`,
/// keeping only bins that hold at least one value.
pub fn build_vocabulary(annotations: &[RecordAnnotation], params: VocabularyParams) -> FeatureSpace {
    let pis: Vec<f64> = annotations
        .iter()
        .filter(|a| params.pi_scope == PiScope::Pooled || a.set_label == SetLabel::Targeting)
        .filter_map(|a| a.pi)
        .collect();
    let binning = bin_pi(&pis, params.pi_min_fraction, params.pi_min_width);
    let mut motifs: Vec<Motif> = Vec::new();
    for label in [SetLabel::Targeting, SetLabel::Reference] {
        let h3s: Vec<&str> =
            annotations.iter().filter(|a| a.set_label == label).filter_map(|a| a.cdrh3.as_deref()).collect();
        for m in mine_motifs(&h3s, params.motif_count) {
            if !motifs.contains(&m) {
                motifs.push(m);
            }
        }
    }
    let features = annotations.iter().flat_map(|a| exhibited(a, &binning, &motifs)).collect();
    FeatureSpace { vocab: FeatureVocabulary::new(features), binning, motifs }
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("record {id}: feature {feature} is not in the vocabulary")]
    OutsideVocabulary { id: String, feature: String },
    #[error("fingerprint csv line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn build_fingerprint(a: &RecordAnnotation, space: &FeatureSpace) -> Result<FeatureFingerprint, AnnotateError> {
    let mut fp = FeatureFingerprint::new(space.vocab.len());
    for f in exhibited(a, &space.binning, &space.motifs) {
        let i = space
            .vocab
            .index_of(f.segment, &f.label)
            .ok_or_else(|| AnnotateError::OutsideVocabulary { id: a.id.clone(), feature: f.to_string() })?;
        fp.set(i);
    }
    Ok(fp)
}

/// Writes `id` then one 0/1 column per feature, headed `segment:label`.
pub fn write_fingerprints<W: Write>(
    rows: &[(String, FeatureFingerprint)],
    vocab: &FeatureVocabulary,
    out: W,
) -> Result<(), AnnotateError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(vocab.features().iter().map(|f| f.to_string()));
    w.write_record(&header)?;
    for (id, fp) in rows {
        let mut rec = vec![id.clone()];
        rec.extend((0..vocab.len()).map(|i| if fp.get(i) { "1" } else { "0" }.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fingerprints<R: Read>(
    input: R,
) -> Result<(FeatureVocabulary, Vec<(String, FeatureFingerprint)>), AnnotateError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("id") {
        return Err(AnnotateError::Format { line: 1, message: "first column must be id".into() });
    }
    let features = header
        .iter()
        .skip(1)
        .map(|h| h.parse::<Feature>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|message| AnnotateError::Format { line: 1, message })?;
    let vocab = FeatureVocabulary::from_ordered(features);
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != vocab.len() + 1 {
            return Err(AnnotateError::Format { line, message: "wrong column count".into() });
        }
        let mut fp = FeatureFingerprint::new(vocab.len());
        for (i, v) in row.iter().skip(1).enumerate() {
            match v {
                "1" => fp.set(i),
                "0" => {}
                _ => return Err(AnnotateError::Format { line, message: format!("bit {v:?}") }),
            }
        }
        rows.push((row[0].to_string(), fp));
    }
    Ok((vocab, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(id: &str, label: SetLabel, hv: Option<&str>, h2: Option<u32>, cdrh3: &str) -> RecordAnnotation {
        let mut canonical = CanonicalCalls::default();
        canonical.0[1] = h2;
        RecordAnnotation {
            id: id.into(),
            set_label: label,
            germline: GermlineCall {
                hv: hv.map(|g| GeneHit { gene: g.into(), species: crate::Species::Human, score: 1 }),
                ..Default::default()
            },
            canonical,
            cdrh3: Some(cdrh3.into()),
            pi: Some(compute_pi(cdrh3, &PkaTable::bundled())),
        }
    }

    fn sample() -> Vec<RecordAnnotation> {
        vec![
            ann("t1", SetLabel::Targeting, Some("IGHV3-23"), Some(3), "AALDY"),
            ann("t2", SetLabel::Targeting, Some("IGHV3-23"), Some(3), "AKDRGY"),
            ann("r1", SetLabel::Reference, Some("IGHV1-69"), None, "ARGGFDY"),
            ann("r2", SetLabel::Reference, None, Some(1), "ARDYW"),
        ]
    }

    #[test]
    fn fingerprint_bits_follow_annotations() {
        let a = sample();
        let space = build_vocabulary(&a, VocabularyParams::default());
        let fp = build_fingerprint(&a[0], &space).unwrap();
        assert_eq!(fp.width(), space.vocab.len());
        let hv = space.vocab.segment_range(Segment::GermHV);
        assert_eq!(fp.count_in(hv), 1);
        assert!(fp.get(space.vocab.index_of(Segment::GermHV, "IGHV3-23").unwrap()));
        for s in [Segment::GermLV, Segment::GermLJ, Segment::CanL1, Segment::CanL2, Segment::CanL3] {
            assert_eq!(fp.count_in(space.vocab.segment_range(s)), 0);
        }
        for s in Segment::ALL.iter().filter(|s| s.is_single_valued()) {
            for x in &a {
                let f = build_fingerprint(x, &space).unwrap();
                assert!(f.count_in(space.vocab.segment_range(*s)) <= 1);
            }
        }
        let no_hv = build_fingerprint(&a[3], &space).unwrap();
        assert_eq!(no_hv.count_in(space.vocab.segment_range(Segment::GermHV)), 0);
    }

    #[test]
    fn positional_motif_bit() {
        let a = sample();
        let mut space = build_vocabulary(&a, VocabularyParams::default());
        let m: Motif = "2_AL".parse().unwrap();
        if !space.motifs.contains(&m) {
            space.motifs.push(m.clone());
            let mut f = space.vocab.features().to_vec();
            f.push(Feature::new(Segment::Motif, m.to_string()));
            space.vocab = FeatureVocabulary::new(f);
        }
        let fp = build_fingerprint(&a[0], &space).unwrap();
        assert!(fp.get(space.vocab.index_of(Segment::Motif, "2_AL").unwrap()));
    }

    #[test]
    fn duplicated_input_gives_same_vocabulary() {
        let a = sample();
        let once = build_vocabulary(&a, VocabularyParams::default());
        let mut twice = a.clone();
        for (i, x) in a.iter().enumerate() {
            let mut y = x.clone();
            y.id = format!("dup{i}");
            twice.push(y);
        }
        let again = build_vocabulary(&twice, VocabularyParams::default());
        assert_eq!(once.vocab, again.vocab);
    }

    #[test]
    fn value_outside_vocabulary_is_an_error() {
        let a = sample();
        let space = build_vocabulary(&a[..2], VocabularyParams::default());
        let err = build_fingerprint(&a[2], &space).unwrap_err();
        assert!(matches!(err, AnnotateError::OutsideVocabulary { .. }));
    }

    #[test]
    fn csv_round_trip() {
        let a = sample();
        let space = build_vocabulary(&a, VocabularyParams::default());
        let rows: Vec<_> = a.iter().map(|x| (x.id.clone(), build_fingerprint(x, &space).unwrap())).collect();
        let mut buf = Vec::new();
        write_fingerprints(&rows, &space.vocab, &mut buf).unwrap();
        let (vocab, back) = read_fingerprints(buf.as_slice()).unwrap();
        assert_eq!(vocab, space.vocab);
        assert_eq!(back, rows);
    }

    #[test]
    fn annotator_on_profile_consensus() {
        let n = crate::numbering::Numberer::default();
        let p = n.profiles.profiles().iter().find(|p| p.name == "human_heavy").unwrap();
        let seq = String::from_utf8(p.consensus()).unwrap();
        let chain = n.number(&seq, ChainType::Heavy).unwrap().chain;
        let a = Annotator::default().annotate("x", SetLabel::Targeting, Some(&chain), None);
        assert_eq!(a.germline.hv.as_ref().unwrap().gene, "IGHV3-23");
        assert_eq!(a.cdrh3.as_deref(), Some("DRGYYFDY"));
        assert!(a.canonical.get(Region::CdrH3).is_some());
        assert!(a.germline.lv.is_none());
    }
}
