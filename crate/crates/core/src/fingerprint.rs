//! Feature vocabulary and the binary fingerprints laid out over it.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Fingerprint segments in vocabulary order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Segment {
    GermHV,
    GermHJ,
    GermLV,
    GermLJ,
    CanH1,
    CanH2,
    CanH3,
    CanL1,
    CanL2,
    CanL3,
    PiBin,
    Motif,
}

impl Segment {
    pub const ALL: [Segment; 12] = [
        Segment::GermHV,
        Segment::GermHJ,
        Segment::GermLV,
        Segment::GermLJ,
        Segment::CanH1,
        Segment::CanH2,
        Segment::CanH3,
        Segment::CanL1,
        Segment::CanL2,
        Segment::CanL3,
        Segment::PiBin,
        Segment::Motif,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Segment::GermHV => "GermHV",
            Segment::GermHJ => "GermHJ",
            Segment::GermLV => "GermLV",
            Segment::GermLJ => "GermLJ",
            Segment::CanH1 => "CanH1",
            Segment::CanH2 => "CanH2",
            Segment::CanH3 => "CanH3",
            Segment::CanL1 => "CanL1",
            Segment::CanL2 => "CanL2",
            Segment::CanL3 => "CanL3",
            Segment::PiBin => "PiBin",
            Segment::Motif => "Motif",
        }
    }

    pub fn is_germline(&self) -> bool {
        matches!(self, Segment::GermHV | Segment::GermHJ | Segment::GermLV | Segment::GermLJ)
    }

    pub fn is_canonical(&self) -> bool {
        matches!(
            self,
            Segment::CanH1 | Segment::CanH2 | Segment::CanH3 | Segment::CanL1 | Segment::CanL2 | Segment::CanL3
        )
    }

    /// At most one bit may be set in single-valued segments.
    pub fn is_single_valued(&self) -> bool {
        *self != Segment::Motif
    }

    /// Segments describing the heavy chain (CDR-H3 features included).
    pub fn is_heavy(&self) -> bool {
        matches!(
            self,
            Segment::GermHV
                | Segment::GermHJ
                | Segment::CanH1
                | Segment::CanH2
                | Segment::CanH3
                | Segment::PiBin
                | Segment::Motif
        )
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Segment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Segment::ALL
            .iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s.trim()))
            .copied()
            .ok_or_else(|| format!("unknown segment {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Feature {
    pub segment: Segment,
    pub label: String,
}

impl Feature {
    pub fn new(segment: Segment, label: impl Into<String>) -> Self {
        Self { segment, label: label.into() }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.segment, self.label)
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (seg, label) = s.split_once(':').ok_or_else(|| format!("feature {s:?} lacks ':'"))?;
        Ok(Feature::new(seg.parse()?, label))
    }
}

/// Ordering inside a segment: numeric for canonical classes, by lower edge
/// for pI bins, by (start, motif) for motifs, otherwise lexicographic.
#[derive(Debug, PartialEq, PartialOrd)]
enum LabelKey<'a> {
    Number(f64, &'a str),
    Motif(u64, &'a str),
    Text(&'a str),
}

fn label_key(f: &Feature) -> LabelKey<'_> {
    let l = f.label.as_str();
    match f.segment {
        s if s.is_canonical() => l.parse().map_or(LabelKey::Text(l), |n| LabelKey::Number(n, l)),
        Segment::PiBin => {
            l.split_once('-').and_then(|(lo, _)| lo.parse().ok()).map_or(LabelKey::Text(l), |n| LabelKey::Number(n, l))
        }
        Segment::Motif => l
            .split_once('_')
            .and_then(|(st, seq)| st.parse().ok().map(|n| LabelKey::Motif(n, seq)))
            .unwrap_or(LabelKey::Text(l)),
        _ => LabelKey::Text(l),
    }
}

/// Ordered, duplicate-free feature list with contiguous segments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureVocabulary {
    features: Vec<Feature>,
    index: HashMap<Feature, usize>,
}

impl FeatureVocabulary {
    /// Sorts and deduplicates `features` into the canonical order.
    pub fn new(mut features: Vec<Feature>) -> Self {
        features.sort_by(|a, b| {
            a.segment
                .cmp(&b.segment)
                .then_with(|| label_key(a).partial_cmp(&label_key(b)).unwrap_or(std::cmp::Ordering::Equal))
                .then_with(|| a.label.cmp(&b.label))
        });
        features.dedup();
        Self::from_ordered(features)
    }

    /// Keeps the given order; used when reading a persisted vocabulary.
    pub fn from_ordered(features: Vec<Feature>) -> Self {
        let index = features.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
        Self { features, index }
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, segment: Segment, label: &str) -> Option<usize> {
        self.index.get(&Feature::new(segment, label)).copied()
    }

    /// Columns belonging to `segment`.
    pub fn segment_range(&self, segment: Segment) -> Range<usize> {
        let start = self.features.partition_point(|f| f.segment < segment);
        let end = self.features.partition_point(|f| f.segment <= segment);
        start..end
    }

    pub fn segment_of(&self, column: usize) -> Segment {
        self.features[column].segment
    }
}

/// Fixed-width bit vector over a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureFingerprint {
    width: usize,
    words: Vec<u64>,
}

impl FeatureFingerprint {
    pub fn new(width: usize) -> Self {
        Self { width, words: vec![0; width.div_ceil(64)] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut fp = Self::new(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                fp.set(i);
            }
        }
        fp
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.width, "bit {i} outside width {}", self.width);
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&i| self.get(i))
    }

    pub fn count_in(&self, r: Range<usize>) -> usize {
        r.filter(|&i| self.get(i)).count()
    }

    /// `(|A ∩ B|, |A ∪ B|)` restricted to columns `r`.
    pub fn overlap_in(&self, other: &Self, r: Range<usize>) -> (usize, usize) {
        let (mut both, mut any) = (0, 0);
        for i in r {
            let (a, b) = (self.get(i), other.get(i));
            both += usize::from(a && b);
            any += usize::from(a || b);
        }
        (both, any)
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.width).map(|i| self.get(i)).collect()
    }

    /// Copy with only `columns` kept, in the order given.
    pub fn project(&self, columns: &[usize]) -> Self {
        let mut out = Self::new(columns.len());
        for (k, &c) in columns.iter().enumerate() {
            if self.get(c) {
                out.set(k);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_order() {
        let v = FeatureVocabulary::new(vec![
            Feature::new(Segment::Motif, "10_AR"),
            Feature::new(Segment::Motif, "2_YG"),
            Feature::new(Segment::CanH2, "10"),
            Feature::new(Segment::CanH2, "6"),
            Feature::new(Segment::PiBin, "7-14"),
            Feature::new(Segment::PiBin, "3.5-5.25"),
            Feature::new(Segment::GermHV, "IGHV3-23"),
            Feature::new(Segment::GermHV, "IGHV1-69"),
            Feature::new(Segment::GermHV, "IGHV1-69"),
        ]);
        let labels: Vec<String> = v.features().iter().map(|f| f.to_string()).collect();
        assert_eq!(
            labels,
            [
                "GermHV:IGHV1-69",
                "GermHV:IGHV3-23",
                "CanH2:6",
                "CanH2:10",
                "PiBin:3.5-5.25",
                "PiBin:7-14",
                "Motif:2_YG",
                "Motif:10_AR"
            ]
        );
        assert_eq!(v.segment_range(Segment::CanH2), 2..4);
        assert_eq!(v.segment_range(Segment::CanL1), 4..4);
        assert_eq!(v.index_of(Segment::Motif, "10_AR"), Some(7));
    }

    #[test]
    fn bits() {
        let mut fp = FeatureFingerprint::new(130);
        fp.set(0);
        fp.set(64);
        fp.set(129);
        assert_eq!(fp.count_ones(), 3);
        assert_eq!(fp.ones().collect::<Vec<_>>(), [0, 64, 129]);
        let other = FeatureFingerprint::from_bits(&(0..130).map(|i| i == 64 || i == 65).collect::<Vec<_>>());
        assert_eq!(fp.overlap_in(&other, 60..70), (1, 2));
        assert_eq!(fp.project(&[129, 1, 64]).to_bits(), [true, false, true]);
    }

    #[test]
    fn feature_text_round_trip() {
        let f: Feature = "PiBin:3.9375-4.375".parse().unwrap();
        assert_eq!(f, Feature::new(Segment::PiBin, "3.9375-4.375"));
        assert_eq!(f.to_string(), "PiBin:3.9375-4.375");
    }
}
