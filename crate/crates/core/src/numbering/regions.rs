use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChainType, ChothiaPosition, NumberedChain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    FrH1,
    CdrH1,
    FrH2,
    CdrH2,
    FrH3,
    CdrH3,
    FrH4,
    FrL1,
    CdrL1,
    FrL2,
    CdrL2,
    FrL3,
    CdrL3,
    FrL4,
}

impl Region {
    pub const HEAVY: [Region; 7] =
        [Region::FrH1, Region::CdrH1, Region::FrH2, Region::CdrH2, Region::FrH3, Region::CdrH3, Region::FrH4];
    pub const LIGHT: [Region; 7] =
        [Region::FrL1, Region::CdrL1, Region::FrL2, Region::CdrL2, Region::FrL3, Region::CdrL3, Region::FrL4];
    pub const CDRS: [Region; 6] =
        [Region::CdrH1, Region::CdrH2, Region::CdrH3, Region::CdrL1, Region::CdrL2, Region::CdrL3];

    /// Regions of one chain in N- to C-terminal order.
    pub fn of_chain(chain: ChainType) -> &'static [Region; 7] {
        match chain {
            ChainType::Heavy => &Self::HEAVY,
            ChainType::Light => &Self::LIGHT,
        }
    }

    pub fn is_cdr(&self) -> bool {
        Self::CDRS.contains(self)
    }

    pub fn chain(&self) -> ChainType {
        if Self::HEAVY.contains(self) {
            ChainType::Heavy
        } else {
            ChainType::Light
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::FrH1 => "FRH1",
            Region::CdrH1 => "CDRH1",
            Region::FrH2 => "FRH2",
            Region::CdrH2 => "CDRH2",
            Region::FrH3 => "FRH3",
            Region::CdrH3 => "CDRH3",
            Region::FrH4 => "FRH4",
            Region::FrL1 => "FRL1",
            Region::CdrL1 => "CDRL1",
            Region::FrL2 => "FRL2",
            Region::CdrL2 => "CDRL2",
            Region::FrL3 => "FRL3",
            Region::CdrL3 => "CDRL3",
            Region::FrL4 => "FRL4",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase().replace(['-', '_'], "");
        Self::HEAVY
            .iter()
            .chain(&Self::LIGHT)
            .find(|r| r.as_str() == key)
            .copied()
            .ok_or_else(|| format!("unknown region {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdrBoundary {
    pub region: Region,
    pub start: u32,
    pub end: u32,
    /// Column that receives insertion codes when the loop is longer than
    /// its base span.
    pub apex: u32,
}

impl CdrBoundary {
    pub fn base_len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    /// Position numbers for a loop of `len` residues: numbers up to the apex,
    /// extra copies of the apex, then the rest. Short loops drop the numbers
    /// closest to the apex first.
    pub fn loop_numbers(&self, len: usize) -> Vec<u32> {
        let base: Vec<u32> = (self.start..=self.end).collect();
        if len >= base.len() {
            let mut out: Vec<u32> = base.iter().copied().filter(|&n| n <= self.apex).collect();
            out.extend(std::iter::repeat_n(self.apex, len - base.len()));
            out.extend(base.iter().copied().filter(|&n| n > self.apex));
            out
        } else {
            let mut by_distance = base.clone();
            by_distance.sort_by_key(|&n| (n.abs_diff(self.apex), n));
            let dropped = &by_distance[..base.len() - len];
            base.into_iter().filter(|n| !dropped.contains(n)).collect()
        }
    }
}

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("boundary table line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("boundary table lacks {0}")]
    Missing(Region),
}

/// CDR spans per chain; framework regions are the complements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryTable {
    cdrs: Vec<CdrBoundary>,
}

impl BoundaryTable {
    /// Parses `region,chain,start,end,apex`.
    pub fn parse(text: &str) -> Result<Self, BoundaryError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut cdrs = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let bad = |message: String| BoundaryError::Malformed { line, message };
            let row = row.map_err(|e| bad(e.to_string()))?;
            if row.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", row.len())));
            }
            let region: Region = row[0].parse().map_err(bad)?;
            if !region.is_cdr() {
                return Err(bad(format!("{region} is not a CDR")));
            }
            let chain: ChainType = row[1].parse().map_err(bad)?;
            if chain != region.chain() {
                return Err(bad(format!("{region} is not on chain {chain}")));
            }
            let num = |s: &str| s.parse::<u32>().map_err(|e| bad(format!("{s:?}: {e}")));
            let (start, end, apex) = (num(&row[2])?, num(&row[3])?, num(&row[4])?);
            if !(start <= apex && apex <= end && start > 0) {
                return Err(bad("need 0 < start <= apex <= end".into()));
            }
            cdrs.push(CdrBoundary { region, start, end, apex });
        }
        for r in Region::CDRS {
            if !cdrs.iter().any(|c| c.region == r) {
                return Err(BoundaryError::Missing(r));
            }
        }
        cdrs.sort_by_key(|c| (c.region.chain(), c.start));
        for w in cdrs.windows(2) {
            if w[0].region.chain() == w[1].region.chain() && w[0].end >= w[1].start {
                return Err(BoundaryError::Malformed {
                    line: 0,
                    message: format!("{} overlaps {}", w[0].region, w[1].region),
                });
            }
        }
        Ok(Self { cdrs })
    }

    pub fn bundled() -> Self {
        Self::parse(crate::data::BOUNDARIES).expect("bundled boundary table parses")
    }

    pub fn cdr(&self, region: Region) -> Option<&CdrBoundary> {
        self.cdrs.iter().find(|c| c.region == region)
    }

    /// Region holding position number `n` on `chain`.
    pub fn region_of(&self, chain: ChainType, n: u32) -> Region {
        let order = Region::of_chain(chain);
        let mut k = 0;
        for c in self.cdrs.iter().filter(|c| c.region.chain() == chain) {
            if n < c.start {
                break;
            }
            if n <= c.end {
                return c.region;
            }
            k += 1;
        }
        order[2 * k]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpan {
    pub region: Region,
    pub residues: String,
    pub first: Option<ChothiaPosition>,
    pub last: Option<ChothiaPosition>,
}

impl RegionSpan {
    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }
}

/// Region slices of one numbered chain, in chain order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionMap {
    pub chain_type: ChainType,
    pub spans: Vec<RegionSpan>,
    positions: Vec<(ChothiaPosition, u8)>,
}

impl RegionMap {
    pub fn span(&self, region: Region) -> Option<&RegionSpan> {
        self.spans.iter().find(|s| s.region == region)
    }

    /// Residues of `region`; empty when the region is absent.
    pub fn residues(&self, region: Region) -> &str {
        self.span(region).map_or("", |s| s.residues.as_str())
    }

    pub fn empty_regions(&self) -> impl Iterator<Item = Region> + '_ {
        self.spans.iter().filter(|s| s.is_empty()).map(|s| s.region)
    }

    pub fn residue_at(&self, pos: ChothiaPosition) -> Option<u8> {
        self.positions.binary_search_by(|(p, _)| p.cmp(&pos)).ok().map(|i| self.positions[i].1)
    }
}

pub fn extract_regions(chain: &NumberedChain, boundaries: &BoundaryTable) -> RegionMap {
    let spans = Region::of_chain(chain.chain_type)
        .iter()
        .map(|&region| {
            let mut span = RegionSpan { region, residues: String::new(), first: None, last: None };
            for &(p, r) in chain.residues() {
                if boundaries.region_of(chain.chain_type, p.number) == region {
                    span.first.get_or_insert(p);
                    span.last = Some(p);
                    span.residues.push(r as char);
                }
            }
            span
        })
        .collect();
    RegionMap { chain_type: chain.chain_type, spans, positions: chain.residues().to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numbering::Source;

    fn chain(ct: ChainType, from: u32, to: u32) -> NumberedChain {
        let res = (from..=to).map(|n| (ChothiaPosition::new(n), b'A' + (n % 20) as u8)).collect();
        NumberedChain::new(ct, res, Source::Imported).unwrap()
    }

    #[test]
    fn minimal_h1_chain() {
        let t = BoundaryTable::bundled();
        let m = extract_regions(&chain(ChainType::Heavy, 26, 32), &t);
        assert_eq!(m.residues(Region::CdrH1).len(), 7);
        let empty: Vec<_> = m.empty_regions().collect();
        assert_eq!(empty.len(), 6);
        assert!(!empty.contains(&Region::CdrH1));
    }

    #[test]
    fn h3_span_includes_insertions() {
        let t = BoundaryTable::bundled();
        let mut res: Vec<_> = (90..=105).map(|n| (ChothiaPosition::new(n), b'G')).collect();
        res.insert(11, (ChothiaPosition::with_insertion(100, 'A'), b'W'));
        let c = NumberedChain::new(ChainType::Heavy, res, Source::Imported).unwrap();
        let m = extract_regions(&c, &t);
        let h3 = m.span(Region::CdrH3).unwrap();
        assert_eq!(h3.residues, "GGGGGGWGG");
        assert_eq!(h3.first, Some(ChothiaPosition::new(95)));
        assert_eq!(h3.last, Some(ChothiaPosition::new(102)));
        assert_eq!(m.residues(Region::FrH3), "GGGGG");
    }

    #[test]
    fn empty_chain_has_only_empty_regions() {
        let c = NumberedChain::new(ChainType::Light, vec![], Source::Imported).unwrap();
        let m = extract_regions(&c, &BoundaryTable::bundled());
        assert_eq!(m.empty_regions().count(), 7);
    }

    #[test]
    fn tiling_reproduces_sequence() {
        let t = BoundaryTable::bundled();
        for ct in [ChainType::Heavy, ChainType::Light] {
            let c = chain(ct, 1, 113);
            let m = extract_regions(&c, &t);
            let joined: String = m.spans.iter().map(|s| s.residues.as_str()).collect();
            assert_eq!(joined, c.sequence());
        }
    }

    #[test]
    fn loop_numbers_follow_apex_rule() {
        let h3 = *BoundaryTable::bundled().cdr(Region::CdrH3).unwrap();
        assert_eq!(h3.loop_numbers(8), (95..=102).collect::<Vec<_>>());
        assert_eq!(h3.loop_numbers(10), [95, 96, 97, 98, 99, 100, 100, 100, 101, 102]);
        // drops 100 first, then 99, then 101
        assert_eq!(h3.loop_numbers(5), [95, 96, 97, 98, 102]);
        assert!(h3.loop_numbers(0).is_empty());
    }

    #[test]
    fn region_lookup() {
        let t = BoundaryTable::bundled();
        assert_eq!(t.region_of(ChainType::Heavy, 1), Region::FrH1);
        assert_eq!(t.region_of(ChainType::Heavy, 33), Region::FrH2);
        assert_eq!(t.region_of(ChainType::Heavy, 103), Region::FrH4);
        assert_eq!(t.region_of(ChainType::Light, 89), Region::CdrL3);
        assert_eq!("CDR-H3".parse::<Region>().unwrap(), Region::CdrH3);
    }

    #[test]
    fn malformed_table() {
        assert!(BoundaryTable::parse("region,chain,start,end,apex\nCDRH1,L,26,32,31\n").is_err());
        assert!(matches!(
            BoundaryTable::parse("region,chain,start,end,apex\nCDRH1,H,26,32,31\n"),
            Err(BoundaryError::Missing(_))
        ));
    }
}
