use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numbering::{ChothiaPosition, Region, RegionMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopLength {
    Any,
    Exact(usize),
    /// Inclusive range.
    Between(usize, usize),
}

impl LoopLength {
    pub fn matches(&self, len: usize) -> bool {
        match *self {
            LoopLength::Any => true,
            LoopLength::Exact(n) => len == n,
            LoopLength::Between(a, b) => (a..=b).contains(&len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalRule {
    pub region: Region,
    pub length: LoopLength,
    /// Each listed position must hold one of the given residues.
    pub constraints: Vec<(ChothiaPosition, Vec<u8>)>,
    pub class_id: u32,
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("canonical rules line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Ordered rule list; the first matching rule per region wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalRuleTable {
    pub rules: Vec<CanonicalRule>,
}

fn cdr_region(s: &str) -> Option<Region> {
    match s.trim().to_ascii_uppercase().as_str() {
        "H1" => Some(Region::CdrH1),
        "H2" => Some(Region::CdrH2),
        "H3" => Some(Region::CdrH3),
        "L1" => Some(Region::CdrL1),
        "L2" => Some(Region::CdrL2),
        "L3" => Some(Region::CdrL3),
        other => other.parse::<Region>().ok().filter(|r| r.is_cdr()),
    }
}

impl CanonicalRuleTable {
    /// Parses `region,loop_length,constraints,class_id` where `loop_length`
    /// is an integer, `a-b`, or `*`, and constraints read `pos:residues`
    /// separated by `;` (e.g. `52A:PTA;55:G`).
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rules = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let bad = |message: String| RuleError::Malformed { line, message };
            let row = row.map_err(|e| bad(e.to_string()))?;
            if row.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", row.len())));
            }
            let region = cdr_region(&row[0]).ok_or_else(|| bad(format!("unknown CDR {:?}", &row[0])))?;
            let int = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
            let length = match row[1].trim() {
                "*" => LoopLength::Any,
                l => match l.split_once('-') {
                    Some((a, b)) => LoopLength::Between(int(a)?, int(b)?),
                    None => LoopLength::Exact(int(l)?),
                },
            };
            let mut constraints = Vec::new();
            for c in row[2].split(';').map(str::trim).filter(|c| !c.is_empty()) {
                let (pos, res) = c.split_once(':').ok_or_else(|| bad(format!("constraint {c:?} lacks ':'")))?;
                let pos: ChothiaPosition = pos.parse().map_err(bad)?;
                let res: Vec<u8> = res.trim().bytes().map(|b| b.to_ascii_uppercase()).collect();
                if res.is_empty() || !res.iter().all(u8::is_ascii_uppercase) {
                    return Err(bad(format!("bad residue class in {c:?}")));
                }
                constraints.push((pos, res));
            }
            let class_id = row[3].trim().parse::<u32>().map_err(|e| bad(format!("class id: {e}")))?;
            rules.push(CanonicalRule { region, length, constraints, class_id });
        }
        Ok(Self { rules })
    }

    pub fn bundled() -> Self {
        Self::parse(crate::data::CANONICAL_RULES).expect("bundled canonical rules parse")
    }
}

/// Class ids for the six CDRs, in `Region::CDRS` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalCalls(pub [Option<u32>; 6]);

impl CanonicalCalls {
    pub fn get(&self, region: Region) -> Option<u32> {
        Region::CDRS.iter().position(|r| *r == region).and_then(|i| self.0[i])
    }
}

/// First matching rule per CDR. Absent or empty loops get no call.
pub fn assign_canonical(
    heavy: Option<&RegionMap>,
    light: Option<&RegionMap>,
    rules: &CanonicalRuleTable,
) -> CanonicalCalls {
    let mut out = CanonicalCalls::default();
    for (k, region) in Region::CDRS.iter().enumerate() {
        let map = if k < 3 { heavy } else { light };
        let Some(map) = map else { continue };
        let len = map.residues(*region).len();
        if len == 0 {
            continue;
        }
        out.0[k] = rules
            .rules
            .iter()
            .filter(|r| r.region == *region && r.length.matches(len))
            .find(|r| {
                r.constraints.iter().all(|(pos, allowed)| map.residue_at(*pos).is_some_and(|x| allowed.contains(&x)))
            })
            .map(|r| r.class_id);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numbering::{extract_regions, BoundaryTable, ChainType, NumberedChain, Source};

    fn heavy_with_h2(h2: &[(ChothiaPosition, u8)]) -> RegionMap {
        let mut res: Vec<_> = (40..52).map(|n| (ChothiaPosition::new(n), b'G')).collect();
        res.extend_from_slice(h2);
        res.extend((57..60).map(|n| (ChothiaPosition::new(n), b'G')));
        let c = NumberedChain::new(ChainType::Heavy, res, Source::Imported).unwrap();
        extract_regions(&c, &BoundaryTable::bundled())
    }

    #[test]
    fn constrained_rule_matches_first() {
        let rules = CanonicalRuleTable::bundled();
        let p = ChothiaPosition::new;
        let h2 = [
            (p(52), b'S'),
            (ChothiaPosition::with_insertion(52, 'A'), b'P'),
            (p(53), b'S'),
            (p(54), b'G'),
            (p(55), b'G'),
            (p(56), b'S'),
        ];
        let calls = assign_canonical(Some(&heavy_with_h2(&h2)), None, &rules);
        assert_eq!(calls.get(Region::CdrH2), Some(2));
        let mut other = h2;
        other[4].1 = b'D';
        let calls = assign_canonical(Some(&heavy_with_h2(&other)), None, &rules);
        assert_eq!(calls.get(Region::CdrH2), Some(3));
    }

    #[test]
    fn unmatched_length_is_absent() {
        let rules = CanonicalRuleTable::bundled();
        let h2: Vec<_> = (0..3).map(|k| (ChothiaPosition::new(52 + k), b'S')).collect();
        let calls = assign_canonical(Some(&heavy_with_h2(&h2)), None, &rules);
        assert_eq!(calls.get(Region::CdrH2), None);
        assert_eq!(calls.get(Region::CdrL1), None);
    }

    #[test]
    fn parse_forms() {
        let t = CanonicalRuleTable::parse("region,loop_length,constraints,class_id\nL1,10-12,,7\nCDRH3,*,94:rk,1\n")
            .unwrap();
        assert_eq!(t.rules[0].length, LoopLength::Between(10, 12));
        assert_eq!(t.rules[1].constraints[0].1, b"RK");
        assert!(CanonicalRuleTable::parse("region,loop_length,constraints,class_id\nFRH1,5,,1\n").is_err());
        assert!(CanonicalRuleTable::parse("region,loop_length,constraints,class_id\nH1,x,,1\n").is_err());
    }
}
