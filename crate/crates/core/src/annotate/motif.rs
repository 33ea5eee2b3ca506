use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const MIN_MOTIF: usize = 2;
pub const MAX_MOTIF: usize = 10;
pub const PER_LENGTH: usize = 2;

/// A CDR-H3 subsequence tagged with its 1-based start, written `4_AL`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Motif {
    pub start: usize,
    pub seq: String,
}

impl Motif {
    pub fn occurs_in(&self, cdrh3: &str) -> bool {
        cdrh3.get(self.start - 1..self.start - 1 + self.seq.len()) == Some(self.seq.as_str())
    }
}

impl fmt::Display for Motif {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.start, self.seq)
    }
}

impl FromStr for Motif {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (st, seq) = s.split_once('_').ok_or_else(|| format!("motif {s:?} lacks '_'"))?;
        let start: usize = st.parse().map_err(|_| format!("bad motif start in {s:?}"))?;
        if start == 0 || seq.is_empty() {
            return Err(format!("bad motif {s:?}"));
        }
        Ok(Motif { start, seq: seq.to_string() })
    }
}

/// Counting unit for motif frequency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotifCount {
    /// Each sequence counts a motif at most once.
    #[default]
    Presence,
    /// Every occurrence counts. A positional motif can occur at most once per
    /// sequence, so this agrees with `Presence`; it is kept for configs that
    /// name it explicitly.
    Occurrences,
}

impl FromStr for MotifCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "presence" => Ok(MotifCount::Presence),
            "occurrences" => Ok(MotifCount::Occurrences),
            o => Err(format!("unknown motif count mode {o:?}")),
        }
    }
}

/// Top motifs per length, in (length, rank) order.
pub fn mine_motifs(cdrh3s: &[&str], mode: MotifCount) -> Vec<Motif> {
    let mut out = Vec::new();
    for len in MIN_MOTIF..=MAX_MOTIF {
        let mut counts: HashMap<(usize, &str), usize> = HashMap::new();
        for s in cdrh3s {
            if s.len() < len {
                continue;
            }
            let mut seen = HashSet::new();
            for i in 0..=s.len() - len {
                let key = (i + 1, &s[i..i + len]);
                if mode == MotifCount::Occurrences || seen.insert(key) {
                    *counts.entry(key).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<_> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out.extend(ranked.into_iter().take(PER_LENGTH).map(|((start, seq), _)| Motif { start, seq: seq.to_string() }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Counts every (start, substring) by scanning each sequence separately.
    fn brute(seqs: &[String]) -> Vec<Motif> {
        let mut out = Vec::new();
        for len in 2..=10 {
            let mut all: Vec<(usize, String)> = Vec::new();
            for s in seqs {
                let chars: Vec<char> = s.chars().collect();
                for st in 0..chars.len() {
                    if st + len <= chars.len() {
                        all.push((st + 1, chars[st..st + len].iter().collect()));
                    }
                }
            }
            all.sort();
            all.dedup();
            let mut scored: Vec<(usize, usize, String)> = all
                .into_iter()
                .map(|(st, m)| {
                    let c = seqs.iter().filter(|s| s.len() >= st - 1 + len && s[st - 1..st - 1 + len] == m).count();
                    (c, st, m)
                })
                .collect();
            scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            out.extend(scored.into_iter().take(2).map(|(_, start, seq)| Motif { start, seq }));
        }
        out
    }

    #[test]
    fn two_sequence_example() {
        let m = mine_motifs(&["ARDY", "ARDW"], MotifCount::Presence);
        let l2: Vec<String> = m.iter().filter(|x| x.seq.len() == 2).map(|x| x.to_string()).collect();
        assert_eq!(l2, ["1_AR", "2_RD"]);
    }

    #[test]
    fn short_sequences_give_no_long_motifs() {
        let m = mine_motifs(&["ARD", "GY"], MotifCount::Presence);
        assert!(m.iter().all(|x| x.seq.len() <= 3));
    }

    #[test]
    fn label_and_position_check() {
        let m: Motif = "4_AL".parse().unwrap();
        assert_eq!((m.start, m.seq.as_str()), (4, "AL"));
        assert_eq!(m.to_string(), "4_AL");
        assert!("2_AL".parse::<Motif>().unwrap().occurs_in("AALDY"));
        assert!(!m.occurs_in("AALDY"));
        assert!(!"5_DYX".parse::<Motif>().unwrap().occurs_in("AALDY"));
    }

    proptest! {
        #[test]
        fn matches_brute_force(seqs in proptest::collection::vec("[ADGRSY]{0,14}", 1..12)) {
            let refs: Vec<&str> = seqs.iter().map(String::as_str).collect();
            prop_assert_eq!(mine_motifs(&refs, MotifCount::Presence), brute(&seqs));
            prop_assert_eq!(mine_motifs(&refs, MotifCount::Occurrences), brute(&seqs));
        }
    }
}
