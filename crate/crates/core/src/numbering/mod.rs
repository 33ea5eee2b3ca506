//! Chothia numbering by profile alignment, region slicing, and the numbered
//! CSV bypass for externally numbered chains.

mod io;
mod profile;
mod regions;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{export_numbered, import_numbered, NumberedEntry, NumberedIoError};
pub use profile::{Numbered, Numberer, Profile, ProfileError, ProfileSet};
pub use regions::{extract_regions, BoundaryError, BoundaryTable, CdrBoundary, Region, RegionMap, RegionSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChainType {
    Heavy,
    Light,
}

impl ChainType {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChainType::Heavy => "H",
            ChainType::Light => "L",
        }
    }
}

impl fmt::Display for ChainType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChainType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "H" | "HEAVY" => Ok(ChainType::Heavy),
            "L" | "LIGHT" | "K" | "KAPPA" | "LAMBDA" => Ok(ChainType::Light),
            other => Err(format!("unknown chain type {other:?}")),
        }
    }
}

/// A Chothia position such as `52` or `52A`. Orders by number, then
/// insertion code with the bare number first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChothiaPosition {
    pub number: u32,
    pub insertion: Option<char>,
}

impl ChothiaPosition {
    pub const fn new(number: u32) -> Self {
        Self { number, insertion: None }
    }

    pub const fn with_insertion(number: u32, code: char) -> Self {
        Self { number, insertion: Some(code) }
    }
}

impl Ord for ChothiaPosition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.number.cmp(&other.number).then_with(|| self.insertion.cmp(&other.insertion))
    }
}

impl PartialOrd for ChothiaPosition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ChothiaPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.insertion {
            Some(c) => write!(f, "{}{}", self.number, c),
            None => write!(f, "{}", self.number),
        }
    }
}

impl FromStr for ChothiaPosition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
        let number: u32 = s[..split].parse().map_err(|_| format!("bad position {s:?}"))?;
        let rest = &s[split..];
        let insertion = match rest.len() {
            0 => None,
            1 if rest.as_bytes()[0].is_ascii_uppercase() => Some(rest.as_bytes()[0] as char),
            _ => return Err(format!("bad insertion code in {s:?}")),
        };
        if number == 0 {
            return Err(format!("position must be positive: {s:?}"));
        }
        Ok(Self { number, insertion })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    InternalAligner,
    Imported,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NumberingError {
    #[error("chain length {len} outside [{min}, {max}]")]
    Length { len: usize, min: usize, max: usize },
    #[error("best profile {profile} scored {score}, below the floor {floor}")]
    BelowFloor { profile: String, score: i32, floor: i32 },
    #[error("no numbering profile for chain type {0}")]
    NoProfile(ChainType),
    #[error("more than 26 insertions at position {0}")]
    InsertionOverflow(u32),
    #[error("positions not strictly increasing at {0}")]
    NotIncreasing(ChothiaPosition),
}

/// Chain residues keyed by strictly increasing Chothia positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumberedChain {
    pub chain_type: ChainType,
    residues: Vec<(ChothiaPosition, u8)>,
    pub source: Source,
}

impl NumberedChain {
    pub fn new(
        chain_type: ChainType,
        residues: Vec<(ChothiaPosition, u8)>,
        source: Source,
    ) -> Result<Self, NumberingError> {
        for w in residues.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(NumberingError::NotIncreasing(w[1].0));
            }
        }
        Ok(Self { chain_type, residues, source })
    }

    pub fn residues(&self) -> &[(ChothiaPosition, u8)] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn sequence(&self) -> String {
        self.residues.iter().map(|&(_, r)| r as char).collect()
    }

    pub fn get(&self, pos: ChothiaPosition) -> Option<u8> {
        self.residues.binary_search_by(|(p, _)| p.cmp(&pos)).ok().map(|i| self.residues[i].1)
    }
}

/// Gives consecutive equal numbers the codes none, A, B, ...
pub(crate) fn letter_runs(numbers: &[u32]) -> Result<Vec<ChothiaPosition>, NumberingError> {
    let mut out = Vec::with_capacity(numbers.len());
    let mut run = 0usize;
    for (i, &n) in numbers.iter().enumerate() {
        run = if i > 0 && numbers[i - 1] == n { run + 1 } else { 0 };
        out.push(match run {
            0 => ChothiaPosition::new(n),
            1..=26 => ChothiaPosition::with_insertion(n, (b'A' + run as u8 - 1) as char),
            _ => return Err(NumberingError::InsertionOverflow(n)),
        });
    }
    Ok(out)
}
