use std::path::Path;

use thiserror::Error;

use super::{letter_runs, BoundaryTable, ChainType, ChothiaPosition, NumberedChain, NumberingError, Region, Source};
use crate::align::{global, Column, GapPenalty};
use crate::model::Species;
use crate::residue::SubstitutionTable;

/// A consensus sequence whose columns carry Chothia positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub name: String,
    pub species: Species,
    pub chain_type: ChainType,
    pub columns: Vec<(ChothiaPosition, u8)>,
}

impl Profile {
    pub fn consensus(&self) -> Vec<u8> {
        self.columns.iter().map(|c| c.1).collect()
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile {name}: {message}")]
    Malformed { name: String, message: String },
    #[error("profile name {0:?} is not species_chain")]
    Name(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct ProfileSet {
    profiles: Vec<Profile>,
}

impl ProfileSet {
    /// Parses one profile. `name` is `{species}_{heavy|kappa|lambda|light}`.
    pub fn parse_profile(name: &str, text: &str) -> Result<Profile, ProfileError> {
        let (sp, ch) = name.split_once('_').ok_or_else(|| ProfileError::Name(name.into()))?;
        let species: Species = sp.parse().map_err(|_| ProfileError::Name(name.into()))?;
        let chain_type = match ch {
            "heavy" => ChainType::Heavy,
            "kappa" | "lambda" | "light" => ChainType::Light,
            _ => return Err(ProfileError::Name(name.into())),
        };
        let bad = |message: String| ProfileError::Malformed { name: name.into(), message };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut columns: Vec<(ChothiaPosition, u8)> = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            if row.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", row.len())));
            }
            let pos: ChothiaPosition = format!("{}{}", &row[0], &row[1]).parse().map_err(bad)?;
            let res = row[2].as_bytes();
            if res.len() != 1 || !res[0].is_ascii_uppercase() {
                return Err(bad(format!("bad residue {:?}", &row[2])));
            }
            if columns.last().is_some_and(|l| l.0 >= pos) {
                return Err(bad(format!("positions not increasing at {pos}")));
            }
            columns.push((pos, res[0]));
        }
        if columns.is_empty() {
            return Err(bad("no columns".into()));
        }
        Ok(Profile { name: name.into(), species, chain_type, columns })
    }

    pub fn bundled() -> Self {
        let profiles = crate::data::PROFILES
            .iter()
            .map(|(n, t)| Self::parse_profile(n, t).expect("bundled profile parses"))
            .collect();
        Self { profiles }
    }

    /// Loads every `*.csv` in `dir`, named by file stem.
    pub fn load_dir(dir: &Path) -> Result<Self, ProfileError> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        paths.sort();
        let mut profiles = Vec::new();
        for p in paths {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            profiles.push(Self::parse_profile(&stem, &std::fs::read_to_string(&p)?)?);
        }
        Ok(Self { profiles })
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn of_chain(&self, chain: ChainType) -> impl Iterator<Item = &Profile> {
        self.profiles.iter().filter(move |p| p.chain_type == chain)
    }
}

/// Successful numbering plus the profile that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Numbered {
    pub chain: NumberedChain,
    pub profile: String,
    pub score: i32,
}

/// Numbers chains against a profile set.
#[derive(Debug, Clone)]
pub struct Numberer {
    pub profiles: ProfileSet,
    pub boundaries: BoundaryTable,
    pub table: SubstitutionTable,
    pub gaps: GapPenalty,
    pub min_len: usize,
    pub max_len: usize,
    /// Required fraction of the chosen profile's self-alignment score.
    pub quality_floor: f64,
}

impl Default for Numberer {
    fn default() -> Self {
        Self::new(ProfileSet::bundled(), BoundaryTable::bundled())
    }
}

/// Where a query residue landed relative to the profile.
#[derive(Clone, Copy)]
enum Slot {
    Aligned(usize),
    /// Between profile columns `prev` and `prev + 1`.
    Inserted(Option<usize>),
}

impl Numberer {
    pub fn new(profiles: ProfileSet, boundaries: BoundaryTable) -> Self {
        Self {
            profiles,
            boundaries,
            table: SubstitutionTable::blosum62(),
            gaps: GapPenalty::default(),
            min_len: 70,
            max_len: 200,
            quality_floor: 0.5,
        }
    }

    pub fn number(&self, seq: &str, chain_type: ChainType) -> Result<Numbered, NumberingError> {
        let q = seq.as_bytes();
        if q.len() < self.min_len || q.len() > self.max_len {
            return Err(NumberingError::Length { len: q.len(), min: self.min_len, max: self.max_len });
        }
        let mut best: Option<(&Profile, crate::align::Alignment)> = None;
        for p in self.profiles.of_chain(chain_type) {
            let aln = global(q, &p.consensus(), &self.table, self.gaps);
            let better = match &best {
                None => true,
                Some((bp, ba)) => aln.score > ba.score || (aln.score == ba.score && p.name < bp.name),
            };
            if better {
                best = Some((p, aln));
            }
        }
        let (profile, aln) = best.ok_or(NumberingError::NoProfile(chain_type))?;
        let cons = profile.consensus();
        let self_score: i32 = cons.iter().map(|&r| self.table.score(r, r)).sum();
        let floor = (self.quality_floor * self_score as f64).ceil() as i32;
        if aln.score < floor {
            return Err(NumberingError::BelowFloor { profile: profile.name.clone(), score: aln.score, floor });
        }
        let chain = self.assign(q, profile, &aln.columns, chain_type)?;
        Ok(Numbered { chain, profile: profile.name.clone(), score: aln.score })
    }

    fn assign(
        &self,
        q: &[u8],
        profile: &Profile,
        columns: &[Column],
        chain_type: ChainType,
    ) -> Result<NumberedChain, NumberingError> {
        let mut slots = Vec::with_capacity(q.len());
        let mut last_col: Option<usize> = None;
        for c in columns {
            match *c {
                Column::Pair(_, j) => {
                    slots.push(Slot::Aligned(j));
                    last_col = Some(j);
                }
                Column::GapInB(_) => slots.push(Slot::Inserted(last_col)),
                Column::GapInA(j) => last_col = Some(j),
            }
        }
        let ncol = profile.columns.len();
        let col_region = |j: usize| self.boundaries.region_of(chain_type, profile.columns[j].0.number);
        let regions: Vec<Region> = slots
            .iter()
            .map(|s| match *s {
                Slot::Aligned(j) => col_region(j),
                Slot::Inserted(prev) => {
                    let p = prev.map(col_region);
                    let n = match prev {
                        Some(j) if j + 1 < ncol => Some(col_region(j + 1)),
                        Some(_) => None,
                        None => Some(col_region(0)),
                    };
                    match (p, n) {
                        (Some(a), Some(b)) if a == b => a,
                        (Some(a), _) if a.is_cdr() => a,
                        (_, Some(b)) if b.is_cdr() => b,
                        (Some(a), _) => a,
                        (None, Some(b)) => b,
                        (None, None) => unreachable!("profiles are nonempty"),
                    }
                }
            })
            .collect();
        let mut numbers = vec![0u32; q.len()];
        let mut i = 0;
        while i < q.len() {
            let region = regions[i];
            let mut end = i;
            while end < q.len() && regions[end] == region {
                end += 1;
            }
            if region.is_cdr() {
                let cdr = self.boundaries.cdr(region).expect("table covers every CDR");
                numbers[i..end].copy_from_slice(&cdr.loop_numbers(end - i));
            } else {
                for k in i..end {
                    numbers[k] = match slots[k] {
                        Slot::Aligned(j) => profile.columns[j].0.number,
                        Slot::Inserted(prev) => match prev {
                            Some(j) if col_region(j) == region => profile.columns[j].0.number,
                            Some(j) if j + 1 < ncol => profile.columns[j + 1].0.number,
                            Some(j) => profile.columns[j].0.number,
                            None => profile.columns[0].0.number,
                        },
                    };
                }
            }
            i = end;
        }
        let positions = letter_runs(&numbers)?;
        NumberedChain::new(chain_type, positions.into_iter().zip(q.iter().copied()).collect(), Source::InternalAligner)
    }
}
