use std::io::{Read, Write};

use thiserror::Error;

use super::{ChainType, ChothiaPosition, NumberedChain, Source};

pub const NUMBERED_HEADER: [&str; 5] = ["id", "chain", "position", "insertion", "residue"];

/// One numbered chain tagged with its record id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberedEntry {
    pub id: String,
    pub chain: NumberedChain,
}

#[derive(Debug, Error)]
pub enum NumberedIoError {
    #[error("numbered csv line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes chains in the numbered CSV schema.
pub fn export_numbered<W: Write>(entries: &[NumberedEntry], out: W) -> Result<(), NumberedIoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(NUMBERED_HEADER)?;
    for e in entries {
        for (p, r) in e.chain.residues() {
            let ins = p.insertion.map(String::from).unwrap_or_default();
            w.write_record([
                e.id.as_str(),
                e.chain.chain_type.as_str(),
                &p.number.to_string(),
                &ins,
                &(*r as char).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the numbered CSV schema. Rows for one `(id, chain)` must be
/// contiguous and strictly increasing in position.
pub fn import_numbered<R: Read>(input: R) -> Result<Vec<NumberedEntry>, NumberedIoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != NUMBERED_HEADER {
        return Err(NumberedIoError::Format {
            line: 1,
            message: format!("expected header {}", NUMBERED_HEADER.join(",")),
        });
    }
    let mut out: Vec<NumberedEntry> = Vec::new();
    type Pending = (String, ChainType, Vec<(ChothiaPosition, u8)>);
    let mut current: Option<Pending> = None;
    let finish = |cur: Pending, out: &mut Vec<NumberedEntry>| {
        let (id, ct, res) = cur;
        out.push(NumberedEntry {
            id,
            chain: NumberedChain::new(ct, res, Source::Imported).expect("checked while reading"),
        });
    };
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| NumberedIoError::Format { line, message };
        if row.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", row.len())));
        }
        let id = row[0].to_string();
        let ct: ChainType = row[1].parse().map_err(bad)?;
        let pos: ChothiaPosition = format!("{}{}", &row[2], &row[3]).parse().map_err(bad)?;
        let res = row[4].as_bytes();
        if res.len() != 1 || !res[0].is_ascii_alphabetic() {
            return Err(bad(format!("bad residue {:?}", &row[4])));
        }
        let res = res[0].to_ascii_uppercase();
        let same = current.as_ref().is_some_and(|(cid, cct, _)| *cid == id && *cct == ct);
        if !same {
            if out.iter().any(|e| e.id == id && e.chain.chain_type == ct) {
                return Err(bad(format!("rows for {id}/{ct} are not contiguous")));
            }
            if let Some(cur) = current.take() {
                finish(cur, &mut out);
            }
            current = Some((id, ct, Vec::new()));
        }
        let residues = &mut current.as_mut().unwrap().2;
        if let Some(&(last, _)) = residues.last() {
            if pos <= last {
                return Err(bad(format!("position {pos} does not follow {last}")));
            }
        }
        residues.push((pos, res));
    }
    if let Some(cur) = current.take() {
        finish(cur, &mut out);
    }
    Ok(out)
}
