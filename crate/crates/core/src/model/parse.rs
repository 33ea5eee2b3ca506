use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use super::{SequenceRecord, SequenceSet, SetError, SetLabel};
use crate::residue::ResiduePolicy;

pub const CSV_HEADER: [&str; 5] = ["id", "dataset_id", "set_label", "heavy", "light"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Fasta,
}

impl InputFormat {
    /// Guesses from a file name; anything not ending in a FASTA suffix is CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(e) if matches!(e.as_str(), "fa" | "fasta" | "faa" | "fas") => InputFormat::Fasta,
            _ => InputFormat::Csv,
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: u64, id: String },
    #[error("record {id:?}: illegal residue {residue:?} at offset {offset}")]
    Residue { id: String, residue: char, offset: usize },
    #[error("{0}")]
    Set(#[from] SetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn chain(field: &str) -> Option<String> {
    let t = field.trim();
    (!t.is_empty()).then(|| t.to_ascii_uppercase())
}

fn check_residues(r: &SequenceRecord, policy: ResiduePolicy) -> Result<(), ParseError> {
    for seq in [&r.heavy, &r.light].into_iter().flatten() {
        if let Some((offset, residue)) = policy.first_illegal(seq) {
            return Err(ParseError::Residue { id: r.id.clone(), residue, offset });
        }
    }
    Ok(())
}

pub fn parse_sequences<R: Read>(
    input: R,
    format: InputFormat,
    policy: ResiduePolicy,
) -> Result<SequenceSet, ParseError> {
    let records = match format {
        InputFormat::Csv => parse_csv(input, policy)?,
        InputFormat::Fasta => parse_fasta(input, policy)?,
    };
    Ok(SequenceSet::new(records)?)
}

fn parse_csv<R: Read>(input: R, policy: ResiduePolicy) -> Result<Vec<SequenceRecord>, ParseError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut header_done = false;
    for row in rdr.records() {
        let row = row.map_err(|e| ParseError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if !header_done {
            let got: Vec<&str> = row.iter().map(str::trim).collect();
            if got != CSV_HEADER {
                return Err(ParseError::Malformed {
                    line,
                    message: format!("expected header {}", CSV_HEADER.join(",")),
                });
            }
            header_done = true;
            continue;
        }
        if row.len() == 1 && row[0].trim().is_empty() {
            continue;
        }
        if row.len() != CSV_HEADER.len() {
            return Err(ParseError::Malformed {
                line,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()),
            });
        }
        let id = row[0].trim().to_string();
        if id.is_empty() {
            return Err(ParseError::Malformed { line, message: "empty id".into() });
        }
        let set_label = row[2].parse::<SetLabel>().map_err(|message| ParseError::Malformed { line, message })?;
        let r = SequenceRecord {
            id: id.clone(),
            dataset_id: row[1].trim().to_string(),
            set_label,
            heavy: chain(&row[3]),
            light: chain(&row[4]),
            species_hint: None,
        };
        if r.heavy.is_none() && r.light.is_none() {
            return Err(ParseError::Malformed { line, message: format!("record {id:?} has no chains") });
        }
        if !seen.insert(id.clone()) {
            return Err(ParseError::DuplicateId { line, id });
        }
        check_residues(&r, policy)?;
        out.push(r);
    }
    Ok(out)
}

fn parse_fasta<R: Read>(input: R, policy: ResiduePolicy) -> Result<Vec<SequenceRecord>, ParseError> {
    struct Entry {
        line: u64,
        id: String,
        dataset: String,
        label: SetLabel,
        heavy: bool,
        seq: String,
    }
    let mut entries: Vec<Entry> = Vec::new();
    for (n, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let lineno = n as u64 + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(h) = t.strip_prefix('>') {
            let parts: Vec<&str> = h.split('|').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(ParseError::Malformed {
                    line: lineno,
                    message: "header must be >id|dataset_id|set_label|H or L".into(),
                });
            }
            let label =
                parts[2].parse::<SetLabel>().map_err(|message| ParseError::Malformed { line: lineno, message })?;
            let heavy = match parts[3].to_ascii_uppercase().as_str() {
                "H" => true,
                "L" => false,
                other => {
                    return Err(ParseError::Malformed {
                        line: lineno,
                        message: format!("chain tag {other:?} is not H or L"),
                    })
                }
            };
            entries.push(Entry {
                line: lineno,
                id: parts[0].to_string(),
                dataset: parts[1].to_string(),
                label,
                heavy,
                seq: String::new(),
            });
        } else {
            match entries.last_mut() {
                Some(e) => e.seq.push_str(&t.to_ascii_uppercase()),
                None => {
                    return Err(ParseError::Malformed { line: lineno, message: "sequence before first header".into() })
                }
            }
        }
    }
    let mut out: Vec<SequenceRecord> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for e in entries {
        if e.seq.is_empty() {
            return Err(ParseError::Malformed { line: e.line, message: format!("empty sequence for {:?}", e.id) });
        }
        let slot = match index.get(&e.id) {
            Some(&i) => {
                let r: &mut SequenceRecord = &mut out[i];
                if r.dataset_id != e.dataset || r.set_label != e.label {
                    return Err(ParseError::Malformed {
                        line: e.line,
                        message: format!("chains of {:?} disagree on dataset or set label", e.id),
                    });
                }
                r
            }
            None => {
                index.insert(e.id.clone(), out.len());
                out.push(SequenceRecord {
                    id: e.id.clone(),
                    dataset_id: e.dataset.clone(),
                    set_label: e.label,
                    heavy: None,
                    light: None,
                    species_hint: None,
                });
                out.last_mut().unwrap()
            }
        };
        let target = if e.heavy { &mut slot.heavy } else { &mut slot.light };
        if target.is_some() {
            return Err(ParseError::DuplicateId { line: e.line, id: e.id });
        }
        *target = Some(e.seq);
    }
    for r in &out {
        check_residues(r, policy)?;
    }
    Ok(out)
}

/// Writes records in the CSV input schema.
pub fn write_csv<W: Write>(records: &[SequenceRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.id.as_str(),
            r.dataset_id.as_str(),
            r.set_label.as_str(),
            r.heavy.as_deref().unwrap_or(""),
            r.light.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<SequenceSet, ParseError> {
        parse_sequences(text.as_bytes(), InputFormat::Csv, ResiduePolicy::default())
    }

    #[test]
    fn one_row() {
        let s = csv("id,dataset_id,set_label,heavy,light\nab1,d1,targeting,EVQL,DIQM\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.records()[0].light.as_deref(), Some("DIQM"));
        assert_eq!(s.datasets().len(), 1);
    }

    #[test]
    fn empty_input_is_an_empty_set() {
        let s = csv("").unwrap();
        assert!(s.is_empty());
        assert!(s.datasets().is_empty());
        let s = csv("id,dataset_id,set_label,heavy,light\n").unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn illegal_residue_names_the_record() {
        let e = csv("id,dataset_id,set_label,heavy,light\nab7,d1,reference,EVBL,\n").unwrap_err();
        match e {
            ParseError::Residue { id, residue, offset } => {
                assert_eq!((id.as_str(), residue, offset), ("ab7", 'B', 2));
            }
            other => panic!("unexpected {other}"),
        }
        let relaxed = parse_sequences(
            "id,dataset_id,set_label,heavy,light\nab7,d1,reference,EVXL,\n".as_bytes(),
            InputFormat::Csv,
            ResiduePolicy { allow_x: true },
        );
        assert!(relaxed.is_ok());
    }

    #[test]
    fn malformed_and_duplicate_rows_report_lines() {
        match csv("id,dataset,set_label,heavy,light\n").unwrap_err() {
            ParseError::Malformed { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other}"),
        }
        match csv("id,dataset_id,set_label,heavy,light\na,d,targeting,AC,\na,d,targeting,AC,\n").unwrap_err() {
            ParseError::DuplicateId { line, id } => assert_eq!((line, id.as_str()), (3, "a")),
            other => panic!("unexpected {other}"),
        }
        match csv("id,dataset_id,set_label,heavy,light\na,d,targeting,AC\n").unwrap_err() {
            ParseError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn fasta_pairs_chains_by_id() {
        let text = ">a|d1|targeting|H\nEVQL\nLESG\n>b|d1|targeting|H\nQVQL\n>a|d1|targeting|L\nDIQM\n";
        let s = parse_sequences(text.as_bytes(), InputFormat::Fasta, ResiduePolicy::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.records()[0].heavy.as_deref(), Some("EVQLLESG"));
        assert_eq!(s.records()[0].light.as_deref(), Some("DIQM"));
        assert!(s.records()[1].light.is_none());
        let dup = ">a|d1|targeting|H\nEVQL\n>a|d1|targeting|H\nEVQL\n";
        assert!(matches!(
            parse_sequences(dup.as_bytes(), InputFormat::Fasta, ResiduePolicy::default()),
            Err(ParseError::DuplicateId { line: 3, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let s = csv("id,dataset_id,set_label,heavy,light\nx,d,reference,AC,\ny,e,targeting,,WY\n").unwrap();
        let mut buf = Vec::new();
        write_csv(s.records(), &mut buf).unwrap();
        let back = csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(s, back);
    }
}
