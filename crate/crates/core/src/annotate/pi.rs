use thiserror::Error;

/// Ionizable groups with their pKa and the sign of the charged form.
#[derive(Debug, Clone, PartialEq)]
pub struct PkaTable {
    pub n_term: f64,
    pub c_term: f64,
    /// `(residue, pka)` for groups that are positive when protonated.
    pub positive: Vec<(u8, f64)>,
    /// `(residue, pka)` for groups that are negative when deprotonated.
    pub negative: Vec<(u8, f64)>,
}

#[derive(Debug, Error)]
pub enum PkaError {
    #[error("pKa table line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("pKa table lacks {0}")]
    Missing(&'static str),
}

impl PkaTable {
    /// Parses `group,pka,charge` with groups `Nterm`, `Cterm` or a residue
    /// letter, and charge `+` or `-`.
    pub fn parse(text: &str) -> Result<Self, PkaError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let (mut n_term, mut c_term) = (None, None);
        let (mut positive, mut negative) = (Vec::new(), Vec::new());
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let bad = |message: String| PkaError::Malformed { line, message };
            let row = row.map_err(|e| bad(e.to_string()))?;
            if row.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", row.len())));
            }
            let pka: f64 = row[1].parse().map_err(|e| bad(format!("pka: {e}")))?;
            if !pka.is_finite() {
                return Err(bad("pka must be finite".into()));
            }
            let plus = match &row[2] {
                "+" => true,
                "-" => false,
                c => return Err(bad(format!("charge {c:?} is not + or -"))),
            };
            match (&row[0], plus) {
                ("Nterm", true) => n_term = Some(pka),
                ("Cterm", false) => c_term = Some(pka),
                ("Nterm" | "Cterm", _) => return Err(bad("terminus has the wrong charge sign".into())),
                (g, _) if g.len() == 1 && g.as_bytes()[0].is_ascii_uppercase() => {
                    let r = g.as_bytes()[0];
                    if plus {
                        positive.push((r, pka));
                    } else {
                        negative.push((r, pka));
                    }
                }
                (g, _) => return Err(bad(format!("unknown group {g:?}"))),
            }
        }
        Ok(Self {
            n_term: n_term.ok_or(PkaError::Missing("Nterm"))?,
            c_term: c_term.ok_or(PkaError::Missing("Cterm"))?,
            positive,
            negative,
        })
    }

    pub fn bundled() -> Self {
        Self::parse(crate::data::PKA).expect("bundled pKa table parses")
    }
}

/// Net charge at `ph` by Henderson-Hasselbalch, free termini included.
pub fn net_charge(seq: &[u8], ph: f64, t: &PkaTable) -> f64 {
    let pos = |pka: f64| 1.0 / (1.0 + 10f64.powf(ph - pka));
    let neg = |pka: f64| 1.0 / (1.0 + 10f64.powf(pka - ph));
    let mut q = pos(t.n_term) - neg(t.c_term);
    for &r in seq {
        if let Some(&(_, k)) = t.positive.iter().find(|(g, _)| *g == r) {
            q += pos(k);
        }
        if let Some(&(_, k)) = t.negative.iter().find(|(g, _)| *g == r) {
            q -= neg(k);
        }
    }
    q
}

/// pH in [0, 14] where the net charge crosses zero, by bisection. The charge
/// is strictly decreasing in pH, so the root is unique when it exists;
/// otherwise the nearer end of the range is returned.
pub fn compute_pi(seq: &str, t: &PkaTable) -> f64 {
    let s = seq.as_bytes();
    let (mut lo, mut hi) = (0.0f64, 14.0f64);
    if net_charge(s, lo, t) <= 0.0 {
        return lo;
    }
    if net_charge(s, hi, t) >= 0.0 {
        return hi;
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if net_charge(s, mid, t) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn glycine_dipeptide_is_the_terminal_midpoint() {
        let t = PkaTable::bundled();
        let expect = 0.5 * (t.n_term + t.c_term);
        assert!((compute_pi("GG", &t) - expect).abs() < 1e-6);
        assert!((expect - 5.525).abs() < 1e-12);
    }

    #[test]
    fn basic_above_acidic() {
        let t = PkaTable::bundled();
        assert!(compute_pi("KK", &t) > compute_pi("DD", &t));
    }

    fn grid_argmin(seq: &[u8], t: &PkaTable) -> f64 {
        (0..=14000)
            .map(|i| i as f64 * 0.001)
            .min_by(|a, b| net_charge(seq, *a, t).abs().total_cmp(&net_charge(seq, *b, t).abs()))
            .unwrap()
    }

    proptest! {
        #[test]
        fn agrees_with_grid_and_is_a_root(seq in "[ACDEFGHIKLMNPQRSTVWY]{3,20}") {
            let t = PkaTable::bundled();
            let pi = compute_pi(&seq, &t);
            prop_assert!((pi - grid_argmin(seq.as_bytes(), &t)).abs() <= 0.01);
            prop_assert!(net_charge(seq.as_bytes(), pi, &t).abs() < 1e-3);
        }

        #[test]
        fn d_for_k_lowers_pi(seq in "[ACDEFGHIKLMNPQRSTVWY]{3,20}", at in 0usize..20) {
            let t = PkaTable::bundled();
            let mut b = seq.clone().into_bytes();
            let at = at % b.len();
            b[at] = b'K';
            let with_k = String::from_utf8(b.clone()).unwrap();
            b[at] = b'D';
            let with_d = String::from_utf8(b).unwrap();
            prop_assert!(compute_pi(&with_d, &t) < compute_pi(&with_k, &t));
        }
    }
}
