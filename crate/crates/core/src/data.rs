//! Reference data shipped with the repository under `data/`.
//!
//! The files are embedded at compile time so the library works without a
//! checkout; every loader also accepts a user-supplied path.

pub const BLOSUM62: &str = include_str!("../../../data/blosum62.txt");
pub const PKA: &str = include_str!("../../../data/pka.csv");
pub const BOUNDARIES: &str = include_str!("../../../data/boundaries.csv");
pub const CANONICAL_RULES: &str = include_str!("../../../data/canonical_rules.csv");

/// Numbering profiles as `(file stem, csv text)`.
pub const PROFILES: &[(&str, &str)] = &[
    ("human_heavy", include_str!("../../../data/profiles/human_heavy.csv")),
    ("human_kappa", include_str!("../../../data/profiles/human_kappa.csv")),
    ("human_lambda", include_str!("../../../data/profiles/human_lambda.csv")),
    ("mouse_heavy", include_str!("../../../data/profiles/mouse_heavy.csv")),
    ("mouse_kappa", include_str!("../../../data/profiles/mouse_kappa.csv")),
];

/// Germline genes as `(file stem, fasta text)`; stems are `{species}_{segment}`.
pub const GERMLINES: &[(&str, &str)] = &[
    ("human_hv", include_str!("../../../data/germline/human_hv.fasta")),
    ("human_hj", include_str!("../../../data/germline/human_hj.fasta")),
    ("human_lv", include_str!("../../../data/germline/human_lv.fasta")),
    ("human_lj", include_str!("../../../data/germline/human_lj.fasta")),
    ("mouse_hv", include_str!("../../../data/germline/mouse_hv.fasta")),
    ("mouse_hj", include_str!("../../../data/germline/mouse_hj.fasta")),
    ("mouse_lv", include_str!("../../../data/germline/mouse_lv.fasta")),
    ("mouse_lj", include_str!("../../../data/germline/mouse_lj.fasta")),
];
