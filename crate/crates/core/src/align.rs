//! Affine-gap pairwise alignment (Gotoh), shared by numbering, germline
//! calling and clustering.
//!
//! A gap of length `L` scores `open + (L - 1) * extend`.

use crate::residue::SubstitutionTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapPenalty {
    pub open: i32,
    pub extend: i32,
}

impl Default for GapPenalty {
    fn default() -> Self {
        Self { open: -10, extend: -1 }
    }
}

/// One alignment column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    /// `a[i]` aligned with `b[j]`.
    Pair(usize, usize),
    /// `a[i]` against a gap.
    GapInB(usize),
    /// `b[j]` against a gap.
    GapInA(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub score: i32,
    pub columns: Vec<Column>,
}

impl Alignment {
    /// Identical pairs over all columns, gaps counting as mismatches.
    pub fn identity(&self, a: &[u8], b: &[u8]) -> f64 {
        if self.columns.is_empty() {
            return 0.0;
        }
        let matches = self.columns.iter().filter(|c| matches!(c, Column::Pair(i, j) if a[*i] == b[*j])).count();
        matches as f64 / self.columns.len() as f64
    }
}

const NEG: i32 = i32::MIN / 4;

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    M,
    X,
    Y,
}

/// Global alignment with traceback. Ties prefer diagonal, then a gap in `b`,
/// then a gap in `a`.
pub fn global(a: &[u8], b: &[u8], table: &SubstitutionTable, gaps: GapPenalty) -> Alignment {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let idx = |i: usize, j: usize| i * w + j;
    // mm: last column pairs a[i-1],b[j-1]; xx: a[i-1] vs gap; yy: b[j-1] vs gap
    let mut mm = vec![NEG; (n + 1) * w];
    let mut xx = vec![NEG; (n + 1) * w];
    let mut yy = vec![NEG; (n + 1) * w];
    mm[idx(0, 0)] = 0;
    for i in 1..=n {
        xx[idx(i, 0)] = gaps.open + (i as i32 - 1) * gaps.extend;
    }
    for j in 1..=m {
        yy[idx(0, j)] = gaps.open + (j as i32 - 1) * gaps.extend;
    }
    for i in 1..=n {
        for j in 1..=m {
            let d = idx(i - 1, j - 1);
            let best_prev = mm[d].max(xx[d]).max(yy[d]);
            mm[idx(i, j)] = best_prev + table.score(a[i - 1], b[j - 1]);
            let u = idx(i - 1, j);
            xx[idx(i, j)] = (mm[u] + gaps.open).max(xx[u] + gaps.extend).max(yy[u] + gaps.open);
            let l = idx(i, j - 1);
            yy[idx(i, j)] = (mm[l] + gaps.open).max(yy[l] + gaps.extend).max(xx[l] + gaps.open);
        }
    }
    let end = idx(n, m);
    let (mut state, score) = if n == 0 && m == 0 {
        (State::M, 0)
    } else {
        let mut s = (State::M, mm[end]);
        if xx[end] > s.1 {
            s = (State::X, xx[end]);
        }
        if yy[end] > s.1 {
            s = (State::Y, yy[end]);
        }
        s
    };
    let mut columns = Vec::with_capacity(n.max(m) + 8);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match state {
            State::M => {
                let d = idx(i - 1, j - 1);
                let want = mm[idx(i, j)] - table.score(a[i - 1], b[j - 1]);
                columns.push(Column::Pair(i - 1, j - 1));
                state = if (i - 1 == 0 && j - 1 == 0) || mm[d] == want {
                    State::M
                } else if xx[d] == want {
                    State::X
                } else {
                    State::Y
                };
                i -= 1;
                j -= 1;
            }
            State::X => {
                let u = idx(i - 1, j);
                let here = xx[idx(i, j)];
                columns.push(Column::GapInB(i - 1));
                state = if i - 1 == 0 && j == 0 {
                    State::M
                } else if j == 0 {
                    State::X
                } else if mm[u] + gaps.open == here {
                    State::M
                } else if xx[u] + gaps.extend == here {
                    State::X
                } else {
                    State::Y
                };
                i -= 1;
            }
            State::Y => {
                let l = idx(i, j - 1);
                let here = yy[idx(i, j)];
                columns.push(Column::GapInA(j - 1));
                state = if i == 0 && j - 1 == 0 {
                    State::M
                } else if i == 0 {
                    State::Y
                } else if mm[l] + gaps.open == here {
                    State::M
                } else if yy[l] + gaps.extend == here {
                    State::Y
                } else {
                    State::X
                };
                j -= 1;
            }
        }
    }
    columns.reverse();
    Alignment { score, columns }
}

/// Best local alignment score (Smith-Waterman with affine gaps).
pub fn local_score(a: &[u8], b: &[u8], table: &SubstitutionTable, gaps: GapPenalty) -> i32 {
    let m = b.len();
    let mut h_prev = vec![0i32; m + 1];
    let mut e_prev = vec![NEG; m + 1];
    let mut h_cur = vec![0i32; m + 1];
    let mut e_cur = vec![NEG; m + 1];
    let mut best = 0;
    for &ai in a {
        let mut f = NEG;
        h_cur[0] = 0;
        for j in 1..=m {
            // e: gap in b (consumes a), f: gap in a (consumes b)
            e_cur[j] = (h_prev[j] + gaps.open).max(e_prev[j] + gaps.extend);
            f = (h_cur[j - 1] + gaps.open).max(f + gaps.extend);
            let diag = h_prev[j - 1] + table.score(ai, b[j - 1]);
            let h = diag.max(e_cur[j]).max(f).max(0);
            h_cur[j] = h;
            best = best.max(h);
        }
        std::mem::swap(&mut h_prev, &mut h_cur);
        std::mem::swap(&mut e_prev, &mut e_cur);
    }
    best
}
