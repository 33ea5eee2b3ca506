use serde::{Deserialize, Serialize};

use super::{SequenceRecord, SequenceSet};
use crate::align::{global, GapPenalty};
use crate::par;
use crate::residue::SubstitutionTable;

/// One single-linkage cluster. Indices refer to the input set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub dataset_id: String,
    pub representative: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    /// Representatives in input order.
    pub representatives: SequenceSet,
    /// Clusters ordered by their first member.
    pub clusters: Vec<Cluster>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

fn composition(s: &[u8]) -> [u16; 26] {
    let mut c = [0u16; 26];
    for &b in s {
        if b.is_ascii_uppercase() {
            c[(b - b'A') as usize] += 1;
        }
    }
    c
}

/// Percent identity of two concatenated chains under global alignment,
/// gaps counted as mismatches.
pub fn percent_identity(a: &[u8], b: &[u8], table: &SubstitutionTable, gaps: GapPenalty) -> f64 {
    if a == b {
        return 1.0;
    }
    global(a, b, table, gaps).identity(a, b)
}

/// Clusters each dataset separately by single linkage over pairwise percent
/// identity and keeps one representative per cluster (longest total length,
/// then smallest id).
pub fn cluster_representatives(
    set: &SequenceSet,
    identity_threshold: f64,
    table: &SubstitutionTable,
    gaps: GapPenalty,
) -> ClusterOutcome {
    assert!(identity_threshold > 0.0 && identity_threshold <= 1.0, "identity threshold must lie in (0, 1]");
    let seqs: Vec<Vec<u8>> = set.records().iter().map(|r| r.concatenated().into_bytes()).collect();
    let comps: Vec<[u16; 26]> = seqs.iter().map(|s| composition(s)).collect();
    let mut uf = UnionFind((0..set.len()).collect());
    for ds in set.datasets() {
        let m = &ds.members;
        let pairs: Vec<(usize, usize)> =
            (0..m.len()).flat_map(|x| (x + 1..m.len()).map(move |y| (m[x], m[y]))).collect();
        let linked = par::map_slice(&pairs, |&(i, j)| {
            let (a, b) = (&seqs[i], &seqs[j]);
            // identity <= shared composition / longest, since columns >= max length
            let longest = a.len().max(b.len()) as f64;
            let shared: u32 = comps[i].iter().zip(&comps[j]).map(|(x, y)| u32::from(*x.min(y))).sum();
            if longest == 0.0 || (shared as f64) / longest < identity_threshold {
                return false;
            }
            percent_identity(a, b, table, gaps) >= identity_threshold
        });
        for (&(i, j), hit) in pairs.iter().zip(linked) {
            if hit {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; set.len()];
    for i in 0..set.len() {
        let root = uf.find(i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    let recs = set.records();
    let better = |x: &SequenceRecord, y: &SequenceRecord| {
        x.total_length() > y.total_length() || (x.total_length() == y.total_length() && x.id < y.id)
    };
    let clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|members| {
            let mut rep = members[0];
            for &i in &members[1..] {
                if better(&recs[i], &recs[rep]) {
                    rep = i;
                }
            }
            Cluster { dataset_id: recs[rep].dataset_id.clone(), representative: rep, members }
        })
        .collect();
    let mut keep = vec![false; set.len()];
    for c in &clusters {
        keep[c.representative] = true;
    }
    let reps = SequenceSet::new(recs.iter().zip(&keep).filter(|(_, k)| **k).map(|(r, _)| r.clone()).collect())
        .expect("subset of a valid set is valid");
    ClusterOutcome { representatives: reps, clusters }
}
