use serde::{Deserialize, Serialize};

pub const PH_MIN: f64 = 0.0;
pub const PH_MAX: f64 = 14.0;

/// Leaf bins from recursive halving of [0, 14]. Bins are half-open
/// `[lo, hi)` except the last, which also holds 14.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiBinning {
    /// Ascending edges, starting at 0 and ending at 14.
    pub edges: Vec<f64>,
}

impl PiBinning {
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.edges.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the bin holding `v`; values outside [0, 14] are clamped.
    pub fn bin_of(&self, v: f64) -> usize {
        let v = v.clamp(PH_MIN, PH_MAX);
        let k = self.edges.partition_point(|&e| e <= v);
        k.saturating_sub(1).min(self.len() - 1)
    }

    pub fn label(&self, bin: usize) -> String {
        bin_label(self.edges[bin], self.edges[bin + 1])
    }
}

pub fn bin_label(lo: f64, hi: f64) -> String {
    format!("{lo}-{hi}")
}

fn in_bin(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && (v < hi || (hi == PH_MAX && v <= hi))
}

/// Halves [0, 14] recursively. A bin splits when it holds at least
/// `min_fraction` of all values and is wider than `min_width`.
pub fn bin_pi(values: &[f64], min_fraction: f64, min_width: f64) -> PiBinning {
    let n = values.len() as f64;
    let need = min_fraction * n;
    let mut edges = vec![PH_MIN];
    let mut stack = vec![(PH_MIN, PH_MAX)];
    // depth-first, low half first, so leaves come out in ascending order
    while let Some((lo, hi)) = stack.pop() {
        let count = values.iter().filter(|&&v| in_bin(v, lo, hi)).count();
        // the small slack keeps exact fractions such as 3 of 30 at 10%
        let populated = count > 0 && count as f64 + 1e-9 >= need;
        if populated && hi - lo > min_width {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi));
            stack.push((lo, mid));
        } else {
            edges.push(hi);
        }
    }
    PiBinning { edges }
}
