//! Gini decision tree annotated with split efficiency and error rate, and
//! the design recommendations read off it.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fingerprint::{Feature, FeatureFingerprint, FeatureVocabulary};

/// Column plus (targeting, reference) counts of the present and absent sides.
type Split = (usize, (u64, u64), (u64, u64));

pub const MIN_LEAF_FRACTION: f64 = 0.05;
pub const MIN_SE: f64 = 0.05;
const GINI_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeColor {
    Blue,
    Orange,
}

/// When growth stops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopRule {
    /// Reject any split that would leave a child below the leaf floor.
    #[default]
    Guard,
    /// Grow breadth-first and halt everything once some leaf falls below
    /// the floor.
    Global,
}

impl FromStr for StopRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "guard" | "local" => Ok(StopRule::Guard),
            "global" => Ok(StopRule::Global),
            o => Err(format!("unknown stop rule {o:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf_fraction: f64,
    pub stop: StopRule,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { min_leaf_fraction: MIN_LEAF_FRACTION, stop: StopRule::Guard }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Split feature; absent on leaves.
    pub feature: Option<Feature>,
    pub n_targeting: u64,
    pub n_reference: u64,
    pub gini: f64,
    pub se: f64,
    pub er: f64,
    pub color: NodeColor,
    /// Rows carrying the feature.
    pub present: Option<Box<TreeNode>>,
    /// Rows lacking it.
    pub absent: Option<Box<TreeNode>>,
}

fn gini(t: u64, r: u64) -> f64 {
    let n = (t + r) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = t as f64 / n;
    2.0 * p * (1.0 - p)
}

impl TreeNode {
    fn leaf(t: u64, r: u64) -> Self {
        TreeNode {
            feature: None,
            n_targeting: t,
            n_reference: r,
            gini: gini(t, r),
            se: 0.0,
            er: 0.0,
            color: NodeColor::Orange,
            present: None,
            absent: None,
        }
    }

    pub fn samples(&self) -> u64 {
        self.n_targeting + self.n_reference
    }

    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        self.children().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    pub fn children(&self) -> impl Iterator<Item = &TreeNode> {
        self.present.iter().chain(self.absent.iter()).map(|b| b.as_ref())
    }

    /// Fills se, er and color on every node from the counts.
    pub fn annotate(&mut self) {
        let root_t = self.n_targeting;
        fn walk(n: &mut TreeNode, root_t: u64) {
            n.gini = gini(n.n_targeting, n.n_reference);
            n.se = if root_t == 0 { 0.0 } else { n.n_targeting as f64 / root_t as f64 };
            n.er = if n.samples() == 0 { 0.0 } else { n.n_reference as f64 / n.samples() as f64 };
            n.color = if n.n_targeting > n.n_reference { NodeColor::Blue } else { NodeColor::Orange };
            for c in [&mut n.present, &mut n.absent].into_iter().flatten() {
                walk(c, root_t);
            }
        }
        walk(self, root_t);
    }
}

struct Rows<'a> {
    x: &'a [&'a FeatureFingerprint],
    y: &'a [bool],
    w: &'a [u64],
    active: &'a [usize],
}

impl Rows<'_> {
    fn counts(&self, idx: &[usize]) -> (u64, u64) {
        let mut c = (0, 0);
        for &i in idx {
            if self.y[i] {
                c.0 += self.w[i];
            } else {
                c.1 += self.w[i];
            }
        }
        c
    }

    /// Best split by weighted child Gini, lowest column on ties. Returns the
    /// column and the (present, absent) counts. `floor` rejects undersized
    /// children when given.
    fn best_split(&self, idx: &[usize], floor: Option<u64>) -> Option<Split> {
        let (t, r) = self.counts(idx);
        let n = (t + r) as f64;
        let parent = gini(t, r);
        let mut best: Option<(f64, usize, (u64, u64))> = None;
        for &c in self.active {
            let (mut pt, mut pr) = (0, 0);
            for &i in idx {
                if self.x[i].get(c) {
                    if self.y[i] {
                        pt += self.w[i];
                    } else {
                        pr += self.w[i];
                    }
                }
            }
            let (np, na) = (pt + pr, t + r - pt - pr);
            if np == 0 || na == 0 {
                continue;
            }
            if floor.is_some_and(|f| np < f || na < f) {
                continue;
            }
            let child = (np as f64 * gini(pt, pr) + na as f64 * gini(t - pt, r - pr)) / n;
            if child >= parent - GINI_EPS {
                continue;
            }
            if best.is_none_or(|(g, _, _)| child < g - GINI_EPS) {
                best = Some((child, c, (pt, pr)));
            }
        }
        best.map(|(_, c, p)| (c, p, (t - p.0, r - p.1)))
    }
}

/// Fits the tree on weighted rows (`y` true = targeting, weight = number of
/// times the row was drawn). Only `active` columns are split on.
pub fn fit_tree(
    x: &[&FeatureFingerprint],
    y: &[bool],
    weights: &[u64],
    active: &[usize],
    vocab: &FeatureVocabulary,
    params: &TreeParams,
) -> TreeNode {
    assert!(x.len() == y.len() && y.len() == weights.len());
    let rows = Rows { x, y, w: weights, active };
    let all: Vec<usize> = (0..x.len()).filter(|&i| weights[i] > 0).collect();
    let (t, r) = rows.counts(&all);
    let root_n = t + r;
    let floor = ((params.min_leaf_fraction * root_n as f64) - 1e-9).ceil().max(0.0) as u64;
    let mut root = match params.stop {
        StopRule::Guard => grow_guarded(&rows, all, floor, vocab),
        StopRule::Global => grow_global(&rows, all, floor, vocab),
    };
    root.annotate();
    root
}

fn grow_guarded(rows: &Rows<'_>, idx: Vec<usize>, floor: u64, vocab: &FeatureVocabulary) -> TreeNode {
    let (t, r) = rows.counts(&idx);
    let mut node = TreeNode::leaf(t, r);
    if t == 0 || r == 0 {
        return node;
    }
    if let Some((c, _, _)) = rows.best_split(&idx, Some(floor)) {
        let (p, a): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows.x[i].get(c));
        node.feature = Some(vocab.features()[c].clone());
        node.present = Some(Box::new(grow_guarded(rows, p, floor, vocab)));
        node.absent = Some(Box::new(grow_guarded(rows, a, floor, vocab)));
    }
    node
}

fn grow_global(rows: &Rows<'_>, idx: Vec<usize>, floor: u64, vocab: &FeatureVocabulary) -> TreeNode {
    // flat arena, converted to boxes at the end
    struct Flat {
        idx: Vec<usize>,
        feature: Option<usize>,
        kids: Option<(usize, usize)>,
    }
    let mut arena = vec![Flat { idx, feature: None, kids: None }];
    let mut queue = VecDeque::from([0usize]);
    while let Some(at) = queue.pop_front() {
        let (t, r) = rows.counts(&arena[at].idx);
        if t == 0 || r == 0 {
            continue;
        }
        let Some((c, p, a)) = rows.best_split(&arena[at].idx, None) else {
            continue;
        };
        let (pi, ai): (Vec<usize>, Vec<usize>) = arena[at].idx.iter().partition(|&&i| rows.x[i].get(c));
        let k = arena.len();
        arena.push(Flat { idx: pi, feature: None, kids: None });
        arena.push(Flat { idx: ai, feature: None, kids: None });
        arena[at].feature = Some(c);
        arena[at].kids = Some((k, k + 1));
        if p.0 + p.1 < floor || a.0 + a.1 < floor {
            break;
        }
        queue.push_back(k);
        queue.push_back(k + 1);
    }
    fn build(arena: &[Flat], at: usize, rows: &Rows<'_>, vocab: &FeatureVocabulary) -> TreeNode {
        let (t, r) = rows.counts(&arena[at].idx);
        let mut node = TreeNode::leaf(t, r);
        if let (Some(c), Some((p, a))) = (arena[at].feature, arena[at].kids) {
            node.feature = Some(vocab.features()[c].clone());
            node.present = Some(Box::new(build(arena, p, rows, vocab)));
            node.absent = Some(Box::new(build(arena, a, rows, vocab)));
        }
        node
    }
    build(&arena, 0, rows, vocab)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// (feature, required present) from the root down.
    pub path: Vec<(Feature, bool)>,
    pub se: f64,
    pub er: f64,
    pub depth: usize,
    pub n_targeting: u64,
    pub n_reference: u64,
}

impl Recommendation {
    /// `+feature` / `-feature` tokens joined by spaces; empty for the root.
    pub fn path_string(&self) -> String {
        self.path.iter().map(|(f, inc)| format!("{}{}", if *inc { '+' } else { '-' }, f)).collect::<Vec<_>>().join(" ")
    }

    /// Whether a fingerprint satisfies every condition on the path.
    pub fn matches(&self, fp: &FeatureFingerprint, vocab: &FeatureVocabulary) -> bool {
        self.path.iter().all(|(f, inc)| {
            let has = vocab.index_of(f.segment, &f.label).is_some_and(|c| fp.get(c));
            has == *inc
        })
    }
}

/// Pareto frontier of blue nodes with se ≥ `min_se` over (se up, er down),
/// by descending se, then ascending er, then shallower depth.
pub fn recommend(root: &TreeNode, min_se: f64) -> Vec<Recommendation> {
    let mut cands = Vec::new();
    fn walk(n: &TreeNode, path: &mut Vec<(Feature, bool)>, out: &mut Vec<Recommendation>, min_se: f64) {
        if n.color == NodeColor::Blue && n.se >= min_se {
            out.push(Recommendation {
                path: path.clone(),
                se: n.se,
                er: n.er,
                depth: path.len(),
                n_targeting: n.n_targeting,
                n_reference: n.n_reference,
            });
        }
        if let Some(f) = &n.feature {
            for (child, inc) in [(&n.present, true), (&n.absent, false)] {
                if let Some(c) = child {
                    path.push((f.clone(), inc));
                    walk(c, path, out, min_se);
                    path.pop();
                }
            }
        }
    }
    walk(root, &mut Vec::new(), &mut cands, min_se);
    let dominated =
        |a: &Recommendation| cands.iter().any(|b| b.se >= a.se && b.er <= a.er && (b.se > a.se || b.er < a.er));
    let mut front: Vec<Recommendation> = cands.iter().filter(|a| !dominated(a)).cloned().collect();
    front.sort_by(|a, b| b.se.total_cmp(&a.se).then(a.er.total_cmp(&b.er)).then(a.depth.cmp(&b.depth)));
    if front.is_empty() {
        log::warn!("no targeting-dominated node reaches split efficiency {min_se}");
    }
    front
}

pub fn write_recommendations_csv<W: Write>(recs: &[Recommendation], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "se", "er", "depth", "n_targeting", "n_reference"])?;
    for r in recs {
        w.write_record([
            r.path_string(),
            format!("{:.6}", r.se),
            format!("{:.6}", r.er),
            r.depth.to_string(),
            r.n_targeting.to_string(),
            r.n_reference.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz source; the feature-present branch is drawn on the left.
pub fn to_dot(root: &TreeNode) -> String {
    let mut out =
        String::from("digraph design_tree {\n  node [shape=box, style=\"filled,rounded\", fontname=\"Helvetica\"];\n");
    let mut next = 0usize;
    fn emit(n: &TreeNode, id: usize, next: &mut usize, out: &mut String) {
        let mut label = String::new();
        if let Some(f) = &n.feature {
            let _ = write!(label, "{}\\n", dot_escape(&f.to_string()));
        }
        let class = if n.color == NodeColor::Blue { "targeting" } else { "reference" };
        let _ = write!(
            label,
            "gini = {:.4}\\nsamples = {}\\nvalue = [{}, {}]\\nclass = {}\\nse = {:.2}%\\ner = {:.2}%",
            n.gini,
            n.samples(),
            n.n_reference,
            n.n_targeting,
            class,
            n.se * 100.0,
            n.er * 100.0
        );
        let fill = if n.color == NodeColor::Blue { "#9ecae1" } else { "#fdae6b" };
        let _ = writeln!(out, "  n{id} [label=\"{label}\", fillcolor=\"{fill}\"];");
        for (child, tag) in [(&n.present, "True"), (&n.absent, "False")] {
            if let Some(c) = child {
                *next += 1;
                let cid = *next;
                let _ = writeln!(out, "  n{id} -> n{cid} [label=\"{tag}\"];");
                emit(c, cid, next, out);
            }
        }
    }
    emit(root, 0, &mut next, &mut out);
    out.push_str("}\n");
    out
}

pub fn to_json(root: &TreeNode) -> serde_json::Result<String> {
    serde_json::to_string_pretty(root)
}

pub fn from_json(text: &str) -> serde_json::Result<TreeNode> {
    serde_json::from_str(text)
}
