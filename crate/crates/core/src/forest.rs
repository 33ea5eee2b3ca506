//! Random forest over binary fingerprints with Gini importance.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fingerprint::FeatureFingerprint;
use crate::par;
use crate::seed::SeedStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means ⌈√(active width)⌉.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, mtry: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    /// Fraction of positive samples reaching the leaf.
    Leaf(f64),
    /// Bit clear goes to `left`, bit set to `right`.
    Split { feature: usize, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &FeatureFingerprint) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(p) => return p,
                Node::Split { feature, left, right } => at = if x.get(feature) { right } else { left },
            }
        }
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    x: &'a [&'a FeatureFingerprint],
    y: &'a [bool],
    active: &'a [usize],
    mtry: usize,
    nodes: Vec<Node>,
    decrease: Vec<f64>,
}

impl Grower<'_> {
    fn grow(&mut self, samples: Vec<usize>, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let n = samples.len() as f64;
        let pos = samples.iter().filter(|&&i| self.y[i]).count() as f64;
        if pos == 0.0 || pos == n {
            self.nodes[id] = Node::Leaf(pos / n);
            return id;
        }
        let parent = gini(pos, n);
        let mut order: Vec<usize> = self.active.to_vec();
        order.shuffle(rng);
        // keep drawing until mtry non-constant features were examined
        let mut best: Option<(f64, usize)> = None;
        let mut examined = 0;
        for &f in &order {
            if examined == self.mtry {
                break;
            }
            let (mut n1, mut p1) = (0.0, 0.0);
            for &i in &samples {
                if self.x[i].get(f) {
                    n1 += 1.0;
                    if self.y[i] {
                        p1 += 1.0;
                    }
                }
            }
            if n1 == 0.0 || n1 == n {
                continue;
            }
            examined += 1;
            let (n0, p0) = (n - n1, pos - p1);
            let child = (n0 * gini(p0, n0) + n1 * gini(p1, n1)) / n;
            let gain = (parent - child).max(0.0);
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, f));
            }
        }
        let Some((gain, feature)) = best else {
            self.nodes[id] = Node::Leaf(pos / n);
            return id;
        };
        self.decrease[feature] += n * gain;
        let (right_s, left_s): (Vec<usize>, Vec<usize>) = samples.into_iter().partition(|&i| self.x[i].get(feature));
        let left = self.grow(left_s, rng);
        let right = self.grow(right_s, rng);
        self.nodes[id] = Node::Split { feature, left, right };
        id
    }
}

/// Bagged Gini trees grown to purity.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    importance: Vec<f64>,
}

impl RandomForest {
    /// Trains on rows `x` with labels `y` (true = positive class), splitting
    /// only on `active` columns. Tree `t` draws from `seeds.rng("tree", t)`.
    pub fn fit(
        x: &[&FeatureFingerprint],
        y: &[bool],
        active: &[usize],
        config: &ForestConfig,
        seeds: &SeedStream,
    ) -> RandomForest {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty(), "cannot fit a forest on no rows");
        let width = x[0].width();
        let mtry =
            config.mtry.unwrap_or_else(|| (active.len() as f64).sqrt().ceil() as usize).clamp(1, active.len().max(1));
        let grown = par::map_range(config.n_trees, |t| {
            let mut rng = seeds.rng("tree", t as u64);
            let samples: Vec<usize> = if config.bootstrap {
                (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
            } else {
                (0..x.len()).collect()
            };
            let mut g = Grower { x, y, active, mtry, nodes: Vec::new(), decrease: vec![0.0; width] };
            g.grow(samples, &mut rng);
            (Tree { nodes: g.nodes }, g.decrease)
        });
        let mut importance = vec![0.0; width];
        let mut used = 0usize;
        let mut trees = Vec::with_capacity(grown.len());
        for (tree, dec) in grown {
            let total: f64 = dec.iter().sum();
            if total > 0.0 {
                used += 1;
                for (acc, d) in importance.iter_mut().zip(&dec) {
                    *acc += d / total;
                }
            }
            trees.push(tree);
        }
        if used > 0 {
            let total: f64 = importance.iter().sum();
            importance.iter_mut().for_each(|v| *v /= total);
        }
        RandomForest { trees, importance }
    }

    /// Mean leaf positive fraction across trees.
    pub fn predict_proba(&self, x: &FeatureFingerprint) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Gini importance over the full fingerprint width; sums to 1 when any
    /// tree split, zero everywhere otherwise.
    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
