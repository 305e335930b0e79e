//! Random forest of Gini-split binary trees for the disrupted-vs-clean
//! sub-problem.

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::rng::indexed_rng;

pub const FOREST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Draw equal-size bootstrap samples from both classes, so both carry
    /// equal weight in every tree.
    pub class_balanced: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 50, max_depth: 8, min_samples_split: 5, class_balanced: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { negative: usize, positive: usize },
}

/// Node 0 is the root. Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { feature, threshold, left, right } => i = if x[feature] <= threshold { left } else { right },
                Node::Leaf { negative, positive } => return positive > negative,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub schema_version: u32,
    pub n_features: usize,
    pub config: ForestConfig,
    pub seed: u64,
    pub trees: Vec<Tree>,
    /// Out-of-bag accuracy over samples left out by at least one tree.
    pub oob_accuracy: Option<f64>,
}

/// `1 - p^2 - q^2` for a node with the given class counts.
pub fn gini(negative: usize, positive: usize) -> f64 {
    let n = (negative + positive) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p, q) = (positive as f64 / n, negative as f64 / n);
    1.0 - p * p - q * q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Impurity decrease of splitting a node into the given children.
pub fn gini_gain(left: (usize, usize), right: (usize, usize)) -> f64 {
    let (nl, nr) = ((left.0 + left.1) as f64, (right.0 + right.1) as f64);
    let n = nl + nr;
    gini(left.0 + right.0, left.1 + right.1) - (nl / n) * gini(left.0, left.1) - (nr / n) * gini(right.0, right.1)
}

/// Best Gini split of `rows` over `features`, with thresholds at midpoints
/// between consecutive distinct values. Ties keep the earlier feature in
/// `features` and then the lower threshold. `None` when no split has
/// positive gain.
pub fn best_split(x: &[Vec<f64>], y: &[bool], rows: &[usize], features: &[usize]) -> Option<Split> {
    let total_pos = rows.iter().filter(|&&r| y[r]).count();
    let total_neg = rows.len() - total_pos;
    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let (mut neg, mut pos) = (0, 0);
        for w in 0..order.len().saturating_sub(1) {
            if y[order[w]] {
                pos += 1;
            } else {
                neg += 1;
            }
            let (lo, hi) = (x[order[w]][f], x[order[w + 1]][f]);
            if lo == hi {
                continue;
            }
            let gain = gini_gain((neg, pos), (total_neg - neg, total_pos - pos));
            if gain > 0.0 && best.map_or(true, |b| gain > b.gain) {
                best = Some(Split { feature: f, threshold: lo + (hi - lo) / 2.0, gain });
            }
        }
    }
    best
}

struct Grower<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    cfg: &'a ForestConfig,
    n_candidates: usize,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> Grower<'_, R> {
    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let positive = rows.iter().filter(|&&r| self.y[r]).count();
        let negative = rows.len() - positive;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { negative, positive });
        if depth >= self.cfg.max_depth || positive == 0 || negative == 0 || rows.len() < self.cfg.min_samples_split {
            return id;
        }
        let n_features = self.x[0].len();
        let features = sample(&mut self.rng, n_features, self.n_candidates).into_vec();
        let Some(split) = best_split(self.x, self.y, rows, &features) else {
            return id;
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[r][split.feature] <= split.threshold);
        let left = self.grow(&l_rows, depth + 1);
        let right = self.grow(&r_rows, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }
}

/// Bootstrap sample for tree `index`, drawn with replacement. Plain
/// sampling keeps the data size; balanced sampling draws the minority
/// class size from each class.
pub fn bootstrap(y: &[bool], cfg: &ForestConfig, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = indexed_rng(seed, "forest-bootstrap", index);
    let n = y.len();
    if !cfg.class_balanced {
        return (0..n).map(|_| rng.gen_range(0..n)).collect();
    }
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| y[i]);
    let m = pos.len().min(neg.len());
    let mut rows: Vec<usize> = (0..m).map(|_| pos[rng.gen_range(0..pos.len())]).collect();
    rows.extend((0..m).map(|_| neg[rng.gen_range(0..neg.len())]));
    rows
}

pub fn train_forest(x: &[Vec<f64>], y: &[bool], cfg: &ForestConfig, seed: u64) -> Result<Forest, ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::DimensionMismatch { expected: y.len(), got: x.len() });
    }
    if !(y.iter().any(|&v| v) && y.iter().any(|&v| !v)) {
        return Err(ModelError::SingleClassInput);
    }
    if cfg.n_trees == 0 {
        return Err(ModelError::InvalidHyperparams("a forest needs at least one tree".into()));
    }
    let n_features = x[0].len();
    if n_features == 0 || x.iter().any(|r| r.len() != n_features) {
        return Err(ModelError::DimensionMismatch { expected: n_features, got: 0 });
    }
    let n_candidates = ((n_features as f64).sqrt().round() as usize).clamp(1, n_features);
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut oob_votes = vec![(0usize, 0usize); x.len()];
    for t in 0..cfg.n_trees {
        let rows = bootstrap(y, cfg, seed, t as u64);
        let mut grower = Grower {
            x,
            y,
            cfg,
            n_candidates,
            rng: indexed_rng(seed, "forest-features", t as u64),
            nodes: Vec::new(),
        };
        grower.grow(&rows, 0);
        let tree = Tree { nodes: grower.nodes };
        let mut in_bag = vec![false; x.len()];
        rows.iter().for_each(|&r| in_bag[r] = true);
        for (i, votes) in oob_votes.iter_mut().enumerate().filter(|(i, _)| !in_bag[*i]) {
            if tree.predict(&x[i]) {
                votes.1 += 1;
            } else {
                votes.0 += 1;
            }
        }
        trees.push(tree);
    }
    let scored: Vec<bool> = oob_votes
        .iter()
        .zip(y)
        .filter(|((n, p), _)| n + p > 0)
        .map(|(&(n, p), &label)| (p > n) == label)
        .collect();
    let oob_accuracy = (!scored.is_empty()).then(|| scored.iter().filter(|&&c| c).count() as f64 / scored.len() as f64);
    Ok(Forest { schema_version: FOREST_SCHEMA_VERSION, n_features, config: cfg.clone(), seed, trees, oob_accuracy })
}

/// Majority vote and the fraction of trees voting positive. A tied vote is
/// negative.
pub fn forest_predict(f: &Forest, x: &[f64]) -> Result<(bool, f64), ModelError> {
    if x.len() != f.n_features {
        return Err(ModelError::DimensionMismatch { expected: f.n_features, got: x.len() });
    }
    let positive = f.trees.iter().filter(|t| t.predict(x)).count();
    let score = positive as f64 / f.trees.len() as f64;
    Ok((2 * positive > f.trees.len(), score))
}

pub fn save_forest(path: &Path, f: &Forest) -> Result<()> {
    std::fs::write(path, serde_json::to_string(f)? + "\n")?;
    Ok(())
}

pub fn load_forest(path: &Path) -> Result<Forest> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let found = value.get("schema_version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
    if found != FOREST_SCHEMA_VERSION {
        return Err(ModelError::SchemaVersion { expected: FOREST_SCHEMA_VERSION, found }.into());
    }
    Ok(serde_json::from_value(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn leaf(negative: usize, positive: usize) -> Tree {
        Tree { nodes: vec![Node::Leaf { negative, positive }] }
    }

    fn forest_of(trees: Vec<Tree>) -> Forest {
        Forest { schema_version: 1, n_features: 1, config: ForestConfig::default(), seed: 0, trees, oob_accuracy: None }
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(5, 5), 0.5);
        assert_eq!(gini(0, 7), 0.0);
        assert_eq!(gini(0, 0), 0.0);
    }

    #[test]
    fn separable_single_feature() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 17).collect();
        let s = best_split(&x, &y, &(0..40).collect::<Vec<_>>(), &[0, 1]).unwrap();
        assert_eq!((s.feature, s.threshold), (0, 16.5));

        // A gap between the classes keeps every bootstrap threshold separating.
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![if i < 17 { i as f64 } else { 100.0 + i as f64 }]).collect();
        let cfg = ForestConfig { n_trees: 1, max_depth: 1, class_balanced: false, ..ForestConfig::default() };
        let f = train_forest(&x, &y, &cfg, 0).unwrap();
        let acc = x.iter().zip(&y).filter(|(r, &l)| forest_predict(&f, r).unwrap().0 == l).count();
        assert_eq!(acc, 40);
    }

    #[test]
    fn independent_labels_oob_near_chance() {
        let mut rng = stream_rng(42, "noise");
        let x: Vec<Vec<f64>> = (0..2000).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
        let y: Vec<bool> = (0..2000).map(|_| rng.gen_bool(0.5)).collect();
        let cfg = ForestConfig { class_balanced: false, ..ForestConfig::default() };
        let oob = train_forest(&x, &y, &cfg, 7).unwrap().oob_accuracy.unwrap();
        assert!((0.45..=0.55).contains(&oob), "oob {oob}");
    }

    #[test]
    fn same_seed_same_forest() {
        let x: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 13) as f64, (i % 7) as f64, (i % 3) as f64]).collect();
        let y: Vec<bool> = (0..200).map(|i| (i % 13) > 6 && i % 3 == 0).collect();
        let cfg = ForestConfig { n_trees: 5, ..ForestConfig::default() };
        assert_eq!(train_forest(&x, &y, &cfg, 3).unwrap(), train_forest(&x, &y, &cfg, 3).unwrap());
        assert_eq!(bootstrap(&y, &cfg, 3, 2), bootstrap(&y, &cfg, 3, 2));
        let f = train_forest(&x, &y, &cfg, 3).unwrap();
        assert!(f.trees.iter().all(|t| t.depth() <= cfg.max_depth));
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![1.0]; 4];
        assert_eq!(train_forest(&x, &[true; 4], &ForestConfig::default(), 0), Err(ModelError::SingleClassInput));
    }

    #[test]
    fn votes_and_ties() {
        let all = forest_of(vec![leaf(0, 3); 50]);
        assert_eq!(forest_predict(&all, &[0.0]).unwrap(), (true, 1.0));
        let half = forest_of((0..50).map(|i| if i < 25 { leaf(0, 1) } else { leaf(1, 0) }).collect());
        assert_eq!(forest_predict(&half, &[0.0]).unwrap(), (false, 0.5));
        assert_eq!(
            forest_predict(&half, &[0.0, 1.0]),
            Err(ModelError::DimensionMismatch { expected: 1, got: 2 })
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let x: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 10) as f64 * 0.1, (i % 4) as f64]).collect();
        let y: Vec<bool> = (0..60).map(|i| i % 10 > 4).collect();
        let f = train_forest(&x, &y, &ForestConfig { n_trees: 3, ..ForestConfig::default() }, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.json");
        save_forest(&p, &f).unwrap();
        assert_eq!(load_forest(&p).unwrap(), f);
    }

    proptest! {
        #[test]
        fn tree_paths_reach_leaves(seed in 0u64..50) {
            let mut rng = stream_rng(seed, "shape");
            let x: Vec<Vec<f64>> = (0..80).map(|_| (0..3).map(|_| rng.gen_range(0..5) as f64).collect()).collect();
            let y: Vec<bool> = x.iter().map(|r| r[0] + r[1] > 4.0).collect();
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let f = train_forest(&x, &y, &ForestConfig { n_trees: 3, ..ForestConfig::default() }, seed).unwrap();
            for t in &f.trees {
                let mut reached = vec![false; t.nodes.len()];
                reached[0] = true;
                for (i, n) in t.nodes.iter().enumerate() {
                    if let Node::Split { feature, threshold, left, right } = *n {
                        prop_assert!(feature < 3 && threshold.is_finite());
                        prop_assert!(reached[i]);
                        reached[left] = true;
                        reached[right] = true;
                    }
                }
                prop_assert!(reached.iter().all(|&r| r));
            }
        }
    }
}
