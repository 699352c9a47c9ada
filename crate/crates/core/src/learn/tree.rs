use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::corpus::{Label, LabeledDataset};
use crate::instrument::NUM_SIGNALS;

/// Gini impurity of a node with the given class counts.
pub fn gini(pass: usize, fail: usize) -> f64 {
    let n = pass + fail;
    if n == 0 {
        return 0.0;
    }
    let (p, f, n) = (pass as f64, fail as f64, n as f64);
    1.0 - (p / n) * (p / n) - (f / n) * (f / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: Label,
        pass: usize,
        fail: usize,
    },
}

/// Binary CART classifier over the 26 signal features. `nodes[0]` is the
/// root; a sample goes left when `feature <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub importances: Vec<f64>,
    /// Sorted feature indices the tree may split on; `None` means all.
    pub feature_mask: Option<Vec<usize>>,
    /// Trained on a single class.
    pub degenerate: bool,
}

/// Exact fraction proportional to `n * gini`: `a*b/n` for one node,
/// `a_l*b_l/n_l + a_r*b_r/n_r` for a split.
#[derive(Clone, Copy)]
struct Frac {
    num: u128,
    den: u128,
}

impl Frac {
    fn node(pass: usize, fail: usize) -> Frac {
        Frac {
            num: (pass * fail) as u128,
            den: (pass + fail).max(1) as u128,
        }
    }

    fn children(l: (usize, usize), r: (usize, usize)) -> Frac {
        let (nl, nr) = ((l.0 + l.1) as u128, (r.0 + r.1) as u128);
        let (pl, pr) = ((l.0 * l.1) as u128, (r.0 * r.1) as u128);
        Frac {
            num: pl * nr + pr * nl,
            den: nl * nr,
        }
    }

    fn cmp(self, other: Frac) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Best {
    feature: usize,
    threshold: f64,
    impurity: Frac,
    left_counts: (usize, usize),
    right_counts: (usize, usize),
}

fn counts(idx: &[usize], y: &[Label]) -> (usize, usize) {
    let fail = idx.iter().filter(|&&i| y[i] == Label::Fail).count();
    (idx.len() - fail, fail)
}

fn add(c: &mut (usize, usize), label: Label) {
    match label {
        Label::Pass => c.0 += 1,
        Label::Fail => c.1 += 1,
    }
}

fn best_split(x: &[Vec<f64>], y: &[Label], idx: &[usize], features: &[usize]) -> Option<Best> {
    let total = counts(idx, y);
    let parent = Frac::node(total.0, total.1);
    let mut best: Option<Best> = None;
    let mut order: Vec<usize> = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = (0usize, 0usize);
        for w in 0..order.len() - 1 {
            add(&mut left, y[order[w]]);
            let (lo, hi) = (x[order[w]][f], x[order[w + 1]][f]);
            if lo == hi {
                continue;
            }
            let right = (total.0 - left.0, total.1 - left.1);
            let imp = Frac::children(left, right);
            if imp.cmp(parent) != Ordering::Less {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => imp.cmp(b.impurity) == Ordering::Less,
            };
            if better {
                best = Some(Best {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    impurity: imp,
                    left_counts: left,
                    right_counts: right,
                });
            }
        }
    }
    best
}

fn leaf(c: (usize, usize)) -> Node {
    Node::Leaf {
        label: if c.1 > c.0 { Label::Fail } else { Label::Pass },
        pass: c.0,
        fail: c.1,
    }
}

impl DecisionTree {
    /// Grows a tree to purity on rows of `x` (each of length 26) using only
    /// `mask` features, or all of them.
    pub fn fit_matrix(
        x: &[Vec<f64>],
        y: &[Label],
        mask: Option<&[usize]>,
    ) -> Result<DecisionTree, LearnError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(LearnError::EmptyTrainingSet);
        }
        if let Some(row) = x.iter().find(|r| r.len() != NUM_SIGNALS) {
            return Err(LearnError::FeatureLength {
                expected: NUM_SIGNALS,
                found: row.len(),
            });
        }
        let features = normalize_mask(mask)?;
        let n = x.len() as f64;
        let mut importances = vec![0.0; NUM_SIGNALS];
        let mut nodes: Vec<Node> = Vec::new();
        let all: Vec<usize> = (0..x.len()).collect();
        let root = counts(&all, y);
        let degenerate = root.0 == 0 || root.1 == 0;
        nodes.push(leaf(root));
        let mut stack = vec![(0usize, all)];
        while let Some((slot, idx)) = stack.pop() {
            let c = counts(&idx, y);
            if c.0 == 0 || c.1 == 0 {
                continue;
            }
            let Some(best) = best_split(x, y, &idx, &features) else {
                continue;
            };
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| x[i][best.feature] <= best.threshold);
            let node_n = idx.len() as f64;
            let child_gini = (left_idx.len() as f64
                * gini(best.left_counts.0, best.left_counts.1)
                + right_idx.len() as f64 * gini(best.right_counts.0, best.right_counts.1))
                / node_n;
            importances[best.feature] += node_n / n * (gini(c.0, c.1) - child_gini);
            let left = nodes.len();
            nodes.push(leaf(best.left_counts));
            let right = nodes.len();
            nodes.push(leaf(best.right_counts));
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right,
            };
            stack.push((right, right_idx));
            stack.push((left, left_idx));
        }
        let total: f64 = importances.iter().sum();
        if total > 0.0 {
            importances.iter_mut().for_each(|v| *v /= total);
        }
        Ok(DecisionTree {
            nodes,
            importances,
            feature_mask: mask.map(|_| features),
            degenerate,
        })
    }

    pub fn fit(train: &LabeledDataset, mask: Option<&[usize]>) -> Result<DecisionTree, LearnError> {
        let x: Vec<Vec<f64>> = train
            .examples
            .iter()
            .map(|e| e.features.to_features())
            .collect();
        let y: Vec<Label> = train.examples.iter().map(|e| e.label).collect();
        DecisionTree::fit_matrix(&x, &y, mask)
    }

    /// Label for a full 26-feature vector, or for a vector holding only the
    /// masked features in mask order.
    pub fn predict(&self, features: &[f64]) -> Result<Label, LearnError> {
        let lookup = |f: usize| -> f64 {
            match &self.feature_mask {
                Some(mask) if features.len() == mask.len() && features.len() != NUM_SIGNALS => {
                    features[mask.binary_search(&f).expect("split feature is in mask")]
                }
                _ => features[f],
            }
        };
        let masked_len = self.feature_mask.as_ref().map(Vec::len);
        if features.len() != NUM_SIGNALS && Some(features.len()) != masked_len {
            return Err(LearnError::FeatureLength {
                expected: masked_len.unwrap_or(NUM_SIGNALS),
                found: features.len(),
            });
        }
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label, .. } => return Ok(*label),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if lookup(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Label>, LearnError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn split_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

fn normalize_mask(mask: Option<&[usize]>) -> Result<Vec<usize>, LearnError> {
    match mask {
        None => Ok((0..NUM_SIGNALS).collect()),
        Some(m) => {
            let mut v = m.to_vec();
            v.sort_unstable();
            v.dedup();
            if v.is_empty() || v.last().is_some_and(|&f| f >= NUM_SIGNALS) {
                return Err(LearnError::BadMask);
            }
            Ok(v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64) -> Vec<f64> {
        let mut r = vec![0.0; NUM_SIGNALS];
        r[0] = v;
        r
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(5, 5), 0.5);
        assert_eq!(gini(10, 0), 0.0);
        assert_eq!(gini(0, 0), 0.0);
    }

    #[test]
    fn two_point_split() {
        let t = DecisionTree::fit_matrix(&[row(0.0), row(1.0)], &[Label::Pass, Label::Fail], None)
            .unwrap();
        assert_eq!(t.split_count(), 1);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(t.importances[0], 1.0);
        assert_eq!(t.predict(&row(0.0)).unwrap(), Label::Pass);
        assert_eq!(t.predict(&row(1.0)).unwrap(), Label::Fail);
    }

    #[test]
    fn single_class_gives_flagged_leaf() {
        let t = DecisionTree::fit_matrix(&[row(0.0), row(3.0)], &[Label::Fail, Label::Fail], None)
            .unwrap();
        assert!(t.degenerate);
        assert_eq!(t.nodes.len(), 1);
        assert!(t.importances.iter().all(|&v| v == 0.0));
        assert_eq!(t.predict(&row(-9.0)).unwrap(), Label::Fail);
    }

    #[test]
    fn leaf_tie_predicts_pass() {
        let t = DecisionTree::fit_matrix(&[row(1.0), row(1.0)], &[Label::Pass, Label::Fail], None)
            .unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&row(1.0)).unwrap(), Label::Pass);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let t = DecisionTree::fit_matrix(&[row(0.0), row(1.0)], &[Label::Pass, Label::Fail], None)
            .unwrap();
        assert!(t.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn masked_vectors_are_accepted() {
        let mut a = row(0.0);
        a[3] = 5.0;
        let b = row(0.0);
        let t = DecisionTree::fit_matrix(&[a, b], &[Label::Fail, Label::Pass], Some(&[3, 7]))
            .unwrap();
        assert_eq!(t.predict(&[5.0, 0.0]).unwrap(), Label::Fail);
        assert_eq!(t.predict(&[0.0, 0.0]).unwrap(), Label::Pass);
        assert!(t.predict(&[0.0]).is_err());
    }
}
