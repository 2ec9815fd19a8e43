//! Random forest of probability trees over dense feature vectors.

use crate::numerics::{ModelIo, Packer, Rng, Tensor, Unpacker};
use crate::real::Real;
use crate::{tags, Error, Result};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct ForestConfig {
    pub tree_count: usize,
    /// Random (feature, threshold) pairs scored per node.
    pub candidates_per_node: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { tree_count: 100, candidates_per_node: 10 }
    }
}

/// Flat tree node. Internal nodes route `x[feature] <= threshold` to
/// `left`, the rest to `right`. Leaves have `left == NO_CHILD` and only
/// `positive_prob` meaningful.
#[derive(Debug, Clone, PartialEq)]
struct Node<T: Real> {
    feature: u32,
    threshold: T,
    left: u32,
    right: u32,
    positive_prob: T,
}

const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
struct Tree<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Tree<T> {
    fn predict(&self, x: &[T]) -> T {
        let mut at = 0usize;
        loop {
            let node = &self.nodes[at];
            if node.left == NO_CHILD {
                return node.positive_prob;
            }
            at = if x[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    fn depth(&self) -> usize {
        fn walk<T: Real>(nodes: &[Node<T>], at: usize) -> usize {
            let node = &nodes[at];
            if node.left == NO_CHILD {
                1
            } else {
                1 + walk(nodes, node.left as usize).max(walk(nodes, node.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Bagged ensemble of probability trees; the prediction is the mean of the
/// per-tree leaf frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel<T: Real> {
    trees: Vec<Tree<T>>,
    feature_dim: usize,
}

impl<T: Real> ForestModel<T> {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Probability of the positive class, in [0, 1].
    pub fn predict(&self, x: &[T]) -> Result<T> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch { expected: self.feature_dim, got: x.len() });
        }
        let sum: T = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / T::of(self.trees.len() as f64))
    }

    /// Deepest leaf over all trees; used by tests to confirm growth to purity.
    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }
}

impl<T: Real> ModelIo for ForestModel<T> {
    const TAG: u32 = tags::FOREST;

    fn encode(&self, p: &mut Packer) {
        p.push_usize(self.feature_dim);
        p.push_usize(self.trees.len());
        for tree in &self.trees {
            p.push_usize(tree.nodes.len());
            for node in &tree.nodes {
                p.push_usize(node.feature as usize);
                p.push(node.threshold.as_f64());
                p.push(if node.left == NO_CHILD { -1.0 } else { node.left as f64 });
                p.push(if node.right == NO_CHILD { -1.0 } else { node.right as f64 });
                p.push(node.positive_prob.as_f64());
            }
        }
    }

    fn decode(u: &mut Unpacker) -> Result<Self> {
        let feature_dim = u.take_usize()?;
        let tree_count = u.take_usize()?;
        let mut trees = Vec::with_capacity(tree_count);
        for _ in 0..tree_count {
            let node_count = u.take_usize()?;
            let mut nodes = Vec::with_capacity(node_count);
            for _ in 0..node_count {
                let feature = u.take_usize()? as u32;
                let threshold = T::of(u.take()?);
                let left = decode_child(u.take()?, node_count)?;
                let right = decode_child(u.take()?, node_count)?;
                let positive_prob = T::of(u.take()?);
                nodes.push(Node { feature, threshold, left, right, positive_prob });
            }
            if nodes.is_empty() {
                return Err(Error::Parse("tree with no nodes".into()));
            }
            trees.push(Tree { nodes });
        }
        Ok(ForestModel { trees, feature_dim })
    }
}

fn decode_child(raw: f64, node_count: usize) -> Result<u32> {
    if raw == -1.0 {
        return Ok(NO_CHILD);
    }
    if raw.fract() != 0.0 || raw < 0.0 || raw >= node_count as f64 {
        return Err(Error::Parse(format!("invalid tree child index {raw}")));
    }
    Ok(raw as u32)
}

/// Trains a bagged forest. Each tree draws a bootstrap sample and grows until
/// its leaves are pure, choosing at every node the best of
/// `candidates_per_node` random (feature, threshold) pairs by Gini decrease.
/// Thresholds are feature values of node members, so any strictly increasing
/// per-feature transform of the data yields the identical forest structure.
pub fn fit_forest<T: Real>(
    features: &Tensor<T>,
    labels: &[bool],
    config: &ForestConfig,
    rng: &mut Rng,
) -> Result<ForestModel<T>> {
    let n = features.rows();
    let d = features.cols();
    if n == 0 || d == 0 {
        return Err(Error::DegenerateInput("forest training needs a non-empty feature matrix".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    if config.tree_count == 0 || config.candidates_per_node == 0 {
        return Err(Error::DegenerateInput("tree and candidate counts must be positive".into()));
    }

    // One parent draw keys the whole ensemble, then per-tree substreams make
    // tree growth order-independent so the trees can be built in parallel.
    let tree_base = Rng::new(rng.next_u64());
    let trees: Vec<Tree<T>> = (0..config.tree_count)
        .into_par_iter()
        .map(|tree_index| {
            let mut tree_rng = tree_base.substream(tree_index as u64);
            grow_tree(features, labels, config, &mut tree_rng)
        })
        .collect();

    Ok(ForestModel { trees, feature_dim: d })
}

fn grow_tree<T: Real>(
    features: &Tensor<T>,
    labels: &[bool],
    config: &ForestConfig,
    rng: &mut Rng,
) -> Tree<T> {
    let n = features.rows();
    let d = features.cols();
    let sample: Vec<usize> = (0..n).map(|_| rng.next_below(n)).collect();

    let mut nodes: Vec<Node<T>> = Vec::new();
    // Work items are (node index, member rows); children are appended and
    // patched into their parent once allocated.
    let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();
    nodes.push(leaf_node(labels, &sample));
    stack.push((0, sample));

    while let Some((node_index, members)) = stack.pop() {
        let positives = members.iter().filter(|&&i| labels[i]).count();
        if positives == 0 || positives == members.len() || members.len() < 2 {
            continue; // already a pure or unsplittable leaf
        }

        let mut best: Option<(T, usize, T)> = None; // (gini decrease, feature, threshold)
        for _ in 0..config.candidates_per_node {
            let feature = rng.next_below(d);
            let pivot = members[rng.next_below(members.len())];
            let threshold = features.at(pivot, feature);
            let (left_n, left_pos) = partition_counts(features, labels, &members, feature, threshold);
            let right_n = members.len() - left_n;
            if left_n == 0 || right_n == 0 {
                continue;
            }
            let decrease = gini_decrease(
                members.len(),
                positives,
                left_n,
                left_pos,
                right_n,
                positives - left_pos,
            );
            if best.map_or(true, |(b, _, _)| decrease > b) {
                best = Some((decrease, feature, threshold));
            }
        }

        let Some((_, feature, threshold)) = best else {
            continue; // no candidate split both sides; leaf keeps node frequency
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|&&i| features.at(i, feature) <= threshold);

        let left_index = nodes.len();
        nodes.push(leaf_node(labels, &left_rows));
        let right_index = nodes.len();
        nodes.push(leaf_node(labels, &right_rows));
        nodes[node_index].feature = feature as u32;
        nodes[node_index].threshold = threshold;
        nodes[node_index].left = left_index as u32;
        nodes[node_index].right = right_index as u32;
        stack.push((right_index, right_rows));
        stack.push((left_index, left_rows));
    }

    Tree { nodes }
}

fn leaf_node<T: Real>(labels: &[bool], members: &[usize]) -> Node<T> {
    let positives = members.iter().filter(|&&i| labels[i]).count();
    Node {
        feature: 0,
        threshold: T::zero(),
        left: NO_CHILD,
        right: NO_CHILD,
        positive_prob: T::of(positives as f64 / members.len() as f64),
    }
}

fn partition_counts<T: Real>(
    features: &Tensor<T>,
    labels: &[bool],
    members: &[usize],
    feature: usize,
    threshold: T,
) -> (usize, usize) {
    let mut left_n = 0;
    let mut left_pos = 0;
    for &i in members {
        if features.at(i, feature) <= threshold {
            left_n += 1;
            if labels[i] {
                left_pos += 1;
            }
        }
    }
    (left_n, left_pos)
}

/// Parent Gini impurity minus the size-weighted child impurities. Computed
/// from counts only, which is what makes tree structure invariant under
/// monotone feature transforms.
fn gini_decrease<T: Real>(
    n: usize,
    pos: usize,
    left_n: usize,
    left_pos: usize,
    right_n: usize,
    right_pos: usize,
) -> T {
    let gini = |count: usize, positives: usize| -> T {
        let p = T::of(positives as f64 / count as f64);
        let q = T::one() - p;
        T::one() - p * p - q * q
    };
    let parent = gini(n, pos);
    let wl = T::of(left_n as f64 / n as f64);
    let wr = T::of(right_n as f64 / n as f64);
    parent - wl * gini(left_n, left_pos) - wr * gini(right_n, right_pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Labels follow a noiseless rule on feature 1 of 4; the rest is noise.
    fn rule_data(n: usize, seed: u64) -> (Tensor<f64>, Vec<bool>) {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::with_capacity(n * 4);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..4).map(|_| rng.range_f64(-2.0, 2.0)).collect();
            labels.push(x[1] > 0.3);
            rows.extend_from_slice(&x);
        }
        (Tensor::new(vec![n, 4], rows).unwrap(), labels)
    }

    #[test]
    fn learns_a_noiseless_threshold_rule() {
        let (train_x, train_y) = rule_data(300, 10);
        let (test_x, test_y) = rule_data(200, 11);
        let mut rng = Rng::new(1);
        let model = fit_forest(&train_x, &train_y, &ForestConfig::default(), &mut rng).unwrap();
        let mut correct = 0;
        for i in 0..test_x.rows() {
            let p = model.predict(test_x.row(i)).unwrap();
            if (p > 0.5) == test_y[i] {
                correct += 1;
            }
        }
        assert!(correct >= 190, "only {correct}/200 correct");
    }

    #[test]
    fn leaves_are_pure_on_training_data() {
        let (x, y) = rule_data(150, 3);
        let mut rng = Rng::new(2);
        let model = fit_forest(&x, &y, &ForestConfig { tree_count: 5, ..Default::default() }, &mut rng)
            .unwrap();
        // Every training point was drawn without label noise, so each tree
        // routes its own bootstrap members to 0/1 leaves and the ensemble
        // average over in-bag points is sharp. Out-of-bag points can soften
        // it, so check the forest went deeper than a stump at least.
        assert!(model.max_depth() > 2);
        for i in 0..x.rows() {
            let p = model.predict(x.row(i)).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn constant_feature_predicts_the_class_prior() {
        // 60 positives of 200. No split is possible, so each tree reports its
        // bootstrap sample frequency; averaging 100 of them lands within a
        // couple of points of 0.3.
        let n = 200;
        let x = Tensor::new(vec![n, 1], vec![7.5; n]).unwrap();
        let y: Vec<bool> = (0..n).map(|i| i % 10 < 3).collect();
        let mut rng = Rng::new(5);
        let model = fit_forest(&x, &y, &ForestConfig::default(), &mut rng).unwrap();
        let p: f64 = model.predict(&[7.5]).unwrap();
        assert!((p - 0.3).abs() < 0.02, "prior estimate {p}");
        assert_eq!(model.max_depth(), 1);
    }

    #[test]
    fn invariant_under_strictly_increasing_feature_transforms() {
        // Grid-valued features so that cubing is exact in f64 and preserves
        // every comparison outcome bit for bit.
        let mut rng = Rng::new(9);
        let n = 120;
        let mut rows = Vec::with_capacity(n * 3);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..3).map(|_| (rng.next_below(17) as f64 - 8.0) / 4.0).collect();
            labels.push(x[0] + x[2] > 0.5);
            rows.extend_from_slice(&x);
        }
        let x_plain = Tensor::new(vec![n, 3], rows.clone()).unwrap();
        let cubed: Vec<f64> = rows.iter().map(|v| v * v * v).collect();
        let x_cubed = Tensor::new(vec![n, 3], cubed).unwrap();

        let config = ForestConfig { tree_count: 20, ..Default::default() };
        let mut rng_a = Rng::new(33);
        let mut rng_b = Rng::new(33);
        let model_plain = fit_forest(&x_plain, &labels, &config, &mut rng_a).unwrap();
        let model_cubed = fit_forest(&x_cubed, &labels, &config, &mut rng_b).unwrap();

        for i in 0..n {
            let a = model_plain.predict(x_plain.row(i)).unwrap();
            let b = model_cubed.predict(x_cubed.row(i)).unwrap();
            assert_eq!(a, b, "row {i}: {a} vs {b}");
        }
    }

    #[test]
    fn bootstrap_gives_diverse_trees() {
        let (x, y) = rule_data(100, 21);
        let mut rng = Rng::new(4);
        let model = fit_forest(&x, &y, &ForestConfig { tree_count: 10, ..Default::default() }, &mut rng)
            .unwrap();
        let distinct = model
            .trees
            .iter()
            .map(|t| t.nodes.len())
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        assert!(distinct > 1, "all {} trees have identical node counts", model.trees.len());
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = Tensor::<f64>::zeros(vec![0, 3]);
        let mut rng = Rng::new(1);
        assert!(matches!(
            fit_forest(&x, &[], &ForestConfig::default(), &mut rng),
            Err(Error::DegenerateInput(_))
        ));

        let x = Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            fit_forest(&x, &[true], &ForestConfig::default(), &mut rng),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));

        let model = fit_forest(&x, &[true, false], &ForestConfig::default(), &mut rng).unwrap();
        assert!(matches!(
            model.predict(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn same_seed_reproduces_the_forest() {
        let (x, y) = rule_data(80, 13);
        let config = ForestConfig { tree_count: 8, ..Default::default() };
        let mut rng_a = Rng::new(99);
        let mut rng_b = Rng::new(99);
        let a = fit_forest(&x, &y, &config, &mut rng_a).unwrap();
        let b = fit_forest(&x, &y, &config, &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn container_roundtrip_preserves_predictions() {
        let (x, y) = rule_data(60, 17);
        let mut rng = Rng::new(3);
        let model = fit_forest(&x, &y, &ForestConfig { tree_count: 6, ..Default::default() }, &mut rng)
            .unwrap();
        let restored = ForestModel::<f64>::from_container(&model.to_container()).unwrap();
        assert_eq!(model, restored);
    }
}
