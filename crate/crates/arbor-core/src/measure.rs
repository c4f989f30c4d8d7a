//! Probability measures on the leaves of a scenario tree.

use crate::error::{ArborError, Result};
use crate::tree::{NodeId, ScenarioTree, MARTINGALE_TOL, PROB_TOL};

/// A strictly positive probability over leaves (equivalently, over paths).
///
/// Strict positivity is what makes the measure *equivalent* to the physical
/// one: on a finite space two measures are equivalent iff they share null
/// sets, and the physical edge probabilities are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    leaf_prob: Vec<f64>,
}

impl Measure {
    pub fn new(tree: &ScenarioTree, leaf_prob: Vec<f64>) -> Result<Self> {
        if leaf_prob.len() != tree.num_leaves() {
            return Err(ArborError::DimensionMismatch(format!(
                "{} probabilities for {} leaves",
                leaf_prob.len(),
                tree.num_leaves()
            )));
        }
        if let Some(p) = leaf_prob.iter().find(|p| !(**p > 0.0)) {
            return Err(ArborError::InvalidInput(format!(
                "leaf probability {p} is not strictly positive"
            )));
        }
        let sum: f64 = leaf_prob.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(ArborError::InvalidInput(format!(
                "leaf probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Measure { leaf_prob })
    }

    /// The physical measure induced by the tree's edge probabilities.
    pub fn physical(tree: &ScenarioTree) -> Self {
        Measure { leaf_prob: tree.phys_leaf_probs() }
    }

    pub fn leaf_probs(&self) -> &[f64] {
        &self.leaf_prob
    }

    pub fn leaf_prob(&self, leaf_index: usize) -> f64 {
        self.leaf_prob[leaf_index]
    }

    /// Probability of reaching each node, indexed by node id.
    pub fn node_probs(&self, tree: &ScenarioTree) -> Vec<f64> {
        let mut out = vec![0.0; tree.num_nodes()];
        for id in tree.node_ids() {
            out[id.0] = tree.leaf_range(id).map(|i| self.leaf_prob[i]).sum();
        }
        out
    }

    /// Radon-Nikodym density against the physical measure, per leaf.
    pub fn density_vs_physical(&self, tree: &ScenarioTree) -> Vec<f64> {
        tree.phys_leaf_probs()
            .iter()
            .zip(&self.leaf_prob)
            .map(|(p, q)| q / p)
            .collect()
    }

    /// Expectation of a leaf-indexed random variable.
    pub fn expectation(&self, leaf_values: &[f64]) -> f64 {
        self.leaf_prob.iter().zip(leaf_values).map(|(q, x)| q * x).sum()
    }

    /// Conditional expectations `E(X | node)` for every node, by backward
    /// induction. Node ids are topological (parents precede children).
    pub fn conditional_expectations(&self, tree: &ScenarioTree, leaf_values: &[f64]) -> Vec<f64> {
        let node_probs = self.node_probs(tree);
        let mut out = vec![0.0; tree.num_nodes()];
        for id in (0..tree.num_nodes()).rev().map(NodeId) {
            if tree.is_leaf(id) {
                out[id.0] = leaf_values[tree.leaf_index(id).expect("leaf")];
            } else {
                out[id.0] = tree
                    .children(id)
                    .iter()
                    .map(|&c| node_probs[c.0] / node_probs[id.0] * out[c.0])
                    .sum();
            }
        }
        out
    }
}

/// Result of the nodewise martingale test.
#[derive(Debug, Clone, Copy)]
pub struct MartingaleCheck {
    pub is_martingale: bool,
    /// Largest `|E(S~_i(child) | node) - S~_i(node)|` over nodes and assets.
    pub worst_residual: f64,
    /// Where the worst residual occurs, as (node, asset).
    pub worst_at: Option<(NodeId, usize)>,
}

/// Checks that discounted prices are one-step conditional-mean consistent
/// under `measure` at every internal node and asset.
pub fn is_martingale_measure(tree: &ScenarioTree, measure: &Measure) -> MartingaleCheck {
    let node_probs = measure.node_probs(tree);
    let mut worst = 0.0_f64;
    let mut worst_at = None;
    for id in tree.internal_nodes() {
        for asset in 1..tree.num_assets() {
            let mut expected = 0.0;
            for &c in tree.children(id) {
                expected += node_probs[c.0] / node_probs[id.0] * tree.discounted_price(c, asset);
            }
            let residual = (expected - tree.discounted_price(id, asset)).abs();
            if residual > worst {
                worst = residual;
                worst_at = Some((id, asset));
            }
        }
    }
    MartingaleCheck { is_martingale: worst <= MARTINGALE_TOL, worst_residual: worst, worst_at }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn binomial_third_is_martingale() {
        // Hand solve (8q + 2(1-q)) = 4 => q = 1/3.
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        let q = Measure::new(&tree, vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let check = is_martingale_measure(&tree, &q);
        assert!(check.is_martingale);
        assert!(check.worst_residual < 1e-14);
    }

    #[test]
    fn physical_half_half_is_not() {
        // 8/2 + 2/2 = 5 != 4: residual exactly 1.
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        let p = Measure::physical(&tree);
        let check = is_martingale_measure(&tree, &p);
        assert!(!check.is_martingale);
        assert!((check.worst_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_prices_accept_any_measure() {
        let tree = fixtures::binomial(4.0, 4.0, 4.0);
        let q = Measure::new(&tree, vec![0.9, 0.1]).unwrap();
        assert!(is_martingale_measure(&tree, &q).is_martingale);
    }

    #[test]
    fn measure_validation() {
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        assert!(Measure::new(&tree, vec![0.5, 0.4]).is_err());
        assert!(Measure::new(&tree, vec![1.0, 0.0]).is_err());
        assert!(Measure::new(&tree, vec![0.5]).is_err());
    }

    #[test]
    fn node_probs_and_conditional_expectations() {
        let tree = fixtures::two_period_binomial();
        let q = Measure::physical(&tree);
        let node_probs = q.node_probs(&tree);
        assert!((node_probs[tree.root().0] - 1.0).abs() < 1e-15);
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let cond = q.conditional_expectations(&tree, &x);
        assert!((cond[tree.root().0] - 2.5).abs() < 1e-14);
    }
}
