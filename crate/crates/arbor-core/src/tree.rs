//! Finite scenario trees: the market model.
//!
//! A [`ScenarioTree`] is a rooted tree of uniform depth `T`. Each node carries
//! a price vector for `d+1` assets; asset 0 is the numeraire. Edges carry
//! strictly positive one-step probabilities that sum to one over each node's
//! children. The filtration is the tree itself: an event observable at time
//! `t` is a union of depth-`t` subtrees, so measurability and predictability
//! are structural rather than checked.
//!
//! Discounted prices `S~ = S / S0` are computed on demand, never stored.

use crate::error::{ArborError, Result};

/// Probability sums must match 1 within this tolerance.
pub const PROB_TOL: f64 = 1e-12;
/// Nodewise value identities (self-financing, gains) use this tolerance,
/// assuming prices normalized so the root numeraire is O(1).
pub const VALUE_TOL: f64 = 1e-10;
/// Conditional-expectation residuals for martingale checks.
pub const MARTINGALE_TOL: f64 = 1e-9;
/// A claim replicates when the worst leaf mismatch is below this.
pub const REPLICATION_TOL: f64 = 1e-9;

/// Index of a node within its tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    /// Position of this node in the tree's node array.
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct NodeData {
    label: String,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    depth: usize,
    prices: Vec<f64>,
    /// Conditional probability of the edge from the parent; 1 at the root.
    edge_prob: f64,
    /// Leaves below this node occupy `leaf_range.0..leaf_range.1` in leaf order.
    leaf_range: (usize, usize),
}

/// A finite filtered market: node-indexed prices for `d+1` assets, physical
/// edge probabilities, horizon `T`.
#[derive(Debug, Clone)]
pub struct ScenarioTree {
    nodes: Vec<NodeData>,
    horizon: usize,
    num_risky: usize,
    asset_names: Vec<String>,
    /// Leaves in depth-first order; all leaf-indexed vectors follow this order.
    leaves: Vec<NodeId>,
    /// `leaf_pos[node] = Some(i)` iff the node is `leaves[i]`.
    leaf_pos: Vec<Option<usize>>,
}

/// A violated [`ScenarioTree`] invariant, as reported by [`ScenarioTree::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum TreeViolation {
    /// `T = 0`: no trading period exists.
    HorizonZero,
    /// A leaf sits at depth `< T`; the tree must have uniform depth.
    NonUniformDepth { leaf: NodeId, depth: usize },
    /// An edge probability is not strictly positive.
    EdgeProbNotPositive { node: NodeId, prob: f64 },
    /// Children probabilities of a node do not sum to 1.
    EdgeProbSum { node: NodeId, sum: f64 },
    /// The numeraire is not strictly positive at some node.
    NumeraireNotPositive { node: NodeId, value: f64 },
    /// Siblings disagree on the numeraire value: `S0` is not predictable.
    NumeraireNotPredictable { parent: NodeId },
    /// A price is negative.
    NegativePrice { node: NodeId, asset: usize },
}

impl std::fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TreeViolation::HorizonZero => write!(f, "horizon is 0: no trading period exists"),
            TreeViolation::NonUniformDepth { leaf, depth } => {
                write!(f, "leaf #{} at depth {} < horizon", leaf.0, depth)
            }
            TreeViolation::EdgeProbNotPositive { node, prob } => {
                write!(f, "edge probability {} into node #{} not strictly positive", prob, node.0)
            }
            TreeViolation::EdgeProbSum { node, sum } => {
                write!(f, "edge probabilities sum != 1 under node #{} (sum {})", node.0, sum)
            }
            TreeViolation::NumeraireNotPositive { node, value } => {
                write!(f, "numeraire {} at node #{} not strictly positive", value, node.0)
            }
            TreeViolation::NumeraireNotPredictable { parent } => {
                write!(f, "numeraire not predictable: children of node #{} disagree", parent.0)
            }
            TreeViolation::NegativePrice { node, asset } => {
                write!(f, "negative price for asset {} at node #{}", asset, node.0)
            }
        }
    }
}

/// Incremental construction of a [`ScenarioTree`].
pub struct TreeBuilder {
    nodes: Vec<NodeData>,
    num_assets: usize,
    asset_names: Option<Vec<String>>,
}

impl TreeBuilder {
    /// Starts a tree from the root price vector (`d+1` entries, numeraire first).
    pub fn new(root_prices: Vec<f64>) -> Self {
        let num_assets = root_prices.len();
        TreeBuilder {
            nodes: vec![NodeData {
                label: "n0".to_owned(),
                parent: None,
                children: Vec::new(),
                depth: 0,
                prices: root_prices,
                edge_prob: 1.0,
                leaf_range: (0, 0),
            }],
            num_assets,
            asset_names: None,
        }
    }

    /// Overrides the default asset names `a0..ad` (asset 0 is the numeraire).
    pub fn asset_names(mut self, names: Vec<String>) -> Self {
        self.asset_names = Some(names);
        self
    }

    /// Root node id.
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Adds a child under `parent` with the given edge probability and prices.
    pub fn child(&mut self, parent: NodeId, prob: f64, prices: Vec<f64>) -> Result<NodeId> {
        let label = format!("n{}", self.nodes.len());
        self.child_labeled(parent, prob, prices, label)
    }

    /// Adds a child with an explicit label (used by the file reader).
    pub fn child_labeled(
        &mut self,
        parent: NodeId,
        prob: f64,
        prices: Vec<f64>,
        label: String,
    ) -> Result<NodeId> {
        if parent.0 >= self.nodes.len() {
            return Err(ArborError::InvalidInput(format!("unknown parent node #{}", parent.0)));
        }
        if prices.len() != self.num_assets {
            return Err(ArborError::DimensionMismatch(format!(
                "node `{}` has {} prices, tree has {} assets",
                label,
                prices.len(),
                self.num_assets
            )));
        }
        let id = NodeId(self.nodes.len());
        let depth = self.nodes[parent.0].depth + 1;
        self.nodes.push(NodeData {
            label,
            parent: Some(parent),
            children: Vec::new(),
            depth,
            prices,
            edge_prob: prob,
            leaf_range: (0, 0),
        });
        self.nodes[parent.0].children.push(id);
        Ok(id)
    }

    /// Finalizes the tree. The horizon is the maximum node depth; numeric
    /// invariants are not enforced here — see [`ScenarioTree::validate`].
    pub fn build(self) -> Result<ScenarioTree> {
        let TreeBuilder { mut nodes, num_assets, asset_names } = self;
        if num_assets < 2 {
            return Err(ArborError::InvalidInput(
                "a market needs the numeraire plus at least one risky asset".to_owned(),
            ));
        }
        let asset_names = match asset_names {
            Some(names) => {
                if names.len() != num_assets {
                    return Err(ArborError::DimensionMismatch(format!(
                        "{} asset names for {} assets",
                        names.len(),
                        num_assets
                    )));
                }
                names
            }
            None => (0..num_assets).map(|i| format!("a{i}")).collect(),
        };
        let horizon = nodes.iter().map(|n| n.depth).max().unwrap_or(0);

        // Depth-first leaf ordering plus per-node contiguous leaf ranges.
        let mut leaves = Vec::new();
        let mut leaf_pos = vec![None; nodes.len()];
        let mut stack = vec![(NodeId(0), false)];
        let mut lo = vec![0usize; nodes.len()];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                let hi = leaves.len();
                nodes[id.0].leaf_range = (lo[id.0], hi);
                continue;
            }
            lo[id.0] = leaves.len();
            if nodes[id.0].children.is_empty() {
                leaf_pos[id.0] = Some(leaves.len());
                leaves.push(id);
                nodes[id.0].leaf_range = (lo[id.0], leaves.len());
                continue;
            }
            stack.push((id, true));
            for &c in nodes[id.0].children.iter().rev() {
                stack.push((c, false));
            }
        }

        Ok(ScenarioTree {
            nodes,
            horizon,
            num_risky: num_assets - 1,
            asset_names,
            leaves,
            leaf_pos,
        })
    }
}

impl ScenarioTree {
    /// Checks every invariant and returns the list of violations (empty = valid).
    pub fn validate(&self) -> Vec<TreeViolation> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push(TreeViolation::HorizonZero);
        }
        for id in self.node_ids() {
            let n = &self.nodes[id.0];
            if n.children.is_empty() && n.depth != self.horizon {
                out.push(TreeViolation::NonUniformDepth { leaf: id, depth: n.depth });
            }
            if n.parent.is_some() && n.edge_prob <= 0.0 {
                out.push(TreeViolation::EdgeProbNotPositive { node: id, prob: n.edge_prob });
            }
            if n.prices[0] <= 0.0 {
                out.push(TreeViolation::NumeraireNotPositive { node: id, value: n.prices[0] });
            }
            for (i, &p) in n.prices.iter().enumerate() {
                if p < 0.0 {
                    out.push(TreeViolation::NegativePrice { node: id, asset: i });
                }
            }
            if !n.children.is_empty() {
                let sum: f64 = n.children.iter().map(|c| self.nodes[c.0].edge_prob).sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    out.push(TreeViolation::EdgeProbSum { node: id, sum });
                }
                let s0 = self.nodes[n.children[0].0].prices[0];
                if n.children.iter().any(|c| (self.nodes[c.0].prices[0] - s0).abs() > PROB_TOL) {
                    out.push(TreeViolation::NumeraireNotPredictable { parent: id });
                }
            }
        }
        out
    }

    /// True when [`validate`](Self::validate) reports nothing.
    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Trading horizon `T`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of risky assets `d`.
    pub fn num_risky(&self) -> usize {
        self.num_risky
    }

    /// `d + 1`: risky assets plus the numeraire.
    pub fn num_assets(&self) -> usize {
        self.num_risky + 1
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Nodes with children, i.e. decision points.
    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|id| !self.nodes[id.0].children.is_empty())
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.0].children.is_empty()
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.nodes[id.0].depth
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id.0].label
    }

    /// Node id for an external label, if present.
    pub fn find_label(&self, label: &str) -> Option<NodeId> {
        self.node_ids().find(|&id| self.nodes[id.0].label == label)
    }

    /// Price vector `S(node)`, numeraire first.
    pub fn prices(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].prices
    }

    /// Numeraire value `S0(node)`.
    pub fn numeraire(&self, id: NodeId) -> f64 {
        self.nodes[id.0].prices[0]
    }

    /// Discounted price of one asset, `S^i(node) / S0(node)`.
    pub fn discounted_price(&self, id: NodeId, asset: usize) -> f64 {
        self.nodes[id.0].prices[asset] / self.nodes[id.0].prices[0]
    }

    /// Full discounted price vector; entry 0 is identically 1.
    pub fn discounted(&self, id: NodeId) -> Vec<f64> {
        let s0 = self.nodes[id.0].prices[0];
        self.nodes[id.0].prices.iter().map(|p| p / s0).collect()
    }

    /// Conditional probability of the edge into `id` from its parent.
    pub fn edge_prob(&self, id: NodeId) -> f64 {
        self.nodes[id.0].edge_prob
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Position of a leaf node in [`leaves`](Self::leaves) order.
    pub fn leaf_index(&self, id: NodeId) -> Option<usize> {
        self.leaf_pos[id.0]
    }

    /// Range of leaf positions below `id` (contiguous by construction).
    pub fn leaf_range(&self, id: NodeId) -> std::ops::Range<usize> {
        let (lo, hi) = self.nodes[id.0].leaf_range;
        lo..hi
    }

    /// Physical probability of reaching `id`: product of edge probabilities.
    pub fn phys_prob(&self, id: NodeId) -> f64 {
        let mut p = 1.0;
        let mut cur = id;
        while let Some(parent) = self.nodes[cur.0].parent {
            p *= self.nodes[cur.0].edge_prob;
            cur = parent;
        }
        p
    }

    /// Physical probabilities of all leaves, in leaf order.
    pub fn phys_leaf_probs(&self) -> Vec<f64> {
        self.leaves.iter().map(|&l| self.phys_prob(l)).collect()
    }

    /// Returns a copy with every price at each node scaled by `factor(node)`.
    ///
    /// With a strictly positive predictable factor this changes the quoted
    /// currency but not the discounted prices, hence no pricing verdict.
    pub fn rescaled(&self, factor: impl Fn(NodeId) -> f64) -> ScenarioTree {
        let mut out = self.clone();
        for id in 0..out.nodes.len() {
            let f = factor(NodeId(id));
            for p in out.nodes[id].prices.iter_mut() {
                *p *= f;
            }
        }
        out
    }
}

/// A nonnegative terminal payoff, one value per leaf (in leaf order).
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    payoffs: Vec<f64>,
}

impl Claim {
    pub fn new(tree: &ScenarioTree, payoffs: Vec<f64>) -> Result<Self> {
        if payoffs.len() != tree.num_leaves() {
            return Err(ArborError::DimensionMismatch(format!(
                "{} payoffs for {} leaves",
                payoffs.len(),
                tree.num_leaves()
            )));
        }
        if let Some(p) = payoffs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(ArborError::InvalidInput(format!("claim payoff {p} is not a nonnegative real")));
        }
        Ok(Claim { payoffs })
    }

    /// Builds a claim by evaluating `payoff` at every leaf.
    pub fn from_fn(tree: &ScenarioTree, payoff: impl Fn(NodeId) -> f64) -> Result<Self> {
        Claim::new(tree, tree.leaves().iter().map(|&l| payoff(l)).collect())
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn payoff(&self, leaf_index: usize) -> f64 {
        self.payoffs[leaf_index]
    }

    /// Discounted payoffs `X / S0_T`, in leaf order.
    pub fn discounted(&self, tree: &ScenarioTree) -> Vec<f64> {
        tree.leaves()
            .iter()
            .zip(&self.payoffs)
            .map(|(&l, &x)| x / tree.numeraire(l))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn one_period_binomial_is_valid() {
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        assert!(tree.validate().is_empty());
        assert_eq!(tree.horizon(), 1);
        assert_eq!(tree.num_leaves(), 2);
        assert_eq!(tree.num_risky(), 1);
    }

    #[test]
    fn bad_edge_probabilities_reported() {
        let mut b = TreeBuilder::new(vec![1.0, 4.0]);
        let root = b.root();
        b.child(root, 0.5, vec![1.0, 8.0]).unwrap();
        b.child(root, 0.6, vec![1.0, 2.0]).unwrap();
        let tree = b.build().unwrap();
        let violations = tree.validate();
        assert!(violations
            .iter()
            .any(|v| matches!(v, TreeViolation::EdgeProbSum { .. })));
        assert!(violations[0].to_string().contains("sum != 1"));
    }

    #[test]
    fn numeraire_must_be_predictable() {
        let mut b = TreeBuilder::new(vec![1.0, 4.0]);
        let root = b.root();
        b.child(root, 0.5, vec![1.0, 8.0]).unwrap();
        b.child(root, 0.5, vec![1.1, 2.0]).unwrap();
        let tree = b.build().unwrap();
        assert!(tree
            .validate()
            .iter()
            .any(|v| matches!(v, TreeViolation::NumeraireNotPredictable { .. })));
    }

    #[test]
    fn degenerate_horizon_rejected() {
        let tree = TreeBuilder::new(vec![1.0, 4.0]).build().unwrap();
        assert!(tree.validate().contains(&TreeViolation::HorizonZero));
    }

    #[test]
    fn leaf_ranges_partition_leaves() {
        let tree = fixtures::two_period_with_dip();
        for id in tree.internal_nodes() {
            let r = tree.leaf_range(id);
            let direct: usize = tree.children(id).iter().map(|&c| tree.leaf_range(c).len()).sum();
            assert_eq!(r.len(), direct);
        }
        assert_eq!(tree.leaf_range(tree.root()), 0..tree.num_leaves());
    }

    #[test]
    fn phys_probs_sum_to_one() {
        let tree = fixtures::two_period_with_dip();
        let total: f64 = tree.phys_leaf_probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn claims_must_be_nonnegative() {
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        assert!(Claim::new(&tree, vec![4.0, -0.5]).is_err());
        assert!(Claim::new(&tree, vec![4.0]).is_err());
        let c = Claim::from_fn(&tree, |l| (tree.prices(l)[1] - 4.0).max(0.0)).unwrap();
        assert_eq!(c.payoffs(), &[4.0, 0.0]);
    }
}
