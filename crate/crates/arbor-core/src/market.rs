//! Trading strategies, value processes, and the arbitrage surgery.
//!
//! A strategy stores one allocation vector per internal node: the portfolio
//! decided there and held over the following period. Predictability is
//! structural — siblings share their parent's decision, so there is nothing
//! to check. The value at a node of depth `t >= 1` is the incoming allocation
//! applied to that node's prices; the time-0 value is the root allocation
//! applied to root prices.

use crate::error::{ArborError, Result};
use crate::tree::{NodeId, ScenarioTree, VALUE_TOL};

/// Predictable portfolio allocation: a `d+1`-vector per decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    /// Indexed by node id; meaningful only at internal nodes. Entry `[0]`
    /// is the numeraire position.
    alloc: Vec<Vec<f64>>,
    num_assets: usize,
}

impl Strategy {
    /// The zero strategy on `tree`.
    pub fn zero(tree: &ScenarioTree) -> Self {
        Strategy {
            alloc: vec![vec![0.0; tree.num_assets()]; tree.num_nodes()],
            num_assets: tree.num_assets(),
        }
    }

    /// Builds a strategy by evaluating `f` at every internal node.
    pub fn from_fn(tree: &ScenarioTree, f: impl Fn(NodeId) -> Vec<f64>) -> Result<Self> {
        let mut s = Strategy::zero(tree);
        for id in tree.internal_nodes() {
            let a = f(id);
            if a.len() != tree.num_assets() {
                return Err(ArborError::DimensionMismatch(format!(
                    "allocation at node `{}` has {} entries, tree has {} assets",
                    tree.label(id),
                    a.len(),
                    tree.num_assets()
                )));
            }
            s.alloc[id.0] = a;
        }
        Ok(s)
    }

    /// Same allocation at every decision point (no rebalancing).
    pub fn buy_and_hold(tree: &ScenarioTree, alloc: Vec<f64>) -> Result<Self> {
        Strategy::from_fn(tree, |_| alloc.clone())
    }

    /// Allocation decided at `node`, held over the next period.
    pub fn alloc(&self, node: NodeId) -> &[f64] {
        &self.alloc[node.0]
    }

    pub fn set_alloc(&mut self, node: NodeId, alloc: Vec<f64>) {
        self.alloc[node.0] = alloc;
    }

    /// Allocation held while arriving at `node` (the parent's decision; at
    /// the root this is the root's own decision, which defines `V_0`).
    pub fn incoming<'a>(&'a self, tree: &ScenarioTree, node: NodeId) -> &'a [f64] {
        match tree.parent(node) {
            Some(p) => &self.alloc[p.0],
            None => &self.alloc[node.0],
        }
    }

    pub fn num_assets(&self) -> usize {
        self.num_assets
    }

    fn matches(&self, tree: &ScenarioTree) -> Result<()> {
        if self.alloc.len() != tree.num_nodes() || self.num_assets != tree.num_assets() {
            return Err(ArborError::DimensionMismatch(format!(
                "strategy built for {} nodes x {} assets, tree has {} x {}",
                self.alloc.len(),
                self.num_assets,
                tree.num_nodes(),
                tree.num_assets()
            )));
        }
        Ok(())
    }

    /// Pointwise `a * self + b * other`.
    pub fn linear_comb(a: f64, lhs: &Strategy, b: f64, rhs: &Strategy) -> Result<Strategy> {
        if lhs.alloc.len() != rhs.alloc.len() || lhs.num_assets != rhs.num_assets {
            return Err(ArborError::DimensionMismatch("strategies of different shapes".into()));
        }
        let alloc = lhs
            .alloc
            .iter()
            .zip(&rhs.alloc)
            .map(|(x, y)| x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect())
            .collect();
        Ok(Strategy { alloc, num_assets: lhs.num_assets })
    }
}

/// Portfolio value at every node, raw and discounted.
#[derive(Debug, Clone)]
pub struct ValueProcess {
    value: Vec<f64>,
    discounted: Vec<f64>,
}

impl ValueProcess {
    pub fn value(&self, node: NodeId) -> f64 {
        self.value[node.0]
    }

    pub fn discounted(&self, node: NodeId) -> f64 {
        self.discounted[node.0]
    }

    /// `V_0`.
    pub fn initial(&self) -> f64 {
        self.value[0]
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn discounted_values(&self) -> &[f64] {
        &self.discounted
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `V_t = phi_t . S_t` at every node (root: `V_0 = phi_1 . S_0`).
pub fn value_process(tree: &ScenarioTree, strategy: &Strategy) -> Result<ValueProcess> {
    strategy.matches(tree)?;
    let mut value = vec![0.0; tree.num_nodes()];
    let mut discounted = vec![0.0; tree.num_nodes()];
    for id in tree.node_ids() {
        let v = dot(strategy.incoming(tree, id), tree.prices(id));
        value[id.0] = v;
        discounted[id.0] = v / tree.numeraire(id);
    }
    Ok(ValueProcess { value, discounted })
}

/// Cumulative discounted gains `sum phi_u . dS~_u` along the path to each node.
///
/// For a self-financing strategy this equals `V~ - V~_0` nodewise; the
/// difference is the standard witness that money was injected or withdrawn.
pub fn discounted_gains(tree: &ScenarioTree, strategy: &Strategy) -> Result<Vec<f64>> {
    strategy.matches(tree)?;
    let mut gains = vec![0.0; tree.num_nodes()];
    for id in tree.node_ids() {
        if let Some(parent) = tree.parent(id) {
            let alloc = strategy.alloc(parent);
            let step: f64 = (0..tree.num_assets())
                .map(|i| alloc[i] * (tree.discounted_price(id, i) - tree.discounted_price(parent, i)))
                .sum();
            gains[id.0] = gains[parent.0] + step;
        }
    }
    Ok(gains)
}

/// Outcome of the nodewise self-financing check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfFinancingCheck {
    pub is_self_financing: bool,
    /// First internal node (in id order) where rebalancing moves money.
    pub first_violation: Option<NodeId>,
}

/// Checks `V_t(phi) = phi_{t+1} . S_t` at every internal node of depth >= 1.
pub fn is_self_financing(tree: &ScenarioTree, strategy: &Strategy) -> Result<SelfFinancingCheck> {
    strategy.matches(tree)?;
    for id in tree.internal_nodes() {
        if tree.depth(id) == 0 {
            continue;
        }
        let incoming = dot(strategy.incoming(tree, id), tree.prices(id));
        let outgoing = dot(strategy.alloc(id), tree.prices(id));
        if ((incoming - outgoing) / tree.numeraire(id)).abs() > VALUE_TOL {
            return Ok(SelfFinancingCheck { is_self_financing: false, first_violation: Some(id) });
        }
    }
    Ok(SelfFinancingCheck { is_self_financing: true, first_violation: None })
}

fn require_self_financing(tree: &ScenarioTree, strategy: &Strategy) -> Result<()> {
    let check = is_self_financing(tree, strategy)?;
    if !check.is_self_financing {
        let node = check.first_violation.expect("violation node accompanies failure");
        return Err(ArborError::NotSelfFinancing(tree.label(node).to_owned()));
    }
    Ok(())
}

/// True iff the (self-financing) strategy keeps `V >= 0` at every node.
pub fn is_admissible(tree: &ScenarioTree, strategy: &Strategy) -> Result<bool> {
    require_self_financing(tree, strategy)?;
    let vp = value_process(tree, strategy)?;
    Ok(vp.discounted_values().iter().all(|&v| v >= -VALUE_TOL))
}

/// True iff `V_0 = 0`, `V_T >= 0` on every leaf, and `V_T > 0` on at least
/// one leaf. Edge probabilities are strictly positive, so one leaf suffices
/// for "positive with positive probability".
pub fn is_arbitrage(tree: &ScenarioTree, strategy: &Strategy) -> Result<bool> {
    require_self_financing(tree, strategy)?;
    let vp = value_process(tree, strategy)?;
    let zero_start = vp.discounted(tree.root()).abs() <= VALUE_TOL;
    let nonneg_end = tree.leaves().iter().all(|&l| vp.discounted(l) >= -VALUE_TOL);
    let somewhere_positive = tree.leaves().iter().any(|&l| vp.discounted(l) > VALUE_TOL);
    Ok(zero_start && nonneg_end && somewhere_positive)
}

/// Rewrites a self-financing arbitrage into an admissible one.
///
/// Let `t` be the last time the discounted value dips negative and `A` the
/// depth-`t` event where it does. The output holds nothing until `t`, then on
/// `A` copies the input's risky positions with the numeraire leg rebuilt so
/// the position starts from zero value. Its discounted value is
/// `1_A (V~_u - V~_t)`, which is nonnegative everywhere and strictly positive
/// on `A` at the horizon.
///
/// An input that never dips negative is returned unchanged.
pub fn promote_to_admissible(tree: &ScenarioTree, strategy: &Strategy) -> Result<Strategy> {
    if !is_arbitrage(tree, strategy)? {
        return Err(ArborError::NotAnArbitrage(
            "needs V_0 = 0, V_T >= 0, and V_T > 0 somewhere".to_owned(),
        ));
    }
    let vp = value_process(tree, strategy)?;
    let dip_time = tree
        .node_ids()
        .filter(|&id| vp.discounted(id) < -VALUE_TOL)
        .map(|id| tree.depth(id))
        .max();
    let Some(t) = dip_time else {
        return Ok(strategy.clone());
    };

    let mut theta = Strategy::zero(tree);
    // Entry nodes of A: depth-t nodes with negative discounted value.
    let entries: Vec<NodeId> = tree
        .node_ids()
        .filter(|&id| tree.depth(id) == t && vp.discounted(id) < -VALUE_TOL)
        .collect();
    for &entry in &entries {
        // Walk the subtree; target discounted value is V~(phi) - V~_t(phi),
        // zero at the entry itself.
        let mut stack = vec![entry];
        while let Some(node) = stack.pop() {
            if tree.is_leaf(node) {
                continue;
            }
            let target = if node == entry {
                0.0
            } else {
                vp.discounted(node) - vp.discounted(entry)
            };
            let mut alloc = strategy.alloc(node).to_vec();
            let risky_value: f64 =
                (1..tree.num_assets()).map(|i| alloc[i] * tree.discounted_price(node, i)).sum();
            alloc[0] = target - risky_value;
            theta.set_alloc(node, alloc);
            stack.extend_from_slice(tree.children(node));
        }
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pure_stock_value_process() {
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        let s = Strategy::buy_and_hold(&tree, vec![0.0, 1.0]).unwrap();
        let vp = value_process(&tree, &s).unwrap();
        assert_abs_diff_eq!(vp.initial(), 4.0);
        let leaves = tree.leaves();
        assert_abs_diff_eq!(vp.value(leaves[0]), 8.0);
        assert_abs_diff_eq!(vp.value(leaves[1]), 2.0);
    }

    #[test]
    fn pure_numeraire_value_is_constant() {
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        let s = Strategy::buy_and_hold(&tree, vec![1.0, 0.0]).unwrap();
        let vp = value_process(&tree, &s).unwrap();
        assert!(vp.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn hand_solved_mixed_allocation() {
        // Hand linear solve: phi = (-8/3, 2/3) on the 4 -> {8, 2} binomial.
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        let s = Strategy::buy_and_hold(&tree, vec![-8.0 / 3.0, 2.0 / 3.0]).unwrap();
        let vp = value_process(&tree, &s).unwrap();
        assert_abs_diff_eq!(vp.initial(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vp.value(tree.leaves()[0]), 8.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vp.value(tree.leaves()[1]), -4.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn buy_and_hold_is_self_financing() {
        let tree = fixtures::two_period_binomial();
        let s = Strategy::buy_and_hold(&tree, vec![1.5, -0.25]).unwrap();
        let check = is_self_financing(&tree, &s).unwrap();
        assert!(check.is_self_financing);
        assert_eq!(check.first_violation, None);
    }

    #[test]
    fn doubling_position_injects_money() {
        let tree = fixtures::two_period_binomial();
        let mut s = Strategy::buy_and_hold(&tree, vec![0.0, 1.0]).unwrap();
        for id in tree.internal_nodes() {
            if tree.depth(id) == 1 {
                s.set_alloc(id, vec![0.0, 2.0]);
            }
        }
        let check = is_self_financing(&tree, &s).unwrap();
        assert!(!check.is_self_financing);
        assert_eq!(tree.depth(check.first_violation.unwrap()), 1);
    }

    #[test]
    fn gains_identity_for_self_financing() {
        let tree = fixtures::two_period_binomial();
        let s = Strategy::buy_and_hold(&tree, vec![2.0, 0.75]).unwrap();
        let vp = value_process(&tree, &s).unwrap();
        let gains = discounted_gains(&tree, &s).unwrap();
        for id in tree.node_ids() {
            assert_abs_diff_eq!(
                vp.discounted(id) - vp.initial(),
                gains[id.0],
                epsilon = VALUE_TOL
            );
        }
    }

    #[test]
    fn admissibility_checks() {
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        let long = Strategy::buy_and_hold(&tree, vec![0.0, 1.0]).unwrap();
        assert!(is_admissible(&tree, &long).unwrap());
        let short = Strategy::buy_and_hold(&tree, vec![4.0, -1.0]).unwrap();
        // Worth 0 today, -4 in the up state.
        assert!(!is_admissible(&tree, &short).unwrap());
    }

    #[test]
    fn admissible_rejects_non_self_financing() {
        let tree = fixtures::two_period_binomial();
        let mut s = Strategy::buy_and_hold(&tree, vec![0.0, 1.0]).unwrap();
        s.set_alloc(tree.children(tree.root())[0], vec![100.0, 1.0]);
        assert!(matches!(
            is_admissible(&tree, &s),
            Err(ArborError::NotSelfFinancing(_))
        ));
    }

    #[test]
    fn long_stock_is_arbitrage_when_both_branches_beat_cash() {
        // u = 2, d = 1.1, r = 0: V_T = (8-4, 4.4-4) after shorting the numeraire.
        let tree = fixtures::binomial(4.0, 8.0, 4.4);
        let s = Strategy::buy_and_hold(&tree, vec![-4.0, 1.0]).unwrap();
        assert!(is_arbitrage(&tree, &s).unwrap());
        assert!(is_admissible(&tree, &s).unwrap());
    }

    #[test]
    fn zero_strategy_is_not_an_arbitrage() {
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        let s = Strategy::zero(&tree);
        assert!(!is_arbitrage(&tree, &s).unwrap());
    }

    #[test]
    fn no_arbitrage_binomial_examples() {
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        for alloc in [vec![-4.0, 1.0], vec![4.0, -1.0], vec![0.0, 0.0]] {
            let s = Strategy::buy_and_hold(&tree, alloc).unwrap();
            assert!(!is_arbitrage(&tree, &s).unwrap());
        }
    }

    /// The input dips to -2 at the down node, recovers on that node's
    /// one-period arbitrage, and banks the gain on the up branch.
    fn dipping_arbitrage(tree: &ScenarioTree) -> Strategy {
        let root = tree.root();
        let a = tree.children(root)[0]; // stock 2, children 3 and 4
        let b = tree.children(root)[1]; // stock 6, children 5 and 7
        let mut s = Strategy::zero(tree);
        s.set_alloc(root, vec![-4.0, 1.0]);
        s.set_alloc(a, vec![-6.0, 2.0]);
        s.set_alloc(b, vec![2.0, 0.0]);
        s
    }

    #[test]
    fn dipping_strategy_is_a_self_financing_arbitrage() {
        let tree = fixtures::two_period_with_dip();
        let s = dipping_arbitrage(&tree);
        assert!(is_self_financing(&tree, &s).unwrap().is_self_financing);
        assert!(is_arbitrage(&tree, &s).unwrap());
        assert!(!is_admissible(&tree, &s).unwrap());
    }

    #[test]
    fn promote_yields_admissible_arbitrage() {
        let tree = fixtures::two_period_with_dip();
        let s = dipping_arbitrage(&tree);
        let theta = promote_to_admissible(&tree, &s).unwrap();
        assert!(is_admissible(&tree, &theta).unwrap());
        assert!(is_arbitrage(&tree, &theta).unwrap());

        // Zero before the dip time, active only on the dip branch.
        let root = tree.root();
        assert_eq!(theta.alloc(root), &[0.0, 0.0]);
        let b = tree.children(root)[1];
        assert_eq!(theta.alloc(b), &[0.0, 0.0]);
    }

    #[test]
    fn promote_satisfies_proof_identity() {
        // V~_u(theta) = 1_A (V~_u(phi) - V~_t(phi)) nodewise.
        let tree = fixtures::two_period_with_dip();
        let s = dipping_arbitrage(&tree);
        let theta = promote_to_admissible(&tree, &s).unwrap();
        let vp_phi = value_process(&tree, &s).unwrap();
        let vp_theta = value_process(&tree, &theta).unwrap();
        let a = tree.children(tree.root())[0];
        let dip_value = vp_phi.discounted(a);
        for id in tree.node_ids() {
            let in_a = id == a || tree.parent(id) == Some(a);
            let expected = if in_a { vp_phi.discounted(id) - dip_value } else { 0.0 };
            assert_abs_diff_eq!(vp_theta.discounted(id), expected, epsilon = VALUE_TOL);
        }
    }

    #[test]
    fn promote_is_identity_on_admissible_input() {
        let tree = fixtures::two_period_with_dip();
        // Long the down-branch arbitrage from scratch: admissible already.
        let a = tree.children(tree.root())[0];
        let mut s = Strategy::zero(&tree);
        s.set_alloc(a, vec![-4.0, 2.0]);
        assert!(is_arbitrage(&tree, &s).unwrap());
        assert!(is_admissible(&tree, &s).unwrap());
        let theta = promote_to_admissible(&tree, &s).unwrap();
        assert_eq!(theta, s);
    }

    #[test]
    fn promote_rejects_non_arbitrage() {
        let tree = fixtures::binomial(4.0, 8.0, 2.0);
        let s = Strategy::buy_and_hold(&tree, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            promote_to_admissible(&tree, &s),
            Err(ArborError::NotAnArbitrage(_))
        ));
    }
}
