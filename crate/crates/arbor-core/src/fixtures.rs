//! Hand-built trees shared across unit tests.

use crate::tree::{ScenarioTree, TreeBuilder};

/// One-period binomial, numeraire constant at 1, physical probs 1/2.
pub fn binomial(s0: f64, up: f64, down: f64) -> ScenarioTree {
    let mut b = TreeBuilder::new(vec![1.0, s0]);
    let root = b.root();
    b.child(root, 0.5, vec![1.0, up]).unwrap();
    b.child(root, 0.5, vec![1.0, down]).unwrap();
    b.build().unwrap()
}

/// One-period trinomial, numeraire constant at 1, physical probs 1/3.
pub fn trinomial(s0: f64, children: [f64; 3]) -> ScenarioTree {
    let mut b = TreeBuilder::new(vec![1.0, s0]);
    let root = b.root();
    for c in children {
        b.child(root, 1.0 / 3.0, vec![1.0, c]).unwrap();
    }
    b.build().unwrap()
}

/// Two-period tree whose down branch contains a one-period arbitrage:
///
/// ```text
///            4
///      .------------.
///      2 (A)        6 (B)
///    .---.        .---.
///    3   4        5   7
/// ```
///
/// Holding the stock from node A gains on both children, so a self-financing
/// strategy can dip negative at A and still finish nonnegative everywhere.
pub fn two_period_with_dip() -> ScenarioTree {
    let mut b = TreeBuilder::new(vec![1.0, 4.0]);
    let root = b.root();
    let a = b.child(root, 0.5, vec![1.0, 2.0]).unwrap();
    let bb = b.child(root, 0.5, vec![1.0, 6.0]).unwrap();
    b.child(a, 0.5, vec![1.0, 3.0]).unwrap();
    b.child(a, 0.5, vec![1.0, 4.0]).unwrap();
    b.child(bb, 0.5, vec![1.0, 5.0]).unwrap();
    b.child(bb, 0.5, vec![1.0, 7.0]).unwrap();
    b.build().unwrap()
}

/// Two-period no-arbitrage binomial (u = 2, d = 1/2 at every step), S0 = 4.
pub fn two_period_binomial() -> ScenarioTree {
    let mut b = TreeBuilder::new(vec![1.0, 4.0]);
    let root = b.root();
    let u = b.child(root, 0.5, vec![1.0, 8.0]).unwrap();
    let d = b.child(root, 0.5, vec![1.0, 2.0]).unwrap();
    b.child(u, 0.5, vec![1.0, 16.0]).unwrap();
    b.child(u, 0.5, vec![1.0, 4.0]).unwrap();
    b.child(d, 0.5, vec![1.0, 4.0]).unwrap();
    b.child(d, 0.5, vec![1.0, 1.0]).unwrap();
    b.build().unwrap()
}
