//! Finite event-tree market: filtration, asset prices, terminal endowment payoffs,
//! reference probabilities and the node-atomic stochastic clock.
//!
//! Nodes are stored in topological order (every parent index is smaller than the
//! indices of its children); trees built from the scenario file use preorder.

pub mod format;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;
const MEASURE_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub parent: Option<usize>,
    pub time: usize,
    /// Conditional probability of reaching this node from its parent; 1 at the root.
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    nodes: Vec<Node>,
    children: Vec<Vec<usize>>,
}

impl EventTree {
    pub fn new(nodes: Vec<Node>) -> Self {
        let mut children = vec![Vec::new(); nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                if p < nodes.len() {
                    children[p].push(i);
                }
            }
        }
        Self { nodes, children }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Result<&Node> {
        self.nodes.get(i).ok_or(Error::UnknownNode(i))
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.children[i].is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Leaf node indices in increasing node order.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_leaf(i)).collect()
    }

    pub fn horizon(&self) -> usize {
        self.nodes.iter().map(|n| n.time).max().unwrap_or(0)
    }

    /// Reference probability of reaching node `i`: the product of branch
    /// probabilities along its path.
    pub fn path_probability(&self, i: usize) -> Result<f64> {
        let mut cur = i;
        let mut p = 1.0;
        loop {
            let n = self.node(cur)?;
            match n.parent {
                Some(parent) => {
                    p *= n.prob;
                    cur = parent;
                }
                None => return Ok(p),
            }
        }
    }

    pub fn node_probabilities(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for i in 0..self.len() {
            out[i] = match self.nodes[i].parent {
                Some(p) => out[p] * self.nodes[i].prob,
                None => 1.0,
            };
        }
        out
    }

    /// Marginal mass at every node of a measure given on the leaves
    /// (in the order of [`EventTree::leaves`]).
    pub fn node_marginals(&self, leaf_measure: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, &leaf) in self.leaves().iter().enumerate() {
            out[leaf] = leaf_measure[k];
        }
        for i in (0..self.len()).rev() {
            if let Some(p) = self.nodes[i].parent {
                out[p] += out[i];
            }
        }
        out
    }

    /// Node indices from the root down to `i`, inclusive.
    pub fn path_to(&self, i: usize) -> Vec<usize> {
        let mut path = vec![i];
        let mut cur = i;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

/// Node-atomic stochastic clock: `increments[n]` is the clock mass charged at node `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockSpec {
    pub increments: Vec<f64>,
    pub bound: f64,
}

/// Scalar process indexed by tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionalProcess(pub Vec<f64>);

impl OptionalProcess {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, v: f64) -> Self {
        Self(vec![v; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, node: usize) -> Option<f64> {
        self.0.get(node).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketScenario {
    tree: EventTree,
    n_assets: usize,
    n_claims: usize,
    prices: Vec<Vec<f64>>,
    payoffs: Vec<Vec<f64>>,
    clock: ClockSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    SingleRoot,
    ParentTime,
    TopologicalOrder,
    BranchProbabilities,
    PositiveProbabilities,
    ClockNonnegative,
    ClockPositiveMass,
    ClockBound,
    PriceDimension,
    FinitePrices,
    PayoffDimension,
    FinitePayoffs,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Invariant::SingleRoot => "single root",
            Invariant::ParentTime => "parent time",
            Invariant::TopologicalOrder => "topological order",
            Invariant::BranchProbabilities => "branch probabilities",
            Invariant::PositiveProbabilities => "positive probabilities",
            Invariant::ClockNonnegative => "clock increments nonnegative",
            Invariant::ClockPositiveMass => "ℙ[κ_T>0]>0 fails",
            Invariant::ClockBound => "clock bound",
            Invariant::PriceDimension => "price dimension",
            Invariant::FinitePrices => "finite prices",
            Invariant::PayoffDimension => "payoff dimension",
            Invariant::FinitePayoffs => "finite payoffs",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: Invariant,
    pub node: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(n) => write!(f, "{} at node {}: {}", self.invariant, n, self.detail),
            None => write!(f, "{}: {}", self.invariant, self.detail),
        }
    }
}

impl MarketScenario {
    /// Assembles a scenario without checking it; see [`validate_scenario`].
    ///
    /// `prices` is indexed `[node][asset]`, `payoffs` is indexed `[leaf][claim]` with
    /// leaves in the order of [`EventTree::leaves`].
    pub fn new(
        tree: EventTree,
        n_assets: usize,
        n_claims: usize,
        prices: Vec<Vec<f64>>,
        payoffs: Vec<Vec<f64>>,
        clock: ClockSpec,
    ) -> Self {
        Self { tree, n_assets, n_claims, prices, payoffs, clock }
    }

    pub fn tree(&self) -> &EventTree {
        &self.tree
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn n_claims(&self) -> usize {
        self.n_claims
    }

    pub fn n_nodes(&self) -> usize {
        self.tree.len()
    }

    pub fn price(&self, node: usize, asset: usize) -> f64 {
        self.prices[node][asset]
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    /// Terminal endowment payoffs, `[leaf][claim]`.
    pub fn payoffs(&self) -> &[Vec<f64>] {
        &self.payoffs
    }

    pub fn clock(&self) -> &ClockSpec {
        &self.clock
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_scenario(self)
    }

    /// ℙ(node)·Δκ(node).
    pub fn clock_weight(&self, node: usize) -> Result<f64> {
        if node >= self.n_nodes() {
            return Err(Error::UnknownNode(node));
        }
        Ok(self.tree.path_probability(node)? * self.clock.increments[node])
    }

    pub fn clock_weights(&self) -> Vec<f64> {
        self.tree
            .node_probabilities()
            .iter()
            .zip(&self.clock.increments)
            .map(|(p, k)| p * k)
            .collect()
    }

    /// Nodes carrying strictly positive clock mass.
    pub fn clock_support(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.clock.increments[i] > 0.0).collect()
    }

    /// E_Q[∫ c dκ] for a measure given by its leaf masses.
    pub fn expectation_under(&self, leaf_measure: &[f64], process: &OptionalProcess) -> Result<f64> {
        let leaves = self.tree.leaves();
        if leaf_measure.len() != leaves.len() {
            return Err(Error::InvalidInput(format!(
                "leaf measure has {} entries, tree has {} leaves",
                leaf_measure.len(),
                leaves.len()
            )));
        }
        if process.len() != self.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "process has {} entries, tree has {} nodes",
                process.len(),
                self.n_nodes()
            )));
        }
        if let Some(k) = leaf_measure.iter().position(|&q| !(q >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "negative measure entry {} at leaf {}",
                leaf_measure[k], leaves[k]
            )));
        }
        let total: f64 = leaf_measure.iter().sum();
        if (total - 1.0).abs() > MEASURE_SUM_TOL {
            return Err(Error::InvalidInput(format!("leaf measure sums to {total}, not 1")));
        }
        let marg = self.tree.node_marginals(leaf_measure);
        Ok(marg
            .iter()
            .zip(&self.clock.increments)
            .zip(process.values())
            .map(|((q, k), c)| if *k == 0.0 { 0.0 } else { q * k * c })
            .sum())
    }

    pub fn leaf_position(&self, node: usize) -> Option<usize> {
        self.tree.leaves().iter().position(|&l| l == node)
    }
}

/// Returns every violated invariant; an empty list means the scenario is well formed.
pub fn validate_scenario(s: &MarketScenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let tree = &s.tree;
    let n = tree.len();
    let mut push = |invariant, node, detail: String| out.push(Violation { invariant, node, detail });

    let roots: Vec<usize> = (0..n).filter(|&i| tree.nodes[i].parent.is_none()).collect();
    if roots != [0] {
        push(Invariant::SingleRoot, None, format!("roots at {roots:?}; expected exactly node 0"));
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        match node.parent {
            None => {
                if node.time != 0 {
                    push(Invariant::ParentTime, Some(i), format!("root at time {}", node.time));
                }
            }
            Some(p) if p >= n => {
                push(Invariant::SingleRoot, Some(i), format!("parent {p} does not exist"));
            }
            Some(p) => {
                if p >= i {
                    push(Invariant::TopologicalOrder, Some(i), format!("parent {p} is not before node {i}"));
                }
                if node.time != tree.nodes[p].time + 1 {
                    push(
                        Invariant::ParentTime,
                        Some(i),
                        format!("time {} but parent {p} at time {}", node.time, tree.nodes[p].time),
                    );
                }
                if !(node.prob > 0.0 && node.prob <= 1.0) {
                    push(
                        Invariant::PositiveProbabilities,
                        Some(i),
                        format!("branch probability {} outside (0,1]", node.prob),
                    );
                }
            }
        }
    }
    for i in 0..n {
        let ch = tree.children(i);
        if ch.is_empty() {
            continue;
        }
        let total: f64 = ch.iter().map(|&c| tree.nodes[c].prob).sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            push(Invariant::BranchProbabilities, Some(i), format!("children probabilities sum to {total}"));
        }
    }

    let clock = &s.clock;
    if clock.increments.len() != n {
        push(
            Invariant::ClockNonnegative,
            None,
            format!("{} clock increments for {n} nodes", clock.increments.len()),
        );
    } else {
        for (i, &k) in clock.increments.iter().enumerate() {
            if !(k >= 0.0 && k.is_finite()) {
                push(Invariant::ClockNonnegative, Some(i), format!("increment {k}"));
            }
        }
        let ordered = out.iter().all(|v| {
            !matches!(v.invariant, Invariant::SingleRoot | Invariant::TopologicalOrder | Invariant::ParentTime)
        });
        if ordered && n > 0 {
            let mut path_sum = vec![0.0; n];
            for i in 0..n {
                path_sum[i] = clock.increments[i] + tree.nodes[i].parent.map_or(0.0, |p| path_sum[p]);
            }
            let leaves = tree.leaves();
            if leaves.iter().all(|&l| !(path_sum[l] > 0.0)) {
                out.push(Violation {
                    invariant: Invariant::ClockPositiveMass,
                    node: None,
                    detail: "every root-to-leaf path has zero clock mass".into(),
                });
            }
            for &l in &leaves {
                if path_sum[l] > clock.bound * (1.0 + 1e-12) {
                    out.push(Violation {
                        invariant: Invariant::ClockBound,
                        node: Some(l),
                        detail: format!("path sum {} exceeds bound {}", path_sum[l], clock.bound),
                    });
                }
            }
        }
    }

    if s.prices.len() != n {
        out.push(Violation {
            invariant: Invariant::PriceDimension,
            node: None,
            detail: format!("{} price rows for {n} nodes", s.prices.len()),
        });
    } else {
        for (i, row) in s.prices.iter().enumerate() {
            if row.len() != s.n_assets {
                out.push(Violation {
                    invariant: Invariant::PriceDimension,
                    node: Some(i),
                    detail: format!("{} prices for {} assets", row.len(), s.n_assets),
                });
            } else if row.iter().any(|p| !p.is_finite()) {
                out.push(Violation { invariant: Invariant::FinitePrices, node: Some(i), detail: format!("{row:?}") });
            }
        }
    }

    let leaves = tree.leaves();
    if s.payoffs.len() != leaves.len() {
        out.push(Violation {
            invariant: Invariant::PayoffDimension,
            node: None,
            detail: format!("{} payoff rows for {} leaves", s.payoffs.len(), leaves.len()),
        });
    } else {
        for (k, row) in s.payoffs.iter().enumerate() {
            if row.len() != s.n_claims {
                out.push(Violation {
                    invariant: Invariant::PayoffDimension,
                    node: Some(leaves[k]),
                    detail: format!("{} payoffs for {} claims", row.len(), s.n_claims),
                });
            } else if row.iter().any(|p| !p.is_finite()) {
                out.push(Violation {
                    invariant: Invariant::FinitePayoffs,
                    node: Some(leaves[k]),
                    detail: format!("{row:?}"),
                });
            }
        }
    }
    out
}

pub fn validate_or_err(s: &MarketScenario) -> Result<()> {
    let v = validate_scenario(s);
    if v.is_empty() {
        Ok(())
    } else {
        let msgs: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        Err(Error::InvalidScenario(msgs.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_node(increment: f64) -> MarketScenario {
        let tree = EventTree::new(vec![Node { parent: None, time: 0, prob: 1.0 }]);
        MarketScenario::new(
            tree,
            1,
            0,
            vec![vec![1.0]],
            vec![vec![]],
            ClockSpec { increments: vec![increment], bound: 1.0 },
        )
    }

    fn three_leaf(probs: [f64; 3], clock: [f64; 4]) -> MarketScenario {
        let mut nodes = vec![Node { parent: None, time: 0, prob: 1.0 }];
        for p in probs {
            nodes.push(Node { parent: Some(0), time: 1, prob: p });
        }
        MarketScenario::new(
            EventTree::new(nodes),
            1,
            0,
            vec![vec![1.0], vec![2.0], vec![1.0], vec![0.5]],
            vec![vec![]; 3],
            ClockSpec { increments: clock.to_vec(), bound: 1.0 },
        )
    }

    #[test]
    fn degenerate_market_is_valid() {
        assert!(single_node(1.0).validate().is_empty());
    }

    #[test]
    fn bad_branch_probabilities_flagged_at_parent() {
        let s = three_leaf([0.3, 0.3, 0.3], [0.0, 1.0, 1.0, 1.0]);
        let v = s.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].invariant, Invariant::BranchProbabilities);
        assert_eq!(v[0].node, Some(0));
        assert_eq!(v[0].invariant.to_string(), "branch probabilities");
    }

    #[test]
    fn zero_clock_flagged() {
        let v = single_node(0.0).validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].invariant, Invariant::ClockPositiveMass);
        assert_eq!(v[0].invariant.to_string(), "ℙ[κ_T>0]>0 fails");
    }

    #[test]
    fn clock_bound_and_negative_increment() {
        let s = three_leaf([0.5, 0.25, 0.25], [0.5, 1.0, -0.1, 0.0]);
        let v = s.validate();
        assert!(v.iter().any(|v| v.invariant == Invariant::ClockNonnegative && v.node == Some(2)));
        assert!(v.iter().any(|v| v.invariant == Invariant::ClockBound && v.node == Some(1)));
    }

    #[test]
    fn validation_is_idempotent() {
        let s = three_leaf([0.3, 0.3, 0.3], [0.0, 2.0, 1.0, 1.0]);
        assert_eq!(s.validate(), s.validate());
    }

    #[test]
    fn clock_weights_follow_product_rule() {
        let third = 1.0 / 3.0;
        let s = three_leaf([third, third, third], [1.0, 0.5, 0.0, 0.0]);
        assert_eq!(s.clock_weight(0).unwrap(), 1.0);
        assert!((s.clock_weight(1).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.clock_weight(2).unwrap(), 0.0);
        assert_eq!(s.clock_weight(9), Err(Error::UnknownNode(9)));
    }

    #[test]
    fn expectation_under_marginalizes_leaf_measure() {
        let s = three_leaf([0.5, 0.25, 0.25], [0.0, 1.0, 1.0, 1.0]);
        let c = OptionalProcess(vec![7.0, 2.0, 1.0, 0.5]);
        let e = s.expectation_under(&[0.2, 0.3, 0.5], &c).unwrap();
        assert!((e - (0.4 + 0.3 + 0.25)).abs() < 1e-15);
        assert_eq!(s.expectation_under(&[0.2, 0.3, 0.5], &OptionalProcess::zeros(4)).unwrap(), 0.0);
        assert!(s.expectation_under(&[1.2, -0.2, 0.0], &c).is_err());
        assert!(s.expectation_under(&[0.5, 0.3, 0.1], &c).is_err());
    }

    #[test]
    fn physical_expectation_matches_clock_weighted_sum() {
        let s = three_leaf([0.5, 0.25, 0.25], [0.25, 0.5, 0.75, 0.25]);
        let c = OptionalProcess(vec![1.5, 2.0, 3.0, 0.5]);
        let e = s.expectation_under(&[0.5, 0.25, 0.25], &c).unwrap();
        let direct: f64 = s.clock_weights().iter().zip(c.values()).map(|(w, c)| w * c).sum();
        assert!((e - direct).abs() < 1e-14);
        let total: f64 = s.clock_weights().iter().sum();
        assert!(total <= s.clock().bound + 1e-15);
    }
}
