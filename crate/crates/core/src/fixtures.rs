//! Reference markets and a seeded generator of random arbitrage-free trees.
//!
//! * DET1: a single node carrying unit clock mass, one asset, no claims.
//! * BIN1: one-period binomial, S: 1 → {2, ½}, ℙ = (½, ½), clock mass 1 at maturity.
//! * TRI1: one-period trinomial, S: 1 → {2, 1, ½}, uniform ℙ, a digital claim paying
//!   1 in the up state, clock mass 1 at maturity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::format::{FamilyTag, NodeSpec, ScenarioFile, UtilitySpec};
use crate::scenario::MarketScenario;
use crate::utility::Weight;

fn leaf(prob: f64, prices: Vec<f64>, clock: f64, payoffs: Vec<f64>) -> NodeSpec {
    NodeSpec { prob: Some(prob), prices, clock, payoffs: Some(payoffs), children: Vec::new() }
}

fn log_utility() -> Option<UtilitySpec> {
    Some(UtilitySpec { family: FamilyTag::Log, gamma: None, beta: Weight::Constant(1.0) })
}

pub fn det1_file() -> ScenarioFile {
    ScenarioFile {
        name: Some("DET1".into()),
        assets: vec!["S".into()],
        claims: Vec::new(),
        clock_bound: 1.0,
        tree: NodeSpec { prob: None, prices: vec![1.0], clock: 1.0, payoffs: Some(Vec::new()), children: Vec::new() },
        utility: log_utility(),
        queries: Default::default(),
    }
}

pub fn bin1_file() -> ScenarioFile {
    ScenarioFile {
        name: Some("BIN1".into()),
        assets: vec!["S".into()],
        claims: Vec::new(),
        clock_bound: 1.0,
        tree: NodeSpec {
            prob: None,
            prices: vec![1.0],
            clock: 0.0,
            payoffs: None,
            children: vec![leaf(0.5, vec![2.0], 1.0, vec![]), leaf(0.5, vec![0.5], 1.0, vec![])],
        },
        utility: log_utility(),
        queries: Default::default(),
    }
}

pub fn tri1_file_with_payoffs(payoffs: &[f64]) -> ScenarioFile {
    let third = 1.0 / 3.0;
    let prices = [2.0, 1.0, 0.5];
    ScenarioFile {
        name: Some("TRI1".into()),
        assets: vec!["S".into()],
        claims: vec!["digital".into()],
        clock_bound: 1.0,
        tree: NodeSpec {
            prob: None,
            prices: vec![1.0],
            clock: 0.0,
            payoffs: None,
            children: prices.iter().zip(payoffs).map(|(&s, &f)| leaf(third, vec![s], 1.0, vec![f])).collect(),
        },
        utility: log_utility(),
        queries: Default::default(),
    }
}

pub fn tri1_file() -> ScenarioFile {
    tri1_file_with_payoffs(&[1.0, 0.0, 0.0])
}

pub fn det1() -> MarketScenario {
    det1_file().to_scenario().expect("fixture")
}

pub fn bin1() -> MarketScenario {
    bin1_file().to_scenario().expect("fixture")
}

pub fn tri1() -> MarketScenario {
    tri1_file().to_scenario().expect("fixture")
}

pub fn tri1_with_payoffs(payoffs: &[f64]) -> MarketScenario {
    tri1_file_with_payoffs(payoffs).to_scenario().expect("fixture")
}

/// One period, `k` equally likely states, no traded asset.
pub fn no_stock(k: usize) -> MarketScenario {
    ScenarioFile {
        name: None,
        assets: Vec::new(),
        claims: Vec::new(),
        clock_bound: 1.0,
        tree: NodeSpec {
            prob: None,
            prices: Vec::new(),
            clock: 0.0,
            payoffs: None,
            children: (0..k).map(|_| leaf(1.0 / k as f64, vec![], 1.0, vec![])).collect(),
        },
        utility: None,
        queries: Default::default(),
    }
    .to_scenario()
    .expect("fixture")
}

/// The stock rises in every state.
pub fn arbitrage_market() -> MarketScenario {
    ScenarioFile {
        name: None,
        assets: vec!["S".into()],
        claims: Vec::new(),
        clock_bound: 1.0,
        tree: NodeSpec {
            prob: None,
            prices: vec![1.0],
            clock: 0.0,
            payoffs: None,
            children: vec![leaf(0.5, vec![2.0], 1.0, vec![]), leaf(0.5, vec![1.5], 1.0, vec![])],
        },
        utility: None,
        queries: Default::default(),
    }
    .to_scenario()
    .expect("fixture")
}

pub fn shipped() -> Vec<ScenarioFile> {
    vec![det1_file(), bin1_file(), tri1_file()]
}

#[derive(Debug, Clone, Copy)]
pub struct RandomTreeSpec {
    pub max_depth: usize,
    pub max_branching: usize,
    pub max_leaves: usize,
    pub max_assets: usize,
    pub max_claims: usize,
    /// Upper bound on the number of nodes carrying clock mass.
    pub max_clock_nodes: usize,
}

impl RandomTreeSpec {
    /// Trees with at most 27 leaves, two assets and two claims.
    pub fn medium() -> Self {
        Self { max_depth: 3, max_branching: 3, max_leaves: 27, max_assets: 2, max_claims: 2, max_clock_nodes: 40 }
    }

    /// Trees small enough for the brute-force oracles (≤ 9 leaves, ≤ 12 clock nodes).
    pub fn tiny() -> Self {
        Self { max_depth: 2, max_branching: 3, max_leaves: 9, max_assets: 1, max_claims: 2, max_clock_nodes: 12 }
    }
}

/// Random arbitrage-free market with a random admissible utility field.
///
/// Every one-step price increment is centred under a strictly positive
/// conditional law, so an equivalent martingale measure exists by construction.
pub fn random_file(seed: u64, spec: RandomTreeSpec) -> ScenarioFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(f) = try_random(&mut rng, spec, seed) {
            return f;
        }
    }
}

fn try_random(rng: &mut ChaCha8Rng, spec: RandomTreeSpec, seed: u64) -> Option<ScenarioFile> {
    let depth = rng.gen_range(1..=spec.max_depth);
    let d = rng.gen_range(0..=spec.max_assets);
    let n_claims = rng.gen_range(0..=spec.max_claims);
    let full_clock = rng.gen_bool(0.5);

    struct Gen<'a> {
        rng: &'a mut ChaCha8Rng,
        spec: RandomTreeSpec,
        depth: usize,
        d: usize,
        n_claims: usize,
        full_clock: bool,
        leaves: usize,
        clock_nodes: usize,
    }
    impl Gen<'_> {
        fn node(&mut self, t: usize, prob: Option<f64>, prices: Vec<f64>) -> NodeSpec {
            let clock = if self.full_clock {
                if self.rng.gen_bool(0.75) {
                    self.rng.gen_range(0.1..1.0)
                } else {
                    0.0
                }
            } else if t == self.depth {
                1.0
            } else {
                0.0
            };
            if clock > 0.0 {
                self.clock_nodes += 1;
            }
            if t == self.depth {
                self.leaves += 1;
                let payoffs = (0..self.n_claims)
                    .map(|_| {
                        if self.rng.gen_bool(0.4) {
                            if self.rng.gen_bool(0.5) {
                                1.0
                            } else {
                                0.0
                            }
                        } else {
                            (self.rng.gen_range(-0.5..1.5f64) * 64.0).round() / 64.0
                        }
                    })
                    .collect();
                return NodeSpec { prob, prices, clock, payoffs: Some(payoffs), children: Vec::new() };
            }
            let b = self.rng.gen_range(2..=self.spec.max_branching);
            let mut raw_p: Vec<f64> = (0..b).map(|_| self.rng.gen_range(0.2..1.0)).collect();
            let total: f64 = raw_p.iter().sum();
            raw_p.iter_mut().for_each(|p| *p /= total);
            let fix: f64 = raw_p[..b - 1].iter().sum();
            raw_p[b - 1] = 1.0 - fix;
            let mut pi: Vec<f64> = (0..b).map(|_| self.rng.gen_range(0.2..1.0)).collect();
            let pt: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|p| *p /= pt);
            let mut child_prices = vec![vec![0.0; self.d]; b];
            for a in 0..self.d {
                let raw: Vec<f64> = (0..b).map(|_| self.rng.gen_range(-0.4..0.4) * prices[a]).collect();
                let mean: f64 = raw.iter().zip(&pi).map(|(r, p)| r * p).sum();
                for c in 0..b {
                    child_prices[c][a] = prices[a] + raw[c] - mean;
                }
            }
            let children =
                (0..b).map(|c| self.node(t + 1, Some(raw_p[c]), child_prices[c].clone())).collect::<Vec<_>>();
            NodeSpec { prob, prices, clock, payoffs: None, children }
        }
    }
    let root_prices: Vec<f64> = (0..d).map(|_| rng.gen_range(0.8..1.2)).collect();
    let mut g = Gen { rng, spec, depth, d, n_claims, full_clock, leaves: 0, clock_nodes: 0 };
    let tree = g.node(0, None, root_prices);
    if g.leaves > spec.max_leaves || g.clock_nodes == 0 || g.clock_nodes > spec.max_clock_nodes {
        return None;
    }
    let (leaves, clock_nodes) = (g.leaves, g.clock_nodes);
    let _ = (leaves, clock_nodes);

    let mut bound: f64 = 0.0;
    fn max_path(n: &NodeSpec) -> f64 {
        n.clock + n.children.iter().map(max_path).fold(0.0, f64::max)
    }
    bound = bound.max(max_path(&tree));

    let families = [(FamilyTag::Log, None), (FamilyTag::Power, Some(0.5)), (FamilyTag::Power, Some(0.3)), (FamilyTag::Power, Some(-1.0)), (FamilyTag::Power, Some(-2.0))];
    let &(family, gamma) = families.choose(rng).expect("nonempty");
    fn count(n: &NodeSpec) -> usize {
        1 + n.children.iter().map(count).sum::<usize>()
    }
    let beta = if rng.gen_bool(0.5) {
        Weight::Constant(1.0)
    } else {
        Weight::PerNode((0..count(&tree)).map(|_| (rng.gen_range(0.5..2.0f64) * 64.0).round() / 64.0).collect())
    };
    Some(ScenarioFile {
        name: Some(format!("random-{seed}")),
        assets: (0..d).map(|i| format!("S{}", i + 1)).collect(),
        claims: (0..n_claims).map(|i| format!("F{}", i + 1)).collect(),
        clock_bound: bound,
        tree,
        utility: Some(UtilitySpec { family, gamma, beta }),
        queries: Default::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_fixtures_validate() {
        for f in shipped() {
            let s = f.to_scenario().unwrap();
            assert!(s.validate().is_empty(), "{:?}", f.name);
            f.utility_field().unwrap().unwrap().validate_for(&s).unwrap();
        }
    }

    #[test]
    fn random_trees_are_valid_and_deterministic() {
        for seed in 0..30 {
            let f = random_file(seed, RandomTreeSpec::medium());
            assert_eq!(f, random_file(seed, RandomTreeSpec::medium()));
            let s = f.to_scenario().unwrap();
            assert!(s.validate().is_empty(), "seed {seed}: {:?}", s.validate());
            assert!(s.tree().leaves().len() <= 27);
            f.utility_field().unwrap().unwrap().validate_for(&s).unwrap();
        }
    }
}
