//! JSON scenario file: the market tree as nested node blocks, an optional utility
//! field, and optional query lists. Unknown keys are rejected. Node ids used by
//! per-node arrays are preorder positions (root = 0, then each child subtree in turn).
//! See `docs/scenario-format.md` for the full schema.

use serde::{Deserialize, Serialize};

use super::{ClockSpec, EventTree, MarketScenario, Node};
use crate::error::{Error, Result};
use crate::utility::{UtilityFamily, UtilityField, Weight};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub assets: Vec<String>,
    #[serde(default)]
    pub claims: Vec<String>,
    pub clock_bound: f64,
    pub tree: NodeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    #[serde(default, skip_serializing_if = "Queries::is_empty")]
    pub queries: Queries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    /// Conditional branch probability; absent at the root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
    #[serde(default)]
    pub prices: Vec<f64>,
    #[serde(default)]
    pub clock: f64,
    /// Terminal endowment payoffs, one per claim; leaves only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Log,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    pub family: FamilyTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: Weight,
}

fn default_beta() -> Weight {
    Weight::Constant(1.0)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimalQuery {
    pub x: f64,
    #[serde(default)]
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualQuery {
    pub y: f64,
    #[serde(default)]
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Queries {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub primal: Vec<PrimalQuery>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dual: Vec<DualQuery>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub w_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wtilde_grid: Vec<f64>,
}

impl Queries {
    pub fn is_empty(&self) -> bool {
        self.primal.is_empty() && self.dual.is_empty() && self.w_grid.is_empty() && self.wtilde_grid.is_empty()
    }
}

impl UtilitySpec {
    pub fn to_field(&self) -> Result<UtilityField> {
        let family = match (self.family, self.gamma) {
            (FamilyTag::Log, None) => UtilityFamily::Log,
            (FamilyTag::Log, Some(_)) => return Err(Error::Parse("utility.gamma is not allowed for family log".into())),
            (FamilyTag::Power, Some(gamma)) => UtilityFamily::Power { gamma },
            (FamilyTag::Power, None) => return Err(Error::Parse("utility.gamma is required for family power".into())),
        };
        UtilityField::new(family, self.beta.clone())
    }

    pub fn from_field(field: &UtilityField) -> Self {
        let (family, gamma) = match field.family() {
            UtilityFamily::Log => (FamilyTag::Log, None),
            UtilityFamily::Power { gamma } => (FamilyTag::Power, Some(gamma)),
        };
        Self { family, gamma, beta: field.weight().clone() }
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

impl ScenarioFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    /// Flattens the nested node blocks into a [`MarketScenario`]. Structural problems
    /// (payoffs on internal nodes, probabilities on the root, wrong vector lengths)
    /// are reported with the JSON path of the offending block.
    pub fn to_scenario(&self) -> Result<MarketScenario> {
        let d = self.assets.len();
        let n = self.claims.len();
        let mut nodes = Vec::new();
        let mut prices = Vec::new();
        let mut increments = Vec::new();
        let mut payoffs = Vec::new();

        if self.tree.prob.is_some() {
            return Err(Error::Parse("tree: the root block must not carry a prob".into()));
        }
        let mut stack: Vec<(&NodeSpec, Option<usize>, usize, String)> = vec![(&self.tree, None, 0, "tree".to_string())];
        while let Some((spec, parent, time, path)) = stack.pop() {
            let id = nodes.len();
            let prob = match (parent, spec.prob) {
                (None, _) => 1.0,
                (Some(_), Some(p)) => p,
                (Some(_), None) => return Err(Error::Parse(format!("{path}: missing prob"))),
            };
            if spec.prices.len() != d {
                return Err(Error::Parse(format!(
                    "{path}.prices: expected {d} values (one per asset), got {}",
                    spec.prices.len()
                )));
            }
            nodes.push(Node { parent, time, prob });
            prices.push(spec.prices.clone());
            increments.push(spec.clock);
            if spec.children.is_empty() {
                let pay = spec.payoffs.clone().unwrap_or_default();
                if pay.len() != n {
                    return Err(Error::Parse(format!(
                        "{path}.payoffs: expected {n} values (one per claim), got {}",
                        pay.len()
                    )));
                }
                payoffs.push(pay);
            } else if spec.payoffs.is_some() {
                return Err(Error::Parse(format!("{path}.payoffs: payoffs are only allowed on leaves")));
            }
            // reverse so that children are numbered in file order
            for (k, child) in spec.children.iter().enumerate().rev() {
                stack.push((child, Some(id), time + 1, format!("{path}.children[{k}]")));
            }
        }
        Ok(MarketScenario::new(
            EventTree::new(nodes),
            d,
            n,
            prices,
            payoffs,
            ClockSpec { increments, bound: self.clock_bound },
        ))
    }

    pub fn utility_field(&self) -> Result<Option<UtilityField>> {
        self.utility.as_ref().map(|u| u.to_field()).transpose()
    }

    /// Rebuilds the nested representation of an in-memory scenario.
    pub fn from_model(scenario: &MarketScenario, utility: Option<&UtilityField>) -> Self {
        fn block(s: &MarketScenario, i: usize, leaf_rows: &[Option<usize>]) -> NodeSpec {
            let tree = s.tree();
            let node = tree.nodes()[i];
            let children: Vec<NodeSpec> = tree.children(i).iter().map(|&c| block(s, c, leaf_rows)).collect();
            NodeSpec {
                prob: node.parent.map(|_| node.prob),
                prices: s.prices()[i].clone(),
                clock: s.clock().increments[i],
                payoffs: leaf_rows[i].map(|k| s.payoffs()[k].clone()),
                children,
            }
        }
        let mut leaf_rows = vec![None; scenario.n_nodes()];
        for (k, l) in scenario.tree().leaves().into_iter().enumerate() {
            leaf_rows[l] = Some(k);
        }
        Self {
            name: None,
            assets: (0..scenario.n_assets()).map(|i| format!("S{}", i + 1)).collect(),
            claims: (0..scenario.n_claims()).map(|i| format!("F{}", i + 1)).collect(),
            clock_bound: scenario.clock().bound,
            tree: block(scenario, 0, &leaf_rows),
            utility: utility.map(UtilitySpec::from_field),
            queries: Queries::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BIN1: &str = r#"{
        "assets": ["S"],
        "clock_bound": 1.0,
        "tree": {
            "prices": [1.0],
            "children": [
                {"prob": 0.5, "prices": [2.0], "clock": 1.0},
                {"prob": 0.5, "prices": [0.5], "clock": 1.0}
            ]
        },
        "utility": {"family": "log"}
    }"#;

    #[test]
    fn parses_nested_tree() {
        let f = parse_scenario(BIN1).unwrap();
        let s = f.to_scenario().unwrap();
        assert_eq!(s.n_nodes(), 3);
        assert_eq!(s.tree().leaves(), vec![1, 2]);
        assert_eq!(s.price(2, 0), 0.5);
        assert!(s.validate().is_empty());
        assert_eq!(f.utility_field().unwrap().unwrap(), UtilityField::log());
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = BIN1.replace("\"clock_bound\"", "\"clock_bnd\"");
        let err = parse_scenario(&bad).unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.contains("unknown field") && m.contains("line")), "{err}");
    }

    #[test]
    fn rejects_payoffs_on_internal_node() {
        let bad = BIN1.replace("\"prices\": [1.0],", "\"prices\": [1.0], \"payoffs\": [],");
        let err = parse_scenario(&bad).unwrap().to_scenario().unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.starts_with("tree.payoffs")), "{err}");
    }

    #[test]
    fn wrong_price_length_names_the_block() {
        let bad = BIN1.replace("[0.5]", "[0.5, 1.0]");
        let err = parse_scenario(&bad).unwrap().to_scenario().unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.starts_with("tree.children[1].prices")), "{err}");
    }

    #[test]
    fn power_requires_gamma() {
        let bad = BIN1.replace(r#"{"family": "log"}"#, r#"{"family": "power"}"#);
        assert!(parse_scenario(&bad).unwrap().utility_field().is_err());
    }

    #[test]
    fn model_round_trip() {
        let f = parse_scenario(BIN1).unwrap();
        let s = f.to_scenario().unwrap();
        let u = f.utility_field().unwrap();
        let back = ScenarioFile::from_model(&s, u.as_ref());
        let reparsed = parse_scenario(&back.to_json()).unwrap();
        assert_eq!(reparsed.to_scenario().unwrap(), s);
        assert_eq!(reparsed.utility_field().unwrap(), u);
    }
}
