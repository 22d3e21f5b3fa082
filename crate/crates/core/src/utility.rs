//! Utility stochastic fields U(node, x) = β(node)·x^γ/γ or β(node)·log x, their
//! convex conjugates V(node, y) = sup_{x>0} (U(node, x) − x·y), marginals and the
//! inverse marginal I = (U')⁻¹.
//!
//! Values are extended reals carried as `f64` with explicit `±∞`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::MarketScenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityFamily {
    Log,
    Power { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Constant(f64),
    PerNode(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityField {
    family: UtilityFamily,
    beta: Weight,
}

impl UtilityField {
    pub fn new(family: UtilityFamily, beta: Weight) -> Result<Self> {
        if let UtilityFamily::Power { gamma } = family {
            if !(gamma.is_finite() && gamma < 1.0 && gamma != 0.0) {
                return Err(Error::InvalidInput(format!(
                    "power exponent must lie in (-inf,0) or (0,1), got {gamma}"
                )));
            }
        }
        let check = |b: f64| b.is_finite() && b >= 0.0;
        let ok = match &beta {
            Weight::Constant(b) => *b > 0.0 && check(*b),
            Weight::PerNode(v) => v.iter().all(|&b| check(b)),
        };
        if !ok {
            return Err(Error::InvalidInput("utility weights must be finite and nonnegative".into()));
        }
        Ok(Self { family, beta })
    }

    pub fn log() -> Self {
        Self { family: UtilityFamily::Log, beta: Weight::Constant(1.0) }
    }

    pub fn power(gamma: f64) -> Result<Self> {
        Self::new(UtilityFamily::Power { gamma }, Weight::Constant(1.0))
    }

    pub fn family(&self) -> UtilityFamily {
        self.family
    }

    pub fn weight(&self) -> &Weight {
        &self.beta
    }

    pub fn beta(&self, node: usize) -> f64 {
        match &self.beta {
            Weight::Constant(b) => *b,
            Weight::PerNode(v) => v.get(node).copied().unwrap_or(0.0),
        }
    }

    /// Checks the field against a scenario: β must be defined and strictly positive
    /// on every node with clock mass, and Inada/concavity behaviour is spot-checked.
    pub fn validate_for(&self, scenario: &MarketScenario) -> Result<()> {
        if let Weight::PerNode(v) = &self.beta {
            if v.len() != scenario.n_nodes() {
                return Err(Error::InvalidInput(format!(
                    "{} utility weights for {} nodes",
                    v.len(),
                    scenario.n_nodes()
                )));
            }
        }
        for n in scenario.clock_support() {
            if !(self.beta(n) > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "utility weight must be strictly positive at clock node {n}"
                )));
            }
            if !(self.marginal(n, 1e-12) > 1e3 * self.marginal(n, 1.0) && self.marginal(n, 1e12) < 1e-3 * self.marginal(n, 1.0))
            {
                return Err(Error::InvalidInput(format!("Inada conditions fail at node {n}")));
            }
            let grid = [1e-3, 1e-1, 1.0, 10.0, 1e3];
            if grid.windows(2).any(|w| self.marginal(n, w[1]) >= self.marginal(n, w[0])) {
                return Err(Error::InvalidInput(format!("marginal utility not decreasing at node {n}")));
            }
        }
        Ok(())
    }

    /// U(node, x); the limit at x = 0.
    pub fn eval_u(&self, node: usize, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("utility argument must be nonnegative, got {x}")));
        }
        Ok(self.u(node, x))
    }

    /// V(node, y); V(node, 0) = sup U.
    pub fn eval_v(&self, node: usize, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("conjugate argument must be nonnegative, got {y}")));
        }
        Ok(self.v(node, y))
    }

    /// I(node, y) = (U')⁻¹(y).
    pub fn marginal_inverse(&self, node: usize, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Domain(format!("marginal must be strictly positive, got {y}")));
        }
        Ok(self.inv(node, y))
    }

    pub(crate) fn u(&self, node: usize, x: f64) -> f64 {
        let b = self.beta(node);
        match self.family {
            UtilityFamily::Log => {
                if x == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    b * x.ln()
                }
            }
            UtilityFamily::Power { gamma } => {
                if x == 0.0 {
                    if gamma > 0.0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    b * x.powf(gamma) / gamma
                }
            }
        }
    }

    pub(crate) fn v(&self, node: usize, y: f64) -> f64 {
        let b = self.beta(node);
        match self.family {
            UtilityFamily::Log => {
                if y == 0.0 {
                    f64::INFINITY
                } else {
                    b * (b / y).ln() - b
                }
            }
            UtilityFamily::Power { gamma } => {
                if y == 0.0 {
                    if gamma > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    b.powf(1.0 / (1.0 - gamma)) * (1.0 - gamma) / gamma * y.powf(gamma / (gamma - 1.0))
                }
            }
        }
    }

    /// U'(node, x) for x > 0.
    pub fn marginal(&self, node: usize, x: f64) -> f64 {
        let b = self.beta(node);
        match self.family {
            UtilityFamily::Log => b / x,
            UtilityFamily::Power { gamma } => b * x.powf(gamma - 1.0),
        }
    }

    pub(crate) fn inv(&self, node: usize, y: f64) -> f64 {
        let b = self.beta(node);
        match self.family {
            UtilityFamily::Log => b / y,
            UtilityFamily::Power { gamma } => (y / b).powf(1.0 / (gamma - 1.0)),
        }
    }

    /// V''(node, y) = −I'(node, y) for y > 0.
    pub(crate) fn v_second(&self, node: usize, y: f64) -> f64 {
        let i = self.inv(node, y);
        match self.family {
            UtilityFamily::Log => i / y,
            UtilityFamily::Power { gamma } => i / ((1.0 - gamma) * y),
        }
    }

    /// sup_x U(node, x) = V(node, 0).
    pub fn sup_u(&self, node: usize) -> f64 {
        self.v(node, 0.0)
    }

    /// U(node, 0).
    pub fn u_at_zero(&self, node: usize) -> f64 {
        self.u(node, 0.0)
    }
}
