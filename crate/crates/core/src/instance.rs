use crate::dual::{self, DualSolution};
use crate::error::{Error, Result};
use crate::geometry::{ConePair, MeasurePolytope};
use crate::policy::NumericPolicy;
use crate::primal::{self, PrimalSolution};
use crate::scenario::format::ScenarioFile;
use crate::scenario::{validate_or_err, MarketScenario};
use crate::utility::UtilityField;

/// A validated market with its utility field, vertex polytope and cones.
#[derive(Debug, Clone)]
pub struct Instance {
    pub scenario: MarketScenario,
    pub field: UtilityField,
    pub polytope: MeasurePolytope,
    pub cones: ConePair,
    pub policy: NumericPolicy,
}

impl Instance {
    pub fn new(scenario: MarketScenario, field: UtilityField, policy: NumericPolicy) -> Result<Self> {
        policy.validate()?;
        validate_or_err(&scenario)?;
        field.validate_for(&scenario)?;
        let polytope = MeasurePolytope::enumerate(&scenario, policy.vertex_cap)?;
        let cones = ConePair::build(&polytope, policy.vertex_cap)?;
        Ok(Self { scenario, field, polytope, cones, policy })
    }

    pub fn from_file(file: &ScenarioFile, policy: NumericPolicy) -> Result<Self> {
        let scenario = file.to_scenario()?;
        let field = file
            .utility_field()?
            .ok_or_else(|| Error::InvalidInput("scenario file has no utility section".into()))?;
        Self::new(scenario, field, policy)
    }

    pub fn n_claims(&self) -> usize {
        self.scenario.n_claims()
    }

    pub fn primal(&self, x: f64, q: &[f64]) -> Result<PrimalSolution> {
        primal::solve_primal(&self.scenario, &self.polytope, &self.field, x, q, &self.policy)
    }

    pub fn dual(&self, y: f64, r: &[f64]) -> Result<DualSolution> {
        dual::solve_dual(&self.scenario, &self.polytope, &self.cones, &self.field, y, r, &self.policy)
    }

    pub fn u(&self, x: f64, q: &[f64]) -> Result<f64> {
        Ok(self.primal(x, q)?.value)
    }

    pub fn v(&self, y: f64, r: &[f64]) -> Result<f64> {
        Ok(self.dual(y, r)?.value)
    }

    pub fn w(&self, x: f64) -> Result<f64> {
        primal::value_w(&self.scenario, &self.polytope, &self.field, x, &self.policy)
    }

    pub fn wtilde(&self, y: f64) -> Result<f64> {
        dual::value_wtilde(&self.scenario, &self.polytope, &self.field, y, &self.policy)
    }
}
