// SPDX-License-Identifier: Apache-2.0

//! Experiment description shared by every subcommand.

use mwjoin_core::datagen::{generate_relation, DataProfile, HashPlan, MAX_DISTINCT};
use mwjoin_core::machine::MachineConfig;
use mwjoin_core::perfmodel::{default_plan_with_fill, CostInputs, Pairing};
use mwjoin_core::{Error, Relation, Role, Strategy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// One friends relation F used as R(AB), S(BC) and T(CD).
    SelfLinear,
    /// Independent R(AB), S(BC), T(CA).
    Cyclic,
    /// Small R(AB) and T(CD) of K tuples around a large S(BC).
    Star,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::SelfLinear => "self-linear",
            Shape::Cyclic => "cyclic",
            Shape::Star => "star",
        }
    }

    pub fn default_strategy(self) -> Strategy {
        match self {
            Shape::SelfLinear => Strategy::Linear3,
            Shape::Cyclic => Strategy::Cyclic3,
            Shape::Star => Strategy::Star3,
        }
    }

    pub fn pairing(self) -> Result<Pairing> {
        match self {
            Shape::SelfLinear => Ok(Pairing::SelfLinear),
            Shape::Star => Ok(Pairing::Star),
            Shape::Cyclic => Err(CliError::Usage("compare has no cascaded counterpart for the cyclic shape".into())),
        }
    }

    /// Cyclic data only fits the cyclic join and vice versa.
    pub fn check_strategy(self, strategy: Strategy) -> Result<()> {
        if (self == Shape::Cyclic) != (strategy == Strategy::Cyclic3) {
            return Err(CliError::Usage(format!("strategy {strategy} does not apply to the {} shape", self.name())));
        }
        Ok(())
    }
}

/// Bucket counts given on the command line; unset fields keep the default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOverrides {
    #[serde(rename = "H_bkt", skip_serializing_if = "Option::is_none")]
    pub coarse_h: Option<u32>,
    #[serde(rename = "G_bkt", skip_serializing_if = "Option::is_none")]
    pub coarse_g: Option<u32>,
    #[serde(rename = "h_bkt", skip_serializing_if = "Option::is_none")]
    pub fine_h: Option<u32>,
    #[serde(rename = "g_bkt", skip_serializing_if = "Option::is_none")]
    pub fine_g: Option<u32>,
    #[serde(rename = "f_bkt", skip_serializing_if = "Option::is_none")]
    pub fine_f: Option<u32>,
}

impl PlanOverrides {
    pub fn is_empty(&self) -> bool {
        *self == PlanOverrides::default()
    }

    pub fn apply(&self, mut plan: HashPlan) -> HashPlan {
        plan.coarse_h = self.coarse_h.unwrap_or(plan.coarse_h);
        plan.coarse_g = self.coarse_g.unwrap_or(plan.coarse_g);
        plan.fine_h = self.fine_h.unwrap_or(plan.fine_h);
        plan.fine_g = self.fine_g.unwrap_or(plan.fine_g);
        plan.fine_f = self.fine_f.unwrap_or(plan.fine_f);
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub shape: Shape,
    pub n: u64,
    pub d: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    pub seed: u64,
    pub plan: PlanOverrides,
    pub machine: MachineConfig,
}

impl ExperimentSpec {
    /// Sizes positive, `d` in range, and `2K <= M` for the star shape.
    pub fn validate(&self) -> Result<()> {
        self.machine.validate()?;
        if self.n == 0 {
            return Err(CliError::Usage("--n must be positive".into()));
        }
        if self.d == 0 || self.d > MAX_DISTINCT {
            return Err(Error::DistinctOutOfRange(self.d).into());
        }
        if self.shape == Shape::Star {
            let k = self.star_k()?;
            let m = self.machine.tuple_capacity();
            if 2 * k > m {
                return Err(Error::Infeasible(format!("star shape needs 2K <= M, got K = {k}, M = {m}")).into());
            }
        }
        Ok(())
    }

    fn star_k(&self) -> Result<u64> {
        match self.k {
            Some(k) if k > 0 => Ok(k),
            Some(_) => Err(CliError::Usage("--k must be positive".into())),
            None => Err(CliError::Usage("the star shape needs --k".into())),
        }
    }

    /// `[|R|, |S|, |T|]`.
    pub fn sizes(&self) -> Result<[u64; 3]> {
        Ok(match self.shape {
            Shape::SelfLinear | Shape::Cyclic => [self.n; 3],
            Shape::Star => {
                let k = self.star_k()?;
                [k, self.n, k]
            }
        })
    }

    /// Model inputs with `M` set to the machine's tuple capacity.
    pub fn cost_inputs(&self) -> Result<CostInputs> {
        let [r, s, t] = self.sizes()?;
        Ok(CostInputs::new(r as f64, s as f64, t as f64, self.machine.tuple_capacity() as f64, self.d as f64))
    }

    pub fn relations(&self) -> Result<[Relation; 3]> {
        let gen = |n: u64, name: &str, cols: [Role; 2]| -> Result<Relation> {
            let mut rel = generate_relation(DataProfile::new(n, self.d, self.seed), cols)?;
            rel.name = name.into();
            Ok(rel)
        };
        let [r, s, t] = self.sizes()?;
        Ok(match self.shape {
            Shape::SelfLinear => {
                let f = gen(r, "R", [Role::A, Role::B])?;
                let s = f.relabeled("S", [Role::B, Role::C]);
                let t = f.relabeled("T", [Role::C, Role::D]);
                [f, s, t]
            }
            Shape::Cyclic => [
                gen(r, "R", [Role::A, Role::B])?,
                gen(s, "S", [Role::B, Role::C])?,
                gen(t, "T", [Role::C, Role::A])?,
            ],
            Shape::Star => [
                gen(r, "R", [Role::A, Role::B])?,
                gen(s, "S", [Role::B, Role::C])?,
                gen(t, "T", [Role::C, Role::D])?,
            ],
        })
    }

    /// Default plan for `shape` at on-chip fill `fill`, then the overrides.
    pub fn plan(&self, strategy: Strategy, shape: &CostInputs, fill: f64) -> Result<HashPlan> {
        Ok(self.plan.apply(default_plan_with_fill(strategy, shape, &self.machine, fill)?))
    }
}
