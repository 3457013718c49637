// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Join execution strategies understood by the engine and the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// `R(AB) ⋈ S(BC) ⋈ T(CD)` in one pass, T broadcast per R partition.
    Linear3,
    /// `R(AB) ⋈ S(BC) ⋈ T(CA)` on a square PMU grid.
    Cyclic3,
    /// Linear join with R and T resident on chip and S streamed.
    Star3,
    /// Two binary joins materializing `I(ABC)` in DRAM.
    Cascaded,
    /// Cascaded binary joins with R, then T, wholly on chip.
    CascadedStar,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Linear3,
        Strategy::Cyclic3,
        Strategy::Star3,
        Strategy::Cascaded,
        Strategy::CascadedStar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Linear3 => "linear3",
            Strategy::Cyclic3 => "cyclic3",
            Strategy::Star3 => "star3",
            Strategy::Cascaded => "cascaded",
            Strategy::CascadedStar => "cascaded-star",
        }
    }

    pub fn is_cascaded(self) -> bool {
        matches!(self, Strategy::Cascaded | Strategy::CascadedStar)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "linear3" | "linear" => Ok(Strategy::Linear3),
            "cyclic3" | "cyclic" => Ok(Strategy::Cyclic3),
            "star3" | "star" => Ok(Strategy::Star3),
            "cascaded" | "cascaded-self" => Ok(Strategy::Cascaded),
            "cascaded-star" => Ok(Strategy::CascadedStar),
            other => Err(Error::InvalidInput(format!("unknown strategy {other:?}"))),
        }
    }
}
