// SPDX-License-Identifier: Apache-2.0

//! Tuples-read cost functions and the intermediate-size estimate.
//!
//! All counts are real-valued. The partition counts `H` and `G` may be
//! fractional here; the engine uses their ceilings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    #[serde(rename = "sizeR")]
    pub size_r: f64,
    #[serde(rename = "sizeS")]
    pub size_s: f64,
    #[serde(rename = "sizeT")]
    pub size_t: f64,
    /// On-chip tuple capacity.
    #[serde(rename = "M")]
    pub m: f64,
    pub d: f64,
    /// First-level bucket count on the R side.
    #[serde(rename = "H")]
    pub h: f64,
    /// First-level bucket count on the T side.
    #[serde(rename = "G")]
    pub g: f64,
    /// Measured `|R ⋈ S|`; replaces the uniformity estimate when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediate: Option<f64>,
}

impl CostInputs {
    /// Sizes and capacity with `H = G = 1`.
    pub fn new(size_r: f64, size_s: f64, size_t: f64, m: f64, d: f64) -> Self {
        CostInputs {
            size_r,
            size_s,
            size_t,
            m,
            d,
            h: 1.0,
            g: 1.0,
            intermediate: None,
        }
    }

    pub fn with_buckets(mut self, h: f64, g: f64) -> Self {
        self.h = h;
        self.g = g;
        self
    }

    pub fn with_intermediate(mut self, tuples: f64) -> Self {
        self.intermediate = Some(tuples);
        self
    }

    /// `|R ⋈ S|`: the measured value if present, otherwise `|R||S|/d`.
    pub fn intermediate_tuples(&self) -> Result<f64> {
        match self.intermediate {
            Some(i) if i >= 0.0 => Ok(i),
            Some(i) => Err(Error::InvalidInput(alloc::format!("negative intermediate size {i}"))),
            None => intermediate_size(self.size_r, self.size_s, self.d),
        }
    }

    fn check_m(&self) -> Result<()> {
        if !(self.m >= 1.0) {
            return Err(Error::InvalidInput(alloc::format!("M must be at least 1, got {}", self.m)));
        }
        if self.size_r < 0.0 || self.size_s < 0.0 || self.size_t < 0.0 {
            return Err(Error::InvalidInput("relation sizes must be non-negative".into()));
        }
        Ok(())
    }

    fn check_positive(&self) -> Result<()> {
        self.check_m()?;
        if !(self.size_r > 0.0 && self.size_s > 0.0 && self.size_t > 0.0) {
            return Err(Error::InvalidInput("cyclic cost needs positive relation sizes".into()));
        }
        Ok(())
    }
}

/// `|R| + |S| + |R||T|/M`.
pub fn tuples_read_linear(inp: &CostInputs) -> Result<f64> {
    inp.check_m()?;
    Ok(inp.size_r + inp.size_s + inp.size_r * inp.size_t / inp.m)
}

/// `|R| + H|S| + |R||T|/(M H)`, with `G = |R|/(M H)` eliminated.
pub fn cyclic_cost(inp: &CostInputs) -> Result<f64> {
    inp.check_positive()?;
    if !(inp.h > 0.0) {
        return Err(Error::InvalidInput(alloc::format!("H must be positive, got {}", inp.h)));
    }
    Ok(inp.size_r + inp.h * inp.size_s + inp.size_r * inp.size_t / (inp.m * inp.h))
}

/// `|R| + H|S| + G|T|` for explicit bucket counts.
pub fn cyclic_cost_hg(inp: &CostInputs) -> Result<f64> {
    inp.check_positive()?;
    Ok(inp.size_r + inp.h * inp.size_s + inp.g * inp.size_t)
}

/// The stationary point of [`cyclic_cost`]: `sqrt(|R||T| / (M |S|))`.
pub fn optimal_h(inp: &CostInputs) -> Result<f64> {
    inp.check_positive()?;
    Ok(libm::sqrt(inp.size_r * inp.size_t / (inp.m * inp.size_s)))
}

/// [`cyclic_cost`] at [`optimal_h`]: `|R| + 2 sqrt(|R||S||T| / M)`.
pub fn cyclic_min_cost(inp: &CostInputs) -> Result<f64> {
    inp.check_positive()?;
    Ok(inp.size_r + 2.0 * libm::sqrt(inp.size_r * inp.size_s * inp.size_t / inp.m))
}

/// Expected `|R ⋈ S|` under uniform keys: `|R||S|/d`.
pub fn intermediate_size(size_r: f64, size_s: f64, d: f64) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::InvalidInput(alloc::format!("d must be at least 1, got {d}")));
    }
    Ok(size_r / d * size_s)
}

/// Smallest `x` in `[lo, hi]` with `cost(x) < budget`, for `cost`
/// non-increasing in `x`. Bisection in log space to relative width `rel_tol`.
///
/// Returns `None` when even `cost(hi)` is over budget.
pub fn solve_crossover(
    mut cost: impl FnMut(f64) -> f64,
    budget: f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Option<f64> {
    if !(lo > 0.0 && hi > lo) || cost(hi) >= budget {
        return None;
    }
    if cost(lo) < budget {
        return Some(lo);
    }
    let (mut a, mut b) = (libm::log(lo), libm::log(hi));
    // Invariant: cost(e^a) >= budget > cost(e^b).
    while libm::exp(b - a) - 1.0 > rel_tol {
        let mid = 0.5 * (a + b);
        if cost(libm::exp(mid)) < budget {
            b = mid;
        } else {
            a = mid;
        }
    }
    Some(libm::exp(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_examples() {
        assert_eq!(tuples_read_linear(&CostInputs::new(100.0, 200.0, 50.0, 10.0, 1.0)).unwrap(), 800.0);
        assert_eq!(tuples_read_linear(&CostInputs::new(100.0, 200.0, 0.0, 10.0, 1.0)).unwrap(), 300.0);
        assert!(tuples_read_linear(&CostInputs::new(1.0, 1.0, 1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn cyclic_identity_at_m_equal_s() {
        let s = 5.0e6;
        let inp = CostInputs::new(s, s, s, s, 1.0);
        assert_eq!(optimal_h(&inp).unwrap(), 1.0);
        assert_eq!(cyclic_min_cost(&inp).unwrap(), 3.0 * s);
        assert_eq!(cyclic_cost(&inp.with_buckets(1.0, 1.0)).unwrap(), 3.0 * s);
    }

    #[test]
    fn cyclic_min_cost_is_cost_at_optimum() {
        let inp = CostInputs::new(1e6, 2e6, 4e6, 1e4, 1.0);
        let h = optimal_h(&inp).unwrap();
        let at = cyclic_cost(&inp.with_buckets(h, 1.0)).unwrap();
        let min = cyclic_min_cost(&inp).unwrap();
        assert!((at - min).abs() <= 1e-9 * min);
    }

    #[test]
    fn cyclic_zero_sizes_rejected() {
        assert!(optimal_h(&CostInputs::new(0.0, 1.0, 1.0, 1.0, 1.0)).is_err());
        assert!(cyclic_cost(&CostInputs::new(1.0, 1.0, 1.0, 1.0, 1.0).with_buckets(0.0, 1.0)).is_err());
    }

    #[test]
    fn intermediate_examples() {
        assert_eq!(intermediate_size(6e11, 6e11, 2e9).unwrap(), 1.8e14);
        assert_eq!(intermediate_size(1000.0, 1000.0, 1000.0).unwrap(), 1000.0);
        assert!(intermediate_size(1.0, 1.0, 0.0).is_err());
        let measured = CostInputs::new(10.0, 10.0, 10.0, 1.0, 2.0).with_intermediate(7.0);
        assert_eq!(measured.intermediate_tuples().unwrap(), 7.0);
    }

    #[test]
    fn crossover_bisection() {
        let x = solve_crossover(|m| 1.0 / m, 0.25, 1e-3, 1e3, 1e-9).unwrap();
        assert!((x - 4.0).abs() < 1e-6);
        assert_eq!(solve_crossover(|_| 1.0, 0.5, 1.0, 10.0, 1e-6), None);
        assert_eq!(solve_crossover(|_| 0.0, 0.5, 1.0, 10.0, 1e-6), Some(1.0));
    }
}
