// SPDX-License-Identifier: Apache-2.0

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::relation::Tuple;

/// One pattern memory unit.
///
/// `stored_r` holds the fragment loaded first and kept across inner
/// iterations (R, or T in the second cascaded join); `stored_s` holds the
/// fragment replaced per inner bucket (S, or T in the star join).
#[derive(Debug, Clone, Default)]
pub struct PmuState {
    pub index: usize,
    pub stored_r: Vec<Tuple>,
    pub stored_s: Vec<Tuple>,
}

impl PmuState {
    pub fn occupancy(&self) -> usize {
        self.stored_r.len() + self.stored_s.len()
    }
}

/// All PMUs of the chip with a uniform per-unit tuple budget.
#[derive(Debug, Clone)]
pub struct PmuGrid {
    pub units: Vec<PmuState>,
    capacity: u64,
    peak: usize,
}

impl PmuGrid {
    pub fn new(units: usize, capacity_per_unit: u64) -> Self {
        PmuGrid {
            units: (0..units)
                .map(|index| PmuState {
                    index,
                    ..PmuState::default()
                })
                .collect(),
            capacity: capacity_per_unit,
            peak: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Highest occupancy any unit reached so far.
    pub fn peak_occupancy(&self) -> usize {
        self.peak
    }

    fn admit(&mut self, unit: usize) -> Result<()> {
        let occ = self.units[unit].occupancy() + 1;
        if occ as u64 > self.capacity {
            return Err(Error::Infeasible(format!(
                "PMU {unit} would hold {occ} tuples, capacity is {} per unit",
                self.capacity
            )));
        }
        self.peak = self.peak.max(occ);
        Ok(())
    }

    pub fn store_r(&mut self, unit: usize, t: Tuple) -> Result<()> {
        self.admit(unit)?;
        self.units[unit].stored_r.push(t);
        Ok(())
    }

    pub fn store_s(&mut self, unit: usize, t: Tuple) -> Result<()> {
        self.admit(unit)?;
        self.units[unit].stored_s.push(t);
        Ok(())
    }

    pub fn clear_s(&mut self) {
        self.units.iter_mut().for_each(|u| u.stored_s.clear());
    }

    pub fn clear(&mut self) {
        for u in &mut self.units {
            u.stored_r.clear();
            u.stored_s.clear();
        }
    }
}
