// SPDX-License-Identifier: Apache-2.0

//! Plasticine-like accelerator parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::TUPLE_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineConfig {
    /// Number of PMUs; the chip has the same number of PCUs.
    #[serde(rename = "U")]
    pub units: u32,
    /// SIMD lanes per PCU.
    #[serde(rename = "L")]
    pub lanes: u32,
    /// Total scratchpad capacity before double buffering.
    pub onchip_bytes: u64,
    /// DRAM bandwidth in bytes/s, same for read and write.
    pub dram_bw: f64,
    /// Persistent-storage bandwidth in bytes/s, used once DRAM overflows.
    pub ssd_bw: f64,
    pub dram_capacity_bytes: u64,
    pub net_latency_cycles: u32,
    pub pcu_latency_cycles: u32,
    pub clock_hz: f64,
    pub double_buffered: bool,
    /// DRAM response time.
    #[serde(default = "default_dram_latency_ns")]
    pub dram_latency_ns: f64,
    /// Minimum DRAM transfer; smaller requests are charged a full granule.
    #[serde(default = "default_dram_granule")]
    pub dram_granule_bytes: u64,
    /// Peak compute, metadata only. The model counts comparisons at
    /// `U * L` per cycle instead.
    #[serde(default = "default_peak_flops")]
    pub peak_flops: f64,
}

fn default_dram_latency_ns() -> f64 {
    100.0
}

fn default_dram_granule() -> u64 {
    64
}

fn default_peak_flops() -> f64 {
    12.3e12
}

impl Default for MachineConfig {
    fn default() -> Self {
        default_config()
    }
}

/// The evaluated accelerator: 64 PMUs/PCUs, 16 lanes, 16 MiB scratchpad,
/// 49 GB/s DRAM, 700 MB/s SSD, 251 GB of DRAM, 1 GHz.
pub fn default_config() -> MachineConfig {
    MachineConfig {
        units: 64,
        lanes: 16,
        onchip_bytes: 16 << 20,
        dram_bw: 49e9,
        ssd_bw: 700e6,
        dram_capacity_bytes: 251_000_000_000,
        net_latency_cycles: 24,
        pcu_latency_cycles: 6,
        clock_hz: 1e9,
        double_buffered: true,
        dram_latency_ns: default_dram_latency_ns(),
        dram_granule_bytes: default_dram_granule(),
        peak_flops: default_peak_flops(),
    }
}

/// On-chip tuple capacity, halved when double buffered.
pub fn effective_m(cfg: &MachineConfig, tuple_width: u64) -> Result<u64> {
    if tuple_width == 0 {
        return Err(Error::InvalidConfig("tuple width must be positive".into()));
    }
    let m = cfg.onchip_bytes / tuple_width;
    Ok(if cfg.double_buffered { m / 2 } else { m })
}

impl MachineConfig {
    /// [`effective_m`] for 8-byte tuples.
    pub fn tuple_capacity(&self) -> u64 {
        self.onchip_bytes / TUPLE_BYTES / if self.double_buffered { 2 } else { 1 }
    }

    /// Tuples one PMU may hold: the capacity split evenly over all units.
    pub fn unit_capacity(&self) -> u64 {
        self.tuple_capacity() / self.units.max(1) as u64
    }

    /// Side of the PMU grid when `U` is a perfect square.
    pub fn grid_side(&self) -> Option<u32> {
        let side = libm::round(libm::sqrt(self.units as f64)) as u32;
        (side * side == self.units).then_some(side)
    }

    pub fn compute_latency_cycles(&self) -> f64 {
        (self.net_latency_cycles + self.pcu_latency_cycles) as f64
    }

    pub fn dram_latency_cycles(&self) -> f64 {
        self.dram_latency_ns * 1e-9 * self.clock_hz
    }

    /// Bytes per cycle for DRAM or, when `spill`, persistent storage.
    pub fn bytes_per_cycle(&self, spill: bool) -> f64 {
        let bw = if spill { self.ssd_bw } else { self.dram_bw };
        bw / self.clock_hz
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.into()));
        if self.units == 0 {
            return bad("U must be at least 1");
        }
        if self.lanes == 0 {
            return bad("L must be at least 1");
        }
        if !(self.dram_bw > 0.0) || !(self.ssd_bw > 0.0) {
            return bad("bandwidths must be positive");
        }
        if !(self.clock_hz > 0.0) {
            return bad("clock_hz must be positive");
        }
        if !(self.dram_latency_ns >= 0.0) {
            return bad("dram_latency_ns must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_evaluated_machine() {
        let cfg = default_config();
        assert_eq!(cfg.units, 64);
        assert_eq!(cfg.lanes, 16);
        assert_eq!(cfg.ssd_bw, 700e6);
        assert_eq!(cfg.dram_bw, 49e9);
        assert_eq!(cfg.onchip_bytes, 16 * 1024 * 1024);
        assert_eq!(cfg.net_latency_cycles, 24);
        assert_eq!(cfg.pcu_latency_cycles, 6);
        assert!(cfg.double_buffered);
        assert_eq!(cfg, default_config());
    }

    #[test]
    fn effective_capacity() {
        let cfg = default_config();
        // 16 MiB / 8 B / 2 buffers
        assert_eq!(effective_m(&cfg, 8).unwrap(), 1_048_576);
        assert_eq!(cfg.tuple_capacity(), 1_048_576);
        let single = MachineConfig { double_buffered: false, ..cfg };
        assert_eq!(effective_m(&single, 8).unwrap(), 2_097_152);
        let none = MachineConfig { onchip_bytes: 0, ..cfg };
        assert_eq!(effective_m(&none, 8).unwrap(), 0);
        assert!(effective_m(&cfg, 0).is_err());
    }

    #[test]
    fn effective_capacity_is_monotone() {
        let cfg = default_config();
        let mut prev = 0;
        for kb in [0u64, 1, 7, 64, 1000, 16384] {
            let m = effective_m(&MachineConfig { onchip_bytes: kb * 1024, ..cfg }, 8).unwrap();
            assert!(m >= prev);
            prev = m;
        }
        let mut prev = u64::MAX;
        for w in 1..40 {
            let m = effective_m(&cfg, w).unwrap();
            assert!(m <= prev);
            prev = m;
        }
    }

    #[test]
    fn grid_side_requires_square() {
        let cfg = default_config();
        assert_eq!(cfg.grid_side(), Some(8));
        assert_eq!(MachineConfig { units: 32, ..cfg }.grid_side(), None);
        assert_eq!(MachineConfig { units: 1, ..cfg }.grid_side(), Some(1));
    }

    #[test]
    fn json_uses_field_names() {
        let v = serde_json::to_value(default_config()).unwrap();
        for key in [
            "U",
            "L",
            "onchip_bytes",
            "dram_bw",
            "ssd_bw",
            "dram_capacity_bytes",
            "net_latency_cycles",
            "pcu_latency_cycles",
            "clock_hz",
            "double_buffered",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
