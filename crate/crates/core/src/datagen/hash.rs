// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five hash functions used by the join algorithms.
///
/// Coarse levels pick a top-level DRAM partition; fine levels pick a PMU (or
/// a small on-chip bucket). In the linear join `CoarseH` and `FineH` hash
/// column B and `FineG` hashes C; in the cyclic join `CoarseH`/`FineH` hash
/// A, `CoarseG`/`FineG` hash B and `FineF` hashes C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HashLevel {
    CoarseH,
    CoarseG,
    FineH,
    FineG,
    FineF,
}

impl HashLevel {
    pub const ALL: [HashLevel; 5] = [
        HashLevel::CoarseH,
        HashLevel::CoarseG,
        HashLevel::FineH,
        HashLevel::FineG,
        HashLevel::FineF,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Fixed odd multiplier for this level.
    pub const fn default_salt(self) -> u64 {
        DEFAULT_SALTS[self as usize]
    }
}

const DEFAULT_SALTS: [u64; 5] = [
    0x9E37_79B9_7F4A_7C15,
    0xC2B2_AE3D_27D4_EB4F,
    0x1656_67B1_9E37_79F9,
    0xD6E8_FEB8_6659_FD93,
    0xFF51_AFD7_ED55_8CCD,
];

/// Multiplicative hash into `0..buckets`: the high half of `value * salt`
/// (mod 2^64), reduced modulo the bucket count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BucketFn {
    pub salt: u64,
    pub buckets: u32,
}

impl BucketFn {
    pub fn new(salt: u64, buckets: u32) -> Self {
        debug_assert!(buckets >= 1);
        BucketFn { salt, buckets }
    }

    #[inline]
    pub fn bucket(&self, value: u32) -> usize {
        let mixed = (value as u64).wrapping_mul(self.salt) >> 32;
        (mixed % self.buckets.max(1) as u64) as usize
    }
}

/// Bucket of `value` under the default salt of `level`.
#[inline]
pub fn hash_bucket(value: u32, level: HashLevel, buckets: u32) -> usize {
    BucketFn::new(level.default_salt(), buckets).bucket(value)
}

/// Bucket counts for every hash level plus their salts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashPlan {
    #[serde(rename = "H_bkt")]
    pub coarse_h: u32,
    #[serde(rename = "G_bkt")]
    pub coarse_g: u32,
    #[serde(rename = "h_bkt")]
    pub fine_h: u32,
    #[serde(rename = "g_bkt")]
    pub fine_g: u32,
    #[serde(rename = "f_bkt")]
    pub fine_f: u32,
    #[serde(default = "default_salts")]
    pub salt_per_level: [u64; 5],
}

fn default_salts() -> [u64; 5] {
    DEFAULT_SALTS
}

impl Default for HashPlan {
    fn default() -> Self {
        HashPlan::new(1, 1, 1, 1, 1)
    }
}

impl HashPlan {
    pub fn new(coarse_h: u32, coarse_g: u32, fine_h: u32, fine_g: u32, fine_f: u32) -> Self {
        HashPlan {
            coarse_h,
            coarse_g,
            fine_h,
            fine_g,
            fine_f,
            salt_per_level: DEFAULT_SALTS,
        }
    }

    pub fn buckets(&self, level: HashLevel) -> u32 {
        match level {
            HashLevel::CoarseH => self.coarse_h,
            HashLevel::CoarseG => self.coarse_g,
            HashLevel::FineH => self.fine_h,
            HashLevel::FineG => self.fine_g,
            HashLevel::FineF => self.fine_f,
        }
    }

    pub fn salt(&self, level: HashLevel) -> u64 {
        self.salt_per_level[level.index()]
    }

    pub fn bucket_fn(&self, level: HashLevel) -> BucketFn {
        BucketFn::new(self.salt(level), self.buckets(level))
    }

    /// Same plan with `level` remapped to `buckets` buckets.
    pub fn with_buckets(mut self, level: HashLevel, buckets: u32) -> Self {
        match level {
            HashLevel::CoarseH => self.coarse_h = buckets,
            HashLevel::CoarseG => self.coarse_g = buckets,
            HashLevel::FineH => self.fine_h = buckets,
            HashLevel::FineG => self.fine_g = buckets,
            HashLevel::FineF => self.fine_f = buckets,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for level in HashLevel::ALL {
            if self.buckets(level) == 0 {
                return Err(Error::Infeasible(alloc::format!(
                    "bucket count for {level:?} must be at least 1"
                )));
            }
        }
        if self.salt_per_level.iter().any(|s| s % 2 == 0) {
            return Err(Error::InvalidInput("hash salts must be odd".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_bucket_is_zero() {
        assert_eq!(hash_bucket(42, HashLevel::CoarseH, 1), 0);
        assert_eq!(hash_bucket(u32::MAX, HashLevel::FineF, 1), 0);
    }

    #[test]
    fn deterministic() {
        let a = hash_bucket(42, HashLevel::CoarseH, 16);
        let b = hash_bucket(42, HashLevel::CoarseH, 16);
        assert_eq!(a, b);
        assert!(a < 16);
    }

    #[test]
    fn uniform_domain_is_balanced() {
        // Every value in 0..10^6 hashed into 64 buckets, for every level.
        for level in HashLevel::ALL {
            let mut load = vec![0u64; 64];
            for v in 0..1_000_000u32 {
                load[hash_bucket(v, level, 64)] += 1;
            }
            let max = *load.iter().max().unwrap() as f64;
            let min = *load.iter().min().unwrap() as f64;
            assert!(max / min < 1.1, "{level:?}: max/min = {}", max / min);
        }
    }

    #[test]
    fn levels_are_mutually_balanced() {
        // Two levels over the same column must not be correlated, otherwise
        // a coarse partition would only reach a few PMUs.
        let (outer, inner) = (8usize, 64usize);
        let mut joint = vec![0u64; outer * inner];
        for v in 0..200_000u32 {
            let i = hash_bucket(v, HashLevel::CoarseH, outer as u32);
            let j = hash_bucket(v, HashLevel::FineH, inner as u32);
            joint[i * inner + j] += 1;
        }
        let expected = 200_000.0 / (outer * inner) as f64;
        let chi2: f64 = joint
            .iter()
            .map(|&c| {
                let diff = c as f64 - expected;
                diff * diff / expected
            })
            .sum();
        // 511 degrees of freedom; mean 511, sd ~32.
        assert!(chi2 < 511.0 + 6.0 * 32.0, "chi2 = {chi2}");
    }

    #[test]
    fn plan_json_field_names() {
        let plan = HashPlan::new(2, 3, 64, 128, 16);
        let json = serde_json::to_value(plan).unwrap();
        for key in ["H_bkt", "G_bkt", "h_bkt", "g_bkt", "f_bkt", "salt_per_level"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: HashPlan = serde_json::from_value(json).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn zero_buckets_rejected() {
        assert!(HashPlan::new(0, 1, 1, 1, 1).validate().is_err());
        assert!(HashPlan::new(1, 1, 1, 1, 1).validate().is_ok());
    }
}
