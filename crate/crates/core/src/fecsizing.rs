//! FEC block sizing under an MDS erasure model.
//!
//! A block of `N` packets carries `M` source packets and decodes iff at
//! least `M` packets arrive. With independent losses at rate `p` the
//! decoding failure probability is the binomial upper tail
//! `P(losses ≥ N − M + 1)`. `FEC_p` is the smallest `N` whose failure
//! probability does not exceed the target decoding error rate.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

/// Relative slack on the `δ ≤ DER` test; exact ties such as `0.1^5 = 1e-5`
/// count as meeting the target.
pub const DER_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FecError {
    #[error("source packets per block must be at least 1")]
    ZeroSourcePackets,
    #[error("decoding error rate {0} must lie in (0, 1)")]
    BadDer(f64),
    #[error("static tolerance {0} must lie in [0, 1)")]
    BadTolerance(f64),
    #[error("loss rate {0} must lie in [0, 1)")]
    BadLossRate(f64),
    #[error("no finite block size reaches the target at loss rate {0}")]
    Unreachable(f64),
}

/// Source packets per block, target decoding error rate, and static
/// tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FecProfile {
    pub m: u32,
    pub der: f64,
    pub t: f64,
}

impl FecProfile {
    pub fn new(m: u32, der: f64, t: f64) -> Result<Self, FecError> {
        if m == 0 {
            return Err(FecError::ZeroSourcePackets);
        }
        if !(der > 0.0 && der < 1.0) {
            return Err(FecError::BadDer(der));
        }
        if !(0.0..1.0).contains(&t) {
            return Err(FecError::BadTolerance(t));
        }
        Ok(Self { m, der, t })
    }
}

/// Probability that a block of `n` packets holding `m` source packets
/// cannot be decoded when each packet is lost independently with
/// probability `p`.
///
/// The tail terms are summed in log space, largest first.
pub fn decoding_failure_prob(n: u32, m: u32, p: f64) -> f64 {
    assert!(n >= m && m >= 1, "need n >= m >= 1, got n={n}, m={m}");
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let first = (n - m + 1) as u64;
    let n64 = n as u64;
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let terms: Vec<f64> = (first..=n64)
        .map(|k| ln_binomial(n64, k) + k as f64 * ln_p + (n64 - k) as f64 * ln_q)
        .collect();
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = terms.iter().map(|&t| (t - peak).exp()).sum();
    (peak + sum.ln()).exp().min(1.0)
}

/// Smallest `N ≥ M` with failure probability at most `DER`, found by
/// increasing `N` one packet at a time.
pub fn fec_block_size(profile: &FecProfile, p: f64) -> Result<u32, FecError> {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return Err(FecError::BadLossRate(p));
    }
    if p >= 1.0 {
        return Err(FecError::Unreachable(p));
    }
    let m = profile.m;
    let target = profile.der * (1.0 + DER_REL_TOL);
    let mut n = m;
    while decoding_failure_prob(n, m, p) > target {
        n = n.checked_add(1).ok_or(FecError::Unreachable(p))?;
    }
    Ok(n)
}

/// Asymptotic large-block rate factor `1 / (1 − p)`.
pub fn large_block_rate(p: f64) -> Result<f64, FecError> {
    if p.is_nan() || !(0.0..1.0).contains(&p) {
        return Err(FecError::BadLossRate(p));
    }
    Ok(1.0 / (1.0 - p))
}

/// Block sizes at a loss rate and at the profile's static tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RateIncrease {
    pub fec_p: u32,
    pub fec_t: u32,
}

impl RateIncrease {
    pub fn overhead(&self) -> f64 {
        self.fec_p as f64 / self.fec_t as f64 - 1.0
    }
}

/// Memoised block sizes for one profile; safe to share between threads.
/// Keys are the exact bit patterns of the loss rates.
#[derive(Debug)]
pub struct FecSizer {
    profile: FecProfile,
    fec_t: u32,
    memo: RwLock<HashMap<u64, u32>>,
}

impl FecSizer {
    pub fn new(profile: FecProfile) -> Result<Self, FecError> {
        let fec_t = fec_block_size(&profile, profile.t)?;
        Ok(Self {
            profile,
            fec_t,
            memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn profile(&self) -> &FecProfile {
        &self.profile
    }

    pub fn fec_t(&self) -> u32 {
        self.fec_t
    }

    pub fn block_size(&self, p: f64) -> Result<u32, FecError> {
        let key = p.to_bits();
        if let Some(&n) = self.memo.read().expect("memo lock").get(&key) {
            return Ok(n);
        }
        let n = fec_block_size(&self.profile, p)?;
        self.memo.write().expect("memo lock").insert(key, n);
        Ok(n)
    }

    pub fn rate_increase(&self, p: f64) -> Result<RateIncrease, FecError> {
        Ok(RateIncrease {
            fec_p: self.block_size(p)?,
            fec_t: self.fec_t,
        })
    }
}

/// `FEC_p` and `FEC_t` for one loss rate, without memoisation.
pub fn rate_increase(profile: &FecProfile, p: f64) -> Result<RateIncrease, FecError> {
    Ok(RateIncrease {
        fec_p: fec_block_size(profile, p)?,
        fec_t: fec_block_size(profile, profile.t)?,
    })
}
