//! Redundancy Overall Requirement: the summed sender rate overhead needed
//! to ride out the failure of each footprint link, one at a time.
//!
//! A failed link with load `r` causes a loss rate of `r` at the receiver.
//! Links below the static tolerance `t` cost nothing extra; links carrying
//! the whole flow cannot be protected at all and are listed separately.

use serde::{Deserialize, Serialize};

use crate::fecsizing::{FecError, FecSizer};
use crate::lpcore::EPS_LOAD;
use crate::netmodel::{FlowPattern, LinkId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RorMode {
    /// Short-block FEC sized by the binomial failure model.
    Realtime,
    /// Large-block FEC at rate `1 / (1 − p)`.
    Offline,
}

impl RorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RorMode::Realtime => "realtime",
            RorMode::Offline => "offline",
        }
    }
}

impl std::str::FromStr for RorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "realtime" => Ok(RorMode::Realtime),
            "offline" => Ok(RorMode::Offline),
            other => Err(format!(
                "unknown mode '{other}' (expected realtime or offline)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RorReport {
    pub mode: RorMode,
    pub total: f64,
    /// `(link, overhead)` for every link with `t ≤ r(l) < 1`.
    pub contributions: Vec<(LinkId, f64)>,
    pub skipped_full_load: Vec<LinkId>,
    pub below_tolerance: usize,
}

enum Class {
    Unused,
    Below,
    Contributes,
    Full,
}

fn classify(r: f64, t: f64) -> Class {
    if r <= EPS_LOAD {
        Class::Unused
    } else if r >= 1.0 - EPS_LOAD {
        Class::Full
    } else if r < t {
        Class::Below
    } else {
        Class::Contributes
    }
}

fn rate(
    pattern: &FlowPattern,
    mode: RorMode,
    t: f64,
    mut overhead: impl FnMut(f64) -> Result<f64, FecError>,
) -> Result<RorReport, FecError> {
    let mut report = RorReport {
        mode,
        total: 0.0,
        contributions: Vec::new(),
        skipped_full_load: Vec::new(),
        below_tolerance: 0,
    };
    for (l, &r) in pattern.loads.iter().enumerate() {
        match classify(r, t) {
            Class::Unused => {}
            Class::Below => report.below_tolerance += 1,
            Class::Full => report.skipped_full_load.push(l),
            Class::Contributes => {
                let c = overhead(r)?;
                report.contributions.push((l, c));
            }
        }
    }
    report.total = report.contributions.iter().map(|&(_, c)| c).sum();
    Ok(report)
}

/// Real-time ROR: `Σ FEC_r / FEC_t − 1` over links with `t ≤ r < 1`.
pub fn ror_realtime(pattern: &FlowPattern, sizer: &FecSizer) -> Result<RorReport, FecError> {
    let t = sizer.profile().t;
    rate(pattern, RorMode::Realtime, t, |r| {
        Ok(sizer.rate_increase(r)?.overhead())
    })
}

/// Large-block ROR: `Σ (1 − t) / (1 − r) − 1` over links with `t ≤ r < 1`.
pub fn ror_offline(pattern: &FlowPattern, t: f64) -> Result<RorReport, FecError> {
    if !(0.0..1.0).contains(&t) {
        return Err(FecError::BadTolerance(t));
    }
    rate(pattern, RorMode::Offline, t, |r| {
        Ok((1.0 - t) / (1.0 - r) - 1.0)
    })
}
