//! The four risk levels and the rule that names discovered clusters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskLabel {
    IndependentlySafe,
    JointlySafe,
    Dangerous,
    Alert,
}

impl RiskLabel {
    pub const ALL: [RiskLabel; 4] = [
        RiskLabel::IndependentlySafe,
        RiskLabel::JointlySafe,
        RiskLabel::Dangerous,
        RiskLabel::Alert,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RiskLabel::IndependentlySafe => "independently_safe",
            RiskLabel::JointlySafe => "jointly_safe",
            RiskLabel::Dangerous => "dangerous",
            RiskLabel::Alert => "alert",
        }
    }
}

impl fmt::Display for RiskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RiskLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RiskLabel::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown risk label '{s}'")))
    }
}

/// Per-cluster medians of the raw features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub size: usize,
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
    pub ttc: f64,
}

/// Names clusters from their medians.
///
/// The two clusters with the lowest median TTC form the urgent pair; in it the
/// one closer longitudinally (smaller `|px|` median) is `Dangerous` and the other
/// `Alert`. Among the remaining two the closer one is `JointlySafe` and the other
/// `IndependentlySafe`. Exact ties fall back to cluster index.
pub fn assign_semantic_labels(profiles: &[ClusterProfile]) -> Result<Vec<RiskLabel>> {
    if profiles.len() != 4 {
        return Err(Error::invalid(format!(
            "semantic labels need exactly 4 clusters, got {}",
            profiles.len()
        )));
    }
    if profiles.iter().any(|p| !p.ttc.is_finite() || !p.px.is_finite()) {
        return Err(Error::numerical("cluster profile has a non-finite median"));
    }
    let mut by_ttc: Vec<usize> = (0..4).collect();
    by_ttc.sort_by(|&a, &b| profiles[a].ttc.total_cmp(&profiles[b].ttc).then(a.cmp(&b)));
    let closer_first = |a: usize, b: usize| {
        let (da, db) = (profiles[a].px.abs(), profiles[b].px.abs());
        if db < da || (db == da && b < a) {
            (b, a)
        } else {
            (a, b)
        }
    };
    let mut labels = vec![RiskLabel::Alert; 4];
    let (near, far) = closer_first(by_ttc[0], by_ttc[1]);
    labels[near] = RiskLabel::Dangerous;
    labels[far] = RiskLabel::Alert;
    let (near, far) = closer_first(by_ttc[2], by_ttc[3]);
    labels[near] = RiskLabel::JointlySafe;
    labels[far] = RiskLabel::IndependentlySafe;
    Ok(labels)
}
