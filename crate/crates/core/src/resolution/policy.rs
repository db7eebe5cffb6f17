use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::AccountId;
use crate::units::{Amount, Price, SCALE};

pub const PPM: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceSource {
    /// Last executed order-book trade.
    Clob,
    /// Spot price of the deepest pool on the label.
    Amm,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoResolveRule {
    pub threshold: Price,
    /// Ticks the price must stay at or above the threshold.
    pub duration: u64,
    pub source: PriceSource,
    /// Dispute window of the emitted proposal.
    pub window: u64,
    /// Bond a disputer must post against the emitted proposal.
    pub dispute_bond: Amount,
    /// Ticks after market creation after which the chain moves on without a trigger.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout: Option<u64>,
}

impl Default for AutoResolveRule {
    fn default() -> Self {
        Self {
            threshold: 990_000,
            duration: 10,
            source: PriceSource::Clob,
            window: 20,
            dispute_bond: 0,
            timeout: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Electorate {
    All,
    Subset(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Secrecy {
    Open,
    CommitReveal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoteParams {
    pub electorate: Electorate,
    pub secrecy: Secrecy,
    pub commit_period: u64,
    pub reveal_period: u64,
    /// Revealed stake needed, as parts per million of the electorate's stake.
    pub quorum_ppm: u64,
    /// Share of revealed stake the winner needs; zero means plain plurality.
    pub pass_threshold_ppm: u64,
    pub slash_ppm: u64,
}

impl Default for VoteParams {
    fn default() -> Self {
        Self {
            electorate: Electorate::All,
            secrecy: Secrecy::CommitReveal,
            commit_period: 10,
            reveal_period: 10,
            quorum_ppm: 330_000,
            pass_threshold_ppm: 0,
            slash_ppm: 200_000,
        }
    }
}

fn default_window() -> u64 {
    20
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    AutoResolve(AutoResolveRule),
    Optimistic {
        bond: Amount,
        #[serde(default = "default_window")]
        window: u64,
    },
    /// A trusted resolver. As the last stage it decides outright; earlier in
    /// the chain a nonzero `window` turns its ruling into a disputable proposal.
    Arbiter {
        allowlist: Vec<AccountId>,
        #[serde(default)]
        window: u64,
        #[serde(default)]
        dispute_bond: Amount,
    },
    Vote(VoteParams),
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::AutoResolve(_) => "auto_resolve",
            Stage::Optimistic { .. } => "optimistic",
            Stage::Arbiter { .. } => "arbiter",
            Stage::Vote(_) => "vote",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionPolicy {
    pub id: String,
    pub stages: Vec<Stage>,
}

impl ResolutionPolicy {
    /// A single trusted arbiter.
    pub fn arbiter(id: &str, arbiter: &str) -> Self {
        Self {
            id: id.into(),
            stages: vec![Stage::Arbiter { allowlist: vec![arbiter.into()], window: 0, dispute_bond: 0 }],
        }
    }

    /// Optimistic proposal, escalating to a vote, with an arbiter fallback.
    pub fn optimistic(id: &str, bond: Amount, window: u64, arbiter: &str) -> Self {
        Self {
            id: id.into(),
            stages: vec![
                Stage::Optimistic { bond, window },
                Stage::Vote(VoteParams::default()),
                Stage::Arbiter { allowlist: vec![arbiter.into()], window: 0, dispute_bond: 0 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EngineError::InvalidPolicy(format!("{}: {msg}", self.id)));
        let Some(last) = self.stages.last() else {
            return bad("empty chain".into());
        };
        match last {
            Stage::Arbiter { window: 0, .. } => {}
            Stage::Arbiter { .. } => return bad("the terminal arbiter cannot open a dispute window".into()),
            _ => return bad("the chain must end with an arbiter".into()),
        }
        for (i, s) in self.stages.iter().enumerate() {
            match s {
                Stage::AutoResolve(r) => {
                    if r.threshold <= SCALE / 2 || r.threshold >= SCALE {
                        return bad(format!("stage {i}: threshold {} outside (0.5, 1)", r.threshold));
                    }
                    if r.duration == 0 || r.window == 0 {
                        return bad(format!("stage {i}: duration and window must be positive"));
                    }
                }
                Stage::Optimistic { window, .. } => {
                    if *window == 0 {
                        return bad(format!("stage {i}: dispute window must be positive"));
                    }
                }
                Stage::Arbiter { allowlist, .. } => {
                    if allowlist.is_empty() {
                        return bad(format!("stage {i}: empty arbiter allowlist"));
                    }
                }
                Stage::Vote(v) => {
                    if v.quorum_ppm == 0 || v.quorum_ppm > PPM || v.slash_ppm > PPM || v.pass_threshold_ppm > PPM {
                        return bad(format!("stage {i}: fractions must lie in [0, 1] and quorum above 0"));
                    }
                    if v.commit_period == 0 || (v.secrecy == Secrecy::CommitReveal && v.reveal_period == 0) {
                        return bad(format!("stage {i}: voting periods must be positive"));
                    }
                    if v.electorate == Electorate::Subset(0) {
                        return bad(format!("stage {i}: empty electorate subset"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_must_end_with_arbiter() {
        ResolutionPolicy::optimistic("p", 100, 20, "judge").validate().unwrap();
        let p = ResolutionPolicy { id: "x".into(), stages: vec![Stage::Optimistic { bond: 1, window: 5 }] };
        assert!(matches!(p.validate(), Err(EngineError::InvalidPolicy(_))));
        let p = ResolutionPolicy { id: "x".into(), stages: vec![] };
        assert!(p.validate().is_err());
    }

    #[test]
    fn stage_json_shape() {
        let s: Stage = serde_json::from_str(r#"{"stage":"vote","electorate":{"subset":3},"quorum_ppm":500000}"#).unwrap();
        let Stage::Vote(v) = s else { panic!("not a vote") };
        assert_eq!((v.electorate, v.quorum_ppm, v.slash_ppm), (Electorate::Subset(3), 500_000, 200_000));
        let s: Stage = serde_json::from_str(r#"{"stage":"auto_resolve","duration":3}"#).unwrap();
        assert_eq!(s, Stage::AutoResolve(AutoResolveRule { duration: 3, ..AutoResolveRule::default() }));
    }
}
