//! Stake-weighted vote rounds: electorate sampling, ballots and tallying.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ids::{AccountId, MarketId};
use crate::market::Outcome;
use crate::resolution::policy::{Electorate, Secrecy, VoteParams, PPM};
use crate::units::Amount;

/// Commitment to a ballot: `sha256(outcome 0x00 salt 0x00 voter)`, hex.
pub fn ballot_digest(outcome: &str, salt: &str, voter: &str) -> String {
    let mut h = Sha256::new();
    h.update(outcome.as_bytes());
    h.update([0]);
    h.update(salt.as_bytes());
    h.update([0]);
    h.update(voter.as_bytes());
    hex::encode(h.finalize())
}

/// Seed for the electorate sample of one round.
pub fn round_seed(seed: u64, market: &MarketId, round: u32) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(market.as_str().as_bytes());
    h.update([0]);
    h.update(round.to_le_bytes());
    h.finalize().into()
}

/// Draws `size` stakers without replacement (all of them if fewer).
pub fn sample_electorate(stakers: &BTreeMap<AccountId, Amount>, size: usize, seed: [u8; 32]) -> BTreeMap<AccountId, Amount> {
    let mut pool: Vec<(&AccountId, &Amount)> = stakers.iter().collect();
    let mut rng = ChaCha8Rng::from_seed(seed);
    let take = size.min(pool.len());
    // Partial Fisher-Yates over the sorted candidate list.
    for i in 0..take {
        let j = rng.gen_range(i as u64..pool.len() as u64) as usize;
        pool.swap(i, j);
    }
    pool.into_iter().take(take).map(|(a, s)| (a.clone(), *s)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRound {
    pub number: u32,
    pub stage: usize,
    pub params: VoteParams,
    /// Stake of each enrolled voter at round opening.
    pub electorate: BTreeMap<AccountId, Amount>,
    pub total_stake: Amount,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_seed: Option<String>,
    pub opened: u64,
    pub commit_deadline: u64,
    pub reveal_deadline: u64,
    pub commitments: BTreeMap<AccountId, String>,
    pub revealed: BTreeMap<AccountId, Outcome>,
    pub void: Vec<AccountId>,
    pub pot_funders: BTreeMap<AccountId, Amount>,
}

impl VoteRound {
    pub fn open(
        number: u32,
        stage: usize,
        params: &VoteParams,
        stakers: &BTreeMap<AccountId, Amount>,
        seed: u64,
        market: &MarketId,
        now: u64,
    ) -> Self {
        let (electorate, sample_seed) = match params.electorate {
            Electorate::All => (stakers.clone(), None),
            Electorate::Subset(m) => {
                let s = round_seed(seed, market, number);
                (sample_electorate(stakers, m, s), Some(hex::encode(s)))
            }
        };
        let commit_deadline = now + params.commit_period;
        Self {
            number,
            stage,
            params: params.clone(),
            total_stake: electorate.values().sum(),
            electorate,
            sample_seed,
            opened: now,
            commit_deadline,
            // open ballots count as revealed when cast, so there is no reveal phase
            reveal_deadline: match params.secrecy {
                Secrecy::Open => commit_deadline,
                Secrecy::CommitReveal => commit_deadline + params.reveal_period,
            },
            commitments: BTreeMap::new(),
            revealed: BTreeMap::new(),
            void: Vec::new(),
            pot_funders: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TallyVerdict {
    Decided(Outcome),
    NoQuorum,
    Tie,
    BelowThreshold,
}

/// Pure tally of revealed ballots.
pub fn tally(round: &VoteRound) -> (TallyVerdict, BTreeMap<String, Amount>) {
    let stake = |a: &AccountId| round.electorate.get(a).copied().unwrap_or(0);
    let revealed: Amount = round.revealed.keys().map(stake).sum();
    let mut weights: BTreeMap<String, Amount> = BTreeMap::new();
    for (voter, o) in &round.revealed {
        *weights.entry(o.to_string()).or_default() += stake(voter);
    }
    if revealed == 0 || (revealed as u128) * (PPM as u128) < round.params.quorum_ppm as u128 * round.total_stake as u128 {
        return (TallyVerdict::NoQuorum, weights);
    }

    let scalar = round.revealed.values().next().is_some_and(|o| matches!(o, Outcome::Scalar { .. }));
    let winner = if scalar {
        // Lower stake-weighted median.
        let mut ballots: Vec<(&Outcome, Amount)> = round.revealed.iter().map(|(v, o)| (o, stake(v))).collect();
        ballots.sort();
        let mut acc: u128 = 0;
        let mut chosen = ballots[0].0;
        for (o, s) in ballots {
            acc += s as u128;
            if acc * 2 >= revealed as u128 {
                chosen = o;
                break;
            }
        }
        chosen.clone()
    } else {
        let top = weights.values().copied().max().unwrap_or(0);
        let leaders: Vec<&String> = weights.iter().filter(|(_, w)| **w == top).map(|(o, _)| o).collect();
        if leaders.len() > 1 {
            return (TallyVerdict::Tie, weights);
        }
        Outcome::Categorical(leaders[0].clone())
    };
    let support: Amount = round.revealed.iter().filter(|(_, o)| **o == winner).map(|(v, _)| stake(v)).sum();
    if (support as u128) * (PPM as u128) < round.params.pass_threshold_ppm as u128 * revealed as u128 {
        return (TallyVerdict::BelowThreshold, weights);
    }
    (TallyVerdict::Decided(winner), weights)
}
