//! Canonical JSON view of engine state. Object keys are sorted and no
//! floating-point values appear, so equal states serialize to equal bytes.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::engine::Engine;
use crate::venue::clob::Depth;

pub const SNAPSHOT_SCHEMA: &str = "depm-snapshot/1";

pub fn snapshot(e: &Engine) -> Value {
    let mut markets = serde_json::Map::new();
    for m in e.markets.values() {
        let id = m.id();
        let depth: BTreeMap<&str, Depth> = m
            .labels()
            .iter()
            .map(|l| (l.as_str(), e.clob.depth(id, l)))
            .filter(|(_, d)| !d.bids.is_empty() || !d.asks.is_empty())
            .collect();
        let register = e.resolution.register(id);
        let entry = json!({
            "spec": m.spec,
            "policy": e.resolution.policies.get(&m.spec.resolution_policy),
            "clarifications": e.clarifications.get(id).cloned().unwrap_or_default(),
            "register": register,
            "resolution": e.resolution.markets.get(id),
            "book": e.ledger.book(id).cloned().unwrap_or_default(),
            "solvency": e.ledger.solvency(m, e.outcome(id)),
            "depth": depth,
            "last_trade": e.clob.last_trade.get(id),
            "arbitrage": e.clob.detect_arbitrage(m),
        });
        markets.insert(id.to_string(), entry);
    }
    json!({
        "schema": SNAPSHOT_SCHEMA,
        "tick": e.tick,
        "seed": e.seed,
        "config": e.config,
        "halted": e.halted,
        "issued": { "cash": e.ledger.cash_issued, "gov": e.ledger.gov_issued },
        "accounts": e.ledger.accounts,
        "markets": markets,
        "proposals": e.resolution.proposals,
        "orders": e.clob.orders,
        "intents": e.clob.intents,
        "pools": e.amm.pools,
        "lmsr": e.lmsr.by_market,
        "seeded": e.seeded,
    })
}

pub fn canonical(v: &Value) -> String {
    serde_json::to_string(v).expect("json values always serialize")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn snapshot_digest(e: &Engine) -> String {
    sha256_hex(canonical(&snapshot(e)).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::market::MarketSpec;
    use crate::resolution::ResolutionPolicy;

    #[test]
    fn equal_histories_give_equal_bytes() {
        let build = || {
            let mut e = Engine::new(1, EngineConfig::default());
            e.faucet(&"a".into(), 5_000_000, 0).unwrap();
            e.define_policy(ResolutionPolicy::arbiter("p", "j")).unwrap();
            e.create_market(MarketSpec::wta("w", &["X", "Y"], "p")).unwrap();
            e.split(&"a".into(), &"w".into(), None, 1_000_000).unwrap();
            e
        };
        let (a, b) = (build(), build());
        assert_eq!(canonical(&snapshot(&a)), canonical(&snapshot(&b)));
        assert_eq!(snapshot_digest(&a).len(), 64);
        let s = snapshot(&a);
        assert_eq!(s["markets"]["w"]["book"]["supplies"]["X"], 1_000_000);
    }
}
