use depm_core::engine::{Engine, EngineConfig};
use depm_core::ledger::Ledger;
use depm_core::market::{scalar_payout, Market, MarketSpec, Outcome, OutcomeArg, ScalarSpec};
use depm_core::resolution::{ballot_digest, ResolutionPolicy};
use depm_core::snapshot::{canonical, snapshot};
use depm_core::units::{value_ceil, value_floor};
use depm_core::venue::clob::Side;
use depm_core::venue::cpmm::SwapSide;
use depm_core::venue::lmsr;
use depm_core::{gadgets, AccountId, EngineError};
use proptest::prelude::*;

const U: u64 = 1_000_000;
const LOT: u64 = 10_000;

fn engine_with(spec: MarketSpec) -> (Engine, AccountId) {
    let mut e = Engine::new(0, EngineConfig::default());
    let a = AccountId::from("alice");
    e.faucet(&a, 1_000_000 * U, 0).unwrap();
    e.faucet(&AccountId::from("bob"), 1_000_000 * U, 0).unwrap();
    e.define_policy(ResolutionPolicy::arbiter("p", "judge")).unwrap();
    e.create_market(spec).unwrap();
    (e, a)
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("o{i}")).collect()
}

proptest! {
    #[test]
    fn split_merge_round_trip(n in 2usize..7, q in 1u64..1_000_000_000, kind in 0u8..3) {
        let ns = names(n);
        let refs: Vec<&str> = ns.iter().map(String::as_str).collect();
        let spec = match kind {
            0 => MarketSpec::wta("m", &refs, "p"),
            1 => MarketSpec::ynb("m", &refs, false, "p"),
            _ => MarketSpec::ynb("m", &refs, true, "p"),
        };
        let bundle = if kind == 0 { None } else { Some("o1") };
        let (mut e, a) = engine_with(spec);
        let before = canonical(&snapshot(&e));
        e.split(&a, &"m".into(), bundle, q).unwrap();
        e.merge(&a, &"m".into(), bundle, q).unwrap();
        prop_assert_eq!(canonical(&snapshot(&e)), before);
    }

    #[test]
    fn merge_needs_every_leg(q in 2u64..1_000_000, short in 1u64..1_000) {
        let (mut e, a) = engine_with(MarketSpec::wta("m", &["A", "B", "C"], "p"));
        let m = "m".into();
        e.split(&a, &m, None, q).unwrap();
        e.transfer_shares(&a, &"bob".into(), &m, "B", short.min(q)).unwrap();
        let err = e.merge(&a, &m, None, q).unwrap_err();
        prop_assert!(matches!(err, EngineError::IncompleteSet { .. }), "unexpected error {:?}", err);
    }

    /// Payoff of every holding is unchanged by a negative-risk conversion, for every outcome.
    #[test]
    fn neg_risk_conversion_preserves_payoffs(n in 2usize..9, k in 0usize..8, q in 1u64..100, all_but in any::<bool>()) {
        let k = k % n;
        let ns = names(n);
        let refs: Vec<&str> = ns.iter().map(String::as_str).collect();
        let market = Market::new(MarketSpec::ynb("m", &refs, true, "p")).unwrap();
        let mut l = Ledger::default();
        let a = AccountId::from("a");
        l.mint_cash(&a, 1_000 * U).unwrap();
        for b in &ns {
            gadgets::split(&mut l, &market, &a, Some(b), 100 * U).unwrap();
        }
        let value = |l: &Ledger, w: &str| -> u128 {
            let o = Outcome::Categorical(w.to_string());
            let shares: u128 = market
                .labels()
                .iter()
                .map(|lab| l.shares(&a, market.id(), lab) as u128 * market.payoff(lab, &o).unwrap() as u128)
                .sum();
            l.cash(&a) as u128 * U as u128 + shares
        };
        let before: Vec<u128> = ns.iter().map(|w| value(&l, w)).collect();
        if all_but {
            gadgets::convert_no_all_but(&mut l, &market, &a, &ns[k], q * U).unwrap();
        } else {
            gadgets::convert_no(&mut l, &market, &a, &ns[k], q * U).unwrap();
        }
        let after: Vec<u128> = ns.iter().map(|w| value(&l, w)).collect();
        prop_assert_eq!(before, after);
        prop_assert!(l.solvency(&market, None).solvent);
        l.check_conservation().unwrap();
    }

    #[test]
    fn redemption_rounding_brackets_exact(q in 0u64..u64::MAX / 2, r in 0u64..=U) {
        let exact = q as u128 * r as u128;
        let lo = value_floor(q, r) as u128 * U as u128;
        let hi = value_ceil(q, r) as u128 * U as u128;
        prop_assert!(lo <= exact && exact <= hi && hi - lo <= U as u128);
    }

    #[test]
    fn scalar_payout_is_monotone_and_bounded(a in -1_000_000i64..0, w in 1i64..10_000_000, x in -20_000_000i64..20_000_000, dx in 0i64..1_000_000, precision in 0u32..7) {
        let s = ScalarSpec { a, b: a + w, precision, quantity: String::new() };
        let p = scalar_payout(&s, x);
        let p2 = scalar_payout(&s, x + dx);
        prop_assert!(p <= U && p <= p2);
        // a multiple of the precision grid
        prop_assert_eq!(p % 10u64.pow(6 - precision.min(6)), 0);
    }

    /// Constant product never falls across swaps, fees or not.
    #[test]
    fn cpmm_invariant_never_decreases(fee in 0u64..300, trades in prop::collection::vec((any::<bool>(), 1u64..50), 1..30)) {
        let (mut e, a) = engine_with(MarketSpec::binary("m", "p"));
        let m = "m".into();
        e.split(&a, &m, None, 1_000 * U).unwrap();
        let pool = e.amm_create(&a, &m, "YES", 200 * U, 100 * U, fee).unwrap();
        let mut k = e.amm.pools[&pool].k();
        for (buy, amt) in trades {
            let side = if buy { SwapSide::Buy } else { SwapSide::Sell };
            if e.amm_swap(&a, &pool, side, amt * U / 7).is_ok() {
                let k2 = e.amm.pools[&pool].k();
                prop_assert!(k2 >= k, "k fell from {} to {}", k, k2);
                k = k2;
            }
        }
    }

    /// LMSR cost of a path depends only on its endpoints, up to rounding.
    #[test]
    fn lmsr_cost_is_path_independent(b in 1u64..500, steps in prop::collection::vec((0usize..3, -20i64..40), 1..20)) {
        let bf = b as f64 * U as f64;
        let mut q = vec![0f64; 3];
        let mut paid = 0f64;
        for (i, d) in &steps {
            let mut next = q.clone();
            next[*i] += (*d as f64) * U as f64;
            paid += lmsr::cost(bf, &next) - lmsr::cost(bf, &q);
            q = next;
        }
        let direct = lmsr::cost(bf, &q) - lmsr::cost(bf, &[0.0; 3]);
        prop_assert!((paid - direct).abs() <= 1e-6 * (1.0 + direct.abs()));
        let p = lmsr::prices(bf, &q);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ballot_digest_separates_fields(o in "[a-z]{1,6}", s in "[a-z0-9]{0,6}", v in "[a-z]{1,6}") {
        let d = ballot_digest(&o, &s, &v);
        prop_assert_eq!(d.len(), 64);
        // moving a character across the field boundary changes the digest
        let shifted = format!("{o}{}", s.chars().next().map(String::from).unwrap_or_default());
        if !s.is_empty() {
            prop_assert_ne!(d.clone(), ballot_digest(&shifted, &s[1..], &v));
        }
        prop_assert_ne!(d, ballot_digest(&o, &s, &format!("{v}x")));
    }

    /// Any mix of resting orders, fills and cancels keeps escrow exactly funded
    /// and cancelling everything returns the book to its pre-trade holdings.
    #[test]
    fn order_book_escrow_round_trip(orders in prop::collection::vec((any::<bool>(), any::<bool>(), 1u64..100, 1u64..50), 1..25)) {
        let (mut e, a) = engine_with(MarketSpec::binary("m", "p"));
        let m = "m".into();
        let b = AccountId::from("bob");
        e.split(&a, &m, None, 500 * U).unwrap();
        e.split(&b, &m, None, 500 * U).unwrap();
        for (who_a, bid, p, q) in orders {
            let who = if who_a { &a } else { &b };
            let side = if bid { Side::Bid } else { Side::Ask };
            let _ = e.place_order(who, &m, "YES", side, p * 10_000, q * LOT * 10);
        }
        let ids: Vec<(u64, AccountId)> = e.clob.orders.values().map(|o| (o.id, o.owner.clone())).collect();
        for (id, owner) in ids {
            e.cancel_order(&owner, id).unwrap();
        }
        prop_assert!(e.halted.is_none());
        prop_assert_eq!(e.ledger.cash(&depm_core::venue::clob::escrow_account()), 0);
        // trades only move shares and cash between the two
        let yes = e.ledger.shares(&a, &m, "YES") + e.ledger.shares(&b, &m, "YES");
        prop_assert_eq!(yes, 1_000 * U);
        let cash = e.ledger.cash(&a) as u128 + e.ledger.cash(&b) as u128;
        prop_assert_eq!(cash, 2 * (1_000_000 - 500) as u128 * U as u128);
    }

    /// Redeeming every share after any ruling never exceeds the collateral.
    #[test]
    fn settlement_pays_within_treasury(n in 2usize..6, splits in prop::collection::vec((0usize..6, 1u64..50), 1..10), w in 0usize..6) {
        let ns = names(n);
        let refs: Vec<&str> = ns.iter().map(String::as_str).collect();
        let (mut e, a) = engine_with(MarketSpec::ynb("m", &refs, true, "p"));
        let m = "m".into();
        for (k, q) in &splits {
            e.split(&a, &m, Some(&ns[k % n]), q * U).unwrap();
            let _ = e.convert_no(&a, &m, &ns[(k + 1) % n], q * U / 2);
        }
        e.arbiter_resolve(&"judge".into(), &m, &OutcomeArg::Name(ns[w % n].clone())).unwrap();
        let labels: Vec<String> = e.market(&m).unwrap().labels().to_vec();
        for l in labels {
            let q = e.ledger.shares(&a, &m, &l);
            if q > 0 {
                e.redeem(&a, &m, &l, q).unwrap();
            }
        }
        let r = e.surplus_report(&m).unwrap();
        prop_assert_eq!(r.outstanding_liability, 0);
        prop_assert_eq!(e.ledger.cash(&a), 1_000_000 * U - r.treasury);
    }
}

#[test]
fn scalar_example_payout() {
    let spec = ScalarSpec { a: 0, b: 100 * U as i64, precision: 3, quantity: String::new() };
    assert_eq!(scalar_payout(&spec, 49_800_000), 498_000);
}
