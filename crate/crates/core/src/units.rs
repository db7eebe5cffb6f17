//! Fixed-point helpers.
//!
//! Numeraire amounts are integer micro-units (10^6 per whole unit). Share
//! quantities use the same scale: one share-micro-unit of a label whose payoff
//! is `SCALE` redeems for exactly one numeraire micro-unit.

/// Micro-units per whole unit of numeraire (and per whole share).
pub const SCALE: u64 = 1_000_000;

/// Numeraire amount in micro-units.
pub type Amount = u64;

/// Share quantity in share-micro-units.
pub type Qty = u64;

/// Price or per-share payoff in numeraire micro-units per whole share.
pub type Price = u64;

pub fn mul_div_floor(a: u64, b: u64, d: u64) -> u64 {
    ((a as u128 * b as u128) / d as u128) as u64
}

pub fn mul_div_ceil(a: u64, b: u64, d: u64) -> u64 {
    let n = a as u128 * b as u128;
    n.div_ceil(d as u128) as u64
}

/// Numeraire paid for `qty` shares at `per_share` micro-units per share, floored.
pub fn value_floor(qty: Qty, per_share: Price) -> Amount {
    mul_div_floor(qty, per_share, SCALE)
}

/// Same as [`value_floor`] but rounded up; used for liabilities.
pub fn value_ceil(qty: Qty, per_share: Price) -> Amount {
    mul_div_ceil(qty, per_share, SCALE)
}

/// Rounds to the nearest integer, ties to even.
pub fn round_half_even(x: f64) -> i128 {
    x.round_ties_even() as i128
}

/// Rounds the rational `num / den` (den > 0) to the nearest integer, ties to even.
pub fn div_round_half_even(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => {
            if q % 2 == 0 {
                q
            } else {
                q + 1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(2.5), 2);
        assert_eq!(round_half_even(3.5), 4);
        assert_eq!(round_half_even(-2.5), -2);
        assert_eq!(round_half_even(2.4999), 2);
        assert_eq!(div_round_half_even(5, 2), 2);
        assert_eq!(div_round_half_even(7, 2), 4);
        assert_eq!(div_round_half_even(-7, 2), -4);
        assert_eq!(div_round_half_even(498, 1), 498);
    }

    #[test]
    fn value_rounding() {
        assert_eq!(value_floor(3, 500_000), 1);
        assert_eq!(value_ceil(3, 500_000), 2);
        assert_eq!(value_floor(10 * SCALE, 498_000), 4_980_000);
    }
}
