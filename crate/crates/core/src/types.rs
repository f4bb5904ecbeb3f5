//! Shared identifier and fixed-point money types.
//!
//! All monetary state is integral: prices are ticks of $0.01 and cash is
//! cents. This keeps settlement exact so conservation checks can demand
//! equality instead of tolerances.

use serde::{Deserialize, Serialize};
use std::fmt;

pub type AssetId = u32;
pub type AccountId = u64;
pub type OrderId = u64;
pub type Qty = u64;

/// Cash amount in cents.
pub type Cents = i64;

/// Limit price as a positive number of $0.01 ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Price(i64);

impl Price {
    pub const TICK: f64 = 0.01;

    /// Constructs a price from a tick count; prices must be strictly positive.
    pub fn from_ticks(ticks: i64) -> Option<Price> {
        if ticks > 0 {
            Some(Price(ticks))
        } else {
            None
        }
    }

    pub fn ticks(self) -> i64 {
        self.0
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 * Self::TICK
    }

    /// Largest representable price at or below `dollars`.
    ///
    /// A tiny bias absorbs float error in values like `99.5 * 100` that sit
    /// on a tick boundary; returns `None` when the result is not positive.
    pub fn from_dollars_floor(dollars: f64) -> Option<Price> {
        if !dollars.is_finite() {
            return None;
        }
        Price::from_ticks((dollars * 100.0 + 1e-6).floor() as i64)
    }

    /// Smallest representable price at or above `dollars`.
    pub fn from_dollars_ceil(dollars: f64) -> Option<Price> {
        if !dollars.is_finite() {
            return None;
        }
        Price::from_ticks((dollars * 100.0 - 1e-6).ceil() as i64)
    }

    /// Cost in cents of `qty` shares at this price.
    pub fn cost(self, qty: Qty) -> Cents {
        self.0 * qty as i64
    }

    pub fn parse(s: &str) -> Option<Price> {
        Price::from_ticks(parse_cents(s)?)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_cents(self.0))
    }
}

/// Renders a cent amount as a decimal dollar string, e.g. `-1234 -> "-12.34"`.
pub fn format_cents(cents: Cents) -> String {
    let sign = if cents < 0 { "-" } else { "" };
    let abs = cents.unsigned_abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

/// Parses a decimal dollar string into cents; accepts up to two fraction digits.
pub fn parse_cents(s: &str) -> Option<Cents> {
    let (sign, rest) = match s.strip_prefix('-') {
        Some(r) => (-1i64, r),
        None => (1i64, s),
    };
    if rest.is_empty() {
        return None;
    }
    let (whole, frac) = match rest.split_once('.') {
        Some((w, f)) => (w, f),
        None => (rest, ""),
    };
    if whole.is_empty() || frac.len() > 2 || !whole.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: i64 = whole.parse().ok()?;
    let frac_cents = match frac.len() {
        0 => 0,
        1 => frac.parse::<i64>().ok()? * 10,
        _ => frac.parse::<i64>().ok()?,
    };
    Some(sign * (whole.checked_mul(100)? + frac_cents))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "buy" => Some(Side::Buy),
            "sell" => Some(Side::Sell),
            _ => None,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn price_formats_two_decimals() {
        assert_eq!(Price::from_ticks(9950).unwrap().to_string(), "99.50");
        assert_eq!(Price::from_ticks(1).unwrap().to_string(), "0.01");
        assert_eq!(Price::from_ticks(10200).unwrap().to_string(), "102.00");
    }

    #[test]
    fn price_rejects_non_positive() {
        assert!(Price::from_ticks(0).is_none());
        assert!(Price::from_ticks(-5).is_none());
        assert!(Price::parse("0.00").is_none());
    }

    #[test]
    fn price_parse_round_trips() {
        for s in ["99.50", "0.01", "102.00", "85.07"] {
            assert_eq!(Price::parse(s).unwrap().to_string(), s);
        }
        assert_eq!(Price::parse("100").unwrap().ticks(), 10000);
        assert_eq!(Price::parse("100.5").unwrap().ticks(), 10050);
    }

    #[test]
    fn dollars_rounding_is_stable_on_boundaries() {
        assert_eq!(Price::from_dollars_floor(99.5).unwrap().ticks(), 9950);
        assert_eq!(Price::from_dollars_ceil(99.5).unwrap().ticks(), 9950);
        assert_eq!(Price::from_dollars_floor(99.505).unwrap().ticks(), 9950);
        assert_eq!(Price::from_dollars_ceil(99.505).unwrap().ticks(), 9951);
        assert!(Price::from_dollars_floor(-1.0).is_none());
        assert!(Price::from_dollars_floor(f64::NAN).is_none());
    }

    #[test]
    fn cents_formatting() {
        assert_eq!(format_cents(-1234), "-12.34");
        assert_eq!(format_cents(0), "0.00");
        assert_eq!(format_cents(1500000), "15000.00");
        assert_eq!(parse_cents("-12.34"), Some(-1234));
        assert_eq!(parse_cents("15000.00"), Some(1500000));
        assert_eq!(parse_cents("5.3"), Some(530));
        assert_eq!(parse_cents(""), None);
        assert_eq!(parse_cents("1.234"), None);
        assert_eq!(parse_cents("abc"), None);
    }
}
