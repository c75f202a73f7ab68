//! Exact two-decimal rounding for reporting.
//!
//! Means, variances and efficiencies are computed as exact rationals (or from
//! exact determinants) and only rounded at the reporting boundary, using
//! round-half-to-even so that e.g. 0.875 prints as 0.88 while 1.125 prints as
//! 1.12.

use num_integer::Integer;
use num_rational::Ratio;

/// Round an exact rational to the nearest integer number of hundredths,
/// halves to even.
pub fn cents_round_half_even(value: Ratio<i128>) -> i128 {
    let scaled = value * Ratio::from_integer(100);
    let num = *scaled.numer();
    let den = *scaled.denom(); // Ratio keeps this positive
    let (q, r) = num.div_mod_floor(&den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => {
            if q.is_even() {
                q
            } else {
                q + 1
            }
        }
    }
}

/// Format a number of hundredths as a fixed two-decimal string.
pub fn format_cents(cents: i128) -> String {
    let sign = if cents < 0 { "-" } else { "" };
    let abs = cents.unsigned_abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

/// Round and format an exact rational with two decimals.
pub fn format_ratio_2dp(value: Ratio<i128>) -> String {
    format_cents(cents_round_half_even(value))
}

/// Round an f64 to hundredths, halves to even. Used for the efficiency
/// grouping key, where the value is a 100·det^(1/p)/k float.
pub fn cents_round_f64(value: f64) -> i64 {
    let scaled = value * 100.0;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let q = floor as i64;
    let up = frac > 0.5 || (frac == 0.5 && q % 2 != 0);
    if up {
        q + 1
    } else {
        q
    }
}
