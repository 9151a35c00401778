//! Exact rational arithmetic helpers.
//!
//! Relevance values, cohesion, coupling and slice aggregates are all kept as
//! [`Rational`] so that rankings never depend on floating-point summation
//! order. Conversion to decimal text happens only at the reporting edge.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

/// Builds `num / den` as an exact rational. Panics if `den == 0`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses a plain decimal literal (`"0.7"`, `"-12.125"`, `"3"`, `"1e-3"`)
/// into an exact rational.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = if all_digits.is_empty() {
        BigInt::zero()
    } else {
        all_digits.parse().ok()?
    };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let pow = BigInt::from(10u32).pow(scale.unsigned_abs());
    Some(if scale >= 0 {
        Rational::from_integer(numer * pow)
    } else {
        Rational::new(numer, pow)
    })
}

/// Exact rational for an `f64` read from a text document.
///
/// Uses the shortest round-trip decimal representation, so `0.7` becomes
/// exactly `7/10` rather than the nearest binary fraction.
pub fn from_f64(value: f64) -> Option<Rational> {
    if !value.is_finite() {
        return None;
    }
    parse_decimal(&format!("{value}"))
}

/// Rounds half-to-even at `places` decimal digits and renders the result
/// with exactly that many digits after the point.
pub fn to_decimal(value: &Rational, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = value * Rational::from_integer(scale.clone());
    let negative = scaled.is_negative();
    let abs = scaled.abs();
    let (quot, rem) = abs.numer().div_rem(abs.denom());
    let twice_rem: BigInt = rem * 2;
    let rounded = match twice_rem.cmp(abs.denom()) {
        std::cmp::Ordering::Less => quot,
        std::cmp::Ordering::Greater => quot + 1,
        std::cmp::Ordering::Equal => {
            if quot.is_even() {
                quot
            } else {
                quot + 1
            }
        }
    };
    let (whole, frac) = rounded.div_rem(&scale);
    let sign = if negative && !rounded.is_zero() { "-" } else { "" };
    if places == 0 {
        return format!("{sign}{whole}");
    }
    format!("{sign}{whole}.{:0>width$}", frac.to_string(), width = places as usize)
}

/// Four-place report rendering used by every text and machine output.
pub fn fmt4(value: &Rational) -> String {
    to_decimal(value, 4)
}

/// Four-place rounded value as `f64`, for machine documents.
pub fn round4(value: &Rational) -> f64 {
    fmt4(value).parse().unwrap_or(f64::NAN)
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Arithmetic mean; zero for an empty input.
pub fn mean<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    let mut sum = Rational::zero();
    let mut count = 0i64;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        sum
    } else {
        sum / int(count)
    }
}

pub fn is_unit_interval(value: &Rational) -> bool {
    !value.is_negative() && *value <= Rational::one()
}

/// Compact exact rendering used when a value must survive a text round trip.
///
/// Terminating decimals are written as decimals; anything else falls back to
/// the nearest `f64`.
pub fn to_exact_decimal(value: &Rational) -> Option<String> {
    let mut denom = value.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0u32;
    let mut fives = 0u32;
    while denom.is_even() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let text = to_decimal(value, places);
    if places == 0 {
        return Some(text);
    }
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    Some(trimmed.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_decimal("0.7"), Some(ratio(7, 10)));
        assert_eq!(parse_decimal("0.30"), Some(ratio(3, 10)));
        assert_eq!(parse_decimal("1"), Some(int(1)));
        assert_eq!(parse_decimal("-2.5"), Some(ratio(-5, 2)));
        assert_eq!(parse_decimal("1e-3"), Some(ratio(1, 1000)));
        assert_eq!(parse_decimal(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_decimal("abc"), None);
        assert_eq!(parse_decimal(""), None);
        assert_eq!(parse_decimal("."), None);
    }

    #[test]
    fn f64_goes_through_shortest_repr() {
        assert_eq!(from_f64(0.7), Some(ratio(7, 10)));
        assert_eq!(from_f64(0.1), Some(ratio(1, 10)));
        assert_eq!(from_f64(f64::NAN), None);
    }

    #[test]
    fn rounds_half_even() {
        assert_eq!(fmt4(&ratio(21, 40)), "0.5250");
        assert_eq!(fmt4(&ratio(1, 6)), "0.1667");
        assert_eq!(fmt4(&ratio(5, 100000)), "0.0000");
        assert_eq!(fmt4(&ratio(15, 100000)), "0.0002");
        assert_eq!(fmt4(&ratio(25, 100000)), "0.0002");
        assert_eq!(fmt4(&ratio(-1, 3)), "-0.3333");
        assert_eq!(fmt4(&ratio(-1, 100000)), "0.0000");
        assert_eq!(fmt4(&int(2)), "2.0000");
        assert_eq!(to_decimal(&ratio(5, 2), 0), "2");
    }

    #[test]
    fn exact_decimal_rendering() {
        assert_eq!(to_exact_decimal(&ratio(7, 10)).as_deref(), Some("0.7"));
        assert_eq!(to_exact_decimal(&int(1)).as_deref(), Some("1"));
        assert_eq!(to_exact_decimal(&ratio(1, 8)).as_deref(), Some("0.125"));
        assert_eq!(to_exact_decimal(&ratio(1, 3)), None);
    }

    #[test]
    fn mean_of_nothing_is_zero() {
        assert_eq!(mean([]), Rational::zero());
        assert_eq!(mean(&[int(1), int(2)]), ratio(3, 2));
    }
}
