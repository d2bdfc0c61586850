//! Exact decimal arithmetic with six fractional digits.
//!
//! Values are stored as a scaled integer count of millionths. Addition and
//! subtraction are exact; multiplication and division round half-even back
//! to six fractional digits.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Number of fractional digits carried by every [`Decimal`].
pub const SCALE_DIGITS: u32 = 6;
const SCALE: i128 = 1_000_000;

/// Fixed-point decimal with six fractional digits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal(i128);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecimalError {
    #[error("invalid decimal literal `{0}`")]
    Invalid(String),
    #[error("decimal literal `{0}` has more than 6 fractional digits")]
    TooPrecise(String),
    #[error("decimal overflow")]
    Overflow,
}

impl Decimal {
    pub const ZERO: Decimal = Decimal(0);
    pub const ONE: Decimal = Decimal(SCALE);

    /// Builds a decimal from its raw count of millionths.
    pub const fn from_micros(micros: i128) -> Self {
        Decimal(micros)
    }

    pub const fn micros(self) -> i128 {
        self.0
    }

    pub fn from_int(value: i64) -> Self {
        Decimal(value as i128 * SCALE)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Returns the integral value if there is no fractional part.
    pub fn to_int(self) -> Option<i64> {
        if self.0 % SCALE == 0 {
            i64::try_from(self.0 / SCALE).ok()
        } else {
            None
        }
    }

    pub fn checked_add(self, rhs: Decimal) -> Option<Decimal> {
        self.0.checked_add(rhs.0).map(Decimal)
    }

    pub fn checked_sub(self, rhs: Decimal) -> Option<Decimal> {
        self.0.checked_sub(rhs.0).map(Decimal)
    }

    pub fn checked_neg(self) -> Option<Decimal> {
        self.0.checked_neg().map(Decimal)
    }

    /// Product rounded half-even to six fractional digits.
    pub fn checked_mul(self, rhs: Decimal) -> Option<Decimal> {
        let wide = self.0.checked_mul(rhs.0)?;
        Some(Decimal(div_round_half_even(wide, SCALE)?))
    }

    /// Exact product with an integer.
    pub fn checked_mul_int(self, rhs: i64) -> Option<Decimal> {
        self.0.checked_mul(rhs as i128).map(Decimal)
    }

    /// Quotient rounded half-even to six fractional digits. `None` on a zero
    /// divisor or overflow; callers distinguish the two via [`Decimal::is_zero`].
    pub fn checked_div(self, rhs: Decimal) -> Option<Decimal> {
        if rhs.0 == 0 {
            return None;
        }
        let wide = self.0.checked_mul(SCALE)?;
        Some(Decimal(div_round_half_even(wide, rhs.0)?))
    }

    pub fn checked_div_int(self, rhs: i64) -> Option<Decimal> {
        if rhs == 0 {
            return None;
        }
        Some(Decimal(div_round_half_even(self.0, rhs as i128)?))
    }

    /// Parses a percentage lexeme such as `3` or `2.5` (as written before a
    /// `%` sign) into the fraction it denotes.
    pub fn from_percent_lexeme(lexeme: &str) -> Result<Decimal, DecimalError> {
        // Parse with two extra digits of headroom, then shift by 100.
        let (negative, int_part, frac_part) = split_lexeme(lexeme)?;
        if frac_part.len() > SCALE_DIGITS as usize - 2 {
            return Err(DecimalError::TooPrecise(format!("{lexeme}%")));
        }
        let value = assemble(negative, int_part, frac_part, lexeme)?;
        Ok(Decimal(value / 100))
    }

    /// Renders with at least `min_frac` and at most six fractional digits,
    /// dropping trailing zeros beyond `min_frac`.
    pub fn format_with_min_frac(self, min_frac: usize) -> String {
        let negative = self.0 < 0;
        let abs = self.0.unsigned_abs();
        let int_part = abs / SCALE as u128;
        let frac = abs % SCALE as u128;
        let mut frac_digits = format!("{frac:06}");
        while frac_digits.len() > min_frac && frac_digits.ends_with('0') {
            frac_digits.pop();
        }
        let sign = if negative { "-" } else { "" };
        if frac_digits.is_empty() {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac_digits}")
        }
    }
}

/// Integer division of `num` by `den` rounding half to even.
pub(crate) fn div_round_half_even(num: i128, den: i128) -> Option<i128> {
    if den == 0 {
        return None;
    }
    let quot = num.checked_div(den)?;
    let rem = num % den;
    if rem == 0 {
        return Some(quot);
    }
    let twice = rem.unsigned_abs().checked_mul(2)?;
    let den_abs = den.unsigned_abs();
    let away = (num < 0) != (den < 0);
    let step = if away { -1 } else { 1 };
    match twice.cmp(&den_abs) {
        std::cmp::Ordering::Less => Some(quot),
        std::cmp::Ordering::Greater => quot.checked_add(step),
        std::cmp::Ordering::Equal => {
            if quot % 2 == 0 {
                Some(quot)
            } else {
                quot.checked_add(step)
            }
        }
    }
}

fn split_lexeme(s: &str) -> Result<(bool, &str, &str), DecimalError> {
    let invalid = || DecimalError::Invalid(s.to_string());
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(invalid());
    }
    if body.contains('.') && frac_part.is_empty() {
        return Err(invalid());
    }
    if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(invalid());
    }
    Ok((negative, int_part, frac_part))
}

fn assemble(negative: bool, int_part: &str, frac_part: &str, src: &str) -> Result<i128, DecimalError> {
    let int: i128 = int_part
        .parse()
        .map_err(|_| DecimalError::Invalid(src.to_string()))?;
    let mut frac: i128 = 0;
    for (i, b) in frac_part.bytes().enumerate() {
        frac += (b - b'0') as i128 * 10i128.pow(SCALE_DIGITS - 1 - i as u32);
    }
    let magnitude = int
        .checked_mul(SCALE)
        .and_then(|v| v.checked_add(frac))
        .ok_or(DecimalError::Overflow)?;
    Ok(if negative { -magnitude } else { magnitude })
}

impl FromStr for Decimal {
    type Err = DecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (negative, int_part, frac_part) = split_lexeme(s)?;
        if frac_part.len() > SCALE_DIGITS as usize {
            return Err(DecimalError::TooPrecise(s.to_string()));
        }
        assemble(negative, int_part, frac_part, s).map(Decimal)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format_with_min_frac(0))
    }
}
