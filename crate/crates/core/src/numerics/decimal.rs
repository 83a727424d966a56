use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecimalError {
    #[error("empty decimal string")]
    Empty,
    #[error("invalid character {0:?} in decimal string")]
    InvalidChar(char),
    #[error("more than {0} fractional digits")]
    TooManyDecimals(u32),
    #[error("decimal value out of range")]
    Overflow,
}

pub(super) fn format(raw: u128, decimals: u32) -> String {
    let scale = 10u128.pow(decimals);
    format!("{}.{:0width$}", raw / scale, raw % scale, width = decimals as usize)
}

/// Parses `digits[.digits]` into a raw integer scaled by `10^decimals`.
pub(super) fn parse(s: &str, decimals: u32) -> Result<u128, DecimalError> {
    let s = s.trim();
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(DecimalError::Empty);
    }
    if frac_part.len() > decimals as usize {
        return Err(DecimalError::TooManyDecimals(decimals));
    }
    if let Some(c) = int_part.chars().chain(frac_part.chars()).find(|c| !c.is_ascii_digit()) {
        return Err(DecimalError::InvalidChar(c));
    }

    let scale = 10u128.pow(decimals);
    let mut int_value: u128 = 0;
    for c in int_part.bytes() {
        int_value = int_value
            .checked_mul(10)
            .and_then(|v| v.checked_add((c - b'0') as u128))
            .ok_or(DecimalError::Overflow)?;
    }
    let mut frac_value: u128 = 0;
    for c in frac_part.bytes() {
        frac_value = frac_value * 10 + (c - b'0') as u128;
    }
    frac_value *= 10u128.pow(decimals - frac_part.len() as u32);

    int_value
        .checked_mul(scale)
        .and_then(|v| v.checked_add(frac_value))
        .ok_or(DecimalError::Overflow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_fractions() {
        assert_eq!(parse("1.5", 18).unwrap(), 1_500_000_000_000_000_000);
        assert_eq!(parse("150", 18).unwrap(), 150 * 10u128.pow(18));
        assert_eq!(parse(".5", 2).unwrap(), 50);
        assert_eq!(parse("0.000000000000000001", 18).unwrap(), 1);
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(parse("", 18), Err(DecimalError::Empty));
        assert_eq!(parse(".", 18), Err(DecimalError::Empty));
        assert_eq!(parse("-1", 18), Err(DecimalError::InvalidChar('-')));
        assert_eq!(parse("1e5", 18), Err(DecimalError::InvalidChar('e')));
        assert_eq!(parse("1.2.3", 18), Err(DecimalError::InvalidChar('.')));
        assert_eq!(
            parse("0.0000000000000000001", 18),
            Err(DecimalError::TooManyDecimals(18))
        );
        assert_eq!(parse("999999999999999999999", 18), Err(DecimalError::Overflow));
    }

    #[test]
    fn format_round_trips() {
        for raw in [0u128, 1, 999, 10u128.pow(18), u128::MAX] {
            assert_eq!(parse(&format(raw, 18), 18).unwrap(), raw);
        }
    }
}
