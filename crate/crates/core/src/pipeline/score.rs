use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("not a score: {0:?}")]
    InvalidFormat(String),
    #[error("score out of range 0..10: {0:?}")]
    OutOfRange(String),
}

/// Parses `INT` or `INT SEP FRAC`: one or two integer digits, `.` or `,`,
/// one or two fraction digits. The value must lie in `[0, 10]`.
pub fn parse_score(text: &str) -> Result<f64, ScoreError> {
    let invalid = || ScoreError::InvalidFormat(text.to_string());
    let (int, frac) = match text.find(['.', ',']) {
        Some(i) => (&text[..i], Some(&text[i + 1..])),
        None => (text, None),
    };
    let digits = |s: &str| (1..=2).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || !frac.is_none_or(digits) {
        return Err(invalid());
    }
    let normalized = match frac {
        Some(f) => format!("{int}.{f}"),
        None => int.to_string(),
    };
    let value: f64 = normalized.parse().map_err(|_| invalid())?;
    if value > 10.0 {
        return Err(ScoreError::OutOfRange(text.to_string()));
    }
    Ok(value)
}
