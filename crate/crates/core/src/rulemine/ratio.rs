use num_rational::Ratio;
use thiserror::Error;

pub type Rational = Ratio<u64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid threshold `{0}`")]
pub struct ThresholdError(pub String);

/// Parses `0.85`, `17/20` or `1` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, ThresholdError> {
    let err = || ThresholdError(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| err())?;
        let d: u64 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(n, d));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.chars().all(|c| c.is_ascii_digit())
        || !frac.chars().all(|c| c.is_ascii_digit())
        || frac.len() > 18
    {
        return Err(err());
    }
    let scale = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| err())? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
    let numer = int.checked_mul(scale).and_then(|v| v.checked_add(frac)).ok_or_else(err)?;
    Ok(Ratio::new(numer, scale))
}

/// Minimum support, either as a share of the transactions or as an absolute
/// count written `k/E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinSupport {
    Count(u64),
    Fraction(Rational),
}

impl Default for MinSupport {
    fn default() -> Self {
        MinSupport::Count(2)
    }
}

impl MinSupport {
    pub fn parse(s: &str) -> Result<Self, ThresholdError> {
        let t = s.trim();
        if let Some(k) = t.strip_suffix("/E").or_else(|| t.strip_suffix("/|E|")) {
            let k: u64 = k.trim().parse().map_err(|_| ThresholdError(s.to_string()))?;
            return if k == 0 { Err(ThresholdError(s.to_string())) } else { Ok(MinSupport::Count(k)) };
        }
        let r = parse_rational(t)?;
        if r == Ratio::from_integer(0) || r > Ratio::from_integer(1) {
            return Err(ThresholdError(s.to_string()));
        }
        Ok(MinSupport::Fraction(r))
    }

    /// Smallest supporter count meeting the threshold over `n` transactions.
    pub fn min_count(&self, n: usize) -> usize {
        match *self {
            MinSupport::Count(k) => k as usize,
            MinSupport::Fraction(r) => (r * Ratio::from_integer(n as u64)).ceil().to_integer().max(1) as usize,
        }
    }
}

impl std::fmt::Display for MinSupport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MinSupport::Count(k) => write!(f, "{k}/E"),
            MinSupport::Fraction(r) => write!(f, "{r}"),
        }
    }
}

/// Confidence thresholds lie in (0, 1].
pub fn parse_confidence(s: &str) -> Result<Rational, ThresholdError> {
    let r = parse_rational(s)?;
    if r == Ratio::from_integer(0) || r > Ratio::from_integer(1) {
        return Err(ThresholdError(s.to_string()));
    }
    Ok(r)
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub(crate) mod serde_ratio {
    use super::{parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_rational("0.85").unwrap(), Ratio::new(17, 20));
        assert_eq!(parse_rational("2/3").unwrap(), Ratio::new(2, 3));
        assert_eq!(parse_rational("1").unwrap(), Ratio::from_integer(1));
        assert_eq!(parse_rational(".5").unwrap(), Ratio::new(1, 2));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_confidence("1.5").is_err());
        assert!(parse_confidence("0").is_err());
    }

    #[test]
    fn support_thresholds() {
        assert_eq!(MinSupport::parse("2/E").unwrap(), MinSupport::Count(2));
        assert_eq!(MinSupport::parse("2/E").unwrap().min_count(40), 2);
        assert_eq!(MinSupport::parse("0.5").unwrap().min_count(3), 2);
        assert_eq!(MinSupport::parse("2/3").unwrap().min_count(3), 2);
        assert_eq!(MinSupport::parse("1/3").unwrap().min_count(3), 1);
        assert!(MinSupport::parse("0/E").is_err());
        assert!(MinSupport::parse("1.2").is_err());
    }
}
