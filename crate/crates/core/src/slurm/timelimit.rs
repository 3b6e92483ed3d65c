use std::fmt;
use std::str::FromStr;

use crate::model::Seconds;
use crate::slurm::AdapterError;

/// A Slurm time limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeLimit {
    Limited(Seconds),
    Unlimited,
}

impl TimeLimit {
    pub fn seconds(self) -> Option<Seconds> {
        match self {
            TimeLimit::Limited(s) => Some(s),
            TimeLimit::Unlimited => None,
        }
    }
}

impl fmt::Display for TimeLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeLimit::Limited(s) => f.write_str(&format_timelimit(*s)),
            TimeLimit::Unlimited => f.write_str("UNLIMITED"),
        }
    }
}

impl FromStr for TimeLimit {
    type Err = AdapterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_timelimit(s)
    }
}

/// Canonical `D-HH:MM:SS`.
pub fn format_timelimit(seconds: Seconds) -> String {
    let (days, rest) = (seconds / 86_400, seconds % 86_400);
    format!("{days}-{:02}:{:02}:{:02}", rest / 3600, rest % 3600 / 60, rest % 60)
}

/// Accepts `M`, `M:S`, `H:M:S`, `D-H`, `D-H:M`, `D-H:M:S` and `UNLIMITED`
/// (or `INFINITE`), case-insensitively for the keywords.
pub fn parse_timelimit(text: &str) -> Result<TimeLimit, AdapterError> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("unlimited") || t.eq_ignore_ascii_case("infinite") {
        return Ok(TimeLimit::Unlimited);
    }
    let bad = || AdapterError::BadTimeLimit(text.to_string());
    let num = |s: &str| -> Result<Seconds, AdapterError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        s.parse().map_err(|_| bad())
    };
    let (days, clock) = match t.split_once('-') {
        Some((d, rest)) => (Some(num(d)?), rest),
        None => (None, t),
    };
    let parts = clock.split(':').map(num).collect::<Result<Vec<_>, _>>()?;
    let (d, h, m, s) = match (days, parts.as_slice()) {
        (None, [m]) => (0, 0, *m, 0),
        (None, [m, s]) => (0, 0, *m, *s),
        (None, [h, m, s]) => (0, *h, *m, *s),
        (Some(d), [h]) => (d, *h, 0, 0),
        (Some(d), [h, m]) => (d, *h, *m, 0),
        (Some(d), [h, m, s]) => (d, *h, *m, *s),
        _ => return Err(bad()),
    };
    d.checked_mul(86_400)
        .and_then(|v| v.checked_add(h.checked_mul(3600)?))
        .and_then(|v| v.checked_add(m.checked_mul(60)?))
        .and_then(|v| v.checked_add(s))
        .map(TimeLimit::Limited)
        .ok_or_else(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats() {
        assert_eq!(format_timelimit(1500), "0-00:25:00");
        assert_eq!(format_timelimit(0), "0-00:00:00");
        assert_eq!(format_timelimit(90_061), "1-01:01:01");
        assert_eq!(format_timelimit(1700), "0-00:28:20");
    }

    #[test]
    fn parses_every_form() {
        let cases = [
            ("25:00", 1500),
            ("1-01:01:01", 90_061),
            ("30", 1800),
            ("2:03:04", 7384),
            ("1-2", 93_600),
            ("1-2:30", 95_400),
            ("0-00:00:00", 0),
        ];
        for (text, secs) in cases {
            assert_eq!(parse_timelimit(text).unwrap(), TimeLimit::Limited(secs), "{text}");
        }
        assert_eq!(parse_timelimit("UNLIMITED").unwrap(), TimeLimit::Unlimited);
        assert_eq!(parse_timelimit("infinite").unwrap(), TimeLimit::Unlimited);
    }

    #[test]
    fn rejects_malformed() {
        for text in ["x", "", "1:2:3:4", "1-", "-5", "1-2:3:4:5", "+3", "1:-2", "5 min"] {
            assert!(parse_timelimit(text).is_err(), "{text}");
        }
    }

    proptest! {
        #[test]
        fn round_trip(s in 0u64..=10_000_000) {
            prop_assert_eq!(parse_timelimit(&format_timelimit(s)).unwrap(), TimeLimit::Limited(s));
        }
    }
}
