//! Race times as exact centiseconds, with the `M:SS.ss` notation.

use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::round;

/// A positive race time held as whole centiseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RaceTime(u32);

impl RaceTime {
    pub fn from_centis(centis: u32) -> Result<Self> {
        if centis == 0 {
            return Err(Error::Domain("race time must be positive"));
        }
        Ok(Self(centis))
    }

    /// Rounds to the nearest centisecond.
    pub fn from_seconds(seconds: f64) -> Result<Self> {
        if !seconds.is_finite() || seconds <= 0.0 || seconds * 100.0 > u32::MAX as f64 {
            return Err(Error::Domain("race time must be finite and positive"));
        }
        Self::from_centis(round(seconds * 100.0) as u32)
    }

    pub fn centis(self) -> u32 {
        self.0
    }

    pub fn seconds(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Parses `M:SS.ss` or `MM:SS.ss`.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_separator(text, b':')
    }

    /// Parses a time whose minute separator is `sep`, e.g. `5.58.52` with `b'.'`.
    pub fn parse_with_separator(text: &str, sep: u8) -> Result<Self> {
        let bytes = text.as_bytes();
        let fail = |position, reason| Error::Parse { position, reason };
        let minute_len = bytes
            .iter()
            .position(|&b| b == sep)
            .ok_or(fail(0, "missing minute separator"))?;
        if minute_len == 0 || minute_len > 2 {
            return Err(fail(0, "expected one or two minute digits"));
        }
        let expected_len = minute_len + 6;
        if bytes.len() != expected_len {
            return Err(fail(
                bytes.len().min(expected_len),
                "expected SS.ss after the minutes",
            ));
        }
        let digit = |i: usize| -> Result<u32> {
            let b = bytes[i];
            if b.is_ascii_digit() {
                Ok((b - b'0') as u32)
            } else {
                Err(fail(i, "expected a digit"))
            }
        };
        let mut minutes = 0;
        for i in 0..minute_len {
            minutes = minutes * 10 + digit(i)?;
        }
        let s = minute_len + 1;
        let secs = digit(s)? * 10 + digit(s + 1)?;
        if bytes[s + 2] != b'.' {
            return Err(fail(s + 2, "expected '.' before hundredths"));
        }
        let hundredths = digit(s + 3)? * 10 + digit(s + 4)?;
        if secs >= 60 {
            return Err(fail(s, "seconds field must be below 60"));
        }
        Self::from_centis((minutes * 60 + secs) * 100 + hundredths)
    }
}

impl FromStr for RaceTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for RaceTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let minutes = self.0 / 6000;
        let rest = self.0 % 6000;
        write!(f, "{}:{:02}.{:02}", minutes, rest / 100, rest % 100)
    }
}

/// Average lap time once the opening segment is taken out:
/// `(total - opening) / laps`.
pub fn lap_schedule(total_s: f64, opening_s: f64, laps: u32) -> Result<f64> {
    if laps == 0 {
        return Err(Error::Argument("lap count must be at least one"));
    }
    if !(opening_s > 0.0) || !total_s.is_finite() || !opening_s.is_finite() {
        return Err(Error::Argument("opening must be a positive finite time"));
    }
    let remainder = total_s - opening_s;
    if !(remainder > 0.0) {
        return Err(Error::Argument("total time must exceed the opening"));
    }
    Ok(remainder / laps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    #[test]
    fn parses_minute_notation() {
        assert_eq!(RaceTime::parse("6:01.56").unwrap().seconds(), 361.56);
        assert_eq!(RaceTime::parse("5:58.52").unwrap().seconds(), 358.52);
        assert_eq!(RaceTime::parse("6:10.00").unwrap().centis(), 37_000);
        assert_eq!(RaceTime::parse("12:41.69").unwrap().centis(), 76_169);
        assert_eq!(
            RaceTime::parse_with_separator("5.58.52", b'.')
                .unwrap()
                .centis(),
            35_852
        );
    }

    #[test]
    fn rejects_malformed_text() {
        assert_eq!(
            RaceTime::parse("6:60.00"),
            Err(Error::Parse {
                position: 2,
                reason: "seconds field must be below 60"
            })
        );
        for bad in [
            "abc",
            "",
            "6:1.56",
            "6:01,56",
            "123:01.56",
            ":01.56",
            "6:01.5x",
            "0:00.00",
            "6:01.567",
        ] {
            assert!(RaceTime::parse(bad).is_err(), "{bad}");
        }
        assert!(matches!(
            RaceTime::parse("6:0a.00"),
            Err(Error::Parse { position: 3, .. })
        ));
    }

    #[test]
    fn formats_and_rounds() {
        assert_eq!(
            RaceTime::from_seconds(370.0 - 2.609 / 0.208)
                .unwrap()
                .to_string(),
            "5:57.46"
        );
        assert_eq!(
            RaceTime::from_seconds(370.0 - 18.74).unwrap().to_string(),
            "5:51.26"
        );
        assert_eq!(RaceTime::from_centis(6005).unwrap().to_string(), "1:00.05");
        assert!(RaceTime::from_seconds(-1.0).is_err());
        assert!(RaceTime::from_seconds(f64::NAN).is_err());
    }

    #[test]
    fn lap_schedule_examples() {
        assert!((lap_schedule(351.26, 18.00, 12).unwrap() - 27.77).abs() < 0.01);
        assert!((lap_schedule(358.52, 19.03, 12).unwrap() - 28.29).abs() < 0.01);
        assert!(lap_schedule(19.03, 19.03, 12).is_err());
        assert!(lap_schedule(30.0, 19.03, 0).is_err());
    }

    proptest! {
        #[test]
        fn canonical_strings_roundtrip(minutes in 1u32..100, secs in 0u32..60, hundredths in 0u32..100) {
            let text = alloc::format!("{minutes}:{secs:02}.{hundredths:02}");
            let parsed = RaceTime::parse(&text).unwrap();
            prop_assert_eq!(parsed.to_string(), text);
            prop_assert_eq!(RaceTime::from_seconds(parsed.seconds()).unwrap(), parsed);
        }
    }
}
