//! Integral bandwidth and simulation-time quantities.
//!
//! Bandwidth is carried in kilobits per second and time in microseconds so
//! that conservation checks and lifetime bookkeeping are exact.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

/// Bandwidth in kilobits per second.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bandwidth(u64);

impl Bandwidth {
    pub const ZERO: Bandwidth = Bandwidth(0);

    pub const fn from_kbps(kbps: u64) -> Self {
        Bandwidth(kbps)
    }

    pub const fn from_mbps(mbps: u64) -> Self {
        Bandwidth(mbps * 1000)
    }

    pub const fn kbps(self) -> u64 {
        self.0
    }

    pub fn as_mbps_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_sub(self, rhs: Bandwidth) -> Option<Bandwidth> {
        self.0.checked_sub(rhs.0).map(Bandwidth)
    }

    pub fn saturating_sub(self, rhs: Bandwidth) -> Bandwidth {
        Bandwidth(self.0.saturating_sub(rhs.0))
    }

    /// Parses a decimal megabit-per-second literal such as `500`, `2.5` or
    /// `0.125`. At most three fractional digits are accepted (kbps precision).
    pub fn parse_mbps(text: &str) -> Option<Bandwidth> {
        parse_fixed3(text).map(Bandwidth)
    }
}

impl fmt::Display for Bandwidth {
    /// Formats as megabits per second with trailing fractional zeros trimmed.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_fixed3(f, self.0)
    }
}

impl Add for Bandwidth {
    type Output = Bandwidth;
    fn add(self, rhs: Bandwidth) -> Bandwidth {
        Bandwidth(self.0 + rhs.0)
    }
}

impl AddAssign for Bandwidth {
    fn add_assign(&mut self, rhs: Bandwidth) {
        self.0 += rhs.0;
    }
}

impl Sub for Bandwidth {
    type Output = Bandwidth;
    fn sub(self, rhs: Bandwidth) -> Bandwidth {
        Bandwidth(self.0 - rhs.0)
    }
}

impl SubAssign for Bandwidth {
    fn sub_assign(&mut self, rhs: Bandwidth) {
        self.0 -= rhs.0;
    }
}

impl Mul<u64> for Bandwidth {
    type Output = Bandwidth;
    fn mul(self, rhs: u64) -> Bandwidth {
        Bandwidth(self.0 * rhs)
    }
}

impl Sum for Bandwidth {
    fn sum<I: Iterator<Item = Bandwidth>>(iter: I) -> Bandwidth {
        Bandwidth(iter.map(|b| b.0).sum())
    }
}

impl<'a> Sum<&'a Bandwidth> for Bandwidth {
    fn sum<I: Iterator<Item = &'a Bandwidth>>(iter: I) -> Bandwidth {
        Bandwidth(iter.map(|b| b.0).sum())
    }
}

/// A point in (or span of) simulated time, in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_secs(secs: u64) -> Self {
        SimTime(secs * 1_000_000)
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// Parses a decimal seconds literal with up to six fractional digits.
    pub fn parse_secs(text: &str) -> Option<SimTime> {
        let (int, frac) = split_decimal(text, 6)?;
        int.checked_mul(1_000_000)?.checked_add(frac).map(SimTime)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

fn parse_fixed3(text: &str) -> Option<u64> {
    let (int, frac) = split_decimal(text, 3)?;
    int.checked_mul(1000)?.checked_add(frac)
}

/// Splits `123.45` into (123, 45 scaled to `digits` places).
fn split_decimal(text: &str, digits: u32) -> Option<(u64, u64)> {
    let text = text.trim();
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if frac_part.len() > digits as usize {
        return None;
    }
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    let int = if int_part.is_empty() {
        0
    } else {
        int_part.parse::<u64>().ok()?
    };
    let mut frac = if frac_part.is_empty() {
        0
    } else {
        frac_part.parse::<u64>().ok()?
    };
    for _ in frac_part.len()..digits as usize {
        frac *= 10;
    }
    Some((int, frac))
}

fn write_fixed3(f: &mut fmt::Formatter<'_>, value: u64) -> fmt::Result {
    let int = value / 1000;
    let frac = value % 1000;
    if frac == 0 {
        return write!(f, "{int}");
    }
    let mut digits = format!("{frac:03}");
    while digits.ends_with('0') {
        digits.pop();
    }
    write!(f, "{int}.{digits}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mbps_literals() {
        assert_eq!(
            Bandwidth::parse_mbps("500"),
            Some(Bandwidth::from_kbps(500_000))
        );
        assert_eq!(
            Bandwidth::parse_mbps("2.5"),
            Some(Bandwidth::from_kbps(2_500))
        );
        assert_eq!(
            Bandwidth::parse_mbps("0.125"),
            Some(Bandwidth::from_kbps(125))
        );
        assert_eq!(Bandwidth::parse_mbps(".5"), Some(Bandwidth::from_kbps(500)));
        assert_eq!(Bandwidth::parse_mbps("0.0001"), None);
        assert_eq!(Bandwidth::parse_mbps("-1"), None);
        assert_eq!(Bandwidth::parse_mbps("abc"), None);
        assert_eq!(Bandwidth::parse_mbps(""), None);
    }

    #[test]
    fn displays_trimmed_mbps() {
        assert_eq!(Bandwidth::from_mbps(250).to_string(), "250");
        assert_eq!(Bandwidth::from_kbps(2_500).to_string(), "2.5");
        assert_eq!(Bandwidth::from_kbps(125).to_string(), "0.125");
    }

    #[test]
    fn sim_time_round_trips_seconds() {
        let t = SimTime::parse_secs("300").unwrap();
        assert_eq!(t, SimTime::from_secs(300));
        assert_eq!(SimTime::parse_secs("1.5").unwrap().micros(), 1_500_000);
        assert_eq!(SimTime::from_micros(12_000_034).to_string(), "12.000034");
    }
}
