//! Publication periods.
//!
//! Classifications are published on a fixed three-per-year cadence
//! (February, June, October) starting in 2016. A [`PeriodId`] is the pair
//! (year, cycle); ordering is chronological. "Next" and "previous" walk the
//! cadence, wrapping across year boundaries, and are undefined before the
//! first period in scope.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One of the three publication cycles in a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cycle {
    Feb,
    Jun,
    Oct,
}

impl Cycle {
    pub const ALL: [Cycle; 3] = [Cycle::Feb, Cycle::Jun, Cycle::Oct];

    pub fn month(self) -> u8 {
        match self {
            Cycle::Feb => 2,
            Cycle::Jun => 6,
            Cycle::Oct => 10,
        }
    }

    pub fn from_month(month: u8) -> Option<Cycle> {
        match month {
            2 => Some(Cycle::Feb),
            6 => Some(Cycle::Jun),
            10 => Some(Cycle::Oct),
            _ => None,
        }
    }

    /// Position within the year: Feb=0, Jun=1, Oct=2.
    fn index(self) -> u32 {
        match self {
            Cycle::Feb => 0,
            Cycle::Jun => 1,
            Cycle::Oct => 2,
        }
    }

    fn from_index(i: u32) -> Cycle {
        match i {
            0 => Cycle::Feb,
            1 => Cycle::Jun,
            _ => Cycle::Oct,
        }
    }
}

/// A publication period: (year, cycle), chronologically ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeriodId {
    year: u16,
    cycle: Cycle,
}

impl PeriodId {
    /// First year with data in scope; periods before (2016, Feb) do not exist.
    pub const MIN_YEAR: u16 = 2016;

    pub fn new(year: u16, cycle: Cycle) -> Result<PeriodId> {
        if year < Self::MIN_YEAR {
            return Err(Error::Config(format!(
                "period year {year} precedes {}",
                Self::MIN_YEAR
            )));
        }
        Ok(PeriodId { year, cycle })
    }

    pub fn year(self) -> u16 {
        self.year
    }

    pub fn cycle(self) -> Cycle {
        self.cycle
    }

    /// Number of cycles since (MIN_YEAR, Feb). Total order, consecutive.
    fn ordinal(self) -> u32 {
        (self.year as u32 - Self::MIN_YEAR as u32) * 3 + self.cycle.index()
    }

    fn from_ordinal(ord: u32) -> PeriodId {
        PeriodId {
            year: (Self::MIN_YEAR as u32 + ord / 3) as u16,
            cycle: Cycle::from_index(ord % 3),
        }
    }

    /// The immediately following period (Oct wraps to next Feb).
    pub fn next(self) -> PeriodId {
        PeriodId::from_ordinal(self.ordinal() + 1)
    }

    /// The immediately preceding period, if one exists in scope.
    pub fn prev(self) -> Option<PeriodId> {
        self.minus_cycles(1)
    }

    pub fn plus_cycles(self, n: u32) -> PeriodId {
        PeriodId::from_ordinal(self.ordinal() + n)
    }

    /// Walk `n` cycles back; None when that would leave the scope.
    pub fn minus_cycles(self, n: u32) -> Option<PeriodId> {
        self.ordinal().checked_sub(n).map(PeriodId::from_ordinal)
    }

    /// Same cycle, one year earlier (three cycles back).
    pub fn same_cycle_prev_year(self) -> Option<PeriodId> {
        self.minus_cycles(3)
    }

    /// Directory-name form, e.g. "202106".
    pub fn dir_name(self) -> String {
        format!("{:04}{:02}", self.year, self.cycle.month())
    }

    /// Parse either "2021-06" or "202106".
    pub fn parse(s: &str) -> Result<PeriodId> {
        let bad = || Error::Config(format!("cannot parse period {s:?}"));
        let compact: String = s.chars().filter(|c| *c != '-').collect();
        if compact.len() != 6 || !compact.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let year: u16 = compact[..4].parse().map_err(|_| bad())?;
        let month: u8 = compact[4..].parse().map_err(|_| bad())?;
        let cycle = Cycle::from_month(month).ok_or_else(bad)?;
        PeriodId::new(year, cycle)
    }
}

impl fmt::Display for PeriodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.cycle.month())
    }
}

impl FromStr for PeriodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<PeriodId> {
        PeriodId::parse(s)
    }
}

impl Serialize for PeriodId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PeriodId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PeriodId::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Inclusive period range, e.g. parsed from "2019-02..2022-10".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodRange {
    pub from: PeriodId,
    pub to: PeriodId,
}

impl PeriodRange {
    pub fn new(from: PeriodId, to: PeriodId) -> Result<PeriodRange> {
        if from > to {
            return Err(Error::Config(format!("period range {from}..{to} is inverted")));
        }
        Ok(PeriodRange { from, to })
    }

    pub fn contains(&self, p: PeriodId) -> bool {
        self.from <= p && p <= self.to
    }

    /// Parse "FROM..TO"; a bare period means a single-period range.
    pub fn parse(s: &str) -> Result<PeriodRange> {
        match s.split_once("..") {
            Some((a, b)) => PeriodRange::new(PeriodId::parse(a.trim())?, PeriodId::parse(b.trim())?),
            None => {
                let p = PeriodId::parse(s.trim())?;
                PeriodRange::new(p, p)
            }
        }
    }
}

impl fmt::Display for PeriodRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.from, self.to)
    }
}
