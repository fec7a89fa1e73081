use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A calendar month. Ordering follows the calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    year: i32,
    month: u8,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Input(format!("month {month} out of range 1..=12")));
        }
        Ok(Month {
            year,
            month: month as u8,
        })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month as u32
    }

    /// Months since year 0, January.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Month {
            year: ordinal.div_euclid(12) as i32,
            month: (ordinal.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn add_months(self, k: i64) -> Self {
        Month::from_ordinal(self.ordinal() + k)
    }

    /// Signed number of months from `other` to `self`.
    pub fn months_since(self, other: Month) -> i64 {
        self.ordinal() - other.ordinal()
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    /// `YYYY-MM-01`, the date form used in data files and prompts.
    pub fn ref_date(self) -> String {
        format!("{:04}-{:02}-01", self.year, self.month)
    }

    /// Parses `YYYY-MM` or `YYYY-MM-DD`; any day of month is accepted and dropped.
    pub fn parse_date(text: &str) -> Result<Self> {
        let text = text.trim();
        let mut parts = text.split('-');
        let bad = || Error::Input(format!("unparseable date `{text}`"));
        let year: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let month: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if let Some(day) = parts.next() {
            let day: u32 = day.parse().map_err(|_| bad())?;
            if !(1..=31).contains(&day) {
                return Err(bad());
            }
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        Month::new(year, month).map_err(|_| bad())
    }

    pub fn december(year: i32) -> Self {
        Month { year, month: 12 }
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Month::parse_date(s)
    }
}

impl Serialize for Month {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Month::parse_date(&text).map_err(serde::de::Error::custom)
    }
}
