//! ISO 8601 week labels (`2011-W27`) and week arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An ISO 8601 year-week pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IsoWeek {
    pub year: i32,
    pub week: u32,
}

impl IsoWeek {
    pub fn new(year: i32, week: u32) -> Result<Self> {
        if week == 0 || week > weeks_in_iso_year(year) {
            return Err(Error::BadWeek {
                text: format!("{year:04}-W{week:02}"),
            });
        }
        Ok(IsoWeek { year, week })
    }

    /// The week following `self`, rolling over at the end of the ISO year.
    pub fn next(self) -> IsoWeek {
        if self.week < weeks_in_iso_year(self.year) {
            IsoWeek {
                year: self.year,
                week: self.week + 1,
            }
        } else {
            IsoWeek {
                year: self.year + 1,
                week: 1,
            }
        }
    }

    /// Consecutive week labels starting at `self` (inclusive).
    pub fn sequence(self, len: usize) -> Vec<IsoWeek> {
        let mut out = Vec::with_capacity(len);
        let mut w = self;
        for _ in 0..len {
            out.push(w);
            w = w.next();
        }
        out
    }
}

/// Number of ISO weeks in `year`: 53 if 1 January falls on a Thursday, or on a
/// Wednesday in a leap year; 52 otherwise.
pub fn weeks_in_iso_year(year: i32) -> u32 {
    let jan1 = day_of_week(year, 1, 1);
    let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if jan1 == 4 || (leap && jan1 == 3) {
        53
    } else {
        52
    }
}

/// Sakamoto's method; 0 = Sunday .. 6 = Saturday.
fn day_of_week(year: i32, month: u32, day: u32) -> u32 {
    const T: [i32; 12] = [0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4];
    let y = if month < 3 { year - 1 } else { year };
    let v = y + y.div_euclid(4) - y.div_euclid(100)
        + y.div_euclid(400)
        + T[(month - 1) as usize]
        + day as i32;
    v.rem_euclid(7) as u32
}

impl fmt::Display for IsoWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-W{:02}", self.year, self.week)
    }
}

impl FromStr for IsoWeek {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadWeek {
            text: s.to_string(),
        };
        let (y, w) = s.split_once("-W").ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let week: u32 = w.parse().map_err(|_| bad())?;
        IsoWeek::new(year, week)
    }
}

impl Serialize for IsoWeek {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for IsoWeek {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats() {
        let w: IsoWeek = "2011-W27".parse().unwrap();
        assert_eq!(
            w,
            IsoWeek {
                year: 2011,
                week: 27
            }
        );
        assert_eq!(w.to_string(), "2011-W27");
        assert!("2011-27".parse::<IsoWeek>().is_err());
        assert!("2011-W54".parse::<IsoWeek>().is_err());
        assert!("2011-W00".parse::<IsoWeek>().is_err());
    }

    #[test]
    fn week_counts() {
        assert_eq!(weeks_in_iso_year(2011), 52);
        assert_eq!(weeks_in_iso_year(2015), 53);
        assert_eq!(weeks_in_iso_year(2020), 53);
        assert_eq!(weeks_in_iso_year(2016), 52);
    }

    #[test]
    fn rollover() {
        let w = IsoWeek::new(2015, 53).unwrap();
        assert_eq!(
            w.next(),
            IsoWeek {
                year: 2016,
                week: 1
            }
        );
        let w = IsoWeek::new(2011, 52).unwrap();
        assert_eq!(
            w.next(),
            IsoWeek {
                year: 2012,
                week: 1
            }
        );
    }

    #[test]
    fn sequence_spans_years() {
        let seq = IsoWeek::new(2014, 51).unwrap().sequence(5);
        let labels: Vec<String> = seq.iter().map(|w| w.to_string()).collect();
        assert_eq!(
            labels,
            ["2014-W51", "2014-W52", "2015-W01", "2015-W02", "2015-W03"]
        );
    }
}
