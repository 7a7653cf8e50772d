//! Civil dates (proleptic Gregorian, UTC) and the day-type calendar.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CivilDate {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

impl CivilDate {
    pub fn new(year: i32, month: u8, day: u8) -> Result<Self> {
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return Err(Error::Domain(format!("no such date {year}-{month}-{day}")));
        }
        Ok(CivilDate { year, month, day })
    }

    /// Days since 1970-01-01.
    pub fn to_days(self) -> i64 {
        let y = i64::from(self.year) - i64::from(self.month <= 2);
        let era = y.div_euclid(400);
        let yoe = y - era * 400;
        let m = i64::from(self.month);
        let mp = (m + 9) % 12;
        let doy = (153 * mp + 2) / 5 + i64::from(self.day) - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146_097 + doe - 719_468
    }

    pub fn from_days(days: i64) -> Self {
        let z = days + 719_468;
        let era = z.div_euclid(146_097);
        let doe = z - era * 146_097;
        let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let day = (doy - (153 * mp + 2) / 5 + 1) as u8;
        let month = if mp < 10 { mp + 3 } else { mp - 9 } as u8;
        let year = (yoe + era * 400 + i64::from(month <= 2)) as i32;
        CivilDate { year, month, day }
    }

    pub fn from_epoch(ts: i64) -> Self {
        Self::from_days(ts.div_euclid(SECONDS_PER_DAY))
    }

    pub fn epoch_start(self) -> i64 {
        self.to_days() * SECONDS_PER_DAY
    }

    /// 0 = Monday ... 6 = Sunday.
    pub fn weekday(self) -> u8 {
        // 1970-01-01 was a Thursday.
        ((self.to_days() + 3).rem_euclid(7)) as u8
    }

    pub fn days_in_month(self) -> u8 {
        days_in_month(self.year, self.month)
    }

    pub fn first_of_month(self) -> Self {
        CivilDate { day: 1, ..self }
    }

    pub fn succ(self) -> Self {
        Self::from_days(self.to_days() + 1)
    }
}

pub fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

impl fmt::Display for CivilDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl FromStr for CivilDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("bad date {s:?}, expected YYYY-MM-DD"));
        let mut parts = s.trim().splitn(3, '-');
        let y = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let m = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let d = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        CivilDate::new(y, m, d)
    }
}

impl Serialize for CivilDate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CivilDate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayType {
    FirstDayOfWeek,
    LastWorkingDay,
    Holiday,
    PartTime,
    Regular,
}

impl DayType {
    pub const ALL: [DayType; 5] = [
        DayType::FirstDayOfWeek,
        DayType::LastWorkingDay,
        DayType::Holiday,
        DayType::PartTime,
        DayType::Regular,
    ];

    /// Default weekly pattern: Monday opens the week, Friday closes it,
    /// Saturday is a half day and Sunday a holiday.
    pub fn weekly_default(date: CivilDate) -> DayType {
        match date.weekday() {
            0 => DayType::FirstDayOfWeek,
            4 => DayType::LastWorkingDay,
            5 => DayType::PartTime,
            6 => DayType::Holiday,
            _ => DayType::Regular,
        }
    }
}

/// One explicit day-type assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayAssignment {
    pub date: CivilDate,
    pub day_type: DayType,
}

/// Day types for a contiguous run of whole months.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Calendar {
    days: BTreeMap<CivilDate, DayType>,
}

impl Calendar {
    pub fn from_assignments(assignments: impl IntoIterator<Item = DayAssignment>) -> Self {
        Calendar {
            days: assignments
                .into_iter()
                .map(|a| (a.date, a.day_type))
                .collect(),
        }
    }

    /// Covers every whole month touched by `[start_ts, end_ts)` using the
    /// weekly pattern, then applies `overrides`.
    pub fn covering(start_ts: i64, end_ts: i64, overrides: &[DayAssignment]) -> Self {
        let first = CivilDate::from_epoch(start_ts).first_of_month();
        let last = CivilDate::from_epoch(end_ts - 1);
        let stop = CivilDate {
            day: last.days_in_month(),
            ..last
        };
        let mut days = BTreeMap::new();
        let mut d = first;
        while d <= stop {
            days.insert(d, DayType::weekly_default(d));
            d = d.succ();
        }
        for a in overrides {
            days.insert(a.date, a.day_type);
        }
        Calendar { days }
    }

    pub fn day_type(&self, date: CivilDate) -> Result<DayType> {
        self.days
            .get(&date)
            .copied()
            .ok_or_else(|| Error::DateNotCovered(format!("{date}")))
    }

    /// Number of days of `kind` in the month enclosing `date`. Fails unless the
    /// whole month is covered.
    pub fn count_in_month(&self, date: CivilDate, kind: DayType) -> Result<u32> {
        let first = date.first_of_month();
        let mut n = 0;
        for day in 1..=date.days_in_month() {
            let d = CivilDate { day, ..first };
            if self.day_type(d)? == kind {
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (CivilDate, DayType)> + '_ {
        self.days.iter().map(|(d, t)| (*d, *t))
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}
