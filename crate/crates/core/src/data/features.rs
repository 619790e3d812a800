use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

/// Calendar covariates derived from timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFeature {
    /// 0..=23
    HourOfDay,
    /// 0 = Monday ..= 6 = Sunday
    DayOfWeek,
    /// 1..=12
    MonthOfYear,
    /// Row index from the first timestamp.
    AbsoluteTime,
    /// 1 Monday to Friday, else 0.
    IsWorkday,
    /// 1 on workdays from 09:00 to 16:59, else 0.
    IsBusinessHour,
}

impl TimeFeature {
    pub fn name(self) -> &'static str {
        match self {
            TimeFeature::HourOfDay => "hour_of_day",
            TimeFeature::DayOfWeek => "day_of_week",
            TimeFeature::MonthOfYear => "month_of_year",
            TimeFeature::AbsoluteTime => "absolute_time",
            TimeFeature::IsWorkday => "is_workday",
            TimeFeature::IsBusinessHour => "is_business_hour",
        }
    }

    pub fn value(self, ts: &NaiveDateTime, index: usize) -> f64 {
        let workday = !matches!(ts.weekday(), Weekday::Sat | Weekday::Sun);
        match self {
            TimeFeature::HourOfDay => f64::from(ts.hour()),
            TimeFeature::DayOfWeek => f64::from(ts.weekday().num_days_from_monday()),
            TimeFeature::MonthOfYear => f64::from(ts.month()),
            TimeFeature::AbsoluteTime => index as f64,
            TimeFeature::IsWorkday => f64::from(u8::from(workday)),
            TimeFeature::IsBusinessHour => f64::from(u8::from(workday && (9..17).contains(&ts.hour()))),
        }
    }
}

/// Row-major `[N x features.len()]` values.
pub fn time_features(timestamps: &[NaiveDateTime], features: &[TimeFeature]) -> Vec<f64> {
    timestamps
        .iter()
        .enumerate()
        .flat_map(|(i, ts)| features.iter().map(move |f| f.value(ts, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn at(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
    }

    #[test]
    fn calendar_values() {
        // 2024-03-15 is a Friday
        let ts = at(2024, 3, 15, 13);
        assert_eq!(TimeFeature::HourOfDay.value(&ts, 0), 13.0);
        assert_eq!(TimeFeature::DayOfWeek.value(&ts, 0), 4.0);
        assert_eq!(TimeFeature::MonthOfYear.value(&ts, 0), 3.0);
        assert_eq!(TimeFeature::AbsoluteTime.value(&ts, 7), 7.0);
        assert_eq!(TimeFeature::IsWorkday.value(&ts, 0), 1.0);
        assert_eq!(TimeFeature::IsBusinessHour.value(&ts, 0), 1.0);
        let sat = at(2024, 3, 16, 13);
        assert_eq!(TimeFeature::IsWorkday.value(&sat, 0), 0.0);
        assert_eq!(TimeFeature::IsBusinessHour.value(&sat, 0), 0.0);
        assert_eq!(TimeFeature::IsBusinessHour.value(&at(2024, 3, 15, 17), 0), 0.0);
    }

    #[test]
    fn row_major_layout() {
        let ts = [at(2024, 1, 1, 0), at(2024, 1, 1, 1)];
        let v = time_features(&ts, &[TimeFeature::HourOfDay, TimeFeature::AbsoluteTime]);
        assert_eq!(v, vec![0.0, 0.0, 1.0, 1.0]);
    }
}
