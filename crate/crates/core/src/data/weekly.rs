use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate, Weekday};

use super::daily::{csv_io, deflate_loss, normalize_claims, DailyRecord};
use crate::{Error, Result};

/// One ISO week of aggregated data.
#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyRecord {
    /// Monday of the ISO week.
    pub week_start: NaiveDate,
    /// Weekly total precipitation (mm).
    pub total_precip: f64,
    /// Largest daily precipitation within the week (mm).
    pub max_daily_precip: f64,
    /// Claims per 100,000 insured homes.
    pub claims: Option<f64>,
    /// Aggregate loss in base-period prices.
    pub loss: Option<f64>,
}

impl WeeklyRecord {
    /// ISO week-numbering year the week belongs to.
    pub fn iso_year(&self) -> i32 {
        self.week_start.iso_week().year()
    }
}

/// A gap-free sequence of ISO weeks.
#[derive(Debug, Clone, PartialEq)]
pub struct WeeklySeries {
    label: String,
    records: Vec<WeeklyRecord>,
}

impl WeeklySeries {
    pub fn new(label: impl Into<String>, records: Vec<WeeklyRecord>) -> Result<Self> {
        for r in &records {
            if r.week_start.weekday() != Weekday::Mon {
                return Err(Error::data(format!("week start {} is not a Monday", r.week_start)));
            }
            if !(r.total_precip >= 0.0) || !(r.max_daily_precip >= 0.0) {
                return Err(Error::data(format!("negative precipitation in week {}", r.week_start)));
            }
            if r.claims.is_some_and(|v| !(v >= 0.0)) || r.loss.is_some_and(|v| !(v >= 0.0)) {
                return Err(Error::data(format!("negative target in week {}", r.week_start)));
            }
        }
        for w in records.windows(2) {
            if w[1].week_start != w[0].week_start + Duration::days(7) {
                return Err(Error::data(format!(
                    "weeks {} and {} are not consecutive",
                    w[0].week_start, w[1].week_start
                )));
            }
        }
        Ok(Self {
            label: label.into(),
            records,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn records(&self) -> &[WeeklyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_claims(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.claims.is_some())
    }

    pub fn has_loss(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.loss.is_some())
    }

    /// Copy of the series with targets removed and precipitation multiplied
    /// by `factor`.
    pub fn scaled_precipitation(&self, factor: f64) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| WeeklyRecord {
                week_start: r.week_start,
                total_precip: r.total_precip * factor,
                max_daily_precip: r.max_daily_precip * factor,
                claims: None,
                loss: None,
            })
            .collect();
        Self {
            label: self.label.clone(),
            records,
        }
    }

    /// Copy with claims and loss dropped.
    pub fn precipitation_only(&self) -> Self {
        self.scaled_precipitation(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateOptions {
    /// Price index of the base period used for deflation.
    pub price_index_base: f64,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        Self {
            price_index_base: 100.0,
        }
    }
}

struct WeekAcc {
    start: NaiveDate,
    days: usize,
    total: f64,
    max: f64,
    claims: Option<f64>,
    loss: Option<f64>,
    claim_days: usize,
    loss_days: usize,
}

impl WeekAcc {
    fn new(start: NaiveDate) -> Self {
        Self {
            start,
            days: 0,
            total: 0.0,
            max: 0.0,
            claims: None,
            loss: None,
            claim_days: 0,
            loss_days: 0,
        }
    }

    fn add(&mut self, d: &DailyRecord, opts: &AggregateOptions) -> Result<()> {
        self.days += 1;
        self.total += d.precipitation_mm;
        self.max = self.max.max(d.precipitation_mm);
        if let Some(c) = d.claims {
            // Without exposure the count is taken as an already normalized rate.
            let rate = match d.homes_insured {
                Some(h) => normalize_claims(c, h)?,
                None => c,
            };
            *self.claims.get_or_insert(0.0) += rate;
            self.claim_days += 1;
        }
        if let Some(l) = d.loss_nominal {
            let real = match d.price_index {
                Some(ix) => deflate_loss(l, ix, opts.price_index_base)?,
                None => l,
            };
            *self.loss.get_or_insert(0.0) += real;
            self.loss_days += 1;
        }
        Ok(())
    }

    fn finish(self) -> Result<WeeklyRecord> {
        for (what, n) in [("claims", self.claim_days), ("loss", self.loss_days)] {
            if n != 0 && n != 7 {
                return Err(Error::data(format!(
                    "week {} has {what} on only {n} of 7 days",
                    self.start
                )));
            }
        }
        Ok(WeeklyRecord {
            week_start: self.start,
            total_precip: self.total,
            max_daily_precip: self.max,
            claims: self.claims,
            loss: self.loss,
        })
    }
}

fn monday_of(d: NaiveDate) -> NaiveDate {
    d - Duration::days(i64::from(d.weekday().num_days_from_monday()))
}

/// Aggregates daily records into complete ISO weeks. Incomplete weeks at
/// either end are dropped; an incomplete week between complete ones is an
/// error because it would break the lag structure.
pub fn aggregate_weekly(
    daily: &[DailyRecord],
    opts: &AggregateOptions,
    label: impl Into<String>,
) -> Result<WeeklySeries> {
    if daily.is_empty() {
        return Err(Error::data("no daily records"));
    }
    if !(opts.price_index_base > 0.0) {
        return Err(Error::data("base price index must be positive"));
    }
    let mut weeks: Vec<WeekAcc> = Vec::new();
    for d in daily {
        let start = monday_of(d.date);
        if weeks.last().is_none_or(|w| w.start != start) {
            if weeks.last().is_some_and(|w| w.start > start) {
                return Err(Error::data(format!("date {} out of order", d.date)));
            }
            weeks.push(WeekAcc::new(start));
        }
        weeks.last_mut().expect("pushed above").add(d, opts)?;
    }

    let first = weeks.iter().position(|w| w.days == 7);
    let last = weeks.iter().rposition(|w| w.days == 7);
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::data("no complete week"));
    };
    let records = weeks
        .into_iter()
        .skip(first)
        .take(last - first + 1)
        .map(|w| {
            if w.days != 7 {
                return Err(Error::data(format!(
                    "week starting {} has only {} days of data",
                    w.start, w.days
                )));
            }
            w.finish()
        })
        .collect::<Result<Vec<_>>>()?;
    WeeklySeries::new(label, records)
}

/// Writes `week_start,R_t,maxR_t,N_t,L_t`; absent targets become empty cells.
pub fn write_weekly_csv<W: Write>(sink: W, series: &WeeklySeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["week_start", "R_t", "maxR_t", "N_t", "L_t"])
        .map_err(csv_io)?;
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in series.records() {
        w.write_record([
            r.week_start.format("%Y-%m-%d").to_string(),
            r.total_precip.to_string(),
            r.max_daily_precip.to_string(),
            fmt(r.claims),
            fmt(r.loss),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monday() -> NaiveDate {
        NaiveDate::from_ymd_opt(2002, 1, 7).unwrap()
    }

    fn days(start: NaiveDate, precip: &[f64]) -> Vec<DailyRecord> {
        precip
            .iter()
            .enumerate()
            .map(|(i, &p)| DailyRecord::precipitation_only(start + Duration::days(i as i64), p))
            .collect()
    }

    fn agg(d: &[DailyRecord]) -> Result<WeeklySeries> {
        aggregate_weekly(d, &AggregateOptions::default(), "t")
    }

    #[test]
    fn constant_week() {
        let s = agg(&days(monday(), &[1.0; 7])).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.records()[0].total_precip, 7.0);
        assert_eq!(s.records()[0].max_daily_precip, 1.0);
    }

    #[test]
    fn uneven_week() {
        let s = agg(&days(monday(), &[0.0, 0.0, 5.0, 0.0, 2.0, 0.0, 0.0])).unwrap();
        assert_eq!(s.records()[0].total_precip, 7.0);
        assert_eq!(s.records()[0].max_daily_precip, 5.0);
    }

    #[test]
    fn fragment_has_no_complete_week() {
        let err = agg(&days(monday(), &[1.0; 6])).unwrap_err();
        assert!(err.to_string().contains("no complete week"));
        assert!(agg(&[]).is_err());
    }

    #[test]
    fn boundary_fragments_dropped() {
        // Thursday start, 3 + 14 + 2 days.
        let start = monday() + Duration::days(3);
        let s = agg(&days(start, &[1.0; 19])).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.records()[0].week_start, monday() + Duration::days(7));
    }

    #[test]
    fn interior_gap_rejected() {
        let mut d = days(monday(), &[1.0; 21]);
        d.remove(10);
        assert!(agg(&d).is_err());
    }

    #[test]
    fn claims_are_normalized_and_summed() {
        let mut d = days(monday(), &[1.0; 7]);
        for r in &mut d {
            r.claims = Some(1.0);
            r.homes_insured = Some(50_000.0);
            r.loss_nominal = Some(110.0);
            r.price_index = Some(110.0);
        }
        let s = agg(&d).unwrap();
        assert!((s.records()[0].claims.unwrap() - 14.0).abs() < 1e-12);
        assert!((s.records()[0].loss.unwrap() - 700.0).abs() < 1e-9);
    }

    #[test]
    fn partial_targets_rejected() {
        let mut d = days(monday(), &[1.0; 7]);
        d[3].claims = Some(2.0);
        assert!(agg(&d).is_err());
    }

    #[test]
    fn series_requires_consecutive_weeks() {
        let r = |d: NaiveDate| WeeklyRecord {
            week_start: d,
            total_precip: 0.0,
            max_daily_precip: 0.0,
            claims: None,
            loss: None,
        };
        assert!(WeeklySeries::new("x", vec![r(monday()), r(monday() + Duration::days(14))]).is_err());
        assert!(WeeklySeries::new("x", vec![r(monday() + Duration::days(1))]).is_err());
    }

    #[test]
    fn weekly_csv_has_empty_cells_for_absent_targets() {
        let s = agg(&days(monday(), &[0.5; 7])).unwrap();
        let mut buf = Vec::new();
        write_weekly_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "week_start,R_t,maxR_t,N_t,L_t\n2002-01-07,3.5,0.5,,\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn max_never_exceeds_total(p in proptest::collection::vec(0.0..80.0f64, 7..60), offset in 0i64..7) {
                let d = days(monday() + Duration::days(offset), &p);
                if let Ok(s) = agg(&d) {
                    for w in s.records() {
                        prop_assert!(w.max_daily_precip <= w.total_precip);
                        prop_assert!(w.max_daily_precip * 7.0 >= w.total_precip * (1.0 - 1e-12));
                    }
                }
            }
        }
    }
}
