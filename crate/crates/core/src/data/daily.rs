use std::io::{Read, Write};

use chrono::NaiveDate;

use crate::{Error, Result};

/// Claims are expressed per this many insured homes.
pub const CLAIMS_SCALE: f64 = 100_000.0;

/// One calendar day of observations. Scenario data carries precipitation only.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub precipitation_mm: f64,
    pub claims: Option<f64>,
    pub loss_nominal: Option<f64>,
    pub homes_insured: Option<f64>,
    pub price_index: Option<f64>,
}

impl DailyRecord {
    pub fn precipitation_only(date: NaiveDate, precipitation_mm: f64) -> Self {
        Self {
            date,
            precipitation_mm,
            claims: None,
            loss_nominal: None,
            homes_insured: None,
            price_index: None,
        }
    }
}

/// Header names of the daily CSV columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub date: String,
    pub precipitation: String,
    pub claims: String,
    pub loss: String,
    pub homes_insured: String,
    pub price_index: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            date: "date".into(),
            precipitation: "precip_mm".into(),
            claims: "claims".into(),
            loss: "loss".into(),
            homes_insured: "homes_insured".into(),
            price_index: "price_index".into(),
        }
    }
}

/// Claims per [`CLAIMS_SCALE`] insured homes.
pub fn normalize_claims(claims: f64, homes_insured: f64) -> Result<f64> {
    if !(homes_insured > 0.0) {
        return Err(Error::data(format!(
            "homes insured must be positive, got {homes_insured}"
        )));
    }
    Ok(claims / homes_insured * CLAIMS_SCALE)
}

/// Converts a nominal amount to base-period prices.
pub fn deflate_loss(loss_nominal: f64, index_t: f64, index_base: f64) -> Result<f64> {
    if !(index_t > 0.0) || !(index_base > 0.0) {
        return Err(Error::data(format!(
            "price indices must be positive, got {index_t} and {index_base}"
        )));
    }
    Ok(loss_nominal * index_base / index_t)
}

struct Positions {
    date: usize,
    precip: usize,
    claims: Option<usize>,
    loss: Option<usize>,
    homes: Option<usize>,
    index: Option<usize>,
}

fn locate(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Positions> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing required column `{name}`"),
        })
    };
    Ok(Positions {
        date: required(&map.date)?,
        precip: required(&map.precipitation)?,
        claims: find(&map.claims),
        loss: find(&map.loss),
        homes: find(&map.homes_insured),
        index: find(&map.price_index),
    })
}

fn cell<'r>(rec: &'r csv::StringRecord, pos: usize) -> &'r str {
    rec.get(pos).unwrap_or("").trim()
}

fn number(rec: &csv::StringRecord, pos: usize, name: &str, line: usize) -> Result<f64> {
    let raw = cell(rec, pos);
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("column `{name}`: cannot parse `{raw}` as a number"),
        })
}

fn optional(
    rec: &csv::StringRecord,
    pos: Option<usize>,
    name: &str,
    line: usize,
) -> Result<Option<f64>> {
    match pos {
        Some(p) if !cell(rec, p).is_empty() => number(rec, p, name, line).map(Some),
        _ => Ok(None),
    }
}

/// Parses a daily CSV. Dates must be strictly increasing; line numbers in
/// errors are 1-based and count the header.
pub fn parse_daily_csv<R: Read>(source: R, columns: &ColumnMap) -> Result<Vec<DailyRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let pos = locate(headers, columns)?;

    let mut out: Vec<DailyRecord> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let fallback_line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line: e
                .position()
                .map_or(fallback_line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(fallback_line, |p| p.line() as usize);

        let raw_date = cell(&rec, pos.date);
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse date `{raw_date}` (expected YYYY-MM-DD)"),
        })?;
        let precipitation_mm = number(&rec, pos.precip, &columns.precipitation, line)?;
        if precipitation_mm < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("negative precipitation {precipitation_mm}"),
            });
        }
        let claims = optional(&rec, pos.claims, &columns.claims, line)?;
        let loss_nominal = optional(&rec, pos.loss, &columns.loss, line)?;
        let homes_insured = optional(&rec, pos.homes, &columns.homes_insured, line)?;
        let price_index = optional(&rec, pos.index, &columns.price_index, line)?;
        for (name, v) in [(&columns.claims, claims), (&columns.loss, loss_nominal)] {
            if v.is_some_and(|v| v < 0.0) {
                return Err(Error::Parse {
                    line,
                    message: format!("column `{name}` must be non-negative"),
                });
            }
        }
        for (name, v) in [
            (&columns.homes_insured, homes_insured),
            (&columns.price_index, price_index),
        ] {
            if v.is_some_and(|v| v <= 0.0) {
                return Err(Error::Parse {
                    line,
                    message: format!("column `{name}` must be positive"),
                });
            }
        }
        if let Some(prev) = out.last() {
            if date <= prev.date {
                return Err(Error::Parse {
                    line,
                    message: format!("date {date} does not follow {}", prev.date),
                });
            }
        }
        out.push(DailyRecord {
            date,
            precipitation_mm,
            claims,
            loss_nominal,
            homes_insured,
            price_index,
        });
    }
    Ok(out)
}

/// Writes daily records with the default column names. Optional columns are
/// emitted only when at least one record carries them.
pub fn write_daily_csv<W: Write>(sink: W, records: &[DailyRecord]) -> Result<()> {
    let map = ColumnMap::default();
    let has_claims = records.iter().any(|r| r.claims.is_some());
    let has_loss = records.iter().any(|r| r.loss_nominal.is_some());
    let has_homes = records.iter().any(|r| r.homes_insured.is_some());
    let has_index = records.iter().any(|r| r.price_index.is_some());

    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec![map.date.as_str(), map.precipitation.as_str()];
    let optional = [
        (has_claims, map.claims.as_str()),
        (has_loss, map.loss.as_str()),
        (has_homes, map.homes_insured.as_str()),
        (has_index, map.price_index.as_str()),
    ];
    header.extend(optional.iter().filter(|(on, _)| *on).map(|(_, n)| *n));
    w.write_record(&header).map_err(csv_io)?;

    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in records {
        let mut row = vec![r.date.format("%Y-%m-%d").to_string(), r.precipitation_mm.to_string()];
        if has_claims {
            row.push(fmt(r.claims));
        }
        if has_loss {
            row.push(fmt(r.loss_nominal));
        }
        if has_homes {
            row.push(fmt(r.homes_insured));
        }
        if has_index {
            row.push(fmt(r.price_index));
        }
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<DailyRecord>> {
        parse_daily_csv(s.as_bytes(), &ColumnMap::default())
    }

    #[test]
    fn three_rows_in_order() {
        let recs = parse(
            "date,precip_mm,claims\n2002-01-01,1.5,2\n2002-01-02,0,0\n2002-01-03,3.25,1\n",
        )
        .unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].precipitation_mm, 3.25);
        assert_eq!(recs[0].claims, Some(2.0));
        assert!(recs.windows(2).all(|w| w[0].date < w[1].date));
    }

    #[test]
    fn negative_precipitation_names_row() {
        let err = parse("date,precip_mm\n2002-01-01,1\n2002-01-02,-1.0\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("negative"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn absent_claims_column_leaves_field_unset() {
        let recs = parse("date,precip_mm\n2002-01-01,1\n").unwrap();
        assert_eq!(recs[0].claims, None);
        assert_eq!(recs[0].homes_insured, None);
    }

    #[test]
    fn empty_optional_cell_is_absent() {
        let recs = parse("date,precip_mm,loss\n2002-01-01,1,\n").unwrap();
        assert_eq!(recs[0].loss_nominal, None);
    }

    #[test]
    fn non_monotone_dates_rejected() {
        let err = parse("date,precip_mm\n2002-01-02,1\n2002-01-02,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn malformed_number_reports_line() {
        let err = parse("date,precip_mm\n2002-01-01,1\n2002-01-02,x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn missing_required_column() {
        let err = parse("day,precip_mm\n2002-01-01,1\n").unwrap_err();
        assert!(err.to_string().contains("`date`"));
    }

    #[test]
    fn custom_column_names() {
        let map = ColumnMap {
            date: "day".into(),
            precipitation: "pr".into(),
            ..ColumnMap::default()
        };
        let recs = parse_daily_csv("day,pr\n2002-01-01,4\n".as_bytes(), &map).unwrap();
        assert_eq!(recs[0].precipitation_mm, 4.0);
    }

    #[test]
    fn claims_normalization() {
        assert_eq!(normalize_claims(10.0, 100_000.0).unwrap(), 10.0);
        assert_eq!(normalize_claims(0.0, 50_000.0).unwrap(), 0.0);
        assert!((normalize_claims(7.0, 35_000.0).unwrap() - 20.0).abs() < 1e-12);
        assert!(normalize_claims(1.0, 0.0).is_err());
        assert!(normalize_claims(1.0, -5.0).is_err());
    }

    #[test]
    fn loss_deflation() {
        assert_eq!(deflate_loss(100.0, 100.0, 100.0).unwrap(), 100.0);
        assert!((deflate_loss(110.0, 110.0, 100.0).unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(deflate_loss(0.0, 130.0, 100.0).unwrap(), 0.0);
        assert!(deflate_loss(1.0, 0.0, 100.0).is_err());
        assert!(deflate_loss(1.0, 100.0, -1.0).is_err());
    }

    #[test]
    fn write_then_parse() {
        let d = NaiveDate::from_ymd_opt(2002, 1, 1).unwrap();
        let recs = vec![
            DailyRecord {
                claims: Some(0.125),
                ..DailyRecord::precipitation_only(d, 1.1)
            },
            DailyRecord::precipitation_only(d.succ_opt().unwrap(), 0.3),
        ];
        let mut buf = Vec::new();
        write_daily_csv(&mut buf, &recs).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, recs);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn deflation_is_additive(a in 0.0..1e7f64, b in 0.0..1e7f64, it in 1.0..500.0f64, ib in 1.0..500.0f64) {
                let lhs = deflate_loss(a + b, it, ib).unwrap();
                let rhs = deflate_loss(a, it, ib).unwrap() + deflate_loss(b, it, ib).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
            }
        }
    }
}
