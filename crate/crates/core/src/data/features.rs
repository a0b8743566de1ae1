use super::weekly::WeeklySeries;
use crate::{DesignMatrix, Error, Result};

/// Column names of the claims design matrix.
pub const CLAIMS_FEATURES: [&str; 3] = ["R_t", "R_t-1", "maxR_t"];
/// Column names of the loss design matrix.
pub const LOSS_FEATURES: [&str; 4] = ["R_t", "R_t-1", "maxR_t", "N_t"];

/// Precipitation features `(R_t, R_{t-1}, maxR_t)` for weeks 1.., dropping
/// the first week, which has no lag.
pub fn claims_inputs(series: &WeeklySeries) -> Result<DesignMatrix> {
    let recs = series.records();
    if recs.len() < 2 {
        return Err(Error::data(format!(
            "series `{}` needs at least 2 weeks, has {}",
            series.label(),
            recs.len()
        )));
    }
    let rows: Vec<[f64; 3]> = recs
        .windows(2)
        .map(|w| [w[1].total_precip, w[0].total_precip, w[1].max_daily_precip])
        .collect();
    DesignMatrix::from_rows(&rows)
}

/// Claims design matrix and the aligned target `N_t`.
pub fn build_claims_features(series: &WeeklySeries) -> Result<(DesignMatrix, Vec<f64>)> {
    let x = claims_inputs(series)?;
    let y = series.records()[1..]
        .iter()
        .map(|r| {
            r.claims.ok_or_else(|| {
                Error::data(format!("week {} has no claims (N_t)", r.week_start))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((x, y))
}

/// Loss features: the claims features with `claims` appended as a fourth
/// column. `claims` is observed `N_t` when training and predicted claims
/// when projecting.
pub fn loss_inputs(series: &WeeklySeries, claims: &[f64]) -> Result<DesignMatrix> {
    let x = claims_inputs(series)?;
    if claims.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            found: claims.len(),
        });
    }
    x.with_column(claims)
}

/// Loss design matrix and the aligned target `L_t`.
pub fn build_loss_features(
    series: &WeeklySeries,
    claims: &[f64],
) -> Result<(DesignMatrix, Vec<f64>)> {
    let x = loss_inputs(series, claims)?;
    let y = series.records()[1..]
        .iter()
        .map(|r| {
            r.loss
                .ok_or_else(|| Error::data(format!("week {} has no loss (L_t)", r.week_start)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((x, y))
}
