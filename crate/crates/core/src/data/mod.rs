//! Daily ingestion, exposure/inflation normalization, weekly aggregation and
//! the lagged feature matrices used by the claims and loss models.

mod daily;
mod features;
pub mod synth;
mod weekly;

pub use daily::{
    deflate_loss, normalize_claims, parse_daily_csv, write_daily_csv, ColumnMap, DailyRecord,
    CLAIMS_SCALE,
};
pub use features::{
    build_claims_features, build_loss_features, claims_inputs, loss_inputs, CLAIMS_FEATURES,
    LOSS_FEATURES,
};
pub use synth::{generate_synthetic, SynthConfig, SyntheticData};
pub use weekly::{aggregate_weekly, write_weekly_csv, AggregateOptions, WeeklyRecord, WeeklySeries};
