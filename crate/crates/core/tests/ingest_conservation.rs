mod common;

use climrisk::data::{aggregate_weekly, AggregateOptions};
use common::{complete_week_total, random_daily_fixture, rng};

#[test]
fn weekly_totals_conserve_daily_precipitation() {
    let mut r = rng(10);
    let mut checked = 0;
    for case in 0..1000 {
        let days = random_daily_fixture(&mut r);
        let (weeks, expected) = complete_week_total(&days);
        match aggregate_weekly(&days, &AggregateOptions::default(), "fixture") {
            Ok(series) => {
                assert_eq!(series.len(), weeks, "case {case}");
                let got: f64 = series.records().iter().map(|w| w.total_precip).sum();
                assert!(
                    (got - expected).abs() <= 1e-9 * expected.abs().max(f64::MIN_POSITIVE),
                    "case {case}: {got} vs {expected}"
                );
                for w in series.records() {
                    assert!(w.max_daily_precip <= w.total_precip);
                }
                checked += 1;
            }
            Err(e) => assert_eq!(weeks, 0, "case {case}: {e}"),
        }
    }
    assert!(checked > 500);
}
