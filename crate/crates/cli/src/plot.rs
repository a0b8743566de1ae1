//! Minimal SVG charts.

use std::fmt::Write;

use climrisk::metrics::FittedSeries;
use climrisk::pipeline::{ModelKind, ProjectionResult};

const W: f64 = 900.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>, include_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = if include_zero { (0.0, 0.0) } else { (f64::INFINITY, f64::NEG_INFINITY) };
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    (lo, hi)
}

/// Grouped bars of the claims and loss changes per scenario and sub-period.
pub fn delta_bars(results: &[ProjectionResult]) -> String {
    let mut out = String::new();
    header(&mut out, "Projected change relative to control (%)");
    let groups: Vec<(String, f64, f64)> = results
        .iter()
        .flat_map(|r| {
            r.periods
                .iter()
                .map(move |p| (format!("{} {}", r.scenario, p.period.label()), p.delta_claims_pct, p.delta_loss_pct))
        })
        .collect();
    let (lo, hi) = range(groups.iter().flat_map(|g| [g.1, g.2]), true);
    let y = |v: f64| PAD + (hi - v) / (hi - lo) * (H - 2.0 * PAD);
    let slot = (W - 2.0 * PAD) / groups.len().max(1) as f64;
    let bar = slot * 0.35;
    let _ = writeln!(out, r##"<line x1="{PAD}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"/>"##, y(0.0), W - PAD, y(0.0));
    for (k, (label, dc, dl)) in groups.iter().enumerate() {
        let x0 = PAD + k as f64 * slot + slot * 0.15;
        for (j, (v, colour)) in [(*dc, "#3b6ea5"), (*dl, "#d1803a")].into_iter().enumerate() {
            let (top, bottom) = (y(v.max(0.0)), y(v.min(0.0)));
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{top:.2}" width="{bar:.2}" height="{:.2}" fill="{colour}"><title>{}: {v:.2}%</title></rect>"#,
                x0 + j as f64 * bar,
                bottom - top,
                escape(label)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" transform="rotate(-40 {:.2} {:.2})">{}</text>"#,
            x0 + bar,
            H - PAD + 14.0,
            x0 + bar,
            H - PAD + 14.0,
            escape(label)
        );
    }
    for v in [hi, lo] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, PAD - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(out, r##"<text x="{:.2}" y="40" fill="#3b6ea5">claims</text><text x="{:.2}" y="40" fill="#d1803a">loss</text>"##, W - PAD - 90.0, W - PAD - 40.0);
    out.push_str("</svg>\n");
    out
}

/// Observed weekly claims with the fitted series of each model.
pub fn fitted_lines(series: &[(ModelKind, &FittedSeries)]) -> String {
    let mut out = String::new();
    header(&mut out, "Observed and fitted weekly claims");
    let Some((_, first)) = series.first() else {
        out.push_str("</svg>\n");
        return out;
    };
    let n = first.claims_observed.len();
    let (lo, hi) = range(
        first
            .claims_observed
            .iter()
            .copied()
            .chain(series.iter().flat_map(|(_, s)| s.claims_fitted.iter().copied())),
        false,
    );
    let x = |i: usize| PAD + i as f64 / (n.max(2) - 1) as f64 * (W - 2.0 * PAD);
    let y = |v: f64| PAD + (hi - v) / (hi - lo) * (H - 2.0 * PAD);
    let line = |values: &[f64], colour: &str, width: f64| {
        let pts: Vec<String> = values.iter().enumerate().map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v))).collect();
        format!(
            r#"<polyline fill="none" stroke="{colour}" stroke-width="{width}" points="{}"/>"#,
            pts.join(" ")
        )
    };
    let _ = writeln!(out, "{}", line(&first.claims_observed, "#000000", 1.2));
    let colours = ["#3b6ea5", "#d1803a", "#3a9d5d"];
    for (k, (kind, s)) in series.iter().enumerate() {
        let c = colours[k % colours.len()];
        let _ = writeln!(out, "{}", line(&s.claims_fitted, c, 0.8));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" fill="{c}">{}</text>"#, W - PAD - 60.0, 40.0 + 14.0 * k as f64, kind.name());
    }
    let _ = writeln!(out, r#"<text x="{PAD}" y="40">observed</text>"#);
    out.push_str("</svg>\n");
    out
}
