//! Report rendering: comparison tables, CSV export, and plot data.
//!
//! Machine outputs (CSV, plot data) carry six significant digits so they
//! parse back to the values they were rendered from; the human table rounds
//! to two decimals in the house style of the metric tables it mirrors.

use aerorag_core::bench::Level;
use aerorag_core::evaluator::ScoreReport;

/// Format with six significant digits, round-trippable through `parse`.
/// Non-finite values render as `inf`/`-inf`/`NaN`, which `f64::from_str`
/// also accepts.
pub fn fmt_sig6(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.5e}")
}

/// Round to six significant digits (the value a parse-back of [`fmt_sig6`]
/// yields).
#[cfg(test)]
pub fn round_sig6(v: f64) -> f64 {
    fmt_sig6(v).parse().unwrap_or(v)
}

fn fmt_cell(v: f64, decimals: usize) -> String {
    if v.is_finite() {
        format!("{v:.decimals$}")
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        "NaN".into()
    }
}

type MetricRow = (&'static str, fn(&ScoreReport) -> f64, usize);

/// The metric rows of the comparison table, in the order the reference
/// tables use: Correct, Correct Form., Miscalc., MisC, then the MSE pair.
const METRIC_ROWS: &[MetricRow] = &[
    ("Correct (%)", |r| r.correct_pct, 2),
    ("Correct Form. (%)", |r| r.correct_form_pct, 2),
    ("Miscalc. (%)", |r| r.miscalc_pct, 2),
    ("MisC (%)", |r| r.misc_among_correct_form_pct, 2),
    ("MSE", |r| r.mse, 4),
    ("log10(MSE)", |r| r.log10_mse, 4),
];

/// Render the model-comparison table: metrics as rows, models as columns,
/// then a per-level accuracy section with levels as rows.
pub fn render_table(reports: &[ScoreReport]) -> String {
    let mut out = String::new();
    let label_width = 18;
    let col_width = reports
        .iter()
        .map(|r| r.model_id.len().max(12))
        .max()
        .unwrap_or(12)
        + 2;

    out.push_str(&format!("{:<label_width$}", "Metric"));
    for r in reports {
        out.push_str(&format!("{:>col_width$}", r.model_id));
    }
    out.push('\n');
    for (label, getter, decimals) in METRIC_ROWS {
        out.push_str(&format!("{label:<label_width$}"));
        for r in reports {
            let cell = if *label == "MSE" {
                fmt_sig6(getter(r))
            } else {
                fmt_cell(getter(r), *decimals)
            };
            out.push_str(&format!("{cell:>col_width$}"));
        }
        out.push('\n');
    }

    out.push('\n');
    out.push_str(&format!("{:<label_width$}", "Level"));
    for r in reports {
        out.push_str(&format!("{:>col_width$}", r.model_id));
    }
    out.push('\n');
    for level in Level::ALL {
        out.push_str(&format!("{:<label_width$}", level.name()));
        for r in reports {
            let cell = r
                .per_level_accuracy
                .get(&level)
                .map(|v| fmt_cell(*v, 2))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!("{cell:>col_width$}"));
        }
        out.push('\n');
    }
    out
}

/// CSV export: one row per model, all metrics plus per-level accuracies at
/// six significant digits.
pub fn render_csv(reports: &[ScoreReport]) -> String {
    let mut out = String::from(
        "model_id,n,correct_pct,correct_form_pct,miscalc_pct,misc_among_correct_form_pct,mse,log10_mse,basic_pct,intermediate_pct,advanced_pct,expert_pct\n",
    );
    for r in reports {
        let level = |l: Level| {
            r.per_level_accuracy
                .get(&l)
                .map(|v| fmt_sig6(*v))
                .unwrap_or_default()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.model_id,
            r.n,
            fmt_sig6(r.correct_pct),
            fmt_sig6(r.correct_form_pct),
            fmt_sig6(r.miscalc_pct),
            fmt_sig6(r.misc_among_correct_form_pct),
            fmt_sig6(r.mse),
            fmt_sig6(r.log10_mse),
            level(Level::Basic),
            level(Level::Intermediate),
            level(Level::Advanced),
            level(Level::Expert),
        ));
    }
    out
}

/// Plot data for the log-MSE comparison: `model_id,log10_mse`, one pair per
/// line.
pub fn render_plot_data(reports: &[ScoreReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&format!("{},{}\n", r.model_id, fmt_sig6(r.log10_mse)));
    }
    out
}

/// Parse a plot-data file back into (model, value) pairs.
#[cfg(test)]
pub fn parse_plot_data(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(|line| {
            let (model, value) = line.rsplit_once(',')?;
            Some((model.to_string(), value.parse().ok()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn report(model: &str, mse: f64) -> ScoreReport {
        let mut per_level = BTreeMap::new();
        per_level.insert(Level::Basic, 80.0);
        per_level.insert(Level::Intermediate, 60.0);
        per_level.insert(Level::Advanced, 80.0);
        per_level.insert(Level::Expert, 80.0);
        ScoreReport {
            model_id: model.into(),
            n: 20,
            correct_pct: 75.0,
            correct_form_pct: 95.0,
            miscalc_pct: 20.0,
            misc_among_correct_form_pct: 21.052631578947366,
            mse,
            log10_mse: if mse == 0.0 {
                f64::NEG_INFINITY
            } else {
                mse.log10()
            },
            per_level_accuracy: per_level,
            counts: None,
        }
    }

    #[test]
    fn sig6_round_trips() {
        for v in [26.666666666666668, 4.122536468204783e15, 1.0, 0.001234567] {
            let shown = fmt_sig6(v);
            let parsed: f64 = shown.parse().unwrap();
            assert!(
                ((parsed - v) / v).abs() < 1e-5,
                "{v} -> {shown} -> {parsed}"
            );
        }
        assert_eq!(fmt_sig6(f64::NEG_INFINITY), "-inf");
        assert_eq!("-inf".parse::<f64>().unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn table_has_metric_rows_in_reference_order() {
        let table = render_table(&[report("model-a", 214.74), report("model-b", 1e9)]);
        let correct = table.find("Correct (%)").unwrap();
        let form = table.find("Correct Form. (%)").unwrap();
        let miscalc = table.find("Miscalc. (%)").unwrap();
        let misc = table.find("MisC (%)").unwrap();
        assert!(correct < form && form < miscalc && miscalc < misc);
        assert!(table.contains("model-a") && table.contains("model-b"));
        // Per-level section lists levels as rows.
        let basic = table.find("Basic").unwrap();
        let expert = table.find("Expert").unwrap();
        assert!(misc < basic && basic < expert);
    }

    #[test]
    fn csv_parses_back_to_the_same_values() {
        let reports = [report("model-a", 214.74)];
        let csv = render_csv(&reports);
        let line = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], "model-a");
        let correct: f64 = fields[2].parse().unwrap();
        assert_eq!(correct, round_sig6(reports[0].correct_pct));
        let misc: f64 = fields[5].parse().unwrap();
        assert_eq!(misc, round_sig6(reports[0].misc_among_correct_form_pct));
    }

    #[test]
    fn plot_data_round_trips_including_sentinel() {
        let reports = [report("a", 214.74), report("b", 0.0)];
        let text = render_plot_data(&reports);
        let pairs = parse_plot_data(&text);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].0, "a");
        assert_eq!(pairs[0].1, round_sig6(214.74f64.log10()));
        assert_eq!(pairs[1].1, f64::NEG_INFINITY);
    }
}
