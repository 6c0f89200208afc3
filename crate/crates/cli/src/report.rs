//! Human-readable tables and CSV output.
//!
//! Estimates CSV: `parameter,estimate,std_error,ci_lower,ci_upper,p_value`.
//!
//! Test CSV: `kappa,df,p_value,alpha,critical_value,reject,T`.
//!
//! Experiment CSV: `mode,dgp,T,r,coordinate,metric,value,mc_stderr,seed`,
//! one row per aggregated cell; `coordinate` is 1-based and empty for
//! whole-vector metrics. Metrics are `mae_constrained`, `mae_unconstrained`,
//! `coverage` and `rejection`.

use std::fmt::Write as _;

use psgd_core::simulate::experiment::ExperimentResult;
use psgd_core::{InferenceReport, TestResult};

/// `*` for p < 0.05, `•` for 0.05 ≤ p < 0.1, nothing otherwise.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "•"
    } else {
        ""
    }
}

fn pad(s: &str, width: usize) -> String {
    let n = s.chars().count();
    if n >= width {
        s.to_string()
    } else {
        format!("{}{s}", " ".repeat(width - n))
    }
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<String>| -> String {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i == 0 {
                    format!("{c}{}", " ".repeat(w - c.chars().count()))
                } else {
                    pad(c, w)
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    out.push_str(&line(header.iter().map(|s| s.to_string()).collect()));
    out.push('\n');
    for row in rows {
        out.push_str(line(row.clone()).trim_end());
        out.push('\n');
    }
    out
}

/// p-value to three decimals with its marker; the marker is chosen from the
/// unrounded value.
pub fn format_p(p: f64) -> String {
    format!("{p:.3}{}", significance_marker(p))
}

pub fn estimates_table(report: &InferenceReport, names: &[String]) -> String {
    let level = 100.0 * (1.0 - report.alpha);
    let lo = format!("{level}% lower");
    let hi = format!("{level}% upper");
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(&report.per_target)
        .map(|(n, iv)| {
            vec![
                n.clone(),
                format!("{:.4}", iv.estimate),
                format!("{:.4}", iv.std_error),
                format!("{:.4}", iv.lower),
                format!("{:.4}", iv.upper),
                format_p(iv.p_value),
            ]
        })
        .collect();
    table(&["parameter", "estimate", "std_error", &lo, &hi, "p_value"], &rows)
}

pub fn estimates_csv(report: &InferenceReport, names: &[String]) -> String {
    let mut out = String::from("parameter,estimate,std_error,ci_lower,ci_upper,p_value\n");
    for (n, iv) in names.iter().zip(&report.per_target) {
        writeln!(
            out,
            "{n},{},{},{},{},{}",
            iv.estimate, iv.std_error, iv.lower, iv.upper, iv.p_value
        )
        .unwrap();
    }
    out
}

pub fn test_summary(result: &TestResult, names: &[String]) -> String {
    let mut out = String::new();
    writeln!(out, "kappa          {:.4}", result.kappa).unwrap();
    writeln!(out, "df             {}", result.df).unwrap();
    writeln!(out, "p_value        {}", format_p(result.p_value)).unwrap();
    writeln!(
        out,
        "critical value {:.4} (alpha = {})",
        result.critical_value, result.alpha
    )
    .unwrap();
    writeln!(
        out,
        "decision       {}",
        if result.reject {
            "reject H0"
        } else {
            "fail to reject H0"
        }
    )
    .unwrap();
    writeln!(out, "T              {}", result.sample_size).unwrap();
    out.push('\n');
    let rows: Vec<Vec<String>> = names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            vec![
                n.clone(),
                format!("{:.4}", result.theta_bar_p[j]),
                format!("{:.4}", result.theta_bar_i[j]),
            ]
        })
        .collect();
    out.push_str(&table(&["parameter", "constrained", "unconstrained"], &rows));
    out
}

pub fn test_csv(result: &TestResult) -> String {
    format!(
        "kappa,df,p_value,alpha,critical_value,reject,T\n{},{},{},{},{},{},{}\n",
        result.kappa,
        result.df,
        result.p_value,
        result.alpha,
        result.critical_value,
        result.reject,
        result.sample_size
    )
}

pub const EXPERIMENT_HEADER: &str = "mode,dgp,T,r,coordinate,metric,value,mc_stderr,seed\n";

/// Rows of an experiment, without the header.
pub fn experiment_csv_rows(result: &ExperimentResult) -> String {
    let mut out = String::new();
    for row in &result.rows {
        let coord = row.coordinate.map(|j| (j + 1).to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            result.mode.as_str(),
            result.dgp,
            row.sample_size,
            row.r,
            coord,
            row.metric,
            row.value,
            row.mc_stderr,
            result.base_seed
        )
        .unwrap();
    }
    out
}

pub fn experiment_summary(result: &ExperimentResult) -> String {
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|row| {
            vec![
                row.sample_size.to_string(),
                format!("{}", row.r),
                row.coordinate.map(|j| format!("beta{}", j + 1)).unwrap_or_else(|| "-".into()),
                row.metric.to_string(),
                format!("{:.4}", row.value),
                format!("{:.4}", row.mc_stderr),
            ]
        })
        .collect();
    let mut out = format!(
        "{} / {} ({} replications, seed {})\n",
        result.mode.as_str(),
        result.dgp,
        result.replications,
        result.base_seed
    );
    out.push_str(&table(&["T", "r", "target", "metric", "value", "mc_se"], &rows));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers_follow_thresholds() {
        assert_eq!(significance_marker(0.0), "*");
        assert_eq!(significance_marker(0.049_999), "*");
        assert_eq!(significance_marker(0.05), "•");
        assert_eq!(significance_marker(0.0999), "•");
        assert_eq!(significance_marker(0.1), "");
        assert_eq!(significance_marker(0.7), "");
        // rounding to 0.050 must not move a p below 0.05 into the • class
        assert_eq!(format_p(0.0499996), "0.050*");
    }

    #[test]
    fn table_alignment() {
        let t = table(
            &["a", "value"],
            &[vec!["x".into(), "1.5".into()], vec!["long".into(), "-10.25".into()]],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a      value");
        assert_eq!(lines[1], "x        1.5");
        assert_eq!(lines[2], "long  -10.25");
    }
}
