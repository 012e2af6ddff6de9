//! Text output: CSV tables and number formatting.
//!
//! Nothing is quoted, decimals use '.', and metric values carry six
//! significant digits. Undefined cells (a Sharpe ratio of a zero-variance
//! series, an IC mean with no usable dates) are left empty.

use basislab_core::ipca::AlphaReport;
use basislab_core::metrics::{IcSummary, PerformanceSummary};
use basislab_core::portfolio::BacktestResult;

/// Six significant digits, plain decimal notation.
pub fn fmt_metric(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_metric).unwrap_or_default()
}

/// The raw-plus-fee metric triple shared by the summary tables.
pub fn summary_cells(raw: &PerformanceSummary<f64>, fee: &PerformanceSummary<f64>) -> String {
    format!(
        "{},{},{},{},{},{}",
        fmt_metric(raw.annualized_return),
        fmt_opt(raw.sharpe_ratio),
        fmt_metric(raw.max_drawdown),
        fmt_metric(fee.annualized_return),
        fmt_opt(fee.sharpe_ratio),
        fmt_metric(fee.max_drawdown),
    )
}

pub const SUMMARY_HEADER: &str = "annualized_return,sharpe_ratio,max_drawdown,\
annualized_return_fee,sharpe_ratio_fee,max_drawdown_fee";

/// One summary table over named rows.
pub fn summary_table(
    label: &str,
    rows: &[(String, PerformanceSummary<f64>, PerformanceSummary<f64>)],
) -> String {
    let mut out = format!("{label},{SUMMARY_HEADER}\n");
    for (name, raw, fee) in rows {
        out.push_str(&format!("{name},{}\n", summary_cells(raw, fee)));
    }
    out
}

/// The six-row composite grid: each polarity strategy crossed with each
/// trade mode.
pub fn multi_table(
    rows: &[(String, String, PerformanceSummary<f64>, PerformanceSummary<f64>)],
) -> String {
    let mut out = format!("strategy,mode,{SUMMARY_HEADER}\n");
    for (strategy, mode, raw, fee) in rows {
        out.push_str(&format!("{strategy},{mode},{}\n", summary_cells(raw, fee)));
    }
    out
}

/// Daily series of one backtest: realized date, raw and fee-adjusted
/// return, turnover.
pub fn returns_table(result: &BacktestResult<f64>) -> String {
    let mut out = String::from("date,return,fee_return,turnover\n");
    for (j, date) in result.dates.iter().enumerate() {
        out.push_str(&format!(
            "{date},{},{},{}\n",
            fmt_metric(result.returns[j]),
            fmt_metric(result.fee_returns[j]),
            fmt_metric(result.turnover[j]),
        ));
    }
    out
}

/// Wealth curves of one backtest. The first row is the starting wealth on
/// the first decision date; each later row is dated by realization.
pub fn wealth_table(result: &BacktestResult<f64>, first_date: chrono::NaiveDate) -> String {
    let mut out = String::from("date,wealth,fee_wealth\n");
    out.push_str(&format!(
        "{first_date},{},{}\n",
        fmt_metric(result.wealth[0]),
        fmt_metric(result.fee_wealth[0]),
    ));
    for (j, date) in result.dates.iter().enumerate() {
        out.push_str(&format!(
            "{date},{},{}\n",
            fmt_metric(result.wealth[j + 1]),
            fmt_metric(result.fee_wealth[j + 1]),
        ));
    }
    out
}

/// Per-factor signal quality: mean information coefficient and its
/// information ratio.
pub fn ic_table(rows: &[(String, IcSummary<f64>)]) -> String {
    let mut out = String::from("factor,ic_mean,ir\n");
    for (name, summary) in rows {
        out.push_str(&format!(
            "{name},{},{}\n",
            fmt_opt(summary.ic_mean),
            fmt_opt(summary.ir),
        ));
    }
    out
}

/// Annualized alphas with significance stars, one row per factor, one
/// column per trade mode.
pub fn alpha_table(rows: &[(String, AlphaReport<f64>, AlphaReport<f64>)]) -> String {
    let mut out = String::from("factor,alpha_long_short,alpha_long_only\n");
    for (name, long_short, long_only) in rows {
        out.push_str(&format!(
            "{name},{}{},{}{}\n",
            fmt_metric(long_short.alpha_annualized),
            long_short.significance.as_str(),
            fmt_metric(long_only.alpha_annualized),
            long_only.significance.as_str(),
        ));
    }
    out
}
