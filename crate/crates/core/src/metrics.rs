//! Performance and signal-quality metrics.
//!
//! Conventions: 252 trading days per year; geometric annualization by
//! default with an arithmetic (mean times 252) alternative; Sharpe ratios
//! use the sample standard deviation and are undefined (not signed
//! infinity) for zero-variance series; drawdowns are fractions of the
//! running peak.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::FactorSeries;
use crate::panel::Panel;
use crate::scalar::{mean, sample_std, Scalar};

pub const TRADING_DAYS_PER_YEAR: usize = 252;

/// How a daily series is scaled to a yearly figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Annualization {
    /// Compound the dailies, then take the 252/T power.
    #[default]
    Geometric,
    /// Mean daily return times 252.
    Arithmetic,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty series")]
    Empty,
    #[error("need at least {need} values, got {got}")]
    Insufficient { need: usize, got: usize },
    #[error("return at index {index} is <= -1; wealth is wiped out and cannot compound")]
    NonCompoundable { index: usize },
    #[error("wealth curve must start positive and stay non-negative")]
    BadWealth,
}

/// Annualizes a daily return series.
pub fn annualized_return<R: Scalar>(
    returns: &[R],
    mode: Annualization,
) -> Result<R, MetricsError> {
    if returns.is_empty() {
        return Err(MetricsError::Empty);
    }
    match mode {
        Annualization::Geometric => {
            let mut growth = R::one();
            for (i, &r) in returns.iter().enumerate() {
                if r <= -R::one() {
                    return Err(MetricsError::NonCompoundable { index: i });
                }
                growth = growth * (R::one() + r);
            }
            let power = R::from_usize_lossy(TRADING_DAYS_PER_YEAR)
                / R::from_usize_lossy(returns.len());
            Ok(growth.powf(power) - R::one())
        }
        Annualization::Arithmetic => {
            let m = mean(returns).expect("non-empty");
            Ok(m * R::from_usize_lossy(TRADING_DAYS_PER_YEAR))
        }
    }
}

/// Annualized Sharpe ratio (zero risk-free rate): mean over sample std,
/// times sqrt(252). `Ok(None)` when the series has zero variance.
pub fn sharpe_ratio<R: Scalar>(returns: &[R]) -> Result<Option<R>, MetricsError> {
    if returns.len() < 2 {
        return Err(MetricsError::Insufficient {
            need: 2,
            got: returns.len(),
        });
    }
    let m = mean(returns).expect("non-empty");
    let sd = sample_std(returns).expect("len >= 2");
    if sd == R::zero() {
        return Ok(None);
    }
    Ok(Some(
        m / sd * R::from_usize_lossy(TRADING_DAYS_PER_YEAR).sqrt(),
    ))
}

/// Maximum fractional drop from a running peak. The curve must start
/// positive; zero entries are allowed (a wiped-out book drops exactly 1).
pub fn max_drawdown<R: Scalar>(wealth: &[R]) -> Result<R, MetricsError> {
    if wealth.is_empty() {
        return Err(MetricsError::Empty);
    }
    if wealth[0] <= R::zero() || wealth.iter().any(|&w| w < R::zero()) {
        return Err(MetricsError::BadWealth);
    }
    let mut peak = wealth[0];
    let mut worst = R::zero();
    for &w in wealth {
        if w > peak {
            peak = w;
        }
        // 1 - w/peak, not (peak - w)/peak: one rounding instead of two.
        let dd = R::one() - w / peak;
        if dd > worst {
            worst = dd;
        }
    }
    Ok(worst)
}

/// Midpoint (average) ranks, 0-based positions.
fn midpoint_ranks<R: Scalar>(xs: &[R]) -> Vec<R> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite"));
    let mut ranks = vec![R::zero(); n];
    let mut j = 0;
    while j < n {
        let mut k = j + 1;
        while k < n && xs[order[k]] == xs[order[j]] {
            k += 1;
        }
        let pos = R::from_usize_lossy(j + k - 1) / R::from_f64_lossy(2.0);
        for &idx in &order[j..k] {
            ranks[idx] = pos;
        }
        j = k;
    }
    ranks
}

/// Spearman rank correlation with midpoint ties. `None` for fewer than two
/// pairs or a constant side.
pub fn spearman<R: Scalar>(x: &[R], y: &[R]) -> Option<R> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let rx = midpoint_ranks(x);
    let ry = midpoint_ranks(y);
    let mx = mean(&rx)?;
    let my = mean(&ry)?;
    let mut sxx = R::zero();
    let mut syy = R::zero();
    let mut sxy = R::zero();
    for i in 0..rx.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    if sxx == R::zero() || syy == R::zero() {
        return None;
    }
    // A perfectly monotone pairing must come out as exactly +/-1, not
    // 1-minus-an-ulp, so catch it before the square root can round.
    if sxy * sxy == sxx * syy {
        return Some(if sxy > R::zero() { R::one() } else { -R::one() });
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Daily information coefficients of a factor against next-date returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct IcSummary<R: Scalar> {
    /// Decision dates that produced a usable coefficient.
    pub dates: Vec<NaiveDate>,
    pub ics: Vec<R>,
    pub ic_mean: Option<R>,
    /// Information ratio of the IC series: mean over sample std.
    pub ir: Option<R>,
    /// Dates skipped for too few pairs or a degenerate section.
    pub skipped: usize,
}

/// Computes the per-date Spearman IC between factor values at `t` and
/// panel returns at the next calendar date. Dates with fewer than three
/// usable pairs, or where either side is constant, are skipped and
/// counted.
pub fn ic_series<R: Scalar>(factor: &FactorSeries<R>, panel: &Panel<R>) -> IcSummary<R> {
    assert_eq!(factor.dates, panel.calendar(), "factor/panel misalignment");
    assert_eq!(factor.instruments, panel.instruments());
    let n_d = panel.n_dates();
    let n_i = panel.n_instruments();

    let mut dates = Vec::new();
    let mut ics = Vec::new();
    let mut skipped = 0usize;
    for d in 0..n_d.saturating_sub(1) {
        let mut xs: Vec<R> = Vec::new();
        let mut ys: Vec<R> = Vec::new();
        for i in 0..n_i {
            if let (Some(f), Some(r)) = (factor.value(d, i), panel.ret(d + 1, i)) {
                xs.push(f);
                ys.push(r);
            }
        }
        if xs.len() < 3 {
            skipped += 1;
            continue;
        }
        match spearman(&xs, &ys) {
            Some(ic) => {
                dates.push(panel.calendar()[d]);
                ics.push(ic);
            }
            None => skipped += 1,
        }
    }

    let ic_mean = mean(&ics);
    let ir = match (ic_mean, sample_std(&ics)) {
        (Some(m), Some(sd)) if sd > R::zero() => Some(m / sd),
        _ => None,
    };
    IcSummary {
        dates,
        ics,
        ic_mean,
        ir,
        skipped,
    }
}

/// Headline statistics for one daily return series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct PerformanceSummary<R: Scalar> {
    pub annualized_return: R,
    /// `None` when the series variance is zero.
    pub sharpe_ratio: Option<R>,
    pub max_drawdown: R,
    /// Number of daily returns the statistics were computed from.
    pub n_days: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_annualization_matches_frozen_values() {
        let r = annualized_return(&[0.1f64, -0.1], Annualization::Geometric).unwrap();
        assert!((r - -0.7181393044595326).abs() < 1e-12);
        let r = annualized_return(&[0.01f64; 3], Annualization::Geometric).unwrap();
        assert!((r - 11.27400209924035).abs() < 1e-9);
    }

    #[test]
    fn arithmetic_annualization_is_mean_times_252() {
        let r = annualized_return(&[0.01f64, 0.03], Annualization::Arithmetic).unwrap();
        assert!((r - 5.04).abs() < 1e-12);
        // Arithmetic mode tolerates sub--1 returns; geometric refuses.
        assert!(annualized_return(&[-1.5f64, 0.5], Annualization::Arithmetic).is_ok());
        assert_eq!(
            annualized_return(&[0.5f64, -1.5], Annualization::Geometric),
            Err(MetricsError::NonCompoundable { index: 1 })
        );
    }

    #[test]
    fn sharpe_matches_frozen_values() {
        let s = sharpe_ratio(&[0.01f64, 0.03]).unwrap().unwrap();
        assert!((s - 22.449944320643652).abs() < 1e-12);
        let s = sharpe_ratio(&[0.02f64, -0.01, 0.005, 0.03]).unwrap().unwrap();
        assert!((s - 10.205040771249136).abs() < 1e-12);
    }

    #[test]
    fn sharpe_zero_variance_is_undefined_not_infinite() {
        assert_eq!(sharpe_ratio(&[0.01f64, 0.01, 0.01]), Ok(None));
        assert_eq!(
            sharpe_ratio(&[0.01f64]),
            Err(MetricsError::Insufficient { need: 2, got: 1 })
        );
    }

    #[test]
    fn sharpe_is_scale_invariant() {
        let xs = [0.02f64, -0.01, 0.005, 0.03];
        let scaled: Vec<f64> = xs.iter().map(|x| x * 3.5).collect();
        let a = sharpe_ratio(&xs).unwrap().unwrap();
        let b = sharpe_ratio(&scaled).unwrap().unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn drawdown_matches_hand_values() {
        let dd = max_drawdown(&[1.0f64, 1.2, 0.6, 0.9, 0.3]).unwrap();
        assert!((dd - 0.75).abs() < 1e-15);
        assert_eq!(max_drawdown(&[1.0f64, 1.1, 1.2]).unwrap(), 0.0);
        // Monotone curve after a wipe-out: drop is exactly 1.
        assert_eq!(max_drawdown(&[1.0f64, 0.5, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(max_drawdown::<f64>(&[]), Err(MetricsError::Empty));
        assert_eq!(max_drawdown(&[0.0f64, 1.0]), Err(MetricsError::BadWealth));
    }

    #[test]
    fn spearman_matches_hand_values() {
        let r = spearman(&[1.0f64, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
        // Ties: x ranks [0.5, 0.5, 2], y ranks [0, 2, 1]; covariance is 0.
        let r = spearman(&[1.0f64, 1.0, 2.0], &[3.0, 5.0, 4.0]).unwrap();
        assert_eq!(r, 0.0);
        // Monotone transforms do not change it.
        let x = [0.3f64, -1.0, 2.0, 0.7];
        let y = [5.0f64, 1.0, 9.0, 6.0];
        let fx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x, &y).unwrap() - spearman(&fx, &y).unwrap()).abs() < 1e-15);
        assert_eq!(spearman(&[1.0f64, 1.0], &[2.0, 3.0]), None);
    }
}
