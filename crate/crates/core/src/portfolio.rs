//! Decile portfolios and daily backtests.
//!
//! Weights are decided on each calendar date `t` from that date's factor
//! cross-section and held over `(t, t']` where `t'` is the next calendar
//! date. The top `n = max(1, floor(fraction * N))` instruments by value go
//! long with `+1/n` each; long-short books also short the bottom `n` at
//! `-1/n`, never shorting an instrument already held long. Ties break by
//! instrument id ascending, so results are deterministic.
//!
//! Fees charge `fee_rate` times the one-sided turnover of target weights,
//! `turnover(t) = sum_i |w_i(t) - w_i(t_prev)|` (first day: `sum |w_i|`).
//! A daily return at or below -1 wipes the book out: the run halts there
//! with a blow-up flag and the wealth curve ends at zero.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{evaluate, Expr, FactorSeries, FactorSpec};
use crate::metrics::{
    annualized_return, max_drawdown, sharpe_ratio, Annualization, PerformanceSummary,
};
use crate::panel::Panel;
use crate::scalar::Scalar;

/// Book construction style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TradeMode {
    LongShort,
    LongOnly,
}

impl TradeMode {
    pub fn name(self) -> &'static str {
        match self {
            TradeMode::LongShort => "long_short",
            TradeMode::LongOnly => "long_only",
        }
    }

    pub fn from_name(s: &str) -> Option<TradeMode> {
        match s {
            "long_short" => Some(TradeMode::LongShort),
            "long_only" => Some(TradeMode::LongOnly),
            _ => None,
        }
    }
}

/// Factor polarity: +1 trades the factor as-is, -1 trades it flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn value<R: Scalar>(self) -> R {
        match self {
            Sign::Pos => R::one(),
            Sign::Neg => -R::one(),
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Pos => "+1",
            Sign::Neg => "-1",
        }
    }
}

/// A factor's polarity over time: one fixed sign, or one sign per calendar
/// date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolaritySchedule {
    Fixed(Sign),
    PerDate(Vec<Sign>),
}

impl PolaritySchedule {
    pub fn at(&self, d: usize) -> Sign {
        match self {
            PolaritySchedule::Fixed(s) => *s,
            PolaritySchedule::PerDate(v) => v[d],
        }
    }
}

/// Target weights decided on one date, sorted by instrument id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct WeightVector<R: Scalar> {
    pub date: NaiveDate,
    pub entries: Vec<(String, R)>,
}

impl<R: Scalar> WeightVector<R> {
    pub fn is_flat(&self) -> bool {
        self.entries.is_empty()
    }
}

/// What was backtested, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct StrategyDescriptor<R: Scalar> {
    pub name: String,
    pub mode: TradeMode,
    pub fee_rate: R,
    pub fraction: R,
}

/// Daily backtest output. `returns[j]` is realized at `dates[j]`, decided
/// one calendar date earlier; `weights[j]` and `turnover[j]` belong to that
/// decision. Wealth curves have one more entry than returns and start at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct BacktestResult<R: Scalar> {
    pub descriptor: StrategyDescriptor<R>,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<R>,
    pub fee_returns: Vec<R>,
    pub turnover: Vec<R>,
    pub wealth: Vec<R>,
    pub fee_wealth: Vec<R>,
    pub weights: Vec<WeightVector<R>>,
    /// Instruments that had a weight but no realized next-date return;
    /// they contributed zero that day.
    pub unrealizable: Vec<Vec<String>>,
    /// True when a raw daily return hit -1 or below; the run halts there.
    pub blown_up: bool,
    /// Same for the fee-adjusted series.
    pub fee_blown_up: bool,
}

impl<R: Scalar> BacktestResult<R> {
    /// Headline statistics for the raw (`fee = false`) or fee-adjusted
    /// series. A wiped-out series reports annualized return -1 and its
    /// drawdown (exactly 1); Sharpe is `None` when undefined.
    pub fn summary(
        &self,
        fee: bool,
        mode: Annualization,
    ) -> Result<PerformanceSummary<R>, crate::metrics::MetricsError> {
        let (returns, wealth, blown) = if fee {
            (&self.fee_returns, &self.fee_wealth, self.fee_blown_up)
        } else {
            (&self.returns, &self.wealth, self.blown_up)
        };
        let ann = if blown {
            -R::one()
        } else {
            annualized_return(returns, mode)?
        };
        Ok(PerformanceSummary {
            annualized_return: ann,
            sharpe_ratio: sharpe_ratio(returns).ok().flatten(),
            max_drawdown: max_drawdown(wealth)?,
            n_days: returns.len(),
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PortfolioError {
    #[error("factor {name:?} produced no signals")]
    NoSignals { name: String },
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("panel has no dates")]
    EmptyPanel,
}

/// Forms decile weights from one date's cross-section.
///
/// `section` holds (instrument id, factor value) pairs; gaps are excluded
/// by the caller. Empty sections, and long-short books that cannot form a
/// short leg (a single instrument), yield a flat day.
pub fn decile_weights<R: Scalar>(
    date: NaiveDate,
    section: &[(&str, R)],
    mode: TradeMode,
    fraction: R,
) -> WeightVector<R> {
    assert!(
        fraction > R::zero() && fraction <= R::from_f64_lossy(0.5),
        "fraction must be in (0, 0.5]"
    );
    let n_section = section.len();
    if n_section == 0 {
        return WeightVector {
            date,
            entries: vec![],
        };
    }
    let n = (fraction * R::from_usize_lossy(n_section))
        .floor()
        .to_usize()
        .unwrap_or(0)
        .max(1);

    let mut desc: Vec<&(&str, R)> = section.iter().collect();
    desc.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("factor values are finite")
            .then_with(|| a.0.cmp(b.0))
    });
    let long: Vec<&str> = desc.iter().take(n).map(|e| e.0).collect();

    let share = R::one() / R::from_usize_lossy(n);
    let mut entries: Vec<(String, R)> = Vec::with_capacity(2 * n);
    match mode {
        TradeMode::LongOnly => {
            for id in &long {
                entries.push((id.to_string(), share));
            }
        }
        TradeMode::LongShort => {
            let mut asc: Vec<&(&str, R)> = section.iter().collect();
            asc.sort_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .expect("factor values are finite")
                    .then_with(|| a.0.cmp(b.0))
            });
            let short: Vec<&str> = asc
                .iter()
                .map(|e| e.0)
                .filter(|id| !long.contains(id))
                .take(n)
                .collect();
            if short.len() < n {
                // One-sided book (single-instrument section): stay flat.
                return WeightVector {
                    date,
                    entries: vec![],
                };
            }
            for id in &long {
                entries.push((id.to_string(), share));
            }
            for id in &short {
                entries.push((id.to_string(), -share));
            }
        }
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    WeightVector { date, entries }
}

/// Backtests one factor expression: evaluate, rank daily, hold one day.
pub fn backtest_single<R: Scalar>(
    spec: &FactorSpec<R>,
    panel: &Panel<R>,
    mode: TradeMode,
    fee_rate: R,
    fraction: R,
) -> Result<BacktestResult<R>, PortfolioError> {
    let factor = evaluate(spec, panel);
    run_series_backtest(&factor, panel, mode, fee_rate, fraction)
}

/// The shared daily loop backing both single- and multi-factor backtests.
pub fn run_series_backtest<R: Scalar>(
    factor: &FactorSeries<R>,
    panel: &Panel<R>,
    mode: TradeMode,
    fee_rate: R,
    fraction: R,
) -> Result<BacktestResult<R>, PortfolioError> {
    assert_eq!(factor.dates, panel.calendar(), "factor/panel misalignment");
    if panel.n_dates() == 0 {
        return Err(PortfolioError::EmptyPanel);
    }
    if factor.values.iter().all(Option::is_none) {
        return Err(PortfolioError::NoSignals {
            name: factor.name.clone(),
        });
    }

    let n_d = panel.n_dates();
    let mut dates = Vec::new();
    let mut returns: Vec<R> = Vec::new();
    let mut fee_returns: Vec<R> = Vec::new();
    let mut turnover: Vec<R> = Vec::new();
    let mut wealth: Vec<R> = vec![R::one()];
    let mut fee_wealth: Vec<R> = vec![R::one()];
    let mut weights: Vec<WeightVector<R>> = Vec::new();
    let mut unrealizable: Vec<Vec<String>> = Vec::new();
    let mut blown_up = false;
    let mut fee_blown_up = false;

    let mut prev: Vec<(String, R)> = Vec::new();
    for d in 0..n_d - 1 {
        let section_idx = factor.cross_section(d);
        let section: Vec<(&str, R)> = section_idx
            .iter()
            .map(|&(i, v)| (panel.instruments()[i].as_str(), v))
            .collect();
        let w = decile_weights(panel.calendar()[d], &section, mode, fraction);

        // Two leg totals, combined once: negating the factor swaps the
        // legs, so the day's return flips sign exactly.
        let mut long_sum = R::zero();
        let mut short_sum = R::zero();
        let mut missing: Vec<String> = Vec::new();
        for (id, wi) in &w.entries {
            let i = panel.instrument_index(id).expect("known instrument");
            match panel.ret(d + 1, i) {
                Some(r) => {
                    if *wi >= R::zero() {
                        long_sum = long_sum + *wi * r;
                    } else {
                        short_sum = short_sum + *wi * r;
                    }
                }
                None => missing.push(id.clone()),
            }
        }
        let r_day = long_sum + short_sum;
        let t_day = turnover_between(&prev, &w.entries);
        let fee_day = r_day - fee_rate * t_day;

        dates.push(panel.calendar()[d + 1]);
        returns.push(r_day);
        fee_returns.push(fee_day);
        turnover.push(t_day);
        weights.push(w.clone());
        unrealizable.push(missing);

        let next_w = *wealth.last().expect("non-empty") * (R::one() + r_day);
        wealth.push(next_w.max(R::zero()));
        let next_fw = *fee_wealth.last().expect("non-empty") * (R::one() + fee_day);
        fee_wealth.push(next_fw.max(R::zero()));

        if r_day <= -R::one() {
            blown_up = true;
        }
        if fee_day <= -R::one() {
            fee_blown_up = true;
        }
        if blown_up || fee_blown_up {
            break;
        }
        prev = w.entries;
    }

    Ok(BacktestResult {
        descriptor: StrategyDescriptor {
            name: factor.name.clone(),
            mode,
            fee_rate,
            fraction,
        },
        dates,
        returns,
        fee_returns,
        turnover,
        wealth,
        fee_wealth,
        weights,
        unrealizable,
        blown_up,
        fee_blown_up,
    })
}

/// One-sided turnover between two target books (sorted by id).
fn turnover_between<R: Scalar>(prev: &[(String, R)], next: &[(String, R)]) -> R {
    let mut total = R::zero();
    let mut a = 0;
    let mut b = 0;
    while a < prev.len() || b < next.len() {
        match (prev.get(a), next.get(b)) {
            (Some((ia, wa)), Some((ib, wb))) => match ia.as_str().cmp(ib.as_str()) {
                std::cmp::Ordering::Equal => {
                    total = total + (*wb - *wa).abs();
                    a += 1;
                    b += 1;
                }
                std::cmp::Ordering::Less => {
                    total = total + wa.abs();
                    a += 1;
                }
                std::cmp::Ordering::Greater => {
                    total = total + wb.abs();
                    b += 1;
                }
            },
            (Some((_, wa)), None) => {
                total = total + wa.abs();
                a += 1;
            }
            (None, Some((_, wb))) => {
                total = total + wb.abs();
                b += 1;
            }
            (None, None) => break,
        }
    }
    total
}

/// Fixed sign from the training window: +1 when the fee-free long-short
/// backtest of `spec` over `[train_start, train_end]` has annualized
/// return >= 0 (wiped-out books count as negative). Degenerate windows
/// (empty slice, no signals, no tradable days) default to +1 with a
/// warning.
pub fn static_polarity<R: Scalar>(
    spec: &FactorSpec<R>,
    panel: &Panel<R>,
    train_start: NaiveDate,
    train_end: NaiveDate,
    fraction: R,
) -> (Sign, Vec<String>) {
    let mut warnings = Vec::new();
    let sliced = panel.slice(train_start, train_end);
    if sliced.is_empty() {
        warnings.push(format!(
            "{}: empty training slice {train_start}..{train_end}; defaulting sign to +1",
            spec.name
        ));
        return (Sign::Pos, warnings);
    }
    let bt = match backtest_single(spec, &sliced, TradeMode::LongShort, R::zero(), fraction) {
        Ok(bt) => bt,
        Err(_) => {
            warnings.push(format!(
                "{}: no signals in training window; defaulting sign to +1",
                spec.name
            ));
            return (Sign::Pos, warnings);
        }
    };
    if bt.blown_up {
        return (Sign::Neg, warnings);
    }
    match annualized_return(&bt.returns, Annualization::Geometric) {
        Ok(ann) => (
            if ann >= R::zero() { Sign::Pos } else { Sign::Neg },
            warnings,
        ),
        Err(_) => {
            warnings.push(format!(
                "{}: no tradable days in training window; defaulting sign to +1",
                spec.name
            ));
            (Sign::Pos, warnings)
        }
    }
}

/// Per-date signs from the running performance of the +1-polarity,
/// fee-free base backtest: the sign at date `t` is +1 when the base
/// strategy's cumulative compounded return through the previous calendar
/// date is >= 0. The first date is +1 by construction. Factors with no
/// signals get a constant +1 schedule.
pub fn dynamic_schedule<R: Scalar>(
    spec: &FactorSpec<R>,
    panel: &Panel<R>,
    base: TradeMode,
    fraction: R,
) -> Vec<Sign> {
    let n_d = panel.n_dates();
    let base_returns: Vec<R> =
        match backtest_single(spec, panel, base, R::zero(), fraction) {
            Ok(bt) => bt.returns,
            Err(_) => vec![],
        };
    let mut signs = Vec::with_capacity(n_d);
    let mut cum = R::one();
    for d in 0..n_d {
        signs.push(if cum >= R::one() { Sign::Pos } else { Sign::Neg });
        // The return decided at d-1 realizes at date d; it becomes part of
        // the history visible from d+1 onward.
        if d >= 1 {
            if let Some(&r) = base_returns.get(d - 1) {
                cum = cum * (R::one() + r);
            }
        }
    }
    signs
}

/// Sign for one date; see [`dynamic_schedule`].
pub fn dynamic_polarity<R: Scalar>(
    spec: &FactorSpec<R>,
    panel: &Panel<R>,
    t: NaiveDate,
    base: TradeMode,
    fraction: R,
) -> Sign {
    let d = panel
        .date_index(t)
        .expect("date must be in the panel calendar");
    dynamic_schedule(spec, panel, base, fraction)[d]
}

/// How multi-factor composites pick each factor's sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolarityChoice {
    /// One sign per factor from a training window.
    Static {
        train_start: NaiveDate,
        train_end: NaiveDate,
    },
    /// A sign per date from running base-strategy performance.
    Dynamic { base: TradeMode },
}

/// Standardized per-factor surfaces: czs of each factor, evaluated through
/// the same code path the single-factor backtest uses.
fn zscore_series<R: Scalar>(specs: &[FactorSpec<R>], panel: &Panel<R>) -> Vec<FactorSeries<R>> {
    specs
        .iter()
        .map(|s| {
            let wrapped = FactorSpec {
                name: s.name.clone(),
                expr: Expr::Czs(Box::new(s.expr.clone())),
            };
            evaluate(&wrapped, panel)
        })
        .collect()
}

/// Equal-weight mean of signed z-scores, skipping gap terms per cell.
fn combine<R: Scalar>(
    z: &[FactorSeries<R>],
    schedules: &[PolaritySchedule],
    panel: &Panel<R>,
) -> FactorSeries<R> {
    let n_d = panel.n_dates();
    let n_i = panel.n_instruments();
    let mut values = vec![None; n_d * n_i];
    for d in 0..n_d {
        for i in 0..n_i {
            let mut sum = R::zero();
            let mut count = 0usize;
            for (k, zk) in z.iter().enumerate() {
                if let Some(v) = zk.value(d, i) {
                    sum = sum + schedules[k].at(d).value::<R>() * v;
                    count += 1;
                }
            }
            if count > 0 {
                values[d * n_i + i] = Some(sum / R::from_usize_lossy(count));
            }
        }
    }
    FactorSeries {
        name: "composite".into(),
        expression: z
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join("+"),
        dates: panel.calendar().to_vec(),
        instruments: panel.instruments().to_vec(),
        values,
    }
}

/// Composite cross-section at one date: mean over entries of
/// sign(t) * czs(factor)(i, t), skipping gaps. Returns (id, value) pairs
/// ascending by id; empty when every instrument is gap.
///
/// Convenience form for inspecting a single date; it evaluates the full
/// surfaces, so batch callers should prefer [`backtest_multi`].
pub fn composite_score<R: Scalar>(
    entries: &[(FactorSpec<R>, PolaritySchedule)],
    panel: &Panel<R>,
    t: NaiveDate,
) -> Vec<(String, R)> {
    let d = panel
        .date_index(t)
        .expect("date must be in the panel calendar");
    let specs: Vec<FactorSpec<R>> = entries.iter().map(|(s, _)| s.clone()).collect();
    let schedules: Vec<PolaritySchedule> = entries.iter().map(|(_, p)| p.clone()).collect();
    let z = zscore_series(&specs, panel);
    let composite = combine(&z, &schedules, panel);
    composite
        .cross_section(d)
        .into_iter()
        .map(|(i, v)| (panel.instruments()[i].clone(), v))
        .collect()
}

/// A multi-factor backtest plus the polarity decisions it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct MultiBacktest<R: Scalar> {
    pub result: BacktestResult<R>,
    /// Per-factor schedule, in catalog order.
    pub signs: Vec<(String, PolaritySchedule)>,
    pub warnings: Vec<String>,
}

/// Backtests the equal-weight composite of signed factor z-scores.
pub fn backtest_multi<R: Scalar>(
    catalog: &[FactorSpec<R>],
    panel: &Panel<R>,
    polarity: PolarityChoice,
    mode: TradeMode,
    fee_rate: R,
    fraction: R,
) -> Result<MultiBacktest<R>, PortfolioError> {
    if catalog.is_empty() {
        return Err(PortfolioError::EmptyCatalog);
    }
    if panel.n_dates() == 0 {
        return Err(PortfolioError::EmptyPanel);
    }
    let mut warnings = Vec::new();
    let schedules: Vec<PolaritySchedule> = catalog
        .iter()
        .map(|spec| match polarity {
            PolarityChoice::Static {
                train_start,
                train_end,
            } => {
                let (sign, w) = static_polarity(spec, panel, train_start, train_end, fraction);
                warnings.extend(w);
                PolaritySchedule::Fixed(sign)
            }
            PolarityChoice::Dynamic { base } => {
                PolaritySchedule::PerDate(dynamic_schedule(spec, panel, base, fraction))
            }
        })
        .collect();

    let z = zscore_series(catalog, panel);
    let composite = combine(&z, &schedules, panel);
    let result = run_series_backtest(&composite, panel, mode, fee_rate, fraction)?;
    Ok(MultiBacktest {
        result,
        signs: catalog
            .iter()
            .map(|s| s.name.clone())
            .zip(schedules)
            .map(|(n, p)| (n, p))
            .collect(),
        warnings,
    })
}
