//! Dynamic look-ahead detection.
//!
//! The static check proves an expression cannot reference future
//! observations *syntactically*. This test proves it *behaviorally*: it
//! resamples every bar strictly after a cut date and asserts that factor
//! values on or before the cut are bit-identical. Any dependence on
//! post-cut data, however indirect, changes some pre-cut value.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::panel::{Panel, PanelRow};
use crate::scalar::Scalar;

use super::ast::FactorSpec;
use super::eval::evaluate;

/// Returns true when factor values at dates `<= cut` are unchanged (gaps
/// included) after resampling all data at dates `> cut`. Deterministic in
/// `seed`.
///
/// A true result on one draw is evidence, not proof; callers wanting more
/// confidence run several seeds. A false result is a proof of look-ahead.
pub fn perturbation_no_lookahead_test<R: Scalar>(
    spec: &FactorSpec<R>,
    panel: &Panel<R>,
    cut: NaiveDate,
    seed: u64,
) -> bool {
    let base = evaluate(spec, panel);
    let perturbed_panel = perturb_after(panel, cut, seed);
    let perturbed = evaluate(spec, &perturbed_panel);

    let n_i = panel.n_instruments();
    for (d, &date) in panel.calendar().iter().enumerate() {
        if date > cut {
            break;
        }
        for i in 0..n_i {
            if base.values[d * n_i + i] != perturbed.values[d * n_i + i] {
                return false;
            }
        }
    }
    true
}

/// Clones the panel, resampling every field of every row dated after
/// `cut`. The resampled rows keep all validity invariants (price ordering,
/// positivity) and the trading pattern, so only values change, never the
/// gap structure.
pub fn perturb_after<R: Scalar>(panel: &Panel<R>, cut: NaiveDate, seed: u64) -> Panel<R> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, 1.0).expect("valid");
    let wiggle = Uniform::new(0.0f64, 0.10).expect("valid");
    let spread = Uniform::new(-0.10f64, 0.10).expect("valid");

    let rows: Vec<PanelRow<R>> = panel
        .rows()
        .iter()
        .map(|row| {
            if row.date <= cut {
                return row.clone();
            }
            let close_f = row.close.to_f64_lossy().max(1e-6);
            let close = close_f * (0.5 * normal.sample(&mut rng)).exp();
            let open = close * (1.0 + spread.sample(&mut rng));
            let high = open.max(close) * (1.0 + wiggle.sample(&mut rng));
            let low = open.min(close) * (1.0 - wiggle.sample(&mut rng));
            let spot = close * (1.0 + spread.sample(&mut rng));
            let volume = row.volume.to_f64_lossy().max(1.0) * (0.3 * normal.sample(&mut rng)).exp();
            let amount = volume * close * (1.0 + wiggle.sample(&mut rng));
            let replay = row
                .replay
                .map(|_| R::from_f64_lossy(spread.sample(&mut rng)));
            PanelRow {
                instrument: row.instrument.clone(),
                date: row.date,
                basis: R::from_f64_lossy(spot - close),
                spot: R::from_f64_lossy(spot),
                premium: R::from_f64_lossy(close - spot),
                open: R::from_f64_lossy(open),
                high: R::from_f64_lossy(high),
                low: R::from_f64_lossy(low),
                close: R::from_f64_lossy(close),
                volume: R::from_f64_lossy(volume),
                amount: R::from_f64_lossy(amount),
                replay,
            }
        })
        .collect();

    Panel::from_rows(rows).expect("perturbed rows keep invariants").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::ast::Expr;
    use crate::panel::Column;
    use chrono::NaiveDate;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, day).unwrap()
    }

    fn sample_panel() -> Panel<f64> {
        let mut rows = Vec::new();
        for i in 0..4 {
            for day in 1..=12 {
                let close = 50.0 + i as f64 * 10.0 + day as f64;
                rows.push(PanelRow {
                    instrument: format!("I{i}"),
                    date: d(day),
                    basis: 0.5,
                    spot: close + 0.5,
                    premium: -0.5,
                    open: close - 0.2,
                    high: close + 1.0,
                    low: close - 1.0,
                    close,
                    volume: 100.0 + day as f64 * i as f64,
                    amount: (100.0 + day as f64) * close,
                    replay: None,
                });
            }
        }
        Panel::from_rows(rows).unwrap().0
    }

    #[test]
    fn backward_looking_spec_passes_at_every_cut() {
        let p = sample_panel();
        let spec =
            FactorSpec::<f64>::parse("f", "czs(corr(diff(close), volume, 3)) + crank(ret)")
                .unwrap();
        for &cut in p.calendar() {
            assert!(perturbation_no_lookahead_test(&spec, &p, cut, 7));
        }
    }

    #[test]
    fn negative_lag_is_caught() {
        let p = sample_panel();
        let evil = FactorSpec::new("evil", Expr::<f64>::Lag(Box::new(Expr::Col(Column::Close)), -1));
        // Cut before the last date: the value at the cut date reads one
        // observation ahead, which was resampled.
        let cut = p.calendar()[p.n_dates() - 2];
        assert!(!perturbation_no_lookahead_test(&evil, &p, cut, 7));
    }

    #[test]
    fn perturbation_changes_nothing_at_or_before_cut() {
        let p = sample_panel();
        let cut = p.calendar()[5];
        let q = perturb_after(&p, cut, 3);
        for (a, b) in p.rows().iter().zip(q.rows()) {
            if a.date <= cut {
                assert_eq!(a, b);
            } else {
                assert_ne!(a.close, b.close);
            }
        }
        // Same shape: calendar, instruments and trading pattern.
        assert_eq!(p.calendar(), q.calendar());
        assert_eq!(p.instruments(), q.instruments());
    }

    #[test]
    fn cut_after_last_date_is_trivially_true() {
        let p = sample_panel();
        let spec = FactorSpec::<f64>::parse("f", "close").unwrap();
        assert!(perturbation_no_lookahead_test(&spec, &p, d(31), 1));
    }
}
