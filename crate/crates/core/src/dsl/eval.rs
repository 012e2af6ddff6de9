//! Expression evaluation over a panel.
//!
//! Values form a date-by-instrument surface with explicit gaps. Gap rules:
//!
//! * A cell where the instrument did not trade is a gap; literals are
//!   masked to traded cells.
//! * Arithmetic with a gap operand is a gap. Division by exact zero and
//!   `log` of a non-positive value are gaps, as is any non-finite result.
//! * Temporal operators (`lag`, `diff`, rolling, `corr`) run on each
//!   instrument's sequence of non-gap child observations, skipping gaps
//!   rather than consuming them; results anchor to observation dates. A
//!   rolling `std` needs at least two observations, so window 1 is all
//!   gaps. `corr` pairs dates where both children are present and is a gap
//!   whenever either side is constant within the window.
//! * Cross-sectional operators rank or standardize the non-gap section of
//!   each date. An all-equal section has z-score 0 everywhere; `crank` is
//!   the fractional rank (k-1)/(n-1) with midpoint ties, 0.5 for a
//!   single-instrument section.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::panel::Panel;
use crate::scalar::{mean, sample_std, Scalar};

use super::ast::{Expr, FactorSpec, RollOp};

/// Evaluated factor values for every (date, instrument) cell of a panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct FactorSeries<R: Scalar> {
    pub name: String,
    /// Canonical text of the expression that produced the values.
    pub expression: String,
    pub dates: Vec<NaiveDate>,
    pub instruments: Vec<String>,
    /// Date-major: `values[d * instruments.len() + i]`.
    pub values: Vec<Option<R>>,
}

impl<R: Scalar> FactorSeries<R> {
    pub fn value(&self, d: usize, i: usize) -> Option<R> {
        self.values[d * self.instruments.len() + i]
    }

    /// Non-gap slice of one date: (instrument index, value), ascending by
    /// instrument index.
    pub fn cross_section(&self, d: usize) -> Vec<(usize, R)> {
        let n = self.instruments.len();
        (0..n)
            .filter_map(|i| self.values[d * n + i].map(|v| (i, v)))
            .collect()
    }
}

/// Evaluates `spec` over every cell of `panel`.
pub fn evaluate<R: Scalar>(spec: &FactorSpec<R>, panel: &Panel<R>) -> FactorSeries<R> {
    let values = eval_expr(&spec.expr, panel);
    FactorSeries {
        name: spec.name.clone(),
        expression: spec.expr.to_text(),
        dates: panel.calendar().to_vec(),
        instruments: panel.instruments().to_vec(),
        values,
    }
}

type Grid<R> = Vec<Option<R>>;

fn finite<R: Scalar>(v: R) -> Option<R> {
    if v.is_finite() {
        Some(v)
    } else {
        None
    }
}

fn eval_expr<R: Scalar>(e: &Expr<R>, panel: &Panel<R>) -> Grid<R> {
    let n_d = panel.n_dates();
    let n_i = panel.n_instruments();
    let cells = n_d * n_i;

    match e {
        Expr::Col(c) => {
            let mut out = vec![None; cells];
            for d in 0..n_d {
                for i in 0..n_i {
                    out[d * n_i + i] = panel.value(*c, d, i);
                }
            }
            out
        }
        Expr::Lit(v) => {
            let mut out = vec![None; cells];
            for d in 0..n_d {
                for i in 0..n_i {
                    if panel.traded(d, i) {
                        out[d * n_i + i] = Some(*v);
                    }
                }
            }
            out
        }
        Expr::Neg(x) => map1(eval_expr(x, panel), |v| finite(-v)),
        Expr::Abs(x) => map1(eval_expr(x, panel), |v| finite(v.abs())),
        Expr::Sign(x) => map1(eval_expr(x, panel), |v| {
            Some(if v > R::zero() {
                R::one()
            } else if v < R::zero() {
                -R::one()
            } else {
                R::zero()
            })
        }),
        Expr::Log(x) => map1(eval_expr(x, panel), |v| {
            if v > R::zero() {
                finite(v.ln())
            } else {
                None
            }
        }),
        Expr::Add(a, b) => map2(eval_expr(a, panel), eval_expr(b, panel), |x, y| {
            finite(x + y)
        }),
        Expr::Sub(a, b) => map2(eval_expr(a, panel), eval_expr(b, panel), |x, y| {
            finite(x - y)
        }),
        Expr::Mul(a, b) => map2(eval_expr(a, panel), eval_expr(b, panel), |x, y| {
            finite(x * y)
        }),
        Expr::Div(a, b) => map2(eval_expr(a, panel), eval_expr(b, panel), |x, y| {
            if y == R::zero() {
                None
            } else {
                finite(x / y)
            }
        }),
        Expr::Lag(x, k) => {
            let child = eval_expr(x, panel);
            per_instrument(&child, n_d, n_i, |obs, out| {
                if *k >= 0 {
                    let k = *k as usize;
                    for j in k..obs.len() {
                        out[obs[j].0] = Some(obs[j - k].1);
                    }
                } else {
                    // Future access; only reachable from hand-built trees.
                    let m = (-k) as usize;
                    for j in 0..obs.len().saturating_sub(m) {
                        out[obs[j].0] = Some(obs[j + m].1);
                    }
                }
            })
        }
        Expr::Diff(x) => {
            let child = eval_expr(x, panel);
            per_instrument(&child, n_d, n_i, |obs, out| {
                for j in 1..obs.len() {
                    out[obs[j].0] = finite(obs[j].1 - obs[j - 1].1);
                }
            })
        }
        Expr::Roll(op, x, w) => {
            let child = eval_expr(x, panel);
            let w = *w;
            per_instrument(&child, n_d, n_i, |obs, out| {
                if w == 0 || obs.len() < w {
                    return;
                }
                let vals: Vec<R> = obs.iter().map(|&(_, v)| v).collect();
                for j in (w - 1)..vals.len() {
                    let win = &vals[j + 1 - w..=j];
                    let agg = match op {
                        RollOp::Mean => mean(win),
                        RollOp::Std => sample_std(win),
                        RollOp::Sum => Some(win.iter().copied().sum()),
                        RollOp::Min => win.iter().copied().reduce(R::min),
                        RollOp::Max => win.iter().copied().reduce(R::max),
                    };
                    out[obs[j].0] = agg.and_then(finite);
                }
            })
        }
        Expr::Corr(x, y, w) => {
            let gx = eval_expr(x, panel);
            let gy = eval_expr(y, panel);
            let w = *w;
            let mut out = vec![None; cells];
            for i in 0..n_i {
                // Pairwise deletion: dates where both sides are present.
                let obs: Vec<(usize, R, R)> = (0..n_d)
                    .filter_map(|d| match (gx[d * n_i + i], gy[d * n_i + i]) {
                        (Some(a), Some(b)) => Some((d, a, b)),
                        _ => None,
                    })
                    .collect();
                if w == 0 || obs.len() < w {
                    continue;
                }
                for j in (w - 1)..obs.len() {
                    let win = &obs[j + 1 - w..=j];
                    out[obs[j].0 * n_i + i] = pearson(win);
                }
            }
            out
        }
        Expr::Czs(x) => {
            let child = eval_expr(x, panel);
            let mut out = vec![None; cells];
            for d in 0..n_d {
                let section: Vec<(usize, R)> = (0..n_i)
                    .filter_map(|i| child[d * n_i + i].map(|v| (i, v)))
                    .collect();
                if section.is_empty() {
                    continue;
                }
                let lo = section
                    .iter()
                    .map(|&(_, v)| v)
                    .fold(R::infinity(), R::min);
                let hi = section
                    .iter()
                    .map(|&(_, v)| v)
                    .fold(R::neg_infinity(), R::max);
                if lo == hi {
                    for &(i, _) in &section {
                        out[d * n_i + i] = Some(R::zero());
                    }
                    continue;
                }
                let vals: Vec<R> = section.iter().map(|&(_, v)| v).collect();
                let m = mean(&vals).expect("non-empty");
                let var: R = vals.iter().map(|&v| (v - m) * (v - m)).sum::<R>()
                    / R::from_usize_lossy(vals.len());
                let sd = var.sqrt();
                for &(i, v) in &section {
                    out[d * n_i + i] = finite((v - m) / sd);
                }
            }
            out
        }
        Expr::Crank(x) => {
            let child = eval_expr(x, panel);
            let mut out = vec![None; cells];
            for d in 0..n_d {
                let section: Vec<(usize, R)> = (0..n_i)
                    .filter_map(|i| child[d * n_i + i].map(|v| (i, v)))
                    .collect();
                if section.is_empty() {
                    continue;
                }
                let vals: Vec<R> = section.iter().map(|e| e.1).collect();
                let ranks = fractional_ranks(&vals);
                for (&(i, _), &rk) in section.iter().zip(&ranks) {
                    out[d * n_i + i] = Some(rk);
                }
            }
            out
        }
    }
}

/// Fractional ranks in [0, 1]: the k-th smallest of n values maps to
/// (k-1)/(n-1), tied values share the midpoint of their positions, and a
/// singleton ranks 0.5. Output is aligned with the input order.
pub fn fractional_ranks<R: Scalar>(values: &[R]) -> Vec<R> {
    let n = values.len();
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![R::from_f64_lossy(0.5)];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite"));
    let denom = R::from_usize_lossy(n - 1);
    let mut out = vec![R::zero(); n];
    let mut j = 0;
    while j < n {
        let mut k = j + 1;
        while k < n && values[order[k]] == values[order[j]] {
            k += 1;
        }
        // Midpoint of 0-based positions j..k-1.
        let pos = R::from_usize_lossy(j + k - 1) / R::from_f64_lossy(2.0);
        for &idx in &order[j..k] {
            out[idx] = pos / denom;
        }
        j = k;
    }
    out
}

fn map1<R: Scalar>(g: Grid<R>, f: impl Fn(R) -> Option<R>) -> Grid<R> {
    g.into_iter().map(|c| c.and_then(&f)).collect()
}

fn map2<R: Scalar>(a: Grid<R>, b: Grid<R>, f: impl Fn(R, R) -> Option<R>) -> Grid<R> {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => f(x, y),
            _ => None,
        })
        .collect()
}

/// Runs `f` once per instrument over its (date index, value) observation
/// sequence, writing results into a per-instrument date-indexed scratch
/// row that is then scattered back into the grid.
fn per_instrument<R: Scalar>(
    child: &Grid<R>,
    n_d: usize,
    n_i: usize,
    f: impl Fn(&[(usize, R)], &mut Vec<Option<R>>),
) -> Grid<R> {
    let mut out = vec![None; n_d * n_i];
    let mut row: Vec<Option<R>> = vec![None; n_d];
    for i in 0..n_i {
        let obs: Vec<(usize, R)> = (0..n_d)
            .filter_map(|d| child[d * n_i + i].map(|v| (d, v)))
            .collect();
        row.iter_mut().for_each(|c| *c = None);
        f(&obs, &mut row);
        for d in 0..n_d {
            out[d * n_i + i] = row[d];
        }
    }
    out
}

fn pearson<R: Scalar>(win: &[(usize, R, R)]) -> Option<R> {
    let n = R::from_usize_lossy(win.len());
    let mx = win.iter().map(|&(_, x, _)| x).sum::<R>() / n;
    let my = win.iter().map(|&(_, _, y)| y).sum::<R>() / n;
    let mut sxx = R::zero();
    let mut syy = R::zero();
    let mut sxy = R::zero();
    for &(_, x, y) in win {
        let dx = x - mx;
        let dy = y - my;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    if sxx == R::zero() || syy == R::zero() {
        return None;
    }
    finite(sxy / (sxx * syy).sqrt())
}
