//! Latent-factor benchmark: a K-factor model whose loadings are linear in
//! observable instrument characteristics, estimated by alternating least
//! squares, plus the alpha regression of portfolio returns on the
//! extracted factor returns.
//!
//! Model: r_{i,t+1} = z_{i,t}' Gamma f_{t+1} + eps, where z_{i,t} holds
//! per-date fractional ranks of raw panel columns shifted to
//! [-0.5, +0.5]. Gamma (L x K) is identified up to rotation; we pin it
//! down by orthonormalizing columns (thin QR) and making each column's
//! first non-negligible entry positive.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::dsl::fractional_ranks;
use crate::linalg::{inverse, solve, thin_qr, Mat};
use crate::metrics::TRADING_DAYS_PER_YEAR;
use crate::panel::{Column, Panel};
use crate::scalar::Scalar;

/// One decision date's cross-section: characteristics observed at
/// `decision_date`, returns realized at `realization_date`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct IpcaDateBlock<R: Scalar> {
    pub decision_date: NaiveDate,
    pub realization_date: NaiveDate,
    pub instruments: Vec<String>,
    /// N_t x L, every entry in [-0.5, 0.5].
    pub z: Mat<R>,
    /// Realized next-date returns, aligned with `instruments`.
    pub r: Vec<R>,
}

/// Characteristic matrices and forward returns for a run of dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct IpcaDataset<R: Scalar> {
    pub characteristics: Vec<String>,
    pub blocks: Vec<IpcaDateBlock<R>>,
}

impl<R: Scalar> IpcaDataset<R> {
    pub fn l(&self) -> usize {
        self.characteristics.len()
    }

    pub fn n_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.r.len()).sum()
    }
}

/// A fitted factor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct IpcaModel<R: Scalar> {
    /// L x K loadings map, orthonormal columns.
    pub gamma: Mat<R>,
    pub k: usize,
    pub characteristics: Vec<String>,
    /// Factor returns keyed by realization date.
    pub factor_returns: Vec<(NaiveDate, Vec<R>)>,
    pub iterations: usize,
    pub final_delta: R,
    pub converged: bool,
    /// In-sample fit: 1 - SSR / sum(r^2) over the dates kept.
    pub r_squared: R,
    pub warnings: Vec<String>,
}

/// Two-sided significance at the 1% / 5% / 10% levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stars {
    None,
    One,
    Two,
    Three,
}

impl Stars {
    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        }
    }
}

/// OLS of portfolio returns on intercept plus factor returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct AlphaReport<R: Scalar> {
    pub alpha_daily: R,
    /// Daily intercept scaled by 252.
    pub alpha_annualized: R,
    pub t_stat: R,
    pub significance: Stars,
    pub betas: Vec<R>,
    pub n_obs: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum IpcaError {
    #[error("factor count must be at least 1")]
    ZeroFactors,
    #[error("factor count {k} exceeds characteristic count {l}")]
    TooManyFactors { k: usize, l: usize },
    #[error("need at least {need} usable dates, have {have}")]
    TooFewDates { have: usize, need: usize },
    #[error("loadings collapsed to a rank-deficient map at sweep {sweep}")]
    RankCollapse { sweep: usize },
    #[error("residual sum of squares rose by {rise:e} at sweep {sweep}")]
    SsrIncreased { sweep: usize, rise: f64 },
    #[error("degenerate factor returns")]
    DegenerateFactors,
    #[error("need at least {need} aligned observations, have {have}")]
    TooFewObservations { have: usize, need: usize },
}

/// Builds per-date characteristic matrices from raw panel columns.
///
/// Rows keep instruments that trade on the date, have a realized
/// next-date return, and have every requested characteristic defined.
/// Each characteristic is fractionally ranked within the surviving rows
/// and shifted by -0.5. Dates with fewer than `k + 1` rows are dropped
/// and reported in the warnings.
pub fn build_instruments<R: Scalar>(
    panel: &Panel<R>,
    characteristics: &[Column],
    k: usize,
) -> (IpcaDataset<R>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut blocks = Vec::new();
    let n_i = panel.n_instruments();
    let n_d = panel.n_dates();
    for d in 0..n_d.saturating_sub(1) {
        let mut rows: Vec<usize> = Vec::new();
        'inst: for i in 0..n_i {
            if !panel.traded(d, i) || panel.ret(d + 1, i).is_none() {
                continue;
            }
            for &c in characteristics {
                if panel.value(c, d, i).is_none() {
                    continue 'inst;
                }
            }
            rows.push(i);
        }
        if rows.len() < k + 1 {
            if !rows.is_empty() {
                warnings.push(format!(
                    "{}: only {} usable instruments (need {}); date dropped",
                    panel.calendar()[d],
                    rows.len(),
                    k + 1
                ));
            }
            continue;
        }
        let n_t = rows.len();
        let l = characteristics.len();
        let mut z = Mat::zeros(n_t, l);
        let half = R::from_f64_lossy(0.5);
        for (j, &c) in characteristics.iter().enumerate() {
            let vals: Vec<R> = rows
                .iter()
                .map(|&i| panel.value(c, d, i).expect("filtered above"))
                .collect();
            let ranks = fractional_ranks(&vals);
            for (row, rank) in ranks.into_iter().enumerate() {
                *z.at_mut(row, j) = rank - half;
            }
        }
        let r: Vec<R> = rows
            .iter()
            .map(|&i| panel.ret(d + 1, i).expect("filtered above"))
            .collect();
        blocks.push(IpcaDateBlock {
            decision_date: panel.calendar()[d],
            realization_date: panel.calendar()[d + 1],
            instruments: rows
                .iter()
                .map(|&i| panel.instruments()[i].clone())
                .collect(),
            z,
            r,
        });
    }
    (
        IpcaDataset {
            characteristics: characteristics.iter().map(|c| c.name().to_string()).collect(),
            blocks,
        },
        warnings,
    )
}

/// Cross-sectional factor extraction for one date:
/// f = (G'Z'ZG)^-1 G'Z'r. With `ridge`, a singular system is retried
/// with that perturbation on the diagonal; without it, `None` means the
/// date is unusable.
fn date_factor<R: Scalar>(gamma: &Mat<R>, block: &IpcaDateBlock<R>, ridge: Option<R>) -> Option<Vec<R>> {
    let zg = block.z.matmul(gamma);
    let a = zg.transpose().matmul(&zg);
    let b = zg.transpose().matvec(&block.r);
    match solve(&a, &b) {
        Some(f) => Some(f),
        None => {
            let lam = ridge?;
            let mut aa = a;
            for i in 0..aa.rows {
                *aa.at_mut(i, i) = aa.at(i, i) + lam;
            }
            solve(&aa, &b)
        }
    }
}

/// Makes each column's first entry of absolute size > 1e-12 positive,
/// flipping the matching factor rows so fitted values are untouched.
fn canonicalize_signs<R: Scalar>(gamma: &mut Mat<R>, fs: &mut [Vec<R>]) {
    let pivot_tol = R::from_f64_lossy(1e-12);
    for k in 0..gamma.cols {
        let mut flip = false;
        for i in 0..gamma.rows {
            let v = gamma.at(i, k);
            if v.abs() > pivot_tol {
                flip = v < R::zero();
                break;
            }
        }
        if flip {
            for i in 0..gamma.rows {
                *gamma.at_mut(i, k) = -gamma.at(i, k);
            }
            for f in fs.iter_mut() {
                f[k] = -f[k];
            }
        }
    }
}

fn pooled_ssr<R: Scalar>(gamma: &Mat<R>, blocks: &[IpcaDateBlock<R>], fs: &[Vec<R>]) -> R {
    let mut ssr = R::zero();
    for (b, f) in blocks.iter().zip(fs) {
        let beta = gamma.matvec(f);
        let fitted = b.z.matvec(&beta);
        for (i, &r) in b.r.iter().enumerate() {
            let e = r - fitted[i];
            ssr = ssr + e * e;
        }
    }
    ssr
}

const RIDGE: f64 = 1e-10;

/// Fits the model by alternating least squares.
///
/// Each sweep: (a) per-date factor extraction given Gamma; (b) pooled
/// least squares for Gamma given the factors (unknowns vec(Gamma), one
/// regressor z_l * f_k per cell); then thin-QR orthonormalization with
/// the inverse rotation applied to the factors, and sign
/// canonicalization. Convergence is max-abs entrywise change of Gamma
/// below `tol`. Singular systems during sweeps fall back to a 1e-10
/// ridge and a warning. The stored factor returns come from a final
/// ridge-free extraction pass with the converged Gamma, so re-running
/// the extraction over the training range reproduces them exactly.
pub fn fit_ipca<R: Scalar>(
    data: &IpcaDataset<R>,
    k: usize,
    tol: R,
    max_iter: usize,
) -> Result<IpcaModel<R>, IpcaError> {
    let l = data.l();
    if k == 0 {
        return Err(IpcaError::ZeroFactors);
    }
    if k > l {
        return Err(IpcaError::TooManyFactors { k, l });
    }
    if data.blocks.len() < k {
        return Err(IpcaError::TooFewDates {
            have: data.blocks.len(),
            need: k,
        });
    }
    let mut warnings: Vec<String> = Vec::new();
    let ridge = R::from_f64_lossy(RIDGE);

    // Initialize Gamma from the leading eigenvectors of X X', where the
    // columns of X are the managed-portfolio returns x_t = Z' r / N_t.
    let mut xxt = Mat::zeros(l, l);
    for b in &data.blocks {
        let n_t = R::from_usize_lossy(b.r.len());
        let x: Vec<R> = b
            .z
            .transpose()
            .matvec(&b.r)
            .into_iter()
            .map(|v| v / n_t)
            .collect();
        for i in 0..l {
            for j in 0..l {
                *xxt.at_mut(i, j) = xxt.at(i, j) + x[i] * x[j];
            }
        }
    }
    let (_, vecs) = crate::linalg::sym_eigen(&xxt);
    let mut gamma = Mat::zeros(l, k);
    for kk in 0..k {
        for i in 0..l {
            *gamma.at_mut(i, kk) = vecs.at(i, kk);
        }
    }
    canonicalize_signs(&mut gamma, &mut []);

    let mut fs: Vec<Vec<R>> = vec![vec![R::zero(); k]; data.blocks.len()];
    let mut ssr_prev: Option<R> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut final_delta = R::infinity();

    for sweep in 1..=max_iter {
        iterations = sweep;

        // (a) factors given Gamma.
        for (t, b) in data.blocks.iter().enumerate() {
            match date_factor(&gamma, b, None) {
                Some(f) => fs[t] = f,
                None => {
                    warnings.push(format!(
                        "sweep {sweep}: singular cross-section at {}; ridge {RIDGE:e} applied",
                        b.decision_date
                    ));
                    fs[t] = date_factor(&gamma, b, Some(ridge))
                        .ok_or(IpcaError::RankCollapse { sweep })?;
                }
            }
        }

        // (b) Gamma given factors: normal equations for vec(Gamma) under
        // the index map (l, k) -> l*K + k. The Gram matrix decomposes per
        // date as kron(Z'Z, f f').
        let lk = l * k;
        let mut gram = Mat::zeros(lk, lk);
        let mut rhs = vec![R::zero(); lk];
        for (t, b) in data.blocks.iter().enumerate() {
            let s = b.z.transpose().matmul(&b.z);
            let zr = b.z.transpose().matvec(&b.r);
            let f = &fs[t];
            for l1 in 0..l {
                for k1 in 0..k {
                    for l2 in 0..l {
                        for k2 in 0..k {
                            let idx1 = l1 * k + k1;
                            let idx2 = l2 * k + k2;
                            *gram.at_mut(idx1, idx2) =
                                gram.at(idx1, idx2) + s.at(l1, l2) * f[k1] * f[k2];
                        }
                    }
                }
            }
            for l1 in 0..l {
                for k1 in 0..k {
                    rhs[l1 * k + k1] = rhs[l1 * k + k1] + zr[l1] * f[k1];
                }
            }
        }
        let vec_gamma = match solve(&gram, &rhs) {
            Some(v) => v,
            None => {
                warnings.push(format!(
                    "sweep {sweep}: singular pooled system; ridge {RIDGE:e} applied"
                ));
                let mut gg = gram;
                for i in 0..lk {
                    *gg.at_mut(i, i) = gg.at(i, i) + ridge;
                }
                solve(&gg, &rhs).ok_or(IpcaError::RankCollapse { sweep })?
            }
        };
        let mut gamma_new = Mat::zeros(l, k);
        for l1 in 0..l {
            for k1 in 0..k {
                *gamma_new.at_mut(l1, k1) = vec_gamma[l1 * k + k1];
            }
        }

        // Orthonormalize and rotate the factors to keep fits unchanged.
        let (q, rmat) = thin_qr(&gamma_new).ok_or(IpcaError::RankCollapse { sweep })?;
        for f in fs.iter_mut() {
            *f = rmat.matvec(f);
        }
        let mut gamma_next = q;
        canonicalize_signs(&mut gamma_next, &mut fs);

        let ssr = pooled_ssr(&gamma_next, &data.blocks, &fs);
        if let Some(prev) = ssr_prev {
            let rise = ssr - prev;
            if rise > R::from_f64_lossy(1e-9) * prev.max(R::one()) {
                return Err(IpcaError::SsrIncreased {
                    sweep,
                    rise: rise.to_f64_lossy(),
                });
            }
        }
        ssr_prev = Some(ssr);

        final_delta = gamma_next.max_abs_diff(&gamma);
        gamma = gamma_next;
        if final_delta < tol {
            converged = true;
            break;
        }
    }

    // Final ridge-free extraction with the converged loadings; this is
    // the same routine out-of-sample extraction uses, so the two agree
    // bit for bit on the training range.
    let (factor_returns, extraction_warnings, ssr, tss) = extract_factors(&gamma, data);
    warnings.extend(extraction_warnings);
    let r_squared = if tss > R::zero() {
        R::one() - ssr / tss
    } else {
        R::zero()
    };

    Ok(IpcaModel {
        gamma,
        k,
        characteristics: data.characteristics.clone(),
        factor_returns,
        iterations,
        final_delta,
        converged,
        r_squared,
        warnings,
    })
}

/// Per-date extraction with frozen loadings; singular dates are dropped
/// and named. Also returns (SSR, total sum of squares) over kept dates.
fn extract_factors<R: Scalar>(
    gamma: &Mat<R>,
    data: &IpcaDataset<R>,
) -> (Vec<(NaiveDate, Vec<R>)>, Vec<String>, R, R) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let mut ssr = R::zero();
    let mut tss = R::zero();
    for b in &data.blocks {
        match date_factor(gamma, b, None) {
            Some(f) => {
                let beta = gamma.matvec(&f);
                let fitted = b.z.matvec(&beta);
                for (i, &r) in b.r.iter().enumerate() {
                    let e = r - fitted[i];
                    ssr = ssr + e * e;
                    tss = tss + r * r;
                }
                out.push((b.realization_date, f));
            }
            None => warnings.push(format!(
                "{}: rank-deficient cross-section; date dropped",
                b.decision_date
            )),
        }
    }
    (out, warnings, ssr, tss)
}

/// Factor returns over `[start, end]` (by decision date) with the
/// loadings frozen at their fitted values. Keys are realization dates.
pub fn oos_factor_returns<R: Scalar>(
    model: &IpcaModel<R>,
    data: &IpcaDataset<R>,
    start: NaiveDate,
    end: NaiveDate,
) -> (Vec<(NaiveDate, Vec<R>)>, Vec<String>) {
    let subset = IpcaDataset {
        characteristics: data.characteristics.clone(),
        blocks: data
            .blocks
            .iter()
            .filter(|b| b.decision_date >= start && b.decision_date <= end)
            .cloned()
            .collect(),
    };
    let (out, warnings, _, _) = extract_factors(&model.gamma, &subset);
    (out, warnings)
}

const Z_995: f64 = 2.5758293035489004;
const Z_975: f64 = 1.959963984540054;
const Z_95: f64 = 1.6448536269514722;

/// Star thresholds for a two-sided test of size 10%/5%/1%: normal
/// critical values for n > 120, Student-t with n-k-1 degrees of freedom
/// otherwise.
fn stars_for(t_abs: f64, n: usize, k: usize) -> Stars {
    let (c1, c2, c3) = if n > 120 {
        (Z_995, Z_975, Z_95)
    } else {
        let df = (n - k - 1) as f64;
        let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
        (
            dist.inverse_cdf(0.995),
            dist.inverse_cdf(0.975),
            dist.inverse_cdf(0.95),
        )
    };
    if t_abs > c1 {
        Stars::Three
    } else if t_abs > c2 {
        Stars::Two
    } else if t_abs > c3 {
        Stars::One
    } else {
        Stars::None
    }
}

/// Regresses daily portfolio returns on an intercept plus the factor
/// returns, matching observations by date. The intercept is the daily
/// alpha; `alpha_annualized` scales it by 252. Standard errors are
/// classical OLS, or heteroskedasticity-robust (HC0) when `robust` is
/// set. The residual scale is floored at sqrt(eps) times the RMS of the
/// dependent variable so that a numerically perfect fit reports |t| ~ 0
/// instead of noise amplified by a near-zero denominator.
pub fn alpha_regression<R: Scalar>(
    portfolio: &[(NaiveDate, R)],
    factors: &[(NaiveDate, Vec<R>)],
    robust: bool,
) -> Result<AlphaReport<R>, IpcaError> {
    let by_date: BTreeMap<NaiveDate, &Vec<R>> = factors.iter().map(|(d, f)| (*d, f)).collect();
    let k = factors.first().map_or(0, |(_, f)| f.len());
    if k == 0 {
        return Err(IpcaError::DegenerateFactors);
    }
    let mut ys: Vec<R> = Vec::new();
    let mut xs: Vec<Vec<R>> = Vec::new();
    for (d, y) in portfolio {
        if let Some(f) = by_date.get(d) {
            assert_eq!(f.len(), k, "ragged factor returns");
            let mut row = Vec::with_capacity(k + 1);
            row.push(R::one());
            row.extend_from_slice(f);
            xs.push(row);
            ys.push(*y);
        }
    }
    let n = ys.len();
    if n < k + 2 {
        return Err(IpcaError::TooFewObservations { have: n, need: k + 2 });
    }

    let p = k + 1;
    let mut xtx = Mat::zeros(p, p);
    let mut xty = vec![R::zero(); p];
    for (row, &y) in xs.iter().zip(&ys) {
        for i in 0..p {
            for j in 0..p {
                *xtx.at_mut(i, j) = xtx.at(i, j) + row[i] * row[j];
            }
            xty[i] = xty[i] + row[i] * y;
        }
    }
    let inv = inverse(&xtx).ok_or(IpcaError::DegenerateFactors)?;
    let coef = inv.matvec(&xty);

    let residuals: Vec<R> = xs
        .iter()
        .zip(&ys)
        .map(|(row, &y)| {
            let mut fit = R::zero();
            for i in 0..p {
                fit = fit + row[i] * coef[i];
            }
            y - fit
        })
        .collect();
    let dof = R::from_usize_lossy(n - p);
    let ssr = residuals.iter().map(|&e| e * e).fold(R::zero(), |a, b| a + b);
    let sigma = (ssr / dof).sqrt();
    let rms_y = (ys.iter().map(|&y| y * y).fold(R::zero(), |a, b| a + b)
        / R::from_usize_lossy(n))
    .sqrt();
    let sigma_floor = R::epsilon().sqrt() * rms_y;

    let se_alpha_raw = if robust {
        // HC0 sandwich; only the intercept entry is reported.
        let mut meat = Mat::zeros(p, p);
        for (row, &e) in xs.iter().zip(&residuals) {
            let e2 = e * e;
            for i in 0..p {
                for j in 0..p {
                    *meat.at_mut(i, j) = meat.at(i, j) + row[i] * row[j] * e2;
                }
            }
        }
        let cov = inv.matmul(&meat).matmul(&inv);
        cov.at(0, 0).max(R::zero()).sqrt()
    } else {
        sigma * inv.at(0, 0).max(R::zero()).sqrt()
    };
    let se_floor = sigma_floor * inv.at(0, 0).max(R::zero()).sqrt();
    let se_alpha = se_alpha_raw.max(se_floor);

    let alpha_daily = coef[0];
    let t_stat = if se_alpha > R::zero() {
        alpha_daily / se_alpha
    } else {
        R::zero()
    };
    let significance = stars_for(t_stat.abs().to_f64_lossy(), n, k);
    Ok(AlphaReport {
        alpha_daily,
        alpha_annualized: R::from_usize_lossy(TRADING_DAYS_PER_YEAR) * alpha_daily,
        t_stat,
        significance,
        betas: coef[1..].to_vec(),
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelRow;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, day).unwrap()
    }

    fn row(id: &str, day: u32, close: f64, volume: f64) -> PanelRow<f64> {
        PanelRow {
            instrument: id.into(),
            date: d(day),
            basis: 0.0,
            spot: close,
            premium: 0.0,
            open: close,
            high: close * 1.5,
            low: close * 0.5,
            close,
            volume,
            amount: volume * close,
            replay: None,
        }
    }

    #[test]
    fn rank_map_three_instruments() {
        let rows = vec![
            row("a", 1, 10.0, 7.0),
            row("a", 2, 11.0, 7.0),
            row("b", 1, 20.0, 5.0),
            row("b", 2, 22.0, 5.0),
            row("c", 1, 30.0, 6.0),
            row("c", 2, 33.0, 6.0),
        ];
        let panel = Panel::from_rows(rows).unwrap().0;
        let (data, warnings) = build_instruments(&panel, &[Column::Close], 1);
        assert!(warnings.is_empty());
        assert_eq!(data.blocks.len(), 1);
        let b = &data.blocks[0];
        assert_eq!(b.decision_date, d(1));
        assert_eq!(b.realization_date, d(2));
        assert_eq!(b.z.col(0), vec![-0.5, 0.0, 0.5]);
        assert!((b.r[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rank_map_all_equal_is_zero() {
        let rows = vec![
            row("a", 1, 10.0, 7.0),
            row("a", 2, 11.0, 7.0),
            row("b", 1, 10.0, 5.0),
            row("b", 2, 22.0, 5.0),
            row("c", 1, 10.0, 6.0),
            row("c", 2, 33.0, 6.0),
        ];
        let panel = Panel::from_rows(rows).unwrap().0;
        let (data, _) = build_instruments(&panel, &[Column::Close], 1);
        assert_eq!(data.blocks[0].z.col(0), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn thin_dates_are_dropped_with_warning() {
        // Day 1 has three instruments, day 2 only two survive to day 3.
        let rows = vec![
            row("a", 1, 10.0, 7.0),
            row("a", 2, 11.0, 7.0),
            row("a", 3, 12.0, 7.0),
            row("b", 1, 20.0, 5.0),
            row("b", 2, 22.0, 5.0),
            row("b", 3, 23.0, 5.0),
            row("c", 1, 30.0, 6.0),
            row("c", 2, 33.0, 6.0),
        ];
        let panel = Panel::from_rows(rows).unwrap().0;
        let (data, warnings) = build_instruments(&panel, &[Column::Close], 2);
        assert_eq!(data.blocks.len(), 1);
        assert_eq!(data.blocks[0].decision_date, d(1));
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("date dropped"));
    }

    #[test]
    fn ret_characteristic_needs_a_prior_observation() {
        let rows = vec![
            row("a", 1, 10.0, 7.0),
            row("a", 2, 11.0, 7.0),
            row("a", 3, 12.0, 7.0),
            row("b", 1, 20.0, 5.0),
            row("b", 2, 22.0, 5.0),
            row("b", 3, 23.0, 5.0),
        ];
        let panel = Panel::from_rows(rows).unwrap().0;
        let (data, _) = build_instruments(&panel, &[Column::Ret], 0);
        // Day 1 has no trailing return for anyone: only day 2 survives.
        assert_eq!(data.blocks.len(), 1);
        assert_eq!(data.blocks[0].decision_date, d(2));
    }

    /// Deterministic synthetic dataset following the model exactly:
    /// r = Z Gamma0 f with no noise. No RNG; entries come from simple
    /// arithmetic so the test is self-contained.
    fn exact_dataset(l: usize, k: usize, n: usize, t: usize) -> (IpcaDataset<f64>, Mat<f64>) {
        // Vandermonde columns: full rank for distinct nodes.
        let mut gamma0 = Mat::zeros(l, k);
        for i in 0..l {
            for j in 0..k {
                *gamma0.at_mut(i, j) = (1.0 + 0.7 * j as f64).powi(i as i32);
            }
        }
        let (q, _) = thin_qr(&gamma0).unwrap();
        let gamma0 = q;
        let mut blocks = Vec::new();
        for tt in 0..t {
            let mut z = Mat::zeros(n, l);
            for i in 0..n {
                for j in 0..l {
                    // Deterministic values in [-0.5, 0.5].
                    let raw = ((i * 31 + j * 17 + tt * 7) % 101) as f64 / 100.0 - 0.5;
                    *z.at_mut(i, j) = raw;
                }
            }
            let f: Vec<f64> = (0..k)
                .map(|j| 0.01 * ((tt + 1) as f64 * (j as f64 + 0.5)).cos())
                .collect();
            let r = z.matvec(&gamma0.matvec(&f));
            blocks.push(IpcaDateBlock {
                decision_date: NaiveDate::from_num_days_from_ce_opt(737000 + tt as i32).unwrap(),
                realization_date: NaiveDate::from_num_days_from_ce_opt(737001 + tt as i32)
                    .unwrap(),
                instruments: (0..n).map(|i| format!("i{i:02}")).collect(),
                z,
                r,
            });
        }
        (
            IpcaDataset {
                characteristics: (0..l).map(|j| format!("c{j}")).collect(),
                blocks,
            },
            gamma0,
        )
    }

    #[test]
    fn exact_model_is_recovered() {
        let (data, gamma0) = exact_dataset(4, 2, 12, 40);
        let model = fit_ipca(&data, 2, 1e-8, 500).unwrap();
        assert!(model.converged, "no convergence: delta {}", model.final_delta);

        // Orthonormal loadings.
        let gtg = model.gamma.transpose().matmul(&model.gamma);
        assert!(gtg.max_abs_diff(&Mat::identity(2)) < 1e-10);

        // Same column space as the generator.
        let angles = crate::linalg::principal_angles(&model.gamma, &gamma0).unwrap();
        for th in angles {
            assert!(th < 1e-6, "angle {th}");
        }

        // Zero noise: essentially perfect fit.
        assert!(model.r_squared > 1.0 - 1e-12);

        // Residuals of the stored factor returns.
        for (idx, b) in data.blocks.iter().enumerate() {
            let (_, f) = &model.factor_returns[idx];
            let fitted = b.z.matvec(&model.gamma.matvec(f));
            for (i, &r) in b.r.iter().enumerate() {
                assert!((r - fitted[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn saturated_model_fits_perfectly() {
        let (data, _) = exact_dataset(3, 3, 10, 25);
        let model = fit_ipca(&data, 3, 1e-8, 500).unwrap();
        assert!(model.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn loadings_stay_orthonormal_on_rough_data() {
        // Deterministic pseudo-noise returns; the point is the invariant,
        // not the fit quality.
        let (mut data, _) = exact_dataset(4, 1, 10, 30);
        for (t, b) in data.blocks.iter_mut().enumerate() {
            for (i, r) in b.r.iter_mut().enumerate() {
                *r = 0.01 * (((t * 13 + i * 7) % 23) as f64 / 23.0 - 0.5);
            }
        }
        let model = fit_ipca(&data, 1, 1e-6, 200).unwrap();
        let gtg = model.gamma.transpose().matmul(&model.gamma);
        assert!(gtg.max_abs_diff(&Mat::identity(1)) < 1e-8);
    }

    #[test]
    fn training_range_extraction_is_bit_identical() {
        let (data, _) = exact_dataset(4, 2, 12, 40);
        let model = fit_ipca(&data, 2, 1e-8, 500).unwrap();
        let first = data.blocks.first().unwrap().decision_date;
        let last = data.blocks.last().unwrap().decision_date;
        let (oos, warnings) = oos_factor_returns(&model, &data, first, last);
        assert!(warnings.is_empty());
        assert_eq!(oos, model.factor_returns);
    }

    #[test]
    fn empty_range_gives_empty_series() {
        let (data, _) = exact_dataset(4, 2, 12, 10);
        let model = fit_ipca(&data, 2, 1e-8, 500).unwrap();
        let (oos, _) = oos_factor_returns(
            &model,
            &data,
            NaiveDate::from_ymd_opt(1990, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(1990, 12, 31).unwrap(),
        );
        assert!(oos.is_empty());
    }

    fn fake_factor_returns(n: usize) -> Vec<(NaiveDate, Vec<f64>)> {
        (0..n)
            .map(|t| {
                let day = NaiveDate::from_num_days_from_ce_opt(737000 + t as i32).unwrap();
                let f1 = 0.01 * ((t as f64) * 0.7).sin();
                let f2 = 0.005 * ((t as f64) * 1.3).cos();
                (day, vec![f1, f2])
            })
            .collect()
    }

    #[test]
    fn spanned_portfolio_has_zero_alpha_and_no_stars() {
        let factors = fake_factor_returns(500);
        let portfolio: Vec<(NaiveDate, f64)> = factors
            .iter()
            .map(|(d, f)| (*d, 2.0 * f[0] - 0.5 * f[1]))
            .collect();
        let rep = alpha_regression(&portfolio, &factors, false).unwrap();
        assert!(rep.alpha_annualized.abs() < 1e-10);
        // The residual-scale floor keeps |t| near zero instead of 0/0.
        assert!(rep.t_stat.abs() < 0.5);
        assert_eq!(rep.significance, Stars::None);
        assert!((rep.betas[0] - 2.0).abs() < 1e-10);
        assert!((rep.betas[1] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn constant_shift_identifies_the_intercept() {
        let factors = fake_factor_returns(500);
        let portfolio: Vec<(NaiveDate, f64)> = factors
            .iter()
            .map(|(d, f)| (*d, f[0] + f[1] + 0.001))
            .collect();
        let rep = alpha_regression(&portfolio, &factors, false).unwrap();
        assert!((rep.alpha_annualized - 0.252).abs() < 1e-9);
        assert_eq!(rep.significance, Stars::Three);
        assert!(rep.t_stat > 100.0);
    }

    #[test]
    fn collinear_factors_are_rejected() {
        let factors: Vec<(NaiveDate, Vec<f64>)> = fake_factor_returns(50)
            .into_iter()
            .map(|(d, f)| (d, vec![f[0], 2.0 * f[0]]))
            .collect();
        let portfolio: Vec<(NaiveDate, f64)> =
            factors.iter().map(|(d, f)| (*d, f[0])).collect();
        let err = alpha_regression(&portfolio, &factors, false).unwrap_err();
        assert_eq!(err, IpcaError::DegenerateFactors);
    }

    #[test]
    fn too_few_observations_are_rejected() {
        let factors = fake_factor_returns(3);
        let portfolio: Vec<(NaiveDate, f64)> =
            factors.iter().map(|(d, f)| (*d, f[0])).collect();
        let err = alpha_regression(&portfolio, &factors, false).unwrap_err();
        assert_eq!(
            err,
            IpcaError::TooFewObservations { have: 3, need: 4 }
        );
    }

    #[test]
    fn robust_errors_agree_in_order_of_magnitude() {
        let factors = fake_factor_returns(300);
        let portfolio: Vec<(NaiveDate, f64)> = factors
            .iter()
            .enumerate()
            .map(|(t, (d, f))| (*d, f[0] + 0.002 * ((t % 7) as f64 - 3.0)))
            .collect();
        let classical = alpha_regression(&portfolio, &factors, false).unwrap();
        let robust = alpha_regression(&portfolio, &factors, true).unwrap();
        assert_eq!(classical.alpha_daily, robust.alpha_daily);
        let ratio = classical.t_stat / robust.t_stat;
        assert!(ratio > 0.2 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn star_thresholds_split_normal_and_student_t() {
        // Large n: normal critical values.
        assert_eq!(stars_for(3.0, 500, 1), Stars::Three);
        assert_eq!(stars_for(2.0, 500, 1), Stars::Two);
        assert_eq!(stars_for(1.7, 500, 1), Stars::One);
        assert_eq!(stars_for(1.2, 500, 1), Stars::None);
        // Small n: t critical values are wider; 2.6 clears the 5% bar
        // (t_{0.975, 18} = 2.101) but not the 1% bar (t_{0.995, 18} = 2.878).
        assert_eq!(stars_for(2.6, 20, 1), Stars::Two);
        assert_eq!(stars_for(3.0, 20, 1), Stars::Three);
        assert_eq!(stars_for(1.8, 20, 1), Stars::One);
    }
}
