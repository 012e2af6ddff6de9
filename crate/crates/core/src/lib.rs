//! Factor research engine for daily futures panels.
//!
//! The crate is organized as a pipeline:
//!
//! * [`panel`] loads and validates daily bars into an aligned panel with
//!   per-instrument simple returns.
//! * [`dsl`] parses and evaluates factor expressions over a panel, and
//!   provides both a static lookahead check and a dynamic perturbation test.
//! * [`factors`] ships a small catalog of built-in factor expressions and a
//!   loader for user catalogs.
//! * [`portfolio`] turns factor values into decile portfolios and runs daily
//!   backtests, with static and dynamic polarity handling for multi-factor
//!   composites.
//! * [`metrics`] computes annualized returns, Sharpe ratios, drawdowns and
//!   rank information coefficients.
//! * [`ipca`] fits an instrumented principal-components benchmark by
//!   alternating least squares and regresses portfolio returns on its
//!   factors to produce alpha reports.
//! * [`synth`] generates seeded synthetic panels so every pipeline stage can
//!   be exercised without proprietary data.
//!
//! All numeric code is generic over [`scalar::Scalar`] (any IEEE float that
//! satisfies the trait bounds; in practice `f32` or `f64`). The aliases
//! below fix the default precision used by the CLI and the tests.

pub mod dsl;
pub mod factors;
pub mod ipca;
pub mod linalg;
pub mod metrics;
pub mod panel;
pub mod portfolio;
pub mod scalar;
pub mod synth;

pub use scalar::Scalar;

/// Default scalar type used by the command-line tool and tests.
pub type Real = f64;

/// A panel of daily bars at default precision.
pub type Panel = panel::Panel<Real>;
/// A factor value surface at default precision.
pub type FactorSeries = dsl::FactorSeries<Real>;
/// A parsed factor expression at default precision.
pub type FactorSpec = dsl::FactorSpec<Real>;
/// A daily backtest result at default precision.
pub type BacktestResult = portfolio::BacktestResult<Real>;
/// A fitted instrumented-PCA model at default precision.
pub type IpcaModel = ipca::IpcaModel<Real>;
