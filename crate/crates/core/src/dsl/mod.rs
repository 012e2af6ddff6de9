//! Factor expression language.
//!
//! Expressions combine panel columns with arithmetic, elementwise
//! functions, per-instrument temporal operators (`lag`, `diff`, rolling
//! `mean`/`std`/`sum`/`min`/`max`, rolling `corr`) and cross-sectional
//! operators (`czs` z-score, `crank` fractional rank). The surface grammar
//! admits only backward-looking constructs; [`check::check_lookahead`]
//! verifies that statically for any AST (including hand-built ones), and
//! [`perturb::perturbation_no_lookahead_test`] verifies it dynamically by
//! resampling data strictly after a cut date.

pub mod ast;
pub mod check;
pub mod eval;
pub mod parse;
pub mod perturb;
pub mod specgen;

pub use ast::{Expr, FactorSpec, RollOp};
pub use check::{check_lookahead, CheckReport, TemporalNode};
pub use eval::{evaluate, fractional_ranks, FactorSeries};
pub use parse::{parse_expression, ParseError};
pub use perturb::perturbation_no_lookahead_test;
pub use specgen::random_spec;
