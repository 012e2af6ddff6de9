//! Expression tree and canonical printing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::panel::Column;
use crate::scalar::Scalar;

/// Rolling aggregation operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RollOp {
    Mean,
    Std,
    Sum,
    Min,
    Max,
}

impl RollOp {
    pub fn name(self) -> &'static str {
        match self {
            RollOp::Mean => "mean",
            RollOp::Std => "std",
            RollOp::Sum => "sum",
            RollOp::Min => "min",
            RollOp::Max => "max",
        }
    }
}

/// Factor expression node.
///
/// The parser only produces lags >= 1 and windows >= 1; other values are
/// constructible through this API (and through raw-AST catalog entries) and
/// are caught by [`super::check::check_lookahead`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr<R> {
    Col(Column),
    Lit(R),
    Neg(Box<Expr<R>>),
    Abs(Box<Expr<R>>),
    Sign(Box<Expr<R>>),
    Log(Box<Expr<R>>),
    Add(Box<Expr<R>>, Box<Expr<R>>),
    Sub(Box<Expr<R>>, Box<Expr<R>>),
    Mul(Box<Expr<R>>, Box<Expr<R>>),
    Div(Box<Expr<R>>, Box<Expr<R>>),
    /// Value of the child `k` observations earlier on the instrument's own
    /// observation sequence. Negative `k` reaches into the future.
    Lag(Box<Expr<R>>, i64),
    /// First difference on the observation sequence: x - lag(x, 1).
    Diff(Box<Expr<R>>),
    /// Rolling aggregate over the last `window` observations.
    Roll(RollOp, Box<Expr<R>>, usize),
    /// Rolling Pearson correlation over the last `window` paired
    /// observations of both children.
    Corr(Box<Expr<R>>, Box<Expr<R>>, usize),
    /// Cross-sectional z-score (population sigma) per date.
    Czs(Box<Expr<R>>),
    /// Cross-sectional fractional rank in [0, 1] per date.
    Crank(Box<Expr<R>>),
}

impl<R: Scalar> Expr<R> {
    /// Canonical text form. Binary operations are fully parenthesized, so
    /// printing then parsing reproduces the tree exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write(&mut s);
        s
    }

    fn write(&self, out: &mut String) {
        match self {
            Expr::Col(c) => out.push_str(c.name()),
            Expr::Lit(v) => out.push_str(&format!("{v}")),
            Expr::Neg(x) => {
                out.push_str("(-");
                x.write(out);
                out.push(')');
            }
            Expr::Abs(x) => write_call(out, "abs", &[x]),
            Expr::Sign(x) => write_call(out, "sign", &[x]),
            Expr::Log(x) => write_call(out, "log", &[x]),
            Expr::Add(a, b) => write_infix(out, a, "+", b),
            Expr::Sub(a, b) => write_infix(out, a, "-", b),
            Expr::Mul(a, b) => write_infix(out, a, "*", b),
            Expr::Div(a, b) => write_infix(out, a, "/", b),
            Expr::Lag(x, k) => {
                out.push_str("lag(");
                x.write(out);
                out.push_str(&format!(", {k})"));
            }
            Expr::Diff(x) => write_call(out, "diff", &[x]),
            Expr::Roll(op, x, w) => {
                out.push_str(op.name());
                out.push('(');
                x.write(out);
                out.push_str(&format!(", {w})"));
            }
            Expr::Corr(x, y, w) => {
                out.push_str("corr(");
                x.write(out);
                out.push_str(", ");
                y.write(out);
                out.push_str(&format!(", {w})"));
            }
            Expr::Czs(x) => write_call(out, "czs", &[x]),
            Expr::Crank(x) => write_call(out, "crank", &[x]),
        }
    }

    /// Maximum number of past observations the expression can reach beyond
    /// the anchor date, counting nested operators cumulatively. Negative
    /// lags contribute their magnitude; the static check flags them
    /// separately.
    pub fn horizon(&self) -> usize {
        match self {
            Expr::Col(_) | Expr::Lit(_) => 0,
            Expr::Neg(x) | Expr::Abs(x) | Expr::Sign(x) | Expr::Log(x) => x.horizon(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.horizon().max(b.horizon())
            }
            Expr::Lag(x, k) => x.horizon() + k.unsigned_abs() as usize,
            Expr::Diff(x) => x.horizon() + 1,
            Expr::Roll(_, x, w) => x.horizon() + w.saturating_sub(1),
            Expr::Corr(x, y, w) => x.horizon().max(y.horizon()) + w.saturating_sub(1),
            Expr::Czs(x) | Expr::Crank(x) => x.horizon(),
        }
    }
}

fn write_call<R: Scalar>(out: &mut String, name: &str, args: &[&Expr<R>]) {
    out.push_str(name);
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        a.write(out);
    }
    out.push(')');
}

fn write_infix<R: Scalar>(out: &mut String, a: &Expr<R>, op: &str, b: &Expr<R>) {
    out.push('(');
    a.write(out);
    out.push(' ');
    out.push_str(op);
    out.push(' ');
    b.write(out);
    out.push(')');
}

impl<R: Scalar> fmt::Display for Expr<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A named factor expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec<R> {
    pub name: String,
    pub expr: Expr<R>,
}

impl<R: Scalar> FactorSpec<R> {
    pub fn new(name: impl Into<String>, expr: Expr<R>) -> Self {
        FactorSpec {
            name: name.into(),
            expr,
        }
    }

    /// Parses `source` as an expression and names the result.
    pub fn parse(name: impl Into<String>, source: &str) -> Result<Self, super::ParseError> {
        Ok(FactorSpec {
            name: name.into(),
            expr: super::parse_expression(source)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizons_accumulate_through_nesting() {
        // mean(lag(close, 2), 5) reaches (5-1) + 2 = 6 observations back.
        let e: Expr<f64> = Expr::Roll(
            RollOp::Mean,
            Box::new(Expr::Lag(Box::new(Expr::Col(Column::Close)), 2)),
            5,
        );
        assert_eq!(e.horizon(), 6);
        let c: Expr<f64> = Expr::Corr(
            Box::new(Expr::Diff(Box::new(Expr::Col(Column::Close)))),
            Box::new(Expr::Col(Column::Volume)),
            10,
        );
        assert_eq!(c.horizon(), 10);
    }

    #[test]
    fn printing_is_fully_parenthesized() {
        let e: Expr<f64> = Expr::Add(
            Box::new(Expr::Col(Column::Close)),
            Box::new(Expr::Mul(
                Box::new(Expr::Lit(2.0)),
                Box::new(Expr::Col(Column::Volume)),
            )),
        );
        assert_eq!(e.to_text(), "(close + (2 * volume))");
    }
}
