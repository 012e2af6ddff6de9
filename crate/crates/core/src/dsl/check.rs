//! Static look-ahead analysis.
//!
//! An expression is safe when every temporal operator looks backward:
//! every `lag` offset is non-negative and every rolling window covers at
//! least one observation. The surface grammar already guarantees this
//! (it only parses `lag(x, k >= 1)` and windows `>= 1`), so the check
//! exists for ASTs built through the API or injected via raw catalog
//! entries. `lag(x, 0)` is the current value; it reads nothing from the
//! future and passes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::ast::{Expr, FactorSpec};

/// One temporal operator found in the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalNode {
    /// Canonical text of the operator's subtree.
    pub node: String,
    /// Operator kind: "lag", "diff", a rolling name, or "corr".
    pub op: String,
    /// Lag offset or window length as written.
    pub param: i64,
    /// Total backward reach of the subtree, in observations.
    pub horizon: usize,
    /// False when this node can read future observations.
    pub ok: bool,
}

/// Result of the static analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub pass: bool,
    pub nodes: Vec<TemporalNode>,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", if self.pass { "PASS" } else { "FAIL" })?;
        for n in &self.nodes {
            writeln!(
                f,
                "  {} {} param={} horizon={} {}",
                if n.ok { "ok  " } else { "BAD " },
                n.op,
                n.param,
                n.horizon,
                n.node
            )?;
        }
        Ok(())
    }
}

/// Checks every temporal node of `spec` for backward-only access.
pub fn check_lookahead<R: Scalar>(spec: &FactorSpec<R>) -> CheckReport {
    let mut nodes = Vec::new();
    walk(&spec.expr, &mut nodes);
    CheckReport {
        pass: nodes.iter().all(|n| n.ok),
        nodes,
    }
}

fn walk<R: Scalar>(e: &Expr<R>, out: &mut Vec<TemporalNode>) {
    match e {
        Expr::Col(_) | Expr::Lit(_) => {}
        Expr::Neg(x)
        | Expr::Abs(x)
        | Expr::Sign(x)
        | Expr::Log(x)
        | Expr::Czs(x)
        | Expr::Crank(x) => walk(x, out),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            walk(a, out);
            walk(b, out);
        }
        Expr::Lag(x, k) => {
            out.push(TemporalNode {
                node: e.to_text(),
                op: "lag".into(),
                param: *k,
                horizon: e.horizon(),
                ok: *k >= 0,
            });
            walk(x, out);
        }
        Expr::Diff(x) => {
            out.push(TemporalNode {
                node: e.to_text(),
                op: "diff".into(),
                param: 1,
                horizon: e.horizon(),
                ok: true,
            });
            walk(x, out);
        }
        Expr::Roll(op, x, w) => {
            out.push(TemporalNode {
                node: e.to_text(),
                op: op.name().into(),
                param: *w as i64,
                horizon: e.horizon(),
                ok: *w >= 1,
            });
            walk(x, out);
        }
        Expr::Corr(x, y, w) => {
            out.push(TemporalNode {
                node: e.to_text(),
                op: "corr".into(),
                param: *w as i64,
                horizon: e.horizon(),
                ok: *w >= 1,
            });
            walk(x, out);
            walk(y, out);
        }
    }
}
