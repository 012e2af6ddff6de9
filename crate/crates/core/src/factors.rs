//! Factor catalogs: the built-in set and user catalog files.
//!
//! A catalog file has one `name = expression` entry per line, `#` comments
//! and blank lines. An entry may also inject a raw serialized tree with
//! `name = @ast {json}`; that path exists so tooling can exercise ASTs the
//! surface grammar cannot produce, and every loaded entry (from either
//! form) must pass the static look-ahead check or the load fails naming
//! the entry.

use std::io::{BufRead, BufReader, Read};

use thiserror::Error;

use crate::dsl::{check_lookahead, CheckReport, Expr, FactorSpec, ParseError};
use crate::scalar::Scalar;

/// One catalog entry: a named expression plus its tunable windows.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry<R: Scalar> {
    pub spec: FactorSpec<R>,
    /// Named window lengths the expression was instantiated with.
    pub parameters: Vec<(String, usize)>,
    /// What the factor measures, for listings.
    pub note: String,
}

impl<R: Scalar> CatalogEntry<R> {
    pub fn name(&self) -> &str {
        &self.spec.name
    }
}

/// Window lengths for the built-in factors. Every rolling horizon is a
/// parameter so alternate readings of a factor are one edit away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltinParams {
    /// Short moving-average window (trend fast leg).
    pub ma_short: usize,
    /// Long moving-average window (trend slow leg).
    pub ma_long: usize,
    /// Return volatility window.
    pub vol_window: usize,
    /// Price-volume correlation window, long variant.
    pub corr_long: usize,
    /// Price-volume correlation window, short variant.
    pub corr_short: usize,
    /// Volume and amount normalization window.
    pub liq_window: usize,
    /// Price drift window.
    pub drift_window: usize,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        BuiltinParams {
            ma_short: 5,
            ma_long: 20,
            vol_window: 20,
            corr_long: 20,
            corr_short: 10,
            liq_window: 20,
            drift_window: 7,
        }
    }
}

/// The built-in factor set with default windows.
pub fn builtin_catalog<R: Scalar>() -> Vec<CatalogEntry<R>> {
    builtin_catalog_with(&BuiltinParams::default())
}

/// The built-in factor set with explicit windows.
pub fn builtin_catalog_with<R: Scalar>(p: &BuiltinParams) -> Vec<CatalogEntry<R>> {
    let entry = |name: &str, src: String, parameters: Vec<(&str, usize)>, note: &str| {
        let spec = FactorSpec::<R>::parse(name, &src)
            .unwrap_or_else(|e| panic!("built-in {name} must parse: {e}"));
        CatalogEntry {
            spec,
            parameters: parameters
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            note: note.to_string(),
        }
    };

    vec![
        entry(
            "IMVSI",
            format!(
                "czs(mean(close, {s}) - mean(close, {l})) + czs(std(ret, {v})) + czs(corr(diff(close), volume, {c}))",
                s = p.ma_short,
                l = p.ma_long,
                v = p.vol_window,
                c = p.corr_long,
            ),
            vec![
                ("ma_short", p.ma_short),
                ("ma_long", p.ma_long),
                ("vol_window", p.vol_window),
                ("corr_long", p.corr_long),
            ],
            "moving-average spread plus return volatility plus price-volume correlation",
        ),
        entry(
            "ALOWS",
            format!(
                "czs(corr((high - low) / close, volume, {c})) + czs(volume / mean(volume, {q}))",
                c = p.corr_short,
                q = p.liq_window,
            ),
            vec![("corr_short", p.corr_short), ("liq_window", p.liq_window)],
            "range-volume correlation plus relative volume",
        ),
        entry(
            "MRSI",
            format!(
                "czs(diff(close) / lag(close, 1) / std(ret, {v})) + czs((volume - mean(volume, {q})) / std(volume, {q})) + czs(corr(diff(close), volume, {c}))",
                v = p.vol_window,
                q = p.liq_window,
                c = p.corr_short,
            ),
            vec![
                ("vol_window", p.vol_window),
                ("liq_window", p.liq_window),
                ("corr_short", p.corr_short),
            ],
            "volatility-scaled momentum plus volume surprise plus price-volume correlation",
        ),
        entry(
            "FSI",
            "czs(basis / spot)".to_string(),
            vec![],
            "basis relative to spot",
        ),
        entry(
            "MMLI",
            format!(
                "czs(mean(diff(close), {d})) + czs(volume / amount)",
                d = p.drift_window,
            ),
            vec![("drift_window", p.drift_window)],
            "average price drift plus volume-to-amount ratio",
        ),
        entry(
            "FMAT",
            format!(
                "czs(diff(close) / lag(close, 1)) + czs(basis / spot) + czs(amount / mean(amount, {q}))",
                q = p.liq_window,
            ),
            vec![("liq_window", p.liq_window)],
            "daily momentum plus relative basis plus relative amount",
        ),
    ]
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `name = expression`")]
    Syntax { line: usize },
    #[error("line {line}: invalid entry name {name:?}")]
    BadName { line: usize, name: String },
    #[error("line {line}: duplicate entry {name:?}")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: entry {name:?}: {err}")]
    Expr {
        line: usize,
        name: String,
        err: ParseError,
    },
    #[error("line {line}: entry {name:?}: invalid ast: {msg}")]
    Ast {
        line: usize,
        name: String,
        msg: String,
    },
    #[error("{}", lookahead_message(failures))]
    Lookahead {
        failures: Vec<(String, CheckReport)>,
    },
}

fn lookahead_message(failures: &[(String, CheckReport)]) -> String {
    let mut out = String::new();
    for (i, (name, report)) in failures.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("entry {name:?} fails the look-ahead check:\n{report}"));
    }
    out
}

/// Loads a catalog file. Every entry must pass the static look-ahead
/// check; offenders fail the whole load, by name.
pub fn load_catalog<R: Scalar, Rd: Read>(reader: Rd) -> Result<Vec<CatalogEntry<R>>, CatalogError> {
    let mut entries: Vec<CatalogEntry<R>> = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (name, rhs) = text
            .split_once('=')
            .ok_or(CatalogError::Syntax { line: lineno })?;
        let name = name.trim();
        let rhs = rhs.trim();
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            return Err(CatalogError::BadName {
                line: lineno,
                name: name.to_string(),
            });
        }
        if entries.iter().any(|e| e.name() == name) {
            return Err(CatalogError::Duplicate {
                line: lineno,
                name: name.to_string(),
            });
        }
        let expr: Expr<R> = if let Some(json) = rhs.strip_prefix("@ast") {
            serde_json::from_str(json.trim()).map_err(|e| CatalogError::Ast {
                line: lineno,
                name: name.to_string(),
                msg: e.to_string(),
            })?
        } else {
            crate::dsl::parse_expression(rhs).map_err(|err| CatalogError::Expr {
                line: lineno,
                name: name.to_string(),
                err,
            })?
        };
        entries.push(CatalogEntry {
            spec: FactorSpec::new(name, expr),
            parameters: vec![],
            note: String::new(),
        });
    }

    let failures: Vec<(String, CheckReport)> = entries
        .iter()
        .map(|e| (e.name().to_string(), check_lookahead(&e.spec)))
        .filter(|(_, report)| !report.pass)
        .collect();
    if !failures.is_empty() {
        return Err(CatalogError::Lookahead { failures });
    }
    Ok(entries)
}

/// Renders a catalog in the file format `load_catalog` reads.
pub fn catalog_to_text<R: Scalar>(entries: &[CatalogEntry<R>]) -> String {
    let mut out = String::new();
    for e in entries {
        if !e.note.is_empty() {
            out.push_str(&format!("# {}\n", e.note));
        }
        if !e.parameters.is_empty() {
            let params: Vec<String> = e
                .parameters
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            out.push_str(&format!("# parameters: {}\n", params.join(" ")));
        }
        out.push_str(&format!("{} = {}\n", e.name(), e.spec.expr.to_text()));
    }
    out
}
