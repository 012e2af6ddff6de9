//! Run configuration: a flat key-value file plus command-line overrides.
//!
//! The file format is one `key = value` pair per line, `#` comments and
//! blank lines allowed. Later lines win over earlier ones, and the
//! `--data`, `--schema`, `--catalog`, `--out` and `--seed` flags win over
//! the file. Unknown keys are rejected so typos fail loudly.

use std::path::PathBuf;

use chrono::NaiveDate;

use basislab_core::panel::Column;
use basislab_core::portfolio::TradeMode;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// `builtin` for the shipped factor set, otherwise a catalog file path.
    pub catalog: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub backtest_start: Option<NaiveDate>,
    pub backtest_end: Option<NaiveDate>,
    pub mode: TradeMode,
    pub fraction: f64,
    pub fee_rate: f64,
    /// Inclusive range of factor counts to fit, e.g. `2` or `1..5`.
    pub ipca_k: (usize, usize),
    pub ipca_tol: f64,
    pub ipca_max_iter: usize,
    pub ipca_characteristics: Vec<Column>,
    pub robust: bool,
    pub n_instruments: usize,
    pub n_days: usize,
    pub vol: f64,
    pub drift: f64,
    pub basis_vol: f64,
    pub volume_scale: f64,
    pub replay_strength: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            schema: None,
            catalog: None,
            out: PathBuf::from("."),
            seed: 0,
            train_start: None,
            train_end: None,
            backtest_start: None,
            backtest_end: None,
            mode: TradeMode::LongShort,
            fraction: 0.1,
            fee_rate: 0.00025,
            ipca_k: (2, 2),
            ipca_tol: 1e-6,
            ipca_max_iter: 1000,
            ipca_characteristics: vec![Column::Close, Column::Volume, Column::Basis],
            robust: false,
            n_instruments: 20,
            n_days: 120,
            vol: 0.02,
            drift: 0.0002,
            basis_vol: 0.001,
            volume_scale: 1000.0,
            replay_strength: None,
        }
    }
}

/// Splits a config document into ordered key-value pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", idx + 1))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_date(value: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(value, "%Y-%m-%d")
        .map_err(|_| format!("expected a YYYY-MM-DD date, got {value:?}"))
}

fn parse_mode(value: &str) -> Result<TradeMode, String> {
    TradeMode::from_name(value)
        .ok_or_else(|| format!("expected `long_short` or `long_only`, got {value:?}"))
}

fn parse_num<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("expected {what}, got {value:?}"))
}

fn parse_k_range(value: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = match value.split_once("..") {
        Some((a, b)) => (
            parse_num::<usize>(a.trim(), "a factor count")?,
            parse_num::<usize>(b.trim(), "a factor count")?,
        ),
        None => {
            let k = parse_num::<usize>(value, "a factor count")?;
            (k, k)
        }
    };
    if lo == 0 || hi < lo {
        return Err(format!("factor count range {value:?} is empty or starts at zero"));
    }
    Ok((lo, hi))
}

fn parse_columns(value: &str) -> Result<Vec<Column>, String> {
    let cols: Result<Vec<Column>, String> = value
        .split(',')
        .map(|name| {
            let name = name.trim();
            Column::from_name(name).ok_or_else(|| format!("unknown column {name:?}"))
        })
        .collect();
    let cols = cols?;
    if cols.is_empty() {
        return Err("need at least one characteristic column".to_string());
    }
    Ok(cols)
}

impl RunConfig {
    /// Applies one key-value pair. Unknown keys are an error.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "schema" => self.schema = Some(PathBuf::from(value)),
            "catalog" => self.catalog = Some(value.to_string()),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = parse_num(value, "an unsigned integer")?,
            "train_start" => self.train_start = Some(parse_date(value)?),
            "train_end" => self.train_end = Some(parse_date(value)?),
            "backtest_start" => self.backtest_start = Some(parse_date(value)?),
            "backtest_end" => self.backtest_end = Some(parse_date(value)?),
            "mode" => self.mode = parse_mode(value)?,
            "fraction" => self.fraction = parse_num(value, "a number")?,
            "fee_rate" => self.fee_rate = parse_num(value, "a number")?,
            "ipca_k" => self.ipca_k = parse_k_range(value)?,
            "ipca_tol" => self.ipca_tol = parse_num(value, "a number")?,
            "ipca_max_iter" => self.ipca_max_iter = parse_num(value, "an unsigned integer")?,
            "ipca_characteristics" => self.ipca_characteristics = parse_columns(value)?,
            "robust" => self.robust = parse_num(value, "true or false")?,
            "n_instruments" => self.n_instruments = parse_num(value, "an unsigned integer")?,
            "n_days" => self.n_days = parse_num(value, "an unsigned integer")?,
            "vol" => self.vol = parse_num(value, "a number")?,
            "drift" => self.drift = parse_num(value, "a number")?,
            "basis_vol" => self.basis_vol = parse_num(value, "a number")?,
            "volume_scale" => self.volume_scale = parse_num(value, "a number")?,
            "replay_strength" => self.replay_strength = Some(parse_num(value, "a number")?),
            other => return Err(format!("unknown configuration key {other:?}")),
        }
        Ok(())
    }

    /// Applies a whole document in order.
    pub fn apply_document(&mut self, text: &str) -> Result<(), String> {
        for (key, value) in parse_pairs(text)? {
            self.apply(&key, &value)
                .map_err(|e| format!("key {key:?}: {e}"))?;
        }
        Ok(())
    }

    /// The ranges must be well ordered when both ends are present.
    pub fn check_ranges(&self) -> Result<(), String> {
        for (label, start, end) in [
            ("train", self.train_start, self.train_end),
            ("backtest", self.backtest_start, self.backtest_end),
        ] {
            if let (Some(s), Some(e)) = (start, end) {
                if s > e {
                    return Err(format!("{label} range starts after it ends ({s} > {e})"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_order_and_overrides() {
        let mut config = RunConfig::default();
        config
            .apply_document("fee_rate = 0.001\n# comment\nfee_rate = 0.002\nmode = long_only\n")
            .unwrap();
        assert_eq!(config.fee_rate, 0.002);
        assert_eq!(config.mode, TradeMode::LongOnly);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut config = RunConfig::default();
        let err = config.apply_document("fee_rte = 0.001\n").unwrap_err();
        assert!(err.contains("fee_rte"), "{err}");
    }

    #[test]
    fn k_ranges_parse_both_forms() {
        assert_eq!(parse_k_range("3").unwrap(), (3, 3));
        assert_eq!(parse_k_range("1..5").unwrap(), (1, 5));
        assert!(parse_k_range("0").is_err());
        assert!(parse_k_range("4..2").is_err());
    }

    #[test]
    fn characteristic_lists_name_panel_columns() {
        let cols = parse_columns("close, volume,ret").unwrap();
        assert_eq!(cols, vec![Column::Close, Column::Volume, Column::Ret]);
        assert!(parse_columns("closs").is_err());
    }

    #[test]
    fn bad_ranges_are_caught() {
        let mut config = RunConfig::default();
        config
            .apply_document("train_start = 2020-02-01\ntrain_end = 2020-01-01\n")
            .unwrap();
        assert!(config.check_ranges().is_err());
    }
}
