//! Daily panel data: loading, validation, alignment and returns.
//!
//! A [`Panel`] holds one row per (instrument, date) with the standard daily
//! fields for a futures contract: OHLC, volume, traded amount, spot price,
//! basis and premium. Construction validates row-level invariants, aligns
//! rows on the union calendar and precomputes per-instrument simple returns.
//!
//! Instruments do not need to trade every calendar date. A missing
//! (instrument, date) cell is a *gap*; gaps flow through the expression
//! evaluator as missing values rather than NaNs.

use std::collections::BTreeSet;
use std::fmt;
use std::io;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// One daily bar for one instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "R: Scalar")]
pub struct PanelRow<R: Scalar> {
    pub instrument: String,
    pub date: NaiveDate,
    pub basis: R,
    pub spot: R,
    pub premium: R,
    pub open: R,
    pub high: R,
    pub low: R,
    pub close: R,
    pub volume: R,
    pub amount: R,
    /// Optional extra column used by evaluator self-tests; absent in
    /// ordinary data files.
    pub replay: Option<R>,
}

/// Data columns addressable by the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Column {
    Open,
    High,
    Low,
    Close,
    Volume,
    Amount,
    Basis,
    Spot,
    Premium,
    /// Daily simple return on the instrument's own traded dates.
    Ret,
    /// Test-only column wired to look-ahead material; see the
    /// `replay-column` feature.
    #[cfg(feature = "replay-column")]
    Replay,
}

impl Column {
    /// Columns reachable from the expression language in this build.
    pub fn all() -> &'static [Column] {
        &[
            Column::Open,
            Column::High,
            Column::Low,
            Column::Close,
            Column::Volume,
            Column::Amount,
            Column::Basis,
            Column::Spot,
            Column::Premium,
            Column::Ret,
            #[cfg(feature = "replay-column")]
            Column::Replay,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Column::Open => "open",
            Column::High => "high",
            Column::Low => "low",
            Column::Close => "close",
            Column::Volume => "volume",
            Column::Amount => "amount",
            Column::Basis => "basis",
            Column::Spot => "spot",
            Column::Premium => "premium",
            Column::Ret => "ret",
            #[cfg(feature = "replay-column")]
            Column::Replay => "replay",
        }
    }

    pub fn from_name(name: &str) -> Option<Column> {
        Column::all().iter().copied().find(|c| c.name() == name)
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps internal field names to the column headers of an external CSV file.
///
/// Defaults to the identity mapping over the canonical header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaMap {
    pub instrument: String,
    pub date: String,
    pub basis: String,
    pub spot: String,
    pub premium: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
    pub amount: String,
    /// Header of the optional replay column; only read when present.
    pub replay: String,
}

impl Default for SchemaMap {
    fn default() -> Self {
        SchemaMap {
            instrument: "instrument".into(),
            date: "date".into(),
            basis: "basis".into(),
            spot: "spot".into(),
            premium: "premium".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
            amount: "amount".into(),
            replay: "replay".into(),
        }
    }
}

impl SchemaMap {
    /// Overrides one field's external header. Unknown field names error.
    pub fn set(&mut self, field: &str, header: &str) -> Result<(), PanelError> {
        let slot = match field {
            "instrument" => &mut self.instrument,
            "date" => &mut self.date,
            "basis" => &mut self.basis,
            "spot" => &mut self.spot,
            "premium" => &mut self.premium,
            "open" => &mut self.open,
            "high" => &mut self.high,
            "low" => &mut self.low,
            "close" => &mut self.close,
            "volume" => &mut self.volume,
            "amount" => &mut self.amount,
            "replay" => &mut self.replay,
            other => {
                return Err(PanelError::UnknownSchemaField {
                    field: other.to_string(),
                })
            }
        };
        *slot = header.to_string();
        Ok(())
    }
}

/// One violated rule, attributed to a row when possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    /// 1-based line in the source file; `None` for rows built in memory.
    pub line: Option<u64>,
    pub instrument: Option<String>,
    pub date: Option<NaiveDate>,
    pub rule: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: ")?,
            None => {}
        }
        match (&self.instrument, &self.date) {
            (Some(i), Some(d)) => write!(f, "{i}/{d}: ")?,
            (Some(i), None) => write!(f, "{i}: ")?,
            _ => {}
        }
        f.write_str(&self.rule)
    }
}

/// Aggregated validation outcome. `errors` block construction; `warnings`
/// do not.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} error(s), {} warning(s)",
            self.errors.len(),
            self.warnings.len()
        )?;
        for e in &self.errors {
            writeln!(f, "  error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column {column:?}")]
    MissingColumn { column: String },
    #[error("unknown schema field {field:?}")]
    UnknownSchemaField { field: String },
    #[error("panel validation failed: {0}")]
    Invalid(ValidationReport),
}

/// Aligned daily panel. Rows are sorted by (instrument, date); the calendar
/// is the sorted union of all traded dates.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel<R: Scalar> {
    rows: Vec<PanelRow<R>>,
    instruments: Vec<String>,
    calendar: Vec<NaiveDate>,
    /// Date-major lookup: `grid[d * n_instruments + i]` is the row index of
    /// instrument `i` on calendar date `d`, if traded.
    grid: Vec<Option<u32>>,
    /// Simple return per row: close(t) / close(prev traded date) - 1.
    /// `None` on each instrument's first traded date.
    returns: Vec<Option<R>>,
}

impl<R: Scalar> Panel<R> {
    /// Builds a panel from rows, validating invariants and computing
    /// returns. Returns the panel together with any warnings.
    pub fn from_rows(mut rows: Vec<PanelRow<R>>) -> Result<(Self, ValidationReport), PanelError> {
        rows.sort_by(|a, b| (a.instrument.as_str(), a.date).cmp(&(b.instrument.as_str(), b.date)));
        let mut report = validate_rows(&rows, None);
        if !report.errors.is_empty() {
            return Err(PanelError::Invalid(report));
        }

        let instruments: Vec<String> = {
            let set: BTreeSet<&str> = rows.iter().map(|r| r.instrument.as_str()).collect();
            set.into_iter().map(str::to_string).collect()
        };
        let calendar: Vec<NaiveDate> = {
            let set: BTreeSet<NaiveDate> = rows.iter().map(|r| r.date).collect();
            set.into_iter().collect()
        };

        let n_i = instruments.len();
        let n_d = calendar.len();
        let mut grid = vec![None; n_d * n_i];
        for (k, row) in rows.iter().enumerate() {
            let i = instruments.binary_search(&row.instrument).expect("known");
            let d = calendar.binary_search(&row.date).expect("known");
            grid[d * n_i + i] = Some(k as u32);
        }

        let mut returns = vec![None; rows.len()];
        let mut k = 0usize;
        while k < rows.len() {
            let mut j = k + 1;
            while j < rows.len() && rows[j].instrument == rows[k].instrument {
                returns[j] = Some(rows[j].close / rows[j - 1].close - R::one());
                j += 1;
            }
            k = j;
        }

        warn_coverage(&rows, &instruments, &calendar, &mut report);

        Ok((
            Panel {
                rows,
                instruments,
                calendar,
                grid,
                returns,
            },
            report,
        ))
    }

    /// Loads a panel from CSV, mapping headers through `schema`.
    ///
    /// Parse failures, duplicate (instrument, date) keys and invariant
    /// violations are all collected into a [`ValidationReport`] with source
    /// line numbers; any error fails the load with that report attached.
    pub fn load_csv<Rd: io::Read>(
        reader: Rd,
        schema: &SchemaMap,
    ) -> Result<(Self, ValidationReport), PanelError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let col = |name: &str| {
            find(name).ok_or_else(|| PanelError::MissingColumn {
                column: name.to_string(),
            })
        };

        let c_instrument = col(&schema.instrument)?;
        let c_date = col(&schema.date)?;
        let c_basis = col(&schema.basis)?;
        let c_spot = col(&schema.spot)?;
        let c_premium = col(&schema.premium)?;
        let c_open = col(&schema.open)?;
        let c_high = col(&schema.high)?;
        let c_low = col(&schema.low)?;
        let c_close = col(&schema.close)?;
        let c_volume = col(&schema.volume)?;
        let c_amount = col(&schema.amount)?;
        let c_replay = find(&schema.replay);

        let mut rows: Vec<PanelRow<R>> = Vec::new();
        let mut lines: Vec<u64> = Vec::new();
        let mut parse_errors: Vec<Issue> = Vec::new();

        for record in rdr.records() {
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    let line = e.position().map(|p| p.line());
                    parse_errors.push(Issue {
                        line,
                        instrument: None,
                        date: None,
                        rule: format!("malformed record: {e}"),
                    });
                    continue;
                }
            };
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let instrument = record.get(c_instrument).unwrap_or("").to_string();
            let mut bad = false;

            let date = match NaiveDate::parse_from_str(record.get(c_date).unwrap_or(""), "%Y-%m-%d")
            {
                Ok(d) => Some(d),
                Err(_) => {
                    parse_errors.push(Issue {
                        line: Some(line),
                        instrument: Some(instrument.clone()),
                        date: None,
                        rule: format!(
                            "unparseable date {:?} (expected YYYY-MM-DD)",
                            record.get(c_date).unwrap_or("")
                        ),
                    });
                    bad = true;
                    None
                }
            };

            let mut num = |idx: usize, field: &str| -> Option<R> {
                let raw = record.get(idx).unwrap_or("");
                match raw.trim().parse::<R>() {
                    Ok(v) => Some(v),
                    Err(_) => {
                        parse_errors.push(Issue {
                            line: Some(line),
                            instrument: Some(instrument.clone()),
                            date,
                            rule: format!("unparseable {field} value {raw:?}"),
                        });
                        bad = true;
                        None
                    }
                }
            };

            let basis = num(c_basis, "basis");
            let spot = num(c_spot, "spot");
            let premium = num(c_premium, "premium");
            let open = num(c_open, "open");
            let high = num(c_high, "high");
            let low = num(c_low, "low");
            let close = num(c_close, "close");
            let volume = num(c_volume, "volume");
            let amount = num(c_amount, "amount");
            let replay = match c_replay {
                Some(idx) => {
                    let raw = record.get(idx).unwrap_or("").trim();
                    if raw.is_empty() {
                        None
                    } else {
                        num(idx, "replay")
                    }
                }
                None => None,
            };

            if bad {
                continue;
            }
            rows.push(PanelRow {
                instrument,
                date: date.expect("checked"),
                basis: basis.expect("checked"),
                spot: spot.expect("checked"),
                premium: premium.expect("checked"),
                open: open.expect("checked"),
                high: high.expect("checked"),
                low: low.expect("checked"),
                close: close.expect("checked"),
                volume: volume.expect("checked"),
                amount: amount.expect("checked"),
                replay,
            });
            lines.push(line);
        }

        // Validate in source order first so issues carry line numbers, then
        // hand off to from_rows for the canonical build.
        let mut report = validate_rows(&rows, Some(&lines));
        report.errors.splice(0..0, parse_errors);
        if !report.errors.is_empty() {
            return Err(PanelError::Invalid(report));
        }
        let (panel, mut built) = Self::from_rows(rows)?;
        built.warnings.splice(0..0, report.warnings);
        // from_rows re-derives coverage warnings; keep one copy.
        built.warnings.dedup();
        Ok((panel, built))
    }

    /// Serializes the panel to canonical CSV: header
    /// `instrument,date,basis,spot,premium,open,high,low,close,volume,amount`
    /// (plus `replay` when any row carries one), rows sorted by
    /// (instrument, date), shortest round-trip float formatting.
    pub fn to_csv_string(&self) -> String {
        let with_replay = self.rows.iter().any(|r| r.replay.is_some());
        let mut out = String::new();
        out.push_str("instrument,date,basis,spot,premium,open,high,low,close,volume,amount");
        if with_replay {
            out.push_str(",replay");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.instrument,
                r.date,
                r.basis,
                r.spot,
                r.premium,
                r.open,
                r.high,
                r.low,
                r.close,
                r.volume,
                r.amount
            ));
            if with_replay {
                out.push(',');
                if let Some(v) = r.replay {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Restricts the panel to `start..=end`. Returns are recomputed inside
    /// the window, so each instrument's first retained date has a gap
    /// return. An empty restriction yields an empty panel.
    pub fn slice(&self, start: NaiveDate, end: NaiveDate) -> Panel<R> {
        let rows: Vec<PanelRow<R>> = self
            .rows
            .iter()
            .filter(|r| r.date >= start && r.date <= end)
            .cloned()
            .collect();
        let (panel, _) = Panel::from_rows(rows).expect("valid rows stay valid");
        panel
    }

    pub fn rows(&self) -> &[PanelRow<R>] {
        &self.rows
    }

    pub fn instruments(&self) -> &[String] {
        &self.instruments
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        &self.calendar
    }

    pub fn n_instruments(&self) -> usize {
        self.instruments.len()
    }

    pub fn n_dates(&self) -> usize {
        self.calendar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.calendar.binary_search(&date).ok()
    }

    pub fn instrument_index(&self, id: &str) -> Option<usize> {
        self.instruments
            .binary_search_by(|probe| probe.as_str().cmp(id))
            .ok()
    }

    /// Row index for (date d, instrument i), if the instrument traded.
    pub fn row_index(&self, d: usize, i: usize) -> Option<usize> {
        self.grid[d * self.instruments.len() + i].map(|k| k as usize)
    }

    pub fn traded(&self, d: usize, i: usize) -> bool {
        self.row_index(d, i).is_some()
    }

    /// Cell value for a column; `None` when the instrument did not trade on
    /// that date, or for `ret` on the instrument's first traded date.
    pub fn value(&self, column: Column, d: usize, i: usize) -> Option<R> {
        let k = self.row_index(d, i)?;
        let row = &self.rows[k];
        match column {
            Column::Open => Some(row.open),
            Column::High => Some(row.high),
            Column::Low => Some(row.low),
            Column::Close => Some(row.close),
            Column::Volume => Some(row.volume),
            Column::Amount => Some(row.amount),
            Column::Basis => Some(row.basis),
            Column::Spot => Some(row.spot),
            Column::Premium => Some(row.premium),
            Column::Ret => self.returns[k],
            #[cfg(feature = "replay-column")]
            Column::Replay => row.replay,
        }
    }

    /// Simple return for (date d, instrument i); see [`Panel::value`].
    pub fn ret(&self, d: usize, i: usize) -> Option<R> {
        let k = self.row_index(d, i)?;
        self.returns[k]
    }

    /// Replay cell regardless of build features. The expression language
    /// only sees this column behind the `replay-column` feature.
    pub fn replay_value(&self, d: usize, i: usize) -> Option<R> {
        let k = self.row_index(d, i)?;
        self.rows[k].replay
    }
}

/// Checks row-level invariants. `lines`, when given, must parallel `rows`.
fn validate_rows<R: Scalar>(rows: &[PanelRow<R>], lines: Option<&[u64]>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: BTreeSet<(&str, NaiveDate)> = BTreeSet::new();

    for (k, row) in rows.iter().enumerate() {
        let mut err = |rule: String| {
            report.errors.push(Issue {
                line: lines.map(|l| l[k]),
                instrument: Some(row.instrument.clone()),
                date: Some(row.date),
                rule,
            })
        };

        if !seen.insert((row.instrument.as_str(), row.date)) {
            err("duplicate (instrument, date) row".into());
        }
        let fields = [
            ("basis", row.basis),
            ("spot", row.spot),
            ("premium", row.premium),
            ("open", row.open),
            ("high", row.high),
            ("low", row.low),
            ("close", row.close),
            ("volume", row.volume),
            ("amount", row.amount),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                err(format!("non-finite {name}"));
            }
        }
        if let Some(v) = row.replay {
            if !v.is_finite() {
                err("non-finite replay".into());
            }
        }
        if row.close <= R::zero() {
            err("close must be positive".into());
        }
        if row.spot <= R::zero() {
            err("spot must be positive".into());
        }
        if row.volume < R::zero() {
            err("volume must be non-negative".into());
        }
        if row.amount < R::zero() {
            err("amount must be non-negative".into());
        }
        if row.high < row.open.max(row.close) {
            err("high below max(open, close)".into());
        }
        if row.low > row.open.min(row.close) {
            err("low above min(open, close)".into());
        }
    }
    report
}

/// Adds coverage warnings: calendar holes inside an instrument's traded
/// range, and instruments too short to have any return.
fn warn_coverage<R: Scalar>(
    rows: &[PanelRow<R>],
    instruments: &[String],
    calendar: &[NaiveDate],
    report: &mut ValidationReport,
) {
    for id in instruments {
        let dates: Vec<NaiveDate> = rows
            .iter()
            .filter(|r| &r.instrument == id)
            .map(|r| r.date)
            .collect();
        if dates.len() < 2 {
            report.warnings.push(Issue {
                line: None,
                instrument: Some(id.clone()),
                date: None,
                rule: "fewer than two observations; returns undefined".into(),
            });
            continue;
        }
        let first = calendar.binary_search(&dates[0]).expect("known");
        let last = calendar
            .binary_search(dates.last().expect("non-empty"))
            .expect("known");
        let holes = (last - first + 1) - dates.len();
        if holes > 0 {
            report.warnings.push(Issue {
                line: None,
                instrument: Some(id.clone()),
                date: None,
                rule: format!("{holes} missing date(s) inside traded range"),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn row(id: &str, date: &str, close: f64) -> PanelRow<f64> {
        PanelRow {
            instrument: id.into(),
            date: d(date),
            basis: 1.0,
            spot: close + 1.0,
            premium: -1.0,
            open: close,
            high: close * 1.01,
            low: close * 0.99,
            close,
            volume: 100.0,
            amount: 100.0 * close,
            replay: None,
        }
    }

    #[test]
    fn returns_follow_each_instruments_own_dates() {
        let rows = vec![
            row("A", "2021-01-01", 100.0),
            row("A", "2021-01-02", 110.0),
            row("A", "2021-01-04", 99.0),
            row("B", "2021-01-02", 50.0),
            row("B", "2021-01-04", 55.0),
        ];
        let (p, _) = Panel::from_rows(rows).unwrap();
        assert_eq!(p.n_dates(), 3);
        assert_eq!(p.n_instruments(), 2);

        let a = p.instrument_index("A").unwrap();
        let b = p.instrument_index("B").unwrap();
        assert_eq!(p.ret(0, a), None);
        assert!((p.ret(1, a).unwrap() - 0.10).abs() < 1e-12);
        // A skipped 2021-01-03 entirely; the return bridges to the prior
        // traded date, not the prior calendar date.
        assert!((p.ret(2, a).unwrap() - (99.0 / 110.0 - 1.0)).abs() < 1e-12);
        assert_eq!(p.ret(0, b), None);
        assert_eq!(p.ret(1, b), None);
        assert!((p.ret(2, b).unwrap() - 0.10).abs() < 1e-12);
    }

    #[test]
    fn close_recovers_from_returns() {
        let rows = vec![
            row("A", "2021-01-01", 100.0),
            row("A", "2021-01-02", 103.7),
            row("A", "2021-01-03", 91.25),
        ];
        let (p, _) = Panel::from_rows(rows).unwrap();
        let a = 0;
        let mut prev = p.value(Column::Close, 0, a).unwrap();
        for t in 1..3 {
            let r = p.ret(t, a).unwrap();
            let close = p.value(Column::Close, t, a).unwrap();
            assert!((close - prev * (1.0 + r)).abs() / close < 1e-12);
            prev = close;
        }
    }

    #[test]
    fn invariant_violations_are_collected_not_panicked() {
        let mut bad = row("A", "2021-01-01", 100.0);
        bad.high = 90.0; // below close
        let mut bad2 = row("A", "2021-01-02", -5.0); // close <= 0, and high/low consistency breaks too
        bad2.high = 0.0;
        bad2.low = -6.0;
        let err = Panel::from_rows(vec![bad, bad2]).unwrap_err();
        match err {
            PanelError::Invalid(report) => {
                assert!(report.errors.iter().any(|e| e.rule.contains("high below")));
                assert!(report
                    .errors
                    .iter()
                    .any(|e| e.rule.contains("close must be positive")));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_rows_error() {
        let err =
            Panel::from_rows(vec![row("A", "2021-01-01", 1.0), row("A", "2021-01-01", 2.0)])
                .unwrap_err();
        match err {
            PanelError::Invalid(report) => {
                assert_eq!(report.errors.len(), 1);
                assert!(report.errors[0].rule.contains("duplicate"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            row("A", "2021-01-01", 100.0),
            row("A", "2021-01-02", 100.1234567890123),
            row("B", "2021-01-01", 0.0375),
        ];
        let (p, _) = Panel::<f64>::from_rows(rows).unwrap();
        let text = p.to_csv_string();
        let (q, _) = Panel::<f64>::load_csv(text.as_bytes(), &SchemaMap::default()).unwrap();
        assert_eq!(p, q);
        assert_eq!(text, q.to_csv_string());
    }

    #[test]
    fn schema_mapping_renames_headers() {
        let csv = "\
sym,day,b,s,p,o,h,l,c,v,a
X,2021-01-05,0,10,0,9,11,8,10,5,50
";
        let mut schema = SchemaMap::default();
        for (field, header) in [
            ("instrument", "sym"),
            ("date", "day"),
            ("basis", "b"),
            ("spot", "s"),
            ("premium", "p"),
            ("open", "o"),
            ("high", "h"),
            ("low", "l"),
            ("close", "c"),
            ("volume", "v"),
            ("amount", "a"),
        ] {
            schema.set(field, header).unwrap();
        }
        let (p, _) = Panel::<f64>::load_csv(csv.as_bytes(), &schema).unwrap();
        assert_eq!(p.rows().len(), 1);
        assert_eq!(p.rows()[0].close, 10.0);
    }

    #[test]
    fn missing_column_is_a_hard_error() {
        let csv = "instrument,date,open\nA,2021-01-01,1\n";
        let err = Panel::<f64>::load_csv(csv.as_bytes(), &SchemaMap::default()).unwrap_err();
        match err {
            PanelError::MissingColumn { column } => assert_eq!(column, "basis"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_cell_reports_line_number() {
        let csv = "\
instrument,date,basis,spot,premium,open,high,low,close,volume,amount
A,2021-01-01,0,10,0,9,11,8,10,5,50
A,2021-01-02,0,10,0,9,11,8,oops,5,50
";
        let err = Panel::<f64>::load_csv(csv.as_bytes(), &SchemaMap::default()).unwrap_err();
        match err {
            PanelError::Invalid(report) => {
                assert_eq!(report.errors.len(), 1);
                assert_eq!(report.errors[0].line, Some(3));
                assert!(report.errors[0].rule.contains("close"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn slice_recomputes_returns_and_empty_slice_is_explicit() {
        let rows = vec![
            row("A", "2021-01-01", 100.0),
            row("A", "2021-01-02", 110.0),
            row("A", "2021-01-03", 121.0),
        ];
        let (p, _) = Panel::from_rows(rows).unwrap();
        let s = p.slice(d("2021-01-02"), d("2021-01-03"));
        assert_eq!(s.n_dates(), 2);
        assert_eq!(s.ret(0, 0), None); // first date inside the window
        assert!((s.ret(1, 0).unwrap() - 0.10).abs() < 1e-12);

        let empty = p.slice(d("2022-01-01"), d("2022-12-31"));
        assert!(empty.is_empty());
        assert_eq!(empty.n_dates(), 0);
        assert_eq!(empty.n_instruments(), 0);
    }

    #[test]
    fn coverage_warnings_fire() {
        let rows = vec![
            row("A", "2021-01-01", 100.0),
            row("A", "2021-01-02", 101.0),
            row("A", "2021-01-04", 99.0),
            row("B", "2021-01-01", 50.0),
            row("B", "2021-01-04", 51.0),
            row("C", "2021-01-02", 10.0),
        ];
        let (_, report) = Panel::from_rows(rows).unwrap();
        // B skips 2021-01-02, a calendar date inside its range; C has a
        // single row.
        assert!(report
            .warnings
            .iter()
            .any(|w| w.instrument.as_deref() == Some("B") && w.rule.contains("missing date")));
        assert!(report
            .warnings
            .iter()
            .any(|w| w.instrument.as_deref() == Some("C") && w.rule.contains("fewer than two")));
    }
}
