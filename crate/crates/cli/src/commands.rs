//! The seven verbs. Each one is a thin shell: load inputs, call the
//! library, serialize the results. Anything beyond plumbing lives in
//! `basislab-core` so the numbers here are exactly the library's numbers.

use std::fs;
use std::path::PathBuf;

use chrono::NaiveDate;

use basislab_core::dsl::{evaluate, FactorSpec};
use basislab_core::factors::{builtin_catalog, catalog_to_text, load_catalog};
use basislab_core::ipca::{
    alpha_regression, build_instruments, fit_ipca, oos_factor_returns, AlphaReport, IpcaDataset,
};
use basislab_core::metrics::{ic_series, Annualization, PerformanceSummary};
use basislab_core::panel::{Panel, PanelError, SchemaMap, ValidationReport};
use basislab_core::portfolio::{
    backtest_multi, backtest_single, BacktestResult, PolarityChoice, TradeMode,
};
use basislab_core::synth::{generate_panel, SynthConfig};

use crate::config::{parse_pairs, RunConfig};
use crate::render;

/// Failures split by exit code: domain problems (bad data, bad factor,
/// insufficient observations) exit 1, environment problems (unreadable or
/// unwritable files) exit 2.
#[derive(Debug)]
pub enum CliError {
    Domain(String),
    Env(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Env(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Domain(m) | CliError::Env(m) => m,
        }
    }
}

/// Everything a verb produces: files to write atomically, text for
/// stdout, and the exit status when the run itself succeeded.
#[derive(Debug, Default)]
pub struct VerbOutput {
    pub files: Vec<(PathBuf, String)>,
    pub stdout: String,
    pub status: i32,
}

fn read_file(path: &std::path::Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Env(format!("{}: {e}", path.display())))
}

fn load_schema(config: &RunConfig) -> Result<SchemaMap, CliError> {
    let mut schema = SchemaMap::default();
    if let Some(path) = &config.schema {
        let text = read_file(path)?;
        let pairs = parse_pairs(&text)
            .map_err(|e| CliError::Domain(format!("schema {}: {e}", path.display())))?;
        for (field, header) in pairs {
            schema
                .set(&field, &header)
                .map_err(|e| CliError::Domain(format!("schema {}: {e}", path.display())))?;
        }
    }
    Ok(schema)
}

fn load_panel(config: &RunConfig) -> Result<(Panel<f64>, ValidationReport), CliError> {
    let path = config
        .data
        .as_ref()
        .ok_or_else(|| CliError::Domain("no data file configured (use --data)".to_string()))?;
    let schema = load_schema(config)?;
    let text = read_file(path)?;
    Panel::load_csv(text.as_bytes(), &schema)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

/// Loads the panel and refuses to run on one that fails validation.
fn load_clean_panel(config: &RunConfig) -> Result<Panel<f64>, CliError> {
    let (panel, report) = load_panel(config)?;
    if !report.is_clean() {
        return Err(CliError::Domain(format!("data failed validation:\n{report}")));
    }
    Ok(panel)
}

fn load_specs(config: &RunConfig) -> Result<Vec<FactorSpec<f64>>, CliError> {
    let entries = match config.catalog.as_deref() {
        None | Some("builtin") => builtin_catalog::<f64>(),
        Some(path) => {
            let text = read_file(std::path::Path::new(path))?;
            load_catalog::<f64, _>(text.as_bytes())
                .map_err(|e| CliError::Domain(format!("catalog {path}: {e}")))?
        }
    };
    if entries.is_empty() {
        return Err(CliError::Domain("no factors".to_string()));
    }
    Ok(entries.into_iter().map(|e| e.spec).collect())
}

/// Restricts the panel to the configured backtest range, full range when
/// unset. Rolling warm-up happens inside the restriction.
fn backtest_slice(panel: &Panel<f64>, config: &RunConfig) -> Result<Panel<f64>, CliError> {
    let calendar = panel.calendar();
    if calendar.is_empty() {
        return Err(CliError::Domain("panel has no dates".to_string()));
    }
    let start = config.backtest_start.unwrap_or(calendar[0]);
    let end = config.backtest_end.unwrap_or(*calendar.last().unwrap());
    let sliced = panel.slice(start, end);
    if sliced.n_dates() < 2 {
        return Err(CliError::Domain(format!(
            "backtest range {start}..{end} covers fewer than two panel dates"
        )));
    }
    Ok(sliced)
}

fn summaries(
    result: &BacktestResult<f64>,
) -> Result<(PerformanceSummary<f64>, PerformanceSummary<f64>), CliError> {
    let raw = result
        .summary(false, Annualization::Geometric)
        .map_err(|e| CliError::Domain(format!("{}: {e}", result.descriptor.name)))?;
    let fee = result
        .summary(true, Annualization::Geometric)
        .map_err(|e| CliError::Domain(format!("{}: {e}", result.descriptor.name)))?;
    Ok((raw, fee))
}

// ----------------------------------------------------------------- verbs --

pub fn cmd_validate(config: &RunConfig) -> Result<VerbOutput, CliError> {
    let path = config
        .data
        .as_ref()
        .ok_or_else(|| CliError::Domain("no data file configured (use --data)".to_string()))?;
    let schema = load_schema(config)?;
    let text = read_file(path)?;
    // A file that fails validation is still this verb's subject, not an
    // abort: report it in full and signal through the exit status.
    let report = match Panel::<f64>::load_csv(text.as_bytes(), &schema) {
        Ok((_, report)) => report,
        Err(PanelError::Invalid(report)) => report,
        Err(e) => return Err(CliError::Domain(format!("{}: {e}", path.display()))),
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Env(format!("serializing report: {e}")))?;
    Ok(VerbOutput {
        files: vec![],
        stdout: format!("{report}{json}\n"),
        status: if report.is_clean() { 0 } else { 1 },
    })
}

pub fn cmd_synth(config: &RunConfig) -> Result<VerbOutput, CliError> {
    let synth = SynthConfig::<f64> {
        seed: config.seed,
        n_instruments: config.n_instruments,
        n_days: config.n_days,
        vol: config.vol,
        drift: config.drift,
        basis_vol: config.basis_vol,
        volume_scale: config.volume_scale,
        replay_strength: config.replay_strength,
    };
    synth.validate().map_err(CliError::Domain)?;
    let panel = generate_panel(&synth);
    let path = config.out.join("panel.csv");
    Ok(VerbOutput {
        stdout: format!(
            "wrote {} ({} instruments x {} days, seed {})\n",
            path.display(),
            panel.n_instruments(),
            panel.n_dates(),
            config.seed
        ),
        files: vec![(path, panel.to_csv_string())],
        status: 0,
    })
}

pub fn cmd_dump_builtins(_config: &RunConfig) -> Result<VerbOutput, CliError> {
    Ok(VerbOutput {
        files: vec![],
        stdout: catalog_to_text(&builtin_catalog::<f64>()),
        status: 0,
    })
}

pub fn cmd_ic(config: &RunConfig) -> Result<VerbOutput, CliError> {
    let panel = load_clean_panel(config)?;
    let panel = backtest_slice(&panel, config)?;
    let specs = load_specs(config)?;
    let rows: Vec<_> = specs
        .iter()
        .map(|s| (s.name.clone(), ic_series(&evaluate(s, &panel), &panel)))
        .collect();
    let path = config.out.join("ic_summary.csv");
    Ok(VerbOutput {
        stdout: format!("wrote {} ({} factors)\n", path.display(), rows.len()),
        files: vec![(path, render::ic_table(&rows))],
        status: 0,
    })
}

pub fn cmd_backtest(config: &RunConfig) -> Result<VerbOutput, CliError> {
    let panel = load_clean_panel(config)?;
    let panel = backtest_slice(&panel, config)?;
    let specs = load_specs(config)?;

    let mut summary_rows = Vec::new();
    let mut files = Vec::new();
    let mut stdout = String::new();
    let first_date = panel.calendar()[0];
    for s in &specs {
        let result = backtest_single(s, &panel, config.mode, config.fee_rate, config.fraction)
            .map_err(|e| CliError::Domain(e.to_string()))?;
        let (raw, fee) = summaries(&result)?;
        summary_rows.push((s.name.clone(), raw, fee));
        files.push((
            config.out.join(format!("returns_{}.csv", s.name)),
            render::returns_table(&result),
        ));
        files.push((
            config.out.join(format!("wealth_{}.csv", s.name)),
            render::wealth_table(&result, first_date),
        ));
        if result.blown_up || result.fee_blown_up {
            stdout.push_str(&format!("note: {} wiped out; series truncated\n", s.name));
        }
    }
    let summary_path = config.out.join("backtest_summary.csv");
    stdout.push_str(&format!(
        "wrote {} ({} factors)\n",
        summary_path.display(),
        summary_rows.len()
    ));
    files.insert(0, (summary_path, render::summary_table("factor", &summary_rows)));
    Ok(VerbOutput { files, stdout, status: 0 })
}

pub fn cmd_multi(config: &RunConfig) -> Result<VerbOutput, CliError> {
    let panel = load_clean_panel(config)?;
    let panel = backtest_slice(&panel, config)?;
    let specs = load_specs(config)?;

    let calendar = panel.calendar();
    let train_start = config.train_start.unwrap_or(calendar[0]);
    let train_end = config.train_end.unwrap_or(*calendar.last().unwrap());

    let strategies = [
        ("static", PolarityChoice::Static { train_start, train_end }),
        ("dynamic_long_short_base", PolarityChoice::Dynamic { base: TradeMode::LongShort }),
        ("dynamic_long_only_base", PolarityChoice::Dynamic { base: TradeMode::LongOnly }),
    ];

    let mut rows = Vec::new();
    let mut stdout = String::new();
    for (label, choice) in &strategies {
        for mode in [TradeMode::LongShort, TradeMode::LongOnly] {
            let run = backtest_multi(
                &specs,
                &panel,
                choice.clone(),
                mode,
                config.fee_rate,
                config.fraction,
            )
            .map_err(|e| CliError::Domain(e.to_string()))?;
            let (raw, fee) = summaries(&run.result)?;
            rows.push((label.to_string(), mode.name().to_string(), raw, fee));
            for warning in &run.warnings {
                stdout.push_str(&format!("warning: {label}/{}: {warning}\n", mode.name()));
            }
        }
    }
    let path = config.out.join("multi_summary.csv");
    stdout.push_str(&format!("wrote {}\n", path.display()));
    Ok(VerbOutput {
        files: vec![(path, render::multi_table(&rows))],
        stdout,
        status: 0,
    })
}

/// Keeps only the date blocks whose decision date falls in the window.
fn restrict_blocks(
    data: &IpcaDataset<f64>,
    start: NaiveDate,
    end: NaiveDate,
) -> IpcaDataset<f64> {
    IpcaDataset {
        characteristics: data.characteristics.clone(),
        blocks: data
            .blocks
            .iter()
            .filter(|b| b.decision_date >= start && b.decision_date <= end)
            .cloned()
            .collect(),
    }
}

pub fn cmd_ipca(config: &RunConfig) -> Result<VerbOutput, CliError> {
    let panel = load_clean_panel(config)?;
    let specs = load_specs(config)?;

    let calendar = panel.calendar();
    if calendar.is_empty() {
        return Err(CliError::Domain("panel has no dates".to_string()));
    }
    let train_start = config.train_start.unwrap_or(calendar[0]);
    let train_end = config.train_end.unwrap_or(*calendar.last().unwrap());
    let backtest_start = config.backtest_start.unwrap_or(calendar[0]);
    let backtest_end = config.backtest_end.unwrap_or(*calendar.last().unwrap());

    // Factor portfolios to price, keyed like the benchmark by the date the
    // return lands. Raw returns: fees are a property of execution, not of
    // the pricing regression.
    let sliced = backtest_slice(&panel, config)?;
    let mut portfolios: Vec<(String, Vec<(NaiveDate, f64)>, Vec<(NaiveDate, f64)>)> = Vec::new();
    for s in &specs {
        let mut by_mode = Vec::new();
        for mode in [TradeMode::LongShort, TradeMode::LongOnly] {
            let bt = backtest_single(s, &sliced, mode, 0.0, config.fraction)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            by_mode.push(
                bt.dates
                    .iter()
                    .copied()
                    .zip(bt.returns.iter().copied())
                    .collect::<Vec<_>>(),
            );
        }
        let long_only = by_mode.pop().unwrap();
        let long_short = by_mode.pop().unwrap();
        portfolios.push((s.name.clone(), long_short, long_only));
    }

    let mut files = Vec::new();
    let mut stdout = String::new();
    let (k_lo, k_hi) = config.ipca_k;
    for k in k_lo..=k_hi {
        let (dataset, build_warnings) =
            build_instruments(&panel, &config.ipca_characteristics, k);
        for warning in &build_warnings {
            stdout.push_str(&format!("warning: K={k}: {warning}\n"));
        }
        let train = restrict_blocks(&dataset, train_start, train_end);
        let model = fit_ipca(&train, k, config.ipca_tol, config.ipca_max_iter)
            .map_err(|e| CliError::Domain(format!("K={k}: {e}")))?;
        for warning in &model.warnings {
            stdout.push_str(&format!("warning: K={k}: {warning}\n"));
        }
        let (factor_returns, oos_warnings) =
            oos_factor_returns(&model, &dataset, backtest_start, backtest_end);
        for warning in &oos_warnings {
            stdout.push_str(&format!("warning: K={k}: {warning}\n"));
        }

        let mut rows: Vec<(String, AlphaReport<f64>, AlphaReport<f64>)> = Vec::new();
        for (name, long_short, long_only) in &portfolios {
            let ls = alpha_regression(long_short, &factor_returns, config.robust)
                .map_err(|e| CliError::Domain(format!("K={k}: {name}: {e}")))?;
            let lo = alpha_regression(long_only, &factor_returns, config.robust)
                .map_err(|e| CliError::Domain(format!("K={k}: {name}: {e}")))?;
            rows.push((name.clone(), ls, lo));
        }

        let model_json = serde_json::to_string_pretty(&model)
            .map_err(|e| CliError::Env(format!("serializing model: {e}")))?;
        let model_path = config.out.join(format!("ipca_model_K{k}.json"));
        let alpha_path = config.out.join(format!("ipca_alphas_K{k}.csv"));
        stdout.push_str(&format!(
            "K={k}: r_squared {} after {} sweeps; wrote {} and {}\n",
            render::fmt_metric(model.r_squared),
            model.iterations,
            model_path.display(),
            alpha_path.display(),
        ));
        files.push((model_path, model_json + "\n"));
        files.push((alpha_path, render::alpha_table(&rows)));
    }

    Ok(VerbOutput { files, stdout, status: 0 })
}
