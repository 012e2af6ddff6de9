//! End-to-end checks against the compiled binary: determinism of the full
//! pipeline, exact table layouts, exit codes, and direct comparisons
//! proving every verb is a thin shell over the library.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chrono::NaiveDate;

use basislab_cli::render;
use basislab_core::dsl::{evaluate, parse_expression, FactorSpec};
use basislab_core::factors::{builtin_catalog, load_catalog};
use basislab_core::metrics::{ic_series, Annualization};
use basislab_core::panel::{Panel, PanelRow, SchemaMap};
use basislab_core::portfolio::{
    backtest_multi, backtest_single, static_polarity, PolarityChoice, Sign, TradeMode,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_basislab"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary must launch")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "basislab {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("readable dir")
        .map(|entry| {
            let entry = entry.unwrap();
            (
                entry.file_name().to_string_lossy().into_owned(),
                fs::read(entry.path()).unwrap(),
            )
        })
        .collect()
}

fn load_panel(dir: &Path) -> Panel<f64> {
    let text = read(dir, "panel.csv");
    Panel::<f64>::load_csv(text.as_bytes(), &SchemaMap::default())
        .expect("panel reloads")
        .0
}

const SUMMARY_COLUMNS: &str = "annualized_return,sharpe_ratio,max_drawdown,\
annualized_return_fee,sharpe_ratio_fee,max_drawdown_fee";

// ------------------------------------------------------------ gate 8 -----

#[test]
fn gate_8_pipeline_reruns_are_byte_identical() {
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        run_ok(d, &["synth", "--seed", "11", "--out", "."]);
        run_ok(d, &["validate", "--data", "panel.csv"]);
        run_ok(d, &["ic", "--data", "panel.csv", "--out", "."]);
        run_ok(d, &["backtest", "--data", "panel.csv", "--out", "."]);
        run_ok(d, &["multi", "--data", "panel.csv", "--out", "."]);
        run_ok(d, &["ipca", "--data", "panel.csv", "--out", "."]);
        snapshots.push(dir_contents(d));
    }
    let names: Vec<&String> = snapshots[0].keys().collect();
    assert!(names.len() >= 17, "expected the full report set, got {names:?}");
    assert_eq!(
        snapshots[0].keys().collect::<Vec<_>>(),
        snapshots[1].keys().collect::<Vec<_>>()
    );
    for (name, bytes) in &snapshots[0] {
        assert_eq!(bytes, &snapshots[1][name], "{name} differs between reruns");
    }

    // Exact layouts from the builtin catalog.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["synth", "--seed", "11", "--out", "."]);
    run_ok(d, &["ic", "--data", "panel.csv", "--out", "."]);
    run_ok(d, &["backtest", "--data", "panel.csv", "--out", "."]);
    run_ok(d, &["multi", "--data", "panel.csv", "--out", "."]);
    run_ok(d, &["ipca", "--data", "panel.csv", "--out", "."]);

    let summary: Vec<String> = read(d, "backtest_summary.csv").lines().map(String::from).collect();
    assert_eq!(summary[0], format!("factor,{SUMMARY_COLUMNS}"));
    let factors: Vec<&str> = summary[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(factors, ["IMVSI", "ALOWS", "MRSI", "FSI", "MMLI", "FMAT"]);

    let multi: Vec<String> = read(d, "multi_summary.csv").lines().map(String::from).collect();
    assert_eq!(multi[0], format!("strategy,mode,{SUMMARY_COLUMNS}"));
    let grid: Vec<(&str, &str)> = multi[1..]
        .iter()
        .map(|l| {
            let mut cells = l.split(',');
            (cells.next().unwrap(), cells.next().unwrap())
        })
        .collect();
    assert_eq!(
        grid,
        [
            ("static", "long_short"),
            ("static", "long_only"),
            ("dynamic_long_short_base", "long_short"),
            ("dynamic_long_short_base", "long_only"),
            ("dynamic_long_only_base", "long_short"),
            ("dynamic_long_only_base", "long_only"),
        ]
    );

    let ic: Vec<String> = read(d, "ic_summary.csv").lines().map(String::from).collect();
    assert_eq!(ic[0], "factor,ic_mean,ir");
    assert_eq!(ic.len(), 7);

    let alphas: Vec<String> = read(d, "ipca_alphas_K2.csv").lines().map(String::from).collect();
    assert_eq!(alphas[0], "factor,alpha_long_short,alpha_long_only");
    assert_eq!(alphas.len(), 7);

    println!("[gate 8] two pipeline runs byte-identical; builtin layouts exact: PASS");
}

// -------------------------------------------------------------- verbs ----

#[test]
fn validate_reports_clean_dirty_and_missing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["synth", "--seed", "3", "--out", "."]);

    let clean = run_in(d, &["validate", "--data", "panel.csv"]);
    assert_eq!(clean.status.code(), Some(0));
    let text = String::from_utf8(clean.stdout).unwrap();
    assert!(text.contains("0 error(s)"), "{text}");
    assert!(text.contains("\"errors\": []"), "report must also appear as JSON");

    // Break one row: a negative close fails validation and is named.
    let panel = read(d, "panel.csv");
    let mut lines: Vec<String> = panel.lines().map(String::from).collect();
    let close_col = lines[0].split(',').position(|h| h == "close").unwrap();
    let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
    cells[close_col] = "-1".to_string();
    lines[1] = cells.join(",");
    fs::write(d.join("dirty.csv"), lines.join("\n") + "\n").unwrap();
    let dirty = run_in(d, &["validate", "--data", "dirty.csv"]);
    assert_eq!(dirty.status.code(), Some(1));
    let text = String::from_utf8(dirty.stdout).unwrap();
    assert!(text.contains("line 2"), "report must name the offending row: {text}");

    let missing = run_in(d, &["validate", "--data", "no_such_file.csv"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bad_usage_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_is_a_thin_shell_and_flags_beat_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.conf"), "seed = 1\nn_instruments = 7\nn_days = 9\n").unwrap();
    run_ok(d, &["synth", "--config", "run.conf", "--seed", "9", "--out", "."]);

    let expected = basislab_core::synth::SynthConfig::<f64>::new(9, 7, 9);
    let library = basislab_core::synth::generate_panel(&expected).to_csv_string();
    assert_eq!(read(d, "panel.csv"), library, "binary output must equal the library's");
}

#[test]
fn backtest_zero_fee_twin_and_thin_shell() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["synth", "--seed", "21", "--out", "."]);
    fs::write(d.join("run.conf"), "fee_rate = 0\n").unwrap();
    run_ok(d, &["backtest", "--data", "panel.csv", "--config", "run.conf", "--out", "."]);

    // Zero fee: the fee-adjusted triple equals the raw triple, cell by cell.
    for line in read(d, "backtest_summary.csv").lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(&cells[1..4], &cells[4..7], "fee columns differ on {line}");
    }

    // Direct comparison with the library and the shared renderers.
    let panel = load_panel(d);
    let mut rows = Vec::new();
    for entry in builtin_catalog::<f64>() {
        let bt = backtest_single(&entry.spec, &panel, TradeMode::LongShort, 0.0, 0.1).unwrap();
        let raw = bt.summary(false, Annualization::Geometric).unwrap();
        let fee = bt.summary(true, Annualization::Geometric).unwrap();
        if entry.name() == "IMVSI" {
            assert_eq!(read(d, "returns_IMVSI.csv"), render::returns_table(&bt));
            assert_eq!(
                read(d, "wealth_IMVSI.csv"),
                render::wealth_table(&bt, panel.calendar()[0])
            );
        }
        rows.push((entry.name().to_string(), raw, fee));
    }
    assert_eq!(read(d, "backtest_summary.csv"), render::summary_table("factor", &rows));
}

#[test]
fn multi_is_a_thin_shell_over_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["synth", "--seed", "31", "--out", "."]);
    fs::write(
        d.join("factors.txt"),
        "m1 = czs(close)\nm2 = crank(volume)\nm3 = diff(close) / lag(close, 1)\n",
    )
    .unwrap();
    run_ok(
        d,
        &["multi", "--data", "panel.csv", "--catalog", "factors.txt", "--out", "."],
    );

    let panel = load_panel(d);
    let specs: Vec<FactorSpec<f64>> = load_catalog(read(d, "factors.txt").as_bytes())
        .unwrap()
        .into_iter()
        .map(|e| e.spec)
        .collect();
    let train_start = panel.calendar()[0];
    let train_end = *panel.calendar().last().unwrap();
    let mut rows = Vec::new();
    let strategies = [
        ("static", PolarityChoice::Static { train_start, train_end }),
        ("dynamic_long_short_base", PolarityChoice::Dynamic { base: TradeMode::LongShort }),
        ("dynamic_long_only_base", PolarityChoice::Dynamic { base: TradeMode::LongOnly }),
    ];
    for (label, choice) in &strategies {
        for mode in [TradeMode::LongShort, TradeMode::LongOnly] {
            let run = backtest_multi(&specs, &panel, choice.clone(), mode, 0.00025, 0.1).unwrap();
            rows.push((
                label.to_string(),
                mode.name().to_string(),
                run.result.summary(false, Annualization::Geometric).unwrap(),
                run.result.summary(true, Annualization::Geometric).unwrap(),
            ));
        }
    }
    assert_eq!(read(d, "multi_summary.csv"), render::multi_table(&rows));
}

#[test]
fn multi_single_factor_static_rows_match_backtest_with_the_trained_sign() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["synth", "--seed", "5", "--out", "."]);
    fs::write(d.join("one.txt"), "m = czs(close)\n").unwrap();
    fs::write(d.join("both.txt"), "m = czs(close)\nmneg = 0 - czs(close)\n").unwrap();
    run_ok(d, &["multi", "--data", "panel.csv", "--catalog", "one.txt", "--out", "."]);
    run_ok(d, &["backtest", "--data", "panel.csv", "--catalog", "both.txt", "--out", "."]);

    let panel = load_panel(d);
    let spec = FactorSpec::new("m", parse_expression::<f64>("czs(close)").unwrap());
    let (sign, _) = static_polarity(
        &spec,
        &panel,
        panel.calendar()[0],
        *panel.calendar().last().unwrap(),
        0.1,
    );
    let trained = if sign == Sign::Pos { "m" } else { "mneg" };

    let backtest = read(d, "backtest_summary.csv");
    let expected_cells: Vec<String> = backtest
        .lines()
        .find(|l| l.starts_with(&format!("{trained},")))
        .expect("trained factor row")
        .split(',')
        .skip(1)
        .map(String::from)
        .collect();
    let multi = read(d, "multi_summary.csv");
    let static_cells: Vec<String> = multi
        .lines()
        .find(|l| l.starts_with("static,long_short,"))
        .expect("static long-short row")
        .split(',')
        .skip(2)
        .map(String::from)
        .collect();
    assert_eq!(static_cells, expected_cells);
}

#[test]
fn never_negative_fixture_makes_all_strategies_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rows = Vec::new();
    for i in 0..8 {
        let growth = 0.01 + 0.01 * i as f64;
        let mut close = 10.0 + 10.0 * i as f64;
        for day in 1..=10u32 {
            rows.push(PanelRow::<f64> {
                instrument: format!("g{i}"),
                date: NaiveDate::from_ymd_opt(2021, 3, day).unwrap(),
                basis: 0.0,
                spot: close,
                premium: 0.0,
                open: close,
                high: close * 1.5,
                low: close * 0.5,
                close,
                volume: 10.0,
                amount: 10.0 * close,
                replay: None,
            });
            close *= 1.0 + growth;
        }
    }
    let panel = Panel::from_rows(rows).unwrap().0;
    fs::write(d.join("panel.csv"), panel.to_csv_string()).unwrap();
    fs::write(d.join("one.txt"), "m = czs(close)\n").unwrap();
    run_ok(d, &["multi", "--data", "panel.csv", "--catalog", "one.txt", "--out", "."]);

    let multi = read(d, "multi_summary.csv");
    let mut by_mode: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for line in multi.lines().skip(1) {
        let (_, rest) = line.split_once(',').unwrap();
        let (mode, metrics) = rest.split_once(',').unwrap();
        by_mode.entry(mode).or_default().push(metrics);
    }
    for (mode, rows) in by_mode {
        assert_eq!(rows.len(), 3);
        assert!(
            rows.iter().all(|r| *r == rows[0]),
            "{mode} rows diverge on a book that never loses: {rows:?}"
        );
    }
}

#[test]
fn ipca_k_range_writes_one_monotone_model_per_k() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["synth", "--seed", "13", "--out", "."]);
    fs::write(
        d.join("run.conf"),
        "ipca_k = 1..5\nipca_characteristics = close,volume,basis,amount,high\n",
    )
    .unwrap();
    run_ok(
        d,
        &["ipca", "--data", "panel.csv", "--config", "run.conf", "--out", "."],
    );

    let mut previous = f64::NEG_INFINITY;
    for k in 1..=5usize {
        let model: serde_json::Value =
            serde_json::from_str(&read(d, &format!("ipca_model_K{k}.json"))).unwrap();
        assert_eq!(model["k"].as_u64(), Some(k as u64));
        assert_eq!(model["gamma"]["cols"].as_u64(), Some(k as u64));
        assert_eq!(model["gamma"]["rows"].as_u64(), Some(5));
        let r2 = model["r_squared"].as_f64().unwrap();
        assert!(
            r2 >= previous - 1e-12,
            "K={k} explained less than K={}: {r2} < {previous}",
            k - 1
        );
        previous = r2;
        assert!(d.join(format!("ipca_alphas_K{k}.csv")).exists());
    }
}

#[test]
fn ic_is_a_thin_shell_and_rejects_an_empty_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["synth", "--seed", "17", "--out", "."]);
    run_ok(d, &["ic", "--data", "panel.csv", "--out", "."]);

    let panel = load_panel(d);
    let rows: Vec<_> = builtin_catalog::<f64>()
        .into_iter()
        .map(|e| {
            let series = evaluate(&e.spec, &panel);
            (e.name().to_string(), ic_series(&series, &panel))
        })
        .collect();
    assert_eq!(read(d, "ic_summary.csv"), render::ic_table(&rows));

    fs::write(d.join("empty.txt"), "# nothing here\n").unwrap();
    let out = run_in(d, &["ic", "--data", "panel.csv", "--catalog", "empty.txt", "--out", "."]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no factors"));
}

#[test]
fn perfect_replay_scores_unit_ic_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.conf"), "replay_strength = 1.0\nn_instruments = 10\nn_days = 25\n")
        .unwrap();
    run_ok(d, &["synth", "--seed", "23", "--config", "run.conf", "--out", "."]);
    fs::write(d.join("replay.txt"), "oracle = replay\n").unwrap();
    run_ok(d, &["ic", "--data", "panel.csv", "--catalog", "replay.txt", "--out", "."]);

    let ic = read(d, "ic_summary.csv");
    let row = ic.lines().nth(1).expect("one factor row");
    assert_eq!(row, "oracle,1.00000,");
}

#[test]
fn dump_builtins_round_trips_through_the_loader() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(dir.path(), &["dump-builtins"]);
    let entries = load_catalog::<f64, _>(text.as_bytes()).expect("dump must reload");
    let names: Vec<&str> = entries.iter().map(|e| e.name()).collect();
    assert_eq!(names, ["IMVSI", "ALOWS", "MRSI", "FSI", "MMLI", "FMAT"]);
}
