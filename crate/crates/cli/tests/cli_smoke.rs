//! Command-level behavior over the shipped fixtures.

use std::path::PathBuf;
use std::process::Command;

use ivw_cli::commands::{
    cmd_benchmark, cmd_consistency, cmd_discover, cmd_estimate, cmd_generate, cmd_granger,
    BenchmarkArgs, BenchmarkMode, ConsistencyArgs, DiscoverArgs, EstimateArgs, GenerateArgs,
    GrangerArgs, ProviderOverrides, ProviderKindArg,
};

fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

fn golden_overrides() -> ProviderOverrides {
    ProviderOverrides {
        provider: Some(ProviderKindArg::Script),
        script: Some(fixture("fixtures/golden/script.json")),
        transcript: None,
        record: None,
    }
}

#[test]
fn discover_smoke_writes_three_kinds_of_output() {
    let out = tempfile::tempdir().unwrap();
    let args = DiscoverArgs {
        data: fixture("fixtures/golden/panel.csv"),
        config: Some(fixture("fixtures/golden/config.toml")),
        out: out.path().to_path_buf(),
        seed: None,
        provider: golden_overrides(),
    };
    let output = cmd_discover(&args, Some(1_700_000_000)).unwrap();
    assert!(output.report_path.is_file());
    assert!(output.summary_path.is_file());
    assert_eq!(output.sample_paths.len(), 1);
    let samples = std::fs::read_to_string(&output.sample_paths[0]).unwrap();
    let llm_rows = samples.lines().filter(|l| l.starts_with("0\t")).count();
    let random_rows = samples.lines().filter(|l| l.starts_with("1\t")).count();
    assert_eq!(llm_rows, 2, "one ATE sample per grounded instrument");
    assert_eq!(random_rows, 50, "two betas per random baseline draw");

    // the emitted report embeds its manifest with input digests
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&output.report_path).unwrap()).unwrap();
    assert_eq!(report["manifest"]["command"], "discover");
    assert!(report["manifest"]["input_digests"].as_object().unwrap().len() >= 2);
    assert_eq!(report["report"]["pairs"].as_array().unwrap().len(), 1);
}

#[test]
fn discover_is_byte_deterministic_under_a_fixed_epoch() {
    let run = |dir: &std::path::Path| {
        let args = DiscoverArgs {
            data: fixture("fixtures/golden/panel.csv"),
            config: Some(fixture("fixtures/golden/config.toml")),
            out: dir.to_path_buf(),
            seed: None,
            provider: golden_overrides(),
        };
        cmd_discover(&args, Some(1_700_000_000)).unwrap()
    };
    let out1 = tempfile::tempdir().unwrap();
    let out2 = tempfile::tempdir().unwrap();
    let a = run(out1.path());
    let b = run(out2.path());
    assert_eq!(
        std::fs::read(&a.report_path).unwrap(),
        std::fs::read(&b.report_path).unwrap(),
        "reports must be byte-identical"
    );
    assert_eq!(
        std::fs::read(&a.summary_path).unwrap(),
        std::fs::read(&b.summary_path).unwrap()
    );
}

#[test]
fn estimate_matches_the_ratio_oracle_fixture() {
    let args = EstimateArgs {
        data: fixture("fixtures/ratio.csv"),
        config: None,
        treatment: "t".into(),
        outcome: "y".into(),
        instrument: "z".into(),
        covariates: vec![],
        standardize: false,
    };
    let est = cmd_estimate(&args).unwrap();
    assert!((est.beta - 2.0).abs() < 1e-10, "beta = {}", est.beta);
}

#[test]
fn estimate_rejects_constant_instrument() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("const.csv");
    let mut body = String::from("entity,year,variable,value\n");
    for i in 0..10 {
        body.push_str(&format!("e0,{i},z,1\n"));
        body.push_str(&format!("e0,{i},t,{}\n", i as f64));
        body.push_str(&format!("e0,{i},y,{}\n", 2.0 * i as f64));
    }
    std::fs::write(&path, body).unwrap();
    let args = EstimateArgs {
        data: path,
        config: None,
        treatment: "t".into(),
        outcome: "y".into(),
        instrument: "z".into(),
        covariates: vec![],
        standardize: false,
    };
    let err = cmd_estimate(&args).unwrap_err();
    assert!(err.to_string().contains("zero variance"), "{err:#}");
}

#[test]
fn consistency_command_reports_and_is_seeded() {
    let args = ConsistencyArgs {
        data: fixture("fixtures/golden/panel.csv"),
        config: None,
        treatment: "t".into(),
        outcome: "y".into(),
        instruments: vec!["z1".into(), "z2".into()],
        seed: Some(9),
        r: Some(11),
        null_pairs: Some(31),
        standardize: false,
    };
    let a = cmd_consistency(&args).unwrap();
    let b = cmd_consistency(&args).unwrap();
    assert_eq!(a.null_samples, b.null_samples, "same seed, same samples");
    assert_eq!(a.c_norm, b.c_norm);
    assert!((a.c_norm - a.delta_llm / a.delta_rand_summary).abs() < 1e-12);
    assert_eq!(a.null_samples.len(), 31);
}

#[test]
fn consistency_needs_two_instruments() {
    let args = ConsistencyArgs {
        data: fixture("fixtures/golden/panel.csv"),
        config: None,
        treatment: "t".into(),
        outcome: "y".into(),
        instruments: vec!["z1".into()],
        seed: None,
        r: Some(5),
        null_pairs: Some(5),
        standardize: false,
    };
    let err = cmd_consistency(&args).unwrap_err();
    assert!(err.to_string().contains("at least 2"), "{err:#}");
}

#[test]
fn granger_command_runs_on_the_fixture() {
    let args = GrangerArgs {
        data: fixture("fixtures/golden/panel.csv"),
        config: None,
        x: "t".into(),
        y: "y".into(),
        lag: 1,
    };
    let result = cmd_granger(&args).unwrap();
    assert_eq!(result.lag, 1);
    assert!(result.rss_unrestricted <= result.rss_restricted + 1e-9);
}

#[test]
fn generate_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let args = GenerateArgs {
            config: fixture("fixtures/golden/config.toml"),
            out: out.clone(),
            truth: Some(dir.path().join("truth.json")),
            seed: None,
        };
        cmd_generate(&args).unwrap();
    }
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    // the regenerated fixture matches the committed one byte for byte
    assert_eq!(
        std::fs::read(&out1).unwrap(),
        std::fs::read(fixture("fixtures/golden/panel.csv")).unwrap(),
        "committed fixture must match its generating spec"
    );
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("truth.json")).unwrap())
            .unwrap();
    assert_eq!(truth["beta_star"], 1.5);
}

#[test]
fn generate_without_scm_section_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(&cfg, "seed = 1\n").unwrap();
    let args = GenerateArgs {
        config: cfg,
        out: dir.path().join("x.csv"),
        truth: None,
        seed: None,
    };
    let err = cmd_generate(&args).unwrap_err();
    assert!(err.to_string().contains("[scm]"), "{err:#}");
}

#[test]
fn benchmark_recovery_mode_yields_five_rows() {
    let args = BenchmarkArgs {
        file: fixture("fixtures/benchmarks/recovery.json"),
        mode: BenchmarkMode::Recovery,
        config: None,
        seed: None,
        out: None,
        provider: ProviderOverrides {
            provider: Some(ProviderKindArg::Script),
            script: Some(fixture("fixtures/benchmarks/recovery_script.json")),
            transcript: None,
            record: None,
        },
    };
    let output = cmd_benchmark(&args, Some(0)).unwrap();
    match output.rows {
        ivw_cli::commands::BenchmarkRows::Recovery(rows) => {
            assert_eq!(rows.len(), 5);
            for row in &rows {
                assert!(row.em >= 0.0 && row.em <= 1.0 + 1e-12, "EM out of range: {}", row.em);
                assert!(row.cm >= 0.0 && row.cm <= 1.0);
            }
            // the verbatim-canonical transcript rows score EM = 1
            assert!((rows[0].em - 1.0).abs() < 1e-6);
        }
        _ => panic!("expected recovery rows"),
    }
}

#[test]
fn benchmark_flawed_mode_covers_the_flag_table() {
    let args = BenchmarkArgs {
        file: fixture("fixtures/benchmarks/flawed.json"),
        mode: BenchmarkMode::Flawed,
        config: None,
        seed: Some(5),
        out: None,
        provider: ProviderOverrides {
            provider: Some(ProviderKindArg::Script),
            script: Some(fixture("fixtures/benchmarks/flawed_script.json")),
            transcript: None,
            record: None,
        },
    };
    let output = cmd_benchmark(&args, Some(0)).unwrap();
    match output.rows {
        ivw_cli::commands::BenchmarkRows::Flawed(rows) => {
            assert_eq!(rows.len(), 5);
            let flags: Vec<(bool, bool)> = rows.iter().map(|r| (r.hg, r.critic)).collect();
            assert!(flags.contains(&(true, true)));
            assert!(flags.contains(&(false, true)));
            assert!(flags.contains(&(true, false)));
            // the injected instrument is always part of the critic input
            for row in &rows {
                assert_eq!(row.critic_input_size, 6, "5 proposals + 1 injection");
            }
        }
        _ => panic!("expected flawed rows"),
    }
}

#[test]
fn discover_with_run_level_errors_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let empty_script = dir.path().join("empty.json");
    std::fs::write(&empty_script, r#"{"rules": []}"#).unwrap();
    let args = DiscoverArgs {
        data: fixture("fixtures/golden/panel.csv"),
        config: Some(fixture("fixtures/golden/config.toml")),
        out: dir.path().join("out"),
        seed: None,
        provider: ProviderOverrides {
            provider: Some(ProviderKindArg::Script),
            script: Some(empty_script),
            transcript: None,
            record: None,
        },
    };
    let err = cmd_discover(&args, Some(0)).unwrap_err();
    assert!(err.to_string().contains("run-level errors"), "{err:#}");
    // the report is still written for diagnosis
    assert!(dir.path().join("out/report.json").is_file());
}

#[test]
fn binary_rejects_unknown_mode_and_bad_paths() {
    let bin = env!("CARGO_BIN_EXE_ivw");
    let out = Command::new(bin)
        .args(["benchmark", "--file", "x.json", "--mode", "nonsense"])
        .output()
        .unwrap();
    assert!(!out.status.success(), "unknown mode must exit nonzero");

    let out = Command::new(bin)
        .args(["estimate", "--data", "/nonexistent.csv", "--treatment", "a", "--outcome", "b", "--instrument", "c"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(1));

    let out = Command::new(bin).args(["--help"]).output().unwrap();
    assert!(out.status.success());
}
