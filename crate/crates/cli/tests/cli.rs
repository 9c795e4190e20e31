use std::path::Path;
use std::process::{Command, Output};

fn execaware(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_execaware"));
    cmd.current_dir(dir).args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("EXECAWARE_")) {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_corpus(root: &Path) {
    let p = root.join("corpus/problems/A");
    std::fs::create_dir_all(p.join("src")).unwrap();
    std::fs::create_dir_all(p.join("tests")).unwrap();
    std::fs::write(p.join("problem.toml"), "split = \"train\"\n").unwrap();
    std::fs::write(p.join("src/slow.cpp"), "int main() {\n  return 0;\n}\n").unwrap();
    std::fs::write(p.join("src/fast.cpp"), "int main() { return 0; }\n").unwrap();
    std::fs::write(p.join("src/other.cpp"), "int main() {\n  int x = 1;\n  return x - 1;\n}\n").unwrap();
    std::fs::write(p.join("tests/1.in"), "").unwrap();
    std::fs::write(p.join("tests/1.out"), "").unwrap();
    std::fs::write(root.join("corpus/pairs.jsonl"), "{\"slow\":\"slow\",\"fast\":\"fast\"}\n").unwrap();
}

#[test]
fn config_show_prints_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = execaware(dir.path(), &["config", "show"], &[]);
    assert!(out.status.success());
    let text = stdout(&out);
    for key in [
        "token_limit = 512",
        "mask_rate = 0.15",
        "per_problem_cap = 150",
        "time_cap_s = 500.0",
        "seed = 0",
        "formatter_cmd = \"\"",
        "tokenizer_adapter = \"punct\"",
        "backend = \"wallclock\"",
        "# many_max = 20",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn layering_file_then_env_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "seed = 1\n[dataset]\ntoken_limit = 100\nmask_rate = 0.2\n[bench]\nreps = 7\n",
    )
    .unwrap();
    let out = execaware(
        dir.path(),
        &["--config", "cfg.toml", "config", "show", "--token-limit", "300"],
        &[("EXECAWARE_TOKEN_LIMIT", "200"), ("EXECAWARE_SEED", "5")],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("seed = 5"));
    assert!(text.contains("token_limit = 300"));
    assert!(text.contains("mask_rate = 0.2"));
    assert!(text.contains("reps = 7"));
}

#[test]
fn invalid_configuration_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = execaware(dir.path(), &["config", "show", "--mask-rate", "0"], &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("mask_rate"));
    std::fs::write(dir.path().join("bad.toml"), "[dataset]\nnope = 1\n").unwrap();
    let out = execaware(dir.path(), &["--config", "bad.toml", "config", "show"], &[]);
    assert!(!out.status.success());
}

#[test]
fn trace_without_adapter_fails_and_records_items() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let out = execaware(dir.path(), &["trace", "--adapter", "no-such-debugger-xyz", "--jobs", "2"], &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("adapter unavailable"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("traces/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["total"], 2);
    assert_eq!(summary["failed"], 2);
}

#[test]
fn dataset_commands() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let out = execaware(dir.path(), &["dataset", "--strategy", "s1", "--aspect", "le"], &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("no complete traces"));

    let out = execaware(dir.path(), &["dataset", "--strategy", "BL"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let first = std::fs::read(dir.path().join("datasets/BL/finetune.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_slice(first.split(|b| *b == b'\n').next().unwrap()).unwrap();
    assert_eq!(rec["task"], "optimize");
    assert_eq!(rec["source"], "optimize: int main() {\n  return 0;\n}");

    execaware(dir.path(), &["dataset", "--strategy", "BL"], &[]);
    assert_eq!(std::fs::read(dir.path().join("datasets/BL/finetune.jsonl")).unwrap(), first);

    let out = execaware(dir.path(), &["dataset", "--strategy", "S9"], &[]);
    assert!(!out.status.success());
}

#[test]
fn eval_rejects_empty_candidates() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    std::fs::write(dir.path().join("c.jsonl"), "").unwrap();
    let out = execaware(dir.path(), &["eval", "c.jsonl"], &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("no records"));
}

#[test]
fn compare_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = |label: &str, speedups: &[(&str, f64)]| {
        let records: Vec<serde_json::Value> = speedups
            .iter()
            .map(|(id, s)| {
                serde_json::json!({
                    "pair_id": id, "input_program_id": "i", "generated_program_id": "g",
                    "input_ok": true, "compiled": true, "executed": true, "correct": true, "cases": [],
                    "timing": {"speedup": s, "optimized": *s >= 1.1, "input_times": [], "generated_times": []}
                })
            })
            .collect();
        let v = serde_json::json!({
            "label": label, "backend": "wallclock",
            "metrics": {"n": records.len(), "compiled_pct": 100.0, "executed_pct": 100.0, "correct_pct": 100.0,
                "n_correct": records.len(), "timing": {"mean_speedup": 1.0, "opt_pct": 0.0,
                "mean_speedup_correct": null, "n_optimized_gt1pct": 0, "mean_speedup_optimized": null}},
            "records": records
        });
        let path = dir.path().join(format!("{label}.json"));
        std::fs::write(&path, v.to_string()).unwrap();
        path
    };
    report("t", &[("a", 2.0), ("b", 3.0), ("c", 1.5)]);
    report("b", &[("a", 1.0), ("b", 1.0), ("c", 1.0)]);
    report("x", &[("a", 1.0), ("z", 1.0), ("c", 1.0)]);

    let out = execaware(dir.path(), &["--reports", "out", "compare", "t.json", "b.json"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let cmp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/compare_t_vs_b.json")).unwrap()).unwrap();
    assert_eq!(cmp["r"], 1.0);
    assert_eq!(cmp["a12"], 1.0);

    let out = execaware(dir.path(), &["--reports", "out", "compare", "t.json", "t.json"], &[]);
    assert!(stdout(&out).contains("no difference"));

    let out = execaware(dir.path(), &["--reports", "out", "compare", "t.json", "x.json"], &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing"));
}

#[test]
fn trace_then_build_every_strategy() {
    let found = |t: &str| {
        std::env::var_os("PATH").is_some_and(|p| std::env::split_paths(&p).any(|d| d.join(t).is_file()))
    };
    if !(found("gdb") && found("g++")) {
        eprintln!("skipped: gdb or g++ not found");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let out = execaware(dir.path(), &["trace", "--time-cap", "60"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("2 complete"), "{}", stdout(&out));
    assert!(dir.path().join("traces/slow/1.trace").is_file());
    for s in ["BL", "S1", "S2", "S3"] {
        let out = execaware(dir.path(), &["dataset", "--strategy", s], &[]);
        assert!(out.status.success(), "{s}: {}", stderr(&out));
    }
    let s3 = std::fs::read_to_string(dir.path().join("datasets/S3-LC/finetune.jsonl")).unwrap();
    assert!(s3.contains("return 0; // <e>"));
}
