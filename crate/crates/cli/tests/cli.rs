use qcad_core::circuit::parse_netlist;
use qcad_core::errorsim::{gate_trace, mc_run, AncillaQuality};
use qcad_core::qec::{apply_placement, every_gate_placement, insert_corrections, table_op_count, EDistConfig};
use qcad_core::randgen::{gen_random, RandSpec};
use qcad_core::tech::{FactoryKind, Tech};
use serde_json::Value;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::Instant;

const TWO_GATES: &str = "qubit a\nqubit b\nh a\ncnot a,b\n";

fn qcad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcad"))
        .args(args)
        .env_remove("QCAD_TECH_FILE")
        .output()
        .expect("qcad runs")
}

fn ok(args: &[&str]) -> String {
    let o = qcad(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    qcad(args).status.code().unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn assert_stamped(v: &Value, seed: u64) {
    assert_eq!(v["tool"], "qcad");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["manifest_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["seed"], seed);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn two_gate_netlist_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.qc", TWO_GATES);
    let out = dir.path().join("out");
    ok(&[
        "run",
        "--input",
        &input,
        "--every-gate",
        "--d",
        "1",
        "--trials",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ]);
    for f in [
        "manifest.toml",
        "input.qc",
        "corrected.qc",
        "qec.json",
        "sim.json",
        "report.json",
        "report.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let report = json(&read(&out, "report.json"));
    assert_stamped(&report, 1);
    let p = report["metrics"][0]["p_success"].as_f64().unwrap();
    assert!(p > 0.99, "{p}");
    assert_eq!(report["qec"]["corrections"], 3);
    let corrected = parse_netlist(&read(&out, "corrected.qc")).unwrap();
    assert_eq!(corrected.num_gates(), 5);
    for f in ["input.qc", "corrected.qc", "report.csv", "manifest.toml"] {
        assert!(read(&out, f).starts_with("# qcad "), "{f}");
    }
}

#[test]
fn rerunning_a_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = r#"
        datapath = "qalypso"
        d = [1, 2, 4]
        qec = "edist:5"
        trials = 3000
        seed = 11
        error_set = "2"
        out = "a"
        [input.random]
        gates = 300
        qubits = 30
        rent = 0.5
    "#;
    let ma = write(dir.path(), "a.toml", manifest);
    let mb = write(dir.path(), "b.toml", &manifest.replace("out = \"a\"", "out = \"b\""));
    ok(&["run", "--manifest", &ma]);
    ok(&["run", "--manifest", &mb]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for f in ["qec.json", "sim.json", "report.json", "report.csv", "corrected.qc"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let sim = json(&read(&a, "sim.json"));
    assert_stamped(&sim, 11);
    for k in ["p_success", "ci_low", "ci_high", "trials"] {
        assert!(sim[k].is_number(), "{k}");
    }
    // The manifest written back reproduces the run.
    let again = dir.path().join("again");
    std::fs::create_dir(&again).unwrap();
    let saved = read(&a, "manifest.toml").replace(&format!("{}", a.display()), &format!("{}", again.display()));
    let mc = write(&again, "m.toml", &saved);
    ok(&["run", "--manifest", &mc]);
    assert_eq!(read(&a, "report.json"), read(&again, "report.json"));
}

#[test]
fn missing_manifest_input_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.toml",
        "datapath = \"qalypso\"\nd = [1]\nqec = \"none\"\ntrials = 10\nseed = 1\nout = \"o\"\n[input]\nnetlist = \"nope.qc\"\n",
    );
    assert_eq!(code(&["run", "--manifest", &m]), 2);
    assert!(!dir.path().join("o").exists());
}

#[test]
fn gen_random_pipes_into_optimize_qec() {
    let netlist = ok(&["gen-random", "--gates", "200", "--qubits", "20", "--seed", "5"]);
    assert!(netlist.starts_with("# qcad "));
    assert!(netlist.contains("seed=5"));
    let mut child = Command::new(env!("CARGO_BIN_EXE_qcad"))
        .args(["optimize-qec", "-", "--edist", "4"])
        .env_remove("QCAD_TECH_FILE")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(netlist.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let c = parse_netlist(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let original = gen_random(&RandSpec {
        gates: 200,
        qubits: 20,
        rent_r: 0.5,
        seed: 5,
    })
    .unwrap();
    let p = insert_corrections(&original, &EDistConfig::new(4)).unwrap();
    assert_eq!(c.num_gates(), 200 + p.len());
    let summary = json(String::from_utf8(o.stderr).unwrap().trim());
    assert_eq!(summary["corrections"], p.len());
}

#[test]
fn map_sweep_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let nl = ok(&["gen-random", "--gates", "150", "--qubits", "24", "--seed", "2"]);
    let input = write(dir.path(), "c.qc", &nl);
    let csv = ok(&[
        "map",
        &input,
        "--sweep-D",
        "1:4:1",
        "--trials",
        "200",
        "--error-set",
        "2",
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# qcad "));
    assert_eq!(lines[1], qcad_core::metrics::CSV_HEADER);
    assert_eq!(lines.len(), 2 + 4);
    for (i, row) in lines[2..].iter().enumerate() {
        assert!(row.starts_with(&format!("qalypso-D{}-", i + 1)), "{row}");
        assert_eq!(row.split(',').count(), 11);
    }
    let single = json(&ok(&["map", &input, "--d", "2", "--trials", "200"]));
    assert_stamped(&single, 1);
    assert!(single["adcr"].as_f64().unwrap() > 0.0);
}

#[test]
fn report_merges_metrics_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.qc", TWO_GATES);
    let a = write(
        dir.path(),
        "a.json",
        &ok(&["map", &input, "--d", "1", "--trials", "100"]),
    );
    let b = write(
        dir.path(),
        "b.json",
        &ok(&["map", &input, "--d", "2", "--trials", "100"]),
    );
    let csv = ok(&["report", &a, &b]);
    assert_eq!(csv.lines().count(), 4);
    let merged = json(&ok(&["report", &a, &b, "--format", "json"]));
    assert_eq!(merged["metrics"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes_per_stage() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "t.qc", TWO_GATES);
    let bad = write(dir.path(), "bad.qc", "qubit a\nfrobnicate a\n");
    assert_eq!(code(&["simulate", &bad]), 2);
    assert_eq!(code(&["simulate", &good, "--error-set", "3"]), 2);
    assert_eq!(code(&["map", &good, "--sweep-D", "4:1:1"]), 2);
    assert_eq!(code(&["optimize-qec", &good, "--edist", "1"]), 3);
    assert_eq!(
        code(&[
            "map",
            &good,
            "--d",
            "1",
            "--memory",
            "0",
            "--datapath",
            "cqla",
            "--net-aggressiveness",
            "2"
        ]),
        4
    );
    let wide = ok(&["gen-random", "--gates", "40", "--qubits", "40"]);
    let wide = write(dir.path(), "w.qc", &wide);
    assert_eq!(code(&["map", &wide, "--d", "1", "--memory", "0"]), 4);
    assert_eq!(code(&["simulate", &good, "--trials", "0"]), 5);
    assert_eq!(code(&["simulate", &dir.path().join("none.qc").to_string_lossy()]), 1);
}

#[test]
fn tech_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let nl = ok(&["gen-random", "--gates", "300", "--qubits", "10", "--seed", "4"]);
    let input = write(dir.path(), "c.qc", &nl);
    let args = ["simulate", &input, "--unmapped", "--trials", "4000"];
    let base = json(&ok(&args));
    let tech = write(dir.path(), "tech.toml", "[error_set.two_qubit]\np = 0.001\n");
    let run = |file: &str| {
        Command::new(env!("CARGO_BIN_EXE_qcad"))
            .args(args)
            .env("QCAD_TECH_FILE", file)
            .output()
            .unwrap()
    };
    let o = run(&tech);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let noisy = json(&String::from_utf8(o.stdout).unwrap());
    assert!(noisy["p_success"].as_f64().unwrap() < base["p_success"].as_f64().unwrap());
    assert_ne!(noisy["manifest_hash"], base["manifest_hash"]);
    let broken = write(dir.path(), "broken.toml", "[error_set.two_qubit\n");
    assert_eq!(run(&broken).status.code(), Some(2));
}

#[test]
fn shor_16_runs_quickly() {
    let t = Instant::now();
    let v = json(&ok(&["shor", "--n", "16"]));
    assert!(t.elapsed().as_secs() < 120);
    assert_stamped(&v, 1);
    let e = &v["estimates"][0];
    assert_eq!(e["counts"]["n"], 16);
    assert!(e["latency_s"].as_f64().unwrap() > 0.0);
    assert!(e["area_mm2"].as_f64().unwrap() > 0.0);
    assert_eq!(e["mapped"], true);
}

/// Seeded 100-qubit threshold sweep: the CLI table must match the library
/// computed directly, with operation counts falling as T grows.
#[test]
fn threshold_table_regression() {
    let dir = tempfile::tempdir().unwrap();
    let nl = ok(&["gen-random", "--gates", "1000", "--qubits", "100", "--seed", "7"]);
    let input = write(dir.path(), "c.qc", &nl);
    let csv = ok(&[
        "optimize-qec",
        &input,
        "--sweep-T",
        "3,6,9",
        "--error-set",
        "2",
        "--trials",
        "2000",
        "--seed",
        "3",
    ]);
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 4);

    let tech = Tech::set2();
    let c = gen_random(&RandSpec {
        gates: 1000,
        qubits: 100,
        rent_r: 0.5,
        seed: 7,
    })
    .unwrap();
    let anc = AncillaQuality::for_factory(FactoryKind::QalypsoPipelined, &tech);
    let mut placements = vec![every_gate_placement(&c)];
    for t in [3, 6, 9] {
        placements.push(insert_corrections(&c, &EDistConfig::new(t)).unwrap());
    }
    let mut last_ops = u64::MAX;
    for (row, p) in rows.iter().zip(&placements) {
        let ops = table_op_count(&c, p, &tech.costs);
        assert_eq!(row[1].parse::<usize>().unwrap(), p.len());
        assert_eq!(row[2].parse::<u64>().unwrap(), ops);
        assert!(ops < last_ops);
        last_ops = ops;
        let r = mc_run(&gate_trace(&apply_placement(&c, p), &tech, anc), 2000, 3);
        assert_eq!(row[3].parse::<f64>().unwrap(), r.p_success);
    }
}
