use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_precsched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gap(dir: &TempDir, m: usize, k: usize) -> String {
    let p = dir.path().join(format!("gap_m{m}_k{k}.prec"));
    let out = run(&[
        "generate",
        "gap",
        "--m",
        &m.to_string(),
        "--k",
        &k.to_string(),
        "-o",
        path_str(&p),
    ]);
    assert_eq!(code(&out), 0);
    p.to_str().unwrap().to_string()
}

/// The JSON stats line printed after the human-readable lines.
fn json_line(out: &Output) -> Value {
    let text = stdout(out);
    let line = text
        .lines()
        .find(|l| l.starts_with('{'))
        .expect("json line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn generate_gap_has_m_plus_one_jobs_per_block() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(gap(&dir, 3, 4)).unwrap();
    assert!(text.lines().any(|l| l == "n 16"));
    assert!(text.lines().any(|l| l == "m 3"));
}

#[test]
fn generate_random_is_seeded() {
    let gen = |seed: &str| {
        let out = run(&[
            "generate", "random", "--n", "10", "--m", "3", "--p", "0.3", "--seed", seed,
        ]);
        assert_eq!(code(&out), 0);
        out.stdout
    };
    assert_eq!(gen("7"), gen("7"));
    assert_ne!(gen("7"), gen("8"));

    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.prec");
    let b = dir.path().join("b.prec");
    for p in [&a, &b] {
        run(&[
            "generate",
            "random",
            "--n",
            "10",
            "--m",
            "3",
            "--seed",
            "7",
            "-o",
            path_str(p),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn exact_on_gap_instance() {
    let dir = TempDir::new().unwrap();
    let out = run(&["solve", &gap(&dir, 3, 2), "--algo", "exact"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).lines().any(|l| l == "makespan: 4"));
    assert_eq!(json_line(&out)["makespan"], 4);
}

#[test]
fn lp_horizon_on_gap_instance() {
    let dir = TempDir::new().unwrap();
    let out = run(&["solve", &gap(&dir, 3, 3), "--algo", "lp"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).lines().any(|l| l == "lp_T: 4"));
    let j = json_line(&out);
    assert_eq!(j["lp_T"], 4);
    assert!(j["makespan"].is_null());
}

#[test]
fn solved_schedules_pass_verify() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("r.prec");
    run(&[
        "generate",
        "random",
        "--n",
        "8",
        "--m",
        "2",
        "--seed",
        "3",
        "-o",
        path_str(&inst),
    ]);
    let round_flags = ["--epsilon", "0.5", "--level", "1"];
    for algo in ["exact", "graham", "cg", "round"] {
        let sched = dir.path().join(format!("{algo}.sched"));
        let mut args = vec![
            "solve",
            path_str(&inst),
            "--algo",
            algo,
            "-o",
            path_str(&sched),
        ];
        if algo == "round" {
            args.extend(round_flags);
        }
        let out = run(&args);
        assert_eq!(
            code(&out),
            0,
            "{algo}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let check = run(&["verify", path_str(&inst), path_str(&sched)]);
        assert_eq!(code(&check), 0, "{algo}: {}", stdout(&check));
        assert!(stdout(&check).starts_with("valid: makespan "));
    }
}

#[test]
fn verify_reports_capacity_witness() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("i.prec");
    let sched = dir.path().join("s.sched");
    fs::write(&inst, "m 1\nn 2\n").unwrap();
    fs::write(&sched, "T 1\n0 1\n1 1\n").unwrap();
    let out = run(&["verify", path_str(&inst), path_str(&sched)]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.starts_with("violation: "));
    assert!(text.contains("slot 1"), "{text}");
}

#[test]
fn verify_rejects_precedence_and_missing_jobs() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("i.prec");
    let sched = dir.path().join("s.sched");
    fs::write(&inst, "m 2\nn 3\ne 0 1\n").unwrap();
    fs::write(&sched, "T 1\n0 1\n1 1\n").unwrap();
    let out = run(&["verify", path_str(&inst), path_str(&sched)]);
    assert_eq!(code(&out), 1);
    assert_eq!(
        stdout(&out)
            .lines()
            .filter(|l| l.starts_with("violation: "))
            .count(),
        2
    );
}

#[test]
fn malformed_files_exit_with_format_code() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.prec");
    fs::write(&bad, "m 2\nn 3\ne 0  1\n").unwrap();
    assert_eq!(code(&run(&["solve", path_str(&bad), "--algo", "exact"])), 2);

    let cyclic = dir.path().join("cyc.prec");
    fs::write(&cyclic, "m 2\nn 2\ne 0 1\ne 1 0\n").unwrap();
    assert_eq!(
        code(&run(&["solve", path_str(&cyclic), "--algo", "graham"])),
        2
    );

    let good = gap(&dir, 2, 1);
    let sched = dir.path().join("bad.sched");
    fs::write(&sched, "T x\n").unwrap();
    assert_eq!(code(&run(&["verify", &good, path_str(&sched)])), 2);
    assert_eq!(code(&run(&["solve", &good])), 2);
}

#[test]
fn resource_cap_has_its_own_code() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "solve",
        &gap(&dir, 3, 4),
        "--algo",
        "exact",
        "--budget",
        "1",
    ]);
    assert_eq!(code(&out), 3);
}

const ROW_KEYS: [&str; 11] = [
    "algo",
    "conditionings",
    "discarded",
    "error",
    "instance",
    "lp_T",
    "makespan",
    "opt",
    "ratio",
    "seed",
    "wall_ms",
];

#[test]
fn bench_over_gap_corpus() {
    let dir = TempDir::new().unwrap();
    for k in 1..=4 {
        gap(&dir, 3, k);
    }
    let out_dir = TempDir::new().unwrap();
    let report = out_dir.path().join("report.json");
    let out = run(&[
        "bench",
        path_str(dir.path()),
        "--algos",
        "exact,graham,lp",
        "-o",
        path_str(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    for row in rows {
        let mut keys: Vec<&str> = row
            .as_object()
            .unwrap()
            .keys()
            .map(String::as_str)
            .collect();
        keys.sort();
        assert_eq!(keys, ROW_KEYS);
        assert!(row["error"].is_null());
        assert!(row["seed"].is_null());
    }
    let of = |algo: &str, k: usize| {
        rows.iter()
            .find(|r| r["algo"] == algo && r["instance"] == format!("gap_m3_k{k}.prec"))
            .unwrap()
    };
    for k in 1..=4u64 {
        let opt = of("exact", k as usize)["makespan"].as_u64().unwrap();
        assert_eq!(opt, 2 * k);
        let lp_t = of("lp", k as usize)["lp_T"].as_u64().unwrap();
        assert_eq!(lp_t, (4 * k).div_ceil(3));
        assert!(of("lp", k as usize)["ratio"].as_f64().unwrap() <= 1.5);
        // 3·graham ≤ 5·opt is graham ≤ (2 − 1/3)·opt
        let graham = of("graham", k as usize)["makespan"].as_u64().unwrap();
        assert!(3 * graham <= 5 * opt);
    }
    assert_eq!(of("lp", 3)["ratio"].as_f64().unwrap(), 1.5);
    let agg = json["aggregate"].as_array().unwrap();
    assert_eq!(agg.len(), 3);
    assert!(agg.iter().all(|a| a["failures"] == 0 && a["rows"] == 4));
}

#[test]
fn bench_records_failures_per_row() {
    let dir = TempDir::new().unwrap();
    gap(&dir, 2, 1);
    fs::write(dir.path().join("broken.prec"), "m 0\n").unwrap();
    let out = run(&["bench", path_str(dir.path()), "--algos", "graham,cg"]);
    assert_eq!(code(&out), 0);
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| r["error"].is_string()).count(), 2);
    assert_eq!(rows[0]["instance"], "broken.prec");
}

#[test]
fn bench_over_empty_corpus() {
    let dir = TempDir::new().unwrap();
    let out = run(&["bench", path_str(dir.path())]);
    assert_eq!(code(&out), 0);
    let json: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 0);
}
