use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ccache-sim"))
}

#[test]
fn run_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kv.csv");
    let st = bin()
        .args([
            "run",
            "--scaled",
            "--workload",
            "kv",
            "--variant",
            "fgl,ccache",
            "--keys",
            "512",
            "--seed",
            "1,2",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let pass = headers.iter().position(|h| h == "oracle_pass").unwrap();
    let recs: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 4);
    assert!(recs.iter().all(|r| &r[pass] == "true"));
}

#[test]
fn config_file_supplies_machine_and_workload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.toml");
    std::fs::write(
        &cfg,
        "cores = 2\nllc_bytes = 131072\nworkload = \"bfs\"\nvariant = \"ccache\"\n",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--scaled", "--graph-scale", "8", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("bfs,ccache,2,"), "{row}");
    assert!(row.contains(",131072,"), "{row}");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn bad_arguments_fail() {
    let out = bin()
        .args(["run", "--workload", "kv", "--variant", "nope"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = bin().args(["run", "--scaled"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--workload"));
}

#[test]
fn llc_override_and_generated_graph() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.csr");
    assert!(bin()
        .args([
            "gen-graph",
            "--kind",
            "uniform",
            "--scale",
            "7",
            "--edge-factor",
            "4",
            "--out"
        ])
        .arg(&g)
        .status()
        .unwrap()
        .success());
    let out = bin()
        .args([
            "run",
            "--scaled",
            "--workload",
            "pagerank",
            "--pagerank-iterations",
            "2",
        ])
        .args(["--llc-override-bytes", "131072", "--graph-file"])
        .arg(&g)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let llc: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(5).unwrap()).collect();
    assert_eq!(llc, ["262144", "262144", "131072"]);
}
