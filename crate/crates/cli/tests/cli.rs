use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use sctsa_cli::artifact::{sha256_hex, RunManifest};
use sctsa_cli::{run_from, EXIT_BUDGET, EXIT_CONFIG, EXIT_DATA};
use sctsa_core::complexity::{mean_sc, read_profiles_csv};
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 11

[synth]
groups = 4
cells_per_group = 30

[filtration]
grid = 20
max_dim = 4

[complexity]
m_points = 20
replicates = 3

[barcode]
m_points = 15

[mapper]
intervals = 4
"#;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("sctsa.toml"), SMALL).unwrap();
        let f = Fixture { dir };
        assert_eq!(f.sctsa("data", &["synth", "--output", f.input().to_str().unwrap()]), 0);
        f
    }

    fn root(&self) -> &Path {
        self.dir.path()
    }

    fn input(&self) -> PathBuf {
        self.root().join("cells.csv")
    }

    fn run_dir(&self, name: &str) -> PathBuf {
        self.root().join(name)
    }

    /// Run in-process against run directory `run` with the fixture config.
    fn sctsa(&self, run: &str, args: &[&str]) -> i32 {
        let cfg = self.root().join("sctsa.toml");
        let out = self.run_dir(run);
        let mut argv = vec!["sctsa", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()];
        argv.extend_from_slice(args);
        run_from(argv)
    }

    fn full_run(&self, run: &str) {
        let input = self.input();
        assert_eq!(self.sctsa(run, &["run", "-i", input.to_str().unwrap()]), 0);
    }
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sctsa"))
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn unknown_keys_are_config_errors() {
    let f = Fixture::new();
    assert_eq!(f.sctsa("r", &["-s", "filtration.bogus=1", "report"]), EXIT_CONFIG);
    fs::write(f.root().join("bad.toml"), "[mapper]\nintervalz = 3\n").unwrap();
    let out = binary()
        .args(["-c", f.root().join("bad.toml").to_str().unwrap(), "report"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("intervalz"));
}

#[test]
fn preconditions_checked_before_work() {
    let f = Fixture::new();
    assert_eq!(f.sctsa("r", &["mapper", "--overlap", "1.0"]), EXIT_CONFIG);
    assert_eq!(f.sctsa("r", &["complexity", "--m-points", "2"]), EXIT_CONFIG);
    assert_eq!(f.sctsa("r", &["complexity", "--complex", "witness"]), EXIT_CONFIG);
    assert_eq!(f.sctsa("r", &["mapper", "--tau", "soon"]), EXIT_CONFIG);
    assert_eq!(f.sctsa("r", &["--threads", "0", "report"]), EXIT_CONFIG);
    assert!(!f.run_dir("r").exists());
}

#[test]
fn flags_override_file_and_set() {
    let f = Fixture::new();
    let cli = <sctsa_cli::Cli as clap::Parser>::parse_from([
        "sctsa",
        "-c",
        f.root().join("sctsa.toml").to_str().unwrap(),
        "-s",
        "mapper.tau=3",
        "-s",
        "complexity.replicates=9",
        "mapper",
        "--tau",
        "inf",
        "--lens",
        "pca",
    ]);
    let cfg = sctsa_cli::resolve_config(&cli).unwrap();
    assert_eq!(cfg.mapper.tau, sctsa_core::Tau::Infinite);
    assert_eq!(cfg.mapper.lens, sctsa_core::EmbedMethod::Pca);
    assert_eq!(cfg.mapper.intervals, 4);
    assert_eq!(cfg.complexity.replicates, 9);
    assert_eq!(cfg.seed, 11);
}

#[test]
fn env_var_sets_default_run_dir() {
    let f = Fixture::new();
    let out = binary()
        .env("SCTSA_OUT", f.run_dir("from-env"))
        .args(["-c", f.root().join("sctsa.toml").to_str().unwrap(), "ingest", "-i"])
        .arg(f.input())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(f.run_dir("from-env").join("ingest/distance.bin").is_file());
}

#[test]
fn malformed_input_is_a_data_error() {
    let f = Fixture::new();
    let bad = f.root().join("bad.csv");
    fs::write(&bad, "cell_id,time,cell_type,g1,g2\nc1,0,a,1,2\nc2,zero,a,3,1\n").unwrap();
    let out = binary()
        .args(["-o", f.run_dir("r").to_str().unwrap(), "ingest", "-i", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("ingest") && msg.contains("line 3"), "{msg}");
    assert_eq!(f.sctsa("r", &["ingest", "-i", "/nonexistent/cells.csv"]), EXIT_DATA);
}

#[test]
fn over_budget_barcode_exits_with_budget_code() {
    let f = Fixture::new();
    assert_eq!(f.sctsa("r", &["ingest", "-i", f.input().to_str().unwrap()]), 0);
    let out = binary()
        .args(["-c", f.root().join("sctsa.toml").to_str().unwrap(), "-o", f.run_dir("r").to_str().unwrap()])
        .args(["barcode", "--budget", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_BUDGET));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget of 10"));
}

#[test]
fn downstream_stage_without_upstream_names_it() {
    let f = Fixture::new();
    let out = binary()
        .args(["-o", f.run_dir("empty").to_str().unwrap(), "complexity"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest (ingest/expression.csv)"));
}

#[test]
fn report_on_empty_run_lists_every_stage() {
    let f = Fixture::new();
    fs::create_dir_all(f.run_dir("empty")).unwrap();
    let out = binary()
        .args(["-o", f.run_dir("empty").to_str().unwrap(), "report"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    let msg = String::from_utf8_lossy(&out.stderr);
    for stage in ["ingest", "embed", "complexity", "barcode", "mapper", "lineage"] {
        assert!(msg.contains(stage), "{stage} missing from: {msg}");
    }
}

#[test]
fn mapper_tau_one_and_inf_give_two_graphs() {
    let f = Fixture::new();
    assert_eq!(f.sctsa("r", &["ingest", "-i", f.input().to_str().unwrap()]), 0);
    assert_eq!(f.sctsa("r", &["mapper", "--tau", "1"]), 0);
    assert_eq!(f.sctsa("r", &["mapper", "--tau", "inf"]), 0);
    let run = f.run_dir("r");
    let one = csv_rows(&run.join("mapper/tau_1/nodes.csv"));
    let inf = csv_rows(&run.join("mapper/tau_inf/nodes.csv"));
    assert!(!one.is_empty() && !inf.is_empty());
    for n in &one {
        let (lo, hi): (u32, u32) = (n[3].parse().unwrap(), n[4].parse().unwrap());
        assert!(hi - lo <= 1);
    }
    let widest = inf.iter().map(|n| n[4].parse::<u32>().unwrap() - n[3].parse::<u32>().unwrap()).max();
    assert!(widest > Some(1));
    let m = RunManifest::load(&run).unwrap().unwrap();
    assert!(m.stages.contains_key("mapper/tau_1") && m.stages.contains_key("mapper/tau_inf"));
    let g: serde_json::Value = serde_json::from_slice(&fs::read(run.join("mapper/tau_1/graph.json")).unwrap()).unwrap();
    assert_eq!(g["schema_version"], 1);
    assert_eq!(g["tau"], 1);
}

#[test]
fn full_run_report_matches_manifest_and_artifacts() {
    let f = Fixture::new();
    f.full_run("r");
    let run = f.run_dir("r");
    let m = RunManifest::load(&run).unwrap().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&fs::read(run.join("report/report.json")).unwrap()).unwrap();
    let digests = report["digests"].as_object().unwrap();
    let mut n = 0;
    for (key, rec) in &m.stages {
        if key == "report" {
            continue;
        }
        for (rel, sha) in &rec.outputs {
            assert_eq!(digests[rel], sha.as_str());
            assert_eq!(&sha256_hex(&fs::read(run.join(rel)).unwrap()), sha);
            n += 1;
        }
    }
    assert_eq!(digests.len(), n);

    let bytes = fs::read(run.join("complexity/profiles.csv")).unwrap();
    let profiles = read_profiles_csv(bytes.as_slice(), Path::new("profiles.csv")).unwrap();
    let sc = &report["complexity"];
    for (g, row) in sc["rows"].as_array().unwrap().iter().zip(sc["values"].as_array().unwrap()) {
        for (k, v) in row.as_array().unwrap().iter().enumerate() {
            assert_eq!(v.as_f64(), mean_sc(&profiles, g.as_str().unwrap(), k + 1));
        }
    }

    let nodes = csv_rows(&run.join("mapper/tau_inf/nodes.csv"));
    let edges = csv_rows(&run.join("mapper/tau_inf/edges.csv"));
    let mg = &report["mapper"][0];
    assert_eq!(mg["nodes"], nodes.len());
    assert_eq!(mg["edges"], edges.len());
    let span = nodes.iter().map(|r| r[4].parse::<u64>().unwrap() - r[3].parse::<u64>().unwrap()).max().unwrap();
    assert_eq!(mg["max_node_span"], span);

    let bars = csv_rows(&run.join("barcode/barcodes.csv"));
    let total: u64 = report["barcode"].as_array().unwrap().iter().map(|b| b["intervals"].as_u64().unwrap()).sum();
    assert_eq!(total as usize, bars.len());
    assert!(fs::read_to_string(run.join("report/report.txt")).unwrap().contains("SC_4"));
    assert!(m.stages["report"].outputs.contains_key("report/report.json"));
}

#[test]
fn tampered_artifact_fails_the_report() {
    let f = Fixture::new();
    f.full_run("r");
    let run = f.run_dir("r");
    fs::write(run.join("lineage/dendrogram.nwk"), "(a,b);\n").unwrap();
    assert_eq!(f.sctsa("r", &["report"]), EXIT_DATA);
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let f = Fixture::new();
    for (run, threads) in [("t1", "1"), ("t3", "3")] {
        assert_eq!(f.sctsa(run, &["--threads", threads, "ingest", "-i", f.input().to_str().unwrap()]), 0);
        assert_eq!(f.sctsa(run, &["--threads", threads, "complexity"]), 0);
        assert_eq!(f.sctsa(run, &["--threads", threads, "mapper"]), 0);
    }
    let (a, b) = (tree(&f.run_dir("t1")), tree(&f.run_dir("t3")));
    for (rel, bytes) in &a {
        if rel != "manifest.json" {
            assert_eq!(Some(bytes), b.get(rel), "{rel}");
        }
    }
}

#[test]
fn staged_and_end_to_end_runs_agree() {
    let f = Fixture::new();
    f.full_run("whole");
    let input = f.input();
    for cmd in [vec!["ingest", "-i", input.to_str().unwrap()], vec!["barcode"], vec!["complexity"], vec!["lineage"]] {
        assert_eq!(f.sctsa("staged", &cmd), 0);
    }
    let (a, b) = (tree(&f.run_dir("whole")), tree(&f.run_dir("staged")));
    for (rel, bytes) in &b {
        if rel != "manifest.json" {
            assert_eq!(Some(bytes), a.get(rel), "{rel}");
        }
    }
}

#[test]
fn no_temporary_files_are_left_behind() {
    let f = Fixture::new();
    f.full_run("r");
    let names: Vec<String> = tree(&f.run_dir("r")).into_keys().collect();
    assert!(names.iter().all(|n| !n.contains(".tmp")), "{names:?}");
    assert_eq!(names.len(), 23, "{names:?}");
}

#[test]
fn quoted_fields_survive_ingest() {
    let f = Fixture::new();
    let p = f.root().join("quoted.tsv");
    fs::write(
        &p,
        "cell_id\ttime\tcell_type\tg1\tg2\tg3\n\"a,1\"\t0\t\"type \"\"x\"\"\"\t1\t2\t4\nb\t1\tplain\t3\t1\t0\nc\t1\tplain\t0\t5\t1\n",
    )
    .unwrap();
    assert_eq!(f.sctsa("q", &["ingest", "-i", p.to_str().unwrap()]), 0);
    let rows = csv_rows(&f.run_dir("q").join("ingest/expression.csv"));
    assert_eq!(&rows[0][0], "a,1");
    assert_eq!(&rows[0][2], "type \"x\"");
}

#[test]
fn witness_and_betti_options_run() {
    let f = Fixture::new();
    assert_eq!(f.sctsa("w", &["ingest", "-i", f.input().to_str().unwrap()]), 0);
    assert_eq!(f.sctsa("w", &["complexity", "--complex", "witness", "--landmarks", "8", "--nu", "1"]), 0);
    let rows = csv_rows(&f.run_dir("w").join("complexity/profiles.csv"));
    assert_eq!(rows.len(), 4 * 4);
    assert_eq!(f.sctsa("w", &["barcode"]), 0);
    assert_eq!(f.sctsa("w", &["lineage", "--features", "betti", "--linkage", "single"]), 0);
    let merges = csv_rows(&f.run_dir("w").join("lineage/merges.csv"));
    assert_eq!(merges.len(), 3);
}
