use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adrc_core::nn::CnnModel;
use tempfile::TempDir;

const SMALL: &str = r#"
workdir = "work"
seed = 3
[embeddings]
epochs = 1
min_count = 2
[cnn]
filter_count = 8
filter_width = 3
embedding_dim = 12
fc1_units = 16
fc2_units = 8
iterations = 40
[ensemble]
member_count = 5
filter_count_range = [6, 10]
filter_width_range = [3, 4]
embedding_dims = [12]
[baselines]
trees = 10
"#;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(config: &str) -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        let f = Fixture { dir };
        f.ok(&[
            "synth",
            "--kind",
            "binary",
            "--reviews",
            "300",
            "--out",
            "corpus.csv",
        ]);
        f
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    /// Runs the binary, defaulting `--config` and `--corpus` unless given.
    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_adrc"));
        cmd.current_dir(self.dir.path()).env_remove("ADRC_WORKDIR");
        for (flag, default) in [("--config", "run.toml"), ("--corpus", "corpus.csv")] {
            if !args.contains(&flag) {
                cmd.args([flag, default]);
            }
        }
        cmd.args(args).output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        assert!(out.status.success(), "adrc {args:?} failed:\n{stderr}");
        stderr
    }

    fn read(&self, rel: &str) -> Vec<u8> {
        fs::read(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files_under(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

#[test]
fn missing_corpus_fails_with_unreadable_file() {
    let f = Fixture::new(SMALL);
    let out = f.run(&["--corpus", "absent.csv", "ingest"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("cannot read absent.csv"), "{stderr}");
    assert!(out.stdout.is_empty());
}

#[test]
fn ingest_rerun_is_identical() {
    let f = Fixture::new(SMALL);
    f.ok(&["ingest"]);
    let first: Vec<_> = ["train.csv", "test.csv", "manifest.json"]
        .iter()
        .map(|n| f.read(&format!("work/splits/{n}")))
        .collect();
    f.ok(&["ingest"]);
    for (n, bytes) in ["train.csv", "test.csv", "manifest.json"].iter().zip(first) {
        assert_eq!(f.read(&format!("work/splits/{n}")), bytes, "{n}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&f.read("work/splits/manifest.json")).unwrap();
    assert_eq!(manifest["records"], 300);
}

#[test]
fn embed_writes_one_table_per_dimension() {
    let f = Fixture::new(SMALL);
    f.ok(&["ingest"]);
    f.ok(&["embed"]);
    let tables = files_under(&f.path("work/embeddings"));
    let names: Vec<_> = tables
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap())
        .collect();
    assert_eq!(names, ["skipgram-d12.bin", "vocab.tsv"]);
    let first = f.read("work/embeddings/skipgram-d12.bin");
    f.ok(&["embed"]);
    assert_eq!(f.read("work/embeddings/skipgram-d12.bin"), first);

    let two = Fixture::new(&SMALL.replace("embedding_dims = [12]", "embedding_dims = [10, 12]"));
    two.ok(&["ingest"]);
    two.ok(&["embed"]);
    assert!(two.path("work/embeddings/skipgram-d10.bin").exists());
    assert!(two.path("work/embeddings/skipgram-d12.bin").exists());
}

#[test]
fn single_mode_defaults_to_reference_shape() {
    let config = "workdir = \"work\"\n[embeddings]\nepochs = 1\nmin_count = 2\n[cnn]\niterations = 0\n[ensemble]\nembedding_dims = [300]\n";
    let f = Fixture::new(config);
    f.ok(&["ingest"]);
    f.ok(&["embed"]);
    f.ok(&["train", "--mode", "single"]);
    let model = CnnModel::<f64>::read_from(&f.read("work/models/single.bin")[..]).unwrap();
    let c = &model.config;
    assert_eq!(
        (c.filter_count, c.filter_width, c.embedding_dim),
        (300, 5, 300)
    );
}

#[test]
fn interrupted_committee_resumes_remaining_members() {
    let f = Fixture::new(SMALL);
    f.ok(&["ingest"]);
    f.ok(&["embed"]);
    f.ok(&["train", "--mode", "ensemble"]);
    let full: Vec<_> = (0..5)
        .map(|i| f.read(&format!("work/models/committee/member-{i:03}.bin")))
        .collect();
    let manifest = f.read("work/models/committee/committee.json");

    // Simulate an interruption after member 3: the last two files never landed.
    for i in [3, 4] {
        fs::remove_file(f.path(&format!("work/models/committee/member-{i:03}.bin"))).unwrap();
    }
    let stderr = f.ok(&["train", "--mode", "ensemble"]);
    let trained: Vec<_> = stderr
        .lines()
        .filter(|l| l.starts_with("trained committee member"))
        .collect();
    assert_eq!(
        trained,
        [
            "trained committee member 4 of 5",
            "trained committee member 5 of 5"
        ]
    );
    for (i, bytes) in full.iter().enumerate() {
        assert_eq!(
            &f.read(&format!("work/models/committee/member-{i:03}.bin")),
            bytes,
            "member {i}"
        );
    }
    assert_eq!(f.read("work/models/committee/committee.json"), manifest);

    let stderr = f.ok(&["train", "--mode", "ensemble"]);
    assert!(!stderr.contains("trained committee member"));
}

#[test]
fn baselines_write_four_models() {
    let f = Fixture::new(SMALL);
    f.ok(&["ingest"]);
    f.ok(&["embed"]);
    f.ok(&["train", "--mode", "baselines"]);
    let names: Vec<_> = files_under(&f.path("work/models/baselines"))
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
        .collect();
    assert_eq!(
        names,
        [
            "avg_forest.json",
            "avg_logreg.json",
            "bow_forest.json",
            "bow_logreg.json"
        ]
    );
}

#[test]
fn eval_reports_per_target() {
    let f = Fixture::new(SMALL);
    f.ok(&["ingest"]);
    f.ok(&["embed"]);
    f.ok(&["train", "--mode", "single"]);
    f.ok(&["train", "--mode", "ensemble"]);

    f.ok(&["eval", "single", "committee"]);
    let reports: Vec<_> = files_under(&f.path("work/reports"))
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
        .collect();
    for name in [
        "single.json",
        "single.txt",
        "committee.json",
        "committee.txt",
        "committee-curve.csv",
        "summary.txt",
    ] {
        assert!(
            reports.contains(&name.to_string()),
            "{name} missing from {reports:?}"
        );
    }
    let curve = String::from_utf8(f.read("work/reports/committee-curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 6);
    let summary = String::from_utf8(f.read("work/reports/summary.txt")).unwrap();
    assert!(summary.contains("Single CNN") && summary.contains("Ensemble of 5 CNNs"));

    fs::remove_file(f.path("work/models/committee/member-002.bin")).unwrap();
    let out = f.run(&["eval", "committee"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("member-002.bin"), "{stderr}");
}

#[test]
fn workdir_environment_variable_overrides_config() {
    let f = Fixture::new(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_adrc"))
        .current_dir(f.dir.path())
        .env("ADRC_WORKDIR", "elsewhere")
        .args(["--config", "run.toml", "--corpus", "corpus.csv", "ingest"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(f.path("elsewhere/splits/train.csv").exists());
    assert!(!f.path("work").exists());
    let resolved = String::from_utf8(f.read("elsewhere/config.resolved.toml")).unwrap();
    assert!(resolved.contains("workdir = \"elsewhere\""));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let f = Fixture::new(SMALL);
    fs::write(f.path("bad.toml"), "sede = 4\n").unwrap();
    let out = f.run(&["--config", "bad.toml", "ingest"]);
    assert!(!out.status.success());
}
