use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_systematicity"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn presets_lists_required_names() {
    let o = bin(&["presets"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for name in [
        "fig3",
        "fig5-split",
        "appendixA-A",
        "appendixA-E",
        "appendixG-sweep",
        "appendixH",
        "rank-tables",
    ] {
        assert!(s.contains(name), "missing {name}");
    }
}

#[test]
fn gen_dataset_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let o = bin(&[
        "gen-dataset",
        "--n-x",
        "2",
        "--n-y",
        "1",
        "--k-x",
        "1",
        "--k-y",
        "2",
        "--r",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let input = fs::read_to_string(out.join("input.csv")).unwrap();
    assert_eq!(input.lines().count(), 2 + 4);
    assert_eq!(input.lines().next().unwrap(), "-1,1,-1,1");
    assert_eq!(
        fs::read_to_string(out.join("output.csv")).unwrap().lines().count(),
        1 + 8
    );
    assert!(fs::read_to_string(out.join("meta.txt")).unwrap().contains("k_y = 2"));
}

#[test]
fn invalid_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "gen-dataset",
        "--n-x",
        "2",
        "--n-y",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("n_y"), "{}", stderr(&o));
}

#[test]
fn theory_emits_long_csv() {
    let o = bin(&["theory", "--epochs", "100", "--every", "50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some("t,id,value"));
    // 8 modes and 4 norms, 3 time points each.
    assert_eq!(lines.count(), 12 * 3);
    assert!(s.contains("100,norm_comp_comp,"));
}

#[test]
fn train_from_config_file_with_overrides_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        r#"
name = "small"
seed = 3

[dataset]
n_x = 2
n_y = 1
k_x = 1
k_y = 1
r = 1.0

[train]
epsilon = 0.01
epochs = 4000
record_every = 20
hidden_width = 20

[[runs]]
label = "net"
arch = "dense"
"#,
    )
    .unwrap();
    let out = dir.path().join("bundle");
    let o = bin(&[
        "train",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--epochs",
        "3000",
        "--repeats",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let history = fs::read_to_string(out.join("net/history.csv")).unwrap();
    assert!(history.lines().last().unwrap().starts_with("3000,"));
    assert_eq!(
        fs::read_to_string(out.join("net/repeats.csv")).unwrap().lines().count(),
        3
    );
    let written = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(written.contains("repeats = 2"));

    let c = bin(&["compare", out.to_str().unwrap(), "--tol", "0.1"]);
    assert!(c.status.success(), "{}{}", stdout(&c), stderr(&c));
    assert!(stdout(&c).contains("max_mode_deviation"));
    let strict = bin(&["compare", out.to_str().unwrap(), "--tol", "1e-12"]);
    assert!(!strict.status.success());
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "name = \"x\"\nrepeats = 0\n[rank]\nfeatures = [3]\ntrials = 10\n").unwrap();
    let o = bin(&[
        "train",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`repeats`"), "{}", stderr(&o));
}

#[test]
fn reproduce_requires_a_known_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["reproduce", "--preset", "nope", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown preset"));
}

#[test]
fn reproduce_with_overrides_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h");
    let o = bin(&[
        "reproduce",
        "--preset",
        "appendixA-datasetA",
        "--out",
        out.to_str().unwrap(),
        "--repeats",
        "4",
        "--epochs",
        "200",
        "--seed",
        "9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    for f in [
        "summary.csv",
        "dense/history.csv",
        "dense/history_std.csv",
        "dataset/meta.txt",
    ] {
        assert!(manifest.contains(f), "{f} not listed");
        assert!(Path::new(&out.join(f)).is_file());
    }
    // Split runs carry no theory curves to compare against.
    let c = bin(&["compare", out.to_str().unwrap()]);
    assert!(!c.status.success());
}

#[test]
fn rank_subcommand_matches_enumeration_column() {
    let o = bin(&["rank", "--features", "3", "--sizes", "3,5", "--trials", "2000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    let rows: Vec<&str> = s.lines().collect();
    assert_eq!(rows[0], "n_features,sample_size,estimate,std_error,exact_if_available");
    assert!(rows[1].ends_with(&format!("{}", 32.0 / 56.0)));
    assert_eq!(rows[2], "3,5,1,0,1");
}
