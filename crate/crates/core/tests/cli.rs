use std::fs;
use std::process::Command;

fn deskmer() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deskmer"))
}

#[test]
fn missing_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    let out = deskmer()
        .args(["assemble", "--config"])
        .arg(&missing)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&missing.display().to_string()), "{err}");
}

#[test]
fn unknown_flag_and_bad_values_exit_1() {
    let out = deskmer().args(["assemble", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[assemble]\nepsilon = 1\n").unwrap();
    let out = deskmer()
        .arg("assemble")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    fs::write(&cfg, "[assemble]\nno_such_key = 3\n").unwrap();
    let out = deskmer()
        .arg("assemble")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_reads_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = deskmer()
        .arg("assemble")
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn all_writes_the_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(
        &cfg,
        "threads = 2\n[simulate]\ngenome_lengths = [6000]\npairs = 1500\nerror_rate = 0.0\n[assemble]\nk_schedule = [21, 33]\n",
    )
    .unwrap();
    let run = tmp.path().join("run");
    let out = deskmer()
        .arg("all")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&run)
        .args(["--seed", "5", "--timing"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "references.fa",
        "reads_1.fq",
        "reads_2.fq",
        "truth.tsv",
        "contigs.fa",
        "scaffolds.fa",
        "scaffold_layout.tsv",
        "links.tsv",
        "report.txt",
        "report.tsv",
        "timing.tsv",
        "iter_21/graph.tsv",
        "iter_33/contigs.fa",
    ] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("genome fraction"), "{stdout}");
}
