use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixrelax"))
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    bin().args([cmd, "--config"]).arg(config).arg("--out").arg(out).args(["--jobs", "1"]).output().unwrap()
}

const SMALL: &str = r#"
[model]
n = 2
eps = 0.05
eps_list = [0.08, 0.04]
b = [[0.0, 1.0], [1.0, 0.0]]
[[model.laws]]
h = { kind = "quadratic", c = 1.0 }
kappa = { kind = "constant", k = 0.01 }
[[model.laws]]
h = { kind = "quadratic", c = 1.0 }
kappa = { kind = "constant", k = 0.01 }
[grid]
n_cells = 32
[solver]
t_end = 0.02
snapshot_interval = 0.01
[init]
base = [1.0, 1.0]
amplitude = [0.1, -0.1]
mode = [1, 1]
order = "first"
"#;

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["snapshot_00000.csv", "snapshot_00002.csv", "diagnostics.jsonl", "report.json"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.contains("config_sha256"), "{f} lacks a header");
    }
    assert!(!out.join("snapshot_00003.csv").exists());
}

#[test]
fn t_end_zero_emits_initial_snapshot_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &SMALL.replace("t_end = 0.02", "t_end = 0.0"));
    let out = dir.path().join("out");
    assert_eq!(code(&run("simulate", &cfg, &out)), 0);
    assert!(out.join("snapshot_00000.csv").exists());
    assert!(!out.join("snapshot_00001.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&run("simulate", &cfg, &a)), 0);
    assert_eq!(code(&run("simulate", &cfg, &b)), 0);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 5);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let o = run("simulate", &dir.path().join("missing.toml"), &out);
    assert_eq!(code(&o), 1);

    let cfg = write_cfg(dir.path(), "not = [valid");
    assert_eq!(code(&run("simulate", &cfg, &out)), 2);

    let cfg = write_cfg(dir.path(), &SMALL.replace("b = [[0.0, 1.0], [1.0, 0.0]]", "b = [[0.0, 1.0], [2.0, 0.0]]"));
    let o = run("simulate", &cfg, &out);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("friction matrix not symmetric"));

    let cfg = write_cfg(dir.path(), &SMALL.replace("eps_list = [0.08, 0.04]", "eps_list = [0.04, 0.08]"));
    assert_eq!(code(&run("sweep", &cfg, &out)), 2);

    // the density dips below the floor once the waves move
    let tight = SMALL
        .replace("t_end = 0.02", "t_end = 0.05\nrho_floor = 0.9\nmax_retries = 2")
        .replace("order = \"first\"", "order = \"first\"\nvelocity_amplitude = 0.5");
    let cfg = write_cfg(dir.path(), &tight);
    let o = run("simulate", &cfg, &out);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = write_cfg(dir.path(), &format!("{SMALL}\n[slope_band]\nmin = 100.0\nmax = 101.0\n"));
    assert_eq!(code(&run("sweep", &cfg, &out)), 4);
    assert!(fs::read_to_string(out.join("rates.csv")).unwrap().contains("eps,sup_chi,slope_running"));
}

#[test]
fn compare_and_check_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run("compare", &cfg, &out);
    assert_eq!(code(&o), 0);
    let chi = fs::read_to_string(out.join("chi.csv")).unwrap();
    let first = chi.lines().nth(2).unwrap();
    assert!(first.starts_with("0.0000000000000000e0,0.0000000000000000e0"), "{first}");
    assert_eq!(code(&run("check", &cfg, &out)), 0);
    assert!(out.join("check.json").exists());
    assert_eq!(code(&run("sweep", &cfg, &out)), 0);
}

#[test]
fn shipped_configs_pass_check() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(repo().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let o = run("check", &path, &dir.path().join("out"));
        assert_eq!(code(&o), 0, "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
    }
}

/// Frozen outputs of the shipped binary relaxation config. Regenerate with
/// `MIXRELAX_BLESS=1 cargo test -p mixrelax-cli golden`.
#[test]
fn golden_relaxation_n2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("simulate", &repo().join("configs/relaxation_n2.toml"), &out);
    assert_eq!(code(&o), 0);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for f in ["snapshot_00005.csv", "report.json"] {
        let got = fs::read_to_string(out.join(f)).unwrap();
        if std::env::var_os("MIXRELAX_BLESS").is_some() {
            fs::write(golden.join(f), &got).unwrap();
        }
        let want = fs::read_to_string(golden.join(f)).unwrap();
        assert!(got == want, "{f} differs from the frozen output");
    }
}
