use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_qpm");

fn qpm(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("QPM_THREADS").output().expect("binary runs")
}

fn qpm_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--output-dir", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    qpm(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn succeed(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    stdout(&o)
}

/// `key=value` pairs of a summary line.
fn summary_value(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in '{line}'"))
        .parse()
        .unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn without_config(mut files: BTreeMap<String, Vec<u8>>) -> BTreeMap<String, Vec<u8>> {
    files.remove("config.toml");
    files
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

const IDEAL: &str = r#"
source = "top"

[grid]
points = 96

[dispersion]
preset = "type2"

[poling]

[sources.top]
center_nm = 765.2
fwhm_nm = 1.84
chirp_s2 = 3.5e-26

[interferometer]
sources = ["top"]
ideal = true
"#;

#[test]
fn design_source_reaches_high_purity() {
    let tmp = TempDir::new().unwrap();
    let line = succeed(qpm_in(tmp.path(), &["jsa"]));
    assert!(summary_value(&line, "purity") >= 0.99, "{line}");
    for name in ["jsa.csv", "jsi.csv", "config.toml"] {
        assert!(tmp.path().join(name).is_file(), "{name} missing");
    }
}

#[test]
fn ideal_reflectivity_sweep_peaks_at_balance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "ideal.toml", IDEAL);
    let out = tmp.path().join("out");
    succeed(qpm_in(&out, &["--config", cfg.to_str().unwrap(), "rsweep"]));
    let text = fs::read_to_string(out.join("rsweep.csv")).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('R'))
        .map(|l| {
            let (r, v) = l.split_once(',').unwrap();
            (r.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 101);
    let half = rows.iter().find(|(r, _)| *r == 0.5).expect("row at R = 0.5");
    assert!((half.1 - 1.0).abs() < 1e-9, "V(0.5) = {}", half.1);
    let expected = 2.0 * 0.625 * 0.375 / (0.625f64.powi(2) + 0.375f64.powi(2));
    let line = succeed(qpm_in(&out, &["--config", cfg.to_str().unwrap(), "rsweep"]));
    assert!((summary_value(&line, "v_config") - expected).abs() < 1e-6, "{line}");
}

#[test]
fn pspdc_is_reproducible_for_a_seed() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let first = succeed(qpm_in(&a, &["--seed", "1", "pspdc"]));
    let second = succeed(qpm_in(&b, &["--seed", "1", "pspdc"]));
    assert_eq!(first, second);
    assert_eq!(without_config(snapshot(&a)), without_config(snapshot(&b)));
    let other = succeed(qpm_in(&c, &["--seed", "2", "pspdc"]));
    assert_ne!(first, other);
    assert_ne!(snapshot(&a)["pspdc.csv"], snapshot(&c)["pspdc.csv"]);
}

#[test]
fn pspdc_reads_a_simulated_stream_back() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    succeed(qpm_in(&sim, &["simulate"]));
    let direct = succeed(qpm_in(&tmp.path().join("direct"), &["pspdc"]));
    let mut cfg = fs::read_to_string(sim.join("config.toml")).unwrap();
    let stream = sim.join("stream.bin");
    cfg = cfg.replace("[counting]\n", &format!("[counting]\nstream = {:?}\n", stream.to_str().unwrap()));
    let path = write_config(&tmp, "from_stream.toml", &cfg);
    let replayed = succeed(qpm_in(&tmp.path().join("replay"), &["--config", path.to_str().unwrap(), "pspdc"]));
    assert_eq!(direct, replayed);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("run");
    let first = succeed(qpm_in(&dir, &["--source", "top", "--format", "json", "hom"]));
    let before = snapshot(&dir);
    let echoed = dir.join("config.toml");
    let again = succeed(qpm(&["--config", echoed.to_str().unwrap(), "hom"]));
    assert_eq!(first, again);
    assert_eq!(before, snapshot(&dir));
    let doc: serde_json::Value = serde_json::from_slice(&before["hom.json"]).unwrap();
    assert_eq!(doc["qpm_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(doc["data"]["columns"], serde_json::json!(["tau_s", "c", "V"]));
}

#[test]
fn relocated_runs_share_the_config_hash() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    succeed(qpm_in(&a, &["g2"]));
    succeed(qpm_in(&b, &["g2"]));
    let header = |d: &Path| fs::read_to_string(d.join("g2.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header(&a), header(&b));
    assert!(header(&a).starts_with(&format!("# qpm {} config=", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let run = |threads: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = Command::new(BIN)
            .args(["--output-dir", out.to_str().unwrap(), "hom"])
            .env("QPM_THREADS", threads)
            .output()
            .unwrap();
        (o, out)
    };
    let (one, d1) = run("1", "one");
    let (three, d3) = run("3", "three");
    assert_eq!(succeed(one), succeed(three));
    assert_eq!(without_config(snapshot(&d1)), without_config(snapshot(&d3)));
    let (bad, _) = run("zero", "bad");
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("QPM_THREADS"));
}

#[test]
fn missing_section_exits_with_its_name() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "ideal.toml", IDEAL);
    let o = qpm_in(&tmp.path().join("out"), &["--config", cfg.to_str().unwrap(), "pspdc"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[counting]"), "{}", stderr(&o));
    let o = qpm_in(&tmp.path().join("out"), &["--config", cfg.to_str().unwrap(), "--source", "bot", "jsa"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[sources.bot]"), "{}", stderr(&o));
}

#[test]
fn malformed_values_exit_with_config_status() {
    let tmp = TempDir::new().unwrap();
    for (text, needle) in [
        ("[grid]\nspan_nm = -3.0\n", "[grid]"),
        ("[grid]\nspan = 3.0\n", "span"),
        ("[interferometer]\nsources = [\"nowhere\"]\n", "nowhere"),
        ("[grid\n", "config"),
    ] {
        let cfg = write_config(&tmp, "bad.toml", text);
        let o = qpm_in(&tmp.path().join("out"), &["--config", cfg.to_str().unwrap(), "jsa"]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
}

#[test]
fn numeric_failure_names_the_operation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "wide.toml", &IDEAL.replace("points = 96", "points = 96\nspan_nm = 200.0"));
    let o = qpm_in(&tmp.path().join("out"), &["--config", cfg.to_str().unwrap(), "jsa"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("dispersion evaluation"), "{}", stderr(&o));
}

#[test]
fn io_failures_exit_with_four() {
    let tmp = TempDir::new().unwrap();
    let o = qpm(&["--config", tmp.path().join("absent.toml").to_str().unwrap(), "jsa"]);
    assert_eq!(o.status.code(), Some(4));
    let blocker = write_config(&tmp, "file", "");
    let o = qpm_in(&blocker.join("sub"), &["g2"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let mut text = IDEAL.to_string();
    text.push_str(&format!("\n[counting]\nsources = [\"top\"]\npair_probabilities = [0.03]\nstream = {:?}\n", tmp.path().join("none.bin").to_str().unwrap()));
    let cfg = write_config(&tmp, "stream.toml", &text);
    let o = qpm_in(&tmp.path().join("out"), &["--config", cfg.to_str().unwrap(), "pspdc"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn every_subcommand_runs_on_the_bundled_config() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        ("pmf", "first_sidelobe_db", "pmf.csv"),
        ("schmidt", "purity", "schmidt_coefficients.csv"),
        ("optimize-pump", "purity", "optimize_pump.csv"),
        ("g2", "g2_design", "g2.csv"),
        ("tofmap", "sqrt_jsi_purity", "jsi_tof.csv"),
        ("simulate", "events", "stream.bin"),
    ];
    for (cmd, key, file) in cases {
        let dir = tmp.path().join(cmd);
        let line = succeed(qpm_in(&dir, &[cmd]));
        assert!(summary_value(&line, key).is_finite(), "{cmd}: {line}");
        assert!(dir.join(file).is_file(), "{cmd}: {file} missing");
    }
    let line = succeed(qpm_in(&tmp.path().join("g2top"), &["--source", "top", "g2"]));
    let g2 = summary_value(&line, "g2_top");
    assert!(g2 > 1.0 && g2 < 2.0, "{line}");
    let line = succeed(qpm_in(&tmp.path().join("pmf_top"), &["--source", "top", "pmf"]));
    assert!(summary_value(&line, "first_sidelobe_db") <= -25.0, "{line}");
}
