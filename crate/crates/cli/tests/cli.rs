use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semcom-rsma"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("semcom-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn init_config_then_small_sweep() {
    let dir = scratch("sweep");
    let cfg = dir.join("run.toml");
    assert!(bin().args(["init-config"]).arg(&cfg).status().unwrap().success());
    assert!(!bin().args(["init-config"]).arg(&cfg).status().unwrap().success(), "refuses to overwrite");

    let mut doc: toml::Table = std::fs::read_to_string(&cfg).unwrap().parse().unwrap();
    let scenario = doc.get_mut("scenario").unwrap().as_table_mut().unwrap();
    scenario.insert("num_users".into(), toml::Value::Integer(2));
    let sweep = doc.get_mut("sweep").unwrap().as_table_mut().unwrap();
    sweep.insert("values".into(), toml::Value::Array(vec![toml::Value::Float(30.0)]));
    sweep.insert("seeds".into(), toml::Value::Array(vec![toml::Value::Integer(0)]));
    sweep.insert("schemes".into(), toml::Value::Array(vec![toml::Value::String("sdma".into())]));
    std::fs::write(&cfg, toml::to_string(&doc).unwrap()).unwrap();

    let csv = dir.join("out.csv");
    let status = bin().args(["sweep", "--config"]).arg(&cfg).arg("--output").arg(&csv).status().unwrap();
    assert!(status.success());
    let out = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(out.lines().count(), 3, "{out}");
    assert!(out.starts_with("scheme,seed,param,value,"));
    assert!(dir.join("out.svg").exists());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn solve_prints_each_scheme() {
    let out = bin().args(["solve", "--seed", "1", "--schemes", "sdma,fdma"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("SDMA") && text.contains("FDMA") && !text.contains("RSMA"), "{text}");
}

#[test]
fn bad_input_is_an_error() {
    assert!(!bin().args(["validate", "thorough"]).status().unwrap().success());
    assert!(!bin().args(["solve", "--schemes", "noma"]).status().unwrap().success());
    let missing = bin().args(["sweep", "--config", "/nonexistent/semcom.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
