use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wsn-alloc"))
}

fn config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference_k3.cfg")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn allocate_prints_rates_and_bounds() {
    let cfg = config();
    let o = run(&["allocate", "--config", cfg.to_str().unwrap(), "--ptot-db", "30", "--btot", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("algorithm        a-coupled"));
    assert!(text.contains("D_a"));
    let row = text.lines().find(|l| l.trim_start().starts_with("1 ")).expect("sensor 1 row");
    assert!(row.split_whitespace().nth(1) == Some("3"), "{row}");
}

#[test]
fn allocate_writes_csv() {
    let dir = std::env::temp_dir().join(format!("wsn-alloc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("one.csv");
    let cfg = config();
    let o = run(&[
        "allocate",
        "--config",
        cfg.to_str().unwrap(),
        "--algorithm",
        "b-decoupled",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("b-decoupled,"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn simulate_with_explicit_allocation() {
    let cfg = config();
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--rates",
        "4,3,2",
        "--powers",
        "40,30,30",
        "--trials",
        "4000",
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("trials           4000 (seed 3, bitflip)"));
    assert_eq!(text.lines().filter(|l| l.starts_with("level error")).count(), 3);
}

#[test]
fn simulate_is_reproducible() {
    let cfg = config();
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--trials", "3000", "--seed", "11", "--btot", "9"];
    assert_eq!(stdout(&run(&args)), stdout(&run(&args)));
}

#[test]
fn sweep_output_ignores_thread_count() {
    let cfg = config();
    let one = run(&["sweep", "--config", cfg.to_str().unwrap(), "--trials", "2500", "--threads", "1"]);
    let four = run(&["sweep", "--config", cfg.to_str().unwrap(), "--trials", "2500", "--threads", "4"]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    let text = stdout(&one);
    assert!(text.starts_with("axis,axis_value,algorithm,status,"));
    assert_eq!(text.lines().count(), 1 + 7 * 5);
}

#[test]
fn bad_input_exits_with_one() {
    let cfg = config();
    let o = run(&["allocate", "--config", cfg.to_str().unwrap(), "--algorithm", "greedy"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let o = run(&["allocate", "--config", "/nonexistent/model.cfg"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--rates", "1.5,1,1", "--powers", "1,1,1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("sweep"));
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 3);
}
