use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const E1: &str = "2 2\n0 1\n1 0\n0 0.4\n0.1 0\n0 0\n0 0\n1 1\n";

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idnc-game"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn analyze_stage_prints_the_crossed_pair() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e1.txt"), E1).unwrap();
    let o = run(&["analyze-stage", "e1.txt", "--game", "1"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("y0 1.250000000"), "{text}");
    assert!(text.contains("helpers [1]"), "{text}");
    assert!(text.contains("poa 0.912280702"), "{text}");
    assert!(text.contains("t,critical,helpers,y0,min_y,poa,poa_lower_bound,equilibria,pone\n"));
}

#[test]
fn analyze_stage_writes_csv_to_out() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e1.txt"), E1).unwrap();
    let o = run(&["analyze-stage", "e1.txt", "--out", "row.csv"], dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("row.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("1,"));
}

#[test]
fn realized_channel_is_rejected_for_analysis() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e1.txt"), E1).unwrap();
    let o = run(&["analyze-stage", "e1.txt", "--channel-mode", "realized"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn malformed_snapshot_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.txt"), E1.replace("0 0.4", "0 x")).unwrap();
    let o = run(&["analyze-stage", "bad.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), "players = 4\npackets = 6\niterations = 8\nseed = 3\n").unwrap();
    let base = ["sweep-m", "--config", "run.conf", "--grid", "3"];
    let a = run(&[&base[..], &["--out", "a.csv"]].concat(), dir.path());
    let b = run(&[&base[..], &["--out", "b.csv", "--seed", "3"]].concat(), dir.path());
    let c = run(&[&base[..], &["--out", "c.csv", "--iterations", "5"]].concat(), dir.path());
    assert!(a.status.success() && b.status.success() && c.status.success());
    let read = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert!(read("a.csv").contains(",8\n"));
    assert!(read("c.csv").contains(",5\n"));
    assert!(dir.path().join("a.dat").exists());
}

#[test]
fn sweeps_rerun_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec!["sweep-ratio", "--grid", "0.5,1", "--players", "5", "--packets", "6", "--iterations", "10", "--seed", "9", "--out", out]
    };
    assert!(run(&args("x.csv"), dir.path()).status.success());
    assert!(run(&args("y.csv"), dir.path()).status.success());
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("x.csv"), read("y.csv"));
    assert_eq!(read("x.dat"), read("y.dat"));
    assert!(String::from_utf8(read("x.csv")).unwrap().starts_with("x,scheme,mean_T,stderr,mean_estimate,censored,iterations\n"));
}

#[test]
fn simulate_logs_one_line_per_stage() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e1.txt"), E1).unwrap();
    let o = run(&["simulate", "--snapshot", "e1.txt", "--seed", "5"], dir.path());
    assert!(o.status.success());
    let log = stdout(&o);
    assert!(log.lines().count() >= 1);
    assert_eq!(log, stdout(&run(&["simulate", "--snapshot", "e1.txt", "--seed", "5"], dir.path())));
    assert!(String::from_utf8_lossy(&o.stderr).contains("slots "));
}

#[test]
fn bad_values_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep-m", "--q-mean", "0", "--spread", "0", "--grid", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(run(&["simulate", "--game", "3"], dir.path()).status.code() != Some(0));
}
