use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn psa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psa"))
        .args(args)
        .output()
        .expect("run psa")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_tiny(dir: &Path) -> (String, String) {
    let e = dir.join("effects.csv");
    let c = dir.join("costs.csv");
    fs::write(&e, "Status quo,New\n1,2\n1,3\n1,1\n").unwrap();
    fs::write(&c, "Status quo,New\n10,25\n10,35\n10,15\n").unwrap();
    (e.display().to_string(), c.display().to_string())
}

#[test]
fn summary_and_sim_table() {
    let dir = tempfile::tempdir().unwrap();
    let (e, c) = write_tiny(dir.path());
    let out = psa(&["summary", "--effects", &e, "--costs", &c, "--ref", "2", "--kmax", "50", "--wtp", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("15"), "{text}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("only 3 simulations"));

    let out = psa(&["sim-table", "--effects", &e, "--costs", &c, "--ref", "2", "--kmax", "50", "--wtp", "20"]);
    let text = stdout(&out);
    let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["U1", "U2", "U*", "IB2_1", "OL", "VI"]);
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (e, c) = write_tiny(dir.path());
    let missing = psa(&["summary", "--effects", "/nonexistent/effects.csv", "--costs", &c]);
    assert_eq!(missing.status.code(), Some(3));
    let bad_ref = psa(&["summary", "--effects", &e, "--costs", &c, "--ref", "7"]);
    assert_eq!(bad_ref.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_ref.stderr).contains('7'));
    let bad_plot = psa(&["plot", "pie", "--effects", &e, "--costs", &c]);
    assert_eq!(bad_plot.status.code(), Some(2));
}

#[test]
fn plot_is_deterministic_and_report_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let (e, c) = write_tiny(dir.path());
    let args = ["plot", "ceplane", "--effects", &e, "--costs", &c, "--ref", "2", "--legend", "top-left"];
    let a = stdout(&psa(&args));
    let b = stdout(&psa(&args));
    assert!(a.starts_with("<svg"));
    assert_eq!(a, b);

    let out = dir.path().join("report");
    let run = psa(&["report", "--effects", &e, "--costs", &c, "--ref", "2", "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    for name in ["ceplane", "ceac", "eib", "evi"] {
        assert!(md.contains(&format!("figures/{name}.svg")));
        assert!(out.join("figures").join(format!("{name}.svg")).exists());
    }
}

#[test]
fn archive_restore() {
    let dir = tempfile::tempdir().unwrap();
    let (e, c) = write_tiny(dir.path());
    let path = dir.path().join("a.json");
    let run = psa(&[
        "archive", "--effects", &e, "--costs", &c, "--ref", "2", "--kmax", "50", "--shares", "0.5,0.5", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let restored = psa(&["restore", path.to_str().unwrap(), "--wtp", "20"]);
    assert!(restored.status.success());
    let direct = psa(&["summary", "--effects", &e, "--costs", &c, "--ref", "2", "--kmax", "50", "--wtp", "20"]);
    assert_eq!(stdout(&restored), stdout(&direct));
    assert!(String::from_utf8_lossy(&restored.stderr).is_empty());
}
