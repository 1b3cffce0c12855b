use std::path::PathBuf;
use std::process::{Command, Output};

fn hymad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hymad")).args(args).output().unwrap()
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gen_trace_is_byte_identical_for_a_seed() {
    let args = ["gen-trace", "accordion62", "--seed", "4", "--duration", "300"];
    let (a, b) = (hymad(&args), hymad(&args));
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let c = hymad(&["gen-trace", "accordion62", "--seed", "5", "--duration", "300"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn two_distant_nodes_give_an_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("far.toml");
    std::fs::write(
        &model,
        r#"model = "rwp"
nodes = 2
range = 1.0
world = { width = 10000.0, height = 10000.0 }
params = { min_speed = 0.0, max_speed = 0.0, wait_time = 0.0 }
"#,
    )
    .unwrap();
    let o = hymad(&["gen-trace", model.to_str().unwrap(), "--seed", "2", "--duration", "100"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().all(|l| l.starts_with('#')));
}

#[test]
fn validate_trace_accepts_generated_and_rejects_unsorted() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.trace");
    let o = hymad(&["gen-trace", "accordion62", "--duration", "120", "-o", good.to_str().unwrap()]);
    assert!(o.status.success());
    let o = hymad(&["validate-trace", good.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("ok:"));

    let bad = dir.path().join("bad.trace");
    std::fs::write(&bad, "5 up 0 1\n2 down 0 1\n").unwrap();
    let o = hymad(&["validate-trace", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());
}

#[test]
fn unknown_preset_fails_with_a_message() {
    let o = hymad(&["gen-trace", "no-such-preset"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("accordion62"));
}

fn small_scenario(dir: &std::path::Path) -> PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(
        &p,
        r#"name = "small"
nodes = 8
world_width = 600.0
world_height = 600.0
range = 250.0
duration = 60.0
cooldown = 30.0
seeds = [1, 2]
"#,
    )
    .unwrap();
    p
}

#[test]
fn run_writes_csvs_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let scen = small_scenario(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = hymad(&["run", scen.to_str().unwrap(), "--protocols", "epidemic,hymad", "--out", out.to_str().unwrap(), "-j", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["cdf.csv", "overhead.csv", "dynamics.csv", "summary.csv", "messages/hymad_seed2.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let cdf = std::fs::read_to_string(a.join("cdf.csv")).unwrap();
    assert_eq!(cdf.lines().next(), Some("bucket_s,epidemic,hymad"));
}

#[test]
fn run_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "nodes = 3\nduration = 10.0\nrange = 5.0\nbogus = 1\n").unwrap();
    let o = hymad(&["run", p.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn dump_groups_prints_one_row_per_node_and_sample() {
    let dir = tempfile::tempdir().unwrap();
    let scen = small_scenario(dir.path());
    let o = hymad(&["dump-groups", scen.to_str().unwrap(), "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("time,node,group_leaderless_id,members..."));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len() % 8, 0);
    for r in &rows {
        let node: u32 = r[1].parse().unwrap();
        let members: Vec<u32> = r[3..].iter().map(|m| m.parse().unwrap()).collect();
        assert!(members.contains(&node));
        assert_eq!(r[2].parse::<u32>().unwrap(), *members.iter().min().unwrap());
    }
}

#[test]
fn shipped_scenarios_parse() {
    for e in std::fs::read_dir(scenarios()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            hymad::scenario::parse_scenario(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        }
    }
}
