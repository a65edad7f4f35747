use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use approxenum::exact::answer_set;
use approxenum::neighbourhood::TypeRegistry;
use approxenum::workloads::figure1;
use approxenum::Schema;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let reg = TypeRegistry::new();
        fs::write(root.join("graph.schema"), Schema::graph().to_text()).unwrap();
        fs::write(root.join("planted.db"), figure1::planted(6, 6).to_text()).unwrap();
        fs::write(root.join("n1.db"), figure1::n1().to_text()).unwrap();
        fs::write(root.join("tau1.query"), figure1::tau1_query(&reg).to_text()).unwrap();
        fs::write(root.join("example.query"), figure1::example_query(&reg).to_text()).unwrap();
        Fixture { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_approxenum"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn parse_stream(text: &str) -> (Vec<Vec<u32>>, String) {
    let mut lines: Vec<&str> = text.lines().collect();
    let marker = lines.pop().unwrap().to_string();
    let tuples = lines
        .iter()
        .map(|l| l.split(' ').map(|x| x.parse::<u32>().unwrap() - 1).collect())
        .collect();
    (tuples, marker)
}

fn enumerate_args<'a>(f: &'a [String; 3], mode: &'a str, seed: &'a str) -> Vec<&'a str> {
    vec![
        "enumerate",
        "--schema",
        &f[0],
        "--db",
        &f[1],
        "--query",
        &f[2],
        "--mode",
        mode,
        "--gamma",
        "0.01",
        "--seed",
        seed,
    ]
}

#[test]
fn local_stream_matches_answer_set() {
    let fx = Fixture::new();
    let f = [fx.path("graph.schema"), fx.path("planted.db"), fx.path("tau1.query")];
    let o = run(&enumerate_args(&f, "local", "7"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (mut tuples, marker) = parse_stream(&stdout(&o));
    assert_eq!(marker, "-- end --");
    let reg = TypeRegistry::new();
    let expected = answer_set(&figure1::planted(6, 6), &figure1::tau1_query(&reg), 1 << 20).unwrap();
    tuples.sort();
    assert_eq!(tuples, expected);
    let err = stderr(&o);
    for key in ["alpha", "batch", "mu", "q", "s_eff", "max_delay_ops", "outputs"] {
        assert!(err.contains(key), "summary lacks {key}: {err}");
    }
}

#[test]
fn stdout_is_reproducible() {
    let fx = Fixture::new();
    let f = [fx.path("graph.schema"), fx.path("planted.db"), fx.path("example.query")];
    let a = run(&enumerate_args(&f, "general", "11"));
    let b = run(&enumerate_args(&f, "general", "11"));
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&enumerate_args(&f, "exact", "11"));
    assert!(stdout(&c).ends_with("-- end --\n"));
}

#[test]
fn max_outputs_truncates() {
    let fx = Fixture::new();
    let f = [fx.path("graph.schema"), fx.path("planted.db"), fx.path("tau1.query")];
    let mut args = enumerate_args(&f, "local", "3");
    args.extend(["--max-outputs", "5"]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0));
    let (tuples, marker) = parse_stream(&stdout(&o));
    assert_eq!(tuples.len(), 5);
    assert_eq!(marker, "-- truncated --");
}

#[test]
fn exit_codes() {
    let fx = Fixture::new();
    let f = [fx.path("graph.schema"), fx.path("planted.db"), fx.path("example.query")];
    let o = run(&enumerate_args(&f, "local", "1"));
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());

    let bad = fx.root.join("bad.db");
    fs::write(&bad, "domain 3\nE 1 4\n").unwrap();
    let bad = bad.to_string_lossy().into_owned();
    let f = [fx.path("graph.schema"), bad, fx.path("tau1.query")];
    let o = run(&enumerate_args(&f, "local", "1"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: "));

    let f = [fx.path("graph.schema"), fx.path("planted.db"), fx.path("tau1.query")];
    let mut args = enumerate_args(&f, "local", "1");
    args[10] = "1.5";
    assert_eq!(run(&args).status.code(), Some(2));
    let mut args = enumerate_args(&f, "local", "x");
    args.truncate(12);
    assert_eq!(run(&args).status.code(), Some(2));
    let o = run(&enumerate_args(&f, "local", "auto"));
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).starts_with("seed: "));
}

#[test]
fn member_and_count() {
    let fx = Fixture::new();
    let (db, q) = (fx.path("planted.db"), fx.path("tau1.query"));
    let [a, b] = figure1::centre_pair(0).map(|x| (x + 1).to_string());
    let pair = format!("{a},{b}");
    let o = run(&["member", "--db", &db, "--query", &q, "--tuple", &pair, "--seed", "2"]);
    assert_eq!(stdout(&o), "true\n");
    let rev = format!("{b},{a}");
    let o = run(&["member", "--db", &db, "--query", &q, "--tuple", &rev, "--exact"]);
    assert_eq!(stdout(&o), "false\n");
    let o = run(&["member", "--db", &db, "--query", &q, "--tuple", &a, "--exact"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["count", "--db", &db, "--query", &q, "--lambda", "0.01", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut it = out
        .lines()
        .map(|l| l.split(' ').nth(1).unwrap().parse::<f64>().unwrap());
    let (est, hw) = (it.next().unwrap(), it.next().unwrap());
    assert!((est - 6.0).abs() <= hw);
}

#[test]
fn tester_and_split() {
    let fx = Fixture::new();
    let n1 = fx.path("n1.db");
    let o = run(&[
        "test",
        "--db",
        &n1,
        "--tester",
        "example22",
        "--seed",
        "1",
        "--degree",
        "3",
    ]);
    assert_eq!(stdout(&o), "reject\n");
    let o = run(&[
        "test",
        "--db",
        &fx.path("planted.db"),
        "--query",
        &fx.path("example.query"),
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("clause 2 reject"));

    let o = run(&["split", "--db", &n1, "--tuple", "1,4", "--r", "2"]);
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("group")).count(), 1, "{out}");
    let o = run(&["split", "--db", &fx.path("planted.db"), "--tuple", "1,9", "--r", "1"]);
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("group")).count(), 2);
}

#[test]
fn bench_delay_table() {
    let o = run(&["bench-delay", "--sizes", "200", "--outputs", "50", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 2);
    let o = run(&[
        "bench-delay",
        "--sizes",
        "200,400",
        "--workload",
        "empty",
        "--seed",
        "1",
    ]);
    let out = stdout(&o);
    for row in out.lines().skip(1) {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols[5], "0");
        let end: u64 = cols[4].parse().unwrap();
        let bound: u64 = cols[6].parse().unwrap();
        assert!(end <= bound, "{row}");
    }
    assert_eq!(
        run(&["bench-delay", "--sizes", "10", "--seed", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["bench-delay", "--sizes", "a", "--seed", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn selftest_controls() {
    let o = run(&["selftest", "--scale", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"));
    assert_eq!(stdout(&o).lines().count(), 10);

    let o = run(&["selftest", "--scale", "0.01", "--fault-no-dedup", "--no-time-limit"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let line4 = out.lines().find(|l| l.starts_with("criterion  4")).unwrap();
    assert!(line4.contains("FAIL"), "{out}");
}

#[test]
fn data_directory_parses() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let reg = TypeRegistry::new();
    for q in ["tau1.query", "example.query"] {
        let o = run(&[
            "enumerate",
            "--db",
            data.join("planted_20_20.db").to_str().unwrap(),
            "--query",
            data.join(q).to_str().unwrap(),
            "--mode",
            "exact",
            "--seed",
            "0",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = fs::read_to_string(data.join("tau1.query")).unwrap();
    assert_eq!(text, figure1::tau1_query(&reg).to_text());
}
