use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hexkey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hexkey"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Dir {
        Dir(tempfile::tempdir().unwrap())
    }

    fn p(&self, name: &str) -> String {
        self.0.path().join(name).to_string_lossy().into_owned()
    }

    fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.0.path().join(name)).unwrap()
    }
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        &["characterize"][..],
        &["generate"],
        &["energy"],
        &["evaluate"],
        &["oracle", "qap"],
        &["serve"],
    ] {
        let mut args = sub.to_vec();
        args.push("--help");
        let out = hexkey(&args);
        assert_eq!(out.status.code(), Some(0), "{sub:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["generate", "--kind", "generic"][..],
        &["generate", "--kind", "hexagonal", "--seed", "1", "--out", "x.json"],
        &["characterize", "--out", "m.json"],
        &[
            "characterize",
            "--simulate",
            "u.json",
            "--replay",
            "l.ndjson",
            "--seed",
            "1",
            "--out",
            "m.json",
        ],
        &["energy", "--layout", "l.json", "--bogus"],
        &["frobnicate"],
    ] {
        let out = hexkey(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn runtime_errors_exit_1_and_leave_no_output() {
    let d = Dir::new();
    let out = hexkey(&[
        "characterize",
        "--replay",
        &d.p("missing.ndjson"),
        "--out",
        &d.p("model.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.ndjson"));

    std::fs::write(d.p("bad.ndjson"), "{\"version\":1}\n").unwrap();
    let out = hexkey(&[
        "characterize",
        "--replay",
        &d.p("bad.ndjson"),
        "--out",
        &d.p("model.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let out = hexkey(&[
        "generate",
        "--kind",
        "personalized",
        "--seed",
        "1",
        "--out",
        &d.p("layout.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(d.p("empty.txt"), "123\n\n").unwrap();
    let out = hexkey(&[
        "generate",
        "--kind",
        "generic",
        "--corpus",
        &d.p("empty.txt"),
        "--seed",
        "1",
        "--out",
        &d.p("layout.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let names: Vec<_> = std::fs::read_dir(d.0.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names.len(), 2, "only the inputs remain: {names:?}");
}

#[test]
fn golden_model_and_layout() {
    let d = Dir::new();
    ok(&hexkey(&[
        "characterize",
        "--simulate",
        &fixture("flawless.json"),
        "--seed",
        "3",
        "--out",
        &d.p("model.json"),
    ]));
    assert_eq!(d.read("model.json"), std::fs::read(golden("model.json")).unwrap());
    ok(&hexkey(&[
        "generate",
        "--kind",
        "personalized",
        "--model",
        &d.p("model.json"),
        "--seed",
        "1",
        "--out",
        &d.p("layout.json"),
    ]));
    assert_eq!(d.read("layout.json"), std::fs::read(golden("layout.json")).unwrap());
}

#[test]
fn replay_reproduces_the_simulated_model() {
    let d = Dir::new();
    ok(&hexkey(&[
        "characterize",
        "--simulate",
        &fixture("anisotropic.json"),
        "--seed",
        "8",
        "--out",
        &d.p("sim.json"),
        "--log-out",
        &d.p("log.ndjson"),
    ]));
    ok(&hexkey(&[
        "characterize",
        "--replay",
        &d.p("log.ndjson"),
        "--out",
        &d.p("replayed.json"),
    ]));
    assert_eq!(d.read("sim.json"), d.read("replayed.json"));
    let model: serde_json::Value = serde_json::from_slice(&d.read("sim.json")).unwrap();
    assert_eq!(model["bins"].as_array().unwrap().len(), 16);
}

#[test]
fn oracle_on_the_three_item_fixture() {
    let stdout = ok(&hexkey(&["oracle", "qap", "--instance", &fixture("fixture3.json")]));
    assert!(stdout.contains("faq objective = 26\n"), "{stdout}");
    assert!(stdout.contains("brute-force objective = 26\n"), "{stdout}");
}

#[test]
fn qwerty_costs_more_energy_than_generic() {
    let d = Dir::new();
    ok(&hexkey(&[
        "generate",
        "--kind",
        "generic",
        "--seed",
        "0",
        "--out",
        &d.p("g.json"),
    ]));
    ok(&hexkey(&[
        "generate",
        "--kind",
        "generic",
        "--seed",
        "0",
        "--flip",
        "--out",
        &d.p("gf.json"),
    ]));
    ok(&hexkey(&[
        "generate",
        "--kind",
        "qwerty",
        "--seed",
        "0",
        "--out",
        &d.p("q.json"),
    ]));
    let energy = |name: &str| -> f64 { ok(&hexkey(&["energy", "--layout", &d.p(name)])).trim().parse().unwrap() };
    let (g, gf, q) = (energy("g.json"), energy("gf.json"), energy("q.json"));
    assert!(g > 0.0 && q > g, "generic {g}, qwerty {q}");
    assert_eq!(g, gf);
}

#[test]
fn evaluate_writes_one_row_per_layout() {
    let d = Dir::new();
    ok(&hexkey(&[
        "generate",
        "--kind",
        "generic",
        "--seed",
        "0",
        "--out",
        &d.p("generic.json"),
    ]));
    ok(&hexkey(&[
        "generate",
        "--kind",
        "qwerty",
        "--seed",
        "0",
        "--out",
        &d.p("qwerty.json"),
    ]));
    std::fs::write(d.p("prompts.txt"), "the quick brown fox\njumps over the lazy dog\n").unwrap();
    let layouts = format!("{},{}", d.p("generic.json"), d.p("qwerty.json"));
    let args = [
        "evaluate",
        "--layouts",
        &layouts,
        "--user",
        &fixture("flawless.json"),
        "--prompts",
        &d.p("prompts.txt"),
    ];
    let table = ok(&hexkey(&[&args[..], &["--out", &d.p("a.csv")]].concat()));
    assert!(table.contains("generic") && table.contains("qwerty"));
    ok(&hexkey(&[&args[..], &["--out", &d.p("b.csv")]].concat()));

    let csv = String::from_utf8(d.read("a.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "layout,user,n_trials,accuracy_pct,wpm,wpm_star,itr_bits_per_min"
    );
    assert!(lines[1].starts_with("generic,flawless,2,100.0,"), "{}", lines[1]);
    assert!(lines[2].starts_with("qwerty,flawless,2,100.0,"), "{}", lines[2]);
    assert_eq!(d.read("a.csv"), d.read("b.csv"));
}
