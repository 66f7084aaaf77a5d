use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use supermap_forge::algebra::MultiMatrixAlgebra;
use supermap_forge::format::Document;
use supermap_forge::gen::{identity_supermap, perturb_supermap, PerturbMode, Seed};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    run_env(args, None)
}

fn run_env(args: &[&str], tol_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_supermap-forge"));
    cmd.args(args).env_remove("SUPERMAP_FORGE_TOL");
    if let Some(v) = tol_env {
        cmd.env("SUPERMAP_FORGE_TOL", v);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// The fixtures that are not produced by `gen`.
fn derived_fixtures() -> Vec<(&'static str, Document)> {
    let m2 = MultiMatrixAlgebra::matrix(2);
    let id = identity_supermap(&m2, &m2);
    let broken = perturb_supermap(&id, 1e-2, PerturbMode::TpBreaking, Seed(3)).unwrap();
    vec![
        ("identity.json", Document::supermap(&id)),
        ("tp_broken.json", Document::supermap(&broken)),
    ]
}

/// Set `SUPERMAP_FORGE_BLESS=1` to rewrite the derived fixtures.
#[test]
fn derived_fixtures_are_reproducible() {
    let bless = std::env::var_os("SUPERMAP_FORGE_BLESS").is_some();
    for (name, doc) in derived_fixtures() {
        if bless {
            doc.save(fixture(name)).unwrap();
        }
        let on_disk = std::fs::read_to_string(fixture(name)).unwrap();
        assert_eq!(on_disk, doc.to_json(), "{name} is stale");
    }
}

#[test]
fn fixtures_round_trip_bit_exactly() {
    for name in ["identity.json", "tp_broken.json", "cdp08.json", "random.json", "bound.json"] {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let s = Document::from_json(&text).unwrap().to_supermap().unwrap();
        assert_eq!(Document::supermap(&s).to_json(), text, "{name}");
    }
}

#[test]
fn verify_exit_codes() {
    assert_eq!(code(&run(&["verify", p(&fixture("identity.json"))])), 0);
    assert_eq!(code(&run(&["verify", p(&fixture("tp_broken.json"))])), 1);

    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(fixture("identity.json")).unwrap();
    let truncated = dir.path().join("truncated.json");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(code(&run(&["verify", p(&truncated)])), 2);
    assert_eq!(code(&run(&["verify", p(&dir.path().join("missing.json"))])), 2);
}

#[test]
fn verify_report_carries_residuals_and_n() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    assert_eq!(code(&run(&["verify", p(&fixture("tp_broken.json")), "--out", p(&out)])), 1);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["format_version"], "1");
    assert_eq!(doc["kind"], "report");
    assert_eq!(doc["payload"]["verdict"], false);
    assert!(doc["payload"]["kernel_residual"].as_f64().unwrap() > 1e-8);
    assert_eq!(doc["payload"]["n_map"]["kind"], "channel");
}

#[test]
fn tolerance_env_and_flag() {
    let broken = fixture("tp_broken.json");
    assert_eq!(code(&run_env(&["verify", p(&broken)], Some("10"))), 0);
    assert_eq!(code(&run_env(&["verify", p(&broken), "--tol", "1e-8"], Some("10"))), 1);
    assert_eq!(code(&run_env(&["verify", p(&broken)], Some("not-a-number"))), 2);
    assert_eq!(code(&run(&["verify", p(&broken), "--tol", "-1"])), 2);
}

#[test]
fn realize_then_check_every_fixture() {
    let dir = TempDir::new().unwrap();
    for name in ["identity.json", "cdp08.json", "random.json", "bound.json"] {
        let r = dir.path().join(format!("r-{name}"));
        let out = run(&["realize", p(&fixture(name)), "--out", p(&r)]);
        assert_eq!(code(&out), 0, "{name}");
        let text = stdout(&out);
        let field = |key: &str| -> usize {
            text.lines()
                .find_map(|l| l.strip_prefix(key))
                .and_then(|v| v.split_whitespace().next())
                .unwrap()
                .parse()
                .unwrap()
        };
        assert!(field("p_dim:") <= field("bound:"), "{name}");
        assert_eq!(code(&run(&["check", p(&fixture(name)), p(&r), "--trials", "3"])), 0, "{name}");
    }
}

#[test]
fn cdp08_realisation_has_trivial_classical_wiring() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("r.json");
    assert_eq!(code(&run(&["realize", p(&fixture("cdp08.json")), "--out", p(&r)])), 0);
    let real = Document::load(&r).unwrap().to_realisation(1e-9).unwrap();
    assert_eq!(real.e_channel().source().num_blocks(), 1);
    assert_eq!(real.e_channel().target().num_blocks(), 1);
    assert_eq!(real.g_channel().source().num_blocks(), 1);
    assert_eq!(real.g_channel().target().num_blocks(), 1);
}

#[test]
fn realize_refuses_non_deterministic_input() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("r.json");
    assert_eq!(code(&run(&["realize", p(&fixture("tp_broken.json")), "--out", p(&r)])), 1);
    assert!(!r.exists());
}

#[test]
fn check_failures() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("r.json");
    assert_eq!(code(&run(&["realize", p(&fixture("cdp08.json")), "--out", p(&r)])), 0);
    // same algebras, different supermap
    assert_eq!(code(&run(&["check", p(&fixture("identity.json")), p(&r)])), 1);
    // different algebras
    assert_eq!(code(&run(&["check", p(&fixture("random.json")), p(&r)])), 2);
    // a supermap where a realisation is expected
    assert_eq!(code(&run(&["check", p(&fixture("cdp08.json")), p(&fixture("cdp08.json"))])), 2);
}

#[test]
fn check_with_zero_trials_still_runs_spanning_set() {
    let dir = TempDir::new().unwrap();
    let r = dir.path().join("r.json");
    let report = dir.path().join("report.json");
    assert_eq!(code(&run(&["realize", p(&fixture("random.json")), "--out", p(&r)])), 0);
    let out = run(&[
        "check",
        p(&fixture("random.json")),
        p(&r),
        "--trials",
        "0",
        "--out",
        p(&report),
    ]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["payload"]["trials"], 0);
    assert!(doc["payload"]["spanning_deviation"].as_f64().unwrap() <= 1e-8);
    assert_eq!(doc["payload"]["passed"], true);
}

#[test]
fn demos() {
    for name in ["cdp08", "multimeter", "povm-to-state", "state-to-povm"] {
        let out = run(&["demo", name]);
        assert_eq!(code(&out), 0, "{name}");
        assert!(!stdout(&out).contains("FAIL"));
    }
    let out = run(&["demo", "nonsense"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("povm-to-state"));
}

#[test]
fn gen_is_deterministic_and_validates_shapes() {
    let dir = TempDir::new().unwrap();
    let (x, y) = (dir.path().join("x.json"), dir.path().join("y.json"));
    for f in [&x, &y] {
        let args = ["gen", "supermap", "--a", "2", "--b", "1,1", "--c", "1", "--d", "2", "--seed", "4", "--out", p(f)];
        assert_eq!(code(&run(&args)), 0);
    }
    assert_eq!(std::fs::read(&x).unwrap(), std::fs::read(&y).unwrap());

    assert_eq!(code(&run(&["gen", "channel", "--source", "2,x", "--target", "1"])), 2);
    assert_eq!(code(&run(&["gen", "channel", "--source", "0", "--target", "1"])), 2);
    assert_eq!(code(&run(&["gen", "supermap", "--a", "1", "--b", "1", "--c", "1", "--d", "1", "--p-dim", "0"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn gen_classical_channel_is_a_stochastic_matrix() {
    let out = run(&["gen", "channel", "--source", "1,1", "--target", "1,1", "--seed", "9"]);
    assert_eq!(code(&out), 0);
    let ch = Document::from_json(&stdout(&out)).unwrap().to_channel(1e-10).unwrap();
    for i in 0..2 {
        let column: f64 = (0..2).map(|j| ch.choi_block(j, i)[(0, 0)].re).sum();
        assert!((column - 1.0).abs() < 1e-12);
        for j in 0..2 {
            assert!(ch.choi_block(j, i)[(0, 0)].re >= 0.0);
        }
    }
}

#[test]
fn pipeline_on_twenty_generated_supermaps() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let shapes = ["1", "2", "1,1", "1,2", "2,2"];
    for seed in 0..20usize {
        let pick = |k: usize| shapes[(seed * 7 + k * 3 + seed / 5) % shapes.len()];
        let (s, r) = (dir.path().join("s.json"), dir.path().join("r.json"));
        let seed_s = seed.to_string();
        let p_dim = (1 + seed % 2).to_string();
        let gen = [
            "gen", "supermap", "--a", pick(0), "--b", pick(1), "--c", pick(2), "--d", pick(3),
            "--p-dim", &p_dim, "--seed", &seed_s, "--out", p(&s),
        ];
        assert_eq!(code(&run(&gen)), 0, "gen {seed}");
        assert_eq!(code(&run(&["verify", p(&s)])), 0, "verify {seed}");
        assert_eq!(code(&run(&["realize", p(&s), "--out", p(&r)])), 0, "realize {seed}");
        assert_eq!(code(&run(&["check", p(&s), p(&r), "--seed", &seed_s])), 0, "check {seed}");
    }
    assert!(start.elapsed().as_secs() < 60);
}
