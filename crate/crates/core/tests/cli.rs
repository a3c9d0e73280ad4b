use std::fs;
use std::path::Path;

use point_interaction::cli::main_with_args;
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["pointint", "--quiet"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// Data rows (no provenance comments, no header) split into fields.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(path: &Path, i: usize) -> Vec<f64> {
    rows(path).iter().map(|r| r[i].parse().unwrap()).collect()
}

const EPSILON: &str = "[box]\nlength = 10.0\n[interaction]\nkind = \"epsilon\"\nc = 5.0\n";

#[test]
fn spectrum_of_free_box() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "free.toml",
        "[box]\nlength = 10.0\n[interaction]\nkind = \"free\"\n[solver]\nenergy_window = [0.0, 0.5]\nmax_states = 9\n",
    );
    let out = dir.path().join("free.csv");
    assert_eq!(run(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let e = column(&out, 1);
    assert_eq!(e.len(), 3);
    assert!((e[0] - 0.049_348_02).abs() < 1e-8);
    for (n, v) in e.iter().enumerate() {
        let k = (n + 1) as f64 * std::f64::consts::PI / 10.0;
        assert!((v - k * k / 2.0).abs() < 1e-10);
    }
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# tool: point-interaction"));
    assert!(text.contains("# config: "));
    assert!(!text.contains('\r'));
}

#[test]
fn spectrum_of_epsilon_point_with_states() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "eps.toml",
        &format!("{EPSILON}[solver]\nwavefunctions = true\ngrid_points = 201\n"),
    );
    let out = dir.path().join("eps.csv");
    assert_eq!(run(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let e = column(&out, 1);
    assert!(e.windows(2).all(|w| w[0] < w[1]));
    assert!((e[1] - 0.082_317_2).abs() < 1e-7);
    assert!((e[3] - 0.482_786_9).abs() < 1e-6);
    let states = rows(&dir.path().join("eps_states.csv"));
    assert_eq!(states.len(), 201);
    assert_eq!(states[0].len(), 5);
}

#[test]
fn spectrum_json_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "eps.toml", EPSILON);
    let out = dir.path().join("eps.json");
    assert_eq!(
        run(&["spectrum", "--config", &cfg, "--format", "json", "--out", out.to_str().unwrap()]),
        0
    );
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["provenance"]["command"], "spectrum");
    assert_eq!(v["provenance"]["config"]["interaction"]["c"], 5.0);
    assert_eq!(v["result"]["eigenvalues"].as_array().unwrap().len(), 4);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let fd = write(
        dir.path(),
        "fd.toml",
        "[box]\nlength = 10.0\n[interaction]\nkind = \"epsilon\"\nc = 5.0\na = 0.3\n[solver]\nmethod = \"fd\"\n",
    );
    assert_eq!(run(&["spectrum", "--config", &fd]), 2);
    let chi = write(
        dir.path(),
        "chi.toml",
        "[box]\nlength = 10.0\n[interaction]\nkind = \"chi\"\nalpha = 1\nbeta = 1\ngamma = 1\ndelta = 1\n",
    );
    assert_eq!(run(&["spectrum", "--config", &chi]), 2);
    assert_eq!(run(&["spectrum", "--config", "/nonexistent/config.toml"]), 2);
    assert_eq!(run(&["spectrum"]), 2);
    assert_eq!(run(&["bogus"]), 2);
}

#[test]
fn fig1_writes_all_panels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1");
    assert_eq!(run(&["fig1", "--out", out.to_str().unwrap()]), 0);
    for name in [
        "eigenvalues.csv",
        "state1.csv",
        "state2.csv",
        "state3.csv",
        "state4.csv",
        "potential.csv",
        "potential_zoom.csv",
        "gaps.csv",
        "boundary.csv",
    ] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert!(text.starts_with("# tool: "), "{name}");
    }
    let limit = column(&out.join("eigenvalues.csv"), 3);
    for (got, want) in limit.iter().zip([0.049_348_02, 0.082_317_2, 0.444_132_2, 0.482_786_9]) {
        assert!((got - want).abs() < 1e-7, "{got} vs {want}");
    }
    let fd = column(&out.join("eigenvalues.csv"), 1);
    assert!(fd.windows(2).all(|w| w[0] < w[1]));

    // states 2 and 4 flip sign across the center, 1 and 3 do not
    for (i, odd) in [(1, false), (2, true), (3, false), (4, true)] {
        let psi = column(&out.join(format!("state{i}.csv")), 1);
        let n = psi.len();
        let (left, right) = (psi[n / 2 - 50], psi[n / 2 + 50]);
        assert_eq!(left * right < 0.0, odd, "state {i}");
    }
    let zoom = column(&out.join("potential_zoom.csv"), 0);
    assert!(zoom.iter().all(|x| x.abs() <= 0.666 + 1e-12));
    assert!(zoom.len() < column(&out.join("potential.csv"), 0).len());
}

#[test]
fn converge_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.csv");
    let o = out.to_str().unwrap();
    assert_eq!(
        run(&["converge", "--family", "epsilon:5", "--a", "0.1,0.03,0.01", "--probe", "eigenvalue:2", "--out", o]),
        0
    );
    let r = rows(&out);
    assert_eq!(r.last().unwrap()[..2], ["monotone".to_string(), "true".to_string()]);
    let rel: Vec<f64> = r[..3].iter().map(|row| row[4].parse().unwrap()).collect();
    assert!(rel.windows(2).all(|w| w[1] < w[0]));
    assert!(rel[2] < 0.01);

    for fam in ["constant:1,1", "chi3:-2,1,-1,1"] {
        assert_eq!(
            run(&["converge", "--family", fam, "--a", "1e-2,1e-3,1e-4", "--probe", "transfer:0.045", "--out", o]),
            0
        );
        assert_eq!(rows(&out).last().unwrap()[1], "true");
    }
    assert_eq!(
        run(&["converge", "--family", "epsilon:5", "--a", "0.01,0.1", "--probe", "eigenvalue:2", "--out", o]),
        2
    );
    assert_eq!(
        run(&["converge", "--family", "chi3:1,1,1,1", "--a", "0.1", "--probe", "transfer:0.1", "--out", o]),
        2
    );
    assert_eq!(
        run(&["converge", "--family", "epsilon:5", "--a", "0.1", "--probe", "slope:1", "--out", o]),
        2
    );
}

#[test]
fn verify_report_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(run(&["verify", "--seed", "1", "--out", a.to_str().unwrap()]), 0);
    assert_eq!(run(&["verify", "--seed", "1", "--out", b.to_str().unwrap()]), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let v: Value = serde_json::from_str(&fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(v["report"]["pass"], true);
    assert_eq!(v["report"]["branches"].as_array().unwrap().len(), 4);
    assert_eq!(v["report"]["pinned"]["matrix"], serde_json::json!([[2.0, -1.0], [-1.0, 1.0]]));
    assert_eq!(run(&["verify", "--trials", "0", "--out", a.to_str().unwrap()]), 2);
}

#[test]
fn extract_recovers_point_interactions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let eps = write(dir.path(), "eps.toml", EPSILON);
    assert_eq!(run(&["extract", "--config", &eps, "--states", "2", "--out", out.to_str().unwrap()]), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let fitted = &v["result"]["fit"]["fitted"];
    let want = [[1.0, 0.0], [10.0, 1.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((fitted[i][j].as_f64().unwrap() - want[i][j]).abs() < 1e-6);
        }
    }
    assert!(v["result"]["deviations"].is_array());

    let free = write(
        dir.path(),
        "free.toml",
        "[box]\nlength = 10.0\n[interaction]\nkind = \"free\"\n",
    );
    assert_eq!(run(&["extract", "--config", &free, "--states", "2", "--out", out.to_str().unwrap()]), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let fitted = &v["result"]["fit"]["fitted"];
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((fitted[i][j].as_f64().unwrap() - want).abs() < 1e-9);
        }
    }
    assert_eq!(run(&["extract", "--config", &free, "--states", "1", "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn extract_degenerate_inputs_exit_4() {
    // a near-impenetrable wall pins psi(0) ~ 0 in every state
    let dir = tempfile::tempdir().unwrap();
    let wall = write(
        dir.path(),
        "wall.toml",
        "[box]\nlength = 10.0\n[interaction]\nkind = \"delta\"\nv = 1e9\n",
    );
    let out = dir.path().join("x.json");
    assert_eq!(run(&["extract", "--config", &wall, "--states", "2", "--out", out.to_str().unwrap()]), 4);
}

#[test]
fn fd_spectrum_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fd.toml",
        "[box]\nlength = 10.0\n[interaction]\nkind = \"epsilon\"\nc = 5.0\na = 0.333\ns = 0.012\n\
         [solver]\nmethod = \"fd\"\nwavefunctions = true\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(run(&["spectrum", "--config", &cfg, "--seed", "3", "--out", a.to_str().unwrap()]), 0);
    assert_eq!(run(&["spectrum", "--config", &cfg, "--seed", "3", "--out", b.to_str().unwrap()]), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a_states.csv")).unwrap(),
        fs::read(dir.path().join("b_states.csv")).unwrap()
    );
    let e = column(&a, 1);
    assert!((e[0] - 0.059_884).abs() < 1e-5);
}
