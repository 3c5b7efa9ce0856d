use std::fs;
use std::process::Command;

fn wfres() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wfres"))
}

#[test]
fn list_recipes_covers_every_probe() {
    let out = wfres().arg("list-recipes").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "free-wf-offset",
        "reference-wf-decay",
        "free-wf-onset",
        "free-kernel-oracle",
        "ik-weighted",
        "one-sided-outgoing",
        "propagation-offset",
        "local-decay",
        "escape-ladder",
        "calculus-invariants",
    ] {
        assert!(text.contains(name), "{name} missing");
    }
    assert!(text.matches("claim:").count() >= 8);
}

#[test]
fn free_wf_offset_recipe_passes() {
    let dir = tempfile::tempdir().unwrap();
    let st = wfres()
        .args(["run", "free-wf-offset", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert!(m["metrics"]["slope"].as_f64().unwrap() >= 3.0);
    assert_eq!(m["config"]["numerics"]["seed"], 0x5EED);
}

#[test]
fn schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "[probe]\nkind = \"one-sided\"\nbranch = \"plus\"\ngamma = -0.4\nnu = 3.0\ns = 2.5\n",
    )
    .unwrap();
    let out = wfres().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nu - 1"));

    fs::write(&bad, "[model]\ndim = 1\n").unwrap();
    assert_eq!(
        wfres().arg("run").arg(&bad).status().unwrap().code(),
        Some(2)
    );

    fs::write(&bad, "[probe]\nkind = \"invariants\"\nunexpected = 1\n").unwrap();
    assert_eq!(
        wfres().arg("run").arg(&bad).status().unwrap().code(),
        Some(2)
    );
}

#[test]
fn numerical_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ld.toml");
    // t_max far past the reflection window of a radius-64 box
    fs::write(
        &cfg,
        format!(
            "[probe]\nkind = \"local-decay\"\neps_f = 0.2\nnu = 3.0\nt_min = 10.0\nt_max = 5000.0\npoints = 16\nradius = 64\n\n[output]\ndir = \"{}\"\n",
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    assert_eq!(
        wfres().arg("run").arg(&cfg).status().unwrap().code(),
        Some(3)
    );
}

#[test]
fn failing_criterion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[probe]\nkind = \"t-splitting\"\nslope_prop = 4.0\nkappa = 2.0\nnu = 3.0\nm = 1.0\n\n[[criteria]]\nmetric = \"exponent_at_m\"\nop = \">=\"\nvalue = 1.0\n",
    )
    .unwrap();
    let out = wfres()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (d, jobs) in [(&a, "1"), (&b, "4")] {
        let st = wfres()
            .args(["run", "reference-wf-decay", "--jobs", jobs, "--out"])
            .arg(d)
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
    }
    let ca = fs::read_to_string(a.join("results.csv")).unwrap();
    let cb = fs::read_to_string(b.join("results.csv")).unwrap();
    assert_eq!(ca, cb);
    assert!(ca.starts_with("h,epsilon,norm,iterations\n"));
}
