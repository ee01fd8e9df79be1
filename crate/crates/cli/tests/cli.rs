use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo").join(name)
}

fn cepsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cepsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn cepsim")
}

fn ok(args: &[&str], out: &Path) {
    let o = cepsim(args, out);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

#[test]
fn estimate_recovers_demo_price_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let (input, schema, spec) = (demo("prices.csv"), demo("prices.schema"), demo("price_model.toml"));
    ok(
        &["estimate", "--input", input.to_str().unwrap(), "--schema", schema.to_str().unwrap(), "--spec", spec.to_str().unwrap()],
        dir.path(),
    );
    let fit = json(dir.path().join("fit.json"));
    let truth = json(demo("price_truth.json"));
    let countries: Vec<&str> = truth["countries"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let (mut total, mut outside) = (0, 0);
    for (var, slopes) in truth["slopes"].as_object().unwrap() {
        for (c, b) in countries.iter().zip(slopes.as_array().unwrap()) {
            let coef = &fit["coefficients"][format!("{var}[{c}]")];
            let z = (coef["estimate"].as_f64().unwrap() - b.as_f64().unwrap()) / coef["std_error"].as_f64().unwrap();
            assert!(z.abs() < 4.0, "{var}[{c}] is {z:.2} SE from truth");
            total += 1;
            outside += usize::from(z.abs() > 3.0);
        }
    }
    assert_eq!(total, 60);
    assert!(outside <= 3, "{outside} of {total} slopes beyond 3 SE");
    let table = fs::read_to_string(dir.path().join("table_1.txt")).unwrap();
    assert!(table.contains("Fixed S Effects") && table.contains("AR(24)") && table.contains("Hausman Test"));
}

#[test]
fn scenario_b_matches_lognormal_quantiles() {
    let dir = tempfile::tempdir().unwrap();
    let (input, schema) = (demo("annual.csv"), demo("annual.schema"));
    let (input, schema) = (input.to_str().unwrap(), schema.to_str().unwrap());
    ok(&["models", "--input", input, "--schema", schema], dir.path());
    let models = json(dir.path().join("models.json"));
    ok(&["scenario", "--input", input, "--schema", schema, "--name", "B", "--paths", "100000", "--seed", "11"], dir.path());
    let out = json(dir.path().join("scenario_compliance.json"));
    let panel = &out["panels"][0];
    assert_eq!(panel["scenario"], "B");

    // Drift-only growth: log GHG at h years ahead is normal with mean
    // log L0 + h d and sd sigma sqrt(h).
    let z = [(0.01, -2.326_347_874_040_840_8, 0.05), (0.5, 0.0, 0.02)];
    let mut checked = 0;
    for s in panel["summaries"].as_array().unwrap() {
        let c = s["country"].as_str().unwrap();
        let coef = &models["growth"]["coefficients"][c];
        let start = &models["growth"]["start_levels"][c];
        let h = s["horizon"].as_str().unwrap().parse::<f64>().unwrap() - start["year"].as_f64().unwrap();
        let drift = coef["beta0"].as_f64().unwrap()
            + coef["beta1"].as_f64().unwrap() * (1.0f64 - 0.02).ln()
            + coef["beta2"].as_f64().unwrap() * (1.0f64 + 0.02).ln();
        let sd = coef["sigma"].as_f64().unwrap() * h.sqrt();
        let mean = start["level"].as_f64().unwrap().ln() + h * drift;
        for (q, zq, tol) in z {
            let got = s["quantiles"].as_array().unwrap().iter().find(|p| p[0].as_f64() == Some(q)).unwrap()[1].as_f64().unwrap();
            let zhat = (got.ln() - mean) / sd;
            assert!((zhat - zq).abs() < tol, "{c} {h} Q({q}): z {zhat} vs {zq}");
            checked += 1;
        }
    }
    assert_eq!(checked, 40);
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (input, schema) = (demo("annual.csv"), demo("annual.schema"));
    let base = ["forecast", "--input", input.to_str().unwrap(), "--schema", schema.to_str().unwrap(), "--paths", "20000", "--seed", "7"];
    ok(&[&base[..], &["--workers", "1"]].concat(), a.path());
    ok(&[&base[..], &["--workers", "4"]].concat(), b.path());
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in names {
        let (x, y) = (fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn errors_report_class_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (input, schema) = (demo("annual.csv"), demo("annual.schema"));
    let (input, schema) = (input.to_str().unwrap(), schema.to_str().unwrap());

    let o = cepsim(&["forecast", "--input", input, "--schema", schema], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "input_error");
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    // SUR on the yearly panel: 9 periods for 10 countries.
    let spec = dir.path().join("sur.toml");
    fs::write(
        &spec,
        "[model]\ndependent = \"GHG\"\nfixed_effects = [\"country\"]\nweighting = \"cross_section_sur\"\n\n\
         [[model.regressors]]\nname = \"CONSM\"\nscope = \"pooled\"\n",
    )
    .unwrap();
    let o = cepsim(&["estimate", "--input", input, "--schema", schema, "--spec", spec.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "numerical_failure");

    let wedge = fs::read_to_string(demo("wedge_model.toml")).unwrap().replace("two_step = true", "max_iter = 1");
    fs::write(&spec, wedge).unwrap();
    let (w_in, w_schema) = (demo("wedge.csv"), demo("wedge.schema"));
    let o = cepsim(
        &["estimate", "--input", w_in.to_str().unwrap(), "--schema", w_schema.to_str().unwrap(), "--spec", spec.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "non_convergence");

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "country,period,variable,value\nAU,2008,GHG,abc\n").unwrap();
    let o = cepsim(&["ingest", "--input", bad.to_str().unwrap(), "--schema", schema], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("manifest.json").exists());
}
