use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use isac_region::cli::{cmd_verify, Prepared, RunConfig, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY_FAILED};
use isac_region::linalg::{frobenius, CMatrix};
use isac_region::model::{ChannelKind, CustomChannel, GaussianPrior, SensingModel};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_isac");

fn config(name: &str) -> String {
    format!("{}/configs/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn isac(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn isac")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn parse_matrix_csv(text: &str) -> CMatrix {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let (m, cols) = (rows.len(), rows[0].len() / 2);
    CMatrix::from_fn(m, cols, |i, j| isac_region::linalg::c(rows[i][2 * j], rows[i][2 * j + 1]))
}

#[test]
fn scalar_region_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = isac(&["region", "--config", &config("scalar"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    let eps = report["eps_min"].as_f64().unwrap();
    assert!((eps - 1.0 / 21.0).abs() < 1e-12);
    assert_eq!(report["units"]["rate"], "bits per symbol");
    let r_max = report["r_max_bits"]["mean"].as_f64().unwrap();
    assert!((r_max - (1.0f64 + 1.0 / 0.01).log2()).abs() < 1e-12);
    for key in ["consistent", "appendix", "statement"] {
        assert!(report["r1_bits"]["by_form"][key].is_number());
    }
    for key in ["alpha", "beta", "zeta", "m_sc", "m_cs", "rank_sc"] {
        assert!(report["metrics"][key].is_number(), "{key}");
    }
    let csv = fs::read_to_string(out.join("region.csv")).unwrap();
    assert!(csv.starts_with("epsilon,rate_bits,label\n"));

    let echoed: RunConfig = serde_json::from_value(report["config"].clone()).unwrap();
    let original = RunConfig::load(Path::new(&config("scalar"))).unwrap();
    assert_eq!(echoed, original);
}

#[test]
fn config_echo_round_trips_awkward_floats() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("scalar"))
        .unwrap()
        .replace("\"sigma_c2\": 0.01", "\"sigma_c2\": 0.1234567890123456789e-3")
        .replace("\"p_t\": 1.0", "\"p_t\": 0.30000000000000004");
    let cfg_path = write_config(dir.path(), &text);
    let out = dir.path().join("r");
    assert!(isac(&["region", "--config", &cfg_path, "--out", out.to_str().unwrap()]).status.success());
    let echoed: RunConfig = serde_json::from_value(read_json(&out.join("report.json"))["config"].clone()).unwrap();
    assert_eq!(echoed, RunConfig::from_json(&text).unwrap());
}

#[test]
fn region_csv_identical_across_reruns_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "1", "3", "8"] {
        let out = dir.path().join(format!("w{}", outputs.len()));
        let o = isac(&["region", "--config", &config("rank_one"), "--out", out.to_str().unwrap(), "--workers", workers]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("region.csv")).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn short_block_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("isotropic")).unwrap().replace("\"t\": 16", "\"t\": 1");
    let o = isac(&["region", "--config", &write_config(dir.path(), &text), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&o.stderr).contains("T >= M"));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn malformed_config_names_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("scalar")).unwrap().replace("\"seed\": 1", "\"seed\": 1,\n  \"sed\": 2");
    let o = isac(&["solve-cov", "--config", &write_config(dir.path(), &text)]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sed") && err.contains("line"), "{err}");

    let missing = isac(&["region", "--config", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn solve_cov_isotropic_is_scaled_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = isac(&["solve-cov", "--config", &config("isotropic"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let r = parse_matrix_csv(&fs::read_to_string(out.join("r_opt.csv")).unwrap());
    assert!(frobenius(&(r - CMatrix::identity(2, 2))) <= 1e-6);
    let sol = read_json(&out.join("solution.json"));
    assert!(sol["rank"].as_u64().unwrap() <= sol["rank_bound"].as_u64().unwrap());
    for key in ["crb", "kkt_residual", "iterations"] {
        assert!(sol[key].is_number());
    }
    let again = dir.path().join("s2");
    isac(&["solve-cov", "--config", &config("isotropic"), "--out", again.to_str().unwrap()]);
    assert_eq!(fs::read(out.join("r_opt.csv")).unwrap(), fs::read(again.join("r_opt.csv")).unwrap());
}

#[test]
fn shc_manifest_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let o = isac(&["waveform", "--config", &config("angle_only"), "--out", dir.path().to_str().unwrap(), "--blocks", "6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = read_json(&dir.path().join("manifest.json"));
    let blocks = manifest["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 6);
    for b in blocks {
        assert!(b["identity_residual"].as_f64().unwrap() <= 1e-10);
        let x = parse_matrix_csv(&fs::read_to_string(dir.path().join(b["file"].as_str().unwrap())).unwrap());
        assert_eq!(x.shape(), (2, 8));
        let trace = (&x * x.adjoint()).trace().re / 8.0;
        assert!((trace - b["trace"].as_f64().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn gaussian_blocks_aggregate_to_waterfilling_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("angle_only")).unwrap().replace("\"t\": 8", "\"t\": 10000");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("g");
    let o = isac(&["waveform", "--config", &cfg, "--out", out.to_str().unwrap(), "--kind", "gaussian", "--blocks", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut acc = CMatrix::zeros(2, 2);
    for i in 0..10 {
        let x = parse_matrix_csv(&fs::read_to_string(out.join(format!("block_{i:04}.csv"))).unwrap());
        acc += &x * x.adjoint();
    }
    acc /= isac_region::linalg::c(1e5, 0.0);
    let prepared = RunConfig::from_json(&text).unwrap().prepare().unwrap();
    let h = match &prepared.comm {
        isac_region::model::CommChannelModel::Fixed(h) => h.clone(),
        _ => unreachable!(),
    };
    let r_cs = isac_region::comm::waterfill(&h, 2.0, 0.01).unwrap().r_cs;
    assert!(frobenius(&(acc - &r_cs)) <= 0.03 * frobenius(&r_cs));
}

#[test]
fn zero_blocks_gives_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = isac(&["waveform", "--config", &config("angle_only"), "--out", dir.path().to_str().unwrap(), "--blocks", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["blocks"].as_array().unwrap().len(), 0);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn unreachable_subspace_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    // a single-antenna receiver cannot see the full row space needed by the rank-one optimum
    let text = fs::read_to_string(config("angle_only"))
        .unwrap()
        .replace("\"n_c\": 2", "\"n_c\": 1")
        .replace(
            r#"{ "re": [[1.0, 0.2], [0.0, 0.8]], "im": [[0.0, 0.1], [0.3, 0.0]] }"#,
            r#"{ "re": [[1.0, 0.0]] }"#,
        );
    let o = isac(&["waveform", "--config", &write_config(dir.path(), &text), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_NUMERICAL), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row space"));
}

#[test]
fn verify_passes_on_builtins_with_timings() {
    for name in ["isotropic", "rank_one"] {
        let o = isac(&["verify", "--config", &config(name), "--verbose"]);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(o.status.code(), Some(0), "{stdout}");
        for check in ["jacobian-vs-fd", "gradient-vs-fd", "bfim-vs-direct", "jensen-gap", "rank-bound", "kkt-residual"] {
            assert!(stdout.contains(check), "{check}");
        }
        assert!(stdout.lines().skip(1).all(|l| l.trim_end().ends_with(" s)")));
    }
    let quiet = isac(&["verify", "--config", &config("scalar")]);
    assert!(!String::from_utf8_lossy(&quiet.stdout).contains(" s)"));
}

#[test]
fn corrupted_jacobian_fails_verify() {
    let base = SensingModel::rank_one_target(2, 2, [1.0, 0.0, 0.2], [0.2, 0.2, 0.05]).unwrap();
    let (map_model, jac_model) = (base.clone(), base.clone());
    let custom = CustomChannel {
        k: 3,
        map: Arc::new(move |eta| map_model.evaluate_channel(eta).unwrap()),
        jacobian: Some(Arc::new(move |eta| {
            let mut f = jac_model.jacobian(eta).unwrap();
            f.row_mut(2).scale_mut(1.01);
            f
        })),
    };
    let prior = GaussianPrior::new(vec![1.0, 0.0, 0.2], vec![0.2, 0.2, 0.05]).unwrap();
    let corrupted = SensingModel::new(2, 2, ChannelKind::Custom(custom), prior).unwrap();
    let mut prepared: Prepared = RunConfig::load(Path::new(&config("isotropic"))).unwrap().prepare().unwrap();
    prepared.config.verify.bfim_samples = 20_000;
    prepared.config.verify.bfim_tol = 0.5;
    prepared.sensing = corrupted;
    let mut log = Vec::new();
    let err = cmd_verify(&prepared, None, false, &mut log).unwrap_err();
    assert_eq!(err.code, EXIT_VERIFY_FAILED);
    let table = String::from_utf8(log).unwrap();
    let jac_line = table.lines().find(|l| l.starts_with("jacobian-vs-fd")).unwrap();
    assert!(jac_line.ends_with("FAIL"), "{table}");
}
