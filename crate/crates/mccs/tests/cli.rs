use std::path::{Path, PathBuf};
use std::process::Command;

use mccs::commands::*;
use mccs::config::*;
use mccs::formats;
use mccs_core::sensing::{gen_matrix, SensingConfig};
use mccs_core::{KeyChain, Seed};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mccs"))
}

fn keygen(dir: &Path, w: usize, seed: u64) -> PathBuf {
    cmd_keygen(&KeygenConfig { w, master_seed: seed }, dir).unwrap()
}

fn scheme(m: usize, n: usize, etas: Vec<f64>) -> SchemeConfig {
    SchemeConfig {
        m,
        n,
        etas,
        scaled: false,
    }
}

fn synthetic(frames: usize, k: usize) -> SignalSource {
    SignalSource::Synthetic {
        frames,
        k,
        basis: BasisSpec::Dct,
        law: Law::Gaussian,
        energy: None,
        seed: 9,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) {
    std::fs::write(path, serde_json::to_string(v).unwrap()).unwrap();
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn keygen_shapes_and_prefix() {
    let d = tempfile::tempdir().unwrap();
    let one = formats::read_key(&keygen(&d.path().join("a"), 1, 5)).unwrap();
    assert!(one.flip_seeds().is_empty());
    let three = formats::read_key(&keygen(&d.path().join("b"), 3, 5)).unwrap();
    assert_eq!(three.flip_seeds().len(), 2);
    let two = formats::read_key(&keygen(&d.path().join("c"), 2, 5)).unwrap();
    assert_eq!(three.for_class(1).unwrap(), two);
    assert_eq!(one.matrix_seed(), three.matrix_seed());
}

#[test]
fn keygen_is_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let a = std::fs::read(keygen(&d.path().join("a"), 3, 42)).unwrap();
    let b = std::fs::read(keygen(&d.path().join("b"), 3, 42)).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["w"], 3);
    assert!(v["matrix_seed"].is_string());
    assert_eq!(v["flip_seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn key_file_rejects_inconsistent_w() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("k.json");
    std::fs::write(&p, r#"{"w": 3, "matrix_seed": "1", "flip_seeds": ["2"]}"#).unwrap();
    let e = formats::read_key(&p).unwrap_err();
    assert_eq!(e.exit_code(), 4);
    std::fs::write(&p, r#"{"w": 1, "matrix_seed": "-1", "flip_seeds": []}"#).unwrap();
    assert!(formats::read_key(&p).is_err());
}

#[test]
fn golden_matrix_two_by_two() {
    let keys = KeyChain::new(Seed(0), vec![]);
    let cfg = SensingConfig::new(2, 2, vec![]).unwrap();
    let a = gen_matrix(&keys, &cfg, 0, 0).unwrap();
    let bytes = formats::matrix_bytes(&a).unwrap();
    let mut expect = Vec::new();
    for v in [2u32, 2, 0, 0] {
        expect.extend_from_slice(&v.to_le_bytes());
    }
    expect.push(0b1110_0000);
    assert_eq!(bytes, expect);
    assert_eq!(formats::parse_matrix(&bytes).unwrap(), a);
}

#[test]
fn golden_matrix_round_trip() {
    let keys = KeyChain::derive(Seed(3), 3).unwrap();
    let cfg = SensingConfig::new(7, 13, vec![0.1, 0.2]).unwrap();
    let a = gen_matrix(&keys, &cfg, 2, 5).unwrap();
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("m.bin");
    formats::write_matrix(&p, &a).unwrap();
    assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 + 91u64.div_ceil(8));
    assert_eq!(formats::read_matrix(&p).unwrap(), a);
    assert!(formats::parse_matrix(&[0; 10]).is_err());
    let mut bad = formats::matrix_bytes(&a).unwrap();
    bad.pop();
    assert!(formats::parse_matrix(&bad).is_err());
}

#[test]
fn zero_corpus_gives_zero_measurements() {
    let d = tempfile::tempdir().unwrap();
    let key = keygen(d.path(), 2, 1);
    let corpus = d.path().join("sig.csv");
    std::fs::write(&corpus, "0\n".repeat(64)).unwrap();
    let cfg = EncodeConfig {
        key,
        scheme: scheme(8, 32, vec![0.05]),
        source: SignalSource::Corpus { path: corpus },
        write_matrices: true,
    };
    let s = cmd_encode(&cfg, d.path()).unwrap();
    assert_eq!(s.frames, 2);
    assert_eq!(s.class, 1);
    let rows = formats::read_frames(&s.measurements).unwrap();
    assert!(rows.iter().all(|(_, y)| y.len() == 8 && y.iter().all(|&v| v == 0.0)));
    let golden = formats::read_matrix(&d.path().join("matrices/frame_1.bin")).unwrap();
    assert_eq!((golden.rows(), golden.cols(), golden.class_level(), golden.frame_index()), (8, 32, 1, 1));
}

#[test]
fn outputs_echo_config_and_version() {
    let d = tempfile::tempdir().unwrap();
    let key = keygen(d.path(), 2, 1);
    let cfg = EncodeConfig {
        key,
        scheme: scheme(8, 32, vec![0.05]),
        source: synthetic(2, 2),
        write_matrices: false,
    };
    let s = cmd_encode(&cfg, d.path()).unwrap();
    let text = std::fs::read_to_string(&s.measurements).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# tool: {}", formats::TOOL));
    let echoed: EncodeConfig = serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(echoed, cfg);
    assert!(lines.next().unwrap().starts_with("frame_index,y_0,"));
}

struct RoundTrip {
    _dir: tempfile::TempDir,
    decode: DecodeConfig,
    out: PathBuf,
}

fn round_trip(eta: f64, frames: usize) -> RoundTrip {
    let d = tempfile::tempdir().unwrap();
    let key = keygen(d.path(), 2, 11);
    let enc = EncodeConfig {
        key: key.clone(),
        scheme: scheme(64, 128, vec![eta]),
        source: synthetic(frames, 5),
        write_matrices: false,
    };
    let s = cmd_encode(&enc, d.path()).unwrap();
    let decode = DecodeConfig {
        key,
        measurements: s.measurements,
        scheme: scheme(64, 128, vec![eta]),
        basis: BasisSpec::Dct,
        class: None,
        solver: Solver::Bpdn,
        gamma: GammaSpec::Value(0.0),
        k: Some(5),
        ground_truth: Some(s.plaintexts),
    };
    let out = d.path().join("dec");
    RoundTrip { _dir: d, decode, out }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn top_class_round_trip_is_exact() {
    let rt = round_trip(0.05, 8);
    let rows = cmd_decode(&rt.decode, &rt.out).unwrap();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert_eq!(r.class, 1);
        assert_eq!(r.eta, 0.0);
        assert!(r.rsnr_db.unwrap() > 80.0, "{r:?}");
    }
}

#[test]
fn lower_class_loses_at_least_20_db() {
    let rt = round_trip(0.05, 12);
    let hi = cmd_decode(&rt.decode, &rt.out).unwrap();
    let mut low = rt.decode.clone();
    low.class = Some(0);
    low.gamma = GammaSpec::Named(GammaName::Genie);
    let lo = cmd_decode(&low, &rt.out).unwrap();
    assert!(lo.iter().all(|r| r.class == 0 && (r.eta - 0.05).abs() < 1e-15));
    let mh = median(hi.iter().map(|r| r.rsnr_db.unwrap()).collect());
    let ml = median(lo.iter().map(|r| r.rsnr_db.unwrap()).collect());
    assert!(mh - ml >= 20.0, "{mh} vs {ml}");
}

#[test]
fn cosamp_rows_and_missing_truth() {
    let rt = round_trip(0.05, 3);
    let mut cfg = rt.decode.clone();
    cfg.solver = Solver::Cosamp;
    cfg.ground_truth = None;
    let rows = cmd_decode(&cfg, &rt.out).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.rsnr_db.is_none()));
    let lines = data_lines(&rt.out.join(RESULTS_FILE));
    assert_eq!(lines[0], "frame_index,class,eta,rsnr_db,iterations,residual,converged");
    assert_eq!(lines[1].split(',').nth(3), Some(""));

    cfg.k = None;
    assert_eq!(cmd_decode(&cfg, &rt.out).unwrap_err().exit_code(), 2);
    cfg.solver = Solver::Bpdn;
    cfg.gamma = GammaSpec::Named(GammaName::Genie);
    assert_eq!(cmd_decode(&cfg, &rt.out).unwrap_err().exit_code(), 2);
}

#[test]
fn class_above_key_is_a_key_deficit() {
    let rt = round_trip(0.05, 1);
    let mut cfg = rt.decode.clone();
    cfg.class = Some(2);
    let e = cmd_decode(&cfg, &rt.out).unwrap_err();
    assert!(matches!(e, mccs::CliError::Core(mccs_core::Error::KeyDeficit { .. })), "{e}");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn decode_rejects_wrong_m() {
    let rt = round_trip(0.05, 1);
    let mut cfg = rt.decode.clone();
    cfg.scheme.m = 63;
    assert_eq!(cmd_decode(&cfg, &rt.out).unwrap_err().exit_code(), 2);
}

#[test]
fn scaled_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let key = keygen(d.path(), 1, 4);
    let mut sc = scheme(40, 64, vec![]);
    sc.scaled = true;
    let enc = EncodeConfig {
        key: key.clone(),
        scheme: sc.clone(),
        source: synthetic(2, 3),
        write_matrices: false,
    };
    let s = cmd_encode(&enc, d.path()).unwrap();
    let rows = cmd_decode(
        &DecodeConfig {
            key,
            measurements: s.measurements,
            scheme: sc,
            basis: BasisSpec::Dct,
            class: None,
            solver: Solver::Bpdn,
            gamma: GammaSpec::Value(0.0),
            k: None,
            ground_truth: Some(s.plaintexts),
        },
        d.path(),
    )
    .unwrap();
    assert!(rows.iter().all(|r| r.rsnr_db.unwrap() > 80.0));
}

#[test]
fn bounds_single_and_monotone() {
    let d = tempfile::tempdir().unwrap();
    let mut cfg = BoundsConfig {
        m: 32,
        n: 64,
        etas: vec![0.05],
        theta: 0.5,
        energy: 1.0,
        lb_trials: 100,
        k: None,
        ric_trials: 100,
        basis: BasisSpec::Identity,
        seed: 1,
    };
    assert_eq!(cmd_bounds(&cfg, d.path()).unwrap().len(), 1);
    assert_eq!(data_lines(&d.path().join(BOUNDS_FILE)).len(), 2);
    cfg.etas = (1..=10).map(|i| i as f64 / 100.0).collect();
    let rows = cmd_bounds(&cfg, d.path()).unwrap();
    assert!(rows.windows(2).all(|w| w[1].ub_arsnr_db < w[0].ub_arsnr_db));
    let header = &data_lines(&d.path().join(BOUNDS_FILE))[0];
    assert!(header.starts_with("eta,lb_arsnr_db,ub_arsnr_db,zeta,theorem1_lb,ub_applicable,ub_value"));
    cfg.etas.clear();
    assert_eq!(cmd_bounds(&cfg, d.path()).unwrap_err().exit_code(), 2);
}

#[test]
fn proposition1_inapplicable_above_threshold() {
    let d = tempfile::tempdir().unwrap();
    let cfg = BoundsConfig {
        m: 512,
        n: 1024,
        etas: vec![0.01, 0.02],
        theta: 0.5,
        energy: 1.0,
        lb_trials: 0,
        k: Some(16),
        ric_trials: 100,
        basis: BasisSpec::Random { seed: 2 },
        seed: 1,
    };
    let rows = cmd_bounds(&cfg, d.path()).unwrap();
    assert!(rows.iter().all(|r| r.proposition1.is_none() && r.eps_k > 0.189));
    let lines = data_lines(&d.path().join(BOUNDS_FILE));
    assert!(lines[1..].iter().all(|l| l.split(',').nth(5) == Some("false")));
}

#[test]
fn attack_report_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = AttackConfig {
        e1: 1.0,
        e2: 4.0,
        n: 32,
        chi: 1000,
        pairs: 20,
        seed: 5,
    };
    let r = cmd_attack(&cfg, &d.path().join("a")).unwrap();
    cmd_attack(&cfg, &d.path().join("b")).unwrap();
    let a = std::fs::read(d.path().join("a").join(ATTACK_FILE)).unwrap();
    let b = std::fs::read(d.path().join("b").join(ATTACK_FILE)).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["P"], 20);
    assert_eq!(v["p_values"].as_array().unwrap().len(), 20);
    assert_eq!(v["verdict"], "distinguishable");
    assert_eq!(v["second_level_p"].as_f64().unwrap(), r.second_level_p);
    assert_eq!(v["tool"], formats::TOOL);
    assert_eq!(v["config"]["chi"], 1000);
}

#[test]
fn convergence_single_n() {
    let d = tempfile::tempdir().unwrap();
    let cfg = ConvergenceConfig {
        n_grid: vec![16],
        plaintexts: 4,
        rows: 10_000,
        rhos: vec![0.5, 0.1, 0.001],
        seed: 2,
    };
    let r = cmd_convergence(&cfg, d.path()).unwrap();
    assert!(r.slope.is_none());
    assert!(r.c_rho.windows(2).all(|w| w[1].1 >= w[0].1));
    let lines = data_lines(&d.path().join(CONVERGENCE_FILE));
    assert_eq!(lines[0], "n,plaintext_id,deviation");
    assert_eq!(lines.len(), 5);
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.path().join(CONVERGENCE_SUMMARY)).unwrap()).unwrap();
    assert!(v["slope"].is_null());
    assert_eq!(v["estimates"][2]["rho"], 0.001);
    assert!(v["estimates"][0]["C_rho"].as_f64().unwrap() > 0.0);
}

#[test]
fn gaussianity_from_signal_file() {
    let d = tempfile::tempdir().unwrap();
    let sig = d.path().join("x.csv");
    std::fs::write(&sig, "1\n0\n0\n0\n").unwrap();
    let cfg = GaussianityConfig {
        n: None,
        signal: Some(sig),
        energy: 1.0,
        chi: 10_000,
        seed: 0,
    };
    let ks = cmd_gaussianity(&cfg, d.path()).unwrap();
    assert!(ks.p_value < 1e-6);
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.path().join(GAUSSIANITY_FILE)).unwrap()).unwrap();
    assert_eq!(v["n"], 4);
}

#[test]
fn ric_rows_cover_grid() {
    let d = tempfile::tempdir().unwrap();
    let cfg = RicConfig {
        m: 32,
        n: 64,
        etas: vec![0.001, 0.2],
        ks: vec![1, 2],
        trials: 100,
        basis: BasisSpec::Dct,
        seed: 3,
    };
    let rows = cmd_ric(&cfg, d.path()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[3].eps_k > rows[1].eps_k);
    assert_eq!(data_lines(&d.path().join(RIC_FILE)).len(), 5);
}

#[test]
fn basis_file_must_be_orthonormal() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("b.csv");
    std::fs::write(&p, "1,0\n0,1\n").unwrap();
    assert_eq!(BasisSpec::File { path: p.clone() }.build(2).unwrap().dim(), 2);
    std::fs::write(&p, "1,0\n0,2\n").unwrap();
    assert_eq!(BasisSpec::File { path: p.clone() }.build(2).unwrap_err().exit_code(), 3);
    std::fs::write(&p, "1,0\n").unwrap();
    assert_eq!(BasisSpec::File { path: p }.build(2).unwrap_err().exit_code(), 4);
}

#[test]
fn binary_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let st = bin().args(["encode", "--out"]).arg(d.path()).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let st = bin().args(["attack", "--config"]).arg(d.path().join("nope.json")).status().unwrap();
    assert_eq!(st.code(), Some(4));

    let bad = d.path().join("bad.json");
    std::fs::write(&bad, r#"{"e1": 1.0}"#).unwrap();
    let st = bin().args(["attack", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let st = bin().args(["frobnicate"]).status().unwrap();
    assert_eq!(st.code(), Some(2));

    // an orthonormality failure is numeric
    let b = d.path().join("b.csv");
    std::fs::write(&b, "1,0\n0,2\n").unwrap();
    let cfg = d.path().join("ric.json");
    write_json(
        &cfg,
        &serde_json::json!({"m": 2, "n": 2, "etas": [0.1], "ks": [1], "basis": {"kind": "file", "path": b}}),
    );
    let st = bin().args(["ric", "--config"]).arg(&cfg).arg("--out").arg(d.path()).status().unwrap();
    assert_eq!(st.code(), Some(3));
}

#[test]
fn binary_keygen_and_encode() {
    let d = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["keygen", "--w", "3", "--seed", "8", "--out"])
        .arg(d.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let keys = formats::read_key(&d.path().join(KEY_FILE)).unwrap();
    assert_eq!(keys, KeyChain::derive(Seed(8), 3).unwrap());

    let cfg = d.path().join("enc.json");
    write_json(
        &cfg,
        &serde_json::json!({
            "key": d.path().join(KEY_FILE),
            "scheme": {"m": 16, "n": 32, "etas": [0.1, 0.1]},
            "source": {"kind": "synthetic", "frames": 3, "k": 2}
        }),
    );
    let out = bin()
        .args(["encode", "--scaled", "--seed", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(d.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.path().join(MEASUREMENTS_FILE)).unwrap();
    assert!(text.contains("\"scaled\":true") && text.contains("\"seed\":4"));
    assert_eq!(formats::read_frames(&d.path().join(MEASUREMENTS_FILE)).unwrap().len(), 3);
}
