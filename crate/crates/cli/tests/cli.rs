//! End-to-end tests of the `expmul` binary and the command layer: file
//! round-trips, error reporting, determinism, and the pinned accuracy
//! expectations for the exact kernels.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use tempfile::TempDir;

use expmul_cli::commands::{cmd_sweep, SweepOptions};
use expmul_cli::format::{decode, encode, write_tensor};
use expmul_cli::generate::{generate, GenSpec};
use expmul_core::floatbits::f32_from_bf16_bits;
use expmul_core::{
    attention_baseline_lazy, attention_flash2, compare, oracle_attention, Dtype, ExpMode, Tensor,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_expmul"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn expmul");
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("spawn expmul");
    assert!(!out.status.success(), "expected failure for {args:?}");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn gen_files(dir: &Path, seed: u64, dim: usize) -> (PathBuf, PathBuf, PathBuf) {
    let q = dir.join(format!("q{seed}_{dim}.atnt"));
    let k = dir.join(format!("k{seed}_{dim}.atnt"));
    let v = dir.join(format!("v{seed}_{dim}.atnt"));
    run_ok(&[
        "gen",
        "--dim",
        &dim.to_string(),
        "--seqlen",
        "64",
        "--queries",
        "8",
        "--seed",
        &seed.to_string(),
        "--q",
        q.to_str().unwrap(),
        "--k",
        k.to_str().unwrap(),
        "--v",
        v.to_str().unwrap(),
    ]);
    (q, k, v)
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    let (qa, ka, va) = gen_files(&a, 5, 16);
    let (qb, kb, vb) = gen_files(&b, 5, 16);
    for (x, y) in [(qa, qb), (ka, kb), (va, vb)] {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let (qc, _, _) = gen_files(&a, 6, 16);
    assert_ne!(
        std::fs::read(dir.path().join("a/q5_16.atnt")).unwrap(),
        std::fs::read(qc).unwrap()
    );
}

#[test]
fn run_emits_parseable_json() {
    let dir = TempDir::new().unwrap();
    let (q, k, v) = gen_files(dir.path(), 1, 16);
    let out = run_ok(&[
        "run",
        "--kernel",
        "flash2",
        "--no-timing",
        "--q",
        q.to_str().unwrap(),
        "--k",
        k.to_str().unwrap(),
        "--v",
        v.to_str().unwrap(),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["kernel"], "flash2");
    assert_eq!(value["dtype"], "fp32");
    assert_eq!(value["d"], 16);
    assert_eq!(value["N"], 64);
    assert!(value["max_abs_err"].as_f64().unwrap() < 1e-5);
}

#[test]
fn bad_magic_names_the_file() {
    let dir = TempDir::new().unwrap();
    let (q, k, v) = gen_files(dir.path(), 2, 16);
    std::fs::write(&k, b"XXXXjunkjunkjunkjunk").unwrap();
    let stderr = run_err(&[
        "run",
        "--kernel",
        "baseline",
        "--q",
        q.to_str().unwrap(),
        "--k",
        k.to_str().unwrap(),
        "--v",
        v.to_str().unwrap(),
    ]);
    assert!(
        stderr.contains(k.file_name().unwrap().to_str().unwrap()),
        "stderr: {stderr}"
    );
    assert!(stderr.contains("magic"), "stderr: {stderr}");
}

#[test]
fn shape_mismatch_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (q, _, _) = gen_files(dir.path(), 3, 8);
    let (_, k, v) = gen_files(dir.path(), 3, 16);
    let stderr = run_err(&[
        "run",
        "--kernel",
        "flash2",
        "--q",
        q.to_str().unwrap(),
        "--k",
        k.to_str().unwrap(),
        "--v",
        v.to_str().unwrap(),
    ]);
    assert!(stderr.contains("dimension"), "stderr: {stderr}");
}

#[test]
fn empty_sequence_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (q, _, _) = gen_files(dir.path(), 4, 16);
    let empty = Tensor::new(0, 16, Dtype::Fp32, vec![]).unwrap();
    let k = dir.path().join("k0.atnt");
    let v = dir.path().join("v0.atnt");
    write_tensor(&k, &empty).unwrap();
    write_tensor(&v, &empty).unwrap();
    let stderr = run_err(&[
        "run",
        "--kernel",
        "flash2-expmul",
        "--q",
        q.to_str().unwrap(),
        "--k",
        k.to_str().unwrap(),
        "--v",
        v.to_str().unwrap(),
    ]);
    assert!(stderr.contains("sequence length"), "stderr: {stderr}");
}

#[test]
fn compare_reports_identity_and_scaling() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.atnt");
    let b = dir.path().join("b.atnt");
    write_tensor(&a, &Tensor::new(1, 2, Dtype::Fp32, vec![2.0, 4.0]).unwrap()).unwrap();
    write_tensor(&b, &Tensor::new(1, 2, Dtype::Fp32, vec![1.0, 2.0]).unwrap()).unwrap();

    let out = run_ok(&["compare", a.to_str().unwrap(), a.to_str().unwrap()]);
    let value: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(value["max_abs_err"].as_f64().unwrap(), 0.0);
    assert_eq!(value["cosine_min"].as_f64().unwrap(), 1.0);

    let out = run_ok(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    let value: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(value["max_rel_err"].as_f64().unwrap(), 1.0);
    assert_eq!(value["cosine_min"].as_f64().unwrap(), 1.0);
}

#[test]
fn saved_output_round_trips_through_compare() {
    let dir = TempDir::new().unwrap();
    let (q, k, v) = gen_files(dir.path(), 8, 16);
    let saved = dir.path().join("out.atnt");
    run_ok(&[
        "run",
        "--kernel",
        "flash2-expmul",
        "--save",
        saved.to_str().unwrap(),
        "--q",
        q.to_str().unwrap(),
        "--k",
        k.to_str().unwrap(),
        "--v",
        v.to_str().unwrap(),
    ]);
    let out = run_ok(&["compare", saved.to_str().unwrap(), saved.to_str().unwrap()]);
    let value: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(value["max_abs_err"].as_f64().unwrap(), 0.0);
}

#[test]
fn scale_flag_changes_the_report() {
    let dir = TempDir::new().unwrap();
    let (q, k, v) = gen_files(dir.path(), 9, 64);
    let args = |scale: bool| {
        let mut a = vec!["run", "--kernel", "flash2", "--no-timing", "--out", "csv"];
        if scale {
            a.push("--scale");
        }
        a.extend_from_slice(&["--q", q.to_str().unwrap()]);
        a.extend_from_slice(&["--k", k.to_str().unwrap()]);
        a.extend_from_slice(&["--v", v.to_str().unwrap()]);
        a
    };
    let plain = run_ok(&args(false)).stdout;
    let scaled = run_ok(&args(true)).stdout;
    assert_ne!(plain, scaled);
}

// Accuracy expectations for the exact kernels on a pinned instance,
// frozen from the first reference run.
#[test]
fn exact_kernel_error_bounds_hold() {
    let spec = GenSpec {
        dtype: Dtype::Fp32,
        dim: 16,
        seqlen: 64,
        queries: 8,
        seed: 7,
        stress: false,
    };
    let (q, k, v) = generate(&spec);
    let reference = oracle_attention(&q, &k, &v).unwrap();
    let flash = attention_flash2(&q, &k, &v, ExpMode::Accurate).unwrap();
    let report = compare(&flash, &reference).unwrap();
    assert!(
        report.max_abs_err <= 1e-6,
        "fp32 flash2 max_abs {}",
        report.max_abs_err
    );

    let spec = GenSpec {
        dtype: Dtype::Bf16,
        ..spec
    };
    let (q, k, v) = generate(&spec);
    let reference = oracle_attention(&q, &k, &v).unwrap();
    let flash = attention_flash2(&q, &k, &v, ExpMode::Accurate).unwrap();
    let report = compare(&flash, &reference).unwrap();
    assert!(
        report.max_abs_err <= 2e-2,
        "bf16 flash2 max_abs {}",
        report.max_abs_err
    );
}

#[test]
fn baseline_single_key_is_exact() {
    let spec = GenSpec {
        dtype: Dtype::Fp32,
        dim: 16,
        seqlen: 1,
        queries: 8,
        seed: 10,
        stress: false,
    };
    let (q, k, v) = generate(&spec);
    let reference = oracle_attention(&q, &k, &v).unwrap();
    let out = attention_baseline_lazy(&q, &k, &v, ExpMode::Accurate).unwrap();
    let report = compare(&out, &reference).unwrap();
    assert_eq!(report.max_abs_err, 0.0);
}

// The fused kernel always loses more accuracy than the exact online kernel
// on the same data.
#[test]
fn sweep_orders_expmul_below_flash2() {
    let opts = SweepOptions {
        seqlen: 64,
        queries: 8,
        seed: 42,
        exp: ExpMode::Accurate,
        scale: false,
        stress: false,
        timing: false,
    };
    let table = cmd_sweep(&opts).unwrap();
    let mut flash2 = std::collections::HashMap::new();
    let mut fused = std::collections::HashMap::new();
    for line in table.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let key = (cells[1].to_string(), cells[2].to_string());
        let max_rel: f64 = cells[5].parse().unwrap();
        match cells[0] {
            "flash2" => {
                flash2.insert(key, max_rel);
            }
            "flash2-expmul" => {
                fused.insert(key, max_rel);
            }
            _ => {}
        }
    }
    assert_eq!(flash2.len(), 6);
    assert_eq!(fused.len(), 6);
    for (key, fused_err) in &fused {
        assert!(
            fused_err > &flash2[key],
            "expected fused error above exact at {key:?}: {fused_err} vs {}",
            flash2[key]
        );
    }
}

fn finite_f32() -> impl Strategy<Value = f32> {
    any::<u32>()
        .prop_map(f32::from_bits)
        .prop_filter("finite", |v| v.is_finite())
}

proptest! {
    #[test]
    fn tensor_files_round_trip_bit_exactly(
        rows in 1usize..5,
        cols in 1usize..5,
        seed_data in prop::collection::vec(finite_f32(), 25),
        bf16 in any::<bool>(),
    ) {
        let dtype = if bf16 { Dtype::Bf16 } else { Dtype::Fp32 };
        let data: Vec<f32> = seed_data
            .iter()
            .take(rows * cols)
            .map(|&v| if bf16 { f32_from_bf16_bits((v.to_bits() >> 16) as u16) } else { v })
            .collect();
        prop_assume!(data.iter().all(|v| v.is_finite()));
        let tensor = Tensor::new(rows, cols, dtype, data).unwrap();
        let back = decode(&encode(&tensor)).unwrap();
        prop_assert_eq!(back.rows(), tensor.rows());
        prop_assert_eq!(back.cols(), tensor.cols());
        prop_assert_eq!(back.dtype(), tensor.dtype());
        for (a, b) in back.data().iter().zip(tensor.data().iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
