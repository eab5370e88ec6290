//! The C ABI exercised from Rust, plus a syntax check of the generated header.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use fedprog::federation::{ModelUpdate, Stage};
use fedprog::nn::WeightSnapshot;
use fedprog_ffi::*;

fn last_error() -> String {
    let p = fedprog_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn encoded(id: &str, values: Vec<f64>) -> Vec<u8> {
    let n = values.len();
    ModelUpdate {
        client_id: id.into(),
        stage: Stage::Rul,
        snapshots: vec![WeightSnapshot::new(values, vec![(n, 1)]).unwrap()],
        sample_count: 3,
    }
    .encode()
}

#[test]
fn cost_functions_match_the_library() {
    let e = fedprog_economics_default();
    let (mut cost, mut preventive) = (0.0, false);
    let s = unsafe { fedprog_cost_rate(94, 100, &e, &mut cost, &mut preventive) };
    assert_eq!(s, FedprogStatus::Ok);
    assert_eq!((cost, preventive), (10.0 / 99.0, true));
    let s = unsafe { fedprog_cost_rate(-1, 100, &e, &mut cost, &mut preventive) };
    assert_eq!(s, FedprogStatus::Ok);
    assert_eq!((cost, preventive), (0.5, false));

    let mut unused = 0i64;
    assert_eq!(unsafe { fedprog_unused_life(94, 100, &e, &mut unused) }, FedprogStatus::Ok);
    assert_eq!(unused, -1);
    assert_eq!(unsafe { fedprog_unused_life(95, 100, &e, &mut unused) }, FedprogStatus::Contract);
    assert!(last_error().contains("preventive"));

    let mut days = 0u32;
    assert_eq!(unsafe { fedprog_unavailable_days(97, 100, &e, &mut days) }, FedprogStatus::Ok);
    assert_eq!(days, 4);
    assert!(fedprog_last_error_message().is_null());

    let fails = [200u32, 260, 300];
    let cands: Vec<u32> = (1..=300).collect();
    let mut t = 0u32;
    let s = unsafe {
        fedprog_optimal_periodic_trigger(fails.as_ptr(), fails.len(), cands.as_ptr(), cands.len(), &e, &mut t)
    };
    assert_eq!(s, FedprogStatus::Ok);
    let want = fedprog::policy::optimal_periodic_trigger(&fails, &cands, &e.into()).unwrap();
    assert_eq!(t, want);
}

#[test]
fn domain_and_null_errors_are_reported() {
    let e = fedprog_economics_default();
    let (mut cost, mut preventive) = (0.0, false);
    assert_eq!(unsafe { fedprog_cost_rate(3, 0, &e, &mut cost, &mut preventive) }, FedprogStatus::Domain);
    assert_eq!(
        unsafe { fedprog_cost_rate(3, 10, ptr::null(), &mut cost, &mut preventive) },
        FedprogStatus::NullPointer
    );
    assert!(last_error().contains("econ"));
}

#[test]
fn updates_round_trip_and_average() {
    let a = encoded("b", vec![1.0, 3.0]);
    let b = encoded("a", vec![3.0, 7.0]);
    let (mut ha, mut hb) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(fedprog_update_decode(a.as_ptr(), a.len(), &mut ha), FedprogStatus::Ok);
        assert_eq!(fedprog_update_decode(b.as_ptr(), b.len(), &mut hb), FedprogStatus::Ok);
        assert_eq!(CStr::from_ptr(fedprog_update_client_id(ha)).to_str().unwrap(), "b");
        assert_eq!(fedprog_update_snapshot_count(ha), 1);
        assert_eq!(fedprog_update_sample_count(ha), 3);

        let mut buf = FedprogBuffer { data: ptr::null_mut(), len: 0 };
        assert_eq!(fedprog_update_encode(ha, &mut buf), FedprogStatus::Ok);
        assert_eq!(std::slice::from_raw_parts(buf.data, buf.len), a.as_slice());
        fedprog_buffer_free(&mut buf);
        assert!(buf.data.is_null());

        let handles = [ha.cast_const(), hb.cast_const()];
        let mut avg = ptr::null_mut();
        assert_eq!(fedprog_fed_avg(handles.as_ptr(), 2, &mut avg), FedprogStatus::Ok);
        let (mut values, mut len) = (ptr::null(), 0usize);
        assert_eq!(fedprog_update_values(avg, 0, &mut values, &mut len), FedprogStatus::Ok);
        assert_eq!(std::slice::from_raw_parts(values, len), &[2.0, 5.0]);
        assert_eq!(CStr::from_ptr(fedprog_update_client_id(avg)).to_str().unwrap(), "a");
        assert_eq!(fedprog_update_values(avg, 1, &mut values, &mut len), FedprogStatus::NotFound);

        fedprog_update_free(avg);
        fedprog_update_free(ha);
        fedprog_update_free(hb);
        fedprog_update_free(ptr::null_mut());
    }
}

#[test]
fn malformed_updates_are_parse_errors() {
    let bytes = encoded("x", vec![1.0]);
    let mut h = ptr::null_mut();
    let s = unsafe { fedprog_update_decode(bytes.as_ptr(), bytes.len() - 2, &mut h) };
    assert_eq!(s, FedprogStatus::Parse);
    assert!(h.is_null());
    let mut avg = ptr::null_mut();
    assert_eq!(unsafe { fedprog_fed_avg(ptr::null(), 0, &mut avg) }, FedprogStatus::Contract);
}

#[test]
fn experiment_runs_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        "[data.synthetic]\nbatteries = 6\nmax_cycles = 150\n\
         [federation]\nrounds_autoencoder = 2\nrounds_rul = 3\nclients_per_round = 2\n\
         [experiment]\nvariants = [\"fully-federated\"]\n",
    )
    .unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let mut x = ptr::null_mut();
    unsafe {
        assert_eq!(fedprog_experiment_run(path.as_ptr(), &mut x), FedprogStatus::Ok, "{}", last_error());
        let (mut periodic, mut ff) = (0.0, 0.0);
        assert_eq!(fedprog_experiment_periodic_cost_rate(x, &mut periodic), FedprogStatus::Ok);
        let name = CString::new("fully-federated").unwrap();
        assert_eq!(fedprog_experiment_cost_rate(x, name.as_ptr(), &mut ff), FedprogStatus::Ok);
        assert!(periodic > 0.0 && ff > 0.0);
        let other = CString::new("fl-no-autoencoder").unwrap();
        assert_eq!(fedprog_experiment_cost_rate(x, other.as_ptr(), &mut ff), FedprogStatus::NotFound);
        let bad = CString::new("nonsense").unwrap();
        assert_eq!(fedprog_experiment_cost_rate(x, bad.as_ptr(), &mut ff), FedprogStatus::Config);

        let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
        assert_eq!(fedprog_experiment_write(x, out.as_ptr()), FedprogStatus::Ok);
        assert!(dir.path().join("out/comparison.csv").is_file());
        fedprog_experiment_free(x);
    }
    let missing = CString::new(dir.path().join("absent.toml").to_str().unwrap()).unwrap();
    let mut y = ptr::null_mut();
    assert_eq!(unsafe { fedprog_experiment_run(missing.as_ptr(), &mut y) }, FedprogStatus::Io);
    assert!(last_error().contains("absent.toml"));
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(fedprog_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fedprog.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["fedprog_cost_rate", "fedprog_fed_avg", "FedprogUpdate", "FEDPROG_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler available; skipped the syntax check");
        return;
    };
    assert!(status.success());
}
