use std::ffi::{c_char, c_void, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hrsnn_ffi::*;

fn last_error() -> String {
    let p = hrsnn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> *mut HrsnnConfig {
    let text = CString::new("network.n = 30\nnetwork.n_readout = 4\ndata.n_per_class = 4\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { hrsnn_config_parse(text.as_ptr(), &mut cfg) }, HrsnnStatus::Ok);
    cfg
}

#[test]
fn numerics_match_closed_forms() {
    let x = [0.0, 1.0, 2.0];
    let y = [3.0, 4.0, 5.0];
    let mut d = 0.0;
    unsafe {
        assert_eq!(
            hrsnn_w2_1d(x.as_ptr(), ptr::null(), 3, y.as_ptr(), ptr::null(), 3, &mut d),
            HrsnnStatus::Ok
        );
        assert!((d - 3.0).abs() < 1e-12);
        assert_eq!(
            hrsnn_sliced_w2(x.as_ptr(), 3, y.as_ptr(), 3, 1, 8, 1, &mut d),
            HrsnnStatus::Ok
        );
        assert!((d - 3.0).abs() < 1e-12);
        let mut cost = 0.0;
        let st = hrsnn_sinkhorn(
            x.as_ptr(),
            ptr::null(),
            3,
            y.as_ptr(),
            ptr::null(),
            3,
            1,
            1e-2,
            10_000,
            1e-9,
            &mut cost,
        );
        assert_eq!(st, HrsnnStatus::Ok);
        assert!((cost - 9.0).abs() < 1e-2);
        let m = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let mut rank = 0;
        assert_eq!(hrsnn_effective_rank(m.as_ptr(), 2, 3, 0.99, &mut rank), HrsnnStatus::Ok);
        assert_eq!(rank, 2);
        let mut k = 0.0;
        assert_eq!(hrsnn_matern(0.0, 2.0, 1.0, 1.5, &mut k), HrsnnStatus::Ok);
        assert_eq!(k, 2.0);
        assert_eq!(hrsnn_matern(1.0, 1.0, 1.0, 0.5, &mut k), HrsnnStatus::Ok);
        assert!((k - (-1.0f64).exp()).abs() < 1e-12);
    }
    assert!((hrsnn_expected_improvement(0.0, 1.0, 0.0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-7);
}

#[test]
fn errors_are_reported() {
    let mut d = 0.0;
    unsafe {
        assert_eq!(
            hrsnn_w2_1d(ptr::null(), ptr::null(), 3, ptr::null(), ptr::null(), 1, &mut d),
            HrsnnStatus::NullPointer
        );
        assert!(last_error().contains("null"));
        let x = [1.0];
        let w = [-1.0];
        assert_eq!(
            hrsnn_w2_1d(x.as_ptr(), w.as_ptr(), 1, x.as_ptr(), ptr::null(), 1, &mut d),
            HrsnnStatus::InvalidArgument
        );
        let mut k = 0.0;
        assert_eq!(hrsnn_matern(1.0, -1.0, 1.0, 1.5, &mut k), HrsnnStatus::InvalidArgument);
        assert_eq!(
            hrsnn_effective_rank(x.as_ptr(), 1, 1, 0.9, ptr::null_mut()),
            HrsnnStatus::NullPointer
        );
    }
}

#[test]
fn config_round_trip_and_rejection() {
    let cfg = hrsnn_config_new();
    unsafe {
        let key = CString::new("network.lambda").unwrap();
        let good = CString::new("2.5").unwrap();
        let bad = CString::new("-1").unwrap();
        assert_eq!(hrsnn_config_set(cfg, key.as_ptr(), good.as_ptr()), HrsnnStatus::Ok);
        assert_eq!(hrsnn_config_set(cfg, key.as_ptr(), bad.as_ptr()), HrsnnStatus::Config);
        assert!(last_error().contains("network.lambda"));
        let mut text: *mut c_char = ptr::null_mut();
        assert_eq!(hrsnn_config_to_text(cfg, &mut text), HrsnnStatus::Ok);
        let s = CStr::from_ptr(text).to_str().unwrap().to_owned();
        assert!(s.contains("lambda = 2.5"));
        let mut again = ptr::null_mut();
        assert_eq!(hrsnn_config_parse(text, &mut again), HrsnnStatus::Ok);
        let mut text2: *mut c_char = ptr::null_mut();
        assert_eq!(hrsnn_config_to_text(again, &mut text2), HrsnnStatus::Ok);
        assert_eq!(CStr::from_ptr(text2).to_str().unwrap(), s);
        hrsnn_string_free(text);
        hrsnn_string_free(text2);
        hrsnn_config_free(again);
        hrsnn_config_free(cfg);
        hrsnn_config_free(ptr::null_mut());
    }
}

#[test]
fn network_trials_are_reproducible() {
    let cfg = small_config();
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(
            hrsnn_network_build(cfg, HrsnnVariant::HeNHeS, 5, 4, &mut net),
            HrsnnStatus::Ok
        );
        let n = hrsnn_network_n_readout(net);
        assert_eq!(n, 4);
        let neurons: Vec<u32> = (0..40).map(|k| k % 4).collect();
        let times: Vec<f64> = (0..40).map(|k| 1.0 + k as f64).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut report = HrsnnActivation::default();
        let run = |net, state: &mut [f64], report: *mut HrsnnActivation| {
            hrsnn_network_run_trial(
                net,
                neurons.as_ptr(),
                times.as_ptr(),
                40,
                60.0,
                1.0,
                false,
                state.as_mut_ptr(),
                state.len(),
                report,
            )
        };
        assert_eq!(run(net, &mut a, &mut report), HrsnnStatus::Ok);
        assert_eq!(run(net, &mut b, ptr::null_mut()), HrsnnStatus::Ok);
        assert_eq!(a, b);
        assert!(report.total_spikes > 0 || report.ac_ops > 0);
        let mut short = vec![0.0; 1];
        assert_eq!(run(net, &mut short, ptr::null_mut()), HrsnnStatus::BufferTooSmall);
        hrsnn_network_free(net);
        hrsnn_config_free(cfg);
    }
}

#[test]
fn pipeline_runs() {
    let cfg = small_config();
    let mut m = HrsnnMetrics::default();
    assert_eq!(
        unsafe { hrsnn_run_pipeline(cfg, HrsnnVariant::HoNHoS, 2, 1.0, &mut m) },
        HrsnnStatus::Ok
    );
    assert!((0.0..=1.0).contains(&m.accuracy));
    assert!(m.effective_rank >= 1);
    assert_eq!(
        unsafe { hrsnn_run_pipeline(cfg, HrsnnVariant::HoNHoS, 2, 0.0, &mut m) },
        HrsnnStatus::InvalidArgument
    );
    unsafe { hrsnn_config_free(cfg) };
}

unsafe extern "C" fn count_and_score(user: *mut c_void, json: *const c_char, score: *mut f64) -> i32 {
    let n = &mut *(user as *mut u32);
    *n += 1;
    let blob: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
    let lambda = blob["lambda"].as_f64().unwrap();
    if *n == 2 {
        return 1;
    }
    *score = -(lambda - 1.0).powi(2);
    0
}

#[test]
fn optimize_with_callback() {
    let cfg = small_config();
    let mut calls = 0u32;
    let mut best = f64::NAN;
    let mut json: *mut c_char = ptr::null_mut();
    unsafe {
        for (k, v) in [
            ("bo.n_init", "3"),
            ("bo.budget", "6"),
            ("bo.pool_size", "16"),
            ("bo.samples", "32"),
            ("bo.projections", "16"),
        ] {
            let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
            assert_eq!(hrsnn_config_set(cfg, k.as_ptr(), v.as_ptr()), HrsnnStatus::Ok);
        }
        let st = hrsnn_optimize(
            cfg,
            Some(count_and_score),
            &mut calls as *mut u32 as *mut c_void,
            &mut best,
            &mut json,
        );
        assert_eq!(st, HrsnnStatus::Ok, "{}", last_error());
        assert_eq!(calls, 6);
        assert!(best <= 0.0);
        let blob: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert!((-(blob["lambda"].as_f64().unwrap() - 1.0).powi(2) - best).abs() < 1e-12);
        hrsnn_string_free(json);
        assert_eq!(
            hrsnn_optimize(cfg, None, ptr::null_mut(), &mut best, ptr::null_mut()),
            HrsnnStatus::NullPointer
        );
        hrsnn_config_free(cfg);
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/hrsnn.h");
    assert!(header.exists(), "header not generated");
    let lib = target_dir().join("libhrsnn_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping C link check: no cc or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("after 4 calls"));
}
