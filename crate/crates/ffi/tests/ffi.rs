use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use robprec_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { rp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn data(values: &[f64], n: usize, p: usize) -> *mut RpData {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { rp_data_new(values.as_ptr(), n, p, &mut h) }, RpStatus::Ok);
    h
}

fn pipeline(scale: &str, psd: &str) -> *mut RpPipeline {
    let (s, q) = (CString::new(scale).unwrap(), CString::new(psd).unwrap());
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { rp_pipeline_new(s.as_ptr(), q.as_ptr(), &mut h) }, RpStatus::Ok);
    h
}

fn sample(n: usize, p: usize) -> Vec<f64> {
    // Deterministic, well-spread values without pulling in an RNG.
    (0..n * p).map(|k| ((k as f64 * 0.618_033_988_75).fract() - 0.5) * 4.0).collect()
}

#[test]
fn estimate_matches_rust_pipeline() {
    let (n, p) = (60, 4);
    let x = sample(n, p);
    let d = data(&x, n, p);
    let pl = pipeline("qn", "npd");
    let mut est = ptr::null_mut();
    assert_eq!(unsafe { rp_estimate(pl, d, 0.1, &mut est) }, RpStatus::Ok);
    assert_eq!(unsafe { rp_estimate_dim(est) }, p);

    let mut theta = vec![0.0; p * p];
    assert_eq!(unsafe { rp_estimate_precision(est, theta.as_mut_ptr(), theta.len()) }, RpStatus::Ok);
    let mut diag = RpDiagnostics {
        lambda: 0.0,
        iterations: 0,
        kkt_residual: 0.0,
        min_eigenvalue: 0.0,
        edge_count: 0,
        converged: 0,
    };
    assert_eq!(unsafe { rp_estimate_diagnostics(est, &mut diag) }, RpStatus::Ok);

    let direct = robprec::PipelineSpec::robust(
        robprec::ScaleKind::Qn,
        robprec::PsdMethod::npd(),
        robprec::LambdaPolicy::Fixed(0.1),
    )
    .estimate(&robprec::DataMatrix::from_row_major(n, p, &x).unwrap(), 0.1)
    .unwrap();
    for i in 0..p {
        for j in 0..p {
            assert_eq!(theta[i * p + j], direct.theta[(i, j)]);
        }
    }
    assert_eq!(diag.converged, 1);
    assert_eq!(diag.lambda, 0.1);
    assert_eq!(diag.iterations, direct.outer_iters);
    assert!(diag.kkt_residual <= 1e-4);
    assert!(diag.min_eigenvalue > 0.0);

    let mut small = vec![0.0; p];
    assert_eq!(
        unsafe { rp_estimate_precision(est, small.as_mut_ptr(), small.len()) },
        RpStatus::BufferTooSmall
    );
    unsafe {
        rp_estimate_free(est);
        rp_pipeline_free(pl);
        rp_data_free(d);
    }
}

#[test]
fn input_errors_are_reported() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { rp_data_new(ptr::null(), 3, 3, &mut h) }, RpStatus::NullPointer);
    assert!(h.is_null());

    let bad = [1.0, f64::NAN, 2.0, 3.0];
    assert_eq!(unsafe { rp_data_new(bad.as_ptr(), 2, 2, &mut h) }, RpStatus::InvalidInput);
    assert!(!last_error().is_empty());

    let s = CString::new("nonsense").unwrap();
    let q = CString::new("npd").unwrap();
    let mut pl = ptr::null_mut();
    assert_eq!(unsafe { rp_pipeline_new(s.as_ptr(), q.as_ptr(), &mut pl) }, RpStatus::InvalidInput);
    assert!(pl.is_null());

    // lambda = 0 with p >= n
    let (n, p) = (5, 8);
    let d = data(&sample(n, p), n, p);
    let mut cl = ptr::null_mut();
    assert_eq!(unsafe { rp_pipeline_new_classical(&mut cl) }, RpStatus::Ok);
    let mut est = ptr::null_mut();
    assert_eq!(unsafe { rp_estimate(cl, d, 0.0, &mut est) }, RpStatus::InvalidInput);
    assert!(est.is_null());
    assert!(last_error().contains("lambda"));
    unsafe {
        rp_pipeline_free(cl);
        rp_data_free(d);
        rp_data_free(ptr::null_mut());
    }
}

#[test]
fn non_convergence_still_returns_iterate() {
    let (n, p) = (40, 6);
    let d = data(&sample(n, p), n, p);
    let pl = pipeline("tau", "npd");
    assert_eq!(unsafe { rp_pipeline_set_solver(pl, 1, 1e-14) }, RpStatus::Ok);
    let mut est = ptr::null_mut();
    let status = unsafe { rp_estimate(pl, d, 0.01, &mut est) };
    assert_eq!(status, RpStatus::NotConverged);
    assert!(!est.is_null());
    assert_eq!(unsafe { rp_estimate_dim(est) }, p);
    unsafe {
        rp_estimate_free(est);
        rp_pipeline_free(pl);
        rp_data_free(d);
    }
}

#[test]
fn helpers_agree_with_library() {
    let x = [2.0, -1.0, 0.5, 4.0, 3.0, 1.5, -2.0];
    let kind = CString::new("mad").unwrap();
    let mut s = 0.0;
    assert_eq!(unsafe { rp_scale(kind.as_ptr(), x.as_ptr(), x.len(), &mut s) }, RpStatus::Ok);
    assert_eq!(s, robprec::ScaleKind::Mad.estimate(&x).unwrap());

    // Indefinite 2x2: eigenvalues 3 and -1.
    let a = [1.0, 2.0, 2.0, 1.0];
    let mut out = [0.0; 4];
    assert_eq!(unsafe { rp_nearest_pd(a.as_ptr(), 2, 0.01, out.as_mut_ptr()) }, RpStatus::Ok);
    let expect = [1.505, 1.495, 1.495, 1.505];
    for (o, e) in out.iter().zip(expect) {
        assert!((o - e).abs() < 1e-10, "{out:?}");
    }

    let asym = [1.0, 0.5, 0.2, 1.0];
    assert_eq!(unsafe { rp_nearest_pd(asym.as_ptr(), 2, 0.01, out.as_mut_ptr()) }, RpStatus::InvalidInput);

    let t = [2.0, 0.0, 0.0, 1.0];
    let h = [1.0, 0.0, 0.0, 1.0];
    let mut l = 0.0;
    assert_eq!(unsafe { rp_entropy_loss(t.as_ptr(), h.as_ptr(), 2, &mut l) }, RpStatus::Ok);
    assert!((l - (0.5 + 2f64.ln() - 1.0)).abs() < 1e-12);

    let mut prob = 0.0;
    assert_eq!(unsafe { rp_row_contamination_prob(0.1, 30, &mut prob) }, RpStatus::Ok);
    assert!((prob - 0.957_608_841_724_783_8).abs() < 1e-12);
    assert_eq!(unsafe { rp_row_contamination_prob(1.5, 30, &mut prob) }, RpStatus::InvalidInput);
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test exe> -> target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("librobprec_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let exe = profile_dir.join("robprec_ffi_smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C smoke test exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
