use std::ffi::{c_char, CStr};
use std::path::Path;
use std::ptr;

use chi2path_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let mut len = 0usize;
    let status = unsafe { chi2_last_error_message(buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(status, Chi2Status::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn setup() -> Chi2Setup {
    Chi2Setup {
        chi2: 1.0e-12,
        crystal_start: 0.0,
        crystal_length: 1.0e-3,
        index: 1.5,
        omega_s: 1.1e15,
        omega_i: 0.9e15,
        pump_amplitude: 1.0e5,
        pump_phase: 0.25,
        delta_k: 0.0,
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(chi2_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn spdc_probability_matches_formula() {
    let mut p = 0.0;
    assert_eq!(
        unsafe { chi2_spdc_probability(2.0, 1.0, &mut p) },
        Chi2Status::Ok
    );
    let s = 1f64.sin();
    assert!((p - 4.0 * s * s).abs() < 1e-14);
    assert_eq!(
        unsafe { chi2_spdc_probability(2.0, 1.0, ptr::null_mut()) },
        Chi2Status::NullPointer
    );
    assert!(last_error().contains("out"));
}

#[test]
fn permittivity_handle_round_trip() {
    let mut model = ptr::null_mut();
    let status = unsafe { chi2_hb_model_new(1.0, 0.5, 1.0, 0.0, 10.0, &mut model) };
    assert_eq!(status, Chi2Status::Ok);
    let mut eps = Chi2Complex::default();
    assert_eq!(
        unsafe { chi2_effective_epsilon(model, 1.0, 0.5, &mut eps) },
        Chi2Status::Ok
    );
    // Lossless Lorentz: 1 + g beta w0^2 / (w0^2 - w^2).
    assert!((eps.re - (1.0 + 0.5 / 0.75)).abs() < 1e-12);
    assert_eq!(eps.im, 0.0);
    assert_eq!(
        unsafe { chi2_effective_epsilon(model, -1.0, 0.5, &mut eps) },
        Chi2Status::Validation
    );
    unsafe { chi2_hb_model_free(model) };
    unsafe { chi2_hb_model_free(ptr::null_mut()) };

    let status = unsafe { chi2_hb_model_new(1.0, 0.5, 1.0, 0.1, 0.5, &mut model) };
    assert_eq!(status, Chi2Status::Validation);
    assert!(!last_error().is_empty());
}

#[test]
fn propagators_agree() {
    let mut analytic = ptr::null_mut();
    let mut layered = ptr::null_mut();
    unsafe {
        assert_eq!(
            chi2_propagator_new_homogeneous(1.5, 0.0, &mut analytic),
            Chi2Status::Ok
        );
        let (a, b, n) = ([0.2e-6], [0.9e-6], [1.5]);
        let status = chi2_propagator_new_layered(
            1.5,
            1,
            a.as_ptr(),
            b.as_ptr(),
            n.as_ptr(),
            -1.0e-6,
            2.0e-6,
            3001,
            &mut layered,
        );
        assert_eq!(status, Chi2Status::Ok, "{}", last_error());
        let (mut g1, mut g2) = (Chi2Complex::default(), Chi2Complex::default());
        for &(x, y) in &[(0.0, 0.5e-6), (1.2e-6, 0.3e-6), (0.4e-6, 0.4e-6)] {
            assert_eq!(
                chi2_propagator_evaluate(analytic, 1.0e15, x, y, &mut g1),
                Chi2Status::Ok
            );
            assert_eq!(
                chi2_propagator_evaluate(layered, 1.0e15, x, y, &mut g2),
                Chi2Status::Ok
            );
            let d = ((g1.re - g2.re).powi(2) + (g1.im - g2.im).powi(2)).sqrt();
            assert!(d < 1e-9 * (g1.re.hypot(g1.im)));
        }
        assert_eq!(
            chi2_propagator_evaluate(ptr::null(), 1.0e15, 0.0, 0.0, &mut g1),
            Chi2Status::NullPointer
        );
        chi2_propagator_free(analytic);
        chi2_propagator_free(layered);
    }
}

#[test]
fn layered_propagator_rejects_coarse_grid() {
    let mut prop = ptr::null_mut();
    let (a, b, n) = ([0.0], [1.0], [2.0]);
    let status = unsafe {
        chi2_propagator_new_layered(
            1.0,
            1,
            a.as_ptr(),
            b.as_ptr(),
            n.as_ptr(),
            0.5,
            2.0,
            10,
            &mut prop,
        )
    };
    assert_ne!(status, Chi2Status::Ok);
    assert!(prop.is_null());
}

#[test]
fn biphoton_and_squeezing() {
    let s = setup();
    let mut phi = Chi2Complex::default();
    assert_eq!(
        unsafe { chi2_biphoton_1d_analytic(&s, -1.0e-4, -2.0e-4, &mut phi) },
        Chi2Status::Ok
    );
    let k_s = 1.5 * s.omega_s / chi2path::constants::SPEED_OF_LIGHT;
    let k_i = 1.5 * s.omega_i / chi2path::constants::SPEED_OF_LIGHT;
    let expected = s.chi2 * s.pump_amplitude * s.crystal_length / (4.0 * k_s * k_i);
    assert!((phi.re.hypot(phi.im) - expected).abs() < 1e-12 * expected);

    let mut sq = Chi2Squeezing::default();
    assert_eq!(
        unsafe { chi2_squeezing_closed_form(&s, -1.0e-4, -2.0e-4, &mut sq) },
        Chi2Status::Ok
    );
    assert!((sq.s - expected.atanh()).abs() < 1e-15);

    let mut off = s;
    off.delta_k = 1.0e3;
    assert_eq!(
        unsafe { chi2_squeezing_closed_form(&off, 0.0, -1.0, &mut sq) },
        Chi2Status::Validation
    );
    off.omega_s = 0.0;
    assert_ne!(
        unsafe { chi2_biphoton_1d_analytic(&off, 0.0, -1.0, &mut phi) },
        Chi2Status::Ok
    );
}

#[test]
fn diagram_counts_and_factors() {
    let mut n = 0usize;
    assert_eq!(unsafe { chi2_diagram_count(1, 2, &mut n) }, Chi2Status::Ok);
    assert_eq!(n, 6);
    let total: usize = (2..=4)
        .map(|p| {
            let mut c = 0usize;
            assert_eq!(unsafe { chi2_diagram_count(2, p, &mut c) }, Chi2Status::Ok);
            c
        })
        .sum();
    assert_eq!(total, 12);
    assert_eq!(
        unsafe { chi2_diagram_count(3, 2, &mut n) },
        Chi2Status::Validation
    );
    let mut f = 0u64;
    let factors: Vec<u64> = (0..12)
        .map(|k| {
            assert_eq!(
                unsafe { chi2_diagram_symmetry_factor(2, k, &mut f) },
                Chi2Status::Ok
            );
            f
        })
        .collect();
    assert!(factors.iter().all(|&f| f == 1 || f == 2 || f == 24));
    assert!(factors.contains(&24));
    assert_eq!(
        unsafe { chi2_diagram_symmetry_factor(2, 12, &mut f) },
        Chi2Status::Validation
    );
}

#[test]
fn error_buffer_too_small() {
    unsafe { chi2_spdc_probability(1.0, 1.0, ptr::null_mut()) };
    let mut buf = [0 as c_char; 4];
    let mut len = 0usize;
    let status = unsafe { chi2_last_error_message(buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(status, Chi2Status::BufferTooSmall);
    assert!(len > 4);
}

#[test]
fn header_declares_exports_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/chi2path.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "chi2_version",
        "chi2_last_error_message",
        "chi2_spdc_probability",
        "chi2_hb_model_new",
        "chi2_effective_epsilon",
        "chi2_propagator_new_layered",
        "chi2_propagator_evaluate",
        "chi2_biphoton_1d_analytic",
        "chi2_squeezing_closed_form",
        "chi2_diagram_count",
        "chi2_diagram_symmetry_factor",
        "CHI2_STATUS_VALIDATION",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler on PATH; header syntax check not run");
        return;
    };
    let dir = tempfile_dir();
    let src = dir.join("use_header.c");
    std::fs::write(
        &src,
        "#include \"chi2path.h\"\nint main(void) { double p; Chi2Status s = chi2_spdc_probability(1.0, 0.0, &p); return s == CHI2_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc)
            .arg("--version")
            .output()
            .is_ok()
        {
            return Ok(cc);
        }
    }
    Err(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("chi2path-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
