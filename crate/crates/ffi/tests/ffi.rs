use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use trajpriv_ffi::*;

fn traj_json(user: &str, id: &str, seq: &str) -> CString {
    let reports: Vec<_> = seq
        .chars()
        .enumerate()
        .map(|(i, c)| {
            serde_json::json!({
                "user_id": user,
                "lat": 40.7 + 0.001 * i as f64,
                "lon": -73.9,
                "timestamp": 1_000 + 600 * i as i64,
                "payload": c.to_string(),
            })
        })
        .collect();
    CString::new(serde_json::json!({ "traj_id": id, "user_id": user, "reports": reports }).to_string()).unwrap()
}

fn traj(user: &str, id: &str, seq: &str) -> *mut TpTrajectory {
    let mut t = ptr::null_mut();
    let json = traj_json(user, id, seq);
    assert_eq!(unsafe { tp_trajectory_from_json(json.as_ptr(), &mut t) }, TpStatus::Ok);
    t
}

fn last_error() -> String {
    let p = tp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut libc::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { tp_string_free(p) };
    s
}

#[test]
fn trajectory_round_trip() {
    let t = traj("u", "t1", "ABC");
    assert_eq!(unsafe { tp_trajectory_len(t) }, 3);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { tp_trajectory_to_json(t, &mut s) }, TpStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take_string(s)).unwrap();
    assert_eq!(v["traj_id"], "t1");
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
    unsafe { tp_trajectory_free(t) };
}

#[test]
fn error_codes() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { tp_trajectory_from_json(ptr::null(), &mut t) }, TpStatus::NullPointer);
    assert!(t.is_null());
    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { tp_trajectory_from_json(bad.as_ptr(), &mut t) }, TpStatus::InvalidJson);
    assert!(!last_error().is_empty());
    let empty = CString::new(r#"{"traj_id":"t","user_id":"u","reports":[]}"#).unwrap();
    assert_eq!(unsafe { tp_trajectory_from_json(empty.as_ptr(), &mut t) }, TpStatus::InvalidJson);
    assert!(last_error().contains("no reports"));
    let invalid_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { tp_trajectory_from_json(invalid_utf8.as_ptr() as *const libc::c_char, &mut t) },
        TpStatus::InvalidUtf8
    );
    assert_eq!(unsafe { tp_trajectory_from_json(bad.as_ptr(), ptr::null_mut()) }, TpStatus::NullPointer);

    let good = traj("u", "t", "AB");
    let mut out = 0.0;
    assert_eq!(unsafe { tp_score(ptr::null(), good, &mut out) }, TpStatus::NullPointer);
    let mut s = ptr::null_mut();
    let op = CString::new("shred").unwrap();
    assert_eq!(unsafe { tp_sanitize(good, op.as_ptr(), ptr::null(), &mut s) }, TpStatus::UnknownOp);
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { tp_compress(good, -1.0, &mut c) }, TpStatus::InvalidInput);
    unsafe { tp_trajectory_free(good) };

    unsafe {
        tp_trajectory_free(ptr::null_mut());
        tp_profiles_free(ptr::null_mut());
        tp_string_free(ptr::null_mut());
    }
    assert_eq!(unsafe { tp_trajectory_len(ptr::null()) }, 0);
}

#[test]
fn success_clears_last_error() {
    let mut t = ptr::null_mut();
    let bad = CString::new("[]").unwrap();
    assert_ne!(unsafe { tp_trajectory_from_json(bad.as_ptr(), &mut t) }, TpStatus::Ok);
    assert!(!tp_last_error().is_null());
    let t = traj("u", "t", "A");
    assert!(tp_last_error().is_null());
    unsafe { tp_trajectory_free(t) };
}

#[test]
fn score_matches_hand_values() {
    // One profile holding ABCD; query ABCD gives p = 1, H = 0, S = alpha.
    let profile = format!(r#"[{{"user_id":"v","trajectories":[{}]}}]"#, traj_json("v", "p", "ABCD").to_str().unwrap());
    let profiles = CString::new(profile).unwrap();
    let cfg = CString::new(r#"{"alpha":0.5,"match_key":{"mode":"category"}}"#).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { tp_profiles_from_json(profiles.as_ptr(), cfg.as_ptr(), &mut p) }, TpStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { tp_profiles_len(p) }, 1);

    let q = traj("u", "q", "ABCD");
    let mut s = 0.0;
    assert_eq!(unsafe { tp_score(p, q, &mut s) }, TpStatus::Ok);
    assert!((s - 0.5).abs() < 1e-12);

    // ABXY against ABCD: p = 2/4, H = ln 2 / 2, S = 0.5 * sqrt 2.
    let q2 = traj("u", "q2", "ABXY");
    assert_eq!(unsafe { tp_score(p, q2, &mut s) }, TpStatus::Ok);
    assert!((s - 0.5 * 2f64.sqrt()).abs() < 1e-12);

    let empty = CString::new("[]").unwrap();
    let mut p2 = ptr::null_mut();
    assert_eq!(unsafe { tp_profiles_from_json(empty.as_ptr(), ptr::null(), &mut p2) }, TpStatus::InvalidInput);
    unsafe {
        tp_trajectory_free(q);
        tp_trajectory_free(q2);
        tp_profiles_free(p);
    }
}

#[test]
fn sanitize_returns_json() {
    let t = traj("u", "t", "ABCDEF");
    let params = CString::new(r#"{"dummy_count":2,"rng_seed":3}"#).unwrap();
    for (op, count) in [("dummy_locations", 18), ("loose_pathconf", 6), ("cloak", 6), ("strict_tempcloak", 6)] {
        let name = CString::new(op).unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { tp_sanitize(t, name.as_ptr(), params.as_ptr(), &mut s) }, TpStatus::Ok, "{op}");
        let v: serde_json::Value = serde_json::from_str(&take_string(s)).unwrap();
        assert_eq!(v["released"].as_array().unwrap().len(), count, "{op}");
    }
    unsafe { tp_trajectory_free(t) };
}

#[test]
fn compress_and_lcs() {
    // Collinear, evenly spaced: every interior report is dropped.
    let t = traj("u", "t", "AAAAA");
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { tp_compress(t, 0.0005, &mut c) }, TpStatus::Ok);
    assert_eq!(unsafe { tp_trajectory_len(c) }, 2);
    let mut c0 = ptr::null_mut();
    assert_eq!(unsafe { tp_compress(t, 0.0, &mut c0) }, TpStatus::Ok);
    assert_eq!(unsafe { tp_trajectory_len(c0) }, 5);

    let a = traj("u", "a", "XABCY");
    let b = traj("v", "b", "ZABCQ");
    let mut n = 0usize;
    assert_eq!(unsafe { tp_lcs(a, b, &mut n) }, TpStatus::Ok);
    assert_eq!(n, 3);

    let x = [1u32, 2, 3, 4];
    let y = [9u32, 2, 3, 7];
    assert_eq!(unsafe { tp_lcs_u32(x.as_ptr(), 4, y.as_ptr(), 4, &mut n) }, TpStatus::Ok);
    assert_eq!(n, 2);
    assert_eq!(unsafe { tp_lcs_u32(ptr::null(), 0, y.as_ptr(), 4, &mut n) }, TpStatus::Ok);
    assert_eq!(n, 0);
    assert_eq!(unsafe { tp_lcs_u32(ptr::null(), 3, y.as_ptr(), 4, &mut n) }, TpStatus::NullPointer);
    unsafe {
        for h in [t, c, c0, a, b] {
            tp_trajectory_free(h);
        }
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/trajpriv.h")).unwrap();
    for name in [
        "tp_last_error",
        "tp_string_free",
        "tp_trajectory_from_json",
        "tp_trajectory_to_json",
        "tp_trajectory_len",
        "tp_trajectory_free",
        "tp_profiles_from_json",
        "tp_profiles_len",
        "tp_profiles_free",
        "tp_score",
        "tp_sanitize",
        "tp_compress",
        "tp_lcs",
        "tp_lcs_u32",
        "TP_STATUS_UNKNOWN_OP = 5",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, "#include \"trajpriv.h\"\nint main(void) { TpStatus s = TP_STATUS_OK; return (int)s; }\n").unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
