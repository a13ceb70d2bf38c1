use std::ffi::{CStr, CString};
use std::ptr;

use fuzzkb::model::{init_params, save_checkpoint, ModelConfig};
use fuzzkb::synth::{synthetic_kb, SynthConfig};
use fuzzkb_ffi::*;

fn fixture() -> (tempfile::TempDir, CString, CString) {
    let dir = tempfile::tempdir().unwrap();
    let kb = synthetic_kb(&SynthConfig {
        concepts: 3,
        block_size: 4,
        relations: 2,
        chains: 1,
        ..SynthConfig::default()
    })
    .unwrap();
    kb.save(dir.path()).unwrap();
    let cfg = ModelConfig {
        dim: 8,
        ..ModelConfig::default()
    };
    let p = init_params(kb.num_entities(), kb.num_concepts(), kb.num_relations(), cfg, 3).unwrap();
    let ck = dir.path().join("model.ckpt");
    save_checkpoint(&p, &ck).unwrap();
    let kb_dir = CString::new(dir.path().to_str().unwrap()).unwrap();
    let ck = CString::new(ck.to_str().unwrap()).unwrap();
    (dir, kb_dir, ck)
}

fn last_error() -> String {
    let p = fuzzkb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn open_answer_free() {
    let (_dir, kb_dir, ck) = fixture();
    let mut model = ptr::null_mut();
    let st = unsafe { fuzzkb_model_open(kb_dir.as_ptr(), ck.as_ptr(), &mut model) };
    assert_eq!(st, FuzzkbStatus::Ok);
    assert_eq!(unsafe { fuzzkb_model_num_entities(model) }, 12);
    assert_eq!(unsafe { fuzzkb_model_num_concepts(model) }, 3);

    let q = CString::new("(p r0 (e e00))").unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { fuzzkb_answer_json(model, q.as_ptr(), 2, &mut out) };
    assert_eq!(st, FuzzkbStatus::Ok);
    let json = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { fuzzkb_string_free(out) };
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["level"], "ABox");
    assert_eq!(rows[3]["level"], "TBox");
    assert!(rows[0]["score"].as_f64().unwrap() >= rows[1]["score"].as_f64().unwrap());

    unsafe { fuzzkb_model_free(model) };
}

#[test]
fn errors_map_to_codes() {
    let (_dir, kb_dir, ck) = fixture();
    let mut model = ptr::null_mut();
    let missing = CString::new("/nonexistent/ckpt").unwrap();
    let st = unsafe { fuzzkb_model_open(kb_dir.as_ptr(), missing.as_ptr(), &mut model) };
    assert_eq!(st, FuzzkbStatus::Io);
    assert!(model.is_null());
    assert!(last_error().contains("/nonexistent/ckpt"));

    let st = unsafe { fuzzkb_model_open(ptr::null(), ck.as_ptr(), &mut model) };
    assert_eq!(st, FuzzkbStatus::NullArgument);

    let st = unsafe { fuzzkb_model_open(kb_dir.as_ptr(), ck.as_ptr(), &mut model) };
    assert_eq!(st, FuzzkbStatus::Ok);
    let mut out = ptr::null_mut();
    for (text, code) in [("(p r0 (e nobody))", FuzzkbStatus::Query), ("(p r0", FuzzkbStatus::Query)] {
        let q = CString::new(text).unwrap();
        let st = unsafe { fuzzkb_answer_json(model, q.as_ptr(), 2, &mut out) };
        assert_eq!(st, code, "{text}");
        assert!(out.is_null());
    }
    let q = CString::new("(p r0 (e e00))").unwrap();
    let st = unsafe { fuzzkb_answer_json(model, q.as_ptr(), 0, &mut out) };
    assert_eq!(st, FuzzkbStatus::Invalid);
    unsafe { fuzzkb_model_free(model) };
    unsafe { fuzzkb_model_free(ptr::null_mut()) };
}

#[test]
fn tnorm_entry_point() {
    let mut v = 0.0;
    assert_eq!(unsafe { fuzzkb_tnorm(FuzzkbTnorm::Product, 0, 0.5, 0.4, &mut v) }, FuzzkbStatus::Ok);
    assert!((v - 0.2).abs() < 1e-15);
    assert_eq!(unsafe { fuzzkb_tnorm(FuzzkbTnorm::Product, 1, 0.5, 0.4, &mut v) }, FuzzkbStatus::Ok);
    assert!((v - 0.7).abs() < 1e-15);
    assert_eq!(unsafe { fuzzkb_tnorm(FuzzkbTnorm::Godel, 0, 1.5, 0.4, &mut v) }, FuzzkbStatus::Invalid);
    let ver = unsafe { CStr::from_ptr(fuzzkb_version()) }.to_str().unwrap();
    assert_eq!(ver, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/fuzzkb.h")).unwrap();
    for sym in [
        "fuzzkb_model_open",
        "fuzzkb_model_free",
        "fuzzkb_answer_json",
        "fuzzkb_string_free",
        "fuzzkb_last_error",
        "fuzzkb_tnorm",
        "FUZZKB_STATUS_OK",
        "typedef struct FuzzkbModel FuzzkbModel",
    ] {
        assert!(header.contains(sym), "{sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/fuzzkb.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
