use std::ffi::{CStr, CString};
use std::ptr;

use polyclinch_ffi::*;

const SAMPLED: &str = r#"{"epsilon":"1/100",
  "buyers":[{"id":"1","valuation":"1","bid":"1","budget":"inf"},
            {"id":"2","valuation":"10","bid":"10","budget":"1"}],
  "sellers":[{"id":"1","valuation":"1/100","bid":"1/100","sample":"2/100",
              "capacity":{"kind":"rank","unit":"1","cap":"1"}}],
  "edges":[["1","1"],["2","1"]]}"#;

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let text = CStr::from_ptr(s).to_str().unwrap().to_string();
    pc_string_free(s);
    text
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(pc_last_error())
            .to_str()
            .unwrap()
            .to_string()
    }
}

#[test]
fn single_sample_runs_through_handles() {
    let json = CString::new(SAMPLED).unwrap();
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(
            pc_instance_from_json(json.as_ptr(), &mut inst),
            PcStatus::Ok
        );
        let mut out = ptr::null_mut();
        assert_eq!(pc_run_single_sample(inst, &mut out), PcStatus::Ok);
        let (mut goods, mut payment) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            pc_outcome_buyer(out, 1, &mut goods, &mut payment),
            PcStatus::Ok
        );
        assert_eq!(take(goods), "1");
        take(payment);
        pc_outcome_free(out);
        pc_instance_free(inst);
    }
}

#[test]
fn validation_failures_are_reported() {
    // The bid is not a multiple of the clock increment.
    let json = CString::new(SAMPLED.replace(r#""bid":"10""#, r#""bid":"1/3""#)).unwrap();
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(
            pc_instance_from_json(json.as_ptr(), &mut inst),
            PcStatus::Validation
        );
        assert!(inst.is_null());
    }
    assert!(last_error().contains("validation"));
}

#[test]
fn missing_sample_is_a_configuration_error() {
    let json = CString::new(SAMPLED.replace(r#""sample":"2/100","#, "")).unwrap();
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(
            pc_instance_from_json(json.as_ptr(), &mut inst),
            PcStatus::Ok
        );
        let mut out = ptr::null_mut();
        assert_eq!(pc_run_single_sample(inst, &mut out), PcStatus::Config);
        assert!(out.is_null());
        pc_instance_free(inst);
    }
    assert!(last_error().contains("sample"));
}

#[test]
fn null_and_invalid_inputs_are_rejected() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(
            pc_instance_from_json(ptr::null(), &mut inst),
            PcStatus::NullArgument
        );
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(
            pc_instance_from_json(bad.as_ptr().cast(), &mut inst),
            PcStatus::InvalidUtf8
        );
        let mut s = ptr::null_mut();
        assert_eq!(pc_outcome_json(ptr::null(), &mut s), PcStatus::NullArgument);
        assert_eq!(pc_instance_buyer_count(ptr::null()), 0);
        pc_instance_free(ptr::null_mut());
        pc_outcome_free(ptr::null_mut());
        pc_string_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut inst = ptr::null_mut();
        pc_instance_from_json(ptr::null(), &mut inst);
    }
    let here = last_error();
    let there = std::thread::spawn(|| pc_last_error().is_null())
        .join()
        .unwrap();
    assert!(here.contains("null"));
    assert!(there);
}
