use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use hfactor_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(hf_last_error_message()) }.to_string_lossy().into_owned()
}

fn graph(spec: &str) -> *mut HfGraph {
    let spec = CString::new(spec).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { hf_graph_named(spec.as_ptr(), &mut g) }, HfStatus::Ok);
    g
}

fn instance(n: usize, seed: u64) -> *mut HfInstance {
    let mut inst = ptr::null_mut();
    let dist = HfDistribution {
        family: HfFamily::Exponential,
        rate: 1.0,
    };
    assert_eq!(unsafe { hf_instance_sample(n, dist, seed, &mut inst) }, HfStatus::Ok);
    inst
}

#[test]
fn analyze_reports_exact_densities() {
    let g = graph("lollipop:5,2");
    let mut r = HfDensityReport::default();
    unsafe {
        assert_eq!(hf_graph_analyze(g, &mut r), HfStatus::Ok);
        assert_eq!(hf_graph_vertex_count(g), 7);
        hf_graph_free(g);
    }
    assert_eq!((r.d_h_num, r.d_h_den), (2, 1));
    assert_eq!((r.d_star_num, r.d_star_den), (5, 2));
    assert_eq!((r.delta_num, r.delta_den), (2, 1));
    assert!(!r.strictly_balanced);
}

#[test]
fn parse_errors_carry_a_message() {
    let text = CString::new("0 1\n1 x\n").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { hf_graph_parse(text.as_ptr(), &mut g) }, HfStatus::Parse);
    assert!(g.is_null());
    assert!(last_error().contains("line 2"), "{}", last_error());
    assert_eq!(unsafe { hf_graph_named(ptr::null(), &mut g) }, HfStatus::NullPointer);
}

#[test]
fn factor_matches_oracle_and_validates() {
    let g = graph("complete:3");
    let inst = instance(9, 1);
    unsafe {
        let mut sol = ptr::null_mut();
        assert_eq!(hf_min_factor(inst, g, 0, f64::INFINITY, 0, &mut sol), HfStatus::Ok);
        let mut oracle = ptr::null_mut();
        assert_eq!(hf_oracle(inst, g, HfMode::Factor, 0, f64::INFINITY, &mut oracle), HfStatus::Ok);
        assert_eq!(
            hf_solution_total_weight(sol).to_bits(),
            hf_solution_total_weight(oracle).to_bits()
        );
        assert_eq!(hf_solution_copy_count(sol), 3);
        assert_eq!(hf_solution_uncovered(sol), 0);
        assert!(hf_solution_is_optimal(sol));
        assert_eq!(hf_solution_validate(sol, inst, g), HfStatus::Ok);

        let mut buf = [0usize; 3];
        let mut written = 0;
        assert_eq!(hf_solution_copy(sol, 0, buf.as_mut_ptr(), 3, &mut written), HfStatus::Ok);
        assert_eq!(written, 3);
        assert_eq!(
            hf_solution_copy(sol, 0, buf.as_mut_ptr(), 2, &mut written),
            HfStatus::InvalidArgument
        );
        assert_eq!(
            hf_solution_copy(sol, 7, buf.as_mut_ptr(), 3, &mut written),
            HfStatus::InvalidArgument
        );

        let mut json = ptr::null_mut();
        assert_eq!(hf_solution_to_json(sol, &mut json), HfStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        hf_string_free(json);
        assert!(text.contains("\"mode\":\"factor\""), "{text}");

        // A 9-vertex solution does not belong to a 6-vertex instance.
        let other = instance(6, 1);
        assert_eq!(hf_solution_validate(sol, other, g), HfStatus::Invalid);
        hf_instance_free(other);

        hf_solution_free(sol);
        hf_solution_free(oracle);
        hf_instance_free(inst);
        hf_graph_free(g);
    }
}

#[test]
fn infeasible_and_limits() {
    let g = graph("complete:3");
    let inst = instance(8, 0);
    unsafe {
        let mut sol = ptr::null_mut();
        assert_eq!(hf_min_factor(inst, g, 0, f64::INFINITY, 0, &mut sol), HfStatus::Infeasible);
        assert!(sol.is_null());
        assert_eq!(last_error(), "infeasible");
        assert_eq!(hf_min_cover(inst, g, 0, f64::INFINITY, 0, &mut sol), HfStatus::Ok);
        hf_solution_free(sol);
        assert_eq!(hf_min_factor(inst, g, 0, -1.0, 0, &mut sol), HfStatus::InvalidArgument);
        hf_instance_free(inst);

        let big = instance(15, 0);
        assert_eq!(hf_oracle(big, g, HfMode::Factor, 0, f64::INFINITY, &mut sol), HfStatus::LimitExceeded);
        hf_instance_free(big);
        hf_graph_free(g);
    }
}

#[test]
fn timeout_returns_incumbent_or_null() {
    let g = graph("complete:3");
    let inst = instance(24, 3);
    unsafe {
        let mut sol = ptr::null_mut();
        let status = hf_min_factor(inst, g, 0, f64::INFINITY, 5, &mut sol);
        assert_eq!(status, HfStatus::Timeout);
        if !sol.is_null() {
            assert!(!hf_solution_is_optimal(sol));
            assert_eq!(hf_solution_validate(sol, inst, g), HfStatus::Ok);
        }
        hf_solution_free(sol);
        hf_instance_free(inst);
        hf_graph_free(g);
    }
}

#[test]
fn budget_and_explicit_weights() {
    let g = graph("complete:2");
    // K_4 with weights (0,1)=1, (0,2)=5, (0,3)=5, (1,2)=5, (1,3)=5, (2,3)=2.
    let w = [1.0, 5.0, 5.0, 5.0, 5.0, 2.0];
    let mut inst = ptr::null_mut();
    unsafe {
        assert_eq!(hf_instance_from_weights(4, w.as_ptr(), w.len(), &mut inst), HfStatus::Ok);
        let mut weight = 0.0;
        assert_eq!(hf_instance_weight(inst, 2, 3, &mut weight), HfStatus::Ok);
        assert_eq!(weight, 2.0);
        assert_eq!(hf_instance_weight(inst, 2, 2, &mut weight), HfStatus::InvalidArgument);
        let mut covered = 0;
        let mut sol = ptr::null_mut();
        assert_eq!(hf_max_coverage(inst, g, 2.5, 0, &mut covered, &mut sol), HfStatus::Ok);
        assert_eq!(covered, 2);
        assert_eq!(hf_solution_total_weight(sol), 1.0);
        hf_solution_free(sol);
        assert_eq!(hf_max_coverage(inst, g, 3.0, 0, &mut covered, &mut sol), HfStatus::Ok);
        assert_eq!(covered, 4);
        hf_solution_free(sol);
        hf_instance_free(inst);
        hf_graph_free(g);
    }
    let bad = [1.0, -1.0, 1.0];
    let mut inst = ptr::null_mut();
    assert_eq!(
        unsafe { hf_instance_from_weights(3, bad.as_ptr(), bad.len(), &mut inst) },
        HfStatus::InvalidArgument
    );
}

#[test]
fn instance_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("k.bin").to_str().unwrap()).unwrap();
    let inst = instance(7, 11);
    unsafe {
        assert_eq!(hf_instance_save(inst, path.as_ptr()), HfStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(hf_instance_load(path.as_ptr(), &mut back), HfStatus::Ok);
        assert_eq!(hf_instance_n(back), 7);
        let (mut a, mut b) = (0.0, 0.0);
        hf_instance_weight(inst, 3, 5, &mut a);
        hf_instance_weight(back, 3, 5, &mut b);
        assert_eq!(a.to_bits(), b.to_bits());
        hf_instance_free(back);
        hf_instance_free(inst);
        let missing = CString::new(dir.path().join("none.bin").to_str().unwrap()).unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(hf_instance_load(missing.as_ptr(), &mut none), HfStatus::Io);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(hf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hfactor.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    for name in src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
    {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    // Syntax check with the system C compiler when one is installed.
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-std=c99"])
        .arg(&header_path)
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "hfactor.h"

int main(void) {
    HfGraph *g = NULL;
    HfInstance *inst = NULL;
    HfSolution *sol = NULL;
    HfDistribution dist = { HF_FAMILY_EXPONENTIAL, 1.0 };
    if (hf_graph_named("complete:3", &g) != HF_STATUS_OK) return 1;
    if (hf_instance_sample(9, dist, 1, &inst) != HF_STATUS_OK) return 2;
    if (hf_min_factor(inst, g, 0, INFINITY, 0, &sol) != HF_STATUS_OK) return 3;
    printf("%zu %.17g\n", hf_solution_copy_count(sol), hf_solution_total_weight(sol));
    hf_solution_free(sol);
    if (hf_min_factor(inst, g, 0, -1.0, 0, &sol) != HF_STATUS_INVALID_ARGUMENT) return 4;
    printf("%s\n", hf_last_error_message());
    hf_instance_free(inst);
    hf_graph_free(g);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    if std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipped");
        return;
    }
    // The test binary sits in target/<profile>/deps next to the freshly built
    // shared library; the uplifted copy one level up can be stale.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap();
    assert!(lib_dir.join("libhfactor_ffi.so").exists(), "shared library not built in {}", lib_dir.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = std::process::Command::new("cc")
        .arg("-std=c99")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .arg("-L")
        .arg(lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .args(["-lhfactor_ffi", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = std::process::Command::new(&bin).env_remove("LD_LIBRARY_PATH").output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    let mut lines = text.lines();
    let first: Vec<&str> = lines.next().unwrap().split(' ').collect();
    assert_eq!(first[0], "3");

    let inst = instance(9, 1);
    let g = graph("complete:3");
    let mut sol = ptr::null_mut();
    unsafe {
        hf_min_factor(inst, g, 0, f64::INFINITY, 0, &mut sol);
        assert_eq!(first[1].parse::<f64>().unwrap().to_bits(), hf_solution_total_weight(sol).to_bits());
        hf_solution_free(sol);
        hf_instance_free(inst);
        hf_graph_free(g);
    }
    assert_eq!(lines.next(), Some("cap must be positive"));
}
