use std::ffi::{CStr, CString};
use std::ptr;

use ims_ffi::*;

fn last_error() -> String {
    let p = ims_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn star_graph(p: f64) -> *mut ImsGraph {
    let src = [0usize, 0, 0];
    let dst = [1usize, 2, 3];
    let param = [p; 3];
    let mut g = ptr::null_mut();
    let s = ims_graph_new(4, ImsModel::Ic, src.as_ptr(), dst.as_ptr(), param.as_ptr(), 3, &mut g);
    assert_eq!(s, ImsStatus::Ok);
    g
}

#[test]
fn estimate_and_select_through_handles() {
    unsafe {
        let g = star_graph(0.6);
        assert_eq!(ims_graph_node_count(g), 4);
        let q = [0.3; 4];
        let mut d = ptr::null_mut();
        assert_eq!(ims_seed_distribution_new(q.as_ptr(), 4, &mut d), ImsStatus::Ok);

        let mut ap = 0.0;
        assert_eq!(ims_exact_ap(g, d, 1, &mut ap), ImsStatus::Ok);
        assert!((ap - (1.0 - 0.7 * (1.0 - 0.3 * 0.6))).abs() < 1e-12);

        let mut ds = ptr::null_mut();
        assert_eq!(ims_dataset_generate(g, d, 100_000, 7, &mut ds), ImsStatus::Ok);
        assert_eq!(ims_dataset_len(ds), 100_000);

        let mut report = ptr::null_mut();
        assert_eq!(ims_estimate(ds, &mut report), ImsStatus::Ok);
        let mut p01 = 0.0;
        assert_eq!(ims_report_param(report, 0, 1, &mut p01), ImsStatus::Ok);
        assert!((p01 - 0.6).abs() < 0.05, "{p01}");
        let mut flag = ImsFlag::Ok;
        assert_eq!(ims_report_flag(report, 2, 2, &mut flag), ImsStatus::Ok);
        assert_eq!(flag, ImsFlag::NotEstimated);
        assert_eq!(ims_report_param(report, 9, 0, &mut p01), ImsStatus::InvalidArgument);

        let seeds = [0usize];
        let mut sigma = 0.0;
        assert_eq!(ims_exact_sigma(g, seeds.as_ptr(), 1, &mut sigma), ImsStatus::Ok);
        assert!((sigma - 2.8).abs() < 1e-12);

        let mut chosen = [usize::MAX; 2];
        let mut len = 0;
        assert_eq!(ims_greedy(g, 1, 1000, 1, chosen.as_mut_ptr(), &mut len), ImsStatus::Ok);
        assert_eq!((len, chosen[0]), (1, 0));

        assert_eq!(
            ims_run_pipeline(ds, ImsPipeline::IcA1, 1, 0.1, 0.1, 0, 0, 1000, 3, chosen.as_mut_ptr(), 2, &mut len),
            ImsStatus::Ok
        );
        assert_eq!((len, chosen[0]), (1, 0));
        assert_eq!(
            ims_run_pipeline(ds, ImsPipeline::Lt, 1, 0.1, 0.1, 0, 0, 1000, 3, chosen.as_mut_ptr(), 2, &mut len),
            ImsStatus::ModelMismatch
        );
        assert!(last_error().contains("model mismatch"));

        ims_report_free(report);
        ims_dataset_free(ds);
        ims_seed_distribution_free(d);
        ims_graph_free(g);
    }
}

#[test]
fn errors_are_reported_with_codes() {
    unsafe {
        let mut g = ptr::null_mut();
        let src = [0usize];
        let dst = [0usize];
        let p = [0.5];
        let s = ims_graph_new(2, ImsModel::Ic, src.as_ptr(), dst.as_ptr(), p.as_ptr(), 1, &mut g);
        assert_eq!(s, ImsStatus::InvalidGraph);
        assert!(g.is_null());
        assert!(last_error().contains("self-loop"), "{}", last_error());

        assert_eq!(ims_graph_new(2, ImsModel::Ic, ptr::null(), ptr::null(), ptr::null(), 0, ptr::null_mut()), ImsStatus::NullPointer);
        assert_eq!(ims_graph_new(2, ImsModel::Ic, ptr::null(), dst.as_ptr(), p.as_ptr(), 1, &mut g), ImsStatus::NullPointer);

        let text = CString::new("{\"n\": 2, \"model\": \"ic\", \"edges\": [[0, 1, 1.5]]}").unwrap();
        assert_eq!(ims_graph_from_json(text.as_ptr(), &mut g), ImsStatus::InvalidGraph);
        let missing = CString::new("/nonexistent/graph.json").unwrap();
        assert_eq!(ims_graph_load(missing.as_ptr(), &mut g), ImsStatus::Io);

        let big = star_graph(0.5);
        let mut chosen = [0usize; 1];
        let mut len = 0;
        assert_eq!(ims_greedy(big, 5, 10, 1, chosen.as_mut_ptr(), &mut len), ImsStatus::InvalidArgument);
        ims_graph_free(big);
        ims_graph_free(ptr::null_mut());
        assert_eq!(ims_graph_node_count(ptr::null()), 0);
    }
}

#[test]
fn datasets_round_trip_through_files() {
    unsafe {
        let g = star_graph(0.5);
        let q = [0.4; 4];
        let mut d = ptr::null_mut();
        ims_seed_distribution_new(q.as_ptr(), 4, &mut d);
        let mut a = ptr::null_mut();
        assert_eq!(ims_dataset_generate(g, d, 50, 1, &mut a), ImsStatus::Ok);
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("d.jsonl").to_str().unwrap()).unwrap();
        assert_eq!(ims_dataset_save(a, path.as_ptr()), ImsStatus::Ok);
        let mut b = ptr::null_mut();
        assert_eq!(ims_dataset_load(path.as_ptr(), &mut b), ImsStatus::Ok);
        assert_eq!(ims_dataset_len(b), 50);
        for h in [a, b] {
            ims_dataset_free(h);
        }
        ims_seed_distribution_free(d);
        ims_graph_free(g);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ims_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
