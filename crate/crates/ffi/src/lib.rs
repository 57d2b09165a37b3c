//! C interface to `ims-core`.
//!
//! Objects cross the boundary as opaque heap handles created by `*_new`,
//! `*_load` or `*_generate` functions and released with the matching `*_free`.
//! Every fallible function returns an [`ImsStatus`]; on failure the message is
//! kept per thread and can be read with [`ims_last_error_message`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;

use ims_core::dataset::{generate_dataset, CascadeDataset};
use ims_core::ims::{self, ImsOptions, ImsRequest, Pipeline};
use ims_core::inference::{collect_stats, estimate, EstimationReport, Flag};
use ims_core::influence::greedy_im;
use ims_core::{oracle, Error, Graph, Model, SeedDistribution};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGraph = 3,
    ModelMismatch = 4,
    TooLarge = 5,
    Degenerate = 6,
    Io = 7,
    Format = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImsModel {
    Ic = 0,
    Lt = 1,
}

impl From<ImsModel> for Model {
    fn from(m: ImsModel) -> Model {
        match m {
            ImsModel::Ic => Model::Ic,
            ImsModel::Lt => Model::Lt,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImsPipeline {
    IcA1 = 0,
    IcA2 = 1,
    IcA2Eps = 2,
    Lt = 3,
}

/// Per-pair estimate flag, as returned by [`ims_report_flag`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImsFlag {
    Ok = 0,
    ClampedLow = 1,
    ClampedHigh = 2,
    UndefinedDenominator = 3,
    /// Diagonal entries are never estimated.
    NotEstimated = 4,
}

pub struct ImsGraph(Graph);
pub struct ImsSeedDistribution(SeedDistribution);
pub struct ImsDataset(CascadeDataset);
pub struct ImsReport(EstimationReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ImsStatus {
    match e {
        Error::InvalidGraph(_) | Error::Normalization(_) => ImsStatus::InvalidGraph,
        Error::InvalidSeedDistribution(_) | Error::InvalidArgument(_) => ImsStatus::InvalidArgument,
        Error::ModelMismatch { .. } => ImsStatus::ModelMismatch,
        Error::TooLarge(_) => ImsStatus::TooLarge,
        Error::Degenerate { .. } => ImsStatus::Degenerate,
        Error::Io(_) => ImsStatus::Io,
        Error::Format(_) | Error::Json(_) => ImsStatus::Format,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ImsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ImsStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("{name} is null"));
            ImsStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            ImsStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Core(Error::InvalidArgument(format!("{name} is not UTF-8"))))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ims_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ims_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a graph from `m` edges `(src[i], dst[i], param[i])`.
///
/// # Safety
/// Each array must hold `m` readable elements; `out_graph` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_graph_new(
    n: usize,
    model: ImsModel,
    src: *const usize,
    dst: *const usize,
    param: *const f64,
    m: usize,
    out_graph: *mut *mut ImsGraph,
) -> ImsStatus {
    guard(|| {
        let out_graph = out(out_graph, "out_graph")?;
        let (s, d, p) = (slice_arg(src, m, "src")?, slice_arg(dst, m, "dst")?, slice_arg(param, m, "param")?);
        let edges: Vec<_> = (0..m).map(|i| (s[i], d[i], p[i])).collect();
        *out_graph = boxed(ImsGraph(Graph::new(n, model.into(), &edges)?));
        Ok(())
    })
}

/// Parses a graph from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_graph` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_graph_from_json(json: *const c_char, out_graph: *mut *mut ImsGraph) -> ImsStatus {
    guard(|| {
        let out_graph = out(out_graph, "out_graph")?;
        *out_graph = boxed(ImsGraph(Graph::from_json(str_arg(json, "json")?)?));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out_graph` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_graph_load(path: *const c_char, out_graph: *mut *mut ImsGraph) -> ImsStatus {
    guard(|| {
        let out_graph = out(out_graph, "out_graph")?;
        *out_graph = boxed(ImsGraph(Graph::load(str_arg(path, "path")?)?));
        Ok(())
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ims_graph_node_count(graph: *const ImsGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ims_graph_free(graph: *mut ImsGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `q` must hold `n` readable doubles; `out_dist` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_seed_distribution_new(
    q: *const f64,
    n: usize,
    out_dist: *mut *mut ImsSeedDistribution,
) -> ImsStatus {
    guard(|| {
        let out_dist = out(out_dist, "out_dist")?;
        let q = slice_arg(q, n, "q")?.to_vec();
        *out_dist = boxed(ImsSeedDistribution(SeedDistribution::new(q)?));
        Ok(())
    })
}

/// # Safety
/// `dist` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ims_seed_distribution_free(dist: *mut ImsSeedDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Generates `t` cascades; identical arguments give identical datasets.
///
/// # Safety
/// Handles must be live; `out_dataset` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_dataset_generate(
    graph: *const ImsGraph,
    dist: *const ImsSeedDistribution,
    t: usize,
    rng_seed: u64,
    out_dataset: *mut *mut ImsDataset,
) -> ImsStatus {
    guard(|| {
        let out_dataset = out(out_dataset, "out_dataset")?;
        let ds = generate_dataset(&get(graph, "graph")?.0, &get(dist, "dist")?.0, t, rng_seed)?;
        *out_dataset = boxed(ImsDataset(ds));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out_dataset` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_dataset_load(path: *const c_char, out_dataset: *mut *mut ImsDataset) -> ImsStatus {
    guard(|| {
        let out_dataset = out(out_dataset, "out_dataset")?;
        *out_dataset = boxed(ImsDataset(CascadeDataset::load(str_arg(path, "path")?)?));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be live; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ims_dataset_save(dataset: *const ImsDataset, path: *const c_char) -> ImsStatus {
    guard(|| {
        get(dataset, "dataset")?.0.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Number of cascades, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ims_dataset_len(dataset: *const ImsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.t())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ims_dataset_free(dataset: *mut ImsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Estimates every edge parameter with the estimator of the dataset's model.
///
/// # Safety
/// `dataset` must be live; `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_estimate(dataset: *const ImsDataset, out_report: *mut *mut ImsReport) -> ImsStatus {
    guard(|| {
        let out_report = out(out_report, "out_report")?;
        let ds = &get(dataset, "dataset")?.0;
        *out_report = boxed(ImsReport(estimate(ds.model(), &collect_stats(ds)?, None)));
        Ok(())
    })
}

/// # Safety
/// `report` must be live; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_report_param(
    report: *const ImsReport,
    u: usize,
    v: usize,
    out_value: *mut f64,
) -> ImsStatus {
    guard(|| {
        let r = &get(report, "report")?.0;
        let out_value = out(out_value, "out_value")?;
        check_pair(r.n(), u, v)?;
        *out_value = r.param(u, v);
        Ok(())
    })
}

/// # Safety
/// `report` must be live; `out_flag` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_report_flag(
    report: *const ImsReport,
    u: usize,
    v: usize,
    out_flag: *mut ImsFlag,
) -> ImsStatus {
    guard(|| {
        let r = &get(report, "report")?.0;
        let out_flag = out(out_flag, "out_flag")?;
        check_pair(r.n(), u, v)?;
        *out_flag = match r.flag(u, v) {
            Some(Flag::Ok) => ImsFlag::Ok,
            Some(Flag::ClampedLow) => ImsFlag::ClampedLow,
            Some(Flag::ClampedHigh) => ImsFlag::ClampedHigh,
            Some(Flag::UndefinedDenominator) => ImsFlag::UndefinedDenominator,
            None => ImsFlag::NotEstimated,
        };
        Ok(())
    })
}

fn check_pair(n: usize, u: usize, v: usize) -> Result<(), Failure> {
    if u >= n || v >= n {
        return Err(Error::InvalidArgument(format!("pair ({u},{v}) out of range for n = {n}")).into());
    }
    Ok(())
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ims_report_free(report: *mut ImsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Exact one-step activation probability of `v`.
///
/// # Safety
/// Handles must be live; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ims_exact_ap(
    graph: *const ImsGraph,
    dist: *const ImsSeedDistribution,
    v: usize,
    out_value: *mut f64,
) -> ImsStatus {
    guard(|| {
        let out_value = out(out_value, "out_value")?;
        *out_value = oracle::exact_ap(&get(graph, "graph")?.0, &get(dist, "dist")?.0, v)?;
        Ok(())
    })
}

/// Exact expected spread of a seed set (small graphs only).
///
/// # Safety
/// `graph` must be live; `seeds` must hold `len` readable elements.
#[no_mangle]
pub unsafe extern "C" fn ims_exact_sigma(
    graph: *const ImsGraph,
    seeds: *const usize,
    len: usize,
    out_value: *mut f64,
) -> ImsStatus {
    guard(|| {
        let out_value = out(out_value, "out_value")?;
        *out_value = oracle::exact_sigma(&get(graph, "graph")?.0, slice_arg(seeds, len, "seeds")?)?;
        Ok(())
    })
}

/// Greedy seed selection. `out_seeds` must have room for `k` entries; the
/// number written is stored in `out_len`.
///
/// # Safety
/// `graph` must be live; `out_seeds` must hold `k` writable elements.
#[no_mangle]
pub unsafe extern "C" fn ims_greedy(
    graph: *const ImsGraph,
    k: usize,
    num_sims: usize,
    rng_seed: u64,
    out_seeds: *mut usize,
    out_len: *mut usize,
) -> ImsStatus {
    guard(|| {
        let g = &get(graph, "graph")?.0;
        let out_len = out(out_len, "out_len")?;
        let set = greedy_im(g, k, num_sims, rng_seed)?;
        write_seeds(&set.nodes, out_seeds, k, out_len)
    })
}

unsafe fn write_seeds(nodes: &[usize], dst: *mut usize, cap: usize, len: &mut usize) -> Result<(), Failure> {
    if nodes.len() > cap {
        return Err(Error::InvalidArgument(format!("{} seeds do not fit in {cap} slots", nodes.len())).into());
    }
    if !nodes.is_empty() {
        if dst.is_null() {
            return Err(Failure::Null("out_seeds"));
        }
        ptr::copy_nonoverlapping(nodes.as_ptr(), dst, nodes.len());
    }
    *len = nodes.len();
    Ok(())
}

/// Runs a sample-based pipeline with greedy selection. `t_prime = 0` uses half
/// the dataset for partitioning; `max_in_degree = 0` means `n - 1`.
/// `out_seeds` must have room for `capacity` entries.
///
/// # Safety
/// `dataset` must be live; `out_seeds` must hold `capacity` writable elements.
#[no_mangle]
pub unsafe extern "C" fn ims_run_pipeline(
    dataset: *const ImsDataset,
    pipeline: ImsPipeline,
    k: usize,
    epsilon: f64,
    delta: f64,
    t_prime: usize,
    max_in_degree: usize,
    num_sims: usize,
    rng_seed: u64,
    out_seeds: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> ImsStatus {
    guard(|| {
        let ds = &get(dataset, "dataset")?.0;
        let out_len = out(out_len, "out_len")?;
        let request = ImsRequest {
            pipeline: match pipeline {
                ImsPipeline::IcA1 => Pipeline::IcA1,
                ImsPipeline::IcA2 => Pipeline::IcA2,
                ImsPipeline::IcA2Eps => Pipeline::IcA2Eps,
                ImsPipeline::Lt => Pipeline::Lt,
            },
            k,
            epsilon,
            delta,
            t_prime: (t_prime > 0).then_some(t_prime),
            in_degree_bound: (max_in_degree > 0).then_some(max_in_degree),
            rng_seed,
        };
        let algo = ims_core::influence::GreedyIm { num_sims, rng_seed };
        let result = ims::run(ds, &request, &algo, &ImsOptions::default())?;
        write_seeds(&result.chosen.nodes, out_seeds, capacity, out_len)
    })
}
