//! Python bindings for the ppgan core.
//!
//! The module exposes the pieces a notebook actually reaches for:
//! counter-based random streams, L2 clipping and the Gaussian
//! mechanism, closed-form noise calibration, the moments accountant,
//! admission-code encoding, the demonstration EHR sampler, and
//! checkpoint sampling/scoring. Training itself stays behind the
//! `ppgan` binary; the bindings read its checkpoints.
//!
//! Build with `cargo build -p ppgan-py`; the resulting `cdylib` imports
//! as `ppgan_py` once named `ppgan_py.so` on the Python path (see
//! `python/smoke_test.py`).

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ppgan_core::accountant::{
    log_mgf_discrete, log_mgf_subsampled_gaussian, DiscreteMechanism, LogMoment, MechanismStep,
    MomentLedger,
};
use ppgan_core::checkpoint::CheckpointState;
use ppgan_core::data::{encode_admission, synthesize_ehr, SynthEhrModel, CODE_SPACE};
use ppgan_core::dp::{
    calibrate_sigma_eq17, calibrate_sigma_lemma1, gaussian_mechanism, ClipSpec,
    GaussianMechanismSpec, PrivacyTarget,
};
use ppgan_core::ndnum::{Matrix, RngStream};
use ppgan_core::scores::{score_generator, LabelModel};
use ppgan_core::{streams, Error};

fn value_error(err: Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

// ---------------------------------------------------------------------------
// random streams
// ---------------------------------------------------------------------------

/// A counter-based random stream: `(seed, stream_id, counter)` fully
/// determine every draw, so identical construction replays identical
/// values.
#[pyclass(name = "RngStream")]
struct PyRngStream {
    inner: RngStream,
}

#[pymethods]
impl PyRngStream {
    #[new]
    fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            inner: RngStream::new(seed, stream_id),
        }
    }

    /// Derive an independent child stream from a tag.
    fn child(&self, tag: u64) -> Self {
        Self {
            inner: self.inner.child(tag),
        }
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// A uniform draw in [0, 1).
    fn next_uniform(&mut self) -> f64 {
        self.inner.next_uniform()
    }

    fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.next_range(lo, hi)
    }

    /// A uniform index in 0..n.
    fn next_index(&mut self, n: usize) -> usize {
        self.inner.next_index(n)
    }

    fn next_gaussian(&mut self, mean: f64, std: f64) -> f64 {
        self.inner.next_gaussian(mean, std)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn stream_id(&self) -> u64 {
        self.inner.stream_id()
    }

    #[getter]
    fn counter(&self) -> u64 {
        self.inner.counter()
    }

    fn __repr__(&self) -> String {
        format!(
            "RngStream(seed={}, stream_id={}, counter={})",
            self.inner.seed(),
            self.inner.stream_id(),
            self.inner.counter()
        )
    }
}

// ---------------------------------------------------------------------------
// clipping and noise
// ---------------------------------------------------------------------------

/// Scale `values` down to L2 norm `bound` when it exceeds the bound;
/// shorter vectors pass through unchanged.
#[pyfunction]
fn clip_l2(values: Vec<f64>, bound: f64) -> PyResult<Vec<f64>> {
    let spec = ClipSpec::new(bound).map_err(value_error)?;
    Ok(ppgan_core::dp::clip_l2(&values, &spec))
}

/// Add `N(0, (sigma * sensitivity)^2)` noise to each coordinate,
/// drawing from `stream`. Zero noise returns the input unchanged
/// without consuming any draws.
#[pyfunction]
fn add_gaussian_noise(
    values: Vec<f64>,
    sigma: f64,
    sensitivity: f64,
    stream: &mut PyRngStream,
) -> PyResult<Vec<f64>> {
    let spec = GaussianMechanismSpec::new(sigma, sensitivity).map_err(value_error)?;
    Ok(gaussian_mechanism(&values, &spec, &mut stream.inner))
}

/// The coarse closed-form noise multiplier for running `n_d` critic
/// steps per generator iteration at sampling ratio `q` under the
/// `(epsilon, delta)` target.
#[pyfunction]
#[pyo3(name = "calibrate_sigma_eq17")]
fn py_calibrate_sigma_eq17(epsilon: f64, delta: f64, q: f64, n_d: u32) -> PyResult<f64> {
    let target = PrivacyTarget::new(epsilon, delta).map_err(value_error)?;
    calibrate_sigma_eq17(&target, q, n_d).map_err(value_error)
}

/// The single-query Gaussian-mechanism calibration (proven for
/// epsilon < 1; a heuristic outside that regime).
#[pyfunction]
#[pyo3(name = "calibrate_sigma_lemma1")]
fn py_calibrate_sigma_lemma1(epsilon: f64, delta: f64, sensitivity: f64) -> PyResult<f64> {
    let target = PrivacyTarget::new(epsilon, delta).map_err(value_error)?;
    calibrate_sigma_lemma1(&target, sensitivity).map_err(value_error)
}

// ---------------------------------------------------------------------------
// the moments accountant
// ---------------------------------------------------------------------------

/// Log moment-generating function of the privacy loss of one
/// subsampled Gaussian step at moment order `lam`.
#[pyfunction]
fn log_moment_subsampled_gaussian(q: f64, sigma: f64, lam: f64) -> PyResult<f64> {
    let step = MechanismStep::new(q, sigma).map_err(value_error)?;
    log_mgf_subsampled_gaussian(&step, lam).map_err(value_error)
}

/// Log moment of a finite-outcome mechanism given its distributions on
/// two neighboring inputs; support mismatches give `inf`.
#[pyfunction]
fn log_moment_discrete(p: Vec<f64>, p_prime: Vec<f64>, lam: f64) -> PyResult<f64> {
    let mech = DiscreteMechanism::new(p, p_prime).map_err(value_error)?;
    match log_mgf_discrete(&mech, lam).map_err(value_error)? {
        LogMoment::Finite(v) => Ok(v),
        LogMoment::Infinite => Ok(f64::INFINITY),
    }
}

/// Accumulates per-step log moments over a grid of orders and answers
/// `(epsilon, delta)` tail-bound queries about the composition.
#[pyclass(name = "MomentLedger")]
struct PyMomentLedger {
    inner: MomentLedger,
}

#[pymethods]
impl PyMomentLedger {
    #[new]
    #[pyo3(signature = (lambda_max = 32))]
    fn new(lambda_max: u32) -> Self {
        Self {
            inner: MomentLedger::with_lambda_max(lambda_max),
        }
    }

    /// Compose `times` subsampled Gaussian steps at `(q, sigma)`.
    fn accumulate(&mut self, q: f64, sigma: f64, times: u64) -> PyResult<()> {
        let step = MechanismStep::new(q, sigma).map_err(value_error)?;
        self.inner.accumulate(&step, times).map_err(value_error)
    }

    /// Smallest epsilon the composition satisfies at this delta.
    fn eps_for_delta(&self, delta: f64) -> PyResult<f64> {
        self.inner.eps_for_delta(delta).map_err(value_error)
    }

    /// Smallest delta the composition satisfies at this epsilon.
    fn delta_for_eps(&self, epsilon: f64) -> PyResult<f64> {
        self.inner.delta_for_eps(epsilon).map_err(value_error)
    }
}

// ---------------------------------------------------------------------------
// data encoding and synthesis
// ---------------------------------------------------------------------------

/// Encode 1-indexed diagnosis codes as a 1071-long binary vector;
/// longer codes are truncated to their first three digits first.
#[pyfunction]
#[pyo3(name = "encode_admission")]
fn py_encode_admission(codes: Vec<u32>) -> PyResult<Vec<f64>> {
    encode_admission(&codes).map_err(value_error)
}

/// Sample `count` admission records from the built-in demonstration
/// EHR model as rows of 0/1 code indicators.
#[pyfunction]
fn synth_ehr_demo(count: usize, seed: u64) -> Vec<Vec<f64>> {
    let model = SynthEhrModel::demo();
    let mut stream = RngStream::new(seed, streams::DATA);
    matrix_rows(&synthesize_ehr(&model, count, &mut stream))
}

// ---------------------------------------------------------------------------
// checkpoints: sampling and scoring
// ---------------------------------------------------------------------------

/// Sample `count` images from the generator stored in a training
/// checkpoint, as a list of flat pixel rows in [-1, 1].
#[pyfunction]
fn sample_generator(checkpoint: PathBuf, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let ck = CheckpointState::load(&checkpoint).map_err(value_error)?;
    let mut stream = RngStream::new(seed, streams::EVAL);
    let z = Matrix::gaussian(count, ck.generator.in_dim(), &mut stream, 0.0, 1.0);
    let images = ck.generator.forward(&z).map_err(value_error)?;
    Ok(matrix_rows(&images))
}

/// Sample a checkpoint's generator and score it against a frozen label
/// model; returns a dict with `is_values`, `is_mean`, `is_std`, `gs`.
#[pyfunction]
#[pyo3(signature = (checkpoint, label_model, samples = 1000, splits = 10, seed = 0))]
fn score_checkpoint<'py>(
    py: Python<'py>,
    checkpoint: PathBuf,
    label_model: PathBuf,
    samples: usize,
    splits: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let ck = CheckpointState::load(&checkpoint).map_err(value_error)?;
    let model = LabelModel::load(&label_model).map_err(value_error)?;
    let mut stream = RngStream::new(seed, streams::EVAL);
    let report =
        score_generator(&ck.generator, &model, samples, splits, &mut stream).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("is_values", report.is_values)?;
    out.set_item("is_mean", report.is_mean)?;
    out.set_item("is_std", report.is_std)?;
    out.set_item("gs", report.gs)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// module
// ---------------------------------------------------------------------------

#[pymodule]
fn ppgan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRngStream>()?;
    m.add_class::<PyMomentLedger>()?;
    m.add_function(wrap_pyfunction!(clip_l2, m)?)?;
    m.add_function(wrap_pyfunction!(add_gaussian_noise, m)?)?;
    m.add_function(wrap_pyfunction!(py_calibrate_sigma_eq17, m)?)?;
    m.add_function(wrap_pyfunction!(py_calibrate_sigma_lemma1, m)?)?;
    m.add_function(wrap_pyfunction!(log_moment_subsampled_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(log_moment_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(py_encode_admission, m)?)?;
    m.add_function(wrap_pyfunction!(synth_ehr_demo, m)?)?;
    m.add_function(wrap_pyfunction!(sample_generator, m)?)?;
    m.add_function(wrap_pyfunction!(score_checkpoint, m)?)?;
    m.add("CODE_SPACE", CODE_SPACE)?;
    m.add("STREAM_TRAIN", streams::TRAIN)?;
    m.add("STREAM_DATA", streams::DATA)?;
    m.add("STREAM_EVAL", streams::EVAL)?;
    Ok(())
}
