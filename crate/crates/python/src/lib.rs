//! Python bindings for the depth quality index.

use std::path::PathBuf;

use dqi_core::dataset::load_stereo_with;
use dqi_core::synth::SynthConfig;
use dqi_core::{Dataset, ExtractionConfig, FeatureOptions, GeometryChoice, IqaMetric, ProtocolOptions, Raster};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: dqi_core::Error) -> PyErr {
    match err {
        dqi_core::Error::Io { .. } | dqi_core::Error::Decode { .. } | dqi_core::Error::Encode { .. } => {
            PyIOError::new_err(err.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = dqi_core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn plane(rows: Vec<Vec<f64>>) -> PyResult<Raster> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("plane rows must all have the same length"));
    }
    Raster::new(width, height, 1, rows.into_iter().flatten().collect()).map_err(to_py)
}

fn rows_of(r: &Raster) -> Vec<Vec<f64>> {
    r.data().chunks(r.width()).map(<[f64]>::to_vec).collect()
}

fn extraction(sampling: &str, fov: f64, out_size: Option<usize>) -> PyResult<ExtractionConfig> {
    let config = ExtractionConfig {
        fov,
        out_size,
        ..ExtractionConfig::omnidirectional(parse(sampling)?)
    };
    config.validate().map_err(to_py)?;
    Ok(config)
}

/// 24 depth features of a stereo pair read from image files.
#[pyfunction]
#[pyo3(signature = (left, right, geometry="auto", sampling="equatorial4", fov=90.0, out_size=None))]
fn depth_features(
    left: PathBuf,
    right: PathBuf,
    geometry: &str,
    sampling: &str,
    fov: f64,
    out_size: Option<usize>,
) -> PyResult<Vec<f64>> {
    let config = extraction(sampling, fov, out_size)?;
    let stereo = load_stereo_with(&left, &right, parse::<GeometryChoice>(geometry)?).map_err(to_py)?;
    let f = dqi_core::depth_features(&stereo, &config.for_geometry(stereo.geometry())).map_err(to_py)?;
    Ok(f.values().to_vec())
}

/// 26 overall-quality features: both eyes' local quality, then the depth features.
#[pyfunction]
#[pyo3(signature = (left, right, ref_left, ref_right, metric="msssim", geometry="auto", sampling="equatorial4", fov=90.0, out_size=None))]
#[allow(clippy::too_many_arguments)]
fn overall_features(
    left: PathBuf,
    right: PathBuf,
    ref_left: PathBuf,
    ref_right: PathBuf,
    metric: &str,
    geometry: &str,
    sampling: &str,
    fov: f64,
    out_size: Option<usize>,
) -> PyResult<Vec<f64>> {
    let config = extraction(sampling, fov, out_size)?;
    let choice = parse::<GeometryChoice>(geometry)?;
    let distorted = load_stereo_with(&left, &right, choice).map_err(to_py)?;
    let reference = load_stereo_with(&ref_left, &ref_right, choice).map_err(to_py)?;
    let f = dqi_core::overall_features(
        &reference,
        &distorted,
        parse::<IqaMetric>(metric)?,
        &config.for_geometry(distorted.geometry()),
    )
    .map_err(to_py)?;
    Ok(f.values().to_vec())
}

#[pyfunction]
fn srocc(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    dqi_core::srocc(&a, &b).map_err(to_py)
}

#[pyfunction]
fn krocc(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    dqi_core::krocc(&a, &b).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (objective, subjective, with_mapping=true))]
fn plcc(objective: Vec<f64>, subjective: Vec<f64>, with_mapping: bool) -> PyResult<f64> {
    dqi_core::plcc(&objective, &subjective, with_mapping).map_err(to_py)
}

#[pyfunction]
fn logistic_fit(objective: Vec<f64>, subjective: Vec<f64>) -> PyResult<[f64; 5]> {
    Ok(dqi_core::logistic_fit(&objective, &subjective).map_err(to_py)?.beta)
}

#[pyfunction]
fn logistic_apply(beta: [f64; 5], u: f64) -> f64 {
    dqi_core::logistic_apply(&dqi_core::LogisticFit { beta }, u)
}

#[pyfunction]
fn psnr(reference: Vec<Vec<f64>>, distorted: Vec<Vec<f64>>) -> PyResult<f64> {
    dqi_core::psnr(&plane(reference)?, &plane(distorted)?).map_err(to_py)
}

#[pyfunction]
fn ms_ssim(reference: Vec<Vec<f64>>, distorted: Vec<Vec<f64>>) -> PyResult<f64> {
    dqi_core::ms_ssim(&plane(reference)?, &plane(distorted)?).map_err(to_py)
}

type Plane = Vec<Vec<f64>>;

/// One-level Haar transform: `(LL, HL, LH, HH)`.
#[pyfunction]
fn haar(data: Vec<Vec<f64>>) -> PyResult<(Plane, Plane, Plane, Plane)> {
    let q = dqi_core::haar_decompose(&plane(data)?).map_err(to_py)?;
    Ok((rows_of(&q.ll), rows_of(&q.hl), rows_of(&q.lh), rows_of(&q.hh)))
}

/// Epsilon-SVR with an RBF kernel on z-scored features.
#[pyclass(name = "SvrModel", module = "dqi", frozen)]
struct PySvrModel {
    inner: dqi_core::SvrModel,
}

#[pymethods]
impl PySvrModel {
    #[staticmethod]
    #[pyo3(signature = (features, labels, c=100.0, epsilon=0.1, gamma=None))]
    fn train(features: Vec<Vec<f64>>, labels: Vec<f64>, c: f64, epsilon: f64, gamma: Option<f64>) -> PyResult<Self> {
        let params = dqi_core::SvrParams {
            c,
            epsilon,
            gamma,
            ..Default::default()
        };
        let inner = dqi_core::svr_train(&features, &labels, &params).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: dqi_core::load_model(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dqi_core::save_model(&self.inner, path).map_err(to_py)
    }

    fn predict(&self, features: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&features).map_err(to_py)
    }

    fn predict_many(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.inner.predict_many(&rows).map_err(to_py)
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim
    }

    #[getter]
    fn support_vector_count(&self) -> usize {
        self.inner.support_vectors.len()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "SvrModel(feature_dim={}, support_vectors={})",
            self.inner.feature_dim,
            self.inner.support_vectors.len()
        )
    }
}

/// Writes a synthetic dataset and returns the number of entries.
#[pyfunction]
#[pyo3(signature = (out_dir, config=None))]
fn synth(py: Python<'_>, out_dir: PathBuf, config: Option<&str>) -> PyResult<usize> {
    let cfg = match config {
        Some(text) => SynthConfig::parse(text).map_err(to_py)?,
        None => SynthConfig::default(),
    };
    let ds = py.detach(|| dqi_core::build_dataset(&cfg, &out_dir)).map_err(to_py)?;
    Ok(ds.len())
}

/// Repeated 80/20 evaluation of a manifest; returns medians and per-iteration scores.
#[pyfunction]
#[pyo3(signature = (manifest, task="depth", iterations=1000, seed=0, split="random", metric="msssim"))]
fn evaluate<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    task: &str,
    iterations: usize,
    seed: u64,
    split: &str,
    metric: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let task = parse(task)?;
    let options = ProtocolOptions {
        iterations,
        seed,
        split: parse(split)?,
        ..ProtocolOptions::default()
    };
    let features = FeatureOptions {
        metric: parse(metric)?,
        ..FeatureOptions::default()
    };
    let report = py
        .detach(|| {
            let ds = Dataset::load(&manifest)?;
            dqi_core::run_protocol(&ds, task, &features, &options)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("median_srocc", report.median_srocc)?;
    out.set_item("median_krocc", report.median_krocc)?;
    out.set_item("median_plcc", report.median_plcc)?;
    out.set_item("srocc", report.srocc)?;
    out.set_item("krocc", report.krocc)?;
    out.set_item("plcc", report.plcc)?;
    Ok(out)
}

#[pymodule]
fn dqi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySvrModel>()?;
    m.add_function(wrap_pyfunction!(depth_features, m)?)?;
    m.add_function(wrap_pyfunction!(overall_features, m)?)?;
    m.add_function(wrap_pyfunction!(srocc, m)?)?;
    m.add_function(wrap_pyfunction!(krocc, m)?)?;
    m.add_function(wrap_pyfunction!(plcc, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_fit, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_apply, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ms_ssim, m)?)?;
    m.add_function(wrap_pyfunction!(haar, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add("DEPTH_FEATURE_DIM", dqi_core::DEPTH_FEATURE_DIM)?;
    m.add("OVERALL_FEATURE_DIM", dqi_core::OVERALL_FEATURE_DIM)?;
    Ok(())
}
