//! Python bindings: scenarios, masks, analytic correlation tensors,
//! refocusing, Monte-Carlo frames and the depth-of-field analysis.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cpi_core::analysis::{self, DofOptions, Modality};
use cpi_core::engine::{self, CorrelationTensor, ImageProfile};
use cpi_core::speckle::{self, FrameStack, PostprocessParams, PropagationPlan};
use cpi_core::{io, ApertureMask, CpiError, ErrorClass, SampledGrid, ScenarioConfig};

fn err(e: CpiError) -> PyErr {
    match e.class() {
        ErrorClass::Io => PyIOError::new_err(e.to_string()),
        ErrorClass::Config | ErrorClass::Numeric => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for cpi_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

#[pyclass(name = "Scenario", module = "cpi_py", from_py_object)]
#[derive(Clone)]
pub struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    /// Reference setup when called without arguments; keywords override fields.
    #[new]
    #[pyo3(signature = (**fields))]
    fn new(fields: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut text = ScenarioConfig::paper_setup().to_canonical_string();
        if let Some(f) = fields {
            for (k, v) in f.iter() {
                let k: String = k.extract()?;
                let v: f64 = v.extract()?;
                text.push_str(&format!("{k} = {v:e}\n"));
            }
        }
        // later keys win
        let mut merged = std::collections::BTreeMap::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                merged.insert(k.to_string(), v.to_string());
            }
        }
        let text: String = merged.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        Ok(PyScenario {
            inner: ScenarioConfig::from_toml_str(&text).py()?,
        })
    }

    #[staticmethod]
    fn paper_setup() -> Self {
        PyScenario {
            inner: ScenarioConfig::paper_setup(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: ScenarioConfig::from_toml_str(text).py()?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: ScenarioConfig::from_file(path).py()?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_canonical_string()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn with_z_b(&self, z_b: f64) -> PyResult<Self> {
        let inner = self.inner.with_z_b(z_b);
        inner.validate().py()?;
        Ok(PyScenario { inner })
    }

    fn fields<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in self.inner.fields() {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    #[getter]
    fn z_a(&self) -> f64 {
        self.inner.z_a
    }

    #[getter]
    fn z_b(&self) -> f64 {
        self.inner.z_b
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    fn focused_resolution(&self) -> f64 {
        self.inner.focused_resolution()
    }

    fn dof_standard(&self) -> f64 {
        self.inner.dof_standard()
    }

    fn optimal_alpha(&self) -> f64 {
        engine::optimal_alpha(&self.inner)
    }

    fn derived_quantities<'py>(&self, py: Python<'py>, mask: &PyMask) -> PyResult<Bound<'py, PyDict>> {
        let q = self.inner.derived_quantities(&mask.inner);
        let d = PyDict::new(py);
        d.set_item("focused_resolution", q.focused_resolution)?;
        d.set_item("dof_standard", q.dof_standard)?;
        d.set_item("projected_resolution", q.projected_resolution)?;
        d.set_item("angular_resolution", q.angular_resolution)?;
        d.set_item("diffraction_term", q.diffraction_term)?;
        d.set_item("lens_term", q.lens_term)?;
        d.set_item("pixel_term", q.pixel_term)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Scenario(z_a={:e}, z_b={:e}, hash={})", self.inner.z_a, self.inner.z_b, &self.inner.hash()[..12])
    }
}

#[pyclass(name = "Mask", module = "cpi_py", from_py_object)]
#[derive(Clone)]
pub struct PyMask {
    inner: ApertureMask,
}

#[pymethods]
impl PyMask {
    /// Parses a spec such as `slits:n=3,a=99e-6,d=198e-6`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyMask {
            inner: spec.parse().py()?,
        })
    }

    #[staticmethod]
    fn slits(n: usize, width: f64, pitch: f64) -> PyResult<Self> {
        Ok(PyMask {
            inner: cpi_core::make_slit_mask(n, width, pitch).py()?,
        })
    }

    #[staticmethod]
    fn double_slit(d: f64) -> PyResult<Self> {
        Ok(PyMask {
            inner: analysis::double_slit(d).py()?,
        })
    }

    fn spec(&self) -> Option<String> {
        self.inner.spec_string()
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    fn n_slits(&self) -> usize {
        self.inner.n_slits()
    }

    fn transmission(&self, xs: Vec<f64>) -> Vec<f64> {
        xs.into_iter().map(|x| self.inner.transmission_at(x).re).collect()
    }

    fn __repr__(&self) -> String {
        format!("Mask({:?})", self.inner.spec_string().unwrap_or_default())
    }
}

#[pyclass(name = "Profile", module = "cpi_py", from_py_object)]
#[derive(Clone)]
pub struct PyProfile {
    inner: ImageProfile,
}

#[pymethods]
impl PyProfile {
    /// Sensor coordinates (m).
    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.grid.to_vec()
    }

    /// Coordinates mapped back to the object plane (m).
    #[getter]
    fn x_object(&self) -> Vec<f64> {
        self.inner.object_grid().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.as_str()
    }

    fn peak_normalized(&self) -> Self {
        PyProfile {
            inner: self.inner.peak_normalized(),
        }
    }

    fn visibility(&self, mask: &PyMask) -> PyResult<f64> {
        analysis::visibility(&self.inner, &mask.inner).py()
    }

    fn fwhm(&self) -> PyResult<f64> {
        Ok(analysis::width_metrics(&self.inner).py()?.fwhm)
    }

    fn centroid(&self) -> Option<f64> {
        self.inner.centroid()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Tensor", module = "cpi_py", from_py_object)]
#[derive(Clone)]
pub struct PyTensor {
    inner: CorrelationTensor,
    mask_spec: Option<String>,
}

#[pymethods]
impl PyTensor {
    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    #[getter]
    fn provenance(&self) -> &'static str {
        self.inner.provenance.as_str()
    }

    #[getter]
    fn x_a(&self) -> Vec<f64> {
        self.inner.grid_a.to_vec()
    }

    #[getter]
    fn x_b(&self) -> Vec<f64> {
        self.inner.grid_b.to_vec()
    }

    #[getter]
    fn scenario(&self) -> PyScenario {
        PyScenario {
            inner: self.inner.scenario,
        }
    }

    /// Row-major values, one row per S_a pixel.
    fn values(&self) -> Vec<Vec<f64>> {
        let (na, _) = self.inner.shape();
        (0..na).map(|i| self.inner.row(i).to_vec()).collect()
    }

    fn ghost(&self) -> PyProfile {
        PyProfile {
            inner: engine::ghost_image(&self.inner),
        }
    }

    fn refocus(&self) -> PyProfile {
        PyProfile {
            inner: engine::refocus(&self.inner).image,
        }
    }

    /// Perspective image at the S_b sample nearest `x_b`.
    fn coherent_slice(&self, x_b: f64) -> PyProfile {
        PyProfile {
            inner: engine::coherent_slice(&self.inner, x_b),
        }
    }

    fn nrmse(&self, reference: &PyTensor) -> PyResult<f64> {
        if self.inner.shape() != reference.inner.shape() {
            return Err(PyValueError::new_err("tensor shapes differ"));
        }
        Ok(engine::normalized_rmse(self.inner.values(), reference.inner.values()))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        io::write_tensor(path, &self.inner, self.mask_spec.as_deref()).py()
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let (inner, mask_spec) = io::read_tensor(path).py()?;
        Ok(PyTensor { inner, mask_spec })
    }
}

#[pyclass(name = "FrameStack", module = "cpi_py", from_py_object)]
#[derive(Clone)]
pub struct PyFrameStack {
    inner: FrameStack,
}

#[pymethods]
impl PyFrameStack {
    #[getter]
    fn n_frames(&self) -> usize {
        self.inner.n_frames()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn frame_a(&self, i: usize) -> PyResult<Vec<f32>> {
        self.check(i)?;
        Ok(self.inner.frame_a(i).to_vec())
    }

    fn frame_b(&self, i: usize) -> PyResult<Vec<f32>> {
        self.check(i)?;
        Ok(self.inner.frame_b(i).to_vec())
    }

    /// Normalised second moment of each S_a pixel; 2 for chaotic light.
    fn g2_a(&self) -> Vec<f64> {
        self.inner.g2_a()
    }

    fn binned(&self, factor_a: usize, factor_b: usize) -> PyResult<Self> {
        Ok(PyFrameStack {
            inner: self.inner.binned(factor_a, factor_b).py()?,
        })
    }

    /// Correlation tensor estimated from the frames, optionally cleaned up
    /// with a Fourier low-pass (`lowpass` in cycles per metre) and threshold.
    #[pyo3(signature = (lowpass=None, threshold=None))]
    fn estimate(&self, lowpass: Option<f64>, threshold: Option<f64>) -> PyResult<PyTensor> {
        let mut t = speckle::estimate_gamma(&self.inner).py()?;
        if lowpass.is_some() || threshold.is_some() {
            let params = PostprocessParams {
                lowpass_a: lowpass.unwrap_or(f64::INFINITY),
                threshold: threshold.unwrap_or(0.0),
                ..PostprocessParams::identity()
            };
            t = speckle::postprocess_tensor(&t, &params).py()?;
        }
        Ok(PyTensor {
            inner: t,
            mask_spec: self.inner.mask_spec.clone(),
        })
    }

    #[pyo3(signature = (path, chunk_frames=256))]
    fn save(&self, path: &str, chunk_frames: usize) -> PyResult<()> {
        io::write_frame_stack(path, &self.inner, chunk_frames).py()
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyFrameStack {
            inner: io::read_frame_stack(path).py()?,
        })
    }
}

impl PyFrameStack {
    fn check(&self, i: usize) -> PyResult<()> {
        if i >= self.inner.n_frames() {
            return Err(PyValueError::new_err(format!("frame {i} out of range")));
        }
        Ok(())
    }
}

fn grid_arg(g: Option<(usize, f64)>) -> PyResult<Option<SampledGrid>> {
    g.map(|(n, dx)| SampledGrid::centered(n, dx)).transpose().py()
}

/// Analytic correlation tensor. Grids are `(points, spacing)` pairs centred
/// on the axis; both are sized from the mask when omitted.
#[pyfunction]
#[pyo3(signature = (scenario, mask, grid_a=None, grid_b=None))]
fn gamma_map(
    scenario: &PyScenario,
    mask: &PyMask,
    grid_a: Option<(usize, f64)>,
    grid_b: Option<(usize, f64)>,
) -> PyResult<PyTensor> {
    let (da, db) = analysis::cpi_grids(&scenario.inner, &mask.inner).py()?;
    let ga = grid_arg(grid_a)?.unwrap_or(da);
    let gb = grid_arg(grid_b)?.unwrap_or(db);
    Ok(PyTensor {
        inner: engine::gamma_map(&scenario.inner, &mask.inner, &ga, &gb).py()?,
        mask_spec: mask.inner.spec_string(),
    })
}

/// Image of a mask at object distance `z_b` in one modality: `standard`,
/// `standard-pi:N`, `cpi` or `cpi-coherent`.
#[pyfunction]
fn image(modality: &str, scenario: &PyScenario, mask: &PyMask, z_b: f64) -> PyResult<PyProfile> {
    let m: Modality = modality.parse().py()?;
    Ok(PyProfile {
        inner: analysis::modality_image(m, &scenario.inner, &mask.inner, z_b).py()?,
    })
}

/// Monte-Carlo frames on sensors of `pixels_a` and `pixels_b` pixels.
#[pyfunction]
#[pyo3(signature = (scenario, mask, n_frames, seed=42, pixels_a=128, pixels_b=64))]
fn generate_frames(
    scenario: &PyScenario,
    mask: &PyMask,
    n_frames: usize,
    seed: u64,
    pixels_a: usize,
    pixels_b: usize,
) -> PyResult<PyFrameStack> {
    let plan = PropagationPlan::desk(&scenario.inner, pixels_a, pixels_b).py()?;
    Ok(PyFrameStack {
        inner: speckle::generate_frames(&scenario.inner, &mask.inner, &plan, n_frames, seed).py()?,
    })
}

/// Visibility map over slit separations (units of the focused resolution)
/// and defocus distances. Returns a dict with `values` as rows per separation.
#[pyfunction]
fn visibility_map<'py>(
    py: Python<'py>,
    modality: &str,
    scenario: &PyScenario,
    d_over_dxf: Vec<f64>,
    defocus: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let m: Modality = modality.parse().py()?;
    let map = analysis::visibility_map(m, &scenario.inner, &d_over_dxf, &defocus).py()?;
    let rows: Vec<Vec<f64>> = map.values.chunks(defocus.len()).map(<[f64]>::to_vec).collect();
    let d = PyDict::new(py);
    d.set_item("modality", map.modality.to_string())?;
    d.set_item("d_over_dxf", map.d_over_dxf)?;
    d.set_item("defocus", map.defocus)?;
    d.set_item("values", rows)?;
    d.set_item("failed_cells", map.failed_cells)?;
    if let Some(b) = map.bound {
        let b: Vec<(f64, f64)> = b.iter().map(|iv| (iv.near, iv.far)).collect();
        d.set_item("bound", b)?;
    }
    Ok(d)
}

fn interval<'py>(py: Python<'py>, iv: &analysis::DofInterval) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("near", iv.near)?;
    d.set_item("far", iv.far)?;
    d.set_item("near_unbounded", iv.near_unbounded)?;
    d.set_item("far_unbounded", iv.far_unbounded)?;
    d.set_item("resolved", iv.resolved)?;
    d.set_item("width", iv.width())?;
    Ok(d)
}

/// Depth of field of standard, plenoptic and CPI imaging for a double slit
/// of separation `d` (m).
#[pyfunction]
#[pyo3(signature = (scenario, d, n_u=3, threshold=0.1))]
fn dof_report<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    d: f64,
    n_u: u32,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = DofOptions {
        n_u,
        threshold,
        ..DofOptions::default()
    };
    let r = analysis::dof_report(&scenario.inner, d, &opts).py()?;
    let out = PyDict::new(py);
    out.set_item("d", r.d)?;
    out.set_item("standard", interval(py, &r.standard)?)?;
    out.set_item("plenoptic", interval(py, &r.plenoptic)?)?;
    out.set_item("cpi", interval(py, &r.cpi)?)?;
    out.set_item("cpi_over_standard", r.cpi_over_standard())?;
    out.set_item("cpi_over_plenoptic", r.cpi_over_plenoptic())?;
    out.set_item("summary", r.summary_table())?;
    Ok(out)
}

/// Range of object distances where a double slit of separation `d` is
/// refocusable by the geometric criterion.
#[pyfunction]
fn geometric_bound<'py>(py: Python<'py>, scenario: &PyScenario, d: f64) -> PyResult<Bound<'py, PyDict>> {
    let mask = analysis::double_slit(d).py()?;
    let b = analysis::geometric_bound(&scenario.inner, &mask, &DofOptions::default()).py()?;
    interval(py, &b)
}

#[pymodule]
fn cpi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyTensor>()?;
    m.add_class::<PyFrameStack>()?;
    m.add_function(wrap_pyfunction!(gamma_map, m)?)?;
    m.add_function(wrap_pyfunction!(image, m)?)?;
    m.add_function(wrap_pyfunction!(generate_frames, m)?)?;
    m.add_function(wrap_pyfunction!(visibility_map, m)?)?;
    m.add_function(wrap_pyfunction!(dof_report, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_bound, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
