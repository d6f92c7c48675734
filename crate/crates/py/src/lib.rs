//! Python bindings for the `pengauge` core.
//!
//! Images cross the boundary as packed row-major RGB bytes and masks as
//! packed 0/1 bytes, so `numpy.frombuffer` gives a zero-fuss view on the
//! Python side without a numpy dependency here. Structured results come
//! back as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use serde::Serialize;

use pengauge::cluster::{self, ColorSpace};
use pengauge::fouling::{self, DistanceSource, EstimateConfig, FrameInfo, MaskList};
use pengauge::geometry::{self, CameraModel, NetSpec};
use pengauge::imaging::{self, LabeledMask, PixelClass};
use pengauge::rov::{self, MissionLog, MissionPlan, SimConfig};
use pengauge::segmentation::{self, TrainConfig, TrainingSet};
use pengauge::synth::{self, Degradation, SceneSpec};

create_exception!(pengauge, PengaugeError, PyException, "Raised for any error from the core library.");

fn err(e: pengauge::Error) -> PyErr {
    PengaugeError::new_err(format!("{}: {e}", e.kind()))
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PengaugeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn colorspace(name: &str) -> PyResult<ColorSpace> {
    name.parse().map_err(err)
}

fn net_camera(pitch: f64, twine: f64, focal_px: Option<f64>) -> PyResult<(NetSpec, CameraModel)> {
    let net = NetSpec::new(pitch, twine).map_err(err)?;
    let mut cam = CameraModel::synthetic();
    if let Some(f) = focal_px {
        cam = cam.with_focal_px(f);
    }
    Ok((net, cam))
}

/// RGB image.
#[pyclass(module = "pengauge", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Image(imaging::Image);

#[pymethods]
impl Image {
    /// Builds an image from `width * height * 3` packed RGB bytes.
    #[staticmethod]
    fn from_bytes(width: u32, height: u32, data: &[u8]) -> PyResult<Self> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(PengaugeError::new_err(format!(
                "invalid-argument: expected {} bytes, got {}",
                width as usize * height as usize * 3,
                data.len()
            )));
        }
        let px = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        imaging::Image::new(width, height, px).map(Image).map_err(err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        imaging::read_image(path).map(Image).map_err(err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        imaging::write_image(path, &self.0).map_err(err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn get(&self, x: u32, y: u32) -> PyResult<(u8, u8, u8)> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(pyo3::exceptions::PyIndexError::new_err((x, y)));
        }
        let [r, g, b] = self.0.get(x, y);
        Ok((r, g, b))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.pixels().as_flattened())
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.width(), self.0.height())
    }
}

/// Boolean per-pixel mask, `True` for net.
#[pyclass(module = "pengauge", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct BinaryMask(imaging::BinaryMask);

#[pymethods]
impl BinaryMask {
    /// Builds a mask from `width * height` bytes; any nonzero byte is set.
    #[staticmethod]
    fn from_bytes(width: u32, height: u32, data: &[u8]) -> PyResult<Self> {
        let bits = data.iter().map(|&b| b != 0).collect();
        imaging::BinaryMask::new(width, height, bits).map(BinaryMask).map_err(err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        imaging::read_mask(path).map(BinaryMask).map_err(err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        imaging::write_mask(path, &self.0).map_err(err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    fn count(&self) -> usize {
        self.0.count_ones()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        let bytes: Vec<u8> = self.0.bits().iter().map(|&b| b as u8).collect();
        PyBytes::new(py, &bytes)
    }

    fn __repr__(&self) -> String {
        format!("BinaryMask({}x{}, {} set)", self.0.width(), self.0.height(), self.0.count_ones())
    }
}

#[pyclass(module = "pengauge", frozen)]
pub struct ClusterModel(cluster::ClusterModel);

#[pymethods]
impl ClusterModel {
    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.0.objective()
    }

    #[getter]
    fn objective_history(&self) -> Vec<f64> {
        self.0.objective_history.clone()
    }

    #[getter]
    fn assignment(&self) -> Vec<u32> {
        self.0.assignment.clone()
    }

    fn centroid_rgb(&self, i: usize) -> PyResult<(u8, u8, u8)> {
        if i >= self.0.k {
            return Err(pyo3::exceptions::PyIndexError::new_err(i));
        }
        let [r, g, b] = self.0.centroid_rgb(i);
        Ok((r, g, b))
    }

    fn pixel_counts(&self) -> Vec<usize> {
        self.0.pixel_counts()
    }

    fn quantize(&self, image: &Image) -> PyResult<Image> {
        cluster::quantize(&image.0, &self.0).map(Image).map_err(err)
    }
}

/// Logistic-regression net/background pixel classifier.
#[pyclass(module = "pengauge", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PixelClassifier(segmentation::PixelClassifier);

#[pymethods]
impl PixelClassifier {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        segmentation::PixelClassifier::load(path).map(PixelClassifier).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn probability(&self, rgb: (u8, u8, u8)) -> f64 {
        self.0.probability([rgb.0, rgb.1, rgb.2])
    }

    fn predict(&self, image: &Image) -> BinaryMask {
        BinaryMask(self.0.predict_mask(&image.0))
    }

    fn __repr__(&self) -> String {
        format!("PixelClassifier({})", self.0.to_text().trim().replace('\n', "; "))
    }
}

/// A simulated inspection mission.
#[pyclass(module = "pengauge", frozen)]
pub struct Mission(MissionLog);

#[pymethods]
impl Mission {
    #[getter]
    fn duration(&self) -> f64 {
        self.0.duration()
    }

    #[getter]
    fn completed(&self) -> bool {
        self.0.status == rov::MissionStatus::Completed
    }

    fn capture_times(&self) -> Vec<f64> {
        self.0.capture_times()
    }

    fn waypoint_misses(&self) -> Vec<f64> {
        self.0.waypoint_misses()
    }

    fn cross_track_rms(&self) -> f64 {
        self.0.cross_track_rms()
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }
}

/// A rendered synthetic frame with its ground truth.
#[pyclass(module = "pengauge", frozen, get_all)]
pub struct Scene {
    frame: Image,
    net_mask: BinaryMask,
    clean_mask: BinaryMask,
    centers: Vec<(f64, f64)>,
    achieved_coverage: f64,
    distance: f64,
}

#[pyfunction]
#[pyo3(signature = (image, k = 8, colorspace = "lab", seed = 0))]
fn kmeans(image: &Image, k: usize, colorspace: &str, seed: u64) -> PyResult<ClusterModel> {
    cluster::kmeans(&image.0, k, self::colorspace(colorspace)?, seed).map(ClusterModel).map_err(err)
}

#[pyfunction]
fn dice(a: &BinaryMask, b: &BinaryMask) -> PyResult<f64> {
    segmentation::dice(&a.0, &b.0).map_err(err)
}

#[pyfunction]
fn detect_mesh_centers(mask: &BinaryMask) -> Vec<(f64, f64)> {
    geometry::detect_mesh_centers(&mask.0)
}

#[pyfunction]
fn estimate_pitch_px(centers: Vec<(f64, f64)>) -> PyResult<f64> {
    geometry::estimate_pitch_px(&centers).map_err(err)
}

/// Camera-to-net distance (m) from the mesh pitch in pixels.
#[pyfunction]
#[pyo3(signature = (pitch_px, pitch = 0.025, twine = 0.002, focal_px = None))]
fn estimate_distance(pitch_px: f64, pitch: f64, twine: f64, focal_px: Option<f64>) -> PyResult<f64> {
    let (net, cam) = net_camera(pitch, twine, focal_px)?;
    geometry::estimate_distance(pitch_px, &net, &cam).map_err(err)
}

#[pyfunction]
fn frame_coverage(ideal: &BinaryMask, actual: &BinaryMask) -> PyResult<f64> {
    fouling::frame_coverage(&ideal.0, &actual.0).map_err(err)
}

#[pyfunction]
fn contour_filter(mask: &BinaryMask, pitch_px: f64) -> PyResult<BinaryMask> {
    fouling::contour_filter(&mask.0, pitch_px).map(BinaryMask).map_err(err)
}

/// Renders one synthetic frame of net at `distance` with patches covering
/// `coverage` of the visible net.
#[pyfunction]
#[pyo3(signature = (distance = 1.0, coverage = 0.0, seed = 0, patch_size = 0.25, degrade = true))]
fn render_scene(distance: f64, coverage: f64, seed: u64, patch_size: f64, degrade: bool) -> PyResult<Scene> {
    let spec = SceneSpec {
        distance,
        target_coverage: coverage,
        seed,
        patch_size,
        degradation: if degrade { Degradation::default() } else { Degradation::none() },
        ..SceneSpec::default()
    };
    let gt = synth::render_scene(&spec).map_err(err)?;
    Ok(Scene {
        frame: Image(gt.frame),
        net_mask: BinaryMask(gt.net_mask),
        clean_mask: BinaryMask(gt.clean_mask),
        centers: gt.centers,
        achieved_coverage: gt.achieved_coverage,
        distance: gt.distance,
    })
}

/// Trains the pixel classifier on images paired with net masks; pixels set
/// in a mask are net, the rest background.
#[pyfunction]
#[pyo3(signature = (images, masks, colorspace = "rgb", epochs = None))]
fn train_classifier(
    images: Vec<PyRef<'_, Image>>,
    masks: Vec<PyRef<'_, BinaryMask>>,
    colorspace: &str,
    epochs: Option<usize>,
) -> PyResult<PixelClassifier> {
    if images.len() != masks.len() {
        return Err(PengaugeError::new_err("invalid-argument: images and masks differ in length"));
    }
    let labeled: Vec<LabeledMask> = masks.iter().map(|m| LabeledMask::from_binary(&m.0)).collect();
    let cs = self::colorspace(colorspace)?;
    let set = TrainingSet::from_examples(images.iter().map(|i| &i.0).zip(&labeled), cs).map_err(err)?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        colorspace: cs,
        epochs: epochs.unwrap_or(d.epochs),
        ..d
    };
    segmentation::train_logreg(&set, &cfg).map(|o| PixelClassifier(o.classifier)).map_err(err)
}

/// Flies the lawnmower survey in the simulator.
#[pyfunction]
#[pyo3(signature = (x_max = 14.0, z_min = 0.5, z_max = 2.5, n_vertical = 8, standoff = 1.0, seed = 0, noiseless = false))]
fn run_mission(
    x_max: f64,
    z_min: f64,
    z_max: f64,
    n_vertical: usize,
    standoff: f64,
    seed: u64,
    noiseless: bool,
) -> PyResult<Mission> {
    let plan = MissionPlan {
        x_max,
        z_min,
        z_max,
        n_vertical,
        standoff,
        ..MissionPlan::default()
    };
    let base = if noiseless { SimConfig::noiseless() } else { SimConfig::default() };
    let cfg = SimConfig { seed, ..base };
    rov::run_mission(&plan, &cfg).map(Mission).map_err(err)
}

/// Mission-level fouling estimate over per-frame net masks. The movement
/// filter needs `mission`; without it only the contour filter can run.
#[pyfunction]
#[pyo3(signature = (masks, times, mission = None, contour_filter = true, movement_filter = true, fixed_distance = None))]
fn estimate_mission<'py>(
    py: Python<'py>,
    masks: Vec<PyRef<'_, BinaryMask>>,
    times: Vec<f64>,
    mission: Option<PyRef<'_, Mission>>,
    contour_filter: bool,
    movement_filter: bool,
    fixed_distance: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    if masks.len() != times.len() {
        return Err(PengaugeError::new_err("invalid-argument: masks and times differ in length"));
    }
    let frames = times
        .iter()
        .enumerate()
        .map(|(i, &t)| FrameInfo {
            id: format!("f{i:04}"),
            t,
            off_net: false,
        })
        .collect();
    let mut list = MaskList {
        frames,
        masks: masks.iter().map(|m| m.0.clone()).collect(),
    };
    let cfg = EstimateConfig {
        contour_filter,
        movement_filter,
        distance: fixed_distance.map_or(DistanceSource::Estimated, DistanceSource::Fixed),
        ..EstimateConfig::default()
    };
    let track = mission.as_ref().map(|m| m.0.samples.as_slice());
    let report = fouling::estimate_mission(&mut list, track, &cfg).map_err(err)?;
    to_dict(py, &report)
}

/// Class names accepted in label masks.
#[pyfunction]
fn pixel_classes<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for v in 0..=u8::MAX {
        if let Some(c) = PixelClass::from_u8(v) {
            d.set_item(c.name(), v)?;
        }
    }
    Ok(d)
}

#[pymodule]
#[pyo3(name = "pengauge")]
fn pengauge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PengaugeError", m.py().get_type::<PengaugeError>())?;
    m.add_class::<Image>()?;
    m.add_class::<BinaryMask>()?;
    m.add_class::<ClusterModel>()?;
    m.add_class::<PixelClassifier>()?;
    m.add_class::<Mission>()?;
    m.add_class::<Scene>()?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(detect_mesh_centers, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_pitch_px, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_distance, m)?)?;
    m.add_function(wrap_pyfunction!(frame_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(contour_filter, m)?)?;
    m.add_function(wrap_pyfunction!(render_scene, m)?)?;
    m.add_function(wrap_pyfunction!(train_classifier, m)?)?;
    m.add_function(wrap_pyfunction!(run_mission, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mission, m)?)?;
    m.add_function(wrap_pyfunction!(pixel_classes, m)?)?;
    Ok(())
}
