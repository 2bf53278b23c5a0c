//! Python bindings: grippers, scenes, grasp execution, force closure,
//! planners and blind collection.

use std::path::PathBuf;

use grasplab::bench::{collect_blind, wilson_interval, BenchContext};
use grasplab::geometry::{Pose2, Vec2};
use grasplab::gripper::{finger_layout, GripperConfig};
use grasplab::planner::{checkpoint, forward_full, init_params, select_grasp, ModelParams, ModelSpec, Tensor};
use grasplab::scene::{generate_scene, render_color, render_depth};
use grasplab::sim::{self, Contact};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: grasplab::Error) -> PyErr {
    match e {
        grasplab::Error::PlacementInfeasible { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Gripper", frozen)]
struct PyGripper(GripperConfig);

#[pymethods]
impl PyGripper {
    /// `R3`, `P3`, `R4`, `P4` or a gripper file path.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        GripperConfig::load(spec).map(Self).map_err(to_py)
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id().to_string()
    }

    #[getter]
    fn finger_count(&self) -> usize {
        self.0.finger_count()
    }

    #[getter]
    fn actuator_count(&self) -> usize {
        self.0.actuator_count()
    }

    #[getter]
    fn skinned(&self) -> bool {
        self.0.finger().skinned
    }

    fn with_skin(&self, skinned: bool) -> Self {
        Self(self.0.with_skin(skinned))
    }

    /// `(start_x, start_y, dir_x, dir_y, travel_limit)` per finger.
    fn layout(&self, x: f64, y: f64, yaw: f64) -> Vec<(f64, f64, f64, f64, f64)> {
        finger_layout(&self.0, &Pose2::new(Vec2::new(x, y), yaw))
            .fingers
            .iter()
            .map(|f| (f.start.x, f.start.y, f.closing_direction.x, f.closing_direction.y, f.travel_limit))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Gripper('{}', fingers={})", self.0.id(), self.0.finger_count())
    }
}

#[pyclass(name = "GraspOutcome", frozen, get_all)]
struct PyGraspOutcome {
    success: bool,
    failure_reason: Option<String>,
    z: f64,
    contacts: usize,
    target: Option<usize>,
}

#[pymethods]
impl PyGraspOutcome {
    fn __repr__(&self) -> String {
        format!(
            "GraspOutcome(success={}, failure_reason={:?}, z={:.4}, contacts={})",
            self.success, self.failure_reason, self.z, self.contacts
        )
    }
}

#[pyclass(name = "Scene", frozen)]
struct PyScene {
    scene: grasplab::scene::Scene,
    ctx: BenchContext,
}

#[pymethods]
impl PyScene {
    /// Random non-overlapping scene over the whole shipped catalog, or over `objects`.
    #[new]
    #[pyo3(signature = (n_objects, seed, min_spacing=0.04, objects=None))]
    fn new(n_objects: usize, seed: u64, min_spacing: f64, objects: Option<Vec<String>>) -> PyResult<Self> {
        let ctx = BenchContext::default();
        let pool = match objects {
            Some(ids) => {
                let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
                ctx.catalog.subset(&refs).map_err(to_py)?
            }
            None => ctx.catalog.objects().to_vec(),
        };
        let scene = generate_scene(&pool, n_objects, min_spacing, seed, &ctx.workspace).map_err(to_py)?;
        Ok(Self { scene, ctx })
    }

    #[getter]
    fn objects(&self) -> Vec<String> {
        self.scene.placements.iter().map(|p| p.object.id.clone()).collect()
    }

    /// Object centres in pixel coordinates.
    fn object_pixels(&self) -> Vec<(f64, f64)> {
        self.scene
            .placements
            .iter()
            .map(|p| self.ctx.camera.world_to_pixel(p.pose.position()))
            .collect()
    }

    #[getter]
    fn image_size(&self) -> (usize, usize) {
        (self.ctx.camera.width, self.ctx.camera.height)
    }

    fn to_text(&self) -> String {
        self.scene.to_text()
    }

    /// Row-major RGB bytes of the top-down render.
    fn render<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &render_color(&self.scene, &self.ctx.camera).to_rgb8())
    }

    /// Row-major camera-frame depths in meters.
    fn depth(&self) -> Vec<f32> {
        render_depth(&self.scene, &self.ctx.camera).data
    }

    #[pyo3(signature = (gripper, u, v, theta=0.0))]
    fn execute(&self, gripper: &PyGripper, u: f64, v: f64, theta: f64) -> PyResult<PyGraspOutcome> {
        let pose = sim::GraspPose::new(u, v, theta);
        let out = sim::execute_grasp_with(&self.scene, &gripper.0, &pose, &self.ctx.camera, &self.ctx.sim)
            .map_err(to_py)?;
        Ok(PyGraspOutcome {
            success: out.success,
            failure_reason: out.failure_reason.map(|r| r.to_string()),
            z: out.z,
            contacts: out.contacts.len(),
            target: out.target,
        })
    }
}

#[pyclass(name = "Planner", frozen)]
struct PyPlanner(ModelParams);

#[pymethods]
impl PyPlanner {
    /// Freshly initialised planner with 1 or 9 angle bins.
    #[new]
    #[pyo3(signature = (n_bins, seed, tiny=false))]
    fn new(n_bins: usize, seed: u64, tiny: bool) -> PyResult<Self> {
        let spec = if tiny { ModelSpec::tiny(n_bins) } else { ModelSpec::default_for(n_bins) }.map_err(to_py)?;
        Ok(Self(init_params(&spec, seed)))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        checkpoint::load(&path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&self.0, &path).map_err(to_py)
    }

    #[getter]
    fn n_bins(&self) -> usize {
        self.0.n_bins()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.0.spec().parameter_count()
    }

    /// `(rows, cols, n_bins, probabilities)` with probabilities row-major.
    fn probability_map(&self, py: Python<'_>, scene: &PyScene) -> PyResult<(usize, usize, usize, Vec<f32>)> {
        let image = render_color(&scene.scene, &scene.ctx.camera);
        let map = py
            .detach(|| forward_full(&self.0, &Tensor::from_image(&image)))
            .map_err(to_py)?;
        Ok((map.rows(), map.cols(), map.n_bins(), map.grid.data))
    }

    /// Best grasp `(u, v, theta, z, probability)` inside the bin.
    fn plan(&self, py: Python<'_>, scene: &PyScene, gripper: &PyGripper) -> PyResult<(f64, f64, f64, f64, f32)> {
        let image = render_color(&scene.scene, &scene.ctx.camera);
        let depth = render_depth(&scene.scene, &scene.ctx.camera);
        let sel = scene.ctx.selection(gripper.0.finger().length);
        let g = py
            .detach(|| forward_full(&self.0, &Tensor::from_image(&image)).and_then(|m| select_grasp(&m, &depth, &sel)))
            .map_err(to_py)?;
        Ok((g.pose.u, g.pose.v, g.pose.theta, g.z, g.probability))
    }
}

fn contacts_from(points: Vec<(f64, f64, f64, f64, f64)>) -> Vec<Contact> {
    points
        .into_iter()
        .enumerate()
        .map(|(i, (x, y, nx, ny, mu))| Contact {
            finger_index: i,
            point: Vec2::new(x, y),
            outward_normal: Vec2::new(nx, ny).normalized(),
            friction: mu,
        })
        .collect()
}

/// Fingertip depth for the descent.
#[pyfunction]
fn plan_z(h_obj: f64, h_finger: f64, z_bin: f64, z_obj: f64, delta_h: f64) -> PyResult<f64> {
    sim::plan_z(h_obj, h_finger, z_bin, z_obj, delta_h).map_err(to_py)
}

/// Hull test on contacts `(x, y, normal_x, normal_y, mu)` about the origin.
#[pyfunction]
#[pyo3(signature = (contacts, rho=0.05))]
fn force_closure(contacts: Vec<(f64, f64, f64, f64, f64)>, rho: f64) -> bool {
    sim::force_closure(&contacts_from(contacts), Vec2::ZERO, rho)
}

/// Linear-programming test on the same contacts.
#[pyfunction]
#[pyo3(signature = (contacts, rho=0.05))]
fn force_closure_lp(contacts: Vec<(f64, f64, f64, f64, f64)>, rho: f64) -> bool {
    sim::force_closure_lp(&contacts_from(contacts), Vec2::ZERO, rho)
}

/// Blind grasps at uniform random poses; returns `(positive_fraction, records_text)`.
#[pyfunction]
#[pyo3(signature = (gripper, n_attempts, seed, objects_per_scene=5, min_spacing=0.04))]
fn collect(
    py: Python<'_>,
    gripper: &PyGripper,
    n_attempts: usize,
    seed: u64,
    objects_per_scene: usize,
    min_spacing: f64,
) -> PyResult<(f64, String)> {
    let ctx = BenchContext::default();
    let col = py
        .detach(|| collect_blind(&ctx, &gripper.0, n_attempts, objects_per_scene, min_spacing, seed))
        .map_err(to_py)?;
    Ok((col.dataset.positive_fraction(), col.dataset.records_text()))
}

/// 95% Wilson score interval.
#[pyfunction]
fn wilson(successes: usize, trials: usize) -> (f64, f64) {
    wilson_interval(successes, trials)
}

#[pymodule(name = "grasplab")]
fn grasplab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGripper>()?;
    m.add_class::<PyGraspOutcome>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyPlanner>()?;
    m.add_function(wrap_pyfunction!(plan_z, m)?)?;
    m.add_function(wrap_pyfunction!(force_closure, m)?)?;
    m.add_function(wrap_pyfunction!(force_closure_lp, m)?)?;
    m.add_function(wrap_pyfunction!(collect, m)?)?;
    m.add_function(wrap_pyfunction!(wilson, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
