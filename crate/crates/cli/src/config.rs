use std::path::{Path, PathBuf};

use grasplab::bench::{BenchContext, DEFAULT_MIN_SPACING, DEFAULT_OBJECTS_PER_SCENE, TRIALS_PER_OBJECT};
use grasplab::catalog::Catalog;
use grasplab::gripper::GripperConfig;
use grasplab::kv::KeyValueFile;
use grasplab::planner::TrainConfig;
use grasplab::scene::{CameraModel, WorkspaceModel};

use crate::{CliError, GlobalArgs};

pub const RUNS_ENV: &str = "GRASPLAB_RUNS_DIR";

/// Fully resolved settings: defaults, then the config file, then flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub runs_root: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub gripper: String,
    pub catalog_path: Option<PathBuf>,
    pub camera: CameraModel,
    pub workspace: WorkspaceModel,
    pub attempts: usize,
    pub objects: usize,
    pub spacing: f64,
    pub images: bool,
    pub train: TrainConfig,
    pub bins: usize,
    pub plan: String,
    pub trials: usize,
}

impl RunConfig {
    pub fn resolve(global: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &global.config {
            Some(path) => KeyValueFile::load(path)?,
            None => KeyValueFile::default(),
        };
        let run = file.section("run");
        let seed = match global.seed {
            Some(s) => s,
            None => run
                .get("seed")
                .ok_or_else(|| CliError::Usage("a seed is required: pass --seed or set [run] seed".into()))?
                .parse()
                .map_err(|_| CliError::Usage("[run] seed must be an unsigned integer".into()))?,
        };
        let cam = file.section("camera");
        let default_cam = CameraModel::default();
        let mut camera = CameraModel::centered(
            cam.usize_or("width", default_cam.width)?,
            cam.usize_or("height", default_cam.height)?,
            cam.f64_or("meters_per_pixel", default_cam.meters_per_pixel)?,
        );
        camera.camera_height = cam.f64_or("camera_height", default_cam.camera_height)?;
        let ws = file.section("workspace");
        let default_ws = WorkspaceModel::default();
        let workspace = WorkspaceModel {
            bin_length: ws.f64_or("bin_length", default_ws.bin_length)?,
            bin_width: ws.f64_or("bin_width", default_ws.bin_width)?,
            z_bin: ws.f64_or("z_bin", default_ws.z_bin)?,
            delta_h: ws.f64_or("delta_h", default_ws.delta_h)?,
        };
        let collect = file.section("collect");
        let train = file.section("train");
        let defaults = TrainConfig::default();
        let eval = file.section("eval");
        let runs_root = std::env::var_os(RUNS_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(run.get("runs_dir").unwrap_or("runs")));
        Ok(Self {
            name: global
                .name
                .clone()
                .unwrap_or_else(|| run.get("name").unwrap_or("default").to_string()),
            runs_root,
            seed,
            jobs: global.jobs.map_or_else(|| run.usize_or("jobs", 1), Ok)?,
            gripper: global
                .gripper
                .clone()
                .unwrap_or_else(|| run.get("gripper").unwrap_or("R3").to_string()),
            catalog_path: global
                .catalog
                .clone()
                .or_else(|| run.get("catalog").map(PathBuf::from)),
            camera,
            workspace,
            attempts: collect.usize_or("attempts", 1000)?,
            objects: collect.usize_or("objects", DEFAULT_OBJECTS_PER_SCENE)?,
            spacing: collect.f64_or("spacing", DEFAULT_MIN_SPACING)?,
            images: collect.bool_or("images", true)?,
            train: TrainConfig {
                batch: train.usize_or("batch", defaults.batch)?,
                lr: train.f64_or("lr", defaults.lr as f64)? as f32,
                momentum: train.f64_or("momentum", defaults.momentum as f64)? as f32,
                steps: train.usize_or("steps", defaults.steps)?,
                seed,
            },
            bins: train.usize_or("bins", 9)?,
            plan: eval.get("plan").unwrap_or("all").to_string(),
            trials: eval.usize_or("trials", TRIALS_PER_OBJECT)?,
        })
    }

    pub fn run_dir(&self) -> PathBuf {
        self.runs_root.join(&self.name)
    }

    pub fn sub(&self, name: &str) -> PathBuf {
        self.run_dir().join(name)
    }

    pub fn gripper(&self) -> Result<GripperConfig, CliError> {
        GripperConfig::load(&self.gripper).map_err(|e| CliError::Usage(format!("gripper `{}`: {e}", self.gripper)))
    }

    pub fn catalog(&self) -> Result<Catalog, CliError> {
        Ok(match &self.catalog_path {
            Some(p) => Catalog::load(p)?,
            None => Catalog::shipped(),
        })
    }

    pub fn context(&self) -> Result<BenchContext, CliError> {
        Ok(BenchContext {
            catalog: self.catalog()?,
            workspace: self.workspace,
            camera: self.camera,
            ..BenchContext::default()
        })
    }

    /// Settings that affect every output, for manifests.
    pub fn describe(&self) -> Vec<(String, String)> {
        let c = &self.camera;
        let w = &self.workspace;
        vec![
            ("seed".into(), self.seed.to_string()),
            ("camera".into(), format!("{}x{} mpp={} height={}", c.width, c.height, c.meters_per_pixel, c.camera_height)),
            (
                "workspace".into(),
                format!("{}x{} z_bin={} delta_h={}", w.bin_length, w.bin_width, w.z_bin, w.delta_h),
            ),
        ]
    }
}

pub fn relative_or(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}
