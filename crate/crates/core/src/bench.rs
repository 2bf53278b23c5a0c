//! Data collection, the five evaluation experiments, the friction ablation,
//! dataset composition and reporting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::catalog::{Catalog, NOVEL_OBJECTS, SEEN_OBJECTS};
use crate::error::{Error, Result};
use crate::gripper::GripperConfig;
use crate::planner::{
    angle_bin, forward_full, select_grasp, ModelParams, PlannedGrasp, Selection, Tensor, TrainSample,
};
use crate::scene::{
    generate_scene, render_color, render_depth, render_owners, render_patch, CameraModel, Scene,
    WorkspaceModel,
};
use crate::sim::{execute_grasp_with, FailureReason, GraspPose, SimParams};

pub const DEFAULT_OBJECTS_PER_SCENE: usize = 5;
pub const DEFAULT_MIN_SPACING: f64 = 0.04;
pub const TRIALS_PER_OBJECT: usize = 10;
const WILSON_Z: f64 = 1.959963984540054;

const STREAM_SCENE: u64 = 1;
const STREAM_POSE: u64 = 2;
const STREAM_EVAL: u64 = 3;
const STREAM_HELD_OUT: u64 = 4;

/// Independent 64-bit seed for `(stream, index)` under a master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything a run shares besides seeds and planners.
#[derive(Debug, Clone)]
pub struct BenchContext {
    pub catalog: Catalog,
    pub workspace: WorkspaceModel,
    pub camera: CameraModel,
    pub sim: SimParams,
}

impl Default for BenchContext {
    fn default() -> Self {
        Self {
            catalog: Catalog::shipped(),
            workspace: WorkspaceModel::default(),
            camera: CameraModel::default(),
            sim: SimParams::default(),
        }
    }
}

impl BenchContext {
    pub fn validate(&self, finger_length: f64) -> Result<()> {
        self.workspace.validate(finger_length)?;
        self.camera.validate(&self.workspace)
    }

    /// Pixel box of the bin floor, used to restrict grasp selection.
    pub fn selection(&self, finger_length: f64) -> Selection {
        let (u0, u1, v0, v1) = self.camera.bin_pixel_bounds(&self.workspace);
        Selection {
            workspace: self.workspace,
            finger_length,
            region: Some((u0 as f64, u1 as f64, v0 as f64, v1 as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspRecord {
    pub image_ref: String,
    pub u: f64,
    pub v: f64,
    pub theta: f64,
    pub executed_bin: usize,
    pub label: bool,
    pub config_id: String,
    pub scene_seed: u64,
}

pub const RECORDS_HEADER: &str = "# image_ref u v theta executed_bin label config_id scene_seed";

impl GraspRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {:.17e} {} {} {} {}",
            self.image_ref,
            self.u,
            self.v,
            self.theta,
            self.executed_bin,
            u8::from(self.label),
            self.config_id,
            self.scene_seed
        )
    }

    pub fn parse_line(line: &str, location: &str) -> Result<Self> {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 8 {
            return Err(Error::parse(location, format!("expected 8 fields, got {}", t.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(location, format!("bad number `{s}`")));
        let int = |s: &str| s.parse::<u64>().map_err(|_| Error::parse(location, format!("bad integer `{s}`")));
        let label = match t[5] {
            "1" => true,
            "0" => false,
            other => return Err(Error::parse(location, format!("label must be 0 or 1, got `{other}`"))),
        };
        let record = Self {
            image_ref: t[0].to_string(),
            u: num(t[1])?,
            v: num(t[2])?,
            theta: num(t[3])?,
            executed_bin: int(t[4])? as usize,
            label,
            config_id: t[6].to_string(),
            scene_seed: int(t[7])?,
        };
        if angle_bin(record.theta).ok() != Some(record.executed_bin) {
            return Err(Error::parse(location, "executed_bin does not match theta"));
        }
        Ok(record)
    }
}

/// Grasp records with the scene each was executed in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<GraspRecord>,
    pub scenes: Vec<Scene>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.records.iter().filter(|r| r.label).count()
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.positives() as f64 / self.len() as f64
        }
    }

    pub fn records_text(&self) -> String {
        let mut out = String::from(RECORDS_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    pub fn parse_records(text: &str, origin: &str) -> Result<Vec<GraspRecord>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| GraspRecord::parse_line(l, &format!("{origin}:{}", i + 1)))
            .collect()
    }

    /// Writes `records.txt`, `scenes/<n>.txt` and, if asked, `images/<n>.png`.
    pub fn write(&self, dir: &Path, camera: &CameraModel, with_images: bool) -> Result<()> {
        for sub in ["scenes", "images"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        let path = dir.join("records.txt");
        fs::write(&path, self.records_text()).map_err(|e| Error::io(&path, e))?;
        for (i, scene) in self.scenes.iter().enumerate() {
            let p = dir.join("scenes").join(format!("{i:05}.txt"));
            fs::write(&p, scene.to_text()).map_err(|e| Error::io(&p, e))?;
        }
        if with_images {
            self.records
                .par_iter()
                .zip(self.scenes.par_iter())
                .try_for_each(|(r, s)| render_color(s, camera).save_color_png(&dir.join(&r.image_ref)))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, catalog: &Catalog, workspace: &WorkspaceModel) -> Result<Self> {
        let path = dir.join("records.txt");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let records = Self::parse_records(&text, &path.display().to_string())?;
        let scenes = (0..records.len())
            .map(|i| {
                let p = dir.join("scenes").join(format!("{i:05}.txt"));
                let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                Scene::parse(&text, catalog, *workspace)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records, scenes })
    }

    /// Planner inputs; `n_bins == 1` maps every record to bin 0.
    pub fn training_samples(&self, camera: &CameraModel, n_bins: usize) -> Vec<TrainSample> {
        self.records
            .par_iter()
            .zip(self.scenes.par_iter())
            .map(|(r, s)| TrainSample {
                patch: render_patch(s, camera, r.u.round() as i64, r.v.round() as i64).to_rgb8(),
                label: r.label,
                executed_bin: if n_bins == 1 { 0 } else { r.executed_bin },
            })
            .collect()
    }
}

/// One executed grasp: `episode_id config_id u v theta_deg z success failure_reason seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeLog {
    pub episode_id: usize,
    pub config_id: String,
    pub u: f64,
    pub v: f64,
    pub theta: f64,
    pub z: f64,
    pub success: bool,
    pub failure_reason: Option<FailureReason>,
    pub seed: u64,
    /// Catalog id of the targeted object, if any.
    pub object: Option<String>,
}

impl OutcomeLog {
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {:.6} {:.6} {} {} {}",
            self.episode_id,
            self.config_id,
            self.u,
            self.v,
            self.theta.to_degrees(),
            self.z,
            u8::from(self.success),
            self.failure_reason.map_or("-", |r| r.as_str()),
            self.seed
        )
    }
}

pub fn outcome_log_text(log: &[OutcomeLog]) -> String {
    let mut out = String::from("# episode_id config_id u v theta_deg z success failure_reason seed\n");
    for l in log {
        out.push_str(&l.to_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    pub dataset: Dataset,
    pub log: Vec<OutcomeLog>,
}

/// Blind grasps at uniform pixels and yaws, one fresh scene per attempt.
pub fn collect_blind(
    ctx: &BenchContext,
    config: &GripperConfig,
    n_attempts: usize,
    objects_per_scene: usize,
    min_spacing: f64,
    seed: u64,
) -> Result<Collection> {
    if n_attempts == 0 {
        return Err(Error::invalid("collection needs at least one attempt"));
    }
    ctx.validate(config.finger().length)?;
    let objects = ctx.catalog.subset(&SEEN_OBJECTS)?;
    let (u0, u1, v0, v1) = ctx.camera.bin_pixel_bounds(&ctx.workspace);
    let attempts = (0..n_attempts)
        .into_par_iter()
        .map(|i| {
            let scene_seed = derive_seed(seed, STREAM_SCENE, i as u64);
            let scene = generate_scene(&objects, objects_per_scene, min_spacing, scene_seed, &ctx.workspace)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_POSE, i as u64));
            let u = rng.random_range(u0..=u1) as f64;
            let v = rng.random_range(v0..=v1) as f64;
            let theta = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
            let pose = GraspPose::new(u, v, theta);
            let out = execute_grasp_with(&scene, config, &pose, &ctx.camera, &ctx.sim)?;
            let record = GraspRecord {
                image_ref: format!("images/{i:05}.png"),
                u,
                v,
                theta: pose.theta,
                executed_bin: angle_bin(pose.theta)?,
                label: out.success,
                config_id: config.id().to_string(),
                scene_seed,
            };
            let log = OutcomeLog {
                episode_id: i,
                config_id: config.id().to_string(),
                u,
                v,
                theta: pose.theta,
                z: out.z,
                success: out.success,
                failure_reason: out.failure_reason,
                seed: scene_seed,
                object: out.target.map(|t| scene.placements[t].object.id.clone()),
            };
            Ok((record, scene, log))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(n_attempts);
    let mut scenes = Vec::with_capacity(n_attempts);
    let mut log = Vec::with_capacity(n_attempts);
    for (r, s, l) in attempts {
        records.push(r);
        scenes.push(s);
        log.push(l);
    }
    Ok(Collection {
        dataset: Dataset { records, scenes },
        log,
    })
}

/// Seeded subsample with exactly the requested label counts, in original order.
pub fn compose_dataset(dataset: &Dataset, positives: usize, negatives: usize, seed: u64) -> Result<Dataset> {
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..dataset.len()).partition(|&i| dataset.records[i].label);
    if pos.len() < positives || neg.len() < negatives {
        return Err(Error::invalid(format!(
            "requested {positives} positives and {negatives} negatives, have {} and {}",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut chosen: Vec<usize> = pos[..positives].iter().chain(&neg[..negatives]).copied().collect();
    chosen.sort_unstable();
    Ok(Dataset {
        records: chosen.iter().map(|&i| dataset.records[i].clone()).collect(),
        scenes: chosen.iter().map(|&i| dataset.scenes[i].clone()).collect(),
    })
}

/// One evaluation experiment row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentPlan {
    pub id: usize,
    pub use_rotation: bool,
    pub config_id: String,
    pub trials_per_object: usize,
    pub objects: Vec<String>,
}

impl ExperimentPlan {
    /// Plans 1–5: R3 with rotation, then R3, P3, R4, P4 without.
    pub fn table(id: usize) -> Result<Self> {
        let (use_rotation, config) = match id {
            1 => (true, "R3"),
            2 => (false, "R3"),
            3 => (false, "P3"),
            4 => (false, "R4"),
            5 => (false, "P4"),
            _ => return Err(Error::invalid(format!("experiment plan must be 1-5, got {id}"))),
        };
        Ok(Self {
            id,
            use_rotation,
            config_id: config.to_string(),
            trials_per_object: TRIALS_PER_OBJECT,
            objects: SEEN_OBJECTS.iter().chain(&NOVEL_OBJECTS).map(|s| s.to_string()).collect(),
        })
    }

    pub fn all() -> Vec<Self> {
        (1..=5).map(|i| Self::table(i).expect("plans 1-5 exist")).collect()
    }

    pub fn n_bins(&self) -> usize {
        if self.use_rotation {
            9
        } else {
            1
        }
    }

    pub fn total_trials(&self) -> usize {
        self.trials_per_object * self.objects.len()
    }

    pub fn gripper(&self) -> Result<GripperConfig> {
        GripperConfig::canonical(&self.config_id)
    }
}

/// Single-object evaluation scenes shared by every plan under one seed.
pub fn evaluation_scenes(ctx: &BenchContext, plan: &ExperimentPlan, seed: u64) -> Result<Vec<Scene>> {
    (0..plan.total_trials())
        .into_par_iter()
        .map(|t| {
            let object = ctx.catalog.require(&plan.objects[t / plan.trials_per_object])?;
            generate_scene(
                std::slice::from_ref(object),
                1,
                0.0,
                derive_seed(seed, STREAM_EVAL, t as u64),
                &ctx.workspace,
            )
        })
        .collect()
}

/// Full-image inference and argmax selection per scene.
pub fn plan_grasps(ctx: &BenchContext, params: &ModelParams, scenes: &[Scene], finger_length: f64) -> Result<Vec<PlannedGrasp>> {
    let selection = ctx.selection(finger_length);
    scenes
        .par_iter()
        .map(|scene| {
            let color = render_color(scene, &ctx.camera);
            let depth = render_depth(scene, &ctx.camera);
            let map = forward_full(params, &Tensor::from_image(&color))?;
            select_grasp(&map, &depth, &selection)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub config_id: String,
    pub planner_id: String,
    pub object_id: String,
    pub seen: bool,
    pub successes: usize,
    pub trials: usize,
}

impl ReportRow {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn wilson(&self) -> (f64, f64) {
        wilson_interval(self.successes, self.trials)
    }
}

/// Wilson score interval at 95 %.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

pub const REPORT_HEADER: &str = "config,planner,object,seen,successes,trials,rate,ci_low,ci_high";

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let (lo, hi) = r.wilson();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{:.4},{:.4}",
            r.config_id,
            r.planner_id,
            r.object_id,
            r.seen,
            r.successes,
            r.trials,
            r.rate(),
            lo,
            hi
        );
    }
    out
}

pub fn planner_id(n_bins: usize) -> String {
    format!("n={n_bins}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub plan_id: usize,
    pub rows: Vec<ReportRow>,
    pub log: Vec<OutcomeLog>,
}

impl ExperimentResult {
    pub fn mean_rate(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.rate()))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Executes planned grasps with a gripper and aggregates per object.
pub fn execute_plan(
    ctx: &BenchContext,
    plan: &ExperimentPlan,
    config: &GripperConfig,
    scenes: &[Scene],
    grasps: &[PlannedGrasp],
    n_bins: usize,
) -> Result<ExperimentResult> {
    if scenes.len() != plan.total_trials() || grasps.len() != scenes.len() {
        return Err(Error::invalid("one scene and one grasp per trial required"));
    }
    let log = scenes
        .par_iter()
        .zip(grasps.par_iter())
        .enumerate()
        .map(|(t, (scene, g))| {
            let theta = if plan.use_rotation { g.pose.theta } else { 0.0 };
            let pose = GraspPose::new(g.pose.u, g.pose.v, theta);
            let out = execute_grasp_with(scene, config, &pose, &ctx.camera, &ctx.sim)?;
            Ok(OutcomeLog {
                episode_id: t,
                config_id: config.id().to_string(),
                u: pose.u,
                v: pose.v,
                theta,
                z: out.z,
                success: out.success,
                failure_reason: out.failure_reason,
                seed: scene.seed,
                object: Some(plan.objects[t / plan.trials_per_object].clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = plan
        .objects
        .iter()
        .enumerate()
        .map(|(i, object)| {
            let trials = &log[i * plan.trials_per_object..(i + 1) * plan.trials_per_object];
            ReportRow {
                config_id: config.id().to_string(),
                planner_id: planner_id(n_bins),
                object_id: object.clone(),
                seen: SEEN_OBJECTS.contains(&object.as_str()),
                successes: trials.iter().filter(|l| l.success).count(),
                trials: trials.len(),
            }
        })
        .collect();
    Ok(ExperimentResult {
        plan_id: plan.id,
        rows,
        log,
    })
}

fn check_planner(plan: &ExperimentPlan, params: &ModelParams) -> Result<()> {
    if params.n_bins() != plan.n_bins() {
        return Err(Error::invalid(format!(
            "plan {} {} rotation and needs a {}-bin planner; checkpoint has {} bins",
            plan.id,
            if plan.use_rotation { "uses" } else { "does not use" },
            plan.n_bins(),
            params.n_bins()
        )));
    }
    Ok(())
}

pub fn run_experiment(ctx: &BenchContext, plan: &ExperimentPlan, params: &ModelParams, seed: u64) -> Result<ExperimentResult> {
    check_planner(plan, params)?;
    let config = plan.gripper()?;
    let scenes = evaluation_scenes(ctx, plan, seed)?;
    let grasps = plan_grasps(ctx, params, &scenes, config.finger().length)?;
    execute_plan(ctx, plan, &config, &scenes, &grasps, params.n_bins())
}

/// Runs several plans, sharing scenes and inference between plans with the same planner.
pub fn run_experiments(
    ctx: &BenchContext,
    plans: &[ExperimentPlan],
    planners: &[&ModelParams],
    seed: u64,
) -> Result<Vec<ExperimentResult>> {
    let mut cache: BTreeMap<(usize, Vec<String>, usize), (Vec<Scene>, Vec<PlannedGrasp>)> = BTreeMap::new();
    let mut out = Vec::with_capacity(plans.len());
    for plan in plans {
        let params = planners
            .iter()
            .find(|p| p.n_bins() == plan.n_bins())
            .ok_or_else(|| Error::invalid(format!("plan {} needs a {}-bin planner", plan.id, plan.n_bins())))?;
        let config = plan.gripper()?;
        let key = (plan.n_bins(), plan.objects.clone(), plan.trials_per_object);
        if !cache.contains_key(&key) {
            let scenes = evaluation_scenes(ctx, plan, seed)?;
            let grasps = plan_grasps(ctx, params, &scenes, config.finger().length)?;
            cache.insert(key.clone(), (scenes, grasps));
        }
        let (scenes, grasps) = &cache[&key];
        out.push(execute_plan(ctx, plan, &config, scenes, grasps, plan.n_bins())?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    pub skinned: ExperimentResult,
    pub bare: ExperimentResult,
}

impl Ablation {
    pub fn drop(&self) -> f64 {
        self.skinned.mean_rate() - self.bare.mean_rate()
    }

    /// Trials that succeed bare but fail skinned.
    pub fn violations(&self) -> usize {
        self.skinned
            .log
            .iter()
            .zip(&self.bare.log)
            .filter(|(s, b)| b.success && !s.success)
            .count()
    }

    pub fn paired_csv(&self) -> String {
        let mut out = String::from("object,seen,trials,skinned_successes,bare_successes,skinned_rate,bare_rate,delta\n");
        for (s, b) in self.skinned.rows.iter().zip(&self.bare.rows) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.4},{:.4},{:.4}",
                s.object_id,
                s.seen,
                s.trials,
                s.successes,
                b.successes,
                s.rate(),
                b.rate(),
                s.rate() - b.rate()
            );
        }
        out
    }
}

/// Same trials with skinned and bare fingers.
pub fn friction_ablation(ctx: &BenchContext, plan: &ExperimentPlan, params: &ModelParams, seed: u64) -> Result<Ablation> {
    let scenes = evaluation_scenes(ctx, plan, seed)?;
    let config = plan.gripper()?;
    check_planner(plan, params)?;
    let grasps = plan_grasps(ctx, params, &scenes, config.finger().length)?;
    friction_ablation_with(ctx, plan, &scenes, &grasps)
}

/// Ablation on already planned grasps.
pub fn friction_ablation_with(
    ctx: &BenchContext,
    plan: &ExperimentPlan,
    scenes: &[Scene],
    grasps: &[PlannedGrasp],
) -> Result<Ablation> {
    let config = plan.gripper()?;
    if plan.use_rotation || config.arrangement().is_parallel() {
        return Err(Error::invalid("the friction ablation runs on a radial plan without rotation"));
    }
    let n = plan.n_bins();
    Ok(Ablation {
        skinned: execute_plan(ctx, plan, &config.with_skin(true), scenes, grasps, n)?,
        bare: execute_plan(ctx, plan, &config.with_skin(false), scenes, grasps, n)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub config_id: String,
    pub planner_id: String,
    pub mean: f64,
    pub seen_mean: f64,
    pub novel_mean: f64,
    pub objects: usize,
}

/// Means of per-object rates per `(config, planner)`, first-seen order.
pub fn summarize(rows: &[ReportRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::invalid("nothing to summarize"));
    }
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let k = (r.config_id.clone(), r.planner_id.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    Ok(keys
        .into_iter()
        .map(|(c, p)| {
            let group: Vec<&ReportRow> = rows.iter().filter(|r| r.config_id == c && r.planner_id == p).collect();
            SummaryRow {
                mean: mean(group.iter().map(|r| r.rate())),
                seen_mean: mean(group.iter().filter(|r| r.seen).map(|r| r.rate())),
                novel_mean: mean(group.iter().filter(|r| !r.seen).map(|r| r.rate())),
                objects: group.len(),
                config_id: c,
                planner_id: p,
            }
        })
        .collect())
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("config,planner,mean,seen_mean,novel_mean,objects\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{}",
            r.config_id, r.planner_id, r.mean, r.seen_mean, r.novel_mean, r.objects
        );
    }
    out
}

/// Parses a report written by [`report_csv`].
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(REPORT_HEADER) {
        return Err(Error::parse("report", "missing report header"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let at = format!("report row {}", i + 1);
            if f.len() != 9 {
                return Err(Error::parse(&at, "expected 9 columns"));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(&at, format!("bad count `{s}`")));
            Ok(ReportRow {
                config_id: f[0].to_string(),
                planner_id: f[1].to_string(),
                object_id: f[2].to_string(),
                seen: f[3] == "true",
                successes: int(f[4])?,
                trials: int(f[5])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionScene {
    pub object: String,
    pub centroid_probability: f32,
    pub empty_median: f32,
}

impl DetectionScene {
    pub fn passed(&self) -> bool {
        self.centroid_probability > self.empty_median
    }
}

/// Object-centroid cell against the median empty cell on held-out single-object scenes.
pub fn detection_check(ctx: &BenchContext, params: &ModelParams, n_scenes: usize, seed: u64) -> Result<Vec<DetectionScene>> {
    let objects = ctx.catalog.objects();
    let (u0, u1, v0, v1) = ctx.camera.bin_pixel_bounds(&ctx.workspace);
    (0..n_scenes)
        .into_par_iter()
        .map(|i| {
            let object = &objects[i % objects.len()];
            let scene = generate_scene(
                std::slice::from_ref(object),
                1,
                0.0,
                derive_seed(seed, STREAM_HELD_OUT, i as u64),
                &ctx.workspace,
            )?;
            let color = render_color(&scene, &ctx.camera);
            let owners = render_owners(&scene, &ctx.camera);
            let map = forward_full(params, &Tensor::from_image(&color))?;
            let w = ctx.camera.width;
            let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
            for (k, o) in owners.iter().enumerate() {
                if o.is_some() {
                    su += (k % w) as f64;
                    sv += (k / w) as f64;
                    n += 1;
                }
            }
            if n == 0 {
                return Err(Error::invalid("held-out object is not visible"));
            }
            let (cr, cc) = map
                .cell_at(su / n as f64, sv / n as f64)
                .ok_or_else(|| Error::invalid("object centroid falls outside the map"))?;
            let half = (map.stride / 2) as f64;
            let mut empty = Vec::new();
            for r in 0..map.rows() {
                for c in 0..map.cols() {
                    let (u, v) = map.cell_center(r, c);
                    if u < u0 as f64 || u > u1 as f64 || v < v0 as f64 || v > v1 as f64 {
                        continue;
                    }
                    let (ua, ub) = ((u - half).max(0.0) as usize, ((u + half) as usize).min(w - 1));
                    let (va, vb) = ((v - half).max(0.0) as usize, ((v + half) as usize).min(ctx.camera.height - 1));
                    let occupied = (va..=vb).any(|y| (ua..=ub).any(|x| owners[y * w + x].is_some()));
                    if !occupied {
                        empty.push(map.cell_max(r, c));
                    }
                }
            }
            empty.sort_by(|a, b| a.total_cmp(b));
            let empty_median = if empty.is_empty() {
                0.0
            } else if empty.len() % 2 == 1 {
                empty[empty.len() / 2]
            } else {
                (empty[empty.len() / 2 - 1] + empty[empty.len() / 2]) / 2.0
            };
            Ok(DetectionScene {
                object: object.id.clone(),
                centroid_probability: map.cell_max(cr, cc),
                empty_median,
            })
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Ordered `key value` lines describing a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    /// Drops every entry whose key starts with `prefix`.
    pub fn remove_prefix(&mut self, prefix: &str) {
        self.entries.retain(|(k, _)| !k.starts_with(prefix));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        Self {
            entries: text
                .lines()
                .filter_map(|l| l.split_once(' '))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(5, 10);
        assert!((lo - 0.2366).abs() < 1e-4 && (hi - 0.7634).abs() < 1e-4);
        let (lo, hi) = wilson_interval(10, 10);
        assert!((lo - 0.7225).abs() < 1e-4 && hi == 1.0);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn plan_table() {
        let plans = ExperimentPlan::all();
        let ids: Vec<(&str, bool)> = plans.iter().map(|p| (p.config_id.as_str(), p.use_rotation)).collect();
        assert_eq!(
            ids,
            [("R3", true), ("R3", false), ("P3", false), ("R4", false), ("P4", false)]
        );
        assert!(plans.iter().all(|p| p.total_trials() == 100 && p.objects.len() == 10));
        assert!(ExperimentPlan::table(6).is_err());
    }

    #[test]
    fn record_round_trip() {
        let r = GraspRecord {
            image_ref: "images/00001.png".into(),
            u: 400.0,
            v: 300.0,
            theta: -1.2345678901234567,
            executed_bin: angle_bin(-1.2345678901234567).unwrap(),
            label: true,
            config_id: "R3".into(),
            scene_seed: 99,
        };
        assert_eq!(GraspRecord::parse_line(&r.to_line(), "t").unwrap(), r);
        let mut bad = r.clone();
        bad.executed_bin = 8;
        assert!(GraspRecord::parse_line(&bad.to_line(), "t").is_err());
    }

    #[test]
    fn summary_means() {
        let row = |obj: &str, seen, s| ReportRow {
            config_id: "R3".into(),
            planner_id: "n=1".into(),
            object_id: obj.into(),
            seen,
            successes: s,
            trials: 10,
        };
        let rows = vec![row("a", true, 10), row("b", false, 8)];
        let s = summarize(&rows).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].mean - 0.9).abs() < 1e-12);
        assert_eq!((s[0].seen_mean, s[0].novel_mean), (1.0, 0.8));
        assert!(summarize(&[]).is_err());
        assert_eq!(parse_report_csv(&report_csv(&rows)).unwrap(), rows);
    }

    #[test]
    fn seeds_are_spread() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, 1, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(derive_seed(7, 1, 0), derive_seed(7, 2, 0));
        assert_ne!(derive_seed(7, 1, 0), derive_seed(8, 1, 0));
    }
}
