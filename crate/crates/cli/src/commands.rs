use std::fs;
use std::path::{Path, PathBuf};

use grasplab::bench::{
    collect_blind, compose_dataset, friction_ablation, outcome_log_text, parse_report_csv, report_csv,
    run_experiments, sha256_hex, summarize, summary_csv, Dataset, ExperimentPlan, Manifest,
};
use grasplab::planner::{
    checkpoint, forward_full, init_params, render_overlay, select_grasp, train, write_heatmaps, ModelParams,
    ModelSpec, Tensor, RECEPTIVE_FIELD,
};
use grasplab::scene::{generate_scene, render_color, render_depth, Image, Scene};

use crate::config::{relative_or, RunConfig};
use crate::{CliError, Command};

pub fn run(cfg: RunConfig, command: Command) -> Result<(), CliError> {
    match command {
        Command::Scene { objects, spacing } => scene(&cfg, objects, spacing),
        Command::Collect {
            attempts,
            objects,
            spacing,
            no_images,
        } => {
            let mut cfg = cfg;
            cfg.attempts = attempts.unwrap_or(cfg.attempts);
            cfg.objects = objects.unwrap_or(cfg.objects);
            cfg.spacing = spacing.unwrap_or(cfg.spacing);
            cfg.images &= !no_images;
            collect(&cfg)
        }
        Command::Train {
            bins,
            batch,
            steps,
            lr,
            dataset,
            compose,
        } => {
            let mut cfg = cfg;
            cfg.bins = bins.unwrap_or(cfg.bins);
            cfg.train.batch = batch.unwrap_or(cfg.train.batch);
            cfg.train.steps = steps.unwrap_or(cfg.train.steps);
            cfg.train.lr = lr.unwrap_or(cfg.train.lr);
            train_cmd(&cfg, dataset, compose)
        }
        Command::Eval { plan, checkpoint } => eval(&cfg, plan.as_deref().unwrap_or(&cfg.plan), &checkpoint),
        Command::Ablate { checkpoint } => ablate(&cfg, checkpoint),
        Command::Maps {
            checkpoint,
            scene,
            image,
            objects,
        } => maps(&cfg, checkpoint, scene, image, objects),
        Command::Report => report(&cfg),
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Replaces this command's block in the run manifest.
fn update_manifest(cfg: &RunConfig, command: &str, entries: Vec<(String, String)>) -> Result<(), CliError> {
    let path = cfg.sub("manifest.txt");
    let mut manifest = match fs::read_to_string(&path) {
        Ok(text) => Manifest::parse(&text),
        Err(_) => Manifest::new(),
    };
    let prefix = format!("{command}.");
    manifest.remove_prefix(&prefix);
    if manifest.get("version").is_none() {
        manifest.push("version", env!("CARGO_PKG_VERSION"));
    }
    let catalog = ("catalog_sha256".to_string(), sha256_hex(cfg.catalog()?.to_text().as_bytes()));
    for (k, v) in cfg.describe().into_iter().chain([catalog]).chain(entries) {
        manifest.push(&format!("{prefix}{k}"), v);
    }
    write(&path, manifest.to_text())
}

fn hash_file(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&read(path)?))
}

fn scene(cfg: &RunConfig, objects: Option<usize>, spacing: Option<f64>) -> Result<(), CliError> {
    let ctx = cfg.context()?;
    let n = objects.unwrap_or(cfg.objects);
    let spacing = spacing.unwrap_or(cfg.spacing);
    let scene = generate_scene(ctx.catalog.objects(), n, spacing, cfg.seed, &ctx.workspace)?;
    let dir = cfg.sub("scenes");
    let stem = format!("scene-{}", cfg.seed);
    write(&dir.join(format!("{stem}.txt")), scene.to_text())?;
    render_color(&scene, &ctx.camera).save_color_png(&dir.join(format!("{stem}.png")))?;
    render_depth(&scene, &ctx.camera).save_depth_png(&dir.join(format!("{stem}_depth.png")))?;
    update_manifest(
        cfg,
        "scene",
        vec![
            ("objects".into(), n.to_string()),
            ("spacing".into(), spacing.to_string()),
        ],
    )?;
    println!("scene {} with {} objects -> {}", cfg.seed, scene.placements.len(), dir.display());
    Ok(())
}

fn collect(cfg: &RunConfig) -> Result<(), CliError> {
    let ctx = cfg.context()?;
    let gripper = cfg.gripper()?;
    let col = collect_blind(&ctx, &gripper, cfg.attempts, cfg.objects, cfg.spacing, cfg.seed)?;
    let dir = cfg.sub("dataset");
    col.dataset.write(&dir, &ctx.camera, cfg.images)?;
    write(&dir.join("outcomes.txt"), outcome_log_text(&col.log))?;
    update_manifest(
        cfg,
        "collect",
        vec![
            ("gripper".into(), gripper.id().to_string()),
            ("gripper_sha256".into(), sha256_hex(gripper.to_key_values().as_bytes())),
            ("attempts".into(), cfg.attempts.to_string()),
            ("objects".into(), cfg.objects.to_string()),
            ("spacing".into(), cfg.spacing.to_string()),
            ("records_sha256".into(), hash_file(&dir.join("records.txt"))?),
        ],
    )?;
    let pos = col.dataset.positives();
    println!(
        "collected {} attempts with {}: {} positive ({:.3})",
        cfg.attempts,
        gripper.id(),
        pos,
        col.dataset.positive_fraction()
    );
    Ok(())
}

fn parse_compose(spec: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--compose expects POS:NEG, got `{spec}`"));
    let (a, b) = spec.split_once(':').ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

fn checkpoint_path(cfg: &RunConfig, bins: usize) -> PathBuf {
    cfg.sub("checkpoints").join(format!("planner-{bins}.grsp"))
}

fn train_cmd(cfg: &RunConfig, dataset: Option<PathBuf>, compose: Option<String>) -> Result<(), CliError> {
    let ctx = cfg.context()?;
    let dir = dataset.unwrap_or_else(|| cfg.sub("dataset"));
    if !dir.join("records.txt").is_file() {
        return Err(CliError::Usage(format!("no dataset at {}; run collect first", dir.display())));
    }
    let mut data = Dataset::load(&dir, &ctx.catalog, &ctx.workspace)?;
    if let Some(spec) = &compose {
        let (p, n) = parse_compose(spec)?;
        data = compose_dataset(&data, p, n, cfg.seed)?;
    }
    if data.is_empty() {
        return Err(CliError::Usage("dataset has no records".into()));
    }
    let spec = ModelSpec::default_for(cfg.bins)?;
    let samples = data.training_samples(&ctx.camera, cfg.bins);
    let (params, curve) = train(&init_params(&spec, cfg.seed), &samples, &cfg.train)?;
    let path = checkpoint_path(cfg, cfg.bins);
    checkpoint::save(&params, &path)?;
    let mut csv = String::from("step,loss,accuracy\n");
    for s in &curve {
        csv.push_str(&format!("{},{:.6},{:.6}\n", s.step, s.loss, s.accuracy));
    }
    let curve_path = path.with_extension("curve.csv");
    write(&curve_path, csv)?;
    update_manifest(
        cfg,
        &format!("train{}", cfg.bins),
        vec![
            ("dataset".into(), relative_or(&dir, &cfg.run_dir())),
            ("records_sha256".into(), sha256_hex(data.records_text().as_bytes())),
            ("compose".into(), compose.unwrap_or_else(|| "-".into())),
            ("spec".into(), spec.to_string()),
            (
                "train".into(),
                format!(
                    "batch={} lr={} momentum={} steps={}",
                    cfg.train.batch, cfg.train.lr, cfg.train.momentum, cfg.train.steps
                ),
            ),
            ("checkpoint".into(), relative_or(&path, &cfg.run_dir())),
            ("checkpoint_sha256".into(), hash_file(&path)?),
        ],
    )?;
    let last = curve.last().map_or(0.0, |s| s.accuracy);
    println!(
        "trained planner-{} for {} steps on {} records; final batch accuracy {last:.3} -> {}",
        cfg.bins,
        cfg.train.steps,
        data.len(),
        path.display()
    );
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<ModelParams, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("checkpoint {} not found", path.display())));
    }
    Ok(checkpoint::load(path)?)
}

fn parse_plans(spec: &str, trials: usize) -> Result<Vec<ExperimentPlan>, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("[eval] trials must be positive".into()));
    }
    let mut plans = if spec == "all" { ExperimentPlan::all() } else { parse_plan_list(spec)? };
    for p in &mut plans {
        p.trials_per_object = trials;
    }
    Ok(plans)
}

fn parse_plan_list(spec: &str) -> Result<Vec<ExperimentPlan>, CliError> {
    spec.split(',')
        .map(|s| {
            let id = s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--plan expects 1-5, a comma list or all, got `{spec}`")))?;
            Ok(ExperimentPlan::table(id)?)
        })
        .collect()
}

/// Loads given checkpoints, or the run's default ones for the bin counts in use.
fn planners_for(cfg: &RunConfig, plans: &[ExperimentPlan], given: &[PathBuf]) -> Result<Vec<(PathBuf, ModelParams)>, CliError> {
    let mut out = Vec::new();
    if given.is_empty() {
        let mut bins: Vec<usize> = plans.iter().map(|p| p.n_bins()).collect();
        bins.sort_unstable();
        bins.dedup();
        for b in bins {
            let path = checkpoint_path(cfg, b);
            out.push((path.clone(), load_checkpoint(&path)?));
        }
    } else {
        for path in given {
            out.push((path.clone(), load_checkpoint(path)?));
        }
    }
    for plan in plans {
        if !out.iter().any(|(_, p)| p.n_bins() == plan.n_bins()) {
            let have: Vec<String> = out.iter().map(|(_, p)| p.n_bins().to_string()).collect();
            return Err(CliError::Usage(format!(
                "plan {} {} rotation and needs a {}-bin checkpoint; given checkpoints have {} bins",
                plan.id,
                if plan.use_rotation { "uses" } else { "does not use" },
                plan.n_bins(),
                have.join(", ")
            )));
        }
    }
    Ok(out)
}

fn eval(cfg: &RunConfig, plan_spec: &str, checkpoints: &[PathBuf]) -> Result<(), CliError> {
    let ctx = cfg.context()?;
    let plans = parse_plans(plan_spec, cfg.trials)?;
    let planners = planners_for(cfg, &plans, checkpoints)?;
    let refs: Vec<&ModelParams> = planners.iter().map(|(_, p)| p).collect();
    let results = run_experiments(&ctx, &plans, &refs, cfg.seed)?;
    let dir = cfg.sub("reports");
    let mut entries = vec![("plans".to_string(), plan_spec.to_string()), ("trials".to_string(), cfg.trials.to_string())];
    for (path, p) in &planners {
        entries.push((format!("checkpoint{}_sha256", p.n_bins()), hash_file(path)?));
    }
    for r in &results {
        let csv = report_csv(&r.rows);
        let path = dir.join(format!("plan{}.csv", r.plan_id));
        write(&path, &csv)?;
        write(&dir.join(format!("plan{}.outcomes.txt", r.plan_id)), outcome_log_text(&r.log))?;
        entries.push((format!("plan{}_sha256", r.plan_id), sha256_hex(csv.as_bytes())));
        println!(
            "plan {} ({} {}): mean success {:.3}",
            r.plan_id,
            r.rows[0].config_id,
            r.rows[0].planner_id,
            r.mean_rate()
        );
    }
    update_manifest(cfg, "eval", entries)?;
    Ok(())
}

fn ablate(cfg: &RunConfig, checkpoint: Option<PathBuf>) -> Result<(), CliError> {
    let ctx = cfg.context()?;
    let plan = parse_plans("2", cfg.trials)?.remove(0);
    let path = checkpoint.unwrap_or_else(|| checkpoint_path(cfg, 1));
    let params = load_checkpoint(&path)?;
    if params.n_bins() != 1 {
        return Err(CliError::Usage(format!(
            "the ablation runs plan 2 without rotation and needs a 1-bin checkpoint; {} has {} bins",
            path.display(),
            params.n_bins()
        )));
    }
    let ab = friction_ablation(&ctx, &plan, &params, cfg.seed)?;
    let dir = cfg.sub("reports");
    write(&dir.join("ablation.csv"), ab.paired_csv())?;
    write(&dir.join("ablation-skinned.csv"), report_csv(&ab.skinned.rows))?;
    write(&dir.join("ablation-bare.csv"), report_csv(&ab.bare.rows))?;
    let summary = format!(
        "skinned_mean {:.4}\nbare_mean {:.4}\ndrop {:.4}\nmonotonicity_violations {}\n",
        ab.skinned.mean_rate(),
        ab.bare.mean_rate(),
        ab.drop(),
        ab.violations()
    );
    write(&dir.join("ablation.txt"), &summary)?;
    update_manifest(
        cfg,
        "ablate",
        vec![
            ("checkpoint_sha256".into(), hash_file(&path)?),
            ("trials".into(), cfg.trials.to_string()),
            ("ablation_sha256".into(), sha256_hex(ab.paired_csv().as_bytes())),
        ],
    )?;
    print!("{summary}");
    Ok(())
}

fn maps(
    cfg: &RunConfig,
    checkpoint: Option<PathBuf>,
    scene_path: Option<PathBuf>,
    image_path: Option<PathBuf>,
    objects: Option<usize>,
) -> Result<(), CliError> {
    let ctx = cfg.context()?;
    let path = checkpoint.unwrap_or_else(|| checkpoint_path(cfg, cfg.bins));
    let params = load_checkpoint(&path)?;
    let (color, depth, stem, source) = if let Some(img) = &image_path {
        let color = Image::load_png(img)?;
        if color.channels != 3 {
            return Err(CliError::Usage(format!("{} is not an RGB image", img.display())));
        }
        let depth = Image::filled(color.width, color.height, &[ctx.workspace.z_bin as f32]);
        let stem = img.file_stem().map_or("image".into(), |s| s.to_string_lossy().into_owned());
        (color, depth, stem, hash_file(img)?)
    } else {
        let scene = match &scene_path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                Scene::parse(&text, &ctx.catalog, ctx.workspace)?
            }
            None => generate_scene(
                ctx.catalog.objects(),
                objects.unwrap_or(1),
                cfg.spacing,
                cfg.seed,
                &ctx.workspace,
            )?,
        };
        let stem = match &scene_path {
            Some(p) => p.file_stem().map_or("scene".into(), |s| s.to_string_lossy().into_owned()),
            None => format!("scene-{}", cfg.seed),
        };
        (
            render_color(&scene, &ctx.camera),
            render_depth(&scene, &ctx.camera),
            stem,
            sha256_hex(scene.to_text().as_bytes()),
        )
    };
    if color.width < RECEPTIVE_FIELD || color.height < RECEPTIVE_FIELD {
        return Err(CliError::Infeasible(format!(
            "image {}x{} is smaller than the {RECEPTIVE_FIELD}px receptive field",
            color.width, color.height
        )));
    }
    let map = forward_full(&params, &Tensor::from_image(&color))?;
    let dir = cfg.sub("maps");
    let files = write_heatmaps(&map, &dir, &stem)?;
    let mut selection = ctx.selection(cfg.gripper()?.finger().length);
    if image_path.is_some() {
        selection.region = None;
    }
    let grasp = select_grasp(&map, &depth, &selection)?;
    let overlay = render_overlay(&color, &map, &grasp);
    overlay.save_color_png(&dir.join(format!("{stem}_overlay.png")))?;
    update_manifest(
        cfg,
        "maps",
        vec![
            ("checkpoint_sha256".into(), hash_file(&path)?),
            ("input_sha256".into(), source),
        ],
    )?;
    println!(
        "{} heatmaps for {stem}; best cell ({}, {}) bin {} p={:.3} -> {}",
        files.len(),
        grasp.row,
        grasp.col,
        grasp.bin,
        grasp.probability,
        dir.display()
    );
    Ok(())
}

fn report(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = cfg.sub("reports");
    let mut rows = Vec::new();
    for id in 1..=5 {
        let path = dir.join(format!("plan{id}.csv"));
        if path.is_file() {
            let text = String::from_utf8_lossy(&read(&path)?).into_owned();
            rows.extend(parse_report_csv(&text)?);
        }
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("no plan reports under {}; run eval first", dir.display())));
    }
    let summary = summarize(&rows)?;
    let csv = summary_csv(&summary);
    write(&dir.join("summary.csv"), &csv)?;
    update_manifest(cfg, "report", vec![("summary_sha256".into(), sha256_hex(csv.as_bytes()))])?;
    print!("{csv}");
    Ok(())
}
