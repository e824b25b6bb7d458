use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use logseg::baseline::baseline_segment;
use logseg::config::RunConfig;
use logseg::gradcheck::{run_gradcheck, GradcheckConfig};
use logseg::io::{read_cloud, write_atomic, write_cloud, Format};
use logseg::loss::{LossBreakdown, Term};
use logseg::metrics::{evaluate, run_ablation, Aggregation, EvalReport};
use logseg::preprocess::{denormalize, prepare};
use logseg::segment::{extract_centreline, segment as run_segment};
use logseg::synth::{default_suite, generate, SyntheticLogSpec};
use logseg::PointCloud;

use crate::{AblateArgs, BaselineArgs, EvalArgs, GradcheckArgs, RunOptions, SegmentArgs, SynthArgs};

/// Samples along the exported centreline polyline.
const CENTRELINE_SAMPLES: usize = 64;

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::from_json(&text).with_context(|| format!("config {}", p.display()))
        }
    }
}

/// Flag > config file > default.
fn resolve(opts: &RunOptions) -> Result<RunConfig> {
    let mut cfg = load_config(opts.config.as_deref())?;
    if let Some(lw) = opts.loss_weights {
        cfg.loss_weights = lw;
    }
    let o = &mut cfg.optimizer;
    if let Some(d) = opts.degree {
        o.degree = d as usize;
    }
    if let Some(k) = opts.k {
        o.k = k as usize;
    }
    if let Some(s) = opts.seed {
        o.seed = s;
    }
    if let Some(t) = opts.threshold {
        o.threshold = t;
    }
    if let Some(s) = opts.steps {
        o.max_steps = s as usize;
    }
    if let Some(lr) = opts.lr {
        o.learning_rate = lr;
    }
    if opts.no_pca_align {
        cfg.pca_align = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read(path: &Path, format: Option<Format>) -> Result<PointCloud> {
    read_cloud(path, format).with_context(|| format!("reading {}", path.display()))
}

fn output_name(input: &Path, suffix: &str, format: Format) -> String {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("cloud");
    format!("{stem}.{suffix}.{}", format.extension())
}

fn history_csv(history: &[LossBreakdown]) -> String {
    let mut out = String::from("step");
    for t in Term::ALL {
        let _ = write!(out, ",{}", t.name());
    }
    out.push_str(",total\n");
    for (i, h) in history.iter().enumerate() {
        let step = if i + 1 == history.len() { "final".to_string() } else { i.to_string() };
        out.push_str(&step);
        for v in h.terms() {
            let _ = write!(out, ",{v:.16e}");
        }
        let _ = writeln!(out, ",{:.16e}", h.total);
    }
    out
}

fn json_bytes(value: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes every file only once all of them have been produced.
fn write_all(dir: &Path, files: Vec<(String, Vec<u8>)>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, bytes) in files {
        let path = dir.join(&name);
        write_atomic(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cloud_bytes(cloud: &PointCloud, mask: Option<&[bool]>, format: Format) -> Result<Vec<u8>> {
    Ok(match format {
        Format::Ply => logseg::io::format_ply(cloud, mask)?,
        Format::Xyz => logseg::io::format_xyz(cloud, mask)?,
    }
    .into_bytes())
}

pub fn segment(args: SegmentArgs) -> Result<ExitCode> {
    let cfg = resolve(&args.run)?;
    let format = match args.format {
        Some(f) => f,
        None => Format::from_path(&args.input)?,
    };
    let cloud = read(&args.input, Some(format))?;
    let (normalized, record) = prepare(&cloud, cfg.pca_align, cfg.scale_mode)?;
    let result = run_segment(&normalized, &cfg.loss_weights, &cfg.optimizer)?;
    let curve = extract_centreline(&result, &normalized, cfg.optimizer.degree).context("fitting the centreline")?;

    let inlier_x: Vec<f64> =
        normalized.points.iter().zip(&result.inlier_mask).filter(|(_, &m)| m).map(|(p, _)| p[0]).collect();
    let lo = inlier_x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = inlier_x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let samples: Vec<[f64; 3]> = (0..CENTRELINE_SAMPLES)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (CENTRELINE_SAMPLES - 1) as f64;
            let (y, z) = curve.eval(x);
            [x, y, z]
        })
        .collect();
    let mut centreline = String::from("x,y,z\n");
    for p in denormalize(&samples, &record) {
        let _ = writeln!(centreline, "{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2]);
    }

    let inliers = result.inlier_mask.iter().filter(|&&m| m).count();
    let summary = serde_json::json!({
        "input": args.input.display().to_string(),
        "points": cloud.len(),
        "inliers": inliers,
        "steps_used": result.steps_used,
        "converged": result.converged,
        "degenerate_spectra": result.degenerate_spectra,
        "final_loss": result.loss_history.last(),
        "centreline_normalized": curve,
        "config": cfg,
    });
    write_all(
        &args.out,
        vec![
            (output_name(&args.input, "segmented", format), cloud_bytes(&cloud, Some(&result.inlier_mask), format)?),
            ("centreline.csv".into(), centreline.into_bytes()),
            ("normalization.json".into(), json_bytes(&record)?),
            ("loss_history.csv".into(), history_csv(&result.loss_history).into_bytes()),
            ("summary.json".into(), json_bytes(&summary)?),
        ],
    )?;
    eprintln!(
        "{}: {inliers}/{} inliers after {} steps{}",
        args.input.display(),
        cloud.len(),
        result.steps_used,
        if result.converged { " (converged)" } else { "" }
    );
    Ok(ExitCode::SUCCESS)
}

pub fn synth(args: SynthArgs) -> Result<ExitCode> {
    if args.default_suite {
        let mut files = Vec::new();
        let mut index = Vec::new();
        for member in default_suite() {
            let log = generate(&member.spec)?;
            let name = format!("{}.{}", member.name, args.format.extension());
            files.push((name.clone(), cloud_bytes(&log.cloud, log.cloud.labels.as_deref(), args.format)?));
            index.push(serde_json::json!({ "file": name, "member": member }));
        }
        files.push(("suite.json".into(), json_bytes(&index)?));
        write_all(&args.out, files)?;
        eprintln!("wrote {} clouds to {}", index.len(), args.out.display());
        return Ok(ExitCode::SUCCESS);
    }
    let spec_path = args.spec.expect("clap enforces a source");
    let text = fs::read_to_string(&spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec = SyntheticLogSpec::from_json(&text).with_context(|| format!("spec {}", spec_path.display()))?;
    let log = generate(&spec)?;
    let format = Format::from_path(&args.out)?;
    write_cloud(&log.cloud, log.cloud.labels.as_deref(), &args.out, format)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

/// Labelled clouds in `dir`, sorted by file name.
fn suite_clouds(dir: &Path) -> Result<Vec<PointCloud>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && Format::from_path(p).is_ok())
        .collect();
    paths.sort();
    let mut clouds = Vec::with_capacity(paths.len());
    for p in &paths {
        let c = read(p, None)?;
        if c.labels.is_none() {
            bail!("{} has no label column", p.display());
        }
        clouds.push(c);
    }
    if clouds.is_empty() {
        bail!("no .ply or .xyz clouds in {}", dir.display());
    }
    Ok(clouds)
}

fn aggregation(micro: bool) -> Aggregation {
    if micro {
        Aggregation::Micro
    } else {
        Aggregation::Macro
    }
}

fn emit_report(report: &EvalReport, out: Option<&Path>) -> Result<()> {
    match out {
        None => print!("{}", report.to_csv()),
        Some(p) => {
            let bytes = if p.extension().is_some_and(|e| e == "json") {
                json_bytes(report)?
            } else {
                report.to_csv().into_bytes()
            };
            write_atomic(p, &bytes).with_context(|| format!("writing {}", p.display()))?;
        }
    }
    let a = &report.aggregate;
    eprintln!("mean over {} cloud(s): precision {:.4} recall {:.4} iou {:.4}", a.clouds, a.precision, a.recall, a.iou);
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<ExitCode> {
    let how = aggregation(args.micro);
    let report = if let Some(dir) = &args.suite {
        let cfg = resolve(&args.run)?;
        let mut rows = Vec::new();
        for cloud in suite_clouds(dir)? {
            let (normalized, _) = prepare(&cloud, cfg.pca_align, cfg.scale_mode)?;
            let result = run_segment(&normalized, &cfg.loss_weights, &cfg.optimizer)?;
            let gt = cloud.labels.as_ref().expect("suite clouds are labelled");
            rows.push((cloud.id.clone(), evaluate(&result.inlier_mask, gt)?));
        }
        EvalReport::new(rows, how)
    } else {
        let (pred_path, gt_path) = (args.pred.expect("clap enforces pred"), args.gt.expect("clap enforces gt"));
        let pred = read(&pred_path, None)?;
        let gt = read(&gt_path, None)?;
        let p = pred.labels.with_context(|| format!("{} has no label column", pred_path.display()))?;
        let g = gt.labels.as_ref().with_context(|| format!("{} has no label column", gt_path.display()))?;
        EvalReport::new(vec![(gt.id.clone(), evaluate(&p, g)?)], how)
    };
    emit_report(&report, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

pub fn ablate(args: AblateArgs) -> Result<ExitCode> {
    let cfg = resolve(&args.run)?;
    let mut suite = Vec::new();
    for cloud in suite_clouds(&args.suite)? {
        suite.push(prepare(&cloud, cfg.pca_align, cfg.scale_mode)?.0);
    }
    let table = run_ablation(&suite, &cfg.loss_weights, &cfg.optimizer, aggregation(args.micro))?;
    let summary_path = args.out.with_extension("json");
    let csv = table.to_csv();
    let summary = json_bytes(&table.summary_json())?;
    write_atomic(&args.out, csv.as_bytes()).with_context(|| format!("writing {}", args.out.display()))?;
    write_atomic(&summary_path, &summary).with_context(|| format!("writing {}", summary_path.display()))?;
    print!("{}", table.to_table());
    Ok(ExitCode::SUCCESS)
}

pub fn baseline(args: BaselineArgs) -> Result<ExitCode> {
    let mut cfg = load_config(args.config.as_deref())?;
    let p = &mut cfg.baseline;
    if let Some(v) = args.eps {
        p.eps = v;
    }
    if let Some(v) = args.min_pts {
        p.min_pts = v as usize;
    }
    if let Some(v) = args.slice_width {
        p.slice_width = v;
    }
    if let Some(v) = args.dist_threshold {
        p.dist_threshold = v;
    }
    if let Some(v) = args.strategy {
        p.strategy = v;
    }
    if args.no_pca_align {
        cfg.pca_align = false;
    }
    cfg.validate()?;
    let format = match args.format {
        Some(f) => f,
        None => Format::from_path(&args.input)?,
    };
    let cloud = read(&args.input, Some(format))?;
    let (normalized, record) = prepare(&cloud, cfg.pca_align, cfg.scale_mode)?;
    let out = baseline_segment(&normalized, &cfg.baseline)?;
    let diagnostics = serde_json::json!({ "params": cfg.baseline, "diagnostics": out.diagnostics });
    write_all(
        &args.out,
        vec![
            (output_name(&args.input, "baseline", format), cloud_bytes(&cloud, Some(&out.mask), format)?),
            ("normalization.json".into(), json_bytes(&record)?),
            ("baseline_diagnostics.json".into(), json_bytes(&diagnostics)?),
        ],
    )?;
    let inliers = out.mask.iter().filter(|&&m| m).count();
    eprintln!(
        "{}: {inliers}/{} inliers, {} of {} slices failed",
        args.input.display(),
        cloud.len(),
        out.diagnostics.failed_slices,
        out.diagnostics.slices
    );
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    let config = GradcheckConfig {
        n: args.n as usize,
        k: args.k as usize,
        trials: args.trials as usize,
        h: args.h,
        seed: args.seed,
        degree: args.degree as usize,
        tolerance: args.tolerance,
    };
    if config.k >= config.n {
        bail!("k = {} must be smaller than n = {}", config.k, config.n);
    }
    let report = run_gradcheck(&config, &Default::default())?;
    println!("term,max_relative_error,passed");
    for t in &report.terms {
        println!("{},{:.3e},{}", t.term, t.max_relative_error, t.passed);
    }
    eprintln!(
        "{} trials, {} skipped for degenerate spectra ({} neighbourhoods)",
        report.trials, report.degenerate_trials, report.degenerate_neighborhoods
    );
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
