//! Command-line front end: `fit`, `eval`, `export` and `split-demo`.
//!
//! Exit codes: 1 for unusable input files, 2 for invalid configuration or
//! flags, 3 for internal failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::export::{self, FitMetadata};
use crate::fitter::{fit_tree, FitConfig, FitError};
use crate::geometry::{load_mesh, sample_labeled_points_with_sigma, Mesh, SURFACE_SIGMA};
use crate::metrics::{iou, voxel_iou, IouMethod, IouReport, MetricsError};
use crate::splitter::{split_field_2d, Plane, Slice};
use crate::superquadric::{Bounds, Superquadric};

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "sqdecomp", version, about = "Hierarchical superquadric decomposition of 3D meshes")]
pub struct Cli {
    /// Worker thread cap (0 = one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a superquadric-pair tree to a mesh.
    Fit(FitArgs),
    /// Evaluate a fitted tree against a mesh, per level.
    Eval(EvalArgs),
    /// Write the superquadric surfaces of fitted levels as OBJ.
    Export(ExportArgs),
    /// Dump the space split of a superquadric pair on a planar slice.
    SplitDemo(SplitDemoArgs),
}

#[derive(Debug, Args, Default)]
pub struct Tuning {
    /// Key-value (TOML) file with fit settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub sharpness: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples_uniform: Option<usize>,
    #[arg(long)]
    pub samples_surface: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub mesh: PathBuf,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub tree: PathBuf,
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform evaluation samples.
    #[arg(long, default_value_t = 100_000)]
    pub samples_uniform: usize,
    /// Also compute the voxel-grid IoU at this resolution.
    #[arg(long)]
    pub voxel_resolution: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub tree: PathBuf,
    /// Level to export (default: every fitted level).
    #[arg(long)]
    pub level: Option<u32>,
    /// Latitude count of each surface lattice.
    #[arg(long, default_value_t = 24)]
    pub resolution: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitDemoArgs {
    /// Built-in pair (`fig3`); used when no custom pair is given.
    #[arg(long)]
    pub preset: Option<String>,
    /// `a1,a2,a3,e1,e2,t1,t2,t3[,qw,qx,qy,qz]`
    #[arg(long, requires = "sq_b", allow_hyphen_values = true)]
    pub sq_a: Option<String>,
    #[arg(long, requires = "sq_a", allow_hyphen_values = true)]
    pub sq_b: Option<String>,
    #[arg(long, default_value = "xy")]
    pub plane: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub offset: f64,
    /// Half-width of the square slice.
    #[arg(long, default_value_t = 1.0)]
    pub extent: f64,
    #[arg(long, default_value_t = 201)]
    pub resolution: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Everything `fit` needs: optimizer settings plus sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub fit: FitConfig,
    pub samples_uniform: usize,
    pub samples_surface: usize,
    pub surface_sigma: f64,
    /// Uniform points of the held-out evaluation sample.
    pub eval_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            samples_uniform: 5000,
            samples_surface: 5000,
            surface_sigma: SURFACE_SIGMA,
            eval_samples: 100_000,
        }
    }
}

impl RunConfig {
    /// Parses a config file, rejecting unknown keys.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e| CliError::config(format!("config: {e}")))?;
        let known = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
        if let Some(key) = table.keys().find(|k| !known.contains_key(*k)) {
            return Err(CliError::config(format!("config: unknown key {key:?}")));
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(format!("config: {e}")))
    }

    pub fn resolve(tuning: &Tuning) -> Result<Self, CliError> {
        let mut cfg = match &tuning.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        if let Some(v) = tuning.max_depth {
            cfg.fit.max_depth = v;
        }
        if let Some(v) = tuning.iterations {
            cfg.fit.iterations = v;
        }
        if let Some(v) = tuning.restarts {
            cfg.fit.restarts = v;
        }
        if let Some(v) = tuning.sharpness {
            cfg.fit.sharpness = v;
        }
        if let Some(v) = tuning.seed {
            cfg.fit.seed = v;
        }
        if let Some(v) = tuning.samples_uniform {
            cfg.samples_uniform = v;
        }
        if let Some(v) = tuning.samples_surface {
            cfg.samples_surface = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.fit.validate().map_err(|e| CliError::config(e.to_string()))?;
        if self.samples_uniform + self.samples_surface == 0 {
            return Err(CliError::config("at least one training sample is required"));
        }
        if self.eval_samples == 0 {
            return Err(CliError::config("eval_samples must be positive"));
        }
        if !(self.surface_sigma > 0.0 && self.surface_sigma.is_finite()) {
            return Err(CliError::config("surface_sigma must be positive"));
        }
        Ok(())
    }
}

/// Seed of the held-out evaluation sample for a given training seed.
pub fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_0F_E7A1
}

fn load_normalized(path: &Path) -> Result<Mesh, CliError> {
    let mesh = load_mesh(path).map_err(|e| CliError::input(e.to_string()))?;
    mesh.normalize().map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::internal(format!("cannot write output: {e}"))
}

fn fit_error(e: FitError) -> CliError {
    match e {
        FitError::Config(m) => CliError::config(m),
        other => CliError::internal(other.to_string()),
    }
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}%", v * 100.0))
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&args.tuning)?;
    let mesh = load_normalized(&args.mesh)?;
    let train = sample_labeled_points_with_sigma(
        &mesh,
        cfg.samples_surface,
        cfg.samples_uniform,
        cfg.surface_sigma,
        cfg.fit.seed,
    )
    .map_err(|e| CliError::input(e.to_string()))?;
    let (tree, report) = fit_tree(&train, &cfg.fit).map_err(fit_error)?;

    let eval = sample_labeled_points_with_sigma(&mesh, 0, cfg.eval_samples, cfg.surface_sigma, eval_seed(cfg.fit.seed))
        .map_err(|e| CliError::input(e.to_string()))?;
    let occ = cfg.fit.occupancy().map_err(fit_error)?;
    let mut level_iou = Vec::new();
    for d in 1..=cfg.fit.max_depth {
        let sqs = tree.all_leaves_at(d).map_err(|e| CliError::internal(e.to_string()))?;
        level_iou.push(match iou(&sqs, &eval, &occ) {
            Ok(v) => Some(v),
            Err(MetricsError::EmptyUnion) => None,
            Err(e) => return Err(CliError::internal(e.to_string())),
        });
    }

    create_dir(&args.out_dir)?;
    let metadata = FitMetadata {
        config: serde_json::to_value(&cfg).map_err(|e| CliError::internal(e.to_string()))?,
        level_iou: level_iou.clone(),
    };
    let tree_path = args.out_dir.join("tree.json");
    export::save_tree(&tree, metadata, &tree_path).map_err(|e| CliError::input(e.to_string()))?;
    let report_json = serde_json::json!({
        "fit": report,
        "eval_iou": level_iou,
        "eval_samples": cfg.eval_samples,
    });
    write(
        &args.out_dir.join("report.json"),
        &(serde_json::to_string_pretty(&report_json).expect("report serializes") + "\n"),
    )?;

    for (k, v) in level_iou.iter().enumerate() {
        writeln!(out, "level {}: IoU {}", k + 1, percent(*v)).map_err(out_err)?;
    }
    let degenerate = report.nodes.iter().filter(|n| n.degenerate).count();
    writeln!(
        out,
        "nodes: {}  degenerate: {}  loss: {:.6}  time: {:.1}s",
        report.nodes.len(),
        degenerate,
        report.total_loss_mean,
        report.wall_time_secs
    )
    .map_err(out_err)?;
    writeln!(out, "wrote {}", tree_path.display()).map_err(out_err)?;
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (tree, doc) = export::load_tree(&args.tree).map_err(|e| CliError::input(e.to_string()))?;
    let mesh = load_normalized(&args.mesh)?;
    if args.samples_uniform == 0 {
        return Err(CliError::config("--samples-uniform must be positive"));
    }
    let sharpness = doc
        .metadata
        .config
        .get("sharpness")
        .and_then(|v| v.as_f64())
        .unwrap_or(FitConfig::default().sharpness);
    let occ = crate::superquadric::OccupancyConfig::new(sharpness).map_err(|e| CliError::input(e.to_string()))?;
    let depth = tree.fitted_depth();
    if depth == 0 {
        return Err(CliError::input("tree has no fitted level"));
    }
    let eval = sample_labeled_points_with_sigma(&mesh, 0, args.samples_uniform, SURFACE_SIGMA, args.seed)
        .map_err(|e| CliError::input(e.to_string()))?;
    let metric_err = |e: MetricsError| CliError::input(e.to_string());

    let mut reports = Vec::new();
    let mut levels = Vec::new();
    for d in 1..=depth {
        let sqs = tree.all_leaves_at(d).map_err(|e| CliError::internal(e.to_string()))?;
        levels.push(iou(&sqs, &eval, &occ).map_err(metric_err)?);
    }
    reports.push(IouReport {
        levels,
        sample_count: eval.len(),
        method: IouMethod::Sampled,
    });
    if let Some(res) = args.voxel_resolution {
        let mut levels = Vec::new();
        for d in 1..=depth {
            let sqs = tree.all_leaves_at(d).map_err(|e| CliError::internal(e.to_string()))?;
            levels.push(voxel_iou(&sqs, &mesh, res, &occ).map_err(|e| match e {
                MetricsError::Resolution(_) => CliError::config(e.to_string()),
                other => metric_err(other),
            })?);
        }
        reports.push(IouReport {
            levels,
            sample_count: res.pow(3),
            method: IouMethod::VoxelOracle,
        });
    }

    for r in &reports {
        writeln!(out, "# {} ({} points)", r.method, r.sample_count).map_err(out_err)?;
        writeln!(out, "{}", r.tsv_header()).map_err(out_err)?;
        writeln!(out, "{}", r.tsv_line()).map_err(out_err)?;
    }
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        for r in &reports {
            let name = match r.method {
                IouMethod::Sampled => "iou.json",
                IouMethod::VoxelOracle => "iou_voxel.json",
            };
            write(&dir.join(name), &(r.to_json() + "\n"))?;
        }
    }
    Ok(())
}

pub fn cmd_export(args: &ExportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (tree, _) = export::load_tree(&args.tree).map_err(|e| CliError::input(e.to_string()))?;
    if args.resolution < 3 {
        return Err(CliError::config("--resolution must be at least 3"));
    }
    let levels: Vec<u32> = match args.level {
        Some(d) if tree.is_level_complete(d) => vec![d],
        Some(d) => return Err(CliError::config(format!("level {d} is not fitted in this tree"))),
        None => (1..=tree.fitted_depth()).collect(),
    };
    create_dir(&args.out_dir)?;
    for d in levels {
        let path = args.out_dir.join(format!("level_{d}.obj"));
        export::export_level_obj(&tree, d, &path, args.resolution).map_err(|e| CliError::input(e.to_string()))?;
        writeln!(out, "wrote {}", path.display()).map_err(out_err)?;
    }
    Ok(())
}

/// The two superquadrics of the built-in `fig3` pair: an elongated
/// ellipsoid overlapping a rounded box.
pub fn fig3_preset() -> (Superquadric, Superquadric) {
    let a = Superquadric::new(
        [0.45, 0.2, 0.2],
        1.0,
        1.0,
        [-0.15, -0.05, 0.0],
        UnitQuaternion::from_euler_angles(0.0, 0.0, 25f64.to_radians()),
    );
    let b = Superquadric::new(
        [0.25, 0.25, 0.25],
        0.3,
        0.3,
        [0.3, 0.15, 0.0],
        UnitQuaternion::from_euler_angles(0.0, 0.0, -10f64.to_radians()),
    );
    (a, b)
}

/// Parses `a1,a2,a3,e1,e2,t1,t2,t3[,qw,qx,qy,qz]`; the quaternion is
/// normalized and defaults to the identity.
pub fn parse_sq_spec(spec: &str) -> Result<Superquadric, CliError> {
    let values: Vec<f64> = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::config(format!("superquadric spec {spec:?}: {e}")))?;
    let rotation = match values.len() {
        8 => UnitQuaternion::identity(),
        12 => {
            let q = Quaternion::new(values[8], values[9], values[10], values[11]);
            if !(q.norm() > 0.0) || !q.norm().is_finite() {
                return Err(CliError::config(format!("superquadric spec {spec:?}: zero quaternion")));
            }
            UnitQuaternion::from_quaternion(q)
        }
        n => {
            return Err(CliError::config(format!(
                "superquadric spec {spec:?}: expected 8 or 12 numbers, got {n}"
            )))
        }
    };
    let sq = Superquadric::new(
        [values[0], values[1], values[2]],
        values[3],
        values[4],
        [values[5], values[6], values[7]],
        rotation,
    );
    sq.validate(&Bounds::default())
        .map_err(|e| CliError::config(format!("superquadric spec {spec:?}: {e}")))?;
    Ok(sq)
}

pub fn cmd_split_demo(args: &SplitDemoArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (a, b) = match (&args.sq_a, &args.sq_b, args.preset.as_deref()) {
        (Some(a), Some(b), None) => (parse_sq_spec(a)?, parse_sq_spec(b)?),
        (None, None, None | Some("fig3")) => fig3_preset(),
        (None, None, Some(other)) => return Err(CliError::config(format!("unknown preset {other:?}"))),
        _ => return Err(CliError::config("give either --preset or both --sq-a and --sq-b")),
    };
    let plane: Plane = args.plane.parse().map_err(CliError::config)?;
    if !(args.extent > 0.0) {
        return Err(CliError::config("--extent must be positive"));
    }
    let slice = Slice::square(plane, args.offset, args.extent, args.resolution);
    let field = split_field_2d(&a, &b, &slice).map_err(|e| CliError::config(e.to_string()))?;
    create_dir(&args.out_dir)?;
    let files = [
        ("split_stable.csv", export::stable_field_csv(&field)),
        ("split_radial.csv", export::radial_field_csv(&field)),
        ("split.csv", export::split_csv(&field)),
    ];
    for (name, text) in files {
        let path = args.out_dir.join(name);
        write(&path, &text)?;
        writeln!(out, "wrote {}", path.display()).map_err(out_err)?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}").map_err(out_err)?;
            return Ok(());
        }
        Err(e) => return Err(CliError::config(e.to_string().trim_end().to_string())),
    };
    if let Some(n) = cli.threads {
        // only the first pool configuration in a process takes effect
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Export(a) => cmd_export(a, out),
        Command::SplitDemo(a) => cmd_split_demo(a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_precedence_and_unknown_keys() {
        let cfg = RunConfig::from_toml("max_depth = 3\nseed = 9\nsamples_uniform = 10\n").unwrap();
        assert_eq!(cfg.fit.max_depth, 3);
        assert_eq!(cfg.fit.seed, 9);
        assert_eq!(cfg.samples_uniform, 10);
        assert_eq!(cfg.fit.iterations, FitConfig::default().iterations);
        let err = RunConfig::from_toml("max_dept = 3\n").unwrap_err();
        assert_eq!(err.code, 2);
        assert_eq!(RunConfig::from_toml("max_depth = \"x\"\n").unwrap_err().code, 2);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit.toml");
        fs::write(&path, "max_depth = 3\nrestarts = 2\n").unwrap();
        let tuning = Tuning {
            config: Some(path),
            max_depth: Some(1),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&tuning).unwrap();
        assert_eq!(cfg.fit.max_depth, 1);
        assert_eq!(cfg.fit.restarts, 2);
        let bad = Tuning {
            max_depth: Some(0),
            ..Default::default()
        };
        assert_eq!(RunConfig::resolve(&bad).unwrap_err().code, 2);
    }

    #[test]
    fn sq_spec_parsing() {
        let sq = parse_sq_spec("0.1,0.2,0.3,1,1,0,0,0").unwrap();
        assert_eq!(sq.size.y, 0.2);
        let sq = parse_sq_spec("0.1,0.2,0.3,1,1,0,0,0,2,0,0,0").unwrap();
        assert_eq!(sq.rotation, UnitQuaternion::identity());
        assert_eq!(parse_sq_spec("0,0.2,0.3,1,1,0,0,0").unwrap_err().code, 2);
        assert_eq!(parse_sq_spec("0.1,0.2").unwrap_err().code, 2);
        assert_eq!(parse_sq_spec("0.1,0.2,0.3,1,1,0,0,0,0,0,0,0").unwrap_err().code, 2);
    }

    #[test]
    fn fig3_preset_is_valid_and_overlapping() {
        let (a, b) = fig3_preset();
        a.validate(&Bounds::default()).unwrap();
        b.validate(&Bounds::default()).unwrap();
        let x = nalgebra::Vector3::new(0.15, 0.05, 0.0);
        assert!(a.inside_outside(&x) < 1.0 && b.inside_outside(&x) < 1.0);
    }
}
