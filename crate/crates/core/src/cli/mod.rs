//! Command-line front end: one subcommand per pipeline stage.
//!
//! Every command reads a versioned JSON config, loads all of its inputs before writing
//! anything, writes through temp-file-then-rename and records its outputs in the
//! directory's `manifest.json`.

mod config;
mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{
    load_config, parse_config, ClassifierSection, DatasetSection, EvalSection, GeneratorSection,
    GroundTruthSection, LoadedConfig, RunConfig, WorldSection, CONFIG_VERSION, OUT_ENV,
};
pub use output::{pgm_bytes, pgm_level, CommandRecord, Manifest, Outputs, MANIFEST_FILE};

use crate::artifact::{self, format_of, to_json_bytes};
use crate::discovery::{discover, latent_batch, DiscoveryResult};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate, pseudo_gt_bias, rows_to_csv, select_baseline_index, summarize, EvalConfig, GridRow,
    GridRunner, Metrics,
};
use crate::hyperplane::{
    fit_joint_hyperplanes, known_basis_excluding, project_to_plane, traversal_latents, Hyperplane,
    HyperplaneBasis, JointFit, TraversalConfig, BASIS_FORMAT, JOINT_FORMAT,
};
use crate::models::{
    fit_pca_decoder, train_classifier, ClampTape, Classifier, DifferentiableGenerator, Generator,
    IdentityGenerator, LinearDecoder, ModelMeta, TargetClassifier, DECODER_FORMAT, IDENTITY_FORMAT,
};
use crate::numgrad::{qr_thin, Matrix};
use crate::rng::tag;
use crate::world::{build_dataset, DatasetConfig, LabeledDataset, FACTOR_NAMES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "latent-bias", version, about = "Discover the unknown biased attribute of an image classifier")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` and the LATENT_BIAS_OUT variable.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Inputs {
    /// Dataset header (default: <out>/dataset.json).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Generator header (default: <out>/generator.json).
    #[arg(long)]
    pub generator: Option<PathBuf>,
    /// Classifier header (default: <out>/classifier.json).
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    /// Ground-truth hyperplanes (default: <out>/ground-truth.json).
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Discovery result (default: <out>/discovery.json).
    #[arg(long)]
    pub result: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the skewed sprite dataset.
    BuildWorld,
    /// Fit the generator (PCA decoder) on the dataset.
    FitGenerator(#[command(flatten)] Inputs),
    /// Train the target classifier on the dataset.
    TrainClassifier(#[command(flatten)] Inputs),
    /// Fit the ground-truth attribute hyperplanes in latent space.
    FitGt(#[command(flatten)] Inputs),
    /// Search for the biased-attribute hyperplane and export its traversal strip.
    Discover(#[command(flatten)] Inputs),
    /// Score the discovered hyperplane against the ground truth and the axis baseline.
    Evaluate(#[command(flatten)] Inputs),
    /// Run the experiment grid (resumable).
    Grid {
        /// Compute at most this many new cells, then stop.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Export traversal images along a discovered or ground-truth hyperplane.
    ExportTraversal {
        #[command(flatten)]
        inputs: Inputs,
        /// Traverse this ground-truth attribute instead of the discovery result.
        #[arg(long)]
        attribute: Option<String>,
    },
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if matches!(e, Error::PartialGrid(_)) {
        EXIT_PARTIAL
    } else if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

struct Context {
    cfg: RunConfig,
    config_sha256: String,
    out: PathBuf,
}

impl Context {
    fn input(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.join(default))
    }
}

fn output_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    if let Some(dir) = &cli.out {
        return dir.clone();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output_dir.clone(),
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("missing required flag --config".into()))?;
    let loaded = load_config(path)?;
    let ctx = Context {
        out: output_dir(cli, &loaded.config),
        cfg: loaded.config,
        config_sha256: loaded.sha256,
    };
    match &cli.command {
        Command::BuildWorld => cmd_build_world(&ctx),
        Command::FitGenerator(i) => cmd_fit_generator(&ctx, i),
        Command::TrainClassifier(i) => cmd_train_classifier(&ctx, i),
        Command::FitGt(i) => cmd_fit_gt(&ctx, i),
        Command::Discover(i) => cmd_discover(&ctx, i),
        Command::Evaluate(i) => cmd_evaluate(&ctx, i),
        Command::Grid { limit } => cmd_grid(&ctx, *limit),
        Command::ExportTraversal { inputs, attribute } => cmd_export_traversal(&ctx, inputs, attribute.as_deref()),
    }?;
    Ok(EXIT_OK)
}

/// Fails with one error naming every absent input.
fn require(paths: &[&Path]) -> Result<()> {
    let missing: Vec<String> = paths.iter().filter(|p| !p.is_file()).map(|p| p.display().to_string()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("missing input artifacts: {}", missing.join(", "))))
    }
}

fn seeds(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn meta<T: Serialize>(attribute: Option<&str>, seed: u64, config: &T) -> Result<ModelMeta> {
    Ok(ModelMeta {
        attribute: attribute.map(str::to_string),
        seed,
        config: serde_json::to_value(config)?,
    })
}

fn cmd_build_world(ctx: &Context) -> Result<()> {
    let dc = ctx.cfg.dataset_config()?;
    let data = build_dataset(&dc)?;
    let mut out = Outputs::new(&ctx.out)?;
    out.track(&data.save(out.dir(), "dataset")?)?;
    println!("built {} sprites ({}x{}) in {}", data.len(), data.side, data.side, ctx.out.display());
    out.finish("build-world", &ctx.config_sha256, seeds(&[("dataset", dc.seed)]))
}

fn cmd_fit_generator(ctx: &Context, inputs: &Inputs) -> Result<()> {
    match &ctx.cfg.generator {
        GeneratorSection::Pca { latent_dim } => {
            let path = ctx.input(&inputs.dataset, "dataset.json");
            require(&[&path])?;
            let data = LabeledDataset::load(&path)?;
            let decoder = fit_pca_decoder(&data, *latent_dim)?;
            let mut out = Outputs::new(&ctx.out)?;
            out.track(&decoder.save(out.dir(), "generator", &meta(None, data.config.seed, &ctx.cfg.generator)?)?)?;
            println!("fitted {latent_dim}-dimensional PCA decoder");
            out.finish("fit-generator", &ctx.config_sha256, seeds(&[("dataset", data.config.seed)]))
        }
        GeneratorSection::Identity { dim } => {
            if *dim == 0 {
                return Err(Error::Config("generator.dim must be positive".into()));
            }
            let mut out = Outputs::new(&ctx.out)?;
            out.track(&IdentityGenerator { dim: *dim }.save(out.dir(), "generator", &meta(None, 0, &ctx.cfg.generator)?)?)?;
            out.finish("fit-generator", &ctx.config_sha256, BTreeMap::new())
        }
    }
}

fn cmd_train_classifier(ctx: &Context, inputs: &Inputs) -> Result<()> {
    let target = ctx.cfg.target()?;
    match &ctx.cfg.classifier {
        ClassifierSection::Mlp { .. } => {
            let path = ctx.input(&inputs.dataset, "dataset.json");
            require(&[&path])?;
            let data = LabeledDataset::load(&path)?;
            let cc = ctx.cfg.classifier_config();
            let classifier = train_classifier(&data, target, &cc)?;
            let mut out = Outputs::new(&ctx.out)?;
            out.track(&classifier.save(out.dir(), "classifier", &meta(Some(target), cc.seed, &cc)?)?)?;
            println!("trained classifier for `{target}`: training accuracy {:.4}", classifier.record.train_accuracy);
            out.finish("train-classifier", &ctx.config_sha256, seeds(&[("classifier", cc.seed)]))
        }
        ClassifierSection::Logistic { weights, bias } => {
            let mut classifier = Classifier::logistic(weights.clone(), *bias)?;
            classifier.target = target.to_string();
            let mut out = Outputs::new(&ctx.out)?;
            out.track(&classifier.save(out.dir(), "classifier", &meta(Some(target), 0, &ctx.cfg.classifier)?)?)?;
            out.finish("train-classifier", &ctx.config_sha256, BTreeMap::new())
        }
    }
}

/// A loaded generator of either supported kind.
pub enum AnyGenerator {
    Identity(IdentityGenerator),
    Linear(LinearDecoder),
}

impl AnyGenerator {
    pub fn load(path: &Path) -> Result<Self> {
        match format_of(path)?.as_str() {
            IDENTITY_FORMAT => Ok(AnyGenerator::Identity(IdentityGenerator::load(path)?.0)),
            DECODER_FORMAT => Ok(AnyGenerator::Linear(LinearDecoder::load(path)?.0)),
            other => Err(Error::artifact(path, format!("`{other}` is not a generator format"))),
        }
    }

    /// Width and height used when exporting images.
    pub fn image_shape(&self) -> (usize, usize) {
        match self {
            AnyGenerator::Identity(g) => (g.dim, 1),
            AnyGenerator::Linear(g) => (g.side, g.side),
        }
    }
}

impl Generator for AnyGenerator {
    fn latent_dim(&self) -> usize {
        match self {
            AnyGenerator::Identity(g) => g.latent_dim(),
            AnyGenerator::Linear(g) => g.latent_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            AnyGenerator::Identity(g) => g.output_dim(),
            AnyGenerator::Linear(g) => g.output_dim(),
        }
    }

    fn generate(&self, latents: &Matrix) -> Result<Matrix> {
        match self {
            AnyGenerator::Identity(g) => g.generate(latents),
            AnyGenerator::Linear(g) => g.generate(latents),
        }
    }
}

impl DifferentiableGenerator for AnyGenerator {
    type Tape = Option<ClampTape>;

    fn generate_with_tape(&self, latents: &Matrix) -> Result<(Matrix, Option<ClampTape>)> {
        match self {
            AnyGenerator::Identity(g) => Ok((g.generate_with_tape(latents)?.0, None)),
            AnyGenerator::Linear(g) => g.generate_with_tape(latents).map(|(m, t)| (m, Some(t))),
        }
    }

    fn pullback(&self, tape: &Option<ClampTape>, cotangent: &Matrix) -> Result<Matrix> {
        match (self, tape) {
            (AnyGenerator::Identity(g), _) => g.pullback(&(), cotangent),
            (AnyGenerator::Linear(g), Some(t)) => g.pullback(t, cotangent),
            (AnyGenerator::Linear(_), None) => Err(Error::Argument("decoder tape missing".into())),
        }
    }

    fn generate_traversals(&self, starts: &Matrix, direction: &[f64], alphas: &[f64]) -> Result<(Matrix, Option<ClampTape>)> {
        match self {
            AnyGenerator::Identity(g) => Ok((g.generate_traversals(starts, direction, alphas)?.0, None)),
            AnyGenerator::Linear(g) => g.generate_traversals(starts, direction, alphas).map(|(m, t)| (m, Some(t))),
        }
    }

    fn pullback_traversals(&self, tape: &Option<ClampTape>, cotangent: &Matrix, alphas: &[f64]) -> Result<(Matrix, Vec<f64>)> {
        match (self, tape) {
            (AnyGenerator::Identity(g), _) => g.pullback_traversals(&(), cotangent, alphas),
            (AnyGenerator::Linear(g), Some(t)) => g.pullback_traversals(t, cotangent, alphas),
            (AnyGenerator::Linear(_), None) => Err(Error::Argument("decoder tape missing".into())),
        }
    }
}

/// Ground-truth hyperplanes: a joint fit or an explicit basis.
pub enum GroundTruth {
    Fit(JointFit),
    Basis(HyperplaneBasis),
}

impl GroundTruth {
    pub fn load(path: &Path) -> Result<Self> {
        match format_of(path)?.as_str() {
            JOINT_FORMAT => Ok(GroundTruth::Fit(JointFit::load(path)?)),
            BASIS_FORMAT => Ok(GroundTruth::Basis(HyperplaneBasis::load(path)?)),
            other => Err(Error::artifact(path, format!("`{other}` is not a ground-truth format"))),
        }
    }

    pub fn basis(&self) -> &HyperplaneBasis {
        match self {
            GroundTruth::Fit(f) => &f.basis,
            GroundTruth::Basis(b) => b,
        }
    }

    /// Basis of the remaining attributes, re-orthogonalized without `name`.
    pub fn excluding(&self, name: &str) -> Result<HyperplaneBasis> {
        let j = self.basis().index_of(name)?;
        match self {
            GroundTruth::Fit(f) => f.known_basis_excluding(j),
            GroundTruth::Basis(b) => known_basis_excluding(b.q(), b.offsets(), b.names(), j),
        }
    }
}

fn load_classifier(path: &Path) -> Result<Classifier> {
    Ok(Classifier::load(path)?.0)
}

fn cmd_fit_gt(ctx: &Context, inputs: &Inputs) -> Result<()> {
    match &ctx.cfg.ground_truth {
        GroundTruthSection::Fitted { probe_size, attributes, .. } => {
            let gen_path = ctx.input(&inputs.generator, "generator.json");
            require(&[&gen_path])?;
            let decoder = match AnyGenerator::load(&gen_path)? {
                AnyGenerator::Linear(d) => d,
                AnyGenerator::Identity(_) => {
                    return Err(Error::Config("a fitted ground truth needs a PCA generator; use kind `explicit`".into()))
                }
            };
            let probe_seed = ctx.cfg.stage_seed("probe");
            let probe = build_dataset(&DatasetConfig {
                target: FACTOR_NAMES[0].into(),
                biased: FACTOR_NAMES[1].into(),
                skewness: 0.5,
                n: *probe_size,
                side: decoder.side,
                seed: probe_seed,
            })?;
            let latents = decoder.encode(&probe.images)?;
            let labels = attributes.iter().map(|a| probe.binarized(a)).collect::<Result<Vec<_>>>()?;
            let jf = ctx.cfg.joint_fit_config();
            let fit = fit_joint_hyperplanes(&latents, &labels, attributes, &jf)?;
            let mut out = Outputs::new(&ctx.out)?;
            out.track(&fit.save(out.dir(), "ground-truth")?)?;
            for (name, acc) in attributes.iter().zip(&fit.accuracy) {
                println!("{name}: latent accuracy {acc:.4}");
            }
            out.finish("fit-gt", &ctx.config_sha256, seeds(&[("probe", probe_seed), ("joint-fit", jf.seed)]))
        }
        GroundTruthSection::Explicit { names, normals, offsets } => {
            let offsets = offsets.clone().unwrap_or_else(|| vec![0.0; names.len()]);
            if normals.len() != names.len() || offsets.len() != names.len() {
                return Err(Error::Config("ground_truth names, normals and offsets must have equal lengths".into()));
            }
            let (q, _) = qr_thin(&Matrix::from_columns(normals)?)?;
            let basis = HyperplaneBasis::new(q, offsets, names.clone())?;
            let mut out = Outputs::new(&ctx.out)?;
            out.track(&basis.save(out.dir(), "ground-truth")?)?;
            out.finish("fit-gt", &ctx.config_sha256, BTreeMap::new())
        }
    }
}

/// Target normal and known normals handed to the search.
fn discovery_inputs(cfg: &RunConfig, gt: &GroundTruth) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let target = cfg.target()?;
    let basis = match cfg.biased.as_deref() {
        Some(b) if gt.basis().names().iter().any(|n| n == b) => gt.excluding(b)?,
        _ => gt.basis().clone(),
    };
    let w_t = basis.hyperplane_named(target)?.normal().to_vec();
    let known_names: Vec<String> = match &cfg.known {
        Some(k) => k.clone(),
        None => basis.names().iter().filter(|n| *n != target).cloned().collect(),
    };
    let mut known = Vec::new();
    for name in &known_names {
        if name == target {
            return Err(Error::Config("the target cannot also be a known attribute".into()));
        }
        known.push(basis.q().column(basis.index_of(name)?));
    }
    Ok((w_t, known))
}

#[derive(Serialize)]
struct StripSidecar<'a> {
    hyperplane: &'a Hyperplane,
    width: usize,
    height: usize,
    alphas: &'a [f64],
    files: Vec<String>,
    probabilities: Vec<f64>,
    latents: Vec<Vec<f64>>,
}

/// Writes `N` PGM images along `h` from a seeded latent, plus a sidecar with the
/// classifier probability of every image.
fn export_strip(
    out: &mut Outputs,
    prefix: &str,
    generator: &AnyGenerator,
    classifier: &Classifier,
    h: &Hyperplane,
    traversal: &TraversalConfig,
    seed: u64,
) -> Result<()> {
    let z = latent_batch(1, h.dim(), seed, &[tag("strip")]);
    let start = project_to_plane(h, z.row(0))?;
    let latents = traversal_latents(&start, h, traversal.alphas())?;
    let images = generator.generate(&Matrix::from_rows(&latents)?)?;
    let probabilities = classifier.predict(&images)?;
    let (width, height) = generator.image_shape();
    let mut files = Vec::new();
    for i in 0..images.rows() {
        let name = format!("step-{i:02}.pgm");
        out.write(&format!("{prefix}/{name}"), &pgm_bytes(width, height, images.row(i))?)?;
        files.push(name);
    }
    let sidecar = StripSidecar {
        hyperplane: h,
        width,
        height,
        alphas: traversal.alphas(),
        files,
        probabilities,
        latents,
    };
    out.write_json(&format!("{prefix}/traversal.json"), &sidecar)?;
    Ok(())
}

fn cmd_discover(ctx: &Context, inputs: &Inputs) -> Result<()> {
    let gen_path = ctx.input(&inputs.generator, "generator.json");
    let cls_path = ctx.input(&inputs.classifier, "classifier.json");
    let gt_path = ctx.input(&inputs.ground_truth, "ground-truth.json");
    require(&[&gen_path, &cls_path, &gt_path])?;
    let generator = AnyGenerator::load(&gen_path)?;
    let classifier = load_classifier(&cls_path)?;
    let gt = GroundTruth::load(&gt_path)?;
    let (w_t, known) = discovery_inputs(&ctx.cfg, &gt)?;

    let dc = ctx.cfg.discovery_config();
    let result = discover(&generator, &classifier, &w_t, &known, &dc)?;
    let strip_seed = ctx.cfg.stage_seed("strip");

    let mut out = Outputs::new(&ctx.out)?;
    out.track(&result.save(out.dir(), "discovery")?)?;
    out.write("loss.csv", result.trace_csv().as_bytes())?;
    export_strip(&mut out, "traversal", &generator, &classifier, &result.hyperplane, &dc.traversal, strip_seed)?;
    println!(
        "discovered normal {:?} (restart {}, held-out loss {:.6}, TV {:.6})",
        result.hyperplane.normal(),
        result.restart,
        result.held_out_loss,
        result.final_tv
    );
    out.finish("discover", &ctx.config_sha256, seeds(&[("discovery", dc.seed), ("strip", strip_seed)]))
}

#[derive(Serialize)]
struct MethodMetrics {
    method: &'static str,
    normal: Vec<f64>,
    metrics: Metrics,
}

#[derive(Serialize)]
struct EvaluationReport {
    target: String,
    biased: String,
    pseudo_gt_bias: String,
    methods: Vec<MethodMetrics>,
}

fn cmd_evaluate(ctx: &Context, inputs: &Inputs) -> Result<()> {
    let gen_path = ctx.input(&inputs.generator, "generator.json");
    let cls_path = ctx.input(&inputs.classifier, "classifier.json");
    let gt_path = ctx.input(&inputs.ground_truth, "ground-truth.json");
    let res_path = ctx.input(&inputs.result, "discovery.json");
    require(&[&gen_path, &cls_path, &gt_path, &res_path])?;
    let generator = AnyGenerator::load(&gen_path)?;
    let classifier = load_classifier(&cls_path)?;
    let gt = GroundTruth::load(&gt_path)?;
    let result = DiscoveryResult::load(&res_path)?;
    let (target, biased) = (ctx.cfg.target()?, ctx.cfg.biased()?);

    let ec: EvalConfig = ctx.cfg.eval_config();
    let gt_t = gt.basis().hyperplane_named(target)?;
    let gt_b = gt.basis().hyperplane_named(biased)?;
    let discovered = evaluate(&result.hyperplane, &gt_b, &gt_t, &generator, &classifier, &ec)?;

    let (w_t, _) = discovery_inputs(&ctx.cfg, &gt)?;
    let d = generator.latent_dim();
    let candidates = (0..d).map(|k| Hyperplane::axis(d, k)).collect::<Result<Vec<_>>>()?;
    let chosen = select_baseline_index(&candidates, &Hyperplane::new(w_t, 0.0)?, &generator, &classifier, &ec)?;
    let baseline = evaluate(&candidates[chosen], &gt_b, &gt_t, &generator, &classifier, &ec)?;
    let pseudo = pseudo_gt_bias(gt.basis(), target, &generator, &classifier, &ec)?;

    let report = EvaluationReport {
        target: target.into(),
        biased: biased.into(),
        pseudo_gt_bias: pseudo,
        methods: vec![
            MethodMetrics {
                method: "discover",
                normal: result.hyperplane.normal().to_vec(),
                metrics: discovered,
            },
            MethodMetrics {
                method: "baseline-axis",
                normal: candidates[chosen].normal().to_vec(),
                metrics: baseline,
            },
        ],
    };
    for m in &report.methods {
        println!(
            "{:>14}: cos_bias {:.4}  cos_target {:.4}  delta_cos {:.4}  tv {:.4}",
            m.method, m.metrics.cos_bias, m.metrics.cos_target, m.metrics.delta_cos, m.metrics.tv
        );
    }
    let mut out = Outputs::new(&ctx.out)?;
    out.write_json("metrics.json", &report)?;
    out.finish("evaluate", &ctx.config_sha256, seeds(&[("evaluation", ec.seed)]))
}

#[derive(Serialize, serde::Deserialize)]
struct CellRecord {
    grid_sha256: String,
    rows: Vec<GridRow>,
}

fn cmd_grid(ctx: &Context, limit: Option<usize>) -> Result<()> {
    let gcfg = ctx.cfg.grid_config();
    let grid_sha = artifact::sha256_hex(&to_json_bytes(&gcfg)?);
    let settings = gcfg.settings();
    let methods = gcfg.methods.clone();
    let mut runner = GridRunner::new(gcfg.clone())?;
    let mut out = Outputs::new(&ctx.out)?;
    let mut rows = Vec::new();
    let mut computed = 0;
    for s in &settings {
        let rel = format!("cells/{}.json", s.id);
        let path = out.dir().join(&rel);
        let cached = std::fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice::<CellRecord>(&b).ok())
            .filter(|c| {
                c.grid_sha256 == grid_sha
                    && c.rows.len() == methods.len()
                    && c.rows.iter().zip(&methods).all(|(r, m)| r.setting == *s && r.method == *m && r.metrics.is_some())
            });
        let cell_rows = match cached {
            Some(c) => {
                out.track(&[path])?;
                c.rows
            }
            None => {
                if limit.is_some_and(|l| computed >= l) {
                    println!("stopped after {computed} new cells; rerun to resume");
                    out.finish("grid", &ctx.config_sha256, seeds(&[("grid", gcfg.seed)]))?;
                    return Ok(());
                }
                let r = runner.run_cell(s);
                computed += 1;
                out.write_json(&rel, &CellRecord { grid_sha256: grid_sha.clone(), rows: r.clone() })?;
                println!("cell {} done", s.id);
                r
            }
        };
        rows.extend(cell_rows);
    }
    out.write("grid.csv", rows_to_csv(&rows).as_bytes())?;
    let summary = summarize(&rows, &methods);
    out.write_json("summary.json", &summary)?;
    for m in &summary.methods {
        if let (Some(mean), std) = (m.delta_cos.mean, m.delta_cos.std) {
            println!("{:>20}: delta_cos {mean:.4} ± {:.4}", m.method.name(), std.unwrap_or(0.0));
        }
    }
    out.finish("grid", &ctx.config_sha256, seeds(&[("grid", gcfg.seed)]))?;
    if summary.failures.is_empty() {
        Ok(())
    } else {
        Err(Error::PartialGrid(summary.failures.len()))
    }
}

fn cmd_export_traversal(ctx: &Context, inputs: &Inputs, attribute: Option<&str>) -> Result<()> {
    let gen_path = ctx.input(&inputs.generator, "generator.json");
    let cls_path = ctx.input(&inputs.classifier, "classifier.json");
    let (prefix, source) = match attribute {
        Some(a) => (format!("traversal-{a}"), ctx.input(&inputs.ground_truth, "ground-truth.json")),
        None => ("traversal".to_string(), ctx.input(&inputs.result, "discovery.json")),
    };
    require(&[&gen_path, &cls_path, &source])?;
    let generator = AnyGenerator::load(&gen_path)?;
    let classifier = load_classifier(&cls_path)?;
    let plane = match attribute {
        Some(a) => GroundTruth::load(&source)?.basis().hyperplane_named(a)?,
        None => DiscoveryResult::load(&source)?.hyperplane,
    };
    let strip_seed = ctx.cfg.stage_seed("strip");
    let mut out = Outputs::new(&ctx.out)?;
    export_strip(&mut out, &prefix, &generator, &classifier, &plane, &ctx.cfg.discovery.traversal, strip_seed)?;
    println!("wrote {} images to {}", ctx.cfg.discovery.traversal.steps(), ctx.out.join(&prefix).display());
    out.finish("export-traversal", &ctx.config_sha256, seeds(&[("strip", strip_seed)]))
}
