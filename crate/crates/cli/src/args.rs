use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ridgeline::correspondence::CurveMode;
use ridgeline::curvature::Mode;

use crate::settings::{overlay, Form, Metric, PairSetting, Settings};

#[derive(Debug, Parser)]
#[command(name = "ridgeline", version, about = "Ridge and valley curves, surface models and shape statistics")]
pub struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-vertex principal curvatures, shape index and strength.
    Curvature(CurvatureArgs),
    /// Curves between landmark pairs.
    Curve(CurveArgs),
    #[command(subcommand)]
    Template(TemplateCommand),
    #[command(subcommand)]
    Model(ModelCommand),
    #[command(subcommand)]
    Stats(StatsCommand),
    #[command(subcommand)]
    Simulate(SimulateCommand),
    #[command(subcommand)]
    Export(ExportCommand),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Curvature(_) => "curvature",
            Command::Curve(_) => "curve",
            Command::Template(TemplateCommand::Make(_)) => "template make",
            Command::Template(TemplateCommand::Iterate(_)) => "template iterate",
            Command::Model(ModelCommand::Build(_)) => "model build",
            Command::Model(ModelCommand::Slide(_)) => "model slide",
            Command::Stats(StatsCommand::Pca(_)) => "stats pca",
            Command::Stats(StatsCommand::Permtest(_)) => "stats permtest",
            Command::Simulate(SimulateCommand::Bias(_)) => "simulate bias",
            Command::Simulate(SimulateCommand::Ridge(_)) => "simulate ridge",
            Command::Export(ExportCommand::Fixture(_)) => "export fixture",
            Command::Export(ExportCommand::Mesh(_)) => "export mesh",
        }
    }

    /// Fold the flags into `settings`.
    pub fn apply(&self, s: &mut Settings) {
        match self {
            Command::Curvature(a) => {
                overlay(&mut s.inputs.mesh, &a.mesh);
                overlay(&mut s.curvature.radius, &a.radius);
                overlay(&mut s.curvature.mode, &a.mode);
            }
            Command::Curve(a) => a.apply(s),
            Command::Template(TemplateCommand::Make(a)) => a.apply(s),
            Command::Template(TemplateCommand::Iterate(a)) => {
                a.model.apply(s);
                overlay(&mut s.inputs.samples, &a.samples);
                overlay(&mut s.inputs.template, &a.template);
                overlay(&mut s.template.iterations, &a.iterations);
                overlay(&mut s.template.tolerance, &a.tolerance);
            }
            Command::Model(ModelCommand::Build(a)) => {
                a.model.apply(s);
                overlay(&mut s.inputs.template, &a.template);
            }
            Command::Model(ModelCommand::Slide(a)) => {
                a.model.apply(s);
                overlay(&mut s.inputs.template, &a.template);
            }
            Command::Stats(StatsCommand::Pca(a)) => {
                overlay(&mut s.inputs.models, &a.models);
                overlay(&mut s.stats.variance, &a.variance);
                overlay(&mut s.stats.scale, &a.scale);
            }
            Command::Stats(StatsCommand::Permtest(a)) => {
                overlay(&mut s.inputs.models, &a.models);
                overlay(&mut s.stats.metric, &a.metric);
                overlay(&mut s.stats.component, &a.component);
                overlay(&mut s.stats.perms, &a.perms);
                overlay(&mut s.stats.q, &a.q);
                overlay(&mut s.stats.variance, &a.variance);
                overlay(&mut s.stats.scale, &a.scale);
            }
            Command::Simulate(SimulateCommand::Bias(a)) => {
                overlay(&mut s.simulate.form, &a.form);
                overlay(&mut s.simulate.radius, &a.radius);
                overlay(&mut s.simulate.n, &a.n);
            }
            Command::Simulate(SimulateCommand::Ridge(a)) => {
                overlay(&mut s.simulate.a, &a.a);
                overlay(&mut s.simulate.b, &a.b);
                overlay(&mut s.simulate.li, &a.li);
                overlay(&mut s.simulate.ms, &a.ms);
                overlay(&mut s.simulate.delta, &a.delta);
                overlay(&mut s.simulate.radius, &a.radius);
                overlay(&mut s.simulate.reps, &a.reps);
                if a.fast {
                    s.simulate.reps = Some(50);
                }
            }
            Command::Export(ExportCommand::Fixture(_)) | Command::Export(ExportCommand::Mesh(_)) => {}
        }
    }
}

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    pub mesh: Option<PathBuf>,
    /// Neighbourhood radius (mm) [default: 10].
    #[arg(long)]
    pub radius: Option<f64>,
    /// Shape class scored by the strength column [default: valley].
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "valley" => Ok(Mode::Valley),
        "ridge" => Ok(Mode::Ridge),
        _ => Err(format!("expected valley or ridge, got '{s}'")),
    }
}

fn parse_curve_mode(s: &str) -> Result<CurveMode, String> {
    match s {
        "valley" => Ok(CurveMode::Valley),
        "ridge" => Ok(CurveMode::Ridge),
        "minlen" => Ok(CurveMode::Minlen),
        _ => Err(format!("expected valley, ridge or minlen, got '{s}'")),
    }
}

fn parse_pair(s: &str) -> Result<PairSetting, String> {
    let (from, to) = s.split_once(',').ok_or_else(|| format!("expected NAME1,NAME2, got '{s}'"))?;
    Ok(PairSetting { from: from.trim().to_string(), to: to.trim().to_string(), mode: None })
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    pub mesh: Option<PathBuf>,
    /// JSON object mapping landmark names to [x, y, z].
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    /// Landmark pair NAME1,NAME2; repeatable.
    #[arg(long = "pair", value_parser = parse_pair)]
    pub pairs: Vec<PairSetting>,
    /// Curve type [default: valley].
    #[arg(long, value_parser = parse_curve_mode)]
    pub mode: Option<CurveMode>,
    /// Cutting-plane angles searched [default: 180].
    #[arg(long)]
    pub angles: Option<usize>,
    /// Follow the curvature off the reference plane.
    #[arg(long)]
    pub flexible: bool,
    /// Roughness penalty weight [default: 0.5].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Arc-length grid points [default: 51].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Target effective degrees of freedom of the smooth [default: 12].
    #[arg(long)]
    pub edf: Option<f64>,
    /// Curvature neighbourhood radius (mm) [default: 10].
    #[arg(long)]
    pub radius: Option<f64>,
}

impl CurveArgs {
    fn apply(&self, s: &mut Settings) {
        overlay(&mut s.inputs.mesh, &self.mesh);
        overlay(&mut s.inputs.landmarks, &self.landmarks);
        if !self.pairs.is_empty() {
            s.curve.pairs = self.pairs.clone();
        }
        overlay(&mut s.curve.mode, &self.mode);
        overlay(&mut s.curve.angles, &self.angles);
        if self.flexible {
            s.curve.flexible = Some(true);
        }
        overlay(&mut s.curve.lambda, &self.lambda);
        overlay(&mut s.curve.grid, &self.grid);
        overlay(&mut s.curve.edf, &self.edf);
        overlay(&mut s.curvature.radius, &self.radius);
    }
}

/// Inputs shared by the model-building commands.
#[derive(Debug, Args)]
pub struct ModelInput {
    /// Model layout (JSON or TOML).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Curvature neighbourhood radius (mm); overrides the layout's value.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Cutting-plane angles searched per curve [default: 180].
    #[arg(long)]
    pub angles: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
}

impl ModelInput {
    fn apply(&self, s: &mut Settings) {
        overlay(&mut s.inputs.spec, &self.spec);
        overlay(&mut s.curvature.radius, &self.radius);
        overlay(&mut s.curve.angles, &self.angles);
        overlay(&mut s.curve.lambda, &self.lambda);
        overlay(&mut s.curve.grid, &self.grid);
    }
}

#[derive(Debug, Args)]
pub struct SingleModelArgs {
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelInput,
}

impl SingleModelArgs {
    fn apply(&self, s: &mut Settings) {
        overlay(&mut s.inputs.mesh, &self.mesh);
        overlay(&mut s.inputs.landmarks, &self.landmarks);
        self.model.apply(s);
    }
}

#[derive(Debug, Subcommand)]
pub enum TemplateCommand {
    /// Unslid model of one sample, symmetrised if the layout pairs sides.
    Make(SingleModelArgs),
    /// Slide every sample to the template and replace it by the mean, until
    /// it settles.
    Iterate(IterateArgs),
}

#[derive(Debug, Args)]
pub struct IterateArgs {
    /// Sample list (TOML).
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Starting template (JSON written by `template make`).
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Maximum rounds [default: 10].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// RMS change (mm) that ends the iteration [default: 0.01].
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[command(flatten)]
    pub model: ModelInput,
}

#[derive(Debug, Subcommand)]
pub enum ModelCommand {
    /// Model of one sample; slid when a template is given.
    Build(BuildArgs),
    /// Model of one sample slid against a template.
    Slide(SlideArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub model: SingleModelArgs,
    #[arg(long)]
    pub template: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SlideArgs {
    #[command(flatten)]
    pub model: SingleModelArgs,
    #[arg(long)]
    pub template: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Principal components of the Procrustes-aligned models.
    Pca(PcaArgs),
    /// Two-group permutation test.
    Permtest(PermtestArgs),
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    /// Model set (JSON written by `template iterate`).
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Variance fraction used to choose the reported component count
    /// [default: 0.9].
    #[arg(long)]
    pub variance: Option<f64>,
    /// Scale to unit centroid size before PCA [default: true].
    #[arg(long)]
    pub scale: Option<bool>,
}

#[derive(Debug, Args)]
pub struct PermtestArgs {
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub metric: Option<Metric>,
    /// 1-based component for `--metric component`.
    #[arg(long)]
    pub component: Option<usize>,
    /// Permutations [default: 1000].
    #[arg(long)]
    pub perms: Option<usize>,
    /// Components in the Hotelling test.
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub variance: Option<f64>,
    #[arg(long)]
    pub scale: Option<bool>,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Estimated against analytic cross-sectional curvature.
    Bias(BiasArgs),
    /// Ridge recovery on noisy synthetic surfaces.
    Ridge(RidgeArgs),
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    #[arg(long, value_enum)]
    pub form: Option<Form>,
    /// [default: 0.5]
    #[arg(long)]
    pub radius: Option<f64>,
    /// Grid points per side [default: 41].
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RidgeArgs {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub li: Option<f64>,
    #[arg(long)]
    pub ms: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Curvature neighbourhood radius [default: 1].
    #[arg(long)]
    pub radius: Option<f64>,
    /// Replicates [default: 500].
    #[arg(long)]
    pub reps: Option<usize>,
    /// 50 replicates.
    #[arg(long)]
    pub fast: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureKind {
    Face,
    Valley,
}

#[derive(Debug, Subcommand)]
pub enum ExportCommand {
    /// Write a synthetic fixture (meshes, landmarks and layout).
    Fixture(FixtureArgs),
    /// Convert a mesh between OBJ and PLY.
    Mesh(MeshArgs),
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long, value_enum, default_value = "face")]
    pub kind: FixtureKind,
    /// Number of faces.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Mesh spacing (mm).
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeshFormatArg {
    Obj,
    Ply,
    PlyBinary,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    pub input: PathBuf,
    /// Output file name inside the artifact directory.
    pub name: String,
    #[arg(long, value_enum, default_value = "ply")]
    pub format: MeshFormatArg,
}
