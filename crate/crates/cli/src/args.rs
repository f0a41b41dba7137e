//! Command-line surface. Every argument struct doubles as the serialized run
//! configuration stored in manifests.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use snowflake_embed::generators::{Family, GeneratorSpec};
use snowflake_embed::nets::NetOrder;
use snowflake_embed::params::{LogBase, Mode, DEFAULT_BUDGET_CAP, DEFAULT_TAU_STEP};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SNOWFLAKE_EMBED_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "snowflake-embed", version, about = "Weak snowflake embeddings of finite metric spaces")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// Directory for output artifacts and the run manifest [default: .]
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
}

impl LogLevel {
    pub fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Off => log::LevelFilter::Off,
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Generate a test space.
    Gen(GenArgs),
    /// Estimate Minkowski dimension, Assouad spectrum and quasidoubling constant.
    Dims(DimsArgs),
    /// Solve for tau and derive every construction constant.
    Params(ParamsArgs),
    /// Build and color the net hierarchy.
    Nets(NetsArgs),
    /// Build the embedding.
    Embed(EmbedArgs),
    /// Check the two-sided Hölder bounds pair by pair.
    Verify(VerifyArgs),
    /// gen, dims, params, nets, embed and verify in one run.
    Pipeline(PipelineArgs),
    /// Re-run the configuration recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Dims(_) => "dims",
            Command::Params(_) => "params",
            Command::Nets(_) => "nets",
            Command::Embed(_) => "embed",
            Command::Verify(_) => "verify",
            Command::Pipeline(_) => "pipeline",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    Interval,
    Cantor,
    Star,
    GwTree,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GeneratorArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Interval)]
    pub family: FamilyArg,
    /// Points (interval) or vertices (gw-tree).
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// Cantor depth.
    #[arg(long, default_value_t = 4)]
    pub depth: u32,
    /// Star arms.
    #[arg(long, default_value_t = 8)]
    pub arms: usize,
    /// Snowflake the generated space by `d -> d^alpha`.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl GeneratorArgs {
    pub fn spec(&self) -> GeneratorSpec {
        let base = match self.family {
            FamilyArg::Interval => Family::Interval { points: self.size },
            FamilyArg::Cantor => Family::Cantor { depth: self.depth },
            FamilyArg::Star => Family::Star { arms: self.arms },
            FamilyArg::GwTree => Family::GwTree { vertices: self.size },
        };
        let family = match self.alpha {
            Some(alpha) => Family::SnowflakeOf {
                alpha,
                base: Box::new(base),
            },
            None => base,
        };
        GeneratorSpec::new(family, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long, default_value = "space.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimWhat {
    Minkowski,
    Spectrum,
    Quasidoubling,
    All,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DimsArgs {
    /// Space file (JSON or CSV).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = DimWhat::All)]
    pub what: DimWhat,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.2)]
    pub delta: f64,
    /// Comma-separated radii replacing the default grids.
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<f64>>,
    /// Estimate on the raw space instead of the copy rescaled to diameter 1/2.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value = "dims.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Strict,
    Practical,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Strict => Mode::Strict,
            ModeArg::Practical => Mode::Practical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBaseArg {
    Natural,
    Ten,
}

impl From<LogBaseArg> for LogBase {
    fn from(b: LogBaseArg) -> Self {
        match b {
            LogBaseArg::Natural => LogBase::Natural,
            LogBaseArg::Ten => LogBase::Ten,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetOrderArg {
    Input,
    FarthestPoint,
}

impl From<NetOrderArg> for NetOrder {
    fn from(o: NetOrderArg) -> Self {
        match o {
            NetOrderArg::Input => NetOrder::Input,
            NetOrderArg::FarthestPoint => NetOrder::FarthestPoint,
        }
    }
}

/// Everything the parameter solver consumes.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 0.75)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.2)]
    pub delta: f64,
    /// Quasidoubling constant; estimated from the space when omitted.
    #[arg(long = "C")]
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
    pub mode: ModeArg,
    /// Top level (default n0 + 1).
    #[arg(long)]
    pub n: Option<i32>,
    /// Scale ratio (practical mode only).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Color count override (practical mode).
    #[arg(long)]
    pub colors: Option<usize>,
    /// Vector dimension override (practical mode).
    #[arg(long)]
    pub dimension: Option<usize>,
    #[arg(long, value_enum, default_value_t = LogBaseArg::Natural)]
    pub log_base: LogBaseArg,
    #[arg(long, default_value_t = DEFAULT_TAU_STEP)]
    pub tau_step: f64,
    #[arg(long, default_value_t = DEFAULT_BUDGET_CAP)]
    pub budget_cap: u64,
    /// Diameter to fit levels to when no space is given.
    #[arg(long, default_value_t = 0.5)]
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ParamsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    /// Space to fit levels (and estimate C) on.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "params.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct NetsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Parameter file written by `params`.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, value_enum, default_value_t = NetOrderArg::Input)]
    pub net_order: NetOrderArg,
    #[arg(long, default_value = "nets.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BuildArgs {
    #[arg(long, value_enum, default_value_t = NetOrderArg::Input)]
    pub net_order: NetOrderArg,
    /// Use the 3 tau^3 r^eps selection threshold instead of tau^3 r^eps.
    #[arg(long)]
    pub surrogate_threshold: bool,
    /// Also write every selected vector to vectors.json.
    #[arg(long)]
    pub dump_vectors: bool,
    /// Also write coordinates to embedding.csv.
    #[arg(long)]
    pub coords_csv: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Parameter file; derived from the flags below when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub param_flags: ParamArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub build: BuildArgs,
    #[arg(long, default_value = "embedding.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub embedding: PathBuf,
    /// Also write per-pair rows to pairs.csv.
    #[arg(long)]
    pub pairs_csv: bool,
    /// Exit with code 2 when a bound fails.
    #[arg(long)]
    pub require_pass: bool,
    #[arg(long, default_value = "report.json")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PipelineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub build: BuildArgs,
    #[arg(long)]
    pub pairs_csv: bool,
    #[arg(long)]
    pub require_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}
