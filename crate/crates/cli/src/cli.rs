//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use oevla_bench::{Difficulty, FormChoice, Replan};
use oevla_core::EnvId;
use oevla_forge::StatsMode;
use oevla_sim::View;

#[derive(Debug, Parser)]
#[command(
    name = "oevla",
    version,
    about = "Open-ended instruction data, benchmarks and evaluation for VLA policies"
)]
pub struct Cli {
    /// TOML file of default flags, one table per subcommand (e.g. `[forge.demos]`).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build training data: demos, crop pools, instruction subsets, manifests.
    #[command(subcommand)]
    Forge(ForgeCmd),
    /// Generate evaluation suites.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Roll policies through suites and score them.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Action tokenizer utilities.
    #[command(subcommand)]
    Codec(CodecCmd),
    /// Simulator utilities.
    #[command(subcommand)]
    Env(EnvCmd),
    /// Serve a built-in policy over oe-vla-rpc/1.
    #[command(subcommand)]
    Rpc(RpcCmd),
}

#[derive(Debug, Subcommand)]
pub enum ForgeCmd {
    /// Oracle demonstrations as an episode archive.
    Demos(DemosArgs),
    /// Synthesize the external ("web") crop pool as `<object>/<n>.png`.
    Pool(PoolArgs),
    /// Build a crop database from an archive's detections plus external pools.
    Crops(CropsArgs),
    /// Mix and transform an archive into the five instruction subsets.
    Build(BuildArgs),
    /// Write the training manifest for stage 1 or 2.
    Manifest(ManifestArgs),
}

#[derive(Debug, Args)]
pub struct DemosArgs {
    /// Comma-separated environment profiles.
    #[arg(long, value_delimiter = ',', default_value = "A,B,C")]
    pub profile: Vec<EnvId>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = oevla_forge::demos::DEFAULT_TASKS_PER_EPISODE)]
    pub tasks_per_episode: usize,
    #[arg(long, default_value_t = oevla_sim::render::DEFAULT_RESOLUTION)]
    pub resolution: u32,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    #[arg(long, default_value_t = 8)]
    pub per_object: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CropsArgs {
    /// Episode archive written by `forge demos`.
    #[arg(long)]
    pub demos: PathBuf,
    /// JSON map of episode id to boxes; defaults to the archive's own ground truth.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Directories of `<object>/<file>.png` crops, tagged external.
    #[arg(long)]
    pub external: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub demos: PathBuf,
    /// Crop database written by `forge crops`.
    #[arg(long)]
    pub crops: PathBuf,
    #[arg(long, default_value_t = oevla_forge::mix::DEFAULT_FRACTION)]
    pub fraction: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "identity")]
    pub stats: StatsArg,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum StatsArg {
    Identity,
    Fit,
}

impl From<StatsArg> for StatsMode {
    fn from(s: StatsArg) -> Self {
        match s {
            StatsArg::Identity => StatsMode::Identity,
            StatsArg::Fit => StatsMode::Fit,
        }
    }
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    /// Dataset directory written by `forge build`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BenchCmd {
    /// Generate a suite directory (`suite.json` + `media/`).
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "D")]
    pub profile: EnvId,
    /// lang, vos, oif, vgr, vdl or mixed.
    #[arg(long)]
    pub form: FormChoice,
    #[arg(long, default_value = "base")]
    pub difficulty: Difficulty,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// External crop pool for hard VOS: a crop database or `<object>/<file>.png` tree.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = oevla_sim::render::DEFAULT_RESOLUTION)]
    pub resolution: u32,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// Evaluate a policy on a suite; writes a JSON report and JSONL logs.
    Run(RunArgs),
    /// Recompute metrics from JSONL rollout logs.
    Score(ScoreArgs),
    /// Average `Len` over several reports (one per form).
    Average(AverageArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub suite: PathBuf,
    /// oracle, instruction-oracle, random, or remote:<endpoint>
    /// (tcp://host:port, listen://host:port, stdio:<command>).
    #[arg(long)]
    pub policy: String,
    /// Seed for the random policy.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = oevla_bench::harness::DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value = "every_chunk")]
    pub replan: Replan,
    /// Send float chunks through the token codec before execution.
    #[arg(long)]
    pub codec_loop: bool,
    /// Send ground-truth task and state to a remote policy.
    #[arg(long)]
    pub privileged: bool,
    /// Per-message timeout for remote policies, in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the report path with a `.logs.jsonl` suffix.
    #[arg(long)]
    pub logs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub logs: PathBuf,
    /// Replay every log through the simulator and check its success flags.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CodecCmd {
    /// Float chunks (JSON: one array of 35, or an array of such arrays) to tokens.
    Encode(CodecIo),
    /// Token chunks to floats (bin centres).
    Decode(CodecIo),
    /// Fit 1st/99th percentile normalization statistics over an archive.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct CodecIo {
    /// Input JSON file, `-` for stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub demos: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EnvCmd {
    /// Render a reset scene (or a saved state) to PNG.
    Render(RenderArgs),
    /// Replay a JSONL action trace from a reset; writes visited states.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ViewArg {
    Static,
    Wrist,
    /// Both views side by side, as policies see them.
    Obs,
}

impl ViewArg {
    pub fn view(self) -> Option<View> {
        match self {
            ViewArg::Static => Some(View::Static),
            ViewArg::Wrist => Some(View::Wrist),
            ViewArg::Obs => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, default_value = "D")]
    pub profile: EnvId,
    #[arg(long, required_unless_present = "state")]
    pub seed: Option<u64>,
    /// JSON world state to render instead of a reset.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "static")]
    pub view: ViewArg,
    /// Use the alternate camera.
    #[arg(long)]
    pub alternate_camera: bool,
    #[arg(long, default_value_t = oevla_sim::render::DEFAULT_RESOLUTION)]
    pub resolution: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long, default_value = "D")]
    pub profile: EnvId,
    #[arg(long)]
    pub seed: u64,
    /// One 7-float action per line.
    #[arg(long)]
    pub actions: PathBuf,
    /// Visited states as JSONL (initial state first).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a static-view PNG per state into this directory.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    #[arg(long, default_value_t = oevla_sim::render::DEFAULT_RESOLUTION)]
    pub resolution: u32,
}

#[derive(Debug, Subcommand)]
pub enum RpcCmd {
    /// Serve a built-in policy to a harness.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("transport").required(true).args(["listen", "connect", "stdio"])))]
pub struct ServeArgs {
    /// oracle, instruction-oracle or random.
    #[arg(long)]
    pub policy: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Accept harness connections on host:port.
    #[arg(long)]
    pub listen: Option<String>,
    /// Connect to a harness in listen mode, once per sequence.
    #[arg(long)]
    pub connect: Option<String>,
    /// Serve one session on stdin/stdout.
    #[arg(long)]
    pub stdio: bool,
    /// Stop after this many connections (listen mode).
    #[arg(long)]
    pub max_connections: Option<usize>,
    /// Emit tokens instead of float chunks.
    #[arg(long)]
    pub tokens: bool,
}
