use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use roomsynth_cli::commands::{calibration_log, cmd_calibrate, cmd_eval, cmd_render, cmd_synth_rir};
use roomsynth_cli::config::CONFIG_ENV;
use roomsynth_cli::replay::cmd_replay;
use roomsynth_cli::{CliResult, Config, Context, Overrides, PipelineMode, RenderTarget};

#[derive(Parser)]
#[command(name = "roomsynth", version, about = "Scene-aware room impulse response synthesis and rendering")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Synthesis mode.
    #[arg(long, global = true, value_enum, default_value_t = PipelineMode::Full)]
    mode: PipelineMode,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    sample_rate: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the response of one source of a scene.
    SynthRir {
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        source: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convolve input audio with a scene's responses or a response file.
    Render {
        #[arg(long, conflicts_with = "rir", required_unless_present = "rir")]
        scene: Option<PathBuf>,
        #[arg(long)]
        rir: Option<PathBuf>,
        /// One input per scene source.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay an observation stream over input audio.
    Replay {
        stream: PathBuf,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Response log; defaults to the output path with `.log.tsv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Compare estimated responses with ground truth.
    Eval {
        /// Directory of estimated responses, one `<scene id>.wav` each.
        estimates: PathBuf,
        /// Directory of ground-truth responses or an RT60 table file.
        ground_truth: PathBuf,
        /// Report path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the per-scene-type parameter table.
    Calibrate {
        dataset: PathBuf,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let overrides = Overrides { seed: cli.seed, sample_rate: cli.sample_rate };
    let config = Config::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::SynthRir { scene, source, out } => {
            let ctx = Context::new(config)?;
            let rir = cmd_synth_rir(&ctx, &scene, cli.mode, source, &out)?;
            let rt: Vec<String> = rir.rt60.iter().map(|t| format!("{t:.4}")).collect();
            println!("{}\t{} samples\trt60 {}", out.display(), rir.rir.len(), rt.join(" "));
        }
        Command::Render { scene, rir, inputs, out } => {
            let ctx = Context::new(config)?;
            let target = match (scene, rir) {
                (Some(path), _) => RenderTarget::Scene { path, mode: cli.mode },
                (None, Some(path)) => RenderTarget::Rir(path),
                (None, None) => unreachable!("clap requires one target"),
            };
            let clip = cmd_render(&ctx, &target, &inputs, &out)?;
            println!("{}\t{} samples", out.display(), clip.len());
        }
        Command::Replay { stream, input, out, log } => {
            let ctx = Context::new(config)?;
            let log = log.unwrap_or_else(|| out.with_extension("log.tsv"));
            let outcome = cmd_replay(&ctx, &stream, &input, cli.mode, &out, &log)?;
            println!("{}\t{} submissions\tlog {}", out.display(), outcome.submissions().count(), log.display());
        }
        Command::Eval { estimates, ground_truth, out } => {
            let evaluation = cmd_eval(&estimates, &ground_truth, out.as_deref())?;
            if out.is_none() {
                print!("{}", evaluation.report());
            }
        }
        Command::Calibrate { dataset, grid, out } => {
            let ctx = Context::new(config)?;
            let result = cmd_calibrate(&ctx, &dataset, grid.as_deref(), &out)?;
            print!("{}", calibration_log(&result));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::FAILURE
        }
    }
}
