//! `oad`: run, sweep and analyse obstacle-aware damping experiments.

mod commands;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use obstacle_damping::controller::ControllerKind;

#[derive(Parser, Debug)]
#[command(
    name = "oad",
    version,
    about = "Obstacle-aware passive damping experiments"
)]
struct Cli {
    /// Suppress the summary printed to stdout.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate every start of an experiment and write one CSV per trajectory.
    Run(RunArgs),
    /// Monte-Carlo noise sweep of both controllers on identical seeds.
    Sweep(SweepArgs),
    /// Closed-form checks.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Args, Debug)]
struct Source {
    /// Experiment TOML file.
    #[arg(long, conflicts_with = "preset", required_unless_present_any = ["preset", "list_presets"])]
    config: Option<PathBuf>,

    /// Bundled experiment by name.
    #[arg(long)]
    preset: Option<String>,

    /// Print the bundled experiment names and exit.
    #[arg(long)]
    list_presets: bool,

    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (default: the experiment's `output_dir`, else `oad-out`).
    #[arg(long, env = "OAD_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: Source,

    /// Override the experiment controller.
    #[arg(long, value_enum)]
    controller: Option<ControllerArg>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,

    /// Run only this controller instead of both.
    #[arg(long, value_enum)]
    controller: Option<ControllerArg>,

    /// Override the number of epochs per level.
    #[arg(long)]
    epochs: Option<usize>,

    /// Override the noise levels (comma-separated standard deviations).
    #[arg(long, value_parser = parse::vector)]
    levels: Option<obstacle_damping::Vector>,

    /// Index of the start to sweep.
    #[arg(long, default_value_t = 0)]
    start: usize,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Largest stable damping `2 min eig(M) / Δt` under explicit Euler.
    DampingLimit {
        /// Scalar, `I`, or rows separated by `;` (e.g. `2,0;0,8`).
        #[arg(long, value_parser = parse::matrix)]
        mass: obstacle_damping::Matrix,
        #[arg(long)]
        dt: f64,
    },
    /// Non-passive velocity region of `D = Q diag(s) Qᵀ` for desired velocity `f`.
    Passivity {
        #[arg(long, value_parser = parse::vector, allow_hyphen_values = true)]
        f: obstacle_damping::Vector,
        /// Damping values along the basis directions.
        #[arg(long, value_parser = parse::vector)]
        s: obstacle_damping::Vector,
        /// Planar basis rotation in radians (identity basis otherwise).
        #[arg(long, allow_hyphen_values = true)]
        angle: Option<f64>,
        /// Write a dissipation grid (2-D only) to this CSV file.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        extent: f64,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
    },
    /// Largest impact speed a flat wall at distance `d` survives.
    ImpulseBound {
        #[arg(long)]
        sf: f64,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        d: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ControllerArg {
    Aware,
    Baseline,
}

impl From<ControllerArg> for ControllerKind {
    fn from(arg: ControllerArg) -> Self {
        match arg {
            ControllerArg::Aware => ControllerKind::ObstacleAware,
            ControllerArg::Baseline => ControllerKind::VelocityPreserving,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(
            &args.source.into(),
            args.controller.map(Into::into),
            cli.quiet,
        ),
        Command::Sweep(args) => commands::sweep(
            &args.source.into(),
            commands::SweepOverrides {
                controller: args.controller.map(Into::into),
                epochs: args.epochs,
                levels: args.levels.map(|l| l.as_slice().to_vec()),
                start: args.start,
            },
            cli.quiet,
        ),
        Command::Analyze(cmd) => match cmd {
            AnalyzeCommand::DampingLimit { mass, dt } => commands::damping_limit(&mass, dt),
            AnalyzeCommand::Passivity {
                f,
                s,
                angle,
                grid,
                extent,
                resolution,
            } => commands::passivity(&f, &s, angle, grid.as_deref(), extent, resolution),
            AnalyzeCommand::ImpulseBound { sf, m, d } => commands::impulse_bound(sf, m, d),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("oad: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

impl From<Source> for commands::Source {
    fn from(source: Source) -> Self {
        commands::Source {
            config: source.config,
            preset: source.preset,
            list_presets: source.list_presets,
            seed: source.seed,
            out: source.out,
        }
    }
}
