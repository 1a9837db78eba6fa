use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac_region::cli::{self, Command, WaveformChoice};

#[derive(Parser)]
#[command(name = "isac", version, about = "CRB-rate region tools for MIMO integrated sensing and communication")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.directory`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo stages (results do not depend on it)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the pentagon inner bound
    Region(Common),
    /// Solve for the sensing-optimal covariance
    SolveCov(Common),
    /// Generate transmit blocks
    Waveform {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Run the derivative and estimator checks
    Verify(Common),
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Kind {
    Shc,
    Gaussian,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, common) = match args.command {
        Cmd::Region(c) => (Command::Region, c),
        Cmd::SolveCov(c) => (Command::SolveCov, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Waveform { common, kind, blocks } => {
            let kind = kind.map(|k| match k {
                Kind::Shc => WaveformChoice::Shc,
                Kind::Gaussian => WaveformChoice::Gaussian,
            });
            (Command::Waveform { kind, blocks }, common)
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.workers {
        if n == 0 {
            eprintln!("isac: --workers must be >= 1");
            return ExitCode::from(cli::EXIT_CONFIG as u8);
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("isac: cannot start worker pool: {e}");
            return ExitCode::from(cli::EXIT_NUMERICAL as u8);
        }
    };
    let code = pool.install(|| {
        cli::run(
            command,
            &common.config,
            common.out.as_deref(),
            common.verbose,
            &mut std::io::stdout(),
            &mut std::io::stderr(),
        )
    });
    ExitCode::from(code as u8)
}
