use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shearflow::harness::config::SourceChoice;
use shearflow::harness::{self, CommandOutput, HarnessError, RunConfig, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "shearflow", version, about = "Transition statistics of a nine-mode shear flow and its reservoir surrogate")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML run configuration; missing keys take their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensemble sections (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Disable the noise added to fed-back predictions
    #[arg(long, global = true)]
    noise_off: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceArg {
    Truth,
    Esn,
    Both,
}

impl From<SourceArg> for SourceChoice {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Truth => SourceChoice::Truth,
            SourceArg::Esn => SourceChoice::Esn,
            SourceArg::Both => SourceChoice::Both,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the model and write a trajectory with its manifest
    Simulate {
        #[arg(long)]
        re: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Train a network on a window of a trajectory
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        t_start: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Free-run a trained network from a state of a trajectory
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        t_start: Option<f64>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Lifetime distribution, survival curve and exponential fit
    Lifetime {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
    },
    /// Ensemble transition probabilities along a trajectory
    Earlywarn {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Laminarization probability against perturbation energy
    Plam {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
    },
    /// Retrain on several windows and count laminarizing free runs
    Ablate {
        #[arg(long)]
        data: PathBuf,
    },
    /// Fit the shifted exponential to an existing lifetime table
    Fit { lifetimes: PathBuf },
}

fn load_config(g: &Global) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if g.noise_off {
        cfg.prediction_noise = false;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<CommandOutput, HarnessError> {
    let mut cfg = load_config(&cli.global)?;
    match &cli.command {
        Command::Simulate { re, duration } => {
            cfg.flow.re = re.unwrap_or(cfg.flow.re);
            cfg.integration.duration = duration.unwrap_or(cfg.integration.duration);
        }
        Command::Train { t_start, t_end, .. } => {
            cfg.training.t_start = t_start.unwrap_or(cfg.training.t_start);
            cfg.training.t_end = t_end.unwrap_or(cfg.training.t_end);
        }
        Command::Predict { t_start, horizon, .. } => {
            cfg.predict.t_start = t_start.unwrap_or(cfg.predict.t_start);
            cfg.predict.horizon = horizon.unwrap_or(cfg.predict.horizon);
        }
        Command::Lifetime { source: Some(s), .. } => cfg.lifetime.source = (*s).into(),
        Command::Plam { source: Some(s), .. } => cfg.plam.source = (*s).into(),
        _ => {}
    }
    cfg.validate()?;

    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    }

    match &cli.command {
        Command::Simulate { .. } => harness::cmd_simulate(&cfg),
        Command::Train { data, .. } => harness::cmd_train(&cfg, data),
        Command::Predict { model, data, .. } => harness::cmd_predict(&cfg, model, data),
        Command::Lifetime { model, .. } => harness::cmd_lifetime(&cfg, model.as_deref()),
        Command::Earlywarn { model, data } => harness::cmd_earlywarn(&cfg, model, data),
        Command::Plam { model, .. } => harness::cmd_plam(&cfg, model.as_deref()),
        Command::Ablate { data } => harness::cmd_ablate(&cfg, data),
        Command::Fit { lifetimes } => harness::cmd_fit(&cfg, lifetimes),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
