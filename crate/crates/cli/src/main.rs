use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polyosc_cli::config::SAMPLE_3X3;
use polyosc_cli::{emit, output_dir, run, CliError, Command, ExperimentConfig, Format};

#[derive(Parser)]
#[command(name = "polyosc", version, about = "Variation, oscillation and polynomial-average experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the experiment described by a config file.
    Run(Flags),
    /// ρ-variation certificates, checked against brute-force enumeration.
    Variation(Flags),
    /// Oscillation seminorms along chains and the pointwise maximal bound.
    Oscillation(Flags),
    /// Dyadic Rademacher–Menshov bounds on random families.
    RmCheck(Flags),
    /// Rank, basis rows, N0 and the dyadic scale selector of a monomial map.
    Gluing(Flags),
    /// Long/short splitting of V² on compatible families.
    SplittingCheck(Flags),
    /// Radon multiplier along a line of frequencies.
    Multiplier(Flags),
    /// Two-sided decay fits of the inclusion–exclusion error multiplier.
    DecayScan(Flags),
    /// Off-diagonal constants c_h and their decay in |h|.
    OffdiagScan(Flags),
    /// L¹ norms of mixed differences of dilated bumps.
    Cancellation(Flags),
    /// Convergence of polynomial ergodic averages on a torus.
    ErgodicRun(Flags),
    /// Spectral Radon averages on a periodic grid with direct cross-checks.
    RadonRun(Flags),
    /// Oscillation ratios of averages over random lacunary chains.
    OscStats(Flags),
}

#[derive(Args, Clone)]
struct Flags {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to $POLYOSC_OUT, then ./polyosc-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Work budget (quadrature nodes, summation terms or grid points).
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Number of parameters for rm-check.
    #[arg(long)]
    k0: Option<usize>,
    /// Lattice depth L for rm-check.
    #[arg(long = "L", id = "depth")]
    depth: Option<u32>,
    /// Use the bundled 3×3 sample family (variation, oscillation).
    #[arg(long)]
    sample: bool,
    /// Record wall time in the results.
    #[arg(long)]
    timing: bool,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
}

fn load(command: Option<Command>, flags: &Flags) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&flags.config, flags.sample) {
        (Some(_), true) => return Err(CliError::Usage("--config and --sample are exclusive".into())),
        (Some(path), false) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        (None, true) => {
            let mut c = ExperimentConfig::parse(SAMPLE_3X3)?;
            if let Some(cmd) = command {
                if !matches!(cmd, Command::Variation | Command::Oscillation) {
                    return Err(CliError::Usage(format!("--sample does not apply to {cmd}")));
                }
                c.experiment.command = cmd;
            }
            c
        }
        (None, false) => match command {
            Some(cmd) => ExperimentConfig::new(cmd),
            None => return Err(CliError::Usage("run needs --config".into())),
        },
    };
    if let Some(cmd) = command {
        if config.command() != cmd {
            return Err(CliError::Validation(format!("config describes {}, not {cmd}", config.command())));
        }
    }
    let e = &mut config.experiment;
    e.seed = flags.seed.unwrap_or(e.seed);
    e.trials = flags.trials.or(e.trials);
    e.budget = flags.budget.or(e.budget);
    e.tolerance = flags.tolerance.or(e.tolerance);
    e.out = flags.out.clone().or(e.out.take());
    e.timing |= flags.timing;
    if flags.k0.is_some() || flags.depth.is_some() {
        if config.command() != Command::RmCheck {
            return Err(CliError::Usage("--k0 and --L apply to rm-check only".into()));
        }
        config.rm.k0 = flags.k0.unwrap_or(config.rm.k0);
        config.rm.depth = flags.depth.unwrap_or(config.rm.depth);
    }
    Ok(config)
}

fn execute(command: Option<Command>, flags: &Flags) -> Result<i32, CliError> {
    let config = load(command, flags)?;
    let outcome = run(&config)?;
    let dir = output_dir(&config);
    let written = emit(&outcome, &dir, flags.format)?;
    println!(
        "{}: {} checks, {} violations",
        config.command(),
        outcome.checks(),
        outcome.violations()
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, flags) = match cli.command {
        Sub::Run(f) => (None, f),
        Sub::Variation(f) => (Some(Command::Variation), f),
        Sub::Oscillation(f) => (Some(Command::Oscillation), f),
        Sub::RmCheck(f) => (Some(Command::RmCheck), f),
        Sub::Gluing(f) => (Some(Command::Gluing), f),
        Sub::SplittingCheck(f) => (Some(Command::SplittingCheck), f),
        Sub::Multiplier(f) => (Some(Command::Multiplier), f),
        Sub::DecayScan(f) => (Some(Command::DecayScan), f),
        Sub::OffdiagScan(f) => (Some(Command::OffdiagScan), f),
        Sub::Cancellation(f) => (Some(Command::Cancellation), f),
        Sub::ErgodicRun(f) => (Some(Command::ErgodicRun), f),
        Sub::RadonRun(f) => (Some(Command::RadonRun), f),
        Sub::OscStats(f) => (Some(Command::OscStats), f),
    };
    match execute(command, &flags) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("polyosc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
