use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dyadic_bump::config::{apply_thread_cap, ExperimentConfig};
use dyadic_bump::report::ExperimentReport;
use dyadic_bump::suites::{run_suite, Suite};
use dyadic_bump::Error;

/// Dyadic two-weight experiments. Exit status is 0 iff every verdict passes,
/// 1 on a failed verdict and 2 on usage or configuration errors.
#[derive(Parser)]
#[command(name = "dyadic-bump", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite named by the config's `suite` key.
    Run(Common),
    Luxemburg(Common),
    Duality(Common),
    Holder(Common),
    Bump(Common),
    Maximal(Common),
    ShiftNorm(Common),
    Testing(Common),
    TauScaling(Common),
    Decay(Common),
    Stopping(Common),
    Interp(Common),
    Summation(Common),
    Hilbert(Common),
    Search(Common),
    /// List the suites.
    List,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed; required without a config.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here; a `.csv` table is written alongside JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    /// One JSON record per trial.
    Jsonl,
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path).map_err(|e| match e {
            Error::Parse { .. } | Error::Config(_) => Error::Config(format!("{}: {e}", path.display())),
            other => other,
        })?,
        None => {
            let seed = common
                .seed
                .ok_or_else(|| Error::Config("a seed is required: pass --seed or --config".into()))?;
            ExperimentConfig::with_seed(seed)
        }
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.depth.is_some() {
        cfg.depth = common.depth;
    }
    if common.budget.is_some() {
        cfg.budget = common.budget;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate().map_err(|(_, _, msg)| Error::Config(msg))?;
    Ok(cfg)
}

fn render(report: &ExperimentReport, format: Format) -> Result<String, Error> {
    Ok(match format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => report.to_csv(),
        Format::Jsonl => {
            let mut out = String::new();
            for t in &report.trials {
                out.push_str(&serde_json::to_string(t)?);
                out.push('\n');
            }
            out
        }
    })
}

fn emit(report: &ExperimentReport, format: Format, out: Option<&Path>) -> Result<(), Error> {
    let text = render(report, format)?;
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            if matches!(format, Format::Json) {
                std::fs::write(path.with_extension("csv"), report.to_csv())?;
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(suite: Option<Suite>, common: &Common) -> Result<bool, Error> {
    let cfg = load(common)?;
    apply_thread_cap()?;
    let suite = match suite {
        Some(s) => s,
        None => cfg
            .suite
            .as_deref()
            .ok_or_else(|| Error::Config("`run` needs a config with a `suite` key".into()))?
            .parse()?,
    };
    let report = run_suite(suite, &cfg)?;
    emit(&report, common.format, cfg.output.as_deref())?;
    eprint!("{}", report.summary());
    eprintln!("{suite}: {:.2} s", report.wall_time);
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (suite, common) = match &cli.command {
        Command::List => {
            for s in Suite::ALL {
                println!("{s}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Run(c) => (None, c),
        Command::Luxemburg(c) => (Some(Suite::Luxemburg), c),
        Command::Duality(c) => (Some(Suite::Duality), c),
        Command::Holder(c) => (Some(Suite::Holder), c),
        Command::Bump(c) => (Some(Suite::Bump), c),
        Command::Maximal(c) => (Some(Suite::Maximal), c),
        Command::ShiftNorm(c) => (Some(Suite::ShiftNorm), c),
        Command::Testing(c) => (Some(Suite::Testing), c),
        Command::TauScaling(c) => (Some(Suite::TauScaling), c),
        Command::Decay(c) => (Some(Suite::Decay), c),
        Command::Stopping(c) => (Some(Suite::Stopping), c),
        Command::Interp(c) => (Some(Suite::Interp), c),
        Command::Summation(c) => (Some(Suite::Summation), c),
        Command::Hilbert(c) => (Some(Suite::Hilbert), c),
        Command::Search(c) => (Some(Suite::Search), c),
    };
    match execute(suite, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ (Error::Config(_) | Error::Parse { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
