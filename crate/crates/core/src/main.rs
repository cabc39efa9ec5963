use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use panel_markov::report::{
    run_analyze, run_ck, run_simulate, run_verify, Format, RunConfig, SimulateOptions, VerifyTolerances,
    DEFAULT_CK_TOLERANCE, EXIT_VERIFICATION_FAILED,
};
use panel_markov::{Error, TrendOptions, TrendWeight, YearRange};

#[derive(Parser)]
#[command(name = "panel-markov", version, about = "Markov transition analysis of size-category panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Panel CSV with entity_id,year,size columns.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "PANEL_MARKOV_OUT")]
    out: Option<PathBuf>,

    /// Year range A:B (inclusive).
    #[arg(long, global = true)]
    years: Option<YearRange>,

    /// TOML file with a `boundaries` array.
    #[arg(long, global = true)]
    scheme: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    #[arg(long, global = true, value_enum, default_value_t = WeightArg::Dest)]
    trend_weight: WeightArg,

    /// Leave state 0 out of the trend sums.
    #[arg(long, global = true)]
    trend_exclude_entry_exit: bool,

    #[arg(long, global = true, default_value_t = DEFAULT_CK_TOLERANCE)]
    tolerance_ck: f64,

    /// Treat undefined columns as errors.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate matrices, trend and entropy from a panel.
    Analyze,
    /// Write a synthetic panel drawn from a homogeneous chain.
    Simulate {
        #[arg(long, default_value_t = 10_000)]
        entities: usize,
        #[arg(long)]
        states: Option<usize>,
        /// Column-stochastic table CSV; paired-swap chain when absent.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Exit probability of the default chain.
        #[arg(long, default_value_t = 0.004)]
        exit: f64,
    },
    /// Check the reference tables.
    Verify {
        /// Fixture directory with manifest.json; compiled-in tables otherwise.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Compare the one-step product with the direct multi-step matrix.
    Ck {
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Dest,
    Origin,
}

fn config(cli: &Cli, fixtures: Option<PathBuf>) -> RunConfig {
    RunConfig {
        input: cli.input.clone(),
        out: cli.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        years: cli.years,
        scheme: cli.scheme.clone(),
        seed: cli.seed,
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
        trend: TrendOptions {
            weight: match cli.trend_weight {
                WeightArg::Dest => TrendWeight::Dest,
                WeightArg::Origin => TrendWeight::Origin,
            },
            exclude_entry_exit: cli.trend_exclude_entry_exit,
        },
        tolerance_ck: cli.tolerance_ck,
        strict: cli.strict,
        fixtures,
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    match &cli.command {
        Command::Analyze => {
            if cli.input.is_none() {
                Cli::command()
                    .error(clap::error::ErrorKind::MissingRequiredArgument, "analyze needs --input")
                    .exit();
            }
            let manifest = run_analyze(&config(&cli, None))?;
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "analyzed {} entities over {}: {} matrices",
                manifest.entities,
                manifest.years,
                manifest.matrices.len()
            );
            Ok(0)
        }
        Command::Simulate {
            entities,
            states,
            matrix,
            exit,
        } => {
            let options = SimulateOptions {
                n_entities: *entities,
                matrix: matrix.clone(),
                states: *states,
                exit: *exit,
            };
            let config = config(&cli, None);
            let m = run_simulate(&config, &options)?;
            println!(
                "wrote {} entities over {} to {}",
                m.entities_written,
                m.years,
                config.out.join("panel.csv").display()
            );
            Ok(0)
        }
        Command::Verify { fixtures } => {
            let config = config(&cli, fixtures.clone());
            let tolerances = VerifyTolerances {
                ck_product: cli.tolerance_ck,
                ..VerifyTolerances::default()
            };
            let report = run_verify(&config.load_fixtures()?, &tolerances)?;
            for c in &report.checks {
                println!("{}", c.line());
                for d in &c.details {
                    println!("  {d}");
                }
            }
            if let Some(out) = &cli.out {
                let path = out.join("verify_report.json");
                std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
                let body = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
                std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            }
            Ok(if report.pass() { 0 } else { EXIT_VERIFICATION_FAILED })
        }
        Command::Ck { fixtures } => {
            let config = config(&cli, fixtures.clone());
            let window = match (cli.years, &cli.input) {
                (Some(w), _) => w,
                (None, None) => YearRange::new(1998, 2000)?,
                (None, Some(_)) => Cli::command()
                    .error(clap::error::ErrorKind::MissingRequiredArgument, "ck on a panel needs --years A:B")
                    .exit(),
            };
            let run = run_ck(&config, window)?;
            let r = &run.report;
            let at = r
                .worst_entry
                .map(|(j, i)| format!(" at row {j} column {i}"))
                .unwrap_or_default();
            println!(
                "{} ck {}: max deviation {:.3e}{at} (tolerance {:.1e}, excluded columns {:?})",
                if r.pass { "PASS" } else { "FAIL" },
                window,
                r.max_deviation,
                r.tolerance,
                r.excluded_columns
            );
            Ok(if r.pass { 0 } else { EXIT_VERIFICATION_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error ({:?}): {e}", e.category());
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
