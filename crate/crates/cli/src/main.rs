use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tradeoff::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "tradeoff",
    version,
    about = "Runtime versus sample-size experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a JSON config and write the curve CSV.
    Curve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the probability of guessing m inner-product bits.
    ProbeGl {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarize a curve CSV per algorithm and sample size.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Also write the summary as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in identity checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> tradeoff::Result<bool> {
    match command {
        Command::Curve { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = ExperimentConfig::from_json(&text)?;
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            let points = harness::run_curve(&cfg)?;
            match out.or(cfg.output.clone()) {
                Some(path) => {
                    harness::write_points(BufWriter::new(File::create(&path)?), &points)?;
                    print!("{}", harness::format_table(&harness::summarize(&points)));
                    eprintln!("wrote {} points to {}", points.len(), path.display());
                }
                None => harness::write_points(io::stdout().lock(), &points)?,
            }
            Ok(true)
        }
        Command::ProbeGl { n, m, trials, seed } => {
            let est = harness::gl_probe(n, m, trials, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let expected = 0.5f64.powi(m as i32);
            println!("n={n} m={m} trials={trials}");
            println!("estimate {:.6e} +/- {:.2e}", est.mean, est.std_err);
            println!("2^-m     {expected:.6e}");
            Ok(true)
        }
        Command::Report { input, out } => {
            let points = harness::read_points(File::open(&input)?)?;
            let rows = harness::summarize(&points);
            print!("{}", harness::format_table(&rows));
            if let Some(path) = out {
                harness::write_summary(BufWriter::new(File::create(path)?), &rows)?;
            }
            Ok(true)
        }
        Command::Selftest => {
            let results = harness::selftest();
            let mut stdout = io::stdout().lock();
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                writeln!(stdout, "{tag}  {}  ({})", r.name, r.detail)?;
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}
