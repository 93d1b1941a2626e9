//! Command-line front end: transforms, convolutions, limit laws and the
//! convergence experiments.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use freelimit::generators::{materialize_classical, materialize_free, GeneratorPair};
use freelimit::harness::{run_check, run_experiment, ExperimentConfig, Suite};
use freelimit::measure::{read_finite, read_probability, write_json};
use freelimit::{classical, freeconv, transform, Error, Measure};

#[derive(Debug, Parser)]
#[command(
    name = "freelimit",
    version,
    about = "Free and classical limit laws of infinitesimal arrays"
)]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate G, F or φ of a measure at points of the upper half-plane.
    Transform {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
        /// Comma-separated complex points, e.g. `1i,0.5+2i`.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        points: Vec<Complex64>,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Free additive convolution of the given measures, shifted by c.
    Freeconv {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        shift: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classical convolution of the given measures, shifted by c.
    Classical {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        shift: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Materialize the infinitely divisible law of a generator pair.
    Lh {
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        /// Finite measure σ, masses as written.
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long, value_enum)]
        law: Law,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a convergence experiment and write the CSV table.
    Limit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Run a check suite over the rows of an experiment.
    Check {
        #[arg(long)]
        suite: Suite,
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Cauchy,
    F,
    Phi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Law {
    Free,
    Classical,
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
enum Failure {
    /// Exit 1: a numerical procedure did not succeed.
    Numerical(String),
    /// Exit 2: unreadable or invalid input.
    Input(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Numerical(_) => 1,
            Failure::Input(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Numerical(m) | Failure::Input(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Input("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Transform {
            measure,
            which,
            points,
            out,
        } => {
            let m = read_probability(&measure)?;
            let text = serde_json::to_string_pretty(&evaluate(&m, which, &points)?)
                .map_err(|e| Failure::Input(e.to_string()))?;
            match out {
                Some(path) => write_text(&path, &text),
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
        Command::Freeconv { files, shift, out } => {
            let ms = read_all(&files)?;
            write_json(&freeconv::free_convolve_many(&ms, shift, None)?, &out)?;
            Ok(())
        }
        Command::Classical { files, shift, out } => {
            let ms = read_all(&files)?;
            write_json(&classical::classical_convolve_many(&ms, shift, None)?, &out)?;
            Ok(())
        }
        Command::Lh { gamma, sigma, law, out } => {
            let g = GeneratorPair::new(gamma, read_finite(&sigma)?)?;
            let m = match law {
                Law::Free => materialize_free(&g, None)?,
                Law::Classical => materialize_classical(&g, None)?,
            };
            write_json(&m, &out)?;
            Ok(())
        }
        Command::Limit { config, out_csv } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if out_csv.is_some() {
                cfg.out_csv = out_csv;
            }
            let report = run_experiment(&cfg)?;
            match &cfg.out_csv {
                Some(path) => {
                    let file = File::create(path).map_err(|e| io_failure(path, e))?;
                    report.write_csv(BufWriter::new(file))?;
                }
                None => report.write_csv(io::stdout().lock())?,
            }
            let errors = report.all_errors();
            if errors.is_empty() {
                Ok(())
            } else {
                Err(Failure::Numerical(errors.join("; ")))
            }
        }
        Command::Check { suite, config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_check(suite, &cfg)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Input(e.to_string()))?;
            println!("{text}");
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Numerical(format!(
                    "check {}: failed, max violation {:e}",
                    suite_name(suite),
                    report.max_violation
                )))
            }
        }
    }
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Lemma31 => "lemma31",
        Suite::Prop23 => "prop23",
        Suite::PhiAdditivity => "phi-additivity",
    }
}

fn read_all(files: &[PathBuf]) -> Result<Vec<Measure>, Failure> {
    files
        .iter()
        .map(|p| read_probability(p).map_err(Failure::from))
        .collect()
}

fn evaluate(m: &Measure, which: Which, points: &[Complex64]) -> Result<serde_json::Value, Failure> {
    let mut rows = Vec::with_capacity(points.len());
    for &z in points {
        let v = match which {
            Which::Cauchy => transform::cauchy(m, z),
            Which::F => transform::f_transform(m, z),
            Which::Phi => transform::voiculescu(m, z),
        }?;
        rows.push(json!({ "z": [z.re, z.im], "value": [v.re, v.im] }));
    }
    let name = match which {
        Which::Cauchy => "cauchy",
        Which::F => "f",
        Which::Phi => "phi",
    };
    Ok(json!({ "which": name, "evaluations": rows }))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_failure(path, e))?);
    writeln!(w, "{text}").map_err(|e| io_failure(path, e))?;
    w.flush().map_err(|e| io_failure(path, e))
}
