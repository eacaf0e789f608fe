mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdd_gsa::bench::{run_study, StudyConfig, StudyOutcome};
use pdd_gsa::fit::{fit, Method};
use pdd_gsa::gsa::sobol_indices;
use pdd_gsa::measures::sample_design;
use pdd_gsa::pdd::{enumerate_basis, write_csv};
use pdd_gsa::{Error, ErrorKind, Result, TrainingSet};

use config::{read_json, write_json, ModelFile, ProblemConfig};

#[derive(Parser)]
#[command(name = "pdd-gsa", version, about = "Sobol sensitivity indices from sparse PDD surrogates")]
struct Cli {
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a design of input samples and write it as CSV.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a surrogate to `x1..xN,y` CSV data and write the model JSON.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        regression: RegressionArgs,
    },
    /// Compute Sobol indices from a model file. Writes JSON and a CSV table
    /// next to it.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a replicated benchmark study into an output directory.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        regression: RegressionArgs,
    },
}

#[derive(Args)]
struct RegressionArgs {
    /// ls, lasso or dmorph.
    #[arg(long)]
    method: Option<Method>,
    /// D-MORPH blend weight in [0, 1].
    #[arg(long)]
    lambda: Option<f64>,
    /// D-MORPH iteration cap.
    #[arg(long)]
    iterations: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Numeric => 2,
        ErrorKind::Io => 3,
    }
}

fn run(cli: Cli) -> Result<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Sample { config, samples, seed, out } => cmd_sample(&config, samples, seed, &out, quiet),
        Command::Fit { config, data, out, regression } => cmd_fit(&config, &data, &out, &regression, quiet),
        Command::Analyze { model, out } => cmd_analyze(&model, &out, quiet),
        Command::Benchmark { config, out, trials, samples, seed, regression } => {
            let mut cfg: StudyConfig = read_json(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(m) = samples {
                cfg.samples = m;
            }
            if let Some(s) = seed {
                cfg.seed_base = s;
            }
            if let Some(m) = regression.method {
                cfg.method = m;
            }
            if let Some(l) = regression.lambda {
                cfg.lambdas = vec![l];
            }
            if let Some(it) = regression.iterations {
                cfg.dmorph.max_iterations = it;
                cfg.checkpoints.retain(|&c| c < it);
                cfg.checkpoints.push(it);
            }
            cmd_benchmark(&cfg, &out, quiet)
        }
    }
}

fn load_problem(path: &Path) -> Result<ProblemConfig> {
    let cfg: ProblemConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn cmd_sample(config: &Path, samples: usize, seed: Option<u64>, out: &Path, quiet: bool) -> Result<()> {
    let cfg = load_problem(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let x = sample_design(&cfg.distributions, samples, seed, cfg.sampling)?;
    write_csv(create(out)?, &x, None)?;
    if !quiet {
        println!("wrote {samples} samples of {} inputs to {}", x.ncols(), out.display());
    }
    Ok(())
}

fn cmd_fit(config: &Path, data: &Path, out: &Path, args: &RegressionArgs, quiet: bool) -> Result<()> {
    let mut cfg = load_problem(config)?;
    if let Some(l) = args.lambda {
        cfg.regression.lambda = l;
    }
    if let Some(it) = args.iterations {
        cfg.regression.max_iterations = it;
    }
    cfg.regression.validate()?;
    let method = args.method.or(cfg.method);
    let ts = TrainingSet::from_csv_path(data, cfg.distributions.clone())?;
    let basis = enumerate_basis(cfg.distributions.len(), cfg.variate, cfg.order)?;
    let (model, diag) = fit(&ts, &basis, method, &cfg.regression)?;
    if !quiet {
        println!(
            "{:?} fit: {} samples, {} basis terms, relative residual {:.3e}, {} iterations",
            diag.method, diag.samples, diag.basis_size, diag.relative_residual, diag.iterations
        );
    }
    write_json(out, &ModelFile { model, diagnostics: Some(diag) })
}

fn cmd_analyze(model: &Path, out: &Path, quiet: bool) -> Result<()> {
    let file: ModelFile = read_json(model)?;
    let report = sobol_indices(&file.model);
    write_json(out, &report)?;
    let table = out.with_extension("csv");
    let mut w = csv::Writer::from_writer(create(&table)?);
    let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", table.display()));
    w.write_record(["name", "value"]).map_err(csv_err)?;
    for (name, value) in report.table() {
        w.write_record([name, value.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&table, e))?;
    if !quiet {
        if report.degenerate {
            println!("surrogate has zero variance; indices are all zero");
        }
        for (name, value) in report.table() {
            println!("{name:>12}  {value:.6}");
        }
    }
    Ok(())
}

fn cmd_benchmark(cfg: &StudyConfig, out: &Path, quiet: bool) -> Result<()> {
    cfg.validate()?;
    let outcome = run_study(cfg)?;
    let trial_dir = out.join("trials");
    std::fs::create_dir_all(&trial_dir).map_err(|e| Error::io(&trial_dir, e))?;
    for t in &outcome.trials {
        write_json(&trial_dir.join(format!("trial_{:03}.json", t.trial)), t)?;
    }
    let summary = StudyOutcome { trials: Vec::new(), ..outcome.clone() };
    write_json(&out.join("summary.json"), &summary)?;
    outcome.write_summary_csv(create(&out.join("summary.csv"))?)?;
    if !quiet {
        print_summary(&outcome);
    }
    Ok(())
}

fn print_summary(outcome: &StudyOutcome) {
    println!(
        "{}: {} trials, {} basis terms",
        outcome.benchmark,
        outcome.trials.len(),
        outcome.basis_size
    );
    println!("{:<36} {:>10} {:>12}", "estimator", "MRE(std)", "max MAE(S)");
    for row in &outcome.summary {
        let std = row.error("std").map(|e| e.headline()).unwrap_or(f64::NAN);
        let worst = row
            .errors
            .iter()
            .filter(|e| e.name.starts_with('S'))
            .map(|e| e.mean_absolute_error)
            .fold(0.0, f64::max);
        println!("{:<36} {:>10.4} {:>12.4}", row.key.label(), std, worst);
    }
}
