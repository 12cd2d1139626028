use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use slicescale::bench::{run_bench, BenchConfig, BenchReport};
use slicescale::feasibility::{check_scalability, Verdict};
use slicescale::generate::{generate_feasible_with, generate_infeasible_2mode, GenOptions};
use slicescale::io::{
    fmt_f64, read_targets, read_tensor, report_json, save_targets, save_tensor, save_text, status_name, trace_json,
    write_certificate, write_scaling, write_tensor,
};
use slicescale::newton::{newton_scale, SolverOptions, Status};
use slicescale::sinkhorn::sinkhorn_scale;
use slicescale::subspace::build_frame;
use slicescale::Error;

/// Exit codes shared by every subcommand.
const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_MAX_ITERS: u8 = 3;

#[derive(Parser)]
#[command(name = "slicescale", version, about = "Diagonal scaling of nonnegative tensors to prescribed slice sums")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Newton,
    Sinkhorn,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the tensor can be scaled to the targets.
    Check {
        tensor: PathBuf,
        targets: PathBuf,
        /// Print the feasibility report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Compute the scaled tensor.
    Scale {
        tensor: PathBuf,
        targets: PathBuf,
        #[arg(long, value_enum, default_value = "newton")]
        method: Method,
        /// Residual tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Iteration (Newton) or sweep (Sinkhorn) limit.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Write the per-iteration trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Scaled tensor output; printed to stdout when absent.
        #[arg(short = 'o', long = "out")]
        out: Option<PathBuf>,
        /// Scaling vectors output; defaults to `<out>.scaling`.
        #[arg(long)]
        scaling: Option<PathBuf>,
        /// Write the subspace bases as plain-text matrices.
        #[arg(long)]
        dump_frame: Option<PathBuf>,
        /// Print the run summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write a generated instance as `<prefix>.tensor` and `<prefix>.targets`.
    Gen {
        #[arg(long, value_delimiter = ',', default_value = "4,4")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw entries log-uniformly from [1/spread, spread].
        #[arg(long)]
        value_spread: Option<f64>,
        /// Generate an unscalable size×size matrix instead.
        #[arg(long, value_name = "SIZE", conflicts_with_all = ["dims", "density", "value_spread"])]
        infeasible: Option<usize>,
        /// Use the JSON formats (`.json` suffixes).
        #[arg(long)]
        json: bool,
        #[arg(short = 'o', long = "out", default_value = "instance")]
        prefix: String,
    },
    /// Run Newton and Sinkhorn on generated feasible instances.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "5,5")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        value_spread: Option<f64>,
        /// Write the CSV table here (`-` for stdout instead of the text table).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Include wall time in the CSV.
        #[arg(long)]
        timing: bool,
        /// Directory for per-instance trace CSVs.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
}

fn init_logging() {
    let level = std::env::var("SLICESCALE_LOG").unwrap_or_else(|_| "off".into());
    env_logger::Builder::new()
        .parse_filters(&format!("slicescale={level}"))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Check { tensor, targets, json } => cmd_check(&tensor, &targets, json),
        Command::Scale {
            tensor,
            targets,
            method,
            tol,
            max_iters,
            trace,
            out,
            scaling,
            dump_frame,
            json,
        } => {
            let opts = SolverOptions {
                residual_tol: tol,
                max_iters: max_iters.unwrap_or(match method {
                    Method::Newton => SolverOptions::default().max_iters,
                    Method::Sinkhorn => 100_000,
                }),
                ..SolverOptions::default()
            };
            let outputs = ScaleOutputs {
                trace,
                out,
                scaling,
                dump_frame,
                json,
            };
            cmd_scale(&tensor, &targets, method, &opts, &outputs)
        }
        Command::Gen {
            dims,
            density,
            seed,
            value_spread,
            infeasible,
            json,
            prefix,
        } => cmd_gen(&dims, density, seed, value_spread, infeasible, json, &prefix),
        Command::Bench {
            dims,
            density,
            count,
            seed,
            tol,
            value_spread,
            csv,
            timing,
            traces,
        } => {
            let defaults = BenchConfig::default();
            let cfg = BenchConfig {
                dims,
                density,
                count,
                seed,
                gen: GenOptions { value_spread },
                newton: SolverOptions {
                    residual_tol: tol,
                    ..defaults.newton
                },
                sinkhorn: SolverOptions {
                    residual_tol: tol,
                    ..defaults.sinkhorn
                },
            };
            cmd_bench(&cfg, csv.as_deref(), timing, traces.as_deref())
        }
    }
}

fn load(tensor: &Path, targets: &Path) -> Result<(slicescale::SparseTensor, slicescale::TargetSums)> {
    let b = read_tensor(tensor).map_err(|e| with_path(e, tensor))?;
    let s = read_targets(targets).map_err(|e| with_path(e, targets))?;
    Ok((b, s))
}

/// I/O errors already name the file; parse errors only name the line.
fn with_path(e: Error, path: &Path) -> anyhow::Error {
    match e {
        Error::Io(_) => e.into(),
        _ => anyhow::Error::new(e).context(path.display().to_string()),
    }
}

fn cmd_check(tensor: &Path, targets: &Path, json: bool) -> Result<u8> {
    let (b, s) = load(tensor, targets)?;
    let report = check_scalability(&b, &s)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report_json(&report))?);
    } else {
        match (&report.verdict, &report.certificate) {
            (Verdict::Feasible, _) => println!("FEASIBLE"),
            (Verdict::Infeasible, cert) => {
                println!("INFEASIBLE");
                if let Some(y) = cert {
                    print!("{}", write_certificate(y));
                }
            }
        }
    }
    Ok(match report.verdict {
        Verdict::Feasible => EXIT_OK,
        Verdict::Infeasible => EXIT_INFEASIBLE,
    })
}

struct ScaleOutputs {
    trace: Option<PathBuf>,
    out: Option<PathBuf>,
    scaling: Option<PathBuf>,
    dump_frame: Option<PathBuf>,
    json: bool,
}

fn cmd_scale(tensor: &Path, targets: &Path, method: Method, opts: &SolverOptions, outputs: &ScaleOutputs) -> Result<u8> {
    let (b, s) = load(tensor, targets)?;
    if let Some(path) = &outputs.dump_frame {
        save_text(path, &build_frame(&b, &s)?.to_text())?;
    }
    let result = match method {
        Method::Newton => newton_scale(&b, &s, opts)?,
        Method::Sinkhorn => sinkhorn_scale(&b, &s, opts)?,
    };
    if let Some(path) = &outputs.trace {
        save_text(path, &serde_json::to_string_pretty(&trace_json(&result))?)?;
    }
    let scaling_path = outputs
        .scaling
        .clone()
        .or_else(|| outputs.out.as_ref().map(|o| PathBuf::from(format!("{}.scaling", o.display()))));
    if let Some(path) = &outputs.out {
        save_tensor(path, &result.scaled_tensor)?;
    }
    if let Some(path) = &scaling_path {
        save_text(path, &write_scaling(&result.scaling))?;
    }

    if outputs.json {
        let mut summary = trace_json(&result);
        summary["certificate"] = serde_json::json!(result.certificate.as_ref().map(|y| y.modes()));
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!("status {}", status_name(result.status));
        println!("iterations {}", result.iterations);
        println!("residual {}", fmt_f64(result.residual));
        if let Some(y) = &result.certificate {
            print!("{}", write_certificate(y));
        }
        if outputs.out.is_none() && result.status != Status::Diverged {
            print!("{}", write_tensor(&result.scaled_tensor));
        }
    }
    Ok(match result.status {
        Status::Converged => EXIT_OK,
        Status::Diverged => EXIT_INFEASIBLE,
        Status::MaxItersExceeded => EXIT_MAX_ITERS,
    })
}

fn cmd_gen(
    dims: &[usize],
    density: f64,
    seed: u64,
    value_spread: Option<f64>,
    infeasible: Option<usize>,
    json: bool,
    prefix: &str,
) -> Result<u8> {
    let (b, s) = match infeasible {
        Some(size) => generate_infeasible_2mode(size, seed)?,
        None => generate_feasible_with(dims, density, seed, &GenOptions { value_spread })?,
    };
    let ext = if json { ".json" } else { "" };
    let tensor_path = format!("{prefix}.tensor{ext}");
    let targets_path = format!("{prefix}.targets{ext}");
    save_tensor(&tensor_path, &b)?;
    save_targets(&targets_path, &s)?;
    println!("{tensor_path}");
    println!("{targets_path}");
    Ok(EXIT_OK)
}

fn cmd_bench(cfg: &BenchConfig, csv: Option<&Path>, timing: bool, traces: Option<&Path>) -> Result<u8> {
    let report = run_bench(cfg)?;
    if let Some(dir) = traces {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (instance, method, trace) in &report.traces {
            let path = dir.join(format!("instance{:04}_{}.csv", instance, method.name()));
            save_text(&path, &BenchReport::trace_csv(trace)?)?;
        }
    }
    match csv {
        Some(path) if path == Path::new("-") => print!("{}", report.to_csv(timing)?),
        Some(path) => {
            save_text(path, &report.to_csv(timing)?)?;
            print!("{}", report.to_table());
        }
        None => print!("{}", report.to_table()),
    }
    Ok(EXIT_OK)
}
