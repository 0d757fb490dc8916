use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use foam::bench::{compare, run, CompareReport, RunConfig, SUMMARY_FILE, TRACE_FILE};
use foam::memory::{estimate_method, load_manifest, render_table, Method};
use foam::props::{Grid, PropsSuite};
use foam::FoamError;

const SEED_OVERRIDE_VAR: &str = "FOAM_SEED_OVERRIDE";

#[derive(Parser)]
#[command(name = "foam", version, about = "FOAM optimizer benchmarks, property checks and memory reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured experiment and write trace.jsonl and summary.json.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Output directory. Defaults to the config's output_path, then
        /// runs/<config hash prefix>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run two configs on the same task and seed and report paired metrics.
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fold/projector property suite.
    Props {
        #[arg(long, default_value = "full")]
        grid: Grid,
    },
    /// Print optimizer-state memory for a layer manifest.
    Memory {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated methods, e.g. adam,foam:2,galore:1/4. Empty means all.
        #[arg(long, default_value = "")]
        methods: String,
        #[arg(long)]
        json: bool,
    },
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<FoamError> for Failure {
    fn from(e: FoamError) -> Self {
        let code = match e {
            FoamError::Config { .. } | FoamError::Json(_) => 2,
            FoamError::Diverged { .. } => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_OVERRIDE_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::config(format!("{SEED_OVERRIDE_VAR} must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::load(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    Ok(match seed_override()? {
        Some(seed) => cfg.with_seed(seed),
        None => cfg,
    })
}

fn bench(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let dir = out
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| Path::new("runs").join(&cfg.config_hash()[..12]));
    let output = run(&cfg)?;
    output.write_to(&dir)?;
    println!("{}", serde_json::to_string_pretty(&output.summary).map_err(FoamError::from)?);
    eprintln!(
        "wrote {} and {} to {}",
        TRACE_FILE,
        SUMMARY_FILE,
        dir.display()
    );
    Ok(())
}

fn print_compare_summary(r: &CompareReport) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    eprintln!("{:<24} {:>12} {:>12} {:>12}", "metric", "a", "b", "b - a");
    eprintln!(
        "{:<24} {:>12.6} {:>12.6} {:>12.6}",
        "final_loss", r.final_loss.a, r.final_loss.b, r.final_loss.delta
    );
    eprintln!(
        "{:<24} {:>12.6} {:>12.6} {:>12.6}",
        "late_phase_loss", r.late_phase_loss.a, r.late_phase_loss.b, r.late_phase_loss.delta
    );
    eprintln!(
        "{:<24} {:>12} {:>12} {:>12}",
        "mean_cos_to_adam",
        opt(r.mean_cos_to_adam.a),
        opt(r.mean_cos_to_adam.b),
        opt(r.mean_cos_to_adam.delta)
    );
    eprintln!(
        "{:<24} {:>12} {:>12} {:>12}",
        "mean_delta_energy_ratio",
        opt(r.mean_delta_energy_ratio.a),
        opt(r.mean_delta_energy_ratio.b),
        opt(r.mean_delta_energy_ratio.delta)
    );
}

fn compare_cmd(a: &Path, b: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let (a, b) = (load_config(a)?, load_config(b)?);
    let report = compare(&a, &b)?;
    let json = serde_json::to_string_pretty(&report).map_err(FoamError::from)?;
    match out {
        Some(path) => {
            std::fs::write(&path, json + "\n").map_err(FoamError::from)?;
            print_compare_summary(&report);
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn props(grid: Grid) -> Result<(), Failure> {
    let report = PropsSuite::new(grid).run();
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: format!("{} property checks failed", report.failures().count()),
        })
    }
}

fn memory(manifest: &Path, methods: &str, json: bool) -> Result<(), Failure> {
    let layers = load_manifest(manifest).map_err(|e| Failure::config(format!("{}: {e}", manifest.display())))?;
    let methods = Method::parse_list(methods)?;
    let reports = methods
        .into_iter()
        .map(|m| estimate_method(&layers, m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::config(e.to_string()))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&reports).map_err(FoamError::from)?);
    } else {
        print!("{}", render_table(&reports));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench { config, out } => bench(&config, out),
        Command::Compare { config_a, config_b, out } => compare_cmd(&config_a, &config_b, out),
        Command::Props { grid } => props(grid),
        Command::Memory { manifest, methods, json } => memory(&manifest, &methods, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
