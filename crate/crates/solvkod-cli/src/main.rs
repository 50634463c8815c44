mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use scenario::{find, registry, run_scenario, Analysis, CliError, Report, RunOptions, Scenario};

/// Overrides the golden directory used by `--check` and `--bless`.
const GOLDEN_ENV: &str = "SOLVKOD_GOLDEN_DIR";

#[derive(Parser, Debug)]
#[command(name = "solvkod", version, about = "Kodaira dimension, curvature and twistor reports for invariant almost complex structures")]
struct Cli {
    /// Run every registered scenario.
    #[arg(long, global = true)]
    all: bool,
    /// Compare reports against the golden directory; exit 1 on any mismatch.
    #[arg(long, global = true)]
    check: bool,
    /// Rewrite the golden files from the current reports.
    #[arg(long, global = true, conflicts_with = "check")]
    bless: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Largest power m of the canonical bundle.
    #[arg(long = "power", global = true, default_value_t = 5)]
    power: u32,
    /// Half-width N of the integer mode window scanned.
    #[arg(long = "scan-window", global = true, default_value_t = 10)]
    scan_window: i64,
    /// Number of powers m = 1..=samples sampled by the scan.
    #[arg(long, global = true, default_value_t = 5)]
    samples: u32,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args, Debug, Clone)]
struct Target {
    /// Built-in manifold: Mk, N or Mlambda.
    #[arg(long, default_value = "Mk")]
    manifold: String,
    /// TOML model file used instead of a built-in manifold.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    structure: Option<String>,
    /// Comma separated `name=value` bindings.
    #[arg(long, default_value = "")]
    params: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plurigenera and Kodaira dimension.
    Kod(Target),
    /// Canonical connection, Chern-Ricci form and scalar curvature.
    Curvature {
        #[command(flatten)]
        target: Target,
        /// Metric name; must be the one registered with the structure.
        #[arg(long)]
        metric: Option<String>,
    },
    /// Fourier mode systems and their determinants.
    Det(Target),
    /// Jacobi identity and structure-equation checks of a model.
    Verify(Target),
    /// Twistor fundamental forms and closed constant sections.
    Twistor(Target),
    /// Norden classification and twin metrics.
    Norden(Target),
    /// Run a registered scenario by id.
    Run { id: String },
    /// List registered scenarios.
    List,
}

fn adhoc(analysis: Analysis, t: Target, metric: Option<String>) -> Scenario {
    Scenario {
        id: format!("{}-adhoc", analysis.name()),
        analysis,
        manifold: t.manifold,
        model: t.model,
        structure: t.structure,
        params: t.params,
        metric,
    }
}

fn golden_dir() -> PathBuf {
    std::env::var_os(GOLDEN_ENV).map(PathBuf::from).unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("golden"))
}

fn json_string(r: &Report) -> String {
    serde_json::to_string_pretty(&r.json).expect("report serializes") + "\n"
}

fn render(reports: &[Report], format: Format) -> String {
    match format {
        Format::Json if reports.len() == 1 => json_string(&reports[0]),
        Format::Json => {
            let all: Vec<_> = reports.iter().map(|r| r.json.clone()).collect();
            serde_json::to_string_pretty(&all).expect("report serializes") + "\n"
        }
        Format::Text => reports.iter().map(|r| r.text.clone()).collect::<Vec<_>>().join("\n"),
    }
}

fn write(path: &Path, s: &str) -> Result<(), CliError> {
    std::fs::write(path, s).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

/// Compares each report with `<dir>/<id>.json` and `<dir>/<id>.txt`; returns the mismatch count.
fn check(reports: &[Report], dir: &Path) -> usize {
    let mut bad = 0;
    for r in reports {
        let mut ok = true;
        for (ext, got) in [("json", json_string(r)), ("txt", r.text.clone())] {
            let path = dir.join(format!("{}.{ext}", r.id));
            match std::fs::read_to_string(&path) {
                Ok(want) if want == got => {}
                Ok(_) => {
                    println!("MISMATCH {} ({ext})", r.id);
                    ok = false;
                }
                Err(_) => {
                    println!("MISSING {}", path.display());
                    ok = false;
                }
            }
        }
        if ok {
            println!("ok {}", r.id);
        } else {
            bad += 1;
        }
    }
    bad
}

fn bless(reports: &[Report], dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
    for r in reports {
        write(&dir.join(format!("{}.json", r.id)), &json_string(r))?;
        write(&dir.join(format!("{}.txt", r.id)), &r.text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let opts = RunOptions { power: cli.power, window: cli.scan_window, samples: cli.samples };
    let scenarios = match (cli.all, cli.command) {
        (true, None) => registry(),
        (true, Some(_)) => return Err(CliError::Engine("--all takes no subcommand".into())),
        (false, None) => return Err(CliError::Engine("nothing to do; pass a subcommand or --all".into())),
        (false, Some(Command::List)) => {
            for s in registry() {
                let st = s.structure.as_deref().unwrap_or("-");
                println!("{:<24} {:<10} {:<8} {:<5} {}", s.id, s.analysis.name(), s.manifold, st, s.params);
            }
            return Ok(ExitCode::SUCCESS);
        }
        (false, Some(c)) => vec![match c {
            Command::Kod(t) => adhoc(Analysis::Kod, t, None),
            Command::Curvature { target, metric } => adhoc(Analysis::Curvature, target, metric),
            Command::Det(t) => adhoc(Analysis::Det, t, None),
            Command::Verify(t) => adhoc(Analysis::Verify, t, None),
            Command::Twistor(t) => adhoc(Analysis::Twistor, t, None),
            Command::Norden(t) => adhoc(Analysis::Norden, t, None),
            Command::Run { id } => find(&id)?,
            Command::List => unreachable!(),
        }],
    };
    // par_iter keeps registry order, so aggregation is deterministic
    let reports: Vec<Report> = scenarios.par_iter().map(|s| run_scenario(s, &opts)).collect::<Result<_, _>>()?;
    if cli.check {
        let bad = check(&reports, &golden_dir());
        println!("{} scenarios, {bad} mismatched", reports.len());
        return Ok(if bad == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }
    if cli.bless {
        bless(&reports, &golden_dir())?;
        return Ok(ExitCode::SUCCESS);
    }
    let out = render(&reports, cli.format);
    match &cli.out {
        Some(p) => write(p, &out)?,
        None => print!("{out}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
