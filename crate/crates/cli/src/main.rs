use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use netgrad::{
    export_netlist, run_scenario, run_suite, Error, FormChoice, NetlistChoice, NetlistFormat, RunOptions, Scenario,
    VerificationReport,
};

const EXIT_FAIL: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;

#[derive(Parser)]
#[command(name = "netgrad", version, about = "Simulate and verify detailed-balance network dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    X,
    Q,
    Both,
}

impl From<FormArg> for FormChoice {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::X => FormChoice::X,
            FormArg::Q => FormChoice::Q,
            FormArg::Both => FormChoice::Both,
        }
    }
}

#[derive(clap::Args)]
struct RunFlags {
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Which form(s) to integrate; `both` enables the equivalence check
    #[arg(long, value_enum)]
    form: Option<FormArg>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
}

impl RunFlags {
    fn options(&self) -> RunOptions {
        RunOptions {
            form: self.form.map(Into::into),
            dt: self.dt,
            horizon: self.horizon,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its trace, report and optional netlist
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Also write the synthesized circuit at the initial state
        #[arg(long)]
        emit_netlist: bool,
    },
    /// Run all checks on a scenario and write the report only
    Verify {
        scenario: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Verify every built-in scenario
    Suite {
        /// Only scenarios whose name contains this string
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Schema(_) | Error::Io(_) | Error::InvalidConfig(_) | Error::DimensionMismatch { .. } => EXIT_SCHEMA,
            e if e.is_precondition() => EXIT_PRECONDITION,
            Error::DomainViolation { .. } | Error::InconsistentEnergy(_) => EXIT_PRECONDITION,
            _ => EXIT_FAIL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_SCHEMA,
        message: format!("{}: {e}", path.display()),
    }
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_failure(dir, e))?;
    tmp.write_all(contents).map_err(|e| io_failure(path, e))?;
    tmp.persist(path).map_err(|e| io_failure(path, e.error))?;
    println!("{}", path.display());
    Ok(())
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Ok(Scenario::from_json(&text)?)
}

fn verdict_exit(report: &VerificationReport) -> Result<(), Failure> {
    if report.pass {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_FAIL,
            message: format!("{}: failed checks: {}", report.scenario, report.failures().join(", ")),
        })
    }
}

fn run(path: &Path, flags: &RunFlags, emit_netlist: bool, trace: bool) -> Result<(), Failure> {
    let scn = load(path)?;
    fs::create_dir_all(&flags.out).map_err(|e| io_failure(&flags.out, e))?;
    let result = run_scenario(&scn, &flags.options())?;
    let file = |ext: &str| flags.out.join(format!("{}.{ext}", scn.name));

    if trace {
        let rec = result.primary();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf, &[("debruijn", result.debruijn.column(rec))])?;
        write_atomic(&file("csv"), &buf)?;
    }
    let wants_netlist = emit_netlist || scn.outputs.as_ref().is_some_and(|o| o.netlist.is_some());
    if trace && wants_netlist {
        let choice = scn.outputs.as_ref().and_then(|o| o.netlist).unwrap_or(NetlistChoice::Spice);
        let (format, ext) = match choice {
            NetlistChoice::Spice => (NetlistFormat::Spice, "cir"),
            NetlistChoice::Json => (NetlistFormat::Json, "netlist.json"),
        };
        let x0 = &result.primary().xs[0];
        let text = export_netlist(&result.system, x0, format)?;
        write_atomic(&file(ext), text.as_bytes())?;
    }
    write_atomic(&file("report.json"), result.report.to_json().as_bytes())?;
    for w in &result.report.warnings {
        eprintln!("warning: {}: {w}", scn.name);
    }
    verdict_exit(&result.report)
}

fn suite(filter: Option<&str>, out: &Path) -> Result<(), Failure> {
    let entries = run_suite(filter);
    if entries.is_empty() {
        return Err(Failure {
            code: EXIT_SCHEMA,
            message: "no scenarios matched".into(),
        });
    }
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let mut summary = Vec::new();
    let mut failed = Vec::new();
    for e in &entries {
        match &e.outcome {
            Ok(report) => {
                write_atomic(&out.join(format!("{}.report.json", e.name)), report.to_json().as_bytes())?;
                if !report.pass {
                    eprintln!("FAIL {}: {}", e.name, report.failures().join(", "));
                    failed.push(e.name.clone());
                }
                summary.push(serde_json::json!({ "scenario": e.name, "pass": report.pass, "error": null }));
            }
            Err(err) => {
                eprintln!("FAIL {}: {err}", e.name);
                failed.push(e.name.clone());
                summary.push(serde_json::json!({ "scenario": e.name, "pass": false, "error": err.to_string() }));
            }
        }
    }
    let doc = serde_json::json!({ "scenarios": summary, "pass": failed.is_empty() });
    let text = serde_json::to_string_pretty(&doc).expect("summary serializes");
    write_atomic(&out.join("suite.json"), text.as_bytes())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_FAIL,
            message: format!("{} of {} scenarios failed", failed.len(), entries.len()),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            flags,
            emit_netlist,
        } => run(scenario, flags, *emit_netlist, true),
        Command::Verify { scenario, flags } => run(scenario, flags, false, false),
        Command::Suite { filter, out } => suite(filter.as_deref(), out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
