//! Command-line front end.
//!
//! Exit codes: 0 pass, 1 model mismatch, 2 usage or input error. Every
//! error path writes a single `error: ...` line to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::audit::{self, AuditOptions, AuditReport, BindingSpec, InputsSource, Verdict};
use crate::compare::ToleranceSpec;
use crate::faultlab::{build_consistent_gridbook, inject, FaultSpec};
use crate::grid::{gridbook_to_json, open_workbook, Extent, GridBook, Orientation};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "gridaudit",
    version,
    about = "Check spreadsheet models against a trusted oracle and pinpoint bad cells"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Expand {
    Right,
    Down,
}

#[derive(Debug, clap::Args)]
pub struct TolArgs {
    /// Relative tolerance for bindings without their own
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute tolerance for bindings without their own
    #[arg(long)]
    pub atol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare the terminal output range against the oracle
    Validate {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
        /// Defaults to json when stdout is not a terminal
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Compare every bound node and localize culprit ranges
    Audit {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Print the numbers in a range or defined name, one per line
    Extract {
        #[arg(long)]
        workbook: PathBuf,
        /// A1 reference or defined name
        #[arg(long)]
        range: String,
        /// Read from the top-left cell until the first empty cell
        #[arg(long, value_enum)]
        expand: Option<Expand>,
    },
    /// Inject a fault and write the tampered book as gridbook-JSON
    Faultlab {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        fault: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, stdout_is_tty: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_PASS;
            }
            let rendered = e.to_string();
            let line = rendered
                .lines()
                .next()
                .unwrap_or("error: invalid arguments");
            let _ = writeln!(err, "{}", single_line(line.trim_start_matches("error: ")));
            return EXIT_ERROR;
        }
    };
    let default_format = if stdout_is_tty {
        Format::Text
    } else {
        Format::Json
    };
    match execute(cli.command, default_format, out) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "{}", single_line(&msg));
            EXIT_ERROR
        }
    }
}

fn single_line(msg: &str) -> String {
    let flat: Vec<&str> = msg.split_whitespace().collect();
    format!("error: {}", flat.join(" "))
}

fn execute(command: Command, default_format: Format, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Validate { spec, tol, format } => {
            let (book, spec) = load(&spec)?;
            let opts = options(&tol)?;
            let report = audit::try_validate(&book, &spec, &opts)?;
            match format.unwrap_or(default_format) {
                Format::Json => out.write_all(report.to_json().as_bytes())?,
                Format::Text => writeln!(
                    out,
                    "{}",
                    if report.verdict == Verdict::Pass {
                        "PASS"
                    } else {
                        "FAIL"
                    }
                )?,
            }
            Ok(validate_code(&report))
        }
        Command::Audit { spec, tol, format } => {
            let (book, spec) = load(&spec)?;
            let opts = options(&tol)?;
            let report = audit::try_audit(&book, &spec, &opts)?;
            match format.unwrap_or(default_format) {
                Format::Json => out.write_all(report.to_json().as_bytes())?,
                Format::Text => out.write_all(report.to_text().as_bytes())?,
            }
            Ok(audit_code(&report))
        }
        Command::Extract {
            workbook,
            range,
            expand,
        } => {
            let book = open_workbook(&workbook)?;
            let range = book.resolve_range(&range)?;
            let values = match expand {
                Some(dir) => {
                    let orientation = match dir {
                        Expand::Right => Orientation::Row,
                        Expand::Down => Orientation::Col,
                    };
                    book.read_series(&range.top_left(), orientation, Extent::Expand)?
                }
                None => book.read_range(&range)?,
            };
            for v in values.iter() {
                match writeln!(out, "{v}") {
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => break,
                    r => r?,
                }
            }
            Ok(EXIT_PASS)
        }
        Command::Faultlab {
            spec,
            fault,
            out: path,
        } => {
            let layout = BindingSpec::load(&spec)?;
            let text = std::fs::read_to_string(&fault)
                .map_err(|e| Failure(format!("cannot read {}: {e}", fault.display())))?;
            let fault = FaultSpec::from_json(&text)?;
            let book = match (&layout.workbook, &layout.inputs) {
                (Some(wb), _) => open_workbook(wb)?,
                (None, InputsSource::Inline(inputs)) => build_consistent_gridbook(inputs, &layout)?,
                (None, InputsSource::FromWorkbook(_)) => {
                    return Err(Failure(
                        "a spec without a workbook must carry inline inputs".into(),
                    ))
                }
            };
            let injection = inject(&book, &fault, &layout, &ToleranceSpec::default())?;
            let truth = truth_path(&path);
            write_file(&path, &gridbook_to_json(&injection.book)?)?;
            write_file(&truth, &injection.record.to_json())?;
            writeln!(
                out,
                "{}: {} cells tampered in {} ({}); truth in {}",
                path.display(),
                injection.record.tampered_cells.len(),
                injection.record.node,
                injection.record.error_ranges.join(","),
                truth.display()
            )?;
            Ok(EXIT_PASS)
        }
    }
}

fn load(spec_path: &Path) -> Result<(GridBook, BindingSpec), Failure> {
    let spec = BindingSpec::load(spec_path)?;
    let wb = spec
        .workbook
        .as_ref()
        .ok_or_else(|| Failure(format!("{} names no workbook", spec_path.display())))?;
    Ok((open_workbook(wb)?, spec))
}

fn options(tol: &TolArgs) -> Result<AuditOptions, Failure> {
    let d = ToleranceSpec::default();
    Ok(AuditOptions {
        tolerance: ToleranceSpec::new(tol.rtol.unwrap_or(d.rtol), tol.atol.unwrap_or(d.atol))?,
    })
}

/// `case.json` -> `case.truth.json`.
pub fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure(format!("cannot write {}: {e}", path.display())))
}

pub fn validate_code(report: &AuditReport) -> i32 {
    match report.verdict {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_MISMATCH,
        Verdict::Error => EXIT_ERROR,
    }
}

/// Culprits count as a mismatch even when the terminal range happens to pass.
pub fn audit_code(report: &AuditReport) -> i32 {
    match report.verdict {
        Verdict::Error => EXIT_ERROR,
        Verdict::Fail => EXIT_MISMATCH,
        Verdict::Pass if !report.culprits.is_empty() => EXIT_MISMATCH,
        Verdict::Pass => EXIT_PASS,
    }
}
