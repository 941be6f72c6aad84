use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fsipp_cli::commands::{self, Overrides};
use fsipp_cli::report::{RunReport, VerdictJson};

#[derive(Parser)]
#[command(name = "fsipp", version, about = "Fractional semi-infinite polynomial programs via moment-SOS relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the case tag and the s.o.s-convexity findings.
    Classify { file: PathBuf },
    /// Run the relaxation hierarchy and certify the candidate.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Write the hierarchy trace as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Feasibility and KKT check of a given point.
    Certify {
        file: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        point: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Epsilon-constraint method for a multi-objective file.
    Pareto {
        file: PathBuf,
        /// Comma-separated initial point (defaults to `u0` in the file).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u0: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
        /// Grid points per axis for the audit and the image-space CSV.
        #[arg(long)]
        grid: Option<usize>,
        /// Bounding box as `lo,hi` per axis, e.g. `--box -1,1 --box -2,2`.
        #[arg(long = "box", allow_hyphen_values = true)]
        bbox: Vec<String>,
        /// Write the image-space grid as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    k_min: Option<u32>,
    #[arg(long)]
    k_max: Option<u32>,
    /// Feasibility and KKT tolerance.
    #[arg(long)]
    tau: Option<f64>,
    /// SDP solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            k_min: self.k_min,
            k_max: self.k_max,
            tau: self.tau,
            tol: self.tol,
            ..Overrides::default()
        }
    }
}

fn parse_box(items: &[String]) -> Result<Option<Vec<(f64, f64)>>> {
    if items.is_empty() {
        return Ok(None);
    }
    let mut out = Vec::new();
    for it in items {
        let parts: Vec<&str> = it.split(',').collect();
        if parts.len() != 2 {
            bail!("--box expects lo,hi, got {it:?}");
        }
        let lo: f64 = parts[0].trim().parse().with_context(|| format!("--box {it:?}"))?;
        let hi: f64 = parts[1].trim().parse().with_context(|| format!("--box {it:?}"))?;
        if !(lo < hi) {
            bail!("--box {it:?}: lower end must be below upper end");
        }
        out.push((lo, hi));
    }
    Ok(Some(out))
}

fn emit(report: &RunReport, out: Option<&Path>) -> Result<()> {
    let text = report.to_json();
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<VerdictJson> {
    match cli.command {
        Command::Classify { file } => {
            for line in commands::classify(&read(&file)?)? {
                println!("{line}");
            }
            Ok(VerdictJson::Inconclusive)
        }
        Command::Solve { file, common, csv } => {
            let text = read(&file)?;
            let report = commands::solve(&text, &common.overrides())
                .unwrap_or_else(|e| RunReport::error("solve", commands::sha256_hex(text.as_bytes()), format!("{e:#}")));
            if let Some(p) = csv {
                commands::trace_csv(&report.trace, fs::File::create(&p)?)?;
            }
            emit(&report, common.out.as_deref())?;
            Ok(report.verdict)
        }
        Command::Certify { file, point, common } => {
            let text = read(&file)?;
            let report = commands::certify(&text, &point, &common.overrides())
                .unwrap_or_else(|e| RunReport::error("certify", commands::sha256_hex(text.as_bytes()), format!("{e:#}")));
            emit(&report, common.out.as_deref())?;
            Ok(report.verdict)
        }
        Command::Pareto {
            file,
            u0,
            common,
            grid,
            bbox,
            csv,
        } => {
            let text = read(&file)?;
            let ov = Overrides {
                grid,
                bbox: parse_box(&bbox)?,
                ..common.overrides()
            };
            let (report, rows, m, t) = match commands::pareto(&text, u0.as_deref(), &ov) {
                Ok(o) => {
                    let file = commands::load(&text)?;
                    let t = file.objectives.as_ref().map_or(0, Vec::len);
                    (o.report, o.grid, file.vars_x, t)
                }
                Err(e) => (
                    RunReport::error("pareto", commands::sha256_hex(text.as_bytes()), format!("{e:#}")),
                    Vec::new(),
                    0,
                    0,
                ),
            };
            if let Some(p) = csv {
                if rows.is_empty() {
                    eprintln!("no grid rows to write (a bounding box is needed)");
                } else {
                    commands::grid_csv(&rows, m, t, fs::File::create(&p)?)?;
                }
            }
            emit(&report, common.out.as_deref())?;
            Ok(report.verdict)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(v) => {
            if v == VerdictJson::Error {
                eprintln!("error: see the report message");
            }
            ExitCode::from(v.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(VerdictJson::Error.exit_code() as u8)
        }
    }
}
