use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::commands::{self, CommandOutput};
use super::{
    generate_instance, parse_instance, write_atomic, HarnessError, EXIT_FINDINGS, EXIT_OK,
    EXIT_USAGE, OUT_DIR_ENV,
};
use crate::audit::AuditMode;
use crate::model::{Mechanism, UserType};

#[derive(Debug, Parser)]
#[command(
    name = "speedscale",
    version,
    about = "Speed-scaling scheduling game: solvers, cost sharing and audits"
)]
struct Cli {
    /// Directory for report files.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MechanismArg {
    Proportional,
    X,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Fixed,
    Reorder,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TypeArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Energy-optimal profile for deadline users.
    SolveA { instance: PathBuf },
    /// Welfare-optimal order and interval lengths for penalty users.
    SolveB { instance: PathBuf },
    /// Cost shares, welfares and budget-balance ratio.
    Shares {
        #[arg(long, value_enum)]
        mechanism: MechanismArg,
        instance: PathBuf,
    },
    /// Best-response audit of every deadline user.
    AuditA { instance: PathBuf },
    /// Best-response and finite-difference audit of every penalty user.
    AuditB {
        #[arg(long, value_enum, default_value = "fixed")]
        mode: ModeArg,
        instance: PathBuf,
    },
    /// Stack algorithm against exhaustive enumeration.
    OracleA { instance: PathBuf },
    /// Brute-force order, Smith's rule, classical reduction and numeric lengths.
    OracleB { instance: PathBuf },
    /// Seeded random instance.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        #[arg(long = "type", value_enum)]
        user_type: TypeArg,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        /// Write here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Solve, charge and audit in one report.
    Report { instance: PathBuf },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into())
}

fn emit(out: &CommandOutput, out_dir: &Path, input: &Path) -> Result<(), HarnessError> {
    let base = format!("{}.{}", stem(input), out.command);
    write_atomic(&out_dir.join(format!("{base}.json")), out.json.as_bytes())?;
    write_atomic(&out_dir.join(format!("{base}.csv")), out.csv.as_bytes())?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{}", out.summary);
    Ok(())
}

type Runner = Box<dyn Fn(&super::LoadedInstance, &str) -> Result<CommandOutput, HarnessError>>;

fn execute(cli: Cli) -> Result<i32, HarnessError> {
    let (input, run): (PathBuf, Runner) = match cli.command {
        Command::Gen {
            seed,
            n,
            user_type,
            alpha,
            output,
        } => {
            let t = match user_type {
                TypeArg::A => UserType::A,
                TypeArg::B => UserType::B,
            };
            let file = generate_instance(seed, n as usize, t, alpha)?;
            let text = file.to_json();
            match output {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => {
                    let _ = std::io::stdout().lock().write_all(text.as_bytes());
                }
            }
            return Ok(EXIT_OK);
        }
        Command::SolveA { instance } => (instance, Box::new(commands::solve_a)),
        Command::SolveB { instance } => (instance, Box::new(commands::solve_b)),
        Command::Shares {
            mechanism,
            instance,
        } => {
            let m = match mechanism {
                MechanismArg::Proportional => Mechanism::Proportional,
                MechanismArg::X => Mechanism::X,
            };
            (instance, Box::new(move |l, i| commands::shares(l, i, m)))
        }
        Command::AuditA { instance } => (instance, Box::new(commands::audit_a)),
        Command::AuditB { mode, instance } => {
            let m = match mode {
                ModeArg::Fixed => AuditMode::Fixed,
                ModeArg::Reorder => AuditMode::Reorder,
            };
            (instance, Box::new(move |l, i| commands::audit_b(l, i, m)))
        }
        Command::OracleA { instance } => (instance, Box::new(commands::oracle_a)),
        Command::OracleB { instance } => (instance, Box::new(commands::oracle_b)),
        Command::Report { instance } => (instance, Box::new(commands::report)),
    };
    let loaded = parse_instance(&input)?;
    let name = input
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let out = run(&loaded, &name)?;
    emit(&out, &cli.out_dir, &input)?;
    Ok(if out.findings { EXIT_FINDINGS } else { EXIT_OK })
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 clean, 1 findings, 2 usage or I/O errors.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
