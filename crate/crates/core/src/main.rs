use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qhfocus::cycles::{Backend, DisplacementOptions, ScanOptions};
use qhfocus::focal::{FocalOptions, DEFAULT_ZERO_TOL};
use qhfocus::report::{self, Command, FamilyKind, FamilySpec, Outcome, Source};
use qhfocus::Precision;

#[derive(Parser)]
#[command(name = "qhfocus", version, about = "Focal values and limit cycles of p:q quasi-homogeneous planar fields")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write plot data (h, Delta) as CSV.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Double,
    Extended,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Extended => Precision::Extended,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Eq325,
    Eq327,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Polar,
    Cartesian,
}

#[derive(Args)]
struct SourceArgs {
    /// System file (`p`, `q`, `x k j c`, `y k j c` lines).
    #[arg(long, conflicts_with = "family", required_unless_present = "family")]
    system: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Family parameters as `k=v,k=v`.
    #[arg(long, default_value = "")]
    params: String,
}

#[derive(Args)]
struct FocalArgs {
    /// Jet order K.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    zero_tol: f64,
    #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
    precision: PrecisionArg,
}

#[derive(Subcommand)]
enum Cmd {
    /// Focal values of a system.
    Analyze {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        focal: FocalArgs,
    },
    /// Scan the displacement for limit cycles.
    Cycles {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, value_enum, default_value_t = BackendArg::Polar)]
        backend: BackendArg,
        #[arg(long, default_value_t = 1e-3)]
        h_min: f64,
        #[arg(long, default_value_t = 0.3)]
        h_max: f64,
        #[arg(long, default_value_t = 48)]
        grid: usize,
        /// Integrator tolerance.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Relative bisection tolerance on h*.
        #[arg(long, default_value_t = 1e-13)]
        root_tol: f64,
        #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
        precision: PrecisionArg,
    },
    /// Table of the case-study claims.
    Verify {
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Case-study integrals by two quadrature schemes.
    Quad {
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
    },
    /// Focal values differentiated with respect to family parameters.
    Jacobian {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value = "")]
        params: String,
        /// Comma-separated focal indices.
        #[arg(long, value_delimiter = ',', required = true)]
        indices: Vec<usize>,
        #[command(flatten)]
        focal: FocalArgs,
    },
    /// First nonzero focal index over random fields.
    Survey {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        q: u32,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// ChaCha8 seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        focal: FocalArgs,
    },
}

fn family_kind(f: FamilyArg) -> FamilyKind {
    match f {
        FamilyArg::Eq325 => FamilyKind::Eq325,
        FamilyArg::Eq327 => FamilyKind::Eq327,
    }
}

fn source(args: SourceArgs) -> qhfocus::Result<Source> {
    match (args.system, args.family) {
        (Some(path), _) => Ok(Source::File(path)),
        (None, Some(f)) => Ok(Source::Family(FamilySpec::parse(family_kind(f), &args.params)?)),
        (None, None) => Err(qhfocus::Error::Precondition("either --system or --family is required".into())),
    }
}

fn positive(name: &str, v: f64) -> qhfocus::Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(qhfocus::Error::Precondition(format!("--{name} must be positive, got {v}")))
    }
}

fn focal(args: &FocalArgs) -> qhfocus::Result<FocalOptions> {
    Ok(FocalOptions {
        order: args.order,
        tol: positive("tol", args.tol)?,
        zero_tol: positive("zero-tol", args.zero_tol)?,
        precision: args.precision.into(),
    })
}

fn command(cmd: Cmd) -> qhfocus::Result<Command> {
    Ok(match cmd {
        Cmd::Analyze { source: s, focal: f } => Command::Analyze { source: source(s)?, focal: focal(&f)? },
        Cmd::Cycles { source: s, backend, h_min, h_max, grid, tol, root_tol, precision } => Command::Cycles {
            source: source(s)?,
            backend: match backend {
                BackendArg::Polar => Backend::Polar,
                BackendArg::Cartesian => Backend::Cartesian,
            },
            scan: ScanOptions {
                h_min,
                h_max,
                grid,
                tol: positive("root-tol", root_tol)?,
                displacement: DisplacementOptions {
                    tol: positive("tol", tol)?,
                    precision: precision.into(),
                    ..Default::default()
                },
                ..Default::default()
            },
        },
        Cmd::Verify { tol } => Command::Verify { tol: positive("tol", tol)? },
        Cmd::Quad { tol } => Command::Quad { tol: positive("tol", tol)? },
        Cmd::Jacobian { family, params, indices, focal: f } => Command::Jacobian {
            family: FamilySpec::parse(family_kind(family), &params)?,
            indices,
            focal: focal(&f)?,
        },
        Cmd::Survey { p, q, samples, seed, focal: f } => Command::Survey { p, q, samples, seed, focal: focal(&f)? },
    })
}

fn emit(outcome: &Outcome, output: &OutputArgs) -> qhfocus::Result<()> {
    let body = match output.format {
        Format::Text => outcome.text.clone(),
        Format::Json => serde_json::to_string_pretty(&outcome.json).expect("report serializes") + "\n",
    };
    match &output.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    if let (Some(path), Some(csv)) = (&output.csv, &outcome.csv) {
        std::fs::write(path, csv)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = command(cli.command).and_then(|c| report::run(&c)).and_then(|o| emit(&o, &cli.output).map(|_| o));
    match result {
        Ok(o) => ExitCode::from(o.status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(report::error_code(&e) as u8)
        }
    }
}
