mod report;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wgklm_core::analysis::{averaged_fidelity_with, sweep, AveragingOptions, SweepKind, SweepOptions};
use wgklm_core::netlist;
use wgklm_core::{
    build, run_circuit, run_protocol, scatter_coeffs, BroadeningModel, DetectorId, EmitterParams, Error, FidelityMode,
    Method, ProtocolKind, ProtocolParams, ProtocolRun, Purcell,
};

// Closed pipes (`wgklm run | head`) are not an error.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

use report::{FidelityReport, Meta, MethodRecord, Parameters, RunReport, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "wgklm", version, about = "Heralded KLM-state generation in waveguide QED")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reflection and transmission coefficients of one emitter.
    #[command(allow_negative_numbers = true)]
    Coeffs {
        #[command(flatten)]
        emitter: EmitterFlags,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Simulate a built-in protocol.
    #[command(allow_negative_numbers = true)]
    Run {
        #[arg(long, default_value = "klm2")]
        protocol: ProtocolKind,
        /// Emitter count for klmN.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        params: RunFlags,
    },
    /// Regenerate a figure's curves as CSV (and optionally SVG).
    #[command(allow_negative_numbers = true)]
    Sweep {
        kind: SweepKind,
        /// Explicit comma-separated grid.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', conflicts_with_all = ["start", "stop", "points"])]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an SVG chart here.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        method: MethodFlags,
    },
    /// Fidelity averaged over Gaussian inhomogeneous broadening.
    #[command(allow_negative_numbers = true)]
    Fidelity {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[command(flatten)]
        emitter: EmitterFlags,
        /// Standard deviation σ/γ_1D of the per-emitter offsets.
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[command(flatten)]
        method: MethodFlags,
        /// Report one detector's fidelity instead of the herald-weighted mean.
        #[arg(long, value_name = "DETECTOR")]
        per_detector: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Execute a `.wgq` netlist.
    #[command(allow_negative_numbers = true)]
    Exec {
        path: PathBuf,
        #[command(flatten)]
        params: RunFlags,
    },
    /// Print a built-in protocol circuit as a `.wgq` netlist.
    Export {
        #[arg(long, default_value = "klm2")]
        protocol: ProtocolKind,
        #[arg(long)]
        n: Option<usize>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant suite.
    Verify {
        /// Only run checks whose name contains this text.
        #[arg(long)]
        filter: Option<String>,
    },
}

#[derive(Args, Clone)]
struct EmitterFlags {
    /// Purcell factor P = γ_1D/γ' (`ideal` for P → ∞).
    #[arg(long, default_value = "100")]
    purcell: Purcell,
    /// Detuning Δ/γ_1D.
    #[arg(long, default_value_t = 0.0)]
    detuning: f64,
}

impl EmitterFlags {
    fn params(&self) -> EmitterParams {
        EmitterParams::new(self.purcell, self.detuning)
    }
}

#[derive(Args, Clone)]
struct RunFlags {
    #[command(flatten)]
    emitter: EmitterFlags,
    /// Per-emitter offsets δ_i/γ_1D, comma separated.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    offsets: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Clone)]
struct MethodFlags {
    #[arg(long, value_enum, default_value_t = MethodName::Gh)]
    method: MethodName,
    /// Gauss–Hermite order per dimension.
    #[arg(long, default_value_t = 20)]
    order: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl MethodFlags {
    fn method(&self) -> Method {
        match self.method {
            MethodName::Gh => Method::GaussHermite { order: self.order },
            MethodName::Mc => Method::MonteCarlo {
                samples: self.samples,
                seed: self.seed,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodName {
    Gh,
    Mc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Flags(String),
    Parse(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Flags(_) => 2,
            Failure::Parse(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Flags(m) | Failure::Parse(m) | Failure::Invariant(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) => Failure::Parse(e.to_string()),
            Error::InvalidParameter(_) | Error::QuadratureBudget { .. } => Failure::Flags(e.to_string()),
            _ => Failure::Invariant(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn print_json<T: serde::Serialize>(value: &T) {
    outln!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn meta(started: Instant) -> Meta {
    Meta {
        invocation: std::env::args().collect(),
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

fn emit_run(run: &ProtocolRun, flags: &RunFlags, started: Instant) -> Result<(), Failure> {
    let total = run.success_probability() + run.sink_total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Failure::Invariant(format!(
            "detector and sink probabilities sum to {total}, not 1"
        )));
    }
    let parameters = Parameters::new(&flags.emitter.params(), &flags.offsets);
    let report = RunReport::new(run, parameters, meta(started));
    match flags.format {
        Format::Json => print_json(&report),
        Format::Csv => out!("{}", report.to_csv()),
        Format::Text => out!("{}", report.to_text()),
    }
    Ok(())
}

fn cmd_coeffs(emitter: &EmitterFlags, format: Format) -> Result<(), Failure> {
    let params = emitter.params();
    let c = scatter_coeffs(&params)?;
    match format {
        Format::Json => print_json(&serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "purcell": report::PurcellValue::from(params.purcell),
            "detuning": params.detuning,
            "r": { "re": c.r.re, "im": c.r.im },
            "t": { "re": c.t.re, "im": c.t.im },
            "r_abs2": c.r.norm_sqr(),
            "t_abs2": c.t.norm_sqr(),
            "loss": c.loss(),
        })),
        Format::Csv => {
            outln!("purcell,detuning,r_re,r_im,t_re,t_im,r_abs2,t_abs2,loss");
            outln!(
                "{},{},{},{},{},{},{},{},{}",
                params.purcell,
                params.detuning,
                c.r.re,
                c.r.im,
                c.t.re,
                c.t.im,
                c.r.norm_sqr(),
                c.t.norm_sqr(),
                c.loss()
            );
        }
        Format::Text => {
            outln!("P = {}, d = {}", params.purcell, params.detuning);
            // adding 0.0 turns −0 into +0
            outln!("r     = {:+.9} {:+.9}i", c.r.re + 0.0, c.r.im + 0.0);
            outln!("t     = {:+.9} {:+.9}i", c.t.re + 0.0, c.t.im + 0.0);
            outln!("|r|^2 = {:.9}", c.r.norm_sqr());
            outln!("|t|^2 = {:.9}", c.t.norm_sqr());
            outln!("loss  = {:.9}", c.loss());
        }
    }
    Ok(())
}

fn protocol_size(protocol: ProtocolKind, n: Option<usize>) -> Result<usize, Failure> {
    Ok(match (protocol, n) {
        (ProtocolKind::TwoQubit, None | Some(2)) => 2,
        (ProtocolKind::ThreeQubit, None | Some(3)) => 3,
        (ProtocolKind::General, Some(n)) => n,
        (ProtocolKind::General, None) => return Err(Failure::Flags("--protocol klmN needs --n".into())),
        (kind, Some(n)) => {
            return Err(Failure::Flags(format!(
                "{} is fixed to its own N, got --n {n}",
                kind.name()
            )))
        }
    })
}

fn cmd_run(protocol: ProtocolKind, n: Option<usize>, flags: &RunFlags, started: Instant) -> Result<(), Failure> {
    let n = protocol_size(protocol, n)?;
    let params = ProtocolParams::new(n, flags.emitter.params()).with_offsets(flags.offsets.clone());
    params.validate()?;
    let run = run_protocol(&params, protocol)?;
    emit_run(&run, flags, started)
}

fn cmd_export(protocol: ProtocolKind, n: Option<usize>, out: Option<&Path>) -> Result<(), Failure> {
    let n = protocol_size(protocol, n)?;
    let circuit = build(protocol, &ProtocolParams::new(n, EmitterParams::ideal()))?;
    let text = netlist::serialize(&circuit);
    match out {
        Some(path) => write_output(path, &text),
        None => {
            out!("{text}");
            Ok(())
        }
    }
}

fn cmd_exec(path: &Path, flags: &RunFlags, started: Instant) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let circuit = netlist::parse(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let nominal = flags.emitter.params();
    nominal.validate()?;
    if !flags.offsets.is_empty() && flags.offsets.len() != circuit.n_emitters {
        return Err(Failure::Flags(format!(
            "{} offsets given for {} emitters",
            flags.offsets.len(),
            circuit.n_emitters
        )));
    }
    let env = wgklm_core::Environment::with_offsets(nominal, flags.offsets.clone());
    let run = run_circuit(&circuit, &env)?;
    emit_run(&run, flags, started)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    kind: SweepKind,
    grid: Option<Vec<f64>>,
    start: Option<f64>,
    stop: Option<f64>,
    points: Option<usize>,
    out: Option<&Path>,
    svg: Option<&Path>,
    method: &MethodFlags,
) -> Result<(), Failure> {
    let grid = match grid {
        Some(g) => g,
        None if start.is_none() && stop.is_none() && points.is_none() => kind.default_grid(),
        None => {
            let default = kind.default_grid();
            wgklm_core::analysis::linspace(
                start.unwrap_or(default[0]),
                stop.unwrap_or(*default.last().unwrap()),
                points.unwrap_or(default.len()),
            )
        }
    };
    let options = SweepOptions {
        method: method.method(),
        ..SweepOptions::default()
    };
    let result = sweep(kind, &grid, &options)?;
    let csv = result.to_csv();
    match out {
        Some(path) => write_output(path, &csv)?,
        None => out!("{csv}"),
    }
    if let Some(path) = svg {
        write_output(path, &result.to_svg())?;
    }
    Ok(())
}

fn cmd_fidelity(
    n: usize,
    emitter: &EmitterFlags,
    sigma: f64,
    method: &MethodFlags,
    per_detector: Option<&str>,
    format: Format,
    started: Instant,
) -> Result<(), Failure> {
    let nominal = emitter.params();
    let model = BroadeningModel {
        sigma,
        method: method.method(),
    };
    let options = AveragingOptions {
        mode: per_detector.map_or(FidelityMode::HeraldWeighted, |d| {
            FidelityMode::Detector(DetectorId::new(d))
        }),
        ..AveragingOptions::default()
    };
    let result = averaged_fidelity_with(n, &nominal, &model, &options)?;
    let report = FidelityReport {
        schema_version: SCHEMA_VERSION,
        n,
        parameters: Parameters::new(&nominal, &[]),
        sigma,
        method: match model.method {
            Method::GaussHermite { order } => MethodRecord::GaussHermite { order },
            Method::MonteCarlo { samples, seed } => MethodRecord::MonteCarlo { samples, seed },
        },
        mode: per_detector.unwrap_or("herald-weighted").to_string(),
        mean: result.mean,
        std_error: result.std_error,
        evaluations: result.evaluations,
        meta: meta(started),
    };
    match format {
        Format::Json => print_json(&report),
        Format::Csv => {
            outln!("n,sigma,mode,mean,std_error,evaluations");
            outln!(
                "{},{},{},{},{},{}",
                n,
                sigma,
                report.mode,
                report.mean,
                report.std_error.map_or(String::new(), |s| s.to_string()),
                report.evaluations
            );
        }
        Format::Text => out!("{}", report.to_text()),
    }
    Ok(())
}

fn cmd_verify(filter: Option<&str>) -> Result<(), Failure> {
    let mut failed = 0;
    let mut ran = 0;
    for check in verify::CHECKS {
        if filter.is_some_and(|f| !check.name.contains(f)) {
            continue;
        }
        ran += 1;
        match (check.run)() {
            Ok(()) => outln!("pass  {}", check.name),
            Err(msg) => {
                failed += 1;
                outln!("FAIL  {}: {msg}", check.name);
            }
        }
    }
    if ran == 0 {
        return Err(Failure::Flags(format!("no check matches `{}`", filter.unwrap_or(""))));
    }
    outln!("{} passed, {failed} failed", ran - failed);
    if failed > 0 {
        return Err(Failure::Invariant(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("WGKLM_THREADS") {
        let threads: usize = v
            .parse()
            .map_err(|_| Failure::Flags(format!("WGKLM_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Flags(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let started = Instant::now();
    match cli.command {
        Command::Coeffs { emitter, format } => cmd_coeffs(&emitter, format),
        Command::Run { protocol, n, params } => cmd_run(protocol, n, &params, started),
        Command::Sweep {
            kind,
            grid,
            start,
            stop,
            points,
            out,
            svg,
            method,
        } => cmd_sweep(kind, grid, start, stop, points, out.as_deref(), svg.as_deref(), &method),
        Command::Fidelity {
            n,
            emitter,
            sigma,
            method,
            per_detector,
            format,
        } => cmd_fidelity(n, &emitter, sigma, &method, per_detector.as_deref(), format, started),
        Command::Exec { path, params } => cmd_exec(&path, &params, started),
        Command::Export { protocol, n, out } => cmd_export(protocol, n, out.as_deref()),
        Command::Verify { filter } => cmd_verify(filter.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
