//! Command-line front end.
//!
//! Subcommands: `new`, `read`, `write`, `matvec`, `lstsq`, `verify`, `reach`.
//! Results go to stdout as JSON; human diagnostics go to stderr. Exit codes:
//! 0 ok, 2 validation, 3 convergence-certificate violation, 4 unrealizable
//! target, 5 I/O. `MEMGRID_TRACE_DIR` supplies the default directory for
//! relative trace paths.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use crate::applications::{least_squares, matvec};
use crate::devices::MemductanceModel;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_terminal_trace, write_write_trace, ArrayFile, TraceRow};
use crate::network::{advance, terminal_currents, CrossbarState};
use crate::protocols::{
    read_array, read_signal, reachable_without_switches, write_array, ReadSchedule, WriteConfig,
    WriteMode,
};

#[derive(Parser)]
#[command(name = "memgrid", about = "Memristive crossbar array simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an array file.
    New {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// Device model, e.g. "sigmoid:1,3,1" or "affine:1,0.5,0,4".
        #[arg(long)]
        model: String,
        /// Initial memductances as a JSON matrix (rows of columns).
        #[arg(long, allow_hyphen_values = true)]
        w: Option<String>,
        /// Initial fluxes as a flat JSON array, column-major.
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<String>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Read the memductance matrix; the flux is restored afterwards.
    Read {
        array: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        tau: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        amplitude: f64,
        /// Write a terminal trace CSV to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Steer every memductance to a target matrix and update the file.
    Write {
        array: PathBuf,
        /// Target memductances as a JSON matrix (rows of columns).
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "T")]
        period: f64,
        #[arg(long = "eps", default_value_t = 1e-3)]
        epsilon: f64,
        /// "sequential" or "diagonal".
        #[arg(long, default_value = "sequential")]
        mode: String,
        /// Directory receiving one per-cell trace CSV each.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Analog matrix-vector product; leaves the file's flux unchanged.
    Matvec {
        array: PathBuf,
        /// Input vector as a JSON array.
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        #[arg(long, default_value_t = 0.25)]
        tau: f64,
        /// Pulse center; defaults to 2 tau.
        #[arg(long)]
        s: Option<f64>,
    },
    /// Analog least squares: min-norm minimizer of ||W^T y + c||.
    Lstsq {
        array: PathBuf,
        /// Injected column currents as a JSON array.
        #[arg(long, allow_hyphen_values = true)]
        c: String,
    },
    /// Audit the model assumptions on a flux grid.
    #[command(allow_negative_numbers = true)]
    Verify {
        /// Device model, e.g. "sigmoid:1,3,1".
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = -10.0)]
        lo: f64,
        #[arg(long, default_value_t = 10.0)]
        hi: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
    },
    /// Check whether a flux target is reachable with all switches closed.
    Reach {
        array: PathBuf,
        /// Target flux as a flat JSON array, column-major.
        #[arg(long, allow_hyphen_values = true)]
        phi_target: String,
    },
}

/// Runs the CLI against `args` (including the program name), writing JSON
/// results to `out`. Returns the process exit code.
pub fn run(args: &[String], out: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output
            if e.use_stderr() {
                let _ = write!(std::io::stderr(), "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    let started = Instant::now();
    let name = command_name(&cli.command);
    match dispatch(cli.command, out) {
        Ok(()) => {
            eprintln!("memgrid {name}: ok in {:.3}s", started.elapsed().as_secs_f64());
            0
        }
        Err(err) => {
            eprintln!("memgrid {name}: error: {err}");
            // `new` has no runnable protocol yet; everything it rejects is
            // input validation
            if name == "new" && matches!(err, Error::Range { .. }) {
                2
            } else {
                exit_code(&err)
            }
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::New { .. } => "new",
        Command::Read { .. } => "read",
        Command::Write { .. } => "write",
        Command::Matvec { .. } => "matvec",
        Command::Lstsq { .. } => "lstsq",
        Command::Verify { .. } => "verify",
        Command::Reach { .. } => "reach",
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Gain { .. } => 3,
        Error::Range { .. } => 4,
        Error::Io(_) => 5,
        _ => 2,
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::New { m, n, model, w, phi, out: path } => cmd_new(m, n, &model, w, phi, &path),
        Command::Read { array, tau, amplitude, trace } => {
            cmd_read(&array, tau, amplitude, trace, out)
        }
        Command::Write { array, target, alpha, period, epsilon, mode, trace_dir } => {
            cmd_write(&array, &target, alpha, period, epsilon, &mode, trace_dir, out)
        }
        Command::Matvec { array, b, tau, s } => cmd_matvec(&array, &b, tau, s, out),
        Command::Lstsq { array, c } => cmd_lstsq(&array, &c, out),
        Command::Verify { model, lo, hi, points } => cmd_verify(&model, lo, hi, points, out),
        Command::Reach { array, phi_target } => cmd_reach(&array, &phi_target, out),
    }
}

/// Parses "sigmoid:w_min,w_max,c" or "affine:a0,a1,phi_lo,phi_hi".
pub fn parse_model(spec: &str) -> Result<MemductanceModel> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::Model(format!("model spec {spec:?} must be kind:params")))?;
    let params: Vec<f64> = rest
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Model(format!("bad model parameter {p:?}")))
        })
        .collect::<Result<_>>()?;
    match (kind, params.as_slice()) {
        ("sigmoid", [w_min, w_max, c]) => MemductanceModel::sigmoid(*w_min, *w_max, *c),
        ("affine", [a0, a1, lo, hi]) => MemductanceModel::affine(*a0, *a1, *lo, *hi),
        _ => Err(Error::Model(format!(
            "model spec {spec:?} needs sigmoid:w_min,w_max,c or affine:a0,a1,phi_lo,phi_hi"
        ))),
    }
}

fn parse_vector(text: &str, what: &'static str) -> Result<Vec<f64>> {
    serde_json::from_str(text).map_err(|e| Error::Model(format!("bad {what} JSON: {e}")))
}

/// Parses a row-major JSON matrix and checks it is m by n.
fn parse_matrix(text: &str, m: usize, n: usize) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(text).map_err(|e| Error::Model(format!("bad matrix JSON: {e}")))?;
    if rows.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension {
            what: "matrix",
            expected: m * n,
            got: rows.iter().map(Vec::len).sum(),
        });
    }
    let mut out = DMatrix::zeros(m, n);
    for (k, row) in rows.iter().enumerate() {
        for (l, &v) in row.iter().enumerate() {
            out[(k, l)] = v;
        }
    }
    Ok(out)
}

fn json_vector(v: &[f64]) -> String {
    let body: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", body.join(","))
}

fn json_matrix(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|k| json_vector(&(0..m.ncols()).map(|l| m[(k, l)]).collect::<Vec<_>>()))
        .collect();
    format!("[{}]", rows.join(","))
}

fn resolve_trace_path(path: PathBuf) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var("MEMGRID_TRACE_DIR") {
            return Path::new(&dir).join(path);
        }
    }
    path
}

fn cmd_new(
    m: usize,
    n: usize,
    model_spec: &str,
    w: Option<String>,
    phi: Option<String>,
    path: &Path,
) -> Result<()> {
    let model = parse_model(model_spec)?;
    let phi = match (w, phi) {
        (Some(w_text), None) => {
            let targets = parse_matrix(&w_text, m, n)?;
            let mut phi = vec![0.0; m * n];
            for l in 0..n {
                for k in 0..m {
                    phi[k + m * l] =
                        model.flux_from_memductance(targets[(k, l)]).map_err(|e| match e {
                            Error::Range { value, lo, hi, scale_hint, .. } => {
                                Error::Range { value, lo, hi, cell: Some((k, l)), scale_hint }
                            }
                            other => other,
                        })?;
                }
            }
            phi
        }
        (None, Some(phi_text)) => {
            let phi = parse_vector(&phi_text, "phi")?;
            if phi.len() != m * n {
                return Err(Error::Dimension { what: "phi", expected: m * n, got: phi.len() });
            }
            phi
        }
        _ => {
            return Err(Error::Model(
                "exactly one of --w (memductances) or --phi (fluxes) is required".into(),
            ))
        }
    };
    let state = CrossbarState::uniform(m, n, model, phi)?;
    ArrayFile::from_state(&state).save(path)
}

fn cmd_read(
    array: &Path,
    tau: f64,
    amplitude: f64,
    trace: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<()> {
    let file = ArrayFile::load(array)?;
    let state = file.to_state()?;
    let schedule = ReadSchedule::new(state.cols(), tau, amplitude, None)?;
    let (w_hat, after) = read_array(&state, &schedule)?;

    let drift = state
        .phi()
        .iter()
        .zip(after.phi())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    if drift > 1e-12 {
        eprintln!("warning: flux drifted by {drift:e} during the read");
    } else {
        eprintln!("flux restored (max drift {drift:e})");
    }

    if let Some(trace_path) = trace {
        let trace_path = resolve_trace_path(trace_path);
        let rows = sample_signal_trace(&state, &schedule)?;
        write_terminal_trace(&trace_path, &rows, state.rows(), state.cols())?;
        eprintln!("trace written to {}", trace_path.display());
    }

    writeln!(out, "{}", json_matrix(&w_hat)).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn sample_signal_trace(state: &CrossbarState, schedule: &ReadSchedule) -> Result<Vec<TraceRow>> {
    let signal = read_signal(schedule, state.rows())?;
    let mut rows = Vec::new();
    let mut st = state.clone();
    let mut t = 0.0;
    let mut sample_points: Vec<f64> = signal.breakpoints();
    for &t_l in schedule.times() {
        sample_points.push(t_l);
    }
    sample_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sample_points.dedup();
    for point in sample_points {
        st = advance(&st, &signal, t, point)?;
        t = point;
        let seg = signal.value_at(point).ok_or(Error::SignalGap { from: point, to: point })?;
        let currents = terminal_currents(&st, &seg.potentials)?;
        rows.push(TraceRow {
            time: point,
            p_a: seg.potentials.p_a.clone(),
            p_b: seg.potentials.p_b.clone(),
            j_a: currents.j_a,
            j_b: currents.j_b,
            phi: None,
        });
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn cmd_write(
    array: &Path,
    target: &str,
    alpha: f64,
    period: f64,
    epsilon: f64,
    mode: &str,
    trace_dir: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut file = ArrayFile::load(array)?;
    let state = file.to_state()?;
    let targets = parse_matrix(target, state.rows(), state.cols())?;
    let mode = match mode {
        "sequential" => WriteMode::Sequential,
        "diagonal" => WriteMode::Diagonal,
        other => return Err(Error::Model(format!("unknown write mode {other:?}"))),
    };
    let mut cfg = WriteConfig::new(alpha, period);
    cfg.epsilon = epsilon;
    let (after, traces) = write_array(&state, &targets, &cfg, mode)?;

    file.update_from_state(&after);
    file.save(array)?;

    let mut iterations = DMatrix::zeros(state.rows(), state.cols());
    let mut stop_times = DMatrix::zeros(state.rows(), state.cols());
    for trace in &traces {
        let (k, l) = trace.cell;
        iterations[(k, l)] = trace.iterations() as f64;
        stop_times[(k, l)] = trace.stop_time;
    }
    if let Some(dir) = trace_dir {
        let dir = resolve_trace_path(dir);
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        for trace in &traces {
            let (k, l) = trace.cell;
            write_write_trace(&dir.join(format!("cell_{k}_{l}.csv")), trace)?;
        }
        eprintln!("per-cell traces written to {}", dir.display());
    }
    writeln!(
        out,
        "{{\"iterations\":{},\"stop_times\":{}}}",
        json_matrix(&iterations),
        json_matrix(&stop_times)
    )
    .map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn cmd_matvec(
    array: &Path,
    b: &str,
    tau: f64,
    s: Option<f64>,
    out: &mut dyn Write,
) -> Result<()> {
    let file = ArrayFile::load(array)?;
    let state = file.to_state()?;
    let b = parse_vector(b, "b")?;
    let s = s.unwrap_or(2.0 * tau);
    let (c, after) = matvec(&state, &b, tau, s)?;
    let drift = state
        .phi()
        .iter()
        .zip(after.phi())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    eprintln!("flux restored (max drift {drift:e})");
    writeln!(out, "{}", json_vector(&c)).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn cmd_lstsq(array: &Path, c: &str, out: &mut dyn Write) -> Result<()> {
    let file = ArrayFile::load(array)?;
    let state = file.to_state()?;
    let c = parse_vector(c, "c")?;
    let y = least_squares(&state, &c)?;
    writeln!(out, "{}", json_vector(&y)).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn cmd_verify(
    model_spec: &str,
    lo: f64,
    hi: f64,
    points: usize,
    out: &mut dyn Write,
) -> Result<()> {
    let model = parse_model(model_spec)?;
    let (dom_lo, dom_hi) = model.domain();
    let lo = lo.max(dom_lo);
    let hi = hi.min(dom_hi);
    if !(lo < hi) || points < 3 {
        return Err(Error::Grid);
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let report = model.verify_assumptions(&grid)?;
    writeln!(
        out,
        "{{\"lipschitz_bound\":{},\"lipschitz_estimate\":{},\"lipschitz_ok\":{},\"positive\":{},\"strictly_monotone\":{}}}",
        fmt_f64(model.lipschitz_bound()),
        fmt_f64(report.lipschitz_estimate),
        report.lipschitz_ok,
        report.positive,
        report.strictly_monotone
    )
    .map_err(|e| Error::Io(e.to_string()))?;
    if !report.all_pass() {
        return Err(Error::Model("assumption audit failed".into()));
    }
    Ok(())
}

fn cmd_reach(array: &Path, phi_target: &str, out: &mut dyn Write) -> Result<()> {
    let file = ArrayFile::load(array)?;
    let state = file.to_state()?;
    let target = parse_vector(phi_target, "phi_target")?;
    let reachable = reachable_without_switches(&state, &target)?;
    writeln!(out, "{{\"reachable\":{reachable}}}").map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_spec_parsing() {
        assert_eq!(
            parse_model("sigmoid:1,3,1").unwrap(),
            MemductanceModel::sigmoid(1.0, 3.0, 1.0).unwrap()
        );
        assert_eq!(
            parse_model("affine:1,0.5,0,4").unwrap(),
            MemductanceModel::affine(1.0, 0.5, 0.0, 4.0).unwrap()
        );
        assert!(parse_model("sigmoid:1,3").is_err());
        assert!(parse_model("cubic:1,2,3").is_err());
        assert!(parse_model("sigmoid").is_err());
    }

    #[test]
    fn matrix_parsing_checks_shape() {
        assert!(parse_matrix("[[1,2],[3,4]]", 2, 2).is_ok());
        assert!(parse_matrix("[[1,2],[3]]", 2, 2).is_err());
        assert!(parse_matrix("[[1,2]]", 2, 2).is_err());
        assert!(parse_matrix("nonsense", 2, 2).is_err());
    }

    #[test]
    fn json_formatting() {
        assert_eq!(json_vector(&[1.0, -0.5]), "[1.0,-0.5]");
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(json_matrix(&m), "[[1.0,2.0],[3.0,4.0]]");
    }
}
