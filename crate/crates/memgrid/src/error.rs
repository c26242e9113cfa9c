use thiserror::Error;

/// Errors produced by the simulator and its controllers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A flux value left the validity interval of an affine device model.
    #[error("flux {phi} outside model domain [{lo}, {hi}]{}", cell_suffix(.cell, .time))]
    Domain {
        phi: f64,
        lo: f64,
        hi: f64,
        /// Offending cell (row, col), 0-based, when known.
        cell: Option<(usize, usize)>,
        /// Crossing time during integration, when known.
        time: Option<f64>,
    },

    /// A memductance target is not realizable by the device model.
    #[error("memductance {value} outside realizable range ({lo}, {hi}){}{}", cell_suffix(.cell, &None), scale_suffix(.scale_hint))]
    Range {
        value: f64,
        lo: f64,
        hi: f64,
        cell: Option<(usize, usize)>,
        /// Factor by which the caller should rescale the matrix to make it
        /// fit, when one can be computed.
        scale_hint: Option<f64>,
    },

    #[error("verification grid must be strictly increasing with at least 3 points")]
    Grid,

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("signal undefined on [{from}, {to})")]
    SignalGap { from: f64, to: f64 },

    #[error("invalid read schedule: {0}")]
    Schedule(String),

    #[error("read protocol requires all switches closed; switch ({0}, {1}) is open")]
    Switch(usize, usize),

    /// The convergence certificate alpha*T < 2/beta does not hold.
    #[error("gain condition violated: alpha*T = {alpha_t} but the bound is 2/beta = {bound}")]
    Gain { alpha_t: f64, bound: f64 },

    #[error("write controller exceeded {max_iters} iterations at cell ({k}, {l}): {detail}")]
    IterationLimit {
        k: usize,
        l: usize,
        max_iters: usize,
        detail: String,
    },

    #[error("column index {index} out of range 1..={n}")]
    Index { index: usize, n: usize },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid array file: {0}")]
    File(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn scale_suffix(scale: &Option<f64>) -> String {
    match scale {
        Some(s) => format!("; rescale by {s:.6} or less to fit"),
        None => String::new(),
    }
}

fn cell_suffix(cell: &Option<(usize, usize)>, time: &Option<f64>) -> String {
    match (cell, time) {
        (Some((k, l)), Some(t)) => format!(" at cell ({k}, {l}), t = {t}"),
        (Some((k, l)), None) => format!(" at cell ({k}, {l})"),
        _ => String::new(),
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
