//! Terminal-only controllers for the crossbar array.
//!
//! Reading applies a zero-mean voltage pulse per column and samples the row
//! currents at the pulse centers; every memductance is recovered exactly and
//! the flux is restored when the horizon ends. Writing closes a single
//! selector switch and iterates a feedback law on the column voltage whose
//! convergence is certified by a Lyapunov argument as long as
//! `alpha * T < 2 / beta`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{
    advance, terminal_currents, CrossbarState, PiecewiseConstantSignal, Segment,
    TerminalPotentials,
};

/// Timing of the read protocol: one pulse of half-width `tau` and amplitude
/// `amplitude` per column, centered at the measurement instants `times`.
///
/// Validity requires `t_1 >= 2 tau` and `t_{l+1} >= t_l + 4 tau`, so pulse
/// windows never overlap. The horizon is `t_n + 2 tau`.
#[derive(Debug, Clone)]
pub struct ReadSchedule {
    tau: f64,
    amplitude: f64,
    times: Vec<f64>,
}

impl ReadSchedule {
    /// Schedule for `n` columns; default measurement instants are
    /// `t_l = 2 tau + 4 tau * l` (0-based `l`), the tightest valid spacing.
    pub fn new(n: usize, tau: f64, amplitude: f64, times: Option<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Schedule("need at least one column".into()));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Schedule(format!("tau must be positive, got {tau}")));
        }
        if amplitude == 0.0 || !amplitude.is_finite() {
            return Err(Error::Schedule("amplitude must be nonzero".into()));
        }
        let times = match times {
            Some(t) => {
                if t.len() != n {
                    return Err(Error::Schedule(format!(
                        "expected {n} measurement instants, got {}",
                        t.len()
                    )));
                }
                if t[0] < 2.0 * tau {
                    return Err(Error::Schedule(format!(
                        "t_1 = {} is below 2 tau = {}",
                        t[0],
                        2.0 * tau
                    )));
                }
                for w in t.windows(2) {
                    if w[1] - w[0] < 4.0 * tau {
                        return Err(Error::Schedule(format!(
                            "spacing {} is below 4 tau = {}; pulses would overlap",
                            w[1] - w[0],
                            4.0 * tau
                        )));
                    }
                }
                t
            }
            None => (0..n).map(|l| 2.0 * tau + 4.0 * tau * l as f64).collect(),
        };
        Ok(ReadSchedule { tau, amplitude, times })
    }

    /// Builds a schedule without the spacing checks. Exists so experiments
    /// can demonstrate that overlapping pulses corrupt the measurement; never
    /// use it for an actual read.
    pub fn unchecked(tau: f64, amplitude: f64, times: Vec<f64>) -> Self {
        ReadSchedule { tau, amplitude, times }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Horizon T = t_n + 2 tau.
    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1] + 2.0 * self.tau
    }
}

fn column_segment(start: f64, l: usize, value: f64, m: usize, n: usize) -> Segment {
    let mut p_a = vec![0.0; n];
    p_a[l] = value;
    Segment { start, potentials: TerminalPotentials::columns(p_a, m), switches: None }
}

fn zero_segment(start: f64, m: usize, n: usize) -> Segment {
    Segment { start, potentials: TerminalPotentials::zeros(n, m), switches: None }
}

fn push_segment(segments: &mut Vec<Segment>, seg: Segment) {
    // equal starts collapse to the later piece
    match segments.last_mut() {
        Some(last) if last.start == seg.start => *last = seg,
        _ => segments.push(seg),
    }
}

/// The five-piece waveform 0 / -a / +a / -a / 0 of column `l` (0-based),
/// as a signal over the full horizon. Its integral over [0, T] and over
/// [0, t_l] are both zero.
pub fn read_pulse_waveform(
    schedule: &ReadSchedule,
    l: usize,
    m: usize,
) -> Result<PiecewiseConstantSignal> {
    let n = schedule.times.len();
    if l >= n {
        return Err(Error::Index { index: l, n });
    }
    let a = schedule.amplitude;
    let tau = schedule.tau;
    let t_l = schedule.times[l];
    let mut segments = Vec::new();
    if t_l - 2.0 * tau > 0.0 {
        segments.push(zero_segment(0.0, m, n));
    }
    push_segment(&mut segments, column_segment(t_l - 2.0 * tau, l, -a, m, n));
    push_segment(&mut segments, column_segment(t_l - tau, l, a, m, n));
    push_segment(&mut segments, column_segment(t_l + tau, l, -a, m, n));
    let horizon = schedule.horizon();
    if t_l + 2.0 * tau < horizon {
        push_segment(&mut segments, zero_segment(t_l + 2.0 * tau, m, n));
    }
    PiecewiseConstantSignal::new(segments, horizon)
}

/// Value of column `l`'s pulse waveform at time `t`.
fn pulse_value(t: f64, t_l: f64, tau: f64, a: f64) -> f64 {
    if t < t_l - 2.0 * tau || t >= t_l + 2.0 * tau {
        0.0
    } else if t < t_l - tau || t >= t_l + tau {
        -a
    } else {
        a
    }
}

/// The full read drive: the superposition of every column's pulse. For a
/// valid schedule the pulse windows are disjoint and at most one column is
/// active at a time; an unchecked overlapping schedule still produces a
/// well-defined drive (and a corrupted read).
pub fn read_signal(schedule: &ReadSchedule, m: usize) -> Result<PiecewiseConstantSignal> {
    let a = schedule.amplitude;
    let tau = schedule.tau;
    let horizon = schedule.horizon();
    let mut breakpoints = vec![0.0];
    for &t_l in &schedule.times {
        for t in [t_l - 2.0 * tau, t_l - tau, t_l + tau, t_l + 2.0 * tau] {
            if t > 0.0 && t < horizon {
                breakpoints.push(t);
            }
        }
    }
    breakpoints.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breakpoints.dedup();
    let segments = breakpoints
        .into_iter()
        .map(|start| {
            let p_a = schedule
                .times
                .iter()
                .map(|&t_l| pulse_value(start, t_l, tau, a))
                .collect();
            Segment { start, potentials: TerminalPotentials::columns(p_a, m), switches: None }
        })
        .collect();
    PiecewiseConstantSignal::new(segments, horizon)
}

/// Recovers the full memductance matrix `W(phi(0))` from row-current
/// measurements at the pulse centers, and returns the state at the horizon,
/// whose flux equals the initial flux.
///
/// Requires all switches closed; the rows are grounded by the drive itself.
pub fn read_array(
    state: &CrossbarState,
    schedule: &ReadSchedule,
) -> Result<(DMatrix<f64>, CrossbarState)> {
    let (m, n) = (state.rows(), state.cols());
    if schedule.times.len() != n {
        return Err(Error::Dimension { what: "schedule", expected: n, got: schedule.times.len() });
    }
    for l in 0..n {
        for k in 0..m {
            if !state.switch(k, l) {
                return Err(Error::Switch(k, l));
            }
        }
    }
    let signal = read_signal(schedule, m)?;
    let mut w_hat = DMatrix::zeros(m, n);
    let mut st = state.clone();
    let mut t = 0.0;
    for (l, &t_l) in schedule.times.iter().enumerate() {
        st = advance(&st, &signal, t, t_l)?;
        let seg = signal
            .value_at(t_l)
            .ok_or(Error::SignalGap { from: t_l, to: t_l })?;
        let currents = terminal_currents(&st, &seg.potentials)?;
        for k in 0..m {
            w_hat[(k, l)] = -currents.j_b[k] / schedule.amplitude;
        }
        t = t_l;
    }
    st = advance(&st, &signal, t, signal.end())?;
    Ok((w_hat, st))
}

/// Parameters of the write controller.
#[derive(Debug, Clone, Copy)]
pub struct WriteConfig {
    /// Feedback gain on the memductance error.
    pub alpha: f64,
    /// Duration each voltage level is held.
    pub period: f64,
    /// Stop tolerance on |W_d - W(phi)|.
    pub epsilon: f64,
    /// Voltage of the initial probe step.
    pub probe: f64,
    /// Hard cap converting non-termination into a diagnosable error.
    pub max_iters: usize,
}

impl WriteConfig {
    pub fn new(alpha: f64, period: f64) -> Self {
        WriteConfig { alpha, period, epsilon: 1e-3, probe: 1.0, max_iters: 100_000 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.period > 0.0 && self.epsilon > 0.0) {
            return Err(Error::Model(format!(
                "write config requires alpha, period, epsilon > 0, got alpha = {}, period = {}, epsilon = {}",
                self.alpha, self.period, self.epsilon
            )));
        }
        if self.probe == 0.0 {
            return Err(Error::Model("probe voltage must be nonzero".into()));
        }
        Ok(())
    }

    /// Checks the convergence certificate alpha * T < 2 / beta.
    pub fn check_gain(&self, beta: f64) -> Result<()> {
        let bound = 2.0 / beta;
        if self.alpha * self.period >= bound {
            return Err(Error::Gain { alpha_t: self.alpha * self.period, bound });
        }
        Ok(())
    }
}

/// One iteration of the write controller, as observed at the terminals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteRecord {
    pub iter: usize,
    /// Flux of the selected cell at time iter * T.
    pub phi: f64,
    /// Voltage held on the column over the preceding period.
    pub voltage: f64,
    /// Measured row current J_k^B at iter * T (left-limit input value).
    pub current: f64,
    /// Inferred memductance -J / P.
    pub w_inferred: f64,
    /// (phi - phi_d)^2, the controller's descent certificate.
    pub lyapunov: f64,
}

/// Trajectory of a single-cell write.
#[derive(Debug, Clone, PartialEq)]
pub struct WriteTrace {
    pub cell: (usize, usize),
    pub records: Vec<WriteRecord>,
    /// Time at which the stop test first held.
    pub stop_time: f64,
}

impl WriteTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Steers cell (k, l) to memductance `w_target` with the switch pattern that
/// isolates it, leaving every other flux bit-identical.
///
/// Protocol: if the current memductance is already within epsilon, stop with
/// no voltage applied. Otherwise hold the probe voltage for one period, then
/// repeat: measure the row current, stop if the inferred memductance is
/// within epsilon of the target, else hold `alpha * (W_d + J/P)` for the
/// next period.
pub fn write_cell(
    state: &CrossbarState,
    k: usize,
    l: usize,
    w_target: f64,
    cfg: &WriteConfig,
) -> Result<(CrossbarState, WriteTrace)> {
    let (m, n) = (state.rows(), state.cols());
    if k >= m {
        return Err(Error::Dimension { what: "row index", expected: m, got: k });
    }
    if l >= n {
        return Err(Error::Index { index: l, n });
    }
    cfg.validate()?;
    let model = *state.model(k, l);
    cfg.check_gain(model.lipschitz_bound())?;
    let phi_d = model.flux_from_memductance(w_target).map_err(|e| match e {
        Error::Range { value, lo, hi, .. } => {
            Error::Range { value, lo, hi, cell: Some((k, l)), scale_hint: None }
        }
        other => other,
    })?;

    let mut st = state.clone();
    st.select_only(k, l);
    let mut trace = WriteTrace { cell: (k, l), records: Vec::new(), stop_time: 0.0 };

    if (w_target - st.memductance_at(k, l)?).abs() <= cfg.epsilon {
        return Ok((st, trace));
    }

    let mut voltage = cfg.probe;
    for i in 1..=cfg.max_iters {
        let mut p_a = vec![0.0; n];
        p_a[l] = voltage;
        let drive = TerminalPotentials::columns(p_a, m);
        let signal = PiecewiseConstantSignal::constant(drive.clone(), cfg.period)?;
        st = advance(&st, &signal, 0.0, cfg.period).map_err(|e| match e {
            Error::Domain { phi, lo, hi, time, .. } => {
                Error::Domain { phi, lo, hi, cell: Some((k, l)), time }
            }
            other => other,
        })?;

        // measure with the voltage that was applied on the interval ending now
        let currents = terminal_currents(&st, &drive)?;
        let current = currents.j_b[k];
        let w_inferred = -current / voltage;
        let phi = st.phi_at(k, l);
        trace.records.push(WriteRecord {
            iter: i,
            phi,
            voltage,
            current,
            w_inferred,
            lyapunov: (phi - phi_d) * (phi - phi_d),
        });

        if (w_target + current / voltage).abs() <= cfg.epsilon {
            trace.stop_time = i as f64 * cfg.period;
            return Ok((st, trace));
        }

        voltage = cfg.alpha * (w_target + current / voltage);
        if voltage.abs() < 1e-15 {
            return Err(Error::IterationLimit {
                k,
                l,
                max_iters: cfg.max_iters,
                detail: format!(
                    "update voltage {voltage:e} underflowed before the stop test held at iteration {i}"
                ),
            });
        }
    }
    Err(Error::IterationLimit {
        k,
        l,
        max_iters: cfg.max_iters,
        detail: format!("target {w_target} not reached within epsilon = {}", cfg.epsilon),
    })
}

/// Order in which a full-array write visits the cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteMode {
    /// One cell at a time, column-major.
    Sequential,
    /// max(m, n) groups of cells with pairwise-distinct rows and columns;
    /// each group is written simultaneously. The dynamics and measurements
    /// of the selected cells decouple exactly, so the per-cell trajectories
    /// equal the sequential ones.
    Diagonal,
}

/// The diagonal grouping: group `d` holds the cells with
/// `(l - k) mod max(m, n) == d`. No two cells of a group share a row or a
/// column.
pub fn diagonal_groups(m: usize, n: usize) -> Vec<Vec<(usize, usize)>> {
    let period = m.max(n);
    let mut groups = vec![Vec::new(); period];
    for l in 0..n {
        for k in 0..m {
            groups[(l + period - k % period) % period].push((k, l));
        }
    }
    groups
}

/// Writes the whole target matrix, cell by cell (`Sequential`) or one
/// diagonal group at a time (`Diagonal`). The incoming switch pattern is
/// restored afterwards.
pub fn write_array(
    state: &CrossbarState,
    targets: &DMatrix<f64>,
    cfg: &WriteConfig,
    mode: WriteMode,
) -> Result<(CrossbarState, Vec<WriteTrace>)> {
    let (m, n) = (state.rows(), state.cols());
    if targets.nrows() != m || targets.ncols() != n {
        return Err(Error::Dimension {
            what: "target matrix",
            expected: m * n,
            got: targets.nrows() * targets.ncols(),
        });
    }
    cfg.validate()?;
    // gain must certify convergence for every cell
    let max_beta = state
        .models()
        .iter()
        .map(|mo| mo.lipschitz_bound())
        .fold(0.0_f64, f64::max);
    cfg.check_gain(max_beta)?;
    // refuse unrealizable targets before touching any flux
    for l in 0..n {
        for k in 0..m {
            state
                .model(k, l)
                .flux_from_memductance(targets[(k, l)])
                .map_err(|e| match e {
                    Error::Range { value, lo, hi, .. } => {
                        Error::Range { value, lo, hi, cell: Some((k, l)), scale_hint: None }
                    }
                    other => other,
                })?;
        }
    }

    let cells: Vec<(usize, usize)> = match mode {
        WriteMode::Sequential => {
            (0..n).flat_map(|l| (0..m).map(move |k| (k, l))).collect()
        }
        WriteMode::Diagonal => diagonal_groups(m, n).into_iter().flatten().collect(),
    };

    let mut st = state.clone();
    let mut traces = Vec::with_capacity(m * n);
    for (k, l) in cells {
        let (next, trace) = write_cell(&st, k, l, targets[(k, l)], cfg)?;
        st = next;
        traces.push(trace);
    }
    st.set_switches(state.switches().to_vec())?;
    Ok((st, traces))
}

/// Whether `phi_target` can be reached from the current flux without opening
/// any switch, i.e. whether the flux difference lies in the column space of
/// D^T. Decided by the residual of a least-squares solve.
pub fn reachable_without_switches(state: &CrossbarState, phi_target: &[f64]) -> Result<bool> {
    let (m, n) = (state.rows(), state.cols());
    if phi_target.len() != m * n {
        return Err(Error::Dimension { what: "phi_target", expected: m * n, got: phi_target.len() });
    }
    let delta = DVector::from_iterator(
        m * n,
        phi_target.iter().zip(state.phi()).map(|(t, p)| t - p),
    );
    let d_t = crate::network::build_incidence(m, n).transpose();
    let svd = d_t.clone().svd(true, true);
    let x = svd
        .solve(&delta, 1e-12)
        .map_err(|e| Error::Model(format!("svd solve failed: {e}")))?;
    let residual = (&d_t * x - &delta).norm();
    Ok(residual <= 1e-9 * (delta.norm() + 1.0))
}
