//! The crossbar array: incidence structure, exact flux integration under
//! piecewise-constant terminal potentials, and instantaneous terminal currents.
//!
//! The array has `m` row bars and `n` column bars with a memristor plus
//! selector switch at every crossing. Cell (k, l) lives at index `k + m*l`
//! of the column-major flux vector (0-based throughout). With potentials
//! `p_a` at the column terminals and `p_b` at the rows, the branch voltage of
//! a closed cell is `p_a[l] - p_b[k]` and the flux integrates it exactly,
//! one constant interval at a time.

use nalgebra::DMatrix;

use crate::devices::MemductanceModel;
use crate::error::{Error, Result};

/// Full state of an m-by-n crossbar: device models, fluxes, switch pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarState {
    m: usize,
    n: usize,
    /// Column-major, length m*n.
    models: Vec<MemductanceModel>,
    /// Column-major, length m*n.
    phi: Vec<f64>,
    /// Column-major, length m*n. true = closed.
    switches: Vec<bool>,
}

impl CrossbarState {
    /// Builds a state with per-cell models and fluxes (column-major), all
    /// switches closed.
    pub fn new(m: usize, n: usize, models: Vec<MemductanceModel>, phi: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Model("array dimensions must be at least 1x1".into()));
        }
        if models.len() != m * n {
            return Err(Error::Dimension { what: "models", expected: m * n, got: models.len() });
        }
        if phi.len() != m * n {
            return Err(Error::Dimension { what: "phi", expected: m * n, got: phi.len() });
        }
        for (i, (&p, model)) in phi.iter().zip(&models).enumerate() {
            if !model.contains(p) {
                let (lo, hi) = model.domain();
                return Err(Error::Domain {
                    phi: p,
                    lo,
                    hi,
                    cell: Some((i % m, i / m)),
                    time: None,
                });
            }
        }
        Ok(CrossbarState { m, n, models, phi, switches: vec![true; m * n] })
    }

    /// Same model in every cell.
    pub fn uniform(m: usize, n: usize, model: MemductanceModel, phi: Vec<f64>) -> Result<Self> {
        Self::new(m, n, vec![model; m * n], phi)
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    /// Column-major index of cell (k, l).
    pub fn index(&self, k: usize, l: usize) -> usize {
        debug_assert!(k < self.m && l < self.n);
        k + self.m * l
    }

    pub fn model(&self, k: usize, l: usize) -> &MemductanceModel {
        &self.models[self.index(k, l)]
    }

    pub fn models(&self) -> &[MemductanceModel] {
        &self.models
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn phi_at(&self, k: usize, l: usize) -> f64 {
        self.phi[self.index(k, l)]
    }

    pub fn set_phi(&mut self, k: usize, l: usize, phi: f64) -> Result<()> {
        let idx = self.index(k, l);
        if !self.models[idx].contains(phi) {
            let (lo, hi) = self.models[idx].domain();
            return Err(Error::Domain { phi, lo, hi, cell: Some((k, l)), time: None });
        }
        self.phi[idx] = phi;
        Ok(())
    }

    pub fn switches(&self) -> &[bool] {
        &self.switches
    }

    pub fn switch(&self, k: usize, l: usize) -> bool {
        self.switches[self.index(k, l)]
    }

    pub fn set_switch(&mut self, k: usize, l: usize, closed: bool) {
        let idx = self.index(k, l);
        self.switches[idx] = closed;
    }

    pub fn set_switches(&mut self, switches: Vec<bool>) -> Result<()> {
        if switches.len() != self.m * self.n {
            return Err(Error::Dimension {
                what: "switches",
                expected: self.m * self.n,
                got: switches.len(),
            });
        }
        self.switches = switches;
        Ok(())
    }

    pub fn close_all_switches(&mut self) {
        self.switches.iter_mut().for_each(|s| *s = true);
    }

    pub fn all_switches_closed(&self) -> bool {
        self.switches.iter().all(|&s| s)
    }

    /// Closes only the switch of cell (k, l); every other cell is isolated.
    pub fn select_only(&mut self, k: usize, l: usize) {
        let idx = self.index(k, l);
        for (i, s) in self.switches.iter_mut().enumerate() {
            *s = i == idx;
        }
    }

    /// Current memductance of one cell.
    pub fn memductance_at(&self, k: usize, l: usize) -> Result<f64> {
        let idx = self.index(k, l);
        self.models[idx].memductance(self.phi[idx])
    }

    /// The m-by-n matrix W(phi) of instantaneous memductances.
    pub fn memductance_matrix(&self) -> Result<DMatrix<f64>> {
        let mut w = DMatrix::zeros(self.m, self.n);
        for l in 0..self.n {
            for k in 0..self.m {
                w[(k, l)] = self.memductance_at(k, l)?;
            }
        }
        Ok(w)
    }
}

/// Voltage potentials at the external terminals: `p_a` for the n columns,
/// `p_b` for the m rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalPotentials {
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
}

impl TerminalPotentials {
    pub fn new(p_a: Vec<f64>, p_b: Vec<f64>) -> Result<Self> {
        if p_a.iter().chain(&p_b).any(|v| !v.is_finite()) {
            return Err(Error::Model("terminal potentials must be finite".into()));
        }
        Ok(TerminalPotentials { p_a, p_b })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        TerminalPotentials { p_a: vec![0.0; n], p_b: vec![0.0; m] }
    }

    /// Column potentials with grounded rows.
    pub fn columns(p_a: Vec<f64>, m: usize) -> Self {
        TerminalPotentials { p_b: vec![0.0; m], p_a }
    }
}

/// Currents through the external terminals, signed into the network at the
/// columns and out at the rows, so they always sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalCurrents {
    pub j_a: Vec<f64>,
    pub j_b: Vec<f64>,
}

/// One constant piece of a terminal drive: potentials, and optionally a
/// switch pattern that holds for the duration of the piece.
#[derive(Debug, Clone)]
pub struct Segment {
    pub start: f64,
    pub potentials: TerminalPotentials,
    pub switches: Option<Vec<bool>>,
}

/// Right-continuous step function of time carrying terminal potentials.
/// Piece `i` holds on `[start_i, start_{i+1})`; the last piece ends at `end`.
#[derive(Debug, Clone)]
pub struct PiecewiseConstantSignal {
    segments: Vec<Segment>,
    end: f64,
}

impl PiecewiseConstantSignal {
    pub fn new(segments: Vec<Segment>, end: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Model("signal needs at least one segment".into()));
        }
        if segments[0].start != 0.0 {
            return Err(Error::Model("first signal breakpoint must be 0".into()));
        }
        if segments.windows(2).any(|w| w[1].start <= w[0].start) {
            return Err(Error::Model("signal breakpoints must be strictly increasing".into()));
        }
        if end <= segments.last().unwrap().start {
            return Err(Error::Model("signal end must exceed the last breakpoint".into()));
        }
        Ok(PiecewiseConstantSignal { segments, end })
    }

    /// Constant potentials on [0, end).
    pub fn constant(potentials: TerminalPotentials, end: f64) -> Result<Self> {
        Self::new(vec![Segment { start: 0.0, potentials, switches: None }], end)
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.start).collect()
    }

    /// Value at time t (right-continuous: a breakpoint takes the new value).
    pub fn value_at(&self, t: f64) -> Option<&Segment> {
        if t < 0.0 || t >= self.end {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.start <= t);
        Some(&self.segments[idx - 1])
    }

    /// Left-limit value at time t: the segment that held just before t.
    pub fn value_before(&self, t: f64) -> Option<&Segment> {
        if t <= 0.0 || t > self.end {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.start < t);
        Some(&self.segments[idx - 1])
    }
}

/// The incidence matrix D of the crossbar graph with all switches closed:
/// one +1 (column terminal) and one -1 (row terminal) per branch.
pub fn build_incidence(m: usize, n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n + m, m * n);
    for l in 0..n {
        for k in 0..m {
            let branch = k + m * l;
            d[(l, branch)] = 1.0;
            d[(n + k, branch)] = -1.0;
        }
    }
    d
}

fn check_dims(state: &CrossbarState, p: &TerminalPotentials) -> Result<()> {
    if p.p_a.len() != state.n {
        return Err(Error::Dimension { what: "p_a", expected: state.n, got: p.p_a.len() });
    }
    if p.p_b.len() != state.m {
        return Err(Error::Dimension { what: "p_b", expected: state.m, got: p.p_b.len() });
    }
    Ok(())
}

/// Branch voltages V = S D^T P, column-major: s_kl * (p_a[l] - p_b[k]).
pub fn branch_voltages(state: &CrossbarState, p: &TerminalPotentials) -> Result<Vec<f64>> {
    check_dims(state, p)?;
    let mut v = vec![0.0; state.m * state.n];
    for l in 0..state.n {
        for k in 0..state.m {
            let idx = k + state.m * l;
            if state.switches[idx] {
                v[idx] = p.p_a[l] - p.p_b[k];
            }
        }
    }
    Ok(v)
}

/// Instantaneous terminal currents J = D S W(phi) S D^T P.
///
/// The sums are formed structurally instead of materializing D.
pub fn terminal_currents(state: &CrossbarState, p: &TerminalPotentials) -> Result<TerminalCurrents> {
    check_dims(state, p)?;
    let mut j_a = vec![0.0; state.n];
    let mut j_b = vec![0.0; state.m];
    for l in 0..state.n {
        for k in 0..state.m {
            let idx = k + state.m * l;
            if !state.switches[idx] {
                continue;
            }
            let w = state.models[idx].memductance(state.phi[idx]).map_err(|e| match e {
                Error::Domain { phi, lo, hi, .. } => {
                    Error::Domain { phi, lo, hi, cell: Some((k, l)), time: None }
                }
                other => other,
            })?;
            let current = w * (p.p_a[l] - p.p_b[k]);
            j_a[l] += current;
            j_b[k] -= current;
        }
    }
    Ok(TerminalCurrents { j_a, j_b })
}

/// Integrates d(phi)/dt = S D^T P from `t_from` to `t_to`.
///
/// On each interval where P and S are constant the flux is linear in time, so
/// the update `phi += dt * s * (p_a[l] - p_b[k])` is exact. Segments may carry
/// their own switch pattern; otherwise the state's pattern applies. An affine
/// cell leaving its validity interval is reported with its index and the
/// crossing time.
pub fn advance(
    state: &CrossbarState,
    signal: &PiecewiseConstantSignal,
    t_from: f64,
    t_to: f64,
) -> Result<CrossbarState> {
    if t_to < t_from {
        return Err(Error::SignalGap { from: t_from, to: t_to });
    }
    if t_from < 0.0 || t_to > signal.end() {
        return Err(Error::SignalGap { from: t_from, to: t_to });
    }
    let mut out = state.clone();
    if t_to == t_from {
        return Ok(out);
    }

    let starts: Vec<f64> = signal.segments.iter().map(|s| s.start).collect();
    let mut t = t_from;
    // first segment covering t_from
    let mut seg = starts.partition_point(|&s| s <= t_from) - 1;
    while t < t_to {
        let seg_end = if seg + 1 < starts.len() { starts[seg + 1] } else { signal.end() };
        let stop = seg_end.min(t_to);
        let dt = stop - t;
        let segment = &signal.segments[seg];
        check_dims(state, &segment.potentials)?;
        let switches = segment.switches.as_deref().unwrap_or(&out.switches);
        if switches.len() != state.m * state.n {
            return Err(Error::Dimension {
                what: "segment switches",
                expected: state.m * state.n,
                got: switches.len(),
            });
        }
        for l in 0..state.n {
            for k in 0..state.m {
                let idx = k + state.m * l;
                if !switches[idx] {
                    continue;
                }
                let rate = segment.potentials.p_a[l] - segment.potentials.p_b[k];
                if rate == 0.0 {
                    continue;
                }
                let next = out.phi[idx] + dt * rate;
                let (lo, hi) = out.models[idx].domain();
                if next < lo || next > hi {
                    let bound = if next < lo { lo } else { hi };
                    let crossing = t + (bound - out.phi[idx]) / rate;
                    return Err(Error::Domain {
                        phi: next,
                        lo,
                        hi,
                        cell: Some((k, l)),
                        time: Some(crossing),
                    });
                }
                out.phi[idx] = next;
            }
        }
        t = stop;
        seg += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sigmoid_state_2x2(phi: Vec<f64>) -> CrossbarState {
        let model = MemductanceModel::sigmoid(1.0, 3.0, 1.0).unwrap();
        CrossbarState::uniform(2, 2, model, phi).unwrap()
    }

    #[test]
    fn incidence_2x2_explicit() {
        let d = build_incidence(2, 2);
        let expected = [
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [-1.0, 0.0, -1.0, 0.0],
            [0.0, -1.0, 0.0, -1.0],
        ];
        for (r, row) in expected.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                assert_eq!(d[(r, c)], v);
            }
        }
        // each column has one +1 and one -1
        for c in 0..4 {
            assert_eq!(d.column(c).sum(), 0.0);
        }
    }

    #[test]
    fn incidence_1x1() {
        let d = build_incidence(1, 1);
        assert_eq!(d.nrows(), 2);
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(d[(1, 0)], -1.0);
    }

    #[test]
    fn incidence_column_sums_and_rank() {
        for (m, n) in [(1, 3), (3, 1), (2, 2), (4, 3), (5, 5)] {
            let d = build_incidence(m, n);
            for c in 0..m * n {
                assert_eq!(d.column(c).sum(), 0.0);
            }
            assert_eq!(d.rank(1e-10), m + n - 1);
        }
    }

    #[test]
    fn branch_voltages_closed() {
        let state = sigmoid_state_2x2(vec![0.0; 4]);
        let p = TerminalPotentials::columns(vec![1.0, 0.0], 2);
        let v = branch_voltages(&state, &p).unwrap();
        assert_eq!(v, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn branch_voltages_switch_mask() {
        let mut state = sigmoid_state_2x2(vec![0.0; 4]);
        state.select_only(0, 0);
        let p = TerminalPotentials::columns(vec![1.0, 1.0], 2);
        let v = branch_voltages(&state, &p).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn branch_voltages_zero_input() {
        let state = sigmoid_state_2x2(vec![0.3, -0.2, 1.0, 0.0]);
        let v = branch_voltages(&state, &TerminalPotentials::zeros(2, 2)).unwrap();
        assert_eq!(v, vec![0.0; 4]);
    }

    #[test]
    fn terminal_currents_hand_example() {
        // phi = 0 everywhere so W = 2; p_a = (1, 0), rows grounded
        let state = sigmoid_state_2x2(vec![0.0; 4]);
        let p = TerminalPotentials::columns(vec![1.0, 0.0], 2);
        let j = terminal_currents(&state, &p).unwrap();
        assert_relative_eq!(j.j_a[0], 4.0, max_relative = 1e-15);
        assert_relative_eq!(j.j_a[1], 0.0);
        assert_relative_eq!(j.j_b[0], -2.0, max_relative = 1e-15);
        assert_relative_eq!(j.j_b[1], -2.0, max_relative = 1e-15);
    }

    #[test]
    fn terminal_currents_zero_cases() {
        let mut state = sigmoid_state_2x2(vec![0.0; 4]);
        let j = terminal_currents(&state, &TerminalPotentials::zeros(2, 2)).unwrap();
        assert!(j.j_a.iter().chain(&j.j_b).all(|&v| v == 0.0));

        state.set_switches(vec![false; 4]).unwrap();
        let p = TerminalPotentials::columns(vec![1.0, 0.0], 2);
        let j = terminal_currents(&state, &p).unwrap();
        assert!(j.j_a.iter().chain(&j.j_b).all(|&v| v == 0.0));
    }

    #[test]
    fn current_conservation() {
        let state = sigmoid_state_2x2(vec![0.4, -1.2, 0.7, 2.0]);
        let p = TerminalPotentials::new(vec![1.3, -0.4], vec![0.2, -2.0]).unwrap();
        let j = terminal_currents(&state, &p).unwrap();
        let total: f64 = j.j_a.iter().chain(&j.j_b).sum();
        let scale: f64 =
            j.j_a.iter().chain(&j.j_b).map(|v| v.abs()).sum::<f64>() + 1.0;
        assert!(total.abs() <= 1e-12 * scale);
    }

    #[test]
    fn advance_single_interval() {
        let state = sigmoid_state_2x2(vec![0.0; 4]);
        let p = TerminalPotentials::columns(vec![1.0, 0.0], 2);
        let sig = PiecewiseConstantSignal::constant(p, 1.0).unwrap();
        let after = advance(&state, &sig, 0.0, 0.5).unwrap();
        assert_eq!(after.phi(), &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn advance_zero_input_is_identity() {
        let state = sigmoid_state_2x2(vec![0.3, -0.2, 1.0, 0.0]);
        let sig = PiecewiseConstantSignal::constant(TerminalPotentials::zeros(2, 2), 7.0).unwrap();
        let after = advance(&state, &sig, 0.0, 7.0).unwrap();
        assert_eq!(after.phi(), state.phi());
    }

    #[test]
    fn zero_mean_pulse_restores_flux() {
        // -1 for tau, +1 for 2 tau, -1 for tau on column 0
        let state = sigmoid_state_2x2(vec![0.1, 0.2, 0.3, 0.4]);
        let tau = 0.25;
        let seg = |start: f64, a: f64| Segment {
            start,
            potentials: TerminalPotentials::columns(vec![a, 0.0], 2),
            switches: None,
        };
        let sig = PiecewiseConstantSignal::new(
            vec![seg(0.0, -1.0), seg(tau, 1.0), seg(3.0 * tau, -1.0)],
            4.0 * tau,
        )
        .unwrap();
        let after = advance(&state, &sig, 0.0, 4.0 * tau).unwrap();
        for (a, b) in after.phi().iter().zip(state.phi()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn advance_split_at_midpoint_is_bit_near() {
        let state = sigmoid_state_2x2(vec![0.11, -0.7, 0.313, 0.0]);
        let p = TerminalPotentials::new(vec![0.3, -1.7], vec![0.05, 0.4]).unwrap();
        let sig = PiecewiseConstantSignal::constant(p, 1.0).unwrap();
        let whole = advance(&state, &sig, 0.0, 0.9).unwrap();
        let half = advance(&state, &sig, 0.0, 0.37).unwrap();
        let split = advance(&half, &sig, 0.37, 0.9).unwrap();
        for (a, b) in whole.phi().iter().zip(split.phi()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn advance_gap_is_rejected() {
        let state = sigmoid_state_2x2(vec![0.0; 4]);
        let sig = PiecewiseConstantSignal::constant(TerminalPotentials::zeros(2, 2), 1.0).unwrap();
        assert!(matches!(advance(&state, &sig, 0.0, 2.0), Err(Error::SignalGap { .. })));
        assert!(matches!(advance(&state, &sig, -0.5, 0.5), Err(Error::SignalGap { .. })));
    }

    #[test]
    fn advance_reports_affine_domain_exit() {
        let model = MemductanceModel::affine(1.0, 0.5, 0.0, 4.0).unwrap();
        let state = CrossbarState::uniform(1, 1, model, vec![3.0]).unwrap();
        let p = TerminalPotentials::columns(vec![2.0], 1);
        let sig = PiecewiseConstantSignal::constant(p, 10.0).unwrap();
        match advance(&state, &sig, 0.0, 1.0) {
            Err(Error::Domain { cell: Some((0, 0)), time: Some(t), .. }) => {
                assert_relative_eq!(t, 0.5, max_relative = 1e-12);
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn signal_value_conventions() {
        let seg = |start: f64, a: f64| Segment {
            start,
            potentials: TerminalPotentials::columns(vec![a], 1),
            switches: None,
        };
        let sig = PiecewiseConstantSignal::new(vec![seg(0.0, 1.0), seg(1.0, 2.0)], 3.0).unwrap();
        assert_eq!(sig.value_at(1.0).unwrap().potentials.p_a[0], 2.0);
        assert_eq!(sig.value_before(1.0).unwrap().potentials.p_a[0], 1.0);
        assert_eq!(sig.value_at(0.0).unwrap().potentials.p_a[0], 1.0);
        assert!(sig.value_at(3.0).is_none());
        assert_eq!(sig.value_before(3.0).unwrap().potentials.p_a[0], 2.0);
    }

    #[test]
    fn linearity_in_potentials() {
        let state = sigmoid_state_2x2(vec![0.4, -1.2, 0.7, 2.0]);
        let p = TerminalPotentials::new(vec![1.3, -0.4], vec![0.2, -2.0]).unwrap();
        let scaled = TerminalPotentials::new(
            p.p_a.iter().map(|v| 3.5 * v).collect(),
            p.p_b.iter().map(|v| 3.5 * v).collect(),
        )
        .unwrap();
        let j1 = terminal_currents(&state, &p).unwrap();
        let j2 = terminal_currents(&state, &scaled).unwrap();
        for (a, b) in j1.j_a.iter().chain(&j1.j_b).zip(j2.j_a.iter().chain(&j2.j_b)) {
            assert_relative_eq!(3.5 * a, *b, max_relative = 1e-12);
        }
    }
}
