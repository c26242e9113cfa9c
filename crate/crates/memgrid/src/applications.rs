//! End uses of the array: analog matrix-vector products and least squares.
//!
//! A matvec drives every column with a zero-mean pulse whose amplitude is the
//! corresponding vector entry; the row currents at the common pulse center
//! are the product, and the flux is restored afterwards. Signed matrices are
//! handled by two arrays programmed with the positive and negative parts.
//! Least squares is a quasi-static solve of the terminal relation
//! `J^A = -W^T P^B` observed when the columns carry current sources.

use nalgebra::{DMatrix, DVector};

use crate::devices::MemductanceModel;
use crate::error::{Error, Result};
use crate::network::{
    advance, terminal_currents, CrossbarState, PiecewiseConstantSignal, Segment,
    TerminalPotentials,
};
use crate::protocols::{write_array, WriteConfig, WriteMode};

/// Distance kept from the endpoints of the realizable memductance range when
/// splitting a signed matrix; the endpoints themselves are unreachable.
const SPLIT_MARGIN: f64 = 0.05;

fn pulse_segments(b: &[f64], tau: f64, s: f64, m: usize) -> Vec<Segment> {
    let n = b.len();
    let scale = |f: f64| -> Segment {
        Segment {
            start: 0.0,
            potentials: TerminalPotentials::columns(b.iter().map(|&v| f * v).collect(), m),
            switches: None,
        }
    };
    let mut segments = Vec::new();
    if s - 2.0 * tau > 0.0 {
        segments.push(Segment { start: 0.0, potentials: TerminalPotentials::zeros(n, m), switches: None });
    }
    for (start, f) in [(s - 2.0 * tau, -1.0), (s - tau, 1.0), (s + tau, -1.0)] {
        let mut seg = scale(f);
        seg.start = start;
        match segments.last_mut() {
            Some(last) if last.start == start => *last = seg,
            _ => segments.push(seg),
        }
    }
    segments
}

/// Computes `c = W(phi_0) * b` in one analog step: all columns pulse
/// simultaneously, centered at `s`, and `c_k = -j_b[k](s)`. Returns the
/// product and the state at the end of the pulse, whose flux equals the
/// initial flux.
pub fn matvec(
    state: &CrossbarState,
    b: &[f64],
    tau: f64,
    s: f64,
) -> Result<(Vec<f64>, CrossbarState)> {
    let (m, n) = (state.rows(), state.cols());
    if b.len() != n {
        return Err(Error::Dimension { what: "b", expected: n, got: b.len() });
    }
    if !(tau > 0.0) || s < 2.0 * tau {
        return Err(Error::Schedule(format!(
            "matvec needs s >= 2 tau > 0, got tau = {tau}, s = {s}"
        )));
    }
    for l in 0..n {
        for k in 0..m {
            if !state.switch(k, l) {
                return Err(Error::Switch(k, l));
            }
        }
    }
    let end = s + 2.0 * tau;
    let signal = PiecewiseConstantSignal::new(pulse_segments(b, tau, s, m), end)?;
    let mut st = advance(state, &signal, 0.0, s)?;
    let seg = signal.value_at(s).ok_or(Error::SignalGap { from: s, to: s })?;
    let currents = terminal_currents(&st, &seg.potentials)?;
    let c: Vec<f64> = currents.j_b.iter().map(|j| -j).collect();
    st = advance(&st, &signal, s, end)?;
    Ok((c, st))
}

/// Two crossbar arrays of the same shape holding a signed matrix as the
/// difference `A = W_B - W_C` of two positive memductance matrices.
#[derive(Debug, Clone)]
pub struct SignedSplit {
    pub b_part: CrossbarState,
    pub c_part: CrossbarState,
}

impl SignedSplit {
    /// `A * b` as the difference of the two single-array products.
    pub fn matvec(&self, b: &[f64], tau: f64, s: f64) -> Result<Vec<f64>> {
        let (cb, _) = matvec(&self.b_part, b, tau, s)?;
        let (cc, _) = matvec(&self.c_part, b, tau, s)?;
        Ok(cb.iter().zip(&cc).map(|(x, y)| x - y).collect())
    }

    /// The programmed difference of the two memductance matrices.
    pub fn programmed_matrix(&self) -> Result<DMatrix<f64>> {
        Ok(self.b_part.memductance_matrix()? - self.c_part.memductance_matrix()?)
    }
}

/// `A * b` via the two-array split.
pub fn matvec_signed(split: &SignedSplit, b: &[f64], tau: f64, s: f64) -> Result<Vec<f64>> {
    split.matvec(b, tau, s)
}

fn split_targets(
    a: &DMatrix<f64>,
    model: &MemductanceModel,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (w_lo, w_hi) = model.memductance_range();
    let width = w_hi - w_lo;
    let gamma = w_lo + SPLIT_MARGIN * width;
    let limit = w_hi - SPLIT_MARGIN * width;
    let max_abs = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if gamma + max_abs > limit {
        // caller has to rescale A before it fits
        return Err(Error::Range {
            value: gamma + max_abs,
            lo: gamma,
            hi: limit,
            cell: None,
            scale_hint: Some((limit - gamma) / max_abs),
        });
    }
    let b = a.map(|v| gamma + v.max(0.0));
    let c = a.map(|v| gamma + (-v).max(0.0));
    Ok((b, c))
}

/// Programs two fresh arrays with `B = A_plus + gamma` and
/// `C = A_minus + gamma` through the write controller.
pub fn make_signed_split(
    a: &DMatrix<f64>,
    model: &MemductanceModel,
    cfg: &WriteConfig,
) -> Result<SignedSplit> {
    let (targets_b, targets_c) = split_targets(a, model)?;
    let (m, n) = (a.nrows(), a.ncols());
    let mid = {
        let (lo, hi) = model.memductance_range();
        model.flux_from_memductance(0.5 * (lo + hi))?
    };
    let blank = CrossbarState::uniform(m, n, *model, vec![mid; m * n])?;
    let (b_part, _) = write_array(&blank, &targets_b, cfg, WriteMode::Sequential)?;
    let (c_part, _) = write_array(&blank, &targets_c, cfg, WriteMode::Sequential)?;
    Ok(SignedSplit { b_part, c_part })
}

/// Same split with the fluxes programmed directly from the model inverse,
/// bypassing the write protocol. The programmed difference then equals `A`
/// to roundoff.
pub fn make_signed_split_exact(a: &DMatrix<f64>, model: &MemductanceModel) -> Result<SignedSplit> {
    let (targets_b, targets_c) = split_targets(a, model)?;
    let (m, n) = (a.nrows(), a.ncols());
    let program = |targets: &DMatrix<f64>| -> Result<CrossbarState> {
        let mut phi = vec![0.0; m * n];
        for l in 0..n {
            for k in 0..m {
                phi[k + m * l] = model.flux_from_memductance(targets[(k, l)])?;
            }
        }
        CrossbarState::uniform(m, n, *model, phi)
    };
    Ok(SignedSplit { b_part: program(&targets_b)?, c_part: program(&targets_c)? })
}

/// Quasi-static least squares: with the array holding `M = W(phi)` and
/// currents `c_inject` fed into the columns, the row potentials settle at
/// the minimum-norm minimizer of `|| M^T y + c_inject ||`. Computed by SVD;
/// the flux is not modified.
pub fn least_squares(state: &CrossbarState, c_inject: &[f64]) -> Result<Vec<f64>> {
    let n = state.cols();
    if c_inject.len() != n {
        return Err(Error::Dimension { what: "c_inject", expected: n, got: c_inject.len() });
    }
    let m_t = state.memductance_matrix()?.transpose();
    let rhs = DVector::from_iterator(n, c_inject.iter().map(|v| -v));
    let svd = m_t.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max().max(1.0);
    let y = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::Model(format!("svd solve failed: {e}")))?;
    Ok(y.iter().copied().collect())
}
