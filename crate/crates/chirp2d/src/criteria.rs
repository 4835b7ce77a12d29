//! Chirp basis matrices, projection residuals, the reduced criteria
//! `R1`/`R2` and the periodogram-type functions `I1`/`I2`.
//!
//! For a candidate pair `(freq, rate)` the two-column basis over `t = 1..=T`
//! is `Z[t] = (cos(freq*t + rate*t^2), sin(freq*t + rate*t^2))`. The reduced
//! column criterion is the sum over all grid columns of the squared residual
//! left after projecting each column onto the span of `Z`; the row criterion
//! mirrors it over grid rows. The periodogram variants drop the normal-matrix
//! inverse and are maximized instead of minimized.
//!
//! One structural fact matters to every consumer of these functions: on
//! integer sample indices the pairs `(freq, rate)` and
//! `(pi - freq, pi - rate)` span the same signal space, because the two
//! phases sum to `pi * t * (t + 1)`, an even multiple of `pi`. Every
//! criterion in this module therefore takes equal values at a pair and at its
//! mirror, and both points are genuine optima. See
//! [`NonlinearPair::mirrored`].

use crate::error::{Error, Result};
use crate::signal::SignalGrid;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Determinant guard for the 2x2 basis normal matrix, relative to `T^2`.
const DEGENERACY_EPS: f64 = 1e-12;

/// A (frequency, frequency-rate) point in the open square `(0, pi)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearPair {
    pub freq: f64,
    pub rate: f64,
}

impl NonlinearPair {
    /// Builds a pair, rejecting values outside the open square.
    pub fn new(freq: f64, rate: f64) -> Result<Self> {
        let pair = Self { freq, rate };
        if !pair.in_domain() {
            let (what, value) = if freq.is_finite() && freq > 0.0 && freq < PI {
                ("rate", rate)
            } else {
                ("freq", freq)
            };
            return Err(Error::OutOfDomain { what: what.to_string(), value });
        }
        Ok(pair)
    }

    pub fn in_domain(&self) -> bool {
        self.freq > 0.0 && self.freq < PI && self.rate > 0.0 && self.rate < PI
    }

    /// The observationally equivalent pair `(pi - freq, pi - rate)`.
    ///
    /// Sampled at integer `t`, the chirp phases of a pair and its mirror sum
    /// to `pi*t + pi*t^2 = pi*t*(t+1) = 0 (mod 2*pi)`, so the two bases span
    /// the same space and no criterion built from projections can tell them
    /// apart. Estimators resolve the ambiguity by reporting the
    /// representative with `rate < pi/2`.
    pub fn mirrored(&self) -> Self {
        Self { freq: PI - self.freq, rate: PI - self.rate }
    }
}

/// Neumaier compensated summation; keeps criterion values reproducible to
/// ~1e-12 regardless of slice count.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `T x 2` chirp basis with cached column Gram entries.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    pair: NonlinearPair,
    cos: Vec<f64>,
    sin: Vec<f64>,
    gram_cc: f64,
    gram_ss: f64,
    gram_cs: f64,
}

/// Fills `cos_out`/`sin_out` with the chirp phasors
/// `(cos(f*t + r*t^2), sin(f*t + r*t^2))`, `t = 1..=len`.
///
/// Successive phasors differ by a rotation whose angle increases by `2r`
/// each step, so the bulk is computed by complex multiplication with an
/// exact `sin_cos` re-anchor every 32 samples. The rotation drift stays
/// below the argument-rounding blur of direct evaluation (verified in
/// tests).
fn chirp_phasors(len: usize, freq: f64, rate: f64, cos_out: &mut [f64], sin_out: &mut [f64]) {
    debug_assert!(cos_out.len() >= len && sin_out.len() >= len);
    let (step_s, step_c) = (2.0 * rate).sin_cos();
    let mut u = (0.0f64, 0.0f64); // e^{i phase(t)}
    let mut w = (0.0f64, 0.0f64); // e^{i (phase(t+1) - phase(t))}
    for t0 in 0..len {
        if t0 % 32 == 0 {
            let t = (t0 + 1) as f64;
            let (s, c) = (freq * t + rate * t * t).sin_cos();
            u = (c, s);
            let (ws, wc) = (freq + rate * (2.0 * t + 1.0)).sin_cos();
            w = (wc, ws);
        } else {
            u = (u.0 * w.0 - u.1 * w.1, u.0 * w.1 + u.1 * w.0);
            w = (w.0 * step_c - w.1 * step_s, w.0 * step_s + w.1 * step_c);
        }
        cos_out[t0] = u.0;
        sin_out[t0] = u.1;
    }
}

fn gram_of(cos: &[f64], sin: &[f64]) -> (f64, f64, f64) {
    let mut cc = 0.0;
    let mut ss = 0.0;
    let mut cs = 0.0;
    for (&c, &s) in cos.iter().zip(sin) {
        cc += c * c;
        ss += s * s;
        cs += c * s;
    }
    (cc, ss, cs)
}

/// Builds the `T x 2` basis for a pair. Needs `T >= 2`.
pub fn basis(len: usize, pair: NonlinearPair) -> Result<BasisMatrix> {
    if len < 2 {
        return Err(Error::BasisTooShort { len });
    }
    let mut cos = vec![0.0; len];
    let mut sin = vec![0.0; len];
    chirp_phasors(len, pair.freq, pair.rate, &mut cos, &mut sin);
    let (cc, ss, cs) = gram_of(&cos, &sin);
    Ok(BasisMatrix { pair, cos, sin, gram_cc: cc, gram_ss: ss, gram_cs: cs })
}

impl BasisMatrix {
    pub fn len(&self) -> usize {
        self.cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty()
    }

    pub fn pair(&self) -> NonlinearPair {
        self.pair
    }

    /// Row `t0` (0-based; sample index `t = t0 + 1`).
    pub fn row(&self, t0: usize) -> (f64, f64) {
        (self.cos[t0], self.sin[t0])
    }

    pub(crate) fn columns(&self) -> (&[f64], &[f64]) {
        (&self.cos, &self.sin)
    }

    fn det(&self) -> f64 {
        self.gram_cc * self.gram_ss - self.gram_cs * self.gram_cs
    }

    fn degeneracy_threshold(&self) -> f64 {
        DEGENERACY_EPS * (self.len() as f64) * (self.len() as f64)
    }

    /// Checks the determinant guard, returning `(gram_cc, gram_ss, gram_cs,
    /// det)` when the normal matrix is invertible.
    fn checked_gram(&self) -> Result<(f64, f64, f64, f64)> {
        let det = self.det();
        let threshold = self.degeneracy_threshold();
        if !(det > threshold) {
            return Err(Error::DegenerateBasis { det, threshold });
        }
        Ok((self.gram_cc, self.gram_ss, self.gram_cs, det))
    }

    fn projections(&self, y: &[f64]) -> Result<(f64, f64, f64)> {
        if y.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: y.len() });
        }
        let mut vc = 0.0;
        let mut vs = 0.0;
        let mut energy = 0.0;
        for ((&c, &s), &v) in self.cos.iter().zip(&self.sin).zip(y) {
            vc += c * v;
            vs += s * v;
            energy += v * v;
        }
        Ok((vc, vs, energy))
    }
}

/// Squared fitted norm `v' (Z'Z)^-1 v` given the Gram entries and the
/// projections `vc = c'y`, `vs = s'y`.
#[inline]
fn fitted_energy(cc: f64, ss: f64, cs: f64, det: f64, vc: f64, vs: f64) -> f64 {
    (ss * vc * vc - 2.0 * cs * vc * vs + cc * vs * vs) / det
}

/// Residual `y'y - y'Z (Z'Z)^-1 Z'y` of one vector against the basis.
///
/// Tiny negative values from cancellation are clamped to zero; anything below
/// `-1e-9 * y'y` would indicate a real defect and is reported in debug
/// builds.
pub fn projection_residual(y: &[f64], z: &BasisMatrix) -> Result<f64> {
    let (cc, ss, cs, det) = z.checked_gram()?;
    let (vc, vs, energy) = z.projections(y)?;
    let residual = energy - fitted_energy(cc, ss, cs, det, vc, vs);
    debug_assert!(residual >= -1e-9 * energy, "residual {residual} vs energy {energy}");
    Ok(residual.max(0.0))
}

/// Least-squares coefficients `(a, b)` of `y ~ a*cos + b*sin`, i.e.
/// `(Z'Z)^-1 Z'y`.
pub fn column_amplitudes(y: &[f64], z: &BasisMatrix) -> Result<(f64, f64)> {
    let (cc, ss, cs, det) = z.checked_gram()?;
    let (vc, vs, _) = z.projections(y)?;
    Ok(((ss * vc - cs * vs) / det, (cc * vs - cs * vc) / det))
}

/// Which family of 1-D slices feeds a criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Slices are grid columns (length `M`); the criterion estimates the
    /// row-direction pair `(alpha, beta)`.
    Columns,
    /// Slices are grid rows (length `N`); the criterion estimates
    /// `(gamma, delta)`.
    Rows,
}

/// Reusable evaluator for one grid and one axis.
///
/// Precomputes the per-slice energies once so that repeated evaluations (a
/// coarse grid search visits `T^3` pairs) cost one basis build plus a single
/// fused pass over the data. Evaluations are pure; a shared reference can be
/// used from many threads.
pub struct AxisEvaluator<'a> {
    grid: &'a SignalGrid,
    axis: Axis,
    slice_energy: Vec<f64>,
    total_energy: f64,
}

impl<'a> AxisEvaluator<'a> {
    pub fn new(grid: &'a SignalGrid, axis: Axis) -> Self {
        let slice_energy = match axis {
            Axis::Columns => {
                let mut e = vec![0.0; grid.cols()];
                for i in 0..grid.rows() {
                    for (j, &v) in grid.row(i).iter().enumerate() {
                        e[j] += v * v;
                    }
                }
                e
            }
            Axis::Rows => (0..grid.rows())
                .map(|i| grid.row(i).iter().map(|v| v * v).sum())
                .collect(),
        };
        let mut total = KahanSum::default();
        for &e in &slice_energy {
            total.add(e);
        }
        Self { grid, axis, slice_energy, total_energy: total.value() }
    }

    /// Basis length `T` for this axis.
    pub fn basis_len(&self) -> usize {
        match self.axis {
            Axis::Columns => self.grid.rows(),
            Axis::Rows => self.grid.cols(),
        }
    }

    /// Sum over slices of `y'y`; independent of the evaluated pair.
    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    pub fn num_slices(&self) -> usize {
        self.slice_energy.len()
    }

    /// Per-slice projections `c'y` and `s'y` for every slice, in slice order.
    fn slice_projections(&self, z: &BasisMatrix, vc: &mut Vec<f64>, vs: &mut Vec<f64>) {
        let (cos, sin) = z.columns();
        match self.axis {
            Axis::Columns => {
                let n = self.grid.cols();
                vc.clear();
                vc.resize(n, 0.0);
                vs.clear();
                vs.resize(n, 0.0);
                for i in 0..self.grid.rows() {
                    let (c, s) = (cos[i], sin[i]);
                    let row = self.grid.row(i);
                    for ((pc, ps), &y) in vc.iter_mut().zip(vs.iter_mut()).zip(row) {
                        *pc += c * y;
                        *ps += s * y;
                    }
                }
            }
            Axis::Rows => {
                let m = self.grid.rows();
                vc.clear();
                vc.reserve(m);
                vs.clear();
                vs.reserve(m);
                for i in 0..m {
                    let row = self.grid.row(i);
                    let mut pc = 0.0;
                    let mut ps = 0.0;
                    for ((&c, &s), &v) in cos.iter().zip(sin).zip(row) {
                        pc += c * v;
                        ps += s * v;
                    }
                    vc.push(pc);
                    vs.push(ps);
                }
            }
        }
    }

    /// Reduced criterion: sum over slices of the projection residual onto the
    /// basis at `pair`. The basis is built once and shared by every slice.
    pub fn reduced(&self, pair: NonlinearPair) -> Result<f64> {
        let z = basis(self.basis_len(), pair)?;
        let (cc, ss, cs, det) = z.checked_gram()?;
        let mut vc = Vec::new();
        let mut vs = Vec::new();
        self.slice_projections(&z, &mut vc, &mut vs);
        let mut acc = KahanSum::default();
        for (j, (&pc, &ps)) in vc.iter().zip(&vs).enumerate() {
            let r = self.slice_energy[j] - fitted_energy(cc, ss, cs, det, pc, ps);
            debug_assert!(r >= -1e-9 * self.slice_energy[j].max(1.0));
            acc.add(r.max(0.0));
        }
        Ok(acc.value())
    }

    /// Periodogram-type criterion `(2 / (M*N)) * sum_slices ||Z'y||^2`.
    /// No normal-matrix inverse is involved, exactly as the estimator that
    /// maximizes it prescribes.
    pub fn periodogram(&self, pair: NonlinearPair) -> Result<f64> {
        let z = basis(self.basis_len(), pair)?;
        let mut vc = Vec::new();
        let mut vs = Vec::new();
        self.slice_projections(&z, &mut vc, &mut vs);
        let mut acc = KahanSum::default();
        for (&pc, &ps) in vc.iter().zip(&vs) {
            acc.add(pc * pc + ps * ps);
        }
        let mn = (self.grid.rows() * self.grid.cols()) as f64;
        Ok(2.0 / mn * acc.value())
    }

    /// Batched [`AxisEvaluator::reduced`]: one value per pair, with NaN where
    /// the basis degenerates. Bitwise-identical to the scalar path; the
    /// batching only reduces how often the grid is streamed from memory.
    pub fn reduced_batch(&self, pairs: &[NonlinearPair], out: &mut Vec<f64>) {
        self.eval_batch(pairs, false, out);
    }

    /// Batched [`AxisEvaluator::periodogram`].
    pub fn periodogram_batch(&self, pairs: &[NonlinearPair], out: &mut Vec<f64>) {
        self.eval_batch(pairs, true, out);
    }

    fn eval_batch(&self, pairs: &[NonlinearPair], periodogram: bool, out: &mut Vec<f64>) {
        /// Pairs evaluated per grid pass; sized so the accumulator strips
        /// stay L1-resident.
        const BATCH: usize = 8;

        out.clear();
        out.reserve(pairs.len());
        let t = self.basis_len();
        let slices = self.num_slices();
        let mn = (self.grid.rows() * self.grid.cols()) as f64;
        let threshold = DEGENERACY_EPS * (t as f64) * (t as f64);

        let mut cos_buf = vec![0.0; BATCH * t];
        let mut sin_buf = vec![0.0; BATCH * t];
        let mut vc = vec![0.0; BATCH * slices];
        let mut vs = vec![0.0; BATCH * slices];

        for chunk in pairs.chunks(BATCH) {
            let k_count = chunk.len();
            for (k, p) in chunk.iter().enumerate() {
                chirp_phasors(t, p.freq, p.rate, &mut cos_buf[k * t..(k + 1) * t], &mut sin_buf[k * t..(k + 1) * t]);
            }
            vc[..k_count * slices].fill(0.0);
            vs[..k_count * slices].fill(0.0);

            match self.axis {
                Axis::Columns => {
                    for i in 0..self.grid.rows() {
                        let row = self.grid.row(i);
                        for k in 0..k_count {
                            let (c, s) = (cos_buf[k * t + i], sin_buf[k * t + i]);
                            let pc = &mut vc[k * slices..(k + 1) * slices];
                            let ps = &mut vs[k * slices..(k + 1) * slices];
                            for ((a, b), &y) in pc.iter_mut().zip(ps.iter_mut()).zip(row) {
                                *a += c * y;
                                *b += s * y;
                            }
                        }
                    }
                }
                Axis::Rows => {
                    for i in 0..self.grid.rows() {
                        let row = self.grid.row(i);
                        for k in 0..k_count {
                            let cs = &cos_buf[k * t..(k + 1) * t];
                            let ss = &sin_buf[k * t..(k + 1) * t];
                            let mut pc = 0.0;
                            let mut ps = 0.0;
                            for ((&c, &s), &y) in cs.iter().zip(ss).zip(row) {
                                pc += c * y;
                                ps += s * y;
                            }
                            vc[k * slices + i] = pc;
                            vs[k * slices + i] = ps;
                        }
                    }
                }
            }

            for k in 0..k_count {
                let pc = &vc[k * slices..(k + 1) * slices];
                let ps = &vs[k * slices..(k + 1) * slices];
                if periodogram {
                    let mut acc = KahanSum::default();
                    for (&a, &b) in pc.iter().zip(ps) {
                        acc.add(a * a + b * b);
                    }
                    out.push(2.0 / mn * acc.value());
                } else {
                    let (cc, ss, cs) = gram_of(
                        &cos_buf[k * t..(k + 1) * t],
                        &sin_buf[k * t..(k + 1) * t],
                    );
                    let det = cc * ss - cs * cs;
                    if !(det > threshold) {
                        out.push(f64::NAN);
                        continue;
                    }
                    let mut acc = KahanSum::default();
                    for (j, (&a, &b)) in pc.iter().zip(ps).enumerate() {
                        let r = self.slice_energy[j] - fitted_energy(cc, ss, cs, det, a, b);
                        acc.add(r.max(0.0));
                    }
                    out.push(acc.value());
                }
            }
        }
    }
}

/// `R1(freq, rate)`: sum over grid columns of the residual against the
/// length-`M` basis. Minimized over pairs to estimate `(alpha, beta)`.
pub fn reduced_criterion_cols(grid: &SignalGrid, pair: NonlinearPair) -> Result<f64> {
    AxisEvaluator::new(grid, Axis::Columns).reduced(pair)
}

/// `R2(freq, rate)`: row-wise mirror of [`reduced_criterion_cols`],
/// estimating `(gamma, delta)`.
pub fn reduced_criterion_rows(grid: &SignalGrid, pair: NonlinearPair) -> Result<f64> {
    AxisEvaluator::new(grid, Axis::Rows).reduced(pair)
}

/// `I1(freq, rate)`: periodogram-type function over columns; maximized to
/// estimate `(alpha, beta)`.
pub fn periodogram_cols(grid: &SignalGrid, pair: NonlinearPair) -> Result<f64> {
    AxisEvaluator::new(grid, Axis::Columns).periodogram(pair)
}

/// `I2(freq, rate)`: periodogram-type function over rows.
pub fn periodogram_rows(grid: &SignalGrid, pair: NonlinearPair) -> Result<f64> {
    AxisEvaluator::new(grid, Axis::Rows).periodogram(pair)
}
