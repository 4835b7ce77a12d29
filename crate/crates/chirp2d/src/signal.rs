//! Two-dimensional chirp signal model and synthesis.
//!
//! The observed signal is
//!
//! ```text
//! y(m,n) = sum_k [ A_k cos(phi_k(m,n)) + B_k sin(phi_k(m,n)) ] + X(m,n)
//! phi_k(m,n) = alpha_k m + beta_k m^2 + gamma_k n + delta_k n^2
//! ```
//!
//! for `m = 1..=M`, `n = 1..=N`, with mean-zero i.i.d. noise `X`.
//!
//! All formulas in this crate use 1-based indices `m`, `n` as written above;
//! storage is 0-based row-major and the conversion happens exactly once, at
//! the storage boundary. Mixing the two conventions is the classic source of
//! phase off-by-one bugs in this model, hence the hard rule.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// One chirp component: two amplitudes, two frequencies and two frequency
/// rates. Frequencies and rates of a signal component are expected to lie in
/// the open interval `(0, pi)`; this is checked by [`ModelSpec::validate`],
/// not at construction, so that probe values (e.g. zero phase) remain
/// expressible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpComponent {
    /// Cosine amplitude.
    #[serde(rename = "A")]
    pub a: f64,
    /// Sine amplitude.
    #[serde(rename = "B")]
    pub b: f64,
    /// Frequency along the row index `m` (rad/sample).
    pub alpha: f64,
    /// Frequency rate along `m` (rad/sample^2).
    pub beta: f64,
    /// Frequency along the column index `n` (rad/sample).
    pub gamma: f64,
    /// Frequency rate along `n` (rad/sample^2).
    pub delta: f64,
}

impl ChirpComponent {
    pub fn new(a: f64, b: f64, alpha: f64, beta: f64, gamma: f64, delta: f64) -> Self {
        Self { a, b, alpha, beta, gamma, delta }
    }

    /// Signal power `A^2 + B^2` of the component.
    pub fn power(&self) -> f64 {
        self.a * self.a + self.b * self.b
    }

    /// Evaluates the deterministic part of the component at 1-based `(m, n)`.
    pub fn sample(&self, m: usize, n: usize) -> f64 {
        let p = phase(self, m, n);
        self.a * p.cos() + self.b * p.sin()
    }
}

/// Quadratic phase `alpha*m + beta*m^2 + gamma*n + delta*n^2` at 1-based
/// indices `(m, n)`.
pub fn phase(c: &ChirpComponent, m: usize, n: usize) -> f64 {
    debug_assert!(m >= 1 && n >= 1, "phase uses 1-based indices");
    let mf = m as f64;
    let nf = n as f64;
    c.alpha * mf + c.beta * mf * mf + c.gamma * nf + c.delta * nf * nf
}

/// Supported noise families. The estimation theory needs only i.i.d. noise
/// with finite fourth moment; Gaussian is the one family implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
}

impl NoiseDistribution {
    fn is_default(&self) -> bool {
        *self == NoiseDistribution::Gaussian
    }
}

/// Noise specification: standard deviation, RNG seed and family.
///
/// The generator is ChaCha8 seeded through `seed_from_u64`, which is portable
/// across platforms and rand releases pinned by the lockfile. `sigma = 0`
/// means noiseless synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "NoiseDistribution::is_default")]
    pub distribution: NoiseDistribution,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self { sigma, seed, distribution: NoiseDistribution::Gaussian }
    }

    /// Noiseless synthesis (the seed is irrelevant but kept for determinism).
    pub fn none() -> Self {
        Self::gaussian(0.0, 0)
    }
}

/// A full model: an ordered list of components plus the noise contract.
///
/// The component order matters: the sequential estimator extracts components
/// strongest-first, so specs are expected to list components in strictly
/// decreasing power. Violations are reported as warnings by
/// [`ModelSpec::validate`], not errors, because the estimator degrades
/// gracefully rather than failing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub components: Vec<ChirpComponent>,
    pub noise: NoiseSpec,
}

/// Non-fatal findings from [`ModelSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ModelWarning {
    /// Component `index` is not strictly weaker than its predecessor.
    NonDecreasingPower { index: usize },
    /// Component `index` has `A^2 + B^2 = 0` and carries no signal.
    ZeroPower { index: usize },
}

impl std::fmt::Display for ModelWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelWarning::NonDecreasingPower { index } => write!(
                f,
                "component {index} is not strictly weaker than component {}; \
                 the sequential estimator assumes decreasing power",
                index - 1
            ),
            ModelWarning::ZeroPower { index } => {
                write!(f, "component {index} has zero power")
            }
        }
    }
}

impl ModelSpec {
    pub fn new(components: Vec<ChirpComponent>, noise: NoiseSpec) -> Self {
        Self { components, noise }
    }

    /// Number of components `p`.
    pub fn order(&self) -> usize {
        self.components.len()
    }

    /// Checks the model assumptions.
    ///
    /// Hard errors: empty component list, non-finite values, nonlinear
    /// parameters outside `(0, pi)`, duplicated (frequency, rate) pairs on
    /// either axis, `sigma < 0`. Power ordering violations come back as
    /// warnings.
    pub fn validate(&self) -> Result<Vec<ModelWarning>> {
        if self.components.is_empty() {
            return Err(Error::EmptyModel);
        }
        if !self.noise.sigma.is_finite() || self.noise.sigma < 0.0 {
            return Err(Error::NonFinite { what: "noise sigma (must be finite and >= 0)" });
        }
        for (i, c) in self.components.iter().enumerate() {
            for (name, v) in [("A", c.a), ("B", c.b)] {
                if !v.is_finite() {
                    return Err(Error::NonFinite { what: if name == "A" { "amplitude A" } else { "amplitude B" } });
                }
            }
            for (name, v) in [
                ("alpha", c.alpha),
                ("beta", c.beta),
                ("gamma", c.gamma),
                ("delta", c.delta),
            ] {
                if !v.is_finite() {
                    return Err(Error::NonFinite { what: "nonlinear parameter" });
                }
                if v <= 0.0 || v >= std::f64::consts::PI {
                    return Err(Error::OutOfDomain {
                        what: format!("component {i} {name}"),
                        value: v,
                    });
                }
            }
        }
        for i in 0..self.components.len() {
            for j in (i + 1)..self.components.len() {
                let (ci, cj) = (&self.components[i], &self.components[j]);
                if ci.alpha == cj.alpha && ci.beta == cj.beta {
                    return Err(Error::DuplicatePair { first: i, second: j, axis: "row-axis" });
                }
                if ci.gamma == cj.gamma && ci.delta == cj.delta {
                    return Err(Error::DuplicatePair { first: i, second: j, axis: "column-axis" });
                }
            }
        }
        let mut warnings = Vec::new();
        for (i, c) in self.components.iter().enumerate() {
            if c.power() == 0.0 {
                warnings.push(ModelWarning::ZeroPower { index: i });
            }
            if i > 0 && c.power() >= self.components[i - 1].power() {
                warnings.push(ModelWarning::NonDecreasingPower { index: i });
            }
        }
        Ok(warnings)
    }
}

/// An `M x N` real observation matrix.
///
/// Storage is 0-based row-major; `value(i, j)` is the observation the model
/// writes as `y(m, n)` with `m = i + 1`, `n = j + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SignalGrid {
    /// Builds a grid from row-major data. Every entry must be finite.
    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, actual: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "grid entry" });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Number of rows `M`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns `N`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// 0-based element access.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn value_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    /// Row `i` (0-based) as a contiguous slice; this is the vector the model
    /// writes as `Y_{m_0}` with `m_0 = i + 1`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` (0-based), copied out; the vector `Y_{n_0}` with
    /// `n_0 = j + 1`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.value(i, j)).collect()
    }

    /// Full row-major data.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transposed(&self) -> SignalGrid {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.value(i, j);
            }
        }
        SignalGrid { rows: self.cols, cols: self.rows, data }
    }

    /// Sum of squared entries.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Entrywise difference, used for residual inspection in tests.
    pub fn sub(&self, other: &SignalGrid) -> Result<SignalGrid> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::LengthMismatch { expected: self.data.len(), actual: other.data.len() });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(SignalGrid { rows: self.rows, cols: self.cols, data })
    }
}

/// Derives an independent sub-stream seed from a base seed and a list of
/// indices (SplitMix64 finalizer folded over the indices).
///
/// This is the documented stream-splitting rule for replicated experiments:
/// `split_seed(base, &[size_index, sigma_index, replication_index])` yields
/// the synthesis seed of one replication, so any cell of a replicated run can
/// be regenerated in isolation and runs are reproducible across platforms.
pub fn split_seed(base: u64, indices: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut state = mix(base ^ 0x9e37_79b9_7f4a_7c15);
    for &idx in indices {
        state = mix(state ^ idx.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    }
    state
}

/// Synthesizes an `M x N` observation grid from the model.
///
/// Entries are `sum_k [A_k cos(phi_k) + B_k sin(phi_k)] + X(m,n)` with the
/// noise drawn i.i.d. from the spec's generator in row-major order. The same
/// spec, dimensions and seed produce a bit-identical grid.
pub fn synthesize(spec: &ModelSpec, rows: usize, cols: usize) -> Result<SignalGrid> {
    if rows < 4 || cols < 4 {
        return Err(Error::GridTooSmall { rows, cols, min_rows: 4, min_cols: 4 });
    }
    if spec.components.is_empty() {
        return Err(Error::EmptyModel);
    }
    let mut grid = SignalGrid::zeros(rows, cols);
    for c in &spec.components {
        accumulate_component(&mut grid, c, 1.0);
    }
    if spec.noise.sigma > 0.0 {
        add_noise_in_place(&mut grid, &spec.noise)?;
    } else if spec.noise.sigma < 0.0 || !spec.noise.sigma.is_finite() {
        return Err(Error::NonFinite { what: "noise sigma (must be finite and >= 0)" });
    }
    Ok(grid)
}

/// Adds `A cos(phi) + B sin(phi)` (times `scale`) of one component onto a
/// grid. `scale = -1` subtracts a fitted component, which is how the
/// sequential estimator peels stages off the residual.
///
/// The separable phase is expanded as a product of row and column phasors,
/// `M + N` exact trig evaluations instead of `M * N`.
pub fn accumulate_component(grid: &mut SignalGrid, c: &ChirpComponent, scale: f64) {
    let (rows, cols) = (grid.rows(), grid.cols());
    let col_phasors: Vec<(f64, f64)> = (1..=cols)
        .map(|n| {
            let nf = n as f64;
            (c.gamma * nf + c.delta * nf * nf).sin_cos()
        })
        .collect();
    let (sa, sb) = (scale * c.a, scale * c.b);
    for i in 0..rows {
        let m = (i + 1) as f64;
        let (sm, cm) = (c.alpha * m + c.beta * m * m).sin_cos();
        let row = &mut grid.data[i * cols..(i + 1) * cols];
        for (slot, &(sn, cn)) in row.iter_mut().zip(&col_phasors) {
            // cos(pm + pn), sin(pm + pn) by angle addition
            let cos_p = cm * cn - sm * sn;
            let sin_p = sm * cn + cm * sn;
            *slot += sa * cos_p + sb * sin_p;
        }
    }
}

/// Returns `grid + X` with `X` drawn i.i.d. from the noise spec.
///
/// With `sigma = 0` the grid is returned unchanged.
pub fn add_noise(grid: &SignalGrid, noise: &NoiseSpec) -> Result<SignalGrid> {
    let mut out = grid.clone();
    if noise.sigma != 0.0 {
        add_noise_in_place(&mut out, noise)?;
    }
    Ok(out)
}

fn add_noise_in_place(grid: &mut SignalGrid, noise: &NoiseSpec) -> Result<()> {
    if !noise.sigma.is_finite() || noise.sigma < 0.0 {
        return Err(Error::NonFinite { what: "noise sigma (must be finite and >= 0)" });
    }
    let NoiseDistribution::Gaussian = noise.distribution;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = Normal::new(0.0, noise.sigma).expect("sigma checked non-negative");
    for slot in &mut grid.data {
        *slot += normal.sample(&mut rng);
    }
    Ok(())
}
