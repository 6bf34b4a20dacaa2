//! Two-channel AMUSE blind source separation and extraction of reference
//! (non task-evoked) signals from a BOLD trace.
//!
//! AMUSE whitens the channels with the lag-0 covariance, then diagonalizes
//! the symmetrized covariance of the whitened channels at a single lag. All
//! moments here are full-period circular averages of demeaned channels, so
//! the decomposition of a circularly shifted input is the shifted
//! decomposition.

use serde::Serialize;

use crate::error::{invalid, PtfcError, Result};
use crate::signal::{
    canonical_hrf, circular_convolve, circular_shift, ensure_same_grid, time_average, HrfSpec,
    SampledSignal,
};
use crate::stats::pearson;

/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

/// Eigenvalue gaps below this are reported as non-identifiable.
pub const EIGENVALUE_GAP_TOLERANCE: f64 = 1e-10;

/// Relative determinant `det / (c11 c22) = 1 - r²` below which the lag-0
/// covariance is treated as singular.
pub const SINGULARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmuseDecomposition {
    /// Maps sources to demeaned channels: `x = mixing · s`.
    pub mixing: Mat2,
    #[serde(skip)]
    pub sources: [SampledSignal; 2],
    /// Eigenvalues of the symmetrized whitened lagged covariance, descending.
    pub eigenvalues: [f64; 2],
    pub eigenvalue_gap: f64,
    /// Set when the eigenvalue gap is below [`EIGENVALUE_GAP_TOLERANCE`]; the
    /// sources are then not uniquely determined.
    pub non_identifiable: bool,
    pub lag: i64,
}

impl AmuseDecomposition {
    /// `mixing · sources`, i.e. the demeaned input channels.
    pub fn reconstruct(&self) -> [Vec<f64>; 2] {
        let a = &self.mixing;
        let (s1, s2) = (self.sources[0].values(), self.sources[1].values());
        let row = |i: usize| s1.iter().zip(s2).map(|(&u, &v)| a[i][0] * u + a[i][1] * v).collect();
        [row(0), row(1)]
    }
}

/// `(i, j) ↦ 1/(T+1) Σ_τ x_i(τ) x_j(τ + lag)` on demeaned channels, circular.
pub fn lagged_covariance(x1: &SampledSignal, x2: &SampledSignal, lag_samples: i64) -> Result<Mat2> {
    ensure_same_grid(x1, x2)?;
    let c1 = x1.demeaned();
    let c2 = x2.demeaned();
    Ok(lagged_cov_centered([c1.values(), c2.values()], lag_samples))
}

fn lagged_cov_centered(x: [&[f64]; 2], lag: i64) -> Mat2 {
    let n = x[0].len();
    let shift = lag.rem_euclid(n as i64) as usize;
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let (a, b) = (x[i], x[j]);
            let mut acc = 0.0;
            for t in 0..n {
                let k = if t + shift >= n { t + shift - n } else { t + shift };
                acc += a[t] * b[k];
            }
            *cell = acc / n as f64;
        }
    }
    out
}

/// Eigen-decomposition of a symmetric 2×2 matrix via one Jacobi rotation.
/// Returns eigenvalues and the matching unit eigenvectors as columns.
fn symmetric_eigen(m: &Mat2) -> ([f64; 2], Mat2) {
    let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    if b == 0.0 {
        return ([a, d], [[1.0, 0.0], [0.0, 1.0]]);
    }
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = theta.sin_cos();
    let l1 = c * c * a + 2.0 * s * c * b + s * s * d;
    let l2 = s * s * a - 2.0 * s * c * b + c * c * d;
    ([l1, l2], [[c, -s], [s, c]])
}

fn invert(m: &Mat2) -> Option<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

fn apply(m: &Mat2, x: [&[f64]; 2]) -> [Vec<f64>; 2] {
    let row = |i: usize| x[0].iter().zip(x[1]).map(|(&u, &v)| m[i][0] * u + m[i][1] * v).collect();
    [row(0), row(1)]
}

/// Separates two channels into two sources with distinct lag-`lag_samples`
/// autocorrelations.
///
/// Sources are ordered by descending eigenvalue, scaled to unit variance and
/// signed so their largest-magnitude sample is positive; the mixing columns
/// absorb the scale and sign.
pub fn amuse_decompose(
    x1: &SampledSignal,
    x2: &SampledSignal,
    lag_samples: i64,
) -> Result<AmuseDecomposition> {
    ensure_same_grid(x1, x2)?;
    if lag_samples < 1 {
        return Err(invalid(format!("AMUSE lag must be at least 1 sample, got {lag_samples}")));
    }
    let grid = *x1.grid();
    let c1 = x1.demeaned();
    let c2 = x2.demeaned();
    let centered = [c1.values(), c2.values()];

    let c0 = lagged_cov_centered(centered, 0);
    let det = c0[0][0] * c0[1][1] - c0[0][1] * c0[1][0];
    if !(c0[0][0] > 0.0 && c0[1][1] > 0.0) || det <= SINGULARITY_TOLERANCE * c0[0][0] * c0[1][1] {
        return Err(PtfcError::DegenerateInput(
            "lag-0 covariance of the two channels is singular".into(),
        ));
    }

    let (d, e) = symmetric_eigen(&c0);
    if d.iter().any(|&v| v <= 0.0) {
        return Err(PtfcError::DegenerateInput("lag-0 covariance is not positive definite".into()));
    }
    // whitening W = diag(d^-1/2) Eᵀ
    let et = transpose(&e);
    let whitening = [
        [et[0][0] / d[0].sqrt(), et[0][1] / d[0].sqrt()],
        [et[1][0] / d[1].sqrt(), et[1][1] / d[1].sqrt()],
    ];
    let z = apply(&whitening, centered);

    let m = lagged_cov_centered([&z[0], &z[1]], lag_samples);
    let (mut lambda, mut v) = symmetric_eigen(&m);
    if lambda[1] > lambda[0] {
        lambda.swap(0, 1);
        v = [[v[0][1], v[0][0]], [v[1][1], v[1][0]]];
    }
    let mut unmixing = matmul(&transpose(&v), &whitening);
    let raw = apply(&unmixing, centered);

    let mut sources = Vec::with_capacity(2);
    for (i, s) in raw.into_iter().enumerate() {
        let var = s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
        let peak = s.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        let factor = sign / var.sqrt();
        unmixing[i][0] *= factor;
        unmixing[i][1] *= factor;
        sources.push(SampledSignal::from_vec_unchecked(grid, s.into_iter().map(|x| x * factor).collect()));
    }
    let mixing = invert(&unmixing)
        .ok_or_else(|| PtfcError::DegenerateInput("AMUSE unmixing matrix is singular".into()))?;
    let gap = (lambda[0] - lambda[1]).abs();
    let s2 = sources.pop().expect("two sources");
    let s1 = sources.pop().expect("two sources");
    Ok(AmuseDecomposition {
        mixing,
        sources: [s1, s2],
        eigenvalues: lambda,
        eigenvalue_gap: gap,
        non_identifiable: gap < EIGENVALUE_GAP_TOLERANCE,
        lag: lag_samples,
    })
}

/// Index (0 or 1) of the source with the larger absolute correlation with
/// `regressor`; ties go to the first source.
pub fn select_task_source(decomp: &AmuseDecomposition, regressor: &SampledSignal) -> Result<usize> {
    ensure_same_grid(&decomp.sources[0], regressor)?;
    if regressor.is_constant() {
        return Err(invalid("task regressor is constant"));
    }
    let corr = |i: usize| {
        pearson(decomp.sources[i].values(), regressor.values()).map(f64::abs).unwrap_or(0.0)
    };
    Ok(if corr(1) > corr(0) { 1 } else { 0 })
}

/// The convolved task regressor `(N * h)(t - t0)` of one node, with its time
/// average `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRegressor {
    convolved: SampledSignal,
    average: f64,
}

impl TaskRegressor {
    pub fn new(stimulus: &SampledSignal, hrf: &HrfSpec) -> Result<Self> {
        let h = canonical_hrf(hrf, stimulus.grid())?;
        let convolved = circular_convolve(stimulus, &h)?;
        if convolved.is_constant() {
            return Err(invalid("task regressor is constant (is the stimulus all zero?)"));
        }
        let average = time_average(&convolved);
        Ok(Self { convolved, average })
    }

    pub fn convolved(&self) -> &SampledSignal {
        &self.convolved
    }

    pub fn average(&self) -> f64 {
        self.average
    }

    /// `(N * h)(t - t0 - shift) - C`.
    pub fn shifted_centered(&self, shift_samples: i64) -> SampledSignal {
        circular_shift(&self.convolved, shift_samples).map(|v| v - self.average)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceExtraction {
    /// Task-evoked component `J(t)` on the shifted time axis.
    pub task_component: SampledSignal,
    /// Estimated reference signal on the native time axis.
    pub reference: SampledSignal,
    pub shift_samples: i64,
    /// `None` when the BOLD channel is collinear with the regressor and the
    /// single-source projection was used instead of AMUSE.
    pub decomposition: Option<AmuseDecomposition>,
    pub task_source_index: usize,
}

/// Recovers the reference signal of one BOLD trace.
pub fn extract_reference(
    bold: &SampledSignal,
    stimulus: &SampledSignal,
    hrf: &HrfSpec,
    shift_samples: i64,
    lag_samples: i64,
) -> Result<ReferenceExtraction> {
    ensure_same_grid(bold, stimulus)?;
    let regressor = TaskRegressor::new(stimulus, hrf)?;
    extract_reference_with(bold, &regressor, shift_samples, lag_samples)
}

/// [`extract_reference`] with a precomputed regressor (shared by all subjects
/// of a node).
pub fn extract_reference_with(
    bold: &SampledSignal,
    regressor: &TaskRegressor,
    shift_samples: i64,
    lag_samples: i64,
) -> Result<ReferenceExtraction> {
    ensure_same_grid(bold, regressor.convolved())?;
    let shifted_bold = circular_shift(bold, shift_samples);
    let shifted_reg = regressor.shifted_centered(shift_samples);

    let (task_component, decomposition, index) =
        match amuse_decompose(&shifted_bold, &shifted_reg, lag_samples) {
            Ok(decomp) => {
                let i = select_task_source(&decomp, &shifted_reg)?;
                let a = decomp.mixing[0][i];
                (decomp.sources[i].scale(a), Some(decomp), i)
            }
            Err(PtfcError::DegenerateInput(reason)) => {
                let j = collinear_projection(&shifted_bold, &shifted_reg)
                    .ok_or(PtfcError::DegenerateInput(reason))?;
                (j, None, 0)
            }
            Err(e) => return Err(e),
        };
    let reference = bold.sub(&circular_shift(&task_component, -shift_samples))?;
    Ok(ReferenceExtraction {
        task_component,
        reference,
        shift_samples,
        decomposition,
        task_source_index: index,
    })
}

/// When the demeaned BOLD is an exact multiple of the centered regressor the
/// task component is the BOLD itself.
fn collinear_projection(bold: &SampledSignal, centered_reg: &SampledSignal) -> Option<SampledSignal> {
    let r = pearson(bold.values(), centered_reg.values())?;
    if 1.0 - r * r > SINGULARITY_TOLERANCE {
        return None;
    }
    let reg = centered_reg.values();
    let b = bold.demeaned();
    let num: f64 = b.values().iter().zip(reg).map(|(x, y)| x * y).sum();
    let den: f64 = reg.iter().map(|y| y * y).sum();
    Some(centered_reg.scale(num / den))
}
