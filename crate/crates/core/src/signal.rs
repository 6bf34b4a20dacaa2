//! Sampling grid, periodic signals and the normalized circular transforms
//! every estimator in this crate is built on.
//!
//! Signals live on the closed lattice `{τΔ : τ = 0..=T}` and are treated as
//! periodic with period `T + 1` samples. Convolution and the Fourier
//! transform both carry a `1/(T+1)` normalization:
//!
//! ```text
//! (f * g)(τΔ) = 1/(T+1) Σ_τ' f(τ'Δ) g((τ-τ')Δ)
//! f̂(ξ)        = 1/(T+1) Σ_τ  f(τΔ) exp(-2πi ξ τΔ)
//! ```
//!
//! so that `(f * g)^ = f̂ ĝ` holds exactly at the Fourier grid frequencies.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, PtfcError, Result};

/// Uniform sampling lattice with circular index arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    delta: f64,
    num_points: usize,
}

impl Default for TimeGrid {
    /// 284 samples at 0.72 s.
    fn default() -> Self {
        Self { delta: 0.72, num_points: 284 }
    }
}

impl TimeGrid {
    pub fn new(delta: f64, num_points: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(invalid(format!("sampling interval must be positive, got {delta}")));
        }
        if num_points < 2 {
            return Err(invalid(format!("a time grid needs at least 2 points, got {num_points}")));
        }
        Ok(Self { delta, num_points })
    }

    /// Seconds between samples.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of samples, `T + 1`.
    pub fn num_points(&self) -> usize {
        self.num_points
    }

    /// Largest sample index `T`.
    pub fn last_index(&self) -> usize {
        self.num_points - 1
    }

    /// Length of one period in seconds, `(T + 1)Δ`.
    pub fn period(&self) -> f64 {
        self.num_points as f64 * self.delta
    }

    /// Fundamental frequency `1/((T+1)Δ)` in Hz.
    pub fn fundamental(&self) -> f64 {
        1.0 / self.period()
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.delta
    }

    /// Maps any integer index onto `0..=T`.
    pub fn wrap(&self, index: i64) -> usize {
        index.rem_euclid(self.num_points as i64) as usize
    }

    pub fn time_at(&self, index: usize) -> f64 {
        index as f64 * self.delta
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_points).map(move |i| self.time_at(i))
    }
}

/// A real-valued function sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(invalid(format!(
                "signal has {} values but the grid has {} points",
                values.len(),
                grid.num_points()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("signal value at index {i} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: vec![0.0; grid.num_points()] }
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.num_points()] }
    }

    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(usize) -> f64) -> Result<Self> {
        let values = (0..grid.num_points()).map(&mut f).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_vec_unchecked(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_points());
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at any integer index, with periodic extension.
    pub fn at(&self, index: i64) -> f64 {
        self.values[self.grid.wrap(index)]
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        ensure_same_grid(self, other)?;
        Ok(Self::from_vec_unchecked(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        ensure_same_grid(self, other)?;
        Ok(Self::from_vec_unchecked(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn demeaned(&self) -> Self {
        let m = time_average(self);
        self.map(|v| v - m)
    }

    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }
}

pub(crate) fn ensure_same_grid(a: &SampledSignal, b: &SampledSignal) -> Result<()> {
    if a.grid != b.grid {
        return Err(invalid(format!(
            "signals live on different grids ({:?} vs {:?})",
            a.grid, b.grid
        )));
    }
    Ok(())
}

/// Double-gamma hemodynamic response parameters.
///
/// The response is a difference of two gamma densities with shapes `a1`, `a2`
/// and rates `b1`, `b2` (per second):
///
/// ```text
/// h(t) = b1^a1 t^(a1-1) e^(-b1 t) / Γ(a1) - c · b2^a2 t^(a2-1) e^(-b2 t) / Γ(a2)
/// ```
///
/// shifted right by `latency` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrfSpec {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    /// Onset delay in seconds; must be an integer multiple of the grid's Δ.
    #[serde(default)]
    pub latency: f64,
}

impl HrfSpec {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64, c: f64, latency: f64) -> Result<Self> {
        let spec = Self { a1, a2, b1, b2, c, latency };
        spec.validate()?;
        Ok(spec)
    }

    /// Defaults of the widely used canonical double-gamma response
    /// (`a1=6, a2=12, b1=b2=0.9, c=0.35`, zero latency).
    pub fn canonical() -> Self {
        Self { a1: 6.0, a2: 12.0, b1: 0.9, b2: 0.9, c: 0.35, latency: 0.0 }
    }

    pub fn with_latency(mut self, latency: f64) -> Self {
        self.latency = latency;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("a1", self.a1), ("a2", self.a2), ("b1", self.b1), ("b2", self.b2)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("HRF parameter {name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.c) {
            return Err(invalid(format!("HRF undershoot ratio c must lie in [0, 1], got {}", self.c)));
        }
        if !self.latency.is_finite() {
            return Err(invalid("HRF latency must be finite"));
        }
        Ok(())
    }

    /// Latency expressed in samples. Fails unless it is an integer multiple of Δ.
    pub fn latency_samples(&self, grid: &TimeGrid) -> Result<i64> {
        let steps = self.latency / grid.delta();
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-9 * steps.abs().max(1.0) {
            return Err(invalid(format!(
                "latency {} s is not a multiple of the sampling interval {} s",
                self.latency,
                grid.delta()
            )));
        }
        Ok(rounded as i64)
    }

    /// Continuous-time response at `t` seconds after onset (no latency applied).
    pub fn response(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        gamma_density(t, self.a1, self.b1) - self.c * gamma_density(t, self.a2, self.b2)
    }
}

impl Default for HrfSpec {
    fn default() -> Self {
        Self::canonical()
    }
}

fn gamma_density(t: f64, shape: f64, rate: f64) -> f64 {
    // log form keeps large shapes (a2 = 14) from overflowing
    let log = shape * rate.ln() + (shape - 1.0) * t.ln() - rate * t - gamma(shape).ln();
    log.exp()
}

/// Frequency band `(lower, upper)` in Hz, open at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub lower: f64,
    pub upper: f64,
}

impl FrequencyBand {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower >= 0.0 && lower < upper) {
            return Err(invalid(format!("invalid frequency band ({lower}, {upper})")));
        }
        Ok(Self { lower, upper })
    }

    /// The conventional hemodynamic pass band (0, 0.15) Hz.
    pub fn hemodynamic() -> Self {
        Self { lower: 0.0, upper: 0.15 }
    }

    pub fn validate_for(&self, grid: &TimeGrid) -> Result<()> {
        if self.upper > grid.nyquist() + 1e-12 {
            return Err(invalid(format!(
                "band upper edge {} Hz exceeds the Nyquist frequency {} Hz",
                self.upper,
                grid.nyquist()
            )));
        }
        Ok(())
    }

    pub fn contains(&self, xi: f64) -> bool {
        self.lower < xi && xi < self.upper
    }
}

impl Default for FrequencyBand {
    fn default() -> Self {
        Self::hemodynamic()
    }
}

/// A half-open stimulus interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub const fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Indicator of a union of disjoint half-open intervals, sampled at `τΔ`.
pub fn boxcar_stimulus(intervals: &[Interval], grid: &TimeGrid) -> Result<SampledSignal> {
    let mut sorted = intervals.to_vec();
    for iv in &sorted {
        if !(iv.start.is_finite() && iv.end.is_finite()) || iv.start >= iv.end {
            return Err(invalid(format!("interval [{}, {}) is empty or not finite", iv.start, iv.end)));
        }
        if iv.start < 0.0 || iv.end > grid.period() + 1e-9 {
            return Err(invalid(format!(
                "interval [{}, {}) lies outside [0, {})",
                iv.start,
                iv.end,
                grid.period()
            )));
        }
    }
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(invalid(format!(
                "intervals [{}, {}) and [{}, {}) overlap",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )));
        }
    }
    Ok(SampledSignal::from_vec_unchecked(
        *grid,
        grid.times()
            .map(|t| if sorted.iter().any(|iv| iv.contains(t)) { 1.0 } else { 0.0 })
            .collect(),
    ))
}

/// Samples the double-gamma response on the grid, delayed by its latency.
///
/// The latency shift is circular, consistent with the periodic extension of
/// all signals on the grid.
pub fn canonical_hrf(spec: &HrfSpec, grid: &TimeGrid) -> Result<SampledSignal> {
    spec.validate()?;
    let lag = spec.latency_samples(grid)?;
    let base = SampledSignal::new(*grid, grid.times().map(|t| spec.response(t)).collect())?;
    Ok(if lag == 0 { base } else { circular_shift(&base, lag) })
}

/// Normalized circular convolution `1/(T+1) Σ f(τ') g(τ - τ')`.
pub fn circular_convolve(f: &SampledSignal, g: &SampledSignal) -> Result<SampledSignal> {
    ensure_same_grid(f, g)?;
    let n = f.len();
    let norm = 1.0 / n as f64;
    let mut out = vec![0.0; n];
    for (j, &fj) in f.values.iter().enumerate() {
        if fj == 0.0 {
            continue;
        }
        // out[i] += f[j] g[i - j]
        for (i, o) in out.iter_mut().enumerate() {
            let k = if i >= j { i - j } else { i + n - j };
            *o += fj * g.values[k];
        }
    }
    for o in &mut out {
        *o *= norm;
    }
    Ok(SampledSignal::from_vec_unchecked(f.grid, out))
}

/// Normalized transform `1/(T+1) Σ f(τΔ) exp(-2πi ξ τΔ)` at an arbitrary frequency.
pub fn dft(f: &SampledSignal, xi: f64) -> Complex64 {
    dft_values(f.values(), f.grid.delta(), xi)
}

pub(crate) fn dft_values(values: &[f64], delta: f64, xi: f64) -> Complex64 {
    let n = values.len();
    // explicit angle per term avoids drift from repeated multiplication
    let mut acc = Complex64::new(0.0, 0.0);
    for (tau, &v) in values.iter().enumerate() {
        let angle = -2.0 * PI * xi * delta * tau as f64;
        acc += v * Complex64::new(angle.cos(), angle.sin());
    }
    acc / n as f64
}

/// Transform at the Fourier grid frequency `j/((T+1)Δ)`.
///
/// Uses the exact integer phase `2π jτ/(T+1)` reduced modulo the period, so
/// grid frequencies incur no phase rounding from large `ξτΔ` products.
pub fn dft_at_harmonic(values: &[f64], harmonic: usize) -> Complex64 {
    let n = values.len();
    let mut acc = Complex64::new(0.0, 0.0);
    let h = harmonic % n;
    for (tau, &v) in values.iter().enumerate() {
        let phase = (h * tau) % n;
        let angle = -2.0 * PI * phase as f64 / n as f64;
        acc += v * Complex64::new(angle.cos(), angle.sin());
    }
    acc / n as f64
}

/// A Fourier grid frequency: harmonic index `j` and its value in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrequency {
    pub harmonic: usize,
    pub hz: f64,
}

/// Harmonics `j/((T+1)Δ)` strictly inside the band, ascending.
pub fn fourier_grid(grid: &TimeGrid, band: &FrequencyBand) -> Result<Vec<GridFrequency>> {
    band.validate_for(grid)?;
    let fundamental = grid.fundamental();
    let freqs: Vec<GridFrequency> = (1..grid.num_points())
        .map(|j| GridFrequency { harmonic: j, hz: j as f64 * fundamental })
        .take_while(|f| f.hz < band.upper)
        .filter(|f| band.contains(f.hz))
        .collect();
    if freqs.is_empty() {
        return Err(PtfcError::EmptyBand { lower: band.lower, upper: band.upper });
    }
    Ok(freqs)
}

/// `out(τ) = f(τ - lag)` with circular indexing.
pub fn circular_shift(f: &SampledSignal, lag_samples: i64) -> SampledSignal {
    let n = f.len();
    let lag = f.grid.wrap(lag_samples);
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&f.values[n - lag..]);
    out.extend_from_slice(&f.values[..n - lag]);
    SampledSignal::from_vec_unchecked(f.grid, out)
}

/// Full-period time mean `1/(T+1) Σ f(τΔ)`.
pub fn time_average(f: &SampledSignal) -> f64 {
    mean(f.values())
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hcp_grid() -> TimeGrid {
        TimeGrid::new(0.72, 284).unwrap()
    }

    fn hcp_task() -> Vec<Interval> {
        vec![Interval::new(86.5, 98.5), Interval::new(162.0, 174.0)]
    }

    #[test]
    fn grid_construction() {
        let g = hcp_grid();
        assert_eq!(g.last_index(), 283);
        let minimal = TimeGrid::new(1.0, 2).unwrap();
        assert_eq!(minimal.last_index(), 1);
        assert!(matches!(TimeGrid::new(0.72, 0), Err(PtfcError::InvalidArgument(_))));
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
        assert_eq!(g.wrap(-1), 283);
        assert_eq!(g.wrap(284), 0);
        assert_eq!(g.wrap(569), 1);
    }

    #[test]
    fn boxcar_counts() {
        let g = hcp_grid();
        let n = boxcar_stimulus(&hcp_task(), &g).unwrap();
        // enumeration oracle
        let expected = (0..284)
            .filter(|&tau| {
                let t = tau as f64 * 0.72;
                (86.5..98.5).contains(&t) || (162.0..174.0).contains(&t)
            })
            .count();
        // τ = 121..=136 and τ = 225..=241
        assert_eq!(expected, 33);
        assert_eq!(n.values().iter().filter(|&&v| v == 1.0).count(), expected);

        let empty = boxcar_stimulus(&[], &g).unwrap();
        assert!(empty.values().iter().all(|&v| v == 0.0));

        let full = boxcar_stimulus(&[Interval::new(0.0, g.period())], &g).unwrap();
        assert!(full.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn boxcar_rejects_overlap_and_out_of_range() {
        let g = hcp_grid();
        let overlapping = [Interval::new(10.0, 20.0), Interval::new(15.0, 25.0)];
        assert!(matches!(boxcar_stimulus(&overlapping, &g), Err(PtfcError::InvalidArgument(_))));
        assert!(boxcar_stimulus(&[Interval::new(200.0, 300.0)], &g).is_err());
        // touching intervals are fine
        boxcar_stimulus(&[Interval::new(10.0, 20.0), Interval::new(20.0, 25.0)], &g).unwrap();
    }

    #[test]
    fn hrf_zero_at_onset_and_matches_closed_form() {
        let g = hcp_grid();
        let spec = HrfSpec::canonical();
        let h = canonical_hrf(&spec, &g).unwrap();
        assert_eq!(h.values()[0], 0.0);
        for (tau, &v) in h.values().iter().enumerate().skip(1) {
            let t = tau as f64 * 0.72;
            // direct evaluation with powers instead of logs
            let g1 = 0.9f64.powf(6.0) * t.powf(5.0) * (-0.9 * t).exp() / 120.0;
            let g2 = 0.9f64.powf(12.0) * t.powf(11.0) * (-0.9 * t).exp() / 39_916_800.0;
            assert_abs_diff_eq!(v, g1 - 0.35 * g2, epsilon = 1e-12);
        }
    }

    #[test]
    fn hrf_peak_location() {
        let spec = HrfSpec::new(4.0, 10.0, 0.8, 0.8, 0.4, 0.0).unwrap();
        let analytic_first_term_peak = (4.0 - 1.0) / 0.8;
        assert_abs_diff_eq!(analytic_first_term_peak, 3.75);
        // dense numeric search over the full expression
        let dense_peak = (1..200_000)
            .map(|i| i as f64 * 1e-4)
            .max_by(|a, b| spec.response(*a).total_cmp(&spec.response(*b)))
            .unwrap();
        let g = TimeGrid::new(0.1, 300).unwrap();
        let h = canonical_hrf(&spec, &g).unwrap();
        let argmax = h
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i as f64 * 0.1)
            .unwrap();
        assert!((argmax - dense_peak).abs() <= 0.1);
        assert!((dense_peak - 3.75).abs() < 0.5);
    }

    #[test]
    fn hrf_latency_is_a_circular_delay() {
        let g = hcp_grid();
        let base = canonical_hrf(&HrfSpec::canonical(), &g).unwrap();
        let delayed = canonical_hrf(&HrfSpec::canonical().with_latency(3.0 * 0.72), &g).unwrap();
        assert_eq!(delayed, circular_shift(&base, 3));
        assert!(canonical_hrf(&HrfSpec::canonical().with_latency(0.5), &g).is_err());
    }

    #[test]
    fn hrf_spec_validation() {
        assert!(HrfSpec::new(0.0, 12.0, 0.9, 0.9, 0.35, 0.0).is_err());
        assert!(HrfSpec::new(6.0, 12.0, 0.9, 0.9, 1.5, 0.0).is_err());
    }

    #[test]
    fn convolution_identity_and_averaging() {
        let g = TimeGrid::new(1.0, 5).unwrap();
        let impulse = SampledSignal::new(g, vec![5.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let x = SampledSignal::new(g, vec![1.0, -2.0, 0.5, 3.0, 4.0]).unwrap();
        let out = circular_convolve(&impulse, &x).unwrap();
        for (a, b) in out.values().iter().zip(x.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let ones = SampledSignal::constant(g, 1.0);
        let avg = circular_convolve(&ones, &x).unwrap();
        for v in avg.values() {
            assert_abs_diff_eq!(*v, time_average(&x), epsilon = 1e-15);
        }
    }

    #[test]
    fn convolution_small_case() {
        let g = TimeGrid::new(1.0, 5).unwrap();
        let f = SampledSignal::new(g, vec![1.0, 2.0, 0.0, 0.0, 0.0]).unwrap();
        let h = SampledSignal::new(g, vec![1.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
        let out = circular_convolve(&f, &h).unwrap();
        // hand-evaluated: f = δ0 + 2δ1, h = δ0 + 3δ2 → f*h ∝ δ0 + 2δ1 + 3δ2 + 6δ3
        let expected = [1.0, 2.0, 3.0, 6.0, 0.0].map(|v| v / 5.0);
        for (a, b) in out.values().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn convolution_grid_mismatch() {
        let a = SampledSignal::zeros(TimeGrid::new(1.0, 4).unwrap());
        let b = SampledSignal::zeros(TimeGrid::new(1.0, 5).unwrap());
        assert!(circular_convolve(&a, &b).is_err());
    }

    #[test]
    fn dft_constant_signal() {
        let g = TimeGrid::new(0.72, 284).unwrap();
        let f = SampledSignal::constant(g, 2.5);
        assert_abs_diff_eq!(dft(&f, 0.0).re, 2.5, epsilon = 1e-12);
        assert!(dft(&f, g.fundamental()).norm() < 1e-12);
        assert!(dft_at_harmonic(f.values(), 1).norm() < 1e-12);
    }

    #[test]
    fn fourier_grid_enumeration() {
        let g = hcp_grid();
        let freqs = fourier_grid(&g, &FrequencyBand::hemodynamic()).unwrap();
        assert_eq!(freqs.len(), 30);
        assert_eq!(freqs[0].harmonic, 1);
        assert_eq!(freqs[29].harmonic, 30);
        assert_abs_diff_eq!(freqs[29].hz, 30.0 / 204.48, epsilon = 1e-12);

        let narrow = FrequencyBand::new(0.0, g.fundamental()).unwrap();
        assert!(matches!(fourier_grid(&g, &narrow), Err(PtfcError::EmptyBand { .. })));

        let g9 = TimeGrid::new(1.0, 10).unwrap();
        let f = fourier_grid(&g9, &FrequencyBand::new(0.0, 0.25).unwrap()).unwrap();
        let hz: Vec<f64> = f.iter().map(|f| f.hz).collect();
        assert_eq!(hz.len(), 2);
        assert_abs_diff_eq!(hz[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(hz[1], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn shift_cases() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let f = SampledSignal::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(circular_shift(&f, 0), f);
        assert_eq!(circular_shift(&f, 4), f);
        assert_eq!(circular_shift(&f, 1).values(), &[4.0, 1.0, 2.0, 3.0]);
        assert_eq!(circular_shift(&f, -1).values(), &[2.0, 3.0, 4.0, 1.0]);
    }

    #[test]
    fn hcp_task_average() {
        let g = hcp_grid();
        let n = boxcar_stimulus(&hcp_task(), &g).unwrap();
        assert_abs_diff_eq!(time_average(&n), 33.0 / 284.0, epsilon = 1e-15);
        assert_abs_diff_eq!(time_average(&SampledSignal::constant(g, 3.0)), 3.0);
    }
}
