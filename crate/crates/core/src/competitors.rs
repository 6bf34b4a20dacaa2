//! Conventional connectivity estimators used as comparison baselines:
//! whole-series Pearson, task-restricted Pearson, beta-series regression and
//! Welch coherence. Each yields a per-subject value in `[0, 1]` plus mean
//! and median population aggregates.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PtfcError, Result};
use crate::exec::Execution;
use crate::linalg::least_squares;
use crate::ptfce::BoldPanel;
use crate::signal::{canonical_hrf, circular_convolve, FrequencyBand, HrfSpec, SampledSignal};
use crate::stats::{mean, median, pearson};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NaivePearson,
    TaskPearson,
    BetaSeries,
    Coherence,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::NaivePearson, Method::TaskPearson, Method::BetaSeries, Method::Coherence];

    pub fn name(self) -> &'static str {
        match self {
            Method::NaivePearson => "naive_pearson",
            Method::TaskPearson => "task_pearson",
            Method::BetaSeries => "beta_series",
            Method::Coherence => "coherence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodEstimate {
    pub method: Method,
    /// One entry per subject; `None` marks a subject excluded as degenerate.
    pub per_subject: Vec<Option<f64>>,
    pub mean_aggregate: f64,
    pub median_aggregate: f64,
    /// Indices of excluded subjects.
    pub excluded: Vec<usize>,
}

impl MethodEstimate {
    fn from_values(method: Method, per_subject: Vec<Option<f64>>) -> Result<Self> {
        let kept: Vec<f64> = per_subject.iter().flatten().copied().collect();
        let excluded: Vec<usize> =
            per_subject.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i).collect();
        if kept.is_empty() {
            return Err(PtfcError::EstimationFailed(format!(
                "{}: every subject is degenerate",
                method.name()
            )));
        }
        Ok(Self {
            method,
            mean_aggregate: mean(&kept),
            median_aggregate: median(&kept).expect("non-empty"),
            per_subject,
            excluded,
        })
    }
}

fn pair_indices(panel: &BoldPanel, k: &str, l: &str) -> Result<(usize, usize)> {
    let ki = panel.node_index(k)?;
    let li = panel.node_index(l)?;
    if ki == li {
        return Err(invalid(format!("node pair must be distinct, got {k},{l}")));
    }
    Ok((ki, li))
}

fn abs_corr(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(a, b).map(f64::abs)
}

/// |Pearson correlation| over the whole series, per subject.
pub fn naive_pearson(panel: &BoldPanel, k: &str, l: &str, exec: Execution) -> Result<MethodEstimate> {
    let (ki, li) = pair_indices(panel, k, l)?;
    let values = exec.map_indexed(panel.n_subjects(), |w| abs_corr(panel.series(w, ki), panel.series(w, li)));
    MethodEstimate::from_values(Method::NaivePearson, values)
}

/// |Pearson correlation| restricted to samples where the stimulus is on.
pub fn task_pearson(
    panel: &BoldPanel,
    k: &str,
    l: &str,
    stimulus: &SampledSignal,
    exec: Execution,
) -> Result<MethodEstimate> {
    let (ki, li) = pair_indices(panel, k, l)?;
    if stimulus.grid() != panel.grid() {
        return Err(invalid("stimulus and panel use different grids"));
    }
    let active: Vec<usize> =
        stimulus.values().iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(t, _)| t).collect();
    if active.len() < 3 {
        return Err(invalid(format!("task Pearson needs at least 3 active samples, got {}", active.len())));
    }
    let values = exec.map_indexed(panel.n_subjects(), |w| {
        let a: Vec<f64> = active.iter().map(|&t| panel.series(w, ki)[t]).collect();
        let b: Vec<f64> = active.iter().map(|&t| panel.series(w, li)[t]).collect();
        abs_corr(&a, &b)
    });
    MethodEstimate::from_values(Method::TaskPearson, values)
}

/// Maximal runs of active samples as `(first, last)` index pairs. A run
/// touching both ends of the grid wraps around and counts once.
pub fn active_blocks(stimulus: &SampledSignal) -> Vec<(usize, usize)> {
    let v = stimulus.values();
    let n = v.len();
    let mut blocks = Vec::new();
    let mut t = 0;
    while t < n {
        if v[t] > 0.0 {
            let start = t;
            while t + 1 < n && v[t + 1] > 0.0 {
                t += 1;
            }
            blocks.push((start, t));
        }
        t += 1;
    }
    if blocks.len() > 1 && blocks[0].0 == 0 && blocks.last().unwrap().1 == n - 1 {
        let (_, end) = blocks.remove(0);
        blocks.last_mut().unwrap().1 = end;
    }
    blocks
}

fn block_design(stimulus: &SampledSignal, hrf: &HrfSpec, blocks: &[(usize, usize)]) -> Result<Vec<Vec<f64>>> {
    let grid = *stimulus.grid();
    let h = canonical_hrf(hrf, &grid)?;
    let n = grid.num_points();
    let mut columns = vec![vec![1.0; n]];
    for &(start, end) in blocks {
        let inside = |t: usize| if start <= end { start <= t && t <= end } else { t >= start || t <= end };
        let boxcar = SampledSignal::from_fn(grid, |t| if inside(t) { stimulus.values()[t] } else { 0.0 })?;
        columns.push(circular_convolve(&boxcar, &h)?.into_values());
    }
    Ok(columns)
}

/// Per-block response amplitudes of `series` under `design`, intercept dropped.
fn block_betas(design: &[Vec<f64>], series: &[f64], blocks: &[(usize, usize)], delta: f64) -> Result<Vec<f64>> {
    let m = mean(series);
    let y: Vec<f64> = series.iter().map(|v| v - m).collect();
    let coef = least_squares(design, &y, |j| {
        if j == 0 {
            "intercept".to_string()
        } else {
            let (s, e) = blocks[j - 1];
            format!("block {j} ({:.2}-{:.2} s)", s as f64 * delta, e as f64 * delta)
        }
    })?;
    Ok(coef[1..].to_vec())
}

/// Beta-series connectivity: |corr| between the per-block amplitude
/// sequences of the two nodes. With two blocks every fit gives 1.
pub fn beta_series(
    panel: &BoldPanel,
    k: &str,
    l: &str,
    stimulus: &SampledSignal,
    hrf_k: &HrfSpec,
    hrf_l: &HrfSpec,
    exec: Execution,
) -> Result<MethodEstimate> {
    let (ki, li) = pair_indices(panel, k, l)?;
    if stimulus.grid() != panel.grid() {
        return Err(invalid("stimulus and panel use different grids"));
    }
    let blocks = active_blocks(stimulus);
    if blocks.len() < 2 {
        return Err(invalid(format!("beta series needs at least 2 task blocks, got {}", blocks.len())));
    }
    let delta = panel.grid().delta();
    let design_k = block_design(stimulus, hrf_k, &blocks)?;
    let design_l = block_design(stimulus, hrf_l, &blocks)?;
    let values = exec.try_map_indexed(panel.n_subjects(), |w| -> Result<Option<f64>> {
        let bk = block_betas(&design_k, panel.series(w, ki), &blocks, delta)?;
        let bl = block_betas(&design_l, panel.series(w, li), &blocks, delta)?;
        Ok(abs_corr(&bk, &bl))
    })?;
    MethodEstimate::from_values(Method::BetaSeries, values)
}

/// Welch settings for [`coherence_fc`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchSettings {
    pub segment_len: usize,
    pub overlap: usize,
}

impl WelchSettings {
    /// Segments of `min(128, n/2)` samples with 50% overlap.
    pub fn for_length(n: usize) -> Self {
        let segment_len = 128.min(n / 2);
        Self { segment_len, overlap: segment_len / 2 }
    }

    pub fn n_segments(&self, n: usize) -> usize {
        let hop = self.segment_len - self.overlap;
        if self.segment_len == 0 || hop == 0 || n < self.segment_len {
            return 0;
        }
        (n - self.segment_len) / hop + 1
    }
}

/// Magnitude coherence `|S_xy| / sqrt(S_xx S_yy)` at the segment harmonics
/// inside `band`; harmonics with a vanishing auto-spectrum give `None`.
pub fn welch_coherence(
    x: &[f64],
    y: &[f64],
    delta: f64,
    band: &FrequencyBand,
    settings: WelchSettings,
) -> Result<Vec<(f64, Option<f64>)>> {
    if x.len() != y.len() {
        return Err(invalid("coherence inputs differ in length"));
    }
    let n = x.len();
    let len = settings.segment_len;
    let segments = settings.n_segments(n);
    if segments < 2 {
        return Err(invalid(format!(
            "coherence needs at least 2 Welch segments; length {n} with segment {len} gives {segments}"
        )));
    }
    let hop = len - settings.overlap;
    let window: Vec<f64> = (0..len).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos()).collect();
    let harmonics: Vec<usize> =
        (1..=len / 2).filter(|&j| band.contains(j as f64 / (len as f64 * delta))).collect();
    if harmonics.is_empty() {
        return Err(PtfcError::EmptyBand { lower: band.lower, upper: band.upper });
    }
    let mut sxx = vec![0.0; harmonics.len()];
    let mut syy = vec![0.0; harmonics.len()];
    let mut sxy = vec![Complex64::new(0.0, 0.0); harmonics.len()];
    for s in 0..segments {
        let seg = |v: &[f64]| -> Vec<f64> {
            let part = &v[s * hop..s * hop + len];
            let m = mean(part);
            part.iter().zip(&window).map(|(a, w)| (a - m) * w).collect()
        };
        let (xs, ys) = (seg(x), seg(y));
        for (i, &j) in harmonics.iter().enumerate() {
            let fx = segment_dft(&xs, j);
            let fy = segment_dft(&ys, j);
            sxx[i] += fx.norm_sqr();
            syy[i] += fy.norm_sqr();
            sxy[i] += fx * fy.conj();
        }
    }
    let scale = 1e-14 * (sxx.iter().chain(&syy).fold(0.0f64, |a, &b| a.max(b))).max(f64::MIN_POSITIVE);
    Ok(harmonics
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let xi = j as f64 / (len as f64 * delta);
            let denom = (sxx[i] * syy[i]).sqrt();
            let value = if sxx[i] <= scale || syy[i] <= scale { None } else { Some((sxy[i].norm() / denom).min(1.0)) };
            (xi, value)
        })
        .collect())
}

fn segment_dft(values: &[f64], harmonic: usize) -> Complex64 {
    let len = values.len();
    values
        .iter()
        .enumerate()
        .map(|(t, &v)| {
            let phase = -2.0 * PI * ((harmonic * t) % len) as f64 / len as f64;
            Complex64::from_polar(v, phase)
        })
        .sum()
}

/// Per-subject band median of the Welch coherence between two nodes.
pub fn coherence_fc(
    panel: &BoldPanel,
    k: &str,
    l: &str,
    band: &FrequencyBand,
    exec: Execution,
) -> Result<MethodEstimate> {
    let (ki, li) = pair_indices(panel, k, l)?;
    let n = panel.grid().num_points();
    if n < 64 {
        return Err(invalid(format!("coherence needs series of at least 64 samples, got {n}")));
    }
    let settings = WelchSettings::for_length(n);
    let delta = panel.grid().delta();
    let values = exec.try_map_indexed(panel.n_subjects(), |w| -> Result<Option<f64>> {
        let curve = welch_coherence(panel.series(w, ki), panel.series(w, li), delta, band, settings)?;
        let kept: Vec<f64> = curve.into_iter().filter_map(|(_, v)| v).collect();
        Ok(median(&kept))
    })?;
    MethodEstimate::from_values(Method::Coherence, values)
}

/// Subject-averaged Welch coherence curve between two nodes. Subjects
/// with a vanishing auto-spectrum at a frequency are left out of that
/// frequency's average.
pub fn coherence_curve(
    panel: &BoldPanel,
    k: &str,
    l: &str,
    band: &FrequencyBand,
    exec: Execution,
) -> Result<Vec<(f64, Option<f64>)>> {
    let (ki, li) = pair_indices(panel, k, l)?;
    let settings = WelchSettings::for_length(panel.grid().num_points());
    let delta = panel.grid().delta();
    let curves = exec.try_map_indexed(panel.n_subjects(), |w| {
        welch_coherence(panel.series(w, ki), panel.series(w, li), delta, band, settings)
    })?;
    Ok((0..curves[0].len())
        .map(|i| {
            let kept: Vec<f64> = curves.iter().filter_map(|c| c[i].1).collect();
            (curves[0][i].0, (!kept.is_empty()).then(|| mean(&kept)))
        })
        .collect())
}

/// Runs `method` with the arguments it needs.
#[allow(clippy::too_many_arguments)]
pub fn run_method(
    method: Method,
    panel: &BoldPanel,
    k: &str,
    l: &str,
    stimulus: &SampledSignal,
    hrf_k: &HrfSpec,
    hrf_l: &HrfSpec,
    band: &FrequencyBand,
    exec: Execution,
) -> Result<MethodEstimate> {
    match method {
        Method::NaivePearson => naive_pearson(panel, k, l, exec),
        Method::TaskPearson => task_pearson(panel, k, l, stimulus, exec),
        Method::BetaSeries => beta_series(panel, k, l, stimulus, hrf_k, hrf_l, exec),
        Method::Coherence => coherence_fc(panel, k, l, band, exec),
    }
}
