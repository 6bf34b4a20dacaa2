//! The population-level task-evoked FC estimator.
//!
//! For a node pair `(k, l)` the estimator
//!
//! 1. draws one uniform circular shift `U` per subject,
//! 2. extracts a reference signal `R̃` per subject and node with AMUSE,
//! 3. forms the subject-averaged autocovariance differences
//!    `A_kl(s) = Ȳ_kl(s) - R̃_kl(s)` (and `A_kk`, `A_ll`),
//! 4. evaluates `|Â_kl(ξ)| / sqrt(|Â_kk(ξ) Â_ll(ξ)|)` on the Fourier grid
//!    inside the band and reports the median.
//!
//! Per-subject work runs under the chosen [`Execution`] policy; sums over
//! subjects are always taken in subject order.

use std::collections::HashSet;

use rand::Rng;
use serde::Serialize;

use crate::amuse::{extract_reference_with, TaskRegressor};
use crate::error::{invalid, PtfcError, Result};
use crate::exec::Execution;
use crate::rng::{keyed_stream, StreamTag};
use crate::signal::{
    dft_at_harmonic, fourier_grid, FrequencyBand, GridFrequency, HrfSpec, SampledSignal, TimeGrid,
};
use crate::stats::lower_median;

/// Denominator magnitudes below this drop the frequency from the curve.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

/// Default AMUSE lag in samples.
pub const DEFAULT_LAG: i64 = 1;

/// BOLD observations: subjects × nodes × time points.
#[derive(Debug, Clone, PartialEq)]
pub struct BoldPanel {
    grid: TimeGrid,
    node_labels: Vec<String>,
    subject_ids: Vec<String>,
    /// Subject-major, then node, then time.
    data: Vec<f64>,
}

impl BoldPanel {
    pub fn new(
        grid: TimeGrid,
        node_labels: Vec<String>,
        subject_ids: Vec<String>,
        data: Vec<f64>,
    ) -> Result<Self> {
        let (n, k, t) = (subject_ids.len(), node_labels.len(), grid.num_points());
        if n < 2 {
            return Err(invalid(format!("a panel needs at least 2 subjects, got {n}")));
        }
        if k < 2 {
            return Err(invalid(format!("a panel needs at least 2 nodes, got {k}")));
        }
        if data.len() != n * k * t {
            return Err(invalid(format!(
                "panel data has {} values, expected {n} × {k} × {t}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let (s, rem) = (i / (k * t), i % (k * t));
            return Err(invalid(format!(
                "non-finite value for subject {} node {} at t{}",
                subject_ids[s],
                node_labels[rem / t],
                rem % t
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = node_labels.iter().find(|l| !seen.insert(*l)) {
            return Err(invalid(format!("duplicate node label {dup}")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = subject_ids.iter().find(|l| !seen.insert(*l)) {
            return Err(invalid(format!("duplicate subject id {dup}")));
        }
        Ok(Self { grid, node_labels, subject_ids, data })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_labels.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn node_index(&self, label: &str) -> Result<usize> {
        self.node_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| invalid(format!("unknown node label {label}")))
    }

    pub fn series(&self, subject: usize, node: usize) -> &[f64] {
        let t = self.grid.num_points();
        let start = (subject * self.n_nodes() + node) * t;
        &self.data[start..start + t]
    }

    pub fn signal(&self, subject: usize, node: usize) -> SampledSignal {
        SampledSignal::from_vec_unchecked(self.grid, self.series(subject, node).to_vec())
    }

    /// Applies `f` to every value of one node, across all subjects.
    pub fn map_node(&self, node: usize, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        let t = self.grid.num_points();
        for s in 0..self.n_subjects() {
            let start = (s * self.n_nodes() + node) * t;
            for v in &mut out.data[start..start + t] {
                *v = f(*v);
            }
        }
        out
    }

    /// Keeps a contiguous range of subjects.
    pub fn subjects(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let stride = self.n_nodes() * self.grid.num_points();
        Self::new(
            self.grid,
            self.node_labels.clone(),
            self.subject_ids[range.clone()].to_vec(),
            self.data[range.start * stride..range.end * stride].to_vec(),
        )
    }
}

/// One uniform circular shift per subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShiftAssignment {
    pub shifts: Vec<usize>,
    pub seed: u64,
}

/// Draws `n` shifts uniformly from `0..=T`; subject `i` always uses the
/// stream keyed by `(seed, i)`.
pub fn draw_shifts(n: usize, grid: &TimeGrid, seed: u64) -> Result<ShiftAssignment> {
    if n == 0 {
        return Err(invalid("at least one subject is required"));
    }
    let upper = grid.last_index();
    let shifts = (0..n)
        .map(|i| keyed_stream(seed, StreamTag::Shift, &[i as u64]).random_range(0..=upper))
        .collect();
    Ok(ShiftAssignment { shifts, seed })
}

/// Subject-averaged autocovariance difference over lags `s = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutocovDifference {
    #[serde(skip)]
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

/// `A(s) = 1/(T+1) Σ_t [ 1/n Σ_ω Y_k(ω; t-U) Y_l(ω; t+s-U) ] - (same with R̃)`.
pub fn autocov_difference(
    yk: &[SampledSignal],
    yl: &[SampledSignal],
    rk: &[SampledSignal],
    rl: &[SampledSignal],
    shifts: &ShiftAssignment,
) -> Result<AutocovDifference> {
    let grid = match yk.first() {
        Some(s) => *s.grid(),
        None => return Err(invalid("no subjects supplied")),
    };
    for set in [yk, yl, rk, rl] {
        if set.iter().any(|s| *s.grid() != grid) {
            return Err(invalid("all signals must share one grid"));
        }
    }
    autocov_difference_slices(
        &grid,
        &view(yk),
        &view(yl),
        &view(rk),
        &view(rl),
        &shifts.shifts,
        Execution::Sequential,
    )
}

pub(crate) fn autocov_difference_slices(
    grid: &TimeGrid,
    yk: &[&[f64]],
    yl: &[&[f64]],
    rk: &[&[f64]],
    rl: &[&[f64]],
    shifts: &[usize],
    exec: Execution,
) -> Result<AutocovDifference> {
    let n = yk.len();
    if n == 0 {
        return Err(invalid("no subjects supplied"));
    }
    if [yl.len(), rk.len(), rl.len(), shifts.len()].iter().any(|&m| m != n) {
        return Err(invalid(format!(
            "subject counts differ: Y_k {n}, Y_l {}, R_k {}, R_l {}, shifts {}",
            yl.len(),
            rk.len(),
            rl.len(),
            shifts.len()
        )));
    }
    let len = grid.num_points();
    for series in [yk, yl, rk, rl] {
        if let Some(bad) = series.iter().position(|s| s.len() != len) {
            return Err(invalid(format!("subject {bad} has a series of the wrong length")));
        }
    }
    let per_subject = exec.map_indexed(n, |w| {
        subject_difference(yk[w], yl[w], rk[w], rl[w], shifts[w] % len)
    });
    let mut values = vec![0.0; len];
    for row in &per_subject {
        for (acc, v) in values.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let norm = 1.0 / (n as f64 * len as f64);
    for v in &mut values {
        *v *= norm;
    }
    Ok(AutocovDifference { grid: *grid, values })
}

/// `Σ_t Y_k(t-U) Y_l(t+s-U) - R̃_k(t-U) R̃_l(t+s-U)` for every lag `s`.
fn subject_difference(yk: &[f64], yl: &[f64], rk: &[f64], rl: &[f64], shift: usize) -> Vec<f64> {
    let n = yk.len();
    let wrap = |i: usize| if i >= n { i - n } else { i };
    let mut out = vec![0.0; n];
    for (s, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for t in 0..n {
            // t - U and t + s - U, both reduced into 0..n
            let a = wrap(t + n - shift);
            let b = wrap(a + s);
            acc += yk[a] * yl[b] - rk[a] * rl[b];
        }
        *o = acc;
    }
    out
}

/// One point of the spectral-ratio curve; `value` is `None` where the
/// denominator vanished.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub frequency: f64,
    pub value: Option<f64>,
}

/// `|Â_kl(ξ)| / sqrt(|Â_kk(ξ) Â_ll(ξ)|)` at each grid frequency.
pub fn spectral_ratio(
    akl: &AutocovDifference,
    akk: &AutocovDifference,
    all: &AutocovDifference,
    freqs: &[GridFrequency],
) -> Result<Vec<CurvePoint>> {
    if akl.grid != akk.grid || akl.grid != all.grid {
        return Err(invalid("autocovariance differences live on different grids"));
    }
    Ok(freqs
        .iter()
        .map(|f| {
            let num = dft_at_harmonic(&akl.values, f.harmonic).norm();
            let den = (dft_at_harmonic(&akk.values, f.harmonic) * dft_at_harmonic(&all.values, f.harmonic))
                .norm()
                .sqrt();
            let value = if den < DENOMINATOR_FLOOR { None } else { Some(num / den) };
            CurvePoint { frequency: f.hz, value }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PtfceOptions {
    pub band: FrequencyBand,
    pub lag: i64,
    pub execution: Execution,
}

impl Default for PtfceOptions {
    fn default() -> Self {
        Self { band: FrequencyBand::hemodynamic(), lag: DEFAULT_LAG, execution: Execution::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtfcEstimate {
    pub node_pair: (String, String),
    /// Median of the kept curve values (lower median for even counts).
    pub estimate: f64,
    pub curve: Vec<CurvePoint>,
    pub band: FrequencyBand,
    pub dropped_frequencies: usize,
    pub seed: u64,
    /// Subjects whose AMUSE eigenvalue gap fell below tolerance, per node.
    pub non_identifiable_subjects: (usize, usize),
}

/// Median of the kept curve values plus the drop count.
pub fn band_median(curve: &[CurvePoint]) -> Result<(f64, usize)> {
    let kept: Vec<f64> = curve.iter().filter_map(|p| p.value).filter(|v| v.is_finite()).collect();
    let dropped = curve.len() - kept.len();
    let est = lower_median(&kept)
        .ok_or_else(|| PtfcError::EstimationFailed("every band frequency was dropped".into()))?;
    Ok((est, dropped))
}

/// Per-node reference signals for every subject.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeReferences {
    pub references: Vec<Vec<f64>>,
    pub non_identifiable: usize,
}

/// Runs reference extraction for every subject of one node.
pub fn node_references(
    panel: &BoldPanel,
    node: usize,
    regressor: &TaskRegressor,
    shifts: &ShiftAssignment,
    lag: i64,
    exec: Execution,
) -> Result<NodeReferences> {
    if regressor.convolved().grid() != panel.grid() {
        return Err(invalid("stimulus and panel use different grids"));
    }
    let rows = exec.try_map_indexed(panel.n_subjects(), |w| {
        let bold = panel.signal(w, node);
        extract_reference_with(&bold, regressor, shifts.shifts[w] as i64, lag)
            .map(|r| (r.reference.into_values(), r.decomposition.is_some_and(|d| d.non_identifiable)))
            .map_err(|e| attach_subject(e, &panel.subject_ids()[w]))
    })?;
    let non_identifiable = rows.iter().filter(|r| r.1).count();
    Ok(NodeReferences { references: rows.into_iter().map(|r| r.0).collect(), non_identifiable })
}

fn attach_subject(err: PtfcError, subject: &str) -> PtfcError {
    match err {
        PtfcError::DegenerateInput(reason) => {
            PtfcError::SubjectDegenerate { subject: subject.to_string(), reason }
        }
        other => other,
    }
}

/// Curve and median from observed series and externally supplied references.
pub fn ptfce_from_references(
    grid: &TimeGrid,
    yk: &[&[f64]],
    yl: &[&[f64]],
    rk: &[&[f64]],
    rl: &[&[f64]],
    shifts: &ShiftAssignment,
    band: &FrequencyBand,
    exec: Execution,
) -> Result<(Vec<CurvePoint>, f64, usize)> {
    let freqs = fourier_grid(grid, band)?;
    let s = &shifts.shifts;
    let akl = autocov_difference_slices(grid, yk, yl, rk, rl, s, exec)?;
    let akk = autocov_difference_slices(grid, yk, yk, rk, rk, s, exec)?;
    let all = autocov_difference_slices(grid, yl, yl, rl, rl, s, exec)?;
    let curve = spectral_ratio(&akl, &akk, &all, &freqs)?;
    let (estimate, dropped) = band_median(&curve)?;
    Ok((curve, estimate, dropped))
}

fn view(signals: &[SampledSignal]) -> Vec<&[f64]> {
    signals.iter().map(SampledSignal::values).collect()
}

fn check_pair(panel: &BoldPanel, k: &str, l: &str) -> Result<(usize, usize)> {
    if k == l {
        return Err(invalid(format!("node pair must name two different nodes, got {k} twice")));
    }
    Ok((panel.node_index(k)?, panel.node_index(l)?))
}

fn node_view(panel: &BoldPanel, node: usize) -> Vec<&[f64]> {
    (0..panel.n_subjects()).map(|w| panel.series(w, node)).collect()
}

/// Estimates the task-evoked FC between nodes `k` and `l`.
#[allow(clippy::too_many_arguments)]
pub fn ptfce_estimate(
    panel: &BoldPanel,
    k: &str,
    l: &str,
    stimulus: &SampledSignal,
    hrf_k: &HrfSpec,
    hrf_l: &HrfSpec,
    seed: u64,
    options: &PtfceOptions,
) -> Result<PtfcEstimate> {
    let (ki, li) = check_pair(panel, k, l)?;
    if stimulus.grid() != panel.grid() {
        return Err(invalid("stimulus and panel use different grids"));
    }
    fourier_grid(panel.grid(), &options.band)?;
    let shifts = draw_shifts(panel.n_subjects(), panel.grid(), seed)?;
    let refs_k = node_references(
        panel,
        ki,
        &TaskRegressor::new(stimulus, hrf_k)?,
        &shifts,
        options.lag,
        options.execution,
    )?;
    let refs_l = node_references(
        panel,
        li,
        &TaskRegressor::new(stimulus, hrf_l)?,
        &shifts,
        options.lag,
        options.execution,
    )?;
    pair_estimate(panel, (ki, li), (&refs_k, &refs_l), &shifts, options)
}

fn pair_estimate(
    panel: &BoldPanel,
    (ki, li): (usize, usize),
    (refs_k, refs_l): (&NodeReferences, &NodeReferences),
    shifts: &ShiftAssignment,
    options: &PtfceOptions,
) -> Result<PtfcEstimate> {
    let rk: Vec<&[f64]> = refs_k.references.iter().map(Vec::as_slice).collect();
    let rl: Vec<&[f64]> = refs_l.references.iter().map(Vec::as_slice).collect();
    let (curve, estimate, dropped) = ptfce_from_references(
        panel.grid(),
        &node_view(panel, ki),
        &node_view(panel, li),
        &rk,
        &rl,
        shifts,
        &options.band,
        options.execution,
    )?;
    Ok(PtfcEstimate {
        node_pair: (panel.node_labels()[ki].clone(), panel.node_labels()[li].clone()),
        estimate,
        curve,
        band: options.band,
        dropped_frequencies: dropped,
        seed: shifts.seed,
        non_identifiable_subjects: (refs_k.non_identifiable, refs_l.non_identifiable),
    })
}

/// All-pairs estimates; failures leave `None` entries with the reason recorded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtfceMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub failures: Vec<PairFailure>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFailure {
    pub pair: (String, String),
    pub reason: String,
}

impl PtfceMatrix {
    pub fn get(&self, k: usize, l: usize) -> Option<f64> {
        self.values[k][l]
    }
}

/// Symmetric matrix of pairwise estimates with unit diagonal. References are
/// extracted once per node and shared across pairs.
pub fn ptfce_matrix(
    panel: &BoldPanel,
    stimulus: &SampledSignal,
    hrfs: &[HrfSpec],
    seed: u64,
    options: &PtfceOptions,
) -> Result<PtfceMatrix> {
    let k = panel.n_nodes();
    if hrfs.len() != k {
        return Err(invalid(format!("expected {k} HRF specs, got {}", hrfs.len())));
    }
    if stimulus.grid() != panel.grid() {
        return Err(invalid("stimulus and panel use different grids"));
    }
    fourier_grid(panel.grid(), &options.band)?;
    let shifts = draw_shifts(panel.n_subjects(), panel.grid(), seed)?;
    let refs: Vec<Result<NodeReferences>> = (0..k)
        .map(|node| {
            let reg = TaskRegressor::new(stimulus, &hrfs[node])?;
            node_references(panel, node, &reg, &shifts, options.lag, options.execution)
        })
        .collect();

    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let results = options.execution.map_indexed(pairs.len(), |p| {
        let (a, b) = pairs[p];
        match (&refs[a], &refs[b]) {
            (Ok(ra), Ok(rb)) => {
                let inner = PtfceOptions { execution: Execution::Sequential, ..*options };
                pair_estimate(panel, (a, b), (ra, rb), &shifts, &inner).map(|e| e.estimate)
            }
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        }
    });

    let labels = panel.node_labels().to_vec();
    let mut values = vec![vec![None; k]; k];
    let mut failures = Vec::new();
    for (i, row) in values.iter_mut().enumerate() {
        row[i] = Some(1.0);
    }
    for (&(a, b), res) in pairs.iter().zip(results) {
        match res {
            Ok(v) => {
                values[a][b] = Some(v);
                values[b][a] = Some(v);
            }
            Err(e) => failures.push(PairFailure {
                pair: (labels[a].clone(), labels[b].clone()),
                reason: e.to_string(),
            }),
        }
    }
    Ok(PtfceMatrix { labels, values, failures, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{circular_convolve, Interval};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn grid() -> TimeGrid {
        TimeGrid::new(0.72, 284).unwrap()
    }

    #[test]
    fn shifts_are_deterministic_and_in_range() {
        let g = grid();
        let a = draw_shifts(50, &g, 9).unwrap();
        assert_eq!(a, draw_shifts(50, &g, 9).unwrap());
        assert_ne!(a, draw_shifts(50, &g, 10).unwrap());
        let one = draw_shifts(1, &g, 3).unwrap();
        assert!(one.shifts[0] <= 283);
        assert!(draw_shifts(0, &g, 3).is_err());
        // prefix property: subject i's draw does not depend on n
        assert_eq!(draw_shifts(10, &g, 9).unwrap().shifts[..], a.shifts[..10]);
    }

    #[test]
    fn shifts_pass_chi_square_uniformity() {
        let g = grid();
        let s = draw_shifts(10_000, &g, 2024).unwrap();
        let mut counts = vec![0usize; 284];
        for &v in &s.shifts {
            counts[v] += 1;
        }
        let expected = 10_000.0 / 284.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // χ²(283) upper 0.001 quantile ≈ 367.8
        assert!(chi2 < 367.8, "chi2 = {chi2}");
    }

    fn random_signal(rng: &mut ChaCha8Rng, g: TimeGrid) -> SampledSignal {
        SampledSignal::from_fn(g, |_| StandardNormal.sample(rng)).unwrap()
    }

    #[test]
    fn identical_references_cancel() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<_> = (0..3).map(|_| random_signal(&mut rng, g)).collect();
        let shifts = draw_shifts(3, &g, 1).unwrap();
        let d = autocov_difference(&y, &y, &y, &y, &shifts).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_subject_matches_circular_autocorrelation() {
        let g = grid();
        let stim = crate::signal::boxcar_stimulus(
            &[Interval::new(86.5, 98.5), Interval::new(162.0, 174.0)],
            &g,
        )
        .unwrap();
        let h = crate::signal::canonical_hrf(&HrfSpec::canonical(), &g).unwrap();
        let x = circular_convolve(&stim, &h).unwrap();
        let zero = SampledSignal::zeros(g);
        let shifts = ShiftAssignment { shifts: vec![0], seed: 0 };
        let d = autocov_difference(
            std::slice::from_ref(&x),
            std::slice::from_ref(&x),
            std::slice::from_ref(&zero),
            std::slice::from_ref(&zero),
            &shifts,
        )
        .unwrap();
        for s in 0..284 {
            let mut direct = 0.0;
            for t in 0..284i64 {
                direct += x.at(t) * x.at(t + s as i64);
            }
            direct /= 284.0;
            assert!((d.values[s] - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_values_do_not_matter_with_external_references() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<_> = (0..5).map(|_| random_signal(&mut rng, g)).collect();
        let r: Vec<_> = (0..5).map(|_| random_signal(&mut rng, g)).collect();
        let a = autocov_difference(&y, &y, &r, &r, &draw_shifts(5, &g, 1).unwrap()).unwrap();
        let b = autocov_difference(&y, &y, &r, &r, &draw_shifts(5, &g, 99).unwrap()).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_subject_counts_rejected() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<_> = (0..3).map(|_| random_signal(&mut rng, g)).collect();
        let shifts = draw_shifts(3, &g, 1).unwrap();
        assert!(autocov_difference(&y, &y[..2], &y, &y, &shifts).is_err());
    }

    fn autocov(values: Vec<f64>, g: TimeGrid) -> AutocovDifference {
        AutocovDifference { grid: g, values }
    }

    #[test]
    fn ratio_of_equal_spectra_is_one() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = autocov(random_signal(&mut rng, g).into_values(), g);
        let freqs = fourier_grid(&g, &FrequencyBand::hemodynamic()).unwrap();
        let curve = spectral_ratio(&a, &a, &a, &freqs).unwrap();
        for p in curve {
            assert!((p.value.unwrap() - 1.0).abs() < 1e-12);
        }
        let zero = autocov(vec![0.0; 284], g);
        let curve = spectral_ratio(&zero, &a, &a, &freqs).unwrap();
        assert!(curve.iter().all(|p| p.value == Some(0.0)));
        let curve = spectral_ratio(&a, &zero, &a, &freqs).unwrap();
        assert!(curve.iter().all(|p| p.value.is_none()));
        assert!(band_median(&curve).is_err());
    }

    #[test]
    fn ratio_matches_direct_transform() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mk = |rng: &mut ChaCha8Rng| autocov(random_signal(rng, g).into_values(), g);
        let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        let freqs = fourier_grid(&g, &FrequencyBand::new(0.0, 0.5).unwrap()).unwrap();
        let curve = spectral_ratio(&a, &b, &c, &freqs).unwrap();
        let direct = |v: &[f64], xi: f64| {
            v.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &x)| {
                acc + x * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * xi * t as f64)
            }) / 16.0
        };
        for (p, f) in curve.iter().zip(&freqs) {
            let expect = direct(&a.values, f.hz).norm()
                / (direct(&b.values, f.hz) * direct(&c.values, f.hz)).norm().sqrt();
            assert!((p.value.unwrap() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn band_median_is_lower_median_of_kept_values() {
        let pts = [Some(0.4), None, Some(0.1), Some(0.3), Some(0.9)]
            .map(|value| CurvePoint { frequency: 0.0, value });
        assert_eq!(band_median(&pts).unwrap(), (0.3, 1));
    }

    fn toy_panel() -> BoldPanel {
        let g = TimeGrid::new(1.0, 4).unwrap();
        BoldPanel::new(
            g,
            vec!["A".into(), "B".into()],
            vec!["s1".into(), "s2".into()],
            (0..16).map(|v| v as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn panel_layout_and_validation() {
        let p = toy_panel();
        assert_eq!(p.series(1, 0), &[8.0, 9.0, 10.0, 11.0]);
        assert_eq!(p.node_index("B").unwrap(), 1);
        assert!(p.node_index("C").is_err());
        let g = *p.grid();
        let labels = vec!["A".to_string(), "A".to_string()];
        assert!(BoldPanel::new(g, labels, vec!["s1".into(), "s2".into()], vec![0.0; 16]).is_err());
        assert!(BoldPanel::new(g, vec!["A".into(), "B".into()], vec!["s1".into()], vec![0.0; 8]).is_err());
        let mut bad = vec![0.0; 16];
        bad[5] = f64::NAN;
        assert!(BoldPanel::new(g, vec!["A".into(), "B".into()], vec!["s1".into(), "s2".into()], bad).is_err());
    }

    #[test]
    fn same_node_pair_rejected() {
        let p = toy_panel();
        let stim = SampledSignal::new(*p.grid(), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let h = HrfSpec::canonical();
        let r = ptfce_estimate(&p, "A", "A", &stim, &h, &h, 1, &PtfceOptions::default());
        assert!(matches!(r, Err(PtfcError::InvalidArgument(_))));
    }
}
