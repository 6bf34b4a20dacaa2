//! Synthetic task-fMRI panels with known population connectivity.
//!
//! Three generating mechanisms are provided. Mechanisms 0 and 1 draw a
//! subject-level task amplitude per node from a multivariate normal whose
//! correlations are the target connectivity; Mechanism 2 instead correlates
//! the node noise during task blocks and has no subject amplitudes.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::linalg::{cholesky_psd, lower_mul};
use crate::ptfce::BoldPanel;
use crate::rng::{keyed_stream, StreamTag};
use crate::signal::{boxcar_stimulus, canonical_hrf, circular_convolve, HrfSpec, Interval, SampledSignal, TimeGrid};

pub const BASELINE: f64 = 9000.0;
pub const NOISE_VARIANCE: f64 = 30.0;
pub const NUISANCE_CORRELATION: f64 = 0.3;
/// Shortest grid period (seconds) that holds every standard stimulus block.
pub const MIN_SPAN_SECONDS: f64 = 204.0;

const TASK_BLOCKS: [(f64, f64); 2] = [(86.5, 98.5), (162.0, 174.0)];
const NUISANCE_BLOCKS: [[(f64, f64); 2]; 4] = [
    [(71.35, 83.35), (177.125, 189.125)],
    [(11.0, 23.0), (116.63, 128.63)],
    [(26.13, 38.13), (146.88, 158.88)],
    [(56.26, 68.26), (131.75, 143.75)],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    M0,
    M1,
    M2,
}

impl Mechanism {
    pub fn n_nodes(self) -> usize {
        match self {
            Mechanism::M0 => 2,
            Mechanism::M1 | Mechanism::M2 => 3,
        }
    }

    pub fn n_rho(self) -> usize {
        match self {
            Mechanism::M0 => 1,
            Mechanism::M1 | Mechanism::M2 => 2,
        }
    }

    /// Parses `0`, `1`, `2` or `m0`, `m1`, `m2`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_start_matches('m') {
            "0" => Ok(Mechanism::M0),
            "1" => Ok(Mechanism::M1),
            "2" => Ok(Mechanism::M2),
            _ => Err(invalid(format!("unknown mechanism {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub mechanism: Mechanism,
    pub n: usize,
    /// Target correlations: `[rho]` for M0, `[rho12, rho23]` for M1 and M2.
    pub rho: Vec<f64>,
    /// Multiplies the noise variance.
    pub noise_scale: f64,
    pub seed: u64,
    pub grid: TimeGrid,
    /// Negates the node-2 task amplitude, turning every node-2 coupling
    /// negative while leaving the connectivity magnitudes unchanged.
    #[serde(default)]
    pub negate_node2: bool,
}

impl MechanismConfig {
    pub fn new(mechanism: Mechanism, n: usize, rho: Vec<f64>, seed: u64) -> Self {
        Self {
            mechanism,
            n,
            rho,
            noise_scale: 1.0,
            seed,
            grid: TimeGrid::default(),
            negate_node2: false,
        }
    }

    pub fn with_noise_scale(mut self, lambda: f64) -> Self {
        self.noise_scale = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("need at least 2 subjects, got {}", self.n)));
        }
        if self.rho.len() != self.mechanism.n_rho() {
            return Err(invalid(format!(
                "mechanism {:?} takes {} correlation value(s), got {}",
                self.mechanism,
                self.mechanism.n_rho(),
                self.rho.len()
            )));
        }
        if let Some(r) = self.rho.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(invalid(format!("correlation {r} outside [0, 1)")));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(invalid(format!("noise scale must be finite and >= 0, got {}", self.noise_scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub panel: BoldPanel,
    /// Subject-major task amplitudes (`n` rows of `K`); absent for M2.
    pub latent_betas: Option<Vec<Vec<f64>>>,
    pub config: MechanismConfig,
}

#[derive(Debug, Clone)]
pub struct StandardStimuli {
    pub task: SampledSignal,
    pub nuisance: [SampledSignal; 4],
}

impl StandardStimuli {
    pub fn all(&self) -> impl Iterator<Item = &SampledSignal> {
        std::iter::once(&self.task).chain(self.nuisance.iter())
    }
}

pub fn task_intervals() -> Vec<Interval> {
    TASK_BLOCKS.iter().map(|&(s, e)| Interval::new(s, e)).collect()
}

pub fn nuisance_intervals(index: usize) -> Vec<Interval> {
    NUISANCE_BLOCKS[index].iter().map(|&(s, e)| Interval::new(s, e)).collect()
}

/// The task of interest and the four nuisance tasks on `grid`.
pub fn standard_stimuli(grid: &TimeGrid) -> Result<StandardStimuli> {
    if grid.period() < MIN_SPAN_SECONDS {
        return Err(invalid(format!(
            "grid spans {:.3} s; the standard stimuli need at least {MIN_SPAN_SECONDS} s",
            grid.period()
        )));
    }
    let task = boxcar_stimulus(&task_intervals(), grid)?;
    let mut nuisance = Vec::with_capacity(4);
    for g in 0..4 {
        nuisance.push(boxcar_stimulus(&nuisance_intervals(g), grid)?);
    }
    let nuisance: [SampledSignal; 4] = nuisance.try_into().expect("four nuisance stimuli");
    Ok(StandardStimuli { task, nuisance })
}

/// HRFs of the generating model: nodes 1 and 3 share one shape, node 2
/// another. Each node uses the same HRF for every stimulus.
pub fn generating_hrfs(mechanism: Mechanism) -> Vec<HrfSpec> {
    let odd = HrfSpec { a1: 4.0, a2: 10.0, b1: 0.8, b2: 0.8, c: 0.4, latency: 0.0 };
    let even = HrfSpec { a1: 8.0, a2: 14.0, b1: 1.0, b2: 1.0, c: 0.3, latency: 0.0 };
    [odd, even, odd][..mechanism.n_nodes()].to_vec()
}

/// Peak of a node's noiseless response to the task for unit amplitude:
/// 1% of the baseline, a typical task-evoked BOLD change.
pub const RESPONSE_PEAK: f64 = 0.01 * BASELINE;

/// Node-by-stimulus noiseless responses: `out[k][0]` is the task,
/// `out[k][1..5]` the nuisance tasks. Each node's convolutions are scaled by
/// one factor chosen so that its task response peaks at [`RESPONSE_PEAK`].
pub fn generating_responses(mechanism: Mechanism, grid: &TimeGrid) -> Result<Vec<Vec<SampledSignal>>> {
    let stim = standard_stimuli(grid)?;
    generating_hrfs(mechanism)
        .iter()
        .map(|hrf| {
            let h = canonical_hrf(hrf, grid)?;
            let conv: Vec<SampledSignal> =
                stim.all().map(|s| circular_convolve(s, &h)).collect::<Result<_>>()?;
            let peak = conv[0].values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = RESPONSE_PEAK / peak;
            Ok(conv.iter().map(|c| c.scale(scale)).collect())
        })
        .collect()
}

fn correlation_matrix(variances: &[f64], couplings: &[f64]) -> Vec<Vec<f64>> {
    let k = variances.len();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        m[i][i] = variances[i];
    }
    for (i, &c) in couplings.iter().enumerate() {
        let v = c * (variances[i] * variances[i + 1]).sqrt();
        m[i][i + 1] = v;
        m[i + 1][i] = v;
    }
    m
}

/// Covariance of the node task amplitudes: variances 2, 3(, 2) with
/// neighbouring correlations `rho` and no coupling between nodes 1 and 3.
pub fn amplitude_covariance(mechanism: Mechanism, rho: &[f64]) -> Vec<Vec<f64>> {
    let variances = &[2.0, 3.0, 2.0][..mechanism.n_nodes()];
    correlation_matrix(variances, rho)
}

/// Covariance of the nuisance amplitudes: off-diagonals are
/// `0.3·√(2·3)` for every neighbouring pair.
pub fn nuisance_covariance(mechanism: Mechanism) -> Vec<Vec<f64>> {
    let variances = &[2.0, 3.0, 2.0][..mechanism.n_nodes()];
    let off = NUISANCE_CORRELATION * 6f64.sqrt();
    let mut m = correlation_matrix(variances, &vec![0.0; mechanism.n_nodes() - 1]);
    for i in 0..mechanism.n_nodes() - 1 {
        m[i][i + 1] = off;
        m[i + 1][i] = off;
    }
    m
}

/// Task-block noise covariance of Mechanism 2 with unit noise scale.
pub fn task_noise_covariance(rho: &[f64]) -> Vec<Vec<f64>> {
    let mut m = correlation_matrix(&[1.0; 3], rho);
    for row in &mut m {
        for v in row.iter_mut() {
            *v *= NOISE_VARIANCE;
        }
    }
    m
}

fn normals(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.sample(StandardNormal)).collect()
}

struct SubjectDraw {
    series: Vec<Vec<f64>>,
    betas: Option<Vec<f64>>,
}

/// Generates the dataset for `config`; dispatches on the mechanism.
pub fn generate(config: &MechanismConfig, exec: Execution) -> Result<SyntheticDataset> {
    generate_range(config, 0..config.n, exec)
}

pub fn generate_mechanism0(config: &MechanismConfig, exec: Execution) -> Result<SyntheticDataset> {
    expect_mechanism(config, Mechanism::M0)?;
    generate(config, exec)
}

pub fn generate_mechanism1(config: &MechanismConfig, exec: Execution) -> Result<SyntheticDataset> {
    expect_mechanism(config, Mechanism::M1)?;
    generate(config, exec)
}

pub fn generate_mechanism2(config: &MechanismConfig, exec: Execution) -> Result<SyntheticDataset> {
    expect_mechanism(config, Mechanism::M2)?;
    generate(config, exec)
}

fn expect_mechanism(config: &MechanismConfig, m: Mechanism) -> Result<()> {
    if config.mechanism != m {
        return Err(invalid(format!("config is for {:?}, expected {m:?}", config.mechanism)));
    }
    Ok(())
}

/// Generates only subjects `range` of the dataset described by `config`.
/// Each subject draws from its own keyed stream, so the result equals the
/// matching slice of the full run.
pub fn generate_range(
    config: &MechanismConfig,
    range: std::ops::Range<usize>,
    exec: Execution,
) -> Result<SyntheticDataset> {
    config.validate()?;
    if range.end > config.n || range.len() < 2 {
        return Err(invalid(format!("subject range {range:?} invalid for n = {}", config.n)));
    }
    let m = config.mechanism;
    let k = m.n_nodes();
    let grid = config.grid;
    let responses = generating_responses(m, &grid)?;
    let task_active: Vec<bool> = standard_stimuli(&grid)?.task.values().iter().map(|&v| v > 0.0).collect();
    let noise_sd = (NOISE_VARIANCE * config.noise_scale).sqrt();

    let (beta_factor, nuisance_factor, task_noise_factor) = match m {
        Mechanism::M0 | Mechanism::M1 => (
            Some(cholesky_psd(&amplitude_covariance(m, &config.rho))?),
            Some(cholesky_psd(&nuisance_covariance(m))?),
            None,
        ),
        Mechanism::M2 => (None, None, Some(cholesky_psd(&task_noise_covariance(&config.rho))?)),
    };

    let start = range.start;
    let draws = exec.map_indexed(range.len(), |offset| {
        let subject = start + offset;
        let mut rng = keyed_stream(config.seed, StreamTag::Subject, &[subject as u64]);
        let mut series: Vec<Vec<f64>> = vec![vec![BASELINE; grid.num_points()]; k];
        let mut betas = None;
        match (&beta_factor, &nuisance_factor) {
            (Some(bf), Some(nf)) => {
                let mut b = lower_mul(bf, &normals(&mut rng, k));
                if config.negate_node2 {
                    b[1] = -b[1];
                }
                for (node, y) in series.iter_mut().enumerate() {
                    add_scaled(y, responses[node][0].values(), b[node]);
                }
                for g in 0..4 {
                    let nb = lower_mul(nf, &normals(&mut rng, k));
                    for (node, y) in series.iter_mut().enumerate() {
                        add_scaled(y, responses[node][g + 1].values(), nb[node]);
                    }
                }
                for y in series.iter_mut() {
                    for v in y.iter_mut() {
                        *v += noise_sd * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                betas = Some(b);
            }
            _ => {
                let tf = task_noise_factor.as_ref().expect("mechanism 2 factor");
                for (node, y) in series.iter_mut().enumerate() {
                    for g in 0..5 {
                        add_scaled(y, responses[node][g].values(), 1.0);
                    }
                }
                let scale = config.noise_scale.sqrt();
                for (t, &active) in task_active.iter().enumerate() {
                    let z = normals(&mut rng, k);
                    let e: Vec<f64> = if active {
                        lower_mul(tf, &z).into_iter().map(|v| v * scale).collect()
                    } else {
                        z.into_iter().map(|v| v * noise_sd).collect()
                    };
                    for (node, y) in series.iter_mut().enumerate() {
                        y[t] += e[node];
                    }
                }
            }
        }
        SubjectDraw { series, betas }
    });

    let mut data = Vec::with_capacity(range.len() * k * grid.num_points());
    let mut latent = Vec::new();
    for d in draws {
        for y in d.series {
            data.extend(y);
        }
        if let Some(b) = d.betas {
            latent.push(b);
        }
    }
    let labels = (1..=k).map(|i| format!("node{i}")).collect();
    let subjects = range.clone().map(|i| format!("s{i}")).collect();
    let panel = BoldPanel::new(grid, labels, subjects, data)?;
    Ok(SyntheticDataset {
        panel,
        latent_betas: if m == Mechanism::M2 { None } else { Some(latent) },
        config: config.clone(),
    })
}

fn add_scaled(y: &mut [f64], x: &[f64], a: f64) {
    for (v, xi) in y.iter_mut().zip(x) {
        *v += a * xi;
    }
}

impl SyntheticDataset {
    /// Reference terms implied by the latent truth: each node's series minus
    /// its centered task term. Indexed `[node][subject][time]`; `None` for M2.
    pub fn true_references(&self) -> Result<Option<Vec<Vec<Vec<f64>>>>> {
        let Some(betas) = &self.latent_betas else {
            return Ok(None);
        };
        let responses = generating_responses(self.config.mechanism, &self.config.grid)?;
        let k = self.panel.n_nodes();
        let mut out = vec![Vec::with_capacity(self.panel.n_subjects()); k];
        for (node, refs) in out.iter_mut().enumerate() {
            let centered = responses[node][0].demeaned();
            for (subject, b) in betas.iter().enumerate() {
                let y = self.panel.series(subject, node);
                refs.push(y.iter().zip(centered.values()).map(|(v, x)| v - b[node] * x).collect());
            }
        }
        Ok(Some(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: Mechanism, n: usize, rho: Vec<f64>) -> MechanismConfig {
        MechanismConfig::new(m, n, rho, 11)
    }

    #[test]
    fn stimuli_are_disjoint_and_known_samples_active() {
        let grid = TimeGrid::default();
        let s = standard_stimuli(&grid).unwrap();
        let all: Vec<&SampledSignal> = s.all().collect();
        for i in 0..5 {
            for j in i + 1..5 {
                let overlap: f64 = all[i].values().iter().zip(all[j].values()).map(|(a, b)| a * b).sum();
                assert_eq!(overlap, 0.0, "stimuli {i} and {j} overlap");
            }
        }
        assert_eq!(s.task.values().iter().filter(|&&v| v == 1.0).count(), 33);
        assert_eq!(s.nuisance[1].values()[16], 1.0);
    }

    #[test]
    fn short_grid_rejected() {
        assert!(standard_stimuli(&TimeGrid::new(0.72, 200).unwrap()).is_err());
    }

    #[test]
    fn baseline_mean() {
        let d = generate(&cfg(Mechanism::M0, 2000, vec![0.5]), Execution::Parallel).unwrap();
        let m = crate::stats::mean(d.panel.data());
        assert!((m - BASELINE).abs() < 1.0, "mean {m}");
    }

    #[test]
    fn amplitude_correlations_match_targets() {
        let mut c = cfg(Mechanism::M1, 100_000, vec![0.4, 0.6]);
        // coarse grid with the minimum span keeps the panel small
        c.grid = TimeGrid::new(6.0, 34).unwrap();
        let d = generate(&c, Execution::Parallel).unwrap();
        let b = d.latent_betas.unwrap();
        let col = |i: usize| b.iter().map(|r| r[i]).collect::<Vec<_>>();
        let r12 = crate::stats::pearson(&col(0), &col(1)).unwrap();
        let r23 = crate::stats::pearson(&col(1), &col(2)).unwrap();
        let r13 = crate::stats::pearson(&col(0), &col(2)).unwrap();
        assert!((r12 - 0.4).abs() < 0.01, "{r12}");
        assert!((r23 - 0.6).abs() < 0.01, "{r23}");
        assert!(r13.abs() < 0.01, "{r13}");
    }

    #[test]
    fn noiseless_reconstruction() {
        let d = generate(&cfg(Mechanism::M0, 4, vec![0.25]).with_noise_scale(0.0), Execution::Sequential).unwrap();
        let responses = generating_responses(Mechanism::M0, &d.config.grid).unwrap();
        let betas = d.latent_betas.as_ref().unwrap();
        // nuisance amplitudes are not stored, so fit them back exactly
        for (s, b) in betas.iter().enumerate() {
            for node in 0..2 {
                let y = d.panel.series(s, node);
                let resid: Vec<f64> = y
                    .iter()
                    .zip(responses[node][0].values())
                    .map(|(v, x)| v - BASELINE - b[node] * x)
                    .collect();
                let cols: Vec<Vec<f64>> = (1..5).map(|g| responses[node][g].values().to_vec()).collect();
                let coef = crate::linalg::least_squares(&cols, &resid, |g| g.to_string()).unwrap();
                let max = resid
                    .iter()
                    .enumerate()
                    .map(|(t, r)| (r - (0..4).map(|g| coef[g] * cols[g][t]).sum::<f64>()).abs())
                    .fold(0.0, f64::max);
                assert!(max < 1e-8, "residual {max}");
            }
        }
    }

    #[test]
    fn mechanism2_noise_correlation() {
        let mut c = cfg(Mechanism::M2, 3100, vec![0.4, 0.6]);
        c.seed = 5;
        let d = generate(&c, Execution::Parallel).unwrap();
        let responses = generating_responses(Mechanism::M2, &c.grid).unwrap();
        let active: Vec<bool> = standard_stimuli(&c.grid).unwrap().task.values().iter().map(|&v| v > 0.0).collect();
        let (mut on1, mut on2, mut off1, mut off2) = (vec![], vec![], vec![], vec![]);
        for s in 0..c.n {
            for t in 0..c.grid.num_points() {
                let e = |node: usize| {
                    let det: f64 = (0..5).map(|g| responses[node][g].values()[t]).sum();
                    d.panel.series(s, node)[t] - BASELINE - det
                };
                if active[t] {
                    on1.push(e(0));
                    on2.push(e(1));
                } else {
                    off1.push(e(0));
                    off2.push(e(1));
                }
            }
        }
        assert!(on1.len() >= 100_000);
        let r_on = crate::stats::pearson(&on1, &on2).unwrap();
        let r_off = crate::stats::pearson(&off1, &off2).unwrap();
        assert!((r_on - 0.4).abs() < 0.02, "{r_on}");
        assert!(r_off.abs() < 0.02, "{r_off}");
        assert!(d.latent_betas.is_none());
    }

    #[test]
    fn psd_boundary_matches_eigenvalues() {
        // smallest eigenvalue of the amplitude covariance, found independently
        // as a root of the characteristic cubic by bisection
        let min_eig = |r12: f64, r23: f64| {
            let m = amplitude_covariance(Mechanism::M1, &[r12, r23]);
            let det = |x: f64| {
                let a = |i: usize, j: usize| m[i][j] - if i == j { x } else { 0.0 };
                a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                    + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
            };
            let (mut lo, mut hi) = (-10.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if det(lo) * det(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        };
        assert!(min_eig(0.4, 0.6) > 0.0);
        assert!(generate(&cfg(Mechanism::M1, 3, vec![0.4, 0.6]), Execution::Sequential).is_ok());
        assert!(min_eig(0.9, 0.9) < 0.0);
        assert!(generate(&cfg(Mechanism::M1, 3, vec![0.9, 0.9]), Execution::Sequential).is_err());
        assert!(generate(&cfg(Mechanism::M2, 3, vec![0.9, 0.9]), Execution::Sequential).is_err());
    }

    #[test]
    fn deterministic_and_slice_consistent() {
        let c = cfg(Mechanism::M1, 10, vec![0.4, 0.6]);
        let a = generate(&c, Execution::Parallel).unwrap();
        let b = generate(&c, Execution::Sequential).unwrap();
        assert_eq!(a.panel.data(), b.panel.data());
        let part = generate_range(&c, 4..8, Execution::Parallel).unwrap();
        let per = 3 * c.grid.num_points();
        assert_eq!(part.panel.data(), &a.panel.data()[4 * per..8 * per]);
        assert_eq!(part.latent_betas.unwrap(), a.latent_betas.unwrap()[4..8].to_vec());
    }

    #[test]
    fn config_validation() {
        assert!(cfg(Mechanism::M0, 1, vec![0.5]).validate().is_err());
        assert!(cfg(Mechanism::M0, 5, vec![1.0]).validate().is_err());
        assert!(cfg(Mechanism::M1, 5, vec![0.5]).validate().is_err());
        assert!(cfg(Mechanism::M0, 5, vec![0.5]).with_noise_scale(-1.0).validate().is_err());
        assert!(generate_mechanism1(&cfg(Mechanism::M0, 5, vec![0.5]), Execution::Sequential).is_err());
        assert_eq!(Mechanism::parse("m2").unwrap(), Mechanism::M2);
        assert_eq!(Mechanism::parse("0").unwrap(), Mechanism::M0);
    }
}
