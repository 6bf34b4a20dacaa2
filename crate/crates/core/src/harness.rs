//! Monte Carlo experiments (identification rates, bias and variance, noise
//! sweeps) and the agreement analysis used to compare methods on real data.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::competitors::{run_method, Method};
use crate::error::{invalid, PtfcError, Result};
use crate::exec::Execution;
use crate::ptfce::{draw_shifts, node_references, ptfce_estimate, ptfce_from_references, PtfceOptions};
use crate::amuse::TaskRegressor;
use crate::rng::{derive_seed, keyed_stream, StreamTag};
use crate::signal::{FrequencyBand, HrfSpec};
use crate::simgen::{generate, generating_hrfs, standard_stimuli, Mechanism, MechanismConfig};
use crate::stats::{mean, sample_sd};

/// Population aggregate applied to a competitor's per-subject values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Median,
}

/// A method as scored in the identification experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoredMethod {
    Ptfce,
    Competitor(Method, Aggregate),
}

impl ScoredMethod {
    /// ptFCE followed by every competitor with both aggregates.
    pub fn all() -> Vec<ScoredMethod> {
        let mut out = vec![ScoredMethod::Ptfce];
        for m in Method::ALL {
            out.push(ScoredMethod::Competitor(m, Aggregate::Mean));
            out.push(ScoredMethod::Competitor(m, Aggregate::Median));
        }
        out
    }

    pub fn name(&self) -> String {
        match self {
            ScoredMethod::Ptfce => "ptfce".to_string(),
            ScoredMethod::Competitor(m, Aggregate::Mean) => format!("{}_mean", m.name()),
            ScoredMethod::Competitor(m, Aggregate::Median) => format!("{}_median", m.name()),
        }
    }

    /// Inverse of [`ScoredMethod::name`].
    pub fn parse(s: &str) -> Result<Self> {
        ScoredMethod::all()
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown method {s:?}")))
    }
}

/// Which HRF the estimators are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorHrf {
    /// The canonical shape for every node, as in practice.
    #[default]
    Canonical,
    /// The HRFs the data were generated with.
    Generating,
}

impl EstimatorHrf {
    fn hrfs(self, mechanism: Mechanism) -> Vec<HrfSpec> {
        match self {
            EstimatorHrf::Canonical => vec![HrfSpec::canonical(); mechanism.n_nodes()],
            EstimatorHrf::Generating => generating_hrfs(mechanism),
        }
    }
}

/// Settings shared by the Monte Carlo experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub band: FrequencyBand,
    pub lag: i64,
    pub estimator_hrf: EstimatorHrf,
    /// Parallelism over replications; work inside a replication is sequential.
    pub execution: Execution,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            band: FrequencyBand::hemodynamic(),
            lag: 1,
            estimator_hrf: EstimatorHrf::Canonical,
            execution: Execution::default(),
        }
    }
}

impl ExperimentOptions {
    fn ptfce_options(&self) -> PtfceOptions {
        PtfceOptions { band: self.band, lag: self.lag, execution: Execution::Sequential }
    }
}

/// Two-sided multiplier applied to the binomial standard error of a rate:
/// the 0.95 quantile of the standard normal.
pub fn interval_multiplier() -> f64 {
    Normal::standard().inverse_cdf(0.95)
}

/// Target connectivities of the identification experiment: a weak (1,2)
/// pair and a strong (2,3) pair.
pub const WEAK_STRONG: [f64; 2] = [0.4, 0.6];

/// Outcome of one method on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub method: String,
    pub weak: Option<f64>,
    pub strong: Option<f64>,
    pub correct: bool,
    pub tie: bool,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRate {
    pub method: String,
    pub correct: usize,
    pub failures: usize,
    pub ties: usize,
    pub rate: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub mechanism: Mechanism,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<MethodRate>,
}

impl IdentificationReport {
    pub fn rate(&self, method: &str) -> Option<f64> {
        self.methods.iter().find(|m| m.method == method).map(|m| m.rate)
    }
}

/// Half-width `z·sqrt(p(1-p)/reps)` with `z` from [`interval_multiplier`].
pub fn rate_half_width(rate: f64, reps: usize) -> f64 {
    interval_multiplier() * (rate * (1.0 - rate) / reps as f64).sqrt()
}

/// Correctness of one weak/strong comparison; exact ties fall to `coin`.
pub fn is_correct(weak: f64, strong: f64, coin: bool) -> (bool, bool) {
    if weak == strong {
        (coin, true)
    } else {
        (weak < strong, false)
    }
}

fn replication_config(mechanism: Mechanism, n: usize, seed: u64, replication: usize) -> MechanismConfig {
    let data_seed = derive_seed(seed, StreamTag::Replication, &[replication as u64, 0]);
    MechanismConfig::new(mechanism, n, WEAK_STRONG.to_vec(), data_seed)
}

fn shift_seed(seed: u64, path: &[u64]) -> u64 {
    let mut p = path.to_vec();
    p.push(1);
    derive_seed(seed, StreamTag::Replication, &p)
}

/// Scores every method on a single replication.
pub fn identification_replication(
    mechanism: Mechanism,
    n: usize,
    methods: &[ScoredMethod],
    seed: u64,
    replication: usize,
    options: &ExperimentOptions,
) -> Result<Vec<ReplicationRow>> {
    let config = replication_config(mechanism, n, seed, replication);
    let data = generate(&config, Execution::Sequential)?;
    let stimulus = standard_stimuli(&config.grid)?.task;
    let hrfs = options.estimator_hrf.hrfs(mechanism);
    let labels = data.panel.node_labels().to_vec();
    let shifts = shift_seed(seed, &[replication as u64]);
    let mut coins = keyed_stream(seed, StreamTag::TieBreak, &[replication as u64]);
    let pair = |m: &ScoredMethod, a: usize, b: usize| -> Result<f64> {
        match m {
            ScoredMethod::Ptfce => ptfce_estimate(
                &data.panel,
                &labels[a],
                &labels[b],
                &stimulus,
                &hrfs[a],
                &hrfs[b],
                shifts,
                &options.ptfce_options(),
            )
            .map(|e| e.estimate),
            ScoredMethod::Competitor(method, agg) => {
                let e = run_method(
                    *method,
                    &data.panel,
                    &labels[a],
                    &labels[b],
                    &stimulus,
                    &hrfs[a],
                    &hrfs[b],
                    &options.band,
                    Execution::Sequential,
                )?;
                Ok(match agg {
                    Aggregate::Mean => e.mean_aggregate,
                    Aggregate::Median => e.median_aggregate,
                })
            }
        }
    };
    let mut rows = Vec::with_capacity(methods.len());
    for m in methods {
        // one coin per method, drawn whether or not it is needed
        let coin: bool = coins.random();
        let weak = pair(m, 0, 1);
        let strong = pair(m, 1, 2);
        let row = match (weak, strong) {
            (Ok(w), Ok(s)) => {
                let (correct, tie) = is_correct(w, s, coin);
                ReplicationRow {
                    replication,
                    method: m.name(),
                    weak: Some(w),
                    strong: Some(s),
                    correct,
                    tie,
                    failed: false,
                }
            }
            (w, s) => ReplicationRow {
                replication,
                method: m.name(),
                weak: w.ok(),
                strong: s.ok(),
                correct: false,
                tie: false,
                failed: true,
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Identification-rate experiment: how often each method ranks the weak
/// pair below the strong pair.
pub fn identification_experiment(
    mechanism: Mechanism,
    n: usize,
    reps: usize,
    methods: &[ScoredMethod],
    seed: u64,
    options: &ExperimentOptions,
) -> Result<IdentificationReport> {
    identification_experiment_resumable(mechanism, n, reps, methods, seed, options, &[], |_| Ok(()))
}

/// [`identification_experiment`] that skips replications already present in
/// `completed` and hands each new replication's rows to `sink` in
/// replication order.
#[allow(clippy::too_many_arguments)]
pub fn identification_experiment_resumable(
    mechanism: Mechanism,
    n: usize,
    reps: usize,
    methods: &[ScoredMethod],
    seed: u64,
    options: &ExperimentOptions,
    completed: &[ReplicationRow],
    mut sink: impl FnMut(&[ReplicationRow]) -> Result<()>,
) -> Result<IdentificationReport> {
    if mechanism == Mechanism::M0 {
        return Err(invalid("identification needs a three-node mechanism (1 or 2)"));
    }
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    if methods.is_empty() {
        return Err(invalid("no methods selected"));
    }
    let names: Vec<String> = methods.iter().map(ScoredMethod::name).collect();
    let done = |r: usize| names.iter().all(|m| completed.iter().any(|row| row.replication == r && &row.method == m));
    let todo: Vec<usize> = (0..reps).filter(|&r| !done(r)).collect();
    let mut rows: Vec<ReplicationRow> =
        completed.iter().filter(|row| row.replication < reps && names.contains(&row.method)).cloned().collect();
    // batches keep memory bounded and let the sink persist progress
    let batch = 32.max(rayon_width());
    for chunk in todo.chunks(batch) {
        let fresh = options.execution.try_map_indexed(chunk.len(), |i| {
            identification_replication(mechanism, n, methods, seed, chunk[i], options)
        })?;
        for r in fresh {
            sink(&r)?;
            rows.extend(r);
        }
    }
    let mut rates = Vec::with_capacity(methods.len());
    for name in &names {
        let mut seen = std::collections::BTreeMap::new();
        for row in rows.iter().filter(|row| &row.method == name) {
            seen.entry(row.replication).or_insert(row);
        }
        let correct = seen.values().filter(|r| r.correct).count();
        let failures = seen.values().filter(|r| r.failed).count();
        let ties = seen.values().filter(|r| r.tie).count();
        let rate = correct as f64 / reps as f64;
        rates.push(MethodRate {
            method: name.clone(),
            correct,
            failures,
            ties,
            rate,
            half_width: rate_half_width(rate, reps),
        });
    }
    Ok(IdentificationReport { mechanism, n, reps, seed, methods: rates })
}

#[cfg(feature = "parallel")]
fn rayon_width() -> usize {
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
fn rayon_width() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub rho: f64,
    pub n: usize,
    pub reps: usize,
    pub mean: f64,
    pub sd: f64,
    /// `(mean - rho) / rho`; absent when `rho` is zero.
    pub relative_bias: Option<f64>,
    pub failures: usize,
}

/// Where the reference signals come from in the bias experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceSource {
    /// Extracted from the data, as in practice.
    #[default]
    Estimated,
    /// Computed from the latent amplitudes the data were generated with.
    Oracle,
}

/// One Mechanism-0 ptFCE estimate for the given settings.
pub fn mechanism0_estimate(
    rho: f64,
    n: usize,
    noise_scale: f64,
    seed: u64,
    path: &[u64],
    references: ReferenceSource,
    options: &ExperimentOptions,
) -> Result<f64> {
    let data_seed = derive_seed(seed, StreamTag::Replication, &[path, &[0]].concat());
    let config = MechanismConfig::new(Mechanism::M0, n, vec![rho], data_seed).with_noise_scale(noise_scale);
    let data = generate(&config, Execution::Sequential)?;
    let shifts = draw_shifts(n, &config.grid, shift_seed(seed, path))?;
    let stimulus = standard_stimuli(&config.grid)?.task;
    let refs: Vec<Vec<Vec<f64>>> = match references {
        ReferenceSource::Oracle => data.true_references()?.expect("mechanism 0 keeps latent amplitudes"),
        ReferenceSource::Estimated => {
            let hrfs = options.estimator_hrf.hrfs(Mechanism::M0);
            let mut out = Vec::with_capacity(2);
            for (node, hrf) in hrfs.iter().enumerate() {
                let regressor = TaskRegressor::new(&stimulus, hrf)?;
                out.push(
                    node_references(&data.panel, node, &regressor, &shifts, options.lag, Execution::Sequential)?
                        .references,
                );
            }
            out
        }
    };
    let y: Vec<Vec<&[f64]>> = (0..2).map(|k| (0..n).map(|w| data.panel.series(w, k)).collect()).collect();
    let r: Vec<Vec<&[f64]>> = refs.iter().map(|node| node.iter().map(Vec::as_slice).collect()).collect();
    let (_, estimate, _) = ptfce_from_references(
        &config.grid,
        &y[0],
        &y[1],
        &r[0],
        &r[1],
        &shifts,
        &options.band,
        Execution::Sequential,
    )?;
    Ok(estimate)
}

fn summarize(estimates: &[Result<f64>]) -> (f64, f64, usize) {
    let ok: Vec<f64> = estimates.iter().filter_map(|e| e.as_ref().ok().copied()).collect();
    let failures = estimates.len() - ok.len();
    if ok.is_empty() {
        return (f64::NAN, f64::NAN, failures);
    }
    (mean(&ok), sample_sd(&ok), failures)
}

/// Mechanism-0 bias and variance table over every `(rho, n)` combination.
pub fn bias_experiment(
    rhos: &[f64],
    ns: &[usize],
    reps: usize,
    seed: u64,
    options: &ExperimentOptions,
) -> Result<Vec<BiasRow>> {
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    let mut rows = Vec::new();
    for &rho in rhos {
        for &n in ns {
            let estimates = options.execution.map_indexed(reps, |r| {
                mechanism0_estimate(rho, n, 1.0, seed, &[rho.to_bits(), n as u64, r as u64], ReferenceSource::Estimated, options)
            });
            if let Some(Err(e)) = estimates.iter().find(|e| matches!(e, Err(PtfcError::InvalidArgument(_)))) {
                return Err(e.clone());
            }
            let (m, sd, failures) = summarize(&estimates);
            rows.push(BiasRow {
                rho,
                n,
                reps,
                mean: m,
                sd,
                relative_bias: (rho != 0.0).then(|| (m - rho) / rho),
                failures,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub lambda: f64,
    pub mean: f64,
    pub sd: f64,
    pub failures: usize,
}

/// Replication-mean ptFCE estimate for each noise scale. Replication `r`
/// uses the same amplitudes and shifts at every scale, so only the noise
/// level differs between rows.
pub fn noise_sweep(
    lambdas: &[f64],
    rho: f64,
    n: usize,
    reps: usize,
    seed: u64,
    references: ReferenceSource,
    options: &ExperimentOptions,
) -> Result<Vec<NoiseRow>> {
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(invalid(format!("noise scale must be finite and >= 0, got {l}")));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let estimates = options.execution.map_indexed(reps, |r| {
            mechanism0_estimate(rho, n, lambda, seed, &[rho.to_bits(), n as u64, r as u64], references, options)
        });
        let (m, sd, failures) = summarize(&estimates);
        rows.push(NoiseRow { lambda, mean: m, sd, failures });
    }
    Ok(rows)
}

/// Affine map of `values` onto `[0, 1]`.
pub fn minmax_standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("standardization needs finite values"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(invalid("cannot standardize a constant (or empty) sequence"));
    }
    let span = hi - lo;
    Ok(values
        .iter()
        .map(|&v| {
            if v == lo {
                0.0
            } else if v == hi {
                1.0
            } else {
                (v - lo) / span
            }
        })
        .collect())
}

/// `value > threshold`, elementwise.
pub fn threshold_classify(values: &[f64], threshold: f64) -> Vec<bool> {
    values.iter().map(|&v| v > threshold).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub z_statistic: f64,
    /// One-sided p-value for agreement beyond chance.
    pub p_value: f64,
}

/// Cohen's kappa of two binary ratings with a large-sample z test.
pub fn cohens_kappa(a: &[bool], b: &[bool]) -> Result<KappaResult> {
    if a.len() != b.len() {
        return Err(invalid(format!("rating lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(invalid("kappa needs at least 2 ratings"));
    }
    let n = a.len() as f64;
    let both = a.iter().zip(b).filter(|(x, y)| **x && **y).count() as f64;
    let neither = a.iter().zip(b).filter(|(x, y)| !**x && !**y).count() as f64;
    let pa = a.iter().filter(|x| **x).count() as f64 / n;
    let pb = b.iter().filter(|x| **x).count() as f64 / n;
    let po = (both + neither) / n;
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    if pe >= 1.0 {
        return Err(PtfcError::UndefinedKappa);
    }
    let kappa = (po - pe) / (1.0 - pe);
    let se0 = (pe / (n * (1.0 - pe))).sqrt();
    let z = kappa / se0;
    let p_value = Normal::standard().sf(z);
    Ok(KappaResult { kappa, observed_agreement: po, expected_agreement: pe, z_statistic: z, p_value })
}

/// Standardized values, classifications and pairwise kappas of several
/// methods' estimates over the same list of node pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub methods: Vec<String>,
    pub standardized: Vec<Vec<f64>>,
    pub classes: Vec<Vec<bool>>,
    /// `kappa[i][j]`; `None` where kappa is undefined.
    pub kappa: Vec<Vec<Option<KappaResult>>>,
}

pub fn agreement_analysis(methods: &[(String, Vec<f64>)], threshold: f64) -> Result<AgreementReport> {
    if methods.is_empty() {
        return Err(invalid("no methods to compare"));
    }
    let len = methods[0].1.len();
    if let Some((name, _)) = methods.iter().find(|(_, v)| v.len() != len) {
        return Err(invalid(format!("method {name} has a different number of estimates")));
    }
    let standardized =
        methods.iter().map(|(_, v)| minmax_standardize(v)).collect::<Result<Vec<_>>>()?;
    let classes: Vec<Vec<bool>> = standardized.iter().map(|v| threshold_classify(v, threshold)).collect();
    let kappa = classes
        .iter()
        .map(|a| classes.iter().map(|b| cohens_kappa(a, b).ok()).collect())
        .collect();
    Ok(AgreementReport {
        methods: methods.iter().map(|(m, _)| m.clone()).collect(),
        standardized,
        classes,
        kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplier_is_the_095_quantile() {
        assert!((interval_multiplier() - 1.6449).abs() < 1e-4);
        let hw = rate_half_width(0.84, 500);
        assert!((hw - 1.644_853_626_951_472_2 * (0.84f64 * 0.16 / 500.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn standardization() {
        assert_eq!(minmax_standardize(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(minmax_standardize(&[3.0, 3.0]).is_err());
        let once = minmax_standardize(&[0.3, -1.0, 7.0, 2.2]).unwrap();
        assert_eq!(minmax_standardize(&once).unwrap(), once);
    }

    #[test]
    fn thresholding_is_strict() {
        assert_eq!(threshold_classify(&[0.5, 0.500001, 0.0], 0.5), vec![false, true, false]);
    }

    #[test]
    fn kappa_extremes_and_errors() {
        let a = [true, false, true, false];
        assert_eq!(cohens_kappa(&a, &a).unwrap().kappa, 1.0);
        let not_a: Vec<bool> = a.iter().map(|x| !x).collect();
        assert_eq!(cohens_kappa(&a, &not_a).unwrap().kappa, -1.0);
        assert!(matches!(cohens_kappa(&[true, true], &[true, true]), Err(PtfcError::UndefinedKappa)));
        assert!(cohens_kappa(&[true], &[true]).is_err());
    }

    #[test]
    fn ties_use_coin() {
        assert_eq!(is_correct(0.5, 0.5, true), (true, true));
        assert_eq!(is_correct(0.5, 0.5, false), (false, true));
        assert_eq!(is_correct(0.4, 0.6, false), (true, false));
        assert_eq!(is_correct(0.6, 0.4, true), (false, false));
    }

    #[test]
    fn method_names_round_trip() {
        for m in ScoredMethod::all() {
            assert_eq!(ScoredMethod::parse(&m.name()).unwrap(), m);
        }
        assert!(ScoredMethod::parse("bogus").is_err());
    }
}
