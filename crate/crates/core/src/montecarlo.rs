//! Reproducible experiment harness: run many disorder trials through the
//! sample / diagonalize / evaluate pipeline, collect the observables, and
//! test them against the analytic predictions with summary statistics,
//! z-scores, and Kolmogorov-Smirnov distances.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{
    self, BivariateGaussianLaw, CltParams, Moments, StatisticKind, TransitionParams,
};
use crate::ensembles::{assemble_deformed, sample_wigner, EnsembleConfig};
use crate::partition;
use crate::rng::trial_seed;
use crate::special::{kolmogorov_tail, norm_cdf};
use crate::spectral::{rigidity_report, semicircle_integral, Spectrum};
use crate::{Error, Result};

/// Named test functions for linear statistics. The logarithmic ones are
/// anchored at the spike location J + 1/J, so building the actual closure
/// needs the coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TestFn {
    /// log(J + 1/J - x), the kernel the free energy integrates over the
    /// bulk. Finite on the bulk but not at the top eigenvalue, so it is a
    /// partial-statistic function in practice.
    G,
    /// x itself.
    X,
    /// x^2.
    X2,
    /// log(J + 1/J + 1 - x): the same logarithmic singularity parked one
    /// unit to the right of the spike, safe for full statistics.
    LogSpike,
}

impl TestFn {
    pub fn tag(self) -> &'static str {
        match self {
            TestFn::G => "g",
            TestFn::X => "x",
            TestFn::X2 => "x2",
            TestFn::LogSpike => "log-spike",
        }
    }

    pub fn parse(tag: &str) -> Result<TestFn> {
        match tag {
            "g" => Ok(TestFn::G),
            "x" => Ok(TestFn::X),
            "x2" => Ok(TestFn::X2),
            "log-spike" => Ok(TestFn::LogSpike),
            other => Err(Error::domain(format!(
                "unknown test function {other:?}; expected g, x, x2 or log-spike"
            ))),
        }
    }

    /// The function itself, anchored at coupling j.
    pub fn make(self, j: f64) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
        let j_hat = j + 1.0 / j;
        move |x: f64| match self {
            TestFn::G => (j_hat - x).ln(),
            TestFn::X => x,
            TestFn::X2 => x * x,
            TestFn::LogSpike => (j_hat + 1.0 - x).ln(),
        }
    }
}

/// Which quantities each trial should compute and record.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Observables {
    pub chi: bool,
    /// Centered linear statistics with the top eigenvalue removed.
    pub partial_ls: Vec<TestFn>,
    /// Centered linear statistics over the whole spectrum.
    pub full_ls: Vec<TestFn>,
    pub f_exact: bool,
    pub f_transitional: bool,
    pub f_steepest: bool,
    pub rigidity: bool,
}

/// A full experiment: ensemble, window parameters, trial count, what to
/// record, and how to seed it.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentPlan {
    pub ensemble: EnsembleConfig,
    pub transition: TransitionParams,
    pub trials: usize,
    pub observables: Observables,
    pub master_seed: u64,
    pub workers: usize,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if self.ensemble.j != self.transition.j {
            return Err(Error::domain(format!(
                "ensemble coupling {} and window coupling {} must match",
                self.ensemble.j, self.transition.j
            )));
        }
        if self.trials == 0 {
            return Err(Error::domain("need at least one trial"));
        }
        if self.workers == 0 {
            return Err(Error::domain("need at least one worker"));
        }
        Ok(())
    }
}

/// One trial's output. Missing observables are None with the reason
/// appended to `note`; any failure also sets `excluded` so the summary
/// passes can skip the record wholesale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub chi: Option<f64>,
    pub partial_ls: Vec<Option<f64>>,
    pub full_ls: Vec<Option<f64>>,
    pub f_exact: Option<f64>,
    pub f_transitional: Option<f64>,
    pub f_steepest: Option<f64>,
    pub max_bulk_deviation: Option<f64>,
    pub edge_deviation: Option<f64>,
    pub rigidity_flagged: Option<bool>,
    pub excluded: bool,
    pub note: String,
}

/// A named Kolmogorov-Smirnov comparison.
#[derive(Clone, Debug, Serialize)]
pub struct KsResult {
    pub label: String,
    pub statistic: f64,
    pub p_value: f64,
}

/// One observed-vs-predicted comparison with its standard error.
#[derive(Clone, Debug, Serialize)]
pub struct PredictionCheck {
    pub label: String,
    pub observed: f64,
    pub predicted: f64,
    pub std_error: f64,
    pub z: f64,
}

/// Moments of the recorded observables plus whatever prediction checks
/// and KS comparisons the producing routine attached.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryStats {
    pub labels: Vec<String>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Standard errors of the means.
    pub std_errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub used_trials: usize,
    pub excluded_trials: usize,
    pub checks: Vec<PredictionCheck>,
    pub ks: Vec<KsResult>,
}

fn note_failure(rec: &mut TrialRecord, what: &str, e: &Error) {
    rec.excluded = true;
    if !rec.note.is_empty() {
        rec.note.push_str("; ");
    }
    rec.note.push_str(what);
    rec.note.push_str(": ");
    rec.note.push_str(&e.to_string());
}

/// Run the plan. Every trial reseeds the ensemble with a pure function of
/// (master_seed, trial index), so the records are reproducible and
/// independent of the worker count; the seed field on the embedded
/// ensemble config is ignored. Per-trial failures mark the record
/// excluded instead of aborting the run.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<TrialRecord>> {
    plan.validate()?;
    let j = plan.ensemble.j;
    let mut partial_means = Vec::with_capacity(plan.observables.partial_ls.len());
    for phi in &plan.observables.partial_ls {
        partial_means.push(semicircle_integral(&phi.make(j))?);
    }
    let mut full_means = Vec::with_capacity(plan.observables.full_ls.len());
    for phi in &plan.observables.full_ls {
        full_means.push(semicircle_integral(&phi.make(j))?);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::domain(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..plan.trials)
            .into_par_iter()
            .map(|idx| run_trial(plan, &partial_means, &full_means, idx))
            .collect()
    }))
}

fn run_trial(
    plan: &ExperimentPlan,
    partial_means: &[f64],
    full_means: &[f64],
    idx: usize,
) -> TrialRecord {
    let seed = trial_seed(plan.master_seed, idx as u64);
    let mut rec = TrialRecord {
        trial: idx,
        seed,
        chi: None,
        partial_ls: Vec::new(),
        full_ls: Vec::new(),
        f_exact: None,
        f_transitional: None,
        f_steepest: None,
        max_bulk_deviation: None,
        edge_deviation: None,
        rigidity_flagged: None,
        excluded: false,
        note: String::new(),
    };
    let config = EnsembleConfig { seed, ..plan.ensemble };
    let spectrum = sample_wigner(&config)
        .map(|a| assemble_deformed(&a))
        .and_then(|m| Spectrum::from_deformed(&m, config.j, Some(seed)));
    let spectrum = match spectrum {
        Ok(s) => s,
        Err(e) => {
            note_failure(&mut rec, "sampling", &e);
            return rec;
        }
    };
    let obs = &plan.observables;
    if obs.chi {
        rec.chi = Some(spectrum.chi());
    }
    for (phi, &mean) in obs.partial_ls.iter().zip(partial_means) {
        match spectrum.partial_linear_statistic_with_mean(&phi.make(config.j), mean) {
            Ok(v) => rec.partial_ls.push(Some(v)),
            Err(e) => {
                rec.partial_ls.push(None);
                note_failure(&mut rec, "partial_ls", &e);
            }
        }
    }
    for (phi, &mean) in obs.full_ls.iter().zip(full_means) {
        match spectrum.full_linear_statistic_with_mean(&phi.make(config.j), mean) {
            Ok(v) => rec.full_ls.push(Some(v)),
            Err(e) => {
                rec.full_ls.push(None);
                note_failure(&mut rec, "full_ls", &e);
            }
        }
    }
    let beta = plan.transition.beta(spectrum.n());
    if obs.f_exact {
        match partition::contour_log_partition(&spectrum, beta) {
            Ok(lz) => rec.f_exact = Some(lz / spectrum.n() as f64),
            Err(e) => note_failure(&mut rec, "contour", &e),
        }
    }
    if obs.f_transitional {
        match partition::transitional_free_energy(&spectrum, &plan.transition) {
            Ok(t) => rec.f_transitional = Some(t.total()),
            Err(e) => note_failure(&mut rec, "transitional", &e),
        }
    }
    if obs.f_steepest {
        match partition::steepest_descent_free_energy(&spectrum, beta) {
            Ok(f) => rec.f_steepest = Some(f),
            Err(e) => note_failure(&mut rec, "steepest descent", &e),
        }
    }
    if obs.rigidity {
        match rigidity_report(&spectrum) {
            Ok(r) => {
                rec.max_bulk_deviation = Some(r.max_bulk_deviation);
                rec.edge_deviation = Some(r.edge_deviation);
                rec.rigidity_flagged = Some(r.flagged);
            }
            Err(e) => note_failure(&mut rec, "rigidity", &e),
        }
    }
    rec
}

/// Labels of the numeric observable columns, in emission order.
pub fn observable_labels(obs: &Observables) -> Vec<String> {
    let mut labels = Vec::new();
    if obs.chi {
        labels.push("chi".to_string());
    }
    for phi in &obs.partial_ls {
        labels.push(format!("partial_ls[{}]", phi.tag()));
    }
    for phi in &obs.full_ls {
        labels.push(format!("full_ls[{}]", phi.tag()));
    }
    if obs.f_exact {
        labels.push("f_exact".to_string());
    }
    if obs.f_transitional {
        labels.push("f_transitional".to_string());
    }
    if obs.f_steepest {
        labels.push("f_steepest".to_string());
    }
    if obs.rigidity {
        labels.push("max_bulk_dev".to_string());
        labels.push("edge_dev".to_string());
    }
    labels
}

fn value_cells(obs: &Observables, rec: &TrialRecord) -> Vec<Option<f64>> {
    let mut cells = Vec::new();
    if obs.chi {
        cells.push(rec.chi);
    }
    for k in 0..obs.partial_ls.len() {
        cells.push(rec.partial_ls.get(k).copied().flatten());
    }
    for k in 0..obs.full_ls.len() {
        cells.push(rec.full_ls.get(k).copied().flatten());
    }
    if obs.f_exact {
        cells.push(rec.f_exact);
    }
    if obs.f_transitional {
        cells.push(rec.f_transitional);
    }
    if obs.f_steepest {
        cells.push(rec.f_steepest);
    }
    if obs.rigidity {
        cells.push(rec.max_bulk_deviation);
        cells.push(rec.edge_deviation);
    }
    cells
}

/// Means, variances, and the full covariance matrix over the trials where
/// every requested observable came out. Excluded or incomplete records
/// are counted, not used.
pub fn summarize(plan: &ExperimentPlan, records: &[TrialRecord]) -> Result<SummaryStats> {
    let labels = observable_labels(&plan.observables);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut excluded = 0usize;
    for rec in records {
        let cells = value_cells(&plan.observables, rec);
        if rec.excluded || cells.iter().any(|c| c.is_none()) {
            excluded += 1;
            continue;
        }
        rows.push(cells.into_iter().map(|c| c.unwrap()).collect());
    }
    if rows.is_empty() {
        return Err(Error::domain("no usable trials to summarize"));
    }
    let n = rows.len() as f64;
    let k = labels.len();
    let mut means = vec![0.0; k];
    for row in &rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut cov = vec![vec![0.0; k]; k];
    for row in &rows {
        for i in 0..k {
            let di = row[i] - means[i];
            for j in i..k {
                cov[i][j] += di * (row[j] - means[j]);
            }
        }
    }
    let denom = (n - 1.0).max(1.0);
    for i in 0..k {
        for j in i..k {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    let variances: Vec<f64> = (0..k).map(|i| cov[i][i]).collect();
    let std_errors: Vec<f64> = variances.iter().map(|v| (v / n).sqrt()).collect();
    Ok(SummaryStats {
        labels,
        means,
        variances,
        std_errors,
        covariance: cov,
        used_trials: rows.len(),
        excluded_trials: excluded,
        checks: Vec::new(),
        ks: Vec::new(),
    })
}

/// Compare one linear-statistic column against its predicted Gaussian
/// limit: z-scores for mean and variance plus a one-sample KS distance.
/// The statistic kind on `params` picks the partial or full column.
pub fn check_linear_statistic_clt(
    plan: &ExperimentPlan,
    records: &[TrialRecord],
    phi: TestFn,
    params: &CltParams,
) -> Result<SummaryStats> {
    let (list, column): (&[TestFn], fn(&TrialRecord, usize) -> Option<f64>) = match params.kind {
        StatisticKind::Partial => (&plan.observables.partial_ls, |r, i| {
            r.partial_ls.get(i).copied().flatten()
        }),
        StatisticKind::Full => {
            (&plan.observables.full_ls, |r, i| r.full_ls.get(i).copied().flatten())
        }
    };
    let kind_name = match params.kind {
        StatisticKind::Partial => "partial_ls",
        StatisticKind::Full => "full_ls",
    };
    let idx = list.iter().position(|&t| t == phi).ok_or_else(|| {
        Error::domain(format!("plan does not record {kind_name}[{}]", phi.tag()))
    })?;
    let mut xs: Vec<f64> = records
        .iter()
        .filter(|r| !r.excluded)
        .filter_map(|r| column(r, idx))
        .collect();
    let dropped = records.len() - xs.len();
    if xs.len() < 500 {
        return Err(Error::domain(format!(
            "distribution check needs at least 500 usable trials, have {}",
            xs.len()
        )));
    }
    if !(params.variance > 0.0) {
        return Err(Error::domain("predicted variance must be positive"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let se_mean = (var / n).sqrt();
    // normal-theory standard error for a sample variance
    let se_var = var * (2.0 / (n - 1.0)).sqrt();
    xs.sort_by(f64::total_cmp);
    let sd = params.variance.sqrt();
    let (d, p) = ks_one_sample_sorted(&xs, |x| norm_cdf((x - params.mean) / sd));
    Ok(SummaryStats {
        labels: vec![format!("{kind_name}[{}]", phi.tag())],
        means: vec![mean],
        variances: vec![var],
        std_errors: vec![se_mean],
        covariance: vec![vec![var]],
        used_trials: xs.len(),
        excluded_trials: dropped,
        checks: vec![
            PredictionCheck {
                label: "mean vs limit".to_string(),
                observed: mean,
                predicted: params.mean,
                std_error: se_mean,
                z: (mean - params.mean) / se_mean,
            },
            PredictionCheck {
                label: "variance vs limit".to_string(),
                observed: var,
                predicted: params.variance,
                std_error: se_var,
                z: (var - params.variance) / se_var,
            },
        ],
        ks: vec![KsResult {
            label: "vs predicted gaussian".to_string(),
            statistic: d,
            p_value: p,
        }],
    })
}

/// Covariance of (partial linear statistic, chi) with a jackknife standard
/// error, against the predicted joint-limit covariance
/// 2 W3 tau_2(phi) (1 - 1/J^2); the chi mean is checked against its limit
/// W3 (1/J^2 - 1/J^4) on the side.
pub fn check_joint_covariance(
    plan: &ExperimentPlan,
    records: &[TrialRecord],
    phi: TestFn,
) -> Result<SummaryStats> {
    if !plan.observables.chi {
        return Err(Error::domain("plan does not record chi"));
    }
    let idx = plan
        .observables
        .partial_ls
        .iter()
        .position(|&t| t == phi)
        .ok_or_else(|| Error::domain(format!("plan does not record partial_ls[{}]", phi.tag())))?;
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| !r.excluded)
        .filter_map(|r| match (r.partial_ls.get(idx).copied().flatten(), r.chi) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        })
        .collect();
    let dropped = records.len() - pairs.len();
    if pairs.len() < 1000 {
        return Err(Error::domain(format!(
            "covariance check needs at least 1000 usable trials, have {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let cov = sxy / (n - 1.0);
    // leave-one-out covariances via the rank-one downdate of sxy
    let mut jack = Vec::with_capacity(pairs.len());
    for &(x, y) in &pairs {
        let s_i = sxy - (x - mx) * (y - my) * n / (n - 1.0);
        jack.push(s_i / (n - 2.0));
    }
    let jm = jack.iter().sum::<f64>() / n;
    let jack_se =
        ((n - 1.0) / n * jack.iter().map(|c| (c - jm) * (c - jm)).sum::<f64>()).sqrt();
    let j = plan.ensemble.j;
    let moments = Moments::from(plan.ensemble.dist);
    let tau2 = analytics::tau_ell(&phi.make(j), 2)?;
    let predicted_cov = 2.0 * moments.w3 * tau2 * (1.0 - 1.0 / (j * j));
    let predicted_chi_mean = moments.w3 * (j.powi(-2) - j.powi(-4));
    let var_x = sxx / (n - 1.0);
    let var_y = syy / (n - 1.0);
    let se_chi = (var_y / n).sqrt();
    Ok(SummaryStats {
        labels: vec![format!("partial_ls[{}]", phi.tag()), "chi".to_string()],
        means: vec![mx, my],
        variances: vec![var_x, var_y],
        std_errors: vec![(var_x / n).sqrt(), se_chi],
        covariance: vec![vec![var_x, cov], vec![cov, var_y]],
        used_trials: pairs.len(),
        excluded_trials: dropped,
        checks: vec![
            PredictionCheck {
                label: "cov(partial_ls, chi) vs limit".to_string(),
                observed: cov,
                predicted: predicted_cov,
                std_error: jack_se,
                z: (cov - predicted_cov) / jack_se,
            },
            PredictionCheck {
                label: "chi mean vs limit".to_string(),
                observed: my,
                predicted: predicted_chi_mean,
                std_error: se_chi,
                z: (my - predicted_chi_mean) / se_chi,
            },
        ],
        ks: Vec::new(),
    })
}

// fixed seed for the reference draw of the limit law; any constant works,
// it only has to be stable so summaries are reproducible
const REFERENCE_SEED: u64 = 0x5EED_0F_11317;

/// Centered, rescaled exact free energies N(F - centering) against a
/// 100000-sample draw of the limit law: two-sample KS plus mean and
/// variance z-tests with both sampling errors combined.
pub fn check_transition_law(
    plan: &ExperimentPlan,
    records: &[TrialRecord],
    law: &BivariateGaussianLaw,
) -> Result<SummaryStats> {
    let n_sys = plan.ensemble.n;
    let nf = n_sys as f64;
    let centering = analytics::transitional_centering(n_sys, &plan.transition);
    let xs: Vec<f64> = records
        .iter()
        .filter(|r| !r.excluded)
        .filter_map(|r| r.f_exact)
        .map(|f| nf * (f - centering))
        .collect();
    let dropped = records.len() - xs.len();
    if xs.len() < 1000 {
        return Err(Error::domain(format!(
            "limit-law check needs at least 1000 usable trials, have {}",
            xs.len()
        )));
    }
    let reference = analytics::sample_transition_limit(&plan.transition, law, 100_000, REFERENCE_SEED)?;
    let (d, p) = ks_two_sample(&xs, &reference)?;
    let n = xs.len() as f64;
    let m = reference.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let var_x = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum::<f64>() / (n - 1.0);
    let mean_r = reference.iter().sum::<f64>() / m;
    let var_r = reference.iter().map(|x| (x - mean_r) * (x - mean_r)).sum::<f64>() / (m - 1.0);
    let se_mean = (var_x / n + var_r / m).sqrt();
    let se_var = (2.0 * var_x * var_x / (n - 1.0) + 2.0 * var_r * var_r / (m - 1.0)).sqrt();
    Ok(SummaryStats {
        labels: vec!["n_centered_f".to_string()],
        means: vec![mean_x],
        variances: vec![var_x],
        std_errors: vec![(var_x / n).sqrt()],
        covariance: vec![vec![var_x]],
        used_trials: xs.len(),
        excluded_trials: dropped,
        checks: vec![
            PredictionCheck {
                label: "mean vs sampled limit".to_string(),
                observed: mean_x,
                predicted: mean_r,
                std_error: se_mean,
                z: (mean_x - mean_r) / se_mean,
            },
            PredictionCheck {
                label: "variance vs sampled limit".to_string(),
                observed: var_x,
                predicted: var_r,
                std_error: se_var,
                z: (var_x - var_r) / se_var,
            },
        ],
        ks: vec![KsResult { label: "vs sampled limit law".to_string(), statistic: d, p_value: p }],
    })
}

/// Two-sample Kolmogorov-Smirnov: sup distance between the empirical CDFs
/// and the asymptotic p-value from the Kolmogorov series.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("the KS test needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    a.sort_by(f64::total_cmp);
    let mut b = b.to_vec();
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let (xa, xb) = (a[i], b[j]);
        if xa <= xb {
            i += 1;
        }
        if xb <= xa {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, kolmogorov_tail(lambda).clamp(0.0, 1.0)))
}

fn ks_one_sample_sorted<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_tail(lambda).clamp(0.0, 1.0))
}

/// A parsed record table: the observable schema recovered from the header
/// plus the records themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordTable {
    pub observables: Observables,
    pub records: Vec<TrialRecord>,
}

/// CSV export: a version header, a column line derived from the
/// observable schema, one row per trial. Notes are flattened so the file
/// stays one-line-per-record.
pub fn records_to_csv(obs: &Observables, records: &[TrialRecord]) -> String {
    let labels = observable_labels(obs);
    let mut out = String::from("# trial records v1\n");
    out.push_str("trial,seed,excluded");
    for l in &labels {
        out.push(',');
        out.push_str(l);
    }
    if obs.rigidity {
        out.push_str(",rigidity_flagged");
    }
    out.push_str(",note\n");
    for rec in records {
        out.push_str(&format!("{},{},{}", rec.trial, rec.seed, u8::from(rec.excluded)));
        for cell in value_cells(obs, rec) {
            out.push(',');
            if let Some(v) = cell {
                out.push_str(&format!("{v}"));
            }
        }
        if obs.rigidity {
            out.push(',');
            if let Some(flag) = rec.rigidity_flagged {
                out.push_str(if flag { "1" } else { "0" });
            }
        }
        out.push(',');
        out.push_str(&rec.note.replace(',', ";").replace('\n', " "));
        out.push('\n');
    }
    out
}

/// Parse a table written by [`records_to_csv`], rebuilding the observable
/// schema from the column names.
pub fn records_from_csv(text: &str) -> Result<RecordTable> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if !header.starts_with("# trial records v1") {
        return Err(Error::domain(format!(
            "expected a '# trial records v1' header, found {header:?}"
        )));
    }
    let columns: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::domain("missing column line"))?
        .split(',')
        .collect();
    if columns.len() < 4 || columns[0] != "trial" || columns[1] != "seed" || columns[2] != "excluded"
    {
        return Err(Error::domain("column line must start with trial,seed,excluded"));
    }
    if columns[columns.len() - 1] != "note" {
        return Err(Error::domain("column line must end with note"));
    }
    let mut obs = Observables::default();
    let mut has_flag_column = false;
    for col in &columns[3..columns.len() - 1] {
        if let Some(tag) = col.strip_prefix("partial_ls[").and_then(|c| c.strip_suffix(']')) {
            obs.partial_ls.push(TestFn::parse(tag)?);
        } else if let Some(tag) = col.strip_prefix("full_ls[").and_then(|c| c.strip_suffix(']')) {
            obs.full_ls.push(TestFn::parse(tag)?);
        } else {
            match *col {
                "chi" => obs.chi = true,
                "f_exact" => obs.f_exact = true,
                "f_transitional" => obs.f_transitional = true,
                "f_steepest" => obs.f_steepest = true,
                "max_bulk_dev" | "edge_dev" => obs.rigidity = true,
                "rigidity_flagged" => has_flag_column = true,
                other => return Err(Error::domain(format!("unknown column {other:?}"))),
            }
        }
    }
    // a writer bug would scramble the order; reject anything nonstandard
    let mut expected = vec!["trial".to_string(), "seed".to_string(), "excluded".to_string()];
    expected.extend(observable_labels(&obs));
    if obs.rigidity {
        expected.push("rigidity_flagged".to_string());
    }
    expected.push("note".to_string());
    if columns != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::domain(format!("unexpected column order: {}", columns.join(","))));
    }

    let parse_cell = |cell: &str, what: &str, row: usize| -> Result<Option<f64>> {
        if cell.is_empty() {
            return Ok(None);
        }
        cell.parse::<f64>().map(Some).map_err(|_| {
            Error::domain(format!("row {row}: bad {what} value {cell:?}"))
        })
    };

    let mut records = Vec::new();
    for (line_no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = line_no + 3;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(Error::domain(format!(
                "row {row}: expected {} cells, found {}",
                columns.len(),
                cells.len()
            )));
        }
        let trial = cells[0]
            .parse::<usize>()
            .map_err(|_| Error::domain(format!("row {row}: bad trial index {:?}", cells[0])))?;
        let seed = cells[1]
            .parse::<u64>()
            .map_err(|_| Error::domain(format!("row {row}: bad seed {:?}", cells[1])))?;
        let excluded = match cells[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::domain(format!("row {row}: bad excluded flag {other:?}")))
            }
        };
        let mut rec = TrialRecord {
            trial,
            seed,
            chi: None,
            partial_ls: Vec::new(),
            full_ls: Vec::new(),
            f_exact: None,
            f_transitional: None,
            f_steepest: None,
            max_bulk_deviation: None,
            edge_deviation: None,
            rigidity_flagged: None,
            excluded,
            note: String::new(),
        };
        let mut k = 3;
        if obs.chi {
            rec.chi = parse_cell(cells[k], "chi", row)?;
            k += 1;
        }
        for _ in 0..obs.partial_ls.len() {
            rec.partial_ls.push(parse_cell(cells[k], "partial_ls", row)?);
            k += 1;
        }
        for _ in 0..obs.full_ls.len() {
            rec.full_ls.push(parse_cell(cells[k], "full_ls", row)?);
            k += 1;
        }
        if obs.f_exact {
            rec.f_exact = parse_cell(cells[k], "f_exact", row)?;
            k += 1;
        }
        if obs.f_transitional {
            rec.f_transitional = parse_cell(cells[k], "f_transitional", row)?;
            k += 1;
        }
        if obs.f_steepest {
            rec.f_steepest = parse_cell(cells[k], "f_steepest", row)?;
            k += 1;
        }
        if obs.rigidity {
            rec.max_bulk_deviation = parse_cell(cells[k], "max_bulk_dev", row)?;
            rec.edge_deviation = parse_cell(cells[k + 1], "edge_dev", row)?;
            k += 2;
        }
        if has_flag_column {
            rec.rigidity_flagged = match cells[k] {
                "" => None,
                "0" => Some(false),
                "1" => Some(true),
                other => {
                    return Err(Error::domain(format!(
                        "row {row}: bad rigidity flag {other:?}"
                    )))
                }
            };
            k += 1;
        }
        rec.note = cells[k].to_string();
        records.push(rec);
    }
    Ok(RecordTable { observables: obs, records })
}
