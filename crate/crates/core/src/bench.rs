//! Benchmark driver: simulate sets per (network, length), recover each
//! network, score it, and time the recovery phase.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cao::select_lag_cao_with;
use crate::engine::{gc_network_with_lag, GcConfig, LagSpec, PValueMatrix};
use crate::error::{Error, Result};
use crate::eval::{evaluate, gmean_optimal_threshold, percentile, EdgeScores, NetworkEvalReport, DEFAULT_THRESHOLD};
use crate::simnet::{generate, GroundTruth, NetworkName, NetworkSpec, DEFAULT_BURN_IN};
use crate::ts::TimeSeriesPanel;

/// A combination with a larger failed fraction is flagged invalid.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub networks: Vec<NetworkName>,
    pub lengths: Vec<usize>,
    pub n_sets: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub config: GcConfig,
    pub burn_in: usize,
    pub threshold: f64,
}

impl ExperimentPlan {
    pub fn new(networks: Vec<NetworkName>, lengths: Vec<usize>, n_sets: usize, base_seed: u64, workers: usize) -> Self {
        Self {
            networks,
            lengths,
            n_sets,
            base_seed,
            workers,
            config: GcConfig::default(),
            burn_in: DEFAULT_BURN_IN,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.networks.is_empty() {
            return Err(Error::InvalidParameter("no networks in plan".into()));
        }
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(Error::InvalidParameter("lengths must be non-empty and positive".into()));
        }
        if self.n_sets == 0 {
            return Err(Error::InvalidParameter("n_sets must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        self.config.validate()
    }

    pub fn set_seed(&self, set_index: usize) -> u64 {
        self.base_seed ^ set_index as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub network: NetworkName,
    pub length: usize,
    pub set_index: usize,
    pub seed: u64,
    pub lag: usize,
    pub report: NetworkEvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetFailure {
    pub network: NetworkName,
    pub length: usize,
    pub set_index: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRecord {
    pub network: NetworkName,
    pub length: usize,
    pub wall_seconds: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("nothing to summarize".into()));
        }
        Ok(Self {
            median: percentile(values, 0.5),
            p25: percentile(values, 0.25),
            p75: percentile(values, 0.75),
            min: percentile(values, 0.0),
            max: percentile(values, 1.0),
        })
    }
}

/// Five-number summaries keyed by metric name.
pub fn summarize(reports: &[NetworkEvalReport]) -> Result<BTreeMap<String, Summary>> {
    NetworkEvalReport::METRICS
        .iter()
        .map(|&name| {
            let values: Vec<f64> = reports.iter().map(|r| r.metric(name).expect("known metric")).collect();
            Ok((name.to_string(), Summary::of(&values)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationSummary {
    pub network: NetworkName,
    pub length: usize,
    pub lag: Option<usize>,
    pub n_sets: usize,
    pub n_failed: usize,
    pub valid: bool,
    pub gmean_threshold: Option<f64>,
    pub metrics: BTreeMap<String, Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub reports: Vec<SetReport>,
    pub failures: Vec<SetFailure>,
    pub runtimes: Vec<RuntimeRecord>,
    pub summaries: Vec<CombinationSummary>,
}

/// Per-set recovery output kept for scoring.
struct Recovered {
    set_index: usize,
    matrix: PValueMatrix,
    truth: GroundTruth,
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    pool.install(|| {
        let mut result = ExperimentResult { reports: Vec::new(), failures: Vec::new(), runtimes: Vec::new(), summaries: Vec::new() };
        for &network in &plan.networks {
            for &length in &plan.lengths {
                run_combination(plan, network, length, &mut result);
            }
        }
        Ok(result)
    })
}

fn run_combination(plan: &ExperimentPlan, network: NetworkName, length: usize, out: &mut ExperimentResult) {
    let fail = |set_index: usize, message: String| SetFailure { network, length, set_index, seed: plan.set_seed(set_index), message };
    let mut failures = Vec::new();

    let generated: Vec<Result<(TimeSeriesPanel, GroundTruth)>> = (0..plan.n_sets)
        .into_par_iter()
        .map(|k| generate(&NetworkSpec { name: network, length, burn_in: plan.burn_in, seed: plan.set_seed(k) }))
        .collect();
    let mut sets = Vec::new();
    for (k, g) in generated.into_iter().enumerate() {
        match g {
            Ok(pt) => sets.push((k, pt)),
            Err(e) => failures.push(fail(k, e.to_string())),
        }
    }

    let lag = match plan.config.lags {
        LagSpec::Fixed(l) => Ok(l),
        LagSpec::AutoCao => match sets.first() {
            Some((_, (panel, _))) => select_lag_cao_with(panel, &plan.config.cao),
            None => Err(Error::InsufficientData("no set was generated".into())),
        },
    };
    let lag = match lag {
        Ok(l) => {
            log::info!("{network} length {length}: lag {l}");
            Some(l)
        }
        Err(e) => {
            for (k, _) in &sets {
                failures.push(fail(*k, format!("lag selection failed: {e}")));
            }
            sets.clear();
            None
        }
    };

    let mut recovered = Vec::new();
    if let Some(lag) = lag.filter(|_| !sets.is_empty()) {
        let start = Instant::now();
        let matrices: Vec<(usize, Result<PValueMatrix>)> =
            sets.par_iter().map(|(k, (panel, _))| (*k, gc_network_with_lag(panel, &plan.config, lag))).collect();
        let elapsed = start.elapsed().as_secs_f64();
        out.runtimes.push(RuntimeRecord { network, length, wall_seconds: elapsed.max(1e-9), workers: plan.workers });
        for ((k, m), (_, (_, truth))) in matrices.into_iter().zip(sets) {
            match m {
                Ok(matrix) => recovered.push(Recovered { set_index: k, matrix, truth }),
                Err(e) => failures.push(fail(k, e.to_string())),
            }
        }
    }

    let mut scored = Vec::new();
    for r in recovered {
        match EdgeScores::from_matrix(&r.matrix, &r.truth) {
            Ok(s) => scored.push((r.set_index, s)),
            Err(e) => failures.push(fail(r.set_index, e.to_string())),
        }
    }
    let score_sets: Vec<EdgeScores> = scored.iter().map(|(_, s)| s.clone()).collect();
    let gmean_threshold = gmean_optimal_threshold(&score_sets).ok();
    let mut reports = Vec::new();
    if let Some(gt) = gmean_threshold {
        for (k, s) in scored {
            match evaluate(&s, plan.threshold, gt) {
                Ok(report) => reports.push(SetReport {
                    network,
                    length,
                    set_index: k,
                    seed: plan.set_seed(k),
                    lag: lag.expect("recovery ran"),
                    report,
                }),
                Err(e) => failures.push(fail(k, e.to_string())),
            }
        }
    }
    reports.sort_by_key(|r| r.set_index);
    failures.sort_by_key(|f| f.set_index);

    let n_failed = failures.len();
    let valid = !reports.is_empty() && (n_failed as f64) <= MAX_FAILED_FRACTION * plan.n_sets as f64;
    if !valid {
        log::warn!("{network} length {length}: {n_failed} of {} sets failed; combination invalid", plan.n_sets);
    }
    let metrics = summarize(&reports.iter().map(|r| r.report).collect::<Vec<_>>()).unwrap_or_default();
    out.summaries.push(CombinationSummary { network, length, lag, n_sets: plan.n_sets, n_failed, valid, gmean_threshold, metrics });
    out.reports.extend(reports);
    out.failures.extend(failures);
}

const METRICS_HEADER: [&str; 5] = ["network", "length", "set", "seed", "lag"];

pub fn write_metrics_csv<W: Write>(writer: W, reports: &[SetReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = METRICS_HEADER.iter().copied().chain(NetworkEvalReport::METRICS).collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let mut rec = vec![r.network.to_string(), r.length.to_string(), r.set_index.to_string(), r.seed.to_string(), r.lag.to_string()];
        rec.extend(NetworkEvalReport::METRICS.iter().map(|m| format!("{:?}", r.report.metric(m).expect("known"))));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runtimes_csv<W: Write>(writer: W, runtimes: &[RuntimeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["network", "length", "wall_seconds", "workers"]).map_err(csv_err)?;
    for r in runtimes {
        w.write_record([r.network.to_string(), r.length.to_string(), format!("{:?}", r.wall_seconds), r.workers.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summaries_json<W: Write>(writer: W, summaries: &[CombinationSummary]) -> Result<()> {
    serde_json::to_writer_pretty(writer, summaries)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
