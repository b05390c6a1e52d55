//! Directed-pair and all-pairs Granger causality for the kernel method and
//! the linear F-test baseline.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cao::{select_lag_cao_with, CaoConfig};
use crate::error::{Error, Result};
use crate::krr::{CrossKernel, KernelConfig, KernelSystem};
use crate::stats::{nested_f_test, sign_test, wilcoxon_signed_rank, DeltaVector, TestOutcome};
use crate::ts::{build_lag_design, quantile_transform, LagDesign, SplitSpec, TimeSeriesPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagSpec {
    Fixed(usize),
    AutoCao,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocess {
    Quantile(usize),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Krr,
    LinearF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Sign,
    Wilcoxon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcConfig {
    pub lags: LagSpec,
    pub split: SplitSpec,
    pub kernel: KernelConfig,
    pub test: TestKind,
    pub preprocess: Preprocess,
    pub method: Method,
    pub cao: CaoConfig,
}

impl Default for GcConfig {
    fn default() -> Self {
        Self {
            lags: LagSpec::AutoCao,
            split: SplitSpec::default(),
            kernel: KernelConfig::default(),
            test: TestKind::Sign,
            preprocess: Preprocess::Quantile(1000),
            method: Method::Krr,
            cao: CaoConfig::default(),
        }
    }
}

impl GcConfig {
    pub fn validate(&self) -> Result<()> {
        if let LagSpec::Fixed(0) = self.lags {
            return Err(Error::InvalidParameter("lag count must be at least 1".into()));
        }
        if let Preprocess::Quantile(q) = self.preprocess {
            if q < 2 {
                return Err(Error::InvalidParameter(format!("need at least 2 quantiles, got {q}")));
            }
        }
        self.split.validate()?;
        self.kernel.validate()?;
        if self.lags == LagSpec::AutoCao {
            self.cao.validate()?;
        }
        Ok(())
    }

    /// Same configuration with the lag count pinned.
    pub fn with_lags(&self, lags: usize) -> Self {
        Self { lags: LagSpec::Fixed(lags), ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcTestResult {
    pub source: String,
    pub target: String,
    pub outcome: TestOutcome,
    pub errors_restricted: Vec<f64>,
    pub errors_unrestricted: Vec<f64>,
    pub lags_used: usize,
    pub config: GcConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub source: String,
    pub target: String,
    pub message: String,
}

/// `pvalues[i][j]` is the p-value for "series i causes series j"; the
/// diagonal and failed cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueMatrix {
    pub series: Vec<String>,
    pub pvalues: Vec<Vec<Option<f64>>>,
    pub lag_used: usize,
    pub failures: Vec<CellError>,
}

impl PValueMatrix {
    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    pub fn get(&self, source: usize, target: usize) -> Option<f64> {
        self.pvalues[source][target]
    }
}

/// Resolves the configured lag count, running Cao's method on the raw panel
/// when asked.
pub fn resolve_lags(panel: &TimeSeriesPanel, config: &GcConfig) -> Result<usize> {
    match config.lags {
        LagSpec::Fixed(0) => Err(Error::InvalidParameter("lag count must be at least 1".into())),
        LagSpec::Fixed(l) => Ok(l),
        LagSpec::AutoCao => {
            let l = select_lag_cao_with(panel, &config.cao)?;
            log::info!("selected lag {l} by Cao's method");
            Ok(l)
        }
    }
}

/// Applies the configured preprocessing, fitting on the first `fit_len` rows.
fn preprocess(panel: &TimeSeriesPanel, config: &GcConfig, fit_len: usize) -> Result<TimeSeriesPanel> {
    match config.preprocess {
        Preprocess::None => Ok(panel.clone()),
        Preprocess::Quantile(q) => panel.map_columns(|col| Ok(quantile_transform(col, q, 0..fit_len)?.values)),
    }
}

/// Training row count after lagging; quantile fits cover the panel rows
/// that feed the training designs.
fn krr_fit_len(panel: &TimeSeriesPanel, lags: usize, split: &SplitSpec) -> Result<usize> {
    if lags >= panel.len() {
        return Err(Error::LagTooLarge { lags, length: panel.len() });
    }
    let (train, _) = split.ranges(panel.len() - lags, lags)?;
    Ok(lags + train.end)
}

fn check_pair(panel: &TimeSeriesPanel, source: &str, target: &str) -> Result<(usize, usize)> {
    let s = panel.index_of(source)?;
    let t = panel.index_of(target)?;
    if s == t {
        return Err(Error::SameSeries(source.to_string()));
    }
    Ok((s, t))
}

fn run_test(kind: TestKind, delta: &DeltaVector) -> Result<TestOutcome> {
    match kind {
        TestKind::Sign => sign_test(delta),
        TestKind::Wilcoxon => wilcoxon_signed_rank(delta),
    }
}

/// Factorized train block of one design, plus its test-vs-train kernel.
struct FittedDesign {
    system: KernelSystem,
    cross: CrossKernel,
}

impl FittedDesign {
    fn new(design: &LagDesign, train: &std::ops::Range<usize>, test: &std::ops::Range<usize>, kernel: &KernelConfig) -> Result<Self> {
        let train_x = design.x.rows(train.start, train.len()).into_owned();
        let system = KernelSystem::factor(&train_x, kernel)?;
        if system.jittered() {
            log::warn!("kernel system for target {} needed diagonal jitter", design.target);
        }
        let cross = system.cross_kernel(&design.x.rows(test.start, test.len()).into_owned())?;
        Ok(Self { system, cross })
    }

    /// Test-set residuals `y - y_hat` for target vector `y`.
    fn test_errors(&self, y: &DVector<f64>, train: &std::ops::Range<usize>, test: &std::ops::Range<usize>) -> Result<Vec<f64>> {
        let y_train = y.rows(train.start, train.len()).into_owned();
        let model = self.system.solve(&y_train)?;
        let pred = self.cross.predict(&model)?;
        Ok(test.clone().zip(pred.iter()).map(|(i, p)| y[i] - p).collect())
    }
}

/// One directed test: does `source` Granger-cause `target`?
pub fn gc_test(panel: &TimeSeriesPanel, source: &str, target: &str, config: &GcConfig) -> Result<GcTestResult> {
    config.validate()?;
    check_pair(panel, source, target)?;
    let lags = resolve_lags(panel, config)?;
    match config.method {
        Method::Krr => krr_pair(panel, source, target, lags, config),
        Method::LinearF => linear_pair(panel, source, target, lags, config),
    }
}

fn krr_pair(panel: &TimeSeriesPanel, source: &str, target: &str, lags: usize, config: &GcConfig) -> Result<GcTestResult> {
    let fit_len = krr_fit_len(panel, lags, &config.split)?;
    let prepared = preprocess(panel, config, fit_len)?;
    let design_u = build_lag_design(&prepared, target, &[], lags)?;
    let design_r = build_lag_design(&prepared, target, &[source], lags)?;
    let (train, test) = config.split.ranges(design_u.n_rows(), lags)?;
    let fit_u = FittedDesign::new(&design_u, &train, &test, &config.kernel)?;
    let fit_r = FittedDesign::new(&design_r, &train, &test, &config.kernel)?;
    let errors_unrestricted = fit_u.test_errors(&design_u.y, &train, &test)?;
    let errors_restricted = fit_r.test_errors(&design_r.y, &train, &test)?;
    let delta = DeltaVector::from_abs_errors(&errors_restricted, &errors_unrestricted)?;
    Ok(GcTestResult {
        source: source.to_string(),
        target: target.to_string(),
        outcome: run_test(config.test, &delta)?,
        errors_restricted,
        errors_unrestricted,
        lags_used: lags,
        config: config.with_lags(lags),
    })
}

/// Classical F-test: OLS with intercept over all rows, no split.
pub fn gc_test_linear(panel: &TimeSeriesPanel, source: &str, target: &str, config: &GcConfig) -> Result<GcTestResult> {
    gc_test(panel, source, target, &GcConfig { method: Method::LinearF, ..*config })
}

/// Residual sum of squares and coefficients of an OLS fit with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Intercept first, then one coefficient per design column.
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
}

/// QR of `[1 | X]`, shared across right-hand sides.
struct OlsSystem {
    qr: nalgebra::QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n_params: usize,
}

impl OlsSystem {
    fn new(x: &DMatrix<f64>, labels: &[String]) -> Result<Self> {
        let (n, d) = x.shape();
        let p = d + 1;
        if n <= p {
            return Err(Error::InsufficientData(format!("{n} rows for {p} regression parameters")));
        }
        let mut full = DMatrix::from_element(n, p, 1.0);
        full.columns_mut(1, d).copy_from(x);
        let qr = full.qr();
        let r = qr.r();
        let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let tol = scale * n as f64 * f64::EPSILON * 1e3;
        let bad: Vec<String> = (0..p)
            .filter(|&i| r[(i, i)].abs() <= tol)
            .map(|i| if i == 0 { "intercept".to_string() } else { labels[i - 1].clone() })
            .collect();
        if !bad.is_empty() {
            return Err(Error::RankDeficient(bad));
        }
        Ok(Self { qr, n_params: p })
    }

    fn rss(&self, y: &DVector<f64>) -> f64 {
        let mut qty = y.clone();
        self.qr.q_tr_mul(&mut qty);
        qty.rows(self.n_params, qty.len() - self.n_params).norm_squared()
    }

    fn fit(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
        let mut qty = y.clone();
        self.qr.q_tr_mul(&mut qty);
        let r = self.qr.r();
        let coefficients = r
            .solve_upper_triangular(&qty.rows(0, self.n_params).into_owned())
            .ok_or_else(|| Error::RankDeficient(vec!["design".into()]))?;
        let fitted = x * coefficients.rows(1, x.ncols()) + DVector::from_element(y.len(), coefficients[0]);
        let residuals = y - fitted;
        let rss = residuals.norm_squared();
        Ok(OlsFit { coefficients, residuals, rss })
    }
}

/// Ordinary least squares of `y` on `[1 | x]`; rank deficiency names the
/// dependent columns using `labels`.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, labels: &[String]) -> Result<OlsFit> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
    }
    if labels.len() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), got: labels.len() });
    }
    OlsSystem::new(x, labels)?.fit(x, y)
}

fn linear_outcome(rss_r: f64, rss_u: f64, lags: usize, n_series: usize, n_rows: usize) -> Result<TestOutcome> {
    let used = n_series * lags + 1;
    if n_rows <= used {
        return Err(Error::InsufficientData(format!("denominator degrees of freedom N - G*L - 1 = {n_rows} - {used} is not positive")));
    }
    nested_f_test(rss_r, rss_u, lags, n_rows - used, n_rows)
}

fn linear_pair(panel: &TimeSeriesPanel, source: &str, target: &str, lags: usize, config: &GcConfig) -> Result<GcTestResult> {
    let prepared = preprocess(panel, config, panel.len())?;
    let design_u = build_lag_design(&prepared, target, &[], lags)?;
    let design_r = build_lag_design(&prepared, target, &[source], lags)?;
    let n = design_u.n_rows();
    if n <= panel.n_series() * lags + 1 {
        return Err(linear_outcome(1.0, 1.0, lags, panel.n_series(), n).unwrap_err());
    }
    let sys_u = OlsSystem::new(&design_u.x, &design_u.column_labels())?;
    let sys_r = OlsSystem::new(&design_r.x, &design_r.column_labels())?;
    let fit_u = sys_u.fit(&design_u.x, &design_u.y)?;
    let fit_r = sys_r.fit(&design_r.x, &design_r.y)?;
    // RSS from the rotated tail, as in the network sweep
    let outcome = linear_outcome(sys_r.rss(&design_r.y), sys_u.rss(&design_u.y), lags, panel.n_series(), n)?;
    Ok(GcTestResult {
        source: source.to_string(),
        target: target.to_string(),
        outcome,
        errors_restricted: fit_r.residuals.iter().copied().collect(),
        errors_unrestricted: fit_u.residuals.iter().copied().collect(),
        lags_used: lags,
        config: config.with_lags(lags),
    })
}

/// Tests every ordered pair. Per-pair failures are recorded in the result
/// instead of aborting the sweep; configuration and lag errors still fail.
///
/// The design rows do not depend on the target, so one factorization of the
/// unrestricted system serves all targets and one restricted factorization
/// per excluded source serves all of that source's targets.
pub fn gc_network(panel: &TimeSeriesPanel, config: &GcConfig) -> Result<PValueMatrix> {
    config.validate()?;
    let lags = resolve_lags(panel, config)?;
    gc_network_with_lag(panel, config, lags)
}

/// [`gc_network`] with the lag count already chosen.
pub fn gc_network_with_lag(panel: &TimeSeriesPanel, config: &GcConfig, lags: usize) -> Result<PValueMatrix> {
    config.validate()?;
    if lags == 0 {
        return Err(Error::InvalidParameter("lag count must be at least 1".into()));
    }
    let g = panel.n_series();
    let names = panel.names().to_vec();
    let rows: Vec<Vec<std::result::Result<TestOutcome, String>>> = match config.method {
        Method::Krr => krr_network(panel, config, lags)?,
        Method::LinearF => linear_network(panel, config, lags)?,
    };
    let mut pvalues = vec![vec![None; g]; g];
    let mut failures = Vec::new();
    for (s, row) in rows.into_iter().enumerate() {
        for (t, cell) in row.into_iter().enumerate() {
            if s == t {
                continue;
            }
            match cell {
                Ok(outcome) => pvalues[s][t] = Some(outcome.p_value),
                Err(message) => {
                    log::warn!("{} -> {} failed: {message}", names[s], names[t]);
                    failures.push(CellError { source: names[s].clone(), target: names[t].clone(), message });
                }
            }
        }
    }
    Ok(PValueMatrix { series: names, pvalues, lag_used: lags, failures })
}

type CellRow = Vec<std::result::Result<TestOutcome, String>>;

fn fail_row(g: usize, message: &str) -> CellRow {
    (0..g).map(|_| Err(message.to_string())).collect()
}

fn krr_network(panel: &TimeSeriesPanel, config: &GcConfig, lags: usize) -> Result<Vec<CellRow>> {
    let g = panel.n_series();
    let fit_len = krr_fit_len(panel, lags, &config.split)?;
    let prepared = preprocess(panel, config, fit_len)?;
    let names = prepared.names().to_vec();
    let first = names[0].as_str();
    let design_u = build_lag_design(&prepared, first, &[], lags)?;
    let (train, test) = config.split.ranges(design_u.n_rows(), lags)?;
    let targets: Vec<DVector<f64>> = (0..g).map(|t| DVector::from_fn(design_u.n_rows(), |i, _| prepared.series(t)[i + lags])).collect();

    let unrestricted: std::result::Result<Vec<Vec<f64>>, String> = FittedDesign::new(&design_u, &train, &test, &config.kernel)
        .and_then(|fit| (0..g).into_par_iter().map(|t| fit.test_errors(&targets[t], &train, &test)).collect::<Result<Vec<_>>>())
        .map_err(|e| e.to_string());
    let unrestricted = match unrestricted {
        Ok(u) => u,
        Err(message) => return Ok((0..g).map(|_| fail_row(g, &message)).collect()),
    };

    let rows = (0..g)
        .into_par_iter()
        .map(|s| {
            // the restricted design for source s is the same for every target;
            // build it with some target other than s
            let anchor = if s == 0 { 1 } else { 0 };
            let fit = build_lag_design(&prepared, &names[anchor], &[&names[s]], lags)
                .and_then(|d| FittedDesign::new(&d, &train, &test, &config.kernel));
            let fit = match fit {
                Ok(f) => f,
                Err(e) => return fail_row(g, &e.to_string()),
            };
            (0..g)
                .into_par_iter()
                .map(|t| {
                    if t == s {
                        return Err(String::new());
                    }
                    fit.test_errors(&targets[t], &train, &test)
                        .and_then(|restricted| DeltaVector::from_abs_errors(&restricted, &unrestricted[t]))
                        .and_then(|delta| run_test(config.test, &delta))
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();
    Ok(rows)
}

fn linear_network(panel: &TimeSeriesPanel, config: &GcConfig, lags: usize) -> Result<Vec<CellRow>> {
    let g = panel.n_series();
    let prepared = preprocess(panel, config, panel.len())?;
    let names = prepared.names().to_vec();
    let design_u = build_lag_design(&prepared, &names[0], &[], lags)?;
    let n = design_u.n_rows();
    let targets: Vec<DVector<f64>> = (0..g).map(|t| DVector::from_fn(n, |i, _| prepared.series(t)[i + lags])).collect();
    let rss_u: std::result::Result<Vec<f64>, String> = OlsSystem::new(&design_u.x, &design_u.column_labels())
        .map(|sys| targets.iter().map(|y| sys.rss(y)).collect())
        .map_err(|e| e.to_string());
    let rss_u = match rss_u {
        Ok(r) => r,
        Err(message) => return Ok((0..g).map(|_| fail_row(g, &message)).collect()),
    };
    let rows = (0..g)
        .into_par_iter()
        .map(|s| {
            let anchor = if s == 0 { 1 } else { 0 };
            let sys =
                build_lag_design(&prepared, &names[anchor], &[&names[s]], lags).and_then(|d| OlsSystem::new(&d.x, &d.column_labels()));
            let sys = match sys {
                Ok(s) => s,
                Err(e) => return fail_row(g, &e.to_string()),
            };
            (0..g)
                .map(|t| {
                    if t == s {
                        return Err(String::new());
                    }
                    linear_outcome(sys.rss(&targets[t]), rss_u[t], lags, g, n).map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();
    Ok(rows)
}
