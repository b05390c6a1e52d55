//! Time-series panels, lag designs, time-ordered splits and quantile scaling.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of aligned, gap-free, equally spaced series sharing one time index.
///
/// Values are stored series-major: `columns[g][t]` is series `g` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl TimeSeriesPanel {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidPanel(format!("{} names for {} columns", names.len(), columns.len())));
        }
        if names.len() < 2 {
            return Err(Error::InvalidPanel(format!("at least 2 series are required, got {}", names.len())));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateSeries(name.clone()));
            }
        }
        let len = columns[0].len();
        if len == 0 {
            return Err(Error::InvalidPanel("series are empty".into()));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != len {
                return Err(Error::InvalidPanel(format!("series `{name}` has length {}, expected {len}", col.len())));
            }
            if let Some(t) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidPanel(format!("series `{name}` has a non-finite value at time {t}")));
            }
        }
        Ok(Self { names, columns })
    }

    /// Builds a panel from time-major rows (`rows[t][g]`).
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let g = names.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); g];
        for (t, row) in rows.iter().enumerate() {
            if row.len() != g {
                return Err(Error::InvalidPanel(format!("row {t} has {} values, expected {g}", row.len())));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Self::new(names, columns)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_series(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn series(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::UnknownSeries(name.to_string()))
    }

    /// Returns a copy with every column replaced by `f(column)`.
    pub fn map_columns<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let columns = self.columns.iter().map(|c| f(c)).collect::<Result<_>>()?;
        Self::new(self.names.clone(), columns)
    }

    /// Reads the CSV panel format: a header of series names, then one row per
    /// time point. Row numbers in errors are 1-based file lines.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> =
            rdr.headers().map_err(|e| Error::Csv { row: 1, message: e.to_string() })?.iter().map(str::to_string).collect();
        if names.iter().any(|n| n.is_empty()) {
            return Err(Error::Csv { row: 1, message: "empty series name".into() });
        }
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| Error::Csv { row, message: e.to_string() })?;
            if record.len() != names.len() {
                return Err(Error::Csv { row, message: format!("expected {} cells, found {}", names.len(), record.len()) });
            }
            let mut values = Vec::with_capacity(names.len());
            for (cell, name) in record.iter().zip(&names) {
                if cell.is_empty() {
                    return Err(Error::Csv { row, message: format!("missing value for `{name}`") });
                }
                let v: f64 =
                    cell.parse().map_err(|_| Error::Csv { row, message: format!("`{cell}` is not a number (series `{name}`)") })?;
                if !v.is_finite() {
                    return Err(Error::Csv { row, message: format!("non-finite value for `{name}`") });
                }
                values.push(v);
            }
            rows.push(values);
        }
        if rows.is_empty() {
            return Err(Error::Csv { row: 2, message: "no data rows".into() });
        }
        Self::from_rows(names, &rows).map_err(|e| Error::Csv { row: 1, message: e.to_string() })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wtr.write_record(&self.names).map_err(io)?;
        let mut buf = Vec::with_capacity(self.n_series());
        for t in 0..self.len() {
            buf.clear();
            buf.extend(self.columns.iter().map(|c| format!("{:?}", c[t])));
            wtr.write_record(&buf).map_err(io)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Lagged regressors and the aligned target.
///
/// Row `t` holds lags `1..=L` of every included series (series in panel
/// order, lag 1 first within each group) and `y[t]` is the target at panel
/// row `first_target_row + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagDesign {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub lag_count: usize,
    pub included_series: Vec<String>,
    pub target: String,
    /// Panel row index of `y[0]`.
    pub first_target_row: usize,
}

impl LagDesign {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Column labels such as `x1_lag2`, in column order.
    pub fn column_labels(&self) -> Vec<String> {
        self.included_series.iter().flat_map(|s| (1..=self.lag_count).map(move |l| format!("{s}_lag{l}"))).collect()
    }

    pub fn rows(&self, range: Range<usize>) -> LagDesign {
        let n = range.len();
        LagDesign {
            x: self.x.rows(range.start, n).into_owned(),
            y: self.y.rows(range.start, n).into_owned(),
            lag_count: self.lag_count,
            included_series: self.included_series.clone(),
            target: self.target.clone(),
            first_target_row: self.first_target_row + range.start,
        }
    }
}

/// Builds the lag matrix for `target`, leaving out the `excluded` series.
/// An empty exclusion set gives the unrestricted design; excluding the
/// candidate cause gives the restricted one.
pub fn build_lag_design(panel: &TimeSeriesPanel, target: &str, excluded: &[&str], lags: usize) -> Result<LagDesign> {
    if lags == 0 {
        return Err(Error::InvalidParameter("lag count must be at least 1".into()));
    }
    let target_idx = panel.index_of(target)?;
    let mut skip = vec![false; panel.n_series()];
    for name in excluded {
        let idx = panel.index_of(name)?;
        if idx == target_idx {
            return Err(Error::TargetExcluded(target.to_string()));
        }
        skip[idx] = true;
    }
    let len = panel.len();
    if lags >= len {
        return Err(Error::LagTooLarge { lags, length: len });
    }
    let n = len - lags;
    let included: Vec<usize> = (0..panel.n_series()).filter(|&g| !skip[g]).collect();
    let d = included.len() * lags;
    let x = DMatrix::from_fn(n, d, |t, c| {
        let g = included[c / lags];
        let l = c % lags + 1;
        panel.series(g)[t + lags - l]
    });
    let y = DVector::from_fn(n, |t, _| panel.series(target_idx)[t + lags]);
    Ok(LagDesign {
        x,
        y,
        lag_count: lags,
        included_series: included.iter().map(|&g| panel.names()[g].clone()).collect(),
        target: target.to_string(),
        first_target_row: lags,
    })
}

/// Time-ordered split: the first `train_fraction` of rows train, then `gap`
/// rows are dropped, and the rest is test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// Rows discarded between train and test; `None` means "use the lag count".
    pub gap: Option<usize>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.7, gap: None }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!("train fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        Ok(())
    }

    /// Row ranges `(train, test)` over a design of `n_rows` built with `lags`.
    pub fn ranges(&self, n_rows: usize, lags: usize) -> Result<(Range<usize>, Range<usize>)> {
        self.validate()?;
        let gap = self.gap.unwrap_or(lags);
        let n_train = (self.train_fraction * n_rows as f64).floor() as usize;
        if n_train == 0 {
            return Err(Error::InsufficientData(format!("empty training set from {n_rows} rows")));
        }
        let test_start = n_train + gap;
        if test_start >= n_rows {
            return Err(Error::InsufficientData(format!("empty test set: {n_rows} rows, {n_train} train, gap {gap}")));
        }
        Ok((0..n_train, test_start..n_rows))
    }
}

pub fn split_train_test(design: &LagDesign, spec: &SplitSpec) -> Result<(LagDesign, LagDesign)> {
    let (train, test) = spec.ranges(design.n_rows(), design.lag_count)?;
    Ok((design.rows(train), design.rows(test)))
}

/// Empirical-CDF scaling onto [0, 1] fitted on a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTransform {
    quantiles: Vec<f64>,
    references: Vec<f64>,
}

impl QuantileTransform {
    /// Fits `n_quantiles` (capped at the sample size) evenly spaced quantiles,
    /// using linear interpolation between order statistics.
    pub fn fit(sample: &[f64], n_quantiles: usize) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InsufficientData("empty quantile fit range".into()));
        }
        if n_quantiles < 2 {
            return Err(Error::InvalidParameter(format!("n_quantiles must be at least 2, got {n_quantiles}")));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let nq = n_quantiles.min(sorted.len());
        let references: Vec<f64> = if nq == 1 { vec![0.0] } else { (0..nq).map(|k| k as f64 / (nq - 1) as f64).collect() };
        let last = (sorted.len() - 1) as f64;
        let quantiles = references
            .iter()
            .map(|&r| {
                let pos = r * last;
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(sorted.len() - 1);
                let frac = pos - lo as f64;
                sorted[lo] + frac * (sorted[hi] - sorted[lo])
            })
            .collect();
        Ok(Self { quantiles, references })
    }

    /// A zero-width quantile grid (constant fit sample).
    pub fn is_degenerate(&self) -> bool {
        self.quantiles[0] == self.quantiles[self.quantiles.len() - 1]
    }

    pub fn n_quantiles(&self) -> usize {
        self.quantiles.len()
    }

    pub fn transform_value(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            return 0.5;
        }
        let q = &self.quantiles;
        let r = &self.references;
        let n = q.len();
        let interp = |k: usize| {
            // segment (k-1, k), with q[k-1] <= v <= q[k] and q[k-1] < q[k]
            let (q0, q1) = (q[k - 1], q[k]);
            r[k - 1] + (v - q0) / (q1 - q0) * (r[k] - r[k - 1])
        };
        // Interpolate from both ends of any run of repeated quantiles and
        // average, so ties land mid-run.
        let below = q.partition_point(|&x| x < v);
        let lower = match below {
            0 => 0.0,
            k if k == n => 1.0,
            k => interp(k),
        };
        let upto = q.partition_point(|&x| x <= v);
        let upper = match upto {
            0 => 0.0,
            k if k == n => 1.0,
            k => interp(k),
        };
        (0.5 * (lower + upper)).clamp(0.0, 1.0)
    }

    pub fn transform(&self, series: &[f64]) -> Vec<f64> {
        series.iter().map(|&v| self.transform_value(v)).collect()
    }
}

/// Output of [`quantile_transform`]; `degenerate` flags a constant fit range.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileOutput {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

/// Fits the quantile grid on `fit_range` and maps the whole series.
pub fn quantile_transform(series: &[f64], n_quantiles: usize, fit_range: Range<usize>) -> Result<QuantileOutput> {
    if fit_range.is_empty() || fit_range.end > series.len() {
        return Err(Error::InvalidParameter(format!("fit range {fit_range:?} is empty or outside a series of length {}", series.len())));
    }
    let qt = QuantileTransform::fit(&series[fit_range], n_quantiles)?;
    let degenerate = qt.is_degenerate();
    if degenerate {
        log::warn!("constant series in quantile fit range; mapping every value to 0.5");
    }
    Ok(QuantileOutput { values: qt.transform(series), degenerate })
}
