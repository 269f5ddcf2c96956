//! Daily closes to realized generalized variance: CSV ingestion, log-returns,
//! windowed covariance determinants, correlation and summary statistics.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::{validate_correlation, CorrelationMatrix};

/// Negative window determinants no larger than this in magnitude are
/// treated as rounding and clamped to zero.
pub const NEGATIVE_DET_CLAMP: f64 = 1e-18;

/// Trading days per year used to annualize covariances.
pub const TRADING_DAYS: f64 = 252.0;

/// Cells read as missing; the whole row is then dropped.
const MISSING: [&str; 4] = ["", "NA", "NaN", "null"];

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    closes: Matrix<f64>,
    dropped_rows: usize,
}

impl PriceSeries {
    /// Builds a series from in-memory data with the same checks as
    /// [`load_prices`]. `closes` is dates x tickers.
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, closes: Matrix<f64>) -> Result<Self> {
        if closes.rows() != dates.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len(),
                found: closes.rows(),
            });
        }
        if closes.cols() != tickers.len() {
            return Err(Error::DimensionMismatch {
                expected: tickers.len(),
                found: closes.cols(),
            });
        }
        for (i, w) in dates.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::UnsortedDates { row: i + 1 });
            }
        }
        for r in 0..closes.rows() {
            for c in 0..closes.cols() {
                let v = closes[(r, c)];
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::NonPositivePrice {
                        row: r,
                        column: c,
                        value: v,
                    });
                }
            }
        }
        Ok(PriceSeries {
            dates,
            tickers,
            closes,
            dropped_rows: 0,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn closes(&self) -> &Matrix<f64> {
        &self.closes
    }

    /// Rows skipped at load time because a cell was missing.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Reads `date,<ticker>,...` with ISO dates. Rows holding a blank cell are
/// dropped and counted.
pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_prices(file)
}

/// [`load_prices`] over any reader. Reported rows are 1-based file lines,
/// so the first data row is row 2; columns are 1-based.
pub fn read_prices<R: Read>(reader: R) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "header must be `date,<ticker>,...`".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = tickers.len();
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut data = Vec::new();
    let mut dropped = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != n + 1 {
            return Err(Error::Parse {
                row,
                column: rec.len().min(n + 1),
                message: format!("expected {} fields, found {}", n + 1, rec.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            row,
            column: 1,
            message: format!("bad date `{}`: {e}", &rec[0]),
        })?;
        if rec.iter().skip(1).any(|c| MISSING.contains(&c)) {
            dropped += 1;
            continue;
        }
        let start = data.len();
        for (j, cell) in rec.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositivePrice {
                    row,
                    column: j + 1,
                    value: v,
                });
            }
            data.push(v);
        }
        debug_assert_eq!(data.len() - start, n);
        if let Some(&last) = dates.last() {
            if date <= last {
                return Err(Error::UnsortedDates { row });
            }
        }
        dates.push(date);
    }
    let closes = Matrix::from_row_slice(dates.len(), n, &data)?;
    Ok(PriceSeries {
        dates,
        tickers,
        closes,
        dropped_rows: dropped,
    })
}

/// `(T - 1) x n` matrix of `log(S_{t+1} / S_t)`.
pub fn log_returns(ps: &PriceSeries) -> Result<Matrix<f64>> {
    log_returns_of(&ps.closes)
}

/// [`log_returns`] of a raw dates x assets price matrix.
pub fn log_returns_of(closes: &Matrix<f64>) -> Result<Matrix<f64>> {
    if closes.rows() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            found: closes.rows(),
        });
    }
    Ok(Matrix::from_fn(closes.rows() - 1, closes.cols(), |i, j| {
        (closes[(i + 1, j)] / closes[(i, j)]).ln()
    }))
}

/// `S_t / S_0 - 1` for every date, including the zero first row.
pub fn cumulative_returns(ps: &PriceSeries) -> Matrix<f64> {
    let c = &ps.closes;
    Matrix::from_fn(c.rows(), c.cols(), |i, j| c[(i, j)] / c[(0, j)] - 1.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Consecutive non-overlapping windows.
    #[default]
    Blocked,
    /// One window ending at every row.
    Rolling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedVarianceSeries {
    /// Window end (rows of returns consumed) in years.
    pub times: Vec<f64>,
    /// Determinant of the annualized window covariance.
    pub values: Vec<f64>,
    pub window: usize,
    /// Indices whose small negative determinant was clamped to zero.
    #[serde(default)]
    pub clamped: Vec<usize>,
}

impl RealizedVarianceSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Unbiased covariance of rows `start..start + window`, each entry
/// multiplied by `annualization`.
pub fn window_covariance(returns: &Matrix<f64>, start: usize, window: usize, annualization: f64) -> Matrix<f64> {
    let n = returns.cols();
    let rows = start..start + window;
    let means: Vec<f64> = (0..n)
        .map(|j| rows.clone().map(|r| returns[(r, j)]).sum::<f64>() / window as f64)
        .collect();
    let scale = annualization / (window as f64 - 1.0);
    Matrix::from_fn(n, n, |a, b| {
        let s: f64 = rows
            .clone()
            .map(|r| (returns[(r, a)] - means[a]) * (returns[(r, b)] - means[b]))
            .sum();
        s * scale
    })
}

/// Generalized variance of each window of `returns`.
///
/// `annualization` is trading days per year: it multiplies every covariance
/// entry and converts window ends to years.
///
/// A window needs at least `n + 1` rows for the sample covariance to be
/// nonsingular in general.
pub fn rolling_determinants(
    returns: &Matrix<f64>,
    window: usize,
    annualization: f64,
    mode: WindowMode,
) -> Result<RealizedVarianceSeries> {
    let n = returns.cols();
    if window < n + 1 {
        return Err(Error::WindowTooSmall {
            window,
            assets: n,
            min: n + 1,
        });
    }
    if returns.rows() < window {
        return Err(Error::TooFewRows {
            rows: returns.rows(),
            window,
        });
    }
    let starts: Vec<usize> = match mode {
        WindowMode::Blocked => (0..returns.rows() / window).map(|k| k * window).collect(),
        WindowMode::Rolling => (0..=returns.rows() - window).collect(),
    };
    let mut out = RealizedVarianceSeries {
        times: Vec::with_capacity(starts.len()),
        values: Vec::with_capacity(starts.len()),
        window,
        clamped: Vec::new(),
    };
    for (k, &s) in starts.iter().enumerate() {
        let mut det = window_covariance(returns, s, window, annualization).determinant()?;
        if det < 0.0 {
            if det >= -NEGATIVE_DET_CLAMP {
                det = 0.0;
                out.clamped.push(k);
            } else {
                return Err(Error::NegativeDeterminant {
                    row: s + window,
                    value: det,
                });
            }
        }
        out.times.push((s + window) as f64 / annualization);
        out.values.push(det);
    }
    Ok(out)
}

/// Pearson correlation of the full sample, validated as a correlation
/// matrix.
pub fn estimate_correlation(returns: &Matrix<f64>) -> Result<CorrelationMatrix<f64>> {
    let n = returns.cols();
    if returns.rows() < n + 1 {
        return Err(Error::TooShort {
            needed: n + 1,
            found: returns.rows(),
        });
    }
    let cov = window_covariance(returns, 0, returns.rows(), 1.0);
    validate_correlation(&covariance_to_correlation(&cov)?)
}

/// `cov_ij / sqrt(cov_ii cov_jj)` with an exact unit diagonal.
pub fn covariance_to_correlation(cov: &Matrix<f64>) -> Result<Matrix<f64>> {
    let n = cov.rows();
    for j in 0..n {
        if !(cov[(j, j)] > 0.0) {
            return Err(Error::DegenerateColumn { column: j });
        }
    }
    Ok(Matrix::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else {
            (cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt()).clamp(-1.0, 1.0)
        }
    }))
}

/// Convention for excess kurtosis. All three agree as the sample grows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KurtosisEstimator {
    /// `g2 = m4 / m2^2 - 3` with population moments.
    #[default]
    Moment,
    /// Bias-adjusted `G2`, as in Excel and pandas.
    Adjusted,
    /// `m4 / s^4 - 3` with the unbiased variance `s^2`.
    UnbiasedVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub ticker: String,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Excess kurtosis; `None` when the column is constant.
    pub kurtosis: Option<f64>,
}

/// Mean, unbiased variance and excess kurtosis of every column.
pub fn summary_stats(data: &Matrix<f64>, tickers: &[String], estimator: KurtosisEstimator) -> Result<Vec<SummaryRow>> {
    let n = data.rows();
    if n < 4 {
        return Err(Error::TooShort { needed: 4, found: n });
    }
    if tickers.len() != data.cols() {
        return Err(Error::DimensionMismatch {
            expected: data.cols(),
            found: tickers.len(),
        });
    }
    let nf = n as f64;
    Ok((0..data.cols())
        .map(|j| {
            let col = data.column(j);
            let mean = col.iter().sum::<f64>() / nf;
            let m2 = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
            let m4 = col.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
            let variance = m2 * nf / (nf - 1.0);
            let kurtosis = (m2 > 0.0).then(|| {
                let g2 = m4 / (m2 * m2) - 3.0;
                match estimator {
                    KurtosisEstimator::Moment => g2,
                    KurtosisEstimator::Adjusted => ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)),
                    KurtosisEstimator::UnbiasedVariance => m4 / (variance * variance) - 3.0,
                }
            });
            SummaryRow {
                ticker: tickers[j].clone(),
                mean,
                variance,
                kurtosis,
            }
        })
        .collect())
}

/// Writes `t,value`.
pub fn write_realized_csv<W: Write>(series: &RealizedVarianceSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "value"])?;
    for (t, v) in series.times.iter().zip(&series.values) {
        w.write_record([t.to_string(), v.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads `t,value`. The window length is not stored in the file and is
/// reported as 0.
pub fn read_realized_csv<R: Read>(reader: R) -> Result<RealizedVarianceSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |c: usize| -> Result<f64> {
            rec.get(c).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                row: i + 2,
                column: c + 1,
                message: "expected a number".into(),
            })
        };
        times.push(cell(0)?);
        values.push(cell(1)?);
    }
    Ok(RealizedVarianceSeries {
        times,
        values,
        window: 0,
        clamped: Vec::new(),
    })
}

/// Writes `ticker,mean,variance,kurtosis`; undefined kurtosis is left blank.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ticker", "mean", "variance", "kurtosis"])?;
    for r in rows {
        w.write_record([
            r.ticker.clone(),
            r.mean.to_string(),
            r.variance.to_string(),
            r.kurtosis.map(|k| k.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes a labelled square matrix: header `ticker,<t1>,...`, then one row
/// per ticker.
pub fn write_correlation_csv<W: Write>(corr: &CorrelationMatrix<f64>, tickers: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["ticker".to_string()];
    header.extend(tickers.iter().cloned());
    w.write_record(&header)?;
    for (i, t) in tickers.iter().enumerate() {
        let mut row = vec![t.clone()];
        row.extend((0..corr.n()).map(|j| corr.get(i, j).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Inverse of [`write_correlation_csv`].
pub fn read_correlation_csv<R: Read>(reader: R) -> Result<(Vec<String>, CorrelationMatrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let tickers: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| {
                c.parse::<f64>().map_err(|_| Error::Parse {
                    row: i + 2,
                    column: j + 1,
                    message: format!("`{c}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let corr = CorrelationMatrix::from_rows(&rows)?;
    if corr.n() != tickers.len() {
        return Err(Error::DimensionMismatch {
            expected: tickers.len(),
            found: corr.n(),
        });
    }
    Ok((tickers, corr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<PriceSeries> {
        read_prices(s.as_bytes())
    }

    #[test]
    fn loads_well_formed_file() {
        let ps = read("date,A,B\n2024-01-02,1,2\n2024-01-03,1.5,2.5\n2024-01-04,2,3\n").unwrap();
        assert_eq!(ps.len(), 3);
        assert_eq!(ps.tickers(), ["A", "B"]);
        assert_eq!(ps.closes()[(2, 1)], 3.0);
        assert_eq!(ps.dropped_rows(), 0);
    }

    #[test]
    fn blank_cell_drops_the_row() {
        let ps = read("date,A,B\n2024-01-02,1,2\n2024-01-03,,2.5\n2024-01-04,2,3\n").unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps.dropped_rows(), 1);
    }

    #[test]
    fn validation_errors_name_the_row() {
        let e = read("date,A\n2024-01-02,1\n2024-01-03,-5\n").unwrap_err();
        assert!(matches!(e, Error::NonPositivePrice { row: 3, column: 2, .. }), "{e}");
        let e = read("date,A\n2024-01-02,1\n2024-01-03,x\n").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 3, column: 2, .. }));
        let e = read("date,A\n2024-01-03,1\n2024-01-02,2\n").unwrap_err();
        assert!(matches!(e, Error::UnsortedDates { row: 3 }));
        let e = read("date,A\n01/02/2024,1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 2, column: 1, .. }));
        let e = read("date,A,B\n2024-01-02,1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 2, .. }));
    }

    #[test]
    fn log_return_examples() {
        let c = Matrix::from_rows(&[vec![100.0], vec![110.0], vec![99.0]]).unwrap();
        let r = log_returns_of(&c).unwrap();
        assert!((r[(0, 0)] - 0.0953101798043249).abs() < 1e-15);
        assert!((r[(1, 0)] + 0.10536051565782628).abs() < 1e-15);
        let e = Matrix::from_rows(&[vec![100.0], vec![100.0 * std::f64::consts::E]]).unwrap();
        assert!((log_returns_of(&e).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(log_returns_of(&Matrix::from_rows(&[vec![1.0]]).unwrap()).is_err());
    }

    #[test]
    fn two_asset_window_by_hand() {
        // Unbiased covariance is 1.5 * [[2,1],[1,2]].
        let r = Matrix::from_rows(&[vec![1.0, 2.0], vec![-2.0, -1.0], vec![1.0, -1.0]]).unwrap();
        let cov = window_covariance(&r, 0, 3, 1.0);
        assert_eq!(cov.to_rows(), vec![vec![3.0, 1.5], vec![1.5, 3.0]]);
        let s = rolling_determinants(&r, 3, 2.0, WindowMode::Blocked).unwrap();
        // Scaled covariance [[6,3],[3,6]] = 3*[[2,1],[1,2]]; det = 3 * 9.
        assert!((s.values[0] - 27.0).abs() < 1e-12);
        assert_eq!(s.times, vec![1.5]);
    }

    #[test]
    fn identical_columns_give_zero_determinant() {
        let r = Matrix::from_fn(10, 3, |i, _| ((i * 7) % 5) as f64 * 0.01);
        let s = rolling_determinants(&r, 10, 252.0, WindowMode::Blocked).unwrap();
        assert!(s.values[0].abs() <= 1e-18);
    }

    #[test]
    fn window_counts_and_errors() {
        let r = Matrix::from_fn(25, 3, |i, j| ((i * 13 + j * 7) % 11) as f64 - 5.0);
        let b = rolling_determinants(&r, 10, 252.0, WindowMode::Blocked).unwrap();
        assert_eq!(b.len(), 2);
        let rl = rolling_determinants(&r, 10, 252.0, WindowMode::Rolling).unwrap();
        assert_eq!(rl.len(), 16);
        assert_eq!(rl.values[10], b.values[1]);
        assert!(matches!(
            rolling_determinants(&r, 3, 252.0, WindowMode::Blocked),
            Err(Error::WindowTooSmall { min: 4, .. })
        ));
        assert!(matches!(
            rolling_determinants(&r, 30, 252.0, WindowMode::Blocked),
            Err(Error::TooFewRows { rows: 25, window: 30 })
        ));
    }

    #[test]
    fn correlation_edge_cases() {
        let alt = Matrix::from_fn(8, 2, |i, j| if (i % 2 == 0) ^ (j == 1) { 1.0 } else { -1.0 });
        let c = estimate_correlation(&alt).unwrap();
        assert_eq!(c.get(0, 1), -1.0);
        let same = Matrix::from_fn(8, 2, |i, _| (i as f64).sin());
        assert_eq!(estimate_correlation(&same).unwrap().get(0, 1), 1.0);
        let flat = Matrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        assert!(matches!(
            estimate_correlation(&flat),
            Err(Error::DegenerateColumn { column: 0 })
        ));
    }

    #[test]
    fn summary_of_small_sample() {
        let m = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0], vec![4.0, 5.0]]).unwrap();
        let t = vec!["A".to_string(), "B".to_string()];
        let s = summary_stats(&m, &t, KurtosisEstimator::Moment).unwrap();
        assert_eq!(s[0].mean, 2.5);
        assert!((s[0].variance - 5.0 / 3.0).abs() < 1e-15);
        // m2 = 1.25, m4 = 2.5625, g2 = 1.64 - 3.
        assert!((s[0].kurtosis.unwrap() + 1.36).abs() < 1e-12);
        let adj = summary_stats(&m, &t, KurtosisEstimator::Adjusted).unwrap();
        assert!((adj[0].kurtosis.unwrap() + 1.2).abs() < 1e-12);
        assert_eq!(s[1].variance, 0.0);
        assert_eq!(s[1].kurtosis, None);
        assert!(summary_stats(&Matrix::zeros(3, 2), &t, KurtosisEstimator::Moment).is_err());
    }

    #[test]
    fn csv_round_trips() {
        let s = RealizedVarianceSeries {
            times: vec![0.1, 0.2],
            values: vec![1e-7, 3.5e-8],
            window: 10,
            clamped: vec![],
        };
        let mut buf = Vec::new();
        write_realized_csv(&s, &mut buf).unwrap();
        let back = read_realized_csv(buf.as_slice()).unwrap();
        assert_eq!(back.times, s.times);
        assert_eq!(back.values, s.values);

        let c = CorrelationMatrix::equicorrelated(3, 0.25).unwrap();
        let t: Vec<String> = ["X", "Y", "Z"].iter().map(|s| s.to_string()).collect();
        let mut buf = Vec::new();
        write_correlation_csv(&c, &t, &mut buf).unwrap();
        let (tk, c2) = read_correlation_csv(buf.as_slice()).unwrap();
        assert_eq!(tk, t);
        assert_eq!(c2.matrix(), c.matrix());
    }
}
