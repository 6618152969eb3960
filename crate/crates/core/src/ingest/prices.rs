use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How cells without a price are treated when loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    #[value(name = "ffill")]
    ForwardFill,
    #[value(name = "drop")]
    DropTicker,
}

/// Dates × tickers matrix of strictly positive prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: Array2<f64>,
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: Array2<f64>) -> Result<Self> {
        check_shape(&dates, &tickers, prices.dim())?;
        check_dates(&dates)?;
        check_tickers(&tickers)?;
        for ((t, i), &p) in prices.indexed_iter() {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::NonPositivePrice {
                    ticker: tickers[i].clone(),
                    date: dates[t].to_string(),
                    value: p,
                });
            }
        }
        Ok(PricePanel {
            dates,
            tickers,
            prices,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> ArrayView2<'_, f64> {
        self.prices.view()
    }
}

/// Dates × tickers matrix of daily log-returns (or market-mode residuals).
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel<T: Scalar = f64> {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    returns: Array2<T>,
    detrended: bool,
}

impl<T: Scalar> ReturnsPanel<T> {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        returns: Array2<T>,
        detrended: bool,
    ) -> Result<Self> {
        check_shape(&dates, &tickers, returns.dim())?;
        check_dates(&dates)?;
        check_tickers(&tickers)?;
        if let Some(((t, i), _)) = returns.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse {
                location: format!("{} / {}", dates[t], tickers[i]),
                message: "non-finite return".into(),
            });
        }
        Ok(ReturnsPanel {
            dates,
            tickers,
            returns,
            detrended,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn returns(&self) -> ArrayView2<'_, T> {
        self.returns.view()
    }

    pub fn detrended(&self) -> bool {
        self.detrended
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    /// Rows `[start, end)` as a new panel.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_days() {
            return Err(Error::invalid(format!(
                "row range {start}..{end} outside panel of {} days",
                self.n_days()
            )));
        }
        Ok(ReturnsPanel {
            dates: self.dates[start..end].to_vec(),
            tickers: self.tickers.clone(),
            returns: self.returns.slice(s![start..end, ..]).to_owned(),
            detrended: self.detrended,
        })
    }

    /// Same dates and tickers, different values (e.g. regression residuals).
    pub(crate) fn with_returns(&self, returns: Array2<T>, detrended: bool) -> Self {
        debug_assert_eq!(returns.dim(), self.returns.dim());
        ReturnsPanel {
            dates: self.dates.clone(),
            tickers: self.tickers.clone(),
            returns,
            detrended,
        }
    }
}

/// Cells filled or tickers dropped while applying a [`MissingPolicy`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub filled: Vec<(String, String)>,
    pub dropped_tickers: Vec<String>,
}

fn check_shape(dates: &[NaiveDate], tickers: &[String], dim: (usize, usize)) -> Result<()> {
    if dim.0 != dates.len() {
        return Err(Error::DimensionMismatch {
            expected: dates.len(),
            actual: dim.0,
        });
    }
    if dim.1 != tickers.len() {
        return Err(Error::DimensionMismatch {
            expected: tickers.len(),
            actual: dim.1,
        });
    }
    Ok(())
}

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::NonIncreasingDates {
                previous: w[0].to_string(),
                next: w[1].to_string(),
            });
        }
    }
    Ok(())
}

fn check_tickers(tickers: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for t in tickers {
        if !seen.insert(t.as_str()) {
            return Err(Error::DuplicateTicker(t.clone()));
        }
    }
    Ok(())
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "n/a"
    )
}

pub(crate) fn parse_date(s: &str, location: impl FnOnce() -> String) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        location: location(),
        message: format!("bad ISO-8601 date {s:?}: {e}"),
    })
}

/// Loads a delimiter-separated price file (header row, one date column).
pub fn load_price_panel(
    path: impl AsRef<Path>,
    date_column: &str,
    policy: MissingPolicy,
) -> Result<(PricePanel, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_price_panel(file, date_column, policy)
}

pub fn read_price_panel<R: Read>(
    reader: R,
    date_column: &str,
    policy: MissingPolicy,
) -> Result<(PricePanel, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == date_column)
        .ok_or_else(|| Error::Parse {
            location: "header".into(),
            message: format!("no date column named {date_column:?}"),
        })?;
    let price_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != date_idx).collect();
    let tickers: Vec<String> = price_cols.iter().map(|&c| headers[c].to_string()).collect();
    check_tickers(&tickers)?;

    let mut dates = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row_no + 2;
        let date = parse_date(&rec[date_idx], || format!("line {line}"))?;
        let mut row = Vec::with_capacity(price_cols.len());
        for (k, &c) in price_cols.iter().enumerate() {
            let raw = &rec[c];
            if is_missing(raw) {
                row.push(None);
                continue;
            }
            let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                location: format!("line {line}, column {}", tickers[k]),
                message: format!("not a number: {raw:?}"),
            })?;
            row.push(Some(v));
        }
        dates.push(date);
        cells.push(row);
    }
    check_dates(&dates)?;

    for (k, t) in tickers.iter().enumerate() {
        let count = cells.iter().filter(|r| r[k].is_some()).count();
        if count < 2 {
            return Err(Error::InsufficientObservations {
                ticker: t.clone(),
                count,
            });
        }
    }

    let mut report = LoadReport::default();
    let mut keep: Vec<usize> = (0..tickers.len()).collect();
    match policy {
        MissingPolicy::Reject => {
            for (t, row) in cells.iter().enumerate() {
                if let Some(k) = row.iter().position(Option::is_none) {
                    return Err(Error::MissingValue {
                        ticker: tickers[k].clone(),
                        date: dates[t].to_string(),
                    });
                }
            }
        }
        MissingPolicy::ForwardFill => {
            for k in 0..tickers.len() {
                let mut last: Option<f64> = None;
                for t in 0..cells.len() {
                    match cells[t][k] {
                        Some(v) => last = Some(v),
                        None => {
                            let v = last.ok_or_else(|| Error::MissingValue {
                                ticker: tickers[k].clone(),
                                date: dates[t].to_string(),
                            })?;
                            cells[t][k] = Some(v);
                            report
                                .filled
                                .push((tickers[k].clone(), dates[t].to_string()));
                        }
                    }
                }
            }
        }
        MissingPolicy::DropTicker => {
            keep.retain(|&k| cells.iter().all(|r| r[k].is_some()));
            report.dropped_tickers = (0..tickers.len())
                .filter(|k| !keep.contains(k))
                .map(|k| tickers[k].clone())
                .collect();
            if keep.is_empty() {
                return Err(Error::invalid("every ticker has missing data"));
            }
        }
    }

    let mut prices = Array2::zeros((dates.len(), keep.len()));
    for (t, row) in cells.iter().enumerate() {
        for (j, &k) in keep.iter().enumerate() {
            prices[[t, j]] = row[k].expect("missing cells resolved above");
        }
    }
    let tickers = keep.iter().map(|&k| tickers[k].clone()).collect();
    Ok((PricePanel::new(dates, tickers, prices)?, report))
}

/// Reads a returns file in the layout written by [`write_returns_panel`];
/// every cell must be present.
pub fn read_returns_panel<R: Read, T: Scalar>(
    reader: R,
    date_column: &str,
) -> Result<ReturnsPanel<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == date_column)
        .ok_or_else(|| Error::Parse {
            location: "header".into(),
            message: format!("no date column named {date_column:?}"),
        })?;
    let cols: Vec<usize> = (0..headers.len()).filter(|&c| c != date_idx).collect();
    let tickers: Vec<String> = cols.iter().map(|&c| headers[c].to_string()).collect();
    check_tickers(&tickers)?;
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row_no + 2;
        let date = parse_date(&rec[date_idx], || format!("line {line}"))?;
        for (k, &c) in cols.iter().enumerate() {
            let raw = &rec[c];
            if is_missing(raw) {
                return Err(Error::MissingValue {
                    ticker: tickers[k].clone(),
                    date: date.to_string(),
                });
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                location: format!("line {line}, column {}", tickers[k]),
                message: format!("not a number: {raw:?}"),
            })?;
            values.push(T::lit(v));
        }
        dates.push(date);
    }
    check_dates(&dates)?;
    let returns = Array2::from_shape_vec((dates.len(), tickers.len()), values)
        .map_err(|e| Error::invalid(e.to_string()))?;
    ReturnsPanel::new(dates, tickers, returns, false)
}

/// `returns[t][i] = ln(prices[t+1][i] / prices[t][i])`, dated by the later day.
pub fn compute_log_returns<T: Scalar>(panel: &PricePanel) -> Result<ReturnsPanel<T>> {
    let n = panel.dates.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 dates for returns, got {n}"
        )));
    }
    let p = &panel.prices;
    let returns = Array2::from_shape_fn((n - 1, panel.tickers.len()), |(t, i)| {
        T::lit((p[[t + 1, i]] / p[[t, i]]).ln())
    });
    ReturnsPanel::new(
        panel.dates[1..].to_vec(),
        panel.tickers.clone(),
        returns,
        false,
    )
}

/// Rebuilds prices by cumulative exponentiation from a base row dated `base_date`.
pub fn prices_from_returns<T: Scalar>(
    returns: &ReturnsPanel<T>,
    base_date: NaiveDate,
    base_prices: &[f64],
) -> Result<PricePanel> {
    if base_prices.len() != returns.n_assets() {
        return Err(Error::DimensionMismatch {
            expected: returns.n_assets(),
            actual: base_prices.len(),
        });
    }
    let (days, n) = returns.returns.dim();
    let mut prices = Array2::zeros((days + 1, n));
    for i in 0..n {
        let mut log_p = base_prices[i].ln();
        prices[[0, i]] = base_prices[i];
        for t in 0..days {
            log_p += returns.returns[[t, i]].to_f64().unwrap_or(f64::NAN);
            prices[[t + 1, i]] = log_p.exp();
        }
    }
    let mut dates = Vec::with_capacity(days + 1);
    dates.push(base_date);
    dates.extend_from_slice(&returns.dates);
    PricePanel::new(dates, returns.tickers.clone(), prices)
}

fn write_matrix_csv<W: Write, V: std::fmt::Display>(
    writer: W,
    dates: &[NaiveDate],
    tickers: &[String],
    values: ArrayView2<'_, V>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(tickers.iter().cloned());
    w.write_record(&header)?;
    for (t, row) in values.outer_iter().enumerate() {
        let mut rec = vec![dates[t].to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_price_panel<W: Write>(writer: W, panel: &PricePanel) -> Result<()> {
    write_matrix_csv(writer, &panel.dates, &panel.tickers, panel.prices.view())
}

pub fn write_returns_panel<W: Write, T: Scalar>(writer: W, panel: &ReturnsPanel<T>) -> Result<()> {
    write_matrix_csv(writer, &panel.dates, &panel.tickers, panel.returns.view())
}
