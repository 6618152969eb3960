//! Rolling-window study: per-window correlation and DBHT clustering, then
//! persistence, similarity, sector comparison and cluster tracking.

use chrono::NaiveDate;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compare::{adjusted_rand_index, match_similar_clusters, TestStatistic};
use crate::dbht::{dbht, BubbleStats};
use crate::error::{Error, Result};
use crate::estimator::{
    correlation_to_distance, default_theta, detrend_market_mode, exponential_weights,
    metacorrelation, uniform_weights, weighted_correlation, CorrelationMatrix,
};
use crate::ingest::{IcbLevel, ReturnsPanel, SectorTable};
use crate::partition::Clustering;
use crate::scalar::Scalar;

/// Rows `[start, end)` of the returns panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub length: usize,
    pub shift: usize,
}

/// Windows anchored at row 0, `floor((total - length) / shift) + 1` of them.
pub fn make_windows(total_days: usize, length: usize, shift: usize) -> Result<Vec<WindowSpec>> {
    if length < 2 {
        return Err(Error::invalid(format!("window length {length} is below 2")));
    }
    if shift == 0 {
        return Err(Error::invalid("window shift must be at least 1"));
    }
    if total_days < length {
        return Err(Error::invalid(format!(
            "{total_days} days cannot hold a window of {length}"
        )));
    }
    let count = (total_days - length) / shift + 1;
    Ok((0..count)
        .map(|index| WindowSpec {
            index,
            start: index * shift,
            end: index * shift + length,
            length,
            shift,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window_length: usize,
    pub shift: usize,
    /// Weight decay; `None` means a third of the window length.
    pub theta: Option<f64>,
    pub uniform: bool,
    pub detrend: bool,
}

impl Default for RollingConfig {
    fn default() -> Self {
        RollingConfig {
            window_length: 1000,
            shift: 30,
            theta: None,
            uniform: false,
            detrend: true,
        }
    }
}

impl RollingConfig {
    pub fn resolved_theta(&self) -> f64 {
        self.theta
            .unwrap_or_else(|| default_theta(self.window_length))
    }
}

/// Correlation and clustering of one stretch of the panel.
#[derive(Debug, Clone)]
pub struct WindowAnalysis<T: Scalar = f64> {
    pub correlation: CorrelationMatrix<T>,
    pub clustering: Clustering,
    pub stats: BubbleStats,
}

/// Detrend (optionally), weight, correlate and cluster `window` as a whole.
pub fn analyze_window<T: Scalar>(
    window: &ReturnsPanel<T>,
    cfg: &RollingConfig,
    window_id: Option<usize>,
) -> Result<WindowAnalysis<T>> {
    let detrended;
    let input = if cfg.detrend && !window.detrended() {
        detrended = detrend_market_mode(window)?.into_panel(window);
        &detrended
    } else {
        window
    };
    let n = input.n_days();
    let weights = if cfg.uniform {
        uniform_weights(n)?
    } else {
        let theta = cfg.theta.unwrap_or_else(|| default_theta(n));
        exponential_weights(n, T::lit(theta))?
    };
    let correlation = weighted_correlation(input, &weights)?.with_window_id(window_id);
    let out = dbht(&correlation_to_distance(&correlation))?;
    Ok(WindowAnalysis {
        stats: out.stats(),
        clustering: out.clustering,
        correlation,
    })
}

/// Clustering of the whole panel treated as one window.
pub fn full_period_clustering<T: Scalar>(
    panel: &ReturnsPanel<T>,
    cfg: &RollingConfig,
) -> Result<Clustering> {
    let whole = RollingConfig {
        window_length: panel.n_days(),
        theta: cfg.theta,
        ..cfg.clone()
    };
    Ok(analyze_window(panel, &whole, None)?.clustering)
}

#[derive(Debug, Clone)]
pub struct RollingResult<T: Scalar = f64> {
    pub windows: Vec<WindowSpec>,
    pub end_dates: Vec<NaiveDate>,
    pub correlations: Vec<CorrelationMatrix<T>>,
    pub clusterings: Vec<Clustering>,
    pub bubble_stats: Vec<BubbleStats>,
    pub n_clusters_series: Vec<usize>,
}

impl<T: Scalar> RollingResult<T> {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn tickers(&self) -> &[String] {
        self.clusterings[0].tickers()
    }
}

/// Runs every window on the current rayon pool; results are ordered by
/// window and do not depend on the number of workers. The first failing
/// window (lowest index) aborts the run.
pub fn run_rolling<T: Scalar>(
    panel: &ReturnsPanel<T>,
    cfg: &RollingConfig,
) -> Result<RollingResult<T>> {
    let windows = make_windows(panel.n_days(), cfg.window_length, cfg.shift)?;
    if cfg.theta.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("theta must be positive"));
    }
    let analyses: Vec<Result<WindowAnalysis<T>>> = windows
        .par_iter()
        .map(|w| {
            let slice = panel.slice_rows(w.start, w.end)?;
            analyze_window(&slice, cfg, Some(w.index)).map_err(|e| Error::Window {
                index: w.index,
                source: Box::new(e),
            })
        })
        .collect();
    let mut correlations = Vec::with_capacity(windows.len());
    let mut clusterings = Vec::with_capacity(windows.len());
    let mut bubble_stats = Vec::with_capacity(windows.len());
    for a in analyses {
        let a = a?;
        correlations.push(a.correlation);
        clusterings.push(a.clustering);
        bubble_stats.push(a.stats);
    }
    let n_clusters_series = clusterings.iter().map(Clustering::n_clusters).collect();
    let end_dates = windows.iter().map(|w| panel.dates()[w.end - 1]).collect();
    Ok(RollingResult {
        windows,
        end_dates,
        correlations,
        clusterings,
        bubble_stats,
        n_clusters_series,
    })
}

/// `(k, ARI(X_{k-1}, X_k))` for `k = 1..n`.
pub fn persistence_series<T: Scalar>(rr: &RollingResult<T>) -> Result<Vec<(usize, f64)>> {
    if rr.len() < 2 {
        return Err(Error::invalid("persistence needs at least two windows"));
    }
    (1..rr.len())
        .into_par_iter()
        .map(|k| {
            Ok((
                k,
                adjusted_rand_index(&rr.clusterings[k - 1], &rr.clusterings[k])?,
            ))
        })
        .collect()
}

fn symmetric_fill<F>(n: usize, f: F) -> Result<Array2<f64>>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| f(a, b))
        .collect::<Result<_>>()?;
    let mut m = Array2::eye(n);
    for (&(a, b), &v) in pairs.iter().zip(&values) {
        m[[a, b]] = v;
        m[[b, a]] = v;
    }
    Ok(m)
}

/// Pairwise ARI between window clusterings, unit diagonal.
pub fn clustering_similarity_matrix<T: Scalar>(rr: &RollingResult<T>) -> Result<Array2<f64>> {
    symmetric_fill(rr.len(), |a, b| {
        adjusted_rand_index(&rr.clusterings[a], &rr.clusterings[b])
    })
}

/// Pairwise metacorrelation between window correlation matrices, unit
/// diagonal.
pub fn metacorrelation_matrix<T: Scalar>(rr: &RollingResult<T>) -> Result<Array2<f64>> {
    symmetric_fill(rr.len(), |a, b| {
        let z = metacorrelation(&rr.correlations[a], &rr.correlations[b])?;
        Ok(z.to_f64().unwrap_or(f64::NAN))
    })
}

/// Mean within-block minus mean cross-block off-diagonal entry, where rows
/// before `boundary` form the first block.
pub fn block_contrast(m: &Array2<f64>, boundary: usize) -> Result<f64> {
    let n = m.nrows();
    if boundary == 0 || boundary >= n || m.ncols() != n {
        return Err(Error::invalid(format!(
            "boundary {boundary} does not split {n} windows"
        )));
    }
    let (mut within, mut nw, mut cross, mut nc) = (0.0, 0usize, 0.0, 0usize);
    for a in 0..n {
        for b in (a + 1)..n {
            if (a < boundary) == (b < boundary) {
                within += m[[a, b]];
                nw += 1;
            } else {
                cross += m[[a, b]];
                nc += 1;
            }
        }
    }
    if nw == 0 {
        return Err(Error::invalid("no within-block pairs"));
    }
    Ok(within / nw as f64 - cross / nc as f64)
}

/// ARI between each window clustering and the sector partition at `level`.
pub fn icb_similarity_series<T: Scalar>(
    rr: &RollingResult<T>,
    sectors: &SectorTable,
    level: IcbLevel,
) -> Result<Vec<f64>> {
    if rr.is_empty() {
        return Ok(Vec::new());
    }
    let icb = sectors.partition(rr.tickers(), level)?;
    rr.clusterings
        .par_iter()
        .map(|c| adjusted_rand_index(c, &icb))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingPoint {
    pub window: usize,
    pub matched_cluster: Option<usize>,
    /// Matched cluster size, zero when nothing matched.
    pub size: usize,
    /// Matched members per industry, aligned with `TrackingRecord::industries`.
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingRecord {
    pub benchmark_cluster: usize,
    pub benchmark_size: usize,
    pub industries: Vec<String>,
    pub points: Vec<TrackingPoint>,
}

/// Follows every benchmark cluster through the windows, matching it against
/// each window's clusters at Bonferroni level `alpha / n_clusters`.
pub fn track_cluster_evolution<T: Scalar>(
    benchmark: &Clustering,
    rr: &RollingResult<T>,
    sectors: &SectorTable,
    alpha: f64,
    statistic: TestStatistic,
) -> Result<Vec<TrackingRecord>> {
    track_clusterings(benchmark, &rr.clusterings, sectors, alpha, statistic)
}

/// [`track_cluster_evolution`] over a bare series of clusterings sharing one
/// ticker order.
pub fn track_clusterings(
    benchmark: &Clustering,
    series: &[Clustering],
    sectors: &SectorTable,
    alpha: f64,
    statistic: TestStatistic,
) -> Result<Vec<TrackingRecord>> {
    let Some(first) = series.first() else {
        return Err(Error::invalid("no clusterings to track against"));
    };
    let tickers = first.tickers();
    for x in series {
        x.check_same_tickers(tickers)?;
    }
    let benchmark = benchmark.reindexed(tickers)?;
    let industries = sectors.labels(IcbLevel::Industry);
    let industry_of: Vec<usize> = tickers
        .iter()
        .map(|t| {
            let label = &sectors.lookup(t)?.industry;
            Ok(industries
                .binary_search(label)
                .expect("label comes from the table"))
        })
        .collect::<Result<_>>()?;
    benchmark
        .clusters()
        .into_par_iter()
        .enumerate()
        .map(|(id, members)| {
            let points = series
                .iter()
                .enumerate()
                .map(|(window, x)| {
                    let m = match_similar_clusters(&members, x, alpha, x.n_clusters(), statistic)?;
                    let mut histogram = vec![0; industries.len()];
                    if let Some(c) = m.selected {
                        for (v, &l) in x.labels().iter().enumerate() {
                            if l == c {
                                histogram[industry_of[v]] += 1;
                            }
                        }
                    }
                    Ok(TrackingPoint {
                        window,
                        matched_cluster: m.selected,
                        size: m.selected_size(),
                        histogram,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TrackingRecord {
                benchmark_cluster: id,
                benchmark_size: members.len(),
                industries: industries.clone(),
                points,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
