//! Detrended, exponentially weighted correlation and distance matrices.

mod io;

pub use io::{
    read_binary_matrix, read_correlation_csv, read_labeled_matrix_csv, write_binary_matrix,
    write_correlation_csv, write_labeled_matrix, MatrixFormat,
};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::ingest::ReturnsPanel;
use crate::scalar::Scalar;

/// Positive, normalized per-day weights, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T: Scalar = f64> {
    weights: Vec<T>,
}

impl<T: Scalar> WeightVector<T> {
    /// Arbitrary positive, non-decreasing weights, renormalized to sum 1.
    pub fn from_weights(raw: Vec<T>) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::invalid("weight length must be ≥ 2"));
        }
        if raw.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::invalid("weights must be positive and finite"));
        }
        if raw.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::invalid("weights must be non-decreasing in time"));
        }
        let total: T = raw.iter().copied().sum();
        Ok(WeightVector {
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `w_t ∝ exp((t − length)/theta)` for `t = 1..=length`, normalized to sum 1.
pub fn exponential_weights<T: Scalar>(length: usize, theta: T) -> Result<WeightVector<T>> {
    if length < 2 {
        return Err(Error::invalid(format!(
            "weight length must be ≥ 2, got {length}"
        )));
    }
    if !(theta > T::zero()) || !theta.is_finite() {
        return Err(Error::invalid(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let l = T::count(length);
    let raw: Vec<T> = (1..=length)
        .map(|t| ((T::count(t) - l) / theta).exp())
        .collect();
    let total: T = raw.iter().copied().sum();
    Ok(WeightVector {
        weights: raw.into_iter().map(|w| w / total).collect(),
    })
}

/// The `theta → ∞` limit: every day weighted `1/length`.
pub fn uniform_weights<T: Scalar>(length: usize) -> Result<WeightVector<T>> {
    if length < 2 {
        return Err(Error::invalid(format!(
            "weight length must be ≥ 2, got {length}"
        )));
    }
    let w = T::one() / T::count(length);
    Ok(WeightVector {
        weights: vec![w; length],
    })
}

/// Default decay constant: a third of the window length.
pub fn default_theta(length: usize) -> f64 {
    length as f64 / 3.0
}

/// Output of the one-factor market-mode regression `r_i = α_i + β_i·I + c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetrendResult<T: Scalar = f64> {
    pub residuals: Array2<T>,
    pub alphas: Array1<T>,
    pub betas: Array1<T>,
    pub index: Array1<T>,
}

impl<T: Scalar> DetrendResult<T> {
    /// Residual panel with the source's dates and tickers, flagged as detrended.
    pub fn into_panel(self, source: &ReturnsPanel<T>) -> ReturnsPanel<T> {
        source.with_returns(self.residuals, true)
    }
}

/// Regresses every asset on the cross-sectional mean return `I(t)` and keeps the residuals.
pub fn detrend_market_mode<T: Scalar>(window: &ReturnsPanel<T>) -> Result<DetrendResult<T>> {
    let r = window.returns();
    let index = r.mean_axis(Axis(1)).ok_or(Error::TooFewAssets {
        required: 1,
        actual: 0,
    })?;
    detrend_on_index(r, index)
}

/// OLS of each column of `returns` on an explicit regressor.
pub fn detrend_on_index<T: Scalar>(
    returns: ArrayView2<'_, T>,
    index: Array1<T>,
) -> Result<DetrendResult<T>> {
    let (days, n) = returns.dim();
    if days < 3 {
        return Err(Error::invalid(format!(
            "detrending needs ≥ 3 days, got {days}"
        )));
    }
    if index.len() != days {
        return Err(Error::DimensionMismatch {
            expected: days,
            actual: index.len(),
        });
    }
    let len = T::count(days);
    let mean_i = index.sum() / len;
    let dev_i: Array1<T> = index.mapv(|x| x - mean_i);
    let sxx = dev_i.dot(&dev_i);
    let scale = index.dot(&index);
    if !(sxx > T::lit(16.0) * T::epsilon() * T::epsilon() * scale) {
        return Err(Error::DegenerateRegression);
    }

    let mut alphas = Array1::zeros(n);
    let mut betas = Array1::zeros(n);
    let mut residuals = Array2::zeros((days, n));
    for j in 0..n {
        let col = returns.column(j);
        let mean_r = col.sum() / len;
        let sxy = col
            .iter()
            .zip(dev_i.iter())
            .map(|(&y, &dx)| (y - mean_r) * dx)
            .sum::<T>();
        let beta = sxy / sxx;
        let alpha = mean_r - beta * mean_i;
        for t in 0..days {
            residuals[[t, j]] = (col[t] - mean_r) - beta * dev_i[t];
        }
        alphas[j] = alpha;
        betas[j] = beta;
    }
    Ok(DetrendResult {
        residuals,
        alphas,
        betas,
        index,
    })
}

/// Symmetric unit-diagonal correlation matrix over a ticker set.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T: Scalar = f64> {
    tickers: Vec<String>,
    rho: Array2<T>,
    window_id: Option<usize>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    /// Validates squareness, symmetry, unit diagonal and range.
    pub fn new(tickers: Vec<String>, rho: Array2<T>, window_id: Option<usize>) -> Result<Self> {
        let n = tickers.len();
        if rho.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: rho.nrows(),
            });
        }
        for i in 0..n {
            if rho[[i, i]] != T::one() {
                return Err(Error::invalid(format!(
                    "diagonal entry {i} is {}",
                    rho[[i, i]]
                )));
            }
            for j in (i + 1)..n {
                let v = rho[[i, j]];
                if v != rho[[j, i]] {
                    return Err(Error::invalid(format!("asymmetric entry ({i}, {j})")));
                }
                if !(v >= -T::one() && v <= T::one()) {
                    return Err(Error::invalid(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(CorrelationMatrix {
            tickers,
            rho,
            window_id,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn rho(&self) -> ArrayView2<'_, T> {
        self.rho.view()
    }

    pub fn window_id(&self) -> Option<usize> {
        self.window_id
    }

    pub fn len(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickers.is_empty()
    }

    pub fn with_window_id(mut self, id: Option<usize>) -> Self {
        self.window_id = id;
        self
    }

    /// Off-diagonal upper-triangle entries, row-major.
    pub fn upper_triangle(&self) -> Vec<T> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.rho[[i, j]]);
            }
        }
        out
    }
}

/// Pairwise distances `d = sqrt(2(1 − ρ))`, keeping the similarities alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T: Scalar = f64> {
    tickers: Vec<String>,
    d: Array2<T>,
    rho: Array2<T>,
    window_id: Option<usize>,
}

impl<T: Scalar> DistanceMatrix<T> {
    /// Builds from raw distances in `[0, 2]`; similarities are recovered as `1 − d²/2`.
    pub fn from_distances(tickers: Vec<String>, d: Array2<T>) -> Result<Self> {
        let n = tickers.len();
        if d.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: d.nrows(),
            });
        }
        let two = T::lit(2.0);
        for i in 0..n {
            if d[[i, i]] != T::zero() {
                return Err(Error::invalid(format!("distance diagonal {i} is nonzero")));
            }
            for j in (i + 1)..n {
                let v = d[[i, j]];
                if v != d[[j, i]] {
                    return Err(Error::invalid(format!("asymmetric distance ({i}, {j})")));
                }
                if !(v >= T::zero() && v <= two) {
                    return Err(Error::invalid(format!(
                        "distance ({i}, {j}) = {v} outside [0, 2]"
                    )));
                }
            }
        }
        let rho = d.mapv(|x| T::one() - x * x / two);
        Ok(DistanceMatrix {
            tickers,
            d,
            rho,
            window_id: None,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn d(&self) -> ArrayView2<'_, T> {
        self.d.view()
    }

    pub fn rho(&self) -> ArrayView2<'_, T> {
        self.rho.view()
    }

    pub fn window_id(&self) -> Option<usize> {
        self.window_id
    }

    pub fn len(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickers.is_empty()
    }
}

/// Weighted Pearson correlation of every asset pair over the window.
pub fn weighted_correlation<T: Scalar>(
    window: &ReturnsPanel<T>,
    w: &WeightVector<T>,
) -> Result<CorrelationMatrix<T>> {
    let r = window.returns();
    let (days, n) = r.dim();
    if w.len() != days {
        return Err(Error::DimensionMismatch {
            expected: days,
            actual: w.len(),
        });
    }
    let weights = Array1::from(w.as_slice().to_vec());
    let total = weights.sum();
    let means: Array1<T> = weights.dot(&r) / total;

    // sqrt(w_t)·(c_ti − μ_i), so that Yᵀ·Y is the weighted covariance.
    let mut scaled = Array2::zeros((days, n));
    for t in 0..days {
        let sw = (weights[t] / total).sqrt();
        for i in 0..n {
            scaled[[t, i]] = sw * (r[[t, i]] - means[i]);
        }
    }
    let cov = scaled.t().dot(&scaled);

    let tickers = window.tickers();
    let floor = T::lit(16.0) * T::epsilon() * T::epsilon();
    let mut sd = Vec::with_capacity(n);
    for i in 0..n {
        let raw_sq = (0..days)
            .map(|t| weights[t] / total * r[[t, i]] * r[[t, i]])
            .sum::<T>();
        let v = cov[[i, i]];
        if !(v > floor * raw_sq) || !(v > T::zero()) {
            return Err(Error::ZeroVariance {
                asset: tickers[i].clone(),
            });
        }
        sd.push(v.sqrt());
    }

    let mut rho = Array2::from_elem((n, n), T::one());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (cov[[i, j]] / (sd[i] * sd[j])).max(-T::one()).min(T::one());
            rho[[i, j]] = v;
            rho[[j, i]] = v;
        }
    }
    CorrelationMatrix::new(tickers.to_vec(), rho, None)
}

pub fn correlation_to_distance<T: Scalar>(c: &CorrelationMatrix<T>) -> DistanceMatrix<T> {
    let two = T::lit(2.0);
    let d = c.rho.mapv(|r| (two * (T::one() - r)).max(T::zero()).sqrt());
    DistanceMatrix {
        tickers: c.tickers.clone(),
        d,
        rho: c.rho.clone(),
        window_id: c.window_id,
    }
}

/// Pearson correlation between the distinct-pair entries of two correlation matrices.
pub fn metacorrelation<T: Scalar>(a: &CorrelationMatrix<T>, b: &CorrelationMatrix<T>) -> Result<T> {
    if a.tickers != b.tickers {
        return Err(Error::TickerMismatch(
            "metacorrelation needs identical ticker order".into(),
        ));
    }
    let x = a.upper_triangle();
    let y = b.upper_triangle();
    pearson(&x, &y).ok_or_else(|| Error::ZeroVariance {
        asset: "off-diagonal correlation entries".into(),
    })
}

/// Plain Pearson correlation; `None` when either side is constant or too short.
pub(crate) fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Option<T> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = T::count(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if !(sxx > T::zero() && syy > T::zero()) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one()))
}
