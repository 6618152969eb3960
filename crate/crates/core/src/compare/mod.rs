//! Partition similarity (adjusted Rand index) and cluster over-representation
//! tests.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::partition::Clustering;
use crate::scalar::Field;

/// Intersection counts between two partitions of the same tickers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    pub m: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

pub fn contingency_table(y: &Clustering, y2: &Clustering) -> Result<ContingencyTable> {
    y.check_same_tickers(y2.tickers())?;
    let mut m = vec![vec![0u64; y2.n_clusters()]; y.n_clusters()];
    for (&a, &b) in y.labels().iter().zip(y2.labels()) {
        m[a][b] += 1;
    }
    let row_sums = m.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..y2.n_clusters())
        .map(|j| m.iter().map(|r| r[j]).sum())
        .collect();
    Ok(ContingencyTable {
        m,
        row_sums,
        col_sums,
        total: y.len() as u64,
    })
}

fn pairs(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

/// Adjusted Rand index evaluated in any field, so rationals give exact values.
pub fn adjusted_rand_index_as<T: Field>(y: &Clustering, y2: &Clustering) -> Result<T> {
    let table = contingency_table(y, y2)?;
    let n = table.total;
    if n < 2 {
        return Err(Error::TooFewAssets {
            required: 2,
            actual: n as usize,
        });
    }
    let index = T::from_count(table.m.iter().flatten().map(|&x| pairs(x)).sum());
    let t1 = T::from_count(table.row_sums.iter().map(|&x| pairs(x)).sum());
    let t2 = T::from_count(table.col_sums.iter().map(|&x| pairs(x)).sum());
    let two = T::from_count(2);
    let t3 = two.clone() * t1.clone() * t2.clone() / T::from_count(n * (n - 1));
    let denom = (t1 + t2) / two - t3.clone();
    if denom == T::zero() {
        let identical = table
            .m
            .iter()
            .all(|row| row.iter().filter(|&&x| x > 0).count() <= 1)
            && table.row_sums.len() == table.col_sums.len();
        return Ok(if identical { T::one() } else { T::zero() });
    }
    Ok((index - t3) / denom)
}

pub fn adjusted_rand_index(y: &Clustering, y2: &Clustering) -> Result<f64> {
    adjusted_rand_index_as::<f64>(y, y2)
}

fn check_hypergeometric(n: u64, size_ref: u64, size_cand: u64, k: u64) -> Result<()> {
    check_tail(n, size_ref, size_cand, k)?;
    if size_ref + size_cand <= n + k {
        Ok(())
    } else {
        Err(infeasible(n, size_ref, size_cand, k))
    }
}

/// Tails also accept a `k` below the support, where they equal one.
fn check_tail(n: u64, size_ref: u64, size_cand: u64, k: u64) -> Result<()> {
    if size_ref <= n && size_cand <= n && k <= size_ref.min(size_cand) {
        Ok(())
    } else {
        Err(infeasible(n, size_ref, size_cand, k))
    }
}

fn infeasible(n: u64, size_ref: u64, size_cand: u64, k: u64) -> Error {
    Error::invalid(format!(
        "infeasible hypergeometric parameters N={n}, sizes {size_ref} and {size_cand}, overlap {k}"
    ))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn ln_pmf(n: u64, size_ref: u64, size_cand: u64, x: u64) -> f64 {
    ln_choose(size_cand, x) + ln_choose(n - size_cand, size_ref - x) - ln_choose(n, size_ref)
}

fn choose<T: Field>(n: u64, k: u64) -> T {
    (0..k).fold(T::one(), |acc, i| {
        acc * T::from_count(n - i) / T::from_count(i + 1)
    })
}

/// Probability that a random `size_ref`-subset of `n` objects shares exactly
/// `k` members with a fixed `size_cand`-subset.
pub fn hypergeometric_pmf_as<T: Field>(n: u64, size_ref: u64, size_cand: u64, k: u64) -> Result<T> {
    check_hypergeometric(n, size_ref, size_cand, k)?;
    Ok(
        choose::<T>(size_cand, k) * choose::<T>(n - size_cand, size_ref - k)
            / choose::<T>(n, size_ref),
    )
}

pub fn hypergeometric_pmf(n: u64, size_ref: u64, size_cand: u64, k: u64) -> Result<f64> {
    check_hypergeometric(n, size_ref, size_cand, k)?;
    Ok(ln_pmf(n, size_ref, size_cand, k).exp())
}

/// Upper tail `P(X >= k)`, summed in log space.
pub fn hypergeometric_pvalue(n: u64, size_ref: u64, size_cand: u64, k: u64) -> Result<f64> {
    check_tail(n, size_ref, size_cand, k)?;
    let lo = (size_ref + size_cand).saturating_sub(n);
    if k <= lo {
        return Ok(1.0);
    }
    let hi = size_ref.min(size_cand);
    let terms: Vec<f64> = (k..=hi)
        .map(|x| ln_pmf(n, size_ref, size_cand, x))
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - top).exp()).sum();
    Ok((top + sum.ln()).exp().min(1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TestStatistic {
    /// `P(X >= k)`.
    #[default]
    Tail,
    /// `P(X = k)`.
    PointMass,
}

impl TestStatistic {
    pub fn evaluate(self, n: u64, size_ref: u64, size_cand: u64, k: u64) -> Result<f64> {
        match self {
            TestStatistic::Tail => hypergeometric_pvalue(n, size_ref, size_cand, k),
            TestStatistic::PointMass => hypergeometric_pmf(n, size_ref, size_cand, k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateTest {
    pub cluster: usize,
    pub size: usize,
    pub overlap: usize,
    pub p_value: f64,
    pub threshold: f64,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub tests: Vec<CandidateTest>,
    pub selected: Option<usize>,
}

impl MatchResult {
    /// Size of the selected cluster, zero when nothing matched.
    pub fn selected_size(&self) -> usize {
        self.selected.map_or(0, |c| self.tests[c].size)
    }

    pub fn selected_members<'a>(&self, candidates: &'a Clustering) -> Vec<&'a str> {
        let Some(c) = self.selected else {
            return Vec::new();
        };
        candidates
            .labels()
            .iter()
            .zip(candidates.tickers())
            .filter(|(&l, _)| l == c)
            .map(|(_, t)| t.as_str())
            .collect()
    }
}

/// Tests every candidate cluster for over-representation of `reference`
/// members at level `alpha / n_tests`, and selects the largest match
/// (ties to the lower cluster id).
pub fn match_similar_clusters(
    reference: &[usize],
    candidates: &Clustering,
    alpha: f64,
    n_tests: usize,
    statistic: TestStatistic,
) -> Result<MatchResult> {
    if reference.is_empty() {
        return Err(Error::invalid("empty reference cluster"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if n_tests == 0 {
        return Err(Error::invalid("n_tests must be at least 1"));
    }
    let n = candidates.len();
    let mut in_ref = vec![false; n];
    for &v in reference {
        if v >= n {
            return Err(Error::invalid(format!(
                "reference member {v} outside 0..{n}"
            )));
        }
        in_ref[v] = true;
    }
    let size_ref = in_ref.iter().filter(|&&x| x).count();
    let threshold = alpha / n_tests as f64;
    let tests = candidates
        .clusters()
        .into_iter()
        .enumerate()
        .map(|(cluster, members)| {
            let overlap = members.iter().filter(|&&v| in_ref[v]).count();
            let p_value = statistic.evaluate(
                n as u64,
                size_ref as u64,
                members.len() as u64,
                overlap as u64,
            )?;
            Ok(CandidateTest {
                cluster,
                size: members.len(),
                overlap,
                p_value,
                threshold,
                matched: p_value < threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let selected = tests
        .iter()
        .filter(|t| t.matched)
        .max_by(|a, b| a.size.cmp(&b.size).then(b.cluster.cmp(&a.cluster)))
        .map(|t| t.cluster);
    Ok(MatchResult { tests, selected })
}

#[cfg(test)]
mod tests;
