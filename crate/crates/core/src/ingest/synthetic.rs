use std::collections::BTreeMap;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::prices::ReturnsPanel;
use super::sectors::{SectorLabels, SectorTable};
use crate::error::{Error, Result};
use crate::partition::Clustering;
use crate::scalar::Scalar;

/// Parameters of the one-market-factor plus one-block-factor Gaussian model
/// `r_i(t) = market·M(t) + block·F_{b(i)}(t) + sigma·eps_i(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModelSpec {
    pub n_assets: usize,
    pub n_blocks: usize,
    pub block_loading: f64,
    pub market_loading: f64,
    pub noise_sigma: f64,
    pub n_days: usize,
    pub seed: u64,
}

impl BlockModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::invalid("n_blocks must be at least 1"));
        }
        if self.n_blocks > self.n_assets {
            return Err(Error::invalid(format!(
                "n_blocks {} exceeds n_assets {}",
                self.n_blocks, self.n_assets
            )));
        }
        if self.n_days < 2 {
            return Err(Error::invalid("n_days must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.block_loading) {
            return Err(Error::invalid("block_loading must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.market_loading) {
            return Err(Error::invalid("market_loading must lie in [0, 1)"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be positive"));
        }
        Ok(())
    }

    /// Contiguous, near-equal blocks: asset `i` belongs to block `i·B/N`.
    pub fn block_of(&self, asset: usize) -> usize {
        asset * self.n_blocks / self.n_assets
    }

    pub fn tickers(&self) -> Vec<String> {
        let width = self.n_assets.saturating_sub(1).to_string().len().max(3);
        (0..self.n_assets)
            .map(|i| format!("A{i:0width$}"))
            .collect()
    }

    pub fn default_assignment(&self) -> Vec<Option<usize>> {
        (0..self.n_assets).map(|i| Some(self.block_of(i))).collect()
    }

    /// The default block map with the members of `block` dealt round-robin
    /// to the remaining blocks.
    pub fn dissolved_assignment(&self, block: usize) -> Vec<Option<usize>> {
        let others: Vec<usize> = (0..self.n_blocks).filter(|&b| b != block).collect();
        let mut dealt = 0;
        self.default_assignment()
            .into_iter()
            .map(|b| {
                if b != Some(block) || others.is_empty() {
                    return b;
                }
                dealt += 1;
                Some(others[(dealt - 1) % others.len()])
            })
            .collect()
    }

    /// The default block map with asset positions shuffled by `seed`, so
    /// block sizes are kept but memberships change.
    pub fn shuffled_assignment(&self, seed: u64) -> Vec<Option<usize>> {
        let mut map = self.default_assignment();
        map.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        map
    }
}

/// A stretch of days with a fixed asset → block map. `None` leaves an asset
/// without any block factor for the segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSegment {
    pub n_days: usize,
    pub assignment: Vec<Option<usize>>,
}

/// Weekdays starting Monday 2000-01-03.
pub fn synthetic_dates(n: usize) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn generate_synthetic_panel<T: Scalar>(
    spec: &BlockModelSpec,
) -> Result<(ReturnsPanel<T>, Clustering)> {
    spec.validate()?;
    let segment = RegimeSegment {
        n_days: spec.n_days,
        assignment: spec.default_assignment(),
    };
    let (panel, mut planted) = generate_regime_panel(spec, &[segment], None)?;
    Ok((panel, planted.remove(0)))
}

/// Piecewise block model: each segment uses its own block map; `persistent`
/// optionally adds one more factor with fixed per-asset loadings across all
/// segments. `spec.n_days` is ignored in favour of the segment lengths.
///
/// Returns the panel and the planted clustering of each segment, where
/// unassigned assets are singletons.
pub fn generate_regime_panel<T: Scalar>(
    spec: &BlockModelSpec,
    segments: &[RegimeSegment],
    persistent: Option<&[f64]>,
) -> Result<(ReturnsPanel<T>, Vec<Clustering>)> {
    let total: usize = segments.iter().map(|s| s.n_days).sum();
    BlockModelSpec {
        n_days: total,
        ..spec.clone()
    }
    .validate()?;
    let n = spec.n_assets;
    for seg in segments {
        if seg.assignment.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: seg.assignment.len(),
            });
        }
        if seg.assignment.iter().flatten().any(|&b| b >= spec.n_blocks) {
            return Err(Error::invalid("segment assigns an out-of-range block"));
        }
    }
    if let Some(p) = persistent {
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: p.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut returns = Array2::<T>::zeros((total, n));
    let mut block_draws = vec![0.0f64; spec.n_blocks];
    let mut row = 0;
    for seg in segments {
        for _ in 0..seg.n_days {
            let market: f64 = StandardNormal.sample(&mut rng);
            for f in block_draws.iter_mut() {
                *f = StandardNormal.sample(&mut rng);
            }
            for i in 0..n {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let block = seg.assignment[i].map_or(0.0, |b| block_draws[b]);
                let r = spec.market_loading * market
                    + spec.block_loading * block
                    + spec.noise_sigma * eps;
                returns[[row, i]] = T::lit(r);
            }
            if let Some(p) = persistent {
                let g: f64 = StandardNormal.sample(&mut rng);
                for i in 0..n {
                    returns[[row, i]] = returns[[row, i]] + T::lit(p[i] * g);
                }
            }
            row += 1;
        }
    }

    let tickers = spec.tickers();
    let dates = synthetic_dates(total + 1)[1..].to_vec();
    let planted = segments
        .iter()
        .map(|seg| {
            let labels = seg
                .assignment
                .iter()
                .enumerate()
                .map(|(i, b)| b.unwrap_or(spec.n_blocks + i))
                .collect();
            Clustering::from_labels(tickers.clone(), labels)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ReturnsPanel::new(dates, tickers, returns, false)?, planted))
}

/// Sector table mirroring a planted clustering: each cluster is one industry
/// and supersector, split in halves for sector and subsector.
pub fn planted_sector_table(planted: &Clustering) -> Result<SectorTable> {
    let mut entries = BTreeMap::new();
    for members in planted.clusters() {
        let half = members.len().div_ceil(2);
        for (rank, &v) in members.iter().enumerate() {
            let b = planted.labels()[v];
            let part = if rank < half { 'a' } else { 'b' };
            entries.insert(
                planted.tickers()[v].clone(),
                SectorLabels {
                    industry: format!("Industry{b:02}"),
                    supersector: format!("Supersector{b:02}"),
                    sector: format!("Sector{b:02}{part}"),
                    subsector: format!("Subsector{b:02}{part}"),
                },
            );
        }
    }
    SectorTable::new(entries)
}
