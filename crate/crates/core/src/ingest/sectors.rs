use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Clustering;

/// The four nested ICB classification levels, coarsest first.
#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum IcbLevel {
    Industry,
    Supersector,
    Sector,
    Subsector,
}

impl IcbLevel {
    pub const ALL: [IcbLevel; 4] = [
        IcbLevel::Industry,
        IcbLevel::Supersector,
        IcbLevel::Sector,
        IcbLevel::Subsector,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IcbLevel::Industry => "industry",
            IcbLevel::Supersector => "supersector",
            IcbLevel::Sector => "sector",
            IcbLevel::Subsector => "subsector",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorLabels {
    pub industry: String,
    pub supersector: String,
    pub sector: String,
    pub subsector: String,
}

impl SectorLabels {
    pub fn at(&self, level: IcbLevel) -> &str {
        match level {
            IcbLevel::Industry => &self.industry,
            IcbLevel::Supersector => &self.supersector,
            IcbLevel::Sector => &self.sector,
            IcbLevel::Subsector => &self.subsector,
        }
    }
}

/// Ticker → ICB labels, validated so every finer label nests in one coarser label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectorTable {
    entries: BTreeMap<String, SectorLabels>,
}

#[derive(Deserialize)]
struct Row {
    ticker: String,
    industry: String,
    supersector: String,
    sector: String,
    subsector: String,
}

impl SectorTable {
    pub fn new(entries: BTreeMap<String, SectorLabels>) -> Result<Self> {
        let table = SectorTable { entries };
        table.validate_nesting()?;
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, ticker: &str) -> Result<&SectorLabels> {
        self.entries
            .get(ticker)
            .ok_or_else(|| Error::UnknownTicker(ticker.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &SectorLabels)> {
        self.entries.iter()
    }

    /// Sorted distinct labels at `level`.
    pub fn labels(&self, level: IcbLevel) -> Vec<String> {
        let mut v: Vec<String> = self
            .entries
            .values()
            .map(|l| l.at(level).to_string())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// The partition of `tickers` induced by `level`; cluster ids follow sorted label order.
    pub fn partition(&self, tickers: &[String], level: IcbLevel) -> Result<Clustering> {
        let names = self.labels(level);
        let mut labels = Vec::with_capacity(tickers.len());
        for t in tickers {
            let l = self.lookup(t)?.at(level);
            labels.push(
                names
                    .binary_search_by(|n| n.as_str().cmp(l))
                    .expect("label listed"),
            );
        }
        Clustering::from_labels(tickers.to_vec(), labels)
    }

    fn validate_nesting(&self) -> Result<()> {
        for pair in IcbLevel::ALL.windows(2) {
            let (coarse, fine) = (pair[0], pair[1]);
            let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
            for labels in self.entries.values() {
                let (f, c) = (labels.at(fine), labels.at(coarse));
                if let Some(&prev) = parent.get(f) {
                    if prev != c {
                        return Err(Error::NestingViolation {
                            level: fine.name(),
                            label: f.to_string(),
                            parent_level: coarse.name(),
                            first: prev.to_string(),
                            second: c.to_string(),
                        });
                    }
                } else {
                    parent.insert(f, c);
                }
            }
        }
        Ok(())
    }
}

pub fn load_sector_table(path: impl AsRef<Path>) -> Result<SectorTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sector_table(file)
}

pub fn read_sector_table<R: Read>(reader: R) -> Result<SectorTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut entries = BTreeMap::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        let line = i + 2;
        if row.ticker.is_empty() {
            return Err(Error::Parse {
                location: format!("line {line}"),
                message: "missing ticker".into(),
            });
        }
        let labels = SectorLabels {
            industry: row.industry,
            supersector: row.supersector,
            sector: row.sector,
            subsector: row.subsector,
        };
        if IcbLevel::ALL.iter().any(|&l| labels.at(l).is_empty()) {
            return Err(Error::Parse {
                location: format!("line {line}"),
                message: format!("ticker {} lacks a classification label", row.ticker),
            });
        }
        if entries.insert(row.ticker.clone(), labels).is_some() {
            return Err(Error::DuplicateTicker(row.ticker));
        }
    }
    SectorTable::new(entries)
}

pub fn write_sector_table<W: Write>(writer: W, table: &SectorTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ticker", "industry", "supersector", "sector", "subsector"])?;
    for (ticker, l) in table.iter() {
        w.write_record([ticker, &l.industry, &l.supersector, &l.sector, &l.subsector])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
