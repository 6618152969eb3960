//! Price and sector ingestion, log-returns, and synthetic block-model panels.

mod prices;
mod sectors;
mod synthetic;

pub use prices::{
    compute_log_returns, load_price_panel, prices_from_returns, read_price_panel,
    read_returns_panel, write_price_panel, write_returns_panel, LoadReport, MissingPolicy,
    PricePanel, ReturnsPanel,
};
pub use sectors::{
    load_sector_table, read_sector_table, write_sector_table, IcbLevel, SectorLabels, SectorTable,
};
pub use synthetic::{
    generate_regime_panel, generate_synthetic_panel, planted_sector_table, synthetic_dates,
    BlockModelSpec, RegimeSegment,
};
