//! Total value locked: the protocol's own TVL and statistics over external
//! TVL time series.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Engine, POT_ACCOUNT};
use crate::error::EngineResult;
use crate::liquidation::AuctionState;
use crate::numerics::{MathError, Wad};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series is empty")]
    EmptySeries,
    #[error("TVL is zero")]
    ZeroTvl,
    #[error("row {row}: date {date} does not follow {previous}")]
    NotIncreasing {
        row: usize,
        date: NaiveDate,
        previous: NaiveDate,
    },
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Math(#[from] MathError),
}

impl Engine {
    /// USD value of collateral locked in vaults and held in auction escrow.
    pub fn total_collateral_value(&self) -> EngineResult<Wad> {
        let mut total = Wad::ZERO;
        for v in self.vaults.values() {
            total = total.checked_add(v.locked_collateral.mul(self.feed.price(&v.collateral)?)?)?;
        }
        for a in self.auctions.values().filter(|a| a.state == AuctionState::Active) {
            total = total.checked_add(a.lot.mul(self.feed.price(&a.collateral)?)?)?;
        }
        Ok(total)
    }

    /// Collateral value plus Dai deposited in savings, counted at $1.
    pub fn protocol_tvl(&self) -> EngineResult<Wad> {
        Ok(self
            .total_collateral_value()?
            .checked_add(self.dai.balance_of(POT_ACCOUNT))?)
    }
}

pub fn mcap_tvl_ratio(market_cap: Wad, tvl: Wad) -> Result<Wad, MetricsError> {
    if tvl.is_zero() {
        return Err(MetricsError::ZeroTvl);
    }
    Ok(market_cap.div(tvl)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TvlPoint {
    pub date: NaiveDate,
    pub tvl_usd: Wad,
}

/// A TVL series with strictly increasing dates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TvlSeries {
    points: Vec<TvlPoint>,
}

impl TvlSeries {
    pub fn new(points: Vec<TvlPoint>) -> Result<Self, MetricsError> {
        for (i, pair) in points.windows(2).enumerate() {
            if pair[1].date <= pair[0].date {
                return Err(MetricsError::NotIncreasing {
                    row: i + 2,
                    date: pair[1].date,
                    previous: pair[0].date,
                });
            }
        }
        Ok(Self { points })
    }

    /// Reads `date,tvl_usd` CSV with ISO dates and decimal USD values.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, MetricsError> {
        #[derive(Deserialize)]
        struct Row {
            date: String,
            tvl_usd: String,
        }
        let mut points = Vec::new();
        for (i, row) in csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader)
            .deserialize::<Row>()
            .enumerate()
        {
            let row_no = i + 1;
            let row = row?;
            let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d").map_err(|e| MetricsError::BadRow {
                row: row_no,
                message: format!("date {:?}: {e}", row.date),
            })?;
            let tvl_usd = row.tvl_usd.parse::<Wad>().map_err(|e| MetricsError::BadRow {
                row: row_no,
                message: format!("tvl_usd {:?}: {e}", row.tvl_usd),
            })?;
            points.push(TvlPoint { date, tvl_usd });
        }
        Self::new(points)
    }

    pub fn from_path(path: &Path) -> Result<Self, MetricsError> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn points(&self) -> &[TvlPoint] {
        &self.points
    }

    pub fn value_on(&self, date: NaiveDate) -> Option<Wad> {
        self.points
            .binary_search_by_key(&date, |p| p.date)
            .ok()
            .map(|i| self.points[i].tvl_usd)
    }

    pub fn stats(&self) -> Result<SeriesStats, MetricsError> {
        series_stats(&self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeriesStats {
    pub first: TvlPoint,
    pub last: TvlPoint,
    /// First occurrence of the global maximum.
    pub peak: TvlPoint,
    /// Lowest point on or after the peak.
    pub trough: TvlPoint,
    /// Largest `(high - later low) / high` over the whole series.
    pub max_drawdown: Wad,
}

pub fn series_stats(points: &[TvlPoint]) -> Result<SeriesStats, MetricsError> {
    let first = *points.first().ok_or(MetricsError::EmptySeries)?;
    let last = *points.last().expect("non-empty");

    let mut peak = first;
    for p in points {
        if p.tvl_usd > peak.tvl_usd {
            peak = *p;
        }
    }
    let mut trough = peak;
    for p in points.iter().filter(|p| p.date > peak.date) {
        if p.tvl_usd < trough.tvl_usd {
            trough = *p;
        }
    }

    let mut running_high = first.tvl_usd;
    let mut max_drawdown = Wad::ZERO;
    for p in points {
        running_high = running_high.max(p.tvl_usd);
        if !running_high.is_zero() {
            let dd = running_high.checked_sub(p.tvl_usd)?.div(running_high)?;
            max_drawdown = max_drawdown.max(dd);
        }
    }
    Ok(SeriesStats {
        first,
        last,
        peak,
        trough,
        max_drawdown,
    })
}
