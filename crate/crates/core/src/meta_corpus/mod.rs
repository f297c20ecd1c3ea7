//! Multidimensional rating corpora: loading, validation and correlation analysis.

mod records;
mod report;
mod stats;

pub use records::{
    load_ratings, planted_correlation_records, write_ratings, ColumnMap, CorpusError, Dimension,
    RatingRecord, ScoreTuple, SplitTag, SUB_DIMENSIONS,
};
pub use report::{correlation_report, scatter_data, CorrelationReport, DimensionFit};
pub use stats::{linear_fit, pearson, rank, spearman, StatsError};
pub use report::write_scatter;
