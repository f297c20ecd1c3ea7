use std::io::Write;

use serde::{Deserialize, Serialize};

use super::records::{Dimension, RatingRecord, SUB_DIMENSIONS};
use super::stats::{linear_fit, pearson, StatsError};

/// Correlation of one sub-dimension with MOS, plus the least-squares line
/// `mos = slope * score + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub pearson_r: f64,
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub noi: DimensionFit,
    pub col: DimensionFit,
    pub dis: DimensionFit,
    pub loud: DimensionFit,
}

impl CorrelationReport {
    pub fn get(&self, dim: Dimension) -> Option<&DimensionFit> {
        match dim {
            Dimension::Mos => None,
            Dimension::Noi => Some(&self.noi),
            Dimension::Col => Some(&self.col),
            Dimension::Dis => Some(&self.dis),
            Dimension::Loud => Some(&self.loud),
        }
    }

    /// Key/value text with one `[dimension]` block per sub-dimension.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("report fields are plain numbers")
    }

    pub fn from_text(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// `(score, mos)` pairs for one sub-dimension.
pub fn scatter_data(records: &[RatingRecord], dim: Dimension) -> Vec<(f64, f64)> {
    records
        .iter()
        .map(|r| (r.scores.get(dim), r.scores.mos))
        .collect()
}

/// Write scatter pairs as `x,y` lines with a header.
pub fn write_scatter<W: Write>(mut sink: W, points: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(sink, "x,y")?;
    for (x, y) in points {
        writeln!(sink, "{x},{y}")?;
    }
    Ok(())
}

/// Pearson correlation and linear fit of MOS against each sub-dimension.
pub fn correlation_report(records: &[RatingRecord]) -> Result<CorrelationReport, StatsError> {
    let mos: Vec<f64> = records.iter().map(|r| r.scores.mos).collect();
    let fit = |dim: Dimension| -> Result<DimensionFit, StatsError> {
        let xs: Vec<f64> = records.iter().map(|r| r.scores.get(dim)).collect();
        let pearson_r = pearson(&xs, &mos)?;
        let (slope, intercept) = linear_fit(&xs, &mos)?;
        Ok(DimensionFit {
            pearson_r,
            slope,
            intercept,
            n: records.len(),
        })
    };
    let [noi, col, dis, loud] = SUB_DIMENSIONS;
    Ok(CorrelationReport {
        noi: fit(noi)?,
        col: fit(col)?,
        dis: fit(dis)?,
        loud: fit(loud)?,
    })
}
