use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCORE_MIN: f64 = 1.0;
pub const SCORE_MAX: f64 = 5.0;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },
    #[error("row {line} ({sample_id}): {column} out of [1,5]: {value}")]
    OutOfRange {
        line: u64,
        sample_id: String,
        column: String,
        value: f64,
    },
    #[error("row {line} ({sample_id}): cannot parse {column} value `{raw}`")]
    BadValue {
        line: u64,
        sample_id: String,
        column: String,
        raw: String,
    },
    #[error("row {line}: duplicate sample_id `{sample_id}`")]
    DuplicateId { line: u64, sample_id: String },
}

/// A quality dimension. `Mos` is the overall score, the rest are sub-dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Mos,
    Noi,
    Col,
    Dis,
    Loud,
}

/// The four perceptual sub-dimensions, in rubric order.
pub const SUB_DIMENSIONS: [Dimension; 4] =
    [Dimension::Noi, Dimension::Col, Dimension::Dis, Dimension::Loud];

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Mos,
        Dimension::Noi,
        Dimension::Col,
        Dimension::Dis,
        Dimension::Loud,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Dimension::Mos => "mos",
            Dimension::Noi => "noi",
            Dimension::Col => "col",
            Dimension::Dis => "dis",
            Dimension::Loud => "loud",
        }
    }

    /// Human-readable name used in generated text.
    pub fn noun(self) -> &'static str {
        match self {
            Dimension::Mos => "overall quality",
            Dimension::Noi => "noisiness",
            Dimension::Col => "coloration",
            Dimension::Dis => "discontinuity",
            Dimension::Loud => "loudness",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.key().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown dimension `{s}`"))
    }
}

/// The five human-annotated scores of one speech sample. Scores are kept as
/// real-valued listener averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTuple {
    pub mos: f64,
    pub noi: f64,
    pub col: f64,
    pub dis: f64,
    pub loud: f64,
}

impl ScoreTuple {
    pub fn new(mos: f64, noi: f64, col: f64, dis: f64, loud: f64) -> Self {
        Self {
            mos,
            noi,
            col,
            dis,
            loud,
        }
    }

    pub fn get(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Mos => self.mos,
            Dimension::Noi => self.noi,
            Dimension::Col => self.col,
            Dimension::Dis => self.dis,
            Dimension::Loud => self.loud,
        }
    }

    pub fn set(&mut self, dim: Dimension, value: f64) {
        match dim {
            Dimension::Mos => self.mos = value,
            Dimension::Noi => self.noi = value,
            Dimension::Col => self.col = value,
            Dimension::Dis => self.dis = value,
            Dimension::Loud => self.loud = value,
        }
    }

    /// First dimension whose score is outside `[1, 5]` (NaN included).
    pub fn out_of_range(&self) -> Option<(Dimension, f64)> {
        Dimension::ALL
            .into_iter()
            .map(|d| (d, self.get(d)))
            .find(|&(_, v)| !(SCORE_MIN..=SCORE_MAX).contains(&v))
    }

    pub fn is_valid(&self) -> bool {
        self.out_of_range().is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
    #[default]
    Other,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
            SplitTag::Other => "other",
        }
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(SplitTag::Train),
            "val" | "valid" | "validation" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            "other" | "" => Ok(SplitTag::Other),
            other => Err(format!("unknown split tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub sample_id: String,
    pub audio_ref: Option<String>,
    pub scores: ScoreTuple,
    pub vote_count: u32,
    pub split: SplitTag,
}

/// Header names for the columns of a rating table.
///
/// The id and score columns are required. The remaining columns are optional:
/// when absent from the header, records get no audio reference, zero votes and
/// `default_split`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub id: String,
    pub mos: String,
    pub noi: String,
    pub col: String,
    pub dis: String,
    pub loud: String,
    pub audio_ref: String,
    pub votes: String,
    pub split: String,
    pub default_split: SplitTag,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: "filename_deg".into(),
            mos: "mos".into(),
            noi: "noi".into(),
            col: "col".into(),
            dis: "dis".into(),
            loud: "loud".into(),
            audio_ref: "filepath_deg".into(),
            votes: "votes".into(),
            split: "split".into(),
            default_split: SplitTag::Other,
        }
    }
}

impl ColumnMap {
    fn score_column(&self, dim: Dimension) -> &str {
        match dim {
            Dimension::Mos => &self.mos,
            Dimension::Noi => &self.noi,
            Dimension::Col => &self.col,
            Dimension::Dis => &self.dis,
            Dimension::Loud => &self.loud,
        }
    }
}

fn sniff_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or_default();
    if header.matches('\t').count() > header.matches(',').count() {
        b'\t'
    } else {
        b','
    }
}

/// Load a comma- or tab-delimited rating table with a header row.
///
/// Every row is validated; scores outside `[1, 5]` are an error, never clamped.
pub fn load_ratings<R: Read>(
    mut source: R,
    columns: &ColumnMap,
) -> Result<Vec<RatingRecord>, CorpusError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(text))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| CorpusError::MissingColumn {
            column: name.to_string(),
        })
    };

    let id_idx = require(&columns.id)?;
    let mut score_idx = [0usize; 5];
    for (slot, dim) in score_idx.iter_mut().zip(Dimension::ALL) {
        *slot = require(columns.score_column(dim))?;
    }
    let audio_idx = find(&columns.audio_ref);
    let votes_idx = find(&columns.votes);
    let split_idx = find(&columns.split);

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let sample_id = row.get(id_idx).unwrap_or_default().to_string();
        let bad = |column: &str, raw: &str| CorpusError::BadValue {
            line,
            sample_id: sample_id.clone(),
            column: column.to_string(),
            raw: raw.to_string(),
        };

        let mut scores = ScoreTuple::new(0.0, 0.0, 0.0, 0.0, 0.0);
        for (&idx, dim) in score_idx.iter().zip(Dimension::ALL) {
            let column = columns.score_column(dim);
            let raw = row.get(idx).unwrap_or_default();
            let value: f64 = raw.parse().map_err(|_| bad(column, raw))?;
            if !(SCORE_MIN..=SCORE_MAX).contains(&value) {
                return Err(CorpusError::OutOfRange {
                    line,
                    sample_id,
                    column: column.to_string(),
                    value,
                });
            }
            scores.set(dim, value);
        }

        let audio_ref = audio_idx
            .and_then(|i| row.get(i))
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        let vote_count = match votes_idx.and_then(|i| row.get(i)).filter(|s| !s.is_empty()) {
            Some(raw) => parse_votes(raw).ok_or_else(|| bad(&columns.votes, raw))?,
            None => 0,
        };
        let split = match split_idx.and_then(|i| row.get(i)) {
            Some(raw) => raw.parse().map_err(|_| bad(&columns.split, raw))?,
            None => columns.default_split,
        };

        if !seen.insert(sample_id.clone()) {
            return Err(CorpusError::DuplicateId { line, sample_id });
        }
        out.push(RatingRecord {
            sample_id,
            audio_ref,
            scores,
            vote_count,
            split,
        });
    }
    Ok(out)
}

// Some tables store vote counts as floats ("5.0").
fn parse_votes(raw: &str) -> Option<u32> {
    raw.parse::<u32>().ok().or_else(|| {
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && *v >= 0.0 && *v <= f64::from(u32::MAX))
            .map(|v| v as u32)
    })
}

/// Write records as a comma-delimited table that [`load_ratings`] reads back
/// with the same column map.
pub fn write_ratings<W: Write>(
    sink: W,
    records: &[RatingRecord],
    columns: &ColumnMap,
) -> Result<(), CorpusError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record([
        columns.id.as_str(),
        columns.audio_ref.as_str(),
        columns.mos.as_str(),
        columns.noi.as_str(),
        columns.col.as_str(),
        columns.dis.as_str(),
        columns.loud.as_str(),
        columns.votes.as_str(),
        columns.split.as_str(),
    ])?;
    for r in records {
        let s = &r.scores;
        // `{}` on f64 prints the shortest string that parses back to the same value.
        writer.write_record([
            r.sample_id.clone(),
            r.audio_ref.clone().unwrap_or_default(),
            s.mos.to_string(),
            s.noi.to_string(),
            s.col.to_string(),
            s.dis.to_string(),
            s.loud.to_string(),
            r.vote_count.to_string(),
            r.split.as_str().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Synthetic records whose sub-dimensions each correlate with MOS at exactly `rho`
/// in expectation.
///
/// Each sub-dimension is built as `rho * u0 + sqrt(1 - rho^2) * u_d` over
/// independent uniforms, then mapped affinely into `[1, 5]`. Bounded inputs keep
/// every record valid without clamping, which would bias the correlation.
pub fn planted_correlation_records<R: Rng>(n: usize, rho: f64, rng: &mut R) -> Vec<RatingRecord> {
    assert!((-1.0..=1.0).contains(&rho), "rho must lie in [-1, 1]");
    let other = (1.0 - rho * rho).sqrt();
    let lo = rho.min(0.0);
    let hi = rho.max(0.0) + other;
    let to_scale = |v: f64| 1.0 + 4.0 * (v - lo) / (hi - lo);
    (0..n)
        .map(|i| {
            let base: f64 = rng.random();
            let mut scores = ScoreTuple::new(1.0 + 4.0 * base, 0.0, 0.0, 0.0, 0.0);
            for dim in SUB_DIMENSIONS {
                let own: f64 = rng.random();
                scores.set(dim, to_scale(rho * base + other * own));
            }
            RatingRecord {
                sample_id: format!("planted_{i:06}"),
                audio_ref: None,
                scores,
                vote_count: 5,
                split: SplitTag::Other,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = "filename_deg,mos,noi,col,dis,loud,votes\n\
                         a1,2.4,4.5,3.0,2.0,4.0,5\n\
                         a2,3.1,3.0,3.2,4.4,3.9,5\n";

    #[test]
    fn loads_rows_in_order() {
        let recs = load_ratings(TABLE.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].sample_id, "a1");
        assert_eq!(recs[0].scores, ScoreTuple::new(2.4, 4.5, 3.0, 2.0, 4.0));
        assert_eq!(recs[0].vote_count, 5);
        assert_eq!(recs[0].audio_ref, None);
        assert_eq!(recs[1].sample_id, "a2");
    }

    #[test]
    fn tab_delimited_with_custom_columns() {
        let table = "id\tMOS\tNOI\tCOL\tDIS\tLOUD\tsplit\nx\t1\t2\t3\t4\t5\ttest\n";
        let map = ColumnMap {
            id: "id".into(),
            mos: "MOS".into(),
            noi: "NOI".into(),
            col: "COL".into(),
            dis: "DIS".into(),
            loud: "LOUD".into(),
            ..ColumnMap::default()
        };
        let recs = load_ratings(table.as_bytes(), &map).unwrap();
        assert_eq!(recs[0].scores, ScoreTuple::new(1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(recs[0].split, SplitTag::Test);
    }

    #[test]
    fn out_of_range_is_a_row_error() {
        let table = "filename_deg,mos,noi,col,dis,loud\nbad,5.7,3,3,3,3\n";
        let err = load_ratings(table.as_bytes(), &ColumnMap::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mos out of [1,5]"), "{msg}");
        assert!(msg.contains("bad") && msg.contains("5.7"), "{msg}");
    }

    #[test]
    fn missing_column_names_the_column() {
        let table = "filename_deg,mos,noi,col,dis\na,1,1,1,1\n";
        match load_ratings(table.as_bytes(), &ColumnMap::default()) {
            Err(CorpusError::MissingColumn { column }) => assert_eq!(column, "loud"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let table = "filename_deg,mos,noi,col,dis,loud\na,1,1,1,1,1\na,2,2,2,2,2\n";
        assert!(matches!(
            load_ratings(table.as_bytes(), &ColumnMap::default()),
            Err(CorpusError::DuplicateId { .. })
        ));
    }

    #[test]
    fn non_numeric_score_rejected() {
        let table = "filename_deg,mos,noi,col,dis,loud\na,good,1,1,1,1\n";
        assert!(matches!(
            load_ratings(table.as_bytes(), &ColumnMap::default()),
            Err(CorpusError::BadValue { .. })
        ));
    }

    #[test]
    fn planted_records_stay_in_range() {
        let mut rng = crate::seed::rng(1, "t", 0);
        for rho in [-0.9, 0.0, 0.5, 1.0] {
            for r in planted_correlation_records(500, rho, &mut rng) {
                assert!(r.scores.is_valid(), "{rho}: {:?}", r.scores);
            }
        }
    }
}
