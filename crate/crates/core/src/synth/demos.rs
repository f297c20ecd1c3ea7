//! In-context demonstrations.
//!
//! A demonstration file is plain text: the first line is the meta header, the
//! rest is the hand-written response. MOS files carry one tuple,
//! `mos=2.4 noi=4.8 col=4.5 dis=1.8 loud=4.2`; A/B files carry two separated by
//! `|`.

use std::path::Path;

use thiserror::Error;

use crate::meta_corpus::{Dimension, ScoreTuple};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{origin}: bad meta header `{header}`: {reason}")]
    Header {
        origin: String,
        header: String,
        reason: String,
    },
    #[error("{origin}: empty response")]
    EmptyResponse { origin: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub meta: ScoreTuple,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbDemonstration {
    pub meta_a: ScoreTuple,
    pub meta_b: ScoreTuple,
    pub response: String,
}

fn parse_tuple(header: &str) -> Result<ScoreTuple, String> {
    let mut t = ScoreTuple::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{field}`"))?;
        let dim: Dimension = key.parse()?;
        let value: f64 = value
            .parse()
            .map_err(|_| format!("`{value}` is not a number"))?;
        t.set(dim, value);
    }
    match t.out_of_range() {
        Some((d, v)) if v.is_nan() => Err(format!("missing {d}")),
        Some((d, v)) => Err(format!("{d} out of [1,5]: {v}")),
        None => Ok(t),
    }
}

fn render_tuple(t: &ScoreTuple) -> String {
    Dimension::ALL
        .iter()
        .map(|&d| format!("{}={}", d.key(), t.get(d)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn split_header<'a>(text: &'a str, origin: &str) -> Result<(&'a str, String), DemoError> {
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let response = body.trim().to_string();
    if response.is_empty() {
        return Err(DemoError::EmptyResponse {
            origin: origin.to_string(),
        });
    }
    Ok((header.trim(), response))
}

impl Demonstration {
    pub fn parse(text: &str, origin: &str) -> Result<Self, DemoError> {
        let (header, response) = split_header(text, origin)?;
        let meta = parse_tuple(header).map_err(|reason| DemoError::Header {
            origin: origin.to_string(),
            header: header.to_string(),
            reason,
        })?;
        Ok(Self { meta, response })
    }

    pub fn render(&self) -> String {
        format!("{}\n{}\n", render_tuple(&self.meta), self.response)
    }

    /// The five MOS demonstrations shipped with the crate, one per MOS band.
    pub fn builtin() -> Vec<Self> {
        BUILTIN_MOS
            .iter()
            .map(|(name, text)| Self::parse(text, name).expect("builtin demonstrations are valid"))
            .collect()
    }
}

impl AbDemonstration {
    pub fn parse(text: &str, origin: &str) -> Result<Self, DemoError> {
        let (header, response) = split_header(text, origin)?;
        let bad = |reason: String| DemoError::Header {
            origin: origin.to_string(),
            header: header.to_string(),
            reason,
        };
        let (a, b) = header
            .split_once('|')
            .ok_or_else(|| bad("expected two tuples separated by `|`".into()))?;
        Ok(Self {
            meta_a: parse_tuple(a).map_err(bad)?,
            meta_b: parse_tuple(b).map_err(bad)?,
            response,
        })
    }

    pub fn render(&self) -> String {
        format!(
            "{} | {}\n{}\n",
            render_tuple(&self.meta_a),
            render_tuple(&self.meta_b),
            self.response
        )
    }

    pub fn builtin() -> Vec<Self> {
        BUILTIN_AB
            .iter()
            .map(|(name, text)| Self::parse(text, name).expect("builtin demonstrations are valid"))
            .collect()
    }
}

const BUILTIN_MOS: [(&str, &str); 5] = [
    ("mos/band1.txt", include_str!("../../demos/mos/band1.txt")),
    ("mos/band2.txt", include_str!("../../demos/mos/band2.txt")),
    ("mos/band3.txt", include_str!("../../demos/mos/band3.txt")),
    ("mos/band4.txt", include_str!("../../demos/mos/band4.txt")),
    ("mos/band5.txt", include_str!("../../demos/mos/band5.txt")),
];

const BUILTIN_AB: [(&str, &str); 5] = [
    ("ab/pair1.txt", include_str!("../../demos/ab/pair1.txt")),
    ("ab/pair2.txt", include_str!("../../demos/ab/pair2.txt")),
    ("ab/pair3.txt", include_str!("../../demos/ab/pair3.txt")),
    ("ab/pair4.txt", include_str!("../../demos/ab/pair4.txt")),
    ("ab/pair5.txt", include_str!("../../demos/ab/pair5.txt")),
];

fn read_dir_sorted(dir: &Path) -> Result<Vec<(String, String)>, DemoError> {
    let io = |source| DemoError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).map_err(|source| DemoError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ok((p.display().to_string(), text))
        })
        .collect()
}

/// Every `*.txt` file in `dir`, in file-name order.
pub fn load_mos_demos(dir: &Path) -> Result<Vec<Demonstration>, DemoError> {
    read_dir_sorted(dir)?
        .iter()
        .map(|(origin, text)| Demonstration::parse(text, origin))
        .collect()
}

pub fn load_ab_demos(dir: &Path) -> Result<Vec<AbDemonstration>, DemoError> {
    read_dir_sorted(dir)?
        .iter()
        .map(|(origin, text)| AbDemonstration::parse(text, origin))
        .collect()
}
