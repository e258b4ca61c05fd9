//! Review-file loaders and number formatting for tabular output.
//!
//! Two comma-separated layouts are read, both with `#` comment lines:
//!
//! - **wide**: `id,score,score,...`, one line per candidate, no header; rows
//!   may have different lengths.
//! - **long**: `candidate_id,reviewer_id,score`, one line per review, with an
//!   optional header line. Candidates appear in order of first mention.

use csv::{ReaderBuilder, StringRecord, Trim};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::review::{ReviewMatrix, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewFormat {
    Wide,
    Long,
}

/// Normalized reviews with the candidate identifiers in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewData {
    pub ids: Vec<String>,
    pub matrix: ReviewMatrix,
}

pub fn load_reviews(path: &Path, format: ReviewFormat, scale: &Scale) -> Result<ReviewData> {
    let file = std::fs::File::open(path)?;
    read_reviews(file, format, scale)
}

pub fn read_reviews<R: Read>(input: R, format: ReviewFormat, scale: &Scale) -> Result<ReviewData> {
    scale.validate()?;
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(Trim::All)
        .from_reader(input);
    let mut ids: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut first = true;

    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        match format {
            ReviewFormat::Wide => {
                let (id, scores) = parse_wide(&record, line, scale)?;
                if index.insert(id.clone(), ids.len()).is_some() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("candidate {id:?} appears on more than one line"),
                    });
                }
                ids.push(id);
                rows.push(scores);
            }
            ReviewFormat::Long => {
                if record.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected 3 fields (candidate, reviewer, score), got {}", record.len()),
                    });
                }
                if first && record[2].parse::<f64>().is_err() {
                    first = false;
                    continue;
                }
                let score = parse_score(&record[2], line, scale)?;
                let id = &record[0];
                if id.is_empty() {
                    return Err(Error::Parse {
                        line,
                        msg: "empty candidate id".into(),
                    });
                }
                let row = *index.entry(id.to_string()).or_insert_with(|| {
                    ids.push(id.to_string());
                    rows.push(Vec::new());
                    rows.len() - 1
                });
                rows[row].push(scale.normalize(score).clamp(0.0, 1.0));
            }
        }
        first = false;
    }
    if rows.is_empty() {
        return Err(Error::NoCandidates);
    }
    Ok(ReviewData {
        ids,
        matrix: ReviewMatrix::new(rows, scale.tick())?,
    })
}

fn parse_score(field: &str, line: u64, scale: &Scale) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("score {field:?} is not a number"),
    })?;
    if !(v >= scale.min && v <= scale.max) {
        return Err(Error::Parse {
            line,
            msg: format!("score {v} is outside [{}, {}]", scale.min, scale.max),
        });
    }
    Ok(v)
}

fn parse_wide(record: &StringRecord, line: u64, scale: &Scale) -> Result<(String, Vec<f64>)> {
    let id = record.get(0).unwrap_or("").to_string();
    if id.is_empty() {
        return Err(Error::Parse {
            line,
            msg: "empty candidate id".into(),
        });
    }
    let scores = record
        .iter()
        .skip(1)
        .filter(|f| !f.is_empty())
        .map(|f| parse_score(f, line, scale).map(|v| scale.normalize(v).clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    if scores.is_empty() {
        return Err(Error::Parse {
            line,
            msg: format!("candidate {id:?} has no scores"),
        });
    }
    Ok((id, scores))
}

/// Formats `x` with `digits` significant digits in the style of C's `%g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
