use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Condition, SubjectiveError};
use crate::Dimension;

pub const MIN_SCORE: u8 = 1;
pub const MAX_SCORE: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rating {
    pub observer_id: String,
    pub video_id: String,
    pub dimension: Dimension,
    pub score: u8,
}

/// Validated set of ratings, stored in canonical order with at most one
/// entry per `(observer, video, dimension)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingMatrix {
    entries: Vec<Rating>,
}

impl RatingMatrix {
    pub fn new(mut entries: Vec<Rating>) -> Result<Self, SubjectiveError> {
        for r in &entries {
            if !(MIN_SCORE..=MAX_SCORE).contains(&r.score) {
                return Err(SubjectiveError::ScoreRange {
                    observer_id: r.observer_id.clone(),
                    video_id: r.video_id.clone(),
                    dimension: r.dimension,
                    score: i64::from(r.score),
                });
            }
        }
        entries.sort();
        for pair in entries.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.observer_id == b.observer_id && a.video_id == b.video_id && a.dimension == b.dimension {
                return Err(SubjectiveError::Duplicate {
                    observer_id: a.observer_id.clone(),
                    video_id: a.video_id.clone(),
                    dimension: a.dimension,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn conditions(&self) -> BTreeSet<Condition> {
        self.entries.iter().map(|r| Condition { video_id: r.video_id.clone(), dimension: r.dimension }).collect()
    }

    pub fn observers(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|r| r.observer_id.as_str()).collect()
    }

    pub(crate) fn from_sorted_unchecked(entries: Vec<Rating>) -> Self {
        Self { entries }
    }
}

const HEADER: [&str; 4] = ["observer_id", "video_id", "dimension", "score"];

/// Parses the ratings CSV (`observer_id,video_id,dimension,score`).
pub fn parse_ratings_csv(bytes: &[u8]) -> Result<RatingMatrix, SubjectiveError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader.headers().map_err(|e| SubjectiveError::Csv { line: 1, message: e.to_string() })?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(SubjectiveError::Empty);
    }
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(SubjectiveError::Csv { line: 1, message: format!("expected header {}", HEADER.join(",")) });
    }
    let mut entries = Vec::new();
    for rec in reader.records() {
        let rec = rec
            .map_err(|e| SubjectiveError::Csv { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| SubjectiveError::Csv { line, message };
        if rec.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", rec.len())));
        }
        let dimension: Dimension =
            rec[2].parse().map_err(|e: crate::dimension::UnknownDimension| err(e.to_string()))?;
        let score: i64 = rec[3].parse().map_err(|_| err(format!("score {:?} is not an integer", &rec[3])))?;
        if !(i64::from(MIN_SCORE)..=i64::from(MAX_SCORE)).contains(&score) {
            return Err(SubjectiveError::ScoreRange {
                observer_id: rec[0].to_string(),
                video_id: rec[1].to_string(),
                dimension,
                score,
            });
        }
        entries.push(Rating {
            observer_id: rec[0].to_string(),
            video_id: rec[1].to_string(),
            dimension,
            score: score as u8,
        });
    }
    if entries.is_empty() {
        return Err(SubjectiveError::Empty);
    }
    RatingMatrix::new(entries)
}

pub fn read_ratings_csv(path: impl AsRef<Path>) -> Result<RatingMatrix, SubjectiveError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| SubjectiveError::Io { path: path.to_path_buf(), source })?;
    parse_ratings_csv(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_valid_csv() {
        let csv = "observer_id,video_id,dimension,score\no1,v1,spatial,3\no1,v1,temporal,5\n";
        let m = parse_ratings_csv(csv.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries()[1].dimension, Dimension::Temporal);
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse_ratings_csv(b""), Err(SubjectiveError::Empty)));
        assert!(matches!(parse_ratings_csv(b"observer_id,video_id,dimension,score\n"), Err(SubjectiveError::Empty)));
    }

    #[test]
    fn rejects_bad_rows() {
        let h = "observer_id,video_id,dimension,score\n";
        assert!(matches!(
            parse_ratings_csv(format!("{h}o,v,spatial,6\n").as_bytes()),
            Err(SubjectiveError::ScoreRange { score: 6, .. })
        ));
        assert!(matches!(
            parse_ratings_csv(format!("{h}o,v,spatial,2.5\n").as_bytes()),
            Err(SubjectiveError::Csv { line: 2, .. })
        ));
        assert!(matches!(parse_ratings_csv(format!("{h}o,v,color,2\n").as_bytes()), Err(SubjectiveError::Csv { .. })));
        assert!(matches!(
            parse_ratings_csv(format!("{h}o,v,spatial,2\no,v,spatial,3\n").as_bytes()),
            Err(SubjectiveError::Duplicate { .. })
        ));
        assert!(parse_ratings_csv(b"a,b,c,d\n").is_err());
    }
}
