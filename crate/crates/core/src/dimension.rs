use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the three perceptual quality axes rated per video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Spatial,
    Temporal,
    Alignment,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Spatial, Dimension::Temporal, Dimension::Alignment];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Spatial => "spatial",
            Dimension::Temporal => "temporal",
            Dimension::Alignment => "alignment",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Dimension::Spatial => 0,
            Dimension::Temporal => 1,
            Dimension::Alignment => 2,
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown dimension {0:?} (expected spatial, temporal or alignment)")]
pub struct UnknownDimension(pub String);

impl FromStr for Dimension {
    type Err = UnknownDimension;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spatial" => Ok(Dimension::Spatial),
            "temporal" => Ok(Dimension::Temporal),
            "alignment" => Ok(Dimension::Alignment),
            other => Err(UnknownDimension(other.to_string())),
        }
    }
}
