use std::collections::BTreeMap;

use serde::Serialize;

use super::{Background, DatasetManifest, Foreground, Motion};

/// Prompt counts over the ten taxonomy values. Every category is present,
/// including those with a zero count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaxonomyHistogram {
    pub foreground: BTreeMap<Foreground, usize>,
    pub background: BTreeMap<Background, usize>,
    pub motion: BTreeMap<Motion, usize>,
}

impl TaxonomyHistogram {
    pub fn axis_sums(&self) -> [usize; 3] {
        [self.foreground.values().sum(), self.background.values().sum(), self.motion.values().sum()]
    }
}

pub fn taxonomy_histogram(manifest: &DatasetManifest) -> TaxonomyHistogram {
    let mut foreground: BTreeMap<_, _> = Foreground::ALL.iter().map(|&c| (c, 0)).collect();
    let mut background: BTreeMap<_, _> = Background::ALL.iter().map(|&c| (c, 0)).collect();
    let mut motion: BTreeMap<_, _> = Motion::ALL.iter().map(|&c| (c, 0)).collect();
    for p in &manifest.prompts {
        *foreground.get_mut(&p.foreground).unwrap() += 1;
        *background.get_mut(&p.background).unwrap() += 1;
        *motion.get_mut(&p.motion).unwrap() += 1;
    }
    TaxonomyHistogram { foreground, background, motion }
}
