//! Record-pair featurization: similarity functions, candidate pair streams
//! and the instance types consumed by training.

mod io;
mod pairs;
mod similarity;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{read_instances, InstanceFile, InstanceWriter, INSTANCE_FORMAT};
pub use pairs::{block_by_token, generate_pairs, BlockingSpec, PairStream};
pub use similarity::{qgram_jaccard, AttributeSimilarity, QGramJaccard};

use crate::dataset::{GoldStandard, Record, RecordSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "M")]
    Match,
    #[serde(rename = "N")]
    NonMatch,
}

impl Label {
    /// Value of the label channel fed to the discriminator.
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Match => 1.0,
            Label::NonMatch => 0.0,
        }
    }

    pub fn is_match(self) -> bool {
        self == Label::Match
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Match => "M",
            Label::NonMatch => "N",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" | "1" => Ok(Label::Match),
            "N" | "n" | "0" => Ok(Label::NonMatch),
            other => Err(Error::format("label", format!("unknown label {other:?}"))),
        }
    }
}

/// Feature vector of one record pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub pair: (String, String),
    pub features: Vec<f64>,
    pub real_label: Option<Label>,
}

impl Instance {
    pub fn validate(&self, dims: usize) -> Result<()> {
        if self.features.len() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: self.features.len(),
            });
        }
        if let Some(v) = self.features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::format(
                format!("instance {}/{}", self.pair.0, self.pair.1),
                format!("feature {v} outside [0, 1]"),
            ));
        }
        if self.pair.0 == self.pair.1 {
            return Err(Error::SelfPair(self.pair.0.clone()));
        }
        Ok(())
    }
}

/// All instances plus the labeled / unlabeled split over their indices.
///
/// Instance ids are positions in `instances`.
#[derive(Debug, Clone)]
pub struct InstancePool {
    instances: Vec<Instance>,
    labeled: BTreeSet<usize>,
    unlabeled: BTreeSet<usize>,
}

impl InstancePool {
    /// Every instance not listed in `labeled` becomes unlabeled.
    pub fn new(instances: Vec<Instance>, labeled: impl IntoIterator<Item = usize>) -> Result<Self> {
        let n = instances.len();
        let labeled: BTreeSet<usize> = labeled.into_iter().collect();
        if let Some(&bad) = labeled.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidConfig(format!(
                "labeled id {bad} out of range for pool of {n}"
            )));
        }
        let unlabeled = (0..n).filter(|i| !labeled.contains(i)).collect();
        Ok(Self {
            instances,
            labeled,
            unlabeled,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.instances.first().map_or(0, |x| x.features.len())
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, id: usize) -> &Instance {
        &self.instances[id]
    }

    pub fn features(&self, id: usize) -> &[f64] {
        &self.instances[id].features
    }

    pub fn labeled(&self) -> &BTreeSet<usize> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<usize> {
        &self.unlabeled
    }
}

/// Computes the feature vector of a record pair, one similarity per attribute.
pub fn featurize_pair<S: AttributeSimilarity + ?Sized>(
    left: &Record,
    right: &Record,
    sim: &S,
) -> Result<Instance> {
    if left.attributes.len() != right.attributes.len() {
        return Err(Error::SchemaMismatch {
            expected: left.attributes.len(),
            found: right.attributes.len(),
        });
    }
    let features = left
        .attributes
        .iter()
        .zip(&right.attributes)
        .map(|(a, b)| sim.similarity(a, b))
        .collect();
    Ok(Instance {
        pair: (left.id.clone(), right.id.clone()),
        features,
        real_label: None,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FeaturizeStats {
    /// Pairs in the unblocked comparison space.
    pub full_pairs: u64,
    /// Pairs actually featurized.
    pub candidate_pairs: u64,
    pub matches: u64,
}

const CHUNK: usize = 1 << 14;

/// Streams every candidate pair through `sim` into `sink`, in pair order.
///
/// Chunks are featurized in parallel on the current rayon pool; output order
/// does not depend on the worker count.
pub fn featurize_into<S, F>(
    left: &RecordSet,
    right: Option<&RecordSet>,
    gold: Option<&GoldStandard>,
    blocking: Option<&BlockingSpec>,
    sim: &S,
    mut sink: F,
) -> Result<FeaturizeStats>
where
    S: AttributeSimilarity + Sync + ?Sized,
    F: FnMut(Instance) -> Result<()>,
{
    let other = right.unwrap_or(left);
    if left.schema.len() != other.schema.len() {
        return Err(Error::SchemaMismatch {
            expected: left.schema.len(),
            found: other.schema.len(),
        });
    }
    let n = left.len() as u64;
    let full_pairs = match right {
        Some(r) => n * r.len() as u64,
        None => n * n.saturating_sub(1) / 2,
    };
    let mut stats = FeaturizeStats {
        full_pairs,
        ..Default::default()
    };
    let mut stream = generate_pairs(left, right, blocking)?;
    let mut chunk = Vec::with_capacity(CHUNK);
    loop {
        chunk.clear();
        chunk.extend(stream.by_ref().take(CHUNK));
        if chunk.is_empty() {
            break;
        }
        let out: Vec<Instance> = chunk
            .par_iter()
            .map(|&(i, j)| {
                let mut x = featurize_pair(&left.records[i], &other.records[j], sim)?;
                if let Some(g) = gold {
                    x.real_label = Some(g.label(&x.pair.0, &x.pair.1));
                }
                Ok(x)
            })
            .collect::<Result<_>>()?;
        for x in out {
            stats.candidate_pairs += 1;
            if x.real_label == Some(Label::Match) {
                stats.matches += 1;
            }
            sink(x)?;
        }
    }
    Ok(stats)
}

/// In-memory convenience wrapper over [`featurize_into`].
pub fn featurize_all<S: AttributeSimilarity + Sync + ?Sized>(
    left: &RecordSet,
    right: Option<&RecordSet>,
    gold: Option<&GoldStandard>,
    blocking: Option<&BlockingSpec>,
    sim: &S,
) -> Result<(Vec<Instance>, FeaturizeStats)> {
    let mut all = Vec::new();
    let stats = featurize_into(left, right, gold, blocking, sim, |x| {
        all.push(x);
        Ok(())
    })?;
    Ok((all, stats))
}
