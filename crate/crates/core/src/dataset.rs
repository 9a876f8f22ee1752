//! Record files, gold-standard match sets and synthetic workloads.
//!
//! Records arrive as delimited text with a header row. Gold standards are
//! two-column files of matching id pairs; every pair not listed is a
//! non-match. Cluster-style gold files must be expanded to pairs first.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{open_file, Error, Result};
use crate::features::{Instance, Label};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordSet {
    pub id_column: String,
    pub schema: Vec<String>,
    pub records: Vec<Record>,
    pub source_tag: String,
}

impl RecordSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }
}

/// Options for reading delimited record files.
#[derive(Debug, Clone)]
pub struct RecordFormat {
    pub delimiter: u8,
    pub id_column: String,
    /// Attribute columns to keep, in order. `None` keeps every non-id column.
    pub schema: Option<Vec<String>>,
}

impl Default for RecordFormat {
    fn default() -> Self {
        Self {
            delimiter: b',',
            id_column: "id".to_string(),
            schema: None,
        }
    }
}

pub fn load_records(path: &Path, format: &RecordFormat) -> Result<RecordSet> {
    let file = open_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .flexible(true)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = column(&format.id_column)?;
    let schema: Vec<String> = match &format.schema {
        Some(s) => s.clone(),
        None => header
            .iter()
            .filter(|h| **h != format.id_column)
            .cloned()
            .collect(),
    };
    let attr_cols = schema
        .iter()
        .map(|name| column(name))
        .collect::<Result<Vec<_>>>()?;

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let cell = |i: usize| row.get(i).unwrap_or("").to_string();
        let id = cell(id_col);
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let attributes = attr_cols.iter().map(|&c| cell(c)).collect();
        records.push(Record { id, attributes });
    }

    let source_tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(RecordSet {
        id_column: format.id_column.clone(),
        schema,
        records,
        source_tag,
    })
}

/// Writes records back out with the id column first, then the schema.
pub fn write_records(set: &RecordSet, path: &Path, delimiter: u8) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_path(path)?;
    writer.write_record(std::iter::once(&set.id_column).chain(set.schema.iter()))?;
    for r in &set.records {
        if r.attributes.len() != set.schema.len() {
            return Err(Error::SchemaMismatch {
                expected: set.schema.len(),
                found: r.attributes.len(),
            });
        }
        writer.write_record(std::iter::once(&r.id).chain(r.attributes.iter()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Symmetric set of matching id pairs. Pairs are stored as (smaller, larger).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldStandard {
    matches: BTreeSet<(String, String)>,
}

impl GoldStandard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: &str, b: &str) -> Result<bool> {
        if a == b {
            return Err(Error::SelfPair(a.to_string()));
        }
        Ok(self.matches.insert(ordered(a, b)))
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        // avoids allocating for the common miss
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        self.matches
            .range::<(String, String), _>((x.to_string(), y.to_string())..)
            .next()
            .is_some_and(|(p, q)| p == x && q == y)
    }

    pub fn label(&self, a: &str, b: &str) -> Label {
        if self.contains(a, b) {
            Label::Match
        } else {
            Label::NonMatch
        }
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.matches.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

pub fn load_gold(path: &Path, has_header: bool, delimiter: u8) -> Result<GoldStandard> {
    let file = open_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .flexible(true)
        .from_reader(file);
    let mut gold = GoldStandard::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        if row.len() == 1 && row[0].trim().is_empty() {
            continue;
        }
        if row.len() != 2 {
            return Err(Error::format(
                path.display().to_string(),
                format!("row {} has {} columns, expected 2", line + 1, row.len()),
            ));
        }
        gold.insert(row[0].trim(), row[1].trim())?;
    }
    Ok(gold)
}

/// Controls a synthetic instance workload.
///
/// Every feature is drawn from a shared `U[0,1)` with probability
/// `1 - separation` and from a class-specific law otherwise: matches from
/// `U[0.5,1)`, non-matches from a zero-inflated law (exactly 0 with
/// probability [`NON_MATCH_ZERO_MASS`], else `U[0,0.5)`). Zero inflation
/// mirrors q-gram similarities of unrelated record pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_matches: usize,
    /// Non-matches per match.
    pub imbalance_rate: usize,
    pub n_features: usize,
    pub separation: f64,
    pub seed: u64,
}

pub const NON_MATCH_ZERO_MASS: f64 = 0.9;

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_matches == 0 || self.n_features == 0 {
            return Err(Error::InvalidConfig(
                "synthetic counts must be positive".into(),
            ));
        }
        if self.imbalance_rate < 1 {
            return Err(Error::InvalidConfig("imbalance_rate must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.separation) {
            return Err(Error::InvalidConfig(format!(
                "separation {} outside [0, 1]",
                self.separation
            )));
        }
        Ok(())
    }

    pub fn n_non_matches(&self) -> usize {
        self.n_matches * self.imbalance_rate
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub schema: Vec<String>,
    pub instances: Vec<Instance>,
    pub gold: GoldStandard,
}

/// Generates labeled instances directly, skipping the record stage.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.n_matches + cfg.n_non_matches();
    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Match, cfg.n_matches)
        .chain(std::iter::repeat_n(Label::NonMatch, cfg.n_non_matches()))
        .collect();
    labels.shuffle(&mut rng);

    let mut gold = GoldStandard::new();
    let mut instances = Vec::with_capacity(total);
    for (k, label) in labels.into_iter().enumerate() {
        let left = format!("s{:07}a", k);
        let right = format!("s{:07}b", k);
        let features = (0..cfg.n_features)
            .map(|_| draw_feature(&mut rng, label, cfg.separation))
            .collect();
        if label == Label::Match {
            gold.insert(&left, &right)?;
        }
        instances.push(Instance {
            pair: (left, right),
            features,
            real_label: Some(label),
        });
    }
    Ok(SyntheticData {
        schema: (0..cfg.n_features).map(|k| format!("f{k}")).collect(),
        instances,
        gold,
    })
}

fn draw_feature<R: Rng>(rng: &mut R, label: Label, separation: f64) -> f64 {
    let shared = rng.gen::<f64>() >= separation;
    let u = rng.gen::<f64>();
    if shared {
        return u;
    }
    match label {
        Label::Match => 0.5 + 0.5 * u,
        Label::NonMatch => {
            if u < NON_MATCH_ZERO_MASS {
                0.0
            } else {
                0.5 * (u - NON_MATCH_ZERO_MASS) / (1.0 - NON_MATCH_ZERO_MASS)
            }
        }
    }
}

/// Writes a gold standard as a two-column file with a header.
pub fn write_gold(gold: &GoldStandard, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "id1,id2")?;
    for (a, b) in gold.iter() {
        writeln!(out, "{a},{b}")?;
    }
    out.flush()?;
    Ok(())
}
