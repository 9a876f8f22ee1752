use std::collections::{BTreeMap, BTreeSet};

use crate::dataset::RecordSet;
use crate::error::Result;

/// Token blocking on one attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingSpec {
    pub attribute: String,
}

impl BlockingSpec {
    pub fn new(attribute: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
        }
    }
}

/// Groups record ids by the case-folded whitespace tokens of `attr`.
/// A record joins one block per distinct token; empty values join none.
pub fn block_by_token(records: &RecordSet, attr: &str) -> Result<BTreeMap<String, Vec<String>>> {
    Ok(token_blocks(records, attr)?
        .into_iter()
        .map(|(token, members)| {
            let ids = members.into_iter().map(|i| records.records[i].id.clone()).collect();
            (token, ids)
        })
        .collect())
}

fn token_blocks(records: &RecordSet, attr: &str) -> Result<BTreeMap<String, Vec<usize>>> {
    let k = records.attribute_index(attr)?;
    let mut blocks: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.records.iter().enumerate() {
        let tokens: BTreeSet<String> = r.attributes[k]
            .split_whitespace()
            .map(str::to_lowercase)
            .collect();
        for t in tokens {
            blocks.entry(t).or_default().push(i);
        }
    }
    Ok(blocks)
}

/// Stream of candidate pairs as (left index, right index).
///
/// Pairs come out sorted by (left id, right id). For deduplication within a
/// single set, the left id is always the smaller one.
pub enum PairStream {
    Dedup {
        order: Vec<usize>,
        a: usize,
        b: usize,
    },
    Linkage {
        left: Vec<usize>,
        right: Vec<usize>,
        a: usize,
        b: usize,
    },
    Listed(std::vec::IntoIter<(usize, usize)>),
}

impl Iterator for PairStream {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            PairStream::Dedup { order, a, b } => {
                if *b >= order.len() {
                    *a += 1;
                    *b = *a + 1;
                    if *b >= order.len() {
                        return None;
                    }
                }
                let pair = (order[*a], order[*b]);
                *b += 1;
                Some(pair)
            }
            PairStream::Linkage { left, right, a, b } => {
                if *b >= right.len() {
                    *a += 1;
                    *b = 0;
                }
                if *a >= left.len() || right.is_empty() {
                    return None;
                }
                let pair = (left[*a], right[*b]);
                *b += 1;
                Some(pair)
            }
            PairStream::Listed(it) => it.next(),
        }
    }
}

fn id_order(set: &RecordSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&x, &y| set.records[x].id.cmp(&set.records[y].id));
    order
}

/// Candidate pairs for deduplication (`right = None`) or linkage.
pub fn generate_pairs(
    left: &RecordSet,
    right: Option<&RecordSet>,
    blocking: Option<&BlockingSpec>,
) -> Result<PairStream> {
    let Some(spec) = blocking else {
        return Ok(match right {
            None => PairStream::Dedup {
                order: id_order(left),
                a: 0,
                b: 1,
            },
            Some(r) => PairStream::Linkage {
                left: id_order(left),
                right: id_order(r),
                a: 0,
                b: 0,
            },
        });
    };

    // Rank by id so that sorting ranks sorts by id.
    let rank = |set: &RecordSet| {
        let mut r = vec![0; set.len()];
        for (pos, i) in id_order(set).into_iter().enumerate() {
            r[i] = pos;
        }
        r
    };
    let left_rank = rank(left);
    let left_blocks = token_blocks(left, &spec.attribute)?;
    let mut pairs: BTreeSet<(usize, usize, usize, usize)> = BTreeSet::new();
    match right {
        None => {
            for members in left_blocks.values() {
                for (x, &i) in members.iter().enumerate() {
                    for &j in &members[x + 1..] {
                        let (i, j) = if left_rank[i] < left_rank[j] { (i, j) } else { (j, i) };
                        pairs.insert((left_rank[i], left_rank[j], i, j));
                    }
                }
            }
        }
        Some(r) => {
            let right_rank = rank(r);
            let right_blocks = token_blocks(r, &spec.attribute)?;
            for (token, lm) in &left_blocks {
                let Some(rm) = right_blocks.get(token) else { continue };
                for &i in lm {
                    for &j in rm {
                        pairs.insert((left_rank[i], right_rank[j], i, j));
                    }
                }
            }
        }
    }
    let listed: Vec<(usize, usize)> = pairs.into_iter().map(|(_, _, i, j)| (i, j)).collect();
    Ok(PairStream::Listed(listed.into_iter()))
}
