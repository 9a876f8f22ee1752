//! Median-split feature subspaces and diversity-maximizing selection.
//!
//! Each chosen feature is split at its median: bit `k` of a subspace index
//! is set iff the instance's value on the `k`-th split feature is strictly
//! greater than that feature's median (feature 0 is the least significant
//! bit). `k` split features give `2^k` subspaces.
//!
//! A selection of `m` instances is scored by the l2,1 norm of its 0/1
//! indicator vector grouped by subspace, which reduces to `Σ √c_i` over the
//! per-subspace counts. The objective is separable and concave in the
//! counts, so greedy water-filling (always grow the smallest feasible
//! count) reaches the exact maximum.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{open_file, Error, Result};

/// Pools larger than this are median-split on a uniform sample.
pub const MEDIAN_SAMPLE_LIMIT: usize = 1_000_000;

pub const PARTITION_FORMAT: &str = "ergan-partition/1";

/// Lower-middle median of each column of `rows`, restricted to `features`.
pub fn compute_medians<R: AsRef<[f64]>>(rows: &[R], features: &[usize]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptySample);
    }
    features
        .iter()
        .map(|&k| {
            let mut col = rows
                .iter()
                .map(|r| {
                    r.as_ref().get(k).copied().ok_or(Error::DimensionMismatch {
                        expected: k + 1,
                        found: r.as_ref().len(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let mid = (col.len() - 1) / 2;
            let (_, median, _) = col.select_nth_unstable_by(mid, f64::total_cmp);
            Ok(*median)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspacePartition {
    /// Total feature count of the instances this partition applies to.
    pub dims: usize,
    pub split_features: Vec<usize>,
    pub medians: Vec<f64>,
}

impl SubspacePartition {
    /// Fits medians on `rows`. `split_features = None` splits on every feature.
    pub fn fit<R: AsRef<[f64]>, G: Rng>(
        rows: &[R],
        split_features: Option<Vec<usize>>,
        rng: &mut G,
    ) -> Result<Self> {
        let dims = rows.first().ok_or(Error::EmptySample)?.as_ref().len();
        let split_features = split_features.unwrap_or_else(|| (0..dims).collect());
        if split_features.len() >= usize::BITS as usize - 1 {
            return Err(Error::InvalidConfig(format!(
                "{} split features is too many",
                split_features.len()
            )));
        }
        if let Some(&k) = split_features.iter().find(|&&k| k >= dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: k + 1,
            });
        }
        let medians = if rows.len() > MEDIAN_SAMPLE_LIMIT {
            let sample: Vec<&[f64]> = index::sample(rng, rows.len(), MEDIAN_SAMPLE_LIMIT)
                .into_iter()
                .map(|i| rows[i].as_ref())
                .collect();
            compute_medians(&sample, &split_features)?
        } else {
            compute_medians(rows, &split_features)?
        };
        Ok(Self {
            dims,
            split_features,
            medians,
        })
    }

    /// `b = 2^k` for `k` split features.
    pub fn subspace_count(&self) -> usize {
        1 << self.split_features.len()
    }

    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                found: x.len(),
            });
        }
        Ok(self
            .split_features
            .iter()
            .zip(&self.medians)
            .enumerate()
            .filter(|(_, (&k, &median))| x[k] > median)
            .fold(0, |acc, (bit, _)| acc | (1 << bit)))
    }

    /// Groups `ids` by subspace; `features(id)` looks up an instance.
    pub fn populations<'a, F>(&self, ids: impl IntoIterator<Item = usize>, features: F) -> Result<Vec<Vec<usize>>>
    where
        F: Fn(usize) -> &'a [f64],
    {
        let mut groups = vec![Vec::new(); self.subspace_count()];
        for id in ids {
            groups[self.assign(features(id))?].push(id);
        }
        Ok(groups)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let doc = PartitionDoc {
            format: PARTITION_FORMAT.to_string(),
            partition: self.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: PartitionDoc = serde_json::from_reader(std::io::BufReader::new(open_file(path)?))?;
        if doc.format != PARTITION_FORMAT {
            return Err(Error::format(path.display().to_string(), format!("unsupported format {:?}", doc.format)));
        }
        let p = doc.partition;
        if p.medians.len() != p.split_features.len() {
            return Err(Error::format(path.display().to_string(), "medians and split features differ in length"));
        }
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionDoc {
    format: String,
    #[serde(flatten)]
    partition: SubspacePartition,
}

/// `Σ √c_i`: the l2,1 norm of a 0/1 selection vector with `c_i` ones in group `i`.
pub fn l21_norm(counts: &[usize]) -> f64 {
    counts.iter().map(|&c| (c as f64).sqrt()).sum()
}

/// General l2,1 norm: sum over groups of each group's l2 norm.
pub fn group_l21_norm<G: AsRef<[f64]>>(groups: &[G]) -> f64 {
    groups
        .iter()
        .map(|g| g.as_ref().iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversitySelection {
    pub counts: Vec<usize>,
    pub selected_ids: Vec<usize>,
    pub m: usize,
}

impl DiversitySelection {
    pub fn norm(&self) -> f64 {
        l21_norm(&self.counts)
    }
}

/// Per-subspace counts maximizing `Σ √c_i` with `Σ c_i = m`, `c_i ≤ sizes[i]`.
/// Ties go to the lower subspace index.
pub fn allocate_counts(sizes: &[usize], m: usize) -> Result<Vec<usize>> {
    let population: usize = sizes.iter().sum();
    if m > population {
        return Err(Error::BudgetExceedsPool {
            budget: m,
            population,
        });
    }
    let mut counts = vec![0; sizes.len()];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = sizes
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(i, _)| Reverse((0, i)))
        .collect();
    for _ in 0..m {
        let Reverse((c, i)) = heap.pop().expect("m <= population");
        counts[i] = c + 1;
        if counts[i] < sizes[i] {
            heap.push(Reverse((c + 1, i)));
        }
    }
    Ok(counts)
}

/// Chooses `m` ids across subspaces by water-filling, uniformly at random
/// within each subspace.
pub fn diverse_sample<R: Rng>(populations: &[Vec<usize>], m: usize, rng: &mut R) -> Result<DiversitySelection> {
    let sizes: Vec<usize> = populations.iter().map(Vec::len).collect();
    let counts = allocate_counts(&sizes, m)?;
    let mut selected_ids = Vec::with_capacity(m);
    for (members, &c) in populations.iter().zip(&counts) {
        if c == 0 {
            continue;
        }
        selected_ids.extend(index::sample(rng, members.len(), c).into_iter().map(|k| members[k]));
    }
    Ok(DiversitySelection {
        counts,
        selected_ids,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn median_examples() {
        assert_eq!(compute_medians(&[[0.1], [0.5], [0.3]], &[0]).unwrap(), vec![0.3]);
        assert_eq!(compute_medians(&[[0.4], [0.2]], &[0]).unwrap(), vec![0.2]);
        assert_eq!(compute_medians(&[[0.7], [0.7], [0.7]], &[0]).unwrap(), vec![0.7]);
        let empty: [[f64; 1]; 0] = [];
        assert!(matches!(compute_medians(&empty, &[0]), Err(Error::EmptySample)));
    }

    fn partition(medians: Vec<f64>) -> SubspacePartition {
        SubspacePartition {
            dims: medians.len(),
            split_features: (0..medians.len()).collect(),
            medians,
        }
    }

    #[test]
    fn assign_examples() {
        let p = partition(vec![0.5, 0.5]);
        assert_eq!(p.assign(&[0.7, 0.2]).unwrap(), 1);
        assert_eq!(p.assign(&[0.5, 0.5]).unwrap(), 0);
        assert_eq!(p.assign(&[0.2, 0.9]).unwrap(), 2);
        assert!(matches!(p.assign(&[0.1]), Err(Error::DimensionMismatch { .. })));
        let p = partition(vec![0.5; 4]);
        assert_eq!(p.subspace_count(), 16);
        assert_eq!(p.assign(&[0.9; 4]).unwrap(), 15);
    }

    #[test]
    fn feature_subset_split() {
        let rows = vec![vec![0.1, 0.9, 0.5], vec![0.3, 0.1, 0.5], vec![0.2, 0.5, 0.5]];
        let p = SubspacePartition::fit(&rows, Some(vec![2, 0]), &mut rng()).unwrap();
        assert_eq!(p.subspace_count(), 4);
        assert_eq!(p.medians, vec![0.5, 0.2]);
        // feature 2 never exceeds its median; feature 0 does for row 1
        assert_eq!(p.assign(&rows[1]).unwrap(), 2);
        assert!(SubspacePartition::fit(&rows, Some(vec![3]), &mut rng()).is_err());
    }

    #[test]
    fn l21_examples() {
        assert_eq!(l21_norm(&[0, 0, 0]), 0.0);
        assert_eq!(l21_norm(&[4, 0]), 2.0);
        assert_relative_eq!(l21_norm(&[2, 2]), 2.0 * 2f64.sqrt());
        let groups = [vec![1.0, 1.0, 0.0], vec![0.0, 1.0]];
        assert_relative_eq!(group_l21_norm(&groups), l21_norm(&[2, 1]));
    }

    #[test]
    fn diverse_sample_examples() {
        let pops = vec![vec![0, 1, 2, 3, 4], vec![5], vec![6, 7]];
        let sel = diverse_sample(&pops, 4, &mut rng()).unwrap();
        assert_eq!(sel.counts, vec![2, 1, 1]);
        assert_relative_eq!(sel.norm(), 2f64.sqrt() + 2.0);
        assert_eq!(sel.selected_ids.len(), 4);

        let sel = diverse_sample(&pops, 8, &mut rng()).unwrap();
        let mut ids = sel.selected_ids.clone();
        ids.sort();
        assert_eq!(ids, (0..8).collect::<Vec<_>>());

        let single = vec![vec![], vec![3, 4, 5, 6], vec![]];
        let sel = diverse_sample(&single, 3, &mut rng()).unwrap();
        assert_eq!(sel.counts, vec![0, 3, 0]);

        assert!(matches!(
            diverse_sample(&pops, 9, &mut rng()),
            Err(Error::BudgetExceedsPool { .. })
        ));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.json");
        let part = SubspacePartition {
            dims: 3,
            split_features: vec![0, 2],
            medians: vec![0.1 + 0.2, 1.0 / 3.0],
        };
        part.save(&p).unwrap();
        assert_eq!(SubspacePartition::load(&p).unwrap(), part);
        std::fs::write(&p, r#"{"format":"x","dims":1,"split_features":[],"medians":[]}"#).unwrap();
        assert!(SubspacePartition::load(&p).is_err());
    }

    /// Order-independent objective value, so equal optima compare exactly.
    fn canonical_value(counts: &[usize]) -> f64 {
        let mut c = counts.to_vec();
        c.sort_unstable();
        l21_norm(&c)
    }

    fn brute_force_best(sizes: &[usize], m: usize) -> f64 {
        fn go(sizes: &[usize], left: usize, chosen: &mut Vec<usize>, best: &mut f64) {
            match sizes.split_first() {
                None => {
                    if left == 0 {
                        *best = best.max(canonical_value(chosen));
                    }
                }
                Some((&n, rest)) => {
                    for c in 0..=n.min(left) {
                        chosen.push(c);
                        go(rest, left - c, chosen, best);
                        chosen.pop();
                    }
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        go(sizes, m, &mut Vec::new(), &mut best);
        best
    }

    proptest! {
        #[test]
        fn greedy_matches_brute_force(sizes in prop::collection::vec(0usize..=4, 1..=4), m in 0usize..=6) {
            let total: usize = sizes.iter().sum();
            prop_assume!(m <= total);
            let counts = allocate_counts(&sizes, m).unwrap();
            prop_assert_eq!(counts.iter().sum::<usize>(), m);
            prop_assert!(counts.iter().zip(&sizes).all(|(c, n)| c <= n));
            prop_assert_eq!(canonical_value(&counts), brute_force_best(&sizes, m));
        }

        #[test]
        fn assignment_partitions(rows in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 3), 1..40)) {
            let p = SubspacePartition::fit(&rows, None, &mut rng()).unwrap();
            let groups = p.populations(0..rows.len(), |i| rows[i].as_slice()).unwrap();
            prop_assert_eq!(groups.len(), 8);
            let all: Vec<usize> = groups.iter().flatten().copied().collect();
            let uniq: HashSet<usize> = all.iter().copied().collect();
            prop_assert_eq!(all.len(), rows.len());
            prop_assert_eq!(uniq.len(), rows.len());
        }

        #[test]
        fn diverse_sample_deterministic(sizes in prop::collection::vec(0usize..6, 1..6), m in 0usize..10, seed: u64) {
            let mut next = 0;
            let pops: Vec<Vec<usize>> = sizes.iter().map(|&n| { let v = (next..next + n).collect(); next += n; v }).collect();
            prop_assume!(m <= next);
            let a = diverse_sample(&pops, m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = diverse_sample(&pops, m, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(&a, &b);
            let uniq: HashSet<usize> = a.selected_ids.iter().copied().collect();
            prop_assert_eq!(uniq.len(), m);
        }
    }
}
