//! Splits, classification metrics and the ablation harness.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::GoldStandard;
use crate::error::{Error, Result};
use crate::features::{Instance, InstancePool, Label};
use crate::subspace::SubspacePartition;
use crate::trainer::{predict, run, select_seed_labels, TrainConfig, Variant};

/// Independent RNG stream for one pipeline stage under a run seed.
pub fn stage_rng(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64 + 1);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Split,
    Partition,
    SeedLabels,
}

/// How the labeled training set is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSpec {
    /// Uniform fraction of the instances.
    Fraction(f64),
    /// Exactly this many instances.
    Budget(usize),
}

impl SplitSpec {
    fn train_size(self, n: usize) -> Result<usize> {
        match self {
            SplitSpec::Fraction(f) if f > 0.0 && f < 1.0 => Ok((f * n as f64).round() as usize),
            SplitSpec::Fraction(f) => Err(Error::InvalidConfig(format!("train fraction {f} is not in (0, 1)"))),
            SplitSpec::Budget(b) if b > 0 && b <= n => Ok(b),
            SplitSpec::Budget(b) => Err(Error::BudgetExceedsPool {
                budget: b,
                population: n,
            }),
        }
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitSpec::Fraction(x) => write!(f, "fraction:{x}"),
            SplitSpec::Budget(b) => write!(f, "budget:{b}"),
        }
    }
}

impl FromStr for SplitSpec {
    type Err = Error;

    /// `fraction:0.6`, `budget:50`, or a bare number (`< 1` is a fraction).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad split {s:?}"));
        if let Some(v) = s.strip_prefix("fraction:") {
            return v.parse().map(SplitSpec::Fraction).map_err(|_| bad());
        }
        if let Some(v) = s.strip_prefix("budget:") {
            return v.parse().map(SplitSpec::Budget).map_err(|_| bad());
        }
        if let Ok(b) = s.parse::<usize>() {
            return Ok(SplitSpec::Budget(b));
        }
        s.parse().map(SplitSpec::Fraction).map_err(|_| bad())
    }
}

/// Uniform split of `0..n` into sorted `(train, test)` ids.
pub fn split(n: usize, spec: SplitSpec, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = spec.train_size(n)?;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut stage_rng(seed, Stage::Split));
    let mut test = ids.split_off(k);
    ids.sort_unstable();
    test.sort_unstable();
    Ok((ids, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Fraction of instances labeled correctly.
    pub objective_score: f64,
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f_measure,
            objective_score: ratio(tp + tn, tp + fp + fn_ + tn),
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn metrics(predicted: &[Label], actual: &[Label]) -> Result<MetricsReport> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (p, a) in predicted.iter().zip(actual) {
        match (p.is_match(), a.is_match()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, fn_, tn))
}

/// Outcome of one (variant, split, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub variant: Variant,
    pub split: SplitSpec,
    pub seed: u64,
    pub seed_labels: usize,
    pub seed_matches: usize,
    /// Propagation rounds; 0 in fraction mode.
    pub rounds: usize,
    /// Label counts on the scored set: the propagated remainder for a
    /// budget split, the held-out instances for a fraction split.
    pub predicted_matches: usize,
    pub predicted_non_matches: usize,
    pub metrics: MetricsReport,
}

/// Fits the subspace partition for `seed` and picks the instances that
/// receive real labels: a uniform training split for
/// [`SplitSpec::Fraction`], or a labeling budget spent by diversity sampling
/// (uniformly when `variant` drops diversity) for [`SplitSpec::Budget`].
pub fn choose_seed_labels(
    instances: &[Instance],
    gold: &GoldStandard,
    split_spec: SplitSpec,
    variant: Variant,
    seed: u64,
) -> Result<(SubspacePartition, Vec<(usize, Label)>)> {
    let rows: Vec<&[f64]> = instances.iter().map(|x| x.features.as_slice()).collect();
    let partition = SubspacePartition::fit(&rows, None, &mut stage_rng(seed, Stage::Partition))?;
    let seed_labels = match split_spec {
        SplitSpec::Fraction(_) => {
            let (train, _) = split(instances.len(), split_spec, seed)?;
            train
                .into_iter()
                .map(|i| (i, gold.label(&instances[i].pair.0, &instances[i].pair.1)))
                .collect()
        }
        SplitSpec::Budget(b) => {
            let all: Vec<usize> = (0..instances.len()).collect();
            select_seed_labels(
                instances,
                &all,
                gold,
                b,
                Some(&partition),
                variant.uses_diversity(),
                &mut stage_rng(seed, Stage::SeedLabels),
            )?
        }
    };
    Ok((partition, seed_labels))
}

/// Trains one variant transductively: the split's training ids get their
/// gold labels, every other instance is the unlabeled set, and the
/// resulting pseudo labels are scored against gold.
///
/// In budget mode the labeled ids are chosen by diversity sampling (or
/// uniformly for [`Variant::NoDiversity`]); in fraction mode uniformly.
pub fn evaluate_cell(
    instances: &[Instance],
    gold: &GoldStandard,
    split_spec: SplitSpec,
    base: &TrainConfig,
    variant: Variant,
    seed: u64,
) -> Result<CellResult> {
    let (partition, seed_labels) = choose_seed_labels(instances, gold, split_spec, variant, seed)?;
    let cfg = TrainConfig {
        seed,
        variant,
        ..base.clone()
    };
    let truth = |x: &Instance| gold.label(&x.pair.0, &x.pair.1);
    let labeled = |x: &Instance| Instance {
        real_label: Some(truth(x)),
        ..x.clone()
    };
    let (rounds, predicted, actual): (usize, Vec<Label>, Vec<Label>) = match split_spec {
        // Transductive: the unlabeled remainder is propagated and scored.
        SplitSpec::Budget(_) => {
            let pool = InstancePool::new(instances.iter().map(labeled).collect(), seed_labels.iter().map(|s| s.0))?;
            let outcome = run(&cfg, &pool, &seed_labels, &partition)?;
            let pseudo = outcome.pseudo_labels();
            let actual = pseudo.iter().map(|&(i, _)| truth(pool.get(i))).collect();
            (outcome.report.rounds.len(), pseudo.into_iter().map(|p| p.1).collect(), actual)
        }
        // Inductive: train on the training split alone, then label the
        // held-out instances, which never enter the pool.
        SplitSpec::Fraction(_) => {
            let train: Vec<Instance> = seed_labels.iter().map(|&(i, _)| labeled(&instances[i])).collect();
            let local: Vec<(usize, Label)> = seed_labels.iter().enumerate().map(|(k, &(_, l))| (k, l)).collect();
            let pool = InstancePool::new(train, 0..local.len())?;
            let outcome = run(&cfg, &pool, &local, &partition)?;
            let in_train: BTreeSet<usize> = seed_labels.iter().map(|s| s.0).collect();
            let test: Vec<Instance> = (0..instances.len())
                .filter(|i| !in_train.contains(i))
                .map(|i| instances[i].clone())
                .collect();
            let predicted = predict(&outcome.networks.generator, &test)?.into_iter().map(|p| p.0).collect();
            (0, predicted, test.iter().map(truth).collect())
        }
    };
    let predicted_matches = predicted.iter().filter(|l| l.is_match()).count();
    Ok(CellResult {
        variant,
        split: split_spec,
        seed,
        seed_labels: seed_labels.len(),
        seed_matches: seed_labels.iter().filter(|s| s.1.is_match()).count(),
        rounds,
        predicted_matches,
        predicted_non_matches: predicted.len() - predicted_matches,
        metrics: metrics(&predicted, &actual)?,
    })
}

#[derive(Debug, Clone)]
pub struct AblationSpec {
    pub splits: Vec<SplitSpec>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub base: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population standard deviation; zero for a single value.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub variant: Variant,
    pub split: SplitSpec,
    pub runs: usize,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f_measure: MeanStd,
    /// Runs whose F-measure is exactly zero.
    pub zero_fm_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
}

/// Every (variant, split, seed) cell, run in parallel and reported in
/// the order of `spec`'s lists.
pub fn run_ablation_suite(instances: &[Instance], gold: &GoldStandard, spec: &AblationSpec) -> Result<AblationTable> {
    let keys: Vec<(Variant, SplitSpec, u64)> = spec
        .variants
        .iter()
        .flat_map(|&v| spec.splits.iter().flat_map(move |&s| spec.seeds.iter().map(move |&seed| (v, s, seed))))
        .collect();
    let cells: Vec<CellResult> = keys
        .par_iter()
        .map(|&(v, s, seed)| evaluate_cell(instances, gold, s, &spec.base, v, seed))
        .collect::<Result<_>>()?;
    let summary = cells
        .chunks(spec.seeds.len().max(1))
        .filter(|c| !c.is_empty())
        .map(|group| {
            let col = |f: fn(&MetricsReport) -> f64| MeanStd::of(&group.iter().map(|c| f(&c.metrics)).collect::<Vec<_>>());
            SummaryRow {
                variant: group[0].variant,
                split: group[0].split,
                runs: group.len(),
                precision: col(|m| m.precision),
                recall: col(|m| m.recall),
                f_measure: col(|m| m.f_measure),
                zero_fm_runs: group.iter().filter(|c| c.metrics.f_measure == 0.0).count(),
            }
        })
        .collect();
    Ok(AblationTable { cells, summary })
}

impl AblationTable {
    /// Aligned summary table, one row per (variant, split).
    pub fn to_text(&self) -> String {
        let header = ["variant", "split", "runs", "precision", "recall", "f_measure", "zero_fm"];
        let rows: Vec<Vec<String>> = self
            .summary
            .iter()
            .map(|r| {
                let ms = |m: MeanStd| format!("{:.4} ± {:.4}", m.mean, m.std);
                vec![
                    r.variant.to_string(),
                    r.split.to_string(),
                    r.runs.to_string(),
                    ms(r.precision),
                    ms(r.recall),
                    ms(r.f_measure),
                    r.zero_fm_runs.to_string(),
                ]
            })
            .collect();
        aligned(&header, &rows)
    }

    /// Tab-separated per-cell rows with a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("variant\tsplit\tseed\tseed_labels\tseed_matches\trounds\ttp\tfp\tfn\ttn\tprecision\trecall\tf_measure\tobjective_score\n");
        for c in &self.cells {
            let m = &c.metrics;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.variant, c.split, c.seed, c.seed_labels, c.seed_matches, c.rounds, m.tp, m.fp, m.fn_, m.tn,
                m.precision, m.recall, m.f_measure, m.objective_score
            );
        }
        out
    }
}

/// Left-aligned text table with a rule under the header.
pub fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

/// Shape of a benchmark dataset, for documentation and sizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub name: &'static str,
    pub attributes: usize,
    pub instances: u64,
    /// Non-matches per match.
    pub imbalance: u64,
    pub subspaces: usize,
}

pub const BENCHMARKS: [DatasetSummary; 4] = [
    DatasetSummary { name: "Cora", attributes: 4, instances: 837_865, imbalance: 49, subspaces: 16 },
    DatasetSummary { name: "DBLP-ACM", attributes: 4, instances: 6_001_104, imbalance: 2_698, subspaces: 16 },
    DatasetSummary { name: "DBLP-Scholar", attributes: 4, instances: 168_112_008, imbalance: 71_233, subspaces: 16 },
    DatasetSummary { name: "NCVoter", attributes: 18, instances: 1_000_000, imbalance: 4_202, subspaces: 64 },
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticConfig};
    use crate::trainer::GammaRule;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use Label::{Match as M, NonMatch as N};

    #[test]
    fn metric_examples() {
        let r = MetricsReport::from_counts(1, 1, 1, 1);
        assert_relative_eq!(r.f_measure, 0.5);
        let r = MetricsReport::from_counts(1, 0, 1, 3);
        assert_relative_eq!(r.f_measure, 2.0 / 3.0);
        let r = metrics(&[N, N, N], &[M, N, N]).unwrap();
        assert_eq!((r.precision, r.recall, r.f_measure), (0.0, 0.0, 0.0));
        assert_relative_eq!(r.objective_score, 2.0 / 3.0);
        assert!(metrics(&[M], &[]).is_err());
        assert_eq!(metrics(&[], &[]).unwrap().objective_score, 0.0);
    }

    #[test]
    fn split_examples() {
        let (tr, te) = split(10, SplitSpec::Fraction(0.6), 1).unwrap();
        assert_eq!((tr.len(), te.len()), (6, 4));
        assert_eq!(split(10, SplitSpec::Fraction(0.6), 1).unwrap(), (tr, te));
        let (tr, _) = split(1000, SplitSpec::Budget(500), 2).unwrap();
        assert_eq!(tr.len(), 500);
        for bad in [SplitSpec::Fraction(0.0), SplitSpec::Fraction(1.0), SplitSpec::Budget(0), SplitSpec::Budget(11)] {
            assert!(split(10, bad, 0).is_err(), "{bad}");
        }
    }

    #[test]
    fn split_spec_parses() {
        assert_eq!("fraction:0.6".parse::<SplitSpec>().unwrap(), SplitSpec::Fraction(0.6));
        assert_eq!("0.6".parse::<SplitSpec>().unwrap(), SplitSpec::Fraction(0.6));
        assert_eq!("budget:50".parse::<SplitSpec>().unwrap(), SplitSpec::Budget(50));
        assert_eq!("50".parse::<SplitSpec>().unwrap(), SplitSpec::Budget(50));
        assert!("lots".parse::<SplitSpec>().is_err());
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert_eq!(MeanStd::of(&[0.7]).std, 0.0);
    }

    #[test]
    fn aligned_table() {
        let t = aligned(&["a", "bb"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    bb\n---  --\nxyz  1\n");
    }

    #[test]
    fn single_cell_table() {
        let data = generate_synthetic(&SyntheticConfig {
            n_matches: 4,
            imbalance_rate: 5,
            n_features: 3,
            separation: 0.9,
            seed: 0,
        })
        .unwrap();
        let spec = AblationSpec {
            splits: vec![SplitSpec::Budget(8)],
            variants: vec![Variant::Full],
            seeds: vec![3],
            base: TrainConfig {
                inner_iters: 20,
                batch_size: 8,
                gamma: GammaRule::PoolSize,
                ..Default::default()
            },
        };
        let t = run_ablation_suite(&data.instances, &data.gold, &spec).unwrap();
        assert_eq!(t.cells.len(), 1);
        assert_eq!(t.summary.len(), 1);
        assert_eq!(t.cells[0].metrics.total(), 24 - 8);
        assert_eq!(t.to_text().lines().count(), 3);
        assert_eq!(t.to_tsv().lines().count(), 2);
        assert_eq!(run_ablation_suite(&data.instances, &data.gold, &spec).unwrap(), t);
    }

    #[test]
    fn fraction_split_scores_only_held_out_instances() {
        let data = generate_synthetic(&SyntheticConfig {
            n_matches: 4,
            imbalance_rate: 5,
            n_features: 3,
            separation: 0.9,
            seed: 0,
        })
        .unwrap();
        let base = TrainConfig {
            inner_iters: 20,
            batch_size: 8,
            ..Default::default()
        };
        let cell = evaluate_cell(&data.instances, &data.gold, SplitSpec::Fraction(0.5), &base, Variant::Full, 1).unwrap();
        assert_eq!(cell.seed_labels, 12);
        assert_eq!(cell.metrics.total(), 12);
        assert_eq!(cell.rounds, 0);
        assert_eq!(cell.predicted_matches + cell.predicted_non_matches, 12);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 2usize..200, f in 0.01f64..0.99, seed: u64) {
            let spec = SplitSpec::Fraction(f);
            if let Ok((tr, te)) = split(n, spec, seed) {
                let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(split(n, spec, seed).unwrap(), (tr, te));
            }
        }

        #[test]
        fn metric_identities(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50) {
            let r = MetricsReport::from_counts(tp, fp, fn_, tn);
            prop_assert_eq!(r.total(), tp + fp + fn_ + tn);
            if r.precision + r.recall > 0.0 {
                let lo = r.precision.min(r.recall);
                let hi = r.precision.max(r.recall);
                prop_assert!(r.f_measure >= lo - 1e-12 && r.f_measure <= hi + 1e-12);
            }
            prop_assert_eq!(r.f_measure == 0.0, tp == 0);
        }
    }
}
