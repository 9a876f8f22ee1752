//! Alternating adversarial minibatch training with label propagation.
//!
//! Each propagation round runs `n` batch-training iterations: a diversity
//! minibatch of unlabeled instances gets soft pseudo labels from `G`, a
//! uniform minibatch is drawn from the labeled pool, `D` takes one ascent
//! step on its objective and `G` one descent step on its own. The round
//! then scores every not-yet-labeled instance by `D(x, G(x))` and moves the
//! `γ` best into the labeled pool with their hard pseudo labels. Training
//! ends when no unlabeled instance remains.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::GoldStandard;
use crate::error::{Error, Result};
use crate::eval::{metrics, MetricsReport};
use crate::features::{Instance, InstancePool, Label};
use crate::nn::{
    adversarial_gradients, classifier_gradients, joint_input, smooth_label, AdversarialBatch, LossSpec, Mlp, OptState,
    OptimizerConfig,
};
use crate::subspace::{allocate_counts, SubspacePartition};

/// Which components are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Adversarial training with diversity sampling and propagation.
    Full,
    /// Uniform sampling for seed labels and minibatches.
    NoDiversity,
    /// One batch-training phase, then `G` labels everything at once.
    NoPropagation,
    /// A single classifier trained on the labeled pool with log loss,
    /// propagating by its own confidence.
    NoAdversary,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoDiversity,
        Variant::NoPropagation,
        Variant::NoAdversary,
    ];

    pub fn uses_diversity(self) -> bool {
        self != Variant::NoDiversity
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoDiversity => "no-diversity",
            Variant::NoPropagation => "no-propagation",
            Variant::NoAdversary => "no-adversary",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "full" => Ok(Variant::Full),
            "no-diversity" => Ok(Variant::NoDiversity),
            "no-propagation" => Ok(Variant::NoPropagation),
            "no-adversary" => Ok(Variant::NoAdversary),
            _ => Err(Error::InvalidConfig(format!("unknown variant {s:?}"))),
        }
    }
}

/// How many instances each propagation round moves into the labeled pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaRule {
    Fixed(usize),
    /// `γ = |X*|`: the pool doubles each round.
    PoolSize,
}

impl FromStr for GammaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pool" | "pool-size" => Ok(GammaRule::PoolSize),
            other => other
                .strip_prefix("fixed:")
                .unwrap_or(other)
                .parse()
                .ok()
                .filter(|&g| g > 0)
                .map(GammaRule::Fixed)
                .ok_or_else(|| Error::InvalidConfig(format!("bad gamma rule {s:?}"))),
        }
    }
}

impl fmt::Display for GammaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaRule::Fixed(g) => write!(f, "fixed:{g}"),
            GammaRule::PoolSize => f.write_str("pool"),
        }
    }
}

/// Which generator objective is descended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorObjective {
    /// Minimize `log(1 - D(x, G(x)))` directly.
    Minimax,
    /// Maximize `log D(x, G(x))` instead.
    NonSaturating,
}

impl GeneratorObjective {
    fn loss_spec(self) -> LossSpec {
        match self {
            GeneratorObjective::Minimax => LossSpec::Generator,
            GeneratorObjective::NonSaturating => LossSpec::GeneratorNonSaturating,
        }
    }
}

impl FromStr for GeneratorObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimax" => Ok(GeneratorObjective::Minimax),
            "non-saturating" | "non_saturating" => Ok(GeneratorObjective::NonSaturating),
            _ => Err(Error::InvalidConfig(format!("unknown generator objective {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Minibatch size `m`.
    pub batch_size: usize,
    /// Weight `λ` of the labeled term in the discriminator objective.
    pub lambda: f64,
    /// Batch-training iterations `n` per propagation round.
    pub inner_iters: usize,
    pub gamma: GammaRule,
    pub seed: u64,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub optimizer: OptimizerConfig,
    /// Generator learning rate as a multiple of `optimizer.learning_rate`.
    pub generator_lr_ratio: f64,
    /// Discriminator updates per batch-training iteration.
    pub discriminator_steps: usize,
    /// Draw labeled minibatches by subspace water-filling too, so real and
    /// generated batches share the same feature-space coverage.
    pub diverse_labeled_batches: bool,
    /// Label-channel smoothing width `w`: every label `y` shown to D, real
    /// or generated, becomes `(1 - w)·y + w·u` with fresh `u ~ U[0, 1)`.
    pub label_noise: f64,
    pub generator_objective: GeneratorObjective,
    /// Start the generator's output at the seed labels' match rate.
    pub prior_init: bool,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            lambda: 1.0,
            inner_iters: 500,
            gamma: GammaRule::PoolSize,
            seed: 0,
            generator_hidden: vec![32, 16],
            discriminator_hidden: vec![32, 16],
            optimizer: OptimizerConfig::default(),
            generator_lr_ratio: 1.0,
            discriminator_steps: 1,
            diverse_labeled_batches: true,
            label_noise: 0.0,
            generator_objective: GeneratorObjective::NonSaturating,
            prior_init: true,
            variant: Variant::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidConfig("inner_iters must be >= 1".into()));
        }
        if self.gamma == GammaRule::Fixed(0) {
            return Err(Error::InvalidConfig("gamma must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::InvalidConfig("label_noise must be in [0, 0.5)".into()));
        }
        if self.discriminator_steps == 0 {
            return Err(Error::InvalidConfig("discriminator_steps must be >= 1".into()));
        }
        if self.generator_lr_ratio.is_nan() || self.generator_lr_ratio <= 0.0 {
            return Err(Error::InvalidConfig("generator_lr_ratio must be > 0".into()));
        }
        if self.optimizer.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        Ok(())
    }

    fn dims(hidden: &[usize], input: usize) -> Vec<usize> {
        std::iter::once(input).chain(hidden.iter().copied()).chain([1]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Pseudo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub label: Label,
    pub provenance: Provenance,
    /// Propagation round that added the entry; 0 for seed labels.
    pub round: usize,
}

/// The growing labeled set. Entries are never removed or relabeled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPool {
    entries: BTreeMap<usize, PoolEntry>,
    order: Vec<usize>,
}

impl LabeledPool {
    pub fn from_seed(seed: &[(usize, Label)]) -> Result<Self> {
        let mut pool = Self::default();
        for &(id, label) in seed {
            pool.add(id, label, Provenance::Real, 0)?;
        }
        Ok(pool)
    }

    fn add(&mut self, id: usize, label: Label, provenance: Provenance, round: usize) -> Result<()> {
        if self.entries.contains_key(&id) {
            return Err(Error::InvalidConfig(format!("instance {id} is already labeled")));
        }
        self.entries.insert(id, PoolEntry { label, provenance, round });
        self.order.push(id);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&PoolEntry> {
        self.entries.get(&id)
    }

    pub fn contains(&self, id: usize) -> bool {
        self.entries.contains_key(&id)
    }

    /// Entries ordered by instance id.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &PoolEntry)> {
        self.entries.iter().map(|(&id, e)| (id, e))
    }

    /// True when every entry of `self` is in `other` with the same content.
    pub fn is_subset_of(&self, other: &LabeledPool) -> bool {
        self.entries.iter().all(|(id, e)| other.entries.get(id) == Some(e))
    }

    /// Ids in insertion order, for sampling.
    fn ids(&self) -> &[usize] {
        &self.order
    }
}

/// Output-layer weight scale applied by [`Networks::start_at_prior`].
pub const PRIOR_INIT_SCALE: f64 = 0.1;

/// `G` and `D` with their optimizer states. For [`Variant::NoAdversary`]
/// the generator slot holds the lone classifier and there is no `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    pub generator: Mlp,
    pub generator_opt: OptState,
    pub discriminator: Option<(Mlp, OptState)>,
}

impl Networks {
    pub fn new<R: Rng>(cfg: &TrainConfig, dims: usize, rng: &mut R) -> Result<Self> {
        let generator = Mlp::new(&TrainConfig::dims(&cfg.generator_hidden, dims), rng)?;
        let generator_opt = OptState::new(
            &generator,
            OptimizerConfig {
                learning_rate: cfg.optimizer.learning_rate * cfg.generator_lr_ratio,
                ..cfg.optimizer
            },
        );
        let discriminator = if cfg.variant == Variant::NoAdversary {
            None
        } else {
            let d = Mlp::new(&TrainConfig::dims(&cfg.discriminator_hidden, dims + 1), rng)?;
            let opt = OptState::new(&d, cfg.optimizer);
            Some((d, opt))
        };
        Ok(Self {
            generator,
            generator_opt,
            discriminator,
        })
    }

    /// Shrinks the generator's output layer and sets its bias so that every
    /// initial output is close to `match_rate`. Without this, the
    /// discriminator's first lesson is the label marginal ("low labels look
    /// real"), and the generator collapses onto the majority class before
    /// the discriminator has learned where the minority lives.
    pub fn start_at_prior(&mut self, match_rate: f64) {
        let p = match_rate.clamp(0.01, 0.99);
        let last = self.generator.layers.last_mut().expect("networks have layers");
        last.weights.iter_mut().for_each(|w| *w *= PRIOR_INIT_SCALE);
        last.bias[0] = (p / (1.0 - p)).ln();
    }

    /// Propagation score of `x`: `D(x, G(x))`, or the classifier's
    /// confidence `max(p, 1 - p)` when there is no discriminator.
    pub fn score(&self, x: &[f64]) -> Result<(Label, f64)> {
        let (label, g) = pseudo_label(&self.generator, x)?;
        let score = match &self.discriminator {
            Some((d, _)) => d.forward(&joint_input(x, g))?,
            None => g.max(1.0 - g),
        };
        Ok((label, score))
    }
}

/// Hard label `M` iff `G(x) > 0.5`, with the soft output.
pub fn pseudo_label(generator: &Mlp, x: &[f64]) -> Result<(Label, f64)> {
    let g = generator.forward(x)?;
    let label = if g > 0.5 { Label::Match } else { Label::NonMatch };
    Ok((label, g))
}

pub fn predict(generator: &Mlp, instances: &[Instance]) -> Result<Vec<(Label, f64)>> {
    instances
        .par_iter()
        .map(|x| pseudo_label(generator, &x.features))
        .collect()
}

/// Chooses `budget` instances from `candidates` to receive real labels from
/// `gold`: by diversity sampling over `partition`, or uniformly when
/// `diversity` is off.
pub fn select_seed_labels<R: Rng>(
    instances: &[Instance],
    candidates: &[usize],
    gold: &GoldStandard,
    budget: usize,
    partition: Option<&SubspacePartition>,
    diversity: bool,
    rng: &mut R,
) -> Result<Vec<(usize, Label)>> {
    if budget > candidates.len() {
        return Err(Error::BudgetExceedsPool {
            budget,
            population: candidates.len(),
        });
    }
    let mut chosen: Vec<usize> = match (diversity, partition) {
        (true, Some(p)) => {
            let pops = p.populations(candidates.iter().copied(), |i| instances[i].features.as_slice())?;
            crate::subspace::diverse_sample(&pops, budget, rng)?.selected_ids
        }
        (true, None) => {
            return Err(Error::InvalidConfig("diversity selection needs a partition".into()));
        }
        (false, _) => index::sample(rng, candidates.len(), budget)
            .into_iter()
            .map(|k| candidates[k])
            .collect(),
    };
    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .map(|i| {
            let (a, b) = &instances[i].pair;
            (i, gold.label(a, b))
        })
        .collect())
}

/// Draws minibatches from a fixed id set, by subspace water-filling or
/// uniformly.
struct BatchSampler {
    populations: Vec<Vec<usize>>,
    all: Vec<usize>,
    diversity: bool,
    cached: Option<(usize, Vec<usize>)>,
}

impl BatchSampler {
    fn new(
        ids: impl IntoIterator<Item = usize>,
        pool: &InstancePool,
        partition: &SubspacePartition,
        diversity: bool,
    ) -> Result<Self> {
        let all: Vec<usize> = ids.into_iter().collect();
        let populations = if diversity {
            partition.populations(all.iter().copied(), |i| pool.features(i))?
        } else {
            Vec::new()
        };
        Ok(Self {
            populations,
            all,
            diversity,
            cached: None,
        })
    }

    fn sample<R: Rng>(&mut self, m: usize, rng: &mut R) -> Result<Vec<usize>> {
        let m = m.min(self.all.len());
        if !self.diversity {
            return Ok(index::sample(rng, self.all.len(), m).into_iter().map(|k| self.all[k]).collect());
        }
        if self.cached.as_ref().map(|(cm, _)| *cm) != Some(m) {
            let sizes: Vec<usize> = self.populations.iter().map(Vec::len).collect();
            self.cached = Some((m, allocate_counts(&sizes, m)?));
        }
        let counts = &self.cached.as_ref().expect("just set").1;
        let mut out = Vec::with_capacity(m);
        for (members, &c) in self.populations.iter().zip(counts) {
            if c > 0 {
                out.extend(index::sample(rng, members.len(), c).into_iter().map(|k| members[k]));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct InnerStats {
    pub iterations: usize,
    /// Mean over the round of the generator's objective (or the
    /// classifier's log loss).
    pub generator_loss: f64,
    /// Mean over the round of the discriminator's objective, as maximized.
    pub discriminator_loss: Option<f64>,
}

/// Runs `cfg.inner_iters` batch-training iterations. With no unlabeled
/// instances, `G`'s minibatch is drawn from the labeled pool's features.
fn inner_train_with<R: Rng>(
    nets: &mut Networks,
    pool: &InstancePool,
    labeled: &LabeledPool,
    sampler: &mut BatchSampler,
    partition: &SubspacePartition,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<InnerStats> {
    if labeled.is_empty() {
        return Err(Error::EmptyLabeledPool);
    }
    let diverse_real = cfg.variant.uses_diversity() && cfg.diverse_labeled_batches;
    let mut real_sampler = BatchSampler::new(labeled.ids().iter().copied(), pool, partition, diverse_real)?;
    let m = cfg.batch_size;
    let mut stats = InnerStats {
        iterations: cfg.inner_iters,
        ..Default::default()
    };
    let mut d_total = 0.0;
    for _ in 0..cfg.inner_iters {
        let real_ids = real_sampler.sample(m, rng)?;
        let real: Vec<(&[f64], f64)> = real_ids
            .iter()
            .map(|&i| (pool.features(i), labeled.get(i).expect("sampled from pool").label.as_f64()))
            .collect();

        match &mut nets.discriminator {
            None => {
                let (loss, grads) = classifier_gradients(&nets.generator, &real)?;
                nets.generator_opt.step(&mut nets.generator, &grads)?;
                stats.generator_loss += loss;
            }
            Some((d, d_opt)) => {
                let w = cfg.label_noise;
                let real: Vec<(&[f64], f64)> = if w > 0.0 {
                    real.iter().map(|&(x, y)| (x, smooth_label(y, w, rng.gen()))).collect()
                } else {
                    real
                };
                let fake_ids = if sampler.all.is_empty() {
                    real_ids.clone()
                } else {
                    sampler.sample(m, rng)?
                };
                let fake: Vec<&[f64]> = fake_ids.iter().map(|&i| pool.features(i)).collect();
                let jitter: Vec<f64> = if w > 0.0 {
                    fake.iter().map(|_| rng.gen()).collect()
                } else {
                    Vec::new()
                };
                let batch = AdversarialBatch {
                    unlabeled: &fake,
                    real: &real,
                    fake_smoothing: (w > 0.0).then_some((w, jitter.as_slice())),
                };
                for _ in 0..cfg.discriminator_steps {
                    let spec = LossSpec::Discriminator { lambda: cfg.lambda };
                    let dg = adversarial_gradients(&nets.generator, d, batch, spec)?;
                    d_opt.step(d, &dg.discriminator)?;
                    d_total -= dg.loss / cfg.discriminator_steps as f64;
                }
                let gg = adversarial_gradients(&nets.generator, d, batch, cfg.generator_objective.loss_spec())?;
                nets.generator_opt.step(&mut nets.generator, &gg.generator)?;
                stats.generator_loss += gg.loss;
            }
        }
    }
    if cfg.inner_iters > 0 {
        stats.generator_loss /= cfg.inner_iters as f64;
        d_total /= cfg.inner_iters as f64;
    }
    if nets.discriminator.is_some() {
        stats.discriminator_loss = Some(d_total);
    }
    Ok(stats)
}

/// One batch-training phase over `pool`'s unlabeled set.
pub fn inner_train<R: Rng>(
    nets: &mut Networks,
    pool: &InstancePool,
    labeled: &LabeledPool,
    cfg: &TrainConfig,
    partition: &SubspacePartition,
    rng: &mut R,
) -> Result<InnerStats> {
    let mut sampler = BatchSampler::new(pool.unlabeled().iter().copied(), pool, partition, cfg.variant.uses_diversity())?;
    inner_train_with(nets, pool, labeled, &mut sampler, partition, cfg, rng)
}

/// The `gamma` highest-scoring ids of `remaining` (ties to the lower id),
/// each with its pseudo label and score.
pub fn propagate(
    nets: &Networks,
    pool: &InstancePool,
    remaining: &BTreeSet<usize>,
    gamma: usize,
) -> Result<Vec<(usize, Label, f64)>> {
    let ids: Vec<usize> = remaining.iter().copied().collect();
    let scored: Vec<(usize, Label, f64)> = ids
        .par_iter()
        .map(|&i| nets.score(pool.features(i)).map(|(l, s)| (i, l, s)))
        .collect::<Result<_>>()?;
    Ok(top_gamma(scored, gamma))
}

/// Top-`gamma` by score, ties broken by ascending id.
pub fn top_gamma(mut scored: Vec<(usize, Label, f64)>, gamma: usize) -> Vec<(usize, Label, f64)> {
    scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    scored.truncate(gamma);
    scored
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round: usize,
    pub gamma: usize,
    pub propagated: usize,
    pub propagated_matches: usize,
    pub pool_size: usize,
    pub remaining: usize,
    pub generator_loss: f64,
    pub discriminator_loss: Option<f64>,
    /// Quality of all pseudo labels so far, when true labels are known.
    pub pseudo_label_metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub variant: Variant,
    pub seed: u64,
    pub config: TrainConfig,
    pub instances: usize,
    pub seed_labels: usize,
    pub seed_matches: usize,
    pub unlabeled: usize,
    pub subspaces: usize,
    pub rounds: Vec<RoundReport>,
    /// Pseudo labels of the unlabeled set against true labels, when known.
    pub final_metrics: Option<MetricsReport>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub pool: LabeledPool,
    pub networks: Networks,
    pub report: RunReport,
}

impl RunOutcome {
    /// Labels assigned to every unlabeled instance, ordered by id.
    pub fn pseudo_labels(&self) -> Vec<(usize, Label)> {
        self.pool
            .iter()
            .filter(|(_, e)| e.provenance == Provenance::Pseudo)
            .map(|(id, e)| (id, e.label))
            .collect()
    }
}

/// Observer called after every propagation round.
pub type RoundHook<'a> = dyn FnMut(&RoundReport, &Networks, &LabeledPool) -> Result<()> + 'a;

/// Trains on `pool` starting from `seed_labels`, which must cover exactly
/// the pool's labeled set.
pub fn run(
    cfg: &TrainConfig,
    pool: &InstancePool,
    seed_labels: &[(usize, Label)],
    partition: &SubspacePartition,
) -> Result<RunOutcome> {
    run_with_hook(cfg, pool, seed_labels, partition, &mut |_, _, _| Ok(()))
}

pub fn run_with_hook(
    cfg: &TrainConfig,
    pool: &InstancePool,
    seed_labels: &[(usize, Label)],
    partition: &SubspacePartition,
    hook: &mut RoundHook<'_>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let seed_ids: BTreeSet<usize> = seed_labels.iter().map(|&(i, _)| i).collect();
    if &seed_ids != pool.labeled() || seed_ids.len() != seed_labels.len() {
        return Err(Error::InvalidConfig("seed labels must cover exactly the labeled set".into()));
    }
    if partition.dims != pool.dims() {
        return Err(Error::DimensionMismatch {
            expected: pool.dims(),
            found: partition.dims,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut networks = Networks::new(cfg, pool.dims(), &mut rng)?;
    if cfg.prior_init {
        let matches = seed_labels.iter().filter(|s| s.1.is_match()).count();
        networks.start_at_prior(matches as f64 / seed_labels.len().max(1) as f64);
    }
    let mut labeled = LabeledPool::from_seed(seed_labels)?;
    let mut sampler = BatchSampler::new(pool.unlabeled().iter().copied(), pool, partition, cfg.variant.uses_diversity())?;
    let mut remaining: BTreeSet<usize> = pool.unlabeled().clone();
    let truth: Vec<Option<Label>> = pool.instances().iter().map(|x| x.real_label).collect();

    let mut report = RunReport {
        variant: cfg.variant,
        seed: cfg.seed,
        config: cfg.clone(),
        instances: pool.len(),
        seed_labels: seed_labels.len(),
        seed_matches: seed_labels.iter().filter(|(_, l)| l.is_match()).count(),
        unlabeled: remaining.len(),
        subspaces: partition.subspace_count(),
        rounds: Vec::new(),
        final_metrics: None,
    };

    if remaining.is_empty() {
        // Nothing to propagate; still fit the networks so they can label
        // held-out instances.
        if !labeled.is_empty() {
            inner_train_with(&mut networks, pool, &labeled, &mut sampler, partition, cfg, &mut rng)?;
        }
        return Ok(RunOutcome {
            pool: labeled,
            networks,
            report,
        });
    }

    let mut round = 0;
    while !remaining.is_empty() {
        let stats = inner_train_with(&mut networks, pool, &labeled, &mut sampler, partition, cfg, &mut rng)?;
        round += 1;
        let gamma = if cfg.variant == Variant::NoPropagation {
            remaining.len()
        } else {
            match cfg.gamma {
                GammaRule::Fixed(g) => g,
                GammaRule::PoolSize => labeled.len(),
            }
        };
        let chosen = propagate(&networks, pool, &remaining, gamma)?;
        for &(id, label, _) in &chosen {
            labeled.add(id, label, Provenance::Pseudo, round)?;
            remaining.remove(&id);
        }
        let rr = RoundReport {
            round,
            gamma,
            propagated: chosen.len(),
            propagated_matches: chosen.iter().filter(|c| c.1.is_match()).count(),
            pool_size: labeled.len(),
            remaining: remaining.len(),
            generator_loss: stats.generator_loss,
            discriminator_loss: stats.discriminator_loss,
            pseudo_label_metrics: pseudo_metrics(&labeled, &truth),
        };
        hook(&rr, &networks, &labeled)?;
        report.rounds.push(rr);
    }
    report.final_metrics = pseudo_metrics(&labeled, &truth);
    Ok(RunOutcome {
        pool: labeled,
        networks,
        report,
    })
}

fn pseudo_metrics(labeled: &LabeledPool, truth: &[Option<Label>]) -> Option<MetricsReport> {
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    for (id, e) in labeled.iter() {
        if e.provenance == Provenance::Pseudo {
            predicted.push(e.label);
            actual.push(truth[id]?);
        }
    }
    metrics(&predicted, &actual).ok()
}
