//! Command-line front end: featurize, partition, train, predict, evaluate,
//! ablate and synth.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use ergan::config::RunConfig;
use ergan::dataset::{
    generate_synthetic, load_gold, load_records, write_gold, GoldStandard, RecordFormat, SyntheticConfig,
};
use ergan::eval::{choose_seed_labels, metrics, run_ablation_suite, stage_rng, AblationSpec, SplitSpec, Stage};
use ergan::features::{featurize_into, read_instances, BlockingSpec, InstanceWriter, QGramJaccard, INSTANCE_FORMAT};
use ergan::nn::{Checkpoint, CHECKPOINT_FORMAT};
use ergan::subspace::{SubspacePartition, PARTITION_FORMAT};
use ergan::trainer::{predict, run_with_hook, Provenance};
use ergan::{Error, Instance, InstancePool, Label, Result, Variant};

const LABELS_FORMAT: &str = "ergan-labels/1";

#[derive(Parser)]
#[command(name = "ergan", about = "Semi-supervised entity resolution", arg_required_else_help = true)]
struct Cli {
    /// Seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override, applied after the config file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    settings: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Featurize record pairs into an instance file.
    Featurize(FeaturizeArgs),
    /// Fit the median-split subspace partition of an instance file.
    Partition(PartitionArgs),
    /// Train on an instance file and label every unlabeled instance.
    Train(TrainArgs),
    /// Label instances with a trained generator.
    Predict(PredictArgs),
    /// Score a label file against the truth.
    Evaluate(EvaluateArgs),
    /// Run every (variant, split, seed) cell and summarize.
    Ablate(AblateArgs),
    /// Write a synthetic labeled instance file and its gold standard.
    Synth(SynthArgs),
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    left: PathBuf,
    /// Second record file for linkage; omit to deduplicate `--left`.
    #[arg(long)]
    right: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    /// The gold file has no header row.
    #[arg(long)]
    gold_no_header: bool,
    /// Only compare records sharing a token of this attribute.
    #[arg(long)]
    block_on: Option<String>,
    #[arg(long, default_value = ",")]
    delimiter: char,
    #[arg(long, default_value = "id")]
    id_column: String,
    /// Comma-separated attribute columns; defaults to every non-id column.
    #[arg(long, value_delimiter = ',')]
    attributes: Option<Vec<String>>,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Feature indices to split on; defaults to all.
    #[arg(long, value_delimiter = ',')]
    split_features: Option<Vec<usize>>,
    #[arg(short, long, default_value = "partition.json")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Gold standard; otherwise labels are read from the instance file.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Saved partition; otherwise one is fitted and written to the output directory.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Number of instances that receive real labels.
    #[arg(long)]
    seed_budget: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Generator checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    /// Label file to write; stdout when omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Label file from `train` or `predict`.
    #[arg(long)]
    labels: PathBuf,
    /// Truth as a gold standard file.
    #[arg(long, conflicts_with = "instances")]
    gold: Option<PathBuf>,
    /// Truth as the labels of an instance file.
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Also write the metrics as JSON.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Splits such as `budget:50` or `fraction:0.6`. Repeatable.
    #[arg(long = "split", default_value = "budget:50")]
    splits: Vec<SplitSpec>,
    /// Comma-separated variants; defaults to all four.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
    /// Number of seeds, counted up from `--seed`.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Directory for `ablation.txt` and `ablation.tsv`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    matches: usize,
    /// Non-matches per match.
    #[arg(long, default_value_t = 100)]
    imbalance: usize,
    #[arg(long, default_value_t = 4)]
    features: usize,
    #[arg(long, default_value_t = 0.9)]
    separation: f64,
    #[arg(short, long)]
    out: PathBuf,
}

fn version_text() -> String {
    format!(
        "{}\ninstances {INSTANCE_FORMAT}\npartition {PARTITION_FORMAT}\ncheckpoint {CHECKPOINT_FORMAT}\nlabels {LABELS_FORMAT}",
        env!("CARGO_PKG_VERSION")
    )
}

fn main() -> ExitCode {
    let version: &'static str = Box::leak(version_text().into_boxed_str());
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {message}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for kv in &cli.settings {
        cfg.apply_text(kv, "--set")?;
    }
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("workers: {e}")))?;
    }
    match cli.command {
        Command::Featurize(a) => featurize(a),
        Command::Partition(a) => partition(a, cfg),
        Command::Train(a) => train(a, cfg),
        Command::Predict(a) => predict_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Ablate(a) => ablate(a, cfg),
        Command::Synth(a) => synth(a, cfg.train.seed),
    }
}

fn delimiter_byte(c: char) -> Result<u8> {
    u8::try_from(c).map_err(|_| Error::InvalidConfig(format!("delimiter {c:?} is not a single byte")))
}

fn featurize(a: FeaturizeArgs) -> Result<()> {
    let format = RecordFormat {
        delimiter: delimiter_byte(a.delimiter)?,
        id_column: a.id_column,
        schema: a.attributes,
    };
    let left = load_records(&a.left, &format)?;
    let right = a.right.as_deref().map(|p| load_records(p, &format)).transpose()?;
    let gold = a
        .gold
        .as_deref()
        .map(|p| load_gold(p, !a.gold_no_header, format.delimiter))
        .transpose()?;
    let blocking = a.block_on.map(BlockingSpec::new);
    let mut writer = InstanceWriter::create(&a.out, &left.schema, Some(a.q))?;
    let stats = featurize_into(
        &left,
        right.as_ref(),
        gold.as_ref(),
        blocking.as_ref(),
        &QGramJaccard::new(a.q),
        |x| writer.write(&x),
    )?;
    writer.finish()?;
    println!(
        "{} candidate pairs of {} ({} matches) -> {}",
        stats.candidate_pairs,
        stats.full_pairs,
        stats.matches,
        a.out.display()
    );
    Ok(())
}

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| Error::InvalidConfig(format!("no {what} given")))
}

fn feature_rows(instances: &[Instance]) -> Vec<&[f64]> {
    instances.iter().map(|x| x.features.as_slice()).collect()
}

fn partition(a: PartitionArgs, cfg: RunConfig) -> Result<()> {
    let path = required(a.instances.or(cfg.instances), "--instances")?;
    let file = read_instances(&path)?;
    let split_features = a.split_features.or(cfg.split_features);
    let rows = feature_rows(&file.instances);
    let p = SubspacePartition::fit(&rows, split_features, &mut stage_rng(cfg.train.seed, Stage::Partition))?;
    p.save(&a.out)?;
    let populations = p.populations(0..rows.len(), |i| rows[i])?;
    let occupied = populations.iter().filter(|g| !g.is_empty()).count();
    println!(
        "{} subspaces ({occupied} occupied) over {} instances -> {}",
        p.subspace_count(),
        rows.len(),
        a.out.display()
    );
    Ok(())
}

/// Truth for `instances`: the gold file when given, else the instance file's
/// own labels, which must then be complete.
fn truth(instances: &[Instance], gold: Option<&Path>) -> Result<GoldStandard> {
    if let Some(p) = gold {
        return load_gold(p, true, b',');
    }
    let mut g = GoldStandard::new();
    for x in instances {
        match x.real_label {
            Some(Label::Match) => {
                g.insert(&x.pair.0, &x.pair.1)?;
            }
            Some(Label::NonMatch) => {}
            None => {
                return Err(Error::InvalidConfig(format!(
                    "instance ({}, {}) has no label; pass --gold",
                    x.pair.0, x.pair.1
                )))
            }
        }
    }
    Ok(g)
}

fn train(a: TrainArgs, mut cfg: RunConfig) -> Result<()> {
    if let Some(v) = a.variant {
        cfg.train.variant = v;
    }
    if let Some(b) = a.seed_budget {
        cfg.split = Some(SplitSpec::Budget(b));
    }
    let path = required(a.instances.or(cfg.instances.clone()), "--instances")?;
    let out = required(a.out.or(cfg.out_dir.clone()), "output directory (-o)")?;
    let split = cfg
        .split
        .ok_or_else(|| Error::InvalidConfig("no --seed-budget or split given".into()))?;
    let file = read_instances(&path)?;
    let gold = truth(&file.instances, a.gold.or(cfg.gold.clone()).as_deref())?;
    let (fitted, seed_labels) = choose_seed_labels(&file.instances, &gold, split, cfg.train.variant, cfg.train.seed)?;

    std::fs::create_dir_all(out.join("checkpoints"))?;
    let partition = match a.partition.or(cfg.partition.clone()) {
        Some(p) => SubspacePartition::load(&p)?,
        None => {
            fitted.save(&out.join("partition.json"))?;
            fitted
        }
    };
    let instances: Vec<Instance> = file
        .instances
        .iter()
        .map(|x| Instance {
            real_label: Some(gold.label(&x.pair.0, &x.pair.1)),
            ..x.clone()
        })
        .collect();
    let pool = InstancePool::new(instances, seed_labels.iter().map(|s| s.0))?;
    let seed = cfg.train.seed;
    let checkpoints = out.join("checkpoints");
    let outcome = run_with_hook(&cfg.train, &pool, &seed_labels, &partition, &mut |round, nets, _| {
        let stem = format!("round-{:03}", round.round);
        Checkpoint::new(&nets.generator, Some(&nets.generator_opt), seed)
            .save(&checkpoints.join(format!("{stem}-generator.json")))?;
        if let Some((d, opt)) = &nets.discriminator {
            Checkpoint::new(d, Some(opt), seed).save(&checkpoints.join(format!("{stem}-discriminator.json")))?;
        }
        Ok(())
    })?;

    let nets = &outcome.networks;
    Checkpoint::new(&nets.generator, Some(&nets.generator_opt), seed).save(&out.join("generator.json"))?;
    if let Some((d, opt)) = &nets.discriminator {
        Checkpoint::new(d, Some(opt), seed).save(&out.join("discriminator.json"))?;
    }
    std::fs::write(out.join("report.json"), outcome.report.to_json()?)?;
    let rows: Vec<(&Instance, Label, &str)> = outcome
        .pool
        .iter()
        .map(|(id, e)| {
            let source = match e.provenance {
                Provenance::Real => "real",
                Provenance::Pseudo => "pseudo",
            };
            (pool.get(id), e.label, source)
        })
        .collect();
    write_labels(&mut std::fs::File::create(out.join("labels.tsv"))?, rows)?;

    let r = &outcome.report;
    println!(
        "{} instances, {} seed labels ({} matches), {} rounds",
        r.instances,
        r.seed_labels,
        r.seed_matches,
        r.rounds.len()
    );
    if let Some(m) = r.final_metrics {
        println!(
            "pseudo labels: P {:.4}  R {:.4}  FM {:.4}",
            m.precision, m.recall, m.f_measure
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn write_labels<'a, W: Write>(out: &mut W, rows: impl IntoIterator<Item = (&'a Instance, Label, &'a str)>) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "#format={LABELS_FORMAT}")?;
    writeln!(out, "id_i\tid_j\tlabel\tsource")?;
    for (x, label, source) in rows {
        writeln!(out, "{}\t{}\t{label}\t{source}", x.pair.0, x.pair.1)?;
    }
    out.flush()?;
    Ok(())
}

/// `(id_i, id_j, label, source)` rows of a label file.
fn read_labels(path: &Path) -> Result<Vec<(String, String, Label, String)>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let ctx = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(&format!("#format={LABELS_FORMAT}")) {
        return Err(Error::format(&ctx, "not a label file"));
    }
    lines.next();
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, line)| {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::format(&ctx, format!("row {} has {} columns, expected 4", n + 1, cols.len())));
            }
            Ok((cols[0].to_string(), cols[1].to_string(), cols[2].parse()?, cols[3].to_string()))
        })
        .collect()
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let model = Checkpoint::load(&a.model)?.model;
    let file = read_instances(&a.instances)?;
    let labels = predict(&model, &file.instances)?;
    let rows = file.instances.iter().zip(&labels).map(|(x, &(l, _))| (x, l, "predicted"));
    match a.out {
        Some(p) => write_labels(&mut std::fs::File::create(p)?, rows),
        None => write_labels(&mut std::io::stdout().lock(), rows),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let rows = read_labels(&a.labels)?;
    let gold = match (&a.gold, &a.instances) {
        (Some(g), _) => load_gold(g, true, b',')?,
        (None, Some(i)) => truth(&read_instances(i)?.instances, None)?,
        (None, None) => return Err(Error::InvalidConfig("pass --gold or --instances".into())),
    };
    // Seed labels are the truth by construction; only inferred labels count.
    let scored: Vec<_> = rows.iter().filter(|r| r.3 != "real").collect();
    let predicted: Vec<Label> = scored.iter().map(|r| r.2).collect();
    let actual: Vec<Label> = scored.iter().map(|r| gold.label(&r.0, &r.1)).collect();
    let m = metrics(&predicted, &actual)?;
    println!("instances  {}", m.total());
    println!("tp fp fn   {} {} {}", m.tp, m.fp, m.fn_);
    println!("precision  {:.4}", m.precision);
    println!("recall     {:.4}", m.recall);
    println!("f_measure  {:.4}", m.f_measure);
    if let Some(p) = a.out {
        std::fs::write(p, serde_json::to_string_pretty(&m)? + "\n")?;
    }
    Ok(())
}

fn ablate(a: AblateArgs, cfg: RunConfig) -> Result<()> {
    let file = read_instances(&a.instances)?;
    let gold = truth(&file.instances, a.gold.as_deref())?;
    let first = cfg.train.seed;
    let spec = AblationSpec {
        splits: a.splits,
        variants: a.variants.unwrap_or_else(|| Variant::ALL.to_vec()),
        seeds: (first..first + a.seeds).collect(),
        base: cfg.train,
    };
    let table = run_ablation_suite(&file.instances, &gold, &spec)?;
    let text = table.to_text();
    print!("{text}");
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("ablation.txt"), &text)?;
        std::fs::write(dir.join("ablation.tsv"), table.to_tsv())?;
    }
    Ok(())
}

fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    let data = generate_synthetic(&SyntheticConfig {
        n_matches: a.matches,
        imbalance_rate: a.imbalance,
        n_features: a.features,
        separation: a.separation,
        seed,
    })?;
    std::fs::create_dir_all(&a.out)?;
    let mut writer = InstanceWriter::create(&a.out.join("instances.tsv"), &data.schema, None)?;
    for x in &data.instances {
        writer.write(x)?;
    }
    writer.finish()?;
    write_gold(&data.gold, &a.out.join("gold.csv"))?;
    println!(
        "{} instances ({} matches) -> {}",
        data.instances.len(),
        data.gold.len(),
        a.out.display()
    );
    Ok(())
}
