//! Trains one variant on synthetic data and prints the per-round report:
//! pool growth, losses and the running quality of the pseudo labels.
//!
//! ```text
//! cargo run --release --example train_synthetic -- [--variant full] [--seed 0] [--budget 50]
//! ```

use clap::Parser;
use ergan::config::RunConfig;
use ergan::dataset::{generate_synthetic, SyntheticConfig};
use ergan::eval::{stage_rng, Stage};
use ergan::subspace::SubspacePartition;
use ergan::trainer::{run, select_seed_labels, GammaRule};
use ergan::{InstancePool, TrainConfig, Variant};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "full")]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    budget: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// `pool` or a fixed count.
    #[arg(long, default_value = "pool")]
    gamma: GammaRule,
    #[arg(long, default_value_t = 0.9)]
    separation: f64,
    /// Seed of the synthetic data set, independent of the training seed.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Extra training settings as `key=value`, e.g. `--set inner_iters=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    settings: Vec<String>,
    /// Print the full JSON report instead of the round table.
    #[arg(long)]
    json: bool,
}

fn main() -> ergan::Result<()> {
    let args = Args::parse();
    let data = generate_synthetic(&SyntheticConfig {
        n_matches: 10,
        imbalance_rate: 100,
        n_features: 4,
        separation: args.separation,
        seed: args.data_seed,
    })?;
    let rows: Vec<&[f64]> = data.instances.iter().map(|x| x.features.as_slice()).collect();
    let partition = SubspacePartition::fit(&rows, None, &mut stage_rng(args.seed, Stage::Partition))?;
    let all: Vec<usize> = (0..data.instances.len()).collect();
    let seed_labels = select_seed_labels(
        &data.instances,
        &all,
        &data.gold,
        args.budget,
        Some(&partition),
        args.variant.uses_diversity(),
        &mut stage_rng(args.seed, Stage::SeedLabels),
    )?;
    let pool = InstancePool::new(data.instances, seed_labels.iter().map(|s| s.0))?;
    let mut run_cfg = RunConfig {
        train: TrainConfig {
            seed: args.seed,
            variant: args.variant,
            inner_iters: args.iters,
            gamma: args.gamma,
            ..Default::default()
        },
        ..Default::default()
    };
    for kv in &args.settings {
        run_cfg.apply_text(kv, "--set")?;
    }
    let cfg = run_cfg.train;
    let out = run(&cfg, &pool, &seed_labels, &partition)?;
    if args.json {
        print!("{}", out.report.to_json()?);
        return Ok(());
    }
    println!(
        "{} instances, {} seed labels ({} matches), {} subspaces",
        out.report.instances, out.report.seed_labels, out.report.seed_matches, out.report.subspaces
    );
    println!("round  gamma  added  +M  pool  g_loss    d_obj     pseudo_fm");
    for r in &out.report.rounds {
        println!(
            "{:<5}  {:<5}  {:<5}  {:<2}  {:<4}  {:<8.4}  {:<8}  {}",
            r.round,
            r.gamma,
            r.propagated,
            r.propagated_matches,
            r.pool_size,
            r.generator_loss,
            r.discriminator_loss.map_or("-".into(), |d| format!("{d:.4}")),
            r.pseudo_label_metrics.map_or("-".into(), |m| format!("{:.4}", m.f_measure)),
        );
    }
    if let Some(m) = out.report.final_metrics {
        println!(
            "final: P {:.4}  R {:.4}  FM {:.4}  (tp {} fp {} fn {})",
            m.precision, m.recall, m.f_measure, m.tp, m.fp, m.fn_
        );
    }
    Ok(())
}
