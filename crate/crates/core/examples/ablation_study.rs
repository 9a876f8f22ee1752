//! Compares the four training variants on imbalanced synthetic data with a
//! small label budget.
//!
//! ```text
//! cargo run --release --example ablation_study -- [--seeds 5] [--budget 50] [--iters 500]
//! ```

use clap::Parser;
use ergan::dataset::{generate_synthetic, SyntheticConfig};
use ergan::eval::{run_ablation_suite, AblationSpec, SplitSpec};
use ergan::{TrainConfig, Variant};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 50)]
    budget: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 10)]
    matches: usize,
    #[arg(long, default_value_t = 100)]
    imbalance: usize,
    #[arg(long, default_value_t = 0.9)]
    separation: f64,
    #[arg(long, default_value_t = 4)]
    features: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Print every cell, not just the summary.
    #[arg(long)]
    cells: bool,
}

fn main() -> ergan::Result<()> {
    let args = Args::parse();
    let data = generate_synthetic(&SyntheticConfig {
        n_matches: args.matches,
        imbalance_rate: args.imbalance,
        n_features: args.features,
        separation: args.separation,
        seed: args.data_seed,
    })?;
    let spec = AblationSpec {
        splits: vec![SplitSpec::Budget(args.budget)],
        variants: Variant::ALL.to_vec(),
        seeds: (0..args.seeds).collect(),
        base: TrainConfig {
            inner_iters: args.iters,
            ..Default::default()
        },
    };
    let table = run_ablation_suite(&data.instances, &data.gold, &spec)?;
    print!("{}", table.to_text());
    if args.cells {
        println!();
        print!("{}", table.to_tsv());
    }
    Ok(())
}
