//! Runs the full pipeline on a real deduplication benchmark such as Cora:
//! featurize the records, then evaluate each seed on a uniform training
//! split and report the f-measure of the inferred labels.
//!
//! ```text
//! cargo run --release --example cora -- RECORDS.csv GOLD.csv \
//!     [--block-on title] [--fraction 0.6] [--seeds 3] [--id-column id]
//! ```
//!
//! The gold file lists one matching id pair per row, with a header.

use std::path::PathBuf;

use clap::Parser;
use ergan::dataset::{load_gold, load_records, RecordFormat};
use ergan::eval::{evaluate_cell, MeanStd, SplitSpec};
use ergan::features::{featurize_all, BlockingSpec, QGramJaccard};
use ergan::{TrainConfig, Variant};

#[derive(Parser)]
struct Args {
    records: PathBuf,
    gold: PathBuf,
    #[arg(long)]
    block_on: Option<String>,
    #[arg(long, default_value_t = 0.6)]
    fraction: f64,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value = "id")]
    id_column: String,
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Comma-separated attribute columns; defaults to every non-id column.
    #[arg(long, value_delimiter = ',')]
    attributes: Option<Vec<String>>,
    #[arg(long, default_value = "full")]
    variant: Variant,
}

fn main() -> ergan::Result<()> {
    let args = Args::parse();
    let delimiter = u8::try_from(args.delimiter).map_err(|_| ergan::Error::InvalidConfig("delimiter".into()))?;
    let format = RecordFormat {
        delimiter,
        id_column: args.id_column,
        schema: args.attributes,
    };
    let records = load_records(&args.records, &format)?;
    let gold = load_gold(&args.gold, true, delimiter)?;
    let blocking = args.block_on.map(BlockingSpec::new);
    let (instances, stats) = featurize_all(&records, None, Some(&gold), blocking.as_ref(), &QGramJaccard::default())?;
    println!(
        "{} records, {} candidate pairs of {} ({} matches)",
        records.len(),
        stats.candidate_pairs,
        stats.full_pairs,
        stats.matches
    );
    let mut fms = Vec::new();
    for seed in 0..args.seeds {
        let cell = evaluate_cell(&instances, &gold, SplitSpec::Fraction(args.fraction), &TrainConfig::default(), args.variant, seed)?;
        let m = cell.metrics;
        println!("seed {seed}: P {:.4}  R {:.4}  FM {:.4}", m.precision, m.recall, m.f_measure);
        fms.push(m.f_measure);
    }
    let s = MeanStd::of(&fms);
    println!("mean FM {:.4} ± {:.4}", s.mean, s.std);
    Ok(())
}
