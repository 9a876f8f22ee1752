//! Median-split partitioning and water-filling minibatch selection on a
//! skewed synthetic sample. Diversity sampling spreads the batch across
//! subspaces, so the rare match region is represented; uniform sampling
//! mostly draws from the crowded all-zero subspace.
//!
//! ```text
//! cargo run --example diversity_sampling -- [batch size]
//! ```

use ergan::dataset::{generate_synthetic, SyntheticConfig};
use ergan::subspace::{diverse_sample, l21_norm, SubspacePartition};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ergan::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let data = generate_synthetic(&SyntheticConfig {
        n_matches: 10,
        imbalance_rate: 100,
        n_features: 4,
        separation: 0.9,
        seed: 0,
    })?;
    let rows: Vec<&[f64]> = data.instances.iter().map(|x| x.features.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let partition = SubspacePartition::fit(&rows, None, &mut rng)?;
    println!("medians {:?}", partition.medians);
    let groups = partition.populations(0..rows.len(), |i| rows[i])?;

    let selection = diverse_sample(&groups, m, &mut rng)?;
    let mut uniform = vec![0; groups.len()];
    let uniform_ids = index::sample(&mut rng, rows.len(), m);
    let mut uniform_matches = 0;
    for i in uniform_ids {
        uniform[partition.assign(rows[i])?] += 1;
        uniform_matches += usize::from(data.instances[i].real_label.is_some_and(|l| l.is_match()));
    }
    let diverse_matches = selection
        .selected_ids
        .iter()
        .filter(|&&i| data.instances[i].real_label.is_some_and(|l| l.is_match()))
        .count();

    println!("subspace  size  diverse  uniform");
    for (k, g) in groups.iter().enumerate() {
        println!("{k:<8}  {:<4}  {:<7}  {}", g.len(), selection.counts[k], uniform[k]);
    }
    println!("l2,1 norm: diverse {:.3}  uniform {:.3}", selection.norm(), l21_norm(&uniform));
    println!("matches in batch: diverse {diverse_matches}  uniform {uniform_matches}");
    Ok(())
}
