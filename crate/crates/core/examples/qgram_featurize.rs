//! Featurizes two tiny bibliographic record sets with 2-gram Jaccard
//! similarity, with and without token blocking.
//!
//! ```text
//! cargo run --example qgram_featurize
//! ```

use ergan::dataset::{GoldStandard, Record, RecordSet};
use ergan::features::{featurize_all, qgram_jaccard, BlockingSpec, QGramJaccard};

fn records(tag: &str, rows: &[(&str, &str, &str)]) -> RecordSet {
    RecordSet {
        id_column: "id".into(),
        schema: vec!["title".into(), "authors".into()],
        records: rows
            .iter()
            .map(|(id, t, a)| Record {
                id: id.to_string(),
                attributes: vec![t.to_string(), a.to_string()],
            })
            .collect(),
        source_tag: tag.into(),
    }
}

fn main() -> ergan::Result<()> {
    println!("jaccard(\"smith\", \"smyth\") = {:.4}", qgram_jaccard("smith", "smyth", 2));
    println!("jaccard(\"\", \"\")           = {:.4}\n", qgram_jaccard("", "", 2));

    let left = records(
        "acm",
        &[
            ("a1", "Efficient similarity joins", "J. Wang, G. Li"),
            ("a2", "Crowdsourced entity resolution", "S. Das"),
            ("a3", "Adaptive blocking", "M. Bilenko"),
        ],
    );
    let right = records(
        "dblp",
        &[
            ("d1", "Efficient similarity joins for strings", "Jiannan Wang, Guoliang Li"),
            ("d2", "Adaptive blocking: learning to scale up", "Mikhail Bilenko"),
        ],
    );
    let mut gold = GoldStandard::new();
    gold.insert("a1", "d1")?;
    gold.insert("a3", "d2")?;

    let sim = QGramJaccard::default();
    let (all, stats) = featurize_all(&left, Some(&right), Some(&gold), None, &sim)?;
    println!("all pairs: {} of {} ({} matches)", stats.candidate_pairs, stats.full_pairs, stats.matches);
    for x in &all {
        let label = x.real_label.map_or("?".into(), |l| l.to_string());
        println!("  {} {}  title {:.3}  authors {:.3}  {label}", x.pair.0, x.pair.1, x.features[0], x.features[1]);
    }

    let blocking = BlockingSpec::new("title");
    let (blocked, stats) = featurize_all(&left, Some(&right), Some(&gold), Some(&blocking), &sim)?;
    println!(
        "\nblocked on title tokens: {} of {} pairs kept ({} matches)",
        stats.candidate_pairs, stats.full_pairs, stats.matches
    );
    for x in &blocked {
        println!("  {} {}", x.pair.0, x.pair.1);
    }
    Ok(())
}
