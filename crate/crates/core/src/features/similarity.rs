/// A per-attribute similarity `f(a, b)` with values in `[0, 1]`.
pub trait AttributeSimilarity {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

impl<F: Fn(&str, &str) -> f64> AttributeSimilarity for F {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        self(a, b)
    }
}

/// Jaccard similarity of character q-gram sets over case-folded strings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QGramJaccard {
    pub q: usize,
    /// Score given when both values are empty.
    pub both_empty: f64,
}

impl Default for QGramJaccard {
    fn default() -> Self {
        Self {
            q: 2,
            both_empty: 1.0,
        }
    }
}

impl QGramJaccard {
    pub fn new(q: usize) -> Self {
        assert!(q >= 1, "q-gram length must be at least 1");
        Self {
            q,
            ..Default::default()
        }
    }
}

impl AttributeSimilarity for QGramJaccard {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let a = a.to_lowercase();
        let b = b.to_lowercase();
        let ga = grams(&a, self.q);
        let gb = grams(&b, self.q);
        match (ga.is_empty(), gb.is_empty()) {
            (true, true) => self.both_empty,
            (true, false) | (false, true) => 0.0,
            _ => {
                let shared = sorted_intersection(&ga, &gb);
                shared as f64 / (ga.len() + gb.len() - shared) as f64
            }
        }
    }
}

/// `q`-gram Jaccard with the default conventions.
pub fn qgram_jaccard(a: &str, b: &str, q: usize) -> f64 {
    QGramJaccard::new(q).similarity(a, b)
}

/// Sorted, deduplicated q-grams. A non-empty string shorter than `q` is its
/// own single gram, so only the empty string has an empty gram set.
fn grams(s: &str, q: usize) -> Vec<&str> {
    let bounds: Vec<usize> = s
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(s.len()))
        .collect();
    let chars = bounds.len() - 1;
    if chars == 0 {
        return Vec::new();
    }
    if chars < q {
        return vec![s];
    }
    let mut out: Vec<&str> = (0..=chars - q).map(|i| &s[bounds[i]..bounds[i + q]]).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn sorted_intersection(a: &[&str], b: &[&str]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
