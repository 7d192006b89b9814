//! Hashed character n-gram counts for the linear baseline.

use std::collections::BTreeMap;

pub const DEFAULT_HASH_DIM: usize = 1 << 15;

/// 64-bit FNV-1a. Fixed constants, so buckets are stable across runs and
/// platforms.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// All 1-, 2- and 3-grams of `^word$`, with repetitions.
pub fn char_ngrams(word: &str) -> Vec<String> {
    let marked: Vec<char> = std::iter::once('^')
        .chain(word.chars())
        .chain(std::iter::once('$'))
        .collect();
    let mut grams = Vec::new();
    for n in 1..=3 {
        for window in marked.windows(n) {
            grams.push(window.iter().collect());
        }
    }
    grams
}

/// Sparse count vector: `(bucket, count)` pairs sorted by bucket.
pub fn logreg_features(word: &str, hash_dim: usize) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for gram in char_ngrams(word) {
        let bucket = (fnv1a(gram.as_bytes()) % hash_dim as u64) as usize;
        *counts.entry(bucket).or_default() += 1.0;
    }
    counts.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_letter_word_has_nine_grams() {
        let mut grams = char_ngrams("ab");
        grams.sort();
        assert_eq!(grams, ["$", "^", "^a", "^ab", "a", "ab", "ab$", "b", "b$"]);
    }

    #[test]
    fn counts_repeat_grams() {
        // ^asa$: a twice, everything else once.
        let feats = logreg_features("asa", 1 << 20);
        let total: f64 = feats.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 5.0 + 4.0 + 3.0);
        let a = (fnv1a(b"a") % (1 << 20)) as usize;
        assert_eq!(feats.iter().find(|(j, _)| *j == a).unwrap().1, 2.0);
    }

    #[test]
    fn deterministic() {
        assert_eq!(logreg_features("kaallidi", DEFAULT_HASH_DIM), logreg_features("kaallidi", DEFAULT_HASH_DIM));
    }

    #[test]
    fn distinct_unigrams_do_not_collide_here() {
        let a = logreg_features("a", DEFAULT_HASH_DIM);
        let b = logreg_features("b", DEFAULT_HASH_DIM);
        let bucket = |g: &str| (fnv1a(g.as_bytes()) % DEFAULT_HASH_DIM as u64) as usize;
        assert_ne!(bucket("a"), bucket("b"));
        assert!(a.iter().any(|(j, _)| *j == bucket("a")));
        assert!(!b.iter().any(|(j, _)| *j == bucket("a")));
    }

    #[test]
    fn known_fnv_vectors() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
