//! Indexing of finite symbol words.
//!
//! A word of length `k` over `n` symbols is stored at its lexicographic index
//! with the *first* symbol most significant: `index = w1*n^(k-1) + ... + wk`.
//! Dropping the last symbol is `index / n`; appending symbol `b` is
//! `index * n + b`; prepending symbol `a` to a length-`k` word is
//! `a * n^k + index`.

use crate::{Error, Result};

/// Hard cap on tabulated values per function (keeps everything desk-scale).
pub const MAX_VALUES: usize = 1 << 22;

/// `n^depth` with overflow and size checking.
pub fn word_count(n: usize, depth: usize) -> Result<usize> {
    let mut count: u128 = 1;
    for _ in 0..depth {
        count *= n as u128;
        if count > MAX_VALUES as u128 {
            return Err(Error::DepthOverflow {
                requested: depth,
                values: count,
                max: MAX_VALUES,
            });
        }
    }
    Ok(count as usize)
}

/// Digits of `index` as a word of length `depth` (first symbol first).
pub fn index_to_word(mut index: usize, n: usize, depth: usize) -> Vec<usize> {
    let mut word = vec![0usize; depth];
    for slot in word.iter_mut().rev() {
        *slot = index % n;
        index /= n;
    }
    word
}

#[cfg(test)]
pub fn word_to_index(word: &[usize], n: usize) -> usize {
    word.iter().fold(0, |acc, &s| acc * n + s)
}
