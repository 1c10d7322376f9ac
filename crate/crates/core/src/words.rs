//! Breadth-first enumeration of word balls in a group.

use std::collections::HashSet;
use std::hash::Hash;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("word ball exceeds the cap of {cap} elements at length {length}")]
pub struct BallTooLarge {
    pub cap: usize,
    pub length: usize,
}

/// A group presented to [`word_ball`]. Elements with equal keys are treated
/// as the same element; the first one found is kept.
pub trait WordModel: Sync {
    type Elem: Clone + Send + Sync;
    type Key: Eq + Hash + Send;

    fn identity(&self) -> Self::Elem;
    fn multiply(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inverse(&self, a: &Self::Elem) -> Self::Elem;
    fn key(&self, a: &Self::Elem) -> Self::Key;
}

/// Distinct elements of the ball, in discovery order.
#[derive(Debug, Clone)]
pub struct WordBall<E> {
    pub elements: Vec<E>,
    /// `layers[l]` is the index in `elements` where words of length `l` start;
    /// the last entry is `elements.len()`.
    pub layers: Vec<usize>,
}

impl<E> WordBall<E> {
    /// Elements first reached by a word of length exactly `l`.
    pub fn layer(&self, l: usize) -> &[E] {
        &self.elements[self.layers[l]..self.layers[l + 1]]
    }

    pub fn max_length(&self) -> usize {
        self.layers.len() - 2
    }

    /// Elements of length at most `l`.
    pub fn up_to(&self, l: usize) -> &[E] {
        &self.elements[..self.layers[l + 1]]
    }
}

const PARALLEL_FRONTIER: usize = 512;

/// All products of at most `max_len` letters from `generators` and their
/// inverses. The result does not depend on thread scheduling.
pub fn word_ball<M: WordModel>(
    model: &M,
    generators: &[M::Elem],
    max_len: usize,
    cap: usize,
) -> Result<WordBall<M::Elem>, BallTooLarge> {
    let mut letters: Vec<M::Elem> = Vec::with_capacity(2 * generators.len());
    let mut letter_keys = HashSet::new();
    for g in generators
        .iter()
        .cloned()
        .chain(generators.iter().map(|g| model.inverse(g)))
    {
        if letter_keys.insert(model.key(&g)) {
            letters.push(g);
        }
    }

    let identity = model.identity();
    let mut seen = HashSet::new();
    seen.insert(model.key(&identity));
    let mut elements = vec![identity];
    let mut layers = vec![0, 1];

    for length in 1..=max_len {
        let frontier = &elements[layers[length - 1]..layers[length]];
        let expand = |w: &M::Elem| -> Vec<(M::Key, M::Elem)> {
            letters
                .iter()
                .map(|s| {
                    let p = model.multiply(w, s);
                    (model.key(&p), p)
                })
                .collect()
        };
        let candidates: Vec<Vec<(M::Key, M::Elem)>> = if frontier.len() >= PARALLEL_FRONTIER {
            frontier.par_iter().map(expand).collect()
        } else {
            frontier.iter().map(expand).collect()
        };
        let mut fresh = Vec::new();
        for (key, elem) in candidates.into_iter().flatten() {
            if seen.insert(key) {
                fresh.push(elem);
            }
        }
        elements.extend(fresh);
        if elements.len() > cap {
            return Err(BallTooLarge { cap, length });
        }
        layers.push(elements.len());
    }
    Ok(WordBall { elements, layers })
}
