//! Words over the alphabet `{0, 1, ..., r}` indexing iterated Stratonovich
//! integrals. Letter `0` stands for integration against time, letters
//! `1..=r` for the Brownian components.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u16>);

impl MultiIndex {
    /// The empty word.
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(entries: impl Into<Vec<u16>>) -> Self {
        Self(entries.into())
    }

    pub fn entries(&self) -> &[u16] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn zero_count(&self) -> usize {
        self.0.iter().filter(|&&e| e == 0).count()
    }

    /// Length plus number of zero letters: time integrals weigh twice.
    pub fn degree(&self) -> usize {
        self.len() + self.zero_count()
    }

    /// Largest letter, `0` for the empty word.
    pub fn max_letter(&self) -> u16 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn concat(&self, other: &MultiIndex) -> MultiIndex {
        let mut entries = Vec::with_capacity(self.len() + other.len());
        entries.extend_from_slice(&self.0);
        entries.extend_from_slice(&other.0);
        MultiIndex(entries)
    }

    /// Drops the first letter (`-β`); `None` on the empty word.
    pub fn tail(&self) -> Option<MultiIndex> {
        if self.0.is_empty() {
            None
        } else {
            Some(MultiIndex(self.0[1..].to_vec()))
        }
    }
}

impl From<Vec<u16>> for MultiIndex {
    fn from(entries: Vec<u16>) -> Self {
        Self(entries)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "(")?;
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// All words over `{0..=r}` of degree at most `max_degree`, ordered by
/// `(length, entries)`.
pub fn enumerate_degree_set(max_degree: usize, r: u16) -> Vec<MultiIndex> {
    let mut out = vec![MultiIndex::empty()];
    // Words of length L are extensions of words of length L-1; degree grows
    // with every letter, so the frontier empties after at most max_degree rounds.
    let mut frontier = vec![MultiIndex::empty()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for word in &frontier {
            for letter in 0..=r {
                let mut entries = word.0.clone();
                entries.push(letter);
                let candidate = MultiIndex(entries);
                if candidate.degree() <= max_degree {
                    next.push(candidate);
                }
            }
        }
        next.sort();
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Words outside the degree set whose tail lies inside it.
pub fn frontier_set(max_degree: usize, r: u16) -> Vec<MultiIndex> {
    let inner = enumerate_degree_set(max_degree, r);
    let mut out = Vec::new();
    for word in &inner {
        for letter in 0..=r {
            let mut entries = vec![letter];
            entries.extend_from_slice(word.entries());
            let candidate = MultiIndex(entries);
            if candidate.degree() > max_degree {
                out.push(candidate);
            }
        }
    }
    out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    out
}
