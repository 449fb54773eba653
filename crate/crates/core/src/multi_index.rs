//! Multi-index combinatorics for stochastic Taylor expansions.
//!
//! A multi-index α is a finite sequence over {0, 1}; entry 0 stands for an
//! integration against dt and entry 1 for a Stratonovich integration
//! against ∘dY. Write l(α) for the length and n(α) for the number of
//! zeros. The truncation set of order k and its remainder set are
//!
//! ```text
//! Λ_k    = { α : l(α) + n(α) ≤ k }
//! ℛ(Λ_k) = { β ∉ Λ_k : −β ∈ Λ_k }
//! ```
//!
//! where −β removes the first entry. Members are kept in a canonical
//! order (length first, then lexicographic), so set equality is exact and
//! serialized dumps are deterministic. Enumeration is brute force over
//! {0,1}^≤(k+1); orders in practical use are tiny.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::tol;

/// A finite {0,1} sequence, possibly empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<u8>,
}

impl MultiIndex {
    /// The empty index, the base case of every recursion.
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Builds from raw entries, rejecting anything outside {0,1}.
    pub fn from_slice(entries: &[u8]) -> Result<Self> {
        for &e in entries {
            if e > 1 {
                return Err(Error::InvalidIndexEntry { value: e });
            }
        }
        Ok(Self {
            entries: entries.to_vec(),
        })
    }

    /// l(α).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// n(α), the number of zero entries.
    pub fn zero_count(&self) -> usize {
        self.entries.iter().filter(|&&e| e == 0).count()
    }

    /// l(α) + n(α), the quantity that defines Λ_k membership.
    pub fn weight(&self) -> usize {
        self.len() + self.zero_count()
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn first(&self) -> Option<u8> {
        self.entries.first().copied()
    }

    pub fn last(&self) -> Option<u8> {
        self.entries.last().copied()
    }

    /// −α: drops the first entry.
    pub fn remove_first(&self) -> Result<Self> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        Ok(Self {
            entries: self.entries[1..].to_vec(),
        })
    }

    /// α−: drops the last entry.
    pub fn remove_last(&self) -> Result<Self> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        Ok(Self {
            entries: self.entries[..self.entries.len() - 1].to_vec(),
        })
    }

    /// α ∗ β: α's entries followed by β's.
    pub fn concat(&self, other: &MultiIndex) -> Self {
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        Self { entries }
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    /// Canonical order: by length, then lexicographic.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.entries.cmp(&other.entries))
    }
}

impl fmt::Display for MultiIndex {
    /// Prints as "(1,0,1)"; the empty index prints as "()".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// What a set of multi-indices claims to be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetKind {
    Lambda(usize),
    Remainder(usize),
    Custom,
}

/// An ordered, duplicate-free collection of multi-indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    members: Vec<MultiIndex>,
    kind: SetKind,
}

impl MultiIndexSet {
    /// Builds a custom set: sorts canonically and removes duplicates.
    pub fn from_members(members: Vec<MultiIndex>) -> Self {
        let mut members = members;
        members.sort();
        members.dedup();
        Self {
            members,
            kind: SetKind::Custom,
        }
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.members.iter()
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.members.binary_search(alpha).is_ok()
    }

    /// Set difference, preserving canonical order.
    pub fn difference(&self, other: &MultiIndexSet) -> MultiIndexSet {
        MultiIndexSet {
            members: self
                .members
                .iter()
                .filter(|m| !other.contains(m))
                .cloned()
                .collect(),
            kind: SetKind::Custom,
        }
    }

    /// Set union, re-sorted canonically.
    pub fn union(&self, other: &MultiIndexSet) -> MultiIndexSet {
        let mut members = self.members.clone();
        members.extend(other.members.iter().cloned());
        MultiIndexSet::from_members(members)
    }
}

impl<'a> IntoIterator for &'a MultiIndexSet {
    type Item = &'a MultiIndex;
    type IntoIter = std::slice::Iter<'a, MultiIndex>;
    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

fn enumerate_lengths(max_len: usize, mut keep: impl FnMut(&MultiIndex) -> bool) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for len in 0..=max_len {
        for bits in 0u32..(1u32 << len) {
            let entries: Vec<u8> = (0..len).map(|pos| ((bits >> pos) & 1) as u8).collect();
            let candidate = MultiIndex { entries };
            if keep(&candidate) {
                out.push(candidate);
            }
        }
    }
    out.sort();
    out
}

/// Λ_k = { α : l(α) + n(α) ≤ k }, enumerated over all lengths ≤ k.
pub fn lambda_set(k: usize) -> Result<MultiIndexSet> {
    if k > tol::MAX_SET_ORDER {
        return Err(Error::OrderTooLarge {
            order: k,
            max: tol::MAX_SET_ORDER,
        });
    }
    let members = enumerate_lengths(k, |alpha| alpha.weight() <= k);
    Ok(MultiIndexSet {
        members,
        kind: SetKind::Lambda(k),
    })
}

/// ℛ(Λ_k) = { β ∉ Λ_k : −β ∈ Λ_k }, enumerated over all lengths ≤ k+1.
///
/// Members of −β lie in Λ_k, so l(β) ≤ k+1 bounds the enumeration.
pub fn remainder_set(k: usize) -> Result<MultiIndexSet> {
    if k > tol::MAX_SET_ORDER {
        return Err(Error::OrderTooLarge {
            order: k,
            max: tol::MAX_SET_ORDER,
        });
    }
    let members = enumerate_lengths(k + 1, |beta| {
        !beta.is_empty()
            && beta.weight() > k
            && beta
                .remove_first()
                .map(|tail| tail.weight() <= k)
                .unwrap_or(false)
    });
    Ok(MultiIndexSet {
        members,
        kind: SetKind::Remainder(k),
    })
}
