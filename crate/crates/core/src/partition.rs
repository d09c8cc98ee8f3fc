//! Partitions stored as sparse multiplicity maps `ℓ → ν_ℓ`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// `λ = (1^{ν_1} 2^{ν_2} …)` with cached weight `N_λ = Σ ℓ ν_ℓ`.
///
/// Zero multiplicities are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr")]
pub struct Partition {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

#[derive(Deserialize)]
struct PartitionRepr {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = Error;
    fn try_from(repr: PartitionRepr) -> Result<Self> {
        let p = Partition::from_counts(repr.counts)?;
        if p.total != repr.total {
            return Err(domain(format!(
                "partition total {} does not match counts (sum {})",
                repr.total, p.total
            )));
        }
        Ok(p)
    }
}

impl Partition {
    pub fn empty() -> Self {
        Self::default()
    }

    /// From `(ℓ, ν_ℓ)` pairs; zero multiplicities are dropped, zero parts rejected.
    pub fn from_counts<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Result<Self> {
        let mut p = Partition::empty();
        for (part, mult) in pairs {
            p.add(part, mult)?;
        }
        Ok(p)
    }

    /// From a list of parts in any order.
    pub fn from_parts(parts: &[u64]) -> Result<Self> {
        Self::from_counts(parts.iter().map(|&l| (l, 1)))
    }

    /// Adds `mult` copies of `part`.
    pub fn add(&mut self, part: u64, mult: u64) -> Result<()> {
        if part == 0 {
            return Err(domain("part sizes must be positive"));
        }
        if mult == 0 {
            return Ok(());
        }
        let weight = part
            .checked_mul(mult)
            .and_then(|w| w.checked_add(self.total))
            .ok_or_else(|| domain("partition weight overflows u64"))?;
        *self.counts.entry(part).or_insert(0) += mult;
        self.total = weight;
        Ok(())
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    /// `N_λ`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of parts, `Σ ν_ℓ`.
    pub fn num_parts(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn multiplicity(&self, part: u64) -> u64 {
        self.counts.get(&part).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// All parts distinct.
    pub fn is_strict(&self) -> bool {
        self.counts.values().all(|&m| m == 1)
    }

    pub fn largest_part(&self) -> Option<u64> {
        self.counts.keys().next_back().copied()
    }

    /// Parts in non-increasing order.
    pub fn parts(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.num_parts() as usize);
        for (&l, &m) in self.counts.iter().rev() {
            out.extend(std::iter::repeat(l).take(m as usize));
        }
        out
    }

    /// `c(λ) = Π c_{ν_ℓ}` given `c = [c_0, c_1, …]`.
    pub fn weight(&self, c: &[f64]) -> Result<f64> {
        let mut w = 1.0;
        for &m in self.counts.values() {
            let cm = c
                .get(m as usize)
                .ok_or_else(|| domain(format!("coefficient c_{m} not available")))?;
            w *= cm;
        }
        Ok(w)
    }

    /// Validates the cached total against the counts.
    pub fn check(&self) -> bool {
        self.counts.values().all(|&m| m > 0)
            && self.counts.iter().map(|(l, m)| l * m).sum::<u64>() == self.total
    }
}

/// Compact text `1^2 2^3 4^1`; the empty partition prints as `∅`.
impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.counts.is_empty() {
            return write!(f, "∅");
        }
        let mut first = true;
        for (l, m) in &self.counts {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{l}^{m}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Partition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "∅" {
            return Ok(Partition::empty());
        }
        let mut p = Partition::empty();
        for token in s.split_whitespace() {
            let (l, m) = token
                .split_once('^')
                .ok_or_else(|| domain(format!("expected part^multiplicity, got {token:?}")))?;
            let l: u64 = l.parse().map_err(|_| domain(format!("bad part in {token:?}")))?;
            let m: u64 = m.parse().map_err(|_| domain(format!("bad multiplicity in {token:?}")))?;
            p.add(l, m)?;
        }
        Ok(p)
    }
}

/// All partitions of `n`, each as a [`Partition`], in reverse lexicographic
/// order of their part lists.
pub fn enumerate_partitions(n: u64) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut parts = Vec::new();
    fn rec(remaining: u64, max: u64, parts: &mut Vec<u64>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition::from_parts(parts).expect("positive parts"));
            return;
        }
        for l in (1..=max.min(remaining)).rev() {
            parts.push(l);
            rec(remaining - l, l, parts, out);
            parts.pop();
        }
    }
    rec(n, n, &mut parts, &mut out);
    out
}
