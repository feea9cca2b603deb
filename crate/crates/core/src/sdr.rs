//! Sparse binary vectors stored as sorted active-index sets.

use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};

/// A sparse binary vector of width `size`.
///
/// Active indices are kept sorted ascending and distinct. The value is
/// immutable once built.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SdrRepr", into = "SdrRepr")]
pub struct Sdr {
    size: usize,
    active: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct SdrRepr {
    universe_size: usize,
    active: Vec<u32>,
}

impl TryFrom<SdrRepr> for Sdr {
    type Error = Error;

    fn try_from(r: SdrRepr) -> Result<Self> {
        if !r.active.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Invariant(
                "SDR indices must be strictly ascending".into(),
            ));
        }
        Sdr::new(r.universe_size, r.active.iter().map(|&i| i as usize))
    }
}

impl From<Sdr> for SdrRepr {
    fn from(s: Sdr) -> Self {
        SdrRepr {
            universe_size: s.size,
            active: s.active,
        }
    }
}

impl fmt::Debug for Sdr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sdr({}; {:?})", self.size, self.active)
    }
}

impl Sdr {
    /// Builds an SDR from arbitrary indices; duplicates are merged.
    pub fn new<I>(size: usize, indices: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut active = Vec::new();
        for index in indices {
            if index >= size {
                return Err(Error::IndexOutOfRange { index, size });
            }
            active.push(index as u32);
        }
        active.sort_unstable();
        active.dedup();
        Ok(Sdr { size, active })
    }

    pub fn empty(size: usize) -> Self {
        Sdr {
            size,
            active: Vec::new(),
        }
    }

    /// Caller guarantees `active` is strictly ascending and in range.
    pub(crate) fn from_sorted(size: usize, active: Vec<u32>) -> Self {
        debug_assert!(active.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(active.last().map_or(true, |&i| (i as usize) < size));
        Sdr { size, active }
    }

    pub fn from_dense(bits: &[bool]) -> Self {
        let active = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i as u32)
            .collect();
        Sdr {
            size: bits.len(),
            active,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().map(|&i| i as usize)
    }

    pub fn cardinality(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.active.binary_search(&(index as u32)).is_ok()
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut bits = vec![false; self.size];
        for &i in &self.active {
            bits[i as usize] = true;
        }
        bits
    }

    /// Number of shared active bits.
    pub fn overlap(&self, other: &Sdr) -> Result<usize> {
        check_width(self.size, other.size)?;
        let (mut a, mut b) = (self.active.iter().peekable(), other.active.iter().peekable());
        let mut n = 0;
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    n += 1;
                    a.next();
                    b.next();
                }
            }
        }
        Ok(n)
    }

    pub fn union(&self, other: &Sdr) -> Result<Sdr> {
        check_width(self.size, other.size)?;
        let mut active = Vec::with_capacity(self.active.len() + other.active.len());
        let (mut i, mut j) = (0, 0);
        while i < self.active.len() && j < other.active.len() {
            let (x, y) = (self.active[i], other.active[j]);
            if x <= y {
                active.push(x);
                i += 1;
                if x == y {
                    j += 1;
                }
            } else {
                active.push(y);
                j += 1;
            }
        }
        active.extend_from_slice(&self.active[i..]);
        active.extend_from_slice(&other.active[j..]);
        Ok(Sdr::from_sorted(self.size, active))
    }

    pub fn intersection(&self, other: &Sdr) -> Result<Sdr> {
        check_width(self.size, other.size)?;
        let active = self
            .active
            .iter()
            .copied()
            .filter(|&i| other.active.binary_search(&i).is_ok())
            .collect();
        Ok(Sdr::from_sorted(self.size, active))
    }

    /// Fraction of active bits. Zero-width SDRs report 0.
    pub fn sparsity(&self) -> f64 {
        if self.size == 0 {
            return 0.0;
        }
        self.active.len() as f64 / self.size as f64
    }

    /// Moves `round(flip_fraction * cardinality)` active bits to uniformly
    /// chosen previously-inactive positions. Deterministic in `seed`.
    ///
    /// If the universe has fewer inactive positions than bits to move, only
    /// that many bits move.
    pub fn flip_noise(&self, flip_fraction: f64, seed: u64) -> Sdr {
        let k = self.active.len();
        let fraction = flip_fraction.clamp(0.0, 1.0);
        let inactive_count = self.size - k;
        let moved = ((fraction * k as f64).round() as usize).min(inactive_count);
        if moved == 0 {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dense = self.to_dense();
        let inactive: Vec<u32> = (0..self.size as u32)
            .filter(|&i| !dense[i as usize])
            .collect();

        let mut keep = vec![true; k];
        for i in sample(&mut rng, k, moved) {
            keep[i] = false;
        }
        let mut active: Vec<u32> = self
            .active
            .iter()
            .zip(&keep)
            .filter(|(_, &kept)| kept)
            .map(|(&i, _)| i)
            .collect();
        active.extend(sample(&mut rng, inactive.len(), moved).into_iter().map(|i| inactive[i]));
        active.sort_unstable();
        Sdr::from_sorted(self.size, active)
    }
}

/// Builds a dense membership mask for fast repeated lookups.
pub(crate) fn dense_mask(sdr: &Sdr) -> Vec<bool> {
    sdr.to_dense()
}
