//! Deterministic encoders that turn symbols and scalars into input SDRs.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::sdr::Sdr;

/// Random fixed-cardinality codes for categorical symbols.
///
/// A symbol's code is drawn from the encoder's seeded stream the first time
/// it is seen and memoized afterwards, so codes depend on the seed and on
/// the order in which new symbols arrive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryEncoder {
    universe_size: usize,
    active_bits: usize,
    symbols: BTreeMap<String, Sdr>,
    rng: SeededRng,
}

impl CategoryEncoder {
    pub fn new(universe_size: usize, active_bits: usize, seed: u64) -> Result<Self> {
        if active_bits == 0 || active_bits > universe_size {
            return Err(Error::Config(vec![format!(
                "category encoder needs 0 < active_bits ({active_bits}) <= universe_size ({universe_size})"
            )]));
        }
        Ok(CategoryEncoder {
            universe_size,
            active_bits,
            symbols: BTreeMap::new(),
            rng: SeededRng::new(seed),
        })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn active_bits(&self) -> usize {
        self.active_bits
    }

    pub fn symbols(&self) -> &BTreeMap<String, Sdr> {
        &self.symbols
    }

    pub fn encode(&mut self, symbol: &str) -> Sdr {
        if let Some(sdr) = self.symbols.get(symbol) {
            return sdr.clone();
        }
        let bits = sample(&mut self.rng, self.universe_size, self.active_bits);
        let sdr = Sdr::new(self.universe_size, bits.into_iter())
            .expect("sampled indices lie inside the universe");
        self.symbols.insert(symbol.to_owned(), sdr.clone());
        sdr
    }

    /// Returns the known symbol whose code overlaps `probe` most.
    pub fn best_match(&self, probe: &Sdr) -> Result<Option<(&str, usize)>> {
        best_match(&self.symbols, probe)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (symbol, sdr) in &self.symbols {
            if sdr.size() != self.universe_size || sdr.cardinality() != self.active_bits {
                return Err(Error::Invariant(format!(
                    "encoding of {symbol:?} does not have {} of {} bits",
                    self.active_bits, self.universe_size
                )));
            }
        }
        Ok(())
    }
}

/// Highest-overlap entry of `table`; ties go to the lexicographically
/// smallest symbol. `None` when the table is empty.
pub fn best_match<'a>(
    table: &'a BTreeMap<String, Sdr>,
    probe: &Sdr,
) -> Result<Option<(&'a str, usize)>> {
    let mut best: Option<(&str, usize)> = None;
    for (symbol, code) in table {
        let overlap = code.overlap(probe)?;
        if best.map_or(true, |(_, b)| overlap > b) {
            best = Some((symbol.as_str(), overlap));
        }
    }
    Ok(best)
}

/// Contiguous-run encoder for bounded scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarEncoder {
    pub min: f64,
    pub max: f64,
    pub universe_size: usize,
    pub active_bits: usize,
}

impl ScalarEncoder {
    pub fn new(min: f64, max: f64, universe_size: usize, active_bits: usize) -> Result<Self> {
        let mut problems = Vec::new();
        if !(min < max) {
            problems.push(format!("scalar encoder needs min ({min}) < max ({max})"));
        }
        if active_bits == 0 || active_bits >= universe_size {
            problems.push(format!(
                "scalar encoder needs 0 < active_bits ({active_bits}) < universe_size ({universe_size})"
            ));
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Ok(ScalarEncoder {
            min,
            max,
            universe_size,
            active_bits,
        })
    }

    /// First bit of the run for `value` (clamped into range).
    pub fn offset(&self, value: f64) -> usize {
        let v = value.clamp(self.min, self.max);
        let span = (self.universe_size - self.active_bits) as f64;
        (((v - self.min) / (self.max - self.min)) * span).floor() as usize
    }

    pub fn encode(&self, value: f64) -> Sdr {
        let start = self.offset(value);
        Sdr::from_sorted(
            self.universe_size,
            (start as u32..(start + self.active_bits) as u32).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_is_memoized_and_fixed_size() {
        let mut enc = CategoryEncoder::new(1024, 20, 3).unwrap();
        let a = enc.encode("A");
        assert_eq!(a.cardinality(), 20);
        assert_eq!(enc.encode("A"), a);
        let b = enc.encode("B");
        assert_eq!(b.cardinality(), 20);
        assert_ne!(a, b);
    }

    #[test]
    fn same_seed_same_codes() {
        let mut e1 = CategoryEncoder::new(512, 10, 11).unwrap();
        let mut e2 = CategoryEncoder::new(512, 10, 11).unwrap();
        for s in ["x", "y", "z"] {
            assert_eq!(e1.encode(s), e2.encode(s));
        }
    }

    #[test]
    fn best_match_examples() {
        let mut enc = CategoryEncoder::new(1024, 20, 5).unwrap();
        for s in ["D", "A", "B", "C"] {
            enc.encode(s);
        }
        let d = enc.encode("D");
        assert_eq!(enc.best_match(&d).unwrap(), Some(("D", 20)));
        assert_eq!(enc.best_match(&Sdr::empty(1024)).unwrap(), Some(("A", 0)));

        let a = enc.encode("A");
        let b = enc.encode("B");
        let both = a.union(&b).unwrap();
        let oa = a.overlap(&both).unwrap();
        let ob = b.overlap(&both).unwrap();
        let expect = if ob > oa { "B" } else { "A" };
        assert_eq!(enc.best_match(&both).unwrap().unwrap().0, expect);

        // Tie between A and B is resolved lexicographically.
        let partial_a: Vec<usize> = a.iter().take(5).collect();
        let partial_b: Vec<usize> = b.iter().filter(|i| !a.contains(*i)).take(5).collect();
        let probe = Sdr::new(1024, partial_a.into_iter().chain(partial_b)).unwrap();
        let oa = a.overlap(&probe).unwrap();
        let ob = b.overlap(&probe).unwrap();
        if oa == ob {
            assert_eq!(enc.best_match(&probe).unwrap().unwrap().0, "A");
        }
    }

    #[test]
    fn best_match_on_empty_table() {
        let enc = CategoryEncoder::new(64, 4, 0).unwrap();
        assert_eq!(enc.best_match(&Sdr::empty(64)).unwrap(), None);
    }

    #[test]
    fn scalar_edges_and_shift() {
        let enc = ScalarEncoder::new(0.0, 100.0, 400, 21).unwrap();
        assert_eq!(enc.encode(0.0).active(), &(0..21).collect::<Vec<u32>>()[..]);
        let top = enc.encode(100.0);
        assert_eq!(*top.active().last().unwrap(), 399);
        assert_eq!(top.cardinality(), 21);
        assert_eq!(enc.encode(-5.0), enc.encode(0.0));
        assert_eq!(enc.encode(250.0), top);

        // Run offsets: floor(v/100 * 379).
        let (v, eps) = (40.0, 1.5);
        let shift = ((v + eps) / 100.0 * 379.0_f64).floor() as usize - (v / 100.0 * 379.0_f64).floor() as usize;
        assert_eq!(shift, 6);
        let o = enc.encode(v).overlap(&enc.encode(v + eps)).unwrap();
        assert_eq!(o, 21 - shift);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CategoryEncoder::new(10, 0, 0).is_err());
        assert!(ScalarEncoder::new(1.0, 1.0, 10, 11).is_err());
    }
}
