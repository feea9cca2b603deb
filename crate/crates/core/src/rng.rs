//! Seeded, resumable random stream.

use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A ChaCha stream whose position can be saved and restored exactly.
///
/// Serialized as `{seed, word_pos}`.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: u64,
    word_pos: String,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    fn restore(seed: u64, word_pos: u128) -> Self {
        let mut rng = SeededRng::new(seed);
        rng.inner.set_word_pos(word_pos);
        rng
    }
}

impl PartialEq for SeededRng {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.word_pos() == other.word_pos()
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.inner.try_fill_bytes(dest)
    }
}

impl Serialize for SeededRng {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RngState {
            seed: self.seed,
            word_pos: self.word_pos().to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SeededRng {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let state = RngState::deserialize(d)?;
        let pos = state
            .word_pos
            .parse::<u128>()
            .map_err(serde::de::Error::custom)?;
        Ok(SeededRng::restore(state.seed, pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn resumes_mid_stream() {
        let mut a = SeededRng::new(7);
        for _ in 0..13 {
            a.gen::<u32>();
        }
        let text = serde_json::to_string(&a).unwrap();
        let mut b: SeededRng = serde_json::from_str(&text).unwrap();
        assert_eq!(a, b);
        let xs: Vec<u64> = (0..20).map(|_| a.gen()).collect();
        let ys: Vec<u64> = (0..20).map(|_| b.gen()).collect();
        assert_eq!(xs, ys);
    }
}
