//! Global k-winner-take-all selection.

use std::cmp::Ordering;

use crate::sdr::Sdr;

/// Descending score, then ascending index.
fn rank(scores: &[f64], a: u32, b: u32) -> Ordering {
    scores[b as usize]
        .total_cmp(&scores[a as usize])
        .then(a.cmp(&b))
}

/// Selects the `k` highest-scoring eligible units. Ties go to the lower
/// index. Returns fewer than `k` units when fewer are eligible.
pub fn top_k(scores: &[f64], eligible: &[bool], k: usize) -> Sdr {
    debug_assert_eq!(scores.len(), eligible.len());
    let mut candidates: Vec<u32> = (0..scores.len() as u32)
        .filter(|&i| eligible[i as usize])
        .collect();
    if candidates.len() > k {
        if k == 0 {
            candidates.clear();
        } else {
            candidates.select_nth_unstable_by(k - 1, |&a, &b| rank(scores, a, b));
            candidates.truncate(k);
        }
    }
    candidates.sort_unstable();
    Sdr::from_sorted(scores.len(), candidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_highest_and_breaks_ties_low() {
        let scores = [1.0, 5.0, 3.0, 3.0, 0.5];
        let all = [true; 5];
        assert_eq!(top_k(&scores, &all, 2).active(), &[1, 2]);
        assert_eq!(top_k(&scores, &all, 3).active(), &[1, 2, 3]);
        assert_eq!(top_k(&scores, &all, 0).cardinality(), 0);
    }

    #[test]
    fn respects_eligibility() {
        let scores = [9.0, 5.0, 3.0];
        let elig = [false, true, false];
        assert_eq!(top_k(&scores, &elig, 2).active(), &[1]);
    }

    #[test]
    fn agrees_with_full_sort() {
        let scores: Vec<f64> = (0..500).map(|i| ((i * 37) % 23) as f64).collect();
        let elig: Vec<bool> = (0..500).map(|i| i % 7 != 0).collect();
        let mut order: Vec<u32> = (0..500).filter(|&i| elig[i as usize]).collect();
        order.sort_by(|&a, &b| rank(&scores, a, b));
        let mut expect = order[..40].to_vec();
        expect.sort_unstable();
        assert_eq!(top_k(&scores, &elig, 40).active(), &expect[..]);
    }
}
