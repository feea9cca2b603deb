//! Combinatorial capacity of columnar and cellular SDRs, in log10.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Capacity {
    /// log10 C(columns, active).
    pub columnar: f64,
    /// log10 cells^active: distinct contexts for one columnar SDR.
    pub contexts: f64,
    /// log10 of the product of the two.
    pub cellular: f64,
}

/// log10 of the binomial coefficient, via log-gamma.
pub fn log10_binomial(n: u64, k: u64) -> f64 {
    let ln = libm::lgamma(n as f64 + 1.0)
        - libm::lgamma(k as f64 + 1.0)
        - libm::lgamma((n - k) as f64 + 1.0);
    ln / std::f64::consts::LN_10
}

pub fn capacity(columns: u64, active: u64, cells: u64) -> Result<Capacity> {
    if active > columns {
        return Err(Error::Config(vec![format!(
            "active columns ({active}) exceed column count ({columns})"
        )]));
    }
    if cells == 0 {
        return Err(Error::Config(vec!["cells per column must be positive".into()]));
    }
    let columnar = log10_binomial(columns, active);
    let contexts = active as f64 * (cells as f64).log10();
    Ok(Capacity {
        columnar,
        contexts,
        cellular: columnar + contexts,
    })
}

/// Splits `10^log10` into a mantissa in `[1,10)` and an integer exponent.
pub fn mantissa_exponent(log10: f64) -> (f64, i64) {
    let exponent = log10.floor();
    (10f64.powf(log10 - exponent), exponent as i64)
}

/// `m.mmmmm×10^e` with six significant figures.
pub fn scientific(log10: f64) -> String {
    let (mut m, mut e) = mantissa_exponent(log10);
    if format!("{m:.5}").starts_with("10") {
        m /= 10.0;
        e += 1;
    }
    format!("{m:.5}e{e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact-summation oracle: log10 C(n,k) = Σ log10((n−k+i)/i).
    fn oracle_log10_binomial(n: u64, k: u64) -> f64 {
        (1..=k)
            .map(|i| ((n - k + i) as f64).log10() - (i as f64).log10())
            .sum()
    }

    #[test]
    fn matches_summation_oracle() {
        for &(n, k) in &[(10, 3), (64, 32), (2048, 40), (65536, 40), (500, 0)] {
            let a = log10_binomial(n, k);
            let b = oracle_log10_binomial(n, k);
            assert!((a - b).abs() < 1e-9, "{n} {k}: {a} vs {b}");
        }
        assert!((log10_binomial(10, 3) - 120f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn reported_capacity_numbers() {
        let c = capacity(2048, 40, 32).unwrap();
        assert_eq!(scientific(c.columnar), "2.37178e84");
        assert_eq!(scientific(c.contexts), "1.60694e60");
        assert!(scientific(c.cellular).starts_with("3.8113"));
        assert!(capacity(10, 11, 2).is_err());
    }
}
