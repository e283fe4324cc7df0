use crate::error::{Error, Result};

/// Probability that `d` servers sampled without replacement from `n` all fall
/// in a fixed subset of `n x` servers:
/// `prod_{i<d} ((x - i/n) / (1 - i/n))^+`. For integer `n x` this is
/// `C(nx, d) / C(n, d)`.
pub fn beta_n(x: f64, n: u64, d: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("beta_n needs x in [0, 1], got {x}")));
    }
    if d == 0 || d > n {
        return Err(Error::Domain(format!(
            "beta_n needs 1 <= d <= n, got n = {n}, d = {d}"
        )));
    }
    let nf = n as f64;
    let mut log = 0.0;
    for i in 0..d {
        let shift = i as f64 / nf;
        let num = x - shift;
        if num <= 0.0 {
            return Ok(0.0);
        }
        log += (num / (1.0 - shift)).ln();
    }
    Ok(log.exp())
}

/// `beta_n(k / n)` for every `k = 0..=n`, as used by the routing step.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTable {
    n: u64,
    d: u64,
    values: Vec<f64>,
}

impl BetaTable {
    pub fn new(n: u64, d: u64) -> Result<Self> {
        if d == 0 || d > n {
            return Err(Error::Domain(format!(
                "need 1 <= d <= n, got n = {n}, d = {d}"
            )));
        }
        let mut values = vec![0.0; n as usize + 1];
        // ln beta(d / n) = -ln C(n, d); then beta(k) / beta(k - 1) = k / (k - d).
        let mut log: f64 = (0..d).map(|i| ((d - i) as f64 / (n - i) as f64).ln()).sum();
        values[d as usize] = log.exp();
        for k in d + 1..=n {
            log += (k as f64).ln() - ((k - d) as f64).ln();
            values[k as usize] = log.exp();
        }
        values[n as usize] = 1.0;
        Ok(Self { n, d, values })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    /// `beta_n(k / n)`.
    #[inline]
    pub fn get(&self, k: u64) -> f64 {
        self.values[k as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> u128 {
        if k > n {
            return 0;
        }
        let k = k.min(n - k);
        (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
    }

    #[test]
    fn examples() {
        assert_eq!(beta_n(1.0, 7, 3).unwrap(), 1.0);
        let v = beta_n(0.5, 4, 2).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
        assert!((binom(2, 2) as f64 / binom(4, 2) as f64 - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(beta_n(0.1, 10, 3).unwrap(), 0.0);
        assert!(beta_n(1.1, 10, 3).is_err());
        assert!(beta_n(0.5, 10, 11).is_err());
        assert!(beta_n(0.5, 10, 0).is_err());
    }

    #[test]
    fn table_matches_binomial_ratio() {
        for n in [1u64, 2, 5, 17, 30] {
            for d in 1..=n {
                let table = BetaTable::new(n, d).unwrap();
                for k in 0..=n {
                    let exact = binom(k, d) as f64 / binom(n, d) as f64;
                    assert!((table.get(k) - exact).abs() <= 1e-12, "n={n} d={d} k={k}");
                }
            }
        }
    }

    #[test]
    fn table_large_n_is_monotone() {
        let t = BetaTable::new(10_000, 100).unwrap();
        assert!((1..=10_000).all(|k| t.get(k) >= t.get(k - 1)));
        assert_eq!(t.get(10_000), 1.0);
        let direct = beta_n(0.9, 10_000, 100).unwrap();
        assert!((t.get(9_000) - direct).abs() <= 1e-12 * direct.max(1e-300) + 1e-18);
    }
}
