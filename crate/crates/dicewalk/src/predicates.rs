//! Membership tests for the number classes a walk can stop on, backed by a
//! smallest-prime-factor sieve sized to the maximum reachable sum.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which class of integers terminates the walk.
///
/// `Odd`, `Even` and `Never` exist for engine tests (parity obstructions,
/// games that cannot end); the interesting targets are the other three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredicateSpec {
    Prime,
    /// Squarefree with exactly `k` distinct prime factors, `k >= 2`.
    /// `k = 2` is a squarefree semiprime.
    DistinctPrimeProduct(u32),
    PerfectSquare,
    Odd,
    Even,
    Never,
}

impl PredicateSpec {
    /// Rejects `DistinctPrimeProduct(k)` with `k < 2`.
    pub fn validate(&self) -> Result<()> {
        match self {
            PredicateSpec::DistinctPrimeProduct(k) if *k < 2 => Err(Error::invalid(format!(
                "distinct-prime-product requires k >= 2, got {k}"
            ))),
            _ => Ok(()),
        }
    }

    /// True when deciding membership needs a factorization sieve.
    pub fn needs_sieve(&self) -> bool {
        matches!(
            self,
            PredicateSpec::Prime | PredicateSpec::DistinctPrimeProduct(_)
        )
    }
}

impl fmt::Display for PredicateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateSpec::Prime => write!(f, "prime"),
            PredicateSpec::DistinctPrimeProduct(k) => write!(f, "distinct-prime-product:{k}"),
            PredicateSpec::PerfectSquare => write!(f, "perfect-square"),
            PredicateSpec::Odd => write!(f, "odd"),
            PredicateSpec::Even => write!(f, "even"),
            PredicateSpec::Never => write!(f, "never"),
        }
    }
}

impl FromStr for PredicateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let pred = match s {
            "prime" => PredicateSpec::Prime,
            "semiprime" => PredicateSpec::DistinctPrimeProduct(2),
            "perfect-square" => PredicateSpec::PerfectSquare,
            "odd" => PredicateSpec::Odd,
            "even" => PredicateSpec::Even,
            "never" => PredicateSpec::Never,
            _ => match s.strip_prefix("distinct-prime-product:") {
                Some(k) => {
                    let k: u32 = k
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad predicate order in `{s}`")))?;
                    PredicateSpec::DistinctPrimeProduct(k)
                }
                None => return Err(Error::invalid(format!("unknown predicate `{s}`"))),
            },
        };
        pred.validate()?;
        Ok(pred)
    }
}

/// Smallest-prime-factor table over `[2, limit]`.
///
/// `spf(n)` is prime, divides `n`, and equals `n` exactly when `n` is prime.
#[derive(Debug, Clone)]
pub struct FactorSieve {
    limit: u64,
    spf: Vec<u32>,
}

/// Builds a [`FactorSieve`] covering `[2, limit]` with the linear sieve:
/// every composite is struck exactly once, by its smallest prime factor.
pub fn build_sieve(limit: u64) -> Result<FactorSieve> {
    if limit < 2 {
        return Err(Error::invalid(format!(
            "sieve limit must be >= 2, got {limit}"
        )));
    }
    if limit > u32::MAX as u64 {
        return Err(Error::invalid(format!(
            "sieve limit {limit} exceeds the supported maximum {}",
            u32::MAX
        )));
    }
    let n = limit as usize;
    let mut spf = vec![0u32; n + 1];
    let mut primes: Vec<u32> = Vec::new();
    for i in 2..=n {
        if spf[i] == 0 {
            spf[i] = i as u32;
            primes.push(i as u32);
        }
        for &p in &primes {
            let pi = p as usize * i;
            if p > spf[i] || pi > n {
                break;
            }
            spf[pi] = p;
        }
    }
    Ok(FactorSieve { limit, spf })
}

impl FactorSieve {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Smallest prime factor of `n`, for `2 <= n <= limit`.
    pub fn spf(&self, n: u64) -> Result<u64> {
        if n < 2 || n > self.limit {
            return Err(Error::SieveTooSmall {
                n,
                limit: self.limit,
            });
        }
        Ok(self.spf[n as usize] as u64)
    }

    fn is_prime(&self, n: u64) -> Result<bool> {
        if n < 2 {
            return Ok(false);
        }
        Ok(self.spf(n)? == n)
    }

    /// Squarefree with exactly `k` distinct prime factors.
    fn is_distinct_prime_product(&self, n: u64, k: u32) -> Result<bool> {
        if n < 2 {
            return Ok(false);
        }
        if n > self.limit {
            return Err(Error::SieveTooSmall {
                n,
                limit: self.limit,
            });
        }
        let mut m = n as usize;
        let mut count = 0u32;
        while m > 1 {
            let p = self.spf[m] as usize;
            m /= p;
            if m.is_multiple_of(p) {
                return Ok(false); // p^2 divides n
            }
            count += 1;
            if count > k {
                return Ok(false);
            }
        }
        Ok(count == k)
    }
}

fn is_perfect_square(n: u64) -> bool {
    let r = n.isqrt();
    r * r == n
}

/// Does `n` belong to the class `pred` describes?
///
/// Factorization-based predicates require `n <= sieve.limit()`; the others
/// ignore the sieve entirely.
pub fn is_hit(n: u64, pred: PredicateSpec, sieve: &FactorSieve) -> Result<bool> {
    match pred {
        PredicateSpec::Prime => sieve.is_prime(n),
        PredicateSpec::DistinctPrimeProduct(k) => sieve.is_distinct_prime_product(n, k),
        PredicateSpec::PerfectSquare => Ok(is_perfect_square(n)),
        PredicateSpec::Odd => Ok(!n.is_multiple_of(2)),
        PredicateSpec::Even => Ok(n.is_multiple_of(2)),
        PredicateSpec::Never => Ok(false),
    }
}
