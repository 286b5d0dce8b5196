//! Exact polynomial arithmetic for the walk: die probability generating
//! functions, convolution, predicate splitting, and location moments.
//!
//! Coefficients are nonnegative big integers with a shared implicit
//! denominator `W^scale`, where `W` is the die's total weight. Every
//! probability after `k` rolls is an integer multiple of `1/W^k`, so this
//! representation needs no per-coefficient GCD work in the convolution loop.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::predicates::{is_hit, FactorSieve, PredicateSpec};

/// A die: face values with positive integer weights. The probability of
/// face `v` is `weight(v) / W` exactly, where `W` is the total weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DieSpec {
    faces: Vec<(u64, u64)>,
    total_weight: u64,
}

impl DieSpec {
    /// A die from `(value, weight)` pairs. Values must be distinct and >= 1
    /// (the running sum strictly increases every roll), weights >= 1.
    pub fn new(mut faces: Vec<(u64, u64)>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::invalid("a die needs at least one face"));
        }
        faces.sort_unstable();
        let mut total_weight: u64 = 0;
        for (i, &(value, weight)) in faces.iter().enumerate() {
            if value == 0 {
                return Err(Error::invalid("face values must be >= 1"));
            }
            if weight == 0 {
                return Err(Error::invalid(format!("face {value} has zero weight")));
            }
            if i > 0 && faces[i - 1].0 == value {
                return Err(Error::invalid(format!("duplicate face value {value}")));
            }
            total_weight = total_weight
                .checked_add(weight)
                .ok_or_else(|| Error::invalid("total weight overflows u64"))?;
        }
        Ok(DieSpec {
            faces,
            total_weight,
        })
    }

    /// The fair `n`-faced die: values `1..=n`, each with weight 1.
    pub fn fair(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("a fair die needs at least one face"));
        }
        DieSpec::new((1..=n).map(|v| (v, 1)).collect())
    }

    /// Faces as `(value, weight)` pairs, sorted by value.
    pub fn faces(&self) -> &[(u64, u64)] {
        &self.faces
    }

    /// Total weight `W`, the common denominator of all per-roll probabilities.
    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn min_face(&self) -> u64 {
        self.faces[0].0
    }

    pub fn max_face(&self) -> u64 {
        self.faces[self.faces.len() - 1].0
    }

    /// The die's probability generating function: `sum_v weight(v) x^v` at
    /// scale 1 (denominator `W`).
    pub fn pgf(&self) -> ScaledPoly {
        ScaledPoly::from_terms(
            self.total_weight,
            1,
            self.faces.iter().map(|&(v, w)| (v, BigUint::from(w))),
        )
    }
}

impl fmt::Display for DieSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (v, w)) in self.faces.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}:{w}")?;
        }
        Ok(())
    }
}

impl FromStr for DieSpec {
    type Err = Error;

    /// Parses the CLI die syntax `v1:w1,v2:w2,...`; a bare `v` means weight 1.
    fn from_str(s: &str) -> Result<Self> {
        let mut faces = Vec::new();
        for part in s.split(',') {
            let (v, w) = match part.split_once(':') {
                Some((v, w)) => (v, w),
                None => (part, "1"),
            };
            let value: u64 = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad face value `{v}` in die `{s}`")))?;
            let weight: u64 = w
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad face weight `{w}` in die `{s}`")))?;
            faces.push((value, weight));
        }
        DieSpec::new(faces)
    }
}

/// A polynomial with nonnegative big-integer coefficients over a contiguous
/// exponent window `[lo, lo + coeffs.len())`, representing
/// `(sum_j coeffs[j] x^(lo+j)) / base^scale`.
///
/// Normalized form trims zero coefficients at both ends; interior zeros are
/// kept so the window stays contiguous. The zero polynomial has an empty
/// coefficient list and `lo = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaledPoly {
    lo: u64,
    coeffs: Vec<BigUint>,
    scale: u32,
    base: u64,
}

impl ScaledPoly {
    pub fn zero(base: u64, scale: u32) -> Self {
        ScaledPoly {
            lo: 0,
            coeffs: Vec::new(),
            scale,
            base,
        }
    }

    /// The monomial `x^exponent` at scale 0 (a point mass).
    pub fn monomial(base: u64, exponent: u64) -> Self {
        ScaledPoly {
            lo: exponent,
            coeffs: vec![BigUint::one()],
            scale: 0,
            base,
        }
    }

    /// Builds from `(exponent, coefficient)` terms; missing exponents in
    /// between become zero coefficients.
    pub fn from_terms<I>(base: u64, scale: u32, terms: I) -> Self
    where
        I: IntoIterator<Item = (u64, BigUint)>,
    {
        let mut terms: Vec<(u64, BigUint)> =
            terms.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        if terms.is_empty() {
            return ScaledPoly::zero(base, scale);
        }
        terms.sort_by_key(|&(e, _)| e);
        let lo = terms[0].0;
        let hi = terms[terms.len() - 1].0;
        let mut coeffs = vec![BigUint::zero(); (hi - lo + 1) as usize];
        for (e, c) in terms {
            coeffs[(e - lo) as usize] += c;
        }
        ScaledPoly {
            lo,
            coeffs,
            scale,
            base,
        }
    }

    fn normalize(mut self) -> Self {
        let leading_zeros = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if leading_zeros == self.coeffs.len() {
            return ScaledPoly::zero(self.base, self.scale);
        }
        let trailing_zeros = self.coeffs.iter().rev().take_while(|c| c.is_zero()).count();
        self.coeffs.truncate(self.coeffs.len() - trailing_zeros);
        if leading_zeros > 0 {
            self.coeffs.drain(..leading_zeros);
            self.lo += leading_zeros as u64;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Minimum exponent of the window (0 for the zero polynomial).
    pub fn lo(&self) -> u64 {
        self.lo
    }

    /// Maximum exponent of the window (0 for the zero polynomial).
    pub fn hi(&self) -> u64 {
        if self.coeffs.is_empty() {
            0
        } else {
            self.lo + self.coeffs.len() as u64 - 1
        }
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// The shared denominator base `W`.
    pub fn base(&self) -> u64 {
        self.base
    }

    /// Coefficient numerator of `x^exponent` (zero outside the window).
    pub fn coeff(&self, exponent: u64) -> BigUint {
        if exponent < self.lo {
            return BigUint::zero();
        }
        match self.coeffs.get((exponent - self.lo) as usize) {
            Some(c) => c.clone(),
            None => BigUint::zero(),
        }
    }

    /// Nonzero `(exponent, coefficient)` terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (u64, &BigUint)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(j, c)| (self.lo + j as u64, c))
    }

    /// Sum of all coefficient numerators (the numerator of the evaluation at
    /// `x = 1` over `base^scale`).
    pub fn coeff_sum(&self) -> BigUint {
        let mut acc = BigUint::zero();
        for c in &self.coeffs {
            acc += c;
        }
        acc
    }

    /// Evaluation at `x = 1`: `(sum of coefficients) / base^scale`, exact.
    pub fn mass(&self) -> BigRational {
        ratio_over_power(self.coeff_sum(), self.base, self.scale)
    }

    /// Raw location moment `sum_n n^r coeff(n) / base^scale`, exact.
    /// `r = 0` equals [`ScaledPoly::mass`].
    pub fn location_moment(&self, r: u32) -> BigRational {
        let mut acc = BigUint::zero();
        for (n, c) in self.terms() {
            acc += c * BigUint::from(n).pow(r);
        }
        ratio_over_power(acc, self.base, self.scale)
    }

    /// Exact product polynomial. Both operands must share the same base;
    /// exponents add, scales add.
    pub fn convolve(&self, other: &ScaledPoly) -> Result<ScaledPoly> {
        if self.base != other.base {
            return Err(Error::invalid(format!(
                "convolve over mismatched bases {} and {}",
                self.base, other.base
            )));
        }
        let scale = self.scale + other.scale;
        if self.is_zero() || other.is_zero() {
            return Ok(ScaledPoly::zero(self.base, scale));
        }
        // Iterate the sparser operand on the outside; each of its terms is a
        // shift-multiply-accumulate pass over the denser one.
        let (outer, inner) = if self.terms().count() <= other.terms().count() {
            (self, other)
        } else {
            (other, self)
        };
        let lo = self.lo + other.lo;
        let len = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![BigUint::zero(); len];
        for (exp, c) in outer.terms() {
            let offset = (exp - outer.lo) as usize;
            if c.is_one() {
                for (j, a) in inner.coeffs.iter().enumerate() {
                    coeffs[offset + j] += a;
                }
            } else {
                for (j, a) in inner.coeffs.iter().enumerate() {
                    if !a.is_zero() {
                        coeffs[offset + j] += a * c;
                    }
                }
            }
        }
        Ok(ScaledPoly {
            lo,
            coeffs,
            scale,
            base: self.base,
        }
        .normalize())
    }

    /// Splits into `(hits, survivors)`: terms whose exponent satisfies the
    /// predicate versus the rest. Both halves inherit the scale, and
    /// `hits + survivors` equals the input term by term.
    pub fn split_by_predicate(
        self,
        pred: PredicateSpec,
        sieve: &FactorSieve,
    ) -> Result<(ScaledPoly, ScaledPoly)> {
        let mut hits = vec![BigUint::zero(); self.coeffs.len()];
        let mut survivors = self.coeffs;
        for (j, c) in survivors.iter_mut().enumerate() {
            if c.is_zero() {
                continue;
            }
            if is_hit(self.lo + j as u64, pred, sieve)? {
                hits[j] = std::mem::take(c);
            }
        }
        let hits = ScaledPoly {
            lo: self.lo,
            coeffs: hits,
            scale: self.scale,
            base: self.base,
        };
        let survivors = ScaledPoly {
            lo: self.lo,
            coeffs: survivors,
            scale: self.scale,
            base: self.base,
        };
        Ok((hits.normalize(), survivors.normalize()))
    }

    /// Text form used by the CLI `pgf` command: one line per nonzero term,
    /// `exponent<TAB>numerator<TAB>scale`, increasing exponent order. The
    /// coefficient of each line is `numerator / W^scale`.
    pub fn term_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.terms()
            .map(move |(e, c)| format!("{e}\t{c}\t{}", self.scale))
    }
}

/// Parses one `exponent<TAB>numerator<TAB>scale` line.
pub fn parse_term_line(line: &str) -> Result<(u64, BigUint, u32)> {
    let mut parts = line.split('\t');
    let (Some(e), Some(n), Some(s), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(Error::invalid(format!("bad term line `{line}`")));
    };
    let exponent = e
        .parse::<u64>()
        .map_err(|_| Error::invalid(format!("bad exponent in term line `{line}`")))?;
    let numerator = BigUint::from_str(n)
        .map_err(|_| Error::invalid(format!("bad numerator in term line `{line}`")))?;
    let scale = s
        .parse::<u32>()
        .map_err(|_| Error::invalid(format!("bad scale in term line `{line}`")))?;
    Ok((exponent, numerator, scale))
}

/// `num / base^power` as an exact rational.
pub(crate) fn ratio_over_power(num: BigUint, base: u64, power: u32) -> BigRational {
    BigRational::new(
        BigInt::from(num),
        BigInt::from(BigUint::from(base).pow(power)),
    )
}
