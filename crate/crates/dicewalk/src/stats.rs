//! Conditional statistics of a finished run — absorbed mass, tail, means,
//! variance, skewness, kurtosis, covariance, correlation — plus controlled
//! decimal rendering of exact rationals.
//!
//! Everything stays rational for as long as possible. Square roots (the
//! sigmas inside skewness and correlation) enter only at rendering time via
//! integer square-root refinement, so any check that can be done on squares
//! is done on squares.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::engine::{GameSpec, Runner, Trace};
use crate::error::{Error, Result};

/// A value of the form `sign(square) * sqrt(|square|)`, kept as its exact
/// signed square. Skewness and correlation are generally irrational, but
/// their squares are rational and exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedSqrt {
    square: BigRational,
}

impl SignedSqrt {
    pub fn from_signed_square(square: BigRational) -> Self {
        SignedSqrt { square }
    }

    /// The exact signed square: negative when the value is negative.
    pub fn signed_square(&self) -> &BigRational {
        &self.square
    }

    pub fn is_negative(&self) -> bool {
        self.square.is_negative()
    }

    /// Correctly rounded decimal rendering of the square root.
    pub fn render(&self, digits: u32) -> String {
        render_sqrt(&self.square, digits)
    }

    /// Truncated (toward zero) decimal rendering of the square root.
    pub fn render_truncated(&self, digits: u32) -> String {
        render_sqrt_with_mode(&self.square, digits, RoundingMode::TruncateTowardZero)
    }

    pub fn to_f64(&self) -> Option<f64> {
        let sq = self.square.to_f64()?;
        Some(sq.signum() * sq.abs().sqrt())
    }
}

/// Conditional statistics of a run truncated at round `R`, all exact.
///
/// Duration moments condition on finishing within `R` rounds; location is
/// the absolute final sum (the starting-point-relative value is derived).
#[derive(Debug, Clone)]
pub struct Summary {
    pub rounds: u32,
    pub init: u64,
    pub converged: bool,
    /// Rendering precision requested at construction (significant digits).
    pub digits: u32,
    /// Probability `a_R` of finishing within `rounds` rounds.
    pub absorbed: BigRational,
    /// `1 - a_R`.
    pub tail: BigRational,
    /// Conditional mean duration `M_R`.
    pub mean_duration: BigRational,
    /// Conditional mean absolute final location `L_R`.
    pub mean_location: BigRational,
    pub var_duration: BigRational,
    /// `mu3 / sigma^3`; `None` when the duration is deterministic.
    pub skew_duration: Option<SignedSqrt>,
    /// `mu4 / sigma^4` (not excess); `None` when the duration is deterministic.
    pub kurt_duration: Option<BigRational>,
    pub var_location: BigRational,
    pub covariance: BigRational,
    /// Pearson correlation of duration and final location; `None` when
    /// either variance vanishes.
    pub correlation: Option<SignedSqrt>,
}

impl Summary {
    /// Final location relative to the starting sum: `L_R - init`.
    pub fn mean_location_relative(&self) -> BigRational {
        &self.mean_location - BigRational::from(BigInt::from(self.init))
    }

    /// All decimal renderings at the summary's digit count.
    pub fn render(&self) -> RenderedSummary {
        let d = self.digits;
        RenderedSummary {
            absorbed: render_decimal(&self.absorbed, d),
            tail: render_decimal(&self.tail, d),
            mean_duration: render_decimal(&self.mean_duration, d),
            mean_location: render_decimal(&self.mean_location, d),
            mean_location_relative: render_decimal(&self.mean_location_relative(), d),
            var_duration: render_decimal(&self.var_duration, d),
            skew_duration: self.skew_duration.as_ref().map(|s| s.render(d)),
            kurt_duration: self.kurt_duration.as_ref().map(|k| render_decimal(k, d)),
            var_location: render_decimal(&self.var_location, d),
            covariance: render_decimal(&self.covariance, d),
            correlation: self.correlation.as_ref().map(|c| c.render(d)),
        }
    }
}

/// The decimal-string view of a [`Summary`]; `None` means undefined (never
/// NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSummary {
    pub absorbed: String,
    pub tail: String,
    pub mean_duration: String,
    pub mean_location: String,
    pub mean_location_relative: String,
    pub var_duration: String,
    pub skew_duration: Option<String>,
    pub kurt_duration: Option<String>,
    pub var_location: String,
    pub covariance: String,
    pub correlation: Option<String>,
}

/// Turns a trace's raw moment accumulators into the conditional statistics.
/// Fails with [`Error::NoHits`] when nothing was ever absorbed.
pub fn summarize(trace: &Trace, digits: u32) -> Result<Summary> {
    if digits == 0 {
        return Err(Error::invalid("digits must be >= 1"));
    }
    let a_num = trace.dur_raw_num(0);
    if a_num.is_zero() {
        return Err(Error::NoHits);
    }

    // Conditional raw moments are ratios of same-scale numerators; the W^R
    // denominators cancel.
    let cond = |num: &BigUint| -> BigRational {
        BigRational::new(BigInt::from(num.clone()), BigInt::from(a_num.clone()))
    };
    let e_t1 = cond(trace.dur_raw_num(1));
    let e_t2 = cond(trace.dur_raw_num(2));
    let e_t3 = cond(trace.dur_raw_num(3));
    let e_t4 = cond(trace.dur_raw_num(4));
    let e_n1 = cond(trace.loc1_raw_num());
    let e_n2 = cond(trace.loc2_raw_num());
    let e_tn = cond(trace.cross_raw_num());

    let int = |n: i64| BigRational::from(BigInt::from(n));
    let mean_t = e_t1;
    let var_t = &e_t2 - &mean_t * &mean_t;
    let mu3 = &e_t3 - int(3) * &mean_t * &e_t2 + int(2) * &mean_t * &mean_t * &mean_t;
    let mu4 = &e_t4 - int(4) * &mean_t * &e_t3 + int(6) * &mean_t * &mean_t * &e_t2
        - int(3) * &mean_t * &mean_t * &mean_t * &mean_t;

    let mean_n = e_n1;
    let var_n = &e_n2 - &mean_n * &mean_n;
    let cov = &e_tn - &mean_t * &mean_n;

    let (skew, kurt) = if var_t.is_zero() {
        (None, None)
    } else {
        let var3 = &var_t * &var_t * &var_t;
        let skew_sq = &mu3 * &mu3 / var3;
        let skew =
            SignedSqrt::from_signed_square(if mu3.is_negative() { -skew_sq } else { skew_sq });
        let kurt = &mu4 / (&var_t * &var_t);
        (Some(skew), Some(kurt))
    };
    let corr = if var_t.is_zero() || var_n.is_zero() {
        None
    } else {
        let corr_sq = &cov * &cov / (&var_t * &var_n);
        Some(SignedSqrt::from_signed_square(if cov.is_negative() {
            -corr_sq
        } else {
            corr_sq
        }))
    };

    let absorbed = trace.absorbed_mass();
    let tail = BigRational::one() - &absorbed;

    Ok(Summary {
        rounds: trace.rounds_run(),
        init: trace.spec().init(),
        converged: trace.converged(),
        digits,
        absorbed,
        tail,
        mean_duration: mean_t,
        mean_location: mean_n,
        var_duration: var_t,
        skew_duration: skew,
        kurt_duration: kurt,
        var_location: var_n,
        covariance: cov,
        correlation: corr,
    })
}

/// Which conditional mean a constant estimation tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantTarget {
    Duration,
    Location,
}

/// Result of an agreeing-prefix constant estimation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantEstimate {
    /// Correctly rounded decimal prefix, reliable to the requested digits.
    pub decimal: String,
    /// Smallest `R` whose rendering already agrees with the `2R` rendering.
    pub stable_at: u32,
    /// The largest `R` actually computed (`2 * stable_at`).
    pub confirmed_at: u32,
}

/// Estimates the limiting conditional mean (duration or location) to
/// `digits` significant digits by doubling `R` until the renderings of the
/// mean at `R` and `2R` agree — with one extra guard digit — and returning
/// the stable prefix. One incremental run is reused across all `R`.
///
/// The spec's stop rule is ignored; `r_cap` bounds the search.
pub fn estimate_constant(
    spec: &GameSpec,
    target: ConstantTarget,
    digits: u32,
    r0: u32,
    r_cap: u32,
) -> Result<ConstantEstimate> {
    if digits == 0 {
        return Err(Error::invalid("digits must be >= 1"));
    }
    if r0 == 0 {
        return Err(Error::invalid("r0 must be >= 1"));
    }
    let mut runner = Runner::with_round_hint(spec, r0)?;
    let value = |runner: &Runner| -> Result<BigRational> {
        match target {
            ConstantTarget::Duration => runner.conditional_mean_duration(),
            ConstantTarget::Location => runner.conditional_mean_location(),
        }
    };

    let mut r = r0;
    while runner.rounds_run() < r {
        runner.step()?;
    }
    let mut prev = value(&runner)?;
    loop {
        let doubled = match r.checked_mul(2) {
            Some(d) if d <= r_cap => d,
            _ => {
                return Err(Error::NotConverged {
                    r_max: r_cap,
                    detail: format!(
                        "prefix not stable; last rendering {}",
                        render_decimal(&prev, digits)
                    ),
                })
            }
        };
        while runner.rounds_run() < doubled {
            runner.step()?;
        }
        let cur = value(&runner)?;
        // Agreement must also hold one digit past the reported precision;
        // that guard digit is dropped from the returned prefix.
        if render_decimal(&prev, digits) == render_decimal(&cur, digits)
            && render_decimal(&prev, digits + 1) == render_decimal(&cur, digits + 1)
        {
            return Ok(ConstantEstimate {
                decimal: render_decimal(&cur, digits),
                stable_at: r,
                confirmed_at: doubled,
            });
        }
        prev = cur;
        r = doubled;
    }
}

/// Decimal exponent `e` with `10^e <= x < 10^(e+1)` for positive `x`.
fn decimal_exponent(num: &BigUint, den: &BigUint) -> i64 {
    debug_assert!(!num.is_zero() && !den.is_zero());
    if num >= den {
        let int_part = num / den;
        int_part.to_string().len() as i64 - 1
    } else {
        // x < 1: smallest t with num * 10^t >= den gives e = -t.
        let ten = BigUint::from(10u32);
        let mut scaled = num * &ten;
        let mut t = 1i64;
        while scaled < *den {
            scaled *= &ten;
            t += 1;
        }
        -t
    }
}

fn pow10(exp: u64) -> BigUint {
    BigUint::from(10u32).pow(exp as u32)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RoundingMode {
    HalfEven,
    TruncateTowardZero,
}

fn render_with_mode(x: &BigRational, digits: u32, mode: RoundingMode) -> String {
    assert!(digits >= 1, "digits must be >= 1");
    if x.is_zero() {
        return "0".to_string();
    }
    let negative = x.is_negative();
    let num = x.numer().magnitude();
    let den = x.denom().magnitude();

    let mut e = decimal_exponent(num, den);
    // Round num/den * 10^(digits - 1 - e) to an integer of `digits` digits.
    let shift = digits as i64 - 1 - e;
    let (scaled_num, scaled_den) = if shift >= 0 {
        (num * pow10(shift as u64), den.clone())
    } else {
        (num.clone(), den * pow10((-shift) as u64))
    };
    // The plain/scientific choice follows the value itself, not the rounded
    // mantissa: 9.99e-5 at two digits still prints as 1.0e-4.
    let use_scientific = e <= -5;
    let (mut mantissa, rem) = scaled_num.div_rem(&scaled_den);
    if mode == RoundingMode::HalfEven && !rem.is_zero() {
        let twice = &rem * 2u32;
        let round_up = match twice.cmp(&scaled_den) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => mantissa.is_odd(),
        };
        if round_up {
            mantissa += 1u32;
        }
    }
    // Rounding can carry all the way over (e.g. 0.9996 -> 1.00).
    if mantissa == pow10(digits as u64) {
        mantissa = pow10(digits as u64 - 1);
        e += 1;
    }
    let body = mantissa.to_string();
    debug_assert_eq!(body.len(), digits as usize);

    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if use_scientific {
        // Scientific notation for |x| < 10^-4.
        out.push_str(&body[..1]);
        if body.len() > 1 {
            out.push('.');
            out.push_str(&body[1..]);
        }
        out.push('e');
        out.push_str(&e.to_string());
    } else if e < 0 {
        out.push_str("0.");
        for _ in 0..(-e - 1) {
            out.push('0');
        }
        out.push_str(&body);
    } else if (e as usize) + 1 >= body.len() {
        out.push_str(&body);
        for _ in 0..(e as usize + 1 - body.len()) {
            out.push('0');
        }
    } else {
        out.push_str(&body[..e as usize + 1]);
        out.push('.');
        out.push_str(&body[e as usize + 1..]);
    }
    out
}

/// Correctly rounded (round-half-even) decimal string with `digits`
/// significant digits; scientific notation for `|x| < 10^-4`.
pub fn render_decimal(x: &BigRational, digits: u32) -> String {
    render_with_mode(x, digits, RoundingMode::HalfEven)
}

/// As [`render_decimal`] but truncating toward zero instead of rounding.
/// Useful when comparing against published digit strings that may be either
/// truncated or rounded.
pub fn render_decimal_truncated(x: &BigRational, digits: u32) -> String {
    render_with_mode(x, digits, RoundingMode::TruncateTowardZero)
}

/// Correctly rounded decimal rendering of `sign(square) * sqrt(|square|)`.
pub fn render_sqrt(square: &BigRational, digits: u32) -> String {
    render_sqrt_with_mode(square, digits, RoundingMode::HalfEven)
}

fn render_sqrt_with_mode(square: &BigRational, digits: u32, mode: RoundingMode) -> String {
    assert!(digits >= 1, "digits must be >= 1");
    if square.is_zero() {
        return "0".to_string();
    }
    let negative = square.is_negative();
    let num = square.numer().magnitude();
    let den = square.denom().magnitude();

    // Exact square roots take the plain rendering path.
    let num_root = num.sqrt();
    let den_root = den.sqrt();
    if &num_root * &num_root == *num && &den_root * &den_root == *den {
        let exact = BigRational::new(BigInt::from(num_root), BigInt::from(den_root));
        let rendered = render_with_mode(&exact, digits, mode);
        return if negative {
            format!("-{rendered}")
        } else {
            rendered
        };
    }

    // Interval refinement: floor-sqrt of |square| * 10^(2g) encloses the
    // root between lower and lower + 2 at scale 10^g; widen g until both
    // endpoints render identically (rendering is monotone in the value).
    // The root is irrational here, so ties cannot recur forever.
    let mut guard = digits as u64 + 8;
    loop {
        let scaled = num * pow10(2 * guard) / den;
        let lower = scaled.sqrt();
        let upper = &lower + 2u32;
        let scale = BigInt::from(pow10(guard));
        let lo = render_with_mode(
            &BigRational::new(BigInt::from(lower), scale.clone()),
            digits,
            mode,
        );
        let hi = render_with_mode(&BigRational::new(BigInt::from(upper), scale), digits, mode);
        if lo == hi {
            return if negative { format!("-{lo}") } else { lo };
        }
        guard *= 2;
    }
}

/// Parses a plain or scientific decimal string (`-12.5`, `1e-7`, `0.500`)
/// into an exact rational.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let err = || Error::invalid(format!("bad decimal literal `{s}`"));
    let t = s.trim();
    let (mantissa, exp) = match t.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i64>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (mantissa, negative) = match mantissa.strip_prefix('-') {
        Some(rest) => (rest, true),
        None => (mantissa.strip_prefix('+').unwrap_or(mantissa), false),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().map_err(|_| err())?;
    let scale = exp - frac_part.len() as i64;
    let mut value = if scale >= 0 {
        BigRational::from(num * BigInt::from(pow10(scale as u64)))
    } else {
        BigRational::new(num, BigInt::from(pow10((-scale) as u64)))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}
