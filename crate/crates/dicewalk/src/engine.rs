//! The round-by-round process: convolve the survivor polynomial with the die
//! PGF, split off the terms that hit the target class, and accumulate exact
//! raw moments of duration and final location.
//!
//! All probabilities after `k` rolls are integer multiples of `1/W^k`; the
//! accumulators therefore stay in scaled-integer form (`A <- A*W + term`) and
//! only become rationals at reporting time.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::polyring::{DieSpec, ScaledPoly};
use crate::predicates::{build_sieve, is_hit, FactorSieve, PredicateSpec};

/// When to stop stepping the process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopRule {
    /// Run exactly `R` rounds.
    FixedRounds(u32),
    /// Run until the survivor mass drops to `eps` or below (exact rational
    /// comparison), giving up after `r_max` rounds.
    TailTarget { eps: BigRational, r_max: u32 },
}

/// A complete description of one game: die, target class, starting sum, and
/// stop rule.
#[derive(Debug, Clone)]
pub struct GameSpec {
    die: DieSpec,
    pred: PredicateSpec,
    init: u64,
    stop: StopRule,
    allow_trivial_start: bool,
}

impl GameSpec {
    pub fn new(die: DieSpec, pred: PredicateSpec, init: u64, stop: StopRule) -> Result<Self> {
        pred.validate()?;
        match &stop {
            StopRule::FixedRounds(r) => {
                if *r == 0 {
                    return Err(Error::invalid("fixed round count must be >= 1"));
                }
            }
            StopRule::TailTarget { eps, r_max } => {
                if !eps.is_positive() || *eps >= BigRational::one() {
                    return Err(Error::invalid("tail target eps must lie in (0, 1)"));
                }
                if *r_max == 0 {
                    return Err(Error::invalid("tail target r_max must be >= 1"));
                }
            }
        }
        Ok(GameSpec {
            die,
            pred,
            init,
            stop,
            allow_trivial_start: false,
        })
    }

    /// Accept a starting sum that already satisfies the predicate; the game
    /// then has duration 0 and a degenerate trace.
    pub fn with_allow_trivial_start(mut self, allow: bool) -> Self {
        self.allow_trivial_start = allow;
        self
    }

    pub fn die(&self) -> &DieSpec {
        &self.die
    }

    pub fn pred(&self) -> PredicateSpec {
        self.pred
    }

    pub fn init(&self) -> u64 {
        self.init
    }

    pub fn stop(&self) -> &StopRule {
        &self.stop
    }

    pub fn allow_trivial_start(&self) -> bool {
        self.allow_trivial_start
    }

    fn round_hint(&self) -> u32 {
        match &self.stop {
            StopRule::FixedRounds(r) => *r,
            StopRule::TailTarget { r_max, .. } => *r_max,
        }
    }
}

/// Exact per-round aggregates: the numerators of `N_k(1)`, `sum_n n q(k,n)`
/// and `sum_n n^2 q(k,n)`, all over the implicit denominator `W^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub k: u32,
    pub hit_mass_num: BigUint,
    pub loc1_num: BigUint,
    pub loc2_num: BigUint,
}

/// The result of running a game: per-round records plus exact running
/// accumulators for every tracked raw moment, all over `W^rounds_run`.
#[derive(Debug, Clone)]
pub struct Trace {
    spec: GameSpec,
    rounds: Vec<RoundRecord>,
    rounds_run: u32,
    base: u64,
    base_pow: BigUint,
    survivor_num: BigUint,
    dur_raw_num: [BigUint; 5],
    loc1_raw_num: BigUint,
    loc2_raw_num: BigUint,
    cross_raw_num: BigUint,
    converged: bool,
}

impl Trace {
    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    /// Rounds actually executed (`R`).
    pub fn rounds_run(&self) -> u32 {
        self.rounds_run
    }

    /// False only for a tail-target run that gave up at `r_max`.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// The die's total weight `W`.
    pub fn base(&self) -> u64 {
        self.base
    }

    /// Survivor mass `S_R(1)`, exact.
    pub fn survivor_mass(&self) -> BigRational {
        BigRational::new(
            self.survivor_num.clone().into(),
            self.base_pow.clone().into(),
        )
    }

    /// Probability of finishing within `R` rounds (`a_R`), exact.
    pub fn absorbed_mass(&self) -> BigRational {
        BigRational::new(
            self.dur_raw_num[0].clone().into(),
            self.base_pow.clone().into(),
        )
    }

    /// Numerator of `sum_k k^j m0_k` over `W^R`, for `j = 0..=4`.
    pub fn dur_raw_num(&self, j: usize) -> &BigUint {
        &self.dur_raw_num[j]
    }

    /// Numerator of `sum_k m1_k` over `W^R` (`m1_k = sum_n n q(k,n)`).
    pub fn loc1_raw_num(&self) -> &BigUint {
        &self.loc1_raw_num
    }

    /// Numerator of `sum_k m2_k` over `W^R`.
    pub fn loc2_raw_num(&self) -> &BigUint {
        &self.loc2_raw_num
    }

    /// Numerator of `sum_k k m1_k` over `W^R`.
    pub fn cross_raw_num(&self) -> &BigUint {
        &self.cross_raw_num
    }

    /// Unconditional partial expectation `sum_{k<=R} k m0_k`, exact.
    pub fn partial_expected_duration(&self) -> BigRational {
        BigRational::new(
            self.dur_raw_num[1].clone().into(),
            self.base_pow.clone().into(),
        )
    }
}

/// The incremental engine: one instance steps a single game forward round by
/// round, so tail searches and round-doubling estimates reuse all work done
/// for smaller `R`.
#[derive(Debug)]
pub struct Runner {
    spec: GameSpec,
    base: u64,
    min_face: u64,
    max_face: u64,
    sieve: FactorSieve,
    hit_table: Vec<bool>,
    table_hi: u64,
    surv_lo: u64,
    surv: Vec<BigUint>,
    k: u32,
    base_pow: BigUint,
    dur_acc: [BigUint; 5],
    loc1_acc: BigUint,
    loc2_acc: BigUint,
    cross_acc: BigUint,
    rounds: Vec<RoundRecord>,
}

impl Runner {
    /// Prepares a runner, sizing the sieve to `init + maxface * R_bound` from
    /// the spec's stop rule. Refuses a starting sum that already satisfies
    /// the predicate unless the spec allows a trivial start.
    pub fn new(spec: &GameSpec) -> Result<Self> {
        Runner::with_round_hint(spec, spec.round_hint())
    }

    /// As [`Runner::new`] with an explicit sieve-sizing hint; the runner can
    /// still step past the hint (the tables grow geometrically on demand).
    pub fn with_round_hint(spec: &GameSpec, round_hint: u32) -> Result<Self> {
        let die = spec.die();
        let base = die.total_weight();
        let init = spec.init();
        let (sieve, hit_table, table_hi) =
            build_tables(spec, reachable_hi(spec, round_hint.max(1))?)?;

        let trivial = hit_table[0];
        if trivial && !spec.allow_trivial_start() {
            return Err(Error::TrivialStart { init });
        }
        let mut runner = Runner {
            spec: spec.clone(),
            base,
            min_face: die.min_face(),
            max_face: die.max_face(),
            sieve,
            hit_table,
            table_hi,
            surv_lo: init,
            surv: vec![BigUint::one()],
            k: 0,
            base_pow: BigUint::one(),
            dur_acc: [
                BigUint::zero(),
                BigUint::zero(),
                BigUint::zero(),
                BigUint::zero(),
                BigUint::zero(),
            ],
            loc1_acc: BigUint::zero(),
            loc2_acc: BigUint::zero(),
            cross_acc: BigUint::zero(),
            rounds: Vec::new(),
        };
        if trivial {
            // Duration 0: all mass absorbed at the starting sum.
            runner.surv.clear();
            runner.dur_acc[0] = BigUint::one();
            runner.loc1_acc = BigUint::from(init);
            runner.loc2_acc = BigUint::from(init) * init;
        }
        Ok(runner)
    }

    pub fn rounds_run(&self) -> u32 {
        self.k
    }

    /// Advances one round, discarding the inductee polynomial.
    pub fn step(&mut self) -> Result<()> {
        self.step_impl(false)?;
        Ok(())
    }

    /// Advances one round and returns the inductee polynomial `N_k` (the
    /// probability mass that finishes exactly at this round, by location).
    pub fn step_with_poly(&mut self) -> Result<ScaledPoly> {
        Ok(self
            .step_impl(true)?
            .expect("inductee polynomial requested"))
    }

    fn step_impl(&mut self, want_poly: bool) -> Result<Option<ScaledPoly>> {
        let k_next = self.k + 1;
        self.ensure_window(reachable_hi(&self.spec, k_next)?)?;

        // Shift-multiply-accumulate convolution with the die PGF: one
        // big-integer multiply-add per face per coefficient.
        let width = (self.max_face - self.min_face) as usize;
        let new_lo = self.surv_lo + self.min_face;
        let mut product = if self.surv.is_empty() {
            Vec::new()
        } else {
            vec![BigUint::zero(); self.surv.len() + width]
        };
        for &(value, weight) in self.spec.die().faces() {
            let offset = (value - self.min_face) as usize;
            if weight == 1 {
                for (j, c) in self.surv.iter().enumerate() {
                    product[offset + j] += c;
                }
            } else {
                for (j, c) in self.surv.iter().enumerate() {
                    if !c.is_zero() {
                        product[offset + j] += c * weight;
                    }
                }
            }
        }

        // Split off the hits, folding them straight into the round sums.
        let init = self.spec.init();
        let mut m0 = BigUint::zero();
        let mut m1 = BigUint::zero();
        let mut m2 = BigUint::zero();
        let mut poly_terms: Vec<(u64, BigUint)> = Vec::new();
        for (j, c) in product.iter_mut().enumerate() {
            if c.is_zero() {
                continue;
            }
            let n = new_lo + j as u64;
            if self.hit_table[(n - init) as usize] {
                let c = std::mem::take(c);
                m0 += &c;
                let cn = &c * n;
                m2 += &cn * n;
                m1 += cn;
                if want_poly {
                    poly_terms.push((n, c));
                }
            }
        }

        // A <- A*W + this round's numerator keeps every accumulator an
        // integer over W^k without per-round GCD work.
        self.base_pow *= self.base;
        let k_wide = k_next as u128;
        for (j, acc) in self.dur_acc.iter_mut().enumerate() {
            *acc *= self.base;
            *acc += &m0 * k_wide.pow(j as u32);
        }
        self.loc1_acc *= self.base;
        self.loc1_acc += &m1;
        self.loc2_acc *= self.base;
        self.loc2_acc += &m2;
        self.cross_acc *= self.base;
        self.cross_acc += &m1 * k_wide;

        self.rounds.push(RoundRecord {
            k: k_next,
            hit_mass_num: m0,
            loc1_num: m1,
            loc2_num: m2,
        });

        // Trim the survivor window.
        let leading = product.iter().take_while(|c| c.is_zero()).count();
        if leading == product.len() {
            self.surv = Vec::new();
            self.surv_lo = new_lo;
        } else {
            let trailing = product.iter().rev().take_while(|c| c.is_zero()).count();
            product.truncate(product.len() - trailing);
            product.drain(..leading);
            self.surv = product;
            self.surv_lo = new_lo + leading as u64;
        }
        self.k = k_next;

        debug_assert_eq!(
            self.surv.iter().sum::<BigUint>() + &self.dur_acc[0],
            self.base_pow,
            "mass conservation at round {k_next}"
        );

        Ok(want_poly.then(|| ScaledPoly::from_terms(self.base, k_next, poly_terms)))
    }

    /// Survivor numerator `S_k(1) * W^k`, via conservation.
    fn survivor_num(&self) -> BigUint {
        &self.base_pow - &self.dur_acc[0]
    }

    /// Exact comparison `S_k(1) <= eps`, done on cross-multiplied integers.
    pub fn survivor_at_most(&self, eps: &BigRational) -> bool {
        let num = eps.numer().magnitude();
        let den = eps.denom().magnitude();
        self.survivor_num() * den <= num * &self.base_pow
    }

    /// Conditional mean duration so far: `sum k m0_k / sum m0_k`. The `W^k`
    /// scale cancels, so this is a cheap ratio of two accumulators.
    pub fn conditional_mean_duration(&self) -> Result<BigRational> {
        if self.dur_acc[0].is_zero() {
            return Err(Error::NoHits);
        }
        Ok(BigRational::new(
            self.dur_acc[1].clone().into(),
            self.dur_acc[0].clone().into(),
        ))
    }

    /// Conditional mean absolute final location so far.
    pub fn conditional_mean_location(&self) -> Result<BigRational> {
        if self.dur_acc[0].is_zero() {
            return Err(Error::NoHits);
        }
        Ok(BigRational::new(
            self.loc1_acc.clone().into(),
            self.dur_acc[0].clone().into(),
        ))
    }

    /// The survivor polynomial `S_k(x)` at the current round.
    pub fn survivor_poly(&self) -> ScaledPoly {
        ScaledPoly::from_terms(
            self.base,
            self.k,
            self.surv
                .iter()
                .enumerate()
                .map(|(j, c)| (self.surv_lo + j as u64, c.clone())),
        )
    }

    /// Snapshot of the trace so far; the runner can keep stepping.
    pub fn trace_snapshot(&self, converged: bool) -> Trace {
        Trace {
            spec: self.spec.clone(),
            rounds: self.rounds.clone(),
            rounds_run: self.k,
            base: self.base,
            base_pow: self.base_pow.clone(),
            survivor_num: self.survivor_num(),
            dur_raw_num: self.dur_acc.clone(),
            loc1_raw_num: self.loc1_acc.clone(),
            loc2_raw_num: self.loc2_acc.clone(),
            cross_raw_num: self.cross_acc.clone(),
            converged,
        }
    }

    fn into_trace(self, converged: bool) -> Trace {
        Trace {
            survivor_num: self.survivor_num(),
            spec: self.spec,
            rounds: self.rounds,
            rounds_run: self.k,
            base: self.base,
            base_pow: self.base_pow,
            dur_raw_num: self.dur_acc,
            loc1_raw_num: self.loc1_acc,
            loc2_raw_num: self.loc2_acc,
            cross_raw_num: self.cross_acc,
            converged,
        }
    }

    fn ensure_window(&mut self, max_n: u64) -> Result<()> {
        if max_n <= self.table_hi {
            return Ok(());
        }
        // Geometric growth keeps rebuild cost amortized across a doubling
        // search.
        let init = self.spec.init();
        let doubled = init
            .checked_add((self.table_hi - init) * 2)
            .unwrap_or(max_n);
        let target = max_n.max(doubled);
        let (sieve, hit_table, table_hi) = build_tables(&self.spec, target)?;
        self.sieve = sieve;
        self.hit_table = hit_table;
        self.table_hi = table_hi;
        Ok(())
    }
}

/// Largest sum reachable in `rounds` rounds, with overflow and size guards.
/// The membership table spans `[init, hi]`, so only the span (not `init`)
/// is bounded; huge starting sums are fine for sieve-free predicates.
pub(crate) fn reachable_hi(spec: &GameSpec, rounds: u32) -> Result<u64> {
    const MAX_SPAN: u64 = 1 << 31;
    let span = spec
        .die()
        .max_face()
        .checked_mul(rounds as u64)
        .filter(|s| *s <= MAX_SPAN)
        .ok_or_else(|| {
            Error::invalid(format!(
                "reachable window of {} rounds with max face {} is too large",
                rounds,
                spec.die().max_face()
            ))
        })?;
    spec.init()
        .checked_add(span)
        .ok_or_else(|| Error::invalid("reachable sum overflows u64"))
}

/// Sieve plus precomputed membership table for every reachable sum in
/// `[init, table_hi]`.
pub(crate) fn build_tables(
    spec: &GameSpec,
    table_hi: u64,
) -> Result<(FactorSieve, Vec<bool>, u64)> {
    let sieve = if spec.pred().needs_sieve() {
        build_sieve(table_hi.max(2))?
    } else {
        build_sieve(2)?
    };
    let init = spec.init();
    let mut hit_table = Vec::with_capacity((table_hi - init + 1) as usize);
    for n in init..=table_hi {
        hit_table.push(is_hit(n, spec.pred(), &sieve)?);
    }
    Ok((sieve, hit_table, table_hi))
}

/// Runs the game to its stop rule. Under a tail target the trace's
/// `converged` flag records whether the target was met within `r_max`;
/// games that cannot terminate are data, not crashes.
pub fn run(spec: &GameSpec) -> Result<Trace> {
    let mut runner = Runner::new(spec)?;
    match spec.stop().clone() {
        StopRule::FixedRounds(r) => {
            for _ in 0..r {
                runner.step()?;
            }
            Ok(runner.into_trace(true))
        }
        StopRule::TailTarget { eps, r_max } => loop {
            if runner.survivor_at_most(&eps) {
                return Ok(runner.into_trace(true));
            }
            if runner.rounds_run() >= r_max {
                return Ok(runner.into_trace(false));
            }
            runner.step()?;
        },
    }
}

/// The truncated bivariate PGF in explicit form: the inductee polynomial
/// `N_k` for each round `k = 1..=r`.
pub fn truncated_pgf(spec: &GameSpec, r: u32) -> Result<Vec<(u32, ScaledPoly)>> {
    if r == 0 {
        return Err(Error::invalid("round count must be >= 1"));
    }
    let mut runner = Runner::with_round_hint(spec, r)?;
    let mut out = Vec::with_capacity(r as usize);
    for k in 1..=r {
        out.push((k, runner.step_with_poly()?));
    }
    Ok(out)
}

/// Outcome of a guarantee search.
#[derive(Debug, Clone, PartialEq)]
pub enum Guarantee {
    /// `rounds` is the smallest `R` with `S_R(1) <= eps`; `survivor` is that
    /// survivor mass.
    Reached { rounds: u32, survivor: BigRational },
    /// The target was not met by `r_max`; carries `S_{r_max}(1)`.
    NotConverged { r_max: u32, survivor: BigRational },
}

/// Smallest `R` such that the survivor mass after `R` rounds is at most
/// `eps`, found with one incremental run. The spec's stop rule is ignored.
pub fn rounds_to_guarantee(spec: &GameSpec, eps: &BigRational, r_max: u32) -> Result<Guarantee> {
    if !eps.is_positive() || *eps >= BigRational::one() {
        return Err(Error::invalid("eps must lie in (0, 1)"));
    }
    if r_max == 0 {
        return Err(Error::invalid("r_max must be >= 1"));
    }
    let mut runner = Runner::with_round_hint(spec, r_max)?;
    loop {
        if runner.survivor_at_most(eps) {
            return Ok(Guarantee::Reached {
                rounds: runner.rounds_run(),
                survivor: runner.trace_snapshot(true).survivor_mass(),
            });
        }
        if runner.rounds_run() >= r_max {
            return Ok(Guarantee::NotConverged {
                r_max,
                survivor: runner.trace_snapshot(false).survivor_mass(),
            });
        }
        runner.step()?;
    }
}

/// Floating-point dynamic-programming backend: propagates survivor
/// probabilities over non-hit sums and returns the expected-duration partial
/// sum `E_K = sum_{k=0}^{K-1} S_k(1)`.
///
/// Rounding here is uncontrolled; the exact engine is authoritative. This
/// exists as an independent cross-check of the exact path.
pub fn dp_reference(spec: &GameSpec, rounds: u32) -> Result<f64> {
    if rounds == 0 {
        return Err(Error::invalid("round count must be >= 1"));
    }
    let die = spec.die();
    let init = spec.init();
    let max_n = reachable_hi(spec, rounds)?;
    let (_, hit_table, _) = build_tables(spec, max_n)?;
    if hit_table[0] && !spec.allow_trivial_start() {
        return Err(Error::TrivialStart { init });
    }

    let w = die.total_weight() as f64;
    let span = (max_n - init + 1) as usize;
    let mut surv = vec![0.0f64; span];
    if !hit_table[0] {
        surv[0] = 1.0;
    }
    let mut expectation = 0.0f64;
    let mut next = vec![0.0f64; span];
    for _ in 1..=rounds {
        // p(k) in the partial sum is the mass surviving k-1 rounds.
        expectation += surv.iter().sum::<f64>();
        next.iter_mut().for_each(|x| *x = 0.0);
        for (j, &p) in surv.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(value, weight) in die.faces() {
                let idx = j + value as usize;
                if idx < span && !hit_table[idx] {
                    next[idx] += p * weight as f64 / w;
                }
            }
        }
        std::mem::swap(&mut surv, &mut next);
    }
    Ok(expectation)
}
