//! Direct simulation of the walk with a seeded, platform-independent
//! generator. This is the statistical oracle the exact engine is checked
//! against: empirical conditional statistics must land within a few standard
//! errors of the exact ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{build_tables, reachable_hi, GameSpec};
use crate::error::{Error, Result};

/// Name of the pseudo-random generator, recorded in output metadata so runs
/// stay reproducible across platforms and releases.
pub const GENERATOR_NAME: &str = "chacha8";

/// Trials per RNG stream. Each block derives its own stream from the seed,
/// which makes the result independent of worker scheduling.
const BLOCK_TRIALS: u64 = 1 << 14;

/// Empirical statistics over the trials that terminated within the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub trials: u64,
    pub hits: u64,
    /// `hits / trials`.
    pub hit_fraction: f64,
    /// Mean duration over terminating trials; NaN when nothing terminated.
    pub mean_duration: f64,
    /// Population variance of the duration over terminating trials.
    pub var_duration: f64,
    /// Mean absolute final location over terminating trials.
    pub mean_location: f64,
    pub seed: u64,
}

#[derive(Default, Clone, Copy)]
struct BlockSums {
    hits: u64,
    duration: u128,
    duration_sq: u128,
    location: u128,
}

impl BlockSums {
    fn merge(self, other: BlockSums) -> BlockSums {
        BlockSums {
            hits: self.hits + other.hits,
            duration: self.duration + other.duration,
            duration_sq: self.duration_sq + other.duration_sq,
            location: self.location + other.location,
        }
    }
}

/// Runs `trials` independent games, each truncated at `cap` rounds, using
/// weighted face sampling by integer weights over `W` (one uniform draw in
/// `[0, W)` per roll, no floating-point bias). Statistics are computed over
/// terminating trials only, matching the conditional quantities at `R = cap`.
///
/// Identical `(spec, trials, cap, seed)` give an identical result, whatever
/// the thread count; the spec's stop rule is ignored.
pub fn simulate(spec: &GameSpec, trials: u64, cap: u32, seed: u64) -> Result<SimResult> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    if cap == 0 {
        return Err(Error::invalid("cap must be >= 1"));
    }
    let die = spec.die();
    let init = spec.init();
    let max_n = reachable_hi(spec, cap)?;
    let (_, hit_table, _) = build_tables(spec, max_n)?;
    if hit_table[0] {
        if !spec.allow_trivial_start() {
            return Err(Error::TrivialStart { init });
        }
        // Every trial ends before rolling: duration 0, location init.
        return Ok(SimResult {
            trials,
            hits: trials,
            hit_fraction: 1.0,
            mean_duration: 0.0,
            var_duration: 0.0,
            mean_location: init as f64,
            seed,
        });
    }

    // Cumulative weights for one-draw face sampling.
    let w = die.total_weight();
    let mut lookup: Vec<(u64, u64)> = Vec::with_capacity(die.faces().len());
    let mut cum = 0u64;
    for &(value, weight) in die.faces() {
        cum += weight;
        lookup.push((cum, value));
    }

    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let totals = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let begin = block * BLOCK_TRIALS;
            let end = (begin + BLOCK_TRIALS).min(trials);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block);
            let mut sums = BlockSums::default();
            for _ in begin..end {
                let mut sum = init;
                for round in 1..=cap {
                    let draw = rng.gen_range(0..w);
                    let face = lookup
                        .iter()
                        .find(|&&(cum, _)| draw < cum)
                        .expect("draw below total weight")
                        .1;
                    sum += face;
                    if hit_table[(sum - init) as usize] {
                        sums.hits += 1;
                        sums.duration += round as u128;
                        sums.duration_sq += (round as u128) * (round as u128);
                        sums.location += sum as u128;
                        break;
                    }
                }
            }
            sums
        })
        .reduce(BlockSums::default, BlockSums::merge);

    let hits = totals.hits;
    let (mean_duration, var_duration, mean_location) = if hits == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let n = hits as f64;
        let mean_t = totals.duration as f64 / n;
        let var_t = totals.duration_sq as f64 / n - mean_t * mean_t;
        let mean_n = totals.location as f64 / n;
        (mean_t, var_t.max(0.0), mean_n)
    };
    Ok(SimResult {
        trials,
        hits,
        hit_fraction: hits as f64 / trials as f64,
        mean_duration,
        var_duration,
        mean_location,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, StopRule};
    use crate::polyring::DieSpec;
    use crate::predicates::PredicateSpec;
    use crate::stats::summarize;
    use num_traits::ToPrimitive;

    fn spec(die: DieSpec, pred: PredicateSpec, init: u64) -> GameSpec {
        GameSpec::new(die, pred, init, StopRule::FixedRounds(1)).unwrap()
    }

    #[test]
    fn identical_seeds_reproduce() {
        let spec = spec(DieSpec::fair(6).unwrap(), PredicateSpec::Prime, 0);
        let a = simulate(&spec, 50_000, 100, 42).unwrap();
        let b = simulate(&spec, 50_000, 100, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate(&spec, 50_000, 100, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn thread_count_does_not_change_the_result() {
        let spec = spec(DieSpec::fair(6).unwrap(), PredicateSpec::Prime, 0);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate(&spec, 100_000, 100, 7).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| simulate(&spec, 100_000, 100, 7).unwrap());
        assert_eq!(single, many);
    }

    #[test]
    fn deterministic_walk_statistics() {
        let spec = spec(DieSpec::new(vec![(1, 1)]).unwrap(), PredicateSpec::Prime, 0);
        let result = simulate(&spec, 10_000, 50, 1).unwrap();
        assert_eq!(result.hit_fraction, 1.0);
        assert_eq!(result.mean_duration, 2.0);
        assert_eq!(result.var_duration, 0.0);
        assert_eq!(result.mean_location, 2.0);
    }

    #[test]
    fn parity_obstruction_never_hits() {
        let spec = spec(
            DieSpec::new(vec![(4, 1), (6, 1)]).unwrap(),
            PredicateSpec::Prime,
            0,
        );
        let result = simulate(&spec, 20_000, 100, 5).unwrap();
        assert_eq!(result.hits, 0);
        assert_eq!(result.hit_fraction, 0.0);
        assert!(result.mean_duration.is_nan());
    }

    #[test]
    fn trivial_start_is_refused_then_degenerate() {
        let base = spec(DieSpec::fair(6).unwrap(), PredicateSpec::Prime, 2);
        assert!(matches!(
            simulate(&base, 100, 10, 0),
            Err(Error::TrivialStart { init: 2 })
        ));
        let allowed = base.with_allow_trivial_start(true);
        let result = simulate(&allowed, 100, 10, 0).unwrap();
        assert_eq!(result.hit_fraction, 1.0);
        assert_eq!(result.mean_duration, 0.0);
        assert_eq!(result.mean_location, 2.0);
    }

    #[test]
    fn empirical_mean_tracks_exact_mean() {
        // One generous-seed sanity check; the 20-seed calibration lives in
        // the acceptance suite.
        let game = GameSpec::new(
            DieSpec::fair(6).unwrap(),
            PredicateSpec::Prime,
            0,
            StopRule::FixedRounds(200),
        )
        .unwrap();
        let exact = summarize(&run(&game).unwrap(), 20).unwrap();
        let exact_mean = exact.mean_duration.to_f64().unwrap();
        let exact_var = exact.var_duration.to_f64().unwrap();
        let result = simulate(&game, 200_000, 200, 2024).unwrap();
        let stderr = (exact_var / result.hits as f64).sqrt();
        assert!(
            (result.mean_duration - exact_mean).abs() <= 4.0 * stderr,
            "mean {} vs exact {exact_mean} (4se = {})",
            result.mean_duration,
            4.0 * stderr
        );
    }

    #[test]
    fn loaded_die_tracks_exact_engine() {
        // Exercises the weighted-sampling path against the exact backend.
        let die = DieSpec::new(vec![(1, 10), (2, 1), (3, 1), (4, 1), (5, 1), (6, 1)]).unwrap();
        let game = GameSpec::new(die, PredicateSpec::Prime, 0, StopRule::FixedRounds(200)).unwrap();
        let exact = summarize(&run(&game).unwrap(), 20).unwrap();
        let exact_mean = exact.mean_duration.to_f64().unwrap();
        let exact_var = exact.var_duration.to_f64().unwrap();
        let result = simulate(&game, 100_000, 200, 9).unwrap();
        let stderr = (exact_var / result.hits as f64).sqrt();
        assert!(
            (result.mean_duration - exact_mean).abs() <= 4.0 * stderr,
            "mean {} vs exact {exact_mean}",
            result.mean_duration
        );
        let a = exact.absorbed.to_f64().unwrap();
        let frac_se = (a * (1.0 - a) / result.trials as f64).sqrt();
        assert!((result.hit_fraction - a).abs() <= 4.0 * frac_se.max(1e-9));
    }
}
