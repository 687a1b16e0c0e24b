//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator (a counter-based stream cipher)
//! keyed by a 64-bit seed, with the ChaCha stream id selecting the purpose.
//! Monte Carlo realization `r` uses seed `base_seed + r`, so two purposes or
//! two realizations never share draws, and sequences are identical on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a stream is used for. The discriminant is the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// One-off draws that define a problem instance (link limits, capacities).
    Instance = 1,
    /// Per-slot random states.
    State = 2,
    /// Samples used to build sample-average oracles.
    Oracle = 3,
    /// Random points for property probes and diagnostics.
    Probe = 4,
}

pub fn stream(seed: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Uniform draw on `[lo, hi]`; a degenerate interval returns `lo` exactly.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.gen();
    if hi == lo {
        lo
    } else {
        lo + (hi - lo) * u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = stream(7, Purpose::State);
        let mut b = stream(7, Purpose::State);
        for _ in 0..100 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }

    #[test]
    fn purposes_are_independent_streams() {
        let mut a = stream(7, Purpose::State);
        let mut b = stream(7, Purpose::Oracle);
        let xs: Vec<u64> = (0..8).map(|_| a.gen()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.gen()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn degenerate_interval_is_constant() {
        let mut rng = stream(1, Purpose::Probe);
        for _ in 0..10 {
            assert_eq!(uniform(&mut rng, 3.5, 3.5), 3.5);
        }
    }

    #[test]
    fn frozen_first_draws() {
        const FROZEN: u64 = 6_128_383_831_660_698_443;
        // Guards the generator choice: changing it silently would break
        // reproducibility of every stored experiment.
        let mut rng = stream(0, Purpose::State);
        let first: u64 = rng.gen();
        assert_eq!(first, FROZEN);
    }
}
