//! Shared inputs for the solver benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use renyi_scd::analytic::QTauFamily;
use renyi_scd::{Law, SortedSample};

/// A seeded `q₃` sample of size `n`.
pub fn q3_sample(n: usize, seed: u64) -> SortedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let family = QTauFamily::new(3.0).expect("valid tau");
    SortedSample::new(&family.sample(&mut rng, n)).expect("nondegenerate sample")
}
