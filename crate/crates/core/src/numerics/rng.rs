use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// The single generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Root seed of a simulation run.
///
/// Every replicate gets its own ChaCha stream keyed by `(seed, replicate)`, so
/// results do not depend on how replicates are scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn value(self) -> u64 {
        self.0
    }

    /// Generator for replicate `index`.
    pub fn stream(self, index: u64) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }

    /// Generator for draws shared by all replicates (e.g. frozen effects).
    pub fn shared(self) -> SimRng {
        self.stream(u64::MAX)
    }
}

impl Default for Seed {
    fn default() -> Self {
        Seed(20_240_601)
    }
}

/// Normal variate by the Marsaglia polar method.
///
/// Always consumes at least one accepted pair; the second variate of the pair
/// is discarded so a draw depends only on the generator state.
pub fn draw_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    assert!(sd >= 0.0, "normal sd must be nonnegative, got {sd}");
    let z = loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            break u * (-2.0 * s.ln() / s).sqrt();
        }
    };
    mean + sd * z
}

/// Bernoulli(p) as 0/1.
pub fn draw_bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("bernoulli probability", p));
    }
    Ok(u8::from(rng.random::<f64>() < p))
}
