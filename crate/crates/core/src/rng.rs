//! SplitMix64, the one pseudo-random source used by every seeded path.
//!
//! The algorithm is pinned so that generated images are byte-identical
//! across platforms and across independent implementations:
//!
//! ```text
//! state  = state + 0x9E3779B97F4A7C15          (wrapping)
//! z      = state
//! z      = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 (wrapping)
//! z      = (z ^ (z >> 27)) * 0x94D049BB133111EB (wrapping)
//! output = z ^ (z >> 31)
//! ```
//!
//! Uniform doubles take the top 53 bits: `(x >> 11) * 2^-53`, in `[0, 1)`.
//! Standard normals use the Box-Muller transform on two uniforms,
//! `u1 = 1 - uniform()` and `u2 = uniform()`, returning
//! `sqrt(-2 ln u1) * cos(2π u2)` first and caching the matching `sin` term
//! for the next call.

use std::f64::consts::TAU;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. `bound` must be non-zero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be non-zero");
        // Lemire's multiply-shift with rejection for an unbiased result.
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = (self.next_u64() as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
