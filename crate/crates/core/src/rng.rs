//! Counter-based random number streams.
//!
//! Every stochastic object in the crate draws from a [`Stream`]: a Philox-style
//! 2x64 bijection applied to the counter `(particle, draw_index)` under a key
//! derived from `(seed, replica)`. Streams for distinct `(seed, replica,
//! particle)` triples are independent, and a particle's draws do not depend on
//! how many other particles exist or in which order events are processed.
//! This is what makes replicas embarrassingly parallel and pruning unable to
//! perturb the draws of surviving particles.

use rand::RngCore;

const PHILOX_M: u64 = 0xD2B7_4407_B1CE_6E93;
const PHILOX_W: u64 = 0x9E37_79B9_7F4A_7C15;
const ROUNDS: u32 = 10;

#[inline]
fn mul_hi_lo(a: u64, b: u64) -> (u64, u64) {
    let wide = (a as u128) * (b as u128);
    ((wide >> 64) as u64, wide as u64)
}

/// One Philox 2x64-10 block: encrypt counter `(c0, c1)` under `key`.
#[inline]
pub fn philox2x64(key: u64, mut c0: u64, mut c1: u64) -> (u64, u64) {
    let mut k = key;
    for _ in 0..ROUNDS {
        let (hi, lo) = mul_hi_lo(PHILOX_M, c0);
        c0 = hi ^ k ^ c1;
        c1 = lo;
        k = k.wrapping_add(PHILOX_W);
    }
    (c0, c1)
}

/// SplitMix64 finalizer, used to spread seed/replica words into keys.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for a replica: all particle streams of one run share it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaKey(pub u64);

impl ReplicaKey {
    pub fn new(seed: u64, replica: u64) -> Self {
        ReplicaKey(mix64(seed ^ mix64(replica)))
    }

    /// Stream for one particle (or any other indexed entity) of the replica.
    pub fn stream(&self, particle: u64) -> Stream {
        Stream {
            key: self.0,
            id: particle,
            ctr: 0,
            buf: 0,
            have_buf: false,
        }
    }
}

/// A deterministic random stream positioned by an internal draw counter.
///
/// Implements [`RngCore`], so `rand_distr` samplers can run on it directly.
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    id: u64,
    ctr: u64,
    buf: u64,
    have_buf: bool,
}

impl Stream {
    /// Stand-alone stream for non-engine sampling tasks.
    pub fn named(seed: u64, label: u64) -> Self {
        ReplicaKey::new(seed, 0).stream(mix64(label))
    }

    /// Uniform in (0, 1].
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Standard exponential via inversion.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Standard normal (ziggurat from `rand_distr`).
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, self)
    }
}

impl RngCore for Stream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        if self.have_buf {
            self.have_buf = false;
            return (self.buf >> 32) as u32;
        }
        let x = self.next_u64();
        self.buf = x;
        self.have_buf = true;
        x as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.have_buf = false;
        let (a, _) = philox2x64(self.key, self.id, self.ctr);
        self.ctr = self.ctr.wrapping_add(1);
        a
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        let mut chunks = dest.chunks_exact_mut(8);
        for chunk in &mut chunks {
            chunk.copy_from_slice(&self.next_u64().to_le_bytes());
        }
        let rem = chunks.into_remainder();
        if !rem.is_empty() {
            let bytes = self.next_u64().to_le_bytes();
            rem.copy_from_slice(&bytes[..rem.len()]);
        }
    }
}
