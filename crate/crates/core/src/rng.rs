//! Counter-based randomness.
//!
//! Every random quantity in this crate is a pure function of a `u64` seed,
//! a domain tag, and integer counters. Nothing is drawn from a shared
//! stateful generator, so any edge weight or trial substream can be
//! evaluated independently, in any order, on any number of threads, and the
//! result is identical across runs and platforms.
//!
//! The mixer is the splitmix64 finalizer. Keys are derived by absorbing one
//! word at a time: `chain(h, w) = mix64(h + GAMMA + w)`. Sequential draws
//! (where a stream is genuinely needed, e.g. rejection sampling) come from
//! [`Stream`], a splitmix64 sequence seeded with a derived key.

/// Golden-ratio increment used by splitmix64.
const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Domain tags keep independent uses of the same seed from colliding.
pub const TAG_EDGE: u64 = u64::from_le_bytes(*b"edge\0\0\0\0");
pub const TAG_START: u64 = u64::from_le_bytes(*b"start\0\0\0");
pub const TAG_PERC: u64 = u64::from_le_bytes(*b"perc\0\0\0\0");
pub const TAG_TRIAL: u64 = u64::from_le_bytes(*b"trial\0\0\0");
pub const TAG_BP: u64 = u64::from_le_bytes(*b"bp\0\0\0\0\0\0");

/// splitmix64 finalizer: a bijective avalanche mix on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Absorb one word into a running key.
#[inline]
pub fn chain(h: u64, word: u64) -> u64 {
    mix64(h.wrapping_add(GAMMA).wrapping_add(word))
}

/// Map 64 random bits to the open interval (0, 1).
///
/// Uses the top 53 bits, so the result is a multiple of 2^-53 and strictly
/// below 1. The all-zero pattern (probability 2^-53) is re-mixed so 0.0 is
/// never returned.
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    let mut x = bits;
    loop {
        let u = (x >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0);
        if u > 0.0 {
            return u;
        }
        x = mix64(x.wrapping_add(GAMMA));
    }
}

/// A splitmix64 sequence for the few places that need sequential draws.
#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(key: u64) -> Self {
        Stream { state: key }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform draw from the open interval (0, 1).
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        unit_open(self.next_u64())
    }

    /// Uniform draw from `[0, n)` without modulo bias (rejection).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_is_deterministic() {
        assert_eq!(mix64(42), mix64(42));
        assert_eq!(chain(chain(7, TAG_EDGE), 3), chain(chain(7, TAG_EDGE), 3));
        let mut a = Stream::new(chain(1, TAG_START));
        let mut b = Stream::new(chain(1, TAG_START));
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn tags_are_distinct() {
        let tags = [TAG_EDGE, TAG_START, TAG_PERC, TAG_TRIAL, TAG_BP];
        for i in 0..tags.len() {
            for j in 0..i {
                assert_ne!(tags[i], tags[j]);
            }
        }
    }

    #[test]
    fn unit_open_stays_in_open_interval() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
        let mut s = Stream::new(0xdead_beef);
        for _ in 0..10_000 {
            let u = s.next_unit();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn next_below_is_unbiased_range() {
        let mut s = Stream::new(123);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            seen[s.next_below(7) as usize] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }
}
