//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 keystream
//! addressed by `(master seed, stream id, position)`. The key is derived with
//! `ChaCha8Rng::seed_from_u64(seed)`, the stream id selects one of the 2^64
//! independent ChaCha streams, and the position is a 32-bit word offset.
//! Because any draw can be reached by seeking, results never depend on how
//! work is split across threads.
//!
//! Stream ids are built as `(tag << 32) | index`: the tag names the consumer
//! (sample angles, a Monte Carlo battery, ...) and the index enumerates
//! chunks or tasks within it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Angles of a [`crate::SequenceSample`].
pub const TAG_SAMPLE_ANGLES: u32 = 0;
/// Monte Carlo estimators of `E[log^p 1/ρ]`.
pub const TAG_LOG_RHO: u32 = 1;
/// Rosenthal batteries.
pub const TAG_ROSENTHAL: u32 = 2;
/// Random discrete measures for the balayage duality battery.
pub const TAG_MEASURES: u32 = 3;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

pub fn stream_id(tag: u32, index: u32) -> u64 {
    (u64::from(tag) << 32) | u64::from(index)
}

/// A generator positioned at the start of stream `(tag, index)`.
pub fn stream(seed: u64, tag: u32, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, index));
    rng
}

/// Uniform on `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53
}

/// The `position`-th uniform of stream `(tag, index)`, reached by seeking.
///
/// Draw `k` occupies words `2k` and `2k + 1`, so this agrees with the `k`-th
/// sequential call of [`unit_f64`] on [`stream`].
pub fn unit_at(seed: u64, tag: u32, index: u32, position: u64) -> f64 {
    let mut rng = stream(seed, tag, index);
    rng.set_word_pos(u128::from(position) * 2);
    unit_f64(&mut rng)
}

/// A sequence of uniforms for positions `start..start + len` of one stream.
pub fn unit_block(seed: u64, tag: u32, index: u32, start: u64, len: usize) -> Vec<f64> {
    let mut rng = stream(seed, tag, index);
    rng.set_word_pos(u128::from(start) * 2);
    (0..len).map(|_| unit_f64(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeking_matches_sequential_draws() {
        let block = unit_block(42, TAG_SAMPLE_ANGLES, 0, 0, 100);
        for (k, &u) in block.iter().enumerate() {
            assert_eq!(u, unit_at(42, TAG_SAMPLE_ANGLES, 0, k as u64));
        }
        let tail = unit_block(42, TAG_SAMPLE_ANGLES, 0, 37, 10);
        assert_eq!(&tail[..], &block[37..47]);
    }

    #[test]
    fn streams_are_distinct() {
        let a = unit_block(7, TAG_LOG_RHO, 0, 0, 8);
        let b = unit_block(7, TAG_LOG_RHO, 1, 0, 8);
        let c = unit_block(8, TAG_LOG_RHO, 0, 0, 8);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|u| (0.0..1.0).contains(u)));
    }
}
