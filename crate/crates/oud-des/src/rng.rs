//! Counter-based keyed uniforms.
//!
//! A variate is a pure function of its [`StreamKey`], so two scenarios that
//! make the same request for the same person see the same number no matter
//! how their event lists interleave.

use serde::{Deserialize, Serialize};

/// Purpose of a draw. Each variant is an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Stream {
    InitiationAge = 0,
    PrevalenceAge,
    StartingPopulation,
    StartingStateCounts,
    StartingState,
    Arrival,
    OpioidDeath,
    HospitalEncounter,
    OpioidArrest,
    StartTreatment,
    StopUse,
    NaturalDeath,
    NonOpioidArrest,
    HospitalStay,
    CjsStay,
    TreatmentStay,
    InactiveAfterCjs,
    InactiveAfterTreatment,
    InactiveAfterHospital,
    InactiveAfterActive,
    GateAd,
    GateOd,
    GateCm,
    HospitalOutcome,
}

impl Stream {
    pub const COUNT: usize = Stream::HospitalOutcome as usize + 1;

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Full address of one uniform variate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replication: u32,
    pub stream: Stream,
    /// Person index; 0 for population-level draws.
    pub entity: u32,
    pub counter: u32,
}

impl StreamKey {
    pub fn new(master_seed: u64, replication: u32, stream: Stream, entity: u32, counter: u32) -> Self {
        Self { master_seed, replication, stream, entity, counter }
    }

    /// Same key with the counter advanced by one.
    #[inline]
    pub fn next(self) -> Self {
        Self { counter: self.counter.wrapping_add(1), ..self }
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Raw 64-bit hash of a key.
#[inline]
pub fn hash_key(key: &StreamKey) -> u64 {
    let mut h = mix64(key.master_seed ^ GOLDEN);
    h = mix64(h ^ (key.replication as u64).wrapping_mul(0xd1b5_4a32_d192_ed03));
    h = mix64(h ^ ((key.stream as u64) << 32 | key.entity as u64).wrapping_add(GOLDEN));
    mix64(h ^ (key.counter as u64).wrapping_mul(0xaf25_1af3_b0f0_25b5))
}

/// Uniform variate in (0, 1); never exactly 0, so logs and normal
/// quantiles stay finite.
#[inline]
pub fn uniform(key: &StreamKey) -> f64 {
    ((hash_key(key) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Convenience handle for one replication of one seed.
#[derive(Debug, Clone, Copy)]
pub struct Keyed {
    pub master_seed: u64,
    pub replication: u32,
}

impl Keyed {
    pub fn new(master_seed: u64, replication: u32) -> Self {
        Self { master_seed, replication }
    }

    #[inline]
    pub fn key(&self, stream: Stream, entity: u32, counter: u32) -> StreamKey {
        StreamKey::new(self.master_seed, self.replication, stream, entity, counter)
    }

    #[inline]
    pub fn uniform(&self, stream: Stream, entity: u32, counter: u32) -> f64 {
        uniform(&self.key(stream, entity, counter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism() {
        let k = StreamKey::new(7, 3, Stream::CjsStay, 11, 2);
        assert_eq!(uniform(&k).to_bits(), uniform(&k).to_bits());
    }

    #[test]
    fn replication_pairs_do_not_collide() {
        let mut hits = 0;
        for i in 0..10_000u32 {
            let a = StreamKey::new(1, 0, Stream::Arrival, i, 0);
            let b = StreamKey { replication: 1, ..a };
            if uniform(&a) == uniform(&b) {
                hits += 1;
            }
        }
        assert_eq!(hits, 0);
    }

    #[test]
    fn mean_of_a_million() {
        let k = Keyed::new(2024, 0);
        let n = 1_000_000u32;
        let s: f64 = (0..n).map(|c| k.uniform(Stream::StopUse, 1, c)).sum();
        assert!((s / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn streams_look_independent() {
        let k = Keyed::new(5, 0);
        let n = 200_000u32;
        let (mut sxy, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for c in 0..n {
            let x = k.uniform(Stream::GateAd, 9, c);
            let y = k.uniform(Stream::GateCm, 9, c);
            sxy += x * y;
            sx += x;
            sy += y;
        }
        let nf = n as f64;
        let cov = sxy / nf - (sx / nf) * (sy / nf);
        // var(U) = 1/12, so corr = 12 cov
        assert!((12.0 * cov).abs() < 0.01);
    }
}
