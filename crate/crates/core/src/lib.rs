//! Cost-aware interactive object search.
//!
//! An agent must find one object among several that match an ambiguous
//! instruction. It can walk (expensive), ask a tiring human (moderate, and
//! pricier with every question), or check its memory (nearly free, sometimes
//! wrong). The crate provides the environment, an exact belief-space planner
//! for demonstrations, a linear-softmax policy, supervised and group-relative
//! policy-gradient training, a benchmark generator, and the experiment
//! harness behind the `costsearch` command.

pub mod benchgen;
pub mod cost;
pub mod env;
pub mod expert;
pub mod harness;
pub mod memory;
pub mod oracle;
pub mod policy;
pub mod scene;
pub mod trainer;

/// Derive an independent 64-bit seed for stream `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(master) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}
