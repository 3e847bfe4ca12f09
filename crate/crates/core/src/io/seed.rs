//! Deterministic seed splitting.
//!
//! Every random stream in a run is derived from one root seed:
//!
//! ```text
//! derive(root, label, index) = splitmix64(splitmix64(root + fnv1a64(label)) ^ index)
//! ```
//!
//! with wrapping arithmetic. Labels name the consumer (`"split"`,
//! `"select"`, `"design"`, ...), and `index` separates repetitions such as
//! experiment seeds or toss numbers.

/// One round of the SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(root.wrapping_add(fnv1a64(label.as_bytes()))) ^ index)
}
