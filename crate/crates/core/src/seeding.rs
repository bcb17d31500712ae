/// SplitMix64 mixing step.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a base seed and a stream index.
/// Used wherever one user-facing seed must fan out into many decorrelated
/// RNG streams (RANSAC iterations, per-scan seeds, ...) without any stream
/// depending on how many draws another stream consumed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0x517C_C1B7_2722_0A95)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_stable() {
        let a = derive_seed(0, 0);
        let b = derive_seed(0, 1);
        let c = derive_seed(1, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
        assert_eq!(a, derive_seed(0, 0));
    }

    #[test]
    fn no_collisions_over_small_grid() {
        let mut seen = std::collections::HashSet::new();
        for base in 0..50u64 {
            for stream in 0..50u64 {
                assert!(seen.insert(derive_seed(base, stream)));
            }
        }
    }
}
