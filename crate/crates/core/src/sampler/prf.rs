//! Keyed deterministic randomness: a SipHash-2-4 PRF drives uniform
//! variates, uniform orderings and uniform injective labelings.  The same
//! (seed, key) pair yields the same output on every platform and run.

/// SipHash-2-4 of a message under a 128-bit key.
pub fn siphash24(k0: u64, k1: u64, msg: &[u8]) -> u64 {
    let mut v0 = k0 ^ 0x736f_6d65_7073_6575;
    let mut v1 = k1 ^ 0x646f_7261_6e64_6f6d;
    let mut v2 = k0 ^ 0x6c79_6765_6e65_7261;
    let mut v3 = k1 ^ 0x7465_6462_7974_6573;

    macro_rules! round {
        () => {
            v0 = v0.wrapping_add(v1);
            v1 = v1.rotate_left(13);
            v1 ^= v0;
            v0 = v0.rotate_left(32);
            v2 = v2.wrapping_add(v3);
            v3 = v3.rotate_left(16);
            v3 ^= v2;
            v0 = v0.wrapping_add(v3);
            v3 = v3.rotate_left(21);
            v3 ^= v0;
            v2 = v2.wrapping_add(v1);
            v1 = v1.rotate_left(17);
            v1 ^= v2;
            v2 = v2.rotate_left(32);
        };
    }

    let mut chunks = msg.chunks_exact(8);
    for chunk in &mut chunks {
        let m = u64::from_le_bytes(chunk.try_into().unwrap());
        v3 ^= m;
        round!();
        round!();
        v0 ^= m;
    }
    let rest = chunks.remainder();
    let mut last = (msg.len() as u64 & 0xff) << 56;
    for (i, &b) in rest.iter().enumerate() {
        last |= (b as u64) << (8 * i);
    }
    v3 ^= last;
    round!();
    round!();
    v0 ^= last;
    v2 ^= 0xff;
    round!();
    round!();
    round!();
    round!();
    v0 ^ v1 ^ v2 ^ v3
}

/// A seeded keyed generator: every draw is a pure function of
/// (seed, byte key), so one seed yields a single globally consistent
/// realization of all the representation's randomness.
#[derive(Debug, Clone, Copy)]
pub struct RandomnessSource {
    k0: u64,
    k1: u64,
}

impl RandomnessSource {
    pub fn new(seed: u64) -> Self {
        RandomnessSource {
            k0: seed,
            k1: seed ^ 0x9e37_79b9_7f4a_7c15,
        }
    }

    /// Raw 64-bit draw for a key.
    pub fn raw(&self, key: &[u8]) -> u64 {
        siphash24(self.k0, self.k1, key)
    }

    /// Counter-extended draw: `raw(key || '#' || i)`.
    pub fn raw_at(&self, key: &[u8], i: u64) -> u64 {
        let mut msg = Vec::with_capacity(key.len() + 9);
        msg.extend_from_slice(key);
        msg.push(b'#');
        msg.extend_from_slice(&i.to_le_bytes());
        self.raw(&msg)
    }

    /// A 53-bit dyadic uniform variate in [0, 1).
    pub fn uniform(&self, key: &[u8]) -> f64 {
        bits_to_unit(self.raw(key))
    }

    /// Uniform permutation of `0..n` (Fisher-Yates over counter draws).
    pub fn permutation(&self, key: &[u8], n: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (self.raw_at(key, i as u64) % (i as u64 + 1)) as usize;
            out.swap(i, j);
        }
        out
    }

    /// Uniform injective map from `0..m` into labels `1..=c` (sampling
    /// without replacement).
    pub fn injective_labels(&self, key: &[u8], m: usize, c: u32) -> Vec<u32> {
        assert!(m as u32 <= c, "more classes than labels");
        let mut pool: Vec<u32> = (1..=c).collect();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let j = (self.raw_at(key, i as u64) % pool.len() as u64) as usize;
            out.push(pool.remove(j));
        }
        out
    }

    /// Derive a child source; children with distinct tags are independent
    /// streams.
    pub fn child(&self, tag: &[u8]) -> RandomnessSource {
        let mut msg = Vec::with_capacity(tag.len() + 6);
        msg.extend_from_slice(b"child:");
        msg.extend_from_slice(tag);
        RandomnessSource {
            k0: self.raw(&msg),
            k1: self.raw(&msg) ^ 0x5851_f42d_4c95_7f2d,
        }
    }
}

/// Map a 64-bit draw to the unit interval using the top 53 bits.
pub fn bits_to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / 9007199254740992.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn siphash_reference_vectors() {
        // From the SipHash reference implementation: key 00..0f, messages
        // 00, 00 01, ... of increasing length.
        let k0 = u64::from_le_bytes([0, 1, 2, 3, 4, 5, 6, 7]);
        let k1 = u64::from_le_bytes([8, 9, 10, 11, 12, 13, 14, 15]);
        let msg: Vec<u8> = (0u8..16).collect();
        let expected: [u64; 8] = [
            0x726f_db47_dd0e_0e31,
            0x74f8_39c5_93dc_67fd,
            0x0d6c_8009_d9a9_4f5a,
            0x8567_6696_d7fb_7e2d,
            0xcf27_94e0_2771_87b7,
            0x1876_5564_cd99_a68d,
            0xcbc9_466e_58fe_e3ce,
            0xab02_00f5_8b01_d137,
        ];
        for (len, &want) in expected.iter().enumerate() {
            assert_eq!(
                siphash24(k0, k1, &msg[..len]),
                want,
                "mismatch at message length {len}"
            );
        }
    }

    #[test]
    fn same_key_same_output() {
        let rs = RandomnessSource::new(42);
        assert_eq!(rs.uniform(b"alpha"), rs.uniform(b"alpha"));
        assert_eq!(rs.permutation(b"p", 5), rs.permutation(b"p", 5));
    }

    #[test]
    fn distinct_keys_decorrelate() {
        let rs = RandomnessSource::new(42);
        assert_ne!(rs.raw(b"alpha"), rs.raw(b"beta"));
        let other = RandomnessSource::new(43);
        assert_ne!(rs.raw(b"alpha"), other.raw(b"alpha"));
    }

    #[test]
    fn uniform_values_land_in_unit_interval() {
        let rs = RandomnessSource::new(7);
        for i in 0..1000u64 {
            let x = rs.uniform(&i.to_le_bytes());
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn uniform_mean_near_half() {
        let rs = RandomnessSource::new(11);
        let n = 20_000u64;
        let mean: f64 = (0..n).map(|i| rs.uniform(&i.to_le_bytes())).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn permutations_cover_all_orders() {
        let rs = RandomnessSource::new(3);
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..200u64 {
            seen.insert(rs.permutation(&i.to_le_bytes(), 3));
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn injective_labels_are_injective_and_in_range() {
        let rs = RandomnessSource::new(9);
        for i in 0..100u64 {
            let labels = rs.injective_labels(&i.to_le_bytes(), 3, 5);
            let mut sorted = labels.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 3);
            assert!(labels.iter().all(|&l| (1..=5).contains(&l)));
        }
    }

    #[test]
    fn injective_labels_uniform_over_pairs() {
        // m = c = 2: both assignments should appear about equally often.
        let rs = RandomnessSource::new(5);
        let mut first = 0u32;
        let n = 10_000u64;
        for i in 0..n {
            if rs.injective_labels(&i.to_le_bytes(), 2, 2) == vec![1, 2] {
                first += 1;
            }
        }
        let frac = first as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "frac = {frac}");
    }
}
