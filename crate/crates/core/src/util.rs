//! Small shared helpers: stable hashing, seed derivation, significant-digit
//! rounding used by every serialized float.

/// FNV-1a 64-bit over raw bytes. Stable across platforms and releases, unlike
/// `DefaultHasher`, so seed derivation survives toolchain upgrades.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derive a child seed from a master seed and a label, mixing in an index.
/// Used everywhere a stage needs its own independent RNG stream.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut buf = Vec::with_capacity(label.len() + 16);
    buf.extend_from_slice(&master.to_le_bytes());
    buf.extend_from_slice(label.as_bytes());
    buf.extend_from_slice(&index.to_le_bytes());
    fnv1a(&buf)
}

/// Format a float with at most 12 significant digits, trimming trailing
/// zeros from the mantissa. `3.14159265358979 -> "3.14159265359e0"`,
/// `0.05 -> "5e-2"`. The output parses back to exactly [`round_sig12`] of
/// the input, which is what keeps file round-trips lossless.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let s = format!("{:.11e}", x);
    // split "d.dddddddddddEsnn" at the exponent marker
    let (mantissa, exp) = s.split_once('e').expect("exponential format");
    let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
    format!("{mantissa}e{exp}")
}

/// Round to 12 significant decimal digits. Applied to every float that is
/// written into an episode file or manifest so that saved and re-loaded
/// records compare bit-identical.
pub fn round_sig12(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0; // canonicalize -0.0, which prints as "0"
    }
    if !x.is_finite() {
        return x;
    }
    format!("{:.11e}", x).parse().expect("round-trip parse")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_known_vector() {
        // FNV-1a("a") from the reference tables.
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
    }

    #[test]
    fn derive_seed_varies_with_all_inputs() {
        let s = derive_seed(1, "gen", 0);
        assert_ne!(s, derive_seed(2, "gen", 0));
        assert_ne!(s, derive_seed(1, "gen", 1));
        assert_ne!(s, derive_seed(1, "eval", 0));
        assert_eq!(s, derive_seed(1, "gen", 0));
    }

    #[test]
    fn sig12_round_trip_is_idempotent() {
        for &x in &[
            0.05,
            std::f64::consts::PI,
            -1.2345678901234567e-8,
            1.0 / 3.0,
            2e300,
            -0.0,
        ] {
            let once = round_sig12(x);
            assert_eq!(once, round_sig12(once));
            let printed: f64 = format_sig12(once).parse().unwrap();
            assert_eq!(printed.to_bits(), once.to_bits(), "x={x}");
        }
    }

    #[test]
    fn sig12_trims_zeros() {
        assert_eq!(format_sig12(0.05), "5e-2");
        assert_eq!(format_sig12(1.5), "1.5e0");
        assert_eq!(format_sig12(0.0), "0");
    }

    #[test]
    fn sig12_error_is_small() {
        let x = std::f64::consts::PI;
        assert!((round_sig12(x) - x).abs() / x < 1e-11);
    }
}
