//! Seeded randomness with label-path splitting.
//!
//! Every consumer gets its own stream derived from the base seed and a path of
//! `(label, index)` pairs, so adding a consumer never perturbs another one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

pub type AuditRng = ChaCha8Rng;

fn digest(base_seed: u64, labels: &[(&str, u64)]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"dpaudit-rng-v1");
    h.update(base_seed.to_le_bytes());
    for (name, idx) in labels {
        // length prefix keeps ("ab", 1) and ("a", ...) apart
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update(idx.to_le_bytes());
    }
    h.finalize().into()
}

pub fn derive_rng(base_seed: u64, labels: &[(&str, u64)]) -> AuditRng {
    ChaCha8Rng::from_seed(digest(base_seed, labels))
}

/// A 64-bit seed for a sub-computation, suitable for recording in reports.
pub fn derive_seed(base_seed: u64, labels: &[(&str, u64)]) -> u64 {
    let d = digest(base_seed, labels);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Stable 64-bit digest of a few real-valued sequences.
pub fn fingerprint(parts: &[&[f64]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        for x in *p {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    let d: [u8; 32] = h.finalize().into();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Child stream drawn from an existing stream.
pub fn split(rng: &mut AuditRng, label: &str) -> AuditRng {
    let s: u64 = rng.gen();
    derive_rng(s, &[(label, 0)])
}

/// Laplace(0, b) by inverse CDF.
pub fn laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    // u in (-1/2, 1/2); the open interval keeps ln away from 0
    let u: f64 = rng.gen::<f64>() - 0.5;
    let a = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -b * u.signum() * a.ln()
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_labels_same_stream() {
        let mut a = derive_rng(7, &[("trial", 1), ("direction", 0)]);
        let mut b = derive_rng(7, &[("trial", 1), ("direction", 0)]);
        let xa: Vec<u64> = (0..100).map(|_| a.gen()).collect();
        let xb: Vec<u64> = (0..100).map(|_| b.gen()).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn distinct_labels_distinct_streams() {
        let mut a = derive_rng(7, &[("trial", 1)]);
        let mut b = derive_rng(7, &[("trial", 2)]);
        let xa: Vec<u64> = (0..100).map(|_| a.gen()).collect();
        let xb: Vec<u64> = (0..100).map(|_| b.gen()).collect();
        assert_ne!(xa, xb);
        assert_ne!(derive_seed(1, &[("ab", 1)]), derive_seed(1, &[("a", 1)]));
        assert_ne!(derive_seed(1, &[]), derive_seed(2, &[]));
    }

    #[test]
    fn laplace_moments() {
        let mut rng = derive_rng(3, &[("laplace", 0)]);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| laplace(&mut rng, 2.0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        // E|X| = b, sd(|X|) = b
        assert!(mean.abs() < 5.0 * 2.0 * 2f64.sqrt() / (n as f64).sqrt());
        assert!((mean_abs - 2.0).abs() < 5.0 * 2.0 / (n as f64).sqrt());
    }
}
