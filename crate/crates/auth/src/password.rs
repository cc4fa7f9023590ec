//! Salted, iterated SHA-256 password hashes.
//!
//! Encoded as `sha256$<iterations>$<salt hex>$<digest hex>`.

use rand::RngCore;
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

const SALT_BYTES: usize = 16;
pub const DEFAULT_ITERATIONS: u32 = 2_000;

fn derive(password: &str, salt: &[u8], iterations: u32) -> Vec<u8> {
    let mut digest = Sha256::new()
        .chain_update(salt)
        .chain_update(password.as_bytes())
        .finalize();
    for _ in 1..iterations {
        digest = Sha256::new().chain_update(salt).chain_update(digest).finalize();
    }
    digest.to_vec()
}

pub fn hash_password(password: &str) -> String {
    let mut salt = [0u8; SALT_BYTES];
    rand::rng().fill_bytes(&mut salt);
    hash_with_salt(password, &salt, DEFAULT_ITERATIONS)
}

pub fn hash_with_salt(password: &str, salt: &[u8], iterations: u32) -> String {
    let iterations = iterations.max(1);
    format!(
        "sha256${iterations}${}${}",
        hex::encode(salt),
        hex::encode(derive(password, salt, iterations))
    )
}

/// Constant-time comparison against an encoded hash. Malformed hashes never verify.
pub fn verify_password(password: &str, encoded: &str) -> bool {
    let mut parts = encoded.split('$');
    let (Some("sha256"), Some(iter), Some(salt), Some(digest), None) =
        (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let (Ok(iterations), Ok(salt), Ok(expected)) = (iter.parse::<u32>(), hex::decode(salt), hex::decode(digest)) else {
        return false;
    };
    if iterations == 0 {
        return false;
    }
    derive(password, &salt, iterations).ct_eq(&expected).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verifies_only_the_right_password() {
        let h = hash_password("pw");
        assert!(verify_password("pw", &h));
        assert!(!verify_password("pw ", &h));
        assert!(!verify_password("", &h));
        assert!(!h.contains("pw$"));
    }

    #[test]
    fn salts_differ() {
        assert_ne!(hash_password("pw"), hash_password("pw"));
    }

    #[test]
    fn malformed_hashes_fail_closed() {
        for bad in [
            "",
            "pw",
            "sha256$0$00$00",
            "md5$1$00$00",
            "sha256$x$00$00",
            "sha256$1$zz$00",
        ] {
            assert!(!verify_password("pw", bad), "{bad}");
        }
    }

    #[test]
    fn deterministic_given_salt() {
        assert_eq!(hash_with_salt("pw", b"salt", 3), hash_with_salt("pw", b"salt", 3));
    }
}
