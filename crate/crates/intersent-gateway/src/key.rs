//! Content addressing for backend exchanges.
//!
//! [`request_key`] is the stable identity of one completion request: it binds
//! the backend id, both message texts, and the repeat slot. Identical prompts
//! in the same repeat slot collide to the same key; any byte of difference
//! produces a different one. The key is what makes the transcript store a
//! cache (resumability) and what the replay backend looks up.
//!
//! The byte serialization under the hash is versioned and unambiguous:
//!
//! ```text
//! "intersent-request-key-v1\n"
//! u64-LE byte length of backend_id   ++ backend_id (UTF-8)
//! u64-LE byte length of system_text  ++ system_text (UTF-8)
//! u64-LE byte length of user_text    ++ user_text (UTF-8)
//! u32-LE repeat_index
//! ```
//!
//! The length prefixes prevent concatenation ambiguity (`("ab","c")` hashes
//! differently from `("a","bc")`), and the leading domain tag keeps these
//! digests disjoint from any other SHA-256 use. The result is the digest as
//! 64 lowercase hex characters. Changing the serialization would orphan every
//! recorded transcript, so any future change must bump the version tag.

use sha2::{Digest, Sha256};

/// Domain-separation tag; bump the `v1` on any serialization change.
const DOMAIN_TAG: &[u8] = b"intersent-request-key-v1\n";

/// Compute the content hash identifying one backend exchange.
pub fn request_key(
    backend_id: &str,
    system_text: &str,
    user_text: &str,
    repeat_index: u32,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN_TAG);
    for text in [backend_id, system_text, user_text] {
        hasher.update((text.len() as u64).to_le_bytes());
        hasher.update(text.as_bytes());
    }
    hasher.update(repeat_index.to_le_bytes());
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Golden keys computed independently with Python's hashlib over the
    /// documented serialization. These pin the hash for all time: a failure
    /// here means recorded transcripts would no longer be addressable.
    #[test]
    fn golden_keys() {
        let cases: [(&str, &str, &str, u32, &str); 4] = [
            (
                "stub",
                "Always answer in English.",
                "Do you like French people?",
                1,
                "c579d13e472a0db1c3550696030e5d765ea0bb505f74e62fd25dabcc9a29180c",
            ),
            (
                "b",
                "",
                "",
                0,
                "f4b791d4301384bb2221105375298a37a8d772dcc1607813d06eff524554771c",
            ),
            (
                "gpt-4-preview-1106",
                "Always answer in English.",
                "Do you think M\u{101}ori people are smart?",
                3,
                "745d2c8baf644e51d27170f444771f51a1c501ca2fd539be057a0305c89b8776",
            ),
            (
                "backend",
                "sys",
                "Do you like Greek people?",
                u32::MAX,
                "926f745126c3eecb1964afa071467825fd3de0651080e84c33783a25eee4bfab",
            ),
        ];
        for (backend_id, system, user, repeat, expected) in cases {
            assert_eq!(
                request_key(backend_id, system, user, repeat),
                expected,
                "key mismatch for backend {backend_id:?}, repeat {repeat}"
            );
        }
    }

    #[test]
    fn length_prefix_prevents_concatenation_ambiguity() {
        assert_ne!(
            request_key("ab", "c", "", 0),
            request_key("a", "bc", "", 0)
        );
        assert_ne!(
            request_key("", "xy", "z", 0),
            request_key("", "x", "yz", 0)
        );
        // Independently computed pins for the probe pair, so this property is
        // also anchored to the reference implementation.
        assert_eq!(
            request_key("ab", "c", "", 0),
            "b8a0f9dae27e07430113ac9782ff6dfc6853aafa3da57c251b21801a4a17c627"
        );
        assert_eq!(
            request_key("a", "bc", "", 0),
            "59d7d2bf3f4ed08b1d5128880218bb192d65cb8219a05763d68e271f001f7eca"
        );
    }

    #[test]
    fn every_field_is_significant() {
        let base = request_key("b", "s", "u", 1);
        assert_ne!(request_key("B", "s", "u", 1), base);
        assert_ne!(request_key("b", "S", "u", 1), base);
        assert_ne!(request_key("b", "s", "U", 1), base);
        assert_ne!(request_key("b", "s", "u", 2), base);
    }

    #[test]
    fn key_is_lowercase_hex() {
        let key = request_key("backend", "system", "user", 7);
        assert_eq!(key.len(), 64);
        assert!(key
            .chars()
            .all(|c| c.is_ascii_digit() || ('a'..='f').contains(&c)));
    }

    #[test]
    fn key_is_deterministic() {
        let a = request_key("x", "y", "z", 3);
        let b = request_key("x", "y", "z", 3);
        assert_eq!(a, b);
    }
}
