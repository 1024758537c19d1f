//! Canonical JSON: sorted object keys, no insignificant whitespace, floats
//! in shortest round-trip form. Used for digests and certificate seals.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Canonical bytes of any serializable value.
///
/// Going through [`serde_json::Value`] sorts object keys, since its map type
/// is ordered. Non-finite floats have no JSON form and become `null`.
pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let v = serde_json::to_value(value).expect("values built from plain data always serialize");
    serde_json::to_vec(&v).expect("a JSON value always serializes")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of the canonical serialization.
pub fn digest_hex<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_hex(&to_canonical_bytes(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[derive(Serialize)]
    struct Unordered {
        zeta: f64,
        alpha: Vec<u8>,
    }

    #[test]
    fn keys_are_sorted_and_compact() {
        let bytes = to_canonical_bytes(&Unordered { zeta: 0.1, alpha: vec![1, 2] });
        assert_eq!(String::from_utf8(bytes).unwrap(), r#"{"alpha":[1,2],"zeta":0.1}"#);
    }

    #[test]
    fn map_insertion_order_is_irrelevant() {
        let a: HashMap<_, _> = [("b", 1), ("a", 2), ("c", 3)].into_iter().collect();
        let b: HashMap<_, _> = [("c", 3), ("a", 2), ("b", 1)].into_iter().collect();
        assert_eq!(digest_hex(&a), digest_hex(&b));
    }

    #[test]
    fn floats_use_shortest_form() {
        assert_eq!(to_canonical_bytes(&1e-12f64), b"1e-12");
        assert_eq!(to_canonical_bytes(&0.30000000000000004f64), b"0.30000000000000004");
    }
}
