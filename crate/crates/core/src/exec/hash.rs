//! Order-insensitive digest of a result set.
//!
//! Each row is serialised canonically (typed cells joined by 0x1F) and
//! digested with XXH64 (seed 0). The row digests are sorted and their
//! little-endian bytes concatenated and digested again, so the result depends
//! on the row multiset only.

use std::hash::Hasher;

use twox_hash::XxHash64;

use super::value::Value;

pub const FIELD_SEPARATOR: u8 = 0x1F;

/// Digest of an empty result set: XXH64 of zero bytes.
pub const EMPTY_RESULT_HASH: u64 = 0xEF46_DB37_51D8_E999;

pub fn canonical_row(row: &[Value]) -> Vec<u8> {
    let mut out = Vec::new();
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(FIELD_SEPARATOR);
        }
        out.extend_from_slice(v.canonical().as_bytes());
    }
    out
}

fn xxh64(bytes: &[u8]) -> u64 {
    let mut h = XxHash64::with_seed(0);
    h.write(bytes);
    h.finish()
}

pub fn row_digest(row: &[Value]) -> u64 {
    xxh64(&canonical_row(row))
}

pub fn result_hash<R: AsRef<[Value]>>(rows: &[R]) -> u64 {
    let mut digests: Vec<u64> = rows.iter().map(|r| row_digest(r.as_ref())).collect();
    digests.sort_unstable();
    let mut buf = Vec::with_capacity(digests.len() * 8);
    for d in digests {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    xxh64(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sentinel() {
        let rows: Vec<Vec<Value>> = Vec::new();
        assert_eq!(result_hash(&rows), EMPTY_RESULT_HASH);
    }

    #[test]
    fn separator_prevents_cell_merging() {
        let a = vec![Value::Text("ab".into()), Value::Text("c".into())];
        let b = vec![Value::Text("a".into()), Value::Text("bc".into())];
        assert_ne!(row_digest(&a), row_digest(&b));
    }

    #[test]
    fn order_insensitive() {
        let r1 = vec![Value::Int(1), Value::Text("a".into())];
        let r2 = vec![Value::Int(2), Value::Text("b".into())];
        assert_eq!(result_hash(&[r1.clone(), r2.clone()]), result_hash(&[r2, r1]));
    }
}
