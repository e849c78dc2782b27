//! Report serialization: JSON with full-precision floats and input digests.
//!
//! Reports must be byte-deterministic, so floats are always written in
//! scientific notation with 17 significant digits (round-trip exact for
//! f64) and field order comes from the report struct definitions.

use std::io;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// JSON formatter that pins down float formatting.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", value as f64)
    }
}

/// Serialize a report to a JSON string with deterministic float formatting.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("reports contain only serializable data");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// Lowercase hex SHA-256 of raw input bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_scientific_with_17_digits() {
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        let text = to_json(&S { x: 0.1 });
        assert_eq!(text, "{\"x\":1.0000000000000001e-1}");
    }

    #[test]
    fn digest_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
