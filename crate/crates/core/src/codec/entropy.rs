//! Lossless back end: raw DEFLATE streams (LZ77 + canonical Huffman).

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

pub fn entropy_encode(bytes: &[u8]) -> Vec<u8> {
    let mut enc = DeflateEncoder::new(Vec::with_capacity(bytes.len() / 2 + 16), Compression::default());
    enc.write_all(bytes).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

/// Inflates `stream`, which must expand to exactly `expected_len` bytes.
pub fn entropy_decode(stream: &[u8], expected_len: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(expected_len);
    DeflateDecoder::new(stream)
        .take(expected_len as u64 + 1)
        .read_to_end(&mut out)
        .map_err(|e| Error::Entropy(e.to_string()))?;
    if out.len() != expected_len {
        return Err(Error::Entropy(format!(
            "stream expands to {}{} bytes, expected {expected_len}",
            out.len().min(expected_len),
            if out.len() > expected_len { "+" } else { "" }
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_compress_well() {
        let z = entropy_encode(&[0u8; 4096]);
        assert!(z.len() < 64, "{} bytes", z.len());
        assert_eq!(entropy_decode(&z, 4096).unwrap(), vec![0u8; 4096]);
    }

    #[test]
    fn empty_input() {
        let z = entropy_encode(&[]);
        assert!(!z.is_empty());
        assert_eq!(entropy_decode(&z, 0).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn interoperates_with_stored_blocks() {
        // Hand-built stored block: BFINAL=1, BTYPE=00, LEN=3, NLEN=!3, "abc".
        let stream = [0x01, 0x03, 0x00, 0xFC, 0xFF, b'a', b'b', b'c'];
        assert_eq!(entropy_decode(&stream, 3).unwrap(), b"abc");
    }

    #[test]
    fn rejects_corruption_and_length_mismatch() {
        let z = entropy_encode(b"hello hello hello hello");
        assert!(entropy_decode(&z, 5).is_err());
        assert!(entropy_decode(&z, 100).is_err());
        assert!(entropy_decode(&[0xFF, 0xFF, 0xFF, 0xFF], 4).is_err());
        assert!(entropy_decode(&z[..z.len() / 2], 23).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(data in proptest::collection::vec(any::<u8>(), 0..4096)) {
            let z = entropy_encode(&data);
            prop_assert_eq!(entropy_decode(&z, data.len()).unwrap(), data);
        }
    }
}
