use std::path::Path;

use super::key::CipherKey;
use crate::error::{Error, Result};

const CIPHERTEXT_MAGIC: &[u8; 4] = b"HHC1";

/// Mutually inverse byte permutations: `b[a[i]] == i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationLut {
    a: [u8; 256],
    b: [u8; 256],
}

impl PermutationLut {
    pub fn identity() -> Self {
        let id: [u8; 256] = std::array::from_fn(|i| i as u8);
        PermutationLut { a: id, b: id }
    }

    /// LUT whose decode map is `b[c] = codes[c]`.
    pub fn from_codes(codes: &[u8]) -> Result<Self> {
        if codes.len() != 256 {
            return Err(Error::KeyIntegrity(format!(
                "a byte LUT needs 256 codes, got {}",
                codes.len()
            )));
        }
        let mut a = [0u8; 256];
        let mut seen = [false; 256];
        for (c, &code) in codes.iter().enumerate() {
            if std::mem::replace(&mut seen[code as usize], true) {
                return Err(Error::KeyIntegrity(format!(
                    "code {code:#04x} is produced by more than one key entry"
                )));
            }
            a[code as usize] = c as u8;
        }
        let b: [u8; 256] = codes.try_into().expect("length checked");
        Ok(PermutationLut { a, b })
    }

    /// Rebuilds the LUT by driving the key's filter bank with its private
    /// pairs.
    pub fn physical(key: &CipherKey) -> Result<Self> {
        Self::from_codes(&key.codes(&key.bank()?)?)
    }

    pub fn encode_map(&self) -> &[u8; 256] {
        &self.a
    }

    pub fn decode_map(&self) -> &[u8; 256] {
        &self.b
    }

    /// Same LUT with the code assignments of entries `x` and `y` exchanged.
    pub fn swapped(&self, x: u8, y: u8) -> Self {
        let mut b = self.b;
        b.swap(x as usize, y as usize);
        Self::from_codes(&b).expect("a swap keeps a permutation")
    }
}

/// Byte CBC: `c_t = A[m_t ^ c_{t-1}]` with `c_{-1} = iv`.
pub fn encrypt(plaintext: &[u8], lut: &PermutationLut, iv: u8) -> Vec<u8> {
    let mut prev = iv;
    plaintext
        .iter()
        .map(|&m| {
            prev = lut.a[(m ^ prev) as usize];
            prev
        })
        .collect()
}

/// Inverse of [`encrypt`] given a decode map: `m_t = B[c_t] ^ c_{t-1}`.
pub fn decrypt_with(ciphertext: &[u8], decode: &[u8; 256], iv: u8) -> Vec<u8> {
    let mut prev = iv;
    ciphertext
        .iter()
        .map(|&c| {
            let m = decode[c as usize] ^ prev;
            prev = c;
            m
        })
        .collect()
}

pub fn decrypt(ciphertext: &[u8], lut: &PermutationLut, iv: u8) -> Vec<u8> {
    decrypt_with(ciphertext, &lut.b, iv)
}

/// Decrypts by recomputing the decode map from the key's private pairs.
///
/// In strict mode a key whose recomputed codes are not a permutation is
/// rejected; otherwise the recomputed map is applied as is.
pub fn decrypt_physical(ciphertext: &[u8], key: &CipherKey, iv: u8, strict: bool) -> Result<Vec<u8>> {
    let codes = key.codes(&key.bank()?)?;
    if strict {
        let lut = PermutationLut::from_codes(&codes)?;
        return Ok(decrypt(ciphertext, &lut, iv));
    }
    let decode: [u8; 256] = codes.as_slice().try_into().map_err(|_| {
        Error::KeyIntegrity(format!("a byte LUT needs 256 codes, got {}", codes.len()))
    })?;
    Ok(decrypt_with(ciphertext, &decode, iv))
}

/// Shannon entropy of the byte histogram, bits per byte.
pub fn byte_entropy(bytes: &[u8]) -> f64 {
    if bytes.is_empty() {
        return 0.0;
    }
    let mut hist = [0usize; 256];
    for &b in bytes {
        hist[b as usize] += 1;
    }
    let n = bytes.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Fraction of positions where `a` and `b` differ; lengths must match.
pub fn byte_error_rate(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let wrong = a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(wrong as f64 / a.len() as f64)
}

pub fn ciphertext_to_bytes(iv: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + payload.len());
    out.extend_from_slice(CIPHERTEXT_MAGIC);
    out.push(iv);
    out.extend_from_slice(payload);
    out
}

/// Splits an HHC1 file into `(iv, payload)`.
pub fn ciphertext_from_bytes(bytes: &[u8]) -> Result<(u8, &[u8])> {
    if bytes.len() < 5 || &bytes[..4] != CIPHERTEXT_MAGIC {
        return Err(Error::Format("not an HHC1 ciphertext file".into()));
    }
    Ok((bytes[4], &bytes[5..]))
}

pub fn write_ciphertext(path: impl AsRef<Path>, iv: u8, payload: &[u8]) -> Result<()> {
    std::fs::write(path, ciphertext_to_bytes(iv, payload))?;
    Ok(())
}

pub fn read_ciphertext(path: impl AsRef<Path>) -> Result<(u8, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let (iv, payload) = ciphertext_from_bytes(&bytes)?;
    Ok((iv, payload.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shuffled() -> PermutationLut {
        // multiplication by an odd constant permutes Z/256
        let codes: Vec<u8> = (0..=255u8).map(|i| i.wrapping_mul(167).wrapping_add(13)).collect();
        PermutationLut::from_codes(&codes).unwrap()
    }

    #[test]
    fn maps_are_inverse() {
        let lut = shuffled();
        for i in 0..=255u8 {
            assert_eq!(lut.b[lut.a[i as usize] as usize], i);
            assert_eq!(lut.a[lut.b[i as usize] as usize], i);
        }
    }

    #[test]
    fn duplicate_codes_are_rejected() {
        let mut codes: Vec<u8> = (0..=255).collect();
        codes[7] = 8;
        assert!(matches!(PermutationLut::from_codes(&codes), Err(Error::KeyIntegrity(_))));
        assert!(PermutationLut::from_codes(&codes[..10]).is_err());
    }

    #[test]
    fn empty_input_round_trips() {
        let lut = shuffled();
        assert!(encrypt(&[], &lut, 9).is_empty());
        assert!(decrypt(&[], &lut, 9).is_empty());
    }

    #[test]
    fn cbc_chains_previous_ciphertext() {
        let lut = shuffled();
        let c = encrypt(&[1, 2], &lut, 5);
        assert_eq!(c[0], lut.a[(1 ^ 5) as usize]);
        assert_eq!(c[1], lut.a[(2 ^ c[0]) as usize]);
    }

    #[test]
    fn entropy_extremes() {
        assert_eq!(byte_entropy(&[3; 100]), 0.0);
        let all: Vec<u8> = (0..=255).collect();
        assert!((byte_entropy(&all) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn ciphertext_header_round_trips() {
        let bytes = ciphertext_to_bytes(42, &[1, 2, 3]);
        assert_eq!(ciphertext_from_bytes(&bytes).unwrap(), (42, &[1u8, 2, 3][..]));
        assert!(ciphertext_from_bytes(b"HHK1").is_err());
    }
}
