//! Byte cipher on the frequency selectivity of HH neurons: a filter bank
//! maps sinusoid probes to codes, a key of probes defines a byte
//! permutation, and messages are chained byte by byte.

mod bank;
mod key;
mod lut;

pub use bank::{
    FilterBank, Readout, DEFAULT_BANK_SIZE, DEFAULT_BIN_MS, DEFAULT_PROBE_DT, DEFAULT_PROBE_MS,
    DEFAULT_TAU_SPAN,
};
pub use key::{keygen, CipherKey, GeneratedKey, KeygenConfig, KeygenStats};
pub use lut::{
    byte_entropy, byte_error_rate, ciphertext_from_bytes, ciphertext_to_bytes, decrypt,
    decrypt_physical, decrypt_with, encrypt, read_ciphertext, write_ciphertext, PermutationLut,
};
