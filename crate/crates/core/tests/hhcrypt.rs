use std::sync::OnceLock;

use hhfuse::hhcrypt::*;
use hhfuse::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Key produced by `hhfuse crypt keygen --seed 1` with the default bank.
const FIXTURE_KEY: &[u8] = include_bytes!("data/default_seed1.hhk");

fn fixture() -> &'static (CipherKey, PermutationLut) {
    static KEY: OnceLock<(CipherKey, PermutationLut)> = OnceLock::new();
    KEY.get_or_init(|| {
        let key = CipherKey::from_bytes(FIXTURE_KEY).unwrap();
        let lut = PermutationLut::physical(&key).unwrap();
        (key, lut)
    })
}

fn image_bytes(len: usize) -> Vec<u8> {
    let img = image::load_from_memory(include_bytes!("data/hubble_deep_field.jpg")).unwrap();
    let mut raw = img.to_rgb8().into_raw();
    raw.truncate(len);
    raw
}

fn any_spike(bank: &FilterBank) -> FilterBank {
    FilterBank {
        readout: Readout::AnySpike,
        ..bank.clone()
    }
}

#[test]
fn responses_are_deterministic() {
    let bank = FilterBank::default();
    for (f, a) in [(17.0, 4.5), (123.4, 22.0), (250.0, 9.0)] {
        assert_eq!(bank.response(f, a).unwrap(), bank.response(f, a).unwrap());
    }
    assert_eq!(bank.response(80.0, 0.0).unwrap(), 0);
}

#[test]
fn single_neuron_is_band_pass() {
    let bank = any_spike(&FilterBank::default());
    let freqs: Vec<f64> = (0..24).map(|k| 2.0 * 1.3f64.powi(k)).collect();
    let bits: Vec<bool> = freqs
        .iter()
        .map(|&f| bank.neuron_bit(0, f, 4.0).unwrap())
        .collect();
    let first = bits.iter().position(|&b| b).expect("fires somewhere");
    let last = bits.iter().rposition(|&b| b).unwrap();
    assert!(first > 0 && last < bits.len() - 1, "{bits:?}");
    assert!(bits[first..=last].iter().all(|&b| b), "{bits:?}");
}

#[test]
fn firing_is_monotone_in_amplitude_inside_the_band() {
    let bank = any_spike(&FilterBank::default());
    let amps: Vec<f64> = (0..=15).map(|k| 2.0 * k as f64).collect();
    for j in [0, 3, 7] {
        for f in [10.0, 30.0, 60.0, 120.0, 250.0] {
            let fired: Vec<bool> = amps
                .iter()
                .map(|&a| bank.neuron_bit(j, f, a).unwrap())
                .collect();
            if !fired[amps.len() - 1] {
                continue;
            }
            let onset = fired.iter().position(|&b| b).unwrap();
            assert!(
                fired[onset..].iter().all(|&b| b),
                "neuron {j} at {f} Hz: {fired:?}"
            );
        }
    }
}

#[test]
fn identical_neurons_cannot_cover_the_code_space() {
    let bank = FilterBank::with_taus(vec![1.5; 3]).unwrap();
    let config = KeygenConfig {
        budget: 300,
        ..KeygenConfig::default()
    };
    let err = keygen(&bank, &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap_err();
    assert!(matches!(err, Error::Keygen(_)), "{err}");
    assert!(err.to_string().contains("re-parameterize"));
}

#[test]
fn small_bank_keygen_is_bijective() {
    let bank = FilterBank::staggered(3, 2.0).unwrap();
    let g = keygen(&bank, &KeygenConfig::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(g.key.pairs.len(), 8);
    let mut codes = g.key.codes(&bank).unwrap();
    codes.sort_unstable();
    assert_eq!(codes, (0..8).collect::<Vec<u8>>());
    assert!(g.stats.corners + g.stats.edges > 0);
    let again = keygen(&bank, &KeygenConfig::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(g.key, again.key);
}

#[test]
fn fixture_key_decodes_every_byte() {
    let (key, lut) = fixture();
    assert_eq!(key.taus, FilterBank::default().taus);
    let bank = key.bank().unwrap();
    for k in 0..=255u8 {
        let (f, a) = key.pairs[lut.encode_map()[k as usize] as usize];
        assert_eq!(bank.response(f, a).unwrap(), k);
    }
}

#[test]
fn random_message_round_trips_in_both_modes() {
    let (key, lut) = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m: Vec<u8> = (0..64 * 1024).map(|_| rng.random()).collect();
    let c = encrypt(&m, lut, 0x5a);
    assert_eq!(c.len(), m.len());
    assert_eq!(decrypt(&c, lut, 0x5a), m);
    assert_eq!(decrypt_physical(&c, key, 0x5a, true).unwrap(), m);
}

#[test]
fn wrong_iv_corrupts_only_the_first_byte() {
    let (_, lut) = fixture();
    let m: Vec<u8> = (0..1000u32).map(|i| (i * 7 % 251) as u8).collect();
    let c = encrypt(&m, lut, 1);
    let d = decrypt(&c, lut, 2);
    assert_ne!(d[0], m[0]);
    assert_eq!(d[1..], m[1..]);
}

#[test]
fn image_ciphertext_is_near_uniform() {
    let (_, lut) = fixture();
    let m = image_bytes(1 << 20);
    assert!(byte_entropy(&m) < 7.0);
    let c = encrypt(&m, lut, 0);
    let h = byte_entropy(&c);
    assert!(h > 7.9, "ciphertext entropy {h}");
}

#[test]
fn perturbed_key_fails_to_decrypt() {
    let (key, lut) = fixture();
    let m = image_bytes(256 * 1024);
    let c = encrypt(&m, lut, 0);
    let noisy = key.perturbed(1e-12, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let d = decrypt_physical(&c, &noisy, 0, false).unwrap();
    let rate = byte_error_rate(&d, &m).unwrap();
    assert!(rate > 0.5, "byte error rate {rate}");
    assert!(matches!(
        decrypt_physical(&c, &noisy, 0, true),
        Err(Error::KeyIntegrity(_))
    ));
}

#[test]
fn swapping_one_code_assignment_scrambles_the_chain() {
    let (_, lut) = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let m: Vec<u8> = (0..16 * 1024).map(|_| rng.random()).collect();
    let c = encrypt(&m, lut, 0);
    let mut fractions = Vec::new();
    for _ in 0..16 {
        let (x, y) = (rng.random::<u8>(), rng.random::<u8>());
        if x == y {
            continue;
        }
        let c2 = encrypt(&m, &lut.swapped(x, y), 0);
        fractions.push(byte_error_rate(&c, &c2).unwrap());
    }
    // the first use of either swapped entry falls within ~128 bytes on
    // average, and the chain diverges from there
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    eprintln!("avalanche: mean changed fraction {mean:.4} over {} swaps", fractions.len());
    let expected = 1.0 - 128.0 / m.len() as f64;
    assert!(mean >= expected - 0.05, "{mean} < {expected}");
}

#[test]
fn key_and_ciphertext_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (key, _) = fixture();
    let kp = dir.path().join("k.hhk");
    key.write(&kp).unwrap();
    assert_eq!(std::fs::read(&kp).unwrap(), FIXTURE_KEY);
    assert_eq!(&CipherKey::read(&kp).unwrap(), key);
    let cp = dir.path().join("c.hhc");
    write_ciphertext(&cp, 7, &[1, 2, 3]).unwrap();
    assert_eq!(read_ciphertext(&cp).unwrap(), (7, vec![1, 2, 3]));
}

fn permutation() -> impl Strategy<Value = PermutationLut> {
    Just((0..=255u8).collect::<Vec<u8>>())
        .prop_shuffle()
        .prop_map(|codes| PermutationLut::from_codes(&codes).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn luts_are_mutually_inverse(lut in permutation()) {
        for i in 0..256 {
            prop_assert_eq!(lut.decode_map()[lut.encode_map()[i] as usize] as usize, i);
        }
    }

    #[test]
    fn decrypt_inverts_encrypt(
        lut in permutation(),
        m in prop::collection::vec(any::<u8>(), 0..4096),
        iv in any::<u8>(),
    ) {
        let c = encrypt(&m, &lut, iv);
        prop_assert_eq!(c.len(), m.len());
        prop_assert_eq!(decrypt(&c, &lut, iv), m);
    }
}
