use std::path::{Path, PathBuf};

use clap::Subcommand;
use hhfuse::hhcrypt::{
    decrypt_physical, encrypt, keygen, read_ciphertext, write_ciphertext, CipherKey, FilterBank,
    KeygenConfig, PermutationLut, DEFAULT_BANK_SIZE, DEFAULT_TAU_SPAN,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::manifest::Manifest;
use crate::settings::Context;
use crate::CliResult;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search probe pairs covering every code of the filter bank.
    Keygen(KeygenArgs),
    /// Encrypt a file with a key.
    Enc(EncArgs),
    /// Decrypt a file by driving the key's filter bank.
    Dec(DecArgs),
}

#[derive(Debug, clap::Args)]
pub struct KeygenArgs {
    /// Key file to write (HHK1).
    #[arg(long, short)]
    output: PathBuf,
    /// Neurons in the bank; codes have this many bits.
    #[arg(long, default_value_t = DEFAULT_BANK_SIZE)]
    neurons: usize,
    /// Ratio of the slowest to the fastest neuron time scale.
    #[arg(long, default_value_t = DEFAULT_TAU_SPAN)]
    tau_span: f64,
    /// Maximum random probes before giving up.
    #[arg(long, default_value_t = KeygenConfig::default().budget)]
    budget: usize,
    /// Keep the first probe found for each code instead of moving it onto
    /// code boundaries.
    #[arg(long)]
    no_refine: bool,
}

#[derive(Debug, clap::Args)]
pub struct EncArgs {
    #[arg(long, short)]
    key: PathBuf,
    #[arg(long, short)]
    input: PathBuf,
    /// Ciphertext file to write (HHC1).
    #[arg(long, short)]
    output: PathBuf,
    /// Initialization byte; drawn from the seed when omitted.
    #[arg(long)]
    iv: Option<u8>,
}

#[derive(Debug, clap::Args)]
pub struct DecArgs {
    #[arg(long, short)]
    key: PathBuf,
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Apply the recomputed decode map even when it is not a permutation.
    #[arg(long)]
    lenient: bool,
    /// Add N(0, sigma^2) noise to every private pair before decrypting.
    #[arg(long)]
    perturb: Option<f64>,
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub fn run(ctx: &Context, cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Keygen(a) => run_keygen(ctx, a),
        Command::Enc(a) => run_enc(ctx, a),
        Command::Dec(a) => run_dec(ctx, a),
    }
}

#[derive(Serialize)]
struct KeygenRecord<'a> {
    bank: &'a FilterBank,
    keygen: &'a KeygenConfig,
}

fn run_keygen(ctx: &Context, a: &KeygenArgs) -> CliResult<()> {
    let (seed, source) = ctx.resolve_seed(None)?;
    let bank = FilterBank::staggered(a.neurons, a.tau_span)?;
    let config = KeygenConfig {
        budget: a.budget,
        refine: !a.no_refine,
        ..KeygenConfig::default()
    };
    let g = keygen(&bank, &config, &mut ChaCha8Rng::seed_from_u64(seed))?;
    g.key.write(&a.output)?;
    let mut m = Manifest::new(
        "crypt keygen",
        ctx,
        &KeygenRecord {
            bank: &bank,
            keygen: &config,
        },
    )?
    .with_seed(seed, source);
    m.output(&a.output);
    m.set_summary(&g.stats)?;
    println!(
        "{} codes covered with {} probes ({} corner, {} edge placements)",
        g.key.pairs.len(),
        g.stats.probes,
        g.stats.corners,
        g.stats.edges
    );
    m.write(&manifest_path(&a.output))
}

fn run_enc(ctx: &Context, a: &EncArgs) -> CliResult<()> {
    let key = CipherKey::read(&a.key)?;
    let lut = PermutationLut::physical(&key)?;
    let plaintext = std::fs::read(&a.input)?;
    let (iv, seed) = match a.iv {
        Some(iv) => (iv, None),
        None => {
            let (seed, source) = ctx.resolve_seed(None)?;
            (ChaCha8Rng::seed_from_u64(seed).random(), Some((seed, source)))
        }
    };
    write_ciphertext(&a.output, iv, &encrypt(&plaintext, &lut, iv))?;
    let mut m = Manifest::new("crypt enc", ctx, &serde_json::json!({ "key": a.key, "input": a.input, "iv": iv }))?;
    if let Some((s, src)) = seed {
        m = m.with_seed(s, src);
    }
    m.output(&a.output);
    println!("{} bytes encrypted, iv {iv}", plaintext.len());
    m.write(&manifest_path(&a.output))
}

fn run_dec(ctx: &Context, a: &DecArgs) -> CliResult<()> {
    let mut key = CipherKey::read(&a.key)?;
    let mut m = Manifest::new(
        "crypt dec",
        ctx,
        &serde_json::json!({ "key": a.key, "input": a.input, "strict": !a.lenient, "perturb": a.perturb }),
    )?;
    if let Some(sigma) = a.perturb {
        let (seed, source) = ctx.resolve_seed(None)?;
        key = key.perturbed(sigma, &mut ChaCha8Rng::seed_from_u64(seed))?;
        m = m.with_seed(seed, source);
    }
    let (iv, payload) = read_ciphertext(&a.input)?;
    let plaintext = decrypt_physical(&payload, &key, iv, !a.lenient)?;
    std::fs::write(&a.output, &plaintext)?;
    m.output(&a.output);
    println!("{} bytes decrypted", plaintext.len());
    m.write(&manifest_path(&a.output))
}
