use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use hhfuse::cortex::{build_network, simulate_batch, CortexConfig, MicrocircuitTable};
use hhfuse::Error;
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::settings::{ensure_dir, load_config, Context, SeedSource};
use crate::CliResult;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// TOML config, or a manifest from an earlier run.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, short, default_value = "hhfuse-out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Rest,
    Thalamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CortexRunConfig {
    #[serde(default = "rest")]
    pub preset: Preset,
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// One run per seed; `--seed` or the seed fallback gives a single run.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_ms: Option<f64>,
    /// Thalamic volley onset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onset_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_seed: Option<u64>,
    /// Connectivity table file; defaults to the built-in microcircuit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_file: Option<PathBuf>,
    /// Complete engine config. When present the preset and the overrides
    /// above are ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cortex: Option<CortexConfig>,
}

fn rest() -> Preset {
    Preset::Rest
}

fn default_scale() -> f64 {
    0.1
}

const DEFAULT_ONSET_MS: f64 = 700.0;

impl CortexRunConfig {
    fn engine_config(&self) -> CortexConfig {
        if let Some(c) = &self.cortex {
            return c.clone();
        }
        let mut c = match self.preset {
            Preset::Rest => CortexConfig::rest(self.scale),
            Preset::Thalamic => CortexConfig::thalamic(self.scale, self.onset_ms.unwrap_or(DEFAULT_ONSET_MS)),
        };
        if let Some(d) = self.duration_ms {
            c.duration_ms = d;
        }
        if let Some(w) = self.warmup_ms {
            c.warmup_ms = w;
        }
        if let Some(s) = self.topology_seed {
            c.topology_seed = s;
        }
        c
    }
}

pub fn run(ctx: &Context, args: &Args) -> CliResult<()> {
    let mut cfg: CortexRunConfig = load_config(&args.config)?;
    // an explicit --seed replaces the configured seed list
    let (seeds, source) = match (ctx.seed_flag, cfg.seeds.clone()) {
        (None, Some(list)) => (list, SeedSource::Config),
        _ => {
            let (s, source) = ctx.resolve_seed(None)?;
            (vec![s], source)
        }
    };
    cfg.seeds = Some(seeds.clone());
    if seeds.is_empty() {
        return Err(Error::Config("seeds must not be empty".into()).into());
    }
    let mut engine = cfg.engine_config();
    engine.threads = ctx.threads;
    engine.validate()?;
    let table = match &cfg.table_file {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read table file {}: {e}", p.display())))?;
            MicrocircuitTable::from_toml_str(&text)?
        }
        None => MicrocircuitTable::default(),
    };
    cfg.cortex = Some(engine.clone());
    ensure_dir(&args.out)?;

    let topo = build_network(&engine.network, &table, engine.topology_seed)?;
    log::info!("{} neurons, {} synapses", topo.neurons(), topo.synapses());
    let runs = simulate_batch(&topo, &engine, &seeds)?;

    let mut manifest = Manifest::new("cortex", ctx, &cfg)?.with_seed(seeds[0], source);
    let mut summary = Vec::new();
    for (&s, r) in seeds.iter().zip(&runs) {
        let events = args.out.join(format!("spikes_seed{s}.ndjson"));
        r.write_events_ndjson(BufWriter::new(File::create(&events)?))?;
        let rates = args.out.join(format!("rates_seed{s}.csv"));
        r.write_rates_csv(BufWriter::new(File::create(&rates)?))?;
        let raster = args.out.join(format!("raster_seed{s}.svg"));
        std::fs::write(&raster, r.raster_svg(&format!("seed {s}")))?;
        for p in [&events, &rates, &raster] {
            manifest.output(p);
        }

        println!("seed {s}:");
        let stats = r.stats();
        for st in &stats {
            println!("  {:<6} {:8.3} Hz", st.name, st.mean_rate_hz);
        }
        let onsets = engine
            .stimulus
            .map(|stim| r.response_onsets(stim.onset_ms, 50.0, 1.0, 5.0));
        if let Some(on) = &onsets {
            for (st, o) in stats.iter().zip(on) {
                match o {
                    Some(t) => println!("  {:<6} responds {t:.1} ms after onset", st.name),
                    None => println!("  {:<6} no response", st.name),
                }
            }
        }
        summary.push(serde_json::json!({ "seed": s, "stats": stats, "response_onsets_ms": onsets }));
    }
    manifest.set_summary(&summary)?;
    manifest.write(&args.out.join("manifest.json"))
}
