use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hhfuse::dynamics::{simulate, HHParams, LIFParams, PointModel, Trace};
use hhfuse::morphology::{run_pulses, CompartmentGraph, MorphologyConfig, Pulse};
use hhfuse::plot::{line_plot, Series};
use hhfuse::Error;
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::settings::{ensure_dir, load_config, Context};
use crate::CliResult;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// TOML config, or a manifest from an earlier run.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, short, default_value = "hhfuse-out")]
    out: PathBuf,
    /// Sweep one drive parameter, e.g. `freq=1:200:2` or `amplitude=0:20:0.5`
    /// (start:stop:step, inclusive), and write a rate table instead of traces.
    #[arg(long)]
    sweep: Option<String>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Hh,
    Lif,
    Morphology,
}

/// Point-neuron drive `offset + n * spread + amplitude * sin(2 pi f t)` for
/// neuron `n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Drive {
    pub offset: f64,
    pub amplitude: f64,
    pub freq_hz: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelKind,
    pub duration_ms: f64,
    #[serde(default = "one")]
    pub neurons: usize,
    #[serde(default)]
    pub drive: Drive,
    /// Kinetic slow-down factor for point models.
    #[serde(default = "unit")]
    pub time_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hh: Option<HHParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lif: Option<LIFParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morphology: Option<MorphologyConfig>,
    /// Morphology TOML file; resolved into `morphology`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morphology_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pulses: Vec<Pulse>,
    /// Same syntax as `--sweep`, which overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    Freq,
    Amplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub key: SweepKey,
    pub values: Vec<f64>,
}

/// Parses `key=start:stop:step` with an inclusive stop.
pub fn parse_sweep(text: &str) -> Result<Sweep, Error> {
    let bad = || Error::Usage(format!("sweep {text:?} is not of the form key=start:stop:step"));
    let (key, range) = text.split_once('=').ok_or_else(bad)?;
    let key = match key.trim() {
        "freq" | "freq_hz" => SweepKey::Freq,
        "amplitude" | "amp" => SweepKey::Amplitude,
        other => return Err(Error::Usage(format!("cannot sweep {other:?}; use freq or amplitude"))),
    };
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Usage(format!("sweep range {range:?} needs start <= stop and step > 0")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok(Sweep {
        key,
        values: (0..count).map(|k| start + k as f64 * step).collect(),
    })
}

impl SimulateConfig {
    fn validate(&self) -> Result<(), Error> {
        if !(self.duration_ms > 0.0) {
            return Err(Error::Config(format!("duration_ms must be > 0, got {}", self.duration_ms)));
        }
        if self.neurons == 0 {
            return Err(Error::Config("neurons must be at least 1".into()));
        }
        if !(self.time_scale > 0.0) {
            return Err(Error::Config(format!("time_scale must be > 0, got {}", self.time_scale)));
        }
        Ok(())
    }

    /// Fills in defaults so that the manifest is self-contained.
    fn resolve(mut self) -> CliResult<Self> {
        self.validate()?;
        match self.model {
            ModelKind::Hh => {
                self.hh.get_or_insert_with(HHParams::default).validate()?;
            }
            ModelKind::Lif => {
                self.lif.get_or_insert_with(LIFParams::default).validate()?;
            }
            ModelKind::Morphology => {
                if let Some(path) = self.morphology_file.take() {
                    if self.morphology.is_some() {
                        return Err(Error::Config("give either morphology or morphology_file, not both".into()).into());
                    }
                    self.morphology = Some(MorphologyConfig::from_file(&path)?);
                }
                if self.morphology.is_none() {
                    return Err(Error::Config("model = \"morphology\" needs a [morphology] table or morphology_file".into()).into());
                }
            }
        }
        Ok(self)
    }

    fn point_model(&self) -> PointModel {
        match self.model {
            ModelKind::Lif => PointModel::Lif(self.lif.expect("resolved")),
            _ => PointModel::Hh(self.hh.clone().expect("resolved")),
        }
    }
}

fn point_inputs(drive: &Drive, neurons: usize, steps: usize, dt: f64) -> Vec<Vec<f64>> {
    let w = 2.0 * std::f64::consts::PI * drive.freq_hz * 1e-3;
    (0..steps)
        .map(|k| {
            let ac = drive.amplitude * (w * k as f64 * dt).sin();
            (0..neurons)
                .map(|n| drive.offset + n as f64 * drive.spread + ac)
                .collect()
        })
        .collect()
}

/// Runs a point model; the drive is sampled on the unscaled step.
fn run_point(cfg: &SimulateConfig, drive: &Drive) -> CliResult<Trace> {
    let model = cfg.point_model();
    let dt = model.dt();
    let steps = (cfg.duration_ms / dt).round() as usize;
    let inputs = point_inputs(drive, cfg.neurons, steps, dt);
    let scaled = model.time_scaled(cfg.time_scale);
    let mut trace = simulate(&scaled, &inputs, &scaled.resting_state(cfg.neurons))?;
    trace.dt = dt;
    Ok(trace)
}

pub fn run(ctx: &Context, args: &Args) -> CliResult<()> {
    let mut cfg = load_config::<SimulateConfig>(&args.config)?;
    if args.sweep.is_some() {
        cfg.sweep = args.sweep.clone();
    }
    let cfg = cfg.resolve()?;
    let sweep = cfg.sweep.as_deref().map(parse_sweep).transpose()?;
    if sweep.is_some() && cfg.model == ModelKind::Morphology {
        return Err(Error::Usage("--sweep applies to point models only".into()).into());
    }
    ensure_dir(&args.out)?;
    let mut manifest = Manifest::new("simulate", ctx, &cfg)?;
    match (&sweep, cfg.model) {
        (Some(s), _) => run_sweep(ctx, &cfg, s, args, &mut manifest)?,
        (None, ModelKind::Morphology) => run_morphology(&cfg, args, &mut manifest)?,
        (None, _) => {
            let trace = run_point(&cfg, &cfg.drive)?;
            let path = args.out.join("trace.csv");
            trace.write_csv(BufWriter::new(File::create(&path)?))?;
            manifest.output(&path);
            if args.svg {
                let series: Vec<Series> = (0..trace.neurons())
                    .map(|n| Series {
                        label: format!("neuron {n}"),
                        points: trace
                            .voltage_of(n)
                            .into_iter()
                            .enumerate()
                            .map(|(k, v)| ((k + 1) as f64 * trace.dt, v))
                            .collect(),
                    })
                    .collect();
                write_svg(&args.out.join("trace.svg"), &line_plot("membrane potential", "time (ms)", "V", &series), &mut manifest)?;
            }
            let counts = trace.spike_counts();
            println!("{} steps x {} neurons, spike counts {counts:?}", trace.len(), trace.neurons());
            manifest.set_summary(&serde_json::json!({ "steps": trace.len(), "spike_counts": counts }))?;
        }
    }
    manifest.write(&args.out.join("manifest.json"))
}

fn write_svg(path: &Path, svg: &str, manifest: &mut Manifest) -> CliResult<()> {
    std::fs::write(path, svg)?;
    manifest.output(path);
    Ok(())
}

fn run_morphology(cfg: &SimulateConfig, args: &Args, manifest: &mut Manifest) -> CliResult<()> {
    let graph = CompartmentGraph::from_config(cfg.morphology.as_ref().expect("resolved"))?;
    let trace = run_pulses(&graph, &cfg.pulses, cfg.duration_ms)?;
    let path = args.out.join("trace.csv");
    trace.write_csv(BufWriter::new(File::create(&path)?))?;
    manifest.output(&path);
    if args.svg {
        write_svg(&args.out.join("trace.svg"), &trace.to_svg("compartment potentials"), manifest)?;
    }
    println!("{} compartments, soma spikes at {:?} ms", graph.len(), trace.soma_spikes());
    manifest.set_summary(&serde_json::json!({ "soma_spikes_ms": trace.soma_spikes() }))
}

/// Firing rate per neuron for every sweep value; values are split across
/// threads and reassembled in order, so the table does not depend on the
/// thread count.
fn run_sweep(ctx: &Context, cfg: &SimulateConfig, sweep: &Sweep, args: &Args, manifest: &mut Manifest) -> CliResult<()> {
    let rates_at = |x: f64| -> CliResult<Vec<f64>> {
        let mut drive = cfg.drive;
        match sweep.key {
            SweepKey::Freq => drive.freq_hz = x,
            SweepKey::Amplitude => drive.amplitude = x,
        }
        let trace = run_point(cfg, &drive)?;
        Ok(trace
            .spike_counts()
            .into_iter()
            .map(|c| c as f64 / (cfg.duration_ms * 1e-3))
            .collect())
    };
    let chunk = sweep.values.len().div_ceil(ctx.threads).max(1);
    let rows: Vec<Vec<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sweep
            .values
            .chunks(chunk)
            .map(|xs| scope.spawn(move || xs.iter().map(|&x| rates_at(x)).collect::<CliResult<Vec<_>>>()))
            .collect();
        let mut rows = Vec::new();
        for h in handles {
            rows.extend(h.join().expect("sweep worker panicked")?);
        }
        Ok::<_, crate::CliError>(rows)
    })?;

    let path = args.out.join("sweep.csv");
    let mut text = String::from("freq_hz,amplitude,neuron_id,rate_hz\n");
    for (&x, rates) in sweep.values.iter().zip(&rows) {
        let (f, a) = match sweep.key {
            SweepKey::Freq => (x, cfg.drive.amplitude),
            SweepKey::Amplitude => (cfg.drive.freq_hz, x),
        };
        for (n, r) in rates.iter().enumerate() {
            text.push_str(&format!("{f},{a},{n},{r}\n"));
        }
    }
    std::fs::write(&path, text)?;
    manifest.output(&path);
    if args.svg {
        let x_label = match sweep.key {
            SweepKey::Freq => "drive frequency (Hz)",
            SweepKey::Amplitude => "drive amplitude",
        };
        let series: Vec<Series> = (0..cfg.neurons)
            .map(|n| Series {
                label: format!("neuron {n}"),
                points: sweep.values.iter().zip(&rows).map(|(&x, r)| (x, r[n])).collect(),
            })
            .collect();
        write_svg(&args.out.join("sweep.svg"), &line_plot("firing rate", x_label, "rate (Hz)", &series), manifest)?;
    }
    let peak = sweep
        .values
        .iter()
        .zip(&rows)
        .max_by(|a, b| a.1[0].total_cmp(&b.1[0]))
        .map(|(&x, r)| (x, r[0]));
    if let Some((x, r)) = peak {
        println!("{} sweep points; neuron 0 peaks at {r} Hz (value {x})", sweep.values.len());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_ranges_are_inclusive() {
        let s = parse_sweep("freq=1:200:2").unwrap();
        assert_eq!(s.key, SweepKey::Freq);
        assert_eq!(s.values.len(), 100);
        assert_eq!(s.values[0], 1.0);
        assert_eq!(*s.values.last().unwrap(), 199.0);
        assert_eq!(parse_sweep("amplitude=0:1:0.25").unwrap().values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn malformed_sweeps_are_usage_errors() {
        for bad in ["freq", "freq=1:2", "freq=3:1:1", "freq=1:5:0", "tau=1:2:1", "freq=a:b:c"] {
            assert!(matches!(parse_sweep(bad), Err(Error::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn drive_spreads_across_neurons() {
        let d = Drive {
            offset: 1.0,
            spread: 0.5,
            ..Default::default()
        };
        assert_eq!(point_inputs(&d, 3, 2, 0.1), vec![vec![1.0, 1.5, 2.0]; 2]);
    }
}
