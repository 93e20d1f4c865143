use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::background::{BackgroundSpec, CompoundPoisson};
use super::buffer::SpikeBuffer;
use super::network::{NetworkConfig, NetworkTopology, PopulationSpec};
use crate::dynamics::{hh_step_in_place, HHParams, NeuronState};
use crate::error::{Error, Result};

/// Extra Poisson drive from the thalamic population to its targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThalamicStimulus {
    pub onset_ms: f64,
    pub duration_ms: f64,
    /// Rate per thalamic neuron while active, Hz.
    pub rate_hz: f64,
    pub w_mean: f64,
    pub w_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CortexConfig {
    pub network: NetworkConfig,
    pub background: BackgroundSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus: Option<ThalamicStimulus>,
    /// Decay constant of the exponential synaptic current, ms.
    pub tau_syn: f64,
    /// HH integration steps per exchange step.
    pub substeps: usize,
    /// Conversion of synaptic current (uA) into membrane current density
    /// (uA/cm^2), i.e. inverse membrane area, per neuron class.
    pub exc_gain: f64,
    pub inh_gain: f64,
    pub duration_ms: f64,
    /// Initial interval excluded from statistics.
    pub warmup_ms: f64,
    /// Seed of the connectivity; replicas take their own input seeds.
    pub topology_seed: u64,
    pub threads: usize,
}

impl CortexConfig {
    /// Rest-state parameters at the given scale.
    pub fn rest(scale: f64) -> Self {
        CortexConfig {
            network: NetworkConfig {
                scale,
                ..Default::default()
            },
            background: BackgroundSpec {
                rate_hz: 8.0,
                w_mean: 0.17,
                w_std: 0.017,
            },
            stimulus: None,
            tau_syn: 0.5,
            substeps: 4,
            exc_gain: DEFAULT_EXC_GAIN,
            inh_gain: DEFAULT_INH_GAIN,
            duration_ms: 1000.0,
            warmup_ms: 200.0,
            topology_seed: 1,
            threads: 1,
        }
    }

    /// Thalamic-stimulation parameters: weaker background, stronger
    /// external weight, and a 10 ms thalamic volley at `onset_ms`.
    pub fn thalamic(scale: f64, onset_ms: f64) -> Self {
        let background = BackgroundSpec {
            rate_hz: 4.0,
            w_mean: 0.22,
            w_std: 0.022,
        };
        CortexConfig {
            background,
            stimulus: Some(ThalamicStimulus {
                onset_ms,
                duration_ms: 10.0,
                rate_hz: 120.0,
                w_mean: background.w_mean,
                w_std: background.w_std,
            }),
            duration_ms: onset_ms + 100.0,
            ..Self::rest(scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.background.validate()?;
        if self.substeps == 0 || !(self.tau_syn > 0.0) {
            return Err(Error::Config("substeps and tau_syn must be positive".into()));
        }
        if !(self.exc_gain >= 0.0) || !(self.inh_gain >= 0.0) {
            return Err(Error::Config("current gains must be non-negative".into()));
        }
        if !(self.duration_ms > 0.0) || !(self.warmup_ms >= 0.0) || self.warmup_ms >= self.duration_ms {
            return Err(Error::Config(format!(
                "need 0 <= warmup ({}) < duration ({})",
                self.warmup_ms, self.duration_ms
            )));
        }
        if let Some(s) = &self.stimulus {
            if !(s.onset_ms >= 0.0) || s.onset_ms >= self.duration_ms {
                return Err(Error::Config(format!(
                    "stimulus onset {} ms lies outside the {} ms simulation",
                    s.onset_ms, self.duration_ms
                )));
            }
            if !(s.duration_ms >= 0.0) || !(s.rate_hz >= 0.0) || !(s.w_std >= 0.0) {
                return Err(Error::Config(format!("invalid stimulus {s:?}")));
            }
        }
        Ok(())
    }

    pub fn neuron(&self) -> HHParams {
        let mut p = HHParams::default();
        p.dt = self.network.dt / self.substeps as f64;
        p
    }

    pub fn steps(&self) -> usize {
        (self.duration_ms / self.network.dt).round() as usize
    }
}

/// Conversion from synaptic current to current density for excitatory
/// cells: weights in µA act as µA/cm^2.
pub const DEFAULT_EXC_GAIN: f64 = 1.0;
/// Inhibitory cells are taken to have half the membrane area.
pub const DEFAULT_INH_GAIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub t_ms: f64,
    pub pop: usize,
    /// Index within the population.
    pub neuron: usize,
}

struct Replica {
    i_syn: Vec<f64>,
    incoming: Vec<f64>,
    buffer: SpikeBuffer,
    rng: ChaCha8Rng,
    events: Vec<(usize, u32)>,
}

/// B independent replicas of one network advanced in a single batched
/// state. Replica `r` draws its inputs from `seeds[r]` only, so it evolves
/// exactly as a run of its own.
pub struct Simulation<'a> {
    topology: &'a NetworkTopology,
    config: CortexConfig,
    neuron: HHParams,
    replicas: Vec<Replica>,
    /// Neuron state of all `B * N` cells, split into contiguous chunks.
    chunks: Vec<(Range<usize>, NeuronState)>,
    drive: Vec<f64>,
    fired: Vec<bool>,
    background: Vec<CompoundPoisson>,
    /// Thalamic sampler indexed by in-degree.
    thalamic: Vec<CompoundPoisson>,
    gains: Vec<f64>,
    decay: f64,
    step: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(topology: &'a NetworkTopology, config: &CortexConfig, seeds: &[u64]) -> Result<Self> {
        config.validate()?;
        if seeds.is_empty() {
            return Err(Error::Usage("simulation needs at least one replica seed".into()));
        }
        if (topology.dt - config.network.dt).abs() > 1e-15 {
            return Err(Error::Config("topology and config use different dt".into()));
        }
        let n = topology.neurons();
        let total = n * seeds.len();
        let neuron = config.neuron();
        let dt_s = config.network.dt * 1e-3;
        let background = topology
            .k_ext
            .iter()
            .map(|&k| {
                CompoundPoisson::new(
                    k as f64 * config.background.rate_hz * dt_s,
                    config.background.w_mean,
                    config.background.w_std,
                )
            })
            .collect::<Result<_>>()?;
        let max_k = topology.thalamic_indegree.iter().copied().max().unwrap_or(0) as usize;
        let thalamic = match &config.stimulus {
            Some(s) => (0..=max_k)
                .map(|k| CompoundPoisson::new(k as f64 * s.rate_hz * dt_s, s.w_mean, s.w_std))
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let gains = topology
            .populations
            .iter()
            .map(|p| if p.inhibitory { config.inh_gain } else { config.exc_gain })
            .collect();
        let replicas = seeds
            .iter()
            .map(|&s| Replica {
                i_syn: vec![0.0; n],
                incoming: vec![0.0; n],
                buffer: SpikeBuffer::new(n, topology.max_delay),
                rng: ChaCha8Rng::seed_from_u64(s),
                events: Vec::new(),
            })
            .collect();
        let workers = config.threads.max(1).min(total.max(1));
        let chunk = total.div_ceil(workers).max(1);
        let chunks = (0..total)
            .step_by(chunk)
            .map(|start| {
                let r = start..(start + chunk).min(total);
                let s = NeuronState::resting(&neuron, r.len());
                (r, s)
            })
            .collect();
        Ok(Simulation {
            topology,
            config: config.clone(),
            neuron,
            replicas,
            chunks,
            drive: vec![0.0; total],
            fired: vec![false; total],
            background,
            thalamic,
            gains,
            decay: (-config.network.dt / config.tau_syn).exp(),
            step: 0,
        })
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Synaptic current (uA) of every neuron in replica `r`.
    pub fn synaptic_current(&self, r: usize) -> &[f64] {
        &self.replicas[r].i_syn
    }

    pub fn potentials(&self, r: usize) -> Vec<f64> {
        let n = self.topology.neurons();
        let range = r * n..(r + 1) * n;
        let mut v = Vec::with_capacity(n);
        for (cr, s) in &self.chunks {
            for g in cr.clone() {
                if range.contains(&g) {
                    v.push(s.v[g - cr.start]);
                }
            }
        }
        v
    }

    /// Treats `neuron` of replica `r` as having fired just before the next
    /// step: its synapses deliver `delay` steps after that step begins.
    pub fn inject_spike(&mut self, r: usize, neuron: usize) -> Result<()> {
        let rep = &mut self.replicas[r];
        for (post, w, d) in self.topology.outgoing(neuron) {
            rep.buffer.add(d, post, w)?;
        }
        Ok(())
    }

    fn stimulus_active(&self) -> bool {
        let t = self.step as f64 * self.config.network.dt;
        self.config
            .stimulus
            .is_some_and(|s| t >= s.onset_ms && t < s.onset_ms + s.duration_ms)
    }

    /// One exchange step: collect arrivals and external input, filter,
    /// integrate the neurons, and schedule outgoing spikes.
    pub fn step(&mut self) -> Result<()> {
        let n = self.topology.neurons();
        let thalamic_on = self.stimulus_active();
        for (r, rep) in self.replicas.iter_mut().enumerate() {
            rep.incoming.iter_mut().for_each(|x| *x = 0.0);
            rep.buffer.drain_into(&mut rep.incoming);
            for i in 0..n {
                let pop = self.topology.population_of(i);
                let mut x = self.background[pop].sample(&mut rep.rng);
                if thalamic_on {
                    let k = self.topology.thalamic_indegree[i] as usize;
                    if k > 0 {
                        x += self.thalamic[k].sample(&mut rep.rng);
                    }
                }
                let s = rep.i_syn[i] * self.decay + rep.incoming[i] + x;
                rep.i_syn[i] = s;
                self.drive[r * n + i] = self.gains[pop] * s;
            }
        }

        let neuron = &self.neuron;
        let substeps = self.config.substeps;
        let drive = &self.drive;
        let mut outputs: Vec<(&mut (Range<usize>, NeuronState), &mut [bool])> = Vec::new();
        let mut fired_rest: &mut [bool] = &mut self.fired;
        for c in self.chunks.iter_mut() {
            let (head, tail) = std::mem::take(&mut fired_rest).split_at_mut(c.0.len());
            outputs.push((c, head));
            fired_rest = tail;
        }
        let work = |(chunk, fired): (&mut (Range<usize>, NeuronState), &mut [bool])| -> Result<()> {
            let (range, state) = chunk;
            let input = &drive[range.clone()];
            let mut spk = vec![false; range.len()];
            fired.iter_mut().for_each(|f| *f = false);
            for _ in 0..substeps {
                hh_step_in_place(state, input, neuron, &mut spk)?;
                for (f, s) in fired.iter_mut().zip(&spk) {
                    *f |= *s;
                }
            }
            Ok(())
        };
        if outputs.len() == 1 {
            outputs.into_iter().try_for_each(work)?;
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = outputs
                    .into_iter()
                    .map(|o| scope.spawn(move || work(o)))
                    .collect();
                handles
                    .into_iter()
                    .try_for_each(|h| h.join().expect("worker panicked"))
            })?;
        }

        for (r, rep) in self.replicas.iter_mut().enumerate() {
            for i in 0..n {
                if self.fired[r * n + i] {
                    rep.events.push((self.step, i as u32));
                    for (post, w, d) in self.topology.outgoing(i) {
                        rep.buffer.add(d, post, w)?;
                    }
                }
            }
            rep.buffer.advance();
        }
        self.step += 1;
        Ok(())
    }

    pub fn run(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Spike rasters per replica.
    pub fn into_results(self) -> Vec<RunResult> {
        let dt = self.config.network.dt;
        let topo = self.topology;
        self.replicas
            .into_iter()
            .map(|rep| RunResult {
                dt,
                duration_ms: self.step as f64 * dt,
                warmup_ms: self.config.warmup_ms,
                populations: topo.populations.clone(),
                events: rep
                    .events
                    .into_iter()
                    .map(|(step, i)| {
                        let pop = topo.population_of(i as usize);
                        SpikeEvent {
                            t_ms: (step + 1) as f64 * dt,
                            pop,
                            neuron: i as usize - topo.populations[pop].offset,
                        }
                    })
                    .collect(),
            })
            .collect()
    }
}

/// Runs one replica per seed for the configured duration.
pub fn simulate_batch(
    topology: &NetworkTopology,
    config: &CortexConfig,
    seeds: &[u64],
) -> Result<Vec<RunResult>> {
    let mut sim = Simulation::new(topology, config, seeds)?;
    sim.run(config.steps())?;
    Ok(sim.into_results())
}

pub fn simulate(topology: &NetworkTopology, config: &CortexConfig, seed: u64) -> Result<RunResult> {
    Ok(simulate_batch(topology, config, &[seed])?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    pub name: String,
    pub mean_rate_hz: f64,
    pub q1_hz: f64,
    pub median_hz: f64,
    pub q3_hz: f64,
    /// Mean ISI coefficient of variation over neurons with at least three
    /// spikes.
    pub isi_cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dt: f64,
    pub duration_ms: f64,
    pub warmup_ms: f64,
    pub populations: Vec<PopulationSpec>,
    pub events: Vec<SpikeEvent>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl RunResult {
    /// Rate and irregularity per population after the warmup.
    pub fn stats(&self) -> Vec<PopulationStats> {
        let window_s = (self.duration_ms - self.warmup_ms) * 1e-3;
        let mut times: Vec<Vec<Vec<f64>>> = self
            .populations
            .iter()
            .map(|p| vec![Vec::new(); p.size])
            .collect();
        for e in self.events.iter().filter(|e| e.t_ms > self.warmup_ms) {
            times[e.pop][e.neuron].push(e.t_ms);
        }
        self.populations
            .iter()
            .zip(&times)
            .map(|(p, per)| {
                let mut rates: Vec<f64> = per.iter().map(|t| t.len() as f64 / window_s).collect();
                rates.sort_by(f64::total_cmp);
                let cvs: Vec<f64> = per
                    .iter()
                    .filter(|t| t.len() >= 3)
                    .filter_map(|t| crate::dynamics::isi_cv(t))
                    .collect();
                PopulationStats {
                    name: p.name.clone(),
                    mean_rate_hz: rates.iter().sum::<f64>() / rates.len() as f64,
                    q1_hz: quantile(&rates, 0.25),
                    median_hz: quantile(&rates, 0.5),
                    q3_hz: quantile(&rates, 0.75),
                    isi_cv: (!cvs.is_empty()).then(|| cvs.iter().sum::<f64>() / cvs.len() as f64),
                }
            })
            .collect()
    }

    /// Population rate (Hz per neuron) in bins of `bin_ms` over
    /// `[from_ms, to_ms)`; `out[pop][bin]`.
    pub fn psth(&self, bin_ms: f64, from_ms: f64, to_ms: f64) -> Vec<Vec<f64>> {
        let bins = ((to_ms - from_ms) / bin_ms).ceil().max(0.0) as usize;
        let mut out = vec![vec![0.0; bins]; self.populations.len()];
        for e in &self.events {
            if e.t_ms >= from_ms && e.t_ms < to_ms {
                let b = ((e.t_ms - from_ms) / bin_ms) as usize;
                if b < bins {
                    out[e.pop][b] += 1.0;
                }
            }
        }
        for (p, row) in self.populations.iter().zip(&mut out) {
            let norm = 1e3 / (bin_ms * p.size as f64);
            row.iter_mut().for_each(|x| *x *= norm);
        }
        out
    }

    /// Per population, the time after `onset_ms` of the first `bin_ms` bin
    /// whose rate exceeds the pre-onset mean by three standard deviations
    /// plus `min_rise_hz`; `None` if that never happens within `window_ms`.
    pub fn response_onsets(
        &self,
        onset_ms: f64,
        window_ms: f64,
        bin_ms: f64,
        min_rise_hz: f64,
    ) -> Vec<Option<f64>> {
        let before = self.psth(bin_ms, self.warmup_ms, onset_ms);
        let after = self.psth(bin_ms, onset_ms, onset_ms + window_ms);
        before
            .iter()
            .zip(&after)
            .map(|(pre, post)| {
                let n = pre.len().max(1) as f64;
                let mean = pre.iter().sum::<f64>() / n;
                let var = pre.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let level = mean + 3.0 * var.sqrt() + min_rise_hz;
                post.iter()
                    .position(|&x| x > level)
                    .map(|b| b as f64 * bin_ms)
            })
            .collect()
    }

    pub fn write_events_ndjson<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            writeln!(
                out,
                "{}",
                serde_json::json!({
                    "t_ms": e.t_ms,
                    "pop": self.populations[e.pop].name,
                    "neuron": e.neuron,
                })
            )?;
        }
        Ok(())
    }

    pub fn write_rates_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "population,mean_rate_hz,q1_hz,median_hz,q3_hz,isi_cv")?;
        for s in self.stats() {
            let cv = s.isi_cv.map(|c| c.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.name, s.mean_rate_hz, s.q1_hz, s.median_hz, s.q3_hz, cv
            )?;
        }
        Ok(())
    }

    /// Raster with populations stacked top to bottom in table order.
    pub fn raster_svg(&self, title: &str) -> String {
        let total: usize = self.populations.iter().map(|p| p.size).sum();
        let events: Vec<(f64, usize)> = self
            .events
            .iter()
            .map(|e| (e.t_ms, total - 1 - (self.populations[e.pop].offset + e.neuron)))
            .collect();
        crate::plot::raster_plot(title, &events, total, self.duration_ms)
    }
}
