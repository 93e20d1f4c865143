use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::tables::{MicrocircuitTable, N_POPULATIONS};
use crate::error::{Error, Result};

/// Default simulated patch; `scale = 1` instantiates all of it.
pub const PATCH_AREA_MM2: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Fraction of the patch's neurons instantiated, in `(0, 1]`.
    pub scale: f64,
    pub area_mm2: f64,
    /// Recurrent current jump, uA; std is per block `std / mean` times the
    /// block mean.
    pub weight_mean: f64,
    pub weight_std: f64,
    /// Exchange step for spikes and delays, ms.
    pub dt: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            scale: 0.1,
            area_mm2: PATCH_AREA_MM2,
            weight_mean: 0.26,
            weight_std: 0.026,
            dt: 0.1,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::Config(format!("scale must be in (0, 1], got {}", self.scale)));
        }
        if !(self.area_mm2 > 0.0) || !(self.dt > 0.0) {
            return Err(Error::Config("area and dt must be positive".into()));
        }
        if !(self.weight_mean >= 0.0) || !(self.weight_std >= 0.0) {
            return Err(Error::Config("weight mean and std must be non-negative".into()));
        }
        Ok(())
    }

    /// Neurons per population.
    pub fn sizes(&self, table: &MicrocircuitTable) -> Vec<usize> {
        let f = self.area_mm2 / table.area_mm2 * self.scale;
        table.sizes.iter().map(|&n| (n as f64 * f).round() as usize).collect()
    }

    /// Connection probability `[target][source]` for the configured area.
    pub fn probabilities(&self, table: &MicrocircuitTable) -> Vec<Vec<f64>> {
        let f = table.area_factor(self.area_mm2);
        table
            .probabilities
            .iter()
            .map(|row| row.iter().map(|p| (p * f).min(1.0)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub name: String,
    pub size: usize,
    pub inhibitory: bool,
    /// Index of the first neuron in global numbering.
    pub offset: usize,
}

/// Expected population and synapse totals without instantiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCounts {
    pub neurons: usize,
    pub synapses: f64,
}

pub fn expected_counts(config: &NetworkConfig, table: &MicrocircuitTable) -> Result<ExpectedCounts> {
    config.validate()?;
    let sizes = config.sizes(table);
    let p = config.probabilities(table);
    let mut synapses = 0.0;
    for (a, row) in p.iter().enumerate() {
        for (b, &pab) in row.iter().enumerate() {
            synapses += pab * pair_count(sizes[b], sizes[a], a == b) as f64;
        }
    }
    Ok(ExpectedCounts {
        neurons: sizes.iter().sum(),
        synapses,
    })
}

/// Ordered (pre, post) pairs of a block; self-connections are excluded.
pub fn pair_count(n_pre: usize, n_post: usize, same_population: bool) -> usize {
    if same_population {
        n_pre * n_post.saturating_sub(1)
    } else {
        n_pre * n_post
    }
}

/// Summary of one (target, source) block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub count: usize,
    pub weight_mean: f64,
    pub weight_std: f64,
}

/// Sparse connectivity in compressed rows by presynaptic neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub populations: Vec<PopulationSpec>,
    pub dt: f64,
    row_start: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    delays: Vec<u16>,
    /// Thalamic in-degree per neuron.
    pub thalamic_indegree: Vec<u32>,
    /// External (background) in-degree per population.
    pub k_ext: Vec<usize>,
    pub max_delay: usize,
    pop_of: Vec<u8>,
}

impl NetworkTopology {
    pub fn neurons(&self) -> usize {
        self.pop_of.len()
    }

    pub fn synapses(&self) -> usize {
        self.targets.len()
    }

    pub fn population_of(&self, neuron: usize) -> usize {
        self.pop_of[neuron] as usize
    }

    /// `(target, weight, delay steps)` of every synapse leaving `pre`.
    pub fn outgoing(&self, pre: usize) -> impl Iterator<Item = (usize, f64, usize)> + '_ {
        let r = self.row_start[pre]..self.row_start[pre + 1];
        self.targets[r.clone()]
            .iter()
            .zip(&self.weights[r.clone()])
            .zip(&self.delays[r])
            .map(|((&t, &w), &d)| (t as usize, w, d as usize))
    }

    /// Realized synapse count and weight statistics per `[target][source]`.
    pub fn block_stats(&self) -> Vec<Vec<BlockStats>> {
        let n = self.populations.len();
        let mut acc = vec![vec![(0usize, 0.0f64, 0.0f64); n]; n];
        for pre in 0..self.neurons() {
            let b = self.population_of(pre);
            for (post, w, _) in self.outgoing(pre) {
                let e = &mut acc[self.population_of(post)][b];
                e.0 += 1;
                e.1 += w;
                e.2 += w * w;
            }
        }
        acc.into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|(c, s, s2)| {
                        let mean = if c > 0 { s / c as f64 } else { 0.0 };
                        let var = if c > 1 {
                            ((s2 - c as f64 * mean * mean) / (c - 1) as f64).max(0.0)
                        } else {
                            0.0
                        };
                        BlockStats {
                            count: c,
                            weight_mean: mean,
                            weight_std: var.sqrt(),
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn delay_distribution(mean: f64, std: f64) -> Result<LogNormal<f64>> {
    let s2 = (1.0 + (std / mean).powi(2)).ln();
    LogNormal::new(mean.ln() - s2 / 2.0, s2.sqrt()).map_err(|e| Error::Config(e.to_string()))
}

/// Samples the network. Connections are independent Bernoulli trials per
/// ordered pair (no self-connections); magnitudes are Gaussian clipped at
/// zero and signed by the source population; delays are lognormal, rounded
/// to steps, at least one step.
pub fn build_network(
    config: &NetworkConfig,
    table: &MicrocircuitTable,
    seed: u64,
) -> Result<NetworkTopology> {
    config.validate()?;
    table.validate()?;
    let sizes = config.sizes(table);
    if let Some(k) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::Config(format!(
            "scale {} leaves population {} empty",
            config.scale, table.populations[k]
        )));
    }
    let probs = config.probabilities(table);
    let mut populations = Vec::with_capacity(N_POPULATIONS);
    let mut offset = 0;
    for (k, &size) in sizes.iter().enumerate() {
        populations.push(PopulationSpec {
            name: table.populations[k].clone(),
            size,
            inhibitory: table.is_inhibitory(k),
            offset,
        });
        offset += size;
    }
    let total = offset;
    let pop_of: Vec<u8> = populations
        .iter()
        .enumerate()
        .flat_map(|(k, p)| std::iter::repeat_n(k as u8, p.size))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delay_exc = delay_distribution(table.delay_exc.0, table.delay_exc.1)?;
    let delay_inh = delay_distribution(table.delay_inh.0, table.delay_inh.1)?;
    let rel_std = if config.weight_mean > 0.0 {
        config.weight_std / config.weight_mean
    } else {
        0.0
    };
    let mut row_start = Vec::with_capacity(total + 1);
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    let mut delays = Vec::new();
    let mut max_delay = 1;
    for (b, pre_pop) in populations.iter().enumerate() {
        let inhibitory = pre_pop.inhibitory;
        let delay_dist = if inhibitory { &delay_inh } else { &delay_exc };
        let weight_dists: Vec<Normal<f64>> = (0..N_POPULATIONS)
            .map(|a| {
                let mut mean = config.weight_mean;
                if inhibitory {
                    mean *= table.inhibitory_factor.abs();
                }
                if a == 0 && b == 2 {
                    mean *= table.l4e_to_l23e_factor;
                }
                Normal::new(mean, mean * rel_std).map_err(|e| Error::Config(e.to_string()))
            })
            .collect::<Result<_>>()?;
        let skips: Vec<Option<Geometric>> = (0..N_POPULATIONS)
            .map(|a| {
                let p = probs[a][b];
                if p > 0.0 {
                    Geometric::new(p).ok()
                } else {
                    None
                }
            })
            .collect();
        for pre in pre_pop.offset..pre_pop.offset + pre_pop.size {
            row_start.push(targets.len());
            for (a, post_pop) in populations.iter().enumerate() {
                let Some(skip) = &skips[a] else { continue };
                let mut k = skip.sample(&mut rng);
                while (k as usize) < post_pop.size {
                    let post = post_pop.offset + k as usize;
                    if post != pre {
                        let m = weight_dists[a].sample(&mut rng).max(0.0);
                        let d = ((delay_dist.sample(&mut rng) / config.dt).round() as usize)
                            .clamp(1, u16::MAX as usize);
                        max_delay = max_delay.max(d);
                        targets.push(post as u32);
                        weights.push(if inhibitory { -m } else { m });
                        delays.push(d as u16);
                    }
                    k = k.saturating_add(1).saturating_add(skip.sample(&mut rng));
                }
            }
        }
    }
    row_start.push(targets.len());

    let mut thalamic_indegree = Vec::with_capacity(total);
    for (a, pop) in populations.iter().enumerate() {
        let p = table.thalamus.probabilities[a];
        let dist = Binomial::new(table.thalamus.size as u64, p)
            .map_err(|e| Error::Config(e.to_string()))?;
        for _ in 0..pop.size {
            thalamic_indegree.push(dist.sample(&mut rng) as u32);
        }
    }

    Ok(NetworkTopology {
        populations,
        dt: config.dt,
        row_start,
        targets,
        weights,
        delays,
        thalamic_indegree,
        k_ext: table.k_ext.clone(),
        max_delay,
        pop_of,
    })
}

/// Uniform random neuron of population `pop`.
pub fn random_member<R: Rng>(topology: &NetworkTopology, pop: usize, rng: &mut R) -> usize {
    let p = &topology.populations[pop];
    p.offset + rng.random_range(0..p.size)
}
