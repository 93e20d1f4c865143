use serde::{Deserialize, Serialize};

use super::graph::CompartmentGraph;
use crate::dynamics::{hh_step_in_place, NeuronState};
use crate::error::{Error, Result};
use crate::plot::{line_plot, Series};

/// One single-neuron state per compartment, in graph order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphState {
    pub compartments: Vec<NeuronState>,
}

impl MorphState {
    pub fn resting(graph: &CompartmentGraph) -> Self {
        MorphState {
            compartments: (0..graph.len())
                .map(|i| NeuronState::resting(graph.params(i), 1))
                .collect(),
        }
    }

    pub fn at_potentials(graph: &CompartmentGraph, v: &[f64]) -> Result<Self> {
        if v.len() != graph.len() {
            return Err(Error::Usage(format!(
                "{} potentials for {} compartments",
                v.len(),
                graph.len()
            )));
        }
        Ok(MorphState {
            compartments: v
                .iter()
                .enumerate()
                .map(|(i, &vi)| NeuronState::at_potential(graph.params(i), &[vi]))
                .collect(),
        })
    }

    pub fn potentials(&self) -> Vec<f64> {
        self.compartments.iter().map(|c| c.v[0]).collect()
    }

    fn check(&self, graph: &CompartmentGraph) -> Result<()> {
        if self.compartments.len() != graph.len() {
            return Err(Error::Usage(format!(
                "state has {} compartments, graph has {}",
                self.compartments.len(),
                graph.len()
            )));
        }
        Ok(())
    }
}

/// `sum_j g(i,j) (V_j - V_i)` per compartment.
pub fn axial_current(state: &MorphState, graph: &CompartmentGraph) -> Result<Vec<f64>> {
    state.check(graph)?;
    Ok(axial_from_potentials(&state.potentials(), graph))
}

fn axial_from_potentials(v: &[f64], graph: &CompartmentGraph) -> Vec<f64> {
    (0..graph.len())
        .map(|i| {
            graph
                .neighbors(i)
                .iter()
                .map(|&(j, g)| g * (v[j] - v[i]))
                .sum()
        })
        .collect()
}

/// Advances every compartment one step. Axial currents are gathered from the
/// pre-step potentials; `spikes[i]` receives the crossing flag of
/// compartment `i`.
pub fn morph_step(
    state: &mut MorphState,
    i_ext: &[f64],
    graph: &CompartmentGraph,
    spikes: &mut [bool],
) -> Result<()> {
    state.check(graph)?;
    if i_ext.len() != graph.len() || spikes.len() != graph.len() {
        return Err(Error::Usage(format!(
            "external currents {} / spike buffer {} for {} compartments",
            i_ext.len(),
            spikes.len(),
            graph.len()
        )));
    }
    let axial = axial_from_potentials(&state.potentials(), graph);
    for (i, c) in state.compartments.iter_mut().enumerate() {
        let mut s = [false];
        hh_step_in_place(c, &[i_ext[i] + axial[i]], graph.params(i), &mut s)?;
        spikes[i] = s[0];
    }
    Ok(())
}

/// Rectangular current pulse on one compartment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub compartment: String,
    pub onset_ms: f64,
    pub duration_ms: f64,
    /// uA/cm^2.
    pub amplitude: f64,
}

impl Pulse {
    fn active(&self, t: f64) -> bool {
        t >= self.onset_ms && t < self.onset_ms + self.duration_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphTrace {
    pub dt: f64,
    pub ids: Vec<String>,
    /// `v[t][i]`: potential of compartment `i` after step `t`.
    pub v: Vec<Vec<f64>>,
    /// Spike times per compartment, ms.
    pub spike_times: Vec<Vec<f64>>,
    pub soma: usize,
}

impl MorphTrace {
    pub fn soma_spikes(&self) -> &[f64] {
        &self.spike_times[self.soma]
    }

    pub fn soma_potential(&self) -> Vec<f64> {
        self.v.iter().map(|row| row[self.soma]).collect()
    }

    /// Header `t_ms,<id>...`, one row per step.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_ms,{}", self.ids.join(","))?;
        for (t, row) in self.v.iter().enumerate() {
            write!(out, "{}", (t + 1) as f64 * self.dt)?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_svg(&self, title: &str) -> String {
        let series: Vec<Series> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| Series {
                label: id.clone(),
                points: self
                    .v
                    .iter()
                    .enumerate()
                    .map(|(t, row)| ((t + 1) as f64 * self.dt, row[i]))
                    .collect(),
            })
            .collect();
        line_plot(title, "time (ms)", "V (mV)", &series)
    }
}

/// Simulates `duration_ms` from rest under the given pulses.
pub fn run_pulses(
    graph: &CompartmentGraph,
    pulses: &[Pulse],
    duration_ms: f64,
) -> Result<MorphTrace> {
    let targets: Vec<usize> = pulses
        .iter()
        .map(|p| {
            graph.index_of(&p.compartment).ok_or_else(|| {
                Error::Config(format!("pulse targets unknown compartment '{}'", p.compartment))
            })
        })
        .collect::<Result<_>>()?;
    if !(duration_ms >= 0.0) {
        return Err(Error::Config(format!("duration must be non-negative, got {duration_ms}")));
    }
    let dt = graph.dt();
    let steps = (duration_ms / dt).round() as usize;
    let n = graph.len();
    let mut state = MorphState::resting(graph);
    let mut spikes = vec![false; n];
    let mut i_ext = vec![0.0; n];
    let mut v = Vec::with_capacity(steps);
    let mut spike_times = vec![Vec::new(); n];
    for t in 0..steps {
        let now = t as f64 * dt;
        i_ext.iter_mut().for_each(|x| *x = 0.0);
        for (p, &k) in pulses.iter().zip(&targets) {
            if p.active(now) {
                i_ext[k] += p.amplitude;
            }
        }
        morph_step(&mut state, &i_ext, graph, &mut spikes)?;
        v.push(state.potentials());
        for (i, &s) in spikes.iter().enumerate() {
            if s {
                spike_times[i].push((t + 1) as f64 * dt);
            }
        }
    }
    Ok(MorphTrace {
        dt,
        ids: graph.ids().to_vec(),
        v,
        spike_times,
        soma: graph.soma(),
    })
}

/// Runs each trial (a set of pulses) from rest and returns the traces.
pub fn coincidence_experiment(
    graph: &CompartmentGraph,
    trials: &[Vec<Pulse>],
    duration_ms: f64,
) -> Result<Vec<MorphTrace>> {
    trials
        .iter()
        .map(|pulses| run_pulses(graph, pulses, duration_ms))
        .collect()
}
