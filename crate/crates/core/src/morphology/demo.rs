use super::graph::{CompartmentGraph, CompartmentSpec, EdgeSpec, MorphologyConfig};
use super::sim::Pulse;
use crate::error::Result;

pub const DEMO_DENDRITES: usize = 3;
/// Uniform axial conductance, mS/cm^2.
pub const DEMO_G_AXIAL: f64 = 2.0;
pub const DEMO_DT: f64 = 0.025;
/// Pulse amplitude, uA/cm^2. One pulse alone stays below soma threshold
/// for any placement; the window where only the two-dendrite trial fires is
/// roughly 16.8..18.
pub const DEMO_AMPLITUDE: f64 = 17.5;
pub const DEMO_PULSE_MS: f64 = 1.0;
pub const DEMO_INTERVAL_MS: f64 = 3.0;
pub const DEMO_ONSET_MS: f64 = 5.0;
pub const DEMO_DURATION_MS: f64 = 40.0;

/// Soma plus three two-compartment dendrites `d<k>p` (proximal) and
/// `d<k>d` (distal).
pub fn demo_config() -> MorphologyConfig {
    let mut compartments = vec![CompartmentSpec {
        id: "soma".into(),
        params: None,
    }];
    let mut edges = Vec::new();
    for k in 1..=DEMO_DENDRITES {
        let (p, d) = (format!("d{k}p"), format!("d{k}d"));
        compartments.push(CompartmentSpec {
            id: p.clone(),
            params: None,
        });
        compartments.push(CompartmentSpec {
            id: d.clone(),
            params: None,
        });
        edges.push(EdgeSpec {
            a: "soma".into(),
            b: p.clone(),
            g_axial: DEMO_G_AXIAL,
        });
        edges.push(EdgeSpec {
            a: p,
            b: d,
            g_axial: DEMO_G_AXIAL,
        });
    }
    MorphologyConfig {
        soma: "soma".into(),
        dt: DEMO_DT,
        compartments,
        edges,
    }
}

pub fn demo_graph() -> Result<CompartmentGraph> {
    CompartmentGraph::from_config(&demo_config())
}

fn pulse_pair(first: &str, second: &str, amplitude: f64) -> Vec<Pulse> {
    [(first, DEMO_ONSET_MS), (second, DEMO_ONSET_MS + DEMO_INTERVAL_MS)]
        .into_iter()
        .map(|(c, t)| Pulse {
            compartment: c.into(),
            onset_ms: t,
            duration_ms: DEMO_PULSE_MS,
            amplitude,
        })
        .collect()
}

/// Two trials with identical pulse durations and interval. Trial 1 hits the
/// distal ends of two dendrites; trial 2 hits the distal then the proximal
/// compartment of a single dendrite.
pub fn demo_trials(amplitude: f64) -> [Vec<Pulse>; 2] {
    [
        pulse_pair("d1d", "d2d", amplitude),
        pulse_pair("d1d", "d1p", amplitude),
    ]
}
