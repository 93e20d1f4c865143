use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::HHParams;
use crate::error::{Error, Result};

/// Stability bound on `dt * sum(g_axial) / c_m` for the explicit axial
/// update.
pub const STABILITY_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompartmentSpec {
    pub id: String,
    /// Channel set; the bundled squid-axon set when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<HHParams>,
}

/// Undirected axial coupling. Conductance is per unit membrane area of the
/// receiving compartment (mS/cm^2), so the coupling current is a density
/// like every other term of the membrane equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub a: String,
    pub b: String,
    pub g_axial: f64,
}

/// On-disk morphology description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphologyConfig {
    pub soma: String,
    /// Integration step for every compartment, ms.
    pub dt: f64,
    #[serde(rename = "compartment")]
    pub compartments: Vec<CompartmentSpec>,
    #[serde(rename = "edge", default)]
    pub edges: Vec<EdgeSpec>,
}

impl MorphologyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("morphology config: {e}")))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("morphology config serializes")
    }
}

/// Validated compartment graph. Invariants: ids unique, every edge joins two
/// distinct known compartments with `g_axial > 0`, the graph is connected,
/// and every compartment shares one `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompartmentGraph {
    ids: Vec<String>,
    params: Vec<HHParams>,
    /// `(i, j, g)` with `i < j`.
    edges: Vec<(usize, usize, f64)>,
    /// Adjacency list mirroring `edges`.
    neighbors: Vec<Vec<(usize, f64)>>,
    soma: usize,
    dt: f64,
}

impl CompartmentGraph {
    pub fn from_config(config: &MorphologyConfig) -> Result<Self> {
        if config.compartments.is_empty() {
            return Err(Error::Config("morphology has no compartments".into()));
        }
        if !(config.dt > 0.0 && config.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", config.dt)));
        }
        let mut index = HashMap::new();
        let mut ids = Vec::new();
        let mut params = Vec::new();
        for (k, c) in config.compartments.iter().enumerate() {
            if index.insert(c.id.clone(), k).is_some() {
                return Err(Error::Config(format!("duplicate compartment id '{}'", c.id)));
            }
            let mut p = c.params.clone().unwrap_or_default();
            p.dt = config.dt;
            p.validate()
                .map_err(|e| Error::Config(format!("compartment '{}': {e}", c.id)))?;
            ids.push(c.id.clone());
            params.push(p);
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::Config(format!("unknown compartment '{id}'")))
        };
        let soma = lookup(&config.soma)?;
        let mut edges = Vec::new();
        let mut neighbors = vec![Vec::new(); ids.len()];
        let mut seen = HashMap::new();
        for e in &config.edges {
            let (i, j) = (lookup(&e.a)?, lookup(&e.b)?);
            if i == j {
                return Err(Error::Config(format!("self-loop on '{}'", e.a)));
            }
            if !(e.g_axial > 0.0 && e.g_axial.is_finite()) {
                return Err(Error::Config(format!(
                    "edge {}-{}: g_axial must be positive, got {}",
                    e.a, e.b, e.g_axial
                )));
            }
            let key = (i.min(j), i.max(j));
            if seen.insert(key, ()).is_some() {
                return Err(Error::Config(format!("duplicate edge {}-{}", e.a, e.b)));
            }
            edges.push((key.0, key.1, e.g_axial));
            neighbors[i].push((j, e.g_axial));
            neighbors[j].push((i, e.g_axial));
        }
        let graph = CompartmentGraph {
            ids,
            params,
            edges,
            neighbors,
            soma,
            dt: config.dt,
        };
        graph.check_connected()?;
        if let Some((id, r)) = graph.stability_violation() {
            log::warn!(
                "explicit axial update may be unstable: dt*sum(g_axial)/c_m = {r:.3} > {STABILITY_LIMIT} at '{id}'"
            );
        }
        Ok(graph)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config(&MorphologyConfig::from_file(path)?)
    }

    pub fn to_config(&self) -> MorphologyConfig {
        MorphologyConfig {
            soma: self.ids[self.soma].clone(),
            dt: self.dt,
            compartments: self
                .ids
                .iter()
                .zip(&self.params)
                .map(|(id, p)| CompartmentSpec {
                    id: id.clone(),
                    params: Some(p.clone()),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(i, j, g)| EdgeSpec {
                    a: self.ids[i].clone(),
                    b: self.ids[j].clone(),
                    g_axial: g,
                })
                .collect(),
        }
    }

    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([self.soma]);
        seen[self.soma] = true;
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(k) => Err(Error::Config(format!(
                "compartment '{}' is not connected to the soma",
                self.ids[k]
            ))),
            None => Ok(()),
        }
    }

    /// Largest `dt * sum(g_axial) / c_m` over compartments exceeding
    /// [`STABILITY_LIMIT`], if any.
    pub fn stability_violation(&self) -> Option<(&str, f64)> {
        (0..self.len())
            .map(|i| (self.ids[i].as_str(), self.stability_ratio(i)))
            .filter(|&(_, r)| r > STABILITY_LIMIT)
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn stability_ratio(&self, i: usize) -> f64 {
        let g: f64 = self.neighbors[i].iter().map(|&(_, g)| g).sum();
        self.dt * g / self.params[i].c_m
    }

    /// Linear chain `c0 - c1 - ... - c{n-1}` with the soma at `c0`.
    pub fn chain(n: usize, params: &HHParams, g_axial: f64) -> Result<Self> {
        let compartments = (0..n)
            .map(|k| CompartmentSpec {
                id: format!("c{k}"),
                params: Some(params.clone()),
            })
            .collect();
        let edges = (1..n)
            .map(|k| EdgeSpec {
                a: format!("c{}", k - 1),
                b: format!("c{k}"),
                g_axial,
            })
            .collect();
        Self::from_config(&MorphologyConfig {
            soma: "c0".into(),
            dt: params.dt,
            compartments,
            edges,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn soma(&self) -> usize {
        self.soma
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    pub fn params(&self, i: usize) -> &HHParams {
        &self.params[i]
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Same graph with every axial conductance multiplied by `factor > 0`.
    pub fn scaled_coupling(&self, factor: f64) -> Result<Self> {
        let mut cfg = self.to_config();
        for e in &mut cfg.edges {
            e.g_axial *= factor;
        }
        Self::from_config(&cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(edges: &[(&str, &str, f64)]) -> MorphologyConfig {
        MorphologyConfig {
            soma: "s".into(),
            dt: 0.025,
            compartments: ["s", "d1", "d2"]
                .iter()
                .map(|id| CompartmentSpec {
                    id: (*id).into(),
                    params: None,
                })
                .collect(),
            edges: edges
                .iter()
                .map(|&(a, b, g)| EdgeSpec {
                    a: a.into(),
                    b: b.into(),
                    g_axial: g,
                })
                .collect(),
        }
    }

    #[test]
    fn rejects_invalid_graphs() {
        assert!(CompartmentGraph::from_config(&cfg(&[("s", "d1", 1.0)])).is_err());
        assert!(CompartmentGraph::from_config(&cfg(&[("s", "d1", 0.0), ("d1", "d2", 1.0)])).is_err());
        assert!(CompartmentGraph::from_config(&cfg(&[("s", "x", 1.0), ("d1", "d2", 1.0)])).is_err());
        assert!(CompartmentGraph::from_config(&cfg(&[("s", "s", 1.0)])).is_err());
        assert!(CompartmentGraph::from_config(&cfg(&[
            ("s", "d1", 1.0),
            ("d1", "s", 1.0),
            ("d1", "d2", 1.0)
        ]))
        .is_err());
        let mut dup = cfg(&[("s", "d1", 1.0), ("d1", "d2", 1.0)]);
        dup.compartments[2].id = "d1".into();
        assert!(CompartmentGraph::from_config(&dup).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let g = CompartmentGraph::from_config(&cfg(&[("s", "d1", 1.0), ("d1", "d2", 2.0)])).unwrap();
        let text = g.to_config().to_toml_string();
        let back = CompartmentGraph::from_config(&MorphologyConfig::from_toml_str(&text).unwrap())
            .unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn stability_ratio_flags_stiff_coupling() {
        let g = CompartmentGraph::from_config(&cfg(&[("s", "d1", 1.0), ("d1", "d2", 2.0)])).unwrap();
        assert!((g.stability_ratio(1) - 0.075).abs() < 1e-15);
        assert!(g.stability_violation().is_none());
        let stiff = g.scaled_coupling(100.0).unwrap();
        assert_eq!(stiff.stability_violation().unwrap().0, "d1");
    }
}
