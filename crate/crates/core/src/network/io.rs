use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BoundarySpec, Edge, Network};
use crate::error::{Error, Result};

/// On-disk graph description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeDocument>,
    pub boundary: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub u: String,
    pub v: String,
    pub conductance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PartitionDocument {
    pub hat: Vec<String>,
    pub check: Vec<String>,
}

impl GraphDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<(Network, BoundarySpec)> {
        let lookup = |names: &[String], s: &str| -> Result<usize> {
            names
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| Error::Validation(format!("edge references unknown vertex `{s}`")))
        };
        let edges = self
            .edges
            .iter()
            .map(|e| {
                Ok(Edge {
                    u: lookup(&self.vertices, &e.u)?,
                    v: lookup(&self.vertices, &e.v)?,
                    conductance: e.conductance,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Network::new(self.vertices.clone(), edges)?;

        if self.boundary.is_empty() {
            return Err(Error::Validation("empty boundary".into()));
        }
        // Boundary order follows vertex (document) order.
        let mut pairs = Vec::with_capacity(self.boundary.len());
        for name in self.boundary.keys() {
            if net.vertex(name).is_err() {
                return Err(Error::Validation(format!("boundary references unknown vertex `{name}`")));
            }
        }
        for (v, name) in net.names().iter().enumerate() {
            if let Some(&h) = self.boundary.get(name) {
                pairs.push((v, h));
            }
        }
        let mut bc = BoundarySpec::new(&net, pairs)?;
        if let Some(p) = &self.partition {
            let map = |xs: &[String]| -> Result<Vec<usize>> {
                xs.iter()
                    .map(|s| net.vertex(s).map_err(|_| Error::Validation(format!("partition references unknown vertex `{s}`"))))
                    .collect()
            };
            bc = bc.with_partition(map(&p.hat)?, map(&p.check)?)?;
        }
        Ok((net, bc))
    }

    pub fn from_parts(net: &Network, bc: &BoundarySpec) -> Self {
        let edges = net
            .edges()
            .iter()
            .map(|e| EdgeDocument {
                u: net.name(e.u).to_string(),
                v: net.name(e.v).to_string(),
                conductance: e.conductance,
            })
            .collect();
        let boundary = bc
            .boundary()
            .iter()
            .zip(bc.values())
            .map(|(&v, &h)| (net.name(v).to_string(), h))
            .collect();
        let partition = bc.partition().map(|p| PartitionDocument {
            hat: p.hat.iter().map(|&v| net.name(v).to_string()).collect(),
            check: p.check.iter().map(|&v| net.name(v).to_string()).collect(),
        });
        Self {
            vertices: net.names().to_vec(),
            edges,
            boundary,
            partition,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph document serializes")
    }
}

/// Parses and validates a graph document.
pub fn load_network(text: &str) -> Result<(Network, BoundarySpec)> {
    GraphDocument::parse(text)?.build()
}
