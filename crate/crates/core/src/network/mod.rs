//! Electrical networks: Laplacians, Schur-complement kernels, Green
//! functions, harmonic extension, star-mesh reduction and eroded kernels.

mod io;
mod kernel;

pub use io::{load_network, GraphDocument};
pub use kernel::{
    boundary_mean, cross_conductance_of, effective_kernel, eroded_full_kernel, eroded_kernel, green_matrix, hadamard_all, hadamard_check,
    harmonic_extension, set_resistance, star_mesh, two_point_resistance, Erosion, GreenMatrix,
    HadamardIdentity, HadamardResidual, HadamardTarget, KernelMatrix,
};

pub(crate) use kernel::{dirichlet_factor, set_resistance_graph, ConductanceGraph};
pub use kernel::hadamard_check_with_step;

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

/// One conductor. Endpoints are vertex indices into the owning [`Network`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub conductance: f64,
}

impl Edge {
    pub fn resistance(&self) -> f64 {
        1.0 / self.conductance
    }

    pub fn other(&self, w: usize) -> usize {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn touches(&self, w: usize) -> bool {
        self.u == w || self.v == w
    }
}

/// Connected undirected multigraph with positive finite conductances.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
}

impl Network {
    pub fn new(names: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate vertex `{name}`")));
            }
        }
        if names.is_empty() {
            return Err(Error::Validation("network has no vertices".into()));
        }
        for e in &edges {
            if e.u >= names.len() || e.v >= names.len() {
                return Err(Error::Validation("edge endpoint out of range".into()));
            }
            if e.u == e.v {
                return Err(Error::Validation(format!("self-loop at `{}`", names[e.u])));
            }
            if !(e.conductance > 0.0) {
                return Err(Error::Validation(format!(
                    "nonpositive conductance on edge {}-{}",
                    names[e.u], names[e.v]
                )));
            }
            if !e.conductance.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite conductance on edge {}-{}",
                    names[e.u], names[e.v]
                )));
            }
        }
        let net = Self { names, index, edges };
        if !net.is_connected() {
            return Err(Error::Validation("network is disconnected".into()));
        }
        Ok(net)
    }

    /// Builds a network from `(u, v, conductance)` triples, registering
    /// vertices in order of first appearance.
    pub fn from_edges<S: AsRef<str>>(triples: &[(S, S, f64)]) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut id = |s: &str, names: &mut Vec<String>| -> usize {
            *index.entry(s.to_string()).or_insert_with(|| {
                names.push(s.to_string());
                names.len() - 1
            })
        };
        let mut edges = Vec::with_capacity(triples.len());
        for (u, v, c) in triples {
            let u = id(u.as_ref(), &mut names);
            let v = id(v.as_ref(), &mut names);
            edges.push(Edge { u, v, conductance: *c });
        }
        Self::new(names, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn vertex(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn vertices_by_name<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.vertex(n.as_ref())).collect()
    }

    /// Incident edge indices per vertex.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.names.len()];
        for (k, e) in self.edges.iter().enumerate() {
            inc[e.u].push(k);
            inc[e.v].push(k);
        }
        inc
    }

    fn is_connected(&self) -> bool {
        let inc = self.incidence();
        let mut seen = vec![false; self.names.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &k in &inc[v] {
                let w = self.edges[k].other(v);
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.names.len()
    }

    pub(crate) fn conductance_graph(&self) -> ConductanceGraph {
        ConductanceGraph::from_network(self)
    }
}

/// Partition of the boundary into a source block and a target block.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub hat: Vec<usize>,
    pub check: Vec<usize>,
}

/// Boundary set `A` with boundary values `h`, and an optional partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    boundary: Vec<usize>,
    values: Vec<f64>,
    on_boundary: Vec<Option<usize>>,
    partition: Option<Partition>,
}

impl BoundarySpec {
    pub fn new(net: &Network, pairs: Vec<(usize, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Validation("empty boundary".into()));
        }
        let mut on_boundary = vec![None; net.vertex_count()];
        let mut boundary = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        for (v, h) in pairs {
            if v >= net.vertex_count() {
                return Err(Error::Validation("boundary vertex out of range".into()));
            }
            if !h.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite boundary value at `{}`",
                    net.name(v)
                )));
            }
            if on_boundary[v].is_some() {
                return Err(Error::Validation(format!(
                    "duplicate boundary vertex `{}`",
                    net.name(v)
                )));
            }
            on_boundary[v] = Some(boundary.len());
            boundary.push(v);
            values.push(h);
        }
        Ok(Self {
            boundary,
            values,
            on_boundary,
            partition: None,
        })
    }

    /// Convenience constructor from vertex names.
    pub fn from_names<S: AsRef<str>>(net: &Network, pairs: &[(S, f64)]) -> Result<Self> {
        let pairs = pairs
            .iter()
            .map(|(n, h)| Ok((net.vertex(n.as_ref())?, *h)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(net, pairs)
    }

    pub fn with_partition(mut self, hat: Vec<usize>, check: Vec<usize>) -> Result<Self> {
        if hat.is_empty() || check.is_empty() {
            return Err(Error::Validation("partition blocks must be nonempty".into()));
        }
        let mut seen = vec![false; self.on_boundary.len()];
        for &v in hat.iter().chain(&check) {
            if v >= seen.len() || self.on_boundary[v].is_none() {
                return Err(Error::Validation("partition vertex not on boundary".into()));
            }
            if seen[v] {
                return Err(Error::Validation("partition blocks overlap".into()));
            }
            seen[v] = true;
        }
        if hat.len() + check.len() != self.boundary.len() {
            return Err(Error::Validation("partition does not cover the boundary".into()));
        }
        self.partition = Some(Partition { hat, check });
        Ok(self)
    }

    pub fn with_partition_names<S: AsRef<str>>(
        self,
        net: &Network,
        hat: &[S],
        check: &[S],
    ) -> Result<Self> {
        let hat = net.vertices_by_name(hat)?;
        let check = net.vertices_by_name(check)?;
        self.with_partition(hat, check)
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn partition(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    pub fn value(&self, v: usize) -> Option<f64> {
        self.on_boundary.get(v).copied().flatten().map(|k| self.values[k])
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.on_boundary.get(v).is_some_and(|k| k.is_some())
    }

    /// Non-boundary vertices in network order.
    pub fn interior(&self) -> Vec<usize> {
        (0..self.on_boundary.len())
            .filter(|&v| self.on_boundary[v].is_none())
            .collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Same boundary with every value shifted by `-level`.
    pub fn shifted(&self, level: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v -= level;
        }
        out
    }

    /// Same vertex set, new values (in boundary order).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidArgument("boundary value count mismatch".into()));
        }
        let mut out = self.clone();
        out.values = values;
        Ok(out)
    }

    /// Checks that `h` has a constant sign (zeros allowed) on each
    /// partition block.
    pub fn check_sign_constancy(&self) -> Result<&Partition> {
        let p = self
            .partition
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("partition required".into()))?;
        let constant = |block: &[usize]| {
            let vals = block.iter().map(|&v| self.value(v).unwrap_or(0.0));
            let pos = vals.clone().any(|h| h > 0.0);
            let neg = vals.into_iter().any(|h| h < 0.0);
            !(pos && neg)
        };
        if !constant(&p.hat) {
            return Err(Error::SignConstancy("hat"));
        }
        if !constant(&p.check) {
            return Err(Error::SignConstancy("check"));
        }
        Ok(p)
    }

    /// Re-expresses this boundary on another network that shares vertex
    /// names (e.g. after star-mesh or refinement).
    pub fn transfer(&self, from: &Network, to: &Network) -> Result<Self> {
        let pairs = self
            .boundary
            .iter()
            .zip(&self.values)
            .map(|(&v, &h)| Ok((to.vertex(from.name(v))?, h)))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(to, pairs)?;
        if let Some(p) = &self.partition {
            let map = |vs: &[usize]| -> Result<Vec<usize>> {
                vs.iter().map(|&v| to.vertex(from.name(v))).collect()
            };
            out = out.with_partition(map(&p.hat)?, map(&p.check)?)?;
        }
        Ok(out)
    }
}
