//! Exact sampling of the discrete GFF at vertices, edge refinement with
//! Brownian-bridge filling, and the eroded-point log-density.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::network::{
    dirichlet_factor, effective_kernel, eroded_full_kernel, harmonic_extension, BoundarySpec, Edge, Erosion,
    KernelMatrix, Network,
};
use crate::stats::RandomStream;

/// One realization of the field at the vertices of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate: u64,
}

impl FieldSample {
    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }
}

/// Precomputed harmonic mean and interior precision factor; draws are
/// `mean + L^{-T} z` on the interior with `z` i.i.d. standard normal.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    mean: Vec<f64>,
    interior: Vec<usize>,
    factor: Option<SpdFactor>,
}

impl FieldSampler {
    pub fn new(net: &Network, bc: &BoundarySpec) -> Result<Self> {
        let mean = harmonic_extension(net, bc)?;
        let interior = bc.interior();
        let factor = if interior.is_empty() {
            None
        } else {
            Some(dirichlet_factor(net, bc, &interior)?.0)
        };
        Ok(Self { mean, interior, factor })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn sample_values(&self, stream: &mut RandomStream) -> Vec<f64> {
        let mut values = self.mean.clone();
        if let Some(f) = &self.factor {
            let mut z = vec![0.0; self.interior.len()];
            stream.fill_normals(&mut z);
            f.correlate_in_place(&mut z);
            for (&v, dz) in self.interior.iter().zip(z) {
                values[v] += dz;
            }
        }
        values
    }

    pub fn sample(&self, stream: &mut RandomStream) -> FieldSample {
        FieldSample {
            values: self.sample_values(stream),
            seed: stream.seed(),
            replicate: stream.replicate(),
        }
    }
}

pub fn sample_field(net: &Network, bc: &BoundarySpec, stream: &mut RandomStream) -> Result<FieldSample> {
    Ok(FieldSampler::new(net, bc)?.sample(stream))
}

/// Number of sub-edges per base edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subdivision {
    Uniform(usize),
    PerEdge(Vec<usize>),
}

impl Subdivision {
    /// `fine` on edges touching any of `near`, `coarse` elsewhere.
    pub fn near(net: &Network, near: &[usize], fine: usize, coarse: usize) -> Self {
        Subdivision::PerEdge(
            net.edges()
                .iter()
                .map(|e| if near.iter().any(|&v| e.touches(v)) { fine } else { coarse })
                .collect(),
        )
    }
}

/// Location of a refined vertex on the base metric graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Vertex(usize),
    /// At arc distance `offset` from the base edge's `u` end.
    Edge { edge: usize, offset: f64 },
}

/// Base network with every edge split into equal-resistance sub-edges.
/// Base vertices keep their indices; inserted vertices follow.
#[derive(Debug, Clone)]
pub struct RefinedNetwork {
    base: Network,
    network: Network,
    boundary: BoundarySpec,
    counts: Vec<usize>,
    positions: Vec<Position>,
    chains: Vec<Vec<usize>>,
    sub_edges: Vec<Range<usize>>,
    parent: Vec<usize>,
}

pub fn refine(net: &Network, bc: &BoundarySpec, n: Subdivision) -> Result<RefinedNetwork> {
    let m = net.edges().len();
    let counts = match n {
        Subdivision::Uniform(k) => vec![k; m],
        Subdivision::PerEdge(ks) => {
            if ks.len() != m {
                return Err(Error::InvalidArgument(format!(
                    "per-edge subdivision has {} entries for {m} edges",
                    ks.len()
                )));
            }
            ks
        }
    };
    if counts.contains(&0) {
        return Err(Error::InvalidArgument("subdivision count must be at least 1".into()));
    }
    let mut names = net.names().to_vec();
    let mut positions: Vec<Position> = (0..net.vertex_count()).map(Position::Vertex).collect();
    let mut edges = Vec::new();
    let mut chains = Vec::with_capacity(m);
    let mut sub_edges = Vec::with_capacity(m);
    let mut parent = Vec::new();
    for (k, e) in net.edges().iter().enumerate() {
        let count = counts[k];
        let r = e.resistance();
        let mut chain = vec![e.u];
        for j in 1..count {
            chain.push(names.len());
            names.push(format!("{}~{}#{k}:{j}/{count}", net.name(e.u), net.name(e.v)));
            positions.push(Position::Edge {
                edge: k,
                offset: r * j as f64 / count as f64,
            });
        }
        chain.push(e.v);
        let start = edges.len();
        for w in chain.windows(2) {
            edges.push(Edge {
                u: w[0],
                v: w[1],
                conductance: e.conductance * count as f64,
            });
            parent.push(k);
        }
        sub_edges.push(start..edges.len());
        chains.push(chain);
    }
    let network = Network::new(names, edges)?;
    let boundary = bc.transfer(net, &network)?;
    Ok(RefinedNetwork {
        base: net.clone(),
        network,
        boundary,
        counts,
        positions,
        chains,
        sub_edges,
        parent,
    })
}

impl RefinedNetwork {
    pub fn base(&self) -> &Network {
        &self.base
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn position(&self, v: usize) -> Position {
        self.positions[v]
    }

    /// Refined vertices along base edge `e`, from its `u` end to its `v` end.
    pub fn chain(&self, e: usize) -> &[usize] {
        &self.chains[e]
    }

    /// Refined edge indices making up base edge `e`, in chain order.
    pub fn sub_edges(&self, e: usize) -> Range<usize> {
        self.sub_edges[e].clone()
    }

    /// Base edge containing refined edge `k`.
    pub fn parent_edge(&self, k: usize) -> usize {
        self.parent[k]
    }

    /// Extends base-vertex values to all refined vertices by sampling the
    /// in-edge Brownian bridges at the inserted points.
    pub fn fill(&self, base_values: &[f64], stream: &mut RandomStream) -> Vec<f64> {
        let mut out = vec![0.0; self.network.vertex_count()];
        out[..base_values.len()].copy_from_slice(base_values);
        for (k, e) in self.base.edges().iter().enumerate() {
            let count = self.counts[k];
            if count == 1 {
                continue;
            }
            let total = e.resistance();
            let step = total / count as f64;
            let end = base_values[e.v];
            let mut cur = base_values[e.u];
            let chain = &self.chains[k];
            for (j, &w) in chain[1..count].iter().enumerate() {
                let rem = total - step * j as f64;
                let mean = cur + (end - cur) * step / rem;
                let sd = (step * (rem - step) / rem).max(0.0).sqrt();
                cur = mean + sd * stream.normal();
                out[w] = cur;
            }
        }
        out
    }
}

fn quadratic_log_density(kernel: &KernelMatrix, h: &[f64], w: &[f64]) -> f64 {
    let na = h.len();
    let nb = w.len();
    let mut s = 0.0;
    for (x, &hx) in h.iter().enumerate() {
        for (z, &wz) in w.iter().enumerate() {
            s += kernel.get(x, na + z) * (wz - hx).powi(2);
        }
    }
    for z in 0..nb {
        for y in z + 1..nb {
            s += kernel.get(na + z, na + y) * (w[z] - w[y]).powi(2);
        }
    }
    -0.5 * s
}

/// Log-density, up to an additive constant, of the field at the eroded
/// points `z_i` taking values `w`.
pub fn log_density(net: &Network, bc: &BoundarySpec, erosions: &[Erosion], w: &[f64]) -> Result<f64> {
    if w.len() != erosions.len() {
        return Err(Error::InvalidArgument("one value per eroded point required".into()));
    }
    if erosions.iter().any(|er| er.depth == 0.0) {
        return Err(Error::InvalidArgument("eroded point coincides with the boundary".into()));
    }
    let mut kernel = eroded_full_kernel(net, bc, erosions)?;
    // The erased segments [x_i, z_i] join A to B directly.
    let na = bc.boundary().len();
    for (i, er) in erosions.iter().enumerate() {
        let e = net.edges()[er.edge];
        let x = if bc.is_boundary(e.u) { e.u } else { e.v };
        let pos = bc.boundary().iter().position(|&b| b == x).expect("boundary endpoint");
        kernel.entries[(pos, na + i)] += 1.0 / er.depth;
        kernel.entries[(na + i, pos)] += 1.0 / er.depth;
    }
    Ok(quadratic_log_density(&kernel, bc.values(), w))
}

/// Same density for a set `B` of interior vertices.
pub fn log_density_vertices(net: &Network, bc: &BoundarySpec, points: &[usize], w: &[f64]) -> Result<f64> {
    if w.len() != points.len() {
        return Err(Error::InvalidArgument("one value per point required".into()));
    }
    if points.iter().any(|&v| bc.is_boundary(v)) {
        return Err(Error::InvalidArgument("point set intersects the boundary".into()));
    }
    let mut all = bc.boundary().to_vec();
    all.extend_from_slice(points);
    let kernel = effective_kernel(net, &all)?;
    Ok(quadratic_log_density(&kernel, bc.values(), w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::green_matrix;
    use crate::stats::{ks_one_sample, ks_two_sample, Lane};

    fn kite() -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[
            ("a", "x", 1.0),
            ("x", "y", 2.0),
            ("y", "b", 0.5),
            ("x", "z", 1.5),
            ("z", "b", 1.0),
            ("y", "z", 0.7),
            ("a", "w", 1.2),
            ("w", "z", 0.8),
        ])
        .unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.3), ("b", -0.4)]).unwrap();
        (net, bc)
    }

    #[test]
    fn boundary_only_is_deterministic() {
        let net = Network::from_edges(&[("a", "b", 1.0)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 1.0), ("b", 2.0)]).unwrap();
        let mut s = RandomStream::new(1, 0, Lane::Field);
        let f = sample_field(&net, &bc, &mut s).unwrap();
        assert_eq!(f.values, vec![1.0, 2.0]);
    }

    #[test]
    fn single_interior_marginal() {
        let net = Network::from_edges(&[("a", "v", 1.0), ("v", "b", 3.0)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 1.0), ("b", -1.0)]).unwrap();
        let sampler = FieldSampler::new(&net, &bc).unwrap();
        let mean = (1.0 - 3.0) / 4.0;
        let sd = (1.0f64 / 4.0).sqrt();
        let xs: Vec<f64> = (0..20_000)
            .map(|r| sampler.sample_values(&mut RandomStream::new(3, r, Lane::Field))[1])
            .collect();
        let rep = ks_one_sample(&xs, |x| crate::laws::normal_cdf((x - mean) / sd), None).unwrap();
        assert!(rep.pass, "{}", rep.summary());
    }

    #[test]
    fn empirical_covariance_matches_green() {
        let (net, bc) = kite();
        let sampler = FieldSampler::new(&net, &bc).unwrap();
        let g = green_matrix(&net, &bc).unwrap();
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n)
            .map(|r| sampler.sample_values(&mut RandomStream::new(5, r, Lane::Field)))
            .collect();
        let interior = bc.interior();
        let mean = sampler.mean();
        for (i, &u) in interior.iter().enumerate() {
            let m: f64 = draws.iter().map(|d| d[u]).sum::<f64>() / n as f64;
            assert!((m - mean[u]).abs() < 4.0 * (g.entries[(i, i)] / n as f64).sqrt());
            for (j, &v) in interior.iter().enumerate() {
                let prods: Vec<f64> = draws.iter().map(|d| (d[u] - mean[u]) * (d[v] - mean[v])).collect();
                let c = prods.iter().sum::<f64>() / n as f64;
                let var = prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                assert!((c - g.entries[(i, j)]).abs() < 4.0 * se, "{u},{v}: {c} vs {}", g.entries[(i, j)]);
            }
        }
    }

    #[test]
    fn identity_refinement() {
        let (net, bc) = kite();
        let r = refine(&net, &bc, Subdivision::Uniform(1)).unwrap();
        assert_eq!(r.network(), &net);
        assert_eq!(r.boundary(), &bc);
    }

    #[test]
    fn refinement_rejects_zero() {
        let (net, bc) = kite();
        assert!(refine(&net, &bc, Subdivision::Uniform(0)).is_err());
        assert!(refine(&net, &bc, Subdivision::PerEdge(vec![1; 3])).is_err());
    }

    #[test]
    fn midpoint_variance() {
        let net = Network::from_edges(&[("a", "b", 1.0)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.0), ("b", 0.0)]).unwrap();
        let r = refine(&net, &bc, Subdivision::Uniform(2)).unwrap();
        let g = green_matrix(r.network(), r.boundary()).unwrap();
        assert!((g.entries[(0, 0)] - 0.25).abs() < 1e-12);
        assert_eq!(r.position(2), Position::Edge { edge: 0, offset: 0.5 });
    }

    #[test]
    fn green_restriction_is_consistent() {
        let (net, bc) = kite();
        let base = green_matrix(&net, &bc).unwrap();
        let mut counts: Vec<usize> = (0..net.edges().len()).map(|k| 1 + (k * 3) % 8).collect();
        for sub in [Subdivision::Uniform(8), Subdivision::PerEdge(std::mem::take(&mut counts))] {
            let r = refine(&net, &bc, sub).unwrap();
            let fine = green_matrix(r.network(), r.boundary()).unwrap();
            for (i, &u) in base.interior.iter().enumerate() {
                for (j, &v) in base.interior.iter().enumerate() {
                    let a = fine.entries[(fine.position(u).unwrap(), fine.position(v).unwrap())];
                    assert!((a - base.entries[(i, j)]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn bridge_fill_matches_direct_refined_sampling() {
        let (net, bc) = kite();
        let r = refine(&net, &bc, Subdivision::Uniform(4)).unwrap();
        let base = FieldSampler::new(&net, &bc).unwrap();
        let fine = FieldSampler::new(r.network(), r.boundary()).unwrap();
        let probe = r.chain(1)[2];
        let n = 5_000;
        let filled: Vec<f64> = (0..n)
            .map(|k| {
                let mut s = RandomStream::new(9, k, Lane::Field);
                let v = base.sample_values(&mut s);
                r.fill(&v, &mut s.lane(Lane::Auxiliary))[probe]
            })
            .collect();
        let direct: Vec<f64> = (0..n)
            .map(|k| fine.sample_values(&mut RandomStream::new(10, k, Lane::Field))[probe])
            .collect();
        let rep = ks_two_sample(&filled, &direct).unwrap();
        assert!(rep.pass, "{}", rep.summary());
    }

    #[test]
    fn log_density_single_point_is_gaussian() {
        let (net, bc) = kite();
        let edge = 0; // a-x, resistance 1
        let depth = 0.3;
        let er = [Erosion { edge, depth }];
        // oracle: split the edge at the eroded point
        let split = Network::from_edges(&[
            ("a", "p", 1.0 / 0.3),
            ("p", "x", 1.0 / 0.7),
            ("x", "y", 2.0),
            ("y", "b", 0.5),
            ("x", "z", 1.5),
            ("z", "b", 1.0),
            ("y", "z", 0.7),
            ("a", "w", 1.2),
            ("w", "z", 0.8),
        ])
        .unwrap();
        let sbc = bc.transfer(&net, &split).unwrap();
        let p = split.vertex("p").unwrap();
        let mean = harmonic_extension(&split, &sbc).unwrap()[p];
        let g = green_matrix(&split, &sbc).unwrap();
        let var = g.entries[(g.position(p).unwrap(), g.position(p).unwrap())];
        let gauss = |w: f64| -(w - mean).powi(2) / (2.0 * var);
        let (w1, w2) = (0.7, -1.1);
        let d = log_density(&net, &bc, &er, &[w1]).unwrap() - log_density(&net, &bc, &er, &[w2]).unwrap();
        assert!((d - (gauss(w1) - gauss(w2))).abs() < 1e-9);
    }

    #[test]
    fn log_density_mode_is_harmonic() {
        let (net, bc) = kite();
        let pts: Vec<usize> = bc.interior();
        let h = harmonic_extension(&net, &bc).unwrap();
        let w: Vec<f64> = pts.iter().map(|&v| h[v]).collect();
        let f0 = log_density_vertices(&net, &bc, &pts, &w).unwrap();
        for k in 0..w.len() {
            for step in [1e-3, -1e-3] {
                let mut w2 = w.clone();
                w2[k] += step;
                let f1 = log_density_vertices(&net, &bc, &pts, &w2).unwrap();
                assert!(f1 < f0);
                assert!((f1 - f0).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn log_density_vertex_differences_match_green() {
        let (net, bc) = kite();
        let pts = bc.interior();
        let h = harmonic_extension(&net, &bc).unwrap();
        let g = green_matrix(&net, &bc).unwrap();
        let prec = g.entries.clone().try_inverse().unwrap();
        let gauss = |w: &[f64]| {
            let d = nalgebra::DVector::from_iterator(w.len(), pts.iter().zip(w).map(|(&v, x)| x - h[v]));
            -0.5 * (d.transpose() * &prec * &d)[(0, 0)]
        };
        let w1 = vec![0.1, -0.2, 0.4, 0.0];
        let w2 = vec![-0.5, 0.3, 0.2, 0.9];
        let lhs = log_density_vertices(&net, &bc, &pts, &w1).unwrap() - log_density_vertices(&net, &bc, &pts, &w2).unwrap();
        let rhs = gauss(&w1) - gauss(&w2);
        assert!((lhs - rhs).abs() < 1e-8 * rhs.abs().max(1.0));
    }

    #[test]
    fn log_density_rejects_boundary_points() {
        let (net, bc) = kite();
        let a = net.vertex("a").unwrap();
        assert!(log_density_vertices(&net, &bc, &[a], &[0.0]).is_err());
        assert!(log_density(&net, &bc, &[Erosion { edge: 0, depth: 0.0 }], &[0.0]).is_err());
    }

    #[test]
    fn constant_shift_invariance() {
        let (net, bc) = kite();
        let pts = bc.interior();
        let w = vec![0.1, -0.2, 0.4, 0.0];
        let shifted_bc = bc.shifted(-1.0);
        let ws: Vec<f64> = w.iter().map(|x| x + 1.0).collect();
        let a = log_density_vertices(&net, &bc, &pts, &w).unwrap();
        let b = log_density_vertices(&net, &shifted_bc, &pts, &ws).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
