//! The local-time pseudo-metric δ and the infimum field Ĩ at vertices.
//!
//! Conditionally on the vertex values, each edge carries an independent
//! Brownian bridge. δ only needs each edge's total local time at zero and Ĩ
//! only needs each edge's minimum, both drawn exactly. Path optima are
//! then attained on full-edge paths, so δ is a shortest-path distance and
//! Ĩ is a bottleneck (maximin) value.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exec::map_replicates;
use crate::fieldsim::{FieldSample, FieldSampler};
use crate::laws::{sample_bridge_min, sample_local_time, BridgeSpec};
use crate::network::{BoundarySpec, Network, Partition};
use crate::stats::{Lane, RandomStream};

/// Field sample with optional per-edge local times and bridge minima.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSample {
    pub field: FieldSample,
    pub local_times: Option<Vec<f64>>,
    pub minima: Option<Vec<f64>>,
}

impl AnnotatedSample {
    pub fn new(field: FieldSample) -> Self {
        Self {
            field,
            local_times: None,
            minima: None,
        }
    }

    fn local_times(&self) -> Result<&[f64]> {
        self.local_times.as_deref().ok_or(Error::MissingAnnotation("local times"))
    }

    fn minima(&self) -> Result<&[f64]> {
        self.minima.as_deref().ok_or(Error::MissingAnnotation("edge minima"))
    }
}

/// One exact local-time draw per edge, in edge order.
pub fn edge_local_times(net: &Network, values: &[f64], stream: &mut RandomStream) -> Result<Vec<f64>> {
    net.edges()
        .iter()
        .map(|e| sample_local_time(&BridgeSpec::new(values[e.u], values[e.v], e.resistance())?, stream.uniform()))
        .collect()
}

/// One exact bridge-minimum draw per edge, in edge order.
pub fn edge_minima(net: &Network, values: &[f64], stream: &mut RandomStream) -> Result<Vec<f64>> {
    net.edges()
        .iter()
        .map(|e| sample_bridge_min(&BridgeSpec::new(values[e.u], values[e.v], e.resistance())?, stream.uniform()))
        .collect()
}

pub fn annotate_local_times(net: &Network, field: FieldSample, stream: &mut RandomStream) -> Result<AnnotatedSample> {
    let lt = edge_local_times(net, &field.values, stream)?;
    let mut out = AnnotatedSample::new(field);
    out.local_times = Some(lt);
    Ok(out)
}

pub fn annotate_minima(net: &Network, field: FieldSample, stream: &mut RandomStream) -> Result<AnnotatedSample> {
    let mins = edge_minima(net, &field.values, stream)?;
    let mut out = AnnotatedSample::new(field);
    out.minima = Some(mins);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Multi-source shortest paths with nonnegative edge weights.
pub fn shortest_paths(net: &Network, weights: &[f64], sources: &[usize]) -> Vec<f64> {
    let adj = net.incidence();
    let mut dist = vec![f64::INFINITY; net.vertex_count()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(std::cmp::Reverse(Key(0.0, s)));
    }
    while let Some(std::cmp::Reverse(Key(d, x))) = heap.pop() {
        if d > dist[x] {
            continue;
        }
        for &k in &adj[x] {
            let e = net.edges()[k];
            let y = e.other(x);
            let nd = d + weights[k];
            if nd < dist[y] {
                dist[y] = nd;
                heap.push(std::cmp::Reverse(Key(nd, y)));
            }
        }
    }
    dist
}

/// Bottleneck values: best over paths to a source of the minimum of
/// `start[source]` and the capacities along the path.
pub fn bottleneck_paths(net: &Network, capacity: &[f64], sources: &[(usize, f64)]) -> Vec<f64> {
    let adj = net.incidence();
    let mut best = vec![f64::NEG_INFINITY; net.vertex_count()];
    let mut heap = BinaryHeap::new();
    for &(s, v) in sources {
        if v > best[s] {
            best[s] = v;
            heap.push(Key(v, s));
        }
    }
    while let Some(Key(b, x)) = heap.pop() {
        if b < best[x] {
            continue;
        }
        for &k in &adj[x] {
            let y = net.edges()[k].other(x);
            let nb = b.min(capacity[k]);
            if nb > best[y] {
                best[y] = nb;
                heap.push(Key(nb, y));
            }
        }
    }
    best
}

/// δ from each vertex to the source set.
pub fn delta(net: &Network, sample: &AnnotatedSample, sources: &[usize]) -> Result<Vec<f64>> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("empty source set".into()));
    }
    Ok(shortest_paths(net, sample.local_times()?, sources))
}

/// Full matrix of vertex-to-vertex δ.
pub fn pairwise(net: &Network, sample: &AnnotatedSample) -> Result<DMatrix<f64>> {
    let lt = sample.local_times()?;
    let n = net.vertex_count();
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        let d = shortest_paths(net, lt, &[x]);
        for y in 0..n {
            m[(x, y)] = d[y];
        }
    }
    Ok(m)
}

/// δ between the two partition blocks.
pub fn two_set(net: &Network, sample: &AnnotatedSample, partition: &Partition) -> Result<f64> {
    let d = delta(net, sample, &partition.hat)?;
    Ok(partition.check.iter().map(|&v| d[v]).fold(f64::INFINITY, f64::min))
}

/// δ to `A`, with optional pairwise matrix and two-set value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub delta_to_a: Vec<f64>,
    pub pairwise: Option<DMatrix<f64>>,
    pub two_set: Option<f64>,
}

pub fn metric_sample(net: &Network, bc: &BoundarySpec, sample: &AnnotatedSample, with_pairwise: bool) -> Result<MetricSample> {
    Ok(MetricSample {
        delta_to_a: delta(net, sample, bc.boundary())?,
        pairwise: if with_pairwise { Some(pairwise(net, sample)?) } else { None },
        two_set: match bc.partition() {
            Some(p) => Some(two_set(net, sample, p)?),
            None => None,
        },
    })
}

/// `Ĩ_{x,A}` and `I_{x,A} = min(0, Ĩ_{x,A})` per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct InfimumSample {
    pub itilde: Vec<f64>,
    pub i: Vec<f64>,
}

pub fn infimum_field(net: &Network, sample: &AnnotatedSample, sources: &[usize]) -> Result<InfimumSample> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("empty source set".into()));
    }
    let mins = sample.minima()?;
    let starts: Vec<(usize, f64)> = sources.iter().map(|&a| (a, sample.field.values[a])).collect();
    let itilde = bottleneck_paths(net, mins, &starts);
    let i = itilde.iter().map(|&x| x.min(0.0)).collect();
    Ok(InfimumSample { itilde, i })
}

/// Cluster label per vertex; vertices share a label iff joined by edges
/// with zero local time.
pub fn sign_clusters(net: &Network, sample: &AnnotatedSample) -> Result<Vec<usize>> {
    let lt = sample.local_times()?;
    let n = net.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (k, e) in net.edges().iter().enumerate() {
        if lt[k] == 0.0 {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[v] = label[r];
    }
    Ok(out)
}

/// Paired collections for the generalized Lévy identity. Row
/// `replicate * vertex_count + v` holds `(|φ_v|, δ_{v,A})` on the left and
/// `(φ_v − I_{v,A}, −I_{v,A})` on the right; the two sides come from
/// independent field samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyPairs {
    pub vertex_count: usize,
    pub left: Vec<[f64; 2]>,
    pub right: Vec<[f64; 2]>,
}

impl LevyPairs {
    pub fn replicates(&self) -> usize {
        self.left.len() / self.vertex_count
    }

    pub fn left_column(&self, v: usize, coord: usize) -> Vec<f64> {
        self.left.iter().skip(v).step_by(self.vertex_count).map(|p| p[coord]).collect()
    }

    pub fn right_column(&self, v: usize, coord: usize) -> Vec<f64> {
        self.right.iter().skip(v).step_by(self.vertex_count).map(|p| p[coord]).collect()
    }
}

pub fn levy_pair_samples(net: &Network, bc: &BoundarySpec, n: usize, seed: u64) -> Result<LevyPairs> {
    if bc.values().iter().any(|&h| h < 0.0) {
        return Err(Error::InvalidArgument("boundary values must be nonnegative".into()));
    }
    let sampler = FieldSampler::new(net, bc)?;
    let rows = map_replicates(n, |r| -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)> {
        let left = {
            let mut s = RandomStream::new(seed, r, Lane::Field);
            let field = sampler.sample(&mut s);
            let ann = annotate_local_times(net, field, &mut s.lane(Lane::LocalTime))?;
            let d = delta(net, &ann, bc.boundary())?;
            ann.field.values.iter().zip(&d).map(|(p, &d)| [p.abs(), d]).collect()
        };
        let right = {
            let mut s = RandomStream::new(seed, r, Lane::PairedField);
            let field = sampler.sample(&mut s);
            let ann = annotate_minima(net, field, &mut s.lane(Lane::Minimum))?;
            let inf = infimum_field(net, &ann, bc.boundary())?;
            ann.field.values.iter().zip(&inf.i).map(|(p, &i)| [p - i, -i]).collect()
        };
        Ok((left, right))
    });
    let mut out = LevyPairs {
        vertex_count: net.vertex_count(),
        left: Vec::with_capacity(n * net.vertex_count()),
        right: Vec::with_capacity(n * net.vertex_count()),
    };
    for row in rows {
        let (l, r) = row?;
        out.left.extend(l);
        out.right.extend(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldsim::sample_field;

    fn fixed(values: Vec<f64>) -> FieldSample {
        FieldSample {
            values,
            seed: 0,
            replicate: 0,
        }
    }

    fn path3() -> Network {
        Network::from_edges(&[("a", "b", 1.0), ("b", "c", 1.0)]).unwrap()
    }

    #[test]
    fn path_distance_is_sum() {
        let net = path3();
        let mut ann = AnnotatedSample::new(fixed(vec![0.0; 3]));
        ann.local_times = Some(vec![0.3, 0.5]);
        let d = delta(&net, &ann, &[0]).unwrap();
        assert_eq!(d, vec![0.0, 0.3, 0.8]);
    }

    #[test]
    fn zero_local_times_give_one_cluster() {
        let net = path3();
        let mut ann = AnnotatedSample::new(fixed(vec![1.0; 3]));
        ann.local_times = Some(vec![0.0, 0.0]);
        assert_eq!(sign_clusters(&net, &ann).unwrap(), vec![0, 0, 0]);
        assert!(pairwise(&net, &ann).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn opposite_signs_force_positive_local_time() {
        let net = path3();
        let mut s = RandomStream::new(1, 0, Lane::LocalTime);
        for _ in 0..1000 {
            let lt = edge_local_times(&net, &[1.0, -0.5, 0.0], &mut s).unwrap();
            assert!(lt[0] > 0.0 && lt[1] > 0.0);
        }
    }

    #[test]
    fn all_opposite_signs_give_singletons() {
        let net = path3();
        let mut s = RandomStream::new(2, 0, Lane::LocalTime);
        let ann = annotate_local_times(&net, fixed(vec![1.0, -1.0, 1.0]), &mut s).unwrap();
        assert_eq!(sign_clusters(&net, &ann).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn single_edge_infimum_is_edge_minimum() {
        let net = Network::from_edges(&[("a", "y", 1.0)]).unwrap();
        let mut ann = AnnotatedSample::new(fixed(vec![0.5, 0.2]));
        ann.minima = Some(vec![-0.3]);
        let inf = infimum_field(&net, &ann, &[0]).unwrap();
        assert_eq!(inf.itilde, vec![0.5, -0.3]);
        assert_eq!(inf.i, vec![0.0, -0.3]);
    }

    #[test]
    fn parallel_routes_take_best_bottleneck() {
        let net = Network::from_edges(&[("a", "p", 1.0), ("p", "y", 1.0), ("a", "q", 1.0), ("q", "y", 1.0)]).unwrap();
        let mut ann = AnnotatedSample::new(fixed(vec![1.0, 0.5, 0.4, 0.6]));
        ann.minima = Some(vec![0.1, -0.2, 0.3, 0.2]);
        let inf = infimum_field(&net, &ann, &[0]).unwrap();
        assert_eq!(inf.itilde[net.vertex("y").unwrap()], 0.2);
    }

    #[test]
    fn missing_annotations_are_errors() {
        let net = path3();
        let ann = AnnotatedSample::new(fixed(vec![0.0; 3]));
        assert!(matches!(delta(&net, &ann, &[0]), Err(Error::MissingAnnotation(_))));
        assert!(matches!(infimum_field(&net, &ann, &[0]), Err(Error::MissingAnnotation(_))));
    }

    #[test]
    fn minima_below_endpoints() {
        let net = Network::from_edges(&[("a", "b", 2.0), ("b", "c", 0.5), ("c", "a", 1.0)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.4)]).unwrap();
        for r in 0..500 {
            let mut s = RandomStream::new(4, r, Lane::Field);
            let f = sample_field(&net, &bc, &mut s).unwrap();
            let ann = annotate_minima(&net, f, &mut s.lane(Lane::Minimum)).unwrap();
            for (k, e) in net.edges().iter().enumerate() {
                let m = ann.minima.as_ref().unwrap()[k];
                assert!(m <= ann.field.values[e.u].min(ann.field.values[e.v]));
            }
            let inf = infimum_field(&net, &ann, bc.boundary()).unwrap();
            for v in 0..3 {
                assert!(inf.itilde[v] <= ann.field.values[v]);
                assert!(inf.i[v] <= 0.0);
            }
        }
    }

    #[test]
    fn negative_boundary_rejected_for_levy() {
        let net = path3();
        let bc = BoundarySpec::from_names(&net, &[("a", -0.1)]).unwrap();
        assert!(levy_pair_samples(&net, &bc, 10, 1).is_err());
    }

    #[test]
    fn levy_second_coordinates_nonnegative() {
        let net = path3();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.3)]).unwrap();
        let pairs = levy_pair_samples(&net, &bc, 200, 3).unwrap();
        assert_eq!(pairs.replicates(), 200);
        assert!(pairs.left.iter().chain(&pairs.right).all(|p| p[1] >= 0.0));
    }
}
