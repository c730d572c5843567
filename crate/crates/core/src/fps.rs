//! First-passage sets `Λ_a` explored on refined graphs, with two-sided
//! resistance brackets.
//!
//! On a refined sample every sub-edge carries an exactly drawn bridge
//! minimum, so the refined vertices of `Λ̃_a` are found exactly: they are
//! reached from the sources through sub-edges whose minimum is `≥ a`.
//! That vertex set (the lower bracket) is contained in `Λ̃_a`; adding its
//! frontier vertices (the upper bracket) yields a set whose shorting
//! contains `Λ̃_a`. Resistances to the set are therefore bracketed:
//! `R(upper) ≤ R(Λ̃_a) ≤ R(lower)`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::exec::map_replicates;
use crate::fieldsim::{refine, FieldSampler, RefinedNetwork, Subdivision};
use crate::laws::FpsLawParams;
use crate::metric::{bottleneck_paths, edge_local_times, edge_minima, shortest_paths};
use crate::network::{set_resistance, set_resistance_graph, BoundarySpec, ConductanceGraph, Network};
use crate::stats::{Lane, RandomStream};

/// Strictly decreasing levels `a_1 > a_2 > … > a_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSchedule {
    levels: Vec<f64>,
}

impl LevelSchedule {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("empty level schedule".into()));
        }
        if levels.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("non-finite level".into()));
        }
        if levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("levels must be strictly decreasing".into()));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// Which of the two nested vertex sets an observable refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bracket {
    Lower,
    Upper,
}

impl Bracket {
    pub fn as_str(self) -> &'static str {
        match self {
            Bracket::Lower => "lower",
            Bracket::Upper => "upper",
        }
    }
}

/// An observable evaluated on the lower and upper bracket sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracketed {
    pub lower: f64,
    pub upper: f64,
}

impl Bracketed {
    pub fn get(&self, b: Bracket) -> f64 {
        match b {
            Bracket::Lower => self.lower,
            Bracket::Upper => self.upper,
        }
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            lower: f(self.lower),
            upper: f(self.upper),
        }
    }
}

/// Explored set on the refined network. `inner` is the lower bracket;
/// `inner ∪ frontier` is the upper bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstPassageSet {
    pub level: f64,
    pub inner: Vec<usize>,
    pub frontier: Vec<usize>,
}

impl FirstPassageSet {
    pub fn vertices(&self, b: Bracket) -> Vec<usize> {
        match b {
            Bracket::Lower => self.inner.clone(),
            Bracket::Upper => {
                let mut v = self.inner.clone();
                v.extend_from_slice(&self.frontier);
                v.sort_unstable();
                v
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsObservables {
    /// `R^eff(set, Ǎ)`; zero when the set meets `Ǎ`.
    pub r_eff_to_check: Option<Bracketed>,
    /// Reciprocal of the above; infinite when the set meets `Ǎ`.
    pub c_eff_to_check: Option<Bracketed>,
    /// `R^eff(x0, A) − R^eff(x0, set)`.
    pub drop_at_x0: Option<Bracketed>,
}

/// Field values at every refined vertex with per-sub-edge annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedSample {
    pub values: Vec<f64>,
    pub minima: Option<Vec<f64>>,
    pub local_times: Option<Vec<f64>>,
}

/// Reusable state for sampling and exploring one refined network.
#[derive(Debug, Clone)]
pub struct FpsSampler {
    refined: RefinedNetwork,
    field: FieldSampler,
    incidence: Vec<Vec<usize>>,
    sources: Vec<usize>,
}

impl FpsSampler {
    /// Exploration starts from `sources` (base vertex indices).
    pub fn new(net: &Network, bc: &BoundarySpec, sub: Subdivision, sources: Vec<usize>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidArgument("empty source set".into()));
        }
        let refined = refine(net, bc, sub)?;
        let incidence = refined.network().incidence();
        Ok(Self {
            field: FieldSampler::new(net, bc)?,
            refined,
            incidence,
            sources,
        })
    }

    pub fn refined(&self) -> &RefinedNetwork {
        &self.refined
    }

    fn base_and_fill(&self, seed: u64, replicate: u64) -> Vec<f64> {
        let mut s = RandomStream::new(seed, replicate, Lane::Field);
        let base = self.field.sample_values(&mut s);
        self.refined.fill(&base, &mut s.lane(Lane::Auxiliary))
    }

    /// Refined field with exact sub-edge minima. The base-vertex field
    /// depends only on `(seed, replicate)`, not on the refinement.
    pub fn sample(&self, seed: u64, replicate: u64) -> Result<RefinedSample> {
        let values = self.base_and_fill(seed, replicate);
        let mut s = RandomStream::new(seed, replicate, Lane::Minimum);
        let minima = edge_minima(self.refined.network(), &values, &mut s)?;
        Ok(RefinedSample {
            values,
            minima: Some(minima),
            local_times: None,
        })
    }

    /// Refined field with exact sub-edge local times.
    pub fn sample_local_times(&self, seed: u64, replicate: u64) -> Result<RefinedSample> {
        let values = self.base_and_fill(seed, replicate);
        let mut s = RandomStream::new(seed, replicate, Lane::LocalTime);
        let lt = edge_local_times(self.refined.network(), &values, &mut s)?;
        Ok(RefinedSample {
            values,
            minima: None,
            local_times: Some(lt),
        })
    }

    /// Lower bracket of `Λ̃_a` and its frontier.
    pub fn explore(&self, sample: &RefinedSample, level: f64) -> Result<FirstPassageSet> {
        let minima = sample.minima.as_deref().ok_or(Error::MissingAnnotation("edge minima"))?;
        let net = self.refined.network();
        let mut inside = vec![false; net.vertex_count()];
        let mut queue = VecDeque::new();
        for &s in &self.sources {
            if sample.values[s] < level {
                return Err(Error::InvalidArgument(format!(
                    "level {level} is not below the source value {}",
                    sample.values[s]
                )));
            }
            if !inside[s] {
                inside[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(x) = queue.pop_front() {
            for &k in &self.incidence[x] {
                let y = net.edges()[k].other(x);
                if !inside[y] && minima[k] >= level {
                    inside[y] = true;
                    queue.push_back(y);
                }
            }
        }
        Ok(self.with_frontier(level, inside))
    }

    /// Refined vertices within δ-distance `radius` of the sources, as a
    /// lower bracket of the metric ball, with its frontier.
    pub fn ball(&self, distances: &[f64], radius: f64) -> FirstPassageSet {
        let inside = distances.iter().map(|&d| d <= radius).collect();
        self.with_frontier(-radius, inside)
    }

    fn with_frontier(&self, level: f64, inside: Vec<bool>) -> FirstPassageSet {
        let net = self.refined.network();
        let mut frontier_mark = vec![false; inside.len()];
        for e in net.edges() {
            if inside[e.u] && !inside[e.v] {
                frontier_mark[e.v] = true;
            } else if inside[e.v] && !inside[e.u] {
                frontier_mark[e.u] = true;
            }
        }
        FirstPassageSet {
            level,
            inner: (0..inside.len()).filter(|&v| inside[v]).collect(),
            frontier: (0..inside.len()).filter(|&v| frontier_mark[v]).collect(),
        }
    }

    /// Base network with the refined set shorted into one extra node
    /// (index `n`); runs of unexplored sub-edges collapse to series
    /// resistors.
    fn collapse(&self, mask: &[bool]) -> ConductanceGraph {
        let base = self.refined.base();
        let n = base.vertex_count();
        let node = |x: usize| if mask[x] { n } else { x };
        let mut edges = Vec::new();
        for (k, e) in base.edges().iter().enumerate() {
            let chain = self.refined.chain(k);
            let step = e.resistance() / (chain.len() - 1) as f64;
            let mut anchor = 0;
            for j in 1..chain.len() {
                if j + 1 == chain.len() || mask[chain[j]] {
                    let (p, q) = (node(chain[anchor]), node(chain[j]));
                    if !(p == n && q == n) {
                        edges.push((p, q, 1.0 / ((j - anchor) as f64 * step)));
                    }
                    anchor = j;
                }
            }
        }
        ConductanceGraph { n: n + 1, edges }
    }

    fn mask(&self, vertices: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.refined.network().vertex_count()];
        for &v in vertices {
            m[v] = true;
        }
        m
    }

    /// `R^eff(set, targets)` for base-vertex targets.
    pub fn resistance_to(&self, set: &[usize], targets: &[usize]) -> Result<f64> {
        if set.is_empty() {
            return Err(Error::InvalidArgument("empty set".into()));
        }
        let mask = self.mask(set);
        if targets.iter().any(|&t| mask[t]) {
            return Ok(0.0);
        }
        let g = self.collapse(&mask);
        let n = self.refined.base().vertex_count();
        set_resistance_graph(&g, &[n], targets)
    }

    pub fn bracketed_resistance(&self, set: &FirstPassageSet, targets: &[usize]) -> Result<Bracketed> {
        Ok(Bracketed {
            lower: self.resistance_to(&set.vertices(Bracket::Lower), targets)?,
            upper: self.resistance_to(&set.vertices(Bracket::Upper), targets)?,
        })
    }
}

fn check_level_below(bc: &BoundarySpec, sources: &[usize], level: f64) -> Result<()> {
    let min = sources
        .iter()
        .map(|&v| bc.value(v).unwrap_or(f64::INFINITY))
        .fold(f64::INFINITY, f64::min);
    if level >= min {
        return Err(Error::InvalidArgument(format!(
            "level {level} must lie below the minimum source value {min}"
        )));
    }
    Ok(())
}

fn observables_to_check(r: Bracketed) -> FpsObservables {
    FpsObservables {
        r_eff_to_check: Some(r),
        c_eff_to_check: Some(r.map(|x| 1.0 / x)),
        drop_at_x0: None,
    }
}

/// One first-passage set from `Â` with resistances to `Ǎ`.
pub fn sample_fps(
    net: &Network,
    bc: &BoundarySpec,
    level: f64,
    sub: Subdivision,
    seed: u64,
    replicate: u64,
) -> Result<(FirstPassageSet, FpsObservables)> {
    let p = bc
        .partition()
        .ok_or_else(|| Error::InvalidArgument("a partition with a check block is required".into()))?;
    check_level_below(bc, &p.hat, level)?;
    let sampler = FpsSampler::new(net, bc, sub, p.hat.clone())?;
    let sample = sampler.sample(seed, replicate)?;
    let set = sampler.explore(&sample, level)?;
    let r = sampler.bracketed_resistance(&set, &p.check)?;
    Ok((set, observables_to_check(r)))
}

/// Monte Carlo estimate of `E[exp(−u C^eff(Λ_a, Ǎ))]` per bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceEstimate {
    pub u: f64,
    pub lower: f64,
    pub lower_se: f64,
    pub upper: f64,
    pub upper_se: f64,
    pub closed_form: f64,
    pub replicates: usize,
}

impl LaplaceEstimate {
    /// Whether the closed form lies in the bracket interval widened by
    /// `k` standard errors on each side.
    pub fn covers(&self, k: f64) -> bool {
        let lo = self.lower.min(self.upper) - k * self.lower_se.max(self.upper_se);
        let hi = self.lower.max(self.upper) + k * self.lower_se.max(self.upper_se);
        (lo..=hi).contains(&self.closed_form)
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (v / n).sqrt())
}

/// Per-replicate bracketed `C^eff(Λ_a, Ǎ)`.
pub fn check_conductances(
    net: &Network,
    bc: &BoundarySpec,
    level: f64,
    sub: Subdivision,
    replicates: usize,
    seed: u64,
) -> Result<Vec<Bracketed>> {
    let p = bc
        .partition()
        .ok_or_else(|| Error::InvalidArgument("a partition with a check block is required".into()))?;
    check_level_below(bc, &p.hat, level)?;
    let sampler = FpsSampler::new(net, bc, sub, p.hat.clone())?;
    let rows = map_replicates(replicates, |r| -> Result<Bracketed> {
        let sample = sampler.sample(seed, r)?;
        let set = sampler.explore(&sample, level)?;
        Ok(sampler.bracketed_resistance(&set, &p.check)?.map(|x| 1.0 / x))
    });
    rows.into_iter().collect()
}

pub fn fps_laplace_estimate(
    net: &Network,
    bc: &BoundarySpec,
    level: f64,
    us: &[f64],
    sub: Subdivision,
    replicates: usize,
    seed: u64,
) -> Result<Vec<LaplaceEstimate>> {
    let params = FpsLawParams::from_network(net, bc)?;
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least two replicates".into()));
    }
    let cs = check_conductances(net, bc, level, sub, replicates, seed)?;
    us.iter()
        .map(|&u| {
            let lo: Vec<f64> = cs.iter().map(|c| (-u * c.lower).exp()).collect();
            let up: Vec<f64> = cs.iter().map(|c| (-u * c.upper).exp()).collect();
            let (lower, lower_se) = mean_se(&lo);
            let (upper, upper_se) = mean_se(&up);
            Ok(LaplaceEstimate {
                u,
                lower,
                lower_se,
                upper,
                upper_se,
                closed_form: params.laplace(level, u)?,
                replicates,
            })
        })
        .collect()
}

/// One field sample explored at every level of a schedule from all of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedSample {
    pub replicate: u64,
    pub phi_x0: f64,
    /// Per level, `R^eff(x0, A) − R^eff(x0, Λ_{a_i})`.
    pub drops: Vec<Bracketed>,
    /// `sup_γ min_γ φ̃ ∧ min_A h` over paths from `x0` to `A`.
    pub maximin: f64,
    /// Per level, whether `x0 ∈ Λ̃_{a_i}`.
    pub contains_x0: Vec<bool>,
}

pub fn nested_fps(
    net: &Network,
    bc: &BoundarySpec,
    schedule: &LevelSchedule,
    x0: usize,
    sub: Subdivision,
    replicates: usize,
    seed: u64,
) -> Result<Vec<NestedSample>> {
    if bc.is_boundary(x0) {
        return Err(Error::InvalidArgument("x0 must be an interior vertex".into()));
    }
    if schedule.levels()[0] > bc.min_value() {
        return Err(Error::InvalidArgument("levels must not exceed min_A h".into()));
    }
    let sampler = FpsSampler::new(net, bc, sub, bc.boundary().to_vec())?;
    let r0 = set_resistance(net, &[x0], bc.boundary())?;
    let hmin = bc.min_value();
    let starts: Vec<(usize, f64)> = bc.boundary().iter().zip(bc.values()).map(|(&v, &h)| (v, h)).collect();
    let rows = map_replicates(replicates, |r| -> Result<NestedSample> {
        let sample = sampler.sample(seed, r)?;
        let minima = sample.minima.as_deref().expect("minima");
        let best = bottleneck_paths(sampler.refined().network(), minima, &starts);
        let mut drops = Vec::with_capacity(schedule.levels().len());
        let mut contains = Vec::with_capacity(schedule.levels().len());
        for &a in schedule.levels() {
            let set = sampler.explore(&sample, a)?;
            let rx = sampler.bracketed_resistance(&set, &[x0])?;
            drops.push(rx.map(|x| r0 - x));
            contains.push(set.inner.binary_search(&x0).is_ok());
        }
        Ok(NestedSample {
            replicate: r,
            phi_x0: sample.values[x0],
            drops,
            maximin: best[x0].min(hmin),
            contains_x0: contains,
        })
    });
    rows.into_iter().collect()
}

/// Per-radius resistance drops at `x0` for the metric balls `B(A, ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSample {
    pub replicate: u64,
    pub delta_x0: f64,
    pub abs_phi_x0: f64,
    pub drops: Vec<Bracketed>,
}

pub fn metric_ball(
    net: &Network,
    bc: &BoundarySpec,
    radii: &[f64],
    x0: usize,
    sub: Subdivision,
    replicates: usize,
    seed: u64,
) -> Result<Vec<BallSample>> {
    if bc.values().iter().any(|&h| h < 0.0) {
        return Err(Error::InvalidArgument("boundary values must be nonnegative".into()));
    }
    if bc.is_boundary(x0) {
        return Err(Error::InvalidArgument("x0 must be an interior vertex".into()));
    }
    if radii.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidArgument("radii must be nonnegative".into()));
    }
    let sampler = FpsSampler::new(net, bc, sub, bc.boundary().to_vec())?;
    let r0 = set_resistance(net, &[x0], bc.boundary())?;
    let rows = map_replicates(replicates, |r| -> Result<BallSample> {
        let sample = sampler.sample_local_times(seed, r)?;
        let lt = sample.local_times.as_deref().expect("local times");
        let d = shortest_paths(sampler.refined().network(), lt, bc.boundary());
        let drops = radii
            .iter()
            .map(|&l| {
                let set = sampler.ball(&d, l);
                Ok(sampler.bracketed_resistance(&set, &[x0])?.map(|x| r0 - x))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BallSample {
            replicate: r,
            delta_x0: d[x0],
            abs_phi_x0: sample.values[x0].abs(),
            drops,
        })
    });
    rows.into_iter().collect()
}

/// The discrete first-passage set on the base graph: vertices joined to
/// `sources` by a nearest-neighbour path whose values, except possibly at
/// the far end, are `≥ a`.
pub fn discrete_fps(net: &Network, values: &[f64], sources: &[usize], level: f64) -> Vec<usize> {
    let adj = net.incidence();
    let mut state = vec![0u8; net.vertex_count()]; // 1 explored, 2 stopped
    let mut queue = VecDeque::new();
    for &s in sources {
        if state[s] == 0 {
            state[s] = 1;
            queue.push_back(s);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &k in &adj[x] {
            let y = net.edges()[k].other(x);
            if state[y] == 0 {
                if values[y] >= level {
                    state[y] = 1;
                    queue.push_back(y);
                } else {
                    state[y] = 2;
                }
            }
        }
    }
    (0..net.vertex_count()).filter(|&v| state[v] != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge(h_hat: f64, h_check: f64, r: f64) -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[("xh", "xc", 1.0 / r)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("xh", h_hat), ("xc", h_check)])
            .unwrap()
            .with_partition_names(&net, &["xh"], &["xc"])
            .unwrap();
        (net, bc)
    }

    fn diamond() -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[
            ("a", "x", 1.0),
            ("x", "y", 0.5),
            ("y", "b", 1.0),
            ("a", "w", 2.0),
            ("w", "y", 1.0),
            ("x", "w", 1.5),
        ])
        .unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.5), ("b", 0.2)])
            .unwrap()
            .with_partition_names(&net, &["a"], &["b"])
            .unwrap();
        (net, bc)
    }

    #[test]
    fn schedule_validation() {
        assert!(LevelSchedule::new(vec![]).is_err());
        assert!(LevelSchedule::new(vec![0.0, 0.0]).is_err());
        assert!(LevelSchedule::new(vec![0.0, 0.5]).is_err());
        assert!(LevelSchedule::new(vec![0.5, 0.0, -1.0]).is_ok());
    }

    #[test]
    fn level_must_be_below_hat() {
        let (net, bc) = single_edge(0.3, 0.0, 1.0);
        assert!(sample_fps(&net, &bc, 0.3, Subdivision::Uniform(4), 1, 0).is_err());
        assert!(sample_fps(&net, &bc, 0.2, Subdivision::Uniform(4), 1, 0).is_ok());
    }

    #[test]
    fn very_low_level_swallows_everything() {
        let (net, bc) = diamond();
        let (set, obs) = sample_fps(&net, &bc, -1e6, Subdivision::Uniform(4), 3, 0).unwrap();
        assert!(set.frontier.is_empty());
        let c = obs.c_eff_to_check.unwrap();
        assert!(c.lower.is_infinite() && c.upper.is_infinite());
    }

    #[test]
    fn bracket_ordering_and_nesting() {
        let (net, bc) = diamond();
        let sampler = FpsSampler::new(&net, &bc, Subdivision::Uniform(8), vec![0]).unwrap();
        let check = &bc.partition().unwrap().check;
        for r in 0..300 {
            let s = sampler.sample(11, r).unwrap();
            let hi = sampler.explore(&s, -0.2).unwrap();
            let lo = sampler.explore(&s, -0.6).unwrap();
            assert!(hi.inner.iter().all(|v| lo.inner.binary_search(v).is_ok()));
            assert!(hi.inner.iter().all(|&v| s.values[v] >= -0.2));
            let rb = sampler.bracketed_resistance(&hi, check).unwrap();
            assert!(rb.lower >= rb.upper - 1e-12, "{rb:?}");
        }
    }

    #[test]
    fn collapse_is_exact_without_set_interior() {
        // With only the source shorted, the collapsed resistance equals
        // the base two-point resistance.
        let (net, bc) = diamond();
        let sampler = FpsSampler::new(&net, &bc, Subdivision::Uniform(5), vec![0]).unwrap();
        let r = sampler.resistance_to(&[0], &[net.vertex("b").unwrap()]).unwrap();
        let exact = crate::network::two_point_resistance(&net, 0, net.vertex("b").unwrap()).unwrap();
        assert!((r - exact).abs() < 1e-12);
    }

    #[test]
    fn collapse_matches_refined_set_resistance() {
        let (net, bc) = diamond();
        let sampler = FpsSampler::new(&net, &bc, Subdivision::Uniform(6), vec![0]).unwrap();
        let s = sampler.sample(4, 2).unwrap();
        let set = sampler.explore(&s, -0.4).unwrap();
        let b = net.vertex("b").unwrap();
        for br in [Bracket::Lower, Bracket::Upper] {
            let v = set.vertices(br);
            let fast = sampler.resistance_to(&v, &[b]).unwrap();
            let slow = set_resistance(sampler.refined().network(), &v, &[b]).unwrap();
            assert!((fast - slow).abs() < 1e-10 * slow.max(1.0), "{fast} vs {slow}");
        }
    }

    #[test]
    fn laplace_small_u_is_non_hitting_probability() {
        let (net, bc) = single_edge(0.5, 0.0, 1.0);
        let est = fps_laplace_estimate(&net, &bc, -0.5, &[1e-9], Subdivision::Uniform(16), 4000, 1).unwrap();
        let e = est[0];
        assert!(e.lower <= 1.0 && e.upper <= e.lower);
        assert!(e.closed_form < 1.0);
        assert!(e.covers(4.0), "{e:?}");
    }

    #[test]
    fn laplace_requires_constant_check() {
        let net = Network::from_edges(&[("a", "x", 1.0), ("x", "b", 1.0), ("x", "c", 1.0)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 1.0), ("b", 0.0), ("c", 0.5)])
            .unwrap()
            .with_partition_names(&net, &["a"], &["b", "c"])
            .unwrap();
        assert!(fps_laplace_estimate(&net, &bc, -1.0, &[1.0], Subdivision::Uniform(2), 10, 1).is_err());
    }

    #[test]
    fn nested_drops_monotone_and_consistent_with_maximin() {
        let (net, bc) = diamond();
        let x0 = net.vertex("x").unwrap();
        let sched = LevelSchedule::new(vec![0.1, -0.3, -0.9]).unwrap();
        let rows = nested_fps(&net, &bc, &sched, x0, Subdivision::Uniform(8), 300, 5).unwrap();
        for row in rows {
            for w in row.drops.windows(2) {
                assert!(w[1].lower >= w[0].lower - 1e-12);
            }
            for (i, &a) in sched.levels().iter().enumerate() {
                assert_eq!(row.contains_x0[i], row.maximin >= a);
                assert!(row.drops[i].lower <= row.drops[i].upper + 1e-12);
            }
        }
    }

    #[test]
    fn nested_rejects_boundary_x0_and_high_levels() {
        let (net, bc) = diamond();
        let sched = LevelSchedule::new(vec![0.1]).unwrap();
        assert!(nested_fps(&net, &bc, &sched, 0, Subdivision::Uniform(2), 1, 1).is_err());
        let high = LevelSchedule::new(vec![0.3]).unwrap();
        assert!(nested_fps(&net, &bc, &high, 1, Subdivision::Uniform(2), 1, 1).is_err());
    }

    #[test]
    fn ball_at_zero_is_cluster_and_monotone() {
        let (net, bc) = diamond();
        let x0 = net.vertex("x").unwrap();
        let rows = metric_ball(&net, &bc, &[0.0, 0.2, 0.6], x0, Subdivision::Uniform(4), 200, 9).unwrap();
        for row in rows {
            assert!(row.drops[0].lower >= -1e-12);
            for w in row.drops.windows(2) {
                assert!(w[1].lower >= w[0].lower - 1e-12);
            }
        }
        let neg = bc.with_values(vec![0.5, -0.1]).unwrap();
        assert!(metric_ball(&net, &neg, &[0.1], x0, Subdivision::Uniform(2), 1, 1).is_err());
    }

    #[test]
    fn discrete_set_stops_at_first_low_vertex() {
        let net = Network::from_edges(&[("a", "b", 1.0), ("b", "c", 1.0), ("c", "d", 1.0)]).unwrap();
        let set = discrete_fps(&net, &[1.0, -2.0, 0.5, 0.5], &[0], 0.0);
        assert_eq!(set, vec![0, 1]);
        let set = discrete_fps(&net, &[1.0, 0.2, -0.5, 0.5], &[0], 0.0);
        assert_eq!(set, vec![0, 1, 2]);
    }
}
