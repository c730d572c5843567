//! Scripted verification experiments. Every suite returns its reports and
//! the underlying samples as CSV so results can be inspected or plotted.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::exec::map_replicates;
use crate::fieldsim::{refine, FieldSampler, Subdivision};
use crate::fps::{discrete_fps, fps_laplace_estimate, nested_fps, LevelSchedule};
use crate::laws::{
    bm_hitting_cdf, last_visit_cdf, local_time_survival, normal_cdf, BridgeSpec, FpsLawParams, TwoSetLaw,
};
use crate::lattice::{grid, grid_resistance, rectangle_extremal_distance, GridShape};
use crate::metric::{
    annotate_local_times, delta, edge_local_times, edge_minima, infimum_field, levy_pair_samples,
    pairwise, sign_clusters, two_set, AnnotatedSample,
};
use crate::network::{
    effective_kernel, green_matrix, hadamard_all, set_resistance, star_mesh, BoundarySpec, Erosion, Network,
};
use crate::stats::{ks_one_sample, ks_two_sample, proportion_z, slope_fit, Atom, Lane, RandomStream, TestReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Network,
    Eq1,
    TwoPoint,
    Rewire,
    Connect,
    StarJoint,
    Levy,
    FpsLaplace,
    Cor34,
    Lattice,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Network,
        Suite::Eq1,
        Suite::TwoPoint,
        Suite::Rewire,
        Suite::Connect,
        Suite::StarJoint,
        Suite::Levy,
        Suite::FpsLaplace,
        Suite::Cor34,
        Suite::Lattice,
        Suite::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Network => "network",
            Suite::Eq1 => "eq1",
            Suite::TwoPoint => "two-point",
            Suite::Rewire => "rewire",
            Suite::Connect => "connect",
            Suite::StarJoint => "star-joint",
            Suite::Levy => "levy",
            Suite::FpsLaplace => "fps-laplace",
            Suite::Cor34 => "cor34",
            Suite::Lattice => "lattice",
            Suite::Oracle => "oracle",
        }
    }

    fn default_replicates(self) -> usize {
        match self {
            Suite::Network => 1,
            Suite::StarJoint => 1_000_000,
            Suite::Cor34 => 20_000,
            Suite::Lattice => 10_000,
            Suite::Oracle => 1_000,
            Suite::Connect => 50_000,
            _ => 100_000,
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{s}`")))
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub replicates: Option<usize>,
    pub refinement: Option<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            replicates: None,
            refinement: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub seed: u64,
    pub reports: Vec<TestReport>,
    pub data: Vec<DataFile>,
    pub runtime_ms: f64,
}

impl SuiteOutcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

struct Ctx {
    suite: Suite,
    seed: u64,
    n: usize,
    reports: Vec<TestReport>,
    data: Vec<DataFile>,
    clock: Instant,
}

impl Ctx {
    fn push(&mut self, name: &str, report: TestReport) {
        let ms = self.clock.elapsed().as_secs_f64() * 1e3;
        self.clock = Instant::now();
        self.reports
            .push(report.named(format!("{}/{}", self.suite, name)).with_seed(self.seed).with_runtime(ms));
    }

    fn file(&mut self, name: &str, contents: String) {
        self.data.push(DataFile {
            name: format!("{}_{}", self.suite.name().replace('-', "_"), name),
            contents,
        });
    }

    fn sub_seed(&self, tag: u64) -> u64 {
        self.seed ^ (tag << 40)
    }
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let start = Instant::now();
    let mut ctx = Ctx {
        suite,
        seed: cfg.seed,
        n: cfg.replicates.unwrap_or(suite.default_replicates()),
        reports: Vec::new(),
        data: Vec::new(),
        clock: Instant::now(),
    };
    if ctx.n == 0 {
        return Err(Error::InvalidArgument("replicates must be at least 1".into()));
    }
    match suite {
        Suite::Network => network_suite(&mut ctx)?,
        Suite::Eq1 => eq1_suite(&mut ctx)?,
        Suite::TwoPoint => two_point_suite(&mut ctx)?,
        Suite::Rewire => rewire_suite(&mut ctx)?,
        Suite::Connect => connect_suite(&mut ctx)?,
        Suite::StarJoint => star_joint_suite(&mut ctx)?,
        Suite::Levy => levy_suite(&mut ctx)?,
        Suite::FpsLaplace => fps_laplace_suite(&mut ctx, cfg.refinement)?,
        Suite::Cor34 => cor34_suite(&mut ctx, cfg.refinement)?,
        Suite::Lattice => lattice_suite(&mut ctx)?,
        Suite::Oracle => oracle_suite(&mut ctx)?,
    }
    Ok(SuiteOutcome {
        suite,
        seed: cfg.seed,
        reports: ctx.reports,
        data: ctx.data,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn values_csv(header: &str, rows: impl IntoIterator<Item = (String, f64)>) -> String {
    let mut s = format!("{header}\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

/// Networks used by the suites.
pub mod fixtures {
    use super::*;

    /// Two-boundary network with four interior vertices.
    pub fn kite() -> (Network, BoundarySpec) {
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
        .expect("kite");
        let bc = BoundarySpec::from_names(&net, &[("a", 0.3), ("b", -0.4)]).expect("kite boundary");
        (net, bc)
    }

    /// Four boundary points around two interior vertices, no boundary-to-boundary edges.
    pub fn four_terminal() -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[
            ("b1", "p", 1.0),
            ("b2", "p", 0.5),
            ("p", "q", 1.0),
            ("q", "b3", 2.0),
            ("q", "b4", 1.0),
            ("b2", "q", 0.8),
        ])
        .expect("four-terminal");
        let bc = BoundarySpec::from_names(&net, &[("b1", 0.2), ("b2", 0.6), ("b3", 0.1), ("b4", 0.4)])
            .expect("four-terminal boundary");
        (net, bc)
    }

    /// Single edge `x̂ – x̌` of resistance `r`.
    pub fn single_edge(r: f64, h_hat: f64, h_check: f64) -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[("xh", "xc", 1.0 / r)]).expect("edge");
        let bc = BoundarySpec::from_names(&net, &[("xh", h_hat), ("xc", h_check)])
            .and_then(|b| b.with_partition_names(&net, &["xh"], &["xc"]))
            .expect("edge boundary");
        (net, bc)
    }

    /// Series of resistances 1 and 2.
    pub fn series(h_hat: f64, h_check: f64) -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[("xh", "m", 1.0), ("m", "xc", 0.5)]).expect("series");
        let bc = BoundarySpec::from_names(&net, &[("xh", h_hat), ("xc", h_check)])
            .and_then(|b| b.with_partition_names(&net, &["xh"], &["xc"]))
            .expect("series boundary");
        (net, bc)
    }

    /// Five vertices: a resistance-1 lead into a balanced Wheatstone
    /// bridge of total resistance 2, so `R^eff(x̂, x̌) = 3`.
    pub fn bridge5(h_hat: f64, h_check: f64) -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[
            ("xh", "w", 1.0),
            ("w", "u", 0.5),
            ("u", "xc", 0.5),
            ("w", "v", 0.5),
            ("v", "xc", 0.5),
            ("u", "v", 1.0),
        ])
        .expect("bridge5");
        let bc = BoundarySpec::from_names(&net, &[("xh", h_hat), ("xc", h_check)])
            .and_then(|b| b.with_partition_names(&net, &["xh"], &["xc"]))
            .expect("bridge5 boundary");
        (net, bc)
    }

    /// Star with four leaves; leaves 1, 2 form `Â`, leaves 3, 4 form `Ǎ`.
    pub fn star4() -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[("l1", "c", 1.0), ("l2", "c", 2.0), ("l3", "c", 0.5), ("l4", "c", 1.5)])
            .expect("star4");
        let bc = BoundarySpec::from_names(&net, &[("l1", 0.3), ("l2", 0.5), ("l3", 0.2), ("l4", 0.4)])
            .and_then(|b| b.with_partition_names(&net, &["l1", "l2"], &["l3", "l4"]))
            .expect("star4 boundary");
        (net, bc)
    }

    /// Unit three-leaf star with `h ≡ a`.
    pub fn star3(a: f64) -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[("x1", "c", 1.0), ("x2", "c", 1.0), ("x3", "c", 1.0)]).expect("star3");
        let bc = BoundarySpec::from_names(&net, &[("x1", a), ("x2", a), ("x3", a)]).expect("star3 boundary");
        (net, bc)
    }

    /// Diamond used for the nested first-passage experiment; `x` is `x0`.
    pub fn diamond() -> (Network, BoundarySpec) {
        let net = Network::from_edges(&[
            ("a", "x", 1.0),
            ("x", "y", 0.5),
            ("y", "b", 1.0),
            ("a", "w", 2.0),
            ("w", "y", 1.0),
            ("x", "w", 1.5),
        ])
        .expect("diamond");
        let bc = BoundarySpec::from_names(&net, &[("a", 0.5), ("b", 0.2)]).expect("diamond boundary");
        (net, bc)
    }
}

fn rel_diff(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

fn network_suite(ctx: &mut Ctx) -> Result<()> {
    let cases = [("kite", fixtures::kite()), ("four-terminal", fixtures::four_terminal())];
    for (label, (net, bc)) in &cases {
        let a = bc.boundary();
        let reference = effective_kernel(net, a)?;
        let scale = reference.entries.amax();

        let mut worst: f64 = 0.0;
        for v in bc.interior() {
            let reduced = star_mesh(net, bc, v)?;
            let rbc = bc.transfer(net, &reduced)?;
            let k = effective_kernel(&reduced, rbc.boundary())?;
            worst = worst.max((&k.entries - &reference.entries).amax() / scale);
        }
        ctx.push(&format!("{label}/star-mesh"), TestReport::tolerance("", worst, 1e-9));

        let (mut cur, mut cbc) = (net.clone(), bc.clone());
        while let Some(&v) = cbc.interior().first() {
            let next = star_mesh(&cur, &cbc, v)?;
            cbc = cbc.transfer(&cur, &next)?;
            cur = next;
        }
        let mut direct = nalgebra::DMatrix::zeros(a.len(), a.len());
        for e in cur.edges() {
            let (i, j) = (
                cbc.boundary().iter().position(|&x| x == e.u).expect("boundary"),
                cbc.boundary().iter().position(|&x| x == e.v).expect("boundary"),
            );
            direct[(i, j)] += e.conductance;
            direct[(j, i)] += e.conductance;
        }
        let err = (&direct - &reference.entries).amax() / scale;
        ctx.push(&format!("{label}/full-elimination"), TestReport::tolerance("", err, 1e-9));

        let g = green_matrix(net, bc)?;
        let mut worst: f64 = 0.0;
        for (i, &x) in g.interior.iter().enumerate() {
            let r = set_resistance(net, &[x], a)?;
            worst = worst.max(rel_diff(g.entries[(i, i)], r, r));
        }
        ctx.push(&format!("{label}/green-diagonal"), TestReport::tolerance("", worst, 1e-10));
    }

    let (net, bc) = fixtures::four_terminal();
    let erosions: Vec<Erosion> = [(0usize, 0.3), (1, 0.7), (3, 0.45), (4, 0.2)]
        .iter()
        .map(|&(edge, frac)| Erosion {
            edge,
            depth: frac * net.edges()[edge].resistance(),
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in 0..erosions.len() {
        for r in hadamard_all(&net, &bc, &erosions, i)? {
            worst = worst.max(r.relative_error);
            count += 1;
        }
    }
    let mut rep = TestReport::tolerance("", worst, 1e-4);
    rep.n = count;
    ctx.push("hadamard", rep);
    Ok(())
}

/// `δ` between the two endpoints of a one-edge network.
fn edge_delta_samples(w0: f64, wt: f64, t: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let net = Network::from_edges(&[("x0", "xt", 1.0 / t)])?;
    let bc = BoundarySpec::from_names(&net, &[("x0", w0), ("xt", wt)])?;
    let sampler = FieldSampler::new(&net, &bc)?;
    map_replicates(n, |r| -> Result<f64> {
        let mut s = RandomStream::new(seed, r, Lane::Field);
        let field = sampler.sample(&mut s);
        let ann = annotate_local_times(&net, field, &mut s.lane(Lane::LocalTime))?;
        Ok(delta(&net, &ann, &[0])?[1])
    })
    .into_iter()
    .collect()
}

fn eq1_suite(ctx: &mut Ctx) -> Result<()> {
    let n = ctx.n;
    let xs = edge_delta_samples(0.0, 0.0, 1.0, n, ctx.sub_seed(1))?;
    let halves: Vec<f64> = xs.iter().map(|x| x * x / 2.0).collect();
    ctx.push("zero-ends/ks-exp1", ks_one_sample(&halves, |t| if t <= 0.0 { 0.0 } else { -(-t).exp_m1() }, None)?);
    ctx.file("zero_ends.csv", values_csv("replicate,delta", xs.iter().enumerate().map(|(i, &x)| (i.to_string(), x))));

    let b = BridgeSpec::new(1.0, 1.0, 2.0)?;
    let ys = edge_delta_samples(1.0, 1.0, 2.0, n, ctx.sub_seed(2))?;
    let positive = ys.iter().filter(|&&y| y > 0.0).count();
    let p_pos = local_time_survival(&b, 0.0);
    ctx.push("same-sign/positive-mass", proportion_z(positive, n, p_pos, 4.0)?);
    let atom = Atom {
        location: 0.0,
        mass: 1.0 - p_pos,
    };
    ctx.push(
        "same-sign/ks",
        ks_one_sample(&ys, |l| if l < 0.0 { 0.0 } else { 1.0 - local_time_survival(&b, l) }, Some(atom))?,
    );
    ctx.file("same_sign.csv", values_csv("replicate,delta", ys.iter().enumerate().map(|(i, &x)| (i.to_string(), x))));
    Ok(())
}

/// `δ_{Â,Ǎ}` samples on a partitioned network.
pub fn two_set_samples(net: &Network, bc: &BoundarySpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    let p = bc
        .partition()
        .ok_or_else(|| Error::InvalidArgument("partition required".into()))?
        .clone();
    let sampler = FieldSampler::new(net, bc)?;
    map_replicates(n, |r| -> Result<f64> {
        let mut s = RandomStream::new(seed, r, Lane::Field);
        let field = sampler.sample(&mut s);
        let ann = annotate_local_times(net, field, &mut s.lane(Lane::LocalTime))?;
        two_set(net, &ann, &p)
    })
    .into_iter()
    .collect()
}

fn two_point_suite(ctx: &mut Ctx) -> Result<()> {
    let (h_hat, h_check) = (0.5, -0.3);
    let nets = [
        ("edge", fixtures::single_edge(3.0, h_hat, h_check)),
        ("series", fixtures::series(h_hat, h_check)),
        ("bridge5", fixtures::bridge5(h_hat, h_check)),
    ];
    let law = BridgeSpec::new(h_hat, h_check, 3.0)?;
    let mut samples = Vec::new();
    for (k, (label, (net, bc))) in nets.iter().enumerate() {
        let r = set_resistance(net, &[0], &[net.vertex("xc")?])?;
        ctx.push(&format!("{label}/resistance"), TestReport::tolerance("", (r - 3.0).abs(), 1e-12));
        let xs = two_set_samples(net, bc, ctx.n, ctx.sub_seed(10 + k as u64))?;
        ctx.push(
            &format!("{label}/ks-eq1"),
            ks_one_sample(&xs, |l| if l < 0.0 { 0.0 } else { 1.0 - local_time_survival(&law, l) }, None)?,
        );
        samples.push((label, xs));
    }
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            ctx.push(
                &format!("{}-vs-{}/ks", samples[i].0, samples[j].0),
                ks_two_sample(&samples[i].1, &samples[j].1)?,
            );
        }
    }
    let mut csv = String::from("network,replicate,delta\n");
    for (label, xs) in &samples {
        for (i, x) in xs.iter().enumerate() {
            let _ = writeln!(csv, "{label},{i},{x}");
        }
    }
    ctx.file("samples.csv", csv);
    Ok(())
}

fn survival_reports(ctx: &mut Ctx, label: &str, xs: &[f64], law: &TwoSetLaw) -> Result<()> {
    for l in [0.2, 0.5, 1.0] {
        let hits = xs.iter().filter(|&&x| x > l).count();
        ctx.push(&format!("{label}/survival@{l}"), proportion_z(hits, xs.len(), law.survival(l), 4.0)?);
    }
    let positive = xs.iter().filter(|&&x| x > 0.0).count();
    ctx.push(&format!("{label}/connection"), proportion_z(positive, xs.len(), law.survival(0.0), 4.0)?);
    Ok(())
}

fn rewire_suite(ctx: &mut Ctx) -> Result<()> {
    let (star, sbc) = fixtures::star4();
    let c = star.vertex("c")?;
    let mesh = star_mesh(&star, &sbc, c)?;
    let mbc = sbc.transfer(&star, &mesh)?;
    let law = TwoSetLaw::from_network(&star, &sbc)?;
    let xs = two_set_samples(&star, &sbc, ctx.n, ctx.sub_seed(20))?;
    let ys = two_set_samples(&mesh, &mbc, ctx.n, ctx.sub_seed(21))?;
    ctx.push("star-vs-mesh/ks", ks_two_sample(&xs, &ys)?);
    survival_reports(ctx, "star", &xs, &law)?;
    survival_reports(ctx, "mesh", &ys, &law)?;
    let mut csv = String::from("network,replicate,delta\n");
    for (label, v) in [("star", &xs), ("mesh", &ys)] {
        for (i, x) in v.iter().enumerate() {
            let _ = writeln!(csv, "{label},{i},{x}");
        }
    }
    ctx.file("samples.csv", csv);
    Ok(())
}

fn connect_suite(ctx: &mut Ctx) -> Result<()> {
    let (dnet, dbc) = fixtures::diamond();
    let dbc = dbc.with_partition_names(&dnet, &["a"], &["b"])?;
    let (knet, kbc) = fixtures::kite();
    let kbc = kbc.with_values(vec![0.3, 0.6])?.with_partition_names(&knet, &["a"], &["b"])?;
    let (fnet, fbc) = fixtures::four_terminal();
    let fbc = fbc.with_partition_names(&fnet, &["b1", "b2"], &["b3", "b4"])?;
    let cases = [("diamond", dnet, dbc), ("kite", knet, kbc), ("four-terminal", fnet, fbc)];
    let mut csv = String::from("network,observed,expected,n\n");
    for (k, (label, net, bc)) in cases.iter().enumerate() {
        let law = TwoSetLaw::from_network(net, bc)?;
        let xs = two_set_samples(net, bc, ctx.n, ctx.sub_seed(30 + k as u64))?;
        let positive = xs.iter().filter(|&&x| x > 0.0).count();
        let p = law.survival(0.0);
        ctx.push(&format!("{label}/eq4"), proportion_z(positive, xs.len(), p, 4.0)?);
        let _ = writeln!(csv, "{label},{},{p},{}", positive as f64 / xs.len() as f64, xs.len());
    }
    ctx.file("probabilities.csv", csv);

    // δ = 0 exactly on sign clusters, on every sample.
    let (net, bc) = fixtures::kite();
    let sampler = FieldSampler::new(&net, &bc)?;
    let checks = ctx.n.min(2_000);
    let bad = map_replicates(checks, |r| -> Result<usize> {
        let mut s = RandomStream::new(ctx.sub_seed(39), r, Lane::Field);
        let ann = annotate_local_times(&net, sampler.sample(&mut s), &mut s.lane(Lane::LocalTime))?;
        let labels = sign_clusters(&net, &ann)?;
        let d = pairwise(&net, &ann)?;
        let mut bad = 0;
        for x in 0..net.vertex_count() {
            for y in 0..net.vertex_count() {
                if (d[(x, y)] == 0.0) != (labels[x] == labels[y]) {
                    bad += 1;
                }
            }
        }
        Ok(bad)
    })
    .into_iter()
    .sum::<Result<usize>>()?;
    let mut rep = TestReport::check("", bad as f64, bad == 0);
    rep.n = checks;
    ctx.push("kite/cluster-consistency", rep);
    Ok(())
}

/// `P(x1, x2, x3 share a sign cluster)` on the unit 3-star with `h ≡ a`.
pub fn star_joint_exact(a: f64) -> f64 {
    let sd = (1.0f64 / 3.0).sqrt();
    let hi = a + 12.0 * sd;
    let n = 20_000;
    let dx = hi / n as f64;
    let f = |x: f64| {
        let z = (x - a) / sd;
        (-(-2.0 * a * x).exp_m1()).powi(3) * (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut s = f(0.0) + f(hi);
    for k in 1..n {
        s += f(k as f64 * dx) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * dx / 3.0
}

/// Same probability on the Y-Δ triangle (edge resistance 3).
pub fn triangle_joint_exact(a: f64) -> f64 {
    let p = -(-2.0 * a * a / 3.0).exp_m1();
    3.0 * p * p * (1.0 - p) + p * p * p
}

fn joint_hits(net: &Network, bc: &BoundarySpec, n: usize, seed: u64) -> Result<usize> {
    let sampler = FieldSampler::new(net, bc)?;
    let leaves = bc.boundary().to_vec();
    let hits = map_replicates(n, |r| -> Result<bool> {
        let mut s = RandomStream::new(seed, r, Lane::Field);
        let field = sampler.sample(&mut s);
        let ann = annotate_local_times(net, field, &mut s.lane(Lane::LocalTime))?;
        let labels = sign_clusters(net, &ann)?;
        Ok(leaves.iter().all(|&x| labels[x] == labels[leaves[0]]))
    });
    let mut count = 0;
    for h in hits {
        count += usize::from(h?);
    }
    Ok(count)
}

fn star_joint_suite(ctx: &mut Ctx) -> Result<()> {
    let levels = [0.4, 0.2, 0.1, 0.05];
    let mut csv = String::from("a,graph,hits,n,estimate,exact\n");
    let mut logs = [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())];
    for (k, &a) in levels.iter().enumerate() {
        let (star, sbc) = fixtures::star3(a);
        let tri = star_mesh(&star, &sbc, star.vertex("c")?)?;
        let tbc = sbc.transfer(&star, &tri)?;
        for (g, (label, net, bc, exact)) in [
            ("star", &star, &sbc, star_joint_exact(a)),
            ("triangle", &tri, &tbc, triangle_joint_exact(a)),
        ]
        .into_iter()
        .enumerate()
        {
            let hits = joint_hits(net, bc, ctx.n, ctx.sub_seed(40 + 2 * k as u64 + g as u64))?;
            let est = hits as f64 / ctx.n as f64;
            ctx.push(&format!("{label}/a={a}"), proportion_z(hits, ctx.n, exact, 4.0)?);
            let _ = writeln!(csv, "{a},{label},{hits},{},{est},{exact}", ctx.n);
            logs[g].0.push(a.ln());
            logs[g].1.push(est.ln());
        }
    }
    ctx.file("probabilities.csv", csv);
    let mut slopes = [f64::NAN; 2];
    for (g, (label, target)) in [("star", 3.0), ("triangle", 4.0)].into_iter().enumerate() {
        let (x, y) = &logs[g];
        let fit = if y.iter().all(|v| v.is_finite()) { slope_fit(x, y).ok() } else { None };
        let (slope, pass) = match fit {
            Some(f) => (f.slope, (f.slope - target).abs() <= 0.6),
            None => (f64::NAN, false),
        };
        slopes[g] = slope;
        ctx.push(
            &format!("{label}/exponent"),
            TestReport::check("", slope, pass).with_note(format!("target {target} ± 0.6")),
        );
    }
    let gap = slopes[1] - slopes[0];
    ctx.push(
        "exponent-gap",
        TestReport::check("", gap, gap >= 0.5).with_note("triangle minus star, required ≥ 0.5"),
    );
    Ok(())
}

fn levy_suite(ctx: &mut Ctx) -> Result<()> {
    let (base, bbc) = fixtures::four_terminal();
    let pq = base
        .edges()
        .iter()
        .position(|e| base.name(e.u) == "p" && base.name(e.v) == "q")
        .expect("p-q edge");
    let counts = (0..base.edges().len()).map(|k| if k == pq { 2 } else { 1 }).collect();
    let refined = refine(&base, &bbc, Subdivision::PerEdge(counts))?;
    let (net, bc) = (refined.network().clone(), refined.boundary().clone());
    let points = vec![base.vertex("p")?, base.vertex("q")?, refined.chain(pq)[1]];
    let pairs = levy_pair_samples(&net, &bc, ctx.n, ctx.sub_seed(50))?;
    let sampler = FieldSampler::new(&net, &bc)?;
    let fresh_seed = ctx.sub_seed(51);
    let fresh: Vec<Vec<f64>> = map_replicates(ctx.n, |r| sampler.sample_values(&mut RandomStream::new(fresh_seed, r, Lane::FreshField)));
    let mut csv = String::from("replicate,vertex,abs_phi,delta,phi_minus_i,neg_i\n");
    for &v in &points {
        let name = net.name(v).to_string();
        let abs_phi = pairs.left_column(v, 0);
        let dl = pairs.left_column(v, 1);
        let phi_i = pairs.right_column(v, 0);
        let neg_i = pairs.right_column(v, 1);
        ctx.push(&format!("{name}/abs-phi-vs-phi-minus-i"), ks_two_sample(&abs_phi, &phi_i)?);
        ctx.push(&format!("{name}/delta-vs-neg-i"), ks_two_sample(&dl, &neg_i)?);
        let diff: Vec<f64> = abs_phi.iter().zip(&dl).map(|(a, d)| a - d).collect();
        let fresh_v: Vec<f64> = fresh.iter().map(|f| f[v]).collect();
        ctx.push(&format!("{name}/abs-phi-minus-delta-vs-phi"), ks_two_sample(&diff, &fresh_v)?);
        for r in 0..ctx.n.min(10_000) {
            let _ = writeln!(csv, "{r},{name},{},{},{},{}", abs_phi[r], dl[r], phi_i[r], neg_i[r]);
        }
    }
    ctx.file("pairs.csv", csv);
    Ok(())
}

/// Empirical law of `R^eff(Λ_a, Ǎ)` for the discrete first-passage set on
/// the base graph.
fn discrete_resistances(net: &Network, bc: &BoundarySpec, level: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let p = bc
        .partition()
        .ok_or_else(|| Error::InvalidArgument("partition required".into()))?
        .clone();
    let sampler = FieldSampler::new(net, bc)?;
    map_replicates(n, |r| -> Result<f64> {
        let values = sampler.sample_values(&mut RandomStream::new(seed, r, Lane::Field));
        let set = discrete_fps(net, &values, &p.hat, level);
        set_resistance(net, &set, &p.check)
    })
    .into_iter()
    .collect()
}

fn fps_laplace_suite(ctx: &mut Ctx, refinement: Option<usize>) -> Result<()> {
    let level = -1.0;
    let us = [0.25, 1.0, 4.0];
    let ns: Vec<usize> = match refinement {
        Some(n) => vec![n],
        None => vec![32, 64],
    };
    let cases = [
        ("edge", fixtures::single_edge(3.0, 0.5, 0.0)),
        ("bridge5", fixtures::bridge5(0.5, 0.0)),
    ];
    let mut csv = String::from("network,refinement,u,lower,lower_se,upper,upper_se,closed_form\n");
    for (k, (label, (net, bc))) in cases.iter().enumerate() {
        for &n in &ns {
            let est = fps_laplace_estimate(net, bc, level, &us, Subdivision::Uniform(n), ctx.n, ctx.sub_seed(60 + k as u64))?;
            for e in est {
                let pos = (e.closed_form - e.upper) / (e.lower - e.upper).max(f64::MIN_POSITIVE);
                let mut rep = TestReport::check("", pos, e.covers(4.0)).with_note(format!(
                    "closed {:.6} in [{:.6}, {:.6}] ± 4·{:.2e}",
                    e.closed_form,
                    e.upper,
                    e.lower,
                    e.lower_se.max(e.upper_se)
                ));
                rep.n = e.replicates;
                ctx.push(&format!("{label}/n={n}/u={}", e.u), rep);
                let _ = writeln!(
                    csv,
                    "{label},{n},{},{},{},{},{},{}",
                    e.u, e.lower, e.lower_se, e.upper, e.upper_se, e.closed_form
                );
            }
        }
        // The discrete set on the base graph is stochastically larger than
        // Λ̃_a, so its resistance is stochastically smaller.
        let params = FpsLawParams::from_network(net, bc)?;
        let bridge = params.bridge();
        let rs = discrete_resistances(net, bc, level, ctx.n, ctx.sub_seed(70 + k as u64))?;
        let mut sorted = rs.clone();
        sorted.sort_by(f64::total_cmp);
        let nn = sorted.len() as f64;
        let mut d_minus: f64 = 0.0;
        for (i, &r) in sorted.iter().enumerate() {
            if i + 1 < sorted.len() && sorted[i + 1] == r {
                continue;
            }
            let exact = last_visit_cdf(&bridge, level, r)?;
            d_minus = d_minus.max(exact - (i + 1) as f64 / nn);
        }
        let p = (-2.0 * nn * d_minus * d_minus).exp().min(1.0);
        let mut rep = TestReport::check("", d_minus, p > 0.01).with_note(format!("one-sided p={p:.4}"));
        rep.p = Some(p);
        rep.n = sorted.len();
        ctx.push(&format!("{label}/discrete-domination"), rep);
    }
    ctx.file("estimates.csv", csv);
    Ok(())
}

fn cor34_suite(ctx: &mut Ctx, refinement: Option<usize>) -> Result<()> {
    let (net, bc) = fixtures::diamond();
    let x0 = net.vertex("x")?;
    let schedule = LevelSchedule::new(vec![-0.3, -0.8])?;
    let r0 = set_resistance(&net, &[x0], bc.boundary())?;
    let m = crate::network::harmonic_extension(&net, &bc)?[x0];
    let hmin = bc.min_value();
    let seed = ctx.sub_seed(80);
    let drop_law = |a: f64| {
        let mass = 1.0 - bm_hitting_cdf(m, a, r0).expect("valid");
        let cdf = move |t: f64| {
            if t < 0.0 {
                0.0
            } else if t >= r0 {
                1.0
            } else {
                bm_hitting_cdf(m, a, t).expect("valid")
            }
        };
        (cdf, Atom { location: r0, mass })
    };
    let ns: Vec<usize> = match refinement {
        Some(n) => vec![n],
        None => vec![8, 32, 64],
    };
    let mut distances = Vec::new();
    let mut csv = String::from("refinement,replicate,level,drop_lower,drop_upper,phi_x0,maximin\n");
    for &n in &ns {
        let rows = nested_fps(&net, &bc, &schedule, x0, Subdivision::Uniform(n), ctx.n, seed)?;
        for (li, &a) in schedule.levels().iter().enumerate() {
            let drops: Vec<f64> = rows.iter().map(|r| r.drops[li].lower).collect();
            let (cdf, atom) = drop_law(a);
            let rep = ks_one_sample(&drops, cdf, Some(atom))?;
            if li == 0 {
                distances.push((n, rep.value, rep.clone()));
            }
            if n == *ns.last().expect("nonempty") {
                ctx.push(&format!("n={n}/drop@{a}"), rep);
            }
        }
        for r in rows.iter().take(10_000) {
            for (li, &a) in schedule.levels().iter().enumerate() {
                let _ = writeln!(
                    csv,
                    "{n},{},{a},{},{},{},{}",
                    r.replicate, r.drops[li].lower, r.drops[li].upper, r.phi_x0, r.maximin
                );
            }
        }
        if n == *ns.last().expect("nonempty") {
            let phis: Vec<f64> = rows.iter().map(|r| r.phi_x0).collect();
            let sd = r0.sqrt();
            ctx.push("phi-x0", ks_one_sample(&phis, |x| normal_cdf((x - m) / sd), None)?);
            let maximin: Vec<f64> = rows.iter().map(|r| r.maximin).collect();
            let inf_cdf = |y: f64| {
                if y >= hmin {
                    1.0
                } else {
                    bm_hitting_cdf(m, y, r0).expect("valid")
                }
            };
            let mass = 1.0 - bm_hitting_cdf(m, hmin, r0)?;
            ctx.push(
                "maximin",
                ks_one_sample(&maximin, inf_cdf, Some(Atom { location: hmin, mass }))?,
            );
        }
    }
    if distances.len() == 3 {
        let (d8, d32) = (distances[0].1, distances[1].1);
        ctx.push(
            "convergence",
            TestReport::check("", d32, d32 <= d8).with_note(format!("KS distance n=8 {d8:.5}, n=32 {d32:.5}")),
        );
    }
    ctx.file("nested.csv", csv);
    Ok(())
}

/// Lattice probe: `δ²_{Â,Ǎ} / (2 R^eff)` samples and the resistance.
pub fn lattice_probe(shape: GridShape, n: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
    let (net, bc) = grid(shape)?;
    let r = grid_resistance(&net, &bc)?;
    let xs = two_set_samples(&net, &bc, n, seed)?;
    Ok((xs.iter().map(|d| d * d / (2.0 * r)).collect(), r))
}

fn lattice_suite(ctx: &mut Ctx) -> Result<()> {
    let shape = GridShape {
        rows: 40,
        cols: 80,
        periodic: false,
    };
    let (xs, r) = lattice_probe(shape, ctx.n, ctx.sub_seed(90))?;
    ctx.push("exp1", ks_one_sample(&xs, |t| if t <= 0.0 { 0.0 } else { -(-t).exp_m1() }, None)?);
    let ed = rectangle_extremal_distance(2.0, 1.0);
    ctx.push(
        "resistance-vs-ed",
        TestReport::check("", r, true).with_note(format!("diagnostic: R^eff = {r:.6}, extremal distance = {ed}")),
    );
    ctx.file("samples.csv", values_csv("replicate,scaled_delta_sq", xs.iter().enumerate().map(|(i, &x)| (i.to_string(), x))));
    Ok(())
}

/// Connected labelled graphs on `n` vertices with unit conductances.
pub fn connected_graphs(n: usize) -> Vec<Network> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut out = Vec::new();
    for mask in 1u32..(1 << pairs.len()) {
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &(u, v))| crate::network::Edge { u, v, conductance: 1.0 })
            .collect();
        if let Ok(net) = Network::new(names.clone(), edges) {
            out.push(net);
        }
    }
    out
}

/// Exhaustive simple-path optima from `source`: the smallest accumulated
/// weight and the largest bottleneck.
pub fn enumerate_paths(net: &Network, weights: &[f64], capacity: &[f64], source: usize, start: f64) -> (Vec<f64>, Vec<f64>) {
    let adj = net.incidence();
    let n = net.vertex_count();
    let mut best_sum = vec![f64::INFINITY; n];
    let mut best_neck = vec![f64::NEG_INFINITY; n];
    let mut on_path = vec![false; n];
    #[allow(clippy::too_many_arguments)]
    fn go(
        x: usize,
        sum: f64,
        neck: f64,
        net: &Network,
        adj: &[Vec<usize>],
        w: &[f64],
        cap: &[f64],
        on: &mut [bool],
        best_sum: &mut [f64],
        best_neck: &mut [f64],
    ) {
        best_sum[x] = best_sum[x].min(sum);
        best_neck[x] = best_neck[x].max(neck);
        on[x] = true;
        for &k in &adj[x] {
            let y = net.edges()[k].other(x);
            if !on[y] {
                go(y, sum + w[k], neck.min(cap[k]), net, adj, w, cap, on, best_sum, best_neck);
            }
        }
        on[x] = false;
    }
    go(source, 0.0, start, net, &adj, weights, capacity, &mut on_path, &mut best_sum, &mut best_neck);
    (best_sum, best_neck)
}

fn oracle_suite(ctx: &mut Ctx) -> Result<()> {
    let mut graphs = 0;
    let mut mismatches = 0usize;
    let mut samples = 0;
    let mut csv = String::from("vertices,graphs,samples,mismatches\n");
    for size in 2..=5 {
        let nets = connected_graphs(size);
        let mut local = 0;
        for (g, net) in nets.iter().enumerate() {
            let bc = BoundarySpec::new(net, vec![(0, 0.0)])?;
            let sampler = FieldSampler::new(net, &bc)?;
            let seed = ctx.sub_seed(100 + size as u64) ^ g as u64;
            let bad: usize = map_replicates(ctx.n, |r| -> Result<usize> {
                let mut s = RandomStream::new(seed, r, Lane::Field);
                let field = sampler.sample(&mut s);
                let lt = edge_local_times(net, &field.values, &mut s.lane(Lane::LocalTime))?;
                let mins = edge_minima(net, &field.values, &mut s.lane(Lane::Minimum))?;
                let ann = AnnotatedSample {
                    field,
                    local_times: Some(lt.clone()),
                    minima: Some(mins.clone()),
                };
                let d = delta(net, &ann, &[0])?;
                let inf = infimum_field(net, &ann, &[0])?;
                let (bs, bn) = enumerate_paths(net, &lt, &mins, 0, ann.field.values[0]);
                let mut bad = usize::from(d != bs) + usize::from(inf.itilde != bn);
                let pw = pairwise(net, &ann)?;
                for x in 1..net.vertex_count() {
                    let (sx, _) = enumerate_paths(net, &lt, &mins, x, 0.0);
                    bad += (0..net.vertex_count()).filter(|&y| pw[(x, y)] != sx[y]).count();
                }
                Ok(bad)
            })
            .into_iter()
            .sum::<Result<usize>>()?;
            local += bad;
        }
        graphs += nets.len();
        samples += nets.len() * ctx.n;
        mismatches += local;
        let _ = writeln!(csv, "{size},{},{},{local}", nets.len(), nets.len() * ctx.n);
    }
    let mut rep = TestReport::check("", mismatches as f64, mismatches == 0)
        .with_note(format!("{graphs} graphs, exact equality of δ, pairwise δ and Ĩ"));
    rep.n = samples;
    ctx.push("exhaustive", rep);
    ctx.file("summary.csv", csv);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn connected_graph_counts() {
        // OEIS A001187
        assert_eq!(connected_graphs(2).len(), 1);
        assert_eq!(connected_graphs(3).len(), 4);
        assert_eq!(connected_graphs(4).len(), 38);
        assert_eq!(connected_graphs(5).len(), 728);
    }

    #[test]
    fn bridge5_resistance() {
        let (net, _) = fixtures::bridge5(0.0, 0.0);
        let r = set_resistance(&net, &[0], &[net.vertex("xc").unwrap()]).unwrap();
        assert!((r - 3.0).abs() < 1e-12);
    }

    #[test]
    fn star_joint_exact_small_a() {
        // P ~ c a^3 on the star, ~ (4/3) a^4 on the triangle
        let r = star_joint_exact(0.01) / star_joint_exact(0.005);
        assert!((r.log2() - 3.0).abs() < 0.05, "{r}");
        let t = triangle_joint_exact(0.01) / triangle_joint_exact(0.005);
        assert!((t.log2() - 4.0).abs() < 0.01);
    }

    #[test]
    fn network_suite_passes() {
        let out = run_suite(Suite::Network, &SuiteConfig::default()).unwrap();
        for r in &out.reports {
            assert!(r.pass, "{}", r.summary());
        }
    }
}
