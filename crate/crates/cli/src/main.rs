use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gffm::fieldsim::{FieldSampler, Subdivision};
use gffm::fps::{fps_laplace_estimate, metric_ball, nested_fps, sample_fps, Bracket, Bracketed, LevelSchedule};
use gffm::lattice::{grid, rectangle_extremal_distance, GridShape};
use gffm::laws::{
    bm_hitting_cdf, bridge_min_survival, last_visit_cdf, local_time_survival, BridgeSpec, FpsLawParams, TwoSetLaw,
};
use gffm::metric::{annotate_local_times, delta, edge_minima, levy_pair_samples};
use gffm::network::{effective_kernel, green_matrix, set_resistance};
use gffm::stats::{ks_one_sample, Lane, RandomStream};
use gffm::verify::{lattice_probe, run_suite, Suite, SuiteConfig};
use gffm::{load_network, BoundarySpec, Network};

mod config;

use config::{FileConfig, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "gffm", version, about = "Metric-graph GFF: local-time metric, first-passage sets, network kernels")]
struct Cli {
    /// Base seed for all random streams.
    #[arg(long, global = true, env = "GFFM_SEED")]
    seed: Option<u64>,
    /// Worker threads for replicate parallelism.
    #[arg(long, global = true, env = "GFFM_THREADS")]
    threads: Option<usize>,
    /// TOML file with defaults for seed, threads, replicates, refinement, out_dir.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for `verify` and `lattice` outputs.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Electrical-network queries.
    #[command(subcommand)]
    Net(NetCommand),
    /// Closed-form laws.
    #[command(subcommand)]
    Law(LawCommand),
    /// Monte Carlo samples.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// First-passage sets.
    #[command(subcommand)]
    Fps(FpsCommand),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Lattice probe on a rectangle or annulus grid.
    Lattice(LatticeArgs),
}

#[derive(Args, Debug)]
struct GraphArg {
    /// Graph JSON document.
    #[arg(short, long)]
    graph: PathBuf,
}

#[derive(Args, Debug)]
struct OutputArg {
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Number of replicates.
    #[arg(short = 'n', long)]
    replicates: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum NetCommand {
    /// Effective resistance between two vertex sets.
    Reff {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, value_delimiter = ',', required = true)]
        from: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        to: Vec<String>,
    },
    /// Effective conductance kernel on a vertex set, as CSV.
    Kernel {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, value_delimiter = ',', required = true)]
        set: Vec<String>,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Green function with Dirichlet conditions on the boundary, as CSV.
    Green {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        out: OutputArg,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum LawKind {
    /// `P(L_T > x)` for the bridge local time at zero.
    LocalTime,
    /// `P(min > x)` for the bridge minimum.
    BridgeMin,
    /// `P(T_level ≤ x)` for Brownian motion from `start`.
    BmHitting,
    /// CDF of the last visit time of `level` by the bridge.
    LastVisit,
    /// `P(δ_{Â,Ǎ} > x)` on a partitioned graph.
    TwoSet,
    /// `E exp(−x C^eff(Λ_level, Ǎ))` on a partitioned graph.
    FpsLaplace,
}

#[derive(Subcommand, Debug)]
enum LawCommand {
    /// Evaluate a law on a uniform grid; CSV `x,value`.
    Eval {
        law: LawKind,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        end: f64,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        level: f64,
        /// Graph for the graph-level laws.
        #[arg(short, long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        grid_from: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        grid_to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[command(flatten)]
        out: OutputArg,
    },
}

#[derive(Subcommand, Debug)]
enum SampleCommand {
    /// Vertex values; CSV `replicate,vertex,value`.
    Field {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArg,
    },
    /// `δ(x, A)` per vertex, one row per replicate.
    Metric {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArg,
        /// Also write per-edge local times and minima, CSV `replicate,edge,L,min`.
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Lévy pairs; CSV `replicate,vertex,abs_phi,delta,phi_minus_i,neg_i`.
    Levy {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArg,
    },
}

#[derive(Args, Debug)]
struct FpsCommon {
    #[command(flatten)]
    graph: GraphArg,
    #[command(flatten)]
    run: RunArgs,
    /// Sub-edges per base edge.
    #[arg(long)]
    refine: Option<usize>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Subcommand, Debug)]
enum FpsCommand {
    /// `Λ_a` from `Â`; CSV `replicate,level,bracket,r_eff,c_eff,drop_at_x0`.
    Sample {
        #[command(flatten)]
        common: FpsCommon,
        #[arg(long, allow_hyphen_values = true)]
        level: f64,
    },
    /// Bracketed Laplace transform against the closed form.
    Laplace {
        #[command(flatten)]
        common: FpsCommon,
        #[arg(long, allow_hyphen_values = true)]
        level: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 1.0, 4.0])]
        u: Vec<f64>,
    },
    /// Nested sets from all of `A` at increasing depth.
    Nested {
        #[command(flatten)]
        common: FpsCommon,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        levels: Vec<f64>,
        #[arg(long)]
        x0: String,
    },
    /// Metric balls `B(A, ℓ)`.
    Ball {
        #[command(flatten)]
        common: FpsCommon,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long)]
        x0: String,
    },
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// One of: network, eq1, two-point, rewire, connect, star-joint, levy,
    /// fps-laplace, cor34, lattice, oracle.
    suite: String,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    refine: Option<usize>,
}

#[derive(Args, Debug)]
struct LatticeArgs {
    #[arg(long, default_value_t = 40)]
    rows: usize,
    #[arg(long, default_value_t = 80)]
    cols: usize,
    /// Wrap the rows around (annulus).
    #[arg(long)]
    periodic: bool,
    #[command(flatten)]
    run: RunArgs,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Statistical,
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<gffm::Error> for Failure {
    fn from(e: gffm::Error) -> Self {
        Failure::Usage(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Statistical) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let replicates = match &cli.command {
        Command::Sample(SampleCommand::Field { run, .. } | SampleCommand::Metric { run, .. } | SampleCommand::Levy { run, .. }) => {
            run.replicates
        }
        Command::Fps(
            FpsCommand::Sample { common, .. }
            | FpsCommand::Laplace { common, .. }
            | FpsCommand::Nested { common, .. }
            | FpsCommand::Ball { common, .. },
        ) => common.run.replicates,
        Command::Verify(v) => v.run.replicates,
        Command::Lattice(l) => l.run.replicates,
        _ => None,
    };
    let refinement = match &cli.command {
        Command::Fps(
            FpsCommand::Sample { common, .. }
            | FpsCommand::Laplace { common, .. }
            | FpsCommand::Nested { common, .. }
            | FpsCommand::Ball { common, .. },
        ) => common.refine,
        Command::Verify(v) => v.refine,
        _ => None,
    };
    let cfg = RunConfig::resolve(
        Overrides {
            seed: cli.seed,
            threads: cli.threads,
            replicates,
            refinement,
            out_dir: cli.out_dir.clone(),
        },
        file,
    )?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Net(c) => net(c),
        Command::Law(c) => law(c),
        Command::Sample(c) => sample(c, &cfg),
        Command::Fps(c) => fps(c, &cfg),
        Command::Verify(v) => verify(&v.suite, &cfg),
        Command::Lattice(l) => lattice(l, &cfg),
    }
}

fn read_graph(path: &Path) -> anyhow::Result<(Network, BoundarySpec)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading graph {}", path.display()))?;
    load_network(&text).with_context(|| format!("loading graph {}", path.display()))
}

fn emit(out: &OutputArg, text: &str) -> anyhow::Result<()> {
    match &out.output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn net(cmd: NetCommand) -> Result<(), Failure> {
    match cmd {
        NetCommand::Reff { graph, from, to } => {
            let (net, _) = read_graph(&graph.graph)?;
            let r = set_resistance(&net, &net.vertices_by_name(&from)?, &net.vertices_by_name(&to)?)?;
            println!("{r}");
        }
        NetCommand::Kernel { graph, set, out } => {
            let (net, _) = read_graph(&graph.graph)?;
            let k = effective_kernel(&net, &net.vertices_by_name(&set)?)?;
            emit(&out, &k.to_csv())?;
        }
        NetCommand::Green { graph, out } => {
            let (net, bc) = read_graph(&graph.graph)?;
            emit(&out, &green_matrix(&net, &bc)?.to_csv())?;
        }
    }
    Ok(())
}

fn law(cmd: LawCommand) -> Result<(), Failure> {
    let LawCommand::Eval {
        law,
        start,
        end,
        length,
        level,
        graph,
        grid_from,
        grid_to,
        steps,
        out,
    } = cmd;
    if steps < 2 || !(grid_to > grid_from) {
        return Err(Failure::Usage(anyhow::anyhow!("grid needs at least two steps and grid-to > grid-from")));
    }
    let loaded = graph.as_deref().map(read_graph).transpose()?;
    let needs_graph = || loaded.as_ref().ok_or_else(|| anyhow::anyhow!("this law needs --graph"));
    let bridge = || BridgeSpec::new(start, end, length);
    let eval: Box<dyn Fn(f64) -> gffm::Result<f64>> = match law {
        LawKind::LocalTime => {
            let b = bridge()?;
            Box::new(move |x| Ok(local_time_survival(&b, x)))
        }
        LawKind::BridgeMin => {
            let b = bridge()?;
            Box::new(move |x| Ok(bridge_min_survival(&b, x)))
        }
        LawKind::BmHitting => Box::new(move |x| bm_hitting_cdf(start, level, x)),
        LawKind::LastVisit => {
            let b = bridge()?;
            Box::new(move |x| last_visit_cdf(&b, level, x))
        }
        LawKind::TwoSet => {
            let (net, bc) = needs_graph()?;
            let law = TwoSetLaw::from_network(net, bc)?;
            Box::new(move |x| Ok(law.survival(x)))
        }
        LawKind::FpsLaplace => {
            let (net, bc) = needs_graph()?;
            let p = FpsLawParams::from_network(net, bc)?;
            Box::new(move |x| p.laplace(level, x))
        }
    };
    let mut csv = String::from("x,value\n");
    for k in 0..steps {
        let x = grid_from + (grid_to - grid_from) * k as f64 / (steps - 1) as f64;
        let _ = writeln!(csv, "{x},{}", eval(x)?);
    }
    emit(&out, &csv)?;
    Ok(())
}

fn sample(cmd: SampleCommand, cfg: &RunConfig) -> Result<(), Failure> {
    let n = cfg.replicates_or(1000);
    match cmd {
        SampleCommand::Field { graph, out, .. } => {
            let (net, bc) = read_graph(&graph.graph)?;
            let sampler = FieldSampler::new(&net, &bc)?;
            let mut csv = String::from("replicate,vertex,value\n");
            for r in 0..n as u64 {
                let values = sampler.sample_values(&mut RandomStream::new(cfg.seed, r, Lane::Field));
                for (v, x) in values.iter().enumerate() {
                    let _ = writeln!(csv, "{r},{},{x}", net.name(v));
                }
            }
            emit(&out, &csv)?;
        }
        SampleCommand::Metric { graph, out, edges, .. } => {
            let (net, bc) = read_graph(&graph.graph)?;
            let sampler = FieldSampler::new(&net, &bc)?;
            let mut csv = format!("replicate,{}\n", net.names().join(","));
            let mut edge_csv = String::from("replicate,edge,L,min\n");
            for r in 0..n as u64 {
                let mut s = RandomStream::new(cfg.seed, r, Lane::Field);
                let field = sampler.sample(&mut s);
                let mins = edge_minima(&net, &field.values, &mut s.lane(Lane::Minimum))?;
                let ann = annotate_local_times(&net, field, &mut s.lane(Lane::LocalTime))?;
                let d = delta(&net, &ann, bc.boundary())?;
                let row: Vec<String> = d.iter().map(f64::to_string).collect();
                let _ = writeln!(csv, "{r},{}", row.join(","));
                if edges.is_some() {
                    let lt = ann.local_times.as_deref().unwrap_or_default();
                    for (k, e) in net.edges().iter().enumerate() {
                        let _ = writeln!(edge_csv, "{r},{}~{},{},{}", net.name(e.u), net.name(e.v), lt[k], mins[k]);
                    }
                }
            }
            emit(&out, &csv)?;
            if let Some(p) = edges {
                fs::write(&p, edge_csv).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        SampleCommand::Levy { graph, out, .. } => {
            let (net, bc) = read_graph(&graph.graph)?;
            let pairs = levy_pair_samples(&net, &bc, n, cfg.seed)?;
            let mut csv = String::from("replicate,vertex,abs_phi,delta,phi_minus_i,neg_i\n");
            let nv = net.vertex_count();
            for (k, (l, r)) in pairs.left.iter().zip(&pairs.right).enumerate() {
                let _ = writeln!(csv, "{},{},{},{},{},{}", k / nv, net.name(k % nv), l[0], l[1], r[0], r[1]);
            }
            emit(&out, &csv)?;
        }
    }
    Ok(())
}

fn bracket_rows(csv: &mut String, r: u64, level: f64, reff: Option<Bracketed>, drop: Option<Bracketed>) {
    for b in [Bracket::Lower, Bracket::Upper] {
        let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let rv = reff.map(|x| x.get(b));
        let _ = writeln!(
            csv,
            "{r},{level},{},{},{},{}",
            b.as_str(),
            fmt(rv),
            fmt(rv.map(|x| 1.0 / x)),
            fmt(drop.map(|x| x.get(b)))
        );
    }
}

const FPS_HEADER: &str = "replicate,level,bracket,r_eff,c_eff,drop_at_x0\n";

fn fps(cmd: FpsCommand, cfg: &RunConfig) -> Result<(), Failure> {
    let sub = Subdivision::Uniform(cfg.refinement_or(16));
    match cmd {
        FpsCommand::Sample { common, level } => {
            let (net, bc) = read_graph(&common.graph.graph)?;
            let n = cfg.replicates_or(100);
            let mut csv = String::from(FPS_HEADER);
            for r in 0..n as u64 {
                let (_, obs) = sample_fps(&net, &bc, level, sub.clone(), cfg.seed, r)?;
                bracket_rows(&mut csv, r, level, obs.r_eff_to_check, obs.drop_at_x0);
            }
            emit(&common.out, &csv)?;
        }
        FpsCommand::Laplace { common, level, u } => {
            let (net, bc) = read_graph(&common.graph.graph)?;
            let n = cfg.replicates_or(10_000);
            let est = fps_laplace_estimate(&net, &bc, level, &u, sub, n, cfg.seed)?;
            let mut csv = String::from("u,lower,lower_se,upper,upper_se,closed_form,covers\n");
            for e in est {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    e.u,
                    e.lower,
                    e.lower_se,
                    e.upper,
                    e.upper_se,
                    e.closed_form,
                    e.covers(4.0)
                );
            }
            emit(&common.out, &csv)?;
        }
        FpsCommand::Nested { common, levels, x0 } => {
            let (net, bc) = read_graph(&common.graph.graph)?;
            let schedule = LevelSchedule::new(levels)?;
            let x = net.vertex(&x0)?;
            let rows = nested_fps(&net, &bc, &schedule, x, sub, cfg.replicates_or(1000), cfg.seed)?;
            let mut csv = String::from(FPS_HEADER);
            for row in rows {
                for (&a, d) in schedule.levels().iter().zip(&row.drops) {
                    bracket_rows(&mut csv, row.replicate, a, None, Some(*d));
                }
            }
            emit(&common.out, &csv)?;
        }
        FpsCommand::Ball { common, radii, x0 } => {
            let (net, bc) = read_graph(&common.graph.graph)?;
            let x = net.vertex(&x0)?;
            let rows = metric_ball(&net, &bc, &radii, x, sub, cfg.replicates_or(1000), cfg.seed)?;
            let mut csv = String::from("replicate,radius,bracket,r_eff,c_eff,drop_at_x0\n");
            for row in rows {
                for (&l, d) in radii.iter().zip(&row.drops) {
                    bracket_rows(&mut csv, row.replicate, l, None, Some(*d));
                }
            }
            emit(&common.out, &csv)?;
        }
    }
    Ok(())
}

fn write_outputs(dir: &Path, files: &[(String, String)]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, contents) in files {
        let p = dir.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn verify(name: &str, cfg: &RunConfig) -> Result<(), Failure> {
    let suite: Suite = name.parse()?;
    let outcome = run_suite(
        suite,
        &SuiteConfig {
            seed: cfg.seed,
            replicates: cfg.replicates,
            refinement: cfg.refinement,
        },
    )?;
    for r in &outcome.reports {
        println!("{}", r.summary());
    }
    let reports = serde_json::to_string_pretty(&outcome.reports).context("serializing reports")?;
    let mut files = vec![(format!("{}_reports.json", suite.name().replace('-', "_")), reports + "\n")];
    files.extend(outcome.data.into_iter().map(|d| (d.name, d.contents)));
    write_outputs(&cfg.out_dir, &files)?;
    if outcome.reports.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(Failure::Statistical)
    }
}

fn lattice(args: LatticeArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let shape = GridShape {
        rows: args.rows,
        cols: args.cols,
        periodic: args.periodic,
    };
    if grid(shape).is_err() {
        return Err(Failure::Usage(anyhow::anyhow!("grid {}x{} is degenerate; need at least 8x8", args.rows, args.cols)));
    }
    let (xs, r) = lattice_probe(shape, cfg.replicates_or(10_000), cfg.seed)?;
    let report = ks_one_sample(&xs, |t| if t <= 0.0 { 0.0 } else { -(-t).exp_m1() }, None)?
        .named("lattice/exp1")
        .with_seed(cfg.seed)
        .with_note(format!(
            "R^eff = {r:.6}, rectangle extremal distance = {}",
            rectangle_extremal_distance((args.cols - 1) as f64, (args.rows - 1) as f64)
        ));
    println!("{}", report.summary());
    println!("R^eff = {r}");
    let mut csv = String::from("replicate,scaled_delta_sq\n");
    for (i, x) in xs.iter().enumerate() {
        let _ = writeln!(csv, "{i},{x}");
    }
    write_outputs(
        &cfg.out_dir,
        &[
            ("lattice_report.json".into(), report.to_json() + "\n"),
            ("lattice_samples.csv".into(), csv),
        ],
    )?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Statistical)
    }
}
