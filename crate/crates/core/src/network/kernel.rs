use nalgebra::DMatrix;

use super::{BoundarySpec, Edge, Network};
use crate::error::{Error, Result};
use crate::linalg::{SpdFactor, SymmetricMatrix};

/// Bare weighted edge list. Unlike [`Network`] it may be disconnected, which
/// is what erosion and set-merging produce.
#[derive(Debug, Clone)]
pub(crate) struct ConductanceGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl ConductanceGraph {
    pub fn from_network(net: &Network) -> Self {
        Self {
            n: net.vertex_count(),
            edges: net.edges().iter().map(|e| (e.u, e.v, e.conductance)).collect(),
        }
    }
}

/// Reduced Laplacian on `terminals` (Schur complement of the interior block).
pub(crate) fn schur_complement(g: &ConductanceGraph, terminals: &[usize]) -> Result<DMatrix<f64>> {
    let k = terminals.len();
    let mut tpos = vec![usize::MAX; g.n];
    for (a, &t) in terminals.iter().enumerate() {
        if tpos[t] != usize::MAX {
            return Err(Error::InvalidArgument("repeated terminal".into()));
        }
        tpos[t] = a;
    }
    let mut ipos = vec![usize::MAX; g.n];
    let mut ni = 0;
    for v in 0..g.n {
        if tpos[v] == usize::MAX {
            ipos[v] = ni;
            ni += 1;
        }
    }

    let mut lff = DMatrix::<f64>::zeros(k, k);
    let mut lii = SymmetricMatrix::new(ni);
    let mut lif: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for &(u, v, c) in &g.edges {
        match (tpos[u], tpos[v]) {
            (a, b) if a != usize::MAX && b != usize::MAX => {
                lff[(a, a)] += c;
                lff[(b, b)] += c;
                lff[(a, b)] -= c;
                lff[(b, a)] -= c;
            }
            (a, usize::MAX) if a != usize::MAX => {
                lff[(a, a)] += c;
                lii.add_diag(ipos[v], c);
                lif[a].push((ipos[v], -c));
            }
            (usize::MAX, b) if b != usize::MAX => {
                lff[(b, b)] += c;
                lii.add_diag(ipos[u], c);
                lif[b].push((ipos[u], -c));
            }
            _ => {
                lii.add_diag(ipos[u], c);
                lii.add_diag(ipos[v], c);
                lii.add_off(ipos[u], ipos[v], -c);
            }
        }
    }
    if ni == 0 {
        return Ok(lff);
    }
    let factor = SpdFactor::new(&lii).map_err(|e| Error::Singular(e.to_string()))?;
    let mut rhs = vec![0.0; ni];
    for b in 0..k {
        if lif[b].is_empty() {
            continue;
        }
        rhs.iter_mut().for_each(|x| *x = 0.0);
        for &(i, val) in &lif[b] {
            rhs[i] += val;
        }
        factor.solve_in_place(&mut rhs);
        for a in 0..k {
            let s: f64 = lif[a].iter().map(|&(i, val)| val * rhs[i]).sum();
            lff[(a, b)] -= s;
        }
    }
    let sym = (&lff + lff.transpose()) * 0.5;
    Ok(sym)
}

/// Effective conductance matrix on an ordered point set: symmetric,
/// zero diagonal, nonnegative off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub points: Vec<String>,
    pub entries: DMatrix<f64>,
}

impl KernelMatrix {
    fn from_reduced_laplacian(points: Vec<String>, reduced: &DMatrix<f64>) -> Self {
        let k = points.len();
        let mut entries = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    entries[(a, b)] = 0.0 - reduced[(a, b)];
                }
            }
        }
        Self { points, entries }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[(a, b)]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.points.iter().position(|p| p == name)
    }

    /// `diag(row sums) - C`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let k = self.len();
        let mut l = -self.entries.clone();
        for a in 0..k {
            l[(a, a)] = self.entries.row(a).sum();
        }
        l
    }

    /// Treats the kernel as a complete network and reduces it onto the
    /// given positions.
    pub fn reduce_onto(&self, keep: &[usize]) -> Result<KernelMatrix> {
        let k = self.len();
        let mut edges = Vec::new();
        for a in 0..k {
            for b in (a + 1)..k {
                let c = self.entries[(a, b)];
                if c > 0.0 {
                    edges.push((a, b, c));
                }
            }
        }
        let g = ConductanceGraph { n: k, edges };
        let reduced = schur_complement(&g, keep)?;
        let points = keep.iter().map(|&a| self.points[a].clone()).collect();
        Ok(Self::from_reduced_laplacian(points, &reduced))
    }

    /// CSV with a header row of point ids.
    pub fn to_csv(&self) -> String {
        matrix_csv(&self.points, &self.entries)
    }
}

pub(crate) fn matrix_csv(ids: &[String], m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    out.push_str(&ids.join(","));
    out.push('\n');
    for a in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|b| format!("{}", m[(a, b)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Green function of the walk killed on the boundary, on interior vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenMatrix {
    pub interior: Vec<usize>,
    pub names: Vec<String>,
    pub entries: DMatrix<f64>,
}

impl GreenMatrix {
    pub fn position(&self, v: usize) -> Option<usize> {
        self.interior.iter().position(|&w| w == v)
    }

    pub fn to_csv(&self) -> String {
        matrix_csv(&self.names, &self.entries)
    }
}

pub fn effective_kernel(net: &Network, points: &[usize]) -> Result<KernelMatrix> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("kernel needs at least two points".into()));
    }
    if points.iter().any(|&v| v >= net.vertex_count()) {
        return Err(Error::InvalidArgument("kernel point out of range".into()));
    }
    let reduced = schur_complement(&net.conductance_graph(), points)?;
    let names = points.iter().map(|&v| net.name(v).to_string()).collect();
    Ok(KernelMatrix::from_reduced_laplacian(names, &reduced))
}

pub fn two_point_resistance(net: &Network, x: usize, y: usize) -> Result<f64> {
    if x == y {
        return Err(Error::InvalidArgument("resistance needs two distinct vertices".into()));
    }
    let k = effective_kernel(net, &[x, y])?;
    Ok(1.0 / k.get(0, 1))
}

/// Removes the interior vertex `v`, replacing its star by the complete
/// graph on its neighbors with conductances `C_i C_j / ΣC`.
pub fn star_mesh(net: &Network, bc: &BoundarySpec, v: usize) -> Result<Network> {
    if v >= net.vertex_count() {
        return Err(Error::InvalidArgument("vertex out of range".into()));
    }
    if bc.is_boundary(v) {
        return Err(Error::InvalidArgument(format!(
            "cannot eliminate boundary vertex `{}`",
            net.name(v)
        )));
    }
    let remap = |w: usize| if w < v { w } else { w - 1 };
    let names: Vec<String> = net
        .names()
        .iter()
        .enumerate()
        .filter(|&(w, _)| w != v)
        .map(|(_, n)| n.clone())
        .collect();

    let mut legs: Vec<(usize, f64)> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    for e in net.edges() {
        if e.touches(v) {
            let w = remap(e.other(v));
            match legs.iter_mut().find(|(x, _)| *x == w) {
                Some(leg) => leg.1 += e.conductance,
                None => legs.push((w, e.conductance)),
            }
        } else {
            edges.push(Edge {
                u: remap(e.u),
                v: remap(e.v),
                conductance: e.conductance,
            });
        }
    }
    let total: f64 = legs.iter().map(|l| l.1).sum();
    for a in 0..legs.len() {
        for b in (a + 1)..legs.len() {
            let (i, ci) = legs[a];
            let (j, cj) = legs[b];
            let c = ci * cj / total;
            match edges
                .iter_mut()
                .find(|e| (e.u == i && e.v == j) || (e.u == j && e.v == i))
            {
                Some(e) => e.conductance += c,
                None => edges.push(Edge { u: i, v: j, conductance: c }),
            }
        }
    }
    Network::new(names, edges)
}

/// Harmonic extension of the boundary values, indexed by vertex.
pub fn harmonic_extension(net: &Network, bc: &BoundarySpec) -> Result<Vec<f64>> {
    let interior = bc.interior();
    let mut out = vec![0.0; net.vertex_count()];
    for (&v, &h) in bc.boundary().iter().zip(bc.values()) {
        out[v] = h;
    }
    if interior.is_empty() {
        return Ok(out);
    }
    let (factor, ipos) = dirichlet_factor(net, bc, &interior)?;
    let mut rhs = vec![0.0; interior.len()];
    for e in net.edges() {
        match (ipos[e.u], ipos[e.v]) {
            (usize::MAX, i) if i != usize::MAX => rhs[i] += e.conductance * out[e.u],
            (i, usize::MAX) if i != usize::MAX => rhs[i] += e.conductance * out[e.v],
            _ => {}
        }
    }
    factor.solve_in_place(&mut rhs);
    for (k, &v) in interior.iter().enumerate() {
        out[v] = rhs[k];
    }
    Ok(out)
}

/// Factor of the interior (Dirichlet) block of the Laplacian and the
/// vertex → interior position map (`usize::MAX` on the boundary).
pub(crate) fn dirichlet_factor(
    net: &Network,
    bc: &BoundarySpec,
    interior: &[usize],
) -> Result<(SpdFactor, Vec<usize>)> {
    let mut ipos = vec![usize::MAX; net.vertex_count()];
    for (k, &v) in interior.iter().enumerate() {
        ipos[v] = k;
    }
    debug_assert!(interior.iter().all(|&v| !bc.is_boundary(v)));
    let mut m = SymmetricMatrix::new(interior.len());
    for e in net.edges() {
        let (a, b) = (ipos[e.u], ipos[e.v]);
        if a != usize::MAX {
            m.add_diag(a, e.conductance);
        }
        if b != usize::MAX {
            m.add_diag(b, e.conductance);
        }
        if a != usize::MAX && b != usize::MAX {
            m.add_off(a, b, -e.conductance);
        }
    }
    let f = SpdFactor::new(&m).map_err(|e| Error::Singular(e.to_string()))?;
    Ok((f, ipos))
}

pub fn green_matrix(net: &Network, bc: &BoundarySpec) -> Result<GreenMatrix> {
    let interior = bc.interior();
    if interior.is_empty() {
        return Err(Error::InvalidArgument("no interior vertices".into()));
    }
    let (factor, _) = dirichlet_factor(net, bc, &interior)?;
    let n = interior.len();
    let mut entries = DMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|x| *x = 0.0);
        col[j] = 1.0;
        factor.solve_in_place(&mut col);
        for i in 0..n {
            entries[(i, j)] = col[i];
        }
    }
    let entries = (&entries + entries.transpose()) * 0.5;
    let names = interior.iter().map(|&v| net.name(v).to_string()).collect();
    Ok(GreenMatrix {
        interior,
        names,
        entries,
    })
}

/// Effective resistance between two vertex sets (each shorted internally).
/// Zero when the sets intersect.
pub fn set_resistance(net: &Network, from: &[usize], to: &[usize]) -> Result<f64> {
    set_resistance_graph(&net.conductance_graph(), from, to)
}

pub(crate) fn set_resistance_graph(g: &ConductanceGraph, from: &[usize], to: &[usize]) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::InvalidArgument("empty terminal set".into()));
    }
    // 0 free, 1 source (potential 1), 2 sink (potential 0)
    let mut role = vec![0u8; g.n];
    for &v in from {
        role[v] = 1;
    }
    for &v in to {
        if role[v] == 1 {
            return Ok(0.0);
        }
        role[v] = 2;
    }
    let mut fpos = vec![usize::MAX; g.n];
    let mut nf = 0;
    for v in 0..g.n {
        if role[v] == 0 {
            fpos[v] = nf;
            nf += 1;
        }
    }
    let mut direct = 0.0;
    let mut m = SymmetricMatrix::new(nf);
    let mut rhs = vec![0.0; nf];
    let mut source_links: Vec<(usize, f64)> = Vec::new();
    for &(u, v, c) in &g.edges {
        match (role[u], role[v]) {
            (0, 0) => {
                m.add_diag(fpos[u], c);
                m.add_diag(fpos[v], c);
                m.add_off(fpos[u], fpos[v], -c);
            }
            (0, r) | (r, 0) => {
                let w = if role[u] == 0 { u } else { v };
                m.add_diag(fpos[w], c);
                if r == 1 {
                    rhs[fpos[w]] += c;
                    source_links.push((fpos[w], c));
                }
            }
            (1, 2) | (2, 1) => direct += c,
            _ => {}
        }
    }
    let mut current = direct;
    if !source_links.is_empty() {
        // Free components touching neither terminal would make the block
        // singular; restrict to vertices reachable from the source links.
        let keep = reachable_free(g, &role, &fpos, &source_links, nf);
        let (sub, sub_rhs, map) = restrict(&m, &rhs, &keep);
        let factor = SpdFactor::new(&sub).map_err(|e| Error::Singular(e.to_string()))?;
        let x = factor.solve(&sub_rhs);
        for &(i, c) in &source_links {
            current += c * (1.0 - x[map[i]]);
        }
    }
    if current <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / current)
}

fn reachable_free(
    g: &ConductanceGraph,
    role: &[u8],
    fpos: &[usize],
    seeds: &[(usize, f64)],
    nf: usize,
) -> Vec<bool> {
    let mut adj = vec![Vec::new(); nf];
    for &(u, v, _) in &g.edges {
        if role[u] == 0 && role[v] == 0 {
            adj[fpos[u]].push(fpos[v]);
            adj[fpos[v]].push(fpos[u]);
        }
    }
    let mut keep = vec![false; nf];
    let mut stack: Vec<usize> = seeds.iter().map(|s| s.0).collect();
    while let Some(i) = stack.pop() {
        if keep[i] {
            continue;
        }
        keep[i] = true;
        stack.extend(adj[i].iter().copied().filter(|&j| !keep[j]));
    }
    keep
}

fn restrict(m: &SymmetricMatrix, rhs: &[f64], keep: &[bool]) -> (SymmetricMatrix, Vec<f64>, Vec<usize>) {
    if keep.iter().all(|&k| k) {
        let map = (0..keep.len()).collect();
        return (m.clone(), rhs.to_vec(), map);
    }
    let mut map = vec![usize::MAX; keep.len()];
    let mut n = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            map[i] = n;
            n += 1;
        }
    }
    let dense_diag = m.diag_entries();
    let mut sub = SymmetricMatrix::new(n);
    for (i, &d) in dense_diag.iter().enumerate() {
        if keep[i] {
            sub.add_diag(map[i], d);
        }
    }
    for &(i, j, v) in m.off_entries() {
        if keep[i] && keep[j] {
            sub.add_off(map[i], map[j], v);
        }
    }
    let sub_rhs = (0..keep.len()).filter(|&i| keep[i]).map(|i| rhs[i]).collect();
    (sub, sub_rhs, map)
}

/// Erosion of a boundary-adjacent edge by `depth` from its boundary end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Erosion {
    pub edge: usize,
    pub depth: f64,
}

struct ErodedSystem {
    /// Kernel on `A ∪ B`, boundary first, then the eroded points.
    kernel: DMatrix<f64>,
    boundary_len: usize,
}

fn erode(net: &Network, bc: &BoundarySpec, erosions: &[Erosion]) -> Result<ErodedSystem> {
    let n = net.vertex_count();
    let mut used = vec![false; net.edges().len()];
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(net.edges().len());
    let mut extra = Vec::with_capacity(erosions.len());
    for er in erosions {
        let e = net
            .edges()
            .get(er.edge)
            .ok_or_else(|| Error::InvalidArgument("erosion edge out of range".into()))?;
        if used[er.edge] {
            return Err(Error::InvalidArgument("edge eroded twice".into()));
        }
        used[er.edge] = true;
        let (bu, bv) = (bc.is_boundary(e.u), bc.is_boundary(e.v));
        let far = match (bu, bv) {
            (true, false) => e.v,
            (false, true) => e.u,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "edge {}-{} does not join the boundary to the interior",
                    net.name(e.u),
                    net.name(e.v)
                )))
            }
        };
        let r = e.resistance();
        if !(er.depth >= 0.0 && er.depth < r) {
            return Err(Error::InvalidArgument(format!(
                "erosion depth {} outside [0, {r})",
                er.depth
            )));
        }
        extra.push((far, 1.0 / (r - er.depth)));
    }
    for (k, e) in net.edges().iter().enumerate() {
        if !used[k] {
            edges.push((e.u, e.v, e.conductance));
        }
    }
    let mut terminals: Vec<usize> = bc.boundary().to_vec();
    for (k, &(far, c)) in extra.iter().enumerate() {
        let z = n + k;
        edges.push((z, far, c));
        terminals.push(z);
    }
    let g = ConductanceGraph {
        n: n + extra.len(),
        edges,
    };
    let reduced = schur_complement(&g, &terminals)?;
    let k = terminals.len();
    let mut kernel = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            if a != b {
                kernel[(a, b)] = -reduced[(a, b)];
            }
        }
    }
    Ok(ErodedSystem {
        kernel,
        boundary_len: bc.boundary().len(),
    })
}

/// Kernel on the eroded points `z_i`, i.e. `C^eff_{A∪B}(z_i, z_j)`.
pub fn eroded_kernel(net: &Network, bc: &BoundarySpec, erosions: &[Erosion]) -> Result<KernelMatrix> {
    let sys = erode(net, bc, erosions)?;
    let nb = erosions.len();
    let off = sys.boundary_len;
    let entries = DMatrix::from_fn(nb, nb, |a, b| sys.kernel[(off + a, off + b)]);
    let points = erosions
        .iter()
        .map(|er| {
            let e = net.edges()[er.edge];
            format!("{}~{}@{}", net.name(e.u), net.name(e.v), er.depth)
        })
        .collect();
    Ok(KernelMatrix { points, entries })
}


/// Kernel on `A ∪ B` of the erased network (segments `[x_i, z_i]`
/// removed): boundary points first (in boundary
/// order), then the eroded points.
pub fn eroded_full_kernel(net: &Network, bc: &BoundarySpec, erosions: &[Erosion]) -> Result<KernelMatrix> {
    let sys = erode(net, bc, erosions)?;
    let mut points: Vec<String> = bc.boundary().iter().map(|&v| net.name(v).to_string()).collect();
    points.extend(erosions.iter().map(|er| {
        let e = net.edges()[er.edge];
        format!("{}~{}@{}", net.name(e.u), net.name(e.v), er.depth)
    }));
    Ok(KernelMatrix {
        points,
        entries: sys.kernel,
    })
}
/// Which entry's derivative in `r_i` is being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HadamardTarget {
    /// `∂ C_ij = C_ij Σ_{t≠i} C_it`
    Row(usize),
    /// `∂ C_jj' = -C_ij C_ij'`
    Remote(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HadamardIdentity {
    Row,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HadamardResidual {
    pub identity: HadamardIdentity,
    pub i: usize,
    pub target: HadamardTarget,
    pub step: f64,
    pub finite_difference: f64,
    pub closed_form: f64,
    pub relative_error: f64,
    /// Residual at `step` divided by residual at `step / 2`; ≈ 4 for a
    /// second-order central difference.
    pub convergence_ratio: f64,
    pub second_order: bool,
}

fn kernel_at(net: &Network, bc: &BoundarySpec, erosions: &[Erosion]) -> Result<ErodedSystem> {
    erode(net, bc, erosions)
}

/// Central-difference check of one variational identity with the default
/// step `1e-4 · min R(e_k)`.
pub fn hadamard_check(
    net: &Network,
    bc: &BoundarySpec,
    erosions: &[Erosion],
    i: usize,
    target: HadamardTarget,
) -> Result<HadamardResidual> {
    let min_r = erosions
        .iter()
        .map(|er| net.edges()[er.edge].resistance())
        .fold(f64::INFINITY, f64::min);
    hadamard_check_with_step(net, bc, erosions, i, target, 1e-4 * min_r)
}

pub fn hadamard_check_with_step(
    net: &Network,
    bc: &BoundarySpec,
    erosions: &[Erosion],
    i: usize,
    target: HadamardTarget,
    step: f64,
) -> Result<HadamardResidual> {
    let nb = erosions.len();
    let valid = |j: usize| j < nb && j != i;
    let identity = match target {
        HadamardTarget::Row(j) if valid(j) => HadamardIdentity::Row,
        HadamardTarget::Remote(j, k) if valid(j) && valid(k) && j != k => HadamardIdentity::Remote,
        _ => return Err(Error::InvalidArgument("invalid Hadamard target".into())),
    };
    let r = erosions[i].depth;
    let len = net.edges()[erosions[i].edge].resistance();
    if r - step < 0.0 || r + step >= len || step <= 0.0 {
        return Err(Error::StepUnderflow(format!(
            "step {step} does not fit around r = {r} in [0, {len})"
        )));
    }

    let base = kernel_at(net, bc, erosions)?;
    let off = base.boundary_len;
    let zi = off + i;
    let entry = |sys: &ErodedSystem| match target {
        HadamardTarget::Row(j) => sys.kernel[(zi, off + j)],
        HadamardTarget::Remote(j, k) => sys.kernel[(off + j, off + k)],
    };
    let closed_form = match target {
        HadamardTarget::Row(j) => {
            let row_sum: f64 = base.kernel.row(zi).sum();
            base.kernel[(zi, off + j)] * row_sum
        }
        HadamardTarget::Remote(j, k) => -base.kernel[(zi, off + j)] * base.kernel[(zi, off + k)],
    };

    let central = |h: f64| -> Result<f64> {
        let mut plus = erosions.to_vec();
        let mut minus = erosions.to_vec();
        plus[i].depth = r + h;
        minus[i].depth = r - h;
        let fp = entry(&kernel_at(net, bc, &plus)?);
        let fm = entry(&kernel_at(net, bc, &minus)?);
        Ok((fp - fm) / (2.0 * h))
    };
    let fd = central(step)?;
    let fd_half = central(0.5 * step)?;
    let scale = closed_form.abs();
    let err = |x: f64| {
        if scale > 0.0 {
            (x - closed_form).abs() / scale
        } else {
            (x - closed_form).abs()
        }
    };
    let relative_error = err(fd);
    let half_error = err(fd_half);
    let convergence_ratio = relative_error / half_error;
    Ok(HadamardResidual {
        identity,
        i,
        target,
        step,
        finite_difference: fd,
        closed_form,
        relative_error,
        convergence_ratio,
        second_order: (3.0..=5.0).contains(&convergence_ratio),
    })
}

/// Every applicable identity for index `i`; empty with a single erosion.
pub fn hadamard_all(
    net: &Network,
    bc: &BoundarySpec,
    erosions: &[Erosion],
    i: usize,
) -> Result<Vec<HadamardResidual>> {
    let nb = erosions.len();
    if i >= nb {
        return Err(Error::InvalidArgument("erosion index out of range".into()));
    }
    let others: Vec<usize> = (0..nb).filter(|&j| j != i).collect();
    let mut out = Vec::new();
    for &j in &others {
        out.push(hadamard_check(net, bc, erosions, i, HadamardTarget::Row(j))?);
    }
    for (a, &j) in others.iter().enumerate() {
        for &k in &others[a + 1..] {
            out.push(hadamard_check(net, bc, erosions, i, HadamardTarget::Remote(j, k))?);
        }
    }
    Ok(out)
}

/// Kernel-weighted mean of `h` over the hat block.
pub fn boundary_mean(net: &Network, bc: &BoundarySpec) -> Result<f64> {
    let p = bc
        .partition()
        .ok_or_else(|| Error::InvalidArgument("partition required".into()))?;
    let kernel = effective_kernel(net, bc.boundary())?;
    let pos = |v: usize| bc.boundary().iter().position(|&w| w == v).unwrap_or(usize::MAX);
    let mut total = 0.0;
    let mut weighted = 0.0;
    for &x in &p.hat {
        for &y in &p.check {
            let c = kernel.get(pos(x), pos(y));
            total += c;
            weighted += c * bc.value(x).unwrap_or(0.0);
        }
    }
    if total <= 0.0 {
        return Err(Error::Degenerate("hat and check blocks are not connected".into()));
    }
    Ok(weighted / total)
}

/// Total kernel mass between the two partition blocks, `C^eff(Â, Ǎ)`.
pub fn cross_conductance_of(kernel: &KernelMatrix, bc: &BoundarySpec) -> f64 {
    let p = bc.partition().expect("partition");
    let pos = |v: usize| bc.boundary().iter().position(|&w| w == v).unwrap();
    p.hat
        .iter()
        .flat_map(|&x| p.check.iter().map(move |&y| (x, y)))
        .map(|(x, y)| kernel.get(pos(x), pos(y)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn path3() -> Network {
        Network::from_edges(&[("a", "b", 1.0), ("b", "c", 1.0)]).unwrap()
    }

    fn star3() -> Network {
        Network::from_edges(&[("x1", "y", 1.0), ("x2", "y", 1.0), ("x3", "y", 1.0)]).unwrap()
    }

    #[test]
    fn series_path_kernel() {
        let net = path3();
        let k = effective_kernel(&net, &[0, 2]).unwrap();
        assert!((k.get(0, 1) - 0.5).abs() < 1e-14);
        assert_eq!(k.get(0, 0), 0.0);
    }

    #[test]
    fn star_leaves_kernel_is_one_third() {
        // Oracle: Schur complement of the 4x4 star Laplacian by hand:
        // L_FF = I, L_FI = -1 (column), L_II = 3 → L_FF - (1/3) J.
        let net = star3();
        let k = effective_kernel(&net, &[0, 2, 3]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 0.0 } else { 1.0 / 3.0 };
                assert!((k.get(a, b) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn square_with_diagonal_matches_dense_potential_solve() {
        let net = Network::from_edges(&[
            ("a", "b", 1.0),
            ("b", "c", 1.0),
            ("c", "d", 1.0),
            ("d", "a", 1.0),
            ("a", "c", 1.0),
        ])
        .unwrap();
        let k = effective_kernel(&net, &[0, 2]).unwrap();
        // Oracle: ground d, inject +1 at a and -1 at c, read potential drop.
        let full = laplacian_dense(&net);
        let keep = [0usize, 1, 2];
        let l = DMatrix::from_fn(3, 3, |i, j| full[(keep[i], keep[j])]);
        let rhs = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let u = l.lu().solve(&rhs).unwrap();
        let r = u[0] - u[2];
        assert!((k.get(0, 1) - 1.0 / r).abs() < 1e-12);
        assert!((k.get(0, 1) - 2.0).abs() < 1e-12);
    }

    fn laplacian_dense(net: &Network) -> DMatrix<f64> {
        let n = net.vertex_count();
        let mut l = DMatrix::zeros(n, n);
        for e in net.edges() {
            l[(e.u, e.u)] += e.conductance;
            l[(e.v, e.v)] += e.conductance;
            l[(e.u, e.v)] -= e.conductance;
            l[(e.v, e.u)] -= e.conductance;
        }
        l
    }

    #[test]
    fn two_point_laws() {
        let series = Network::from_edges(&[("a", "m", 1.0), ("m", "b", 0.5)]).unwrap();
        assert!((two_point_resistance(&series, 0, 2).unwrap() - 3.0).abs() < 1e-14);
        let parallel = Network::from_edges(&[("a", "b", 1.0), ("a", "b", 1.0)]).unwrap();
        assert!((two_point_resistance(&parallel, 0, 1).unwrap() - 0.5).abs() < 1e-14);
        let tri = Network::from_edges(&[("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0)]).unwrap();
        assert!((two_point_resistance(&tri, 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert!(two_point_resistance(&tri, 1, 1).is_err());
    }

    #[test]
    fn star_mesh_of_star_is_one_third_triangle() {
        let net = star3();
        let bc = BoundarySpec::from_names(&net, &[("x1", 0.0), ("x2", 0.0), ("x3", 0.0)]).unwrap();
        let tri = star_mesh(&net, &bc, net.vertex("y").unwrap()).unwrap();
        assert_eq!(tri.vertex_count(), 3);
        assert_eq!(tri.edges().len(), 3);
        for e in tri.edges() {
            assert!((e.conductance - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn star_mesh_pendant_vertex_is_deleted() {
        let net = Network::from_edges(&[("a", "b", 1.0), ("b", "p", 2.0)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.0), ("b", 1.0)]).unwrap();
        let out = star_mesh(&net, &bc, net.vertex("p").unwrap()).unwrap();
        assert_eq!(out.vertex_count(), 2);
        assert_eq!(out.edges().len(), 1);
        assert!(star_mesh(&net, &bc, 0).is_err());
    }

    #[test]
    fn star_mesh_merges_parallel_edges() {
        let net = Network::from_edges(&[("a", "y", 1.0), ("b", "y", 1.0), ("a", "b", 2.0)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.0), ("b", 0.0)]).unwrap();
        let out = star_mesh(&net, &bc, net.vertex("y").unwrap()).unwrap();
        assert_eq!(out.edges().len(), 1);
        assert!((out.edges()[0].conductance - 2.5).abs() < 1e-15);
    }

    #[test]
    fn harmonic_extension_cases() {
        let net = Network::from_edges(&[("a", "v", 1.0), ("v", "b", 1.0)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.0), ("b", 1.0)]).unwrap();
        let u = harmonic_extension(&net, &bc).unwrap();
        assert!((u[1] - 0.5).abs() < 1e-15);

        let bc = BoundarySpec::from_names(&net, &[("a", 2.5), ("b", 2.5)]).unwrap();
        let u = harmonic_extension(&net, &bc).unwrap();
        assert!(u.iter().all(|x| (x - 2.5).abs() < 1e-14));
    }

    #[test]
    fn green_bridge_variance() {
        // Edge of total resistance T = 3 split at r = 1 from one end.
        let net = Network::from_edges(&[("a", "v", 1.0), ("v", "b", 0.5)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.0), ("b", 0.0)]).unwrap();
        let g = green_matrix(&net, &bc).unwrap();
        assert!((g.entries[(0, 0)] - 1.0 * 2.0 / 3.0).abs() < 1e-14);
        let none = BoundarySpec::from_names(&net, &[("a", 0.0), ("b", 0.0), ("v", 0.0)]).unwrap();
        assert!(green_matrix(&net, &none).is_err());
    }

    #[test]
    fn green_symmetric_pair() {
        let net = Network::from_edges(&[
            ("a", "x", 1.0),
            ("x", "y", 1.0),
            ("y", "b", 1.0),
            ("x", "c", 2.0),
            ("y", "c", 2.0),
        ])
        .unwrap();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.0), ("b", 0.0)]).unwrap();
        let g = green_matrix(&net, &bc).unwrap();
        let x = g.position(net.vertex("x").unwrap()).unwrap();
        let y = g.position(net.vertex("y").unwrap()).unwrap();
        assert!((g.entries[(x, x)] - g.entries[(y, y)]).abs() < 1e-13);
    }

    #[test]
    fn set_resistance_matches_two_point() {
        let net = Network::from_edges(&[
            ("a", "b", 1.0),
            ("b", "c", 2.0),
            ("c", "a", 0.5),
            ("c", "d", 1.0),
        ])
        .unwrap();
        let r = set_resistance(&net, &[0], &[3]).unwrap();
        let r2 = two_point_resistance(&net, 0, 3).unwrap();
        assert!((r - r2).abs() < 1e-13);
        assert_eq!(set_resistance(&net, &[0, 1], &[1]).unwrap(), 0.0);
    }

    #[test]
    fn set_resistance_ignores_dangling_free_component() {
        // d hangs off the source set only; it carries no current.
        let g = ConductanceGraph {
            n: 4,
            edges: vec![(0, 1, 1.0), (1, 2, 1.0), (0, 3, 1.0)],
        };
        let r = set_resistance_graph(&g, &[0], &[2]).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_edge_erosion_is_series() {
        let net = Network::from_edges(&[("xh", "v", 2.0), ("v", "xc", 2.0)]).unwrap();
        let bc = BoundarySpec::from_names(&net, &[("xh", 0.0), ("xc", 0.0)]).unwrap();
        let r = 0.2;
        let k = eroded_kernel(
            &net,
            &bc,
            &[Erosion { edge: 0, depth: r }, Erosion { edge: 1, depth: 0.0 }],
        )
        .unwrap();
        assert!((k.get(0, 1) - 1.0 / (1.0 - r)).abs() < 1e-13);
    }

    #[test]
    fn erosion_errors() {
        let net = path3();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.0), ("c", 0.0)]).unwrap();
        assert!(eroded_kernel(&net, &bc, &[Erosion { edge: 0, depth: 1.0 }]).is_err());
        assert!(eroded_kernel(&net, &bc, &[Erosion { edge: 0, depth: -0.1 }]).is_err());
        let bc2 = BoundarySpec::from_names(&net, &[("a", 0.0), ("b", 0.0)]).unwrap();
        assert!(eroded_kernel(&net, &bc2, &[Erosion { edge: 0, depth: 0.1 }]).is_err());
    }

    #[test]
    fn hadamard_single_erosion_is_empty() {
        let net = path3();
        let bc = BoundarySpec::from_names(&net, &[("a", 0.0), ("c", 0.0)]).unwrap();
        let r = hadamard_all(&net, &bc, &[Erosion { edge: 0, depth: 0.3 }], 0).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn hadamard_step_underflow() {
        let net = star3();
        let bc = BoundarySpec::from_names(&net, &[("x1", 0.0), ("x2", 0.0), ("x3", 0.0)]).unwrap();
        let er: Vec<_> = (0..3).map(|k| Erosion { edge: k, depth: 0.0 }).collect();
        let e = hadamard_check(&net, &bc, &er, 0, HadamardTarget::Row(1)).unwrap_err();
        assert!(matches!(e, Error::StepUnderflow(_)));
    }

    #[test]
    fn boundary_mean_cases() {
        let net = star3();
        let bc = BoundarySpec::from_names(&net, &[("x1", 0.0), ("x2", 1.0), ("x3", 5.0)])
            .unwrap()
            .with_partition_names(&net, &["x1", "x2"], &["x3"])
            .unwrap();
        assert!((boundary_mean(&net, &bc).unwrap() - 0.5).abs() < 1e-14);
        let c = bc.with_values(vec![0.7, 0.7, -2.0]).unwrap();
        assert!((boundary_mean(&net, &c).unwrap() - 0.7).abs() < 1e-14);
    }
}
