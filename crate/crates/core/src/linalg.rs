//! Symmetric positive-definite factorizations for Laplacian blocks.
//!
//! Two backends share one interface: a dense Cholesky (nalgebra) for small
//! systems and an envelope (profile) Cholesky under a reverse Cuthill-McKee
//! ordering for everything else. Graph Laplacian blocks of refined metric
//! graphs and lattices have small envelopes, so the envelope path is what
//! makes per-replicate solves affordable.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sparse symmetric matrix in coordinate form. Off-diagonal entries are
/// stored once per unordered pair; duplicates are summed on assembly.
#[derive(Debug, Clone)]
pub struct SymmetricMatrix {
    dim: usize,
    diag: Vec<f64>,
    off: Vec<(usize, usize, f64)>,
}

impl SymmetricMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            diag: vec![0.0; dim],
            off: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_diag(&mut self, i: usize, value: f64) {
        self.diag[i] += value;
    }

    /// Adds `value` at (i, j) and (j, i).
    pub fn add_off(&mut self, i: usize, j: usize, value: f64) {
        debug_assert_ne!(i, j);
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.off.push((a, b, value));
    }

    pub fn diag_entries(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_entries(&self) -> &[(usize, usize, f64)] {
        &self.off
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, &d) in self.diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        for &(i, j, v) in &self.off {
            m[(i, j)] += v;
            m[(j, i)] += v;
        }
        m
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.dim];
        for &(i, j, _) in &self.off {
            adj[i].push(j);
            adj[j].push(i);
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        adj
    }
}

/// Which backend a factorization uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Dense,
    Envelope,
}

/// Cholesky factor `Q = L Lᵀ` of an SPD matrix.
#[derive(Debug, Clone)]
pub enum SpdFactor {
    Dense(DenseFactor),
    Envelope(EnvelopeFactor),
}

impl SpdFactor {
    /// Factors `m`, choosing the backend by estimated work.
    pub fn new(m: &SymmetricMatrix) -> Result<Self> {
        if m.dim() <= DENSE_ALWAYS {
            return Self::with_backend(m, Backend::Dense);
        }
        let perm = reverse_cuthill_mckee(&m.adjacency());
        let env = EnvelopeFactor::symbolic(m, perm);
        let dense_work = (m.dim() as f64).powi(3) / 3.0;
        if m.dim() > DENSE_LIMIT || env.work_estimate() < dense_work {
            Ok(Self::Envelope(env.numeric(m)?))
        } else {
            Self::with_backend(m, Backend::Dense)
        }
    }

    pub fn with_backend(m: &SymmetricMatrix, backend: Backend) -> Result<Self> {
        match backend {
            Backend::Dense => Ok(Self::Dense(DenseFactor::new(m)?)),
            Backend::Envelope => {
                let perm = reverse_cuthill_mckee(&m.adjacency());
                Ok(Self::Envelope(EnvelopeFactor::symbolic(m, perm).numeric(m)?))
            }
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            Self::Dense(_) => Backend::Dense,
            Self::Envelope(_) => Backend::Envelope,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dense(f) => f.lower.nrows(),
            Self::Envelope(f) => f.perm.len(),
        }
    }

    /// Overwrites `b` with `Q⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        match self {
            Self::Dense(f) => f.solve_in_place(b),
            Self::Envelope(f) => f.solve_in_place(b),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Overwrites i.i.d. standard normals `z` with a draw from `N(0, Q⁻¹)`.
    pub fn correlate_in_place(&self, z: &mut [f64]) {
        match self {
            Self::Dense(f) => f.correlate_in_place(z),
            Self::Envelope(f) => f.correlate_in_place(z),
        }
    }
}

/// Systems at or below this size always go dense.
const DENSE_ALWAYS: usize = 32;
/// Systems above this size never go dense.
const DENSE_LIMIT: usize = 2048;

#[derive(Debug, Clone)]
pub struct DenseFactor {
    lower: DMatrix<f64>,
}

impl DenseFactor {
    fn new(m: &SymmetricMatrix) -> Result<Self> {
        let dense = m.to_dense();
        // nalgebra reports failure without a pivot; find it for the message.
        match nalgebra::Cholesky::new(dense.clone()) {
            Some(ch) => Ok(Self { lower: ch.unpack() }),
            None => {
                let (pivot, value) = failing_pivot(&dense);
                Err(Error::NotPositiveDefinite { pivot, value })
            }
        }
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let mut v = DVector::from_column_slice(b);
        self.lower.solve_lower_triangular_mut(&mut v);
        self.lower.tr_solve_lower_triangular_mut(&mut v);
        b.copy_from_slice(v.as_slice());
    }

    fn correlate_in_place(&self, z: &mut [f64]) {
        let mut v = DVector::from_column_slice(z);
        self.lower.tr_solve_lower_triangular_mut(&mut v);
        z.copy_from_slice(v.as_slice());
    }
}

fn failing_pivot(m: &DMatrix<f64>) -> (usize, f64) {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut s = m[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s <= 0.0 || !s.is_finite() {
            return (j, s);
        }
        l[(j, j)] = s.sqrt();
        for i in (j + 1)..n {
            let mut t = m[(i, j)];
            for k in 0..j {
                t -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = t / l[(j, j)];
        }
    }
    (n, f64::NAN)
}

/// Row-oriented envelope Cholesky. Row `i` of `L` (in permuted order) is
/// stored densely from column `first[i]` through the diagonal.
#[derive(Debug, Clone)]
pub struct EnvelopeFactor {
    /// `perm[k]` is the original index placed at position `k`.
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeFactor {
    fn symbolic(m: &SymmetricMatrix, perm: Vec<usize>) -> Self {
        let n = m.dim();
        let mut inv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in &m.off {
            let (a, b) = (inv[i], inv[j]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            first[hi] = first[hi].min(lo);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for (i, &f) in first.iter().enumerate() {
            start.push(total);
            total += i - f + 1;
        }
        start.push(total);
        Self {
            perm,
            first,
            start,
            values: vec![0.0; total],
        }
    }

    fn work_estimate(&self) -> f64 {
        self.first
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let w = (i - f) as f64;
                w * w
            })
            .sum()
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.start[i]..self.start[i + 1]]
    }

    fn numeric(mut self, m: &SymmetricMatrix) -> Result<Self> {
        let n = m.dim();
        let mut inv = vec![0usize; n];
        for (k, &p) in self.perm.iter().enumerate() {
            inv[p] = k;
        }
        for (i, &d) in m.diag.iter().enumerate() {
            let k = inv[i];
            let idx = self.start[k] + (k - self.first[k]);
            self.values[idx] += d;
        }
        for &(i, j, v) in &m.off {
            let (a, b) = (inv[i], inv[j]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let idx = self.start[hi] + (lo - self.first[hi]);
            self.values[idx] += v;
        }

        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut s = self.values[si + (j - fi)];
                for k in k0..j {
                    s -= self.values[si + (k - fi)] * self.values[sj + (k - fj)];
                }
                let ljj = self.values[sj + (j - fj)];
                self.values[si + (j - fi)] = s / ljj;
            }
            let mut s = self.values[si + (i - fi)];
            for k in fi..i {
                let l = self.values[si + (k - fi)];
                s -= l * l;
            }
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: self.perm[i],
                    value: s,
                });
            }
            self.values[si + (i - fi)] = s.sqrt();
        }
        Ok(self)
    }

    fn forward(&self, y: &mut [f64]) {
        for i in 0..y.len() {
            let fi = self.first[i];
            let row = self.row(i);
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
    }

    fn backward(&self, y: &mut [f64]) {
        for i in (0..y.len()).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= row[k - fi] * xi;
            }
        }
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        self.forward(&mut y);
        self.backward(&mut y);
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = y[k];
        }
    }

    fn correlate_in_place(&self, z: &mut [f64]) {
        let mut y = z.to_vec();
        self.backward(&mut y);
        for (k, &p) in self.perm.iter().enumerate() {
            z[p] = y[k];
        }
    }
}

/// Reverse Cuthill-McKee ordering; returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| adj[v].len());

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, seed);
        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], root: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    let mut queue = std::collections::VecDeque::new();
    level[root] = 0;
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut root = seed;
    let mut ecc = 0usize;
    for _ in 0..4 {
        let level = bfs_levels(adj, root);
        let depth = level.iter().copied().filter(|&l| l != usize::MAX).max().unwrap_or(0);
        if depth <= ecc && ecc > 0 {
            break;
        }
        ecc = depth;
        let candidate = (0..adj.len())
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| adj[v].len())
            .unwrap_or(root);
        if candidate == root {
            break;
        }
        root = candidate;
    }
    root
}
