//! Graphs, graph shift operators, graph signals and the graph Fourier
//! transform.
//!
//! A [`ShiftOperator`] is stored as a row-sorted coordinate list (CSR
//! offsets over `(row, col)`-ordered triplets). Shifting a signal walks only
//! the stored coordinates, so node `i` of `S x` reads only its neighbors and,
//! when the diagonal is nonzero, itself.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative symmetry tolerance for shift operators.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Undirected weighted graph; each edge is stored once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &(i, j, w) in &edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) has non-positive weight {w}"
                )));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Graph { n_nodes, edges })
    }

    /// Unit-weight graph from an edge list.
    pub fn unweighted(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Graph::new(n_nodes, edges.iter().map(|&(i, j)| (i, j, 1.0)).collect())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n_nodes];
        for &(i, j, w) in &self.edges {
            deg[i] += w;
            deg[j] += w;
        }
        deg
    }

    /// Sorted neighbor lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.n_nodes];
        for &(i, j, _) in &self.edges {
            nb[i].push(j);
            nb[j].push(i);
        }
        for l in &mut nb {
            l.sort_unstable();
        }
        nb
    }

    /// Path graph 0 - 1 - ... - (n-1) with unit weights.
    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::unweighted(n, &edges)
    }

    /// Erdős–Rényi graph with uniform weights in `[w_lo, w_hi]`, resampled
    /// until every node has at least one neighbor.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64, w_lo: f64, w_hi: f64) -> Self {
        loop {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < p {
                        let w = if w_hi > w_lo {
                            rng.random_range(w_lo..=w_hi)
                        } else {
                            w_lo
                        };
                        edges.push((i, j, w));
                    }
                }
            }
            let g = Graph { n_nodes: n, edges };
            if n < 2 || g.degrees().iter().all(|&d| d > 0.0) {
                return g;
            }
        }
    }

    /// Parse the plain-text edge-list format: a `nodes N` header followed by
    /// `i j weight` lines, `#` starting a comment.
    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(std::io::BufReader::new(file), path)
    }

    pub fn parse_edge_list<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut n_nodes = None;
        let mut edges = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields[0] == "nodes" {
                if n_nodes.is_some() {
                    return Err(parse_err(lineno, "duplicate `nodes` header".into()));
                }
                let n = fields
                    .get(1)
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(lineno, "expected `nodes N`".into()))?;
                n_nodes = Some(n);
                continue;
            }
            if n_nodes.is_none() {
                return Err(parse_err(lineno, "edge before `nodes N` header".into()));
            }
            if fields.len() != 3 {
                return Err(parse_err(
                    lineno,
                    format!("expected `i j weight`, got `{content}`"),
                ));
            }
            let i = fields[0]
                .parse::<usize>()
                .map_err(|e| parse_err(lineno, format!("bad node index: {e}")))?;
            let j = fields[1]
                .parse::<usize>()
                .map_err(|e| parse_err(lineno, format!("bad node index: {e}")))?;
            let w = fields[2]
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("bad weight: {e}")))?;
            edges.push((i, j, w));
        }
        let n = n_nodes.ok_or_else(|| parse_err(0, "missing `nodes N` header".into()))?;
        Graph::new(n, edges)
    }

    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "nodes {}", self.n_nodes)?;
        for &(i, j, w) in &self.edges {
            writeln!(out, "{i} {j} {w}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Adjacency,
    Laplacian,
    NormalizedAdjacency,
    NormalizedLaplacian,
    DegreeNormalizedAdjacency,
    Custom,
}

impl ShiftKind {
    pub const ALL: [ShiftKind; 6] = [
        ShiftKind::Adjacency,
        ShiftKind::Laplacian,
        ShiftKind::NormalizedAdjacency,
        ShiftKind::NormalizedLaplacian,
        ShiftKind::DegreeNormalizedAdjacency,
        ShiftKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShiftKind::Adjacency => "adjacency",
            ShiftKind::Laplacian => "laplacian",
            ShiftKind::NormalizedAdjacency => "normalized_adjacency",
            ShiftKind::NormalizedLaplacian => "normalized_laplacian",
            ShiftKind::DegreeNormalizedAdjacency => "degree_normalized_adjacency",
            ShiftKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShiftKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown shift kind `{s}`")))
    }
}

/// Eigendecomposition `S = V diag(values) Vᵀ` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Symmetric graph shift operator in sorted coordinate storage.
#[derive(Clone, Debug)]
pub struct ShiftOperator {
    n: usize,
    kind: ShiftKind,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    eig: Option<Arc<Eigen>>,
}

impl ShiftOperator {
    /// Build the operator of the requested kind from a graph.
    ///
    /// `normalized_adjacency` divides the adjacency by its largest absolute
    /// eigenvalue; `degree_normalized_adjacency` is `D^{-1/2} A D^{-1/2}` and
    /// `normalized_laplacian` is `I - D^{-1/2} A D^{-1/2}`.
    pub fn from_graph(graph: &Graph, kind: ShiftKind) -> Result<Self> {
        let n = graph.n_nodes();
        let deg = graph.degrees();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * graph.n_edges() + n);
        match kind {
            ShiftKind::Adjacency | ShiftKind::Custom | ShiftKind::NormalizedAdjacency => {
                for &(i, j, w) in graph.edges() {
                    triplets.push((i, j, w));
                    triplets.push((j, i, w));
                }
            }
            ShiftKind::Laplacian => {
                for &(i, j, w) in graph.edges() {
                    triplets.push((i, j, -w));
                    triplets.push((j, i, -w));
                }
                for (i, &d) in deg.iter().enumerate() {
                    triplets.push((i, i, d));
                }
            }
            ShiftKind::DegreeNormalizedAdjacency | ShiftKind::NormalizedLaplacian => {
                if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
                    return Err(Error::ZeroDegreeNode(i));
                }
                let sign = if kind == ShiftKind::NormalizedLaplacian {
                    -1.0
                } else {
                    1.0
                };
                for &(i, j, w) in graph.edges() {
                    let v = sign * w / (deg[i] * deg[j]).sqrt();
                    triplets.push((i, j, v));
                    triplets.push((j, i, v));
                }
                if kind == ShiftKind::NormalizedLaplacian {
                    for i in 0..n {
                        triplets.push((i, i, 1.0));
                    }
                }
            }
        }
        let mut op = Self::from_triplets(n, kind, triplets);
        if kind == ShiftKind::NormalizedAdjacency {
            let rho = linalg::symmetric_operator_norm(op.to_dense().view())?;
            if rho > 0.0 {
                op = op.scaled(1.0 / rho);
                op.kind = ShiftKind::NormalizedAdjacency;
            }
        }
        Ok(op)
    }

    /// Degree-normalized adjacency that leaves isolated nodes as zero rows
    /// instead of failing.
    pub fn degree_normalized_lenient(graph: &Graph) -> Self {
        let deg = graph.degrees();
        let mut triplets = Vec::with_capacity(2 * graph.n_edges());
        for &(i, j, w) in graph.edges() {
            let v = w / (deg[i] * deg[j]).sqrt();
            triplets.push((i, j, v));
            triplets.push((j, i, v));
        }
        Self::from_triplets(
            graph.n_nodes(),
            ShiftKind::DegreeNormalizedAdjacency,
            triplets,
        )
    }

    /// Wrap an arbitrary symmetric matrix as a `custom` shift. Exact zeros are
    /// not stored.
    pub fn from_dense(m: ArrayView2<f64>) -> Result<Self> {
        Self::from_dense_with_kind(m, ShiftKind::Custom)
    }

    pub fn from_dense_with_kind(m: ArrayView2<f64>, kind: ShiftKind) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "shift must be square and non-empty, got {}x{}",
                n,
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("shift operator".into()));
        }
        let asym = max_asymmetry(m);
        let scale = m
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym / scale));
        }
        let mut triplets = Vec::new();
        for ((i, j), &v) in m.indexed_iter() {
            if v != 0.0 {
                triplets.push((i, j, v));
            }
        }
        Ok(Self::from_triplets(n, kind, triplets))
    }

    fn from_triplets(n: usize, kind: ShiftKind, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        // merge duplicates
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for t in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == t.0 && last.1 == t.1 => last.2 += t.2,
                _ => merged.push(t),
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(merged.len());
        let mut vals = Vec::with_capacity(merged.len());
        let mut diag = vec![0.0; n];
        for &(i, j, v) in &merged {
            row_ptr[i + 1] += 1;
            cols.push(j);
            vals.push(v);
            if i == j {
                diag[i] = v;
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        ShiftOperator {
            n,
            kind,
            row_ptr,
            cols,
            vals,
            diag,
            eig: None,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    /// Number of stored coordinates.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn is_hollow(&self) -> bool {
        self.diag.iter().all(|&d| d == 0.0)
    }

    /// Stored `(col, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    /// All stored `(row, col, value)` triplets in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(pos) => self.vals[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for (i, j, v) in self.entries() {
            m[[i, j]] = v;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Operator 2-norm (spectral radius, since S is symmetric).
    pub fn spectral_norm(&self) -> Result<f64> {
        if let Some(eig) = &self.eig {
            return Ok(eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        linalg::symmetric_operator_norm(self.to_dense().view())
    }

    /// `S x`, one column per feature.
    pub fn shift(&self, x: &GraphSignal) -> Result<GraphSignal> {
        self.check_nodes(x.n_nodes())?;
        let mut out = Array2::zeros((self.n, x.n_features()));
        self.shift_into(x.view(), out.view_mut());
        Ok(GraphSignal(out))
    }

    /// `out = S x` on raw views. Panics on shape mismatch.
    pub fn shift_into(&self, x: ArrayView2<f64>, mut out: ArrayViewMut2<f64>) {
        assert_eq!(x.nrows(), self.n);
        assert_eq!(out.dim(), x.dim());
        let f = x.ncols();
        match (x.as_slice(), out.as_slice_mut()) {
            (Some(xs), Some(os)) => {
                for i in 0..self.n {
                    let orow = &mut os[i * f..(i + 1) * f];
                    orow.iter_mut().for_each(|o| *o = 0.0);
                    for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                        let j = self.cols[p];
                        let v = self.vals[p];
                        let xrow = &xs[j * f..(j + 1) * f];
                        for (o, &xv) in orow.iter_mut().zip(xrow) {
                            *o += v * xv;
                        }
                    }
                }
            }
            (_, _) => {
                for i in 0..self.n {
                    let mut orow = out.row_mut(i);
                    orow.fill(0.0);
                    for (j, v) in self.row(i) {
                        orow.scaled_add(v, &x.row(j));
                    }
                }
            }
        }
    }

    /// `S v` for a single vector.
    pub fn shift_vec(&self, x: ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.n);
        Array1::from_iter((0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()))
    }

    pub(crate) fn check_nodes(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(Error::DimensionMismatch(format!(
                "signal has {n} nodes, shift operator has {}",
                self.n
            )));
        }
        Ok(())
    }

    /// `(1 + ε) S`-style entrywise scaling. Drops the cached eigendecomposition
    /// unless the factor is positive, in which case eigenvalues are rescaled.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= factor);
        out.diag.iter_mut().for_each(|v| *v *= factor);
        out.kind = ShiftKind::Custom;
        out.eig = match &self.eig {
            Some(e) if factor > 0.0 => Some(Arc::new(Eigen {
                values: &e.values * factor,
                vectors: e.vectors.clone(),
            })),
            _ => None,
        };
        out
    }

    /// `Pᵀ S P`: entry `(i, j)` of the result is `S[p(i), p(j)]`.
    pub fn permuted(&self, perm: &Permutation) -> Self {
        assert_eq!(perm.len(), self.n);
        let inv = perm.inverse();
        let mut triplets = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.entries() {
            triplets.push((inv.0[i], inv.0[j], v));
        }
        let mut op = Self::from_triplets(self.n, self.kind, triplets);
        if let Some(e) = &self.eig {
            let mut vecs = Array2::zeros(e.vectors.dim());
            for i in 0..self.n {
                vecs.row_mut(i).assign(&e.vectors.row(perm.0[i]));
            }
            linalg::normalize_eigenvector_signs(&mut vecs);
            op.eig = Some(Arc::new(Eigen {
                values: e.values.clone(),
                vectors: vecs,
            }));
        }
        op
    }

    pub fn eig(&self) -> Option<&Eigen> {
        self.eig.as_deref()
    }

    /// Populate the eigendecomposition (ascending eigenvalues, orthonormal
    /// eigenvectors with the largest-magnitude entry of each made positive).
    pub fn eigendecompose(&self) -> Result<Self> {
        if self.eig.is_some() {
            return Ok(self.clone());
        }
        let dense = self.to_dense();
        let scale = linalg::frobenius(dense.view());
        let asym = max_asymmetry(dense.view());
        if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(asym));
        }
        let (values, mut vectors) = linalg::symmetric_eigen(dense.view(), 1e-12 * scale)?;
        linalg::normalize_eigenvector_signs(&mut vectors);
        let mut out = self.clone();
        out.eig = Some(Arc::new(Eigen { values, vectors }));
        Ok(out)
    }

    /// Graph Fourier transform `Vᵀ x`.
    pub fn gft(&self, x: &GraphSignal) -> Result<GraphSignal> {
        let eig = self.eig().ok_or(Error::MissingEigendecomposition)?;
        self.check_nodes(x.n_nodes())?;
        Ok(GraphSignal(eig.vectors.t().dot(&x.view())))
    }

    /// Inverse graph Fourier transform `V x̃`.
    pub fn igft(&self, xt: &GraphSignal) -> Result<GraphSignal> {
        let eig = self.eig().ok_or(Error::MissingEigendecomposition)?;
        self.check_nodes(xt.n_nodes())?;
        Ok(GraphSignal(eig.vectors.dot(&xt.view())))
    }

    /// Support of `I + S` as sorted `(row, col)` coordinates.
    pub fn support_with_identity(&self) -> Vec<(usize, usize)> {
        let mut coords = Vec::with_capacity(self.nnz() + self.n);
        for i in 0..self.n {
            let mut has_diag = false;
            for (j, _) in self.row(i) {
                if j == i {
                    has_diag = true;
                }
                if j > i && !has_diag {
                    coords.push((i, i));
                    has_diag = true;
                }
                coords.push((i, j));
            }
            if !has_diag {
                coords.push((i, i));
            }
        }
        coords
    }
}

fn max_asymmetry(m: ArrayView2<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

/// Graph signal with `n_features` values per node, stored as an N×F matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSignal(pub Array2<f64>);

impl GraphSignal {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("graph signal".into()));
        }
        Ok(GraphSignal(values))
    }

    pub fn zeros(n_nodes: usize, n_features: usize) -> Self {
        GraphSignal(Array2::zeros((n_nodes, n_features)))
    }

    /// Single-feature signal.
    pub fn from_vec(values: Vec<f64>) -> Self {
        let n = values.len();
        GraphSignal(Array2::from_shape_vec((n, 1), values).expect("column shape"))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_nodes: usize, n_features: usize) -> Self {
        GraphSignal(Array2::from_shape_fn((n_nodes, n_features), |_| {
            rng.random_range(-1.0..1.0)
        }))
    }

    pub fn n_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn view_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.0.view_mut()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        self.0.column(f).to_vec()
    }

    pub fn feature(&self, f: usize) -> GraphSignal {
        GraphSignal(self.0.slice(s![.., f..f + 1]).to_owned())
    }

    pub fn norm(&self) -> f64 {
        linalg::frobenius(self.0.view())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `‖self - other‖_F`.
    pub fn distance(&self, other: &GraphSignal) -> f64 {
        assert_eq!(self.0.dim(), other.0.dim());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `Pᵀ x`.
    pub fn permuted(&self, perm: &Permutation) -> GraphSignal {
        assert_eq!(perm.len(), self.n_nodes());
        let mut out = Array2::zeros(self.0.dim());
        for (i, &src) in perm.0.iter().enumerate() {
            out.row_mut(i).assign(&self.0.row(src));
        }
        GraphSignal(out)
    }
}

/// Node relabeling `p`, acting on signals as `(Pᵀ x)_i = x_{p(i)}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation(pub Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(rng);
        Permutation(p)
    }

    pub fn from_vec(p: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; p.len()];
        for &i in &p {
            if i >= p.len() || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "{p:?} is not a permutation"
                )));
            }
            seen[i] = true;
        }
        Ok(Permutation(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Permutation(inv)
    }

    /// Advance to the next permutation in lexicographic order; `false` once
    /// the last one has been passed (the sequence is left sorted).
    pub fn next_lexicographic(&mut self) -> bool {
        let p = &mut self.0;
        if p.len() < 2 {
            return false;
        }
        let mut i = p.len() - 1;
        while i > 0 && p[i - 1] >= p[i] {
            i -= 1;
        }
        if i == 0 {
            p.reverse();
            return false;
        }
        let mut j = p.len() - 1;
        while p[j] <= p[i - 1] {
            j -= 1;
        }
        p.swap(i - 1, j);
        p[i..].reverse();
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_edge() -> Graph {
        Graph::unweighted(2, &[(0, 1)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::unweighted(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(2, vec![(0, 0, 1.0)]).is_err());
        assert!(Graph::new(2, vec![(0, 2, 1.0)]).is_err());
        assert!(Graph::new(2, vec![(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(Graph::new(2, vec![(0, 1, -1.0)]).is_err());
        assert!(Graph::new(0, vec![]).is_err());
    }

    #[test]
    fn build_shift_kinds() {
        let g = single_edge();
        let a = ShiftOperator::from_graph(&g, ShiftKind::Adjacency).unwrap();
        assert_eq!(a.to_dense(), array![[0.0, 1.0], [1.0, 0.0]]);
        let l = ShiftOperator::from_graph(&g, ShiftKind::Laplacian).unwrap();
        assert_eq!(l.to_dense(), array![[1.0, -1.0], [-1.0, 1.0]]);

        let t = ShiftOperator::from_graph(&triangle(), ShiftKind::DegreeNormalizedAdjacency)
            .unwrap()
            .to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.0 } else { 0.5 };
                assert_abs_diff_eq!(t[[i, j]], expect, epsilon = 1e-15);
            }
        }

        let nl = ShiftOperator::from_graph(&triangle(), ShiftKind::NormalizedLaplacian)
            .unwrap()
            .to_dense();
        assert_abs_diff_eq!(nl[[0, 0]], 1.0);
        assert_abs_diff_eq!(nl[[0, 1]], -0.5, epsilon = 1e-15);

        let na =
            ShiftOperator::from_graph(&Graph::path(3).unwrap(), ShiftKind::NormalizedAdjacency)
                .unwrap();
        assert_abs_diff_eq!(na.spectral_norm().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_degree_node_rejected() {
        let g = Graph::unweighted(3, &[(0, 1)]).unwrap();
        for kind in [
            ShiftKind::DegreeNormalizedAdjacency,
            ShiftKind::NormalizedLaplacian,
        ] {
            assert!(matches!(
                ShiftOperator::from_graph(&g, kind),
                Err(Error::ZeroDegreeNode(2))
            ));
        }
        let lenient = ShiftOperator::degree_normalized_lenient(&g);
        assert_eq!(lenient.row(2).count(), 0);
    }

    #[test]
    fn shift_examples() {
        let s = ShiftOperator::from_graph(&single_edge(), ShiftKind::Adjacency).unwrap();
        let y = s.shift(&GraphSignal::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(y.column(0), vec![0.0, 1.0]);
        let z = s.shift(&GraphSignal::zeros(2, 3)).unwrap();
        assert!(z.0.iter().all(|&v| v == 0.0));

        let p = ShiftOperator::from_graph(&Graph::path(3).unwrap(), ShiftKind::Adjacency).unwrap();
        let x = GraphSignal::from_vec(vec![1.0, 0.0, 0.0]);
        let dense = p.to_dense().dot(&x.view());
        assert_eq!(p.shift(&x).unwrap().0, dense);
        assert_eq!(dense.column(0).to_vec(), vec![0.0, 1.0, 0.0]);

        assert!(matches!(
            p.shift(&GraphSignal::zeros(2, 1)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn eigendecomposition_examples() {
        let s = ShiftOperator::from_graph(&single_edge(), ShiftKind::Adjacency)
            .unwrap()
            .eigendecompose()
            .unwrap();
        let eig = s.eig().unwrap();
        assert_abs_diff_eq!(eig.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 1.0, epsilon = 1e-14);
        let r = 1.0 / 2f64.sqrt();
        // sign convention: largest-magnitude entry positive, first index on ties
        assert_abs_diff_eq!(eig.vectors[[0, 0]], r, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.vectors[[1, 0]], -r, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.vectors[[0, 1]], r, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.vectors[[1, 1]], r, epsilon = 1e-14);

        let d = ShiftOperator::from_dense(
            array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]].view(),
        )
        .unwrap()
        .eigendecompose()
        .unwrap();
        let eig = d.eig().unwrap();
        assert_eq!(eig.values.to_vec(), vec![1.0, 2.0, 3.0]);
        let expected = array![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert_eq!(eig.vectors, expected);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Graph::random(&mut rng, 12, 0.4, 0.5, 2.0);
        let l = ShiftOperator::from_graph(&g, ShiftKind::Laplacian)
            .unwrap()
            .eigendecompose()
            .unwrap();
        let eig = l.eig().unwrap();
        assert_abs_diff_eq!(eig.values[0], 0.0, epsilon = 1e-10);
        let v1 = eig.vectors.column(0);
        let expect = 1.0 / 12f64.sqrt();
        for &x in v1 {
            assert_abs_diff_eq!(x, expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn non_symmetric_rejected() {
        assert!(matches!(
            ShiftOperator::from_dense(array![[0.0, 1.0], [0.5, 0.0]].view()),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn gft_examples() {
        let s = ShiftOperator::from_graph(&single_edge(), ShiftKind::Adjacency).unwrap();
        assert!(matches!(
            s.gft(&GraphSignal::from_vec(vec![1.0, 1.0])),
            Err(Error::MissingEigendecomposition)
        ));
        let s = s.eigendecompose().unwrap();
        let xt = s.gft(&GraphSignal::from_vec(vec![1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(xt.0[[0, 0]], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(xt.0[[1, 0]], 2f64.sqrt(), epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Graph::random(&mut rng, 9, 0.5, 1.0, 1.0);
        let s = ShiftOperator::from_graph(&g, ShiftKind::Adjacency)
            .unwrap()
            .eigendecompose()
            .unwrap();
        let eig = s.eig().unwrap();
        for i in 0..9 {
            let vi = GraphSignal(
                eig.vectors
                    .column(i)
                    .to_owned()
                    .insert_axis(ndarray::Axis(1)),
            );
            let xt = s.gft(&vi).unwrap();
            for j in 0..9 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(xt.0[[j, 0]], e, epsilon = 1e-10);
            }
        }
        let x = GraphSignal::random(&mut rng, 9, 2);
        let back = s.igft(&s.gft(&x).unwrap()).unwrap();
        assert!(back.distance(&x) < 1e-10);
    }

    #[test]
    fn permutation_lexicographic_enumeration() {
        let mut p = Permutation::identity(4);
        let mut count = 1;
        let mut prev = p.0.clone();
        while p.next_lexicographic() {
            assert!(p.0 > prev);
            prev = p.0.clone();
            count += 1;
        }
        assert_eq!(count, 24);
        assert!(p.is_identity());
    }

    #[test]
    fn permuted_shift_matches_dense_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Graph::random(&mut rng, 7, 0.5, 0.1, 1.0);
        let s = ShiftOperator::from_graph(&g, ShiftKind::Laplacian).unwrap();
        let perm = Permutation::random(&mut rng, 7);
        let mut pm = Array2::<f64>::zeros((7, 7));
        for (i, &p) in perm.0.iter().enumerate() {
            pm[[p, i]] = 1.0;
        }
        let expect = pm.t().dot(&s.to_dense()).dot(&pm);
        assert_eq!(s.permuted(&perm).to_dense(), expect);
        let x = GraphSignal::random(&mut rng, 7, 1);
        assert_eq!(x.permuted(&perm).0, pm.t().dot(&x.view()));
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let text = "# demo\nnodes 3\n0 1 1.5\n1 2 2 # trailing\n";
        let g = Graph::parse_edge_list(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.edges(), &[(0, 1, 1.5), (1, 2, 2.0)]);
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Graph::parse_edge_list(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, g);

        let err =
            Graph::parse_edge_list("nodes 3\n0 1\n".as_bytes(), Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(Graph::parse_edge_list("0 1 1\n".as_bytes(), Path::new("mem")).is_err());
    }

    #[test]
    fn support_with_identity_is_sorted_and_complete() {
        let s = ShiftOperator::from_graph(&Graph::path(4).unwrap(), ShiftKind::Adjacency).unwrap();
        let sup = s.support_with_identity();
        assert_eq!(
            sup,
            vec![
                (0, 0),
                (0, 1),
                (1, 0),
                (1, 1),
                (1, 2),
                (2, 1),
                (2, 2),
                (2, 3),
                (3, 2),
                (3, 3)
            ]
        );
        let l = ShiftOperator::from_graph(&Graph::path(3).unwrap(), ShiftKind::Laplacian).unwrap();
        assert_eq!(l.support_with_identity().len(), 7);
    }
}
