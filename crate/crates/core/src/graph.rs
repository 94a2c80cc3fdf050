//! Undirected simple graphs, lattice constructors, and local patches.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

/// A simple undirected graph on vertices `0..n`.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted. Values are
/// immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate edges and
    /// out-of-range endpoints.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) has an endpoint outside 0..{n_vertices}"
                )));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop at vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(Error::invalid(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
        }
        Ok(Self::from_sorted(n_vertices, set.into_iter().collect()))
    }

    fn from_sorted(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Graph { n, edges, adj }
    }

    /// The complete graph on `n` vertices.
    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for a in 0..n {
            for b in (a + 1)..n {
                edges.push((a, b));
            }
        }
        Self::from_sorted(n, edges)
    }

    /// The path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        Self::from_sorted(n, (1..n).map(|v| (v - 1, v)).collect())
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj.get(a).is_some_and(|l| l.binary_search(&b).is_ok())
    }

    /// Induced subgraph on `subset`, relabelled `0..subset.len()` in the
    /// order given.
    pub fn induced_subgraph(&self, subset: &[usize]) -> Result<Graph> {
        if subset.is_empty() {
            return Err(Error::invalid("induced subgraph of an empty vertex subset"));
        }
        let mut local = vec![usize::MAX; self.n];
        for (i, &v) in subset.iter().enumerate() {
            if v >= self.n {
                return Err(Error::invalid(format!("vertex {v} out of range 0..{}", self.n)));
            }
            if local[v] != usize::MAX {
                return Err(Error::invalid(format!("vertex {v} repeated in subset")));
            }
            local[v] = i;
        }
        let mut edges = Vec::new();
        for (i, &v) in subset.iter().enumerate() {
            for &w in &self.adj[v] {
                let j = local[w];
                if j != usize::MAX && i < j {
                    edges.push((i, j));
                }
            }
        }
        edges.sort_unstable();
        Ok(Self::from_sorted(subset.len(), edges))
    }

    /// Whether a traversal from vertex 0 reaches every vertex. The empty
    /// graph is treated as connected.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    /// Sizes of the connected components of the subgraph induced by
    /// `listed`, sorted descending.
    pub fn component_sizes(&self, listed: &[usize]) -> Result<Vec<usize>> {
        let mut in_set = vec![false; self.n];
        for &v in listed {
            if v >= self.n {
                return Err(Error::invalid(format!("vertex {v} out of range 0..{}", self.n)));
            }
            in_set[v] = true;
        }
        let mut seen = vec![false; self.n];
        let mut sizes = Vec::new();
        for &start in listed {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut size = 0;
            while let Some(v) = stack.pop() {
                size += 1;
                for &w in &self.adj[v] {
                    if in_set[w] && !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        Ok(sizes)
    }

    /// Breadth-first neighbourhood of `v` out to `radius` hops, nearest
    /// first (ties by vertex id), truncated to at most `cap` vertices. Any
    /// BFS-order prefix induces a connected subgraph.
    pub fn bfs_ball(&self, v: usize, radius: usize, cap: usize) -> Result<Vec<usize>> {
        if v >= self.n {
            return Err(Error::invalid(format!("vertex {v} out of range 0..{}", self.n)));
        }
        if cap == 0 {
            return Err(Error::invalid("ball cap must be positive"));
        }
        let mut dist = vec![usize::MAX; self.n];
        dist[v] = 0;
        let mut order = vec![v];
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            if dist[u] == radius {
                continue;
            }
            for &w in &self.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    order.push(w);
                    queue.push_back(w);
                }
            }
        }
        order.sort_by_key(|&w| (dist[w], w));
        order.truncate(cap);
        Ok(order)
    }

    /// Parses a plain-text edge list: one edge per line as two whitespace
    /// separated 0-based ids; blank lines and lines starting with `#` are
    /// ignored. The vertex count is one more than the largest id seen unless
    /// `n_vertices` is given.
    pub fn parse_edge_list(text: &str, n_vertices: Option<usize>) -> Result<Graph> {
        let mut edges = Vec::new();
        let mut max_id = None::<usize>;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                let tok = tok.ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: "expected two vertex ids".into(),
                })?;
                tok.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("'{tok}' is not a vertex id"),
                })
            };
            let a = parse(it.next())?;
            let b = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "more than two fields".into(),
                });
            }
            max_id = Some(max_id.unwrap_or(0).max(a).max(b));
            edges.push((a, b));
        }
        let n = n_vertices.unwrap_or_else(|| max_id.map_or(0, |m| m + 1));
        Graph::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for &(a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }
}

/// A `rows x cols` 4-neighbour grid with row-major vertex ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lattice {
    pub rows: usize,
    pub cols: usize,
}

impl Lattice {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("lattice dimensions must be positive, got {rows}x{cols}")));
        }
        Ok(Lattice { rows, cols })
    }

    pub fn n_vertices(&self) -> usize {
        self.rows * self.cols
    }

    pub fn vertex(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v / self.cols, v % self.cols)
    }

    pub fn graph(&self) -> Graph {
        let mut edges = Vec::with_capacity(self.rows * (self.cols - 1) + self.cols * (self.rows - 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.vertex(r, c);
                if c + 1 < self.cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < self.rows {
                    edges.push((v, v + self.cols));
                }
            }
        }
        edges.sort_unstable();
        Graph::from_sorted(self.n_vertices(), edges)
    }

    /// Manhattan (graph) distance between two lattice vertices.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }

    /// Top-left corner of the `shape` window used for vertex `v`.
    ///
    /// The window is as central on `v` as possible; when exact centring is
    /// impossible `v` sits toward the window's top-left. Windows are shifted
    /// (never shrunk) at the borders.
    pub fn patch_origin(&self, v: usize, shape: PatchShape) -> Result<(usize, usize)> {
        if v >= self.n_vertices() {
            return Err(Error::invalid(format!("vertex {v} outside a {}x{} lattice", self.rows, self.cols)));
        }
        if shape.rows == 0 || shape.cols == 0 || shape.rows > self.rows || shape.cols > self.cols {
            return Err(Error::invalid(format!(
                "patch {}x{} does not fit in a {}x{} lattice",
                shape.rows, shape.cols, self.rows, self.cols
            )));
        }
        let (r, c) = self.coords(v);
        let start = |pos: usize, len: usize, extent: usize| -> usize {
            pos.saturating_sub((len - 1) / 2).min(extent - len)
        };
        Ok((start(r, shape.rows, self.rows), start(c, shape.cols, self.cols)))
    }

    /// Vertices of the window with the given origin, row-major.
    pub fn window(&self, origin: (usize, usize), shape: PatchShape) -> Vec<usize> {
        let mut out = Vec::with_capacity(shape.size());
        for r in origin.0..origin.0 + shape.rows {
            for c in origin.1..origin.1 + shape.cols {
                out.push(self.vertex(r, c));
            }
        }
        out
    }

    /// The local patch around `v`, as a row-major list of vertex ids.
    pub fn local_patch(&self, v: usize, shape: PatchShape) -> Result<Vec<usize>> {
        let origin = self.patch_origin(v, shape)?;
        Ok(self.window(origin, shape))
    }
}

/// Shape of a rectangular lattice patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchShape {
    pub rows: usize,
    pub cols: usize,
}

impl PatchShape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        PatchShape { rows, cols }
    }

    pub fn size(&self) -> usize {
        self.rows * self.cols
    }
}

impl Default for PatchShape {
    fn default() -> Self {
        PatchShape::new(2, 2)
    }
}

impl std::str::FromStr for PatchShape {
    type Err = Error;

    /// Parses `RxC`, e.g. `2x2`.
    fn from_str(s: &str) -> Result<Self> {
        let (r, c) = parse_dims(s)?;
        Ok(PatchShape::new(r, c))
    }
}

/// Parses `RxC` dimension strings.
pub fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::invalid(format!("expected RxC, got '{s}'")))?;
    let r = a.trim().parse().map_err(|_| Error::invalid(format!("bad row count in '{s}'")))?;
    let c = b.trim().parse().map_err(|_| Error::invalid(format!("bad column count in '{s}'")))?;
    if r == 0 || c == 0 {
        return Err(Error::invalid(format!("dimensions must be positive in '{s}'")));
    }
    Ok((r, c))
}

/// `rows x cols` lattice graph.
pub fn lattice_graph(rows: usize, cols: usize) -> Result<Graph> {
    Ok(Lattice::new(rows, cols)?.graph())
}

/// Local patch of vertex `v` on a `rows x cols` lattice.
pub fn local_patch(rows: usize, cols: usize, v: usize, patch_rows: usize, patch_cols: usize) -> Result<Vec<usize>> {
    Lattice::new(rows, cols)?.local_patch(v, PatchShape::new(patch_rows, patch_cols))
}
