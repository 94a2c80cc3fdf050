//! Set partitions of a vertex set and the graph-respecting subset of them.
//!
//! A partition is stored as a canonical label vector (a restricted growth
//! string): vertex 0 is in block 0 and each new block id is one more than the
//! largest id seen so far when scanning vertices in order.

use std::collections::HashMap;
use std::fmt;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest patch for which graph-respecting enumeration is attempted by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 12;

/// Largest `n` for which every set partition is listed.
pub const ALL_PARTITIONS_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    /// Builds a partition from arbitrary block labels, canonicalising them.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = HashMap::new();
        let labels = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    /// Every vertex in one block.
    pub fn single_block(n: usize) -> Self {
        Partition { labels: vec![0; n] }
    }

    pub fn singletons(n: usize) -> Self {
        Partition { labels: (0..n).collect() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.labels[v]
    }

    /// Members of each block, in block order; members ascend.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks()];
        for (v, &b) in self.labels.iter().enumerate() {
            out[b].push(v);
        }
        out
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_blocks()];
        for &b in &self.labels {
            out[b] += 1;
        }
        out
    }

    pub fn is_canonical(labels: &[usize]) -> bool {
        let mut next = 0;
        for &l in labels {
            if l > next {
                return false;
            }
            if l == next {
                next += 1;
            }
        }
        true
    }

    /// Comma-separated canonical labels.
    pub fn to_line(&self) -> String {
        self.labels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let line = line.trim();
        if line.is_empty() {
            return Err(Error::invalid("empty partition line"));
        }
        let labels = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("'{t}' is not a block label")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Partition::from_labels(&labels))
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// True iff every block of `p` induces a connected subgraph of `g`.
pub fn is_graph_respecting(g: &Graph, p: &Partition) -> Result<bool> {
    if p.len() != g.n_vertices() {
        return Err(Error::invalid(format!(
            "partition has {} labels but graph has {} vertices",
            p.len(),
            g.n_vertices()
        )));
    }
    for block in p.blocks() {
        if !g.induced_subgraph(&block)?.is_connected() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every set partition of `n` elements (Bell(n) of them), in
/// restricted-growth-string lexicographic order.
pub fn enumerate_all_partitions(n: usize) -> Result<Vec<Partition>> {
    if n == 0 {
        return Err(Error::invalid("cannot enumerate partitions of zero elements"));
    }
    if n > ALL_PARTITIONS_CAP {
        return Err(Error::ResourceLimit {
            what: "set-partition enumeration size",
            requested: n,
            limit: ALL_PARTITIONS_CAP,
        });
    }
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    fn rec(i: usize, k: usize, labels: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if i == labels.len() {
            out.push(Partition { labels: labels.clone() });
            return;
        }
        for b in 0..=k {
            labels[i] = b;
            rec(i + 1, k.max(b + 1), labels, out);
        }
    }
    rec(1, 1, &mut labels, &mut out);
    Ok(out)
}

/// All graph-respecting partitions of `g`, using the default size cap.
pub fn enumerate_graph_respecting(g: &Graph) -> Result<Vec<Partition>> {
    enumerate_graph_respecting_capped(g, DEFAULT_ENUMERATION_CAP)
}

/// All graph-respecting partitions of a connected graph with at most `cap`
/// vertices, in restricted-growth-string lexicographic order.
///
/// Prefixes are abandoned once some block is split into pieces and one of
/// the pieces has no unassigned neighbour left to reconnect it.
pub fn enumerate_graph_respecting_capped(g: &Graph, cap: usize) -> Result<Vec<Partition>> {
    let n = g.n_vertices();
    if n == 0 {
        return Err(Error::invalid("cannot enumerate partitions of an empty graph"));
    }
    let cap = cap.min(64);
    if n > cap {
        return Err(Error::ResourceLimit {
            what: "graph-respecting enumeration size",
            requested: n,
            limit: cap,
        });
    }
    if !g.is_connected() {
        return Err(Error::invalid("graph-respecting enumeration requires a connected graph"));
    }
    let adj: Vec<u64> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u64, |m, &w| m | (1 << w)))
        .collect();

    struct Search<'a> {
        adj: &'a [u64],
        n: usize,
        labels: Vec<usize>,
        masks: Vec<u64>,
        out: Vec<Partition>,
    }

    impl Search<'_> {
        fn neighbours_of(&self, set: u64) -> u64 {
            let mut acc = 0;
            let mut s = set;
            while s != 0 {
                let v = s.trailing_zeros() as usize;
                acc |= self.adj[v];
                s &= s - 1;
            }
            acc
        }

        /// Whether the block `mask` can still become connected when
        /// vertices in `free` are yet to be placed.
        fn viable(&self, mask: u64, free: u64) -> bool {
            let mut rest = mask;
            let first = rest & rest.wrapping_neg();
            let mut comp = first;
            loop {
                let grown = (comp | self.neighbours_of(comp)) & mask;
                if grown == comp {
                    break;
                }
                comp = grown;
            }
            rest &= !comp;
            if rest == 0 {
                return true;
            }
            if free == 0 {
                return false;
            }
            // Split block: every piece needs an unplaced neighbour.
            if self.neighbours_of(comp) & free == 0 {
                return false;
            }
            while rest != 0 {
                let seed = rest & rest.wrapping_neg();
                let mut piece = seed;
                loop {
                    let grown = (piece | self.neighbours_of(piece)) & mask;
                    if grown == piece {
                        break;
                    }
                    piece = grown;
                }
                if self.neighbours_of(piece) & free == 0 {
                    return false;
                }
                rest &= !piece;
            }
            true
        }

        fn rec(&mut self, i: usize) {
            if i == self.n {
                self.out.push(Partition { labels: self.labels.clone() });
                return;
            }
            let free = if i + 1 >= self.n {
                0
            } else {
                (!0u64 >> (64 - self.n)) & !((1u64 << (i + 1)) - 1)
            };
            let k = self.masks.len();
            for b in 0..=k {
                if b == k {
                    self.masks.push(0);
                }
                self.masks[b] |= 1 << i;
                self.labels[i] = b;
                let ok = self.masks.iter().all(|&m| self.viable(m, free));
                if ok {
                    self.rec(i + 1);
                }
                self.masks[b] &= !(1 << i);
                if b == k {
                    self.masks.pop();
                }
            }
        }
    }

    let mut s = Search {
        adj: &adj,
        n,
        labels: vec![0; n],
        masks: Vec::new(),
        out: Vec::new(),
    };
    s.rec(0);
    Ok(s.out)
}

/// Uniform spanning tree of a connected graph by Wilson's loop-erased
/// random walk. Returns the tree as a list of edges `(u, v)` with `u < v`.
pub fn uniform_spanning_tree<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let n = g.n_vertices();
    if n == 0 {
        return Err(Error::invalid("spanning tree of an empty graph"));
    }
    if !g.is_connected() {
        return Err(Error::invalid("spanning tree requires a connected graph"));
    }
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    let root = rng.random_range(0..n);
    in_tree[root] = true;
    for start in 0..n {
        let mut u = start;
        while !in_tree[u] {
            let nb = g.neighbors(u);
            next[u] = nb[rng.random_range(0..nb.len())];
            u = next[u];
        }
        // Retrace the walk; overwritten `next` pointers have erased the loops.
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    let mut edges: Vec<(usize, usize)> = (0..n)
        .filter(|&v| v != root)
        .map(|v| (v.min(next[v]), v.max(next[v])))
        .collect();
    edges.sort_unstable();
    Ok(edges)
}

/// Random graph-respecting partition with exactly `k_blocks` blocks: the
/// components left after deleting `k_blocks - 1` uniformly chosen edges of a
/// uniform spanning tree.
pub fn sample_graph_respecting<R: Rng + ?Sized>(g: &Graph, k_blocks: usize, rng: &mut R) -> Result<Partition> {
    let n = g.n_vertices();
    if k_blocks == 0 || k_blocks > n {
        return Err(Error::invalid(format!("k_blocks must be in 1..={n}, got {k_blocks}")));
    }
    let tree = uniform_spanning_tree(g, rng)?;
    let mut keep = vec![true; tree.len()];
    for i in index::sample(rng, tree.len(), k_blocks - 1) {
        keep[i] = false;
    }
    let mut adj = vec![Vec::new(); n];
    for (&(a, b), _) in tree.iter().zip(&keep).filter(|(_, &k)| k) {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut labels = vec![usize::MAX; n];
    let mut next_label = 0;
    for s in 0..n {
        if labels[s] != usize::MAX {
            continue;
        }
        labels[s] = next_label;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if labels[w] == usize::MAX {
                    labels[w] = next_label;
                    stack.push(w);
                }
            }
        }
        next_label += 1;
    }
    Ok(Partition { labels })
}

fn pairs(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Running contingency counts between a fixed reference partition and a
/// second partition, supporting O(1) Rand-index updates under label swaps.
#[derive(Debug, Clone)]
pub(crate) struct RandTracker {
    n: usize,
    together_ref: f64,
    together_other: f64,
    together_both: f64,
    counts: HashMap<(usize, usize), usize>,
}

impl RandTracker {
    pub(crate) fn new(reference: &[usize], other: &[usize]) -> Self {
        let mut counts = HashMap::new();
        let mut ref_sizes: HashMap<usize, usize> = HashMap::new();
        let mut other_sizes: HashMap<usize, usize> = HashMap::new();
        for (&a, &b) in reference.iter().zip(other) {
            *counts.entry((a, b)).or_insert(0) += 1;
            *ref_sizes.entry(a).or_insert(0) += 1;
            *other_sizes.entry(b).or_insert(0) += 1;
        }
        RandTracker {
            n: reference.len(),
            together_ref: ref_sizes.values().map(|&s| pairs(s)).sum(),
            together_other: other_sizes.values().map(|&s| pairs(s)).sum(),
            together_both: counts.values().map(|&s| pairs(s)).sum(),
            counts,
        }
    }

    pub(crate) fn index(&self) -> f64 {
        let total = pairs(self.n);
        (total - self.together_ref - self.together_other + 2.0 * self.together_both) / total
    }

    /// Moves one vertex with reference label `r` from block `from` to `to`
    /// of the second partition (block sizes are maintained by the caller
    /// pairing moves into swaps).
    pub(crate) fn relabel(&mut self, r: usize, from: usize, to: usize) {
        let c = self.counts.get_mut(&(r, from)).expect("vertex present in cell");
        self.together_both -= (*c - 1) as f64;
        *c -= 1;
        let c = self.counts.entry((r, to)).or_insert(0);
        self.together_both += *c as f64;
        *c += 1;
    }
}

/// Fraction of unordered vertex pairs on which `p1` and `p2` agree.
pub fn rand_index(p1: &Partition, p2: &Partition) -> Result<f64> {
    if p1.len() != p2.len() {
        return Err(Error::invalid(format!(
            "partitions have different lengths ({} vs {})",
            p1.len(),
            p2.len()
        )));
    }
    if p1.len() < 2 {
        return Err(Error::invalid("rand index needs at least two elements"));
    }
    Ok(RandTracker::new(p1.labels(), p2.labels()).index())
}
