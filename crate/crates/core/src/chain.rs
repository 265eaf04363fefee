//! Chain recurrence over a finite sample of the period map.
//!
//! An `(eps, n)`-edge goes from grid point `u_i` to grid point `u_j` when
//! some iterate `P^k(u_i)` with `n_min <= k <= n_max` lands within the edge
//! threshold of `u_j`. The threshold is `eps` reduced by half the grid
//! spacing so that a grid refinement does not manufacture spurious
//! recurrence; exact hits (distance zero) always count, which keeps
//! identity-map self-loops at every `eps`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::period::PeriodMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainEdge {
    pub from: usize,
    pub to: usize,
    /// Smallest iterate count realizing the edge.
    pub k_witness: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainGraph {
    /// Grid points, ascending.
    pub points: Vec<f64>,
    pub epsilon: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// Largest spacing between adjacent grid points.
    pub grid_slack: f64,
    pub edges: Vec<ChainEdge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CRReport {
    /// Indices of chain-recurrent grid points: members of a strongly
    /// connected component containing at least one edge.
    pub recurrent_indices: Vec<usize>,
    /// Strongly connected components, each sorted, listed in reverse
    /// topological order.
    pub scc_partition: Vec<Vec<usize>>,
}

/// Builds the chain graph of `pm` over `points` (need not be sorted;
/// duplicates rejected).
pub fn build_chain_graph(
    pm: &PeriodMap,
    points: &[f64],
    epsilon: f64,
    n_min: usize,
    n_max: usize,
) -> Result<ChainGraph> {
    if points.len() < 2 {
        return Err(CoreError::Parameter("need at least 2 grid points".into()));
    }
    if epsilon <= 0.0 {
        return Err(CoreError::Parameter("epsilon must be positive".into()));
    }
    if n_min < 1 || n_max < n_min {
        return Err(CoreError::Parameter(
            "need 1 <= n_min <= n_max for chain lengths".into(),
        ));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in pts.windows(2) {
        if w[0] == w[1] {
            return Err(CoreError::Parameter(format!(
                "duplicate grid point {}",
                w[0]
            )));
        }
    }
    let grid_slack = pts
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0_f64, f64::max);
    let threshold = (epsilon - grid_slack / 2.0).max(0.0);

    // Warm the memo cache serially: every iterate orbit starts at a grid
    // point, so parallel workers then hit the cache instead of integrating.
    let per_point: Vec<Vec<ChainEdge>> = pts
        .par_iter()
        .enumerate()
        .map(|(i, &u)| {
            let mut edges: Vec<ChainEdge> = Vec::new();
            let mut seen = vec![false; pts.len()];
            let mut v = u;
            for k in 1..=n_max {
                match pm.eval(v) {
                    Ok(next) => v = next,
                    Err(_) => break,
                }
                if k < n_min {
                    continue;
                }
                // All grid points within the threshold of P^k(u).
                let lo = pts.partition_point(|&p| p < v - threshold.max(0.0) - 1e-300);
                for (j, &p) in pts.iter().enumerate().skip(lo) {
                    if p > v + threshold {
                        break;
                    }
                    let d = (p - v).abs();
                    if (d < threshold || d == 0.0) && !seen[j] {
                        seen[j] = true;
                        edges.push(ChainEdge {
                            from: i,
                            to: j,
                            k_witness: k,
                        });
                    }
                }
                // Exact hits outside the scan window (threshold may be 0).
                if threshold == 0.0 {
                    if let Ok(j) = pts.binary_search_by(|p| p.partial_cmp(&v).unwrap()) {
                        if !seen[j] {
                            seen[j] = true;
                            edges.push(ChainEdge {
                                from: i,
                                to: j,
                                k_witness: k,
                            });
                        }
                    }
                }
            }
            edges
        })
        .collect();

    let mut edges: Vec<ChainEdge> = per_point.into_iter().flatten().collect();
    edges.sort_by_key(|e| (e.from, e.to));
    Ok(ChainGraph {
        points: pts,
        epsilon,
        n_min,
        n_max,
        grid_slack,
        edges,
    })
}

impl ChainGraph {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.points.len()];
        for e in &self.edges {
            adj[e.from].push(e.to);
        }
        adj
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    /// CSV export with header `i,j,k_witness`.
    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,k_witness")?;
        for e in &self.edges {
            writeln!(w, "{},{},{}", e.from, e.to, e.k_witness)?;
        }
        Ok(())
    }
}

/// Strongly connected components by Tarjan's algorithm, iterative to cope
/// with long chains on large grids.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut components: Vec<Vec<usize>> = Vec::new();

    // (node, next child position) frames.
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut ci)) = call.last_mut() {
            if *ci == 0 {
                index[v] = next_index;
                lowlink[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *ci < adj[v].len() {
                let w = adj[v][*ci];
                *ci += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
                if lowlink[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    components.push(comp);
                }
            }
        }
    }
    components
}

/// Chain-recurrent set and SCC partition of the graph. A node is recurrent
/// when its component carries at least one internal edge (which includes
/// self-loops).
pub fn chain_recurrent_set(graph: &ChainGraph) -> CRReport {
    let adj = graph.adjacency();
    let sccs = strongly_connected_components(&adj);
    let mut comp_of = vec![usize::MAX; graph.points.len()];
    for (c, comp) in sccs.iter().enumerate() {
        for &v in comp {
            comp_of[v] = c;
        }
    }
    let mut has_internal = vec![false; sccs.len()];
    for e in &graph.edges {
        if comp_of[e.from] == comp_of[e.to] {
            has_internal[comp_of[e.from]] = true;
        }
    }
    let mut recurrent: Vec<usize> = (0..graph.points.len())
        .filter(|&v| has_internal[comp_of[v]])
        .collect();
    recurrent.sort_unstable();
    CRReport {
        recurrent_indices: recurrent,
        scc_partition: sccs,
    }
}

/// True when the induced subgraph on `subset` is strongly connected and
/// every node of the subset lies on a cycle inside it.
pub fn is_internally_chain_transitive(graph: &ChainGraph, subset: &[usize]) -> Result<bool> {
    if subset.is_empty() {
        return Err(CoreError::Parameter("subset must be non-empty".into()));
    }
    let n = graph.points.len();
    let mut in_subset = vec![false; n];
    for &v in subset {
        if v >= n {
            return Err(CoreError::Parameter(format!(
                "subset index {v} out of range ({n} points)"
            )));
        }
        in_subset[v] = true;
    }
    // Remap to compact indices and take the induced subgraph.
    let verts: Vec<usize> = (0..n).filter(|&v| in_subset[v]).collect();
    let local: std::collections::HashMap<usize, usize> =
        verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj = vec![Vec::new(); verts.len()];
    let mut internal_edges = 0usize;
    for e in &graph.edges {
        if in_subset[e.from] && in_subset[e.to] {
            adj[local[&e.from]].push(local[&e.to]);
            internal_edges += 1;
        }
    }
    if verts.len() == 1 {
        // A singleton is internally chain transitive iff it has a self-loop.
        return Ok(internal_edges > 0);
    }
    let sccs = strongly_connected_components(&adj);
    Ok(sccs.len() == 1)
}
