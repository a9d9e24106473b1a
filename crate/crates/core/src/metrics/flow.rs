//! Exact uncapacitated transportation solver (primal network simplex).
//!
//! Solves `min sum c_ij x_ij` subject to `sum_j x_ij = a_i`,
//! `sum_i x_ij = b_j`, `x >= 0` with integer supplies/demands and real
//! costs, and returns both the optimal flows and the dual node potentials
//! of the final basis. Costs are evaluated on demand through a closure, so
//! no `m x n` matrix is materialized.
//!
//! The basis is a spanning tree rooted at an artificial node; entering
//! arcs are priced with a block search and the leaving arc is the first
//! blocking arc along the cycle. If the pivot count degenerates the solver
//! falls back to Bland's rule, which cannot cycle.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Positive optimal flows `(source, sink, units)`.
    pub flows: Vec<(usize, usize, i64)>,
    /// Dual value `u_i` per source; feasibility `u_i + w_j <= c_ij`.
    pub potential_source: Vec<f64>,
    /// Dual value `w_j` per sink.
    pub potential_sink: Vec<f64>,
    /// Total cost of the returned flows.
    pub cost: f64,
    pub pivots: usize,
}

struct TreeArc {
    /// Arc id: `i * n + j` for bipartite arcs, `m*n + node` for artificials.
    id: usize,
    from: usize,
    to: usize,
    flow: i64,
}

pub fn solve_transportation<C>(supplies: &[i64], demands: &[i64], cost: C) -> Result<TransportSolution>
where
    C: Fn(usize, usize) -> f64,
{
    let m = supplies.len();
    let n = demands.len();
    let total_supply: i64 = supplies.iter().sum();
    let total_demand: i64 = demands.iter().sum();
    if total_supply != total_demand {
        return Err(Error::MassMismatch(total_supply as f64, total_demand as f64));
    }
    if supplies.iter().chain(demands).any(|&x| x < 0) {
        return Err(Error::InvalidConfig("negative supply or demand".into()));
    }
    if m == 0 || n == 0 || total_supply == 0 {
        return Ok(TransportSolution {
            flows: Vec::new(),
            potential_source: vec![0.0; m],
            potential_sink: vec![0.0; n],
            cost: 0.0,
            pivots: 0,
        });
    }

    let n_arcs = m * n;
    let mut max_cost = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            let c = cost(i, j);
            if !c.is_finite() || c < 0.0 {
                return Err(Error::NonFinite(format!("cost({i}, {j}) = {c}")));
            }
            max_cost = max_cost.max(c);
        }
    }
    let big = 4.0 * max_cost + 1.0;
    let eps = 1e-14 * (1.0 + big);

    // nodes: 0..m sources, m..m+n sinks, root = m+n
    let n_nodes = m + n + 1;
    let root = m + n;
    let arc_cost = |id: usize| -> f64 {
        if id < n_arcs {
            cost(id / n, id % n)
        } else {
            big
        }
    };
    let arc_ends = |id: usize| -> (usize, usize) {
        if id < n_arcs {
            (id / n, m + id % n)
        } else {
            let node = id - n_arcs;
            if node < m {
                (node, root) // source -> root
            } else {
                (root, node) // root -> sink
            }
        }
    };

    // initial star basis of artificial arcs
    let mut tree: Vec<TreeArc> = Vec::with_capacity(n_nodes - 1);
    for i in 0..m {
        tree.push(TreeArc { id: n_arcs + i, from: i, to: root, flow: supplies[i] });
    }
    for j in 0..n {
        tree.push(TreeArc { id: n_arcs + m + j, from: root, to: m + j, flow: demands[j] });
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes]; // indices into `tree`
    for (t, arc) in tree.iter().enumerate() {
        adj[arc.from].push(t);
        adj[arc.to].push(t);
    }

    let mut parent = vec![usize::MAX; n_nodes];
    let mut up_arc = vec![usize::MAX; n_nodes]; // tree index of the arc to the parent
    let mut depth = vec![0u32; n_nodes];
    let mut pot = vec![0.0f64; n_nodes];
    rebuild(root, &tree, &adj, &mut parent, &mut up_arc, &mut depth, &mut pot, &arc_cost);

    let block = ((n_arcs as f64).sqrt() as usize).clamp(64, 8192);
    let hard_cap = 50 * (n_arcs + n_nodes) + 10_000;
    let bland_after = 20 * (n_arcs + n_nodes) + 5_000;
    let mut next_start = 0usize;
    let mut pivots = 0usize;

    loop {
        // price: reduced cost c - pot[from] + pot[to]
        let entering = if pivots < bland_after {
            // block search for the most negative reduced cost
            let mut best: Option<(usize, f64)> = None;
            let mut scanned = 0usize;
            let mut pos = next_start;
            while scanned < n_arcs {
                let stop = (pos + block).min(pos + (n_arcs - scanned));
                let mut local_best: Option<(usize, f64)> = None;
                while pos < stop {
                    let id = pos % n_arcs;
                    let (f, t) = arc_ends(id);
                    let rc = arc_cost(id) - pot[f] + pot[t];
                    if rc < -eps && local_best.map_or(true, |(_, b)| rc < b) {
                        local_best = Some((id, rc));
                    }
                    pos += 1;
                    scanned += 1;
                }
                if let Some(lb) = local_best {
                    best = Some(lb);
                    break;
                }
            }
            next_start = pos % n_arcs;
            best.map(|(id, _)| id)
        } else {
            // Bland: first improving arc in index order
            (0..n_arcs).find(|&id| {
                let (f, t) = arc_ends(id);
                arc_cost(id) - pot[f] + pot[t] < -eps
            })
        };

        let Some(enter_id) = entering else { break };
        let bland = pivots >= bland_after;
        pivots += 1;
        if pivots > hard_cap {
            return Err(Error::SolverStalled(hard_cap));
        }

        // cycle: entering arc (u -> v), tree path v .. u
        let (u, v) = arc_ends(enter_id);
        // collect path arcs with their traversal direction in the cycle
        // (cycle direction: u -> v over the entering arc, then v -> u in the tree)
        let mut delta = i64::MAX;
        let mut leaving: Option<usize> = None; // tree index
        {
            // walk both endpoints up to the common ancestor
            let (mut x, mut y) = (v, u);
            let mut x_path: Vec<usize> = Vec::new(); // traversed x -> parent
            let mut y_path: Vec<usize> = Vec::new(); // traversed parent -> y (reverse walk)
            while depth[x] > depth[y] {
                x_path.push(up_arc[x]);
                x = parent[x];
            }
            while depth[y] > depth[x] {
                y_path.push(up_arc[y]);
                y = parent[y];
            }
            while x != y {
                x_path.push(up_arc[x]);
                x = parent[x];
                y_path.push(up_arc[y]);
                y = parent[y];
            }
            // reverse arcs (flow decreases) limit delta: on the x side the
            // cycle moves node -> parent, so an arc oriented node -> parent
            // is traversed forwards; on the y side the cycle moves
            // parent -> node, so the same orientation is traversed against.
            let consider = |t: usize, flow: i64, delta: &mut i64, leaving: &mut Option<usize>| {
                let better = flow < *delta
                    || (bland
                        && flow == *delta
                        && leaving.map_or(true, |l| tree[t].id < tree[l].id));
                if better {
                    *delta = flow;
                    *leaving = Some(t);
                }
            };
            let mut node = v;
            for &t in &x_path {
                let a = &tree[t];
                let forwards = a.from == node;
                if !forwards {
                    consider(t, a.flow, &mut delta, &mut leaving);
                }
                node = parent[node];
            }
            let mut node = u;
            for &t in &y_path {
                let a = &tree[t];
                let forwards = a.to == node; // cycle runs parent -> node here, against the upward walk
                if !forwards {
                    consider(t, a.flow, &mut delta, &mut leaving);
                }
                node = parent[node];
            }
            if delta == i64::MAX {
                delta = 0; // no reverse arc: push bounded by nothing (cannot happen on a tree cycle with artificials)
            }

            // apply the push
            let mut node = v;
            for &t in &x_path {
                let a = &mut tree[t];
                let forwards = a.from == node;
                if forwards {
                    a.flow += delta;
                } else {
                    a.flow -= delta;
                }
                node = parent[node];
            }
            let mut node = u;
            for &t in &y_path {
                let a = &mut tree[t];
                let forwards = a.to == node;
                if forwards {
                    a.flow += delta;
                } else {
                    a.flow -= delta;
                }
                node = parent[node];
            }
        }

        let Some(leave_t) = leaving else {
            // entering arc closes a cycle with no reverse arc; with all
            // artificial arcs pointing through the root this is impossible
            return Err(Error::SolverStalled(pivots));
        };

        // swap the leaving arc out of the basis
        let old = &tree[leave_t];
        let (of, ot) = (old.from, old.to);
        adj[of].retain(|&t| t != leave_t);
        adj[ot].retain(|&t| t != leave_t);
        tree[leave_t] = TreeArc { id: enter_id, from: u, to: v, flow: delta };
        adj[u].push(leave_t);
        adj[v].push(leave_t);
        rebuild(root, &tree, &adj, &mut parent, &mut up_arc, &mut depth, &mut pot, &arc_cost);
    }

    // extract bipartite flows; artificial arcs must be empty
    let mut flows = Vec::new();
    let mut cost_sum = 0.0;
    let mut comp = 0.0;
    for a in &tree {
        if a.id >= n_arcs {
            if a.flow != 0 {
                return Err(Error::InvalidConfig(
                    "artificial arc kept positive flow; instance infeasible or cost scale broken".into(),
                ));
            }
            continue;
        }
        if a.flow > 0 {
            let (i, j) = (a.id / n, a.id % n);
            flows.push((i, j, a.flow));
            let y = a.flow as f64 * cost(i, j) - comp;
            let t = cost_sum + y;
            comp = (t - cost_sum) - y;
            cost_sum = t;
        }
    }
    flows.sort_unstable_by_key(|&(i, j, _)| (i, j));

    Ok(TransportSolution {
        flows,
        potential_source: (0..m).map(|i| pot[i]).collect(),
        potential_sink: (0..n).map(|j| -pot[m + j]).collect(),
        cost: cost_sum,
        pivots,
    })
}

/// Recomputes parents, depths and potentials from the tree adjacency.
/// Potentials satisfy `cost - pot[from] + pot[to] = 0` on tree arcs with
/// `pot[root] = 0`.
#[allow(clippy::too_many_arguments)]
fn rebuild<C: Fn(usize) -> f64>(
    root: usize,
    tree: &[TreeArc],
    adj: &[Vec<usize>],
    parent: &mut [usize],
    up_arc: &mut [usize],
    depth: &mut [u32],
    pot: &mut [f64],
    arc_cost: &C,
) {
    parent[root] = root;
    up_arc[root] = usize::MAX;
    depth[root] = 0;
    pot[root] = 0.0;
    let mut stack = vec![root];
    let mut seen = vec![false; adj.len()];
    seen[root] = true;
    while let Some(x) = stack.pop() {
        for &t in &adj[x] {
            let a = &tree[t];
            let y = if a.from == x { a.to } else { a.from };
            if seen[y] {
                continue;
            }
            seen[y] = true;
            parent[y] = x;
            up_arc[y] = t;
            depth[y] = depth[x] + 1;
            let c = arc_cost(a.id);
            // rc = c - pot[from] + pot[to] = 0
            pot[y] = if a.from == y { c + pot[x] } else { pot[x] - c };
            stack.push(y);
        }
    }
}
