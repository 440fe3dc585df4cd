//! Reference throughput via max-flow feasibility and bisection.
//!
//! A candidate throughput `t` is feasible iff all mass can be routed from
//! the source through items to ports whose sink edges have capacity `t`.
//! The optimum of the throughput LP is the smallest feasible `t`. Nothing
//! here shares code with [`crate::sim`].

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{MassExperiment, PortMapping2};

/// Absolute width of the final bisection interval.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

struct Edge {
    to: usize,
    cap: f64,
}

/// Dinic's algorithm over `f64` capacities.
struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    iter: Vec<usize>,
    eps: f64,
}

impl FlowNetwork {
    fn new(nodes: usize, eps: f64) -> Self {
        FlowNetwork {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            iter: vec![0; nodes],
            eps,
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0 });
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &id in &self.adj[v] {
                let e = &self.edges[id];
                if e.cap > self.eps && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: f64) -> f64 {
        if v == t {
            return pushed;
        }
        while self.iter[v] < self.adj[v].len() {
            let id = self.adj[v][self.iter[v]];
            let (to, cap) = (self.edges[id].to, self.edges[id].cap);
            if cap > self.eps && self.level[to] == self.level[v] + 1 {
                let d = self.dfs(to, t, pushed.min(cap));
                if d > 0.0 {
                    self.edges[id].cap -= d;
                    self.edges[id ^ 1].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= 0.0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }
}

/// Can every unit of mass be scheduled with at most `t` per port?
fn feasible(num_ports: usize, items: &[(u32, f64)], total: f64, t: f64) -> bool {
    let source = 0;
    let sink = 1 + items.len() + num_ports;
    let slack = 1e-12 * total.max(1.0);
    let mut net = FlowNetwork::new(sink + 1, slack * 1e-3);
    for (k, &(mask, mass)) in items.iter().enumerate() {
        let item = 1 + k;
        net.add_edge(source, item, mass);
        for p in 0..num_ports {
            if mask >> p & 1 == 1 {
                net.add_edge(item, 1 + items.len() + p, total);
            }
        }
    }
    for p in 0..num_ports {
        net.add_edge(1 + items.len() + p, sink, t);
    }
    net.max_flow(source, sink) >= total - slack
}

/// Optimal LP throughput, computed without subset enumeration.
pub fn oracle_throughput<K: Ord + fmt::Display>(
    m2: &PortMapping2<K>,
    e2: &MassExperiment<K>,
) -> Result<f64> {
    let items = e2
        .iter()
        .map(|(k, mass)| {
            m2.ports_of(k)
                .map(|u| (u.mask(), mass as f64))
                .ok_or_else(|| Error::UnmappedItem(k.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let num_ports = m2.num_ports();
    let total: f64 = items.iter().map(|&(_, m)| m).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut lo = total / num_ports as f64;
    let mut hi = total;
    if feasible(num_ports, &items, total, lo) {
        return Ok(lo);
    }
    while hi - lo > ORACLE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if feasible(num_ports, &items, total, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
