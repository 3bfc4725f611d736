//! Structural cohesion: vertex-disjoint path counts between dyads.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::Graph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum DyadSampling {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohesionEstimate {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
    pub dyads: usize,
    pub exhaustive: bool,
}

/// Unit-capacity max-flow network on the node-split graph.
struct FlowNet {
    head: Vec<usize>,
    next: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<u32>,
}

const NIL: usize = usize::MAX;

impl FlowNet {
    fn new(n: usize) -> Self {
        FlowNet {
            head: vec![NIL; n],
            next: Vec::new(),
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add(&mut self, u: usize, v: usize, c: u32) {
        for (a, b, cap) in [(u, v, c), (v, u, 0)] {
            self.to.push(b);
            self.cap.push(cap);
            self.next.push(self.head[a]);
            self.head[a] = self.to.len() - 1;
        }
    }

    fn bfs(&self, s: usize, t: usize, level: &mut [u32]) -> bool {
        level.fill(u32::MAX);
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let mut e = self.head[u];
            while e != NIL {
                let v = self.to[e];
                if self.cap[e] > 0 && level[v] == u32::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
                e = self.next[e];
            }
        }
        level[t] != u32::MAX
    }

    // Iterative blocking-flow augmentation of one unit.
    fn augment(&mut self, s: usize, t: usize, level: &[u32], iter: &mut [usize]) -> bool {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                for &e in &path {
                    self.cap[e] -= 1;
                    self.cap[e ^ 1] += 1;
                }
                return true;
            }
            let mut advanced = false;
            while iter[u] != NIL {
                let e = iter[u];
                let v = self.to[e];
                if self.cap[e] > 0 && level[v] == level[u] + 1 {
                    path.push(e);
                    u = v;
                    advanced = true;
                    break;
                }
                iter[u] = self.next[e];
            }
            if !advanced {
                match path.pop() {
                    None => return false,
                    Some(e) => {
                        u = self.to[e ^ 1];
                        iter[u] = self.next[iter[u]];
                    }
                }
            }
        }
    }

    fn max_flow(&mut self, s: usize, t: usize) -> usize {
        let n = self.head.len();
        let mut level = vec![0u32; n];
        let mut flow = 0;
        while self.bfs(s, t, &mut level) {
            let mut iter = self.head.clone();
            while self.augment(s, t, &level, &mut iter) {
                flow += 1;
            }
        }
        flow
    }
}

/// Number of internally vertex-disjoint paths between `s` and `t`.
///
/// Each node `v` is split into `v_in -> v_out` with unit capacity; edges
/// become `u_out -> v_in`. For adjacent dyads the direct edge stays in the
/// network and counts as one path.
pub fn node_independent_paths(g: &Graph, s: usize, t: usize) -> usize {
    assert!(s != t, "dyad endpoints must differ");
    let n = g.node_count();
    let big = u32::MAX / 2;
    let mut net = FlowNet::new(2 * n);
    for v in 0..n {
        let c = if v == s || v == t { big } else { 1 };
        net.add(2 * v, 2 * v + 1, c);
    }
    for (u, v) in g.edges() {
        net.add(2 * u + 1, 2 * v, 1);
        net.add(2 * v + 1, 2 * u, 1);
    }
    net.max_flow(2 * s + 1, 2 * t)
}

fn unrank_pair(n: usize, mut r: usize) -> (usize, usize) {
    // Pairs (i, j), i < j, in row-major order.
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if r < row {
            return (i, i + 1 + r);
        }
        r -= row;
        i += 1;
    }
}

/// Mean, min and max vertex-disjoint path counts over sampled dyads.
/// Every dyad is evaluated when `N(N-1)/2 <= dyad_sample`.
pub fn estimate_node_independent_paths<R: Rng + ?Sized>(
    g: &Graph,
    dyad_sample: usize,
    sampling: DyadSampling,
    rng: &mut R,
) -> Result<CohesionEstimate> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::Precondition("cohesion needs at least two nodes".into()));
    }
    if dyad_sample == 0 {
        return Err(Error::InvalidInput("dyad sample must be at least 1".into()));
    }
    let total = n * (n - 1) / 2;
    let exhaustive = total <= dyad_sample;
    let dyads: Vec<(usize, usize)> = if exhaustive {
        (0..total).map(|r| unrank_pair(n, r)).collect()
    } else {
        match sampling {
            DyadSampling::WithoutReplacement => {
                let mut ranks = index::sample(rng, total, dyad_sample).into_vec();
                ranks.sort_unstable();
                ranks.into_iter().map(|r| unrank_pair(n, r)).collect()
            }
            DyadSampling::WithReplacement => (0..dyad_sample)
                .map(|_| unrank_pair(n, rng.random_range(0..total)))
                .collect(),
        }
    };
    let counts: Vec<usize> = dyads
        .par_iter()
        .map(|&(s, t)| node_independent_paths(g, s, t))
        .collect();
    let sum: usize = counts.iter().sum();
    Ok(CohesionEstimate {
        mean: sum as f64 / counts.len() as f64,
        min: counts.iter().copied().min().unwrap_or(0),
        max: counts.iter().copied().max().unwrap_or(0),
        dyads: counts.len(),
        exhaustive,
    })
}
