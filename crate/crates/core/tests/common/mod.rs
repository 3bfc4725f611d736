#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rdslab::Graph;

/// Erdős–Rényi G(n, p), reduced to its largest component.
pub fn gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    let ids = (0..n).map(|i| format!("v{i}")).collect();
    Graph::from_edges(ids, pairs).unwrap().largest_connected_component()
}

pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Graph {
    let ids = (0..n).map(|i| i.to_string()).collect();
    Graph::from_edges(ids, pairs.iter().copied()).unwrap()
}

pub fn complete(n: usize) -> Graph {
    let pairs: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    from_pairs(n, &pairs)
}

pub fn cycle(n: usize) -> Graph {
    let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    from_pairs(n, &pairs)
}

pub fn path(n: usize) -> Graph {
    let pairs: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    from_pairs(n, &pairs)
}

/// Attaches `Y` with exactly `ones` ones in uniformly random positions.
pub fn permuted_labels<R: Rng + ?Sized>(g: &mut Graph, ones: usize, rng: &mut R) {
    let n = g.node_count();
    let mut ys: Vec<Option<u8>> = (0..n).map(|i| Some(u8::from(i < ones))).collect();
    ys.shuffle(rng);
    g.set_attribute("Y", ys).unwrap();
}

/// Binomial 3-sigma band around `alpha` for `trials` independent tests.
pub fn size_band(alpha: f64, trials: usize) -> (f64, f64) {
    let sd = (alpha * (1.0 - alpha) / trials as f64).sqrt();
    (alpha - 3.0 * sd, alpha + 3.0 * sd)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub fn var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}
