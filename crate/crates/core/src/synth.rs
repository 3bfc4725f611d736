//! Known-structure populations: the Y|Z homophily block model, its 4-state
//! and 2-state category chains, and a FOM / non-FOM contrast pair.
//!
//! Cells are ordered `(Y,Z) = (0,0), (0,1), (1,1), (1,0)`. Counts follow the
//! ego-by-alter friendship table: `E` ties link the two Z groups within a Y
//! group, `H` ties cross Y between the Z=1 cells, and `D`, `F` are the
//! within-cell ego-alter entries of the Z=0 and Z=1 cells. A within-cell
//! edge appears twice in that table, so a cell realizes `D/2` (or `F/2`)
//! internal edges. Equal cell degree requires `D = F + H`.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Real;
use crate::spectral::{self, RwsVariance, SpectralDecomposition};

/// Connectivity rejection budget for random realizations.
pub const CONNECT_RETRIES: usize = 1000;

pub const CELLS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 1), (1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockModelSpec {
    pub d: usize,
    pub e: usize,
    pub f: usize,
    pub h: usize,
    /// Nodes per Y|Z cell when the model is realized as a graph.
    #[serde(default = "default_cell_size")]
    pub cell_size: usize,
}

fn default_cell_size() -> usize {
    50
}

impl BlockModelSpec {
    /// Spec with `D = F + H` filled in.
    pub fn new(e: usize, f: usize, h: usize, cell_size: usize) -> Self {
        BlockModelSpec {
            d: f + h,
            e,
            f,
            h,
            cell_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != self.f + self.h {
            return Err(Error::InvalidInput(format!(
                "cell degrees differ: D = {} but F + H = {}",
                self.d,
                self.f + self.h
            )));
        }
        if self.d + self.e == 0 {
            return Err(Error::InvalidInput("block model has no ties".into()));
        }
        Ok(())
    }

    /// `(a, b) = (E, H) / (E + F + H)`.
    pub fn parameters<T: Real>(&self) -> (T, T) {
        let total = T::from_count(self.e + self.f + self.h);
        (T::from_count(self.e) / total, T::from_count(self.h) / total)
    }

    /// Ego-by-alter tie counts over the four cells.
    pub fn count_table(&self) -> [[usize; 4]; 4] {
        let (d, e, f, h) = (self.d, self.e, self.f, self.h);
        [
            [d, e, 0, 0],
            [e, f, h, 0],
            [0, h, f, e],
            [0, 0, e, d],
        ]
    }

    fn check_connected(&self) -> Result<()> {
        if self.h == 0 {
            return Err(Error::Reducible("H = 0 leaves the Y groups disconnected".into()));
        }
        if self.e == 0 {
            return Err(Error::Reducible("E = 0 leaves the Z = 0 cells disconnected".into()));
        }
        Ok(())
    }
}

/// A finite chain over attribute categories with a per-state value.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryChain<T: Real> {
    matrix: DMatrix<T>,
    values: Vec<T>,
    stationary: DVector<T>,
}

impl<T: Real> CategoryChain<T> {
    pub fn new(matrix: DMatrix<T>, values: Vec<T>) -> Result<Self> {
        let stationary = spectral::stationary_of(&matrix)?;
        Self::with_stationary(matrix, values, stationary)
    }

    pub fn with_stationary(matrix: DMatrix<T>, values: Vec<T>, stationary: DVector<T>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || values.len() != n || stationary.len() != n {
            return Err(Error::InvalidInput("category chain dimensions disagree".into()));
        }
        let tol = T::lit(1e-9).max(T::default_epsilon() * T::lit(1e3));
        for i in 0..n {
            if (matrix.row(i).sum() - T::one()).abs() > tol {
                return Err(Error::InvalidInput(format!("row {i} does not sum to 1")));
            }
        }
        Ok(CategoryChain {
            matrix,
            values,
            stationary,
        })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn stationary(&self) -> &DVector<T> {
        &self.stationary
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    pub fn decompose(&self) -> Result<SpectralDecomposition<T>> {
        spectral::decompose(&self.matrix, &self.stationary)
    }

    /// Exact variance of the mean of `S` stationary steps, by the spectral route.
    pub fn exact_variance(&self, s: usize) -> Result<RwsVariance<T>> {
        let d = self.decompose()?;
        let proj = spectral::ProjectionCoefficients::new(&d, &self.values)?;
        spectral::exact_rws_variance(&proj, &d, s, spectral::VarianceMethod::Auto)
    }
}

/// The 4-state cell chain `M` and the 2-state Y chain `C` of a block model.
pub fn build_category_chain<T: Real>(spec: &BlockModelSpec) -> Result<(CategoryChain<T>, CategoryChain<T>)> {
    spec.validate()?;
    spec.check_connected()?;
    let table = spec.count_table();
    let mut m = DMatrix::zeros(4, 4);
    for (i, row) in table.iter().enumerate() {
        let total = T::from_count(row.iter().sum());
        for (j, &c) in row.iter().enumerate() {
            m[(i, j)] = T::from_count(c) / total;
        }
    }
    let cell_totals: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let grand = T::from_count(cell_totals.iter().sum());
    let pi_m = DVector::from_iterator(4, cell_totals.iter().map(|&t| T::from_count(t) / grand));
    let m_values: Vec<T> = CELLS.iter().map(|&(y, _)| T::from_count(y as usize)).collect();

    // Aggregate ego-alter counts by Y.
    let mut by_y = [[0usize; 2]; 2];
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            by_y[CELLS[i].0 as usize][CELLS[j].0 as usize] += c;
        }
    }
    let mut c = DMatrix::zeros(2, 2);
    for y in 0..2 {
        let total = T::from_count(by_y[y][0] + by_y[y][1]);
        for z in 0..2 {
            c[(y, z)] = T::from_count(by_y[y][z]) / total;
        }
    }
    let y_totals = [by_y[0][0] + by_y[0][1], by_y[1][0] + by_y[1][1]];
    let pi_c = DVector::from_iterator(
        2,
        y_totals.iter().map(|&t| T::from_count(t) / T::from_count(y_totals[0] + y_totals[1])),
    );
    Ok((
        CategoryChain::with_stationary(m, m_values, pi_m)?,
        CategoryChain::with_stationary(c, vec![T::zero(), T::one()], pi_c)?,
    ))
}

/// `M` and `C` straight from the cross-tie shares `a` (to the other Z cell
/// of the same Y) and `b` (across Y), for real-valued parameters.
pub fn chains_from_parameters<T: Real>(a: T, b: T) -> Result<(CategoryChain<T>, CategoryChain<T>)> {
    let (zero, one) = (T::zero(), T::one());
    if !(a > zero && b > zero && a + b <= one) {
        return Err(Error::InvalidInput(format!(
            "need a > 0, b > 0 and a + b <= 1 (a = {}, b = {})",
            a.as_f64(),
            b.as_f64()
        )));
    }
    let stay = one - a - b;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        one - a, a,    zero, zero,
        a,       stay, b,    zero,
        zero,    b,    stay, a,
        zero,    zero, a,    one - a,
    ]);
    let half = b / T::lit(2.0);
    let c = DMatrix::from_row_slice(2, 2, &[one - half, half, half, one - half]);
    let m_values = CELLS.iter().map(|&(y, _)| T::from_count(y as usize)).collect();
    let quarter = DVector::from_element(4, T::lit(0.25));
    let half_pi = DVector::from_element(2, T::lit(0.5));
    Ok((
        CategoryChain::with_stationary(m, m_values, quarter)?,
        CategoryChain::with_stationary(c, vec![zero, one], half_pi)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormEigenvalues<T: Real> {
    /// `{1, 1-b-a+r, 1-2a, 1-b-a-r}` with `r = sqrt(a^2 + b^2)`.
    pub cell_chain: [T; 4],
    /// `{1, 1-b}`.
    pub category_chain: [T; 2],
}

pub fn closed_form_eigenvalues<T: Real>(a: T, b: T) -> ClosedFormEigenvalues<T> {
    let one = T::one();
    let r = (a * a + b * b).sqrt();
    ClosedFormEigenvalues {
        cell_chain: [one, one - b - a + r, one - a - a, one - b - a - r],
        category_chain: [one, one - b],
    }
}

fn pair_in_block(n: usize, within: bool, rank: usize) -> (usize, usize) {
    if within {
        let mut r = rank;
        let mut i = 0;
        loop {
            let row = n - 1 - i;
            if r < row {
                return (i, i + 1 + r);
            }
            r -= row;
            i += 1;
        }
    } else {
        (rank / n, rank % n)
    }
}

/// Realizes a block model as a simple connected graph whose cell-block
/// edge counts equal the requested counts exactly. Nodes carry `Y` and `Z`.
pub fn generate_block_network<R: Rng + ?Sized>(spec: &BlockModelSpec, rng: &mut R) -> Result<Graph> {
    spec.validate()?;
    spec.check_connected()?;
    let n = spec.cell_size;
    if n == 0 {
        return Err(Error::Infeasible("cell size must be positive".into()));
    }
    if spec.d % 2 == 1 || spec.f % 2 == 1 {
        return Err(Error::Infeasible(
            "D and F count each within-cell tie from both ends and must be even".into(),
        ));
    }
    // (cell a, cell b, edges)
    let blocks = [
        (0, 0, spec.d / 2),
        (1, 1, spec.f / 2),
        (2, 2, spec.f / 2),
        (3, 3, spec.d / 2),
        (0, 1, spec.e),
        (1, 2, spec.h),
        (2, 3, spec.e),
    ];
    for &(a, b, count) in &blocks {
        let room = if a == b { n * (n - 1) / 2 } else { n * n };
        if count > room {
            return Err(Error::Infeasible(format!(
                "block ({a},{b}) needs {count} edges but only {room} pairs exist with {n} nodes per cell"
            )));
        }
    }
    let ids: Vec<String> = (0..4 * n).map(|i| i.to_string()).collect();
    let y: Vec<Option<u8>> = (0..4 * n).map(|i| Some(CELLS[i / n].0)).collect();
    let z: Vec<Option<u8>> = (0..4 * n).map(|i| Some(CELLS[i / n].1)).collect();
    for _ in 0..CONNECT_RETRIES {
        let mut edges = Vec::new();
        for &(a, b, count) in &blocks {
            let within = a == b;
            let room = if within { n * (n - 1) / 2 } else { n * n };
            for r in index::sample(rng, room, count).into_iter() {
                let (i, j) = pair_in_block(n, within, r);
                edges.push((a * n + i, b * n + j));
            }
        }
        let g = Graph::from_edges(ids.clone(), edges)?;
        if g.is_connected() {
            let mut g = g;
            g.set_attribute("Y", y)?;
            g.set_attribute("Z", z)?;
            return Ok(g);
        }
    }
    Err(Error::Infeasible(format!(
        "no connected realization in {CONNECT_RETRIES} attempts"
    )))
}

fn norm(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Random `k`-regular simple graph on `nodes`: a shuffled circulant mixed
/// by degree-preserving double-edge swaps.
fn regular_graph<R: Rng + ?Sized>(nodes: &[usize], k: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let n = nodes.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k >= n || (n * k) % 2 == 1 {
        return Err(Error::Infeasible(format!("no {k}-regular simple graph on {n} nodes")));
    }
    let mut perm = nodes.to_vec();
    perm.shuffle(rng);
    let mut edges = Vec::with_capacity(n * k / 2);
    for o in 1..=k / 2 {
        for i in 0..n {
            edges.push(norm(perm[i], perm[(i + o) % n]));
        }
    }
    if k % 2 == 1 {
        for i in 0..n / 2 {
            edges.push(norm(perm[i], perm[i + n / 2]));
        }
    }
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    for _ in 0..10 * edges.len() {
        let x = rng.random_range(0..edges.len());
        let w = rng.random_range(0..edges.len());
        if x == w {
            continue;
        }
        let (a, b) = edges[x];
        let (mut c, mut d) = edges[w];
        if rng.random_bool(0.5) {
            std::mem::swap(&mut c, &mut d);
        }
        let (e1, e2) = (norm(a, d), norm(c, b));
        if a == d || c == b || e1 == e2 || present.contains(&e1) || present.contains(&e2) {
            continue;
        }
        present.remove(&edges[x]);
        present.remove(&edges[w]);
        present.insert(e1);
        present.insert(e2);
        edges[x] = e1;
        edges[w] = e2;
    }
    Ok(edges)
}

/// Random `k`-regular bipartite graph between equal-size `left` and `right`.
fn regular_bipartite<R: Rng + ?Sized>(
    left: &[usize],
    right: &[usize],
    k: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let n = left.len();
    if right.len() != n || k > n {
        return Err(Error::Infeasible(format!(
            "no {k}-regular bipartite graph between {} and {} nodes",
            n,
            right.len()
        )));
    }
    let mut l = left.to_vec();
    let mut r = right.to_vec();
    l.shuffle(rng);
    r.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (0..k)
        .flat_map(|o| (0..n).map(move |i| (i, (i + o) % n)))
        .map(|(i, j)| (l[i], r[j]))
        .collect();
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    for _ in 0..10 * edges.len() {
        let x = rng.random_range(0..edges.len().max(1));
        let w = rng.random_range(0..edges.len().max(1));
        if x == w {
            continue;
        }
        let (a1, b1) = edges[x];
        let (a2, b2) = edges[w];
        let (e1, e2) = ((a1, b2), (a2, b1));
        if present.contains(&e1) || present.contains(&e2) {
            continue;
        }
        present.remove(&(a1, b1));
        present.remove(&(a2, b2));
        present.insert(e1);
        present.insert(e2);
        edges[x] = e1;
        edges[w] = e2;
    }
    Ok(edges.into_iter().map(|(a, b)| norm(a, b)).collect())
}

/// Shape of the FOM / non-FOM contrast pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastParams {
    /// Nodes per Y group (even).
    pub group_size: usize,
    /// Common degree of every node (multiple of 3).
    pub degree: usize,
    /// Non-FOM graph: ties from each node to the other Z cell of its Y group.
    pub bridge: usize,
}

impl Default for ContrastParams {
    fn default() -> Self {
        ContrastParams {
            group_size: 200,
            degree: 12,
            bridge: 1,
        }
    }
}

impl ContrastParams {
    fn validate(&self) -> Result<()> {
        let (n, d, e) = (self.group_size, self.degree, self.bridge);
        if n < 4 || n % 2 == 1 {
            return Err(Error::Infeasible("group size must be an even number >= 4".into()));
        }
        if d == 0 || d % 3 != 0 {
            return Err(Error::Infeasible("degree must be a positive multiple of 3".into()));
        }
        if e == 0 || e > d / 3 {
            return Err(Error::Infeasible(format!("bridge must lie in 1..={}", d / 3)));
        }
        Ok(())
    }
}

/// Two graphs with the same nodes, edge count, degree sequence (all equal)
/// and Y-level transition matrix `C` (one third of every node's ties cross
/// Y overall).
///
/// In the first graph every node has exactly `degree/3` cross-Y ties, so
/// the walk's Y sequence is exactly first-order Markov. In the second, the
/// cross-Y ties are concentrated on a Z = 1 half of each group (two thirds
/// of their ties cross), while the Z = 0 half only reaches it through
/// `bridge` ties per node.
pub fn make_contrast_pair<R: Rng + ?Sized>(params: &ContrastParams, rng: &mut R) -> Result<(Graph, Graph)> {
    params.validate()?;
    let n = params.group_size;
    let d = params.degree;
    let e = params.bridge;
    let ids: Vec<String> = (0..2 * n).map(|i| i.to_string()).collect();
    let y: Vec<Option<u8>> = (0..2 * n).map(|i| Some((i >= n) as u8)).collect();
    let group0: Vec<usize> = (0..n).collect();
    let group1: Vec<usize> = (n..2 * n).collect();
    let half = n / 2;
    // Non-FOM cells: Y0Z0, Y0Z1, Y1Z1, Y1Z0.
    let cells: [Vec<usize>; 4] = [
        (0..half).collect(),
        (half..n).collect(),
        (n..n + half).collect(),
        (n + half..2 * n).collect(),
    ];

    let realize = |rng: &mut R, fom: bool| -> Result<Graph> {
        for _ in 0..CONNECT_RETRIES {
            let mut edges = Vec::new();
            if fom {
                edges.extend(regular_graph(&group0, 2 * d / 3, rng)?);
                edges.extend(regular_graph(&group1, 2 * d / 3, rng)?);
                edges.extend(regular_bipartite(&group0, &group1, d / 3, rng)?);
            } else {
                edges.extend(regular_bipartite(&cells[1], &cells[2], 2 * d / 3, rng)?);
                edges.extend(regular_bipartite(&cells[0], &cells[1], e, rng)?);
                edges.extend(regular_bipartite(&cells[3], &cells[2], e, rng)?);
                edges.extend(regular_graph(&cells[0], d - e, rng)?);
                edges.extend(regular_graph(&cells[3], d - e, rng)?);
                edges.extend(regular_graph(&cells[1], d / 3 - e, rng)?);
                edges.extend(regular_graph(&cells[2], d / 3 - e, rng)?);
            }
            let mut g = Graph::from_edges(ids.clone(), edges)?;
            if g.is_connected() {
                g.set_attribute("Y", y.clone())?;
                if !fom {
                    let z = (0..2 * n)
                        .map(|i| Some(u8::from(cells[1].contains(&i) || cells[2].contains(&i))))
                        .collect();
                    g.set_attribute("Z", z)?;
                }
                return Ok(g);
            }
        }
        Err(Error::Infeasible(format!(
            "no connected realization in {CONNECT_RETRIES} attempts"
        )))
    };
    let fom = realize(rng, true)?;
    let nonfom = realize(rng, false)?;
    Ok((fom, nonfom))
}

/// Population category transition matrix of a graph over a binary attribute:
/// entry `(a, b)` is the fraction of ties from category-`a` nodes that reach
/// category-`b` nodes. Ties touching a missing value are ignored.
pub fn population_category_matrix(g: &Graph, attribute: &str) -> Result<DMatrix<f64>> {
    let col = g.require_attribute(attribute)?;
    let mut counts = [[0usize; 2]; 2];
    for (u, v) in g.edges() {
        if let (Some(a), Some(b)) = (col[u], col[v]) {
            counts[a as usize][b as usize] += 1;
            counts[b as usize][a as usize] += 1;
        }
    }
    let mut c = DMatrix::zeros(2, 2);
    for a in 0..2 {
        let total = counts[a][0] + counts[a][1];
        if total == 0 {
            return Err(Error::InvalidInput(format!(
                "category {a} of `{attribute}` has no ties"
            )));
        }
        for b in 0..2 {
            c[(a, b)] = counts[a][b] as f64 / total as f64;
        }
    }
    Ok(c)
}
