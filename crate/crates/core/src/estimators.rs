//! Point and variance estimators on recruitment forests.
//!
//! Every variance estimator here shares one assembly step:
//!
//! ```text
//! Var = gamma_0 / S + (1 / S^2) * sum_t h[t] * gamma_t
//! ```
//!
//! where `gamma_0` is the degree-weighted sample variance (with an
//! `S / (S - 1)` correction), `h[t]` counts ordered pairs of records at lag
//! `t`, and `gamma_t` comes from a fitted category chain. The estimators
//! differ only in how lags are measured and which chain supplies `gamma_t`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::RecruitmentForest;
use crate::scalar::Real;
use crate::spectral::{self, ProjectionCoefficients};

/// Bootstrap replicates used by the SBE unless told otherwise.
pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// Multiplier for the reported interval half-width.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Vhe,
    VheWbc,
    VheHom2,
    VheHom3,
    Sbe,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Vhe,
        Estimator::VheWbc,
        Estimator::VheHom2,
        Estimator::VheHom3,
        Estimator::Sbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Vhe => "vhe",
            Estimator::VheWbc => "vhewbc",
            Estimator::VheHom2 => "vhehom2",
            Estimator::VheHom3 => "vhehom3",
            Estimator::Sbe => "sbe",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown estimator `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Records used after dropping those with a missing attribute value.
    pub sample_size: usize,
    pub excluded_missing: usize,
    /// Fewer than two categories observed; the variance is reported as 0.
    pub degenerate: bool,
    pub order: Option<usize>,
    /// Transition matrix the lag covariances were computed from.
    pub chain: Option<Vec<Vec<f64>>>,
    /// States whose row was filled from a lower-order fit.
    pub fallback_rows: Vec<usize>,
    pub bootstrap_replicates: Option<usize>,
    /// A category never recruited anyone, so its urn was the whole sample.
    pub pooled_urn: bool,
    /// Volz–Heckathorn closed-form expression using powers of the fitted
    /// `C`, reported for comparison only.
    pub closed_form_check: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceEstimate<T: Real> {
    pub estimator: Estimator,
    /// The VH mean the interval is centred on.
    pub mean: T,
    pub variance: T,
    /// Relative to `mean (1 - mean) / S`; `None` when that is zero.
    pub design_effect: Option<T>,
    pub half_width: T,
    pub diagnostics: Diagnostics,
}

impl<T: Real> VarianceEstimate<T> {
    fn new(estimator: Estimator, mean: T, variance: T, diagnostics: Diagnostics) -> Self {
        let variance = if variance.is_finite() { variance.max(T::zero()) } else { variance };
        let s = T::from_count(diagnostics.sample_size);
        let srs = mean * (T::one() - mean) / s;
        VarianceEstimate {
            estimator,
            mean,
            variance,
            design_effect: (srs > T::zero()).then(|| variance / srs),
            half_width: T::lit(Z95) * variance.sqrt(),
            diagnostics,
        }
    }

    pub fn sd(&self) -> T {
        self.variance.sqrt()
    }
}

/// Records with an observed attribute value, in sample order.
struct Observed {
    y: Vec<u8>,
    degree: Vec<usize>,
    /// Parent of each forest record, and whether it carries a value.
    parents: Vec<Option<usize>>,
    included: Vec<bool>,
    values: Vec<Option<u8>>,
    excluded: usize,
}

impl Observed {
    fn new(forest: &RecruitmentForest, attribute: &str) -> Result<Self> {
        let k = forest.attribute_index(attribute)?;
        let mut obs = Observed {
            y: Vec::new(),
            degree: Vec::new(),
            parents: forest.parents(),
            included: Vec::with_capacity(forest.len()),
            values: Vec::with_capacity(forest.len()),
            excluded: 0,
        };
        for r in forest.records() {
            if r.degree == 0 {
                return Err(Error::Precondition(format!(
                    "record {} has degree 0",
                    r.sample_index
                )));
            }
            let v = r.attributes[k];
            obs.values.push(v);
            obs.included.push(v.is_some());
            match v {
                Some(y) => {
                    obs.y.push(y);
                    obs.degree.push(r.degree);
                }
                None => obs.excluded += 1,
            }
        }
        if obs.excluded > 0 {
            log::warn!(
                "{} of {} records lack `{attribute}` and are excluded",
                obs.excluded,
                forest.len()
            );
        }
        if obs.y.is_empty() {
            return Err(Error::Precondition(format!("no record has a value for `{attribute}`")));
        }
        Ok(obs)
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn degenerate(&self) -> bool {
        self.y.iter().all(|&v| v == self.y[0])
    }

    fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            sample_size: self.len(),
            excluded_missing: self.excluded,
            degenerate: self.degenerate(),
            ..Default::default()
        }
    }

    fn weights<T: Real>(&self) -> Vec<T> {
        let inv: Vec<T> = self.degree.iter().map(|&d| T::one() / T::from_count(d)).collect();
        let total = inv.iter().fold(T::zero(), |a, &b| a + b);
        inv.into_iter().map(|w| w / total).collect()
    }

    fn mean<T: Real>(&self) -> T {
        weighted_mean(&self.y, &self.weights::<T>())
    }

    /// `S/(S-1) * sum_i w_i (y_i - mu)^2` with inverse-degree weights.
    fn gamma0<T: Real>(&self) -> Result<T> {
        let s = self.len();
        if s < 2 {
            return Err(Error::Precondition("variance needs at least two records".into()));
        }
        let w = self.weights::<T>();
        let mu = weighted_mean(&self.y, &w);
        let ss = self
            .y
            .iter()
            .zip(&w)
            .map(|(&y, &w)| {
                let c = T::from_count(y as usize) - mu;
                w * c * c
            })
            .fold(T::zero(), |a, b| a + b);
        Ok(ss * T::from_count(s) / T::from_count(s - 1))
    }
}

fn weighted_mean<T: Real>(y: &[u8], w: &[T]) -> T {
    y.iter()
        .zip(w)
        .filter(|(&y, _)| y == 1)
        .fold(T::zero(), |a, (_, &w)| a + w)
}

/// Volz–Heckathorn mean: `sum(Y_j / d_j) / sum(1 / d_j)`.
pub fn vh_mean<T: Real>(forest: &RecruitmentForest, attribute: &str) -> Result<T> {
    Ok(Observed::new(forest, attribute)?.mean())
}

/// `(1/S) sum_i pi_i (y_i - mu_pi)^2` over a whole population with
/// selection probabilities `pi`.
pub fn srs_variance_population<T: Real>(values: &[T], probabilities: &[T], s: usize) -> Result<T> {
    if values.is_empty() || values.len() != probabilities.len() || s == 0 {
        return Err(Error::InvalidInput("values and probabilities must be nonempty and aligned".into()));
    }
    let total = probabilities.iter().fold(T::zero(), |a, &b| a + b);
    if (total - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::InvalidInput("selection probabilities must sum to 1".into()));
    }
    let mu = values.iter().zip(probabilities).fold(T::zero(), |a, (&y, &p)| a + y * p);
    let ss = values
        .iter()
        .zip(probabilities)
        .fold(T::zero(), |a, (&y, &p)| a + p * (y - mu) * (y - mu));
    Ok(ss / T::from_count(s))
}

/// `(1/(S-1)) sum_i pi_i (y_i - mu_pi)^2` over a sample; `pi` defaults to `1/S`.
pub fn srs_variance_sample<T: Real>(values: &[T], probabilities: Option<&[T]>) -> Result<T> {
    let s = values.len();
    if s < 2 {
        return Err(Error::Precondition("sample variance needs at least two values".into()));
    }
    let uniform = vec![T::one() / T::from_count(s); s];
    let pi = probabilities.unwrap_or(&uniform);
    Ok(srs_variance_population(values, pi, s)? * T::from_count(s) / T::from_count(s - 1))
}

/// `p(1-p)/S`, the denominator of binary design effects.
pub fn srs_variance_binary<T: Real>(p: T, s: usize) -> T {
    p * (T::one() - p) / T::from_count(s)
}

/// Category transitions fitted from a recruitment forest.
///
/// States of an order-`p` chain are the last `p` categories along a
/// recruitment path, oldest first, read as a binary number: for `p = 2`
/// the states are `00, 01, 10, 11`. A state can only move to states that
/// share its last `p - 1` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCategoryChain<T: Real> {
    order: usize,
    counts: DMatrix<u64>,
    matrix: DMatrix<T>,
    values: Vec<T>,
    state_distribution: DVector<T>,
    fallback_rows: Vec<usize>,
}

impl<T: Real> EmpiricalCategoryChain<T> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn states(&self) -> usize {
        1 << self.order
    }

    /// Observed transition counts.
    pub fn counts(&self) -> &DMatrix<u64> {
        &self.counts
    }

    /// Row-normalized counts, with empty rows filled from lower orders.
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// Category of each state (its most recent coordinate).
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Frequency of each state among sampled records.
    pub fn state_distribution(&self) -> &DVector<T> {
        &self.state_distribution
    }

    pub fn fallback_rows(&self) -> &[usize] {
        &self.fallback_rows
    }

    /// For order 1: the chain of the symmetrized counts `(N + N')/2` and
    /// its stationary distribution, with respect to which it is reversible.
    /// `None` if some category never takes part in a transition.
    pub fn symmetrized(&self) -> Option<(DMatrix<T>, DVector<T>)> {
        let k = self.states();
        let sym = DMatrix::from_fn(k, k, |i, j| {
            T::from_count((self.counts[(i, j)] + self.counts[(j, i)]) as usize) / T::lit(2.0)
        });
        let rows: Vec<T> = (0..k).map(|i| sym.row(i).sum()).collect();
        if rows.iter().any(|r| *r <= T::zero()) {
            return None;
        }
        let total = rows.iter().fold(T::zero(), |a, &b| a + b);
        let matrix = DMatrix::from_fn(k, k, |i, j| sym[(i, j)] / rows[i]);
        let pi = DVector::from_iterator(k, rows.iter().map(|&r| r / total));
        Some((matrix, pi))
    }

    fn to_rows(m: &DMatrix<T>) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().map(|x| x.as_f64()).collect())
            .collect()
    }
}

/// Ancestor path ending at `r`, oldest first, if `len` records long and
/// fully observed.
fn ancestor_path(obs: &Observed, r: usize, len: usize, buf: &mut Vec<u8>) -> bool {
    buf.clear();
    let mut cur = Some(r);
    for _ in 0..len {
        match cur {
            Some(i) if obs.included[i] => {
                buf.push(obs.values[i].unwrap_or(0));
                cur = obs.parents[i];
            }
            _ => return false,
        }
    }
    buf.reverse();
    true
}

fn encode(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

fn fit_chain<T: Real>(obs: &Observed, order: usize) -> Result<EmpiricalCategoryChain<T>> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidInput(format!("chain order must be 1, 2 or 3, not {order}")));
    }
    // next[q][s] = counts of the next category after order-q state s.
    let mut next: Vec<Vec<[u64; 2]>> = (0..=order).map(|q| vec![[0; 2]; 1 << q]).collect();
    let mut state_counts = vec![0u64; 1 << order];
    let mut buf = Vec::with_capacity(order + 1);
    for r in 0..obs.parents.len() {
        if ancestor_path(obs, r, order, &mut buf) {
            state_counts[encode(&buf)] += 1;
        }
        for (q, table) in next.iter_mut().enumerate() {
            if ancestor_path(obs, r, q + 1, &mut buf) {
                let (&z, from) = buf.split_last().expect("nonempty path");
                table[encode(from)][z as usize] += 1;
            }
        }
    }
    if next[order].iter().all(|c| c[0] + c[1] == 0) {
        return Err(Error::Precondition(format!(
            "no observed recruitment paths of length {} for an order-{order} chain",
            order + 1
        )));
    }
    let k = 1 << order;
    let mask = k - 1;
    let prob = |mut q: usize, mut s: usize, z: usize| -> T {
        loop {
            let c = next[q][s];
            let n = c[0] + c[1];
            if n > 0 {
                return T::from_count(c[z] as usize) / T::from_count(n as usize);
            }
            // Forget the oldest coordinate.
            q -= 1;
            s &= (1 << q) - 1;
        }
    };
    let mut counts = DMatrix::zeros(k, k);
    let mut matrix = DMatrix::zeros(k, k);
    let mut fallback_rows = Vec::new();
    for s in 0..k {
        let c = next[order][s];
        if c[0] + c[1] == 0 {
            fallback_rows.push(s);
        }
        for z in 0..2 {
            let t = ((s << 1) | z) & mask;
            counts[(s, t)] = c[z];
            matrix[(s, t)] = prob(order, s, z);
        }
    }
    let total: u64 = state_counts.iter().sum();
    let state_distribution = DVector::from_iterator(
        k,
        state_counts
            .iter()
            .map(|&c| T::from_count(c as usize) / T::from_count(total.max(1) as usize)),
    );
    Ok(EmpiricalCategoryChain {
        order,
        counts,
        matrix,
        values: (0..k).map(|s| T::from_count(s & 1)).collect(),
        state_distribution,
        fallback_rows,
    })
}

/// Fits an order-`order` category chain from recruiter → recruit paths.
pub fn fit_category_chain<T: Real>(
    forest: &RecruitmentForest,
    attribute: &str,
    order: usize,
) -> Result<EmpiricalCategoryChain<T>> {
    fit_chain(&Observed::new(forest, attribute)?, order)
}

/// Ordered pairs of observed records per sample-order lag: `h[t] = 2(S - t)`.
pub fn sample_order_histogram(s: usize) -> Vec<u64> {
    (0..s).map(|t| if t == 0 { 0 } else { 2 * (s - t) as u64 }).collect()
}

/// Ordered pairs of included records per recruitment-tree distance.
/// `parents[i] < i` for every recruit; pairs in different trees are not
/// counted. Index 0 is always 0.
pub fn forest_lag_histogram(parents: &[Option<usize>], included: &[bool]) -> Vec<u64> {
    let n = parents.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut branching = vec![false; n];
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(i);
            branching[p] |= children[p].len() > 1;
        }
    }
    let mut h: Vec<u64> = vec![0];
    let bump = |h: &mut Vec<u64>, t: usize, x: u64| {
        if x == 0 {
            return;
        }
        if h.len() <= t {
            h.resize(t + 1, 0);
        }
        h[t] += x;
    };

    // Unbranched, fully observed trees are paths: 2(n - t) pairs at lag t.
    let mut tree_of = vec![0usize; n];
    let mut tree_simple: Vec<bool> = Vec::new();
    let mut tree_size: Vec<usize> = Vec::new();
    for i in 0..n {
        let t = match parents[i] {
            None => {
                tree_simple.push(true);
                tree_size.push(0);
                tree_simple.len() - 1
            }
            Some(p) => tree_of[p],
        };
        tree_of[i] = t;
        tree_size[t] += 1;
        tree_simple[t] &= !branching[i] && included[i];
    }
    for (t, &simple) in tree_simple.iter().enumerate() {
        if simple {
            for lag in 1..tree_size[t] {
                bump(&mut h, lag, 2 * (tree_size[t] - lag) as u64);
            }
        }
    }

    // Remaining trees: merge per-depth counts bottom-up. Arrays are stored
    // reversed (the subtree root is last) so the longest child's array can
    // be extended in place.
    let mut depth: Vec<Option<Vec<u64>>> = vec![None; n];
    for u in (0..n).rev() {
        if tree_simple[tree_of[u]] {
            continue;
        }
        let inc = included[u] as u64;
        let heavy = children[u]
            .iter()
            .copied()
            .max_by_key(|&c| (depth[c].as_ref().map_or(0, Vec::len), std::cmp::Reverse(c)));
        let mut a = heavy.and_then(|c| depth[c].take()).unwrap_or_default();
        if inc > 0 {
            let len = a.len();
            for (idx, &x) in a.iter().enumerate() {
                bump(&mut h, len - idx, 2 * x);
            }
        }
        a.push(inc);
        for &c in &children[u] {
            if Some(c) == heavy {
                continue;
            }
            let b = depth[c].take().unwrap_or_default();
            let (la, lb) = (a.len(), b.len());
            // b at depth j below c is j + 1 below u.
            for (jb, &y) in b.iter().enumerate() {
                if y == 0 {
                    continue;
                }
                let j = lb - 1 - jb + 1;
                for (ia, &x) in a.iter().enumerate() {
                    bump(&mut h, la - 1 - ia + j, 2 * x * y);
                }
            }
            for (jb, &y) in b.iter().enumerate() {
                let j = lb - 1 - jb + 1;
                a[la - 1 - j] += y;
            }
        }
        depth[u] = Some(a);
    }
    h
}

/// `gamma_0 / S + (1/S^2) sum_t h[t] gamma_t`.
fn assemble<T: Real>(gamma0: T, h: &[u64], gamma: impl Fn(usize) -> T, s: usize) -> T {
    let sf = T::from_count(s);
    let mut cross = T::zero();
    for (t, &n) in h.iter().enumerate().skip(1) {
        if n > 0 {
            cross += T::from_count(n as usize) * gamma(t);
        }
    }
    gamma0 / sf + cross / (sf * sf)
}

/// Included-record view of the forest's parent links, for tree lags.
fn observed_histogram(obs: &Observed) -> Vec<u64> {
    forest_lag_histogram(&obs.parents, &obs.included)
}

/// The order-1 chain the VHE decomposes, with its stationary distribution.
fn vhe_chain<T: Real>(fit: &EmpiricalCategoryChain<T>) -> Result<(DMatrix<T>, DVector<T>)> {
    if let Some(pair) = fit.symmetrized() {
        return Ok(pair);
    }
    // A category missing from every transition: use the fitted rows, which
    // fall back to the recruit distribution. Two-state chains are
    // reversible with respect to their own stationary distribution.
    let pi = spectral::stationary_of(fit.matrix())?;
    Ok((fit.matrix().clone(), pi))
}

fn first_order_estimate<T: Real>(
    obs: &Observed,
    estimator: Estimator,
    h: &[u64],
) -> Result<VarianceEstimate<T>> {
    let mut diag = obs.diagnostics();
    let mean = obs.mean::<T>();
    diag.order = Some(1);
    if diag.degenerate {
        return Ok(VarianceEstimate::new(estimator, mean, T::zero(), diag));
    }
    let fit = fit_chain::<T>(obs, 1)?;
    let (matrix, pi) = vhe_chain(&fit)?;
    let gamma0 = obs.gamma0::<T>()?;
    let s = obs.len();
    let spectral = if pi.iter().all(|&p| p > T::lit(1e-12)) {
        let decomp = spectral::decompose(&matrix, &pi)?;
        let irreducible = decomp.second_largest().is_none_or(|l| l < T::one() - T::lit(1e-9));
        irreducible.then_some(decomp)
    } else {
        None
    };
    let variance = match spectral {
        Some(decomp) => {
            let proj = ProjectionCoefficients::new(&decomp, fit.values())?;
            assemble(gamma0, h, |t| spectral::lag_covariance(&proj, &decomp, t as u64), s)
        }
        None => {
            // A category that is never recruited is transient, and one that
            // never recruits across is absorbing; either way the unit
            // eigenvalue is not simple, so lag covariances are taken directly.
            let gamma = spectral::chain_autocovariances(&matrix, &pi, fit.values(), h.len())?;
            assemble(gamma0, h, |t| gamma[t], s)
        }
    };
    diag.fallback_rows = fit.fallback_rows().to_vec();
    diag.chain = Some(EmpiricalCategoryChain::to_rows(&matrix));
    if estimator == Estimator::Vhe {
        diag.closed_form_check = Some(closed_form_check(obs, &matrix).as_f64());
    }
    Ok(VarianceEstimate::new(estimator, mean, variance, diag))
}

/// The closed form written in Volz–Heckathorn's notation:
/// `sum w (y - mu)^2 / (S(S-1)) + mu^2 / S * (1 - S + sum_{i!=j} (C^|i-j|)_11 / sum Y)`.
fn closed_form_check<T: Real>(obs: &Observed, c: &DMatrix<T>) -> T {
    let s = obs.len();
    let sf = T::from_count(s);
    let w = obs.weights::<T>();
    let mu = weighted_mean(&obs.y, &w);
    let ss = obs.y.iter().zip(&w).fold(T::zero(), |a, (&y, &w)| {
        let d = T::from_count(y as usize) - mu;
        a + w * d * d
    });
    let ones = obs.y.iter().filter(|&&y| y == 1).count();
    let mut power = c.clone();
    let mut pair_sum = T::zero();
    for t in 1..s {
        pair_sum += T::from_count(2 * (s - t)) * power[(1, 1)];
        power = &power * c;
    }
    ss / (sf * (sf - T::one()))
        + mu * mu / sf * (T::one() - sf + pair_sum / T::from_count(ones.max(1)))
}

/// VHE: fitted 2-state chain, lags measured in sample order.
pub fn vhe_variance<T: Real>(forest: &RecruitmentForest, attribute: &str) -> Result<VarianceEstimate<T>> {
    let obs = Observed::new(forest, attribute)?;
    let h = sample_order_histogram(obs.len());
    first_order_estimate(&obs, Estimator::Vhe, &h)
}

/// VHE with lags measured as recruitment-tree distances; records in
/// different trees are uncorrelated.
pub fn vhe_wbc_variance<T: Real>(forest: &RecruitmentForest, attribute: &str) -> Result<VarianceEstimate<T>> {
    let obs = Observed::new(forest, attribute)?;
    let h = observed_histogram(&obs);
    first_order_estimate(&obs, Estimator::VheWbc, &h)
}

/// Tree-distance VHE on an order-2 or order-3 category chain.
pub fn vhe_hom_variance<T: Real>(
    forest: &RecruitmentForest,
    attribute: &str,
    order: usize,
) -> Result<VarianceEstimate<T>> {
    let estimator = match order {
        2 => Estimator::VheHom2,
        3 => Estimator::VheHom3,
        _ => return Err(Error::InvalidInput(format!("higher-order VHE takes order 2 or 3, not {order}"))),
    };
    let obs = Observed::new(forest, attribute)?;
    let mut diag = obs.diagnostics();
    let mean = obs.mean::<T>();
    diag.order = Some(order);
    if diag.degenerate {
        return Ok(VarianceEstimate::new(estimator, mean, T::zero(), diag));
    }
    let fit = fit_chain::<T>(&obs, order)?;
    let h = observed_histogram(&obs);
    let gamma = spectral::chain_autocovariances(
        fit.matrix(),
        fit.state_distribution(),
        fit.values(),
        h.len().saturating_sub(1),
    )?;
    let gamma0 = obs.gamma0::<T>()?;
    let variance = assemble(gamma0, &h, |t| gamma[t], obs.len());
    diag.fallback_rows = fit.fallback_rows().to_vec();
    diag.chain = Some(EmpiricalCategoryChain::to_rows(fit.matrix()));
    Ok(VarianceEstimate::new(estimator, mean, variance, diag))
}

/// Salganik-style bootstrap: synthetic chains resampled from per-category
/// urns of recruits, each summarized by its VH mean.
pub fn sbe_variance<T: Real, R: Rng + ?Sized>(
    forest: &RecruitmentForest,
    attribute: &str,
    replicates: usize,
    rng: &mut R,
) -> Result<VarianceEstimate<T>> {
    if replicates < 2 {
        return Err(Error::InvalidInput("bootstrap needs at least two replicates".into()));
    }
    let obs = Observed::new(forest, attribute)?;
    let mut diag = obs.diagnostics();
    diag.bootstrap_replicates = Some(replicates);
    let mean = obs.mean::<T>();
    // Draw the base seed even when degenerate so callers' streams stay aligned.
    let base: u64 = rng.random();
    if diag.degenerate {
        return Ok(VarianceEstimate::new(Estimator::Sbe, mean, T::zero(), diag));
    }

    // Urns of observed recruits (positions among observed records),
    // keyed by their recruiter's category.
    let mut position = vec![usize::MAX; obs.parents.len()];
    let mut k = 0;
    for (i, &inc) in obs.included.iter().enumerate() {
        if inc {
            position[i] = k;
            k += 1;
        }
    }
    let mut urns: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, p) in obs.parents.iter().enumerate() {
        if let Some(p) = *p {
            if obs.included[i] && obs.included[p] {
                urns[obs.y[position[p]] as usize].push(position[i]);
            }
        }
    }
    let pooled: Vec<usize> = (0..obs.len()).collect();
    for (c, urn) in urns.iter().enumerate() {
        if urn.is_empty() {
            log::debug!("no recruits of category-{c} recruiters; drawing from the whole sample");
            diag.pooled_urn = true;
        }
    }
    let inv: Vec<T> = obs.degree.iter().map(|&d| T::one() / T::from_count(d)).collect();
    let s = obs.len();

    let stats: Vec<T> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(r as u64);
            let mut cur = rng.random_range(0..s);
            let (mut num, mut den) = (T::zero(), T::zero());
            for step in 0..s {
                if step > 0 {
                    let urn = &urns[obs.y[cur] as usize];
                    let urn = if urn.is_empty() { &pooled } else { urn };
                    cur = urn[rng.random_range(0..urn.len())];
                }
                den += inv[cur];
                if obs.y[cur] == 1 {
                    num += inv[cur];
                }
            }
            num / den
        })
        .collect();
    let bf = T::from_count(replicates);
    let avg = stats.iter().fold(T::zero(), |a, &b| a + b) / bf;
    let ss = stats.iter().fold(T::zero(), |a, &b| a + (b - avg) * (b - avg));
    Ok(VarianceEstimate::new(Estimator::Sbe, mean, ss / (bf - T::one()), diag))
}

/// Runs one estimator; `replicates` only matters for the SBE.
pub fn estimate<T: Real, R: Rng + ?Sized>(
    forest: &RecruitmentForest,
    attribute: &str,
    estimator: Estimator,
    replicates: usize,
    rng: &mut R,
) -> Result<VarianceEstimate<T>> {
    match estimator {
        Estimator::Vhe => vhe_variance(forest, attribute),
        Estimator::VheWbc => vhe_wbc_variance(forest, attribute),
        Estimator::VheHom2 => vhe_hom_variance(forest, attribute, 2),
        Estimator::VheHom3 => vhe_hom_variance(forest, attribute, 3),
        Estimator::Sbe => sbe_variance(forest, attribute, replicates, rng),
    }
}
