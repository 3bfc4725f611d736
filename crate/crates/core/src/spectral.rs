//! Eigendecomposition of reversible walk operators and the exact
//! autocovariance / sampling variance of a stationary random walk.
//!
//! For a chain `M` reversible with respect to `pi`, the operator
//! `M* = P^{1/2} M P^{-1/2}` (with `P = diag(pi)`) is symmetric and shares
//! the eigenvalues of `M`. Writing `alpha_k = v_k . (sqrt(pi) * (Y - mu))`,
//! the lag-`t` covariance of `Y` along a stationary walk is
//! `gamma_t = sum_{k>=2} alpha_k^2 lambda_k^t`, and the variance of the mean
//! of `S` consecutive steps is `(1/S^2) sum_i sum_j gamma_{|i-j|}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{pow_lag, Real};

/// Detailed-balance tolerance accepted by [`decompose`].
pub const REVERSIBILITY_TOL: f64 = 1e-8;

/// Below this sample size the lag sum is evaluated term by term.
const CLOSED_FORM_MIN_S: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition<T: Real> {
    /// Eigenvalues in decreasing order; `eigenvalues[0]` is the unit eigenvalue.
    eigenvalues: DVector<T>,
    /// Orthonormal eigenvectors of the symmetrized operator, one per column.
    eigenvectors: DMatrix<T>,
    stationary: DVector<T>,
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.eigenvectors
    }

    pub fn stationary(&self) -> &DVector<T> {
        &self.stationary
    }

    /// Second largest eigenvalue (algebraic order).
    pub fn second_largest(&self) -> Option<T> {
        self.eigenvalues.get(1).copied()
    }

    /// Largest modulus among the non-unit eigenvalues.
    pub fn second_largest_modulus(&self) -> Option<T> {
        self.eigenvalues
            .iter()
            .skip(1)
            .map(|l| l.abs())
            .reduce(|a, b| if b > a { b } else { a })
    }

    /// Eigenvalues ordered by decreasing modulus.
    pub fn eigenvalues_by_modulus(&self) -> Vec<T> {
        let mut v: Vec<T> = self.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap_or(std::cmp::Ordering::Equal));
        v
    }

    /// `M = sum_k lambda_k P^{-1/2} v_k v_k' P^{1/2}`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        self.power(1)
    }

    /// `M^s` from the eigen-expansion.
    pub fn power(&self, s: u64) -> DMatrix<T> {
        let n = self.dim();
        let root: Vec<T> = self.stationary.iter().map(|p| p.sqrt()).collect();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            let lam = pow_lag(self.eigenvalues[k], s);
            let v = self.eigenvectors.column(k);
            for i in 0..n {
                let left = lam * v[i] / root[i];
                for j in 0..n {
                    out[(i, j)] += left * v[j] * root[j];
                }
            }
        }
        out
    }
}

/// `base`, widened for low-precision scalars.
fn scalar_tol<T: Real>(base: f64) -> T {
    let floor = T::default_epsilon() * T::lit(1e3);
    let b = T::lit(base);
    if floor > b { floor } else { b }
}

fn stochastic_check<T: Real>(chain: &DMatrix<T>, stationary: &DVector<T>) -> Result<()> {
    let n = chain.nrows();
    if n == 0 || chain.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "transition matrix must be square and nonempty, got {}x{}",
            chain.nrows(),
            chain.ncols()
        )));
    }
    if stationary.len() != n {
        return Err(Error::InvalidInput(format!(
            "stationary vector has {} entries for {n} states",
            stationary.len()
        )));
    }
    let tol = scalar_tol::<T>(1e-9);
    for i in 0..n {
        let row = chain.row(i);
        if row.iter().any(|&x| x < T::zero()) || (row.sum() - T::one()).abs() > tol {
            return Err(Error::InvalidInput(format!("row {i} is not a probability vector")));
        }
    }
    if stationary.iter().any(|&p| p <= T::zero()) {
        return Err(Error::Reducible("stationary distribution has a zero entry".into()));
    }
    if (stationary.sum() - T::one()).abs() > tol {
        return Err(Error::InvalidInput("stationary vector does not sum to 1".into()));
    }
    Ok(())
}

/// Largest `|pi_i M_ij - pi_j M_ji|` over state pairs.
pub fn detailed_balance_violation<T: Real>(chain: &DMatrix<T>, stationary: &DVector<T>) -> T {
    let n = chain.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (stationary[i] * chain[(i, j)] - stationary[j] * chain[(j, i)]).abs();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Full eigensystem of a chain reversible with respect to `stationary`.
///
/// Fails with [`Error::NonReversible`] when detailed balance is violated by
/// more than [`REVERSIBILITY_TOL`]; the exact spectral variance is not
/// defined by this route for such chains.
pub fn decompose<T: Real>(
    chain: &DMatrix<T>,
    stationary: &DVector<T>,
) -> Result<SpectralDecomposition<T>> {
    stochastic_check(chain, stationary)?;
    let violation = detailed_balance_violation(chain, stationary);
    if violation > scalar_tol::<T>(REVERSIBILITY_TOL) {
        return Err(Error::NonReversible {
            violation: violation.as_f64(),
        });
    }
    let n = chain.nrows();
    let root: Vec<T> = stationary.iter().map(|p| p.sqrt()).collect();
    let mut sym = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] = root[i] * chain[(i, j)] / root[j];
        }
    }
    let sym = (&sym + sym.transpose()) * T::lit(0.5);
    let eig = SymmetricEigen::try_new(sym, T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &k) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(k).into_owned();
        // Orient each vector so its largest-magnitude entry is positive;
        // the leading one then matches sqrt(pi).
        let pivot = col
            .iter()
            .copied()
            .reduce(|a, b| if b.abs() > a.abs() { b } else { a })
            .unwrap_or_else(T::one);
        if pivot < T::zero() {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }
    if n > 0 && (eigenvalues[0] - T::one()).abs() > scalar_tol::<T>(1e-8) {
        return Err(Error::Numerical(format!(
            "leading eigenvalue {} differs from 1",
            eigenvalues[0].as_f64()
        )));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        stationary: stationary.clone(),
    })
}

/// `p0 M^s` through the eigen-expansion.
pub fn step_distribution<T: Real>(
    decomp: &SpectralDecomposition<T>,
    p0: &DVector<T>,
    s: u64,
) -> DVector<T> {
    let n = decomp.dim();
    let root: Vec<T> = decomp.stationary.iter().map(|p| p.sqrt()).collect();
    let mut out = DVector::zeros(n);
    for k in 0..n {
        let v = decomp.eigenvectors.column(k);
        let weight: T = (0..n).map(|i| p0[i] * v[i] / root[i]).fold(T::zero(), |a, b| a + b);
        let coef = weight * pow_lag(decomp.eigenvalues[k], s);
        for j in 0..n {
            out[j] += coef * v[j] * root[j];
        }
    }
    out
}

/// Projections of the centred variable onto the eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionCoefficients<T: Real> {
    /// `alpha_k` for every eigenvector; `alpha[0]` is zero up to rounding.
    pub alpha: Vec<T>,
    /// Stationary mean of `Y`.
    pub mean: T,
    /// `gamma_0 = sum_{k>=2} alpha_k^2`, the pi-weighted variance of `Y`.
    pub gamma0: T,
}

impl<T: Real> ProjectionCoefficients<T> {
    pub fn new(decomp: &SpectralDecomposition<T>, values: &[T]) -> Result<Self> {
        let n = decomp.dim();
        if values.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} values for {n} states",
                values.len()
            )));
        }
        let pi = &decomp.stationary;
        let mean = (0..n).map(|i| pi[i] * values[i]).fold(T::zero(), |a, b| a + b);
        let centred: DVector<T> =
            DVector::from_iterator(n, (0..n).map(|i| pi[i].sqrt() * (values[i] - mean)));
        let alpha: Vec<T> = (0..n)
            .map(|k| decomp.eigenvectors.column(k).dot(&centred))
            .collect();
        let gamma0 = alpha.iter().skip(1).map(|a| *a * *a).fold(T::zero(), |a, b| a + b);
        Ok(ProjectionCoefficients { alpha, mean, gamma0 })
    }
}

/// `gamma_t = sum_{k>=2} alpha_k^2 lambda_k^t`.
pub fn lag_covariance<T: Real>(
    proj: &ProjectionCoefficients<T>,
    decomp: &SpectralDecomposition<T>,
    lag: u64,
) -> T {
    proj.alpha
        .iter()
        .zip(decomp.eigenvalues.iter())
        .skip(1)
        .map(|(a, l)| *a * *a * pow_lag(*l, lag))
        .fold(T::zero(), |acc, x| acc + x)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum VarianceMethod {
    /// Closed form for large samples, lag sum otherwise.
    #[default]
    Auto,
    LagSum,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RwsVariance<T: Real> {
    pub variance: T,
    pub sd: T,
    /// `variance * S / gamma_0`; for binary `Y` this is the ratio to `p(1-p)/S`.
    pub design_effect: Option<T>,
}

impl<T: Real> RwsVariance<T> {
    pub(crate) fn from_variance(variance: T, gamma0: T, s: usize) -> Self {
        let variance = variance.max(T::zero());
        let design_effect = (gamma0 > T::zero()).then(|| variance * T::from_count(s) / gamma0);
        RwsVariance {
            variance,
            sd: variance.sqrt(),
            design_effect,
        }
    }
}

/// `sum_{t=1}^{S-1} (1 - t/S) x^t` in closed form.
fn weighted_geometric<T: Real>(x: T, s: usize) -> T {
    let sf = T::from_count(s);
    let one = T::one();
    let gap = one - x;
    if gap.abs() < T::lit(1e-6) {
        // Near x = 1 the closed form cancels badly.
        let mut acc = T::zero();
        let mut p = one;
        for t in 1..s {
            p *= x;
            acc += (one - T::from_count(t) / sf) * p;
        }
        return acc;
    }
    let xs1 = pow_lag(x, (s - 1) as u64);
    let xs = xs1 * x;
    let plain = x * (one - xs1) / gap;
    let ramp = x * (one - sf * xs1 + (sf - one) * xs) / (gap * gap);
    plain - ramp / sf
}

/// Exact variance of the mean of `S` consecutive stationary walk steps:
/// `(1/S)[gamma_0 + 2 sum_{t=1}^{S-1} (1 - t/S) gamma_t]`.
pub fn exact_rws_variance<T: Real>(
    proj: &ProjectionCoefficients<T>,
    decomp: &SpectralDecomposition<T>,
    s: usize,
    method: VarianceMethod,
) -> Result<RwsVariance<T>> {
    if s < 2 {
        return Err(Error::Precondition("sample size must be at least 2".into()));
    }
    let closed = match method {
        VarianceMethod::Auto => s >= CLOSED_FORM_MIN_S,
        VarianceMethod::LagSum => false,
        VarianceMethod::ClosedForm => true,
    };
    let sf = T::from_count(s);
    let two = T::lit(2.0);
    let tail = if closed {
        proj.alpha
            .iter()
            .zip(decomp.eigenvalues.iter())
            .skip(1)
            .map(|(a, l)| *a * *a * weighted_geometric(*l, s))
            .fold(T::zero(), |acc, x| acc + x)
    } else {
        (1..s)
            .map(|t| (T::one() - T::from_count(t) / sf) * lag_covariance(proj, decomp, t as u64))
            .fold(T::zero(), |acc, x| acc + x)
    };
    let variance = (proj.gamma0 + two * tail) / sf;
    Ok(RwsVariance::from_variance(variance, proj.gamma0, s))
}

/// Lag covariances `gamma_0..=gamma_max_lag` of `Y` along a stationary chain,
/// by repeated application of `P` to the centred values. Works for chains
/// that are not reversible (higher-order category chains).
pub fn chain_autocovariances<T: Real>(
    chain: &DMatrix<T>,
    weights: &DVector<T>,
    values: &[T],
    max_lag: usize,
) -> Result<Vec<T>> {
    let n = chain.nrows();
    if chain.ncols() != n || weights.len() != n || values.len() != n {
        return Err(Error::InvalidInput("dimension mismatch in chain autocovariance".into()));
    }
    let mean = (0..n).map(|i| weights[i] * values[i]).fold(T::zero(), |a, b| a + b);
    let centred = DVector::from_iterator(n, values.iter().map(|&y| y - mean));
    let left = weights.component_mul(&centred);
    let mut f = centred;
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(left.dot(&f));
    for _ in 0..max_lag {
        f = chain * f;
        out.push(left.dot(&f));
    }
    Ok(out)
}

/// Stationary distribution of an irreducible chain, by solving `pi (M - I) = 0`
/// with the normalization replacing one equation.
pub fn stationary_of<T: Real>(chain: &DMatrix<T>) -> Result<DVector<T>> {
    let n = chain.nrows();
    if n == 0 || chain.ncols() != n {
        return Err(Error::InvalidInput("transition matrix must be square".into()));
    }
    let mut a = chain.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = T::one();
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = T::one();
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Reducible("stationary distribution is not unique".into()))?;
    if pi.iter().any(|&p| p < -T::lit(1e-10)) {
        return Err(Error::Reducible("stationary solve produced negative mass".into()));
    }
    Ok(pi.map(|p| p.max(T::zero())))
}

/// Exact variance of the mean of `S` stationary steps of any finite chain,
/// from [`chain_autocovariances`].
pub fn exact_chain_variance<T: Real>(
    chain: &DMatrix<T>,
    stationary: &DVector<T>,
    values: &[T],
    s: usize,
) -> Result<RwsVariance<T>> {
    if s < 2 {
        return Err(Error::Precondition("sample size must be at least 2".into()));
    }
    let gamma = chain_autocovariances(chain, stationary, values, s - 1)?;
    let sf = T::from_count(s);
    let tail = (1..s)
        .map(|t| (T::one() - T::from_count(t) / sf) * gamma[t])
        .fold(T::zero(), |acc, x| acc + x);
    let variance = (gamma[0] + T::lit(2.0) * tail) / sf;
    Ok(RwsVariance::from_variance(variance, gamma[0], s))
}
