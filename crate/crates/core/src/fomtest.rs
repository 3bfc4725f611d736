//! Regression test of the first-order Markov (FOM) property.
//!
//! The regression is
//!
//! ```text
//! y = b0 + b1 Y_prev + b2 Y_prev2 + b3 Y_prev * Y_prev2 + e
//! ```
//!
//! and FOM is rejected when `b2 = b3 = 0` is rejected by a Wald F test with
//! heteroskedasticity-robust (HC1) covariance. At the network level
//! `Y_prev2` is an ego, `Y_prev` one of its alters and `y` the share of the
//! alter's neighbors with `Y = 1` (ego included). In a sample, the
//! grand-recruiter, recruiter and recruit play those roles, with `y` the
//! recruit's own value.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sampler::RecruitmentForest;

/// Columns tested jointly: the two-step-back value and the interaction.
pub const RESTRICTED: [usize; 2] = [2, 3];

/// Relative eigenvalue floor below which the design counts as rank-deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// The test rejects: the process is not first-order Markov.
    NotFom,
    /// Failure to reject; FOM is not ruled out.
    MayBeFom,
    /// The test could not be computed.
    Inconclusive,
}

impl Verdict {
    /// Aggregate tables fold inconclusive results into "may be FOM".
    pub fn counts_as_fom(self) -> bool {
        self != Verdict::NotFom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FomLevel {
    Network,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    /// HC1 sandwich covariance of the coefficients.
    pub covariance: Vec<Vec<f64>>,
    pub residual_sum_squares: f64,
    /// `None` when the fit has no residual variance or the restricted
    /// covariance block is singular.
    pub f_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub df: (usize, usize),
}

/// OLS with HC1 covariance and a Wald F test that the `restricted`
/// coefficients are jointly zero.
pub fn ols_robust_ftest(x: &DMatrix<f64>, y: &DVector<f64>, restricted: &[usize]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput("response length differs from design rows".into()));
    }
    if restricted.is_empty() || restricted.iter().any(|&c| c >= k) {
        return Err(Error::InvalidInput("restricted columns out of range".into()));
    }
    if n <= k {
        return Err(Error::Precondition(format!("{n} observations for {k} parameters")));
    }
    let xtx = x.tr_mul(x);
    // Judge rank on the column-scaled cross-product so units do not matter.
    let scale: Vec<f64> = (0..k).map(|j| xtx[(j, j)].sqrt()).collect();
    if scale.contains(&0.0) {
        return Err(Error::Numerical("design matrix has an all-zero column".into()));
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| xtx[(i, j)] / (scale[i] * scale[j]));
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if lo <= RANK_TOL * hi {
        return Err(Error::Numerical("design matrix is rank-deficient".into()));
    }
    let xtx_inv = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("cross-product matrix is not positive definite".into()))?
        .inverse();
    let beta = &xtx_inv * x.tr_mul(y);
    let resid = y - x * &beta;
    let rss = resid.norm_squared();
    let ybar = y.mean();
    let tss: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();

    let mut meat = DMatrix::<f64>::zeros(k, k);
    for (i, e) in resid.iter().enumerate() {
        let row = x.row(i);
        meat += (row.transpose() * row) * (e * e);
    }
    let hc1 = (&xtx_inv * meat * &xtx_inv) * (n as f64 / (n - k) as f64);

    let q = restricted.len();
    let df = (q, n - k);
    let degenerate = rss <= 1e-12 * tss.max(f64::MIN_POSITIVE) || rss == 0.0;
    let wald = if degenerate {
        None
    } else {
        let rb = DVector::from_iterator(q, restricted.iter().map(|&c| beta[c]));
        let block = DMatrix::from_fn(q, q, |a, b| hc1[(restricted[a], restricted[b])]);
        block
            .cholesky()
            .map(|c| rb.dot(&c.solve(&rb)) / q as f64)
            .filter(|f| f.is_finite())
    };
    let p_value = match wald {
        Some(f) => {
            let dist = FisherSnedecor::new(df.0 as f64, df.1 as f64)
                .map_err(|e| Error::Numerical(format!("F distribution: {e}")))?;
            Some(dist.sf(f).clamp(0.0, 1.0))
        }
        None => None,
    };
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        covariance: (0..k).map(|i| hc1.row(i).iter().copied().collect()).collect(),
        residual_sum_squares: rss,
        f_statistic: wald,
        p_value,
        df,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FomTestResult {
    pub level: FomLevel,
    /// `b0..b3`; empty when the fit failed.
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub f_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub df: Option<(usize, usize)>,
    pub observations: usize,
    pub verdict: Verdict,
    pub alpha: f64,
    /// Why the verdict is inconclusive, if it is.
    pub reason: Option<String>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn run(level: FomLevel, rows: Vec<[f64; 3]>, alpha: f64) -> FomTestResult {
    let n = rows.len();
    let mut result = FomTestResult {
        level,
        coefficients: Vec::new(),
        covariance: Vec::new(),
        f_statistic: None,
        p_value: None,
        df: None,
        observations: n,
        verdict: Verdict::Inconclusive,
        alpha,
        reason: None,
    };
    // Row layout: [y, Y_prev, Y_prev2].
    let x = DMatrix::from_fn(n, 4, |i, j| match j {
        0 => 1.0,
        1 => rows[i][1],
        2 => rows[i][2],
        _ => rows[i][1] * rows[i][2],
    });
    let y = DVector::from_iterator(n, rows.iter().map(|r| r[0]));
    match ols_robust_ftest(&x, &y, &RESTRICTED) {
        Ok(fit) => {
            result.verdict = match fit.p_value {
                Some(p) if p < alpha => Verdict::NotFom,
                Some(_) => Verdict::MayBeFom,
                None => {
                    result.reason = Some("no residual variance to test against".into());
                    Verdict::Inconclusive
                }
            };
            result.coefficients = fit.coefficients;
            result.covariance = fit.covariance;
            result.f_statistic = fit.f_statistic;
            result.p_value = fit.p_value;
            result.df = Some(fit.df);
        }
        Err(e) => result.reason = Some(e.to_string()),
    }
    result
}

/// One observation per ordered adjacent pair (ego, alter). Pairs with a
/// missing value at either end are skipped, as are missing values among
/// the alter's neighbors.
pub fn network_fom_test(g: &Graph, attribute: &str, alpha: f64) -> Result<FomTestResult> {
    check_alpha(alpha)?;
    let y = g.require_attribute(attribute)?;
    // Share of each node's labelled neighbors with Y = 1.
    let share: Vec<Option<f64>> = (0..g.node_count())
        .into_par_iter()
        .map(|j| {
            let (mut ones, mut known) = (0usize, 0usize);
            for &v in g.neighbors(j) {
                if let Some(val) = y[v] {
                    known += 1;
                    ones += val as usize;
                }
            }
            (known > 0).then(|| ones as f64 / known as f64)
        })
        .collect();
    let rows: Vec<[f64; 3]> = (0..g.node_count())
        .into_par_iter()
        .map(|i| {
            let Some(yi) = y[i] else { return Vec::new() };
            g.neighbors(i)
                .iter()
                .filter_map(|&j| Some([share[j]?, y[j]? as f64, yi as f64]))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect();
    Ok(run(FomLevel::Network, rows, alpha))
}

/// One observation per recruit with an observed recruiter and
/// grand-recruiter.
pub fn sample_fom_test(forest: &RecruitmentForest, attribute: &str, alpha: f64) -> Result<FomTestResult> {
    check_alpha(alpha)?;
    let y = forest.attribute_values(attribute)?;
    let parents = forest.parents();
    let rows: Vec<[f64; 3]> = (0..forest.len())
        .filter_map(|r| {
            let p = parents[r]?;
            let g = parents[p]?;
            Some([y[r]? as f64, y[p]? as f64, y[g]? as f64])
        })
        .collect();
    Ok(run(FomLevel::Sample, rows, alpha))
}
