//! Least-squares core: OLS with HC1 robust covariance, the first-stage
//! F-statistic, 2SLS, the Wald/LATE ratio, and the Granger causality F-test.
//!
//! All solves go through a column-pivoted QR factorization; rank deficiency
//! is flagged when a diagonal entry of R falls below 1e-10 relative to the
//! largest column norm.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::data::{sample_cov, sample_sd};
use crate::error::{Error, Result};

/// Relative tolerance on the R diagonal for declaring rank deficiency.
const RANK_TOL: f64 = 1e-10;

/// Result of an ordinary least-squares fit.
#[derive(Debug, Clone)]
pub struct LinearFit {
    /// Estimated coefficients, intercept first (design-matrix column order).
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual sum of squares.
    pub rss: f64,
    /// HC1 sandwich covariance of the coefficients (k x k).
    pub robust_covariance: DMatrix<f64>,
    pub n: usize,
    /// Regressor count including the intercept.
    pub k: usize,
}

impl LinearFit {
    /// Robust standard error of coefficient `j`.
    pub fn robust_se(&self, j: usize) -> f64 {
        self.robust_covariance[(j, j)].max(0.0).sqrt()
    }
}

/// A two-stage least-squares estimate for a single instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvEstimate {
    /// Estimated treatment effect (stage-2 coefficient on fitted treatment).
    pub beta: f64,
    /// HC1 standard error computed from the structural residuals.
    pub se: f64,
    /// Robust Wald statistic for the instrument in the first stage.
    pub first_stage_f: f64,
    pub n: usize,
}

/// Outcome of a Granger causality F-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub f_stat: f64,
    pub p_value: f64,
    pub lag: usize,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
    /// Pooled row count after per-entity lag trimming.
    pub n: usize,
}

/// One entity's paired series sampled at integer times.
///
/// Lag rows are built only where the required preceding times are present,
/// so gaps in the time index never bridge across missing years and lags
/// never cross entity boundaries.
#[derive(Debug, Clone)]
pub struct GrangerSegment {
    pub times: Vec<i64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl GrangerSegment {
    /// A contiguous series observed at times 0, 1, 2, ...
    pub fn contiguous(x: Vec<f64>, y: Vec<f64>) -> Self {
        let times = (0..x.len() as i64).collect();
        Self { times, x, y }
    }
}

/// Stack column slices (intercept first) into a design matrix.
pub fn design_with_intercept(columns: &[&[f64]]) -> Result<DMatrix<f64>> {
    let n = columns.first().map_or(0, |c| c.len());
    for c in columns {
        if c.len() != n {
            return Err(Error::Domain(format!(
                "design columns have mismatched lengths {} vs {n}",
                c.len()
            )));
        }
    }
    let mut x = DMatrix::zeros(n, columns.len() + 1);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (j, c) in columns.iter().enumerate() {
            x[(i, j + 1)] = c[i];
        }
    }
    Ok(x)
}

struct QrSolve {
    beta: DVector<f64>,
    xtx_inv: DMatrix<f64>,
}

/// Least-squares solve via column-pivoted QR, with the (X'X)^-1 factor
/// needed by the sandwich estimator.
fn qr_least_squares(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<QrSolve> {
    let n = x.nrows();
    let k = x.ncols();
    if n <= k {
        return Err(Error::InsufficientData(format!("n = {n} observations for k = {k} regressors")));
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    if lead == 0.0 {
        return Err(Error::Collinear("all-zero design matrix".into()));
    }
    for i in 0..k {
        if r[(i, i)].abs() <= RANK_TOL * lead {
            return Err(Error::Collinear(format!(
                "pivot {i} of {k} is below tolerance ({:.3e} vs {:.3e})",
                r[(i, i)].abs(),
                RANK_TOL * lead
            )));
        }
    }
    // X P = Q R  =>  beta = P R^-1 Q' y
    let mut beta = qr.q().transpose() * y;
    if !r.solve_upper_triangular_mut(&mut beta) {
        return Err(Error::Collinear("triangular solve failed".into()));
    }
    qr.p().inv_permute_rows(&mut beta);

    // (X'X)^-1 = P R^-1 R^-T P'
    let mut rinv = DMatrix::identity(k, k);
    for j in 0..k {
        let mut col = rinv.column_mut(j).clone_owned();
        if !r.solve_upper_triangular_mut(&mut col) {
            return Err(Error::Collinear("triangular inverse failed".into()));
        }
        rinv.set_column(j, &col);
    }
    let mut xtx_inv = &rinv * rinv.transpose();
    qr.p().inv_permute_rows(&mut xtx_inv);
    qr.p().inv_permute_columns(&mut xtx_inv);
    Ok(QrSolve { beta, xtx_inv })
}

fn hc1_sandwich(xtx_inv: &DMatrix<f64>, x: &DMatrix<f64>, residuals: &[f64]) -> DMatrix<f64> {
    let n = x.nrows();
    let k = x.ncols();
    let mut meat = DMatrix::zeros(k, k);
    for (i, e) in residuals.iter().enumerate() {
        let e2 = e * e;
        let row = x.row(i);
        for a in 0..k {
            let ra = row[a] * e2;
            for b in 0..k {
                meat[(a, b)] += ra * row[b];
            }
        }
    }
    let correction = n as f64 / (n - k) as f64;
    let mut cov = xtx_inv * meat * xtx_inv;
    cov *= correction;
    // enforce exact symmetry against accumulated roundoff
    for a in 0..k {
        for b in (a + 1)..k {
            let s = 0.5 * (cov[(a, b)] + cov[(b, a)]);
            cov[(a, b)] = s;
            cov[(b, a)] = s;
        }
    }
    cov
}

/// Ordinary least squares of `y` on a design matrix that already includes
/// its intercept column.
pub fn ols(y: &[f64], x: &DMatrix<f64>) -> Result<LinearFit> {
    if y.len() != x.nrows() {
        return Err(Error::Domain(format!(
            "y has {} rows but the design has {}",
            y.len(),
            x.nrows()
        )));
    }
    let yv = DVector::from_column_slice(y);
    let solve = qr_least_squares(&yv, x)?;
    let fitted = x * &solve.beta;
    let residuals: Vec<f64> = yv.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    let robust_covariance = hc1_sandwich(&solve.xtx_inv, x, &residuals);
    Ok(LinearFit {
        coefficients: solve.beta.iter().copied().collect(),
        residuals,
        rss,
        robust_covariance,
        n: x.nrows(),
        k: x.ncols(),
    })
}

/// HC1 sandwich covariance recomputed for a fit produced from `x`:
/// `(X'X)^-1 X' diag(e^2) X (X'X)^-1 * n/(n-k)`.
pub fn hc_covariance(fit: &LinearFit, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if fit.n != x.nrows() || fit.k != x.ncols() {
        return Err(Error::Domain("fit does not match the supplied design matrix".into()));
    }
    let yv = DVector::zeros(x.nrows());
    // reuse the factorization path solely for (X'X)^-1 and its rank check
    let solve = qr_least_squares(&yv, x)?;
    Ok(hc1_sandwich(&solve.xtx_inv, x, &fit.residuals))
}

fn check_nonconstant(name: &str, v: &[f64]) -> Result<()> {
    if sample_sd(v) == 0.0 {
        return Err(Error::ZeroVariance(format!("'{name}' is constant")));
    }
    Ok(())
}

/// Robust Wald statistic (beta / se)^2 for the instrument coefficient in the
/// regression of `t` on (intercept, z, covariates).
pub fn first_stage_f(t: &[f64], z: &[f64], covariates: &[&[f64]]) -> Result<f64> {
    if t.len() != z.len() {
        return Err(Error::Domain(format!("t has {} rows, z has {}", t.len(), z.len())));
    }
    if t.len() < 3 {
        return Err(Error::InsufficientData("first-stage F needs at least 3 rows".into()));
    }
    check_nonconstant("z", z)?;
    let mut cols: Vec<&[f64]> = vec![z];
    cols.extend_from_slice(covariates);
    let x = design_with_intercept(&cols)?;
    let fit = ols(t, &x)?;
    let se = fit.robust_se(1);
    if se == 0.0 {
        // perfect first stage; the Wald statistic is unbounded
        return Ok(f64::INFINITY);
    }
    let w = fit.coefficients[1] / se;
    Ok(w * w)
}

/// Two-stage least squares of `y` on `t` instrumented by `z`.
///
/// Standard errors use the HC1 sandwich evaluated at the structural
/// residuals `y - b0 - b1 t` (not the stage-2 residuals).
pub fn two_stage_least_squares(y: &[f64], t: &[f64], z: &[f64], covariates: &[&[f64]]) -> Result<IvEstimate> {
    let n = y.len();
    if t.len() != n || z.len() != n {
        return Err(Error::Domain("y, t, z must have equal lengths".into()));
    }
    if n < 4 {
        return Err(Error::InsufficientData("2SLS needs at least 4 rows".into()));
    }
    check_nonconstant("z", z)?;
    check_nonconstant("t", t)?;
    // correlation equals the covariance of the standardized columns
    let corr = sample_cov(z, t) / (sample_sd(z) * sample_sd(t));
    if corr.abs() < 1e-12 {
        return Err(Error::DegenerateFirstStage(format!(
            "|corr(z, t)| = {:.3e} after standardization",
            corr.abs()
        )));
    }

    // Stage 1: t on (1, z, X) -> fitted treatment
    let mut stage1_cols: Vec<&[f64]> = vec![z];
    stage1_cols.extend_from_slice(covariates);
    let x1 = design_with_intercept(&stage1_cols)?;
    let fit1 = ols(t, &x1)?;
    let t_hat: Vec<f64> = {
        let beta = DVector::from_column_slice(&fit1.coefficients);
        (&x1 * beta).iter().copied().collect()
    };

    // Stage 2: y on (1, t_hat, X)
    let mut stage2_cols: Vec<&[f64]> = vec![&t_hat];
    stage2_cols.extend_from_slice(covariates);
    let x2 = design_with_intercept(&stage2_cols)?;
    let fit2 = ols(y, &x2)?;
    let beta = fit2.coefficients[1];

    // structural residuals: evaluate the stage-2 coefficients at the actual
    // treatment rather than its first-stage fit
    let mut structural_cols: Vec<&[f64]> = vec![t];
    structural_cols.extend_from_slice(covariates);
    let xs = design_with_intercept(&structural_cols)?;
    let coeffs = DVector::from_column_slice(&fit2.coefficients);
    let fitted = &xs * coeffs;
    let structural: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();

    let yv = DVector::zeros(n);
    let solve2 = qr_least_squares(&yv, &x2)?;
    let cov = hc1_sandwich(&solve2.xtx_inv, &x2, &structural);
    let se = cov[(1, 1)].max(0.0).sqrt();

    let f = first_stage_f(t, z, covariates)?;
    Ok(IvEstimate { beta, se, first_stage_f: f, n })
}

/// The Wald ratio (E[Y|Z=1] - E[Y|Z=0]) / (E[T|Z=1] - E[T|Z=0]) for a
/// binary instrument.
pub fn wald_late(y: &[f64], t: &[f64], z: &[f64]) -> Result<f64> {
    let n = y.len();
    if t.len() != n || z.len() != n {
        return Err(Error::Domain("y, t, z must have equal lengths".into()));
    }
    if z.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::Domain("instrument must be coded 0/1".into()));
    }
    let mut sums = [(0.0f64, 0.0f64, 0usize); 2];
    for i in 0..n {
        let g = z[i] as usize;
        sums[g].0 += y[i];
        sums[g].1 += t[i];
        sums[g].2 += 1;
    }
    if sums[0].2 == 0 || sums[1].2 == 0 {
        return Err(Error::InsufficientData("both instrument groups must be nonempty".into()));
    }
    let dy = sums[1].0 / sums[1].2 as f64 - sums[0].0 / sums[0].2 as f64;
    let dt = sums[1].1 / sums[1].2 as f64 - sums[0].1 / sums[0].2 as f64;
    if dt.abs() < 1e-12 {
        return Err(Error::ZeroCompliance);
    }
    Ok(dy / dt)
}

/// Pooled lag rows built from per-entity segments.
#[derive(Debug, Clone)]
pub struct LaggedRows {
    pub target: Vec<f64>,
    /// Own-lag columns of the target series, lag 1 first.
    pub y_lags: Vec<Vec<f64>>,
    /// Lag columns of the candidate predictor, lag 1 first.
    pub x_lags: Vec<Vec<f64>>,
}

impl LaggedRows {
    pub fn n(&self) -> usize {
        self.target.len()
    }
}

/// Build pooled lag rows; a row at time tau requires tau-1..tau-lag present
/// within the same entity.
pub fn lagged_rows(segments: &[GrangerSegment], lag: usize) -> LaggedRows {
    let mut target = Vec::new();
    let mut y_lags: Vec<Vec<f64>> = vec![Vec::new(); lag];
    let mut x_lags: Vec<Vec<f64>> = vec![Vec::new(); lag];
    for seg in segments {
        let index: std::collections::HashMap<i64, usize> =
            seg.times.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        for (i, tau) in seg.times.iter().enumerate() {
            let mut prev = Vec::with_capacity(lag);
            for k in 1..=lag {
                match index.get(&(tau - k as i64)) {
                    Some(&p) => prev.push(p),
                    None => break,
                }
            }
            if prev.len() < lag {
                continue;
            }
            target.push(seg.y[i]);
            for (k, &p) in prev.iter().enumerate() {
                y_lags[k].push(seg.y[p]);
                x_lags[k].push(seg.x[p]);
            }
        }
    }
    LaggedRows { target, y_lags, x_lags }
}

/// Granger causality F-test pooled across panel entities.
///
/// Lags are constructed within each entity and the rows stacked into one
/// regression. `F = ((RSS_r - RSS_u)/lag) / (RSS_u/(n - 2 lag - 1))`, with
/// the p-value taken from the F(lag, n - 2 lag - 1) reference distribution.
///
/// Weak stationarity of both series is assumed, not tested.
pub fn granger_test_pooled(segments: &[GrangerSegment], lag: usize) -> Result<GrangerResult> {
    if lag == 0 {
        return Err(Error::Config("granger lag must be at least 1".into()));
    }
    let LaggedRows { target, y_lags, x_lags } = lagged_rows(segments, lag);
    let n = target.len();
    if n < 3 * lag + 10 {
        return Err(Error::InsufficientData(format!(
            "granger test at lag {lag} needs at least {} pooled rows, got {n}",
            3 * lag + 10
        )));
    }
    let restricted_cols: Vec<&[f64]> = y_lags.iter().map(|c| c.as_slice()).collect();
    let x_r = design_with_intercept(&restricted_cols)?;
    let fit_r = ols(&target, &x_r)?;

    let mut unrestricted_cols = restricted_cols.clone();
    unrestricted_cols.extend(x_lags.iter().map(|c| c.as_slice()));
    let x_u = design_with_intercept(&unrestricted_cols)?;
    let fit_u = ols(&target, &x_u)?;

    let df2 = n - 2 * lag - 1;
    let rss_r = fit_r.rss;
    let rss_u = fit_u.rss;
    let (f_stat, p_value) = if rss_r < 1e-300 {
        // nothing left to explain
        (0.0, 1.0)
    } else if rss_u < 1e-12 * rss_r {
        (f64::INFINITY, 0.0)
    } else {
        let f = ((rss_r - rss_u).max(0.0) / lag as f64) / (rss_u / df2 as f64);
        let dist = FisherSnedecor::new(lag as f64, df2 as f64)
            .map_err(|e| Error::Domain(format!("F distribution: {e}")))?;
        (f, (1.0 - dist.cdf(f)).clamp(0.0, 1.0))
    };
    Ok(GrangerResult { f_stat, p_value, lag, rss_restricted: rss_r, rss_unrestricted: rss_u, n })
}

/// Granger causality test for a single contiguous pair of series.
pub fn granger_test(x: &[f64], y: &[f64], lag: usize) -> Result<GrangerResult> {
    if x.len() != y.len() {
        return Err(Error::Domain("series must have equal lengths".into()));
    }
    granger_test_pooled(&[GrangerSegment::contiguous(x.to_vec(), y.to_vec())], lag)
}
