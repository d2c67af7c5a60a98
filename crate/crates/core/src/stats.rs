//! Ordinary least squares with classical inference, plus descriptive
//! summaries of sweep output.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::sweep::AgentResult;

/// Largest accepted condition number of the design matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("design needs more observations than regressors (n = {n}, k = {k})")]
    TooFewObservations { n: usize, k: usize },
    #[error("column `{column}` has length {got}, expected {expected}")]
    RaggedColumn {
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("design is singular or ill-conditioned (condition ~ {condition:.3e}); column `{column}` is collinear with earlier columns")]
    Singular { column: String, condition: f64 },
    #[error("no data")]
    Empty,
}

/// Regressor matrix (column-wise) and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub response: Vec<f64>,
}

impl Design {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self, StatsError> {
        let n = response.len();
        let k = columns.len();
        if n <= k {
            return Err(StatsError::TooFewObservations { n, k });
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(StatsError::RaggedColumn {
                    column: name.clone(),
                    expected: n,
                    got: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(StatsError::NonFinite(name.clone()));
            }
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite("response".into()));
        }
        Ok(Self {
            names,
            columns,
            response,
        })
    }

    /// Prepends a `const` column of ones to the named regressors.
    pub fn with_intercept(regressors: Vec<(&str, Vec<f64>)>, response: Vec<f64>) -> Result<Self, StatsError> {
        let n = response.len();
        let mut names = vec!["const".to_string()];
        let mut columns = vec![vec![1.0; n]];
        for (name, col) in regressors {
            names.push(name.to_string());
            columns.push(col);
        }
        Self::new(names, columns, response)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    fn has_intercept(&self) -> bool {
        self.columns.iter().any(|c| c.iter().all(|v| *v == 1.0))
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.k(), |i, j| self.columns[j][i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    /// Two-sided, normal approximation.
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    /// `RSS / (n - k)`.
    pub sigma2: f64,
    pub residuals: Vec<f64>,
    pub n: usize,
    pub k: usize,
}

impl OlsFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn fitted(&self, design: &Design) -> Vec<f64> {
        (0..design.n())
            .map(|i| {
                design
                    .columns
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(col, b)| col[i] * b)
                    .sum()
            })
            .collect()
    }
}

/// Upper-tail probability of the standard normal, `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Least squares via Householder QR of the design matrix.
///
/// Standard errors come from `sigma2 * (R^T R)^{-1}`, which equals
/// `sigma2 * (X^T X)^{-1}` without forming the normal equations.
pub fn ols_fit(design: &Design) -> Result<OlsFit, StatsError> {
    let (n, k) = (design.n(), design.k());
    if n <= k {
        return Err(StatsError::TooFewObservations { n, k });
    }
    let x = design.matrix();
    let y = DVector::from_column_slice(&design.response);
    let qr = x.clone().qr();
    let r = qr.r();

    // conditioning of X equals that of R
    let singular_values = r.clone().singular_values();
    let s_max = singular_values.max();
    let s_min = singular_values.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        let worst = (0..k)
            .min_by(|&a, &b| {
                let rel = |j: usize| r[(j, j)].abs() / x.column(j).norm().max(f64::MIN_POSITIVE);
                rel(a).total_cmp(&rel(b))
            })
            .unwrap_or(0);
        return Err(StatsError::Singular {
            column: design.names[worst].clone(),
            condition,
        });
    }

    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| StatsError::Singular {
            column: design.names[k - 1].clone(),
            condition,
        })?;
    let residuals = &y - &x * &beta;
    let rss = residuals.norm_squared();
    let sigma2 = rss / (n - k) as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| StatsError::Singular {
            column: design.names[k - 1].clone(),
            condition,
        })?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let mut std_errors = Vec::with_capacity(k);
    let mut t_stats = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for j in 0..k {
        let se = (sigma2 * xtx_inv[(j, j)]).sqrt();
        let b = beta[j];
        let t = if se > 0.0 {
            b / se
        } else if b == 0.0 {
            0.0
        } else {
            b.signum() * f64::INFINITY
        };
        std_errors.push(se);
        t_stats.push(t);
        p_values.push((2.0 * normal_sf(t.abs())).min(1.0));
    }

    let tss = if design.has_intercept() {
        let mean = design.response.iter().sum::<f64>() / n as f64;
        design.response.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    } else {
        design.response.iter().map(|v| v * v).sum::<f64>()
    };
    let r_squared = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(OlsFit {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_stats,
        p_values,
        r_squared,
        sigma2,
        residuals: residuals.iter().copied().collect(),
        n,
        k,
    })
}

/// Line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// One-regressor OLS line. Degenerate inputs (fewer than three points or a
/// constant `x`) fall back to a flat line at the mean of `y`.
pub fn simple_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let flat = || LinearFit {
        slope: 0.0,
        intercept: if y.is_empty() { 0.0 } else { mean(y) },
    };
    match Design::with_intercept(vec![("x", x.to_vec())], y.to_vec()).and_then(|d| ols_fit(&d)) {
        Ok(fit) => LinearFit {
            slope: fit.coefficients[1],
            intercept: fit.coefficients[0],
        },
        Err(_) => flat(),
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub value: f64,
    /// Set when either variable has zero variance; `value` is then 0.
    pub degenerate: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Correlation {
    let n = x.len().min(y.len());
    if n == 0 {
        return Correlation {
            value: 0.0,
            degenerate: true,
        };
    }
    let (mx, my) = (mean(&x[..n]), mean(&y[..n]));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Correlation {
            value: 0.0,
            degenerate: true,
        };
    }
    Correlation {
        value: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// Equal-width bin counts over `[lo, hi]`; the last bin is closed and values
/// outside the range are clamped into the end bins.
pub fn histogram_counts(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<usize> {
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let idx = if width > 0.0 {
            (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean_yield: f64,
    pub mean_spoilage: f64,
    pub mean_culture: f64,
    pub mean_starvation_rate: f64,
    pub corr_spoilage_culture: Correlation,
    pub corr_yield_culture: Correlation,
    pub culture_histogram: Histogram,
}

pub const SUMMARY_BINS: usize = 20;

pub fn summarize(results: &[AgentResult]) -> Result<Summary, StatsError> {
    if results.is_empty() {
        return Err(StatsError::Empty);
    }
    let ys: Vec<f64> = results.iter().map(|r| r.yield_base).collect();
    let ps: Vec<f64> = results.iter().map(|r| r.spoilage).collect();
    let cs: Vec<f64> = results.iter().map(|r| r.mean_culture).collect();
    let starve: Vec<f64> = results.iter().map(|r| r.starvation_rate).collect();
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Summary {
        n: results.len(),
        mean_yield: mean(&ys),
        mean_spoilage: mean(&ps),
        mean_culture: mean(&cs),
        mean_starvation_rate: mean(&starve),
        corr_spoilage_culture: pearson(&ps, &cs),
        corr_yield_culture: pearson(&ys, &cs),
        culture_histogram: Histogram {
            lo,
            hi,
            counts: histogram_counts(&cs, SUMMARY_BINS, lo, hi),
        },
    })
}
