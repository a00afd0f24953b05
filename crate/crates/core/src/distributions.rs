//! Parameter types, PMF/log-PMF evaluation, theoretical moments, and the
//! generalized dispersion index for the Type I multivariate Pólya-Aeppli
//! (MPA) distribution and its weighted variant (WMPA).
//!
//! Both models are compound constructions: coordinate `i` is
//! `N_i = U_i + W_i`, where `U_i` compounds a Poisson count with i.i.d.
//! shifted geometrics and `W_i` compounds one *shared* Poisson count, which
//! induces the positive cross-correlation. The weighted variant replaces the
//! Poisson counts by their `w(z) = 1/(z+1)` weighted versions (equivalently,
//! zero-truncated Poisson minus one). The joint PMFs reduce to products and
//! short sums of associated Laguerre polynomials at
//! `x_i = -lambda_i (1 - rho) / rho`; every such value is positive, so all
//! accumulation below runs in positive scaled arithmetic and converts to
//! log space exactly once.

use crate::laguerre::{laguerre_eval, ScaledValue};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which of the two models a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Mpa,
    Wmpa,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Mpa => "mpa",
            Model::Wmpa => "wmpa",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mpa" => Ok(Model::Mpa),
            "wmpa" => Ok(Model::Wmpa),
            other => Err(format!("unknown model `{other}` (expected mpa or wmpa)")),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParamError {
    #[error("model dimension must be at least 2, got k = {0}")]
    DimensionTooSmall(usize),
    #[error("lambda[{index}] must be a positive finite real, got {value}")]
    NonPositiveRate { index: usize, value: f64 },
    #[error("common rate lambda_{{k+1}} must be a positive finite real, got {0}")]
    NonPositiveCommonRate(f64),
    #[error("rho must lie in (0,1), got {0}")]
    RhoOutOfRange(f64),
}

/// Parameter vector `(lambda_1, ..., lambda_k, lambda_{k+1}, rho)` shared by
/// the MPA and WMPA models; which model the rates drive is chosen by the
/// accompanying [`Model`] value.
///
/// `lambda_i` are the per-margin Poisson rates, `lambda_{k+1}` the shared
/// component rate, and `rho` the geometric parameter. `rho` lives in the
/// *open* interval `(0,1)`: the Laguerre argument `x_i` is singular at
/// `rho = 0`, and estimation never lands exactly there. Callers wanting the
/// `rho -> 0` multivariate-Poisson limit should use a plain Poisson model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    lambdas: Vec<f64>,
    lambda_common: f64,
    rho: f64,
}

/// Spec-level aliases: the two models share one parameter layout.
pub type MpaParams = Params;
pub type WmpaParams = Params;

impl Params {
    pub fn new(lambdas: Vec<f64>, lambda_common: f64, rho: f64) -> Result<Self, ParamError> {
        if lambdas.len() < 2 {
            return Err(ParamError::DimensionTooSmall(lambdas.len()));
        }
        for (index, &value) in lambdas.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NonPositiveRate { index, value });
            }
        }
        if !(lambda_common.is_finite() && lambda_common > 0.0) {
            return Err(ParamError::NonPositiveCommonRate(lambda_common));
        }
        if !(rho.is_finite() && rho > 0.0 && rho < 1.0) {
            return Err(ParamError::RhoOutOfRange(rho));
        }
        Ok(Params {
            lambdas,
            lambda_common,
            rho,
        })
    }

    /// Parses the flat layout `lambda_1, ..., lambda_k, lambda_{k+1}, rho`.
    pub fn from_flat(values: &[f64]) -> Result<Self, ParamError> {
        if values.len() < 4 {
            return Err(ParamError::DimensionTooSmall(values.len().saturating_sub(2)));
        }
        let k = values.len() - 2;
        Params::new(values[..k].to_vec(), values[k], values[k + 1])
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.lambdas.clone();
        out.push(self.lambda_common);
        out.push(self.rho);
        out
    }

    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    pub fn lambda_common(&self) -> f64 {
        self.lambda_common
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The Laguerre argument `x_i = -lambda_i (1 - rho) / rho` (< 0).
    pub fn laguerre_argument(&self, i: usize) -> f64 {
        -self.lambdas[i] * (1.0 - self.rho) / self.rho
    }

    /// Reorders the margin rates; the common rate and `rho` are unaffected.
    pub fn permuted(&self, order: &[usize]) -> Params {
        assert_eq!(order.len(), self.k());
        Params {
            lambdas: order.iter().map(|&i| self.lambdas[i]).collect(),
            lambda_common: self.lambda_common,
            rho: self.rho,
        }
    }
}

/// A single k-variate count observation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CountVector(pub Vec<u32>);

impl CountVector {
    pub fn new(counts: Vec<u32>) -> Self {
        CountVector(counts)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for CountVector {
    fn from(counts: Vec<u32>) -> Self {
        CountVector(counts)
    }
}

impl std::ops::Index<usize> for CountVector {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

/// `1 - e^{-lambda}` computed without cancellation for small `lambda`.
#[inline]
pub(crate) fn one_minus_exp_neg(lambda: f64) -> f64 {
    -(-lambda).exp_m1()
}

// ---------------------------------------------------------------------------
// Univariate building blocks
// ---------------------------------------------------------------------------

/// The `n >= 1` Pólya-Aeppli cell factor
/// `lambda (1-rho) rho^{n-1} / n * L_{n-1}^1(x)`, i.e. `Pr(U = n) / Pr(U = 0)`.
fn pa_factor(n: u32, lambda: f64, rho: f64) -> ScaledValue {
    debug_assert!(n >= 1);
    let x = -lambda * (1.0 - rho) / rho;
    laguerre_eval(n - 1, 1, x)
        .mul_f64(lambda * (1.0 - rho) / f64::from(n))
        .mul(&ScaledValue::from_f64(rho).powu(n - 1))
}

/// The `n >= 1` weighted cell factor
/// `lambda (1-rho) rho^{n-1} / (n (n+1)) * L_{n-1}^2(x)`, i.e.
/// `Pr(U^w = n) / Pr(U^w = 0)`.
fn wpa_factor(n: u32, lambda: f64, rho: f64) -> ScaledValue {
    debug_assert!(n >= 1);
    let x = -lambda * (1.0 - rho) / rho;
    laguerre_eval(n - 1, 2, x)
        .mul_f64(lambda * (1.0 - rho) / (f64::from(n) * f64::from(n + 1)))
        .mul(&ScaledValue::from_f64(rho).powu(n - 1))
}

/// PMF of the univariate Pólya-Aeppli distribution `PA(lambda, rho)`:
/// `e^{-lambda}` at `n = 0`, and
/// `e^{-lambda} lambda (1-rho) rho^{n-1} / n * L_{n-1}^1(x)` for `n >= 1`.
pub fn pa_pmf(n: u32, lambda: f64, rho: f64) -> f64 {
    if n == 0 {
        return (-lambda).exp();
    }
    pa_factor(n, lambda, rho)
        .mul(&ScaledValue::from_ln(-lambda))
        .to_f64()
}

/// PMF of the weighted Pólya-Aeppli distribution `WPA(lambda, rho)` with
/// weight `w(z) = 1/(z+1)`: `lambda e^{-lambda} / (1 - e^{-lambda})` at
/// `n = 0`, and
/// `e^{-lambda} / (1 - e^{-lambda}) * lambda^2 (1-rho) rho^{n-1} / (n(n+1)) * L_{n-1}^2(x)`
/// for `n >= 1`.
pub fn wpa_pmf(n: u32, lambda: f64, rho: f64) -> f64 {
    let ln_zero_cell = lambda.ln() - lambda - one_minus_exp_neg(lambda).ln();
    if n == 0 {
        return ln_zero_cell.exp();
    }
    wpa_factor(n, lambda, rho)
        .mul(&ScaledValue::from_ln(ln_zero_cell))
        .to_f64()
}

// ---------------------------------------------------------------------------
// Joint log-PMFs
// ---------------------------------------------------------------------------

/// Log-PMF of `(N_1, ..., N_k) ~ MPA(lambda_1..lambda_k, lambda_{k+1}, rho)`.
///
/// The three cases (all zero, mixed, all positive) collapse into one
/// expression: the product of per-coordinate Pólya-Aeppli factors over the
/// nonzero coordinates, plus — only when every coordinate is positive — the
/// shared-component sum over `r = 1..=min(n)` of
/// `lambda_{k+1}^r / r! * prod_i (1-rho)^r rho^{n_i - r} L_{n_i-r}^{r-1}(x_i)`,
/// all multiplied by the zero cell `f(0,...,0) = e^{-(lambda_{k+1} + sum lambda_i)}`.
/// Every summand is positive, so the accumulation is cancellation-free.
pub fn mpa_log_pmf(counts: &CountVector, params: &Params) -> f64 {
    let k = params.k();
    assert_eq!(counts.k(), k, "count vector dimension mismatch");
    let rho = params.rho();
    let ln_zero_cell = -(params.lambdas.iter().sum::<f64>() + params.lambda_common);

    let mut bracket = ScaledValue::ONE;
    for i in 0..k {
        if counts[i] >= 1 {
            bracket = bracket.mul(&pa_factor(counts[i], params.lambda(i), rho));
        }
    }

    let min_n = (0..k).map(|i| counts[i]).min().unwrap();
    if min_n >= 1 {
        let one_minus_rho = ScaledValue::from_f64(1.0 - rho);
        let sv_rho = ScaledValue::from_f64(rho);
        let mut coeff = ScaledValue::ONE; // lambda_{k+1}^r / r!
        for r in 1..=min_n {
            coeff = coeff.mul_f64(params.lambda_common / f64::from(r));
            let mut term = coeff;
            for i in 0..k {
                let x = params.laguerre_argument(i);
                term = term
                    .mul(&one_minus_rho.powu(r))
                    .mul(&sv_rho.powu(counts[i] - r))
                    .mul(&laguerre_eval(counts[i] - r, r - 1, x));
            }
            bracket = bracket.add(&term);
        }
    }

    bracket.ln() + ln_zero_cell
}

/// Log-PMF of `(N_1^w, ..., N_k^w) ~ WMPA(lambda_1..lambda_k, lambda_{k+1}, rho)`.
///
/// Zero cell: `prod_j lambda_j e^{-lambda_j} / (1 - e^{-lambda_j})` over all
/// `k + 1` rates. For all-positive counts the bracket has three summands:
/// the product of weighted per-coordinate factors, a `lambda_{k+1}/2!` term
/// built from plain Pólya-Aeppli factors, and the sum over `r = 1..=min(n)`
/// of `lambda_{k+1}^{r+1} / (r+2)!` times
/// `prod_i (1-rho)^r rho^{n_i-r} / lambda_i * (L_{n_i-r}^{r-1}(x_i) - C(n_i-1, n_i-r))`.
/// The subtracted binomial is the constant term of the (all-positive)
/// Laguerre series at `x_i < 0`, so the difference stays positive.
pub fn wmpa_log_pmf(counts: &CountVector, params: &Params) -> f64 {
    let k = params.k();
    assert_eq!(counts.k(), k, "count vector dimension mismatch");
    let rho = params.rho();
    let ln_zero_cell: f64 = params
        .lambdas
        .iter()
        .chain(std::iter::once(&params.lambda_common))
        .map(|&l| l.ln() - l - one_minus_exp_neg(l).ln())
        .sum();

    let mut bracket = ScaledValue::ONE;
    for i in 0..k {
        if counts[i] >= 1 {
            bracket = bracket.mul(&wpa_factor(counts[i], params.lambda(i), rho));
        }
    }

    let min_n = (0..k).map(|i| counts[i]).min().unwrap();
    if min_n >= 1 {
        // lambda_{k+1}/2! * prod_i (1-rho) rho^{n_i-1} / n_i * L_{n_i-1}^1(x_i)
        let mut pair_term = ScaledValue::from_f64(params.lambda_common / 2.0);
        for i in 0..k {
            pair_term = pair_term.mul(&pa_factor(counts[i], params.lambda(i), rho).div_f64(params.lambda(i)));
        }
        bracket = bracket.add(&pair_term);

        let one_minus_rho = ScaledValue::from_f64(1.0 - rho);
        let sv_rho = ScaledValue::from_f64(rho);
        // Binomial columns C(n_i - 1, r - 1) grown multiplicatively per r.
        let mut binom: Vec<ScaledValue> = vec![ScaledValue::ONE; k];
        // lambda_{k+1}^{r+1} / (r+2)!
        let mut coeff = ScaledValue::from_f64(
            params.lambda_common * params.lambda_common / 6.0,
        );
        for r in 1..=min_n {
            if r > 1 {
                coeff = coeff.mul_f64(params.lambda_common / f64::from(r + 2));
                for i in 0..k {
                    binom[i] =
                        binom[i].mul_f64(f64::from(counts[i] - (r - 1)) / f64::from(r - 1));
                }
            }
            let mut term = coeff;
            for i in 0..k {
                let x = params.laguerre_argument(i);
                let deflated = laguerre_eval(counts[i] - r, r - 1, x).sub(&binom[i]);
                term = term
                    .mul(&one_minus_rho.powu(r))
                    .mul(&sv_rho.powu(counts[i] - r))
                    .div_f64(params.lambda(i))
                    .mul(&deflated);
            }
            bracket = bracket.add(&term);
        }
    }

    bracket.ln() + ln_zero_cell
}

/// Dispatches to [`mpa_log_pmf`] / [`wmpa_log_pmf`].
pub fn log_pmf(model: Model, counts: &CountVector, params: &Params) -> f64 {
    match model {
        Model::Mpa => mpa_log_pmf(counts, params),
        Model::Wmpa => wmpa_log_pmf(counts, params),
    }
}

// ---------------------------------------------------------------------------
// Moments and dispersion
// ---------------------------------------------------------------------------

/// Theoretical mean vector, covariance, correlation, and GDI of a model.
#[derive(Debug, Clone)]
pub struct MomentSummary {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub correlation: DMatrix<f64>,
    pub gdi: f64,
}

/// Moments of the MPA model:
/// `E(N_i) = (lambda_i + lambda_{k+1}) / (1-rho)`,
/// `Var(N_i) = (1+rho)(lambda_i + lambda_{k+1}) / (1-rho)^2`,
/// `Cov(N_i, N_j) = lambda_{k+1} / (1-rho)^2`,
/// `Corr(N_i, N_j) = lambda_{k+1} / ((1+rho) sqrt((lambda_i+lambda_{k+1})(lambda_j+lambda_{k+1})))`.
pub fn mpa_moments(params: &Params) -> MomentSummary {
    let k = params.k();
    let rho = params.rho();
    let lc = params.lambda_common();
    let om = 1.0 - rho;
    let totals: Vec<f64> = params.lambdas().iter().map(|&l| l + lc).collect();

    let mean: Vec<f64> = totals.iter().map(|&a| a / om).collect();
    let covariance = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            (1.0 + rho) * totals[i] / (om * om)
        } else {
            lc / (om * om)
        }
    });
    let correlation = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            lc / ((1.0 + rho) * (totals[i] * totals[j]).sqrt())
        }
    });
    let gdi = gdi_generic(&mean, &covariance).expect("valid by construction");
    MomentSummary {
        mean,
        covariance,
        correlation,
        gdi,
    }
}

/// `E(Z^w)` and `Var(Z^w)` helpers for the weighted Poisson count
/// (zero-truncated Poisson minus one).
fn weighted_count_mean(lambda: f64) -> f64 {
    lambda / one_minus_exp_neg(lambda)
}

fn weighted_count_var_defect(lambda: f64) -> f64 {
    // lambda^2 e^{-lambda} / (1 - e^{-lambda})^2
    let d = one_minus_exp_neg(lambda);
    lambda * lambda * (-lambda).exp() / (d * d)
}

/// Moments of the WMPA model. With `A_i = lambda_i / (1 - e^{-lambda_i})`,
/// `B = lambda_{k+1} / (1 - e^{-lambda_{k+1}})`,
/// `C_i = lambda_i^2 e^{-lambda_i} / (1 - e^{-lambda_i})^2`, and
/// `D = lambda_{k+1}^2 e^{-lambda_{k+1}} / (1 - e^{-lambda_{k+1}})^2`:
/// `E(N_i^w) = (A_i + B - 2) / (1-rho)`,
/// `Var(N_i^w) = ((1+rho)(A_i + B) - C_i - D - 2 rho) / (1-rho)^2`,
/// `Cov(N_i^w, N_j^w) = (B - D) / (1-rho)^2`.
pub fn wmpa_moments(params: &Params) -> MomentSummary {
    let k = params.k();
    let rho = params.rho();
    let om = 1.0 - rho;
    let a: Vec<f64> = params
        .lambdas()
        .iter()
        .map(|&l| weighted_count_mean(l))
        .collect();
    let c: Vec<f64> = params
        .lambdas()
        .iter()
        .map(|&l| weighted_count_var_defect(l))
        .collect();
    let b = weighted_count_mean(params.lambda_common());
    let d = weighted_count_var_defect(params.lambda_common());

    let mean: Vec<f64> = a.iter().map(|&ai| (ai + b - 2.0) / om).collect();
    let covariance = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            ((1.0 + rho) * (a[i] + b) - c[i] - d - 2.0 * rho) / (om * om)
        } else {
            (b - d) / (om * om)
        }
    });
    let correlation = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            covariance[(i, j)] / (covariance[(i, i)] * covariance[(j, j)]).sqrt()
        }
    });
    let gdi = gdi_generic(&mean, &covariance).expect("valid by construction");
    MomentSummary {
        mean,
        covariance,
        correlation,
        gdi,
    }
}

/// Dispatches to [`mpa_moments`] / [`wmpa_moments`].
pub fn moments(model: Model, params: &Params) -> MomentSummary {
    match model {
        Model::Mpa => mpa_moments(params),
        Model::Wmpa => wmpa_moments(params),
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GdiError {
    #[error("mean[{index}] must be positive, got {value}")]
    NonPositiveMean { index: usize, value: f64 },
    #[error("covariance matrix is not symmetric at ({i},{j}): {a} vs {b}")]
    NonSymmetricCovariance { i: usize, j: usize, a: f64, b: f64 },
    #[error("mean vector has length {mean} but covariance is {cov}x{cov}")]
    ShapeMismatch { mean: usize, cov: usize },
}

/// Generalized dispersion index
/// `GDI = sqrt(mean)' Cov sqrt(mean) / (mean' mean)` with the elementwise
/// square root. Equals 1 for an uncorrelated multivariate Poisson vector;
/// values above 1 signal overdispersion.
pub fn gdi_generic(mean: &[f64], cov: &DMatrix<f64>) -> Result<f64, GdiError> {
    let k = mean.len();
    if cov.nrows() != k || cov.ncols() != k {
        return Err(GdiError::ShapeMismatch {
            mean: k,
            cov: cov.nrows(),
        });
    }
    for (index, &value) in mean.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(GdiError::NonPositiveMean { index, value });
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let (a, b) = (cov[(i, j)], cov[(j, i)]);
            let scale = a.abs().max(b.abs()).max(1e-300);
            if (a - b).abs() > 1e-9 * scale {
                return Err(GdiError::NonSymmetricCovariance { i, j, a, b });
            }
        }
    }
    let root: Vec<f64> = mean.iter().map(|&m| m.sqrt()).collect();
    let mut quad = 0.0;
    for i in 0..k {
        for j in 0..k {
            quad += root[i] * cov[(i, j)] * root[j];
        }
    }
    let norm: f64 = mean.iter().map(|&m| m * m).sum();
    Ok(quad / norm)
}

/// Closed-form GDI of the MPA model,
/// `1 + 2 rho / (1-rho) + 2 lambda_{k+1} sqrt(prod_i (lambda_i + lambda_{k+1}))
///  / ((1-rho) sum_i (lambda_i + lambda_{k+1})^2)`.
///
/// Always exceeds 1. For `k = 2` this agrees exactly with
/// [`gdi_generic`] applied to [`mpa_moments`]; the product form under the
/// square root is specific to the bivariate case.
pub fn gdi_mpa(params: &Params) -> f64 {
    let rho = params.rho();
    let lc = params.lambda_common();
    let totals: Vec<f64> = params.lambdas().iter().map(|&l| l + lc).collect();
    let prod: f64 = totals.iter().product();
    let sum_sq: f64 = totals.iter().map(|&a| a * a).sum();
    1.0 + 2.0 * rho / (1.0 - rho) + 2.0 * lc * prod.sqrt() / ((1.0 - rho) * sum_sq)
}
