//! Independent brute-force PMF computation from the compound definitions.
//!
//! Probabilities here are assembled directly from the construction
//! `N_i = U_i + W_i` — Poisson (or weighted Poisson) counts compounded with
//! shifted geometric summands — never from the closed-form Laguerre
//! expressions in [`crate::distributions`]. Agreement between the two routes
//! is the central anti-regression check of the crate. The oracle is allowed
//! to be slow; it exists for tests and the hidden `oracle` CLI subcommand.

use crate::distributions::{one_minus_exp_neg, CountVector, Model, Params};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error(
        "truncation too loose: certified tail mass {certified:e} at z_max = {z_max} \
         exceeds the declared bound {declared:e}"
    )]
    TruncationTooLoose {
        z_max: u32,
        certified: f64,
        declared: f64,
    },
    #[error("count vector has dimension {got}, parameters have k = {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("pgf argument s[{index}] = {value} outside [0,1]")]
    PgfArgumentOutOfRange { index: usize, value: f64 },
}

/// Truncation of the latent Poisson counts, with a certified bound on the
/// omitted tail mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    pub z_max: u32,
    pub tail_bound: f64,
}

/// Chernoff bound `Pr(Poisson(lambda) >= a) <= exp(-lambda) (e lambda / a)^a`
/// for `a > lambda`; trivial bound 1 otherwise.
fn poisson_tail_ge(lambda: f64, a: u32) -> f64 {
    let a = f64::from(a);
    if a <= lambda {
        return 1.0;
    }
    (-lambda + a * (1.0 + lambda.ln() - a.ln())).exp()
}

/// Certified bound on `Pr(count > z_max)` for one latent count.
fn count_tail_bound(model: Model, lambda: f64, z_max: u32) -> f64 {
    match model {
        Model::Mpa => poisson_tail_ge(lambda, z_max + 1),
        // Weighted count = zero-truncated Poisson - 1, so its tail maps to
        // the Poisson tail two steps up, inflated by the truncation mass.
        Model::Wmpa => poisson_tail_ge(lambda, z_max + 2) / one_minus_exp_neg(lambda),
    }
}

fn total_tail_bound(params: &Params, model: Model, z_max: u32) -> f64 {
    params
        .lambdas()
        .iter()
        .chain(std::iter::once(&params.lambda_common()))
        .map(|&l| count_tail_bound(model, l, z_max))
        .sum()
}

impl TruncationSpec {
    /// Picks the smallest `z_max` whose certified total tail mass (summed
    /// over all `k + 1` latent counts) stays below `tail_bound`.
    pub fn certify(params: &Params, model: Model, tail_bound: f64) -> TruncationSpec {
        assert!(tail_bound > 0.0);
        let mut z_max = params
            .lambdas()
            .iter()
            .fold(params.lambda_common(), |a, &b| a.max(b))
            .ceil() as u32
            + 1;
        while total_tail_bound(params, model, z_max) >= tail_bound {
            z_max += 1;
            assert!(z_max < 1_000_000, "unreachable truncation bound");
        }
        TruncationSpec { z_max, tail_bound }
    }

    fn validate(&self, params: &Params, model: Model) -> Result<(), OracleError> {
        let certified = total_tail_bound(params, model, self.z_max);
        if certified >= self.tail_bound {
            return Err(OracleError::TruncationTooLoose {
                z_max: self.z_max,
                certified,
                declared: self.tail_bound,
            });
        }
        Ok(())
    }
}

/// PMF of the latent count: Poisson for MPA, weighted Poisson
/// (zero-truncated Poisson minus one) for WMPA.
fn latent_count_pmf(model: Model, lambda: f64, z: u32) -> f64 {
    match model {
        Model::Mpa => (-lambda + f64::from(z) * lambda.ln() - ln_gamma(f64::from(z) + 1.0)).exp(),
        Model::Wmpa => (-lambda + f64::from(z + 1) * lambda.ln()
            - ln_gamma(f64::from(z) + 2.0)
            - one_minus_exp_neg(lambda).ln())
        .exp(),
    }
}

/// `Pr(S_z = s)` for a sum of `z` i.i.d. shifted geometrics `Ge_1(1-rho)`:
/// `C(s-1, z-1) (1-rho)^z rho^{s-z}` for `s >= z >= 1`, `S_0 = 0`.
/// Evaluated in log space to keep the binomial from overflowing.
fn geometric_sum_pmf(z: u32, s: u32, rho: f64) -> f64 {
    if z == 0 {
        return if s == 0 { 1.0 } else { 0.0 };
    }
    if s < z {
        return 0.0;
    }
    let (zf, sf) = (f64::from(z), f64::from(s));
    let ln_binom = ln_gamma(sf) - ln_gamma(zf) - ln_gamma(sf - zf + 1.0);
    (ln_binom + zf * (1.0 - rho).ln() + (sf - zf) * rho.ln()).exp()
}

/// Brute-force joint PMF `Pr(N = counts)` obtained by summing the compound
/// construction over the truncated latent grid. Absolute error is below
/// `trunc.tail_bound`; in fact for `z_max >= max(counts)` all omitted terms
/// vanish and the finite sum is exact up to rounding.
pub fn brute_force_pmf(
    counts: &CountVector,
    params: &Params,
    model: Model,
    trunc: &TruncationSpec,
) -> Result<f64, OracleError> {
    let k = params.k();
    if counts.k() != k {
        return Err(OracleError::DimensionMismatch {
            got: counts.k(),
            want: k,
        });
    }
    trunc.validate(params, model)?;
    let rho = params.rho();

    // Per-coordinate distribution of U_i = sum of Z_i shifted geometrics,
    // for u in 0..=n_i. Terms with z > u vanish, so the z-sum is finite.
    let u_pmf: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let lambda = params.lambda(i);
            (0..=counts[i])
                .map(|u| {
                    (0..=u.min(trunc.z_max))
                        .map(|z| latent_count_pmf(model, lambda, z) * geometric_sum_pmf(z, u, rho))
                        .sum()
                })
                .collect()
        })
        .collect();

    // Shared component: condition on the common count z, convolve per
    // coordinate, and average. W_i >= z forces z <= min(counts).
    let min_n = (0..k).map(|i| counts[i]).min().unwrap();
    let mut total = 0.0f64;
    for z in 0..=min_n.min(trunc.z_max) {
        let pz = latent_count_pmf(model, params.lambda_common(), z);
        let mut product = pz;
        for i in 0..k {
            let n_i = counts[i];
            let conv: f64 = (z..=n_i)
                .map(|w| geometric_sum_pmf(z, w, rho) * u_pmf[i][(n_i - w) as usize])
                .sum();
            product *= conv;
        }
        total += product;
    }
    Ok(total)
}

/// `psi_1(s) = (1-rho) s / (1 - rho s)`, the PGF of the shifted geometric.
fn shifted_geometric_pgf(s: f64, rho: f64) -> f64 {
    (1.0 - rho) * s / (1.0 - rho * s)
}

/// `(e^{lambda t} - 1) / (e^{lambda} - 1) / t`, the weighted compound PGF
/// factor, with the exact `t -> 0` limit. At `t = 1` the ratio is exactly 1.
fn weighted_pgf_factor(lambda: f64, t: f64) -> f64 {
    if t == 0.0 {
        lambda / lambda.exp_m1()
    } else {
        (lambda * t).exp_m1() / (lambda.exp_m1() * t)
    }
}

/// Evaluates the closed-form joint PGF at `s` in `[0,1]^k`.
///
/// MPA: `exp(lambda_{k+1} (prod_i psi_1(s_i) - 1)) prod_i exp(lambda_i (psi_1(s_i) - 1))`.
/// WMPA: the same shape with each exponential factor replaced by the
/// weighted factor `(e^{lambda t} - 1) / ((e^{lambda} - 1) t)`.
pub fn pgf_numeric(s: &[f64], params: &Params, model: Model) -> Result<f64, OracleError> {
    let k = params.k();
    if s.len() != k {
        return Err(OracleError::DimensionMismatch {
            got: s.len(),
            want: k,
        });
    }
    for (index, &value) in s.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(OracleError::PgfArgumentOutOfRange { index, value });
        }
    }
    let rho = params.rho();
    let psi: Vec<f64> = s.iter().map(|&si| shifted_geometric_pgf(si, rho)).collect();
    let psi_prod: f64 = psi.iter().product();
    match model {
        Model::Mpa => {
            let exponent = params.lambda_common() * (psi_prod - 1.0)
                + params
                    .lambdas()
                    .iter()
                    .zip(&psi)
                    .map(|(&l, &p)| l * (p - 1.0))
                    .sum::<f64>();
            Ok(exponent.exp())
        }
        Model::Wmpa => {
            let mut value = weighted_pgf_factor(params.lambda_common(), psi_prod);
            for (&l, &p) in params.lambdas().iter().zip(&psi) {
                value *= weighted_pgf_factor(l, p);
            }
            Ok(value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{log_pmf, mpa_log_pmf, wmpa_log_pmf, pa_pmf, wpa_pmf};
    use approx::assert_relative_eq;

    fn params(v: &[f64]) -> Params {
        Params::from_flat(v).unwrap()
    }

    #[test]
    fn zero_cell_is_exact() {
        let p = params(&[0.5, 0.7, 0.3, 0.2]);
        let trunc = TruncationSpec::certify(&p, Model::Mpa, 1e-13);
        let got = brute_force_pmf(&CountVector::new(vec![0, 0]), &p, Model::Mpa, &trunc).unwrap();
        assert_relative_eq!(got, (-1.5f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn truncation_spec_rejects_loose_bounds() {
        let p = params(&[0.5, 0.7, 0.3, 0.2]);
        let bad = TruncationSpec {
            z_max: 1,
            tail_bound: 1e-13,
        };
        assert!(matches!(
            brute_force_pmf(&CountVector::new(vec![0, 0]), &p, Model::Mpa, &bad),
            Err(OracleError::TruncationTooLoose { .. })
        ));
    }

    #[test]
    fn matches_univariate_compound_pmf() {
        // Marginal of the construction with a single geometric layer:
        // brute force against the univariate closed forms.
        let rho = 0.1;
        let lambda = 0.6;
        // PA(lambda, rho): compound Poisson with shifted geometric summands.
        let mut total = 0.0;
        for n in 0..6u32 {
            let direct: f64 = (0..=n)
                .map(|z| latent_count_pmf(Model::Mpa, lambda, z) * geometric_sum_pmf(z, n, rho))
                .sum();
            assert_relative_eq!(direct, pa_pmf(n, lambda, rho), max_relative = 1e-12);
            total += direct;
        }
        assert!(total < 1.0);
        // Weighted analogue.
        for n in 0..6u32 {
            let direct: f64 = (0..=n)
                .map(|z| latent_count_pmf(Model::Wmpa, 0.8, z) * geometric_sum_pmf(z, n, 0.3))
                .sum();
            assert_relative_eq!(direct, wpa_pmf(n, 0.8, 0.3), max_relative = 1e-12);
        }
    }

    #[test]
    fn closed_forms_match_brute_force_bivariate() {
        let sets = [
            [0.5, 0.7, 0.3, 0.2],
            [0.6, 0.6, 0.3, 0.1],
            [1.0, 0.4, 0.5, 0.4],
        ];
        for set in &sets {
            let p = params(set);
            for model in [Model::Mpa, Model::Wmpa] {
                let trunc = TruncationSpec::certify(&p, model, 1e-13);
                for n1 in 0..=6u32 {
                    for n2 in 0..=6u32 {
                        let counts = CountVector::new(vec![n1, n2]);
                        let brute = brute_force_pmf(&counts, &p, model, &trunc).unwrap();
                        let closed = log_pmf(model, &counts, &p).exp();
                        assert_relative_eq!(brute, closed, max_relative = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn closed_forms_match_brute_force_trivariate() {
        let p = params(&[0.5, 0.7, 0.4, 0.3, 0.2]);
        assert_eq!(p.k(), 3);
        for model in [Model::Mpa, Model::Wmpa] {
            let trunc = TruncationSpec::certify(&p, model, 1e-13);
            for n1 in 0..=4u32 {
                for n2 in 0..=4u32 {
                    for n3 in 0..=4u32 {
                        let counts = CountVector::new(vec![n1, n2, n3]);
                        let brute = brute_force_pmf(&counts, &p, model, &trunc).unwrap();
                        let closed = log_pmf(model, &counts, &p).exp();
                        assert_relative_eq!(brute, closed, max_relative = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn spot_checks_against_closed_forms() {
        let p = params(&[0.5, 0.7, 0.3, 0.2]);
        let trunc = TruncationSpec::certify(&p, Model::Mpa, 1e-13);
        let brute =
            brute_force_pmf(&CountVector::new(vec![1, 0]), &p, Model::Mpa, &trunc).unwrap();
        assert_relative_eq!(
            brute,
            mpa_log_pmf(&CountVector::new(vec![1, 0]), &p).exp(),
            max_relative = 1e-10
        );
        let pw = params(&[0.4, 0.4, 0.2, 0.15]);
        let truncw = TruncationSpec::certify(&pw, Model::Wmpa, 1e-13);
        let brutew =
            brute_force_pmf(&CountVector::new(vec![2, 2]), &pw, Model::Wmpa, &truncw).unwrap();
        assert_relative_eq!(
            brutew,
            wmpa_log_pmf(&CountVector::new(vec![2, 2]), &pw).exp(),
            max_relative = 1e-10
        );
        let brutew11 =
            brute_force_pmf(&CountVector::new(vec![1, 1]), &pw, Model::Wmpa, &truncw).unwrap();
        assert_relative_eq!(
            brutew11,
            wmpa_log_pmf(&CountVector::new(vec![1, 1]), &pw).exp(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn pgf_normalization_and_zero_point() {
        for set in [[0.5, 0.7, 0.3, 0.2], [1.3, 0.2, 0.8, 0.55]] {
            let p = params(&set);
            for model in [Model::Mpa, Model::Wmpa] {
                assert_eq!(pgf_numeric(&[1.0, 1.0], &p, model).unwrap(), 1.0);
                let zero = pgf_numeric(&[0.0, 0.0], &p, model).unwrap();
                let lp = log_pmf(model, &CountVector::new(vec![0, 0]), &p);
                assert_relative_eq!(zero, lp.exp(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn pgf_matches_pmf_series() {
        let p = params(&[0.5, 0.7, 0.3, 0.2]);
        for model in [Model::Mpa, Model::Wmpa] {
            for &s in &[[0.5, 0.5], [0.3, 0.7], [0.7, 0.3]] {
                let direct = pgf_numeric(&s, &p, model).unwrap();
                // Series sum over a grid carrying at least 1 - 1e-10 of mass.
                let mut series = 0.0;
                for n1 in 0..60u32 {
                    for n2 in 0..60u32 {
                        let f = log_pmf(model, &CountVector::new(vec![n1, n2]), &p).exp();
                        series += f * s[0].powi(n1 as i32) * s[1].powi(n2 as i32);
                    }
                }
                assert_relative_eq!(direct, series, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_pgf_arguments() {
        let p = params(&[0.5, 0.7, 0.3, 0.2]);
        assert!(pgf_numeric(&[1.2, 0.5], &p, Model::Mpa).is_err());
        assert!(pgf_numeric(&[0.5], &p, Model::Mpa).is_err());
    }
}
