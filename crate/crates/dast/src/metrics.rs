//! Error norms between models and the statistical error-bound evaluators.
//!
//! H2 errors are exact (closed-form Gram of the difference model, no
//! quadrature). The H-infinity error is a grid maximum paired with a
//! certified upper bound obtained by adding the atoms' frequency-Lipschitz
//! correction for half a grid cell; plots use the raw value, assertions
//! the certified one.

use crate::atoms::{self, AtomicModel};
use crate::measure::{self, MeasurementPlan};
use crate::net::eps_from_delta;
use crate::{C64, Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Default circle-grid resolution for the H-infinity estimate.
pub const DEFAULT_HINF_GRID: usize = 8192;

/// Error metrics of one estimate against the truth, with the statistical
/// bound evaluated at both published constants.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub h2_error: f64,
    /// Raw grid maximum of the frequency-response error.
    pub hinf_error: f64,
    /// `hinf_error` plus the Lipschitz correction; a true upper bound.
    pub hinf_certified: f64,
    pub empirical_mse: f64,
    pub effective_degree: usize,
    /// Statement variant of the squared-H2 bound (constant 186).
    pub theorem_bound: f64,
    /// Proof-display variant (constant 59).
    pub theorem_bound_proof: f64,
    /// Whether `h2_error^2 <= theorem_bound`.
    pub bound_satisfied: bool,
}

/// Exact H2 distance between two models.
pub fn h2_error(m1: &AtomicModel, m2: &AtomicModel) -> Result<f64> {
    let diff = atoms::combined(m1, C64::new(1.0, 0.0), m2, C64::new(-1.0, 0.0));
    atoms::model_h2_norm(&diff)
}

/// H-infinity error estimate from a uniform circle grid.
#[derive(Debug, Clone, Copy)]
pub struct HInfEstimate {
    pub raw: f64,
    pub certified: f64,
}

/// Maximum modulus of the difference over `grid_size` uniform circle
/// points, plus a certified upper bound: the difference's decomposition
/// weight times the per-atom Lipschitz constant covers the half-cell
/// between grid points.
pub fn hinf_error(m1: &AtomicModel, m2: &AtomicModel, grid_size: usize) -> Result<HInfEstimate> {
    if grid_size == 0 {
        return Err(Error::InvalidInput("grid size must be >= 1".into()));
    }
    let diff = atoms::combined(m1, C64::new(1.0, 0.0), m2, C64::new(-1.0, 0.0));
    let raw = (0..grid_size)
        .into_par_iter()
        .map(|j| {
            let theta = std::f64::consts::TAU * j as f64 / grid_size as f64;
            atoms::eval_model(&diff, C64::from_polar(1.0, theta))
                .expect("circle points are valid")
                .norm()
        })
        .reduce(|| 0.0, f64::max);
    let rho = diff.rho();
    let lipschitz = (1.0 + rho) / (1.0 - rho) * atoms::decomposition_weight(&diff);
    let certified = raw + lipschitz * PI / grid_size as f64;
    Ok(HInfEstimate { raw, certified })
}

/// Mean squared measurement error `(1/n) || L(m1) - L(m2) ||^2`.
pub fn empirical_mse(plan: &MeasurementPlan, m1: &AtomicModel, m2: &AtomicModel) -> Result<f64> {
    let y1 = measure::apply_plan(plan, m1)?;
    let y2 = measure::apply_plan(plan, m2)?;
    Ok((y1 - y2).norm_squared() / plan.len() as f64)
}

/// Statement variant of the squared-H2 error bound (constant 186):
/// `186 (1+rho)/(1-rho) ( sqrt(sigma^2 log(11 rho^2/((1-rho) eps)))
///   sqrt(G^2/(n (1-delta)^2)) + 4 G^2 / (pi n (1-delta)^2) )`
/// with `G` the Hankel nuclear norm of the truth and `eps` derived from
/// `delta`.
pub fn theorem_bound(
    rho: f64,
    sigma: f64,
    delta: f64,
    n: usize,
    hankel_nuclear: f64,
) -> Result<f64> {
    let eps = eps_from_delta(delta, rho)?;
    let log_arg = 11.0 * rho * rho / ((1.0 - rho) * eps);
    bound_common(rho, delta, n, |front| {
        let noise = (sigma * sigma * log_arg.ln()).sqrt() * (hankel_nuclear / front);
        let bias = 4.0 * hankel_nuclear * hankel_nuclear / (PI * front * front);
        Ok(186.0 * (noise + bias))
    }, log_arg, sigma)
}

/// Proof-display variant of the bound (constant 59), evaluated with the
/// same arguments; the supplied Hankel nuclear norm is fed directly into
/// the proof's atomic-norm slot. Always at most the statement variant.
pub fn theorem_bound_proof_variant(
    rho: f64,
    sigma: f64,
    delta: f64,
    n: usize,
    hankel_nuclear: f64,
) -> Result<f64> {
    let log_arg = 11.0 * rho * rho / ((1.0 - rho) * delta);
    bound_common(rho, delta, n, |front| {
        let noise = (4.0 * sigma * sigma * log_arg.ln()).sqrt() * (hankel_nuclear / front);
        let bias = hankel_nuclear * hankel_nuclear / (front * front);
        Ok(59.0 * (noise + bias))
    }, log_arg, sigma)
}

fn bound_common(
    rho: f64,
    delta: f64,
    n: usize,
    body: impl FnOnce(f64) -> Result<f64>,
    log_arg: f64,
    sigma: f64,
) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(
            "rho and delta must lie in (0, 1)".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    if sigma < 0.0 {
        return Err(Error::InvalidInput("sigma must be nonnegative".into()));
    }
    if log_arg <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "log argument {log_arg} must exceed 1"
        )));
    }
    // front = sqrt(n) (1 - delta); both terms divide by its powers
    let front = (n as f64).sqrt() * (1.0 - delta);
    let shape = (1.0 + rho) / (1.0 - rho);
    Ok(shape * body(front)?)
}

/// Number of terms with `|c| > rel_tol * max |c|`.
pub fn effective_degree(m: &AtomicModel, rel_tol: f64) -> usize {
    let max = m
        .terms()
        .iter()
        .map(|(_, c)| c.norm())
        .fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    m.terms()
        .iter()
        .filter(|(_, c)| c.norm() > rel_tol * max)
        .count()
}

/// Assembles the full error report of `estimate` against `truth`.
#[allow(clippy::too_many_arguments)]
pub fn error_report(
    truth: &AtomicModel,
    estimate: &AtomicModel,
    plan: &MeasurementPlan,
    sigma: f64,
    delta: f64,
    hankel_nuclear_truth: f64,
    hinf_grid: usize,
    degree_rel_tol: f64,
) -> Result<ErrorReport> {
    let rho = truth.rho().max(estimate.rho());
    let n = plan.len();
    let h2 = h2_error(truth, estimate)?;
    let hinf = hinf_error(truth, estimate, hinf_grid)?;
    let mse = empirical_mse(plan, truth, estimate)?;
    let bound = theorem_bound(rho, sigma, delta, n, hankel_nuclear_truth)?;
    let bound_proof = theorem_bound_proof_variant(rho, sigma, delta, n, hankel_nuclear_truth)?;
    Ok(ErrorReport {
        h2_error: h2,
        hinf_error: hinf.raw,
        hinf_certified: hinf.certified,
        empirical_mse: mse,
        effective_degree: effective_degree(estimate, degree_rel_tol),
        theorem_bound: bound,
        theorem_bound_proof: bound_proof,
        bound_satisfied: h2 * h2 <= bound,
    })
}
