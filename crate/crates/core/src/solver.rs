//! EM fitting of the penalized density-ratio model.
//!
//! The latent true status `G` turns the observed likelihood into a penalized
//! logistic regression on the shifted ratio `h + c`. Each iteration imputes
//! `E[G_i | data, h]` in closed form (E-step), fits a penalized logistic
//! regression of those responsibilities on the spline basis by damped Newton
//! (M-step), and shifts the intercept back by `c`. Because the basis is a
//! partition of unity, the shift is exact: `phi(t)^T b - c = phi(t)^T (b - c 1)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{Design, SplineBasis};
use crate::error::{Error, Result};
use crate::likelihood::{
    logistic, quad_form, share_exp, softplus, MixtureRates, ModelConstants, PenalizedProblem,
};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmOptions {
    pub max_em_iters: usize,
    /// Relative change in the penalized objective that ends the iteration.
    pub em_tol: f64,
    pub irls_max_iters: usize,
    /// Half the squared Newton decrement below which the M-step stops.
    pub irls_tol: f64,
    pub step_halving_max: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_em_iters: 500,
            em_tol: 1e-6,
            irls_max_iters: 100,
            irls_tol: 1e-8,
            step_halving_max: 30,
        }
    }
}

impl EmOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_em_iters == 0
            || self.irls_max_iters == 0
            || self.step_halving_max == 0
            || !(self.em_tol > 0.0)
            || !(self.irls_tol > 0.0)
        {
            return Err(Error::InvalidParameter(
                "EM options must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Responsibilities `E[G_i | R_i, T_i; h]`.
pub fn e_step(h_vals: &[f64], labels: &[bool], rates: &MixtureRates) -> Vec<f64> {
    h_vals
        .iter()
        .zip(labels)
        .map(|(&h, &r)| {
            if r {
                share_exp(1.0 - rates.pi1, rates.pi1, h)
            } else {
                share_exp(rates.pi0, 1.0 - rates.pi0, h)
            }
        })
        .collect()
}

/// Starting responsibilities `E[G | R]`.
pub fn initial_responsibilities(labels: &[bool], rates: &MixtureRates) -> Vec<f64> {
    labels
        .iter()
        .map(|&r| if r { rates.pi1 } else { 1.0 - rates.pi0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MStepOutcome {
    pub coef: Vec<f64>,
    /// Value of the penalized pseudo-binomial objective at `coef`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest ridge added to the Newton system, zero when none was needed.
    pub jitter: f64,
}

const WEIGHT_CLAMP: f64 = 1e-12;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-2;

fn binomial_objective(resp: &[f64], eta: &[f64], penalty: &DMatrix<f64>, nu: f64, coef: &[f64]) -> f64 {
    let ll: f64 = resp
        .iter()
        .zip(eta)
        .map(|(&g, &e)| g * e - softplus(e))
        .sum();
    if nu == 0.0 {
        ll
    } else {
        ll - nu * quad_form(penalty, coef)
    }
}

/// Solves `a x = rhs` by Cholesky, adding a growing ridge when `a` is not
/// numerically positive definite. Returns the solution and the ridge used.
fn solve_spd(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Ok((x, 0.0));
        }
    }
    let scale = a.diagonal().amax().max(1.0);
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX {
        let mut aj = a.clone();
        for i in 0..aj.nrows() {
            aj[(i, i)] += jitter * scale;
        }
        if let Some(ch) = aj.cholesky() {
            let x = ch.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Ok((x, jitter));
            }
        }
        jitter *= 100.0;
    }
    Err(Error::SingularSystem { jitter: JITTER_MAX })
}

/// Maximizes `sum_i [G_i eta_i - log(1 + e^eta_i)] - nu b^T Phi_2 b` with
/// `eta = X b`, by Newton steps with step halving, starting at `init`.
pub fn m_step(
    resp: &[f64],
    design: &Design,
    penalty: &DMatrix<f64>,
    nu: f64,
    init: &[f64],
    opts: &EmOptions,
) -> Result<MStepOutcome> {
    if resp.len() != design.n_rows() {
        return Err(Error::LengthMismatch {
            expected: design.n_rows(),
            found: resp.len(),
        });
    }
    if init.len() != design.n_basis() {
        return Err(Error::LengthMismatch {
            expected: design.n_basis(),
            found: init.len(),
        });
    }
    if nu < 0.0 || nu.is_nan() {
        return Err(Error::NegativeNu(nu));
    }
    let k = design.n_basis();
    let two_nu_pen = penalty * (2.0 * nu);
    let mut coef = init.to_vec();
    let mut eta = design.mul(&coef);
    let mut obj = binomial_objective(resp, &eta, penalty, nu, &coef);
    let mut converged = false;
    let mut max_jitter: f64 = 0.0;
    let mut iterations = 0;

    for it in 0..opts.irls_max_iters {
        iterations = it + 1;
        let mu: Vec<f64> = eta.iter().map(|&e| logistic(e)).collect();
        let w: Vec<f64> = mu
            .iter()
            .map(|&m| {
                let m = m.clamp(WEIGHT_CLAMP, 1.0 - WEIGHT_CLAMP);
                m * (1.0 - m)
            })
            .collect();
        let resid: Vec<f64> = resp.iter().zip(&mu).map(|(g, m)| g - m).collect();
        let mut grad = DVector::from_vec(design.tmul(&resid));
        let b = DVector::from_column_slice(&coef);
        grad -= &two_nu_pen * &b;
        let hess = design.weighted_gram(&w) + &two_nu_pen;
        let (delta, jitter) = solve_spd(&hess, &grad)?;
        max_jitter = max_jitter.max(jitter);
        let decrement = grad.dot(&delta);
        if !decrement.is_finite() {
            break;
        }
        if 0.5 * decrement < opts.irls_tol {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.step_halving_max {
            let trial: Vec<f64> = coef
                .iter()
                .zip(delta.iter())
                .map(|(c, d)| c + step * d)
                .collect();
            let trial_eta = design.mul(&trial);
            let trial_obj = binomial_objective(resp, &trial_eta, penalty, nu, &trial);
            if trial_obj.is_finite() && trial_obj >= obj {
                coef = trial;
                eta = trial_eta;
                obj = trial_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // rounding floor: no representable ascent along the Newton step
            converged = 0.5 * decrement < opts.irls_tol.sqrt();
            break;
        }
    }
    debug_assert_eq!(coef.len(), k);
    Ok(MStepOutcome {
        coef,
        objective: obj,
        iterations,
        converged,
        jitter: max_jitter,
    })
}

/// A fitted log density ratio `h(t) = b^T phi(t)` with its diagnostics.
#[derive(Debug, Clone)]
pub struct DensityRatioFit {
    pub coefficients: Vec<f64>,
    pub basis: Arc<SplineBasis>,
    pub consts: ModelConstants,
    pub rates: MixtureRates,
    pub nu: f64,
    pub n_em_iters: usize,
    pub final_objective: f64,
    /// `Q(b^[s])` after every M-step, starting with the initial one.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// `int (h'')^2` of the final estimate.
    pub roughness: f64,
    /// Largest ridge jitter any M-step needed.
    pub max_jitter: f64,
}

impl DensityRatioFit {
    /// `h(t)` on the unit domain.
    pub fn h(&self, t: f64) -> Result<f64> {
        let (first, vals) = self.basis.eval_nonzero(t)?;
        Ok(vals
            .iter()
            .zip(&self.coefficients[first..])
            .map(|(a, b)| a * b)
            .sum())
    }
}

/// Runs the EM iteration to convergence on `problem` with penalty weight `nu`.
pub fn fit_em(problem: &PenalizedProblem, nu: f64, opts: &EmOptions) -> Result<DensityRatioFit> {
    opts.validate()?;
    if nu < 0.0 || nu.is_nan() {
        return Err(Error::NegativeNu(nu));
    }
    let rates = *problem.rates();
    let consts = *problem.consts();
    let c = consts.c;
    let design = problem.design();
    let penalty = problem.penalty();
    let labels = problem.labels();
    let k = design.n_basis();

    let resp = initial_responsibilities(labels, &rates);
    let first = m_step(&resp, design, penalty, nu, &vec![0.0; k], opts)?;
    let mut max_jitter = first.jitter;
    let mut m_ok = first.converged;
    let mut coef: Vec<f64> = first.coef.iter().map(|b| b - c).collect();
    let mut q = problem.objective(&coef, nu);
    let mut trace = vec![q];
    let mut converged = false;
    let mut iters = 1;

    while iters < opts.max_em_iters {
        iters += 1;
        let h = problem.h_values(&coef);
        let resp = e_step(&h, labels, &rates);
        // warm start at the current shifted coefficients
        let init: Vec<f64> = coef.iter().map(|b| b + c).collect();
        let step = m_step(&resp, design, penalty, nu, &init, opts)?;
        max_jitter = max_jitter.max(step.jitter);
        m_ok = step.converged;
        let next: Vec<f64> = step.coef.iter().map(|b| b - c).collect();
        let q_next = problem.objective(&next, nu);
        let change = (q_next - q).abs();
        coef = next;
        q = q_next;
        trace.push(q);
        if change <= opts.em_tol * q.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    let roughness = problem.roughness(&coef);
    Ok(DensityRatioFit {
        coefficients: coef,
        basis: Arc::clone(problem.basis()),
        consts,
        rates,
        nu,
        n_em_iters: iters,
        final_objective: q,
        objective_trace: trace,
        converged: converged && m_ok,
        roughness,
        max_jitter,
    })
}
