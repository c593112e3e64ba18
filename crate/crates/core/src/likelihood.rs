//! Observed log-likelihood of the log density ratio `h = log(f1 / f0)` under
//! the two-sample design with an imperfect reference label, and its
//! roughness-penalized version.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{fit_transform, Design, DomainTransform, SplineBasis};
use crate::error::{Error, Result};

/// Known accuracy of the reference standard: `pi0 = P(G=0 | R=0)` and
/// `pi1 = P(G=1 | R=1)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MixtureRates {
    pub pi0: f64,
    pub pi1: f64,
}

impl MixtureRates {
    pub fn new(pi0: f64, pi1: f64) -> Result<Self> {
        for (name, v) in [("pi0", pi0), ("pi1", pi1)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must lie in (0, 1]"
                )));
            }
        }
        if pi0 + pi1 <= 1.0 {
            return Err(Error::Identifiability { pi0, pi1 });
        }
        Ok(Self { pi0, pi1 })
    }

    /// The reference standard treated as a gold standard.
    pub fn perfect() -> Self {
        Self { pi0: 1.0, pi1: 1.0 }
    }
}

/// Sampling constants of the pooled sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConstants {
    /// `m / (n + m)`, the nominal-case fraction.
    pub lambda: f64,
    /// `{n (1 - pi0) + m pi1} / (n + m)`, the true-case fraction.
    pub lambda_star: f64,
    /// `log{lambda_star / (1 - lambda_star)}`.
    pub c: f64,
}

pub fn model_constants(n: usize, m: usize, rates: MixtureRates) -> Result<ModelConstants> {
    if n == 0 || m == 0 {
        return Err(Error::InsufficientData(format!(
            "both groups must be nonempty (n = {n}, m = {m})"
        )));
    }
    if rates.pi0 + rates.pi1 <= 1.0 {
        return Err(Error::Identifiability {
            pi0: rates.pi0,
            pi1: rates.pi1,
        });
    }
    let total = (n + m) as f64;
    let lambda = m as f64 / total;
    let lambda_star = (n as f64 * (1.0 - rates.pi0) + m as f64 * rates.pi1) / total;
    let c = (lambda_star / (1.0 - lambda_star)).ln();
    Ok(ModelConstants {
        lambda,
        lambda_star,
        c,
    })
}

/// `ln(a + b e^h)` for `a, b >= 0`, not both zero, without overflow.
pub(crate) fn ln_affine_exp(a: f64, b: f64, h: f64) -> f64 {
    if b == 0.0 {
        return a.ln();
    }
    let lb = b.ln() + h;
    if a == 0.0 {
        return lb;
    }
    let la = a.ln();
    let (hi, lo) = if la > lb { (la, lb) } else { (lb, la) };
    hi + (lo - hi).exp().ln_1p()
}

/// `b e^h / (a + b e^h)`, i.e. the derivative of [`ln_affine_exp`] in `h`.
pub(crate) fn share_exp(a: f64, b: f64, h: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return 1.0;
    }
    logistic(h + b.ln() - a.ln())
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Coefficients `(a1, b1)`, `(a0, b0)` of the case / control numerators and
/// `(ad, bd)` of the shared denominator, each of the form `a + b e^h`.
struct Terms {
    case: (f64, f64),
    control: (f64, f64),
    denom: (f64, f64),
}

impl Terms {
    fn new(consts: &ModelConstants, rates: &MixtureRates) -> Self {
        let l = consts.lambda;
        let ls = consts.lambda_star;
        Self {
            case: ((1.0 - rates.pi1) * l, rates.pi1 * l),
            control: (rates.pi0 * (1.0 - l), (1.0 - rates.pi0) * (1.0 - l)),
            denom: (1.0 - ls, ls),
        }
    }

    fn log_prob(&self, h: f64, is_case: bool) -> f64 {
        let (a, b) = if is_case { self.case } else { self.control };
        let v = ln_affine_exp(a, b, h) - ln_affine_exp(self.denom.0, self.denom.1, h);
        // a log-probability; rounding can push it a hair above zero
        v.min(0.0)
    }

    fn dlog_prob(&self, h: f64, is_case: bool) -> f64 {
        let (a, b) = if is_case { self.case } else { self.control };
        share_exp(a, b, h) - share_exp(self.denom.0, self.denom.1, h)
    }
}

/// `P(R = 1 | S = 1, T = t)` given `h(t)`.
pub fn posterior_case_prob(h: f64, consts: &ModelConstants, rates: &MixtureRates) -> f64 {
    Terms::new(consts, rates).log_prob(h, true).exp()
}

/// Observed log-likelihood summed over the pooled sample.
pub fn observed_loglik(
    h_vals: &[f64],
    labels: &[bool],
    consts: &ModelConstants,
    rates: &MixtureRates,
) -> Result<f64> {
    if h_vals.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: h_vals.len(),
        });
    }
    let terms = Terms::new(consts, rates);
    Ok(h_vals
        .iter()
        .zip(labels)
        .map(|(&h, &r)| terms.log_prob(h, r))
        .sum())
}

/// Per-observation derivative of the observed log-likelihood in `h`.
pub fn loglik_score(
    h_vals: &[f64],
    labels: &[bool],
    consts: &ModelConstants,
    rates: &MixtureRates,
) -> Vec<f64> {
    let terms = Terms::new(consts, rates);
    h_vals
        .iter()
        .zip(labels)
        .map(|(&h, &r)| terms.dlog_prob(h, r))
        .collect()
}

/// Biomarker values split by nominal label, with their common map onto the
/// unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleData {
    x: Vec<f64>,
    y: Vec<f64>,
    transform: DomainTransform,
    scaled: Vec<f64>,
    labels: Vec<bool>,
}

impl TwoSampleData {
    /// `x` are nominal controls (R = 0), `y` nominal cases (R = 1). The pooled
    /// order is all of `x` followed by all of `y`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, margin: f64) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::InsufficientData(format!(
                "both groups must be nonempty (n = {}, m = {})",
                x.len(),
                y.len()
            )));
        }
        let pooled: Vec<f64> = x.iter().chain(&y).copied().collect();
        let (transform, scaled) = fit_transform(&pooled, margin)?;
        let labels = std::iter::repeat_n(false, x.len())
            .chain(std::iter::repeat_n(true, y.len()))
            .collect();
        Ok(Self {
            x,
            y,
            transform,
            scaled,
            labels,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn transform(&self) -> &DomainTransform {
        &self.transform
    }

    /// Pooled values mapped to `[0, 1]`.
    pub fn scaled(&self) -> &[f64] {
        &self.scaled
    }

    /// `true` for nominal cases.
    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn scaled_x(&self) -> &[f64] {
        &self.scaled[..self.x.len()]
    }

    pub fn scaled_y(&self) -> &[f64] {
        &self.scaled[self.x.len()..]
    }
}

/// Everything needed to evaluate the penalized objective for a coefficient
/// vector: design rows at the pooled points, labels, the penalty matrix and
/// the model constants of this particular sample.
#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    basis: Arc<SplineBasis>,
    penalty: Arc<DMatrix<f64>>,
    points: Vec<f64>,
    design: Design,
    labels: Vec<bool>,
    rates: MixtureRates,
    consts: ModelConstants,
}

impl PenalizedProblem {
    pub fn new(data: &TwoSampleData, basis: Arc<SplineBasis>, rates: MixtureRates) -> Result<Self> {
        let penalty = Arc::new(basis.penalty_matrix()?);
        Self::from_parts(
            data.scaled().to_vec(),
            data.labels().to_vec(),
            basis,
            penalty,
            rates,
        )
    }

    pub fn from_parts(
        points: Vec<f64>,
        labels: Vec<bool>,
        basis: Arc<SplineBasis>,
        penalty: Arc<DMatrix<f64>>,
        rates: MixtureRates,
    ) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: labels.len(),
                found: points.len(),
            });
        }
        let m = labels.iter().filter(|&&r| r).count();
        let n = labels.len() - m;
        let consts = model_constants(n, m, rates)?;
        let design = basis.design(&points)?;
        Ok(Self {
            basis,
            penalty,
            points,
            design,
            labels,
            rates,
            consts,
        })
    }

    /// Sub-problem on the given pooled indices; constants are recomputed from
    /// the subset's group sizes.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let labels: Vec<bool> = idx.iter().map(|&i| self.labels[i]).collect();
        let m = labels.iter().filter(|&&r| r).count();
        let consts = model_constants(labels.len() - m, m, self.rates)?;
        Ok(Self {
            basis: Arc::clone(&self.basis),
            penalty: Arc::clone(&self.penalty),
            points: idx.iter().map(|&i| self.points[i]).collect(),
            design: self.design.subset(idx),
            labels,
            rates: self.rates,
            consts,
        })
    }

    /// Same data and basis, different reference-standard accuracy.
    pub fn with_rates(&self, rates: MixtureRates) -> Result<Self> {
        let m = self.labels.iter().filter(|&&r| r).count();
        let consts = model_constants(self.labels.len() - m, m, rates)?;
        Ok(Self {
            rates,
            consts,
            ..self.clone()
        })
    }

    pub fn basis(&self) -> &Arc<SplineBasis> {
        &self.basis
    }

    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    pub fn penalty_arc(&self) -> &Arc<DMatrix<f64>> {
        &self.penalty
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn rates(&self) -> &MixtureRates {
        &self.rates
    }

    pub fn consts(&self) -> &ModelConstants {
        &self.consts
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `h(T_i) = b^T phi(T_i)` at every pooled point.
    pub fn h_values(&self, coef: &[f64]) -> Vec<f64> {
        self.design.mul(coef)
    }

    pub fn loglik(&self, coef: &[f64]) -> f64 {
        let h = self.h_values(coef);
        let terms = Terms::new(&self.consts, &self.rates);
        h.iter()
            .zip(&self.labels)
            .map(|(&h, &r)| terms.log_prob(h, r))
            .sum()
    }

    /// `b^T Phi_2 b = int (h'')^2`.
    pub fn roughness(&self, coef: &[f64]) -> f64 {
        quad_form(&self.penalty, coef)
    }

    /// `Q(b) = l(b^T phi) - nu b^T Phi_2 b`.
    pub fn objective(&self, coef: &[f64], nu: f64) -> f64 {
        self.loglik(coef) - nu * self.roughness(coef)
    }

    /// Gradient of [`Self::objective`] with respect to `b`.
    pub fn gradient(&self, coef: &[f64], nu: f64) -> Vec<f64> {
        let h = self.h_values(coef);
        let score = loglik_score(&h, &self.labels, &self.consts, &self.rates);
        let mut g = self.design.tmul(&score);
        let pb = &*self.penalty * DVector::from_column_slice(coef);
        for (gi, pi) in g.iter_mut().zip(pb.iter()) {
            *gi -= 2.0 * nu * pi;
        }
        g
    }
}

pub(crate) fn quad_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = DVector::from_column_slice(v);
    v.dot(&(m * &v))
}

/// `Q(b)` with an explicit check on the penalty weight.
pub fn penalized_objective(coef: &[f64], problem: &PenalizedProblem, nu: f64) -> Result<f64> {
    if nu < 0.0 || nu.is_nan() {
        return Err(Error::NegativeNu(nu));
    }
    if coef.len() != problem.basis().n_basis() {
        return Err(Error::LengthMismatch {
            expected: problem.basis().n_basis(),
            found: coef.len(),
        });
    }
    Ok(problem.objective(coef, nu))
}
