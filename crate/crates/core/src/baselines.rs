//! Comparison estimators: the fully nonparametric ECDF inversion and the
//! naive fit that takes the reference standard at face value.

use std::sync::Arc;

use crate::basis::SplineBasis;
use crate::error::{Error, Result};
use crate::estimators::WeightedCdfPair;
use crate::likelihood::{MixtureRates, PenalizedProblem, TwoSampleData};
use crate::solver::{fit_em, DensityRatioFit, EmOptions};

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("empirical CDF of no values".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= t) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

pub fn empirical_cdf(values: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(values)
}

/// Sorts grid values ascending, then clips them to `[0, 1]`.
pub fn monotone_rearrange(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

/// Per-group ECDFs over the pooled support.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfPair {
    pub support: Vec<f64>,
    pub control: Vec<f64>,
    pub case: Vec<f64>,
}

pub fn group_ecdfs(x: &[f64], y: &[f64]) -> Result<EcdfPair> {
    let fx = EmpiricalCdf::new(x)?;
    let fy = EmpiricalCdf::new(y)?;
    let mut support: Vec<f64> = x.iter().chain(y).copied().collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    Ok(EcdfPair {
        control: support.iter().map(|&t| fx.eval(t)).collect(),
        case: support.iter().map(|&t| fy.eval(t)).collect(),
        support,
    })
}

/// Solves the two mixture equations for `F0`, `F1` at every pooled support
/// point, then rearranges each into a proper CDF.
pub fn np_inversion_cdfs(data: &TwoSampleData, rates: &MixtureRates) -> Result<WeightedCdfPair> {
    np_inversion_from_samples(data.scaled_x(), data.scaled_y(), rates)
}

pub fn np_inversion_from_samples(
    x: &[f64],
    y: &[f64],
    rates: &MixtureRates,
) -> Result<WeightedCdfPair> {
    let det = rates.pi0 + rates.pi1 - 1.0;
    if det <= 0.0 {
        return Err(Error::Identifiability {
            pi0: rates.pi0,
            pi1: rates.pi1,
        });
    }
    let e = group_ecdfs(x, y)?;
    let f0: Vec<f64> = e
        .control
        .iter()
        .zip(&e.case)
        .map(|(&a, &b)| (rates.pi1 * a - (1.0 - rates.pi0) * b) / det)
        .collect();
    let f1: Vec<f64> = e
        .control
        .iter()
        .zip(&e.case)
        .map(|(&a, &b)| (rates.pi0 * b - (1.0 - rates.pi1) * a) / det)
        .collect();
    let f0 = monotone_rearrange(&f0);
    let f1 = monotone_rearrange(&f1);
    WeightedCdfPair::from_cdf_values(e.support, &f0, &f1)
}

/// The proposed fit with the reference standard treated as exact.
pub fn naive_fit(
    data: &TwoSampleData,
    basis: Arc<SplineBasis>,
    nu: f64,
    opts: &EmOptions,
) -> Result<DensityRatioFit> {
    let problem = PenalizedProblem::new(data, basis, MixtureRates::perfect())?;
    fit_em(&problem, nu, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{auc, roc_curve, default_s_grid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ecdf_basics() {
        let f = empirical_cdf(&[0.5]).unwrap();
        assert_eq!(f.eval(0.49), 0.0);
        assert_eq!(f.eval(0.5), 1.0);
        let f = empirical_cdf(&[0.2, 0.8]).unwrap();
        assert_eq!(f.eval(0.5), 0.5);
        assert!(matches!(empirical_cdf(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn ecdf_dkw_uniform() {
        // DKW: P(sup |F_n - F| > eps) <= 2 exp(-2 n eps^2); eps = 0.0515 at 99%
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let v: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let f = empirical_cdf(&v).unwrap();
        let eps = ((2.0f64 / 0.01).ln() / (2.0 * 1000.0)).sqrt();
        assert!(eps < 0.08);
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let sup = sorted
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let hi = f.eval(t) - t;
                let lo = t - i as f64 / 1000.0;
                hi.abs().max(lo.abs())
            })
            .fold(0.0, f64::max);
        assert!(sup < 0.08, "sup {sup}");
    }

    #[test]
    fn rearrangement_examples() {
        assert_eq!(monotone_rearrange(&[0.1, 0.2, 0.3]), vec![0.1, 0.2, 0.3]);
        assert_eq!(monotone_rearrange(&[0.3, 0.1, 0.2]), vec![0.1, 0.2, 0.3]);
        assert_eq!(monotone_rearrange(&[-0.05, 0.5, 1.02]), vec![0.0, 0.5, 1.0]);
    }

    proptest! {
        #[test]
        fn rearrangement_is_monotone_and_bounded(v in prop::collection::vec(-0.5f64..1.5, 1..60)) {
            let r = monotone_rearrange(&v);
            prop_assert!(r.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(r.iter().all(|x| (0.0..=1.0).contains(x)));
            // interior values survive as a multiset
            let mut inner: Vec<f64> = v.iter().copied().filter(|x| (0.0..=1.0).contains(x)).collect();
            inner.sort_by(f64::total_cmp);
            let kept: Vec<f64> = r.iter().copied().filter(|x| *x > 0.0 && *x < 1.0).collect();
            let inner_open: Vec<f64> = inner.into_iter().filter(|x| *x > 0.0 && *x < 1.0).collect();
            prop_assert_eq!(kept, inner_open);
            prop_assert_eq!(monotone_rearrange(&r), r);
        }
    }

    #[test]
    fn inversion_hand_value() {
        let r = MixtureRates::new(0.9, 0.8).unwrap();
        let f0 = (r.pi1 * 0.6 - (1.0 - r.pi0) * 0.3) / (r.pi0 + r.pi1 - 1.0);
        assert_relative_eq!(f0, 0.642857, epsilon = 1e-6);
    }

    #[test]
    fn inversion_with_perfect_labels_is_group_ecdfs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..0.7)).collect();
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(0.3..1.0)).collect();
        let c = np_inversion_from_samples(&x, &y, &MixtureRates::perfect()).unwrap();
        let fx = empirical_cdf(&x).unwrap();
        let fy = empirical_cdf(&y).unwrap();
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            assert_eq!(c.cdf0(t), fx.eval(t));
            assert_eq!(c.cdf1(t), fy.eval(t));
        }
        // Mann-Whitney with mid-ranks
        let mut mw = 0.0;
        for a in &x {
            for b in &y {
                mw += if b > a { 1.0 } else if b == a { 0.5 } else { 0.0 };
            }
        }
        mw /= (x.len() * y.len()) as f64;
        assert!((auc(&c) - mw).abs() < 1e-12);
        let roc = roc_curve(&c, &default_s_grid(101));
        assert!(roc.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn inversion_requires_identifiability() {
        let bad = MixtureRates { pi0: 0.4, pi1: 0.5 };
        assert!(matches!(
            np_inversion_from_samples(&[0.1], &[0.2], &bad),
            Err(Error::Identifiability { .. })
        ));
    }

    #[test]
    fn naive_matches_perfect_rate_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..60).map(|_| rng.random_range(0.4..1.4)).collect();
        let data = TwoSampleData::new(x, y, 0.01).unwrap();
        let basis = Arc::new(SplineBasis::new(10, 3).unwrap());
        let opts = EmOptions::default();
        let a = naive_fit(&data, Arc::clone(&basis), 0.3, &opts).unwrap();
        let p = PenalizedProblem::new(&data, basis, MixtureRates::perfect()).unwrap();
        let b = fit_em(&p, 0.3, &opts).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
    }
}
