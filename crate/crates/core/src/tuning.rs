//! Stratified K-fold cross-validation of the penalty weight `nu`.
//!
//! Each candidate is scored by the observed log-likelihood of the held-out
//! fold, evaluated with `h` and the constants of the fit on the remaining
//! folds, then summed over folds.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::SplineBasis;
use crate::error::{Error, Result};
use crate::likelihood::{observed_loglik, MixtureRates, PenalizedProblem, TwoSampleData};
use crate::solver::{fit_em, EmOptions};

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || points == 0 {
        return Err(Error::InvalidParameter(format!(
            "log grid needs 0 < lo <= hi and points >= 1, got [{lo}, {hi}] x {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[points - 1] = hi;
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_folds: usize,
    pub nu_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            n_folds: 5,
            nu_grid: log_grid(1e-4, 1e2, 15).expect("static grid"),
            seed: 0,
        }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_folds must be at least 2, got {}",
                self.n_folds
            )));
        }
        if self.nu_grid.is_empty() {
            return Err(Error::InvalidParameter("empty nu grid".into()));
        }
        if self.nu_grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("nu grid values must be positive".into()));
        }
        if self.nu_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "nu grid must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Held-out score of one candidate. `score` is `None` when any fold failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub nu: f64,
    pub score: Option<f64>,
    pub failed_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub nu_star: f64,
    pub curve: Vec<CvPoint>,
}

/// Fold index of every pooled observation. Each label class is shuffled and
/// dealt round-robin, so per-class fold sizes differ by at most one.
pub fn stratified_folds(labels: &[bool], n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut fold = vec![0; labels.len()];
    let mut offset = 0;
    for (stream, class) in [false, true].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < n_folds {
            return Err(Error::InsufficientData(format!(
                "label class {} has {} observations, fewer than {n_folds} folds",
                u8::from(class),
                idx.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            fold[i] = (pos + offset) % n_folds;
        }
        offset += idx.len();
    }
    Ok(fold)
}

fn fold_score(
    problem: &PenalizedProblem,
    folds: &[usize],
    k: usize,
    nu: f64,
    opts: &EmOptions,
) -> Result<f64> {
    let (train, test): (Vec<usize>, Vec<usize>) = (0..folds.len()).partition(|&i| folds[i] != k);
    let train_problem = problem.subset(&train)?;
    let fit = fit_em(&train_problem, nu, opts)?;
    let h: Vec<f64> = test
        .iter()
        .map(|&i| fit.h(problem.points()[i]))
        .collect::<Result<_>>()?;
    let labels: Vec<bool> = test.iter().map(|&i| problem.labels()[i]).collect();
    let score = observed_loglik(&h, &labels, &fit.consts, &fit.rates)?;
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::DegenerateData(format!("non-finite held-out score at nu={nu}")))
    }
}

/// Cross-validated `nu` for an assembled problem. All `(nu, fold)` fits run
/// in parallel; the maximizer of the summed score wins, exact ties going to
/// the larger `nu`.
pub fn cv_select_nu_problem(
    problem: &PenalizedProblem,
    plan: &CvPlan,
    opts: &EmOptions,
) -> Result<CvResult> {
    plan.validate()?;
    opts.validate()?;
    let folds = stratified_folds(problem.labels(), plan.n_folds, plan.seed)?;
    let jobs: Vec<(usize, usize)> = (0..plan.nu_grid.len())
        .flat_map(|j| (0..plan.n_folds).map(move |k| (j, k)))
        .collect();
    let scores: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(j, k)| fold_score(problem, &folds, k, plan.nu_grid[j], opts).ok())
        .collect();

    let curve: Vec<CvPoint> = plan
        .nu_grid
        .iter()
        .enumerate()
        .map(|(j, &nu)| {
            let row = &scores[j * plan.n_folds..(j + 1) * plan.n_folds];
            let failed_folds = row.iter().filter(|s| s.is_none()).count();
            let score = if failed_folds == 0 {
                Some(row.iter().flatten().sum())
            } else {
                None
            };
            CvPoint {
                nu,
                score,
                failed_folds,
            }
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for p in &curve {
        if let Some(s) = p.score {
            if best.is_none_or(|(b, _)| s >= b) {
                best = Some((s, p.nu));
            }
        }
    }
    let (_, nu_star) = best.ok_or(Error::AllFitsFailed)?;
    Ok(CvResult { nu_star, curve })
}

pub fn cv_select_nu(
    data: &TwoSampleData,
    basis: Arc<SplineBasis>,
    rates: MixtureRates,
    plan: &CvPlan,
    opts: &EmOptions,
) -> Result<CvResult> {
    let problem = PenalizedProblem::new(data, basis, rates)?;
    cv_select_nu_problem(&problem, plan, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn sample(seed: u64, n: usize, m: usize) -> TwoSampleData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = (0..m)
            .map(|_| 1.0 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        TwoSampleData::new(x, y, 0.01).unwrap()
    }

    fn small_basis() -> Arc<SplineBasis> {
        Arc::new(SplineBasis::new(12, 3).unwrap())
    }

    #[test]
    fn default_grid_spans_decades() {
        let g = CvPlan::default().nu_grid;
        assert_eq!(g.len(), 15);
        assert!((g[0] - 1e-4).abs() < 1e-18);
        assert_eq!(g[14], 1e2);
        // six decades over fourteen steps
        let ratio = g[1] / g[0];
        assert!((ratio - 10f64.powf(6.0 / 14.0)).abs() < 1e-12);
    }

    #[test]
    fn plan_validation() {
        let p = CvPlan {
            n_folds: 1,
            ..CvPlan::default()
        };
        assert!(p.validate().is_err());
        let p = CvPlan {
            nu_grid: vec![1.0, 1.0],
            ..CvPlan::default()
        };
        assert!(p.validate().is_err());
        let p = CvPlan {
            nu_grid: vec![],
            ..CvPlan::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<bool> = (0..103).map(|i| i % 3 == 0).collect();
        let f = stratified_folds(&labels, 5, 11).unwrap();
        for class in [false, true] {
            let mut counts = [0usize; 5];
            for (i, &k) in f.iter().enumerate() {
                if labels[i] == class {
                    counts[k] += 1;
                }
            }
            let lo = counts.iter().min().unwrap();
            let hi = counts.iter().max().unwrap();
            assert!(hi - lo <= 1, "{counts:?}");
        }
    }

    #[test]
    fn too_few_in_a_class() {
        let data = TwoSampleData::new(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], vec![0.7, 0.8], 0.01)
            .unwrap();
        let err = cv_select_nu(
            &data,
            small_basis(),
            MixtureRates::perfect(),
            &CvPlan::default(),
            &EmOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn single_value_grid() {
        let data = sample(1, 60, 50);
        let plan = CvPlan {
            nu_grid: vec![0.5],
            ..CvPlan::default()
        };
        let rates = MixtureRates::new(0.95, 0.9).unwrap();
        let r = cv_select_nu(&data, small_basis(), rates, &plan, &EmOptions::default()).unwrap();
        assert_eq!(r.nu_star, 0.5);
        assert_eq!(r.curve.len(), 1);
        assert!(r.curve[0].score.unwrap() <= 0.0);
    }

    #[test]
    fn deterministic_and_argmax() {
        let data = sample(2, 120, 100);
        let rates = MixtureRates::new(0.966, 0.927).unwrap();
        let plan = CvPlan {
            nu_grid: log_grid(1e-3, 1e2, 6).unwrap(),
            n_folds: 4,
            seed: 9,
        };
        let opts = EmOptions::default();
        let a = cv_select_nu(&data, small_basis(), rates, &plan, &opts).unwrap();
        let b = cv_select_nu(&data, small_basis(), rates, &plan, &opts).unwrap();
        assert_eq!(a, b);
        let best = a
            .curve
            .iter()
            .map(|p| p.score.unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(a.curve.iter().all(|p| p.score.unwrap().is_finite()));
        assert!(a.curve.iter().all(|p| p.score.unwrap() <= 0.0));
        let at_star = a.curve.iter().find(|p| p.nu == a.nu_star).unwrap();
        assert_eq!(at_star.score.unwrap(), best);
    }

    #[test]
    fn log_grid_rejects_bad_bounds() {
        assert!(log_grid(0.0, 1.0, 3).is_err());
        assert!(log_grid(2.0, 1.0, 3).is_err());
        assert_eq!(log_grid(3.0, 3.0, 1).unwrap(), vec![3.0]);
    }
}
