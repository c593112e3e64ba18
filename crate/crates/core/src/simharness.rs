//! Gaussian designs with a contaminated reference standard, their true ROC
//! targets, and a Monte Carlo runner producing bias/sd/mse tables.
//!
//! Every replication draws from its own ChaCha8 stream keyed by
//! `(seed, replication)`, so results do not depend on how rayon schedules
//! the work.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baselines::np_inversion_cdfs;
use crate::basis::SplineBasis;
use crate::error::{Error, Result};
use crate::estimators::{auc, estimate_cdfs, pauc, youden, youden_from_cdfs, WeightedCdfPair};
use crate::likelihood::{MixtureRates, PenalizedProblem, TwoSampleData};
use crate::solver::{fit_em, EmOptions};
use crate::tuning::{cv_select_nu_problem, CvPlan};

/// ROC operating point reported in the tables.
pub const ROC_POINT: f64 = 0.2;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal quantile, polished by one Newton step.
pub fn probit(p: f64) -> f64 {
    let z = std_normal();
    let x = z.inverse_cdf(p);
    if !x.is_finite() {
        return x;
    }
    let dens = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    x - (z.cdf(x) - p) / dens
}

/// `(pi0, pi1)` implied by prevalence, sensitivity and specificity.
pub fn bayes_rates(prevalence: f64, se: f64, sp: f64) -> Result<MixtureRates> {
    for (name, v) in [("prevalence", prevalence), ("se", se), ("sp", sp)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1], got {v}")));
        }
    }
    let pi1 = se * prevalence / (se * prevalence + (1.0 - sp) * (1.0 - prevalence));
    let pi0 = sp * (1.0 - prevalence) / (sp * (1.0 - prevalence) + (1.0 - se) * prevalence);
    MixtureRates::new(pi0, pi1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Dgp {
    /// Healthy `N(0, 1)`, diseased `N(1, 1)`.
    UnivariateNormal,
    /// Two correlated unit-variance markers. Diseased means are `[2, 1]` and
    /// healthy means `[0, 0]`; `literal_orientation` swaps the two.
    BivariateNormal { rho: f64, literal_orientation: bool },
}

impl Dgp {
    pub fn bivariate(rho: f64) -> Self {
        Dgp::BivariateNormal {
            rho,
            literal_orientation: false,
        }
    }

    /// Diseased-minus-healthy mean shift of each marker.
    pub fn shifts(&self) -> Vec<f64> {
        match *self {
            Dgp::UnivariateNormal => vec![1.0],
            Dgp::BivariateNormal {
                literal_orientation: false,
                ..
            } => vec![2.0, 1.0],
            Dgp::BivariateNormal {
                literal_orientation: true,
                ..
            } => vec![-2.0, -1.0],
        }
    }

    fn means(&self, diseased: bool) -> (f64, f64) {
        match *self {
            Dgp::UnivariateNormal => (f64::from(u8::from(diseased)), 0.0),
            Dgp::BivariateNormal {
                literal_orientation,
                ..
            } => {
                if diseased != literal_orientation {
                    (2.0, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "EM")]
    Em,
    #[serde(rename = "NP")]
    Np,
    #[serde(rename = "naive")]
    Naive,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Em, Method::Np, Method::Naive];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Em => "EM",
            Method::Np => "NP",
            Method::Naive => "naive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "ROC(0.2)")]
    Roc,
    #[serde(rename = "AUC")]
    Auc,
    #[serde(rename = "Youden")]
    Youden,
    #[serde(rename = "pAUC")]
    Pauc,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::Roc, Target::Auc, Target::Youden, Target::Pauc];

    pub fn label(&self) -> &'static str {
        match self {
            Target::Roc => "ROC(0.2)",
            Target::Auc => "AUC",
            Target::Youden => "Youden",
            Target::Pauc => "pAUC",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The four reported functionals, for one marker or as a difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub roc: f64,
    pub auc: f64,
    pub youden: f64,
    pub pauc: f64,
}

impl Targets {
    pub fn get(&self, t: Target) -> f64 {
        match t {
            Target::Roc => self.roc,
            Target::Auc => self.auc,
            Target::Youden => self.youden,
            Target::Pauc => self.pauc,
        }
    }

    pub fn minus(&self, other: &Targets) -> Targets {
        Targets {
            roc: self.roc - other.roc,
            auc: self.auc - other.auc,
            youden: self.youden - other.youden,
            pauc: self.pauc - other.pauc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerTruth {
    pub targets: Targets,
    /// Optimal Youden cutoff on the raw scale.
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueTargets {
    pub markers: Vec<MarkerTruth>,
    /// Marker 1 minus marker 2 for the bivariate design.
    pub delta: Option<Targets>,
}

impl TrueTargets {
    /// What the simulation tables compare against.
    pub fn reported(&self) -> Targets {
        self.delta.unwrap_or(self.markers[0].targets)
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Targets for healthy `N(0, 1)` against diseased `N(shift, 1)`.
pub fn gaussian_shift_truth(shift: f64, s0: f64, s1: f64) -> Result<MarkerTruth> {
    if !(0.0..=1.0).contains(&s0) || !(0.0..=1.0).contains(&s1) || s0 >= s1 {
        return Err(Error::BadInterval { s0, s1 });
    }
    let z = std_normal();
    let roc = |s: f64| z.cdf(shift + probit(s));
    let pauc = adaptive_simpson(&roc, s0, s1, 1e-13) / (s1 - s0);
    // J(c) = Phi(c) - Phi(c - shift) peaks at shift / 2 when shift > 0
    let (youden, cutoff) = if shift > 0.0 {
        (2.0 * z.cdf(0.5 * shift) - 1.0, 0.5 * shift)
    } else {
        (0.0, f64::NAN)
    };
    Ok(MarkerTruth {
        targets: Targets {
            roc: roc(ROC_POINT),
            auc: z.cdf(shift / std::f64::consts::SQRT_2),
            youden,
            pauc,
        },
        cutoff,
    })
}

pub fn true_targets(dgp: &Dgp, s0: f64, s1: f64) -> Result<TrueTargets> {
    if let Dgp::BivariateNormal { rho, .. } = dgp {
        if !(rho.abs() < 1.0) {
            return Err(Error::UnsupportedDgp(format!("correlation {rho} outside (-1, 1)")));
        }
    }
    let markers: Vec<MarkerTruth> = dgp
        .shifts()
        .into_iter()
        .map(|d| gaussian_shift_truth(d, s0, s1))
        .collect::<Result<_>>()?;
    let delta = (markers.len() == 2).then(|| markers[0].targets.minus(&markers[1].targets));
    Ok(TrueTargets { markers, delta })
}

/// How `nu` is chosen for the spline fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum NuSelection {
    Fixed { nu: f64 },
    /// Cross-validate on replication 0, reuse for all replications.
    CvFirstRep { plan: CvPlan },
    CvEveryRep { plan: CvPlan },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub dgp: Dgp,
    pub prevalence: f64,
    pub se: f64,
    pub sp: f64,
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub s0: f64,
    pub s1: f64,
    pub n_basis: usize,
    /// Polynomial degree of the spline basis.
    pub degree: usize,
    pub margin: f64,
    pub nu: NuSelection,
    pub em: EmOptions,
}

impl Scenario {
    /// Univariate design with the defaults used throughout the tables.
    pub fn univariate(se_sp: f64, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            dgp: Dgp::UnivariateNormal,
            prevalence: 0.4,
            se: se_sp,
            sp: se_sp,
            n,
            m: n,
            reps,
            seed,
            methods: Method::ALL.to_vec(),
            s0: 0.1,
            s1: 0.3,
            n_basis: 50,
            degree: 3,
            margin: 0.01,
            nu: NuSelection::CvFirstRep {
                plan: CvPlan {
                    seed,
                    ..CvPlan::default()
                },
            },
            em: EmOptions::default(),
        }
    }

    pub fn bivariate(se_sp: f64, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            dgp: Dgp::bivariate(0.2),
            ..Self::univariate(se_sp, n, reps, seed)
        }
    }

    pub fn rates(&self) -> Result<MixtureRates> {
        bayes_rates(self.prevalence, self.se, self.sp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("se", self.se), ("sp", self.sp)] {
            if !(v > 0.5 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0.5, 1], got {v}")));
            }
        }
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidParameter("n and m must be positive".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no estimators requested".into()));
        }
        self.rates()?;
        true_targets(&self.dgp, self.s0, self.s1)?;
        Ok(())
    }

    /// Random stream for one replication.
    pub fn rng(&self, rep: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep as u64);
        rng
    }
}

/// One contaminated two-sample draw. `markers` holds one data set per
/// marker, all sharing the same subjects.
#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub markers: Vec<TwoSampleData>,
    /// True disease status of the nominal controls.
    pub hidden_x: Vec<bool>,
    /// True disease status of the nominal cases.
    pub hidden_y: Vec<bool>,
}

fn draw_status(rng: &mut impl Rng, nominal_case: bool, rates: &MixtureRates) -> bool {
    let u: f64 = rng.random();
    if nominal_case {
        u < rates.pi1
    } else {
        u >= rates.pi0
    }
}

fn draw_subjects(
    dgp: &Dgp,
    count: usize,
    nominal_case: bool,
    rates: &MixtureRates,
    rng: &mut impl Rng,
) -> (Vec<bool>, Vec<(f64, f64)>) {
    let rho = match *dgp {
        Dgp::UnivariateNormal => 0.0,
        Dgp::BivariateNormal { rho, .. } => rho,
    };
    let tail = (1.0 - rho * rho).sqrt();
    let mut status = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let g = draw_status(rng, nominal_case, rates);
        let (mu1, mu2) = dgp.means(g);
        let z1: f64 = rng.sample(StandardNormal);
        let v = match dgp {
            Dgp::UnivariateNormal => (mu1 + z1, 0.0),
            Dgp::BivariateNormal { .. } => {
                let z2: f64 = rng.sample(StandardNormal);
                (mu1 + z1, mu2 + rho * z1 + tail * z2)
            }
        };
        status.push(g);
        values.push(v);
    }
    (status, values)
}

fn simulate(
    dgp: &Dgp,
    n: usize,
    m: usize,
    rates: &MixtureRates,
    margin: f64,
    rng: &mut impl Rng,
) -> Result<SimulatedSample> {
    let (hidden_x, vx) = draw_subjects(dgp, n, false, rates, rng);
    let (hidden_y, vy) = draw_subjects(dgp, m, true, rates, rng);
    let n_markers = dgp.shifts().len();
    let pick = |v: &[(f64, f64)], k: usize| -> Vec<f64> {
        v.iter().map(|p| if k == 0 { p.0 } else { p.1 }).collect()
    };
    let markers = (0..n_markers)
        .map(|k| TwoSampleData::new(pick(&vx, k), pick(&vy, k), margin))
        .collect::<Result<_>>()?;
    Ok(SimulatedSample {
        markers,
        hidden_x,
        hidden_y,
    })
}

/// Draws a univariate sample: nominal controls are `N(1, 1)` with
/// probability `1 - pi0`, nominal cases `N(0, 1)` with probability `1 - pi1`.
pub fn gen_univariate_normal(scenario: &Scenario, rng: &mut impl Rng) -> Result<SimulatedSample> {
    let rates = scenario.rates()?;
    simulate(&Dgp::UnivariateNormal, scenario.n, scenario.m, &rates, scenario.margin, rng)
}

/// Draws a two-marker sample with the scenario's correlation.
pub fn gen_bivariate_normal(scenario: &Scenario, rng: &mut impl Rng) -> Result<SimulatedSample> {
    let dgp = match scenario.dgp {
        d @ Dgp::BivariateNormal { .. } => d,
        Dgp::UnivariateNormal => Dgp::bivariate(0.2),
    };
    let rates = scenario.rates()?;
    simulate(&dgp, scenario.n, scenario.m, &rates, scenario.margin, rng)
}

pub fn generate(scenario: &Scenario, rng: &mut impl Rng) -> Result<SimulatedSample> {
    let rates = scenario.rates()?;
    simulate(&scenario.dgp, scenario.n, scenario.m, &rates, scenario.margin, rng)
}

fn functionals(cdfs: &WeightedCdfPair, j: f64, s0: f64, s1: f64) -> Result<Targets> {
    Ok(Targets {
        roc: cdfs.roc(ROC_POINT),
        auc: auc(cdfs),
        youden: j,
        pauc: pauc(cdfs, s0, s1)?,
    })
}

/// Shared, immutable pieces of the spline fits.
struct FitContext {
    basis: Arc<SplineBasis>,
    penalty: Arc<DMatrix<f64>>,
}

impl FitContext {
    fn new(scenario: &Scenario) -> Result<Self> {
        let basis = Arc::new(SplineBasis::new(scenario.n_basis, scenario.degree)?);
        let penalty = Arc::new(basis.penalty_matrix()?);
        Ok(Self { basis, penalty })
    }

    fn problem(&self, data: &TwoSampleData, rates: MixtureRates) -> Result<PenalizedProblem> {
        PenalizedProblem::from_parts(
            data.scaled().to_vec(),
            data.labels().to_vec(),
            Arc::clone(&self.basis),
            Arc::clone(&self.penalty),
            rates,
        )
    }
}

/// Penalty weights keyed by `(method, marker)`.
type NuTable = BTreeMap<(Method, usize), f64>;

fn spline_rates(method: Method, rates: MixtureRates) -> MixtureRates {
    if method == Method::Naive {
        MixtureRates::perfect()
    } else {
        rates
    }
}

fn cv_nus(
    scenario: &Scenario,
    ctx: &FitContext,
    sample: &SimulatedSample,
    rates: MixtureRates,
    plan: &CvPlan,
) -> Result<NuTable> {
    let mut table = NuTable::new();
    for &method in &scenario.methods {
        if method == Method::Np {
            continue;
        }
        for (k, data) in sample.markers.iter().enumerate() {
            let problem = ctx.problem(data, spline_rates(method, rates))?;
            let cv = cv_select_nu_problem(&problem, plan, &scenario.em)?;
            table.insert((method, k), cv.nu_star);
        }
    }
    Ok(table)
}

fn estimate_marker(
    scenario: &Scenario,
    ctx: &FitContext,
    data: &TwoSampleData,
    method: Method,
    rates: MixtureRates,
    nu: f64,
) -> Result<Targets> {
    match method {
        Method::Np => {
            let cdfs = np_inversion_cdfs(data, &rates)?;
            let j = youden_from_cdfs(&cdfs).j;
            functionals(&cdfs, j, scenario.s0, scenario.s1)
        }
        Method::Em | Method::Naive => {
            let problem = ctx.problem(data, spline_rates(method, rates))?;
            let fit = fit_em(&problem, nu, &scenario.em)?;
            let cdfs = estimate_cdfs(&fit, data.scaled())?;
            let j = youden(&fit, &cdfs).j;
            functionals(&cdfs, j, scenario.s0, scenario.s1)
        }
    }
}

/// Per-method outcome of one replication.
type RepOutcome = BTreeMap<Method, Result<Targets>>;

fn run_rep(
    scenario: &Scenario,
    ctx: &FitContext,
    rates: MixtureRates,
    fixed: Option<&NuTable>,
    rep: usize,
) -> RepOutcome {
    let mut rng = scenario.rng(rep);
    let sample = match generate(scenario, &mut rng) {
        Ok(s) => s,
        Err(e) => return scenario.methods.iter().map(|&m| (m, Err(e.clone()))).collect(),
    };
    let own_table;
    let table = match (&scenario.nu, fixed) {
        (_, Some(t)) => Ok(t),
        (NuSelection::CvEveryRep { plan }, None) => {
            own_table = cv_nus(scenario, ctx, &sample, rates, plan);
            own_table.as_ref().map_err(Clone::clone)
        }
        _ => Err(Error::InvalidParameter("no penalty weight available".into())),
    };
    scenario
        .methods
        .iter()
        .map(|&method| {
            let est = (|| {
                let per_marker: Vec<Targets> = sample
                    .markers
                    .iter()
                    .enumerate()
                    .map(|(k, data)| {
                        let nu = match method {
                            Method::Np => 0.0,
                            _ => *table
                                .as_ref()
                                .map_err(Clone::clone)?
                                .get(&(method, k))
                                .ok_or(Error::InvalidParameter("missing nu".into()))?,
                        };
                        estimate_marker(scenario, ctx, data, method, rates, nu)
                    })
                    .collect::<Result<_>>()?;
                Ok(match per_marker.as_slice() {
                    [a, b] => a.minus(b),
                    [a] => *a,
                    _ => unreachable!("one or two markers"),
                })
            })();
            (method, est)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: Method,
    pub target: Target,
    /// Natural units; multiply by 100 for the table convention.
    pub bias: f64,
    pub sd: f64,
    pub mse: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub rates: MixtureRates,
    pub truth: TrueTargets,
    /// Penalty weights used when they were fixed across replications,
    /// as `(method, marker index, nu)`.
    pub nu_used: Vec<(Method, usize, f64)>,
    pub rows: Vec<MetricsRow>,
    /// Raw per-replication estimates, `None` where the method failed.
    pub estimates: BTreeMap<Method, Vec<Option<Targets>>>,
}

impl ScenarioReport {
    pub fn row(&self, method: Method, target: Target) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.target == target)
    }
}

/// Bias, sample sd (divisor `k - 1`) and mse of estimates against `truth`.
pub fn summarize_errors(values: &[f64], truth: f64) -> (f64, f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    let bias = mean - truth;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / k;
    (bias, sd, mse)
}

/// Runs every replication of `scenario` and aggregates per method and target.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport> {
    scenario.validate()?;
    let rates = scenario.rates()?;
    let truth = true_targets(&scenario.dgp, scenario.s0, scenario.s1)?;
    let ctx = FitContext::new(scenario)?;
    let spline_methods: Vec<Method> = scenario
        .methods
        .iter()
        .copied()
        .filter(|&m| m != Method::Np)
        .collect();
    let n_markers = scenario.dgp.shifts().len();

    let fixed: Option<NuTable> = match &scenario.nu {
        NuSelection::Fixed { nu } => {
            if !(nu.is_finite() && *nu >= 0.0) {
                return Err(Error::NegativeNu(*nu));
            }
            Some(
                spline_methods
                    .iter()
                    .flat_map(|&m| (0..n_markers).map(move |k| ((m, k), *nu)))
                    .collect(),
            )
        }
        NuSelection::CvFirstRep { plan } => {
            let sample = generate(scenario, &mut scenario.rng(0))?;
            Some(cv_nus(scenario, &ctx, &sample, rates, plan)?)
        }
        NuSelection::CvEveryRep { .. } => None,
    };

    let outcomes: Vec<RepOutcome> = (0..scenario.reps)
        .into_par_iter()
        .map(|rep| run_rep(scenario, &ctx, rates, fixed.as_ref(), rep))
        .collect();

    let reported = truth.reported();
    let mut rows = Vec::new();
    let mut estimates = BTreeMap::new();
    for &method in &scenario.methods {
        let per_rep: Vec<Option<Targets>> = outcomes
            .iter()
            .map(|o| o.get(&method).and_then(|r| r.as_ref().ok().copied()))
            .collect();
        let ok: Vec<Targets> = per_rep.iter().flatten().copied().collect();
        let n_failed = per_rep.len() - ok.len();
        for target in Target::ALL {
            let vals: Vec<f64> = ok.iter().map(|t| t.get(target)).collect();
            let (bias, sd, mse) = summarize_errors(&vals, reported.get(target));
            rows.push(MetricsRow {
                method,
                target,
                bias,
                sd,
                mse,
                n_ok: ok.len(),
                n_failed,
            });
        }
        estimates.insert(method, per_rep);
    }
    if rows.iter().all(|r| r.n_ok == 0) {
        return Err(Error::AllFitsFailed);
    }

    Ok(ScenarioReport {
        scenario: scenario.clone(),
        rates,
        truth,
        nu_used: fixed
            .map(|t| t.into_iter().map(|((m, k), nu)| (m, k, nu)).collect())
            .unwrap_or_default(),
        rows,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::gauss_legendre;
    use approx::assert_relative_eq;

    /// Composite Gauss-Legendre on `[a, b]`.
    fn gl(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let (nodes, weights) = gauss_legendre(20);
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = a + h * p as f64;
            for (x, w) in nodes.iter().zip(&weights) {
                acc += 0.5 * h * w * f(lo + 0.5 * h * (x + 1.0));
            }
        }
        acc
    }

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (f(hi) > 0.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn bayes_rate_examples() {
        let r = bayes_rates(0.4, 0.95, 0.95).unwrap();
        assert_relative_eq!(r.pi1, 0.38 / 0.41, epsilon = 1e-15);
        assert_relative_eq!(r.pi0, 0.57 / 0.59, epsilon = 1e-15);
        let r = bayes_rates(0.4, 0.75, 0.75).unwrap();
        assert_relative_eq!(r.pi1, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(r.pi0, 9.0 / 11.0, epsilon = 1e-15);
        let r = bayes_rates(0.3, 1.0, 1.0).unwrap();
        assert_eq!((r.pi0, r.pi1), (1.0, 1.0));
        assert!(bayes_rates(0.4, 0.3, 0.3).is_err());
    }

    #[test]
    fn truth_matches_quadrature() {
        let t = gaussian_shift_truth(1.0, 0.1, 0.3).unwrap();
        let z = std_normal();
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        // AUC = int phi(t) (1 - Phi(t - 1)) dt
        let auc_q = gl(|x| phi(x) * (1.0 - z.cdf(x - 1.0)), -14.0, 14.0, 56);
        assert!((t.targets.auc - auc_q).abs() < 1e-8);
        assert!((t.targets.auc - 0.76025).abs() < 5e-6);
        // ROC(0.2) via bisection for the healthy 0.8-quantile
        let q = bisect(|x| z.cdf(x) - 0.8, -10.0, 10.0);
        assert!((t.targets.roc - (1.0 - z.cdf(q - 1.0))).abs() < 1e-8);
        assert!((t.targets.roc - 0.562921).abs() < 5e-7);
        // Youden by a fine golden-section search on Phi(c) - Phi(c - 1)
        let j = |c: f64| z.cdf(c) - z.cdf(c - 1.0);
        let (mut a, mut b) = (-3.0, 3.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c1 = b - g * (b - a);
            let c2 = a + g * (b - a);
            if j(c1) < j(c2) {
                a = c1;
            } else {
                b = c2;
            }
        }
        assert!((t.targets.youden - j(0.5 * (a + b))).abs() < 1e-8);
        assert!((t.targets.youden - 0.38292).abs() < 5e-6);
        assert!((t.cutoff - 0.5 * (a + b)).abs() < 1e-6);
        // pAUC: int_{0.1}^{0.3} ROC(s) ds / 0.2 via the healthy-quantile substitution
        let pa = gl(
            |x| phi(x) * (1.0 - z.cdf(x - 1.0)),
            z.inverse_cdf(0.7),
            z.inverse_cdf(0.9),
            40,
        ) / 0.2;
        assert!((t.targets.pauc - pa).abs() < 1e-8, "{} vs {pa}", t.targets.pauc);
        assert!((t.targets.pauc - 0.5540).abs() < 5e-4);
    }

    #[test]
    fn identical_groups_truth() {
        let t = gaussian_shift_truth(0.0, 0.1, 0.3).unwrap();
        assert_eq!(t.targets.auc, 0.5);
        assert_eq!(t.targets.youden, 0.0);
        assert!((t.targets.roc - 0.2).abs() < 1e-12);
        assert!((t.targets.pauc - 0.2).abs() < 1e-10);
    }

    #[test]
    fn bivariate_truth_deltas() {
        let t = true_targets(&Dgp::bivariate(0.2), 0.1, 0.3).unwrap();
        let z = std_normal();
        let d = t.delta.unwrap();
        assert_relative_eq!(
            d.auc,
            z.cdf(2.0 / 2f64.sqrt()) - z.cdf(1.0 / 2f64.sqrt()),
            epsilon = 1e-14
        );
        assert!(d.auc > 0.0);
        assert!(true_targets(
            &Dgp::BivariateNormal {
                rho: 1.5,
                literal_orientation: false
            },
            0.1,
            0.3
        )
        .is_err());
    }

    #[test]
    fn contamination_rate_concentrates() {
        let mut s = Scenario::univariate(0.95, 100_000, 1, 3);
        s.m = 10;
        let sample = gen_univariate_normal(&s, &mut s.rng(0)).unwrap();
        let frac = sample.hidden_x.iter().filter(|&&g| g).count() as f64 / 1e5;
        let p = 1.0 - s.rates().unwrap().pi0;
        let sd = (p * (1.0 - p) / 1e5).sqrt();
        assert!((frac - p).abs() < 3.0 * sd, "{frac} vs {p}");
    }

    #[test]
    fn perfect_labels_group_means() {
        let mut s = Scenario::univariate(1.0, 10_000, 1, 8);
        s.se = 1.0;
        s.sp = 1.0;
        let sample = gen_univariate_normal(&s, &mut s.rng(0)).unwrap();
        let d = &sample.markers[0];
        let mx = d.x().iter().sum::<f64>() / 1e4;
        let my = d.y().iter().sum::<f64>() / 1e4;
        assert!(mx.abs() < 3.0 / 100.0);
        assert!((my - 1.0).abs() < 3.0 / 100.0);
        assert!(sample.hidden_x.iter().all(|g| !g));
        assert!(sample.hidden_y.iter().all(|g| *g));
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn bivariate_correlation() {
        // perfect labels so within-group correlation is exactly rho
        let mut s = Scenario::bivariate(1.0, 100_000, 1, 5);
        s.m = 10;
        let sample = gen_bivariate_normal(&s, &mut s.rng(0)).unwrap();
        let r = corr(sample.markers[0].x(), sample.markers[1].x());
        // Fisher z: sd of atanh(r) is 1 / sqrt(n - 3)
        assert!((r.atanh() - 0.2f64.atanh()).abs() < 3.0 / (1e5f64 - 3.0).sqrt());

        s.dgp = Dgp::bivariate(0.0);
        let sample = gen_bivariate_normal(&s, &mut s.rng(0)).unwrap();
        let r = corr(sample.markers[0].x(), sample.markers[1].x());
        assert!(r.abs() < 3.0 / 1e5f64.sqrt());
    }

    #[test]
    fn generation_is_replayable() {
        let s = Scenario::bivariate(0.9, 50, 1, 21);
        let a = generate(&s, &mut s.rng(4)).unwrap();
        let b = generate(&s, &mut s.rng(4)).unwrap();
        assert_eq!(a.markers, b.markers);
        let c = generate(&s, &mut s.rng(5)).unwrap();
        assert_ne!(a.markers, c.markers);
    }

    #[test]
    fn error_summary_identities() {
        let v = [0.1, 0.4, 0.35, 0.2];
        let (bias, sd, mse) = summarize_errors(&v, 0.3);
        let k = v.len() as f64;
        assert!((mse - (bias * bias + sd * sd * (k - 1.0) / k)).abs() < 1e-12);
        let (b, s, m) = summarize_errors(&[0.7], 0.5);
        assert_eq!(s, 0.0);
        assert!((m - b * b).abs() < 1e-15);
    }

    #[test]
    fn single_rep_has_zero_sd() {
        let mut s = Scenario::univariate(0.95, 80, 1, 7);
        s.nu = NuSelection::Fixed { nu: 1.0 };
        s.n_basis = 15;
        let rep = run_scenario(&s).unwrap();
        assert_eq!(rep.rows.len(), 12);
        for r in &rep.rows {
            assert_eq!(r.sd, 0.0);
            assert!((r.mse - r.bias * r.bias).abs() < 1e-15);
            assert_eq!(r.n_ok, 1);
        }
    }

    #[test]
    fn scenario_determinism() {
        let mut s = Scenario::univariate(0.9, 60, 6, 13);
        s.nu = NuSelection::Fixed { nu: 0.5 };
        s.n_basis = 12;
        let a = run_scenario(&s).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_scenario(&s).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn first_rep_cv_records_nus() {
        let mut s = Scenario::bivariate(0.95, 60, 2, 2);
        s.n_basis = 12;
        s.nu = NuSelection::CvFirstRep {
            plan: CvPlan {
                nu_grid: vec![0.01, 1.0],
                n_folds: 3,
                seed: 1,
            },
        };
        let rep = run_scenario(&s).unwrap();
        // EM and naive, two markers each
        assert_eq!(rep.nu_used.len(), 4);
        assert!(rep.truth.delta.is_some());
    }
}
