//! CSV ingestion, JSON/CSV reports and the `rocem` subcommands.
//!
//! Reports are serialized through `serde_json::Value`, whose object map is
//! ordered, so keys always come out sorted and a report re-serializes to the
//! same bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baselines::{group_ecdfs, np_inversion_cdfs};
use crate::basis::SplineBasis;
use crate::error::{Error, Result};
use crate::estimators::{
    compare_markers, default_s_grid, estimate_cdfs, roc_curve, summarize, youden,
    youden_from_cdfs, MarkerDeltas, PartialAuc, RocSummary, WeightedCdfPair,
};
use crate::likelihood::{MixtureRates, PenalizedProblem, TwoSampleData};
use crate::simharness::{run_scenario, Dgp, Method, NuSelection, Scenario, ScenarioReport, Target};
use crate::solver::{fit_em, DensityRatioFit, EmOptions};
use crate::tuning::{cv_select_nu_problem, log_grid, CvPlan, CvResult};

/// ROC grid size in fit and compare reports.
pub const REPORT_GRID_POINTS: usize = 101;
/// ROC grid size of `roc-points` curve files.
pub const CURVE_GRID_POINTS: usize = 501;

const DEFAULT_MARGIN: f64 = 0.01;

/// Raw values and labels read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledColumns {
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

fn parse_label(raw: &str, row: usize) -> Result<bool> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse {
            row,
            message: format!("label must be 0 or 1, found {other:?}"),
        }),
    }
}

/// Reads the named value columns and a 0/1 label column. `row` in parse
/// errors counts data rows from 1, excluding the header.
pub fn read_labeled_columns(
    path: &Path,
    value_cols: &[&str],
    label_col: &str,
    log: bool,
) -> Result<LabeledColumns> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::ColumnMissing(name.to_string()))
    };
    let label_idx = find(label_col)?;
    let value_idx: Vec<usize> = value_cols.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let mut values = vec![Vec::new(); value_cols.len()];
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or("");
        labels.push(parse_label(field(label_idx), row)?);
        for (k, &idx) in value_idx.iter().enumerate() {
            let raw = field(idx);
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                message: format!("column {:?} is not numeric: {raw:?}", value_cols[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("column {:?} is not finite", value_cols[k]),
                });
            }
            let v = if log {
                if v <= 0.0 {
                    return Err(Error::Parse {
                        row,
                        message: format!("non-positive value {v} under --log"),
                    });
                }
                v.ln()
            } else {
                v
            };
            values[k].push(v);
        }
    }
    Ok(LabeledColumns { values, labels })
}

fn split_by_label(values: &[f64], labels: &[bool]) -> Result<TwoSampleData> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (&v, &r) in values.iter().zip(labels) {
        if r {
            y.push(v);
        } else {
            x.push(v);
        }
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::InsufficientData(format!(
            "need both label groups, found {} with R=0 and {} with R=1",
            x.len(),
            y.len()
        )));
    }
    TwoSampleData::new(x, y, DEFAULT_MARGIN)
}

/// Loads a two-sample data set: rows labeled 0 become controls, 1 cases.
pub fn load_two_sample_csv(
    path: &Path,
    value_col: &str,
    label_col: &str,
    log: bool,
) -> Result<TwoSampleData> {
    let cols = read_labeled_columns(path, &[value_col], label_col, log)?;
    split_by_label(&cols.values[0], &cols.labels)
}

/// Spline and penalty settings for one marker fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub n_basis: usize,
    /// Polynomial degree.
    pub degree: usize,
    /// Fixed penalty weight; `None` selects it by cross-validation.
    pub nu: Option<f64>,
    pub cv: CvPlan,
    pub s0: f64,
    pub s1: f64,
    pub grid_points: usize,
    pub em: EmOptions,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            n_basis: 50,
            degree: 3,
            nu: None,
            cv: CvPlan::default(),
            s0: 0.1,
            s1: 0.3,
            grid_points: REPORT_GRID_POINTS,
            em: EmOptions::default(),
        }
    }
}

/// Everything produced by fitting one marker.
#[derive(Debug, Clone)]
pub struct MarkerAnalysis {
    pub fit: DensityRatioFit,
    pub cdfs: WeightedCdfPair,
    pub summary: RocSummary,
    pub cv: Option<CvResult>,
    pub from_root: bool,
}

/// Fits the spline model under `rates`, choosing `nu` as configured, and
/// summarizes the resulting ROC curve.
pub fn analyze_marker(
    data: &TwoSampleData,
    rates: MixtureRates,
    settings: &FitSettings,
) -> Result<MarkerAnalysis> {
    let basis = Arc::new(SplineBasis::new(settings.n_basis, settings.degree)?);
    let problem = PenalizedProblem::new(data, basis, rates)?;
    let (nu, cv) = match settings.nu {
        Some(nu) => (nu, None),
        None => {
            let cv = cv_select_nu_problem(&problem, &settings.cv, &settings.em)?;
            (cv.nu_star, Some(cv))
        }
    };
    let fit = fit_em(&problem, nu, &settings.em)?;
    let cdfs = estimate_cdfs(&fit, data.scaled())?;
    let yp = youden(&fit, &cdfs);
    let grid = default_s_grid(settings.grid_points);
    let summary = summarize(&cdfs, yp, &grid, settings.s0, settings.s1, data.transform())?;
    Ok(MarkerAnalysis {
        fit,
        cdfs,
        summary,
        cv,
        from_root: yp.from_root,
    })
}

/// ECDF-inversion summary on the same grid.
pub fn analyze_np(
    data: &TwoSampleData,
    rates: MixtureRates,
    settings: &FitSettings,
) -> Result<(WeightedCdfPair, RocSummary)> {
    let cdfs = np_inversion_cdfs(data, &rates)?;
    let yp = youden_from_cdfs(&cdfs);
    let grid = default_s_grid(settings.grid_points);
    let summary = summarize(&cdfs, yp, &grid, settings.s0, settings.s1, data.transform())?;
    Ok((cdfs, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoudenReport {
    pub j: f64,
    pub cutoff_raw: f64,
    pub cutoff_unit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub roc_grid: Vec<(f64, f64)>,
    pub auc: f64,
    pub pauc: PartialAuc,
    pub youden: YoudenReport,
}

impl From<&RocSummary> for SummaryReport {
    fn from(s: &RocSummary) -> Self {
        Self {
            roc_grid: s.roc_grid.clone(),
            auc: s.auc,
            pauc: s.pauc,
            youden: YoudenReport {
                j: s.youden_j,
                cutoff_raw: s.cutoff_raw,
                cutoff_unit: s.cutoff_unit,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInputs {
    pub n: usize,
    pub m: usize,
    pub pi0: f64,
    pub pi1: f64,
    pub k: usize,
    /// Polynomial degree of the basis.
    pub degree: usize,
    pub nu: f64,
    /// Cross-validation trace; absent when `nu` was given.
    pub cv: Option<CvResult>,
    pub log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub em_iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// `int (h'')^2` of the fitted log density ratio.
    pub roughness: f64,
    pub max_jitter: f64,
    pub objective_trace: Vec<f64>,
    pub youden_from_root: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub np: SummaryReport,
    pub naive: SummaryReport,
    pub naive_nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub inputs: FitInputs,
    pub summary: SummaryReport,
    pub diagnostics: Diagnostics,
    pub baselines: Option<Baselines>,
}

impl FitReport {
    pub fn from_analysis(data: &TwoSampleData, a: &MarkerAnalysis, log: bool) -> Self {
        Self {
            inputs: FitInputs {
                n: data.n(),
                m: data.m(),
                pi0: a.fit.rates.pi0,
                pi1: a.fit.rates.pi1,
                k: a.fit.basis.n_basis(),
                degree: a.fit.basis.degree(),
                nu: a.fit.nu,
                cv: a.cv.clone(),
                log,
            },
            summary: SummaryReport::from(&a.summary),
            diagnostics: Diagnostics {
                em_iterations: a.fit.n_em_iters,
                final_objective: a.fit.final_objective,
                converged: a.fit.converged,
                roughness: a.fit.roughness,
                max_jitter: a.fit.max_jitter,
                objective_trace: a.fit.objective_trace.clone(),
                youden_from_root: a.from_root,
            },
            baselines: None,
        }
    }
}

/// Pretty JSON with sorted keys.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut s =
        serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Parser)]
#[command(name = "rocem", version, about = "ROC analysis under an imperfect reference standard")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one marker and report ROC, AUC, pAUC and Youden's index.
    Fit(FitArgs),
    /// Monte Carlo bias/sd/mse table for a Gaussian design.
    Simulate(SimulateArgs),
    /// Fit two markers on the same subjects and report their differences.
    Compare(CompareArgs),
    /// Write EM, NP and naive ROC curves on a fine grid.
    RocPoints(RocPointsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "value")]
    pub value_col: String,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    /// Take natural logs of the (positive) values first.
    #[arg(long)]
    pub log: bool,
}

impl DataArgs {
    fn path(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::MissingInput("--input <CSV> is required".into()))
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// P(G = 0 | R = 0).
    #[arg(long, default_value_t = 1.0)]
    pub pi0: f64,
    /// P(G = 1 | R = 1).
    #[arg(long, default_value_t = 1.0)]
    pub pi1: f64,
    /// Number of B-spline basis functions.
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// Spline order (degree + 1), unless --literal-degree is set.
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    /// Read --degree as the polynomial degree.
    #[arg(long)]
    pub literal_degree: bool,
    /// Fixed penalty weight; cross-validated when absent.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub nu_grid_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub nu_grid_max: f64,
    #[arg(long, default_value_t = 15)]
    pub nu_grid_points: usize,
    #[arg(long, default_value_t = 0.1)]
    pub s0: f64,
    #[arg(long, default_value_t = 0.3)]
    pub s1: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    pub fn rates(&self) -> Result<MixtureRates> {
        MixtureRates::new(self.pi0, self.pi1)
    }

    pub fn poly_degree(&self) -> Result<usize> {
        if self.literal_degree {
            Ok(self.degree)
        } else {
            self.degree.checked_sub(1).ok_or(Error::UnsupportedDegree {
                degree: 0,
                min: 1,
            })
        }
    }

    pub fn cv_plan(&self) -> Result<CvPlan> {
        let plan = CvPlan {
            n_folds: self.cv_folds,
            nu_grid: log_grid(self.nu_grid_min, self.nu_grid_max, self.nu_grid_points)?,
            seed: self.seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn settings(&self, grid_points: usize) -> Result<FitSettings> {
        if let Some(nu) = self.nu {
            if !(nu >= 0.0 && nu.is_finite()) {
                return Err(Error::NegativeNu(nu));
            }
        }
        Ok(FitSettings {
            n_basis: self.k,
            degree: self.poly_degree()?,
            nu: self.nu,
            cv: self.cv_plan()?,
            s0: self.s0,
            s1: self.s1,
            grid_points,
            em: EmOptions::default(),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also report the ECDF-inversion and naive estimates.
    #[arg(long)]
    pub with_baselines: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DgpArg {
    Univariate,
    Bivariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Em,
    Np,
    Naive,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Em => Method::Em,
            MethodArg::Np => Method::Np,
            MethodArg::Naive => Method::Naive,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = DgpArg::Univariate)]
    pub dgp: DgpArg,
    #[arg(long, default_value_t = 0.95)]
    pub se: f64,
    #[arg(long, default_value_t = 0.95)]
    pub sp: f64,
    #[arg(long, default_value_t = 0.4)]
    pub prevalence: f64,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Correlation of the two markers in the bivariate design.
    #[arg(long, default_value_t = 0.2)]
    pub rho: f64,
    /// Give the healthy group the higher bivariate means.
    #[arg(long)]
    pub literal_orientation: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Em, MethodArg::Np, MethodArg::Naive])]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// Spline order (degree + 1), unless --literal-degree is set.
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    #[arg(long)]
    pub literal_degree: bool,
    /// Fixed penalty weight for every replication.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Cross-validate inside every replication instead of only the first.
    #[arg(long)]
    pub cv_every_rep: bool,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub nu_grid_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub nu_grid_max: f64,
    #[arg(long, default_value_t = 15)]
    pub nu_grid_points: usize,
    #[arg(long, default_value_t = 0.1)]
    pub s0: f64,
    #[arg(long, default_value_t = 0.3)]
    pub s1: f64,
    /// CSV table path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full JSON report path (natural units, raw estimates).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn scenario(&self) -> Result<Scenario> {
        let degree = if self.literal_degree {
            self.degree
        } else {
            self.degree.checked_sub(1).ok_or(Error::UnsupportedDegree {
                degree: 0,
                min: 1,
            })?
        };
        let plan = CvPlan {
            n_folds: self.cv_folds,
            nu_grid: log_grid(self.nu_grid_min, self.nu_grid_max, self.nu_grid_points)?,
            seed: self.seed,
        };
        let nu = match (self.nu, self.cv_every_rep) {
            (Some(nu), _) => NuSelection::Fixed { nu },
            (None, true) => NuSelection::CvEveryRep { plan },
            (None, false) => NuSelection::CvFirstRep { plan },
        };
        let dgp = match self.dgp {
            DgpArg::Univariate => Dgp::UnivariateNormal,
            DgpArg::Bivariate => Dgp::BivariateNormal {
                rho: self.rho,
                literal_orientation: self.literal_orientation,
            },
        };
        let mut methods: Vec<Method> = self.methods.iter().map(|&m| m.into()).collect();
        methods.sort();
        methods.dedup();
        Ok(Scenario {
            dgp,
            prevalence: self.prevalence,
            se: self.se,
            sp: self.sp,
            n: self.n,
            m: self.m,
            reps: self.reps,
            seed: self.seed,
            methods,
            s0: self.s0,
            s1: self.s1,
            n_basis: self.k,
            degree,
            margin: DEFAULT_MARGIN,
            nu,
            em: EmOptions::default(),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// First marker column.
    #[arg(long)]
    pub value_col: String,
    /// Second marker column; deltas are first minus second.
    #[arg(long)]
    pub value_col_2: String,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long)]
    pub log: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RocPointsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Curve CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write estimated and group-empirical CDFs over the pooled support.
    #[arg(long)]
    pub cdf_out: Option<PathBuf>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<String> {
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            Ok(String::new())
        }
        None => Ok(text.to_string()),
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<FitReport> {
    let data = load_two_sample_csv(
        args.data.path()?,
        &args.data.value_col,
        &args.data.label_col,
        args.data.log,
    )?;
    let rates = args.model.rates()?;
    let settings = args.model.settings(REPORT_GRID_POINTS)?;
    let em = analyze_marker(&data, rates, &settings)?;
    let mut report = FitReport::from_analysis(&data, &em, args.data.log);
    if args.with_baselines {
        let (_, np) = analyze_np(&data, rates, &settings)?;
        let naive = analyze_marker(&data, MixtureRates::perfect(), &settings)?;
        report.baselines = Some(Baselines {
            np: SummaryReport::from(&np),
            naive: SummaryReport::from(&naive.summary),
            naive_nu: naive.fit.nu,
        });
    }
    Ok(report)
}

fn fmt2(v: f64) -> String {
    let s = format!("{:.2}", 100.0 * v);
    // avoid "-0.00"
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// The simulate table: columns `se_sp, n_m, method, target, bias, sd, mse`
/// with the three statistics multiplied by 100.
pub fn metrics_csv(report: &ScenarioReport) -> Result<String> {
    let sc = &report.scenario;
    let se_sp = if sc.se == sc.sp {
        format!("{}", sc.se)
    } else {
        format!("{}/{}", sc.se, sc.sp)
    };
    let n_m = if sc.n == sc.m {
        format!("{}", sc.n)
    } else {
        format!("{}/{}", sc.n, sc.m)
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["se_sp", "n_m", "method", "target", "bias", "sd", "mse"])
        .map_err(io)?;
    for method in &sc.methods {
        for target in Target::ALL {
            if let Some(r) = report.row(*method, target) {
                w.write_record([
                    se_sp.clone(),
                    n_m.clone(),
                    method.label().to_string(),
                    target.label().to_string(),
                    fmt2(r.bias),
                    fmt2(r.sd),
                    fmt2(r.mse),
                ])
                .map_err(io)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(ScenarioReport, String)> {
    let report = run_scenario(&args.scenario()?)?;
    let table = metrics_csv(&report)?;
    Ok((report, table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerReport {
    pub column: String,
    pub nu: f64,
    pub summary: SummaryReport,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub n: usize,
    pub m: usize,
    pub pi0: f64,
    pub pi1: f64,
    pub marker_1: MarkerReport,
    pub marker_2: MarkerReport,
    pub delta: MarkerDeltas,
}

pub fn cmd_compare(args: &CompareArgs) -> Result<CompareReport> {
    let path = args
        .input
        .as_deref()
        .ok_or_else(|| Error::MissingInput("--input <CSV> is required".into()))?;
    let cols = read_labeled_columns(
        path,
        &[&args.value_col, &args.value_col_2],
        &args.label_col,
        args.log,
    )?;
    let rates = args.model.rates()?;
    let settings = args.model.settings(REPORT_GRID_POINTS)?;
    let mut markers = Vec::new();
    for (k, name) in [&args.value_col, &args.value_col_2].into_iter().enumerate() {
        let data = split_by_label(&cols.values[k], &cols.labels)?;
        let a = analyze_marker(&data, rates, &settings)?;
        markers.push((data, name.clone(), a));
    }
    let delta = compare_markers(&markers[0].2.summary, &markers[1].2.summary)?;
    let report = |(_, column, a): &(TwoSampleData, String, MarkerAnalysis)| MarkerReport {
        column: column.clone(),
        nu: a.fit.nu,
        summary: SummaryReport::from(&a.summary),
        converged: a.fit.converged,
    };
    Ok(CompareReport {
        n: markers[0].0.n(),
        m: markers[0].0.m(),
        pi0: rates.pi0,
        pi1: rates.pi1,
        marker_1: report(&markers[0]),
        marker_2: report(&markers[1]),
        delta,
    })
}

/// Curve table and optional CDF table from `roc-points`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFiles {
    pub curves: String,
    pub cdfs: String,
}

pub fn cmd_roc_points(args: &RocPointsArgs) -> Result<CurveFiles> {
    let data = load_two_sample_csv(
        args.data.path()?,
        &args.data.value_col,
        &args.data.label_col,
        args.data.log,
    )?;
    let rates = args.model.rates()?;
    let settings = args.model.settings(REPORT_GRID_POINTS)?;
    let em = analyze_marker(&data, rates, &settings)?;
    let (np, _) = analyze_np(&data, rates, &settings)?;
    let naive = analyze_marker(&data, MixtureRates::perfect(), &settings)?;

    let grid = default_s_grid(CURVE_GRID_POINTS);
    let columns = [
        roc_curve(&em.cdfs, &grid),
        roc_curve(&np, &grid),
        roc_curve(&naive.cdfs, &grid),
    ];
    let mut curves = String::from("s,roc_em,roc_np,roc_naive\n");
    for (i, s) in grid.iter().enumerate() {
        curves.push_str(&format!(
            "{s},{},{},{}\n",
            columns[0][i], columns[1][i], columns[2][i]
        ));
    }

    let ecdf = group_ecdfs(data.scaled_x(), data.scaled_y())?;
    let mut cdfs = String::from("t,f0_em,f1_em,f0_np,f1_np,ecdf_r0,ecdf_r1\n");
    for (i, &t) in ecdf.support.iter().enumerate() {
        cdfs.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            data.transform().inverse(t),
            em.cdfs.cdf0(t),
            em.cdfs.cdf1(t),
            np.cdf0(t),
            np.cdf1(t),
            ecdf.control[i],
            ecdf.case[i]
        ));
    }
    Ok(CurveFiles { curves, cdfs })
}

/// Caps the global rayon pool from `ROCEM_THREADS` (0 or unset = automatic).
pub fn configure_threads() -> Result<()> {
    match std::env::var("ROCEM_THREADS") {
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("ROCEM_THREADS must be an integer, got {raw:?}"))
            })?;
            if n > 0 {
                // a pool that is already built keeps its size
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

/// Runs a parsed command and returns what belongs on stdout.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Fit(args) => emit(&to_sorted_json(&cmd_fit(args)?)?, args.out.as_deref()),
        Command::Simulate(args) => {
            let (report, table) = cmd_simulate(args)?;
            if let Some(p) = &args.json {
                emit(&to_sorted_json(&report)?, Some(p))?;
            }
            emit(&table, args.out.as_deref())
        }
        Command::Compare(args) => {
            emit(&to_sorted_json(&cmd_compare(args)?)?, args.out.as_deref())
        }
        Command::RocPoints(args) => {
            let files = cmd_roc_points(args)?;
            if let Some(p) = &args.cdf_out {
                emit(&files.cdfs, Some(p))?;
            }
            emit(&files.curves, args.out.as_deref())
        }
    }
}

/// Structured error object written to stderr.
pub fn error_json(kind: &str, message: &str) -> String {
    let v = serde_json::json!({ "error": { "kind": kind, "message": message } });
    format!("{v}\n")
}

/// Entry point shared by the binary: parses `args`, runs, prints, and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = stderr.write_all(error_json("usage", e.to_string().trim()).as_bytes());
            return 2;
        }
    };
    let result = configure_threads().and_then(|_| execute(&cli));
    match result {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = stderr.write_all(error_json(e.kind(), &e.to_string()).as_bytes());
            1
        }
    }
}
