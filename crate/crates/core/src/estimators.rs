//! ROC functionals of a fitted density ratio.
//!
//! With `p_i ∝ 1 / (1 - λ* + λ* e^{h(T_i)})`, the pooled sample reweighted by
//! `p_i` estimates the healthy CDF and reweighted by `p_i e^{h(T_i)}` the
//! diseased one. Everything downstream (ROC, AUC, pAUC, Youden) works on the
//! resulting pair of weighted step functions, so the inversion baseline can
//! reuse it unchanged.

use serde::{Deserialize, Serialize};

use crate::basis::DomainTransform;
use crate::error::{Error, Result};
use crate::likelihood::ln_affine_exp;
use crate::solver::DensityRatioFit;

const CDF_EPS: f64 = 1e-12;

/// Grid resolution for pAUC integration and for locating roots of `h`.
pub const GRID_POINTS: usize = 2001;

/// Two step-function CDFs sharing one sorted support.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCdfPair {
    support: Vec<f64>,
    w0: Vec<f64>,
    w1: Vec<f64>,
    cum0: Vec<f64>,
    cum1: Vec<f64>,
}

/// Running sums of `raw` divided by their total, ending exactly at 1.
/// Dividing the integer-valued partial sums of equal weights reproduces an
/// ordinary ECDF bit for bit.
fn cumulative(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = raw
        .iter()
        .map(|v| {
            acc += v;
            acc / total
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// `exp(logw - max)`, unnormalized.
fn unnormalized(logw: &[f64]) -> Vec<f64> {
    let mx = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logw.iter().map(|l| (l - mx).exp()).collect()
}

fn normalized(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

impl WeightedCdfPair {
    /// Builds the pair from per-point log-weights (any additive constant).
    /// Points may be unsorted and may repeat; repeats are merged.
    pub fn from_log_weights(points: &[f64], log_w0: &[f64], log_w1: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("no support points".into()));
        }
        for len in [log_w0.len(), log_w1.len()] {
            if len != points.len() {
                return Err(Error::LengthMismatch {
                    expected: points.len(),
                    found: len,
                });
            }
        }
        let w0 = unnormalized(log_w0);
        let w1 = unnormalized(log_w1);
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
        let mut support = Vec::with_capacity(points.len());
        let mut m0: Vec<f64> = Vec::with_capacity(points.len());
        let mut m1: Vec<f64> = Vec::with_capacity(points.len());
        for i in order {
            if support.last() == Some(&points[i]) {
                *m0.last_mut().unwrap() += w0[i];
                *m1.last_mut().unwrap() += w1[i];
            } else {
                support.push(points[i]);
                m0.push(w0[i]);
                m1.push(w1[i]);
            }
        }
        let cum0 = cumulative(&m0);
        let cum1 = cumulative(&m1);
        Ok(Self {
            support,
            w0: normalized(&m0),
            w1: normalized(&m1),
            cum0,
            cum1,
        })
    }

    /// Builds the pair from CDF values on a sorted support. Values must be
    /// non-decreasing in `[0, 1]` and end at 1.
    pub fn from_cdf_values(support: Vec<f64>, f0: &[f64], f1: &[f64]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyInput("no support points".into()));
        }
        for len in [f0.len(), f1.len()] {
            if len != support.len() {
                return Err(Error::LengthMismatch {
                    expected: support.len(),
                    found: len,
                });
            }
        }
        // running maximum guards against tiny decreases; the last value is 1
        let cdf = |f: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut prev = 0.0f64;
            let mut cum: Vec<f64> = f
                .iter()
                .map(|&v| {
                    prev = prev.max(v.clamp(0.0, 1.0));
                    prev
                })
                .collect();
            *cum.last_mut().unwrap() = 1.0;
            let mut below = 0.0;
            let w = cum
                .iter()
                .map(|&c| {
                    let d = c - below;
                    below = c;
                    d
                })
                .collect();
            (w, cum)
        };
        let (w0, cum0) = cdf(f0);
        let (w1, cum1) = cdf(f1);
        Ok(Self {
            support,
            w0,
            w1,
            cum0,
            cum1,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights0(&self) -> &[f64] {
        &self.w0
    }

    pub fn weights1(&self) -> &[f64] {
        &self.w1
    }

    fn count_le(&self, t: f64) -> usize {
        self.support.partition_point(|&s| s <= t)
    }

    pub fn cdf0(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => 0.0,
            k => self.cum0[k - 1],
        }
    }

    pub fn cdf1(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => 0.0,
            k => self.cum1[k - 1],
        }
    }

    /// `inf{t : F0(t) >= q}` over the support, for `q` in `(0, 1]`.
    pub fn quantile0(&self, q: f64) -> f64 {
        let k = self.cum0.partition_point(|&c| c < q - CDF_EPS);
        self.support[k.min(self.support.len() - 1)]
    }

    /// `ROC(s) = 1 - F1(F0^{-1}(1 - s))`.
    pub fn roc(&self, s: f64) -> f64 {
        let q = 1.0 - s;
        if q <= CDF_EPS {
            return 1.0;
        }
        let k = self
            .cum0
            .partition_point(|&c| c < q - CDF_EPS)
            .min(self.support.len() - 1);
        (1.0 - self.cum1[k]).clamp(0.0, 1.0)
    }

    /// Largest `F0 - F1` over the support, with the support point attaining it
    /// (the first such point on ties).
    pub fn max_cdf_gap(&self) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, self.support[0]);
        for (k, &t) in self.support.iter().enumerate() {
            let gap = self.cum0[k] - self.cum1[k];
            if gap > best.0 {
                best = (gap, t);
            }
        }
        best
    }
}

/// Hájek-weighted CDFs from pooled points and `h` values at those points.
pub fn hajek_cdfs(points: &[f64], h_vals: &[f64], lambda_star: f64) -> Result<WeightedCdfPair> {
    if points.len() != h_vals.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            found: h_vals.len(),
        });
    }
    let log_p: Vec<f64> = h_vals
        .iter()
        .map(|&h| -ln_affine_exp(1.0 - lambda_star, lambda_star, h))
        .collect();
    let log_p1: Vec<f64> = log_p.iter().zip(h_vals).map(|(lp, h)| lp + h).collect();
    WeightedCdfPair::from_log_weights(points, &log_p, &log_p1)
}

/// `F0`, `F1` estimates from a fit and the unit-domain points it was fit on.
pub fn estimate_cdfs(fit: &DensityRatioFit, points: &[f64]) -> Result<WeightedCdfPair> {
    let h: Vec<f64> = points.iter().map(|&t| fit.h(t)).collect::<Result<_>>()?;
    hajek_cdfs(points, &h, fit.consts.lambda_star)
}

pub fn roc_curve(cdfs: &WeightedCdfPair, s_grid: &[f64]) -> Vec<f64> {
    s_grid.iter().map(|&s| cdfs.roc(s)).collect()
}

/// Evenly spaced ROC evaluation grid on `[0.001, 0.999]`.
pub fn default_s_grid(points: usize) -> Vec<f64> {
    let (a, b) = (0.001, 0.999);
    if points == 1 {
        return vec![0.5];
    }
    (0..points)
        .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Area under the step ROC curve with mid-rank handling of ties:
/// `sum_i sum_j w0_i w1_j [1(T_j > T_i) + 1/2 1(T_j = T_i)]`.
///
/// Evaluated as `1/2 + 1/2 (P(T1 > T0) - P(T0 > T1))`, which is the same
/// quantity when both weight vectors sum to one and is exactly 1/2 when the
/// two weight vectors coincide.
pub fn auc(cdfs: &WeightedCdfPair) -> f64 {
    let above = |w: &[f64], other: &[f64]| -> f64 {
        // sum_i w_i * (mass of `other` strictly above support point i)
        let mut tail = 0.0;
        let mut total = 0.0;
        for (wi, oi) in w.iter().zip(other).rev() {
            total += wi * tail;
            tail += oi;
        }
        total
    };
    let d = above(&cdfs.w0, &cdfs.w1) - above(&cdfs.w1, &cdfs.w0);
    (0.5 + 0.5 * d).clamp(0.0, 1.0)
}

/// Normalized partial AUC over `[s0, s1]`, trapezoid rule on a fixed grid.
pub fn pauc(cdfs: &WeightedCdfPair, s0: f64, s1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s0) || !(0.0..=1.0).contains(&s1) || s0 >= s1 {
        return Err(Error::BadInterval { s0, s1 });
    }
    let n = GRID_POINTS;
    let h = (s1 - s0) / (n - 1) as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let s = s0 + h * i as f64;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * cdfs.roc(s);
    }
    Ok(acc * h / (s1 - s0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoudenPoint {
    pub j: f64,
    pub cutoff_unit: f64,
    /// `false` when `h` had no root and the support maximizer was used.
    pub from_root: bool,
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > 1e-10 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Zeros of a function on `[0, 1]`: sign changes on a fixed grid, refined by
/// bisection.
pub fn unit_roots(f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = GRID_POINTS;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        if vals[i] == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if i + 1 < n && vals[i + 1] != 0.0 && (vals[i] < 0.0) != (vals[i + 1] < 0.0) {
            roots.push(bisect(&f, grid[i], grid[i + 1], vals[i]));
        }
    }
    roots
}

/// Youden's index at the root of `h` that maximizes `F0 - F1`; falls back to
/// the support maximizer of `F0 - F1` when `h` never changes sign.
pub fn youden(fit: &DensityRatioFit, cdfs: &WeightedCdfPair) -> YoudenPoint {
    let roots = unit_roots(|t| fit.h(t).unwrap_or(f64::NAN));
    let best = roots
        .iter()
        .map(|&r| (cdfs.cdf0(r) - cdfs.cdf1(r), r))
        .fold(None::<(f64, f64)>, |acc, cand| match acc {
            Some(a) if a.0 >= cand.0 => Some(a),
            _ => Some(cand),
        });
    match best {
        Some((j, c)) => YoudenPoint {
            j,
            cutoff_unit: c,
            from_root: true,
        },
        None => youden_from_cdfs(cdfs),
    }
}

/// `max_t {F0(t) - F1(t)}` over the support.
pub fn youden_from_cdfs(cdfs: &WeightedCdfPair) -> YoudenPoint {
    let (j, c) = cdfs.max_cdf_gap();
    YoudenPoint {
        j,
        cutoff_unit: c,
        from_root: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialAuc {
    pub s0: f64,
    pub s1: f64,
    pub value: f64,
}

/// ROC curve and summary indices of one marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    /// `(s, ROC(s))` pairs.
    pub roc_grid: Vec<(f64, f64)>,
    pub auc: f64,
    pub pauc: PartialAuc,
    pub youden_j: f64,
    pub cutoff_unit: f64,
    pub cutoff_raw: f64,
}

impl RocSummary {
    pub fn roc_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.roc_grid.iter().map(|p| p.1)
    }
}

pub fn summarize(
    cdfs: &WeightedCdfPair,
    youden: YoudenPoint,
    s_grid: &[f64],
    s0: f64,
    s1: f64,
    transform: &DomainTransform,
) -> Result<RocSummary> {
    let roc = roc_curve(cdfs, s_grid);
    Ok(RocSummary {
        roc_grid: s_grid.iter().copied().zip(roc).collect(),
        auc: auc(cdfs),
        pauc: PartialAuc {
            s0,
            s1,
            value: pauc(cdfs, s0, s1)?,
        },
        youden_j: youden.j,
        cutoff_unit: youden.cutoff_unit,
        cutoff_raw: transform.inverse(youden.cutoff_unit),
    })
}

/// Differences `A - B` of two marker summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerDeltas {
    pub roc_grid: Vec<(f64, f64)>,
    pub auc: f64,
    pub pauc: f64,
    pub youden_j: f64,
}

pub fn compare_markers(a: &RocSummary, b: &RocSummary) -> Result<MarkerDeltas> {
    if a.roc_grid.len() != b.roc_grid.len()
        || a.roc_grid
            .iter()
            .zip(&b.roc_grid)
            .any(|(p, q)| p.0 != q.0)
        || a.pauc.s0 != b.pauc.s0
        || a.pauc.s1 != b.pauc.s1
    {
        return Err(Error::GridMismatch);
    }
    Ok(MarkerDeltas {
        roc_grid: a
            .roc_grid
            .iter()
            .zip(&b.roc_grid)
            .map(|(p, q)| (p.0, p.1 - q.1))
            .collect(),
        auc: a.auc - b.auc,
        pauc: a.pauc.value - b.pauc.value,
        youden_j: a.youden_j - b.youden_j,
    })
}
