//! Clamped B-spline bases on the unit interval, their roughness penalty, and
//! the affine map that brings raw biomarker values onto `[0, 1]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Normalized B-spline basis on `[0, 1]` with equally spaced breakpoints and
/// clamped (repeated) boundary knots.
///
/// `degree` is the polynomial degree of each piece. The conventional "order 4"
/// cubic basis therefore has `degree == 3`; see [`SplineBasis::from_order`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    n_basis: usize,
    /// Full clamped knot vector, length `n_basis + degree + 1`.
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Builds a basis of `n_basis` functions of polynomial degree `degree`.
    ///
    /// There are `n_basis - degree + 1` breakpoints `0 = tau_1 < ... = 1`.
    pub fn new(n_basis: usize, degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::UnsupportedDegree { degree, min: 1 });
        }
        if n_basis < degree + 1 {
            return Err(Error::InvalidDimension { n_basis, degree });
        }
        let n_intervals = n_basis - degree;
        let mut knots = Vec::with_capacity(n_basis + degree + 1);
        knots.extend(std::iter::repeat_n(0.0, degree + 1));
        for j in 1..n_intervals {
            knots.push(j as f64 / n_intervals as f64);
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        debug_assert_eq!(knots.len(), n_basis + degree + 1);
        Ok(Self {
            degree,
            n_basis,
            knots,
        })
    }

    /// Builds a basis from the spline *order* (polynomial degree + 1), the
    /// convention most penalized-spline software uses: order 4 is cubic.
    pub fn from_order(n_basis: usize, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::UnsupportedDegree {
                degree: order.saturating_sub(1),
                min: 1,
            });
        }
        Self::new(n_basis, order - 1)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.degree + 1
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn n_intervals(&self) -> usize {
        self.n_basis - self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Distinct breakpoints `tau_1 < ... < tau_{K-d+1}`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.knots[self.degree..=self.n_basis]
    }

    /// Knot span index `mu` with `knots[mu] <= t < knots[mu + 1]`; the right
    /// endpoint belongs to the last span.
    fn span(&self, t: f64) -> usize {
        let n_int = self.n_intervals();
        let j = ((t * n_int as f64).floor() as usize).min(n_int - 1);
        // Equal spacing makes the arithmetic guess exact up to rounding at
        // the breakpoints; nudge it onto the right span.
        let mut mu = j + self.degree;
        while mu > self.degree && t < self.knots[mu] {
            mu -= 1;
        }
        while mu + 1 < self.n_basis && t >= self.knots[mu + 1] {
            mu += 1;
        }
        mu
    }

    fn check_domain(t: f64) -> Result<()> {
        if t.is_finite() && (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(t))
        }
    }

    /// The `degree + 1` possibly-nonzero basis values at `t`, together with
    /// the index of the first of them.
    pub fn eval_nonzero(&self, t: f64) -> Result<(usize, Vec<f64>)> {
        Self::check_domain(t)?;
        let p = self.degree;
        let mu = self.span(t);
        let mut vals = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        vals[0] = 1.0;
        for j in 1..=p {
            left[j] = t - self.knots[mu + 1 - j];
            right[j] = self.knots[mu + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        Ok((mu - p, vals))
    }

    /// Dense basis vector `phi(t)` of length `K`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (first, vals) = self.eval_nonzero(t)?;
        let mut out = vec![0.0; self.n_basis];
        out[first..first + vals.len()].copy_from_slice(&vals);
        Ok(out)
    }

    /// Derivatives of orders `0..=n_deriv` of the nonzero basis functions at
    /// `t`: `ders[k][j]` is the k-th derivative of basis `first + j`.
    pub fn eval_derivatives(&self, t: f64, n_deriv: usize) -> Result<(usize, Vec<Vec<f64>>)> {
        Self::check_domain(t)?;
        let p = self.degree;
        let mu = self.span(t);
        let mut ders = vec![vec![0.0; p + 1]; n_deriv + 1];
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - self.knots[mu + 1 - j];
            right[j] = self.knots[mu + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let n = n_deriv.min(p);
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=n {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if rk >= 0 {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (k, row) in ders.iter_mut().enumerate().take(n + 1).skip(1) {
            for v in row.iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        Ok((mu - p, ders))
    }

    /// Roughness penalty `Phi_2[j][k] = int_0^1 phi_j''(t) phi_k''(t) dt`,
    /// integrated exactly with Gauss-Legendre rules on each knot interval.
    pub fn penalty_matrix(&self) -> Result<DMatrix<f64>> {
        let p = self.degree;
        if p < 2 {
            return Err(Error::UnsupportedDegree { degree: p, min: 2 });
        }
        // phi'' is piecewise of degree p - 2, so the integrand has degree
        // 2(p - 2); an n-point rule is exact up to degree 2n - 1.
        let n_nodes = p - 1;
        let (nodes, weights) = gauss_legendre(n_nodes);
        let k = self.n_basis;
        let mut pen = DMatrix::<f64>::zeros(k, k);
        let bps = self.breakpoints();
        for w in bps.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, wt) in nodes.iter().zip(&weights) {
                let t = mid + half * x;
                let (first, ders) = self.eval_derivatives(t, 2)?;
                let d2 = &ders[2];
                for (i, di) in d2.iter().enumerate() {
                    for (j, dj) in d2.iter().enumerate() {
                        pen[(first + i, first + j)] += wt * half * di * dj;
                    }
                }
            }
        }
        // Exact symmetry; accumulation order differs between (i, j) and (j, i)
        // only through identical products, but make it explicit.
        let sym = (&pen + pen.transpose()) * 0.5;
        Ok(sym)
    }

    /// Banded design for a set of unit-domain points.
    pub fn design(&self, ts: &[f64]) -> Result<Design> {
        let width = self.degree + 1;
        let mut first = Vec::with_capacity(ts.len());
        let mut values = Vec::with_capacity(ts.len() * width);
        for &t in ts {
            let (f, v) = self.eval_nonzero(t)?;
            first.push(f);
            values.extend_from_slice(&v);
        }
        Ok(Design {
            n_basis: self.n_basis,
            width,
            first,
            values,
        })
    }
}

/// Rows of basis values, stored sparsely: each row has `width` consecutive
/// nonzero columns starting at `first[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n_basis: usize,
    width: usize,
    first: Vec<usize>,
    values: Vec<f64>,
}

impl Design {
    pub fn n_rows(&self) -> usize {
        self.first.len()
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        let w = self.width;
        (self.first[i], &self.values[i * w..(i + 1) * w])
    }

    /// `eta = X b`.
    pub fn mul(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| {
                let (f, v) = self.row(i);
                v.iter().zip(&coef[f..]).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `X^T r`.
    pub fn tmul(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis];
        for (i, ri) in r.iter().enumerate() {
            let (f, v) = self.row(i);
            for (j, vj) in v.iter().enumerate() {
                out[f + j] += vj * ri;
            }
        }
        out
    }

    /// `X^T diag(w) X` as a dense matrix.
    pub fn weighted_gram(&self, w: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::<f64>::zeros(self.n_basis, self.n_basis);
        for (i, wi) in w.iter().enumerate() {
            let (f, v) = self.row(i);
            for (a, va) in v.iter().enumerate() {
                let s = wi * va;
                for (b, vb) in v.iter().enumerate() {
                    g[(f + a, f + b)] += s * vb;
                }
            }
        }
        g
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Design {
        let w = self.width;
        let mut first = Vec::with_capacity(idx.len());
        let mut values = Vec::with_capacity(idx.len() * w);
        for &i in idx {
            first.push(self.first[i]);
            values.extend_from_slice(&self.values[i * w..(i + 1) * w]);
        }
        Design {
            n_basis: self.n_basis,
            width: w,
            first,
            values,
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Affine map from an extended raw range onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DomainTransform {
    /// Raw minimum of the fitted data.
    pub lo: f64,
    /// Raw maximum of the fitted data.
    pub hi: f64,
    pub margin: f64,
}

impl DomainTransform {
    pub fn new(lo: f64, hi: f64, margin: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::DegenerateData(format!(
                "range [{lo}, {hi}] has no positive width"
            )));
        }
        if !margin.is_finite() || margin < 0.0 {
            return Err(Error::InvalidMargin(margin));
        }
        Ok(Self { lo, hi, margin })
    }

    /// Lower end of the extended range, mapped to 0.
    pub fn lo_ext(&self) -> f64 {
        self.lo - self.margin * (self.hi - self.lo)
    }

    /// Upper end of the extended range, mapped to 1.
    pub fn hi_ext(&self) -> f64 {
        self.hi + self.margin * (self.hi - self.lo)
    }

    pub fn forward(&self, raw: f64) -> f64 {
        let (a, b) = (self.lo_ext(), self.hi_ext());
        (raw - a) / (b - a)
    }

    pub fn inverse(&self, unit: f64) -> f64 {
        let (a, b) = (self.lo_ext(), self.hi_ext());
        a + unit * (b - a)
    }
}

/// Fits a [`DomainTransform`] to `raw` and returns the mapped values.
pub fn fit_transform(raw: &[f64], margin: f64) -> Result<(DomainTransform, Vec<f64>)> {
    if raw.len() < 2 {
        return Err(Error::DegenerateData(
            "need at least two values to fix a range".into(),
        ));
    }
    if let Some(bad) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::DegenerateData(format!("non-finite value {bad}")));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(Error::DegenerateData("all values are equal".into()));
    }
    let tr = DomainTransform::new(lo, hi, margin)?;
    let scaled = raw
        .iter()
        .map(|&v| tr.forward(v).clamp(0.0, 1.0))
        .collect();
    Ok((tr, scaled))
}
