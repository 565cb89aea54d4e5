//! Basis-function families, design matrices and Gram matrices.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisFamily {
    NaturalCubicSpline,
    Fourier,
    /// `t^(k-1)`; only meant for tests.
    MonomialTest,
}

impl BasisFamily {
    pub fn min_k(self) -> usize {
        match self {
            BasisFamily::NaturalCubicSpline => 2,
            BasisFamily::Fourier | BasisFamily::MonomialTest => 1,
        }
    }
}

/// Closed interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub start: f64,
    pub end: f64,
}

impl Domain {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() || start >= end {
            return Err(Error::InvalidSpec(format!(
                "domain [{start}, {end}] must be finite with start < end"
            )));
        }
        Ok(Domain { start, end })
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    /// Membership with a rounding allowance of `1e-12` widths.
    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * self.width();
        t >= self.start - slack && t <= self.end + slack
    }

    /// `points` equispaced values covering both endpoints.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![self.start],
            _ => {
                let step = self.width() / (points - 1) as f64;
                (0..points)
                    .map(|i| {
                        if i == points - 1 {
                            self.end
                        } else {
                            self.start + step * i as f64
                        }
                    })
                    .collect()
            }
        }
    }
}

/// A basis family of dimension `k` on a domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    family: BasisFamily,
    k: usize,
    domain: Domain,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, k: usize, domain: Domain) -> Result<Self> {
        if k < family.min_k() {
            return Err(Error::InvalidSpec(format!(
                "{family:?} needs at least {} basis functions, got {k}",
                family.min_k()
            )));
        }
        // Re-validate in case the domain was built by hand.
        let domain = Domain::new(domain.start, domain.end)?;
        Ok(BasisSpec { family, k, domain })
    }

    pub fn natural_spline(k: usize, domain: Domain) -> Result<Self> {
        Self::new(BasisFamily::NaturalCubicSpline, k, domain)
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Knot locations in domain units (natural splines only).
    pub fn knots(&self) -> Vec<f64> {
        match self.family {
            BasisFamily::NaturalCubicSpline => self.domain.grid(self.k),
            _ => Vec::new(),
        }
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::invalid(format!("evaluation point {t} is not finite")));
        }
        match self.family {
            BasisFamily::NaturalCubicSpline => Ok(()),
            _ if self.domain.contains(t) => Ok(()),
            _ => Err(Error::invalid(format!(
                "t = {t} outside domain [{}, {}] for {:?} basis",
                self.domain.start, self.domain.end, self.family
            ))),
        }
    }

    /// Writes `(φ_1(t), …, φ_K(t))` into `out`, which must have length `K`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.k);
        self.check_range(t)?;
        match self.family {
            BasisFamily::NaturalCubicSpline => natural_spline_eval(self.k, self.domain, t, out),
            BasisFamily::Fourier => fourier_eval(self.domain, t, out),
            BasisFamily::MonomialTest => {
                let mut p = 1.0;
                for v in out.iter_mut() {
                    *v = p;
                    p *= t;
                }
            }
        }
        Ok(())
    }
}

/// Truncated-power natural cubic spline on `K` equispaced knots.
///
/// Evaluated in the unit coordinate `u = (t - a) / (b - a)` with knots
/// `ξ_j = j / (K - 1)`: `N_1 = 1`, `N_2 = u`, `N_{k+2} = d_k - d_{K-1}` where
/// `d_k(u) = ((u - ξ_k)_+^3 - (u - ξ_K)_+^3) / (ξ_K - ξ_k)`.
fn natural_spline_eval(k: usize, domain: Domain, t: f64, out: &mut [f64]) {
    let u = (t - domain.start) / domain.width();
    out[0] = 1.0;
    out[1] = u;
    if k == 2 {
        return;
    }
    let last = (k - 1) as f64;
    let knot = |j: usize| j as f64 / last;

    if u >= 1.0 {
        // Beyond the last knot, d_k(u) = 3v^2 + 3vδ_k + δ_k^2 with v = u - 1 and
        // δ_k = 1 - ξ_k; the quadratic term cancels in d_k - d_{K-1}.
        let v = u - 1.0;
        let delta_ref = 1.0 - knot(k - 2);
        for j in 0..(k - 2) {
            let delta = 1.0 - knot(j);
            out[j + 2] = 3.0 * v * (delta - delta_ref) + delta * delta - delta_ref * delta_ref;
        }
        return;
    }

    let cube = |x: f64| if x > 0.0 { x * x * x } else { 0.0 };
    let tail = cube(u - 1.0);
    let d = |j: usize| (cube(u - knot(j)) - tail) / (1.0 - knot(j));
    let d_ref = d(k - 2);
    for j in 0..(k - 2) {
        out[j + 2] = d(j) - d_ref;
    }
}

/// Orthonormal Fourier family: constant, then sin/cos pairs of increasing
/// frequency, truncated at `K` (even `K` ends on a sine).
fn fourier_eval(domain: Domain, t: f64, out: &mut [f64]) {
    let width = domain.width();
    let scale = (2.0 / width).sqrt();
    out[0] = 1.0 / width.sqrt();
    let phase = 2.0 * PI * (t - domain.start) / width;
    for idx in 1..out.len() {
        let freq = idx.div_ceil(2) as f64;
        out[idx] = if idx % 2 == 1 {
            scale * (freq * phase).sin()
        } else {
            scale * (freq * phase).cos()
        };
    }
}

pub fn eval_basis(spec: &BasisSpec, t: f64) -> Result<Vector> {
    let mut out = vec![0.0; spec.k()];
    spec.eval_into(t, &mut out)?;
    Ok(Vector::from_vec(out))
}

/// `M x K` matrix whose row `j` is `φ(t_j)^T`.
pub fn design_matrix(spec: &BasisSpec, times: &[f64]) -> Result<Matrix> {
    if times.is_empty() {
        return Err(Error::invalid("design matrix needs at least one time point"));
    }
    let k = spec.k();
    let mut out = Matrix::zeros(times.len(), k);
    let mut row = vec![0.0; k];
    for (j, &t) in times.iter().enumerate() {
        spec.eval_into(t, &mut row)?;
        for (c, v) in row.iter().enumerate() {
            out[(j, c)] = *v;
        }
    }
    Ok(out)
}

/// Pairwise L2 inner products of the basis functions over the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    spec: BasisSpec,
    entries: Matrix,
}

impl GramMatrix {
    /// Wraps an arbitrary symmetric matrix; used when a synthetic Gram is
    /// needed (e.g. rank-deficient test fixtures).
    pub fn from_entries(spec: BasisSpec, entries: Matrix) -> Result<Self> {
        if entries.nrows() != spec.k() || entries.ncols() != spec.k() {
            return Err(Error::invalid(format!(
                "Gram entries must be {0}x{0}, got {1}x{2}",
                spec.k(),
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(GramMatrix { spec, entries })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }
}

pub const GAUSS_LEGENDRE_NODES: usize = 16;
pub const QUADRATURE_PANELS: usize = 64;

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GAUSS_LEGENDRE_NODES))
}

/// Quadrature nodes and weights over the domain: 16-point Gauss–Legendre on
/// 64 equal panels, with spline knots added as extra breakpoints so every
/// panel sees a single polynomial piece.
pub fn quadrature_rule(spec: &BasisSpec) -> (Vec<f64>, Vec<f64>) {
    let domain = spec.domain();
    let mut breaks = domain.grid(QUADRATURE_PANELS + 1);
    breaks.extend(spec.knots());
    breaks.sort_by(f64::total_cmp);
    let min_gap = 1e-12 * domain.width();
    breaks.dedup_by(|a, b| (*a - *b).abs() <= min_gap);

    let (gx, gw) = gl16();
    let mut nodes = Vec::with_capacity((breaks.len() - 1) * gx.len());
    let mut weights = Vec::with_capacity(nodes.capacity());
    for w in breaks.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        for (x, wt) in gx.iter().zip(gw) {
            nodes.push(mid + half * x);
            weights.push(half * wt);
        }
    }
    (nodes, weights)
}

pub fn gram_matrix(spec: &BasisSpec) -> Result<GramMatrix> {
    let k = spec.k();
    let (nodes, weights) = quadrature_rule(spec);
    let mut acc = Matrix::zeros(k, k);
    let mut phi = vec![0.0; k];
    for (&t, &w) in nodes.iter().zip(&weights) {
        spec.eval_into(t, &mut phi)?;
        for j in 0..k {
            let wj = w * phi[j];
            for i in 0..=j {
                acc[(i, j)] += wj * phi[i];
            }
        }
    }
    for j in 0..k {
        for i in (j + 1)..k {
            acc[(i, j)] = acc[(j, i)];
        }
    }
    Ok(GramMatrix {
        spec: *spec,
        entries: acc,
    })
}
