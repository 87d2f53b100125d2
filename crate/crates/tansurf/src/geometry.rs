//! Affine connections on a coordinate chart.
//!
//! A [`ConnectionField`] stores the Christoffel symbols `Γ^λ_{μν}(x)` of a
//! connection, either as symbolic expressions (the common case, enabling
//! exact partial derivatives and symbolic covariant jets) or backed by a
//! metric whose inverse is computed pointwise (used for non-diagonal
//! metrics, where symbolic inversion would blow up).

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{EvalError, Expr, Var};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("Christoffel symbol [{lam},{mu},{nu}] failed to evaluate: {source}")]
    ChristoffelEval {
        lam: usize,
        mu: usize,
        nu: usize,
        source: EvalError,
    },
    #[error("metric entry g[{i},{j}] failed to evaluate: {source}")]
    MetricEval { i: usize, j: usize, source: EvalError },
    #[error("metric is singular at the queried point")]
    SingularMetric,
    #[error("chart map component {0} failed to evaluate: {1}")]
    ChartEval(usize, EvalError),
    #[error("index [{lam},{mu},{nu}] out of range for dimension {dim}")]
    IndexOutOfRange { lam: usize, mu: usize, nu: usize, dim: usize },
    #[error("expression for {what} references the curve parameter t")]
    TimeInField { what: String },
    #[error("expression for {what} references coordinate x{index} beyond dimension {dim}")]
    CoordOutOfRange { what: String, index: u32, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("this operation needs symbolic Christoffel symbols, but the connection is metric-backed (non-diagonal metric)")]
    NotSymbolic,
    #[error("differentiation failed: {0}")]
    Diff(#[from] crate::expr::DiffError),
}

fn check_field_expr(e: &Expr, what: &str, dim: usize) -> Result<(), GeometryError> {
    if e.uses_time() {
        return Err(GeometryError::TimeInField { what: what.to_string() });
    }
    let k = e.max_coord();
    if k as usize > dim {
        return Err(GeometryError::CoordOutOfRange {
            what: what.to_string(),
            index: k,
            dim,
        });
    }
    Ok(())
}

/// Dense rank-3 tensor of evaluated Christoffel symbols, indexed
/// `[λ][μ][ν]` with 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize, n: usize) -> f64 {
        self.data[(l * self.dim + m) * self.dim + n]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: usize, n: usize, v: f64) {
        self.data[(l * self.dim + m) * self.dim + n] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Dense rank-4 tensor of Christoffel partials, indexed `[λ][μ][ν][κ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Tensor4 { dim, data: vec![0.0; dim * dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize, n: usize, k: usize) -> f64 {
        self.data[((l * self.dim + m) * self.dim + n) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: usize, n: usize, k: usize, v: f64) {
        self.data[((l * self.dim + m) * self.dim + n) * self.dim + k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

#[derive(Debug)]
enum Coeffs {
    /// Dense m^3 expressions; absent scene entries are the zero expression.
    Symbolic {
        gamma: Vec<Expr>,
        /// Lazily differentiated entries, index [(λ,μ,ν) major][κ].
        partials: OnceLock<Vec<Expr>>,
    },
    /// Pointwise Levi-Civita evaluation from a non-diagonal metric.
    Metric(MetricField),
}

/// The Christoffel symbols of an affine connection on one chart.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    dim: usize,
    coeffs: Arc<Coeffs>,
    /// Indices of non-zero symbolic entries, for fast contraction loops.
    nonzero: Arc<Vec<(usize, usize, usize, Expr)>>,
}

impl ConnectionField {
    /// The flat connection: every symbol is zero.
    pub fn euclidean(dim: usize) -> Self {
        Self::from_dense(dim, vec![Expr::zero(); dim * dim * dim]).unwrap()
    }

    /// Build from a sparse entry list; unspecified entries are zero.
    /// Indices are 1-based like the coordinates.
    pub fn from_entries(
        dim: usize,
        entries: &[(usize, usize, usize, Expr)],
    ) -> Result<Self, GeometryError> {
        let mut gamma = vec![Expr::zero(); dim * dim * dim];
        for &(l, m, n, ref e) in entries {
            if l == 0 || m == 0 || n == 0 || l > dim || m > dim || n > dim {
                return Err(GeometryError::IndexOutOfRange { lam: l, mu: m, nu: n, dim });
            }
            gamma[((l - 1) * dim + (m - 1)) * dim + (n - 1)] = e.clone();
        }
        Self::from_dense(dim, gamma)
    }

    fn from_dense(dim: usize, gamma: Vec<Expr>) -> Result<Self, GeometryError> {
        assert_eq!(gamma.len(), dim * dim * dim);
        let mut nonzero = Vec::new();
        for l in 0..dim {
            for m in 0..dim {
                for n in 0..dim {
                    let e = &gamma[(l * dim + m) * dim + n];
                    check_field_expr(e, &format!("Gamma[{},{},{}]", l + 1, m + 1, n + 1), dim)?;
                    if !e.is_zero() {
                        // reject entries the exact-partials machinery cannot
                        // differentiate (e.g. non-integer powers of a
                        // possibly non-positive base) up front
                        for k in 1..=dim as u32 {
                            e.diff(Var::Coord(k))?;
                        }
                        nonzero.push((l, m, n, e.clone()));
                    }
                }
            }
        }
        Ok(ConnectionField {
            dim,
            coeffs: Arc::new(Coeffs::Symbolic { gamma, partials: OnceLock::new() }),
            nonzero: Arc::new(nonzero),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the symbols are stored symbolically (supports exact partials
    /// of every order and symbolic covariant jets).
    pub fn is_symbolic(&self) -> bool {
        matches!(&*self.coeffs, Coeffs::Symbolic { .. })
    }

    /// The symbolic entry `Γ^λ_{μν}` (1-based indices), if available.
    pub fn entry(&self, l: usize, m: usize, n: usize) -> Option<&Expr> {
        match &*self.coeffs {
            Coeffs::Symbolic { gamma, .. } => {
                Some(&gamma[((l - 1) * self.dim + (m - 1)) * self.dim + (n - 1)])
            }
            Coeffs::Metric(_) => None,
        }
    }

    /// Non-zero symbolic entries as (λ, μ, ν, expr) with 0-based indices.
    pub(crate) fn nonzero_entries(&self) -> &[(usize, usize, usize, Expr)] {
        &self.nonzero
    }

    /// Evaluate all symbols at the chart point `x`.
    pub fn christoffel_at(&self, x: &[f64]) -> Result<Tensor3, GeometryError> {
        match &*self.coeffs {
            Coeffs::Symbolic { .. } => {
                let mut out = Tensor3::zeros(self.dim);
                for &(l, m, n, ref e) in self.nonzero.iter() {
                    let v = e.eval_x(x).map_err(|source| GeometryError::ChristoffelEval {
                        lam: l + 1,
                        mu: m + 1,
                        nu: n + 1,
                        source,
                    })?;
                    out.set(l, m, n, v);
                }
                Ok(out)
            }
            Coeffs::Metric(metric) => metric.levi_civita_at(x),
        }
    }

    /// Evaluate all partials `∂Γ^λ_{μν}/∂x^κ` at `x` (exact: symbolic
    /// differentiation, or the closed derivative-of-inverse formula for
    /// metric-backed connections).
    pub fn christoffel_partials(&self, x: &[f64]) -> Result<Tensor4, GeometryError> {
        match &*self.coeffs {
            Coeffs::Symbolic { gamma, partials } => {
                let dim = self.dim;
                let table = partials.get_or_init(|| {
                    let mut table = Vec::with_capacity(gamma.len() * dim);
                    for e in gamma {
                        for k in 0..dim {
                            let d = e
                                .diff(Var::Coord((k + 1) as u32))
                                .expect("entries were checked differentiable at construction")
                                .simplify();
                            table.push(d);
                        }
                    }
                    table
                });
                let mut out = Tensor4::zeros(dim);
                for l in 0..dim {
                    for m in 0..dim {
                        for n in 0..dim {
                            for k in 0..dim {
                                let e = &table[((l * dim + m) * dim + n) * dim + k];
                                if e.is_zero() {
                                    continue;
                                }
                                let v = e.eval_x(x).map_err(|source| {
                                    GeometryError::ChristoffelEval {
                                        lam: l + 1,
                                        mu: m + 1,
                                        nu: n + 1,
                                        source,
                                    }
                                })?;
                                out.set(l, m, n, k, v);
                            }
                        }
                    }
                }
                Ok(out)
            }
            Coeffs::Metric(metric) => metric.levi_civita_partials_at(x),
        }
    }

    /// Replace `Γ^λ_{μν}` by `(Γ^λ_{μν} + Γ^λ_{νμ})/2`. Geodesics are
    /// unchanged; the result is torsion free. Entries that are already
    /// symmetric are kept verbatim, which makes the operation idempotent
    /// at the expression level.
    pub fn symmetrize(&self) -> ConnectionField {
        match &*self.coeffs {
            Coeffs::Metric(_) => self.clone(),
            Coeffs::Symbolic { gamma, .. } => {
                let dim = self.dim;
                let mut out = gamma.clone();
                for l in 0..dim {
                    for m in 0..dim {
                        for n in m..dim {
                            let a = &gamma[(l * dim + m) * dim + n];
                            let b = &gamma[(l * dim + n) * dim + m];
                            if a.simplify() == b.simplify() {
                                continue;
                            }
                            let half = Expr::mul(
                                Expr::num(0.5),
                                Expr::add(a.clone(), b.clone()),
                            )
                            .simplify();
                            out[(l * dim + m) * dim + n] = half.clone();
                            out[(l * dim + n) * dim + m] = half;
                        }
                    }
                }
                Self::from_dense(dim, out).expect("entries were already validated")
            }
        }
    }

    /// True when each pair `Γ^λ_{μν}`, `Γ^λ_{νμ}` simplifies to the same
    /// expression.
    pub fn is_torsion_free_symbolic(&self) -> bool {
        match &*self.coeffs {
            Coeffs::Metric(_) => true,
            Coeffs::Symbolic { gamma, .. } => {
                let dim = self.dim;
                for l in 0..dim {
                    for m in 0..dim {
                        for n in (m + 1)..dim {
                            let a = &gamma[(l * dim + m) * dim + n];
                            let b = &gamma[(l * dim + n) * dim + m];
                            if a.simplify() != b.simplify() {
                                return false;
                            }
                        }
                    }
                }
                true
            }
        }
    }

    /// Push the connection through a chart map: the returned connection, in
    /// the new coordinates, has as geodesics the images of this
    /// connection's geodesics.
    pub fn transform(&self, map: &ChartMap) -> Result<ConnectionField, GeometryError> {
        let dim = self.dim;
        if map.dim() != dim {
            return Err(GeometryError::DimensionMismatch { expected: dim, got: map.dim() });
        }
        let gamma = match &*self.coeffs {
            Coeffs::Symbolic { gamma, .. } => gamma,
            Coeffs::Metric(_) => return Err(GeometryError::NotSymbolic),
        };

        // A^i_a = ∂x^i/∂y^a and S^k_ab = ∂²x^k/∂y^a∂y^b, both expressions in
        // the new coordinates (the inverse map components are written in the
        // variables x1..xm which here denote y).
        let mut inv_jac = vec![Expr::zero(); dim * dim];
        let mut inv_hess = vec![Expr::zero(); dim * dim * dim];
        for i in 0..dim {
            for a in 0..dim {
                let d = map.inverse[i].diff(Var::Coord((a + 1) as u32))?.simplify();
                inv_jac[i * dim + a] = d.clone();
                for b in 0..dim {
                    inv_hess[(i * dim + a) * dim + b] =
                        d.diff(Var::Coord((b + 1) as u32))?.simplify();
                }
            }
        }
        // J^c_k = ∂y^c/∂x^k composed with the inverse map.
        let mut fwd_jac = vec![Expr::zero(); dim * dim];
        for c in 0..dim {
            for k in 0..dim {
                let d = map.forward[c].diff(Var::Coord((k + 1) as u32))?;
                fwd_jac[c * dim + k] = d.subst_coords(&map.inverse).simplify();
            }
        }
        // Γ composed with the inverse map.
        let mut gamma_at_inv = vec![Expr::zero(); dim * dim * dim];
        for (idx, e) in gamma.iter().enumerate() {
            if !e.is_zero() {
                gamma_at_inv[idx] = e.subst_coords(&map.inverse).simplify();
            }
        }

        let mut out = vec![Expr::zero(); dim * dim * dim];
        for c in 0..dim {
            for a in 0..dim {
                for b in 0..dim {
                    let mut acc = Expr::zero();
                    for k in 0..dim {
                        let mut inner = inv_hess[(k * dim + a) * dim + b].clone();
                        for i in 0..dim {
                            for j in 0..dim {
                                let g = &gamma_at_inv[(k * dim + i) * dim + j];
                                if g.is_zero() {
                                    continue;
                                }
                                inner = Expr::add(
                                    inner,
                                    Expr::mul(
                                        Expr::mul(
                                            inv_jac[i * dim + a].clone(),
                                            inv_jac[j * dim + b].clone(),
                                        ),
                                        g.clone(),
                                    ),
                                );
                            }
                        }
                        acc = Expr::add(acc, Expr::mul(fwd_jac[c * dim + k].clone(), inner));
                    }
                    out[(c * dim + a) * dim + b] = acc.simplify();
                }
            }
        }
        Self::from_dense(dim, out)
    }
}

/// A symmetric metric tensor field given by expressions.
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    /// Row-major m×m entries; construction mirrors `g[i][j]` to `g[j][i]`.
    g: Vec<Expr>,
}

impl MetricField {
    /// Build from a sparse list of (i, j, expr) with 1-based indices; the
    /// (j, i) entry is filled in automatically.
    pub fn from_entries(
        dim: usize,
        entries: &[(usize, usize, Expr)],
    ) -> Result<Self, GeometryError> {
        let mut g = vec![Expr::zero(); dim * dim];
        for &(i, j, ref e) in entries {
            if i == 0 || j == 0 || i > dim || j > dim {
                return Err(GeometryError::IndexOutOfRange { lam: i, mu: j, nu: 0, dim });
            }
            check_field_expr(e, &format!("g[{i},{j}]"), dim)?;
            g[(i - 1) * dim + (j - 1)] = e.clone();
            g[(j - 1) * dim + (i - 1)] = e.clone();
        }
        Ok(MetricField { dim, g })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = Vec::new();
        for i in 1..=dim {
            entries.push((i, i, Expr::one()));
        }
        Self::from_entries(dim, &entries).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.g[(i - 1) * self.dim + (j - 1)]
    }

    pub fn is_diagonal(&self) -> bool {
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j && !self.g[i * self.dim + j].is_zero() {
                    return false;
                }
            }
        }
        true
    }

    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self.g[i * self.dim + j]
                    .eval_x(x)
                    .map_err(|source| GeometryError::MetricEval { i: i + 1, j: j + 1, source })?;
            }
        }
        Ok(out)
    }

    /// The Levi-Civita connection of this metric. Diagonal metrics yield a
    /// symbolic connection; otherwise the connection evaluates pointwise by
    /// LU-inverting `g(x)`.
    pub fn levi_civita(&self) -> Result<ConnectionField, GeometryError> {
        let dim = self.dim;
        if self.is_diagonal() {
            // For diagonal g the only non-zero symbols are
            //   Γ^λ_{λλ} =  g_{λλ,λ} / (2 g_{λλ})
            //   Γ^λ_{λν} =  g_{λλ,ν} / (2 g_{λλ})   (ν ≠ λ)
            //   Γ^λ_{μμ} = -g_{μμ,λ} / (2 g_{λλ})   (μ ≠ λ)
            let mut gamma = vec![Expr::zero(); dim * dim * dim];
            for l in 0..dim {
                let gl = &self.g[l * dim + l];
                for n in 0..dim {
                    let d = gl.diff(Var::Coord((n + 1) as u32))?;
                    let e = Expr::div(d, Expr::mul(Expr::num(2.0), gl.clone())).simplify();
                    gamma[(l * dim + l) * dim + n] = e.clone();
                    gamma[(l * dim + n) * dim + l] = e;
                }
                for m in 0..dim {
                    if m == l {
                        continue;
                    }
                    let gm = &self.g[m * dim + m];
                    let d = gm.diff(Var::Coord((l + 1) as u32))?;
                    gamma[(l * dim + m) * dim + m] = Expr::neg(Expr::div(
                        d,
                        Expr::mul(Expr::num(2.0), gl.clone()),
                    ))
                    .simplify();
                }
            }
            ConnectionField::from_dense(dim, gamma)
        } else {
            Ok(ConnectionField {
                dim,
                coeffs: Arc::new(Coeffs::Metric(self.clone())),
                nonzero: Arc::new(Vec::new()),
            })
        }
    }

    /// Γ^λ_{μν}(x) = ½ g^{λρ} (g_{ρμ,ν} + g_{ρν,μ} − g_{μν,ρ}) with g^{-1}
    /// computed by LU with partial pivoting.
    fn levi_civita_at(&self, x: &[f64]) -> Result<Tensor3, GeometryError> {
        let dim = self.dim;
        let ginv = self
            .eval(x)?
            .lu()
            .try_inverse()
            .ok_or(GeometryError::SingularMetric)?;
        let dg = self.partials_at(x)?; // dg[(i,j,k)] = g_{ij,k}
        let mut out = Tensor3::zeros(dim);
        for l in 0..dim {
            for m in 0..dim {
                for n in 0..dim {
                    let mut acc = 0.0;
                    for r in 0..dim {
                        let a = dg.get(r, m, n) + dg.get(r, n, m) - dg.get(m, n, r);
                        acc += 0.5 * ginv[(l, r)] * a;
                    }
                    out.set(l, m, n, acc);
                }
            }
        }
        Ok(out)
    }

    /// ∂κ Γ = ½ (∂κ g^{-1}) A + ½ g^{-1} ∂κ A with
    /// ∂κ g^{-1} = −g^{-1} (∂κ g) g^{-1}; exact given symbolic g-partials.
    #[allow(clippy::needless_range_loop)]
    fn levi_civita_partials_at(&self, x: &[f64]) -> Result<Tensor4, GeometryError> {
        let dim = self.dim;
        let ginv = self
            .eval(x)?
            .lu()
            .try_inverse()
            .ok_or(GeometryError::SingularMetric)?;
        let dg = self.partials_at(x)?;
        let ddg = self.second_partials_at(x)?; // ddg[(i,j,k,l)] = g_{ij,kl}

        let dginv: Vec<DMatrix<f64>> = (0..dim)
            .map(|k| {
                let mut dgk = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        dgk[(i, j)] = dg.get(i, j, k);
                    }
                }
                -(&ginv * dgk * &ginv)
            })
            .collect();

        let mut out = Tensor4::zeros(dim);
        for l in 0..dim {
            for m in 0..dim {
                for n in 0..dim {
                    for k in 0..dim {
                        let mut acc = 0.0;
                        for r in 0..dim {
                            let a = dg.get(r, m, n) + dg.get(r, n, m) - dg.get(m, n, r);
                            let da = ddg.get(r, m, n, k) + ddg.get(r, n, m, k)
                                - ddg.get(m, n, r, k);
                            acc += 0.5 * (dginv[k][(l, r)] * a + ginv[(l, r)] * da);
                        }
                        out.set(l, m, n, k, acc);
                    }
                }
            }
        }
        Ok(out)
    }

    fn partials_at(&self, x: &[f64]) -> Result<Tensor3, GeometryError> {
        let dim = self.dim;
        let mut out = Tensor3::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let e = &self.g[i * dim + j];
                if e.is_zero() {
                    continue;
                }
                for k in 0..dim {
                    let d = e.diff(Var::Coord((k + 1) as u32))?;
                    let v = d
                        .eval_x(x)
                        .map_err(|source| GeometryError::MetricEval { i: i + 1, j: j + 1, source })?;
                    out.set(i, j, k, v);
                }
            }
        }
        Ok(out)
    }

    fn second_partials_at(&self, x: &[f64]) -> Result<Tensor4, GeometryError> {
        let dim = self.dim;
        let mut out = Tensor4::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let e = &self.g[i * dim + j];
                if e.is_zero() {
                    continue;
                }
                for k in 0..dim {
                    let d = e.diff(Var::Coord((k + 1) as u32))?;
                    for l in 0..dim {
                        let dd = d.diff(Var::Coord((l + 1) as u32))?;
                        let v = dd.eval_x(x).map_err(|source| GeometryError::MetricEval {
                            i: i + 1,
                            j: j + 1,
                            source,
                        })?;
                        out.set(i, j, k, l, v);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A coordinate change `y = forward(x)` with explicit inverse
/// `x = inverse(y)`. Both sides are written in the variables `x1..xm`; in
/// the inverse components they denote the new coordinates.
#[derive(Debug, Clone)]
pub struct ChartMap {
    dim: usize,
    pub forward: Vec<Expr>,
    pub inverse: Vec<Expr>,
}

impl ChartMap {
    pub fn new(dim: usize, forward: Vec<Expr>, inverse: Vec<Expr>) -> Result<Self, GeometryError> {
        if forward.len() != dim || inverse.len() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: forward.len().max(inverse.len()),
            });
        }
        for (i, e) in forward.iter().chain(inverse.iter()).enumerate() {
            check_field_expr(e, &format!("chart map component {}", i % dim + 1), dim)?;
        }
        Ok(ChartMap { dim, forward, inverse })
    }

    pub fn identity(dim: usize) -> Self {
        let comps: Vec<Expr> = (1..=dim as u32).map(Expr::coord).collect();
        ChartMap { dim, forward: comps.clone(), inverse: comps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply_forward(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.forward
            .iter()
            .enumerate()
            .map(|(i, e)| e.eval_x(x).map_err(|err| GeometryError::ChartEval(i + 1, err)))
            .collect()
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.inverse
            .iter()
            .enumerate()
            .map(|(i, e)| e.eval_x(y).map_err(|err| GeometryError::ChartEval(i + 1, err)))
            .collect()
    }

    /// Max round-trip defect `|inverse(forward(x)) - x|` over sample points.
    pub fn roundtrip_defect(&self, points: &[Vec<f64>]) -> Result<f64, GeometryError> {
        let mut worst: f64 = 0.0;
        for x in points {
            let y = self.apply_forward(x)?;
            let back = self.apply_inverse(&y)?;
            for (a, b) in back.iter().zip(x.iter()) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

impl fmt::Display for ConnectionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.coeffs {
            Coeffs::Symbolic { .. } => {
                writeln!(f, "connection (dim {}):", self.dim)?;
                for &(l, m, n, ref e) in self.nonzero.iter() {
                    writeln!(f, "  Gamma[{},{},{}] = {}", l + 1, m + 1, n + 1, e)?;
                }
                Ok(())
            }
            Coeffs::Metric(_) => {
                writeln!(f, "connection (dim {}): pointwise Levi-Civita of a metric", self.dim)
            }
        }
    }
}
