//! Parametrized curves and their covariant jets.
//!
//! The k-th covariant derivative of a curve is built by the recursion
//!
//! ```text
//! (∇γ)      = γ'
//! (∇^k γ)^λ = d/dt (∇^{k-1}γ)^λ + Γ^λ_{μν}(γ(t)) γ'^μ (∇^{k-1}γ)^ν
//! ```
//!
//! For a symbolic connection the recursion is carried out on expressions,
//! once per order, so every evaluation afterwards is exact up to floating
//! point. Rank decisions built on these jets (the ∇-type, the torsionless
//! test, the singularity classifier) therefore do not see finite-difference
//! noise.

use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::expr::{EvalError, Expr, Var};
use crate::geometry::{ConnectionField, GeometryError, Tensor3, Tensor4};
use crate::linalg::{numerical_rank, RankResult};

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve component {0} references chart coordinates; components may only use t")]
    CoordInCurve(usize),
    #[error("curve has {got} components but the chart dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("curve domain [{0}, {1}] is degenerate")]
    EmptyDomain(f64, f64),
    #[error("jet order 0 requested; covariant derivatives start at order 1")]
    ZeroOrder,
    #[error("jet order {order} needs symbolic Christoffel symbols; this metric-backed connection supports orders up to 3")]
    OrderNeedsSymbolic { order: usize },
    #[error("curve component {index} failed to evaluate at t = {t}: {source}")]
    Eval { index: usize, t: f64, source: EvalError },
    #[error("jet expression failed to evaluate at t = {t}: {source}")]
    JetEval { t: f64, source: EvalError },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("differentiation failed: {0}")]
    Diff(#[from] crate::expr::DiffError),
}

/// A curve given by one expression in `t` per coordinate, on a closed
/// parameter interval.
#[derive(Debug, Clone)]
pub struct CurveSpec {
    dim: usize,
    components: Vec<Expr>,
    domain: (f64, f64),
}

impl CurveSpec {
    pub fn new(components: Vec<Expr>, domain: (f64, f64)) -> Result<Self, CurveError> {
        let dim = components.len();
        for (i, c) in components.iter().enumerate() {
            if c.max_coord() != 0 {
                return Err(CurveError::CoordInCurve(i + 1));
            }
        }
        if domain.0 >= domain.1 {
            return Err(CurveError::EmptyDomain(domain.0, domain.1));
        }
        Ok(CurveSpec { dim, components, domain })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn point(&self, t: f64) -> Result<Vec<f64>, CurveError> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.eval_t(t).map_err(|source| CurveError::Eval { index: i + 1, t, source })
            })
            .collect()
    }

    /// Affine reparametrization `t ↦ α t + β` (with the domain mapped
    /// accordingly; `α` may be negative).
    pub fn reparametrize(&self, alpha: f64, beta: f64) -> Result<CurveSpec, CurveError> {
        let rep = Expr::add(Expr::mul(Expr::num(alpha), Expr::time()), Expr::num(beta));
        let comps: Vec<Expr> = self.components.iter().map(|c| c.subst_time(&rep)).collect();
        let (a, b) = self.domain;
        let (ta, tb) = ((a - beta) / alpha, (b - beta) / alpha);
        CurveSpec::new(comps, (ta.min(tb), ta.max(tb)))
    }

    /// Compose with a chart map: the image curve `forward ∘ γ`.
    pub fn compose_chart(&self, map: &crate::geometry::ChartMap) -> Result<CurveSpec, CurveError> {
        if map.dim() != self.dim {
            return Err(CurveError::DimensionMismatch { expected: self.dim, got: map.dim() });
        }
        let comps: Vec<Expr> = map
            .forward
            .iter()
            .map(|f| f.subst_coords(&self.components).simplify())
            .collect();
        CurveSpec::new(comps, self.domain)
    }
}

/// The raw and covariant derivatives of a curve at one parameter value.
#[derive(Debug, Clone)]
pub struct CovariantJet {
    pub t: f64,
    pub order: usize,
    /// `raw[j]` is the j-th ordinary derivative; `raw[0]` is the point.
    pub raw: Vec<Vec<f64>>,
    /// `covariant[j-1]` is `(∇^j γ)(t)`, for `1 <= j <= order`.
    pub covariant: Vec<Vec<f64>>,
}

impl CovariantJet {
    /// `(∇^j γ)(t)` with 1-based `j`.
    pub fn nabla(&self, j: usize) -> &[f64] {
        &self.covariant[j - 1]
    }

    /// The j-th ordinary derivative, `j = 0` giving the point itself.
    pub fn raw_deriv(&self, j: usize) -> &[f64] {
        &self.raw[j]
    }
}

/// Builds and caches the symbolic jet expressions for one (connection,
/// curve) pair. Extending the cache takes a write lock; evaluation is pure
/// and may run from many threads.
pub struct JetEngine {
    conn: ConnectionField,
    curve: CurveSpec,
    /// Γ^λ_{μν} composed with the curve (symbolic connections only).
    gamma_on_curve: Vec<(usize, usize, usize, Expr)>,
    /// `raw_exprs[j]` holds the j-th derivative expressions (j = 0: curve).
    raw_exprs: RwLock<Vec<Arc<Vec<Expr>>>>,
    /// `cov_exprs[j-1]` holds the (∇^j γ) expressions.
    cov_exprs: RwLock<Vec<Arc<Vec<Expr>>>>,
}

impl JetEngine {
    pub fn new(conn: ConnectionField, curve: CurveSpec) -> Result<Self, CurveError> {
        if conn.dim() != curve.dim() {
            return Err(CurveError::DimensionMismatch { expected: conn.dim(), got: curve.dim() });
        }
        let gamma_on_curve = if conn.is_symbolic() {
            conn.nonzero_entries()
                .iter()
                .map(|&(l, m, n, ref e)| {
                    (l, m, n, e.subst_coords(curve.components()).simplify())
                })
                .collect()
        } else {
            Vec::new()
        };
        let comps: Vec<Expr> = curve.components().to_vec();
        Ok(JetEngine {
            conn,
            curve,
            gamma_on_curve,
            raw_exprs: RwLock::new(vec![Arc::new(comps)]),
            cov_exprs: RwLock::new(Vec::new()),
        })
    }

    pub fn connection(&self) -> &ConnectionField {
        &self.conn
    }

    pub fn curve(&self) -> &CurveSpec {
        &self.curve
    }

    fn raw_level(&self, j: usize) -> Result<Arc<Vec<Expr>>, CurveError> {
        {
            let cache = self.raw_exprs.read().unwrap();
            if j < cache.len() {
                return Ok(cache[j].clone());
            }
        }
        let mut cache = self.raw_exprs.write().unwrap();
        while cache.len() <= j {
            let prev = cache.last().unwrap().clone();
            let next: Result<Vec<Expr>, CurveError> = prev
                .iter()
                .map(|e| Ok(e.diff(Var::Time)?.simplify()))
                .collect();
            cache.push(Arc::new(next?));
        }
        Ok(cache[j].clone())
    }

    fn cov_level(&self, j: usize) -> Result<Arc<Vec<Expr>>, CurveError> {
        debug_assert!(j >= 1);
        {
            let cache = self.cov_exprs.read().unwrap();
            if j - 1 < cache.len() {
                return Ok(cache[j - 1].clone());
            }
        }
        let velocity = self.raw_level(1)?;
        let mut cache = self.cov_exprs.write().unwrap();
        if cache.is_empty() {
            cache.push(velocity.clone());
        }
        while cache.len() < j {
            let prev = cache.last().unwrap().clone();
            let dim = self.curve.dim();
            let mut next: Vec<Expr> = Vec::with_capacity(dim);
            for lam in 0..dim {
                let mut acc = prev[lam].diff(Var::Time)?;
                for &(l, m, n, ref g) in &self.gamma_on_curve {
                    if l != lam {
                        continue;
                    }
                    acc = Expr::add(
                        acc,
                        Expr::mul(Expr::mul(g.clone(), velocity[m].clone()), prev[n].clone()),
                    );
                }
                next.push(acc.simplify());
            }
            cache.push(Arc::new(next));
        }
        Ok(cache[j - 1].clone())
    }

    /// The covariant jet at `t` up to order `k`.
    pub fn jet(&self, t: f64, k: usize) -> Result<CovariantJet, CurveError> {
        if k == 0 {
            return Err(CurveError::ZeroOrder);
        }
        let mut raw = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let level = self.raw_level(j)?;
            raw.push(eval_vector(&level, t)?);
        }
        let covariant = if self.conn.is_symbolic() {
            let mut cov = Vec::with_capacity(k);
            for j in 1..=k {
                let level = self.cov_level(j)?;
                cov.push(eval_vector(&level, t)?);
            }
            cov
        } else {
            if k > 3 {
                return Err(CurveError::OrderNeedsSymbolic { order: k });
            }
            let point = &raw[0];
            let gamma = self.conn.christoffel_at(point)?;
            let partials = if k >= 3 {
                Some(self.conn.christoffel_partials(point)?)
            } else {
                None
            };
            closed_form_jets(&gamma, partials.as_ref(), &raw, k)
        };
        Ok(CovariantJet { t, order: k, raw, covariant })
    }

    /// The ∇-type at `t`: least orders at which the covariant jet attains
    /// each rank, probed up to `rmax`.
    pub fn nabla_type(&self, t: f64, rmax: usize, tol: f64) -> Result<NablaType, CurveError> {
        let m = self.curve.dim();
        let jet = self.jet(t, rmax.max(1))?;
        let mut a = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut prev_rank = 0;
        for k in 1..=rmax.max(1) {
            cols.push(jet.nabla(k).to_vec());
            let r = numerical_rank(&cols, tol);
            if r.rank > prev_rank {
                prev_rank = r.rank;
                a.push(k);
                if prev_rank == m {
                    break;
                }
            }
        }
        let complete = prev_rank == m;
        let codim = complete.then(|| {
            a.iter()
                .enumerate()
                .map(|(i, &ai)| ai - (i + 1))
                .sum::<usize>()
        });
        Ok(NablaType { a, complete, codim })
    }
}

fn eval_vector(exprs: &[Expr], t: f64) -> Result<Vec<f64>, CurveError> {
    exprs
        .iter()
        .map(|e| e.eval_t(t).map_err(|source| CurveError::JetEval { t, source }))
        .collect()
}

/// Closed forms for `∇γ, ∇²γ, ∇³γ` in terms of the raw derivatives, the
/// symbols and their first partials (`partials` must be present when
/// `k >= 3`). Used for metric-backed connections and as the second route in
/// tests of the symbolic recursion.
pub fn closed_form_jets(
    gamma: &Tensor3,
    partials: Option<&Tensor4>,
    raw: &[Vec<f64>],
    k: usize,
) -> Vec<Vec<f64>> {
    let m = gamma.dim();
    let v = &raw[1];
    let mut out = Vec::with_capacity(k);
    out.push(v.clone());
    if k >= 2 {
        let mut acc = raw[2].clone();
        for (l, item) in acc.iter_mut().enumerate() {
            for mu in 0..m {
                for nu in 0..m {
                    *item += gamma.get(l, mu, nu) * v[mu] * v[nu];
                }
            }
        }
        out.push(acc);
    }
    if k >= 3 {
        let dg = partials.expect("third-order closed form needs Christoffel partials");
        let acc2 = &raw[2];
        let mut acc = raw[3].clone();
        for (l, item) in acc.iter_mut().enumerate() {
            for mu in 0..m {
                for nu in 0..m {
                    for ka in 0..m {
                        let mut c = dg.get(l, mu, nu, ka);
                        for r in 0..m {
                            c += gamma.get(l, ka, r) * gamma.get(r, mu, nu);
                        }
                        *item += c * v[mu] * v[nu] * v[ka];
                    }
                    *item += (2.0 * gamma.get(l, mu, nu) + gamma.get(l, nu, mu))
                        * v[mu]
                        * acc2[nu];
                }
            }
        }
        out.push(acc);
    }
    out
}

/// The strictly increasing sequence of orders at which the covariant jet
/// first attains each rank, with the codimension Σ(aᵢ − i) when the full
/// rank was reached within the probed bound.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct NablaType {
    pub a: Vec<usize>,
    pub complete: bool,
    pub codim: Option<usize>,
}

/// Result of the torsionless sampling test.
#[derive(Debug, Clone, PartialEq)]
pub enum TorsionlessOutcome {
    /// `rank(∇γ,∇²γ) = 2` and `rank(∇γ,∇²γ,∇³γ) ≤ 2` at every sample.
    Torsionless { max_residual: f64 },
    /// Some sample has third covariant derivative outside the osculating
    /// plane; `max_residual` is the largest normalized third singular value.
    NotTorsionless { max_residual: f64, witness_t: f64 },
    /// `rank(∇γ,∇²γ) < 2` at the reported sample.
    NotNondegenerate { t: f64 },
}

/// Sample the two rank conditions of the torsionless property on
/// `nsamples` uniform parameters.
pub fn is_torsionless(
    conn: &ConnectionField,
    curve: &CurveSpec,
    interval: (f64, f64),
    nsamples: usize,
    tol: f64,
) -> Result<TorsionlessOutcome, CurveError> {
    assert!(nsamples >= 2, "need at least two samples");
    let engine = JetEngine::new(conn.clone(), curve.clone())?;
    let (a, b) = interval;
    let mut max_residual = 0.0f64;
    let mut witness = None;
    for i in 0..nsamples {
        let t = a + (b - a) * (i as f64) / ((nsamples - 1) as f64);
        let jet = engine.jet(t, 3)?;
        let r12 = numerical_rank(&[jet.nabla(1).to_vec(), jet.nabla(2).to_vec()], tol);
        if r12.rank < 2 {
            return Ok(TorsionlessOutcome::NotNondegenerate { t });
        }
        let r123 = numerical_rank(
            &[
                jet.nabla(1).to_vec(),
                jet.nabla(2).to_vec(),
                jet.nabla(3).to_vec(),
            ],
            tol,
        );
        let resid = normalized_third_singular_value(&r123);
        if resid > max_residual {
            max_residual = resid;
        }
        if r123.rank > 2 && witness.is_none() {
            witness = Some(t);
        }
    }
    match witness {
        Some(witness_t) => Ok(TorsionlessOutcome::NotTorsionless { max_residual, witness_t }),
        None => Ok(TorsionlessOutcome::Torsionless { max_residual }),
    }
}

fn normalized_third_singular_value(r: &RankResult) -> f64 {
    let smax = r.singular_values.first().cloned().unwrap_or(0.0);
    if smax == 0.0 {
        return 0.0;
    }
    r.singular_values.get(2).cloned().unwrap_or(0.0) / smax
}

/// One-shot covariant jet (builds a throwaway [`JetEngine`]).
pub fn covariant_jet(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t: f64,
    k: usize,
) -> Result<CovariantJet, CurveError> {
    JetEngine::new(conn.clone(), curve.clone())?.jet(t, k)
}

/// One-shot ∇-type (builds a throwaway [`JetEngine`]).
pub fn nabla_type(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t: f64,
    rmax: usize,
    tol: f64,
) -> Result<NablaType, CurveError> {
    JetEngine::new(conn.clone(), curve.clone())?.nabla_type(t, rmax, tol)
}

/// Default probing bound for the ∇-type.
pub fn default_rmax(dim: usize) -> usize {
    dim + 2
}

/// Default relative tolerance for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // component-wise assertions read best indexed
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn curve3(cs: [&str; 3], dom: (f64, f64)) -> CurveSpec {
        CurveSpec::new(
            cs.iter().map(|s| parse_expr(s, 3).unwrap()).collect(),
            dom,
        )
        .unwrap()
    }

    fn example9_conn() -> ConnectionField {
        let g = parse_expr("x1 + x2^2", 3).unwrap();
        ConnectionField::from_entries(3, &[(3, 1, 2, g.clone()), (3, 2, 1, g)]).unwrap()
    }

    fn example9_curve() -> CurveSpec {
        curve3(["-t^2", "t", "0"], (-2.0, 2.0))
    }

    #[test]
    fn jets_of_the_torsionless_example() {
        let engine = JetEngine::new(example9_conn(), example9_curve()).unwrap();
        for i in 0..11 {
            let t = -1.0 + 0.2 * i as f64;
            let jet = engine.jet(t, 3).unwrap();
            assert_eq!(jet.nabla(1), &[-2.0 * t, 1.0, 0.0]);
            assert_eq!(jet.nabla(2), &[-2.0, 0.0, 0.0]);
            assert_eq!(jet.nabla(3), &[0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn euclidean_jets_equal_raw_derivatives() {
        let conn = ConnectionField::euclidean(3);
        let curve = curve3(["t", "t^2", "t^4"], (-1.0, 1.0));
        let engine = JetEngine::new(conn, curve).unwrap();
        for &t in &[-0.8, 0.0, 0.3, 1.0] {
            let jet = engine.jet(t, 4).unwrap();
            for j in 1..=4 {
                assert_eq!(jet.nabla(j), jet.raw_deriv(j), "order {j} at t={t}");
            }
        }
        let jet = engine.jet(0.0, 4).unwrap();
        assert_eq!(jet.nabla(1), &[1.0, 0.0, 0.0]);
        assert_eq!(jet.nabla(2), &[0.0, 2.0, 0.0]);
        assert_eq!(jet.nabla(3), &[0.0, 0.0, 0.0]);
        assert_eq!(jet.nabla(4), &[0.0, 0.0, 24.0]);
    }

    #[test]
    fn recursion_matches_closed_forms_on_random_polynomial_connections() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for case in 0..8 {
            // degree-2 polynomial symbols over all index triples
            let mut entries = Vec::new();
            for l in 1..=3 {
                for m in 1..=3 {
                    for n in 1..=3 {
                        if rng.random::<f64>() < 0.4 {
                            let c0 = rng.random_range(-0.5..0.5);
                            let c1 = rng.random_range(-0.5..0.5);
                            let c2 = rng.random_range(-0.5..0.5);
                            let e = Expr::add(
                                Expr::num(c0),
                                Expr::add(
                                    Expr::mul(Expr::num(c1), Expr::coord(1)),
                                    Expr::mul(
                                        Expr::num(c2),
                                        Expr::mul(Expr::coord(2), Expr::coord(3)),
                                    ),
                                ),
                            );
                            entries.push((l, m, n, e));
                        }
                    }
                }
            }
            let conn = ConnectionField::from_entries(3, &entries).unwrap();
            let curve = curve3(["t - t^3", "t^2 + 0.5*t", "2*t + t^4"], (-1.0, 1.0));
            let engine = JetEngine::new(conn.clone(), curve.clone()).unwrap();
            for &t in &[-0.7, 0.1, 0.6] {
                let jet = engine.jet(t, 3).unwrap();
                let x = jet.raw_deriv(0).to_vec();
                let gamma = conn.christoffel_at(&x).unwrap();
                let partials = conn.christoffel_partials(&x).unwrap();
                let closed = closed_form_jets(&gamma, Some(&partials), &jet.raw, 3);
                for j in 1..=3 {
                    for l in 0..3 {
                        let a = jet.nabla(j)[l];
                        let b = closed[j - 1][l];
                        assert!(
                            (a - b).abs() < 1e-10,
                            "case {case} order {j} component {l} at t={t}: {a} vs {b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn nabla_types_of_model_curves() {
        let conn = ConnectionField::euclidean(3);

        let t123 = nabla_type(&conn, &curve3(["t", "t^2", "t^3"], (-1.0, 1.0)), 0.0, 5, 1e-8)
            .unwrap();
        assert_eq!(t123.a, vec![1, 2, 3]);
        assert!(t123.complete);
        assert_eq!(t123.codim, Some(0));

        let t124 = nabla_type(&conn, &curve3(["t", "t^2", "t^4"], (-1.0, 1.0)), 0.0, 5, 1e-8)
            .unwrap();
        assert_eq!(t124.a, vec![1, 2, 4]);
        assert_eq!(t124.codim, Some(1));

        let planar = nabla_type(&conn, &curve3(["t", "t^2", "0"], (-1.0, 1.0)), 0.0, 6, 1e-8)
            .unwrap();
        assert!(!planar.complete);
        assert_eq!(planar.a, vec![1, 2]);
        assert_eq!(planar.codim, None);
    }

    #[test]
    fn nabla_type_invariant_under_affine_reparametrization() {
        let conn = example9_conn();
        let curve = example9_curve();
        let engine = JetEngine::new(conn.clone(), curve.clone()).unwrap();
        for (alpha, beta) in [(2.0, 0.3), (0.5, -1.0)] {
            let rep = curve.reparametrize(alpha, beta).unwrap();
            let engine_rep = JetEngine::new(conn.clone(), rep).unwrap();
            for &t in &[-0.6, 0.0, 0.8] {
                let orig = engine.nabla_type(t, 5, 1e-8).unwrap();
                let s = (t - beta) / alpha;
                let repa = engine_rep.nabla_type(s, 5, 1e-8).unwrap();
                assert_eq!(orig, repa, "alpha={alpha} beta={beta} t={t}");
            }
        }
    }

    #[test]
    fn torsionless_classification_of_model_curves() {
        let out = is_torsionless(
            &example9_conn(),
            &example9_curve(),
            (-1.0, 1.0),
            101,
            1e-8,
        )
        .unwrap();
        assert!(matches!(out, TorsionlessOutcome::Torsionless { .. }), "{out:?}");

        let conn = ConnectionField::euclidean(3);
        let helix = curve3(["cos(t)", "sin(t)", "t"], (0.0, 6.0));
        let out = is_torsionless(&conn, &helix, (0.0, 6.0), 101, 1e-8).unwrap();
        assert!(matches!(out, TorsionlessOutcome::NotTorsionless { .. }), "{out:?}");

        let circle = curve3(["cos(t)", "sin(t)", "0"], (0.0, 6.0));
        let out = is_torsionless(&conn, &circle, (0.0, 6.0), 101, 1e-8).unwrap();
        assert!(matches!(out, TorsionlessOutcome::Torsionless { .. }), "{out:?}");

        let line = curve3(["t", "0", "0"], (0.0, 1.0));
        let out = is_torsionless(&conn, &line, (0.0, 1.0), 11, 1e-8).unwrap();
        assert!(matches!(out, TorsionlessOutcome::NotNondegenerate { .. }), "{out:?}");
    }

    #[test]
    fn jet_cache_is_safe_under_concurrent_extension() {
        let engine = std::sync::Arc::new(
            JetEngine::new(example9_conn(), example9_curve()).unwrap(),
        );
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let engine = engine.clone();
                std::thread::spawn(move || {
                    // threads race to extend the expression cache to
                    // different orders while evaluating
                    let order = 1 + (i % 4);
                    let t = -1.0 + 0.25 * i as f64;
                    let jet = engine.jet(t, order).unwrap();
                    (jet.nabla(1).to_vec(), order)
                })
            })
            .collect();
        for h in handles {
            let (n1, _) = h.join().unwrap();
            assert_eq!(n1.len(), 3);
        }
        // the cache ends in a consistent state
        let jet = engine.jet(0.5, 4).unwrap();
        assert_eq!(jet.nabla(3), &[0.0, 0.0, 0.0]);
        assert_eq!(jet.nabla(4), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn curve_validation() {
        assert!(CurveSpec::new(vec![parse_expr("x1", 3).unwrap()], (0.0, 1.0)).is_err());
        assert!(CurveSpec::new(vec![parse_expr("t", 1).unwrap()], (1.0, 1.0)).is_err());
        assert!(covariant_jet(
            &ConnectionField::euclidean(1),
            &CurveSpec::new(vec![parse_expr("t", 1).unwrap()], (0.0, 1.0)).unwrap(),
            0.5,
            0
        )
        .is_err());
    }
}
