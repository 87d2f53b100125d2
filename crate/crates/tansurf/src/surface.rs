//! Tangent surfaces `f(t, s) = φ(γ(t), γ'(t), s)` and the classification
//! of their singularities along the singular locus `s = 0`.
//!
//! The surface is a frontal: away from `s = 0` its tangent plane is spanned
//! by `V1 = ∂f/∂t` and `V2 = F = (∂f/∂t − ∂f/∂s)/s`, and `F` extends
//! smoothly to `s = 0` with `F(t, 0) = (∇²γ)(t)`. The signed area density
//! `σ` defined by `f_t ∧ f_s = σ · V1 ∧ V2` then satisfies `σ(t, s) = −s`.
//!
//! Classification at `(t0, 0)` rests on ranks of covariant jets, which are
//! evaluated from exact symbolic expressions rather than finite
//! differences:
//!
//! - `rank(∇γ, ∇²γ) < 2`: not a non-degenerate frontal point;
//! - `m = 2`: fold;
//! - `rank(∇γ, ∇²γ, ∇³γ) = 3`: cuspidal edge (any `m ≥ 3`);
//! - `m = 3` and `rank(∇γ, ∇²γ, ∇⁴γ) = 3`: folded umbrella;
//! - otherwise the characteristic function degenerates and the point is
//!   reported as such, with ψ and ψ' recorded as evidence.

use serde::Serialize;
use thiserror::Error;

use crate::curve::{CurveError, CurveSpec, JetEngine, DEFAULT_RANK_TOL};
use crate::geodesic::{
    integrate_geodesic_path, GeodesicError, IntegrateOptions,
};
use crate::geometry::{ConnectionField, GeometryError};
use crate::linalg::numerical_rank;

/// One patch row: positions and velocities per s sample.
type PatchRow = (Vec<Vec<f64>>, Vec<Vec<f64>>);

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("(∇γ, ∇²γ) degenerate at t = {t}: the frontal frame needs rank 2")]
    NotNondegenerate { t: f64 },
    #[error("frame wedge V1 ∧ V2 vanishes at (t, s) = ({t}, {s})")]
    FrameDegenerate { t: f64, s: f64 },
    #[error("grid must be strictly increasing")]
    GridNotIncreasing,
}

/// Numerical controls for surface construction.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceConfig {
    /// Local tolerance for geodesic integrations behind frames and σ. The
    /// t-derivative is a finite difference, so endpoint errors are divided
    /// by `2 fd_step_t`; keep this tight.
    pub ode_tol: f64,
    /// Step for ∂f/∂t at point queries.
    pub fd_step_t: f64,
    /// Below this |s| the frame vector F blends linearly into its limit
    /// value (∇²γ)(t).
    pub s_blend: f64,
    /// Relative tolerance for rank decisions.
    pub rank_tol: f64,
    /// ψ' central-difference step is this factor times max(1, |t0|).
    pub psi_step: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            ode_tol: 1e-12,
            fd_step_t: 1e-5,
            s_blend: 1e-3,
            rank_tol: DEFAULT_RANK_TOL,
            psi_step: 1e-4,
        }
    }
}

/// The frontal frame at one point of the surface.
#[derive(Debug, Clone)]
pub struct Frame {
    /// `V1 = ∂f/∂t`.
    pub v1: Vec<f64>,
    /// `V2 = F`, the extended frame vector.
    pub v2: Vec<f64>,
    /// `∂f/∂s`, from the integrator's velocity output.
    pub fs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CharVectorMode {
    /// The full formula in Γ, its first partials and the raw derivatives.
    General,
    /// `(∇³γ)(t)` from the covariant jet; equals the general value when the
    /// connection is torsion free.
    TorsionFree,
}

/// The characteristic function at one parameter, with the coframe that
/// produced it.
#[derive(Debug, Clone)]
pub struct PsiValue {
    /// One pairing per coframe covector (length m − 2).
    pub components: Vec<f64>,
    /// For m = 3: the pairing against the unnormalized cross product
    /// `∇γ × ∇²γ`, a canonical scale for scanning.
    pub canonical: Option<f64>,
    /// The orthonormal annihilator rows used for `components`.
    pub coframe: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SingularityStatus {
    CuspidalEdge,
    FoldedUmbrella,
    Fold,
    NotNondegenerate,
    DegenerateCharacteristic,
    Incomplete,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankDiagnostics {
    pub r12: Option<usize>,
    pub r123: Option<usize>,
    pub r124: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularValueDiagnostics {
    pub s12: Option<Vec<f64>>,
    pub s123: Option<Vec<f64>>,
    pub s124: Option<Vec<f64>>,
}

/// Classification verdict at a parameter value plus the evidence that
/// produced it.
#[derive(Debug, Clone, Serialize)]
pub struct SingularityReport {
    pub status: SingularityStatus,
    pub t0: f64,
    pub ranks: RankDiagnostics,
    pub singular_values: SingularValueDiagnostics,
    /// ψ(t0) against the propagated orthonormal coframe (length m − 2).
    pub psi: Option<Vec<f64>>,
    /// For m = 3, ψ against the cross-product coframe.
    pub psi_canonical: Option<f64>,
    /// Central-difference ψ'(t0), recorded when ψ(t0) ≈ 0.
    pub psi_prime: Option<Vec<f64>>,
    /// ψ'(t0) via the reduction ⟨ℓᵢ(t0), (∇⁴γ)(t0)⟩.
    pub psi_prime_jet: Option<Vec<f64>>,
    /// Relative disagreement between the two ψ' routes.
    pub psi_prime_discrepancy: Option<f64>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A sampled grid of the surface with per-sample frame data and σ.
#[derive(Debug, Clone)]
pub struct SurfacePatch {
    pub t_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    /// `points[i][j]` is `f(t_grid[i], s_grid[j])`.
    pub points: Vec<Vec<Vec<f64>>>,
    pub frames: Vec<Vec<Frame>>,
    pub sigma: Vec<Vec<f64>>,
}

/// Result of scanning an interval: every sample report plus the refined
/// ψ zero crossings found between samples.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub sample_t: Vec<f64>,
    pub reports: Vec<SingularityReport>,
    pub zeros: Vec<RefinedZero>,
}

#[derive(Debug, Clone)]
pub struct RefinedZero {
    pub t: f64,
    pub report: SingularityReport,
}

/// A tangent surface bound to one (connection, curve) pair, with the jet
/// expressions cached for repeated queries.
pub struct TangentSurface {
    engine: JetEngine,
    cfg: SurfaceConfig,
}

impl TangentSurface {
    pub fn new(
        conn: ConnectionField,
        curve: CurveSpec,
        cfg: SurfaceConfig,
    ) -> Result<Self, SurfaceError> {
        Ok(TangentSurface { engine: JetEngine::new(conn, curve)?, cfg })
    }

    pub fn config(&self) -> &SurfaceConfig {
        &self.cfg
    }

    pub fn connection(&self) -> &ConnectionField {
        self.engine.connection()
    }

    pub fn curve(&self) -> &CurveSpec {
        self.engine.curve()
    }

    fn dim(&self) -> usize {
        self.engine.curve().dim()
    }

    fn opts(&self) -> IntegrateOptions {
        IntegrateOptions::with_tol(self.cfg.ode_tol)
    }

    fn curve_data(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>), SurfaceError> {
        let jet = self.engine.jet(t, 1)?;
        Ok((jet.raw_deriv(0).to_vec(), jet.raw_deriv(1).to_vec()))
    }

    /// `f(t, s)`.
    pub fn point(&self, t: f64, s: f64) -> Result<Vec<f64>, SurfaceError> {
        let (x, v) = self.curve_data(t)?;
        if s == 0.0 {
            return Ok(x);
        }
        let path = integrate_geodesic_path(self.connection(), &x, &v, s, self.opts())?;
        Ok(path.sample(s).pos)
    }

    /// `f(t, s)` together with `∂f/∂s(t, s)`.
    pub fn point_and_velocity(&self, t: f64, s: f64) -> Result<(Vec<f64>, Vec<f64>), SurfaceError> {
        let (x, v) = self.curve_data(t)?;
        if s == 0.0 {
            return Ok((x, v));
        }
        let path = integrate_geodesic_path(self.connection(), &x, &v, s, self.opts())?;
        let state = path.sample(s);
        Ok((state.pos, state.vel))
    }

    /// The frontal frame `(V1, V2)` at `(t, s)`, with `∂f/∂t` from a
    /// central difference of step `fd_step_t` and `V2` from the quotient
    /// `(∂f/∂t − ∂f/∂s)/s`, blended into `(∇²γ)(t)` below `s_blend`.
    pub fn frame(&self, t: f64, s: f64) -> Result<Frame, SurfaceError> {
        let d = self.cfg.fd_step_t;
        let fp = self.point(t + d, s)?;
        let fm = self.point(t - d, s)?;
        let v1: Vec<f64> = fp
            .iter()
            .zip(fm.iter())
            .map(|(a, b)| (a - b) / (2.0 * d))
            .collect();
        let (_, fs) = self.point_and_velocity(t, s)?;
        let v2 = self.extended_f(t, s, &v1, &fs)?;
        Ok(Frame { v1, v2, fs })
    }

    fn extended_f(
        &self,
        t: f64,
        s: f64,
        v1: &[f64],
        fs: &[f64],
    ) -> Result<Vec<f64>, SurfaceError> {
        let quotient = |v1: &[f64], fs: &[f64]| -> Vec<f64> {
            v1.iter().zip(fs.iter()).map(|(a, b)| (a - b) / s).collect()
        };
        if s.abs() >= self.cfg.s_blend {
            return Ok(quotient(v1, fs));
        }
        let limit = self.engine.jet(t, 2)?.nabla(2).to_vec();
        if s == 0.0 {
            return Ok(limit);
        }
        let w = s.abs() / self.cfg.s_blend;
        let q = quotient(v1, fs);
        Ok(q.iter()
            .zip(limit.iter())
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect())
    }

    /// The signed area density σ with `f_t ∧ f_s = σ · V1 ∧ V2`, as the
    /// least-squares ratio over all wedge components.
    pub fn sigma(&self, t: f64, s: f64) -> Result<f64, SurfaceError> {
        if s == 0.0 {
            return Ok(0.0);
        }
        let frame = self.frame(t, s)?;
        let wf = wedge(&frame.v1, &frame.fs);
        let wv = wedge(&frame.v1, &frame.v2);
        let denom: f64 = wv.iter().map(|v| v * v).sum();
        let scale = norm(&frame.v1) * norm(&frame.v2);
        if denom.sqrt() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(SurfaceError::FrameDegenerate { t, s });
        }
        let numer: f64 = wf.iter().zip(wv.iter()).map(|(a, b)| a * b).sum();
        Ok(numer / denom)
    }

    /// The characteristic vector field `(∇_η^f F)(t, 0)` along the curve.
    pub fn characteristic_vector(
        &self,
        t: f64,
        mode: CharVectorMode,
    ) -> Result<Vec<f64>, SurfaceError> {
        match mode {
            CharVectorMode::TorsionFree => Ok(self.engine.jet(t, 3)?.nabla(3).to_vec()),
            CharVectorMode::General => {
                let m = self.dim();
                let jet = self.engine.jet(t, 1)?;
                let x = jet.raw_deriv(0).to_vec();
                let raw = {
                    // raw derivatives up to third order
                    let j3 = self.engine.jet(t, 3)?;
                    [
                        j3.raw_deriv(1).to_vec(),
                        j3.raw_deriv(2).to_vec(),
                        j3.raw_deriv(3).to_vec(),
                    ]
                };
                let gamma = self.connection().christoffel_at(&x)?;
                let dgamma = self.connection().christoffel_partials(&x)?;
                let (v, acc2, acc3) = (&raw[0], &raw[1], &raw[2]);
                let mut out = acc3.clone();
                for (l, o) in out.iter_mut().enumerate() {
                    for mu in 0..m {
                        for nu in 0..m {
                            for ka in 0..m {
                                let mut c = dgamma.get(l, mu, nu, ka);
                                for r in 0..m {
                                    c += 0.5 * gamma.get(l, r, mu) * gamma.get(r, nu, ka);
                                    c += 0.5 * gamma.get(l, mu, r) * gamma.get(r, nu, ka);
                                }
                                *o += c * v[mu] * v[nu] * v[ka];
                            }
                            *o += 1.5
                                * (gamma.get(l, mu, nu) + gamma.get(l, nu, mu))
                                * v[mu]
                                * acc2[nu];
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// The characteristic function at `t` with a freshly built orthonormal
    /// coframe (use [`CoframeTracker`] for continuity along a scan).
    pub fn psi(&self, t: f64) -> Result<PsiValue, SurfaceError> {
        let mut tracker = CoframeTracker::new();
        self.psi_tracked(t, &mut tracker)
    }

    fn psi_tracked(
        &self,
        t: f64,
        tracker: &mut CoframeTracker,
    ) -> Result<PsiValue, SurfaceError> {
        let jet = self.engine.jet(t, 2)?;
        let n1 = jet.nabla(1);
        let n2 = jet.nabla(2);
        let r12 = numerical_rank(&[n1.to_vec(), n2.to_vec()], self.cfg.rank_tol);
        if r12.rank < 2 {
            return Err(SurfaceError::NotNondegenerate { t });
        }
        let coframe = tracker.coframe_at(n1, n2, t)?;
        let cvec = self.characteristic_vector(t, CharVectorMode::General)?;
        let components: Vec<f64> = coframe.iter().map(|l| dot(l, &cvec)).collect();
        let canonical = (self.dim() == 3).then(|| dot(&cross3(n1, n2), &cvec));
        Ok(PsiValue { components, canonical, coframe })
    }

    /// Canonical ψ for m = 3 (`⟨∇γ × ∇²γ, characteristic vector⟩`), without
    /// any coframe bookkeeping. Returns the rank-2 precondition failure as
    /// an error.
    fn psi_canonical(&self, t: f64) -> Result<f64, SurfaceError> {
        let jet = self.engine.jet(t, 2)?;
        let cvec = self.characteristic_vector(t, CharVectorMode::General)?;
        Ok(dot(&cross3(jet.nabla(1), jet.nabla(2)), &cvec))
    }

    /// Classify the singular point `(t0, 0)`; every outcome (including
    /// computational failure) is a status, never an error.
    pub fn classify(&self, t0: f64, tol: f64) -> SingularityReport {
        match self.classify_inner(t0, tol) {
            Ok(report) => report,
            Err(err) => SingularityReport {
                status: SingularityStatus::Incomplete,
                t0,
                ranks: RankDiagnostics { r12: None, r123: None, r124: None },
                singular_values: SingularValueDiagnostics { s12: None, s123: None, s124: None },
                psi: None,
                psi_canonical: None,
                psi_prime: None,
                psi_prime_jet: None,
                psi_prime_discrepancy: None,
                tolerance: tol,
                note: Some(format!("classification aborted: {err}")),
            },
        }
    }

    fn classify_inner(&self, t0: f64, tol: f64) -> Result<SingularityReport, SurfaceError> {
        let m = self.dim();
        let mut note = None;
        // order 4 when available; metric-backed connections stop at 3
        let (jet, max_order) = match self.engine.jet(t0, 4) {
            Ok(j) => (j, 4),
            Err(CurveError::OrderNeedsSymbolic { .. }) => (self.engine.jet(t0, 3)?, 3),
            Err(e) => return Err(e.into()),
        };
        let n1 = jet.nabla(1).to_vec();
        let n2 = jet.nabla(2).to_vec();
        let r12 = numerical_rank(&[n1.clone(), n2.clone()], tol);

        let mut report = SingularityReport {
            status: SingularityStatus::Incomplete,
            t0,
            ranks: RankDiagnostics { r12: Some(r12.rank), r123: None, r124: None },
            singular_values: SingularValueDiagnostics {
                s12: Some(r12.singular_values.clone()),
                s123: None,
                s124: None,
            },
            psi: None,
            psi_canonical: None,
            psi_prime: None,
            psi_prime_jet: None,
            psi_prime_discrepancy: None,
            tolerance: tol,
            note: None,
        };

        if r12.rank < 2 {
            report.status = SingularityStatus::NotNondegenerate;
            return Ok(report);
        }
        if m == 2 {
            report.status = SingularityStatus::Fold;
            return Ok(report);
        }

        let n3 = jet.nabla(3).to_vec();
        let r123 = numerical_rank(&[n1.clone(), n2.clone(), n3.clone()], tol);
        report.ranks.r123 = Some(r123.rank);
        report.singular_values.s123 = Some(r123.singular_values.clone());

        // ψ diagnostics (general-mode characteristic vector)
        let mut tracker = CoframeTracker::new();
        if let Ok(psi) = self.psi_tracked(t0, &mut tracker) {
            report.psi = Some(psi.components.clone());
            report.psi_canonical = psi.canonical;
        }

        if r123.rank == 3 {
            report.status = SingularityStatus::CuspidalEdge;
            return Ok(report);
        }

        if max_order >= 4 {
            let n4 = jet.nabla(4).to_vec();
            let r124 = numerical_rank(&[n1.clone(), n2.clone(), n4.clone()], tol);
            report.ranks.r124 = Some(r124.rank);
            report.singular_values.s124 = Some(r124.singular_values.clone());

            // ψ'(t0): central difference with a coframe propagated through
            // t0, cross-checked against ⟨ℓ(t0), (∇⁴γ)(t0)⟩.
            let d = self.cfg.psi_step * t0.abs().max(1.0);
            let mut tracker = CoframeTracker::new();
            let before = self.psi_tracked(t0 - d, &mut tracker);
            let at = self.psi_tracked(t0, &mut tracker);
            let after = self.psi_tracked(t0 + d, &mut tracker);
            if let (Ok(before), Ok(at), Ok(after)) = (before, at, after) {
                let cd: Vec<f64> = after
                    .components
                    .iter()
                    .zip(before.components.iter())
                    .map(|(a, b)| (a - b) / (2.0 * d))
                    .collect();
                let jet_route: Vec<f64> =
                    at.coframe.iter().map(|l| dot(l, &n4)).collect();
                let num = cd
                    .iter()
                    .zip(jet_route.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                let den = jet_route
                    .iter()
                    .map(|v| v.abs())
                    .fold(0.0f64, f64::max)
                    .max(1e-12);
                report.psi_prime = Some(cd);
                report.psi_prime_jet = Some(jet_route);
                report.psi_prime_discrepancy = Some(num / den);
                if num / den > 1e-4 && den > 1e-6 {
                    note = Some(format!(
                        "psi' routes disagree by {:.3e} relative",
                        num / den
                    ));
                }
            }

            if m == 3 && r124.rank == 3 {
                report.status = SingularityStatus::FoldedUmbrella;
                report.note = note;
                return Ok(report);
            }
        } else {
            note = Some("jet order 4 unavailable for this connection; folded-umbrella test skipped".to_string());
        }

        report.status = SingularityStatus::DegenerateCharacteristic;
        report.note = note;
        Ok(report)
    }

    /// Classify `n` uniform samples of `[a, b]` and refine the zeros of the
    /// canonical ψ between samples (m = 3 only) by bisection.
    pub fn scan(&self, a: f64, b: f64, n: usize, tol: f64) -> Result<ScanResult, SurfaceError> {
        assert!(n >= 2, "scan needs at least two samples");
        let m = self.dim();
        let sample_t: Vec<f64> = (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect();
        let reports: Vec<SingularityReport> =
            sample_t.iter().map(|&t| self.classify(t, tol)).collect();

        let mut zeros = Vec::new();
        if m == 3 {
            let psi: Vec<Option<f64>> = sample_t
                .iter()
                .map(|&t| self.psi_canonical(t).ok())
                .collect();
            let max_abs = psi
                .iter()
                .flatten()
                .fold(0.0f64, |acc, &v| acc.max(v.abs()));
            let floor = 1e-10 * max_abs.max(1.0);

            for i in 0..n - 1 {
                let (pa, pb) = match (psi[i], psi[i + 1]) {
                    (Some(x), Some(y)) => (x, y),
                    _ => continue,
                };
                if pa.abs() > floor && pb.abs() > floor && pa * pb < 0.0 {
                    if let Some(t) = self.bisect_psi(sample_t[i], sample_t[i + 1], pa)? {
                        zeros.push(RefinedZero { t, report: self.classify(t, tol) });
                    }
                } else if pa.abs() <= floor
                    && i > 0
                    && psi[i - 1].is_some_and(|p| p.abs() > floor)
                    && pb.abs() > floor
                    && psi[i - 1].unwrap() * pb < 0.0
                {
                    // an exactly-zero sample flanked by a sign change
                    let t = sample_t[i];
                    zeros.push(RefinedZero { t, report: self.classify(t, tol) });
                }
            }
        }
        Ok(ScanResult { sample_t, reports, zeros })
    }

    fn bisect_psi(&self, mut lo: f64, mut hi: f64, psi_lo: f64) -> Result<Option<f64>, SurfaceError> {
        let sign_lo = psi_lo.signum();
        for _ in 0..200 {
            if (hi - lo).abs() <= 1e-10 {
                return Ok(Some(0.5 * (lo + hi)));
            }
            let mid = 0.5 * (lo + hi);
            let pm = self.psi_canonical(mid)?;
            if pm == 0.0 {
                return Ok(Some(mid));
            }
            if pm.signum() == sign_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }

    /// Sample the surface over the product grid, with frames and σ. Rows
    /// are built in parallel; each row reuses one dense geodesic path per
    /// sign of s.
    pub fn patch(&self, t_grid: &[f64], s_grid: &[f64]) -> Result<SurfacePatch, SurfaceError> {
        use rayon::prelude::*;
        if !strictly_increasing(t_grid) || !strictly_increasing(s_grid) {
            return Err(SurfaceError::GridNotIncreasing);
        }
        let conn = self.connection();
        let opts = self.opts();
        let s_max = s_grid.last().cloned().unwrap_or(0.0).max(0.0);
        let s_min = s_grid.first().cloned().unwrap_or(0.0).min(0.0);

        // positions and velocities row by row
        let rows: Result<Vec<PatchRow>, SurfaceError> = t_grid
            .par_iter()
            .map(|&t| {
                let (x, v) = self.curve_data(t)?;
                let fwd = if s_max > 0.0 {
                    Some(integrate_geodesic_path(conn, &x, &v, s_max, opts)?)
                } else {
                    None
                };
                let bwd = if s_min < 0.0 {
                    Some(integrate_geodesic_path(conn, &x, &v, s_min, opts)?)
                } else {
                    None
                };
                let mut pos_row = Vec::with_capacity(s_grid.len());
                let mut vel_row = Vec::with_capacity(s_grid.len());
                for &s in s_grid {
                    let state = if s == 0.0 {
                        crate::geodesic::GeodesicState { s, pos: x.clone(), vel: v.clone() }
                    } else if s > 0.0 {
                        fwd.as_ref().unwrap().sample(s)
                    } else {
                        bwd.as_ref().unwrap().sample(s)
                    };
                    pos_row.push(state.pos);
                    vel_row.push(state.vel);
                }
                Ok((pos_row, vel_row))
            })
            .collect();
        let rows = rows?;
        let points: Vec<Vec<Vec<f64>>> = rows.iter().map(|(p, _)| p.clone()).collect();

        let nt = t_grid.len();
        let ns = s_grid.len();
        let mut frames = Vec::with_capacity(nt);
        let mut sigma = Vec::with_capacity(nt);
        for i in 0..nt {
            let mut frame_row = Vec::with_capacity(ns);
            let mut sigma_row = Vec::with_capacity(ns);
            for j in 0..ns {
                let s = s_grid[j];
                // ∂f/∂t by central differences over the grid (one-sided at
                // the boundary rows)
                let (i0, i1) = if i == 0 {
                    (i, i + 1)
                } else if i == nt - 1 {
                    (i - 1, i)
                } else {
                    (i - 1, i + 1)
                };
                let dt = t_grid[i1] - t_grid[i0];
                let v1: Vec<f64> = points[i1][j]
                    .iter()
                    .zip(points[i0][j].iter())
                    .map(|(a, b)| (a - b) / dt)
                    .collect();
                let fs = rows[i].1[j].clone();
                let v2 = self.extended_f(t_grid[i], s, &v1, &fs)?;
                let sg = if s == 0.0 {
                    0.0
                } else {
                    let wf = wedge(&v1, &fs);
                    let wv = wedge(&v1, &v2);
                    let denom: f64 = wv.iter().map(|v| v * v).sum();
                    if denom == 0.0 {
                        f64::NAN
                    } else {
                        wf.iter().zip(wv.iter()).map(|(a, b)| a * b).sum::<f64>() / denom
                    }
                };
                frame_row.push(Frame { v1, v2, fs });
                sigma_row.push(sg);
            }
            frames.push(frame_row);
            sigma.push(sigma_row);
        }
        Ok(SurfacePatch {
            t_grid: t_grid.to_vec(),
            s_grid: s_grid.to_vec(),
            points,
            frames,
            sigma,
        })
    }
}

/// Maintains a smoothly varying orthonormal annihilator of
/// `span{∇γ, ∇²γ}` along a parameter sweep by projecting the previous
/// basis onto the new complement and re-orthonormalizing.
pub struct CoframeTracker {
    prev: Option<Vec<Vec<f64>>>,
}

impl Default for CoframeTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl CoframeTracker {
    pub fn new() -> Self {
        CoframeTracker { prev: None }
    }

    fn coframe_at(
        &mut self,
        n1: &[f64],
        n2: &[f64],
        t: f64,
    ) -> Result<Vec<Vec<f64>>, SurfaceError> {
        let m = n1.len();
        // orthonormal basis of the span
        let q1 = normalize(n1).ok_or(SurfaceError::NotNondegenerate { t })?;
        let mut w2: Vec<f64> = n2.to_vec();
        let c = dot(&w2, &q1);
        for (wi, qi) in w2.iter_mut().zip(q1.iter()) {
            *wi -= c * qi;
        }
        let q2 = normalize(&w2).ok_or(SurfaceError::NotNondegenerate { t })?;

        let project = |v: &[f64]| -> Vec<f64> {
            let c1 = dot(v, &q1);
            let c2 = dot(v, &q2);
            v.iter()
                .zip(q1.iter().zip(q2.iter()))
                .map(|(vi, (a, b))| vi - c1 * a - c2 * b)
                .collect()
        };

        // candidates: previous basis first (for continuity), then the
        // standard basis to fill any gap
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        if let Some(prev) = &self.prev {
            candidates.extend(prev.iter().cloned());
        }
        for k in 0..m {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            candidates.push(e);
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m - 2);
        for cand in candidates {
            if basis.len() == m - 2 {
                break;
            }
            let mut w = project(&cand);
            for b in &basis {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b.iter()) {
                    *wi -= c * bi;
                }
            }
            if let Some(u) = normalize_with_floor(&w, 1e-6) {
                basis.push(u);
            }
        }
        debug_assert_eq!(basis.len(), m - 2);
        self.prev = Some(basis.clone());
        Ok(basis)
    }
}

fn strictly_increasing(g: &[f64]) -> bool {
    g.windows(2).all(|w| w[0] < w[1])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &[f64]) -> Option<Vec<f64>> {
    normalize_with_floor(a, 0.0)
}

fn normalize_with_floor(a: &[f64], floor: f64) -> Option<Vec<f64>> {
    let n = norm(a);
    if n <= floor || n == 0.0 {
        return None;
    }
    Some(a.iter().map(|v| v / n).collect())
}

/// All 2-form components `u[i] v[j] − u[j] v[i]` for `i < j`.
fn wedge(u: &[f64], v: &[f64]) -> Vec<f64> {
    let m = u.len();
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            out.push(u[i] * v[j] - u[j] * v[i]);
        }
    }
    out
}

fn cross3(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

// ---- free-function mirrors of the surface operations --------------------

pub fn tan_surface_point(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t: f64,
    s: f64,
) -> Result<Vec<f64>, SurfaceError> {
    TangentSurface::new(conn.clone(), curve.clone(), SurfaceConfig::default())?.point(t, s)
}

pub fn frontal_frame(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t: f64,
    s: f64,
) -> Result<Frame, SurfaceError> {
    TangentSurface::new(conn.clone(), curve.clone(), SurfaceConfig::default())?.frame(t, s)
}

pub fn s_function(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t: f64,
    s: f64,
) -> Result<f64, SurfaceError> {
    TangentSurface::new(conn.clone(), curve.clone(), SurfaceConfig::default())?.sigma(t, s)
}

pub fn characteristic_vector(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t: f64,
    mode: CharVectorMode,
) -> Result<Vec<f64>, SurfaceError> {
    TangentSurface::new(conn.clone(), curve.clone(), SurfaceConfig::default())?
        .characteristic_vector(t, mode)
}

pub fn characteristic_psi(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t: f64,
) -> Result<PsiValue, SurfaceError> {
    TangentSurface::new(conn.clone(), curve.clone(), SurfaceConfig::default())?.psi(t)
}

pub fn classify_point(
    conn: &ConnectionField,
    curve: &CurveSpec,
    t0: f64,
    tol: f64,
) -> SingularityReport {
    match TangentSurface::new(conn.clone(), curve.clone(), SurfaceConfig::default()) {
        Ok(ts) => ts.classify(t0, tol),
        Err(err) => SingularityReport {
            status: SingularityStatus::Incomplete,
            t0,
            ranks: RankDiagnostics { r12: None, r123: None, r124: None },
            singular_values: SingularValueDiagnostics { s12: None, s123: None, s124: None },
            psi: None,
            psi_canonical: None,
            psi_prime: None,
            psi_prime_jet: None,
            psi_prime_discrepancy: None,
            tolerance: tol,
            note: Some(format!("setup failed: {err}")),
        },
    }
}

pub fn scan_interval(
    conn: &ConnectionField,
    curve: &CurveSpec,
    a: f64,
    b: f64,
    n: usize,
    tol: f64,
) -> Result<ScanResult, SurfaceError> {
    TangentSurface::new(conn.clone(), curve.clone(), SurfaceConfig::default())?.scan(a, b, n, tol)
}
