//! Numerical integration of the geodesic equation
//! `φ''^λ + Γ^λ_{μν}(φ) φ'^μ φ'^ν = 0`.
//!
//! The stepper is an embedded Dormand–Prince 5(4) pair on the first-order
//! system `(pos, vel)`, with the classical fourth-order dense output
//! polynomial between accepted steps. Integrations are self-contained; grid
//! code runs many of them concurrently.

use thiserror::Error;

use crate::geometry::{ConnectionField, GeometryError};

#[derive(Debug, Error)]
pub enum GeodesicError {
    #[error("step size underflow at s = {s_reached} (target {s_target})")]
    StepSizeUnderflow { s_reached: f64, s_target: f64 },
    #[error("state became non-finite at s = {s}")]
    NonFinite { s: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Position and velocity of a geodesic at parameter `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub s: f64,
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
}

/// Integrator controls. `tol` is the local error tolerance per accepted
/// step (weighted, absolute and relative alike).
#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub tol: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { tol: 1e-9, h_min: 1e-8, h_max: 0.1 }
    }
}

impl IntegrateOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegrateOptions { tol, ..Default::default() }
    }
}

// Dormand–Prince 5(4) tableau. The geodesic system is autonomous, so the
// node abscissae are not needed.
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
// Coefficients of the fourth-order continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

struct Rhs<'a> {
    conn: &'a ConnectionField,
    dim: usize,
}

impl Rhs<'_> {
    /// y = (pos, vel); y' = (vel, -Γ(pos) vel vel)
    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<(), GeodesicError> {
        let m = self.dim;
        let (pos, vel) = y.split_at(m);
        out[..m].copy_from_slice(vel);
        if self.conn.is_symbolic() {
            for o in out[m..].iter_mut() {
                *o = 0.0;
            }
            for &(l, mu, nu, ref e) in self.conn.nonzero_entries() {
                let g = e.eval_x(pos).map_err(|source| GeometryError::ChristoffelEval {
                    lam: l + 1,
                    mu: mu + 1,
                    nu: nu + 1,
                    source,
                })?;
                out[m + l] -= g * vel[mu] * vel[nu];
            }
        } else {
            let gamma = self.conn.christoffel_at(pos)?;
            for l in 0..m {
                let mut acc = 0.0;
                for mu in 0..m {
                    for nu in 0..m {
                        acc += gamma.get(l, mu, nu) * vel[mu] * vel[nu];
                    }
                }
                out[m + l] = -acc;
            }
        }
        Ok(())
    }
}

/// One accepted step with everything needed for dense output on
/// `[s0, s0 + h]`.
#[derive(Debug, Clone)]
struct AcceptedStep {
    s0: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
}

impl AcceptedStep {
    fn sample(&self, s: f64, out: &mut [f64]) {
        let th = (s - self.s0) / self.h;
        let th1 = 1.0 - th;
        #[allow(clippy::needless_range_loop)]
        for i in 0..out.len() {
            out[i] = self.rcont[0][i]
                + th
                    * (self.rcont[1][i]
                        + th1
                            * (self.rcont[2][i]
                                + th * (self.rcont[3][i] + th1 * self.rcont[4][i])));
        }
    }

    /// d/ds of the dense polynomial.
    fn sample_derivative(&self, s: f64, out: &mut [f64]) {
        let th = (s - self.s0) / self.h;
        #[allow(clippy::needless_range_loop)]
        for i in 0..out.len() {
            let (r1, r2, r3, r4) = (
                self.rcont[1][i],
                self.rcont[2][i],
                self.rcont[3][i],
                self.rcont[4][i],
            );
            // u(θ) = r0 + θ r1 + θ(1-θ) r2 + θ²(1-θ) r3 + θ²(1-θ)² r4
            let du = r1
                + (1.0 - 2.0 * th) * r2
                + (2.0 * th - 3.0 * th * th) * r3
                + (2.0 * th - 6.0 * th * th + 4.0 * th * th * th) * r4;
            out[i] = du / self.h;
        }
    }
}

/// A fully integrated geodesic with dense output over `[0, s_target]`
/// (or `[s_target, 0]` for negative targets).
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    dim: usize,
    s_end: f64,
    initial: Vec<f64>,
    steps: Vec<AcceptedStep>,
}

impl GeodesicPath {
    pub fn s_end(&self) -> f64 {
        self.s_end
    }

    /// State at any `s` between 0 and the integration target.
    pub fn sample(&self, s: f64) -> GeodesicState {
        let m = self.dim;
        let mut y = vec![0.0; 2 * m];
        if self.steps.is_empty() || s == 0.0 {
            y.copy_from_slice(&self.initial);
        } else {
            let step = self.locate(s);
            step.sample(s, &mut y);
        }
        GeodesicState { s, pos: y[..m].to_vec(), vel: y[m..].to_vec() }
    }

    /// State plus the s-derivative of the dense interpolant (that is, an
    /// approximation of `(φ', φ'')`).
    pub fn sample_with_derivative(&self, s: f64) -> (GeodesicState, Vec<f64>, Vec<f64>) {
        let m = self.dim;
        let state = self.sample(s);
        let mut dy = vec![0.0; 2 * m];
        if !self.steps.is_empty() {
            self.locate(s).sample_derivative(s, &mut dy);
        }
        (state, dy[..m].to_vec(), dy[m..].to_vec())
    }

    fn locate(&self, s: f64) -> &AcceptedStep {
        let forward = self.s_end >= 0.0;
        for step in &self.steps {
            let (lo, hi) = if forward {
                (step.s0, step.s0 + step.h)
            } else {
                (step.s0 + step.h, step.s0)
            };
            if s >= lo - 1e-14 && s <= hi + 1e-14 {
                return step;
            }
        }
        self.steps.last().unwrap()
    }
}

/// Integrate the geodesic from `(x, v)` with dense output retained.
pub fn integrate_geodesic_path(
    conn: &ConnectionField,
    x: &[f64],
    v: &[f64],
    s_target: f64,
    opts: IntegrateOptions,
) -> Result<GeodesicPath, GeodesicError> {
    let m = conn.dim();
    assert_eq!(x.len(), m, "initial point has wrong dimension");
    assert_eq!(v.len(), m, "initial velocity has wrong dimension");
    let rhs = Rhs { conn, dim: m };
    let n = 2 * m;
    let mut y: Vec<f64> = x.iter().chain(v.iter()).cloned().collect();
    let initial = y.clone();

    let mut path = GeodesicPath { dim: m, s_end: s_target, initial, steps: Vec::new() };
    if s_target == 0.0 {
        return Ok(path);
    }
    let dir = s_target.signum();

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    rhs.eval(&y, &mut k[0])?;

    let mut s = 0.0f64;
    let mut h = (opts.h_max * 0.1).min(s_target.abs()) * dir;
    let mut ytmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    while (s_target - s) * dir > 1e-15 {
        if h.abs() > (s_target - s).abs() {
            h = s_target - s;
        }
        // stages 2..7 (k[0] is FSAL from the previous step)
        for stage in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    let a = A[stage][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                ytmp[i] = y[i] + h * acc;
            }
            rhs.eval(&ytmp, &mut k[stage])?;
        }
        // 5th-order solution and embedded error
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut y5 = 0.0;
            let mut y4 = 0.0;
            for j in 0..7 {
                y5 += B5[j] * k[j][i];
                y4 += B4[j] * k[j][i];
            }
            y_new[i] = y[i] + h * y5;
            let sc = opts.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            let e = h * (y5 - y4);
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Err(GeodesicError::NonFinite { s });
        }

        if err <= 1.0 {
            // dense output coefficients for this step
            let ydiff: Vec<f64> = (0..n).map(|i| y_new[i] - y[i]).collect();
            let bspl: Vec<f64> = (0..n).map(|i| h * k[0][i] - ydiff[i]).collect();
            let r5: Vec<f64> = (0..n)
                .map(|i| {
                    let mut acc = 0.0;
                    for j in 0..7 {
                        if D[j] != 0.0 {
                            acc += D[j] * k[j][i];
                        }
                    }
                    h * acc
                })
                .collect();
            let r4: Vec<f64> = (0..n)
                .map(|i| ydiff[i] - h * k[6][i] - bspl[i])
                .collect();
            path.steps.push(AcceptedStep {
                s0: s,
                h,
                rcont: [y.clone(), ydiff, bspl, r4, r5],
            });

            s += h;
            y.copy_from_slice(&y_new);
            k[0] = k[6].clone(); // FSAL

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h.abs() * factor).clamp(opts.h_min, opts.h_max) * dir;
        } else {
            let factor = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            let new_h = h.abs() * factor;
            if new_h < opts.h_min * (1.0 + 1e-12) && new_h < (s_target - s).abs() {
                return Err(GeodesicError::StepSizeUnderflow { s_reached: s, s_target });
            }
            h = new_h.max(opts.h_min) * dir;
        }
    }
    path.s_end = s;
    Ok(path)
}

/// Endpoint state of the geodesic from `(x, v)` at parameter `s_target`.
pub fn integrate_geodesic(
    conn: &ConnectionField,
    x: &[f64],
    v: &[f64],
    s_target: f64,
    opts: IntegrateOptions,
) -> Result<GeodesicState, GeodesicError> {
    let path = integrate_geodesic_path(conn, x, v, s_target, opts)?;
    Ok(path.sample(s_target))
}

/// Fixed-step integration (no error control) used where a smooth dependence
/// of the result on the initial data matters more than adaptivity, e.g.
/// inside finite-difference stencils.
pub fn integrate_geodesic_fixed(
    conn: &ConnectionField,
    x: &[f64],
    v: &[f64],
    s_target: f64,
    n_steps: usize,
) -> Result<GeodesicState, GeodesicError> {
    let m = conn.dim();
    let rhs = Rhs { conn, dim: m };
    let n = 2 * m;
    let mut y: Vec<f64> = x.iter().chain(v.iter()).cloned().collect();
    if s_target == 0.0 {
        return Ok(GeodesicState { s: 0.0, pos: x.to_vec(), vel: v.to_vec() });
    }
    let h = s_target / n_steps as f64;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut s = 0.0;
    for _ in 0..n_steps {
        rhs.eval(&y, &mut k[0])?;
        for stage in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += A[stage][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            rhs.eval(&ytmp, &mut k[stage])?;
        }
        for i in 0..n {
            let mut y5 = 0.0;
            for j in 0..7 {
                y5 += B5[j] * k[j][i];
            }
            y[i] += h * y5;
        }
        s += h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GeodesicError::NonFinite { s });
        }
    }
    Ok(GeodesicState { s: s_target, pos: y[..m].to_vec(), vel: y[m..].to_vec() })
}

/// Below this |s| the Taylor remainder is evaluated from its series at
/// s = 0 instead of the 1/s² extraction, which would amplify integrator
/// noise quadratically.
pub const H_SERIES_SWITCH: f64 = 1e-3;

/// The remainder `h(x, v, s)` of the expansion
/// `φ(x, v, s) = x + s v + ½ s² h(x, v, s)`.
pub fn geodesic_h(
    conn: &ConnectionField,
    x: &[f64],
    v: &[f64],
    s: f64,
    opts: IntegrateOptions,
) -> Result<Vec<f64>, GeodesicError> {
    if s.abs() >= H_SERIES_SWITCH {
        let state = integrate_geodesic(conn, x, v, s, opts)?;
        Ok((0..x.len())
            .map(|i| 2.0 * (state.pos[i] - x[i] - s * v[i]) / (s * s))
            .collect())
    } else {
        let h0 = h_at_zero(conn, x, v)?;
        let h1 = h_s_derivative_at_zero(conn, x, v)?;
        Ok(h0.iter().zip(h1.iter()).map(|(a, b)| a + s * b).collect())
    }
}

/// `h(x, v, 0)^λ = −Γ^λ_{μν}(x) v^μ v^ν`.
pub fn h_at_zero(
    conn: &ConnectionField,
    x: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, GeodesicError> {
    let m = conn.dim();
    let gamma = conn.christoffel_at(x)?;
    let mut out = vec![0.0; m];
    for (l, o) in out.iter_mut().enumerate() {
        for mu in 0..m {
            for nu in 0..m {
                *o -= gamma.get(l, mu, nu) * v[mu] * v[nu];
            }
        }
    }
    Ok(out)
}

/// `∂h/∂s(x, v, 0)^λ = ⅓(−Γ^λ_{μν,κ} + Γ^λ_{ρκ}Γ^ρ_{μν} + Γ^λ_{κρ}Γ^ρ_{μν}) v^μ v^ν v^κ`.
pub fn h_s_derivative_at_zero(
    conn: &ConnectionField,
    x: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, GeodesicError> {
    let m = conn.dim();
    let gamma = conn.christoffel_at(x)?;
    let dgamma = conn.christoffel_partials(x)?;
    let mut out = vec![0.0; m];
    for (l, o) in out.iter_mut().enumerate() {
        for mu in 0..m {
            for nu in 0..m {
                for ka in 0..m {
                    let mut c = -dgamma.get(l, mu, nu, ka);
                    for r in 0..m {
                        c += (gamma.get(l, r, ka) + gamma.get(l, ka, r)) * gamma.get(r, mu, nu);
                    }
                    *o += c * v[mu] * v[nu] * v[ka] / 3.0;
                }
            }
        }
    }
    Ok(out)
}

/// Max-norm residuals of the four Taylor identities at `(x, v)`: the value
/// of `h` at s = 0, its x- and v-gradients, and its s-derivative, each
/// estimated from the geodesic flow by symmetric extraction plus Richardson
/// extrapolation and compared against the closed Christoffel formulas.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TaylorResiduals {
    pub value: f64,
    pub x_gradient: f64,
    pub v_gradient: f64,
    pub s_derivative: f64,
}

impl TaylorResiduals {
    pub fn max(&self) -> f64 {
        self.value
            .max(self.x_gradient)
            .max(self.v_gradient)
            .max(self.s_derivative)
    }
}

const RESIDUAL_S: f64 = 0.05;
const RESIDUAL_FD_STEP: f64 = 1e-4;

fn h_extract_fixed(
    conn: &ConnectionField,
    x: &[f64],
    v: &[f64],
    s: f64,
) -> Result<Vec<f64>, GeodesicError> {
    let state = integrate_geodesic_fixed(conn, x, v, s, 16)?;
    Ok((0..x.len())
        .map(|i| 2.0 * (state.pos[i] - x[i] - s * v[i]) / (s * s))
        .collect())
}

/// Richardson-extrapolated estimate of `h(x, v, 0)` from the flow.
fn h0_estimate(conn: &ConnectionField, x: &[f64], v: &[f64]) -> Result<Vec<f64>, GeodesicError> {
    let avg = |s: f64| -> Result<Vec<f64>, GeodesicError> {
        let a = h_extract_fixed(conn, x, v, s)?;
        let b = h_extract_fixed(conn, x, v, -s)?;
        Ok(a.iter().zip(b.iter()).map(|(p, q)| 0.5 * (p + q)).collect())
    };
    let a1 = avg(RESIDUAL_S)?;
    let a2 = avg(2.0 * RESIDUAL_S)?;
    Ok(a1
        .iter()
        .zip(a2.iter())
        .map(|(p, q)| (4.0 * p - q) / 3.0)
        .collect())
}

/// Richardson-extrapolated estimate of `∂h/∂s(x, v, 0)` from the flow.
fn h1_estimate(conn: &ConnectionField, x: &[f64], v: &[f64]) -> Result<Vec<f64>, GeodesicError> {
    let slope = |s: f64| -> Result<Vec<f64>, GeodesicError> {
        let a = h_extract_fixed(conn, x, v, s)?;
        let b = h_extract_fixed(conn, x, v, -s)?;
        Ok(a.iter()
            .zip(b.iter())
            .map(|(p, q)| (p - q) / (2.0 * s))
            .collect())
    };
    let b1 = slope(RESIDUAL_S)?;
    let b2 = slope(2.0 * RESIDUAL_S)?;
    Ok(b1
        .iter()
        .zip(b2.iter())
        .map(|(p, q)| (4.0 * p - q) / 3.0)
        .collect())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

pub fn taylor_residuals(
    conn: &ConnectionField,
    x: &[f64],
    v: &[f64],
) -> Result<TaylorResiduals, GeodesicError> {
    let m = conn.dim();
    let gamma = conn.christoffel_at(x)?;
    let dgamma = conn.christoffel_partials(x)?;

    let value = max_abs_diff(&h0_estimate(conn, x, v)?, &h_at_zero(conn, x, v)?);
    let s_derivative = max_abs_diff(&h1_estimate(conn, x, v)?, &h_s_derivative_at_zero(conn, x, v)?);

    let d = RESIDUAL_FD_STEP;
    let mut x_gradient: f64 = 0.0;
    for ka in 0..m {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[ka] += d;
        xm[ka] -= d;
        let hp = h0_estimate(conn, &xp, v)?;
        let hm = h0_estimate(conn, &xm, v)?;
        for l in 0..m {
            let fd = (hp[l] - hm[l]) / (2.0 * d);
            let mut formula = 0.0;
            for mu in 0..m {
                for nu in 0..m {
                    formula -= dgamma.get(l, mu, nu, ka) * v[mu] * v[nu];
                }
            }
            x_gradient = x_gradient.max((fd - formula).abs());
        }
    }

    let mut v_gradient: f64 = 0.0;
    for rho in 0..m {
        let mut vp = v.to_vec();
        let mut vm = v.to_vec();
        vp[rho] += d;
        vm[rho] -= d;
        let hp = h0_estimate(conn, x, &vp)?;
        let hm = h0_estimate(conn, x, &vm)?;
        for l in 0..m {
            let fd = (hp[l] - hm[l]) / (2.0 * d);
            let mut formula = 0.0;
            for (k, vk) in v.iter().enumerate() {
                formula -= (gamma.get(l, rho, k) + gamma.get(l, k, rho)) * vk;
            }
            v_gradient = v_gradient.max((fd - formula).abs());
        }
    }

    Ok(TaylorResiduals { value, x_gradient, v_gradient, s_derivative })
}
