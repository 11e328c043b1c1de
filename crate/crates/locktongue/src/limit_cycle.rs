//! Shooting solver for the unique attracting limit cycle of the unperturbed
//! Lienard equation, phase-normalised so `u̇0(0) = 0`, `u0(0) > 0` (time
//! origin at a maximum of `u`), plus the rescaling to resonance time where the
//! cycle has period `2 pi rho`.

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::ode::{integrate, integrate_sampled, integrate_to, rhs_lienard, IntegratorOptions, State2};
use crate::params::{DimensionlessParams, ResonanceRatio};

/// The unperturbed periodic orbit in unscaled Lienard time.
///
/// Jet at the phase origin: `u0(t) = r0 + r1 t^2/2 + r2 t^3/3 + O(t^4)` with
/// `r0 = u0(0) > 0`, `r1 = ü0(0) = -k(r0) < 0` and `2 r2 + h(r0) r1 = 0`.
#[derive(Debug, Clone)]
pub struct LimitCycle {
    pub alpha: f64,
    pub beta: f64,
    /// Period of the cycle in unscaled time.
    pub period: f64,
    /// Proper frequency `2 pi / period`.
    pub omega0: f64,
    /// Fourier series of `u0` on base frequency `omega0`.
    pub u0: FourierSeries,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
}

/// The same cycle in drive-scaled time `tau`, where its period is `2 pi rho`
/// and its Fourier base is `1/rho = q/p`.
#[derive(Debug, Clone)]
pub struct ScaledLimitCycle {
    pub alpha: f64,
    pub beta: f64,
    /// Proper frequency of the unscaled cycle.
    pub omega0: f64,
    pub resonance: ResonanceRatio,
    pub rho: f64,
    pub rho_omega0: f64,
    /// `2 pi rho`.
    pub period: f64,
    pub u0: FourierSeries,
    /// `u̇0` in scaled time.
    pub v0: FourierSeries,
    pub r0: f64,
    /// Scaled jet, `r1 = \bar r1 / (rho Omega0)^2`.
    pub r1: f64,
    pub r2: f64,
}

impl ScaledLimitCycle {
    /// `f(u) = h(u) / (rho Omega0)`, the damping of the scaled equation.
    pub fn damping_scaled(&self, u: f64) -> f64 {
        (1.0 - self.beta + 3.0 * self.beta * u * u) / self.rho_omega0
    }

    /// `g(u) = k(u) / (rho Omega0)^2`, the restoring force of the scaled equation.
    pub fn restoring_scaled(&self, u: f64) -> f64 {
        ((self.alpha - self.beta) * u + self.beta * u.powi(3)) / (self.rho_omega0 * self.rho_omega0)
    }
}

pub const DEFAULT_HARMONICS: usize = 64;

pub fn find_limit_cycle(alpha: f64, beta: f64, tol: f64) -> Result<LimitCycle> {
    find_limit_cycle_with(alpha, beta, tol, DEFAULT_HARMONICS)
}

/// Shooting solution of the unscaled Lienard equation.
///
/// Integrates from `(2, 0)` until transients decay (the cycle is a global
/// attractor), locates a maximum of `u` with `u > 0`, then Newton-refines the
/// two unknowns `(u(0), T)` on `u(T) = u(0)`, `u̇(T) = 0`, with `u̇(0) = 0`
/// enforced by construction.
pub fn find_limit_cycle_with(
    alpha: f64,
    beta: f64,
    tol: f64,
    n_harmonics: usize,
) -> Result<LimitCycle> {
    let params = DimensionlessParams::new(alpha, beta, 0.0, 1.0)?;
    params.require_limit_cycle_regime()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if n_harmonics < 4 {
        return Err(Error::InvalidParameter(
            "need at least 4 harmonics".into(),
        ));
    }
    solve_from_seed(params, tol, n_harmonics, State2::new(2.0, 0.0))
}

/// Seed-parameterised solver; any nonzero seed works because the cycle
/// attracts the whole punctured plane.
pub(crate) fn solve_from_seed(
    params: DimensionlessParams,
    tol: f64,
    n_harmonics: usize,
    seed: State2,
) -> Result<LimitCycle> {
    let (alpha, beta) = (params.alpha, params.beta);
    let opts = IntegratorOptions::with_tol((tol * 1e-2).clamp(1e-13, 1e-9));
    let rhs = |s: State2, _: f64| rhs_lienard(s, &params, 1.0);

    // Land on the attractor.
    let settled = integrate_to(rhs, seed, 0.0, 20.0, opts)?;

    // Two successive maxima give the phase point and a period estimate.
    let (t_max1, y_max1) = next_u_maximum(&rhs, settled, 0.0, opts)?;
    let (t_max2, _) = next_u_maximum(&rhs, y_max1, t_max1, opts)?;
    let mut u_head = y_max1.u;
    let mut period = t_max2 - t_max1;

    // Newton on (u(0), T) with a finite-difference Jacobian.
    let residual = |u_head: f64, period: f64| -> Result<(f64, f64)> {
        let end = integrate_to(rhs, State2::new(u_head, 0.0), 0.0, period, opts)?;
        Ok((end.u - u_head, end.v))
    };
    let mut converged = false;
    let (mut r_u, mut r_v) = residual(u_head, period)?;
    for _ in 0..50 {
        let norm = r_u.abs().max(r_v.abs());
        if norm < tol {
            converged = true;
            break;
        }
        let du = 1e-7 * u_head.abs().max(1.0);
        let dt = 1e-7 * period.abs().max(1.0);
        let (p_u, p_v) = residual(u_head + du, period)?;
        let (q_u, q_v) = residual(u_head, period + dt)?;
        let j11 = (p_u - r_u) / du;
        let j21 = (p_v - r_v) / du;
        let j12 = (q_u - r_u) / dt;
        let j22 = (q_v - r_v) / dt;
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-14 {
            return Err(Error::Convergence(
                "singular shooting Jacobian".into(),
            ));
        }
        let step_u = -(j22 * r_u - j12 * r_v) / det;
        let step_t = -(-j21 * r_u + j11 * r_v) / det;
        let mut scale = 1.0;
        loop {
            let trial_u = u_head + scale * step_u;
            let trial_t = period + scale * step_t;
            let (t_u, t_v) = residual(trial_u, trial_t)?;
            if t_u.abs().max(t_v.abs()) < norm || scale < 1.0 / 32.0 {
                u_head = trial_u;
                period = trial_t;
                r_u = t_u;
                r_v = t_v;
                break;
            }
            scale *= 0.5;
        }
    }
    if !converged {
        return Err(Error::Convergence(format!(
            "shooting Newton did not reach {tol:e} in 50 iterations (residual {:e})",
            r_u.abs().max(r_v.abs())
        )));
    }

    let omega0 = 2.0 * std::f64::consts::PI / period;
    let m = 4 * n_harmonics;
    let times: Vec<f64> = (0..m).map(|j| period * j as f64 / m as f64).collect();
    let states = integrate_sampled(rhs, State2::new(u_head, 0.0), 0.0, &times, opts)?;
    let samples: Vec<f64> = states.iter().map(|s| s.u).collect();
    let u0 = FourierSeries::from_samples(omega0, n_harmonics, &samples)?;

    let r0 = u_head;
    let r1 = -params.restoring(r0);
    let r2 = -params.damping(r0) * r1 / 2.0;
    Ok(LimitCycle {
        alpha,
        beta,
        period,
        omega0,
        u0,
        r0,
        r1,
        r2,
    })
}

/// Walks forward until `u̇` crosses zero from above with `u > 0`, then refines
/// the crossing time by bisection on dense output and a Newton polish.
fn next_u_maximum(
    rhs: &impl Fn(State2, f64) -> State2,
    start: State2,
    t_start: f64,
    opts: IntegratorOptions,
) -> Result<(f64, State2)> {
    let window = 30.0;
    let tr = integrate(rhs, start, t_start, t_start + window, opts)?;
    let ts = tr.times();
    let ys = tr.states();
    // Arm the detector only after u̇ has grown substantially positive, so a
    // start sitting exactly on a maximum is not re-bracketed at once.
    let v_max = ys.iter().map(|y| y.v.abs()).fold(0.0, f64::max);
    let mut armed = false;
    let mut bracket = None;
    for i in 0..ts.len() - 1 {
        if !armed {
            armed = ys[i].v > 0.3 * v_max;
            continue;
        }
        if ys[i].v > 0.0 && ys[i + 1].v <= 0.0 && ys[i].u > 0.0 {
            bracket = Some((ts[i], ts[i + 1], ys[i]));
            break;
        }
    }
    let (mut lo, mut hi, y_lo) = bracket.ok_or_else(|| {
        Error::Convergence("no maximum of u found in the search window".into())
    })?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tr.eval(mid).v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton polish with exact short integrations from the bracket start.
    let t_node = lo.min(hi);
    let mut t_cross = 0.5 * (lo + hi);
    let anchor_t = ts.iter().rfind(|&&t| t <= t_node).copied().unwrap_or(lo);
    let anchor = if anchor_t == lo { y_lo } else { tr.eval(anchor_t) };
    let mut state = integrate_to(rhs, anchor, anchor_t, t_cross, opts)?;
    for _ in 0..8 {
        let f = rhs(state, t_cross);
        if f.v.abs() < 1e-12 {
            break;
        }
        let dt = -state.v / f.v;
        t_cross += dt;
        state = integrate_to(rhs, state, t_cross - dt, t_cross, opts)?;
        if state.v.abs() < 1e-13 {
            break;
        }
    }
    Ok((t_cross, state))
}

/// Change of variables to drive-scaled time at resonance `p:q`: same Fourier
/// coefficients on base `1/rho`, period `2 pi rho`, jets scaled by powers of
/// `rho Omega0`.
pub fn rescale_cycle(lc: &LimitCycle, rr: &ResonanceRatio) -> Result<ScaledLimitCycle> {
    let rho = rr.rho();
    let rho_omega0 = rho * lc.omega0;
    let base = f64::from(rr.q()) / f64::from(rr.p());
    let u0 = lc.u0.with_base(base)?;
    let v0 = u0.derivative();
    Ok(ScaledLimitCycle {
        alpha: lc.alpha,
        beta: lc.beta,
        omega0: lc.omega0,
        resonance: *rr,
        rho,
        rho_omega0,
        period: 2.0 * std::f64::consts::PI * rho,
        u0,
        v0,
        r0: lc.r0,
        r1: lc.r1 / (rho_omega0 * rho_omega0),
        r2: lc.r2 / (rho_omega0 * rho_omega0 * rho_omega0),
    })
}
