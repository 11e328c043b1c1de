//! Vector fields of the model in its three coordinate systems, the variational
//! field along the limit cycle, and an adaptive embedded Runge-Kutta 5(4)
//! integrator (Dormand-Prince) with Hermite dense output.

use crate::error::{Error, Result};
use crate::limit_cycle::ScaledLimitCycle;
use crate::params::DimensionlessParams;

/// Planar state. The second component is `v` for the circuit system and
/// `u̇` for the Lienard / variational systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State2 {
    pub u: f64,
    pub v: f64,
}

impl State2 {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    fn axpy(&self, factor: f64, other: Self) -> Self {
        Self {
            u: self.u + factor * other.u,
            v: self.v + factor * other.v,
        }
    }

    /// State on the circuit cycle expressed as `sigma = u + v`.
    pub fn sigma(&self) -> f64 {
        self.u + self.v
    }
}

/// Circuit system in original scaled time:
/// `u' = alpha v + Phi(t) u (1 - u^2)`, `v' = -u - v`.
pub fn rhs_circuit(state: State2, t: f64, p: &DimensionlessParams) -> State2 {
    let State2 { u, v } = state;
    State2 {
        u: p.alpha * v + p.phi(t) * u * (1.0 - u * u),
        v: -u - v,
    }
}

/// Unperturbed Lienard system in scaled time with proper frequency
/// `rho_omega0`; `rho_omega0 = 1` recovers the unscaled equation.
pub fn rhs_lienard(state: State2, p: &DimensionlessParams, rho_omega0: f64) -> State2 {
    let State2 { u, v } = state;
    // Same arithmetic as the driven field at mu = eps = 0, so the two agree
    // bit for bit there.
    let inv = 1.0 / rho_omega0;
    let g = -inv * p.damping(u) * v - inv * inv * p.restoring(u);
    State2 { u: v, v: g }
}

/// Linearisation of the scaled Lienard field along the limit cycle:
/// `M(tau) = [[0, 1], [G_u, G_v]]` evaluated at `(u0(tau), v0(tau))`.
pub fn rhs_variational(state: State2, tau: f64, lc: &ScaledLimitCycle) -> State2 {
    let u0 = lc.u0.eval(tau);
    let v0 = lc.v0.eval(tau);
    let rw = lc.rho_omega0;
    let g_u = -6.0 * lc.beta * u0 * v0 / rw
        - (lc.alpha - lc.beta + 3.0 * lc.beta * u0 * u0) / (rw * rw);
    let g_v = -(1.0 - lc.beta + 3.0 * lc.beta * u0 * u0) / rw;
    State2 {
        u: state.v,
        v: g_u * state.u + g_v * state.v,
    }
}

/// Driven system in drive-scaled time with the detuning expansion
/// `1/omega = 1/(rho Omega0) + eps`; the drive phase is `tau + tau0`.
/// `p.omega` is ignored here, the effective frequency comes from `eps`.
pub fn rhs_driven_scaled(
    state: State2,
    tau: f64,
    p: &DimensionlessParams,
    rho_omega0: f64,
    eps: f64,
    tau0: f64,
) -> State2 {
    let State2 { u, v } = state;
    let inv_w = 1.0 / rho_omega0 + eps;
    let theta = tau + tau0;
    let (sin_t, cos_t) = theta.sin_cos();
    let cubic = u * u * u - u;
    let psi_bar =
        inv_w * v * (3.0 * u * u - 1.0) * sin_t + inv_w * inv_w * cubic * sin_t + inv_w * cubic * cos_t;
    State2 {
        u: v,
        v: -inv_w * p.damping(u) * v - inv_w * inv_w * p.restoring(u) - p.mu * psi_bar,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Overrides the automatic initial step when set.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            initial_step: None,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            ..Self::default()
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
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
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
/// Difference between the 5th and embedded 4th order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Adaptive stepper that owns the current state and proposed step size, so a
/// caller can walk through a long run hitting exact sample times without
/// restarting step-size control.
pub struct Stepper<'a, F: Fn(State2, f64) -> State2> {
    rhs: F,
    opts: IntegratorOptions,
    pub t: f64,
    pub y: State2,
    f: State2,
    h: f64,
    steps_taken: usize,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl<F: Fn(State2, f64) -> State2> Stepper<'_, F> {
    pub fn new(rhs: F, y0: State2, t0: f64, opts: IntegratorOptions) -> Result<Self> {
        if !y0.is_finite() || !t0.is_finite() {
            return Err(Error::NonFinite { t: t0 });
        }
        if !(opts.abs_tol > 0.0 && opts.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "integrator tolerances must be positive".into(),
            ));
        }
        let f = (rhs)(y0, t0);
        Ok(Self {
            rhs,
            opts,
            t: t0,
            y: y0,
            f,
            h: 0.0,
            steps_taken: 0,
            _marker: std::marker::PhantomData,
        })
    }

    pub fn derivative(&self) -> State2 {
        self.f
    }

    fn error_norm(&self, y0: State2, y1: State2, err: State2) -> f64 {
        let su = self.opts.abs_tol + self.opts.rel_tol * y0.u.abs().max(y1.u.abs());
        let sv = self.opts.abs_tol + self.opts.rel_tol * y0.v.abs().max(y1.v.abs());
        (0.5 * ((err.u / su).powi(2) + (err.v / sv).powi(2))).sqrt()
    }

    fn initial_step(&self, direction: f64, span: f64) -> f64 {
        if let Some(h0) = self.opts.initial_step {
            return h0.abs().min(span) * direction;
        }
        let scale_u = self.opts.abs_tol + self.opts.rel_tol * self.y.u.abs();
        let scale_v = self.opts.abs_tol + self.opts.rel_tol * self.y.v.abs();
        let d0 = ((self.y.u / scale_u).powi(2) + (self.y.v / scale_v).powi(2)).sqrt();
        let d1 = ((self.f.u / scale_u).powi(2) + (self.f.v / scale_v).powi(2)).sqrt();
        let h = if d0 > 1e-10 && d1 > 1e-10 {
            0.01 * d0 / d1
        } else {
            1e-6
        };
        h.min(span).max(1e-12) * direction
    }

    /// One accepted step, no larger than `h_max`, returning the previous
    /// `(t, y, f)` so callers can build dense output.
    fn step(&mut self, h_max: f64, direction: f64) -> Result<(f64, State2, State2)> {
        let mut h = if self.h == 0.0 || self.h.signum() != direction {
            self.initial_step(direction, h_max)
        } else {
            self.h.clamp(-h_max, h_max)
        };
        if h == 0.0 {
            h = direction * h_max;
        }
        loop {
            self.steps_taken += 1;
            if self.steps_taken > self.opts.max_steps {
                return Err(Error::Convergence(format!(
                    "integrator exceeded {} steps",
                    self.opts.max_steps
                )));
            }
            if h.abs() < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::Stiffness { t: self.t, h });
            }
            let mut k = [State2::new(0.0, 0.0); 7];
            k[0] = self.f;
            for stage in 0..6 {
                let mut y_stage = self.y;
                for (j, kj) in k.iter().enumerate().take(stage + 1) {
                    y_stage = y_stage.axpy(h * A[stage][j], *kj);
                }
                k[stage + 1] = (self.rhs)(y_stage, self.t + C[stage] * h);
            }
            // Stage 7 is the FSAL evaluation at the 5th order solution.
            let y_new = {
                let mut y = self.y;
                for (j, kj) in k.iter().enumerate().take(6) {
                    y = y.axpy(h * A[5][j], *kj);
                }
                y
            };
            if !y_new.is_finite() {
                return Err(Error::NonFinite { t: self.t });
            }
            let mut err = State2::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate() {
                err = err.axpy(h * E[j], *kj);
            }
            let err_norm = self.error_norm(self.y, y_new, err);
            if err_norm <= 1.0 {
                let prev = (self.t, self.y, self.f);
                self.t += h;
                self.y = y_new;
                self.f = k[6];
                let factor = if err_norm == 0.0 {
                    5.0
                } else {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                self.h = h * factor;
                return Ok(prev);
            }
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.2, 0.9);
        }
    }

    /// Advances exactly to `t_target`, optionally recording dense-output nodes.
    pub fn advance_to(&mut self, t_target: f64, record: Option<&mut Trajectory>) -> Result<()> {
        let span = t_target - self.t;
        if span == 0.0 {
            return Ok(());
        }
        let direction = span.signum();
        let mut record = record;
        loop {
            let remaining = t_target - self.t;
            if remaining == 0.0 || remaining.signum() != direction {
                break;
            }
            let saved_h = self.h;
            let clamp = remaining.abs();
            let clamped = self.h == 0.0 || self.h.abs() > clamp;
            let (t_prev, y_prev, f_prev) = self.step(clamp, direction)?;
            if let Some(tr) = record.as_deref_mut() {
                if tr.ts.is_empty() {
                    tr.push(t_prev, y_prev, f_prev);
                }
                tr.push(self.t, self.y, self.f);
            }
            if clamped && saved_h.abs() > clamp {
                // The step was shortened only to hit the target; keep the
                // controller's larger proposal.
                self.h = saved_h;
            }
        }
        Ok(())
    }
}

/// Stored integration nodes with cubic Hermite interpolation between them.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    ts: Vec<f64>,
    ys: Vec<State2>,
    fs: Vec<State2>,
}

impl Trajectory {
    fn push(&mut self, t: f64, y: State2, f: State2) {
        if let Some(&last) = self.ts.last() {
            if t == last {
                return;
            }
            debug_assert!(t > last, "trajectory times must increase");
        }
        self.ts.push(t);
        self.ys.push(y);
        self.fs.push(f);
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn states(&self) -> &[State2] {
        &self.ys
    }

    pub fn start_time(&self) -> f64 {
        self.ts[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn end_state(&self) -> State2 {
        *self.ys.last().unwrap()
    }

    /// Hermite interpolation on the step containing `t` (clamped to the span).
    pub fn eval(&self, t: f64) -> State2 {
        assert!(!self.is_empty(), "empty trajectory");
        if t <= self.ts[0] {
            return self.ys[0];
        }
        if t >= *self.ts.last().unwrap() {
            return *self.ys.last().unwrap();
        }
        let idx = match self.ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.ts[idx], self.ts[idx + 1]);
        let h = t1 - t0;
        let theta = (t - t0) / h;
        let (y0, y1) = (self.ys[idx], self.ys[idx + 1]);
        let (f0, f1) = (self.fs[idx], self.fs[idx + 1]);
        let h00 = (1.0 + 2.0 * theta) * (1.0 - theta) * (1.0 - theta);
        let h10 = theta * (1.0 - theta) * (1.0 - theta);
        let h01 = theta * theta * (3.0 - 2.0 * theta);
        let h11 = theta * theta * (theta - 1.0);
        State2 {
            u: h00 * y0.u + h10 * h * f0.u + h01 * y1.u + h11 * h * f1.u,
            v: h00 * y0.v + h10 * h * f0.v + h01 * y1.v + h11 * h * f1.v,
        }
    }

    /// CSV export with a `#` comment line carrying the caller's parameters.
    pub fn to_csv(&self, params_comment: &str) -> String {
        let mut out = format!("# {params_comment}\nt,u,v\n");
        for i in 0..self.ts.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e}\n",
                self.ts[i], self.ys[i].u, self.ys[i].v
            ));
        }
        out
    }
}

/// Integrates over `[t0, t1]` storing every accepted step for dense output.
pub fn integrate<F: Fn(State2, f64) -> State2>(
    rhs: F,
    y0: State2,
    t0: f64,
    t1: f64,
    opts: IntegratorOptions,
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(rhs, y0, t0, opts)?;
    let mut tr = Trajectory::default();
    stepper.advance_to(t1, Some(&mut tr))?;
    if tr.is_empty() {
        tr.push(t0, y0, stepper.derivative());
    }
    Ok(tr)
}

/// Integrates to `t1` and returns only the final state.
pub fn integrate_to<F: Fn(State2, f64) -> State2>(
    rhs: F,
    y0: State2,
    t0: f64,
    t1: f64,
    opts: IntegratorOptions,
) -> Result<State2> {
    let mut stepper = Stepper::new(rhs, y0, t0, opts)?;
    stepper.advance_to(t1, None)?;
    Ok(stepper.y)
}

/// Integrates hitting each time in `times` exactly (strictly increasing,
/// starting at or after `t0`), returning the state at each.
pub fn integrate_sampled<F: Fn(State2, f64) -> State2>(
    rhs: F,
    y0: State2,
    t0: f64,
    times: &[f64],
    opts: IntegratorOptions,
) -> Result<Vec<State2>> {
    let mut stepper = Stepper::new(rhs, y0, t0, opts)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        stepper.advance_to(t, None)?;
        out.push(stepper.y);
    }
    Ok(out)
}
