//! Order-k perturbation recursion for the detuning series
//! `eps(tau0, mu) = sum_k eps_k(tau0) mu^k` and the periodic corrections
//! `u_k`, plus the Arnold-tongue prediction built from the extremes of
//! `eps(tau0, mu)` over the drive phase.
//!
//! The recursion works on a numerical `tau0` grid with independent points;
//! the trigonometric-polynomial structure in `tau0` is checked a posteriori
//! instead of being relied on.

use crate::compatibility::{
    assemble_order_correction, drive_cos, drive_sin, FirstOrderConstants,
};
use crate::error::{Error, Result};
use crate::exec::parallel_map;
use crate::fourier::FourierSeries;
use crate::limit_cycle::ScaledLimitCycle;
use crate::linearized::WronskianData;
use crate::params::ResonanceRatio;

/// Precomputed spectral data shared by every `tau0` grid point.
pub struct PerturbationContext {
    pub alpha: f64,
    pub beta: f64,
    pub resonance: ResonanceRatio,
    pub rho: f64,
    pub rho_omega0: f64,
    pub s0: f64,
    pub f0: f64,
    pub c: f64,
    /// Solvability constant `A`.
    pub a_const: f64,
    pub constants: FirstOrderConstants,
    /// Truncation order of the base-`1/p` series.
    pub order: usize,
    u0e: FourierSeries,
    v0e: FourierSeries,
    /// Detuning-response term `h(u0) u̇0 + 2 k(u0)/(rho Omega0)`, embedded.
    s_e: FourierSeries,
    e_a: FourierSeries,
    e_b: FourierSeries,
    a_e: FourierSeries,
    b_e: FourierSeries,
}

impl PerturbationContext {
    /// `k_hint` reserves harmonic headroom for drive sidebands up to that
    /// order; solving beyond it still works, with tails guarded by the
    /// truncation check.
    pub fn new(
        lc: &ScaledLimitCycle,
        wd: &WronskianData,
        fc: &FirstOrderConstants,
        k_hint: usize,
    ) -> Result<Self> {
        let p = lc.resonance.p() as usize;
        let q = lc.resonance.q() as usize;
        let s0 = 1.0 / lc.rho_omega0;
        let trimmed = lc.u0.trimmed(1e-15);
        let order = q * trimmed.order().max(8) + p * (k_hint + 2) + 4;

        let u0e = lc.u0.embedded(q, order)?;
        let v0e = lc.v0.embedded(q, order)?;
        let exp_tf = crate::compatibility::exp_tilde_f(wd)?;
        let e_a = exp_tf.product(&wd.a)?.embedded(q, order)?;
        let e_b = exp_tf.product(&wd.b)?.embedded(q, order)?;
        let a_e = wd.a.embedded(q, order)?;
        let b_e = wd.b.embedded(q, order)?;

        let u0sq = lc.u0.product(&lc.u0)?;
        let h_of_u0 = u0sq.scaled(3.0 * lc.beta).offset(1.0 - lc.beta);
        let k_of_u0 = lc
            .u0
            .product(&u0sq)?
            .scaled(lc.beta)
            .add(&lc.u0.scaled(lc.alpha - lc.beta))?;
        let s_e = lc
            .v0
            .product(&h_of_u0)?
            .add(&k_of_u0.scaled(2.0 * s0))?
            .embedded(q, order)?;

        Ok(Self {
            alpha: lc.alpha,
            beta: lc.beta,
            resonance: lc.resonance,
            rho: lc.rho,
            rho_omega0: lc.rho_omega0,
            s0,
            f0: wd.f0,
            c: wd.c,
            a_const: fc.a,
            constants: *fc,
            order,
            u0e,
            v0e,
            s_e,
            e_a,
            e_b,
            a_e,
            b_e,
        })
    }
}

/// Recursion state at one drive phase: solved orders and the mu-graded
/// monomial caches `[u^2]_n`, `[u^3]_n`, `[u^2 u̇]_n`.
pub struct OrderKState {
    pub tau0: f64,
    pub eps: Vec<f64>,
    /// `u[0]` is the embedded unperturbed cycle; `u[k]` the order-k correction.
    pub u: Vec<FourierSeries>,
    pub v: Vec<FourierSeries>,
    uu: Vec<FourierSeries>,
    uuu: Vec<FourierSeries>,
    uuv: Vec<FourierSeries>,
}

impl OrderKState {
    pub fn new(ctx: &PerturbationContext, tau0: f64) -> Result<Self> {
        let u0 = ctx.u0e.clone();
        let v0 = ctx.v0e.clone();
        let uu0 = u0.product(&u0)?;
        let uuu0 = uu0.product(&u0)?;
        let uuv0 = uu0.product(&v0)?;
        Ok(Self {
            tau0,
            eps: Vec::new(),
            u: vec![u0],
            v: vec![v0],
            uu: vec![uu0],
            uuu: vec![uuu0],
            uuv: vec![uuv0],
        })
    }

    /// Extends the monomial caches to the grade of the newest `u_k`.
    fn extend_caches(&mut self) -> Result<()> {
        let n = self.uu.len();
        debug_assert!(n < self.u.len());
        let zero = FourierSeries::zero(self.u[0].base_frequency(), self.u[0].order());
        let mut uu = zero.clone();
        for i in 0..=n {
            uu = uu.add(&self.u[i].product(&self.u[n - i])?)?;
        }
        self.uu.push(uu);
        // [u^3]_n and [u^2 u̇]_n fold the freshly completed [u^2] grades.
        let mut uuu = zero.clone();
        let mut uuv = zero;
        for i in 0..=n {
            uuu = uuu.add(&self.uu[i].product(&self.u[n - i])?)?;
            uuv = uuv.add(&self.uu[i].product(&self.v[n - i])?)?;
        }
        self.uuu.push(uuu);
        self.uuv.push(uuv);
        Ok(())
    }

    /// Solved depth so far.
    pub fn depth(&self) -> usize {
        self.eps.len()
    }

    /// Truncated series `u0 + sum mu^k u_k` and detuning `sum mu^k eps_k`.
    pub fn truncated_solution(&self, mu: f64) -> Result<(f64, FourierSeries)> {
        let mut total = self.u[0].clone();
        let mut eps = 0.0;
        for k in 1..self.u.len() {
            total = total.add(&self.u[k].scaled(mu.powi(k as i32)))?;
            eps += self.eps[k - 1] * mu.powi(k as i32);
        }
        Ok((eps, total))
    }
}

/// Assembles the known part `Xi_k` of the order-k forcing (everything except
/// the `eps_k`-response), from the mu-expansion of the driven equation with
/// `1/omega = 1/(rho Omega0) + sum eps_j mu^j`.
fn assemble_xi_k(ctx: &PerturbationContext, st: &OrderKState, k: usize) -> Result<FourierSeries> {
    let p = ctx.resonance.p() as usize;
    let grade = |list: &[FourierSeries], n: usize| list[n].clone();
    let mut xi = FourierSeries::zero(ctx.u0e.base_frequency(), ctx.order);
    let sin_d = drive_sin(st.tau0, p, ctx.order);
    let cos_d = drive_cos(st.tau0, p, ctx.order);

    for kp in 1..=k {
        let n = k - kp;
        // [h(u) u̇]_n and [k(u)]_n.
        let hv_n = st.v[n]
            .scaled(1.0 - ctx.beta)
            .add(&grade(&st.uuv, n).scaled(3.0 * ctx.beta))?;
        let ku_n = st.u[n]
            .scaled(ctx.alpha - ctx.beta)
            .add(&grade(&st.uuu, n).scaled(ctx.beta))?;
        if kp < k {
            let e = st.eps[kp - 1];
            xi = xi.add(&hv_n.scaled(e))?.add(&ku_n.scaled(2.0 * ctx.s0 * e))?;
        }
        if kp >= 2 {
            let mut ee = 0.0;
            for j in 1..kp {
                ee += st.eps[j - 1] * st.eps[kp - j - 1];
            }
            if ee != 0.0 {
                xi = xi.add(&ku_n.scaled(ee))?;
            }
        }
        // Drive sidebands: [mu (s0+e)]_kp and [mu (s0+e)^2]_kp.
        let m1 = if kp == 1 { ctx.s0 } else { st.eps[kp - 2] };
        let m2 = if kp == 1 {
            ctx.s0 * ctx.s0
        } else {
            let mut acc = 2.0 * ctx.s0 * st.eps[kp - 2];
            for j in 1..kp - 1 {
                acc += st.eps[j - 1] * st.eps[kp - 1 - j - 1];
            }
            acc
        };
        let ds_n = grade(&st.uuv, n).scaled(3.0).sub(&st.v[n])?;
        let dc_n = grade(&st.uuu, n).sub(&st.u[n])?;
        let sin_part = ds_n.scaled(m1).add(&dc_n.scaled(m2))?;
        xi = xi
            .add(&sin_part.product(&sin_d)?)?
            .add(&dc_n.scaled(m1).product(&cos_d)?)?;
    }

    // Grade-k remainder of the unperturbed cubic terms: everything in
    // [h(u) u̇]_k and [k(u)]_k beyond the part linear in the unknown (u_k, v_k),
    // built from already-solved orders. Empty at first order.
    if k >= 2 {
        let mut uu_part = FourierSeries::zero(ctx.u0e.base_frequency(), ctx.order);
        for i in 1..k {
            uu_part = uu_part.add(&st.u[i].product(&st.u[k - i])?)?;
        }
        let mut uuu_nl = uu_part.product(&st.u[0])?;
        let mut uuv_nl = uu_part.product(&st.v[0])?;
        for m in 1..k {
            uuu_nl = uuu_nl.add(&st.uu[m].product(&st.u[k - m])?)?;
            uuv_nl = uuv_nl.add(&st.uu[m].product(&st.v[k - m])?)?;
        }
        xi = xi
            .add(&uuv_nl.scaled(3.0 * ctx.beta * ctx.s0))?
            .add(&uuu_nl.scaled(ctx.beta * ctx.s0 * ctx.s0))?;
    }
    Ok(xi)
}

/// Solves the next order: fixes `eps_k = D_k(tau0)/A`, checks the secular
/// mean, and assembles `u_k` (with the free constant `v̄_k = 0`).
pub fn solve_next_order(ctx: &PerturbationContext, st: &mut OrderKState) -> Result<f64> {
    let k = st.depth() + 1;
    let xi = assemble_xi_k(ctx, st, k)?;
    let frak_d = -ctx.e_b.mean_of_product(&xi)?;
    if ctx.a_const.abs() < 1e-12 {
        return Err(Error::Recursion("solvability constant A vanished".into()));
    }
    let eps_k = frak_d / ctx.a_const;
    let psi = xi.add(&ctx.s_e.scaled(eps_k))?;
    let q0 = ctx.e_b.mean_of_product(&psi)?;
    let scale = psi.amplitude().max(1.0);
    if q0.abs() > 1e-8 * scale {
        return Err(Error::Recursion(format!(
            "order {k}: secular mean {q0:e} survived fixing eps_{k}"
        )));
    }
    let u_k = assemble_order_correction(&ctx.e_a, &ctx.e_b, &ctx.a_e, &ctx.b_e, &psi, ctx.f0, ctx.c)?;
    let v_k = u_k.derivative();
    st.eps.push(eps_k);
    st.u.push(u_k);
    st.v.push(v_k);
    st.extend_caches()?;
    Ok(eps_k)
}

/// Runs the recursion to depth `k_max` at one drive phase.
pub fn solve_orders(
    ctx: &PerturbationContext,
    tau0: f64,
    k_max: usize,
) -> Result<OrderKState> {
    if k_max < 1 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    let mut st = OrderKState::new(ctx, tau0)?;
    for _ in 0..k_max {
        solve_next_order(ctx, &mut st)?;
    }
    Ok(st)
}

/// Detuning sequence at one grid phase.
#[derive(Debug, Clone)]
pub struct Tau0Sample {
    pub tau0: f64,
    pub eps_orders: Vec<f64>,
    pub eps_total: f64,
}

/// Predicted locking interval for one resonance and drive amplitude.
#[derive(Debug, Clone)]
pub struct TonguePrediction {
    pub resonance: ResonanceRatio,
    pub mu: f64,
    /// Order actually used (the requested one, plus the degenerate fallback).
    pub k_max: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub width: f64,
    pub scaling_exponent: u32,
    pub grid: Vec<Tau0Sample>,
}

/// Leading power of `mu` in the tongue width: `q` for even `p`, `2q` for odd.
pub fn scaling_exponent(rr: &ResonanceRatio) -> u32 {
    if rr.p() % 2 == 0 {
        rr.q()
    } else {
        2 * rr.q()
    }
}

/// Extremises `eps(tau0, mu)` over the phase grid (with a parabolic
/// refinement re-evaluated through the recursion) and maps the extremes to
/// the locking interval `[omega_min, omega_max]`.
pub fn predict_tongue(
    ctx: &PerturbationContext,
    mu: f64,
    k_max: usize,
    grid_n: usize,
    threads: usize,
) -> Result<TonguePrediction> {
    if grid_n < 32 {
        return Err(Error::InvalidParameter(
            "tau0 grid must have at least 32 points".into(),
        ));
    }
    if k_max < 1 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    // Degenerate even-integer case: cancellation in D1, D2 would fake a zero
    // width at this order; fall back to the next one.
    let mut k_eff = k_max;
    if ctx.resonance.is_even_integer() && ctx.constants.d1.hypot(ctx.constants.d2) < 1e-12 {
        k_eff = k_max + 1;
    }

    let two_pi = 2.0 * std::f64::consts::PI;
    let taus: Vec<f64> = (0..grid_n).map(|i| two_pi * i as f64 / grid_n as f64).collect();
    let solved: Vec<Result<Tau0Sample>> = parallel_map(grid_n, threads, |i| {
        let st = solve_orders(ctx, taus[i], k_eff)?;
        let eps_total = (1..=k_eff).map(|k| st.eps[k - 1] * mu.powi(k as i32)).sum();
        Ok(Tau0Sample {
            tau0: taus[i],
            eps_orders: st.eps.clone(),
            eps_total,
        })
    });
    let mut grid = Vec::with_capacity(grid_n);
    for s in solved {
        grid.push(s?);
    }

    let eval_total = |tau0: f64| -> Result<f64> {
        let st = solve_orders(ctx, tau0, k_eff)?;
        Ok((1..=k_eff).map(|k| st.eps[k - 1] * mu.powi(k as i32)).sum())
    };
    let refine = |idx: usize, want_max: bool| -> Result<f64> {
        let h = two_pi / grid_n as f64;
        let ym = grid[(idx + grid_n - 1) % grid_n].eps_total;
        let y0 = grid[idx].eps_total;
        let yp = grid[(idx + 1) % grid_n].eps_total;
        let denom = ym - 2.0 * y0 + yp;
        let mut best = y0;
        if denom.abs() > 1e-300 {
            let delta = (0.5 * h * (ym - yp) / denom).clamp(-h, h);
            let candidate = eval_total(grid[idx].tau0 + delta)?;
            best = if want_max {
                best.max(candidate)
            } else {
                best.min(candidate)
            };
        }
        Ok(best)
    };
    let (mut i_max, mut i_min) = (0, 0);
    for (i, s) in grid.iter().enumerate() {
        if s.eps_total > grid[i_max].eps_total {
            i_max = i;
        }
        if s.eps_total < grid[i_min].eps_total {
            i_min = i;
        }
    }
    let eps_max = refine(i_max, true)?;
    let eps_min = refine(i_min, false)?;

    let rw = ctx.rho_omega0;
    let omega_min = rw / (1.0 + rw * eps_max);
    let omega_max = rw / (1.0 + rw * eps_min);
    Ok(TonguePrediction {
        resonance: ctx.resonance,
        mu,
        k_max: k_eff,
        eps_min,
        eps_max,
        omega_min,
        omega_max,
        width: omega_max - omega_min,
        scaling_exponent: scaling_exponent(&ctx.resonance),
        grid,
    })
}

/// Sup-norm residual of the driven equation over one full period `2 pi p`,
/// evaluated pointwise on a fine grid for a candidate series solution with
/// detuning `eps` (so `1/omega = 1/(rho Omega0) + eps`).
pub fn residual_sup(
    lc: &ScaledLimitCycle,
    tau0: f64,
    mu: f64,
    eps: f64,
    u: &FourierSeries,
    grid_n: usize,
) -> f64 {
    let inv_w = 1.0 / lc.rho_omega0 + eps;
    let ud = u.derivative();
    let udd = ud.derivative();
    let period = 2.0 * std::f64::consts::PI * lc.resonance.p() as f64;
    let mut sup: f64 = 0.0;
    for j in 0..grid_n {
        let tau = period * j as f64 / grid_n as f64;
        let x = u.eval(tau);
        let xd = ud.eval(tau);
        let xdd = udd.eval(tau);
        let h = 1.0 - lc.beta + 3.0 * lc.beta * x * x;
        let k = (lc.alpha - lc.beta) * x + lc.beta * x * x * x;
        let theta = tau + tau0;
        let (st, ct) = theta.sin_cos();
        let cubic = x * x * x - x;
        let psi = inv_w * xd * (3.0 * x * x - 1.0) * st
            + inv_w * inv_w * cubic * st
            + inv_w * cubic * ct;
        let r = xdd + inv_w * h * xd + inv_w * inv_w * k + mu * psi;
        sup = sup.max(r.abs());
    }
    sup
}

/// Least-squares slope of `log(residual)` against `log(mu)`.
pub fn fit_log_slope(mus: &[f64], values: &[f64]) -> f64 {
    let n = mus.len() as f64;
    let xs: Vec<f64> = mus.iter().map(|m| m.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
