//! Wronskian of the variational equation along the scaled limit cycle and its
//! Floquet splitting `w11(tau) = a(tau) + e^{-f0 tau} b(tau)`, `w12 = c a`.
//!
//! The splitting is obtained from direct variational integration plus the
//! monodromy eigenstructure, not from the singular integral representation:
//! the periodic column is proportional to `u̇0` (known spectrally), and the
//! decaying Floquet mode is integrated backward in time so its relative
//! accuracy survives the contraction `e^{-f0 tau}` over a full period. The
//! facts tied to the integral representation (the zero `bar_tau`, the finite
//! slope at the phase origin) are verified a posteriori.

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::limit_cycle::ScaledLimitCycle;
use crate::ode::{integrate_sampled, rhs_variational, IntegratorOptions, State2};

/// Samples of the Wronskian matrix on a uniform grid over one scaled period.
#[derive(Debug, Clone)]
pub struct WronskianGrid {
    pub taus: Vec<f64>,
    /// Row-major `[[w11, w12], [w21, w22]]` at each grid time.
    pub mats: Vec<[[f64; 2]; 2]>,
}

impl WronskianGrid {
    pub fn monodromy(&self) -> [[f64; 2]; 2] {
        *self.mats.last().unwrap()
    }
}

/// Everything the compatibility analysis needs from the linearised equation.
#[derive(Debug, Clone)]
pub struct WronskianData {
    /// Mean damping of the scaled equation, positive by Lemma-level theory.
    pub f0: f64,
    /// Zero-mean antiderivative part of the damping integral, `F~(0) = 0`.
    pub tilde_f: FourierSeries,
    /// Periodic part of `w11`, proportional to `u̇0`.
    pub a: FourierSeries,
    /// Periodic factor of the decaying Floquet component of `w11`.
    pub b: FourierSeries,
    /// Proportionality constant in `w12 = c a`, from a least-squares fit.
    pub c: f64,
    /// `c1 = -r1` (scaled jet).
    pub c1: f64,
    /// Fit of `w12 = c2 u̇0`; Remark-level theory gives `c2 = 1/r1`.
    pub c2: f64,
    /// Unique zero of `w11` in `(0, pi rho)`.
    pub bar_tau: f64,
    /// Nontrivial entry of the monodromy matrix; equals `e^{-2 pi rho f0}` up
    /// to integration error.
    pub floquet_multiplier: f64,
    pub monodromy: [[f64; 2]; 2],
    pub grid: WronskianGrid,
}

impl WronskianData {
    /// `w11` reconstructed from the splitting; smooth off-grid evaluation.
    pub fn w11(&self, tau: f64) -> f64 {
        self.a.eval(tau) + (-self.f0 * tau).exp() * self.b.eval(tau)
    }

    /// `F(tau) = f0 tau + F~(tau)`.
    pub fn damping_integral(&self, tau: f64) -> f64 {
        self.f0 * tau + self.tilde_f.eval(tau)
    }
}

/// Default grid resolution per period for the variational integration.
pub const DEFAULT_GRID: usize = 512;

/// Damping data of the scaled equation: `f(u0(tau))` has mean `f0 > 0` and
/// zero-mean antiderivative `F~` anchored at `F~(0) = 0`.
pub fn compute_damping(lc: &ScaledLimitCycle) -> Result<(f64, FourierSeries)> {
    let u0sq = lc.u0.product(&lc.u0)?;
    let f_series = u0sq
        .scaled(3.0 * lc.beta / lc.rho_omega0)
        .offset((1.0 - lc.beta) / lc.rho_omega0);
    let f0 = f_series.mean();
    if !(f0 > 0.0) {
        return Err(Error::Decomposition(format!(
            "mean damping must be positive, got {f0}"
        )));
    }
    let tilde_f = f_series.offset(-f0).periodic_antiderivative()?;
    Ok((f0, tilde_f))
}

/// Integrates the matrix variational equation `Ẇ = M(tau) W`, `W(0) = 1`,
/// column by column, sampling on a uniform grid over one period.
pub fn integrate_wronskian(
    lc: &ScaledLimitCycle,
    samples_per_period: usize,
    tol: f64,
) -> Result<WronskianGrid> {
    let k = samples_per_period;
    if k < 16 {
        return Err(Error::InvalidParameter("grid too coarse".into()));
    }
    let taus: Vec<f64> = (0..=k).map(|j| lc.period * j as f64 / k as f64).collect();
    let opts = IntegratorOptions::with_tol(tol);
    let rhs = |s: State2, tau: f64| rhs_variational(s, tau, lc);
    let col1 = integrate_sampled(&rhs, State2::new(1.0, 0.0), 0.0, &taus, opts)?;
    let col2 = integrate_sampled(&rhs, State2::new(0.0, 1.0), 0.0, &taus, opts)?;
    let mats = col1
        .iter()
        .zip(&col2)
        .map(|(c1, c2)| [[c1.u, c2.u], [c1.v, c2.v]])
        .collect();
    Ok(WronskianGrid { taus, mats })
}

/// Splits `w11` into `a + e^{-f0 tau} b` and locates `bar_tau`.
///
/// Route: the monodromy is lower triangular in this phase convention
/// (`w12(T) = c2 u̇0(T) = 0`), so the nontrivial multiplier is read off as
/// `Phi_11` and the first column decomposes over the periodic direction `e2`
/// and the decaying eigenvector. The decaying mode is integrated backward.
pub fn decompose_w11(
    lc: &ScaledLimitCycle,
    f0: f64,
    grid: &WronskianGrid,
    tol: f64,
) -> Result<(FourierSeries, FourierSeries, f64, f64)> {
    let period = lc.period;
    let k = grid.taus.len() - 1;
    let phi = grid.monodromy();
    let lambda = phi[0][0];
    let lambda_f0 = (-f0 * period).exp();
    // The multiplier is tiny; its relative accuracy degrades like tol/lambda,
    // so the guard widens with the integration tolerance.
    let lambda_guard = 1e-6_f64.max(1e6 * tol);
    if !(lambda > 0.0) || (lambda / lambda_f0 - 1.0).abs() > lambda_guard {
        return Err(Error::Decomposition(format!(
            "monodromy multiplier {lambda:e} does not match e^(-2 pi rho f0) = {lambda_f0:e}"
        )));
    }
    if (1.0 - lambda).abs() < 1e-3 {
        return Err(Error::Decomposition(
            "nontrivial multiplier too close to 1; splitting is ill-conditioned".into(),
        ));
    }

    // e1 = x_lambda v_lambda + x_p e2 with x_lambda = 1.
    let v_lambda = State2::new(1.0, phi[1][0] / (lambda - 1.0));
    let x_p = -phi[1][0] / (lambda - 1.0);

    // Backward pass for the decaying mode: psi(s) = phi_mode(T - s).
    let opts = IntegratorOptions::with_tol(tol);
    let rhs_back = |s: State2, t: f64| {
        let d = rhs_variational(s, period - t, lc);
        State2::new(-d.u, -d.v)
    };
    let s_grid: Vec<f64> = (0..=k).map(|j| period * j as f64 / k as f64).collect();
    let psi_end = State2::new(lambda * v_lambda.u, lambda * v_lambda.v);
    let psi = integrate_sampled(&rhs_back, psi_end, 0.0, &s_grid, opts)?;
    let start_err = ((psi[k].u - v_lambda.u).powi(2) + (psi[k].v - v_lambda.v).powi(2)).sqrt();
    let scale = (v_lambda.u.powi(2) + v_lambda.v.powi(2)).sqrt();
    if start_err > 1e-7_f64.max(1e5 * tol) * scale {
        return Err(Error::Decomposition(format!(
            "backward Floquet mode failed to close: defect {start_err:e}"
        )));
    }

    // b(tau) = e^{f0 tau} phi_mode_1(tau), sampled over [0, T).
    let b_samples: Vec<f64> = (0..k)
        .map(|j| (f0 * grid.taus[j]).exp() * psi[k - j].u)
        .collect();
    let order = lc.u0.order();
    let b = FourierSeries::from_samples(lc.u0.base_frequency(), order, &b_samples)?;

    // c2 from the fit w12 = c2 u̇0 over the whole grid.
    let mut num = 0.0;
    let mut den = 0.0;
    let mut w12_max: f64 = 0.0;
    for (j, m) in grid.mats.iter().enumerate() {
        let v0j = lc.v0.eval(grid.taus[j]);
        num += m[0][1] * v0j;
        den += v0j * v0j;
        w12_max = w12_max.max(m[0][1].abs());
    }
    let c2 = num / den;
    let mut fit_resid: f64 = 0.0;
    for (j, m) in grid.mats.iter().enumerate() {
        fit_resid = fit_resid.max((m[0][1] - c2 * lc.v0.eval(grid.taus[j])).abs());
    }
    if fit_resid > 1e-6 * w12_max {
        return Err(Error::Decomposition(format!(
            "w12 is not proportional to u̇0: relative residual {:e}",
            fit_resid / w12_max
        )));
    }

    let a = lc.v0.scaled(x_p * c2);
    Ok((a, b, c2, x_p))
}

/// Orchestrates damping, variational integration, the Floquet splitting, the
/// `c` fit and the zero `bar_tau`.
pub fn compute_wronskian_data(lc: &ScaledLimitCycle) -> Result<WronskianData> {
    compute_wronskian_data_with(lc, DEFAULT_GRID, 1e-12)
}

pub fn compute_wronskian_data_with(
    lc: &ScaledLimitCycle,
    samples_per_period: usize,
    tol: f64,
) -> Result<WronskianData> {
    let (f0, tilde_f) = compute_damping(lc)?;
    let grid = integrate_wronskian(lc, samples_per_period, tol)?;
    let (a, b, c2, _x_p) = decompose_w11(lc, f0, &grid, tol)?;

    // c from the least-squares fit of w12 = c a, restricted to the subgrid
    // where a is well away from its zeros.
    let a_max = grid
        .taus
        .iter()
        .map(|&t| a.eval(t).abs())
        .fold(0.0, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut w12_max: f64 = 0.0;
    for (j, m) in grid.mats.iter().enumerate() {
        let aj = a.eval(grid.taus[j]);
        if aj.abs() > 0.1 * a_max {
            num += m[0][1] * aj;
            den += aj * aj;
            w12_max = w12_max.max(m[0][1].abs());
        }
    }
    if den == 0.0 {
        return Err(Error::Decomposition("a vanished on the whole grid".into()));
    }
    let c = num / den;
    let mut fit_resid: f64 = 0.0;
    for (j, m) in grid.mats.iter().enumerate() {
        let aj = a.eval(grid.taus[j]);
        if aj.abs() > 0.1 * a_max {
            fit_resid = fit_resid.max((m[0][1] - c * aj).abs());
        }
    }
    if fit_resid > 1e-6 * w12_max.max(1e-300) {
        return Err(Error::Decomposition(format!(
            "w12 = c a fit residual too large: {:e}",
            fit_resid / w12_max
        )));
    }

    let bar_tau = locate_bar_tau(lc, f0, &a, &b, &grid)?;
    Ok(WronskianData {
        f0,
        tilde_f,
        a,
        b,
        c,
        c1: -lc.r1,
        c2,
        bar_tau,
        floquet_multiplier: grid.monodromy()[0][0],
        monodromy: grid.monodromy(),
        grid,
    })
}

/// The unique zero of `w11` in `(0, pi rho)`, bracketed on the integration
/// grid and refined by bisection on the splitting reconstruction.
fn locate_bar_tau(
    lc: &ScaledLimitCycle,
    f0: f64,
    a: &FourierSeries,
    b: &FourierSeries,
    grid: &WronskianGrid,
) -> Result<f64> {
    let half = 0.5 * lc.period;
    let w11 = |tau: f64| a.eval(tau) + (-f0 * tau).exp() * b.eval(tau);
    // The half period lands exactly on index K/2 of the uniform grid; the
    // zero lies strictly inside (0, pi rho), so scan cells up to that index.
    let k_half = (grid.taus.len() - 1) / 2;
    let mut brackets = Vec::new();
    for j in 0..k_half {
        let (t0, t1) = (grid.taus[j], grid.taus[j + 1]);
        let (w0, w1) = (grid.mats[j][0][0], grid.mats[j + 1][0][0]);
        if w0 == 0.0 {
            if t0 > 0.0 {
                brackets.push((t0, t0));
            }
            continue;
        }
        if w0 * w1 < 0.0 {
            brackets.push((t0, t1));
        }
    }
    if brackets.len() != 1 {
        return Err(Error::Decomposition(format!(
            "expected exactly one zero of w11 in (0, pi rho), found {}",
            brackets.len()
        )));
    }
    let (mut lo, mut hi) = brackets[0];
    if lo == hi {
        return Ok(lo);
    }
    let w_lo = w11(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if w11(mid) * w_lo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * half {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Diagnostics for the removable singularity of the integral representation
/// of `w11` at the phase origin.
#[derive(Debug, Clone, Copy)]
pub struct SmoothnessReport {
    /// `|2 r2 + f(r0) r1|` in scaled time; the coefficient of the would-be
    /// logarithmic divergence.
    pub divergence_cancellation: f64,
    /// `ẇ11(0)` evaluated from the splitting; zero by the choice of `bar_tau`.
    pub w11_dot_at_zero: f64,
    /// Gap between Richardson-extrapolated one-sided derivatives at 0.
    pub one_sided_derivative_gap: f64,
}

pub fn smoothness_probe(lc: &ScaledLimitCycle, wd: &WronskianData) -> SmoothnessReport {
    let divergence_cancellation = (2.0 * lc.r2 + lc.damping_scaled(lc.r0) * lc.r1).abs();
    let a_dot = wd.a.derivative();
    let b_dot = wd.b.derivative();
    let w11_dot_at_zero = a_dot.eval(0.0) + b_dot.eval(0.0) - wd.f0 * wd.b.eval(0.0);

    let slope = |delta: f64| (wd.w11(delta) - wd.w11(0.0)) / delta;
    // Two Richardson levels on the one-sided difference: O(d^3) residual.
    let richardson = |d: f64| {
        let r1 = 2.0 * slope(0.5 * d) - slope(d);
        let r1_half = 2.0 * slope(0.25 * d) - slope(0.5 * d);
        (4.0 * r1_half - r1) / 3.0
    };
    let d0 = lc.period / 1024.0;
    let plus = richardson(d0);
    let minus = richardson(-d0);
    SmoothnessReport {
        divergence_cancellation,
        w11_dot_at_zero,
        one_sided_derivative_gap: (plus - minus).abs(),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::limit_cycle::tests::{shared_cycle, shared_cycle_54};
    use crate::limit_cycle::{rescale_cycle, ScaledLimitCycle};
    use crate::params::ResonanceRatio;
    use std::sync::OnceLock;

    static WD_1: OnceLock<(ScaledLimitCycle, WronskianData)> = OnceLock::new();
    static WD_2: OnceLock<(ScaledLimitCycle, WronskianData)> = OnceLock::new();

    pub(crate) fn shared_wd_rho1() -> &'static (ScaledLimitCycle, WronskianData) {
        WD_1.get_or_init(|| {
            let lc = rescale_cycle(shared_cycle(), &ResonanceRatio::new(1, 1).unwrap()).unwrap();
            let wd = compute_wronskian_data(&lc).unwrap();
            (lc, wd)
        })
    }

    pub(crate) fn shared_wd_rho2_54() -> &'static (ScaledLimitCycle, WronskianData) {
        WD_2.get_or_init(|| {
            let lc = rescale_cycle(shared_cycle_54(), &ResonanceRatio::new(2, 1).unwrap()).unwrap();
            let wd = compute_wronskian_data(&lc).unwrap();
            (lc, wd)
        })
    }

    #[test]
    fn mean_damping_positive_and_antiderivative_anchored() {
        let (lc, wd) = shared_wd_rho1();
        assert!(wd.f0 > 0.0);
        assert!(wd.tilde_f.eval(0.0).abs() < 1e-10);
        assert!(wd.tilde_f.eval(lc.period).abs() < 1e-9);
    }

    #[test]
    fn f0_scales_inversely_with_rho() {
        let (_, wd1) = shared_wd_rho1();
        let lc2 = rescale_cycle(shared_cycle(), &ResonanceRatio::new(2, 1).unwrap()).unwrap();
        let (f0_2, _) = compute_damping(&lc2).unwrap();
        assert!((f0_2 - wd1.f0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn wronskian_starts_at_identity() {
        let (_, wd) = shared_wd_rho1();
        let w0 = wd.grid.mats[0];
        assert_eq!(w0, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn second_column_follows_the_tangent_direction() {
        let (lc, wd) = shared_wd_rho1();
        let acc = lc.v0.derivative();
        let mut max_norm: f64 = 0.0;
        for (j, m) in wd.grid.mats.iter().enumerate() {
            let _ = j;
            max_norm = max_norm.max((m[0][1].powi(2) + m[1][1].powi(2)).sqrt());
        }
        let mut worst: f64 = 0.0;
        for (j, m) in wd.grid.mats.iter().enumerate() {
            let tau = wd.grid.taus[j];
            let col = (m[0][1], m[1][1]);
            let tan = (lc.v0.eval(tau), acc.eval(tau));
            let nc = (col.0 * col.0 + col.1 * col.1).sqrt();
            let nt = (tan.0 * tan.0 + tan.1 * tan.1).sqrt();
            if nc < 0.05 * max_norm || nt == 0.0 {
                continue;
            }
            let cross = (col.0 * tan.1 - col.1 * tan.0).abs();
            worst = worst.max((cross / (nc * nt)).asin());
        }
        assert!(worst < 1e-6, "max column angle {worst:e} rad");
    }

    #[test]
    fn determinant_obeys_the_abel_identity() {
        for (lc, wd) in [shared_wd_rho1(), shared_wd_rho2_54()] {
            let _ = lc;
            let k = wd.grid.taus.len() - 1;
            let stride = k / 256;
            let mut worst: f64 = 0.0;
            for j in (0..=k).step_by(stride.max(1)) {
                let m = wd.grid.mats[j];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                let expect = (-wd.damping_integral(wd.grid.taus[j])).exp();
                worst = worst.max((det - expect).abs() / expect);
            }
            assert!(worst < 1e-7, "det deviation {worst:e}");
        }
    }

    #[test]
    fn splitting_reconstructs_w11() {
        for (_, wd) in [shared_wd_rho1(), shared_wd_rho2_54()] {
            let mut w11_max: f64 = 0.0;
            for m in &wd.grid.mats {
                w11_max = w11_max.max(m[0][0].abs());
            }
            let mut worst: f64 = 0.0;
            for (j, m) in wd.grid.mats.iter().enumerate() {
                worst = worst.max((wd.w11(wd.grid.taus[j]) - m[0][0]).abs());
            }
            assert!(worst < 1e-8 * w11_max, "reconstruction defect {worst:e}");
        }
    }

    #[test]
    fn a_and_b_contain_only_odd_harmonics() {
        for (_, wd) in [shared_wd_rho1(), shared_wd_rho2_54()] {
            assert!(wd.a.parity().even_fraction() < 1e-8);
            assert!(wd.b.parity().even_fraction() < 1e-8);
        }
    }

    #[test]
    fn floquet_multiplier_matches_mean_damping() {
        for (lc, wd) in [shared_wd_rho1(), shared_wd_rho2_54()] {
            let expect = (-2.0 * std::f64::consts::PI * lc.rho * wd.f0).exp();
            assert!(
                (wd.floquet_multiplier / expect - 1.0).abs() < 1e-6,
                "{} vs {}",
                wd.floquet_multiplier,
                expect
            );
            // Monodromy eigenvalues are {1, lambda}.
            let m = wd.monodromy;
            let tr = m[0][0] + m[1][1];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let disc = (tr * tr - 4.0 * det).sqrt();
            let e1 = 0.5 * (tr + disc);
            let e2 = 0.5 * (tr - disc);
            let trivial = if (e1 - 1.0).abs() < (e2 - 1.0).abs() { e1 } else { e2 };
            let nontrivial = if trivial == e1 { e2 } else { e1 };
            assert!((trivial - 1.0).abs() < 1e-6);
            assert!((nontrivial / expect - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn c_constants_satisfy_remark_relations() {
        for (lc, wd) in [shared_wd_rho1(), shared_wd_rho2_54()] {
            assert!(
                (wd.c2 * lc.r1 - 1.0).abs() < 1e-8,
                "c2 r1 = {}",
                wd.c2 * lc.r1
            );
            assert!((wd.c1 * wd.c2 + 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn bar_tau_is_the_unique_zero_in_half_period() {
        for (lc, wd) in [shared_wd_rho1(), shared_wd_rho2_54()] {
            let half = 0.5 * lc.period;
            assert!(wd.bar_tau > 0.0 && wd.bar_tau < half);
            assert!(wd.w11(wd.bar_tau).abs() < 1e-9);
            // Count sign changes on a fine sweep as an independent check.
            let mut count = 0;
            let mut prev = wd.w11(half * 1e-4);
            for k in 1..=4096 {
                let tau = half * (1e-4 + (1.0 - 2e-4) * k as f64 / 4096.0);
                let now = wd.w11(tau);
                if prev * now < 0.0 {
                    count += 1;
                }
                prev = now;
            }
            assert_eq!(count, 1);
        }
    }

    #[test]
    fn b_matches_two_period_difference_construction() {
        // Textbook route: b(tau) = e^{f0 tau} (w11(tau) - w11(tau + T)) / (1 - lambda)
        // from a two-period forward integration of the first column.
        let (lc, wd) = shared_wd_rho1();
        let k = 256;
        let times: Vec<f64> = (0..=2 * k).map(|j| lc.period * j as f64 / k as f64).collect();
        let col1 = integrate_sampled(
            |s, tau| rhs_variational(s, tau, lc),
            State2::new(1.0, 0.0),
            0.0,
            &times,
            IntegratorOptions::with_tol(1e-13),
        )
        .unwrap();
        let lambda = (-wd.f0 * lc.period).exp();
        let mut worst: f64 = 0.0;
        let b_max = (0..k).map(|j| wd.b.eval(times[j]).abs()).fold(0.0, f64::max);
        for j in 0..k {
            let tau = times[j];
            let two_period = (wd.f0 * tau).exp() * (col1[j].u - col1[j + k].u) / (1.0 - lambda);
            worst = worst.max((two_period - wd.b.eval(tau)).abs());
        }
        assert!(worst < 1e-7 * b_max, "b route disagreement {worst:e}");
    }

    #[test]
    fn smoothness_probe_reports_clean_origin() {
        for (lc, wd) in [shared_wd_rho1(), shared_wd_rho2_54()] {
            let report = smoothness_probe(lc, wd);
            assert!(report.divergence_cancellation < 1e-8);
            assert!(report.w11_dot_at_zero.abs() < 1e-6);
            assert!(report.one_sided_derivative_gap < 1e-6);
        }
    }
}
