//! First-order compatibility machinery: the solvability constant `A` (both as
//! a spectral average and in closed form `-r1 rho Omega0`), the drive-coupling
//! constants `B_ij`, the combinations `D1`, `D2`, the first-order detuning
//! `eps1(tau0)` and the first-order correction `u1`.
//!
//! Averages over the common period `2 pi p` are taken as the zero coefficient
//! of spectral products, which is exact for trigonometric polynomials; the
//! even-integer selection rule then emerges from index bookkeeping rather
//! than quadrature cancellation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::limit_cycle::ScaledLimitCycle;
use crate::linearized::WronskianData;

/// Constants of the first-order compatibility equation
/// `eps1 A = D1 cos(tau0) + D2 sin(tau0)`.
///
/// Convention: `b11/b21` multiply `cos(tau0)` and `b12/b22` multiply
/// `sin(tau0)` in the sine-carried averages, and `b31/b32` are the
/// `cos(tau0)`/`sin(tau0)` coefficients of the cosine-carried average, so
/// `D1 = -(B11 + B21 + B31)`, `D2 = -(B12 + B22 + B32)` directly.
#[derive(Debug, Clone, Copy)]
pub struct FirstOrderConstants {
    /// The solvability constant `A` (spectral-average route).
    pub a: f64,
    /// `rho * A`, independent of the resonance.
    pub a_bar: f64,
    pub b11: f64,
    pub b12: f64,
    pub b21: f64,
    pub b22: f64,
    pub b31: f64,
    pub b32: f64,
    pub d1: f64,
    pub d2: f64,
}

impl FirstOrderConstants {
    pub fn b_values(&self) -> [f64; 6] {
        [self.b11, self.b12, self.b21, self.b22, self.b31, self.b32]
    }

    pub fn max_abs_b(&self) -> f64 {
        self.b_values().iter().fold(0.0, |m, b| m.max(b.abs()))
    }

    /// Width of the first-order locking interval in the detuning variable,
    /// per unit drive amplitude: `2 sqrt(D1^2 + D2^2) / |A|`.
    pub fn first_order_eps_width(&self) -> f64 {
        2.0 * self.d1.hypot(self.d2) / self.a.abs()
    }
}

/// `e^{F~}` as a series; accurate to the truncation because `F~` is analytic.
pub fn exp_tilde_f(wd: &WronskianData) -> Result<FourierSeries> {
    wd.tilde_f.map_pointwise(wd.tilde_f.order(), f64::exp)
}

/// `A` from its defining average
/// `< e^{F~} b [ u̇0 h(u0) + 2 k(u0)/(rho Omega0) ] >`.
pub fn compute_a_integral(lc: &ScaledLimitCycle, wd: &WronskianData) -> Result<f64> {
    let e_b = exp_tilde_f(wd)?.product(&wd.b)?;
    let u0sq = lc.u0.product(&lc.u0)?;
    let h_of_u0 = u0sq.scaled(3.0 * lc.beta).offset(1.0 - lc.beta);
    let k_of_u0 = lc
        .u0
        .product(&u0sq)?
        .scaled(lc.beta)
        .add(&lc.u0.scaled(lc.alpha - lc.beta))?;
    let integrand = lc
        .v0
        .product(&h_of_u0)?
        .add(&k_of_u0.scaled(2.0 / lc.rho_omega0))?;
    e_b.mean_of_product(&integrand)
}

/// Closed form `A = -r1 rho Omega0` (scaled-time jet).
pub fn compute_a_closed(lc: &ScaledLimitCycle) -> f64 {
    -lc.r1 * lc.rho_omega0
}

/// The six drive-coupling averages over `[0, 2 pi p]` and the assembled
/// `D1`, `D2`. Nonzero only when `rho` is an even integer.
pub fn compute_b_constants(
    lc: &ScaledLimitCycle,
    wd: &WronskianData,
) -> Result<FirstOrderConstants> {
    let s0 = 1.0 / lc.rho_omega0;
    let p = lc.resonance.p() as usize;
    let q = lc.resonance.q() as usize;
    let e_b = exp_tilde_f(wd)?.product(&wd.b)?;

    let u0sq = lc.u0.product(&lc.u0)?;
    let cubic = lc.u0.product(&u0sq)?.sub(&lc.u0)?; // u0^3 - u0
    let slope_term = lc.v0.product(&u0sq.scaled(3.0).offset(-1.0))?; // u̇0 (3 u0^2 - 1)

    let k1 = e_b.product(&slope_term)?.scaled(s0);
    let k3 = e_b.product(&cubic)?.scaled(s0);
    let k2 = k3.scaled(s0);

    let order = q * k1.order() + p + 2;
    let sin_tau = FourierSeries::harmonic(1.0 / p as f64, p, Complex64::new(0.0, -0.5), order)?;
    let cos_tau = FourierSeries::harmonic(1.0 / p as f64, p, Complex64::new(0.5, 0.0), order)?;

    let avg = |k: &FourierSeries, trig: &FourierSeries| -> Result<f64> {
        k.embedded(q, order)?.mean_of_product(trig)
    };
    let b11 = avg(&k1, &sin_tau)?;
    let b12 = avg(&k1, &cos_tau)?;
    let b21 = avg(&k2, &sin_tau)?;
    let b22 = avg(&k2, &cos_tau)?;
    // The third block carries cos(tau + tau0); its tau0 expansion swaps the
    // roles of the two raw averages and flips one sign.
    let b31 = avg(&k3, &cos_tau)?;
    let b32 = -avg(&k3, &sin_tau)?;

    let a = compute_a_integral(lc, wd)?;
    Ok(FirstOrderConstants {
        a,
        a_bar: lc.rho * a,
        b11,
        b12,
        b21,
        b22,
        b31,
        b32,
        d1: -(b11 + b21 + b31),
        d2: -(b12 + b22 + b32),
    })
}

/// `eps1(tau0) = (D1 cos tau0 + D2 sin tau0) / A`.
pub fn epsilon1(fc: &FirstOrderConstants, tau0: f64) -> Result<f64> {
    if fc.a.abs() < 1e-12 {
        return Err(Error::Compatibility(
            "solvability constant A vanished; this contradicts the closed form".into(),
        ));
    }
    Ok((fc.d1 * tau0.cos() + fc.d2 * tau0.sin()) / fc.a)
}

/// Drive factor `sin(tau + tau0)` as a single-harmonic series on base `1/p`.
pub(crate) fn drive_sin(tau0: f64, p: usize, order: usize) -> FourierSeries {
    let c = Complex64::new(0.5 * tau0.sin(), -0.5 * tau0.cos());
    FourierSeries::harmonic(1.0 / p as f64, p, c, order).expect("drive harmonic")
}

/// Drive factor `cos(tau + tau0)`.
pub(crate) fn drive_cos(tau0: f64, p: usize, order: usize) -> FourierSeries {
    let c = Complex64::new(0.5 * tau0.cos(), 0.5 * tau0.sin());
    FourierSeries::harmonic(1.0 / p as f64, p, c, order).expect("drive harmonic")
}

/// First-order pieces on the common base `1/p`, split as
/// `Psi1 = eps1 * s_term + xi1`.
pub(crate) struct FirstOrderPieces {
    /// `(1 - beta + 3 beta u0^2) u̇0 + 2 k(u0)/(rho Omega0)`, embedded.
    pub s_term: FourierSeries,
    /// Drive part of `Psi1` at the given `tau0`.
    pub xi1: FourierSeries,
    /// `e^{F~} a`, embedded.
    pub e_a: FourierSeries,
    /// `e^{F~} b`, embedded.
    pub e_b: FourierSeries,
    pub order: usize,
}

pub(crate) fn first_order_pieces(
    lc: &ScaledLimitCycle,
    wd: &WronskianData,
    tau0: f64,
) -> Result<FirstOrderPieces> {
    let s0 = 1.0 / lc.rho_omega0;
    let p = lc.resonance.p() as usize;
    let q = lc.resonance.q() as usize;
    let order = q * lc.u0.order() + 2 * p + 4;

    let exp_tf = exp_tilde_f(wd)?;
    let e_a = exp_tf.product(&wd.a)?.embedded(q, order)?;
    let e_b = exp_tf.product(&wd.b)?.embedded(q, order)?;

    let u0sq = lc.u0.product(&lc.u0)?;
    let cubic = lc.u0.product(&u0sq)?.sub(&lc.u0)?;
    let slope_term = lc.v0.product(&u0sq.scaled(3.0).offset(-1.0))?;
    let h_of_u0 = u0sq.scaled(3.0 * lc.beta).offset(1.0 - lc.beta);
    let k_of_u0 = lc
        .u0
        .product(&u0sq)?
        .scaled(lc.beta)
        .add(&lc.u0.scaled(lc.alpha - lc.beta))?;

    let s_term = lc
        .v0
        .product(&h_of_u0)?
        .add(&k_of_u0.scaled(2.0 * s0))?
        .embedded(q, order)?;

    // Xi1 = [s0 u̇0 (3u0^2-1) + s0^2 (u0^3-u0)] sin(tau+tau0)
    //       + s0 (u0^3-u0) cos(tau+tau0).
    let g_sin = slope_term
        .scaled(s0)
        .add(&cubic.scaled(s0 * s0))?
        .embedded(q, order)?;
    let g_cos = cubic.scaled(s0).embedded(q, order)?;
    let xi1 = g_sin
        .product(&drive_sin(tau0, p, order))?
        .add(&g_cos.product(&drive_cos(tau0, p, order))?)?;

    Ok(FirstOrderPieces {
        s_term,
        xi1,
        e_a,
        e_b,
        order,
    })
}

/// Solves the first-order equation at a fixed drive phase: fixes `eps1` so the
/// secular mean vanishes, then assembles the periodic correction
/// `u1 = c a (v̄1 + Q1(0) - Q2 + Q2(0)) + c b Q1` with `v̄1 = 0`.
pub fn compute_u1(
    lc: &ScaledLimitCycle,
    wd: &WronskianData,
    fc: &FirstOrderConstants,
    tau0: f64,
) -> Result<(f64, FourierSeries)> {
    if fc.a.abs() < 1e-12 {
        return Err(Error::Compatibility("solvability constant A vanished".into()));
    }
    let pieces = first_order_pieces(lc, wd, tau0)?;
    let frak_d1 = -pieces.e_b.mean_of_product(&pieces.xi1)?;
    let eps1 = frak_d1 / fc.a;
    let psi1 = pieces.xi1.add(&pieces.s_term.scaled(eps1))?;

    let q0 = pieces.e_b.mean_of_product(&psi1)?;
    if q0.abs() > 1e-8 {
        return Err(Error::Compatibility(format!(
            "secular mean Q0 = {q0:e} did not vanish after fixing eps1"
        )));
    }

    let q = lc.resonance.q() as usize;
    let a_emb = wd.a.embedded(q, pieces.order)?;
    let b_emb = wd.b.embedded(q, pieces.order)?;
    let u1 = assemble_order_correction(
        &pieces.e_a,
        &pieces.e_b,
        &a_emb,
        &b_emb,
        &psi1,
        wd.f0,
        wd.c,
    )?;
    Ok((eps1, u1))
}

/// Shared assembly of the periodic correction at any order, given the order's
/// forcing `psi` with vanishing secular mean.
///
/// The order-k equation reads `L[u_k] = -Psi_k` for the variational operator
/// `L`, so variation of parameters with periodicity imposed gives
/// `u_k = c a (Q1(0) - Q2) + c b Q1` and the phase-origin value
/// `ū_k = c Q1(0)` (with the free constant `v̄_k = 0`).
pub(crate) fn assemble_order_correction(
    e_a: &FourierSeries,
    e_b: &FourierSeries,
    a_emb: &FourierSeries,
    b_emb: &FourierSeries,
    psi: &FourierSeries,
    f0: f64,
    c: f64,
) -> Result<FourierSeries> {
    let p1 = e_a.product(psi)?;
    let (q1, _) = p1.exp_weighted_integral(f0)?;
    let q1_at_zero = q1.eval(0.0);

    let p2 = e_b.product(psi)?;
    // The residual mean is below the secular tolerance; drop it exactly.
    let p2 = p2.offset(-p2.mean());
    let q2 = p2.periodic_antiderivative()?;

    let inner = q2.scaled(-1.0).offset(q1_at_zero);
    Ok(a_emb
        .product(&inner)?
        .add(&b_emb.product(&q1)?)?
        .scaled(c))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::limit_cycle::tests::{shared_cycle, shared_cycle_54};
    use crate::limit_cycle::{rescale_cycle, LimitCycle};
    use crate::linearized::compute_wronskian_data;
    use crate::params::ResonanceRatio;

    pub(crate) fn setup(lc: &LimitCycle, p: u32, q: u32) -> (ScaledLimitCycle, WronskianData) {
        let slc = rescale_cycle(lc, &ResonanceRatio::new(p, q).unwrap()).unwrap();
        let wd = compute_wronskian_data(&slc).unwrap();
        (slc, wd)
    }

    #[test]
    fn integral_and_closed_form_agree() {
        for base in [shared_cycle(), shared_cycle_54()] {
            for (p, q) in [(1, 1), (2, 1)] {
                let (slc, wd) = setup(base, p, q);
                let a_int = compute_a_integral(&slc, &wd).unwrap();
                let a_closed = compute_a_closed(&slc);
                assert!(
                    (a_int - a_closed).abs() < 1e-6 * a_closed.abs(),
                    "alpha={} rho={p}/{q}: {a_int} vs {a_closed}",
                    slc.alpha
                );
                // r1 < 0 makes A positive.
                assert!(a_int > 0.0);
            }
        }
    }

    #[test]
    fn a_bar_is_rho_invariant() {
        let mut bars = Vec::new();
        for p in [1u32, 2, 4] {
            let (slc, wd) = setup(shared_cycle(), p, 1);
            let fc = compute_b_constants(&slc, &wd).unwrap();
            assert!(fc.a.abs() > 1e-12);
            bars.push(fc.a_bar);
        }
        for w in bars.windows(2) {
            assert!(
                (w[0] - w[1]).abs() < 1e-6 * w[0].abs(),
                "a_bar drifted: {bars:?}"
            );
        }
    }

    #[test]
    fn a_scales_like_inverse_rho() {
        let (s1, w1) = setup(shared_cycle(), 1, 1);
        let (s2, w2) = setup(shared_cycle(), 2, 1);
        let a1 = compute_a_integral(&s1, &w1).unwrap();
        let a2 = compute_a_integral(&s2, &w2).unwrap();
        assert!((a2 - 0.5 * a1).abs() < 1e-6 * a1.abs());
    }

    #[test]
    fn paper_constants_at_alpha5_beta4_rho2() {
        let (slc, wd) = setup(shared_cycle_54(), 2, 1);
        let fc = compute_b_constants(&slc, &wd).unwrap();
        let d1_ref = 0.00735;
        let d2_ref = -0.04507;
        assert!(
            (fc.d1 - d1_ref).abs() <= 0.05 * d1_ref.abs(),
            "D1 = {} vs {d1_ref}",
            fc.d1
        );
        assert!(
            (fc.d2 - d2_ref).abs() <= 0.05 * d2_ref.abs(),
            "D2 = {} vs {d2_ref}",
            fc.d2
        );
    }

    #[test]
    fn selection_rule_zeroes_b_off_even_integers() {
        for (p, q) in [(1u32, 1u32), (3, 1), (1, 2), (2, 3), (3, 2)] {
            let (slc, wd) = setup(shared_cycle(), p, q);
            let fc = compute_b_constants(&slc, &wd).unwrap();
            assert!(
                fc.max_abs_b() < 1e-9,
                "rho={p}/{q}: max |B| = {:e}",
                fc.max_abs_b()
            );
        }
        for p in [2u32, 4] {
            let (slc, wd) = setup(shared_cycle(), p, 1);
            let fc = compute_b_constants(&slc, &wd).unwrap();
            assert!(fc.max_abs_b() > 1e-6, "rho={p}: max |B| = {:e}", fc.max_abs_b());
        }
    }

    #[test]
    fn b_relations_from_integration_by_parts() {
        // B21 = -B32/(rho Omega0) and B22 = B31/(rho Omega0): the second and
        // third integrands differ by the factor 1/(rho Omega0) and the trig
        // carrier swap.
        for p in [2u32, 4] {
            for base in [shared_cycle(), shared_cycle_54()] {
                let (slc, wd) = setup(base, p, 1);
                let fc = compute_b_constants(&slc, &wd).unwrap();
                let s0 = 1.0 / slc.rho_omega0;
                let scale = fc.max_abs_b().max(1.0);
                assert!(
                    (fc.b21 + s0 * fc.b32).abs() < 1e-8 * scale,
                    "B21 = {}, -s0 B32 = {}",
                    fc.b21,
                    -s0 * fc.b32
                );
                assert!((fc.b22 - s0 * fc.b31).abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn eps1_matches_the_d_expansion_and_vanishes_off_resonance() {
        let (slc, wd) = setup(shared_cycle(), 2, 1);
        let fc = compute_b_constants(&slc, &wd).unwrap();
        for k in 0..8 {
            let tau0 = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
            let via_d = epsilon1(&fc, tau0).unwrap();
            let (direct, _) = compute_u1(&slc, &wd, &fc, tau0).unwrap();
            assert!(
                (via_d - direct).abs() < 1e-10 * via_d.abs().max(1e-6),
                "tau0={tau0}: {via_d} vs {direct}"
            );
        }
        // Off the even-integer resonances eps1 is identically zero.
        let (slc1, wd1) = setup(shared_cycle(), 1, 1);
        let fc1 = compute_b_constants(&slc1, &wd1).unwrap();
        for k in 0..8 {
            let tau0 = 0.7 * k as f64;
            assert!(epsilon1(&fc1, tau0).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn eps1_amplitude_and_extremes() {
        let (slc, wd) = setup(shared_cycle_54(), 2, 1);
        let fc = compute_b_constants(&slc, &wd).unwrap();
        let amp = fc.d1.hypot(fc.d2) / fc.a.abs();
        let mut max_seen = f64::NEG_INFINITY;
        for k in 0..2048 {
            let tau0 = 2.0 * std::f64::consts::PI * k as f64 / 2048.0;
            max_seen = max_seen.max(epsilon1(&fc, tau0).unwrap());
        }
        assert!((max_seen - amp).abs() < 1e-5 * amp);
        let tau_star = f64::atan2(fc.d2, fc.d1);
        let at_star = epsilon1(&fc, tau_star).unwrap();
        assert!((at_star.abs() - amp).abs() < 1e-12 * amp);
        let opposite = epsilon1(&fc, tau_star + std::f64::consts::PI).unwrap();
        assert!((at_star + opposite).abs() < 1e-12 * amp);
    }

    #[test]
    fn u1_is_periodic_real_and_supported_on_the_resonance_lattice() {
        let (slc, wd) = setup(shared_cycle(), 2, 1);
        let fc = compute_b_constants(&slc, &wd).unwrap();
        let (_, u1) = compute_u1(&slc, &wd, &fc, 0.9).unwrap();
        let p = slc.resonance.p() as i64;
        let q = slc.resonance.q() as i64;
        let period = 2.0 * std::f64::consts::PI * p as f64;
        assert!((u1.eval(0.0) - u1.eval(period)).abs() < 1e-9 * u1.amplitude().max(1.0));
        // Support: nu = q nu' + p sigma with nu' odd, |sigma| <= 1.
        let n = u1.order() as i64;
        let floor = 1e-12 * u1.amplitude();
        for nu in -n..=n {
            if u1.coeff(nu).norm() <= floor {
                continue;
            }
            let mut allowed = false;
            for sigma in -1i64..=1 {
                let rem = nu - p * sigma;
                if rem.rem_euclid(q) == 0 && (rem / q).rem_euclid(2) != 0 {
                    allowed = true;
                }
            }
            assert!(
                allowed,
                "unexpected harmonic {nu} with |c| = {:e}",
                u1.coeff(nu).norm()
            );
        }
    }
}
