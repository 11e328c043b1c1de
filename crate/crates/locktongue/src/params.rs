//! Circuit and dimensionless model parameters, and the resonance ratio p:q.
//!
//! The physical circuit (an LC tank with a nonlinear resistor and a sinusoidal
//! injection) reduces to four dimensionless numbers: alpha and beta set the
//! unperturbed oscillator, mu is the drive amplitude and omega the drive
//! frequency in scaled time.

use crate::error::{Error, Result};

/// Physical parameters of the injection-locked divider circuit.
///
/// `u' = alpha v + (beta + mu sin omega t) u (1 - u^2)`, `v' = -u - v` after
/// normalising voltages by `v_dd` and time by `L/R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Inductance (H).
    pub inductance: f64,
    /// Capacitance (F).
    pub capacitance: f64,
    /// Series resistance (Ohm).
    pub resistance: f64,
    /// Small-signal gain of the nonlinear resistor characteristic.
    pub gain: f64,
    /// Injection amplitude; may be zero or negative.
    pub drive_amplitude: f64,
    /// Supply voltage (V).
    pub v_dd: f64,
    /// Injection frequency (rad/s).
    pub drive_frequency: f64,
}

impl CircuitParams {
    pub fn new(
        inductance: f64,
        capacitance: f64,
        resistance: f64,
        gain: f64,
        drive_amplitude: f64,
        v_dd: f64,
        drive_frequency: f64,
    ) -> Result<Self> {
        let fields = [
            ("inductance", inductance),
            ("capacitance", capacitance),
            ("resistance", resistance),
            ("gain", gain),
            ("drive_amplitude", drive_amplitude),
            ("v_dd", v_dd),
            ("drive_frequency", drive_frequency),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        for (name, value) in [
            ("inductance", inductance),
            ("capacitance", capacitance),
            ("resistance", resistance),
            ("gain", gain),
            ("v_dd", v_dd),
        ] {
            if value <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        Ok(Self {
            inductance,
            capacitance,
            resistance,
            gain,
            drive_amplitude,
            v_dd,
            drive_frequency,
        })
    }
}

/// Dimensionless parameters of the model equation.
///
/// A unique attracting limit cycle of the unperturbed system requires
/// `alpha > beta > 1`; construction does not enforce that so the conversion
/// from circuit values can be inspected first. Call
/// [`DimensionlessParams::require_limit_cycle_regime`] before solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessParams {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub omega: f64,
}

impl DimensionlessParams {
    pub fn new(alpha: f64, beta: f64, mu: f64, omega: f64) -> Result<Self> {
        for (name, value) in [
            ("alpha", alpha),
            ("beta", beta),
            ("mu", mu),
            ("omega", omega),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        Ok(Self {
            alpha,
            beta,
            mu,
            omega,
        })
    }

    /// Errors unless `alpha > beta > 1`.
    pub fn require_limit_cycle_regime(&self) -> Result<()> {
        if !(self.alpha > self.beta && self.beta > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "limit cycle requires alpha > beta > 1, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// Damping coefficient `h(u) = 1 - beta + 3 beta u^2`.
    pub fn damping(&self, u: f64) -> f64 {
        1.0 - self.beta + 3.0 * self.beta * u * u
    }

    /// Restoring force `k(u) = (alpha - beta) u + beta u^3`.
    pub fn restoring(&self, u: f64) -> f64 {
        (self.alpha - self.beta) * u + self.beta * u * u * u
    }

    /// Time-dependent coefficient `Phi(t) = beta + mu sin(omega t)`.
    pub fn phi(&self, t: f64) -> f64 {
        self.beta + self.mu * (self.omega * t).sin()
    }
}

/// Reduce circuit values: `alpha = L/(R^2 C)`, `beta = L A/(R C)`,
/// `mu = L B/(R C)`, `omega = Omega L/R`.
pub fn circuit_to_dimensionless(cp: &CircuitParams) -> Result<DimensionlessParams> {
    let CircuitParams {
        inductance: l,
        capacitance: c,
        resistance: r,
        gain: a,
        drive_amplitude: b,
        drive_frequency: omega_drive,
        ..
    } = *cp;
    DimensionlessParams::new(
        l / (r * r * c),
        l * a / (r * c),
        l * b / (r * c),
        omega_drive * l / r,
    )
}

/// Resonance `p:q` with `rho = p/q` kept as an exact pair of coprime integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResonanceRatio {
    p: u32,
    q: u32,
}

impl ResonanceRatio {
    /// Requires `p, q >= 1` and `gcd(p, q) = 1`.
    pub fn new(p: u32, q: u32) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidParameter(
                "resonance requires p, q >= 1".into(),
            ));
        }
        if gcd(p, q) != 1 {
            return Err(Error::InvalidParameter(format!(
                "resonance {p}:{q} is not in lowest terms"
            )));
        }
        Ok(Self { p, q })
    }

    /// Builds the ratio after dividing out the common factor.
    pub fn reduced(p: u32, q: u32) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidParameter(
                "resonance requires p, q >= 1".into(),
            ));
        }
        let g = gcd(p, q);
        Self::new(p / g, q / g)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn rho(&self) -> f64 {
        f64::from(self.p) / f64::from(self.q)
    }

    /// True when rho is an even integer, the only case with first-order tongues.
    pub fn is_even_integer(&self) -> bool {
        self.q == 1 && self.p % 2 == 0
    }
}

impl std::fmt::Display for ResonanceRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.p, self.q)
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_matches_defining_formulas() {
        let cp = CircuitParams::new(1.0, 1.0, 1.0, 2.0, 0.0, 1.0, 3.0).unwrap();
        let dp = circuit_to_dimensionless(&cp).unwrap();
        assert_eq!(dp.alpha, 1.0);
        assert_eq!(dp.beta, 2.0);
        assert_eq!(dp.mu, 0.0);
        assert_eq!(dp.omega, 3.0);
    }

    #[test]
    fn zero_drive_amplitude_gives_zero_mu() {
        for (l, c, r) in [(1.0, 1.0, 1.0), (2.0, 0.25, 3.0), (0.7, 5.0, 0.2)] {
            let cp = CircuitParams::new(l, c, r, 1.0, 0.0, 1.0, 1.0).unwrap();
            assert_eq!(circuit_to_dimensionless(&cp).unwrap().mu, 0.0);
        }
    }

    #[test]
    fn conversion_can_leave_the_limit_cycle_regime() {
        let cp = CircuitParams::new(2.0, 0.5, 1.0, 1.25, 0.05, 1.0, 1.0).unwrap();
        let dp = circuit_to_dimensionless(&cp).unwrap();
        assert!((dp.alpha - 4.0).abs() < 1e-15);
        assert!((dp.beta - 5.0).abs() < 1e-15);
        assert!((dp.mu - 0.2).abs() < 1e-15);
        assert!((dp.omega - 2.0).abs() < 1e-15);
        assert!(dp.require_limit_cycle_regime().is_err());
    }

    #[test]
    fn non_finite_circuit_values_rejected() {
        assert!(CircuitParams::new(f64::NAN, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(CircuitParams::new(1.0, 1.0, -1.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(DimensionlessParams::new(1.0, f64::INFINITY, 0.0, 1.0).is_err());
    }

    #[test]
    fn resonance_requires_lowest_terms() {
        assert!(ResonanceRatio::new(4, 2).is_err());
        assert!(ResonanceRatio::new(0, 1).is_err());
        let r = ResonanceRatio::reduced(4, 2).unwrap();
        assert_eq!((r.p(), r.q()), (2, 1));
        assert!(r.is_even_integer());
        assert!(!ResonanceRatio::new(3, 1).unwrap().is_even_integer());
        assert!(!ResonanceRatio::new(2, 3).unwrap().is_even_integer());
        assert!((ResonanceRatio::new(2, 3).unwrap().rho() - 2.0 / 3.0).abs() < 1e-16);
    }
}
