//! Truncated complex Fourier series of real signals, with the arithmetic the
//! perturbation machinery needs: products, derivatives, antiderivatives, the
//! exponential-weighted integral, parity bookkeeping and CSV round-trips.
//!
//! A series holds coefficients `c_nu` for `nu in [-N, N]` on a fixed base
//! frequency; the represented signal is `sum_nu c_nu exp(i nu w tau)`. The
//! real-signal condition `c_{-nu} = conj(c_nu)` is enforced structurally at
//! construction, so it holds exactly for every series in circulation.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance for comparing base frequencies built through different
/// arithmetic paths (q/p vs 1/p scalings).
const BASE_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    base: f64,
    /// Length `2 * order + 1`; index `i` holds the coefficient of harmonic
    /// `nu = i - order`.
    coeffs: Vec<Complex64>,
}

/// Power split of a series by harmonic parity; `nu = 0` counts as even.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicParity {
    pub odd_power: f64,
    pub even_power: f64,
    pub total_power: f64,
}

impl HarmonicParity {
    /// Even power over total power, 0 for an empty series.
    pub fn even_fraction(&self) -> f64 {
        if self.total_power > 0.0 {
            self.even_power / self.total_power
        } else {
            0.0
        }
    }

    pub fn odd_fraction(&self) -> f64 {
        if self.total_power > 0.0 {
            self.odd_power / self.total_power
        } else {
            0.0
        }
    }
}

impl FourierSeries {
    /// Builds a series from raw coefficients (length `2N + 1`, harmonic order
    /// `-N..=N`), symmetrising so the real-signal condition holds exactly.
    pub fn new(base: f64, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if !(base.is_finite() && base > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "base frequency must be finite and positive, got {base}"
            )));
        }
        if coeffs.is_empty() || coeffs.len() % 2 == 0 {
            return Err(Error::InvalidParameter(
                "coefficient vector must have odd length 2N + 1".into(),
            ));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidParameter(
                "non-finite Fourier coefficient".into(),
            ));
        }
        let n = coeffs.len() / 2;
        coeffs[n].im = 0.0;
        for nu in 1..=n {
            let avg = 0.5 * (coeffs[n + nu] + coeffs[n - nu].conj());
            coeffs[n + nu] = avg;
            coeffs[n - nu] = avg.conj();
        }
        Ok(Self { base, coeffs })
    }

    pub fn zero(base: f64, order: usize) -> Self {
        Self::new(base, vec![Complex64::new(0.0, 0.0); 2 * order + 1])
            .expect("zero series construction")
    }

    pub fn constant(base: f64, value: f64, order: usize) -> Self {
        let mut s = Self::zero(base, order);
        s.coeffs[order] = Complex64::new(value, 0.0);
        s
    }

    /// Single harmonic pair: coefficient `c` at `+nu` and its conjugate at `-nu`.
    pub fn harmonic(base: f64, nu: usize, c: Complex64, order: usize) -> Result<Self> {
        if nu > order {
            return Err(Error::InvalidParameter(format!(
                "harmonic index {nu} exceeds order {order}"
            )));
        }
        let mut s = Self::zero(base, order);
        if nu == 0 {
            s.coeffs[order] = Complex64::new(c.re, 0.0);
        } else {
            s.coeffs[order + nu] = c;
            s.coeffs[order - nu] = c.conj();
        }
        Ok(s)
    }

    /// Extracts coefficients from uniform samples of one period starting at
    /// `tau = 0`. Needs `samples.len() >= 2 * order + 1` to avoid aliasing of
    /// the resolved harmonics.
    pub fn from_samples(base: f64, order: usize, samples: &[f64]) -> Result<Self> {
        let m = samples.len();
        if m < 2 * order + 1 {
            return Err(Error::InvalidParameter(format!(
                "need at least {} samples to resolve order {order}, got {m}",
                2 * order + 1
            )));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * order + 1];
        let step = -2.0 * std::f64::consts::PI / m as f64;
        for nu in 0..=order {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in samples.iter().enumerate() {
                let phase = step * (nu * j % m) as f64;
                acc += x * Complex64::new(phase.cos(), phase.sin());
            }
            acc /= m as f64;
            coeffs[order + nu] = acc;
            coeffs[order - nu] = acc.conj();
        }
        Self::new(base, coeffs)
    }

    /// Samples `f` on a `4 * order` grid over one period and transforms.
    pub fn from_fn(base: f64, order: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let m = (4 * order).max(8);
        let period = 2.0 * std::f64::consts::PI / base;
        let samples: Vec<f64> = (0..m).map(|j| f(period * j as f64 / m as f64)).collect();
        Self::from_samples(base, order, &samples)
    }

    pub fn base_frequency(&self) -> f64 {
        self.base
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.base
    }

    /// Coefficient of harmonic `nu`, zero outside the stored band.
    pub fn coeff(&self, nu: i64) -> Complex64 {
        let n = self.order() as i64;
        if nu < -n || nu > n {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(nu + n) as usize]
        }
    }

    pub(crate) fn set_coeff(&mut self, nu: i64, c: Complex64) {
        let n = self.order() as i64;
        debug_assert!(nu.abs() <= n);
        self.coeffs[(nu + n) as usize] = c;
        if nu != 0 {
            self.coeffs[(-nu + n) as usize] = c.conj();
        } else {
            self.coeffs[n as usize].im = 0.0;
        }
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[self.order()].re
    }

    /// Evaluates the series at `tau`. Reality is structural, so the value is
    /// assembled from the real form and carries no imaginary dust.
    pub fn eval(&self, tau: f64) -> f64 {
        let n = self.order();
        let mut acc = self.coeffs[n].re;
        for nu in 1..=n {
            let c = self.coeffs[n + nu];
            let (s, co) = (nu as f64 * self.base * tau).sin_cos();
            acc += 2.0 * (c.re * co - c.im * s);
        }
        acc
    }

    /// Largest coefficient magnitude, a natural amplitude scale.
    pub fn amplitude(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Total power `sum |c_nu|^2`.
    pub fn total_power(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Power at the truncation edge relative to total power; the tail check
    /// guarding truncation adequacy.
    pub fn tail_power_fraction(&self) -> f64 {
        let n = self.order();
        let tail = self.coeffs[0].norm_sqr() + self.coeffs[2 * n].norm_sqr();
        let total = self.total_power();
        if total > 0.0 {
            tail / total
        } else {
            0.0
        }
    }

    /// Splits power by harmonic parity (`nu = 0` counts as even).
    pub fn parity(&self) -> HarmonicParity {
        let n = self.order() as i64;
        let mut odd = 0.0;
        let mut even = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let nu = i as i64 - n;
            if nu.rem_euclid(2) == 0 {
                even += c.norm_sqr();
            } else {
                odd += c.norm_sqr();
            }
        }
        HarmonicParity {
            odd_power: odd,
            even_power: even,
            total_power: odd + even,
        }
    }

    fn check_base(&self, other: &Self) -> Result<()> {
        let scale = self.base.abs().max(other.base.abs());
        if (self.base - other.base).abs() > BASE_MATCH_TOL * scale {
            return Err(Error::BaseMismatch {
                left: self.base,
                right: other.base,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_base(other)?;
        let n = self.order().max(other.order());
        let mut out = Self::zero(self.base, n);
        for nu in -(n as i64)..=(n as i64) {
            let i = (nu + n as i64) as usize;
            out.coeffs[i] = self.coeff(nu) + other.coeff(nu);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= factor;
        }
        out
    }

    /// Adds a constant to the signal (shifts the mean).
    pub fn offset(&self, value: f64) -> Self {
        let mut out = self.clone();
        let n = out.order();
        out.coeffs[n].re += value;
        out
    }

    /// Coefficient convolution truncated to `max(N_a, N_b) + headroom`.
    pub fn product_with_headroom(&self, other: &Self, headroom: usize) -> Result<Self> {
        self.check_base(other)?;
        let na = self.order() as i64;
        let nb = other.order() as i64;
        let n_out = (na.max(nb) + headroom as i64) as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n_out + 1];
        for nu in 0..=n_out as i64 {
            let mut acc = Complex64::new(0.0, 0.0);
            let lo = (-na).max(nu - nb);
            let hi = na.min(nu + nb);
            let mut k = lo;
            while k <= hi {
                acc += self.coeffs[(k + na) as usize] * other.coeffs[(nu - k + nb) as usize];
                k += 1;
            }
            coeffs[(nu + n_out as i64) as usize] = acc;
            coeffs[(n_out as i64 - nu) as usize] = acc.conj();
        }
        Self::new(self.base, coeffs)
    }

    /// Pointwise product as a series, truncated to the larger input order.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.product_with_headroom(other, 0)
    }

    /// Mean of the pointwise product, computed exactly from coefficients as
    /// `sum_nu a_nu b_{-nu}` (no truncation loss).
    pub fn mean_of_product(&self, other: &Self) -> Result<f64> {
        self.check_base(other)?;
        let n = self.order().min(other.order()) as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for nu in -n..=n {
            acc += self.coeff(nu) * other.coeff(-nu);
        }
        Ok(acc.re)
    }

    /// Term-by-term derivative: `c'_nu = i nu w c_nu`.
    pub fn derivative(&self) -> Self {
        let n = self.order() as i64;
        let mut out = self.clone();
        for nu in -n..=n {
            let i = (nu + n) as usize;
            out.coeffs[i] *= Complex64::new(0.0, nu as f64 * self.base);
        }
        out
    }

    /// Antiderivative of a mean-free series, anchored so the result vanishes
    /// at `tau = 0`. Errors if the mean is large enough to produce a secular
    /// term.
    pub fn periodic_antiderivative(&self) -> Result<Self> {
        let scale = self.amplitude().max(1e-300);
        if self.mean().abs() > 1e-8 * scale.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "periodic antiderivative requires a mean-free series, mean = {:e}",
                self.mean()
            )));
        }
        let n = self.order() as i64;
        let mut out = self.clone();
        for nu in -n..=n {
            let i = (nu + n) as usize;
            if nu == 0 {
                out.coeffs[i] = Complex64::new(0.0, 0.0);
            } else {
                out.coeffs[i] /= Complex64::new(0.0, nu as f64 * self.base);
            }
        }
        let at_zero = out.eval(0.0);
        out.coeffs[n as usize].re = -at_zero;
        Ok(out)
    }

    /// Periodic part of the exponential-weighted integral: returns `(Q, D)`
    /// with `Q_nu = P_nu / (C + i w nu)` and `D = -Q(0)`, so that
    /// `int_0^tau e^{C s} P(s) ds = D + e^{C tau} Q(tau)`.
    pub fn exp_weighted_integral(&self, c: f64) -> Result<(Self, f64)> {
        if c == 0.0 {
            return Err(Error::SecularTerm);
        }
        if !c.is_finite() {
            return Err(Error::InvalidParameter("weight C must be finite".into()));
        }
        let n = self.order() as i64;
        let mut q = self.clone();
        for nu in -n..=n {
            let i = (nu + n) as usize;
            q.coeffs[i] /= Complex64::new(c, nu as f64 * self.base);
        }
        let d = -q.eval(0.0);
        Ok((q, d))
    }

    /// Same coefficients on a different base frequency (a pure change of the
    /// time variable).
    pub fn with_base(&self, base: f64) -> Result<Self> {
        Self::new(base, self.coeffs.clone())
    }

    /// Re-indexes harmonic `nu` to `nu * multiplier` on base `base/multiplier`,
    /// representing the same signal on a longer fundamental period. The result
    /// is truncated or padded to `new_order`.
    pub fn embedded(&self, multiplier: usize, new_order: usize) -> Result<Self> {
        if multiplier == 0 {
            return Err(Error::InvalidParameter("multiplier must be >= 1".into()));
        }
        let mut out = Self::zero(self.base / multiplier as f64, new_order);
        let n = self.order() as i64;
        for nu in -n..=n {
            let target = nu * multiplier as i64;
            if target.unsigned_abs() as usize <= new_order {
                out.coeffs[(target + new_order as i64) as usize] = self.coeff(nu);
            }
        }
        Ok(out)
    }

    /// Truncates or zero-pads to the requested order.
    pub fn resized(&self, new_order: usize) -> Self {
        let mut out = Self::zero(self.base, new_order);
        let keep = self.order().min(new_order) as i64;
        for nu in -keep..=keep {
            out.coeffs[(nu + new_order as i64) as usize] = self.coeff(nu);
        }
        out
    }

    /// Drops trailing harmonics whose magnitude is below `rel_tol` times the
    /// amplitude; keeps at least order 1.
    pub fn trimmed(&self, rel_tol: f64) -> Self {
        let floor = self.amplitude() * rel_tol;
        let mut keep = 1usize;
        for nu in (1..=self.order()).rev() {
            if self.coeff(nu as i64).norm() > floor {
                keep = nu;
                break;
            }
        }
        self.resized(keep.min(self.order()))
    }

    /// Samples the series, applies `f` pointwise, and re-extracts coefficients
    /// at the requested order (used for `exp(F~)`).
    pub fn map_pointwise(&self, new_order: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(self.base, new_order, |tau| f(self.eval(tau)))
    }

    /// CSV serialisation: one `#` header line, then `nu,re,im` rows.
    pub fn to_csv(&self) -> String {
        let n = self.order() as i64;
        let mut out = format!("# base_frequency={:e} N={}\n", self.base, self.order());
        for nu in -n..=n {
            let c = self.coeff(nu);
            out.push_str(&format!("{},{:e},{:e}\n", nu, c.re, c.im));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut base = None;
        let mut order = None;
        let mut rows: Vec<(i64, Complex64)> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for token in rest.split_whitespace() {
                    if let Some(v) = token.strip_prefix("base_frequency=") {
                        base = Some(v.parse::<f64>().map_err(|e| {
                            Error::Parse(format!("bad base_frequency {v:?}: {e}"))
                        })?);
                    } else if let Some(v) = token.strip_prefix("N=") {
                        order = Some(
                            v.parse::<usize>()
                                .map_err(|e| Error::Parse(format!("bad N {v:?}: {e}")))?,
                        );
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("expected nu,re,im row, got {line:?}")));
            }
            let nu = fields[0]
                .parse::<i64>()
                .map_err(|e| Error::Parse(format!("bad harmonic index {:?}: {e}", fields[0])))?;
            let re = fields[1]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad re value {:?}: {e}", fields[1])))?;
            let im = fields[2]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad im value {:?}: {e}", fields[2])))?;
            rows.push((nu, Complex64::new(re, im)));
        }
        let base = base.ok_or_else(|| Error::Parse("missing base_frequency header".into()))?;
        let order = match order {
            Some(n) => n,
            None => rows.iter().map(|(nu, _)| nu.unsigned_abs() as usize).max().unwrap_or(0),
        };
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * order + 1];
        for (nu, c) in rows {
            if nu.unsigned_abs() as usize > order {
                return Err(Error::Parse(format!("harmonic {nu} outside declared N={order}")));
            }
            coeffs[(nu + order as i64) as usize] = c;
        }
        Self::new(base, coeffs)
    }
}
