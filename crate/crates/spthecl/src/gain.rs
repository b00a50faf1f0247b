//! Dynamic-gain laws and their time-scale transformations.
//!
//! A gain law is the pair (ell, upsilon) selecting one member of the family of
//! gain ODEs `dmu/dt = F(mu)`:
//!
//! ```text
//! ell = 1:        F(mu) = mu / upsilon                      (exponential growth)
//! 1 < ell < inf:  F(mu) = (ell/(ell-1)) mu^(2-1/ell) / upsilon
//! ell = inf:      F(mu) = mu^2 / upsilon                    (finite-time blow-up)
//! ```
//!
//! For `ell > 1` the solution escapes to infinity at the blow-up time
//! `T = upsilon * mu0^((1-ell)/ell)`, which is the user-prescribed convergence
//! deadline of the estimator. The dilation `D_c` maps `[0, T)` onto the whole
//! half-line, and satisfies the matching equation `dD_c/dt = mu_hat(D_c(t))`,
//! where `mu_hat` is the gain expressed in dilated time
//! (`dmu_hat/ds = F(mu_hat)/mu_hat`). Equivalently `dD_c/dt = mu(t)`: the
//! dilated clock runs `mu` times faster than the real one. All closed forms
//! below are analytic solutions of these ODEs.
//!
//! A fourth, degenerate variant freezes the gain at `mu = mu0` (rate zero,
//! dilation `D_c(t) = c t`). It exists so that the classical constant-gain
//! estimator runs through the exact same pipeline as the dynamic-gain ones.

use thiserror::Error;

/// Relative guard band around the blow-up time: operations reject times within
/// `GUARD * T` of `T`, since the closed forms lose all precision there and any
/// sane run stops earlier anyway.
pub const BLOW_UP_GUARD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GainError {
    #[error("gain exponent must satisfy ell >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("upsilon must be positive and finite, got {0}")]
    InvalidUpsilon(f64),
    #[error("dynamic gain must be finite and >= 1, got {0}")]
    GainOutOfRange(f64),
    #[error("initial gain must be finite and >= 1, got {0}")]
    InvalidInitialGain(f64),
    #[error("scale parameter c must be finite and >= 1, got {0}")]
    InvalidScale(f64),
    #[error("time {t} outside the admissible window [0, {limit})")]
    TimeOutOfDomain { t: f64, limit: f64 },
    #[error("dilated time must be finite and >= 0, got {0}")]
    DilatedTimeOutOfDomain(f64),
    #[error("gain state must satisfy mu >= mu0 >= 1, got mu={mu}, mu0={mu0}")]
    InvalidGainState { mu: f64, mu0: f64 },
}

/// The exponent parameter of a gain law. `Infinite` is a distinguished variant
/// rather than a large float so the exact closed forms apply without overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainExponent {
    /// Constant gain `mu = mu0`; degenerate baseline variant.
    Frozen,
    /// `ell` in `[1, inf)`. `Finite(1.0)` is the exponentially growing gain.
    Finite(f64),
    /// `ell = inf`, the prescribed-time gain `mu^2 / upsilon`.
    Infinite,
}

/// A member of the dynamic-gain family: exponent `ell` plus time constant
/// `upsilon` (time units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainLaw {
    ell: GainExponent,
    upsilon: f64,
}

/// `base^expo`, routed through `exp(expo * ln(base))` for large exponents so
/// blow-up-adjacent evaluations stay in log space.
#[inline]
fn powl(base: f64, expo: f64) -> f64 {
    if expo.abs() > 10.0 {
        (expo * base.ln()).exp()
    } else {
        base.powf(expo)
    }
}

#[allow(clippy::redundant_guards)] // `l == 1.0` guards read clearer than float-literal patterns
impl GainLaw {
    /// Gain law with finite exponent `ell >= 1`.
    pub fn new(ell: f64, upsilon: f64) -> Result<Self, GainError> {
        if !ell.is_finite() || ell < 1.0 {
            return Err(GainError::InvalidExponent(ell));
        }
        Self::with_exponent(GainExponent::Finite(ell), upsilon)
    }

    /// The exponential-gain law (`ell = 1`): hyperexponential estimation.
    pub fn exponential(upsilon: f64) -> Result<Self, GainError> {
        Self::with_exponent(GainExponent::Finite(1.0), upsilon)
    }

    /// The `ell = inf` law: prescribed-time estimation.
    pub fn prescribed_time(upsilon: f64) -> Result<Self, GainError> {
        Self::with_exponent(GainExponent::Infinite, upsilon)
    }

    /// Frozen gain (`mu = mu0` forever): the classical constant-gain baseline.
    pub fn frozen() -> Self {
        GainLaw {
            ell: GainExponent::Frozen,
            upsilon: 1.0,
        }
    }

    pub fn with_exponent(ell: GainExponent, upsilon: f64) -> Result<Self, GainError> {
        if !upsilon.is_finite() || upsilon <= 0.0 {
            return Err(GainError::InvalidUpsilon(upsilon));
        }
        if let GainExponent::Finite(l) = ell {
            if !l.is_finite() || l < 1.0 {
                return Err(GainError::InvalidExponent(l));
            }
        }
        Ok(GainLaw { ell, upsilon })
    }

    pub fn exponent(&self) -> GainExponent {
        self.ell
    }

    pub fn upsilon(&self) -> f64 {
        self.upsilon
    }

    pub fn is_frozen(&self) -> bool {
        matches!(self.ell, GainExponent::Frozen)
    }

    /// True when solutions escape in finite time (`ell > 1`).
    pub fn has_finite_blow_up(&self) -> bool {
        match self.ell {
            GainExponent::Frozen => false,
            GainExponent::Finite(l) => l > 1.0,
            GainExponent::Infinite => true,
        }
    }

    fn check_mu(mu: f64) -> Result<(), GainError> {
        if !mu.is_finite() || mu < 1.0 {
            return Err(GainError::GainOutOfRange(mu));
        }
        Ok(())
    }

    fn check_scale(c: f64) -> Result<(), GainError> {
        if !c.is_finite() || c < 1.0 {
            return Err(GainError::InvalidScale(c));
        }
        Ok(())
    }

    /// Rejects `t` outside `[0, T)` (with the guard band below `T`).
    fn check_time(&self, c: f64, t: f64) -> Result<(), GainError> {
        let limit = self.blow_up_time(c);
        let guard = if limit.is_finite() {
            limit * (1.0 - BLOW_UP_GUARD)
        } else {
            f64::INFINITY
        };
        if !t.is_finite() || t < 0.0 || t > guard {
            return Err(GainError::TimeOutOfDomain { t, limit });
        }
        Ok(())
    }

    /// Right-hand side `F(mu)` of the gain ODE.
    pub fn rate(&self, mu: f64) -> Result<f64, GainError> {
        Self::check_mu(mu)?;
        Ok(match self.ell {
            GainExponent::Frozen => 0.0,
            GainExponent::Finite(l) if l == 1.0 => mu / self.upsilon,
            GainExponent::Finite(l) => l / (l - 1.0) * powl(mu, 2.0 - 1.0 / l) / self.upsilon,
            GainExponent::Infinite => mu * mu / self.upsilon,
        })
    }

    /// Right-hand side `F(mu_hat)/mu_hat` of the gain ODE in dilated time.
    pub fn dilated_rate(&self, mu_hat: f64) -> Result<f64, GainError> {
        Self::check_mu(mu_hat)?;
        Ok(match self.ell {
            GainExponent::Frozen => 0.0,
            GainExponent::Finite(l) if l == 1.0 => 1.0 / self.upsilon,
            GainExponent::Finite(l) => l / (l - 1.0) * powl(mu_hat, 1.0 - 1.0 / l) / self.upsilon,
            GainExponent::Infinite => mu_hat / self.upsilon,
        })
    }

    /// Escape time of the solution started at `mu0` (infinite for `ell = 1`
    /// and for the frozen variant).
    pub fn blow_up_time(&self, mu0: f64) -> f64 {
        match self.ell {
            GainExponent::Frozen => f64::INFINITY,
            GainExponent::Finite(l) if l == 1.0 => f64::INFINITY,
            GainExponent::Finite(l) => self.upsilon * powl(mu0, (1.0 - l) / l),
            GainExponent::Infinite => self.upsilon / mu0,
        }
    }

    /// Closed-form solution `mu(t)` of the gain ODE from `mu0`.
    pub fn solution(&self, mu0: f64, t: f64) -> Result<f64, GainError> {
        if !mu0.is_finite() || mu0 < 1.0 {
            return Err(GainError::InvalidInitialGain(mu0));
        }
        self.check_time(mu0, t)?;
        let u = self.upsilon;
        Ok(match self.ell {
            GainExponent::Frozen => mu0,
            GainExponent::Finite(l) if l == 1.0 => mu0 * (t / u).exp(),
            GainExponent::Finite(l) => {
                let blow_up = self.blow_up_time(mu0);
                powl(u / (blow_up - t), l / (l - 1.0))
            }
            GainExponent::Infinite => {
                let blow_up = self.blow_up_time(mu0);
                u / (blow_up - t)
            }
        })
    }

    /// Closed-form solution `mu_hat(s)` of the dilated gain ODE from `mu0`.
    /// Complete for every law: the dilated gain never escapes in finite time.
    pub fn dilated_solution(&self, mu0: f64, s: f64) -> Result<f64, GainError> {
        if !mu0.is_finite() || mu0 < 1.0 {
            return Err(GainError::InvalidInitialGain(mu0));
        }
        if !s.is_finite() || s < 0.0 {
            return Err(GainError::DilatedTimeOutOfDomain(s));
        }
        let u = self.upsilon;
        Ok(match self.ell {
            GainExponent::Frozen => mu0,
            GainExponent::Finite(l) if l == 1.0 => mu0 + s / u,
            GainExponent::Finite(l) => powl(powl(mu0, 1.0 / l) + s / ((l - 1.0) * u), l),
            GainExponent::Infinite => mu0 * (s / u).exp(),
        })
    }

    /// Dilated time `s = D_c(t)`: strictly increasing, `D_c(0) = 0`, and
    /// `s -> inf` as `t` approaches the blow-up time of the law started at `c`.
    pub fn dilate(&self, c: f64, t: f64) -> Result<f64, GainError> {
        Self::check_scale(c)?;
        self.check_time(c, t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let u = self.upsilon;
        Ok(match self.ell {
            GainExponent::Frozen => c * t,
            GainExponent::Finite(l) if l == 1.0 => c * u * (t / u).exp_m1(),
            GainExponent::Finite(l) => {
                let blow_up = self.blow_up_time(c);
                (l - 1.0) * u * (powl(u / (blow_up - t), 1.0 / (l - 1.0)) - powl(c, 1.0 / l))
            }
            GainExponent::Infinite => -u * (-c * t / u).ln_1p(),
        })
    }

    /// Real time `t = D_c^{-1}(s)`; inverse of [`GainLaw::dilate`].
    pub fn contract(&self, c: f64, s: f64) -> Result<f64, GainError> {
        Self::check_scale(c)?;
        if !s.is_finite() || s < 0.0 {
            return Err(GainError::DilatedTimeOutOfDomain(s));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let u = self.upsilon;
        Ok(match self.ell {
            GainExponent::Frozen => s / c,
            GainExponent::Finite(l) if l == 1.0 => u * (s / (c * u)).ln_1p(),
            GainExponent::Finite(l) => {
                let blow_up = self.blow_up_time(c);
                blow_up - u * powl(s / ((l - 1.0) * u) + powl(c, 1.0 / l), 1.0 - l)
            }
            GainExponent::Infinite => u / c * (-(-s / u).exp_m1()),
        })
    }
}

/// Dynamic gain along a flow: current value plus the initial value it grew
/// from. Gains are nondecreasing, so `mu >= mu0 >= 1` always.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainState {
    mu0: f64,
    mu: f64,
}

impl GainState {
    pub fn new(mu0: f64) -> Result<Self, GainError> {
        if !mu0.is_finite() || mu0 < 1.0 {
            return Err(GainError::InvalidInitialGain(mu0));
        }
        Ok(GainState { mu0, mu: mu0 })
    }

    pub fn with_value(mu0: f64, mu: f64) -> Result<Self, GainError> {
        if !mu0.is_finite() || mu0 < 1.0 || !mu.is_finite() || mu < mu0 {
            return Err(GainError::InvalidGainState { mu, mu0 });
        }
        Ok(GainState { mu0, mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    /// State after flowing for `t` real-time units under `law`.
    pub fn flowed(&self, law: &GainLaw, t: f64) -> Result<Self, GainError> {
        Ok(GainState {
            mu0: self.mu0,
            mu: law.solution(self.mu0, t)?,
        })
    }

    /// State after flowing for `s` dilated-time units under `law`.
    pub fn dilated_flowed(&self, law: &GainLaw, s: f64) -> Result<Self, GainError> {
        Ok(GainState {
            mu0: self.mu0,
            mu: law.dilated_solution(self.mu0, s)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn rate_examples() {
        let l1 = GainLaw::new(1.0, 8.0).unwrap();
        assert!((l1.rate(1.0).unwrap() - 0.125).abs() < 1e-15);
        let linf = GainLaw::prescribed_time(8.0).unwrap();
        assert!((linf.rate(2.0).unwrap() - 0.5).abs() < 1e-15);
        let l2 = GainLaw::new(2.0, 1.0).unwrap();
        assert!((l2.rate(1.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rate_rejects_bad_gain() {
        let l = GainLaw::new(2.0, 1.0).unwrap();
        assert_eq!(l.rate(0.5), Err(GainError::GainOutOfRange(0.5)));
        assert!(l.rate(f64::NAN).is_err());
        assert!(l.rate(f64::INFINITY).is_err());
    }

    #[test]
    fn solution_examples() {
        let l1 = GainLaw::new(1.0, 8.0).unwrap();
        assert!((l1.solution(1.0, 8.0).unwrap() - E).abs() < 1e-12);
        let linf = GainLaw::prescribed_time(8.0).unwrap();
        assert!((linf.solution(1.0, 4.0).unwrap() - 2.0).abs() < 1e-12);
        let l2 = GainLaw::new(2.0, 1.0).unwrap();
        assert!((l2.solution(1.0, 0.5).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn solution_rejects_out_of_domain() {
        let linf = GainLaw::prescribed_time(8.0).unwrap();
        assert!(linf.solution(1.0, -0.1).is_err());
        assert!(linf.solution(1.0, 8.0).is_err());
        assert!(linf.solution(1.0, 8.0 * (1.0 - 1e-14)).is_err());
        // just inside the guard band is fine
        assert!(linf.solution(1.0, 8.0 * (1.0 - 1e-10)).is_ok());
    }

    #[test]
    fn blow_up_examples() {
        let linf = GainLaw::prescribed_time(8.0).unwrap();
        assert!((linf.blow_up_time(1.0) - 8.0).abs() < 1e-15);
        let l1 = GainLaw::new(1.0, 3.0).unwrap();
        assert!(l1.blow_up_time(7.0).is_infinite());
        let l2 = GainLaw::new(2.0, 8.0).unwrap();
        assert!((l2.blow_up_time(4.0) - 4.0).abs() < 1e-12);
        assert!(GainLaw::frozen().blow_up_time(1.0).is_infinite());
    }

    #[test]
    fn dilate_examples() {
        let linf = GainLaw::prescribed_time(8.0).unwrap();
        assert!((linf.dilate(1.0, 4.0).unwrap() - 8.0 * 2.0f64.ln()).abs() < 1e-12);
        for law in [
            GainLaw::new(1.0, 8.0).unwrap(),
            GainLaw::new(2.0, 1.0).unwrap(),
            GainLaw::prescribed_time(3.0).unwrap(),
            GainLaw::frozen(),
        ] {
            assert_eq!(law.dilate(1.0, 0.0).unwrap(), 0.0);
            assert_eq!(law.dilate(2.0, 0.0).unwrap(), 0.0);
        }
        let l2 = GainLaw::new(2.0, 1.0).unwrap();
        assert!((l2.dilate(1.0, 0.5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contract_examples() {
        let linf = GainLaw::prescribed_time(8.0).unwrap();
        assert!((linf.contract(1.0, 8.0 * 2.0f64.ln()).unwrap() - 4.0).abs() < 1e-12);
        for law in [
            GainLaw::new(1.0, 8.0).unwrap(),
            GainLaw::new(2.0, 1.0).unwrap(),
        ] {
            assert_eq!(law.contract(1.0, 0.0).unwrap(), 0.0);
        }
        // inverse of the exponential-law dilation c*U*(e^{t/U} - 1)
        let l1 = GainLaw::new(1.0, 8.0).unwrap();
        let s = 2.0 * 8.0 * (E - 1.0);
        assert!((l1.contract(2.0, s).unwrap() - 8.0).abs() < 1e-12);
        assert!(l1.contract(2.0, -1.0).is_err());
    }

    #[test]
    fn dilated_rate_examples() {
        let linf = GainLaw::prescribed_time(8.0).unwrap();
        assert!((linf.dilated_rate(2.0).unwrap() - 0.25).abs() < 1e-15);
        let l1 = GainLaw::new(1.0, 8.0).unwrap();
        assert!((l1.dilated_rate(3.0).unwrap() - 0.125).abs() < 1e-15);
        let l2 = GainLaw::new(2.0, 1.0).unwrap();
        assert!((l2.dilated_rate(4.0).unwrap() - 4.0).abs() < 1e-15);
        assert!(l2.dilated_rate(0.0).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(GainLaw::new(0.5, 1.0).is_err());
        assert!(GainLaw::new(2.0, 0.0).is_err());
        assert!(GainLaw::new(2.0, -3.0).is_err());
        assert!(GainLaw::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn gain_state_invariants() {
        assert!(GainState::new(0.9).is_err());
        let s = GainState::new(1.5).unwrap();
        assert_eq!(s.mu(), 1.5);
        let law = GainLaw::prescribed_time(8.0).unwrap();
        let s2 = s.flowed(&law, 1.0).unwrap();
        assert!(s2.mu() > s2.mu0());
        assert!(GainState::with_value(2.0, 1.5).is_err());
        // flowing to t and dilated-flowing to D(t) land on the same gain
        let t = 2.75;
        let s3 = s.dilated_flowed(&law, law.dilate(1.5, t).unwrap()).unwrap();
        let s4 = s.flowed(&law, t).unwrap();
        assert!((s3.mu() - s4.mu()).abs() < 1e-9 * s4.mu());
    }

    #[test]
    fn frozen_law_is_identity_time_scale() {
        let law = GainLaw::frozen();
        assert_eq!(law.rate(5.0).unwrap(), 0.0);
        assert_eq!(law.solution(1.0, 123.0).unwrap(), 1.0);
        assert_eq!(law.dilate(1.0, 2.5).unwrap(), 2.5);
        assert_eq!(law.contract(1.0, 2.5).unwrap(), 2.5);
        assert_eq!(law.dilate(2.0, 2.5).unwrap(), 5.0);
    }
}
