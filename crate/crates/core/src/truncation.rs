//! Clamping operators used by the scheme and by its fixed-point map, plus the
//! consumption power `w ↦ w^s`.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::scalar::Real;

/// Truncation levels: `m` bounds u from above, `alpha` bounds z from below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationParams<T> {
    pub m: T,
    pub alpha: T,
}

impl<T: Real> TruncationParams<T> {
    pub fn new(m: T, alpha: T) -> Result<Self> {
        if !(m > T::zero() && m.is_finite()) {
            return Err(Error::validation("m", format!("must be positive, got {m}")));
        }
        if !(alpha > T::zero() && alpha.is_finite()) {
            return Err(Error::validation("alpha", format!("must be positive, got {alpha}")));
        }
        Ok(Self { m, alpha })
    }
}

/// T^m(u) = min(u, m)
#[inline]
pub fn t_upper<T: Real>(u: T, m: T) -> T {
    u.min(m)
}

/// T_0^m(u) = clamp(u, 0, m)
#[inline]
pub fn t_band<T: Real>(u: T, m: T) -> T {
    u.max(T::zero()).min(m)
}

/// T_α(z) = max(z, α)
#[inline]
pub fn t_lower<T: Real>(z: T, alpha: T) -> T {
    z.max(alpha)
}

/// w^s for w ≥ 0, s ≥ 1. Integral exponents use repeated multiplication,
/// others exp(s·ln w) with w = 0 mapped to 0.
pub fn pow_s<T: Real>(w: T, s: T) -> Result<T> {
    if w < T::zero() {
        return Err(Error::Contract(format!("power of negative value {w}")));
    }
    Ok(pow_unchecked(w, s))
}

#[inline]
pub(crate) fn pow_unchecked<T: Real>(w: T, s: T) -> T {
    if w == T::zero() {
        return T::zero();
    }
    if s.fract() == T::zero() && s <= T::lit(64.0) {
        w.powi(s.to_i32().unwrap())
    } else {
        (s * w.ln()).exp()
    }
}

pub fn t_upper_field<T: Real>(u: &Field<T>, m: T) -> Field<T> {
    u.map(|v| t_upper(v, m))
}

pub fn t_band_field<T: Real>(u: &Field<T>, m: T) -> Field<T> {
    u.map(|v| t_band(v, m))
}

pub fn t_lower_field<T: Real>(z: &Field<T>, alpha: T) -> Field<T> {
    z.map(|v| t_lower(v, alpha))
}

pub fn pow_s_field<T: Real>(w: &Field<T>, s: T) -> Result<Field<T>> {
    if let Some(i) = w.values().iter().position(|&v| v < T::zero()) {
        return Err(Error::Contract(format!(
            "power of negative value {} at cell {i}",
            w.values()[i]
        )));
    }
    Ok(w.map(|v| pow_unchecked(v, s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn upper_truncation() {
        assert_eq!(t_upper(3.0, 5.0), 3.0);
        assert_eq!(t_upper(7.0, 5.0), 5.0);
        assert_eq!(t_upper(5.0, 5.0), 5.0);
    }

    #[test]
    fn band_truncation() {
        assert_eq!(t_band(-1.0, 5.0), 0.0);
        assert_eq!(t_band(2.0, 5.0), 2.0);
        assert_eq!(t_band(9.0, 5.0), 5.0);
    }

    #[test]
    fn lower_truncation() {
        assert_eq!(t_lower(0.2, 0.5), 0.5);
        assert_eq!(t_lower(0.7, 0.5), 0.7);
        assert_eq!(t_lower(0.5, 0.5), 0.5);
    }

    #[test]
    fn powers() {
        assert_eq!(pow_s(4.0, 1.0).unwrap(), 4.0);
        assert_eq!(pow_s(2.0, 2.0).unwrap(), 4.0);
        assert_eq!(pow_s(0.0, 1.5).unwrap(), 0.0);
        assert_eq!(pow_s(1.0, 3.7).unwrap(), 1.0);
        let v: f64 = pow_s(3.0, 1.5).unwrap();
        assert_relative_eq!(v, 5.196152422706632, max_relative = 1e-14);
        assert_relative_eq!(v, 3.0f64 * 3.0f64.sqrt(), max_relative = 1e-14);
        assert!(matches!(pow_s(-1.0, 2.0), Err(Error::Contract(_))));
    }

    #[test]
    fn params_validation() {
        assert!(TruncationParams::new(0.0, 0.1).is_err());
        assert!(TruncationParams::new(1.0, -0.1).is_err());
        assert!(TruncationParams::new(1.0, 0.1).is_ok());
    }

    proptest! {
        #[test]
        fn truncations_idempotent_and_monotone(a in -50.0f64..50.0, b in -50.0f64..50.0, m in 0.1f64..20.0, al in 0.01f64..2.0) {
            prop_assert_eq!(t_upper(t_upper(a, m), m), t_upper(a, m));
            prop_assert_eq!(t_band(t_band(a, m), m), t_band(a, m));
            prop_assert_eq!(t_lower(t_lower(a, al), al), t_lower(a, al));
            prop_assert_eq!(t_band(a, m), t_upper(a.max(0.0), m));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(t_upper(lo, m) <= t_upper(hi, m));
            prop_assert!(t_band(lo, m) <= t_band(hi, m));
            prop_assert!(t_lower(lo, al) <= t_lower(hi, al));
            prop_assert!(t_lower(a, al) >= al);
        }

        #[test]
        fn power_matches_powf(w in 0.0f64..100.0, s in 1.0f64..4.0) {
            let p = pow_s(w, s).unwrap();
            prop_assert!((p - w.powf(s)).abs() <= 1e-12 * (1.0 + w.powf(s)));
        }
    }
}
