use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// A real number stored as a sign and the natural log of its magnitude.
///
/// Values such as `|x0|^(3^n)` that leave double range after a handful of
/// steps stay representable; only the log of the magnitude has to be finite.
#[derive(Debug, Clone, Copy)]
pub struct LogMag {
    sign: i8,
    log: f64,
}

impl LogMag {
    pub const ZERO: LogMag = LogMag { sign: 0, log: f64::NEG_INFINITY };
    pub const ONE: LogMag = LogMag { sign: 1, log: 0.0 };

    /// `sign * exp(log)`; a sign of zero or a `log` of `-inf` gives zero.
    pub fn from_log(sign: i8, log: f64) -> Self {
        if sign == 0 || log == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { sign: sign.signum(), log }
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            Self { sign: if v > 0.0 { 1 } else { -1 }, log: v.abs().ln() }
        }
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.sign) * self.log.exp()
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    /// `ln |v|`, `-inf` for zero.
    pub fn log_abs(self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.log
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn abs(self) -> Self {
        Self { sign: self.sign.abs(), log: self.log }
    }

    /// `self^e`. Negative bases need an integer exponent, and zero needs a
    /// positive one; other cases are undefined and give `None`.
    pub fn pow(self, e: f64) -> Option<Self> {
        if self.sign == 0 {
            return (e > 0.0).then_some(Self::ZERO);
        }
        if e == 0.0 {
            return Some(Self::ONE);
        }
        let sign = if self.sign > 0 {
            1
        } else if e.fract() != 0.0 {
            return None;
        } else if (e / 2.0).fract() == 0.0 {
            1
        } else {
            -1
        };
        Some(Self::from_log(sign, self.log * e))
    }
}

/// `ln(1 - e^d)` for `d < 0`, accurate at both ends.
fn ln_one_minus_exp(d: f64) -> f64 {
    if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

impl Add for LogMag {
    type Output = Self;

    /// Sum via log-sum-exp around the larger magnitude.
    fn add(self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.log >= other.log { (self, other) } else { (other, self) };
        let d = small.log - big.log;
        if big.sign == small.sign {
            Self::from_log(big.sign, big.log + d.exp().ln_1p())
        } else if d == 0.0 {
            Self::ZERO
        } else {
            Self::from_log(big.sign, big.log + ln_one_minus_exp(d))
        }
    }
}

impl Sub for LogMag {
    type Output = Self;

    fn sub(self, other: Self) -> Self {
        self + -other
    }
}

impl Mul for LogMag {
    type Output = LogMag;

    fn mul(self, rhs: LogMag) -> LogMag {
        if self.sign == 0 || rhs.sign == 0 {
            LogMag::ZERO
        } else {
            LogMag::from_log(self.sign * rhs.sign, self.log + rhs.log)
        }
    }
}

impl Neg for LogMag {
    type Output = LogMag;

    fn neg(self) -> LogMag {
        LogMag { sign: -self.sign, log: self.log }
    }
}

impl PartialEq for LogMag {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for LogMag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.log.partial_cmp(&other.log),
                _ => other.log.partial_cmp(&self.log),
            },
            ord => Some(ord),
        }
    }
}

impl From<f64> for LogMag {
    fn from(v: f64) -> Self {
        LogMag::from_f64(v)
    }
}

impl fmt::Display for LogMag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            1 => write!(f, "exp({})", self.log),
            _ => write!(f, "-exp({})", self.log),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let x = LogMag::from_f64(-3.5);
        assert_eq!(x * LogMag::ONE, x);
        let e = LogMag::from_log(1, 1.0);
        assert_eq!(e.pow(243.0).unwrap().log_abs(), 243.0);
        let big = LogMag::from_log(1, 100.0);
        assert!(big.add(-big).is_zero());
        assert!(LogMag::ZERO.pow(0.0).is_none());
        assert!(LogMag::from_f64(-2.0).pow(0.5).is_none());
        assert_eq!(LogMag::from_f64(-2.0).pow(3.0).unwrap().sign(), -1);
        assert_eq!(LogMag::from_f64(-2.0).pow(2.0).unwrap().sign(), 1);
        assert_eq!(LogMag::from_f64(5.0).pow(0.0).unwrap(), LogMag::ONE);
        assert!(LogMag::from_f64(-1.0) < LogMag::ZERO);
        assert!(LogMag::from_f64(-1.0) > LogMag::from_f64(-2.0));
        assert!(LogMag::from_log(1, 1e6) > LogMag::from_log(1, 1e5));
    }

    #[test]
    fn cancellation_is_accurate() {
        let a = LogMag::from_f64(1.0);
        let b = LogMag::from_f64(-(1.0 - 1e-12));
        let r = a.add(b).to_f64();
        let exact = 1.0 - (1.0 - 1e-12);
        assert!((r - exact).abs() <= 1e-15 * exact);
        let far = LogMag::from_f64(1.0).add(LogMag::from_f64(-1e-300));
        assert_eq!(far.to_f64(), 1.0);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e3..1e3f64, -1e-3..1e-3f64, Just(0.0)]
    }

    proptest! {
        #[test]
        fn round_trip(v in finite()) {
            let r = LogMag::from_f64(v).to_f64();
            prop_assert!((r - v).abs() <= 1e-10 * v.abs());
        }

        #[test]
        fn mul_matches_native(a in finite(), b in finite()) {
            let r = (LogMag::from(a) * LogMag::from(b)).to_f64();
            prop_assert!((r - a * b).abs() <= 1e-10 * (a * b).abs());
        }

        #[test]
        fn add_matches_native(a in finite(), b in finite()) {
            let r = LogMag::from(a).add(LogMag::from(b)).to_f64();
            let scale = a.abs().max(b.abs());
            prop_assert!((r - (a + b)).abs() <= 1e-12 * scale);
        }

        #[test]
        fn algebra(a in finite(), b in finite(), c in finite()) {
            let (a, b, c) = (LogMag::from(a), LogMag::from(b), LogMag::from(c));
            prop_assert_eq!(a * b, b * a);
            prop_assert_eq!(a.add(b), b.add(a));
            let l = (a * b) * c;
            let r = a * (b * c);
            prop_assert_eq!(l.sign(), r.sign());
            if !l.is_zero() {
                prop_assert!((l.log_abs() - r.log_abs()).abs() <= 4.0 * f64::EPSILON * l.log_abs().abs().max(1.0));
            }
            let l = a.add(b).add(c).to_f64();
            let r = a.add(b.add(c)).to_f64();
            let scale = a.to_f64().abs() + b.to_f64().abs() + c.to_f64().abs();
            prop_assert!((l - r).abs() <= 1e-12 * scale);
        }

        #[test]
        fn pow_of_positive(a in 1e-3..1e3f64, e in -50.0..50.0f64) {
            let r = LogMag::from(a).pow(e).unwrap();
            prop_assert!((r.log_abs() - e * a.ln()).abs() <= 1e-12 * (e * a.ln()).abs().max(1.0));
        }
    }
}
