//! Thin arbitrary-precision float wrapper: operator overloading, a per-thread
//! constants cache, and conversion back to f64.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float_num::{BigFloat, Consts, RoundingMode, Sign};

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

fn with_cc<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// Binary floating-point number with `p` bits of mantissa.
#[derive(Debug, Clone)]
pub struct Mp {
    v: BigFloat,
    p: usize,
}

impl Mp {
    pub fn from_f64(x: f64, p: usize) -> Self {
        Self { v: BigFloat::from_f64(x, p), p }
    }

    pub fn from_i64(x: i64, p: usize) -> Self {
        Self { v: BigFloat::from_i64(x, p), p }
    }

    pub fn zero(p: usize) -> Self {
        Self::from_i64(0, p)
    }

    pub fn one(p: usize) -> Self {
        Self::from_i64(1, p)
    }

    pub fn pi(p: usize) -> Self {
        Self { v: with_cc(|cc| cc.pi(p, RM)), p }
    }

    pub fn precision(&self) -> usize {
        self.p
    }

    pub fn exp(&self) -> Self {
        Self { v: with_cc(|cc| self.v.exp(self.p, RM, cc)), p: self.p }
    }

    pub fn ln(&self) -> Self {
        Self { v: with_cc(|cc| self.v.ln(self.p, RM, cc)), p: self.p }
    }

    pub fn sqrt(&self) -> Self {
        Self { v: self.v.sqrt(self.p, RM), p: self.p }
    }

    /// Integer power; negative exponents go through the reciprocal.
    pub fn powi(&self, n: i64) -> Self {
        let v = self.v.powi(n.unsigned_abs() as usize, self.p + 32, RM);
        let r = Self { v, p: self.p };
        if n < 0 {
            r.recip()
        } else {
            r.round()
        }
    }

    fn round(mut self) -> Self {
        let _ = self.v.set_precision(self.p, RM);
        self
    }

    pub fn recip(&self) -> Self {
        Self { v: self.v.reciprocal(self.p, RM), p: self.p }
    }

    pub fn abs(&self) -> Self {
        Self { v: self.v.abs(), p: self.p }
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !(self.v.is_nan() || self.v.is_inf())
    }

    pub fn is_negative(&self) -> bool {
        self.v.is_negative()
    }

    pub fn mul_i(&self, k: i64) -> Self {
        self * &Mp::from_i64(k, self.p)
    }

    pub fn div_i(&self, k: i64) -> Self {
        self / &Mp::from_i64(k, self.p)
    }

    /// Nearest f64 (±inf / 0 outside the f64 range).
    pub fn to_f64(&self) -> f64 {
        if self.v.is_nan() {
            return f64::NAN;
        }
        if self.v.is_inf() {
            return if self.v.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        if self.v.is_zero() {
            return 0.0;
        }
        let Some((words, _, sign, e, _)) = self.v.as_raw_parts() else {
            return f64::NAN;
        };
        let k = words.len();
        let mut m = words[k - 1] as f64 / 2f64.powi(64);
        if k >= 2 {
            m += words[k - 2] as f64 / 2f64.powi(128);
        }
        // Two steps so that 2^e never overflows on its own.
        let half = e / 2;
        let x = m * 2f64.powi(half) * 2f64.powi(e - half);
        if sign == Sign::Neg {
            -x
        } else {
            x
        }
    }

    /// log₂|x| (−∞ for zero).
    pub fn log2_abs(&self) -> f64 {
        if self.v.is_zero() {
            return f64::NEG_INFINITY;
        }
        if !self.is_finite() {
            return f64::INFINITY;
        }
        let Some((words, _, _, e, _)) = self.v.as_raw_parts() else {
            return f64::NAN;
        };
        let m = words[words.len() - 1] as f64 / 2f64.powi(64);
        e as f64 + m.log2()
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $m:ident) => {
        impl $tr<&Mp> for &Mp {
            type Output = Mp;
            fn $f(self, rhs: &Mp) -> Mp {
                let p = self.p.max(rhs.p);
                Mp { v: self.v.$m(&rhs.v, p, RM), p }
            }
        }
        impl $tr<Mp> for Mp {
            type Output = Mp;
            fn $f(self, rhs: Mp) -> Mp {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&Mp> for Mp {
            type Output = Mp;
            fn $f(self, rhs: &Mp) -> Mp {
                (&self).$f(rhs)
            }
        }
        impl $tr<Mp> for &Mp {
            type Output = Mp;
            fn $f(self, rhs: Mp) -> Mp {
                self.$f(&rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl Neg for &Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        Mp { v: -&self.v, p: self.p }
    }
}

impl Neg for Mp {
    type Output = Mp;
    fn neg(self) -> Mp {
        -&self
    }
}

impl PartialEq for Mp {
    fn eq(&self, other: &Self) -> bool {
        self.v.cmp(&other.v) == Some(0)
    }
}

impl PartialOrd for Mp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.v.cmp(&other.v).map(|c| c.cmp(&0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_arithmetic() {
        for x in [1.0, -2.5, 1e-300, 3.0e250, std::f64::consts::PI, -7.0 / 3.0] {
            assert_eq!(Mp::from_f64(x, 256).to_f64(), x);
        }
        let a = Mp::from_i64(1, 256).div_i(3);
        let b = &a.mul_i(3) - &Mp::one(256);
        assert!(b.abs().log2_abs() < -250.0);
        assert!((Mp::pi(256).to_f64() - std::f64::consts::PI).abs() < 1e-16);
        let e = Mp::one(256).exp();
        assert!((e.to_f64() - std::f64::consts::E).abs() < 1e-15);
        assert!((Mp::from_i64(2, 256).sqrt().to_f64() - 2f64.sqrt()).abs() < 1e-16);
        assert_eq!(Mp::from_i64(3, 128).powi(-2).to_f64(), 1.0 / 9.0);
        assert!((Mp::from_f64(1e5, 128).powi(200).log2_abs() - 1000.0 * 10f64.log2()).abs() < 1e-9);
        assert!(Mp::from_i64(2, 64) > Mp::from_i64(1, 64));
    }
}
