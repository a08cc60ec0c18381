//! Coefficient fields shared by the symbolic layers.
//!
//! Identities are checked with exact complex rationals; anything involving
//! `sqrt(kT)` for a general temperature runs on `Complex64`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use num_complex::Complex;

pub type Rational = BigRational;
/// Exact complex rational `x + j y`.
pub type Exact = Complex<BigRational>;

pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_i64(n: i64) -> Self;
    fn from_exact(c: &Exact) -> Self;
    fn imag_unit() -> Self;
    fn conj(&self) -> Self;
    fn to_c64(&self) -> Complex64;
    fn div_u64(&self, n: u64) -> Self;
    fn recip(&self) -> Self;
    /// Exact binary value of `x` for rationals.
    fn from_f64(x: f64) -> Self;
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn from_i64(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }
    fn from_exact(c: &Exact) -> Self {
        exact_to_c64(c)
    }
    fn imag_unit() -> Self {
        Complex64::new(0.0, 1.0)
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn div_u64(&self, n: u64) -> Self {
        self / n as f64
    }
    fn recip(&self) -> Self {
        Complex64::new(1.0, 0.0) / self
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

impl Coeff for Exact {
    fn zero() -> Self {
        Complex::new(Rational::zero(), Rational::zero())
    }
    fn one() -> Self {
        Complex::new(Rational::one(), Rational::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn from_i64(n: i64) -> Self {
        Complex::new(Rational::from_integer(BigInt::from(n)), Rational::zero())
    }
    fn from_exact(c: &Exact) -> Self {
        c.clone()
    }
    fn imag_unit() -> Self {
        Complex::new(Rational::zero(), Rational::one())
    }
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn to_c64(&self) -> Complex64 {
        exact_to_c64(self)
    }
    fn div_u64(&self, n: u64) -> Self {
        let d = Rational::from_integer(BigInt::from(n));
        Complex::new(&self.re / &d, &self.im / &d)
    }
    fn recip(&self) -> Self {
        let n = &self.re * &self.re + &self.im * &self.im;
        Complex::new(&self.re / &n, -(&self.im / &n))
    }
    fn from_f64(x: f64) -> Self {
        let r = Rational::from_float(x).expect("finite coefficient");
        Complex::new(r, Rational::zero())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn exact_to_c64(c: &Exact) -> Complex64 {
    Complex64::new(rational_to_f64(&c.re), rational_to_f64(&c.im))
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn exact(re: Rational, im: Rational) -> Exact {
    Complex::new(re, im)
}

pub fn exact_real(num: i64, den: i64) -> Exact {
    Complex::new(rational(num, den), Rational::zero())
}

/// Parses `12`, `3/2`, `-0.125` into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let d = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = Rational::new(n, d);
    Some(if neg { -r } else { r })
}

fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Coefficient rendering used by the polynomial printers. Returns the sign
/// separately so callers can join terms with ` + ` / ` - `.
pub trait CoeffDisplay {
    /// (negative, magnitude text, magnitude is one)
    fn split_sign(&self) -> (bool, String, bool);
}

impl CoeffDisplay for Exact {
    fn split_sign(&self) -> (bool, String, bool) {
        let re0 = self.re.is_zero();
        let im0 = self.im.is_zero();
        if im0 {
            let neg = self.re.is_negative();
            let mag = self.re.abs();
            (neg, fmt_rational(&mag), mag.is_one())
        } else if re0 {
            let neg = self.im.is_negative();
            let mag = self.im.abs();
            let text = if mag.is_one() { "j".to_string() } else { format!("{} j", fmt_rational(&mag)) };
            (neg, text, false)
        } else {
            let sign = if self.im.is_negative() { "-" } else { "+" };
            let im = self.im.abs();
            let im_text = if im.is_one() { "j".to_string() } else { format!("{} j", fmt_rational(&im)) };
            (false, format!("({} {} {})", fmt_rational(&self.re), sign, im_text), false)
        }
    }
}

impl CoeffDisplay for Complex64 {
    fn split_sign(&self) -> (bool, String, bool) {
        if self.im == 0.0 {
            let neg = self.re < 0.0;
            let mag = self.re.abs();
            (neg, format!("{mag}"), mag == 1.0)
        } else if self.re == 0.0 {
            let neg = self.im < 0.0;
            let mag = self.im.abs();
            let text = if mag == 1.0 { "j".to_string() } else { format!("{mag} j") };
            (neg, text, false)
        } else {
            let sign = if self.im < 0.0 { "-" } else { "+" };
            (false, format!("({} {} {} j)", self.re, sign, self.im.abs()), false)
        }
    }
}
