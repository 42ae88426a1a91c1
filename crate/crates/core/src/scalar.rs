//! Exact complex-rational scalars.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Arbitrary precision rational, always kept in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// Builds `num / den` in lowest terms. Panics on a zero denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `"p"`, `"p/q"` or a plain decimal such as `"-0.125"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = BigInt::from_str(num.trim()).ok()?;
        let den = BigInt::from_str(den.trim()).ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if !frac.chars().all(|c| c.is_ascii_digit())
            || !int_digits.chars().all(|c| c.is_ascii_digit())
            || (int_digits.is_empty() && frac.is_empty())
        {
            return None;
        }
        let digits = format!("{int_digits}{frac}");
        let mantissa = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let value = BigRational::new(mantissa, scale);
        return Some(if negative { -value } else { value });
    }
    BigInt::from_str(text).ok().map(BigRational::from_integer)
}

/// Renders a rational as `p` or `p/q`.
pub fn fmt_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Element of ℚ(i). Exact field arithmetic.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CScalar {
    pub re: Rational,
    pub im: Rational,
}

impl CScalar {
    pub fn new(re: Rational, im: Rational) -> Self {
        CScalar { re, im }
    }

    pub fn zero() -> Self {
        CScalar { re: Rational::zero(), im: Rational::zero() }
    }

    pub fn one() -> Self {
        CScalar { re: Rational::one(), im: Rational::zero() }
    }

    pub fn i() -> Self {
        CScalar { re: Rational::zero(), im: Rational::one() }
    }

    pub fn real(re: Rational) -> Self {
        CScalar { re, im: Rational::zero() }
    }

    pub fn imag(im: Rational) -> Self {
        CScalar { re: Rational::zero(), im }
    }

    pub fn from_int(n: i64) -> Self {
        Self::real(rat_int(n))
    }

    /// `(re_num/re_den) + i (im_num/im_den)`.
    pub fn from_ratios(re: (i64, i64), im: (i64, i64)) -> Self {
        CScalar { re: rat(re.0, re.1), im: rat(im.0, im.1) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        CScalar { re: self.re.clone(), im: -self.im.clone() }
    }

    /// |x|², exact.
    pub fn norm_sqr(&self) -> Rational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm_sqr();
        Some(CScalar { re: &self.re / &n, im: -(&self.im / &n) })
    }

    pub fn scale(&self, r: &Rational) -> Self {
        CScalar { re: &self.re * r, im: &self.im * r }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = CScalar::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Lossy conversion for numeric work.
    pub fn to_f64_pair(&self) -> (f64, f64) {
        (rational_to_f64(&self.re), rational_to_f64(&self.im))
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

impl Default for CScalar {
    fn default() -> Self {
        CScalar::zero()
    }
}

impl From<Rational> for CScalar {
    fn from(r: Rational) -> Self {
        CScalar::real(r)
    }
}

impl From<i64> for CScalar {
    fn from(n: i64) -> Self {
        CScalar::from_int(n)
    }
}

impl fmt::Display for CScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let im_part = |im: &Rational| -> String {
            if im.is_one() {
                "i".to_string()
            } else if (-im).is_one() {
                "-i".to_string()
            } else {
                format!("{}i", fmt_rational(im))
            }
        };
        match (self.re.is_zero(), self.im.is_zero()) {
            (_, true) => write!(f, "{}", fmt_rational(&self.re)),
            (true, false) => write!(f, "{}", im_part(&self.im)),
            (false, false) => {
                let im = im_part(&self.im);
                if self.im.is_negative() {
                    write!(f, "{}{}", fmt_rational(&self.re), im)
                } else {
                    write!(f, "{}+{}", fmt_rational(&self.re), im)
                }
            }
        }
    }
}

impl<'a> Add<&'a CScalar> for &'a CScalar {
    type Output = CScalar;
    fn add(self, rhs: &'a CScalar) -> CScalar {
        CScalar { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl<'a> Sub<&'a CScalar> for &'a CScalar {
    type Output = CScalar;
    fn sub(self, rhs: &'a CScalar) -> CScalar {
        CScalar { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl<'a> Mul<&'a CScalar> for &'a CScalar {
    type Output = CScalar;
    fn mul(self, rhs: &'a CScalar) -> CScalar {
        // Most coefficients in practice are purely real or purely imaginary.
        match (self.im.is_zero(), rhs.im.is_zero()) {
            (true, true) => CScalar::real(&self.re * &rhs.re),
            (true, false) => CScalar { re: &self.re * &rhs.re, im: &self.re * &rhs.im },
            (false, true) => CScalar { re: &self.re * &rhs.re, im: &self.im * &rhs.re },
            (false, false) => CScalar {
                re: &self.re * &rhs.re - &self.im * &rhs.im,
                im: &self.re * &rhs.im + &self.im * &rhs.re,
            },
        }
    }
}

impl<'a> Div<&'a CScalar> for &'a CScalar {
    type Output = CScalar;
    fn div(self, rhs: &'a CScalar) -> CScalar {
        let inv = rhs.inv().expect("division by zero scalar");
        self * &inv
    }
}

impl Neg for &CScalar {
    type Output = CScalar;
    fn neg(self) -> CScalar {
        CScalar { re: -self.re.clone(), im: -self.im.clone() }
    }
}

impl Neg for CScalar {
    type Output = CScalar;
    fn neg(self) -> CScalar {
        CScalar { re: -self.re, im: -self.im }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<CScalar> for CScalar {
            type Output = CScalar;
            fn $m(self, rhs: CScalar) -> CScalar {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a CScalar> for CScalar {
            type Output = CScalar;
            fn $m(self, rhs: &'a CScalar) -> CScalar {
                (&self).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&CScalar> for CScalar {
    fn add_assign(&mut self, rhs: &CScalar) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&CScalar> for CScalar {
    fn sub_assign(&mut self, rhs: &CScalar) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_ops() {
        let a = CScalar::from_ratios((1, 2), (3, 4));
        let b = CScalar::from_ratios((-2, 1), (1, 3));
        let q = &a / &b;
        assert_eq!(&q * &b, a);
        assert_eq!(a.conj().conj(), a);
        assert_eq!(CScalar::i().pow(2), CScalar::from_int(-1));
        assert!(CScalar::zero().inv().is_none());
    }

    #[test]
    fn parses_literals() {
        assert_eq!(parse_rational("3/6"), Some(rat(1, 2)));
        assert_eq!(parse_rational("-0.125"), Some(rat(-1, 8)));
        assert_eq!(parse_rational("7"), Some(rat_int(7)));
        assert_eq!(parse_rational(".5"), Some(rat(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn display_is_canonical() {
        assert_eq!(CScalar::from_ratios((1, 2), (-3, 4)).to_string(), "1/2-3/4i");
        assert_eq!(CScalar::from_ratios((0, 1), (-1, 1)).to_string(), "-i");
        assert_eq!(CScalar::from_ratios((2, 1), (1, 1)).to_string(), "2+i");
        assert_eq!(CScalar::zero().to_string(), "0");
    }
}
