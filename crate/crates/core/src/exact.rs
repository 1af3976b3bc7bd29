// SPDX-License-Identifier: Apache-2.0

//! Exact arithmetic in the field Q(√2) and its Gaussian extension Q(√2)(i).
//!
//! Balanced beam splitters carry amplitudes like `1/√2`; products and sums of
//! such numbers stay inside Q(√2), so interference patterns can be computed
//! without rounding. [`QSqrt2`] is `rat + irr·√2` with big rationals and
//! [`QComplex`] pairs two of them.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{token}` as an exact number: {reason}")]
pub struct ParseNumberError {
    pub token: String,
    pub reason: &'static str,
}

/// `rat + irr·√2` with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QSqrt2 {
    rat: BigRational,
    irr: BigRational,
}

impl QSqrt2 {
    pub fn new(rat: BigRational, irr: BigRational) -> Self {
        QSqrt2 { rat, irr }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        QSqrt2::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::zero(),
        )
    }

    pub fn from_integer(n: i64) -> Self {
        QSqrt2::from_ratio(n, 1)
    }

    pub fn sqrt2() -> Self {
        QSqrt2::new(BigRational::zero(), BigRational::one())
    }

    /// `1/√2 = √2/2`.
    pub fn frac_1_sqrt2() -> Self {
        QSqrt2::new(BigRational::zero(), BigRational::new(BigInt::one(), BigInt::from(2)))
    }

    pub fn zero() -> Self {
        QSqrt2::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        QSqrt2::new(BigRational::one(), BigRational::zero())
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.rat
    }

    pub fn sqrt2_part(&self) -> &BigRational {
        &self.irr
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.irr.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.irr.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.rat) + ratio_to_f64(&self.irr) * std::f64::consts::SQRT_2
    }

    /// Sign of the real number, decided exactly.
    pub fn signum(&self) -> i8 {
        // Compare rat against -irr·√2 by squaring with sign bookkeeping.
        let s_rat = sign_of(&self.rat);
        let s_irr = sign_of(&self.irr);
        if s_irr == 0 {
            return s_rat;
        }
        if s_rat == 0 || s_rat == s_irr {
            return if s_rat == 0 { s_irr } else { s_rat };
        }
        let rat_sq = &self.rat * &self.rat;
        let irr_sq = &self.irr * &self.irr * BigRational::from_integer(BigInt::from(2));
        match rat_sq.cmp(&irr_sq) {
            std::cmp::Ordering::Greater => s_rat,
            std::cmp::Ordering::Less => s_irr,
            std::cmp::Ordering::Equal => 0,
        }
    }

    /// Multiplicative inverse, `None` for zero.
    pub fn inv(&self) -> Option<Self> {
        // (a + b√2)^-1 = (a - b√2) / (a² - 2b²); the norm vanishes only at zero.
        let two = BigRational::from_integer(BigInt::from(2));
        let norm = &self.rat * &self.rat - &two * &self.irr * &self.irr;
        if norm.is_zero() {
            return None;
        }
        Some(QSqrt2::new(&self.rat / &norm, -(&self.irr) / &norm))
    }
}

fn sign_of(r: &BigRational) -> i8 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

impl fmt::Display for QSqrt2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.rat.is_zero(), self.irr.is_zero()) {
            (_, true) => write!(f, "{}", self.rat),
            (true, false) => write!(f, "{}*sqrt2", self.irr),
            (false, false) => write!(f, "{} + {}*sqrt2", self.rat, self.irr),
        }
    }
}

impl Add for &QSqrt2 {
    type Output = QSqrt2;
    fn add(self, rhs: &QSqrt2) -> QSqrt2 {
        QSqrt2::new(&self.rat + &rhs.rat, &self.irr + &rhs.irr)
    }
}

impl Sub for &QSqrt2 {
    type Output = QSqrt2;
    fn sub(self, rhs: &QSqrt2) -> QSqrt2 {
        QSqrt2::new(&self.rat - &rhs.rat, &self.irr - &rhs.irr)
    }
}

impl Mul for &QSqrt2 {
    type Output = QSqrt2;
    fn mul(self, rhs: &QSqrt2) -> QSqrt2 {
        let two = BigRational::from_integer(BigInt::from(2));
        QSqrt2::new(
            &self.rat * &rhs.rat + two * &self.irr * &rhs.irr,
            &self.rat * &rhs.irr + &self.irr * &rhs.rat,
        )
    }
}

impl Neg for &QSqrt2 {
    type Output = QSqrt2;
    fn neg(self) -> QSqrt2 {
        QSqrt2::new(-&self.rat, -&self.irr)
    }
}

macro_rules! forward_owned {
    ($t:ty, $($tr:ident $m:ident),*) => {$(
        impl $tr for $t {
            type Output = $t;
            fn $m(self, rhs: $t) -> $t { <&$t as $tr>::$m(&self, &rhs) }
        }
    )*};
}
forward_owned!(QSqrt2, Add add, Sub sub, Mul mul);

impl FromStr for QSqrt2 {
    type Err = ParseNumberError;

    /// Accepts `[-]r`, `[-]sqrt2`, `[-]r/sqrt2`, `[-]r*sqrt2` where `r` is an
    /// integer, a decimal, or `p/q`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| ParseNumberError {
            token: s.to_string(),
            reason,
        };
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(err("empty token"));
        }
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(&t)),
        };
        let value = if body == "sqrt2" {
            QSqrt2::sqrt2()
        } else if let Some(r) = body.strip_suffix("/sqrt2") {
            let r = parse_rational(r).ok_or_else(|| err("bad rational before /sqrt2"))?;
            // r/√2 = (r/2)·√2
            QSqrt2::new(BigRational::zero(), r / BigRational::from_integer(BigInt::from(2)))
        } else if let Some(r) = body.strip_suffix("*sqrt2") {
            let r = parse_rational(r).ok_or_else(|| err("bad rational before *sqrt2"))?;
            QSqrt2::new(BigRational::zero(), r)
        } else {
            let r = parse_rational(body).ok_or_else(|| err("not a rational literal"))?;
            QSqrt2::new(r, BigRational::zero())
        };
        Ok(if neg { -&value } else { value })
    }
}

/// Integer, decimal (`0.125`, `1e-3`) or `p/q` literal, without sign handling
/// beyond what the pieces carry.
fn parse_rational(s: &str) -> Option<BigRational> {
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_decimal(p)?;
        let q = parse_decimal(q)?;
        if q.is_zero() {
            return None;
        }
        return Some(p / q);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (neg, s) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(numer);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

impl QSqrt2 {
    /// Exact value of the shortest decimal that round-trips to `x`.
    ///
    /// A literal `0.6` typed into a scenario file becomes exactly `3/5`.
    pub fn from_f64_shortest(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        parse_decimal(&format!("{x}")).map(|r| QSqrt2::new(r, BigRational::zero()))
    }
}

/// Element of Q(√2)(i).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QComplex {
    pub re: QSqrt2,
    pub im: QSqrt2,
}

impl QComplex {
    pub fn new(re: QSqrt2, im: QSqrt2) -> Self {
        QComplex { re, im }
    }

    pub fn real(re: QSqrt2) -> Self {
        QComplex::new(re, QSqrt2::zero())
    }

    pub fn zero() -> Self {
        QComplex::real(QSqrt2::zero())
    }

    pub fn one() -> Self {
        QComplex::real(QSqrt2::one())
    }

    pub fn conj(&self) -> Self {
        QComplex::new(self.re.clone(), -&self.im)
    }

    pub fn norm_sqr(&self) -> QSqrt2 {
        &(&self.re * &self.re) + &(&self.im * &self.im)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

impl Add for &QComplex {
    type Output = QComplex;
    fn add(self, rhs: &QComplex) -> QComplex {
        QComplex::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Sub for &QComplex {
    type Output = QComplex;
    fn sub(self, rhs: &QComplex) -> QComplex {
        QComplex::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl Mul for &QComplex {
    type Output = QComplex;
    fn mul(self, rhs: &QComplex) -> QComplex {
        QComplex::new(
            &(&self.re * &rhs.re) - &(&self.im * &rhs.im),
            &(&self.re * &rhs.im) + &(&self.im * &rhs.re),
        )
    }
}

forward_owned!(QComplex, Add add, Sub sub, Mul mul);

/// Arithmetic needed to fold amplitudes through a context network.
///
/// Implemented for `Complex64` (float path) and [`QComplex`] (exact path).
pub trait AmplitudeField: Clone + fmt::Debug {
    type Real: WeightField;

    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn norm_sqr(&self) -> Self::Real;
}

/// Probabilities produced by [`AmplitudeField::norm_sqr`].
pub trait WeightField: Clone + fmt::Debug + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
}

impl AmplitudeField for Complex64 {
    type Real = f64;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn norm_sqr(&self) -> f64 {
        Complex64::norm_sqr(self)
    }
}

impl WeightField for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl AmplitudeField for QComplex {
    type Real = QSqrt2;
    fn zero() -> Self {
        QComplex::zero()
    }
    fn one() -> Self {
        QComplex::one()
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn norm_sqr(&self) -> QSqrt2 {
        QComplex::norm_sqr(self)
    }
}

impl WeightField for QSqrt2 {
    fn zero() -> Self {
        QSqrt2::zero()
    }
    fn one() -> Self {
        QSqrt2::one()
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn to_f64(&self) -> f64 {
        QSqrt2::to_f64(self)
    }
    fn is_zero(&self) -> bool {
        QSqrt2::is_zero(self)
    }
}
