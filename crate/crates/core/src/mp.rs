//! Multiprecision real and complex scalars.
//!
//! Every value carries its own binary precision; arithmetic between two
//! values keeps the larger one. Constructors always take a [`Precision`] so
//! no value is ever created with dashu's "unlimited" precision, which would
//! make division panic.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::ops::BitTest;
use num_complex::Complex64;

/// Binary floating point with round-half-even.
pub type Float = FBig<HalfEven, 2>;

const BITS_PER_DIGIT: f64 = core::f64::consts::LOG2_10;

/// Working precision in decimal digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Precision(u32);

impl Precision {
    /// Lowest precision the engine will run at.
    pub const MIN_DIGITS: u32 = 30;

    pub fn digits(digits: u32) -> Self {
        Precision(digits.max(Self::MIN_DIGITS))
    }

    /// Working digits for Padé half-order `max_half_order`:
    /// `max(60, ceil(2.5 M) + 30)`.
    pub fn for_half_order(max_half_order: usize) -> Self {
        let scaled = (5 * max_half_order).div_ceil(2) as u32 + 30;
        Precision(scaled.max(60))
    }

    pub fn decimal_digits(self) -> u32 {
        self.0
    }

    pub fn bits(self) -> usize {
        libm::ceil(self.0 as f64 * BITS_PER_DIGIT) as usize + 8
    }

    /// `10^(-k)` as an `f64` threshold.
    pub fn eps_pow(k: f64) -> f64 {
        libm::pow(10.0, -k)
    }
}

pub fn from_f64(x: f64, prec: Precision) -> Float {
    Float::try_from(x)
        .expect("finite f64")
        .with_precision(prec.bits())
        .value()
}

pub fn zero(prec: Precision) -> Float {
    Float::ZERO.with_precision(prec.bits()).value()
}

pub fn one(prec: Precision) -> Float {
    Float::ONE.with_precision(prec.bits()).value()
}

pub fn to_f64(x: &Float) -> f64 {
    x.to_f64().value()
}

/// `2^e` (exact).
pub fn pow2(e: isize) -> Float {
    Float::from_parts(dashu_int::IBig::ONE, e)
}

/// Decimal rendering with `digits` significant digits.
pub fn to_decimal_string(x: &Float, digits: u32) -> String {
    x.clone()
        .with_base_and_precision::<10>(digits as usize)
        .value()
        .to_string()
}

/// Parse a decimal string at precision `prec`.
pub fn parse_decimal(s: &str, prec: Precision) -> Option<Float> {
    let d = dashu_float::DBig::from_str(s.trim()).ok()?;
    Some(
        d.with_rounding::<HalfEven>()
            .with_base_and_precision::<2>(prec.bits())
            .value(),
    )
}

/// `log2 |x|`, valid far outside the `f64` exponent range; `-inf` for zero.
pub fn log2_abs(x: &Float) -> f64 {
    let repr = x.repr();
    let (_, sig) = repr.significand().clone().into_parts();
    if sig.is_zero() {
        return f64::NEG_INFINITY;
    }
    let nbits = sig.bit_len();
    let shift = nbits.saturating_sub(60);
    let top = (sig >> shift).to_f64().value();
    libm::log2(top) + (shift as isize + repr.exponent()) as f64
}

pub fn log10_abs(x: &Float) -> f64 {
    log2_abs(x) / BITS_PER_DIGIT
}

/// Complex number with multiprecision parts.
#[derive(Clone, PartialEq)]
pub struct MpComplex {
    pub re: Float,
    pub im: Float,
}

impl fmt::Debug for MpComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.to_c64();
        write!(f, "({:e}{:+e}i)", c.re, c.im)
    }
}

impl MpComplex {
    pub fn new(re: Float, im: Float) -> Self {
        MpComplex { re, im }
    }

    pub fn zero(prec: Precision) -> Self {
        MpComplex::new(zero(prec), zero(prec))
    }

    pub fn one(prec: Precision) -> Self {
        MpComplex::new(one(prec), zero(prec))
    }

    pub fn from_c64(c: Complex64, prec: Precision) -> Self {
        MpComplex::new(from_f64(c.re, prec), from_f64(c.im, prec))
    }

    pub fn from_real(re: Float, prec: Precision) -> Self {
        MpComplex::new(re, zero(prec))
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(to_f64(&self.re), to_f64(&self.im))
    }

    pub fn conj(&self) -> Self {
        MpComplex::new(self.re.clone(), -&self.im)
    }

    pub fn norm_sqr(&self) -> Float {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn abs(&self) -> Float {
        self.norm_sqr().sqrt()
    }

    /// `log10 |z|`; `-inf` for zero.
    pub fn log10_abs(&self) -> f64 {
        let l = log2_abs(&self.norm_sqr());
        l / (2.0 * BITS_PER_DIGIT)
    }

    /// Cheap magnitude for comparisons and heuristics (`f64`, may saturate).
    pub fn abs_f64(&self) -> f64 {
        libm::pow(10.0, self.log10_abs())
    }

    pub fn is_zero(&self) -> bool {
        self.re.repr().significand().is_zero() && self.im.repr().significand().is_zero()
    }

    pub fn scale(&self, k: &Float) -> Self {
        MpComplex::new(&self.re * k, &self.im * k)
    }

    /// Multiply by `i`.
    pub fn mul_i(&self) -> Self {
        MpComplex::new(-&self.im, self.re.clone())
    }

    pub fn recip(&self) -> Self {
        let d = self.norm_sqr();
        MpComplex::new(&self.re / &d, -(&self.im / &d))
    }

    pub fn with_precision(&self, prec: Precision) -> Self {
        let bits = prec.bits();
        MpComplex::new(
            self.re.clone().with_precision(bits).value(),
            self.im.clone().with_precision(bits).value(),
        )
    }
}

impl Add<&MpComplex> for &MpComplex {
    type Output = MpComplex;
    fn add(self, rhs: &MpComplex) -> MpComplex {
        MpComplex::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Sub<&MpComplex> for &MpComplex {
    type Output = MpComplex;
    fn sub(self, rhs: &MpComplex) -> MpComplex {
        MpComplex::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl Mul<&MpComplex> for &MpComplex {
    type Output = MpComplex;
    fn mul(self, rhs: &MpComplex) -> MpComplex {
        MpComplex::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl Div<&MpComplex> for &MpComplex {
    type Output = MpComplex;
    fn div(self, rhs: &MpComplex) -> MpComplex {
        let d = rhs.norm_sqr();
        let re = &self.re * &rhs.re + &self.im * &rhs.im;
        let im = &self.im * &rhs.re - &self.re * &rhs.im;
        MpComplex::new(re / &d, im / &d)
    }
}

impl Neg for &MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        MpComplex::new(-&self.re, -&self.im)
    }
}

impl AddAssign<&MpComplex> for MpComplex {
    fn add_assign(&mut self, rhs: &MpComplex) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&MpComplex> for MpComplex {
    fn sub_assign(&mut self, rhs: &MpComplex) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}
