//! Coefficient rings for [`TermSeries`](super::TermSeries).
//!
//! Every coefficient the recurrences produce is a Gaussian rational times an
//! integer power of 2π. [`ExactCoeff`] stores finite sums of such monomials,
//! i.e. elements of `Q(i)[2π, 1/(2π)]`; since π is transcendental the
//! representation is faithful and equality is decidable. [`Complex64`] is the
//! lossy double-precision alternative.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Mul, Neg};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Scalar ring used for the coefficients of a term series.
pub trait Coefficient:
    Clone
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + Zero
    + Add<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// `(re + i·im)·(2π)^power` with rational real and imaginary parts.
    fn monomial(re: Ratio<i64>, im: Ratio<i64>, power: i32) -> Self;

    fn conj(&self) -> Self;

    fn to_complex(&self) -> Complex64;

    /// Human-readable exact form, when one exists.
    fn exact_repr(&self) -> Option<String> {
        None
    }

    fn one_() -> Self {
        Self::monomial(Ratio::one(), Ratio::zero(), 0)
    }

    fn real(num: i64, den: i64) -> Self {
        Self::monomial(Ratio::new(num, den), Ratio::zero(), 0)
    }

    fn imag(num: i64, den: i64) -> Self {
        Self::monomial(Ratio::zero(), Ratio::new(num, den), 0)
    }
}

impl Coefficient for Complex64 {
    fn monomial(re: Ratio<i64>, im: Ratio<i64>, power: i32) -> Self {
        let re = *re.numer() as f64 / *re.denom() as f64;
        let im = *im.numer() as f64 / *im.denom() as f64;
        Complex64::new(re, im) * TAU.powi(power)
    }

    fn conj(&self) -> Self {
        Complex64::conj(self)
    }

    fn to_complex(&self) -> Complex64 {
        *self
    }
}

/// A Gaussian rational `re + i·im`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GaussRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRational {
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn mul(&self, other: &Self) -> Self {
        GaussRational {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }
}

/// Exact coefficient: a finite sum `Σ_p z_p·(2π)^p` with Gaussian rational `z_p`.
///
/// Parts are kept sorted by power with no zero entries, so structural
/// equality is mathematical equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ExactCoeff {
    parts: Vec<(i32, GaussRational)>,
}

impl ExactCoeff {
    pub fn parts(&self) -> &[(i32, GaussRational)] {
        &self.parts
    }

    fn from_parts_unsorted(mut parts: Vec<(i32, GaussRational)>) -> Self {
        parts.sort_by_key(|(p, _)| *p);
        let mut merged: Vec<(i32, GaussRational)> = Vec::with_capacity(parts.len());
        for (p, z) in parts {
            match merged.last_mut() {
                Some((q, acc)) if *q == p => {
                    acc.re += z.re;
                    acc.im += z.im;
                }
                _ => merged.push((p, z)),
            }
        }
        merged.retain(|(_, z)| !z.is_zero());
        ExactCoeff { parts: merged }
    }
}

fn big(r: Ratio<i64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // extremely large or small ratio: fall back to log-scaled division
        let (neg, ln) = ln_abs_ratio(r);
        let v = ln.exp();
        if neg {
            -v
        } else {
            v
        }
    })
}

/// Sign and natural log of `|r|` for a nonzero big rational, without overflow.
pub(crate) fn ln_abs_ratio(r: &BigRational) -> (bool, f64) {
    fn ln_abs_int(n: &BigInt) -> f64 {
        let bits = n.bits();
        if bits <= 1000 {
            n.abs().to_f64().unwrap_or(f64::INFINITY).ln()
        } else {
            let shift = bits - 64;
            let top = (n.abs() >> shift).to_f64().unwrap_or(f64::INFINITY);
            top.ln() + shift as f64 * std::f64::consts::LN_2
        }
    }
    (r.is_negative(), ln_abs_int(r.numer()) - ln_abs_int(r.denom()))
}

impl Zero for ExactCoeff {
    fn zero() -> Self {
        ExactCoeff::default()
    }

    fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }
}

impl Add for ExactCoeff {
    type Output = ExactCoeff;

    fn add(self, rhs: ExactCoeff) -> ExactCoeff {
        if rhs.parts.is_empty() {
            return self;
        }
        if self.parts.is_empty() {
            return rhs;
        }
        let mut parts = self.parts;
        parts.extend(rhs.parts);
        ExactCoeff::from_parts_unsorted(parts)
    }
}

impl Mul for ExactCoeff {
    type Output = ExactCoeff;

    fn mul(self, rhs: ExactCoeff) -> ExactCoeff {
        let mut parts = Vec::with_capacity(self.parts.len() * rhs.parts.len());
        for (p, a) in &self.parts {
            for (q, b) in &rhs.parts {
                parts.push((p + q, a.mul(b)));
            }
        }
        ExactCoeff::from_parts_unsorted(parts)
    }
}

impl Neg for ExactCoeff {
    type Output = ExactCoeff;

    fn neg(self) -> ExactCoeff {
        ExactCoeff {
            parts: self
                .parts
                .into_iter()
                .map(|(p, z)| (p, GaussRational { re: -z.re, im: -z.im }))
                .collect(),
        }
    }
}

impl Coefficient for ExactCoeff {
    fn monomial(re: Ratio<i64>, im: Ratio<i64>, power: i32) -> Self {
        ExactCoeff::from_parts_unsorted(vec![(power, GaussRational { re: big(re), im: big(im) })])
    }

    fn conj(&self) -> Self {
        ExactCoeff {
            parts: self
                .parts
                .iter()
                .map(|(p, z)| (*p, GaussRational { re: z.re.clone(), im: -z.im.clone() }))
                .collect(),
        }
    }

    fn to_complex(&self) -> Complex64 {
        self.parts
            .iter()
            .map(|(p, z)| {
                Complex64::new(rational_to_f64(&z.re), rational_to_f64(&z.im)) * TAU.powi(*p)
            })
            .sum()
    }

    fn exact_repr(&self) -> Option<String> {
        Some(self.to_string())
    }
}

impl fmt::Display for ExactCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "0");
        }
        for (idx, (p, z)) in self.parts.iter().enumerate() {
            if idx > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({} + {}i)", z.re, z.im)?;
            if *p != 0 {
                write!(f, "*(2pi)^{p}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ExactCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Ratio<i64> {
        Ratio::new(n, d)
    }

    #[test]
    fn monomials_cancel_to_canonical_zero() {
        let a = ExactCoeff::monomial(q(1, 3), q(-2, 5), 2);
        let b = ExactCoeff::monomial(q(-1, 3), q(2, 5), 2);
        let s = a + b;
        assert!(s.is_zero());
        assert!(s.parts().is_empty());
    }

    #[test]
    fn powers_of_two_pi_stay_separate() {
        let a = ExactCoeff::monomial(q(1, 1), q(0, 1), 1);
        let b = ExactCoeff::monomial(q(-1, 1), q(0, 1), 0);
        let s = a.clone() + b;
        assert_eq!(s.parts().len(), 2);
        assert!((s.to_complex().re - (TAU - 1.0)).abs() < 1e-14);
        assert_ne!(s, a);
    }

    #[test]
    fn product_adds_powers() {
        // (2πi)·(i/(2π)) = -1
        let a = ExactCoeff::monomial(q(0, 1), q(1, 1), 1);
        let b = ExactCoeff::monomial(q(0, 1), q(1, 1), -1);
        assert_eq!(a * b, ExactCoeff::real(-1, 1));
    }

    #[test]
    fn conjugation_is_an_involution() {
        let a = ExactCoeff::monomial(q(3, 7), q(-4, 9), -3) + ExactCoeff::imag(5, 2);
        assert_eq!(a.conj().conj(), a);
        let z = a.to_complex();
        let w = a.conj().to_complex();
        assert_eq!(z.conj(), w);
    }

    #[test]
    fn double_mode_monomial_matches_exact() {
        let e = ExactCoeff::monomial(q(-5, 3), q(7, 11), -2).to_complex();
        let d = <Complex64 as Coefficient>::monomial(q(-5, 3), q(7, 11), -2);
        assert!((e - d).norm() < 1e-16);
    }

    #[test]
    fn huge_ratios_convert_without_overflow() {
        let big_num = BigInt::from(10).pow(400);
        let r = BigRational::new(big_num.clone(), big_num * BigInt::from(4));
        assert!((rational_to_f64(&r) - 0.25).abs() < 1e-15);
        let (neg, ln) = ln_abs_ratio(&BigRational::from_integer(BigInt::from(10).pow(500)));
        assert!(!neg);
        assert!((ln - 500.0 * 10f64.ln()).abs() < 1e-9);
    }
}
