//! Smooth switch-on profiles `f` and exact derivatives of every order.
//!
//! Half bump: `f(t) = exp(1/(T − t))` for `t > T`, zero otherwise. With
//! `u = 1/(T − t)` one has `f⁽ⁿ⁾ = P_n(u)·e^u`, where `P_0 = 1` and
//! `P_{n+1} = u²(P_n + P_n′)`.
//!
//! Compact bump on `[T₁, T₂]`: `f(t) = exp(−u₁ − u₂)` with `u₁ = 1/(t − T₁)`,
//! `u₂ = 1/(T₂ − t)`, so `f⁽ⁿ⁾ = Q_n(u₁, u₂)·f` with
//! `Q_{n+1} = −u₁²∂₁Q_n + u₂²∂₂Q_n + (u₁² − u₂²)Q_n`.
//!
//! Polynomials carry exact big-integer coefficients. Above
//! [`EXACT_EVAL_THRESHOLD`] the polynomial is evaluated exactly at the
//! (binary) value of `u` and rounded once, since the alternating signs make
//! double-precision Horner lose most of its digits.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub const DEFAULT_MAX_ORDER: usize = 64;

/// Orders above this are evaluated in exact arithmetic.
pub const EXACT_EVAL_THRESHOLD: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BumpError {
    #[error("derivative order {requested} exceeds the oracle maximum {max}")]
    OrderExceeded { requested: usize, max: usize },
    #[error("invalid bump: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BumpKind {
    /// Supported on `[threshold, ∞)`.
    Half { threshold: f64 },
    /// Supported on `[start, end]`.
    Compact { start: f64, end: f64 },
    /// Sum of compact bumps on disjoint, ordered intervals.
    Multi { intervals: Vec<(f64, f64)> },
}

/// `f⁽ⁿ⁾(t) = P_n(u)·e^u` for the half bump.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivPolynomial {
    pub order: usize,
    /// `coeffs[j]` multiplies `u^j`.
    pub coeffs: Vec<BigInt>,
    coeffs_f64: Vec<f64>,
}

impl DerivPolynomial {
    fn new(order: usize, coeffs: Vec<BigInt>) -> Self {
        let coeffs_f64 = coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::INFINITY)).collect();
        DerivPolynomial { order, coeffs, coeffs_f64 }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn next(&self) -> Self {
        // u²·(P + P′)
        let d = self.coeffs.len();
        let mut sum = vec![BigInt::zero(); d];
        for (j, c) in self.coeffs.iter().enumerate() {
            sum[j] += c;
            if j > 0 {
                sum[j - 1] += c * BigInt::from(j);
            }
        }
        let mut coeffs = vec![BigInt::zero(); 2];
        coeffs.extend(sum);
        DerivPolynomial::new(self.order + 1, coeffs)
    }

    fn eval_f64(&self, u: f64) -> f64 {
        self.coeffs_f64.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    fn eval_exact(&self, u: &BigRational) -> BigRational {
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * u + BigRational::from_integer(c.clone()))
    }
}

/// `f⁽ⁿ⁾ = Q_n(u₁, u₂)·f` for the compact bump.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePolynomial {
    pub order: usize,
    /// `((i, j), c)` stands for `c·u₁^i·u₂^j`.
    pub terms: Vec<((u32, u32), BigInt)>,
    terms_f64: Vec<((i32, i32), f64)>,
}

impl BivariatePolynomial {
    fn new(order: usize, map: BTreeMap<(u32, u32), BigInt>) -> Self {
        let terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let terms_f64 = terms
            .iter()
            .map(|((i, j), c)| ((*i as i32, *j as i32), c.to_f64().unwrap_or(f64::INFINITY)))
            .collect();
        BivariatePolynomial { order, terms, terms_f64 }
    }

    fn next(&self) -> Self {
        let mut map: BTreeMap<(u32, u32), BigInt> = BTreeMap::new();
        let mut push = |key: (u32, u32), c: BigInt| {
            *map.entry(key).or_insert_with(BigInt::zero) += c;
        };
        for ((i, j), c) in &self.terms {
            let (i, j) = (*i, *j);
            if i > 0 {
                push((i + 1, j), -(c * BigInt::from(i)));
            }
            if j > 0 {
                push((i, j + 1), c * BigInt::from(j));
            }
            push((i + 2, j), c.clone());
            push((i, j + 2), -c.clone());
        }
        BivariatePolynomial::new(self.order + 1, map)
    }

    fn eval_f64(&self, u1: f64, u2: f64) -> f64 {
        self.terms_f64.iter().map(|((i, j), c)| c * u1.powi(*i) * u2.powi(*j)).sum()
    }

    fn eval_exact(&self, u1: &BigRational, u2: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for ((i, j), c) in &self.terms {
            let term = num_traits::pow(u1.clone(), *i as usize)
                * num_traits::pow(u2.clone(), *j as usize)
                * BigRational::from_integer(c.clone());
            acc += term;
        }
        acc
    }
}

#[derive(Default)]
struct Tables {
    half: OnceLock<Vec<DerivPolynomial>>,
    compact: OnceLock<Vec<BivariatePolynomial>>,
}

/// A switch-on profile plus its derivative oracle.
///
/// Clones share the memoized polynomial tables.
#[derive(Clone)]
pub struct BumpSpec {
    kind: BumpKind,
    max_order: usize,
    tables: Arc<Tables>,
}

impl fmt::Debug for BumpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BumpSpec")
            .field("kind", &self.kind)
            .field("max_order", &self.max_order)
            .finish()
    }
}

impl PartialEq for BumpSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.max_order == other.max_order
    }
}

impl BumpSpec {
    pub fn new(kind: BumpKind) -> Result<Self, BumpError> {
        match &kind {
            BumpKind::Half { threshold } => {
                if !(threshold.is_finite() && *threshold > 0.0) {
                    return Err(BumpError::Invalid(format!("threshold T must be > 0, got {threshold}")));
                }
            }
            BumpKind::Compact { start, end } => check_interval(*start, *end)?,
            BumpKind::Multi { intervals } => {
                if intervals.is_empty() {
                    return Err(BumpError::Invalid("multi bump needs at least one interval".into()));
                }
                for &(a, b) in intervals {
                    check_interval(a, b)?;
                }
                for w in intervals.windows(2) {
                    if w[1].0 <= w[0].1 {
                        return Err(BumpError::Invalid(format!(
                            "intervals [{}, {}] and [{}, {}] overlap or are out of order",
                            w[0].0, w[0].1, w[1].0, w[1].1
                        )));
                    }
                }
            }
        }
        Ok(BumpSpec { kind, max_order: DEFAULT_MAX_ORDER, tables: Arc::default() })
    }

    pub fn half(threshold: f64) -> Result<Self, BumpError> {
        Self::new(BumpKind::Half { threshold })
    }

    pub fn compact(start: f64, end: f64) -> Result<Self, BumpError> {
        Self::new(BumpKind::Compact { start, end })
    }

    pub fn multi(intervals: Vec<(f64, f64)>) -> Result<Self, BumpError> {
        Self::new(BumpKind::Multi { intervals })
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self.tables = Arc::default();
        self
    }

    pub fn kind(&self) -> &BumpKind {
        &self.kind
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Start of the support: the `T` of the half bump, `T₁` otherwise.
    pub fn switch_on(&self) -> f64 {
        match &self.kind {
            BumpKind::Half { threshold } => *threshold,
            BumpKind::Compact { start, .. } => *start,
            BumpKind::Multi { intervals } => intervals[0].0,
        }
    }

    /// True when `f` and all its derivatives vanish at `t`.
    pub fn vanishes_at(&self, t: f64) -> bool {
        match &self.kind {
            BumpKind::Half { threshold } => t <= *threshold,
            BumpKind::Compact { start, end } => t <= *start || t >= *end,
            BumpKind::Multi { intervals } => intervals.iter().all(|&(a, b)| t <= a || t >= b),
        }
    }

    fn check_order(&self, n: usize) -> Result<(), BumpError> {
        if n > self.max_order {
            Err(BumpError::OrderExceeded { requested: n, max: self.max_order })
        } else {
            Ok(())
        }
    }

    fn half_table(&self) -> &[DerivPolynomial] {
        self.tables.half.get_or_init(|| {
            let mut table = vec![DerivPolynomial::new(0, vec![BigInt::one()])];
            for n in 0..self.max_order {
                let next = table[n].next();
                table.push(next);
            }
            table
        })
    }

    fn compact_table(&self) -> &[BivariatePolynomial] {
        self.tables.compact.get_or_init(|| {
            let mut first = BTreeMap::new();
            first.insert((0, 0), BigInt::one());
            let mut table = vec![BivariatePolynomial::new(0, first)];
            for n in 0..self.max_order {
                let next = table[n].next();
                table.push(next);
            }
            table
        })
    }

    /// Exact polynomial `P_n` of the half bump.
    pub fn deriv_polynomial(&self, n: usize) -> Result<&DerivPolynomial, BumpError> {
        self.check_order(n)?;
        Ok(&self.half_table()[n])
    }

    /// Exact polynomial `Q_n` of the compact bump.
    pub fn compact_polynomial(&self, n: usize) -> Result<&BivariatePolynomial, BumpError> {
        self.check_order(n)?;
        Ok(&self.compact_table()[n])
    }

    /// `f⁽ⁿ⁾(t)`.
    pub fn value(&self, n: usize, t: f64) -> Result<f64, BumpError> {
        self.check_order(n)?;
        Ok(match &self.kind {
            BumpKind::Half { threshold } => self.half_value(n, t, *threshold),
            BumpKind::Compact { start, end } => self.compact_value(n, t, *start, *end),
            BumpKind::Multi { intervals } => intervals
                .iter()
                .map(|&(a, b)| self.compact_value(n, t, a, b))
                .sum(),
        })
    }

    /// `f⁽⁰⁾(t), …, f⁽ᵒʳᵈᵉʳ⁾(t)`.
    pub fn derivatives(&self, t: f64, order: usize) -> Result<DerivativeTable, BumpError> {
        self.check_order(order)?;
        let values = (0..=order).map(|n| self.value(n, t)).collect::<Result<_, _>>()?;
        Ok(DerivativeTable { t, values })
    }

    fn half_value(&self, n: usize, t: f64, threshold: f64) -> f64 {
        if t <= threshold {
            return 0.0;
        }
        let u = 1.0 / (threshold - t);
        let poly = &self.half_table()[n];
        if n <= EXACT_EVAL_THRESHOLD {
            let p = poly.eval_f64(u);
            let e = u.exp();
            if p.is_finite() && e > 0.0 {
                return p * e;
            }
        }
        let Some(ur) = BigRational::from_float(u) else {
            return 0.0;
        };
        scale_by_exp(&poly.eval_exact(&ur), u)
    }

    fn compact_value(&self, n: usize, t: f64, start: f64, end: f64) -> f64 {
        if t <= start || t >= end {
            return 0.0;
        }
        let u1 = 1.0 / (t - start);
        let u2 = 1.0 / (end - t);
        let phase = -u1 - u2;
        let poly = &self.compact_table()[n];
        if n <= EXACT_EVAL_THRESHOLD {
            let p = poly.eval_f64(u1, u2);
            let e = phase.exp();
            if p.is_finite() && e > 0.0 {
                return p * e;
            }
        }
        let (Some(r1), Some(r2)) = (BigRational::from_float(u1), BigRational::from_float(u2)) else {
            return 0.0;
        };
        scale_by_exp(&poly.eval_exact(&r1, &r2), phase)
    }
}

fn check_interval(a: f64, b: f64) -> Result<(), BumpError> {
    if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
        return Err(BumpError::Invalid(format!("interval needs 0 < T1 < T2, got [{a}, {b}]")));
    }
    Ok(())
}

/// `p·e^{phase}` for an exact `p`, rounded once and safe against overflow of `p`.
fn scale_by_exp(p: &BigRational, phase: f64) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    let (mant, exp2) = mantissa_exponent(p);
    mant * (phase + exp2 as f64 * std::f64::consts::LN_2).exp()
}

/// `r = mant·2^exp2` with `mant` carrying 64 leading bits of numerator and denominator.
fn mantissa_exponent(r: &BigRational) -> (f64, i64) {
    let top = |n: &BigInt| -> (f64, i64) {
        let bits = n.bits() as i64;
        let shift = (bits - 64).max(0);
        ((n.abs() >> shift as u64).to_f64().unwrap_or(f64::INFINITY), shift)
    };
    let (num, sn) = top(r.numer());
    let (den, sd) = top(r.denom());
    let mant = num / den;
    (if r.is_negative() { -mant } else { mant }, sn - sd)
}

/// Bump derivatives at one time, `values[n] = f⁽ⁿ⁾(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTable {
    t: f64,
    values: Vec<f64>,
}

impl DerivativeTable {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, n: usize) -> Result<f64, BumpError> {
        self.values.get(n).copied().ok_or(BumpError::OrderExceeded {
            requested: n,
            max: self.values.len().saturating_sub(1),
        })
    }
}

/// `f⁽ⁿ⁾(t)` for the half bump with threshold `threshold`.
pub fn half_bump_deriv(n: usize, t: f64, threshold: f64) -> Result<f64, BumpError> {
    BumpSpec::half(threshold)?.with_max_order(n.max(1)).value(n, t)
}

/// `f⁽ⁿ⁾(t)` for the compact bump on `[start, end]`.
pub fn compact_bump_deriv(n: usize, t: f64, start: f64, end: f64) -> Result<f64, BumpError> {
    BumpSpec::compact(start, end)?.with_max_order(n.max(1)).value(n, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&c| BigInt::from(c)).collect()
    }

    #[test]
    fn first_polynomials() {
        let b = BumpSpec::half(1.0).unwrap();
        assert_eq!(b.deriv_polynomial(0).unwrap().coeffs, ints(&[1]));
        assert_eq!(b.deriv_polynomial(1).unwrap().coeffs, ints(&[0, 0, 1]));
        assert_eq!(b.deriv_polynomial(2).unwrap().coeffs, ints(&[0, 0, 0, 2, 1]));
        assert_eq!(b.deriv_polynomial(3).unwrap().coeffs, ints(&[0, 0, 0, 0, 6, 6, 1]));
    }

    #[test]
    fn polynomial_degree_and_leading_coefficient() {
        let b = BumpSpec::half(1.0).unwrap();
        for n in 0..=b.max_order() {
            let p = b.deriv_polynomial(n).unwrap();
            assert_eq!(p.degree(), 2 * n);
            assert_eq!(p.coeffs.last().unwrap(), &BigInt::one());
            assert!(p.coeffs.iter().all(|c| !c.is_negative()));
        }
    }

    #[test]
    fn order_bound_is_enforced() {
        let b = BumpSpec::half(1.0).unwrap().with_max_order(8);
        assert_eq!(
            b.deriv_polynomial(9).unwrap_err(),
            BumpError::OrderExceeded { requested: 9, max: 8 }
        );
        assert!(b.value(9, 2.0).is_err());
        assert!(b.derivatives(2.0, 9).is_err());
        assert!(b.derivatives(2.0, 8).is_ok());
    }

    #[test]
    fn half_bump_values() {
        let e1 = (-1.0f64).exp();
        assert!((half_bump_deriv(0, 4.0, 3.0).unwrap() - e1).abs() <= 1e-15);
        assert_eq!(half_bump_deriv(3, 3.0, 3.0).unwrap(), 0.0);
        assert_eq!(half_bump_deriv(0, 0.5, 3.0).unwrap(), 0.0);
        // P₂(−2) = 16 − 16 = 0
        assert!(half_bump_deriv(2, 3.5, 3.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn compact_bump_values() {
        let mid = compact_bump_deriv(0, 2.0, 1.0, 3.0).unwrap();
        assert!((mid - (-2.0f64).exp()).abs() < 1e-16);
        for n in 0..6 {
            assert_eq!(compact_bump_deriv(n, 3.1, 1.0, 3.0).unwrap(), 0.0);
            assert_eq!(compact_bump_deriv(n, 0.9, 1.0, 3.0).unwrap(), 0.0);
        }
        assert!(compact_bump_deriv(1, 2.0, 1.0, 3.0).unwrap().abs() < 1e-16);
        assert!(compact_bump_deriv(3, 2.5, 2.0, 3.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(BumpSpec::half(0.0).is_err());
        assert!(BumpSpec::compact(3.0, 2.0).is_err());
        assert!(BumpSpec::compact(0.0, 2.0).is_err());
        assert!(BumpSpec::multi(vec![(1.0, 3.0), (2.0, 4.0)]).is_err());
        assert!(BumpSpec::multi(vec![(4.0, 5.0), (1.0, 2.0)]).is_err());
        assert!(BumpSpec::multi(vec![]).is_err());
        assert!(BumpSpec::multi(vec![(1.0, 2.0), (3.0, 4.0)]).is_ok());
    }

    fn fd_check(b: &BumpSpec, n: usize, t: f64) {
        let h = 1e-3;
        let f = |s: f64| b.value(n, s).unwrap();
        // Richardson-extrapolated centered difference, O(h⁴)
        let d1 = (f(t + h) - f(t - h)) / (2.0 * h);
        let d2 = (f(t + h / 2.0) - f(t - h / 2.0)) / h;
        let fd = (4.0 * d2 - d1) / 3.0;
        let exact = b.value(n + 1, t).unwrap();
        let scale = exact.abs().max(1e-3 * f(t).abs().max(1e-300));
        assert!(
            (fd - exact).abs() <= 1e-6 * scale,
            "n={n} t={t}: fd={fd} exact={exact}"
        );
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let half = BumpSpec::half(1.0).unwrap();
        let compact = BumpSpec::compact(2.0, 3.0).unwrap();
        for n in 0..=5 {
            for &t in &[1.3, 1.7, 2.0, 2.9, 4.5] {
                fd_check(&half, n, t);
            }
            for &t in &[2.3, 2.45, 2.6, 2.8] {
                fd_check(&compact, n, t);
            }
        }
    }

    #[test]
    fn derivatives_vanish_smoothly_at_the_edges() {
        let half = BumpSpec::half(1.0).unwrap();
        let compact = BumpSpec::compact(2.0, 3.0).unwrap();
        for n in 0..=10 {
            assert!(half.value(n, 1.0 + 1e-3).unwrap().abs() < 1e-30);
            assert!(compact.value(n, 2.0 + 1e-3).unwrap().abs() < 1e-30);
            assert!(compact.value(n, 3.0 - 1e-3).unwrap().abs() < 1e-30);
        }
        for n in [20, 40, 64] {
            let v = half.value(n, 1.0 + 1e-6).unwrap();
            assert!(v.is_finite() && v.abs() < 1e-30, "n={n}: {v}");
        }
    }

    #[test]
    fn exact_and_double_paths_agree_where_both_are_accurate() {
        let half = BumpSpec::half(1.0).unwrap();
        // large |u| makes Horner well conditioned (dominant leading term)
        let t = 1.05;
        let u = 1.0 / (1.0 - t);
        for n in [3usize, 5, 8] {
            let poly = half.deriv_polynomial(n).unwrap();
            let d = poly.eval_f64(u) * u.exp();
            let x = scale_by_exp(&poly.eval_exact(&BigRational::from_float(u).unwrap()), u);
            assert!(((d - x) / x).abs() < 1e-11, "n={n}: {d} vs {x}");
        }
    }

    #[test]
    fn high_orders_are_finite() {
        let half = BumpSpec::half(1.0).unwrap();
        for n in [21usize, 30, 50, 64] {
            for &t in &[1.01, 1.5, 2.0, 10.0] {
                assert!(half.value(n, t).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn multi_bump_is_the_sum_of_its_pieces() {
        let pieces = vec![(1.0, 2.0), (2.5, 3.0), (4.0, 6.0)];
        let multi = BumpSpec::multi(pieces.clone()).unwrap();
        let mut t = 0.0;
        while t < 7.0 {
            for n in 0..4 {
                let sum: f64 =
                    pieces.iter().map(|&(a, b)| compact_bump_deriv(n, t, a, b).unwrap()).sum();
                assert_eq!(multi.value(n, t).unwrap(), sum);
            }
            t += 0.037;
        }
    }

    #[test]
    fn vanishing_predicate_matches_support() {
        let multi = BumpSpec::multi(vec![(2.0, 3.0), (4.0, 5.0)]).unwrap();
        assert!(multi.vanishes_at(1.0));
        assert!(!multi.vanishes_at(2.5));
        assert!(multi.vanishes_at(3.5));
        assert!(!multi.vanishes_at(4.5));
        assert!(multi.vanishes_at(5.0));
        let half = BumpSpec::half(1.0).unwrap();
        assert!(half.vanishes_at(1.0) && !half.vanishes_at(1.0 + 1e-9));
    }
}
