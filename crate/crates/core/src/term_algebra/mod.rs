//! Symbolic functions of time in the basis `f⁽ⁿ⁾(t)·e^{2πijt}` and `e^{2πijt}`.
//!
//! A [`TermSeries`] is a finite linear combination of these basis functions
//! with coefficients in a [`Coefficient`] ring. The basis is closed under
//! differentiation and under multiplication by `e^{2πiΔj·t}`, which is all the
//! lattice recurrences need.

mod coefficient;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Zero;

use crate::bump::{BumpError, BumpSpec, DerivativeTable};

pub use coefficient::{Coefficient, ExactCoeff, GaussRational};

/// Basis element: `f⁽ⁿ⁾(t)·e^{2πi·freq·t}` when `f_order = Some(n)`, plain
/// `e^{2πi·freq·t}` when `f_order = None`.
///
/// The derived ordering puts `None` first, then sorts by frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey {
    pub f_order: Option<u32>,
    pub freq: i64,
}

impl TermKey {
    pub const fn oscillation(freq: i64) -> Self {
        TermKey { f_order: None, freq }
    }

    pub const fn bump(order: u32, freq: i64) -> Self {
        TermKey { f_order: Some(order), freq }
    }
}

/// `e^{2πi·turns}`, exact at multiples of a quarter turn.
pub fn unit_phase(turns: f64) -> Complex64 {
    let r = turns - turns.round();
    let quarter = 4.0 * r;
    if quarter == quarter.round() {
        return match quarter as i64 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            -1 => Complex64::new(0.0, -1.0),
            _ => Complex64::new(-1.0, 0.0),
        };
    }
    Complex64::from_polar(1.0, TAU * r)
}

/// Finite sum `Σ c_key · basis(key)` in canonical form (no zero coefficients).
#[derive(Clone, PartialEq)]
pub struct TermSeries<C: Coefficient> {
    terms: BTreeMap<TermKey, C>,
}

impl<C: Coefficient> Default for TermSeries<C> {
    fn default() -> Self {
        TermSeries { terms: BTreeMap::new() }
    }
}

impl<C: Coefficient> std::fmt::Debug for TermSeries<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

impl<C: Coefficient> TermSeries<C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(key: TermKey, coeff: C) -> Self {
        let mut s = Self::zero();
        s.accumulate(key, coeff);
        s
    }

    /// The bump itself, `f(t)`.
    pub fn bump() -> Self {
        Self::single(TermKey::bump(0, 0), C::one_())
    }

    /// `e^{2πi·freq·t}`.
    pub fn oscillation(freq: i64) -> Self {
        Self::single(TermKey::oscillation(freq), C::one_())
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (TermKey, C)>) -> Self {
        let mut s = Self::zero();
        for (k, c) in terms {
            s.accumulate(k, c);
        }
        s
    }

    fn accumulate(&mut self, key: TermKey, coeff: C) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.remove(&key) {
            Some(existing) => {
                let sum = existing + coeff;
                if !sum.is_zero() {
                    self.terms.insert(key, sum);
                }
            }
            None => {
                self.terms.insert(key, coeff);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, key: &TermKey) -> Option<&C> {
        self.terms.get(key)
    }

    /// Terms in canonical key order.
    pub fn iter(&self) -> impl Iterator<Item = (&TermKey, &C)> {
        self.terms.iter()
    }

    pub fn max_f_order(&self) -> Option<u32> {
        self.terms.keys().filter_map(|k| k.f_order).max()
    }

    /// True when every term carries a factor `f⁽ⁿ⁾`, so the function vanishes
    /// wherever all derivatives of the bump vanish.
    pub fn all_terms_carry_bump(&self) -> bool {
        self.terms.keys().all(|k| k.f_order.is_some())
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.accumulate(*k, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self::from_terms(self.terms.iter().map(|(k, v)| (*k, v.clone() * c.clone())))
    }

    pub fn scale_int(&self, n: i64) -> Self {
        if n == 1 {
            return self.clone();
        }
        self.scale(&C::real(n, 1))
    }

    pub fn neg(&self) -> Self {
        TermSeries {
            terms: self.terms.iter().map(|(k, v)| (*k, -v.clone())).collect(),
        }
    }

    /// Termwise `d/dt`: `f⁽ⁿ⁾e^{2πijt} ↦ f⁽ⁿ⁺¹⁾e^{2πijt} + 2πij·f⁽ⁿ⁾e^{2πijt}`.
    pub fn differentiate(&self) -> Self {
        let mut out = Self::zero();
        for (key, c) in &self.terms {
            if let Some(n) = key.f_order {
                out.accumulate(TermKey::bump(n + 1, key.freq), c.clone());
            }
            if key.freq != 0 {
                let factor = C::monomial(Ratio::zero(), Ratio::from_integer(key.freq), 1);
                out.accumulate(*key, c.clone() * factor);
            }
        }
        out
    }

    /// Multiply by `e^{2πi·delta·t}`.
    pub fn shift_frequency(&self, delta: i64) -> Self {
        TermSeries {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (TermKey { f_order: k.f_order, freq: k.freq + delta }, c.clone()))
                .collect(),
        }
    }

    /// Product of two series, provided one of them is a pure trigonometric
    /// polynomial; products `f⁽ᵃ⁾f⁽ᵇ⁾` are outside the basis and give `None`.
    pub fn product(&self, other: &Self) -> Option<Self> {
        let (osc, general) = if self.terms.keys().all(|k| k.f_order.is_none()) {
            (self, other)
        } else if other.terms.keys().all(|k| k.f_order.is_none()) {
            (other, self)
        } else {
            return None;
        };
        let mut out = Self::zero();
        for (ko, co) in &osc.terms {
            for (kg, cg) in &general.terms {
                out.accumulate(TermKey { f_order: kg.f_order, freq: kg.freq + ko.freq }, cg.clone() * co.clone());
            }
        }
        Some(out)
    }

    /// Complex conjugate as a function of real `t` (the bump is real-valued).
    pub fn conjugate(&self) -> Self {
        TermSeries {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (TermKey { f_order: k.f_order, freq: -k.freq }, c.conj()))
                .collect(),
        }
    }

    /// Numeric value at `t`, asking `bump` for the derivatives it needs.
    pub fn evaluate(&self, t: f64, bump: &BumpSpec) -> Result<Complex64, BumpError> {
        let order = self.max_f_order().unwrap_or(0) as usize;
        let table = bump.derivatives(t, order)?;
        self.evaluate_with(&table)
    }

    /// Numeric value using precomputed bump derivatives at a fixed time.
    pub fn evaluate_with(&self, table: &DerivativeTable) -> Result<Complex64, BumpError> {
        let mut acc = Complex64::zero();
        for (key, c) in &self.terms {
            let phase = unit_phase(key.freq as f64 * table.t());
            let factor = match key.f_order {
                None => 1.0,
                Some(n) => table.get(n as usize)?,
            };
            if factor == 0.0 {
                continue;
            }
            acc += c.to_complex() * phase * factor;
        }
        Ok(acc)
    }
}

impl<C: Coefficient> std::ops::Add for &TermSeries<C> {
    type Output = TermSeries<C>;

    fn add(self, rhs: Self) -> TermSeries<C> {
        TermSeries::add(self, rhs)
    }
}
