//! Transversal spectral measures, Rényi entropies, fitted fractal exponents
//! and Sobolev partial sums.
//!
//! Everything is computed from a [`SpectralSlice`]: the squared mode norms
//! along one lattice axis. [`BoxSlice`] reads them from a built solution;
//! [`ClosedFormSlice`] generates them from the generator data, which lets
//! sums run far beyond any box (the axis slices never need the recurrence).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::bump::{BumpError, BumpSpec};
use crate::construction::{dot, FourierSolution3D, GeneratorData, LatticeFrame};
use crate::term_algebra::Coefficient;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("cutoff {requested} exceeds the available range (max {max})")]
    ExceedsBox { requested: u64, max: u64 },
    #[error("the slice vanishes identically; the measure is undefined")]
    ZeroMeasure,
    #[error("Renyi order must satisfy q > 1, got {0}")]
    InvalidOrder(f64),
    #[error("alpha must lie in (0, 1/2), got {0}")]
    InvalidAlpha(f64),
    #[error("fit needs at least 4 dyadic cutoffs, got {0}")]
    TooFewPoints(usize),
    #[error("cutoff {0} is not a power of two")]
    NotDyadic(u64),
    #[error(transparent)]
    Bump(#[from] BumpError),
}

/// Which lattice line through the origin a slice follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceAxis {
    /// `m·ξ₁`, the modes surviving integration over the other two variables.
    Transversal,
    /// `k·η₀`, the axis carrying the initial data.
    Axis,
}

/// Squared mode norms along one lattice line.
pub trait SpectralSlice: Sync {
    /// `‖û(n·dir, t)‖²`.
    fn norm_sq(&self, n: i64, t: f64) -> Result<f64, AnalysisError>;

    /// `|n·dir|²`.
    fn wave_norm_sq(&self, n: i64) -> f64;

    /// Largest admissible `|n|`, if bounded.
    fn limit(&self) -> Option<u64>;

    fn check(&self, n: u64) -> Result<(), AnalysisError> {
        match self.limit() {
            Some(max) if n > max => Err(AnalysisError::ExceedsBox { requested: n, max }),
            _ => Ok(()),
        }
    }
}

fn direction(frame: &LatticeFrame, axis: SliceAxis) -> [i64; 3] {
    match axis {
        SliceAxis::Transversal => frame.xi1,
        SliceAxis::Axis => frame.eta0,
    }
}

/// Slice read from the modes of a built solution.
pub struct BoxSlice<'a, C: Coefficient> {
    pub solution: &'a FourierSolution3D<C>,
    pub axis: SliceAxis,
}

impl<'a, C: Coefficient> BoxSlice<'a, C> {
    pub fn new(solution: &'a FourierSolution3D<C>, axis: SliceAxis) -> Self {
        BoxSlice { solution, axis }
    }

    fn coords(&self, n: i64) -> (i64, i64) {
        match self.axis {
            SliceAxis::Transversal => (0, n),
            SliceAxis::Axis => (n, 0),
        }
    }
}

impl<C: Coefficient> SpectralSlice for BoxSlice<'_, C> {
    fn norm_sq(&self, n: i64, t: f64) -> Result<f64, AnalysisError> {
        self.check(n.unsigned_abs())?;
        let (k, m) = self.coords(n);
        let val = self.solution.mode(k, m).expect("checked").evaluate(t, self.solution.bump())?;
        Ok(val.iter().map(|z| z.norm_sqr()).sum())
    }

    fn wave_norm_sq(&self, n: i64) -> f64 {
        let d = direction(&self.solution.frame, self.axis);
        (n * n) as f64 * dot(&d, &d) as f64
    }

    fn limit(&self) -> Option<u64> {
        Some(match self.axis {
            SliceAxis::Transversal => self.solution.bounds.m,
            SliceAxis::Axis => self.solution.bounds.k,
        } as u64)
    }
}

/// Slice generated directly from `(h, g, f)`:
/// transversal `‖û(mξ₁,t)‖ = |g(m)|·|f(t)|·|v|`, axis `‖û(kη₀,t)‖ = |h(k)|·|v|`,
/// with `ξ₀` at the origin and `e^{∓2πiat}ξ₁` at `±η₀`.
#[derive(Debug, Clone)]
pub struct ClosedFormSlice {
    pub generator: GeneratorData,
    pub frame: LatticeFrame,
    pub axis: SliceAxis,
}

impl ClosedFormSlice {
    pub fn new(generator: GeneratorData, frame: LatticeFrame, axis: SliceAxis) -> Self {
        ClosedFormSlice { generator, frame, axis }
    }

    pub fn bump(&self) -> &BumpSpec {
        &self.generator.bump
    }
}

impl SpectralSlice for ClosedFormSlice {
    fn norm_sq(&self, n: i64, t: f64) -> Result<f64, AnalysisError> {
        let f = &self.frame;
        let v2 = dot(&f.v, &f.v) as f64;
        if n == 0 {
            return Ok(dot(&f.xi0, &f.xi0) as f64);
        }
        Ok(match self.axis {
            SliceAxis::Transversal => {
                let b = self.generator.bump.value(0, t)?;
                self.generator.g(n).norm_sqr() * b * b * v2
            }
            SliceAxis::Axis if n.abs() == 1 => dot(&f.xi1, &f.xi1) as f64,
            SliceAxis::Axis => self.generator.h(n).norm_sqr() * v2,
        })
    }

    fn wave_norm_sq(&self, n: i64) -> f64 {
        let d = direction(&self.frame, self.axis);
        (n * n) as f64 * dot(&d, &d) as f64
    }

    fn limit(&self) -> Option<u64> {
        None
    }
}

/// `Û_N(m, t) = û(mξ₁, t)` for `|m| ≤ N`.
pub fn transversal_modes<C: Coefficient>(
    solution: &FourierSolution3D<C>,
    t: f64,
    n: u64,
) -> Result<BTreeMap<i64, [Complex64; 3]>, AnalysisError> {
    BoxSlice::new(solution, SliceAxis::Transversal).check(n)?;
    let table = solution.derivative_table(t, 0)?;
    let n = n as i64;
    (-n..=n)
        .map(|m| Ok((m, solution.mode(0, m).expect("checked").evaluate_with(&table)?)))
        .collect()
}

/// Normalized discrete measure on `{−N, …, N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    pub t: f64,
    pub n: u64,
    /// `weights[m + N]`
    pub weights: Vec<f64>,
}

impl SpectralMeasure {
    /// Normalize nonnegative masses indexed `−N..=N`.
    pub fn from_masses(t: f64, masses: Vec<f64>) -> Result<Self, AnalysisError> {
        assert!(masses.len() % 2 == 1, "masses must be indexed -N..=N");
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(AnalysisError::ZeroMeasure);
        }
        let n = (masses.len() / 2) as u64;
        Ok(SpectralMeasure { t, n, weights: masses.into_iter().map(|x| x / total).collect() })
    }

    pub fn weight(&self, m: i64) -> f64 {
        let idx = m + self.n as i64;
        if idx < 0 {
            return 0.0;
        }
        self.weights.get(idx as usize).copied().unwrap_or(0.0)
    }
}

/// `μ_N(m, t) = ‖Û_N(m,t)‖² / Σ_{|m′|≤N} ‖Û_N(m′,t)‖²`.
pub fn mu_measure(slice: &dyn SpectralSlice, t: f64, n: u64) -> Result<SpectralMeasure, AnalysisError> {
    slice.check(n)?;
    let n = n as i64;
    let masses = (-n..=n).map(|m| slice.norm_sq(m, t)).collect::<Result<Vec<_>, _>>()?;
    SpectralMeasure::from_masses(t, masses)
}

fn check_order(q: f64) -> Result<(), AnalysisError> {
    if q > 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(AnalysisError::InvalidOrder(q))
    }
}

/// `H_q = log(Σ μ^q) / (1 − q)`.
pub fn renyi_entropy(measure: &SpectralMeasure, q: f64) -> Result<f64, AnalysisError> {
    check_order(q)?;
    let s: f64 = measure.weights.iter().filter(|&&w| w > 0.0).map(|w| w.powf(q)).sum();
    Ok((s.ln() / (1.0 - q)).max(0.0))
}

/// Running `ln Σ e^{x_i}` that never overflows.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LogSum {
    shift: f64,
    sum: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum { shift: f64::NEG_INFINITY, sum: 0.0 };

    fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.shift {
            self.sum = self.sum * (self.shift - x).exp() + 1.0;
            self.shift = x;
        } else {
            self.sum += (x - self.shift).exp();
        }
    }

    fn merge(self, other: LogSum) -> LogSum {
        if other.shift == f64::NEG_INFINITY {
            return self;
        }
        if self.shift == f64::NEG_INFINITY {
            return other;
        }
        let shift = self.shift.max(other.shift);
        LogSum { shift, sum: self.sum * (self.shift - shift).exp() + other.sum * (other.shift - shift).exp() }
    }

    fn ln(self) -> f64 {
        self.shift + self.sum.ln()
    }
}

/// `ln M_{q,N}` for each order in `qs` and each cutoff in `ns` (ascending),
/// where `M_{q,N} = Σ_{|m|≤N} ‖Û(m,t)‖^{2q}`. Sums are accumulated in the log
/// domain, dyadic blocks in parallel.
pub fn log_moment_table(
    slice: &dyn SpectralSlice,
    qs: &[f64],
    t: f64,
    ns: &[u64],
) -> Result<Vec<Vec<f64>>, AnalysisError> {
    if ns.windows(2).any(|w| w[1] < w[0]) {
        panic!("cutoffs must be ascending");
    }
    let Some(&top) = ns.last() else { return Ok(vec![Vec::new(); qs.len()]) };
    slice.check(top)?;
    // blocks (prev, next] between consecutive cutoffs, further split for balance
    let mut bounds = vec![0u64];
    for &n in ns {
        let prev = *bounds.last().unwrap();
        let span = n - prev;
        let pieces = (span / (1 << 16)).max(1);
        for p in 1..=pieces {
            bounds.push(prev + span * p / pieces);
        }
    }
    bounds.dedup();
    let blocks: Vec<(u64, u64)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    let origin = slice.norm_sq(0, t)?.ln();
    let partials: Vec<Vec<LogSum>> = blocks
        .par_iter()
        .map(|&(lo, hi)| -> Result<Vec<LogSum>, AnalysisError> {
            let mut acc = vec![LogSum::EMPTY; qs.len()];
            for m in lo + 1..=hi {
                for sign in [1i64, -1] {
                    let x = slice.norm_sq(sign * m as i64, t)?;
                    if x > 0.0 {
                        let lx = x.ln();
                        for (a, q) in acc.iter_mut().zip(qs) {
                            a.push(q * lx);
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;

    let mut out = vec![Vec::with_capacity(ns.len()); qs.len()];
    let mut running: Vec<LogSum> = qs
        .iter()
        .map(|q| {
            let mut s = LogSum::EMPTY;
            if origin.is_finite() {
                s.push(q * origin);
            }
            s
        })
        .collect();
    let mut next_cut = ns.iter().peekable();
    while next_cut.peek() == Some(&&0) {
        next_cut.next();
        for (col, r) in out.iter_mut().zip(&running) {
            col.push(r.ln());
        }
    }
    for (&(_, hi), part) in blocks.iter().zip(partials) {
        for (r, p) in running.iter_mut().zip(part) {
            *r = r.merge(p);
        }
        while next_cut.peek() == Some(&&hi) {
            next_cut.next();
            for (col, r) in out.iter_mut().zip(&running) {
                col.push(r.ln());
            }
        }
    }
    Ok(out)
}

/// `M_{q,N}(t) = Σ_{|m|≤N} ‖Û_N(m,t)‖^{2q}`.
pub fn moment_sum(slice: &dyn SpectralSlice, q: f64, n: u64, t: f64) -> Result<f64, AnalysisError> {
    Ok(log_moment_table(slice, &[q], t, &[n])?[0][0].exp())
}

/// `H_{q,N} = (ln M_q − q ln M_1)/(1 − q)` at each cutoff.
pub fn entropy_curve(slice: &dyn SpectralSlice, q: f64, t: f64, ns: &[u64]) -> Result<Vec<f64>, AnalysisError> {
    check_order(q)?;
    let table = log_moment_table(slice, &[q, 1.0], t, ns)?;
    table[0]
        .iter()
        .zip(&table[1])
        .map(|(lq, l1)| if l1.is_finite() { Ok(((lq - q * l1) / (1.0 - q)).max(0.0)) } else { Err(AnalysisError::ZeroMeasure) })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqFit {
    pub q: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of `H` from the fitted line.
    pub residual: f64,
    /// All entropies equal: slope reported as 0.
    pub degenerate: bool,
    pub points: Vec<(u64, f64)>,
}

/// Ordinary least squares slope of `H_{q,N}` against `ln N` over dyadic `N`.
pub fn fit_dq(slice: &dyn SpectralSlice, q: f64, t: f64, ns: &[u64]) -> Result<DqFit, AnalysisError> {
    check_order(q)?;
    if ns.len() < 4 {
        return Err(AnalysisError::TooFewPoints(ns.len()));
    }
    if let Some(&bad) = ns.iter().find(|n| !n.is_power_of_two()) {
        return Err(AnalysisError::NotDyadic(bad));
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 4 {
        return Err(AnalysisError::TooFewPoints(ns.len()));
    }
    let h = entropy_curve(slice, q, t, &ns)?;
    let points: Vec<(u64, f64)> = ns.iter().copied().zip(h.iter().copied()).collect();
    let spread = h.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - h.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if spread <= 1e-14 * (1.0 + h[0].abs()) {
        return Ok(DqFit { q, slope: 0.0, intercept: h[0], residual: 0.0, degenerate: true, points });
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let (slope, intercept) = least_squares(&xs, &h);
    let rms = (xs.iter().zip(&h).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    Ok(DqFit { q, slope, intercept, residual: rms, degenerate: false, points })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Value(f64),
    NotApplicable,
}

/// `D_q = (1 − 2α)q/(q − 1)` when `q > 1/(2α)`.
pub fn predicted_dq(alpha: f64, q: f64) -> Result<Prediction, AnalysisError> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(AnalysisError::InvalidAlpha(alpha));
    }
    check_order(q)?;
    if q > 1.0 / (2.0 * alpha) {
        Ok(Prediction::Value((1.0 - 2.0 * alpha) * q / (q - 1.0)))
    } else {
        Ok(Prediction::NotApplicable)
    }
}

/// `Σ_{‖ξ‖≤N} (1 + ‖ξ‖²)^s ‖û(ξ,t)‖²` over the whole box.
pub fn sobolev_norm<C: Coefficient>(solution: &FourierSolution3D<C>, s: f64, t: f64, n: u64) -> Result<f64, AnalysisError> {
    let max = solution.max_cutoff();
    if n > max {
        return Err(AnalysisError::ExceedsBox { requested: n, max });
    }
    let values = solution.evaluate_all(t)?;
    let cut = (n * n) as i64;
    Ok(solution
        .modes()
        .zip(&values)
        .filter_map(|(((k, m), _), u)| {
            let xi = solution.point(k, m);
            let r2 = dot(&xi, &xi);
            (r2 <= cut).then(|| (1.0 + r2 as f64).powf(s) * u.iter().map(|z| z.norm_sqr()).sum::<f64>())
        })
        .sum())
}

/// `Σ_{|n|≤N} (1 + |n·dir|²)^s ‖û(n·dir, t)‖²` at each cutoff (ascending).
///
/// Restricting the Sobolev sum to one line gives a lower bound for it.
pub fn slice_sobolev_sums(slice: &dyn SpectralSlice, s: f64, t: f64, ns: &[u64]) -> Result<Vec<f64>, AnalysisError> {
    let Some(&top) = ns.last() else { return Ok(Vec::new()) };
    slice.check(top)?;
    let terms = (1..=top as i64)
        .into_par_iter()
        .map(|n| -> Result<f64, AnalysisError> {
            let w = (1.0 + slice.wave_norm_sq(n)).powf(s);
            Ok(w * (slice.norm_sq(n, t)? + slice.norm_sq(-n, t)?))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let mut out = Vec::with_capacity(ns.len());
    let mut acc = slice.norm_sq(0, t)?;
    let mut done = 0u64;
    for &n in ns {
        assert!(n >= done, "cutoffs must be ascending");
        acc += terms[done as usize..n as usize].iter().sum::<f64>();
        done = n;
        out.push(acc);
    }
    Ok(out)
}

/// Dyadic cutoffs `2^lo, …, 2^hi`.
pub fn dyadic_range(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|j| 1u64 << j).collect()
}

/// Entropies, fitted exponents and Sobolev sums for one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub t: f64,
    pub qs: Vec<f64>,
    pub ns: Vec<u64>,
    /// `entropies[i][j] = H_{qs[i], ns[j]}`
    pub entropies: Vec<Vec<f64>>,
    pub fits: Vec<DqFit>,
    pub predicted: Vec<Option<Prediction>>,
    /// `(s, partial sums at each cutoff)`
    pub sobolev: Vec<(f64, Vec<f64>)>,
}

pub fn spectrum_report(
    slice: &dyn SpectralSlice,
    t: f64,
    qs: &[f64],
    ns: &[u64],
    alpha: Option<f64>,
    sobolev_orders: &[f64],
) -> Result<SpectrumReport, AnalysisError> {
    let mut entropies = Vec::with_capacity(qs.len());
    let mut fits = Vec::with_capacity(qs.len());
    let mut predicted = Vec::with_capacity(qs.len());
    for &q in qs {
        let fit = fit_dq(slice, q, t, ns)?;
        entropies.push(fit.points.iter().map(|p| p.1).collect());
        fits.push(fit);
        predicted.push(alpha.map(|a| predicted_dq(a, q)).transpose()?);
    }
    let sobolev = sobolev_orders
        .iter()
        .map(|&s| Ok((s, slice_sobolev_sums(slice, s, t, ns)?)))
        .collect::<Result<_, AnalysisError>>()?;
    Ok(SpectrumReport { t, qs: qs.to_vec(), ns: ns.to_vec(), entropies, fits, predicted, sobolev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{build_solution, BoxSize, Profile};
    use std::f64::consts::E;

    fn power_generator(alpha: f64) -> GeneratorData {
        GeneratorData {
            h: Profile::Exponential { scale: 1.0, rate: 1.0 },
            g: Profile::Power { scale: E, exponent: alpha },
            bump: BumpSpec::half(1.0).unwrap(),
        }
    }

    fn closed(alpha: f64, axis: SliceAxis) -> ClosedFormSlice {
        ClosedFormSlice::new(power_generator(alpha), LatticeFrame::default(), axis)
    }

    #[test]
    fn transversal_examples() {
        let sol = build_solution::<Complex64>(LatticeFrame::default(), power_generator(0.3), BoxSize::new(3, 6).unwrap()).unwrap();
        let early = transversal_modes(&sol, 0.5, 6).unwrap();
        assert_eq!(early[&0], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert!(early.iter().filter(|(m, _)| **m != 0).all(|(_, u)| u.iter().all(|z| *z == Complex64::default())));
        let late = transversal_modes(&sol, 2.0, 6).unwrap();
        for m in 1..=6i64 {
            let expect = E * (m as f64).powf(-0.3) * (-1.0f64).exp();
            assert!((late[&m][2].re - expect).abs() < 1e-14);
            assert!((late[&-m][2].re - expect).abs() < 1e-14);
        }
        assert!(matches!(transversal_modes(&sol, 2.0, 7), Err(AnalysisError::ExceedsBox { .. })));
    }

    #[test]
    fn box_and_closed_form_slices_agree() {
        let sol = build_solution::<Complex64>(LatticeFrame::default(), power_generator(0.3), BoxSize::new(8, 8).unwrap()).unwrap();
        for axis in [SliceAxis::Transversal, SliceAxis::Axis] {
            let a = BoxSlice::new(&sol, axis);
            let b = closed(0.3, axis);
            for n in -8..=8 {
                for t in [0.0, 0.9, 1.3, 2.0] {
                    let (x, y) = (a.norm_sq(n, t).unwrap(), b.norm_sq(n, t).unwrap());
                    assert!((x - y).abs() <= 1e-14 * (1.0 + y), "{axis:?} n={n} t={t}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn measure_examples() {
        let slice = closed(0.3, SliceAxis::Transversal);
        let delta = mu_measure(&slice, 0.5, 5).unwrap();
        assert_eq!(delta.weight(0), 1.0);
        assert_eq!(renyi_entropy(&delta, 2.0).unwrap(), 0.0);

        let late = mu_measure(&slice, 2.0, 4).unwrap();
        assert!((late.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // μ(m)/μ(0) = |m|^{−0.6}
        for m in 1..=4i64 {
            assert!((late.weight(m) / late.weight(0) - (m as f64).powf(-0.6)).abs() < 1e-13);
        }

        let two = SpectralMeasure::from_masses(0.0, vec![0.0, 3.0, 3.0]).unwrap();
        assert_eq!(two.weights, vec![0.0, 0.5, 0.5]);
        assert!((renyi_entropy(&two, 2.0).unwrap() - 2f64.ln()).abs() < 1e-15);

        let n = 7;
        let uniform = SpectralMeasure::from_masses(0.0, vec![1.0; 2 * n + 1]).unwrap();
        for q in [1.5, 2.0, 7.0] {
            assert!((renyi_entropy(&uniform, q).unwrap() - ((2 * n + 1) as f64).ln()).abs() < 1e-12);
        }
        assert_eq!(renyi_entropy(&uniform, 1.0), Err(AnalysisError::InvalidOrder(1.0)));
        assert_eq!(SpectralMeasure::from_masses(0.0, vec![0.0; 3]), Err(AnalysisError::ZeroMeasure));
    }

    #[test]
    fn zero_slice_is_signalled() {
        let gen = GeneratorData { h: Profile::Zero, g: Profile::Zero, bump: BumpSpec::half(1.0).unwrap() };
        let frame = LatticeFrame { xi0: [0, 0, 0], ..Default::default() };
        let slice = ClosedFormSlice::new(gen, frame, SliceAxis::Transversal);
        assert_eq!(mu_measure(&slice, 2.0, 3), Err(AnalysisError::ZeroMeasure));
    }

    #[test]
    fn moment_examples() {
        let slice = closed(0.3, SliceAxis::Transversal);
        assert!((moment_sum(&slice, 1.0, 8, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let expect = 1.0 + 2.0 * (1.0 + 2f64.powf(-0.6));
        assert!((moment_sum(&slice, 1.0, 2, 2.0).unwrap() - expect).abs() < 1e-13);
        // large q: dominated by the largest off-axis modes |g(±1)f|
        let q = 200.0;
        let top = 2.0 * (E * (-1.0f64).exp()).powf(2.0 * q);
        let got = moment_sum(&slice, q, 64, 2.0).unwrap();
        assert!(((got - 1.0 - top) / top).abs() < 1e-9);
    }

    #[test]
    fn moment_table_matches_direct_sums() {
        let slice = closed(0.27, SliceAxis::Transversal);
        let ns = [1, 5, 70, 70_000, 200_000];
        let qs = [1.0, 2.5];
        let table = log_moment_table(&slice, &qs, 1.7, &ns).unwrap();
        for (i, &q) in qs.iter().enumerate() {
            for (j, &n) in ns.iter().enumerate() {
                let direct: f64 = (-(n as i64)..=n as i64).map(|m| slice.norm_sq(m, 1.7).unwrap().powf(q)).sum();
                assert!((table[i][j].exp() / direct - 1.0).abs() < 1e-10, "q={q} n={n}");
            }
        }
    }

    #[test]
    fn predictions() {
        assert_eq!(predicted_dq(0.3, 2.0).unwrap(), Prediction::Value((1.0 - 0.6) * 2.0));
        match predicted_dq(0.25, 3.0).unwrap() {
            Prediction::Value(v) => assert!((v - 0.75).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert_eq!(predicted_dq(0.3, 1.5).unwrap(), Prediction::NotApplicable);
        assert!(predicted_dq(0.5, 3.0).is_err());
        assert!(predicted_dq(0.3, 1.0).is_err());
    }

    #[test]
    fn fit_rejects_bad_cutoffs_and_flags_degenerate() {
        let slice = closed(0.3, SliceAxis::Transversal);
        assert_eq!(fit_dq(&slice, 2.0, 2.0, &[2, 4, 8]).unwrap_err(), AnalysisError::TooFewPoints(3));
        assert_eq!(fit_dq(&slice, 2.0, 2.0, &[2, 4, 8, 12]).unwrap_err(), AnalysisError::NotDyadic(12));
        let flat = ClosedFormSlice::new(
            GeneratorData { g: Profile::Zero, ..power_generator(0.3) },
            LatticeFrame::default(),
            SliceAxis::Transversal,
        );
        let fit = fit_dq(&flat, 2.0, 2.0, &dyadic_range(2, 8)).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn sobolev_examples() {
        let gen = GeneratorData { h: Profile::Zero, ..power_generator(0.3) };
        let sol = build_solution::<Complex64>(LatticeFrame::default(), gen, BoxSize::new(6, 6).unwrap()).unwrap();
        assert!((sobolev_norm(&sol, 0.0, 0.0, 6).unwrap() - 3.0).abs() < 1e-14);
        // s = 1 at t = 0: 1 + 2·2 for the unit modes at 0, ±η₀
        assert!((sobolev_norm(&sol, 1.0, 0.0, 6).unwrap() - 5.0).abs() < 1e-14);
        assert!(sobolev_norm(&sol, 0.0, 0.0, 7).is_err());

        let sol = build_solution::<Complex64>(LatticeFrame::default(), power_generator(0.3), BoxSize::new(6, 6).unwrap()).unwrap();
        for s in [0.0, 1.0, 2.0] {
            let full = sobolev_norm(&sol, s, 2.0, 6).unwrap();
            let bound: f64 = (-6i64..=6)
                .filter(|&m| m != 0)
                .map(|m| (1.0 + (m * m) as f64).powf(s) * (E * (m.abs() as f64).powf(-0.3)).powi(2))
                .sum::<f64>()
                * (-2.0f64).exp();
            assert!(full >= bound);
            let line = slice_sobolev_sums(&BoxSlice::new(&sol, SliceAxis::Transversal), s, 2.0, &[6]).unwrap()[0];
            assert!((line - 1.0 - bound).abs() < 1e-12 * line);
        }
    }

    #[test]
    fn sobolev_dyadic_growth() {
        let slice = closed(0.3, SliceAxis::Transversal);
        let ns = dyadic_range(10, 14);
        let sums = slice_sobolev_sums(&slice, 1.0, 2.0, &ns).unwrap();
        let target = 2f64.powf(2.4);
        for w in sums.windows(2) {
            assert!((w[1] / w[0] / target - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn fitted_exponent_near_prediction() {
        let slice = closed(0.3, SliceAxis::Transversal);
        let fit = fit_dq(&slice, 2.0, 2.0, &dyadic_range(10, 18)).unwrap();
        assert!((fit.slope - 0.8).abs() < 0.08, "{}", fit.slope);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn masses() -> impl Strategy<Value = Vec<f64>> {
            (0usize..20).prop_flat_map(|n| proptest::collection::vec(0.0f64..10.0, 2 * n + 1)).prop_filter("nonzero", |v| v.iter().sum::<f64>() > 0.0)
        }

        proptest! {
            #[test]
            fn measure_is_normalized_and_entropy_bounded(m in masses(), q in 1.01f64..8.0) {
                let atoms = m.len();
                let mu = SpectralMeasure::from_masses(0.0, m).unwrap();
                prop_assert!((mu.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let h = renyi_entropy(&mu, q).unwrap();
                prop_assert!(h >= 0.0 && h <= (atoms as f64).ln() + 1e-12);
            }

            #[test]
            fn entropy_nonincreasing_in_order(m in masses(), q1 in 1.01f64..6.0, dq in 0.0f64..4.0) {
                let mu = SpectralMeasure::from_masses(0.0, m).unwrap();
                let a = renyi_entropy(&mu, q1).unwrap();
                let b = renyi_entropy(&mu, q1 + dq).unwrap();
                prop_assert!(b <= a + 1e-12);
            }

            #[test]
            fn moment_sum_matches_closed_form(alpha in 0.05f64..0.45, q in 1.0f64..5.0, n in 1u64..300, t in 0.0f64..4.0) {
                let slice = closed(alpha, SliceAxis::Transversal);
                let f = slice.bump().value(0, t).unwrap();
                let tail: f64 = (1..=n).map(|m| (E * (m as f64).powf(-alpha)).powf(2.0 * q)).sum();
                let expect = 1.0 + f.abs().powf(2.0 * q) * 2.0 * tail;
                let got = moment_sum(&slice, q, n, t).unwrap();
                prop_assert!((got / expect - 1.0).abs() < 1e-10);
            }
        }
    }
}
