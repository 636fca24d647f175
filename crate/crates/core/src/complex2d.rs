//! Closed-form complex-valued solutions on the 2-torus.
//!
//! With `û(0) = iξ₀` and every other mode on the line `S = ⟨v⟩⊥ ∩ ℤ²`
//! parallel to `v`, each mode evolves independently:
//! `û(ξ, t) = e^{2π(ξ·ξ₀)t}·f(ξ)·v` with `f(ξ) = g(ξ)e^{−γ|ξ|}`. Modes along
//! `+ξ₀` grow, and the Sobolev norms become infinite from
//! `T = γ/(2π|ξ₀|)` on.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use num_integer::Integer;
use thiserror::Error;

use crate::verifier::galerkin::{galerkin_integrate, GalerkinError, LatticeField};

pub type IVec2 = [i64; 2];

fn dot2(a: &IVec2, b: &IVec2) -> i64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm2(a: &IVec2) -> f64 {
    (dot2(a, a) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Complex2DError {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("wave vector {xi:?} is outside the box of radius {radius}")]
    OutsideBox { xi: IVec2, radius: i64 },
    #[error(transparent)]
    Galerkin(#[from] GalerkinError),
}

/// Amplitude factor `g` on `S∖{0}`.
#[derive(Clone)]
pub enum Amplitude2D {
    Zero,
    /// `|ξ|^{−alpha}` on the multiples `kξ₀`, `k ≠ 0`; zero elsewhere on `S`.
    PowerAlongXi0 { alpha: f64 },
    Table(BTreeMap<IVec2, Complex64>),
    Custom(Arc<dyn Fn(IVec2) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for Amplitude2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Amplitude2D::Zero => write!(f, "Zero"),
            Amplitude2D::PowerAlongXi0 { alpha } => write!(f, "PowerAlongXi0({alpha})"),
            Amplitude2D::Table(t) => f.debug_tuple("Table").field(t).finish(),
            Amplitude2D::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Complex2DSolution {
    v: IVec2,
    xi0: IVec2,
    gamma: f64,
    g: Amplitude2D,
    /// Primitive generator of `S`.
    p: IVec2,
}

/// Check the frame and parameters and assemble the solution.
pub fn build_complex_solution(v: IVec2, xi0: IVec2, gamma: f64, g: Amplitude2D) -> Result<Complex2DSolution, Complex2DError> {
    if v == [0, 0] {
        return Err(Complex2DError::InvalidFrame("v must be nonzero".into()));
    }
    if xi0 == [0, 0] {
        return Err(Complex2DError::InvalidFrame("xi0 must be nonzero".into()));
    }
    if dot2(&xi0, &v) != 0 {
        return Err(Complex2DError::InvalidFrame(format!("xi0 = {xi0:?} is not orthogonal to v = {v:?}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Complex2DError::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if let Amplitude2D::PowerAlongXi0 { alpha } = g {
        if !alpha.is_finite() {
            return Err(Complex2DError::InvalidParameter(format!("alpha must be finite, got {alpha}")));
        }
    }
    let d = v[0].gcd(&v[1]);
    let p = [-v[1] / d, v[0] / d];
    Ok(Complex2DSolution { v, xi0, gamma, g, p })
}

impl Complex2DSolution {
    pub fn v(&self) -> IVec2 {
        self.v
    }

    pub fn xi0(&self) -> IVec2 {
        self.xi0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Primitive vector spanning `S`.
    pub fn generator(&self) -> IVec2 {
        self.p
    }

    /// `T = γ/(2π|ξ₀|)`.
    pub fn blowup_time(&self) -> f64 {
        self.gamma / (TAU * norm2(&self.xi0))
    }

    pub fn in_plane(&self, xi: &IVec2) -> bool {
        dot2(xi, &self.v) == 0
    }

    /// `g(ξ)` for `ξ ∈ S∖{0}`.
    pub fn g(&self, xi: IVec2) -> Complex64 {
        match &self.g {
            Amplitude2D::Zero => Complex64::default(),
            Amplitude2D::PowerAlongXi0 { alpha } => {
                let c = self.xi0;
                // multiples of ξ₀: ξ = kξ₀ with k integer
                let cross = xi[0] * c[1] - xi[1] * c[0];
                let k = dot2(&xi, &c);
                if cross != 0 || k % dot2(&c, &c) != 0 {
                    return Complex64::default();
                }
                Complex64::new(norm2(&xi).powf(-alpha), 0.0)
            }
            Amplitude2D::Table(t) => t.get(&xi).copied().unwrap_or_default(),
            Amplitude2D::Custom(func) => func(xi),
        }
    }

    /// `f(ξ) = g(ξ)e^{−γ|ξ|}`.
    pub fn f(&self, xi: IVec2) -> Complex64 {
        self.g(xi) * (-self.gamma * norm2(&xi)).exp()
    }

    /// `û(ξ, t)`.
    pub fn mode(&self, xi: IVec2, t: f64) -> [Complex64; 2] {
        if xi == [0, 0] {
            return [Complex64::new(0.0, self.xi0[0] as f64), Complex64::new(0.0, self.xi0[1] as f64)];
        }
        if !self.in_plane(&xi) {
            return [Complex64::default(); 2];
        }
        let g = self.g(xi);
        if g == Complex64::default() {
            return [Complex64::default(); 2];
        }
        let amp = g * (TAU * dot2(&xi, &self.xi0) as f64 * t - self.gamma * norm2(&xi)).exp();
        [amp * self.v[0] as f64, amp * self.v[1] as f64]
    }

    /// `∂_t û(ξ, t) = 2π(ξ·ξ₀)û(ξ, t)`.
    pub fn mode_derivative(&self, xi: IVec2, t: f64) -> [Complex64; 2] {
        let rate = TAU * dot2(&xi, &self.xi0) as f64;
        self.mode(xi, t).map(|z| z * rate)
    }

    /// `ln ‖û(ξ, t)‖²` for `ξ ∈ S∖{0}`, finite even where the value itself
    /// would overflow; `−∞` where the mode vanishes.
    pub fn log_mode_norm_sq(&self, xi: IVec2, t: f64) -> f64 {
        let g = self.g(xi).norm_sqr();
        if g == 0.0 {
            return f64::NEG_INFINITY;
        }
        g.ln() + (dot2(&self.v, &self.v) as f64).ln() - 2.0 * self.gamma * norm2(&xi)
            + 4.0 * PI * dot2(&xi, &self.xi0) as f64 * t
    }
}

fn square_box(radius: i64) -> Vec<IVec2> {
    let mut out = Vec::with_capacity(((2 * radius + 1) * (2 * radius + 1)) as usize);
    for a in -radius..=radius {
        for b in -radius..=radius {
            out.push([a, b]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual2D {
    pub absolute: f64,
    /// `absolute / (1 + max(|∂_t û|, |rhs|))`
    pub relative: f64,
}

/// Analytic `∂_t û(ξ)` against `−2πi Σ_{ζ+η=ξ} (û(ζ)·η)û(η)` summed by brute
/// force over the square box `|ξ_i| ≤ radius`.
pub fn residual_2d(solution: &Complex2DSolution, xi: IVec2, t: f64, radius: i64) -> Result<Residual2D, Complex2DError> {
    if xi[0].abs() > radius || xi[1].abs() > radius {
        return Err(Complex2DError::OutsideBox { xi, radius });
    }
    let mut acc = [Complex64::default(); 2];
    for zeta in square_box(radius) {
        let eta = [xi[0] - zeta[0], xi[1] - zeta[1]];
        if eta[0].abs() > radius || eta[1].abs() > radius {
            continue;
        }
        let uz = solution.mode(zeta, t);
        let d = uz[0] * eta[0] as f64 + uz[1] * eta[1] as f64;
        if d == Complex64::default() {
            continue;
        }
        let ue = solution.mode(eta, t);
        acc[0] += d * ue[0];
        acc[1] += d * ue[1];
    }
    let rhs = acc.map(|z| z * Complex64::new(0.0, -TAU));
    let lhs = solution.mode_derivative(xi, t);
    let n = |a: &[Complex64; 2]| (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
    let absolute = n(&[lhs[0] - rhs[0], lhs[1] - rhs[1]]);
    Ok(Residual2D { absolute, relative: absolute / (1.0 + n(&lhs).max(n(&rhs))) })
}

/// `Σ_{|ξ|≤N} ‖û(ξ, t)‖²`, the mean mode included.
pub fn energy(solution: &Complex2DSolution, t: f64, n: u64) -> f64 {
    let p = solution.generator();
    let step = norm2(&p);
    let reach = (n as f64 / step).floor() as i64;
    let mean = dot2(&solution.xi0, &solution.xi0) as f64;
    mean + (1..=reach)
        .flat_map(|j| [j, -j])
        .map(|j| {
            let u = solution.mode([j * p[0], j * p[1]], t);
            u[0].norm_sqr() + u[1].norm_sqr()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupClass {
    Convergent,
    Divergent,
    Inconclusive,
}

impl fmt::Display for BlowupClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlowupClass::Convergent => "CONVERGENT",
            BlowupClass::Divergent => "DIVERGENT",
            BlowupClass::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub s: f64,
    pub t: f64,
    pub n_max: u64,
    pub class: BlowupClass,
    /// Ratio of the last two complete dyadic block sums.
    pub last_ratio: f64,
    /// `A_{j+1}/A_j` for consecutive dyadic blocks `2^j ≤ |ξ|/|p| < 2^{j+1}`.
    pub ratios: Vec<f64>,
    /// `ln` of the partial Sobolev sum up to `N_max` (mean mode included).
    pub log_partial_sum: f64,
}

/// Band around 1 inside which block ratios count as non-decaying.
pub const RATIO_TOLERANCE: f64 = 1e-3;
/// Number of trailing block ratios that must agree.
pub const SUSTAINED_BLOCKS: usize = 3;

#[derive(Debug, Clone, Copy)]
struct LogAcc {
    shift: f64,
    sum: f64,
}

impl LogAcc {
    fn new() -> Self {
        LogAcc { shift: f64::NEG_INFINITY, sum: 0.0 }
    }

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

    fn ln(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.shift + self.sum.ln()
        }
    }
}

/// Classify `Σ_ξ (1+|ξ|²)^s ‖û(ξ,t)‖²` by Cauchy condensation.
///
/// Terms are grouped into dyadic blocks along `S` and summed in the log
/// domain. A series of eventually monotone terms converges iff its block sums
/// decay geometrically, so the trailing block ratios decide:
/// all below `1 − RATIO_TOLERANCE` gives `Convergent`, all at or above it gives
/// `Divergent`, anything mixed is `Inconclusive`.
pub fn classify_blowup(solution: &Complex2DSolution, s: f64, t: f64, n_max: u64) -> Result<BlowupReport, Complex2DError> {
    if !s.is_finite() || !t.is_finite() {
        return Err(Complex2DError::InvalidParameter("s and t must be finite".into()));
    }
    let p = solution.generator();
    let step = norm2(&p);
    let reach = (n_max as f64 / step).floor() as i64;
    if reach < 1 << (SUSTAINED_BLOCKS + 1) {
        return Err(Complex2DError::InvalidParameter(format!("N_max = {n_max} is too small to classify")));
    }
    let log_term = |j: i64| {
        let xi = [j * p[0], j * p[1]];
        s * (1.0 + dot2(&xi, &xi) as f64).ln() + solution.log_mode_norm_sq(xi, t)
    };
    let mut blocks = Vec::new();
    let mut total = LogAcc::new();
    total.push((dot2(&solution.xi0, &solution.xi0) as f64).ln());
    let mut lo = 1i64;
    while lo <= reach {
        let hi = (2 * lo - 1).min(reach);
        let mut acc = LogAcc::new();
        for j in lo..=hi {
            acc.push(log_term(j));
            acc.push(log_term(-j));
        }
        total.push(acc.ln());
        if hi == 2 * lo - 1 {
            blocks.push(acc.ln());
        }
        lo *= 2;
    }
    let ratios: Vec<f64> = blocks.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
    let tail = &ratios[ratios.len().saturating_sub(SUSTAINED_BLOCKS)..];
    let threshold = 1.0 - RATIO_TOLERANCE;
    // a zero block (all amplitudes vanish) yields NaN ratios; treat as decaying
    let decaying = |r: &f64| r.is_nan() || *r < threshold;
    let class = if tail.len() < SUSTAINED_BLOCKS {
        BlowupClass::Inconclusive
    } else if tail.iter().all(decaying) {
        BlowupClass::Convergent
    } else if tail.iter().all(|r| *r >= threshold) {
        BlowupClass::Divergent
    } else {
        BlowupClass::Inconclusive
    };
    Ok(BlowupReport {
        s,
        t,
        n_max,
        class,
        last_ratio: tail.last().copied().unwrap_or(f64::NAN),
        ratios,
        log_partial_sum: total.ln(),
    })
}

/// Outcome of integrating the truncated 2D system against the closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinCheck2D {
    /// Largest `|rhs − 2π(ξ·ξ₀)û(ξ)|` at `t = 0`, relative to `1 + |û|`.
    pub rhs_deviation: f64,
    /// Largest mode deviation at each sample time, relative to `1 + |û|`.
    pub deviations: Vec<f64>,
}

/// Integrate the truncated system on `|ξ_i| ≤ radius` from `û(·,0)`.
pub fn galerkin_check_2d(
    solution: &Complex2DSolution,
    radius: i64,
    times: &[f64],
    tol: f64,
) -> Result<GalerkinCheck2D, Complex2DError> {
    let points = square_box(radius);
    let field = LatticeField::new(points.clone());
    let initial: Vec<[Complex64; 2]> = points.iter().map(|&xi| solution.mode(xi, 0.0)).collect();

    let state = LatticeField::<2>::flatten(&initial);
    let mut rhs = vec![Complex64::default(); state.len()];
    field.rhs(&state, &mut rhs);
    let rel = |a: [Complex64; 2], b: [Complex64; 2]| {
        let diff = ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt();
        diff / (1.0 + (b[0].norm_sqr() + b[1].norm_sqr()).sqrt())
    };
    let rhs_deviation = points
        .iter()
        .enumerate()
        .map(|(i, &xi)| rel([rhs[2 * i], rhs[2 * i + 1]], solution.mode_derivative(xi, 0.0)))
        .fold(0.0, f64::max);

    let traj = galerkin_integrate(&field, &initial, times, tol)?;
    let deviations = traj
        .iter()
        .map(|state| {
            points
                .iter()
                .zip(&state.modes)
                .map(|(&xi, u)| rel(*u, solution.mode(xi, state.t)))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(GalerkinCheck2D { rhs_deviation, deviations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_solution(alpha: f64) -> Complex2DSolution {
        build_complex_solution([1, 0], [0, 1], 1.0, Amplitude2D::PowerAlongXi0 { alpha }).unwrap()
    }

    #[test]
    fn frame_examples() {
        let sol = reference_solution(0.75);
        assert_eq!(sol.generator(), [0, 1]);
        assert_eq!(sol.mode([0, 0], 3.0), [Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)]);
        assert!(sol.in_plane(&[0, 5]) && !sol.in_plane(&[1, 5]));
        assert_eq!(sol.mode([2, 1], 0.3), [Complex64::default(); 2]);
        assert_eq!(sol.blowup_time(), 1.0 / TAU);
        assert!(build_complex_solution([1, 0], [1, 1], 1.0, Amplitude2D::Zero).is_err());
        assert!(build_complex_solution([1, 0], [0, 1], 0.0, Amplitude2D::Zero).is_err());
        assert!(build_complex_solution([0, 0], [0, 1], 1.0, Amplitude2D::Zero).is_err());
        let slanted = build_complex_solution([2, -4], [4, 2], 1.0, Amplitude2D::Zero).unwrap();
        assert_eq!(slanted.generator(), [2, 1]);
    }

    #[test]
    fn growth_along_xi0() {
        let sol = reference_solution(0.75);
        for t in [0.0, 0.1, 0.5] {
            let u = sol.mode([0, 1], t);
            let expect = (TAU * t).exp() * (-1.0f64).exp();
            assert!((u[0].re - expect).abs() < 1e-15 * expect);
            assert_eq!(u[1], Complex64::default());
        }
    }

    #[test]
    fn zero_amplitude_is_stationary() {
        let sol = build_complex_solution([1, 0], [0, 2], 1.0, Amplitude2D::Zero).unwrap();
        for t in [0.0, 1.0, 5.0] {
            assert_eq!(energy(&sol, t, 50), 4.0);
        }
    }

    #[test]
    fn residuals() {
        let sol = reference_solution(0.75);
        for xi in [[0, 0], [0, 1], [0, -3], [0, 5], [2, 3], [-1, 0]] {
            for t in [0.0, 0.1, 0.3] {
                assert!(residual_2d(&sol, xi, t, 6).unwrap().relative < 1e-12, "{xi:?} t={t}");
            }
        }
        assert_eq!(residual_2d(&sol, [1, 1], 0.2, 6).unwrap().absolute, 0.0);
        assert!(residual_2d(&sol, [0, 7], 0.2, 6).is_err());
    }

    #[test]
    fn energy_examples() {
        let table = BTreeMap::from([([0, 1], Complex64::new(1.0, 0.0)), ([0, -1], Complex64::new(1.0, 0.0))]);
        let sol = build_complex_solution([1, 0], [0, 1], 1.0, Amplitude2D::Table(table)).unwrap();
        assert!((energy(&sol, 0.0, 10) - (1.0 + 2.0 * (-2.0f64).exp())).abs() < 1e-15);
        let sol = reference_solution(0.75);
        let mut last = energy(&sol, 0.0, 40);
        for i in 1..10 {
            let e = energy(&sol, 0.02 * i as f64, 40);
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn trichotomy() {
        let sol = reference_solution(0.75);
        let t_c = sol.blowup_time();
        let n = 100_000;
        assert_eq!(classify_blowup(&sol, 5.0, 0.9 * t_c, n).unwrap().class, BlowupClass::Convergent);
        assert_eq!(classify_blowup(&sol, -5.0, 1.1 * t_c, n).unwrap().class, BlowupClass::Divergent);
        assert_eq!(classify_blowup(&sol, 0.3, t_c, n).unwrap().class, BlowupClass::Divergent);
        assert_eq!(classify_blowup(&sol, 0.2, t_c, n).unwrap().class, BlowupClass::Convergent);
        // harmonic tail at the critical exponent
        assert_eq!(classify_blowup(&sol, 0.25, t_c, n).unwrap().class, BlowupClass::Divergent);
        assert!(classify_blowup(&sol, 0.2, t_c, 10).is_err());
    }

    #[test]
    fn classification_is_monotone_off_the_critical_band() {
        let sol = reference_solution(0.75);
        let t_c = sol.blowup_time();
        let ss = [-3.0, -1.0, 0.0, 0.1, 0.4, 1.0, 3.0];
        let ts = [0.5 * t_c, 0.8 * t_c, t_c, 1.2 * t_c, 2.0 * t_c];
        let div = |s, t| classify_blowup(&sol, s, t, 100_000).unwrap().class == BlowupClass::Divergent;
        for (i, &s) in ss.iter().enumerate() {
            for (j, &t) in ts.iter().enumerate() {
                if div(s, t) {
                    assert!(ss[i..].iter().all(|&s2| div(s2, t)));
                    assert!(ts[j..].iter().all(|&t2| div(s, t2)));
                }
            }
        }
    }

    #[test]
    fn galerkin_matches_closed_form() {
        let sol = reference_solution(0.75);
        let check = galerkin_check_2d(&sol, 4, &[0.05, 0.1], 1e-11).unwrap();
        assert!(check.rhs_deviation < 1e-14);
        assert!(check.deviations.iter().all(|d| *d < 1e-8), "{:?}", check.deviations);
    }
}
