//! Independent checks of a constructed solution.
//!
//! Residuals of the Fourier-side Euler system are computed by brute force over
//! all pairs in the box, without using the three-term column reduction the
//! construction relies on; that reduction is compared separately. The
//! truncated Galerkin system provides the regular branch for comparison.

pub mod galerkin;
pub mod ode;

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

use crate::bump::BumpError;
use crate::construction::{dot, BoxSize, FourierSolution3D, IVec3, LatticeFrame, ModeFunction, VecSeries};
use crate::term_algebra::{unit_phase, Coefficient, TermSeries};
use galerkin::{galerkin_integrate, GalerkinError, GalerkinState, LatticeField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("mode ({k}, {m}) is not interior to the box")]
    NotInterior { k: i64, m: i64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("product of two bump-carrying modes at ({k}, {m}) is outside the term basis")]
    Unsupported { k: i64, m: i64 },
    #[error(transparent)]
    Bump(#[from] BumpError),
    #[error(transparent)]
    Galerkin(#[from] GalerkinError),
}

/// `(k, m)` whose `±η₀` neighbors lie in the box. Only `k` is constrained:
/// columns never couple to each other.
pub fn is_interior(bounds: &BoxSize, k: i64, m: i64) -> bool {
    k.abs() < bounds.k && m.abs() <= bounds.m
}

pub const INTERIOR_DEFINITION: &str = "|k| <= K-1 and |m| <= M (xi and xi +- eta0 inside the box)";

fn norm3(v: &[Complex64; 3]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn cdot(u: &[Complex64; 3], xi: &IVec3) -> Complex64 {
    u[0] * xi[0] as f64 + u[1] * xi[1] as f64 + u[2] * xi[2] as f64
}

/// `−2πi Σ_{ζ+η=ξ} (û(ζ)·η) û(η)` with `ζ, η` ranging over the whole box.
fn brute_force_rhs(frame: &LatticeFrame, bounds: &BoxSize, values: &[[Complex64; 3]], k: i64, m: i64) -> [Complex64; 3] {
    let mut acc = [Complex64::zero(); 3];
    for ((k1, m1), uz) in bounds.points().zip(values) {
        let (k2, m2) = (k - k1, m - m1);
        if !bounds.contains(k2, m2) || uz.iter().all(|z| z.is_zero()) {
            continue;
        }
        let eta = frame.point(k2, m2);
        let d = cdot(uz, &eta);
        if d.is_zero() {
            continue;
        }
        let ue = &values[dense_index(bounds, k2, m2)];
        for i in 0..3 {
            acc[i] += d * ue[i];
        }
    }
    let factor = Complex64::new(0.0, -std::f64::consts::TAU);
    acc.map(|z| factor * z)
}

fn dense_index(bounds: &BoxSize, k: i64, m: i64) -> usize {
    ((k + bounds.k) * (2 * bounds.m + 1) + (m + bounds.m)) as usize
}

/// Right-hand side through the three-term reduction
/// `−2πi[(ξ₀·ξ)û(ξ) + (ξ₁·ξ)(e^{−2πiat}û(ξ−η₀) + e^{2πiat}û(ξ+η₀))]`.
pub fn reduced_rhs<C: Coefficient>(
    solution: &FourierSolution3D<C>,
    values: &[[Complex64; 3]],
    k: i64,
    m: i64,
    t: f64,
) -> Result<[Complex64; 3], VerifyError> {
    let bounds = solution.bounds;
    if !is_interior(&bounds, k, m) {
        return Err(VerifyError::NotInterior { k, m });
    }
    let frame = &solution.frame;
    let xi = frame.point(k, m);
    let a = frame.axis_rate() as f64;
    let diag = dot(&frame.xi0, &xi) as f64;
    let cross = dot(&frame.xi1, &xi) as f64;
    let down = unit_phase(-a * t);
    let up = unit_phase(a * t);
    let cur = values[dense_index(&bounds, k, m)];
    let below = values[dense_index(&bounds, k - 1, m)];
    let above = values[dense_index(&bounds, k + 1, m)];
    let factor = Complex64::new(0.0, -std::f64::consts::TAU);
    Ok([0, 1, 2].map(|i| factor * (cur[i] * diag + (below[i] * down + above[i] * up) * cross)))
}

/// Residual of a single mode at a single time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualEntry {
    pub k: i64,
    pub m: i64,
    pub t: f64,
    pub residual: f64,
    /// `residual / (1 + max(|∂_t û|, |rhs|))`
    pub relative: f64,
    /// Relative gap between the brute-force and the three-term right-hand sides.
    pub reduction_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub bounds: BoxSize,
    pub times: Vec<f64>,
    pub interior: &'static str,
    pub entries: Vec<ResidualEntry>,
    pub max_residual: f64,
    pub max_relative: f64,
    pub mean_relative: f64,
    pub max_reduction_gap: f64,
}

fn residual_entry<C: Coefficient>(
    solution: &FourierSolution3D<C>,
    values: &[[Complex64; 3]],
    deriv: &[Complex64; 3],
    k: i64,
    m: i64,
    t: f64,
) -> Result<ResidualEntry, VerifyError> {
    let rhs = brute_force_rhs(&solution.frame, &solution.bounds, values, k, m);
    let reduced = reduced_rhs(solution, values, k, m, t)?;
    let diff = [0, 1, 2].map(|i| deriv[i] - rhs[i]);
    let gap = [0, 1, 2].map(|i| reduced[i] - rhs[i]);
    let residual = norm3(&diff);
    let scale = 1.0 + norm3(deriv).max(norm3(&rhs));
    Ok(ResidualEntry { k, m, t, residual, relative: residual / scale, reduction_gap: norm3(&gap) / scale })
}

/// `‖∂_t û(ξ, t) + 2πi Σ (û(ζ,t)·η)û(η,t)‖` for interior `ξ = (k, m)`.
pub fn ode_residual<C: Coefficient>(solution: &FourierSolution3D<C>, k: i64, m: i64, t: f64) -> Result<f64, VerifyError> {
    if !is_interior(&solution.bounds, k, m) {
        return Err(VerifyError::NotInterior { k, m });
    }
    if t < 0.0 {
        return Err(VerifyError::Invalid(format!("time must be nonnegative, got {t}")));
    }
    let values = solution.evaluate_all(t)?;
    let table = solution.derivative_table(t, 1)?;
    let deriv = solution.mode(k, m).expect("interior").differentiate().evaluate_with(&table)?;
    Ok(residual_entry(solution, &values, &deriv, k, m, t)?.residual)
}

/// Residuals over all interior modes and the given times.
pub fn residual_report<C: Coefficient>(solution: &FourierSolution3D<C>, times: &[f64]) -> Result<ResidualReport, VerifyError> {
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
        return Err(VerifyError::Invalid(format!("time must be nonnegative, got {t}")));
    }
    let bounds = solution.bounds;
    let derivs: Vec<ModeFunction<C>> = solution.modes().map(|(_, m)| m.differentiate()).collect();
    let interior: Vec<(i64, i64)> = bounds.points().filter(|&(k, m)| is_interior(&bounds, k, m)).collect();
    let per_time: Vec<Vec<ResidualEntry>> = times
        .par_iter()
        .map(|&t| -> Result<Vec<ResidualEntry>, VerifyError> {
            let values = solution.evaluate_all(t)?;
            let table = solution.derivative_table(t, 1)?;
            interior
                .par_iter()
                .map(|&(k, m)| {
                    let deriv = derivs[dense_index(&bounds, k, m)].evaluate_with(&table)?;
                    residual_entry(solution, &values, &deriv, k, m, t)
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let entries: Vec<ResidualEntry> = per_time.into_iter().flatten().collect();
    let max_of = |f: fn(&ResidualEntry) -> f64| entries.iter().map(f).fold(0.0, f64::max);
    let mean_relative =
        if entries.is_empty() { 0.0 } else { entries.iter().map(|e| e.relative).sum::<f64>() / entries.len() as f64 };
    Ok(ResidualReport {
        bounds,
        times: times.to_vec(),
        interior: INTERIOR_DEFINITION,
        max_residual: max_of(|e| e.residual),
        max_relative: max_of(|e| e.relative),
        max_reduction_gap: max_of(|e| e.reduction_gap),
        mean_relative,
        entries,
    })
}

/// Symbolic residual of one mode, grouped by the complex amplitude product
/// multiplying each exact part.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicResidual<C: Coefficient> {
    pub groups: Vec<(Complex64, VecSeries<C>)>,
}

impl<C: Coefficient> SymbolicResidual<C> {
    /// Every group vanishes identically (a sufficient condition for zero).
    pub fn is_identically_zero(&self) -> bool {
        self.groups.iter().all(|(_, s)| s.iter().all(TermSeries::is_zero))
    }
}

/// `∂_t û(ξ) + 2πi Σ (û(ζ)·η)û(η)` as term series, for interior `ξ`.
///
/// Fails with [`VerifyError::Unsupported`] if a contributing product has
/// bump factors on both sides.
pub fn symbolic_residual<C: Coefficient>(
    solution: &FourierSolution3D<C>,
    k: i64,
    m: i64,
) -> Result<SymbolicResidual<C>, VerifyError> {
    let bounds = solution.bounds;
    if !is_interior(&bounds, k, m) {
        return Err(VerifyError::NotInterior { k, m });
    }
    // adding 0.0 maps −0.0 to 0.0
    let key = |z: Complex64| ((z.re + 0.0).to_bits(), (z.im + 0.0).to_bits());
    let mut groups: BTreeMap<(u64, u64), (Complex64, VecSeries<C>)> = BTreeMap::new();
    let mut push = |amp: Complex64, s: VecSeries<C>| {
        let entry = groups.entry(key(amp)).or_insert_with(|| (amp, Default::default()));
        for i in 0..3 {
            entry.1[i] = entry.1[i].add(&s[i]);
        }
    };
    let target = solution.mode(k, m).expect("interior");
    if !target.amplitude.is_zero() {
        push(target.amplitude, target.differentiate().components);
    }
    let two_pi_i = C::monomial(0.into(), 1.into(), 1);
    for ((k1, m1), uz) in solution.modes() {
        let (k2, m2) = (k - k1, m - m1);
        let Some(ue) = solution.mode(k2, m2) else { continue };
        let amp = uz.amplitude * ue.amplitude;
        if amp.is_zero() {
            continue;
        }
        let d = uz.dot(&solution.point(k2, m2));
        if d.is_zero() {
            continue;
        }
        let mut term: VecSeries<C> = Default::default();
        for i in 0..3 {
            let prod = d.product(&ue.components[i]).ok_or(VerifyError::Unsupported { k, m })?;
            term[i] = prod.scale(&two_pi_i);
        }
        push(amp, term);
    }
    Ok(SymbolicResidual { groups: groups.into_values().collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureCheck {
    DivergenceFree,
    ConjugationSymmetry,
    PlaneSupport,
    BumpFactor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureViolation {
    pub check: StructureCheck,
    pub k: i64,
    pub m: i64,
    pub detail: String,
}

/// Exact symbolic structure checks; returns the first violation found.
///
/// Conjugation pairs `(k, m)` and `(−k, −m)` are compared once, from the
/// member with the larger index; the violation names that member and the
/// detail names its partner.
pub fn check_structure<C: Coefficient>(solution: &FourierSolution3D<C>) -> Result<(), StructureViolation> {
    let frame = &solution.frame;
    for ((k, m), mode) in solution.modes() {
        let xi = solution.point(k, m);
        if dot(&xi, &frame.v) != 0 {
            return Err(StructureViolation {
                check: StructureCheck::PlaneSupport,
                k,
                m,
                detail: format!("wave vector {xi:?} is not orthogonal to v"),
            });
        }
        if mode.is_zero() {
            continue;
        }
        if !mode.dot(&xi).is_zero() {
            return Err(StructureViolation {
                check: StructureCheck::DivergenceFree,
                k,
                m,
                detail: format!("u.xi = {:?}", mode.dot(&xi)),
            });
        }
        if m != 0 && !mode.components.iter().all(TermSeries::all_terms_carry_bump) {
            return Err(StructureViolation {
                check: StructureCheck::BumpFactor,
                k,
                m,
                detail: "off-axis mode has a term without a bump factor".into(),
            });
        }
    }
    for ((k, m), mode) in solution.modes() {
        if (k, m) < (-k, -m) {
            continue;
        }
        let partner = solution.mode(-k, -m).expect("box is symmetric");
        let ok = if mode.is_zero() || partner.is_zero() {
            mode.is_zero() && partner.is_zero()
        } else {
            partner.amplitude == mode.amplitude.conj() && partner.components == mode.conjugate().components
        };
        if !ok {
            return Err(StructureViolation {
                check: StructureCheck::ConjugationSymmetry,
                k,
                m,
                detail: format!("mode differs from the conjugate of ({}, {})", -k, -m),
            });
        }
    }
    Ok(())
}

/// One row of the symbolic-versus-Galerkin comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRow {
    pub k: i64,
    pub m: i64,
    pub t: f64,
    pub symbolic_norm: f64,
    pub galerkin_norm: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchReport {
    pub t_probe: f64,
    pub rows: Vec<BranchRow>,
    pub max_axis_discrepancy: f64,
    pub max_off_axis_discrepancy: f64,
    /// Every seed `(0, m)` differs by at least `|g(m)|·f(t_probe)` (up to rounding).
    pub seeds_separated: bool,
    pub galerkin: GalerkinState<3>,
}

/// Lattice field over the box, in box order.
pub fn plane_field(frame: &LatticeFrame, bounds: &BoxSize) -> LatticeField<3> {
    LatticeField::new(bounds.points().map(|(k, m)| frame.point(k, m)).collect())
}

/// Compare the constructed branch with the Galerkin evolution of its own
/// initial data at `t_probe`.
pub fn branch_contrast<C: Coefficient>(
    solution: &FourierSolution3D<C>,
    t_probe: f64,
    tol: f64,
) -> Result<BranchReport, VerifyError> {
    if !(t_probe >= 0.0) {
        return Err(VerifyError::Invalid(format!("probe time must be nonnegative, got {t_probe}")));
    }
    let field = plane_field(&solution.frame, &solution.bounds);
    let initial = solution.evaluate_all(0.0)?;
    let mut traj = galerkin_integrate(&field, &initial, &[t_probe], tol)?;
    let galerkin = traj.pop().expect("one sample");
    let symbolic = solution.evaluate_all(t_probe)?;
    let f = solution.bump().value(0, t_probe)?;
    let v_norm = (dot(&solution.frame.v, &solution.frame.v) as f64).sqrt();

    let mut rows = Vec::with_capacity(symbolic.len());
    let (mut axis, mut off, mut separated) = (0.0f64, 0.0f64, true);
    for (((k, m), s), g) in solution.bounds.points().zip(&symbolic).zip(&galerkin.modes) {
        let diff = [0, 1, 2].map(|i| s[i] - g[i]);
        let row = BranchRow { k, m, t: t_probe, symbolic_norm: norm3(s), galerkin_norm: norm3(g), discrepancy: norm3(&diff) };
        if m == 0 {
            axis = axis.max(row.discrepancy);
        } else {
            off = off.max(row.discrepancy);
        }
        if k == 0 && m != 0 {
            let seeded = solution.generator.g(m).norm() * f * v_norm;
            if row.discrepancy < seeded * (1.0 - 1e-9) - tol {
                separated = false;
            }
        }
        rows.push(row);
    }
    Ok(BranchReport {
        t_probe,
        rows,
        max_axis_discrepancy: axis,
        max_off_axis_discrepancy: off,
        seeds_separated: separated,
        galerkin,
    })
}

/// Closed-form evolution of axis-only data: `û(kη₀, t) = e^{−2πikat}û₀(kη₀)`.
pub fn axis_evolution(frame: &LatticeFrame, k: i64, initial: [Complex64; 3], t: f64) -> [Complex64; 3] {
    let phase = unit_phase(-(k * frame.axis_rate()) as f64 * t);
    initial.map(|z| z * phase)
}
