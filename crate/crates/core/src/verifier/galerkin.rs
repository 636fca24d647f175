//! Truncated Galerkin system on a finite set of lattice modes.
//!
//! Given modes `û(ξ_j)` on a finite set of wave vectors, the truncation keeps
//! `∂_t û(ξ) = −2πi Σ (û(ζ)·η)·û(η)` over pairs `ζ + η = ξ` with both inside
//! the set. Pairs are precomputed once.

use std::collections::HashMap;
use std::f64::consts::TAU;

use num_complex::Complex64;

use super::ode::{integrate, IntegratorStats, OdeError, OdeOptions};

/// A finite set of wave vectors in `ℤ^D` with its convolution pair table.
#[derive(Debug, Clone)]
pub struct LatticeField<const D: usize> {
    wavevectors: Vec<[i64; D]>,
    /// `pairs[i]` lists `(ζ, η)` indices with `ζ + η = ξ_i`.
    pairs: Vec<Vec<(u32, u32)>>,
}

impl<const D: usize> LatticeField<D> {
    pub fn new(wavevectors: Vec<[i64; D]>) -> Self {
        let index: HashMap<[i64; D], u32> = wavevectors.iter().enumerate().map(|(i, w)| (*w, i as u32)).collect();
        let pairs = wavevectors
            .iter()
            .map(|xi| {
                wavevectors
                    .iter()
                    .enumerate()
                    .filter_map(|(z, zeta)| {
                        let mut eta = [0i64; D];
                        for d in 0..D {
                            eta[d] = xi[d] - zeta[d];
                        }
                        index.get(&eta).map(|&e| (z as u32, e))
                    })
                    .collect()
            })
            .collect();
        LatticeField { wavevectors, pairs }
    }

    pub fn len(&self) -> usize {
        self.wavevectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavevectors.is_empty()
    }

    pub fn wavevectors(&self) -> &[[i64; D]] {
        &self.wavevectors
    }

    pub fn position(&self, xi: &[i64; D]) -> Option<usize> {
        self.wavevectors.iter().position(|w| w == xi)
    }

    /// Truncated right-hand side for a flattened state (`D` entries per mode).
    pub fn rhs(&self, state: &[Complex64], out: &mut [Complex64]) {
        let factor = Complex64::new(0.0, -TAU);
        for (i, pairs) in self.pairs.iter().enumerate() {
            let mut acc = [Complex64::default(); D];
            for &(z, e) in pairs {
                let (z, e) = (z as usize, e as usize);
                let eta = &self.wavevectors[e];
                let uz = &state[z * D..z * D + D];
                let mut dot = Complex64::default();
                for d in 0..D {
                    if eta[d] != 0 {
                        dot += uz[d] * eta[d] as f64;
                    }
                }
                if dot == Complex64::default() {
                    continue;
                }
                let ue = &state[e * D..e * D + D];
                for d in 0..D {
                    acc[d] += dot * ue[d];
                }
            }
            for d in 0..D {
                out[i * D + d] = factor * acc[d];
            }
        }
    }

    pub fn flatten(modes: &[[Complex64; D]]) -> Vec<Complex64> {
        modes.iter().flat_map(|m| m.iter().copied()).collect()
    }

    pub fn unflatten(state: &[Complex64]) -> Vec<[Complex64; D]> {
        state
            .chunks_exact(D)
            .map(|c| {
                let mut m = [Complex64::default(); D];
                m.copy_from_slice(c);
                m
            })
            .collect()
    }

    /// `max_ξ |û(ξ)·ξ|`.
    pub fn divergence(&self, modes: &[[Complex64; D]]) -> f64 {
        self.wavevectors
            .iter()
            .zip(modes)
            .map(|(xi, u)| (0..D).map(|d| u[d] * xi[d] as f64).sum::<Complex64>().norm())
            .fold(0.0, f64::max)
    }
}

/// `Σ_ξ ‖û(ξ)‖²`.
pub fn energy<const D: usize>(modes: &[[Complex64; D]]) -> f64 {
    modes.iter().flat_map(|m| m.iter()).map(|z| z.norm_sqr()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState<const D: usize> {
    pub t: f64,
    pub modes: Vec<[Complex64; D]>,
    pub stats: IntegratorStats,
    pub tol: f64,
}

impl<const D: usize> GalerkinState<D> {
    pub fn energy(&self) -> f64 {
        energy(&self.modes)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GalerkinError {
    #[error("initial data has {got} modes, expected {expected}")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("initial data is not divergence-free (max |u.xi| = {0:e})")]
    NotDivergenceFree(f64),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Integrate the truncated system from `t = 0`, sampling at ascending times.
///
/// The trajectory stores cumulative integrator statistics at each sample.
pub fn galerkin_integrate<const D: usize>(
    field: &LatticeField<D>,
    initial: &[[Complex64; D]],
    sample_times: &[f64],
    tol: f64,
) -> Result<Vec<GalerkinState<D>>, GalerkinError> {
    if initial.len() != field.len() {
        return Err(GalerkinError::ShapeMismatch { got: initial.len(), expected: field.len() });
    }
    let div = field.divergence(initial);
    let scale = 1.0 + initial.iter().flat_map(|m| m.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    if div > 1e-12 * scale {
        return Err(GalerkinError::NotDivergenceFree(div));
    }
    let y0 = LatticeField::<D>::flatten(initial);
    let opts = OdeOptions { tol, ..OdeOptions::default() };
    let (samples, stats) = integrate(|_, y, dy| field.rhs(y, dy), 0.0, &y0, sample_times, &opts)?;
    Ok(sample_times
        .iter()
        .zip(samples)
        .map(|(&t, y)| GalerkinState { t, modes: LatticeField::<D>::unflatten(&y), stats, tol })
        .collect())
}
