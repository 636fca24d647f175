//! Adaptive explicit Runge–Kutta integration for complex state vectors.
//!
//! Verner's efficient 6(5) pair (9 stages, first-same-as-last) with a
//! proportional–integral step controller.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid integrator input: {0}")]
    Invalid(String),
}

const STAGES: usize = 9;

const C: [f64; STAGES] = [0.0, 0.06, 0.095_933_333_333_333_33, 0.1439, 0.4973, 0.9725, 0.9995, 1.0, 1.0];

const A: [[f64; STAGES]; STAGES] = [
    [0.0; STAGES],
    [0.06, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.019_239_962_962_962_962, 0.076_693_370_370_370_37, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.035975, 0.0, 0.107925, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.318_683_415_233_148_4, 0.0, -5.042_058_063_628_562, 4.220_674_648_395_414, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-41.872_591_664_327_516, 0.0, 159.432_562_163_137_5, -122.119_213_565_010_03, 5.531_743_066_200_054, 0.0, 0.0, 0.0, 0.0],
    [-54.430_156_935_316_504, 0.0, 207.067_251_365_018_48, -158.610_813_784_59, 6.991_816_585_950_242, -0.018_597_231_062_203_234, 0.0, 0.0, 0.0],
    [
        -54.663_741_787_281_98,
        0.0,
        207.952_806_255_389_36,
        -159.288_957_474_499_5,
        7.018_743_740_796_944,
        -0.018_338_785_905_045_722,
        -5.119_484_997_882_099e-4,
        0.0,
        0.0,
    ],
    B6,
];

const B6: [f64; STAGES] = [
    0.034_389_578_683_570_36,
    0.0,
    0.0,
    0.258_262_455_563_350_3,
    0.420_937_118_967_353_7,
    4.405_396_469_669_31,
    -176.483_119_024_298_65,
    172.364_133_401_415_07,
    0.0,
];

const B5: [f64; STAGES] = [
    0.049_099_676_483_824_9,
    0.0,
    0.0,
    0.225_111_222_951_652_42,
    0.469_468_225_302_956_2,
    0.806_579_224_998_886_8,
    0.0,
    -0.607_119_489_177_796,
    0.056_861_139_440_475_696,
];

/// Order of the propagated solution.
pub const ORDER: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// Mixed tolerance: a component is accepted when its error estimate is
    /// below `tol·(1 + |y|)`.
    pub tol: f64,
    pub initial_step: Option<f64>,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { tol: 1e-10, initial_step: None, min_step: 1e-14, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Scratch space for one step.
struct Workspace {
    k: Vec<Vec<Complex64>>,
    tmp: Vec<Complex64>,
    y6: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace { k: vec![vec![Complex64::default(); n]; STAGES], tmp: vec![Complex64::default(); n], y6: vec![Complex64::default(); n] }
    }
}

/// One step of size `h` from `(t, y)`, with `k[0] = f(t, y)` already filled.
/// Leaves the 6th-order result in `ws.y6` and returns the scaled error norm.
fn step<F>(rhs: &mut F, t: f64, y: &[Complex64], h: f64, ws: &mut Workspace, tol: f64) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y.len();
    for s in 1..STAGES {
        for i in 0..n {
            let mut acc = Complex64::default();
            for (j, a) in A[s][..s].iter().enumerate() {
                if *a != 0.0 {
                    acc += ws.k[j][i] * *a;
                }
            }
            ws.tmp[i] = y[i] + acc * h;
        }
        rhs(t + C[s] * h, &ws.tmp, &mut ws.k[s]);
    }
    // B6 equals the last row of A, so tmp after the final stage is y6.
    ws.y6.copy_from_slice(&ws.tmp);
    let mut sum = 0.0;
    for i in 0..n {
        let mut err = Complex64::default();
        for s in 0..STAGES {
            let d = B6[s] - B5[s];
            if d != 0.0 {
                err += ws.k[s][i] * d;
            }
        }
        let scale = tol * (1.0 + y[i].norm().max(ws.y6[i].norm()));
        let e = (err * h).norm() / scale;
        sum += e * e;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Integrate `y′ = f(t, y)` from `t0`, returning the state at each of the
/// ascending `sample_times` (all `≥ t0`).
pub fn integrate<F>(
    mut rhs: F,
    t0: f64,
    y0: &[Complex64],
    sample_times: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vec<Complex64>>, IntegratorStats), OdeError>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    if !(opts.tol > 0.0) {
        return Err(OdeError::Invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|&s| s < t0 || !s.is_finite()) {
        return Err(OdeError::Invalid("sample times must be finite, ascending and >= t0".into()));
    }
    let n = y0.len();
    let mut stats = IntegratorStats::default();
    let mut ws = Workspace::new(n);
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut out = Vec::with_capacity(sample_times.len());

    rhs(t, &y, &mut ws.k[0]);
    stats.rhs_evals += 1;

    let span = sample_times.last().map_or(0.0, |&e| e - t0);
    let mut h = opts.initial_step.unwrap_or_else(|| initial_step(&y, &ws.k[0], opts.tol, span));
    let mut prev_err: f64 = 1.0;
    const SAFETY: f64 = 0.9;
    let alpha = 0.7 / ORDER as f64;
    let beta = 0.4 / ORDER as f64;

    for &target in sample_times {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(OdeError::StepSizeUnderflow { t, h });
            }
            let remaining = target - t;
            let last = h >= remaining;
            let hh = if last { remaining } else { h };
            let err = step(&mut rhs, t, &y, hh, &mut ws, opts.tol);
            stats.rhs_evals += STAGES - 1;
            if !err.is_finite() {
                if hh <= opts.min_step {
                    return Err(OdeError::NonFinite { t });
                }
                stats.rejected += 1;
                h = hh * 0.25;
                continue;
            }
            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { target } else { t + hh };
                std::mem::swap(&mut y, &mut ws.y6);
                // first same as last
                let (first, rest) = ws.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[STAGES - 2]);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (SAFETY * err.powf(-alpha) * prev_err.powf(beta)).clamp(0.2, 5.0)
                };
                prev_err = err.max(1e-4);
                if !last || factor < 1.0 {
                    h = hh * factor;
                }
            } else {
                stats.rejected += 1;
                let factor = (SAFETY * err.powf(-1.0 / ORDER as f64)).clamp(0.1, 0.9);
                h = hh * factor;
                if h < opts.min_step {
                    return Err(OdeError::StepSizeUnderflow { t, h });
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn initial_step(y: &[Complex64], f: &[Complex64], tol: f64, span: f64) -> f64 {
    let fmax = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ymax = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let guess = if fmax == 0.0 { span.max(1e-3) } else { tol.powf(1.0 / (ORDER as f64 + 1.0)) * (1.0 + ymax) / fmax };
    guess.clamp(1e-8, span.max(1e-8))
}

/// Fixed step size integration; used to measure the convergence order.
pub fn integrate_fixed<F>(mut rhs: F, t0: f64, y0: &[Complex64], t_end: f64, steps: usize) -> Vec<Complex64>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let mut ws = Workspace::new(y0.len());
    let mut y = y0.to_vec();
    let h = (t_end - t0) / steps as f64;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        rhs(t, &y, &mut ws.k[0]);
        step(&mut rhs, t, &y, h, &mut ws, 1.0);
        std::mem::swap(&mut y, &mut ws.y6);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let _ = t;
        for (d, v) in dy.iter_mut().zip(y) {
            *d = Complex64::new(0.0, -3.0) * v;
        }
    }

    #[test]
    fn tableau_consistency() {
        for s in 0..STAGES {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-12, "stage {s}");
        }
        assert!((B6.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((B5.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_step_convergence_order() {
        // y′ = y²·cos t, y(0) = 1/2, so y = 1/(2 − sin t)
        let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| dy[0] = y[0] * y[0] * t.cos();
        let y0 = [Complex64::new(0.5, 0.0)];
        let exact = 1.0 / (2.0 - 3f64.sin());
        let err = |n| (integrate_fixed(rhs, 0.0, &y0, 3.0, n)[0].re - exact).abs();
        let (e1, e2) = (err(8), err(16));
        assert!(e2 > 1e-12, "error {e2} is at rounding level");
        let observed = (e1 / e2).log2();
        assert!(observed > 5.7 && observed < 7.5, "observed order {observed}");

        let y0 = [Complex64::new(1.0, 0.0)];
        let exact = Complex64::from_polar(1.0, -3.0);
        let err = |n| (integrate_fixed(rotation, 0.0, &y0, 1.0, n)[0] - exact).norm();
        assert!((err(6) / err(12)).log2() > 5.7);
    }

    #[test]
    fn adaptive_meets_tolerance_on_a_nonautonomous_problem() {
        // y′ = cos(t)·y, y = exp(sin t)
        let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| dy[0] = y[0] * t.cos();
        let times = [0.5, 1.0, 5.0, 20.0];
        let (out, stats) = integrate(rhs, 0.0, &[Complex64::new(1.0, 0.0)], &times, &OdeOptions::default()).unwrap();
        for (t, y) in times.iter().zip(&out) {
            assert!((y[0].re - t.sin().exp()).abs() < 1e-8, "t={t}");
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn zero_rhs_is_exact() {
        let (out, _) =
            integrate(|_, _, dy: &mut [Complex64]| dy.fill(Complex64::default()), 0.0, &[Complex64::new(2.0, 1.0)], &[3.0], &OdeOptions::default())
                .unwrap();
        assert_eq!(out[0][0], Complex64::new(2.0, 1.0));
    }

    #[test]
    fn blowup_is_reported() {
        // y′ = y², y(0) = 1 blows up at t = 1
        let rhs = |_: f64, y: &[Complex64], dy: &mut [Complex64]| dy[0] = y[0] * y[0];
        let res = integrate(rhs, 0.0, &[Complex64::new(1.0, 0.0)], &[2.0], &OdeOptions::default());
        assert!(matches!(res, Err(OdeError::StepSizeUnderflow { .. }) | Err(OdeError::NonFinite { .. })));
    }

    #[test]
    fn bad_inputs() {
        let opts = OdeOptions { tol: 0.0, ..Default::default() };
        assert!(integrate(rotation, 0.0, &[Complex64::default()], &[1.0], &opts).is_err());
        assert!(integrate(rotation, 0.0, &[Complex64::default()], &[1.0, 0.5], &OdeOptions::default()).is_err());
    }
}
