//! Open-loop frequency sweeps and eigenvalue extraction.
//!
//! Synthetic steady-state frequency responses are fitted to the scaled
//! susceptibility of the driven mode,
//!
//! ```text
//! F(omega_d) = f * chi1(omega_d) * e^{i varphi} + b,
//! ```
//!
//! by damped Gauss-Newton least squares over the nine parameters
//! (Omega1, Omega2, gamma1, gamma2, g, f, varphi, Re b, Im b). The in-phase
//! component `A cos(theta)` is fitted against `Re F` and the quadrature
//! component `A sin(theta)` against `-Im F`. Repeating the fit over a grid
//! of pump settings reconstructs the eigenvalue Riemann surfaces.
//!
//! Frequencies are centered on the sweep window internally, so the fit is
//! equivariant under a common translation of the grid and the resonances.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Device, EffectiveHamiltonian, EigenPair, ModelError};
use crate::plant::{envelope_run, EnvelopeState, PlantError};
use crate::util::wrap_angle;

/// Default number of sweep points.
pub const DEFAULT_SWEEP_POINTS: usize = 801;
/// Relative step convergence threshold of the fitter.
const STEP_TOL: f64 = 1e-10;
/// Iteration cap of the fitter.
const MAX_ITERS: usize = 200;
/// Relative central-difference step for the numerical Jacobian.
const JACOBIAN_STEP: f64 = 1e-6;
const N_PARAMS: usize = 9;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("sweep has no usable peak (flat magnitude)")]
    DegenerateSweep,
    #[error("sweep needs at least {0} points")]
    TooFewPoints(usize),
    #[error("fit converged to a non-physical parameter set: {0}")]
    NonPhysical(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// One steady-state sweep sample: drive frequency plus the in-phase and
/// quadrature components `A cos(theta)` / `A sin(theta)` of the response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Drive frequency (rad/s).
    pub omega_d: f64,
    pub in_phase: f64,
    pub quadrature: f64,
}

impl SweepPoint {
    /// The measured response as the complex number `A e^{-i theta}`.
    pub fn response(&self) -> Complex64 {
        Complex64::new(self.in_phase, -self.quadrature)
    }
}

/// How sweep samples are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepSource {
    /// Evaluate the steady-state closed form directly.
    Analytic,
    /// Integrate the envelope model to steady state at every grid point.
    Simulated,
}

/// Additive complex Gaussian noise, seeded for reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per-component standard deviation, in response units.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// Noise level for a target signal-to-noise ratio in dB, relative to the
    /// largest clean response magnitude.
    pub fn from_snr_db(snr_db: f64, peak: f64, seed: u64) -> Self {
        NoiseSpec { sigma: peak * 10f64.powf(-snr_db / 20.0), seed }
    }
}

/// Sweep generation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub source: SweepSource,
    /// Drive amplitude f.
    pub drive_f: f64,
    /// Circuit phase varphi injected as e^{i varphi} on the response.
    pub varphi: f64,
    /// Complex feedthrough added to every point.
    pub feedthrough: Complex64,
    pub noise: Option<NoiseSpec>,
    /// Settling time of the simulated source, in units of 1/min(gamma in Hz):
    /// the plant integrates for `settle_factor * 2*pi / min(gamma)` seconds
    /// per point.
    pub settle_factor: f64,
    /// Envelope step of the simulated source (s).
    pub envelope_dt: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            source: SweepSource::Analytic,
            drive_f: 1.0,
            varphi: 0.0,
            feedthrough: Complex64::new(0.0, 0.0),
            noise: None,
            settle_factor: 25.0,
            envelope_dt: 1e-3,
        }
    }
}

/// Default sweep grid: `n` points spanning
/// `[Omega1 - 6 gamma2, Omega1 + 6 gamma2 + |Omega2 - Omega1|]`, which
/// covers both resonances for every weak-coupling configuration.
pub fn default_grid(h: &EffectiveHamiltonian, n: usize) -> Vec<f64> {
    let lo = h.omega1 - 6.0 * h.gamma2;
    let hi = h.omega1 + 6.0 * h.gamma2 + h.detuning().abs();
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Generate a synthetic open-loop sweep of the driven mode.
pub fn sweep(
    h: &EffectiveHamiltonian,
    grid: &[f64],
    cfg: &SweepConfig,
) -> Result<Vec<SweepPoint>, SpectraError> {
    let rotation = Complex64::from_polar(1.0, cfg.varphi);
    let mut rng_state = cfg.noise.map(|n| (ChaCha8Rng::seed_from_u64(n.seed), n.sigma));
    let mut points = Vec::with_capacity(grid.len());

    let simulate = |omega_d: f64| -> Result<Complex64, SpectraError> {
        let min_gamma = h.gamma1.min(h.gamma2);
        let t_settle = cfg.settle_factor * std::f64::consts::TAU / min_gamma;
        let n_steps = (t_settle / cfg.envelope_dt).ceil() as usize;
        let out = envelope_run(
            &EnvelopeState::zero(),
            h,
            omega_d,
            cfg.drive_f,
            cfg.envelope_dt,
            n_steps,
        )?;
        Ok(out.a0)
    };

    for &omega_d in grid {
        let a0 = match cfg.source {
            SweepSource::Analytic => h.steady_state(omega_d, cfg.drive_f).0,
            SweepSource::Simulated => simulate(omega_d)?,
        };
        let mut z = a0 * rotation + cfg.feedthrough;
        if let Some((rng, sigma)) = &mut rng_state {
            let (n1, n2) = gaussian_pair(rng);
            z += Complex64::new(*sigma * n1, *sigma * n2);
        }
        // z models A e^{-i theta}: in-phase A cos(theta), quadrature A sin(theta).
        points.push(SweepPoint { omega_d, in_phase: z.re, quadrature: -z.im });
    }
    Ok(points)
}

fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (-2.0 * u1.ln()).sqrt();
    (r * u2.cos(), r * u2.sin())
}

/// Result of a susceptibility fit (also used as the fitter's seed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Dressed frequency of mode 1 (rad/s).
    pub omega1: f64,
    /// Dressed frequency of mode 2 (rad/s).
    pub omega2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Coupling rate (rad/s), reported non-negative.
    pub g: f64,
    /// Drive scale, reported positive.
    pub f: f64,
    /// Circuit phase (rad), principal value.
    pub varphi: f64,
    pub feedthrough_re: f64,
    pub feedthrough_im: f64,
    /// Root-mean-square misfit over all residual components.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Eigenvalues of the fitted Hamiltonian.
    pub eigenvalues: EigenPair,
}

impl FitResult {
    pub fn hamiltonian(&self) -> EffectiveHamiltonian {
        EffectiveHamiltonian {
            omega1: self.omega1,
            omega2: self.omega2,
            g: self.g,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
        }
    }

    fn from_params(p: &[f64; N_PARAMS], omega_ref: f64, residual: f64, converged: bool, iterations: usize) -> Self {
        let mut p = *p;
        // Canonical gauge: g >= 0 (only g^2 enters), f > 0 with the sign
        // folded into varphi.
        p[4] = p[4].abs();
        if p[5] < 0.0 {
            p[5] = -p[5];
            p[6] += std::f64::consts::PI;
        }
        p[6] = wrap_angle(p[6]);
        let h = EffectiveHamiltonian {
            omega1: p[0] + omega_ref,
            omega2: p[1] + omega_ref,
            g: p[4],
            gamma1: p[2],
            gamma2: p[3],
        };
        FitResult {
            omega1: h.omega1,
            omega2: h.omega2,
            gamma1: h.gamma1,
            gamma2: h.gamma2,
            g: h.g,
            f: p[5],
            varphi: p[6],
            feedthrough_re: p[7],
            feedthrough_im: p[8],
            residual,
            converged,
            iterations,
            eigenvalues: h.eigenvalues(),
        }
    }

    fn params(&self, omega_ref: f64) -> [f64; N_PARAMS] {
        [
            self.omega1 - omega_ref,
            self.omega2 - omega_ref,
            self.gamma1,
            self.gamma2,
            self.g,
            self.f,
            self.varphi,
            self.feedthrough_re,
            self.feedthrough_im,
        ]
    }
}

/// Peak-picking seed for [`fit`]: far-detuned baseline for the feedthrough,
/// magnitude maxima for the frequency seeds, half-power width for the
/// damping seeds.
pub fn initial_guess(points: &[SweepPoint]) -> Result<FitResult, SpectraError> {
    if points.len() < 50 {
        return Err(SpectraError::TooFewPoints(50));
    }
    let edge = (points.len() / 20).max(2);
    let baseline: Complex64 = points[..edge]
        .iter()
        .chain(&points[points.len() - edge..])
        .map(SweepPoint::response)
        .sum::<Complex64>()
        / (2 * edge) as f64;

    // Lightly smoothed magnitude of the baseline-free response.
    let raw: Vec<f64> = points.iter().map(|p| (p.response() - baseline).norm()).collect();
    let mags = crate::util::moving_average(&raw, 2);
    let (peak_idx, &peak_mag) =
        mags.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let floor = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(peak_mag > 10.0 * floor.max(1e-300)) && peak_mag - floor < 1e-12 * peak_mag.max(1e-300) {
        return Err(SpectraError::DegenerateSweep);
    }

    // Half-power width of the main peak -> damping seed.
    let half = peak_mag / std::f64::consts::SQRT_2;
    let mut lo = peak_idx;
    while lo > 0 && mags[lo] > half {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < mags.len() && mags[hi] > half {
        hi += 1;
    }
    let width = (points[hi].omega_d - points[lo].omega_d).abs();
    let gamma_seed = width.max(1e-6);

    // Second local maximum separated from the main peak by at least a
    // linewidth; single-peak sweeps fall back to a degenerate seed.
    let min_sep = gamma_seed;
    let mut second: Option<(usize, f64)> = None;
    for k in 1..mags.len() - 1 {
        if mags[k] > mags[k - 1]
            && mags[k] >= mags[k + 1]
            && (points[k].omega_d - points[peak_idx].omega_d).abs() > min_sep
            && mags[k] > 0.1 * peak_mag
        {
            if second.is_none_or(|(_, m)| mags[k] > m) {
                second = Some((k, mags[k]));
            }
        }
    }
    let w_peak = points[peak_idx].omega_d;
    let w_second = second.map(|(k, _)| points[k].omega_d).unwrap_or(w_peak);

    let omega1_seed = w_peak.min(w_second);
    let omega2_seed = w_peak.max(w_second);
    let g_seed = (0.5 * (omega2_seed - omega1_seed)).max(0.1 * gamma_seed);
    let f_seed = peak_mag * 0.5 * gamma_seed;

    // Phase seed from the main peak against the seeded model.
    let h_seed = EffectiveHamiltonian {
        omega1: omega1_seed,
        omega2: omega2_seed,
        g: g_seed,
        gamma1: gamma_seed,
        gamma2: gamma_seed,
    };
    let model_peak = h_seed.susceptibility(w_peak) * f_seed;
    let varphi_seed =
        wrap_angle((points[peak_idx].response() - baseline).arg() - model_peak.arg());

    let h = EffectiveHamiltonian {
        omega1: omega1_seed,
        omega2: omega2_seed,
        g: g_seed,
        gamma1: gamma_seed,
        gamma2: gamma_seed,
    };
    Ok(FitResult {
        omega1: h.omega1,
        omega2: h.omega2,
        gamma1: h.gamma1,
        gamma2: h.gamma2,
        g: h.g,
        f: f_seed,
        varphi: varphi_seed,
        feedthrough_re: baseline.re,
        feedthrough_im: baseline.im,
        residual: f64::INFINITY,
        converged: false,
        iterations: 0,
        eigenvalues: h.eigenvalues(),
    })
}

fn model_response(p: &[f64; N_PARAMS], w: f64) -> Complex64 {
    let h = EffectiveHamiltonian { omega1: p[0], omega2: p[1], g: p[4], gamma1: p[2], gamma2: p[3] };
    p[5] * h.susceptibility(w) * Complex64::from_polar(1.0, p[6]) + Complex64::new(p[7], p[8])
}

/// Stacked residual [in_phase - Re F, quadrature + Im F] over the sweep.
fn residuals(p: &[f64; N_PARAMS], points: &[SweepPoint], omega_ref: f64, out: &mut [f64]) {
    for (i, pt) in points.iter().enumerate() {
        let m = model_response(p, pt.omega_d - omega_ref);
        out[2 * i] = pt.in_phase - m.re;
        out[2 * i + 1] = pt.quadrature + m.im;
    }
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Solve the symmetric `N_PARAMS` system with Gaussian elimination and
/// partial pivoting.
fn solve(mut a: [[f64; N_PARAMS]; N_PARAMS], mut b: [f64; N_PARAMS]) -> Option<[f64; N_PARAMS]> {
    for col in 0..N_PARAMS {
        let pivot = (col..N_PARAMS).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N_PARAMS {
            let factor = a[row][col] / a[col][col];
            for k in col..N_PARAMS {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; N_PARAMS];
    for col in (0..N_PARAMS).rev() {
        let mut acc = b[col];
        for k in col + 1..N_PARAMS {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Fit the nine susceptibility parameters with damped Gauss-Newton
/// (Levenberg-style lambda damping on the normal equations, numerical
/// Jacobian by central differences). Accepted steps strictly decrease the
/// residual; convergence is declared once the relative step drops below
/// 1e-10. When the iteration cap is reached, the best parameters so far are
/// returned with `converged = false`.
pub fn fit(points: &[SweepPoint], seed: &FitResult) -> Result<FitResult, SpectraError> {
    if points.len() < 50 {
        return Err(SpectraError::TooFewPoints(50));
    }
    let omega_ref = points.iter().map(|p| p.omega_d).sum::<f64>() / points.len() as f64;
    let mut p = seed.params(omega_ref);
    if !p.iter().all(|x| x.is_finite()) {
        return Err(SpectraError::NonPhysical("non-finite seed".into()));
    }
    let n_res = 2 * points.len();
    let mut r = vec![0.0; n_res];
    let mut r_try = vec![0.0; n_res];
    residuals(&p, points, omega_ref, &mut r);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    let mut jac = vec![[0.0; N_PARAMS]; n_res];
    let mut p_hi = p;
    let mut p_lo = p;
    let mut r_hi = vec![0.0; n_res];
    let mut r_lo = vec![0.0; n_res];

    'outer: for iter in 0..MAX_ITERS {
        iterations = iter + 1;
        // Central-difference Jacobian.
        for j in 0..N_PARAMS {
            let h = JACOBIAN_STEP * p[j].abs().max(1e-2);
            p_hi.copy_from_slice(&p);
            p_lo.copy_from_slice(&p);
            p_hi[j] += h;
            p_lo[j] -= h;
            residuals(&p_hi, points, omega_ref, &mut r_hi);
            residuals(&p_lo, points, omega_ref, &mut r_lo);
            let inv = 0.5 / h;
            for i in 0..n_res {
                jac[i][j] = (r_hi[i] - r_lo[i]) * inv;
            }
        }
        // Normal equations J'J d = -J'r.
        let mut jtj = [[0.0; N_PARAMS]; N_PARAMS];
        let mut jtr = [0.0; N_PARAMS];
        for i in 0..n_res {
            let row = &jac[i];
            for a in 0..N_PARAMS {
                jtr[a] -= row[a] * r[i];
                for b in a..N_PARAMS {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        for a in 0..N_PARAMS {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }
        let max_diag = jtj.iter().enumerate().map(|(i, row)| row[i]).fold(0.0, f64::max);
        if max_diag <= 0.0 {
            break;
        }

        // Damped inner loop: grow lambda until a step reduces the cost.
        loop {
            let mut a = jtj;
            for i in 0..N_PARAMS {
                a[i][i] += lambda * jtj[i][i].max(1e-12 * max_diag);
            }
            let Some(step) = solve(a, jtr) else {
                lambda *= 10.0;
                if lambda > 1e14 {
                    break 'outer;
                }
                continue;
            };
            let mut p_try = p;
            for j in 0..N_PARAMS {
                p_try[j] += step[j];
            }
            residuals(&p_try, points, omega_ref, &mut r_try);
            let c_try = cost(&r_try);
            if c_try.is_finite() && c_try < c {
                let rel_step = (0..N_PARAMS)
                    .map(|j| step[j].abs() / p[j].abs().max(1e-3))
                    .fold(0.0, f64::max);
                p = p_try;
                std::mem::swap(&mut r, &mut r_try);
                c = c_try;
                lambda = (lambda / 3.0).max(1e-12);
                if rel_step < STEP_TOL {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                // No downhill direction left; treat the current point as
                // converged if the last attempted step was already tiny.
                let rel_step = (0..N_PARAMS)
                    .map(|j| step[j].abs() / p[j].abs().max(1e-3))
                    .fold(0.0, f64::max);
                converged = rel_step < 1e3 * STEP_TOL;
                break 'outer;
            }
        }
    }

    let rms = (c / n_res as f64).sqrt();
    let result = FitResult::from_params(&p, omega_ref, rms, converged, iterations);
    if result.gamma1 <= 0.0 || result.gamma2 <= 0.0 || result.f <= 0.0 {
        return Err(SpectraError::NonPhysical(format!(
            "gamma1 = {}, gamma2 = {}, f = {}",
            result.gamma1, result.gamma2, result.f
        )));
    }
    Ok(result)
}

/// Convenience: seed with [`initial_guess`] and fit.
pub fn fit_auto(points: &[SweepPoint]) -> Result<FitResult, SpectraError> {
    let seed = initial_guess(points)?;
    fit(points, &seed)
}

/// How surface cells obtain their eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceMode {
    /// Sweep and fit every cell.
    Fitted,
    /// Evaluate the closed form directly (fit-free reference surface).
    Analytic,
}

/// One reconstructed grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceCell {
    pub eigenvalues: EigenPair,
    pub residual: f64,
}

/// Eigenvalue surfaces over a rectangular pump grid. Cells that failed to
/// fit are `None`; a failure never aborts the rest of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub v_p: Vec<f64>,
    /// Pump detunings (rad/s).
    pub delta_p: Vec<f64>,
    /// Row-major over (v_p index, delta_p index).
    pub cells: Vec<Option<SurfaceCell>>,
}

impl SurfaceGrid {
    pub fn cell(&self, i_vp: usize, i_dp: usize) -> &Option<SurfaceCell> {
        &self.cells[i_vp * self.delta_p.len() + i_dp]
    }
}

/// Reconstruct the eigenvalue surfaces over a pump grid by sweeping and
/// fitting every cell (or evaluating the closed form in analytic mode).
pub fn build_surfaces(
    device: &Device,
    v_p_grid: &[f64],
    delta_p_grid: &[f64],
    n_points: usize,
    sweep_cfg: &SweepConfig,
    mode: SurfaceMode,
) -> Result<SurfaceGrid, SpectraError> {
    let mut cells = Vec::with_capacity(v_p_grid.len() * delta_p_grid.len());
    for &v_p in v_p_grid {
        for &delta_p in delta_p_grid {
            let cell = build_cell(device, v_p, delta_p, n_points, sweep_cfg, mode);
            cells.push(cell);
        }
    }
    Ok(SurfaceGrid { v_p: v_p_grid.to_vec(), delta_p: delta_p_grid.to_vec(), cells })
}

fn build_cell(
    device: &Device,
    v_p: f64,
    delta_p: f64,
    n_points: usize,
    sweep_cfg: &SweepConfig,
    mode: SurfaceMode,
) -> Option<SurfaceCell> {
    let h = device.hamiltonian(v_p, delta_p).ok()?;
    match mode {
        SurfaceMode::Analytic => Some(SurfaceCell { eigenvalues: h.eigenvalues(), residual: 0.0 }),
        SurfaceMode::Fitted => {
            let mut cfg = *sweep_cfg;
            if let Some(noise) = &mut cfg.noise {
                // Decorrelate cells while keeping the grid reproducible.
                noise.seed = noise.seed.wrapping_add(
                    (v_p.to_bits() ^ delta_p.to_bits().rotate_left(17)) & 0xffff_ffff,
                );
            }
            let grid = default_grid(&h, n_points);
            let points = sweep(&h, &grid, &cfg).ok()?;
            let result = fit_auto(&points).ok()?;
            result
                .converged
                .then_some(SurfaceCell { eigenvalues: result.eigenvalues, residual: result.residual })
        }
    }
}
