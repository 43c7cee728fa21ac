//! Software lock-in amplifier and adaptive phase-locked loop.
//!
//! The loop holds the relative phase `theta - phi` of the driven mode at a
//! constant setpoint `theta0` while the phase shift `phi(t)` walks the lock
//! target along a predefined program, so the oscillation frequency follows
//! the eigenfrequency surface of the time-varying system:
//!
//! 1. the plant envelope is advanced with the current drive frequency;
//! 2. the phase detector measures `theta - phi` after removing the constant
//!    circuit phase;
//! 3. a velocity-form PID nudges the drive frequency to zero the error
//!    against `theta0`.
//!
//! Errors are computed on the wrapped principal branch; `phi` itself arrives
//! unwrapped from the schedule so multi-turn programs stay unambiguous.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{build_hamiltonian, Device, ModelError, SheetLabel};
use crate::paths::{LoopSchedule, PathsError};
use crate::plant::{envelope_step, EnvelopeState, PlantError};
use crate::util::wrap_angle;

#[derive(Debug, Error)]
pub enum LockinError {
    #[error("signal lost: |A0| = {amplitude:.3e} fell below the floor {floor:.3e}")]
    LostSignal { amplitude: f64, floor: f64 },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Schedule(#[from] PathsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// PID gains mapping phase error (rad) to frequency correction (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidConfig {
    /// Proportional gain ((rad/s)/rad).
    pub kp: f64,
    /// Integral gain ((rad/s)/(rad s)).
    pub ki: f64,
    /// Derivative gain ((rad/s)/(rad/s)).
    pub kd: f64,
    /// Bound on the accumulated integral correction ki * integrator (rad/s).
    pub integrator_clamp: f64,
    /// Control tick (s).
    pub sample_interval: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        let tau = std::f64::consts::TAU;
        PidConfig {
            kp: tau * 0.5,
            ki: tau * 2.0,
            kd: 0.0,
            integrator_clamp: tau * 5.0,
            sample_interval: 1e-3,
        }
    }
}

/// Running state of the phase-locked loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllState {
    /// Current drive frequency (rad/s).
    pub omega_d: f64,
    /// Accumulated error (rad s), clamped so ki*integrator stays within the
    /// configured bound.
    pub integrator: f64,
    /// Lock setpoint for the relative phase (rad).
    pub theta0: f64,
    /// Constant circuit phase removed by the detector (rad).
    pub compensation: f64,
    prev_error: f64,
    prev_delta: f64,
    primed: bool,
}

impl PllState {
    pub fn new(omega_d: f64, theta0: f64, compensation: f64) -> Self {
        PllState {
            omega_d,
            integrator: 0.0,
            theta0,
            compensation,
            prev_error: 0.0,
            prev_delta: 0.0,
            primed: false,
        }
    }
}

/// Homodyne phase detection: recover the response phase from the measured
/// complex envelope (in the `A0 = A e^{-i theta}` convention), remove the
/// circuit-phase compensation, and return the relative phase `theta - phi`
/// wrapped to (-pi, pi].
pub fn phase_detect(
    envelope: Complex64,
    phi: f64,
    compensation: f64,
    floor: f64,
) -> Result<f64, LockinError> {
    let amplitude = envelope.norm();
    if !(amplitude > floor) {
        return Err(LockinError::LostSignal { amplitude, floor });
    }
    let theta = -envelope.arg() - compensation;
    Ok(wrap_angle(theta - phi))
}

/// One velocity-form PID update:
/// `omega_d += kp*de + ki*e*dt + kd*d(de)/dt` on the wrapped error
/// `e = wrap(rel_phase - theta0)`, with the integral contribution clamped.
pub fn pid_step(state: &mut PllState, rel_phase: f64, cfg: &PidConfig) {
    let dt = cfg.sample_interval;
    let e = wrap_angle(rel_phase - state.theta0);
    let (de, d2e) = if state.primed {
        let de = wrap_angle(e - state.prev_error);
        (de, de - state.prev_delta)
    } else {
        state.primed = true;
        (0.0, 0.0)
    };
    let limit = if cfg.ki > 0.0 { cfg.integrator_clamp / cfg.ki } else { f64::INFINITY };
    let integrated = (state.integrator + e * dt).clamp(-limit, limit);
    state.omega_d += cfg.kp * de + cfg.ki * (integrated - state.integrator) + cfg.kd * d2e / dt;
    state.integrator = integrated;
    state.prev_error = e;
    state.prev_delta = de;
}

/// One logged sample of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    /// Time (s).
    pub t: f64,
    /// Drive frequency (rad/s).
    pub omega_d: f64,
    /// Tracked response phase theta0-relative, continued through phi (rad).
    pub theta: f64,
    /// Relative phase theta - phi on the principal branch (rad).
    pub rel_phase: f64,
    /// Pump amplitude (V).
    pub v_p: f64,
    /// Pump detuning (rad/s).
    pub delta_p: f64,
    /// Commanded sheet at this instant.
    pub sheet: SheetLabel,
    /// Envelope magnitude |A0|.
    pub amplitude: f64,
}

/// Seeded white force noise added to the drive amplitude each control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceNoise {
    /// Per-tick standard deviation, in units of the drive amplitude f.
    pub std: f64,
    pub seed: u64,
}

/// Configuration of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub pid: PidConfig,
    /// Drive amplitude f (rad/s-scaled displacement units).
    pub drive_f: f64,
    /// Envelope integrator step (s); the control tick is split into an
    /// integer number of such steps.
    pub envelope_dt: f64,
    /// Logging cadence (s).
    pub record_interval: f64,
    /// Constant phase the measurement chain adds to the response phase (rad).
    pub circuit_phase: f64,
    /// Compensation constant removed by the phase detector (rad).
    pub compensation: f64,
    /// Lock-loss floor on |A0|; when absent, defaults to
    /// 1e-6 * f / gamma2.
    pub lost_signal_floor: Option<f64>,
    /// Pre-lock settling time before the schedule clock starts (s); when
    /// absent, defaults to 10 periods of the slower damping rate,
    /// 10 * 2*pi / min(gamma).
    pub settle_time: Option<f64>,
    pub noise: Option<ForceNoise>,
}

impl Default for LoopConfig {
    fn default() -> Self {
        let deg65 = -65.0_f64.to_radians();
        LoopConfig {
            pid: PidConfig::default(),
            drive_f: 1.0,
            envelope_dt: 1e-3,
            record_interval: 0.01,
            circuit_phase: deg65,
            compensation: deg65,
            lost_signal_floor: None,
            settle_time: None,
            noise: None,
        }
    }
}

struct LoopEngine<'a> {
    device: &'a Device,
    schedule: &'a LoopSchedule,
    cfg: &'a LoopConfig,
    pll: PllState,
    plant: EnvelopeState,
    floor: f64,
    noise: Option<(ChaCha8Rng, f64)>,
}

impl LoopEngine<'_> {
    /// Advance the plant over one control tick at fixed omega_d, then run
    /// the detector and the PID. Returns (theta_hat, rel_phase, |A0|).
    fn tick(&mut self, t_start: f64, t_end: f64) -> Result<(f64, f64, f64), LockinError> {
        let dt_ctrl = t_end - t_start;
        let substeps = (dt_ctrl / self.cfg.envelope_dt).round().max(1.0) as usize;
        let dt = dt_ctrl / substeps as f64;
        let device = self.device;
        let schedule = self.schedule;
        let clamp_end = schedule.path.end_time();
        let h_of = |tau: f64| {
            let (v_p, delta_p, _) = schedule
                .interpolate(tau.min(clamp_end))
                .expect("tick stays inside the schedule span");
            let pump = crate::model::PumpSettings {
                v_p,
                delta_p,
                v_0: device.v_0,
                kappa: device.kappa,
            };
            build_hamiltonian(&device.modes, &pump)
        };
        let f = match &mut self.noise {
            Some((rng, std)) => {
                // Box-Muller white force noise on the drive amplitude.
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                self.cfg.drive_f * (1.0 + *std * (-2.0 * u1.ln()).sqrt() * u2.cos())
            }
            None => self.cfg.drive_f,
        };
        let omega_d = self.pll.omega_d;
        let mut state = EnvelopeState { t: t_start, ..self.plant };
        for _ in 0..substeps {
            state = envelope_step(&state, h_of, |_| omega_d, f, dt)?;
        }
        self.plant = state;

        let (_, _, phi) = schedule.interpolate(t_end.min(clamp_end))?;
        let measured = self.plant.a0 * Complex64::from_polar(1.0, -self.cfg.circuit_phase);
        let rel = phase_detect(measured, phi, self.cfg.compensation, self.floor)?;
        pid_step(&mut self.pll, rel, &self.cfg.pid);
        let theta = rel + phi;
        Ok((theta, rel, self.plant.a0.norm()))
    }
}

/// Run the adaptive PLL over a schedule.
///
/// The plant starts at the steady state of the schedule's starting point on
/// the starting sheet, settles under lock at frozen parameters before the
/// schedule clock starts, then traverses the program while everything is
/// logged every `record_interval`. The final record's drive frequency is the
/// loop outcome.
pub fn run_closed_loop(
    device: &Device,
    schedule: &LoopSchedule,
    cfg: &LoopConfig,
) -> Result<Vec<TrajectoryRecord>, LockinError> {
    let t0 = schedule.path.start_time();
    let (v0, d0, _) = schedule.interpolate(t0)?;
    let h0 = device.hamiltonian(v0, d0)?;
    let eig0 = h0.eigenvalues();
    let omega_start = match schedule.start_sheet {
        SheetLabel::High => eig0.lambda_plus.re,
        SheetLabel::Low => eig0.lambda_minus.re,
    };
    let (a0, b1) = h0.steady_state(omega_start, cfg.drive_f);
    let floor = cfg
        .lost_signal_floor
        .unwrap_or(1e-6 * cfg.drive_f / device.modes.gamma2);

    let mut engine = LoopEngine {
        device,
        schedule,
        cfg,
        pll: PllState::new(omega_start, schedule.theta0, cfg.compensation),
        plant: EnvelopeState { a0, b1, t: t0 },
        floor,
        noise: cfg.noise.map(|n| (ChaCha8Rng::seed_from_u64(n.seed), n.std)),
    };

    // Pre-lock settling at frozen starting parameters: run the loop against
    // t = t0 so phi and the pump controls stay put.
    let min_gamma = device.modes.gamma1.min(device.modes.gamma2);
    let settle = cfg.settle_time.unwrap_or(10.0 * std::f64::consts::TAU / min_gamma);
    let dt_ctrl = cfg.pid.sample_interval;
    for _ in 0..(settle / dt_ctrl).round() as usize {
        engine.plant.t = t0;
        engine.tick(t0, t0 + dt_ctrl)?;
    }
    engine.plant.t = t0;

    let duration = schedule.duration();
    let n_ticks = (duration / dt_ctrl).ceil() as usize;
    let record_every = (cfg.record_interval / dt_ctrl).round().max(1.0) as usize;
    let mut records = Vec::with_capacity(n_ticks / record_every + 2);

    // Initial record at t0.
    let measured0 = engine.plant.a0 * Complex64::from_polar(1.0, -cfg.circuit_phase);
    let rel0 = phase_detect(measured0, 0.0, cfg.compensation, floor)?;
    records.push(TrajectoryRecord {
        t: t0,
        omega_d: engine.pll.omega_d,
        theta: rel0,
        rel_phase: rel0,
        v_p: v0,
        delta_p: d0,
        sheet: schedule.start_sheet,
        amplitude: engine.plant.a0.norm(),
    });

    for k in 1..=n_ticks {
        let t_prev = t0 + dt_ctrl * (k - 1) as f64;
        let t_now = (t0 + dt_ctrl * k as f64).min(t0 + duration);
        if t_now <= t_prev {
            break;
        }
        let (theta, rel, amplitude) = engine.tick(t_prev, t_now)?;
        if k % record_every == 0 || k == n_ticks {
            let (v_p, delta_p, _) = schedule.interpolate(t_now)?;
            records.push(TrajectoryRecord {
                t: t_now,
                omega_d: engine.pll.omega_d,
                theta,
                rel_phase: rel,
                v_p,
                delta_p,
                sheet: schedule.label_at_time(t_now),
                amplitude,
            });
        }
    }
    Ok(records)
}

/// Centered moving average of the drive frequency over a time window,
/// matching the post-processing applied to measured traces.
pub fn smoothed_omega(records: &[TrajectoryRecord], window: f64) -> Vec<f64> {
    let omegas: Vec<f64> = records.iter().map(|r| r.omega_d).collect();
    if records.len() < 2 || window <= 0.0 {
        return omegas;
    }
    let dt = (records[records.len() - 1].t - records[0].t) / (records.len() - 1) as f64;
    let half = ((0.5 * window / dt).round() as usize).min(records.len());
    crate::util::moving_average(&omegas, half)
}
