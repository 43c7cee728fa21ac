//! Parametric loop construction and phase-shift scheduling.
//!
//! A closed-loop run is programmed by a [`LoopSchedule`]: a parameter path
//! `(t, v_p, delta_p)` sampled at pinpoints (2,001 by default), the
//! phase-shift program `phi(t) = theta{Re lambda(t)} - theta{Re lambda(0)}`
//! evaluated on the continuity-tracked eigenvalue branch, and the indices
//! where the tracked branch crossed the branch cut (or was deliberately
//! switched to the other sheet).
//!
//! `phi` is stored unwrapped so multi-radian programs are unambiguous; it is
//! continuous everywhere except at deliberate sheet switches, where it jumps
//! and interpolation steps instead of blending.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{build_hamiltonian, sheet_track, Device, ModelError, PumpSettings, SheetLabel};
use crate::util::wrap_angle;

/// Default number of phase pinpoints per schedule.
pub const DEFAULT_PINPOINTS: usize = 2001;

#[derive(Debug, Error)]
pub enum PathsError {
    #[error("invalid path geometry: {0}")]
    InvalidGeometry(String),
    #[error("time {t} outside the schedule span [0, {span}]")]
    OutOfRange { t: f64, span: f64 },
    #[error("sheet switch at t = {0} lies outside the path span")]
    SwitchOutsideSpan(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One parameter sample of a loop program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    /// Time (s).
    pub t: f64,
    /// Pump amplitude (V).
    pub v_p: f64,
    /// Pump detuning (rad/s).
    pub delta_p: f64,
}

/// Time-ordered pump-control path, linearly interpolated between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPath {
    pub samples: Vec<PathSample>,
    /// Whether the endpoint parameters return to the start.
    pub closed: bool,
}

impl ParamPath {
    pub fn new(samples: Vec<PathSample>) -> Result<Self, PathsError> {
        if samples.len() < 2 {
            return Err(PathsError::InvalidGeometry("path needs at least 2 samples".into()));
        }
        for pair in samples.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(PathsError::InvalidGeometry(format!(
                    "times must be strictly increasing, got {} then {}",
                    pair[0].t, pair[1].t
                )));
            }
        }
        if samples.iter().any(|s| s.v_p < 0.0) {
            return Err(PathsError::InvalidGeometry("v_p must stay non-negative".into()));
        }
        let first = samples[0];
        let last = samples[samples.len() - 1];
        let closed =
            (first.v_p - last.v_p).abs() <= 1e-12 && (first.delta_p - last.delta_p).abs() <= 1e-12;
        Ok(ParamPath { samples, closed })
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Index of the segment containing `t`, i.e. the largest `i` with
    /// `samples[i].t <= t` (capped at the second-to-last sample).
    fn segment(&self, t: f64) -> Result<usize, PathsError> {
        let eps = 1e-9 * self.duration().max(1.0);
        if t < self.start_time() - eps || t > self.end_time() + eps {
            return Err(PathsError::OutOfRange { t, span: self.end_time() });
        }
        let i = self.samples.partition_point(|s| s.t <= t);
        Ok(i.clamp(1, self.samples.len() - 1) - 1)
    }

    /// Linear interpolation of the pump controls at time `t`.
    pub fn interpolate(&self, t: f64) -> Result<(f64, f64), PathsError> {
        let i = self.segment(t)?;
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        Ok((a.v_p + (b.v_p - a.v_p) * s, a.delta_p + (b.delta_p - a.delta_p) * s))
    }

    /// Resample the path at `n` uniformly spaced times over its span.
    pub fn resample(&self, n: usize) -> Result<ParamPath, PathsError> {
        if n < 2 {
            return Err(PathsError::InvalidGeometry("resample needs n >= 2".into()));
        }
        let t0 = self.start_time();
        let dt = self.duration() / (n - 1) as f64;
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let t = if k + 1 == n { self.end_time() } else { t0 + dt * k as f64 };
            let (v_p, delta_p) = self.interpolate(t)?;
            samples.push(PathSample { t, v_p, delta_p });
        }
        ParamPath::new(samples)
    }
}

/// Traversal direction of a loop. `Cw` is the corner order as given (the
/// paper-style convention for the rectangle) and `Ccw` its exact reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Cw,
    Ccw,
}

/// Closed rectangular loop through four `(v_p, delta_p)` corners, traversed
/// edge by edge with linear parameter ramps and sampled uniformly in time.
pub fn rectangular_loop(
    corners: &[(f64, f64); 4],
    edge_durations: &[f64; 4],
    direction: Direction,
    n_samples: usize,
) -> Result<ParamPath, PathsError> {
    if edge_durations.iter().any(|&d| d <= 0.0) {
        return Err(PathsError::InvalidGeometry("edge durations must be positive".into()));
    }
    let mut corner_seq: Vec<(f64, f64)> = corners.to_vec();
    corner_seq.push(corners[0]);
    let mut durations = edge_durations.to_vec();
    if direction == Direction::Ccw {
        corner_seq.reverse();
        durations.reverse();
    }
    let mut knot_times = vec![0.0];
    for d in &durations {
        knot_times.push(knot_times.last().unwrap() + d);
    }
    let total: f64 = knot_times[knot_times.len() - 1];
    let n = n_samples.max(2);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = if k + 1 == n { total } else { total * k as f64 / (n - 1) as f64 };
        // Locate the active edge.
        let mut edge = knot_times.partition_point(|&kt| kt <= t);
        edge = edge.clamp(1, 4) - 1;
        let s = (t - knot_times[edge]) / durations[edge];
        let (a, b) = (corner_seq[edge], corner_seq[edge + 1]);
        samples.push(PathSample {
            t,
            v_p: a.0 + (b.0 - a.0) * s,
            delta_p: a.1 + (b.1 - a.1) * s,
        });
    }
    ParamPath::new(samples)
}

/// Closed circular (cosinusoidal) loop: starting at
/// `(center.0 + radii.0, center.1)`, `v_p` varies as a cosine and `delta_p`
/// as a sine of one full period. `Cw` follows the positive-sine convention;
/// `Ccw` is its time reverse.
pub fn circular_loop(
    center: (f64, f64),
    radii: (f64, f64),
    period: f64,
    direction: Direction,
    n_samples: usize,
) -> Result<ParamPath, PathsError> {
    if period <= 0.0 {
        return Err(PathsError::InvalidGeometry("period must be positive".into()));
    }
    if center.0 - radii.0 <= 0.0 {
        return Err(PathsError::InvalidGeometry(
            "v_p radius reaches zero pump amplitude".into(),
        ));
    }
    let sign = match direction {
        Direction::Cw => 1.0,
        Direction::Ccw => -1.0,
    };
    let n = n_samples.max(2);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = if k + 1 == n { period } else { period * k as f64 / (n - 1) as f64 };
        let phase = std::f64::consts::TAU * t / period;
        samples.push(PathSample {
            t,
            v_p: center.0 + radii.0 * phase.cos(),
            delta_p: center.1 + sign * radii.1 * phase.sin(),
        });
    }
    ParamPath::new(samples)
}

/// Why the tracked sheet assignment changed at a pinpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchKind {
    /// The path crossed the branch cut; the followed eigenvalue is
    /// continuous there and so is `phi`.
    BranchCut,
    /// The phase target was deliberately reassigned to the other sheet;
    /// `phi` jumps there.
    Deliberate,
}

/// A pinpoint index at which the sheet assignment changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchPoint {
    pub index: usize,
    pub kind: SwitchKind,
}

/// A deliberate sheet switch request for [`transition_schedule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetSwitch {
    /// Time (s) at which to reassign the tracked sheet.
    pub t: f64,
    pub target: SheetLabel,
}

/// A fully resolved encircling program: parameter pinpoints, the phase-shift
/// series, and the sheet bookkeeping needed to interpret the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSchedule {
    pub path: ParamPath,
    /// Unwrapped phase shifts aligned with `path.samples`; `phi[0] = 0`.
    pub phi: Vec<f64>,
    pub start_sheet: SheetLabel,
    pub switches: Vec<SwitchPoint>,
    /// Lock setpoint: response phase of the start sheet at t = 0 (rad).
    pub theta0: f64,
}

impl LoopSchedule {
    pub fn duration(&self) -> f64 {
        self.path.duration()
    }

    /// Instantaneous sheet label of the tracked branch at pinpoint `k`.
    /// Both branch-cut crossings and deliberate switches flip it.
    pub fn label_at(&self, k: usize) -> SheetLabel {
        let flips = self.switches.iter().filter(|s| s.index <= k).count();
        if flips % 2 == 0 {
            self.start_sheet
        } else {
            self.start_sheet.opposite()
        }
    }

    /// Sheet label at time `t` (label of the last pinpoint at or before `t`).
    pub fn label_at_time(&self, t: f64) -> SheetLabel {
        let i = self.path.samples.partition_point(|s| s.t <= t);
        self.label_at(i.saturating_sub(1).min(self.path.samples.len() - 1))
    }

    /// Interpolated `(v_p, delta_p, phi)` at time `t`. Parameters are always
    /// linear; `phi` steps (holds the previous pinpoint) across deliberate
    /// switch indices instead of blending the jump.
    pub fn interpolate(&self, t: f64) -> Result<(f64, f64, f64), PathsError> {
        let (v_p, delta_p) = self.path.interpolate(t)?;
        let samples = &self.path.samples;
        let i = samples.partition_point(|s| s.t <= t).clamp(1, samples.len() - 1) - 1;
        let (a, b) = (samples[i], samples[i + 1]);
        let deliberate = self
            .switches
            .iter()
            .any(|s| s.index == i + 1 && s.kind == SwitchKind::Deliberate);
        let phi = if deliberate {
            if t >= b.t {
                self.phi[i + 1]
            } else {
                self.phi[i]
            }
        } else {
            let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
            self.phi[i] + (self.phi[i + 1] - self.phi[i]) * s
        };
        Ok((v_p, delta_p, phi))
    }
}

enum Track {
    Plus,
    Minus,
}

fn build_schedule(
    device: &Device,
    path: &ParamPath,
    start_sheet: SheetLabel,
    deliberate: &[SheetSwitch],
    n_pinpoints: usize,
) -> Result<LoopSchedule, PathsError> {
    let resampled = path.resample(n_pinpoints.max(2))?;
    let pumps: Vec<PumpSettings> = resampled
        .samples
        .iter()
        .map(|s| device.pump(s.v_p, s.delta_p))
        .collect::<Result<_, _>>()?;
    let tracked = sheet_track(&device.modes, &pumps)?;

    let span = (resampled.start_time(), resampled.end_time());
    for sw in deliberate {
        if sw.t < span.0 || sw.t > span.1 {
            return Err(PathsError::SwitchOutsideSpan(sw.t));
        }
    }
    let mut pending: Vec<&SheetSwitch> = deliberate.iter().collect();
    pending.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut pending = pending.into_iter().peekable();

    // At pinpoint 0 the plus track is the High sheet by construction.
    let mut current = match start_sheet {
        SheetLabel::High => Track::Plus,
        SheetLabel::Low => Track::Minus,
    };
    let mut cut_iter = tracked.cut_crossings.iter().peekable();

    let n = resampled.samples.len();
    let mut phi = Vec::with_capacity(n);
    let mut switches = Vec::new();
    let mut theta0 = 0.0;
    let mut prev_theta = 0.0;
    for k in 0..n {
        if cut_iter.peek() == Some(&&k) {
            cut_iter.next();
            switches.push(SwitchPoint { index: k, kind: SwitchKind::BranchCut });
        }
        while pending.peek().is_some_and(|sw| sw.t <= resampled.samples[k].t) {
            let sw = pending.next().unwrap();
            let plus_label = tracked.plus_track_label(k);
            let desired = if plus_label == sw.target { Track::Plus } else { Track::Minus };
            if !matches!(
                (&current, &desired),
                (Track::Plus, Track::Plus) | (Track::Minus, Track::Minus)
            ) {
                current = desired;
                switches.push(SwitchPoint { index: k, kind: SwitchKind::Deliberate });
            }
        }
        let eig = tracked.points[k].eigenvalues;
        let lambda = match current {
            Track::Plus => eig.lambda_plus,
            Track::Minus => eig.lambda_minus,
        };
        let h = build_hamiltonian(&device.modes, &pumps[k]);
        let theta = h.response_phase(lambda.re);
        if k == 0 {
            theta0 = theta;
            phi.push(0.0);
        } else {
            let prev = *phi.last().unwrap();
            phi.push(prev + wrap_angle(theta - prev_theta));
        }
        prev_theta = theta;
    }
    switches.sort_by_key(|s| s.index);
    Ok(LoopSchedule { path: resampled, phi, start_sheet, switches, theta0 })
}

/// Phase-shift schedule for smooth tracking of one eigenvalue branch along
/// the path: `phi(t) = theta{Re lambda(t)} - theta{Re lambda(0)}` on the
/// continuity-tracked sheet, with the sign of the branch switched upon
/// crossing the branch cut.
pub fn schedule_phase_shifts(
    device: &Device,
    path: &ParamPath,
    start_sheet: SheetLabel,
    n_pinpoints: usize,
) -> Result<LoopSchedule, PathsError> {
    build_schedule(device, path, start_sheet, &[], n_pinpoints)
}

/// Like [`schedule_phase_shifts`], but with the tracked sheet deliberately
/// reassigned at each requested time; `phi` jumps discontinuously there.
pub fn transition_schedule(
    device: &Device,
    path: &ParamPath,
    start_sheet: SheetLabel,
    switches: &[SheetSwitch],
    n_pinpoints: usize,
) -> Result<LoopSchedule, PathsError> {
    build_schedule(device, path, start_sheet, switches, n_pinpoints)
}

/// The paper-style clockwise rectangle corners `(v_p in V, delta_p in rad/s)`
/// enclosing the EP from a PT-symmetric base point.
pub fn demo_rectangle() -> [(f64, f64); 4] {
    let tau = std::f64::consts::TAU;
    [(0.5, tau * 0.3), (0.1, tau * 0.3), (0.1, -tau * 0.3), (0.5, -tau * 0.3)]
}

/// Same rectangle started from the PT-broken corner.
pub fn demo_rectangle_broken_start() -> [(f64, f64); 4] {
    let tau = std::f64::consts::TAU;
    [(0.1, tau * 0.3), (0.1, -tau * 0.3), (0.5, -tau * 0.3), (0.5, tau * 0.3)]
}
