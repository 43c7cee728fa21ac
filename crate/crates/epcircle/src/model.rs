//! Closed-form algebra of the two-mode non-Hermitian system.
//!
//! All frequencies and damping rates are angular (rad/s). In the Floquet
//! frame of the pump the system is governed by the effective Hamiltonian
//!
//! ```text
//! H = | Omega1 - i*gamma1/2          g           |
//!     |          g          Omega2 - i*gamma2/2  |
//! ```
//!
//! with dressed frequencies and coupling derived from the bare modes and the
//! pump controls:
//!
//! ```text
//! Omega1 = omega1 - kappa*Vp^2/(8*omega1)
//! Omega2 = omega1 - kappa*Vp^2/(8*omega2) - delta_p
//! g      = kappa*V0*Vp/(4*omega1)
//! ```
//!
//! The two complex eigenvalues trace a two-sheeted Riemann surface over the
//! controls `(Vp, delta_p)`; the sheets touch at the exceptional point where
//! the radicand of the closed form vanishes. This module provides the
//! eigenvalue/eigenvector closed forms, the driven-mode susceptibility and
//! steady states, EP location, and continuity-based tracking of the
//! eigenvalue branches along parameter paths.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Matching-margin ratio required for unambiguous branch tracking.
const MATCH_MARGIN: f64 = 1.5;
/// Newton tolerance on |radicand| at the EP, in (rad/s)^2.
const EP_RADICAND_TOL: f64 = 1e-12;
/// Newton iteration cap for the EP search.
const EP_MAX_ITERS: usize = 50;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid mode pair: {0}")]
    InvalidModes(String),
    #[error("invalid pump settings: {0}")]
    InvalidPump(String),
    #[error("eigenvectors coalesce at the exceptional point (|dlambda| = {split:.3e} rad/s)")]
    DegenerateAtEP { split: f64 },
    #[error("equal damping rates: no exceptional point exists at a finite pump")]
    EqualDampingRates,
    #[error("EP refinement did not converge within {0} Newton steps")]
    NoConvergence(usize),
    #[error("ambiguous eigenvalue matching at path index {index} (margin {margin:.3} <= {MATCH_MARGIN})")]
    AmbiguousMatching { index: usize, margin: f64 },
    #[error("parameter path needs at least 2 samples")]
    PathTooShort,
}

/// Bare (pump-off) frequencies and damping rates of the two modes.
///
/// Convention: mode 2 is the higher-frequency mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    /// Natural frequency of mode 1 (rad/s).
    pub omega1: f64,
    /// Natural frequency of mode 2 (rad/s).
    pub omega2: f64,
    /// Damping rate of mode 1 (rad/s).
    pub gamma1: f64,
    /// Damping rate of mode 2 (rad/s).
    pub gamma2: f64,
}

impl ModePair {
    pub fn new(omega1: f64, omega2: f64, gamma1: f64, gamma2: f64) -> Result<Self, ModelError> {
        if !(omega1 > 0.0 && omega2 > 0.0 && omega2 > omega1) {
            return Err(ModelError::InvalidModes(format!(
                "need 0 < omega1 < omega2, got omega1 = {omega1}, omega2 = {omega2}"
            )));
        }
        if !(gamma1 > 0.0 && gamma2 > 0.0) {
            return Err(ModelError::InvalidModes(format!(
                "damping rates must be positive, got gamma1 = {gamma1}, gamma2 = {gamma2}"
            )));
        }
        Ok(Self { omega1, omega2, gamma1, gamma2 })
    }

    /// Mode frequency mismatch omega2 - omega1 (rad/s).
    pub fn mismatch(&self) -> f64 {
        self.omega2 - self.omega1
    }
}

/// Pump drive plus the electrostatic constants that turn it into coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSettings {
    /// Pump amplitude (V).
    pub v_p: f64,
    /// Pump detuning omega_p - (omega2 - omega1) (rad/s).
    pub delta_p: f64,
    /// Static bias voltage (V).
    pub v_0: f64,
    /// Electrostatic tuning coefficient (N m^-1 kg^-1 V^-2).
    pub kappa: f64,
}

impl PumpSettings {
    pub fn new(v_p: f64, delta_p: f64, v_0: f64, kappa: f64) -> Result<Self, ModelError> {
        if !(v_p >= 0.0) {
            return Err(ModelError::InvalidPump(format!("v_p must be >= 0, got {v_p}")));
        }
        if !(v_0 > 0.0 && kappa > 0.0) {
            return Err(ModelError::InvalidPump(format!(
                "v_0 and kappa must be positive, got v_0 = {v_0}, kappa = {kappa}"
            )));
        }
        Ok(Self { v_p, delta_p, v_0, kappa })
    }
}

/// A resonator plus its electrostatic pump constants.
///
/// Bundles everything needed to map pump controls `(v_p, delta_p)` onto an
/// [`EffectiveHamiltonian`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub modes: ModePair,
    /// Static bias voltage (V).
    pub v_0: f64,
    /// Electrostatic tuning coefficient (N m^-1 kg^-1 V^-2).
    pub kappa: f64,
}

impl Default for Device {
    /// The 50.5 kHz MEMS disk resonator used throughout the examples and
    /// bundled configs: mode frequencies 50,468.68 / 51,007.86 Hz, damping
    /// rates 2*pi*0.676 / 2*pi*0.904 rad/s, kappa = 70,186, V0 = 40 V.
    fn default() -> Self {
        let tau = std::f64::consts::TAU;
        Device {
            modes: ModePair {
                omega1: tau * 50_468.68,
                omega2: tau * 51_007.86,
                gamma1: tau * 0.676,
                gamma2: tau * 0.904,
            },
            v_0: 40.0,
            kappa: 70_186.0,
        }
    }
}

impl Device {
    /// Pump settings for this device; errors if the derived pump frequency
    /// would be non-positive.
    pub fn pump(&self, v_p: f64, delta_p: f64) -> Result<PumpSettings, ModelError> {
        let pump = PumpSettings::new(v_p, delta_p, self.v_0, self.kappa)?;
        let omega_p = self.modes.mismatch() + delta_p;
        if omega_p <= 0.0 {
            return Err(ModelError::InvalidPump(format!(
                "derived pump frequency {omega_p} rad/s is not positive"
            )));
        }
        Ok(pump)
    }

    pub fn hamiltonian(&self, v_p: f64, delta_p: f64) -> Result<EffectiveHamiltonian, ModelError> {
        Ok(build_hamiltonian(&self.modes, &self.pump(v_p, delta_p)?))
    }

    /// Same device with every rate scaled so that mode 1 sits at
    /// `omega1_target`. Frequencies and damping rates scale linearly and
    /// kappa quadratically, which leaves the dimensionless dynamics (and the
    /// coupling per volt relative to the damping rates) unchanged.
    pub fn frequency_scaled(&self, omega1_target: f64) -> Device {
        let s = omega1_target / self.modes.omega1;
        Device {
            modes: ModePair {
                omega1: self.modes.omega1 * s,
                omega2: self.modes.omega2 * s,
                gamma1: self.modes.gamma1 * s,
                gamma2: self.modes.gamma2 * s,
            },
            v_0: self.v_0,
            kappa: self.kappa * s * s,
        }
    }
}

/// The 2x2 non-Hermitian dynamical matrix in the Floquet frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHamiltonian {
    /// Dressed frequency of mode 1 (rad/s).
    pub omega1: f64,
    /// Dressed, pump-shifted frequency of mode 2 in the Floquet frame (rad/s).
    pub omega2: f64,
    /// Coupling rate (rad/s), g >= 0.
    pub g: f64,
    /// Damping rate of mode 1 (rad/s).
    pub gamma1: f64,
    /// Damping rate of mode 2 (rad/s).
    pub gamma2: f64,
}

/// Dressed frequencies and coupling for the given modes and pump.
pub fn build_hamiltonian(modes: &ModePair, pump: &PumpSettings) -> EffectiveHamiltonian {
    let shift = pump.kappa * pump.v_p * pump.v_p / 8.0;
    EffectiveHamiltonian {
        omega1: modes.omega1 - shift / modes.omega1,
        omega2: modes.omega1 - shift / modes.omega2 - pump.delta_p,
        g: pump.kappa * pump.v_0 * pump.v_p / (4.0 * modes.omega1),
        gamma1: modes.gamma1,
        gamma2: modes.gamma2,
    }
}

/// The two complex eigenvalues, ordered by real part (ties by imaginary
/// part, descending).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
}

impl EigenPair {
    /// Order a root set by the crate convention: Re(lambda_plus) >=
    /// Re(lambda_minus), ties broken by Im(lambda_plus) >= Im(lambda_minus).
    pub fn ordered(a: Complex64, b: Complex64) -> Self {
        if a.re > b.re || (a.re == b.re && a.im >= b.im) {
            EigenPair { lambda_plus: a, lambda_minus: b }
        } else {
            EigenPair { lambda_plus: b, lambda_minus: a }
        }
    }

    pub fn split(&self) -> Complex64 {
        self.lambda_plus - self.lambda_minus
    }
}

/// Which sheet of the eigenfrequency Riemann surface a state sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SheetLabel {
    /// Larger Re(lambda) at the labeling instant.
    High,
    /// Smaller Re(lambda) at the labeling instant.
    Low,
}

impl SheetLabel {
    pub fn opposite(self) -> SheetLabel {
        match self {
            SheetLabel::High => SheetLabel::Low,
            SheetLabel::Low => SheetLabel::High,
        }
    }
}

impl std::fmt::Display for SheetLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SheetLabel::High => write!(f, "high"),
            SheetLabel::Low => write!(f, "low"),
        }
    }
}

impl std::str::FromStr for SheetLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "high" => Ok(SheetLabel::High),
            "low" => Ok(SheetLabel::Low),
            other => Err(format!("unknown sheet label {other:?} (expected \"high\" or \"low\")")),
        }
    }
}

impl EffectiveHamiltonian {
    /// Detuning Omega2 - Omega1 (rad/s).
    pub fn detuning(&self) -> f64 {
        self.omega2 - self.omega1
    }

    /// Diagonal entries as complex numbers.
    fn diagonal(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.omega1, -0.5 * self.gamma1),
            Complex64::new(self.omega2, -0.5 * self.gamma2),
        )
    }

    /// The matrix [[d1, g], [g, d2]].
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let (d1, d2) = self.diagonal();
        let g = Complex64::new(self.g, 0.0);
        [[d1, g], [g, d2]]
    }

    pub fn trace(&self) -> Complex64 {
        let (d1, d2) = self.diagonal();
        d1 + d2
    }

    pub fn determinant(&self) -> Complex64 {
        let (d1, d2) = self.diagonal();
        d1 * d2 - self.g * self.g
    }

    /// The radicand under the eigenvalue square root:
    /// ((Omega2-Omega1)/2 - i(gamma2-gamma1)/4)^2 + g^2.
    /// It vanishes exactly at the exceptional point.
    pub fn branch_radicand(&self) -> Complex64 {
        let u = Complex64::new(0.5 * self.detuning(), -0.25 * (self.gamma2 - self.gamma1));
        u * u + Complex64::new(self.g * self.g, 0.0)
    }

    /// Eigenvalues on the principal square-root branch, before any ordering:
    /// (center + sqrt(radicand), center - sqrt(radicand)).
    ///
    /// The principal root has Re >= 0, so the first element always has the
    /// larger (or tied-larger) real part; the branch assignment is only
    /// meaningful relative to a continuous path, see [`sheet_track`].
    pub fn eigenvalue_branches(&self) -> (Complex64, Complex64) {
        let center = Complex64::new(
            0.5 * (self.omega1 + self.omega2),
            -0.25 * (self.gamma1 + self.gamma2),
        );
        let root = self.branch_radicand().sqrt();
        (center + root, center - root)
    }

    /// Closed-form eigenvalues, ordered per the [`EigenPair`] convention.
    pub fn eigenvalues(&self) -> EigenPair {
        let (p, m) = self.eigenvalue_branches();
        EigenPair::ordered(p, m)
    }

    /// Steady-state response of the driven mode per unit drive:
    /// chi1 = (Omega2 - omega_d - i*gamma2/2) / ((omega_d - l+)(omega_d - l-)).
    pub fn susceptibility(&self, omega_d: f64) -> Complex64 {
        let eig = self.eigenvalues();
        let (_, d2) = self.diagonal();
        (d2 - omega_d) / ((omega_d - eig.lambda_plus) * (omega_d - eig.lambda_minus))
    }

    /// Response phase theta = -Arg(chi1), principal value in (-pi, pi].
    pub fn response_phase(&self, omega_d: f64) -> f64 {
        crate::util::wrap_angle(-self.susceptibility(omega_d).arg())
    }

    /// Steady-state complex amplitudes (A0, B1) under drive amplitude `f`
    /// (rad/s-scaled) at drive frequency `omega_d`.
    pub fn steady_state(&self, omega_d: f64, f: f64) -> (Complex64, Complex64) {
        let eig = self.eigenvalues();
        let (_, d2) = self.diagonal();
        let denom = (omega_d - eig.lambda_plus) * (omega_d - eig.lambda_minus);
        ((d2 - omega_d) * f / denom, -self.g * f / denom)
    }

    /// Unnormalized two-component state occupied by a phase-tracked
    /// oscillation at drive frequency `omega_d`: the steady state per unit
    /// drive, so the first component is exactly the susceptibility.
    pub fn hybrid_state(&self, omega_d: f64) -> [Complex64; 2] {
        let (a0, b1) = self.steady_state(omega_d, 1.0);
        [a0, b1]
    }

    /// Unit-norm eigenvectors of both eigenvalues, gauge-fixed so the
    /// largest-magnitude component is real positive. Errors when the
    /// eigenvalues (and hence the eigenvectors) coalesce.
    pub fn eigenvectors(&self) -> Result<(EigenVector, EigenVector), ModelError> {
        let eig = self.eigenvalues();
        let split = eig.split().norm();
        if split < 1e-9 * (self.gamma1 + self.gamma2) {
            return Err(ModelError::DegenerateAtEP { split });
        }
        Ok((self.eigenvector_for(eig.lambda_plus), self.eigenvector_for(eig.lambda_minus)))
    }

    fn eigenvector_for(&self, lambda: Complex64) -> EigenVector {
        let (d1, d2) = self.diagonal();
        let g = Complex64::new(self.g, 0.0);
        // Two algebraically equivalent column forms; pick the better
        // conditioned one (the first degenerates when g = 0 and lambda is
        // the mode-2 eigenvalue).
        let a = [lambda - d2, g];
        let b = [g, lambda - d1];
        let na = a[0].norm_sqr() + a[1].norm_sqr();
        let nb = b[0].norm_sqr() + b[1].norm_sqr();
        let v = if na >= nb { a } else { b };
        EigenVector::gauge_fixed(lambda, v)
    }
}

/// A normalized eigenvector with its eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenVector {
    pub lambda: Complex64,
    pub components: [Complex64; 2],
}

impl EigenVector {
    fn gauge_fixed(lambda: Complex64, v: [Complex64; 2]) -> Self {
        let (major, minor) = if v[0].norm() >= v[1].norm() { (0, 1) } else { (1, 0) };
        let phase = Complex64::from_polar(1.0, -v[major].arg());
        let mut w = [v[0] * phase, v[1] * phase];
        let norm = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
        w[major] /= norm;
        w[minor] /= norm;
        EigenVector { lambda, components: w }
    }

    /// Hermitian inner product <self|other>.
    pub fn overlap(&self, other: &EigenVector) -> Complex64 {
        self.components[0].conj() * other.components[0]
            + self.components[1].conj() * other.components[1]
    }
}

/// Location of the exceptional point in pump controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpLocation {
    /// Pump amplitude at the branch point (V).
    pub v_p: f64,
    /// Pump detuning at the branch point (rad/s).
    pub delta_p: f64,
}

/// Locate the exceptional point of a device: the pump amplitude/detuning
/// where the eigenvalue radicand vanishes.
///
/// Starts from the analytic seed `v_p = |gamma2 - gamma1| * omega1 /
/// (kappa * v_0)` with `delta_p` chosen to cancel the detuning, then runs a
/// 2-D Newton iteration on the complex radicand until |radicand| < 1e-12
/// (rad/s)^2.
pub fn locate_ep(device: &Device) -> Result<EpLocation, ModelError> {
    let m = &device.modes;
    let dgamma = m.gamma2 - m.gamma1;
    if dgamma == 0.0 {
        return Err(ModelError::EqualDampingRates);
    }
    // d(Omega2 - Omega1)/d(v_p^2) per volt^2.
    let curv = device.kappa / 8.0 * (1.0 / m.omega1 - 1.0 / m.omega2);
    let mut v = dgamma.abs() * m.omega1 / (device.kappa * device.v_0);
    let mut d = curv * v * v;

    for _ in 0..EP_MAX_ITERS {
        let h = build_hamiltonian(m, &PumpSettings { v_p: v, delta_p: d, v_0: device.v_0, kappa: device.kappa });
        let r = h.branch_radicand();
        if r.norm() < EP_RADICAND_TOL {
            return Ok(EpLocation { v_p: v, delta_p: d });
        }
        let u = Complex64::new(0.5 * h.detuning(), -0.25 * dgamma);
        // dr/dv = 2u du/dv + 2g dg/dv, dr/dd = -u.
        let dr_dv = 2.0 * u * (curv * v) + Complex64::new(2.0 * h.g * device.kappa * device.v_0 / (4.0 * m.omega1), 0.0);
        let dr_dd = -u;
        let det = dr_dv.re * dr_dd.im - dr_dd.re * dr_dv.im;
        if det.abs() < f64::MIN_POSITIVE {
            return Err(ModelError::NoConvergence(EP_MAX_ITERS));
        }
        v -= (r.re * dr_dd.im - dr_dd.re * r.im) / det;
        d -= (dr_dv.re * r.im - r.re * dr_dv.im) / det;
    }
    Err(ModelError::NoConvergence(EP_MAX_ITERS))
}

/// One sample of a tracked eigenvalue path.
///
/// Unlike a freshly ordered [`EigenPair`], the pair here is
/// continuity-ordered: `lambda_plus` continues the branch that was the
/// conventional lambda_plus at sample 0 and may end up with the smaller real
/// part after crossing the branch cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedPoint {
    pub pump: PumpSettings,
    pub eigenvalues: EigenPair,
}

/// Eigenvalue branches followed continuously along a parameter path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedPath {
    pub points: Vec<TrackedPoint>,
    /// Indices where the matched assignment to the closed form's +/- roots
    /// flipped, i.e. where the path crossed the branch cut of the principal
    /// square root.
    pub cut_crossings: Vec<usize>,
}

impl TrackedPath {
    /// Instantaneous sheet label of the continuity-tracked plus branch at
    /// sample `k` (larger Re wins, ties go to larger Im).
    pub fn plus_track_label(&self, k: usize) -> SheetLabel {
        let e = &self.points[k].eigenvalues;
        let plus_high = e.lambda_plus.re > e.lambda_minus.re
            || (e.lambda_plus.re == e.lambda_minus.re && e.lambda_plus.im >= e.lambda_minus.im);
        if plus_high {
            SheetLabel::High
        } else {
            SheetLabel::Low
        }
    }

    /// Eigenvalue sitting on the given instantaneous sheet at sample `k`.
    pub fn eigenvalue_on(&self, k: usize, sheet: SheetLabel) -> Complex64 {
        let e = &self.points[k].eigenvalues;
        if self.plus_track_label(k) == sheet {
            e.lambda_plus
        } else {
            e.lambda_minus
        }
    }

    /// Whether the tracked branches end on the opposite sheets from where
    /// they started; for a closed loop this is the net label permutation.
    pub fn permuted(&self) -> bool {
        self.plus_track_label(0) != self.plus_track_label(self.points.len() - 1)
    }
}

/// Follow both eigenvalue branches continuously along a parameter path by
/// nearest-neighbor matching of consecutive root sets.
///
/// Consecutive parameter steps must be small enough that the matching is
/// unambiguous: the rejected pairing must cost more than [`MATCH_MARGIN`]
/// times the accepted one, otherwise the caller must refine the path.
pub fn sheet_track(modes: &ModePair, path: &[PumpSettings]) -> Result<TrackedPath, ModelError> {
    if path.len() < 2 {
        return Err(ModelError::PathTooShort);
    }
    let mut points = Vec::with_capacity(path.len());
    let mut cut_crossings = Vec::new();

    let first = build_hamiltonian(modes, &path[0]).eigenvalue_branches();
    // The principal branch root has the larger real part, so at sample 0 the
    // branch pair and the convention-ordered pair coincide.
    let mut track = first;
    let mut on_plus_branch = true;
    points.push(TrackedPoint {
        pump: path[0],
        eigenvalues: EigenPair { lambda_plus: track.0, lambda_minus: track.1 },
    });

    for (k, pump) in path.iter().enumerate().skip(1) {
        let (rp, rm) = build_hamiltonian(modes, pump).eigenvalue_branches();
        let keep = (rp - track.0).norm() + (rm - track.1).norm();
        let swap = (rm - track.0).norm() + (rp - track.1).norm();
        let take_plus = keep <= swap;
        let (chosen, other) = if take_plus { (keep, swap) } else { (swap, keep) };
        if chosen > 0.0 && other / chosen <= MATCH_MARGIN {
            return Err(ModelError::AmbiguousMatching { index: k, margin: other / chosen });
        }
        if chosen == 0.0 && other == 0.0 {
            // Coalesced roots: the path runs through the EP itself.
            return Err(ModelError::AmbiguousMatching { index: k, margin: 1.0 });
        }
        if take_plus != on_plus_branch {
            cut_crossings.push(k);
            on_plus_branch = take_plus;
        }
        track = if take_plus { (rp, rm) } else { (rm, rp) };
        points.push(TrackedPoint {
            pump: *pump,
            eigenvalues: EigenPair { lambda_plus: track.0, lambda_minus: track.1 },
        });
    }
    Ok(TrackedPath { points, cut_crossings })
}

/// Independent eigenvalue cross-check used by the test suites: solves the
/// characteristic polynomial of the 2x2 matrix with the complex quadratic
/// formula instead of the completed-square closed form.
pub fn eigenvalues_oracle(h: &EffectiveHamiltonian) -> EigenPair {
    // lambda^2 - tr*lambda + det = 0. The discriminant tr^2 - 4*det is
    // evaluated in the cancellation-free factored form (d1 - d2)^2 + 4 g^2;
    // the resonance frequencies dwarf the splitting, so the naive form
    // loses ~10 digits.
    let tr = h.trace();
    let det = h.determinant();
    let [[d1, g], [_, d2]] = h.matrix();
    let disc = ((d1 - d2) * (d1 - d2) + 4.0 * g * g).sqrt();
    // Pick the sign that avoids cancellation, then get the second root from
    // the product identity.
    let q = if (tr + disc).norm() >= (tr - disc).norm() { tr + disc } else { tr - disc };
    let r1 = 0.5 * q;
    let r2 = if r1.norm() > 0.0 { det / r1 } else { 0.5 * (tr - disc) };
    EigenPair::ordered(r1, r2)
}
