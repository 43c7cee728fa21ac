//! Zener thermoelastic-damping design utility.
//!
//! Relates beam geometry to the thermal relaxation time, the thermoelastic
//! quality factor and the damping rate:
//!
//! ```text
//! tau_Z = b^2 / (pi^2 * chi)
//! Q_TED = C / (E * alpha^2 * T0) * (1/(omega_m * tau_Z) + omega_m * tau_Z)
//! gamma = omega / Q
//! ```
//!
//! `C` is the volumetric heat capacity (J m^-3 K^-1); with that convention
//! the prefactor C/(E alpha^2 T0) is dimensionless.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Material constants entering the Zener model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialProps {
    /// Volumetric heat capacity (J m^-3 K^-1).
    pub heat_capacity: f64,
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    /// Coefficient of thermal expansion (1/K).
    pub thermal_expansion: f64,
    /// Equilibrium temperature (K).
    pub equilibrium_temperature: f64,
    /// Thermal diffusivity (m^2/s).
    pub thermal_diffusivity: f64,
}

impl MaterialProps {
    /// Typical single-crystal silicon near 300 K. Textbook values
    /// (CRC Handbook / Hull, "Properties of Crystalline Silicon"):
    /// C = rho*c_p = 2329 kg/m^3 * 700 J/(kg K), E = 169 GPa,
    /// alpha = 2.6e-6 /K, chi = 8.8e-5 m^2/s.
    pub fn silicon() -> Self {
        MaterialProps {
            heat_capacity: 2329.0 * 700.0,
            youngs_modulus: 169e9,
            thermal_expansion: 2.6e-6,
            equilibrium_temperature: 300.0,
            thermal_diffusivity: 8.8e-5,
        }
    }
}

/// Flexural beam geometry reduced to what the Zener model needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    /// Beam width, i.e. the heat-flow path length (m).
    pub width: f64,
    /// Mechanical mode frequency (rad/s).
    pub omega_m: f64,
}

/// Thermal relaxation time tau_Z = b^2/(pi^2 chi) (s).
pub fn thermal_relaxation_time(beam: &BeamSpec, mat: &MaterialProps) -> f64 {
    beam.width * beam.width / (PI * PI * mat.thermal_diffusivity)
}

/// Thermoelastic quality factor. Both Zener terms are retained; the
/// isothermal limit omega_m*tau_Z << 1 is a property of the inputs, not of
/// the implementation.
pub fn q_ted(beam: &BeamSpec, mat: &MaterialProps) -> f64 {
    let tau = thermal_relaxation_time(beam, mat);
    let x = beam.omega_m * tau;
    mat.heat_capacity
        / (mat.youngs_modulus * mat.thermal_expansion * mat.thermal_expansion * mat.equilibrium_temperature)
        * (1.0 / x + x)
}

/// Damping rate gamma = omega / Q (rad/s).
pub fn damping_rate(omega: f64, q: f64) -> f64 {
    omega / q
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn relaxation_time_scales_quadratically_with_width() {
        let mat = MaterialProps::silicon();
        let a = thermal_relaxation_time(&BeamSpec { width: 9e-6, omega_m: 1.0 }, &mat);
        let b = thermal_relaxation_time(&BeamSpec { width: 18e-6, omega_m: 1.0 }, &mat);
        assert!((b / a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn silicon_relaxation_times_for_the_disk_beams() {
        let mat = MaterialProps::silicon();
        let thin = thermal_relaxation_time(&BeamSpec { width: 9e-6, omega_m: 1.0 }, &mat);
        let thick = thermal_relaxation_time(&BeamSpec { width: 13e-6, omega_m: 1.0 }, &mat);
        assert!((thin - 9.3e-8).abs() < 0.05e-8, "tau = {thin:e}");
        assert!((thick - 1.95e-7).abs() < 0.005e-7, "tau = {thick:e}");
    }

    #[test]
    fn q_ted_minimum_sits_at_unit_omega_tau() {
        let mat = MaterialProps::silicon();
        // Sweep tau_Z through the minimum by sweeping the width.
        let omega_m = TAU * 50_500.0;
        let floor = 2.0 * mat.heat_capacity
            / (mat.youngs_modulus
                * mat.thermal_expansion
                * mat.thermal_expansion
                * mat.equilibrium_temperature);
        let mut best = f64::INFINITY;
        let mut best_x = 0.0;
        for k in 0..4000 {
            let width = 1e-6 * 10f64.powf(2.0 * k as f64 / 4000.0);
            let beam = BeamSpec { width, omega_m };
            let q = q_ted(&beam, &mat);
            assert!(q >= floor * (1.0 - 1e-12));
            if q < best {
                best = q;
                best_x = omega_m * thermal_relaxation_time(&beam, &mat);
            }
        }
        assert!((best - floor).abs() < 1e-6 * floor);
        assert!((best_x - 1.0).abs() < 0.01, "omega*tau at minimum = {best_x}");
    }

    #[test]
    fn q_ted_convex_in_log_tau() {
        let mat = MaterialProps::silicon();
        let omega_m = TAU * 50_500.0;
        let qs: Vec<f64> = (0..200)
            .map(|k| {
                let width = 1e-6 * 10f64.powf(2.0 * k as f64 / 200.0);
                q_ted(&BeamSpec { width, omega_m }, &mat).ln()
            })
            .collect();
        for w in qs.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] > -1e-9);
        }
    }

    #[test]
    fn halving_width_quadruples_q_in_the_isothermal_regime() {
        let mat = MaterialProps::silicon();
        let omega_m = TAU * 5_000.0; // deep isothermal: omega*tau ~ 3e-3
        let q1 = q_ted(&BeamSpec { width: 9e-6, omega_m }, &mat);
        let q2 = q_ted(&BeamSpec { width: 4.5e-6, omega_m }, &mat);
        assert!((q2 / q1 - 4.0).abs() < 0.01, "ratio = {}", q2 / q1);
    }

    #[test]
    fn thinner_beam_wins_at_the_disk_frequency() {
        let mat = MaterialProps::silicon();
        let omega_m = TAU * 50_500.0;
        let thin = q_ted(&BeamSpec { width: 9e-6, omega_m }, &mat);
        let thick = q_ted(&BeamSpec { width: 13e-6, omega_m }, &mat);
        assert!(thin > thick);
    }

    #[test]
    fn damping_rates_from_measured_quality_factors() {
        let g1 = damping_rate(TAU * 50_468.68, 74_658.0);
        let g2 = damping_rate(TAU * 51_007.86, 56_424.0);
        assert!((g1 - TAU * 0.676).abs() < TAU * 1e-3);
        assert!((g2 - TAU * 0.904).abs() < TAU * 1e-3);
        assert!(((g2 - g1) - TAU * 0.228).abs() < TAU * 1e-3);
        assert!(damping_rate(TAU * 50_468.68, 1e18) < 1e-11);
    }
}
