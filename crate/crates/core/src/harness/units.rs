//! Unit conversions for reporting and the probe-light to measurement-strength mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rb-87 ground-state gyromagnetic ratio, 2π × 7 GHz/T, in rad s⁻¹ T⁻¹.
pub const GYROMAGNETIC_RB87: f64 = 2.0 * std::f64::consts::PI * 7e9;

pub fn tesla_to_rad_s(b: f64) -> f64 {
    b * GYROMAGNETIC_RB87
}

pub fn rad_s_to_tesla(omega: f64) -> f64 {
    omega / GYROMAGNETIC_RB87
}

pub fn rad_s_to_picotesla(omega: f64) -> f64 {
    rad_s_to_tesla(omega) * 1e12
}

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const PLANCK: f64 = 6.626_070_15e-34;

/// Off-resonant Faraday probe of an alkali D line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// Probe power P [W].
    pub power_w: f64,
    /// Detuning Δν from the D1 line [Hz].
    pub detuning_hz: f64,
    /// Effective beam area [cm²].
    #[serde(default = "default_area")]
    pub area_cm2: f64,
    /// Oscillator strength of the transition.
    #[serde(default = "default_fosc")]
    pub f_osc: f64,
    /// D1 wavelength [m].
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
}

fn default_area() -> f64 {
    0.0503
}

fn default_fosc() -> f64 {
    0.34
}

fn default_wavelength() -> f64 {
    794.8e-9
}

/// Classical electron radius [cm].
const ELECTRON_RADIUS_CM: f64 = 2.82e-13;

impl ProbeParams {
    pub fn new(power_w: f64, detuning_hz: f64) -> Self {
        Self { power_w, detuning_hz, area_cm2: default_area(), f_osc: default_fosc(), wavelength_m: default_wavelength() }
    }

    /// Coupling g ≈ c r_e f_osc / (A Δν).
    pub fn coupling(&self) -> f64 {
        SPEED_OF_LIGHT * 100.0 * ELECTRON_RADIUS_CM * self.f_osc / (self.area_cm2 * self.detuning_hz)
    }

    /// Photon flux Ṅ = P / (h ν) at the detuned probe frequency.
    pub fn photon_flux(&self) -> f64 {
        let nu = SPEED_OF_LIGHT / self.wavelength_m - self.detuning_hz;
        self.power_w / (PLANCK * nu)
    }

    /// M = g²Ṅ/4 [Hz].
    pub fn measurement_strength(&self) -> Result<f64> {
        let vals = [self.power_w, self.detuning_hz, self.area_cm2, self.f_osc, self.wavelength_m];
        if vals.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::param(format!("probe parameters must be positive: {self:?}")));
        }
        let g = self.coupling();
        Ok(g * g * self.photon_flux() / 4.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tesla_round_trip() {
        let b = 42.6e-12;
        assert!((rad_s_to_tesla(tesla_to_rad_s(b)) / b - 1.0).abs() < 1e-15);
        assert!((tesla_to_rad_s(1e-12) - 0.043_982_297).abs() < 1e-9);
    }

    #[test]
    fn measurement_strength_in_expected_range() {
        // Powers 0.5-2 mW and detunings 24-64 GHz span roughly 1e-10..1e-8 Hz.
        for p in [0.5e-3, 1e-3, 2e-3] {
            for d in [24e9, 40e9, 64e9] {
                let m = ProbeParams::new(p, d).measurement_strength().unwrap();
                assert!((1e-10..=1.2e-8).contains(&m), "{p} {d} {m}");
            }
        }
        assert!(ProbeParams::new(0.0, 1e9).measurement_strength().is_err());
    }

    #[test]
    fn strength_scaling() {
        let a = ProbeParams::new(1e-3, 30e9).measurement_strength().unwrap();
        let b = ProbeParams::new(2e-3, 30e9).measurement_strength().unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
    }
}
