//! Parametric stand-in for feeder simulation output.
//!
//! Load follows a daily sinusoid with AR(1) noise, PV a truncated solar bell
//! modulated by a slowly varying cloud factor, and wind a smoothed random
//! process. Net injections set voltage magnitude and angle; current magnitude
//! and angle are then solved from the complex power, and P/Q are recomputed
//! from the phasors so every frame satisfies the power identities.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::frame::MeasurementFrame;
use super::series::SeriesSet;
use super::DEFAULT_WINDOW;
use crate::{Error, Result};

const MINUTES_PER_DAY: f64 = 1440.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LoadProfile {
    /// Mean active load (p.u.).
    pub base: f64,
    /// Relative amplitude of the daily sinusoid.
    pub amplitude: f64,
    /// Hour of the daily peak.
    pub peak_hour: f64,
    /// AR(1) coefficient of the load noise.
    pub ar_coeff: f64,
    /// Innovation std-dev of the load noise (p.u.).
    pub noise_std: f64,
    /// Load power factor; sets the reactive demand.
    pub power_factor: f64,
}

impl Default for LoadProfile {
    fn default() -> Self {
        LoadProfile {
            base: 0.8,
            amplitude: 0.3,
            peak_hour: 19.0,
            ar_coeff: 0.98,
            noise_std: 0.004,
            power_factor: 0.92,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PvProfile {
    /// Clear-sky peak output (p.u.).
    pub peak: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    /// Upper bound of the fractional cloud attenuation.
    pub cloudiness: f64,
}

impl Default for PvProfile {
    fn default() -> Self {
        PvProfile {
            peak: 0.3,
            sunrise_hour: 6.5,
            sunset_hour: 17.5,
            cloudiness: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WindProfile {
    /// Mean wind output (p.u.).
    pub mean: f64,
    /// Stationary std-dev of the wind fluctuation (p.u.).
    pub std: f64,
    /// AR(1) smoothing coefficient in `[0, 1)`.
    pub smoothing: f64,
}

impl Default for WindProfile {
    fn default() -> Self {
        WindProfile {
            mean: 0.1,
            std: 0.04,
            smoothing: 0.995,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GeneratorConfig {
    pub length: usize,
    pub seed: u64,
    pub load_profile: LoadProfile,
    pub pv_profile: PvProfile,
    pub wind_profile: WindProfile,
    /// Nominal voltage magnitude (p.u.).
    pub base_voltage: f64,
    /// Voltage drop per p.u. of net load.
    pub voltage_sensitivity: f64,
    /// Voltage angle shift per p.u. of net load (rad).
    pub angle_sensitivity: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            length: 10080,
            seed: 7,
            load_profile: LoadProfile::default(),
            pv_profile: PvProfile::default(),
            wind_profile: WindProfile::default(),
            base_voltage: 1.0,
            voltage_sensitivity: 0.05,
            angle_sensitivity: 0.03,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length < DEFAULT_WINDOW {
            return Err(Error::Config(format!(
                "length {} is shorter than the window length {DEFAULT_WINDOW}",
                self.length
            )));
        }
        if !(self.base_voltage > 0.0) {
            return Err(Error::Config(format!(
                "base_voltage must be positive, got {}",
                self.base_voltage
            )));
        }
        let l = &self.load_profile;
        let nonneg = [
            ("load.base", l.base),
            ("load.amplitude", l.amplitude),
            ("load.noise_std", l.noise_std),
            ("pv.peak", self.pv_profile.peak),
            ("pv.cloudiness", self.pv_profile.cloudiness),
            ("wind.mean", self.wind_profile.mean),
            ("wind.std", self.wind_profile.std),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(l.power_factor > 0.0 && l.power_factor < 1.0) {
            return Err(Error::Config("load.power_factor must lie in (0, 1)".into()));
        }
        for (name, v) in [("load.ar_coeff", l.ar_coeff), ("wind.smoothing", self.wind_profile.smoothing)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if !(self.pv_profile.sunrise_hour < self.pv_profile.sunset_hour) {
            return Err(Error::Config("sunrise must precede sunset".into()));
        }
        Ok(())
    }
}

/// Stationary AR(1) process with a given marginal std-dev.
struct Ar1 {
    coeff: f64,
    innovation: f64,
    state: f64,
}

impl Ar1 {
    fn with_marginal_std(coeff: f64, std: f64) -> Ar1 {
        Ar1 {
            coeff,
            innovation: std * libm::sqrt(1.0 - coeff * coeff),
            state: 0.0,
        }
    }

    fn with_innovation(coeff: f64, innovation: f64) -> Ar1 {
        Ar1 {
            coeff,
            innovation,
            state: 0.0,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        self.state = self.coeff * self.state + self.innovation * e;
        self.state
    }
}

/// Produces `cfg.length` Kirchhoff-consistent frames, deterministic per seed.
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<SeriesSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let load = &cfg.load_profile;
    let pv = &cfg.pv_profile;
    let wind = &cfg.wind_profile;

    let mut load_noise = Ar1::with_innovation(load.ar_coeff, load.noise_std);
    let mut cloud = Ar1::with_marginal_std(0.999, 0.5);
    let mut gust = Ar1::with_marginal_std(wind.smoothing, wind.std);
    let mut v_noise = Ar1::with_marginal_std(0.95, 0.001);
    let mut angle_noise = Ar1::with_marginal_std(0.95, 0.0005);

    let tan_phi = libm::tan(libm::acos(load.power_factor));
    let floor = 0.05 * load.base.max(0.1);
    let mean_net = load.base - 2.0 * pv.peak / PI * (pv.sunset_hour - pv.sunrise_hour) / 24.0 - wind.mean;

    let mut frames = Vec::with_capacity(cfg.length);
    for t in 0..cfg.length {
        let hour = (t as f64 % MINUTES_PER_DAY) / 60.0;

        let daily = libm::cos(2.0 * PI * (hour - load.peak_hour) / 24.0);
        let p_load = (load.base * (1.0 + load.amplitude * daily) + load_noise.next(&mut rng)).max(floor);
        let q_load = p_load * tan_phi;

        // cloud factor in [0, cloudiness], slowly varying
        let c = 0.5 * (1.0 + libm::tanh(cloud.next(&mut rng)));
        let bell = if hour > pv.sunrise_hour && hour < pv.sunset_hour {
            libm::sin(PI * (hour - pv.sunrise_hour) / (pv.sunset_hour - pv.sunrise_hour))
        } else {
            0.0
        };
        let p_pv = pv.peak * bell * (1.0 - pv.cloudiness * c);
        let p_wind = (wind.mean + gust.next(&mut rng)).max(0.0);

        let p_net = (p_load - p_pv - p_wind).max(floor);
        let q_net = q_load;

        let v = cfg.base_voltage - cfg.voltage_sensitivity * (p_net - mean_net) + v_noise.next(&mut rng);
        let theta = -cfg.angle_sensitivity * p_net + angle_noise.next(&mut rng);
        let s = libm::sqrt(p_net * p_net + q_net * q_net);
        let i = s / v;
        let delta = theta - libm::atan2(q_net, p_net);

        frames.push(MeasurementFrame::from_phasors(t as u64, v, i, theta, delta));
    }
    SeriesSet::new(frames)
}
