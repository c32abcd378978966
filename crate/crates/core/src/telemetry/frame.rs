use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Residual bound for generator-produced frames.
pub const PHYSICS_EPS: f64 = 1e-9;

/// Number of measured channels per frame.
pub const CHANNELS: usize = 6;

/// One measured quantity of a bus. The discriminant is the column index
/// used in every `[f64; 6]` row and tensor in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Channel {
    V = 0,
    I = 1,
    Theta = 2,
    Delta = 3,
    P = 4,
    Q = 5,
}

impl Channel {
    pub const ALL: [Channel; CHANNELS] = [
        Channel::V,
        Channel::I,
        Channel::Theta,
        Channel::Delta,
        Channel::P,
        Channel::Q,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::V => "v",
            Channel::I => "i",
            Channel::Theta => "theta",
            Channel::Delta => "delta",
            Channel::P => "p",
            Channel::Q => "q",
        }
    }

    pub fn from_name(name: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single timestamp's reading at the monitored bus.
///
/// Magnitudes and powers are per-unit, angles are radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementFrame {
    /// Sample index on a one-minute cadence.
    pub t: u64,
    pub v: f64,
    pub i: f64,
    pub theta: f64,
    pub delta: f64,
    pub p: f64,
    pub q: f64,
}

impl MeasurementFrame {
    /// Builds a frame whose P and Q follow exactly from the phasors.
    pub fn from_phasors(t: u64, v: f64, i: f64, theta: f64, delta: f64) -> Self {
        let phi = theta - delta;
        MeasurementFrame {
            t,
            v,
            i,
            theta,
            delta,
            p: v * i * libm::cos(phi),
            q: v * i * libm::sin(phi),
        }
    }

    pub fn from_row(t: u64, row: [f64; CHANNELS]) -> Self {
        let [v, i, theta, delta, p, q] = row;
        MeasurementFrame { t, v, i, theta, delta, p, q }
    }

    pub fn row(&self) -> [f64; CHANNELS] {
        [self.v, self.i, self.theta, self.delta, self.p, self.q]
    }

    pub fn get(&self, channel: Channel) -> f64 {
        self.row()[channel.index()]
    }

    pub fn set(&mut self, channel: Channel, value: f64) {
        match channel {
            Channel::V => self.v = value,
            Channel::I => self.i = value,
            Channel::Theta => self.theta = value,
            Channel::Delta => self.delta = value,
            Channel::P => self.p = value,
            Channel::Q => self.q = value,
        }
    }

    /// `(P - V·I·cos(θ-δ), Q - V·I·sin(θ-δ))`.
    pub fn power_residuals(&self) -> (f64, f64) {
        let phi = self.theta - self.delta;
        let vi = self.v * self.i;
        (self.p - vi * libm::cos(phi), self.q - vi * libm::sin(phi))
    }
}
