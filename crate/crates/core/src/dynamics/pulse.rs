use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::state::Label;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Microwave,
    Rf,
    Laser,
    Delay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PulseMode {
    /// Rotating-frame propagation under static + drive Hamiltonian.
    #[default]
    Finite,
    /// Exact rotation of the target pairs by 2π·rabi·duration; the clock and
    /// relaxation advance by `duration_s` but no free evolution is applied.
    Ideal,
    /// Zero-duration z rotation of the target site's frame by `phase_rad`.
    Virtual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseTarget {
    /// One transition given by the labels of its two levels; they must differ
    /// on exactly one site.
    Transition { lower: Label, upper: Label },
    /// Every transition of one nucleus (index into the system's nuclei).
    Nucleus(usize),
    /// Several nuclei driven simultaneously, each on its own frame frequency
    /// (carrier must be 0).
    Nuclei(Vec<usize>),
    /// Every allowed electron transition.
    Electron,
}

/// One timed event of a pulse program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseEvent {
    pub channel: Channel,
    #[serde(default)]
    pub carrier_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub duration_s: f64,
    #[serde(default)]
    pub rabi_hz: f64,
    #[serde(default)]
    pub target: Option<PulseTarget>,
    #[serde(default)]
    pub mode: PulseMode,
}

impl PulseEvent {
    pub fn delay(duration_s: f64) -> Self {
        PulseEvent {
            channel: Channel::Delay,
            carrier_hz: 0.0,
            phase_rad: 0.0,
            duration_s,
            rabi_hz: 0.0,
            target: None,
            mode: PulseMode::Finite,
        }
    }

    pub fn laser() -> Self {
        PulseEvent {
            channel: Channel::Laser,
            ..Self::delay(0.0)
        }
    }

    pub fn microwave(carrier_hz: f64, rabi_hz: f64, duration_s: f64, phase_rad: f64) -> Self {
        PulseEvent {
            channel: Channel::Microwave,
            carrier_hz,
            phase_rad,
            duration_s,
            rabi_hz,
            target: None,
            mode: PulseMode::Finite,
        }
    }

    pub fn rf(carrier_hz: f64, rabi_hz: f64, duration_s: f64, phase_rad: f64) -> Self {
        PulseEvent {
            channel: Channel::Rf,
            ..Self::microwave(carrier_hz, rabi_hz, duration_s, phase_rad)
        }
    }

    /// Ideal rotation by `angle` lasting `duration_s` (> 0).
    pub fn ideal(
        channel: Channel,
        target: PulseTarget,
        angle: f64,
        phase_rad: f64,
        duration_s: f64,
    ) -> Self {
        PulseEvent {
            channel,
            carrier_hz: 0.0,
            phase_rad,
            duration_s,
            rabi_hz: angle / (2.0 * PI * duration_s),
            target: Some(target),
            mode: PulseMode::Ideal,
        }
    }

    /// Frame rotation exp(−i·angle·I_z) on the target site.
    pub fn virtual_z(channel: Channel, target: PulseTarget, angle: f64) -> Self {
        PulseEvent {
            channel,
            carrier_hz: 0.0,
            phase_rad: angle,
            duration_s: 0.0,
            rabi_hz: 0.0,
            target: Some(target),
            mode: PulseMode::Virtual,
        }
    }

    pub fn with_target(mut self, target: PulseTarget) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_phase(mut self, phase_rad: f64) -> Self {
        self.phase_rad = phase_rad;
        self
    }

    pub fn with_carrier(mut self, carrier_hz: f64) -> Self {
        self.carrier_hz = carrier_hz;
        self
    }

    pub fn flip_angle(&self) -> f64 {
        2.0 * PI * self.rabi_hz * self.duration_s
    }

    pub fn is_drive(&self) -> bool {
        matches!(self.channel, Channel::Microwave | Channel::Rf)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.carrier_hz,
            self.phase_rad,
            self.duration_s,
            self.rabi_hz,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(invalid("pulse fields must be finite"));
        }
        if self.duration_s < 0.0 {
            return Err(invalid(format!("negative duration {}", self.duration_s)));
        }
        if self.rabi_hz < 0.0 {
            return Err(invalid(format!("negative rabi_hz {}", self.rabi_hz)));
        }
        if self.is_drive() {
            match self.mode {
                PulseMode::Finite if self.rabi_hz <= 0.0 && self.duration_s > 0.0 => {
                    return Err(invalid("finite drive pulse needs rabi_hz > 0"))
                }
                PulseMode::Ideal | PulseMode::Virtual if self.target.is_none() => {
                    return Err(invalid("ideal and virtual pulses need a target"))
                }
                _ => {}
            }
        }
        if let Some(PulseTarget::Nuclei(list)) = &self.target {
            if list.is_empty() {
                return Err(invalid("empty nucleus list"));
            }
            if self.carrier_hz != 0.0 {
                return Err(invalid(
                    "simultaneous pulses run on the frame frequencies (carrier 0)",
                ));
            }
        }
        if let Some(PulseTarget::Transition { lower, upper }) = &self.target {
            if lower.len() != upper.len() {
                return Err(invalid("transition labels have different lengths"));
            }
            let differing = lower.iter().zip(upper).filter(|(a, b)| a != b).count();
            if differing != 1 {
                return Err(invalid("transition target must differ on exactly one site"));
            }
        }
        Ok(())
    }
}

/// An ordered list of events.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSequence {
    #[serde(default)]
    pub name: String,
    pub events: Vec<PulseEvent>,
}

impl PulseSequence {
    pub fn new(name: &str) -> Self {
        PulseSequence {
            name: name.to_string(),
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, e: PulseEvent) -> &mut Self {
        self.events.push(e);
        self
    }

    pub fn extend(&mut self, other: &PulseSequence) -> &mut Self {
        self.events.extend(other.events.iter().cloned());
        self
    }

    pub fn total_duration(&self) -> f64 {
        self.events.iter().map(|e| e.duration_s).sum()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, e) in self.events.iter().enumerate() {
            e.validate()
                .map_err(|err| invalid(format!("event {k}: {err}")))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let seq: PulseSequence = serde_json::from_str(text)?;
        seq.validate()?;
        Ok(seq)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pulse sequence serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_angle() {
        let p = PulseEvent::ideal(Channel::Rf, PulseTarget::Nucleus(0), PI / 2.0, 0.0, 17e-6);
        assert!((p.flip_angle() - PI / 2.0).abs() < 1e-12);
        p.validate().unwrap();
    }

    #[test]
    fn validation_rules() {
        assert!(PulseEvent::delay(-1.0).validate().is_err());
        assert!(PulseEvent::microwave(9.7e9, 0.0, 1e-7, 0.0)
            .validate()
            .is_err());
        let mut p = PulseEvent::rf(1e6, 1e4, 1e-5, 0.0);
        p.mode = PulseMode::Ideal;
        assert!(p.validate().is_err());
        let t = PulseTarget::Transition {
            lower: vec![0, 1, 1],
            upper: vec![2, -1, 1],
        };
        assert!(PulseEvent::microwave(9.7e9, 1e6, 1e-7, 0.0)
            .with_target(t)
            .validate()
            .is_err());
    }

    #[test]
    fn json_roundtrip() {
        let mut s = PulseSequence::new("demo");
        s.push(PulseEvent::laser())
            .push(PulseEvent::microwave(9.7e9, 2.0e6, 128e-9, 0.0))
            .push(PulseEvent::delay(1e-6))
            .push(PulseEvent::virtual_z(
                Channel::Rf,
                PulseTarget::Nucleus(1),
                0.3,
            ));
        let back = PulseSequence::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert!((s.total_duration() - (128e-9 + 1e-6)).abs() < 1e-18);
    }
}
