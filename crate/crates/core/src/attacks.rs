//! Reference and attack signal generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyrat::RationalFunction;
use crate::simulate::{half_step_samples, realize, Rk4};

/// Step used when a covert signal is sampled on its own, outside a
/// simulation run.
const STANDALONE_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSignal {
    #[default]
    Zero,
    Step {
        amplitude: f64,
        #[serde(default)]
        start_time: f64,
    },
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `gain · exp(eta · (t - start_time))` after `start_time`.
    Exponential {
        gain: f64,
        eta: f64,
        #[serde(default)]
        start_time: f64,
    },
    /// Negated response of `plant_model` to `w_component`, paired with the
    /// same `w_component` injected on the forward path.
    Covert {
        w_component: Box<AttackSignal>,
        plant_model: RationalFunction,
    },
}

impl AttackSignal {
    pub fn validate(&self) -> Result<()> {
        match self {
            AttackSignal::Zero | AttackSignal::Sinusoid { .. } => Ok(()),
            AttackSignal::Step { start_time, .. } | AttackSignal::Exponential { start_time, .. } => {
                if *start_time >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Domain("start_time must be >= 0".into()))
                }
            }
            AttackSignal::Covert { w_component, plant_model } => {
                if !plant_model.is_proper() {
                    return Err(Error::Improper(format!("covert plant model {plant_model} is not proper")));
                }
                if matches!(**w_component, AttackSignal::Covert { .. }) {
                    return Err(Error::Domain("covert signals cannot be nested".into()));
                }
                w_component.validate()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            AttackSignal::Zero => true,
            AttackSignal::Step { amplitude, .. } | AttackSignal::Sinusoid { amplitude, .. } => *amplitude == 0.0,
            AttackSignal::Exponential { gain, .. } => *gain == 0.0,
            AttackSignal::Covert { w_component, plant_model } => w_component.is_zero() || plant_model.is_zero(),
        }
    }

    /// Pointwise value. Steps and exponentials switch on at `start_time`
    /// itself, so a step from 0 is a constant on every integration substep.
    pub fn sample(&self, t: f64) -> f64 {
        match self {
            AttackSignal::Zero => 0.0,
            AttackSignal::Step { amplitude, start_time } => {
                if t >= *start_time {
                    *amplitude
                } else {
                    0.0
                }
            }
            AttackSignal::Sinusoid { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
            AttackSignal::Exponential { gain, eta, start_time } => {
                if t >= *start_time {
                    gain * (eta * (t - start_time)).exp()
                } else {
                    0.0
                }
            }
            AttackSignal::Covert { .. } => {
                let n = (t / STANDALONE_DT).ceil().max(1.0) as usize;
                let dt = t / n as f64;
                self.sample_series(dt, n).last().copied().unwrap_or(0.0)
            }
        }
    }

    /// Limit from the left at `t`; differs from [`Self::sample`] only at a
    /// switch-on instant.
    pub fn sample_left(&self, t: f64) -> f64 {
        match self {
            AttackSignal::Step { start_time, .. } | AttackSignal::Exponential { start_time, .. }
                if t <= *start_time =>
            {
                0.0
            }
            other => other.sample(t),
        }
    }

    /// Samples at `0, dt, ..., n·dt`. Covert signals are filtered through a
    /// realization of `-plant_model` with zero initial state.
    pub fn sample_series(&self, dt: f64, n: usize) -> Vec<f64> {
        match self {
            AttackSignal::Covert { w_component, plant_model } => {
                let filter = match realize(&-plant_model) {
                    Ok(ss) => ss,
                    Err(_) => return vec![f64::NAN; n + 1],
                };
                Rk4::new(&filter, dt).run_sampled(&half_step_samples(w_component, dt, n))
            }
            other => (0..=n).map(|i| other.sample(i as f64 * dt)).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> AttackSignal {
        match self.clone() {
            AttackSignal::Zero => AttackSignal::Zero,
            AttackSignal::Step { amplitude, start_time } => AttackSignal::Step { amplitude: k * amplitude, start_time },
            AttackSignal::Sinusoid { amplitude, omega, phase } => AttackSignal::Sinusoid { amplitude: k * amplitude, omega, phase },
            AttackSignal::Exponential { gain, eta, start_time } => AttackSignal::Exponential { gain: k * gain, eta, start_time },
            AttackSignal::Covert { w_component, plant_model } => AttackSignal::Covert {
                w_component: Box::new(w_component.scaled(k)),
                plant_model,
            },
        }
    }
}

/// Exponential attack growing at the plant's largest real right-half-plane
/// zero, or `None` when the plant has no such zero.
pub fn zero_dynamics_attack(plant: &RationalFunction, gain: f64) -> Option<AttackSignal> {
    let zeros = plant.zeros().ok()?;
    zeros
        .iter()
        .filter(|z| z.re > 0.0 && z.im.abs() <= 1e-9 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .max_by(f64::total_cmp)
        .map(|eta| AttackSignal::Exponential { gain, eta, start_time: 0.0 })
}

/// Double-point attack `(w, z)` where `z` is the negated model response to
/// `w`, cancelling the measurement deviation of an uncoded loop whose
/// plant matches `plant_model`.
pub fn covert_pair(w_sig: &AttackSignal, plant_model: &RationalFunction) -> Result<(AttackSignal, AttackSignal)> {
    if !plant_model.is_proper() {
        return Err(Error::Improper(format!("covert plant model {plant_model} is not proper")));
    }
    let z = AttackSignal::Covert {
        w_component: Box::new(w_sig.clone()),
        plant_model: plant_model.clone(),
    };
    z.validate()?;
    Ok((w_sig.clone(), z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rf(num: &[f64], den: &[f64]) -> RationalFunction {
        RationalFunction::from_coeffs(num, den).unwrap()
    }

    #[test]
    fn sample_examples() {
        assert_eq!(AttackSignal::Step { amplitude: 1.0, start_time: 0.0 }.sample(5.0), 1.0);
        let e = AttackSignal::Exponential { gain: 1.0, eta: 1.0, start_time: 0.0 }.sample(2.0);
        assert!((e - 7.389_056_098_930_65).abs() < 1e-12);
        assert_eq!(AttackSignal::Zero.sample(3.3), 0.0);
    }

    #[test]
    fn zero_before_start() {
        let s = AttackSignal::Step { amplitude: 2.0, start_time: 1.0 };
        assert_eq!(s.sample(0.999), 0.0);
        assert_eq!(s.sample(1.0), 2.0);
        let e = AttackSignal::Exponential { gain: 1.0, eta: 2.0, start_time: 1.0 };
        assert_eq!(e.sample(0.5), 0.0);
        assert_eq!(e.sample(1.0), 1.0);
    }

    #[test]
    fn zero_dynamics_examples() {
        let a = zero_dynamics_attack(&rf(&[-1.0, 1.0], &[2.0, 3.0, 1.0]), 1.0).unwrap();
        let AttackSignal::Exponential { eta, .. } = a else { panic!() };
        assert!((eta - 1.0).abs() < 1e-12);

        assert_eq!(zero_dynamics_attack(&rf(&[1.0], &[1.0, 1.0]), 1.0), None);

        // (s-2)(s+1) / (s+3)^3
        let den = [27.0, 27.0, 9.0, 1.0];
        let a = zero_dynamics_attack(&rf(&[-2.0, -1.0, 1.0], &den), 0.5).unwrap();
        let AttackSignal::Exponential { eta, gain, .. } = a else { panic!() };
        assert!((eta - 2.0).abs() < 1e-12);
        assert_eq!(gain, 0.5);
    }

    #[test]
    fn complex_zeros_are_skipped() {
        // zeros at 1 ± j only
        assert_eq!(zero_dynamics_attack(&rf(&[2.0, -2.0, 1.0], &[1.0, 2.0, 1.0, 1.0]), 1.0), None);
    }

    #[test]
    fn covert_of_zero_is_zero() {
        let (_, z) = covert_pair(&AttackSignal::Zero, &rf(&[1.0], &[1.0, 1.0])).unwrap();
        assert!(z.sample_series(0.01, 100).iter().all(|&v| v == 0.0));
        assert!(z.is_zero());
    }

    #[test]
    fn covert_is_causal_and_filtered() {
        let w = AttackSignal::Step { amplitude: 1.0, start_time: 0.5 };
        let (_, z) = covert_pair(&w, &rf(&[1.0], &[1.0, 1.0])).unwrap();
        let series = z.sample_series(0.01, 300);
        assert!(series[..50].iter().all(|&v| v == 0.0));
        // -(1 - e^{-(t-0.5)}) at t = 3
        let expect = -(1.0 - (-2.5f64).exp());
        assert!((series[300] - expect).abs() < 1e-8, "{}", series[300]);
        assert!((z.sample(3.0) - expect).abs() < 1e-8);
    }

    #[test]
    fn improper_covert_model_rejected() {
        assert!(covert_pair(&AttackSignal::Zero, &rf(&[0.0, 0.0, 1.0], &[1.0, 1.0])).is_err());
    }

    #[test]
    fn json() {
        let s: AttackSignal = serde_json::from_str(r#"{"type":"sinusoid","amplitude":100,"omega":5}"#).unwrap();
        assert_eq!(s, AttackSignal::Sinusoid { amplitude: 100.0, omega: 5.0, phase: 0.0 });
        assert!(serde_json::from_str::<AttackSignal>(r#"{"type":"step","amplitude":1,"bogus":2}"#).is_err());
    }
}
