//! Ground-truth simulation and noisy measurements.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sparse_ukf::models::{rk4_step, PartialDynamics};

use crate::config::{ConfigError, ExperimentConfig};

/// Truth states, inputs and measurements on the sampling grid `t_k = k·dt`,
/// `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub truth: Vec<DVector<f64>>,
    /// Input held over `[t_k, t_{k+1})`.
    pub inputs: Vec<f64>,
    /// `y_k = x₁(t_k) + v_k`.
    pub measurements: Vec<f64>,
}

impl Simulation {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// RK4 on the complete model with `truth_substeps` sub-steps per sample; the
/// input is held constant over each sampling interval. Measurement noise and
/// optional truth process noise come from independent streams of the same
/// seed, so toggling one never changes the other.
pub fn simulate_truth(config: &ExperimentConfig) -> Result<Simulation, ConfigError> {
    config.validate()?;
    let dynamics = config.benchmark_model();
    let excitation = config.excitation();
    let steps = config.steps();
    let h = config.dt / config.truth_substeps as f64;

    let mut meas_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut proc_rng = ChaCha8Rng::seed_from_u64(config.seed);
    proc_rng.set_stream(1);
    let v = Normal::new(0.0, config.noise.r.sqrt()).expect("r validated positive");
    let w = Normal::new(0.0, config.noise.q_x.sqrt()).expect("q_x validated positive");

    let mut x = DVector::from_vec(config.initial_state());
    let mut sim = Simulation {
        times: Vec::with_capacity(steps + 1),
        truth: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        measurements: Vec::with_capacity(steps + 1),
    };
    for k in 0..=steps {
        let t = k as f64 * config.dt;
        let u = excitation.at(t);
        sim.times.push(t);
        sim.measurements.push(x[0] + v.sample(&mut meas_rng));
        sim.inputs.push(u);
        sim.truth.push(x.clone());
        if k == steps {
            break;
        }
        for _ in 0..config.truth_substeps {
            x = rk4_step(|s: &[f64], u: f64| dynamics.derivative(s, u), &x, u, h);
        }
        if config.noise.truth_process_noise {
            for xi in x.iter_mut() {
                *xi += w.sample(&mut proc_rng);
            }
        }
    }
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BenchmarkKind, Excitation};

    #[test]
    fn grid_and_lengths() {
        let mut cfg = ExperimentConfig::demo(BenchmarkKind::Duffing, 1);
        cfg.horizon = 1.0;
        let sim = simulate_truth(&cfg).unwrap();
        assert_eq!(sim.len(), 101);
        assert!(sim.times.windows(2).all(|w| (w[1] - w[0] - 0.01).abs() < 1e-12));
        assert_eq!(sim.truth[0].as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn equilibrium_without_excitation_stays_put() {
        let mut cfg = ExperimentConfig::demo(BenchmarkKind::Golf, 1);
        cfg.excitation = Some(Excitation { amplitude: 0.0, frequency: 1.0 });
        cfg.horizon = 2.0;
        let sim = simulate_truth(&cfg).unwrap();
        assert!(sim.truth.iter().all(|x| x.as_slice() == [0.0, 0.0]));
    }

    #[test]
    fn process_noise_does_not_change_measurement_draws() {
        let mut cfg = ExperimentConfig::demo(BenchmarkKind::Duffing, 4);
        cfg.horizon = 1.0;
        let a = simulate_truth(&cfg).unwrap();
        cfg.noise.truth_process_noise = true;
        let b = simulate_truth(&cfg).unwrap();
        let noise_a: Vec<f64> = a.measurements.iter().zip(&a.truth).map(|(y, x)| y - x[0]).collect();
        let noise_b: Vec<f64> = b.measurements.iter().zip(&b.truth).map(|(y, x)| y - x[0]).collect();
        assert!(noise_a.iter().zip(&noise_b).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_ne!(a.truth, b.truth);
    }
}
