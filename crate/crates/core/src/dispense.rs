//! Drop-level dispensing model.
//!
//! Each motor step pushes `volume_per_step · step_efficiency` into a pending
//! volume at the syringe tip. Whenever that reaches one drop quantum a drop
//! falls and is logged the way a scale and stopwatch would see it. At the end
//! of an infusion whatever is pending, less the dead volume retained in the
//! line, falls as a final partial drop.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::kinematics::Kinematics;
use crate::scalar::Scalar;

/// 20 drops/mL macrodrip.
pub const DEFAULT_DROP_QUANTUM_UL: f64 = 50.0;
pub const DEFAULT_EFFICIENCY_SIGMA: f64 = 0.015;
pub const EFFICIENCY_CLAMP: (f64, f64) = (0.9, 1.1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct NoiseModel<S> {
    /// Standard deviation of the per-run step efficiency around 1.0.
    pub efficiency_sigma: S,
    /// Upper bound of the uniformly drawn dead volume, in µL.
    pub dead_volume_max_ul: S,
    pub seed: u64,
}

impl<S: Scalar> NoiseModel<S> {
    /// Default noise: σ = 0.015 and dead volume up to one drop quantum.
    pub fn standard(seed: u64, drop_quantum_ul: S) -> Self {
        Self {
            efficiency_sigma: S::lit(DEFAULT_EFFICIENCY_SIGMA),
            dead_volume_max_ul: drop_quantum_ul,
            seed,
        }
    }

    pub fn zero() -> Self {
        Self {
            efficiency_sigma: S::zero(),
            dead_volume_max_ul: S::zero(),
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !self.efficiency_sigma.is_finite() || self.efficiency_sigma < S::zero() {
            return Err(CoreError::InvalidNoise("efficiency_sigma must be finite and >= 0"));
        }
        if !self.dead_volume_max_ul.is_finite() || self.dead_volume_max_ul < S::zero() {
            return Err(CoreError::InvalidNoise("dead_volume_max_ul must be finite and >= 0"));
        }
        Ok(())
    }

    /// Draws the per-run realization. Same seed, same draw.
    pub fn draw(&self) -> Result<NoiseDraw<S>> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let sigma = self.efficiency_sigma.to_f64().unwrap_or(0.0);
        let efficiency = if sigma == 0.0 {
            1.0
        } else {
            let normal = Normal::new(1.0, sigma).map_err(|_| CoreError::InvalidNoise("bad sigma"))?;
            normal.sample(&mut rng).clamp(EFFICIENCY_CLAMP.0, EFFICIENCY_CLAMP.1)
        };
        let dead_max = self.dead_volume_max_ul.to_f64().unwrap_or(0.0);
        let dead = if dead_max == 0.0 {
            0.0
        } else {
            rng.random_range(0.0..=dead_max)
        };
        Ok(NoiseDraw {
            step_efficiency: S::lit(efficiency),
            dead_volume_ul: S::lit(dead),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct NoiseDraw<S> {
    pub step_efficiency: S,
    pub dead_volume_ul: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct DropEvent<S> {
    pub t_s: S,
    pub drop_volume_ul: S,
    pub cumulative_ml: S,
    pub cumulative_mass_g: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct InfusionTrace<S> {
    pub drops: Vec<DropEvent<S>>,
    pub delivered_volume_ml: S,
    pub mean_rate_ml_h: S,
    /// Seconds from start to the last executed step (or the stop instant).
    pub duration_s: S,
}

impl<S: Scalar> InfusionTrace<S> {
    /// Writes `t_s,drop_volume_ul,cumulative_ml`, one row per drop.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t_s,drop_volume_ul,cumulative_ml")?;
        for d in &self.drops {
            writeln!(out, "{},{},{}", d.t_s, d.drop_volume_ul, d.cumulative_ml)?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

/// Converts executed steps into drop events.
#[derive(Debug, Clone)]
pub struct Dispenser<S> {
    volume_per_step_ul: S,
    draw: NoiseDraw<S>,
    drop_quantum_ul: S,
    density_g_ml: S,
    pending_ul: S,
    cumulative_ul: S,
    steps: u64,
    drops: Vec<DropEvent<S>>,
}

impl<S: Scalar> Dispenser<S> {
    pub fn new(k: &Kinematics<S>, draw: NoiseDraw<S>, drop_quantum_ul: S) -> Result<Self> {
        k.check()?;
        if !drop_quantum_ul.is_finite() || drop_quantum_ul <= S::zero() {
            return Err(CoreError::InvalidNoise("drop quantum must be positive"));
        }
        Ok(Self {
            volume_per_step_ul: k.volume_per_step_ul(),
            draw,
            drop_quantum_ul,
            density_g_ml: k.fluid_density_g_ml,
            pending_ul: S::zero(),
            cumulative_ul: S::zero(),
            steps: 0,
            drops: Vec::new(),
        })
    }

    pub fn draw(&self) -> NoiseDraw<S> {
        self.draw
    }

    pub fn steps_executed(&self) -> u64 {
        self.steps
    }

    /// Volume measured at the scale so far, in mL.
    pub fn measured_ml(&self) -> S {
        self.cumulative_ul / S::lit(1000.0)
    }

    pub fn drops(&self) -> &[DropEvent<S>] {
        &self.drops
    }

    /// Executes one step at `t_s`; returns the number of drops it released.
    pub fn step(&mut self, t_s: S) -> usize {
        self.steps += 1;
        self.pending_ul = self.pending_ul + self.volume_per_step_ul * self.draw.step_efficiency;
        let mut released = 0;
        while self.pending_ul >= self.drop_quantum_ul {
            self.pending_ul = self.pending_ul - self.drop_quantum_ul;
            self.release(t_s, self.drop_quantum_ul);
            released += 1;
        }
        released
    }

    fn release(&mut self, t_s: S, volume_ul: S) {
        self.cumulative_ul = self.cumulative_ul + volume_ul;
        let cumulative_ml = self.cumulative_ul / S::lit(1000.0);
        self.drops.push(DropEvent {
            t_s,
            drop_volume_ul: volume_ul,
            cumulative_ml,
            cumulative_mass_g: cumulative_ml * self.density_g_ml,
        });
    }

    /// Flushes the pending volume less dead volume and closes the trace.
    pub fn finish(mut self, end_s: S) -> InfusionTrace<S> {
        let tail = (self.pending_ul - self.draw.dead_volume_ul).max(S::zero());
        if tail > S::zero() {
            self.release(end_s, tail);
        }
        let delivered = self.measured_ml();
        let mean_rate = if end_s > S::zero() {
            delivered / end_s * S::lit(3600.0)
        } else {
            S::zero()
        };
        InfusionTrace {
            drops: self.drops,
            delivered_volume_ml: delivered,
            mean_rate_ml_h: mean_rate,
            duration_s: end_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::plan_schedule;

    type K = Kinematics<f64>;

    fn run(volume: f64, rate: f64, noise: NoiseModel<f64>) -> InfusionTrace<f64> {
        let k = K::default();
        let plan = plan_schedule(volume, rate, &k).unwrap();
        let mut d = Dispenser::new(&k, noise.draw().unwrap(), DEFAULT_DROP_QUANTUM_UL).unwrap();
        for n in 1..=plan.steps_total {
            d.step(plan.step_time(0.0, n));
        }
        d.finish(plan.ideal_duration_s())
    }

    #[test]
    fn zero_noise_delivers_planned_steps() {
        let trace = run(2.0, 4.0, NoiseModel::zero());
        let expected = 6729.0 * K::default().volume_per_step_ml();
        assert!((trace.delivered_volume_ml - expected).abs() < 1e-9);
        assert!((trace.delivered_volume_ml - 2.0).abs() < DEFAULT_DROP_QUANTUM_UL / 1000.0);
        assert!(((trace.mean_rate_ml_h - 4.0) / 4.0).abs() <= 0.005);
    }

    #[test]
    fn drops_are_quantized_except_last() {
        let trace = run(2.0, 4.0, NoiseModel::standard(7, DEFAULT_DROP_QUANTUM_UL));
        let (last, body) = trace.drops.split_last().unwrap();
        assert!(body.iter().all(|d| d.drop_volume_ul == DEFAULT_DROP_QUANTUM_UL));
        assert!(last.drop_volume_ul <= DEFAULT_DROP_QUANTUM_UL);
    }

    #[test]
    fn cumulative_is_monotone_and_mass_tracks_density() {
        let trace = run(2.0, 4.0, NoiseModel::standard(3, DEFAULT_DROP_QUANTUM_UL));
        for w in trace.drops.windows(2) {
            assert!(w[1].cumulative_ml >= w[0].cumulative_ml);
            assert!(w[1].t_s >= w[0].t_s);
        }
        for d in &trace.drops {
            assert_eq!(d.cumulative_mass_g, d.cumulative_ml * 1.0);
        }
    }

    #[test]
    fn zero_noise_drops_are_evenly_spaced() {
        let trace = run(2.0, 4.0, NoiseModel::zero());
        let interval = K::default().rate_to_step_interval(4.0).unwrap();
        let body = &trace.drops[..trace.drops.len() - 1];
        let gaps: Vec<f64> = body.windows(2).map(|w| w[1].t_s - w[0].t_s).collect();
        let first = gaps[0];
        assert!(gaps.iter().all(|g| (g - first).abs() <= interval * 1.000_001));
    }

    #[test]
    fn same_seed_same_draw() {
        let a = NoiseModel::<f64>::standard(42, 50.0).draw().unwrap();
        let b = NoiseModel::<f64>::standard(42, 50.0).draw().unwrap();
        let c = NoiseModel::<f64>::standard(43, 50.0).draw().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn efficiency_is_clamped() {
        let wild = NoiseModel::<f64> {
            efficiency_sigma: 5.0,
            dead_volume_max_ul: 50.0,
            seed: 0,
        };
        for seed in 0..200 {
            let d = NoiseModel { seed, ..wild }.draw().unwrap();
            assert!((0.9..=1.1).contains(&d.step_efficiency));
            assert!((0.0..=50.0).contains(&d.dead_volume_ul));
        }
    }

    #[test]
    fn dead_volume_larger_than_tail_floors_at_zero() {
        let k = K::default();
        let draw = NoiseDraw {
            step_efficiency: 1.0,
            dead_volume_ul: 50.0,
        };
        let mut d = Dispenser::new(&k, draw, 50.0).unwrap();
        for n in 0..10 {
            d.step(n as f64);
        }
        let trace = d.finish(10.0);
        assert!(trace.drops.is_empty());
        assert_eq!(trace.delivered_volume_ml, 0.0);
    }

    #[test]
    fn csv_export() {
        let trace = run(0.1, 4.0, NoiseModel::zero());
        let csv = trace.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t_s,drop_volume_ul,cumulative_ml"));
        assert_eq!(lines.count(), trace.drops.len());
        assert_eq!(csv, run(0.1, 4.0, NoiseModel::zero()).to_csv_string());
    }
}
