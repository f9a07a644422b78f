use crate::geometry::Vec3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Constant mean wind plus Ornstein-Uhlenbeck gusts per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindModel {
    pub mean: [f64; 3],
    pub gust_stddev: [f64; 3],
    pub correlation_time: f64,
}

impl Default for WindModel {
    fn default() -> Self {
        Self::calm()
    }
}

impl WindModel {
    pub fn calm() -> Self {
        Self { mean: [0.0; 3], gust_stddev: [0.0; 3], correlation_time: 2.0 }
    }

    /// Light outdoor wind.
    pub fn light() -> Self {
        Self { mean: [1.0, 0.5, 0.0], gust_stddev: [0.3, 0.3, 0.1], correlation_time: 2.0 }
    }

    pub fn is_valid(&self) -> bool {
        self.gust_stddev.iter().all(|s| s.is_finite() && *s >= 0.0)
            && self.correlation_time.is_finite()
            && self.correlation_time > 0.0
            && self.mean.iter().all(|m| m.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindState {
    pub gust: Vec3,
}

impl WindState {
    pub fn new() -> Self {
        Self { gust: Vec3::zeros() }
    }

    /// Exact OU discretization over `dt`.
    pub fn step<R: Rng>(&mut self, model: &WindModel, dt: f64, rng: &mut R) {
        let a = (-dt / model.correlation_time).exp();
        let b = (1.0 - a * a).sqrt();
        for i in 0..3 {
            let sigma = model.gust_stddev[i];
            if sigma > 0.0 {
                let n: f64 = rng.sample(StandardNormal);
                self.gust[i] = a * self.gust[i] + sigma * b * n;
            }
        }
    }

    pub fn velocity(&self, model: &WindModel) -> Vec3 {
        Vec3::from(model.mean) + self.gust
    }
}

impl Default for WindState {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stationary_variance_matches_config() {
        let model = WindModel { mean: [1.0, 0.0, 0.0], gust_stddev: [0.5, 0.0, 0.0], correlation_time: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = WindState::new();
        let (mut sum, mut sq, mut n) = (0.0, 0.0, 0.0);
        for k in 0..400_000 {
            w.step(&model, 0.01, &mut rng);
            if k > 1000 && k % 10 == 0 {
                let g = w.gust.x;
                sum += g;
                sq += g * g;
                n += 1.0;
            }
        }
        let var = sq / n - (sum / n).powi(2);
        assert!((var.sqrt() - 0.5).abs() < 0.03, "std {}", var.sqrt());
        assert_eq!(w.gust.y, 0.0);
        assert_eq!(w.velocity(&model).x, 1.0 + w.gust.x);
    }
}
