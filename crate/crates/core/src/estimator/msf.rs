//! Buffered filter: IMU propagation of the front state plus corrections
//! computed at (possibly past) measurement timestamps.

use super::measure::{correction, gate_threshold};
use super::{propagate, ErrorCovariance, EstimatorError, FilterConfig, FilterState, Measurement, UpdateStats};
use crate::sensors::ImuSample;
use log::debug;
use std::collections::VecDeque;

/// Filter state and covariance at `time`, with the IMU sample used to
/// propagate onward from it.
#[derive(Debug, Clone)]
struct Snapshot {
    time: f64,
    state: FilterState,
    cov: ErrorCovariance,
    imu: ImuSample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionOutcome {
    Applied(UpdateStats),
    Rejected(UpdateStats),
    /// Measurement older than the retained buffer.
    Dropped { time: f64, oldest: f64 },
}

impl CorrectionOutcome {
    pub fn stats(&self) -> Option<&UpdateStats> {
        match self {
            Self::Applied(s) | Self::Rejected(s) => Some(s),
            Self::Dropped { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MsfFilter {
    pub config: FilterConfig,
    state: FilterState,
    cov: ErrorCovariance,
    time: f64,
    last_imu: Option<ImuSample>,
    buffer: VecDeque<Snapshot>,
    gates: [f64; 4],
}

impl MsfFilter {
    pub fn new(state: FilterState, cov: ErrorCovariance, time: f64, config: FilterConfig) -> Self {
        let gates = [0.0, 1.0, 2.0, 3.0].map(|d: f64| {
            if d == 0.0 {
                0.0
            } else {
                gate_threshold(d as usize, config.gate_probability)
            }
        });
        Self { config, state, cov, time, last_imu: None, buffer: VecDeque::new(), gates }
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn covariance(&self) -> &ErrorCovariance {
        &self.cov
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn last_imu(&self) -> Option<&ImuSample> {
        self.last_imu.as_ref()
    }

    /// Replaces state and covariance, clearing the history.
    pub fn reset(&mut self, state: FilterState, cov: ErrorCovariance, time: f64) {
        self.state = state;
        self.cov = cov;
        self.time = time;
        self.buffer.clear();
    }

    /// Propagates the front state to the sample time with the previous
    /// sample, then holds this one for the next interval.
    pub fn feed_imu(&mut self, imu: ImuSample) {
        if let Some(last) = self.last_imu {
            let mut remaining = imu.time - self.time;
            while remaining > 1e-12 {
                let dt = remaining.min(0.01);
                self.buffer.push_back(Snapshot { time: self.time, state: self.state.clone(), cov: self.cov, imu: last });
                let (s, p) = propagate(&self.state, &self.cov, &last, dt, &self.config);
                self.state = s;
                self.cov = p;
                self.time += dt;
                remaining -= dt;
            }
            self.time = imu.time.max(self.time);
            let horizon = self.time - self.config.buffer_horizon;
            while self.buffer.front().is_some_and(|s| s.time < horizon) {
                self.buffer.pop_front();
            }
        } else {
            self.time = self.time.max(imu.time);
        }
        self.last_imu = Some(imu);
    }

    fn gate(&self, dof: usize) -> f64 {
        self.gates.get(dof).copied().unwrap_or(f64::INFINITY)
    }

    /// Corrects with a measurement taken at `meas.time`.
    ///
    /// A measurement at or after the front time moves the front forward to
    /// its timestamp and updates there. An older one is evaluated against
    /// the buffered state at its timestamp; the resulting error-state delta
    /// is applied to the front state and the covariance is re-propagated
    /// through the buffered IMU samples.
    pub fn correct(&mut self, meas: &Measurement) -> Result<CorrectionOutcome, EstimatorError> {
        let gate = self.gate(meas.kind.dim());
        if meas.time >= self.time - 1e-9 {
            if meas.time > self.time + 1e-12 {
                if let Some(imu) = self.last_imu {
                    let dt = meas.time - self.time;
                    if dt <= 0.01 {
                        self.buffer.push_back(Snapshot { time: self.time, state: self.state.clone(), cov: self.cov, imu });
                        let (s, p) = propagate(&self.state, &self.cov, &imu, dt, &self.config);
                        self.state = s;
                        self.cov = p;
                        self.time = meas.time;
                    }
                }
            }
            let (dx, p, stats) = correction(&self.state, &self.cov, meas, gate)?;
            return Ok(match dx {
                Some(dx) => {
                    self.state = self.state.inject(&dx);
                    self.cov = p;
                    CorrectionOutcome::Applied(stats)
                }
                None => CorrectionOutcome::Rejected(stats),
            });
        }
        let oldest = self.buffer.front().map(|s| s.time).unwrap_or(self.time);
        if meas.time < oldest {
            debug!("dropping {:?} at {:.3}: buffer starts at {:.3}", meas.kind, meas.time, oldest);
            return Ok(CorrectionOutcome::Dropped { time: meas.time, oldest });
        }
        let k = self.buffer.partition_point(|s| s.time <= meas.time) - 1;
        let snap = &self.buffer[k];
        let lead = meas.time - snap.time;
        let (base, base_cov) = if lead > 1e-12 {
            propagate(&snap.state, &snap.cov, &snap.imu, lead, &self.config)
        } else {
            (snap.state.clone(), snap.cov)
        };
        let (dx, p_at, stats) = correction(&base, &base_cov, meas, gate)?;
        let Some(dx) = dx else {
            return Ok(CorrectionOutcome::Rejected(stats));
        };
        // Replay: same delta on every later snapshot and the front, covariance
        // re-propagated from the measurement time.
        let snap_imu = self.buffer[k].imu;
        let next_time = self.buffer.get(k + 1).map(|s| s.time).unwrap_or(self.time);
        let mut cov = p_at;
        let rest = next_time - meas.time;
        if rest > 1e-12 {
            cov = propagate(&base.inject(&dx), &cov, &snap_imu, rest, &self.config).1;
        }
        for i in k + 1..self.buffer.len() {
            let s = &mut self.buffer[i];
            s.state = s.state.inject(&dx);
            s.cov = cov;
            let end = self.buffer.get(i + 1).map(|n| n.time).unwrap_or(self.time);
            let s = &self.buffer[i];
            let dt = end - s.time;
            if dt > 1e-12 {
                cov = propagate(&s.state, &cov, &s.imu, dt, &self.config).1;
            }
        }
        self.state = self.state.inject(&dx);
        self.cov = cov;
        Ok(CorrectionOutcome::Applied(stats))
    }
}
