//! Batch experiments on top of [`World`]: single scenario runs, landing
//! Monte-Carlo, tag-error sweeps and endurance cycling.

use super::{RunLog, ScenarioConfig, ScenarioError, World};
use crate::autonomy::{EventScript, MasterState};
use crate::camera::{nadir_mount, CameraPose};
use crate::geometry::{from_euler, Vec3};
use crate::plant::{PadGeometry, TrueVehicleState};
use crate::sensors::{detect_from_pose, gauss, sample_tag_detections};
use crate::vision::{estimate_camera_pose, pad_pose_measurement, TagBundleSpec, TagSpec};
use nalgebra::{Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// Minimum trials per tag-error cell.
pub const MIN_TAG_TRIALS: usize = 100;
/// Reference cell for the pixel-noise calibration: 48 cm tag at 4 m.
pub const CALIBRATION_TAG_SIZE: f64 = 0.48;
pub const CALIBRATION_HEIGHT: f64 = 4.0;
/// Target 2σ height error of the reference cell, m.
pub const CALIBRATION_TARGET: f64 = 0.045;

/// Sleeps so that simulated time runs at most `factor` times wall-clock.
struct Pacer {
    factor: Option<f64>,
    start: Instant,
}

impl Pacer {
    fn new(factor: Option<f64>) -> Self {
        Self { factor, start: Instant::now() }
    }

    fn wait(&self, sim_time: f64) {
        if let Some(f) = self.factor {
            let due = Duration::from_secs_f64(sim_time / f);
            if let Some(d) = due.checked_sub(self.start.elapsed()) {
                std::thread::sleep(d);
            }
        }
    }
}

fn toml_report<T: Serialize>(v: &T) -> String {
    toml::to_string_pretty(v).expect("report serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub duration: f64,
    pub end_time: f64,
    pub final_state: String,
    pub fault: Option<String>,
    /// Completed LANDING to CHARGING cycles.
    pub sorties: usize,
    pub transitions: usize,
    pub tracking_rms: Option<f64>,
    pub estimation_rms: Option<f64>,
    pub min_voltage: Option<f64>,
}

impl RunSummary {
    fn from_world(w: &World) -> Self {
        let log = w.log();
        Self {
            seed: w.config().seed.unwrap_or_default(),
            duration: w.config().duration,
            end_time: w.time(),
            final_state: w.state().to_string(),
            fault: w.fault().map(str::to_string),
            sorties: count_sorties(log),
            transitions: log.state_sequence().len(),
            tracking_rms: w.tracking_rms(),
            estimation_rms: w.estimation_rms(),
            min_voltage: log.rows.iter().map(|r| r.voltage).reduce(f64::min),
        }
    }

    pub fn is_nominal(&self) -> bool {
        self.fault.is_none()
    }

    pub fn to_toml(&self) -> String {
        toml_report(self)
    }
}

fn count_sorties(log: &RunLog) -> usize {
    log.fsm.iter().filter(|r| r.state == MasterState::Landing && r.new_state == MasterState::Charging).count()
}

/// Runs one scenario to its duration or a FAULT.
pub fn run_scenario(cfg: &ScenarioConfig, script: EventScript) -> Result<(RunLog, RunSummary), ScenarioError> {
    let mut w = World::new(cfg, script)?;
    let pacer = Pacer::new(cfg.time_acceleration);
    w.run_until(cfg.duration, |w| {
        pacer.wait(w.time());
        false
    });
    let summary = RunSummary::from_world(&w);
    Ok((w.into_log(), summary))
}

/// 2σ error ellipse of a planar scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEllipse {
    pub mean: [f64; 2],
    /// Major and minor half-axes, 2·sqrt of the covariance eigenvalues.
    pub half_axes: [f64; 2],
    /// Direction of the major axis from the x axis, rad.
    pub angle: f64,
}

/// Needs at least two points.
pub fn error_ellipse(points: &[[f64; 2]]) -> Option<ErrorEllipse> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut c = Matrix2::zeros();
    for p in points {
        let d = nalgebra::Vector2::new(p[0] - mx, p[1] - my);
        c += d * d.transpose();
    }
    c /= n - 1.0;
    let eig = SymmetricEigen::new(c);
    let (i, j) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let axis = eig.eigenvectors.column(i);
    Some(ErrorEllipse {
        mean: [mx, my],
        half_axes: [2.0 * eig.eigenvalues[i].max(0.0).sqrt(), 2.0 * eig.eigenvalues[j].max(0.0).sqrt()],
        angle: axis[1].atan2(axis[0]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandingRun {
    pub index: usize,
    pub seed: u64,
    /// Start offset from the approach point, m.
    pub start_offset: [f64; 3],
    /// Resting position relative to the pad center in pad axes, m.
    pub touchdown: Option<[f64; 2]>,
    pub on_pad: bool,
    pub end_state: String,
    pub time: f64,
    pub fault: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub landed: usize,
    pub faults: usize,
    /// Runs that ended without a fault and without touching down.
    pub incomplete: usize,
    pub fraction_within_pad: f64,
    pub ellipse: Option<ErrorEllipse>,
    #[serde(skip)]
    pub results: Vec<LandingRun>,
}

impl MonteCarloReport {
    pub fn to_toml(&self) -> String {
        toml_report(self)
    }

    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("index,seed,dx0,dy0,dz0,x,y,on_pad,end_state,time,fault\n");
        for r in &self.results {
            let (x, y) = r.touchdown.map_or((String::new(), String::new()), |t| (t[0].to_string(), t[1].to_string()));
            let o = r.start_offset;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{x},{y},{},{},{},{}",
                r.index,
                r.seed,
                o[0],
                o[1],
                o[2],
                u8::from(r.on_pad),
                r.end_state,
                r.time,
                r.fault.as_deref().unwrap_or("")
            );
        }
        out
    }
}

/// Randomized approach offset: uniform ±1 m horizontally, ±0.5 m vertically.
fn approach_offset(seed: u64) -> Vec3 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(16);
    Vec3::new(r.gen_range(-1.0..=1.0), r.gen_range(-1.0..=1.0), r.gen_range(-0.5..=0.5))
}

fn landing_run(base: &ScenarioConfig, index: usize) -> LandingRun {
    let seed = base.seed.unwrap_or_default().wrapping_add(index as u64);
    let offset = approach_offset(seed);
    let mut cfg = base.clone();
    cfg.seed = Some(seed);
    cfg.home_store = None;
    cfg.start.state = MasterState::ReturnHome;
    cfg.start.position = Some((cfg.pad.center() + Vec3::new(0.0, 0.0, cfg.takeoff.safe_altitude) + offset).into());
    let fail = |msg: String| LandingRun {
        index,
        seed,
        start_offset: offset.into(),
        touchdown: None,
        on_pad: false,
        end_state: MasterState::Fault.to_string(),
        time: 0.0,
        fault: Some(msg),
    };
    let mut w = match World::new(&cfg, EventScript::default()) {
        Ok(w) => w,
        Err(e) => return fail(e.to_string()),
    };
    w.run_until(cfg.duration, |w| matches!(w.state(), MasterState::Charging | MasterState::Landed));
    let done = matches!(w.state(), MasterState::Charging | MasterState::Landed);
    let last = w.touchdowns().last().filter(|_| done);
    LandingRun {
        index,
        seed,
        start_offset: offset.into(),
        touchdown: last.map(|t| [t.offset.0, t.offset.1]),
        on_pad: last.is_some_and(|t| t.on_pad),
        end_state: w.state().to_string(),
        time: w.time(),
        fault: w.fault().map(str::to_string),
    }
}

fn parallel_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut out: Vec<(usize, T)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= n {
                            break mine;
                        }
                        mine.push((i, f(i)));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, t)| t).collect()
}

/// `runs` independent landings from randomized points around the approach
/// point. Run `i` uses seed `config.seed + i`.
pub fn run_monte_carlo_landing(cfg: &ScenarioConfig, runs: usize) -> Result<MonteCarloReport, ScenarioError> {
    if runs < 2 {
        return Err(ScenarioError::Invalid { path: "runs".into(), message: "need at least 2 runs".into() });
    }
    cfg.validate()?;
    cfg.seed.ok_or(ScenarioError::MissingSeed)?;
    let results = parallel_map(runs, |i| landing_run(cfg, i));
    let points: Vec<[f64; 2]> = results.iter().filter(|r| r.fault.is_none()).filter_map(|r| r.touchdown).collect();
    let faults = results.iter().filter(|r| r.fault.is_some()).count();
    let landed = points.len();
    Ok(MonteCarloReport {
        runs,
        landed,
        faults,
        incomplete: runs - landed - faults,
        fraction_within_pad: results.iter().filter(|r| r.on_pad && r.fault.is_none()).count() as f64 / runs as f64,
        ellipse: error_ellipse(&points),
        results,
    })
}

/// 2σ height error per (tag, height); `None` where nothing is detected.
#[derive(Debug, Clone, PartialEq)]
pub struct TagErrorTable {
    pub heights: Vec<f64>,
    pub rows: Vec<TagErrorRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagErrorRow {
    /// Tag edge length, m; `None` for the full landing bundle.
    pub size: Option<f64>,
    pub two_sigma: Vec<Option<f64>>,
}

impl TagErrorTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tag");
        for h in &self.heights {
            let _ = write!(out, ",{h}");
        }
        out.push('\n');
        for r in &self.rows {
            match r.size {
                Some(s) => {
                    let _ = write!(out, "{s}");
                }
                None => out.push_str("bundle"),
            }
            for c in &r.two_sigma {
                out.push(',');
                if let Some(v) = c {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn cell(&self, size: Option<f64>, height: f64) -> Option<f64> {
        let j = self.heights.iter().position(|h| (h - height).abs() < 1e-9)?;
        self.rows.iter().find(|r| r.size == size)?.two_sigma[j]
    }
}

fn two_sigma(errors: &[f64]) -> Option<f64> {
    (!errors.is_empty()).then(|| 2.0 * (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

/// 2σ height error of a single tag seen by a stationary nadir camera.
/// Every cell of one tag size replays the same noise stream.
fn single_tag_cell(cfg: &ScenarioConfig, size: f64, height: f64, trials: usize, pixel_sigma: f64, stream: u64) -> Option<f64> {
    let bundle = TagBundleSpec { tags: vec![TagSpec { id: 0, size, x: 0.0, y: 0.0, yaw: 0.0 }] };
    let pad = PadGeometry { center: [0.0; 3], yaw: 0.0, ..cfg.pad.clone() };
    let cam = CameraPose { rotation: nadir_mount(), position: Vec3::new(0.0, 0.0, height) };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or_default());
    rng.set_stream(stream);
    let mut errors = Vec::with_capacity(trials);
    for _ in 0..trials {
        let dets = detect_from_pose(&cam, &cfg.camera, &bundle, &pad, &cfg.visibility, pixel_sigma, 0.0, &mut rng);
        if dets.is_empty() {
            continue;
        }
        if let Ok(est) = estimate_camera_pose(&dets, &bundle, &cfg.camera, None) {
            errors.push(est.position.z - height);
        }
    }
    // A cell counts only when the tag is reliably seen.
    (errors.len() * 2 >= trials).then(|| two_sigma(&errors)).flatten()
}

/// 2σ error of the landing-point height measured through the full bundle from
/// a vehicle hovering above the pad with small position and tilt jitter.
fn bundle_cell(cfg: &ScenarioConfig, height: f64, trials: usize) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or_default());
    rng.set_stream(64);
    let pad = &cfg.pad;
    let mut errors = Vec::with_capacity(trials);
    for _ in 0..trials {
        let p = pad.center() + Vec3::new(0.05 * gauss(&mut rng), 0.05 * gauss(&mut rng), height);
        let tilt = 2f64.to_radians();
        let q = from_euler(tilt * gauss(&mut rng), tilt * gauss(&mut rng), pad.yaw + 0.1 * gauss(&mut rng));
        let mut truth = TrueVehicleState::hovering(p, 0.0, &cfg.vehicle);
        truth.attitude = q;
        let dets = sample_tag_detections(&truth, &cfg.camera, &cfg.bundle, pad, &cfg.visibility, cfg.noise.pixel_sigma, &mut rng);
        if dets.is_empty() {
            continue;
        }
        if let Ok(est) = estimate_camera_pose(&dets, &cfg.bundle, &cfg.camera, None) {
            let z = pad_pose_measurement(&est, &p, &q, &cfg.camera);
            errors.push(z[2] - pad.center[2]);
        }
    }
    (errors.len() * 2 >= trials).then(|| two_sigma(&errors)).flatten()
}

/// Sweeps single tags of each size and the configured bundle over `heights`
/// with the configured pixel noise.
pub fn characterize_tag_error(cfg: &ScenarioConfig, heights: &[f64], sizes: &[f64], trials: usize) -> Result<TagErrorTable, ScenarioError> {
    if trials < MIN_TAG_TRIALS {
        return Err(ScenarioError::Invalid { path: "trials".into(), message: format!("need at least {MIN_TAG_TRIALS} per cell") });
    }
    cfg.validate()?;
    cfg.seed.ok_or(ScenarioError::MissingSeed)?;
    let sigma = cfg.noise.pixel_sigma;
    let mut rows: Vec<TagErrorRow> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| TagErrorRow { size: Some(s), two_sigma: heights.iter().map(|&h| single_tag_cell(cfg, s, h, trials, sigma, 32 + i as u64)).collect() })
        .collect();
    rows.push(TagErrorRow { size: None, two_sigma: heights.iter().map(|&h| bundle_cell(cfg, h, trials)).collect() });
    Ok(TagErrorTable { heights: heights.to_vec(), rows })
}

/// Pixel noise that gives the reference cell its target 2σ error, by
/// bisection. Every evaluation replays the same noise stream, so the cell
/// error is monotone in the noise level.
pub fn calibrate_pixel_sigma(cfg: &ScenarioConfig, trials: usize) -> Option<f64> {
    let err = |s: f64| single_tag_cell(cfg, CALIBRATION_TAG_SIZE, CALIBRATION_HEIGHT, trials, s, 32);
    let (mut lo, mut hi) = (0.0, 1.0);
    while err(hi)? < CALIBRATION_TARGET {
        hi *= 2.0;
        if hi > 64.0 {
            return None;
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if err(mid)? < CALIBRATION_TARGET {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnduranceReport {
    pub hours: f64,
    pub sorties: usize,
    /// Sorties whose state sequence is the nominal cycle.
    pub nominal_sorties: usize,
    pub faults: usize,
    pub fault: Option<String>,
    pub scripted_events: usize,
    pub min_voltage: Option<f64>,
    pub sawtooth: bool,
    pub landing_ellipse: Option<ErrorEllipse>,
    #[serde(skip)]
    pub sequences: Vec<Vec<MasterState>>,
    #[serde(skip)]
    pub landings: Vec<[f64; 2]>,
}

impl EnduranceReport {
    pub fn to_toml(&self) -> String {
        toml_report(self)
    }

    pub fn sorties_csv(&self) -> String {
        let mut out = String::from("sortie,sequence,x,y\n");
        for (i, seq) in self.sequences.iter().enumerate() {
            let s: Vec<String> = seq.iter().map(|m| m.to_string()).collect();
            let (x, y) = self.landings.get(i).map_or((String::new(), String::new()), |p| (p[0].to_string(), p[1].to_string()));
            let _ = writeln!(out, "{},{},{x},{y}", i + 1, s.join(";"));
        }
        out
    }
}

pub const NOMINAL_SORTIE: [MasterState; 5] =
    [MasterState::Takeoff, MasterState::Mission, MasterState::ReturnHome, MasterState::Landing, MasterState::Charging];

/// Entered states grouped per sortie, each starting at TAKEOFF.
pub fn sortie_sequences(log: &RunLog) -> Vec<Vec<MasterState>> {
    let mut out: Vec<Vec<MasterState>> = Vec::new();
    for s in log.state_sequence() {
        if s == MasterState::Takeoff || out.is_empty() {
            out.push(Vec::new());
        }
        out.last_mut().expect("pushed").push(s);
    }
    out
}

/// Voltage strictly falls between consecutive rows with the motors in use and
/// strictly rises between consecutive CHARGING rows.
pub fn battery_sawtooth(log: &RunLog) -> bool {
    log.rows.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.state != b.state {
            return true;
        }
        match a.state {
            MasterState::Charging => b.voltage > a.voltage || a.charge >= 1.0,
            s if s.is_airborne() || s == MasterState::Takeoff => b.voltage < a.voltage,
            _ => true,
        }
    })
}

/// Cycles sorties for `hours` of simulated time. Pacing follows
/// `config.time_acceleration`.
pub fn run_endurance(cfg: &ScenarioConfig, hours: f64) -> Result<(RunLog, EnduranceReport), ScenarioError> {
    let mut cfg = cfg.clone();
    cfg.duration = hours * 3600.0;
    let script = EventScript::default();
    let scripted_events = script.events().len();
    let mut w = World::new(&cfg, script)?;
    let pacer = Pacer::new(cfg.time_acceleration);
    w.run_until(cfg.duration, |w| {
        pacer.wait(w.time());
        false
    });
    let landings: Vec<[f64; 2]> = w.touchdowns().iter().filter(|t| t.on_pad).map(|t| [t.offset.0, t.offset.1]).collect();
    let log = w.log();
    let sequences = sortie_sequences(log);
    let report = EnduranceReport {
        hours,
        sorties: count_sorties(log),
        nominal_sorties: sequences.iter().filter(|s| s.as_slice() == NOMINAL_SORTIE).count(),
        faults: log.fsm.iter().filter(|r| r.new_state == MasterState::Fault && r.state != MasterState::Fault).count()
            + usize::from(w.fault().is_some() && w.state() != MasterState::Fault),
        fault: w.fault().map(str::to_string),
        scripted_events,
        min_voltage: log.rows.iter().map(|r| r.voltage).reduce(f64::min),
        sawtooth: battery_sawtooth(log),
        landing_ellipse: error_ellipse(&landings),
        sequences,
        landings,
    };
    Ok((w.into_log(), report))
}
